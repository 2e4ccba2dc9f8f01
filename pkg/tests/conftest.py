from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

REPO = Path(__file__).resolve().parents[1]
FIG2_BUNDLE = REPO / "fixtures" / "fig2"


@pytest.fixture(scope="session")
def fig2_bundle() -> Path:
    if not (FIG2_BUNDLE / "descriptor.json").exists():
        pytest.skip("fig2 fixture bundle missing; run scripts/make_fig2_bundle.py")
    return FIG2_BUNDLE
