"""Input descriptors and the on-disk fixture bundle."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

MODALITIES = frozenset(
    {
        "reaction_template_image",
        "structure_table",
        "text_table",
        "text_description",
        "molecule_image_only",
        "plain_text_only",
    }
)

_TABLE_LIKE = frozenset(
    {"reaction_template_image", "structure_table", "text_table"}
)


class DescriptorError(ValueError):
    pass


@dataclass(frozen=True)
class InputDescriptor:
    modalities: frozenset[str]
    bundle_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if not self.modalities:
            raise DescriptorError("descriptor needs at least one modality")
        unknown = self.modalities - MODALITIES
        if unknown:
            raise DescriptorError(f"unknown modalities: {sorted(unknown)}")
        if "molecule_image_only" in self.modalities and (
            self.modalities & _TABLE_LIKE
        ):
            raise DescriptorError(
                "molecule_image_only cannot combine with table or template modalities"
            )
        if "plain_text_only" in self.modalities and len(self.modalities) > 1:
            raise DescriptorError("plain_text_only must be the sole modality")


class Bundle:
    """Directory of pre-extracted tool outputs driving an offline run."""

    def __init__(self, root: Path, descriptor: InputDescriptor):
        self.root = Path(root)
        self.descriptor = descriptor

    @classmethod
    def load(cls, path: str | Path) -> "Bundle":
        root = Path(path)
        desc_path = root / "descriptor.json"
        if not desc_path.is_file():
            raise DescriptorError(f"no descriptor.json in {root}")
        with open(desc_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        descriptor = InputDescriptor(
            modalities=frozenset(raw.get("modalities", [])), bundle_path=root
        )
        return cls(root, descriptor)

    def has(self, name: str) -> bool:
        return (self.root / name).is_file()

    def read_json(self, name: str) -> Any:
        with open(self.root / name, encoding="utf-8") as fh:
            return json.load(fh)

    def read_text(self, name: str) -> str:
        return (self.root / name).read_text(encoding="utf-8")
