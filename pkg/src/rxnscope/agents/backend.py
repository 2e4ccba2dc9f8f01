"""Reasoning backends: a deterministic rule table and a remote HTTP client.

Every decision point in the pipeline goes through ``respond(role,
context, tool_result)``. The scripted backend answers from fixed rules
so runs are reproducible; the remote backend forwards the same payload
to a configured HTTP endpoint and is never used in tests.
"""

from __future__ import annotations

import json
import os
import urllib.request
from typing import Any, Optional

DEFAULT_TEMPERATURE = 0.1


class BackendError(RuntimeError):
    pass


# Canonical plans per modality set. Combinations outside this table are
# a planning error, not a guess.
PLAN_TABLE: dict[frozenset, tuple[str, ...]] = {
    frozenset({"reaction_template_image", "structure_table", "text_description"}): (
        "reaction_template_parsing",
        "molecular_recognition",
        "structure_rgroup",
        "condition_interpretation",
        "text_extraction",
        "data_structure",
    ),
    frozenset({"reaction_template_image", "structure_table"}): (
        "reaction_template_parsing",
        "molecular_recognition",
        "structure_rgroup",
        "condition_interpretation",
        "data_structure",
    ),
    frozenset({"reaction_template_image", "text_table", "text_description"}): (
        "reaction_template_parsing",
        "text_rgroup",
        "condition_interpretation",
        "text_extraction",
        "data_structure",
    ),
    frozenset({"reaction_template_image", "text_table"}): (
        "reaction_template_parsing",
        "text_rgroup",
        "condition_interpretation",
        "data_structure",
    ),
    frozenset({"molecule_image_only"}): (
        "molecular_recognition",
        "data_structure",
    ),
    frozenset({"molecule_image_only", "text_description"}): (
        "molecular_recognition",
        "text_extraction",
        "data_structure",
    ),
    frozenset({"plain_text_only"}): (
        "text_extraction",
        "data_structure",
    ),
}


def edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


class ScriptedBackend:
    """Rule-table reasoning; same inputs always give the same answer."""

    name = "scripted"

    def respond(
        self, role: str, context: dict, tool_result: Any = None
    ) -> dict:
        if role == "planner":
            modalities = frozenset(context.get("modalities", []))
            steps = PLAN_TABLE.get(modalities)
            if steps is None:
                return {
                    "action": "error",
                    "message": f"no plan for modality set {sorted(modalities)}",
                }
            return {"action": "plan", "steps": list(steps)}
        if role == "token_correction":
            token = context.get("token", "")
            vocabulary = context.get("vocabulary", [])
            if token in vocabulary:
                return {"action": "keep", "token": token}
            candidates = sorted(
                v for v in vocabulary if edit_distance(token, v) == 1
            )
            if candidates:
                return {"action": "correct", "token": candidates[0]}
            return {"action": "keep", "token": token}
        if role == "review":
            return {"action": "retry"}
        return {"action": "proceed"}


class RemoteBackend:
    """HTTP JSON client for a hosted reasoning model.

    Configured through arguments or the RXNSCOPE_REMOTE_URL /
    RXNSCOPE_REMOTE_TOKEN / RXNSCOPE_REMOTE_MODEL environment variables.
    """

    name = "remote"

    def __init__(
        self,
        url: Optional[str] = None,
        token: Optional[str] = None,
        model: Optional[str] = None,
        temperature: float = DEFAULT_TEMPERATURE,
        timeout: float = 60.0,
    ):
        self.url = url or os.environ.get("RXNSCOPE_REMOTE_URL")
        self.token = token or os.environ.get("RXNSCOPE_REMOTE_TOKEN")
        self.model = model or os.environ.get("RXNSCOPE_REMOTE_MODEL", "")
        self.temperature = temperature
        self.timeout = timeout
        if not self.url:
            raise BackendError(
                "remote backend needs a URL (RXNSCOPE_REMOTE_URL or --url)"
            )

    def respond(
        self, role: str, context: dict, tool_result: Any = None
    ) -> dict:
        payload = {
            "role": role,
            "context": context,
            "tool_result": tool_result,
            "model": self.model,
            "temperature": self.temperature,
        }
        data = json.dumps(payload).encode()
        req = urllib.request.Request(
            self.url, data=data, headers={"Content-Type": "application/json"}
        )
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = resp.read()
        except OSError as exc:
            raise BackendError(f"remote backend request failed: {exc}") from None
        try:
            out = json.loads(body)
        except json.JSONDecodeError as exc:
            raise BackendError(f"remote backend sent invalid JSON: {exc}") from None
        if not isinstance(out, dict) or "action" not in out:
            raise BackendError("remote backend response lacks an 'action' field")
        return out
