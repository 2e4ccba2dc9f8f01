"""Tool registry: fixture-backed recognition stubs plus real converters.

Recognition tools (detector, image parsers, OCR, NER) read their answers
from bundle sidecar files; conversion tools (graph-to-SMILES, reactant
reconstruction, table parsing, condition interpretation) run the real
implementations from the chemistry modules. Both sides speak the same
JSON request/response protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

from ..chemops import AbbreviationTable, AliasRegistry
from ..molgraph import graph_from_json
from ..reaction import (
    ConditionLexicon,
    classify_condition,
    condition_from_json,
    condition_to_json,
    parse_rgroup_table,
)
from ..rgroup import ReactionTemplate, expand_abbreviations, extract_rgroup_fragments, reconstruct_reactants
from ..smiles import parse_smiles, write_smiles
from ..substructure import MatchError
from .bundle import Bundle


class ToolError(RuntimeError):
    pass


class DetectionError(ValueError):
    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"token {offset}: {message}")


@dataclass
class ToolInvocation:
    tool: str
    request: Any
    response: Any
    status: str
    attempt: int
    error: Optional[str] = None

    def to_json(self) -> dict:
        out = {
            "tool": self.tool,
            "request": self.request,
            "response": self.response,
            "status": self.status,
            "attempt": self.attempt,
        }
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class RunContext:
    bundle: Optional[Bundle]
    table: AbbreviationTable = field(default_factory=AbbreviationTable.default)
    aliases: AliasRegistry = field(default_factory=AliasRegistry)
    lexicon: ConditionLexicon = field(default_factory=ConditionLexicon.default)

    def require_bundle(self) -> Bundle:
        if self.bundle is None:
            raise ToolError("this tool needs a fixture bundle")
        return self.bundle


ToolFn = Callable[[RunContext, dict], dict]


class ToolRegistry:
    def __init__(self) -> None:
        self._tools: dict[str, ToolFn] = {}

    def register(self, name: str, fn: ToolFn) -> None:
        self._tools[name] = fn

    def names(self) -> list[str]:
        return sorted(self._tools)

    def invoke(self, name: str, ctx: RunContext, request: dict) -> dict:
        fn = self._tools.get(name)
        if fn is None:
            raise ToolError(f"unknown tool {name!r}")
        return fn(ctx, request)


def decode_detection_sequence(tokens: list) -> list[dict]:
    """Turn a flat [x1,y1,x2,y2,kind, ...] token stream into boxes."""
    if len(tokens) % 5 != 0:
        raise DetectionError(len(tokens), "token count is not a multiple of 5")
    boxes: list[dict] = []
    for i in range(0, len(tokens), 5):
        x1, y1, x2, y2 = tokens[i : i + 4]
        kind = tokens[i + 4]
        for off, value in enumerate((x1, y1, x2, y2)):
            if not isinstance(value, int) or value < 0:
                raise DetectionError(i + off, f"bad coordinate {value!r}")
        if x1 >= x2:
            raise DetectionError(i, f"inverted corners: x1={x1} >= x2={x2}")
        if y1 >= y2:
            raise DetectionError(i + 1, f"inverted corners: y1={y1} >= y2={y2}")
        boxes.append({"x1": x1, "y1": y1, "x2": x2, "y2": y2, "kind": str(kind)})
    return boxes


# ---------------------------------------------------------------------------
# Fixture-backed recognition stubs
# ---------------------------------------------------------------------------


def _tool_mol_detector(ctx: RunContext, request: dict) -> dict:
    tokens = ctx.require_bundle().read_json("boxes.json")
    try:
        return {"boxes": decode_detection_sequence(tokens)}
    except DetectionError as exc:
        raise ToolError(str(exc)) from None


def _tool_image2graph(ctx: RunContext, request: dict) -> dict:
    return {"molecules": ctx.require_bundle().read_json("molecules.json")}


def _tool_rxn_img_parser(ctx: RunContext, request: dict) -> dict:
    return ctx.require_bundle().read_json("template.json")


def _tool_ocr(ctx: RunContext, request: dict) -> dict:
    bundle = ctx.require_bundle()
    source = request.get("source", "description")
    if source == "conditions":
        template = bundle.read_json("template.json")
        return {"text": template.get("condition_text", "")}
    if source == "description":
        text = bundle.read_text("text.txt").strip() if bundle.has("text.txt") else ""
        return {"text": text}
    if source == "table":
        text = bundle.read_text("table.txt") if bundle.has("table.txt") else ""
        return {"text": text}
    raise ToolError(f"unknown ocr source {source!r}")


def _tool_ner(ctx: RunContext, request: dict) -> dict:
    bundle = ctx.require_bundle()
    entities = bundle.read_json("ner.json") if bundle.has("ner.json") else []
    return {"entities": entities}


def _tool_rxn_extractor(ctx: RunContext, request: dict) -> dict:
    bundle = ctx.require_bundle()
    raw = bundle.read_json("rxn.json") if bundle.has("rxn.json") else {}
    return {"annotations": raw.get("annotations", [])}


# ---------------------------------------------------------------------------
# Real converters
# ---------------------------------------------------------------------------


def _tool_graph2smiles(ctx: RunContext, request: dict) -> dict:
    try:
        g = graph_from_json(request["graph"])
    except (KeyError, ValueError) as exc:
        raise ToolError(f"bad graph payload: {exc}") from None
    if request.get("expand", True):
        g = expand_abbreviations(g, ctx.table, ctx.aliases)
    return {"smiles": write_smiles(g)}


def _tool_table_parser(ctx: RunContext, request: dict) -> dict:
    text = request.get("text")
    if text is None:
        bundle = ctx.require_bundle()
        if not bundle.has("table.txt"):
            raise ToolError("bundle has no table.txt")
        text = bundle.read_text("table.txt")
    try:
        rows = parse_rgroup_table(text)
    except ValueError as exc:
        raise ToolError(str(exc)) from None
    return {
        "rows": [
            {"entry": r.entry, "values": dict(r.values), "metadata": dict(r.metadata)}
            for r in rows
        ]
    }


def _tool_smiles_reconstructor(ctx: RunContext, request: dict) -> dict:
    spec = request["template"]
    try:
        template = ReactionTemplate(
            reactant_templates=tuple(parse_smiles(s) for s in spec["reactants"]),
            product_templates=tuple(parse_smiles(s) for s in spec["products"]),
        )
    except (KeyError, ValueError) as exc:
        raise ToolError(f"bad template payload: {exc}") from None
    product_template = template.product_templates[0]
    variant_reactions: list[dict] = []
    skipped: list[str] = []
    for variant in request.get("variants", []):
        label = variant.get("label")
        try:
            graph = parse_smiles(variant["smiles"])
            bindings = extract_rgroup_fragments(product_template, graph)
            reactants = reconstruct_reactants(template, bindings, ctx.table, ctx.aliases)
        except (MatchError, ValueError):
            skipped.append(label if label is not None else variant.get("smiles", "?"))
            continue
        variant_reactions.append(
            {
                "label": label,
                "reactants": reactants,
                "product": variant["smiles"],
                "bindings": {
                    name: write_smiles(frag.graph)
                    for name, frag in sorted(bindings.items())
                },
            }
        )
    return {"variant_reactions": variant_reactions, "skipped": skipped}


def _tool_condition_interpreter(ctx: RunContext, request: dict) -> dict:
    text = request.get("text", "")
    molecule_smiles: dict[str, str] = request.get("molecule_smiles", {})

    def attach(items):
        out = []
        for item in items:
            if item.role == "reagent" and item.label in molecule_smiles and item.smiles is None:
                item = replace(item, smiles=molecule_smiles[item.label])
            out.append(item)
        return out

    shared = attach(classify_condition(text, ctx.lexicon)) if text else []
    per_variant: dict[str, list[dict]] = {}
    for label, notes in sorted(request.get("variant_annotations", {}).items()):
        items = []
        for note in notes:
            items.extend(attach(classify_condition(note, ctx.lexicon)))
        if items:
            per_variant[label] = [condition_to_json(i) for i in items]
    for label, raw_items in sorted(request.get("direct_items", {}).items()):
        parsed = [
            condition_to_json(condition_from_json(d, f"direct_items[{label}]"))
            for d in raw_items
        ]
        per_variant.setdefault(label, []).extend(parsed)
    return {
        "shared": [condition_to_json(i) for i in shared],
        "per_variant": per_variant,
    }


def default_registry() -> ToolRegistry:
    registry = ToolRegistry()
    registry.register("mol_detector", _tool_mol_detector)
    registry.register("image2graph", _tool_image2graph)
    registry.register("rxn_img_parser", _tool_rxn_img_parser)
    registry.register("ocr", _tool_ocr)
    registry.register("ner", _tool_ner)
    registry.register("rxn_extractor", _tool_rxn_extractor)
    registry.register("graph2smiles", _tool_graph2smiles)
    registry.register("table_parser", _tool_table_parser)
    registry.register("smiles_reconstructor", _tool_smiles_reconstructor)
    registry.register("condition_interpreter", _tool_condition_interpreter)
    return registry
