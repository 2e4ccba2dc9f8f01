"""Reaction records, condition-role classification, tables, JSON codec."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .molgraph import is_placeholder_label
from .smiles import SmilesParseError, parse_smiles

log = logging.getLogger(__name__)

ROLES = ("reagent", "solvent", "temperature", "time", "yield", "add_info")


class CodecError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class TableParseError(ValueError):
    pass


@dataclass(frozen=True)
class ConditionItem:
    role: str
    text: str
    smiles: Optional[str] = None
    label: Optional[str] = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown condition role {self.role!r}")
        if not self.text:
            raise ValueError("condition text must be non-empty")
        if self.smiles is not None:
            parse_smiles(self.smiles)

    def identity(self) -> tuple[str, str, Optional[str]]:
        return (self.role, self.text, self.label)


@dataclass(frozen=True)
class MoleculeEntry:
    smiles: str
    label: Optional[str] = None

    def __post_init__(self) -> None:
        parse_smiles(self.smiles)


@dataclass(frozen=True)
class ReactionRecord:
    reaction_id: str
    reactants: tuple[MoleculeEntry, ...] = ()
    conditions: tuple[ConditionItem, ...] = ()
    products: tuple[MoleculeEntry, ...] = ()
    additional_info: tuple[str, ...] = ()

    def is_template_record(self) -> bool:
        entries = self.reactants + self.products
        return any("[" in e.smiles and _contains_placeholder(e.smiles) for e in entries)

    def product_labels(self) -> list[str]:
        return [e.label for e in self.products if e.label is not None]


def _contains_placeholder(smiles: str) -> bool:
    try:
        g = parse_smiles(smiles)
    except SmilesParseError:
        return False
    return bool(g.placeholder_indices())


def validate_record(record: ReactionRecord) -> list[str]:
    problems: list[str] = []
    if not record.reaction_id:
        problems.append("empty reaction_id")
    if not record.is_template_record():
        if not record.reactants:
            problems.append("concrete record has no reactants")
        if not record.products:
            problems.append("concrete record has no products")
    return problems


@dataclass(frozen=True)
class RGroupTableRow:
    entry: int
    values: dict[str, str] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.entry < 1:
            raise ValueError(f"table entry must be >= 1, got {self.entry}")


# ---------------------------------------------------------------------------
# Condition classification
# ---------------------------------------------------------------------------


class ConditionLexicon:
    def __init__(self, solvents: dict[str, str], reagents: Iterable[str]):
        self._solvents = {name.lower(): (name, smi) for name, smi in solvents.items()}
        self._reagents = {name.lower() for name in reagents}

    @classmethod
    def from_file(cls, path: str | Path) -> "ConditionLexicon":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(raw.get("solvents", {}), raw.get("reagents", []))

    @classmethod
    def default(cls) -> "ConditionLexicon":
        text = (
            resources.files("rxnscope.data")
            .joinpath("condition_lexicon.json")
            .read_text()
        )
        raw = json.loads(text)
        return cls(raw.get("solvents", {}), raw.get("reagents", []))

    def solvent_smiles(self, name: str) -> Optional[str]:
        hit = self._solvents.get(name.lower())
        return hit[1] if hit else None

    def is_reagent(self, name: str) -> bool:
        return name.lower() in self._reagents


_LABEL_TOKEN = re.compile(r"^[A-Z][a-z]?\d+$")
# Tokens shaped like labels that are really element formulas.
_FORMULA_TOKENS = {"H2", "O2", "N2", "F2", "Cl2", "Br2", "I2", "S8", "P4"}

_TEMP_VALUE = re.compile(r"(^|[\s(])-?\d+(\.\d+)?\s*°?\s*[CK]\b")
_TIME_VALUE = re.compile(r"\b\d+(\.\d+)?\s*(h|hr|hrs|min|mins|s|d|day|days)\b", re.I)
_RATIO = re.compile(r"\b\d+(\.\d+)?\s*:\s*\d+(\.\d+)?\b")
_MOL_PERCENT = re.compile(r"\bmol\s*%", re.I)
_PERCENT_VALUE = re.compile(r"\d\s*%")


def _extract_labels(text: str) -> list[str]:
    labels = []
    for token in re.split(r"[\s,;/]+", text):
        token = token.strip("().")
        if _LABEL_TOKEN.match(token) and token not in _FORMULA_TOKENS:
            labels.append(token)
    return labels


def _classify_part(part: str, lexicon: ConditionLexicon) -> list[ConditionItem]:
    text = part.strip()
    low = text.lower()
    has_mol_percent = bool(_MOL_PERCENT.search(text))
    has_ee_dr = bool(re.search(r"\b(ee|dr|er|ratio)\b", low))

    if _PERCENT_VALUE.search(text) and not has_ee_dr and not has_mol_percent:
        return [ConditionItem(role="yield", text=text)]
    if low in ("rt", "r.t.", "room temperature") or _TEMP_VALUE.search(text):
        return [ConditionItem(role="temperature", text=text)]
    if _TIME_VALUE.search(text):
        return [ConditionItem(role="time", text=text)]
    if has_ee_dr or _RATIO.search(text):
        return [ConditionItem(role="add_info", text=text)]

    tokens = [t.strip("().,") for t in text.split()]
    if has_mol_percent or any(lexicon.is_reagent(t) for t in tokens if t):
        labels = _extract_labels(text)
        if labels:
            return [ConditionItem(role="reagent", text=text, label=lab) for lab in labels]
        return [ConditionItem(role="reagent", text=text)]
    solvent = lexicon.solvent_smiles(text)
    if solvent is not None:
        return [ConditionItem(role="solvent", text=text, smiles=solvent)]
    return [ConditionItem(role="add_info", text=text)]


def classify_condition(
    text: str, lexicon: Optional[ConditionLexicon] = None
) -> list[ConditionItem]:
    """Split a condition string and assign a role to every piece.

    Total: unrecognized pieces land in add_info rather than being
    dropped. A piece naming several labeled reagents ("10 mol% B17 or
    B27") yields one item per label, sharing the verbatim text.
    """
    lexicon = lexicon if lexicon is not None else ConditionLexicon.default()
    items: list[ConditionItem] = []
    for part in re.split(r"[,;]", text):
        if part.strip():
            items.extend(_classify_part(part, lexicon))
    return items


def align_conditions(
    shared: list[ConditionItem],
    per_variant: dict[str, list[ConditionItem]],
    records: list[ReactionRecord],
) -> tuple[list[ReactionRecord], list[ConditionItem]]:
    """Attach shared plus label-matched variant conditions to each record.

    Returns the updated records and a residue list holding variant items
    whose label matched no record's product labels.
    """
    out: list[ReactionRecord] = []
    matched_labels: set[str] = set()
    for record in records:
        labels = set(record.product_labels())
        items = list(shared)
        for label in sorted(per_variant.keys() & labels):
            matched_labels.add(label)
            items.extend(per_variant[label])
        seen: set[tuple] = set()
        deduped = []
        for item in items:
            if item.identity() in seen:
                continue
            seen.add(item.identity())
            deduped.append(item)
        out.append(replace(record, conditions=tuple(deduped)))
    residues: list[ConditionItem] = []
    for label in sorted(set(per_variant) - matched_labels):
        log.warning("condition annotation for %r matches no reaction record", label)
        residues.extend(per_variant[label])
    return out, residues


# ---------------------------------------------------------------------------
# Text tables
# ---------------------------------------------------------------------------

_CELL_SPLIT = re.compile(r"\t+|\s{2,}")
_ABSENT_CELLS = {"", "-", "—", "–"}


def parse_rgroup_table(text: str) -> list[RGroupTableRow]:
    """Parse a whitespace-or-tab table whose header names R-group columns.

    Header cells matching the placeholder grammar ("R1", "Ar2") become
    value columns; an "entry" column supplies row numbers; everything
    else is metadata. Dash or empty cells mean absent.
    """
    lines = [ln.rstrip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TableParseError("table has no header row")
    headers = _CELL_SPLIT.split(lines[0].strip())
    rows: list[RGroupTableRow] = []
    for row_no, line in enumerate(lines[1:], start=1):
        cells = _CELL_SPLIT.split(line.strip())
        if len(cells) > len(headers):
            raise TableParseError(
                f"row {row_no} has {len(cells)} cells for {len(headers)} headers"
            )
        cells += [""] * (len(headers) - len(cells))
        entry: Optional[int] = None
        values: dict[str, str] = {}
        metadata: dict[str, str] = {}
        for header, cell in zip(headers, cells):
            cell = cell.strip()
            if cell in _ABSENT_CELLS:
                continue
            if header.lower() == "entry":
                try:
                    entry = int(cell)
                except ValueError:
                    raise TableParseError(
                        f"row {row_no}: entry cell {cell!r} is not an integer"
                    ) from None
            elif is_placeholder_label(header):
                values[header] = cell
            else:
                metadata[header] = cell
        rows.append(
            RGroupTableRow(entry=entry if entry is not None else row_no, values=values, metadata=metadata)
        )
    return rows


# ---------------------------------------------------------------------------
# Record JSON codec
# ---------------------------------------------------------------------------


def _molecule_to_json(entry: MoleculeEntry) -> dict:
    out: dict = {"smiles": entry.smiles}
    if entry.label is not None:
        out["label"] = entry.label
    return out


def condition_to_json(item: ConditionItem) -> dict:
    out: dict = {"role": item.role, "text": item.text}
    if item.smiles is not None:
        out["smiles"] = item.smiles
    if item.label is not None:
        out["label"] = item.label
    return out


def record_to_json(record: ReactionRecord) -> dict:
    return {
        "reaction_id": record.reaction_id,
        "reactants": [_molecule_to_json(e) for e in record.reactants],
        "conditions": [condition_to_json(c) for c in record.conditions],
        "products": [_molecule_to_json(e) for e in record.products],
        "additional_info": list(record.additional_info),
    }


def encode_records(
    records: Iterable[ReactionRecord], text_description: str = ""
) -> str:
    doc = {
        "Text description": text_description,
        "reactions": [record_to_json(r) for r in records],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False)


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise CodecError(path, f"missing required key {key!r}")
    return obj[key]


def _molecule_from_json(obj, path: str) -> MoleculeEntry:
    if not isinstance(obj, dict):
        raise CodecError(path, "expected an object")
    smiles = _require(obj, "smiles", path)
    try:
        return MoleculeEntry(smiles=smiles, label=obj.get("label"))
    except (SmilesParseError, ValueError) as exc:
        raise CodecError(f"{path}.smiles", str(exc)) from None


def condition_from_json(obj, path: str) -> ConditionItem:
    if not isinstance(obj, dict):
        raise CodecError(path, "expected an object")
    role = _require(obj, "role", path)
    if role not in ROLES:
        raise CodecError(f"{path}.role", f"unknown role {role!r}")
    text = _require(obj, "text", path)
    try:
        return ConditionItem(
            role=role, text=text, smiles=obj.get("smiles"), label=obj.get("label")
        )
    except (SmilesParseError, ValueError) as exc:
        raise CodecError(path, str(exc)) from None


def record_from_json(obj, path: str = "reaction") -> ReactionRecord:
    if not isinstance(obj, dict):
        raise CodecError(path, "expected an object")
    rid = _require(obj, "reaction_id", path)
    reactants = tuple(
        _molecule_from_json(e, f"{path}.reactants[{i}]")
        for i, e in enumerate(obj.get("reactants", []))
    )
    conditions = tuple(
        condition_from_json(c, f"{path}.conditions[{i}]")
        for i, c in enumerate(obj.get("conditions", []))
    )
    products = tuple(
        _molecule_from_json(e, f"{path}.products[{i}]")
        for i, e in enumerate(obj.get("products", []))
    )
    info = tuple(str(x) for x in obj.get("additional_info", []))
    return ReactionRecord(
        reaction_id=str(rid),
        reactants=reactants,
        conditions=conditions,
        products=products,
        additional_info=info,
    )


def decode_records(text: str) -> tuple[list[ReactionRecord], str]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodecError("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise CodecError("$", "top level must be an object")
    raw = doc.get("reactions", [])
    if not isinstance(raw, list):
        raise CodecError("reactions", "must be a list")
    records = [
        record_from_json(obj, f"reactions[{i}]") for i, obj in enumerate(raw)
    ]
    seen_ids: set[str] = set()
    for i, r in enumerate(records):
        if r.reaction_id in seen_ids:
            raise CodecError(
                f"reactions[{i}].reaction_id", f"duplicate id {r.reaction_id!r}"
            )
        seen_ids.add(r.reaction_id)
    return records, str(doc.get("Text description", ""))
