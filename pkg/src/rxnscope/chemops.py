"""Chemistry utilities bridging drawings and clean structures.

Three concerns live here: the shorthand table that maps drawing tokens like
"Ts" or "OMe" to attachable fragments, a condensed-formula reader for tokens
the table does not list ("2-ClC6H4", "SO2Me"), and wedge/coordinate stereo
perception that turns 2D depictions into chiral tags and double-bond
geometry.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from .molgraph import (
    ELEMENTS,
    AtomToken,
    Bond,
    GraphError,
    MolecularGraph,
    connected_components,
    subgraph,
)
from .smiles import VALENCES, parse_smiles

HALOGENS = ("F", "Cl", "Br", "I")


class FormulaError(ValueError):
    """Raised when a token cannot be read as a condensed formula."""


class StereoPerceptionError(ValueError):
    """Raised when depiction stereo input is unusable (e.g. missing coords)."""


@dataclass(frozen=True)
class Fragment:
    """A connected graph plus the atom index where it attaches."""

    graph: MolecularGraph
    attachment: int

    def __post_init__(self) -> None:
        if not (0 <= self.attachment < len(self.graph.atoms)):
            raise GraphError(f"attachment index {self.attachment} out of range")


def _fragment_from_marked_smiles(token: str, smiles_text: str) -> Fragment:
    g = parse_smiles(smiles_text)
    markers = [
        i
        for i, atom in enumerate(g.atoms)
        if atom.kind == "wildcard" and atom.isotope is None
    ]
    if len(markers) != 1:
        raise GraphError(
            f"abbreviation {token!r} must contain exactly one '*' attachment marker"
        )
    marker = markers[0]
    mates = g.neighbors(marker)
    if len(mates) != 1:
        raise GraphError(f"abbreviation {token!r}: marker must have one neighbor")
    keep = [i for i in range(len(g.atoms)) if i != marker]
    frag_graph = subgraph(g, keep, label=None, role="unknown")
    order = list(frag_graph.provenance["index_map"])
    if len(connected_components(frag_graph)) != 1:
        raise GraphError(f"abbreviation {token!r} expands to a disconnected fragment")
    return Fragment(graph=frag_graph, attachment=order.index(mates[0]))


class AbbreviationTable:
    """Token -> fragment lookup built from a {token: marked-SMILES} mapping."""

    def __init__(self, entries: Mapping[str, str]):
        self._fragments: dict[str, Fragment] = {}
        self._sources = dict(entries)
        for token, smi in entries.items():
            self._fragments[token] = _fragment_from_marked_smiles(token, smi)

    @classmethod
    def from_file(cls, path: str | Path) -> "AbbreviationTable":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    @classmethod
    def default(cls) -> "AbbreviationTable":
        text = resources.files("rxnscope.data").joinpath("abbreviations.json").read_text()
        return cls(json.loads(text))

    def __contains__(self, token: str) -> bool:
        return token in self._fragments

    def get(self, token: str) -> Optional[Fragment]:
        return self._fragments.get(token)

    def tokens(self) -> list[str]:
        return sorted(self._fragments)


class AliasRegistry:
    """Document-scoped isotope aliases for tokens nothing can expand.

    The same unknown token always maps to the same wildcard isotope within
    one registry, so repeated occurrences stay identifiable.
    """

    def __init__(self, start: int = 100):
        self._aliases: dict[str, int] = {}
        self._next = start

    def alias_for(self, token: str) -> int:
        if token not in self._aliases:
            self._aliases[token] = self._next
            self._next += 1
        return self._aliases[token]

    def items(self) -> dict[str, int]:
        return dict(self._aliases)


# ---------------------------------------------------------------------------
# Condensed formulas
# ---------------------------------------------------------------------------

_PHENYL_PAREN = re.compile(
    r"^(?P<loc>\d+(?:,\d+)*)-\((?P<grp>[^()]+)\)(?P<cnt>\d*)C6H(?P<h>\d)$"
)
_PHENYL_PLAIN_COUNT = re.compile(
    r"^(?P<loc>\d+(?:,\d+)*)-(?P<grp>[A-Za-z][A-Za-z0-9]*?)(?P<cnt>\d*)C6H(?P<h>\d)$"
)
_PHENYL_PLAIN = re.compile(r"^(?P<loc>\d+(?:,\d+)*)-(?P<grp>[A-Za-z][A-Za-z0-9]*)C6H(?P<h>\d)$")

# Alkyl shorthands the linear grammar itself understands, so formulas like
# "SO2Me" work even without a lookup table.
_BUILTIN_GROUPS = {"Me": 1, "Et": 2, "Pr": 3, "Bu": 4}


def _chain_fragment(length: int) -> Fragment:
    atoms = tuple(AtomToken(kind="element", text="C") for _ in range(length))
    bonds = tuple(Bond(a=i, b=i + 1, order="single") for i in range(length - 1))
    return Fragment(graph=MolecularGraph(atoms=atoms, bonds=bonds), attachment=0)


def _group_fragment(text: str, table: Optional[AbbreviationTable]) -> Fragment:
    if table is not None:
        hit = table.get(text)
        if hit is not None:
            return hit
    if text in _BUILTIN_GROUPS:
        return _chain_fragment(_BUILTIN_GROUPS[text])
    if text in ELEMENTS and (text in HALOGENS or text in VALENCES):
        atom = AtomToken(kind="element", text=text)
        return Fragment(graph=MolecularGraph(atoms=(atom,)), attachment=0)
    return parse_condensed_formula(text, table)


def _phenyl_pattern(text: str, table: Optional[AbbreviationTable]) -> Optional[Fragment]:
    for pattern in (_PHENYL_PAREN, _PHENYL_PLAIN_COUNT, _PHENYL_PLAIN):
        m = pattern.match(text)
        if not m:
            continue
        locants = [int(x) for x in m.group("loc").split(",")]
        count = m.groupdict().get("cnt") or ""
        if count and int(count) != len(locants):
            continue
        if len(set(locants)) != len(locants) or any(not 2 <= k <= 6 for k in locants):
            continue
        if int(m.group("h")) != 6 - 1 - len(locants):
            continue
        try:
            group = _group_fragment(m.group("grp"), table)
        except FormulaError:
            continue
        atoms: list[AtomToken] = [
            AtomToken(kind="element", text="C", aromatic=True) for _ in range(6)
        ]
        bonds: list[Bond] = [
            Bond(a=i, b=(i + 1) % 6, order="aromatic") for i in range(6)
        ]
        for k in locants:
            ring_pos = k - 1
            offset = len(atoms)
            for atom in group.graph.atoms:
                atoms.append(replace(atom, coords=None))
            for bond in group.graph.bonds:
                bonds.append(replace(bond, a=bond.a + offset, b=bond.b + offset))
            bonds.append(Bond(a=ring_pos, b=group.attachment + offset, order="single"))
        return Fragment(graph=MolecularGraph(atoms=tuple(atoms), bonds=tuple(bonds)), attachment=0)
    return None


_LINEAR_TOKEN = re.compile(
    r"(?P<paren>\()|(?P<close>\))|(?P<count>\d+)|(?P<group>Me|Et|Pr|Bu)"
    r"|(?P<elem>Cl|Br|[BCNOSPFIH])"
)


def _parse_linear(text: str, table: Optional[AbbreviationTable]) -> Fragment:
    atoms: list[AtomToken] = []
    bonds: list[Bond] = []
    explicit_h: dict[int, int] = {}

    def add_atom(symbol: str) -> int:
        atoms.append(AtomToken(kind="element", text=symbol))
        return len(atoms) - 1

    def attach_fragment(frag: Fragment, parent: int) -> int:
        offset = len(atoms)
        for atom in frag.graph.atoms:
            atoms.append(replace(atom, coords=None))
        for bond in frag.graph.bonds:
            bonds.append(replace(bond, a=bond.a + offset, b=bond.b + offset))
        bonds.append(Bond(a=parent, b=frag.attachment + offset, order="single"))
        return frag.attachment + offset

    pos = 0
    backbone: Optional[int] = None
    while pos < len(text):
        m = _LINEAR_TOKEN.match(text, pos)
        if not m:
            raise FormulaError(f"cannot read condensed formula {text!r} at {pos}")
        pos = m.end()

        def read_count() -> int:
            nonlocal pos
            cm = re.match(r"\d+", text[pos:])
            if cm:
                pos += cm.end()
                return int(cm.group())
            return 1

        if m.group("count"):
            raise FormulaError(f"unexpected count in {text!r}")
        if m.group("close"):
            raise FormulaError(f"unbalanced ')' in {text!r}")
        if m.group("paren"):
            depth = 1
            end = pos
            while end < len(text) and depth:
                if text[end] == "(":
                    depth += 1
                elif text[end] == ")":
                    depth -= 1
                end += 1
            if depth:
                raise FormulaError(f"unbalanced '(' in {text!r}")
            inner = text[pos : end - 1]
            pos = end
            count = read_count()
            if backbone is None:
                raise FormulaError(f"{text!r} starts with a parenthesized group")
            frag = _group_fragment(inner, table)
            for _ in range(count):
                attach_fragment(frag, backbone)
            continue
        if m.group("group"):
            token = m.group("group")
            count = read_count()
            if backbone is None:
                raise FormulaError(f"{text!r} starts with a chain shorthand")
            frag = _group_fragment(token, table)
            last = None
            for _ in range(count):
                last = attach_fragment(frag, backbone)
            if count == 1 and last is not None:
                backbone = last
            continue
        symbol = m.group("elem")
        count = read_count()
        if symbol == "H":
            if backbone is None:
                raise FormulaError(f"{text!r} starts with hydrogen")
            explicit_h[backbone] = explicit_h.get(backbone, 0) + count
            continue
        if backbone is None:
            if count != 1:
                raise FormulaError(f"{text!r}: leading atom cannot carry a count")
            backbone = add_atom(symbol)
            continue
        parent_symbol = atoms[backbone].text
        order = "double" if symbol == "O" and parent_symbol in ("N", "S") else "single"
        new_idx = None
        for _ in range(count):
            new_idx = add_atom(symbol)
            bonds.append(Bond(a=backbone, b=new_idx, order=order))
        if count == 1 and symbol not in HALOGENS and order == "single":
            backbone = new_idx

    if not atoms:
        raise FormulaError(f"empty condensed formula {text!r}")
    final_atoms = [
        replace(atom, explicit_h=explicit_h[i]) if i in explicit_h else atom
        for i, atom in enumerate(atoms)
    ]
    return Fragment(
        graph=MolecularGraph(atoms=tuple(final_atoms), bonds=tuple(bonds)), attachment=0
    )


def parse_condensed_formula(
    text: str, table: Optional[AbbreviationTable] = None
) -> Fragment:
    """Read a condensed group formula into an attachable fragment.

    Handles substituted-phenyl patterns ("4-BrC6H4", "3,5-(CF3)2C6H3"),
    plain phenyl ("C6H5") and linear chains ("CF3", "NO2", "SO2Me", "OMe").
    Raises :class:`FormulaError` for anything else.
    """
    token = text.strip()
    if not token:
        raise FormulaError("empty formula")
    if token == "C6H5":
        return _fragment_from_marked_smiles("C6H5", "*c1ccccc1")
    phenyl = _phenyl_pattern(token, table)
    if phenyl is not None:
        return phenyl
    return _parse_linear(token, table)


def expand_abbreviation(
    token: str,
    table: Optional[AbbreviationTable] = None,
    registry: Optional[AliasRegistry] = None,
) -> Fragment:
    """Total expansion: table hit, then condensed formula, then wildcard.

    The wildcard fallback never fails; it produces a single wildcard atom
    whose isotope aliases the unknown token via ``registry``.
    """
    table = table if table is not None else AbbreviationTable.default()
    hit = table.get(token)
    if hit is not None:
        return hit
    try:
        return parse_condensed_formula(token, table)
    except FormulaError:
        pass
    registry = registry if registry is not None else AliasRegistry()
    alias = registry.alias_for(token)
    atom = AtomToken(kind="wildcard", text="*", isotope=alias)
    return Fragment(graph=MolecularGraph(atoms=(atom,)), attachment=0)


# ---------------------------------------------------------------------------
# Stereo perception from 2D depictions
# ---------------------------------------------------------------------------


def _implicit_h_count(g: MolecularGraph, idx: int) -> int:
    atom = g.atoms[idx]
    if atom.explicit_h is not None:
        return atom.explicit_h
    if atom.kind != "element" or atom.text not in VALENCES:
        return 0
    order_value = {"single": 1.0, "double": 2.0, "triple": 3.0, "aromatic": 1.5}
    used = math.ceil(sum(order_value[b.order] for _, b in g.adjacency()[idx]))
    allowed = sorted(v + atom.charge for v in VALENCES[atom.text])
    for v in allowed:
        if v >= used:
            return v - used
    return 0


def _det3(m: list[list[float]]) -> float:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def _orientation(points: list[tuple[float, float, float]]) -> float:
    p1, p2, p3, p4 = points
    rows = [
        [p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]],
        [p3[0] - p1[0], p3[1] - p1[1], p3[2] - p1[2]],
        [p4[0] - p1[0], p4[1] - p1[1], p4[2] - p1[2]],
    ]
    return _det3(rows)


def _tag_from_wedge(
    g: MolecularGraph, center: int, wedge_bond: Bond, order: tuple[int, ...]
) -> Optional[str]:
    cx, cy = g.atoms[center].coords
    points: list[tuple[float, float, float]] = []
    real = [r for r in order if r >= 0]
    for mate in real:
        atom = g.atoms[mate]
        if atom.coords is None:
            raise StereoPerceptionError(
                f"atom {mate} bonded to wedge at atom {center} has no coordinates"
            )
        z = 0.0
        if {wedge_bond.a, wedge_bond.b} == {center, mate}:
            z = 1.0 if wedge_bond.wedge == "solid" else -1.0
        points.append((atom.coords[0] - cx, atom.coords[1] - cy, z))
    if len(real) == 3:
        sx = sum(p[0] for p in points) / 3.0
        sy = sum(p[1] for p in points) / 3.0
        sz = sum(p[2] for p in points) / 3.0
        virtual = (-sx, -sy, -sz)
        if math.hypot(*virtual) < 1e-9:
            return None
        if order[-1] != -1:
            return None
        points.append(virtual)
    volume = _orientation(points)
    if abs(volume) < 1e-9:
        return None
    return "@" if volume < 0 else "@@"


def _bond_in_ring(g: MolecularGraph, bond: Bond) -> bool:
    adj = g.adjacency()
    target = {bond.a, bond.b}
    seen = {bond.a}
    stack = [bond.a]
    while stack:
        cur = stack.pop()
        for mate, b in adj[cur]:
            if {b.a, b.b} == target:
                continue
            if mate == bond.b:
                return True
            if mate not in seen:
                seen.add(mate)
                stack.append(mate)
    return False


def _cross_side(
    tail: tuple[float, float], head: tuple[float, float], point: tuple[float, float]
) -> float:
    return (head[0] - tail[0]) * (point[1] - tail[1]) - (head[1] - tail[1]) * (
        point[0] - tail[0]
    )


def perceive_stereo(g: MolecularGraph) -> tuple[MolecularGraph, list[str]]:
    """Derive chiral tags and double-bond geometry from 2D depiction data.

    Solid wedges lift the wide-end atom above the plane, dashed below; the
    sign of the resulting signed volume picks the tag.  Conflicting wedges
    at one center leave it untagged with a warning.  Double bonds outside
    rings get direction marks from a side-of-line test.
    """
    warnings: list[str] = []
    adj = g.adjacency()
    atoms = list(g.atoms)

    wedges_at: dict[int, list[Bond]] = {}
    for bond in g.bonds:
        if bond.wedge != "none":
            wedges_at.setdefault(bond.a, []).append(bond)

    for center, wedge_bonds in sorted(wedges_at.items()):
        atom = atoms[center]
        if atom.coords is None:
            raise StereoPerceptionError(f"wedge at atom {center} lacks coordinates")
        mates = sorted(m for m, _ in adj[center])
        if not 3 <= len(mates) <= 4:
            warnings.append(f"wedge at atom {center} with {len(mates)} neighbors ignored")
            continue
        order = list(mates)
        has_h_slot = False
        if len(mates) == 3 and _implicit_h_count(g, center) == 1:
            order.append(-1)
            has_h_slot = True
        if len(mates) == 3 and not has_h_slot:
            # Three neighbors and no hydrogen: treat the lone pair like the
            # missing vertex but keep the slot list at three entries.
            pass
        tags = set()
        for wedge_bond in wedge_bonds:
            tags.add(_tag_from_wedge(g, center, wedge_bond, tuple(order)))
        tags.discard(None)
        if len(tags) > 1:
            warnings.append(f"conflicting wedges at atom {center}; left untagged")
            continue
        if not tags:
            continue
        tag = tags.pop()
        new_atom = replace(atom, chiral=tag, chiral_order=tuple(order))
        if has_h_slot and atom.explicit_h is None:
            new_atom = replace(new_atom, explicit_h=1)
        atoms[center] = new_atom

    bonds = list(g.bonds)
    bond_pos = {frozenset((b.a, b.b)): i for i, b in enumerate(bonds)}

    def _flip(d: str) -> str:
        return "down" if d == "up" else "up"

    def away_value(end: int, mate: int) -> Optional[str]:
        b = bonds[bond_pos[frozenset((end, mate))]]
        if b.direction is None:
            return None
        return b.direction if b.a == end else _flip(b.direction)

    def set_away(end: int, mate: int, away: str) -> None:
        i = bond_pos[frozenset((end, mate))]
        b = bonds[i]
        bonds[i] = replace(b, direction=away if b.a == end else _flip(away))

    # Collect geometry facts first, then assign marks component-by-component:
    # a conjugated chain shares reference bonds between double bonds, so a
    # fact whose reference already carries a mark must extend that mark
    # rather than start a fresh arbitrary one.
    facts: list[tuple[tuple[int, int], tuple[int, int], bool]] = []
    for bond in bonds:
        if bond.order != "double":
            continue
        if any(atoms[e].coords is None for e in (bond.a, bond.b)):
            continue
        if _bond_in_ring(g, bond):
            continue
        refs: dict[int, int] = {}
        ok = True
        for end in (bond.a, bond.b):
            candidates = sorted(
                m
                for m, b in adj[end]
                if {b.a, b.b} != {bond.a, bond.b}
                and b.order == "single"
                and atoms[m].coords is not None
            )
            if not candidates:
                ok = False
                break
            refs[end] = candidates[0]
        if not ok:
            continue
        pa, pb = atoms[bond.a].coords, atoms[bond.b].coords
        side_a = _cross_side(pa, pb, atoms[refs[bond.a]].coords)
        side_b = _cross_side(pa, pb, atoms[refs[bond.b]].coords)
        if abs(side_a) < 1e-9 or abs(side_b) < 1e-9:
            continue
        same_side = (side_a > 0) == (side_b > 0)
        facts.append(((bond.a, refs[bond.a]), (bond.b, refs[bond.b]), same_side))

    pending = list(range(len(facts)))
    while pending:
        pick = next(
            (
                i
                for i in pending
                if away_value(*facts[i][0]) is not None
                or away_value(*facts[i][1]) is not None
            ),
            pending[0],
        )
        pending.remove(pick)
        ref_a, ref_b, same_side = facts[pick]
        base = away_value(*ref_a)
        if base is None:
            existing_b = away_value(*ref_b)
            base = existing_b if same_side else _flip(existing_b) if existing_b else None
        if base is None:
            base = "up"
        needed_b = base if same_side else _flip(base)
        current_b = away_value(*ref_b)
        if current_b is not None and current_b != needed_b:
            warnings.append(
                f"inconsistent double-bond geometry around atoms {ref_b[0]}-{ref_b[1]}"
            )
            continue
        set_away(*ref_a, base)
        set_away(*ref_b, needed_b)

    return replace(g, atoms=tuple(atoms), bonds=tuple(bonds)), warnings
