"""Molecular graph data model.

Atoms are typed tokens rather than plain element symbols: a graph coming out
of a drawing can contain real elements, R-group placeholders ("[R1]", "[Ar]"),
shorthand abbreviations ("Ts", "OMe") and opaque wildcards.  The graph layer
enforces structural sanity only; valence rules live in :mod:`rxnscope.smiles`
so that partially-specified drawings remain representable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

ATOM_KINDS = ("element", "placeholder", "abbreviation", "wildcard")
BOND_ORDERS = ("single", "double", "triple", "aromatic")
WEDGES = ("none", "solid", "dashed")
ROLES = (
    "reactant",
    "product",
    "reactant_template",
    "product_template",
    "condition",
    "unknown",
)

# Placeholder labels follow drawing conventions: an R/Ar/X stem with an
# optional numeric suffix.  A broader letters-then-digits rule would swallow
# ordinary abbreviations ("Ts") and table headers ("time"), so the stem set
# is deliberately narrow.
_PLACEHOLDER_STEMS = ("Ar", "R", "X")

# Recognized element symbols.  Ar, Ac, Pr and Ts are deliberately absent:
# in scope-table drawings those tokens mean aryl, acetyl, propyl and tosyl,
# and the noble gas / lanthanide / superheavy readings never occur there.
ELEMENTS = frozenset(
    """H He Li Be B C N O F Ne Na Mg Al Si P S Cl K Ca Sc Ti V Cr Mn Fe Co Ni
    Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I
    Xe Cs Ba La Ce Nd Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg
    Tl Pb Bi Po At Rn Fr Ra Th U""".split()
)

# Lowercase symbols allowed to carry an aromatic flag.
AROMATIC_SYMBOLS = frozenset(("b", "c", "n", "o", "p", "s", "se", "as", "te"))


class GraphError(ValueError):
    """Raised for structurally unusable graphs or fragment requests."""


def is_placeholder_label(text: str) -> bool:
    """True if ``text`` (without brackets) is an R-group label like R1 or Ar2."""
    for stem in _PLACEHOLDER_STEMS:
        if text.startswith(stem):
            rest = text[len(stem):]
            return rest == "" or rest.isdigit()
    return False


@dataclass(frozen=True)
class AtomToken:
    """One atom-level token of a molecular graph.

    ``text`` holds the element symbol for elements ("C", "Cl"), the bracketed
    label for placeholders ("[R1]"), the bare shorthand for abbreviations
    ("Ts") and "*" for wildcards.  ``chiral_order`` fixes the neighbor order
    that the ``chiral`` tag refers to; ``-1`` marks the implicit-H slot.
    """

    kind: str
    text: str
    charge: int = 0
    explicit_h: Optional[int] = None
    isotope: Optional[int] = None
    coords: Optional[tuple[float, float]] = None
    aromatic: bool = False
    chiral: Optional[str] = None
    chiral_order: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.kind not in ATOM_KINDS:
            raise GraphError(f"unknown atom kind {self.kind!r}")
        if self.kind == "placeholder":
            if not (self.text.startswith("[") and self.text.endswith("]")):
                raise GraphError(f"placeholder text must be bracketed: {self.text!r}")
            if not is_placeholder_label(self.text[1:-1]):
                raise GraphError(f"placeholder label out of grammar: {self.text!r}")
        if self.chiral is not None and self.chiral not in ("@", "@@"):
            raise GraphError(f"bad chiral tag {self.chiral!r}")

    @property
    def label(self) -> str:
        """Placeholder label without brackets ("R1" for "[R1]")."""
        if self.kind != "placeholder":
            raise GraphError(f"atom {self.text!r} is not a placeholder")
        return self.text[1:-1]

    @property
    def is_heavy(self) -> bool:
        """Heavy means: any non-element token, or an element other than H."""
        return self.kind != "element" or self.text != "H"


@dataclass(frozen=True)
class Bond:
    """Edge between two atom indices.

    ``wedge`` encodes a 2D depiction wedge with the narrow end at ``a``.
    ``direction`` encodes a cis/trans mark oriented a->b ("up" for "/").
    """

    a: int
    b: int
    order: str = "single"
    wedge: str = "none"
    direction: Optional[str] = None

    def __post_init__(self) -> None:
        if self.order not in BOND_ORDERS:
            raise GraphError(f"unknown bond order {self.order!r}")
        if self.wedge not in WEDGES:
            raise GraphError(f"unknown wedge kind {self.wedge!r}")
        if self.wedge != "none" and self.order != "single":
            raise GraphError("wedges are only meaningful on single bonds")
        if self.direction not in (None, "up", "down"):
            raise GraphError(f"bad direction mark {self.direction!r}")

    def other(self, idx: int) -> int:
        if idx == self.a:
            return self.b
        if idx == self.b:
            return self.a
        raise GraphError(f"atom {idx} not on bond {self.a}-{self.b}")


@dataclass(frozen=True)
class MolecularGraph:
    """Immutable molecular graph with optional label, role and provenance."""

    atoms: tuple[AtomToken, ...] = ()
    bonds: tuple[Bond, ...] = ()
    label: Optional[str] = None
    role: str = "unknown"
    provenance: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise GraphError(f"unknown role {self.role!r}")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "bonds", tuple(self.bonds))

    def __len__(self) -> int:
        return len(self.atoms)

    def adjacency(self) -> dict[int, list[tuple[int, Bond]]]:
        adj: dict[int, list[tuple[int, Bond]]] = {i: [] for i in range(len(self.atoms))}
        for bond in self.bonds:
            adj[bond.a].append((bond.b, bond))
            adj[bond.b].append((bond.a, bond))
        return adj

    def neighbors(self, idx: int) -> list[int]:
        return [other for other, _ in self.adjacency()[idx]]

    def bond_between(self, i: int, j: int) -> Optional[Bond]:
        for bond in self.bonds:
            if {bond.a, bond.b} == {i, j}:
                return bond
        return None

    def heavy_atom_count(self) -> int:
        return sum(1 for atom in self.atoms if atom.is_heavy)

    def placeholder_indices(self) -> list[int]:
        return [i for i, atom in enumerate(self.atoms) if atom.kind == "placeholder"]


@dataclass(frozen=True)
class Violation:
    """One structural rule violation, pointing at the offending index."""

    rule: str
    detail: str
    atom: Optional[int] = None
    bond: Optional[int] = None

    def __str__(self) -> str:
        where = f"atom {self.atom}" if self.atom is not None else f"bond {self.bond}"
        return f"{self.rule} at {where}: {self.detail}"


def validate_graph(g: MolecularGraph) -> list[Violation]:
    """Collect structural violations; an empty list means the graph is sound."""
    violations: list[Violation] = []
    n = len(g.atoms)
    seen: dict[frozenset[int], int] = {}
    for bidx, bond in enumerate(g.bonds):
        if not (0 <= bond.a < n) or not (0 <= bond.b < n):
            violations.append(
                Violation("dangling-bond", f"endpoint out of range 0..{n - 1}", bond=bidx)
            )
            continue
        if bond.a == bond.b:
            violations.append(Violation("self-loop", f"atom {bond.a} bonded to itself", bond=bidx))
            continue
        key = frozenset((bond.a, bond.b))
        if key in seen:
            violations.append(
                Violation("duplicate-bond", f"same pair as bond {seen[key]}", bond=bidx)
            )
        else:
            seen[key] = bidx
    for aidx, atom in enumerate(g.atoms):
        if atom.explicit_h is not None and atom.explicit_h < 0:
            violations.append(Violation("negative-h", f"explicit_h={atom.explicit_h}", atom=aidx))
        if atom.isotope is not None and atom.isotope <= 0:
            violations.append(Violation("bad-isotope", f"isotope={atom.isotope}", atom=aidx))
    return violations


def connected_components(g: MolecularGraph) -> list[list[int]]:
    """Atom index lists of connected components, each sorted, in first-seen order."""
    adj = g.adjacency()
    seen: set[int] = set()
    components: list[list[int]] = []
    for start in range(len(g.atoms)):
        if start in seen:
            continue
        stack = [start]
        comp: list[int] = []
        seen.add(start)
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nxt, _ in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        components.append(sorted(comp))
    return components


def subgraph(g: MolecularGraph, indices: Iterable[int], **overrides) -> MolecularGraph:
    """Induced subgraph over ``indices``; records old indices in provenance."""
    index_list = sorted(set(indices))
    index_map = {old: new for new, old in enumerate(index_list)}
    atoms = []
    for old in index_list:
        atom = g.atoms[old]
        if atom.chiral_order is not None:
            # A chiral tag whose reference atoms were cut away is meaningless.
            if any(ref >= 0 and ref not in index_map for ref in atom.chiral_order):
                atom = replace(atom, chiral=None, chiral_order=None)
            else:
                atom = replace(
                    atom,
                    chiral_order=tuple(
                        index_map[ref] if ref >= 0 else -1 for ref in atom.chiral_order
                    ),
                )
        atoms.append(atom)
    bonds = [
        replace(bond, a=index_map[bond.a], b=index_map[bond.b])
        for bond in g.bonds
        if bond.a in index_map and bond.b in index_map
    ]
    fields = {
        "label": g.label,
        "role": g.role,
        "provenance": {"index_map": tuple(index_list)},
    }
    fields.update(overrides)
    return MolecularGraph(atoms=tuple(atoms), bonds=tuple(bonds), **fields)


def main_component(g: MolecularGraph) -> MolecularGraph:
    """Largest component by heavy-atom count; ties break on lowest atom index.

    Raises :class:`GraphError` on an empty graph.
    """
    if not g.atoms:
        raise GraphError("empty graph has no main component")
    components = connected_components(g)
    best = max(
        components,
        key=lambda comp: (
            sum(1 for i in comp if g.atoms[i].is_heavy),
            -min(comp),
        ),
    )
    return subgraph(g, best)


def induced_fragment(g: MolecularGraph, root_atoms: Iterable[int], attachment: int) -> MolecularGraph:
    """Induced subgraph over ``root_atoms`` with ``attachment`` recorded.

    The attachment atom index is re-expressed in the fragment's own
    numbering and stored under provenance key ``attachment``.
    """
    roots = sorted(set(root_atoms))
    if attachment not in roots:
        raise GraphError(f"attachment atom {attachment} not among fragment atoms")
    frag = subgraph(g, roots, label=None, role="unknown")
    order = list(frag.provenance["index_map"])
    new_attachment = order.index(attachment)
    provenance = dict(frag.provenance)
    provenance["attachment"] = new_attachment
    return replace(frag, provenance=provenance)


def fragment_attachment(frag: MolecularGraph) -> int:
    att = frag.provenance.get("attachment")
    if att is None:
        raise GraphError("fragment has no recorded attachment atom")
    return int(att)


def permutation_parity(src: Iterable[int], dst: Iterable[int]) -> int:
    """0 if ``dst`` is an even permutation of ``src``, 1 if odd.

    Entries must be unique; raises :class:`GraphError` if the two sequences
    are not permutations of each other.
    """
    src = list(src)
    dst = list(dst)
    if sorted(src) != sorted(dst) or len(set(src)) != len(src):
        raise GraphError(f"{dst!r} is not a permutation of {src!r}")
    positions = {value: i for i, value in enumerate(src)}
    perm = [positions[value] for value in dst]
    swaps = 0
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            swaps += 1
    return swaps % 2


def _normalized_chiral_order(atom: AtomToken, idx: int, adj_mates: list[int]) -> tuple[int, ...]:
    order = sorted(adj_mates)
    if atom.explicit_h == 1 and len(order) < 4:
        order.append(-1)
    return tuple(order)


def normalize_chiral_orders(g: MolecularGraph) -> MolecularGraph:
    """Rewrite every chiral_order to (sorted neighbors, implicit-H slot last).

    Tags are flipped as needed so the described configuration is unchanged.
    This gives the graph JSON codec a fixed convention to rely on.
    """
    adj = g.adjacency()
    atoms = list(g.atoms)
    for idx, atom in enumerate(atoms):
        if atom.chiral is None:
            continue
        if atom.chiral_order is None:
            atoms[idx] = replace(atom, chiral=None)
            continue
        target = _normalized_chiral_order(atom, idx, [m for m, _ in adj[idx]])
        if sorted(target) != sorted(atom.chiral_order):
            atoms[idx] = replace(atom, chiral=None, chiral_order=None)
            continue
        parity = permutation_parity(atom.chiral_order, target)
        tag = atom.chiral
        if parity:
            tag = "@@" if tag == "@" else "@"
        atoms[idx] = replace(atom, chiral=tag, chiral_order=target)
    return replace(g, atoms=tuple(atoms))


# ---------------------------------------------------------------------------
# Graph JSON codec.  The wire form mirrors optical-recognition tool output:
# {"atoms": [{"symbol": ..., "charge": ..., "h": ..., "isotope": ..., "x": ...,
#   "y": ...}], "bonds": [{"a": ..., "b": ..., "order": ..., "wedge": ...}],
#  "label": ..., "role": ...}
# Chirality rides inside the symbol text ("[C@@]"), aromaticity as lowercase.
# ---------------------------------------------------------------------------

_BRACKET_CHIRAL = re.compile(r"^([A-Z][a-z]?|[a-z]{1,2})(@{1,2})?$")


def atom_token_from_symbol(
    symbol: str,
    charge: int = 0,
    explicit_h: Optional[int] = None,
    isotope: Optional[int] = None,
    coords: Optional[tuple[float, float]] = None,
) -> AtomToken:
    """Build an AtomToken from a drawing symbol string.

    Accepts bare element symbols ("C", lowercase aromatic "c"), bracketed
    placeholders ("[R1]"), bracketed element+chirality ("[C@@]"), "*" for a
    wildcard, and falls back to an abbreviation token for anything else.
    """
    base = dict(charge=charge, explicit_h=explicit_h, isotope=isotope, coords=coords)
    text = symbol.strip()
    if not text:
        raise GraphError("empty atom symbol")
    if text == "*":
        return AtomToken(kind="wildcard", text="*", **base)
    inner = text[1:-1] if text.startswith("[") and text.endswith("]") else None
    if inner is not None:
        if is_placeholder_label(inner):
            return AtomToken(kind="placeholder", text=f"[{inner}]", **base)
        m = _BRACKET_CHIRAL.match(inner)
        if m:
            sym, chiral = m.group(1), m.group(2)
            if sym in ELEMENTS:
                return AtomToken(kind="element", text=sym, chiral=chiral, **base)
            if sym.lower() in AROMATIC_SYMBOLS and sym.capitalize() in ELEMENTS:
                return AtomToken(
                    kind="element", text=sym.capitalize(), aromatic=True, chiral=chiral, **base
                )
        if inner == "*":
            return AtomToken(kind="wildcard", text="*", **base)
        return AtomToken(kind="abbreviation", text=inner, **base)
    if text in ELEMENTS:
        return AtomToken(kind="element", text=text, **base)
    if text in AROMATIC_SYMBOLS and text.capitalize() in ELEMENTS:
        return AtomToken(kind="element", text=text.capitalize(), aromatic=True, **base)
    if is_placeholder_label(text):
        return AtomToken(kind="placeholder", text=f"[{text}]", **base)
    return AtomToken(kind="abbreviation", text=text, **base)


def atom_symbol(atom: AtomToken) -> str:
    """Inverse of :func:`atom_token_from_symbol` (charge/h/isotope ride separately)."""
    if atom.kind == "wildcard":
        return "*"
    if atom.kind == "placeholder":
        return atom.text
    if atom.kind == "abbreviation":
        return f"[{atom.text}]"
    sym = atom.text.lower() if atom.aromatic else atom.text
    if atom.chiral is not None:
        return f"[{sym}{atom.chiral}]"
    return sym


def graph_to_json(g: MolecularGraph) -> dict:
    g = normalize_chiral_orders(g)
    atoms = []
    for atom in g.atoms:
        entry: dict = {"symbol": atom_symbol(atom), "charge": atom.charge}
        if atom.explicit_h is not None:
            entry["h"] = atom.explicit_h
        if atom.isotope is not None:
            entry["isotope"] = atom.isotope
        if atom.coords is not None:
            entry["x"], entry["y"] = atom.coords
        atoms.append(entry)
    bonds = []
    for bond in g.bonds:
        entry = {"a": bond.a, "b": bond.b, "order": bond.order, "wedge": bond.wedge}
        if bond.direction is not None:
            entry["dir"] = bond.direction
        bonds.append(entry)
    return {"atoms": atoms, "bonds": bonds, "label": g.label, "role": g.role}


def graph_from_json(data: Mapping) -> MolecularGraph:
    try:
        raw_atoms = data["atoms"]
        raw_bonds = data.get("bonds", [])
    except (TypeError, KeyError) as exc:
        raise GraphError(f"graph JSON missing required key: {exc}") from exc
    atoms = []
    for i, entry in enumerate(raw_atoms):
        try:
            coords = None
            if "x" in entry and "y" in entry:
                coords = (float(entry["x"]), float(entry["y"]))
            atoms.append(
                atom_token_from_symbol(
                    entry["symbol"],
                    charge=int(entry.get("charge", 0)),
                    explicit_h=entry.get("h"),
                    isotope=entry.get("isotope"),
                    coords=coords,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"atoms[{i}]: {exc}") from exc
    bonds = []
    for i, entry in enumerate(raw_bonds):
        try:
            bonds.append(
                Bond(
                    a=int(entry["a"]),
                    b=int(entry["b"]),
                    order=entry.get("order", "single"),
                    wedge=entry.get("wedge", "none"),
                    direction=entry.get("dir"),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"bonds[{i}]: {exc}") from exc
    g = MolecularGraph(
        atoms=tuple(atoms),
        bonds=tuple(bonds),
        label=data.get("label"),
        role=data.get("role", "unknown"),
    )
    bad = validate_graph(g)
    if bad:
        raise GraphError(f"graph JSON failed validation: {bad[0]}")
    # Chirality parsed from symbols refers to the codec's fixed convention.
    adj = g.adjacency()
    atoms = list(g.atoms)
    for idx, atom in enumerate(atoms):
        if atom.chiral is not None:
            order = _normalized_chiral_order(atom, idx, [m for m, _ in adj[idx]])
            atoms[idx] = replace(atom, chiral_order=order)
    return replace(g, atoms=tuple(atoms))
