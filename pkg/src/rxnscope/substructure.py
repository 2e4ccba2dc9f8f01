"""Subgraph matching and template/variant scaffold alignment.

The matcher is a plain backtracking search over pattern atoms in index
order, which makes the result order lexicographic by mapped target tuple
and therefore reproducible. Placeholder atoms in the pattern match any
single target atom; bonds touching them are order-lenient.
"""

from __future__ import annotations

import logging
from typing import Optional

from .molgraph import AtomToken, Bond, GraphError, MolecularGraph

log = logging.getLogger(__name__)


class MatchError(ValueError):
    """Raised when an alignment that must exist cannot be found."""


def _is_joker(atom: AtomToken) -> bool:
    return atom.kind in ("placeholder", "wildcard")


def atoms_compatible(pattern_atom: AtomToken, target_atom: AtomToken) -> bool:
    if _is_joker(pattern_atom):
        return True
    if pattern_atom.kind != target_atom.kind:
        return False
    if pattern_atom.text != target_atom.text:
        return False
    if pattern_atom.kind == "element":
        if pattern_atom.charge != target_atom.charge:
            return False
        if pattern_atom.aromatic != target_atom.aromatic:
            return False
    return True


def bonds_compatible(pattern: MolecularGraph, pbond: Bond, tbond: Bond) -> bool:
    if pbond.order == tbond.order:
        return True
    lenient = _is_joker(pattern.atoms[pbond.a]) or _is_joker(pattern.atoms[pbond.b])
    return lenient and {pbond.order, tbond.order} == {"single", "aromatic"}


def verify_mapping(
    pattern: MolecularGraph, target: MolecularGraph, mapping: dict[int, int]
) -> bool:
    """Re-check a mapping edge by edge; used as an independent guard."""
    if len(mapping) != len(pattern.atoms):
        return False
    if len(set(mapping.values())) != len(mapping):
        return False
    for p, t in mapping.items():
        if not atoms_compatible(pattern.atoms[p], target.atoms[t]):
            return False
    for pbond in pattern.bonds:
        tbond = target.bond_between(mapping[pbond.a], mapping[pbond.b])
        if tbond is None or not bonds_compatible(pattern, pbond, tbond):
            return False
    return True


def find_matches(
    pattern: MolecularGraph,
    target: MolecularGraph,
    limit: Optional[int] = None,
) -> list[dict[int, int]]:
    """All injective pattern-to-target mappings preserving atoms and bonds.

    Results are ordered by the tuple (mapping[0], mapping[1], ...) and
    truncated at ``limit`` when given. Extra target bonds between mapped
    atoms are allowed; only pattern bonds constrain the search.
    """
    if not pattern.atoms:
        raise GraphError("empty pattern")
    n = len(pattern.atoms)
    # Pattern bonds from atom i to already-placed atoms j < i.
    back_edges: list[list[Bond]] = [[] for _ in range(n)]
    for bond in pattern.bonds:
        hi, lo = max(bond.a, bond.b), min(bond.a, bond.b)
        back_edges[hi].append(bond)
    target_adj = target.adjacency()
    pattern_adj = pattern.adjacency()

    results: list[dict[int, int]] = []
    assigned: list[int] = []
    used: set[int] = set()

    def feasible(p: int, t: int) -> bool:
        if not atoms_compatible(pattern.atoms[p], target.atoms[t]):
            return False
        if len(pattern_adj[p]) > len(target_adj[t]):
            return False
        for pbond in back_edges[p]:
            other = pbond.other(p)
            tbond = target.bond_between(assigned[other], t)
            if tbond is None or not bonds_compatible(pattern, pbond, tbond):
                return False
        return True

    def search(p: int) -> bool:
        if p == n:
            results.append({i: assigned[i] for i in range(n)})
            return limit is not None and len(results) >= limit
        for t in range(len(target.atoms)):
            if t in used:
                continue
            if feasible(p, t):
                assigned.append(t)
                used.add(t)
                done = search(p + 1)
                used.remove(t)
                assigned.pop()
                if done:
                    return True
        return False

    search(0)
    return results


def _placeholder_aromatic_score(
    template: MolecularGraph, target: MolecularGraph, mapping: dict[int, int]
) -> int:
    score = 0
    for p, t in mapping.items():
        atom = template.atoms[p]
        if atom.kind == "placeholder" and atom.label.startswith("Ar"):
            if target.atoms[t].aromatic:
                score += 1
    return score


def _fragment_atoms(
    template: MolecularGraph,
    variant: MolecularGraph,
    mapping: dict[int, int],
    placeholders: list[int],
) -> dict[int, list[int]]:
    scaffold_atoms = {
        t for p, t in mapping.items() if template.atoms[p].kind != "placeholder"
    }
    adj = variant.adjacency()
    fragments: dict[int, list[int]] = {}
    for p in placeholders:
        root = mapping[p]
        seen = {root}
        stack = [root]
        while stack:
            cur = stack.pop()
            for mate, _ in adj[cur]:
                if mate in scaffold_atoms or mate in seen:
                    continue
                seen.add(mate)
                stack.append(mate)
        fragments[p] = sorted(seen)
    return fragments


def scaffold_align(
    template: MolecularGraph, variant: MolecularGraph
) -> tuple[dict[int, int], dict[int, list[int]]]:
    """Match a placeholder-bearing template onto a concrete variant.

    Returns the chosen mapping and, per placeholder atom, the set of
    variant atoms belonging to its substituent: everything reachable from
    the mapped atom without stepping onto a scaffold (non-placeholder
    mapped) atom. Among candidate embeddings the one whose scaffold plus
    fragments cover the most variant atoms wins (a dangling atom means
    the extraction lost material); aryl placeholders ("Ar", "Ar1", ...)
    then prefer aromatic atoms; remaining ties go to the lexicographically
    first mapping and are logged.
    """
    placeholders = template.placeholder_indices()
    if not placeholders:
        raise MatchError("template contains no placeholder atoms")
    matches = find_matches(template, variant)
    if not matches:
        raise MatchError("template does not match variant structure")

    def score(m: dict[int, int]) -> tuple[int, int]:
        frags = _fragment_atoms(template, variant, m, placeholders)
        covered = {t for p, t in m.items() if template.atoms[p].kind != "placeholder"}
        for atoms in frags.values():
            covered.update(atoms)
        return len(covered), _placeholder_aromatic_score(template, variant, m)

    best = max(score(m) for m in matches)
    contenders = [m for m in matches if score(m) == best]
    placeholder_images = {tuple(m[p] for p in placeholders) for m in contenders}
    if len(placeholder_images) > 1:
        # Scaffold automorphisms (a flipped tosyl ring, swapped sulfonyl
        # oxygens) produce multiple matches harmlessly; only disagreement
        # about where the placeholders land is worth reporting.
        log.warning(
            "ambiguous scaffold alignment: %d candidate placeholder placements, "
            "keeping the lexicographically first",
            len(placeholder_images),
        )
    mapping = contenders[0]
    fragments = _fragment_atoms(template, variant, mapping, placeholders)
    claimed: set[int] = set()
    for atoms in fragments.values():
        if claimed & set(atoms):
            raise MatchError(
                "template does not isolate its placeholders: substituent "
                "regions overlap"
            )
        claimed.update(atoms)
    return mapping, fragments
