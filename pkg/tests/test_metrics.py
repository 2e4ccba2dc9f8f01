import random

import pytest
from hypothesis import given, strategies as st

from rxnscope.metrics import (
    FingerprintError,
    Fingerprint,
    MatchCounts,
    evaluate,
    fingerprint,
    match_reactions,
    prf,
    similarity_report,
    tanimoto,
    valid_rate,
)
from rxnscope.molgraph import subgraph
from rxnscope.reaction import MoleculeEntry, ReactionRecord, ConditionItem
from rxnscope.smiles import parse_smiles

from corpus import MOLECULES


def bits(*positions: int) -> Fingerprint:
    value = 0
    for p in positions:
        value |= 1 << p
    return Fingerprint(bits=value)


class TestFingerprint:
    def test_methane_single_path(self):
        fp = fingerprint(parse_smiles("C"))
        assert fp.popcount() == 1

    def test_ethane_vs_ethene(self):
        a = fingerprint(parse_smiles("CC"))
        b = fingerprint(parse_smiles("C=C"))
        assert a != b

    def test_placeholder_rejected(self):
        with pytest.raises(FingerprintError):
            fingerprint(parse_smiles("[R1]C"))

    @given(st.sampled_from(MOLECULES), st.integers(0, 2**32 - 1))
    def test_renumbering_invariance(self, s, seed):
        g = parse_smiles(s)
        if g.placeholder_indices():
            return
        perm = list(range(len(g.atoms)))
        random.Random(seed).shuffle(perm)
        assert fingerprint(subgraph(g, perm)) == fingerprint(g)


class TestTanimoto:
    def test_identity(self):
        fp = fingerprint(parse_smiles("CCO"))
        assert tanimoto(fp, fp) == 1.0

    def test_disjoint(self):
        assert tanimoto(bits(1, 2), bits(3, 4)) == 0.0

    def test_half_overlap(self):
        assert tanimoto(bits(1, 2, 3), bits(2, 3, 4)) == 0.5

    def test_both_empty(self):
        assert tanimoto(bits(), bits()) == 1.0

    def test_width_mismatch(self):
        with pytest.raises(FingerprintError):
            tanimoto(Fingerprint(bits=1, width=64), Fingerprint(bits=1, width=128))

    @given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
    def test_symmetric_and_bounded(self, a, b):
        x, y = Fingerprint(bits=a), Fingerprint(bits=b)
        assert tanimoto(x, y) == tanimoto(y, x)
        assert 0.0 <= tanimoto(x, y) <= 1.0


class TestPrf:
    def test_published_soft_triple(self):
        p, r, f = prf(898, 1056, 1120)
        assert abs(p * 100 - 85.0) < 0.05
        assert abs(r * 100 - 80.2) < 0.05
        assert abs(f * 100 - 82.5) < 0.05

    def test_published_hard_f1(self):
        _, _, f = prf(879, 1056, 1120)
        assert abs(f * 100 - 80.8) < 0.05

    def test_zero_conventions(self):
        assert prf(0, 0, 5) == (0.0, 0.0, 0.0)
        assert prf(0, 5, 0) == (0.0, 0.0, 0.0)
        assert prf(0, 0, 0) == (0.0, 0.0, 0.0)

    def test_accepts_match_counts(self):
        counts = MatchCounts(correct=1, predicted=2, gold=2, mode="soft")
        assert prf(counts) == prf(1, 2, 2)

    def test_correct_bounded(self):
        with pytest.raises(ValueError):
            MatchCounts(correct=3, predicted=2, gold=5, mode="soft")


def reaction(rid, reactants, products, conditions=()):
    return ReactionRecord(
        reaction_id=rid,
        reactants=tuple(MoleculeEntry(smiles=s) for s in reactants),
        conditions=tuple(conditions),
        products=tuple(MoleculeEntry(smiles=s) for s in products),
    )


GOLD = [
    reaction("1_1", ["CCO", "CC(C)=O"], ["CCOC(C)C"]),
    reaction("2_1", ["c1ccccc1"], ["Cc1ccccc1"]),
]


class TestMatchReactions:
    def test_reflexive(self):
        counts, pairing = match_reactions(GOLD, GOLD)
        assert (counts.correct, counts.predicted, counts.gold) == (2, 2, 2)
        assert pairing == [(0, 0), (1, 1)]

    def test_renumbered_smiles_still_match(self):
        pred = [reaction("x", ["OCC", "O=C(C)C"], ["CC(C)OCC"])]
        counts, _ = match_reactions(pred, GOLD[:1])
        assert counts.correct == 1

    def test_duplicate_prediction_counts_once(self):
        pred = [GOLD[0], GOLD[0]]
        counts, _ = match_reactions(pred, GOLD[:1])
        assert counts.correct == 1
        assert counts.predicted == 2

    def test_permutation_invariance(self):
        pred = list(reversed(GOLD))
        counts, _ = match_reactions(pred, GOLD)
        assert counts.correct == 2

    def test_hard_mode_compares_conditions(self):
        with_cond = reaction(
            "1_1", ["CCO"], ["CC=O"], [ConditionItem(role="solvent", text="PhMe")]
        )
        without = reaction("1_1", ["CCO"], ["CC=O"])
        soft, _ = match_reactions([without], [with_cond], mode="soft")
        hard, _ = match_reactions([without], [with_cond], mode="hard")
        assert soft.correct == 1
        assert hard.correct == 0

    def test_hard_mode_normalizes_text(self):
        a = reaction("1", ["CCO"], ["CC=O"], [ConditionItem(role="solvent", text="PhMe  ")])
        b = reaction("1", ["CCO"], ["CC=O"], [ConditionItem(role="solvent", text="phme")])
        counts, _ = match_reactions([a], [b], mode="hard")
        assert counts.correct == 1

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            match_reactions(GOLD, GOLD, mode="fuzzy")

    def test_molecule_entry_rejects_unparseable(self):
        # The record type itself guards the gold-side precondition.
        with pytest.raises(Exception):
            MoleculeEntry(smiles="C1CC")


class TestSimilarityReport:
    def test_identical_sets(self):
        smiles = ["CCO", "c1ccccc1"]
        assert similarity_report(smiles, smiles) == (1.0, 1.0)

    def test_empty_predictions(self):
        assert similarity_report([], ["CCO"]) == (0.0, 0.0)

    def test_half_matched(self):
        avg, at1 = similarity_report(["CCO"], ["CCO", "c1ccccc1"])
        assert avg == 0.5
        assert at1 == 0.5

    def test_renumbered_prediction_still_exact(self):
        avg, at1 = similarity_report(["OCC"], ["CCO"])
        assert (avg, at1) == (1.0, 1.0)


class TestValidRate:
    def test_all_valid(self):
        assert valid_rate(GOLD, GOLD) == (1.0, 1.0, 1.0)

    def test_half_invalid(self):
        # Parseable but chemically broken entries: bad valences throughout.
        pred = [
            reaction(
                "1",
                ["CCO", "O(C)(C)C", "Cl(C)C", "F(C)C", "CCC"],
                ["CC=O", "C(C)(C)(C)(C)C", "C", "ClC(Cl)(Cl)(Cl)Cl", "CC(C)=O"],
            )
        ]
        gold = [reaction("g", ["C"] * 5, ["O"] * 5)]
        p, r, f = valid_rate(pred, gold)
        assert p == pytest.approx(0.5)
        assert r == pytest.approx(0.5)
        assert f == pytest.approx(0.5)

    def test_no_predictions(self):
        assert valid_rate([], GOLD) == (0.0, 0.0, 0.0)


def test_evaluate_self_comparison():
    report = evaluate(GOLD, GOLD)
    assert report["soft"]["f1"] == 1.0
    assert report["hard"]["f1"] == 1.0
    assert report["avg_tanimoto"] == 1.0
    assert report["tani_at_1"] == 1.0
    assert report["valid_rate"]["f1"] == 1.0
