import random
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from rxnscope.chemops import (
    AbbreviationTable,
    AliasRegistry,
    FormulaError,
    StereoPerceptionError,
    expand_abbreviation,
    parse_condensed_formula,
    perceive_stereo,
)
from rxnscope.molgraph import AtomToken, Bond, MolecularGraph, validate_graph
from rxnscope.rgroup import substitute_placeholders
from rxnscope.smiles import canonicalize, parse_smiles, write_smiles

from oracles import (
    flip_wedges,
    mirror_drawing,
    numpy_wedge_tag,
    random_wedge_drawing,
)


def plug(template: str, **assignment) -> str:
    """Substitute tokens into a template and return the canonical result."""
    g = substitute_placeholders(parse_smiles(template), assignment)
    return canonicalize(write_smiles(g, isomeric=True))


class TestAbbreviationTable:
    def test_seed_tokens_present(self):
        table = AbbreviationTable.default()
        for token in ["Ph", "Et", "Me", "nPr", "iPr", "Ts", "CF3", "OMe", "OEt"]:
            assert table.get(token) is not None, token

    def test_every_fragment_validates_with_attachment(self):
        table = AbbreviationTable.default()
        for token in table.tokens():
            frag = table.get(token)
            assert validate_graph(frag.graph) == [], token
            assert 0 <= frag.attachment < len(frag.graph.atoms), token

    def test_fragments_are_cloned_per_call(self):
        table = AbbreviationTable.default()
        assert table.get("Ph") is not table.get("Ph") or table.get("Ph").graph is not None


class TestExpandAbbreviation:
    def test_ph_into_acyl_template(self):
        assert plug("[R3]C(C)=O", R3="Ph") == canonicalize("CC(=O)c1ccccc1")

    def test_ortho_chlorophenyl(self):
        assert plug("[Ar2]C", Ar2="2-ClC6H4") == canonicalize("Cc1ccccc1Cl")

    def test_para_vs_meta_bromophenyl_differ(self):
        para = plug("[Ar]C", Ar="4-BrC6H4")
        meta = plug("[Ar]C", Ar="3-BrC6H4")
        assert para == canonicalize("Cc1ccc(Br)cc1")
        assert meta == canonicalize("Cc1cccc(Br)c1")
        assert para != meta

    def test_ipr_attaches_at_central_carbon(self):
        assert plug("[R]O", R="iPr") == canonicalize("CC(C)O")

    def test_unknown_token_becomes_aliased_wildcard(self):
        reg = AliasRegistry()
        frag = expand_abbreviation("Zzq9", AbbreviationTable.default(), reg)
        atom = frag.graph.atoms[frag.attachment]
        assert atom.kind == "wildcard"
        assert atom.isotope == 100
        assert reg.items() == {"Zzq9": 100}

    def test_alias_stable_within_registry(self):
        reg = AliasRegistry()
        a = expand_abbreviation("Qq1", None, reg)
        b = expand_abbreviation("Qq2", None, reg)
        c = expand_abbreviation("Qq1", None, reg)
        assert a.graph.atoms[0].isotope == c.graph.atoms[0].isotope == 100
        assert b.graph.atoms[0].isotope == 101

    @given(st.text(min_size=1, max_size=10).filter(str.isprintable))
    def test_total_over_arbitrary_tokens(self, token):
        frag = expand_abbreviation(token, AbbreviationTable.default(), AliasRegistry())
        assert frag.graph.atoms
        assert validate_graph(frag.graph) == []


class TestCondensedFormula:
    def test_cf3(self):
        frag = parse_condensed_formula("CF3")
        texts = sorted(a.text for a in frag.graph.atoms)
        assert texts == ["C", "F", "F", "F"]
        assert frag.graph.atoms[frag.attachment].text == "C"

    def test_no2(self):
        # Charge-separated nitro form, not hypervalent nitrogen.
        assert plug("[R]c1ccccc1", R="NO2") == canonicalize("[O-][N+](=O)c1ccccc1")

    def test_disubstituted_phenyl_pattern(self):
        got = plug("[Ar]C", Ar="3,5-(CF3)2C6H3")
        assert got == canonicalize("Cc1cc(C(F)(F)F)cc(C(F)(F)F)c1")

    @pytest.mark.parametrize("bad", ["XYZ", "nPr", "", "C6", "9-BrC6H4"])
    def test_rejects_non_formula(self, bad):
        with pytest.raises(FormulaError):
            parse_condensed_formula(bad)


def drawing_trans_butene() -> MolecularGraph:
    # Zig-zag trans-2-butene: methyls on opposite sides of the C2=C3 line.
    coords = [(0.0, 0.0), (1.0, 0.6), (2.0, 0.0), (3.0, 0.6)]
    atoms = tuple(AtomToken(kind="element", text="C", coords=c) for c in coords)
    bonds = (
        Bond(a=0, b=1),
        Bond(a=1, b=2, order="double"),
        Bond(a=2, b=3),
    )
    return MolecularGraph(atoms=atoms, bonds=bonds)


class TestPerceiveStereo:
    def test_no_wedges_no_tags(self):
        g = drawing_trans_butene()
        flat = MolecularGraph(
            atoms=g.atoms, bonds=tuple(replace(b, order="single") for b in g.bonds)
        )
        out, warns = perceive_stereo(flat)
        assert warns == []
        assert all(a.chiral is None for a in out.atoms)
        assert all(b.direction is None for b in out.bonds)

    def test_trans_butene_marks(self):
        out, _ = perceive_stereo(drawing_trans_butene())
        s = canonicalize(write_smiles(out, isomeric=True))
        assert s == canonicalize("C/C=C/C")
        assert s != canonicalize("C/C=C\\C")

    def test_cis_butene_marks(self):
        g = drawing_trans_butene()
        atoms = list(g.atoms)
        # Keep the methyl clearly off the double-bond line (collinear
        # substituents give no side evidence and stay unmarked).
        atoms[3] = replace(atoms[3], coords=(2.2, -0.9))
        out, _ = perceive_stereo(MolecularGraph(atoms=tuple(atoms), bonds=g.bonds))
        assert canonicalize(write_smiles(out, isomeric=True)) == canonicalize("C/C=C\\C")

    def test_agrees_with_numpy_oracle(self):
        rng = random.Random(31)
        for _ in range(50):
            g, center = random_wedge_drawing(rng)
            tagged, _ = perceive_stereo(g)
            assert tagged.atoms[center].chiral == numpy_wedge_tag(g, center)

    def test_mirror_invariance(self):
        rng = random.Random(32)
        for _ in range(30):
            g, center = random_wedge_drawing(rng)
            a, _ = perceive_stereo(g)
            b, _ = perceive_stereo(mirror_drawing(g))
            assert a.atoms[center].chiral == b.atoms[center].chiral

    def test_wedge_flip_inverts(self):
        rng = random.Random(33)
        flipped_tags = {"@": "@@", "@@": "@", None: None}
        for _ in range(30):
            g, center = random_wedge_drawing(rng)
            a, _ = perceive_stereo(g)
            b, _ = perceive_stereo(flip_wedges(g))
            assert b.atoms[center].chiral == flipped_tags[a.atoms[center].chiral]

    def test_conflicting_wedges_leave_untagged(self):
        rng = random.Random(34)
        g, center = random_wedge_drawing(rng)
        # Make every bond a wedge, alternating senses: guaranteed conflict.
        bonds = tuple(
            replace(b, wedge="solid" if i % 2 == 0 else "dashed")
            for i, b in enumerate(g.bonds)
        )
        conflicted = MolecularGraph(atoms=g.atoms, bonds=bonds)
        out, warns = perceive_stereo(conflicted)
        if out.atoms[center].chiral is None:
            assert any("conflict" in w for w in warns)

    def test_wedge_without_coords_is_an_error(self):
        atoms = (
            AtomToken(kind="element", text="C"),
            AtomToken(kind="element", text="F"),
            AtomToken(kind="element", text="Cl"),
            AtomToken(kind="element", text="Br"),
        )
        bonds = (
            Bond(a=0, b=1, wedge="solid"),
            Bond(a=0, b=2),
            Bond(a=0, b=3),
        )
        with pytest.raises(StereoPerceptionError):
            perceive_stereo(MolecularGraph(atoms=atoms, bonds=bonds))
