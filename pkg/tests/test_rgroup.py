import random

import pytest

from rxnscope.chemops import AbbreviationTable
from rxnscope.molgraph import GraphError, main_component, subgraph
from rxnscope.rgroup import (
    MissingBindingError,
    ReactionTemplate,
    extract_rgroup_fragments,
    reconstruct_reactants,
    splice_fragment,
    substitute_placeholders,
)
from rxnscope.smiles import canonicalize, parse_smiles, write_smiles

TABLE = AbbreviationTable.default()

SCAFFOLDS = [
    "[R1]C(=O)O",
    "[R1]C#CC(=O)C[R2]",
    "[Ar]C([R])=O",
    "[R1]OC(=O)[R2]",
    "[R1]c1ccc([R2])cc1",
    "[Ar]C1CC1[R]",
    "[R1]N([R2])C(C)=O",
]
POOL = ["Me", "Et", "Ph", "OMe", "Cl", "CF3", "iPr", "CN", "Br", "nPr"]


def graph_smiles(g) -> str:
    return canonicalize(write_smiles(g, isomeric=True))


class TestSplice:
    def test_fragment_replaces_atom(self):
        g = parse_smiles("[R1]CO")
        frag = TABLE.get("Me")
        out = splice_fragment(g, 0, frag)
        assert graph_smiles(out) == canonicalize("CCO")

    def test_redirected_bond_drops_depiction_marks(self):
        g = parse_smiles("[R1]/C=C/C")
        out = splice_fragment(g, 0, TABLE.get("Et"))
        # The spliced-in bond cannot keep a direction mark: the geometry
        # claim belonged to the placeholder drawing, not the fragment.
        new_ends = {i for i, a in enumerate(out.atoms)}
        redirected = [
            b for b in out.bonds if b.direction is not None and b.a not in new_ends
        ]
        assert redirected == []
        assert canonicalize(write_smiles(out, isomeric=False)) == canonicalize("CCC=CC")


class TestSubstitute:
    def test_token_assignment(self):
        g = parse_smiles("[R1]C#CC(=O)C[R2]")
        out = substitute_placeholders(g, {"R1": "Ph", "R2": "H"})
        assert graph_smiles(out) == canonicalize("[H]CC(=O)C#Cc1ccccc1")

    def test_unbound_placeholders_survive(self):
        g = parse_smiles("[R1]C[R2]")
        out = substitute_placeholders(g, {"R1": "Me"})
        labels = [a.label for a in out.atoms if a.kind == "placeholder"]
        assert labels == ["R2"]

    def test_fragment_binding_accepted(self):
        g = parse_smiles("[R1]O")
        out = substitute_placeholders(g, {"R1": TABLE.get("Et")})
        assert graph_smiles(out) == canonicalize("CCO")

    def test_multiple_occurrences_all_replaced(self):
        g = parse_smiles("[R1]C(=O)[R1]")
        out = substitute_placeholders(g, {"R1": "Me"})
        assert graph_smiles(out) == canonicalize("CC(C)=O")


class TestExtract:
    def test_acyl_pair(self):
        template = parse_smiles("[Ar]C([R])=O")
        bindings = extract_rgroup_fragments(template, parse_smiles("CCC(=O)c1ccccc1"))
        assert set(bindings) == {"Ar", "R"}
        assert len(bindings["R"].graph.atoms) == 2
        assert len(bindings["Ar"].graph.atoms) == 6

    def test_repeated_label_keeps_first(self):
        template = parse_smiles("[R1]C(=O)[R1]")
        bindings = extract_rgroup_fragments(template, parse_smiles("CC(=O)C"))
        assert set(bindings) == {"R1"}
        assert graph_smiles(bindings["R1"].graph) == canonicalize("C")


class TestReconstruct:
    def template(self) -> ReactionTemplate:
        return ReactionTemplate(
            reactant_templates=(parse_smiles("[Ar]C([R])=O"),),
            product_templates=(parse_smiles("[Ar]C([R])(O)C#N"),),
        )

    def test_round_trip_through_product(self):
        t = self.template()
        for product, reactant in [
            ("CCC(O)(C#N)c1ccccc1", "CCC(=O)c1ccccc1"),
            ("CCCC(O)(C#N)c1ccccc1", "CCCC(=O)c1ccccc1"),
        ]:
            bindings = extract_rgroup_fragments(
                t.product_templates[0], parse_smiles(product)
            )
            out = reconstruct_reactants(t, bindings)
            assert [canonicalize(s) for s in out] == [canonicalize(reactant)]

    def test_missing_binding_lists_labels(self):
        t = self.template()
        with pytest.raises(MissingBindingError) as err:
            reconstruct_reactants(t, {"Ar": "Ph"})
        assert err.value.labels == ["R"]

    def test_placeholder_label_set(self):
        assert self.template().placeholder_labels == frozenset({"Ar", "R"})

    def test_empty_template_rejected(self):
        with pytest.raises(GraphError):
            ReactionTemplate(reactant_templates=(), product_templates=())


class TestInverseProperty:
    """Substitution then extraction must reproduce the variant exactly."""

    def test_random_pairs(self):
        rng = random.Random(41)
        for _ in range(40):
            template_s = rng.choice(SCAFFOLDS)
            template = parse_smiles(template_s)
            labels = sorted(
                {template.atoms[i].label for i in template.placeholder_indices()}
            )
            assignment = {lab: rng.choice(POOL) for lab in labels}
            variant = substitute_placeholders(template, assignment, TABLE)
            variant_s = write_smiles(variant, isomeric=True)
            bindings = extract_rgroup_fragments(template, parse_smiles(variant_s))
            rebuilt = substitute_placeholders(template, bindings)
            assert graph_smiles(rebuilt) == canonicalize(variant_s), (
                template_s,
                assignment,
            )
