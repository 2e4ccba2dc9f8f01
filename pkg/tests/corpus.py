"""Shared molecule corpus for round-trip and canonicalization sweeps."""

# Kept deliberately varied: chains, branches, rings, fused aromatics,
# heteroatoms, charges, isotopes, tetrahedral centers, double-bond
# geometry, and multi-component salts.
MOLECULES = [
    "C",
    "CC",
    "CCO",
    "OCC",
    "C=C",
    "C#N",
    "CC(C)C",
    "CC(C)(C)C",
    "CC(=O)O",
    "CC(=O)OC",
    "NCC(=O)O",
    "CCN(CC)CC",
    "C1CC1",
    "C1CCC1",
    "C1CCCCC1",
    "C1CCOC1",
    "C1COCCO1",
    "O=C1CCCCC1",
    "CC1CCCCC1C",
    "c1ccccc1",
    "Cc1ccccc1",
    "Cc1ccc(C)cc1",
    "Cc1cccc(C)c1",
    "COc1ccccc1",
    "Clc1ccccc1Cl",
    "Oc1ccc(Br)cc1",
    "c1ccc2ccccc2c1",
    "Cc1ccc2ccccc2c1",
    "c1ccncc1",
    "Cc1ccncc1",
    "CC(=O)Nc1ccccc1",
    "O=S(=O)(c1ccc(C)cc1)N",
    "CC(C)(C)OC(=O)N",
    "FC(F)(F)c1ccccc1",
    "N#Cc1ccccc1",
    "[O-]C(=O)C",
    "C[N+](C)(C)C",
    "[NH4+].[Cl-]",
    "C[NH3+].[Cl-]",
    "[13CH4]",
    "[2H]OC",
    "N[C@@H](C)C(=O)O",
    "N[C@H](C)C(=O)O",
    "F[C@H](Cl)Br",
    "C[C@](N)(O)CC",
    "C/C=C/C",
    "C/C=C\\C",
    "C/C=C/C=C/C",
    "CC(=O)/C=C/c1ccccc1",
    "CCOC(=O)C1CCN(C)CC1",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "CN1CCC(CC1)Oc1ccccc1",
    "O=C(O)c1ccccc1OC(C)=O",
]
