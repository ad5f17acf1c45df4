# From invariant subspaces to factorizations and back
# Run: python3 demos/03_model_and_blocks.py
from ncfactor import fmodel, rowcon
from ncfactor import fixtures as fx
from ncfactor.pipeline import roundtrip

# A nilpotent tuple on C^4 with a nested pair of jointly invariant subspaces.
f = fx.nilpotent_fixture(1501, 2, 4, 3, 2)
print("subspace ranks:", [S.rank for S in f.chain])
print("invariant:", [rowcon.jointly_invariant(f.T, S) for S in f.chain])

# Each invariant subspace splits the characteristic function into a
# product of factors.  The round trip extracts those factors, rebuilds the
# functional model and then the triangular form of the model operators.
r = roundtrip(f.T, f.chain, 5)
print("factors:", [th.shape for th in r.chain.factors])
print("product coincides with the characteristic function:", r.extraction.coincidence.ok)
print("regular:", r.extraction.regularity.regular)

# The model space and the chain of invariant subspaces it carries.
space, ops = r.model
print("model dimension:", space.H.rank)
print("chain verified:", r.chain_report.passed)

# In a basis adapted to the chain the model operators are upper triangular.
tri = r.triangular
print("below-diagonal size:", tri.below_diagonal)
for j, A in enumerate(tri.blocks):
    print("operator", j + 1, "diagonal block shapes:", [A[a][a].shape for a in range(len(A))])

# Every diagonal block is unitarily equivalent to the model of one factor.
for u in r.unitaries:
    print("block", u.index, u.verdict, "intertwining residual", u.intertwining)

# Inserting a unitary constant factor changes nothing: the corresponding
# subspaces coincide and its triangular block disappears.
chain = r.chain
chu = fx.unitary_insert(chain, 1, seed=5)
col = fmodel.unitary_constant_collapse(chu, 1, model=r.model)
print("collapse detected:", col.equal, "angle", col.angle)
