"""Unrolling a swiss roll with locally linear embedding.

LLE reconstructs each point from its neighbours and looks for a low
dimensional layout that keeps those weights. We score the result by
trustworthiness against the true intrinsic coordinates.
Run: ``python demos/05_manifold.py``.
"""
from fogcrn.learning import gen_manifold, lle_embed, procrustes_residual, trustworthiness

pts, intrinsic = gen_manifold("linear_subspace", 500, 0)
emb = lle_embed(pts, k=10, r=2, reg=1e-9)
print(f"plane in R^3: Procrustes residual to the true coordinates "
      f"{procrustes_residual(emb.points, intrinsic):.2e}")

for k in (5, 10, 20, 40):
    pts, intrinsic = gen_manifold("swiss_roll", 1000, 0)
    emb = lle_embed(pts, k=k, r=2, reg=1e-3)
    print(f"swiss roll, k={k:>2}: trustworthiness {trustworthiness(intrinsic, emb.points, 10):.4f}, "
          f"embedding eigenvalues {emb.eigenvalues[0]:.2e} {emb.eigenvalues[1]:.2e}")

# %% Small neighbourhoods fragment the roll; large ones short-circuit across
# its layers. The useful range sits in between.
