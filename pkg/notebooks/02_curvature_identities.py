# %% [markdown]
# # α-connections and their curvature
#
# A statistical manifold is a metric ``g`` with a totally symmetric cubic
# form ``Q``.  Each α gives a torsion-free connection; α and −α are dual
# with respect to ``g``.  Here we look at the curvature of a random
# structure and at the identities tying the two dual curvatures together.

# %%
import numpy as np

from igeo.curvature import ricci_alpha_closed_form, riemann
from igeo.diagnostics import Sampling, run_suite
from igeo.families import normal_family, random_spec, sphere_chart
from igeo.manifold import christoffel_alpha, geometry_at, sample_points

spec = random_spec(3, 7)
pts = sample_points(spec, 50, seed=0)
geo = geometry_at(spec, pts)

# %%
# R(X,Y,Z,W) = -R*(X,Y,W,Z): dual curvatures are skew in the last pair
R = riemann(geo, 1.0).Rlow
Rs = riemann(geo, -1.0).Rlow
print(np.abs(R + Rs.swapaxes(-1, -2)).max())

# %%
# Ric^(α) from Ric^(±1) and the trace of K = g^-1 Q
a = 0.4
direct = riemann(geo, a).Ric
closed = ricci_alpha_closed_form(geo, riemann(geo, 1.0).Ric, riemann(geo, -1.0).Ric, a)
print(np.abs(direct - closed).max())

# %%
# the Gaussian family: constant curvature -1/2 for Levi-Civita, flat at α = ±1
normal = normal_family()
ng = geometry_at(normal, sample_points(normal, 20, seed=1))
for alpha in (0.0, 1.0, -1.0):
    print(alpha, np.abs(riemann(ng, alpha).Rlow).max())
print(np.abs(christoffel_alpha(ng, 1.0)).max() > 0)  # flat but not affine coordinates

# %%
# the full battery on the round sphere
print(run_suite(sphere_chart(), Sampling(points=100, seed=0)).to_text())
