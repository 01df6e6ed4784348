# %% [markdown]
# # Parallel volume priors
#
# For an equiaffine α-connection the parallel volume density ``f`` solves
# ``d log f = τ``.  We integrate ``τ`` along axis-aligned paths from a base
# point; at α = 0 the result is the Jeffreys prior ``sqrt(det g)``.

# %%
import numpy as np

from igeo.families import fisher_quadrature, normal_family, random_spec
from igeo.manifold import geometry_at
from igeo.prior import NotEquiaffineError, parallel_volume

# %%
# Gaussian family in (μ, σ): Jeffreys density ∝ 1/σ²
normal = normal_family()
out = parallel_volume(normal, 0.0, grid=15)
ratio = np.exp(out.log_f.ravel()) * out.points[:, 1] ** 2
print(np.ptp(ratio) / ratio.mean())

# %%
# det g from Gauss-Hermite quadrature instead of the closed form
det = np.array([np.linalg.det(fisher_quadrature(m, s)[0]) for m, s in out.points])
f = np.exp(out.log_f.ravel())
print(np.ptp(f / np.sqrt(det)) / np.mean(f / np.sqrt(det)))

# %%
# any structure, α = 0: log f - ½ log det g is constant
spec = random_spec(3, 4)
out = parallel_volume(spec, 0.0, grid=5)
half = 0.5 * np.linalg.slogdet(geometry_at(spec, out.points).g)[1]
print(np.ptp(out.log_f.ravel() - half))

# %%
# away from α = 0 a generic structure has no parallel volume
try:
    parallel_volume(random_spec(2, 7), 1.0, grid=5)
except NotEquiaffineError as err:
    print(err)

# %%
print(parallel_volume(normal, 0.0, grid=[3, 4], normalize=True).to_csv())
