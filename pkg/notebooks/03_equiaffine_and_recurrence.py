# %% [markdown]
# # Equiaffine and recurrent structures
#
# A connection is equiaffine when it admits a parallel volume form.  In the
# torsion-free case that is the same as a symmetric Ricci tensor and, in
# coordinates, the same as a closed one-form ``τ``.  We compare both
# readings and then look at α-conformal structures, whose cubic form is
# recurrent.

# %%
import numpy as np

from igeo.diagnostics import (
    Sampling,
    SampledManifold,
    check_equiaffine,
    check_prop_3_3,
    check_theorem_4_1,
    recover_recurrent_one_form,
)
from igeo.expr import eval_jet2, parse
from igeo.families import RiemannianSpec, alpha_conformal, exponential_family_from_potential, random_spec

box = [(-1.0, 1.0), (-1.0, 1.0)]
sampling = Sampling(points=100, seed=0)

# %%
# a dually flat family is equiaffine for every α; a generic structure only at α = 0
expfam = SampledManifold(exponential_family_from_potential(parse("exp(t1) + exp(t2)", 2), box), sampling)
generic = SampledManifold(random_spec(2, 7), sampling)
for a in (-1.0, 0.0, 1.0):
    e, g = check_equiaffine(expfam, alpha=a), check_equiaffine(generic, alpha=a)
    print(a, e.verdict, g.verdict, g.detail["ricci_symmetry_verdict"], g.detail["closedness_verdict"])

# %%
# in two dimensions conjugate symmetry and conjugate Ricci-symmetry coincide pointwise
print(check_prop_3_3(generic).detail)

# %%
# α-conformal: Q is recurrent with one-form ω = α dφ
h = RiemannianSpec.from_entries(2, box, {(1, 1): "1", (2, 2): "1 + t1^2"})
conf = SampledManifold(alpha_conformal(h, "t1*t2", 0.5), sampling)
omega, resid = recover_recurrent_one_form(conf.geo, None)
dphi = eval_jet2(parse("t1*t2", 2), conf.points).grad
print(np.abs(omega - 0.5 * dphi).max(), resid.max())
print(check_theorem_4_1(conf).verdict)
