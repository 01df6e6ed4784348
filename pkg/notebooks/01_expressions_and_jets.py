# %% [markdown]
# # Expressions and second-order jets
#
# Metric and cubic-form entries are written as small expressions in the
# chart coordinates ``t1 .. tn``.  Every evaluation carries the value, the
# gradient and the Hessian at once, batched over points.

# %%
import numpy as np

from igeo.expr import diff, eval_jet2, eval_value, parse, to_text

f = parse("exp(t1) * sin(t2) + t1^2 / (1 + t2^2)", 2)
print(to_text(f.root))

# %%
# value, gradient and Hessian at three points in one call
pts = np.array([[0.0, 0.0], [0.5, -0.3], [-1.0, 1.2]])
jet = eval_jet2(f, pts)
print(jet.value)
print(jet.grad)
print(jet.hess[1])

# %%
# symbolic derivative (1-based coordinate index) agrees with the jet
df1 = diff(f, 1)
print(to_text(df1.root))
print(np.abs(eval_value(df1, pts) - jet.grad[:, 0]).max())

# %%
# central differences as a sanity check on the Hessian
h = 1e-4
p = pts[1]
fd = np.empty((2, 2))
for i in range(2):
    e = np.eye(2)[i] * h
    fd[i] = (eval_jet2(f, p + e).grad - eval_jet2(f, p - e).grad) / (2 * h)
print(np.abs(fd - jet.hess[1]).max())
