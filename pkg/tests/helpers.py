"""Shared test utilities: random expressions and finite differences."""
import numpy as np

from igeo.expr import DomainError, eval_jet2, eval_value, parse

_UNARY = ("sin", "cos", "exp", "tanh", "sinh", "cosh", "log", "sqrt", "tan")
_BINARY = ("+", "-", "*", "/", "^")


def random_expression(rng, dim, depth=4):
    """Random expression text whose tree depth is at most ``depth``."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.65:
            return f"t{rng.integers(1, dim + 1)}"
        return f"{rng.uniform(-2, 2):.3f}"
    kind = rng.random()
    if kind < 0.3:
        f = _UNARY[rng.integers(len(_UNARY))]
        return f"{f}({random_expression(rng, dim, depth - 1)})"
    if kind < 0.38:
        return f"-({random_expression(rng, dim, depth - 1)})"
    op = _BINARY[rng.integers(len(_BINARY))]
    left = random_expression(rng, dim, depth - 1)
    if op == "^":
        exponent = rng.choice(["2", "3", "-1", "0.5", "1.5"])
        return f"({left})^{exponent}"
    return f"({left}) {op} ({random_expression(rng, dim, depth - 1)})"


def fd_derivatives(field, p, h=1e-4):
    """Central-difference gradient and Hessian of ``field`` at ``p``."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    f0 = eval_value(field, p)
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    eye = np.eye(n) * h
    for i in range(n):
        fp, fm = eval_value(field, p + eye[i]), eval_value(field, p - eye[i])
        grad[i] = (fp - fm) / (2 * h)
        hess[i, i] = (fp - 2 * f0 + fm) / h**2
        for j in range(i + 1, n):
            fpp = eval_value(field, p + eye[i] + eye[j])
            fpm = eval_value(field, p + eye[i] - eye[j])
            fmp = eval_value(field, p - eye[i] + eye[j])
            fmm = eval_value(field, p - eye[i] - eye[j])
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * h * h)
    return grad, hess


def well_conditioned_cases(count, seed, dim=3, bound=1e3, h=1e-4, screen=1e-6, rejected=None):
    """Yield ``(text, field, point, jet, fd_grad, fd_hess)`` for expressions
    where central differences at step ``h`` are a trustworthy oracle.

    A case is kept when the expression is defined on the stencil, moderately
    sized, and the step-``h`` and step-``2h`` differences agree to ``screen``
    (so the truncation error at ``h`` is a few times smaller than that).
    ``rejected``, if a dict, accumulates counts of discarded cases by reason.
    """
    rng = np.random.default_rng(seed)
    produced = 0
    rejected = {} if rejected is None else rejected

    def reject(reason):
        rejected[reason] = rejected.get(reason, 0) + 1

    while produced < count:
        text = random_expression(rng, dim)
        field = parse(text, dim)
        p = rng.uniform(-1, 1, dim)
        try:
            jet = eval_jet2(field, p)
            # every point of the finite-difference stencil must be in the domain
            for dp in np.array(np.meshgrid(*[[-2 * h, 0, 2 * h]] * dim)).reshape(dim, -1).T:
                eval_value(field, p + dp)
        except DomainError:
            reject("domain")
            continue
        scale = max(abs(jet.value), np.abs(jet.grad).max(), np.abs(jet.hess).max())
        if not np.isfinite(scale) or scale > bound:
            reject("magnitude")
            continue
        g1, h1 = fd_derivatives(field, p, h)
        g2, h2 = fd_derivatives(field, p, 2 * h)
        if max(relative_error(g2, g1), relative_error(h2, h1)) > screen:
            reject("finite differences unreliable")
            continue
        produced += 1
        yield text, field, p, jet, g1, h1


def relative_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


# PASS/FAIL lines from the acceptance gate, echoed in the terminal summary
ACCEPTANCE_LINES = []
