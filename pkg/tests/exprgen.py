"""Random expression trees that stay inside every function's domain, plus finite-difference oracles."""
import functools
import itertools

import numpy as np

from georigid import jets as J
from georigid.dsl import BinOp, Call, Name, Neg, Num, evaluate, evaluate_numeric

NAMES = ("x", "y", "z")


def _positive(e):
    # 2 + sin(e) lies in [1, 3]: away from the singularities of log, sqrt, division and real
    # powers, and bounded so that nesting cannot blow up the scale of the derivatives
    return BinOp("+", Num(2.0), Call("sin", e))


def random_tree(rng: np.random.Generator, depth: int, names=NAMES):
    if depth <= 0 or rng.random() < 0.15:
        if rng.random() < 0.7:
            return Name(names[int(rng.integers(len(names)))])
        return Num(float(np.round(rng.uniform(-1, 1), 3)))
    kind = int(rng.integers(10))
    sub = lambda: random_tree(rng, depth - 1, names)  # noqa: E731
    if kind == 0:
        return BinOp("+", sub(), sub())
    if kind == 1:
        return BinOp("-", sub(), sub())
    if kind == 2:
        return BinOp("*", sub(), sub())
    if kind == 3:
        return BinOp("/", sub(), _positive(sub()))
    if kind == 4:
        return Call(str(rng.choice(["sin", "cos", "atan"])), sub())
    if kind == 5:
        return Call("exp", Call("sin", sub()))
    if kind == 6:
        return Call(str(rng.choice(["log", "sqrt"])), _positive(sub()))
    if kind == 7:
        return BinOp("^", _positive(sub()), Num(float(rng.choice([-1.5, 0.5, 2.0, 3.0]))))
    if kind == 8:
        return Neg(sub())
    return Call("atan", BinOp("*", sub(), sub()))


def random_point(rng: np.random.Generator, dim: int = len(NAMES)) -> np.ndarray:
    return rng.uniform(-0.5, 0.5, dim)


def jet_of(e, x, names=NAMES) -> J.Jet:
    X = J.coordinates(np.asarray(x, dtype=float))
    return evaluate(e, {n: X[k] for k, n in enumerate(names)})


def numeric(e, pts, names=NAMES):
    """Evaluate at an array of points with shape (..., dim)."""
    pts = np.asarray(pts, dtype=float)
    out = evaluate_numeric(e, {n: pts[..., k] for k, n in enumerate(names)})
    return np.broadcast_to(np.asarray(out, dtype=float), pts.shape[:-1])


# fourth-order central stencil for d/dx: offsets and weights (divide by h)
STENCIL = ((-2.0, 1 / 12), (-1.0, -8 / 12), (1.0, 8 / 12), (2.0, -1 / 12))


@functools.lru_cache(maxsize=None)
def _stencil(n: int, order: int):
    """Offsets (in units of h) with shape (n^order, 4^order, n) and the matching weights."""
    taps = list(itertools.product(STENCIL, repeat=order))
    idx = list(itertools.product(range(n), repeat=order))
    eye = np.eye(n)
    offs = np.array([[sum(o * eye[i] for (o, _), i in zip(tp, ij)) for tp in taps] for ij in idx])
    w = np.array([np.prod([wt for _, wt in tp]) for tp in taps])
    return offs, w


def fd_order(e, x, order: int, h: float, names=NAMES) -> np.ndarray:
    """Order-``order`` derivative tensor from products of fourth-order central first differences."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    offs, w = _stencil(n, order)
    vals = numeric(e, x + h * offs, names)
    return (vals @ w / h ** order).reshape((n,) * order)


def fd_derivatives(e, x, steps=(1e-4, 1e-3, 1e-2), names=NAMES):
    return [fd_order(e, x, k, h, names) for k, h in zip((1, 2, 3), steps)]


def rel_err(jet_val, fd_val) -> float:
    return float(np.max(np.abs(jet_val - fd_val)) / max(1.0, float(np.max(np.abs(jet_val)))))


def _rel_diff(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


STEPS = (1e-4, 1e-3, 1e-2)
TOLS = (1e-5, 1e-4, 2e-2)


def check_against_fd(jet: J.Jet, e, x, steps=STEPS, tols=TOLS, names=NAMES, max_halvings: int = 4):
    """Compare jet derivatives with central differences, order by order.

    The difference quotient at the stated step is used whenever it agrees with the one at half
    the step to tol/4 (the oracle resolves the function there).  Otherwise the step is halved
    until it does; such orders are reported as unresolved at the stated step.
    Returns ``(errors, steps_used)``.
    """
    errs, used = [], []
    for k, (h, tol) in enumerate(zip(steps, tols), start=1):
        d = fd_order(e, x, k, h, names)
        for _ in range(max_halvings):
            d_half = fd_order(e, x, k, h / 2, names)
            if _rel_diff(d, d_half) <= tol / 4:
                break
            h, d = h / 2, d_half
        errs.append(rel_err(jet.coeffs[k], d))
        used.append(h)
    return errs, used
