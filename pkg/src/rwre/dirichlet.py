"""Dirichlet law on the 2d-simplex.

Directions are indexed from 0: ``0..d-1`` are the positive axes
``+e_1..+e_d`` and ``d..2d-1`` are ``-e_1..-e_d``, so the opposite of
direction ``i`` is ``(i + d) % (2 * d)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln, roots_jacobi

from .errors import Divergent
from .seeding import MC_BLOCKS, block_ranges, stream

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class WeightVector:
    """Dirichlet parameters ``(alpha_1, ..., alpha_2d)``."""

    alphas: tuple[float, ...]
    dim: int = field(default=0)

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if len(alphas) == 0 or len(alphas) % 2:
            raise ValueError(f"need an even, positive number of weights, got {len(alphas)}")
        dim = len(alphas) // 2
        if self.dim and self.dim != dim:
            raise ValueError(f"dim={self.dim} does not match {len(alphas)} weights")
        if not all(np.isfinite(a) and a > 0 for a in alphas):
            raise ValueError(f"weights must be finite and strictly positive: {alphas}")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "dim", dim)

    @classmethod
    def from_mean(cls, mean: Sequence[float], gamma: float) -> "WeightVector":
        """Weights ``gamma * m`` for a mean transition vector ``m``."""
        m = np.asarray(mean, dtype=float)
        return cls(tuple(gamma * m / m.sum()))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.alphas)

    @property
    def gamma(self) -> float:
        return float(sum(self.alphas))

    @property
    def mean(self) -> np.ndarray:
        return self.array / self.gamma

    def __len__(self):
        return len(self.alphas)

    def positive(self, axis: int) -> float:
        return self.alphas[axis]

    def negative(self, axis: int) -> float:
        return self.alphas[axis + self.dim]


def opposite(direction: int, dim: int) -> int:
    return (direction + dim) % (2 * dim)


def unit_vectors(dim: int) -> np.ndarray:
    """Rows are the 2d unit steps in direction-index order."""
    eye = np.eye(dim, dtype=np.int64)
    return np.concatenate([eye, -eye])


def check_simplex(probs, tol: float = SIMPLEX_TOL) -> bool:
    """True when ``probs`` is a point of the simplex (entries in (0, 1], sum 1)."""
    p = np.asarray(probs, dtype=float)
    return bool(np.all(p > 0) and np.all(p <= 1) and abs(p.sum() - 1.0) <= tol)


def sample_dirichlet(weights: WeightVector, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw from the Dirichlet law by normalising independent Gamma(alpha_i, 1)
    variables.  ``size`` prepends batch dimensions."""
    shape = (len(weights),) if size is None else (*np.atleast_1d(size), len(weights))
    z = rng.standard_gamma(np.broadcast_to(weights.array, shape))
    return z / z.sum(axis=-1, keepdims=True)


def dirichlet_log_moment(weights: WeightVector, idx: Sequence[int]) -> float:
    """log E[prod x_i^{n_i}] under the Dirichlet law."""
    n = np.asarray(idx, dtype=float)
    if n.shape != (len(weights),) or np.any(n < 0):
        raise ValueError(f"multi-index must hold {len(weights)} non-negative entries")
    a = weights.array
    return float(np.sum(gammaln(a + n) - gammaln(a)) + gammaln(a.sum()) - gammaln(a.sum() + n.sum()))


def dirichlet_moment(weights: WeightVector, idx: Sequence[int]) -> float:
    return float(np.exp(dirichlet_log_moment(weights, idx)))


def inverse_first_moment(weights: WeightVector, direction: int) -> float:
    """E[1/x_i] = (gamma - 1) / (alpha_i - 1), finite only when alpha_i > 1."""
    a = weights.alphas[direction]
    if a <= 1:
        raise Divergent(f"E[1/x_{direction}] is infinite for alpha={a} <= 1")
    return (weights.gamma - 1.0) / (a - 1.0)


def dirichlet_covariance(weights: WeightVector, i: int, j: int) -> float:
    m = weights.mean
    g = weights.gamma
    if i == j:
        return float(m[i] * (1.0 - m[i]) / (g + 1.0))
    return float(-m[i] * m[j] / (g + 1.0))


def covariance_matrix(weights: WeightVector) -> np.ndarray:
    m = weights.mean
    return (np.diag(m) - np.outer(m, m)) / (weights.gamma + 1.0)


# --------------------------------------------------------------------------
# polynomial test functions

class Polynomial:
    """Polynomial in ``n_vars`` variables stored as ``{exponents: coefficient}``.

    Evaluation and gradient are vectorised over a leading batch axis.
    """

    def __init__(self, terms: Mapping[Sequence[int], float], n_vars: int, name: str = ""):
        self.n_vars = n_vars
        self.terms = {tuple(int(e) for e in k): float(c) for k, c in terms.items() if c != 0}
        for k in self.terms:
            if len(k) != n_vars or min(k) < 0:
                raise ValueError(f"bad exponent vector {k} for {n_vars} variables")
        self.name = name or self._default_name()

    def _default_name(self):
        parts = []
        for k, c in sorted(self.terms.items()):
            mono = "*".join(f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(k) if e)
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts) or "0"

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape[0])
        for k, c in self.terms.items():
            out += c * np.prod(x ** np.array(k), axis=1)
        return out

    def gradient(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        for k, c in self.terms.items():
            for i, e in enumerate(k):
                if e == 0:
                    continue
                kk = np.array(k)
                kk[i] -= 1
                out[:, i] += c * e * np.prod(x ** kk, axis=1)
        return out

    def expectation(self, weights: WeightVector) -> float:
        """Exact Dirichlet expectation from closed-form moments."""
        return sum(c * dirichlet_moment(weights, k) for k, c in self.terms.items())

    def __repr__(self):
        return f"Polynomial({self.name!r})"


def _mono(n_vars, **powers):
    k = [0] * n_vars
    for var, e in powers.items():
        k[int(var[1:]) - 1] = e
    return tuple(k)


def catalog(n_vars: int) -> dict[str, Polynomial]:
    """Named polynomial test functions of total degree <= 3 on ``n_vars`` variables."""
    z = (0,) * n_vars
    polys = {
        "one": Polynomial({z: 1.0}, n_vars),
        "x1": Polynomial({_mono(n_vars, x1=1): 1.0}, n_vars),
        "x1_sq": Polynomial({_mono(n_vars, x1=2): 1.0}, n_vars),
        "x1_cube": Polynomial({_mono(n_vars, x1=3): 1.0}, n_vars),
        "x1x2": Polynomial({_mono(n_vars, x1=1, x2=1): 1.0}, n_vars),
        "x1sq_x2": Polynomial({_mono(n_vars, x1=2, x2=1): 1.0}, n_vars),
        "x2_sq": Polynomial({_mono(n_vars, x2=2): 1.0}, n_vars),
        "mixed": Polynomial(
            {z: 0.5, _mono(n_vars, x1=1): -2.0, _mono(n_vars, x2=2): 3.0, _mono(n_vars, x1=1, x2=2): 1.5},
            n_vars,
        ),
    }
    if n_vars >= 3:
        polys["x1x2x3"] = Polynomial({_mono(n_vars, x1=1, x2=1, x3=1): 1.0}, n_vars)
        polys["x3_sq_x1"] = Polynomial({_mono(n_vars, x1=1, x3=2): 1.0}, n_vars)
    if n_vars >= 4:
        polys["x2x4"] = Polynomial({_mono(n_vars, x2=1, x4=1): -1.0, _mono(n_vars, x4=1): 2.0}, n_vars)
    for name, p in polys.items():
        p.name = name
    return polys


# --------------------------------------------------------------------------
# integration by parts on the simplex

def simplex_quadrature(weights: WeightVector, nodes: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Jacobi rule for the Dirichlet law via stick breaking.

    ``x_j = b_j * prod_{l<j} (1 - b_l)`` with independent
    ``b_j ~ Beta(alpha_j, alpha_{j+1} + ... + alpha_K)``.  Returns points of
    shape ``(nodes**(K-1), K)`` and weights summing to one.
    """
    a = weights.array
    k = len(a)
    if k > 4:
        raise ValueError("tensor quadrature is limited to at most 4 simplex components")
    rules = []
    for j in range(k - 1):
        rest = a[j + 1:].sum()
        t, w = roots_jacobi(nodes, rest - 1.0, a[j] - 1.0)
        rules.append(((1.0 + t) / 2.0, w / w.sum()))
    pts = np.empty((nodes ** (k - 1), k))
    wts = np.empty(nodes ** (k - 1))
    for row, combo in enumerate(itertools.product(range(nodes), repeat=k - 1)):
        left = 1.0
        wt = 1.0
        for j, c in enumerate(combo):
            b, w = rules[j][0][c], rules[j][1][c]
            pts[row, j] = b * left
            left *= 1.0 - b
            wt *= w
        pts[row, k - 1] = left
        wts[row] = wt
    return pts, wts


@dataclass
class IBPResult:
    residual: float
    std_error: float
    lhs: float
    rhs: float
    mode: str


def _ibp_terms(weights: WeightVector, f: Callable, grad: Callable, x: np.ndarray, direction: int):
    a_i = weights.alphas[direction]
    fx = f(x)
    g = grad(x)
    xi = x[:, direction]
    tangential = np.sum(x * g, axis=1) - g[:, direction]
    rhs = (weights.gamma / a_i) * xi * fx + (xi / a_i) * tangential
    return fx, rhs


def ibp_residual(
    weights: WeightVector,
    f: Callable,
    grad: Callable | None = None,
    *,
    direction: int = 0,
    mode: str = "quadrature",
    nodes: int = 24,
    samples: int = 10**6,
    seed: int = 0,
    block_size: int = 1 << 16,
) -> IBPResult:
    """Residual of the Dirichlet integration-by-parts identity

    ``E[f] = (gamma/alpha_i) E[x_i f] + (1/alpha_i) E[x_i (sum_k x_k d_k f - d_i f)]``

    evaluated either by tensor quadrature (``mode="quadrature"``, at most four
    components) or by Monte Carlo (``mode="mc"``) with a per-draw standard
    error.  ``f`` may be a :class:`Polynomial`, in which case ``grad``
    defaults to its exact gradient.
    """
    if grad is None:
        grad = f.gradient
    if mode == "quadrature":
        x, w = simplex_quadrature(weights, nodes)
        lhs_v, rhs_v = _ibp_terms(weights, f, grad, x, direction)
        lhs, rhs = float(w @ lhs_v), float(w @ rhs_v)
        return IBPResult(lhs - rhs, 0.0, lhs, rhs, mode)
    if mode != "mc":
        raise ValueError(f"unknown estimator mode {mode!r}")
    lhs_parts, rhs_parts = [], []
    for b, lo, hi in block_ranges(samples, block_size):
        x = sample_dirichlet(weights, stream(seed, MC_BLOCKS, b), size=hi - lo)
        l, r = _ibp_terms(weights, f, grad, x, direction)
        lhs_parts.append(l)
        rhs_parts.append(r)
    lhs_v = np.concatenate(lhs_parts)
    rhs_v = np.concatenate(rhs_parts)
    diff = lhs_v - rhs_v
    se = float(diff.std(ddof=1) / np.sqrt(samples)) if samples > 1 else float("inf")
    return IBPResult(float(diff.mean()), se, float(lhs_v.mean()), float(rhs_v.mean()), mode)
