"""Killed Green functions on finite domains and homogeneous-walk Green values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .dirichlet import WeightVector, inverse_first_moment, sample_dirichlet, unit_vectors
from .environment import FiniteDomain, Site, homogeneous_table, neighbors, table_array
from .errors import BadStencil, HypothesisFailed, NonConvergent, SingularSystem
from .parallel import ordered_map
from .seeding import ENV_BLOCKS, block_ranges, stream

DERIVATIVE_DELTA_CAP = 1.0 - 1e-9


def neighbor_index(domain: FiniteDomain) -> tuple[np.ndarray, np.ndarray]:
    """``(n, 2d)`` arrays: interior row of each neighbour (-1 if on the
    boundary) and boundary column of each neighbour (-1 if interior)."""
    bidx = domain.boundary_index
    n, nd = len(domain), 2 * domain.dim
    inner = np.full((n, nd), -1, np.int64)
    outer = np.full((n, nd), -1, np.int64)
    for x, site in enumerate(domain.interior):
        for k, nb in enumerate(neighbors(site)):
            if nb in domain.index:
                inner[x, k] = domain.index[nb]
            else:
                outer[x, k] = bidx[nb]
    return inner, outer


def transition_blocks(omega: np.ndarray, domain: FiniteDomain) -> tuple[np.ndarray, np.ndarray]:
    """Interior-to-interior and interior-to-boundary blocks of the killed
    transition matrix.  ``omega`` may carry leading batch axes."""
    inner, outer = neighbor_index(domain)
    n, nb = len(domain), len(domain.boundary)
    batch = omega.shape[:-2]
    uu = np.zeros((*batch, n, n))
    ub = np.zeros((*batch, n, nb))
    rows = np.arange(n)
    for k in range(inner.shape[1]):
        i = inner[:, k] >= 0
        uu[..., rows[i], inner[i, k]] += omega[..., rows[i], k]
        o = ~i
        ub[..., rows[o], outer[o, k]] += omega[..., rows[o], k]
    return uu, ub


@dataclass
class KilledGreenOperator:
    """``values[z, z']`` for interior ``z`` and ``z'`` in interior then boundary
    (columns ordered as ``domain.interior + domain.boundary``)."""

    domain: FiniteDomain
    delta: float
    values: np.ndarray

    def __call__(self, z: Sequence[int], zp: Sequence[int]) -> float:
        z, zp = tuple(z), tuple(zp)
        if z not in self.domain.index:
            return 0.0
        return float(self.values[self.domain.index[z], self.column(zp)])

    def column(self, site: Site) -> int:
        site = tuple(site)
        if site in self.domain.index:
            return self.domain.index[site]
        return len(self.domain) + self.domain.boundary_index[site]

    @property
    def interior_block(self) -> np.ndarray:
        n = len(self.domain)
        return self.values[:, :n]


def _check_delta(delta: float):
    if not 0 < delta <= 1:
        raise ValueError(f"killing rate delta must lie in (0, 1], got {delta}")


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite Green function")
    return x


def killed_green(table, domain: FiniteDomain, delta: float) -> KilledGreenOperator:
    """Full Green operator ``sum_n delta^n Omega_U^n`` on ``domain``.

    Boundary targets count the (discounted) exit step, so ``G(z, b)`` is the
    discounted probability of leaving through ``b``.
    """
    _check_delta(delta)
    omega = table_array(table, domain)
    uu, ub = transition_blocks(omega, domain)
    g = _solve(np.eye(len(domain)) - delta * uu, np.eye(len(domain)))
    return KilledGreenOperator(domain, delta, np.hstack([g, delta * g @ ub]))


def green_killed(table, domain: FiniteDomain, delta: float, source: Sequence[int]) -> np.ndarray:
    """Row ``G(source, .)`` over ``domain.interior + domain.boundary``."""
    _check_delta(delta)
    source = tuple(source)
    if source not in domain.index:
        raise ValueError(f"source {source} is not an interior site")
    omega = table_array(table, domain)
    uu, ub = transition_blocks(omega, domain)
    e = np.zeros(len(domain))
    e[domain.index[source]] = 1.0
    row = _solve((np.eye(len(domain)) - delta * uu).T, e)
    return np.concatenate([row, delta * row @ ub])


def return_identity_residual(op: KilledGreenOperator, table) -> np.ndarray:
    """Per interior ``z``: ``delta * sum_k omega(z, z+e_k) G(z+e_k, z) - (G(z, z) - 1)``."""
    omega = table_array(table, op.domain)
    inner, _ = neighbor_index(op.domain)
    g = op.interior_block
    n = len(op.domain)
    out = np.empty(n)
    for z in range(n):
        acc = 0.0
        for k in range(inner.shape[1]):
            y = inner[z, k]
            if y >= 0:
                acc += omega[z, k] * g[y, z]
        out[z] = op.delta * acc - (g[z, z] - 1.0)
    return out


def green_derivative_check(table, domain: FiniteDomain, delta: float, x1, x2, x3, x4,
                           h: float = 1e-6) -> tuple[float, float]:
    """Analytic ``dG(x1, x4) / d omega(x2, x3) = delta G(x1, x2) G(x3, x4)``
    against a central difference in the single, unconstrained entry
    ``omega(x2, x3)``."""
    x1, x2, x3, x4 = (tuple(int(c) for c in x) for x in (x1, x2, x3, x4))
    for name, x in (("x1", x1), ("x2", x2), ("x4", x4)):
        if x not in domain.index:
            raise BadStencil(f"{name}={x} must be an interior site")
    if int(np.abs(np.subtract(x3, x2)).sum()) != 1:
        raise BadStencil(f"x3={x3} is not a neighbour of x2={x2}")
    delta = min(delta, DERIVATIVE_DELTA_CAP)
    _check_delta(delta)

    omega = table_array(table, domain)
    uu, _ = transition_blocks(omega, domain)
    n = len(domain)
    i1, i2, i4 = domain.index[x1], domain.index[x2], domain.index[x4]
    g = _solve(np.eye(n) - delta * uu, np.eye(n))
    if x3 not in domain.index:
        # Omega(x2, x3) only feeds the exit column; interior entries ignore it
        return 0.0, 0.0
    i3 = domain.index[x3]
    analytic = delta * g[i1, i2] * g[i3, i4]

    x0 = g[:, i4]

    def increment(eps):
        # G_eps(., x4) - G(., x4), solved directly so the common part never cancels
        m = uu.copy()
        m[i2, i3] += eps
        rhs = np.zeros(n)
        rhs[i2] = delta * eps * x0[i3]
        return _solve(np.eye(n) - delta * m, rhs)[i1]

    numeric = (increment(h) - increment(-h)) / (2 * h)
    return float(analytic), float(numeric)


# --------------------------------------------------------------------------
# homogeneous walk

@dataclass(frozen=True)
class HomogeneousKernel:
    m: np.ndarray
    drift: np.ndarray
    k_m: float
    eta_m: float
    s: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.m) // 2

    @property
    def coupling(self) -> np.ndarray:
        """``2 sqrt(m_{e_i} m_{-e_i})`` per axis; these sum to ``k_m``."""
        d = self.dim
        return 2.0 * np.sqrt(self.m[:d] * self.m[d:])

    def phi(self, site: Sequence[int]) -> float:
        """Symmetrising weight ``prod_i (m_{e_i} / m_{-e_i})^{z_i / 2}``."""
        d = self.dim
        ratio = np.sqrt(self.m[:d] / self.m[d:])
        return float(np.prod(ratio ** np.asarray(site, dtype=float)))


def homogeneous_stats(weights: WeightVector | Sequence[float]) -> HomogeneousKernel:
    """Mean-environment quantities.  Accepts weights or a mean vector; only
    the ratios matter."""
    a = weights.array if isinstance(weights, WeightVector) else np.asarray(weights, dtype=float)
    if a.ndim != 1 or len(a) % 2 or np.any(a <= 0):
        raise ValueError("need 2d positive entries")
    m = a / a.sum()
    d = len(m) // 2
    drift = m[:d] - m[d:]
    geo = np.sqrt(m[:d] * m[d:])
    k_m = float(min(2.0 * geo.sum(), 1.0))
    s = np.concatenate([geo, geo]) / (2.0 * geo.sum())
    ratios = np.sqrt(np.concatenate([m[:d] / m[d:], m[d:] / m[:d]]))
    eta = float(ratios.max() / (1.0 - k_m)) if k_m < 1 else float("inf")
    return HomogeneousKernel(m, drift, k_m, eta, s)


def _trapezoid_mean(coupling: np.ndarray, nodes: int, shift: float) -> float:
    theta = 2.0 * np.pi * (np.arange(nodes) + shift) / nodes
    cos = np.cos(theta)
    d = len(coupling)
    if d == 1:
        return float(np.mean(1.0 / (1.0 - coupling[0] * cos)))
    inner = coupling[-2] * cos[:, None] + coupling[-1] * cos[None, :]
    if d == 2:
        return float(np.mean(1.0 / (1.0 - inner)))
    # higher axes: loop over outer tensor factors to bound memory
    total = 0.0
    outer = np.array(np.meshgrid(*([cos] * (d - 2)), indexing="ij")).reshape(d - 2, -1).T
    for c in outer:
        total += np.mean(1.0 / (1.0 - coupling[: d - 2] @ c - inner))
    return float(total / len(outer))


def green_fourier_origin(kernel: HomogeneousKernel, tol: float = 1e-12, start_nodes: int = 64,
                         max_points: int = 1 << 28) -> float:
    """``G^m(0, 0) = (2 pi)^-d int d theta / (1 - sum_i c_i cos theta_i)`` by the
    periodic trapezoid rule, doubling nodes per axis until two successive
    values differ by less than ``tol``."""
    d = kernel.dim
    if kernel.k_m >= 1.0 and d <= 2:
        raise NonConvergent("the homogeneous walk is recurrent (k_m = 1) in d <= 2")
    coupling = kernel.coupling
    # k_m == 1 (d >= 3): keep theta = 0 off the grid
    shift = 0.5 if kernel.k_m >= 1.0 else 0.0
    nodes = start_nodes
    prev = _trapezoid_mean(coupling, nodes, shift)
    while True:
        nodes *= 2
        if nodes ** d > max_points:
            raise NonConvergent(f"quadrature did not settle to {tol:g} within {max_points} points")
        cur = _trapezoid_mean(coupling, nodes, shift)
        if abs(cur - prev) < tol:
            return cur
        prev = cur


@dataclass
class SeriesValue:
    value: float
    tail_bound: float
    horizon: int


def default_horizon(k_m: float, tol: float = 1e-10) -> int:
    """Smallest ``n`` with ``k_m**n / (1 - k_m) < tol``."""
    if k_m <= 0:
        return 0
    n = int(np.ceil(np.log(tol * (1.0 - k_m)) / np.log(k_m)))
    while k_m ** n / (1.0 - k_m) >= tol:
        n += 1
    while n > 0 and k_m ** (n - 1) / (1.0 - k_m) < tol:
        n -= 1
    return max(n, 0)


def _axis_return(p: float, horizon: int) -> np.ndarray:
    """P(one-dimensional walk with up-probability p is at 0 after j steps)."""
    j = np.arange(horizon + 1)
    out = np.zeros(horizon + 1)
    even = j[j % 2 == 0]
    half = even // 2
    logp = gammaln(even + 1) - 2 * gammaln(half + 1) + half * (np.log(p) + np.log1p(-p))
    out[even] = np.exp(logp)
    return out


def _log_binom_table(horizon: int, b: float) -> np.ndarray:
    """``[j, l] -> log C(j, l) b^l (1-b)^(j-l)`` (``-inf`` above the diagonal)."""
    j = np.arange(horizon + 1)[:, None]
    l = np.arange(horizon + 1)[None, :]
    with np.errstate(invalid="ignore"):
        out = gammaln(j + 1) - gammaln(l + 1) - gammaln(np.maximum(j - l, 0) + 1)
        out = out + l * np.log(b) + (j - l) * np.log1p(-b)
    out[l > j] = -np.inf
    return out


def green_series_origin(kernel: HomogeneousKernel, horizon: int | None = None) -> SeriesValue:
    """``sum_{n <= horizon} P^m(X_n = 0)`` computed exactly, plus the rigorous
    tail radius ``k_m**horizon / (1 - k_m)``.

    ``P^m(X_n = 0)`` is built axis by axis: the number of steps spent on the
    first axis is binomial, the first-axis walk must return on its own, and
    the remaining axes are handled recursively.
    """
    if kernel.k_m >= 1.0:
        raise NonConvergent("series oracle needs k_m < 1")
    if horizon is None:
        horizon = default_horizon(kernel.k_m)
    d = kernel.dim
    m = kernel.m
    rate = m[:d] + m[d:]
    up = m[:d] / rate
    ret = _axis_return(up[d - 1], horizon)
    for i in range(d - 2, -1, -1):
        b = rate[i] / rate[i:].sum()
        axis = _axis_return(up[i], horizon)
        logw = _log_binom_table(horizon, b)
        w = np.exp(logw)
        # R[j] = sum_l w[j, l] axis[l] ret[j - l]
        jl = np.arange(horizon + 1)[:, None] - np.arange(horizon + 1)[None, :]
        rest = np.where(jl >= 0, ret[np.clip(jl, 0, horizon)], 0.0)
        ret = np.sum(w * axis[None, :] * rest, axis=1)
    tail = kernel.k_m ** horizon / (1.0 - kernel.k_m)
    return SeriesValue(float(ret.sum()), float(tail), int(horizon))


def symmetrize_check(kernel: HomogeneousKernel, delta: float, box: FiniteDomain) -> float:
    """Max entrywise gap between the killed drifted Green function on ``box``
    and its conjugate ``phi(x)^-1 G^s_{delta k_m}(x, y) phi(y)``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    n = len(box)
    g_m = killed_green(homogeneous_table(box, kernel.m), box, delta).interior_block
    sym_uu, _ = transition_blocks(homogeneous_table(box, kernel.s), box)
    g_s = _solve(np.eye(n) - delta * kernel.k_m * sym_uu, np.eye(n))
    phi = np.array([kernel.phi(x) for x in box.interior])
    conj = g_s * phi[None, :] / phi[:, None]
    return float(np.max(np.abs(g_m - conj))) if n else 0.0


# --------------------------------------------------------------------------
# batched solves over sampled environments

def sampled_green_rows(weights: WeightVector, domain: FiniteDomain, delta: float, source: Site,
                       samples: int, seed: int, block_size: int = 512,
                       workers: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Environments and Green rows ``G(source, .)`` (interior columns) for
    ``samples`` independent environments on ``domain``.

    Block ``b`` of environments is drawn from the stream ``(seed, b)``.
    Returns ``(omega, rows)`` with shapes ``(S, n, 2d)`` and ``(S, n)``.
    """
    _check_delta(delta)
    n = len(domain)
    src = domain.index[tuple(source)]

    def block(spec):
        b, lo, hi = spec
        omega = sample_dirichlet(weights, stream(seed, ENV_BLOCKS, b), size=(hi - lo, n))
        uu, _ = transition_blocks(omega, domain)
        a = np.eye(n)[None] - delta * uu
        rhs = np.zeros((hi - lo, n, 1))
        rhs[:, src, 0] = 1.0
        rows = _solve(np.swapaxes(a, 1, 2), rhs)[..., 0]
        return omega, rows

    parts = ordered_map(block, block_ranges(samples, block_size), workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def distance_to_boundary(domain: FiniteDomain, z0: Site, direction: int) -> int:
    """Least ``N >= 1`` with ``z0 + N e_direction`` outside the interior."""
    step = unit_vectors(domain.dim)[direction]
    pos = np.array(z0, dtype=np.int64)
    n = 0
    while tuple(int(c) for c in pos) in domain.index:
        pos = pos + step
        n += 1
    return n


@dataclass
class GreenReturnEstimate:
    mean: float
    std_error: float
    samples: int
    bound: float | None = None
    direction: int | None = None
    distance: int | None = None


def mean_green_return(weights: WeightVector, domain: FiniteDomain, z0: Site, samples: int, seed: int,
                      workers: int | None = None) -> GreenReturnEstimate:
    """Monte Carlo ``E_mu[G_U(z0, z0)]`` (no killing) with the bound
    ``(E[1/x_i])**N`` from forcing a straight escape along a direction with
    ``alpha_i > 1``; the tightest such direction is reported."""
    z0 = tuple(z0)
    if z0 not in domain.index:
        raise ValueError(f"z0={z0} is not interior")
    _, rows = sampled_green_rows(weights, domain, 1.0, z0, samples, seed, workers=workers)
    g = rows[:, domain.index[z0]]
    se = float(g.std(ddof=1) / np.sqrt(samples)) if samples > 1 else float("inf")
    est = GreenReturnEstimate(float(g.mean()), se, samples)
    candidates = []
    for i, a in enumerate(weights.alphas):
        if a > 1:
            n = distance_to_boundary(domain, z0, i)
            candidates.append((inverse_first_moment(weights, i) ** n, i, n))
    if not candidates:
        raise HypothesisFailed("no alpha_i > 1: integrability bound unavailable", estimate=est)
    est.bound, est.direction, est.distance = min(candidates)
    return est
