"""Kalikow's auxiliary kernel, its drift bounds, and the low-disorder velocity
expansion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirichlet import WeightVector
from .environment import FiniteDomain, Site
from .errors import DegenerateNormalizer, WrongDimension, WrongRegime
from .green import green_fourier_origin, homogeneous_stats, sampled_green_rows
from .walks import Interval, exact_velocity_1d, theorem1_bounds, theorem1_condition


@dataclass
class AuxiliaryKernel:
    """Ratio estimates of ``E[G(z0, z) omega(z, z+e_i)] / E[G(z0, z)]``.

    ``values`` and ``std_error`` are ``(n_interior, 2d)`` in domain order;
    ``drift`` / ``drift_se`` are the per-site local drift and its error.
    """

    domain: FiniteDomain
    delta: float
    z0: Site
    values: np.ndarray
    std_error: np.ndarray
    drift: np.ndarray
    drift_se: np.ndarray
    samples: int

    def estimate(self, site: Site, direction: int) -> tuple[float, float]:
        x = self.domain.index[tuple(site)]
        return float(self.values[x, direction]), float(self.std_error[x, direction])

    def row_sum_deviation(self) -> np.ndarray:
        return np.abs(self.values.sum(axis=1) - 1.0)


def _ratio(num: np.ndarray, den: np.ndarray, control: np.ndarray, control_mean: np.ndarray):
    """Ratio of sample means ``mean(num) / mean(den)`` corrected by a control
    variate with known mean, plus its delta-method standard error.

    With ``num = den * control`` the corrected estimate equals
    ``control_mean + cov(den, control) / mean(den)``: the known part is exact
    and only the covariance is left to Monte Carlo.
    """
    s = den.shape[0]
    extra = num.ndim - den.ndim
    d = den.reshape(den.shape + (1,) * extra)
    dbar = d.mean(axis=0)
    r = num.mean(axis=0) / dbar
    influence = (num - r * d) / dbar - control
    r = r - (control.mean(axis=0) - control_mean)
    se = influence.std(axis=0, ddof=1) / np.sqrt(s)
    return r, se


def estimate_kalikow(weights: WeightVector, domain: FiniteDomain, delta: float, z0: Site,
                     samples: int, seed: int, workers: int | None = None) -> AuxiliaryKernel:
    """Estimate the auxiliary kernel on ``domain`` from ``samples`` sampled
    environments.

    Numerator and denominator share the same draws, and the known mean of
    ``omega(z, .)`` is used as a control variate, so a Green weight that does
    not depend on the environment reproduces the mean transitions exactly.
    """
    if not 0 < delta < 1:
        raise ValueError("Kalikow kernels are estimated for delta in (0, 1)")
    if samples < 2:
        raise ValueError("need at least two environment samples")
    z0 = tuple(z0)
    if z0 not in domain.index:
        raise ValueError(f"z0={z0} is not interior")
    omega, g = sampled_green_rows(weights, domain, delta, z0, samples, seed, workers=workers)
    m = weights.mean
    values, se = _ratio(g[..., None] * omega, g, omega, m)
    d = weights.dim
    step = omega[..., :d] - omega[..., d:]
    drift, drift_se = _ratio(g[..., None] * step, g, step, m[:d] - m[d:])
    return AuxiliaryKernel(domain, delta, z0, values, se, drift, drift_se, samples)


def prop2_bounds(weights: WeightVector) -> list[Interval]:
    """Interval for each auxiliary transition ``hat-omega(z, z+e_i)``, clipped to [0, 1].

    ``sum(alphas) > 1``: ``[(a_i - 1), a_i] / (sum - 1)``;
    ``sum(alphas) < 1``: ``[0, (a_i - 1) / (sum - 1)]``.  Intervals that
    clip to all of [0, 1] are flagged ``vacuous``.
    """
    norm = weights.gamma - 1.0
    if norm == 0:
        raise DegenerateNormalizer("sum(alphas) = 1")
    out = []
    for a in weights.alphas:
        lo, hi = ((a - 1) / norm, a / norm) if norm > 0 else (0.0, (a - 1) / norm)
        lo, hi = max(lo, 0.0), min(hi, 1.0)
        out.append(Interval(lo, hi, lo <= 0.0 and hi >= 1.0))
    return out


def kalikow_drift(kernel: AuxiliaryKernel, site: Site) -> tuple[np.ndarray, np.ndarray]:
    x = kernel.domain.index[tuple(site)]
    return kernel.drift[x].copy(), kernel.drift_se[x].copy()


@dataclass
class DriftBox:
    intervals: list[Interval]
    excludes_zero: bool


def theorem1_drift_box(weights: WeightVector) -> DriftBox:
    """Box ``prod_i [a_+ - a_- - 1, a_+ - a_- + 1] / (sum - 1)`` containing the
    auxiliary drift, and whether it stays away from the origin."""
    box = theorem1_bounds(weights)
    excludes = any(iv.low > 0 or iv.high < 0 for iv in box)
    return DriftBox(box, excludes)


@dataclass
class ExpansionReport:
    gamma: float
    d_m: np.ndarray
    green_origin: float
    expansion: np.ndarray
    error_bound: float
    precondition_ok: bool
    k_m: float = float("nan")
    eta_m: float = float("nan")
    theorem1: bool = False
    bound_ratio: float = float("nan")


def expansion_velocity(weights: WeightVector) -> ExpansionReport:
    """Low-disorder velocity center ``d_m (1 - (G^m(0,0) - 1)/(gamma - 1))``
    with error radius ``16 (d/gamma)^2 eta_m^2 / (1 - 2 d eta_m / gamma)``.

    The radius is only valid when ``2 d eta_m / gamma < 1`` and the walk is in
    the ballistic regime; otherwise ``precondition_ok`` is False and the
    radius is reported as ``inf``.
    """
    kern = homogeneous_stats(weights)
    gamma = weights.gamma
    d = weights.dim
    g0 = green_fourier_origin(kern)
    center = kern.drift * (1.0 - (g0 - 1.0) / (gamma - 1.0))
    ratio = 2.0 * d * kern.eta_m / gamma
    t1 = theorem1_condition(weights)
    ok = bool(t1 and ratio < 1.0)
    bound = 16.0 * (d / gamma) ** 2 * kern.eta_m ** 2 / (1.0 - ratio) if ok else float("inf")
    return ExpansionReport(gamma, kern.drift, g0, center, bound, ok, kern.k_m, kern.eta_m, t1, ratio)


def expansion_consistency_1d(weights: WeightVector) -> float:
    """``|center - exact velocity|`` in d = 1, with ``G^m(0,0) = 1/|m_+ - m_-|``."""
    if weights.dim != 1:
        raise WrongDimension("consistency check is one-dimensional")
    plus, minus = weights.alphas
    if not (plus > 1 + minus or minus > 1 + plus):
        raise WrongRegime(f"alphas {weights.alphas} are not in the ballistic regime")
    gamma = weights.gamma
    drift = (plus - minus) / gamma
    g0 = 1.0 / abs(drift)
    center = drift * (1.0 - (g0 - 1.0) / (gamma - 1.0))
    return abs(center - exact_velocity_1d(weights))
