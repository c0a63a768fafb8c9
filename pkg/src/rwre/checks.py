"""The verification suite: one function per acceptance criterion.

Each check returns an :class:`~rwre.records.Outcome` whose verdicts are plain
containment tests over its metrics.  ``quick`` scale shrinks sample sizes
for smoke runs; tolerances never change with scale.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dirichlet import WeightVector, catalog, ibp_residual
from .environment import EnvironmentView, materialize, make_box, neighbors, random_cluster, segment
from .green import (
    green_derivative_check,
    green_fourier_origin,
    green_killed,
    green_series_origin,
    homogeneous_stats,
    killed_green,
    mean_green_return,
    return_identity_residual,
    symmetrize_check,
)
from .kalikow import estimate_kalikow, expansion_consistency_1d, expansion_velocity, prop2_bounds
from .records import Outcome
from .walks import (
    annealed_path_logprob,
    enumerate_paths,
    estimate_velocity,
    exact_velocity_1d,
    path_from_directions,
    reinforced_batch,
    sequential_path_logprob,
    theorem1_bounds,
)
from .seeding import stream

SIGMAS = 3.0

SCALES = {
    "full": dict(vel_steps=10**5, vel_runs=200, eq_runs=10**6, ibp_samples=10**6, k_samples=10**4,
                 g_samples=10**4, p3_steps=10**5, p3_runs=400),
    "quick": dict(vel_steps=10**4, vel_runs=50, eq_runs=10**5, ibp_samples=10**5, k_samples=2000,
                  g_samples=2000, p3_steps=10**4, p3_runs=50),
}


def _rng(seed: int, tag: int) -> np.random.Generator:
    """Instance generator for a check (separate from the simulation streams)."""
    return stream(seed, 0xC4EC, tag)


# --------------------------------------------------------------------------

def check_exact_velocity(steps=10**5, runs=200, seed=7, workers=None) -> Outcome:
    """1-d walk with alphas (3, 1): mean X_n/n against the exact speed 1/3."""
    w = WeightVector((3.0, 1.0))
    est = estimate_velocity(w, steps, runs, seed, workers)
    exact = exact_velocity_1d(w)
    box = theorem1_bounds(w)[0]
    out = Outcome(data={"velocity": est})
    out.metric("v_1", est.mean_velocity[0], est.std_error[0], box.low, box.high)
    out.metric("exact_v_1", exact, 0.0, exact, exact)
    out.verdict("exact_velocity", "exact_1d_velocity", [("v_1", exact, exact)], SIGMAS)
    out.verdict("theorem1", "theorem1", [("v_1", box.low, box.high)], SIGMAS)
    return out


def _chi2_pvalue(observed: np.ndarray, probs: np.ndarray, runs: int, min_expected: float = 5.0):
    expected = runs * probs
    small = expected < min_expected
    obs = np.append(observed[~small], observed[small].sum())
    exp = np.append(expected[~small], expected[small].sum())
    if not small.any():
        obs, exp = obs[:-1], exp[:-1]
    exp = exp * obs.sum() / exp.sum()
    return float(stats.chisquare(obs, exp).pvalue), len(obs)


def check_path_law(dim=2, steps=4, runs=10**6, n_random=1000, random_len=12, seed=11, workers=None) -> Outcome:
    """Exact annealed path law: normalisation, sampler chi-square, oracle agreement."""
    rng = _rng(seed, 2)
    w = WeightVector(tuple(rng.uniform(0.5, 3.0, 2 * dim)))
    dirs = enumerate_paths(dim, steps)
    logp = np.array([annealed_path_logprob(w, path_from_directions(d, dim)) for d in dirs])
    probs = np.exp(logp)
    out = Outcome()
    out.metric("total_probability", probs.sum(), 0.0, 1 - 1e-10, 1 + 1e-10)

    sample = reinforced_batch(w, steps, runs, seed, workers=workers).astype(np.int64)
    codes = sample @ ((2 * dim) ** np.arange(steps - 1, -1, -1))
    observed = np.bincount(codes, minlength=len(probs)).astype(float)
    pvalue, cells = _chi2_pvalue(observed, probs, runs)
    out.metric("chi2_pvalue", pvalue, 0.0, 0.01, 1.0)
    out.metric("chi2_cells", cells, 0.0, 2, np.inf)

    worst = 0.0
    for _ in range(n_random):
        wr = WeightVector(tuple(rng.uniform(0.1, 5.0, 2 * dim)))
        path = path_from_directions(rng.integers(0, 2 * dim, random_len), dim)
        worst = max(worst, abs(annealed_path_logprob(wr, path) - sequential_path_logprob(wr, path)))
    out.metric("max_logprob_gap", worst, 0.0, 0.0, 1e-12)
    out.verdict("path_law", "path_law", [("total_probability", 1 - 1e-10, 1 + 1e-10),
                                         ("chi2_pvalue", 0.01, 1.0),
                                         ("max_logprob_gap", 0.0, 1e-12)])
    return out


def check_ibp(n_weights=10, samples=10**6, seed=13, quad_tol=1e-10) -> Outcome:
    """Integration-by-parts identity: exact quadrature for 2 components, Monte
    Carlo for 4 components."""
    rng = _rng(seed, 3)
    out = Outcome()
    worst = 0.0
    for j in range(n_weights):
        w = WeightVector(tuple(rng.uniform(0.3, 5.0, 2)))
        for name, f in catalog(2).items():
            for direction in range(2):
                worst = max(worst, abs(ibp_residual(w, f, direction=direction).residual))
    out.metric("quad_max_abs_residual", worst, 0.0, 0.0, quad_tol)
    out.verdict("ibp_quadrature", "integration_by_parts", [("quad_max_abs_residual", 0.0, quad_tol)])

    for j in range(n_weights):
        w = WeightVector(tuple(rng.uniform(0.3, 5.0, 4)))
        for name, f in catalog(4).items():
            r = ibp_residual(w, f, mode="mc", samples=samples, seed=seed + j)
            out.metric(f"mc[{j}]:{name}", r.residual, r.std_error, 0.0, 0.0)
    z = [abs(m.value) / m.sigma for m in out.metrics if m.name.startswith("mc[") and m.sigma > 0]
    # informational: with ~100 calibrated tests, 3-sigma exceedances are Binomial(n, 0.0027)
    out.metric("mc_tests", len(z))
    out.metric("mc_exceedances_3sigma", sum(v > SIGMAS for v in z))
    out.metric("mc_max_abs_z", max(z, default=0.0))
    out.contained("mc[", "ibp_mc", "integration_by_parts", SIGMAS)
    return out


def _random_green_instance(rng, deltas=(0.5, 0.9)):
    dim = int(rng.integers(1, 3))
    if dim == 1:
        lo = int(rng.integers(-3, 1))
        domain = segment(lo, lo + int(rng.integers(1, 8)))
    elif rng.random() < 0.5:
        domain = make_box((0, 0), int(rng.integers(1, 3)))
    else:
        domain = random_cluster(2, int(rng.integers(2, 20)), rng)
    w = WeightVector(tuple(rng.uniform(0.3, 4.0, 2 * dim)))
    view = EnvironmentView(int(rng.integers(1 << 62)), w)
    delta = float(deltas[rng.integers(len(deltas))])
    return domain, materialize(view, domain), delta


def check_green_derivative(n_instances=50, seed=17, rel_tol=1e-6) -> Outcome:
    """Green derivative identity against central differences."""
    rng = _rng(seed, 4)
    out = Outcome()
    for j in range(n_instances):
        domain, table, delta = _random_green_instance(rng)
        sites = domain.interior
        x1 = sites[rng.integers(len(sites))]
        x4 = sites[rng.integers(len(sites))]
        # x2 must have an interior neighbour for a non-trivial stencil
        candidates = [s for s in sites if any(nb in domain for nb in neighbors(s))]
        x2 = candidates[rng.integers(len(candidates))]
        inner = [nb for nb in neighbors(x2) if nb in domain]
        x3 = inner[rng.integers(len(inner))]
        a, n = green_derivative_check(table, domain, delta, x1, x2, x3, x4)
        out.metric(f"rel_err[{j}]", abs(a - n) / abs(a), 0.0, 0.0, rel_tol)
        edge = [(s, nb) for s in sites for nb in neighbors(s) if nb not in domain]
        s, b = edge[rng.integers(len(edge))]
        a0, n0 = green_derivative_check(table, domain, delta, x1, s, b, x4)
        out.metric(f"boundary_target[{j}]", max(abs(a0), abs(n0)), 0.0, 0.0, 0.0)
    out.contained("rel_err", "green_derivative", "green_derivative")
    out.contained("boundary_target", "derivative_boundary", "green_derivative")
    return out


def check_green_identities(n_instances=50, seed=19) -> Outcome:
    """Return identity on solved instances and the 2-site closed form."""
    rng = _rng(seed, 5)
    out = Outcome()
    worst = 0.0
    worst_row = 0.0
    min_diag = np.inf
    min_entry = np.inf
    for j in range(n_instances):
        domain, table, delta = _random_green_instance(rng, deltas=(0.5, 0.9, 1.0))
        op = killed_green(table, domain, delta)
        worst = max(worst, float(np.abs(return_identity_residual(op, table)).max()))
        src = domain.interior[rng.integers(len(domain))]
        row = green_killed(table, domain, delta, src)
        worst_row = max(worst_row, float(np.abs(row - op.values[domain.index[src]]).max()))
        min_diag = min(min_diag, float(np.diag(op.interior_block).min()))
        min_entry = min(min_entry, float(op.values.min()))
    out.metric("return_identity_max_residual", worst, 0.0, 0.0, 1e-10)
    out.metric("row_vs_operator_max_gap", worst_row, 0.0, 0.0, 1e-10)
    out.metric("min_diagonal", min_diag, 0.0, 1.0 - 1e-12, np.inf)
    out.metric("min_entry", min_entry, 0.0, 0.0, np.inf)

    gap = 0.0
    for j in range(20):
        p, q = rng.uniform(0.01, 0.99, 2)
        delta = float(rng.uniform(0.05, 1.0))
        table = np.array([[p, 1 - p], [1 - q, q]])
        g = green_killed(table, segment(0, 1), delta, (0,))[0]
        gap = max(gap, abs(g - 1.0 / (1.0 - delta ** 2 * p * q)))
    out.metric("two_site_closed_form_gap", gap, 0.0, 0.0, 1e-12)
    out.contained("", "green_identities", "return_identity")
    return out


def random_mean(rng, dim: int, k_max: float = 0.95) -> np.ndarray:
    while True:
        m = rng.dirichlet(np.ones(2 * dim))
        if m.min() > 1e-3 and homogeneous_stats(m).k_m <= k_max:
            return m


def check_fourier_series(n_kernels=20, seed=23) -> Outcome:
    """Periodic quadrature of G^m(0,0) against the exact return-probability series."""
    rng = _rng(seed, 6)
    out = Outcome()
    for j in range(n_kernels):
        dim = int(rng.integers(1, 4))
        kern = homogeneous_stats(random_mean(rng, dim))
        f = green_fourier_origin(kern)
        s = green_series_origin(kern)
        out.metric(f"fourier_vs_series[{j}]", abs(f - s.value), 0.0, 0.0, s.tail_bound + 1e-8)
    for m in ((0.75, 0.25), (0.9, 0.1), (0.3, 0.7)):
        kern = homogeneous_stats(m)
        exact = 1.0 / abs(m[0] - m[1])
        out.metric(f"closed_form_1d{m}", abs(green_fourier_origin(kern) - exact), 0.0, 0.0, 1e-10)
    out.contained("fourier_vs_series", "fourier_series", "fourier_closed_form")
    out.contained("closed_form_1d", "fourier_closed_form", "fourier_closed_form")
    return out


def check_symmetrization(seed=29) -> Outcome:
    """Conjugation of the drifted Green function to the killed symmetric one."""
    rng = _rng(seed, 7)
    out = Outcome()
    means = [((0.75, 0.25), 10), ((0.4, 0.2, 0.2, 0.2), 5),
             (tuple(random_mean(rng, 1)), 10), (tuple(random_mean(rng, 2)), 5)]
    for m, radius in means:
        kern = homogeneous_stats(m)
        box = make_box((0,) * kern.dim, radius)
        for delta in (0.8, 0.9):
            dev = symmetrize_check(kern, delta, box)
            out.metric(f"deviation[d={kern.dim},m={np.round(m, 4).tolist()},delta={delta}]", dev, 0.0, 0.0, 1e-10)
    out.contained("deviation", "symmetrisation", "symmetrisation")
    return out


def random_kalikow_instance(rng):
    dim = int(rng.integers(1, 3))
    while True:
        w = WeightVector(tuple(rng.uniform(0.2, 4.0, 2 * dim)))
        if w.gamma > 1.05:
            break
    if dim == 1:
        lo = -int(rng.integers(0, 15))
        domain = segment(lo, lo + int(rng.integers(0, 30)))
    else:
        domain = random_cluster(2, int(rng.integers(1, 31)), rng)
    delta = float((0.5, 0.9)[rng.integers(2)])
    z0 = domain.interior[rng.integers(len(domain))]
    return w, domain, delta, z0


def check_kernel_bounds(n_instances=10, samples=10**4, seed=31, workers=None) -> Outcome:
    """Kalikow estimates inside the auxiliary-transition intervals."""
    rng = _rng(seed, 8)
    out = Outcome()
    kernels = []
    for j in range(n_instances):
        w, domain, delta, z0 = random_kalikow_instance(rng)
        kern = estimate_kalikow(w, domain, delta, z0, samples, seed + j, workers)
        kernels.append(kern)
        bounds = prop2_bounds(w)
        for x, site in enumerate(domain.interior):
            for i, iv in enumerate(bounds):
                out.metric(f"w[{j}]{site}:{i}", kern.values[x, i], kern.std_error[x, i], iv.low, iv.high)
        out.metric(f"rowsum[{j}]", kern.row_sum_deviation().max(), 0.0, 0.0, 1e-10)
    out.contained("w[", "prop2", "prop2", SIGMAS)
    out.contained("rowsum", "kalikow_rowsum", "kernel_normalisation")
    out.data["kernels"] = kernels
    return out


def check_green_integrability(samples=10**4, seed=37, workers=None) -> Outcome:
    """E[G_U(0,0)] on the segment {0..4} with alphas (3, 1) against (3/2)^5."""
    w = WeightVector((3.0, 1.0))
    est = mean_green_return(w, segment(0, 4), (0,), samples, seed, workers)
    out = Outcome()
    out.metric("mean_green_return", est.mean, est.std_error, 1.0, est.bound)
    out.metric("integrability_bound", est.bound, 0.0, 7.59375 - 1e-12, 7.59375 + 1e-12)
    out.verdict("green_integrability", "green_integrability", [("mean_green_return", 1.0, est.bound)], SIGMAS)
    out.verdict("integrability_bound_value", "green_integrability", [("integrability_bound", 7.59375 - 1e-12, 7.59375 + 1e-12)])
    return out


def check_expansion_1d(n_weights=20, seed=41) -> Outcome:
    rng = _rng(seed, 9)
    out = Outcome()
    for j in range(n_weights):
        minus = float(rng.uniform(0.1, 10.0))
        plus = minus + 1.0 + float(rng.uniform(0.01, 10.0))
        w = WeightVector((plus, minus) if rng.random() < 0.5 else (minus, plus))
        out.metric(f"consistency[{j}]", expansion_consistency_1d(w), 0.0, 0.0, 1e-12)
    out.contained("consistency", "expansion_1d", "prop3")
    return out


def check_expansion_2d(steps=10**5, runs=400, seed=43, gamma=400.0, mean=(0.4, 0.2, 0.2, 0.2), workers=None) -> Outcome:
    """Empirical velocity at low disorder against the expansion center +- its radius."""
    w = WeightVector.from_mean(mean, gamma)
    rep = expansion_velocity(w)
    est = estimate_velocity(w, steps, runs, seed, workers)
    out = Outcome(data={"velocity": est, "expansion": rep})
    out.metric("precondition_ok", float(rep.precondition_ok), 0.0, 1.0, 1.0)
    out.metric("error_bound", rep.error_bound, 0.0, 0.0, np.inf)
    out.metric("green_origin", rep.green_origin, 0.0, 1.0, np.inf)
    checks = []
    for i in range(w.dim):
        c = rep.expansion[i]
        out.metric(f"center_{i + 1}", c, 0.0, c - rep.error_bound, c + rep.error_bound)
        out.metric(f"v_{i + 1}", est.mean_velocity[i], est.std_error[i], c - rep.error_bound, c + rep.error_bound)
        checks.append((f"v_{i + 1}", c - rep.error_bound, c + rep.error_bound))
    out.verdict("prop3", "prop3", checks, SIGMAS)
    out.verdict("prop3_precondition", "prop3", [("precondition_ok", 1.0, 1.0)])
    return out


def _fingerprint(outcome: Outcome) -> bytes:
    parts = [repr((m.name, m.value, m.sigma)).encode() for m in outcome.metrics]
    return b"\n".join(parts)


def check_determinism(scale="full", seed=0, worker_counts=(1, 2, 8)) -> Outcome:
    """Criteria 1, 8 and 11 give byte-identical numbers for any worker count."""
    p = SCALES[scale]
    runs = {
        "velocity": lambda wk: check_exact_velocity(p["vel_steps"], p["vel_runs"], 7 + seed, wk),
        "prop2": lambda wk: check_kernel_bounds(10, p["k_samples"], 31 + seed, wk),
        "prop3": lambda wk: check_expansion_2d(p["p3_steps"], p["p3_runs"], 43 + seed, workers=wk),
    }
    out = Outcome()
    for name, fn in runs.items():
        prints = [_fingerprint(fn(wk)) for wk in worker_counts]
        mismatches = sum(pr != prints[0] for pr in prints[1:])
        out.metric(f"mismatches[{name}]", mismatches, 0.0, 0.0, 0.0)
    out.contained("mismatches", "determinism", "seeding_contract")
    return out


@dataclass
class CheckRun:
    criterion: int
    name: str
    outcome: Outcome
    seconds: float
    limit: float | None = None

    @property
    def passed(self) -> bool:
        return self.outcome.passed and (self.limit is None or self.seconds < self.limit)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [v.name for v in self.outcome.verdicts if not v.passed]
        extra = f" failed={failed}" if failed else ""
        limit = f" (limit {self.limit:.0f}s)" if self.limit else ""
        return f"[{status}] criterion {self.criterion:2d} {self.name}: {self.seconds:.1f}s{limit}{extra}"


def suite(scale: str = "full", seed: int = 0, workers=None):
    """``(criterion, name, thunk, time limit)`` for every acceptance criterion."""
    p = SCALES[scale]
    return [
        (1, "exact 1-d velocity", lambda: check_exact_velocity(p["vel_steps"], p["vel_runs"], 7 + seed, workers), 60.0),
        (2, "annealed path law", lambda: check_path_law(runs=p["eq_runs"], seed=11 + seed, workers=workers), None),
        (3, "integration by parts", lambda: check_ibp(samples=p["ibp_samples"], seed=13 + seed), None),
        (4, "Green derivative", lambda: check_green_derivative(seed=17 + seed), None),
        (5, "Green identities", lambda: check_green_identities(seed=19 + seed), None),
        (6, "Fourier vs series", lambda: check_fourier_series(seed=23 + seed), None),
        (7, "symmetrisation", lambda: check_symmetrization(seed=29 + seed), None),
        (8, "auxiliary kernel bounds", lambda: check_kernel_bounds(samples=p["k_samples"], seed=31 + seed, workers=workers), 300.0),
        (9, "Green integrability bound", lambda: check_green_integrability(p["g_samples"], 37 + seed, workers), None),
        (10, "1-d expansion consistency", lambda: check_expansion_1d(seed=41 + seed), None),
        (11, "2-d expansion bound", lambda: check_expansion_2d(p["p3_steps"], p["p3_runs"], 43 + seed, workers=workers), 1800.0),
        (12, "determinism across workers", lambda: check_determinism(scale, seed), None),
    ]


def run_criterion(criterion: int, scale: str = "full", seed: int = 0, workers=None) -> CheckRun:
    for num, name, thunk, limit in suite(scale, seed, workers):
        if num == criterion:
            t0 = time.perf_counter()
            outcome = thunk()
            return CheckRun(num, name, outcome, time.perf_counter() - t0, limit)
    raise KeyError(criterion)
