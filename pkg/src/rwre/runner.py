"""Manifest-driven experiments: run, judge, persist.

Each run writes to ``<out>/<kind>-<digest[:12]>`` (a ``-2``, ``-3``, ...
suffix when that directory already exists, so results are append-only):

* ``record.json``  the :class:`~rwre.records.RunRecord`
* ``metrics.csv``  one metric per row, byte-identical across reruns
* kind-specific data CSVs
"""

from __future__ import annotations

import csv
import datetime as _dt
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checks import SIGMAS, _chi2_pvalue, suite
from .environment import EnvironmentView, make_box, materialize, neighbors
from .errors import ExperimentFailed, RWREError
from .green import (
    green_derivative_check,
    green_fourier_origin,
    green_series_origin,
    homogeneous_stats,
    killed_green,
    mean_green_return,
    return_identity_residual,
    symmetrize_check,
)
from .kalikow import estimate_kalikow, expansion_velocity, prop2_bounds, theorem1_drift_box
from .manifest import ExperimentManifest
from .records import Outcome, RunRecord, emit_plotdata
from .walks import (
    annealed_path_logprob,
    enumerate_paths,
    estimate_velocity,
    exact_velocity_1d,
    path_from_directions,
    reinforced_batch,
    theorem1_bounds,
    theorem1_condition,
)

MAX_ENUMERATED_PATHS = 1 << 20


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _r(x) -> str:
    return repr(float(x))


def _origin(man: ExperimentManifest):
    return tuple(man.z0) if man.z0 is not None else (0,) * man.dim


# --------------------------------------------------------------------------
# experiments: (manifest, workers) -> (Outcome, {filename: (header, rows)})

def _velocity(man, workers):
    w = man.weights
    est = estimate_velocity(w, man.steps, man.runs, man.seed, workers)
    box = theorem1_bounds(w) if w.gamma > 1 else None
    out = Outcome()
    for i in range(w.dim):
        lo, hi = (box[i].low, box[i].high) if box else (-1.0, 1.0)
        out.metric(f"v_{i + 1}", est.mean_velocity[i], est.std_error[i], lo, hi)
    if box is not None and theorem1_condition(w):
        out.verdict("theorem1", "theorem1", [(f"v_{i + 1}", iv.low, iv.high) for i, iv in enumerate(box)], SIGMAS)
    if w.dim == 1 and w.gamma > 1:
        exact = exact_velocity_1d(w)
        out.metric("exact_v_1", exact, 0.0, exact, exact)
        out.verdict("exact_velocity", "exact_1d_velocity", [("v_1", exact, exact)], SIGMAS)
    files = {}
    if man.dump_displacements:
        rows = [[r, man.steps, *map(int, est.displacements[r])] for r in range(man.runs)]
        files["displacements.csv"] = (["run", "steps"] + [f"x_{i + 1}" for i in range(w.dim)], rows)
    return out, files


def _equivalence(man, workers):
    w = man.weights
    d, n = w.dim, man.steps
    if (2 * d) ** n > MAX_ENUMERATED_PATHS:
        raise ExperimentFailed(f"(2d)^steps = {(2 * d) ** n} paths is too many to enumerate")
    dirs = enumerate_paths(d, n)
    probs = np.exp([annealed_path_logprob(w, path_from_directions(p, d)) for p in dirs])
    sample = reinforced_batch(w, n, man.runs, man.seed, workers=workers).astype(np.int64)
    codes = sample @ ((2 * d) ** np.arange(n - 1, -1, -1)) if n else np.zeros(man.runs, dtype=np.int64)
    observed = np.bincount(codes, minlength=len(probs))
    out = Outcome()
    out.metric("total_probability", probs.sum(), 0.0, 1 - 1e-10, 1 + 1e-10)
    checks = [("total_probability", 1 - 1e-10, 1 + 1e-10)]
    if len(probs) > 1:
        pvalue, cells = _chi2_pvalue(observed.astype(float), probs, man.runs)
        out.metric("chi2_pvalue", pvalue, 0.0, 0.01, 1.0)
        out.metric("chi2_cells", cells)
        checks.append(("chi2_pvalue", 0.01, 1.0))
    out.verdict("path_law", "path_law", checks)
    rows = [[" ".join(map(str, p)), _r(pr), int(o)] for p, pr, o in zip(dirs, probs, observed)]
    return out, {"path_law.csv": (["directions", "probability", "observed"], rows)}


def _green(man, workers):
    w = man.weights
    d = w.dim
    out = Outcome()
    files = {}
    mode = man.mode
    if mode in ("fourier", "series"):
        kern = homogeneous_stats(w)
        out.metric("k_m", kern.k_m)
        out.metric("eta_m", kern.eta_m)
        if mode == "fourier":
            out.metric("green_origin", green_fourier_origin(kern), 0.0, 1.0, np.inf)
        else:
            s = green_series_origin(kern, man.horizon)
            out.metric("green_origin", s.value, s.tail_bound, 1.0, np.inf)
            out.metric("horizon", s.horizon)
        if d == 1:
            exact = 1.0 / abs(kern.m[0] - kern.m[1])
            out.metric("closed_form_gap", abs(out.metric_map["green_origin"].value - exact), 0.0, 0.0,
                       1e-10 if mode == "fourier" else s.tail_bound + 1e-10)
            out.verdict("closed_form_1d", "fourier_closed_form", [("closed_form_gap", 0.0,
                        out.metric_map["closed_form_gap"].bound_high)])
        return out, files

    box = make_box((0,) * d, man.radius)
    if mode == "symmetrize":
        dev = symmetrize_check(homogeneous_stats(w), man.delta, box)
        out.metric("max_deviation", dev, 0.0, 0.0, 1e-10)
        out.verdict("symmetrisation", "symmetrisation", [("max_deviation", 0.0, 1e-10)])
        return out, files

    z0 = _origin(man)
    if mode == "lemma3":
        est = mean_green_return(w, box, z0, man.samples, man.seed, workers)
        out.metric("mean_green_return", est.mean, est.std_error, 1.0, est.bound)
        out.metric("integrability_bound", est.bound)
        out.metric("escape_direction", est.direction)
        out.metric("escape_distance", est.distance)
        out.verdict("green_integrability", "green_integrability", [("mean_green_return", 1.0, est.bound)], SIGMAS)
        return out, files

    view = EnvironmentView(man.seed, w)
    table = materialize(view, box)
    if mode == "killed":
        op = killed_green(table, box, man.delta)
        res = float(np.abs(return_identity_residual(op, table)).max())
        out.metric("return_identity_max_residual", res, 0.0, 0.0, 1e-10)
        out.metric("green_z0_z0", op(z0, z0), 0.0, 1.0, np.inf)
        out.verdict("return_identity", "return_identity", [("return_identity_max_residual", 0.0, 1e-10)])
        row = op.values[box.index[z0]]
        sites = list(box.interior) + list(box.boundary)
        header = [f"x_{i + 1}" for i in range(d)] + ["boundary", "green"]
        files["green_row.csv"] = (header, [[*s, int(k >= len(box)), _r(g)] for k, (s, g) in enumerate(zip(sites, row))])
        return out, files

    # every stencil (z0, z0, z0 + e, z0)
    rows = []
    for k, nb in enumerate(neighbors(z0)):
        a, nmr = green_derivative_check(table, box, man.delta, z0, z0, nb, z0)
        if nb in box:
            out.metric(f"rel_err[{k}]", abs(a - nmr) / abs(a), 0.0, 0.0, 1e-6)
        else:
            out.metric(f"boundary_target[{k}]", max(abs(a), abs(nmr)), 0.0, 0.0, 0.0)
        rows.append([k, int(nb not in box), _r(a), _r(nmr)])
    out.contained("", "green_derivative", "green_derivative")
    files["derivative.csv"] = (["direction", "boundary_target", "analytic", "numeric"], rows)
    return out, files


def _kalikow(man, workers):
    w = man.weights
    box = make_box((0,) * w.dim, man.radius)
    z0 = _origin(man)
    kern = estimate_kalikow(w, box, man.delta, z0, man.samples, man.seed, workers)
    out = Outcome()
    rows = []
    bounds = prop2_bounds(w) if w.gamma != 1 else None
    for x, site in enumerate(box.interior):
        for i in range(2 * w.dim):
            v, se = kern.values[x, i], kern.std_error[x, i]
            lo, hi = (bounds[i].low, bounds[i].high) if bounds else (0.0, 1.0)
            out.metric(f"w{list(site)}:{i}", v, se, lo, hi)
            rows.append([*site, i, _r(v), _r(se), _r(lo), _r(hi)])
    if bounds is not None:
        out.contained("w[", "prop2", "prop2", SIGMAS)
    if w.gamma > 1:
        dbox = theorem1_drift_box(w)
        for x, site in enumerate(box.interior):
            for i, iv in enumerate(dbox.intervals):
                out.metric(f"drift{list(site)}:{i + 1}", kern.drift[x, i], kern.drift_se[x, i], iv.low, iv.high)
        out.contained("drift[", "theorem1", "theorem1", SIGMAS)
    header = [f"x_{i + 1}" for i in range(w.dim)] + ["direction", "value", "std_error", "bound_low", "bound_high"]
    return out, {"kernel.csv": (header, rows)}


def _expansion(man, workers):
    w = man.weights
    rep = expansion_velocity(w)
    out = Outcome()
    for i in range(w.dim):
        c = rep.expansion[i]
        out.metric(f"center_{i + 1}", c, 0.0, c - rep.error_bound, c + rep.error_bound)
    out.metric("error_bound", rep.error_bound, 0.0, 0.0, np.inf)
    out.metric("green_origin", rep.green_origin)
    out.metric("k_m", rep.k_m)
    out.metric("eta_m", rep.eta_m)
    out.metric("precondition_ok", float(rep.precondition_ok), 0.0, 1.0, 1.0)
    if man.steps and man.runs:
        est = estimate_velocity(w, man.steps, man.runs, man.seed, workers)
        checks = []
        for i in range(w.dim):
            c = rep.expansion[i]
            out.metric(f"v_{i + 1}", est.mean_velocity[i], est.std_error[i], c - rep.error_bound, c + rep.error_bound)
            checks.append((f"v_{i + 1}", c - rep.error_bound, c + rep.error_bound))
        out.verdict("prop3", "prop3", checks, SIGMAS)
    out.verdict("prop3_precondition", "prop3", [("precondition_ok", 1.0, 1.0)])
    return out, {}


def _verify(man, workers):
    out = Outcome()
    rows = []
    for num, name, thunk, limit in suite(man.scale, man.seed, workers):
        t0 = time.perf_counter()
        res = thunk()
        secs = time.perf_counter() - t0
        out.extend(res, prefix=f"c{num:02d}.")
        rows.append([num, name, int(res.passed), f"{secs:.3f}"])
    return out, {"criteria.csv": (["criterion", "name", "passed", "seconds"], rows)}


EXPERIMENTS = {
    "velocity": _velocity,
    "equivalence": _equivalence,
    "green": _green,
    "kalikow": _kalikow,
    "expansion": _expansion,
    "verify": _verify,
}


def run_directory(base: Path, kind: str, digest: str) -> Path:
    """Fresh run directory; never reuses an existing one."""
    stem = f"{kind}-{digest[:12]}"
    path = base / stem
    k = 2
    while path.exists():
        path = base / f"{stem}-{k}"
        k += 1
    return path


def run_manifest(man: ExperimentManifest, workers: int | None = None, out: str | Path | None = None,
                 write: bool = True) -> RunRecord:
    """Run ``man``; with ``write`` the record and data files go to a new
    directory under ``out`` (default: the manifest's ``out`` key, else ``out``)."""
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    try:
        outcome, files = EXPERIMENTS[man.kind](man, workers)
    except ExperimentFailed:
        raise
    except RWREError as exc:
        raise ExperimentFailed(f"{man.kind}: {type(exc).__name__}: {exc}") from exc
    record = RunRecord(man.kind, man.digest(), __version__, man.canonical(), time.perf_counter() - t0,
                       started, outcome.metrics, outcome.verdicts)
    if write:
        base = Path(out or man.out or "out")
        path = run_directory(base, man.kind, record.digest)
        path.mkdir(parents=True)
        for name, (header, rows) in files.items():
            _write_rows(path / name, header, rows)
        emit_plotdata(record, path / "metrics.csv")
        record.files = sorted(["record.json", "metrics.csv", *files])
        (path / "record.json").write_text(record.to_json())
        record.path = path
    return record
