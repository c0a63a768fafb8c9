"""Run records, metrics and verdicts.

A verdict is a list of containment checks ``low - k*sigma <= value <= high +
k*sigma`` over named metrics, so every verdict can be recomputed from the
stored metrics alone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

CSV_HEADER = ("name", "value", "sigma", "bound_low", "bound_high")


@dataclass
class Metric:
    name: str
    value: float
    sigma: float = 0.0
    bound_low: float = float("nan")
    bound_high: float = float("nan")


@dataclass
class Verdict:
    name: str
    bound: str
    sigmas: float
    checks: list  # [(metric name, low, high), ...]
    passed: bool = False

    def violations(self, metrics: dict[str, Metric]) -> list[str]:
        """Names of the checked metrics that fall outside their slackened bounds."""
        bad = []
        for name, low, high in self.checks:
            m = metrics[name]
            slack = self.sigmas * m.sigma if self.sigmas else 0.0
            if not (low - slack <= m.value <= high + slack):
                bad.append(name)
        return bad

    def judge(self, metrics: dict[str, Metric]) -> bool:
        self.passed = not self.violations(metrics)
        return self.passed


@dataclass
class Outcome:
    """Metrics and verdicts from one experiment or check."""

    metrics: list[Metric] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def metric(self, name, value, sigma=0.0, low=float("nan"), high=float("nan")) -> Metric:
        m = Metric(name, float(value), float(sigma), float(low), float(high))
        self.metrics.append(m)
        return m

    def verdict(self, name: str, bound: str, checks, sigmas: float = 0.0) -> Verdict:
        v = Verdict(name, bound, float(sigmas), [(c[0], float(c[1]), float(c[2])) for c in checks])
        v.judge(self.metric_map)
        self.verdicts.append(v)
        return v

    def contained(self, prefix: str, name: str, bound: str, sigmas: float = 0.0) -> Verdict:
        """Verdict over every metric named ``prefix...`` against its own stored bounds."""
        checks = [(m.name, m.bound_low, m.bound_high) for m in self.metrics if m.name.startswith(prefix)]
        return self.verdict(name, bound, checks, sigmas)

    @property
    def metric_map(self) -> dict[str, Metric]:
        return {m.name: m for m in self.metrics}

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def extend(self, other: "Outcome", prefix: str = ""):
        for m in other.metrics:
            self.metrics.append(Metric(prefix + m.name, m.value, m.sigma, m.bound_low, m.bound_high))
        for v in other.verdicts:
            nv = Verdict(prefix + v.name, v.bound, v.sigmas, [(prefix + c[0], c[1], c[2]) for c in v.checks], v.passed)
            self.verdicts.append(nv)


@dataclass
class RunRecord:
    kind: str
    digest: str
    version: str
    manifest: str
    wall_clock: float
    started: str
    metrics: list[Metric]
    verdicts: list[Verdict]
    files: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            return x

        body = asdict(self)
        body["passed"] = self.passed
        return json.dumps(clean(body), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        def num(x):
            if x is None:
                return float("nan")
            if x in ("inf", "-inf"):
                return float(x)
            return float(x)

        body = json.loads(text)
        metrics = [Metric(m["name"], num(m["value"]), num(m["sigma"]), num(m["bound_low"]), num(m["bound_high"]))
                   for m in body["metrics"]]
        verdicts = [Verdict(v["name"], v["bound"], num(v["sigmas"]), [(c[0], num(c[1]), num(c[2])) for c in v["checks"]],
                            v["passed"]) for v in body["verdicts"]]
        return cls(body["kind"], body["digest"], body["version"], body["manifest"], body["wall_clock"],
                   body["started"], metrics, verdicts, body.get("files", []))


def recompute_verdicts(record: RunRecord) -> list[bool]:
    """Re-judge every verdict from the record's metrics."""
    metrics = {m.name: m for m in record.metrics}
    out = []
    for v in record.verdicts:
        copy = Verdict(v.name, v.bound, v.sigmas, list(v.checks))
        out.append(copy.judge(metrics))
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_plotdata(record: RunRecord | Outcome, path) -> Path:
    """Tidy CSV, one metric per row: name, value, sigma, bound_low, bound_high."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for m in record.metrics:
            w.writerow([m.name, _fmt(m.value), _fmt(m.sigma), _fmt(m.bound_low), _fmt(m.bound_high)])
    return path
