"""Experiment manifests: flat ``key = value`` files.

Grammar: one assignment per line, ``#`` starts a comment, blank lines are
ignored, keys are case-insensitive identifiers.  Lists (``alphas``,
``mean``, ``z0``) are comma or whitespace separated.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .dirichlet import WeightVector
from .errors import ManifestInvalid

KINDS = ("velocity", "equivalence", "green", "kalikow", "expansion", "verify")
GREEN_MODES = ("killed", "fourier", "series", "symmetrize", "lemma2", "lemma3")

_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")

# required keys per kind (green adds mode-specific ones below)
_REQUIRED = {
    "velocity": ("alphas", "seed", "steps", "runs"),
    "equivalence": ("alphas", "seed", "steps", "runs"),
    "green": ("alphas", "mode"),
    "kalikow": ("alphas", "seed", "radius", "delta", "samples"),
    "expansion": ("alphas",),
    "verify": (),
}
_GREEN_REQUIRED = {
    "killed": ("seed", "radius", "delta"),
    "fourier": (),
    "series": (),
    "symmetrize": ("radius", "delta"),
    "lemma2": ("seed", "radius", "delta"),
    "lemma3": ("seed", "radius", "samples"),
}
_INT_KEYS = ("dim", "seed", "steps", "runs", "samples", "radius", "horizon")
_FLOAT_KEYS = ("delta", "gamma")
_LIST_KEYS = ("alphas", "mean", "z0")
_KNOWN = set(_INT_KEYS + _FLOAT_KEYS + _LIST_KEYS) | {"kind", "mode", "out", "scale", "dump_displacements"}


def parse_text(text: str) -> dict[str, str]:
    """Raw key/value pairs; duplicate keys and malformed lines are errors."""
    out: dict[str, str] = {}
    problems: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            problems[f"line {lineno}"] = f"expected 'key = value', got {line!r}"
            continue
        key, value = m.group(1).lower(), m.group(2).strip()
        if key in out:
            problems[key] = f"duplicate key (line {lineno})"
        out[key] = value
    if problems:
        raise ManifestInvalid(problems)
    return out


def _split(value: str) -> list[str]:
    return [v for v in re.split(r"[,\s]+", value.strip().strip("()[]")) if v]


@dataclass
class ExperimentManifest:
    kind: str
    alphas: tuple[float, ...] | None = None
    dim: int | None = None
    seed: int = 0
    steps: int | None = None
    runs: int | None = None
    samples: int | None = None
    radius: int | None = None
    delta: float | None = None
    mode: str | None = None
    horizon: int | None = None
    z0: tuple[int, ...] | None = None
    scale: str = "full"
    dump_displacements: bool = False
    out: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def weights(self) -> WeightVector:
        return WeightVector(self.alphas)

    def canonical(self) -> str:
        """Normalised text used for the digest (``out`` is excluded: where
        results go does not change what they are)."""
        items = []
        for key in ("kind", "alphas", "dim", "seed", "steps", "runs", "samples", "radius",
                    "delta", "mode", "horizon", "z0", "scale", "dump_displacements"):
            v = getattr(self, key)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            items.append(f"{key}={v!r}" if isinstance(v, float) else f"{key}={v}")
        return "\n".join(items) + "\n"

    def digest(self, version: str = __version__) -> str:
        h = hashlib.sha256()
        h.update(self.canonical().encode())
        h.update(f"version={version}\n".encode())
        return h.hexdigest()


def build_manifest(raw: dict[str, str], kind: str | None = None) -> ExperimentManifest:
    """Validate raw pairs; every problem is reported at once, keyed by field."""
    problems: dict[str, str] = {}
    raw = {k.lower(): v for k, v in raw.items()}
    mkind = raw.get("kind", kind)
    if kind is not None and mkind != kind:
        problems["kind"] = f"manifest says {mkind!r} but the command is {kind!r}"
    if mkind not in KINDS:
        problems["kind"] = f"must be one of {', '.join(KINDS)}"
        raise ManifestInvalid(problems)
    for key in raw:
        if key not in _KNOWN:
            problems[key] = "unknown key"

    vals: dict = {}
    for key in _INT_KEYS:
        if key in raw:
            try:
                vals[key] = int(raw[key].replace("_", ""), 0)
            except ValueError:
                problems[key] = f"not an integer: {raw[key]!r}"
    for key in _FLOAT_KEYS:
        if key in raw:
            try:
                vals[key] = float(raw[key])
            except ValueError:
                problems[key] = f"not a number: {raw[key]!r}"
    for key in _LIST_KEYS:
        if key in raw:
            conv = int if key == "z0" else float
            try:
                vals[key] = tuple(conv(x) for x in _split(raw[key]))
            except ValueError:
                problems[key] = f"not a list of numbers: {raw[key]!r}"

    if "mean" in vals and "alphas" not in vals:
        if "gamma" not in vals:
            problems["gamma"] = "required together with 'mean'"
        elif "mean" not in problems:
            s = sum(vals["mean"])
            vals["alphas"] = tuple(vals["gamma"] * m / s for m in vals["mean"])

    required = list(_REQUIRED[mkind])
    if mkind == "green":
        mode = raw.get("mode")
        if mode not in GREEN_MODES:
            problems["mode"] = f"must be one of {', '.join(GREEN_MODES)}"
        else:
            required += _GREEN_REQUIRED[mode]
    for key in required:
        if key not in raw and key not in vals and key not in problems:
            problems[key] = "required for " + (f"green mode {raw.get('mode')}" if mkind == "green" and key != "mode" else f"kind {mkind}")

    alphas = vals.get("alphas")
    if alphas is not None:
        if len(alphas) == 0 or len(alphas) % 2:
            problems["alphas"] = "need an even number (2d) of weights"
        elif any(not a > 0 for a in alphas):
            problems["alphas"] = "weights must be strictly positive"
        elif "dim" in vals and vals["dim"] * 2 != len(alphas):
            problems["dim"] = f"dim={vals['dim']} but {len(alphas)} weights given"
    if "seed" in vals and not -(1 << 63) <= vals["seed"] < (1 << 64):
        problems["seed"] = "must fit in 64 bits"
    for key in ("steps", "runs", "samples"):
        if key in vals and vals[key] < (0 if key == "steps" else 1):
            problems[key] = "out of range"
    if "radius" in vals and vals["radius"] < 0:
        problems["radius"] = "must be >= 0"
    if "delta" in vals and not 0 < vals["delta"] <= 1:
        problems["delta"] = "must lie in (0, 1]"
    if mkind == "kalikow" and vals.get("delta") == 1.0:
        problems["delta"] = "Kalikow kernels need delta < 1"
    scale = raw.get("scale", "full")
    if scale not in ("quick", "full"):
        problems["scale"] = "must be 'quick' or 'full'"
    dump = raw.get("dump_displacements", "false").lower()
    if dump not in ("true", "false", "1", "0", "yes", "no"):
        problems["dump_displacements"] = "must be a boolean"
    if problems:
        raise ManifestInvalid(problems)

    dim = vals.get("dim") or (len(alphas) // 2 if alphas else None)
    return ExperimentManifest(
        kind=mkind,
        alphas=alphas,
        dim=dim,
        seed=vals.get("seed", 0),
        steps=vals.get("steps"),
        runs=vals.get("runs"),
        samples=vals.get("samples"),
        radius=vals.get("radius"),
        delta=vals.get("delta"),
        mode=raw.get("mode"),
        horizon=vals.get("horizon"),
        z0=vals.get("z0"),
        scale=scale,
        dump_displacements=dump in ("true", "1", "yes"),
        out=raw.get("out"),
    )


def load_manifest(path, kind: str | None = None) -> ExperimentManifest:
    return build_manifest(parse_text(Path(path).read_text()), kind)
