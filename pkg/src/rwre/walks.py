"""Quenched and annealed (reinforced) walks, exact path laws, velocity bounds."""

from __future__ import annotations

import bisect
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .dirichlet import WeightVector, dirichlet_log_moment, unit_vectors
from .environment import EnvironmentView, env_at
from .errors import DegenerateNormalizer, WrongDimension
from .parallel import ordered_map
from .seeding import WALK_BLOCKS, WALK_RUNS, block_ranges, stream


class Interval(NamedTuple):
    low: float
    high: float
    vacuous: bool = False

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.low - slack <= x <= self.high + slack


# --------------------------------------------------------------------------
# paths

def path_from_directions(directions: Sequence[int], dim: int) -> np.ndarray:
    """Cumulative positions ``(n + 1, d)`` starting at the origin."""
    steps = unit_vectors(dim)[np.asarray(directions, dtype=np.int64)]
    return np.concatenate([np.zeros((1, dim), np.int64), np.cumsum(steps, axis=0)])


def path_directions(path) -> np.ndarray:
    """Inverse of :func:`path_from_directions`; raises on non-nearest-neighbour moves."""
    path = np.asarray(path, dtype=np.int64)
    if path.ndim == 1:
        path = path[:, None]
    dim = path.shape[1]
    steps = np.diff(path, axis=0)
    if steps.size == 0:
        return np.zeros(0, np.int64)
    if not np.all(np.abs(steps).sum(axis=1) == 1):
        raise ValueError("consecutive sites must differ by exactly one unit vector")
    axis = np.argmax(np.abs(steps), axis=1)
    negative = steps[np.arange(len(steps)), axis] < 0
    return axis + dim * negative


def crossing_counts(path) -> Counter:
    """``{(site, direction): N}`` over the directed edges the path traverses."""
    path = np.asarray(path, dtype=np.int64)
    if path.ndim == 1:
        path = path[:, None]
    dirs = path_directions(path)
    return Counter((tuple(int(c) for c in path[t]), int(k)) for t, k in enumerate(dirs))


def enumerate_paths(dim: int, steps: int):
    """All ``(2d)**steps`` direction sequences, lexicographic."""
    return np.array(list(itertools.product(range(2 * dim), repeat=steps)), dtype=np.int64).reshape(-1, steps)


def annealed_path_logprob(weights: WeightVector, path) -> float:
    """log P^mu(path) as a product over sites of Dirichlet moments of the
    exit counts left behind at that site."""
    path = np.asarray(path, dtype=np.int64)
    if path.ndim == 1:
        path = path[:, None]
    if path.shape[1] != weights.dim:
        raise ValueError("path dimension does not match the weights")
    per_site: dict[tuple, np.ndarray] = {}
    for (site, k), n in crossing_counts(path).items():
        per_site.setdefault(site, np.zeros(len(weights), np.int64))[k] += n
    return float(sum(dirichlet_log_moment(weights, n) for n in per_site.values()))


def sequential_path_logprob(weights: WeightVector, path) -> float:
    """Step-by-step product of reinforced transition probabilities."""
    path = np.asarray(path, dtype=np.int64)
    if path.ndim == 1:
        path = path[:, None]
    a = weights.array
    counts: dict[tuple, np.ndarray] = {}
    total = 0.0
    for t, k in enumerate(path_directions(path)):
        n = counts.setdefault(tuple(path[t]), np.zeros(len(a)))
        total += np.log((a[k] + n[k]) / (a.sum() + n.sum()))
        n[k] += 1
    return float(total)


# --------------------------------------------------------------------------
# samplers

def run_quenched(view: EnvironmentView, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Walk ``steps`` steps in the fixed environment ``view`` from the origin."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    dim = view.dim
    moves = [tuple(int(c) for c in e) for e in unit_vectors(dim)]
    u = rng.random(steps)
    cache: dict[tuple, list] = {}
    pos = (0,) * dim
    path = np.zeros((steps + 1, dim), np.int64)
    for t in range(steps):
        cum = cache.get(pos)
        if cum is None:
            cum = cache[pos] = list(np.cumsum(env_at(view, pos)))
        k = min(bisect.bisect_right(cum, u[t] * cum[-1]), 2 * dim - 1)
        pos = tuple(p + m for p, m in zip(pos, moves[k]))
        path[t + 1] = pos
    return path


def _check_steps(weights: WeightVector, steps: int):
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if steps > _kernels.max_steps(weights.dim):
        raise ValueError(f"at most {_kernels.max_steps(weights.dim)} steps in dimension {weights.dim}")


def run_reinforced(weights: WeightVector, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Sample a path from the annealed law via the reinforced representation."""
    _check_steps(weights, steps)
    u = rng.random(steps)
    dirs = _kernels.reinforced_directions(weights.array, weights.dim, u, _kernels.key_bits(weights.dim))
    return path_from_directions(dirs, weights.dim)


def reinforced_batch(weights: WeightVector, steps: int, runs: int, seed: int,
                     block_size: int = 1 << 16, workers: int | None = None) -> np.ndarray:
    """Direction sequences ``(runs, steps)`` of many short reinforced walks.

    Runs are grouped in fixed blocks; block ``b`` uses the stream
    ``(seed, b)``, so the output does not depend on ``workers``.
    """
    _check_steps(weights, steps)
    a = weights.array

    def block(spec):
        b, lo, hi = spec
        u = stream(seed, WALK_BLOCKS, b).random((hi - lo, steps))
        return _kernels.reinforced_short_batch(a, weights.dim, u)

    parts = ordered_map(block, block_ranges(runs, block_size), workers)
    return np.concatenate(parts) if parts else np.zeros((0, steps), np.int8)


# --------------------------------------------------------------------------
# velocity

@dataclass
class VelocityEstimate:
    mean_velocity: np.ndarray
    std_error: np.ndarray
    runs: int
    steps: int
    displacements: np.ndarray | None = field(default=None, repr=False)


def run_displacement(weights: WeightVector, steps: int, seed: int, run: int) -> np.ndarray:
    """``X_steps`` for run number ``run`` of the reinforced walk."""
    u = stream(seed, WALK_RUNS, run).random(steps)
    return _kernels.reinforced_displacement(weights.array, weights.dim, u, _kernels.key_bits(weights.dim))


def estimate_velocity(weights: WeightVector, steps: int, runs: int, seed: int,
                      workers: int | None = None) -> VelocityEstimate:
    """Mean and standard error of ``X_n / n`` over independent annealed runs."""
    if steps < 1 or runs < 1:
        raise ValueError("steps and runs must be >= 1")
    _check_steps(weights, steps)
    disp = np.array(ordered_map(lambda r: run_displacement(weights, steps, seed, r), range(runs), workers))
    v = disp / steps
    se = v.std(axis=0, ddof=1) / np.sqrt(runs) if runs > 1 else np.full(weights.dim, np.inf)
    return VelocityEstimate(v.mean(axis=0), se, runs, steps, disp)


def theorem1_condition(weights: WeightVector) -> bool:
    """Some axis orientation has ``alpha_e > 1 + alpha_{-e}``."""
    d = weights.dim
    a = weights.alphas
    return any(a[i] > 1 + a[(i + d) % (2 * d)] for i in range(2 * d))


def _normalizer(weights: WeightVector) -> float:
    norm = weights.gamma - 1.0
    if norm <= 0:
        raise DegenerateNormalizer(f"sum(alphas) = {weights.gamma} <= 1")
    return norm


def theorem1_bounds(weights: WeightVector) -> list[Interval]:
    """Per-axis interval for ``v . e_i``:
    ``[(a_+ - a_- - 1), (a_+ - a_- + 1)] / (sum(alphas) - 1)``."""
    norm = _normalizer(weights)
    out = []
    for i in range(weights.dim):
        diff = weights.positive(i) - weights.negative(i)
        out.append(Interval((diff - 1) / norm, (diff + 1) / norm))
    return out


def exact_velocity_1d(weights: WeightVector) -> float:
    """Asymptotic speed of the one-dimensional walk (zero unless ``|a_+ - a_-| > 1``)."""
    if weights.dim != 1:
        raise WrongDimension(f"exact velocity is known only for d = 1, got d = {weights.dim}")
    plus, minus = weights.alphas
    if plus > 1 + minus:
        return (plus - minus - 1) / (plus + minus - 1)
    if minus > 1 + plus:
        return (plus - minus + 1) / (plus + minus - 1)
    return 0.0
