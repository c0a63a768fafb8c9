"""Lazy, reproducible iid Dirichlet environments and finite lattice domains."""

from __future__ import annotations

import csv
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dirichlet import WeightVector, sample_dirichlet, unit_vectors
from .seeding import ENV_SITES, MASK64, stream, zigzag

Site = tuple[int, ...]

# coordinates are hashed exactly; this bound is where collision-freedom is tested
MAX_COORD = 1 << 20


def neighbors(site: Site) -> list[Site]:
    """The 2d nearest neighbours in direction-index order (+e_1..+e_d, -e_1..-e_d)."""
    return [tuple(int(c) for c in np.add(site, e)) for e in unit_vectors(len(site))]


@dataclass(frozen=True)
class FiniteDomain:
    """Connected set of interior sites with its outer lattice boundary.

    ``interior`` and ``boundary`` are sorted tuples; ``index`` maps every
    interior site to its row in matrices built on the domain.
    """

    interior: tuple[Site, ...]
    boundary: tuple[Site, ...]
    index: dict = field(compare=False, repr=False)

    @property
    def dim(self) -> int:
        return len(self.interior[0]) if self.interior else 0

    def __len__(self):
        return len(self.interior)

    def __contains__(self, site):
        return tuple(site) in self.index

    @property
    def boundary_index(self) -> dict:
        return {b: k for k, b in enumerate(self.boundary)}


def _is_connected(sites: set) -> bool:
    if not sites:
        return True
    start = next(iter(sites))
    seen = {start}
    todo = deque([start])
    while todo:
        for nb in neighbors(todo.popleft()):
            if nb in sites and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(sites)


def domain_from_sites(sites: Iterable[Sequence[int]], check_connected: bool = True) -> FiniteDomain:
    interior = sorted({tuple(int(c) for c in s) for s in sites})
    if interior and len({len(s) for s in interior}) != 1:
        raise ValueError("sites of mixed dimension")
    inside = set(interior)
    if check_connected and not _is_connected(inside):
        raise ValueError("domain interior is not nearest-neighbour connected")
    boundary = sorted({nb for s in interior for nb in neighbors(s) if nb not in inside})
    return FiniteDomain(tuple(interior), tuple(boundary), {s: k for k, s in enumerate(interior)})


def random_cluster(dim: int, size: int, rng: np.random.Generator) -> FiniteDomain:
    """Connected domain of ``size`` sites grown from the origin by attaching
    uniformly chosen neighbours of the current cluster."""
    sites = [(0,) * dim]
    inside = set(sites)
    while len(sites) < size:
        base = sites[rng.integers(len(sites))]
        nb = neighbors(base)[rng.integers(2 * dim)]
        if nb not in inside:
            inside.add(nb)
            sites.append(nb)
    return domain_from_sites(sites, check_connected=False)


def make_box(center: Sequence[int], radius: int) -> FiniteDomain:
    """L-infinity box of the given radius around ``center``."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    center = tuple(int(c) for c in center)
    ranges = [range(c - radius, c + radius + 1) for c in center]
    return domain_from_sites(itertools.product(*ranges), check_connected=False)


def segment(lo: int, hi: int) -> FiniteDomain:
    """One-dimensional interior ``{lo, ..., hi}``."""
    return domain_from_sites(((x,) for x in range(lo, hi + 1)), check_connected=False)


@dataclass(frozen=True)
class EnvironmentView:
    """The environment ``omega`` drawn from ``seed``; sites are generated on demand.

    Each site owns a Philox stream keyed by ``(seed, d, zigzag(coords))``,
    so ``env_at`` does not depend on the order in which sites are visited.
    """

    seed: int
    weights: WeightVector

    @property
    def dim(self) -> int:
        return self.weights.dim


def site_stream(seed: int, site: Sequence[int]) -> np.random.Generator:
    if any(abs(int(c)) > MAX_COORD for c in site):
        raise ValueError(f"site {tuple(site)} outside the hashed range |coord| <= 2^20")
    return stream(int(seed) & MASK64, ENV_SITES, len(site), *(zigzag(c) for c in site))


def env_at(view: EnvironmentView, site: Sequence[int]) -> np.ndarray:
    """Exit probabilities ``omega(x, x + e_i)`` at ``site``."""
    if len(site) != view.dim:
        raise ValueError(f"site {tuple(site)} has dimension {len(site)}, environment has {view.dim}")
    return sample_dirichlet(view.weights, site_stream(view.seed, site))


def materialize(view: EnvironmentView, domain: FiniteDomain) -> dict[Site, np.ndarray]:
    return {s: env_at(view, s) for s in domain.interior}


def table_array(table: Mapping[Site, np.ndarray] | np.ndarray, domain: FiniteDomain) -> np.ndarray:
    """Environment restricted to ``domain`` as an ``(n_interior, 2d)`` array."""
    if isinstance(table, np.ndarray):
        if table.shape[0] != len(domain):
            raise ValueError("environment array does not match the domain size")
        return table
    return np.array([table[s] for s in domain.interior]).reshape(len(domain), -1)


def homogeneous_table(domain: FiniteDomain, probs: Sequence[float]) -> np.ndarray:
    """Every interior site gets the same transition vector."""
    return np.tile(np.asarray(probs, dtype=float), (len(domain), 1))


def dump_csv(view: EnvironmentView, domain: FiniteDomain, path) -> None:
    """Write a materialised domain as CSV: coordinates, then the 2d probabilities."""
    d = view.dim
    header = [f"x{i + 1}" for i in range(d)]
    header += [f"p_plus{i + 1}" for i in range(d)] + [f"p_minus{i + 1}" for i in range(d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for site, probs in materialize(view, domain).items():
            w.writerow([*site, *(repr(float(p)) for p in probs)])
