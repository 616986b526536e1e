"""Seeded instance generators for tests, benchmarks, and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import DistanceMode, Instance, InstanceError

FAMILIES = ("rings", "gauss", "box", "metric")


@dataclass
class GeneratorSpec:
    """A reproducible recipe for an instance: identical specs generate
    identical instances bit for bit."""

    family: str
    seed: int
    params: dict = field(default_factory=dict)
    k: int = 2
    n_prime: int | None = None
    epsilon: float = 1.0


def generate(spec: GeneratorSpec) -> Instance:
    if spec.family not in FAMILIES:
        raise InstanceError(f"unknown generator family {spec.family!r}")
    rng = np.random.default_rng(spec.seed)
    maker = {
        "rings": _rings,
        "gauss": _gauss,
        "box": _box,
        "metric": _metric,
    }[spec.family]
    points, dist = maker(rng, **spec.params)
    n = points.shape[0] if points is not None else dist.shape[0]
    n_prime = n if spec.n_prime is None else spec.n_prime
    mode = DistanceMode.EXPLICIT_METRIC if dist is not None else DistanceMode.SQEUCLIDEAN
    return Instance(
        mode=mode,
        k=min(spec.k, n),
        n_prime=n_prime,
        epsilon=spec.epsilon,
        points=points,
        dist_matrix=dist,
    )


def _rings(rng, radii=(1.0, 5.0), counts=(16, 16), noise=0.0):
    """Concentric rings: evenly spaced angles, Gaussian radial noise."""
    radii = [float(r) for r in radii]
    counts = [int(c) for c in counts]
    if len(radii) != len(counts) or not radii:
        raise InstanceError("rings needs matching, nonempty radii and counts")
    if any(c < 1 for c in counts):
        raise InstanceError("ring counts must be positive")
    pieces = []
    for r, c in zip(radii, counts):
        angles = 2.0 * np.pi * np.arange(c) / c
        radial = r + rng.normal(0.0, noise, c) if noise > 0 else np.full(c, r)
        pieces.append(np.column_stack([radial * np.cos(angles), radial * np.sin(angles)]))
    return np.concatenate(pieces), None


def _gauss(rng, centers=((0.0, 0.0), (4.0, 0.0)), spreads=(0.5, 0.5), counts=(16, 16)):
    centers = np.asarray(centers, dtype=float)
    spreads = [float(s) for s in spreads]
    counts = [int(c) for c in counts]
    if not (len(centers) == len(spreads) == len(counts)) or len(counts) == 0:
        raise InstanceError("gauss needs matching centers, spreads, counts")
    if any(c < 1 for c in counts):
        raise InstanceError("mixture counts must be positive")
    pieces = [
        center + rng.normal(0.0, spread, (count, centers.shape[1]))
        for center, spread, count in zip(centers, spreads, counts)
    ]
    return np.concatenate(pieces), None


def _box(rng, n=32, dims=(1.0, 1.0)):
    n = int(n)
    if n < 1:
        raise InstanceError("box needs a positive point count")
    dims = np.asarray(dims, dtype=float)
    if dims.ndim != 1 or dims.size < 1 or (dims <= 0).any():
        raise InstanceError("box dims must be positive lengths")
    return rng.uniform(0.0, 1.0, (n, dims.size)) * dims, None


def _metric(rng, n=16, embed_dim=3):
    """A guaranteed metric: Euclidean distances of hidden embedded points."""
    n = int(n)
    if n < 1:
        raise InstanceError("metric needs a positive point count")
    pts = rng.uniform(0.0, 1.0, (n, int(embed_dim)))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    dist = (dist + dist.T) / 2.0
    np.fill_diagonal(dist, 0.0)
    return None, dist
