"""Potential functions for the periodic Schrödinger problems.

All potentials are evaluated pointwise at quadrature nodes (no cell
averaging), so discontinuous wells carry the usual O(h) quadrature error.
Every kind declares its x-period so periodicity can be checked generically.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

_KINDS = (
    "zero",
    "product_sine",
    "sine_y2",
    "optical_lattice",
    "coulomb_chain",
    "kronig_penney",
    "custom",
)


@dataclass
class PotentialSpec:
    """A potential kind plus its parameters and an optional barrier term.

    ``barrier`` is a pair (indicator, a): the indicator marks the region
    complement (where the penalty applies) on (n, d) point arrays and a >= 0
    is the penalty height.  ``x_period`` is the declared periodicity in the
    expanding directions (None for aperiodic kinds).
    """

    kind: str
    params: dict = field(default_factory=dict)
    barrier: tuple = None
    x_period: float = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.barrier is not None and self.barrier[1] < 0:
            raise ConfigurationError("barrier penalty must be >= 0")
        if self.x_period is None:
            self.x_period = _DEFAULT_PERIOD.get(self.kind)

    def __call__(self, pts):
        return eval_potential(self, pts)


_DEFAULT_PERIOD = {
    "zero": 1.0,
    "sine_y2": 1.0,
    "kronig_penney": 1.0,
    "product_sine": math.pi,
    "optical_lattice": None,
    "coulomb_chain": None,
    "custom": None,
}


def eval_potential(spec, pts):
    """Evaluate the potential at points, shape (n, d) -> (n,)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    p = spec.params
    if spec.kind == "zero":
        vals = np.zeros(pts.shape[0])
    elif spec.kind == "product_sine":
        # V = amp * prod_i sin(freq * z_i)^2 over the listed directions
        amp = p.get("amplitude", 100.0)
        freq = p.get("frequency", 1.0)
        dirs = p.get("directions", range(pts.shape[1]))
        vals = np.full(pts.shape[0], amp)
        for k in dirs:
            vals *= np.sin(freq * pts[:, k]) ** 2
    elif spec.kind == "sine_y2":
        # V = amp * sin(pi x)^2 * y^2 on a (p=1, q=1) strip
        amp = p.get("amplitude", 100.0)
        vals = amp * np.sin(np.pi * pts[:, 0]) ** 2 * pts[:, 1] ** 2
    elif spec.kind == "optical_lattice":
        omega = p.get("omega", 9.0)
        R = p.get("R", 1.0)
        d = p.get("d", 0.1)
        amp = p.get("amplitude", 100.0)
        y0 = p.get("y_offset", 0.0)
        c = omega * np.pi / (2.0 * (R - d))
        vals = amp * (
            1.0
            - np.sin(c * (pts[:, 0] - d)) * np.sin(c * (pts[:, 1] - y0 - (R - d)))
        )
    elif spec.kind == "coulomb_chain":
        vals = coulomb_chain(
            pts,
            centers=np.asarray(p["centers"], dtype=float),
            Z=p.get("Z", 1.0),
            b=p.get("b", 1e-4),
            R=p.get("R", 1.0),
        )
        vals = vals + p.get("lift", 0.0)
    elif spec.kind == "kronig_penney":
        # cubic wells of sidelength 2*half_width centered in each unit cube
        period = p.get("period", 1.0)
        height = p.get("height", 100.0)
        half_width = p.get("half_width", 0.25)
        norm = p.get("norm", "inf")
        frac = np.abs(np.mod(pts, period) - period / 2.0)
        dist = frac.max(axis=1) if norm == "inf" else frac.sum(axis=1)
        vals = np.where(dist < half_width, 0.0, height)
    elif spec.kind == "custom":
        vals = np.asarray(p["fn"](pts), dtype=float).reshape(pts.shape[0])
    else:  # pragma: no cover
        raise ConfigurationError(spec.kind)

    if spec.barrier is not None:
        indicator, a = spec.barrier
        vals = vals + a * np.asarray(indicator(pts), dtype=float)
    return vals


def coulomb_chain(pts, centers, Z=1.0, b=1e-4, R=1.0):
    """Truncated Coulomb sum: V(z) = sum over centers within distance R of
    -Z / max(||z - c||_2, b).  ``centers`` must already include the ghost
    centers that restore periodicity near the chain ends."""
    if b <= 0:
        raise ConfigurationError("truncation radius b must be positive")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    vals = np.zeros(pts.shape[0])
    for c in np.atleast_2d(centers):
        dist = np.linalg.norm(pts - c, axis=1)
        near = dist < R
        vals[near] -= Z / np.maximum(dist[near], b)
    return vals


def chain_centers(N, R=1.0, r=0.9, y_center=0.0, ghosts=True):
    """Centers c_i = (R + 2(i-1) r, y_center) of an N-disk chain, plus the
    two ghost centers just outside the chain ends."""
    xs = [R + 2 * (i - 1) * r for i in range(1, N + 1)]
    if ghosts:
        xs = [xs[0] - 2 * r] + xs + [xs[-1] + 2 * r]
    return np.array([[x, y_center] for x in xs])


def barrier_wrap(spec, region_complement_indicator, a):
    """Add the soft-barrier penalty a on the complement region."""
    if a < 0:
        raise ConfigurationError("barrier penalty must be >= 0")
    return PotentialSpec(
        kind=spec.kind,
        params=dict(spec.params),
        barrier=(region_complement_indicator, float(a)),
        x_period=spec.x_period,
    )
