"""Geometry of the unit 2-sphere and the von Mises–Fisher distribution."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CutLocusError, InvalidPointError
from .geometry import CUT_LOCUS_GUARD, Manifold

POINT_ATOL = 1e-12


def _normalize(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


class Sphere(Manifold):
    """S² ⊂ R³ with the round metric; points are unit 3-vectors."""

    tag = "sphere"
    dim = 2
    ambient_shape = (3,)

    def check_point(self, x, atol=POINT_ATOL):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (3,):
            raise InvalidPointError(f"sphere point must be a 3-vector, got shape {x.shape}")
        err = np.abs(np.linalg.norm(x, axis=-1) - 1.0)
        if not np.all(err <= atol):
            raise InvalidPointError(
                f"sphere point is not unit length (|‖x‖-1| = {np.max(err):.3g})"
            )

    def project(self, x):
        return _normalize(np.asarray(x, dtype=float))

    def frame(self, p):
        # Axis with the smallest |p_i| (argmin keeps the lowest index on ties).
        p = np.asarray(p, dtype=float)
        a = np.zeros(3)
        a[int(np.argmin(np.abs(p)))] = 1.0
        e1 = a - (a @ p) * p
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(p, e1)
        return np.stack([e1, e2])

    def inner(self, p, u, v):
        return float(np.dot(u, v))

    def exp(self, p, coords):
        p = np.asarray(p, dtype=float)
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        v = coords @ self.frame(p)
        theta = np.linalg.norm(v, axis=-1, keepdims=True)
        x = np.cos(theta) * p + np.sinc(theta / np.pi) * v
        return _normalize(x)

    def _angles(self, p, q):
        dots = q @ p
        crosses = np.linalg.norm(np.cross(p, q), axis=-1)
        return np.arctan2(crosses, dots), dots

    def log(self, p, q):
        p = np.asarray(p, dtype=float)
        q = np.atleast_2d(np.asarray(q, dtype=float))
        theta, dots = self._angles(p, q)
        bad = np.flatnonzero(theta > np.pi - CUT_LOCUS_GUARD)
        if bad.size:
            raise CutLocusError(
                f"point {bad[0]} is (nearly) antipodal to the base point; "
                f"log is undefined (distance {theta[bad[0]]:.12g})",
                index=int(bad[0]),
            )
        u = q - dots[:, None] * p
        c = u @ self.frame(p).T
        cn = np.linalg.norm(c, axis=-1)
        scale = np.divide(theta, cn, out=np.zeros_like(theta), where=cn > 0)
        return c * scale[:, None]

    def dist(self, p, q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        return self._angles(np.asarray(p, dtype=float), q)[0]

    def pairwise_dist(self, xs):
        xs = np.asarray(xs, dtype=float)
        dots = xs @ xs.T
        crosses = np.linalg.norm(np.cross(xs[:, None, :], xs[None, :, :]), axis=-1)
        d = np.arctan2(crosses, dots)
        np.fill_diagonal(d, 0.0)
        return d

    def extrinsic_mean(self, xs):
        m = np.asarray(xs, dtype=float).mean(axis=0)
        norm = np.linalg.norm(m)
        if norm < 1e-12:
            return None
        return m / norm

    def rotate(self, R, xs):
        """Apply rotation matrix ``R`` to each point of ``xs``."""
        return np.asarray(xs, dtype=float) @ np.asarray(R, dtype=float).T


SPHERE = Sphere()


@dataclass(frozen=True, eq=False)
class VmfParams:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        SPHERE.check_point(mu)
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "kappa", float(self.kappa))


def _log_sinh(kappa):
    return kappa + np.log1p(-np.exp(-2.0 * kappa)) - np.log(2.0)


def vmf_log_density(params: VmfParams, x) -> np.ndarray:
    k = params.kappa
    return np.log(k) - np.log(4 * np.pi) - _log_sinh(k) + k * (np.asarray(x) @ params.mu)


def vmf_density(params: VmfParams, x):
    """VMF density with respect to surface area on S².

    Uses the closed form ``κ / (4π sinh κ) · exp(κ μᵀx)``; above κ = 700 the
    log-domain form is used to avoid overflow in ``sinh``.
    """
    x = np.asarray(x, dtype=float)
    k = params.kappa
    if k > 700:
        out = np.exp(vmf_log_density(params, x))
    else:
        out = k / (4 * np.pi * np.sinh(k)) * np.exp(k * (x @ params.mu))
    return float(out) if np.ndim(out) == 0 else out


def vmf_sample(params: VmfParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` points from VMF(μ, κ) by inverting the CDF of ``w = μᵀx``.

    ``w = 1 + log(u + (1-u)e^{-2κ}) / κ`` with u uniform, azimuth uniform on
    [0, 2π), expressed in the tangent frame at μ. Rejection free.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    k = params.kappa
    u = rng.random(n)
    phi = 2 * np.pi * rng.random(n)
    w = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * k)) / k
    w = np.clip(w, -1.0, 1.0)
    r = np.sqrt(np.maximum(0.0, 1.0 - w * w))
    e1, e2 = SPHERE.frame(params.mu)
    x = (
        w[:, None] * params.mu
        + (r * np.cos(phi))[:, None] * e1
        + (r * np.sin(phi))[:, None] * e2
    )
    return _normalize(x)


def mean_resultant_length(xs) -> float:
    return float(np.linalg.norm(np.asarray(xs).mean(axis=0)))


def expected_resultant_length(kappa: float) -> float:
    """``coth κ − 1/κ``, the population mean resultant length of VMF on S²."""
    return 1.0 / np.tanh(kappa) - 1.0 / kappa


def max_distance_from(mu, xs, *, limit: float | None = None, warn: bool = True) -> float:
    """Largest geodesic distance from ``mu`` to any point of ``xs``.

    With ``limit`` set (e.g. π/2, the convexity radius) a warning is issued
    when the sample is not contained in the ball of that radius. Points are
    never discarded.
    """
    d = float(np.max(SPHERE.dist(mu, xs)))
    if warn and limit is not None and d >= limit:
        warnings.warn(
            f"sample extends {d:.4f} rad from the mean direction "
            f"(beyond the {limit:.4f} rad ball)",
            stacklevel=2,
        )
    return d
