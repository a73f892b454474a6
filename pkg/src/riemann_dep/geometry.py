"""Manifold abstraction shared by the sphere and rotation-group geometries.

Heavy lifting happens in vectorised :class:`Manifold` methods that take a
single base point and a stack of points (shape ``(N, *ambient_shape)``).
The typed :class:`ManifoldPoint` / :class:`TangentVector` wrappers and the
module-level functions (:func:`exp_map`, :func:`log_map`, ...) are the
single-point public surface built on top of them.

Tangent vectors are stored as coordinates in a fixed orthonormal frame of
the tangent space (see :meth:`Manifold.frame`), so the Euclidean norm of
the coordinates is the Riemannian norm.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BaseMismatchError, InvalidPointError, ManifoldMismatchError

CUT_LOCUS_GUARD = 1e-8

_REGISTRY: dict[str, type["Manifold"]] = {}


class Manifold:
    """Base class for a compact Riemannian manifold embedded in matrices."""

    tag: str = ""
    dim: int = 0
    ambient_shape: tuple[int, ...] = ()
    injectivity_radius: float = np.pi
    convexity_radius: float = np.pi / 2

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.tag:
            _REGISTRY[cls.tag] = cls

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return isinstance(other, Manifold) and other.tag == self.tag

    def __hash__(self):
        return hash(self.tag)

    # -- to be provided by subclasses ---------------------------------
    def check_point(self, x, atol=None) -> None:
        raise NotImplementedError

    def project(self, x):
        """Nearest manifold point(s) to ambient array ``x``."""
        raise NotImplementedError

    def frame(self, p):
        """Orthonormal tangent frame at ``p``, shape ``(dim, *ambient_shape)``."""
        raise NotImplementedError

    def exp(self, p, coords):
        raise NotImplementedError

    def log(self, p, q):
        raise NotImplementedError

    def dist(self, p, q):
        raise NotImplementedError

    def pairwise_dist(self, xs):
        raise NotImplementedError

    def extrinsic_mean(self, xs):
        raise NotImplementedError

    def inner(self, p, u, v):
        """Metric inner product of ambient tangent vectors ``u``, ``v`` at ``p``."""
        raise NotImplementedError

    # -- shared helpers ------------------------------------------------
    def geodesic(self, p, q, t):
        """Point at fraction ``t`` along the minimising geodesic from p to q."""
        v = self.log(p, q[None])[0]
        return self.exp(p, (t * v)[None])[0]

    def as_points(self, xs):
        xs = np.asarray(xs, dtype=float)
        if xs.shape == self.ambient_shape:
            xs = xs[None]
        if xs.shape[1:] != self.ambient_shape:
            raise InvalidPointError(
                f"expected points of shape {self.ambient_shape} for {self.tag}, "
                f"got array of shape {xs.shape}"
            )
        return xs


def get_manifold(tag: str) -> Manifold:
    try:
        return _REGISTRY[tag]()
    except KeyError:
        raise ManifoldMismatchError(
            f"unknown manifold {tag!r}; expected one of {sorted(_REGISTRY)}"
        ) from None


def infer_manifold(xs) -> Manifold:
    """Guess the manifold from the trailing array shape: (3,) sphere, (3, 3) so3."""
    shape = np.shape(xs)
    for cls in _REGISTRY.values():
        k = len(cls.ambient_shape)
        if k and tuple(shape[-k:]) == cls.ambient_shape and len(shape) in (k, k + 1):
            return cls()
    raise InvalidPointError(f"cannot infer a manifold from array shape {shape}")


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    """A point on S² (unit 3-vector) or SO(3) (rotation matrix)."""

    manifold: str
    coords: np.ndarray

    def __post_init__(self):
        m = get_manifold(self.manifold)
        x = np.array(self.coords, dtype=float)
        m.check_point(x)
        x.setflags(write=False)
        object.__setattr__(self, "coords", x)

    @property
    def space(self) -> Manifold:
        return get_manifold(self.manifold)

    def allclose(self, other: "ManifoldPoint", atol=1e-12) -> bool:
        return self.manifold == other.manifold and np.allclose(
            self.coords, other.coords, rtol=0.0, atol=atol
        )

    def same_as(self, other: "ManifoldPoint") -> bool:
        return self.manifold == other.manifold and np.array_equal(
            self.coords, other.coords
        )

    def __repr__(self):
        return f"ManifoldPoint({self.manifold!r}, {self.coords.tolist()})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Coordinates of a tangent vector at ``base`` in ``tangent_basis(base)``."""

    base: ManifoldPoint
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        dim = self.base.space.dim
        if c.shape != (dim,):
            raise InvalidPointError(
                f"{self.base.manifold} tangent coordinates must have length {dim}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def ambient(self) -> np.ndarray:
        """The vector in ambient coordinates (3-vector or 3×3 matrix)."""
        frame = self.base.space.frame(self.base.coords)
        return np.tensordot(self.coords, frame, axes=1)

    def __repr__(self):
        return f"TangentVector(base={self.base!r}, coords={self.coords.tolist()})"


def point(manifold: str, coords) -> ManifoldPoint:
    return ManifoldPoint(manifold, coords)


def as_sample(points, manifold: Manifold | str | None = None):
    """Normalise a sample to ``(Manifold, ndarray)``.

    ``points`` may be an ndarray of stacked ambient coordinates or a sequence
    of :class:`ManifoldPoint`.
    """
    if isinstance(manifold, str):
        manifold = get_manifold(manifold)
    if isinstance(points, ManifoldPoint):
        points = [points]
    if isinstance(points, Sequence) and points and isinstance(points[0], ManifoldPoint):
        tags = {p.manifold for p in points}
        if len(tags) != 1:
            raise ManifoldMismatchError(f"sample mixes manifolds {sorted(tags)}")
        (tag,) = tags
        if manifold is not None and manifold.tag != tag:
            raise ManifoldMismatchError(f"expected {manifold.tag} points, got {tag}")
        manifold = get_manifold(tag)
        return manifold, np.stack([p.coords for p in points])
    if manifold is None:
        manifold = infer_manifold(points)
    return manifold, manifold.as_points(points)


def _coerce_point(p, manifold: Manifold) -> np.ndarray:
    if isinstance(p, ManifoldPoint):
        if p.manifold != manifold.tag:
            raise ManifoldMismatchError(f"expected a {manifold.tag} point, got {p.manifold}")
        return p.coords
    x = np.asarray(p, dtype=float)
    manifold.check_point(x)
    return x


def _same_manifold(p: ManifoldPoint, q: ManifoldPoint) -> Manifold:
    if p.manifold != q.manifold:
        raise ManifoldMismatchError(f"cannot combine {p.manifold} and {q.manifold} points")
    return p.space


def exp_map(p: ManifoldPoint, v: TangentVector) -> ManifoldPoint:
    if not v.base.same_as(p):
        raise BaseMismatchError("tangent vector is not based at p")
    x = p.space.exp(p.coords, v.coords[None])[0]
    return ManifoldPoint(p.manifold, x)


def log_map(p: ManifoldPoint, q: ManifoldPoint) -> TangentVector:
    m = _same_manifold(p, q)
    return TangentVector(p, m.log(p.coords, q.coords[None])[0])


def distance(p: ManifoldPoint, q: ManifoldPoint) -> float:
    m = _same_manifold(p, q)
    return float(m.dist(p.coords, q.coords[None])[0])


def geodesic_point(p: ManifoldPoint, q: ManifoldPoint, t: float) -> ManifoldPoint:
    """``exp_p(t · log_p q)``; t=0 gives p, t=1 gives q."""
    m = _same_manifold(p, q)
    if t == 0:
        return p
    if t == 1:
        return q
    return ManifoldPoint(p.manifold, m.geodesic(p.coords, q.coords, float(t)))


def tangent_basis(p: ManifoldPoint) -> list[np.ndarray]:
    return list(p.space.frame(p.coords))


def gram_matrix(p: ManifoldPoint) -> np.ndarray:
    m = p.space
    frame = m.frame(p.coords)
    return np.array([[m.inner(p.coords, u, v) for v in frame] for u in frame])


def constants(manifold: str | Manifold) -> dict[str, float]:
    m = get_manifold(manifold) if isinstance(manifold, str) else manifold
    return {
        "injectivity-radius": m.injectivity_radius,
        "convexity-radius": m.convexity_radius,
    }
