"""SO(3) with the bi-invariant metric ⟨X, Y⟩ = ½ tr(XYᵀ).

Tangent coordinates use the identification ``phi`` of R³ with skew matrices

    phi(x, y, z) = [[ 0,  x,  y],
                    [-x,  0,  z],
                    [-y, -z,  0]]

which is *not* the usual hat map: ``phi(A) = hat((-z, y, -x))``. Under this
metric ``‖A‖ = ‖phi(A)‖_F / √2`` and the geodesic distance between two
rotations is the angle of the relative rotation. The frame at ``R`` is the
left translation ``R·phi(e_k)``, so ``log_R(Q) = phi_inv(logm(RᵀQ))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CutLocusError, InvalidPointError
from .geometry import CUT_LOCUS_GUARD, Manifold, ManifoldPoint

ORTHO_ATOL = 1e-10
SKEW_ATOL = 1e-10
QUAT_ATOL = 1e-12
QUAT_RENORM_ATOL = 1e-6

_SMALL_ANGLE = 1e-7
_NEAR_PI = 1e-4


def phi(A) -> np.ndarray:
    """Skew matrix of a 3-vector (vectorised over leading axes)."""
    A = np.asarray(A, dtype=float)
    x, y, z = A[..., 0], A[..., 1], A[..., 2]
    zero = np.zeros_like(x)
    return np.stack(
        [
            np.stack([zero, x, y], axis=-1),
            np.stack([-x, zero, z], axis=-1),
            np.stack([-y, -z, zero], axis=-1),
        ],
        axis=-2,
    )


def _phi_inv_unchecked(S):
    return np.stack([S[..., 0, 1], S[..., 0, 2], S[..., 1, 2]], axis=-1)


def phi_inv(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if not np.allclose(S, -np.swapaxes(S, -1, -2), rtol=0.0, atol=SKEW_ATOL):
        raise InvalidPointError("matrix is not skew-symmetric")
    return _phi_inv_unchecked(S)


def _hat_axis(u):
    # phi(u) == hat(w) with w = (-u3, u2, -u1); the map is an involution up to sign.
    return np.stack([-u[..., 2], u[..., 1], -u[..., 0]], axis=-1)


def so3_exp(A) -> np.ndarray:
    """Matrix exponential of ``phi(A)`` by Rodrigues' formula.

    Accepts a 3-vector or a stack ``(N, 3)``. For ‖A‖ < 1e-6 the cubic
    Taylor polynomial is used instead of the closed form.
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 1
    A = np.atleast_2d(A)
    K = phi(A)
    theta = np.linalg.norm(A, axis=-1)
    K2 = K @ K
    small = theta < 1e-6
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    R = np.eye(3) + a[:, None, None] * K + b[:, None, None] * K2
    return R[0] if single else R


def rotation_angle(R) -> np.ndarray:
    """Rotation angle in [0, π], robust at both ends of the range."""
    R = np.asarray(R, dtype=float)
    s = _phi_inv_unchecked(0.5 * (R - np.swapaxes(R, -1, -2)))
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(np.linalg.norm(s, axis=-1), c)


def _log_unchecked(R):
    """Batch ``phi_inv(logm(R))`` and the rotation angles."""
    R = np.asarray(R, dtype=float)
    s = _phi_inv_unchecked(0.5 * (R - np.swapaxes(R, -1, -2)))
    sin_t = np.linalg.norm(s, axis=-1)
    cos_t = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(sin_t, cos_t)

    out = np.empty_like(s)
    small = theta < _SMALL_ANGLE
    out[small] = s[small]
    regular = ~small & (theta <= np.pi - _NEAR_PI)
    out[regular] = s[regular] * (theta[regular] / sin_t[regular])[:, None]

    for i in np.flatnonzero(theta > np.pi - _NEAR_PI):
        # Symmetric part is cos·I + (1-cos)·wwᵀ with w the hat-map unit axis.
        c = cos_t[i]
        B = (0.5 * (R[i] + R[i].T) - c * np.eye(3)) / (1.0 - c)
        j = int(np.argmax(np.diag(B)))
        w = B[:, j] / np.sqrt(B[j, j])
        u = _hat_axis(w)
        if u @ s[i] < 0:
            u = -u
        out[i] = theta[i] * u
    return out, theta


def so3_log(R) -> np.ndarray:
    """Inverse of :func:`so3_exp` for rotation angles below π − 1e-8."""
    R = np.asarray(R, dtype=float)
    single = R.ndim == 2
    out, theta = _log_unchecked(R[None] if single else R)
    bad = np.flatnonzero(theta > np.pi - CUT_LOCUS_GUARD)
    if bad.size:
        raise CutLocusError(
            f"rotation {bad[0]} has angle {theta[bad[0]]:.12g}, at the cut locus",
            index=int(bad[0]),
        )
    return out[0] if single else out


def polar_project(M) -> np.ndarray:
    """Nearest rotation(s) in Frobenius norm (polar factor with det +1)."""
    M = np.asarray(M, dtype=float)
    U, _, Vt = np.linalg.svd(M)
    d = np.sign(np.linalg.det(U @ Vt))
    U = U.copy()
    U[..., :, 2] *= d[..., None]
    return U @ Vt


class SO3(Manifold):
    tag = "so3"
    dim = 3
    ambient_shape = (3, 3)

    def check_point(self, x, atol=ORTHO_ATOL):
        x = np.asarray(x, dtype=float)
        if x.shape[-2:] != (3, 3):
            raise InvalidPointError(f"so3 point must be 3x3, got shape {x.shape}")
        gram = np.swapaxes(x, -1, -2) @ x
        if not np.allclose(gram, np.eye(3), rtol=0.0, atol=atol):
            raise InvalidPointError("matrix is not orthogonal (RᵀR ≠ I)")
        if not np.allclose(np.linalg.det(x), 1.0, rtol=0.0, atol=atol):
            raise InvalidPointError("matrix has determinant -1 (improper rotation)")

    def project(self, x):
        return polar_project(x)

    def frame(self, p):
        return np.asarray(p, dtype=float) @ phi(np.eye(3))

    def inner(self, p, u, v):
        return 0.5 * float(np.trace(u @ np.asarray(v).T))

    def exp(self, p, coords):
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        return polar_project(np.asarray(p, dtype=float) @ so3_exp(coords))

    def _relative(self, p, q):
        q = np.asarray(q, dtype=float)
        if q.ndim == 2:
            q = q[None]
        return np.einsum("ji,njk->nik", np.asarray(p, dtype=float), q)

    def log(self, p, q):
        return so3_log(self._relative(p, q))

    def dist(self, p, q):
        return rotation_angle(self._relative(p, q))

    def pairwise_dist(self, xs):
        xs = np.asarray(xs, dtype=float)
        n = len(xs)
        # every XᵢᵀXⱼ from one (3n×3)(3×3n) product
        rel = (xs.transpose(0, 2, 1).reshape(3 * n, 3) @ xs.transpose(1, 0, 2).reshape(3, 3 * n))
        rel = rel.reshape(n, 3, n, 3).transpose(0, 2, 1, 3)
        d = rotation_angle(rel)
        np.fill_diagonal(d, 0.0)
        return d

    def extrinsic_mean(self, xs):
        return polar_project(np.asarray(xs, dtype=float).mean(axis=0))

    def rotate(self, B, xs):
        """Left translation ``B·X`` of each rotation in ``xs``."""
        return np.asarray(B, dtype=float) @ np.asarray(xs, dtype=float)


SO3_SPACE = SO3()


@dataclass(frozen=True, eq=False)
class Quaternion:
    """Scalar-first quaternion ``a + bi + cj + dk``."""

    a: float
    b: float
    c: float
    d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=float)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


@dataclass(frozen=True, eq=False)
class AxisAngle:
    axis: np.ndarray
    angle: float

    def __post_init__(self):
        axis = np.array(self.axis, dtype=float)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > QUAT_ATOL:
            raise InvalidPointError("rotation axis must be a unit 3-vector")
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "angle", float(self.angle))

    @classmethod
    def normalized(cls, axis, angle) -> "AxisAngle":
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise InvalidPointError("rotation axis must be nonzero")
        return cls(axis / norm, angle)

    def quaternion(self) -> Quaternion:
        h = 0.5 * self.angle
        s = np.sin(h)
        return Quaternion(np.cos(h), *(self.axis * s))


def quaternion_matrix(q) -> np.ndarray:
    """Rotation matrix of unit quaternion(s) ``(..., 4)``, scalar first.

    The layout is taken as published for the simulation model; it is the
    transpose of the common active-rotation convention, i.e. it rotates by
    −θ about the axis in that convention. No normalisation is done here.
    """
    q = np.asarray(q, dtype=float)
    a, b, c, d = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack(
        [
            np.stack([a * a + b * b - c * c - d * d, 2 * (b * c + a * d), 2 * (b * d - a * c)], -1),
            np.stack([2 * (b * c - a * d), a * a + c * c - b * b - d * d, 2 * (c * d + a * b)], -1),
            np.stack([2 * (b * d + a * c), 2 * (c * d - a * b), a * a + d * d - b * b - c * c], -1),
        ],
        axis=-2,
    )


def quaternion_to_rotation(q: Quaternion) -> ManifoldPoint:
    arr = q.as_array()
    norm = np.linalg.norm(arr)
    if abs(norm - 1.0) > QUAT_RENORM_ATOL:
        raise InvalidPointError(f"quaternion is not unit length (norm {norm:.9g})")
    return ManifoldPoint("so3", quaternion_matrix(arr / norm))


def axis_angle_to_rotation(aa: AxisAngle) -> ManifoldPoint:
    return quaternion_to_rotation(aa.quaternion())


def axis_angle_matrices(axes, angles) -> np.ndarray:
    """Vectorised :func:`axis_angle_to_rotation` for unit axes ``(N, 3)``."""
    axes = np.asarray(axes, dtype=float)
    h = 0.5 * np.asarray(angles, dtype=float)
    h = np.broadcast_to(h, axes.shape[:-1])
    q = np.concatenate([np.cos(h)[..., None], axes * np.sin(h)[..., None]], axis=-1)
    return quaternion_matrix(q)
