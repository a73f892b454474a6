"""Fréchet functions, sample Fréchet (Karcher) means and evaluation points."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySampleError, NonUniqueMeanError, RiemannDepError
from .geometry import Manifold, ManifoldPoint, _coerce_point, as_sample

EXACT_DIAMETER_LIMIT = 2000


class FrechetUniquenessWarning(UserWarning):
    """The sample is not contained in a convex ball, so the mean may not be unique."""


@dataclass(frozen=True)
class SolverSettings:
    """Karcher iteration ``μ ← exp_μ(τ · mean_k log_μ X_k)``.

    ``tol`` is the stopping threshold on the norm of the mean log vector
    (the Riemannian gradient of F₂/2). The step τ starts at ``step`` every
    iteration and is halved while F₂ would increase.
    """

    tol: float = 1e-10
    max_iter: int = 1000
    step: float = 1.0
    max_halvings: int = 30

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.step <= 1:
            raise ValueError("step must be in (0, 1]")


@dataclass(frozen=True)
class FrechetResult:
    mean: ManifoldPoint
    total_variance: float
    iterations: int
    gradient_norm: float
    converged: bool
    diameter: float
    diameter_exact: bool
    n: int
    radius: float = 0.0
    f_history: tuple = field(default=(), repr=False)

    @property
    def in_convex_ball(self) -> bool:
        """Every sample point lies strictly within the convexity radius of the mean.

        The diameter alone cannot decide this: on S² and SO(3) no two points
        are farther apart than π = 2·conv, so a diameter test never fires.
        """
        return self.radius < self.mean.space.convexity_radius

    def to_dict(self) -> dict:
        return {
            "manifold": self.mean.manifold,
            "mean": self.mean.coords.tolist(),
            "total-variance": self.total_variance,
            "iterations": self.iterations,
            "final-gradient-norm": self.gradient_norm,
            "converged": self.converged,
            "n": self.n,
            "diameter": self.diameter,
            "diameter-exact": self.diameter_exact,
            "max-distance-from-mean": self.radius,
            "in-convex-ball": self.in_convex_ball,
        }


def frechet_function(points, p, r: float = 2.0, manifold=None) -> float:
    """Empirical Fréchet function ``mean_k d(X_k, p)^r``."""
    m, xs = as_sample(points, manifold if manifold is not None else _tag_of(p))
    if len(xs) == 0:
        raise EmptySampleError("Fréchet function of an empty sample")
    if not r > 0:
        raise ValueError("r must be positive")
    p = _coerce_point(p, m)
    return float(np.mean(m.dist(p, xs) ** r))


def _tag_of(p):
    return p.manifold if isinstance(p, ManifoldPoint) else None


def sample_diameter(m: Manifold, xs, center=None) -> tuple[float, bool]:
    """Largest pairwise distance; exact for small samples.

    Above ``EXACT_DIAMETER_LIMIT`` points only the points farthest from
    ``center`` are compared, which gives a lower bound that is attained
    whenever a diametral pair sits on the outer shell of the sample.
    """
    xs = np.asarray(xs)
    if len(xs) <= EXACT_DIAMETER_LIMIT:
        return float(np.max(m.pairwise_dist(xs))), True
    if center is None:
        center = xs[0]
    far = np.argsort(m.dist(center, xs))[-EXACT_DIAMETER_LIMIT:]
    return float(np.max(m.pairwise_dist(xs[np.sort(far)]))), False


def frechet_mean(
    points,
    settings: SolverSettings | None = None,
    manifold=None,
    *,
    warn: bool = True,
) -> FrechetResult:
    """Sample Fréchet mean by fixed-point (Karcher) iteration.

    Starts from the normalised extrinsic average. Non-convergence within
    ``settings.max_iter`` iterations is reported through
    ``FrechetResult.converged``; reaching the cut locus of a sample point
    raises :class:`~riemann_dep.errors.CutLocusError`.
    """
    settings = settings or SolverSettings()
    m, xs = as_sample(points, manifold)
    n = len(xs)
    if n == 0:
        raise EmptySampleError("Fréchet mean of an empty sample")
    if n == 1:
        return FrechetResult(ManifoldPoint(m.tag, xs[0]), 0.0, 0, 0.0, True, 0.0, True, 1, 0.0)

    mu = m.extrinsic_mean(xs)
    if mu is None:
        raise NonUniqueMeanError("extrinsic mean vanishes; the sample has no unique Fréchet mean")

    logs = m.log(mu, xs)
    grad = logs.mean(axis=0)
    f = float(np.mean(np.einsum("ij,ij->i", logs, logs)))
    history = [f]
    converged = False
    it = 0
    for it in range(settings.max_iter + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm < settings.tol:
            converged = True
            break
        if it == settings.max_iter:
            break
        tau = settings.step
        for _ in range(settings.max_halvings + 1):
            cand = m.exp(mu, tau * grad)[0]
            cand_logs = m.log(cand, xs)
            cand_f = float(np.mean(np.einsum("ij,ij->i", cand_logs, cand_logs)))
            # roundoff slack: near the optimum F changes below machine precision
            if cand_f <= f * (1 + 1e-12):
                break
            tau *= 0.5
        else:
            break
        mu, logs, f = cand, cand_logs, cand_f
        grad = logs.mean(axis=0)
        history.append(f)

    mean = ManifoldPoint(m.tag, mu)
    diameter, exact = sample_diameter(m, xs, mu)
    result = FrechetResult(
        mean=mean,
        total_variance=frechet_function(xs, mu, 2.0, m),
        iterations=it,
        gradient_norm=float(np.linalg.norm(grad)),
        converged=converged,
        diameter=diameter,
        diameter_exact=exact,
        n=n,
        radius=float(np.max(m.dist(mu, xs))),
        f_history=tuple(history),
    )
    if warn and not result.in_convex_ball:
        warnings.warn(
            f"sample reaches {result.radius:.4f} rad from its mean, beyond the convexity "
            f"radius {m.convexity_radius:.4f}; the Fréchet mean may not be unique",
            FrechetUniquenessWarning,
            stacklevel=2,
        )
    if warn and not converged:
        warnings.warn(
            f"Fréchet mean did not converge after {it} iterations "
            f"(gradient norm {result.gradient_norm:.3g})",
            RuntimeWarning,
            stacklevel=2,
        )
    return result


def pooled_frechet_mean(sample_x, sample_y, settings=None, manifold=None, *, warn=True):
    """Fréchet mean of the 2N observations of both margins together."""
    mx, xs = as_sample(sample_x, manifold)
    my, ys = as_sample(sample_y, mx)
    return frechet_mean(np.concatenate([xs, ys]), settings, mx, warn=warn)


def point_between(mu: ManifoldPoint, nu: ManifoldPoint, t: float) -> ManifoldPoint:
    """``γ(t)`` on the minimising geodesic with γ(0)=μ and γ(1)=ν."""
    m = mu.space
    return ManifoldPoint(m.tag, m.geodesic(mu.coords, nu.coords, float(t)))


def _margin_means(sample_x, sample_y, settings, manifold, warn):
    mx, xs = as_sample(sample_x, manifold)
    _, ys = as_sample(sample_y, mx)
    rx = frechet_mean(xs, settings, mx, warn=warn)
    ry = frechet_mean(ys, settings, mx, warn=warn)
    return rx, ry


def midpoint_of_means(sample_x, sample_y, settings=None, manifold=None, *, warn=True):
    rx, ry = _margin_means(sample_x, sample_y, settings, manifold, warn)
    return point_between(rx.mean, ry.mean, 0.5)


def weight_fraction(w1: float, w2: float) -> float:
    if not (w1 > 0 and w2 > 0):
        raise RiemannDepError(f"weights must be positive, got ({w1}, {w2})")
    return w1 / (w1 + w2)


def weighted_point_of_means(sample_x, sample_y, w1, w2, settings=None, manifold=None, *, warn=True):
    """``γ(w1 / (w1 + w2))`` on the geodesic from the X mean to the Y mean."""
    t = weight_fraction(w1, w2)
    rx, ry = _margin_means(sample_x, sample_y, settings, manifold, warn)
    return point_between(rx.mean, ry.mean, t)
