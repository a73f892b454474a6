"""Riemannian covariance / correlation estimators and the dcorr baseline.

For a paired sample ``(X_k, Y_k)`` and reference point ``p`` the tangent
cross-covariance is

    Σ̂_p = (1/N) Σ_k (log_p X_k)(log_p Y_k)ᵀ − (mean log_p X)(mean log_p Y)ᵀ

expressed in the frame of :meth:`Manifold.frame` at ``p``. Σ̂ itself
depends on that frame; its trace (Rcov) and the normalised trace (Rcorr)
do not.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CutLocusError,
    DomainError,
    InvalidPointError,
    ManifoldMismatchError,
    RiemannDepError,
    SampleSizeError,
    UndefinedCorrelationError,
)
from .frechet import (
    FrechetResult,
    SolverSettings,
    frechet_mean,
    point_between,
    weight_fraction,
)
from .geometry import Manifold, ManifoldPoint, _coerce_point, as_sample

# A marginal trace below this (squared radians) counts as zero variance.
VARIANCE_FLOOR = 1e-20

POLICIES = ("common-mean", "midpoint", "weighted", "explicit")


@dataclass(frozen=True, eq=False)
class PairedSample:
    """N aligned pairs ``(xs[k], ys[k])`` on a common manifold."""

    xs: np.ndarray
    ys: np.ndarray
    manifold: Manifold | None = None

    def __post_init__(self):
        mx, xs = as_sample(self.xs, self.manifold)
        try:
            my, ys = as_sample(self.ys, self.manifold)
        except InvalidPointError:
            if self.manifold is not None:
                raise
            raise ManifoldMismatchError("the margins are not on the same manifold") from None
        if mx != my:
            raise ManifoldMismatchError("both margins must live on the same manifold")
        if len(xs) != len(ys):
            raise SampleSizeError(f"margins differ in length ({len(xs)} vs {len(ys)})")
        if len(xs) < 2:
            raise SampleSizeError(f"a paired sample needs at least 2 pairs, got {len(xs)}")
        mx.check_point(xs)
        mx.check_point(ys)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "manifold", mx)

    @property
    def n(self) -> int:
        return len(self.xs)

    def swapped(self) -> "PairedSample":
        return PairedSample(self.ys, self.xs, self.manifold)

    def permuted(self, order) -> "PairedSample":
        order = np.asarray(order)
        return PairedSample(self.xs[order], self.ys[order], self.manifold)


def _as_paired(sample) -> PairedSample:
    if isinstance(sample, PairedSample):
        return sample
    xs, ys = sample
    return PairedSample(xs, ys)


def tangent_coordinates(sample, p) -> tuple[np.ndarray, np.ndarray]:
    """``log_p`` of both margins in the frame at ``p``.

    Raises :class:`DomainError` naming the first margin/index outside the
    injectivity ball of ``p``.
    """
    sample = _as_paired(sample)
    m = sample.manifold
    p = _coerce_point(p, m)
    out = []
    for name, pts in (("x", sample.xs), ("y", sample.ys)):
        try:
            out.append(m.log(p, pts))
        except CutLocusError as exc:
            raise DomainError(
                f"{name}s[{exc.index}] is outside the domain of comparison: "
                f"its distance to the reference point reaches the injectivity "
                f"radius {m.injectivity_radius:.6g}",
                margin=name,
                index=exc.index,
            ) from exc
    return out[0], out[1]


def _cross_cov(u, v):
    n = len(u)
    return (u - u.mean(axis=0)).T @ (v - v.mean(axis=0)) / n


def sample_cross_cov(sample, p) -> np.ndarray:
    """Σ̂_p(X, Y), a ``dim × dim`` matrix in the tangent frame at ``p``."""
    u, v = tangent_coordinates(sample, p)
    return _cross_cov(u, v)


def rcov(sample, p) -> float:
    return float(np.trace(sample_cross_cov(sample, p)))


def _marginal_traces(u, v):
    return float(np.trace(_cross_cov(u, u))), float(np.trace(_cross_cov(v, v)))


def _normaliser(txx, tyy):
    if txx <= VARIANCE_FLOOR or tyy <= VARIANCE_FLOOR:
        raise UndefinedCorrelationError(
            f"zero marginal variance (Rcov(X,X)={txx:.3g}, Rcov(Y,Y)={tyy:.3g}); "
            "correlation is undefined"
        )
    return np.sqrt(txx) * np.sqrt(tyy)


def rcorr_matrix(sample, p) -> np.ndarray:
    """Σ̂_p(X,Y) / (√tr Σ̂_p(X,X) · √tr Σ̂_p(Y,Y))."""
    u, v = tangent_coordinates(sample, p)
    return _cross_cov(u, v) / _normaliser(*_marginal_traces(u, v))


def rcorr(sample, p) -> float:
    return float(np.trace(rcorr_matrix(sample, p)))


def double_center(d: np.ndarray) -> np.ndarray:
    return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()


def dcov_terms(sample) -> tuple[float, float, float]:
    """V-statistic ``(dCov²(X,Y), dCov²(X,X), dCov²(Y,Y))`` from geodesic distances."""
    sample = _as_paired(sample)
    m = sample.manifold
    a = double_center(m.pairwise_dist(sample.xs))
    b = double_center(m.pairwise_dist(sample.ys))
    return float(np.mean(a * b)), float(np.mean(a * a)), float(np.mean(b * b))


def dcorr(sample) -> float:
    """Distance correlation (biased V-statistic) with geodesic distances.

    ``sqrt(dCov²(X,Y) / sqrt(dCov²(X,X) dCov²(Y,Y)))``. On spaces that are not
    of negative type (SO(3)) dCov² may come out negative; it is then clipped
    to zero.
    """
    xy, xx, yy = dcov_terms(sample)
    if xx <= VARIANCE_FLOOR or yy <= VARIANCE_FLOOR:
        raise UndefinedCorrelationError("a margin has zero distance variance; dcorr is undefined")
    return float(np.sqrt(max(xy, 0.0) / np.sqrt(xx * yy)))


@dataclass(frozen=True, eq=False)
class DependenceReport:
    manifold: str
    n: int
    reference_point: ManifoldPoint
    point_policy: str
    sigma_hat: np.ndarray
    frame: np.ndarray
    rcov: float
    rcorr: float
    dcorr: float | None
    frechet_x: FrechetResult
    frechet_y: FrechetResult
    domain_diagnostic: dict
    weights: tuple | None = None
    pooled: FrechetResult | None = field(default=None, repr=False)

    @property
    def frechet_means(self) -> tuple[ManifoldPoint, ManifoldPoint]:
        return self.frechet_x.mean, self.frechet_y.mean

    @property
    def total_variances(self) -> tuple[float, float]:
        return self.frechet_x.total_variance, self.frechet_y.total_variance

    def to_dict(self) -> dict:
        d = {
            "manifold": self.manifold,
            "n": self.n,
            "reference-point": self.reference_point.coords.tolist(),
            "point-policy": self.point_policy,
            "weights": list(self.weights) if self.weights is not None else None,
            "sigma-hat": self.sigma_hat.tolist(),
            "frame": {
                "base-point": self.reference_point.coords.tolist(),
                "vectors": self.frame.tolist(),
            },
            "rcov": self.rcov,
            "rcorr": self.rcorr,
            "dcorr": self.dcorr,
            "frechet-means": {
                "x": self.frechet_x.mean.coords.tolist(),
                "y": self.frechet_y.mean.coords.tolist(),
            },
            "total-variances": {
                "x": self.frechet_x.total_variance,
                "y": self.frechet_y.total_variance,
            },
            "frechet-converged": {
                "x": self.frechet_x.converged,
                "y": self.frechet_y.converged,
            },
            "domain-diagnostic": dict(self.domain_diagnostic),
        }
        if self.pooled is not None:
            d["pooled-mean"] = self.pooled.to_dict()
        return d


def _domain_diagnostic(m: Manifold, p, sample, rx, ry) -> dict:
    max_d = float(max(np.max(m.dist(p, sample.xs)), np.max(m.dist(p, sample.ys))))
    means_d = float(m.dist(rx.mean.coords, ry.mean.coords[None])[0])
    return {
        "max-distance": max_d,
        "injectivity-radius": m.injectivity_radius,
        "within-domain": bool(max_d < m.injectivity_radius),
        "means-distance": means_d,
        "convexity-radius": m.convexity_radius,
        "means-within-convexity-radius": bool(means_d < m.convexity_radius),
    }


def evaluate_dependence(
    sample,
    policy: str = "midpoint",
    weights: tuple[float, float] | None = None,
    point=None,
    *,
    settings: SolverSettings | None = None,
    with_dcorr: bool = True,
    warn: bool = True,
) -> DependenceReport:
    """Choose a reference point by ``policy`` and compute every estimator there.

    ``common-mean``: Fréchet mean of the pooled 2N observations.
    ``midpoint``: midpoint of the geodesic between the two margin means.
    ``weighted``: ``γ(w1/(w1+w2))`` on that geodesic (γ(0) = X mean); when
    ``weights`` is omitted the margins' Fréchet total variances are used.
    ``explicit``: the user-supplied ``point``.
    """
    sample = _as_paired(sample)
    m = sample.manifold
    if policy == "point":
        policy = "explicit"
    if policy not in POLICIES:
        raise RiemannDepError(f"unknown point policy {policy!r}; expected one of {POLICIES}")

    rx = frechet_mean(sample.xs, settings, m, warn=warn)
    ry = frechet_mean(sample.ys, settings, m, warn=warn)
    pooled = None
    if policy == "common-mean":
        pooled = frechet_mean(np.concatenate([sample.xs, sample.ys]), settings, m, warn=warn)
        ref = pooled.mean
    elif policy == "midpoint":
        ref = point_between(rx.mean, ry.mean, 0.5)
    elif policy == "weighted":
        if weights is None:
            weights = (rx.total_variance, ry.total_variance)
        weights = (float(weights[0]), float(weights[1]))
        ref = point_between(rx.mean, ry.mean, weight_fraction(*weights))
    else:
        if point is None:
            raise RiemannDepError("policy 'explicit' needs a reference point")
        ref = ManifoldPoint(m.tag, _coerce_point(point, m))
    if policy != "weighted":
        weights = None

    u, v = tangent_coordinates(sample, ref)
    sigma = _cross_cov(u, v)
    r_cov = float(np.trace(sigma))
    r_corr = r_cov / _normaliser(*_marginal_traces(u, v))

    d_corr = None
    if with_dcorr:
        try:
            d_corr = dcorr(sample)
        except UndefinedCorrelationError:
            d_corr = None

    return DependenceReport(
        manifold=m.tag,
        n=sample.n,
        reference_point=ref,
        point_policy=policy,
        sigma_hat=sigma,
        frame=m.frame(ref.coords),
        rcov=r_cov,
        rcorr=float(r_corr),
        dcorr=d_corr,
        frechet_x=rx,
        frechet_y=ry,
        domain_diagnostic=_domain_diagnostic(m, ref.coords, sample, rx, ry),
        weights=weights,
        pooled=pooled,
    )


def reflect_through(p, xs, manifold=None) -> np.ndarray:
    """Geodesic reflection ``exp_p(−log_p x)`` of each point of ``xs``."""
    m, xs = as_sample(xs, manifold if manifold is not None else (
        p.manifold if isinstance(p, ManifoldPoint) else None))
    p = _coerce_point(p, m)
    return m.exp(p, -m.log(p, xs))
