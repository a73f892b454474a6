import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    cross_cov_uncentred,
    dcorr_bruteforce,
    random_rotation,
    random_unit,
    so3_dist_arccos,
    sphere_dist_arccos,
)
from riemann_dep.dataio import load_schema
from riemann_dep.dependence import (
    PairedSample,
    dcorr,
    dcov_terms,
    evaluate_dependence,
    rcorr,
    rcorr_matrix,
    rcov,
    reflect_through,
    sample_cross_cov,
    tangent_coordinates,
)
from riemann_dep.errors import (
    DomainError,
    ManifoldMismatchError,
    RiemannDepError,
    SampleSizeError,
    UndefinedCorrelationError,
)
from riemann_dep.frechet import frechet_function, frechet_mean
from riemann_dep.rng import make_rng
from riemann_dep.so3 import SO3_SPACE, so3_exp
from riemann_dep.sphere import SPHERE, VmfParams, vmf_sample

POLE = np.array([0.0, 0.0, 1.0])
seeds = st.integers(0, 2**32 - 1)
pytestmark = pytest.mark.filterwarnings("ignore::riemann_dep.frechet.FrechetUniquenessWarning")


def sphere_pair(seed, n=40, noise=0.3, kappa=6.0):
    rng = np.random.default_rng(seed)
    xs = vmf_sample(VmfParams(POLE, kappa), n, make_rng(seed))
    ys = xs + noise * rng.normal(size=xs.shape)
    return PairedSample(xs, ys / np.linalg.norm(ys, axis=1, keepdims=True))


def so3_pair(seed, n=40, noise=0.3, spread=0.5):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, 3)) * spread
    return PairedSample(so3_exp(A), so3_exp(A + noise * rng.normal(size=(n, 3))))


PAIR = {"sphere": sphere_pair, "so3": so3_pair}


def near_point(tag, rng, scale=0.3):
    """A reference point close enough that every sample point is in its domain."""
    if tag == "sphere":
        v = POLE + scale * rng.normal(size=3)
        return v / np.linalg.norm(v)
    return so3_exp(scale * rng.normal(size=3))


# -- PairedSample ---------------------------------------------------------------


def test_paired_sample_validation():
    xs = random_unit(np.random.default_rng(0), 5)
    with pytest.raises(SampleSizeError):
        PairedSample(xs, xs[:4])
    with pytest.raises(SampleSizeError):
        PairedSample(xs[:1], xs[:1])
    with pytest.raises(ManifoldMismatchError):
        PairedSample(xs, np.stack([np.eye(3)] * 5))
    s = PairedSample(xs, xs)
    assert s.n == 5 and s.manifold.tag == "sphere"


# -- cross-covariance -------------------------------------------------------------


def test_cross_cov_hand_sample():
    xs = np.array([[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], [0.0, 0.6, 0.8]])
    ys = np.array([[0.0, 0.0, 1.0], [0.0, -0.6, 0.8], [0.8, 0.0, 0.6]])
    # at the pole the frame is e_x, e_y and log is angle·(unit horizontal direction)
    a, b = math.atan2(0.6, 0.8), math.atan2(0.8, 0.6)
    u = np.array([[0.0, 0.0], [a, 0.0], [0.0, a]])
    v = np.array([[0.0, 0.0], [0.0, -a], [b, 0.0]])
    expected = sum(np.outer(u[k], v[k]) for k in range(3)) / 3 - np.outer(u.mean(0), v.mean(0))
    np.testing.assert_allclose(sample_cross_cov(PairedSample(xs, ys), POLE), expected, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["sphere", "so3"]))
def test_cross_cov_matches_term_by_term_formula(seed, tag):
    rng = np.random.default_rng(seed)
    sample = PAIR[tag](seed)
    p = near_point(tag, rng)
    u, v = tangent_coordinates(sample, p)
    np.testing.assert_allclose(sample_cross_cov(sample, p), cross_cov_uncentred(u, v), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["sphere", "so3"]))
def test_symmetry_and_psd(seed, tag):
    rng = np.random.default_rng(seed)
    s = PAIR[tag](seed)
    p = near_point(tag, rng)
    np.testing.assert_allclose(sample_cross_cov(s, p), sample_cross_cov(s.swapped(), p).T, atol=1e-15)
    assert abs(rcov(s, p) - rcov(s.swapped(), p)) < 1e-12
    sxx = sample_cross_cov(PairedSample(s.xs, s.xs), p)
    np.testing.assert_allclose(sxx, sxx.T, atol=1e-15)
    assert np.min(np.linalg.eigvalsh(sxx)) > -1e-15


def test_constant_margin():
    xs = np.tile([0.6, 0.0, 0.8], (6, 1))
    ys = random_unit(np.random.default_rng(1), 6) * np.array([0.2, 0.2, 1.0])
    ys /= np.linalg.norm(ys, axis=1, keepdims=True)
    ys[:, 2] = np.abs(ys[:, 2])
    s = PairedSample(xs, ys)
    np.testing.assert_allclose(sample_cross_cov(s, POLE), 0.0, atol=1e-15)
    assert abs(rcov(PairedSample(xs, xs), POLE)) < 1e-15
    with pytest.raises(UndefinedCorrelationError):
        rcorr(s, POLE)


@pytest.mark.parametrize("tag", ["sphere", "so3"])
def test_trace_identity(tag, rng):
    s = PAIR[tag](3)
    for _ in range(20):
        p = near_point(tag, rng, 0.5)
        u, _ = tangent_coordinates(s, p)
        lhs = rcov(PairedSample(s.xs, s.xs), p)
        rhs = frechet_function(s.xs, p, 2.0, s.manifold) - float(np.sum(u.mean(0) ** 2))
        assert abs(lhs - rhs) < 1e-12


@pytest.mark.parametrize("tag", ["sphere", "so3"])
def test_auto_covariance_at_mean_is_total_variance(tag):
    s = PAIR[tag](4)
    res = frechet_mean(s.xs)
    assert rcov(PairedSample(s.xs, s.xs), res.mean) == pytest.approx(res.total_variance, abs=1e-9)


def test_domain_error_names_offender():
    xs = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    ys = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]])
    with pytest.raises(DomainError) as info:
        rcov(PairedSample(xs, ys), POLE)
    assert info.value.margin == "y" and info.value.index == 2
    assert "ys[2]" in str(info.value)


# -- correlation -------------------------------------------------------------------


@pytest.mark.parametrize("tag", ["sphere", "so3"])
def test_self_correlation_is_one(tag, rng):
    s = PAIR[tag](5)
    p = near_point(tag, rng)
    same = PairedSample(s.xs, s.xs)
    assert rcorr(same, p) == pytest.approx(1.0, abs=1e-12)
    assert np.trace(rcorr_matrix(same, p)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["sphere", "so3"]))
def test_reflection_flips_sign(seed, tag):
    rng = np.random.default_rng(seed)
    s = PAIR[tag](seed)
    p = near_point(tag, rng)
    flipped = PairedSample(s.xs, reflect_through(p, s.ys, s.manifold))
    assert rcorr(flipped, p) == pytest.approx(-rcorr(s, p), abs=1e-12)
    assert rcorr(PairedSample(s.xs, reflect_through(p, s.xs, s.manifold)), p) == pytest.approx(-1, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["sphere", "so3"]))
def test_matrix_trace_and_bound(seed, tag):
    rng = np.random.default_rng(seed)
    s = PAIR[tag](seed, noise=rng.uniform(0, 2))
    p = near_point(tag, rng)
    r = rcorr(s, p)
    assert abs(r) <= 1 + 1e-12
    assert np.trace(rcorr_matrix(s, p)) == pytest.approx(r, abs=1e-12)


def test_trace_is_frame_independent(rng):
    s = sphere_pair(6)
    u, v = tangent_coordinates(s, POLE)
    a = rng.uniform(0, 2 * math.pi)
    Q = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    sig = sample_cross_cov(s, POLE)
    sig_q = cross_cov_uncentred(u @ Q.T, v @ Q.T)
    assert not np.allclose(sig, sig_q)
    assert np.trace(sig_q) == pytest.approx(np.trace(sig), abs=1e-14)


def test_isometry_invariance(rng):
    s = sphere_pair(7)
    R = random_rotation(rng)
    a = evaluate_dependence(s, "midpoint").rcorr
    b = evaluate_dependence(PairedSample(s.xs @ R.T, s.ys @ R.T), "midpoint").rcorr
    assert a == pytest.approx(b, abs=1e-9)
    t = so3_pair(7)
    B = random_rotation(rng)
    a = evaluate_dependence(t, "midpoint").rcorr
    b = evaluate_dependence(PairedSample(B @ t.xs, B @ t.ys), "midpoint").rcorr
    assert a == pytest.approx(b, abs=1e-9)


# -- dcorr -------------------------------------------------------------------------------


def test_dcorr_self_is_one():
    s = sphere_pair(8)
    assert dcorr(PairedSample(s.xs, s.xs)) == pytest.approx(1.0, abs=1e-12)


def test_dcorr_hand_sample():
    xs = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.6, 0.0, 0.8]])
    ys = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.8, 0.0, 0.6], [0.0, 0.6, 0.8]])
    expected = dcorr_bruteforce(xs, ys, sphere_dist_arccos)
    assert dcorr(PairedSample(xs, ys)) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 12), st.sampled_from(["sphere", "so3"]))
def test_dcorr_matches_bruteforce(seed, n, tag):
    rng = np.random.default_rng(seed)
    if tag == "sphere":
        xs, ys, dist = random_unit(rng, n), random_unit(rng, n), sphere_dist_arccos
    else:
        xs, ys, dist = random_rotation(rng, n), random_rotation(rng, n), so3_dist_arccos
    expected = dcorr_bruteforce(xs, ys, dist)
    assert dcorr(PairedSample(xs, ys)) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(["sphere", "so3"]))
def test_dcorr_joint_permutation_invariance(seed, tag):
    rng = np.random.default_rng(seed)
    s = PAIR[tag](seed, n=25)
    d = dcorr(s)
    assert 0.0 <= d <= 1.0 + 1e-12
    assert dcorr(s.permuted(rng.permutation(s.n))) == pytest.approx(d, abs=1e-12)


def test_dcorr_undefined_for_constant_margin():
    xs = np.tile(POLE, (5, 1))
    with pytest.raises(UndefinedCorrelationError):
        dcorr(PairedSample(xs, random_unit(np.random.default_rng(2), 5)))


def test_dcov_terms_consistent():
    s = so3_pair(9, n=15)
    xy, xx, yy = dcov_terms(s)
    assert xx > 0 and yy > 0
    assert dcorr(s) == pytest.approx(math.sqrt(max(xy, 0) / math.sqrt(xx * yy)), abs=1e-15)


# -- evaluate_dependence --------------------------------------------------------------------


@pytest.mark.parametrize("tag", ["sphere", "so3"])
@pytest.mark.parametrize("policy", ["common-mean", "midpoint", "weighted", "explicit"])
def test_identical_margins_give_one_under_every_policy(tag, policy, rng):
    s = PAIR[tag](10)
    same = PairedSample(s.xs, s.xs)
    point = near_point(tag, rng) if policy == "explicit" else None
    rep = evaluate_dependence(same, policy, point=point)
    assert rep.rcorr == pytest.approx(1.0, abs=1e-12)
    assert rep.dcorr == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("tag", ["sphere", "so3"])
def test_report_contents(tag):
    s = PAIR[tag](11)
    rep = evaluate_dependence(s, "midpoint")
    assert rep.rcov == pytest.approx(np.trace(rep.sigma_hat), abs=1e-12)
    assert abs(rep.rcorr) <= 1 + 1e-12
    mx, my = rep.frechet_means
    m = s.manifold
    dx = m.dist(rep.reference_point.coords, mx.coords[None])[0]
    dy = m.dist(rep.reference_point.coords, my.coords[None])[0]
    assert abs(dx - dy) < 1e-9
    diag = rep.domain_diagnostic
    assert diag["within-domain"] and diag["max-distance"] < math.pi
    d = rep.to_dict()
    schema = load_schema("dependence_report")
    registry = _registry()
    jsonschema.Draft202012Validator(schema, registry=registry).validate(d)
    assert list(d) == [
        "manifold", "n", "reference-point", "point-policy", "weights", "sigma-hat", "frame",
        "rcov", "rcorr", "dcorr", "frechet-means", "total-variances", "frechet-converged",
        "domain-diagnostic",
    ]


def _registry():
    from referencing import Registry, Resource

    names = ["frechet_result", "dependence_report"]
    return Registry().with_resources(
        (f"{n}.schema.json", Resource.from_contents(load_schema(n))) for n in names
    )


def test_common_mean_report_includes_pooled_mean():
    s = sphere_pair(12)
    rep = evaluate_dependence(s, "common-mean")
    assert rep.pooled is not None
    np.testing.assert_allclose(rep.reference_point.coords, rep.pooled.mean.coords)
    jsonschema.Draft202012Validator(load_schema("dependence_report"), registry=_registry()).validate(
        rep.to_dict()
    )


@pytest.mark.filterwarnings("ignore::riemann_dep.frechet.FrechetUniquenessWarning")
def test_weighted_policy_defaults_to_total_variances():
    s = PairedSample(
        vmf_sample(VmfParams(POLE, 20.0), 60, make_rng(1)),
        vmf_sample(VmfParams(np.array([0.6, 0.0, 0.8]), 3.0), 60, make_rng(2)),
    )
    rep = evaluate_dependence(s, "weighted")
    assert rep.weights == rep.total_variances
    explicit = evaluate_dependence(s, "weighted", weights=rep.total_variances)
    np.testing.assert_array_equal(rep.reference_point.coords, explicit.reference_point.coords)
    # t = w1/(w1+w2) from the X mean: the tighter X margin keeps the point near its own mean
    mx, my = rep.frechet_means
    t = rep.weights[0] / sum(rep.weights)
    d = SPHERE.dist(mx.coords, my.coords[None])[0]
    assert SPHERE.dist(mx.coords, rep.reference_point.coords[None])[0] == pytest.approx(t * d, abs=1e-12)
    assert t < 0.5


def test_policy_errors():
    s = sphere_pair(13)
    with pytest.raises(RiemannDepError):
        evaluate_dependence(s, "median")
    with pytest.raises(RiemannDepError):
        evaluate_dependence(s, "explicit")
    with pytest.raises(RiemannDepError):
        evaluate_dependence(s, "weighted", weights=(1.0, -1.0))
    rep = evaluate_dependence(s, "point", point=POLE)
    assert rep.point_policy == "explicit"


def test_so3_dcorr_never_negative():
    rng = np.random.default_rng(14)
    for _ in range(50):
        n = int(rng.integers(3, 10))
        s = PairedSample(random_rotation(rng, n), random_rotation(rng, n))
        assert dcorr(s) >= 0.0


def test_so3_reference_point_lies_in_so3():
    s = so3_pair(15)
    rep = evaluate_dependence(s, "midpoint")
    SO3_SPACE.check_point(rep.reference_point.coords)
