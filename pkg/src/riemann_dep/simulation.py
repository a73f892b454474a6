"""Generative models for paired S² and SO(3) samples and the noise sweep.

Sphere model: ``X ~ VMF(μ, κ)``, ``Y_i = (R X_i + b_i) / ‖R X_i + b_i‖`` with
``b_i ~ N(0, ε² I)`` and ``R`` built from an axis-angle pair through the
quaternion matrix in :mod:`riemann_dep.so3`.

SO(3) model: ``A_i ~ N(0, I)`` shrunk so that ``‖phi(A_i)‖_F ≤ α``;
``X_i = exp(phi(A_i))``; ``A'_i = R_i A_i + W_i`` where ``R_i`` turns
``A_i`` by θ about ``(-a₂, a₁, 0)`` and ``W_i ~ N(0, ε I)`` (covariance ε,
not ε²); ``Y_i = B exp(phi(A'_i))``.

The noise draws are made even when ε = 0 so that, for a fixed seed, the
first margin is identical at every noise level.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dependence import PairedSample, evaluate_dependence
from .errors import ConfigError, RiemannDepError
from .frechet import SolverSettings
from .rng import derive_seed, make_rng, split_seed, standard_normal
from .so3 import SO3_SPACE, AxisAngle, axis_angle_matrices, phi, polar_project, so3_exp
from .sphere import SPHERE, VmfParams, vmf_sample

SCENARIOS = ("same-mean", "rotated", "negative", "independent")
SWEEP_COLUMNS = (
    "manifold",
    "scenario",
    "epsilon",
    "replication",
    "n",
    "seed",
    "policy",
    "rcorr",
    "dcorr",
    "rcov",
    "frechet-dist-means",
    "error",
)
THREADS_ENV = "RIEMANN_DEP_THREADS"


def _unit(v, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise ConfigError(f"{name} must be a unit 3-vector, got {v.tolist()}")
    return tuple(float(c) for c in v)


def _normalized(v):
    v = np.asarray(v, dtype=float)
    return tuple(float(c) for c in v / np.linalg.norm(v))


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    manifold: str = "sphere"
    scenario: str = "same-mean"
    n: int = 100
    seed: int = 0
    noise: float = 0.0
    # sphere
    mu: tuple = (0.0, 0.0, 1.0)
    kappa: float = 9.0
    axis: tuple = (0.0, 0.0, 1.0)
    angle: float = 0.0
    # so3
    alpha: float = 0.6
    b: np.ndarray = field(default_factory=lambda: np.eye(3))
    # second margin, used when independent
    independent: bool = False
    mu2: tuple = (0.0, 0.0, 1.0)
    kappa2: float = 9.0
    alpha2: float = 0.6

    def __post_init__(self):
        if self.manifold not in ("sphere", "so3"):
            raise ConfigError(f"manifold must be 'sphere' or 'so3', got {self.manifold!r}")
        if int(self.n) < 2:
            raise ConfigError("n must be at least 2")
        if not self.noise >= 0:
            raise ConfigError("noise must be nonnegative")
        if not self.kappa > 0 or not self.kappa2 > 0:
            raise ConfigError("kappa must be positive")
        for a in (self.alpha, self.alpha2):
            if not 0 < a < math.pi / 2:
                raise ConfigError(f"alpha must lie in (0, π/2), got {a}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "noise", float(self.noise))
        object.__setattr__(self, "mu", _unit(self.mu, "mu"))
        object.__setattr__(self, "mu2", _unit(self.mu2, "mu2"))
        object.__setattr__(self, "axis", _unit(self.axis, "rotation axis"))
        b = np.array(self.b, dtype=float)
        try:
            SO3_SPACE.check_point(b)
        except RiemannDepError as exc:
            raise ConfigError(f"B: {exc}") from None
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @classmethod
    def preset(cls, manifold: str, scenario: str, **overrides) -> "ScenarioConfig":
        """Parameters of the four published scenarios on each manifold."""
        if scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
        base: dict = {"manifold": manifold, "scenario": scenario}
        if manifold == "sphere":
            base.update(mu=(0.0, 0.0, 1.0), kappa=9.0)
            if scenario == "rotated":
                base.update(axis=(0.0, 1.0, 0.0), angle=math.pi / 6)
            elif scenario == "negative":
                base.update(axis=_normalized((1, 1, 1)), angle=math.pi)
            elif scenario == "independent":
                base.update(
                    independent=True, kappa=4.0, mu2=_normalized((0, 1, 1)), kappa2=5.0
                )
        elif manifold == "so3":
            base.update(alpha=0.6)
            if scenario == "rotated":
                base.update(b=so3_exp([1.0, 0.0, 0.0]), angle=math.pi / 6)
            elif scenario == "negative":
                base.update(angle=math.pi)
            elif scenario == "independent":
                base.update(independent=True, alpha2=0.6)
        base.update(overrides)
        return cls(**base)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def rotation(self) -> np.ndarray:
        aa = AxisAngle(np.array(self.axis), self.angle)
        return axis_angle_matrices(aa.axis[None], aa.angle)[0]

    def fixes_mean(self) -> bool:
        """Whether both margins share the population Fréchet mean."""
        if self.manifold == "sphere":
            if self.independent:
                return bool(np.allclose(self.mu, self.mu2, rtol=0, atol=1e-12))
            mu = np.array(self.mu)
            return bool(np.allclose(self.rotation() @ mu, mu, rtol=0, atol=1e-12))
        return bool(np.allclose(self.b, np.eye(3), rtol=0, atol=1e-12))

    def policy(self) -> str:
        return "common-mean" if self.fixes_mean() else "midpoint"

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold,
            "scenario": self.scenario,
            "n": self.n,
            "seed": self.seed,
            "noise": self.noise,
            "mu": list(self.mu),
            "kappa": self.kappa,
            "axis": list(self.axis),
            "angle": self.angle,
            "alpha": self.alpha,
            "b": self.b.tolist(),
            "independent": self.independent,
            "mu2": list(self.mu2),
            "kappa2": self.kappa2,
            "alpha2": self.alpha2,
        }


def frobenius_of_phi(A) -> np.ndarray:
    return np.linalg.norm(phi(A), axis=(-2, -1))


def clip_tangent(A, alpha: float) -> np.ndarray:
    """Rescale rows with ``‖phi(A)‖_F > α`` so that ``‖phi(A)‖_F ≤ α`` holds exactly."""
    A = np.array(A, dtype=float)
    fro = frobenius_of_phi(A)
    over = fro > alpha
    A[over] *= (alpha / fro[over])[:, None]
    # rounding can leave the rescaled norm an ulp above α
    for _ in range(8):
        over = frobenius_of_phi(A) > alpha
        if not over.any():
            break
        A[over] *= 1.0 - 2.0**-52
    return A


def orthogonal_axes(A, *, normalize: bool = True) -> np.ndarray:
    """Axes ``(-a₂, a₁, 0)``, or ``(0, 0, 1)`` where ``a₃ = 0``.

    Rows with ``a₁ = a₂ = 0`` (axis undefined) fall back to ``(1, 0, 0)``.
    The unnormalised axes are exactly orthogonal to ``A`` in floating point.
    """
    A = np.asarray(A, dtype=float)
    axes = np.stack([-A[:, 1], A[:, 0], np.zeros(len(A))], axis=-1)
    axes[A[:, 2] == 0] = (0.0, 0.0, 1.0)
    norms = np.linalg.norm(axes, axis=-1)
    axes[norms == 0] = (1.0, 0.0, 0.0)
    if not normalize:
        return axes
    return axes / np.linalg.norm(axes, axis=-1, keepdims=True)


def _exp_batch(A):
    return polar_project(so3_exp(np.atleast_2d(A)))


def gen_sphere_pair(config: ScenarioConfig) -> PairedSample:
    rng = make_rng(config.seed)
    xs = vmf_sample(VmfParams(config.mu, config.kappa), config.n, rng)
    b = config.noise * standard_normal(rng, (config.n, 3))
    rx = SPHERE.rotate(config.rotation(), xs)
    if config.noise == 0:
        return PairedSample(xs, rx, SPHERE)
    z = rx + b
    norms = np.linalg.norm(z, axis=-1)
    for i in np.flatnonzero(norms < 1e-12):
        # measure-zero event; redraw the perturbation for this point only
        while norms[i] < 1e-12:
            z[i] = rx[i] + config.noise * standard_normal(rng, 3)
            norms[i] = np.linalg.norm(z[i])
    return PairedSample(xs, z / norms[:, None], SPHERE)


def _clipped_so3(rng, n, alpha):
    A = clip_tangent(standard_normal(rng, (n, 3)), alpha)
    return A, _exp_batch(A)


def gen_so3_pair(config: ScenarioConfig) -> PairedSample:
    rng = make_rng(config.seed)
    A, xs = _clipped_so3(rng, config.n, config.alpha)
    W = math.sqrt(config.noise) * standard_normal(rng, (config.n, 3))
    R = axis_angle_matrices(orthogonal_axes(A), config.angle)
    A2 = np.einsum("nij,nj->ni", R, A) + W
    ys = SO3_SPACE.rotate(config.b, _exp_batch(A2))
    return PairedSample(xs, ys, SO3_SPACE)


def gen_independent_pair(config: ScenarioConfig) -> PairedSample:
    """Margins from two generators split off ``config.seed``; pairing is positional."""
    s1, s2 = split_seed(config.seed, 2)
    if config.manifold == "sphere":
        xs = vmf_sample(VmfParams(config.mu, config.kappa), config.n, make_rng(s1))
        ys = vmf_sample(VmfParams(config.mu2, config.kappa2), config.n, make_rng(s2))
        return PairedSample(xs, ys, SPHERE)
    _, xs = _clipped_so3(make_rng(s1), config.n, config.alpha)
    _, ys = _clipped_so3(make_rng(s2), config.n, config.alpha2)
    return PairedSample(xs, SO3_SPACE.rotate(config.b, ys), SO3_SPACE)


def generate(config: ScenarioConfig) -> PairedSample:
    if config.independent:
        return gen_independent_pair(config)
    if config.manifold == "sphere":
        return gen_sphere_pair(config)
    return gen_so3_pair(config)


@dataclass(frozen=True)
class SweepConfig:
    scenario: ScenarioConfig
    noise_grid: tuple
    replications: int = 50
    base_seed: int = 0

    def __post_init__(self):
        grid = tuple(float(e) for e in self.noise_grid)
        if not grid:
            raise ConfigError("noise grid must not be empty")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ConfigError("noise grid must be nondecreasing")
        if any(e < 0 for e in grid):
            raise ConfigError("noise levels must be nonnegative")
        if int(self.replications) < 1:
            raise ConfigError("replications must be at least 1")
        object.__setattr__(self, "noise_grid", grid)
        object.__setattr__(self, "replications", int(self.replications))
        object.__setattr__(self, "base_seed", int(self.base_seed))


def cell_seed(base_seed: int, eps_index: int, replication: int) -> int:
    return derive_seed(base_seed, eps_index, replication)


def run_cell(scenario: ScenarioConfig, eps_index: int, eps: float, replication: int,
             base_seed: int, settings: SolverSettings | None = None) -> dict:
    seed = cell_seed(base_seed, eps_index, replication)
    cfg = scenario.with_(noise=eps, seed=seed)
    policy = cfg.policy()
    row = {
        "manifold": cfg.manifold,
        "scenario": cfg.scenario,
        "epsilon": eps,
        "replication": replication,
        "n": cfg.n,
        "seed": seed,
        "policy": policy,
        "rcorr": None,
        "dcorr": None,
        "rcov": None,
        "frechet-dist-means": None,
        "error": "",
    }
    try:
        report = evaluate_dependence(generate(cfg), policy, settings=settings, warn=False)
    except RiemannDepError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        rcorr=report.rcorr,
        dcorr=report.dcorr,
        rcov=report.rcov,
        **{"frechet-dist-means": report.domain_diagnostic["means-distance"]},
    )
    unconverged = [k for k, r in (("x", report.frechet_x), ("y", report.frechet_y),
                                  ("pooled", report.pooled)) if r is not None and not r.converged]
    if unconverged:
        row["error"] = "NonConvergence: Fréchet mean did not converge for " + ", ".join(unconverged)
    return row


def _summary(rows, stat):
    first = rows[0]
    ok = [r for r in rows if not r["error"]]
    out = {k: first[k] for k in ("manifold", "scenario", "epsilon", "n", "policy")}
    out.update(replication=stat, seed=None, error="")
    for col in ("rcorr", "dcorr", "rcov", "frechet-dist-means"):
        vals = np.array([r[col] for r in ok if r[col] is not None], dtype=float)
        if stat == "mean":
            out[col] = float(vals.mean()) if vals.size else None
        else:
            out[col] = float(vals.std(ddof=1)) if vals.size > 1 else None
    failed = len(rows) - len(ok)
    if failed:
        out["error"] = f"{failed} of {len(rows)} replications failed"
    return out


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(sweep: SweepConfig, settings: SolverSettings | None = None,
              workers: int | None = None) -> list[dict]:
    """One row per (ε, replication) plus ``mean`` and ``sd`` rows per ε.

    Rows come out in (grid, replication) order whatever the worker count.
    """
    cells = [
        (i, eps, r)
        for i, eps in enumerate(sweep.noise_grid)
        for r in range(sweep.replications)
    ]
    workers = workers or thread_cap()

    def work(cell):
        i, eps, r = cell
        return run_cell(sweep.scenario, i, eps, r, sweep.base_seed, settings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]

    rows = []
    reps = sweep.replications
    for i in range(len(sweep.noise_grid)):
        block = results[i * reps : (i + 1) * reps]
        rows.extend(block)
        rows.append(_summary(block, "mean"))
        rows.append(_summary(block, "sd"))
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_sweep_csv(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])


def sweep_csv_text(rows) -> str:
    buf = io.StringIO()
    write_sweep_csv(rows, buf)
    return buf.getvalue()


def parse_sweep_config(data: dict, seed_override: int | None = None) -> SweepConfig:
    """Build a :class:`SweepConfig` from its JSON form.

    ``{"manifold", "scenario", "params", "noise-grid", "replications", "base-seed"}``;
    ``params`` overrides the scenario preset (``n``, ``mu``, ``kappa``, ``axis``,
    ``angle``, ``alpha``, ``b`` or ``b-log``, ``mu2``, ``kappa2``, ``alpha2``).
    """
    required = ("manifold", "scenario", "noise-grid")
    missing = [k for k in required if k not in data]
    if missing:
        raise ConfigError(f"sweep config is missing {missing}")
    known = {"manifold", "scenario", "params", "noise-grid", "replications", "base-seed"}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown sweep config keys {sorted(extra)}")
    params = dict(data.get("params") or {})
    if "b-log" in params:
        params["b"] = so3_exp(np.asarray(params.pop("b-log"), dtype=float))
    if "axis" in params:
        params["axis"] = _normalized(params["axis"])
    for key in ("mu", "mu2"):
        if key in params:
            params[key] = _normalized(params[key])
    allowed = {"n", "mu", "kappa", "axis", "angle", "alpha", "b", "mu2", "kappa2", "alpha2"}
    bad = set(params) - allowed
    if bad:
        raise ConfigError(f"unknown scenario params {sorted(bad)}")
    scenario = ScenarioConfig.preset(data["manifold"], data["scenario"], **params)
    base_seed = data.get("base-seed", 0) if seed_override is None else seed_override
    return SweepConfig(scenario, tuple(data["noise-grid"]), data.get("replications", 50), base_seed)
