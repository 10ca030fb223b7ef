"""End-to-end experiment driver: runs, error protocol, rate fits, CSV.

A run sweeps node counts and trials for one benchmark problem (or custom
data), rebuilding the cover and all local fits per trial, then measures
relative errors of the blended field and potential on a held-out evaluation
set.  Potential errors are computed after normalizing both the approximant
and the truth to zero mean over the evaluation points, and the per-N error
reported downstream is the mean over trials.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import testbed
from .cover import assign_radii_and_inflate, spacing_from_q
from .errors import VecPumError
from .kernels import RadialKernel
from .pum import build_approximant

CSV_HEADER = ("problem,kernel,eps,q,delta,gamma,N,trial,"
              "err_field_inf,err_field_2,err_pot_inf,err_pot_2,"
              "glue_res_inf,t_fit_ms,t_eval_ms")

# Desk-scale defaults per problem: kernel family, shape parameter, nodes per
# patch control q, overlap delta, and a refinement ladder.
PROBLEM_DEFAULTS = {
    "star2d": dict(kernel="imq", eps=13.0, q=8.0, delta=0.5,
                   n_values=(2500, 5000, 10000), trials=5),
    "sphere": dict(kernel="matern4", eps=7.5, q=9.0, delta=9.0 / 16.0,
                   n_values=(2000, 4000, 8000), trials=5),
    "ball": dict(kernel="imq", eps=4.0, q=3.0, delta=0.25,
                 n_values=(3000, 6000, 12000), trials=5),
}

_EVAL_TAG = 0xE7A1
_NODE_TAG = 0xDA7A


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one experiment sweep."""

    problem: str
    kernel: str
    eps: float
    q: float
    delta: float
    gamma: float = 4.0
    n_values: tuple = ()
    trials: int = 5
    seed: int = 0
    eval_n: int = 20000
    nodes_file: str = None
    values_file: str = None
    mode: str = None
    surface: str = None
    area: float = None
    workers: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.q <= 0:
            raise ValueError("q must be positive")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        object.__setattr__(self, "n_values", tuple(self.n_values))


def default_config(problem, **overrides):
    """A RunConfig seeded with the benchmark defaults for ``problem``."""
    base = dict(PROBLEM_DEFAULTS[problem])
    base.update(overrides)
    return RunConfig(problem=problem, **base)


@dataclass
class TrialRecord:
    n_requested: int
    n_actual: int
    trial: int
    err_field_inf: float
    err_field_2: float
    err_pot_inf: float
    err_pot_2: float
    glue_res_inf: float
    max_fit_residual: float
    n_eval_used: int
    n_eval_dropped: int
    t_fit_ms: float
    t_eval_ms: float


@dataclass
class RunResult:
    config: RunConfig
    records: list = field(default_factory=list)

    def n_levels(self):
        seen = []
        for rec in self.records:
            if rec.n_requested not in seen:
                seen.append(rec.n_requested)
        return seen

    def level_mean(self, attr):
        """Mean of a record attribute per requested-N level, in level
        order."""
        out = {}
        for n in self.n_levels():
            vals = [getattr(r, attr) for r in self.records
                    if r.n_requested == n]
            out[n] = float(np.mean(vals))
        return out

    def level_actual_n(self):
        return {n: float(np.mean([r.n_actual for r in self.records
                                  if r.n_requested == n]))
                for n in self.n_levels()}


def _seed_for(seed, *key):
    return np.random.SeedSequence(entropy=(int(seed),) + tuple(
        int(k) for k in key))


def relative_vector_errors(approx, truth):
    """(inf, two) relative errors using pointwise Euclidean magnitudes."""
    err = np.sqrt(((approx - truth) ** 2).sum(-1))
    mag = np.sqrt((truth**2).sum(-1))
    return float(err.max() / mag.max()), float(
        np.sqrt((err**2).sum() / (mag**2).sum()))


def relative_potential_errors(approx, truth):
    """(inf, two) relative errors after zero-mean normalization of both."""
    a = approx - approx.mean()
    t = truth - truth.mean()
    err = np.abs(a - t)
    mag = np.abs(t)
    return float(err.max() / mag.max()), float(
        np.sqrt((err**2).sum() / (mag**2).sum()))


class ExperimentError(VecPumError):
    """A pipeline stage failed; carries the stage name and (N, trial)."""

    def __init__(self, stage, n, trial, cause):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed at N={n}, trial={trial}: "
                         f"{cause}")


def fit_and_glue(problem, nodes, values, config):
    """Cover, per-patch fits, and potential shifts for one node set."""
    kernel = RadialKernel(config.kernel, config.eps)
    h = spacing_from_q(config.q, problem.area, len(nodes),
                       problem.intrinsic_dim)
    centers = problem.make_centers(h)
    cov = assign_radii_and_inflate(centers, nodes, config.delta,
                                   problem.surface, h)
    approx, _, solution = build_approximant(
        cov, kernel, problem.surface, problem.mode, values,
        gamma=config.gamma, workers=config.workers)
    return approx, solution


def run_experiment(config):
    """Run the configured sweep and collect per-trial error records.

    Deterministic for a fixed config and seed: node and evaluation sets are
    drawn from seeds derived from (seed, level, trial).  Evaluation points
    that fall outside the cover (rare boundary slivers) are dropped and
    counted.
    """
    if config.problem == "custom":
        return run_custom(config)
    problem = testbed.PROBLEMS[config.problem]()
    if not config.n_values:
        raise ValueError("config.n_values is empty")
    eval_pts = problem.nodes(config.eval_n, _seed_for(config.seed, _EVAL_TAG))
    truth_field = problem.field(eval_pts)
    truth_pot = problem.potential_sign * problem.potential(eval_pts)

    result = RunResult(config=config)
    for level, n_req in enumerate(config.n_values):
        for trial in range(config.trials):
            nodes = problem.nodes(
                n_req, _seed_for(config.seed, _NODE_TAG, level, trial))
            values = problem.field(nodes)
            t0 = time.perf_counter()
            try:
                approx, solution = fit_and_glue(problem, nodes, values,
                                                config)
            except VecPumError as exc:
                raise ExperimentError("fit", n_req, trial, exc) from exc
            t1 = time.perf_counter()
            mask = approx.covered_mask(eval_pts)
            pts = eval_pts[mask]
            try:
                pot, fld = approx.batch_eval(pts, workers=config.workers)
            except VecPumError as exc:
                raise ExperimentError("eval", n_req, trial, exc) from exc
            t2 = time.perf_counter()
            e_inf, e_two = relative_vector_errors(fld, truth_field[mask])
            p_inf, p_two = relative_potential_errors(pot, truth_pot[mask])
            res_inf = (float(np.abs(solution.residual).max())
                       if len(solution.residual) else 0.0)
            result.records.append(TrialRecord(
                n_requested=n_req, n_actual=len(nodes), trial=trial,
                err_field_inf=e_inf, err_field_2=e_two,
                err_pot_inf=p_inf, err_pot_2=p_two,
                glue_res_inf=res_inf,
                max_fit_residual=max(f.fit_residual for f in approx.fits),
                n_eval_used=len(pts),
                n_eval_dropped=int((~mask).sum()),
                t_fit_ms=(t1 - t0) * 1e3, t_eval_ms=(t2 - t1) * 1e3))
    return result


def _custom_problem(config):
    from . import geometry as geo

    nodes = testbed.load_points(config.nodes_file)
    values = testbed.load_points(config.values_file)
    if nodes.shape != values.shape:
        raise ValueError("custom nodes and values shapes disagree")
    surface_kind = config.surface or ("sphere" if nodes.shape[1] == 3
                                      else "r2")
    if surface_kind == "plane":
        surface, mode, dim = geo.plane2d(), "div_surface", 2
        nodes = geo.embed_points(nodes)
        values = geo.embed_vectors(values)
    elif surface_kind == "sphere":
        surface, mode, dim = geo.sphere2(), "div_surface", 2
    elif surface_kind in ("r2", "r3"):
        d = 2 if surface_kind == "r2" else 3
        surface, mode, dim = geo.euclidean(d), "curl_euclidean", d
    else:
        raise ValueError(f"unknown surface {surface_kind!r}")
    if config.mode:
        mode = config.mode
    lo = nodes.min(axis=0)
    hi = nodes.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    if config.area is not None:
        area = config.area
    elif surface_kind == "sphere":
        area = 4.0 * np.pi
    else:
        area = float(np.prod(span[:dim]))

    class _Box:
        bbox = ((lo[0], lo[1]), (hi[0], hi[1]))

        @staticmethod
        def inside(points):
            return np.ones(len(points), dtype=bool)

    def make_centers(h):
        from . import cover as cov_mod
        if surface_kind == "sphere":
            return cov_mod.centers_sphere(h)
        if surface_kind == "r3":
            ticks = [np.arange(lo[k], hi[k] + h, h) for k in range(3)]
            gx, gy, gz = np.meshgrid(*ticks, indexing="ij")
            return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        pts = cov_mod.centers_plane(_Box, h)
        return geo.embed_points(pts) if surface.kind == "plane" else pts

    problem = testbed.TestProblem(
        name="custom", surface=surface, mode=mode, area=area,
        intrinsic_dim=dim, potential=None, field=None, potential_sign=1.0,
        nodes=None, make_centers=make_centers, inside=None)
    return problem, nodes, values


def run_custom(config):
    """Fit externally supplied samples; errors are residuals at the nodes.

    No analytic truth exists, so the field columns report the relative
    residual of the blended field at the sample nodes and the potential
    columns are NaN.
    """
    problem, nodes, values = _custom_problem(config)
    t0 = time.perf_counter()
    approx, solution = fit_and_glue(problem, nodes, values, config)
    t1 = time.perf_counter()
    _, fld = approx.batch_eval(nodes)
    t2 = time.perf_counter()
    e_inf, e_two = relative_vector_errors(fld, values)
    result = RunResult(config=config)
    result.records.append(TrialRecord(
        n_requested=len(nodes), n_actual=len(nodes), trial=0,
        err_field_inf=e_inf, err_field_2=e_two,
        err_pot_inf=float("nan"), err_pot_2=float("nan"),
        glue_res_inf=(float(np.abs(solution.residual).max())
                      if len(solution.residual) else 0.0),
        max_fit_residual=max(f.fit_residual for f in approx.fits),
        n_eval_used=len(nodes), n_eval_dropped=0,
        t_fit_ms=(t1 - t0) * 1e3, t_eval_ms=(t2 - t1) * 1e3))
    return result


# ---------------------------------------------------------------------------
# convergence-rate fits

def _linear_fit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ValueError("rate fits need at least 3 node counts")
    coeffs = np.polyfit(x, y, 1)
    pred = np.polyval(coeffs, x)
    ss_res = ((y - pred) ** 2).sum()
    ss_tot = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coeffs[0]), float(r2)


def fit_rate(n_values, errors, model, dim=None):
    """Fit a convergence-rate model to per-N errors.

    ``model="algebraic"`` fits log(err) against log(sqrt(N)) and returns
    (slope, R^2).  ``model="superalgebraic"`` fits log(err) against
    log(N) * N**(1/(2*dim)) and returns (C, R^2) for
    err ~ exp(-C log(N) N^(1/(2 dim))), so C > 0 means decay.
    """
    n_values = np.asarray(n_values, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if model == "algebraic":
        return _linear_fit(np.log(np.sqrt(n_values)), np.log(errors))
    if model == "superalgebraic":
        if dim is None:
            raise ValueError("superalgebraic fits need the dimension")
        x = np.log(n_values) * n_values ** (1.0 / (2.0 * dim))
        slope, r2 = _linear_fit(x, np.log(errors))
        return -slope, r2
    raise ValueError(f"unknown rate model {model!r}")


# ---------------------------------------------------------------------------
# output

def _fmt(value):
    return format(float(value), ".17g")


def emit_csv(result, path):
    """Write one CSV row per (N, trial) with 17-significant-digit floats."""
    cfg = result.config
    lines = [CSV_HEADER]
    for rec in result.records:
        lines.append(",".join([
            cfg.problem, cfg.kernel, _fmt(cfg.eps), _fmt(cfg.q),
            _fmt(cfg.delta), _fmt(cfg.gamma), str(rec.n_actual),
            str(rec.trial), _fmt(rec.err_field_inf), _fmt(rec.err_field_2),
            _fmt(rec.err_pot_inf), _fmt(rec.err_pot_2),
            _fmt(rec.glue_res_inf), _fmt(rec.t_fit_ms),
            _fmt(rec.t_eval_ms)]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_summary(result):
    """Per-N mean errors plus a rate fit when enough levels exist."""
    cfg = result.config
    lines = [f"problem={cfg.problem} kernel={cfg.kernel} eps={cfg.eps:g} "
             f"q={cfg.q:g} delta={cfg.delta:g} gamma={cfg.gamma:g}"]
    levels = result.n_levels()
    mean_n = result.level_actual_n()
    inf_err = result.level_mean("err_field_inf")
    two_err = result.level_mean("err_field_2")
    pot_inf = result.level_mean("err_pot_inf")
    res_inf = result.level_mean("glue_res_inf")
    tfit = result.level_mean("t_fit_ms")
    for n in levels:
        lines.append(
            f"  N~{mean_n[n]:9.1f}  field_inf={inf_err[n]:.3e}  "
            f"field_2={two_err[n]:.3e}  pot_inf={pot_inf[n]:.3e}  "
            f"glue_res={res_inf[n]:.3e}  t_fit={tfit[n]:.0f}ms")
    if len(levels) >= 3 and np.isfinite(list(inf_err.values())).all():
        ns = [mean_n[n] for n in levels]
        errs = [inf_err[n] for n in levels]
        if cfg.kernel == "matern4":
            slope, r2 = fit_rate(ns, errs, "algebraic")
            lines.append(f"  algebraic rate vs sqrt(N): slope={slope:.3f} "
                         f"(R^2={r2:.4f})")
        else:
            dim = 3 if cfg.problem == "ball" else 2
            c, r2 = fit_rate(ns, errs, "superalgebraic", dim=dim)
            lines.append(f"  super-algebraic fit: C={c:.4f} (R^2={r2:.4f})")
    text = "\n".join(lines)
    print(text)
    return text
