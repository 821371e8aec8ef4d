"""Task execution: build the model, run, emit CSV artifacts and a report."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arnoldi import floquet_multipliers
from .config import RunConfig
from .continuation import ContinuationOptions, detect_fold, trace_branch
from .core import Parameters, Timestepper
from .errors import ConfigError, IncomparableRuns
from .models import (
    AdsorptionColumnModel,
    ForcedOscillatorModel,
    LinearMapModel,
    QuadraticMapModel,
)
from .projective import ProjectiveSchedule, projective_run
from .rpm import RpmOptions, picard_warmup, rpm_solve


@dataclass
class RunReport:
    task_kind: str
    model_name: str
    wall_time: float
    map_calls: int
    converged: bool
    status: str
    headline: dict = field(default_factory=dict)
    csv_paths: list = field(default_factory=list)
    final_state: np.ndarray | None = None
    tolerance: float | None = None

    def render(self) -> str:
        lines = [
            f"task:        {self.task_kind} on {self.model_name}",
            f"status:      {self.status}" + ("" if self.converged else "  (FAILED)"),
            f"map calls:   {self.map_calls}",
            f"wall time:   {self.wall_time:.3f} s",
        ]
        for key, val in self.headline.items():
            lines.append(f"{key + ':':<13}{val}")
        for path in self.csv_paths:
            lines.append(f"wrote:       {path}")
        return "\n".join(lines) + "\n"


@dataclass
class SpeedupSummary:
    speedup: float
    fixed_point_distance: float
    bound: float


def format_cell(x) -> str:
    """CSV cell: 17 significant digits for floats (exact round-trip)."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows) -> None:
    """Plain comma-separated text: header first, LF endings, no locale."""
    header = list(header)
    rendered = []
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) != len(header):
            raise ValueError(
                f"row {i} has {len(row)} cells, header has {len(header)}"
            )
        rendered.append(",".join(format_cell(x) for x in row))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for line in rendered:
            fh.write(line + "\n")


def read_csv(path):
    """Parse back a write_csv file: (header, float-or-string rows)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        cells = []
        for cell in line.split(","):
            try:
                cells.append(float(cell))
            except ValueError:
                cells.append(cell)
        rows.append(cells)
    return header, rows


def compare_runs(report_a: RunReport, report_b: RunReport) -> SpeedupSummary:
    """Speedup of run a over run b in map calls, guarded by a fixed-point
    equivalence check: the runs must have landed on the same state."""
    if report_a.final_state is None or report_b.final_state is None:
        raise IncomparableRuns("both runs must carry final states")
    ua, ub = report_a.final_state, report_b.final_state
    if ua.shape != ub.shape:
        raise IncomparableRuns(f"state dimensions differ: {ua.shape} vs {ub.shape}")
    tols = [t for t in (report_a.tolerance, report_b.tolerance) if t is not None]
    bound = 10.0 * max(tols) if tols else 1e-5
    dist = float(np.linalg.norm(ua - ub))
    if dist > bound:
        raise IncomparableRuns(
            f"fixed points differ by {dist:.3g} > {bound:.3g}; runs are not comparable"
        )
    return SpeedupSummary(
        speedup=report_b.map_calls / max(report_a.map_calls, 1),
        fixed_point_distance=dist,
        bound=bound,
    )


# -- model / state construction -------------------------------------------


def build_model(config: RunConfig) -> Timestepper:
    kind = config.model_kind
    params = dict(config.model_params)
    if kind == "linear":
        if "complex_pairs" in params:
            params["complex_pairs"] = [tuple(p) for p in params["complex_pairs"]]
        return LinearMapModel(**params)
    if kind == "quadratic":
        return QuadraticMapModel(**params)
    if kind == "oscillator":
        return ForcedOscillatorModel(**params)
    if kind == "adsorption":
        return AdsorptionColumnModel(**params)
    raise ConfigError(f"unknown model kind {kind!r}")


def initial_state(config: RunConfig, model: Timestepper) -> np.ndarray:
    init = config.task_params.get("initial")
    if init is None:
        if isinstance(model, AdsorptionColumnModel):
            return model.clean_bed_state()
        return np.zeros(model.dim)
    if isinstance(init, list):
        u = np.asarray(init, dtype=np.float64)
        if u.size != model.dim:
            raise ConfigError(
                f"task.initial has dim {u.size}, model needs {model.dim}"
            )
        return u
    if init == "zeros":
        return np.zeros(model.dim)
    if init == "ones":
        return np.ones(model.dim)
    if init == "random":
        return np.random.default_rng(config.seed).standard_normal(model.dim)
    if init == "clean-bed":
        if not isinstance(model, AdsorptionColumnModel):
            raise ConfigError("initial 'clean-bed' needs the adsorption model")
        return model.clean_bed_state()
    if init == "equilibrium":
        if not isinstance(model, AdsorptionColumnModel):
            raise ConfigError("initial 'equilibrium' needs the adsorption model")
        return model.equilibrium_state(model.c_feed)
    raise ConfigError(f"unrecognized initial state {init!r}")


def _state_header(dim: int, stride: int) -> list[str]:
    return [f"u{i}" for i in range(0, dim, stride)]


def _rpm_options(tp: dict, **overrides) -> RpmOptions:
    keys = {
        "tolerance", "max_iterations", "m_max", "grow_threshold",
        "drop_threshold", "history", "warmup", "h_refresh_interval",
    }
    kwargs = {k: tp[k] for k in keys if k in tp}
    kwargs.update(overrides)
    return RpmOptions(**kwargs)


# -- tasks -----------------------------------------------------------------


def _task_simulate(config, model, outdir, p):
    tp = config.task_params
    stride = config.state_stride
    tol = tp.get("tolerance")
    n_cycles = tp.get("n_cycles")
    if (tol is None) == (n_cycles is None):
        raise ConfigError("simulate needs exactly one of n_cycles or tolerance")
    max_cycles = int(tp.get("max_cycles", 100000))
    record_stride = int(tp.get("record_stride", 1))
    samples = int(tp.get("intra_cycle_samples", 0))
    if samples and not hasattr(model, "sample_cycle"):
        raise ConfigError("intra_cycle_samples requires a model with cycle sampling")
    u = initial_state(config, model)
    rows = [[0.0] + list(u[::stride])]
    change = np.inf
    cycles = 0
    budget = int(n_cycles) if n_cycles is not None else max_cycles
    for i in range(budget):
        if samples:
            for frac, s in model.sample_cycle(u, samples):
                if frac < 1.0:
                    rows.append([i + frac] + list(s[::stride]))
        un = model.apply(u, p)
        change = float(np.linalg.norm(un - u))
        u = un
        cycles = i + 1
        if cycles % record_stride == 0 or cycles == budget:
            rows.append([float(cycles)] + list(u[::stride]))
        if tol is not None and change <= tol:
            break
    path = outdir / f"{config.prefix}_trajectory.csv"
    write_csv(path, ["cycle"] + _state_header(model.dim, stride), rows)
    converged = tol is None or change <= tol
    return RunReport(
        task_kind="simulate",
        model_name=model.name,
        wall_time=0.0,
        map_calls=0,
        converged=converged,
        status="completed" if converged else "max_cycles_exhausted",
        headline={
            "cycles": cycles,
            "final cycle-to-cycle change": f"{change:.6g}",
        },
        csv_paths=[str(path)],
        final_state=u,
        tolerance=tol,
    )


def _task_fixed_point(config, model, outdir, p):
    tp = config.task_params
    opts = _rpm_options(tp)
    u0 = initial_state(config, model)
    warm_cycles = int(tp.get("warmup_cycles", 0))
    basis = None
    if warm_cycles:
        u0, basis, _ = picard_warmup(model, u0, p, warm_cycles, opts)
    result = rpm_solve(model, u0, p, opts, warm_basis=basis)
    stride = config.state_stride
    state_path = outdir / f"{config.prefix}_state.csv"
    write_csv(state_path, _state_header(model.dim, stride), [list(result.u[::stride])])
    hist_path = outdir / f"{config.prefix}_history.csv"
    write_csv(
        hist_path,
        ["iteration", "residual"],
        [[i + 1, r] for i, r in enumerate(result.residual_history)],
    )
    mults = result.slow_multipliers()
    return RunReport(
        task_kind="fixed-point",
        model_name=model.name,
        wall_time=0.0,
        map_calls=0,
        converged=result.converged,
        status=result.status.value,
        headline={
            "residual": f"{result.residual_norm:.6g}",
            "outer iterations": result.iterations,
            "slow subspace dim": result.basis.m,
            "slow multipliers": _fmt_mults(mults),
        },
        csv_paths=[str(state_path), str(hist_path)],
        final_state=result.u,
        tolerance=opts.tolerance,
    )


def _task_eigs(config, model, outdir, p):
    tp = config.task_params
    u0 = initial_state(config, model)
    if tp.get("assume_fixed_point", False):
        u_star = u0
        status = "assumed"
        tol = None
    else:
        opts = _rpm_options(tp)
        result = rpm_solve(model, u0, p, opts)
        if not result.converged:
            return RunReport(
                task_kind="eigs",
                model_name=model.name,
                wall_time=0.0,
                map_calls=0,
                converged=False,
                status=f"pre-solve {result.status.value}",
                final_state=result.u,
            )
        u_star = result.u
        status = "converged"
        tol = opts.tolerance
    k = int(tp.get("k", min(10, model.dim)))
    k_max = int(tp.get("k_max", max(30, k)))
    fl = floquet_multipliers(model, u_star, p, k=k, k_max=k_max)
    path = outdir / f"{config.prefix}_spectrum.csv"
    write_csv(
        path,
        ["re", "im", "abs", "residual"],
        [[pr.mu.real, pr.mu.imag, abs(pr.mu), pr.residual] for pr in fl.pairs],
    )
    return RunReport(
        task_kind="eigs",
        model_name=model.name,
        wall_time=0.0,
        map_calls=0,
        converged=True,
        status=status,
        headline={
            "leading multipliers": _fmt_mults([p_.mu for p_ in fl.pairs[:4]]),
            "stable": fl.stable,
        },
        csv_paths=[str(path)],
        final_state=u_star,
        tolerance=tol,
    )


def _task_continue(config, model, outdir, p):
    tp = config.task_params
    if "lambda0" not in tp or "lambda_min" not in tp or "lambda_max" not in tp:
        raise ConfigError("continue needs lambda0, lambda_min and lambda_max")
    keys = {
        "ds0", "ds_min", "ds_max", "max_points", "corrector_tol",
        "max_corrector_iters", "theta", "use_arnoldi_multipliers", "arnoldi_k",
    }
    kwargs = {k: tp[k] for k in keys if k in tp}
    rpm_opts = _rpm_options({"tolerance": tp.get("tolerance", 1e-8)})
    opts = ContinuationOptions(rpm=rpm_opts, **kwargs)
    u0 = initial_state(config, model)
    params = p.with_continuation_value(float(tp["lambda0"]))
    branch = trace_branch(
        model, u0, float(tp["lambda0"]),
        (float(tp["lambda_min"]), float(tp["lambda_max"])),
        opts, params,
    )
    folds = detect_fold(model, branch, opts, params)
    stride = config.state_stride
    m_max = max((len(pt.multipliers) for pt in branch), default=0)
    header = ["s", "lambda", "residual", "fold_flag"]
    for i in range(m_max):
        header += [f"mult_re_{i}", f"mult_im_{i}"]
    header += _state_header(model.dim, stride)
    rows = []
    for pt in branch:
        row = [pt.s, pt.lam, pt.residual_norm, int(pt.fold_flag)]
        for i in range(m_max):
            mu = pt.multipliers[i] if i < len(pt.multipliers) else float("nan")
            row += [complex(mu).real, complex(mu).imag]
        row += list(pt.u[::stride])
        rows.append(row)
    path = outdir / f"{config.prefix}_branch.csv"
    write_csv(path, header, rows)
    return RunReport(
        task_kind="continue",
        model_name=model.name,
        wall_time=0.0,
        map_calls=0,
        converged=True,
        status="completed",
        headline={
            "points": len(branch),
            "lambda range covered": f"[{min(q.lam for q in branch):.6g}, "
                                     f"{max(q.lam for q in branch):.6g}]",
            "folds": "; ".join(
                f"lambda={f.lam:.8g} (|det|={f.det_residual:.2g})" for f in folds
            ) or "none",
        },
        csv_paths=[str(path)],
        final_state=branch[-1].u,
        tolerance=opts.corrector_tol,
    )


def _task_projective(config, model, outdir, p):
    tp = config.task_params
    keys = {"k_inner", "m_jump", "max_rounds", "tolerance", "adaptive", "chord_points"}
    sched = ProjectiveSchedule(**{k: tp[k] for k in keys if k in tp})
    u0 = initial_state(config, model)
    traj = projective_run(model, u0, p, sched)
    stride = config.state_stride
    path = outdir / f"{config.prefix}_trajectory.csv"
    write_csv(
        path,
        ["cycle", "kind"] + _state_header(model.dim, stride),
        [[e.cycle, e.kind] + list(e.state[::stride]) for e in traj.entries],
    )
    return RunReport(
        task_kind="projective",
        model_name=model.name,
        wall_time=0.0,
        map_calls=0,
        converged=traj.converged,
        status="converged" if traj.converged else "round_budget_exhausted",
        headline={
            "rounds": traj.rounds,
            "cycles covered": traj.cycles_covered,
            "cycles per map call": f"{traj.speedup:.3f}",
        },
        csv_paths=[str(path)],
        final_state=traj.final_state,
        tolerance=sched.tolerance,
    )


_TASKS = {
    "simulate": _task_simulate,
    "fixed-point": _task_fixed_point,
    "eigs": _task_eigs,
    "continue": _task_continue,
    "projective": _task_projective,
}


def _fmt_mults(mults) -> str:
    if not mults:
        return "none identified"
    return ", ".join(
        f"{mu.real:.6g}{mu.imag:+.6g}j" if abs(mu.imag) > 1e-14 else f"{mu.real:.6g}"
        for mu in list(mults)[:6]
    )


def run_task(config: RunConfig, out_override: str | None = None) -> RunReport:
    """Build, dispatch, time and account one configured run."""
    model = build_model(config)
    outdir = Path(out_override if out_override is not None else config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    p = Parameters(values={"lambda": 0.0})
    calls_before = model.call_count
    t0 = time.perf_counter()
    report = _TASKS[config.task_kind](config, model, outdir, p)
    report.wall_time = time.perf_counter() - t0
    report.map_calls = model.call_count - calls_before
    report_path = outdir / f"{config.prefix}_report.txt"
    report_path.write_text(report.render(), encoding="utf-8")
    report.csv_paths.append(str(report_path))
    return report
