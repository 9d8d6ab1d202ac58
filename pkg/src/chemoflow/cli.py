"""Command-line façade: configuration, dispatch, persistence, reporting.

Subcommands:

``simulate``   run one configuration, writing a CSV time series, a JSON
               summary and SVG line plots.
``certify``    build the subsolution parameter tuple for (n, p, q) and run
               the sampling certificate; report as JSON.
``phase-map``  classify and simulate a lattice of (p, q) points, comparing
               theoretical and empirical verdicts.
``compare``    end-to-end domination run: certified subsolution versus the
               transformed simulation, with the central-density floor.

Everything is deterministic: identical inputs produce byte-identical
artifacts (no timestamps, fixed float formatting, fixed SVG hash salt).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chemoflow.diagnostics import lyapunov_sample
from chemoflow.dynamics import (
    DiagnosticsSpec,
    RadialState,
    RunReport,
    RunVerdict,
    StepControl,
    advance,
    gaussian_profile,
    tabulated_profile,
)
from chemoflow.elliptic import RadialGrid
from chemoflow.mass_system import MassGrid, check_ordered, mass_from_cells, to_mass
from chemoflow.model_core import ModelParams, Regime, SensitivityFamily, classify_regime
from chemoflow.subsolution import (
    CertificateSampling,
    Exponents,
    InfeasibleExponentsError,
    SubsolutionParams,
    _phi_at_t0,
    build_params,
    certify,
    initial_thresholds,
    log_central_lower_bound,
    select_exponents,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


class ConfigError(ValueError):
    """Invalid or unresolvable configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class InitialData:
    kind: str = "gaussian"
    a_u: float = 1.0
    rho_u: float = 0.1
    b_u: float = 0.1
    a_w: float = 1.0
    rho_w: float = 0.1
    b_w: float = 0.1
    path: str | None = None


@dataclass
class RunConfig:
    model: ModelParams
    initial: InitialData
    N: int = 512
    J: int = 257
    step: StepControl = field(default_factory=StepControl)
    horizon: float = 1.0
    lyapunov: bool = False
    s1: float = 1.0
    norm_exponents: tuple = ()
    sample_every: int = 20
    subsolution: dict | None = None
    safety: float = 1.05
    data_scale: float = 1.0
    plots: bool = True
    # compare-run knobs: adversarial mean bound for the build, and a resolvable
    # concentrated bump added on top of the threshold profile (extra mass only
    # strengthens domination, and the bump is what collapses at grid scale)
    mu_hi_build: float = 16.0
    mu_lo_build: float = 1.0
    bump_a: float = 2000.0
    bump_rho: float | None = None  # None: R / 10

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path) -> "RunConfig":
        try:
            model = ModelParams(**raw["model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc
        init_raw = raw.get("initial", {})
        try:
            initial = InitialData(**init_raw)
        except TypeError as exc:
            raise ConfigError(f"initial: {exc}") from exc
        if initial.kind not in ("gaussian", "tabulated"):
            raise ConfigError(f"initial.kind: unknown kind {initial.kind!r}")
        if initial.kind == "tabulated":
            if not initial.path:
                raise ConfigError("initial.path: required for tabulated data")
            p = (base_dir / initial.path).resolve()
            if not p.exists():
                raise ConfigError(f"initial.path: {p} not resolvable")
            initial.path = str(p)
        grid_raw = raw.get("grid", {})
        N = int(grid_raw.get("N", 512))
        J = int(grid_raw.get("J", 257))
        if N < 32:
            raise ConfigError(f"grid.N: must be >= 32, got {N}")
        try:
            step = StepControl(**raw.get("step", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"step: {exc}") from exc
        horizon = float(raw.get("horizon", 1.0))
        if not horizon > 0:
            raise ConfigError(f"horizon: must be positive, got {horizon}")
        diag = raw.get("diagnostics", {})
        return cls(
            model=model, initial=initial, N=N, J=J, step=step, horizon=horizon,
            lyapunov=bool(diag.get("lyapunov", False)),
            s1=float(diag.get("s1", 1.0)),
            norm_exponents=tuple(diag.get("norm_exponents", ())),
            sample_every=int(diag.get("sample_every", 20)),
            subsolution=raw.get("subsolution"),
            safety=float(raw.get("safety", 1.05)),
            data_scale=float(raw.get("data_scale", 1.0)),
            plots=bool(raw.get("plots", True)),
            mu_hi_build=float(raw.get("mu_hi_build", 16.0)),
            mu_lo_build=float(raw.get("mu_lo_build", 1.0)),
            bump_a=float(raw.get("bump_a", 2000.0)),
            bump_rho=raw.get("bump_rho"),
        )


def load_config(path: str) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return RunConfig.from_dict(raw, p.parent)


def _initial_fields(cfg: RunConfig, grid: RadialGrid):
    ini = cfg.initial
    if ini.kind == "gaussian":
        u0 = gaussian_profile(grid, ini.a_u, ini.rho_u, ini.b_u)
        w0 = gaussian_profile(grid, ini.a_w, ini.rho_w, ini.b_w)
    else:
        table = np.loadtxt(ini.path, delimiter=",", skiprows=1)
        u0 = tabulated_profile(grid, table[:, 0], table[:, 1])
        w0 = tabulated_profile(grid, table[:, 0], table[:, 2])
    return u0 * cfg.data_scale, w0 * cfg.data_scale


# ---------------------------------------------------------------------------
# json / plot helpers
# ---------------------------------------------------------------------------


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and (math.isinf(x) or math.isnan(x)):
        return repr(x)
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _jsonable(obj)


def _save_series_plot(path: Path, ts, series, labels, ylabel, logy=False):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "chemoflow"
    fig, ax = plt.subplots(figsize=(6, 4))
    for ys, lab in zip(series, labels):
        ax.plot(ts, ys, label=lab)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _f_violations(report: RunReport) -> int:
    F = report.column("F")
    F = F[np.isfinite(F)]
    if F.size < 2:
        return 0
    return int(np.sum(np.diff(F) > 1e-6 * (1.0 + np.abs(F[:-1]))))


def run_simulation(cfg: RunConfig):
    grid = RadialGrid(n=cfg.model.n, R=cfg.model.R, N=cfg.N)
    sens = SensitivityFamily(cfg.model)
    u0, w0 = _initial_fields(cfg, grid)
    state = RadialState.from_data(grid, u0, w0)
    diagnostics = DiagnosticsSpec(
        lyapunov=cfg.lyapunov, s1=cfg.s1,
        norm_exponents=cfg.norm_exponents, sample_every=cfg.sample_every,
    )
    sigma_alpha = None
    if cfg.subsolution is not None:
        try:
            exps = _exponents_from_config(cfg)
            sigma_alpha = exps.alpha
        except InfeasibleExponentsError:
            sigma_alpha = None
    ctrl = dataclasses.replace(cfg.step)
    final, report = advance(state, sens, ctrl, cfg.horizon,
                            diagnostics=diagnostics, sigma_alpha=sigma_alpha)
    return state, final, report


def _exponents_from_config(cfg: RunConfig) -> Exponents:
    sub = cfg.subsolution or {"auto": True}
    if sub.get("auto", False) or not {"delta", "alpha", "beta"} <= set(sub):
        return select_exponents(cfg.model.n, cfg.model.p, cfg.model.q)
    return Exponents(delta=sub["delta"], alpha=sub["alpha"], beta=sub["beta"],
                     n=cfg.model.n, p=cfg.model.p, q=cfg.model.q)


def summary_dict(cfg: RunConfig, report: RunReport) -> dict:
    mass_u = report.column("mass_u")
    mass_w = report.column("mass_w")
    drift_u = float(np.max(np.abs(mass_u - mass_u[0])) / abs(mass_u[0]))
    drift_w = float(np.max(np.abs(mass_w - mass_w[0])) / abs(mass_w[0]))
    out = {
        "verdict": report.verdict,
        "steps": report.steps,
        "retries": report.retries,
        "final_t": report.column("t")[-1],
        "final_u_max": report.column("u_max")[-1],
        "final_w_max": report.column("w_max")[-1],
        "mass_drift_u": drift_u,
        "mass_drift_w": drift_w,
        "blowup_time_estimate": report.blowup_time,
        "blowup_fit_sigma": report.blowup_sigma,
        "blowup_fit_residual": report.blowup_fit_residual,
    }
    if cfg.lyapunov:
        out["f_violations"] = _f_violations(report)
    return _clean(out)


def cmd_simulate(config_path: str, out_dir: str) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, final, report = run_simulation(cfg)
    report.write_csv(out / "series.csv")
    write_json(out / "summary.json", summary_dict(cfg, report))
    if cfg.plots:
        ts = report.column("t")
        _save_series_plot(out / "u_max.svg", ts,
                          [report.column("u_max"), report.column("w_max")],
                          ["sup u", "sup w"], "sup norm", logy=True)
        if cfg.lyapunov:
            _save_series_plot(out / "lyapunov.svg", ts, [report.column("F")],
                              ["F"], "Lyapunov functional")
    if report.verdict == RunVerdict.STEP_COLLAPSE:
        print("solver collapse; partial artifacts retained", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


# ---------------------------------------------------------------------------
# certify
# ---------------------------------------------------------------------------


def params_dict(params: SubsolutionParams) -> dict:
    ex = params.exponents
    return _clean({
        "n": params.model.n, "R": params.model.R,
        "p": params.model.p, "q": params.model.q,
        "kD": params.model.kD, "kS": params.model.kS,
        "mu_hi": params.mu_hi, "mu_lo": params.mu_lo,
        "delta": ex.delta, "alpha": ex.alpha, "beta": ex.beta,
        "margin1": ex.margins[0], "margin2": ex.margins[1],
        "l": params.l,
        "y_star": params.y_star, "log_y_star": params.log_y_star,
        "s_star": params.s_star, "log_s_star": params.log_s_star,
        "theta_star": params.theta_star, "log_theta_star": params.log_theta_star,
        "theta": params.theta, "log_theta": params.log_theta,
        "kappa": params.kappa,
        "y0": params.y0, "log_y0": params.log_y0,
        "T": params.T,
        "c1": params.c1, "c2": params.c2, "c3": params.c3, "c4": params.c4,
        "T_times_theta": math.exp(math.log(params.T) + params.log_theta),
    })


def certificate_dict(cert) -> dict:
    return _clean({
        "passed": cert.passed,
        "tol": cert.tol,
        "n_samples": cert.n_samples,
        "sandwich_ok": cert.sandwich_ok,
        "worst": {
            k: {"residual": v.residual, "t_frac": v.t_frac, "where": v.where}
            for k, v in cert.worst.items()
        },
    })


def cmd_certify(n: int, p: float, q: float, R: float, mu_star: float, mu_min: float,
                kD: float, kS: float, sampling: str, expect_fail: bool,
                out_dir: str | None) -> int:
    report: dict = {"n": n, "p": p, "q": q}
    try:
        model = ModelParams(n=n, R=R, p=p, q=q, kD=kD, kS=kS)
        exps = select_exponents(n, p, q)
    except (InfeasibleExponentsError, ValueError) as exc:
        report["infeasible"] = str(exc)
        print(json.dumps(_clean(report), sort_keys=True, indent=2))
        if expect_fail:
            return EXIT_OK
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    params = build_params(model, mu_star, mu_min, exps)
    plan = CertificateSampling()
    if sampling == "dense":
        plan = plan.doubled()
    cert = certify(params, sampling=plan)
    report["params"] = params_dict(params)
    report["certificate"] = certificate_dict(cert)
    text = json.dumps(_clean(report), sort_keys=True, indent=2)
    print(text)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "certificate.json").write_text(text + "\n")
    return EXIT_OK if cert.passed else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# phase map
# ---------------------------------------------------------------------------


@dataclass
class PhaseMapSpec:
    n: int
    points: list
    template: dict

    @classmethod
    def load(cls, path: str) -> "PhaseMapSpec":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"spec file {path} not found")
        raw = json.loads(p.read_text())
        n = int(raw.get("n", 3))
        points = raw.get("points")
        if points is None and "lattice" in raw:
            lat = raw["lattice"]
            ps = np.arange(lat["p"][0], lat["p"][1] + 1e-12, lat["p"][2])
            qs = np.arange(lat["q"][0], lat["q"][1] + 1e-12, lat["q"][2])
            points = [[float(a), float(b)] for a in ps for b in qs]
        if not points:
            raise ConfigError("phase-map spec has an empty lattice")
        return cls(n=n, points=[(float(a), float(b)) for a, b in points],
                   template=raw.get("template", {}))


def plateau_bounded(report: RunReport) -> bool:
    """Growth-stopped test on sup(u): the last-quarter peak must not exceed
    the earlier peak by more than 5%, and the last quarter must not be in
    material monotone growth (strictly increasing by more than 1% overall).

    A finite-horizon proxy only: it cannot separate boundedness from slow
    infinite-time growth.
    """
    ts = report.column("t")
    um = report.column("u_max")
    if ts.size < 8:
        return False
    t_cut = ts[0] + 0.75 * (ts[-1] - ts[0])
    late = um[ts >= t_cut]
    early = um[ts < t_cut]
    if late.size < 2 or early.size < 1:
        return False
    if np.max(late) > 1.05 * np.max(early):
        return False
    growing = bool(np.all(np.diff(late) > 0)) and late[-1] > 1.01 * late[0]
    return not growing


def _sweep_amplitude(model: ModelParams, grid: RadialGrid, mu_build: float):
    """Amplitude making a rho = R/10 gaussian clear the cumulative thresholds
    at every grid face, or None when no self-consistent amplitude exists
    (the thresholds near the origin outgrow any bounded profile, so this is
    the usual outcome; callers fall back to mass-matched data)."""
    try:
        exps = select_exponents(model.n, model.p, model.q)
        params = build_params(model, mu_build, mu_build, exps)
    except (InfeasibleExponentsError, ValueError):
        return None
    faces = grid.faces[1:]
    m1, m2 = initial_thresholds(params, faces)
    rho = model.R / 10.0
    shape = gaussian_profile(grid, 1.0, rho, 0.0)
    ball = grid.omega_n * mass_from_cells(grid, shape, faces**model.n)
    amp = float(np.max(np.maximum(m1, m2) / ball))
    mean_gain = grid.omega_n * float(np.dot(grid.weights, shape)) / grid.domain_volume
    if amp * mean_gain > mu_build:
        return None  # data mean would exceed the mean the thresholds assume
    return amp


def _phase_point(job) -> dict:
    (p, q), n, template = job
    verdict = classify_regime(n, p, q)
    base = dict(template)
    model_kw = dict(base.get("model", {}))
    model_kw.update({"n": n, "p": p, "q": q})
    model_kw.setdefault("R", 1.0)
    cfg_raw = {
        "model": model_kw,
        "initial": base.get("initial", {}),
        "grid": base.get("grid", {"N": 128}),
        "step": base.get("step", {}),
        "horizon": base.get("horizon", 2.0),
        "diagnostics": base.get("diagnostics", {"sample_every": 25}),
    }
    try:
        cfg = RunConfig.from_dict(cfg_raw, Path("."))
        grid = RadialGrid(n=n, R=cfg.model.R, N=cfg.N)
        amp = _sweep_amplitude(cfg.model, grid, mu_build=1.0)
        if amp is not None:
            cfg.initial.a_u = cfg.initial.a_w = amp
            cfg.initial.rho_u = cfg.initial.rho_w = cfg.model.R / 10.0
        _, _, report = run_simulation(cfg)
        if report.verdict == RunVerdict.BLOWUP_DETECTED:
            empirical = "BLOWUP"
        elif report.verdict == RunVerdict.COMPLETED_HORIZON and plateau_bounded(report):
            empirical = "BOUNDED"
        else:
            empirical = "INCONCLUSIVE"
        err = ""
    except Exception as exc:  # per-point failures recorded, sweep continues
        empirical = "ERROR"
        err = str(exc)

    if verdict.tag == Regime.UNCLASSIFIED or empirical in ("INCONCLUSIVE", "ERROR"):
        agreement = "n/a"
    else:
        ok = {
            Regime.GB: empirical == "BOUNDED",
            Regime.GE: empirical != "BLOWUP",
            Regime.FTBU: empirical == "BLOWUP",
        }[verdict.tag]
        agreement = "yes" if ok else "no"
    return {"p": p, "q": q, "theory": verdict.tag.value, "empirical": empirical,
            "agreement": agreement, "error": err}


def cmd_phase_map(spec_path: str, out_dir: str, workers: int) -> int:
    try:
        spec = PhaseMapSpec.load(spec_path)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [((p, q), spec.n, spec.template) for (p, q) in spec.points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_phase_point, jobs))
    else:
        results = [_phase_point(j) for j in jobs]

    with open(out / "phase_map.csv", "w") as fh:
        fh.write("p,q,theory,empirical,agreement\n")
        for r in results:
            fh.write(f"{r['p']!r},{r['q']!r},{r['theory']},{r['empirical']},{r['agreement']}\n")
    disagreements = [r for r in results if r["agreement"] == "no"]
    write_json(out / "phase_map.json", _clean({
        "n": spec.n, "points": results,
        "n_disagreements": len(disagreements),
    }))
    return EXIT_OK if not disagreements else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


def threshold_profiles(params: SubsolutionParams, grid: RadialGrid, safety: float):
    """Cell-averaged densities of ``safety`` times the subsolution mass pair
    at t = 0: the resulting cumulative masses dominate the thresholds at
    every grid face by construction."""
    ex = params.exponents
    s_faces = grid.faces**grid.n
    u_cells = safety * grid.n * np.diff(_phi_at_t0(params, s_faces, ex.alpha)) / np.diff(s_faces)
    w_cells = safety * grid.n * np.diff(_phi_at_t0(params, s_faces, ex.beta)) / np.diff(s_faces)
    return u_cells, w_cells


def run_compare(cfg: RunConfig) -> tuple[dict, int]:
    model = cfg.model
    grid = RadialGrid(n=model.n, R=model.R, N=cfg.N)
    sens = SensitivityFamily(model)
    out: dict = {"model": {"n": model.n, "R": model.R, "p": model.p, "q": model.q}}

    try:
        exps = _exponents_from_config(cfg)
    except InfeasibleExponentsError as exc:
        out["infeasible"] = str(exc)
        return out, EXIT_VALIDATION
    params = build_params(model, cfg.mu_hi_build, cfg.mu_lo_build, exps)
    cert = certify(params)
    out["params"] = params_dict(params)
    out["certificate"] = certificate_dict(cert)
    if not cert.passed:
        out["aborted"] = "certificate failed"
        return out, EXIT_RUNTIME

    u0, w0 = threshold_profiles(params, grid, cfg.safety)
    rho = cfg.bump_rho if cfg.bump_rho is not None else model.R / 10.0
    bump = gaussian_profile(grid, cfg.bump_a, rho, 0.0)
    u0 = (u0 + bump) * cfg.data_scale
    w0 = (w0 + bump) * cfg.data_scale

    # precondition: ball masses must clear the thresholds at every face
    faces = grid.faces[1:]
    m1, m2 = initial_thresholds(params, faces)
    got_u = grid.omega_n * mass_from_cells(grid, u0, faces**model.n)
    got_w = grid.omega_n * mass_from_cells(grid, w0, faces**model.n)
    margin_u = float(np.min(got_u - m1))
    margin_w = float(np.min(got_w - m2))
    out["threshold_margins"] = {"u": margin_u, "w": margin_w}
    if margin_u < 0 or margin_w < 0:
        out["precondition_failed"] = "initial data below the cumulative thresholds"
        return out, EXIT_VALIDATION

    state = RadialState.from_data(grid, u0, w0)
    if max(state.mu_u, state.mu_w) > params.mu_hi * (1 + 1e-9):
        out["precondition_failed"] = "data means exceed the certified mean bound"
        return out, EXIT_VALIDATION

    mass_grid = MassGrid(n=model.n, R=model.R, J=cfg.J)
    tol = 1e-4 * params.mu_lo * model.R**model.n / model.n
    floor_tol = math.log(1e-12)

    samples: list[dict] = []

    def on_sample(st: RadialState):
        if not (st.t < params.T):
            return
        ms = to_mass(st, mass_grid)
        nodes = mass_grid.nodes
        ev_u = _phi_profile(params, nodes, st.t, params.exponents.alpha)
        ev_w = _phi_profile(params, nodes, st.t, params.exponents.beta)
        lower = dataclasses.replace(ms, U=ev_u, W=ev_w)
        rep = check_ordered(lower, ms, tol=tol)
        log_floor_u, log_floor_w = log_central_lower_bound(params, st.t)
        u_center = float(st.u.values[0])
        samples.append({
            "t": st.t,
            "margin_U": rep.margin_U,
            "margin_W": rep.margin_W,
            "ordered": rep.passed,
            "u_center": u_center,
            "log_floor_u": float(log_floor_u),
            "floor_ok": bool(math.log(max(u_center, 1e-300)) >= float(log_floor_u) + floor_tol),
        })

    ctrl = dataclasses.replace(cfg.step)
    final, report = advance(state, sens, ctrl, cfg.horizon,
                            diagnostics=DiagnosticsSpec(sample_every=cfg.sample_every),
                            sigma_alpha=exps.alpha, on_sample=on_sample)
    out["verdict"] = report.verdict
    out["blowup_time_estimate"] = report.blowup_time
    out["comparison_window_T"] = params.T
    out["samples_in_window"] = samples
    out["ordering_pass"] = bool(samples) and all(s["ordered"] for s in samples)
    out["floor_pass"] = bool(samples) and all(s["floor_ok"] for s in samples)
    out["central_density_curve"] = [
        {"t": s["t"], "u_center": s["u_center"], "log_floor_u": s["log_floor_u"]}
        for s in samples
    ]
    code = EXIT_OK if out["ordering_pass"] else EXIT_RUNTIME
    return _clean(out), code


def _phi_profile(params: SubsolutionParams, s_nodes: np.ndarray, t: float, expo: float):
    """Subsolution mass profile (prefactor included) at the given nodes."""
    from chemoflow.subsolution import log_y_of_t

    a = float(log_y_of_t(params, t))
    y_inv = math.exp(-a) if a < 709.0 else 0.0
    theta_t = math.exp(params.log_theta + math.log(t)) if t > 0 else 0.0
    pref = math.exp(-theta_t)
    out = np.zeros_like(s_nodes)
    inner = (s_nodes <= y_inv) & (s_nodes > 0)
    if np.any(inner):
        e = math.log(params.l) + (1.0 - expo) * a
        slope = math.exp(e) if e < 709.0 else math.inf
        out[inner] = pref * slope * s_nodes[inner]
    outer = s_nodes > y_inv
    g = s_nodes[outer] - (1.0 - expo) * y_inv
    out[outer] = pref * params.l * expo ** (-expo) * g**expo
    return out


def cmd_compare(config_path: str, out_dir: str) -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    report, code = run_compare(cfg)
    write_json(out_path / "compare.json", report)
    return code


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chemoflow",
                                 description="two-species chemotaxis laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configuration")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)

    cert = sub.add_parser("certify", help="build and certify a subsolution")
    cert.add_argument("--n", type=int, required=True)
    cert.add_argument("--p", type=float, required=True)
    cert.add_argument("--q", type=float, required=True)
    cert.add_argument("--R", type=float, default=1.0)
    cert.add_argument("--mu-star", type=float, default=1.0,
                      help="larger initial mean entering the operators")
    cert.add_argument("--mu-min", type=float, default=1.0,
                      help="smaller initial mean setting the amplitude")
    cert.add_argument("--kD", type=float, default=1.0)
    cert.add_argument("--kS", type=float, default=1.0)
    cert.add_argument("--sampling", choices=["normal", "dense"], default="normal")
    cert.add_argument("--expect-fail", action="store_true")
    cert.add_argument("--out", default=None)

    pm = sub.add_parser("phase-map", help="sweep a (p, q) lattice")
    pm.add_argument("--spec", required=True)
    pm.add_argument("--out", required=True)
    pm.add_argument("--workers", type=int, default=1)

    cp = sub.add_parser("compare", help="subsolution-versus-simulation domination run")
    cp.add_argument("--config", required=True)
    cp.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("CHEMOFLOW_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out)
        if args.command == "certify":
            return cmd_certify(args.n, args.p, args.q, args.R, args.mu_star,
                               args.mu_min, args.kD, args.kS, args.sampling,
                               args.expect_fail, args.out)
        if args.command == "phase-map":
            return cmd_phase_map(args.spec, args.out, args.workers)
        if args.command == "compare":
            return cmd_compare(args.config, args.out)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime failure with a nonzero exit
        logger.exception("command failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
