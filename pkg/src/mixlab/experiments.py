"""Experiment runners behind the CLI subcommands.

Each runner is a pure function of (resolved config, master seed, threads)
returning an :class:`ExperimentResult`.  Work units (grid times, table
cells, repetitions) carry substream seeds derived from the master seed and
the unit index, so results are identical for every thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    LinearRate,
    SubspaceProjector,
    check_compatibility,
    check_generator_bound,
    mixing_horizons,
    ou_tv_upper_bound,
    tv_lower_bound,
)
from .errors import ConfigError
from .forward import (
    OUProcess,
    TemperedLangevin,
    check_dispersion_balance,
    check_drift_condition,
    check_linear_growth,
    classify_ergodicity,
)
from .measures import (
    ModeSpec,
    MultiModalData,
    RadialProfile,
    SphericalMeasure,
    projection_quantile,
    validate_data_spec,
)
from .rng import Seed, derive, parallel_map
from .stats import ks_sweep, projected_tv_vs_gaussian


@dataclass
class RunCheck:
    """A run-end verification; failures flip the process exit status."""

    name: str
    passed: bool
    value: float
    bound: float
    relation: str  # ">=" or "<="


@dataclass
class ExperimentResult:
    columns: list[str]
    rows: list[dict]
    checks: list[RunCheck] = field(default_factory=list)
    info: dict = field(default_factory=dict)
    chart: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def build_data_spec(cfg: dict) -> MultiModalData:
    """Single-far-mode mixture from flat config keys."""
    d = cfg["d"]
    center = np.zeros(d)
    center[0] = cfg["R"] * (1.0 + cfg["delta"])
    mode = ModeSpec(center, cfg["delta"] * cfg["R"], cfg["b_rho"])
    bulk = cfg.get("bulk_scale", 0.0)
    return MultiModalData(
        d=d, R=cfg["R"], delta=cfg["delta"], eps=cfg["eps"], modes=(mode,),
        bulk_scale=None if bulk <= 0 else bulk, mode_kind=cfg.get("mode_kind", "uniform-ball"),
    )


def _merged_times(user_times, defaults, required) -> list[float]:
    ts = list(user_times) if user_times else list(defaults)
    for t in required:
        if not any(abs(t - s) <= 1e-12 * max(1.0, abs(t)) for s in ts):
            ts.append(t)
    return sorted(set(float(t) for t in ts))


def run_cutoff(cfg: dict, seed: Seed, threads: int = 1) -> ExperimentResult:
    """Projected TV along the mode direction over a time grid, with the
    onset/mixing verification at the two characteristic horizons."""
    d, eps = cfg["d"], cfg["eps"]
    R = cfg["R"]
    bound_r = max(math.sqrt(eps) * d ** 0.25, math.sqrt(2.0 * math.log(1.0 / eps)))
    if R < bound_r:
        raise ConfigError(
            f"cut-off hypothesis violated: needs R >= max(eps^(1/2) d^(1/4), "
            f"sqrt(2 log(1/eps))) = {bound_r:.6g}, got R = {R:.6g}"
        )
    spec = build_data_spec(cfg)
    mu, n = cfg["mu"], cfg["n"]
    hz = mixing_horizons(mu, R, cfg["delta"], eps, d)
    t_onset, t_mix = hz.t_onset, hz.t_mix_simple
    times = _merged_times(
        cfg.get("times"),
        [0.0, t_onset / 4, t_onset / 2, 3 * t_onset / 4, t_onset,
         (t_onset + t_mix) / 2, t_mix, 1.25 * t_mix, 1.5 * t_mix, 2 * t_mix],
        [t_onset, t_mix],
    )
    ou = OUProcess(mu, d)
    direction = spec.mode_direction
    bins = cfg.get("bins", 0) or None
    floor = (cfg["b_rho"] - eps) / 2.0
    tv_se = 1.0 / (2.0 * math.sqrt(n))

    def one(item):
        i, t = item
        x0 = spec.sample(n, derive(seed, 1, i))
        xt = ou.evolve(x0, t, derive(seed, 2, i))
        return projected_tv_vs_gaussian(xt, direction, mu, bins=bins).value

    tvs = parallel_map(one, list(enumerate(times)), threads)
    rows = [
        {"t": t, "tv": v, "tv_se": tv_se, "t_onset": t_onset, "t_mix_simple": t_mix,
         "floor": floor, "eps": eps}
        for t, v in zip(times, tvs)
    ]
    tv_at = {t: v for t, v in zip(times, tvs)}
    checks = [
        RunCheck("tv-at-onset", tv_at[t_onset] >= floor - 3 * tv_se,
                 tv_at[t_onset], floor - 3 * tv_se, ">="),
        RunCheck("tv-at-mix", tv_at[t_mix] <= eps + 3 * tv_se,
                 tv_at[t_mix], eps + 3 * tv_se, "<="),
    ]
    return ExperimentResult(
        columns=["t", "tv", "tv_se", "t_onset", "t_mix_simple", "floor", "eps"],
        rows=rows, checks=checks,
        info={"t_onset": t_onset, "t_mix_simple": t_mix, "floor": floor},
        chart={"x": times, "series": {"projected TV": tvs}, "title": "projected TV vs time",
               "xlabel": "t", "ylabel": "TV"},
    )


def _build_process(cfg: dict):
    mu, d = cfg["mu"], cfg["d"]
    if cfg["process"] == "ou":
        proc = OUProcess(mu, d)
        return proc, proc.invariant_measure()
    profile = RadialProfile.power_tail(cfg["profile_a"], cfg["profile_p"])
    proc = TemperedLangevin(profile, cfg["ell"], d)
    return proc, proc.invariant_measure()


def run_lowerbound(cfg: dict, seed: Seed, threads: int = 1) -> ExperimentResult:
    """TV lower-bound terms over a time grid, final row at the bound horizon."""
    proc, pi = _build_process(cfg)
    mu, d, k, n, eps = cfg["mu"], cfg["d"], cfg["k"], cfg["n"], cfg["eps"]
    R = cfg["R"]
    spec = build_data_spec(cfg)
    r_k = cfg.get("r_k", 0.0)
    if r_k <= 0:
        r_k = projection_quantile(pi, k, eps, cfg["rk_n"], derive(seed, 3)).r
    if 2.0 * r_k > R:
        raise ConfigError(
            f"lower-bound horizon requires 2 r_k <= R, got r_k = {r_k:.6g}, R = {R:.6g}"
        )
    hz = mixing_horizons(mu, R, cfg["delta"], eps, d, r_k=r_k)
    t_low = hz.t_lower
    rho0 = pi if cfg["rho0"] == "pi" else spec
    direction = spec.mode_direction
    proj = SubspaceProjector.containing_direction(direction, k)
    rate = LinearRate(mu)
    times = _merged_times(
        cfg.get("times"),
        [f * t_low for f in (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)] if t_low > 0 else [0.0],
        [t_low],
    )
    floor = (cfg["b_rho"] - eps) / 2.0
    is_ou = cfg["process"] == "ou"

    def one(item):
        i, t = item
        rep = tv_lower_bound(pi, rho0, proj, rate, r_k, t, n, derive(seed, 4, i))
        upper = None
        if is_ou and mu * t > math.log(2.0) / 2.0:
            upper = ou_tv_upper_bound(mu, spec, t, n=n, seed=derive(seed, 5, i))
        return rep, upper

    outs = parallel_map(one, list(enumerate(times)), threads)
    rows = []
    for t, (rep, upper) in zip(times, outs):
        rows.append({
            "t": t, "total": rep.total, "total_se": rep.total_se,
            "pi_term": rep.pi_term, "pi_se": rep.pi_se,
            "rho_tail": rep.rho_tail_term, "rho_tail_se": rep.rho_tail_se,
            "integral": rep.integral_term, "integral_se": rep.integral_se,
            "threshold": rep.threshold, "r_k": r_k, "t_lower": t_low,
            "floor": floor, "tv_upper": upper,
        })
    return ExperimentResult(
        columns=["t", "total", "total_se", "pi_term", "pi_se", "rho_tail", "rho_tail_se",
                 "integral", "integral_se", "threshold", "r_k", "t_lower", "floor", "tv_upper"],
        rows=rows,
        info={"r_k": r_k, "t_lower": t_low, "floor": floor},
    )


def run_quantile_table(cfg: dict, seed: Seed, threads: int = 1) -> ExperimentResult:
    """Projection-quantile grid over (p, d) for the configured noise family.

    ``q_d*`` columns hold the raw (1-eps/2)-quantile of |first-k-coords|
    (the published-table convention); ``r_d*`` the level sqrt(1+q^2) used by
    the lower-bound machinery.
    """
    ps, ds = cfg["p_list"], cfg["d_list"]
    eps, n, a, k = cfg["eps"], cfg["n"], cfg["a"], cfg["k"]
    cells = [(i, j) for i in range(len(ps)) for j in range(len(ds))]

    def one(cell):
        i, j = cell
        pi = SphericalMeasure(int(ds[j]), RadialProfile.power_tail(a, ps[i]))
        return projection_quantile(pi, k, eps, n, derive(seed, 6, i, j))

    ests = dict(zip(cells, parallel_map(one, cells, threads)))
    columns = ["p"]
    for dd in ds:
        columns += [f"q_d{int(dd)}", f"r_d{int(dd)}", f"se_d{int(dd)}"]
    rows = []
    for i, p in enumerate(ps):
        row = {"p": p}
        for j, dd in enumerate(ds):
            est = ests[(i, j)]
            row[f"q_d{int(dd)}"] = est.ball_radius
            row[f"r_d{int(dd)}"] = est.r
            row[f"se_d{int(dd)}"] = est.se_ball
        rows.append(row)
    return ExperimentResult(columns=columns, rows=rows)


def run_ks_sweep(cfg: dict, seed: Seed, threads: int = 1) -> ExperimentResult:
    """Coordinate KS statistic of one marginal per (time, repetition)."""
    d, R, mu, eps, delta = cfg["d"], cfg["R"], cfg["mu"], cfg["eps"], cfg["delta"]
    if R > 0:
        hz = mixing_horizons(mu, R, delta, eps, d)
        t_onset, t_mix = hz.t_onset, hz.t_mix_simple
        defaults = [0.0, t_onset / 2, t_onset, t_mix]
    else:
        t_onset = t_mix = None
        defaults = [0.0, 1.0, 2.0, 4.0]
    times = _merged_times(cfg.get("times"), defaults, [])
    reps = cfg["reps"]
    ou = OUProcess(mu, d)
    # R = 0 means a stationary start: one draw from the invariant measure
    start = ou.invariant_measure() if R == 0 else R * np.ones(d) / math.sqrt(d)

    def one(rep):
        raw = ks_sweep(ou, start, mu, times, derive(seed, 7, rep))
        std = ks_sweep(ou, start, mu, times, derive(seed, 7, rep), standardize=True)
        return raw, std

    outs = parallel_map(one, list(range(reps)), threads)
    rows = []
    stats_by_time = {t: [] for t in times}
    for rep, (raw, std) in enumerate(outs):
        for (t, kr), (_, ks) in zip(raw, std):
            rows.append({"t": t, "rep": rep, "ks_stat": kr.statistic, "ks_p": kr.p_value,
                         "ks_stat_std": ks.statistic, "ks_p_std": ks.p_value})
            stats_by_time[t].append((kr.statistic, kr.p_value, ks.statistic, ks.p_value))
    medians = []
    for t in times:
        arr = np.array(stats_by_time[t])
        med = np.median(arr, axis=0)
        rows.append({"t": t, "rep": None, "ks_stat": med[0], "ks_p": med[1],
                     "ks_stat_std": med[2], "ks_p_std": med[3]})
        medians.append(float(med[0]))
    return ExperimentResult(
        columns=["t", "rep", "ks_stat", "ks_p", "ks_stat_std", "ks_p_std"],
        rows=rows,
        info={"times": times, "median_ks": medians,
              "t_onset": t_onset, "t_mix_simple": t_mix},
        chart={"x": times, "series": {"median KS": medians}, "title": "median KS vs time",
               "xlabel": "t", "ylabel": "KS statistic"},
    )


def run_validate(cfg: dict, seed: Seed, threads: int = 1) -> ExperimentResult:
    """Run every applicable admissibility check with measured margins."""
    proc, pi = _build_process(cfg)
    mu, d, k, n = cfg["mu"], cfg["d"], cfg["k"], cfg["n"]
    spec = build_data_spec(cfg)
    scale = cfg.get("envelope_scale", 0.0) or spec.R
    checks: list[RunCheck] = []
    relations = {"mode-mass": ">=", "far-mass-aggregate": ">=", "tail-mass": "<="}
    for c in validate_data_spec(spec, n=n, seed=derive(seed, 8)):
        checks.append(RunCheck(f"data/{c.name}", c.passed, c.value, c.threshold,
                               relations.get(c.name, "==")))
    if isinstance(proc, TemperedLangevin):
        dc = check_drift_condition(proc, mu, r_max=cfg.get("r_max", 0.0) or 10.0 * spec.R)
        checks.append(RunCheck("drift-condition", dc.passed, dc.max_excess, 0.0, "<="))
    lg = check_linear_growth(proc, mu, n_points=cfg["n_points"], seed=derive(seed, 9),
                             envelope_scale=scale)
    checks.append(RunCheck("linear-growth", lg.passed, lg.max_ratio, 1.0 + 1e-9, "<="))
    proj = SubspaceProjector.containing_direction(spec.mode_direction, k)
    db = check_dispersion_balance(proc, proj.basis, n_points=cfg["n_points"],
                                  seed=derive(seed, 10), envelope_scale=scale)
    checks.append(RunCheck("dispersion-balance", db.passed, db.max_violation, 1e-9, "<="))
    gb = check_generator_bound(proc, proj, mu, n_points=cfg["n_points"],
                               seed=derive(seed, 11), envelope_scale=scale)
    checks.append(RunCheck("generator-bound", gb.passed, gb.max_excess, 1e-9, "<="))
    beta = cfg.get("beta", 0.0)
    if beta > 0:
        r_k = cfg.get("r_k", 0.0)
        if r_k <= 0:
            r_k = projection_quantile(pi, k, cfg["eps"], cfg["rk_n"], derive(seed, 12)).r
        for c in check_compatibility(mu, spec.R, cfg["delta"], cfg["eps"], d, beta, r_k):
            rel = ">=" if c.name != "quantile-vs-distance" else "<="
            checks.append(RunCheck(f"bridge/{c.name}", c.passed, c.value, c.threshold, rel))
    rows = [
        {"check": c.name, "passed": int(c.passed), "value": c.value, "bound": c.bound,
         "relation": c.relation}
        for c in checks
    ]
    return ExperimentResult(
        columns=["check", "passed", "value", "bound", "relation"],
        rows=rows, checks=checks,
    )


def run_classify(cfg: dict, seed: Seed = 0, threads: int = 1) -> ExperimentResult:
    regime = classify_ergodicity(cfg["p"], cfg["ell"])
    row = {"p": cfg["p"], "ell": cfg["ell"], "regime": regime.kind.value,
           "exponent": regime.exponent}
    return ExperimentResult(columns=["p", "ell", "regime", "exponent"], rows=[row],
                            info={"line": f"p={cfg['p']:g} ell={cfg['ell']:g}: {regime.describe()}"})
