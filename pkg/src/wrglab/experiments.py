"""Experiment presets: simulate an ensemble, reduce it with stats, compare with analytics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import analytics
from .errors import EmptySample, InvalidParameter, UnsupportedClass
from .simulator import GrowthConfig, map_replicas, summary_task
from .stats import (
    HighDegreeTask,
    MarkWindow,
    conditional_labels,
    count_marked,
    falling_factorial,
    jackknife_se,
    ks_test,
    location_statistics,
    max_degree_statistics,
)
from .special_fn import normal_cdf
from .weight_models import WeightModel

PRESETS = ("max-degree", "location", "marks", "conditional", "moments")

PRESET_DEFAULTS: dict[str, dict[str, Any]] = {
    "max-degree": {"form": None, "halfwidth": 4.0, "ratio_band": [0.8, 1.2], "threshold_fraction": None},
    "location": {"band": 0.06, "compare_m": None},
    "marks": {
        "windows": [{"j": 0}, {"j": 1}, {"j": 2}],
        "mark": "level",
        "rel_tol": 0.15,
        "dispersion_band": [0.75, 1.25],
        "ks_alpha": 0.01,
        "ks_levels": [0],
        "c": None,
    },
    "conditional": {
        "d": None,
        "d_fraction": 0.5,
        "mode": "at_least",
        "ks_alpha": 0.01,
        "mean_tol_abs": 0.15,
        "mean_tol_rel": 0.25,
        "sd_tol": 0.15,
        "c": None,
    },
    "moments": {"windows": [{"j": 0}, {"j": 1}], "orders": [1, 2, 3], "joint_orders": None, "rel_tol": 0.25, "c": None},
}


@dataclass
class Check:
    """One comparison of an estimate against a limit with a configured band."""

    name: str
    estimate: float
    limit: float
    band: list[float]
    passed: bool
    n: int | None = None
    ci: list[float] | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    results: list[dict] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)
    samples: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _band_check(name, estimate, limit, lo, hi, n=None, ci=None, note="") -> Check:
    ok = bool(lo <= estimate <= hi) if math.isfinite(estimate) else False
    return Check(name, float(estimate), float(limit), [float(lo), float(hi)], ok, n, ci, note)


def _growth(cfg, n: int, m: int | None = None) -> GrowthConfig:
    return GrowthConfig(n=n, m=cfg.m if m is None else m, variant=cfg.variant, model=cfg.model, seed=cfg.seed)


def _windows(spec: list[dict]) -> list[MarkWindow]:
    out = []
    for w in spec:
        a = -math.inf if w.get("a") is None else float(w["a"])
        b = math.inf if w.get("b") is None else float(w["b"])
        out.append(MarkWindow(int(w["j"]), a, b, w.get("mode", "at_least")))
    return out


def _run_max_degree(cfg, p, parallelism) -> ExperimentResult:
    res = ExperimentResult(columns=["n", "replica", "max_degree", "I_n", "I_tilde_n", "centered"])
    theta = cfg.model.theta(cfg.m)
    means = []
    for n in cfg.n:
        cs = analytics.centering(cfg.model, n, cfg.m, p["form"])
        summaries = list(map_replicas(_growth(cfg, n), cfg.replicas, summary_task, parallelism))
        rep = max_degree_statistics(summaries, cs, theta)
        means.append(rep.mean)
        out = rep.to_dict()
        d_low, d_high = analytics.max_degree_threshold(cfg.model, n, cfg.m)
        below = float(np.mean([s.max_degree <= d_low for s in summaries]))
        out["thresholds"] = {"d_low": d_low, "d_high": d_high, "fraction_at_most_d_low": below,
                             "poisson_fraction_at_most_d_low": analytics.prob_max_at_most(cfg.model, n, d_low, cfg.m)}
        if cs.form == "level":
            try:
                coef = analytics.intensity_coefficient(cfg.model, cfg.m)
                out["intensity_offset"] = math.log(coef) / math.log(theta)
                out["mean_minus_intensity_offset"] = rep.mean - out["intensity_offset"]
            except UnsupportedClass:
                pass
        res.results.append(out)
        lo, hi = p["ratio_band"]
        res.checks.append(_band_check("max_degree_ratio", rep.ratio_mean, 1.0, lo, hi, n))
        if cs.form == "level":
            hw = p["halfwidth"]
            res.checks.append(_band_check("centered_max", rep.mean, cs.limit, cs.limit - hw, cs.limit + hw, n,
                                          list(rep.ci)))
        else:
            sign_ok = bool(np.sign(rep.mean) == np.sign(cs.limit))
            res.checks.append(Check("scaled_max_sign", rep.mean, cs.limit, [0.0, math.copysign(math.inf, cs.limit)],
                                    sign_ok, n, list(rep.ci), "sign of the mean must match the limit"))
        if p["threshold_fraction"] is not None:
            res.checks.append(_band_check("max_at_most_d_low", below, 1.0, p["threshold_fraction"], 1.0, n))
        for s, v in zip(summaries, rep.values):
            res.rows.append({"n": n, "replica": s.replica, "max_degree": s.max_degree, "I_n": s.I_n,
                             "I_tilde_n": s.I_tilde_n, "centered": float(v)})
        res.samples[f"centered_max_n{n}"] = rep.values
    if len(cfg.n) > 1:
        slope = float(np.polyfit(np.log(np.asarray(cfg.n, float)), means, 1)[0])
        res.results.append({"trend_slope_per_log_n": slope, "means": means})
    return res


def _run_location(cfg, p, parallelism) -> ExperimentResult:
    res = ExperimentResult(columns=["n", "m", "replica", "log_I_over_log_n", "log_I_tilde_over_log_n"])
    ms = p["compare_m"] or [cfg.m]
    for n in cfg.n:
        medians, mus = [], []
        for m in ms:
            consts = analytics.limit_constants(cfg.model, m)
            summaries = list(map_replicas(_growth(cfg, n, m), cfg.replicas, summary_task, parallelism))
            rep = location_statistics(summaries, consts)
            res.results.append({"m": m, **rep.to_dict()})
            medians.append(rep.median)
            mus.append(consts.mu)
            res.checks.append(_band_check("median_location", rep.median, consts.mu, consts.mu - p["band"],
                                          consts.mu + p["band"], n, list(rep.median_ci), f"m={m}"))
            for s, v, vt in zip(summaries, rep.values, rep.values_tilde):
                res.rows.append({"n": n, "m": m, "replica": s.replica, "log_I_over_log_n": float(v),
                                 "log_I_tilde_over_log_n": float(vt)})
            res.samples[f"location_n{n}_m{m}"] = rep.values
        if len(ms) > 1:
            agree = bool(np.array_equal(np.argsort(medians), np.argsort(mus)))
            res.checks.append(Check("location_rank_order", float(agree), 1.0, [1.0, 1.0], agree, n, None,
                                    f"medians {medians} vs mu {mus}"))
    return res


def _high_degree(cfg, n, floor, parallelism):
    pairs = list(map_replicas(_growth(cfg, n), cfg.replicas, HighDegreeTask(max(int(floor), 1)), parallelism))
    return [q[0] for q in pairs], [q[1] for q in pairs]


def _run_marks(cfg, p, parallelism) -> ExperimentResult:
    windows = _windows(p["windows"])
    consts = analytics.limit_constants(cfg.model, cfg.m)
    lp = analytics.limit_process(cfg.model, cfg.m)
    res = ExperimentResult(columns=["n", "replica"] + [f"count_{k}" for k in range(len(windows))])
    for n in cfg.n:
        cs = analytics.centering(cfg.model, n, cfg.m, "level")
        _, samples = _high_degree(cfg, n, cs.center + min(w.j for w in windows), parallelism)
        ec = count_marked(samples, cs, consts, windows, p["mark"], (1, 2), p["c"])
        out = {"n": n, "centering": cs.to_dict(), **ec.to_dict(), "expected": [], "ks": []}
        lo, hi = p["dispersion_band"]
        for k, w in enumerate(windows):
            lam = lp.expected_count(w.j, cs.eps_n, w.a, w.b, w.mode)
            out["expected"].append(lam)
            tol = p["rel_tol"]
            se = float(ec.mean_se[k])
            res.checks.append(_band_check(f"mean_count[j={w.j}]", ec.mean[k], lam, lam * (1 - tol), lam * (1 + tol),
                                          n, [ec.mean[k] - 1.96 * se, ec.mean[k] + 1.96 * se]))
            res.checks.append(_band_check(f"dispersion[j={w.j}]", ec.dispersion[k], 1.0, lo, hi, n))
            if w.j in p["ks_levels"]:
                x = ec.window_marks[k]
                if x.size == 0:
                    out["ks"].append({"j": w.j, "count": 0})
                    res.checks.append(Check(f"mark_ks[j={w.j}]", math.nan, p["ks_alpha"], [p["ks_alpha"], 1.0],
                                            False, n, None, "no marks observed"))
                    continue
                inside = normal_cdf(w.b - lp.mark_mean) - normal_cdf(w.a - lp.mark_mean)
                lower = normal_cdf(w.a - lp.mark_mean)

                def cdf(v, lower=lower, inside=inside):
                    return (normal_cdf(np.asarray(v) - lp.mark_mean) - lower) / inside

                d, pv = ks_test(x, cdf)
                out["ks"].append({"j": w.j, "count": int(x.size), "ks_stat": d, "ks_pvalue": pv})
                res.checks.append(_band_check(f"mark_ks[j={w.j}]", pv, p["ks_alpha"], p["ks_alpha"], 1.0, n,
                                              note=f"KS p-value, D={d:.4g}, N={x.size}"))
                res.samples[f"marks_n{n}_j{w.j}"] = x
        res.results.append(out)
        for r, s in enumerate(samples):
            row = {"n": n, "replica": s.replica}
            row.update({f"count_{k}": int(ec.counts[r, k]) for k in range(len(windows))})
            res.rows.append(row)
    return res


def _run_moments(cfg, p, parallelism) -> ExperimentResult:
    windows = _windows(p["windows"])
    consts = analytics.limit_constants(cfg.model, cfg.m)
    lp = analytics.limit_process(cfg.model, cfg.m)
    res = ExperimentResult(columns=["n", "replica"] + [f"count_{k}" for k in range(len(windows))])
    tol = p["rel_tol"]
    for n in cfg.n:
        cs = analytics.centering(cfg.model, n, cfg.m, "level")
        _, samples = _high_degree(cfg, n, cs.center + min(w.j for w in windows), parallelism)
        ec = count_marked(samples, cs, consts, windows, "level", tuple(p["orders"]), p["c"])
        lams = [lp.expected_count(w.j, cs.eps_n, w.a, w.b, w.mode) for w in windows]
        out = {"n": n, "centering": cs.to_dict(), **ec.to_dict(), "expected_mean": lams, "expected_factorial": {}}
        for c in p["orders"]:
            out["expected_factorial"][str(c)] = [lam**c for lam in lams]
            for k, w in enumerate(windows):
                target = lams[k] ** c
                est = float(ec.factorial_moments[c][k])
                se = float(ec.factorial_se[c][k])
                res.checks.append(_band_check(f"factorial_moment[j={w.j},c={c}]", est, target, target * (1 - tol),
                                              target * (1 + tol), n, [est - 1.96 * se, est + 1.96 * se]))
        if p["joint_orders"] is not None:
            orders = list(p["joint_orders"])
            if len(orders) != len(windows):
                raise InvalidParameter("joint_orders needs one order per window")
            x = ec.counts.astype(float)
            prod = np.prod([falling_factorial(x[:, k], c) for k, c in enumerate(orders)], axis=0)
            target = float(np.prod([lam**c for lam, c in zip(lams, orders)]))
            est = float(prod.mean())
            se = jackknife_se(prod)
            out["joint"] = {"orders": orders, "estimate": est, "se": se, "expected": target}
            res.checks.append(_band_check("joint_factorial_moment", est, target, target * (1 - tol),
                                          target * (1 + tol), n, [est - 1.96 * se, est + 1.96 * se]))
        res.results.append(out)
        for r, s in enumerate(samples):
            row = {"n": n, "replica": s.replica}
            row.update({f"count_{k}": int(ec.counts[r, k]) for k in range(len(windows))})
            res.rows.append(row)
    return res


def conditional_threshold(model: WeightModel, n: int, m: int, d=None, d_fraction=0.5) -> int:
    """Explicit d, or ceil(d_fraction * log_theta n)."""
    if d is not None:
        return int(d)
    return math.ceil(d_fraction * math.log(n) / math.log(model.theta(m)))


def _run_conditional(cfg, p, parallelism) -> ExperimentResult:
    res = ExperimentResult(columns=["n", "replica", "z"])
    lp = analytics.limit_process(cfg.model, cfg.m)
    theta = lp.theta
    for n in cfg.n:
        d = conditional_threshold(cfg.model, n, cfg.m, p["d"], p["d_fraction"])
        _, samples = _high_degree(cfg, n, d, parallelism)
        try:
            cz = conditional_labels(samples, d, theta, lp.mark_mean, p["mode"], p["c"])
        except EmptySample as exc:
            res.results.append({"n": n, "d": d, "count": 0, "empty": str(exc)})
            res.checks.append(Check("conditional_nonempty", 0.0, 1.0, [1.0, math.inf], False, n, None, str(exc)))
            continue
        res.results.append({"n": n, **cz.to_dict()})
        res.checks.append(_band_check("conditional_ks", cz.ks_pvalue, p["ks_alpha"], p["ks_alpha"], 1.0, n,
                                      note=f"KS p-value, D={cz.ks_stat:.4g}, N={cz.count}"))
        if lp.mark_mean == 0.0:
            tol = p["mean_tol_abs"]
            res.checks.append(_band_check("conditional_mean", cz.mean, 0.0, -tol, tol, n, list(cz.mean_ci())))
        else:
            tol = p["mean_tol_rel"] * abs(lp.mark_mean)
            lo, hi = sorted((lp.mark_mean - tol, lp.mark_mean + tol))
            res.checks.append(_band_check("conditional_mean", cz.mean, lp.mark_mean, lo, hi, n, list(cz.mean_ci())))
            sign_ok = bool(np.sign(cz.mean) == np.sign(lp.mark_mean))
            res.checks.append(Check("conditional_mean_sign", cz.mean, lp.mark_mean,
                                    [0.0, math.copysign(math.inf, lp.mark_mean)], sign_ok, n, list(cz.mean_ci())))
        if p["sd_tol"] is not None:
            tol = p["sd_tol"]
            res.checks.append(_band_check("conditional_sd", cz.sd, 1.0, 1 - tol, 1 + tol, n, list(cz.sd_ci())))
        for z, r in zip(cz.z, cz.replicas):
            res.rows.append({"n": n, "replica": int(r), "z": float(z)})
        res.samples[f"z_n{n}"] = cz.z
    return res


_RUNNERS = {
    "max-degree": _run_max_degree,
    "location": _run_location,
    "marks": _run_marks,
    "conditional": _run_conditional,
    "moments": _run_moments,
}


def resolve_params(preset: str, params: dict | None) -> dict:
    if preset not in PRESET_DEFAULTS:
        raise InvalidParameter(f"unknown preset {preset!r}")
    out = dict(PRESET_DEFAULTS[preset])
    for k, v in (params or {}).items():
        if k not in out:
            raise InvalidParameter(f"unknown parameter {k!r} for preset {preset!r}")
        out[k] = v
    return out


def run_preset(cfg, parallelism: int | None = None) -> ExperimentResult:
    """``cfg`` provides model, n (list), m, variant, replicas, seed, preset and params."""
    params = resolve_params(cfg.preset, cfg.params)
    return _RUNNERS[cfg.preset](cfg, params, parallelism)
