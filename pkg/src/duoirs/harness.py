"""Experiment runner: sweeps, Monte-Carlo trials, and CSV output.

An experiment is described by a flat JSON object (see ExperimentSpec).
Each sweep point runs a number of trials; trial t of sweep point s draws
its channel from SeedSequence(seed, spawn_key=(s, t)) and its noise from
per-variant children of the same key, so runs are reproducible and
different designs see identical channels.  Results come back as rows of
(sweep, metric, mean, stderr, trials, theory) and can be written as CSV.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .benchmarks import (
    decoupled_design,
    decoupled_estimate,
    decoupled_overhead,
    per_antenna_overhead,
)
from .channel_model import SystemConfig, cascade, gen_channels
from .errors import (
    ConfigError,
    DegenerateChannelError,
    DuoIrsError,
    RankDeficiencyError,
)
from .estimators import (
    ls_phase1,
    ls_phase2_case1,
    normalized_mse,
    recover_single_user,
    run_pipeline,
    theoretical_mse_phase1,
    theoretical_mse_phase2_case1,
    _phase1_measurements,
    _phase2_measurements,
)
from .training_design import (
    Phase1Schedule,
    phase1_design,
    phase2_design_case1,
    phase2_design_case2,
    phase2_design_heuristic,
    phase2_design_random,
    phase3_design,
    phase_overheads,
    proposed_overhead,
    _unit_phases,
)

EXPERIMENTS = (
    "overhead_vs_N",
    "overhead_vs_K",
    "mse_design_phase1",
    "mse_design_phase2",
    "mse_vs_allocation",
    "mse_single_user",
    "mse_multi_user",
)

# spawn-key namespace for design draws, far above any sweep index
_DESIGN_KEY = 1_000_000


@dataclass
class ExperimentSpec:
    """Flat description of one experiment run.

    Which sweep list applies depends on the experiment: n_values for
    overhead_vs_N, k_values for overhead_vs_K, i1_values (with budget)
    for mse_vs_allocation, powers_dbm for the MSE experiments.
    """

    experiment: str
    n: int = 8
    m1: int = 8
    m2: int = 8
    k: int = 1
    trials: int = 200
    seed: int = 0
    geometry: str = "desk"
    powers_dbm: Optional[list] = None
    n_values: Optional[list] = None
    k_values: Optional[list] = None
    i1_values: Optional[list] = None
    budget: int = 200
    i1: Optional[int] = None
    i2: Optional[int] = None
    i3: Optional[int] = None
    phase2_mode: str = "random"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                "unknown experiment %r, expected one of %s"
                % (self.experiment, ", ".join(EXPERIMENTS))
            )
        if self.geometry not in ("desk", "wide_area"):
            raise ConfigError(
                "geometry must be 'desk' or 'wide_area', got %r" % (self.geometry,)
            )
        if self.trials < 1:
            raise ConfigError("trials must be >= 1, got %r" % (self.trials,))

    @classmethod
    def from_dict(cls, payload):
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(
                "unknown config keys: %s" % ", ".join(sorted(unknown))
            )
        if "experiment" not in payload:
            raise ConfigError("config must name an experiment")
        return cls(**payload)

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("invalid JSON in %s: %s" % (path, exc)) from exc
        if not isinstance(payload, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(payload)

    def base_config(self, power_dbm=None, n=None, k=None):
        kw = dict(n=n if n is not None else self.n,
                  m1=self.m1, m2=self.m2,
                  k=k if k is not None else self.k,
                  seed=self.seed)
        if power_dbm is not None:
            kw["tx_power_dbm"] = power_dbm
        if self.geometry == "wide_area":
            return SystemConfig.wide_area(**kw)
        return SystemConfig(**kw)


@dataclass
class ResultRow:
    sweep: float
    metric: str
    mean: float
    stderr: float
    trials: int
    theory: float


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    failures: int = 0

    def add(self, sweep, metric, mean, stderr, trials, theory=math.nan):
        self.rows.append(ResultRow(float(sweep), str(metric), float(mean),
                                   float(stderr), int(trials), float(theory)))

    def metrics(self, metric):
        return [r for r in self.rows if r.metric == metric]

    def value(self, sweep, metric):
        for r in self.rows:
            if r.metric == metric and r.sweep == float(sweep):
                return r
        raise KeyError("no row for sweep=%r metric=%r" % (sweep, metric))


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return np.format_float_scientific(x, unique=True)


def _fmt_sci(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    return np.format_float_scientific(x, unique=True)


def emit_csv(table, out):
    """Write a result table as CSV (UTF-8, LF line endings).

    out may be a path or a writable text file object.
    """
    lines = ["sweep,metric,mean,stderr,trials,theory"]
    for r in table.rows:
        lines.append(",".join([
            _fmt(r.sweep),
            r.metric,
            _fmt_sci(r.mean),
            _fmt_sci(r.stderr),
            str(r.trials),
            _fmt_sci(r.theory),
        ]))
    text = "\n".join(lines) + "\n"
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def _mean_stderr(values):
    arr = np.asarray(values, dtype=float)
    m = float(arr.mean())
    if arr.size < 2:
        return m, 0.0
    return m, float(arr.std(ddof=1) / np.sqrt(arr.size))


def _noise_rng(seed, sweep_idx, trial_idx, variant):
    ss = np.random.SeedSequence(
        seed, spawn_key=(int(sweep_idx), int(trial_idx), int(variant))
    )
    return np.random.default_rng(ss)


def _design_rng(seed, sweep_idx, salt=0):
    ss = np.random.SeedSequence(
        seed, spawn_key=(_DESIGN_KEY + int(salt), int(sweep_idx))
    )
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# Overhead experiments
# ---------------------------------------------------------------------------


def _run_overhead(spec, sweep_name):
    table = ResultTable()
    values = spec.n_values if sweep_name == "n" else spec.k_values
    if not values:
        raise ConfigError(
            "experiment %s needs %s_values" % (spec.experiment, sweep_name)
        )
    for v in values:
        v = int(v)
        n = v if sweep_name == "n" else spec.n
        k = v if sweep_name == "k" else spec.k
        total_p = proposed_overhead(n, spec.m1, spec.m2, k)
        total_d = decoupled_overhead(n, spec.m1, spec.m2, k)
        table.add(v, "overhead_proposed", total_p, 0.0, 0, total_p)
        table.add(v, "overhead_decoupled", total_d, 0.0, 0, total_d)
        if spec.m1 == spec.m2:
            total_a = per_antenna_overhead(spec.m1, spec.m2, k)
            table.add(v, "overhead_per_antenna", total_a, 0.0, 0, total_a)
    return table


# ---------------------------------------------------------------------------
# Phase-design MSE experiments
# ---------------------------------------------------------------------------


def _random_phase1_schedule(m2, i1, rng):
    theta_bar2 = np.vstack([
        np.ones((1, i1), dtype=np.complex128),
        _unit_phases(rng, (m2, i1)),
    ])
    return Phase1Schedule(i1=i1, theta_bar2=theta_bar2)


def _run_mse_design_phase1(spec):
    """DFT against random phase-I schedules, fresh random draw per trial."""
    if not spec.powers_dbm:
        raise ConfigError("mse_design_phase1 needs powers_dbm")
    i1 = spec.i1 if spec.i1 is not None else spec.m2 + 1
    table = ResultTable()
    sched_opt = phase1_design(spec.m2, i1, m1=spec.m1)
    for s_idx, p in enumerate(spec.powers_dbm):
        cfg = spec.base_config(power_dbm=p)
        errs = {"phase1_optimal": [], "phase1_random": []}
        theories_rnd = []
        for t in range(spec.trials):
            cc = cascade(gen_channels(cfg, (s_idx, t)))
            m_true = np.hstack([cc.g1u[:, None], cc.qbar])
            sched_rnd = _random_phase1_schedule(
                spec.m2, i1, _noise_rng(spec.seed, s_idx, t, 99)
            )
            theories_rnd.append(
                theoretical_mse_phase1(sched_rnd.theta_bar2, cfg.sigma2)
            )
            for v_idx, (name, sched) in enumerate(
                [("phase1_optimal", sched_opt), ("phase1_random", sched_rnd)]
            ):
                rng = _noise_rng(spec.seed, s_idx, t, v_idx)
                z1 = _phase1_measurements(cc, sched, cfg.sigma2, rng)
                g1_hat, qbar_hat = ls_phase1(z1, sched.theta_bar2)
                m_hat = np.hstack([g1_hat[:, None], qbar_hat])
                errs[name].append(
                    np.sum(np.abs(m_hat - m_true) ** 2) / m_true.size
                )
        mean, se = _mean_stderr(errs["phase1_optimal"])
        table.add(p, "phase1_optimal", mean, se, spec.trials,
                  theoretical_mse_phase1(sched_opt.theta_bar2, cfg.sigma2))
        mean, se = _mean_stderr(errs["phase1_random"])
        table.add(p, "phase1_random", mean, se, spec.trials,
                  float(np.mean(theories_rnd)))
    return table


def _run_mse_design_phase2(spec):
    if not spec.powers_dbm:
        raise ConfigError("mse_design_phase2 needs powers_dbm")
    if spec.n < spec.m2:
        raise ConfigError(
            "mse_design_phase2 compares case-1 designs and needs n >= m2"
        )
    i2 = spec.i2 if spec.i2 is not None else 2 * spec.m1 + 1
    table = ResultTable()
    sched_opt = phase2_design_case1(spec.m1, i2)
    sched_heu = phase2_design_heuristic(spec.m1, i2)
    for s_idx, p in enumerate(spec.powers_dbm):
        cfg = spec.base_config(power_dbm=p)
        errs = {"phase2_optimal": [], "phase2_heuristic": [],
                "phase2_random": []}
        theories_rnd = []
        for t in range(spec.trials):
            cc = cascade(gen_channels(cfg, (s_idx, t)))
            f_true = np.hstack([cc.qbar @ cc.e_mat, cc.r[0]])
            sched_rnd = phase2_design_random(
                spec.m1, i2, seed=_noise_rng(spec.seed, s_idx, t, 99)
            )
            theories_rnd.append(
                theoretical_mse_phase2_case1(sched_rnd.omega, cfg.sigma2)
            )
            variants = [
                ("phase2_optimal", sched_opt, False),
                ("phase2_heuristic", sched_heu, True),
                ("phase2_random", sched_rnd, False),
            ]
            for v_idx, (name, sched, allow) in enumerate(variants):
                rng = _noise_rng(spec.seed, s_idx, t, v_idx)
                z2 = _phase2_measurements(cc, sched, cfg.sigma2, rng)
                _, _, f_hat = ls_phase2_case1(
                    z2, cc.qbar, sched.omega, allow_rank_deficient=allow
                )
                errs[name].append(
                    np.sum(np.abs(f_hat - f_true) ** 2) / f_true.size
                )
        theory = {
            "phase2_optimal": theoretical_mse_phase2_case1(
                sched_opt.omega, cfg.sigma2),
            "phase2_heuristic": math.nan,
            "phase2_random": float(np.mean(theories_rnd)),
        }
        for name in errs:
            mean, se = _mean_stderr(errs[name])
            table.add(p, name, mean, se, spec.trials, theory[name])
    return table


def _run_mse_vs_allocation(spec):
    """Trade-off between phases I and II under a fixed pilot budget.

    Q-bar improves with I1 and R with I2 = budget - I1 (pure noise LS, so
    theory is exact), while E, the q stack, and r_tilde go through the
    estimated q-bar and show the propagation trade-off: noisy q-bar at
    small I1, noisy composite fit at small I2.

    Channel draws are shared across the allocation grid (common random
    numbers) so the sweep compares allocations on the same channel set;
    only the pilot noise is redrawn per grid point.
    """
    if not spec.i1_values:
        raise ConfigError("mse_vs_allocation needs i1_values")
    if spec.n < spec.m2:
        raise ConfigError("mse_vs_allocation uses the case-1 solver, needs n >= m2")
    table = ResultTable()
    power = spec.powers_dbm[0] if spec.powers_dbm else None
    cfg0 = spec.base_config(power_dbm=power)
    sigma2 = cfg0.sigma2
    for s_idx, i1 in enumerate(spec.i1_values):
        i1 = int(i1)
        i2 = spec.budget - i1
        if i1 < spec.m2 + 1 or i2 < 2 * spec.m1 + 1:
            raise ConfigError(
                "allocation i1=%d leaves i2=%d, below the phase minimums"
                % (i1, i2)
            )
        sched1 = phase1_design(spec.m2, i1, m1=spec.m1)
        sched2 = phase2_design_case1(spec.m1, i2)
        acc = {name: [] for name in
               ("qbar_coeff", "r_coeff", "nmse_e", "nmse_q", "nmse_rtilde")}
        for t in range(spec.trials):
            cc = cascade(gen_channels(cfg0, (0, t)))
            rng = _noise_rng(spec.seed, s_idx, t, 0)
            z1 = _phase1_measurements(cc, sched1, sigma2, rng)
            _, qbar_hat = ls_phase1(z1, sched1.theta_bar2)
            z2 = _phase2_measurements(cc, sched2, sigma2, rng)
            e_hat, r_hat, _ = ls_phase2_case1(z2, qbar_hat, sched2.omega)
            r_tilde_hat, q_hat = recover_single_user(qbar_hat, e_hat)
            acc["qbar_coeff"].append(
                np.sum(np.abs(qbar_hat - cc.qbar) ** 2) / cc.qbar.size
            )
            acc["r_coeff"].append(
                np.sum(np.abs(r_hat - cc.r[0]) ** 2) / cc.r[0].size
            )
            acc["nmse_e"].append(normalized_mse(e_hat, cc.e_mat))
            acc["nmse_q"].append(normalized_mse(q_hat, np.stack(cc.q[0])))
            acc["nmse_rtilde"].append(normalized_mse(r_tilde_hat, cc.r_tilde[0]))
        theory = {
            "qbar_coeff": theoretical_mse_phase1(sched1.theta_bar2, sigma2),
            "r_coeff": theoretical_mse_phase2_case1(sched2.omega, sigma2),
        }
        for name, vals in acc.items():
            mean, se = _mean_stderr(vals)
            table.add(i1, name, mean, se, spec.trials,
                      theory.get(name, math.nan))
    return table


# ---------------------------------------------------------------------------
# End-to-end MSE experiments
# ---------------------------------------------------------------------------


def _proposed_schedules(spec, rng):
    i1, i2, i3 = phase_overheads(spec.n, spec.m1, spec.m2, spec.k)
    i1 = spec.i1 if spec.i1 is not None else i1
    i2 = spec.i2 if spec.i2 is not None else i2
    i3 = spec.i3 if spec.i3 is not None else i3
    sched1 = phase1_design(spec.m2, i1, m1=spec.m1)
    if spec.n >= spec.m2:
        sched2 = phase2_design_case1(spec.m1, i2)
    else:
        sched2 = phase2_design_case2(
            spec.m1, spec.m2, spec.n, i2, mode=spec.phase2_mode, seed=rng
        )
    sched3 = None
    if spec.k > 1:
        sched3 = phase3_design(spec.n, spec.m1, spec.m2, spec.k, i3, seed=rng)
    return sched1, sched2, sched3


def _run_mse_single_user(spec):
    if not spec.powers_dbm:
        raise ConfigError("mse_single_user needs powers_dbm")
    table = ResultTable()
    for s_idx, p in enumerate(spec.powers_dbm):
        cfg = spec.base_config(power_dbm=p)
        sched1, sched2, sched3 = _proposed_schedules(
            spec, _design_rng(spec.seed, s_idx)
        )
        acc = {name: [] for name in
               ("nmse_r", "nmse_rtilde", "nmse_q", "nmse_qbar", "phase1_coeff")}
        failed = 0
        for t in range(spec.trials):
            try:
                cc = cascade(gen_channels(cfg, (s_idx, t)))
                rng = _noise_rng(spec.seed, s_idx, t, 0)
                rep = run_pipeline(cc, sched1, sched2, sched3,
                                   sigma2=cfg.sigma2, rng=rng)
            except (RankDeficiencyError, DegenerateChannelError):
                failed += 1
                continue
            m_true = np.hstack([cc.g1u[:, None], cc.qbar])
            m_hat = np.hstack([rep.g1_hat[:, None], rep.qbar_hat])
            acc["phase1_coeff"].append(
                np.sum(np.abs(m_hat - m_true) ** 2) / m_true.size
            )
            acc["nmse_r"].append(normalized_mse(rep.r_hat, cc.r[0]))
            acc["nmse_rtilde"].append(normalized_mse(rep.r_tilde_hat, cc.r_tilde[0]))
            acc["nmse_q"].append(normalized_mse(rep.q_hat, cc.q[0]))
            acc["nmse_qbar"].append(normalized_mse(rep.qbar_hat, cc.qbar))
        table.failures += failed
        done = spec.trials - failed
        if done == 0:
            raise DuoIrsError("all trials failed at sweep point %r" % (p,))
        th1 = theoretical_mse_phase1(sched1.theta_bar2, cfg.sigma2)
        for name, vals in acc.items():
            mean, se = _mean_stderr(vals)
            theory = th1 if name == "phase1_coeff" else math.nan
            table.add(p, name, mean, se, done, theory)
    if table.failures:
        warnings.warn("%d trials failed and were skipped" % table.failures)
    return table


def _run_mse_multi_user(spec):
    if not spec.powers_dbm:
        raise ConfigError("mse_multi_user needs powers_dbm")
    if spec.k < 2:
        raise ConfigError("mse_multi_user needs k >= 2")
    table = ResultTable()
    total_budget = proposed_overhead(spec.n, spec.m1, spec.m2, spec.k)
    for s_idx, p in enumerate(spec.powers_dbm):
        cfg = spec.base_config(power_dbm=p)
        drng = _design_rng(spec.seed, s_idx)
        sched1, sched2, sched3 = _proposed_schedules(spec, drng)
        dec_sched = decoupled_design(
            spec.n, spec.m1, spec.m2, spec.k,
            total=total_budget, seed=_design_rng(spec.seed, s_idx, salt=1),
        )
        names = ["prop_nmse_r", "prop_nmse_rtilde", "prop_nmse_q",
                 "prop_nmse_lambda", "prop_nmse_total",
                 "dec_nmse_r", "dec_nmse_rtilde", "dec_nmse_q",
                 "dec_nmse_lambda", "dec_nmse_total"]
        acc = {name: [] for name in names}
        failed = 0
        for t in range(spec.trials):
            try:
                cc = cascade(gen_channels(cfg, (s_idx, t)))
                rep = run_pipeline(
                    cc, sched1, sched2, sched3, sigma2=cfg.sigma2,
                    rng=_noise_rng(spec.seed, s_idx, t, 0),
                )
                dec = decoupled_estimate(
                    cc, dec_sched, sigma2=cfg.sigma2,
                    rng=_noise_rng(spec.seed, s_idx, t, 1),
                )
            except (RankDeficiencyError, DegenerateChannelError):
                failed += 1
                continue
            lam_prop = rep.lambda_hat
            lam_dec = np.vstack([dec.b_hat, dec.b_tilde_hat])
            # reference-user CSI groups plus the scaling vectors
            for tag, rep_k, lam in (("prop", rep, lam_prop),
                                    ("dec", dec, lam_dec)):
                acc[tag + "_nmse_r"].append(
                    normalized_mse(rep_k.r_users[0], cc.r[0]))
                acc[tag + "_nmse_rtilde"].append(
                    normalized_mse(rep_k.r_tilde_users[0], cc.r_tilde[0]))
                acc[tag + "_nmse_q"].append(
                    normalized_mse(np.stack(rep_k.q_users[0]), np.stack(cc.q[0])))
                acc[tag + "_nmse_lambda"].append(normalized_mse(lam, cc.lam))
                est_all = np.concatenate([
                    np.stack(rep_k.r_users).ravel(),
                    np.stack(rep_k.r_tilde_users).ravel(),
                    np.stack(rep_k.q_users).ravel(),
                ])
                true_all = np.concatenate([
                    np.stack(cc.r).ravel(),
                    np.stack(cc.r_tilde).ravel(),
                    np.stack(cc.q).ravel(),
                ])
                acc[tag + "_nmse_total"].append(
                    normalized_mse(est_all, true_all))
        table.failures += failed
        done = spec.trials - failed
        if done == 0:
            raise DuoIrsError("all trials failed at sweep point %r" % (p,))
        for name in names:
            mean, se = _mean_stderr(acc[name])
            table.add(p, name, mean, se, done, math.nan)
        gain_db = 10.0 * math.log10(sched2.i2 / dec_sched.i_a)
        table.add(p, "r_gain_db", gain_db, 0.0, 0, gain_db)
    if table.failures:
        warnings.warn("%d trials failed and were skipped" % table.failures)
    return table


def run_experiment(spec):
    """Run the experiment described by spec and return a ResultTable."""
    if spec.experiment == "overhead_vs_N":
        return _run_overhead(spec, "n")
    if spec.experiment == "overhead_vs_K":
        return _run_overhead(spec, "k")
    if spec.experiment == "mse_design_phase1":
        return _run_mse_design_phase1(spec)
    if spec.experiment == "mse_design_phase2":
        return _run_mse_design_phase2(spec)
    if spec.experiment == "mse_vs_allocation":
        return _run_mse_vs_allocation(spec)
    if spec.experiment == "mse_single_user":
        return _run_mse_single_user(spec)
    if spec.experiment == "mse_multi_user":
        return _run_mse_multi_user(spec)
    raise ConfigError("unknown experiment %r" % (spec.experiment,))
