"""Episodes, ensembles and the experiment protocols built on them."""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from infobandit import _kernels
from infobandit.asymptotics import lai_robbins_constant
from infobandit.belief import differential_entropy, make_grid, max_density, prob_best, state_key
from infobandit.core import ArmStats, kl_bernoulli
from infobandit.env import BanditEnv, expected_regret, realization_rng
from infobandit.fastsim import InfoPProbe, LeaderRun, stretch_lower_bound, thompson_stretch
from infobandit.policies import GRID_KINDS, INDEX_KINDS, KINDS, PolicyConfig

WORKERS_ENV = "INFOBANDIT_WORKERS"
FAST_MODES = ("info-p", "thompson", "off")

__all__ = [
    "BanditEnv", "EpisodeTrace", "EnsembleResult", "ExperimentConfig", "FastSimConfig",
    "SlopeFit", "VoiResult", "below_boundary_fraction", "boundary_envelope", "boundary_scatter",
    "checkpoint_grid", "entropy_decay_experiment", "run_ensemble", "run_episode", "run_traces",
    "slope_fit", "summarize", "voi_experiment",
]


@dataclass(frozen=True)
class FastSimConfig:
    enabled: bool = True
    min_n: int = 1000
    mode: str | None = None
    initial_guess: int = 16
    track: bool = True

    def __post_init__(self):
        if self.mode is not None and self.mode not in FAST_MODES:
            raise ValueError(f"fast_sim.mode must be one of {', '.join(FAST_MODES)}")
        if self.min_n < 0:
            raise ValueError("fast_sim.min_n must be non-negative")
        if self.initial_guess < 1:
            raise ValueError("fast_sim.initial_guess must be positive")

    def mode_for(self, kind: str) -> str:
        if not self.enabled:
            return "off"
        natural = kind if kind in ("info-p", "thompson") else "off"
        mode = natural if self.mode is None else self.mode
        if mode != "off" and mode != natural:
            raise ValueError(f"fast_sim.mode {mode!r} does not apply to policy {kind!r}")
        return mode


@dataclass(frozen=True)
class ExperimentConfig:
    arms: tuple
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    horizon: int = 1000
    ensemble: int = 1
    seed: int = 0
    checkpoints_per_decade: int = 32
    fast_sim: FastSimConfig = field(default_factory=FastSimConfig)
    record_entropy: bool = True
    voi_level: int | None = None
    pretrain_cap: int = 100_000
    workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(float(p) for p in self.arms))
        if len(self.arms) < 2:
            raise ValueError("arms: need at least two arms")
        if any(not 0.0 <= p <= 1.0 for p in self.arms):
            raise ValueError("arms: success probabilities must lie in [0, 1]")
        if self.horizon < len(self.arms):
            raise ValueError("horizon: must be at least the number of arms")
        if self.ensemble < 1:
            raise ValueError("ensemble: must be at least 1")
        if self.checkpoints_per_decade < 1:
            raise ValueError("checkpoints_per_decade: must be positive")
        if self.voi_level is not None and self.voi_level < 0:
            raise ValueError("voi_level: must be non-negative")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers: must be positive")
        self.fast_sim.mode_for(self.policy.kind)

    @property
    def best(self) -> int:
        return int(np.argmax(self.arms))


def checkpoint_grid(horizon: int, per_decade: int = 32) -> np.ndarray:
    """Log-spaced play counts from 1 to the horizon, per_decade per factor of ten."""
    top = math.ceil(per_decade * math.log10(horizon)) + 1
    pts = np.unique(np.round(10.0 ** (np.arange(top + 1) / per_decade)).astype(np.int64))
    pts = pts[pts < horizon]
    return np.append(pts, np.int64(horizon))


@dataclass
class EpisodeTrace:
    """Checkpointed history of one realization.

    `events` has one row per play of an arm other than the true best:
    (n before the play, arm, w_1, n_1, ..., w_K, n_K) at decision time.
    """

    checkpoints: np.ndarray
    regret: np.ndarray
    reward: np.ndarray
    log_h: np.ndarray
    h_max: np.ndarray
    plays: np.ndarray
    events: np.ndarray
    seed: tuple
    switch_n: int = 0
    switch_regret: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def suboptimal_events(self) -> np.ndarray:
        """(n, plays of the played arm) for every suboptimal play."""
        if self.events.size == 0:
            return np.zeros((0, 2), dtype=np.int64)
        arm = self.events[:, 1]
        plays = self.events[np.arange(len(arm)), 3 + 2 * arm]
        return np.column_stack([self.events[:, 0], plays])

    @property
    def regret_since_switch(self) -> np.ndarray:
        out = self.regret - self.switch_regret
        out[self.checkpoints < self.switch_n] = np.nan
        return out


class _Episode:
    """Mutable state of one realization while it is being played."""

    def __init__(self, config: ExperimentConfig, index: int):
        self.config = config
        self.settings = config.policy.grid
        self.rng = realization_rng(config.seed, index)
        self.probs = np.array(config.arms, dtype=float)
        self.best = config.best
        k = len(config.arms)
        self.w = np.zeros(k, dtype=np.int64)
        self.n = np.zeros(k, dtype=np.int64)
        self.n_total = 0
        self.events = np.zeros((256, 2 + 2 * k), dtype=np.int64)
        self.n_events = 0
        self.epochs = np.zeros(k, dtype=np.int64)
        self.pending = np.zeros(2, dtype=np.int64)
        self._arrays = None
        self._arrays_kind = None
        self._skip_fast = False
        self._run = None
        self._run_origin = None
        self._stretch_guess = config.fast_sim.initial_guess
        self._thompson = None
        self.diag = {"relayouts": 0, "fast_entries": 0, "probes": 0, "convexity_failures": 0,
                     "fast_plays": 0}

    # -- shared helpers

    def stats(self) -> tuple:
        return tuple(ArmStats(int(a), int(b)) for a, b in zip(self.w, self.n))

    def _grow_events(self):
        self.events = np.concatenate([self.events, np.zeros_like(self.events)])

    def _key_args(self):
        return self.settings.key_args()

    def _ensure_arrays(self, kind: str):
        if self._arrays is not None and self._arrays_kind == kind:
            return self._arrays
        grid = make_grid(self.stats(), self.settings)
        keys = np.array(state_key(grid.stats, self.settings), dtype=np.int64)
        x = np.array(grid.nodes)
        wq = np.array(grid.weights)
        if kind == "linear":
            arrays = (x, wq, np.ascontiguousarray(grid.pdf), np.ascontiguousarray(grid.cdf), keys)
        else:
            with np.errstate(divide="ignore"):
                lx = np.log(x)
                l1x = np.log1p(-x)
            arrays = (x, lx, l1x, np.log(wq), np.array(grid.log_pdf), np.array(grid.log_cdf), keys)
        self._arrays = arrays
        self._arrays_kind = kind
        self.diag["relayouts"] += 1
        return arrays

    def _moved(self):
        self._arrays = None

    def _fast_min(self, fast: bool) -> int:
        if not fast:
            return -1
        if self._skip_fast:
            self._skip_fast = False
            return self.n_total + 1
        return self.config.fast_sim.min_n

    def _apply(self, arm, plays, wins):
        self.w[arm] += wins
        self.n[arm] += plays
        self.n_total += plays
        if plays:
            self._moved()

    # -- Info-p

    def advance_infop(self, stop: int, fast: bool):
        fs = self.config.fast_sim
        while self.n_total < stop:
            x, wq, P, F, keys = self._ensure_arrays("linear")
            status, nt, ne = _kernels.infop_steps(
                x, wq, P, F, self.w, self.n, self.probs, self.best, self.rng, self.n_total, stop,
                self._fast_min(fast), keys, *self._key_args(), self.events, self.n_events)
            self.n_total, self.n_events = nt, ne
            if status == _kernels.RELAYOUT:
                self._moved()
            elif status == _kernels.EVENTS_FULL:
                self._grow_events()
            elif status == _kernels.FAST:
                arm = _kernels.leader(self.w, self.n)
                if arm != self.best:
                    self._skip_fast = True
                    continue
                self.diag["fast_entries"] += 1
                if fs.track:
                    self._leader_run(arm, stop)
                else:
                    self._a1_stretch(arm, stop)

    def _leader_run(self, arm, stop):
        run = self._run
        if run is None or run.ended or self._run_origin != (arm, int(self.w[arm]) - run.k,
                                                           int(self.n[arm]) - run.j):
            probe = InfoPProbe(self.w, self.n, arm, self.settings)
            run = LeaderRun(probe, self.config.horizon - self.n_total, self._stretch_guess)
            self._stretch_guess = max(1, 2 * run.a1_length)
            self._run = run
            self._run_origin = (arm, int(self.w[arm]), int(self.n[arm]))
        calls = run.probe.calls
        plays, wins = run.advance(stop - self.n_total, float(self.probs[arm]), self.rng)
        self.diag["probes"] += run.probe.calls - calls
        self.diag["convexity_failures"] = max(self.diag["convexity_failures"], run.convexity_failures)
        self.diag["fast_plays"] += plays
        self._apply(arm, plays, wins)
        if plays == 0:
            self._skip_fast = True
        if run.ended:
            self._run = None

    def _a1_stretch(self, arm, stop):
        probe = InfoPProbe(self.w, self.n, arm, self.settings)
        length = stretch_lower_bound(probe.decide, probe.base_stats(), arm, self._stretch_guess,
                                     cap=self.config.horizon - self.n_total)
        self._stretch_guess = max(1, 2 * length)
        self.diag["probes"] += probe.calls
        length = min(length, stop - self.n_total)
        wins = int(self.rng.binomial(length, self.probs[arm]))
        self.diag["fast_plays"] += length
        self._apply(arm, length, wins)

    # -- Info-id and max-ent

    def advance_identity(self, stop: int, relative: bool, log_h_stop: float = -np.inf) -> bool:
        """Returns True when ln H(b_max) reached log_h_stop."""
        if log_h_stop > -np.inf and self.current_log_h() <= log_h_stop:
            return True
        while self.n_total < stop:
            x, lx, l1x, lnw, lnP, lnF, keys = self._ensure_arrays("log")
            status, nt, ne = _kernels.identity_steps(
                x, lx, l1x, lnw, lnP, lnF, self.w, self.n, self.probs, self.best, self.rng,
                self.n_total, stop, relative, log_h_stop, keys, *self._key_args(),
                self.events, self.n_events)
            self.n_total, self.n_events = nt, ne
            if status == _kernels.RELAYOUT:
                self._moved()
            elif status == _kernels.EVENTS_FULL:
                self._grow_events()
            elif status == _kernels.THRESHOLD:
                self._moved()
                return True
        return False

    def current_log_h(self) -> float:
        return prob_best(make_grid(self.stats(), self.settings)).log_identity_entropy

    # -- Thompson

    def advance_thompson(self, stop: int, fast: bool):
        while self.n_total < stop:
            if self._thompson is not None:
                self._continue_thompson_stretch(stop)
                continue
            status, nt, ne = _kernels.thompson_steps(
                self.w, self.n, self.probs, self.best, self.rng, self.n_total, stop,
                self._fast_min(fast), self.events, self.n_events)
            self.n_total, self.n_events = nt, ne
            if status == _kernels.EVENTS_FULL:
                self._grow_events()
            elif status == _kernels.FAST:
                lead = _kernels.leader(self.w, self.n)
                belief = prob_best(make_grid(self.stats(), self.settings))
                if lead != self.best or belief.best != self.best or belief.q[self.best] <= 0.5:
                    self._skip_fast = True
                    continue
                self.diag["fast_entries"] += 1
                stretch, nxt = thompson_stretch(belief, self.rng)
                remaining = min(stretch.length, self.config.horizon - self.n_total)
                self._thompson = [stretch.arm, remaining, nxt]

    def _continue_thompson_stretch(self, stop):
        arm, remaining, nxt = self._thompson
        if remaining > 0:
            take = min(remaining, stop - self.n_total)
            wins = int(self.rng.binomial(take, self.probs[arm]))
            self.diag["fast_plays"] += take
            self._apply(arm, take, wins)
            self._thompson[1] = remaining - take
            return
        if nxt != self.best:
            if self.n_events >= self.events.shape[0]:
                self._grow_events()
            _kernels._push_event(self.events, self.n_events, self.n_total, nxt, self.w, self.n)
            self.n_events += 1
        win = int(self.rng.random() < self.probs[nxt])
        self._apply(nxt, 1, win)
        self._thompson = None

    # -- index policies

    def advance_index(self, stop: int):
        pol = self.config.policy
        kind = INDEX_KINDS[pol.kind]
        while self.n_total < stop:
            status, nt, ne = _kernels.index_steps(
                kind, self.w, self.n, self.probs, self.best, self.rng, self.n_total, stop,
                pol.xi, pol.c, pol.alpha, self.epochs, self.pending, self.events, self.n_events)
            self.n_total, self.n_events = nt, ne
            if status == _kernels.EVENTS_FULL:
                self._grow_events()

    # -- dispatch

    def advance(self, kind: str, stop: int):
        mode = self.config.fast_sim.mode_for(kind) if self.config.fast_sim.enabled else "off"
        if kind == "info-p":
            self.advance_infop(stop, mode == "info-p")
        elif kind in ("info-id", "max-ent"):
            self.advance_identity(stop, relative=(kind == "max-ent"))
        elif kind == "thompson":
            self.advance_thompson(stop, mode == "thompson")
        else:
            self.advance_index(stop)


def _entropies(stats, settings):
    grid = make_grid(stats, settings)
    lh = prob_best(grid).log_identity_entropy
    hm = differential_entropy(max_density(grid), grid.nodes, grid.weights)
    return lh, hm


def run_episode(config: ExperimentConfig, index: int) -> EpisodeTrace:
    """Play one realization from n = 0 to the horizon."""
    ep = _Episode(config, index)
    cps = checkpoint_grid(config.horizon, config.checkpoints_per_decade)
    c = cps.size
    k = len(config.arms)
    regret = np.full(c, np.nan)
    reward = np.zeros(c, dtype=np.int64)
    log_h = np.full(c, np.nan)
    h_max = np.full(c, np.nan)
    plays = np.zeros((c, k), dtype=np.int64)
    kind = config.policy.kind
    switch_n, switch_regret = 0, 0.0
    if config.voi_level is not None and config.voi_level > 0:
        target = math.log(math.log(2.0)) - config.voi_level * math.log(2.0)
        reached = ep.advance_identity(min(config.pretrain_cap, config.horizon), relative=False,
                                      log_h_stop=target)
        ep.diag["pretrain_capped"] = not reached
        switch_n = ep.n_total
        switch_regret = expected_regret(config.arms, ep.n)
        ep._run = None
    for ci, cp in enumerate(cps):
        if cp >= ep.n_total:
            ep.advance(kind, int(cp))
        else:
            continue
        plays[ci] = ep.n
        regret[ci] = expected_regret(config.arms, ep.n)
        reward[ci] = int(ep.w.sum())
        if config.record_entropy:
            log_h[ci], h_max[ci] = _entropies(ep.stats(), ep.settings)
    ep.diag["n_final"] = ep.n_total
    return EpisodeTrace(cps, regret, reward, log_h, h_max, plays, ep.events[:ep.n_events].copy(),
                        (config.seed, index), switch_n, switch_regret, ep.diag)


# ---------------------------------------------------------------- ensembles


def worker_count(config: ExperimentConfig) -> int:
    if config.workers is not None:
        return config.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        value = int(env)
        if value < 1:
            raise ValueError(f"{WORKERS_ENV} must be positive")
        return value
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _run_one(args):
    config, index = args
    return run_episode(config, index)


def run_traces(config: ExperimentConfig, indices: Sequence[int] | None = None) -> list:
    """Traces in realization order, whatever order the workers finish in."""
    indices = list(range(config.ensemble)) if indices is None else list(indices)
    workers = min(worker_count(config), len(indices))
    if workers <= 1:
        return [run_episode(config, i) for i in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, [(config, i) for i in indices]))


def _mean_se(values: np.ndarray):
    values = np.asarray(values, dtype=float)
    count = np.sum(~np.isnan(values), axis=0)
    # all-NaN columns (entropy off, or before a switch) stay NaN without warnings
    with np.errstate(invalid="ignore", divide="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(values, axis=0) if values.size else np.array([])
        var = np.nanvar(values, axis=0, ddof=1) if values.shape[0] > 1 else np.zeros(values.shape[1:])
        se = np.sqrt(var / count)
    if values.shape[0] <= 1:
        se = np.zeros_like(mean)
    return mean, se


@dataclass
class EnsembleResult:
    config: ExperimentConfig
    checkpoints: np.ndarray
    mean_regret: np.ndarray
    se_regret: np.ndarray
    mean_log_h: np.ndarray
    se_log_h: np.ndarray
    mean_h_max: np.ndarray
    mean_n2: np.ndarray
    traces: list

    def matrix(self, name: str) -> np.ndarray:
        return np.array([getattr(t, name) for t in self.traces])

    def leading_term(self) -> np.ndarray:
        """Lai-Robbins leading regret at each checkpoint."""
        return lai_robbins_constant(self.config.arms) * np.log(self.checkpoints)

    def rows(self, subtract_leading: bool = False):
        lead = self.leading_term() if subtract_leading else np.zeros(self.checkpoints.size)
        for i, n in enumerate(self.checkpoints):
            yield (int(n), self.mean_regret[i] - lead[i], self.se_regret[i], self.mean_log_h[i],
                   self.se_log_h[i], self.mean_n2[i])


def summarize(config: ExperimentConfig, traces: list, regret_attr: str = "regret") -> EnsembleResult:
    cps = traces[0].checkpoints
    regret = np.array([getattr(t, regret_attr) for t in traces])
    log_h = np.array([t.log_h for t in traces])
    h_max = np.array([t.h_max for t in traces])
    best = config.best
    sub = np.array([t.plays.sum(axis=1) - t.plays[:, best] for t in traces])
    mr, sr = _mean_se(regret)
    ml, sl = _mean_se(log_h)
    mh, _ = _mean_se(h_max)
    mn, _ = _mean_se(sub)
    return EnsembleResult(config, cps, mr, sr, ml, sl, mh, mn, traces)


def run_ensemble(config: ExperimentConfig) -> EnsembleResult:
    """Mean and standard error of every checkpointed quantity over the ensemble."""
    traces = run_traces(config)
    attr = "regret_since_switch" if config.voi_level else "regret"
    return summarize(config, traces, attr)


# ---------------------------------------------------------------- fits


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    se: float
    intercept: float
    lo: float
    hi: float

    @property
    def ci95(self) -> tuple[float, float]:
        return self.slope - 1.96 * self.se, self.slope + 1.96 * self.se


def slope_fit(x, matrix, lo: float, hi: float, log_x: bool = False) -> SlopeFit:
    """Least-squares slope of each row against x on [lo, hi]; mean and SE over rows.

    The slope of the ensemble mean equals the mean of the per-row slopes,
    so the spread of the latter gives its standard error.
    """
    x = np.asarray(x, dtype=float)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    sel = (x >= lo) & (x <= hi)
    if sel.sum() < 2:
        raise ValueError("fit range holds fewer than two checkpoints")
    xs = np.log(x[sel]) if log_x else x[sel]
    ys = matrix[:, sel]
    keep = ~np.any(np.isnan(ys), axis=1)
    ys = ys[keep]
    xc = xs - xs.mean()
    slopes = ys @ xc / np.dot(xc, xc)
    intercepts = ys.mean(axis=1) - slopes * xs.mean()
    se = float(np.std(slopes, ddof=1) / math.sqrt(len(slopes))) if len(slopes) > 1 else 0.0
    return SlopeFit(float(slopes.mean()), se, float(intercepts.mean()), lo, hi)


# ---------------------------------------------------------------- protocols


def boundary_scatter(config: ExperimentConfig, traces: list | None = None) -> np.ndarray:
    """Rows (n, n_2 D(pi_2, pi_1), realization) for every suboptimal play of Info-p."""
    if len(config.arms) != 2 or config.policy.kind != "info-p":
        raise ValueError("the boundary scatter needs two arms and the info-p policy")
    if traces is None:
        traces = run_traces(config)
    best = config.best
    other = 1 - best
    rows = []
    for r, t in enumerate(traces):
        for ev in t.events:
            n = ev[0]
            w1, n1 = ev[2 + 2 * best], ev[3 + 2 * best]
            w2, n2 = ev[2 + 2 * other], ev[3 + 2 * other]
            if n2 == 0:
                value = 0.0
            elif n1 == 0:
                continue
            else:
                value = n2 * float(kl_bernoulli(w2 / n2, w1 / n1))
            rows.append((n, value, r))
    return np.array(rows, dtype=float).reshape(-1, 3)


@dataclass
class VoiResult:
    levels: tuple
    reference_n: int
    results: dict
    delta_r: np.ndarray
    se_delta_r: np.ndarray
    slope: float
    slope_se: float

    @property
    def monotone(self) -> bool:
        gain = -self.delta_r
        return bool(np.all(np.diff(gain) > 0))


def voi_experiment(config: ExperimentConfig, levels: Sequence[int] = (0, 1, 2, 3, 4, 5)) -> VoiResult:
    """Info-p regret after Info-id pre-training down to H(b_max) = ln 2 / 2^m.

    Regret counts from the switch. Every level reuses the same realization
    streams, so differences between levels are paired.
    """
    if len(config.arms) != 2:
        raise ValueError("the value-of-information protocol needs two arms")
    levels = tuple(int(m) for m in levels)
    if any(m < 0 for m in levels):
        raise ValueError("levels must be non-negative")
    base_policy = replace(config.policy, kind="info-p")
    results = {}
    finals = {}
    for m in levels:
        cfg = replace(config, policy=base_policy, voi_level=m)
        res = run_ensemble(cfg)
        results[m] = res
        finals[m] = np.array([t.regret_since_switch[-1] for t in res.traces])
    ref = finals[0] if 0 in finals else finals[levels[0]]
    delta, se = [], []
    for m in levels:
        d = finals[m] - ref
        delta.append(d.mean())
        se.append(d.std(ddof=1) / math.sqrt(d.size) if d.size > 1 else 0.0)
    delta = np.array(delta)
    se = np.array(se)
    ms = np.array(levels, dtype=float)
    gains = np.array([-(finals[m] - ref) for m in levels])
    fit = slope_fit(ms, gains.T, ms.min(), ms.max())
    return VoiResult(levels, config.horizon, results, delta, se, fit.slope, fit.se)


def entropy_decay_experiment(config: ExperimentConfig,
                             policies: Sequence[str] = ("info-id", "max-ent", "info-p"),
                             linear_range: tuple | None = None,
                             log_range: tuple | None = None) -> dict:
    """Mean ln H(b_max) against n per policy, with slope fits.

    Linear fits (per play) for the identity-entropy rules over linear_range,
    log-log fits for the others over log_range.
    """
    if len(config.arms) != 2:
        raise ValueError("the entropy protocol needs two arms")
    out = {}
    for kind in policies:
        if kind not in KINDS:
            raise ValueError(f"unknown policy {kind!r}")
        cfg = replace(config, policy=replace(config.policy, kind=kind), record_entropy=True,
                      fast_sim=replace(config.fast_sim, mode=None))
        res = run_ensemble(cfg)
        matrix = res.matrix("log_h")
        if kind in ("info-id", "max-ent"):
            lo, hi = linear_range or (res.checkpoints[0], res.checkpoints[-1])
            fit = slope_fit(res.checkpoints, matrix, lo, hi)
        else:
            lo, hi = log_range or (res.checkpoints[0], res.checkpoints[-1])
            fit = slope_fit(res.checkpoints, matrix, lo, hi, log_x=True)
        out[kind] = (res, fit)
    return out


def below_boundary_fraction(scatter: np.ndarray, slack: float = 1.0, n_min: float = 2.0) -> float:
    """Share of scatter points with n_2 D <= ln n + slack, among points with n >= n_min."""
    pts = scatter[scatter[:, 0] >= n_min]
    if pts.shape[0] == 0:
        return float("nan")
    return float(np.mean(pts[:, 1] <= np.log(pts[:, 0]) + slack))


def boundary_envelope(scatter: np.ndarray, lo: float, hi: float, bins: int = 10) -> np.ndarray:
    """Rows (ln n at bin center, max n_2 D in bin, ratio of the two) over [lo, hi].

    Bins are uniform in ln n; empty bins are dropped.
    """
    edges = np.linspace(math.log(lo), math.log(hi), bins + 1)
    ln_n = np.log(np.maximum(scatter[:, 0], 1.0))
    rows = []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (ln_n >= a) & (ln_n < b) if b < edges[-1] else (ln_n >= a) & (ln_n <= b)
        if np.any(sel):
            mid = 0.5 * (a + b)
            top = float(np.max(scatter[sel, 1]))
            rows.append((mid, top, top / mid))
    return np.array(rows, dtype=float).reshape(-1, 3)
