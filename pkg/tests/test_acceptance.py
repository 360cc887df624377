"""Acceptance runs at desk scale.

Each test prints one PASS/FAIL line, collected again in the terminal summary.
The long ensembles take most of an hour on one core; deselect with
`-m "not acceptance"` for a quick run.
"""
import math
import time

import mpmath as mp
import numpy as np
import pytest

from conftest import ACCEPTANCE, cached_traces
from test_fastsim import _cfg, infop_choice, leader_states

from infobandit.asymptotics import (
    infoid_rate,
    lai_robbins_constant,
    maxent_rate,
    optimal_split,
    voi_delta_regret,
)
from infobandit.belief import make_grid, max_density, prob_best
from infobandit.core import ArmStats, beta_log_pdf, binary_entropy, kl_bernoulli, record_batch
from infobandit.fastsim import stretch_lower_bound
from infobandit.harness import (
    ExperimentConfig,
    below_boundary_fraction,
    boundary_envelope,
    boundary_scatter,
    slope_fit,
    summarize,
    voi_experiment,
)
from infobandit.policies import PolicyConfig

pytestmark = pytest.mark.acceptance

ARMS = (0.9, 0.8)
WIDE = (0.9, 0.6)
SEED = 20240601


def report(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  [{number:>2}] {title}: {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


def config(kind, horizon, ensemble, arms=ARMS, **kw):
    return ExperimentConfig(arms=arms, policy=PolicyConfig(kind), horizon=horizon, ensemble=ensemble,
                            seed=SEED, **kw)


# one Info-p ensemble to 1e6 serves the boundary, regret, ordering and entropy checks
INFOP = config("info-p", 10**6, 200, record_entropy=True)


def infop_summary():
    return summarize(INFOP, cached_traces(INFOP))


def test_decision_boundary():
    traces = cached_traces(INFOP)[:50]
    sc = boundary_scatter(INFOP, traces)
    below = below_boundary_fraction(sc, slack=1.0, n_min=1)
    # diagnostic only: events where the inferior arm is not the empirical leader
    ev = np.concatenate([t.events for t in traces])
    ev = ev[~((ev[:, 5] > 0) & (ev[:, 3] == 0))]  # rows the scatter skips
    lagging = ev[:, 4] * ev[:, 3] <= ev[:, 2] * ev[:, 5]
    below_lagging = below_boundary_fraction(sc[lagging], slack=1.0, n_min=1)
    env = boundary_envelope(sc, 1e5, 1e6)
    worst = float(np.max(np.abs(env[:, 2] - 1)))
    ok = below >= 0.95 and worst <= 0.20
    report(1, "decision boundary", ok,
           f"below-boundary share {below:.4f} (need >= 0.95; {below_lagging:.4f} counting only plays of the "
           f"arm with the lower sample mean); envelope/ln n in "
           f"[{env[:, 2].min():.3f}, {env[:, 2].max():.3f}] (need within 0.8..1.2)")


def test_lai_robbins_slope():
    res = infop_summary()
    fit = slope_fit(res.checkpoints, res.matrix("regret"), 1e5, 1e6, log_x=True)
    target = lai_robbins_constant(ARMS)
    rel = abs(fit.slope - target) / target
    report(2, "Info-p regret slope", rel <= 0.15,
           f"slope {fit.slope:.4f} +- {fit.se:.4f} vs {target:.4f} (rel {rel:.3f}, need <= 0.15)")


def test_thompson_slope():
    cfg = config("thompson", 10**6, 200, record_entropy=False)
    res = summarize(cfg, cached_traces(cfg))
    fit = slope_fit(res.checkpoints, res.matrix("regret"), 1e5, 1e6, log_x=True)
    target = lai_robbins_constant(ARMS)
    rel = abs(fit.slope - target) / target
    report(3, "Thompson regret slope", rel <= 0.15,
           f"slope {fit.slope:.4f} +- {fit.se:.4f} vs {target:.4f} (rel {rel:.3f}, need <= 0.15)")


def test_ucb_ordering():
    base = infop_summary()
    r0, s0 = base.mean_regret[-1], base.se_regret[-1]
    parts, ok = [f"info-p {r0:.2f} +- {s0:.2f}"], True
    for kind in ("ucb-tuned", "kl-ucb"):
        cfg = config(kind, 10**6, 200, record_entropy=False)
        res = summarize(cfg, cached_traces(cfg))
        r, s = res.mean_regret[-1], res.se_regret[-1]
        margin = (r - r0) / math.hypot(s, s0)
        ok &= margin > 2
        parts.append(f"{kind} {r:.2f} +- {s:.2f} ({margin:.1f} SE above)")
    report(4, "UCB regret above Info-p at 1e6", ok, "; ".join(parts) + " (need > 2 SE each)")


def test_infoid_rate():
    # 100 realizations leave a standard error near 3% of the rate against a 5% tolerance
    cfg = config("info-id", 3000, 400)
    res = summarize(cfg, cached_traces(cfg))
    fit = slope_fit(res.checkpoints, res.matrix("log_h"), 500, 3000)
    target = infoid_rate(*ARMS)
    rel = abs(fit.slope / target - 1)
    report(5, "Info-id entropy rate", rel <= 0.05,
           f"slope {fit.slope:.6f} +- {fit.se:.6f} vs {target:.6f} (rel {rel:.3f}, need <= 0.05); "
           f"mean ln H at 3000 = {res.mean_log_h[-1]:.1f}")


def test_maxent_versus_infoid():
    fits = {}
    for kind in ("info-id", "max-ent"):
        res = summarize(cfg := config(kind, 2000, 100, arms=WIDE), cached_traces(cfg))
        fits[kind] = slope_fit(res.checkpoints, res.matrix("log_h"), 300, 2000)
    ii, me = fits["info-id"], fits["max-ent"]
    t_ii, t_me = infoid_rate(*WIDE), maxent_rate(*WIDE)[0]
    rel_ii, rel_me = abs(ii.slope / t_ii - 1), abs(me.slope / t_me - 1)
    gap = me.slope - ii.slope
    gap_se = math.hypot(ii.se, me.se)
    ok = rel_ii <= 0.05 and rel_me <= 0.05 and gap > 2 * gap_se
    report(6, "max-ent vs Info-id rates", ok,
           f"info-id {ii.slope:.5f} +- {ii.se:.5f} vs {t_ii:.5f} (rel {rel_ii:.3f}); "
           f"max-ent {me.slope:.5f} +- {me.se:.5f} vs {t_me:.5f} (rel {rel_me:.3f}); "
           f"info-id faster by {gap:.5f} = {gap / gap_se:.1f} SE (need > 2)")


def test_infop_entropy_scaling():
    res = infop_summary()
    fit = slope_fit(res.checkpoints, res.matrix("log_h"), 1e4, 1e6, log_x=True)
    report(7, "Info-p entropy scaling", abs(fit.slope + 1) <= 0.15,
           f"d ln H / d ln n = {fit.slope:.4f} +- {fit.se:.4f} (need -1 +- 0.15)")


def test_value_of_information():
    cfg = config("info-p", 10**6, 100, record_entropy=False)
    voi = voi_experiment(cfg, range(6))
    target = -voi_delta_regret(*ARMS, 1)
    rel = abs(voi.slope / target - 1)
    gains = ", ".join(f"{-d:.2f}" for d in voi.delta_r)
    report(8, "value of information", rel <= 0.20 and voi.monotone,
           f"-dR per level {voi.slope:.3f} +- {voi.slope_se:.3f} vs {target:.3f} (rel {rel:.3f}, need <= 0.20); "
           f"-dR(m=0..5) = [{gains}], monotone {voi.monotone}")


def test_fast_sim_exactness():
    rng = np.random.default_rng(11)
    bad = 0
    for s in leader_states(rng, 100, 3000):
        L = stretch_lower_bound(infop_choice, s, 0)
        early = any(infop_choice((record_batch(s[0], k, 0), s[1])) != 0 for k in range(L))
        late = infop_choice((record_batch(s[0], L, 0), s[1])) == 0
        bad += early or late
    fast_cfg, naive_cfg = _cfg("info-p", 10**5, True, 200), _cfg("info-p", 10**5, False, 200)
    fast = summarize(fast_cfg, cached_traces(fast_cfg))
    naive = summarize(naive_cfg, cached_traces(naive_cfg))
    diff = fast.mean_regret[-1] - naive.mean_regret[-1]
    se = math.hypot(fast.se_regret[-1], naive.se_regret[-1])
    report(9, "fast-sim exactness", bad == 0 and abs(diff) <= 2 * se,
           f"{bad}/100 states with a wrong stretch bound; fast {fast.mean_regret[-1]:.2f} vs naive "
           f"{naive.mean_regret[-1]:.2f} ({diff / se:+.2f} SE, need within 2)")


def test_play_fractions():
    targets = {"info-id": optimal_split(*ARMS)[1], "max-ent": maxent_rate(*ARMS)[1]}
    parts, ok = [], True
    for kind, x in targets.items():
        cfg = config(kind, 5 * 10**4, 50, record_entropy=False)
        traces = cached_traces(cfg)
        frac = np.array([t.plays[-1, 0] / t.checkpoints[-1] for t in traces])
        ok &= abs(frac.mean() - x) <= 0.02
        parts.append(f"{kind} n1/n {frac.mean():.4f} +- {frac.std(ddof=1) / math.sqrt(frac.size):.4f} vs {x:.4f}")
    report(10, "play fractions at 5e4", ok, "; ".join(parts) + " (need within 0.02)")


def test_oracle_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    mp.mp.dps = 30
    failures = []

    # divergence and entropy identities
    for p, q in rng.uniform(0.01, 0.99, (200, 2)):
        ref = mp.mpf(p) * mp.log(mp.mpf(p) / q) + (1 - mp.mpf(p)) * mp.log((1 - mp.mpf(p)) / (1 - mp.mpf(q)))
        if abs(float(kl_bernoulli(p, q)) - float(ref)) > 1e-12 * max(1.0, float(ref)):
            failures.append("kl")
        h = -(p * math.log(p) + (1 - p) * math.log(1 - p))
        # D(p, 1/2) = ln 2 - h(p)
        if abs(float(binary_entropy(p)) - h) > 1e-13 or abs(float(kl_bernoulli(p, 0.5)) - (math.log(2) - h)) > 1e-13:
            failures.append("entropy")

    # posterior densities integrate to one exactly; grid quadrature to 1e-6
    for w, n in zip(rng.integers(0, 1000, 20), rng.integers(1000, 100_000, 20)):
        post = ArmStats(int(w * n // 1000), int(n))
        c = post.predictive
        total = mp.quad(lambda x: mp.e ** beta_log_pdf(post, float(x)),
                        [0, max(1e-9, c - 0.05), c, min(1 - 1e-9, c + 0.05), 1])
        if abs(total - 1) > 1e-10:
            failures.append("posterior")
    for _ in range(100):
        k = int(rng.integers(1, 4))
        n = rng.integers(0, 5000, k)
        s = tuple(ArmStats(int(rng.binomial(m, rng.uniform(0.05, 0.95))), int(m)) for m in n)
        g = make_grid(s)
        if np.any(np.abs(g.pdf @ g.weights - 1) > 1e-6) or abs(g.weights @ max_density(g) - 1) > 1e-6:
            failures.append("normalization")

    # best-arm probability against sampling
    draws = 10**6
    for _ in range(20):
        s = tuple(ArmStats(int(rng.binomial(m, f)), int(m))
                  for m, f in zip(rng.integers(0, 101, 2), rng.uniform(0.05, 0.95, 2)))
        est = np.mean(rng.beta(s[1].alpha, s[1].beta, draws) > rng.beta(s[0].alpha, s[0].beta, draws))
        se = max(math.sqrt(est * (1 - est) / draws), 1 / draws)
        if abs(prob_best(make_grid(s)).q[1] - est) > 3 * se + 1e-9:
            failures.append("prob_best")

    # equal divergences at the optimal split point
    for p1, p2 in rng.uniform(0.001, 0.999, (1000, 2)):
        if abs(p1 - p2) < 1e-6:
            continue
        ps, _ = optimal_split(p1, p2)
        if abs(float(kl_bernoulli(p1, ps)) - float(kl_bernoulli(p2, ps))) > 1e-10:
            failures.append("split")

    # dominance on a 100 x 100 grid
    grid = np.linspace(0.005, 0.995, 100)
    for p1 in grid:
        for p2 in grid[grid < p1]:
            ps, x = optimal_split(p1, p2)
            d1, d2 = float(kl_bernoulli(p1, ps)), float(kl_bernoulli(p2, ps))
            if x * float(kl_bernoulli(p1, p2)) < d1 - 1e-15 or (1 - x) * float(kl_bernoulli(p2, p1)) < d2 - 1e-15:
                failures.append("dominance")
            if abs(maxent_rate(p1, p2)[0]) > abs(infoid_rate(p1, p2)) * (1 + 1e-12):
                failures.append("rate order")

    elapsed = time.perf_counter() - start
    kinds = sorted(set(failures))
    report(11, "oracle suite", not failures and elapsed < 60,
           f"{len(failures)} failures {kinds} in {elapsed:.1f} s (need 0 in under 60 s)")
