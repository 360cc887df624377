import math
from dataclasses import replace

import numpy as np
import pytest

from infobandit.belief import make_grid, prob_best
from infobandit.core import ArmStats
from infobandit.env import BanditEnv, expected_regret, realization_rng
from infobandit.harness import (
    ExperimentConfig,
    FastSimConfig,
    below_boundary_fraction,
    boundary_envelope,
    boundary_scatter,
    checkpoint_grid,
    run_ensemble,
    run_episode,
    run_traces,
    slope_fit,
    summarize,
)
from infobandit.policies import KINDS, PolicyConfig


def cfg(kind="info-p", arms=(0.9, 0.8), horizon=2000, **kw):
    kw.setdefault("workers", 1)
    return ExperimentConfig(arms=arms, policy=PolicyConfig(kind), horizon=horizon, **kw)


def same_trace(a, b):
    for name in ("checkpoints", "regret", "reward", "plays", "events"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name
    for name in ("log_h", "h_max"):
        assert np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True), name


class TestCheckpoints:
    def test_grid(self):
        g = checkpoint_grid(10**6, 32)
        assert g[0] == 1 and g[-1] == 10**6
        assert np.all(np.diff(g) > 0)
        per_decade = np.sum((g >= 10**4) & (g < 10**5))
        assert per_decade == 32

    def test_small_horizon(self):
        assert list(checkpoint_grid(2, 32)) == [1, 2]


class TestEnv:
    def test_streams_are_reproducible(self):
        a = realization_rng(3, 7).random(5)
        b = realization_rng(3, 7).random(5)
        c = realization_rng(3, 8).random(5)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_regret_bookkeeping(self):
        env = BanditEnv((0.9, 0.5, 0.2), np.random.default_rng(0))
        for arm in (0, 1, 2, 2, 1):
            env.pull(arm)
        assert env.regret == pytest.approx(2 * 0.4 + 2 * 0.7, rel=1e-15)
        assert env.best == 0

    def test_rejects_bad_probabilities(self):
        with pytest.raises(ValueError):
            BanditEnv((1.2, 0.1), np.random.default_rng(0))


class TestEpisode:
    @pytest.mark.parametrize("kind", KINDS)
    def test_deterministic_and_consistent(self, kind):
        c = cfg(kind, horizon=1500, seed=4)
        a, b = run_episode(c, 2), run_episode(c, 2)
        same_trace(a, b)
        assert a.seed == (4, 2)
        # regret identity at every checkpoint, and monotone
        for n, r, plays in zip(a.checkpoints, a.regret, a.plays):
            assert plays.sum() == n
            assert r == expected_regret(c.arms, plays)
        assert np.all(np.diff(a.regret) >= 0)
        assert np.all(np.isfinite(a.log_h))

    @pytest.mark.parametrize("kind", KINDS)
    def test_horizon_equal_to_arm_count(self, kind):
        arms = (0.7, 0.4, 0.2)
        t = run_episode(cfg(kind, arms=arms, horizon=3), 0)
        assert t.plays[-1].sum() == 3
        assert t.regret[-1] <= 3 * (0.7 - 0.2) + 1e-12

    def test_deterministic_rewards(self):
        t = run_episode(cfg("info-p", arms=(1.0, 0.0), horizon=100), 0)
        assert np.array_equal(t.regret, t.plays[:, 1].astype(float))
        assert t.reward[-1] == t.plays[-1, 0]
        # the losing arm stops being played once its first losses are seen
        assert t.plays[-1, 1] < 10
        assert t.regret[-1] == t.regret[np.searchsorted(t.checkpoints, 50)]

    def test_events_are_suboptimal_plays(self):
        t = run_episode(cfg("thompson", horizon=3000), 1)
        ev = t.suboptimal_events()
        assert ev.shape[0] == t.plays[-1, 1]
        assert np.all(np.diff(ev[:, 1]) == 1) and ev[0, 1] == 0

    def test_fast_paths_engage(self):
        for kind in ("info-p", "thompson"):
            t = run_episode(cfg(kind, horizon=10**5, record_entropy=False), 0)
            assert t.diagnostics["fast_plays"] > 0

    def test_fast_mode_mismatch_rejected(self):
        with pytest.raises(ValueError):
            cfg("kl-ucb", fast_sim=FastSimConfig(mode="info-p"))

    @pytest.mark.parametrize("kw", [{"horizon": 1}, {"ensemble": 0}, {"arms": (0.5,)}, {"arms": (1.5, 0.2)},
                                    {"voi_level": -1}, {"workers": 0}])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            cfg(**kw)


class TestPretraining:
    def test_switch_after_target_entropy(self):
        c = cfg("info-p", horizon=5000, voi_level=3)
        t = run_episode(c, 0)
        assert not t.diagnostics["pretrain_capped"]
        assert t.switch_n > 0
        # replay the pre-training alone to read the state at the switch
        pre = run_episode(replace(c, policy=PolicyConfig("info-id"), voi_level=None, horizon=t.switch_n), 0)
        w = pre.plays[-1]
        assert w.sum() == t.switch_n
        since = t.regret_since_switch
        assert np.all(np.isnan(since[t.checkpoints < t.switch_n]))
        assert since[-1] == pytest.approx(t.regret[-1] - t.switch_regret)

    def test_target_reached_at_switch(self):
        from infobandit.harness import _Episode

        c = cfg("info-p", horizon=5000, voi_level=2)
        ep = _Episode(c, 0)
        target = math.log(math.log(2)) - 2 * math.log(2)
        assert ep.advance_identity(5000, relative=False, log_h_stop=target)
        lh = prob_best(make_grid(ep.stats())).log_identity_entropy
        assert lh <= target

    def test_cap_flagged(self):
        t = run_episode(cfg("info-p", horizon=500, voi_level=30, pretrain_cap=50), 0)
        assert t.diagnostics["pretrain_capped"]
        assert t.switch_n == 50

    def test_level_zero_is_plain_info_p(self):
        same_trace(run_episode(cfg("info-p", voi_level=0), 3), run_episode(cfg("info-p"), 3))


class TestEnsemble:
    def test_worker_count_does_not_matter(self):
        c = cfg("thompson", horizon=5000, ensemble=6, seed=9)
        one = run_traces(c)
        two = run_traces(replace(c, workers=2))
        for a, b in zip(one, two):
            same_trace(a, b)

    def test_subset_order(self):
        c = cfg("ucb-tuned", horizon=500, ensemble=5)
        full = run_traces(c)
        part = run_traces(c, [3, 1])
        same_trace(part[0], full[3])
        same_trace(part[1], full[1])

    def test_deterministic_episodes_have_zero_error(self):
        res = run_ensemble(cfg("info-p", arms=(1.0, 0.0), horizon=200, ensemble=4))
        assert np.all(res.se_regret == 0)
        assert np.all(np.isfinite(res.mean_regret))

    def test_summary_statistics(self):
        c = cfg("thompson", horizon=2000, ensemble=8)
        res = run_ensemble(c)
        regret = res.matrix("regret")
        assert np.allclose(res.mean_regret, regret.mean(axis=0))
        assert np.allclose(res.se_regret, regret.std(axis=0, ddof=1) / math.sqrt(8))
        n2 = np.array([t.plays[:, 1] for t in res.traces])
        assert np.allclose(res.mean_n2, n2.mean(axis=0))
        rows = list(res.rows(subtract_leading=True))
        lead = res.leading_term()
        assert rows[-1][1] == pytest.approx(res.mean_regret[-1] - lead[-1])

    def test_env_worker_variable(self, monkeypatch):
        from infobandit.harness import worker_count

        monkeypatch.setenv("INFOBANDIT_WORKERS", "3")
        assert worker_count(cfg(workers=None)) == 3
        assert worker_count(cfg(workers=2)) == 2
        monkeypatch.setenv("INFOBANDIT_WORKERS", "0")
        with pytest.raises(ValueError):
            worker_count(cfg(workers=None))


class TestFits:
    def test_exact_line(self):
        x = np.array([1.0, 2, 3, 4, 5])
        m = np.array([2 * x + 1, 2 * x - 1, 2 * x])
        f = slope_fit(x, m, 1, 5)
        assert f.slope == pytest.approx(2.0) and f.se == pytest.approx(0.0, abs=1e-12)
        assert f.intercept == pytest.approx(0.0, abs=1e-12)

    def test_log_axis_and_spread(self):
        x = np.logspace(0, 3, 20)
        m = np.array([s * np.log(x) for s in (1.0, 2.0, 3.0)])
        f = slope_fit(x, m, 1, 1000, log_x=True)
        assert f.slope == pytest.approx(2.0)
        assert f.se == pytest.approx(1 / math.sqrt(3))
        lo, hi = f.ci95
        assert lo < 2 < hi

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            slope_fit([1.0, 2.0, 3.0], [[1.0, 2.0, 3.0]], 1.5, 1.9)


class TestBoundary:
    def test_scatter(self):
        c = cfg("info-p", horizon=3000, ensemble=3)
        traces = run_traces(c)
        sc = boundary_scatter(c, traces)
        total = sum(t.plays[-1, 1] for t in traces)
        assert sc.shape == (total, 3)
        early = sc[sc[:, 0] < 10]
        assert np.all(early[:, 1] <= np.log(np.maximum(early[:, 0], 1)) + 1)
        assert set(np.unique(sc[:, 2])) <= {0.0, 1.0, 2.0}

    def test_scatter_rejects_other_policies(self):
        with pytest.raises(ValueError):
            boundary_scatter(cfg("thompson"))

    def test_fraction_and_envelope(self):
        n = np.array([20.0, 200, 2000, 2000, 9000])
        v = np.log(n) * np.array([0.5, 0.9, 1.0, 2.0, 0.8])
        sc = np.column_stack([n, v, np.zeros(5)])
        assert below_boundary_fraction(sc, slack=1.0) == pytest.approx(4 / 5)
        env = boundary_envelope(sc, 10, 10**4, bins=3)
        assert env.shape[0] == 3
        assert env[2, 1] == pytest.approx(2 * math.log(2000))
        assert np.allclose(env[:, 2], env[:, 1] / env[:, 0])
