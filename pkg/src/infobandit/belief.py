"""Beliefs over the arms on a shared adaptive grid.

The grid is a deterministic function of the arm counters: every arm with
enough data gets a window around its sample mean, spaced at most a quarter
of a quantized posterior width divided by the configured divisor, and
every pair of played arms gets a window around their pooled mean (where the
integrands of the best-arm probabilities peak) unless an arm window already
covers it. Quantizing the window geometry keeps the layout piecewise
constant in the counters, so hypothetical one-play updates reuse the
current grid and the stepping kernels only rebuild when a key changes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from infobandit import _kernels
from infobandit.core import ArmStats, log_beta_fn


@dataclass(frozen=True)
class GridSettings:
    tail_drop: float = 40.0
    divisor: float = 8.0
    fine_divisor: float = 32.0
    base_nodes: int = 64

    def __post_init__(self):
        if self.base_nodes < 64:
            raise ValueError("base_nodes must be at least 64")
        if self.tail_drop <= 0 or self.divisor <= 0 or self.fine_divisor < self.divisor:
            raise ValueError("invalid grid settings")

    @property
    def base_h(self) -> float:
        return 1.0 / (self.base_nodes - 1)

    def key_args(self):
        return self.tail_drop, self.divisor, self.fine_divisor, self.base_h


DEFAULT_SETTINGS = GridSettings()


# Gregory end-correction coefficients of the forward differences at each end
_GREGORY = (Fraction(1, 12), Fraction(-1, 24), Fraction(19, 720), Fraction(-3, 160),
            Fraction(863, 60480), Fraction(-275, 24192))
GREGORY_ORDER = 6
MIN_INTERVALS = 2 * GREGORY_ORDER + 2


@lru_cache(maxsize=8)
def _end_weights(order: int) -> np.ndarray:
    c = [Fraction(1, 2)] + [Fraction(1)] * order
    for k in range(1, order + 1):
        for i in range(k + 1):
            c[i] += _GREGORY[k - 1] * (-1) ** (k - i) * math.comb(k, i)
    return np.array([float(v) for v in c])


def gregory_weights(m: int, h: float, order: int = GREGORY_ORDER) -> np.ndarray:
    """End-corrected trapezoid weights for m uniform intervals of width h.

    Differences up to `order` enter the end corrections, so the rule is exact
    for polynomials of degree order + 1 (order even). Needs m > 2 order.
    """
    if not 1 <= order <= len(_GREGORY):
        raise ValueError(f"order must lie in [1, {len(_GREGORY)}]")
    if m <= 2 * order:
        raise ValueError(f"need more than {2 * order} intervals")
    ends = _end_weights(order)
    w = np.full(m + 1, h)
    w[:order + 1] = ends * h
    w[m - order:] = ends[::-1] * h
    return w


def quadrature_weights(nodes: np.ndarray) -> np.ndarray:
    """Weights for arbitrary increasing nodes.

    Runs of uniform spacing get Gregory weights; runs too short for the end
    corrections fall back to the trapezoid rule.
    """
    nodes = np.asarray(nodes, dtype=float)
    d = np.diff(nodes)
    if np.any(d <= 0):
        raise ValueError("nodes must be strictly increasing")
    weights = np.zeros(nodes.size)
    start = 0
    while start < d.size:
        stop = start + 1
        while stop < d.size and abs(d[stop] - d[start]) <= 1e-9 * d[start]:
            stop += 1
        m = stop - start
        h = (nodes[stop] - nodes[start]) / m
        if m >= MIN_INTERVALS:
            weights[start:stop + 1] += gregory_weights(m, h)
        else:
            weights[start:stop] += 0.5 * d[start:stop]
            weights[start + 1:stop + 1] += 0.5 * d[start:stop]
        start = stop
    return weights


def state_key(stats: Sequence[ArmStats], settings: GridSettings = DEFAULT_SETTINGS) -> tuple:
    w = np.array([s.wins for s in stats], dtype=np.int64)
    n = np.array([s.plays for s in stats], dtype=np.int64)
    return _key_tuple(_kernels.state_keys(w, n, *settings.key_args()))


def _key_tuple(keys: np.ndarray) -> tuple:
    return tuple(tuple(int(v) for v in row) for row in keys)


def _window(row, settings):
    n_level, s_level, cidx, fine = row
    lo, hi = _kernels.window_edges(n_level, s_level, cidx, settings.tail_drop)
    unit = 2.0 ** (s_level / 4.0)
    h = unit / (settings.fine_divisor if fine else settings.divisor)
    return lo, hi, h, cidx * 2.0 * unit, unit


@lru_cache(maxsize=4096)
def layout(key: tuple, k: int, settings: GridSettings = DEFAULT_SETTINGS):
    """Nodes and weights for a state key. Cached; arrays are read-only."""
    arm_windows = []
    for row in key[:k]:
        if row[0] != _kernels.NO_WINDOW:
            arm_windows.append(_window(row, settings))
    windows = [(lo, hi, h) for lo, hi, h, _, _ in arm_windows]
    for row in key[k:]:
        if row[0] == _kernels.NO_WINDOW:
            continue
        lo, hi, h, center, unit = _window(row, settings)
        covered = any(
            alo <= center - 4 * unit and ahi >= center + 4 * unit and ah <= 2 * h
            for alo, ahi, ah, _, _ in arm_windows
        )
        if not covered:
            windows.append((lo, hi, h))
    cuts = sorted({0.0, 1.0, *(v for lo, hi, _ in windows for v in (lo, hi))})
    merged = [cuts[0]]
    for c in cuts[1:]:
        if c - merged[-1] > 1e-12:
            merged.append(c)
    merged[-1] = 1.0
    pieces, weights = [], []
    for u, v in zip(merged[:-1], merged[1:]):
        h = settings.base_h
        for lo, hi, hw in windows:
            if lo <= u + 1e-12 and hi >= v - 1e-12:
                h = min(h, hw)
        m = max(MIN_INTERVALS, math.ceil((v - u) / h - 1e-9))
        seg = np.linspace(u, v, m + 1)
        w = gregory_weights(m, (v - u) / m)
        if pieces:
            weights[-1][-1] += w[0]
            seg, w = seg[1:], w[1:]
        pieces.append(seg)
        weights.append(w)
    nodes = np.concatenate(pieces)
    wq = np.concatenate(weights)
    nodes.flags.writeable = False
    wq.flags.writeable = False
    return nodes, wq


def _log_cdf_rows(stats, nodes, cdf):
    """ln F per arm: log of the direct values, continued fraction where they underflow."""
    with np.errstate(divide="ignore"):
        out = np.log(cdf)
    for i, s in enumerate(stats):
        deep = (cdf[i] < 1e-280) & (nodes > 0.0)
        if np.any(deep):
            out[i, deep] = _kernels.log_betainc_array(s.alpha, s.beta, nodes[deep])
    return out


@dataclass(frozen=True, eq=False)
class BeliefGrid:
    """Posterior log-densities and CDFs of every arm on shared nodes."""

    nodes: np.ndarray
    weights: np.ndarray
    stats: tuple
    log_pdf: np.ndarray
    cdf: np.ndarray
    log_cdf: np.ndarray
    settings: GridSettings = DEFAULT_SETTINGS
    key: tuple = field(default=())

    def __post_init__(self):
        x = self.nodes
        if x.ndim != 1 or x.size < 64:
            raise ValueError("a grid needs at least 64 nodes")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ValueError("nodes must increase strictly from 0 to 1")
        shape = (len(self.stats), x.size)
        for name in ("log_pdf", "cdf", "log_cdf"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} must have shape {shape}")
        if np.any(np.diff(self.cdf, axis=1) < -1e-12):
            raise ValueError("CDF values must be non-decreasing along the nodes")

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def pdf(self) -> np.ndarray:
        return np.exp(self.log_pdf)


def make_grid(stats: Sequence[ArmStats], settings: GridSettings = DEFAULT_SETTINGS) -> BeliefGrid:
    stats = tuple(stats)
    if not stats:
        raise ValueError("need at least one arm")
    key = state_key(stats, settings)
    nodes, wq = layout(key, len(stats), settings)
    log_pdf = np.empty((len(stats), nodes.size))
    cdf = np.empty_like(log_pdf)
    for i, s in enumerate(stats):
        with np.errstate(divide="ignore"):
            log_pdf[i] = (special.xlogy(s.wins, nodes) + special.xlog1py(s.losses, -nodes)
                          - log_beta_fn(s.alpha, s.beta))
        cdf[i] = special.betainc(s.alpha, s.beta, nodes)
    log_cdf = _log_cdf_rows(stats, nodes, cdf)
    return BeliefGrid(nodes, wq, stats, log_pdf, cdf, log_cdf, settings, key)


def refine(grid: BeliefGrid | None, stats: Sequence[ArmStats],
           settings: GridSettings | None = None) -> BeliefGrid:
    """Grid adapted to the given counters; returns `grid` itself if nothing changed."""
    stats = tuple(stats)
    if settings is None:
        settings = grid.settings if grid is not None else DEFAULT_SETTINGS
    if grid is not None and grid.stats == stats and grid.settings == settings:
        return grid
    return make_grid(stats, settings)


@dataclass(frozen=True)
class ArmCurve:
    """One arm's density and CDF tabulated on its own nodes."""

    nodes: np.ndarray
    pdf: np.ndarray
    cdf: np.ndarray


def _curves(source):
    if isinstance(source, BeliefGrid):
        return source.nodes, source.pdf, source.cdf
    curves = list(source)
    if not curves:
        raise ValueError("need at least one arm")
    nodes = np.asarray(curves[0].nodes, dtype=float)
    for c in curves[1:]:
        other = np.asarray(c.nodes, dtype=float)
        if other.shape != nodes.shape or np.any(other != nodes):
            raise ValueError("all arms must share the same abscissae")
    P = np.array([np.asarray(c.pdf, dtype=float) for c in curves])
    F = np.array([np.asarray(c.cdf, dtype=float) for c in curves])
    return nodes, P, F


def max_density(source) -> np.ndarray:
    """Density of the largest success probability, sum_i P_i prod_{j != i} F_j.

    `source` is a BeliefGrid or a sequence of ArmCurve sharing nodes.
    """
    _, P, F = _curves(source)
    return _kernels.max_density(np.ascontiguousarray(P), np.ascontiguousarray(F), np.empty(P.shape[1]))


def differential_entropy(density, nodes, weights=None) -> float:
    """-integral of rho ln rho on the nodes (0 ln 0 = 0)."""
    density = np.asarray(density, dtype=float)
    if np.any(density < 0):
        raise ValueError("density must be non-negative")
    if weights is None:
        weights = quadrature_weights(nodes)
    return float(np.sum(weights * special.entr(density)))


def identity_entropy(q) -> tuple[float, float]:
    """H = -sum q ln q and ln H, computed in log space without cancellation."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("q must be a probability vector")
    with np.errstate(divide="ignore"):
        lh = _kernels.log_identity_entropy(np.log(q))
    return math.exp(lh), lh


def identity_entropy_from_log(log_q) -> tuple[float, float]:
    """Same as identity_entropy, from (possibly unnormalized) log-probabilities."""
    lh = _kernels.log_identity_entropy(np.asarray(log_q, dtype=float))
    return math.exp(lh), lh


@dataclass(frozen=True)
class BestArmBelief:
    q: np.ndarray
    log_q: np.ndarray
    identity_entropy: float
    log_identity_entropy: float

    @property
    def best(self) -> int:
        return int(np.argmax(self.log_q))


def prob_best(grid: BeliefGrid) -> BestArmBelief:
    """Posterior probability that each arm is the best one."""
    if len(grid.stats) < 2:
        raise ValueError("need at least two arms")
    lnw = np.log(grid.weights)
    raw = _kernels.log_prob_best(lnw, np.ascontiguousarray(grid.log_pdf),
                                 np.ascontiguousarray(grid.log_cdf), np.empty(len(grid.stats)))
    log_q = raw - special.logsumexp(raw)
    h, lh = identity_entropy_from_log(log_q)
    return BestArmBelief(np.exp(log_q), log_q, h, lh)
