"""Compiled inner loops.

Everything here works on plain arrays so it can run under numba; the
public modules wrap these with validated dataclasses.
"""
import math

import numpy as np
from numba import njit

_EPS = 1e-16
_FPMIN = 1e-300
_MAXIT = 200000

# Nodes whose log-CDF drops below this are recomputed from the continued
# fraction after each real update instead of trusting the recurrence.
LOG_TAIL_RESYNC = -10.0

NO_WINDOW = -(2**30)

STOP, RELAYOUT, FAST, EVENTS_FULL, THRESHOLD = 0, 1, 2, 3, 4


# ---------------------------------------------------------------- scalars


@njit(cache=True)
def kl(p, q):
    if p == q:
        return 0.0
    if q <= 0.0 or q >= 1.0:
        return np.inf
    out = 0.0
    if p > 0.0:
        out += p * math.log(p / q)
    if p < 1.0:
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return max(out, 0.0)


@njit(cache=True)
def kl_upper_bisect(p, d, tol):
    """Largest q in [p, 1] with D(p, q) <= d, by bisection."""
    if d <= 0.0:
        return p
    if p >= 1.0:
        return 1.0
    lo, hi = p, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if kl(p, mid) <= d:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def kl_upper_newton(p, d):
    """Same root as kl_upper_bisect; Newton from above (D is convex in q)."""
    if d <= 0.0:
        return p
    if p >= 1.0:
        return 1.0
    if p <= 0.0:
        return -math.expm1(-d)
    q = min(p + math.sqrt(0.5 * d), 1.0 - 1e-15)
    for _ in range(100):
        f = kl(p, q) - d
        if f <= 0.0:
            break
        step = f * q * (1.0 - q) / (q - p)
        q_new = max(q - step, p)
        if q - q_new < 1e-15:
            q = q_new
            break
        q = q_new
    return q


_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@njit(cache=True)
def _stirling_tail(x):
    """ln Gamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2], for x >= 30."""
    r = 1.0 / (x * x)
    return (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / x


@njit(cache=True)
def log_beta(a, b):
    """ln B(a, b) without the cancellation of three large log-Gamma values."""
    big = max(a, b)
    small = min(a, b)
    s = a + b
    if big < 30.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(s)
    if small < 30.0:
        # ln Gamma(s) - ln Gamma(big) by Stirling on both
        diff = ((big - 0.5) * math.log1p(small / big) + small * math.log(s) - small
                + _stirling_tail(s) - _stirling_tail(big))
        return math.lgamma(small) - diff
    return (_HALF_LOG_2PI - a * math.log1p(b / a) - b * math.log1p(a / b)
            + 0.5 * (math.log(s) - math.log(a) - math.log(b))
            + _stirling_tail(a) + _stirling_tail(b) - _stirling_tail(s))


@njit(cache=True)
def _betacf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < _EPS:
            break
    return h


@njit(cache=True)
def log_betainc(a, b, x):
    """ln I_x(a, b) by the continued fraction, finite far into the left tail."""
    if x <= 0.0:
        return -np.inf
    if x >= 1.0:
        return 0.0
    lbeta = log_beta(a, b)
    lfront = a * math.log(x) + b * math.log1p(-x) - lbeta
    if x < (a + 1.0) / (a + b + 2.0):
        return lfront + math.log(_betacf(a, b, x)) - math.log(a)
    tail = math.exp(lfront + math.log(_betacf(b, a, 1.0 - x)) - math.log(b))
    if tail >= 1.0:
        return -np.inf
    return math.log1p(-tail)


@njit(cache=True)
def log_betainc_array(a, b, x):
    out = np.empty(x.size)
    for m in range(x.size):
        out[m] = log_betainc(a, b, x[m])
    return out


# ---------------------------------------------------------------- layout keys


@njit(cache=True)
def arm_key(w, n, tail_drop, divisor, fine_divisor, base_h):
    """Quantized description of the window an arm needs on the grid.

    Returns (n_level, s_level, center_index, fine); n_level is NO_WINDOW when
    the base grid already resolves the posterior.
    """
    if n <= 0:
        return NO_WINDOW, 0, 0, 0
    a = w + 1.0
    b = n - w + 1.0
    var = a * b / ((a + b) * (a + b) * (a + b + 1.0))
    if 0 < w < n:
        ph = w / n
        var = min(var, ph * (1.0 - ph) / n)
    s = math.sqrt(var)
    s_level = math.floor(4.0 * math.log2(s))
    unit = 2.0 ** (s_level / 4.0)
    if unit / divisor >= base_h:
        return NO_WINDOW, 0, 0, 0
    n_level = math.floor(4.0 * math.log2(n))
    center_index = int(round((w / n) / (2.0 * unit)))
    lo, hi = window_edges(n_level, s_level, center_index, tail_drop)
    fine = 0
    if (lo <= 0.0 and w < 4) or (hi >= 1.0 and n - w < 4):
        fine = 1
    return n_level, s_level, center_index, fine


@njit(cache=True)
def _drop_edge(c, n_eff, tail_drop, direction):
    # distance from c where n_eff * D(c, c + direction * delta) reaches tail_drop
    target = tail_drop / n_eff
    limit = c if direction < 0 else 1.0 - c
    if limit <= 0.0:
        return 0.0
    if kl(c, c + direction * limit) <= target:
        return limit
    lo, hi = 0.0, limit
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if kl(c, c + direction * mid) < target:
            lo = mid
        else:
            hi = mid
    return hi


@njit(cache=True)
def window_edges(n_level, s_level, center_index, tail_drop):
    unit = 2.0 ** (s_level / 4.0)
    c = min(max(center_index * 2.0 * unit, 0.0), 1.0)
    n_eff = 2.0 ** (n_level / 4.0)
    lo = c - _drop_edge(c, n_eff, tail_drop, -1) - 2.0 * unit
    hi = c + _drop_edge(c, n_eff, tail_drop, 1) + 2.0 * unit
    lattice = 4.0 * unit
    lo = max(math.floor(lo / lattice) * lattice, 0.0)
    hi = min(math.ceil(hi / lattice) * lattice, 1.0)
    return lo, hi


@njit(cache=True)
def state_keys(w, n, tail_drop, divisor, fine_divisor, base_h):
    """Keys of every arm followed by keys of every pooled pair, as rows."""
    k = w.size
    rows = k + k * (k - 1) // 2
    out = np.empty((rows, 4), dtype=np.int64)
    for i in range(k):
        key = arm_key(w[i], n[i], tail_drop, divisor, fine_divisor, base_h)
        for c in range(4):
            out[i, c] = key[c]
    r = k
    for i in range(k):
        for j in range(i + 1, k):
            if n[i] > 0 and n[j] > 0:
                key = arm_key(w[i] + w[j], n[i] + n[j], tail_drop, divisor, fine_divisor, base_h)
            else:
                key = (NO_WINDOW, 0, 0, 0)
            for c in range(4):
                out[r, c] = key[c]
            r += 1
    return out


@njit(cache=True)
def _keys_changed(keys, w, n, arm, tail_drop, divisor, fine_divisor, base_h):
    k = w.size
    key = arm_key(w[arm], n[arm], tail_drop, divisor, fine_divisor, base_h)
    for c in range(4):
        if keys[arm, c] != key[c]:
            return True
    r = k
    for i in range(k):
        for j in range(i + 1, k):
            if i == arm or j == arm:
                if n[i] > 0 and n[j] > 0:
                    key = arm_key(w[i] + w[j], n[i] + n[j], tail_drop, divisor, fine_divisor, base_h)
                else:
                    key = (NO_WINDOW, 0, 0, 0)
                for c in range(4):
                    if keys[r, c] != key[c]:
                        return True
            r += 1
    return False


# ---------------------------------------------------------------- Info-p


@njit(cache=True)
def _neg_xlogx_sum(wq, rho):
    h = 0.0
    for m in range(rho.size):
        r = rho[m]
        if r > 0.0:
            h -= wq[m] * r * math.log(r)
    return h


@njit(cache=True)
def max_density(P, F, out):
    k, nn = P.shape
    for m in range(nn):
        total = 0.0
        for i in range(k):
            term = P[i, m]
            for j in range(k):
                if j != i:
                    term *= F[j, m]
            total += term
        out[m] = total
    return out


@njit(cache=True)
def infop_scores(x, wq, P, F, a, b, out):
    """Expected change of the differential entropy of pi_max per arm."""
    k, nn = P.shape
    rho = np.empty(nn)
    max_density(P, F, rho)
    h0 = _neg_xlogx_sum(wq, rho)
    for i in range(k):
        ai = a[i]
        bi = b[i]
        hw = 0.0
        hl = 0.0
        for m in range(nn):
            g = 1.0
            s = 0.0
            for j in range(k):
                if j != i:
                    s = s * F[j, m] + g * P[j, m]
                    g *= F[j, m]
            xm = x[m]
            p = P[i, m]
            t = xm * (1.0 - xm) * p
            fw = F[i, m] - t / ai
            if fw < 0.0:
                fw = 0.0
            fl = F[i, m] + t / bi
            if fl > 1.0:
                fl = 1.0
            rw = p * xm * (ai + bi) / ai * g + fw * s
            rl = p * (1.0 - xm) * (ai + bi) / bi * g + fl * s
            if rw > 0.0:
                hw -= wq[m] * rw * math.log(rw)
            if rl > 0.0:
                hl -= wq[m] * rl * math.log(rl)
        pw = ai / (ai + bi)
        out[i] = pw * hw + (1.0 - pw) * hl - h0
    return h0


@njit(cache=True)
def argmin_first(v):
    # lowest index among values equal to the minimum up to a relative 1e-12
    best = 0
    for i in range(1, v.size):
        if v[i] < v[best] - 1e-12 * abs(v[best]):
            best = i
    return best


@njit(cache=True)
def leader(w, n):
    """Index of the strictly largest sample mean, or -1 if none exists."""
    k = w.size
    for i in range(k):
        if n[i] == 0:
            return -1
    best = 0
    tie = False
    for i in range(1, k):
        # compare w_i/n_i with w_best/n_best exactly in integers
        lhs = w[i] * n[best]
        rhs = w[best] * n[i]
        if lhs > rhs:
            best = i
            tie = False
        elif lhs == rhs:
            tie = True
    if tie:
        for i in range(k):
            if i != best and w[i] * n[best] == w[best] * n[i]:
                return -1
    return best


@njit(cache=True)
def _push_event(events, count, n_total, arm, w, n):
    k = w.size
    events[count, 0] = n_total
    events[count, 1] = arm
    for i in range(k):
        events[count, 2 + 2 * i] = w[i]
        events[count, 3 + 2 * i] = n[i]


@njit(cache=True)
def infop_steps(x, wq, P, F, w, n, probs, best, rng, n_total, stop_n, fast_min_n,
                keys, tail_drop, divisor, fine_divisor, base_h, events, n_events):
    """Step Info-p one play at a time.

    Returns (status, n_total, n_events). The arrays P, F, w, n are updated in
    place with the recurrences of a single Beta update.
    """
    k = w.size
    a = np.empty(k)
    b = np.empty(k)
    scores = np.empty(k)
    while n_total < stop_n:
        if n_events >= events.shape[0]:
            return EVENTS_FULL, n_total, n_events
        for i in range(k):
            a[i] = w[i] + 1.0
            b[i] = n[i] - w[i] + 1.0
        infop_scores(x, wq, P, F, a, b, scores)
        arm = argmin_first(scores)
        if fast_min_n >= 0 and n_total >= fast_min_n and arm == leader(w, n):
            return FAST, n_total, n_events
        if arm != best:
            _push_event(events, n_events, n_total, arm, w, n)
            n_events += 1
        win = rng.random() < probs[arm]
        ai = a[arm]
        bi = b[arm]
        for m in range(x.size):
            xm = x[m]
            p = P[arm, m]
            t = xm * (1.0 - xm) * p
            if win:
                P[arm, m] = p * xm * (ai + bi) / ai
                f = F[arm, m] - t / ai
                F[arm, m] = f if f > 0.0 else 0.0
            else:
                P[arm, m] = p * (1.0 - xm) * (ai + bi) / bi
                f = F[arm, m] + t / bi
                F[arm, m] = f if f < 1.0 else 1.0
        n[arm] += 1
        if win:
            w[arm] += 1
        n_total += 1
        if _keys_changed(keys, w, n, arm, tail_drop, divisor, fine_divisor, base_h):
            return RELAYOUT, n_total, n_events
    return STOP, n_total, n_events


# ---------------------------------------------------------------- identity entropy


@njit(cache=True)
def _log_integral(lnw, terms):
    mx = -np.inf
    for m in range(terms.size):
        v = lnw[m] + terms[m]
        if v > mx:
            mx = v
    if mx == -np.inf:
        return -np.inf
    s = 0.0
    cut = mx - 40.0
    for m in range(terms.size):
        v = lnw[m] + terms[m]
        if v > cut:
            s += math.exp(v - mx)
    return mx + math.log(s)


@njit(cache=True)
def log_prob_best(lnw, lnP, lnF, out):
    """Unnormalized ln q_i = ln of the integral of P_i times the other CDFs."""
    k, nn = lnP.shape
    terms = np.empty(nn)
    for i in range(k):
        for m in range(nn):
            v = lnP[i, m]
            for j in range(k):
                if j != i:
                    v += lnF[j, m]
            terms[m] = v
        out[i] = _log_integral(lnw, terms)
    return out


@njit(cache=True)
def log_identity_entropy(lnq):
    """ln of -sum q ln q from unnormalized log-probabilities, exact in log space."""
    k = lnq.size
    mx = -np.inf
    for i in range(k):
        if lnq[i] > mx:
            mx = lnq[i]
    if mx == -np.inf:
        return np.nan
    s = 0.0
    for i in range(k):
        s += math.exp(lnq[i] - mx)
    total = mx + math.log(s)
    top = 0
    for i in range(1, k):
        if lnq[i] > lnq[top]:
            top = i
    # mass of all arms but the top one, kept in log space
    rest_mx = -np.inf
    for i in range(k):
        if i != top and lnq[i] > rest_mx:
            rest_mx = lnq[i]
    if rest_mx == -np.inf:
        return -np.inf
    rs = 0.0
    for i in range(k):
        if i != top:
            rs += math.exp(lnq[i] - rest_mx)
    ln_rest = rest_mx + math.log(rs) - total
    terms_mx = -np.inf
    vals = np.empty(k)
    for i in range(k):
        if i == top:
            if ln_rest < -30.0:
                # -ln q_top = r (1 + r/2 + ...) with r the rest mass
                vals[i] = ln_rest - 0.5 * math.exp(ln_rest)
                if vals[i] > terms_mx:
                    terms_mx = vals[i]
                continue
            lq = math.log1p(-math.exp(ln_rest))
        else:
            lq = lnq[i] - total
        if lq == -np.inf or lq >= 0.0:
            vals[i] = -np.inf
        else:
            vals[i] = lq + math.log(-lq)
        if vals[i] > terms_mx:
            terms_mx = vals[i]
    if terms_mx == -np.inf:
        return -np.inf
    s = 0.0
    for i in range(k):
        s += math.exp(vals[i] - terms_mx)
    return terms_mx + math.log(s)


@njit(cache=True)
def _update_log_row(lx, l1x, lnp, lnf, a, b, win, out_p, out_f):
    """Log density and log CDF of one arm after one hypothetical outcome."""
    nn = lx.size
    la = math.log(a)
    lb = math.log(b)
    lab = math.log(a + b)
    for m in range(nn):
        lt = lx[m] + l1x[m] + lnp[m]
        if win:
            out_p[m] = lnp[m] + lx[m] + lab - la
            if lnf[m] == -np.inf:
                out_f[m] = -np.inf
            elif lt == -np.inf:
                out_f[m] = lnf[m]
            else:
                r = lt - la - lnf[m]
                out_f[m] = lnf[m] + math.log1p(-math.exp(r)) if r < 0.0 else -np.inf
        else:
            out_p[m] = lnp[m] + l1x[m] + lab - lb
            if lt == -np.inf:
                out_f[m] = lnf[m]
            else:
                u = lt - lb
                v = lnf[m]
                if v == -np.inf:
                    out_f[m] = u
                elif v > u:
                    out_f[m] = v + math.log1p(math.exp(u - v))
                else:
                    out_f[m] = u + math.log1p(math.exp(v - u))
                if out_f[m] > 0.0:
                    out_f[m] = 0.0


@njit(cache=True)
def identity_scores(lx, l1x, lnw, lnP, lnF, a, b, relative, out):
    """Expected change of ln H(b_max) per arm, or of H(b_max)/H when relative."""
    k, nn = lnP.shape
    lnq = np.empty(k)
    log_prob_best(lnw, lnP, lnF, lnq)
    lh0 = log_identity_entropy(lnq)
    hp = lnP.copy()
    hf = lnF.copy()
    row_p = np.empty(nn)
    row_f = np.empty(nn)
    for i in range(k):
        pw = a[i] / (a[i] + b[i])
        acc = 0.0
        for outcome in range(2):
            win = outcome == 0
            _update_log_row(lx, l1x, lnP[i], lnF[i], a[i], b[i], win, row_p, row_f)
            hp[i, :] = row_p
            hf[i, :] = row_f
            log_prob_best(lnw, hp, hf, lnq)
            lh = log_identity_entropy(lnq)
            weight = pw if win else 1.0 - pw
            if relative:
                acc += weight * math.exp(lh - lh0)
            else:
                acc += weight * lh
        hp[i, :] = lnP[i]
        hf[i, :] = lnF[i]
        out[i] = acc - 1.0 if relative else acc - lh0
    return lh0


@njit(cache=True)
def exact_log_row(lx, l1x, x, a, b, out_p, out_f):
    """Log density and log CDF of Beta(a, b) at the nodes."""
    lbeta = log_beta(a, b)
    for m in range(x.size):
        v = -lbeta
        if a != 1.0:
            v += (a - 1.0) * lx[m]
        if b != 1.0:
            v += (b - 1.0) * l1x[m]
        out_p[m] = v
        out_f[m] = log_betainc(a, b, x[m])


@njit(cache=True)
def identity_steps(x, lx, l1x, lnw, lnP, lnF, w, n, probs, best, rng, n_total, stop_n,
                   relative, log_h_stop, keys, tail_drop, divisor, fine_divisor, base_h,
                   events, n_events):
    """Step Info-id (relative=False) or max-ent (relative=True).

    Stops early with THRESHOLD once ln H(b_max) falls to log_h_stop.
    """
    k, nn = lnP.shape
    a = np.empty(k)
    b = np.empty(k)
    scores = np.empty(k)
    row_p = np.empty(nn)
    row_f = np.empty(nn)
    lnq = np.empty(k)
    while n_total < stop_n:
        if n_events >= events.shape[0]:
            return EVENTS_FULL, n_total, n_events
        for i in range(k):
            a[i] = w[i] + 1.0
            b[i] = n[i] - w[i] + 1.0
        identity_scores(lx, l1x, lnw, lnP, lnF, a, b, relative, scores)
        arm = argmin_first(scores)
        if arm != best:
            _push_event(events, n_events, n_total, arm, w, n)
            n_events += 1
        win = rng.random() < probs[arm]
        _update_log_row(lx, l1x, lnP[arm], lnF[arm], a[arm], b[arm], win, row_p, row_f)
        na = a[arm] + (1.0 if win else 0.0)
        nb = b[arm] + (0.0 if win else 1.0)
        lbeta = log_beta(na, nb)
        for m in range(nn):
            v = -lbeta
            if na != 1.0:
                v += (na - 1.0) * lx[m]
            if nb != 1.0:
                v += (nb - 1.0) * l1x[m]
            lnP[arm, m] = v
            if row_f[m] < LOG_TAIL_RESYNC:
                lnF[arm, m] = log_betainc(na, nb, x[m])
            else:
                lnF[arm, m] = row_f[m]
        n[arm] += 1
        if win:
            w[arm] += 1
        n_total += 1
        if log_h_stop > -np.inf:
            log_prob_best(lnw, lnP, lnF, lnq)
            if log_identity_entropy(lnq) <= log_h_stop:
                return THRESHOLD, n_total, n_events
        if _keys_changed(keys, w, n, arm, tail_drop, divisor, fine_divisor, base_h):
            return RELAYOUT, n_total, n_events
    return STOP, n_total, n_events


# ---------------------------------------------------------------- Thompson


@njit(cache=True)
def thompson_steps(w, n, probs, best, rng, n_total, stop_n, fast_min_n, events, n_events):
    """Per-play Thompson sampling; FAST hands control to the stretch sampler."""
    k = w.size
    while n_total < stop_n:
        if n_events >= events.shape[0]:
            return EVENTS_FULL, n_total, n_events
        if fast_min_n >= 0 and n_total >= fast_min_n and leader(w, n) >= 0:
            return FAST, n_total, n_events
        arm = 0
        top = -1.0
        for i in range(k):
            v = rng.beta(w[i] + 1.0, n[i] - w[i] + 1.0)
            if v > top:
                top = v
                arm = i
        if arm != best:
            _push_event(events, n_events, n_total, arm, w, n)
            n_events += 1
        if rng.random() < probs[arm]:
            w[arm] += 1
        n[arm] += 1
        n_total += 1
    return STOP, n_total, n_events


# ---------------------------------------------------------------- index policies

KLUCB, UCBLAI, UCBTUNED, UCB2 = 0, 1, 2, 3


@njit(cache=True)
def klucb_value(w, n, t, c):
    if n == 0:
        return 1.0
    budget = math.log(t)
    if c > 0.0 and t > math.e:
        budget += c * math.log(math.log(t))
    return kl_upper_newton(w / n, max(budget, 0.0) / n)


@njit(cache=True)
def ucblai_target(n_i, n_total, xi):
    r = n_total / n_i
    if r <= math.e:
        return 0.0
    lr = math.log(r)
    return max(lr + xi * math.log(lr), 0.0)


@njit(cache=True)
def ucblai_value(w, n, t, xi):
    if n == 0:
        return 1.0
    return kl_upper_newton(w / n, ucblai_target(n, t, xi) / n)


@njit(cache=True)
def ucb_tuned_value(w, n, t):
    if n == 0:
        return np.inf
    ph = w / n
    lt = math.log(t)
    v = ph * (1.0 - ph) + math.sqrt(2.0 * lt / n)
    return ph + math.sqrt(lt / n * min(0.25, v))


@njit(cache=True)
def ucb2_tau(r, alpha):
    return math.ceil((1.0 + alpha) ** r)


@njit(cache=True)
def ucb2_value(w, n, t, r, alpha):
    if n == 0:
        return np.inf
    tau = ucb2_tau(r, alpha)
    return w / n + math.sqrt((1.0 + alpha) * math.log(math.e * t / tau) / (2.0 * tau))


@njit(cache=True)
def index_steps(kind, w, n, probs, best, rng, n_total, stop_n, xi, c, alpha,
                epochs, pending, events, n_events):
    """Index policies stepped one play at a time.

    For UCB2, pending = [arm, plays left in the current epoch].
    """
    k = w.size
    while n_total < stop_n:
        if n_events >= events.shape[0]:
            return EVENTS_FULL, n_total, n_events
        arm = -1
        for i in range(k):
            if n[i] == 0:
                arm = i
                break
        if arm < 0 and kind == UCB2 and pending[1] > 0:
            arm = pending[0]
            pending[1] -= 1
        if arm < 0:
            top = -np.inf
            while True:
                for i in range(k):
                    if kind == KLUCB:
                        v = klucb_value(w[i], n[i], n_total, c)
                    elif kind == UCBLAI:
                        v = ucblai_value(w[i], n[i], n_total, xi)
                    elif kind == UCBTUNED:
                        v = ucb_tuned_value(w[i], n[i], n_total)
                    else:
                        v = ucb2_value(w[i], n[i], n_total, epochs[i], alpha)
                    if v > top:
                        top = v
                        arm = i
                if kind != UCB2:
                    break
                length = ucb2_tau(epochs[arm] + 1, alpha) - ucb2_tau(epochs[arm], alpha)
                epochs[arm] += 1
                if length > 0:
                    pending[0] = arm
                    pending[1] = length - 1
                    break
                top = -np.inf
        if arm != best:
            _push_event(events, n_events, n_total, arm, w, n)
            n_events += 1
        if rng.random() < probs[arm]:
            w[arm] += 1
        n[arm] += 1
        n_total += 1
    return STOP, n_total, n_events


# ---------------------------------------------------------------- tracking


@njit(cache=True)
def track_leader(j0, k0, pts_j, pts_kappa, n_pts, use_chords, margin, p, rng, steps_left):
    """Play one arm while its selection is certified.

    (j, k) count plays and wins since the run began, and the rule keeps the
    arm before play j + 1 iff k >= kappa(j). pts_* hold exact kappa values
    at increasing j; between two of them the chord bounds kappa from above
    when kappa is convex. Returns (status, j, k, steps): status 0 when the
    step budget is spent, 1 when (j, k) cannot be certified from the table.
    """
    j = j0
    k = k0
    steps = 0
    seg = 0
    while True:
        if steps >= steps_left:
            return 0, j, k, steps
        while seg + 1 < n_pts and pts_j[seg + 1] <= j:
            seg += 1
        if pts_j[seg] == j:
            ok = k >= pts_kappa[seg]
        elif use_chords and seg + 1 < n_pts and pts_j[seg] < j:
            ja = pts_j[seg]
            jb = pts_j[seg + 1]
            chord = pts_kappa[seg] + (pts_kappa[seg + 1] - pts_kappa[seg]) * (j - ja) / (jb - ja)
            need = math.ceil(chord)
            if chord > 0.0:
                need += margin
            ok = k >= need
        else:
            ok = False
        if not ok:
            return 1, j, k, steps
        if rng.random() < p:
            k += 1
        j += 1
        steps += 1
