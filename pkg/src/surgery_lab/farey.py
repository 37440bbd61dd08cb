"""Rational-slope tori of the surgered fiber flow, ordered by period."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .census import CensusTable
from .flowbox import Beta0, ChartError, TwistProfile, beta0_build

FIBER_PERIOD = 2.0 * np.pi


@dataclass(frozen=True)
class FareyEntry:
    p: int
    qw: int
    w: float
    period: float


def stern_brocot(max_den: int, histogram: bool = False):
    """Reduced fractions in (0, 1) with denominator <= max_den, level by level down the Stern-Brocot tree.

    Returns (numerators, denominators), or with ``histogram`` only the number
    of fractions per denominator (index = denominator).
    """
    # each node is an interval (a/b, c/d) whose mediant is the next fraction
    a = np.array([0], dtype=np.int64)
    b = np.array([1], dtype=np.int64)
    c = np.array([1], dtype=np.int64)
    d = np.array([1], dtype=np.int64)
    nums, dens = [], []
    hist = np.zeros(max_den + 1, dtype=np.int64)
    while len(a):
        mn, md = a + c, b + d
        keep = md <= max_den
        a, b, c, d, mn, md = a[keep], b[keep], c[keep], d[keep], mn[keep], md[keep]
        if histogram:
            hist += np.bincount(md, minlength=max_den + 1)
        else:
            nums.append(mn)
            dens.append(md)
        a, b, c, d = np.concatenate([a, mn]), np.concatenate([b, md]), np.concatenate([mn, c]), np.concatenate([md, d])
    if histogram:
        return hist
    p, qd = np.concatenate(nums), np.concatenate(dens)
    order = np.argsort(p / qd)
    return p[order], qd[order]


def totient_sieve(n: int) -> np.ndarray:
    phi = np.arange(n + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if phi[p] == p:
            phi[p::p] -= phi[p::p] // p
    return phi


def torus_count_identity(q: int, max_den: int) -> int:
    """Reduced fractions in (0, q) with denominator <= max_den, from the totient sum."""
    phi = totient_sieve(max_den)
    return q * (int(phi[1:].sum()) - 1) + (q - 1)


def torus_counts_by_cutoff(q: int, max_den: int) -> np.ndarray:
    """Stern-Brocot counts in (0, q) for every cutoff 1..max_den (index = cutoff)."""
    hist = stern_brocot(max_den, histogram=True)
    per_unit = np.cumsum(hist)  # fractions in (0, 1)
    return q * per_unit + (q - 1)


def solve_level(twist: TwistProfile, targets, tol: float = 1e-13, max_iter: int = 200, chunk: int = 20_000):
    """w in (-eps, eps) with f(w) = target, by bracketed Newton with bisection fallback."""
    y = np.asarray(targets, dtype=float)
    if y.size > chunk:
        return np.concatenate([solve_level(twist, y[i : i + chunk], tol, max_iter, chunk) for i in range(0, y.size, chunk)])
    lo = np.full(y.shape, -twist.epsilon)
    hi = np.full(y.shape, twist.epsilon)
    x = -twist.epsilon + 2.0 * twist.epsilon * y / twist.q
    for _ in range(max_iter):
        r = twist.f(x) - y
        if np.all(np.abs(r) <= tol):
            break
        lo = np.where(r < 0, x, lo)
        hi = np.where(r > 0, x, hi)
        fp = twist.f_prime(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - r / fp
        ok = np.isfinite(step) & (step > lo) & (step < hi)
        x = np.where(np.abs(r) <= tol, x, np.where(ok, step, 0.5 * (lo + hi)))
    return x


def farey_census(twist: TwistProfile, T: float, critical_points: int = 4, beta0: Beta0 | None = None):
    """Rational tori with period <= T, and the orbit counts they and the fibers contribute."""
    if twist.q <= 0:
        raise ChartError("the Farey census needs a strictly increasing profile (q > 0)")
    b0 = beta0 if beta0 is not None else beta0_build(twist)
    max_den = int(np.floor(T / (FIBER_PERIOD * b0.contact_margin)))
    if max_den < 1:
        return [], np.zeros(0)
    p01, qd01 = stern_brocot(max_den)
    ps = [np.arange(1, twist.q, dtype=np.int64)]
    qs = [np.ones(twist.q - 1, dtype=np.int64)]
    for k in range(twist.q):
        ps.append(p01 + k * qd01)
        qs.append(qd01)
    p, qd = np.concatenate(ps), np.concatenate(qs)
    w = solve_level(twist, p / qd)
    period = FIBER_PERIOD * qd * b0.D(w)
    keep = period <= T
    order = np.argsort(period[keep], kind="stable")
    p, qd, w, period = p[keep][order], qd[keep][order], w[keep][order], period[keep][order]
    entries = [FareyEntry(int(a), int(b), float(c), float(d)) for a, b, c, d in zip(p, qd, w, period)]
    return entries, period


def torus_table(periods, edges) -> CensusTable:
    periods = np.sort(np.asarray(periods))
    return CensusTable(edges, np.searchsorted(periods, np.asarray(edges), side="right"), "farey_tori")


def orbit_table(periods, edges, critical_points: int = 4) -> CensusTable:
    """Each torus of period P gives 2 floor(T/P) orbits after perturbation; fibers add C floor(T/2pi)."""
    periods = np.asarray(periods)
    counts = [
        int(2 * np.sum(np.floor(T / periods[periods <= T]))) + critical_points * int(T // FIBER_PERIOD)
        for T in edges
    ]
    return CensusTable(edges, counts, "farey_orbits")


def growth_exponent(table: CensusTable) -> float:
    sel = table.counts > 0
    return float(np.polyfit(np.log(table.edges[sel]), np.log(table.counts[sel]), 1)[0])


def integrate_reeb_period(beta0: Beta0, w: float, p: int, qw: int, step: float = 1e-6) -> dict:
    """Period of the closed Reeb orbit on the torus at w, by integrating the Reeb direction.

    The field is (k0', -h0') / (h0 k0' - k0 h0') with h0' taken by central
    differences, so the result does not use the closed form for D.
    """
    from scipy.integrate import solve_ivp

    h = step * beta0.twist.epsilon
    h0p = float(beta0.h0(w + h) - beta0.h0(w - h)) / (2.0 * h)
    k0p = float(beta0.k0(w + h) - beta0.k0(w - h)) / (2.0 * h)
    det = float(beta0.h0(w)) * k0p - float(beta0.k0(w)) * h0p
    rhs = lambda t, y: [k0p / det, -h0p / det]
    target = FIBER_PERIOD * qw
    event = lambda t, y: y[0] - target
    event.terminal = True
    sol = solve_ivp(rhs, (0.0, 10.0 * target * abs(det) / abs(k0p)), [0.0, 0.0], events=event, rtol=1e-13, atol=1e-13)
    period = float(sol.t_events[0][0])
    sigma = float(sol.y_events[0][0][1])  # turns of the s-circle; the orbit closes after -p of them
    return {"period": period, "sigma": sigma, "closure": abs(sigma + p)}
