"""Entropy bookkeeping: time changes, Lyapunov consistency, growth types and the recursive period bound."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .census import CensusTable

RESIDUAL_MARGIN = 2.0


def abramov_transfer(h: float, g_mean: float) -> float:
    """Entropy of the flow after a time change whose speed factor has mean g_mean."""
    if not g_mean > 0:
        raise ValueError("time-change mean must be positive")
    return h * g_mean


def pesin_consistency(exponents, q: int, no_crossings: bool = False, seed=None) -> dict:
    e = np.atleast_1d(np.asarray(exponents, dtype=float))
    worst = int(np.argmin(e))
    report = {"q": q, "min": float(e[worst]), "n": int(e.size), "ok": True, "seed": seed}
    if no_crossings:
        dev = float(np.max(np.abs(e - 1.0)))
        report["deviation"] = dev
        report["ok"] = dev <= 1e-9
    elif q >= 0:
        report["ok"] = e[worst] >= 1.0 - 1e-6
    if not report["ok"]:
        report["offending_index"] = worst
    return report


@dataclass(frozen=True)
class GrowthLabel:
    kind: str  # "polynomial", "exponential" or "indeterminate"
    value: float | None = None  # degree or rate
    ci: tuple[float, float] | None = None
    residuals: dict = field(default_factory=dict)


def _fit(x, y):
    r = stats.linregress(x, y)
    ssr = float(np.sum((y - (r.intercept + r.slope * x)) ** 2))
    half = stats.t.ppf(0.975, len(x) - 2) * r.stderr
    return float(r.slope), (float(r.slope - half), float(r.slope + half)), ssr


def growth_type_classify(table: CensusTable, margin: float = RESIDUAL_MARGIN) -> GrowthLabel:
    """Compare log N against log T (polynomial) and against T (exponential).

    The polynomial fit only moves its intercept under T -> T/C and the
    exponential fit only rescales its slope, so the residuals and the label do
    not change.
    """
    T = np.asarray(table.edges, dtype=float)
    N = np.asarray(table.counts, dtype=float)
    keep = N > 0
    T, N = T[keep], N[keep]
    if len(T) < 8:
        raise ValueError("need at least 8 nonempty buckets")
    if T[-1] / T[0] < 10.0 and N[-1] / N[0] < 10.0:
        raise ValueError("buckets must span a decade in T or in counts")
    y = np.log(N)
    if np.all(N == N[0]):
        return GrowthLabel("polynomial", 0.0, (0.0, 0.0), {"polynomial": 0.0, "exponential": 0.0})
    deg, deg_ci, ssr_poly = _fit(np.log(T), y)
    rate, rate_ci, ssr_exp = _fit(T, y)
    res = {"polynomial": ssr_poly, "exponential": ssr_exp}
    if margin * ssr_poly <= ssr_exp:
        return GrowthLabel("polynomial", deg, deg_ci, res)
    if margin * ssr_exp <= ssr_poly:
        return GrowthLabel("exponential", rate, rate_ci, res)
    return GrowthLabel("indeterminate", None, None, res)


def rescale_table(table: CensusTable, C: float) -> CensusTable:
    return CensusTable(np.asarray(table.edges) / C, table.counts, table.filter)


@dataclass(frozen=True)
class BoundSequenceParams:
    a1: float = 1.0
    c1: float = 0.0
    a2: float = 1.0
    c2: float = 0.0
    E: float = 2.0
    e: float = 1.0
    T0: float = 3.0571418  # shortest period of the unperturbed flow

    def __post_init__(self):
        if self.a1 <= 0 or self.a2 <= 0:
            raise ValueError("a1 and a2 must be positive")
        if not self.E >= self.e > 0:
            raise ValueError("need E >= e > 0")
        if self.T0 <= 0:
            raise ValueError("seed period must be positive")

    @property
    def a3(self) -> float:
        return self.a1 * self.a2


def next_period(params: BoundSequenceParams, log_Tn: float) -> float:
    """log of the least T with ln(T)/a2 - c2 >= a1 ln((E/e) Tn) + c1 + 1."""
    rhs = params.a1 * (np.log(params.E / params.e) + log_Tn) + params.c1 + 1.0
    phi = lambda x: x / params.a2 - params.c2 - rhs
    lo, hi = -1.0, 1.0
    while phi(hi) < 0:
        hi *= 2.0
    while phi(lo) > 0:
        lo *= 2.0
    return optimize.brentq(phi, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)


def closed_form_next(params: BoundSequenceParams, log_Tn: float) -> float:
    """log of (rho Tn)^(a1 a2) e^(a2 (1 + c1 + c2)) with rho = E/e."""
    rho = params.E / params.e
    return params.a3 * (np.log(rho) + log_Tn) + params.a2 * (1.0 + params.c1 + params.c2)


@dataclass
class BoundSequence:
    params: BoundSequenceParams
    log_T: np.ndarray  # log T_n, n = 0, 1, ...
    c6: float
    bound_kind: str

    def staircase(self, T):
        """Orbit count lower bound: n periods are guaranteed once T >= E T_n."""
        T = np.asarray(T, dtype=float)
        jumps = np.log(self.params.E) + self.log_T[1:]
        return np.searchsorted(jumps, np.log(T), side="right")

    def bound(self, T):
        T = np.asarray(T, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            if self.bound_kind == "loglog":
                val = np.log(np.log(T)) / np.log(self.params.a3)
            else:
                val = np.log(T) / self._ratio
        return val - self.c6

    @property
    def _ratio(self):
        return closed_form_next(self.params, 0.0)  # log of the growth factor when a3 = 1

    def jump_points(self):
        return np.exp(np.log(self.params.E) + self.log_T[1:])


def homotopy_bound_sequence(params: BoundSequenceParams, T_max: float, max_terms: int = 10_000) -> BoundSequence:
    if params.a3 < 1.0:
        raise ValueError("the recursion needs a1 a2 >= 1")
    logs = [np.log(params.T0)]
    limit = np.log(T_max)
    for _ in range(max_terms):
        nxt = next_period(params, logs[-1])
        if nxt <= logs[-1]:
            raise ArithmeticError("recursion does not increase")
        if nxt > limit:
            break
        logs.append(nxt)
    else:
        raise ArithmeticError("divergence guard: too many terms below T_max")
    kind = "loglog" if params.a3 > 1.0 else "log"
    seq = BoundSequence(params, np.array(logs), 0.0, kind)
    # the bound is increasing, so it is tightest against the staircase just before each jump
    probes = np.concatenate([seq.jump_points(), [T_max]])
    below = seq.staircase(probes * (1.0 - 1e-12))
    with np.errstate(invalid="ignore"):
        raw = seq.bound(probes)
    seq.c6 = float(max(0.0, np.nanmax(raw - below)))
    return seq
