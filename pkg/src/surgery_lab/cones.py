"""The linearised return map at the surgery annulus, in the (e+, e-) basis.

A tangent vector a e+ + b e- in the (s, w)-plane, with e+ = (1, 1)/sqrt2 and
e- = (-1, 1)/sqrt2, is stretched by a flight of length t to (a e^t, b e^-t)
and sheared by the gluing map, whose differential is s -> s + f'(w) w.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flowbox import SurgeryConfig, TwistProfile, interpolation

SQRT2 = np.sqrt(2.0)
SYSTOLE = 3.0571418  # genus-2 regular octagon surface


class ConeExit(ArithmeticError):
    pass


@dataclass(frozen=True)
class AnnulusTangent:
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def from_sw(cls, s, w):
        s, w = np.asarray(s, dtype=float), np.asarray(w, dtype=float)
        return cls((s + w) / SQRT2, (w - s) / SQRT2)

    def to_sw(self):
        return (self.a - self.b) / SQRT2, (self.a + self.b) / SQRT2

    @property
    def projected_norm(self):
        return np.abs(self.a)


def shear_step(v: AnnulusTangent, fprime) -> AnnulusTangent:
    k = 0.5 * np.asarray(fprime) * (v.a + v.b)
    return AnnulusTangent(v.a + k, v.b - k)


def flight_step(v: AnnulusTangent, t) -> AnnulusTangent:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("flight time must be nonnegative")
    return AnnulusTangent(v.a * np.exp(t), v.b * np.exp(-t))


@dataclass(frozen=True)
class LorentzForm:
    """Q0 = sign dw ds - c dt^2, and Q1 = sign (dw ds - b(t) f'(w) dw^2) - c dt^2."""

    which: str  # "Q0+", "Q0-", "Q1+", "Q1-"
    c: float = 1.0
    t: float = 0.0
    config: SurgeryConfig | None = None

    def __post_init__(self):
        if self.which not in ("Q0+", "Q0-", "Q1+", "Q1-"):
            raise ValueError(f"unknown form {self.which}")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.which.startswith("Q1") and self.config is None:
            raise ValueError("Q1 needs a surgery config")

    def __call__(self, w, dt, ds, dw):
        sign = 1.0 if self.which.endswith("+") else -1.0
        val = np.asarray(dw) * np.asarray(ds)
        if self.which.startswith("Q1"):
            bt = interpolation(self.t, self.config.eta)
            val = val - bt * self.config.twist.f_prime(w) * np.asarray(dw) ** 2
        return sign * val - self.c * np.asarray(dt) ** 2

    def planar(self, w, v: AnnulusTangent):
        """The form restricted to the (s, w)-plane."""
        ds, dw = v.to_sw()
        return self(w, 0.0, ds, dw)


def lorentz_pullback_check(config: SurgeryConfig, n_samples: int = 1000, seed: int = 0) -> dict:
    """max |Q1(DF v) - Q0(v)| / scale at t = 0 over random annulus points and tangents, for both signs."""
    rng = np.random.default_rng(seed)
    eps = config.twist.epsilon
    w = rng.uniform(-eps, eps, n_samples)
    dt, ds, dw = rng.normal(size=(3, n_samples))
    fp = config.twist.f_prime(w)
    out = {}
    for sign in "+-":
        q0 = LorentzForm("Q0" + sign, t=0.0)
        q1 = LorentzForm("Q1" + sign, t=0.0, config=config)
        lhs = q1(w, dt, ds + fp * dw, dw)
        rhs = q0(w, dt, ds, dw)
        scale = 1.0 + np.abs(ds * dw) + np.abs(fp) * dw**2 + dt**2
        out[sign] = float(np.max(np.abs(lhs - rhs) / scale))
    if not np.all(np.isfinite(list(out.values()))):
        raise FloatingPointError("pullback residual overflow")
    return {"residual": max(out.values()), "by_sign": out, "n_samples": n_samples}


@dataclass(frozen=True)
class ReturnSequence:
    """Flight times and crossing parameters; arrays of shape (n_sequences, length)."""

    flights: np.ndarray
    w: np.ndarray
    t_min: float
    seed: int | None
    generator: str

    def __post_init__(self):
        if self.t_min <= 0:
            raise ValueError("t_min must be positive")
        if self.flights.shape != self.w.shape:
            raise ValueError("flights and crossings must have the same shape")
        if np.any(self.flights < self.t_min):
            raise ValueError("flight shorter than t_min")

    @classmethod
    def synthetic(cls, n: int, length: int, epsilon: float, t_min: float = SYSTOLE, spread: float = 5.0, seed: int = 0):
        rng = np.random.default_rng(seed)
        flights = rng.uniform(t_min, t_min + spread, (n, length))
        w = rng.uniform(-epsilon, epsilon, (n, length))
        gen = "synthetic-uniform" if spread == 5.0 and t_min == SYSTOLE else "synthetic-configured"
        return cls(flights, w, t_min, seed, gen)

    @classmethod
    def traced(cls, crossings):
        """From (time, w) crossings of one trajectory; flights are the gaps between them."""
        t = np.array([c[0] for c in crossings])
        w = np.array([c[1] for c in crossings])
        if len(t) < 2:
            raise ValueError("need at least two crossings")
        flights = np.diff(t)[None]
        return cls(flights, w[1:][None], float(flights.min()), None, "traced")

    @property
    def shape(self):
        return self.flights.shape


def _rays(n):
    return AnnulusTangent(np.ones((n, 2)), np.tile([1.0, -1.0], (n, 1)))


def _margin(v: AnnulusTangent):
    return (v.a**2 - v.b**2) / (v.a**2 + v.b**2)


def anosov_certificate(seq: ReturnSequence, twist: TwistProfile) -> dict:
    """Push the closed cone a^2 >= b^2 through each flight-then-shear return step.

    The cone is spanned by the rays (1, 1) and (1, -1); it suffices to follow
    them. Each step must land them in the open cone on the a > 0 side.
    """
    if twist.q < 0:
        raise ValueError("the certificate applies to q >= 0")
    n, length = seq.shape
    v = _rays(n)
    fp = twist.f_prime(seq.w)
    margin = np.inf
    for i in range(length):
        v = shear_step(flight_step(v, seq.flights[:, i, None]), fp[:, i, None])
        m = _margin(v)
        bad = (m <= 0) | (v.a <= 0)
        if np.any(bad):
            j, r = np.argwhere(bad)[0]
            return {
                "pass": False,
                "witness": {"sequence": int(j), "step": i, "ray": int(r), "a": float(v.a[j, r]), "b": float(v.b[j, r])},
            }
        margin = min(margin, float(m.min()))
        scale = np.hypot(v.a, v.b)
        v = AnnulusTangent(v.a / scale, v.b / scale)
    return {"pass": True, "margin": margin, "quadrant_preserved": True, "n_sequences": n, "length": length}


def flip_constant(t_min: float) -> float:
    """Smallest K for which every flight of length >= t_min maps {s <= -K w <= 0} into {0 >= s >= K w}."""
    return 1.0 / np.tanh(0.5 * t_min)


def _half_cone(s, w, K, side: str) -> bool:
    tol = 1e-12 * np.hypot(s, w)
    if side == "upper":  # 0 <= s <= K w
        return -tol <= s <= K * w + tol
    if side == "flipped":  # s <= -K w <= 0
        return s <= -K * w + tol and w >= -tol
    return -tol >= s >= K * w - tol  # "opposite": 0 >= s >= K w


def cone_flip_detector(twist: TwistProfile, t_min: float = SYSTOLE, n_grid: int = 2001):
    """Look for a crossing w where the shear throws the half-cone 0 <= s <= K w across e-."""
    if twist.q >= 0:
        raise ValueError("flip detection applies to q < 0")
    K = flip_constant(t_min)
    w = np.linspace(-twist.epsilon, twist.epsilon, n_grid)
    fp = twist.f_prime(w)
    i = int(np.argmin(fp))
    if fp[i] > -2.0 * K:
        return None
    # the edge ray (K, 1) is the hardest case; follow it through shear and return flight
    s0, w0 = float(K), 1.0
    s1, w1 = s0 + float(fp[i]) * w0, w0
    v2 = flight_step(AnnulusTangent.from_sw(s1, w1), t_min)
    s2, w2 = (float(x) for x in v2.to_sw())
    # the segment from v0 to v1 meets the e- line s = -w at this parameter
    cross = (s0 + w0) / ((s0 + w0) - (s1 + w1))
    assert _half_cone(s0, w0, K, "upper") and _half_cone(s1, w1, K, "flipped") and _half_cone(s2, w2, K, "opposite")
    return {
        "K": float(K),
        "w": float(w[i]),
        "fprime": float(fp[i]),
        "path": [(s0, w0), (s1, w1), (s2, w2)],
        "crosses_e_minus_at": float(cross),
    }


def _closed_form_next_a(a, b, t, fp):
    """Closed-form e+ component after a flight and a shear: a e^t plus f' times the e+ share of the w-component."""
    a0 = 1.0 / SQRT2
    w_comp = (a * np.exp(t) + b * np.exp(-t)) / SQRT2
    return a * np.exp(t) + fp * a0 * w_comp


def lyapunov_estimate(seq: ReturnSequence, twist: TwistProfile, v0=(1.0, 0.0)) -> dict:
    """Growth rate of the projected norm |a| per unit flight time, one exponent per sequence."""
    a0, b0 = float(v0[0]), float(v0[1])
    if a0 * a0 <= b0 * b0:
        raise ValueError("initial vector must lie in the open cone")
    n, length = seq.shape
    a = np.full(n, a0)
    b = np.full(n, b0)
    fp = twist.f_prime(seq.w)
    log_growth = np.zeros(n)
    closed_form_dev = 0.0
    for i in range(length):
        v = shear_step(flight_step(AnnulusTangent(a, b), seq.flights[:, i]), fp[:, i])
        closed = _closed_form_next_a(a, b, seq.flights[:, i], fp[:, i])
        closed_form_dev = max(closed_form_dev, float(np.max(np.abs(closed - v.a) / np.abs(v.a))))
        if np.any(v.a**2 < v.b**2):
            raise ConeExit(f"vector left the cone at step {i}")
        scale = np.abs(v.a)
        log_growth += np.log(scale / np.abs(a))
        a, b = v.a / scale, v.b / scale
    exponents = log_growth / seq.flights.sum(axis=1)
    return {"exponents": exponents, "min": float(exponents.min()), "closed_form_deviation": closed_form_dev}
