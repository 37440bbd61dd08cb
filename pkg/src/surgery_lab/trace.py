"""Crossings of a geodesic trajectory with lifts of a closed curve."""

from __future__ import annotations

import mpmath as mp
import numpy as np

from .census import reference_curve
from .geometry import SIDE_NORMALS, klein_length, poincare, side_offset
from .hyperbolic import FuchsianSurface, cosh_displacement
from .transport import Tracker, digits_for, kf, mpf_matrix

MAX_TRACE_LENGTH = 50.0


class BallExhausted(RuntimeError):
    pass


def _cayley(x):
    return (x - 1j) / (x + 1j)


def _circle_end(q1, q2) -> np.ndarray:
    """Forward endpoint on the unit circle of the Klein line q1 -> q2."""
    d = q2 - q1
    a, b, c = d @ d, 2.0 * q1 @ d, q1 @ q1 - 1.0
    t = (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    return q1 + t * d


def _crossing(x, y, q1, q2):
    """Parameter along x -> y where it meets q1 -> q2 (half-open at y), else None."""
    d1, d2 = y - x, q2 - q1
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < 1e-14:
        return None
    r = q1 - x
    t = (r[0] * d2[1] - r[1] * d2[0]) / den
    u = (r[0] * d1[1] - r[1] * d1[0]) / den
    if -1e-12 <= t < 1.0 - 1e-12 and -1e-12 <= u <= 1.0 + 1e-12:
        return max(t, 0.0)
    return None


def incidence_angle(point, forward, curve_forward) -> float:
    """Unsigned angle in [0, pi] at a Klein point between two oriented lines, given their forward ends."""
    z = complex(poincare(point))
    phi = lambda u: (u - z) / (1.0 - np.conj(z) * u)
    f = phi(complex(forward[0], forward[1]))
    c = phi(complex(curve_forward[0], curve_forward[1]))
    return float(abs(np.angle(f / c)))


def crossing_trace(surface: FuchsianSurface, start, length: float, curve_chords=None, window: float = 0.05):
    """Times and offsets w = theta - pi/2 of near-orthogonal crossings with lifts of the curve.

    The trajectory is t -> start . exp(tX) . i for 0 <= t <= length; a crossing
    is reported when its angle theta with the oriented curve has |w| < window.
    """
    if length > MAX_TRACE_LENGTH:
        raise ValueError(f"trace length {length} exceeds {MAX_TRACE_LENGTH}")
    if curve_chords is None:
        curve_chords = reference_curve(surface)
    start = np.asarray(start, dtype=float)
    ends = [_circle_end(q1, q2) for q1, q2 in curve_chords]
    off = side_offset(surface)
    reach = length + 2.0 * float(np.arccosh(max(cosh_displacement(start), 1.0)))
    out: list[tuple[float, float]] = []
    with mp.workdps(digits_for(reach)):
        m = mpf_matrix(start)
        a, b, c, d = m[0][0], m[0][1], m[1][0], m[1][1]
        z0 = _cayley((a * mp.mpc(0, 1) + b) / (c * mp.mpc(0, 1) + d))
        P = _cayley(b / d) if d != 0 else mp.mpc(1)
        Q = _cayley(a / c) if c != 0 else mp.mpc(1)
        tr = Tracker(surface, P, Q, points=[z0])
        for _ in range(100_000):
            vals = SIDE_NORMALS @ kf(tr.points[0]) - off
            k = int(np.argmax(vals))
            if vals[k] <= 1e-13:
                break
            tr.apply(tr.gens[(k + 4) % 8])
        else:
            raise BallExhausted("could not bring the start point into the octagon")

        x = kf(tr.points[0])
        elapsed = 0.0
        for _ in range(1_000_000):
            _, y, _, _, _ = tr.chord(min_length=0.0)
            fwd = tr.klein_line()[1]
            hits = []
            for (q1, q2), cend in zip(curve_chords, ends):
                s = _crossing(x, y, q1, q2)
                if s is not None:
                    X = x + s * (y - x)
                    hits.append((elapsed + float(klein_length(x, X)), X, cend))
            for t, X, cend in sorted(hits, key=lambda h: h[0]):
                if t > length:
                    continue
                w = incidence_angle(X, fwd, cend) - np.pi / 2.0
                if abs(w) < window:
                    out.append((t, w))
            elapsed += float(klein_length(x, y))
            if elapsed >= length:
                return out
            tr.advance()
            x = tr.chord()[0]
    raise BallExhausted("trajectory crossed too many tiles")


def flight_times(crossings) -> np.ndarray:
    t = np.array([c[0] for c in crossings])
    return np.diff(t)
