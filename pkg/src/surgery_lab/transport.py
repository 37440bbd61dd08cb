"""Following a geodesic from tile to tile.

Pulling a geodesic back into the octagon after each tile multiplies errors in
its forward endpoint by roughly e^(length travelled). Endpoints and points
are therefore carried in mpmath at a precision sized to the trip, and only
the local decisions (which side, which chord) are made in floats.
"""

from __future__ import annotations

import mpmath as mp
import numpy as np

from .geometry import SIDE_NORMALS, clip_lines, enumerate_ball, klein_length, side_offset
from .hyperbolic import FuchsianSurface, cosh_displacement

MIN_CHORD = 1e-7


def digits_for(length: float) -> int:
    return 30 + int(np.ceil(0.5 * max(length, 0.0)))


def mpf_matrix(m):
    return [[mp.mpf(float(m[0][0])), mp.mpf(float(m[0][1]))], [mp.mpf(float(m[1][0])), mp.mpf(float(m[1][1]))]]


def _mul(a, b):
    return [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]


def _inv(a):
    return [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]  # determinant one


def generators_mp() -> list:
    """Side pairings at the current mpmath precision, in SL(2,R) form."""
    c = 1 + mp.sqrt(2)
    s = mp.sqrt(c * c - 1)
    out = []
    for k in range(8):
        # disc matrix rho^k T rho^-k = [[c, s e^{i k pi/4}], [s e^{-i k pi/4}, c]]
        beta = s * mp.expj(k * mp.pi / 4)
        # SL(2,R) form of [[alpha, beta], [conj beta, conj alpha]] with alpha = c real
        a = c + beta.real
        d = c - beta.real
        b = -beta.imag
        out.append([[a, b], [b, d]])
    return out


def word_matrix_mp(word) -> list:
    gens = generators_mp()
    m = [[mp.mpf(1), mp.mpf(0)], [mp.mpf(0), mp.mpf(1)]]
    for k in word:
        m = _mul(m, gens[k])
    return m


def _disc_coeffs(m):
    a, b, c, d = m[0][0], m[0][1], m[1][0], m[1][1]
    alpha = mp.mpc((a + d) / 2, (b - c) / 2)
    beta = mp.mpc((a - d) / 2, -(b + c) / 2)
    return alpha, beta


def mobius(m, z):
    alpha, beta = _disc_coeffs(m)
    return (alpha * z + beta) / (mp.conj(beta) * z + mp.conj(alpha))


def fixed_points_mp(m):
    """(repelling, attracting) boundary fixed points in the Poincare disc."""
    alpha, beta = _disc_coeffs(m)
    qa, qb = mp.conj(beta), mp.conj(alpha) - alpha
    root = mp.sqrt(qb * qb + 4 * qa * beta)
    z1 = (-qb + root) / (2 * qa)
    z2 = (-qb - root) / (2 * qa)
    z1, z2 = z1 / abs(z1), z2 / abs(z2)
    if abs(qa * z1 + mp.conj(alpha)) > 1:
        return z2, z1
    return z1, z2


def kf(z) -> np.ndarray:
    """Float Klein coordinates of an mpmath disc point."""
    r2 = abs(z) ** 2
    k = 2 * z / (1 + r2)
    return np.array([float(k.real), float(k.imag)])


def from_klein(k) -> mp.mpc:
    k0, k1 = mp.mpf(float(k[0])), mp.mpf(float(k[1]))
    s = 1 + mp.sqrt(max(1 - k0 * k0 - k1 * k1, mp.mpf(0)))
    return mp.mpc(k0 / s, k1 / s)


def line_chord(surface: FuchsianSurface, P, Q, min_length: float = MIN_CHORD):
    """Octagon chord of the Klein line from P to Q (float (2,) arrays)."""
    ch = clip_lines(P[None], Q[None], side_offset(surface))
    a = P + ch.t_in[0] * (Q - P)
    b = P + ch.t_out[0] * (Q - P)
    ok = bool(ch.hit[0]) and float(klein_length(a, b)) > min_length
    return a, b, int(ch.exit_side[0]), bool(ch.exit_gap[0] < 1e-9), ok


_NEIGH: dict = {}


def vertex_neighbours(surface: FuchsianSurface):
    """(words, float matrices) of the tiles sharing at least a vertex with the octagon."""
    key = id(surface)
    if key in _NEIGH:
        return _NEIGH[key]
    from .geometry import mobius_disc

    ball = enumerate_ball(surface, np.cosh(2.0 * surface.circumradius) * (1.0 + 1e-9))
    vz = surface.klein_vertices[:, 0] + 1j * surface.klein_vertices[:, 1]
    vz = vz / (1.0 + np.sqrt(1.0 - np.abs(vz) ** 2))
    words, mats = [], []
    for i in range(1, len(ball.mats)):
        if cosh_displacement(ball.mats[i]) > np.cosh(2.0 * surface.circumradius) * (1.0 + 1e-9):
            continue
        img = mobius_disc(ball.mats[i], vz)
        if np.min(np.abs(img[:, None] - vz[None, :])) < 1e-9:
            words.append(ball.word(i))
            mats.append(ball.mats[i])
    order = sorted(range(len(words)), key=lambda j: (len(words[j]), words[j]))
    out = ([words[j] for j in order], np.array([mats[j] for j in order]))
    _NEIGH[key] = out
    return out


class Tracker:
    """A geodesic pulled back into the octagon, with extra points carried along."""

    def __init__(self, surface: FuchsianSurface, P, Q, points=()):
        self.surface = surface
        self.gens = generators_mp()
        self.P, self.Q = P, Q
        self.points = list(points)
        self.letters: list[int] = []

    def klein_line(self):
        return kf(self.P), kf(self.Q)

    def chord(self, min_length: float = MIN_CHORD):
        P, Q = self.klein_line()
        return line_chord(self.surface, P, Q, min_length)

    def apply(self, m):
        self.P, self.Q = mobius(m, self.P), mobius(m, self.Q)
        self.points = [mobius(m, z) for z in self.points]

    def into_domain(self, max_steps: int = 100_000):
        """Translate by side pairings until the line has a solid chord in the octagon."""
        off = side_offset(self.surface)
        for _ in range(max_steps):
            if self.chord()[4]:
                return
            P, Q = self.klein_line()
            k = int(np.argmax(SIDE_NORMALS @ (0.5 * (P + Q)) - off))
            self.apply(self.gens[(k + 4) % 8])
        raise RuntimeError("could not bring the line into the octagon")

    def advance(self, max_skips: int = 16):
        """Pull the line back from the next tile it crosses; returns the letters of the step."""
        letters = []
        for _ in range(max_skips):
            _, b, side, ambiguous, _ = self.chord(min_length=0.0)
            if not ambiguous:
                self.apply(self.gens[(side + 4) % 8])
                letters.append(side)
            else:
                letters.extend(self._through_vertex(b))
            if self.chord()[4]:
                self.letters.extend(letters)
                return tuple(letters)
        raise RuntimeError("line keeps grazing tiles")

    def _through_vertex(self, exit_pt):
        words, mats = vertex_neighbours(self.surface)
        from .geometry import klein, mobius_disc, poincare

        P, Q = self.klein_line()

        ez = complex(poincare(exit_pt))
        for w, h in zip(words, mats):
            hinv = np.linalg.inv(h)
            P2 = klein(mobius_disc(hinv, poincare(P)))
            Q2 = klein(mobius_disc(hinv, poincare(Q)))
            a2, _, _, _, ok = line_chord(self.surface, P2, Q2)
            if ok and np.linalg.norm(klein(mobius_disc(hinv, ez)) - a2) < 1e-7:
                m = [[mp.mpf(1), mp.mpf(0)], [mp.mpf(0), mp.mpf(1)]]
                for k in reversed(w):
                    m = _mul(m, self.gens[(k + 4) % 8])
                self.apply(m)
                return list(w)
        raise RuntimeError("no continuation tile found at an octagon vertex")
