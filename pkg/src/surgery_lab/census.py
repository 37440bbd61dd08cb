"""Closed-geodesic census on the octagon surface and orbit typing against a simple geodesic.

Every oriented closed geodesic meets the fundamental octagon in finitely many
chords. A chord corresponds to a conjugate g whose axis crosses the octagon,
and following the axis into the next tile conjugates g by the side pairing
crossed. Those conjugates form one cycle per conjugacy class, so classes are
read off as cycles without any word-problem solving.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple

import mpmath as mp
import numpy as np
from scipy.spatial import cKDTree

from .geometry import clip_lines, enumerate_ball, klein, klein_length, mobius_disc, poincare, side_offset
from .hyperbolic import FuchsianSurface, cosh_displacement, fixed_points, translation_length
from .transport import (
    MIN_CHORD,
    Tracker,
    digits_for,
    fixed_points_mp,
    kf,
    mpf_matrix,
    vertex_neighbours,
    word_matrix_mp,
)

OrbitType = Literal["on_torus", "disjoint", "transverse"]
MAX_CENSUS_LENGTH = 14.0


class BudgetExceeded(RuntimeError):
    pass


def canonical_rotation(word) -> tuple[int, ...]:
    w = tuple(word)
    if not w:
        return w
    return min(w[i:] + w[:i] for i in range(len(w)))


def invert_word(word, inverse=lambda k: (k + 4) % 8) -> tuple[int, ...]:
    return tuple(inverse(k) for k in reversed(word))


def canonical_word(word, inverse=lambda k: (k + 4) % 8, with_inversion: bool = True):
    """Minimal rotation, optionally also over the inverse word."""
    a = canonical_rotation(word)
    if not with_inversion:
        return a
    return min(a, canonical_rotation(invert_word(word, inverse)))


def primitive_period(word) -> int:
    """Length of the shortest block whose repetition is ``word``."""
    w = tuple(word)
    n = len(w)
    for d in range(1, n + 1):
        if n % d == 0 and w[:d] * (n // d) == w:
            return d
    return n


@dataclass(frozen=True)
class CensusEntry:
    word: tuple[int, ...]  # cutting sequence over the full period, minimal rotation
    trace: float
    length: float
    primitive: bool
    power: int = 1  # the class is the power-th power of a primitive one
    orbit_type: OrbitType | None = None
    crossings: int | None = None  # geometric intersection with the reference curve
    chords: np.ndarray = field(default=None, repr=False, compare=False)  # (m, 2, 2) Klein endpoints of the primitive geodesic


def _sign_key(mats):
    tr = mats[:, 0, 0] + mats[:, 1, 1]
    return (mats * np.where(tr < 0, -1.0, 1.0)[:, None, None]).reshape(-1, 4)


def axis_chords(surface: FuchsianSurface, mats, min_length: float = MIN_CHORD):
    """Klein chords of the axes of ``mats`` inside the octagon.

    Returns (entry, exit, exit_side, ambiguous, hit); the axis runs from the
    repelling to the attracting fixed point. Chords shorter than ``min_length``
    (vertex touches, hairline corner cuts) do not count as hits.
    """
    rep, att = fixed_points(mats)
    p, q = klein(rep), klein(att)
    ch = clip_lines(p, q, side_offset(surface))
    d = q - p
    a = p + ch.t_in[:, None] * d
    b = p + ch.t_out[:, None] * d
    ok = ch.hit & (klein_length(a, b) > min_length)
    return a, b, ch.exit_side, ch.exit_gap < 1e-9, ok


def _step(surface, mats):
    a, b, side, ambiguous, _ = axis_chords(surface, mats, min_length=0.0)
    gens = surface.generators
    inv = gens[(np.arange(8) + 4) % 8]
    nxt = np.einsum("nij,njk,nkl->nil", inv[side], mats, gens[side])
    steps = [(int(k),) for k in side]
    if np.any(ambiguous):
        words, hmats = vertex_neighbours(surface)
    for i in np.nonzero(ambiguous)[0]:
        # the axis leaves through a vertex: find the tile it enters next
        ez = complex(poincare(b[i]))
        for w, hm in zip(words, hmats):
            hinv = np.linalg.inv(hm)
            cand = hinv @ mats[i] @ hm
            ca, _, _, _, ok = axis_chords(surface, cand[None])
            if ok[0] and np.linalg.norm(klein(mobius_disc(hinv, ez)) - ca[0]) < 1e-7:
                nxt[i] = cand
                steps[i] = tuple(w)
                break
        else:
            raise RuntimeError("no continuation tile found at an octagon vertex")
    return nxt, steps


def _successors(surface, mats, max_skips: int = 16):
    """Next conjugate along the axis and the letters of the step, for each chord element.

    Tiles the axis only grazes (chord below MIN_CHORD) are stepped through.
    """
    nxt, steps = _step(surface, mats)
    for _ in range(max_skips):
        _, _, _, _, ok = axis_chords(surface, nxt)
        tiny = np.nonzero(~ok)[0]
        if not len(tiny):
            return nxt, steps
        more, extra = _step(surface, nxt[tiny])
        nxt[tiny] = more
        for j, i in enumerate(tiny):
            steps[i] = steps[i] + extra[j]
    raise RuntimeError("axis keeps grazing tiles")


def enumerate_classes(surface: FuchsianSurface, max_length: float, max_elements: int = 5_000_000):
    """Oriented conjugacy classes of hyperbolic elements with translation length <= max_length."""
    if max_length > MAX_CENSUS_LENGTH:
        raise BudgetExceeded(f"max_length {max_length} exceeds the desk-scale guard {MAX_CENSUS_LENGTH}")
    if max_length < surface.systole:
        return []
    R = surface.circumradius
    # an axis within distance R of the base point displaces it by at most this much
    bound = np.cosh(R) ** 2 * np.cosh(max_length) - np.sinh(R) ** 2
    if (bound - 1.0) / 2.0 > max_elements:
        raise BudgetExceeded("displacement ball larger than the element budget")
    ball = enumerate_ball(surface, bound * (1.0 + 1e-9))
    mats = ball.mats
    ell = translation_length(mats[:, 0, 0] + mats[:, 1, 1])
    cand = np.nonzero(ell <= max_length + 1e-9)[0]
    a, b, _, _, ok = axis_chords(surface, mats[cand], min_length=1e-9)
    cand, a, b = cand[ok], a[ok], b[ok]
    cm = mats[cand]
    # hysteresis: successors always clear MIN_CHORD, the ball copy may round slightly lower
    solid = klein_length(a, b) > 0.5 * MIN_CHORD

    nxt, steps = _successors(surface, cm[solid])
    tree = cKDTree(_sign_key(cm))
    scale = np.abs(cm).reshape(len(cm), -1).max(axis=1)
    dist, found = tree.query(_sign_key(nxt))
    if np.any(dist > 1e-7 * np.maximum(scale[solid], 1.0)):
        raise RuntimeError("successor conjugate missing from the candidate set")

    succ = np.full(len(cm), -1)
    succ[solid] = found
    steps_of = dict(zip(np.nonzero(solid)[0].tolist(), steps))
    seen = np.zeros(len(cm), dtype=bool)
    entries = {}
    for start in np.nonzero(solid)[0]:
        if seen[start]:
            continue
        cyc = []
        pos = {}
        i = start
        while i >= 0 and not seen[i]:
            seen[i] = True
            pos[i] = len(cyc)
            cyc.append(i)
            i = succ[i]
        if i not in pos:
            continue  # a grazing chord that no axis steps into
        cyc = cyc[pos[i] :]
        letters = tuple(k for j in cyc for k in steps_of[j])
        tr = abs(float(cm[start, 0, 0] + cm[start, 1, 1]))
        length = float(ell[cand[start]])
        chord_total = float(np.sum(klein_length(a[cyc], b[cyc])))
        m = int(round(length / chord_total))
        if abs(m * chord_total - length) > 1e-6 * max(length, 1.0):
            raise RuntimeError("chord lengths do not add up to the translation length")
        # a proper power runs through the same chord cycle m times
        word = canonical_rotation(letters * m)
        if word in entries:
            continue
        chords = np.stack([a[cyc], b[cyc]], axis=1)
        entries[word] = CensusEntry(word, tr, length, m == 1, power=m, chords=chords)
    return sorted(entries.values(), key=lambda e: (e.length, e.word))


def segments_cross(p1, p2, q1, q2) -> bool:
    """Proper crossing of Klein segments, half-open at the end of the first segment."""
    d1 = p2 - p1
    d2 = q2 - q1
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < 1e-14:
        return False
    r = q1 - p1
    t = (r[0] * d2[1] - r[1] * d2[0]) / den
    u = (r[0] * d1[1] - r[1] * d1[0]) / den
    return -1e-12 <= t < 1.0 - 1e-12 and -1e-12 <= u <= 1.0 + 1e-12


def _same_segment(p1, p2, q1, q2, tol=1e-9) -> bool:
    fwd = np.linalg.norm(p1 - q1) + np.linalg.norm(p2 - q2)
    bwd = np.linalg.norm(p1 - q2) + np.linalg.norm(p2 - q1)
    return min(fwd, bwd) < tol


def intersection_number(chords, curve_chords) -> tuple[int, bool]:
    """(crossings, coincides) of a closed geodesic with a reference curve, from octagon chords."""
    coincide = True
    n = 0
    for p1, p2 in chords:
        on = False
        for q1, q2 in curve_chords:
            if _same_segment(p1, p2, q1, q2):
                on = True
                continue
            n += segments_cross(p1, p2, q1, q2)
        coincide &= on
    return n, coincide


def class_chords(surface: FuchsianSurface, g, max_steps: int = 100_000):
    """Octagon chords of the primitive closed geodesic of ``g``.

    ``g`` is a word in the side pairings (exact) or a matrix taken at face
    value; the geodesic is carried in extended precision while it is followed.
    """
    if isinstance(g, tuple):
        # each letter displaces the base point by 2 * inradius
        with mp.workdps(digits_for(4.0 * surface.inradius * max(len(g), 1))):
            return _follow_class(surface, word_matrix_mp(g), max_steps)
    g = np.asarray(g, dtype=float)
    with mp.workdps(digits_for(2.0 * float(np.arccosh(max(cosh_displacement(g), 1.0))))):
        return _follow_class(surface, mpf_matrix(g), max_steps)


def _follow_class(surface, m, max_steps):
    rep, att = fixed_points_mp(m)
    tr = Tracker(surface, rep, att)
    tr.into_domain()
    a0, b0, _, _, _ = tr.chord()
    chords = [np.stack([a0, b0])]
    for _ in range(max_steps):
        tr.advance()
        a, b, _, _, _ = tr.chord()
        if np.linalg.norm(a - a0) + np.linalg.norm(b - b0) < 1e-9:
            return np.array(chords)
        chords.append(np.stack([a, b]))
    raise RuntimeError("chord cycle did not close")


def reference_curve(surface: FuchsianSurface, k: int = 0):
    """Chords of the default simple nonseparating geodesic: the axis of generator k."""
    return class_chords(surface, surface.generators[k])


def classify_orbit_type(entry_or_chords, curve_chords) -> OrbitType:
    chords = entry_or_chords.chords if isinstance(entry_or_chords, CensusEntry) else entry_or_chords
    n, on = intersection_number(chords, curve_chords)
    if on:
        return "on_torus"
    return "disjoint" if n == 0 else "transverse"


def annotate_orbit_types(entries, curve_chords):
    out = []
    for e in entries:
        n, on = intersection_number(e.chords, curve_chords)
        kind = "on_torus" if on else ("disjoint" if n == 0 else "transverse")
        out.append(replace(e, orbit_type=kind, crossings=n * e.power))
    return out


# --- classes disjoint from the reference curve -------------------------------

F2_INVERSE = (2, 3, 0, 1)  # letters l1, l2, l1^-1, l2^-1


@dataclass
class CensusTable:
    edges: np.ndarray  # bucket upper edges (length T or word length), strictly increasing
    counts: np.ndarray  # cumulative counts N_T, nondecreasing
    filter: str
    new: np.ndarray | None = None  # per-bucket counts
    fit: dict = field(default_factory=dict)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.counts = np.asarray(self.counts)
        if np.any(np.diff(self.edges) <= 0):
            raise ValueError("bucket edges must be strictly increasing")
        if np.any(np.diff(self.counts) < 0):
            raise ValueError("cumulative counts must be nondecreasing")

    def rows(self):
        return [(float(t), int(n), self.filter) for t, n in zip(self.edges, self.counts)]


def geodesic_table(entries, edges, primitive_only: bool = True, filter: str = "primitive") -> CensusTable:
    lengths = np.sort([e.length for e in entries if e.primitive or not primitive_only])
    counts = np.searchsorted(lengths, np.asarray(edges) + 1e-12, side="right")
    return CensusTable(np.asarray(edges, dtype=float), counts, filter)


def reduced_words(n: int) -> np.ndarray:
    """All freely reduced words of length n over F2 letters, as an (count, n) int8 array."""
    words = np.arange(4, dtype=np.int8)[:, None]
    inv = np.array(F2_INVERSE, dtype=np.int8)
    for _ in range(n - 1):
        nxt = np.repeat(words, 4, axis=0)
        last = np.tile(np.arange(4, dtype=np.int8), len(words))
        ok = last != inv[nxt[:, -1]]
        words = np.concatenate([nxt[ok], last[ok, None]], axis=1)
    return words


def primitive_necklaces(n: int) -> np.ndarray:
    """Canonical representatives of primitive conjugacy classes of cyclic length n in F2.

    A cyclically reduced word represents its class when it is strictly smaller
    than each of its nontrivial rotations, which also rules out proper powers.
    """
    w = reduced_words(n)
    inv = np.array(F2_INVERSE, dtype=np.int8)
    w = w[w[:, 0] != inv[w[:, -1]]]
    codes = (w.astype(np.int64) * (4 ** np.arange(n - 1, -1, -1, dtype=np.int64))).sum(axis=1)
    keep = np.ones(len(w), dtype=bool)
    for r in range(1, n):
        rot = np.roll(w, -r, axis=1)
        rc = (rot.astype(np.int64) * (4 ** np.arange(n - 1, -1, -1, dtype=np.int64))).sum(axis=1)
        keep &= codes < rc
    return w[keep]


def necklace_count(n: int) -> int:
    """Independent count of primitive classes of length n via Moebius inversion."""

    def mobius(k):
        out, p = 1, 2
        while p * p <= k:
            if k % p == 0:
                k //= p
                if k % p == 0:
                    return 0
                out = -out
            p += 1
        return -out if k > 1 else out

    def cyclically_reduced(d):
        return 3**d + 1 + (2 if d % 2 == 0 else 0)

    total = sum(mobius(n // d) * cyclically_reduced(d) for d in range(1, n + 1) if n % d == 0)
    return total // n


def word_traces(words: np.ndarray, l1, l2) -> np.ndarray:
    mats = np.array([l1, l2, np.linalg.inv(l1), np.linalg.inv(l2)])
    prod = np.broadcast_to(np.eye(2), (len(words), 2, 2)).copy()
    for j in range(words.shape[1]):
        prod = prod @ mats[words[:, j]]
    return prod[:, 0, 0] + prod[:, 1, 1]


def disjoint_class_census(max_letters: int, l1=None, l2=None) -> CensusTable:
    """Primitive conjugacy classes of the free group on a complementary handle, by word length."""
    ns = np.arange(1, max_letters + 1)
    new = np.array([len(primitive_necklaces(int(n))) for n in ns])
    table = CensusTable(ns, np.cumsum(new), "disjoint", new=new)
    if l1 is not None and l2 is not None:
        lengths = [translation_length(word_traces(primitive_necklaces(int(n)), l1, l2)) for n in ns]
        table.fit["geometric_lengths"] = lengths
    table.fit["rate_per_letter"] = growth_rate_per_letter(table)
    return table


def growth_rate_per_letter(table: CensusTable, n_min: int = 4) -> float:
    """Slope of log(n * P(n)) against n, P(n) the number of new classes of length n.

    n * P(n) counts primitive cyclically reduced words, whose growth is free of
    the 1/n factor that biases a raw fit of log P(n).
    """
    n = table.edges
    sel = (n >= n_min) & (table.new > 0)
    return float(np.polyfit(n[sel], np.log(n[sel] * table.new[sel]), 1)[0])


def segment_crossings(surface: FuchsianSurface, z0: complex, z1: complex, curve_chords) -> int:
    """Number of lifts of the curve crossed by the disc segment z0 -> z1 (z0 in the octagon)."""
    with mp.workdps(digits_for(_disc_distance(z0, z1))):
        P, Q = line_through(z0, z1)
        tr = Tracker(surface, P, Q, points=[mp.mpc(z0), mp.mpc(z1)])
        n = 0
        for _ in range(100_000):
            a, b, _, _, _ = tr.chord(min_length=0.0)
            Pk, Qk = tr.klein_line()
            d = Qk - Pk
            u = lambda x: float((x - Pk) @ d / (d @ d))
            u0, u1 = u(kf(tr.points[0])), u(kf(tr.points[1]))
            lo, hi = max(u(a), u0), min(u(b), u1)
            if hi > lo:
                x, y = Pk + lo * d, Pk + hi * d
                n += sum(segments_cross(x, y, q1, q2) for q1, q2 in curve_chords)
            if u1 <= u(b):
                return n
            tr.advance()
    raise RuntimeError("segment walk did not terminate")


def _disc_distance(z0, z1) -> float:
    return float(2.0 * np.arctanh(abs((z1 - z0) / (1.0 - np.conj(z0) * z1))))


def line_through(z0, z1):
    """Circle endpoints (from, to) of the disc geodesic through z0 towards z1, in mpmath."""
    z0, z1 = mp.mpc(z0), mp.mpc(z1)
    w = (z1 - z0) / (1 - mp.conj(z0) * z1)
    v = w / abs(w)
    back = lambda x: (x + z0) / (1 + mp.conj(z0) * x)
    return back(-v), back(v)


class Handle(NamedTuple):
    words: tuple  # side-pairing words of l1, l2
    mats: tuple


def handle_word(handle: Handle, f2_word) -> tuple[int, ...]:
    """Side-pairing word of a word in l1, l2 (letters 0,1 and inverses 2,3)."""
    out: list[int] = []
    for k in f2_word:
        w = handle.words[k % 2]
        out.extend(w if k < 2 else invert_word(w))
    return tuple(out)


def complementary_handle(surface: FuchsianSurface, curve_chords=None, base=0.31 + 0.17j, radius: float = 9.0) -> Handle:
    """Two hyperbolic elements generating a free subgroup whose classes all avoid the curve.

    Both stabilise the complementary region of the lifts of the curve that
    contains ``base``; the two shortest non-commuting, non-peripheral ones are
    returned.
    """
    if curve_chords is None:
        curve_chords = reference_curve(surface)
    ball = enumerate_ball(surface, np.cosh(radius))
    ell = translation_length(ball.mats[:, 0, 0] + ball.mats[:, 1, 1])
    order = np.argsort(np.where(np.isnan(ell), np.inf, ell), kind="stable")
    picked: list[int] = []
    for i in order:
        if not np.isfinite(ell[i]):
            break
        g = ball.mats[i]
        if segment_crossings(surface, base, complex(mobius_disc(g, base)), curve_chords):
            continue
        if classify_orbit_type(class_chords(surface, ball.word(i)), curve_chords) != "disjoint":
            continue
        if picked:
            h = ball.mats[picked[0]]
            comm = g @ h @ np.linalg.inv(g) @ np.linalg.inv(h)
            if abs(abs(np.trace(comm)) - 2.0) < 1e-6:
                continue  # commuting or sharing an axis
        picked.append(int(i))
        if len(picked) == 2:
            return Handle(tuple(ball.word(j) for j in picked), tuple(ball.mats[j] for j in picked))
    raise RuntimeError("no complementary handle inside the search radius")
