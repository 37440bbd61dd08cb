"""Disc-model geometry of the fundamental octagon: Moebius action, chord clipping,
Dirichlet reduction, and enumeration of group elements in a displacement ball."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .hyperbolic import FuchsianSurface, cosh_displacement, to_disc

SIDE_NORMALS = np.stack(
    [np.cos(np.arange(8) * np.pi / 4), np.sin(np.arange(8) * np.pi / 4)], axis=1
)


def side_offset(surface: FuchsianSurface) -> float:
    """Klein-model distance from the centre to each side of the octagon."""
    return float(np.tanh(surface.inradius))


def mobius_disc(mats, z):
    """Apply SL(2,R) matrices (shape (..., 2, 2)) to Poincare-disc points ``z``."""
    m = to_disc(mats)
    a, b = m[..., 0, 0], m[..., 0, 1]
    return (a * z + b) / (np.conj(b) * z + np.conj(a))


def klein(z):
    z = np.asarray(z, dtype=complex)
    k = 2.0 * z / (1.0 + np.abs(z) ** 2)
    return np.stack([k.real, k.imag], axis=-1)


def poincare(k):
    k = np.asarray(k, dtype=float)
    r2 = np.sum(k * k, axis=-1)
    s = 1.0 + np.sqrt(np.maximum(1.0 - r2, 0.0))
    return (k[..., 0] + 1j * k[..., 1]) / s


class Chords(NamedTuple):
    t_in: np.ndarray
    t_out: np.ndarray
    exit_side: np.ndarray
    exit_gap: np.ndarray  # separation between the two smallest exit parameters
    hit: np.ndarray
    on_side: np.ndarray  # the line runs along a side of the octagon


def clip_lines(p, q, offset: float, tol: float = 1e-9) -> Chords:
    """Clip Klein segments p + t (q - p), t in [0, 1], to the octagon.

    ``p`` and ``q`` have shape (N, 2). The octagon is the intersection of the
    half-planes n_k . x <= offset. A line lying along a side belongs to the
    tile on its left, so each such segment is owned by exactly one tile.
    """
    d = q - p
    num = offset - p @ SIDE_NORMALS.T  # (N, 8)
    den = d @ SIDE_NORMALS.T
    along = (np.abs(num) < tol) & (np.abs(num - den) < tol)
    num = np.where(along, 1.0, num)
    den = np.where(along, 0.0, den)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / den
    exits = np.where(den > 0, t, np.inf)
    entries = np.where(den < 0, t, -np.inf)
    t_in = np.maximum(entries.max(axis=1), 0.0)
    t_out = np.minimum(exits.min(axis=1), 1.0)
    order = np.argsort(exits, axis=1)
    rows = np.arange(len(p))
    first = exits[rows, order[:, 0]]
    second = exits[rows, order[:, 1]]
    on_side = along.any(axis=1)
    # inward normal -n_k must point to the left of d
    left = (d[:, None, 0] * -SIDE_NORMALS[None, :, 1] - d[:, None, 1] * -SIDE_NORMALS[None, :, 0]) > 0
    owned = ~np.any(along & ~left, axis=1)
    hit = (t_out > t_in) & owned & np.all(num >= -tol, axis=1, where=den == 0)
    gap = np.where(on_side, 0.0, second - first)
    return Chords(t_in, t_out, order[:, 0], gap, hit, on_side)


def klein_length(p, q):
    """Hyperbolic distance between Klein points, accurate for nearby points too."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dot = np.sum(p * q, axis=-1)
    root = np.sqrt(np.maximum((1.0 - np.sum(p * p, axis=-1)) * (1.0 - np.sum(q * q, axis=-1)), 0.0))
    diff = p - q
    cross = p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0]
    # cosh d - 1 without cancellation, via (1 - p.q)^2 - (1-|p|^2)(1-|q|^2) = |p-q|^2 - (p x q)^2
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        x = np.maximum(np.sum(diff * diff, axis=-1) - cross * cross, 0.0) / (root * ((1.0 - dot) + root))
        d = np.log1p(x + np.sqrt(x * (x + 2.0)))
    return np.where(np.isnan(d), np.inf, d)


def reduce_point(surface: FuchsianSurface, z: complex, max_steps: int = 10_000):
    """Move a disc point into the octagon by side pairings.

    Returns (z0, h) with z = h . z0 and z0 in the closed octagon.
    """
    off = side_offset(surface)
    h = np.eye(2)
    for _ in range(max_steps):
        kz = klein(z)
        vals = SIDE_NORMALS @ kz - off
        k = int(np.argmax(vals))
        if vals[k] <= 1e-13:
            return z, h
        inv = surface.generators[(k + 4) % 8]
        z = complex(mobius_disc(inv, z))
        h = h @ surface.generators[k]
    raise RuntimeError("point reduction did not terminate")


class Ball(NamedTuple):
    mats: np.ndarray  # (N, 2, 2)
    parent: np.ndarray  # (N,), -1 for the identity
    letter: np.ndarray  # (N,), generator appended to the parent

    def word(self, i: int) -> tuple[int, ...]:
        out = []
        while self.parent[i] >= 0:
            out.append(int(self.letter[i]))
            i = int(self.parent[i])
        return tuple(reversed(out))


def enumerate_ball(surface: FuchsianSurface, cosh_bound: float, chunk: int = 200_000) -> Ball:
    """All group elements g with cosh d(i, g i) <= cosh_bound, each exactly once.

    Elements form a tree: the parent of g is the neighbour g s_k closest to the
    base point (ties to the smallest k). For a Dirichlet domain that neighbour
    is strictly closer, so the tree is rooted at the identity.
    """
    gens = surface.generators
    # ||c g_k||_F^2 = <c^T c, g_k g_k^T>; store the symmetric Gram products.
    gram = np.einsum("kij,klj->kil", gens, gens)
    gram_w = np.stack([gram[:, 0, 0], 2.0 * gram[:, 0, 1], gram[:, 1, 1]], axis=0)  # (3, 8)
    inv_of = (np.arange(8) + 4) % 8

    mats = [np.eye(2)[None]]
    parents = [np.array([-1])]
    letters = [np.array([-1])]
    frontier = np.eye(2)[None]
    frontier_idx = np.array([0])
    total = 1
    while len(frontier):
        new_m, new_p, new_l = [], [], []
        for lo in range(0, len(frontier), chunk):
            f = frontier[lo : lo + chunk]
            fi = frontier_idx[lo : lo + chunk]
            kids = np.einsum("nij,kjl->nkil", f, gens).reshape(-1, 2, 2)
            kid_parent = np.repeat(fi, 8)
            kid_letter = np.tile(np.arange(8), len(f))
            ch = cosh_displacement(kids)
            keep = ch <= cosh_bound
            kids, kid_parent, kid_letter, ch = kids[keep], kid_parent[keep], kid_letter[keep], ch[keep]
            ctc = np.einsum("nji,njl->nil", kids, kids)
            feats = np.stack([ctc[:, 0, 0], ctc[:, 0, 1], ctc[:, 1, 1]], axis=1)
            neigh = 0.5 * feats @ gram_w  # cosh displacement of each neighbour
            best = neigh.min(axis=1, keepdims=True)
            tie = neigh <= best * (1.0 + 1e-10)
            chosen = np.argmax(tie, axis=1)
            ok = (chosen == inv_of[kid_letter]) & (best[:, 0] < ch)
            new_m.append(kids[ok])
            new_p.append(kid_parent[ok])
            new_l.append(kid_letter[ok])
        frontier = np.concatenate(new_m) if new_m else np.empty((0, 2, 2))
        if not len(frontier):
            break
        frontier_idx = np.arange(total, total + len(frontier))
        total += len(frontier)
        mats.append(frontier)
        parents.append(np.concatenate(new_p))
        letters.append(np.concatenate(new_l))
    return Ball(np.concatenate(mats), np.concatenate(parents), np.concatenate(letters))
