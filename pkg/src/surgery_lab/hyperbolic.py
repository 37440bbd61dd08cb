"""PSL(2,R) model of the unit tangent bundle of the regular-octagon genus-2 surface.

Matrices act on the upper half plane by Moebius transformations; the base point
is ``i`` and the unit tangent bundle of the universal cover is PSL(2,R) itself.
The same group is also handled in the Poincare and Klein disc models, where the
fundamental octagon is centred at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

SQRT2 = np.sqrt(2.0)

X = np.array([[0.5, 0.0], [0.0, -0.5]])
H = np.array([[0.0, 0.5], [0.5, 0.0]])
V = np.array([[0.0, -0.5], [0.5, 0.0]])
FRAME_GENERATORS = {"X": X, "H": H, "V": V}

# Cayley transform z -> (z - i)/(z + i) and its inverse, as matrices.
CAYLEY = np.array([[1.0, -1.0j], [1.0, 1.0j]])
CAYLEY_INV = np.linalg.inv(CAYLEY)


class ConstructionError(RuntimeError):
    pass


def normalize(m, tol: float = 1e-12) -> np.ndarray:
    """Canonical representative of ``m`` in PSL(2,R).

    Rescales to determinant one and flips the sign so that the first entry
    (row-major) with modulus above ``tol`` is positive.
    """
    m = np.asarray(m, dtype=float)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if det <= 0:
        raise ValueError(f"matrix has non-positive determinant {det}")
    m = m / np.sqrt(det)
    for x in m.ravel():
        if abs(x) > tol:
            return m if x > 0 else -m
    raise ValueError("zero matrix")


def frame_flow(gen: str, t: float) -> np.ndarray:
    """exp(t * gen) for gen in {X, H, V}, in closed form."""
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    c = t / 2.0
    if gen == "X":
        return np.array([[np.exp(c), 0.0], [0.0, np.exp(-c)]])
    if gen == "H":
        return np.array([[np.cosh(c), np.sinh(c)], [np.sinh(c), np.cosh(c)]])
    if gen == "V":
        return np.array([[np.cos(c), -np.sin(c)], [np.sin(c), np.cos(c)]])
    raise KeyError(gen)


def bracket(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    return a @ b - b @ a


def structure_residual() -> float:
    """Max deviation from [V,X]=H, [H,X]=V, [H,V]=X."""
    res = [
        bracket(V, X) - H,
        bracket(H, X) - V,
        bracket(H, V) - X,
    ]
    return float(max(np.abs(r).max() for r in res))


class Classification(NamedTuple):
    kind: Literal["hyperbolic", "parabolic", "elliptic"]
    length: float | None


def classify_and_length(g, tol: float = 1e-12) -> Classification:
    tr = abs(float(g[0][0] + g[1][1]))
    if tr > 2.0 + tol:
        return Classification("hyperbolic", 2.0 * float(np.arccosh(tr / 2.0)))
    if tr >= 2.0 - tol:
        return Classification("parabolic", None)
    return Classification("elliptic", None)


def translation_length(traces) -> np.ndarray:
    """Vectorised 2*arccosh(|tr|/2); NaN for non-hyperbolic traces."""
    t = np.abs(np.asarray(traces, dtype=float)) / 2.0
    out = np.full(t.shape, np.nan)
    hyp = t > 1.0
    out[hyp] = 2.0 * np.arccosh(t[hyp])
    return out


def disc_to_real(m) -> np.ndarray:
    """SU(1,1) matrix -> SL(2,R) matrix (conjugation by the Cayley transform)."""
    r = CAYLEY_INV @ np.asarray(m, dtype=complex) @ CAYLEY
    if np.abs(r.imag).max() > 1e-9 * max(1.0, np.abs(r).max()):
        raise ValueError("matrix is not in SU(1,1)")
    return r.real


def real_to_disc_points(x):
    """Map points of the closed upper half plane (complex or real) into the disc."""
    x = np.asarray(x, dtype=complex)
    return (x - 1j) / (x + 1j)


def poincare_to_klein(z):
    z = np.asarray(z, dtype=complex)
    return 2.0 * z / (1.0 + np.abs(z) ** 2)


def klein_distance(p, q):
    """Hyperbolic distance between Klein-model points given as (..., 2) arrays."""
    from .geometry import klein_length

    return klein_length(p, q)


def cosh_displacement(mats):
    """cosh d(i, g i) = (a^2+b^2+c^2+d^2)/2 for an array of (..., 2, 2) matrices."""
    mats = np.asarray(mats)
    return 0.5 * np.sum(mats * mats, axis=(-2, -1))


def to_disc(mats):
    """SL(2,R) matrices -> SU(1,1) matrices acting on the Poincare disc."""
    return CAYLEY @ np.asarray(mats, dtype=complex) @ CAYLEY_INV


def fixed_points(mats):
    """Repelling and attracting fixed points of hyperbolic elements on the unit circle."""
    m = to_disc(np.asarray(mats, dtype=float).reshape(-1, 2, 2))
    alpha, beta = m[:, 0, 0], m[:, 0, 1]
    # conj(beta) z^2 + (conj(alpha) - alpha) z - beta = 0
    qa = np.conj(beta)
    qb = np.conj(alpha) - alpha
    root = np.sqrt(qb * qb + 4.0 * qa * beta)
    z1 = (-qb + root) / (2.0 * qa)
    z2 = (-qb - root) / (2.0 * qa)
    z1 /= np.abs(z1)
    z2 /= np.abs(z2)
    # derivative of the Moebius map at z is 1/(conj(beta) z + conj(alpha))^2
    att1 = np.abs(qa * z1 + np.conj(alpha)) > 1.0
    attract = np.where(att1, z1, z2)
    repel = np.where(att1, z2, z1)
    return repel, attract


@dataclass(frozen=True)
class FuchsianSurface:
    generators: np.ndarray  # (8, 2, 2), generator k pairs side k+4 to side k
    relation: tuple[int, ...]
    genus: int
    systole: float
    inradius: float
    circumradius: float
    klein_vertices: np.ndarray = field(repr=False)  # (8, 2)

    def inverse_index(self, k: int) -> int:
        return (k + 4) % 8

    def word_matrix(self, word) -> np.ndarray:
        m = np.eye(2)
        for k in word:
            m = m @ self.generators[k]
        return m


def build_genus2_surface() -> FuchsianSurface:
    """Side pairings of the regular hyperbolic octagon with vertex angle pi/4.

    g_k = rho^k T rho^-k with rho the rotation by pi/4 about the disc centre and
    T the translation along the real diameter by twice the inradius. Side k has
    its midpoint at angle k*pi/4, and g_k maps the opposite side onto it.
    """
    cot = 1.0 + SQRT2  # cot(pi/8)
    inradius = float(np.arccosh(cot))
    circumradius = float(np.arccosh(cot * cot))
    half = inradius  # T translates by 2 * inradius
    t_disc = np.array([[np.cosh(half), np.sinh(half)], [np.sinh(half), np.cosh(half)]], dtype=complex)
    gens = []
    for k in range(8):
        rot = np.diag([np.exp(1j * k * np.pi / 8), np.exp(-1j * k * np.pi / 8)])
        gens.append(disc_to_real(rot @ t_disc @ np.linalg.inv(rot)))
    gens = np.array(gens)

    relation = (0, 3, 6, 1, 4, 7, 2, 5)
    prod = np.eye(2)
    for k in relation:
        prod = prod @ gens[k]
    if min(np.abs(prod - np.eye(2)).max(), np.abs(prod + np.eye(2)).max()) > 1e-9:
        raise ConstructionError("octagon relation does not close")
    traces = np.abs(gens[:, 0, 0] + gens[:, 1, 1])
    if np.any(traces <= 2.0):
        raise ConstructionError("non-hyperbolic side pairing")

    angles = (2 * np.arange(8) + 1) * np.pi / 8
    rk = np.tanh(circumradius)
    verts = np.stack([rk * np.cos(angles), rk * np.sin(angles)], axis=1)
    systole = float(translation_length(traces).min())
    return FuchsianSurface(
        generators=gens,
        relation=relation,
        genus=2,
        systole=systole,
        inradius=inradius,
        circumradius=circumradius,
        klein_vertices=verts,
    )


def relation_residual(surface: FuchsianSurface) -> float:
    prod = surface.word_matrix(surface.relation)
    return float(min(np.abs(prod - np.eye(2)).max(), np.abs(prod + np.eye(2)).max()))
