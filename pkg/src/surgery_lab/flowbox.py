"""Surgery data in flow-box coordinates (t, s, w) with contact form dt + w ds.

The annulus {t = 0} is cut and reglued by F(s, w) = (s + f(w), w), where f
makes q full turns of the unit s-circle across |w| < eps. A contact
deformation h makes the glued form well defined, which changes the Reeb
field by a time change supported in the box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class ChartError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, with S(x) + S(1-x) = 1."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def smooth_step_prime(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xi = np.where(inside, x, 0.5)
    # S = 1 / (1 + exp(1/x - 1/(1-x))); differentiate the logistic form
    z = 1.0 / xi - 1.0 / (1.0 - xi)
    dz = -1.0 / xi**2 - 1.0 / (1.0 - xi) ** 2
    with np.errstate(over="ignore"):
        e = np.exp(-np.abs(z))
    s = np.where(z > 0, e / (1.0 + e), 1.0 / (1.0 + e))
    return np.where(inside, -s * (1.0 - s) * dz, 0.0)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _step_integral(y):
    """int_0^y S(x) dx for y in [0, 1], by 8-panel Gauss-Legendre."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    panels = 8
    total = np.zeros_like(y)
    for j in range(panels):
        lo, hi = j * y / panels, (j + 1) * y / panels
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        x = mid[..., None] + half[..., None] * _GL_X
        total += half * np.sum(_GL_W * smooth_step(x), axis=-1)
    return total


@dataclass(frozen=True)
class TwistProfile:
    """Lifted shift f(w) = q g(w/eps) / 2pi in turns of the unit s-circle.

    g' = (pi / plateau) times the indicator of [-plateau, plateau] smoothed by a
    bump of radius ``mollifier``; on each flank this equals a smooth step, so
    g rises from 0 at -1 to 2pi at 1 with g' even and g' <= pi/plateau.
    """

    q: int
    epsilon: float
    plateau: float = 0.8
    mollifier: float = 0.2

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ChartError("epsilon must be positive")
        if self.plateau + self.mollifier > 1.0 + 1e-12 or self.mollifier <= 0:
            raise ChartError("profile support must fit in [-1, 1]")
        if np.pi / self.plateau > 4.0:
            raise ChartError("plateau too narrow: g' would exceed 4")

    @property
    def _edge(self):
        return self.plateau + self.mollifier

    def g_prime(self, u):
        u = np.asarray(u, dtype=float)
        width = 2.0 * self.mollifier
        e = self._edge
        return (np.pi / self.plateau) * smooth_step((u + e) / width) * smooth_step((e - u) / width)

    def g(self, u):
        """Integral of g' from -1, in closed form up to the step integral."""
        u = np.asarray(u, dtype=float)
        width = 2.0 * self.mollifier
        e = self._edge
        k = np.pi / self.plateau
        inner = e - width  # end of the rising flank
        a = np.abs(u)
        # int_0^a of the plateau function, for a >= 0
        flank = np.clip(a - inner, 0.0, width)
        integral = np.minimum(a, inner) + flank - width * _step_integral(flank / width)
        integral = np.where(a >= e, self.plateau, integral)
        return np.pi + np.sign(u) * k * integral

    def f(self, w):
        return self.q * self.g(np.asarray(w, dtype=float) / self.epsilon) / TWO_PI

    def f_prime(self, w):
        return self.q * self.g_prime(np.asarray(w, dtype=float) / self.epsilon) / (TWO_PI * self.epsilon)

    def f_prime_bounds(self) -> tuple[float, float]:
        peak = self.q * (np.pi / self.plateau) / (TWO_PI * self.epsilon)
        return (min(0.0, peak), max(0.0, peak))


def glue_map(s, w, twist: TwistProfile):
    """F(s, w) = (s + f(w) mod 1, w) and its differential [[1, f'], [0, 1]]."""
    s = np.asarray(s, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) > twist.epsilon * (1.0 + 1e-12)):
        raise ChartError("w outside the surgery annulus")
    fp = twist.f_prime(w)
    jac = np.zeros(np.shape(w) + (2, 2))
    jac[..., 0, 0] = 1.0
    jac[..., 1, 1] = 1.0
    jac[..., 0, 1] = fp
    return np.mod(s + twist.f(w), 1.0), w, jac


def bump(t, eta: float):
    """lambda(t) = exp(1 - 1/(1 - (t/eta)^2)) on |t| < eta: lambda(0) = 1, lambda'(0) = 0."""
    x = np.asarray(t, dtype=float) / eta
    inside = np.abs(x) < 1.0
    xi = np.where(inside, x, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - xi * xi)), 0.0)


def bump_prime(t, eta: float):
    x = np.asarray(t, dtype=float) / eta
    inside = np.abs(x) < 1.0
    xi = np.where(inside, x, 0.0)
    d = 1.0 - xi * xi
    return np.where(inside, bump(t, eta) * (-2.0 * xi / (d * d)) / eta, 0.0)


def interpolation(t, eta: float):
    """b(t): 1 for t <= 0, 0 for t >= eta, strictly decreasing in between."""
    return smooth_step(1.0 - np.asarray(t, dtype=float) / eta)


@dataclass(frozen=True)
class SurgeryConfig:
    q: int = 1
    epsilon: float = 0.05
    eta: float = 1.0
    strict_half_bound: bool = False
    plateau: float = 0.8
    mollifier: float = 0.2
    box_mass: float = 0.01  # Liouville probability of the flow box
    panels: int = 512
    twist: TwistProfile = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.eta <= 0:
            raise ChartError("eta must be positive")
        if not 0 < self.epsilon < self.eta / TWO_PI:
            raise ChartError(f"need 0 < epsilon < eta/2pi = {self.eta / TWO_PI:.6g}, got {self.epsilon}")
        if not 0 < self.box_mass < 1:
            raise ChartError("box_mass must lie in (0, 1)")
        if self.panels < 512:
            raise ChartError("at least 512 quadrature panels")
        object.__setattr__(self, "twist", TwistProfile(self.q, self.epsilon, self.plateau, self.mollifier))


_GL3_X, _GL3_W = np.polynomial.legendre.leggauss(3)


def moment_integral(w, twist: TwistProfile, panels: int = 512):
    """I(w) = int_{-eps}^{w} x f'(x) dx by fixed-panel composite Gauss-Legendre."""
    w = np.clip(np.asarray(w, dtype=float), -twist.epsilon, twist.epsilon)
    lo = -twist.epsilon
    edges = lo + (w[..., None] - lo) * np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[..., 1:] + edges[..., :-1])
    half = 0.5 * (edges[..., 1:] - edges[..., :-1])
    x = mid[..., None] + half[..., None] * _GL3_X
    return np.sum(half[..., None] * _GL3_W * x * twist.f_prime(x), axis=(-2, -1))


def deformation_h(t, w, config: SurgeryConfig):
    return 0.5 * bump(t, config.eta) * moment_integral(w, config.twist, config.panels)


def dh_along_flow(t, w, config: SurgeryConfig):
    """dh(X_HT) = dh/dt."""
    return 0.5 * bump_prime(t, config.eta) * moment_integral(w, config.twist, config.panels)


def dh_dw(t, w, config: SurgeryConfig):
    """Exact w-derivative: the moment integrand itself."""
    w = np.asarray(w, dtype=float)
    inside = np.abs(w) < config.epsilon
    return np.where(inside, 0.5 * bump(t, config.eta) * w * config.twist.f_prime(w), 0.0)


@dataclass
class ReebReport:
    sup_abs_dh: float
    bound: float
    ok: bool


def reeb_bound_check(config: SurgeryConfig, n: int = 200) -> ReebReport:
    t = np.linspace(-config.eta, config.eta, n)
    w = np.linspace(-config.epsilon, config.epsilon, n)
    I = moment_integral(w, config.twist, config.panels)
    sup = float(np.max(np.abs(0.5 * bump_prime(t, config.eta)[:, None] * I[None, :])))
    bound = 0.5 if config.strict_half_bound else 1.0
    return ReebReport(sup, bound, sup < bound)


def reeb_factor(t, w, config: SurgeryConfig):
    """Time-change factor of the deformed Reeb field: 1/(1 - dh/dt) for t >= 0, 1/(1 + dh/dt) for t < 0.

    The t >= 0 side carries alpha - dh and the t < 0 side alpha + dh.
    """
    t = np.asarray(t, dtype=float)
    d = dh_along_flow(t, w, config)
    bound = 0.5 if config.strict_half_bound else 1.0
    if np.any(np.abs(d) >= bound):
        raise ChartError(f"|dh(X)| reaches {np.max(np.abs(d)):.4g} >= {bound}")
    return np.where(t >= 0, 1.0 / (1.0 - d), 1.0 / (1.0 + d))


def _box_mean(config: SurgeryConfig, n: int) -> float:
    x, wts = np.polynomial.legendre.leggauss(8)
    def nodes(lo, hi):
        edges = np.linspace(lo, hi, n + 1)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * wts).ravel()

    # split at t = 0 where the factor switches branch
    tn, tw = zip(nodes(-config.eta, 0.0), nodes(0.0, config.eta))
    tn, tw = np.concatenate(tn), np.concatenate(tw)
    wn, ww = nodes(-config.epsilon, config.epsilon)
    vals = reeb_factor(tn[:, None], wn[None, :], config)
    return float(tw @ vals @ ww / (4.0 * config.eta * config.epsilon))


def normalization_constant(config: SurgeryConfig, tol: float = 1e-8, max_panels: int = 256) -> float:
    """c with integral of c * factor = 1 against the normalized Liouville measure."""
    if config.q == 0:
        return 1.0
    n = 4
    prev = _box_mean(config, n)
    while n < max_panels:
        n *= 2
        cur = _box_mean(config, n)
        if abs(cur - prev) <= tol:
            m = config.box_mass
            return 1.0 / ((1.0 - m) + m * cur)
        prev = cur
    raise QuadratureError("box mean did not converge under panel doubling")


def weighted_mean(config: SurgeryConfig, c: float, n: int = 64) -> float:
    m = config.box_mass
    return c * ((1.0 - m) + m * _box_mean(config, n))


@dataclass
class IdentityReport:
    residuals: dict
    tol: float

    @property
    def ok(self) -> bool:
        return all(r <= self.tol for r in self.residuals.values())


def gluing_identity_check(config: SurgeryConfig, n_samples: int = 1000, seed: int = 0, tol: float = 1e-9):
    """Pullback identities of the gluing map at random annulus points, from exact differentials.

    Coordinates are (t, s, w); alpha = (1, w, 0), d alpha(u, v) = u_w v_s - u_s v_w.
    (iv) checks that F pulls the t >= 0 form alpha - dh back to the t < 0 form alpha + dh.
    """
    rng = np.random.default_rng(seed)
    tw = config.twist
    s = rng.uniform(0.0, 1.0, n_samples)
    w = rng.uniform(-config.epsilon, config.epsilon, n_samples)
    _, _, jac = glue_map(s, w, tw)
    res = {k: 0.0 for k in ("pullback_alpha", "pullback_dalpha", "pullback_volume", "deformed_forms")}
    omega = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    for wi, J in zip(w, jac):
        fi = J[0, 1]
        D = np.eye(3)
        D[1:, 1:] = J
        alpha = np.array([1.0, wi, 0.0])  # at F(p), which has the same w
        pulled = alpha @ D
        res["pullback_alpha"] = max(res["pullback_alpha"], float(np.abs(pulled - alpha - [0.0, 0.0, wi * fi]).max()))
        res["pullback_dalpha"] = max(res["pullback_dalpha"], float(np.abs(D.T @ omega @ D - omega).max()))
        vol = _volume(alpha @ D, D.T @ omega @ D)
        res["pullback_volume"] = max(res["pullback_volume"], abs(vol - _volume(alpha, omega)))
        dh = np.array([float(dh_along_flow(0.0, wi, config)), 0.0, float(dh_dw(0.0, wi, config))])
        lhs = (alpha - dh) @ D
        res["deformed_forms"] = max(res["deformed_forms"], float(np.abs(lhs - (alpha + dh)).max()))
    return IdentityReport(res, tol)


def _volume(a, om) -> float:
    """(a ^ om)(e_t, e_s, e_w)."""
    return float(a[0] * om[1, 2] - a[1] * om[0, 2] + a[2] * om[0, 1])


# --- fiber-flow surgery --------------------------------------------------------


@dataclass
class Beta0:
    twist: TwistProfile
    contact_margin: float
    margin_sup: float

    def k0(self, w):
        return np.asarray(w, dtype=float)

    def h0(self, w):
        """1 + (1/2pi) int_{-2eps}^{w} f, integrated by parts as (w f(w) - M(w)) / 2pi."""
        w = np.asarray(w, dtype=float)
        return 1.0 + (w * self.twist.f(w) - _f_moment(w, self.twist)) / TWO_PI

    def D(self, w):
        w = np.asarray(w, dtype=float)
        return 1.0 - _f_moment(w, self.twist) / TWO_PI

    def reeb_direction(self, w):
        """(tau, sigma) components of the Reeb field, positively proportional to (1, -f/2pi)."""
        w = np.asarray(w, dtype=float)
        d = self.D(w)
        return np.stack([1.0 / d, -self.twist.f(w) / (TWO_PI * d)], axis=-1)

    def period(self, w, qw: int) -> float:
        return float(TWO_PI * qw * self.D(w))


def _f_moment(w, twist: TwistProfile, grid: int = 1024):
    """M(w) = int_{-eps}^{w} x f'(x) dx, cumulatively over the sorted points merged with a fixed grid."""
    eps = twist.epsilon
    w = np.asarray(w, dtype=float)
    inside = np.clip(w, -eps, eps).ravel()
    nodes, inv = np.unique(np.concatenate([np.linspace(-eps, eps, grid + 1), inside]), return_inverse=True)
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    half = 0.5 * (nodes[1:] - nodes[:-1])
    x = mid[:, None] + half[:, None] * _GL_X
    pieces = half * np.sum(_GL_W * x * twist.f_prime(x), axis=-1)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    return cum[inv[grid + 1 :]].reshape(w.shape)


def beta0_build(twist: TwistProfile, n_grid: int = 4001) -> Beta0:
    w = np.linspace(-2.0 * twist.epsilon, 2.0 * twist.epsilon, n_grid)
    b = Beta0(twist, 0.0, 0.0)
    d = b.D(w)
    b.contact_margin = float(d.min())
    b.margin_sup = float(d.max())
    if b.contact_margin <= 0:
        raise ChartError("beta0 is not contact: epsilon too large")
    return b
