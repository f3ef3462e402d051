"""Rotationally symmetric evolving metric measure spaces.

The spatial slice is a warped product ``dr^2 + psi(r,t)^2 g_sphere`` of
dimension ``n``, optionally scaled by a conformal factor ``a(t)^2``, with
weighted measure ``exp(-phi) dv_g``.  Three evolution families are
supported:

* ``static-warp``      -- metric time independent (``a`` constant, ``psi(r)``)
* ``conformal-evolving`` -- ``g(t) = a(t)^2 g_0`` with ``psi`` time independent
* ``evolving-warp``    -- ``psi(r,t)`` evolves, ``a == 1``

For these families every curvature quantity appearing in the estimates has a
closed form in ``psi``, ``a``, ``phi`` and their derivatives, so suprema of
geometric bounds can be extracted at machine precision on sampled cylinders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .symfun import Profile, R, T

FAMILIES = ("static-warp", "conformal-evolving", "evolving-warp")
MODES = ("pole", "annulus")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class WarpedGeometry:
    """A rotationally symmetric smooth metric measure space."""

    n: int
    m: float
    warp: Profile
    conformal: Profile
    potential: Profile
    r_max: float
    family: str
    mode: str = "pole"
    name: str = ""

    def __post_init__(self):
        if self.n < 2 or int(self.n) != self.n:
            raise GeometryError(f"dimension n must be an integer >= 2, got {self.n}")
        if self.m < self.n:
            raise GeometryError(f"synthetic dimension m = {self.m} must be >= n = {self.n}")
        if self.family not in FAMILIES:
            raise GeometryError(f"unknown family {self.family!r}")
        if self.mode not in MODES:
            raise GeometryError(f"unknown mode {self.mode!r}")
        if self.r_max <= 0:
            raise GeometryError("r_max must be positive")
        if self.m == self.n and not self.potential.is_constant():
            raise GeometryError("m == n requires a constant potential")
        if not self.conformal.space_independent:
            raise GeometryError("conformal factor must depend on t only")
        if self.family == "conformal-evolving" and not self.warp.time_independent:
            raise GeometryError("conformal-evolving family requires a static warp")
        if self.family == "evolving-warp":
            if not (self.conformal.is_constant() and abs(float(self.conformal.expr) - 1.0) < 1e-15):
                raise GeometryError("evolving-warp family requires a == 1")
        if self.family == "static-warp":
            if not (self.warp.time_independent and self.conformal.time_independent):
                raise GeometryError("static-warp family requires time-independent metric data")

    # -- basic structure ----------------------------------------------------
    @property
    def metric_static(self) -> bool:
        return self.family == "static-warp"

    @property
    def is_static(self) -> bool:
        return self.metric_static and self.potential.time_independent

    def validate_on(self, t_lo: float, t_hi: float, samples: int = 33):
        """Sampled positivity and regularity checks on [0, r_max] x [t_lo, t_hi]."""
        ts = np.linspace(t_lo, t_hi, samples)
        rs = np.linspace(self.r_max / samples, self.r_max, samples)
        rr, tt = np.meshgrid(rs, ts, indexing="ij")
        psi = self.warp(rr, tt)
        if np.any(psi <= 0):
            raise GeometryError("warp must be positive on (0, r_max]")
        if np.any(self.conformal(0.0, ts) <= 0):
            raise GeometryError("conformal factor must be positive")
        if self.mode == "pole":
            p0 = self.warp(np.zeros_like(ts), ts)
            p1 = self.warp.at(1, 0, np.zeros_like(ts), ts)
            if np.max(np.abs(p0)) > 1e-12 or np.max(np.abs(p1 - 1.0)) > 1e-12:
                raise GeometryError("pole mode requires psi(0,t) = 0 and psi_r(0,t) = 1")
        else:
            floor = self.warp(np.zeros_like(ts), ts)
            if np.any(floor <= 0):
                raise GeometryError("annulus mode requires psi bounded below by a positive constant")

    # -- symbolic building blocks -------------------------------------------
    def drift_expr(self) -> sp.Expr:
        """Coordinate drift D with Delta_phi w = a^-2 (w_rr + D w_r)."""
        psi = self.warp.expr
        return (self.n - 1) * sp.diff(psi, R) / psi - sp.diff(self.potential.expr, R)

    def phi_laplacian_profile(self, w: Profile, name: str = "", tidy: bool = True) -> Profile:
        """Closed-form weighted Laplacian of a radial profile.

        ``tidy`` cancels the drift product, which removes the coordinate
        singularity at the pole for warp-adapted profiles; disable it for
        large expressions that are only evaluated away from the pole.
        """
        wr = sp.diff(w.expr, R)
        drift_term = (self.n - 1) * sp.diff(self.warp.expr, R) * wr / self.warp.expr
        if tidy:
            drift_term = sp.cancel(drift_term)
        expr = (sp.diff(w.expr, R, 2) + drift_term - sp.diff(self.potential.expr, R) * wr) / self.conformal.expr**2
        return Profile(expr, name=name or f"lap_phi({w.name})")

    def volume_density_profile(self) -> Profile:
        """J with d(mu) = J dr dOmega; J = a^n psi^(n-1) exp(-phi)."""
        expr = self.conformal.expr**self.n * self.warp.expr ** (self.n - 1) * sp.exp(-self.potential.expr)
        return Profile(expr, name="volume_density")


# ---------------------------------------------------------------------------
# pointwise geometric quantities (vectorized over r, t arrays)
# ---------------------------------------------------------------------------

def _pole_mask(geom, r):
    r = np.asarray(r, dtype=float)
    if geom.mode != "pole":
        return np.zeros(np.shape(r), dtype=bool)
    return r == 0.0


def _check_domain(geom, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > geom.r_max * (1 + 1e-12)):
        raise GeometryError("radius outside [0, r_max]")
    if geom.mode == "annulus" and np.any(r == 0):
        # annulus still has a coordinate r = 0 shell; all formulas are regular there
        pass
    return r


def angular_drift_product(geom: WarpedGeometry, r, t, f_r, f_rr):
    """(psi_r / psi) f_r for an even radial field f, with pole limit f_rr.

    This is the only coordinate-singular building block of the radial
    operators; for even fields the product extends continuously to the pole
    with value f_rr(0, t).
    """
    r = np.asarray(r, dtype=float)
    pole = _pole_mask(geom, r)
    r_safe = np.where(pole, 0.5 * geom.r_max, r)
    psi = geom.warp(r_safe, t)
    psi_r = geom.warp.at(1, 0, r_safe, t)
    out = psi_r * f_r / psi
    return np.where(pole, f_rr, out)


def potential_radial_slope(geom: WarpedGeometry, r, t, order_t: int = 0):
    """d(phi)/dr (or its time derivative), zero at the pole by evenness."""
    r = np.asarray(r, dtype=float)
    pole = _pole_mask(geom, r)
    r_safe = np.where(pole, 0.5 * geom.r_max, r)
    vals = geom.potential.at(1, order_t, r_safe, t)
    return np.where(pole, 0.0, vals)


def phi_laplacian_eval(geom: WarpedGeometry, w: "Profile", r, t):
    """Weighted Laplacian of an even radial profile, evaluated pointwise.

    Assembles a^-2 (w_rr + (n-1)(psi_r/psi) w_r - phi_r w_r) from the
    profile's derivative table with the pole limits built in; avoids any
    symbolic manipulation of large expressions.
    """
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    w_r = w.at(1, 0, r, t)
    w_rr = w.at(2, 0, r, t)
    ang = angular_drift_product(geom, r, t, w_r, w_rr)
    phi_r = potential_radial_slope(geom, r, t)
    return (w_rr + (geom.n - 1) * ang - phi_r * w_r) / geom.conformal(r, t) ** 2


def curvature_eigs(geom: WarpedGeometry, r, t):
    """Eigenvalues (radial, angular) of Ric relative to g."""
    r = _check_domain(geom, r)
    t = np.asarray(t, dtype=float)
    pole = _pole_mask(geom, r)
    r_safe = np.where(pole, 0.5 * geom.r_max, r)
    psi = geom.warp(r_safe, t)
    if np.any(psi <= 0):
        raise GeometryError("warp non-positive inside domain")
    psi_r = geom.warp.at(1, 0, r_safe, t)
    psi_rr = geom.warp.at(2, 0, r_safe, t)
    a2 = geom.conformal(r, t) ** 2
    rad = -(geom.n - 1) * psi_rr / psi
    ang = -psi_rr / psi + (geom.n - 2) * (1.0 - psi_r**2) / psi**2
    if np.any(pole):
        psi3 = geom.warp.at(3, 0, np.zeros_like(r), t)
        limit = -(geom.n - 1) * psi3
        rad = np.where(pole, limit, rad)
        ang = np.where(pole, limit, ang)
    return rad / a2, ang / a2


def bakry_emery_eigs(geom: WarpedGeometry, r, t):
    """Eigenvalues (radial, angular) of the m-Bakry-Emery Ricci tensor relative to g."""
    rad, ang = curvature_eigs(geom, r, t)
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    pole = _pole_mask(geom, r)
    r_safe = np.where(pole, 0.5 * geom.r_max, r)
    a2 = geom.conformal(r, t) ** 2
    phi_r = geom.potential.at(1, 0, r_safe, t)
    phi_rr = geom.potential.at(2, 0, r, t)
    psi = geom.warp(r_safe, t)
    psi_r = geom.warp.at(1, 0, r_safe, t)
    hess_rad = phi_rr
    hess_ang = psi_r * phi_r / psi
    if np.any(pole):
        hess_ang = np.where(pole, phi_rr, hess_ang)
    sharp = np.zeros_like(hess_rad) if geom.m == geom.n else phi_r**2 / (geom.m - geom.n)
    if np.any(pole):
        sharp = np.where(pole, 0.0, sharp)
    return rad + (hess_rad - sharp) / a2, ang + hess_ang / a2


def drift_coefficient(geom: WarpedGeometry, r, t):
    """D(r,t) with Delta_phi w = a^-2 (w_rr + D w_r) for radial w."""
    r = _check_domain(geom, r)
    if geom.mode == "pole" and np.any(np.asarray(r) == 0.0):
        raise GeometryError("drift coefficient diverges at the pole; the operator itself is regular there")
    t = np.asarray(t, dtype=float)
    psi = geom.warp(r, t)
    if np.any(psi <= 0):
        raise GeometryError("warp non-positive inside domain")
    return (geom.n - 1) * geom.warp.at(1, 0, r, t) / psi - geom.potential.at(1, 0, r, t)


def metric_speed_eigs(geom: WarpedGeometry, r, t):
    """Eigenvalues (radial, angular) of h = (dg/dt)/2 relative to g, plus |grad h|."""
    r = _check_domain(geom, r)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(np.shape(r), np.shape(t))
    zeros = np.zeros(shape)
    if geom.family == "static-warp":
        return zeros, zeros.copy(), zeros.copy()
    if geom.family == "conformal-evolving":
        rate = geom.conformal.at(0, 1, r, t) / geom.conformal(r, t)
        return rate, rate.copy(), zeros
    if geom.mode == "pole" and np.any(np.asarray(r) == 0.0):
        raise GeometryError("evolving-warp metric speed is singular at the pole; use annulus mode")
    psi = geom.warp(r, t)
    psi_r = geom.warp.at(1, 0, r, t)
    psi_t = geom.warp.at(0, 1, r, t)
    psi_rt = geom.warp.at(1, 1, r, t)
    ang = psi_t / psi
    cross = psi_r * psi_t / psi
    grad_h = np.sqrt((geom.n - 1) * ((psi_rt - cross) ** 2 + 2.0 * cross**2)) / psi
    return zeros, ang, grad_h


def geodesic_distance(geom: WarpedGeometry, r1, r2, t):
    """Distance between two points on the same radial ray at time t."""
    return geom.conformal(0.0, t) * np.abs(np.asarray(r1, dtype=float) - np.asarray(r2, dtype=float))


# ---------------------------------------------------------------------------
# cylinders and extracted bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cylinder:
    """Space-time cylinder {a(t) r <= radius} x [t_lo, t_hi] around the axis."""

    radius: float
    t_lo: float
    t_hi: float

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("cylinder radius must be positive")
        if self.t_hi < self.t_lo:
            raise GeometryError("cylinder time window is empty")

    def scaled(self, factor: float) -> "Cylinder":
        return Cylinder(self.radius * factor, self.t_lo, self.t_hi)

    def mask(self, r_nodes, t_nodes, geom: WarpedGeometry):
        """Boolean array over the (r, t) grid of nodes inside the cylinder."""
        r = np.asarray(r_nodes, dtype=float)[:, None]
        t = np.asarray(t_nodes, dtype=float)[None, :]
        a = geom.conformal(np.zeros_like(t), t)
        inside_t = (t >= self.t_lo - 1e-12) & (t <= self.t_hi + 1e-12)
        return (a * r <= self.radius * (1 + 1e-12)) & inside_t

    def coordinate_reach(self, geom: WarpedGeometry, samples: int = 65) -> float:
        """Largest coordinate radius the cylinder touches over its window."""
        ts = np.linspace(self.t_lo, self.t_hi, samples)
        a = geom.conformal(np.zeros_like(ts), ts)
        return float(self.radius / np.min(a))

    def require_inside(self, geom: WarpedGeometry, factor: float = 1.0):
        reach = self.scaled(factor).coordinate_reach(geom)
        if reach > geom.r_max * (1 + 1e-9):
            raise GeometryError(
                f"cylinder of radius {factor * self.radius} reaches coordinate radius "
                f"{reach:.6g} > r_max = {geom.r_max}"
            )

    def sample_nodes(self, geom: WarpedGeometry, n_r: int, n_t: int):
        # fixed domain-wide radial nodes (the cylinder mask selects inside);
        # enlarging a cylinder on the same density then only adds nodes, so
        # extracted suprema are monotone under enlargement
        r_nodes = np.linspace(0.0, geom.r_max, n_r)
        t_nodes = np.linspace(self.t_lo, self.t_hi, n_t)
        return r_nodes, t_nodes


@dataclass(frozen=True)
class GeometryBounds:
    """Sampled suprema of the curvature/evolution bounds over a cylinder.

    ``k`` bounds the Bakry-Emery Ricci tensor from below by -(m-1) k g,
    ``k_lo``/``k_hi`` sandwich the metric speed h, ``k2`` bounds |grad h|,
    ``l1`` bounds |grad phi| and ``l2`` bounds |grad d(phi)/dt|.
    """

    k: float
    k_lo: float
    k_hi: float
    k2: float
    l1: float
    l2: float

    def __post_init__(self):
        for name in ("k", "k_lo", "k_hi", "k2", "l1", "l2"):
            if getattr(self, name) < 0:
                raise GeometryError(f"bound {name} must be non-negative")

    def as_dict(self):
        return {
            "k": self.k, "k_lo": self.k_lo, "k_hi": self.k_hi,
            "k2": self.k2, "l1": self.l1, "l2": self.l2,
        }

    @staticmethod
    def zero() -> "GeometryBounds":
        return GeometryBounds(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def extract_bounds(geom: WarpedGeometry, cyl: Cylinder, grid_density=(129, 65)) -> GeometryBounds:
    """Grid suprema of the six geometric bound constants over a cylinder."""
    n_r, n_t = grid_density if isinstance(grid_density, tuple) else (grid_density, grid_density)
    r_nodes, t_nodes = cyl.sample_nodes(geom, n_r, n_t)
    mask = cyl.mask(r_nodes, t_nodes, geom)
    if not np.any(mask):
        raise GeometryError("cylinder does not intersect the sampling grid")
    rr = np.broadcast_to(r_nodes[:, None], mask.shape)
    tt = np.broadcast_to(t_nodes[None, :], mask.shape)
    r_in, t_in = rr[mask], tt[mask]

    be_rad, be_ang = bakry_emery_eigs(geom, r_in, t_in)
    k = max(0.0, float(np.max(-np.minimum(be_rad, be_ang))) / (geom.m - 1))

    h_rad, h_ang, grad_h = metric_speed_eigs(geom, r_in, t_in)
    h_min = np.minimum(h_rad, h_ang)
    h_max = np.maximum(h_rad, h_ang)
    k_lo = max(0.0, float(np.max(-h_min)))
    k_hi = max(0.0, float(np.max(h_max)))
    k2 = float(np.max(grad_h))

    a = geom.conformal(r_in, t_in)
    pole = _pole_mask(geom, r_in)
    r_safe = np.where(pole, 0.5 * geom.r_max, r_in)
    phi_r = np.where(pole, 0.0, geom.potential.at(1, 0, r_safe, t_in))
    phi_rt = np.where(pole, 0.0, geom.potential.at(1, 1, r_safe, t_in))
    l1 = float(np.max(np.abs(phi_r) / a))
    l2 = float(np.max(np.abs(phi_rt) / a))
    return GeometryBounds(k=k, k_lo=k_lo, k_hi=k_hi, k2=k2, l1=l1, l2=l2)
