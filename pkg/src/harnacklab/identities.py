"""Residual checks for the evolution identities and pointwise inequalities.

The central object is the Harnack quantity

    F = |grad v|^2 / v - alpha(t) (dv/dt) / v + alpha(t) G / v - beta(t)

built from a positive pressure field v, and the degenerate parabolic operator

    L[w] = dw/dt - (p-1) v Delta_phi w.

Every identity is evaluated in two modes sharing a single transcription of
the formulas: analytic mode takes all derivatives from symbolic tables
(residuals at roundoff level), grid mode takes them from second-order
stencils (residuals shrink at the discretization order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .fields import ScalarField, diff
from .geometry import (WarpedGeometry, angular_drift_product, bakry_emery_eigs,
                       curvature_eigs, phi_laplacian_eval, potential_radial_slope)
from .params import HarnackParams
from .solver import Nonlinearity
from .symfun import Profile, R, T

_angular_product = angular_drift_product


class IdentityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# solution handles
# ---------------------------------------------------------------------------

class AnalyticSolution:
    """Pressure field given in closed form."""

    grid_mode = False

    def __init__(self, profile: Profile):
        self.profile = profile

    def part(self, nr, nt, r, t):
        return self.profile.at(nr, nt, r, t)


class GridSolution:
    """Pressure field known only on a grid; derivatives from stencils."""

    grid_mode = True

    def __init__(self, field: ScalarField):
        self.field = field
        self._cache = {(0, 0): field}

    def _field(self, nr, nt) -> ScalarField:
        key = (nr, nt)
        if key not in self._cache:
            if nt > 0:
                base = self._field(nr, nt - 1)
                self._cache[key] = diff(base, "d_t")
            else:
                base = self._field(nr - 1, 0)
                self._cache[key] = diff(base, "d_r")
        return self._cache[key]

    def part(self, nr, nt, r=None, t=None):
        return self._field(nr, nt).values

    def interp(self, r, t):
        """Bilinear interpolation of the field at off-node points."""
        g = self.field.grid
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        fi = np.clip((r - 0.0) / g.dr, 0, g.n_r - 1 - 1e-12)
        fj = np.clip((t - g.t0) / g.dt, 0, g.n_t - 1 - 1e-12)
        i0 = np.floor(fi).astype(int)
        j0 = np.floor(fj).astype(int)
        wr = fi - i0
        wt = fj - j0
        vals = self.field.values
        return ((1 - wr) * (1 - wt) * vals[i0, j0]
                + wr * (1 - wt) * vals[i0 + 1, j0]
                + (1 - wr) * wt * vals[i0, j0 + 1]
                + wr * wt * vals[i0 + 1, j0 + 1])


def eval_point(solution, r, t):
    """Pointwise value of the pressure field for either solution handle."""
    if solution.grid_mode:
        return solution.interp(r, t)
    return solution.part(0, 0, np.asarray(r, dtype=float), np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# pointwise term table
# ---------------------------------------------------------------------------

class TermTable:
    """All pointwise quantities entering the identities, on one point set.

    ``f_route`` selects how the derivatives of the Harnack quantity F are
    produced in analytic mode: ``"chain"`` composes them from the solution's
    partial table with explicit product/quotient rules (fast), ``"symbolic"``
    differentiates a fully symbolic F (slow; kept as an independent check of
    the chain-rule transcription).
    """

    def __init__(self, solution, geom: WarpedGeometry, params: HarnackParams,
                 nonlinearity: Nonlinearity, r=None, t=None, floor: float = 0.0,
                 f_route: str = "chain"):
        self.geom = geom
        self.params = params
        self.nl = nonlinearity
        self.solution = solution
        self.f_route = f_route
        if solution.grid_mode:
            grid = solution.field.grid
            rr, tt = grid.mesh()
        else:
            if r is None or t is None:
                raise IdentityError("analytic mode needs explicit sample points")
            rr, tt = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
        self.r, self.t = rr, tt
        n, m, p = geom.n, params.m, params.p
        if m != geom.m:
            raise IdentityError(
                f"params.m = {m} disagrees with the geometry's m = {geom.m}")

        part = solution.part
        self.v = part(0, 0, rr, tt)
        if np.any(self.v <= floor):
            raise IdentityError("pressure field not positive on the requested points")
        self.v_r = part(1, 0, rr, tt)
        self.v_rr = part(2, 0, rr, tt)
        self.v_t = part(0, 1, rr, tt)

        self.a = geom.conformal(rr, tt)
        self.a2 = self.a**2
        self.grad2 = self.v_r**2 / self.a2
        self.grad_norm = np.abs(self.v_r) / self.a

        ang_v = _angular_product(geom, rr, tt, self.v_r, self.v_rr)
        self.lap_plain = (self.v_rr + (n - 1) * ang_v) / self.a2

        phi_r = potential_radial_slope(geom, rr, tt)
        phi_rt = potential_radial_slope(geom, rr, tt, order_t=1)
        self.phi_pair = phi_r * self.v_r / self.a2            # <grad phi, grad v>
        self.phit_pair = phi_rt * self.v_r / self.a2          # <grad d(phi)/dt, grad v>
        self.lap_v = self.lap_plain - self.phi_pair

        self.hess2 = (self.v_rr**2 + (n - 1) * ang_v**2) / self.a2**2
        be_rad, _ = bakry_emery_eigs(geom, rr, tt)
        self.ric_m_vv = be_rad * self.grad2
        self.sharp_pair = (self.phi_pair**2 / (m - n)) if m > n else np.zeros_like(self.v)

        if geom.family == "conformal-evolving":
            rate = geom.conformal.at(0, 1, rr, tt) / self.a
            self.h_vv = rate * self.grad2
            self.h_hess = rate * self.lap_plain
            self.h_phi_pair = rate * self.phi_pair
            self.divh_pair = np.zeros_like(self.v)
            self.h_norm2 = n * rate**2
        elif geom.family == "evolving-warp":
            psi = geom.warp(rr, tt)
            psi_r = geom.warp.at(1, 0, rr, tt)
            psi_t = geom.warp.at(0, 1, rr, tt)
            psi_rt = geom.warp.at(1, 1, rr, tt)
            self.h_vv = np.zeros_like(self.v)
            self.h_hess = (psi_t / psi) * (n - 1) * (psi_r / psi) * self.v_r
            self.h_phi_pair = np.zeros_like(self.v)
            self.divh_pair = -(n - 1) * (psi_r * psi_t / psi**2 + psi_rt / psi) * self.v_r
            self.h_norm2 = (n - 1) * (psi_t / psi) ** 2
        else:
            zero = np.zeros_like(self.v)
            self.h_vv, self.h_hess, self.h_phi_pair = zero, zero.copy(), zero.copy()
            self.divh_pair, self.h_norm2 = zero.copy(), zero.copy()

        # nonlinearity values and partials; coordinate x-partials are converted
        # to metric pairings here
        self.G = nonlinearity.G(tt, rr, self.v)
        self.G_v = nonlinearity.G_v(tt, rr, self.v)
        self.G_vv = nonlinearity.G_vv(tt, rr, self.v)
        self.G_x = nonlinearity.G_x(tt, rr, self.v)
        self.G_xv = nonlinearity.G_xv(tt, rr, self.v)
        self.lap_Gx = nonlinearity.lap_phi_Gx(tt, rr, self.v)
        self.G_x_norm = np.abs(self.G_x) / self.a
        self.G_xv_norm = np.abs(self.G_xv) / self.a
        self.gradG_pair = (self.G_x + self.G_v * self.v_r) * self.v_r / self.a2
        self.lap_G_full = (self.lap_Gx + 2 * self.G_xv * self.v_r / self.a2
                           + self.G_vv * self.grad2 + self.G_v * self.lap_v)

        coeffs = params.coeffs
        self.alpha = coeffs.alpha_at(tt)
        self.alpha_p = coeffs.alpha_prime_at(tt)
        self.beta = coeffs.beta_at(tt)
        self.beta_p = coeffs.beta_prime_at(tt)
        self.b = params.b

        self.F = (self.grad2 / self.v - self.alpha * self.v_t / self.v
                  + self.alpha * self.G / self.v - self.beta)
        self._assemble_F_derivatives()

    # -- F derivatives -------------------------------------------------------
    def _assemble_F_derivatives(self):
        geom, params = self.geom, self.params
        if self.solution.grid_mode:
            grid = self.solution.field.grid
            F_field = ScalarField(self.F, grid, parity="even")
            F_r = diff(F_field, "d_r")
            F_rr = diff(F_r, "d_r")
            F_t = diff(F_field, "d_t")
            self.F_r = F_r.values
            self.F_t = F_t.values
            self._finish_lap_F(F_rr.values)
        elif self.f_route == "symbolic":
            v_expr = self.solution.profile.expr
            a_expr = geom.conformal.expr
            al = params.coeffs.alpha.expr
            be = params.coeffs.beta.expr
            G_expr = self.nl.composed_expr(v_expr)
            F_expr = (sp.diff(v_expr, R) ** 2 / (a_expr**2 * v_expr)
                      - al * sp.diff(v_expr, T) / v_expr + al * G_expr / v_expr - be)
            F_prof = Profile(F_expr, name="harnack_quantity")
            self.F_r = F_prof.at(1, 0, self.r, self.t)
            self.F_t = F_prof.at(0, 1, self.r, self.t)
            lap_F_prof = geom.phi_laplacian_profile(F_prof, name="lap_phi_F", tidy=False)
            self.lap_F = lap_F_prof(self.r, self.t)
        else:
            self._chain_rule_F()
        self.LpvF = self.F_t - (params.p - 1) * self.v * self.lap_F
        self.gradF_pair = self.F_r * self.v_r / self.a2

    def _finish_lap_F(self, F_rr):
        geom = self.geom
        rr, tt = self.r, self.t
        ang_F = _angular_product(geom, rr, tt, self.F_r, F_rr)
        phi_r = potential_radial_slope(geom, rr, tt)
        self.lap_F = (F_rr + (geom.n - 1) * ang_F - phi_r * self.F_r) / self.a2

    def _chain_rule_F(self):
        """F_r, F_t, F_rr from the solution's partial table.

        With W = |grad v|^2 and the composed forcing value G(t, x, v(x,t)),
        F = W/v - alpha v_t/v + alpha G/v - beta; all derivatives below are
        total derivatives of that composition.
        """
        rr, tt = self.r, self.t
        part = self.solution.part
        v, v_r, v_rr, v_t = self.v, self.v_r, self.v_rr, self.v_t
        v_rt = part(1, 1, rr, tt)
        v_tt = part(0, 2, rr, tt)
        v_rrr = part(3, 0, rr, tt)
        v_rrt = part(2, 1, rr, tt)
        a, a2 = self.a, self.a2
        a_rate = self.geom.conformal.at(0, 1, rr, tt) / a
        nl = self.nl
        G, G_v = self.G, self.G_v
        C_r = self.G_x + G_v * v_r
        C_t = nl.G_t(tt, rr, v) + G_v * v_t
        C_rr = (nl.G_xx(tt, rr, v) + 2 * self.G_xv * v_r
                + self.G_vv * v_r**2 + G_v * v_rr)
        W = self.grad2
        W_r = 2 * v_r * v_rr / a2
        W_rr = 2 * (v_rr**2 + v_r * v_rrr) / a2
        W_t = 2 * v_r * v_rt / a2 - 2 * a_rate * W
        al, alp = self.alpha, self.alpha_p
        self.F_t = (W_t / v - W * v_t / v**2
                    - alp * v_t / v - al * v_tt / v + al * v_t**2 / v**2
                    + alp * G / v + al * C_t / v - al * G * v_t / v**2
                    - self.beta_p)
        self.F_r = (W_r / v - W * v_r / v**2
                    - al * v_rt / v + al * v_t * v_r / v**2
                    + al * C_r / v - al * G * v_r / v**2)
        F_rr = (W_rr / v - 2 * W_r * v_r / v**2 - W * v_rr / v**2 + 2 * W * v_r**2 / v**3
                - al * v_rrt / v + 2 * al * v_rt * v_r / v**2
                + al * v_t * v_rr / v**2 - 2 * al * v_t * v_r**2 / v**3
                + al * C_rr / v - 2 * al * C_r * v_r / v**2
                - al * G * v_rr / v**2 + 2 * al * G * v_r**2 / v**3)
        self._finish_lap_F(F_rr)


# ---------------------------------------------------------------------------
# operator and Harnack quantity on grids
# ---------------------------------------------------------------------------

def op_lpv(w: ScalarField, v: ScalarField, geom: WarpedGeometry, p: float) -> ScalarField:
    """L[w] = dw/dt - (p-1) v Delta_phi w on aligned grids."""
    if w.grid != v.grid:
        raise IdentityError("operator requires aligned grids")
    from .fields import weighted_laplacian

    w_t = diff(w, "d_t").values
    lap_w = weighted_laplacian(w, geom).values
    return ScalarField(w_t - (p - 1) * v.values * lap_w, w.grid, parity=w.parity)


@dataclass
class HarnackField:
    """F on a grid plus its cached constituents."""

    F: ScalarField
    grad_ratio: np.ndarray   # |grad v|^2 / v
    time_ratio: np.ndarray   # (dv/dt) / v
    forcing_ratio: np.ndarray  # G / v


def harnack_quantity(v: ScalarField, geom: WarpedGeometry, params: HarnackParams,
                     nonlinearity: Nonlinearity, floor: float = 0.0) -> HarnackField:
    if np.any(v.values <= floor):
        raise IdentityError("pressure field below the positivity floor")
    grid = v.grid
    rr, tt = grid.mesh()
    a2 = geom.conformal(rr, tt) ** 2
    v_r = diff(v, "d_r").values
    v_t = diff(v, "d_t").values
    grad_ratio = v_r**2 / (a2 * v.values)
    time_ratio = v_t / v.values
    forcing_ratio = nonlinearity.G(tt, rr, v.values) / v.values
    alpha = params.coeffs.alpha_at(tt)
    beta = params.coeffs.beta_at(tt)
    F = grad_ratio - alpha * time_ratio + alpha * forcing_ratio - beta
    return HarnackField(ScalarField(F, grid, parity="even"), grad_ratio, time_ratio, forcing_ratio)


# ---------------------------------------------------------------------------
# identity residuals (analytic derivative tables)
# ---------------------------------------------------------------------------

def pressure_equation_residual(v: Profile, geom: WarpedGeometry, p: float,
                               nonlinearity: Nonlinearity, r, t):
    """L[v] - |grad v|^2 - G, which vanishes on exact pressure solutions."""
    rr, tt = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    vv = v(rr, tt)
    a2 = geom.conformal(rr, tt) ** 2
    grad2 = v.at(1, 0, rr, tt) ** 2 / a2
    lhs = v.at(0, 1, rr, tt) - (p - 1) * vv * phi_laplacian_eval(geom, v, rr, tt)
    return lhs - grad2 - nonlinearity.G(tt, rr, vv)


def quotient_rule_residual(f: Profile, g: Profile, v: Profile,
                           geom: WarpedGeometry, p: float, r, t):
    """Residual of the operator quotient rule for L applied to f/g."""
    rr, tt = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    g_vals = g(rr, tt)
    if np.any(np.abs(g_vals) < 1e-10):
        raise IdentityError("quotient rule requires g bounded away from zero")
    quot = Profile(sp.cancel(f.expr / g.expr), name="f_over_g")
    a2 = geom.conformal(rr, tt) ** 2
    v_vals = v(rr, tt)

    def apply_L(w: Profile):
        lap = geom.phi_laplacian_profile(w)
        return w.at(0, 1, rr, tt) - (p - 1) * v_vals * lap(rr, tt)

    lhs = apply_L(quot)
    pair = quot.at(1, 0, rr, tt) * g.at(1, 0, rr, tt) / (a2 * g_vals)
    rhs = (apply_L(f) / g_vals + 2 * (p - 1) * v_vals * pair
           - (f(rr, tt) / g_vals**2) * apply_L(g))
    return lhs - rhs


_COMMUTATOR_TERMS = ("hessian_trace", "divergence", "potential_speed", "potential_mixed")


def commutator_variants():
    """All sign conventions for the four evolving-metric commutator terms."""
    out = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            for s3 in (1, -1):
                for s4 in (1, -1):
                    out.append((s1, s2, s3, s4))
    return out


def variant_label(signs) -> str:
    return ",".join(f"{name}:{'+' if s > 0 else '-'}"
                    for name, s in zip(_COMMUTATOR_TERMS, signs))


def commutator_residual(v: Profile, geom: WarpedGeometry, r, t, variants=None):
    """Residuals of d/dt(Delta_phi v) - Delta_phi(dv/dt) against sign variants.

    The reference orientation (+,+,+,+) is
        2<h, Hess v> - <2 div h - grad Tr h, grad v>
        + 2 h(grad phi, grad v) - <grad d(phi)/dt, grad v>,
    and each variant flips the sign of one or more of the four terms.  The
    checker reports every variant's residual rather than assuming one.
    """
    rr, tt = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    lap_prof = geom.phi_laplacian_profile(v)
    lap_t = lap_prof.at(0, 1, rr, tt)
    lap_of_vt = geom.phi_laplacian_profile(Profile(sp.diff(v.expr, T), name="v_t"))(rr, tt)
    lhs = lap_t - lap_of_vt

    n = geom.n
    a = geom.conformal(rr, tt)
    a2 = a**2
    v_r = v.at(1, 0, rr, tt)
    v_rr = v.at(2, 0, rr, tt)
    ang_v = _angular_product(geom, rr, tt, v_r, v_rr)
    lap_plain = (v_rr + (n - 1) * ang_v) / a2
    phi_r = potential_radial_slope(geom, rr, tt)
    phi_rt = potential_radial_slope(geom, rr, tt, order_t=1)
    if geom.family == "conformal-evolving":
        rate = geom.conformal.at(0, 1, rr, tt) / a
        t_hess = rate * lap_plain
        t_div = np.zeros_like(lhs)
        t_hphi = rate * phi_r * v_r / a2
    elif geom.family == "evolving-warp":
        psi = geom.warp(rr, tt)
        psi_r = geom.warp.at(1, 0, rr, tt)
        psi_t = geom.warp.at(0, 1, rr, tt)
        psi_rt = geom.warp.at(1, 1, rr, tt)
        t_hess = (psi_t / psi) * (n - 1) * (psi_r / psi) * v_r
        t_div = -(n - 1) * (psi_r * psi_t / psi**2 + psi_rt / psi) * v_r
        t_hphi = np.zeros_like(lhs)
    else:
        t_hess = np.zeros_like(lhs)
        t_div = np.zeros_like(lhs)
        t_hphi = np.zeros_like(lhs)
    t_mixed = phi_rt * v_r / a2

    results = {}
    for signs in (variants or commutator_variants()):
        s1, s2, s3, s4 = signs
        rhs = s1 * 2 * t_hess - s2 * t_div + s3 * 2 * t_hphi - s4 * t_mixed
        res = lhs - rhs
        results[signs] = (float(np.max(np.abs(res))), res)
    return results


def adjudicate_commutator(v: Profile, geoms, r, t, tol: float = 1e-9):
    """Find the sign variants consistent across a battery of geometries."""
    worst = {}
    for geom in geoms:
        res = commutator_residual(v, geom, r, t)
        for signs, (mx, _) in res.items():
            worst[signs] = max(worst.get(signs, 0.0), mx)
    passing = sorted(signs for signs, mx in worst.items() if mx <= tol)
    return passing, worst


def bochner_residual(w: Profile, geom: WarpedGeometry, r, t):
    """Residual of the weighted Bochner formula for a radial field.

    Uses the infinite-dimensional weighted Ricci tensor Ric + Hess(phi).
    The formula is a fixed-time identity, so evolving families are checked
    slice by slice.
    """
    rr, tt = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    n = geom.n
    a_expr = geom.conformal.expr
    grad2_prof = Profile(sp.cancel(sp.diff(w.expr, R) ** 2 / a_expr**2), name="grad_w_sq")
    lap_w_prof = geom.phi_laplacian_profile(w)

    half_lap_grad2 = 0.5 * geom.phi_laplacian_profile(grad2_prof)(rr, tt)
    a2 = geom.conformal(rr, tt) ** 2
    w_r = w.at(1, 0, rr, tt)
    w_rr = w.at(2, 0, rr, tt)
    pair = w_r * lap_w_prof.at(1, 0, rr, tt) / a2
    ang_w = _angular_product(geom, rr, tt, w_r, w_rr)
    hess2 = (w_rr**2 + (n - 1) * ang_w**2) / a2**2

    ric_rad, _ = curvature_eigs(geom, rr, tt)
    phi_rr = geom.potential.at(2, 0, rr, tt)
    ric_phi_rad = ric_rad + phi_rr / a2
    ric_pair = ric_phi_rad * w_r**2 / a2
    return half_lap_grad2 - pair - hess2 - ric_pair


# ---------------------------------------------------------------------------
# evolution identity and inequality chain for F
# ---------------------------------------------------------------------------

def evolution_identity_rhs(tt: TermTable):
    """Right-hand side of the exact evolution identity for F."""
    p = tt.params.p
    m = tt.params.m
    n = tt.geom.n
    al, alp = tt.alpha, tt.alpha_p
    rhs = (
        -((p - 1) * tt.lap_v) ** 2
        + 2 * p * tt.gradF_pair
        - 2 * (p - 1) * tt.hess2
        - 2 * (p - 1) * tt.ric_m_vv
        - 2 * (p - 1) * tt.sharp_pair
        + (2 / tt.v) * (al - 1) * tt.h_vv
        + 2 * al * (p - 1) * tt.h_hess
        + al * (p - 1) * tt.divh_pair
        + al * (p - 1) * tt.phit_pair
        - tt.beta_p
        - 2 * al * (p - 1) * tt.h_phi_pair
        - alp * tt.v_t / tt.v
        + (1 - al) * (tt.v_t / tt.v - tt.G / tt.v) ** 2
        + (2 / tt.v) * (1 - al) * tt.gradG_pair
        - al * (p - 1) * tt.lap_G_full
        + (al - 1) * (tt.grad2 / tt.v) * (tt.G / tt.v)
        + alp * tt.G / tt.v
    )
    return rhs


def harnack_evolution_residual(solution, geom, params, nonlinearity, r=None, t=None):
    """L[F] minus the full identity right-hand side."""
    table = TermTable(solution, geom, params, nonlinearity, r=r, t=t)
    return table.LpvF - evolution_identity_rhs(table), table


INEQUALITY_STAGES = ("pointwise", "quadratic", "bounded")


def inequality_rhs(stage: str, tt: TermTable, bounds=None, sharper_static: bool = False):
    """Upper bounds for L[F]: raw curvature stage, completed-square stage in
    F, and the stage with the geometric bounds substituted."""
    p, m, n = tt.params.p, tt.params.m, tt.geom.n
    al, alp, be, bep = tt.alpha, tt.alpha_p, tt.beta, tt.beta_p
    b = tt.b
    if np.any(al < 1.0):
        raise IdentityError("inequality stages require alpha >= 1")
    if stage == "pointwise":
        factor = (1 + m * (p - 1)) / (m * (p - 1))
        if sharper_static:
            if not tt.geom.metric_static:
                raise IdentityError("sharper quadratic factor is only valid for static metrics")
            factor = (2 + m * (p - 1)) / (m * (p - 1))
        return (
            -factor * ((p - 1) * tt.lap_v) ** 2
            + (2 / tt.v) * (al - 1) * tt.h_vv
            - 2 * (p - 1) * tt.ric_m_vv
            + 2 * p * tt.gradF_pair
            + (p - 1) * al**2 * tt.h_norm2
            + al * (p - 1) * tt.divh_pair
            + al * (p - 1) * tt.phit_pair
            + (2 / tt.v) * (1 - al) * tt.gradG_pair
            - al * (p - 1) * tt.lap_G_full
            - 2 * al * (p - 1) * tt.h_phi_pair
            + (al - 1) * (tt.grad2 / tt.v) * (tt.G / tt.v)
            + alp * tt.G / tt.v
            - alp * tt.v_t / tt.v
            - bep
        )
    if stage == "quadratic":
        return (
            -tt.F**2 / (b * al**2)
            - 2 * (al - 1) / (b * al**2) * (tt.grad2 / tt.v) * tt.F
            + (tt.G_v - 2 * be / (b * al**2) + alp / al) * tt.F
            + 2 * p * tt.gradF_pair
            - (al - 1) ** 2 / (b * al**2) * (tt.grad2 / tt.v) ** 2
            + (2 / tt.v) * (al - 1) * tt.h_vv
            + (p - 1) * al**2 * tt.h_norm2
            + ((al - 1) * (tt.G / tt.v - tt.G_v) - al * (p - 1) * tt.v * tt.G_vv
               - alp / al - 2 * (al - 1) * be / (b * al**2)) * (tt.grad2 / tt.v)
            - 2 * (p - 1) * tt.ric_m_vv
            + al * (p - 1) * tt.divh_pair
            + 2 * ((al - 1) * tt.G_x_norm / tt.v + al * (p - 1) * tt.G_xv_norm) * tt.grad_norm
            + al * (p - 1) * tt.phit_pair
            - 2 * al * (p - 1) * tt.h_phi_pair
            - al * (p - 1) * tt.lap_Gx
            + be * tt.G_v
            - (be / al) * (be / (b * al) - alp)
            - bep
        )
    if stage == "bounded":
        if bounds is None:
            raise IdentityError("bounded stage needs extracted geometry bounds")
        k, k_lo, k_hi, k2 = bounds.k, bounds.k_lo, bounds.k_hi, bounds.k2
        l1, l2 = bounds.l1, bounds.l2
        return (
            -tt.F**2 / (b * al**2)
            - 2 * (al - 1) / (b * al**2) * (tt.grad2 / tt.v) * tt.F
            + (alp / al - 2 * be / (b * al**2) + tt.G_v) * tt.F
            + 2 * p * tt.gradF_pair
            - (al - 1) ** 2 / (b * al**2) * (tt.grad2 / tt.v) ** 2
            + (2 * (p - 1) * tt.v * ((m - 1) * k + k2) + 2 * (al - 1) * k_hi
               + (al - 1) * (tt.G / tt.v - tt.G_v) - al * (p - 1) * tt.v * tt.G_vv
               - 2 * (al - 1) * be / (b * al**2) - alp / al) * (tt.grad2 / tt.v)
            + (2 * (al - 1) * tt.G_x_norm / tt.v + 2 * al * (p - 1) * tt.G_xv_norm
               + al * (p - 1) * l2 + 2 * al * (p - 1) * k_lo * l1) * tt.grad_norm
            + al**2 * (p - 1) * n * ((k_lo + k_hi) ** 2 + 2 * k2)
            - al * (p - 1) * tt.lap_Gx
            + be * tt.G_v
            - (be / al) * (be / (b * al) - alp)
            - bep
        )
    raise IdentityError(f"unknown inequality stage {stage!r}")


def inequality_margin(stage: str, solution, geom, params, nonlinearity,
                      bounds=None, r=None, t=None, sharper_static: bool = False):
    """RHS(stage) - L[F]; non-negative on exact solutions."""
    table = TermTable(solution, geom, params, nonlinearity, r=r, t=t)
    rhs = inequality_rhs(stage, table, bounds=bounds, sharper_static=sharper_static)
    return rhs - table.LpvF, table
