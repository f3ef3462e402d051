"""Gradient-estimate constants, right-hand sides and pointwise verification.

Two families of estimates are verified.  Both bound the same quantity

    |grad v|^2 / (alpha v) - (dv/dt)/v + G/v - beta/alpha

for a positive pressure field v on a space-time cylinder; they differ in how
the aggregated geometry/forcing terms scale with the Harnack exponent alpha
(the "first" family aggregates with sqrt(b), the "second" with
sqrt(b alpha)).  Each family comes in a local form (cylinder of radius R,
with cutoff-localization terms) and a global form (suprema over the whole
domain; flagged as truncated when the computational domain is finite).
Static-geometry forms arise from the vanishing-eps limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Cylinder, GeometryBounds, WarpedGeometry, extract_bounds
from .params import HarnackParams
from .solver import Nonlinearity, PowerSumNonlinearity


class EstimateError(ValueError):
    pass


# ---------------------------------------------------------------------------
# cutoff profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffProfile:
    """Radial bump: 1 on [0,1], cos^2(pi (s-1)/2) on [1,2], 0 beyond.

    The certified constants bound the profile's slope and curvature:
    -c1 sqrt(eta) <= eta' <= 0 and eta'' >= -c2 everywhere they exist.
    """

    c1: float = math.pi
    c2: float = math.pi**2 / 2

    @staticmethod
    def _theta(s):
        return math.pi * (np.clip(np.asarray(s, dtype=float), 1.0, 2.0) - 1.0) / 2.0

    def value(self, s):
        s = np.asarray(s, dtype=float)
        th = self._theta(s)
        out = np.cos(th) ** 2
        return np.where(s <= 1.0, 1.0, np.where(s >= 2.0, 0.0, out))

    def slope(self, s):
        s = np.asarray(s, dtype=float)
        th = self._theta(s)
        out = -(math.pi / 2.0) * np.sin(2.0 * th)
        return np.where((s <= 1.0) | (s >= 2.0), 0.0, out)

    def curvature(self, s):
        s = np.asarray(s, dtype=float)
        th = self._theta(s)
        out = -(math.pi**2 / 2.0) * np.cos(2.0 * th)
        return np.where((s <= 1.0) | (s >= 2.0), 0.0, out)

    def certify(self, n: int = 20001) -> dict:
        """Dense-grid confirmation that (c1, c2) dominate the profile."""
        s = np.linspace(0.0, 2.5, n)
        eta = self.value(s)
        d1 = self.slope(s)
        d2 = self.curvature(s)
        slope_margin = float(np.min(d1 + self.c1 * np.sqrt(eta)))
        curv_margin = float(np.min(d2 + self.c2))
        pos = eta > 0
        scanned_c1 = float(np.max(-d1[pos] / np.sqrt(eta[pos])))
        scanned_c2 = float(np.max(-d2))
        return {
            "c1": self.c1,
            "c2": self.c2,
            "scanned_c1": scanned_c1,
            "scanned_c2": scanned_c2,
            "slope_margin": slope_margin,
            "curvature_margin": curv_margin,
            "monotone": bool(np.all(d1 <= 1e-15)),
            "range_ok": bool(np.all((eta >= 0) & (eta <= 1))),
        }


def cutoff_profile() -> CutoffProfile:
    return CutoffProfile()


# ---------------------------------------------------------------------------
# aggregate constants
# ---------------------------------------------------------------------------

def aggregate_constants(bounds: GeometryBounds, params: HarnackParams, v_sup: float,
                        radius: float, cutoff: CutoffProfile, tau, eps,
                        family: str = "first", scope: str = "local") -> dict:
    """The six aggregate coefficients as arrays over the estimate clock tau.

    ``eps`` may be None for the vanishing-eps limit, in which case the
    Young-inequality coefficient attached to the forcing-gradient block
    (``E``) is infinite and callers must check that its bracket vanishes.
    """
    if family not in ("first", "second"):
        raise EstimateError(f"unknown estimate family {family!r}")
    if scope not in ("local", "global"):
        raise EstimateError(f"unknown scope {scope!r}")
    tau = np.asarray(tau, dtype=float)
    al = params.coeffs.alpha_at(tau)
    b = params.b
    p, m = params.p, params.m
    c1 = cutoff.c1
    K = 2.0 * c1 * bounds.k_lo
    if scope == "local":
        if radius <= 0:
            raise EstimateError("local constants need a positive radius")
        with np.errstate(divide="ignore"):
            K = K + c1**2 * b * al**2 * p**2 * v_sup / (2.0 * (al - 1.0) * radius**2)
    else:
        K = K * np.ones_like(al)
    L = al * (p - 1) * bounds.l2 / 2.0 + al * (p - 1) * bounds.k_lo * bounds.l1
    if eps is None:
        E = math.inf
        denom_first = 4.0 * (al - 1.0) ** 2
        denom_second = 4.0 * (al - 1.0) ** 2
    else:
        params.require_eps(eps, tau, mode=family)
        E = (1.5) ** 1.5 * v_sup / math.sqrt(eps)
        denom_first = 4.0 * (al - 1.0) ** 2 - 2.0 * eps * b * al**2
        denom_second = 4.0 * (al - 1.0) ** 2 - 2.0 * eps * b * al**3
    out = {"K": K, "L": L, "E": E}
    if family == "first":
        out["F"] = b * al**2 / denom_first
        out["N"] = 2.0 * (p - 1) * v_sup * ((m - 1) * bounds.k + bounds.k2) + 2.0 * (al - 1.0) * bounds.k_hi
    else:
        out["F"] = b * al**3 / denom_second
        out["N"] = (2.0 * (p - 1) * v_sup * ((m - 1) * bounds.k / al + bounds.k2)
                    + 2.0 * (al - 1.0) * bounds.k_hi / al)
    return out


def aggregate_M(bounds: GeometryBounds, params: HarnackParams, n_dim: int, tau,
                family: str = "first"):
    """Metric-speed aggregate entering the clamped zeroth-order block."""
    al = params.coeffs.alpha_at(np.asarray(tau, dtype=float))
    p = params.p
    pair = (bounds.k_lo + bounds.k_hi) ** 2
    if family == "first":
        return al**2 * (p - 1) * n_dim * (pair + 2.0 * bounds.k2)
    return (p - 1) * n_dim * (al * pair + 2.0 * bounds.k2)


# ---------------------------------------------------------------------------
# sampled suprema over a cylinder
# ---------------------------------------------------------------------------

@dataclass
class SupSamples:
    """Flattened per-node data over the sup cylinder (metric-normalized)."""

    r: np.ndarray
    t_abs: np.ndarray
    tau: np.ndarray
    v: np.ndarray
    G: np.ndarray
    G_v: np.ndarray
    G_vv: np.ndarray
    G_x_norm: np.ndarray
    G_xv_norm: np.ndarray
    lap_Gx: np.ndarray
    alpha: np.ndarray
    alpha_p: np.ndarray
    beta: np.ndarray
    beta_p: np.ndarray

    @property
    def v_sup(self) -> float:
        return float(np.max(self.v))


def collect_sup_samples(solution, geom: WarpedGeometry, params: HarnackParams,
                        nl: Nonlinearity, cyl: Cylinder, t0_clock: float,
                        density=(129, 65)) -> SupSamples:
    """Evaluate the sup-relevant quantities on cylinder nodes.

    ``t0_clock`` is the absolute time at which the estimate clock starts;
    tau = t - t0_clock feeds alpha, beta and the 1/t term.
    """
    if solution.grid_mode:
        grid = solution.field.grid
        mask = cyl.mask(grid.r, grid.t, geom)
        if not np.any(mask):
            raise EstimateError("sup cylinder misses the solution grid")
        rr, tt = grid.mesh()
        r_in, t_in = rr[mask], tt[mask]
        v = solution.field.values[mask]
    else:
        n_r, n_t = density
        r_nodes, t_nodes = cyl.sample_nodes(geom, n_r, n_t)
        mask = cyl.mask(r_nodes, t_nodes, geom)
        rr = np.broadcast_to(r_nodes[:, None], mask.shape)
        tt = np.broadcast_to(t_nodes[None, :], mask.shape)
        r_in, t_in = rr[mask], tt[mask]
        v = solution.part(0, 0, r_in, t_in)
    if np.any(v <= 0):
        raise EstimateError("pressure field not positive on the sup cylinder")
    tau = t_in - t0_clock
    a = geom.conformal(r_in, t_in)
    coeffs = params.coeffs
    return SupSamples(
        r=r_in, t_abs=t_in, tau=tau, v=v,
        G=nl.G(t_in, r_in, v),
        G_v=nl.G_v(t_in, r_in, v),
        G_vv=nl.G_vv(t_in, r_in, v),
        G_x_norm=np.abs(nl.G_x(t_in, r_in, v)) / a,
        G_xv_norm=np.abs(nl.G_xv(t_in, r_in, v)) / a,
        lap_Gx=nl.lap_phi_Gx(t_in, r_in, v),
        alpha=coeffs.alpha_at(tau),
        alpha_p=coeffs.alpha_prime_at(tau),
        beta=coeffs.beta_at(tau),
        beta_p=coeffs.beta_prime_at(tau),
    )


def _clamped_sup(values) -> float:
    return max(0.0, float(np.max(values)))


def sup_quantities(samples: SupSamples, bounds: GeometryBounds, params: HarnackParams,
                   n_dim: int, radius: float, cutoff: CutoffProfile, eps,
                   family: str = "first", scope: str = "local") -> dict:
    """The clamped sup-quantities q0..q4 entering the estimate right side.

    q0 is the unclamped sup of [beta - alpha G / v] (used by the Harnack
    bound); q1..q4 are the non-negative aggregates.  For the "first" family
    these are the mu's, for the "second" family the lambda's.
    """
    s = samples
    b = params.b
    p, m = params.p, params.m
    cst = aggregate_constants(bounds, params, s.v_sup, radius, cutoff, s.tau, eps,
                              family=family, scope=scope)
    al, alp, be, bep = s.alpha, s.alpha_p, s.beta, s.beta_p
    Mterm = aggregate_M(bounds, params, n_dim, s.tau, family=family)
    q0 = float(np.max(be - al * s.G / s.v))
    if family == "first":
        q1 = _clamped_sup(s.G_v + alp / al - 2.0 * be / (b * al**2) + cst["K"])
        bracket2 = (al - 1.0) * s.G_x_norm / s.v + al * (p - 1) * s.G_xv_norm + cst["L"]
        q3 = _clamped_sup(be * s.G_v - al * (p - 1) * s.lap_Gx
                          + (be / al) * (alp - be / (b * al)) - bep + Mterm)
        bracket4 = ((al - 1.0) * (s.G / s.v - s.G_v) - al * (p - 1) * s.v * s.G_vv
                    - 2.0 * (al - 1.0) * be / (b * al**2) - alp / al + cst["N"])
    else:
        q1 = _clamped_sup(s.G_v - 2.0 * be / (b * al**2) + cst["K"])
        bracket2 = ((al - 1.0) / al * s.G_x_norm / s.v + (p - 1) * s.G_xv_norm
                    + cst["L"] / al)
        q3 = _clamped_sup((be / al) * s.G_v - (p - 1) * s.lap_Gx
                          + (be / al**2) * (alp - be / (b * al)) - bep / al + Mterm)
        bracket4 = ((al - 1.0) / al * (s.G / s.v - s.G_v) - (p - 1) * s.v * s.G_vv
                    - 2.0 * (al - 1.0) * be / (b * al**3) - alp / al**2 + cst["N"])
    sup2 = float(np.max(bracket2))
    if math.isinf(cst["E"]):
        q2 = 0.0 if sup2 <= 0.0 else math.inf
    else:
        q2 = math.sqrt(cst["E"]) * sup2
    q2 = max(0.0, q2)
    q4 = _clamped_sup(np.sqrt(cst["F"]) * bracket4)
    return {"q0": q0, "q1": q1, "q2": q2, "q3": q3, "q4": q4,
            "family": family, "scope": scope, "eps": eps, "v_sup": s.v_sup}


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

VARIANTS = (
    "first-local", "first-global", "second-local", "second-global",
    "static-first-local", "static-first-global",
    "static-second-local", "static-second-global",
)


def _localization_term(params: HarnackParams, al, v_sup, radius, k, m, cutoff):
    c1, c2 = cutoff.c1, cutoff.c2
    return (params.b * (params.p - 1) * al * (v_sup / radius**2)
            * (c2 + (m - 1) * c1 * (1.0 + radius * math.sqrt(k)) + 2.0 * c1**2))


def rhs_bound(variant: str, samples: SupSamples, bounds: GeometryBounds,
              params: HarnackParams, n_dim: int, radius: float,
              cutoff: CutoffProfile, eps, tau):
    """Estimate right-hand side at clock times tau > 0."""
    if variant not in VARIANTS:
        raise EstimateError(f"unknown estimate variant {variant!r}")
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise EstimateError("the estimate right side requires tau > 0")
    b = params.b
    p, m = params.p, params.m
    al = params.coeffs.alpha_at(tau)
    base = b * al / tau
    v_sup = samples.v_sup
    k = bounds.k

    if variant in ("first-local", "first-global", "second-local", "second-global"):
        family = "first" if variant.startswith("first") else "second"
        scope = "local" if variant.endswith("local") else "global"
        q = sup_quantities(samples, bounds, params, n_dim, radius, cutoff, eps,
                           family=family, scope=scope)
        agg = q["q2"] ** (4.0 / 3.0) + q["q3"] + q["q4"] ** 2
        root = np.sqrt(b) if family == "first" else np.sqrt(b * al)
        rhs = base + b * al * q["q1"] + root * np.sqrt(agg)
        if scope == "local":
            rhs = rhs + _localization_term(params, al, v_sup, radius, k, m, cutoff)
        return rhs

    # static-geometry forms (vanishing-eps limits with zeroed evolution data);
    # they are only sound for x-independent forcing on static data, so refuse
    # scenarios that carry either kind of extra structure
    s = samples
    if float(np.max(s.G_x_norm)) > 0 or float(np.max(s.G_xv_norm)) > 0:
        raise EstimateError("static estimate forms require x-independent forcing")
    if max(bounds.k_lo, bounds.k_hi, bounds.k2, bounds.l2) > 0:
        raise EstimateError("static estimate forms require zero evolution bounds")
    al_s, alp_s, be_s = s.alpha, s.alpha_p, s.beta
    if variant.startswith("static-first"):
        sup_last = _clamped_sup(
            (al_s / 2.0) * (s.G / s.v - s.G_v)
            - al_s**2 * (p - 1) / (2.0 * (al_s - 1.0)) * s.v * s.G_vv
            + (2.0 * al_s * (p - 1) * v_sup * (m - 1) * k - alp_s) / (2.0 * (al_s - 1.0))
        )
        if variant.endswith("local"):
            sup_first = _clamped_sup(
                s.G_v + alp_s / al_s
                + b * al_s**2 * p**2 * v_sup * cutoff.c1**2 / (2.0 * (al_s - 1.0) * radius**2)
            )
            return (base + b * al * sup_first
                    + _localization_term(params, al, v_sup, radius, k, m, cutoff)
                    + b * sup_last)
        sup_first = _clamped_sup(s.G_v + alp_s / al_s)
        return base + b * al * sup_first + b * sup_last
    # static-second
    sup_last = _clamped_sup(
        (np.sqrt(al_s) / 2.0) * (s.G / s.v - s.G_v)
        - al_s**1.5 * (p - 1) / (2.0 * (al_s - 1.0)) * s.v * s.G_vv
        + (2.0 * al_s * (p - 1) * v_sup * (m - 1) * k - alp_s)
        / (2.0 * np.sqrt(al_s) * (al_s - 1.0))
    )
    if variant.endswith("local"):
        sup_first = _clamped_sup(
            s.G_v + b * al_s**2 * p**2 * v_sup * cutoff.c1**2 / (2.0 * (al_s - 1.0) * radius**2)
        )
        return (base + b * al * sup_first
                + _localization_term(params, al, v_sup, radius, k, m, cutoff)
                + b * np.sqrt(al) * sup_last)
    sup_first = _clamped_sup(s.G_v)
    return base + b * al * sup_first + b * np.sqrt(al) * sup_last


# ---------------------------------------------------------------------------
# pointwise verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    """Per-node margins of one estimate variant at one eps."""

    variant: str
    eps: object
    radius: float
    clock: str
    r: np.ndarray
    t_abs: np.ndarray
    tau: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    margin: np.ndarray
    tolerance: float
    scale: float
    violations: list
    min_margin: float
    argmin: tuple
    constants: dict
    v_sup: float
    v_inf: float
    flags: tuple = ()

    @property
    def passed(self) -> bool:
        return len(self.violations) == 0

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "eps": None if self.eps is None else float(self.eps),
            "radius": self.radius,
            "clock": self.clock,
            "nodes": int(self.margin.size),
            "min_margin": self.min_margin,
            "argmin_r": self.argmin[0],
            "argmin_tau": self.argmin[1],
            "violations": len(self.violations),
            "tolerance": self.tolerance,
            "scale": self.scale,
            "v_sup": self.v_sup,
            "v_inf": self.v_inf,
            "flags": list(self.flags),
            "constants": {kk: (None if isinstance(vv, float) and math.isinf(vv) else vv)
                          for kk, vv in self.constants.items()
                          if isinstance(vv, (int, float, str, type(None)))},
        }


def estimate_lhs(solution, geom, params, nl, r, t_abs, tau, mask=None):
    """|grad v|^2/(alpha v) - v_t/v + G/v - beta/alpha at given nodes.

    For grid solutions the fields are stencil-differentiated on the full
    grid and ``mask`` selects the verification nodes.
    """
    part = solution.part
    v = part(0, 0, r, t_abs)
    v_r = part(1, 0, r, t_abs)
    v_t = part(0, 1, r, t_abs)
    if solution.grid_mode:
        if mask is None:
            raise EstimateError("grid-mode evaluation needs the node mask")
        v, v_r, v_t = v[mask], v_r[mask], v_t[mask]
    a2 = geom.conformal(r, t_abs) ** 2
    al = params.coeffs.alpha_at(tau)
    be = params.coeffs.beta_at(tau)
    G = nl.G(t_abs, r, v)
    return v_r**2 / (a2 * al * v) - v_t / v + G / v - be / al


def verify_estimate(solution, geom: WarpedGeometry, params: HarnackParams,
                    nl: Nonlinearity, variant: str, cyl: Cylinder,
                    t0_clock: float, cutoff: CutoffProfile | None = None,
                    eps=None, density=(129, 65), eval_density=(65, 33),
                    tolerance_factor: float = 1e-6, rhs_scale: float = 1.0,
                    floor: float = 0.0) -> VerificationReport:
    """Check the estimate pointwise on Q_R; margins = rhs - lhs >= -tol.

    ``rhs_scale`` != 1 is the negative-control hook: scaling the right side
    down must produce violations on honest scenarios.
    """
    cutoff = cutoff or cutoff_profile()
    scope = "global" if variant.endswith("global") else "local"
    flags = []
    if scope == "local":
        cyl.require_inside(geom, factor=2.0)
        sup_cyl = cyl.scaled(2.0)
    else:
        sup_cyl = Cylinder(1e18, cyl.t_lo, cyl.t_hi)
        flags.append("truncated-global")
    bounds = extract_bounds(geom, sup_cyl, grid_density=density)
    samples = collect_sup_samples(solution, geom, params, nl, sup_cyl, t0_clock,
                                  density=density)

    # evaluation nodes on Q_R (global scope: whole domain)
    eval_cyl = cyl if scope == "local" else sup_cyl
    if solution.grid_mode:
        grid = solution.field.grid
        mask = eval_cyl.mask(grid.r, grid.t, geom)
        rr, tt = grid.mesh()
    else:
        n_r, n_t = eval_density
        r_nodes, t_nodes = eval_cyl.sample_nodes(geom, n_r, n_t)
        mask = eval_cyl.mask(r_nodes, t_nodes, geom)
        rr = np.broadcast_to(r_nodes[:, None], mask.shape).copy()
        tt = np.broadcast_to(t_nodes[None, :], mask.shape).copy()
    tau_all = tt - t0_clock
    mask = mask & (tau_all > 1e-12)
    if not np.any(mask):
        raise EstimateError("no verification nodes with positive clock time")
    r_in, t_in, tau_in = rr[mask], tt[mask], tau_all[mask]

    lhs = estimate_lhs(solution, geom, params, nl, r_in, t_in, tau_in, mask=mask)
    rhs = rhs_bound(variant, samples, bounds, params, geom.n, cyl.radius,
                    cutoff, eps, tau_in) * rhs_scale
    margin = rhs - lhs
    scale = max(1.0, float(np.max(np.abs(lhs))))
    tol = tolerance_factor * scale
    bad = margin < -tol
    violations = [
        {"r": float(r_in[i]), "t": float(t_in[i]), "tau": float(tau_in[i]),
         "lhs": float(lhs[i]), "rhs": float(rhs[i]), "margin": float(margin[i])}
        for i in np.nonzero(bad)[0][:200]
    ]
    imin = int(np.argmin(margin))
    quantities = sup_quantities(samples, bounds, params, geom.n, cyl.radius, cutoff,
                                eps, family="second" if "second" in variant else "first",
                                scope=scope)
    v_inf = float(np.min(samples.v))
    constants = {
        "b": params.b,
        "eps": None if eps is None else float(eps),
        "k": bounds.k, "k_lo": bounds.k_lo, "k_hi": bounds.k_hi,
        "k2": bounds.k2, "l1": bounds.l1, "l2": bounds.l2,
        "c1": cutoff.c1, "c2": cutoff.c2,
        "v_sup": samples.v_sup,
        "q0": quantities["q0"], "q1": quantities["q1"], "q2": quantities["q2"],
        "q3": quantities["q3"], "q4": quantities["q4"],
        "sup_cylinder": f"radius={'domain' if scope == 'global' else 2 * cyl.radius}, "
                        f"t=[{cyl.t_lo:g},{cyl.t_hi:g}]",
        "sup_density": f"{density[0]}x{density[1]}",
    }
    if rhs_scale != 1.0:
        flags.append(f"negative-control(rhs_scale={rhs_scale:g})")
    return VerificationReport(
        variant=variant, eps=eps, radius=cyl.radius,
        clock=f"t0={t0_clock:g}",
        r=r_in, t_abs=t_in, tau=tau_in, lhs=lhs, rhs=rhs, margin=margin,
        tolerance=tol, scale=scale, violations=violations,
        min_margin=float(margin[imin]),
        argmin=(float(r_in[imin]), float(tau_in[imin])),
        constants=constants, v_sup=samples.v_sup, v_inf=v_inf,
        flags=tuple(flags),
    )


def eps_scan(params: HarnackParams, tau, family: str, fractions=(0.1, 0.5, 0.9)):
    """Admissible eps values as fractions of the pointwise ceiling."""
    ceiling = params.eps_ceiling(tau, mode=family)
    return [f * ceiling for f in fractions]


# ---------------------------------------------------------------------------
# power-sum nonlinearity admissibility conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearityConditions:
    slope_nonpositive_exponents: bool
    convexity_exponents: bool
    slope_nonpositive_scan: bool
    convexity_scan: bool

    @property
    def consistent(self) -> bool:
        """The exponent ranges are sufficient conditions: whenever they hold
        the numeric scan must agree."""
        return ((not self.slope_nonpositive_exponents or self.slope_nonpositive_scan)
                and (not self.convexity_exponents or self.convexity_scan))


def nonlinearity_conditions(power: PowerSumNonlinearity, p: float, alpha: float,
                            v_grid=None, tol: float = 1e-12) -> NonlinearityConditions:
    """Exponent ranges and a numeric scan for the two structure conditions.

    Condition 1: dG/dv <= 0.  Condition 2:
    alpha (p-1) v G_vv - (alpha-1)(G/v - G_v) >= 0.
    """
    if alpha <= 1:
        raise EstimateError("conditions are stated for alpha > 1")
    a_active = [ex for coef, ex in zip(power.A, power.a) if coef > 0]
    b_active = [ex for coef, ex in zip(power.B, power.bexp) if coef < 0]
    slope_exp = all(ex <= 0 for ex in a_active) and all(ex >= 0 for ex in b_active)
    cap = (1.0 - alpha) / (alpha * (p - 1.0))
    convex_exp = all(ex <= cap for ex in a_active) and all(0.0 <= ex <= 1.0 for ex in b_active)

    v = np.asarray(v_grid if v_grid is not None else np.geomspace(0.1, 10.0, 181), dtype=float)
    G = power.G(0.0, 0.0, v)
    G_v = power.G_v(0.0, 0.0, v)
    G_vv = power.G_vv(0.0, 0.0, v)
    slope_scan = bool(np.all(G_v <= tol * np.maximum(1.0, np.abs(G_v).max())))
    expr = alpha * (p - 1) * v * G_vv - (alpha - 1) * (G / v - G_v)
    convex_scan = bool(np.all(expr >= -tol * np.maximum(1.0, np.abs(expr).max())))
    return NonlinearityConditions(slope_exp, convex_exp, slope_scan, convex_scan)


# ---------------------------------------------------------------------------
# localized diagnostic
# ---------------------------------------------------------------------------

def localized_diagnostic(solution, geom: WarpedGeometry, params: HarnackParams,
                         nl: Nonlinearity, cutoff: CutoffProfile, radius: float,
                         cyl: Cylinder, t0_clock: float, density=(97, 49)) -> dict:
    """Maximum of the localized quantity tau * eta * F over the 2R cylinder.

    Reports the maximizer and discrete first-order information there: at an
    interior maximum the stencil gradient is small and the neighbours do not
    exceed the maximum.
    """
    sup_cyl = Cylinder(2.0 * radius, cyl.t_lo, cyl.t_hi)
    sup_cyl.require_inside(geom)
    if solution.grid_mode:
        grid = solution.field.grid
        r_nodes, t_nodes = grid.r, grid.t
    else:
        n_r, n_t = density
        r_nodes, t_nodes = sup_cyl.sample_nodes(geom, n_r, n_t)
    rr, tt = np.meshgrid(r_nodes, t_nodes, indexing="ij")
    tau = tt - t0_clock
    part = solution.part
    v = part(0, 0, rr, tt)
    v_r = part(1, 0, rr, tt)
    v_t = part(0, 1, rr, tt)
    a = geom.conformal(rr, tt)
    al = params.coeffs.alpha_at(tau)
    be = params.coeffs.beta_at(tau)
    G = nl.G(tt, rr, v)
    F = v_r**2 / (a**2 * v) - al * v_t / v + al * G / v - be
    rho = a * rr
    eta = cutoff.value(rho / radius)
    inside = sup_cyl.mask(r_nodes, t_nodes, geom) & (tau >= 0)
    Gq = np.where(inside, tau * eta * F, -np.inf)
    i, j = np.unravel_index(int(np.argmax(Gq)), Gq.shape)
    gmax = float(Gq[i, j])
    neighbours = []
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ii, jj = i + di, j + dj
        if 0 <= ii < Gq.shape[0] and 0 <= jj < Gq.shape[1] and np.isfinite(Gq[ii, jj]):
            neighbours.append(float(Gq[ii, jj]))
    interior_in_r = 0 < i < Gq.shape[0] - 1 and np.isfinite(Gq[i - 1, j]) and np.isfinite(Gq[i + 1, j])
    grad_r = (Gq[i + 1, j] - Gq[i - 1, j]) / (2 * (r_nodes[1] - r_nodes[0])) if interior_in_r else 0.0
    return {
        "max": gmax,
        "arg_r": float(rr[i, j]),
        "arg_tau": float(tau[i, j]),
        "rho_over_R": float(rho[i, j] / radius),
        "neighbours_below": bool(all(nv <= gmax + 1e-12 for nv in neighbours)),
        "stencil_grad_r": float(grad_r),
        "eta_at_max": float(eta[i, j]),
    }
