"""Positive radial solutions of the weighted slow diffusion equation.

Solves d(u)/dt = Delta_phi(u^p) + N(t, x, u) for strictly positive data with
a conservative finite-volume space discretization and semi-implicit time
stepping: the diffusion coefficient p u^(p-1) is frozen at the current state
(lagged linearization), the resulting linear diffusion solved implicitly, and
the source term taken explicitly.  Exact solutions (the self-similar source
solution and manufactured pressure fields) provide the discretization
oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.linalg import solve_banded

from .fields import Grid, ScalarField
from .geometry import WarpedGeometry
from .symfun import Profile, R, T


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# pressure transform and nonlinearity forms
# ---------------------------------------------------------------------------

def pressure(u, p: float):
    """v = p u^(p-1) / (p-1); monotone for p > 1."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise SolverError("pressure transform requires positive u")
    return p * u ** (p - 1) / (p - 1)


def pressure_inverse(v, p: float):
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise SolverError("inverse pressure transform requires positive v")
    return ((p - 1) * v / p) ** (1.0 / (p - 1))


def pressure_field(u: ScalarField, p: float) -> ScalarField:
    return ScalarField(pressure(u.values, p), u.grid, parity=u.parity, positive=True)


def rescale_nonlinearity(source, p: float, t, r, v):
    """Map a source-form N(t, x, u) evaluator to the pressure-form value."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise SolverError("rescaled nonlinearity requires positive v")
    u = pressure_inverse(v, p)
    return p * u ** (p - 2) * np.asarray(source(t, r, u), dtype=float)


class Nonlinearity:
    """Zero forcing; base class fixing the pressure-form interface.

    ``G(t, r, v)`` is the rescaled forcing entering the pressure equation
    d(v)/dt = (p-1) v Delta_phi v + |grad v|^2 + G.  ``G_x`` and ``G_xv`` are
    coordinate r-partials at frozen v (callers convert to metric norms), and
    ``lap_phi_Gx`` is the weighted Laplacian of the frozen-v spatial slice.
    """

    form = "zero"

    def G(self, t, r, v):
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def G_v(self, t, r, v):
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def G_vv(self, t, r, v):
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def G_x(self, t, r, v):
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def G_xv(self, t, r, v):
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def G_t(self, t, r, v):
        """Explicit time partial at frozen (x, v)."""
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def G_xx(self, t, r, v):
        """Second coordinate r-partial at frozen v."""
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def lap_phi_Gx(self, t, r, v):
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def source(self, t, r, u, p: float):
        """Source form N(t, x, u) = G * u^(2-p) / p."""
        u = np.asarray(u, dtype=float)
        v = pressure(u, p)
        return self.G(t, r, v) * u ** (2.0 - p) / p

    def composed_expr(self, v_expr):
        """Symbolic G(t, x, v(x,t)) for a closed-form pressure field."""
        return sp.sympify(0)

    def describe(self) -> str:
        return self.form


class PowerSumNonlinearity(Nonlinearity):
    """G(v) = sum A_j v^a_j + sum B_j v^b_j with A_j >= 0 and B_j <= 0."""

    form = "power-sum"

    def __init__(self, A=(), a=(), B=(), b=()):
        self.A = np.asarray(A, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.B = np.asarray(B, dtype=float)
        self.bexp = np.asarray(b, dtype=float)
        if self.A.shape != self.a.shape or self.B.shape != self.bexp.shape:
            raise SolverError("coefficient/exponent lists must pair up")
        if np.any(self.A < 0) or np.any(self.B > 0):
            raise SolverError("power-sum form requires A_j >= 0 and B_j <= 0")

    def _terms(self, v, shift: int):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        for coef, ex in zip(self.A, self.a):
            fac = np.prod([ex - j for j in range(shift)]) if shift else 1.0
            out += coef * fac * v ** (ex - shift)
        for coef, ex in zip(self.B, self.bexp):
            fac = np.prod([ex - j for j in range(shift)]) if shift else 1.0
            out += coef * fac * v ** (ex - shift)
        return out

    def G(self, t, r, v):
        return self._terms(v, 0)

    def G_v(self, t, r, v):
        return self._terms(v, 1)

    def G_vv(self, t, r, v):
        return self._terms(v, 2)

    def composed_expr(self, v_expr):
        out = sp.sympify(0)
        for coef, ex in zip(self.A, self.a):
            out += sp.Float(coef) * v_expr ** sp.Float(ex)
        for coef, ex in zip(self.B, self.bexp):
            out += sp.Float(coef) * v_expr ** sp.Float(ex)
        return out

    def describe(self) -> str:
        return (f"power-sum(A={self.A.tolist()}, a={self.a.tolist()}, "
                f"B={self.B.tolist()}, b={self.bexp.tolist()})")


class ForcingNonlinearity(Nonlinearity):
    """Purely x-dependent forcing G(t, x); v-partials vanish identically."""

    form = "separable-x"

    def __init__(self, profile: Profile, geom: WarpedGeometry):
        self.profile = profile
        self.geom = geom

    def G(self, t, r, v):
        return self.profile(r, t)

    def G_x(self, t, r, v):
        return self.profile.at(1, 0, r, t)

    def G_t(self, t, r, v):
        return self.profile.at(0, 1, r, t)

    def G_xx(self, t, r, v):
        return self.profile.at(2, 0, r, t)

    def lap_phi_Gx(self, t, r, v):
        from .geometry import phi_laplacian_eval

        return phi_laplacian_eval(self.geom, self.profile, r, t)

    def composed_expr(self, v_expr):
        return self.profile.expr

    def describe(self) -> str:
        return f"separable-x({self.profile.name or self.profile.expr})"


class CompositeNonlinearity(Nonlinearity):
    """Sum of a v-dependent power-sum part and an x-dependent forcing part."""

    form = "power-sum+separable-x"

    def __init__(self, power: PowerSumNonlinearity, forcing: ForcingNonlinearity):
        self.power = power
        self.forcing = forcing

    def G(self, t, r, v):
        return self.power.G(t, r, v) + self.forcing.G(t, r, v)

    def G_v(self, t, r, v):
        return self.power.G_v(t, r, v)

    def G_vv(self, t, r, v):
        return self.power.G_vv(t, r, v)

    def G_x(self, t, r, v):
        return self.forcing.G_x(t, r, v)

    def G_xv(self, t, r, v):
        return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(r), np.shape(v)))

    def G_t(self, t, r, v):
        return self.forcing.G_t(t, r, v)

    def G_xx(self, t, r, v):
        return self.forcing.G_xx(t, r, v)

    def lap_phi_Gx(self, t, r, v):
        return self.forcing.lap_phi_Gx(t, r, v)

    def composed_expr(self, v_expr):
        return self.power.composed_expr(v_expr) + self.forcing.composed_expr(v_expr)

    def describe(self) -> str:
        return f"{self.power.describe()} + {self.forcing.describe()}"


def _closure_expr(v_exact: Profile, geom: WarpedGeometry, p: float) -> sp.Expr:
    # the drift product inside the Laplacian is cancelled on the small v
    # expression, so every summand of the closure stays pole-regular; the
    # closure itself is deliberately not recombined into one big rational
    lap = geom.phi_laplacian_profile(v_exact).expr
    a2 = geom.conformal.expr**2
    return sp.diff(v_exact.expr, T) - (p - 1) * v_exact.expr * lap - sp.diff(v_exact.expr, R) ** 2 / a2


def manufactured_forcing(v_exact: Profile, geom: WarpedGeometry, p: float) -> ForcingNonlinearity:
    """Forcing that makes ``v_exact`` an exact pressure solution.

    G := d(v)/dt - (p-1) v Delta_phi v - |grad v|^2, assembled symbolically so
    the forcing carries its own derivative table.
    """
    return ForcingNonlinearity(Profile(_closure_expr(v_exact, geom, p), name="closure_forcing"), geom)


def power_sum_with_closure(power: PowerSumNonlinearity, v_exact: Profile,
                           geom: WarpedGeometry, p: float) -> CompositeNonlinearity:
    """Closure forcing for a target pressure field on top of a power-sum term."""
    expr = _closure_expr(v_exact, geom, p) - power.composed_expr(v_exact.expr)
    forcing = ForcingNonlinearity(Profile(expr, name="closure_forcing"), geom)
    return CompositeNonlinearity(power, forcing)


# ---------------------------------------------------------------------------
# exact self-similar solution (Euclidean, phi = 0, zero forcing)
# ---------------------------------------------------------------------------

def barenblatt_exponents(n: int, p: float):
    beta = 1.0 / (n * (p - 1) + 2.0)
    return n * beta, beta


def barenblatt_oracle(n: int, p: float, mass_const: float, r, t):
    """Self-similar source solution of d(u)/dt = Delta u^p on flat space."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise SolverError("self-similar solution requires t > 0")
    nbeta, beta = barenblatt_exponents(n, p)
    kk = (p - 1) * beta / (2 * p)
    r = np.asarray(r, dtype=float)
    core = mass_const - kk * r**2 * t ** (-2 * beta)
    return t ** (-nbeta) * np.maximum(core, 0.0) ** (1.0 / (p - 1))


def barenblatt_pressure(n: int, p: float, mass_const: float, r, t):
    u = barenblatt_oracle(n, p, mass_const, r, t)
    t = np.asarray(t, dtype=float)
    return p * u ** (p - 1) / (p - 1)


def barenblatt_pressure_profile(n: int, p: float, mass_const: float) -> Profile:
    """Closed-form pressure inside the support (quadratic in r)."""
    nbeta, beta = barenblatt_exponents(n, p)
    kk = sp.Rational(1, 1) * (p - 1) * sp.Float(beta) / (2 * p)
    expr = sp.Float(p) / (p - 1) * T ** sp.Float(-nbeta * (p - 1)) * (sp.Float(mass_const) - kk * R**2 * T ** sp.Float(-2 * beta))
    return Profile(sp.expand(expr), name="barenblatt_pressure")


def barenblatt_support_radius(n: int, p: float, mass_const: float, t):
    _, beta = barenblatt_exponents(n, p)
    kk = (p - 1) * beta / (2 * p)
    return np.sqrt(mass_const / kk) * np.asarray(t, dtype=float) ** beta


def validate_barenblatt(n: int, p: float, mass_const: float,
                        r_samples=None, t_samples=None) -> float:
    """Max residual of the oracle in the flat pressure equation, closed form.

    The oracle is only trusted after this substitution check; callers assert
    the returned residual is at machine-precision level.
    """
    geom_flat = _flat_geometry(n)
    prof = barenblatt_pressure_profile(n, p, mass_const)
    lap = geom_flat.phi_laplacian_profile(prof).expr
    residual = sp.diff(prof.expr, T) - (p - 1) * prof.expr * lap - sp.diff(prof.expr, R) ** 2
    fun = Profile(sp.cancel(sp.together(residual)), name="barenblatt_residual")
    if r_samples is None:
        r_samples = np.linspace(0.0, 1.0, 17)
    if t_samples is None:
        t_samples = np.linspace(0.5, 2.0, 9)
    rr, tt = np.meshgrid(r_samples, t_samples, indexing="ij")
    inside = rr < barenblatt_support_radius(n, p, mass_const, tt)
    vals = fun(rr, tt)
    return float(np.max(np.abs(vals[inside])))


def _flat_geometry(n: int) -> WarpedGeometry:
    from .symfun import constant_profile

    return WarpedGeometry(
        n=n, m=float(n), warp=Profile(R, "psi"), conformal=constant_profile(1.0, "a"),
        potential=constant_profile(0.0, "phi"), r_max=1e9, family="static-warp",
        mode="pole", name="flat",
    )


# ---------------------------------------------------------------------------
# finite-volume semi-implicit solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PdeParams:
    """Exponent, forcing, positivity floor and boundary policy."""

    p: float
    nonlinearity: Nonlinearity
    positivity_floor: float
    outer_boundary: str = "neumann-zero"  # or "dirichlet-oracle"
    oracle: object = None  # u(r, t) callable for dirichlet-oracle boundaries
    substeps: int = 1

    def __post_init__(self):
        if self.p <= 1:
            raise SolverError("exponent p must exceed 1")
        if self.positivity_floor <= 0:
            raise SolverError("positivity floor must be positive")
        if self.outer_boundary not in ("neumann-zero", "dirichlet-oracle"):
            raise SolverError(f"unknown boundary policy {self.outer_boundary!r}")
        if self.outer_boundary == "dirichlet-oracle" and self.oracle is None:
            raise SolverError("dirichlet-oracle boundary needs an oracle")
        if self.substeps < 1:
            raise SolverError("substeps must be >= 1")


@dataclass
class SolveResult:
    u: ScalarField
    v: ScalarField
    clamp_events: int
    clamp_fraction: float
    meta: dict = field(default_factory=dict)


def _cell_masses(J, r_nodes, dr, r_max):
    m = np.empty_like(r_nodes)
    for i, r in enumerate(r_nodes):
        lo = max(r - dr / 2, 0.0)
        hi = min(r + dr / 2, r_max)
        m[i] = (hi - lo) / 6.0 * (J(lo) + 4.0 * J(0.5 * (lo + hi)) + J(hi))
    return m


def step(u: np.ndarray, geom: WarpedGeometry, params: PdeParams, grid: Grid,
         t: float, dt: float):
    """One semi-implicit step from t to t + dt; returns (u_new, clamp_count)."""
    r = grid.r
    dr = grid.dr
    t_new = t + dt
    Jprof = geom.volume_density_profile()
    J = lambda rr: float(Jprof(rr, t_new))
    faces = r[:-1] + dr / 2
    Jf = np.array([J(x) for x in faces])
    masses = _cell_masses(J, r, dr, grid.r_max)

    kappa = params.p * (0.5 * (u[:-1] + u[1:])) ** (params.p - 1)
    a2 = float(geom.conformal(0.0, t_new)) ** 2
    w = Jf * kappa / (a2 * dr)

    src = params.nonlinearity.source(t, r, u, params.p)

    n = len(r)
    diag = masses / dt
    lower = np.zeros(n)
    upper = np.zeros(n)
    rhs = masses / dt * u + masses * src
    diag = diag.copy()
    diag[1:] += w
    lower[1:] = -w
    diag[:-1] += w
    upper[:-1] = -w
    if params.outer_boundary == "dirichlet-oracle":
        diag[-1] = 1.0
        lower[-1] = 0.0
        rhs[-1] = float(params.oracle(grid.r_max, t_new))
    # no-flux at the pole/inner face is automatic: no flux term added there

    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    try:
        u_new = solve_banded((1, 1), ab, rhs)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"linear solve failed at t = {t_new:.6g}: {exc}")
    if not np.all(np.isfinite(u_new)):
        raise SolverError(f"non-finite state at t = {t_new:.6g}")
    clamped = u_new < params.positivity_floor
    u_new = np.maximum(u_new, params.positivity_floor)
    return u_new, int(np.count_nonzero(clamped))


def solve(initial, geom: WarpedGeometry, params: PdeParams, grid: Grid,
          clamp_warn_fraction: float = 0.01) -> SolveResult:
    """March the semi-implicit scheme across the grid's time nodes."""
    r = grid.r
    t_nodes = grid.t
    u = np.asarray(initial(r, t_nodes[0]) if callable(initial) else initial, dtype=float).copy()
    if u.shape != (grid.n_r,):
        raise SolverError("initial data shape does not match the grid")
    if np.any(u < params.positivity_floor):
        raise SolverError("initial data below the positivity floor")
    U = np.zeros((grid.n_r, grid.n_t))
    U[:, 0] = u
    clamps = 0
    for j in range(1, grid.n_t):
        t_prev = t_nodes[j - 1]
        sub_dt = (t_nodes[j] - t_prev) / params.substeps
        for s in range(params.substeps):
            u, c = step(u, geom, params, grid, t_prev + s * sub_dt, sub_dt)
            clamps += c
        U[:, j] = u
    total = grid.n_r * (grid.n_t - 1) * params.substeps
    frac = clamps / total
    meta = {
        "scheme": "semi-implicit lagged-coefficient finite volume",
        "clamp_events": clamps,
        "clamp_fraction": frac,
        "clamp_warning": frac > clamp_warn_fraction,
        "substeps": params.substeps,
    }
    u_field = ScalarField(U, grid, parity="even", positive=True)
    v_field = ScalarField(pressure(U, params.p), grid, parity="even", positive=True)
    return SolveResult(u=u_field, v=v_field, clamp_events=clamps, clamp_fraction=frac, meta=meta)


def weighted_mass(u: np.ndarray, geom: WarpedGeometry, grid: Grid, t: float) -> float:
    """Discrete weighted mass consistent with the scheme's cell masses."""
    Jprof = geom.volume_density_profile()
    J = lambda rr: float(Jprof(rr, t))
    masses = _cell_masses(J, grid.r, grid.dr, grid.r_max)
    return float(masses @ u)
