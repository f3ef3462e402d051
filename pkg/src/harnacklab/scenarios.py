"""Scenario configuration: JSON documents -> validated computational setups.

A scenario bundles a geometry, a pressure field (exact oracle, manufactured
closed form, or numeric solve), the Harnack parameters and the verification
settings.  Unknown keys are rejected with the path to the offending key so
configuration typos fail loudly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .fields import Grid
from .geometry import WarpedGeometry
from .identities import AnalyticSolution, GridSolution
from .params import AlphaBeta, HarnackParams, constant_alpha_beta, preset_alpha_beta
from .solver import (Nonlinearity, PdeParams, PowerSumNonlinearity, SolveResult,
                     barenblatt_oracle, barenblatt_pressure_profile,
                     barenblatt_support_radius, manufactured_forcing,
                     power_sum_with_closure, pressure_inverse, solve,
                     validate_barenblatt)
from .symfun import Profile, R, T


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _check_keys(doc: dict, allowed, path: str):
    if not isinstance(doc, dict):
        raise ConfigError(path, f"expected an object, got {type(doc).__name__}")
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}.{key}", "missing required key")
    return doc[key]


def _expr(text, path: str) -> sp.Expr:
    try:
        return sp.sympify(text, locals={"r": R, "t": T})
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(path, f"cannot parse expression: {exc}")


GEOMETRY_PRESETS = {
    "euclidean": {"warp": R, "potential": sp.Integer(0)},
    "hyperbolic": {"warp": sp.sinh(R), "potential": sp.Integer(0)},
    "sphere": {"warp": sp.sin(R), "potential": sp.Integer(0)},
    "gaussian-weight": {"warp": R, "potential": R**2 / 2},
}

MANUFACTURED_CATALOG = {
    # warp-adapted positive fields: radial derivative carries the warp factor
    "bump": "2 + exp(-t)*exp(-r**2/4) + r**2*exp(-2*t)/8",
    "cosh-bump": "2 + exp(-t)*(3 + cosh(r))/8",
    "cos-bump": "2 + exp(-t)*(3 + cos(r))/8",
}

DEFAULTS = {
    "grid": {"n_r": 257, "n_t": 129},
    "floor_fraction": 1e-6,
    "tolerance_factor": 1e-6,
    "harnack_tolerance_factor": 1e-8,
    "eps_fractions": [0.1, 0.5, 0.9],
    "sup_density": [129, 65],
    "eval_density": [65, 33],
    "pairs": 120,
    "variants": ["first-local", "first-global", "second-local", "second-global"],
}


def parse_geometry(doc: dict, m: float, path: str = "geometry") -> WarpedGeometry:
    allowed = {"preset", "n", "r_max", "mode", "warp", "conformal", "potential",
               "conformal_rate", "warp_rate", "potential_drift"}
    _check_keys(doc, allowed, path)
    n = _require(doc, "n", path)
    if not isinstance(n, int) or n < 2:
        raise ConfigError(f"{path}.n", "dimension must be an integer >= 2")
    r_max = float(_require(doc, "r_max", path))
    preset = doc.get("preset")
    preset_rate = None
    if preset is not None:
        # parameterized spellings: conformal-exp(rate), linear-warp(rate)
        match = re.fullmatch(r"(conformal-exp|linear-warp)\(([-+0-9.eE]+)\)", preset)
        if match:
            preset_rate = (match.group(1), float(match.group(2)))
            preset = "euclidean"
        if preset not in GEOMETRY_PRESETS:
            raise ConfigError(f"{path}.preset",
                              f"unknown preset; choose from {sorted(GEOMETRY_PRESETS)} "
                              "or conformal-exp(rate) / linear-warp(rate)")
        warp_expr = GEOMETRY_PRESETS[preset]["warp"]
        pot_expr = GEOMETRY_PRESETS[preset]["potential"]
    else:
        warp_expr = _expr(_require(doc, "warp", path), f"{path}.warp")
        pot_expr = _expr(doc.get("potential", 0), f"{path}.potential")
    if "potential" in doc and preset is not None:
        pot_expr = _expr(doc["potential"], f"{path}.potential")
    drift = float(doc.get("potential_drift", 0.0))
    if drift:
        pot_expr = pot_expr * (1 + drift * T)
    conf_expr = sp.Integer(1)
    if "conformal" in doc:
        conf_expr = _expr(doc["conformal"], f"{path}.conformal")
    rate = float(doc.get("conformal_rate", 0.0))
    if preset_rate and preset_rate[0] == "conformal-exp":
        rate = preset_rate[1]
    if rate:
        conf_expr = sp.exp(rate * T)
    warp_rate = float(doc.get("warp_rate", 0.0))
    if preset_rate and preset_rate[0] == "linear-warp":
        warp_rate = preset_rate[1]
    if warp_rate:
        warp_expr = 1 + (1 + warp_rate * T) * R
    if warp_expr.has(T):
        family = "evolving-warp"
        mode_default = "annulus"
    elif conf_expr.has(T):
        family = "conformal-evolving"
        mode_default = "pole"
    else:
        family = "static-warp"
        mode_default = "pole"
    mode = doc.get("mode", mode_default)
    try:
        return WarpedGeometry(
            n=n, m=float(m), warp=Profile(warp_expr, "warp"),
            conformal=Profile(conf_expr, "conformal"),
            potential=Profile(pot_expr, "potential"),
            r_max=r_max, family=family, mode=mode,
            name=preset or "custom",
        )
    except ValueError as exc:
        raise ConfigError(path, str(exc))


def parse_alpha_beta(doc: dict, b: float, path: str) -> AlphaBeta:
    alpha = doc.get("alpha", 2.0)
    beta = doc.get("beta", 0.0)
    if isinstance(alpha, dict):
        _check_keys(alpha, {"preset", "gamma", "clock_offset"}, f"{path}.alpha")
        which = _require(alpha, "preset", f"{path}.alpha")
        gamma = float(_require(alpha, "gamma", f"{path}.alpha"))
        # every preset starts at alpha = 1, where no eps is admissible; a
        # positive offset reads the pair further along its own clock, which
        # is still an admissible coefficient pair for the estimates
        offset = float(alpha.get("clock_offset", 0.0))
        if offset < 0:
            raise ConfigError(f"{path}.alpha.clock_offset", "must be non-negative")
        try:
            pair = preset_alpha_beta(which, gamma, b)
        except ValueError as exc:
            raise ConfigError(f"{path}.alpha", str(exc))
        return pair.shifted(-offset) if offset else pair
    alpha = float(alpha)
    if alpha <= 1.0:
        raise ConfigError(f"{path}.alpha", f"alpha must exceed 1 (got {alpha:g})")
    return constant_alpha_beta(alpha, float(beta))


def parse_nonlinearity(doc, path: str):
    """Returns (form, power-part or None); closure forcing is attached later."""
    if doc is None:
        return "zero", None
    _check_keys(doc, {"form", "A", "a", "B", "b"}, path)
    form = _require(doc, "form", path)
    if form == "zero":
        return "zero", None
    if form == "power-sum":
        try:
            power = PowerSumNonlinearity(
                A=doc.get("A", ()), a=doc.get("a", ()),
                B=doc.get("B", ()), b=doc.get("b", ()),
            )
        except Exception as exc:
            raise ConfigError(path, str(exc))
        return "power-sum", power
    raise ConfigError(f"{path}.form", f"unknown nonlinearity form {form!r}")


@dataclass
class Scenario:
    name: str
    seed: int
    geom: WarpedGeometry
    params: HarnackParams
    nonlinearity: Nonlinearity
    grid: Grid
    solution_kind: str            # "barenblatt" | "manufactured" | "numeric"
    v_profile: Profile | None     # closed form of the pressure (if any)
    oracle_u: object              # u(r, t) callable or None
    pde: PdeParams | None
    verification: dict
    t0: float
    duration: float
    numeric_base: str = ""
    _solve_cache: SolveResult | None = field(default=None, repr=False)

    @property
    def t_hi(self) -> float:
        return self.t0 + self.duration

    def analytic_handle(self) -> AnalyticSolution:
        if self.v_profile is None:
            raise ConfigError("solution", "scenario has no closed-form pressure field")
        return AnalyticSolution(self.v_profile)

    def run_solver(self) -> SolveResult:
        if self.pde is None:
            raise ConfigError("solution", "scenario is not configured for a numeric solve")
        if self._solve_cache is None:
            initial = lambda r, t: self.oracle_u(r, t)
            self._solve_cache = solve(initial, self.geom, self.pde, self.grid)
        return self._solve_cache

    def solution_handle(self):
        if self.solution_kind == "numeric":
            return GridSolution(self.run_solver().v)
        return self.analytic_handle()


def parse_scenario(doc: dict) -> Scenario:
    allowed = {"name", "seed", "geometry", "harnack", "pde", "solution", "time",
               "verification"}
    _check_keys(doc, allowed, "")
    name = doc.get("name", "scenario")
    seed = int(doc.get("seed", 20260809))

    harnack = doc.get("harnack", {})
    _check_keys(harnack, {"m", "alpha", "beta", "eps_fractions"}, "harnack")
    m = float(_require(harnack, "m", "harnack"))

    geom = parse_geometry(_require(doc, "geometry", ""), m, "geometry")

    pde_doc = doc.get("pde", {})
    _check_keys(pde_doc, {"p", "nonlinearity", "grid", "boundary", "floor_fraction",
                          "substeps"}, "pde")
    p = float(_require(pde_doc, "p", "pde"))
    if p <= 1:
        raise ConfigError("pde.p", f"exponent must exceed 1 (got {p:g})")

    coeffs = parse_alpha_beta(harnack, b=m * (p - 1) / (1 + m * (p - 1)), path="harnack")
    try:
        params = HarnackParams(p=p, m=m, coeffs=coeffs)
    except ValueError as exc:
        raise ConfigError("harnack", str(exc))

    time_doc = doc.get("time", {})
    _check_keys(time_doc, {"t0", "duration"}, "time")
    t0 = float(time_doc.get("t0", 1.0))
    duration = float(time_doc.get("duration", 1.0))
    if duration <= 0:
        raise ConfigError("time.duration", "must be positive")
    if t0 < 0:
        raise ConfigError("time.t0", "must be non-negative")

    grid_doc = pde_doc.get("grid", {})
    _check_keys(grid_doc, {"n_r", "n_t"}, "pde.grid")
    n_r = int(grid_doc.get("n_r", DEFAULTS["grid"]["n_r"]))
    n_t = int(grid_doc.get("n_t", DEFAULTS["grid"]["n_t"]))
    try:
        grid = Grid(n_r=n_r, n_t=n_t, r_max=geom.r_max, t0=t0, duration=duration,
                    pole=(geom.mode == "pole"))
    except ValueError as exc:
        raise ConfigError("pde.grid", str(exc))

    form, power = parse_nonlinearity(pde_doc.get("nonlinearity"), "pde.nonlinearity")

    sol_doc = _require(doc, "solution", "")
    _check_keys(sol_doc, {"kind", "mass_const", "expr", "catalog", "base"}, "solution")
    kind = _require(sol_doc, "kind", "solution")

    v_profile = None
    oracle_u = None
    pde = None
    numeric_base = ""
    nl: Nonlinearity

    def _manufactured_profile(src_doc, path):
        if "expr" in src_doc:
            expr = _expr(src_doc["expr"], f"{path}.expr")
        else:
            key = src_doc.get("catalog", "bump")
            if key not in MANUFACTURED_CATALOG:
                raise ConfigError(f"{path}.catalog",
                                  f"unknown catalog entry; choose from {sorted(MANUFACTURED_CATALOG)}")
            expr = _expr(MANUFACTURED_CATALOG[key], f"{path}.catalog")
        return Profile(expr, "manufactured_pressure")

    def _require_flat_static(path):
        flat = geom.is_static and geom.warp.expr == R and geom.potential.is_constant()
        if not flat:
            raise ConfigError(path, "the self-similar oracle needs static euclidean geometry")

    if kind == "barenblatt":
        if form != "zero":
            raise ConfigError("pde.nonlinearity",
                              "the self-similar oracle requires zero forcing")
        _require_flat_static("solution")
        C = float(sol_doc.get("mass_const", 1.0))
        if t0 <= 0:
            raise ConfigError("time.t0", "the self-similar oracle requires t0 > 0")
        support = barenblatt_support_radius(geom.n, p, C, t0)
        if support <= geom.r_max:
            raise ConfigError("solution.mass_const",
                              f"support radius {support:.4g} at t0 must exceed r_max")
        resid = validate_barenblatt(geom.n, p, C)
        if resid > 1e-9:
            raise ConfigError("solution", f"oracle failed the substitution check ({resid:.3e})")
        v_profile = barenblatt_pressure_profile(geom.n, p, C)
        oracle_u = lambda r, t: barenblatt_oracle(geom.n, p, C, r, t)
        nl = Nonlinearity()
        kind_out = "barenblatt"
    elif kind == "manufactured":
        v_profile = _manufactured_profile(sol_doc, "solution")
        if power is None:
            nl = manufactured_forcing(v_profile, geom, p)
        else:
            nl = power_sum_with_closure(power, v_profile, geom, p)
        oracle_u = _oracle_from_profile(v_profile, p)
        kind_out = "manufactured"
    elif kind == "numeric":
        base = sol_doc.get("base", "manufactured")
        numeric_base = base
        if base == "barenblatt":
            C = float(sol_doc.get("mass_const", 1.0))
            if form != "zero":
                raise ConfigError("pde.nonlinearity", "self-similar base requires zero forcing")
            _require_flat_static("solution")
            if t0 <= 0:
                raise ConfigError("time.t0", "the self-similar oracle requires t0 > 0")
            support = barenblatt_support_radius(geom.n, p, C, t0)
            if support <= geom.r_max:
                raise ConfigError("solution.mass_const",
                                  f"support radius {support:.4g} at t0 must exceed r_max")
            resid = validate_barenblatt(geom.n, p, C)
            if resid > 1e-9:
                raise ConfigError("solution", f"oracle failed the substitution check ({resid:.3e})")
            v_profile = barenblatt_pressure_profile(geom.n, p, C)
            oracle_u = lambda r, t: barenblatt_oracle(geom.n, p, C, r, t)
            nl = Nonlinearity()
        elif base == "manufactured":
            v_profile = _manufactured_profile(sol_doc, "solution")
            if power is None:
                nl = manufactured_forcing(v_profile, geom, p)
            else:
                nl = power_sum_with_closure(power, v_profile, geom, p)
            oracle_u = _oracle_from_profile(v_profile, p)
        else:
            raise ConfigError("solution.base", f"unknown numeric base {base!r}")
        kind_out = "numeric"
    else:
        raise ConfigError("solution.kind", f"unknown kind {kind!r}")

    if kind_out == "numeric" or oracle_u is not None:
        floor_frac = float(pde_doc.get("floor_fraction", DEFAULTS["floor_fraction"]))
        u0 = oracle_u(grid.r, t0)
        floor = max(floor_frac * float(np.max(u0)), 1e-300)
        boundary = pde_doc.get("boundary", "dirichlet-oracle")
        try:
            pde = PdeParams(p=p, nonlinearity=nl, positivity_floor=floor,
                            outer_boundary=boundary, oracle=oracle_u,
                            substeps=int(pde_doc.get("substeps", 1)))
        except Exception as exc:
            raise ConfigError("pde", str(exc))

    ver_doc = doc.get("verification", {})
    _check_keys(ver_doc, {"variants", "radius", "tolerance_factor", "pairs",
                          "sup_density", "eval_density", "eps_fractions",
                          "harnack_tolerance_factor"}, "verification")
    variants = ver_doc.get("variants", list(DEFAULTS["variants"]))
    from .estimates import VARIANTS

    for v in variants:
        if v not in VARIANTS:
            raise ConfigError("verification.variants", f"unknown variant {v!r}")
    radius = float(ver_doc.get("radius", 0.45 * geom.r_max))
    verification = {
        "variants": variants,
        "radius": radius,
        "tolerance_factor": float(ver_doc.get("tolerance_factor",
                                              DEFAULTS["tolerance_factor"])),
        "harnack_tolerance_factor": float(ver_doc.get("harnack_tolerance_factor",
                                                      DEFAULTS["harnack_tolerance_factor"])),
        "pairs": int(ver_doc.get("pairs", DEFAULTS["pairs"])),
        "sup_density": tuple(ver_doc.get("sup_density", DEFAULTS["sup_density"])),
        "eval_density": tuple(ver_doc.get("eval_density", DEFAULTS["eval_density"])),
        "eps_fractions": tuple(harnack.get("eps_fractions", DEFAULTS["eps_fractions"])),
    }

    geom.validate_on(t0, t0 + duration)
    coeffs.check_admissible(np.linspace(duration / 256, duration, 64))

    return Scenario(
        name=name, seed=seed, geom=geom, params=params, nonlinearity=nl,
        grid=grid, solution_kind=kind_out, v_profile=v_profile, oracle_u=oracle_u,
        pde=pde, verification=verification, t0=t0, duration=duration,
        numeric_base=numeric_base,
    )


def _oracle_from_profile(v_profile: Profile, p: float):
    def oracle(r, t):
        v = v_profile(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
        return pressure_inverse(v, p)

    return oracle


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"invalid JSON: {exc}")
    return parse_scenario(doc)
