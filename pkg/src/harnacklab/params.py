"""Harnack-exponent parameter bundles and the special (alpha, beta) presets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .symfun import Profile, T, constant_profile


class ParamError(ValueError):
    pass


@dataclass(frozen=True)
class AlphaBeta:
    """Time-dependent Harnack coefficient pair with closed-form derivatives."""

    alpha: Profile
    beta: Profile
    label: str = "custom"
    gamma: float | None = None
    flags: tuple = ()

    @property
    def is_constant(self) -> bool:
        return self.alpha.time_independent and self.beta.time_independent

    def alpha_at(self, t):
        return self.alpha(np.zeros_like(np.asarray(t, dtype=float)), t)

    def alpha_prime_at(self, t):
        return self.alpha.at(0, 1, np.zeros_like(np.asarray(t, dtype=float)), t)

    def beta_at(self, t):
        return self.beta(np.zeros_like(np.asarray(t, dtype=float)), t)

    def beta_prime_at(self, t):
        return self.beta.at(0, 1, np.zeros_like(np.asarray(t, dtype=float)), t)

    def check_admissible(self, t):
        a = self.alpha_at(t)
        if np.any(a <= 1.0):
            raise ParamError(f"alpha must exceed 1 on the window (min {np.min(a):.6g})")
        ap = self.alpha_prime_at(t)
        if np.any(ap < -1e-12):
            raise ParamError("alpha must be nondecreasing")

    def shifted(self, t0: float) -> "AlphaBeta":
        """Same pair on a clock starting at t0 (t -> t - t0)."""
        if t0 == 0:
            return self
        return AlphaBeta(
            Profile(self.alpha.expr.subs(T, T - t0), name=self.alpha.name),
            Profile(self.beta.expr.subs(T, T - t0), name=self.beta.name),
            label=f"{self.label} shifted by {t0:g}",
            gamma=self.gamma,
            flags=self.flags,
        )


def constant_alpha_beta(alpha: float, beta: float = 0.0) -> AlphaBeta:
    if alpha <= 1.0:
        raise ParamError(f"alpha must exceed 1, got {alpha}")
    return AlphaBeta(constant_profile(alpha, "alpha"), constant_profile(beta, "beta"),
                     label=f"const(alpha={alpha:g}, beta={beta:g})")


PRESETS = ("exp", "coth", "linear")


def preset_alpha_beta(which: str, gamma: float, b: float, degenerate_delta: float = 1e-6) -> AlphaBeta:
    """The three special coefficient pairs with their defining ODEs.

    ``gamma`` plays the role of the aggregate rate (m-1) k (p-1) sup(v); the
    coth and linear presets are singular at t = 0 and must be evaluated at
    t > 0.  With gamma = 0 the exponential preset degenerates to alpha == 1;
    the returned pair substitutes alpha = 1 + degenerate_delta and flags it.
    """
    if which not in PRESETS:
        raise ParamError(f"unknown alpha/beta preset {which!r}")
    if gamma < 0:
        raise ParamError("gamma must be non-negative")
    g = sp.Float(gamma)
    flags = ()
    if which == "exp":
        if gamma == 0:
            alpha = constant_profile(1.0 + degenerate_delta, "alpha")
            flags = ("degenerate-alpha-substituted",)
        else:
            alpha = Profile(sp.exp(2 * g * T), "alpha")
        beta = constant_profile(0.0, "beta")
    elif which == "coth":
        if gamma == 0:
            raise ParamError("coth preset requires gamma > 0")
        s = sp.sinh(g * T)
        alpha = Profile(1 + (sp.cosh(g * T) * s - g * T) / s**2, "alpha")
        beta = Profile(b * g * (sp.coth(g * T) + 1), "beta")
    else:
        if gamma == 0:
            raise ParamError("linear preset requires gamma > 0")
        alpha = Profile(1 + 2 * g * T / 3, "alpha")
        beta = Profile(b * (1 / T + g + g**2 * T / 3), "beta")
    return AlphaBeta(alpha, beta, label=f"{which}(gamma={gamma:g})", gamma=gamma, flags=flags)


def preset_ode_residuals(pair: AlphaBeta, which: str, b: float, t) -> dict[str, dict]:
    """Residuals of the defining ODEs of each preset on a time grid.

    Each entry carries the raw residual and the scale of the ODE's terms at
    that time; the singular presets have terms of size 1/t^2 near t = 0, so
    residual tolerances are meaningful relative to the scale.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) and which in ("coth", "linear"):
        raise ParamError("coth/linear presets are singular at t = 0")
    g = pair.gamma if pair.gamma is not None else 0.0
    a = pair.alpha_at(t)
    ap = pair.alpha_prime_at(t)
    be = pair.beta_at(t)
    bp = pair.beta_prime_at(t)

    def entry(residual, *terms):
        scale = np.maximum(1.0, sum(np.abs(x) for x in terms))
        return {"residual": residual, "scale": scale}

    if which == "exp":
        return {"2*gamma*alpha - alpha'": entry(2 * g * a - ap, 2 * g * a, ap)}
    if which == "coth":
        return {
            "2*beta/b - alpha' - 2*alpha*(beta/b - gamma)":
                entry(2 * be / b - ap - 2 * a * (be / b - g),
                      2 * be / b, ap, 2 * a * (be / b - g)),
            "beta' + 2*(beta/b - gamma)*beta - beta^2/b":
                entry(bp + 2 * (be / b - g) * be - be**2 / b,
                      bp, 2 * (be / b - g) * be, be**2 / b),
        }
    if which == "linear":
        return {
            "2*(1/t + gamma) - alpha' - 2*alpha/t":
                entry(2 * (1 / t + g) - ap - 2 * a / t,
                      2 * (1 / t + g), ap, 2 * a / t),
            "beta' + 2*beta/t - b*(1/t + gamma)^2":
                entry(bp + 2 * be / t - b * (1 / t + g) ** 2,
                      bp, 2 * be / t, b * (1 / t + g) ** 2),
        }
    raise ParamError(f"unknown preset {which!r}")


@dataclass(frozen=True)
class HarnackParams:
    """Exponents and coefficient functions entering the gradient estimates."""

    p: float
    m: float
    coeffs: AlphaBeta
    eps: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.p <= 1:
            raise ParamError(f"exponent p must exceed 1, got {self.p}")
        if self.m < 2:
            raise ParamError("synthetic dimension m must be at least 2")

    @property
    def b(self) -> float:
        mp = self.m * (self.p - 1)
        return mp / (1.0 + mp)

    def eps_ceiling(self, t, mode: str = "first") -> float:
        """Largest admissible eps over a time grid, per estimate family."""
        a = self.coeffs.alpha_at(t)
        if mode == "first":
            cap = 2 * (a - 1) ** 2 / (self.b * a**2)
        elif mode == "second":
            cap = 2 * (a - 1) ** 2 / (self.b * a**3)
        else:
            raise ParamError(f"unknown estimate family {mode!r}")
        return float(np.min(cap))

    def require_eps(self, eps: float, t, mode: str = "first"):
        cap = self.eps_ceiling(t, mode)
        bound = "2(alpha-1)^2/(b alpha^2)" if mode == "first" else "2(alpha-1)^2/(b alpha^3)"
        if cap <= 0:
            raise ParamError(
                f"no admissible eps: {bound} vanishes on the window because "
                "alpha reaches 1 (preset pairs need a positive clock_offset)"
            )
        if not 0 < eps < cap:
            raise ParamError(
                f"eps = {eps:.6g} violates 0 < eps < {bound} = {cap:.6g} for the {mode} estimate"
            )
