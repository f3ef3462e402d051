"""Uniform space-time grids, finite-difference stencils and cylinder suprema.

All stencils are second order: centered in the interior, one-sided
three/four-point at boundaries, and symmetry-based at the pole.  Fields on a
pole grid are radial restrictions of smooth rotationally symmetric functions,
so scalar fields are even in r and their first radial derivatives odd; the
pole stencils encode that parity.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

DIFF_KINDS = ("d_r", "d_rr", "d_t")


class FieldError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [0, r_max] x [t0, t0 + duration]."""

    n_r: int
    n_t: int
    r_max: float
    t0: float
    duration: float
    pole: bool = True

    def __post_init__(self):
        if self.n_r < 8:
            raise FieldError("need at least 8 radial nodes")
        if self.n_t < 4:
            raise FieldError("need at least 4 time nodes")
        if self.r_max <= 0 or self.duration <= 0:
            raise FieldError("grid extents must be positive")

    @property
    def dr(self) -> float:
        return self.r_max / (self.n_r - 1)

    @property
    def dt(self) -> float:
        return self.duration / (self.n_t - 1)

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, self.r_max, self.n_r)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.linspace(0.0, self.duration, self.n_t)

    def mesh(self):
        return np.meshgrid(self.r, self.t, indexing="ij")

    def refined(self, factor_r: int = 2, factor_t: int = 2) -> "Grid":
        """Halve spacings (node counts 2N-1) so nodes nest."""
        return Grid(
            n_r=factor_r * (self.n_r - 1) + 1,
            n_t=factor_t * (self.n_t - 1) + 1,
            r_max=self.r_max,
            t0=self.t0,
            duration=self.duration,
            pole=self.pole,
        )


@dataclass(frozen=True)
class ScalarField:
    """Grid function indexed (i_r, j_t)."""

    values: np.ndarray
    grid: Grid
    parity: str = "even"  # parity in r about the pole: "even" | "odd"
    positive: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.grid.n_r, self.grid.n_t):
            raise FieldError(f"values shape {vals.shape} does not match grid "
                             f"({self.grid.n_r}, {self.grid.n_t})")
        if not np.all(np.isfinite(vals)):
            raise FieldError("field contains non-finite values")
        if self.parity not in ("even", "odd"):
            raise FieldError("parity must be 'even' or 'odd'")
        if self.positive and np.any(vals <= 0):
            raise FieldError("field tagged positive has non-positive entries")

    @staticmethod
    def from_function(fun, grid: Grid, parity: str = "even", positive: bool = False) -> "ScalarField":
        rr, tt = grid.mesh()
        return ScalarField(fun(rr, tt), grid, parity=parity, positive=positive)


def _d1(vals, h, axis, pole, parity):
    a = np.moveaxis(vals, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - a[:-2]) / (2 * h)
    if pole:
        # ghost value by reflection: even -> f(-h) = f(h), odd -> f(-h) = -f(h)
        out[0] = 0.0 if parity == "even" else a[1] / h
    else:
        out[0] = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * h)
    out[-1] = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def _d2(vals, h, axis, pole, parity):
    a = np.moveaxis(vals, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
    if pole:
        out[0] = 2 * (a[1] - a[0]) / h**2 if parity == "even" else 0.0
    else:
        out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h**2
    out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def diff(fld: ScalarField, which: str) -> ScalarField:
    """Second-order finite difference of a field."""
    if which not in DIFF_KINDS:
        raise FieldError(f"unknown derivative {which!r}")
    g = fld.grid
    if which == "d_t":
        if g.n_t < 4:
            raise FieldError("too few time nodes to differentiate")
        vals = _d1(fld.values, g.dt, 1, pole=False, parity=fld.parity)
        return ScalarField(vals, g, parity=fld.parity)
    if g.n_r < 4:
        raise FieldError("too few radial nodes to differentiate")
    if which == "d_r":
        vals = _d1(fld.values, g.dr, 0, pole=g.pole, parity=fld.parity)
        flipped = "odd" if fld.parity == "even" else "even"
        return ScalarField(vals, g, parity=flipped)
    vals = _d2(fld.values, g.dr, 0, pole=g.pole, parity=fld.parity)
    return ScalarField(vals, g, parity=fld.parity)


def weighted_laplacian(fld: ScalarField, geom) -> ScalarField:
    """a^-2 (d_rr + D d_r) with the pole row replaced by n * d_rr / a^2."""
    g = fld.grid
    rr, tt = g.mesh()
    w_r = diff(fld, "d_r").values
    w_rr = diff(fld, "d_rr").values
    a2 = geom.conformal(rr, tt) ** 2
    from .geometry import drift_coefficient

    out = np.empty_like(fld.values)
    if g.pole:
        D = drift_coefficient(geom, rr[1:], tt[1:])
        out[1:] = (w_rr[1:] + D * w_r[1:]) / a2[1:]
        out[0] = geom.n * w_rr[0] / a2[0]
    else:
        D = drift_coefficient(geom, rr, tt)
        out = (w_rr + D * w_r) / a2
    return ScalarField(out, g, parity=fld.parity)


def sup_over_cylinder(fld: ScalarField, cyl, geom):
    """Maximum of the field over grid nodes inside the cylinder, with argmax."""
    g = fld.grid
    mask = cyl.mask(g.r, g.t, geom)
    if not np.any(mask):
        raise FieldError("cylinder does not intersect the grid")
    vals = np.where(mask, fld.values, -np.inf)
    flat = int(np.argmax(vals))
    i, j = np.unravel_index(flat, vals.shape)
    return float(vals[i, j]), (float(g.r[i]), float(g.t[j]))


def convergence_order(samples) -> float:
    """Least-squares slope of log(err) against log(h)."""
    samples = list(samples)
    if len(samples) < 3:
        raise FieldError("need at least 3 (h, err) samples")
    h = np.asarray([s[0] for s in samples], dtype=float)
    e = np.asarray([s[1] for s in samples], dtype=float)
    if np.any(np.diff(h) >= 0):
        raise FieldError("h must be strictly decreasing")
    if np.any(e <= 0):
        raise FieldError("errors must be positive")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def field_to_csv(fld: ScalarField, path, header=("r", "t", "value")):
    g = fld.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, r in enumerate(g.r):
            for j, t in enumerate(g.t):
                writer.writerow([f"{r:.12g}", f"{t:.12g}", f"{fld.values[i, j]:.12g}"])
