"""Numerical certification of the four sufficient conditions for minimaxity.

Each theorem asks for ``d >= 3``, ``0 <= alpha < (d-2)/(d-1)`` and
``0 <= phi <= 2 (d-2) gamma(d, p, alpha)`` (the *band*), plus

* T1 (known scale) / T3 (unknown scale): ``phi`` non-decreasing;
* T2 (known) / T4 (unknown): ``g_phi`` non-decreasing wherever ``phi`` is
  strictly below the band limit, and once ``phi`` reaches the limit it stays
  there (the *plateau* clause).

Conditions quantified over every ``v > 0`` are checked on a finite log grid;
the report records the grid so that a failure can be located.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from lpshrink.estimators import ShrinkageConfig, band_limit, shrinkage_exponent
from lpshrink.exceptions import DomainError, ValidationError

__all__ = ["Theorem", "Grid", "MinimaxReport", "g_phi", "log_g_phi", "check_minimax", "precondition_report"]

BAND_TOL = 1e-12
PLATEAU_TOL = 1e-9
MONOTONE_TOL = 1e-9
DERIV_TOL = 1e-12


class Theorem(str, enum.Enum):
    T1 = "t1"
    T2 = "t2"
    T3 = "t3"
    T4 = "t4"

    @property
    def unknown_scale(self) -> bool:
        return self in (Theorem.T3, Theorem.T4)

    @property
    def uses_g(self) -> bool:
        return self in (Theorem.T2, Theorem.T4)


@dataclass(frozen=True)
class Grid:
    """Log-spaced evaluation grid on ``[lo, hi]``."""

    lo: float = 1e-3
    hi: float = 1e3
    points: int = 2000

    def __post_init__(self):
        if not (0 < self.lo <= 1e-3 and self.hi >= 1e3):
            raise ValidationError(f"grid must cover at least [1e-3, 1e3], got [{self.lo}, {self.hi}]")
        if self.points < 1000:
            raise ValidationError(f"grid needs at least 1000 points, got {self.points}")

    def values(self) -> np.ndarray:
        return np.geomspace(self.lo, self.hi, self.points)

    def describe(self) -> str:
        return f"log[{self.lo:g}, {self.hi:g}] x {self.points}"


def _g_exponent(config: ShrinkageConfig, n: int | None) -> float:
    if n is None:
        return 1.0
    return 1.0 + 2.0 * shrinkage_exponent(config.d, config.alpha) / (n + 2)


def log_g_phi(x, config: ShrinkageConfig, n: int | None = None):
    """``log g_phi(x)``; ``nan`` where ``phi(x)`` is not strictly below the band limit.

    ``n=None`` is the known-scale functional
    ``x^K phi / (B - phi)``; an integer ``n`` gives the unknown-scale one with
    denominator exponent ``1 + 2K/(n+2)``. Here ``B = 2 (d-2) gamma``.
    """
    x = np.asarray(x, dtype=float)
    limit = band_limit(config.d, config.p, config.alpha)
    k = shrinkage_exponent(config.d, config.alpha)
    phi = np.asarray(config.phi_fn(x), dtype=float)
    gap = np.asarray(config.phi_fn.deficit(x, limit), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = k * np.log(x) + np.log(phi) - _g_exponent(config, n) * np.log(gap)
    out = np.where(gap > 0, out, np.nan)
    return float(out) if out.ndim == 0 else out


def g_phi(x: float, config: ShrinkageConfig, n: int | None = None) -> float:
    """Evaluate the Efron-Morris-type functional at one point.

    Raises:
        DomainError: if ``phi(x)`` is at or above the band limit, where the
            functional is not constrained (the plateau check covers it).
    """
    value = log_g_phi(float(x), config, n)
    if math.isnan(value):
        raise DomainError(f"g_phi is only defined where phi < 2(d-2)gamma; x={x!r}")
    return math.exp(value)


@dataclass(frozen=True)
class MinimaxReport:
    theorem: Theorem
    band_ok: bool
    monotone_ok: bool
    plateau_ok: bool
    alpha_ok: bool
    d_ok: bool
    grid: str
    verdict: bool
    band_limit: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        out = asdict(self)
        out["theorem"] = self.theorem.value
        return out


def _required(theorem: Theorem, flags: dict[str, bool]) -> bool:
    keys = ["d_ok", "alpha_ok", "band_ok", "monotone_ok"]
    if theorem.uses_g:
        keys.append("plateau_ok")
    return all(flags[k] for k in keys)


def precondition_report(theorem, d: int, alpha: float, grid: Grid | None = None, detail: str = "") -> MinimaxReport:
    """Report for a configuration whose band limit does not exist (``d < 3`` or ``alpha`` too large)."""
    theorem = Theorem(theorem)
    grid = grid or Grid()
    d_ok = int(d) == d and d >= 3
    alpha_ok = d_ok and 0 <= alpha < (d - 2) / (d - 1)
    return MinimaxReport(theorem, False, False, False, alpha_ok, d_ok, grid.describe(), False, None, detail)


def check_minimax(
    config: ShrinkageConfig, theorem, n: int | None = None, grid: Grid | None = None
) -> MinimaxReport:
    """Check the hypotheses of ``theorem`` for ``config`` on ``grid``."""
    theorem = Theorem(theorem)
    grid = grid or Grid()
    if theorem.unknown_scale and (n is None or int(n) != n or n < 1):
        raise ValidationError(f"{theorem.value} requires a positive integer n")
    d, alpha = config.d, config.alpha
    d_ok = d >= 3
    alpha_ok = d_ok and 0 <= alpha < (d - 2) / (d - 1)
    if not (d_ok and alpha_ok):
        return precondition_report(theorem, d, alpha, grid, "band limit undefined")

    limit = band_limit(d, config.p, alpha)
    x = grid.values()
    phi = np.asarray(config.phi_fn(x), dtype=float)
    gap = np.asarray(config.phi_fn.deficit(x, limit), dtype=float)
    notes = []

    band_ok = bool(np.all(phi >= 0) and np.all(phi <= limit + BAND_TOL))
    if not band_ok:
        bad = x[(phi < 0) | (phi > limit + BAND_TOL)]
        notes.append(f"phi leaves [0, {limit:.12g}] at x={bad[0]:.6g}")

    at_limit = ~(gap > 0)
    if np.any(at_limit):
        first = int(np.argmax(at_limit))
        tail = phi[first:]
        plateau_ok = bool(np.all(np.abs(tail - limit) <= PLATEAU_TOL))
        if not plateau_ok:
            notes.append(f"phi reaches the limit at x={x[first]:.6g} but leaves it afterwards")
    else:
        plateau_ok = True

    if theorem.uses_g:
        lg = log_g_phi(x, config, n if theorem.unknown_scale else None)
        below = ~np.isnan(lg)
        # log g is -inf where phi = 0; -inf -> -inf gives nan, which is not a drop.
        with np.errstate(invalid="ignore"):
            drops = np.diff(lg[below]) < -MONOTONE_TOL
        monotone_ok = not bool(np.any(drops))
        if not monotone_ok:
            notes.append("g_phi decreases on the grid")
    else:
        steps_ok = np.all(np.diff(phi) >= -BAND_TOL * np.maximum(1.0, np.abs(phi[:-1])))
        deriv = np.asarray(config.phi_fn.deriv(x), dtype=float)
        monotone_ok = bool(steps_ok and np.all(deriv >= -DERIV_TOL))
        if not monotone_ok:
            notes.append("phi decreases on the grid")

    flags = dict(d_ok=d_ok, alpha_ok=alpha_ok, band_ok=band_ok, monotone_ok=monotone_ok, plateau_ok=plateau_ok)
    return MinimaxReport(
        theorem,
        band_ok,
        monotone_ok,
        plateau_ok,
        alpha_ok,
        d_ok,
        grid.describe(),
        _required(theorem, flags),
        limit,
        "; ".join(notes),
    )
