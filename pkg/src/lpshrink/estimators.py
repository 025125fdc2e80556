"""The lp-norm shrinkage estimator family and its shrinkage functions.

Component ``i`` of an estimate is

    (1 - sig2 * phi(||z||_p / sig) / (||z||_p^(2 - alpha) * |z_i|^alpha)) * z_i

with ``sig2`` the known variance or, in unknown-scale mode, ``s / (n + 2)``.
With ``p = 2, alpha = 0`` and constant ``phi`` this is the James-Stein
estimator; with ``p = 2 - alpha`` it is the Zhou-Hwang estimator (see
:func:`zhou_hwang_config`). The positive-part variant clamps the factor at 0,
which zeroes the coordinates listed by :func:`zero_set` when ``alpha > 0``.

Conventions where the formula is singular: a coordinate ``z_i = 0`` is
estimated by 0 (the correction ``|z_i|^(1 - alpha)`` vanishes there since
``alpha < 1``), and the zero vector is mapped to the zero vector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit

from lpshrink.exceptions import ValidationError
from lpshrink.norms import PNorm, as_pnorm, format_pnorm, lp_norm, lp_norm_power, reciprocal

__all__ = [
    "ScaleMode",
    "PhiKind",
    "PhiSpec",
    "PhiFunction",
    "ConstantPhi",
    "RationalPhi",
    "ShrinkageConfig",
    "Observation",
    "gamma",
    "band_limit",
    "shrinkage_exponent",
    "unknown_ds_exponent",
    "phi_make",
    "parse_phi_spec",
    "shrink",
    "shrink_batch",
    "zero_set",
    "sparsity_threshold",
    "james_stein",
    "zhou_hwang_config",
]


class ScaleMode(str, enum.Enum):
    KNOWN = "known"
    UNKNOWN = "unknown"


def _check_minimax_range(d: int, alpha: float) -> None:
    if int(d) != d or d < 3:
        raise ValidationError(f"d must be an integer >= 3, got d={d!r}")
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got alpha={alpha!r}")
    bound = (d - 2) / (d - 1)
    if not alpha < bound:
        raise ValidationError(f"alpha must be < (d-2)/(d-1) = {bound:.6g}, got alpha={alpha!r}")


def gamma(d: int, p: PNorm, alpha: float) -> float:
    """``min(1, d^((2-p-alpha)/p)) * (1 - alpha (d-1)/(d-2))``.

    For ``p = INFINITY`` the first factor is its limit ``1/d``.
    """
    _check_minimax_range(d, alpha)
    p = as_pnorm(p)
    exponent = (2.0 - alpha) * reciprocal(p) - 1.0
    return min(1.0, d**exponent) * (1.0 - alpha * (d - 1) / (d - 2))


def band_limit(d: int, p: PNorm, alpha: float) -> float:
    """Upper end ``2 (d-2) gamma(d, p, alpha)`` of the admissible band for phi."""
    return 2.0 * (d - 2) * gamma(d, p, alpha)


def shrinkage_exponent(d: int, alpha: float) -> float:
    """``K = d - 2 - alpha (d - 1)``, the power appearing in g_phi and phi_DS."""
    return d - 2 - alpha * (d - 1)


def unknown_ds_exponent(d: int, alpha: float, n: int) -> float:
    """Exponent ``l = K / (1 + 2K/(n+2))`` of the unknown-scale phi_DS variant."""
    k = shrinkage_exponent(d, alpha)
    return k / (1.0 + 2.0 * k / (n + 2))


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


class PhiFunction:
    """A bounded, non-negative shrinkage function ``v -> phi(v)`` with its derivative.

    Subclasses implement :meth:`__call__` and :meth:`deriv`. The remaining
    methods have generic definitions that subclasses may sharpen numerically.
    """

    label: str = "phi"
    sup: float = math.inf

    def __call__(self, v):
        raise NotImplementedError

    def deriv(self, v):
        raise NotImplementedError

    def elasticity(self, v):
        """``v * phi'(v) / phi(v)``, taken as 0 wherever ``phi = phi' = 0``.

        Entries with ``phi = 0`` but ``phi' != 0`` come back as ``nan``;
        callers turn those into a :class:`DomainError`.
        """
        v = np.asarray(v, dtype=float)
        val = np.asarray(self(v), dtype=float)
        der = np.asarray(self.deriv(v), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(val != 0, v * der / np.where(val != 0, val, 1.0), np.where(der == 0, 0.0, np.nan))
        return _scalar_or_array(out)

    def deficit(self, v, limit: float):
        """``limit - phi(v)``."""
        return _scalar_or_array(limit - np.asarray(self(v), dtype=float))

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.label}>"


class ConstantPhi(PhiFunction):
    def __init__(self, c: float):
        if not c >= 0:
            raise ValidationError(f"constant phi requires c >= 0, got {c!r}")
        self.c = float(c)
        self.sup = self.c
        self.label = f"constant:{self.c!r}"

    def __call__(self, v):
        return _scalar_or_array(np.full_like(np.asarray(v, dtype=float), self.c))

    def deriv(self, v):
        return _scalar_or_array(np.zeros_like(np.asarray(v, dtype=float)))

    def elasticity(self, v):
        return self.deriv(v)


class RationalPhi(PhiFunction):
    """``phi(v) = scale / (1 + lam * v**power)``.

    This is the DasGupta-Strawderman shape. Everything is evaluated through
    ``t = log(lam) + power * log(v)`` and the logistic function, so neither
    ``v**power`` overflowing nor ``phi`` rounding to ``scale`` loses the
    information the minimaxity checks need.
    """

    def __init__(self, scale: float, lam: float, power: float, label: str | None = None):
        if not scale >= 0:
            raise ValidationError(f"scale must be >= 0, got {scale!r}")
        if not lam > 0:
            raise ValidationError(f"lambda must be > 0, got {lam!r}")
        if not power > 0:
            raise ValidationError(f"power must be > 0, got {power!r}")
        self.scale = float(scale)
        self.lam = float(lam)
        self.power = float(power)
        self.sup = self.scale
        self.label = label or f"rational:{self.scale!r}/(1+{self.lam!r}v^{self.power!r})"

    def _t(self, v):
        with np.errstate(divide="ignore"):
            return math.log(self.lam) + self.power * np.log(np.asarray(v, dtype=float))

    def __call__(self, v):
        return _scalar_or_array(self.scale * expit(-self._t(v)))

    def deriv(self, v):
        v = np.asarray(v, dtype=float)
        t = self._t(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -self.scale * self.power / v * expit(t) * expit(-t)
        return _scalar_or_array(out)

    def elasticity(self, v):
        return _scalar_or_array(-self.power * expit(self._t(v)))

    def deficit(self, v, limit: float):
        if limit == self.scale:
            return _scalar_or_array(self.scale * expit(self._t(v)))
        return super().deficit(v, limit)


class PhiKind(str, enum.Enum):
    CONSTANT = "constant"
    DS = "ds"
    DS_UNKNOWN = "ds-unknown"
    AUTO = "auto"


@dataclass(frozen=True)
class PhiSpec:
    """Declarative description of a shrinkage function.

    ``value`` is ``c`` for CONSTANT and ``lambda`` for the DS kinds; ``n`` is
    the degrees of freedom needed by DS_UNKNOWN.
    """

    kind: PhiKind
    value: float | None = None
    n: int | None = None

    def __post_init__(self):
        kind = PhiKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is PhiKind.CONSTANT:
            if self.value is None or not self.value >= 0:
                raise ValidationError(f"constant phi requires c >= 0, got {self.value!r}")
        elif kind in (PhiKind.DS, PhiKind.DS_UNKNOWN):
            if self.value is None or not self.value > 0:
                raise ValidationError(f"{kind.value} phi requires lambda > 0, got {self.value!r}")
            if kind is PhiKind.DS_UNKNOWN and self.n is not None and (int(self.n) != self.n or self.n < 1):
                raise ValidationError(f"n must be a positive integer, got {self.n!r}")

    @classmethod
    def constant(cls, c: float) -> PhiSpec:
        return cls(PhiKind.CONSTANT, float(c))

    @classmethod
    def ds(cls, lam: float) -> PhiSpec:
        return cls(PhiKind.DS, float(lam))

    @classmethod
    def ds_unknown(cls, lam: float, n: int | None = None) -> PhiSpec:
        return cls(PhiKind.DS_UNKNOWN, float(lam), n)

    @classmethod
    def auto(cls) -> PhiSpec:
        return cls(PhiKind.AUTO)

    def __str__(self) -> str:
        if self.kind is PhiKind.AUTO:
            return "auto"
        return f"{self.kind.value}:{self.value!r}"


def parse_phi_spec(text: str, n: int | None = None) -> PhiSpec:
    """Parse ``constant:<c>``, ``ds:<lambda>``, ``ds-unknown:<lambda>`` or ``auto``."""
    raw = text.strip().lower()
    if raw == "auto":
        return PhiSpec.auto()
    kind, sep, arg = raw.partition(":")
    if not sep:
        raise ValidationError(f"cannot parse phi spec {text!r}")
    try:
        value = float(arg)
    except ValueError:
        raise ValidationError(f"cannot parse phi parameter in {text!r}") from None
    if kind == "constant":
        return PhiSpec.constant(value)
    if kind == "ds":
        return PhiSpec.ds(value)
    if kind == "ds-unknown":
        return PhiSpec.ds_unknown(value, n)
    raise ValidationError(f"unknown phi kind {kind!r} in {text!r}")


def phi_make(spec: PhiSpec, d: int, p: PNorm, alpha: float) -> PhiFunction:
    """Build the evaluable function described by ``spec`` for ``(d, p, alpha)``."""
    if spec.kind is PhiKind.CONSTANT:
        return ConstantPhi(spec.value)
    limit = band_limit(d, p, alpha)
    if spec.kind is PhiKind.AUTO:
        return ConstantPhi(limit)
    k = shrinkage_exponent(d, alpha)
    if spec.kind is PhiKind.DS:
        return RationalPhi(limit, spec.value, k, label=str(spec))
    if spec.n is None:
        raise ValidationError("ds-unknown phi requires n")
    power = unknown_ds_exponent(d, alpha, spec.n)
    return RationalPhi(limit, spec.value, power, label=f"{spec}(n={spec.n})")


@dataclass(frozen=True)
class ShrinkageConfig:
    """Everything that pins down one estimator of the family.

    ``phi`` may be a :class:`PhiSpec`, a spec string, or a ready-made
    :class:`PhiFunction`. It is resolved once, here, into ``phi_fn``; AUTO
    becomes the constant ``2 (d-2) gamma(d, p, alpha)``.
    """

    d: int
    p: PNorm
    alpha: float
    phi: PhiSpec | PhiFunction | str
    positive_part: bool = False
    scale_mode: ScaleMode = ScaleMode.KNOWN
    phi_fn: PhiFunction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", as_pnorm(self.p))
        alpha = float(self.alpha)
        if not 0 <= alpha < 1:
            raise ValidationError(f"alpha must lie in [0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "scale_mode", ScaleMode(self.scale_mode))
        phi = self.phi
        if isinstance(phi, str):
            phi = parse_phi_spec(phi)
            object.__setattr__(self, "phi", phi)
        if isinstance(phi, PhiFunction):
            fn = phi
        else:
            fn = phi_make(phi, self.d, self.p, alpha)
        object.__setattr__(self, "phi_fn", fn)

    @property
    def phi_label(self) -> str:
        return self.phi.label if isinstance(self.phi, PhiFunction) else str(self.phi)

    def describe(self) -> dict:
        return {
            "d": self.d,
            "p": format_pnorm(self.p),
            "alpha": self.alpha,
            "phi": self.phi_label,
            "phi_resolved": self.phi_fn.label,
            "positive_part": self.positive_part,
            "scale_mode": self.scale_mode.value,
        }


def zhou_hwang_config(d: int, alpha: float, c: float, positive_part: bool = True) -> ShrinkageConfig:
    """The Zhou-Hwang estimator: the lp family with ``p = 2 - alpha`` and constant phi."""
    return ShrinkageConfig(d, 2.0 - alpha, alpha, PhiSpec.constant(c), positive_part)


@dataclass(frozen=True)
class Observation:
    """Data for one estimate: ``z`` plus either ``sigma2`` or ``(s, n)``."""

    z: NDArray[np.float64]
    sigma2: float | None = None
    s: float | None = None
    n: int | None = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1 or z.size == 0:
            raise ValidationError("z must be a non-empty 1-D vector")
        if not np.all(np.isfinite(z)):
            raise ValidationError("z entries must be finite")
        object.__setattr__(self, "z", z)
        if self.sigma2 is not None:
            if self.s is not None or self.n is not None:
                raise ValidationError("give either sigma2 or (s, n), not both")
            if not self.sigma2 > 0:
                raise ValidationError(f"sigma2 must be positive, got {self.sigma2!r}")
        else:
            if self.s is None or self.n is None:
                raise ValidationError("unknown scale requires both s and n")
            if not self.s > 0:
                raise ValidationError(f"s must be positive, got {self.s!r}")
            if int(self.n) != self.n or self.n < 1:
                raise ValidationError(f"n must be a positive integer, got {self.n!r}")

    @classmethod
    def known(cls, z: ArrayLike, sigma2: float = 1.0) -> Observation:
        return cls(np.asarray(z, dtype=float), sigma2=float(sigma2))

    @classmethod
    def unknown(cls, z: ArrayLike, s: float, n: int) -> Observation:
        return cls(np.asarray(z, dtype=float), s=float(s), n=int(n))

    @property
    def scale_mode(self) -> ScaleMode:
        return ScaleMode.KNOWN if self.sigma2 is not None else ScaleMode.UNKNOWN

    @property
    def scale2(self) -> float:
        """``sigma2``, or the estimate ``s / (n + 2)`` in unknown-scale mode."""
        if self.sigma2 is not None:
            return self.sigma2
        return self.s / (self.n + 2)


def _check_obs(obs: Observation, config: ShrinkageConfig) -> None:
    if obs.z.size != config.d:
        raise ValidationError(f"z has length {obs.z.size}, config expects d={config.d}")
    if obs.scale_mode is not config.scale_mode:
        raise ValidationError(
            f"observation is {obs.scale_mode.value}-scale but config is {config.scale_mode.value}-scale"
        )


def _shrink_amount(z: NDArray, scale2: NDArray, config: ShrinkageConfig):
    """Return ``(|z|, ||z||_p, tau)`` with ``tau = sig2 phi(u) / ||z||_p^(2-alpha)`` per row.

    The factor for coordinate ``i`` is ``1 - tau / |z_i|^alpha``.
    """
    a = np.abs(z)
    v = np.asarray(lp_norm(z, config.p, axis=-1), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = v / np.sqrt(scale2)
        vpow = np.asarray(lp_norm_power(z, config.p, 2.0 - config.alpha, axis=-1), dtype=float)
        tau = scale2 * np.asarray(config.phi_fn(u), dtype=float) / vpow
    return a, v, tau


def shrink_batch(z: ArrayLike, scale2: ArrayLike, config: ShrinkageConfig) -> NDArray[np.float64]:
    """Vectorized :func:`shrink` over the rows of a ``(reps, d)`` array.

    ``scale2`` holds the per-row variance (known mode) or ``s / (n + 2)``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    scale2 = np.broadcast_to(np.asarray(scale2, dtype=float), z.shape[:1])
    a, v, tau = _shrink_amount(z, scale2, config)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        factor = 1.0 - tau[:, None] / a**config.alpha
        if config.positive_part:
            factor = np.maximum(factor, 0.0)
        out = factor * z
        # tiny |z_i| can overflow the factor although tau * |z_i|^(1 - alpha) is small
        bad = ~np.isfinite(out) & np.isfinite(z)
        if np.any(bad):
            direct = z - np.sign(z) * tau[:, None] * a ** (1.0 - config.alpha)
            out[bad] = direct[bad]
    out[(a == 0) | (v == 0)[:, None]] = 0.0
    return out


def shrink(obs: Observation, config: ShrinkageConfig) -> NDArray[np.float64]:
    """Apply the configured estimator to one observation."""
    _check_obs(obs, config)
    return shrink_batch(obs.z[None, :], obs.scale2, config)[0]


def _check_sparse(config: ShrinkageConfig) -> float:
    if not config.positive_part:
        raise ValidationError("zero_set requires the positive-part estimator")
    if config.alpha <= 0:
        raise ValidationError("zero_set requires alpha > 0 (no threshold at alpha = 0)")
    if not isinstance(config.phi_fn, ConstantPhi):
        raise ValidationError("zero_set requires a constant phi")
    return config.phi_fn.c


def sparsity_threshold(obs: Observation, config: ShrinkageConfig) -> float:
    """Cutoff ``(c sig2 / ||z||_p^(2-alpha))^(1/alpha)`` below which ``|z_i|`` is zeroed."""
    _check_obs(obs, config)
    _check_sparse(config)
    _, v, tau = _shrink_amount(obs.z[None, :], np.asarray([obs.scale2]), config)
    if v[0] == 0:
        return math.inf
    return float(tau[0] ** (1.0 / config.alpha))


def zero_set(obs: Observation, config: ShrinkageConfig) -> list[int]:
    """Indices the positive-part estimator sets to exactly zero.

    Coordinates with ``|z_i|^alpha <= tau`` (equivalently ``|z_i|`` at or
    below :func:`sparsity_threshold`); zero coordinates are always included.
    The comparison is the one :func:`shrink_batch` clamps on, so the two agree
    exactly.
    """
    _check_obs(obs, config)
    _check_sparse(config)
    a, v, tau = _shrink_amount(obs.z[None, :], np.asarray([obs.scale2]), config)
    if v[0] == 0:
        return list(range(config.d))
    with np.errstate(divide="ignore"):
        mask = (tau[0] / a[0] ** config.alpha >= 1.0) | (a[0] == 0)
    return [int(i) for i in np.flatnonzero(mask)]


def james_stein(z: ArrayLike, sigma2: float, c: float, positive_part: bool = False) -> NDArray[np.float64]:
    """Classical (positive-part) James-Stein estimate ``(1 - c sig2 / ||z||^2) z``."""
    z = np.asarray(z, dtype=float)
    norm2 = float(z @ z)
    if norm2 == 0:
        return np.zeros_like(z)
    factor = 1.0 - c * sigma2 / norm2
    if positive_part:
        factor = max(factor, 0.0)
    return factor * z
