"""Unbiased risk estimation, risk-bound margins and Monte Carlo risk.

Losses are always normalized by the variance, ``sum (est_i - theta_i)^2 / sigma2``,
so the risk of the unshrunk observation is ``d`` and minimaxity means
"risk <= d for every theta".

Several quantities below are written in scale-free form. With ``v = ||z||_p``
and ``w_i = |z_i| / v``:

    psi(z) = phi(v) * A - 2 (1 - alpha) * B - 2 (alpha - 2 + v phi'(v) / phi(v))
    A = sum w_i^(2 - 2 alpha) / sum w_i^(p - alpha)
    B = sum w_i^(-alpha)      / sum w_i^(p - alpha)

which is the usual expression with all powers of ``v`` cancelled. For the
supremum norm ``w_i^(p - alpha)`` is the indicator of ``|z_i| = max_j |z_j|``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from lpshrink.estimators import (
    Observation,
    ScaleMode,
    ShrinkageConfig,
    shrink_batch,
    shrinkage_exponent,
)
from lpshrink.exceptions import DomainError, ValidationError
from lpshrink.norms import INFINITY, lp_norm, reciprocal
from lpshrink.sampling import chi_square, run_blocks

__all__ = [
    "SureReport",
    "RiskEstimate",
    "MeanConfig",
    "IdentityCheck",
    "psi_phi",
    "psi_upper",
    "psi_upper_factor",
    "sure",
    "sure_batch",
    "unknown_risk_margin",
    "correction_energy_bound",
    "mc_losses",
    "mc_risk",
    "mc_sure",
    "mc_correction_energy",
    "paired_difference",
    "identity_check",
    "simulate",
]


def psi_upper_factor(d: int, p, alpha: float) -> float:
    """``max(1, d^((p + alpha - 2)/p))``; equals ``d`` for the supremum norm."""
    return max(1.0, d ** (1.0 - (2.0 - alpha) * reciprocal(p)))


def _weights_and_ratios(z: NDArray, config: ShrinkageConfig):
    """Per-row ``v``, the weights ``w^(p - alpha)`` and the ratios ``A``, ``B``."""
    alpha = config.alpha
    v = np.asarray(lp_norm(z, config.p, axis=-1), dtype=float)
    w = np.abs(z) / v[:, None]
    with np.errstate(divide="ignore", over="ignore"):
        if config.p is INFINITY:
            weights = (w == 1.0).astype(float)
        else:
            weights = w ** (config.p - alpha)
        total = weights.sum(axis=1)
        a_ratio = (w ** (2.0 - 2.0 * alpha)).sum(axis=1) / total
        b_ratio = (w ** (-alpha)).sum(axis=1) / total
    return v, weights, a_ratio, b_ratio


def _check_domain(z: NDArray, config: ShrinkageConfig) -> None:
    if np.any(np.all(z == 0, axis=1)):
        raise DomainError("psi is undefined at the zero vector")
    if config.alpha > 0 and np.any(z == 0):
        raise DomainError("psi is undefined when a coordinate is zero and alpha > 0")


def _elasticity(config: ShrinkageConfig, v) -> NDArray:
    out = np.asarray(config.phi_fn.elasticity(v), dtype=float)
    if np.any(np.isnan(out)):
        raise DomainError("v phi'(v)/phi(v) is undefined: phi(v) = 0 while phi'(v) != 0")
    return out


def _psi_rows(z: NDArray, config: ShrinkageConfig):
    v, weights, a_ratio, b_ratio = _weights_and_ratios(z, config)
    phi = np.asarray(config.phi_fn(v), dtype=float)
    psi = phi * a_ratio - 2.0 * (1.0 - config.alpha) * b_ratio - 2.0 * (config.alpha - 2.0 + _elasticity(config, v))
    return v, weights, phi, psi


def psi_phi(z: ArrayLike, config: ShrinkageConfig) -> float:
    """The data-dependent risk term ``psi_phi(z)`` at unit scale.

    Callers with ``sigma2 != 1`` pass ``z / sigma``.

    Raises:
        DomainError: at the zero vector, at a zero coordinate when
            ``alpha > 0``, or where ``phi = 0`` but ``phi' != 0``.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape != (1, config.d):
        raise ValidationError(f"z must have length d={config.d}")
    _check_domain(z, config)
    return float(_psi_rows(z, config)[3][0])


def psi_upper(v, config: ShrinkageConfig):
    """``Psi_phi(v) = max(1, d^((p+alpha-2)/p)) phi(v) - 2K - 2 v phi'(v)/phi(v)``.

    ``K = d - 2 - alpha (d - 1)``. Vectorized over ``v``.
    """
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise ValidationError("psi_upper requires v > 0")
    d = config.d
    k = shrinkage_exponent(d, config.alpha)
    f = psi_upper_factor(d, config.p, config.alpha)
    out = f * np.asarray(config.phi_fn(v), dtype=float) - 2.0 * k - 2.0 * _elasticity(config, v)
    return float(out) if out.ndim == 0 else out


def unknown_risk_margin(u, config: ShrinkageConfig, n: int):
    """``Psi_phi(u) - 2 u phi'(u) / (n + 2)``; non-positive for all u is sufficient for minimaxity
    when the scale is estimated by ``s / (n + 2)``."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    u = np.asarray(u, dtype=float)
    out = np.asarray(psi_upper(u, config)) - 2.0 * u * np.asarray(config.phi_fn.deriv(u), dtype=float) / (n + 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SureReport:
    value: float
    per_coordinate_weights: list[float]
    psi: float
    psi_upper: float

    def to_dict(self) -> dict:
        return asdict(self)


def _check_sure_config(config: ShrinkageConfig) -> None:
    if config.scale_mode is not ScaleMode.KNOWN:
        raise ValidationError("sure is only defined for known scale")
    if config.positive_part:
        raise ValidationError("sure applies to the plain estimator, not the positive-part variant")


def sure_batch(z: ArrayLike, sigma2: float, config: ShrinkageConfig) -> NDArray[np.float64]:
    """Row-wise unbiased risk estimate; the vectorized core of :func:`sure`."""
    _check_sure_config(config)
    zs = np.atleast_2d(np.asarray(z, dtype=float)) / math.sqrt(sigma2)
    _check_domain(zs, config)
    v, weights, phi, psi = _psi_rows(zs, config)
    return config.d + weights.sum(axis=1) * phi * psi / v**2


def sure(obs: Observation, config: ShrinkageConfig) -> SureReport:
    """Stein's unbiased estimate of the risk of the plain estimator at ``obs``.

    ``value = d + sum_i (|z_i|/||z||_p)^(p-alpha) phi(v) psi(z/sigma) / v^2``
    with ``v = ||z||_p / sigma``.
    """
    _check_sure_config(config)
    if obs.scale_mode is not ScaleMode.KNOWN:
        raise ValidationError("sure requires a known-scale observation")
    if obs.z.size != config.d:
        raise ValidationError(f"z has length {obs.z.size}, config expects d={config.d}")
    zs = obs.z[None, :] / math.sqrt(obs.sigma2)
    _check_domain(zs, config)
    v, weights, phi, psi = _psi_rows(zs, config)
    value = config.d + weights.sum() * phi[0] * psi[0] / v[0] ** 2
    return SureReport(
        value=float(value),
        per_coordinate_weights=[float(x) for x in weights[0]],
        psi=float(psi[0]),
        psi_upper=float(psi_upper(v[0], config)),
    )


def correction_energy_bound(config: ShrinkageConfig) -> float:
    """Upper bound on the expected squared correction ``E[sum xi_i^2 / sigma2]``.

    ``M^2 max(1, d^e) / (d - 2)`` with ``M = sup phi``, ``r = 2(1 - alpha)`` and
    ``e = (r + 2)(p - r) / (p r)``. The exponent comes from
    ``||z||_r <= d^(1/r - 1/p) ||z||_p`` applied to
    ``||z||_r^r / ||z||_p^(r + 2)``; it is attained by equal coordinates.
    The shorter exponent ``(p - r) / (p r)`` is not an upper bound once
    ``p > r`` (see tests/test_risk.py).
    """
    d, alpha = config.d, config.alpha
    if d < 3:
        raise ValidationError("the bound requires d >= 3")
    m = config.phi_fn.sup
    r = 2.0 * (1.0 - alpha)
    exponent = (r + 2.0) * (1.0 - r * reciprocal(config.p)) / r
    return m**2 * max(1.0, d**exponent) / (d - 2)


@dataclass(frozen=True)
class MeanConfig:
    """The sampling model ``z ~ N_d(theta, sigma2 I)``, plus ``s ~ sigma2 chi^2_n`` when the
    scale is unknown."""

    theta: NDArray[np.float64]
    sigma2: float = 1.0
    scale_mode: ScaleMode = ScaleMode.KNOWN
    n: int | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 1 or theta.size == 0 or not np.all(np.isfinite(theta)):
            raise ValidationError("theta must be a finite, non-empty 1-D vector")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "scale_mode", ScaleMode(self.scale_mode))
        if not self.sigma2 > 0:
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2!r}")
        if self.scale_mode is ScaleMode.UNKNOWN and (self.n is None or int(self.n) != self.n or self.n < 1):
            raise ValidationError("unknown scale requires a positive integer n")

    @classmethod
    def radial(cls, d: int, norm: float, direction: ArrayLike | None = None, **kwargs) -> MeanConfig:
        """``theta = norm * direction``; the default direction is the first axis."""
        if norm < 0:
            raise ValidationError(f"theta norm must be non-negative, got {norm!r}")
        if direction is None:
            u = np.zeros(d)
            u[0] = 1.0
        else:
            u = np.asarray(direction, dtype=float)
            if u.shape != (d,) or not np.linalg.norm(u) > 0:
                raise ValidationError(f"direction must be a nonzero vector of length {d}")
            u = u / np.linalg.norm(u)
        return cls(norm * u, **kwargs)


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    stderr: float
    reps: int
    seed: int

    @classmethod
    def from_samples(cls, samples: NDArray, seed: int) -> RiskEstimate:
        reps = samples.size
        stderr = float(np.std(samples, ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
        return cls(float(np.mean(samples)), stderr, reps, seed)


Statistic = Callable[[NDArray, NDArray | None], NDArray]


def simulate(statistic: Statistic, mean_config: MeanConfig, reps: int, seed: int, workers: int = 1) -> NDArray:
    theta = mean_config.theta
    sigma = math.sqrt(mean_config.sigma2)
    unknown = mean_config.scale_mode is ScaleMode.UNKNOWN

    def block(rng: np.random.Generator, size: int) -> NDArray:
        z = theta + sigma * rng.standard_normal((size, theta.size))
        s = chi_square(rng, mean_config.n, size, mean_config.sigma2) if unknown else None
        return statistic(z, s)

    return np.concatenate(run_blocks(block, reps, seed, workers), axis=-1)


def _check_pair(config: ShrinkageConfig, mean_config: MeanConfig, reps: int) -> None:
    if mean_config.theta.size != config.d:
        raise ValidationError(f"theta has length {mean_config.theta.size}, config expects d={config.d}")
    if mean_config.scale_mode is not config.scale_mode:
        raise ValidationError("scale modes of config and mean_config differ")
    if int(reps) != reps or reps < 2:
        raise ValidationError(f"reps must be an integer >= 2, got {reps!r}")


def _scale2(mean_config: MeanConfig, s: NDArray | None):
    if s is None:
        return mean_config.sigma2
    return s / (mean_config.n + 2)


def mc_losses(
    config: ShrinkageConfig, mean_config: MeanConfig, reps: int, seed: int = 0, workers: int = 1
) -> NDArray[np.float64]:
    """Per-replicate normalized losses ``||est - theta||^2 / sigma2``."""
    _check_pair(config, mean_config, reps)
    theta, sigma2 = mean_config.theta, mean_config.sigma2

    def loss(z, s):
        est = shrink_batch(z, _scale2(mean_config, s), config)
        return ((est - theta) ** 2).sum(axis=1) / sigma2

    return simulate(loss, mean_config, reps, seed, workers)


def mc_risk(
    config: ShrinkageConfig, mean_config: MeanConfig, reps: int, seed: int = 0, workers: int = 1
) -> RiskEstimate:
    """Monte Carlo risk; bit-identical for fixed ``(seed, reps)`` whatever ``workers`` is."""
    return RiskEstimate.from_samples(mc_losses(config, mean_config, reps, seed, workers), seed)


def mc_sure(
    config: ShrinkageConfig, mean_config: MeanConfig, reps: int, seed: int = 0, workers: int = 1
) -> RiskEstimate:
    """Monte Carlo mean of the unbiased risk estimate; uses the same draws as :func:`mc_risk`."""
    _check_pair(config, mean_config, reps)
    _check_sure_config(config)
    return RiskEstimate.from_samples(
        simulate(lambda z, s: sure_batch(z, mean_config.sigma2, config), mean_config, reps, seed, workers), seed
    )


def mc_correction_energy(
    config: ShrinkageConfig, mean_config: MeanConfig, reps: int, seed: int = 0, workers: int = 1
) -> RiskEstimate:
    """Monte Carlo estimate of ``E[sum xi_i^2 / sigma2]`` with ``xi = est - z``."""
    _check_pair(config, mean_config, reps)

    def energy(z, s):
        xi = shrink_batch(z, _scale2(mean_config, s), config) - z
        return (xi**2).sum(axis=1) / mean_config.sigma2

    return RiskEstimate.from_samples(simulate(energy, mean_config, reps, seed, workers), seed)


def paired_difference(
    config_a: ShrinkageConfig,
    config_b: ShrinkageConfig,
    mean_config: MeanConfig,
    reps: int,
    seed: int = 0,
    workers: int = 1,
) -> RiskEstimate:
    """Mean and stderr of ``loss_a - loss_b`` under common random numbers."""
    la = mc_losses(config_a, mean_config, reps, seed, workers)
    lb = mc_losses(config_b, mean_config, reps, seed, workers)
    return RiskEstimate.from_samples(la - lb, seed)


@dataclass(frozen=True)
class IdentityCheck:
    kind: str
    function: str
    lhs: float
    rhs: float
    zscore: float
    reps: int
    seed: int
    expected: float | None = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


_CHI_FUNCTIONS = {
    # name: (h, h', E[s h(s)] as a function of (n, sigma2))
    "one": (lambda s: np.ones_like(s), lambda s: np.zeros_like(s), lambda n, q: n * q),
    "linear": (lambda s: s, lambda s: np.ones_like(s), lambda n, q: n * (n + 2) * q**2),
    "quadratic": (lambda s: s**2, lambda s: 2 * s, lambda n, q: n * (n + 2) * (n + 4) * q**3),
    "inverse": (lambda s: 1 / s, lambda s: -1 / s**2, lambda n, q: 1.0),
}

_STEIN_FUNCTIONS = ("linear", "cubic", "estimator")


def _estimator_divergence(z: NDArray, sigma2: float, config: ShrinkageConfig, coordinate: int | None) -> NDArray:
    """Analytic ``sum_i d xi_i / d z_i`` (or one term) for ``xi = est - z`` of the plain estimator."""
    alpha = config.alpha
    sigma = math.sqrt(sigma2)
    zs = z / sigma
    v, weights, _, _ = _weights_and_ratios(zs, config)
    phi = np.asarray(config.phi_fn(v), dtype=float)
    u_dphi = phi * _elasticity(config, v)
    w = np.abs(zs) / v[:, None]
    with np.errstate(divide="ignore"):
        neg = w ** (-alpha)
    if coordinate is not None:
        neg, weights = neg[:, coordinate], weights[:, coordinate]
    else:
        neg, weights = neg.sum(axis=1), weights.sum(axis=1)
    # d/dz of xi at scale sigma equals the unit-scale derivative (xi is 1-homogeneous).
    return -((1 - alpha) * phi * neg + ((alpha - 2) * phi + u_dphi) * weights) / v**2


def _numeric_divergence(xi: Callable[[NDArray], NDArray], z: NDArray, coordinate: int | None) -> NDArray:
    cols = range(z.shape[1]) if coordinate is None else [coordinate]
    total = np.zeros(z.shape[0])
    for i in cols:
        h = (1.0 + np.abs(z[:, i])) * 1e-5
        up, down = z.copy(), z.copy()
        up[:, i] += h
        down[:, i] -= h
        total += (xi(up)[:, i] - xi(down)[:, i]) / (2 * h)
    return total


def identity_check(
    kind: str,
    function: str,
    reps: int,
    seed: int = 0,
    workers: int = 1,
    *,
    n: int | None = None,
    sigma2: float = 1.0,
    theta: ArrayLike | None = None,
    config: ShrinkageConfig | None = None,
    coordinate: int | None = None,
    derivative: str = "analytic",
) -> IdentityCheck:
    """Monte Carlo check of the Stein or chi-square identity.

    ``kind="stein"`` compares ``E[(z_i - theta_i) xi_i(z)]`` with
    ``sigma2 E[d xi_i / d z_i]`` for ``xi_i = z_i`` (``linear``),
    ``z_i^3`` (``cubic``) or the estimator correction ``est_i - z_i``
    (``estimator``, needs ``config``). ``coordinate=None`` sums over i.

    ``kind="chi-square"`` compares ``E[s h(s)]`` with
    ``sigma2 E[n h(s) + 2 s h'(s)]`` for ``s ~ sigma2 chi^2_n`` and
    ``h`` in ``one, linear, quadratic, inverse``.

    The z-score studentizes the per-replicate difference of the two sides;
    a large value is a finding, not an error.
    """
    kind = kind.lower().replace("_", "-")
    if int(reps) != reps or reps < 2:
        raise ValidationError(f"reps must be an integer >= 2, got {reps!r}")
    if kind == "chi-square":
        if function not in _CHI_FUNCTIONS:
            raise ValidationError(f"unknown chi-square test function {function!r}")
        if n is None or int(n) != n or n < 1:
            raise ValidationError("chi-square identity requires a positive integer n")
        h, dh, expected = _CHI_FUNCTIONS[function]

        def block(rng, size):
            s = chi_square(rng, n, size, sigma2)
            return np.stack([s * h(s), sigma2 * (n * h(s) + 2 * s * dh(s))])

        both = np.concatenate(run_blocks(block, reps, seed, workers), axis=1)
        exp_value = float(expected(n, sigma2))
        params = {"n": int(n), "sigma2": sigma2}
    elif kind == "stein":
        if function not in _STEIN_FUNCTIONS:
            raise ValidationError(f"unknown Stein test function {function!r}")
        if function == "estimator":
            if config is None:
                raise ValidationError("the estimator test function needs a config")
            if config.scale_mode is not ScaleMode.KNOWN:
                raise ValidationError("the Stein identity check uses known scale")
            d = config.d
        else:
            d = config.d if config is not None else (len(theta) if theta is not None else 1)
        th = np.zeros(d) if theta is None else np.asarray(theta, dtype=float)
        if th.shape != (d,):
            raise ValidationError(f"theta must have length {d}")
        if coordinate is not None and not 0 <= coordinate < d:
            raise ValidationError(f"coordinate must lie in [0, {d})")
        if derivative not in ("analytic", "numeric"):
            raise ValidationError("derivative must be 'analytic' or 'numeric'")
        if function == "estimator" and config.positive_part:
            derivative = "numeric"
        cols = slice(None) if coordinate is None else slice(coordinate, coordinate + 1)

        if function == "linear":
            xi, div = (lambda z: z), (lambda z: np.full(z.shape[0], float(z[:, cols].shape[1])))
        elif function == "cubic":
            xi, div = (lambda z: z**3), (lambda z: (3 * z[:, cols] ** 2).sum(axis=1))
        else:
            def xi(z):
                return shrink_batch(z, sigma2, config) - z

            def div(z):
                return _estimator_divergence(z, sigma2, config, coordinate)

        if derivative == "numeric":
            def div(z, _xi=xi):
                return _numeric_divergence(_xi, z, coordinate)

        sigma = math.sqrt(sigma2)

        def block(rng, size):
            z = th + sigma * rng.standard_normal((size, d))
            lhs = ((z - th)[:, cols] * xi(z)[:, cols]).sum(axis=1)
            return np.stack([lhs, sigma2 * div(z)])

        both = np.concatenate(run_blocks(block, reps, seed, workers), axis=1)
        exp_value = None
        if function == "linear":
            exp_value = sigma2 * (d if coordinate is None else 1)
        params = {"sigma2": sigma2, "theta": [float(x) for x in th], "coordinate": coordinate,
                  "derivative": derivative}
        if config is not None:
            params["config"] = config.describe()
    else:
        raise ValidationError(f"kind must be 'stein' or 'chi-square', got {kind!r}")

    diff = both[0] - both[1]
    sd = float(np.std(diff, ddof=1))
    mean_diff = float(np.mean(diff))
    if sd > 0:
        zscore = mean_diff / (sd / math.sqrt(reps))
    else:
        zscore = 0.0 if mean_diff == 0 else math.copysign(math.inf, mean_diff)
    return IdentityCheck(kind, function, float(np.mean(both[0])), float(np.mean(both[1])), zscore,
                         int(reps), int(seed), exp_value, params)
