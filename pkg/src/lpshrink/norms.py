"""lp norms and quasi-norms, and checkers for three elementary norm inequalities.

The exponent ``p`` is either a positive float or the distinguished value
:data:`INFINITY` (the supremum norm). Keeping infinity as its own case lets
exponent arithmetic such as ``(2 - p - alpha) / p`` take its analytic limit
through :func:`reciprocal` instead of producing ``nan``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from lpshrink.exceptions import ValidationError

__all__ = [
    "INFINITY",
    "PNorm",
    "LemmaCheck",
    "as_pnorm",
    "parse_pnorm",
    "format_pnorm",
    "reciprocal",
    "lp_norm",
    "lp_norm_power",
    "check_lemma_a1",
    "REL_TOL",
]

REL_TOL = 1e-9


class _Infinity(enum.Enum):
    INFINITY = "inf"

    def __repr__(self) -> str:
        return "INFINITY"


INFINITY = _Infinity.INFINITY

PNorm = Union[float, _Infinity]


def as_pnorm(p) -> PNorm:
    """Normalize ``p`` to a positive float or :data:`INFINITY`.

    ``float('inf')`` and the string ``"inf"`` are both mapped to INFINITY.
    """
    if p is INFINITY:
        return INFINITY
    if isinstance(p, str):
        return parse_pnorm(p)
    try:
        value = float(p)
    except (TypeError, ValueError):
        raise ValidationError(f"p must be a positive number or 'inf', got {p!r}") from None
    if math.isinf(value) and value > 0:
        return INFINITY
    if not value > 0 or math.isnan(value):
        raise ValidationError(f"p must be positive, got {p!r}")
    return value


def parse_pnorm(text: str) -> PNorm:
    text = text.strip().lower()
    if text in ("inf", "infinity"):
        return INFINITY
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"cannot parse p from {text!r}") from None
    return as_pnorm(value)


def format_pnorm(p: PNorm) -> str:
    if p is INFINITY:
        return "inf"
    return repr(float(p))


def reciprocal(p: PNorm) -> float:
    """Return ``1/p`` with ``1/INFINITY == 0``."""
    return 0.0 if p is INFINITY else 1.0 / p


def lp_norm(z: ArrayLike, p: PNorm, axis: int = -1):
    """lp norm (quasi-norm for 0 < p < 1) along ``axis``.

    The largest absolute entry is factored out before powering, so tiny
    exponents such as ``p = 0.1`` neither overflow nor underflow.

    Returns a Python float for 1-D input, an array otherwise.
    """
    p = as_pnorm(p)
    a = np.abs(np.asarray(z, dtype=float))
    if a.size == 0:
        raise ValidationError("lp_norm of an empty vector")
    m = a.max(axis=axis, keepdims=True)
    if p is INFINITY:
        out = np.squeeze(m, axis=axis)
    else:
        safe = np.where(m > 0, m, 1.0)
        total = ((a / safe) ** p).sum(axis=axis, keepdims=True)
        out = np.squeeze(np.where(m > 0, m * total ** (1.0 / p), 0.0), axis=axis)
    if out.ndim == 0:
        return float(out)
    return out


def lp_norm_power(z: ArrayLike, p: PNorm, power: float, axis: int = -1):
    """``lp_norm(z, p) ** power`` evaluated as ``m^power * S^(power/p)``.

    Here ``m = max|z_i|`` and ``S = sum (|z_i|/m)^p``; skipping the root keeps
    e.g. ``||z||_2^2`` exact where the sum of squares is.
    """
    p = as_pnorm(p)
    a = np.abs(np.asarray(z, dtype=float))
    if a.size == 0:
        raise ValidationError("lp_norm_power of an empty vector")
    m = a.max(axis=axis, keepdims=True)
    with np.errstate(divide="ignore"):
        if p is INFINITY:
            out = m**power
        else:
            safe = np.where(m > 0, m, 1.0)
            total = ((a / safe) ** p).sum(axis=axis, keepdims=True)
            out = np.where(m > 0, m**power * total ** (power / p), 0.0 if power > 0 else np.inf)
    out = np.squeeze(out, axis=axis)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class LemmaCheck:
    """Outcome of evaluating one of the norm inequalities at a point.

    ``margin`` is the smallest relative slack ``(right - left) / scale`` over
    the links of the chain; ``holds`` is ``margin >= -REL_TOL``. For the
    two-link chain of part 1, ``middle`` carries the middle term.
    """

    part: int
    holds: bool
    left: float
    right: float
    margin: float
    middle: float | None = None


def _relative_margin(left: float, right: float) -> float:
    if math.isinf(right) and right > 0 and not math.isinf(left):
        return 1.0
    scale = max(abs(left), abs(right))
    if scale == 0.0:
        return 0.0
    return (right - left) / scale


def _as_vector(z: ArrayLike) -> NDArray[np.float64]:
    v = np.asarray(z, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValidationError("vector entries must be finite")
    return v


def check_lemma_a1(z: ArrayLike, part: int, **params) -> LemmaCheck:
    """Evaluate one of three elementary norm inequalities at ``z``.

    part 1 (``q > r > 0``)
        ``||z||_q^r <= ||z||_r^r <= d^(1 - r/q) ||z||_q^r``; ``q`` may be INFINITY.
    part 2 (``q >= 0, r >= 0``, no zero entries)
        ``d * sum|z_i|^(q-r) <= sum|z_i|^(-r) * sum|z_i|^q``.
    part 3 (``a >= 0, b <= 1``, ``z`` a point of the probability simplex)
        ``sum s_i^a / sum s_i^b <= max(1, d^(b - a))``.
        Evaluated as stated. It is guaranteed when ``a >= b`` or ``b = 1``;
        for ``a < b < 1`` it can fail, and the valid power-mean bound is
        ``d^(1 - a/b)``.

    Raises:
        ValidationError: if the part's preconditions are not met. A
            precondition failure is never reported as ``holds=False``.
    """
    v = _as_vector(z)
    d = v.size
    a = np.abs(v)

    if part == 1:
        q, r = params["q"], params["r"]
        q = as_pnorm(q)
        r = float(r)
        if not (r > 0 and (q is INFINITY or q > r)):
            raise ValidationError(f"part 1 requires q > r > 0, got q={q!r}, r={r!r}")
        nq = lp_norm(v, q) ** r
        nr = lp_norm(v, r) ** r
        upper = d ** (1.0 - r * reciprocal(q)) * nq
        margin = min(_relative_margin(nq, nr), _relative_margin(nr, upper))
        return LemmaCheck(1, margin >= -REL_TOL, nq, upper, margin, middle=nr)

    if part == 2:
        q, r = float(params["q"]), float(params["r"])
        if q < 0 or r < 0:
            raise ValidationError(f"part 2 requires q >= 0 and r >= 0, got q={q}, r={r}")
        if np.any(a == 0):
            raise ValidationError("part 2 requires every coordinate to be nonzero")
        left = d * float(np.sum(a ** (q - r)))
        right = float(np.sum(a ** (-r))) * float(np.sum(a**q))
        margin = _relative_margin(left, right)
        return LemmaCheck(2, margin >= -REL_TOL, left, right, margin)

    if part == 3:
        ea, eb = float(params["a"]), float(params["b"])
        if ea < 0 or eb > 1:
            raise ValidationError(f"part 3 requires a >= 0 and b <= 1, got a={ea}, b={eb}")
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValidationError("part 3 requires a simplex point (s_i >= 0, sum s_i = 1)")
        with np.errstate(divide="ignore"):
            left = float(np.sum(v**ea)) / float(np.sum(v**eb))
        right = max(1.0, d ** (eb - ea))
        margin = _relative_margin(left, right)
        return LemmaCheck(3, margin >= -REL_TOL, left, right, margin)

    raise ValidationError(f"part must be 1, 2 or 3, got {part!r}")
