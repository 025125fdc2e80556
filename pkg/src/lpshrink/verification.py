"""Randomized property suites run by ``lpshrink verify``.

Each check returns a :class:`CheckResult`; failures keep the offending inputs
so that they can be replayed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from lpshrink.estimators import PhiSpec, ShrinkageConfig
from lpshrink.norms import INFINITY, check_lemma_a1, lp_norm
from lpshrink.risk import identity_check, psi_phi, psi_upper

__all__ = ["CheckResult", "lemma_suite", "identity_suite", "run_suite", "ZSCORE_LIMIT"]

ZSCORE_LIMIT = 4.0
MAX_LISTED_FAILURES = 20


@dataclass
class CheckResult:
    name: str
    trials: int
    failures: list[dict] = field(default_factory=list)
    failure_count: int = 0

    @property
    def passed(self) -> bool:
        return self.failure_count == 0

    def record(self, **inputs) -> None:
        self.failure_count += 1
        if len(self.failures) < MAX_LISTED_FAILURES:
            self.failures.append(inputs)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _vec(x) -> list[float]:
    return [float(t) for t in x]


def lemma_part1(trials: int, rng: np.random.Generator) -> CheckResult:
    res = CheckResult("lemma_a1_part1", trials)
    for _ in range(trials):
        d = int(rng.integers(1, 21))
        z = rng.standard_normal(d)
        r = float(rng.uniform(0.05, 4.0))
        q = r + float(rng.uniform(1e-3, 6.0))
        chk = check_lemma_a1(z, 1, q=q, r=r)
        if not chk.holds:
            res.record(z=_vec(z), q=q, r=r, margin=chk.margin)
    return res


def lemma_part2(trials: int, rng: np.random.Generator) -> CheckResult:
    res = CheckResult("lemma_a1_part2", trials)
    for _ in range(trials):
        d = int(rng.integers(1, 21))
        z = rng.standard_normal(d)
        z[z == 0] = 1.0
        q = float(rng.uniform(0.0, 4.0))
        r = float(rng.uniform(0.0, 2.0))
        chk = check_lemma_a1(z, 2, q=q, r=r)
        if not chk.holds:
            res.record(z=_vec(z), q=q, r=r, margin=chk.margin)
    return res


def lemma_part3(trials: int, rng: np.random.Generator) -> CheckResult:
    res = CheckResult("lemma_a1_part3", trials)
    for _ in range(trials):
        d = int(rng.integers(1, 21))
        e = rng.exponential(size=d)
        s = e / e.sum()
        a = float(rng.uniform(0.0, 3.0))
        b = float(rng.uniform(-1.0, 1.0))
        chk = check_lemma_a1(s, 3, a=a, b=b)
        ok = chk.holds
        if ok and a < b:
            ok = 1.0 - 1e-9 <= chk.left <= d * (1.0 + 1e-9)
        if not ok:
            res.record(s=_vec(s), a=a, b=b, margin=chk.margin, ratio=chk.left)
    return res


def simplex_power_bound(trials: int, rng: np.random.Generator) -> CheckResult:
    """For ``0 <= a < b <= 1``: ``sum s^a / sum s^b <= d^(1 - a/b)``.

    This is the power-mean bound. The ``d^(b - a)`` form checked by
    :func:`lemma_part3` is only guaranteed at ``b = 1``.
    """
    res = CheckResult("simplex_power_mean_bound", trials)
    for _ in range(trials):
        d = int(rng.integers(1, 21))
        e = rng.exponential(size=d)
        s = e / e.sum()
        b = float(rng.uniform(0.0, 1.0))
        a = float(rng.uniform(0.0, b))
        ratio = float(np.sum(s**a)) / float(np.sum(s**b))
        if not ratio <= d ** (1.0 - a / b) * (1.0 + 1e-9):
            res.record(s=_vec(s), a=a, b=b, ratio=ratio)
    return res


def norm_homogeneity(trials: int, rng: np.random.Generator) -> CheckResult:
    res = CheckResult("lp_norm_homogeneity", trials)
    for _ in range(trials):
        d = int(rng.integers(1, 21))
        z = rng.standard_normal(d)
        c = float(rng.normal() * 10 ** rng.uniform(-3, 3))
        p = INFINITY if rng.random() < 0.1 else float(10 ** rng.uniform(-1, 1.5))
        lhs = lp_norm(c * z, p)
        rhs = abs(c) * lp_norm(z, p)
        if not abs(lhs - rhs) <= 1e-12 * max(abs(rhs), 1e-300):
            res.record(z=_vec(z), c=c, p=str(p), lhs=lhs, rhs=rhs)
    return res


def lemma_suite(trials: int, seed: int) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        lemma_part1(trials, rng),
        lemma_part2(trials, rng),
        lemma_part3(trials, rng),
        simplex_power_bound(trials, rng),
        norm_homogeneity(trials, rng),
    ]


def _random_config(rng: np.random.Generator) -> ShrinkageConfig:
    d = int(rng.integers(3, 16))
    alpha = float(rng.uniform(0.0, 0.95 * (d - 2) / (d - 1)))
    p = INFINITY if rng.random() < 0.1 else float(rng.choice([0.5, 1.0, 1.5, 2.0, 3.0, 4.0]))
    if rng.random() < 0.5:
        spec = PhiSpec.ds(float(10 ** rng.uniform(-2, 2)))
    else:
        cfg = ShrinkageConfig(d, p, alpha, PhiSpec.auto())
        spec = PhiSpec.constant(float(rng.uniform(0.0, cfg.phi_fn.c)))
    return ShrinkageConfig(d, p, alpha, spec)


def psi_bound(trials: int, rng: np.random.Generator) -> CheckResult:
    """``psi_phi(z) <= Psi_phi(||z||_p)`` pointwise for non-negative phi."""
    res = CheckResult("psi_below_psi_upper", trials)
    for _ in range(trials):
        cfg = _random_config(rng)
        z = rng.standard_normal(cfg.d) * float(10 ** rng.uniform(-1, 1))
        lhs = psi_phi(z, cfg)
        rhs = psi_upper(lp_norm(z, cfg.p), cfg)
        if not lhs <= rhs + 1e-9 * max(1.0, abs(rhs)):
            res.record(z=_vec(z), config=cfg.describe(), psi=lhs, psi_upper=rhs)
    return res


def identity_suite(trials: int, seed: int, reps: int = 10**5) -> list[CheckResult]:
    """Pointwise psi bound over ``trials`` random draws, plus Monte Carlo identity
    checks at ``reps`` replicates, judged at ``|z| <= ZSCORE_LIMIT``."""
    rng = np.random.default_rng(seed)
    results = [psi_bound(trials, rng)]
    cases = [
        ("chi-square", "one", dict(n=6)),
        ("chi-square", "linear", dict(n=6)),
        ("chi-square", "linear", dict(n=20, sigma2=2.5)),
        ("stein", "linear", dict(theta=[0.0])),
        ("stein", "cubic", dict(theta=[0.5])),
        ("stein", "estimator", dict(config=ShrinkageConfig(5, 2, 0.3, PhiSpec.constant(1)),
                                     theta=[1.0, -0.5, 0.0, 2.0, 0.25])),
        ("stein", "estimator", dict(config=ShrinkageConfig(6, 1, 0.2, PhiSpec.ds(1.0)),
                                     theta=[0.5, 0.5, -1.0, 0.0, 0.0, 3.0])),
    ]
    for k, (kind, fn, params) in enumerate(cases):
        chk = identity_check(kind, fn, reps, seed + k, **params)
        res = CheckResult(f"{kind}_{fn}_{k}", 1)
        if not abs(chk.zscore) <= ZSCORE_LIMIT:
            res.record(lhs=chk.lhs, rhs=chk.rhs, zscore=chk.zscore, reps=reps, seed=seed + k)
        results.append(res)
    return results


def run_suite(suite: str, trials: int, seed: int, reps: int = 10**5) -> list[CheckResult]:
    if suite == "lemmas":
        return lemma_suite(trials, seed)
    if suite == "identities":
        return identity_suite(trials, seed, reps)
    if suite == "all":
        return lemma_suite(trials, seed) + identity_suite(trials, seed, reps)
    raise ValueError(f"unknown suite {suite!r}")
