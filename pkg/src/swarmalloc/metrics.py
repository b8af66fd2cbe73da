"""Completion times, message rates and Welch's t-test.

The regularized incomplete beta function is evaluated with the modified Lentz
continued fraction, switching to the symmetry relation when ``x`` is past the
mean so the fraction converges quickly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from .grid import TrialTrace

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def completion_time(trace: TrialTrace | Sequence[int]) -> int | None:
    series = trace.residual if isinstance(trace, TrialTrace) else trace
    for i, rd in enumerate(series):
        if rd == 0:
            return i
    return None


def messages_per_agent_per_round(trace: TrialTrace, agent_class: str = "agent") -> float:
    """Messages sent by ``agent_class`` per member per elapsed round."""
    rounds = trace.completion_round if trace.completion_round is not None else trace.elapsed_rounds
    population = trace.populations.get(agent_class, 0)
    if rounds == 0 or population == 0:
        warnings.warn("message rate undefined for zero rounds or population; reporting 0", RuntimeWarning)
        return 0.0
    return trace.class_messages.get(agent_class, 0) / (population * rounds)


def messages_per_agent(trace: TrialTrace, agent_class: str = "agent") -> float:
    population = trace.populations.get(agent_class, 0)
    return trace.class_messages.get(agent_class, 0) / population if population else 0.0


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    std: float
    sem: float


def summarize(values: Sequence[float]) -> SummaryStats:
    n = len(values)
    if n < 1:
        raise ValueError("cannot summarize an empty sample")
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return SummaryStats(n, mean, std, std / math.sqrt(n))


def _betacf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, df: float) -> float:
    """Two-sided tail probability ``P(|T| >= |t|)`` for Student's t."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float
    mean_diff: float


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Two-sided Welch test of equal means with unequal variances."""
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    sa, sb = summarize(a), summarize(b)
    va = sa.std ** 2 / sa.n
    vb = sb.std ** 2 / sb.n
    if va == 0.0 and vb == 0.0:
        raise ValueError("both samples have zero variance")
    se2 = va + vb
    diff = sa.mean - sb.mean
    t = diff / math.sqrt(se2)
    # written with variance shares so tiny variances cannot underflow to 0/0
    fa, fb = va / se2, vb / se2
    df = 1.0 / (fa * fa / (sa.n - 1) + fb * fb / (sb.n - 1))
    return WelchResult(t, df, student_t_sf2(t, df), diff)
