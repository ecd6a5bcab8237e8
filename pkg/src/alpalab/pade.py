"""Padé approximants built from truncated Taylor series.

Two things live here. The first is a general [m/n] solver that matches a
rational function P(t)/Q(t) to a power series through order m + n. The
second is the pair of first-order ALPA core terms, whose coefficients are
stored verbatim as published rather than recomputed by the solver: running
the solver on the second-order BCE expansions gives a nonzero denominator
coefficient, while the published constants have ``b1 = d1 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

POLE_TOL = 1e-12
COND_LIMIT = 1e12


@dataclass(frozen=True)
class TaylorSeries:
    """Power series ``sum_k coeffs[k] * t**k`` with ``t = x - expansion_point``."""

    expansion_point: float
    coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("Taylor series needs at least one coefficient")
        if not all(np.isfinite(c) for c in self.coeffs):
            raise ValueError("Taylor coefficients must be finite")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))


@dataclass(frozen=True)
class PadeApproximant:
    """Rational function P(t)/Q(t) in ``t = x - expansion_point``.

    ``num_coeffs[k]`` and ``den_coeffs[k]`` multiply ``t**k``;
    ``den_coeffs[0]`` is always 1.
    """

    num_coeffs: tuple[float, ...]
    den_coeffs: tuple[float, ...]
    expansion_point: float = 0.0

    def __post_init__(self):
        num = tuple(float(c) for c in self.num_coeffs)
        den = tuple(float(c) for c in self.den_coeffs)
        if not num or not den:
            raise ValueError("numerator and denominator must be non-empty")
        if den[0] != 1.0:
            raise ValueError("den_coeffs[0] must be exactly 1")
        if not all(np.isfinite(c) for c in num + den):
            raise ValueError("Padé coefficients must be finite")
        object.__setattr__(self, "num_coeffs", num)
        object.__setattr__(self, "den_coeffs", den)

    @property
    def m(self) -> int:
        return len(self.num_coeffs) - 1

    @property
    def n(self) -> int:
        return len(self.den_coeffs) - 1

    def __call__(self, x: float) -> float:
        return eval_pade(self, x)

    def to_dict(self) -> dict:
        return {
            "num": list(self.num_coeffs),
            "den": list(self.den_coeffs),
            "expansion_point": self.expansion_point,
        }


@dataclass(frozen=True)
class AlpaCoefficients:
    """First-order ALPA coefficients, as published.

    Positive term ``(a0 + a1*y) / (1 + b1*y)``; negative term
    ``(c0 + c1*(1-y)) / (1 + d1*(1-y))``.
    """

    a0: float = -1.5
    a1: float = 1.5
    b1: float = 0.0
    c0: float = -1.0
    c1: float = 1.0
    d1: float = 0.0

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("a0", "a1", "b1", "c0", "c1", "d1")}


ALPA_COEFFICIENTS = AlpaCoefficients()


def _check_order(order: int) -> None:
    if int(order) != order or order < 1:
        raise ValueError(f"order too small: need order >= 1, got {order}")


def taylor_pos_bce(order: int) -> TaylorSeries:
    """Positive-class series around y = 1, in ``t = y - 1``.

    Coefficients ``(-1)**(k+1) / k`` for ``k >= 1``, i.e. the expansion of
    ``log(y)``; the leading coefficient is 0.
    """
    _check_order(order)
    coeffs = [0.0] + [(-1.0) ** (k + 1) / k for k in range(1, order + 1)]
    return TaylorSeries(expansion_point=1.0, coeffs=tuple(coeffs))


def taylor_neg_bce(order: int) -> TaylorSeries:
    """Negative-class series around y = 0: coefficients ``-1/k``, i.e. ``log(1 - y)``."""
    _check_order(order)
    coeffs = [0.0] + [-1.0 / k for k in range(1, order + 1)]
    return TaylorSeries(expansion_point=0.0, coeffs=tuple(coeffs))


def pade_from_taylor(series: TaylorSeries, m: int, n: int) -> PadeApproximant:
    """Build the [m/n] Padé approximant whose expansion matches ``series`` through order m+n.

    The denominator solves the n linear conditions

        sum_{j=1..n} q_j c_{k-j} = -c_k,   k = m+1 .. m+n

    (with ``c_i = 0`` for ``i < 0``), and the numerator is the truncated
    convolution ``p_k = sum_{j=0..min(k,n)} q_j c_{k-j}``.

    Raises:
        ValueError: "series too short" when fewer than m+n+1 coefficients are
            given, "degenerate Padé system" when the denominator system is
            singular or its condition number exceeds 1e12.
    """
    if m < 0 or n < 0:
        raise ValueError("orders m and n must be non-negative")
    c = series.coeffs
    if len(c) < m + n + 1:
        raise ValueError(
            f"series too short: [{m}/{n}] needs {m + n + 1} coefficients, got {len(c)}"
        )

    def coef(i: int) -> float:
        return c[i] if i >= 0 else 0.0

    if n == 0:
        q = np.array([1.0])
    else:
        mat = np.array([[coef(m + i - j) for j in range(n)] for i in range(n)])
        rhs = -np.array([coef(m + 1 + i) for i in range(n)])
        cond = np.linalg.cond(mat)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise ValueError(f"degenerate Padé system (condition number {cond:.3g})")
        with np.errstate(over="ignore", invalid="ignore"):
            q = np.concatenate([[1.0], np.linalg.solve(mat, rhs)])
        if not np.all(np.isfinite(q)):
            # cond is scale-free, so a tiny but well-shaped system can still overflow
            raise ValueError("degenerate Padé system (non-finite denominator)")

    with np.errstate(over="ignore", invalid="ignore"):
        p = [float(sum(q[j] * coef(k - j) for j in range(min(k, n) + 1))) for k in range(m + 1)]
    if not all(math.isfinite(v) for v in p):
        raise ValueError("degenerate Padé system (non-finite numerator)")
    if n == 0:
        # constant denominator: numerator is the truncation itself, bit for bit
        p = list(c[: m + 1])
    return PadeApproximant(
        num_coeffs=tuple(p), den_coeffs=tuple(float(v) for v in q), expansion_point=series.expansion_point
    )


def _horner(coeffs, t: float) -> float:
    acc = 0.0
    for a in reversed(coeffs):
        acc = acc * t + a
    return acc


def eval_pade(approx: PadeApproximant, x: float) -> float:
    """Evaluate P(t)/Q(t) at ``t = x - expansion_point``."""
    if not np.isfinite(x):
        raise ValueError("x must be finite")
    t = x - approx.expansion_point
    q = _horner(approx.den_coeffs, t)
    if abs(q) < POLE_TOL:
        raise ZeroDivisionError(f"pole encountered at x={x} (|Q| = {abs(q):.3g})")
    return _horner(approx.num_coeffs, t) / q


def power_series(approx: PadeApproximant, order: int) -> list[float]:
    """Re-expand P/Q as a power series through ``t**order`` by long division."""
    p, q = approx.num_coeffs, approx.den_coeffs
    out: list[float] = []
    for k in range(order + 1):
        acc = p[k] if k < len(p) else 0.0
        for j in range(1, min(k, len(q) - 1) + 1):
            acc -= q[j] * out[k - j]
        out.append(acc)
    return out


def canonical_alpa_terms(
    coeffs: AlpaCoefficients = ALPA_COEFFICIENTS,
) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """Return the positive and negative ALPA core terms as non-negative losses.

    With the published coefficients these reduce to ``L+(y) = 1.5 (1 - y)``
    and ``L-(y) = y``. The rational forms are evaluated literally and negated,
    since both numerators are non-positive on [0, 1].
    """

    def l_pos(y: float) -> float:
        return -(coeffs.a0 + coeffs.a1 * y) / (1.0 + coeffs.b1 * y) + 0.0

    def l_neg(y: float) -> float:
        # expanded in y so that c0 = -c1, d1 = 0 gives exactly y (no 1 - (1 - y) rounding)
        num = (coeffs.c0 + coeffs.c1) - coeffs.c1 * y
        den = (1.0 + coeffs.d1) - coeffs.d1 * y
        return -num / den + 0.0

    return l_pos, l_neg
