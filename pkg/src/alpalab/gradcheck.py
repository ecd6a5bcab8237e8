"""Finite-difference checks and negative-branch gradient curves.

The curves compare how hard each loss pushes a negative-target logit down
as a function of the predicted probability. ALPA is plotted through its
unweighted core ``p^(g-+1)``, whose z-derivative is
``(g-+1) p^(g-+1) (1-p)`` and peaks at ``p = (g-+1)/(g-+2)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .losses import LossEval, LossSpec, evaluate_terms
from .numeric import sigmoid

CSV_HEADER = ("p", "grad_ce", "grad_focal", "grad_asl", "grad_alpa")
DEFAULT_GRID = (0.001, 0.999, 1001)


def fd_gradient(loss: Callable[[float], float], z: float, h: float = 1e-5) -> float:
    """Central difference ``(L(z+h) - L(z-h)) / 2h``."""
    if not 0.0 < h <= 1e-2:
        raise ValueError(f"step h must lie in (0, 1e-2], got {h}")
    up, down = loss(z + h), loss(z - h)
    if not (math.isfinite(up) and math.isfinite(down)):
        raise ValueError(f"non-finite loss near z={z}")
    return (up - down) / (2.0 * h)


def relative_error(analytic: float, numeric: float) -> float:
    """``|a - n| / max(|a|, |n|)``, defined as 0 when both are exactly 0."""
    scale = max(abs(analytic), abs(numeric))
    if scale == 0.0:
        return 0.0
    return abs(analytic - numeric) / scale


def term_of_logit(spec: LossSpec, y: int, weight: float = 1.0) -> Callable[[float], LossEval]:
    """Wrap one loss term as a function of the logit."""

    def f(z: float) -> LossEval:
        v, g = evaluate_terms(sigmoid(z), y, spec, weight)
        return LossEval(float(v), float(g))

    return f


def check_term_gradient(spec: LossSpec, zs: Iterable[float] = None, h: float = 1e-5,
                        weight: float = 1.0) -> float:
    """Worst relative error between analytic and FD gradients over a logit grid, both targets."""
    if zs is None:
        zs = np.linspace(-5.0, 5.0, 101)
    worst = 0.0
    for y in (0, 1):
        term = term_of_logit(spec, y, weight)
        for z in zs:
            z = float(z)
            numeric = fd_gradient(lambda t: term(t).value, z, h)
            worst = max(worst, relative_error(term(z).dvalue_dlogit, numeric))
    return worst


def alpa_neg_grad(p, gamma_neg: float):
    """z-derivative of the unweighted negative ALPA core: ``(g+1) p^(g+1) (1-p)``."""
    if gamma_neg < 0:
        raise ValueError("gamma_neg must be >= 0")
    p = np.asarray(p, dtype=np.float64)
    out = (gamma_neg + 1.0) * p ** (gamma_neg + 1.0) * (1.0 - p)
    return float(out) if out.ndim == 0 else out


@dataclass
class GradCurve:
    label: str
    probabilities: np.ndarray
    gradients: np.ndarray

    def __post_init__(self):
        if self.probabilities.shape != self.gradients.shape:
            raise ValueError("probabilities and gradients must have the same length")
        if np.any(np.diff(self.probabilities) <= 0):
            raise ValueError("probability grid must be strictly increasing")

    def argmax(self) -> float:
        return float(self.probabilities[int(np.argmax(self.gradients))])


@dataclass(frozen=True)
class CurveSpec:
    """One column of the gradient-curve table."""

    label: str
    loss: Optional[LossSpec] = None  # None means the unweighted ALPA core
    gamma_neg: float = 4.0

    def negative_gradient(self, p: np.ndarray) -> np.ndarray:
        if self.loss is None:
            return alpa_neg_grad(p, self.gamma_neg)
        _, grad = evaluate_terms(p, np.zeros_like(p), self.loss)
        return grad


def default_curve_specs(gamma_neg: float = 4.0) -> list[CurveSpec]:
    """The four curves: CE (as ASL with m=0, g-=0), Focal g=0.5, ASL m=0.01 g-=0.01, ALPA core."""
    return [
        CurveSpec("ce", LossSpec.asl(gamma_pos=0.0, gamma_neg=0.0, margin=0.0)),
        CurveSpec("focal", LossSpec.focal(gamma=0.5)),
        CurveSpec("asl", LossSpec.asl(gamma_pos=0.0, gamma_neg=0.01, margin=0.01)),
        CurveSpec("alpa", None, gamma_neg=gamma_neg),
    ]


def probability_grid(grid_size: int = DEFAULT_GRID[2], lo: float = DEFAULT_GRID[0],
                     hi: float = DEFAULT_GRID[1]) -> np.ndarray:
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    return np.linspace(lo, hi, grid_size)


def grad_curves(grid_size: int = DEFAULT_GRID[2],
                specs: Optional[Sequence[CurveSpec]] = None) -> list[GradCurve]:
    specs = default_curve_specs() if specs is None else list(specs)
    known = {"ce", "focal", "asl", "alpa"}
    for s in specs:
        if s.label not in known:
            raise ValueError(f"unknown curve label {s.label!r}; expected one of {sorted(known)}")
    p = probability_grid(grid_size)
    return [GradCurve(s.label, p, s.negative_gradient(p)) for s in specs]


def emit_grad_curves(path, grid_size: int = DEFAULT_GRID[2],
                     specs: Optional[Sequence[CurveSpec]] = None) -> list[GradCurve]:
    """Write the curves as CSV (``p,grad_ce,grad_focal,grad_asl,grad_alpa``)."""
    curves = {c.label: c for c in grad_curves(grid_size, specs)}
    missing = [h[len("grad_"):] for h in CSV_HEADER[1:] if h[len("grad_"):] not in curves]
    if missing:
        raise ValueError(f"curve set lacks column(s): {', '.join(missing)}")
    p = next(iter(curves.values())).probabilities
    cols = [curves[h[len("grad_"):]].gradients for h in CSV_HEADER[1:]]
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i, pi in enumerate(p):
            writer.writerow([f"{pi:.9g}"] + [f"{c[i]:.9g}" for c in cols])
    return list(curves.values())
