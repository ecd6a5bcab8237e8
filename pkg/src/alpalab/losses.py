"""Loss zoo with closed-form derivatives with respect to the logit.

Every loss here is a sum of independent one-vs-rest terms: for each sample
and class there is a probability ``p = sigmoid(z)`` and a binary target
``y``. A term returns its value and ``dvalue/dz``; chaining through the
sigmoid is folded into each closed form (``dp/dz = p (1 - p)``) so that
no negative powers of ``p`` or ``1 - p`` appear where they could overflow.

All losses are non-negative quantities to be minimized. Class sums carry no
``1/K`` factor; batches are reduced by mean or sum over samples.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .numeric import EPS, clamp_prob, sigmoid
from .pade import ALPA_COEFFICIENTS, canonical_alpa_terms


class LossKind(str, Enum):
    BCE = "bce"
    CE = "ce"
    FOCAL = "focal"
    ASL = "asl"
    CB = "cb"
    ALPA = "alpa"


class Variant(str, Enum):
    V1 = "v1"
    V2 = "v2"
    V3 = "v3"
    CUSTOM = "custom"


class CBMode(str, Enum):
    STANDARD = "standard"
    AS_PRINTED = "as_printed"


class Reduction(str, Enum):
    MEAN = "mean"
    SUM = "sum"


# ablation presets: alpha, beta, gamma_pos, gamma_neg, lam
ALPA_PRESETS: dict[Variant, dict[str, Optional[float]]] = {
    Variant.V1: dict(alpha=1.0, beta=1.0, gamma_pos=0.0, gamma_neg=4.0, lam=None),
    Variant.V2: dict(alpha=0.875, beta=1.625, gamma_pos=0.0, gamma_neg=4.0, lam=None),
    Variant.V3: dict(alpha=1.25, beta=2.0, gamma_pos=3.0, gamma_neg=2.0, lam=1.5),
}

_POS_SCALE = -ALPA_COEFFICIENTS.a0  # L+(p) = 1.5 (1 - p)


@dataclass(frozen=True)
class LossSpec:
    """Immutable loss configuration.

    ``alpha``/``beta`` weight the positive/negative branches (Focal uses them
    as alpha+/alpha-); ``gamma_pos``/``gamma_neg`` are the focusing
    exponents; ``margin`` is the ASL probability shift; ``lam`` is the Hill
    offset (ALPA only, ``None`` disables the Hill factor).

    Prefer the class-method constructors, which fill sensible defaults.
    """

    kind: LossKind
    variant: Optional[Variant] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma_pos: Optional[float] = None
    gamma_neg: Optional[float] = None
    margin: float = 0.0
    lam: Optional[float] = None
    cb_beta: float = 0.0
    cb_mode: CBMode = CBMode.STANDARD
    reduction: Reduction = Reduction.MEAN

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        object.__setattr__(self, "cb_mode", CBMode(self.cb_mode))
        object.__setattr__(self, "reduction", Reduction(self.reduction))
        if self.kind is LossKind.ALPA:
            variant = Variant(self.variant) if self.variant is not None else Variant.CUSTOM
            object.__setattr__(self, "variant", variant)
            if variant is not Variant.CUSTOM:
                for key, pinned in ALPA_PRESETS[variant].items():
                    given = getattr(self, key)
                    if given is not None and given != pinned:
                        raise ValueError(
                            f"variant {variant.value} pins {key}={pinned}, got {given}"
                        )
                    object.__setattr__(self, key, pinned)
        elif self.variant is not None:
            raise ValueError("variant applies to ALPA losses only")

        for key in ("alpha", "beta", "gamma_pos", "gamma_neg"):
            val = getattr(self, key)
            if val is not None and not (np.isfinite(val) and val >= 0):
                raise ValueError(f"{key} must be a finite non-negative number, got {val}")
        if not 0.0 <= self.margin < 1.0:
            raise ValueError(f"margin must lie in [0, 1), got {self.margin}")
        if not 0.0 <= self.cb_beta < 1.0:
            raise ValueError(f"cb_beta must lie in [0, 1), got {self.cb_beta}")
        if self.kind is LossKind.FOCAL and self.gamma_pos != self.gamma_neg:
            raise ValueError("focal loss uses a single gamma (gamma_pos must equal gamma_neg)")

    # constructors ---------------------------------------------------------

    @classmethod
    def bce(cls, **kw) -> "LossSpec":
        return cls(LossKind.BCE, **kw)

    @classmethod
    def ce(cls, **kw) -> "LossSpec":
        return cls(LossKind.CE, **kw)

    @classmethod
    def focal(cls, gamma: float = 2.0, alpha_pos: float = 1.0, alpha_neg: float = 1.0, **kw):
        return cls(LossKind.FOCAL, alpha=alpha_pos, beta=alpha_neg,
                   gamma_pos=gamma, gamma_neg=gamma, **kw)

    @classmethod
    def asl(cls, gamma_pos: float = 0.0, gamma_neg: float = 4.0, margin: float = 0.0, **kw):
        return cls(LossKind.ASL, gamma_pos=gamma_pos, gamma_neg=gamma_neg, margin=margin, **kw)

    @classmethod
    def cb(cls, cb_beta: float = 0.99, cb_mode: CBMode = CBMode.STANDARD, **kw):
        return cls(LossKind.CB, cb_beta=cb_beta, cb_mode=cb_mode, **kw)

    @classmethod
    def alpa(cls, variant: Variant | str = Variant.V2, **kw) -> "LossSpec":
        return cls(LossKind.ALPA, variant=Variant(variant), **kw)

    # serialization --------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "LossSpec":
        """Build from a config mapping; ``lambda`` is accepted for ``lam``."""
        data = dict(data)
        if "kind" not in data:
            raise KeyError("loss.kind")
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown loss key(s): {', '.join(sorted(unknown))}")
        kind = LossKind(str(data["kind"]).lower())
        data["kind"] = kind
        # fill kind-specific defaults for keys left out of the config
        defaults = {
            LossKind.FOCAL: dict(alpha=1.0, beta=1.0),
            LossKind.ASL: dict(gamma_pos=0.0),
            LossKind.CB: dict(cb_beta=0.99),
        }.get(kind, {})
        for key, val in defaults.items():
            data.setdefault(key, val)
        if kind is LossKind.FOCAL:
            gamma = data.get("gamma_pos", data.get("gamma_neg", 2.0))
            data.setdefault("gamma_pos", gamma)
            data.setdefault("gamma_neg", gamma)
        return cls(**data)

    def to_dict(self) -> dict:
        out = {}
        for key, val in asdict(self).items():
            if isinstance(val, Enum):
                val = val.value
            if val is None:
                continue
            out["lambda" if key == "lam" else key] = val
        return out

    @property
    def label(self) -> str:
        if self.kind is LossKind.ALPA:
            return f"alpa-{self.variant.value}"
        return self.kind.value

    def require(self, *keys: str) -> None:
        missing = [k for k in keys if getattr(self, k) is None]
        if missing:
            raise ValueError(f"incomplete spec: {self.label} needs {', '.join(missing)}")


@dataclass(frozen=True)
class LossEval:
    """One term's value and its derivative with respect to the logit."""

    value: float
    dvalue_dlogit: float


# --- vectorized kernels -----------------------------------------------------


def _pos_focus(p, gamma):
    """(1-p)^g (-ln p) and its z-derivative."""
    q = 1.0 - p
    nlog = -np.log(p)
    w = q ** gamma
    return w * nlog, -gamma * w * p * nlog - w * q


def _neg_focus(p, gamma, margin=0.0):
    """q^g (-ln(1-q)) with q = max(p - margin, 0), and its z-derivative."""
    if margin == 0.0:
        nlog = -np.log1p(-p)
        w = p ** gamma
        return w * nlog, gamma * w * (1.0 - p) * nlog + w * p
    q = np.maximum(p - margin, 0.0)
    active = q > 0.0
    qs = np.where(active, q, 0.5)
    nlog = -np.log1p(-qs)
    value = np.where(active, qs ** gamma * nlog, 0.0)
    dq = gamma * qs ** (gamma - 1.0) * nlog + qs ** gamma / (1.0 - qs)
    grad = np.where(active, dq * p * (1.0 - p), 0.0)
    return value, grad


def _bce(p, y):
    value = np.where(y == 1, -np.log(p), -np.log1p(-p))
    return value, p - y


def _alpa(p, y, spec: LossSpec):
    spec.require("alpha", "beta", "gamma_pos", "gamma_neg")
    g_pos, g_neg = spec.gamma_pos, spec.gamma_neg
    g_sum = g_pos + g_neg
    q = 1.0 - p
    # y=1: alpha (1-p)^g+ * 1.5(1-p) * (1-p)^(g+ + g-)
    e = g_pos + 1.0 + g_sum
    pos_val = spec.alpha * _POS_SCALE * q ** e
    pos_grad = -spec.alpha * _POS_SCALE * e * q ** e * p
    # y=0: beta p^g- * L-(p) * p^(g+ + g-), L-(p) = p or p (lam - p) with Hill
    f = g_neg + 1.0 + g_sum
    pf = p ** f
    if spec.lam is None:
        neg_val = spec.beta * pf
        neg_grad = spec.beta * f * pf * q
    else:
        hill = spec.lam - p
        neg_val = spec.beta * pf * hill
        neg_grad = spec.beta * pf * q * (f * hill - p)
    return np.where(y == 1, pos_val, neg_val), np.where(y == 1, pos_grad, neg_grad)


def evaluate_terms(p, y, spec: LossSpec, weight=1.0):
    """Vectorized term evaluation: returns ``(values, dvalue_dlogit)`` arrays.

    ``p`` must already be clamped; ``weight`` broadcasts against ``p`` and is
    only used by the class-balanced loss.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("binary targets must be 0 or 1")
    kind = spec.kind
    if kind in (LossKind.BCE, LossKind.CE):
        return _bce(p, y)
    if kind is LossKind.FOCAL:
        spec.require("alpha", "beta", "gamma_pos")
        pv, pg = _pos_focus(p, spec.gamma_pos)
        nv, ng = _neg_focus(p, spec.gamma_pos)
        return (np.where(y == 1, spec.alpha * pv, spec.beta * nv),
                np.where(y == 1, spec.alpha * pg, spec.beta * ng))
    if kind is LossKind.ASL:
        spec.require("gamma_pos", "gamma_neg")
        pv, pg = _pos_focus(p, spec.gamma_pos)
        nv, ng = _neg_focus(p, spec.gamma_neg, spec.margin)
        return np.where(y == 1, pv, nv), np.where(y == 1, pg, ng)
    if kind is LossKind.CB:
        w = np.asarray(weight, dtype=np.float64)
        if spec.cb_mode is CBMode.STANDARD:
            v, g = _bce(p, y)
            return w * v, w * g
        gamma = 1.0 if spec.gamma_pos is None else spec.gamma_pos
        yg = y ** gamma
        return w * yg * -np.log(p), w * yg * (p - 1.0)
    if kind is LossKind.ALPA:
        return _alpa(p, y, spec)
    raise ValueError(f"unknown loss kind {kind}")


# --- scalar API -------------------------------------------------------------


def _scalar(p, y, spec, weight=1.0) -> LossEval:
    v, g = evaluate_terms(p, y, spec, weight)
    return LossEval(float(v), float(g))


def _expect(spec: LossSpec, kind: LossKind) -> None:
    if spec.kind is not kind:
        raise ValueError(f"expected a {kind.value} spec, got {spec.kind.value}")


def bce_term(p: float, y: int) -> LossEval:
    """Binary cross-entropy ``-ln p`` (y=1) or ``-ln(1-p)`` (y=0); gradient ``p - y``."""
    return _scalar(p, y, LossSpec.bce())


def focal_term(p: float, y: int, spec: LossSpec) -> LossEval:
    _expect(spec, LossKind.FOCAL)
    return _scalar(p, y, spec)


def asl_term(p: float, y: int, spec: LossSpec) -> LossEval:
    _expect(spec, LossKind.ASL)
    return _scalar(p, y, spec)


def cb_term(p: float, y: int, spec: LossSpec, weight: float) -> LossEval:
    _expect(spec, LossKind.CB)
    return _scalar(p, y, spec, weight)


def alpa_term(p: float, y: int, spec: LossSpec) -> LossEval:
    """ALPA term ``[alpha y (1-p)^g+ L+ + beta (1-y) p^g- L-] * W``.

    ``W = (1 - pt)^(g+ + g-)`` with ``pt = y p + (1-y)(1-p)``; ``L+`` and
    ``L-`` are the canonical first-order Padé terms, and the V3 preset
    multiplies ``L-`` by the Hill factor ``(lam - p)``.
    """
    _expect(spec, LossKind.ALPA)
    return _scalar(p, y, spec)


def alpa_neg_core(p: float, gamma_neg: float) -> float:
    """Unweighted negative ALPA core ``p^g- * L-(p) = p^(g- + 1)``."""
    if gamma_neg < 0:
        raise ValueError("gamma_neg must be >= 0")
    _, l_neg = canonical_alpa_terms()
    return float(np.float64(p) ** gamma_neg * l_neg(p))


def ce_multiclass(probs: Sequence[float], onehot: Sequence[int]) -> list[LossEval]:
    """Per-class one-vs-rest cross-entropy terms for a single sample."""
    probs = np.asarray(probs, dtype=np.float64)
    onehot = np.asarray(onehot)
    if probs.shape != onehot.shape or probs.ndim != 1:
        raise ValueError(f"length mismatch: {probs.shape} vs {onehot.shape}")
    if not np.all((onehot == 0) | (onehot == 1)) or onehot.sum() != 1:
        raise ValueError("onehot must contain exactly one 1")
    v, g = _bce(probs, onehot.astype(np.float64))
    return [LossEval(float(a), float(b)) for a, b in zip(v, g)]


def cb_weights(counts: Sequence[int], cb_beta: float, mode: CBMode | str = CBMode.STANDARD,
               *, gamma: float = 1.0, normalize: bool = True) -> np.ndarray:
    """Per-class weights for the class-balanced loss.

    Standard mode uses the inverse effective number ``(1-b)/(1-b^n_k)``,
    rescaled to mean 1 when ``normalize`` is set. ``as_printed`` gives every
    class the scalar ``(1-b^gamma)/(1-b)``.
    """
    counts = np.asarray(counts)
    if counts.ndim != 1 or counts.size == 0:
        raise ValueError("counts must be a non-empty vector")
    if np.any(counts < 1):
        raise ValueError(f"every class count must be >= 1, got {counts.tolist()}")
    if not 0.0 <= cb_beta < 1.0:
        raise ValueError(f"cb_beta must lie in [0, 1), got {cb_beta}")
    if CBMode(mode) is CBMode.AS_PRINTED:
        return np.full(counts.shape, (1.0 - cb_beta ** gamma) / (1.0 - cb_beta))
    w = (1.0 - cb_beta) / (1.0 - cb_beta ** counts.astype(np.float64))
    if normalize:
        w = w * (w.size / w.sum())
    return w


def batch_loss(probs, onehots, spec: LossSpec, counts: Optional[Sequence[int]] = None):
    """Reduce terms over a batch.

    Terms are summed over classes per sample, then averaged (or summed) over
    samples. Returns ``(total, grads)`` with ``grads[i, k] = d total / d z[i, k]``.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    onehots = np.atleast_2d(np.asarray(onehots, dtype=np.float64))
    if probs.shape != onehots.shape:
        raise ValueError(f"shape mismatch: probs {probs.shape} vs targets {onehots.shape}")
    weight = 1.0
    if spec.kind is LossKind.CB:
        if counts is None:
            raise ValueError("class-balanced loss needs class counts")
        if len(counts) != probs.shape[1]:
            raise ValueError("counts length must equal the number of classes")
        gamma = 1.0 if spec.gamma_pos is None else spec.gamma_pos
        weight = cb_weights(counts, spec.cb_beta, spec.cb_mode, gamma=gamma)[None, :]
    values, grads = evaluate_terms(clamp_prob(probs, EPS), onehots, spec, weight)
    per_sample = values.sum(axis=1)
    if spec.reduction is Reduction.MEAN:
        n = probs.shape[0]
        return float(per_sample.sum() / n), grads / n
    return float(per_sample.sum()), grads


def batch_loss_from_logits(logits, onehots, spec: LossSpec, counts=None):
    """:func:`batch_loss` on ``sigmoid(logits)``."""
    return batch_loss(sigmoid(np.asarray(logits, dtype=np.float64)), onehots, spec, counts)


def with_reduction(spec: LossSpec, reduction: Reduction | str) -> LossSpec:
    return replace(spec, reduction=Reduction(reduction))
