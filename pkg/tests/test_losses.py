import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alpalab.gradcheck import check_term_gradient
from alpalab.losses import (
    CBMode,
    LossKind,
    LossSpec,
    Reduction,
    Variant,
    alpa_neg_core,
    alpa_term,
    asl_term,
    batch_loss,
    bce_term,
    cb_weights,
    ce_multiclass,
    evaluate_terms,
    focal_term,
)
from alpalab.numeric import EPS, sigmoid

LN2 = 0.69314718055994530942
CE3_ORACLE = 4.0173835210859724
Z_GRID = np.linspace(-5.0, 5.0, 101)
P_GRID = sigmoid(Z_GRID)

ALL_PRESETS = [
    LossSpec.bce(),
    LossSpec.ce(),
    LossSpec.focal(gamma=0.5),
    LossSpec.focal(gamma=2.0, alpha_pos=0.25, alpha_neg=0.75),
    LossSpec.asl(gamma_pos=0.0, gamma_neg=4.0),
    LossSpec.asl(gamma_pos=1.0, gamma_neg=4.0, margin=0.05),
    LossSpec.cb(cb_beta=0.99),
    LossSpec.alpa(Variant.V1),
    LossSpec.alpa(Variant.V2),
    LossSpec.alpa(Variant.V3),
]


class TestSpec:
    def test_presets_are_pinned(self):
        v1, v2, v3 = (LossSpec.alpa(v) for v in ("v1", "v2", "v3"))
        assert (v1.alpha, v1.beta, v1.gamma_pos, v1.gamma_neg, v1.lam) == (1.0, 1.0, 0.0, 4.0, None)
        assert (v2.alpha, v2.beta, v2.gamma_pos, v2.gamma_neg, v2.lam) == (0.875, 1.625, 0.0, 4.0, None)
        assert (v3.alpha, v3.beta, v3.gamma_pos, v3.gamma_neg, v3.lam) == (1.25, 2.0, 3.0, 2.0, 1.5)

    def test_preset_conflict(self):
        with pytest.raises(ValueError, match="pins alpha"):
            LossSpec.alpa("v2", alpha=1.0)

    def test_custom_incomplete(self):
        spec = LossSpec(LossKind.ALPA, variant=Variant.CUSTOM, alpha=1.0)
        with pytest.raises(ValueError, match="incomplete spec"):
            alpa_term(0.5, 1, spec)

    def test_focal_single_gamma(self):
        with pytest.raises(ValueError):
            LossSpec(LossKind.FOCAL, alpha=1.0, beta=1.0, gamma_pos=1.0, gamma_neg=2.0)

    def test_negative_gamma_rejected(self):
        with pytest.raises(ValueError):
            LossSpec.focal(gamma=-1.0)

    @pytest.mark.parametrize("margin", [-0.1, 1.0])
    def test_margin_range(self, margin):
        with pytest.raises(ValueError):
            LossSpec.asl(margin=margin)

    @pytest.mark.parametrize("spec", ALL_PRESETS, ids=lambda s: s.label)
    def test_dict_roundtrip(self, spec):
        assert LossSpec.from_dict(spec.to_dict()) == spec

    def test_from_dict_lambda_key(self):
        spec = LossSpec.from_dict({"kind": "alpa", "variant": "custom", "alpha": 1, "beta": 1,
                                   "gamma_pos": 0, "gamma_neg": 2, "lambda": 1.2})
        assert spec.lam == 1.2


class TestBCE:
    def test_values(self):
        e = bce_term(0.5, 1)
        assert e.value == pytest.approx(LN2, rel=1e-15) and e.dvalue_dlogit == -0.5
        e = bce_term(0.5, 0)
        assert e.value == pytest.approx(LN2, rel=1e-15) and e.dvalue_dlogit == 0.5

    def test_perfect(self):
        e = bce_term(1 - EPS, 1)
        assert e.value == pytest.approx(0.0, abs=1e-11)
        assert e.dvalue_dlogit == pytest.approx(0.0, abs=1e-11)

    def test_rejects_soft_target(self):
        with pytest.raises(ValueError):
            bce_term(0.5, 0.3)


class TestCE:
    def test_two_class(self):
        total = sum(e.value for e in ce_multiclass([0.5, 0.5], [1, 0]))
        assert total == pytest.approx(2 * LN2, rel=1e-15)

    def test_perfect(self):
        total = sum(e.value for e in ce_multiclass([1 - EPS, EPS], [1, 0]))
        assert total == pytest.approx(0.0, abs=1e-11)

    def test_three_class(self):
        # -ln(1 - 0.9) - ln 0.2 - ln(1 - 0.1), 40-digit mpmath
        total = sum(e.value for e in ce_multiclass([0.9, 0.2, 0.1], [0, 1, 0]))
        assert total == pytest.approx(CE3_ORACLE, rel=1e-14)

    def test_all_negative_sum(self):
        # the three negative terms alone, as in a target set to the absent class
        terms = ce_multiclass([0.9, 0.2, 0.1, 0.5], [0, 0, 0, 1])
        assert sum(e.value for e in terms[:3]) == pytest.approx(2.631089159966081741, rel=1e-14)

    def test_errors(self):
        with pytest.raises(ValueError, match="length mismatch"):
            ce_multiclass([0.5, 0.5], [1, 0, 0])
        with pytest.raises(ValueError, match="exactly one"):
            ce_multiclass([0.5, 0.5], [1, 1])


class TestFocal:
    def test_value(self):
        e = focal_term(0.9, 1, LossSpec.focal(gamma=2.0))
        assert e.value == pytest.approx(0.0010536051565782630123, rel=1e-13)

    def test_gamma_zero_is_bce(self):
        spec = LossSpec.focal(gamma=0.0)
        for y in (0, 1):
            v, g = evaluate_terms(P_GRID, y, spec)
            bv, bg = evaluate_terms(P_GRID, y, LossSpec.bce())
            np.testing.assert_allclose(v, bv, rtol=0, atol=1e-12)
            np.testing.assert_allclose(g, bg, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("gamma", [0.5, 2.0, 5.0])
    def test_well_classified_vanishes(self, gamma):
        assert focal_term(1 - EPS, 1, LossSpec.focal(gamma=gamma)).value == pytest.approx(0, abs=1e-11)

    def test_wrong_kind(self):
        with pytest.raises(ValueError):
            focal_term(0.5, 1, LossSpec.bce())


class TestASL:
    def test_value(self):
        e = asl_term(0.5, 0, LossSpec.asl(gamma_neg=4.0))
        assert e.value == pytest.approx(0.043321698784996581839, rel=1e-14)

    @pytest.mark.parametrize("gamma", [0.0, 0.5, 2.0, 4.0])
    def test_symmetric_is_focal(self, gamma):
        a = LossSpec.asl(gamma_pos=gamma, gamma_neg=gamma, margin=0.0)
        f = LossSpec.focal(gamma=gamma)
        for y in (0, 1):
            av, ag = evaluate_terms(P_GRID, y, a)
            fv, fg = evaluate_terms(P_GRID, y, f)
            np.testing.assert_allclose(av, fv, rtol=0, atol=1e-12)
            np.testing.assert_allclose(ag, fg, rtol=0, atol=1e-12)

    def test_margin_clips_to_zero(self):
        e = asl_term(0.005, 0, LossSpec.asl(gamma_neg=0.01, margin=0.01))
        assert e.value == 0.0 and e.dvalue_dlogit == 0.0

    def test_margin_shift(self):
        # p = 0.3, m = 0.1: value of the shifted probability 0.2
        e = asl_term(0.3, 0, LossSpec.asl(gamma_neg=2.0, margin=0.1))
        assert e.value == pytest.approx(0.2 ** 2 * -np.log(0.8), rel=1e-14)


class TestCB:
    def test_raw_weight(self):
        w = cb_weights([10], 0.99, normalize=False)
        assert w[0] == pytest.approx(0.1045829011759123523, rel=1e-13)

    def test_beta_zero(self):
        np.testing.assert_array_equal(cb_weights([5, 50, 500], 0.0, normalize=False), 1.0)
        np.testing.assert_array_equal(cb_weights([5, 50, 500], 0.0), 1.0)

    def test_tail_weighted_more(self):
        w = cb_weights([100, 1], 0.9)
        assert w[1] > w[0]

    def test_normalised_mean_one(self):
        assert cb_weights([1000, 100, 10, 3], 0.999).mean() == pytest.approx(1.0, rel=1e-15)

    @given(st.lists(st.integers(1, 5000), min_size=2, max_size=12, unique=True),
           st.floats(0.5, 0.9999))
    def test_strictly_decreasing_in_count(self, counts, beta):
        counts = sorted(counts)
        w = cb_weights(counts, beta)
        assert np.all(np.diff(w) <= 0)
        # strict while beta^n is still resolvable against 1
        live = np.array(counts) * np.log(beta) > np.log(1e-13)
        assert np.all(np.diff(w[live]) < 0)

    def test_errors(self):
        with pytest.raises(ValueError):
            cb_weights([3, 0], 0.9)
        with pytest.raises(ValueError):
            cb_weights([3, 4], 1.0)

    def test_as_printed_scalar(self):
        w = cb_weights([10, 20], 0.9, CBMode.AS_PRINTED, gamma=2.0)
        np.testing.assert_allclose(w, (1 - 0.81) / 0.1)


class TestALPA:
    def test_v2_positive(self):
        e = alpa_term(0.9, 1, LossSpec.alpa("v2"))
        assert e.value == pytest.approx(0.875 * 1.5 * 0.1 * 0.1 ** 4, rel=1e-12)
        assert e.value == pytest.approx(1.3125e-5, rel=1e-12)

    def test_v2_negative(self):
        e = alpa_term(0.2, 0, LossSpec.alpa("v2"))
        assert e.value == pytest.approx(1.625 * 0.2 ** 9, rel=1e-12)
        assert e.value == pytest.approx(8.32e-7, rel=1e-12)

    def test_v3_hill(self):
        # beta p^g- * p(lam - p) * p^(g+ + g-), p = 0.4, g- = 2, g+ = 3
        e = alpa_term(0.4, 0, LossSpec.alpa("v3"))
        assert e.value == pytest.approx(2.0 * 0.4 ** 2 * 0.4 * (1.5 - 0.4) * 0.4 ** 5, rel=1e-12)

    @pytest.mark.parametrize("variant", ["v1", "v2", "v3"])
    def test_confident_correct_vanishes(self, variant):
        spec = LossSpec.alpa(variant)
        assert alpa_term(1 - EPS, 1, spec).value == pytest.approx(0, abs=1e-20)
        assert alpa_term(EPS, 0, spec).value == pytest.approx(0, abs=1e-20)

    def test_neg_core(self):
        assert alpa_neg_core(0.5, 4) == 0.03125
        assert alpa_neg_core(0.5, 0) == 0.5
        assert alpa_neg_core(1.0, 4) == 1.0

    @pytest.mark.parametrize("gamma", [0.0, 1.0, 2.0, 4.0])
    def test_neg_core_identity(self, gamma):
        from alpalab.pade import canonical_alpa_terms

        _, l_neg = canonical_alpa_terms()
        for p in np.linspace(0, 1, 257):
            assert p ** gamma * l_neg(p) == alpa_neg_core(p, gamma)
            assert alpa_neg_core(p, gamma) == pytest.approx(p ** (gamma + 1), rel=1e-15)


class TestProperties:
    @pytest.mark.parametrize("spec", ALL_PRESETS, ids=lambda s: s.label)
    def test_gradients_match_finite_differences(self, spec):
        assert check_term_gradient(spec, Z_GRID, h=1e-5, weight=1.7) <= 1e-6

    @pytest.mark.parametrize("spec", ALL_PRESETS, ids=lambda s: s.label)
    def test_monotone_and_non_negative(self, spec):
        p = np.linspace(EPS, 1 - EPS, 2001)
        pos, _ = evaluate_terms(p, 1, spec)
        neg, _ = evaluate_terms(p, 0, spec)
        assert np.all(np.diff(pos) <= 0)
        assert np.all(np.diff(neg) >= 0)
        assert pos.min() >= 0 and neg.min() >= 0

    @settings(max_examples=200)
    @given(st.floats(0.0, 1.0), st.floats(0.0, 6.0), st.floats(0.0, 6.0),
           st.floats(0.0, 3.0), st.floats(0.0, 3.0), st.sampled_from([0, 1]))
    def test_custom_alpa_non_negative(self, p, gp, gn, a, b, y):
        spec = LossSpec(LossKind.ALPA, variant=Variant.CUSTOM, alpha=a, beta=b,
                        gamma_pos=gp, gamma_neg=gn)
        v, g = evaluate_terms(np.clip(p, EPS, 1 - EPS), y, spec)
        assert v >= 0 and np.isfinite(g)


class TestBatch:
    def test_single_term(self):
        spec = LossSpec.alpa("v2")
        total, grads = batch_loss([[0.9]], [[1]], spec)
        e = alpa_term(0.9, 1, spec)
        assert total == e.value and grads[0, 0] == e.dvalue_dlogit

    def test_sum_duplicates(self):
        spec = LossSpec.focal(gamma=2.0, reduction=Reduction.SUM)
        one, _ = batch_loss([[0.3, 0.6]], [[1, 0]], spec)
        two, _ = batch_loss([[0.3, 0.6], [0.3, 0.6]], [[1, 0], [1, 0]], spec)
        assert two == pytest.approx(2 * one, rel=1e-15)

    def test_mean_of_two(self):
        spec = LossSpec.asl(gamma_neg=4.0)
        probs = np.array([[0.3, 0.6, 0.2], [0.8, 0.1, 0.5]])
        y = np.array([[1, 0, 0], [0, 0, 1]])
        total, grads = batch_loss(probs, y, spec)
        per = [sum(asl_term(p, t, spec).value for p, t in zip(pr, yr)) for pr, yr in zip(probs, y)]
        assert total == pytest.approx(np.mean(per), rel=1e-14)
        assert grads[1, 2] == pytest.approx(asl_term(0.5, 1, spec).dvalue_dlogit / 2, rel=1e-14)

    def test_cb_needs_counts(self):
        with pytest.raises(ValueError):
            batch_loss([[0.5, 0.5]], [[1, 0]], LossSpec.cb())

    def test_cb_weights_applied(self):
        spec = LossSpec.cb(0.9, reduction="sum")
        total, _ = batch_loss([[0.5, 0.5]], [[1, 0]], spec, counts=[100, 1])
        w = cb_weights([100, 1], 0.9)
        assert total == pytest.approx((w[0] + w[1]) * LN2, rel=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            batch_loss([[0.5, 0.5]], [[1, 0, 0]], LossSpec.bce())
