import numpy as np
import pytest

import pcsim
from pcsim import quantizer
from pcsim.errors import (
    CodeOutOfRange,
    EtaOutOfRange,
    Lambda2NotContractive,
    NonPositiveBeta,
)


class TestEncodeDecode:
    def test_interior_point(self):
        assert pcsim.encode(0.5, 0.0, 1.0, 3) == 4

    def test_lower_saturation(self):
        assert pcsim.encode(-5.0, 0.0, 1.0, 3) == 0

    def test_upper_saturation(self):
        assert pcsim.encode(2.0, 0.0, 1.0, 3) == 7

    def test_decode_midpoint(self):
        assert pcsim.decode(4, 0.0, 1.0, 3) == 0.5625
        assert pcsim.decode(0, 0.0, 1.0, 1) == 0.25

    def test_round_trip_error_at_hand_example(self):
        xq = pcsim.decode(pcsim.encode(0.5, 0.0, 1.0, 3), 0.0, 1.0, 3)
        assert abs(0.5 - xq) == 0.0625  # exactly delta/2 here

    def test_window_edges(self):
        # x == alpha -> code 0; x == alpha + beta saturates to the top cell
        b = 5
        assert pcsim.encode(2.0, 2.0, 3.0, b) == 0
        assert pcsim.encode(5.0, 2.0, 3.0, b) == 2**b - 1
        err = abs(5.0 - pcsim.decode(2**b - 1, 2.0, 3.0, b))
        assert err == pytest.approx(3.0 / 2 ** (b + 1))

    def test_code_range_for_wild_inputs(self):
        x = np.array([-np.inf, -1e300, -1.0, 0.0, 0.5, 1.0, 1e300, np.inf])
        codes = pcsim.encode(x, 0.0, 1.0, 4)
        assert codes.min() >= 0 and codes.max() <= 15
        assert codes[0] == 0 and codes[-1] == 15

    def test_nonpositive_beta(self):
        with pytest.raises(NonPositiveBeta):
            pcsim.encode(0.5, 0.0, 0.0, 3)
        with pytest.raises(NonPositiveBeta):
            pcsim.encode(0.5, 0.0, -1.0, 3)

    def test_code_out_of_range(self):
        with pytest.raises(CodeOutOfRange):
            pcsim.decode(8, 0.0, 1.0, 3)
        with pytest.raises(CodeOutOfRange):
            pcsim.decode(-1, 0.0, 1.0, 3)

    def test_round_trip_bound_sweep(self):
        """100k random in-window points never exceed beta / 2^(b+1).

        Scales keep the quantization cell well above float rounding of
        x - alpha; with beta/|alpha| below ~1e-9 at b=20 the half-cell
        margin is no longer meaningful in 64-bit arithmetic.
        """
        rng = np.random.default_rng(99)
        m = 100_000
        alpha = rng.uniform(-100, 100, m)
        beta = 10.0 ** rng.uniform(-3, 2, m)
        x = alpha + beta * rng.uniform(0.0, 1.0, m)
        for b in range(1, 21):
            pick = slice(b - 1, None, 20)  # disjoint strided subsets, all b used
            code = pcsim.encode(x[pick], alpha[pick], beta[pick], b)
            xq = pcsim.decode(code, alpha[pick], beta[pick], b)
            assert np.all(np.abs(x[pick] - xq) <= beta[pick] / 2 ** (b + 1))

    def test_scalar_in_scalar_out(self):
        code = pcsim.encode(0.3, 0.0, 1.0, 6)
        assert isinstance(code, int)
        assert isinstance(pcsim.decode(code, 0.0, 1.0, 6), float)


class TestBetaSchedule:
    def test_initial_pair_from_state_range(self):
        sched = pcsim.QuantizerSchedule(25, 0.992, 12, 4.0, 6.0)
        assert sched.beta == 2.0  # x_max - x_min
        b1 = sched.beta_step()
        assert b1 == 18.0  # 3 * max(|x_min|, |x_max|)

    def test_negative_range_uses_magnitude(self):
        sched = pcsim.QuantizerSchedule(4, 0.5, 8, -5.0, 3.0)
        assert sched.beta == 8.0
        assert sched.beta_step() == 15.0

    def test_second_step_value(self):
        sched = pcsim.QuantizerSchedule(25, 0.992, 12, 4.0, 6.0)
        sched.beta_step()
        b2 = sched.beta_step()
        assert b2 == pytest.approx(17.924, abs=1e-3)
        assert b2 == pytest.approx(17.924417968750003, rel=1e-15)

    def test_zero_state_stays_zero(self):
        n, lam, bits = 9, 0.7, 10
        a = 3 * np.sqrt(n) / 2**bits + lam
        c = np.sqrt(n) / 2**bits * (4 - 3 * lam)
        prev, cur = 0.0, 0.0
        for _ in range(50):
            prev, cur = cur, a * cur + c * prev
            assert cur == 0.0

    def test_sequence_nonnegative(self):
        for bits in (6, 10, 14):
            seq = pcsim.beta_sequence(16, 0.85, bits, (-2.0, 7.0), 300)
            assert np.all(seq >= 0.0)

    def test_recursion_matches_summed_form(self):
        for n in (4, 25, 100):
            for bits in (6, 12, 16):
                for lam in (0.3, 0.9, 0.992):
                    a = pcsim.beta_sequence(n, lam, bits, (-3.0, 5.0), 200)
                    b = pcsim.beta_sequence_summed(n, lam, bits, (-3.0, 5.0), 200)
                    rel = np.abs(a - b) / np.maximum(np.abs(a), 1e-300)
                    assert np.max(rel) <= 1e-9, (n, bits, lam)

    def test_alpha_window_centers_on_previous_decode(self):
        sched = pcsim.QuantizerSchedule(25, 0.992, 12, 4.0, 6.0)
        assert np.all(sched.alpha == 4.0)  # k = 0 window starts at x_min
        beta1 = sched.beta_step()
        sched.alpha_update(np.zeros(25))
        np.testing.assert_allclose(sched.alpha, -beta1 / 2)
        # window [-beta/2, +beta/2] brackets the centered signal
        assert np.all(sched.alpha <= 0.0) and np.all(sched.alpha + beta1 >= 0.0)

    def test_decay_bound_with_rate_derived_bits(self):
        """beta(k) <= hypot(beta1, beta0) * eta^k whenever eta is feasible."""
        rng = np.random.default_rng(21)
        for _ in range(25):
            n = int(rng.integers(3, 40))
            lam = float(rng.uniform(0.2, 0.85))
            x_min, x_max = sorted(rng.uniform(-8, 8, 2))
            if x_max - x_min < 0.5:
                continue
            b0 = x_max - x_min
            b1 = 3 * max(abs(x_min), abs(x_max))
            bbar = np.hypot(b1, b0)
            # the k=1 step needs beta(1) <= bbar*eta, so eta >= b1/bbar
            lo = max(lam + 0.02, b1 / bbar + 1e-3)
            if lo >= 0.995:
                continue
            eta = float(rng.uniform(lo, 0.995))
            bits = pcsim.bits_for_rate(n, lam, eta)
            seq = pcsim.beta_sequence(n, lam, bits, (x_min, x_max), 500)
            bound = bbar * eta ** np.arange(501)
            assert np.all(seq <= bound * (1 + 1e-12))

    def test_decay_bound_fails_below_its_eta_floor(self):
        # with x_range [4, 6]: beta(1) = 18 > hypot(18, 2) * eta once
        # eta < 18/hypot(18,2) ~ 0.9939, independent of the bit width —
        # the k = 1 comparison alone rules such eta out
        bbar = np.hypot(18.0, 2.0)
        assert 18.0 > bbar * 0.993
        assert 18.0 <= bbar * 0.994


class TestBitThresholds:
    def test_threshold_at_study_size(self):
        rhs = pcsim.min_bits_threshold(25, 0.992)
        assert rhs == pytest.approx(11.296342684692888, rel=1e-15)
        assert pcsim.min_bits(25, 0.992) == 12

    def test_threshold_small_network(self):
        rhs = pcsim.min_bits_threshold(2, 0.0)
        assert rhs == pytest.approx(0.5 + np.log2(7.0), rel=1e-14)
        assert pcsim.min_bits(2, 0.0) == 4

    def test_integer_threshold_is_exceeded_strictly(self):
        # min_bits must be strictly above the threshold even when the
        # threshold is itself an integer
        lam = 1.0 - (7.0 - 3.0) / (2**4 / np.sqrt(4) * 1.0 + 3.0)  # contrived
        rhs = pcsim.min_bits_threshold(4, lam)
        b = pcsim.min_bits(4, lam)
        assert b > rhs

    def test_not_contractive(self):
        for lam in (1.0, 1.5):
            with pytest.raises(Lambda2NotContractive):
                pcsim.min_bits_threshold(25, lam)
            with pytest.raises(Lambda2NotContractive):
                pcsim.min_bits(25, lam)

    def test_bits_for_rate_study_point(self):
        b = pcsim.bits_for_rate(25, 0.992, 0.996)
        assert b == 13
        assert pcsim.effective_eta(25, 0.992, b) <= 0.996

    def test_bits_for_rate_blows_up_near_lambda2(self):
        # the requirement grows like log2(1/(eta - |lambda2|))
        near = [pcsim.bits_for_rate(25, 0.992, 0.992 + gap) for gap in (1e-3, 1e-4, 1e-6, 1e-8)]
        assert near == sorted(near)
        assert near[-1] > near[0] + 10

    def test_bits_for_rate_monotone_in_eta(self):
        lam = 0.8
        etas = np.linspace(0.81, 0.999, 40)
        bs = [pcsim.bits_for_rate(10, lam, float(e)) for e in etas]
        assert all(b2 <= b1 for b1, b2 in zip(bs, bs[1:]))

    def test_eta_out_of_range(self):
        with pytest.raises(EtaOutOfRange):
            pcsim.bits_for_rate(25, 0.992, 0.9)  # below |lambda2|
        with pytest.raises(EtaOutOfRange):
            pcsim.bits_for_rate(25, 0.992, 1.0)

    def test_effective_eta_limit_is_lambda2(self):
        assert pcsim.effective_eta(25, 0.992, 60) == pytest.approx(0.992, abs=1e-12)

    def test_effective_eta_below_one_at_sufficient_bits(self):
        assert pcsim.effective_eta(25, 0.992, 12) < 1.0

    def test_decay_iff_threshold_exceeded(self):
        for lam in (0.0, 0.5, 0.9, 0.992):
            threshold = pcsim.min_bits_threshold(25, lam)
            for b in range(1, 33):
                assert (pcsim.effective_eta(25, lam, b) < 1.0) == (b > threshold)

    def test_threshold_sharpness_on_study_parameters(self):
        # one bit below the threshold the schedule grows; at the
        # threshold it contracts to (numerical) zero
        grow = pcsim.beta_sequence(25, 0.992, 11, (4.0, 6.0), 500)
        assert grow[-1] > grow[1]
        decay = pcsim.beta_sequence(25, 0.992, 12, (4.0, 6.0), 5000)
        assert decay[-1] < 1e-3 * decay[0]


class TestRateBudget:
    def test_study_rate(self, ring25, spectral25):
        total = pcsim.required_total_rate(ring25, spectral25)
        assert total == pytest.approx(25 * pcsim.min_bits_threshold(25, spectral25.lambda2_mag))
        assert int(np.ceil(total)) == 283

    def test_overhead_is_linear(self, ring25, spectral25):
        base = pcsim.required_total_rate(ring25, spectral25, overhead_bits=0)
        plus8 = pcsim.required_total_rate(ring25, spectral25, overhead_bits=8)
        assert plus8 - base == pytest.approx(25 * 8)

    def test_rate_scales_with_link_count(self, ring25, spectral25):
        two_step = pcsim.ring_lattice(25, 2, "uniform")
        # same N and |lambda2| by construction of the comparison: reuse
        # the ring's spectral data, double the links via a denser net
        dense = pcsim.build_network(
            25,
            ring25.edges + two_step.edges,
            {**{k: 0.25 for k in ring25.weights}, **{k: 0.25 for k in two_step.weights}},
        )
        assert dense.link_count == 2 * ring25.link_count
        ratio = pcsim.required_total_rate(dense, spectral25) / pcsim.required_total_rate(
            ring25, spectral25
        )
        assert ratio == pytest.approx(2.0)

    def test_per_message_bits(self):
        budget = pcsim.RateBudget(total_rate=283, overhead=0, link_count=25)
        assert budget.bits_per_message == 11
        with pytest.raises(ValueError):
            _ = pcsim.RateBudget(total_rate=25, overhead=1, link_count=25).bits_per_message
