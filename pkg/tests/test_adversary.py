"""Attack primitives: forwarded states, pass rates, records."""

import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from qconf.adversary import (
    AttackConfig,
    dishonest_middle_announce,
    dos_attack,
    draw_substitute_blind,
    entangle_measure,
    intercept_resend,
    mitm_attack,
)
from qconf.channels import flying, measure_flying
from qconf.codec import consistent_outcome_codes
from qconf.errors import ContractError
from qconf.qsim import QubitSpec
from qconf.rng import make_rng, random_bits

R = 1.0 / math.sqrt(2.0)


class TestAttackConfig:
    def test_none_taps_nothing(self):
        config = AttackConfig()
        assert not config.applies_to("P1->middle")

    def test_target_links_filter(self):
        config = AttackConfig(kind="intercept_resend", target_links=frozenset({"P1->P2"}))
        assert config.applies_to("P1->P2")
        assert not config.applies_to("P2->P3")

    def test_dos_weight_validation(self):
        with pytest.raises(ContractError):
            AttackConfig(kind="dos", dos_weights=(1.0, 1.0, 0.0, 0.0))
        with pytest.raises(ContractError):
            AttackConfig(kind="dos")
        with pytest.raises(ContractError):
            AttackConfig(kind="intercept_resend", dos_weights=(1, 0, 0, 0))

    def test_round_trip(self):
        config = AttackConfig(kind="dos", dos_weights=(0.0, 1.0, 0.0, 0.0))
        assert AttackConfig.from_dict(config.to_dict()) == config


class TestInterceptResend:
    def test_matching_basis_undetectable(self):
        rng = make_rng(40)
        forwarded, (basis, bit) = intercept_resend(flying(QubitSpec("Z", 0)), rng, "Z")
        assert (basis, bit) == ("Z", 0)
        np.testing.assert_allclose(forwarded.state.amplitudes, [1, 0], atol=1e-12)

    def test_wrong_basis_half_detected(self):
        # |0> read in X forwards |+> or |->; a later Z check passes half the
        # time.
        rng = make_rng(41)
        trials = 50_000
        passes = 0
        for _ in range(trials):
            forwarded, _ = intercept_resend(flying(QubitSpec("Z", 0)), rng, "X")
            bit, _ = measure_flying(forwarded, "Z", rng)
            passes += bit == 0
        assert abs(passes / trials - 0.5) < 0.01

    def test_overall_pass_three_quarters(self):
        rng = make_rng(42)
        trials = 100_000
        passes = 0
        for _ in range(trials):
            spec = QubitSpec("ZX"[int(rng.integers(2))], int(rng.integers(2)))
            forwarded, _ = intercept_resend(flying(spec), rng)
            bit, _ = measure_flying(forwarded, spec.basis, rng)
            passes += bit == spec.bit
        assert abs(passes / trials - 0.75) < 0.01


class TestEntangleMeasure:
    def test_z_state_copies(self):
        rng = make_rng(43)
        forwarded, joint = entangle_measure(flying(QubitSpec("Z", 1)), rng)
        expected = np.zeros(4)
        expected[3] = 1.0
        np.testing.assert_allclose(joint.amplitudes, expected, atol=1e-12)
        bit, _ = measure_flying(forwarded, "Z", rng)
        assert bit == 1  # Z checks never fail

    def test_plus_becomes_phi_plus(self):
        rng = make_rng(44)
        _, joint = entangle_measure(flying(QubitSpec("X", 0)), rng)
        np.testing.assert_allclose(joint.amplitudes, [R, 0, 0, R], atol=1e-12)

    def test_minus_becomes_phi_minus(self):
        rng = make_rng(45)
        _, joint = entangle_measure(flying(QubitSpec("X", 1)), rng)
        np.testing.assert_allclose(joint.amplitudes, [R, 0, 0, -R], atol=1e-12)

    def test_x_check_fails_half(self):
        rng = make_rng(46)
        trials = 50_000
        passes = 0
        for _ in range(trials):
            forwarded, _ = entangle_measure(flying(QubitSpec("X", 0)), rng)
            bit, _ = measure_flying(forwarded, "X", rng)
            passes += bit == 0
        assert abs(passes / trials - 0.5) < 0.01


class TestDos:
    def test_identity_weights_pass_always(self):
        rng = make_rng(47)
        out, choice = dos_attack(flying(QubitSpec("X", 1)), (1.0, 0.0, 0.0, 0.0), rng)
        assert choice == 0
        bit, _ = measure_flying(out, "X", rng)
        assert bit == 1

    def test_iy_weights_always_detected(self):
        rng = make_rng(48)
        trials = 5000
        for _ in range(trials):
            spec = QubitSpec("ZX"[int(rng.integers(2))], int(rng.integers(2)))
            out, _ = dos_attack(flying(spec), (0.0, 0.0, 1.0, 0.0), rng)
            bit, _ = measure_flying(out, spec.basis, rng)
            assert bit != spec.bit

    def test_sigma_x_passes_half(self):
        rng = make_rng(49)
        trials = 50_000
        passes = 0
        for _ in range(trials):
            spec = QubitSpec("ZX"[int(rng.integers(2))], int(rng.integers(2)))
            out, _ = dos_attack(flying(spec), (0.0, 1.0, 0.0, 0.0), rng)
            bit, _ = measure_flying(out, spec.basis, rng)
            passes += bit == spec.bit
        assert abs(passes / trials - 0.5) < 0.01

    def test_rejects_bad_weights(self):
        with pytest.raises(ContractError):
            dos_attack(flying(QubitSpec("Z", 0)), (0.5, 0.5, 0.5, 0.0), make_rng(0))


class TestMitm:
    def test_keeps_originals(self):
        rng = make_rng(50)
        originals = [flying(QubitSpec("Z", 1)), flying(QubitSpec("X", 0))]
        kept, substituted, specs = mitm_attack(originals, rng)
        assert kept == originals
        assert len(substituted) == len(specs) == 2

    def test_check_pass_half(self):
        rng = make_rng(51)
        trials = 100_000
        passes = 0
        for _ in range(trials):
            spec = QubitSpec("ZX"[int(rng.integers(2))], int(rng.integers(2)))
            _, substituted, _ = mitm_attack([flying(spec)], rng)
            bit, _ = measure_flying(substituted[0], spec.basis, rng)
            passes += bit == spec.bit
        assert abs(passes / trials - 0.5) < 0.01


def exact_dishonest_middle_pass(n_parties: int) -> Fraction:
    """Exact pass probability of the consistent-set announcement strategy.

    Enumerates preparation basis, true bits, the middle's basis, its result
    distribution, and its uniform announcement; the parties' check accepts
    announcements inside the consistent set of the true bits.
    """
    total = Fraction(0)
    dim = 2**n_parties
    weight = Fraction(1, 2) * Fraction(1, dim) * Fraction(1, 2)
    for x_round in (False, True):
        for bits in product((0, 1), repeat=n_parties):
            allowed = set(consistent_outcome_codes(bits, x_round, n_parties))
            for middle_x in (False, True):
                observed = (
                    {bits: Fraction(1)}
                    if middle_x == x_round
                    else {o: Fraction(1, dim) for o in product((0, 1), repeat=n_parties)}
                )
                for obs, p_obs in observed.items():
                    codes = consistent_outcome_codes(obs, middle_x, n_parties)
                    hit = len([c for c in codes if c in allowed])
                    total += weight * p_obs * Fraction(hit, len(codes))
    return total


class TestDishonestMiddle:
    def test_z_result_announces_matching_index(self):
        rng = make_rng(52)
        for _ in range(100):
            outcome = dishonest_middle_announce([0, 0, 1], False, 3, rng)
            assert outcome.index == 1

    def test_x_result_announces_matching_sign(self):
        rng = make_rng(53)
        for _ in range(100):
            outcome = dishonest_middle_announce([1, 0, 0], True, 3, rng)
            assert outcome.sign == 1

    def test_exact_pass_probability_is_11_16(self):
        # The published figure for this strategy is 7/8, but the total of its
        # own conditionals (1, 1/2, 1/4) under fair basis priors is 11/16,
        # and wrong-basis results carry no information about the checked
        # quantity, so 11/16 is also the strategy optimum.
        assert exact_dishonest_middle_pass(3) == Fraction(11, 16)

    def test_monte_carlo_matches_enumeration(self):
        rng = make_rng(54)
        trials = 50_000
        passes = 0
        for _ in range(trials):
            x_round = bool(rng.integers(2))
            bits = [int(b) for b in random_bits(rng, 3)]
            middle_x = bool(rng.integers(2))
            if middle_x == x_round:
                observed = bits
            else:
                observed = [int(b) for b in random_bits(rng, 3)]
            announced = dishonest_middle_announce(observed, middle_x, 3, rng)
            passes += announced.code in consistent_outcome_codes(bits, x_round, 3)
        assert abs(passes / trials - 11 / 16) < 0.01


class TestDishonestP1:
    def test_substitute_differs(self):
        rng = make_rng(55)
        mask = random_bits(rng, 16)
        for _ in range(100):
            substitute = draw_substitute_blind(mask, rng)
            assert not np.array_equal(substitute, mask)
