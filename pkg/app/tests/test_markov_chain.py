import numpy as np
import pytest

from errors import DuplicateDelayError, TpmValidationError, ValidationError
from markov_chain import (
    MarkovDelayChain,
    _invert,
    build_bijection,
    edge_set,
    sample_initial,
    sample_next,
    stationary_distribution,
    substream,
    validate_tpm,
)


def make_chain(rows, alphabet=((0,), (2,))):
    return MarkovDelayChain(validate_tpm(rows), build_bijection(alphabet))


class TestValidateTpm:
    def test_reference_matrix(self):
        tpm = validate_tpm([[0.95, 0.05], [0.99, 0.01]])
        assert tpm.s == 2
        assert tpm.p(1, 2) == 0.05
        assert tpm.p(2, 2) == 0.01

    def test_row_sum_reports_row(self):
        with pytest.raises(TpmValidationError) as info:
            validate_tpm([[0.5, 0.5], [0.6, 0.5]])
        assert info.value.row == 2

    def test_negative_entry(self):
        with pytest.raises(TpmValidationError) as info:
            validate_tpm([[1.1, -0.1], [0.5, 0.5]])
        assert info.value.row == 1

    def test_row_sum_tolerance(self):
        validate_tpm([[0.5, 0.5 + 5e-13], [0.0, 1.0]])
        with pytest.raises(TpmValidationError):
            validate_tpm([[0.5, 0.5 + 1e-9], [0.0, 1.0]])

    def test_not_square(self):
        with pytest.raises(TpmValidationError):
            validate_tpm([[1.0, 0.0]])

    def test_read_only(self):
        tpm = validate_tpm([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            tpm.rows[0, 0] = 0.5


class TestBijection:
    def test_alphabet_order_fixes_modes(self):
        bijection = build_bijection([(0,), (2,)])
        assert bijection.forward((0,)) == 1
        assert bijection.forward(2) == 2
        assert bijection.inverse(2) == (2,)

    @pytest.mark.parametrize("alphabet", [[(0,), (2,)], [(2,), (0,), (1,)], [(0, 1), (1, 0), (1, 1), (0, 0)]])
    def test_round_trip_over_modes_and_delays(self, alphabet):
        bijection = build_bijection(alphabet)
        for mode in range(1, bijection.s + 1):
            assert bijection.forward(bijection.inverse(mode)) == mode
        for delay in alphabet:
            assert bijection.inverse(bijection.forward(delay)) == delay

    def test_duplicate_delay(self):
        with pytest.raises(DuplicateDelayError) as info:
            build_bijection([(0,), (2,), (0,)])
        assert info.value.positions == (1, 3)

    def test_mode_out_of_range(self):
        with pytest.raises(ValidationError):
            build_bijection([(0,), (2,)]).inverse(3)

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            make_chain([[1.0]])


class TestSampling:
    def test_deterministic_row(self):
        chain = make_chain([[0.0, 1.0], [1.0, 0.0]])
        rng = substream(0, 0)
        assert all(sample_next(chain, 1, rng) == 2 for _ in range(100))
        assert all(sample_next(chain, 2, rng) == 1 for _ in range(100))

    def test_tie_goes_to_lower_index(self):
        assert _invert((0.5, 0.5), (0.5, 1.0), 0.5) == 0

    def test_zero_probability_bins_skipped(self):
        probabilities = (0.0, 1.0, 0.0)
        cumulative = (0.0, 1.0, 1.0)
        assert _invert(probabilities, cumulative, 0.0) == 1
        assert _invert(probabilities, cumulative, 1.0) == 1
        assert _invert(probabilities, cumulative, 1.0 + 1e-15) == 1

    def test_initial_distribution(self):
        rng = substream(3, 0)
        assert sample_initial([0.0, 1.0], rng) == 2
        with pytest.raises(ValidationError):
            sample_initial([0.5, 0.6], rng)

    def test_substreams_reproducible_and_distinct(self):
        assert substream(7, 3).random() == substream(7, 3).random()
        assert substream(7, 3).random() != substream(7, 4).random()
        assert substream(7, 3).random() != substream(8, 3).random()

    @pytest.mark.slow
    def test_empirical_frequencies(self):
        chain = make_chain([[0.95, 0.05], [0.99, 0.01]])
        rng = substream(11, 0)
        draws = np.array([sample_next(chain, 1, rng) for _ in range(1_000_000)])
        assert np.mean(draws == 2) == pytest.approx(0.05, abs=2e-3)


class TestChainProperties:
    def test_edge_set(self):
        chain = make_chain([[1.0, 0.0], [0.3, 0.7]])
        assert edge_set(chain) == frozenset({((0,), (0,)), ((2,), (0,)), ((2,), (2,))})

    @pytest.mark.parametrize("rows, expected", [
        ([[0.95, 0.05], [0.99, 0.01]], {((0,), (0,)), ((0,), (2,)), ((2,), (0,)), ((2,), (2,))}),
        ([[1.0, 0.0], [0.0, 1.0]], {((0,), (0,)), ((2,), (2,))}),
        ([[0.0, 1.0], [1.0, 0.0]], {((0,), (2,)), ((2,), (0,))}),
    ])
    def test_edge_set_examples(self, rows, expected):
        assert edge_set(make_chain(rows)) == frozenset(expected)

    def test_stationary_distribution(self):
        p, q = 0.95, 0.01
        pi = stationary_distribution(validate_tpm([[p, 1 - p], [1 - q, q]]))
        expected_first = (1 - q) / ((1 - p) + (1 - q))
        assert pi == pytest.approx([expected_first, 1 - expected_first], abs=1e-12)
