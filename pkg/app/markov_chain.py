"""
Transition probability matrices, the delay <-> mode bijection and mode sampling.

Modes are numbered 1..s as in the delay/mode bijection H(delta_i) = i; the
position of a delay vector in the alphabet fixes its mode number.
"""

import logging
from bisect import bisect_left
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Sequence, Tuple

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence
from scipy import linalg

from errors import DuplicateDelayError, TpmValidationError, ValidationError
from history_core import DelayVector, as_delay_vector

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class Tpm:
    """Validated row-stochastic matrix; build through validate_tpm"""

    rows: np.ndarray

    @property
    def s(self) -> int:
        return self.rows.shape[0]

    def p(self, i: int, j: int) -> float:
        """p_ij for 1-based modes"""
        return float(self.rows[i - 1, j - 1])

    @cached_property
    def row_tuples(self) -> Tuple[Tuple[float, ...], ...]:
        return tuple(tuple(row) for row in self.rows.tolist())

    @cached_property
    def cumulative(self) -> Tuple[Tuple[float, ...], ...]:
        """Running row sums, scanned left to right by the inversion sampler"""
        return tuple(tuple(np.cumsum(row).tolist()) for row in self.rows)

    def __eq__(self, other):
        if not isinstance(other, Tpm):
            return NotImplemented
        return bool(np.array_equal(self.rows, other.rows))

    def __hash__(self):
        return hash(self.rows.tobytes())


def validate_tpm(rows) -> Tpm:
    """
    Check that `rows` is a square row-stochastic matrix

    Returns:
        Tpm with a read-only copy of the matrix

    Raises:
        TpmValidationError naming the first offending row
    """
    matrix = np.array(rows, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
        raise TpmValidationError(f"TPM must be a non-empty square matrix, got shape {matrix.shape}")
    for i, row in enumerate(matrix, start=1):
        if not np.all(np.isfinite(row)):
            raise TpmValidationError("non-finite entry", row=i)
        if np.any(row < 0.0):
            raise TpmValidationError(f"negative entry {row.min()}", row=i)
        if np.any(row > 1.0):
            raise TpmValidationError(f"entry above 1 ({row.max()})", row=i)
        total = float(np.sum(row))
        if abs(total - 1.0) > ROW_SUM_TOLERANCE:
            raise TpmValidationError(f"row sums to {total!r}, expected 1", row=i)
    matrix.setflags(write=False)
    return Tpm(matrix)


@dataclass(frozen=True)
class DelayBijection:
    """H: delay vector -> mode and its inverse, fixed by alphabet order"""

    alphabet: Tuple[DelayVector, ...]

    @property
    def s(self) -> int:
        return len(self.alphabet)

    @property
    def _index(self) -> Dict[DelayVector, int]:
        return {d: i for i, d in enumerate(self.alphabet, start=1)}

    def forward(self, delay) -> int:
        """H(delay)"""
        d = as_delay_vector(delay)
        try:
            return self._index[d]
        except KeyError:
            raise ValidationError(f"delay {d} is not in the alphabet {list(self.alphabet)}") from None

    def inverse(self, mode: int) -> DelayVector:
        """H^-1(mode)"""
        check_mode(mode, self.s)
        return self.alphabet[mode - 1]


def build_bijection(alphabet: Sequence) -> DelayBijection:
    """Map the delay vector at position i (1-based) to mode i"""
    vectors = tuple(as_delay_vector(d) for d in alphabet)
    if not vectors:
        raise ValidationError("delay alphabet is empty")
    seen = {}
    for position, d in enumerate(vectors, start=1):
        if d in seen:
            raise DuplicateDelayError(d, (seen[d], position))
        seen[d] = position
    return DelayBijection(vectors)


@dataclass(frozen=True)
class MarkovDelayChain:
    tpm: Tpm
    bijection: DelayBijection

    def __post_init__(self):
        if self.tpm.s != self.bijection.s:
            raise ValidationError(f"TPM has {self.tpm.s} modes but the alphabet has {self.bijection.s} delays")

    @property
    def s(self) -> int:
        return self.tpm.s


def check_mode(mode: int, s: int) -> int:
    if isinstance(mode, bool) or not isinstance(mode, (int, np.integer)) or not 1 <= mode <= s:
        raise ValidationError(f"mode index must be an integer in [1, {s}], got {mode!r}")
    return int(mode)


def edge_set(chain: MarkovDelayChain) -> FrozenSet[Tuple[DelayVector, DelayVector]]:
    """All delay pairs (delta_i, delta_j) with p_ij > 0"""
    rows = chain.tpm.rows
    inverse = chain.bijection.inverse
    return frozenset(
        (inverse(i + 1), inverse(j + 1))
        for i, j in zip(*np.nonzero(rows > 0.0))
    )


def _invert(probabilities: Sequence[float], cumulative: Sequence[float], u: float) -> int:
    """
    0-based index of the first bin with u <= cumulative sum; ties go to the
    lower index. Zero-probability bins are never returned, and u beyond the
    last cumulative value (rounding) falls on the last positive bin.
    """
    j = bisect_left(cumulative, u)
    n = len(probabilities)
    while j < n and probabilities[j] == 0.0:
        j += 1
    if j >= n:
        j = max(k for k in range(n) if probabilities[k] > 0.0)
    return j


def sample_next(chain: MarkovDelayChain, i: int, rng: Generator) -> int:
    """Draw eta(k+1) given eta(k) = i by inversion on row i"""
    check_mode(i, chain.s)
    return _invert(chain.tpm.row_tuples[i - 1], chain.tpm.cumulative[i - 1], rng.random()) + 1


def sample_initial(probabilities, rng: Generator) -> int:
    """Draw a 1-based mode from an initial distribution with the same inversion rule"""
    weights = np.asarray(probabilities, dtype=float)
    if weights.ndim != 1 or np.any(weights < 0.0) or abs(float(weights.sum()) - 1.0) > ROW_SUM_TOLERANCE:
        raise ValidationError(f"initial mode distribution must be a probability vector, got {weights.tolist()}")
    return _invert(tuple(weights.tolist()), tuple(np.cumsum(weights).tolist()), rng.random()) + 1


def substream(seed: int, index: int) -> Generator:
    """Independent generator for trajectory `index` of a run seeded with `seed`"""
    return Generator(PCG64(SeedSequence(int(seed), spawn_key=(int(index),))))


def stationary_distribution(tpm: Tpm) -> np.ndarray:
    """
    Left eigenvector of the TPM for eigenvalue 1, normalised to sum 1.
    For reducible chains this is one of several invariant distributions.
    """
    vals, vecs = linalg.eig(tpm.rows.T)
    idx = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, idx])
    pi = pi / pi.sum()
    return np.clip(pi, 0.0, None)
