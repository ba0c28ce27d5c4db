"""
History-space states and the lifted one-step map of a delay system.

A history is the finite segment phi: {-delta, ..., 0} -> R^n. The public API
indexes slots by theta in {-delta, ..., 0}; storage row delta + theta holds
phi(theta), so row 0 is the oldest slot and the last row is the current state.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np

from errors import (
    AlphabetViolationError,
    DimensionMismatchError,
    NumericFaultError,
    ValidationError,
)

logger = logging.getLogger(__name__)

ZERO_TOLERANCE = 1e-12

DelayVector = Tuple[int, ...]


def as_delay_vector(entries, delta=None) -> DelayVector:
    """
    Coerce an int or a sequence of ints into a DelayVector

    Args:
        entries: A single delay or a sequence of r delays
        delta: Maximum delay; when given every entry must lie in {0, ..., delta}

    Returns:
        Tuple of non-negative ints
    """
    if isinstance(entries, (int, np.integer)):
        entries = (entries,)
    try:
        vector = tuple(int(d) for d in entries)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"delay vector {entries!r} is not a sequence of integers") from e
    for position, d in enumerate(vector):
        if d < 0:
            raise ValidationError(f"delay entry {position} is negative ({d})")
        if delta is not None and d > delta:
            raise ValidationError(f"delay entry {position} is {d}, above the maximum delay {delta}")
    return vector


@dataclass(frozen=True, eq=False)
class History:
    """Immutable history segment; `values` has shape (delta + 1, dim)"""

    values: np.ndarray

    def __post_init__(self):
        array = np.array(self.values, dtype=float)
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2 or array.shape[0] < 1:
            raise DimensionMismatchError("history.values", "(delta + 1, dim) array", array.shape)
        array.setflags(write=False)
        object.__setattr__(self, "values", array)

    @classmethod
    def from_slots(cls, slots: Sequence) -> "History":
        """Build from slots ordered oldest first: phi(-delta), ..., phi(0)"""
        return cls(np.asarray(slots, dtype=float))

    @classmethod
    def zeros(cls, delta: int, dim: int = 1) -> "History":
        return cls(np.zeros((delta + 1, dim)))

    @classmethod
    def constant(cls, delta: int, value, dim: int = 1) -> "History":
        """Every slot equal to `value` (a scalar broadcast to R^dim or a vector)"""
        row = np.broadcast_to(np.asarray(value, dtype=float), (dim,))
        return cls(np.tile(row, (delta + 1, 1)))

    @property
    def delta(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def state(self) -> np.ndarray:
        """phi(0)"""
        return self.values[-1]

    def at(self, theta: int) -> np.ndarray:
        if not -self.delta <= theta <= 0:
            raise ValidationError(f"theta must lie in [-{self.delta}, 0], got {theta}")
        return self.values[self.delta + theta]

    def __getitem__(self, theta: int) -> np.ndarray:
        return self.at(theta)

    def as_array(self) -> np.ndarray:
        return self.values

    def __eq__(self, other):
        if not isinstance(other, History):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.values.shape, self.values.tobytes()))

    def __repr__(self):
        return f"History(delta={self.delta}, dim={self.dim}, values={self.values.tolist()})"


def sup_norm(phi: History) -> float:
    """max over theta of the Euclidean norm of phi(theta)"""
    return float(np.max(np.linalg.norm(phi.values, axis=1)))


@dataclass(frozen=True)
class DelayModel:
    """
    Discrete-time system x(k+1) = f(x(k), x(k - d_1(k)), ..., x(k - d_r(k)))

    Attributes:
        n: State dimension
        r: Number of delayed arguments
        delta: Maximum delay
        dynamics: f, called as f(x0, x_d1, ..., x_dr) with each argument in R^n
        alphabet: Admissible delay vectors, in mode order
        name: Label used in logs and manifests
    """

    n: int
    r: int
    delta: int
    dynamics: Callable[..., np.ndarray]
    alphabet: Tuple[DelayVector, ...]
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.r < 0 or self.delta < 0:
            raise ValidationError(f"invalid dimensions n={self.n}, r={self.r}, delta={self.delta}")
        alphabet = tuple(as_delay_vector(d, self.delta) for d in self.alphabet)
        if not alphabet:
            raise ValidationError("delay alphabet is empty")
        for position, d in enumerate(alphabet):
            if len(d) != self.r:
                raise DimensionMismatchError("alphabet entry length", self.r, len(d), index=position)
        if len(set(alphabet)) != len(alphabet):
            raise ValidationError(f"delay alphabet has repeated entries: {list(alphabet)}")
        object.__setattr__(self, "alphabet", alphabet)

        at_zero = _evaluate(self, [np.zeros(self.n)] * (self.r + 1))
        if np.max(np.abs(at_zero)) > ZERO_TOLERANCE:
            raise ValidationError(f"f(0, ..., 0) = {at_zero.tolist()} for model '{self.name}', expected 0")


def _evaluate(model: DelayModel, arguments) -> np.ndarray:
    try:
        out = np.asarray(model.dynamics(*arguments), dtype=float).reshape(-1)
    except (FloatingPointError, OverflowError, ZeroDivisionError) as e:
        raise NumericFaultError(f"dynamics of '{model.name}' failed: {e}") from e
    if out.shape[0] != model.n:
        raise DimensionMismatchError("dynamics output", model.n, out.shape[0])
    if not np.all(np.isfinite(out)):
        raise NumericFaultError(f"dynamics of '{model.name}' returned a non-finite value {out.tolist()}")
    return out


def _check_compatible(model: DelayModel, history: History, d) -> DelayVector:
    if history.delta != model.delta:
        # first theta that is missing from, or surplus to, the model's window
        theta = -(min(history.delta, model.delta) + 1)
        raise DimensionMismatchError("history.delta", model.delta, history.delta, index=theta)
    if history.dim != model.n:
        raise DimensionMismatchError("history.dim", model.n, history.dim, index=0)
    d = as_delay_vector(d)
    if len(d) != model.r:
        raise DimensionMismatchError("delay vector", model.r, len(d), index=min(len(d), model.r))
    if d not in model.alphabet:
        raise AlphabetViolationError(d, model.alphabet)
    return d


def raw_step(model: DelayModel, history: History, d) -> np.ndarray:
    """f(phi(0), phi(-d_1), ..., phi(-d_r)) for the delay vector d"""
    d = _check_compatible(model, history, d)
    arguments = [history.state] + [history.at(-dj) for dj in d]
    return _evaluate(model, arguments)


def lift_step(model: DelayModel, phi: History, d) -> History:
    """
    Lifted map F(phi, d): shift every slot one step back and append raw_step

    Returns:
        New History psi with psi(theta) = phi(theta + 1) for theta < 0 and
        psi(0) = raw_step(model, phi, d)
    """
    nxt = raw_step(model, phi, d)
    values = np.empty_like(phi.values)
    values[:-1] = phi.values[1:]
    values[-1] = nxt
    return History(values)
