"""
The Markov jump system on the history space and its trajectory simulation.

x_{k+1} = F(x_k, H^-1(eta(k))), with eta a Markov chain over the delay modes.
Ensembles run over independent per-trajectory substreams (seed, index) and
reduce their statistics in a fixed chunk order, so results do not depend on
the number of worker threads.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from numpy.random import Generator
from scipy.stats import norm

from errors import DimensionMismatchError, ValidationError
from history_core import DelayModel, History, lift_step
from markov_chain import (
    MarkovDelayChain,
    build_bijection,
    check_mode,
    sample_initial,
    sample_next,
    substream,
    validate_tpm,
)

logger = logging.getLogger(__name__)

CHUNK_SIZE = 64
CI_LEVEL = 0.99
ENSEMBLE_COLUMNS = ["k", "mean_sq", "min_norm", "max_norm", "std", "ci99_halfwidth"]


@dataclass(frozen=True)
class JumpSystem:
    model: DelayModel
    chain: MarkovDelayChain

    def __post_init__(self):
        if tuple(self.chain.bijection.alphabet) != tuple(self.model.alphabet):
            raise ValidationError(
                f"chain alphabet {list(self.chain.bijection.alphabet)} does not match "
                f"model alphabet {list(self.model.alphabet)}"
            )

    @property
    def s(self) -> int:
        return self.chain.s

    def step(self, phi: History, mode: int) -> History:
        """F(phi, H^-1(mode))"""
        return lift_step(self.model, phi, self.chain.bijection.inverse(mode))


def build_jump_system(model: DelayModel, tpm_rows) -> JumpSystem:
    """Compose a model with a TPM; mode i is the i-th delay of the model alphabet"""
    chain = MarkovDelayChain(validate_tpm(tpm_rows), build_bijection(model.alphabet))
    return JumpSystem(model=model, chain=chain)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    States x(0..K) and the modes eta(0..K-1) that drove them

    Attributes:
        states: Array of shape (K + 1, n)
        modes: Tuple of K 1-based mode indices
        initial: The initial history xi0
        seed: Seed of the run that produced it, if any
    """

    states: np.ndarray
    modes: tuple
    initial: History
    seed: Optional[int] = None

    @property
    def horizon(self) -> int:
        return len(self.modes)

    def squared_norms(self) -> np.ndarray:
        return np.sum(self.states * self.states, axis=1)

    def to_frame(self) -> pd.DataFrame:
        """Dump layout: k, x_1..x_n, mode (mode is empty on the last row)"""
        df = pd.DataFrame(self.states, columns=[f"x_{i + 1}" for i in range(self.states.shape[1])])
        df.insert(0, "k", np.arange(len(df)))
        df["mode"] = pd.array(list(self.modes) + [None], dtype="Int64")
        return df


def _check_initial(sys: JumpSystem, xi0: History):
    if xi0.delta != sys.model.delta:
        raise DimensionMismatchError("xi0.delta", sys.model.delta, xi0.delta,
                                     index=-(min(xi0.delta, sys.model.delta) + 1))
    if xi0.dim != sys.model.n:
        raise DimensionMismatchError("xi0.dim", sys.model.n, xi0.dim, index=0)


def simulate(sys: JumpSystem, xi0: History, eta0: int, horizon: int, rng: Generator,
             seed: Optional[int] = None) -> Trajectory:
    """
    Run one trajectory of the jump system

    Args:
        sys: The jump system
        xi0: Initial history
        eta0: Initial mode (1-based)
        horizon: Number of steps K >= 0
        rng: Generator driving the mode chain; only advanced between steps
        seed: Recorded on the trajectory for provenance

    Returns:
        Trajectory with K + 1 states and K modes
    """
    _check_initial(sys, xi0)
    mode = check_mode(eta0, sys.s)
    if horizon < 0:
        raise ValidationError(f"horizon must be non-negative, got {horizon}")

    states = np.empty((horizon + 1, sys.model.n))
    states[0] = xi0.state
    modes = []
    phi = xi0
    for k in range(horizon):
        modes.append(mode)
        phi = sys.step(phi, mode)
        states[k + 1] = phi.state
        if k + 1 < horizon:
            mode = sample_next(sys.chain, mode, rng)
    return Trajectory(states=states, modes=tuple(modes), initial=xi0, seed=seed)


class MomentAccumulator:
    """
    Streaming per-step statistics of ||x(k)||^2 and ||x(k)||.

    Means and the second central moment use Welford updates, merged with
    Chan's pairwise formula; a constant input stream keeps its mean exactly.
    """

    def __init__(self, length: int):
        self.count = 0
        self.mean_sq = np.zeros(length)
        self.m2_sq = np.zeros(length)
        self.mean_norm = np.zeros(length)
        self.min_norm = np.full(length, np.inf)
        self.max_norm = np.full(length, -np.inf)

    def add(self, squared_norms: np.ndarray):
        norms = np.sqrt(squared_norms)
        self.count += 1
        delta = squared_norms - self.mean_sq
        self.mean_sq = self.mean_sq + delta / self.count
        self.m2_sq = self.m2_sq + delta * (squared_norms - self.mean_sq)
        self.mean_norm = self.mean_norm + (norms - self.mean_norm) / self.count
        self.min_norm = np.minimum(self.min_norm, norms)
        self.max_norm = np.maximum(self.max_norm, norms)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        weight = other.count / n
        delta = other.mean_sq - self.mean_sq
        merged = MomentAccumulator(len(self.mean_sq))
        merged.count = n
        merged.mean_sq = self.mean_sq + delta * weight
        merged.m2_sq = self.m2_sq + other.m2_sq + delta * delta * self.count * weight
        merged.mean_norm = self.mean_norm + (other.mean_norm - self.mean_norm) * weight
        merged.min_norm = np.minimum(self.min_norm, other.min_norm)
        merged.max_norm = np.maximum(self.max_norm, other.max_norm)
        return merged


@dataclass
class EnsembleStats:
    """
    Per-step Monte Carlo statistics for k = 0..K

    std is the sample standard deviation of ||x(k)||^2 (0 for a single run) and
    ci99_halfwidth the normal-approximation 99% half-width of mean_sq.
    """

    mean_sq: np.ndarray
    min_norm: np.ndarray
    max_norm: np.ndarray
    mean_norm: np.ndarray
    std: np.ndarray
    ci99_halfwidth: np.ndarray
    n_runs: int
    seed: int
    eta0_choice: str
    trajectories: List[Trajectory] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.mean_sq) - 1

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "k": np.arange(len(self.mean_sq)),
            "mean_sq": self.mean_sq,
            "min_norm": self.min_norm,
            "max_norm": self.max_norm,
            "std": self.std,
            "ci99_halfwidth": self.ci99_halfwidth,
        }, columns=ENSEMBLE_COLUMNS)

    def to_moment_curve(self, xi0_norm: float = 1.0):
        from moments import MomentCurve

        return MomentCurve(
            values=self.mean_sq.copy(),
            ci_halfwidths=self.ci99_halfwidth.copy(),
            n_runs=self.n_runs,
            seed=self.seed,
            xi0_norm=xi0_norm,
        )


def _resolve_eta0(eta0, s: int):
    """Returns (description, pinned mode or None, distribution or None)"""
    if eta0 is None:
        return "uniform", None, np.full(s, 1.0 / s)
    if isinstance(eta0, (int, np.integer)) and not isinstance(eta0, bool):
        mode = check_mode(eta0, s)
        return f"pinned:{mode}", mode, None
    weights = np.asarray(eta0, dtype=float)
    if weights.shape != (s,):
        raise DimensionMismatchError("eta0 distribution", s, weights.shape)
    return f"distribution:{weights.tolist()}", None, weights


def _run_chunk(sys, xi0, pinned, distribution, horizon, seed, start, stop, keep):
    acc = MomentAccumulator(horizon + 1)
    kept = []
    for index in range(start, stop):
        rng = substream(seed, index)
        eta0 = pinned if pinned is not None else sample_initial(distribution, rng)
        trajectory = simulate(sys, xi0, eta0, horizon, rng, seed=seed)
        acc.add(trajectory.squared_norms())
        if index < keep:
            kept.append(trajectory)
    return acc, kept


def simulate_ensemble(sys: JumpSystem, xi0: History, eta0=None, horizon: int = 60,
                      n_runs: int = 1000, seed: int = 0, threads: int = 1,
                      keep_trajectories: int = 0) -> EnsembleStats:
    """
    Monte Carlo second-moment statistics over n_runs independent trajectories

    Args:
        sys: The jump system
        xi0: Initial history (deterministic)
        eta0: None for a uniform initial mode, an int to pin it, or a
            probability vector over the s modes
        horizon: Number of steps K
        n_runs: Number of trajectories N >= 1
        seed: Master seed; trajectory r uses substream (seed, r)
        threads: Worker threads; does not change the result
        keep_trajectories: Retain the first this-many trajectories

    Returns:
        EnsembleStats
    """
    if n_runs < 1:
        raise ValidationError(f"n_runs must be at least 1, got {n_runs}")
    if horizon < 0:
        raise ValidationError(f"horizon must be non-negative, got {horizon}")
    if threads < 1:
        raise ValidationError(f"threads must be at least 1, got {threads}")
    _check_initial(sys, xi0)
    description, pinned, distribution = _resolve_eta0(eta0, sys.s)

    start_time = time.time()
    logger.info(f"Simulating {n_runs} trajectories of '{sys.model.name}' over {horizon} steps "
                f"(seed={seed}, eta0={description}, threads={threads})")

    bounds = [(start, min(start + CHUNK_SIZE, n_runs)) for start in range(0, n_runs, CHUNK_SIZE)]

    def work(bound):
        return _run_chunk(sys, xi0, pinned, distribution, horizon, seed, bound[0], bound[1], keep_trajectories)

    if threads == 1 or len(bounds) == 1:
        results = [work(bound) for bound in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, bounds))

    total = MomentAccumulator(horizon + 1)
    trajectories = []
    for acc, kept in results:
        total = total.merge(acc)
        trajectories.extend(kept)

    if n_runs > 1:
        std = np.sqrt(np.maximum(total.m2_sq, 0.0) / (n_runs - 1))
    else:
        std = np.zeros(horizon + 1)
    z = norm.ppf(0.5 + CI_LEVEL / 2.0)
    halfwidth = z * std / np.sqrt(n_runs)

    stats = EnsembleStats(
        mean_sq=total.mean_sq,
        min_norm=total.min_norm,
        max_norm=total.max_norm,
        mean_norm=total.mean_norm,
        std=std,
        ci99_halfwidth=halfwidth,
        n_runs=n_runs,
        seed=seed,
        eta0_choice=description,
        trajectories=trajectories,
    )
    logger.info(f"Ensemble finished in {time.time() - start_time:.2f} seconds; "
                f"mean ||x(K)||^2 = {stats.mean_sq[-1]:.3e}")
    return stats
