"""
Stochastic Lyapunov analysis of the delay jump system.

Contents:
    - the difference operator LV(phi, i) = sum_j p_ij V(F(phi, H^-1(i)), j) - V(phi, i)
    - a falsification harness for the two Lyapunov conditions
      (alpha1 ||phi(0)||^2 <= V <= alpha2 ||phi||_inf^2 and LV <= -alpha3 ||phi(0)||^2)
    - the saturation-example candidate, its omega bounds and the (p, q)
      feasibility region
    - the constructive chain: W-lift (betas) and the decay certificate (M, zeta)

Passing the harness means no counterexample was found among the sampled
histories. It is not a proof.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.random import Generator, default_rng

from errors import ValidationError
from history_core import History, sup_norm
from jump_system import JumpSystem
from markov_chain import check_mode

logger = logging.getLogger(__name__)

BOUNDARY_TOLERANCE = 1e-12
GAMMA4_CLAMP = 1e-9
DEFAULT_CHECK_TOLERANCE = 1e-9
PASS_NOTE = ("No counterexample was found among the sampled histories. "
             "This is a falsification check, not a proof that the conditions hold on all of C.")
REGION_COLUMNS = ["p", "q", "feasible", "lambda_ratio", "L_B", "U_B", "omega1", "omega2", "alpha3"]


@dataclass(frozen=True)
class LyapunovCandidate:
    """
    Functional V(phi, H^-1(i)) with its declared bound constants

    Attributes:
        evaluate: Callable (History, 1-based mode) -> non-negative float
        alpha1: Lower-bound constant on ||phi(0)||^2
        alpha2: Upper-bound constant on ||phi||_inf^2
        label: Name used in reports
    """

    evaluate: Callable[[History, int], float]
    alpha1: float
    alpha2: float
    label: str = "V"
    params: Dict[str, float] = field(default_factory=dict, compare=False)

    def __call__(self, phi: History, mode: int) -> float:
        return float(self.evaluate(phi, mode))


@dataclass(frozen=True)
class LiftedCandidate(LyapunovCandidate):
    """W = V + max_theta e^-theta alpha3 ||phi(-theta)||^2 with the lifted constants"""

    base: Optional[LyapunovCandidate] = None
    alpha3: float = 0.0
    beta3: float = 0.0

    @property
    def beta1(self) -> float:
        return self.base.alpha1 if self.base is not None else self.alpha1

    @property
    def beta2(self) -> float:
        return self.base.alpha2 + self.alpha3 if self.base is not None else self.alpha2


@dataclass(frozen=True)
class Violation:
    descriptor: str
    mode: int
    lhs: float
    rhs: float
    condition: str
    history: History


@dataclass
class ConditionReport:
    """
    Outcome of a falsification run

    margins holds, per condition, the smallest slack rhs - lhs seen; a
    negative margin beyond the tolerance is a violation.
    """

    checked_samples: int
    violations: List[Violation]
    margins: Dict[str, float]
    violation_count: int = 0
    note: str = PASS_NOTE

    @property
    def verdict(self) -> str:
        return "falsified" if self.violations else "pass"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "checked_samples": self.checked_samples,
            "violation_count": self.violation_count,
            "margins": self.margins,
            "violations": [
                {
                    "history": v.descriptor,
                    "values": v.history.values.tolist(),
                    "mode": v.mode,
                    "lhs": v.lhs,
                    "rhs": v.rhs,
                    "condition": v.condition,
                }
                for v in self.violations
            ],
            "note": self.note if not self.violations else "Counterexample found; the conditions do not hold.",
        }


@dataclass(frozen=True)
class DecayCertificate:
    """E||x(k)||^2 <= M zeta^k ||xi0||_inf^2 with M = gamma2/gamma1, zeta = 1 - gamma4"""

    gamma1: float
    gamma2: float
    gamma3: float
    gamma4: float
    M: float
    zeta: float

    def to_dict(self) -> dict:
        return {
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "gamma4": self.gamma4,
            "M": self.M,
            "zeta": self.zeta,
        }


def eval_LV(V: LyapunovCandidate, sys: JumpSystem, phi: History, i: int) -> float:
    """
    Stochastic difference operator at (phi, i): an exact sum over every mode j,
    with the successor F(phi, H^-1(i)) computed once
    """
    i = check_mode(i, sys.s)
    successor = sys.step(phi, i)
    row = sys.chain.tpm.row_tuples[i - 1]
    expected = sum(p_ij * V(successor, j) for j, p_ij in enumerate(row, start=1))
    return expected - V(phi, i)


class HistorySampler:
    """
    Histories for the falsification harness: structured corner cases at
    radius R first (one-hot slots, all-equal slots, alternating signs), then
    draws uniform on the ball ||phi||_inf <= R.
    """

    def __init__(self, delta: int, dim: int = 1, radius: float = 1.0, seed: int = 0):
        if radius <= 0:
            raise ValidationError(f"sampler radius must be positive, got {radius}")
        self.delta = delta
        self.dim = dim
        self.radius = float(radius)
        self.seed = seed

    def corner_cases(self) -> List[Tuple[str, History]]:
        rows = self.delta + 1
        unit = np.zeros(self.dim)
        unit[0] = self.radius
        cases = []
        for slot in range(rows):
            for sign in (1.0, -1.0):
                values = np.zeros((rows, self.dim))
                values[slot] = sign * unit
                cases.append((f"one-hot[theta={slot - self.delta},sign={int(sign)}]", History(values)))
        cases.append(("all-equal", History(np.tile(unit, (rows, 1)))))
        signs = np.array([(-1.0) ** (self.delta - slot) for slot in range(rows)])
        cases.append(("alternating", History(np.outer(signs, unit))))
        return cases

    def _uniform(self, rng: Generator) -> History:
        rows = self.delta + 1
        if self.dim == 1:
            return History(rng.uniform(-self.radius, self.radius, size=(rows, 1)))
        directions = rng.standard_normal((rows, self.dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = self.radius * rng.random(rows) ** (1.0 / self.dim)
        return History(directions * radii[:, None])

    def samples(self, n_samples: int) -> Iterator[Tuple[str, History]]:
        rng = default_rng(self.seed)
        produced = 0
        for case in self.corner_cases():
            if produced >= n_samples:
                return
            yield case
            produced += 1
        while produced < n_samples:
            yield f"uniform#{produced}", self._uniform(rng)
            produced += 1


def check_theorem1(V: LyapunovCandidate, sys: JumpSystem, alpha3: float, sampler: HistorySampler,
                   n_samples: int, decay_on: str = "current",
                   tolerance: float = DEFAULT_CHECK_TOLERANCE,
                   max_recorded: int = 100) -> ConditionReport:
    """
    Look for histories violating the Lyapunov conditions

    Args:
        V: Candidate with declared alpha1, alpha2
        sys: The jump system
        alpha3: Declared decrease constant
        sampler: Source of test histories
        n_samples: Number of histories; every mode is checked for each
        decay_on: "current" checks LV <= -alpha3 ||phi(0)||^2, "history"
            the stronger LV <= -alpha3 ||phi||_inf^2
        tolerance: Slack below -tolerance counts as a violation
        max_recorded: Violations kept in the report (all are counted)

    Returns:
        ConditionReport; violations are data, never raised
    """
    if alpha3 <= 0:
        raise ValidationError(f"alpha3 must be positive, got {alpha3}")
    if decay_on not in ("current", "history"):
        raise ValidationError(f"decay_on must be 'current' or 'history', got {decay_on!r}")

    margins = {"nonnegative": math.inf, "i-lower": math.inf, "i-upper": math.inf, "ii": math.inf}
    violations = []
    count = 0
    checked = 0
    for descriptor, phi in sampler.samples(n_samples):
        checked += 1
        current_sq = float(np.dot(phi.state, phi.state))
        history_sq = sup_norm(phi) ** 2
        decay_sq = current_sq if decay_on == "current" else history_sq
        for mode in range(1, sys.s + 1):
            value = V(phi, mode)
            checks = (
                ("nonnegative", 0.0, value),
                ("i-lower", V.alpha1 * current_sq, value),
                ("i-upper", value, V.alpha2 * history_sq),
                ("ii", eval_LV(V, sys, phi, mode), -alpha3 * decay_sq),
            )
            for condition, lhs, rhs in checks:
                slack = rhs - lhs
                margins[condition] = min(margins[condition], slack)
                if slack < -tolerance:
                    count += 1
                    if len(violations) < max_recorded:
                        violations.append(Violation(descriptor, mode, lhs, rhs, condition, phi))

    report = ConditionReport(checked_samples=checked, violations=violations, margins=margins,
                             violation_count=count)
    if violations:
        first = violations[0]
        logger.warning(f"{V.label}: {count} violations; first is condition {first.condition} "
                       f"at {first.descriptor}, mode {first.mode}")
    else:
        logger.info(f"{V.label}: no violations over {checked} histories")
    return report


def _positive(name, value):
    if not value > 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return float(value)


def sat_weights(gamma: float, c: float) -> np.ndarray:
    """2^(j-1) gamma^j c^-j for j = 0, 1, 2"""
    j = np.arange(3)
    return np.power(2.0, j - 1) * np.power(gamma, j) * np.power(c, -j)


def sat_sup_term(phi: History, gamma: float, c: float) -> float:
    """sup over j = 0, 1, 2 of 2^(j-1) gamma^j c^-j ||phi(-j)||^2"""
    recent = phi.values[::-1][:3]
    squared = np.sum(recent * recent, axis=1)
    return float(np.max(sat_weights(gamma, c) * squared))


def sat_candidate(lambda1: float, lambda2: float, gamma: float, c: float) -> LyapunovCandidate:
    """
    V(phi, H^-1(i)) = lambda_i sup_j 2^(j-1) gamma^j c^-j ||phi(-j)||^2

    The j = 0 weight is 1/2, so the declared lower constant is
    alpha1 = min(lambda) / 2; alpha2 = 2 gamma^2 max(lambda).
    """
    lambdas = (_positive("lambda1", lambda1), _positive("lambda2", lambda2))
    gamma = _positive("gamma", gamma)
    c = float(c)
    if not c > 1:
        raise ValidationError(f"c must be greater than 1, got {c}")

    def evaluate(phi: History, mode: int) -> float:
        if phi.delta < 2:
            raise ValidationError(f"the saturation candidate needs delta >= 2, got {phi.delta}")
        return lambdas[mode - 1] * sat_sup_term(phi, gamma, c)

    return LyapunovCandidate(
        evaluate=evaluate,
        alpha1=0.5 * min(lambdas),
        alpha2=2.0 * gamma ** 2 * max(lambdas),
        label=f"sat-candidate(lambda2/lambda1={lambdas[1] / lambdas[0]:.6g}, c={c:.6g})",
        params={"lambda1": lambdas[0], "lambda2": lambdas[1], "gamma": gamma, "c": c},
    )


def c_outside_candidate_range(c: float) -> bool:
    """True when c lies beyond (1, e], where the candidate bounds were stated"""
    return float(c) > math.e


class OmegaBounds(NamedTuple):
    omega1: float
    omega2: float
    alpha3: float


def region_constants(gamma, c):
    """
    Returns:
        (A, B) with A = (1 - gamma)^2 + 2 gamma / c, the mode-1 growth factor,
        and B = 2 + c^2 / 2 + 2 gamma / c, the mode-2 growth factor
    """
    a = (1.0 - gamma) ** 2 + 2.0 * gamma / c
    b = 2.0 + c ** 2 / 2.0 + 2.0 * gamma / c
    return a, b


def _omegas(p, q, lambda1, lambda2, gamma, c):
    a, b = region_constants(gamma, c)
    omega1 = lambda1 * (1.0 - (p + (1.0 - p) * lambda2 / lambda1) * a)
    omega2 = lambda2 * (1.0 - (q + (1.0 - q) * lambda1 / lambda2) * b)
    return omega1, omega2, 0.5 * np.minimum(omega1, omega2)


def omega_bounds(p, q, lambda1, lambda2, gamma, c) -> OmegaBounds:
    """
    omega1, omega2 and alpha3 = min(omega1, omega2) / 2, returned even when
    non-positive; p and q may sit on the closed interval [0, 1]
    """
    for name, value in (("lambda1", lambda1), ("lambda2", lambda2), ("gamma", gamma), ("c", c)):
        _positive(name, value)
    for name, value in (("p", p), ("q", q)):
        if not 0.0 <= value <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {value}")
    omega1, omega2, alpha3 = _omegas(float(p), float(q), float(lambda1), float(lambda2), float(gamma), float(c))
    return OmegaBounds(float(omega1), float(omega2), float(alpha3))


def interval_bounds(gamma, c, p, q):
    """
    Lower and upper bounds on lambda2/lambda1 and the cap on q, elementwise

    Returns:
        (L_B, U_B, q_cap, feasible); L_B is NaN where its denominator is not
        positive. Points within 1e-12 of a boundary count as infeasible.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a, b = region_constants(gamma, c)
    k = 2.0 * b
    q_cap = 2.0 / k
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = (1.0 - a * p) / (a * (1.0 - p))
        denominator = 2.0 - k * q
        lower = np.where(denominator > 0.0, k * (1.0 - q) / denominator, np.nan)
    below_cap = q < q_cap - BOUNDARY_TOLERANCE
    with np.errstate(invalid="ignore"):
        feasible = (
            below_cap
            & (upper > BOUNDARY_TOLERANCE)
            & np.isfinite(lower)
            & (lower > 0.0)
            & (lower < upper - BOUNDARY_TOLERANCE)
        )
    return lower, upper, q_cap, feasible


def unit_grid(n: int) -> np.ndarray:
    """n cell midpoints (i + 1/2)/n of the open interval (0, 1)"""
    if n < 1:
        raise ValidationError(f"grid size must be at least 1, got {n}")
    return (np.arange(n) + 0.5) / n


def feasible_region(gamma: float, c: float, p_grid, q_grid) -> pd.DataFrame:
    """
    Evaluate the (p, q) feasibility constraints on a grid

    Args:
        gamma: Gain of the saturation example
        c: Candidate parameter (> 1)
        p_grid, q_grid: Values inside (0, 1)

    Returns:
        DataFrame with one row per cell, p-major, columns REGION_COLUMNS;
        lambda_ratio = sqrt(L_B U_B) and the omegas at that ratio (with
        lambda1 = 1) are filled for feasible cells, NaN elsewhere
    """
    _positive("gamma", gamma)
    if not c > 1:
        raise ValidationError(f"c must be greater than 1, got {c}")
    p_grid = np.asarray(p_grid, dtype=float).ravel()
    q_grid = np.asarray(q_grid, dtype=float).ravel()
    for name, grid in (("p", p_grid), ("q", q_grid)):
        if grid.size and (np.any(grid <= 0.0) or np.any(grid >= 1.0)):
            raise ValidationError(f"{name} grid must lie inside (0, 1)")

    p, q = np.meshgrid(p_grid, q_grid, indexing="ij")
    p, q = p.ravel(), q.ravel()
    lower, upper, _, feasible = interval_bounds(gamma, c, p, q)

    ratio = np.full(p.shape, np.nan)
    omega1 = np.full(p.shape, np.nan)
    omega2 = np.full(p.shape, np.nan)
    alpha3 = np.full(p.shape, np.nan)
    ratio[feasible] = np.sqrt(lower[feasible] * upper[feasible])
    o1, o2, a3 = _omegas(p[feasible], q[feasible], 1.0, ratio[feasible], gamma, c)
    omega1[feasible], omega2[feasible], alpha3[feasible] = o1, o2, a3

    region = pd.DataFrame({
        "p": p,
        "q": q,
        "feasible": feasible,
        "lambda_ratio": ratio,
        "L_B": lower,
        "U_B": upper,
        "omega1": omega1,
        "omega2": omega2,
        "alpha3": alpha3,
    }, columns=REGION_COLUMNS)
    logger.info(f"Region gamma={gamma}, c={c:.6g}: {int(feasible.sum())} of {len(region)} cells feasible")
    return region


def region_frontier(region: pd.DataFrame) -> pd.DataFrame:
    """Largest feasible q for each 1 - p value with at least one feasible cell"""
    feasible = region[region["feasible"]]
    frontier = (
        feasible.assign(one_minus_p=1.0 - feasible["p"])
        .groupby("one_minus_p", sort=True)["q"]
        .max()
        .reset_index()
        .rename(columns={"q": "max_q"})
    )
    return frontier[["one_minus_p", "max_q"]]


def lift_to_W(V: LyapunovCandidate, alpha3: float, delta: int) -> LiftedCandidate:
    """
    W(phi, i) = V(phi, i) + max over theta = 1..delta of e^-theta alpha3 ||phi(-theta)||^2

    Declares beta1 = alpha1, beta2 = alpha2 + alpha3 and exposes
    beta3 = (1 - e^-1) alpha3 e^-delta.
    """
    alpha3 = _positive("alpha3", alpha3)
    if delta < 1:
        raise ValidationError(f"delta must be at least 1, got {delta}")
    decay = np.exp(-np.arange(1, delta + 1, dtype=float))

    def evaluate(phi: History, mode: int) -> float:
        if phi.delta < delta:
            raise ValidationError(f"history has delta {phi.delta}, the lift needs {delta}")
        past = phi.values[::-1][1:delta + 1]
        tail = float(np.max(decay * np.sum(past * past, axis=1)))
        return V(phi, mode) + alpha3 * tail

    return LiftedCandidate(
        evaluate=evaluate,
        alpha1=V.alpha1,
        alpha2=V.alpha2 + alpha3,
        label=f"W[{V.label}]",
        params=dict(V.params),
        base=V,
        alpha3=alpha3,
        beta3=(1.0 - math.exp(-1.0)) * alpha3 * math.exp(-delta),
    )


def decay_certificate(gamma1: float, gamma2: float, gamma3: float) -> DecayCertificate:
    """
    M = gamma2/gamma1 and zeta = 1 - gamma4, with gamma4 = gamma3/gamma2
    clamped to 1 - 1e-9 so that zeta stays in (0, 1)
    """
    gamma1 = _positive("gamma1", gamma1)
    gamma2 = _positive("gamma2", gamma2)
    gamma3 = _positive("gamma3", gamma3)
    if gamma1 > gamma2:
        raise ValidationError(f"gamma1 ({gamma1}) must not exceed gamma2 ({gamma2})")
    gamma4 = min(gamma3 / gamma2, 1.0 - GAMMA4_CLAMP)
    return DecayCertificate(
        gamma1=gamma1,
        gamma2=gamma2,
        gamma3=gamma3,
        gamma4=gamma4,
        M=gamma2 / gamma1,
        zeta=1.0 - gamma4,
    )


@dataclass(frozen=True)
class LemmaChain:
    """alphas -> betas (W-lift) -> gammas -> (M, zeta)"""

    alpha1: float
    alpha2: float
    alpha3: float
    beta1: float
    beta2: float
    beta3: float
    delta: int
    certificate: DecayCertificate

    def to_dict(self) -> dict:
        return {
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "alpha3": self.alpha3,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "beta3": self.beta3,
            "delta": self.delta,
            **self.certificate.to_dict(),
        }


def lemma_chain(alpha1: float, alpha2: float, alpha3: float, delta: int) -> LemmaChain:
    """Certificate constants for a candidate satisfying the Lyapunov conditions with these alphas"""
    alpha1 = _positive("alpha1", alpha1)
    alpha2 = _positive("alpha2", alpha2)
    alpha3 = _positive("alpha3", alpha3)
    if delta < 1:
        raise ValidationError(f"delta must be at least 1, got {delta}")
    beta1 = alpha1
    beta2 = alpha2 + alpha3
    beta3 = (1.0 - math.exp(-1.0)) * alpha3 * math.exp(-delta)
    certificate = decay_certificate(beta1, beta2, beta3)
    return LemmaChain(alpha1, alpha2, alpha3, beta1, beta2, beta3, delta, certificate)
