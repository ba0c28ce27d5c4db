"""
The scalar saturation example: x(k+1) = sat(x(k)) - gamma sat(x(k - d(k))),
d(k) in {0, 2}, switching by the two-mode chain P = [[p, 1-p], [1-q, q]].
Mode 1 (no delay) is stable, mode 2 (delay 2) is not.

certify_sat runs the analytic chain: (p, q) feasibility -> witness ratio
lambda2/lambda1 -> omegas -> alpha3 -> W-lift -> (M, zeta).
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from errors import ConfigError, ValidationError
from jump_system import JumpSystem, build_jump_system
from lyapunov import (
    ConditionReport,
    HistorySampler,
    c_outside_candidate_range,
    check_theorem1,
    interval_bounds,
    lemma_chain,
    omega_bounds,
    sat_candidate,
)
from markov_chain import stationary_distribution
from systems import SAT_GAMMA_RANGE, sat_model

logger = logging.getLogger(__name__)

SAT_DELTA = 2
DEFAULT_C_GRID = np.linspace(math.e, 5.2, 25)
SUFFICIENCY_CAVEAT = (
    "The Lyapunov conditions are sufficient, not necessary: a missing certificate "
    "does not mean the system is unstable in the mean-square sense."
)
SPEC_KEYS = {"gamma", "p", "q", "c", "lambda_ratio"}


def parse_c(value) -> Union[float, str]:
    """'e' -> Euler's number, 'auto' kept as is, numbers -> float"""
    if isinstance(value, str):
        text = value.strip().lower()
        if text == "e":
            return math.e
        if text == "auto":
            return "auto"
        try:
            return float(text)
        except ValueError:
            raise ValidationError(f"c must be 'e', 'auto' or a number, got {value!r}") from None
    if isinstance(value, bool):
        raise ValidationError(f"c must be 'e', 'auto' or a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class SatSystemSpec:
    gamma: float
    p: float
    q: float
    c: Union[float, str] = math.e
    lambda_ratio: Optional[float] = None

    def __post_init__(self):
        low, high = SAT_GAMMA_RANGE
        if not low <= self.gamma <= high:
            raise ValidationError(f"gamma must lie in [{low}, {high}], got {self.gamma}")
        for name in ("p", "q"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1), got {value}")
        c = parse_c(self.c)
        if c != "auto" and not c > 1.0:
            raise ValidationError(f"c must be greater than 1, got {c}")
        object.__setattr__(self, "c", c)
        if self.lambda_ratio is not None and not self.lambda_ratio > 0:
            raise ValidationError(f"lambda_ratio must be positive, got {self.lambda_ratio}")

    @property
    def tpm_rows(self):
        return [[self.p, 1.0 - self.p], [1.0 - self.q, self.q]]

    @classmethod
    def from_dict(cls, data: dict) -> "SatSystemSpec":
        """Parse {"gamma": 1.2, "p": 0.95, "q": 0.01, "c": "e"}; c may also be a number or "auto" """
        unknown = set(data) - SPEC_KEYS
        if unknown:
            raise ConfigError(f"unknown key '{sorted(unknown)[0]}' in sat spec", field=sorted(unknown)[0])
        for key in ("gamma", "p", "q"):
            if key not in data:
                raise ConfigError(f"missing '{key}' in sat spec", field=key)
            if isinstance(data[key], bool) or not isinstance(data[key], (int, float)):
                raise ConfigError(f"'{key}' must be a number, got {data[key]!r}", field=key)
        ratio = data.get("lambda_ratio")
        if ratio is not None and (isinstance(ratio, bool) or not isinstance(ratio, (int, float))):
            raise ConfigError(f"'lambda_ratio' must be a number, got {ratio!r}", field="lambda_ratio")
        try:
            c = parse_c(data.get("c", math.e))
        except ValidationError as e:
            raise ConfigError(str(e), field="c") from e
        return cls(gamma=float(data["gamma"]), p=float(data["p"]), q=float(data["q"]), c=c,
                   lambda_ratio=None if ratio is None else float(ratio))

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "p": self.p, "q": self.q, "c": self.c, "lambda_ratio": self.lambda_ratio}


def build_sat_system(spec: SatSystemSpec) -> JumpSystem:
    """Saturation model with mode 1 <-> delay 0 and mode 2 <-> delay 2, driven by P(p, q)"""
    model = sat_model(spec.gamma, delta=SAT_DELTA, alphabet=((0,), (2,)))
    return build_jump_system(model, spec.tpm_rows)


def search_c(gamma: float, p: float, q: float, c_grid=None):
    """
    Scan candidate values of c for the widest feasible interval of lambda2/lambda1

    Returns:
        (c, log(U_B / L_B)) for the c with the largest slack, or None when
        no c in the grid makes (p, q) feasible
    """
    grid = DEFAULT_C_GRID if c_grid is None else np.asarray(c_grid, dtype=float).ravel()
    best = None
    for c in grid:
        if not c > 1.0:
            raise ValidationError(f"c must be greater than 1, got {c}")
        lower, upper, _, feasible = interval_bounds(gamma, c, p, q)
        if not bool(feasible):
            continue
        slack = float(np.log(upper / lower))
        if best is None or slack > best[1]:
            best = (float(c), slack)
    if best is None:
        logger.info(f"No c in [{grid.min():.4g}, {grid.max():.4g}] makes (p={p}, q={q}) feasible")
    else:
        logger.info(f"search_c picked c={best[0]:.6g} with log(U_B/L_B)={best[1]:.4g}")
    return best


@dataclass
class SatCertificateReport:
    spec: dict
    c: float
    c_choice: str
    c_outside_candidate_range: bool
    L_B: float
    U_B: float
    q_cap: float
    feasible: bool
    lambda_ratio: Optional[float]
    omega1: Optional[float]
    omega2: Optional[float]
    alpha3: Optional[float]
    verdict: str
    provenance: str
    stationary_distribution: list
    chain: Optional[dict] = None
    falsification: Optional[dict] = None
    caveat: str = SUFFICIENCY_CAVEAT

    @property
    def has_certificate(self) -> bool:
        return self.verdict == "certificate"

    @property
    def zeta(self) -> Optional[float]:
        return None if self.chain is None else self.chain["zeta"]

    @property
    def M(self) -> Optional[float]:
        return None if self.chain is None else self.chain["M"]

    def to_dict(self) -> dict:
        return asdict(self)


def _finite_or_none(value):
    value = float(value)
    return value if math.isfinite(value) else None


def _resolve_c(spec: SatSystemSpec):
    if spec.c != "auto":
        return spec.c, "given"
    found = search_c(spec.gamma, spec.p, spec.q)
    if found is None:
        return math.e, "auto (none feasible, fell back to e)"
    return found[0], "auto"


def _base_report(spec: SatSystemSpec, provenance: str):
    c, c_choice = _resolve_c(spec)
    outside = c_outside_candidate_range(c)
    if outside:
        logger.warning(f"c={c:.6g} is above e; the candidate bounds were stated for 1 < c <= e")
    lower, upper, q_cap, feasible = interval_bounds(spec.gamma, c, spec.p, spec.q)
    feasible = bool(feasible)
    if spec.lambda_ratio is not None:
        ratio = spec.lambda_ratio
    elif feasible:
        ratio = math.sqrt(float(lower) * float(upper))
    else:
        ratio = None

    system = build_sat_system(spec)
    report = SatCertificateReport(
        spec=spec.to_dict(),
        c=c,
        c_choice=c_choice,
        c_outside_candidate_range=outside,
        L_B=_finite_or_none(lower),
        U_B=_finite_or_none(upper),
        q_cap=float(q_cap),
        feasible=feasible,
        lambda_ratio=ratio,
        omega1=None,
        omega2=None,
        alpha3=None,
        verdict="no-certificate",
        provenance=provenance,
        stationary_distribution=stationary_distribution(system.chain.tpm).tolist(),
    )
    return report, system


def certify_sat(spec: SatSystemSpec) -> SatCertificateReport:
    """
    Analytic certificate for the saturation example

    Returns:
        SatCertificateReport; verdict "certificate" with the full constant
        chain when both omegas are positive at the chosen ratio, otherwise
        "no-certificate" (never a claim of instability)
    """
    report, _ = _base_report(spec, provenance="analytic")
    if report.lambda_ratio is None:
        logger.info(f"(p={spec.p}, q={spec.q}) is outside the feasible region at c={report.c:.6g}")
        return report

    bounds = omega_bounds(spec.p, spec.q, 1.0, report.lambda_ratio, spec.gamma, report.c)
    report.omega1, report.omega2, report.alpha3 = bounds.omega1, bounds.omega2, bounds.alpha3
    if bounds.omega1 <= 0.0 or bounds.omega2 <= 0.0:
        logger.info(f"lambda2/lambda1={report.lambda_ratio:.6g} gives omega1={bounds.omega1:.4g}, "
                    f"omega2={bounds.omega2:.4g}; no certificate")
        return report

    candidate = sat_candidate(1.0, report.lambda_ratio, spec.gamma, report.c)
    chain = lemma_chain(candidate.alpha1, candidate.alpha2, bounds.alpha3, SAT_DELTA)
    report.chain = chain.to_dict()
    report.verdict = "certificate"
    logger.info(f"Certificate for gamma={spec.gamma}, p={spec.p}, q={spec.q}, c={report.c:.6g}: "
                f"M={chain.certificate.M:.6g}, zeta={chain.certificate.zeta:.12g}")
    return report


def certify_sat_sampled(spec: SatSystemSpec, alpha3: float, n_samples: int = 10000,
                        radius: float = 10.0, seed: int = 0) -> SatCertificateReport:
    """
    Certificate from a declared alpha3, corroborated by the falsification harness
    instead of the omega bounds

    The candidate uses the override ratio, else the witness ratio, else 1.
    """
    report, system = _base_report(spec, provenance="sampled")
    ratio = report.lambda_ratio if report.lambda_ratio is not None else 1.0
    report.lambda_ratio = ratio
    report.alpha3 = float(alpha3)

    candidate = sat_candidate(1.0, ratio, spec.gamma, report.c)
    sampler = HistorySampler(delta=SAT_DELTA, dim=1, radius=radius, seed=seed)
    check: ConditionReport = check_theorem1(candidate, system, alpha3, sampler, n_samples)
    report.falsification = check.to_dict()
    if check.verdict == "pass":
        report.chain = lemma_chain(candidate.alpha1, candidate.alpha2, alpha3, SAT_DELTA).to_dict()
        report.verdict = "certificate"
    return report
