"""
Second-moment post-processing of ensemble runs: an empirical check of the
exponential mean-square bound E||x(k)||^2 <= M zeta^k ||xi0||_inf^2 and a
log-linear fit of the observed decay rate.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from errors import DecayedBelowFloorError, ValidationError

logger = logging.getLogger(__name__)

ZERO_FLOOR = 1e-300
CI_SLACK = 3.0


@dataclass(frozen=True, eq=False)
class MomentCurve:
    """
    Estimated E||x(k)||^2 for k = 0..K with per-step 99% half-widths

    Attributes:
        values: Non-negative means, length K + 1
        ci_halfwidths: Same length as values
        n_runs: Trajectories behind the estimate
        seed: Master seed of the run
        xi0_norm: ||xi0||_inf of the initial history
    """

    values: np.ndarray
    ci_halfwidths: np.ndarray
    n_runs: int = 1
    seed: Optional[int] = None
    xi0_norm: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        halfwidths = np.asarray(self.ci_halfwidths, dtype=float).ravel()
        if values.shape != halfwidths.shape:
            raise ValidationError(
                f"values ({values.size}) and ci_halfwidths ({halfwidths.size}) differ in length"
            )
        if values.size == 0:
            raise ValidationError("moment curve is empty")
        if np.any(values < 0.0) or np.any(halfwidths < 0.0) or not np.all(np.isfinite(values)):
            raise ValidationError("moment curve values and half-widths must be finite and non-negative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ci_halfwidths", halfwidths)

    @property
    def horizon(self) -> int:
        return self.values.size - 1

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, xi0_norm: float = 1.0, n_runs: int = 1,
                   seed: Optional[int] = None) -> "MomentCurve":
        """Read an ensemble table with mean_sq and ci99_halfwidth columns"""
        missing = {"mean_sq", "ci99_halfwidth"} - set(frame.columns)
        if missing:
            raise ValidationError(f"ensemble table is missing columns {sorted(missing)}")
        frame = frame.sort_values("k") if "k" in frame.columns else frame
        return cls(frame["mean_sq"].to_numpy(), frame["ci99_halfwidth"].to_numpy(),
                   n_runs=n_runs, seed=seed, xi0_norm=xi0_norm)


@dataclass(frozen=True)
class EmssCheckResult:
    passed: bool
    first_violation: Optional[int]
    max_excess: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "first_violation": self.first_violation,
            "max_excess": self.max_excess,
        }


@dataclass(frozen=True)
class DecayFit:
    M_hat: float
    zeta_hat: float
    window: Tuple[int, int]
    r_squared: float
    excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "M_hat": self.M_hat,
            "zeta_hat": self.zeta_hat,
            "window": list(self.window),
            "r_squared": self.r_squared,
        }


def emss_check(curve: MomentCurve, M: float, zeta: float, xi0_norm: Optional[float] = None) -> EmssCheckResult:
    """
    Compare a moment curve with the bound M zeta^k xi0_norm^2 plus 3 CI half-widths

    Returns:
        EmssCheckResult; first_violation is the smallest failing k or None
    """
    if not M >= 1.0:
        raise ValidationError(f"M must be at least 1, got {M}")
    if not 0.0 < zeta < 1.0:
        raise ValidationError(f"zeta must lie in (0, 1), got {zeta}")
    norm = curve.xi0_norm if xi0_norm is None else float(xi0_norm)

    k = np.arange(curve.values.size)
    bound = M * np.power(zeta, k) * norm ** 2 + CI_SLACK * curve.ci_halfwidths
    excess = curve.values - bound
    failing = np.flatnonzero(excess > 0.0)
    first = int(failing[0]) if failing.size else None
    result = EmssCheckResult(passed=first is None, first_violation=first, max_excess=float(np.max(excess)))
    if first is None:
        logger.info(f"EMSS bound M={M:.6g}, zeta={zeta:.9g} holds over k = 0..{curve.horizon}")
    else:
        logger.info(f"EMSS bound M={M:.6g}, zeta={zeta:.9g} first exceeded at k = {first}")
    return result


def default_burn_in(horizon: int) -> int:
    return math.ceil(horizon / 5)


def fit_decay(curve: MomentCurve, burn_in: Optional[int] = None, xi0_norm: Optional[float] = None) -> DecayFit:
    """
    Least-squares line through (k, log values[k]) for k >= burn_in

    Values below 1e-300 count as exact zeros and are left out of the fit.

    Args:
        curve: The moment curve
        burn_in: First k of the window; defaults to ceil(K / 5)
        xi0_norm: Overrides curve.xi0_norm when normalising M_hat

    Returns:
        DecayFit with zeta_hat = exp(slope) and M_hat = exp(intercept) / xi0_norm^2

    Raises:
        DecayedBelowFloorError when fewer than two points remain in the window
    """
    horizon = curve.horizon
    k0 = default_burn_in(horizon) if burn_in is None else int(burn_in)
    if not 0 <= k0 < horizon:
        raise ValidationError(f"burn-in must lie in [0, {horizon}), got {k0}")
    norm = curve.xi0_norm if xi0_norm is None else float(xi0_norm)
    if not norm > 0.0:
        raise ValidationError(f"xi0 norm must be positive, got {norm}")

    k = np.arange(k0, horizon + 1)
    window = curve.values[k0:]
    keep = window >= ZERO_FLOOR
    excluded = int(np.count_nonzero(~keep))
    if excluded:
        logger.warning(f"{excluded} of {window.size} points in [{k0}, {horizon}] are below the zero floor")
    if np.count_nonzero(keep) < 2:
        raise DecayedBelowFloorError(
            f"the second moment decayed below {ZERO_FLOOR:g} within [{k0}, {horizon}]; nothing to fit"
        )

    x = k[keep].astype(float)
    y = np.log(window[keep])
    fit = stats.linregress(x, y)
    residuals = y - (fit.intercept + fit.slope * x)
    ss_res = float(np.sum(residuals ** 2))
    if np.ptp(y) == 0.0:
        r_squared = 1.0
    else:
        r_squared = 1.0 - ss_res / float(np.sum((y - y.mean()) ** 2))

    result = DecayFit(
        M_hat=float(math.exp(fit.intercept)) / norm ** 2,
        zeta_hat=float(math.exp(fit.slope)),
        window=(k0, horizon),
        r_squared=r_squared,
        excluded=excluded,
    )
    logger.info(f"Decay fit on [{k0}, {horizon}]: zeta_hat={result.zeta_hat:.6g}, "
                f"M_hat={result.M_hat:.6g}, r^2={r_squared:.4f}")
    return result
