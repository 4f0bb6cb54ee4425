"""
Log-log rate fits for error samples e(d) ≈ C·d^γ (or C·d^γ|log d|).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from src.errors import InsufficientSpanError, PreconditionError

logger = logging.getLogger(__name__)

MODELS = ("power", "log")


@dataclass
class RateFit:
    """Least-squares fit of log e against log d."""

    exponent: float
    constant: float
    residual: float
    window: Tuple[float, float]
    count: int
    model: str = "power"
    jackknife_spread: float = 0.0

    @property
    def decades(self) -> float:
        return math.log10(self.window[1] / self.window[0])

    def predict(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        value = self.constant * d ** self.exponent
        if self.model == "log":
            value = value * np.abs(np.log(d))
        return value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "exponent": self.exponent,
            "constant": self.constant,
            "residual": self.residual,
            "window": list(self.window),
            "count": self.count,
            "model": self.model,
            "jackknife_spread": self.jackknife_spread,
        }


def _least_squares(log_d: np.ndarray, log_e: np.ndarray) -> Tuple[float, float, float]:
    slope, intercept = np.polyfit(log_d, log_e, 1)
    rms = float(np.sqrt(np.mean((log_e - (slope * log_d + intercept)) ** 2)))
    return float(slope), float(intercept), rms


def _jackknife(log_d: np.ndarray, log_e: np.ndarray, slope: float, folds: int = 5) -> float:
    """Largest slope change when one contiguous fifth of the samples is left out."""
    if log_d.size < 2 * folds:
        return 0.0
    spread = 0.0
    for chunk in np.array_split(np.arange(log_d.size), folds):
        keep = np.ones(log_d.size, dtype=bool)
        keep[chunk] = False
        spread = max(spread, abs(np.polyfit(log_d[keep], log_e[keep], 1)[0] - slope))
    return float(spread)


def fit_rate(
    d: Sequence[float],
    e: Sequence[float],
    model: str = "power",
    window: Optional[Tuple[float, float]] = None,
    min_samples: int = 8,
    min_span_decades: float = 1.0,
    noise_floor: float = 0.0,
) -> RateFit:
    """
    Fit e ≈ C·d^γ (model "power") or e ≈ C·d^γ|log d| (model "log").

    Samples outside `window` or with e ≤ noise_floor are dropped.

    Args:
        d: Distances, positive
        e: Errors
        model: "power", "log" or "auto" (the model with the smaller residual)
        window: Optional (d_min, d_max) to restrict to
        min_samples: Required sample count after filtering
        min_span_decades: Required log10 span of the kept distances
        noise_floor: Errors at or below this are treated as round-off

    Raises:
        InsufficientSpanError: too few samples or too narrow a span
    """
    d = np.asarray(d, dtype=float)
    e = np.abs(np.asarray(e, dtype=float))
    if d.shape != e.shape:
        raise PreconditionError(f"fit_rate: shapes differ {d.shape} vs {e.shape}")
    if model == "auto":
        fits = [fit_rate(d, e, m, window, min_samples, min_span_decades, noise_floor) for m in MODELS]
        return min(fits, key=lambda fit: fit.residual)
    if model not in MODELS:
        raise PreconditionError(f"unknown rate model '{model}'")

    keep = (d > 0) & np.isfinite(e) & (e > noise_floor)
    if model == "log":
        keep &= d < 1.0
    if window is not None:
        keep &= (d >= window[0]) & (d <= window[1])
    d, e = d[keep], e[keep]
    if d.size < min_samples:
        raise InsufficientSpanError(f"fit_rate: {d.size} samples above the noise floor, need {min_samples}")
    span = math.log10(d.max() / d.min())
    if span < min_span_decades:
        raise InsufficientSpanError(f"fit_rate: span {span:.2f} decades, need {min_span_decades}")

    order = np.argsort(d)
    log_d = np.log(d[order])
    log_e = np.log(e[order])
    if model == "log":
        log_e = log_e - np.log(np.abs(log_d))
    slope, intercept, rms = _least_squares(log_d, log_e)
    fit = RateFit(slope, math.exp(intercept), rms, (float(d.min()), float(d.max())), int(d.size), model,
                  _jackknife(log_d, log_e, slope))
    logger.debug("rate fit (%s): exponent %.4f over %.2f decades, %d samples", model, slope, span, d.size)
    return fit


def observed_order(h: Sequence[float], errors: Sequence[float]) -> float:
    """Slope of log error against log h over a refinement sequence."""
    h = np.asarray(h, dtype=float)
    errors = np.abs(np.asarray(errors, dtype=float))
    if h.size < 2:
        raise InsufficientSpanError("observed_order needs at least two resolutions")
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])


def refinement_ratio(coarse: float, medium: float, fine: float) -> float:
    """(q_h − q_{h/2})/(q_{h/2} − q_{h/4}); close to 4 for a second-order quantity."""
    denominator = medium - fine
    if denominator == 0.0:
        return math.inf
    return (coarse - medium) / denominator
