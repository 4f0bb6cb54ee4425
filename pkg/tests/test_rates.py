import numpy as np
import pytest

from src.errors import InsufficientSpanError, PreconditionError
from src.rates import fit_rate, observed_order, refinement_ratio


D = np.logspace(-4, -1, 40)


@pytest.mark.parametrize("gamma, C", [(1.0, 2.0), (2.0, 0.5), (0.5, 1.0)])
def test_power_law_recovered(gamma, C):
    fit = fit_rate(D, C * D ** gamma)
    assert fit.exponent == pytest.approx(gamma, abs=1e-10)
    assert fit.constant == pytest.approx(C, rel=1e-8)
    assert fit.residual < 1e-10
    assert fit.decades == pytest.approx(3.0)
    assert fit.jackknife_spread < 1e-8


def test_auto_prefers_log_model():
    fit = fit_rate(D, D ** 2 * np.abs(np.log(D)), model="auto")
    assert fit.model == "log"
    assert fit.exponent == pytest.approx(2.0, abs=1e-10)
    assert np.allclose(fit.predict(D), D ** 2 * np.abs(np.log(D)))


def test_auto_prefers_power_model():
    fit = fit_rate(D, 3.0 * D, model="auto")
    assert fit.model == "power"


def test_window_and_noise_floor():
    e = D.copy()
    e[D < 1e-3] = 1e-16
    fit = fit_rate(D, e, window=(1e-3, 1e-1), noise_floor=1e-14)
    assert fit.window[0] >= 1e-3
    assert fit.exponent == pytest.approx(1.0)


def test_narrow_span_rejected():
    d = np.logspace(-2, -1.5, 20)
    with pytest.raises(InsufficientSpanError):
        fit_rate(d, d)


def test_too_few_samples_rejected():
    d = np.logspace(-4, -1, 5)
    with pytest.raises(InsufficientSpanError):
        fit_rate(d, d)


def test_everything_below_noise_floor():
    with pytest.raises(InsufficientSpanError):
        fit_rate(D, np.zeros_like(D), noise_floor=1e-12)


def test_bad_inputs():
    with pytest.raises(PreconditionError):
        fit_rate(D, D[:-1])
    with pytest.raises(PreconditionError):
        fit_rate(D, D, model="exponential")


def test_observed_order():
    h = np.array([0.1, 0.05, 0.025])
    assert observed_order(h, 3.0 * h ** 2) == pytest.approx(2.0)
    with pytest.raises(InsufficientSpanError):
        observed_order([0.1], [0.01])


def test_refinement_ratio_second_order():
    h = 0.1
    values = [1.0 + h ** 2, 1.0 + (h / 2) ** 2, 1.0 + (h / 4) ** 2]
    assert refinement_ratio(*values) == pytest.approx(4.0)
    assert refinement_ratio(1.0, 1.0, 1.0) == float("inf")
