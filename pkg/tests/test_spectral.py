import math

import numpy as np
import pytest

from src.errors import InsufficientSpanError, PreconditionError
from src.section_grid import SectionGrid
from src.spectral import (
    decay_check,
    eigen_solve,
    harmonic_degree,
    hemisphere_lambda1,
    kappa,
    mu1,
    resolvent_solve,
)


@pytest.fixture(scope="module")
def hemisphere_pairs():
    section = SectionGrid.cap(3, math.pi / 2, 128)
    rho = np.cos(section.nodes)
    return eigen_solve(section, rho, 3, k=4)


def test_closed_forms():
    assert kappa(3) == pytest.approx(3.75)
    assert hemisphere_lambda1(3) == pytest.approx(8.75)
    assert mu1(hemisphere_lambda1(3), 3) == pytest.approx(3.0)
    assert harmonic_degree(3.0, 3) == pytest.approx(2.5)


def test_mu1_accepts_zero_and_rejects_negative():
    assert mu1(0.0, 3) == pytest.approx(0.5)
    with pytest.raises(PreconditionError):
        mu1(-1.0, 3)


def test_hemisphere_first_eigenvalue(hemisphere_pairs):
    first = hemisphere_pairs[0]
    assert first.eigenvalue == pytest.approx(hemisphere_lambda1(3), rel=2e-2)
    assert first.mu == pytest.approx(3.0, rel=1e-2)


def test_eigenvalues_increase(hemisphere_pairs):
    values = [pair.eigenvalue for pair in hemisphere_pairs]
    assert values == sorted(values)
    assert values[0] > 0.75


def test_eigenvectors_are_normalized(hemisphere_pairs):
    section = hemisphere_pairs[0].section
    for pair in hemisphere_pairs:
        assert section.norm(pair.vector) == pytest.approx(1.0)
        assert pair.vector[-1] == 0.0
    assert section.inner(hemisphere_pairs[0].vector, hemisphere_pairs[1].vector) == pytest.approx(0.0, abs=1e-8)


def test_first_eigenvector_is_positive(hemisphere_pairs):
    assert np.all(hemisphere_pairs[0].vector[:-1] > 0)


def test_rayleigh_quotient(hemisphere_pairs):
    for pair in hemisphere_pairs:
        assert pair.rayleigh_quotient() == pytest.approx(pair.eigenvalue, rel=1e-6)


def test_decay_exponent(hemisphere_pairs):
    fit = decay_check(hemisphere_pairs[0])
    assert fit.nu == pytest.approx(2.5, abs=0.2)
    assert fit.count >= 5


def test_decay_needs_samples(hemisphere_pairs):
    with pytest.raises(InsufficientSpanError):
        decay_check(hemisphere_pairs[0], band=(0.5, 0.5001))


def test_eigen_solve_preconditions():
    section = SectionGrid.cap(3, math.pi / 2, 16)
    rho = np.cos(section.nodes)
    with pytest.raises(PreconditionError):
        eigen_solve(section, rho, 3, k=0)
    bad = rho.copy()
    bad[3] = -1.0
    with pytest.raises(PreconditionError):
        eigen_solve(section, bad, 3, k=1)


# ======================================================================
# Resolvent
# ======================================================================

def test_resolvent_of_an_eigenvector(hemisphere_pairs):
    pair = hemisphere_pairs[0]
    lam = 1.0
    result = resolvent_solve(lam, pair.vector, hemisphere_pairs, method="spectral")
    assert np.allclose(result.solution, pair.vector / (pair.eigenvalue - lam), atol=1e-8)
    assert result.method == "spectral"


def test_direct_and_spectral_agree_on_eigenvector_data(hemisphere_pairs):
    f = hemisphere_pairs[0].vector + 0.5 * hemisphere_pairs[1].vector
    spectral = resolvent_solve(-3.0, f, hemisphere_pairs, method="spectral")
    direct = resolvent_solve(-3.0, f, hemisphere_pairs, method="direct")
    assert direct.method == "direct"
    assert direct.residual < 1e-10
    assert np.allclose(spectral.solution, direct.solution, atol=1e-6)


def test_resolvent_rejects_spectrum(hemisphere_pairs):
    with pytest.raises(PreconditionError):
        resolvent_solve(hemisphere_pairs[0].eigenvalue, hemisphere_pairs[0].vector, hemisphere_pairs)
    with pytest.raises(PreconditionError):
        resolvent_solve(1.0, hemisphere_pairs[0].vector, [])
