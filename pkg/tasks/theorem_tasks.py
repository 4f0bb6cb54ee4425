"""
Ratio-estimate experiments on cones bent by an axisymmetric map.

thm1 fits |u/u_V∘T − 1| against d; thm2 subtracts the first-order term
c₁(Tx/|Tx|)|Tx| and fits the remainder against min(2, μ₁).
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from config.lab_config import LabConfig, Theorem1Params, Theorem2Params
from src.cone_profiles import MIN_PROFILE_N, RadialProfile, solve_cap
from src.domain_solver import BracketedSolution, MeridianDomain, RatioSamples, ratio_profile, solve_axisymmetric
from src.errors import CertificationError
from src.expansion import (
    SupersolutionInputs,
    case_constants,
    certified_radius,
    compute_F,
    first_order_coefficient,
    residual_floor,
    select_case,
)
from src.export import write_dat, write_table
from src.geometry import DiffeoMap, map_from_spec
from src.rates import RateFit, fit_rate
from src.section_grid import SectionGrid
from src.spectral import eigen_solve
from tasks.reporting import add_artifact, add_criterion, at_least, at_most, begin_stage, record_stage

logger = logging.getLogger(__name__)

Report = Dict[str, Any]


def _profile_cells(n_theta: int) -> int:
    return max(MIN_PROFILE_N, 2 * n_theta)


def _bracketed_solve(
    params: Theorem1Params, diffeo: DiffeoMap, report: Report, out_dir: Path, config: LabConfig
) -> BracketedSolution:
    begin_stage(report, "solve_axisymmetric")
    domain = MeridianDomain(params.alpha, diffeo, params.r_in, params.r_out, params.n_s, params.n_theta)
    bracket = solve_axisymmetric(domain, params.eps_scale, params.gap_tol, config=config)
    header = bracket.header()
    record_stage(report, "solve_axisymmetric", **header)
    add_artifact(report, write_table(bracket.to_frame(), out_dir / f"{report['experiment']}_meridian.csv", header))
    at_most(report, "residual_upper", bracket.upper.residual, params.residual_tol)
    at_most(report, "residual_lower", bracket.lower.residual, params.residual_tol)
    return bracket


def _reference_agreement(report: Report, bracket: BracketedSolution, profile: RadialProfile) -> None:
    """Meridian-stencil reference against the finite-volume cap profile."""
    theta = bracket.domain.theta[:-1]
    difference = float(np.max(np.abs(bracket.reference[:-1] - profile.spline(theta))))
    record_stage(report, "reference", sup_difference=difference)


def _fit_samples(
    report: Report,
    samples: RatioSamples,
    params: Theorem1Params,
    model: str,
    out_dir: Path,
) -> Tuple[Optional[RateFit], bool]:
    """Fit the sampled errors; errors all at the noise floor count as exact."""
    add_artifact(report, write_dat({"d": samples.d, "error": samples.error},
                                   out_dir / f"{report['experiment']}_samples.dat"))
    largest = float(np.max(samples.error))
    if largest <= params.noise_floor:
        record_stage(report, "fit_rate", below_noise_floor=True, max_error=largest, count=len(samples.d))
        add_criterion(report, "ratio_error_at_noise_floor", largest, f"<= {params.noise_floor:g}", True)
        return None, True
    begin_stage(report, "fit_rate")
    fit = fit_rate(samples.d, samples.error, model=model, min_span_decades=0.0, noise_floor=params.noise_floor)
    record_stage(report, "fit_rate", **fit.to_dict())
    at_least(report, "window_decades", fit.decades, params.min_window_decades)
    return fit, False


def theorem1_task(params: Theorem1Params, report: Report, out_dir: Path, config: LabConfig) -> None:
    begin_stage(report, "solve_cap")
    profile = solve_cap(3, params.alpha, _profile_cells(params.n_theta), extrapolate=True, config=config)
    record_stage(report, "solve_cap", **profile.metadata())

    diffeo = map_from_spec(params.map, 3)
    bracket = _bracketed_solve(params, diffeo, report, out_dir, config)
    _reference_agreement(report, bracket, profile)

    begin_stage(report, "ratio_profile")
    samples = ratio_profile(bracket)
    fit, exact = _fit_samples(report, samples, params, "power", out_dir)
    if not exact:
        at_least(report, "rate_exponent", fit.exponent, params.exponent_fraction * params.theoretical_exponent)


def theorem2_task(params: Theorem2Params, report: Report, out_dir: Path, config: LabConfig) -> None:
    N = _profile_cells(params.n_theta)
    begin_stage(report, "solve_cap")
    profile = solve_cap(3, params.alpha, N, config=config)
    record_stage(report, "solve_cap", **profile.metadata())
    diffeo = map_from_spec(params.map, 3)

    begin_stage(report, "eigen_solve")
    section = SectionGrid.cap(3, params.alpha, N)
    basis = eigen_solve(section, profile.rho, 3, k=params.k, config=config)
    lam1 = basis[0].eigenvalue
    mu = basis[0].mu
    case, ambiguous = select_case(mu, params.ambiguity_band)
    record_stage(report, "eigen_solve", lambda1=lam1, mu1=mu, case=case, ambiguous=ambiguous)

    begin_stage(report, "first_order_coefficient")
    source = compute_F(diffeo, profile)
    coefficient = first_order_coefficient(section, profile.rho, profile.xi, source.meridian(0), basis, 3,
                                          config.blend_band, config=config)
    c1_sup = coefficient.bounds["c1_sup"]
    record_stage(report, "first_order_coefficient", residual=coefficient.residual, **coefficient.bounds)
    add_artifact(report, write_table(coefficient.to_frame(), out_dir / "thm2_c1.csv", coefficient.bounds))
    at_most(report, "coefficient_residual", coefficient.residual, params.residual_tol)

    begin_stage(report, "supersolution")
    inputs = SupersolutionInputs(profile, basis[0].vector, lam1, coefficient.xi1, source.meridian(0), diffeo)
    constants = case_constants(inputs, case, c1_sup)
    floor = residual_floor(inputs)
    slack = params.supersolution_slack + floor
    try:
        radius = certified_radius(case, inputs, constants["A0"], constants["A1"], samples=200,
                                  seed=config.seed, slack=slack)
        error = None
    except CertificationError as exc:
        radius, error = None, str(exc)
    record_stage(report, "supersolution", case=case, certified_radius=radius, residual_floor=floor,
                 slack=slack, error=error, **constants)
    add_criterion(report, "supersolution_certified", radius, f"residual <= {slack:.3g} near the vertex",
                  radius is not None, note=error or f"case {case}")

    bracket = _bracketed_solve(params, diffeo, report, out_dir, config)
    begin_stage(report, "ratio_profile")
    samples = ratio_profile(bracket, c1=(profile.theta, coefficient.c1))
    model = "auto" if ambiguous or case == 2 else "power"
    fit, exact = _fit_samples(report, samples, params, model, out_dir)
    if not exact:
        target = params.exponent_fraction * min(2.0, mu)
        log_wins = model == "auto" and fit.model == "log"
        add_criterion(report, "remainder_exponent", fit.exponent, f">= {target:g} or log model",
                      fit.exponent >= target or log_wins,
                      note="case ambiguous" if ambiguous else f"case {case}")
