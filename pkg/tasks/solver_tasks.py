"""
Experiments for the individual solvers: profiles, spherical fields,
eigenpairs, expansion coefficients, balls, meridian solves and barriers.

Each task fills in a report (see tasks.reporting) and writes its data
files under out_dir.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd

from config.lab_config import (
    BallParams,
    BarrierParams,
    CapParams,
    CoeffParams,
    EigenParams,
    LabConfig,
    SolveParams,
    SphereParams,
    WedgeParams,
)
from src.cone_profiles import MIN_PROFILE_N, RadialProfile, solve_cap, solve_wedge
from src.domain_solver import (
    MeridianDomain,
    ball_exact,
    barrier_search,
    keller_osserman_ratio,
    solve_axisymmetric,
    solve_ball,
)
from src.expansion import compute_F, first_order_by_modes, first_order_coefficient
from src.export import write_dat, write_json, write_table
from src.geometry import map_from_spec
from src.rates import fit_rate, refinement_ratio
from src.section_grid import SectionGrid
from src.spectral import decay_check, eigen_solve, hemisphere_lambda1
from src.sphere_fields import SphericalDomain, boundary_slopes_2d, rho_bounds_2d, solve_rho_2d
from src.substitution import blowup_exponent
from tasks.reporting import add_artifact, add_criterion, at_least, at_most, begin_stage, record_stage, within

logger = logging.getLogger(__name__)

Report = Dict[str, Any]


# ======================================================================
# Shared checks
# ======================================================================

def _profile_checks(report: Report, profile: RadialProfile, residual_tol: float, slope_tol: float) -> None:
    c3, _ = profile.rho_bounds()
    at_most(report, "residual", profile.residual, residual_tol)
    at_least(report, "c3_positive", c3, 1e-12)
    at_most(report, "boundary_slope_error", max(abs(s - 1.0) for s in profile.boundary_slopes()), slope_tol)


def _write_profile(report: Report, profile: RadialProfile, path: Path) -> None:
    add_artifact(report, write_table(profile.to_frame(), path, profile.metadata()))


def _convergence_ratio(solve, N: int, index) -> float:
    """Refinement ratio of one nodal value over N, 2N, 4N raw solves."""
    values = [solve(N * 2 ** level).rho[index(N * 2 ** level)] for level in range(3)]
    return refinement_ratio(*values)


# ======================================================================
# Profiles
# ======================================================================

def wedge_task(params: WedgeParams, report: Report, out_dir: Path, config: LabConfig) -> None:
    begin_stage(report, "solve_wedge")
    profile = solve_wedge(params.alpha, params.N, params.extrapolate, config=config)
    record_stage(report, "solve_wedge", **profile.metadata())
    _write_profile(report, profile, out_dir / "wedge_profile.csv")
    _profile_checks(report, profile, params.residual_tol, params.slope_tol)

    if math.isclose(params.alpha, math.pi):
        interior = profile.interior
        error = float(np.max(np.abs(profile.rho - np.sin(profile.theta))))
        eta_rel = float(np.max(np.abs(profile.eta[interior] * np.sqrt(np.sin(profile.theta[interior])) - 1.0)))
        record_stage(report, "exact", rho_error=error, eta_relative_error=eta_rel)
        at_most(report, "exact_half_plane_error", error, params.exact_tol, note="sup |rho - sin(theta)|")

    begin_stage(report, "convergence")
    N0 = max(MIN_PROFILE_N, params.N // 4 // 2 * 2)
    ratio = _convergence_ratio(lambda cells: solve_wedge(params.alpha, cells, config=config), N0, lambda cells: cells // 2)
    low, high = params.order_band
    within(report, "refinement_ratio", ratio, low, high)


def cap_task(params: CapParams, report: Report, out_dir: Path, config: LabConfig) -> None:
    begin_stage(report, "solve_cap")
    profile = solve_cap(params.n, params.alpha, params.N, params.extrapolate, config=config)
    record_stage(report, "solve_cap", **profile.metadata())
    _write_profile(report, profile, out_dir / f"cap_n{params.n}_profile.csv")
    _profile_checks(report, profile, params.residual_tol, params.slope_tol)

    if math.isclose(params.alpha, 0.5 * math.pi):
        error = float(np.max(np.abs(profile.rho - np.cos(profile.theta))))
        record_stage(report, "exact", rho_error=error)
        at_most(report, "exact_hemisphere_error", error, params.exact_tol, note="sup |rho - cos(theta)|")

    begin_stage(report, "convergence")
    N0 = max(MIN_PROFILE_N, params.N // 4)
    ratio = _convergence_ratio(lambda cells: solve_cap(params.n, params.alpha, cells, config=config), N0, lambda cells: 0)
    low, high = params.order_band
    within(report, "refinement_ratio", ratio, low, high)


# ======================================================================
# Spherical fields
# ======================================================================

def sphere_task(params: SphereParams, report: Report, out_dir: Path, config: LabConfig) -> None:
    domain = SphericalDomain.from_spec({"kind": params.kind, "alpha": params.alpha})
    begin_stage(report, "solve_rho_2d")
    field = solve_rho_2d(domain, params.n_theta, params.n_phi, params.extrapolate, config=config)
    c3, c4 = rho_bounds_2d(field)
    slopes = boundary_slopes_2d(field)
    record_stage(report, "solve_rho_2d", **field.header(), c3=c3, c4=c4, newton_iterations=field.iterations)
    add_artifact(report, write_table(field.to_frame(), out_dir / f"sphere_{params.kind}_rho.csv", field.header()))
    at_most(report, "residual", field.residual, params.residual_tol)
    at_least(report, "c3_positive", c3, 1e-12)
    at_most(report, "boundary_slope_error", float(np.max(np.abs(slopes - 1.0))), params.slope_tol)

    if params.kind == "lune" and params.alpha < math.pi:
        begin_stage(report, "lune_vs_wedge")
        per_cell = max(1, math.ceil(MIN_PROFILE_N / params.n_phi))
        wedge = solve_wedge(params.alpha, params.n_phi * per_cell, extrapolate=True, config=config)
        grid = field.grid
        column = np.round(grid.phi / grid.h_phi).astype(int) * per_cell
        predicted = np.sin(grid.Theta) * wedge.rho[column]
        error = float(np.max(np.abs(field.values - predicted)[grid.free]))
        record_stage(report, "lune_vs_wedge", sup_error=error, wedge_N=wedge.N)
        at_most(report, "lune_matches_wedge", error, params.lune_tol, note="sup |rho - sin(Theta) rho_wedge(phi)|")


# ======================================================================
# Spectral
# ======================================================================

def eigen_task(params: EigenParams, report: Report, out_dir: Path, config: LabConfig) -> None:
    begin_stage(report, "solve_cap")
    profile = solve_cap(params.n, params.alpha, params.N, config=config)
    section = SectionGrid.cap(params.n, params.alpha, params.N, mode=params.m)

    begin_stage(report, "eigen_solve")
    pairs = eigen_solve(section, profile.rho, params.n, k=params.k, mode=params.m, config=config)
    first = pairs[0]
    begin_stage(report, "decay_check")
    decay = decay_check(first)
    record_stage(report, "eigen_solve", pairs=[pair.to_dict() for pair in pairs], decay=decay.to_dict())
    add_artifact(report, write_json(
        {"lambda": first.eigenvalue, "mu1": first.mu, "nu_fit": decay.nu, "pairs": [p.to_dict() for p in pairs]},
        out_dir / f"eigen_n{params.n}_m{params.m}.json",
    ))
    columns = {"theta": section.nodes}
    columns.update({f"phi{pair.index}": pair.vector for pair in pairs})
    add_artifact(report, write_table(pd.DataFrame(columns), out_dir / f"eigen_n{params.n}_m{params.m}.csv"))

    at_most(report, "max_pair_residual", max(pair.residual for pair in pairs), config.eigen_tol * 10)
    if params.n == 3:
        at_least(report, "lambda1_above_three_quarters", first.eigenvalue, 0.75)
    if math.isclose(params.alpha, 0.5 * math.pi) and params.m == 0:
        exact = hemisphere_lambda1(params.n)
        at_most(report, "hemisphere_lambda1_rel_error", abs(first.eigenvalue - exact) / exact, params.hemisphere_tol)
        at_most(report, "hemisphere_mu1_rel_error", abs(first.mu - params.n) / params.n, params.hemisphere_tol)

    if params.alpha_sweep:
        begin_stage(report, "alpha_sweep")
        sweep = []
        for alpha in params.alpha_sweep:
            cap = solve_cap(params.n, alpha, params.N, config=config)
            lowest = eigen_solve(SectionGrid.cap(params.n, alpha, params.N), cap.rho, params.n, k=1, config=config)[0]
            sweep.append({"alpha": alpha, "lambda1": lowest.eigenvalue, "mu1": lowest.mu})
        record_stage(report, "alpha_sweep", sweep=sweep)
        add_artifact(report, write_dat(
            {"alpha": [s["alpha"] for s in sweep], "lambda1": [s["lambda1"] for s in sweep]},
            out_dir / f"lambda1_sweep_n{params.n}.dat",
        ))


# ======================================================================
# Expansion coefficient
# ======================================================================

def coeff_task(params: CoeffParams, report: Report, out_dir: Path, config: LabConfig) -> None:
    begin_stage(report, "solve_cap")
    profile = solve_cap(params.n, params.alpha, params.N, config=config)
    diffeo = map_from_spec(params.map, params.n)

    begin_stage(report, "compute_F")
    phi = 2.0 * math.pi * np.arange(params.n_phi) / params.n_phi
    source = compute_F(diffeo, profile, phi)
    record_stage(report, "compute_F", C_bar=source.bound, homogeneity_error=source.homogeneity_error)

    begin_stage(report, "first_order_by_modes")
    expansion = first_order_by_modes(profile, source, k=params.k, band=params.band, config=config)
    modes = [{"m": m, "part": label, **part.bounds, "residual": part.residual, "resolvent": part.resolvent_method}
             for m, label, part in expansion.parts]
    record_stage(report, "first_order_by_modes", residual=expansion.residual, modes=modes,
                 eigenvalues={str(m): values for m, values in expansion.eigenvalues.items()})
    add_artifact(report, write_table(expansion.to_frame(), out_dir / f"coeff_{params.map.replace(':', '_')}.csv",
                                     {"map": params.map, "n": params.n, "alpha": params.alpha, "modes": modes}))

    at_most(report, "interior_residual", expansion.residual, params.residual_tol)
    step1_ok = all(part.bounds["step1_ratio"] <= part.bounds["step1_bound"] for _, _, part in expansion.parts)
    add_criterion(report, "step1_sup_bound", step1_ok, "ratio <= (4/n) C_bar 1.05", step1_ok)
    c1_sup = float(np.max(np.abs(expansion.c1[profile.theta < profile.alpha])))
    at_most(report, "c1_sup_finite", c1_sup, 1e12)

    if expansion.parts:
        begin_stage(report, "linearity")
        m, _, part = expansion.parts[0]
        basis = eigen_solve(part.section, profile.rho, params.n, k=params.k, mode=m, config=config)
        doubled = first_order_coefficient(part.section, profile.rho, profile.xi, 2.0 * part.F, basis, params.n,
                                          params.band, resolvent_method=part.resolvent_method, config=config)
        scale = max(float(np.max(np.abs(part.xi1))), 1e-300)
        error = float(np.max(np.abs(doubled.xi1 - 2.0 * part.xi1))) / scale
        at_most(report, "linearity_in_F", error, params.linearity_tol)


# ======================================================================
# Domain solves
# ======================================================================

def ball_task(params: BallParams, report: Report, out_dir: Path, config: LabConfig) -> None:
    begin_stage(report, "solve_ball")
    solution = solve_ball(params.n, params.s, params.N, config=config)
    r = solution.coordinates["r"]
    exact_w = (params.s ** 2 - r ** 2) / (2.0 * params.s)
    w_error = float(np.max(np.abs(solution.w - exact_w)))
    interior = r < params.s
    u_rel = float(np.max(np.abs(solution.u[interior] / ball_exact(params.n, params.s, r[interior]) - 1.0)))
    record_stage(report, "solve_ball", residual=solution.residual, w_error=w_error, u_relative_error=u_rel,
                 u0=float(solution.u[0]), iterations=solution.iterations)
    add_artifact(report, write_table(solution.to_frame(), out_dir / f"ball_n{params.n}.csv",
                                     {"n": params.n, "s": params.s, "N": params.N, "residual": solution.residual}))
    at_most(report, "exact_w_error", w_error, params.exact_tol)
    at_most(report, "center_value_error", abs(solution.u[0] - (2.0 / params.s) ** blowup_exponent(params.n)),
            params.exact_tol)

    begin_stage(report, "comparison")
    larger = solve_ball(params.n, 1.5 * params.s, params.N, config=config)
    outer_w = np.interp(r, larger.coordinates["r"], larger.w)
    # w_s <= w_{1.5s} pointwise, i.e. u decreases when the ball grows
    violation = float(np.max(solution.w - outer_w))
    at_most(report, "comparison_principle", violation, 1e-8)
    ko = keller_osserman_ratio(solution.u[interior], params.s - r[interior], params.n)
    at_most(report, "keller_osserman", ko, 1.0)


def _meridian_domain(params: SolveParams) -> MeridianDomain:
    return MeridianDomain(params.alpha, map_from_spec(params.map, 3), params.r_in, params.r_out,
                          params.n_s, params.n_theta)


def solve_task(params: SolveParams, report: Report, out_dir: Path, config: LabConfig) -> None:
    begin_stage(report, "solve_axisymmetric")
    bracket = solve_axisymmetric(_meridian_domain(params), params.eps_scale, params.gap_tol, config=config)
    header = bracket.header()
    record_stage(report, "solve_axisymmetric", **header)
    add_artifact(report, write_table(bracket.to_frame(), out_dir / "solve_meridian.csv", header))
    at_most(report, "residual_upper", bracket.upper.residual, params.residual_tol)
    at_most(report, "residual_lower", bracket.lower.residual, params.residual_tol)
    at_least(report, "trusted_fraction", header["trusted_fraction"], 1e-12)

    if bracket.max_gap > 0.0:
        begin_stage(report, "gap_decay")
        r, _ = bracket.domain.mesh()
        gap = np.max(np.where(bracket.domain.free, bracket.gap, 0.0), axis=1)[1:-1]
        radii = r[1:-1, 0]
        fit = fit_rate(radii, gap, min_span_decades=0.5, noise_floor=1e-14)
        record_stage(report, "gap_decay", **fit.to_dict())
        at_least(report, "gap_decay_exponent", fit.exponent, 1e-12, note="bracket gap shrinks toward the vertex")


# ======================================================================
# Barrier certification
# ======================================================================

def barrier_task(params: BarrierParams, report: Report, out_dir: Path, config: LabConfig) -> None:
    results = []
    for alpha in params.cone_angles:
        begin_stage(report, f"solve_cap[{alpha:.4f}]")
        profile = solve_cap(params.n, alpha, params.N, config=config)
        for spec in params.maps:
            begin_stage(report, f"barrier[{alpha:.4f},{spec}]")
            diffeo = map_from_spec(spec, params.n)
            found = barrier_search(profile, diffeo, params.B_values, params.radius_start, params.halvings,
                                   params.samples, seed=config.seed)
            entry = {"alpha": alpha, **found.to_dict()}
            results.append(entry)
            name = f"alpha={alpha:.4f},map={spec}"
            at_most(report, f"barrier_residual[{name}]", found.max_residual, 0.0)
            add_criterion(report, f"ingredient_upper_bound[{name}]", found.bounds.upper_value,
                          "<= 2^k", found.bounds.upper_ok)
            at_most(report, f"keller_osserman[{name}]", found.bounds.keller_osserman, 1.0)
    record_stage(report, "barrier", results=results)
    add_artifact(report, write_json({"results": results}, out_dir / "barrier_certificates.json"))
