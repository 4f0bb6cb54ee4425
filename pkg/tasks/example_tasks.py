"""
The two worked examples: failure of tangential decay between thin wedges
(ex51) and the non-decaying first-order coefficient on a hemisphere
bent by a quadratic map (ex52).
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.lab_config import Example51Params, Example52Params, LabConfig
from src.cone_profiles import f_V, solve_cap, solve_wedge
from src.expansion import compute_F, first_order_by_modes, source_slope
from src.export import write_dat, write_table
from src.geometry import example5_map
from src.section_grid import SectionGrid
from src.spectral import eigen_solve, mu1
from src.substitution import critical_power
from tasks.reporting import add_artifact, add_criterion, at_least, at_most, begin_stage, record_stage, within

logger = logging.getLogger(__name__)

Report = Dict[str, Any]

HEMISPHERE = 0.5 * math.pi


def wedge_angle(z: float) -> float:
    """Opening of the wedge between y = 0 and y = (1+z)x/100."""
    return math.atan((1.0 + z) / 100.0)


def example51_task(params: Example51Params, report: Report, out_dir: Path, config: LabConfig) -> None:
    begin_stage(report, "solve_wedge[z=0]")
    base = solve_wedge(wedge_angle(0.0), params.N, extrapolate=True, config=config)

    rows = []
    for z in tqdm(params.z_list, desc="ex51 wedges", disable=not logger.isEnabledFor(logging.INFO)):
        begin_stage(report, f"solve_wedge[z={z:g}]")
        profile = solve_wedge(wedge_angle(z), params.N, extrapolate=True, config=config)
        for k in params.k_list:
            begin_stage(report, f"f_V[z={z:g},k={k:g}]")
            ratios = [f_V(profile, k * s, s) / f_V(base, k * s, s) for s in params.s_values]
            rows.append({
                "z": z,
                "k": k,
                "alpha_z": profile.alpha,
                "ratio": ratios[0],
                "spread_over_s": max(ratios) - min(ratios),
            })

    table = pd.DataFrame(rows)
    add_artifact(report, write_table(table, out_dir / "ex51_ratios.csv", {"s_values": params.s_values, "N": params.N}))
    add_artifact(report, write_dat({"z": table["z"], "k": table["k"], "ratio": table["ratio"]}, out_dir / "ex51_ratios.dat"))

    homogeneity = float(table["spread_over_s"].abs().max())
    deviation = float((table["ratio"] - 1.0).abs().max())
    worst = table.loc[(table["ratio"] - 1.0).abs().idxmax()]
    record_stage(report, "sweep", homogeneity=homogeneity, max_deviation=deviation,
                 worst_z=float(worst["z"]), worst_k=float(worst["k"]))
    at_most(report, "s_independence", homogeneity, params.homogeneity_tol)
    add_criterion(report, "max_ratio_deviation", deviation, f"> {params.ratio_threshold:g}",
                  deviation > params.ratio_threshold, note="tangential decay fails")


def example52_task(params: Example52Params, report: Report, out_dir: Path, config: LabConfig) -> None:
    n = 3
    begin_stage(report, "solve_cap")
    profile = solve_cap(n, HEMISPHERE, params.N, config=config)

    begin_stage(report, "compute_F")
    phi = 2.0 * math.pi * np.arange(params.n_phi) / params.n_phi
    source = compute_F(example5_map(n), profile, phi)
    F0 = source.meridian(0)
    band = profile.interior & (profile.theta >= (1.0 - params.band_fraction) * HEMISPHERE) & (np.abs(F0) > 0)
    slope = source_slope(F0, profile.xi, band)
    expected = critical_power(n)
    record_stage(report, "compute_F", slope=slope, expected=expected, C_bar=source.bound, band_nodes=int(band.sum()))
    add_artifact(report, write_dat({"log_xi": np.log(profile.xi[band]), "log_F": np.log(np.abs(F0[band]))},
                                   out_dir / "ex52_source_slope.dat"))
    within(report, "source_slope", slope, expected - params.slope_tol, expected + params.slope_tol)

    begin_stage(report, "first_order_by_modes")
    expansion = first_order_by_modes(profile, source, k=params.k, config=config)
    statistic = expansion.band_statistic(HEMISPHERE, params.band_fraction)
    mu = mu1(expansion.eigenvalues[0][0], n) if 0 in expansion.eigenvalues else None
    record_stage(report, "first_order_by_modes", residual=expansion.residual, band_statistic=statistic,
                 modes=sorted(expansion.eigenvalues), mu1=mu)
    add_artifact(report, write_table(expansion.to_frame(), out_dir / "ex52_c1.csv", {"band_statistic": statistic}))
    add_criterion(report, "no_decay_band_statistic", statistic, f"> {params.band_ratio_threshold:g}",
                  statistic > params.band_ratio_threshold)

    if mu is None:
        begin_stage(report, "eigen_solve")
        mu = eigen_solve(SectionGrid.cap(n, HEMISPHERE, params.N), profile.rho, n, k=1, config=config)[0].mu
    at_least(report, "mu1_above_one", mu, 1.0 + 1e-9)
