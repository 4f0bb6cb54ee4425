import math

import pytest

from config.lab_config import DEFAULT_CONFIG, Example51Params, Theorem1Params, Theorem2Params
from tasks.example_tasks import example51_task, wedge_angle
from tasks.reporting import run_task
from tasks.theorem_tasks import theorem1_task, theorem2_task


def criteria_by_name(report):
    return {c["name"]: c for c in report["criteria"]}


def test_wedge_angle():
    assert wedge_angle(0.0) == pytest.approx(math.atan(0.01))
    assert wedge_angle(1.0) == pytest.approx(math.atan(0.02))
    assert wedge_angle(50.0) > wedge_angle(10.0)


def test_thin_wedge_ratios_are_scale_free(tmp_path):
    params = Example51Params(z_list=[1.0], k_list=[0.5], N=64)
    report = run_task("ex51", example51_task, params, tmp_path, DEFAULT_CONFIG)
    assert report["success"]
    criteria = criteria_by_name(report)
    assert criteria["s_independence"]["passed"]
    assert "max_ratio_deviation" in criteria
    assert (tmp_path / "ex51_ratios.csv").exists()
    assert (tmp_path / "ex51_ratios.dat").exists()


# ======================================================================
# Ratio estimates on bent cones
# ======================================================================

@pytest.mark.parametrize("bend, alpha", [(0.05, math.pi / 3), (0.1, math.pi / 2)])
def test_first_order_ratio_rate(tmp_path, bend, alpha):
    params = Theorem1Params(map=f"example1:{bend}", alpha=alpha)
    report = run_task("thm1", theorem1_task, params, tmp_path, DEFAULT_CONFIG)
    assert report["success"], report.get("error")
    assert report["passed"]
    assert criteria_by_name(report)["rate_exponent"]["value"] >= 0.9


def test_second_order_remainder_on_hemisphere(tmp_path):
    params = Theorem2Params().with_preset("quick")
    report = run_task("thm2", theorem2_task, params, tmp_path, DEFAULT_CONFIG)
    assert report["success"], report.get("error")
    assert report["stages"]["eigen_solve"]["case"] == 1
    criteria = criteria_by_name(report)
    assert criteria["supersolution_certified"]["passed"]
    assert criteria["remainder_exponent"]["value"] >= 1.8
    assert report["passed"]
    assert (tmp_path / "thm2_c1.csv").exists()


def test_second_order_remainder_below_two(tmp_path):
    params = Theorem2Params(alpha=2.5).with_preset("quick")
    report = run_task("thm2", theorem2_task, params, tmp_path, DEFAULT_CONFIG)
    assert report["success"], report.get("error")
    eigen = report["stages"]["eigen_solve"]
    assert eigen["mu1"] < 2.0
    assert eigen["case"] == 3
    criteria = criteria_by_name(report)
    assert criteria["supersolution_certified"]["passed"]
    assert criteria["remainder_exponent"]["value"] > 1.0
