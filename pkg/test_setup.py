"""
Test script to verify the cone blow-up lab setup.

Checks that all modules can be imported and that a few small solves run.
"""

import math
import sys
import tempfile
from pathlib import Path


def test_imports():
    """Test that all required modules can be imported."""
    print("Testing imports...")

    try:
        # Core modules
        from config.lab_config import DEFAULT_CONFIG, PARAMS_MODELS, ExperimentConfig, ResolutionPresets
        print("✓ config.lab_config")

        from src.geometry import ConeDescription, map_from_spec, norm_vs_distance_check
        print("✓ src.geometry")

        from src.cone_profiles import solve_cap, solve_wedge, eval_cone_solution, f_V
        print("✓ src.cone_profiles")

        from src.sphere_fields import SphericalDomain, solve_rho_2d
        print("✓ src.sphere_fields")

        from src.spectral import eigen_solve, resolvent_solve, decay_check, mu1
        print("✓ src.spectral")

        from src.expansion import build_cutoff_c, solve_L0, compute_F, first_order_coefficient
        print("✓ src.expansion")

        from src.domain_solver import solve_ball, solve_axisymmetric, ratio_profile, barrier_certify
        print("✓ src.domain_solver")

        from src.rates import fit_rate
        print("✓ src.rates")

        # Task modules
        from tasks.solver_tasks import wedge_task, ball_task
        print("✓ tasks.solver_tasks")

        from tasks.theorem_tasks import theorem1_task, theorem2_task
        print("✓ tasks.theorem_tasks")

        from tasks.example_tasks import example51_task, example52_task
        print("✓ tasks.example_tasks")

        print("\n✅ All imports successful!\n")
        return True

    except Exception as e:
        print(f"\n❌ Import failed: {e}\n")
        import traceback
        traceback.print_exc()
        return False


def test_profiles():
    """Test the wedge and cap profile solvers on their exact cases."""
    print("Testing profile solvers...")

    try:
        import numpy as np
        from src.cone_profiles import solve_cap, solve_wedge

        half_plane = solve_wedge(math.pi, 64, extrapolate=True)
        error = float(np.max(np.abs(half_plane.rho - np.sin(half_plane.theta))))
        assert error < 1e-4
        print(f"✓ wedge alpha=pi matches sin(theta) (error {error:.2e})")

        hemisphere = solve_cap(3, math.pi / 2, 64, extrapolate=True)
        error = float(np.max(np.abs(hemisphere.rho - np.cos(hemisphere.theta))))
        assert error < 1e-3
        print(f"✓ cap alpha=pi/2 matches cos(theta) (error {error:.2e})")

        cap = solve_cap(3, math.pi / 3, 64)
        c3, c4 = cap.rho_bounds()
        print(f"✓ cap alpha=pi/3: residual {cap.residual:.2e}, c3={c3:.4f}, c4={c4:.4f}")

        print("\n✅ Profile test passed!\n")
        return True

    except Exception as e:
        print(f"\n❌ Profile test failed: {e}\n")
        import traceback
        traceback.print_exc()
        return False


def test_ball():
    """Test the radial ball solve against the exact solution."""
    print("Testing ball solve...")

    try:
        import numpy as np
        from src.domain_solver import solve_ball

        solution = solve_ball(3, 1.0, 64)
        r = solution.coordinates["r"]
        error = float(np.max(np.abs(solution.w - (1.0 - r ** 2) / 2.0)))
        assert error < 1e-8
        print(f"✓ solve_ball(n=3, s=1) w error {error:.2e}, u(0) = {solution.u[0]:.6f}")

        print("\n✅ Ball test passed!\n")
        return True

    except Exception as e:
        print(f"\n❌ Ball test failed: {e}\n")
        import traceback
        traceback.print_exc()
        return False


def test_config_options():
    """Test configuration presets and the experiment runner."""
    print("Testing configuration options...")

    try:
        from config.lab_config import ExperimentEntry, ResolutionPresets
        from run_experiments import main

        for level in ["quick", "standard", "fine"]:
            sizes = ResolutionPresets.get_config(level)
            assert isinstance(sizes, dict)
            print(f"✓ ResolutionPresets.{level}: {sizes}")

        params = ExperimentEntry(name="wedge").typed_params("quick")
        assert params.N == ResolutionPresets.QUICK["profile_N"]
        print(f"✓ wedge params at quick resolution: N={params.N}")

        with tempfile.TemporaryDirectory() as tmp:
            code = main(["ball", "--out", tmp, "--resolution", "64"])
            assert code == 0
            assert (Path(tmp) / "ball" / "ball_report.json").exists()
            print("✓ run_experiments ball --resolution 64")

        print("\n✅ Configuration test passed!\n")
        return True

    except Exception as e:
        print(f"\n❌ Configuration test failed: {e}\n")
        import traceback
        traceback.print_exc()
        return False


def main():
    """Run all tests."""
    print("\n" + "="*70)
    print("Cone Blow-up Lab Setup Test")
    print("="*70 + "\n")

    tests = [
        ("Imports", test_imports),
        ("Profile Solvers", test_profiles),
        ("Ball Solve", test_ball),
        ("Configuration Options", test_config_options)
    ]

    results = []
    for name, test_func in tests:
        print(f"\n{'='*70}")
        print(f"Test: {name}")
        print(f"{'='*70}\n")
        success = test_func()
        results.append((name, success))

    # Print summary
    print("\n" + "="*70)
    print("Test Summary")
    print("="*70 + "\n")

    all_passed = True
    for name, success in results:
        status = "✅ PASS" if success else "❌ FAIL"
        print(f"{status}: {name}")
        if not success:
            all_passed = False

    print("\n" + "="*70)
    if all_passed:
        print("✅ All tests passed! Setup is ready.")
    else:
        print("❌ Some tests failed. Please check the errors above.")
    print("="*70 + "\n")

    return all_passed


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
