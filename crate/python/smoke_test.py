"""Smoke test for the `wex` extension module.

Run directly (`python python/smoke_test.py`) or under pytest.
"""

import math

import wex


def close(a, b, tol):
    return abs(a - b) <= tol


def test_absorption_split():
    u, v = wex.absorption_split(10.0, 3.0)
    assert close(u, 0.7, 1e-12) and close(v, 0.3, 1e-12)


def test_diffusion():
    assert wex.symmetric_diffusion(2, 0.5) == [[0.5]]
    d = wex.symmetric_diffusion(3, 1 / 6)
    assert close(d[0][0], 2 / 6, 1e-12) and close(d[0][1], -1 / 6, 1e-12)


def test_simulate_matches_split():
    out = wex.simulate([3.0, 7.0], t_max=5000, count=4000, seed=3, kernel_spec="constant(0.5)")
    assert len(out["final"]) == 4000
    ruined = sum(1 for c in out["corner"] if c == 1) / 4000
    assert close(ruined, 0.7, 4 * math.sqrt(0.21 / 4000)), ruined
    assert all(sum(s) == 10.0 for s in out["final"])


def test_master_conserves_mass():
    states, p = wex.evolve_master([1.0, 2.0, 1.0], steps=40)
    assert len(states) == len(p) == 15
    assert close(sum(p), 1.0, 1e-12)


def test_solutions_hold_unit_mass():
    line = wex.ImageSolution(3.0, 1.0, 10.0, 0.5)
    assert close(line.total_mass(), 1.0, 1e-9)
    assert line.density(-1.0) == 0.0
    tri = wex.CompositeSolution((4.0, 3.0), 1.0, 10.0, 1 / 6)
    assert close(tri.total_mass(), 1.0, 1e-4)
    assert tri.image_count > 1
    fd = wex.solve_fpe(0.5, 10.0, [3.0], horizon=1.0, spacing=0.1)
    assert close(sum(fd["masses"]), 1.0, 1e-9)
    assert len(fd["coordinates"]) == 101


def test_compare_report():
    report = wex.compare(("mc", "master"), [3.0, 7.0], 50.0, 0.5, count=20000, seed=1)
    assert report["metrics"]["tv"] < 0.03
    assert report["pass"] in (True, False)


def test_errors_are_value_errors():
    for bad in (lambda: wex.absorption_split(10.0, 11.0), lambda: wex.simulate([3.0, 7.0], 1, 1, kernel_spec="nope")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")


if __name__ == "__main__":
    tests = [f for name, f in sorted(globals().items()) if name.startswith("test_")]
    for t in tests:
        t()
        print(f"ok  {t.__name__}")
    print(f"{len(tests)} passed (wex {wex.__version__})")
