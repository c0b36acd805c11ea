"""Smoke test for the spectral_maxwell_py extension module.

Build the module first, e.g. ``maturin develop -m crates/spectral-maxwell-py/Cargo.toml``
or ``cargo build --release -p spectral-maxwell-py`` and copy the resulting
``libspectral_maxwell_py.so`` next to this script as ``spectral_maxwell_py.so``.
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import spectral_maxwell_py as sm


def check(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip())
    if not ok:
        raise SystemExit(1)


def main():
    sphere = sm.Surface.sphere(1.0)
    check("sphere diameter", abs(sphere.diameter() - 2.0) < 1e-14)
    check("sphere contains origin", sphere.contains([0.0, 0.0, 0.0]))

    medium = sm.Medium.from_refractive_index(1.5 + 0j, 0.3)
    check("medium k_plus", abs(medium.k_plus - 0.3) < 1e-15)

    wave = sm.IncidentWave.scattering_plane(0.0, "H")
    solver = sm.Solver(medium, sphere, 4, 8)
    solution = solver.solve(wave)
    err = solution.err_mie(201)
    check("ERR_Mie small sphere", err < 1e-6, f"err={err:.3e}")
    check("constraint residual", solution.constraint_residual < 1e-6,
          f"res={solution.constraint_residual:.3e}")

    thetas = sm.theta_grid(9)
    far = solution.far_field_plane(thetas)
    dirs = [[math.sin(t), 0.0, math.cos(t)] for t in thetas]
    reference = sm.mie_far_field(medium, 1.0, wave.direction, wave.polarization, dirs)
    diff = max(abs(a - b) for u, v in zip(far, reference) for a, b in zip(u, v))
    check("far field matches Mie", diff < 1e-6 * max(abs(c) for v in reference for c in v),
          f"diff={diff:.3e}")

    sigma = sm.rcs(far, thetas, "H")
    check("rcs finite", all(math.isfinite(s) for s in sigma))

    inside, outside = solution.near_field([[0.0, 0.0, 0.2], [0.0, 0.0, 2.0]])
    check("near field flags", inside[2] and not outside[2])

    free = sm.Medium.from_refractive_index(1.0 + 0j, 1.0)
    free_far = sm.Solver(free, sphere, 3).solve(wave).far_field_plane(thetas)
    check("no contrast gives zero far field", all(abs(c) == 0.0 for v in free_far for c in v))

    rows = sm.counterexample([0j, 1j, 3 - 2j])
    check("counterexample singular", all(r["abs_det"] <= r["bound"] for r in rows))
    check("counterexample trivial common kernel", all(r["common_kernel_dim"] == 0 for r in rows))

    sweep = sm.frequency_sweep(medium, sphere, 2, [0.5, 1.0])
    check("sweep rows", len(sweep) == 2 and all(k >= 1.0 for _, k, _ in sweep))

    try:
        sm.IncidentWave([0.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    except sm.SpectralMaxwellError:
        check("non-orthogonal polarization rejected", True)
    else:
        check("non-orthogonal polarization rejected", False)

    with tempfile.TemporaryDirectory() as out:
        config = {
            "shape": {"kind": "sphere", "radius": 1.0},
            "medium": {"eps_minus_re": 2.25},
            "omega": 0.3,
            "n": 3,
            "task": "counterexample",
            "samples": 5,
            "output_dir": out,
        }
        report = json.loads(sm.run_config(json.dumps(config)))
        check("run_config report", report["task"] == "counterexample" and report["files"])

    print("smoke test passed")


if __name__ == "__main__":
    main()
