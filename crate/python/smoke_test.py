"""Smoke test for the Python bindings.

Build the extension and put it on the path first:

    cargo build --release -p sediment-lab-py --features extension-module
    cp target/release/libsediment_lab_py.so python/sediment_lab_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import sediment_lab_py as lab


def main():
    grid = lab.Grid(1.0, 1.0, 16, 16)
    h, H = lab.ridge_fields(grid)
    assert len(H) == 256
    assert abs(H.get(0, 0) - (1 - grid.dx / 2) ** 1.5) < 1e-12

    traj = lab.evolve_run(H, h, t_end=1.0, snapshot_stride=1000)
    assert traj.dissipation_violation() is None
    assert traj.max_relative_mass_balance() <= 1e-12
    e = traj.energies()
    assert all(b <= a + 1e-10 * (e[0] + 1) for a, b in zip(e, e[1:]))

    ot = traj.transport()
    assert abs(ot["gap"]) <= 1e-8 * (ot["cost"] + 1)
    assert ot["mean_cosine_dual"] >= 0.95

    res, order = lab.residual_refinement("ridge", [32, 64, 128], a=-0.5, b=0.2, big_h1=2.0, x0=0.5, y0=0.5, crest=True)
    assert order >= 1.5, order

    sup, divergent = lab.muckenhoupt_a4(lambda x, y: 2.0, grid)
    assert sup == 1.0 and not divergent
    _, divergent = lab.muckenhoupt_a4(lambda x, y: max(1.0 - x, 0.0) ** 1.2, grid)
    assert divergent

    try:
        lab.Grid(1.0, 1.0, 0, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid grid accepted")

    with tempfile.TemporaryDirectory() as out:
        code = lab.run_command("simulate", out, overrides=["grid.nx=8", "grid.ny=8", "time.t_end=1e-3"])
        assert code == 0
        first = lab.read_field_csv(os.path.join(out, "snapshot_0.csv"), lab.Grid(1.0, 1.0, 8, 8))
        assert math.isclose(first.max(), lab.ridge_fields(lab.Grid(1.0, 1.0, 8, 8))[1].max())
        assert lab.run_command("transport", out, overrides=["surface.family=flat", "grid.nx=8", "grid.ny=8"]) == 4

    print("smoke test ok")


if __name__ == "__main__":
    main()
