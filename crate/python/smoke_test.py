"""Smoke test for the compiled extension module.

Build and run from the repository root:

    cargo build --release -p prestrain-py --features extension-module
    cp target/release/libprestrain_py.so python/prestrain_py.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import prestrain_py as ps


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    assert "ex61" in ps.Metric.names()

    m = ps.Metric("ex64")
    c = m.curvature(1.5, 0.5)
    assert close(c["scalar"], 1.5, 1e-10), c
    assert close(c["kappa2d"], 3.5 ** -2, 1e-12), c

    v = ps.Metric("ex63iii").classify(n=17)
    assert v["verdict"] == "ZERO_BENDING_NONIMMERSIBLE", v

    g = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    f = [[1.0, 0.0], [0.0, 0.0]]
    assert close(ps.q2(g, f), 1.5, 1e-12)
    assert all(close(q, 1.5, 1e-12) for q in ps.q2_closed_forms(g, f))
    assert close(ps.density([[2.0, 0, 0], [0, 2.0, 0], [0, 0, 2.0]]), 13.5, 1e-12)

    p = ps.BendingProblem(ps.Metric("ex61"), n=17)
    y0 = p.seed("flat", noise=1e-2, rng_seed=1)
    assert p.energy(y0)["energy"] > 0.0
    y, res = p.minimize(y0)
    assert res["energy"] < 1e-6 and res["isometry_residual"] < 1e-6, res

    report = json.loads(ps.run("scale", json.dumps({"metric": {"catalog": "ex61"}, "ansatz": "koko"})))
    slope = report["results"]["report"]["slope"]
    assert close(slope, 4.0, 0.1), slope

    try:
        ps.Metric("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown metric accepted")

    print("smoke test passed: energy %.2e, slope %.4f" % (res["energy"], slope))
    return 0


if __name__ == "__main__":
    sys.exit(main())
