use pyo3::ffi::c_str;
use pyo3::prelude::*;
use prestrain_py::prestrain_py;

fn with_module<R>(f: impl FnOnce(Python<'_>) -> PyResult<R>) -> R {
    static INIT: std::sync::Once = std::sync::Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(prestrain_py);
        Python::initialize();
    });
    Python::attach(|py| f(py).unwrap_or_else(|e| panic!("{e}")))
}

#[test]
fn curvature_and_density_from_python() {
    with_module(|py| {
        let code = c_str!(
            r#"
import prestrain_py as ps
c = ps.Metric("ex64").curvature(1.5, 0.5)
assert abs(c["scalar"] - 1.5) < 1e-10
assert abs(ps.q2([[1,0,0],[0,1,0],[0,0,1]], [[1,0],[0,0]]) - 1.5) < 1e-12
assert ps.Metric("ex63iii").classify(n=9)["verdict"] == "ZERO_BENDING_NONIMMERSIBLE"
"#
        );
        py.run(code, None, None)
    });
}

#[test]
fn errors_map_to_python_exceptions() {
    with_module(|py| {
        let code = c_str!(
            r#"
import prestrain_py as ps
for bad, exc in [(lambda: ps.Metric("nope"), ValueError),
                 (lambda: ps.q2([[1,0,0],[0,1,0],[0,0,-1]], [[1,0],[0,0]]), ValueError),
                 (lambda: ps.run("fly", "{}"), ValueError)]:
    try:
        bad()
    except exc:
        pass
    else:
        raise AssertionError("no exception")
"#
        );
        py.run(code, None, None)
    });
}

#[test]
fn bending_round_trip() {
    with_module(|py| {
        let code = c_str!(
            r#"
import prestrain_py as ps
p = ps.BendingProblem(ps.Metric("ex61"), n=9)
y = p.seed("flat", noise=1e-2, rng_seed=3)
assert len(y) == 81 and len(p.nodes()) == 81
y, r = p.minimize(y)
assert r["energy"] < 1e-6 and p.isometry_residual(y) < 1e-6
"#
        );
        py.run(code, None, None)
    });
}
