use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module(code: &std::ffi::CStr) -> PyResult<()> {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(spbp_py::spbp_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("sp", module)?;
        py.run(code, Some(&globals), None)
    })
}

#[test]
fn graph_round_trip_from_python() {
    with_module(
        c"
g = sp.GraphBuilder()
a = g.add_node([(0.0, 1.0)], sp.Unary.quadratic([0.2], 1.0))
b = g.add_node([(0.0, 1.0)], sp.Unary.quadratic([0.8], 1.0))
g.add_edge(a, b, sp.Pairwise.quadratic(0.5))
graph = g.build()
cfg = sp.EngineConfig(5, 4, 3, sp.Sampler.slice(), seed=1)
out = graph.run([[[0.1], [0.5], [0.9]], [[0.1], [0.5], [0.9]]], cfg)
assert out.total_accepted == out.total_steps == 5 * 2 * 3 * 4
assert len(out.map_estimate()) == 2
try:
    g.build()
    raise AssertionError('builder reused')
except RuntimeError:
    pass
",
    )
    .unwrap();
}

#[test]
fn invalid_inputs_raise_value_error() {
    with_module(
        c"
for bad in (lambda: sp.Sampler.mh(-1.0), lambda: sp.IntervalSet([(2.0, 1.0)]), lambda: sp.rmsd([])):
    try:
        bad()
        raise AssertionError('accepted bad input')
    except ValueError:
        pass
",
    )
    .unwrap();
}
