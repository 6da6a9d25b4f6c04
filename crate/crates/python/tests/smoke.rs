//! Runs the Python smoke script against the module embedded in an
//! interpreter.

use std::ffi::CString;

use heatsrc::heatsrc;
use pyo3::prelude::*;

#[test]
fn python_smoke_script_passes() {
    pyo3::append_to_inittab!(heatsrc);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../python/smoke_test.py");
    let script = CString::new(std::fs::read_to_string(path).unwrap()).unwrap();
    Python::attach(|py| {
        let module = PyModule::from_code(py, &script, c"smoke_test.py", c"smoke_test").unwrap();
        module.getattr("main").unwrap().call0().unwrap();
    });
}
