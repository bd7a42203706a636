//! Acceptance criteria at full resolution. Each test prints one line,
//! `criterion N PASS|FAIL …`, and fails on any check that is not a documented
//! limitation. Tolerances are pinned in `hsl_core::suite`.

use std::io::Write;

use hsl_core::suite::{run_criterion, SuiteOptions};

fn criterion(id: usize) {
    let r = run_criterion(id, &SuiteOptions::full());
    // written past the harness capture so the status line always shows up
    let mut text = format!("{}\n", r.line());
    for n in &r.notes {
        text.push_str(&format!("    {n}\n"));
    }
    std::io::stdout().lock().write_all(text.as_bytes()).unwrap();
    assert!(r.acceptable(), "{}", r.line());
}

#[test]
fn c01_flat_cylinder_exactness() {
    criterion(1);
}

#[test]
fn c02_closure_criterion_equivalence() {
    criterion(2);
}

#[test]
fn c03_graph_solver_order() {
    criterion(3);
}

#[test]
fn c04_comparison_principle() {
    criterion(4);
}

#[test]
fn c05_level_set_diameter() {
    criterion(5);
}

#[test]
fn c06_jacobi_field_oracle() {
    criterion(6);
}

#[test]
fn c07_principal_eigenvalue_oracles() {
    criterion(7);
}

#[test]
fn c08_estrella_constants() {
    criterion(8);
}

#[test]
fn c09_radius_property() {
    criterion(9);
}

#[test]
fn c10_pointwise_estrella_margin() {
    criterion(10);
}

#[test]
fn c11_flux_integrals() {
    criterion(11);
}

#[test]
fn c12_soliton_equivalence() {
    criterion(12);
}

#[test]
fn c13_height_saturation() {
    criterion(13);
}
