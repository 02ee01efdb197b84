//! Refinement studies against manufactured solutions.

mod common;

use common::{elastic_mms_errors, thermal_mms_error};

fn rates(h: &[f64], e: &[f64]) -> Vec<f64> {
    (1..h.len()).map(|i| (e[i - 1] / e[i]).ln() / (h[i - 1] / h[i]).ln()).collect()
}

#[test]
fn thermal_linear_solution_converges_at_second_order() {
    let runs: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h| thermal_mms_error(h)).collect();
    let h: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let e: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let r = rates(&h, &e);
    println!("thermal h={h:?} err={e:?} rates={r:?}");
    assert!(r.iter().all(|&x| x >= 1.8), "{r:?}");
}

#[test]
fn elastic_manufactured_solution_converges() {
    let runs: Vec<(f64, f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h| elastic_mms_errors(h)).collect();
    let h: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let l2: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let h1: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let (r2, r1) = (rates(&h, &l2), rates(&h, &h1));
    println!("elastic h={h:?} l2={l2:?} rates={r2:?} h1={h1:?} rates={r1:?}");
    assert!(r2.iter().all(|&x| x >= 1.8), "{r2:?}");
    assert!(r1.iter().all(|&x| x >= 0.9), "{r1:?}");
}
