//! Independent oracles shared by the integration tests and the acceptance
//! runner.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use thermofatigue::elasticity::{solve_elasticity_on, DirichletData, LoadData};
use thermofatigue::expr::{ScalarSource, VectorSource};
use thermofatigue::fem::SolverOptions;
use thermofatigue::fields::ScalarField;
use thermofatigue::geometry::{build_baseline, BaselineDesign, Mesh};
use thermofatigue::material::{MaterialParams, Tensor3};
use thermofatigue::thermal::{solve_heat_on, RobinData};

pub const OUTER: f64 = 1.0;
pub const HOLE: f64 = 0.3;

pub fn annulus() -> BaselineDesign {
    BaselineDesign::annulus(OUTER, HOLE, 1.5)
}

pub fn annulus_mesh(h: f64) -> Arc<Mesh> {
    Arc::new(build_baseline(&annulus(), h).unwrap())
}

/// Ambient field `x(a + b|x|²)` chosen so that `T* = x` satisfies
/// `k ∂T*/∂ν = η (T_e − T*)` on both circles, whose outward normals are
/// `x/R₀` (outer) and `−x/r` (hole).
pub fn robin_ambient_for_linear(k: f64, eta: f64) -> (f64, f64) {
    let c = k / eta;
    let b = c * (1.0 / OUTER + 1.0 / HOLE) / (OUTER * OUTER - HOLE * HOLE);
    let a = 1.0 + c / OUTER - b * OUTER * OUTER;
    (a, b)
}

/// Returns `(max cell diameter, max nodal |T − x|)`.
pub fn thermal_mms_error(h: f64) -> (f64, f64) {
    let (k, eta) = (1.0, 2.0);
    let (a, b) = robin_ambient_for_linear(k, eta);
    let mesh = annulus_mesh(h);
    let data = RobinData::new(
        ScalarSource::constant(eta),
        ScalarSource::new(move |x, _| x[0] * (a + b * (x[0] * x[0] + x[1] * x[1]))),
        k,
    );
    let t = solve_heat_on(mesh.clone(), &data, &SolverOptions::default()).unwrap();
    let err = mesh
        .nodes
        .iter()
        .zip(&t.values)
        .map(|(x, v)| (v - x[0]).abs())
        .fold(0.0, f64::max);
    (mesh.max_cell_diameter(), err)
}

/// Dimensionless material for the manufactured elasticity problem.
pub fn mms_material() -> MaterialParams {
    let mut p = MaterialParams::from_youngs_poisson(2.5, 0.25);
    p.thermal_expansion = 0.1;
    p.reference_temperature = 1.0;
    p
}

pub fn mms_temperature(x: &[f64; 3]) -> f64 {
    1.0 + 0.5 * x[0] * x[1]
}

/// `u* = (sin πx sin πy (|x|² − r²), 0)`, vanishing on the hole circle.
pub fn mms_displacement(x: &[f64; 3]) -> [f64; 3] {
    let w = x[0] * x[0] + x[1] * x[1] - HOLE * HOLE;
    [(PI * x[0]).sin() * (PI * x[1]).sin() * w, 0.0, 0.0]
}

pub fn mms_gradient(x: &[f64; 3]) -> Tensor3 {
    let w = x[0] * x[0] + x[1] * x[1] - HOLE * HOLE;
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [
        [PI * cx * sy * w + sx * sy * 2.0 * x[0], PI * sx * cy * w + sx * sy * 2.0 * x[1], 0.0],
        [0.0; 3],
        [0.0; 3],
    ]
}

/// Thermoelastic stress of the manufactured fields, written out by hand.
pub fn mms_stress(x: &[f64; 3], p: &MaterialParams) -> Tensor3 {
    let g = mms_gradient(x);
    let div = g[0][0] + g[1][1];
    let th = p.thermal_expansion * (3.0 * p.lambda + 2.0 * p.mu) * (mms_temperature(x) - p.reference_temperature);
    let mut s = [[0.0; 3]; 3];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = p.mu * (g[i][j] + g[j][i]);
        }
        s[i][i] += p.lambda * div - th;
    }
    s
}

/// `f = −div σ̃(u*)` by nested central differences.
pub fn mms_body_force(x: &[f64; 3], p: &MaterialParams) -> [f64; 3] {
    let h = 1e-5;
    let mut f = [0.0; 3];
    for j in 0..2 {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += h;
        xm[j] -= h;
        let (sp, sm) = (mms_stress(&xp, p), mms_stress(&xm, p));
        for i in 0..2 {
            f[i] -= (sp[i][j] - sm[i][j]) / (2.0 * h);
        }
    }
    f
}

/// Returns `(max cell diameter, L² error, H¹ seminorm error)`.
pub fn elastic_mms_errors(h: f64) -> (f64, f64, f64) {
    let p = mms_material();
    let mesh = annulus_mesh(h);
    let t = ScalarField::from_fn(mesh.clone(), mms_temperature);
    let pf = p.clone();
    let pg = p.clone();
    let loads = LoadData {
        body_force: VectorSource::new(move |x, _| mms_body_force(x, &pf)),
        traction: VectorSource::new(move |x, n| {
            let s = mms_stress(x, &pg);
            [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1], 0.0]
        }),
        traction_bound: None,
    };
    let (u, _) =
        solve_elasticity_on(mesh.clone(), &loads, &t, &p, &DirichletData::Clamped, &SolverOptions::default()).unwrap();
    (mesh.max_cell_diameter(), u.l2_error(mms_displacement), u.h1_error(mms_gradient))
}
