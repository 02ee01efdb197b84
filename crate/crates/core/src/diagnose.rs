//! Empirical uniformity suite: maximum principle, sup norms and Hölder
//! seminorm estimates of the state over a family of random admissible
//! shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elasticity::{solve_elasticity_on, DirichletData};
use crate::error::Result;
use crate::geometry::{deform, holder_seminorm_estimate, AdmissibilityReport, FieldRef, Shape};
use crate::optimize::Problem;
use crate::thermal::{solve_heat_on, temperature_bounds_check, BoundsReport, RobinData};

/// Index of the aligned mode-1 (radial) field in the Fourier bump basis.
const RADIAL_MODE: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseOptions {
    pub shapes: usize,
    pub seed: u64,
    /// Coefficients are drawn uniformly from `[−amplitude, amplitude]`.
    pub amplitude: f64,
    /// Random node pairs in each Hölder estimate, on top of the mesh edges.
    pub sample_pairs: usize,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        DiagnoseOptions {
            shapes: 50,
            seed: 0,
            amplitude: 0.05,
            sample_pairs: 2000,
        }
    }
}

/// Draws `opts.shapes` coefficient vectors; the first is the baseline. The
/// radial coefficient of each random draw is re-solved to restore the
/// baseline volume, and draws failing the full admissibility check are
/// shrunk towards zero until they pass.
pub fn random_admissible_designs(problem: &Problem, opts: &DiagnoseOptions) -> Result<Vec<Vec<f64>>> {
    let n = problem.dimension();
    (0..opts.shapes)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return Ok(vec![0.0; n]);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            let draw: Vec<f64> = (0..n).map(|_| opts.amplitude * rng.random_range(-1.0..1.0)).collect();
            let mut scale = 1.0;
            for _ in 0..20 {
                let mut theta: Vec<f64> = draw.iter().map(|t| t * scale).collect();
                if restore_volume(problem, &mut theta) && problem.admissibility_report(&theta)?.passed {
                    return Ok(theta);
                }
                scale *= 0.5;
            }
            Ok(vec![0.0; n])
        })
        .collect()
}

fn restore_volume(problem: &Problem, theta: &mut [f64]) -> bool {
    if theta.len() <= RADIAL_MODE {
        return true;
    }
    let vb = problem.baseline_volume();
    let dev = |c: f64| {
        let mut t = theta.to_vec();
        t[RADIAL_MODE] = c;
        match problem.map(&t) {
            Ok(m) => (deform::volume(&m, &problem.baseline_mesh) - vb) / vb,
            Err(_) => f64::NAN,
        }
    };
    // the volume is nearly linear in the radial coefficient, so a secant
    // iteration converges in a handful of steps
    let (mut c0, mut c1) = (theta[RADIAL_MODE], theta[RADIAL_MODE] + 0.01);
    let (mut d0, mut d1) = (dev(c0), dev(c1));
    for _ in 0..30 {
        if !d1.is_finite() || d1 == d0 {
            return false;
        }
        if d1.abs() <= 1e-12 {
            theta[RADIAL_MODE] = c1;
            return true;
        }
        let c2 = c1 - d1 * (c1 - c0) / (d1 - d0);
        (c0, d0) = (c1, d1);
        c1 = c2;
        d1 = dev(c1);
    }
    false
}

/// One (shape, ambient field) row of the suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub shape: usize,
    pub ambient: usize,
    pub theta: Vec<f64>,
    pub min_det: f64,
    pub volume_deviation: f64,
    pub map_norm: f64,
    pub admissible: bool,
    pub bounds: BoundsReport,
    pub max_abs_t: f64,
    pub max_abs_ambient: f64,
    /// `max |T| ≤ max |T_e|` without tolerance.
    pub sup_bound_ok: bool,
    /// `[‖T‖∞, ‖∇T‖∞]` with the recovered gradient.
    pub t_sup: [f64; 2],
    pub u_sup: [f64; 2],
    /// Hölder seminorm estimates of orders 0, 1 and 2.
    pub t_holder: [f64; 3],
    pub u_holder: [f64; 3],
}

impl DiagnosticRow {
    pub fn estimates_finite(&self) -> bool {
        self.t_holder.iter().chain(&self.u_holder).all(|v| v.is_finite())
    }

    pub const CSV_HEADER: &'static str = "shape,ambient,min_det,volume_deviation,map_norm,admissible,min_t,max_t,min_ambient,max_ambient,slack_used,max_principle,max_abs_t,max_abs_ambient,sup_bound,t_sup0,t_sup1,u_sup0,u_sup1,t_holder0,t_holder1,t_holder2,u_holder0,u_holder1,u_holder2";

    pub fn csv_line(&self) -> String {
        let b = &self.bounds;
        let num = |v: &f64| format!("{v:?}");
        let mut f: Vec<String> = vec![self.shape.to_string(), self.ambient.to_string()];
        f.extend([self.min_det, self.volume_deviation, self.map_norm].iter().map(num));
        f.push(self.admissible.to_string());
        f.extend([b.min_t, b.max_t, b.min_ambient, b.max_ambient, b.slack_used].iter().map(num));
        f.push(b.passed.to_string());
        f.extend([self.max_abs_t, self.max_abs_ambient].iter().map(num));
        f.push(self.sup_bound_ok.to_string());
        let tail = self.t_sup.iter().chain(&self.u_sup).chain(&self.t_holder).chain(&self.u_holder);
        f.extend(tail.map(num));
        f.join(",")
    }
}

/// Solves heat and elasticity on design `theta` under `robin` and collects
/// the diagnostics.
pub fn diagnose_design(
    problem: &Problem,
    theta: &[f64],
    robin: &RobinData,
    shape_id: usize,
    ambient_id: usize,
    opts: &DiagnoseOptions,
) -> Result<DiagnosticRow> {
    let adm = problem.admissibility_report(theta)?;
    diagnose_with(problem, theta, &adm, robin, shape_id, ambient_id, opts)
}

fn diagnose_with(
    problem: &Problem,
    theta: &[f64],
    adm: &AdmissibilityReport,
    robin: &RobinData,
    shape_id: usize,
    ambient_id: usize,
    opts: &DiagnoseOptions,
) -> Result<DiagnosticRow> {
    let map = problem.map(theta)?;
    let shape = Shape::new(problem.design.clone(), map, problem.baseline_mesh.clone())?;
    let t = solve_heat_on(shape.mesh.clone(), robin, &problem.solver)?;
    let (u, _) = solve_elasticity_on(
        shape.mesh.clone(),
        &problem.loads,
        &t,
        &problem.material,
        &DirichletData::Clamped,
        &problem.solver,
    )?;
    let bounds = temperature_bounds_check(&t, robin);
    let max_abs_ambient = bounds.min_ambient.abs().max(bounds.max_ambient.abs());
    let max_abs_t = t.max_abs();
    let alpha = problem.admissibility.holder_exponent;
    let seed = opts.seed.wrapping_add(shape_id as u64);
    let mut t_holder = [0.0; 3];
    let mut u_holder = [0.0; 3];
    for k in 0..3 {
        t_holder[k] = holder_seminorm_estimate(FieldRef::Scalar(&t), k, alpha, opts.sample_pairs, seed)?;
        u_holder[k] = holder_seminorm_estimate(FieldRef::Vector(&u), k, alpha, opts.sample_pairs, seed)?;
    }
    let grad_t = t.recovered_gradient().max_norm();
    let grad_u = u
        .recovered_gradient()
        .iter()
        .flat_map(|g| g.iter().flatten().copied())
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok(DiagnosticRow {
        shape: shape_id,
        ambient: ambient_id,
        theta: theta.to_vec(),
        min_det: adm.min_det,
        volume_deviation: adm.volume_deviation,
        map_norm: adm.map_norm.total(),
        admissible: adm.passed,
        sup_bound_ok: max_abs_t <= max_abs_ambient,
        bounds,
        max_abs_t,
        max_abs_ambient,
        t_sup: [max_abs_t, grad_t],
        u_sup: [u.max_norm(), grad_u],
        t_holder,
        u_holder,
    })
}

/// The whole suite: every shape under every ambient field, in
/// `(shape, ambient)` order.
pub fn run_suite(problem: &Problem, ambients: &[RobinData], opts: &DiagnoseOptions) -> Result<Vec<DiagnosticRow>> {
    let designs = random_admissible_designs(problem, opts)?;
    let reports: Vec<AdmissibilityReport> = designs
        .par_iter()
        .map(|t| problem.admissibility_report(t))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..designs.len())
        .flat_map(|s| (0..ambients.len()).map(move |a| (s, a)))
        .collect();
    jobs.into_par_iter()
        .map(|(s, a)| diagnose_with(problem, &designs[s], &reports[s], &ambients[a], s, a, opts))
        .collect()
}

pub fn rows_to_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = String::from(DiagnosticRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}
