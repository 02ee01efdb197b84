//! Failure functionals, Weibull statistics and reliability comparisons.
//!
//! Only surface crack initiation is modelled: the volume life is identically
//! infinite, so the volume term of the objective is always zero.

mod sampling;

pub use sampling::{
    ks_distance, replicate, sample_crack_process, sample_from_report, CrackEvent, CrackEventSet,
};

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::mesh::{BoundaryTag, Mesh, Point};
use crate::material::{nsur_pointwise, weibull_intensity, Life, MaterialParams, Tensor3};
use crate::thermal::boundary_points;

/// One boundary quadrature point of the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub facet: usize,
    pub tag: BoundaryTag,
    pub x: Point,
    /// Quadrature weight including the facet measure.
    pub weight: f64,
    pub n_sur: Life,
    /// `weight · (1/N_sur)^m`.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    /// `J = ∮ (1/N_sur)^m dA`.
    pub objective: f64,
    /// Weibull scale `J^{−1/m}`, infinite when `J = 0`.
    pub scale: Life,
    pub shape: f64,
    /// Always zero: no volume failure mechanism is modelled.
    pub volume_term: f64,
    pub include_dirichlet: bool,
    pub samples: Vec<SurfaceSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveOptions {
    /// Integrate over the clamped hole boundary as well as the outer one.
    pub include_dirichlet: bool,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        ObjectiveOptions {
            include_dirichlet: true,
        }
    }
}

/// Weibull scale from the objective.
pub fn scale_from_objective(j: f64, m: f64) -> Life {
    if j > 0.0 {
        Life::from_f64(j.powf(-1.0 / m))
    } else {
        Life::Infinite
    }
}

impl ReliabilityReport {
    /// Report for a given objective with no surface table; useful for
    /// analytic comparisons.
    pub fn from_objective(j: f64, m: f64) -> Self {
        ReliabilityReport {
            objective: j,
            scale: scale_from_objective(j, m),
            shape: m,
            volume_term: 0.0,
            include_dirichlet: true,
            samples: Vec::new(),
        }
    }

    pub fn from_scale(n: Life, m: f64) -> Self {
        let objective = n.inverse_pow(m);
        ReliabilityReport {
            objective,
            scale: n,
            ..Self::from_objective(objective, m)
        }
    }

    pub fn to_json(&self, times: &[f64]) -> Result<String> {
        #[derive(Serialize)]
        struct CdfPoint {
            t: f64,
            cdf: f64,
            hazard: Option<f64>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            objective: f64,
            scale: Life,
            shape: f64,
            volume_term: f64,
            include_dirichlet: bool,
            mean_life: Life,
            cdf: Vec<CdfPoint>,
            surface: &'a [SurfaceSample],
        }
        let doc = Doc {
            objective: self.objective,
            scale: self.scale,
            shape: self.shape,
            volume_term: self.volume_term,
            include_dirichlet: self.include_dirichlet,
            mean_life: mean_life(self).unwrap_or(Life::Infinite),
            cdf: times
                .iter()
                .map(|&t| CdfPoint {
                    t,
                    cdf: failure_cdf(t, self),
                    hazard: hazard_rate(t, self).ok(),
                })
                .collect(),
            surface: &self.samples,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Builds the report from any pointwise life model evaluated at the boundary
/// quadrature points of `mesh`. This is the hook used to inject synthetic
/// lives in tests.
pub fn objective_from_lives(
    mesh: &Mesh,
    m: f64,
    opts: &ObjectiveOptions,
    life: impl Fn(&crate::thermal::BoundaryPoint) -> Result<Life> + Sync,
) -> Result<ReliabilityReport> {
    if !(m > 0.0) {
        return Err(validation(format!("Weibull shape must be positive, got {m}")));
    }
    let points: Vec<_> = boundary_points(mesh)
        .into_iter()
        .filter(|bp| opts.include_dirichlet || mesh.facets[bp.facet].tag != BoundaryTag::Dirichlet)
        .collect();
    let samples: Vec<SurfaceSample> = points
        .par_iter()
        .map(|bp| {
            let n_sur = life(bp)?;
            Ok(SurfaceSample {
                facet: bp.facet,
                tag: mesh.facets[bp.facet].tag,
                x: bp.x,
                weight: bp.weight,
                n_sur,
                contribution: bp.weight * n_sur.inverse_pow(m),
            })
        })
        .collect::<Result<_>>()?;
    let objective: f64 = samples.iter().map(|s| s.contribution).sum();
    Ok(ReliabilityReport {
        objective,
        scale: scale_from_objective(objective, m),
        shape: m,
        volume_term: 0.0,
        include_dirichlet: opts.include_dirichlet,
        samples,
    })
}

/// `J = ∮ (1/N_sur)^m dA` with `N_sur` from recovered nodal `∇u` and nodal
/// `T`, both interpolated linearly to the facet quadrature points.
pub fn objective_j(
    u: &VectorField,
    t: &ScalarField,
    p: &MaterialParams,
    opts: &ObjectiveOptions,
) -> Result<ReliabilityReport> {
    let mesh = &u.mesh;
    if t.values.len() != mesh.num_nodes() || u.values.len() != mesh.num_nodes() {
        return Err(validation("displacement and temperature fields do not match the mesh"));
    }
    if !std::sync::Arc::ptr_eq(mesh, &t.mesh) && **mesh != *t.mesh {
        return Err(validation("displacement and temperature live on different meshes"));
    }
    let grads = u.recovered_gradient();
    let dim = mesh.dim;
    objective_from_lives(mesh, p.weibull_shape, opts, |bp| {
        let nodes = &mesh.facets[bp.facet].nodes;
        let mut g: Tensor3 = [[0.0; 3]; 3];
        let mut temp = 0.0;
        for (&n, &b) in nodes.iter().zip(&bp.bary) {
            temp += b * t.values[n];
            for i in 0..3 {
                for j in 0..3 {
                    g[i][j] += b * grads[n][i][j];
                }
            }
        }
        nsur_pointwise(&g, dim, temp, p)
    })
}

/// `F(t) = 1 − exp(−(t/N)^m)`; zero for an infinite scale.
pub fn failure_cdf(t: f64, report: &ReliabilityReport) -> f64 {
    match report.scale {
        Life::Infinite => 0.0,
        Life::Finite(n) => {
            if t <= 0.0 {
                0.0
            } else {
                -(-(t / n).powf(report.shape)).exp_m1()
            }
        }
    }
}

/// `h(t) = (m/N)(t/N)^{m−1}`; zero for an infinite scale.
pub fn hazard_rate(t: f64, report: &ReliabilityReport) -> Result<f64> {
    if t == 0.0 && report.shape < 1.0 && !report.scale.is_infinite() {
        return Err(validation("hazard rate is unbounded at t = 0 when m < 1"));
    }
    weibull_intensity(t, report.scale, report.shape)
}

/// Lanczos approximation (g = 7, nine terms), accurate to about 1e-15
/// relative for positive arguments.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Expected first-failure time `N Γ(1 + 1/m)`.
pub fn mean_life(report: &ReliabilityReport) -> Result<Life> {
    match report.scale {
        Life::Infinite => Ok(Life::Infinite),
        Life::Finite(n) => {
            if !(report.shape > 0.0) {
                return Err(validation("Weibull shape must be positive"));
            }
            Ok(Life::Finite(n * gamma(1.0 + 1.0 / report.shape)))
        }
    }
}

/// How design 1 relates to design 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Design 1 is at least as reliable everywhere and strictly somewhere.
    FirstDominates,
    SecondDominates,
    Equal,
    /// Neither dominates.
    Incomparable,
}

impl Relation {
    /// Aggregates pointwise comparisons where `Less` means design 1 is
    /// better (smaller CDF or hazard).
    fn from_pointwise(cmp: impl IntoIterator<Item = Ordering>) -> Self {
        let (mut better, mut worse) = (false, false);
        for c in cmp {
            match c {
                Ordering::Less => better = true,
                Ordering::Greater => worse = true,
                Ordering::Equal => {}
            }
        }
        match (better, worse) {
            (false, false) => Relation::Equal,
            (true, false) => Relation::FirstDominates,
            (false, true) => Relation::SecondDominates,
            (true, true) => Relation::Incomparable,
        }
    }
}

/// Orders lives with `Infinite` above every finite value.
pub fn compare_life(a: Life, b: Life) -> Ordering {
    match (a, b) {
        (Life::Infinite, Life::Infinite) => Ordering::Equal,
        (Life::Infinite, _) => Ordering::Greater,
        (_, Life::Infinite) => Ordering::Less,
        (Life::Finite(x), Life::Finite(y)) => x.total_cmp(&y),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    /// Per grid time: `Less` when design 1 has the smaller failure
    /// probability.
    pub fixed_time: Vec<Relation>,
    /// Ordering of the CDFs over the whole grid.
    pub stochastic: Relation,
    /// Ordering of the hazard rates over the grid.
    pub hazard: Relation,
    /// Ordering implied by the Weibull scales (larger scale dominates).
    pub scale: Relation,
    /// Ordering implied by the objectives (smaller objective dominates).
    pub objective: Relation,
    /// Whether every ordering agrees, as the Weibull family requires.
    pub consistent: bool,
    pub note: Option<String>,
}

/// Compares two designs in the fixed-time, first stochastic order and
/// hazard senses on the grid `times`.
pub fn dominance_compare(r1: &ReliabilityReport, r2: &ReliabilityReport, times: &[f64]) -> Result<DominanceVerdict> {
    if r1.shape != r2.shape {
        return Err(validation(format!(
            "reports have different Weibull shapes ({} vs {})",
            r1.shape, r2.shape
        )));
    }
    let fixed: Vec<Ordering> = times
        .iter()
        .map(|&t| failure_cdf(t, r1).total_cmp(&failure_cdf(t, r2)))
        .collect();
    let fixed_time = fixed.iter().map(|&c| Relation::from_pointwise([c])).collect();
    let stochastic = Relation::from_pointwise(fixed.iter().copied());
    let mut hazards = Vec::with_capacity(times.len());
    for &t in times.iter().filter(|&&t| t > 0.0 || r1.shape >= 1.0) {
        hazards.push(hazard_rate(t, r1)?.total_cmp(&hazard_rate(t, r2)?));
    }
    let hazard = Relation::from_pointwise(hazards);
    let scale = Relation::from_pointwise([compare_life(r2.scale, r1.scale)]);
    let objective = Relation::from_pointwise([r1.objective.total_cmp(&r2.objective)]);
    let consistent = stochastic == hazard && hazard == scale && scale == objective;
    let note = (r1.shape < 1.0).then(|| {
        "m < 1: the equivalence of reliability notions is only established for m ≥ 1, \
         although the Weibull hazard is still ordered by the scale"
            .to_string()
    });
    Ok(DominanceVerdict {
        fixed_time,
        stochastic,
        hazard,
        scale,
        objective,
        consistent,
        note,
    })
}
