//! Penalized derivative-free shape optimization over deformation
//! coefficients.

pub mod nelder_mead;

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elasticity::{solve_elasticity_on, DirichletData, LoadData};
use crate::error::{validation, Result};
use crate::fem::SolverOptions;
use crate::fields::{ScalarField, VectorField};
use crate::geometry::admissible::{basis_norms, check_admissible, AdmissibilityReport};
use crate::geometry::{AdmissibilityOptions, BaselineDesign, BasisField, DeformationMap, Mesh, Shape};
use crate::material::MaterialParams;
use crate::reliability::{objective_j, ObjectiveOptions, ReliabilityReport};
use crate::thermal::{solve_heat_on, RobinData};
use nelder_mead::{NelderMead, NelderMeadOptions};

/// Penalty value for designs that cannot be evaluated at all.
pub const FAILED_PENALTY: f64 = 1e12;

/// Everything needed to evaluate a design.
#[derive(Debug, Clone)]
pub struct Problem {
    pub design: BaselineDesign,
    pub baseline_mesh: Arc<Mesh>,
    pub basis: Arc<Vec<Arc<dyn BasisField>>>,
    /// `‖ψ_j‖` for the coefficient budget.
    pub basis_norms: Vec<f64>,
    pub material: MaterialParams,
    pub robin: RobinData,
    pub loads: LoadData,
    pub objective: ObjectiveOptions,
    pub admissibility: AdmissibilityOptions,
    pub solver: SolverOptions,
}

impl Problem {
    /// Estimates the basis norms once; they do not depend on the design
    /// variables.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        design: BaselineDesign,
        baseline_mesh: Arc<Mesh>,
        basis: Vec<Arc<dyn BasisField>>,
        material: MaterialParams,
        robin: RobinData,
        loads: LoadData,
        objective: ObjectiveOptions,
        admissibility: AdmissibilityOptions,
    ) -> Result<Self> {
        design.validate()?;
        material.validate()?;
        admissibility.validate()?;
        let norms = basis_norms(&basis, &design, &admissibility);
        Ok(Problem {
            design,
            baseline_mesh,
            basis: Arc::new(basis),
            basis_norms: norms,
            material,
            robin,
            loads,
            objective,
            admissibility,
            solver: SolverOptions::default(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn map(&self, theta: &[f64]) -> Result<DeformationMap> {
        DeformationMap::new(theta.to_vec(), self.basis.clone())
    }

    pub fn baseline_volume(&self) -> f64 {
        self.baseline_mesh.total_volume()
    }

    /// Full admissibility check including the norm estimates.
    pub fn admissibility_report(&self, theta: &[f64]) -> Result<AdmissibilityReport> {
        let map = self.map(theta)?;
        Ok(check_admissible(
            &map,
            &self.baseline_mesh,
            &self.design,
            &self.admissibility,
            Some(&self.basis_norms),
        ))
    }
}

/// Temperature, displacement and reliability report on one shape.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub shape: Shape,
    pub temperature: ScalarField,
    pub displacement: VectorField,
    pub report: ReliabilityReport,
}

/// Deform, solve heat, solve elasticity, integrate the objective.
pub fn solve_state(problem: &Problem, theta: &[f64]) -> Result<StateSolution> {
    let map = problem.map(theta)?;
    let shape = Shape::new(problem.design.clone(), map, problem.baseline_mesh.clone())?;
    let temperature = solve_heat_on(shape.mesh.clone(), &problem.robin, &problem.solver)?;
    let (displacement, _) = solve_elasticity_on(
        shape.mesh.clone(),
        &problem.loads,
        &temperature,
        &problem.material,
        &DirichletData::Clamped,
        &problem.solver,
    )?;
    let report = objective_j(&displacement, &temperature, &problem.material, &problem.objective)?;
    Ok(StateSolution {
        shape,
        temperature,
        displacement,
        report,
    })
}

/// Constraint measures of a design, without solving anything.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub min_det: f64,
    pub volume: f64,
    /// `(V − V_b)/V_b`.
    pub volume_deviation: f64,
    /// `Σ |θ_j| ‖ψ_j‖`.
    pub budget: f64,
    /// Estimated norm of `Φ`.
    pub map_norm: f64,
    /// Estimated norm of `Φ⁻¹`; infinite when the inverse is unavailable.
    pub inverse_norm: f64,
    /// All admissibility checks passed.
    pub admissible: bool,
}

impl Constraints {
    /// The quantity held below `K`: the largest of the budget and the two
    /// norm estimates.
    pub fn norm_measure(&self) -> f64 {
        self.budget.max(self.map_norm).max(self.inverse_norm)
    }
}

pub fn constraints(problem: &Problem, map: &DeformationMap) -> Constraints {
    let vb = problem.baseline_volume();
    let r = check_admissible(
        map,
        &problem.baseline_mesh,
        &problem.design,
        &problem.admissibility,
        Some(&problem.basis_norms),
    );
    Constraints {
        min_det: r.min_det,
        volume: r.volume,
        volume_deviation: (r.volume - vb) / vb,
        budget: r.budget,
        map_norm: r.map_norm.total(),
        inverse_norm: r.inverse_norm.as_ref().map_or(f64::INFINITY, |n| n.total()),
        admissible: r.passed,
    }
}

/// Penalty weights and the objective normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub volume: f64,
    pub det: f64,
    /// Weight of `max(0, measure/K − 1)²` with the measure from
    /// [`Constraints::norm_measure`].
    pub norm: f64,
    /// The objective enters the penalized value as `J / j_scale`.
    pub j_scale: f64,
}

/// One evaluated design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub theta: Vec<f64>,
    /// `None` when the state problem could not be solved.
    pub j: Option<f64>,
    pub penalized: f64,
    pub volume_penalty: f64,
    pub det_penalty: f64,
    pub norm_penalty: f64,
    pub constraints: Option<Constraints>,
    pub feasible: bool,
    pub message: Option<String>,
}

impl Evaluation {
    fn failed(theta: &[f64], constraints: Option<Constraints>, message: String) -> Self {
        Evaluation {
            theta: theta.to_vec(),
            j: None,
            penalized: FAILED_PENALTY,
            volume_penalty: 0.0,
            det_penalty: 0.0,
            norm_penalty: 0.0,
            constraints,
            feasible: false,
            message: Some(message),
        }
    }
}

/// Evaluates the penalized objective. Never fails: designs that fold the
/// mesh or break a solver get [`FAILED_PENALTY`] and `feasible = false`.
pub fn evaluate_design(theta: &[f64], problem: &Problem, penalty: &Penalty) -> Evaluation {
    let map = match problem.map(theta) {
        Ok(m) => m,
        Err(e) => return Evaluation::failed(theta, None, e.to_string()),
    };
    let c = constraints(problem, &map);
    let opts = &problem.admissibility;
    let volume_penalty = penalty.volume * c.volume_deviation.powi(2);
    let det_penalty = penalty.det * (opts.det_floor - c.min_det).max(0.0).powi(2);
    // an unavailable inverse counts as a fold below, not as a norm excess
    let measure = if c.inverse_norm.is_finite() { c.norm_measure() } else { c.budget.max(c.map_norm) };
    let norm_penalty = penalty.norm * (measure / opts.norm_bound - 1.0).max(0.0).powi(2);
    if !(c.min_det > 0.0) || !c.inverse_norm.is_finite() {
        let mut e = Evaluation::failed(theta, Some(c), format!("map folds (min det {:.3e})", c.min_det));
        e.penalized += volume_penalty + det_penalty + norm_penalty;
        return e;
    }
    let j = match solve_state(problem, theta) {
        Ok(s) => s.report.objective,
        Err(e) => return Evaluation::failed(theta, Some(c), e.to_string()),
    };
    let feasible = c.admissible && j.is_finite();
    Evaluation {
        theta: theta.to_vec(),
        j: Some(j),
        penalized: j / penalty.j_scale + volume_penalty + det_penalty + norm_penalty,
        volume_penalty,
        det_penalty,
        norm_penalty,
        constraints: Some(c),
        feasible,
        message: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationConfig {
    /// Starting coefficients; empty means the baseline.
    pub initial: Vec<f64>,
    /// Initial simplex edge length.
    pub step: f64,
    /// Evaluations after the starting point, shared by all restarts.
    pub max_evals: usize,
    pub volume_weight: f64,
    pub det_weight: f64,
    pub norm_weight: f64,
    /// Stop a run when the simplex values spread less than this (in units
    /// of the normalized objective).
    pub f_tol: f64,
    /// Stop a run when the simplex diameter falls below this.
    pub x_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Normalization of `J` in the penalized objective; defaults to the
    /// baseline objective.
    pub j_scale: Option<f64>,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            initial: Vec::new(),
            step: 0.02,
            max_evals: 200,
            volume_weight: 1e6,
            det_weight: 1e4,
            norm_weight: 1e4,
            f_tol: 1e-6,
            x_tol: 1e-5,
            restarts: 3,
            seed: 0,
            j_scale: None,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("step", self.step),
            ("volume_weight", self.volume_weight),
            ("det_weight", self.det_weight),
            ("norm_weight", self.norm_weight),
            ("f_tol", self.f_tol),
            ("x_tol", self.x_tol),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(validation(format!("optimizer.{name} must be positive, got {v}")));
            }
        }
        if let Some(s) = self.j_scale {
            if !(s > 0.0) || !s.is_finite() {
                return Err(validation(format!("optimizer.j_scale must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub eval: usize,
    pub restart: usize,
    pub evaluation: Evaluation,
    /// Best feasible `J` up to and including this row.
    pub incumbent_j: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub entries: Vec<TraceEntry>,
    pub baseline_j: f64,
    pub penalty: Penalty,
    /// Best feasible design.
    pub incumbent: Evaluation,
    /// False when the run stopped early on request.
    pub completed: bool,
}

impl OptimizationTrace {
    fn push(&mut self, restart: usize, e: Evaluation) {
        if e.feasible && e.j.is_some() && e.j < self.incumbent.j {
            self.incumbent = e.clone();
        }
        self.entries.push(TraceEntry {
            eval: self.entries.len(),
            restart,
            evaluation: e,
            incumbent_j: self.incumbent.j,
        });
    }

    /// `eval,restart,j,penalized,volume_deviation,min_det,budget,norm_measure,feasible,incumbent_j,theta_0,...`
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let n = self.incumbent.theta.len();
        let mut out = String::from("eval,restart,j,penalized,volume_deviation,min_det,budget,norm_measure,feasible,incumbent_j");
        for i in 0..n {
            let _ = write!(out, ",theta_{i}");
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_else(|| "nan".into());
        for r in &self.entries {
            let e = &r.evaluation;
            let c = e.constraints;
            let _ = write!(
                out,
                "{},{},{},{:?},{},{},{},{},{},{}",
                r.eval,
                r.restart,
                opt(e.j),
                e.penalized,
                opt(c.map(|c| c.volume_deviation)),
                opt(c.map(|c| c.min_det)),
                opt(c.map(|c| c.budget)),
                opt(c.map(|c| c.norm_measure())),
                e.feasible,
                opt(r.incumbent_j)
            );
            for t in &e.theta {
                let _ = write!(out, ",{t:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Resumable optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: OptimizationConfig,
    pub trace: OptimizationTrace,
    /// Index of the current run (0 is the initial point, later runs are
    /// restarts).
    pub run: usize,
    pub simplex: Option<NelderMead>,
    /// Evaluations spent before the current run started.
    pub spent_before_run: usize,
}

/// Checkpointing and interruption controls.
#[derive(Debug, Clone, Default)]
pub struct RunControl {
    /// Written after every simplex iteration.
    pub checkpoint: Option<PathBuf>,
    /// Return after this many trace rows, leaving a checkpoint behind.
    pub stop_after: Option<usize>,
}

fn evaluate_batch(problem: &Problem, penalty: &Penalty, points: &[Vec<f64>]) -> Vec<Evaluation> {
    points.par_iter().map(|p| evaluate_design(p, problem, penalty)).collect()
}

/// Starting point of restart `run`: the incumbent moved by a uniform
/// perturbation of size `step` in every coordinate.
fn restart_point(cfg: &OptimizationConfig, incumbent: &[f64], run: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(run as u64);
    incumbent
        .iter()
        .map(|t| t + cfg.step * rng.random_range(-1.0..1.0))
        .collect()
}

/// Nelder-Mead with restarts on the penalized objective.
pub fn optimize_shape(cfg: &OptimizationConfig, problem: &Problem) -> Result<OptimizationTrace> {
    optimize_with(cfg, problem, &RunControl::default())
}

/// [`optimize_shape`] with checkpointing; resumes from `control.checkpoint`
/// when that file exists and holds the same configuration.
pub fn optimize_with(cfg: &OptimizationConfig, problem: &Problem, control: &RunControl) -> Result<OptimizationTrace> {
    cfg.validate()?;
    let n = problem.dimension();
    let initial = if cfg.initial.is_empty() { vec![0.0; n] } else { cfg.initial.clone() };
    if initial.len() != n {
        return Err(validation(format!("optimizer.initial has {} entries, basis has {n}", initial.len())));
    }

    let mut state = match control.checkpoint.as_ref().filter(|p| p.exists()) {
        Some(path) => {
            let cp: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            if cp.config != *cfg {
                return Err(validation(format!(
                    "checkpoint {} was written for a different optimizer configuration",
                    path.display()
                )));
            }
            cp
        }
        None => start(cfg, problem, &initial)?,
    };

    let nm_opts = NelderMeadOptions {
        step: cfg.step,
        max_evals: cfg.max_evals,
        f_tol: cfg.f_tol,
        x_tol: cfg.x_tol,
    };
    let runs = cfg.restarts + 1;
    let stop = |s: &Checkpoint| control.stop_after.is_some_and(|k| s.trace.entries.len() >= k);

    while state.run < runs {
        let spent = state.trace.entries.len() - 1;
        if spent >= cfg.max_evals {
            break;
        }
        // the remaining budget is shared by the remaining runs
        let share = (cfg.max_evals - state.spent_before_run) / (runs - state.run);
        let run_limit = state.spent_before_run + share.max(1);
        if state.simplex.is_none() {
            let x0 = if state.run == 0 {
                initial.clone()
            } else {
                restart_point(cfg, &state.trace.incumbent.theta, state.run)
            };
            let mut nm = simplex_start(&mut state, problem, &x0, cfg.step);
            nm.evals = state.trace.entries.len() - 1;
            state.simplex = Some(nm);
            save(control, &state)?;
            if stop(&state) {
                state.trace.completed = false;
                return Ok(state.trace);
            }
        }
        let mut nm = state.simplex.take().unwrap_or_else(|| unreachable!());
        let mut finished = false;
        while !finished {
            if nm.evals >= run_limit.min(cfg.max_evals) || nm.converged(&nm_opts) {
                finished = true;
                continue;
            }
            let run = state.run;
            let trace = &mut state.trace;
            let penalty = trace.penalty;
            nm.iterate(&mut |pts: &[Vec<f64>]| {
                let evals = evaluate_batch(problem, &penalty, pts);
                let values: Vec<f64> = evals.iter().map(|e| e.penalized).collect();
                for e in evals {
                    trace.push(run, e);
                }
                values
            });
            state.simplex = Some(nm.clone());
            save(control, &state)?;
            if stop(&state) {
                state.trace.completed = false;
                return Ok(state.trace);
            }
        }
        state.simplex = None;
        state.run += 1;
        state.spent_before_run = state.trace.entries.len() - 1;
        save(control, &state)?;
    }
    state.trace.completed = true;
    Ok(state.trace)
}

fn start(cfg: &OptimizationConfig, problem: &Problem, initial: &[f64]) -> Result<Checkpoint> {
    // a provisional scale; the baseline objective replaces it below
    let mut penalty = Penalty {
        volume: cfg.volume_weight,
        det: cfg.det_weight,
        norm: cfg.norm_weight,
        j_scale: 1.0,
    };
    let baseline = solve_state(problem, &vec![0.0; problem.dimension()])?;
    let baseline_j = baseline.report.objective;
    penalty.j_scale = cfg.j_scale.unwrap_or(if baseline_j > 0.0 { baseline_j } else { 1.0 });
    let first = evaluate_design(initial, problem, &penalty);
    if !first.feasible {
        return Err(validation(format!(
            "initial design is infeasible: {}",
            first.message.clone().unwrap_or_else(|| format!("{:?}", first.constraints))
        )));
    }
    let mut trace = OptimizationTrace {
        entries: Vec::new(),
        baseline_j,
        penalty,
        incumbent: first.clone(),
        completed: false,
    };
    trace.push(0, first);
    Ok(Checkpoint {
        config: cfg.clone(),
        trace,
        run: 0,
        simplex: None,
        spent_before_run: 0,
    })
}

fn simplex_start(state: &mut Checkpoint, problem: &Problem, x0: &[f64], step: f64) -> NelderMead {
    let run = state.run;
    let trace = &mut state.trace;
    let penalty = trace.penalty;
    let first = trace.entries[0].evaluation.penalized;
    let mut eval = |pts: &[Vec<f64>]| {
        let evals = evaluate_batch(problem, &penalty, pts);
        let values: Vec<f64> = evals.iter().map(|e| e.penalized).collect();
        for e in evals {
            trace.push(run, e);
        }
        values
    };
    let f0 = if run == 0 {
        first
    } else {
        eval(&[x0.to_vec()])[0]
    };
    NelderMead::start(x0, f0, step, &mut eval)
}

fn save(control: &RunControl, state: &Checkpoint) -> Result<()> {
    if let Some(path) = &control.checkpoint {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_string(state)?)?;
        std::fs::rename(tmp, path)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarSource;
    use crate::geometry::{build_baseline, fourier_bump_basis};

    fn small_problem() -> Problem {
        let design = BaselineDesign::annulus(1.0, 0.3, 1.5);
        let mesh = Arc::new(build_baseline(&design, 0.2).unwrap());
        let basis = fourier_bump_basis(&design, 2);
        let mut p = MaterialParams::example_steel();
        p.fatigue_floor = None;
        let robin = RobinData::new(
            ScalarSource::constant(1000.0),
            ScalarSource::new(|x, _| 400.0 + 300.0 * x[0]),
            p.conductivity,
        );
        Problem::new(
            design,
            mesh,
            basis,
            p,
            robin,
            LoadData::none(),
            ObjectiveOptions::default(),
            AdmissibilityOptions {
                norm_bound: 1e4,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn unit_penalty() -> Penalty {
        Penalty {
            volume: 1e6,
            det: 1e4,
            norm: 1e4,
            j_scale: 1.0,
        }
    }

    #[test]
    fn baseline_evaluation_is_reproducible() {
        let pr = small_problem();
        let a = evaluate_design(&[0.0; 4], &pr, &unit_penalty());
        let b = evaluate_design(&[0.0; 4], &pr, &unit_penalty());
        assert!(a.feasible);
        assert!(a.j.unwrap() > 0.0);
        assert_eq!(a.j.unwrap().to_bits(), b.j.unwrap().to_bits());
        let batch = evaluate_batch(&pr, &unit_penalty(), &[vec![0.01, 0.0, 0.0, 0.0], vec![0.0; 4]]);
        assert_eq!(batch[1], a);
    }

    #[test]
    fn folding_design_gets_finite_penalty() {
        let pr = small_problem();
        let e = evaluate_design(&[0.0, 0.0, -5.0, 0.0], &pr, &unit_penalty());
        assert!(!e.feasible);
        assert!(e.j.is_none());
        assert!(e.penalized.is_finite() && e.penalized >= FAILED_PENALTY);
    }

    #[test]
    fn objective_is_continuous_along_directions() {
        let pr = small_problem();
        let j0 = evaluate_design(&[0.0; 4], &pr, &unit_penalty()).j.unwrap();
        for dir in [[1.0, 0.0, 0.0, 0.0], [0.0, 0.6, 0.0, 0.8], [0.5, -0.5, 0.5, 0.5]] {
            let diffs: Vec<f64> = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|d| {
                    let th: Vec<f64> = dir.iter().map(|v| v * d).collect();
                    (evaluate_design(&th, &pr, &unit_penalty()).j.unwrap() - j0).abs()
                })
                .collect();
            assert!(diffs[2] < diffs[0] && diffs[2] < 1e-2 * j0, "{diffs:?}");
        }
    }

    #[test]
    fn zero_budget_returns_baseline() {
        let pr = small_problem();
        let cfg = OptimizationConfig {
            max_evals: 0,
            ..Default::default()
        };
        let tr = optimize_shape(&cfg, &pr).unwrap();
        assert_eq!(tr.entries.len(), 1);
        assert_eq!(tr.incumbent.theta, vec![0.0; 4]);
        assert_eq!(tr.incumbent.j, Some(tr.baseline_j));
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let pr = small_problem();
        let cfg = OptimizationConfig {
            initial: vec![0.0, 0.0, 0.3, 0.0],
            ..Default::default()
        };
        assert!(optimize_shape(&cfg, &pr).is_err());
    }

    #[test]
    fn incumbent_never_increases_and_resume_matches() {
        let pr = small_problem();
        let cfg = OptimizationConfig {
            max_evals: 30,
            restarts: 1,
            ..Default::default()
        };
        let full = optimize_shape(&cfg, &pr).unwrap();
        let js: Vec<f64> = full.entries.iter().filter_map(|e| e.incumbent_j).collect();
        assert!(js.windows(2).all(|w| w[1] <= w[0]));
        assert!(full.incumbent.j.unwrap() <= full.baseline_j);

        let dir = tempfile::tempdir().unwrap();
        let control = RunControl {
            checkpoint: Some(dir.path().join("cp.json")),
            stop_after: Some(12),
        };
        let part = optimize_with(&cfg, &pr, &control).unwrap();
        assert!(!part.completed);
        let resumed = optimize_with(
            &cfg,
            &pr,
            &RunControl {
                stop_after: None,
                ..control
            },
        )
        .unwrap();
        assert_eq!(resumed, full);
    }
}
