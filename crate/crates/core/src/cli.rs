//! Command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::LoadedConfig;
use crate::diagnose::{rows_to_csv, run_suite};
use crate::elasticity::stress;
use crate::error::{Error, Result};
use crate::geometry::{apply_deformation, Mesh};
use crate::material::{Life, MaterialParams};
use crate::optimize::{optimize_with, solve_state, RunControl, StateSolution};
use crate::reliability::{failure_cdf, ks_distance, mean_life, replicate, ReliabilityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "thermofatigue", version, about = "Thermomechanical LCF reliability and shape optimization")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "THERMOFATIGUE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed of the command's random stream.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve heat and elasticity once and write the reliability report.
    Solve(Common),
    /// Sample the crack-initiation process and compare with the Weibull CDF.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Optimize the shape; resumes from `checkpoint.json` in the output
    /// directory when present.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Ignore an existing checkpoint.
        #[arg(long)]
        fresh: bool,
        /// Stop after this many evaluations, leaving a checkpoint.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Maximum principle, sup norms and Hölder estimates over random shapes.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        shapes: Option<usize>,
    },
    /// Write the baseline mesh and, for non-zero `optimizer.initial`, the
    /// deformed mesh.
    MeshExport(Common),
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Validation(_) | Error::Expression { .. } => EXIT_CONFIG,
        Error::Admissibility(_) | Error::Numerical(_) | Error::Io(_) | Error::Json(_) => EXIT_NUMERICAL,
    }
}

fn dispatch(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Solve(c) => cmd_solve(c),
        Command::Sample {
            common,
            t_max,
            replications,
        } => cmd_sample(common, *t_max, *replications),
        Command::Optimize {
            common,
            fresh,
            stop_after,
        } => cmd_optimize(common, *fresh, *stop_after),
        Command::Diagnose { common, shapes } => cmd_diagnose(common, *shapes),
        Command::MeshExport(c) => cmd_mesh_export(c),
    }
}

/// Writes artifacts into one directory honouring the configured formats.
struct Output {
    dir: PathBuf,
    json: bool,
    csv: bool,
    gnuplot: bool,
}

impl Output {
    fn new(cfg: &LoadedConfig, over: &Option<PathBuf>) -> Result<Self> {
        let dir = over.clone().unwrap_or_else(|| cfg.output_dir());
        std::fs::create_dir_all(&dir)?;
        let o = &cfg.config.output;
        Ok(Output {
            dir,
            json: o.json(),
            csv: o.csv(),
            gnuplot: o.gnuplot,
        })
    }

    fn write(&self, name: &str, content: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), content)?;
        Ok(())
    }

    fn json(&self, name: &str, content: impl FnOnce() -> Result<String>) -> Result<()> {
        if self.json {
            self.write(name, &content()?)?;
        }
        Ok(())
    }

    fn csv(&self, name: &str, content: impl FnOnce() -> String) -> Result<()> {
        if self.csv {
            self.write(name, &content())?;
        }
        Ok(())
    }

    fn mesh(&self, prefix: &str, mesh: &Mesh) -> Result<()> {
        self.write(&format!("{prefix}mesh.txt"), &mesh.to_text())?;
        self.json(&format!("{prefix}mesh.json"), || mesh.to_json())
    }

    /// Mesh, fields, stress and report of one state.
    fn state(&self, prefix: &str, s: &StateSolution, p: &MaterialParams, times: &[f64]) -> Result<()> {
        self.mesh(prefix, &s.shape.mesh)?;
        let sigma = stress(&s.displacement, &s.temperature, p);
        self.csv(&format!("{prefix}temperature.csv"), || s.temperature.to_csv("T"))?;
        self.csv(&format!("{prefix}displacement.csv"), || s.displacement.to_csv("u"))?;
        self.csv(&format!("{prefix}stress.csv"), || sigma.to_csv())?;
        self.json(&format!("{prefix}temperature.json"), || s.temperature.to_json("T"))?;
        self.json(&format!("{prefix}displacement.json"), || s.displacement.to_json("u"))?;
        self.json(&format!("{prefix}stress.json"), || sigma.to_json())?;
        self.write(&format!("{prefix}report.json"), &s.report.to_json(times)?)?;
        self.csv(&format!("{prefix}cdf.csv"), || cdf_csv(&s.report, times))?;
        if self.gnuplot && self.csv {
            self.write(
                &format!("{prefix}cdf.gp"),
                &format!(
                    "set datafile separator ','\nset xlabel 'load cycles'\nset ylabel 'F(t)'\n\
                     plot '{prefix}cdf.csv' using 1:2 skip 1 with linespoints title 'failure CDF'\n"
                ),
            )?;
        }
        Ok(())
    }
}

fn cdf_csv(r: &ReliabilityReport, times: &[f64]) -> String {
    let mut s = String::from("t,cdf,hazard\n");
    for &t in times {
        let h = crate::reliability::hazard_rate(t, r).map(|h| format!("{h:?}")).unwrap_or_else(|_| "nan".into());
        let _ = writeln!(s, "{t:?},{:?},{h}", failure_cdf(t, r));
    }
    s
}

/// Configured times, or twenty points over `(0, 3N]`; empty when `N` is
/// infinite and nothing is configured.
fn report_times(cfg: &LoadedConfig, r: &ReliabilityReport) -> Vec<f64> {
    if !cfg.config.reliability.times.is_empty() {
        return cfg.config.reliability.times.clone();
    }
    match r.scale {
        Life::Finite(n) => (1..=20).map(|i| 3.0 * n * i as f64 / 20.0).collect(),
        Life::Infinite => Vec::new(),
    }
}

fn design_theta(cfg: &LoadedConfig, n: usize) -> Vec<f64> {
    let init = &cfg.config.optimizer.initial;
    if init.is_empty() {
        vec![0.0; n]
    } else {
        init.clone()
    }
}

fn print_report(r: &ReliabilityReport, times: &[f64]) -> Result<()> {
    println!("J        = {:e}", r.objective);
    println!("N_scale  = {}", r.scale);
    println!("m        = {}", r.shape);
    println!("mean     = {}", mean_life(r)?);
    if !times.is_empty() {
        println!("{:>14}  {:>12}", "t", "F(t)");
        for &t in times {
            println!("{t:>14.6e}  {:>12.6e}", failure_cdf(t, r));
        }
    }
    Ok(())
}

pub fn cmd_solve(c: &Common) -> Result<i32> {
    let cfg = LoadedConfig::load(&c.config)?;
    let problem = cfg.problem()?;
    let out = Output::new(&cfg, &c.out)?;
    let state = solve_state(&problem, &design_theta(&cfg, problem.dimension()))?;
    let times = report_times(&cfg, &state.report);
    out.state("", &state, &problem.material, &times)?;
    print_report(&state.report, &times)?;
    println!("wrote {}", out.dir.display());
    Ok(EXIT_OK)
}

pub fn cmd_sample(c: &Common, t_max: Option<f64>, replications: Option<usize>) -> Result<i32> {
    let cfg = LoadedConfig::load(&c.config)?;
    let rc = &cfg.config.reliability;
    let problem = cfg.problem()?;
    let out = Output::new(&cfg, &c.out)?;
    let state = solve_state(&problem, &design_theta(&cfg, problem.dimension()))?;
    let r = &state.report;
    let t_max = match t_max.or(rc.t_max) {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::Config(format!("--t-max must be positive and finite, got {t}"))),
        None => match r.scale {
            Life::Finite(n) => 2.0 * n,
            Life::Infinite => {
                return Err(Error::Config("N_scale is infinite; give --t-max or reliability.t_max".into()))
            }
        },
    };
    let n = replications.unwrap_or(rc.replications);
    let seed = c.seed.unwrap_or(rc.seed);
    let sets = replicate(r, &state.shape.mesh, t_max, n, seed)?;
    let dim = state.shape.mesh.dim;

    let mut tau = String::from("replication,tau,events\n");
    let mut events = String::from(if dim == 2 {
        "replication,time,x,y,facet\n"
    } else {
        "replication,time,x,y,z,facet\n"
    });
    for (i, s) in sets.iter().enumerate() {
        let t = s.tau.map(|t| format!("{t:?}")).unwrap_or_else(|| "inf".into());
        let _ = writeln!(tau, "{i},{t},{}", s.events.len());
        for line in s.to_csv(dim).lines().skip(1) {
            let _ = writeln!(events, "{i},{line}");
        }
    }
    out.write("tau.csv", &tau)?;
    out.write("events.csv", &events)?;

    println!("J = {:e}, N_scale = {}, t_max = {t_max:e}, replications = {n}, seed = {seed}", r.objective, r.scale);
    if n > 0 {
        let expected = t_max.powf(r.shape) * r.objective;
        let counts: Vec<f64> = sets.iter().map(|s| s.events.len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let se = (expected / n as f64).sqrt();
        println!("event count: mean {mean:.6} expected {expected:.6} (standard error {se:.3e})");
        let ks = ks_distance(&sets, t_max, |t| failure_cdf(t, r));
        let mut taus: Vec<f64> = sets.iter().filter_map(|s| s.tau).collect();
        taus.sort_by(f64::total_cmp);
        let mut table = String::from("t,empirical,analytic\n");
        println!("{:>14}  {:>10}  {:>10}", "t", "empirical", "analytic");
        for k in 1..=10 {
            let t = t_max * k as f64 / 10.0;
            let emp = taus.partition_point(|&x| x <= t) as f64 / n as f64;
            let ana = failure_cdf(t, r);
            println!("{t:>14.6e}  {emp:>10.4}  {ana:>10.4}");
            let _ = writeln!(table, "{t:?},{emp:?},{ana:?}");
        }
        println!("KS distance = {ks:.5}");
        out.csv("tau_cdf.csv", || table)?;
        if out.gnuplot && out.csv {
            out.write(
                "tau_cdf.gp",
                "set datafile separator ','\nset xlabel 't'\nset ylabel 'P(tau <= t)'\n\
                 plot 'tau_cdf.csv' using 1:2 skip 1 with steps title 'empirical', \
                 '' using 1:3 skip 1 with lines title 'Weibull'\n",
            )?;
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_optimize(c: &Common, fresh: bool, stop_after: Option<usize>) -> Result<i32> {
    let cfg = LoadedConfig::load(&c.config)?;
    let problem = cfg.problem()?;
    let out = Output::new(&cfg, &c.out)?;
    let mut oc = cfg.config.optimizer.clone();
    if let Some(s) = c.seed {
        oc.seed = s;
    }
    let checkpoint = out.dir.join("checkpoint.json");
    if fresh && checkpoint.exists() {
        std::fs::remove_file(&checkpoint)?;
    }
    let control = RunControl {
        checkpoint: Some(checkpoint.clone()),
        stop_after,
    };
    let trace = optimize_with(&oc, &problem, &control)?;
    out.csv("trace.csv", || trace.to_csv())?;
    out.json("trace.json", || trace.to_json())?;
    if !trace.completed {
        println!(
            "stopped after {} evaluations; rerun to resume from {}",
            trace.entries.len(),
            checkpoint.display()
        );
        return Ok(EXIT_OK);
    }
    let inc = &trace.incumbent;
    let state = solve_state(&problem, &inc.theta)?;
    let times = report_times(&cfg, &state.report);
    out.state("incumbent_", &state, &problem.material, &times)?;
    let adm = problem.admissibility_report(&inc.theta)?;
    out.write("incumbent_admissibility.json", &serde_json::to_string_pretty(&adm)?)?;
    if out.gnuplot && out.csv {
        out.write(
            "trace.gp",
            "set datafile separator ','\nset xlabel 'evaluation'\nset ylabel 'J'\nset logscale y\n\
             plot 'trace.csv' using 1:10 skip 1 with steps title 'incumbent', \
             '' using 1:3 skip 1 with points title 'evaluated'\n",
        )?;
    }
    let j = inc.j.unwrap_or(f64::NAN);
    let dv = inc.constraints.map(|c| c.volume_deviation).unwrap_or(f64::NAN);
    println!("evaluations      {}", trace.entries.len());
    println!("baseline J       {:e}", trace.baseline_j);
    println!("incumbent J      {j:e}");
    println!("J reduction      {:.2}%", 100.0 * (1.0 - j / trace.baseline_j));
    println!("volume deviation {dv:.3e}");
    println!("admissible       {}", adm.passed);
    println!("theta            {:?}", inc.theta);
    Ok(EXIT_OK)
}

pub fn cmd_diagnose(c: &Common, shapes: Option<usize>) -> Result<i32> {
    let cfg = LoadedConfig::load(&c.config)?;
    let problem = cfg.problem()?;
    let out = Output::new(&cfg, &c.out)?;
    let mut opts = cfg.config.diagnose.clone();
    if let Some(s) = shapes {
        opts.shapes = s;
    }
    if let Some(s) = c.seed {
        opts.seed = s;
    }
    let rows = run_suite(&problem, std::slice::from_ref(&cfg.robin), &opts)?;
    out.csv("diagnostics.csv", || rows_to_csv(&rows))?;
    out.json("diagnostics.json", || Ok(serde_json::to_string_pretty(&rows)?))?;
    println!(
        "{:>5} {:>10} {:>9} {:>9} {:>11} {:>11} {:>11} {:>11}",
        "shape", "slack", "max_prin", "sup|T|", "[T]_0", "[T]_1", "[u]_1", "[u]_2"
    );
    for r in &rows {
        println!(
            "{:>5} {:>10.3e} {:>9} {:>9} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e}",
            r.shape,
            r.bounds.slack_used,
            r.bounds.passed,
            r.sup_bound_ok,
            r.t_holder[0],
            r.t_holder[1],
            r.u_holder[1],
            r.u_holder[2]
        );
    }
    let failed = rows.iter().filter(|r| !r.bounds.passed).count();
    let sup_failed = rows.iter().filter(|r| !r.sup_bound_ok).count();
    let infinite = rows.iter().filter(|r| !r.estimates_finite()).count();
    println!(
        "{} rows: {failed} maximum-principle failures, {sup_failed} sup-bound failures, {infinite} non-finite estimates",
        rows.len()
    );
    Ok(if failed + infinite > 0 { EXIT_NUMERICAL } else { EXIT_OK })
}

pub fn cmd_mesh_export(c: &Common) -> Result<i32> {
    let cfg = LoadedConfig::load(&c.config)?;
    let problem = cfg.problem()?;
    let out = Output::new(&cfg, &c.out)?;
    out.mesh("", &problem.baseline_mesh)?;
    let theta = design_theta(&cfg, problem.dimension());
    let mut deformed = None;
    if theta.iter().any(|&t| t != 0.0) {
        let mesh = apply_deformation(&problem.map(&theta)?, &problem.baseline_mesh)?;
        out.mesh("deformed_", &mesh)?;
        deformed = Some(mesh);
    }
    let m = &problem.baseline_mesh;
    println!(
        "baseline: {} nodes, {} cells, {} boundary facets, volume {:.6}",
        m.num_nodes(),
        m.num_cells(),
        m.facets.len(),
        m.total_volume()
    );
    if let Some(d) = deformed {
        println!("deformed: volume {:.6}", d.total_volume());
    }
    Ok(EXIT_OK)
}
