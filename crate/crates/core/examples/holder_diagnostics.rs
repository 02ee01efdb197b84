//! Run a small uniformity suite: random admissible shapes under two ambient
//! fields, with maximum-principle and Hölder estimates per row.

use std::path::PathBuf;

use thermofatigue::config::LoadedConfig;
use thermofatigue::diagnose::{run_suite, DiagnoseOptions};
use thermofatigue::expr::ScalarSource;
use thermofatigue::thermal::RobinData;

fn main() -> thermofatigue::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let cfg = LoadedConfig::load(&path)?;
    let problem = cfg.problem()?;
    let wavy = RobinData::new(
        cfg.robin.eta.clone(),
        ScalarSource::parse("400 + 150 * sin(3 * x) * cos(2 * y)")?,
        cfg.config.material.conductivity,
    );
    let opts = DiagnoseOptions {
        shapes: 6,
        seed: 1,
        ..Default::default()
    };
    let rows = run_suite(&problem, &[cfg.robin.clone(), wavy], &opts)?;
    println!("shape ambient  min T    max T  [T]_1      [T]_2      [u]_2      bounds");
    for r in &rows {
        println!(
            "{:>5} {:>7} {:>7.2} {:>8.2}  {:.3e}  {:.3e}  {:.3e}  {}",
            r.shape, r.ambient, r.bounds.min_t, r.bounds.max_t, r.t_holder[1], r.t_holder[2], r.u_holder[2], r.bounds.passed
        );
    }
    Ok(())
}
