//! Solve the demo problem on the undeformed annulus and print the
//! reliability summary.

use std::path::PathBuf;

use thermofatigue::config::LoadedConfig;
use thermofatigue::optimize::solve_state;
use thermofatigue::reliability::{failure_cdf, mean_life};

fn main() -> thermofatigue::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let cfg = LoadedConfig::load(&path)?;
    let problem = cfg.problem()?;
    let state = solve_state(&problem, &vec![0.0; problem.dimension()])?;

    let t = &state.temperature.values;
    let (lo, hi) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let r = &state.report;
    println!("nodes            {}", state.shape.mesh.num_nodes());
    println!("temperature      [{lo:.2}, {hi:.2}]");
    println!("max |u|          {:.4e}", state.displacement.max_norm());
    println!("J                {:.6e}", r.objective);
    println!("Weibull scale    {:.2} cycles (shape {})", r.scale.as_f64(), r.shape);
    println!("mean life        {:.2} cycles", mean_life(r)?.as_f64());
    for frac in [0.25, 0.5, 1.0, 2.0] {
        let n = frac * r.scale.as_f64();
        println!("F({n:>9.1})     {:.4}", failure_cdf(n, r));
    }
    Ok(())
}
