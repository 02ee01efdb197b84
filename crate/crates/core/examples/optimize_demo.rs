//! Shape optimization of the demo annulus: minimize the crack objective at
//! fixed volume and print the trace summary.

use std::path::PathBuf;
use std::time::Instant;

use thermofatigue::config::LoadedConfig;
use thermofatigue::optimize::optimize_shape;

fn main() -> thermofatigue::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let cfg = LoadedConfig::load(&path)?;
    let problem = cfg.problem()?;
    let mut opt = cfg.config.optimizer.clone();
    // a shorter budget than the config; pass a number to override
    opt.max_evals = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60);

    let start = Instant::now();
    let trace = optimize_shape(&opt, &problem)?;
    let inc = &trace.incumbent;
    let j = inc.j.unwrap_or(f64::NAN);
    for e in trace.entries.iter().filter(|e| e.eval % 10 == 0) {
        println!("eval {:>4}  restart {}  incumbent J {:.6e}", e.eval, e.restart, e.incumbent_j.unwrap_or(f64::NAN));
    }
    println!("baseline J   {:.6e}", trace.baseline_j);
    println!("incumbent J  {j:.6e} ({:.2}% lower)", 100.0 * (1.0 - j / trace.baseline_j));
    if let Some(c) = &inc.constraints {
        println!("|ΔV|/V       {:.2e}", c.volume_deviation.abs());
        println!("min det      {:.4}", c.min_det);
    }
    println!("θ            {:?}", inc.theta);
    println!("evaluations  {} in {:.1}s", trace.entries.len(), start.elapsed().as_secs_f64());
    Ok(())
}
