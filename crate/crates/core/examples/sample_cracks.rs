//! Simulate crack initiation on the baseline shape and compare the
//! empirical first-failure distribution with the Weibull CDF.

use std::path::PathBuf;

use thermofatigue::config::LoadedConfig;
use thermofatigue::optimize::solve_state;
use thermofatigue::reliability::{failure_cdf, ks_distance, replicate};

fn main() -> thermofatigue::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let cfg = LoadedConfig::load(&path)?;
    let problem = cfg.problem()?;
    let state = solve_state(&problem, &vec![0.0; problem.dimension()])?;
    let r = &state.report;

    let t_max = 2.0 * r.scale.as_f64();
    let n = 5000;
    let sets = replicate(r, &state.shape.mesh, t_max, n, 42)?;
    let events: usize = sets.iter().map(|s| s.events.len()).sum();
    let censored = sets.iter().filter(|s| s.tau.is_none()).count();
    println!("replications      {n}");
    println!("mean crack count  {:.4} (expected {:.4})", events as f64 / n as f64, t_max.powf(r.shape) * r.objective);
    println!("censored          {censored}");
    println!("KS distance       {:.4}", ks_distance(&sets, t_max, |t| failure_cdf(t, r)));

    // where do the first cracks appear?
    let mut by_tag = std::collections::BTreeMap::new();
    for s in &sets {
        if let Some(e) = s.events.first() {
            let tag = state.shape.mesh.facets[e.facet].tag.as_str();
            *by_tag.entry(tag).or_insert(0usize) += 1;
        }
    }
    for (tag, count) in by_tag {
        println!("first crack on {tag:<8} {count}");
    }
    Ok(())
}
