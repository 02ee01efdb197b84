//! Deform the annulus with a few coefficient vectors and report volume,
//! Jacobian and norm checks.

use std::path::PathBuf;

use thermofatigue::config::LoadedConfig;

fn main() -> thermofatigue::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let cfg = LoadedConfig::load(&path)?;
    let problem = cfg.problem()?;
    let n = problem.dimension();
    println!("basis size {n}, baseline volume {:.6}", problem.baseline_volume());
    println!("basis norms {:.3?}", problem.basis_norms);

    let mut designs = vec![vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    designs[1][0] = 0.05;
    designs[2][2] = -3.0;
    for theta in &designs {
        let rep = problem.admissibility_report(theta)?;
        println!(
            "θ = {theta:?}\n  min det {:.4}, ΔV/V {:+.3e}, map norm {:.3e}, passed {}",
            rep.min_det,
            rep.volume_deviation,
            rep.map_norm.total(),
            rep.passed
        );
        for r in &rep.messages {
            println!("  - {r}");
        }
    }
    Ok(())
}
