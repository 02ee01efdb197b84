//! Compare the baseline against a perturbed design with every reliability
//! ordering and check that they agree.

use std::path::PathBuf;

use thermofatigue::config::LoadedConfig;
use thermofatigue::optimize::solve_state;
use thermofatigue::reliability::dominance_compare;

fn main() -> thermofatigue::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    let cfg = LoadedConfig::load(&path)?;
    let problem = cfg.problem()?;
    let n = problem.dimension();

    let base = solve_state(&problem, &vec![0.0; n])?.report;
    let mut theta = vec![0.0; n];
    theta[0] = 0.03;
    let other = solve_state(&problem, &theta)?.report;

    let scale = base.scale.as_f64();
    let times: Vec<f64> = (1..=20).map(|k| 0.1 * k as f64 * scale).collect();
    let v = dominance_compare(&base, &other, &times)?;
    println!("J baseline   {:.6e}", base.objective);
    println!("J perturbed  {:.6e}", other.objective);
    let agree = v.fixed_time.iter().filter(|&&r| r == v.objective).count();
    println!("by CDF       {agree}/{} times agree with the objective", times.len());
    println!("stochastic   {:?}", v.stochastic);
    println!("hazard       {:?}", v.hazard);
    println!("scale        {:?}", v.scale);
    println!("objective    {:?}", v.objective);
    println!("consistent   {}", v.consistent);
    if let Some(note) = v.note {
        println!("note         {note}");
    }
    Ok(())
}
