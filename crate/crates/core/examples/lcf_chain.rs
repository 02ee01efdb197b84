//! Walk one elastic stress amplitude through Neuber, Ramberg-Osgood and
//! Coffin-Manson-Basquin for the example steel.

use thermofatigue::material::{arrhenius_life, cmb_invert, cmb_strain, neuber_convert, ramberg_osgood, MaterialParams};

fn main() -> thermofatigue::Result<()> {
    let p = MaterialParams::example_steel();
    println!("{:>10} {:>10} {:>12} {:>12} {:>12}", "σ_el", "σ_a", "ε_a", "N", "N(600 K)");
    for sigma_el in [200.0, 400.0, 600.0, 800.0, 1200.0] {
        let sigma = neuber_convert(sigma_el, &p)?;
        let eps = ramberg_osgood(sigma, &p)?;
        let life = cmb_invert(eps, &p)?;
        let hot = arrhenius_life(life, 600.0, &p)?;
        println!(
            "{sigma_el:>10.1} {sigma:>10.2} {eps:>12.4e} {:>12.4e} {:>12.4e}",
            life.as_f64(),
            hot.as_f64()
        );
        if let Some(n) = life.finite() {
            assert!((cmb_strain(n, &p) - eps).abs() <= 1e-9 * eps);
        }
    }
    Ok(())
}
