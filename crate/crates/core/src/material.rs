//! Material constants and the pointwise low-cycle-fatigue life model.
//!
//! The life chain maps a displacement gradient and a temperature to the
//! number of load cycles until a surface crack forms:
//!
//! ```text
//! (∇u, T) → thermoelastic stress → von Mises σ_v → σ_a = σ_v / 2
//!         → Neuber (elastic-plastic amplitude) → Ramberg-Osgood strain
//!         → Coffin-Manson-Basquin cycles → Arrhenius temperature scaling
//! ```
//!
//! Infinite life is represented by [`Life::Infinite`], never by a floating
//! point infinity, so `(1/N)^m` evaluates to an exact zero.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{validation, Result};
use crate::roots::safeguarded_newton;

/// A 3×3 tensor stored row-major. Two-dimensional quantities occupy the
/// upper-left 2×2 block.
pub type Tensor3 = [[f64; 3]; 3];

/// Number of cycles to crack initiation, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Life {
    Finite(f64),
    Infinite,
}

impl Life {
    /// `(1/N)^m` with the convention `1/∞ = 0`.
    #[inline]
    pub fn inverse_pow(self, m: f64) -> f64 {
        match self {
            Life::Finite(n) => (1.0 / n).powf(m),
            Life::Infinite => 0.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Life::Infinite)
    }

    /// Numeric value, `f64::INFINITY` for unbounded life. For display and
    /// comparisons only.
    pub fn as_f64(self) -> f64 {
        match self {
            Life::Finite(n) => n,
            Life::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Life::Finite(n) => Some(n),
            Life::Infinite => None,
        }
    }

    /// Finite values that overflow become [`Life::Infinite`].
    pub fn from_f64(n: f64) -> Life {
        if n.is_finite() {
            Life::Finite(n)
        } else {
            Life::Infinite
        }
    }
}

impl fmt::Display for Life {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Life::Finite(n) => write!(f, "{n}"),
            Life::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Life {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Life::Finite(n) => s.serialize_f64(*n),
            Life::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Life {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(n) => Ok(Life::Finite(n)),
            Repr::Str(s) if s == "inf" => Ok(Life::Infinite),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("invalid life `{s}`"))),
        }
    }
}

/// Unit in which stress-valued material constants are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StressUnit {
    #[default]
    Pa,
    MPa,
}

/// Elastic, thermal, hardening, fatigue, Arrhenius and Weibull constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Lamé's first parameter λ.
    pub lambda: f64,
    /// Shear modulus μ.
    pub mu: f64,
    pub youngs_modulus: f64,
    /// Coefficient of linear thermal expansion [1/K].
    pub thermal_expansion: f64,
    /// Thermal conductivity [W/(m·K)].
    pub conductivity: f64,
    /// Cyclic hardening coefficient K.
    pub hardening_coefficient: f64,
    /// Cyclic hardening exponent n'.
    pub hardening_exponent: f64,
    /// σ_f'.
    pub fatigue_strength_coefficient: f64,
    /// ε_f'.
    pub fatigue_ductility_coefficient: f64,
    /// b < 0.
    pub fatigue_strength_exponent: f64,
    /// c < 0.
    pub fatigue_ductility_exponent: f64,
    /// Arrhenius coefficient Q [1/K].
    pub activation: f64,
    /// Stress-free reference temperature T₀.
    pub reference_temperature: f64,
    /// Weibull shape m.
    pub weibull_shape: f64,
    /// Strain amplitudes below this floor are treated as infinite life.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fatigue_floor: Option<f64>,
    /// Relative tolerance of the E–λ–μ consistency check.
    #[serde(default = "default_modulus_rtol")]
    pub modulus_rtol: f64,
    /// When `MPa`, the stress-valued constants are converted to Pa on
    /// [`MaterialParams::normalized`].
    #[serde(default)]
    pub stress_unit: StressUnit,
}

fn default_modulus_rtol() -> f64 {
    1e-6
}

impl MaterialParams {
    /// Builds a parameter set from engineering constants E and ν.
    pub fn from_youngs_poisson(e: f64, nu: f64) -> Self {
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        MaterialParams {
            lambda,
            mu,
            youngs_modulus: e,
            ..Self::example_steel()
        }
    }

    /// A representative heat-resistant steel in MPa-consistent units
    /// (stresses in MPa, temperatures in K).
    pub fn example_steel() -> Self {
        let e = 200_000.0;
        let nu = 0.3;
        MaterialParams {
            lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            mu: e / (2.0 * (1.0 + nu)),
            youngs_modulus: e,
            thermal_expansion: 1.2e-5,
            conductivity: 30.0,
            hardening_coefficient: 1200.0,
            hardening_exponent: 0.15,
            fatigue_strength_coefficient: 1500.0,
            fatigue_ductility_coefficient: 0.6,
            fatigue_strength_exponent: -0.09,
            fatigue_ductility_exponent: -0.6,
            activation: 0.005,
            reference_temperature: 293.0,
            weibull_shape: 2.0,
            fatigue_floor: None,
            modulus_rtol: 1e-6,
            stress_unit: StressUnit::Pa,
        }
    }

    /// Converts MPa constants to Pa; a no-op for Pa.
    pub fn normalized(mut self) -> Self {
        if self.stress_unit == StressUnit::MPa {
            for v in [
                &mut self.lambda,
                &mut self.mu,
                &mut self.youngs_modulus,
                &mut self.hardening_coefficient,
                &mut self.fatigue_strength_coefficient,
            ] {
                *v *= 1e6;
            }
            self.stress_unit = StressUnit::Pa;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("youngs_modulus", self.youngs_modulus),
            ("conductivity", self.conductivity),
            ("hardening_coefficient", self.hardening_coefficient),
            ("fatigue_strength_coefficient", self.fatigue_strength_coefficient),
            ("fatigue_ductility_coefficient", self.fatigue_ductility_coefficient),
            ("weibull_shape", self.weibull_shape),
            ("modulus_rtol", self.modulus_rtol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(validation(format!("material.{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.hardening_exponent > 0.0 && self.hardening_exponent < 1.0) {
            return Err(validation(format!(
                "material.hardening_exponent must lie in (0, 1), got {}",
                self.hardening_exponent
            )));
        }
        for (name, v) in [
            ("fatigue_strength_exponent", self.fatigue_strength_exponent),
            ("fatigue_ductility_exponent", self.fatigue_ductility_exponent),
        ] {
            if !(v < 0.0) {
                return Err(validation(format!("material.{name} must be negative, got {v}")));
            }
        }
        for (name, v) in [
            ("thermal_expansion", self.thermal_expansion),
            ("activation", self.activation),
            ("reference_temperature", self.reference_temperature),
        ] {
            if !v.is_finite() {
                return Err(validation(format!("material.{name} must be finite")));
            }
        }
        if let Some(floor) = self.fatigue_floor {
            if !(floor > 0.0) {
                return Err(validation("material.fatigue_floor must be positive"));
            }
        }
        let e_from_lame = self.mu * (3.0 * self.lambda + 2.0 * self.mu) / (self.lambda + self.mu);
        if (self.youngs_modulus - e_from_lame).abs() > self.modulus_rtol * self.youngs_modulus {
            return Err(validation(format!(
                "material.youngs_modulus {} inconsistent with lambda/mu (which imply {})",
                self.youngs_modulus, e_from_lame
            )));
        }
        Ok(())
    }

    /// Thermal stress modulus ρ(3λ + 2μ).
    pub fn thermal_modulus(&self) -> f64 {
        self.thermal_expansion * (3.0 * self.lambda + 2.0 * self.mu)
    }

    /// Plane-strain ratio λ / (2(λ + μ)), i.e. Poisson's ratio.
    pub fn plane_strain_ratio(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }
}

fn check_symmetric(sigma: &Tensor3) -> Result<()> {
    let scale = sigma.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (sigma[i][j] - sigma[j][i]).abs() > 1e-12 * scale {
                return Err(validation(format!(
                    "stress tensor not symmetric: s[{i}][{j}]={} vs s[{j}][{i}]={}",
                    sigma[i][j], sigma[j][i]
                )));
            }
        }
    }
    Ok(())
}

/// Von Mises equivalent stress `sqrt(3/2 σ':σ')` of a full 3×3 tensor.
pub fn von_mises(sigma: &Tensor3) -> Result<f64> {
    check_symmetric(sigma)?;
    let mean = (sigma[0][0] + sigma[1][1] + sigma[2][2]) / 3.0;
    let mut contraction = 0.0;
    for (i, row) in sigma.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            let dev = if i == j { s - mean } else { s };
            contraction += dev * dev;
        }
    }
    Ok((1.5 * contraction).sqrt())
}

/// Thermoelastic stress `λ div u I + μ(∇u + ∇uᵀ) − ρ(3λ+2μ)(T − T₀) I` on the
/// leading `dim × dim` block. Entries outside the block are zero.
pub fn thermoelastic_stress(grad_u: &Tensor3, dim: usize, temperature: f64, p: &MaterialParams) -> Tensor3 {
    let div: f64 = (0..dim).map(|i| grad_u[i][i]).sum();
    let thermal = p.thermal_modulus() * (temperature - p.reference_temperature);
    let mut s = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            s[i][j] = p.mu * (grad_u[i][j] + grad_u[j][i]);
        }
        s[i][i] += p.lambda * div - thermal;
    }
    s
}

/// Completes a plane-strain 2D stress with
/// `σ₃₃ = ν_P(σ₁₁ + σ₂₂) − E ρ (T − T₀)`.
pub fn plane_strain_completion(sigma: &Tensor3, temperature: f64, p: &MaterialParams) -> Tensor3 {
    let mut s = *sigma;
    s[2][2] = p.plane_strain_ratio() * (sigma[0][0] + sigma[1][1])
        - p.youngs_modulus * p.thermal_expansion * (temperature - p.reference_temperature);
    s
}

/// Full 3×3 stress used by the failure model; plane strain when `dim == 2`.
pub fn failure_stress(grad_u: &Tensor3, dim: usize, temperature: f64, p: &MaterialParams) -> Tensor3 {
    let s = thermoelastic_stress(grad_u, dim, temperature, p);
    if dim == 2 {
        plane_strain_completion(&s, temperature, p)
    } else {
        s
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(validation(format!("{name} must be finite and non-negative, got {v}")));
    }
    Ok(())
}

/// Elastic-plastic stress amplitude from the Neuber relation
/// `s²/E + s (s/K)^{1/n'} = σ_a²/E`.
pub fn neuber_convert(sigma_a: f64, p: &MaterialParams) -> Result<f64> {
    check_nonnegative("elastic stress amplitude", sigma_a)?;
    if sigma_a == 0.0 {
        return Ok(0.0);
    }
    let e = p.youngs_modulus;
    let k = p.hardening_coefficient;
    let inv_n = 1.0 / p.hardening_exponent;
    let target = sigma_a * sigma_a / e;
    let f = |s: f64| {
        let plastic = (s / k).powf(inv_n);
        let value = s * s / e + s * plastic - target;
        let slope = 2.0 * s / e + (1.0 + inv_n) * plastic;
        (value, slope)
    };
    safeguarded_newton(f, 0.0, sigma_a, 1e-10 * sigma_a.max(1.0), 200)
}

/// Ramberg-Osgood strain amplitude `σ/E + (σ/K)^{1/n'}`.
pub fn ramberg_osgood(sigma: f64, p: &MaterialParams) -> Result<f64> {
    check_nonnegative("elastic-plastic stress amplitude", sigma)?;
    Ok(sigma / p.youngs_modulus + (sigma / p.hardening_coefficient).powf(1.0 / p.hardening_exponent))
}

/// Right side of the Coffin-Manson-Basquin curve, `ε_a(N)`.
pub fn cmb_strain(cycles: f64, p: &MaterialParams) -> f64 {
    let two_n = 2.0 * cycles;
    p.fatigue_strength_coefficient / p.youngs_modulus * two_n.powf(p.fatigue_strength_exponent)
        + p.fatigue_ductility_coefficient * two_n.powf(p.fatigue_ductility_exponent)
}

/// Inverts the Coffin-Manson-Basquin curve for the cycle count N.
///
/// Solved in `u = ln(2N)`, where the curve is a sum of two decaying
/// exponentials.
pub fn cmb_invert(eps_a: f64, p: &MaterialParams) -> Result<Life> {
    if !(eps_a > 0.0) || !eps_a.is_finite() {
        return Err(validation(format!("strain amplitude must be positive and finite, got {eps_a}")));
    }
    if let Some(floor) = p.fatigue_floor {
        if eps_a < floor {
            return Ok(Life::Infinite);
        }
    }
    let a = p.fatigue_strength_coefficient / p.youngs_modulus;
    let b = p.fatigue_strength_exponent;
    let c_coef = p.fatigue_ductility_coefficient;
    let c = p.fatigue_ductility_exponent;
    let h = |u: f64| {
        let (eb, ec) = ((b * u).exp(), (c * u).exp());
        (a * eb + c_coef * ec - eps_a, a * b * eb + c_coef * c * ec)
    };
    // expand a bracket around u = 0 (N = 1/2)
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    if h(0.0).0 > 0.0 {
        hi = 1.0;
        while h(hi).0 > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e6 {
                return Ok(Life::Infinite);
            }
        }
    } else {
        lo = -1.0;
        while h(lo).0 < 0.0 {
            hi = lo;
            lo *= 2.0;
            if lo < -1e6 {
                return Err(validation(format!("strain amplitude {eps_a} beyond the fatigue curve")));
            }
        }
    }
    let u = safeguarded_newton(h, lo, hi, 1e-12, 500)?;
    Ok(Life::from_f64(0.5 * u.exp()))
}

/// Arrhenius temperature scaling `N_sur = e^{−Q(T−T₀)} N_mech`.
pub fn arrhenius_life(n_mech: Life, temperature: f64, p: &MaterialParams) -> Result<Life> {
    if !temperature.is_finite() {
        return Err(validation("temperature must be finite"));
    }
    match n_mech {
        Life::Infinite => Ok(Life::Infinite),
        Life::Finite(n) if n > 0.0 => {
            let factor = (-p.activation * (temperature - p.reference_temperature)).exp();
            Ok(Life::from_f64(factor * n))
        }
        Life::Finite(n) => Err(validation(format!("mechanical life must be positive, got {n}"))),
    }
}

/// Surface crack-initiation life at a point with displacement gradient
/// `grad_u` and temperature `temperature`.
pub fn nsur_pointwise(grad_u: &Tensor3, dim: usize, temperature: f64, p: &MaterialParams) -> Result<Life> {
    if grad_u.iter().flatten().any(|v| !v.is_finite()) || !temperature.is_finite() {
        return Err(validation("non-finite displacement gradient or temperature"));
    }
    let sigma = failure_stress(grad_u, dim, temperature, p);
    let sigma_v = von_mises(&sigma)?;
    if sigma_v == 0.0 {
        return Ok(Life::Infinite);
    }
    let sigma_a = 0.5 * sigma_v;
    let sigma_ep = neuber_convert(sigma_a, p)?;
    let eps_a = ramberg_osgood(sigma_ep, p)?;
    if eps_a == 0.0 {
        return Ok(Life::Infinite);
    }
    let n_mech = cmb_invert(eps_a, p)?;
    arrhenius_life(n_mech, temperature, p)
}

/// Local Weibull crack-initiation intensity `(m/N)(t/N)^{m−1}`.
pub fn weibull_intensity(t: f64, scale: Life, m: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(validation(format!("time must be non-negative, got {t}")));
    }
    match scale {
        Life::Infinite => Ok(0.0),
        Life::Finite(n) if n > 0.0 => Ok(m / n * (t / n).powf(m - 1.0)),
        Life::Finite(n) => Err(validation(format!("Weibull scale must be positive, got {n}"))),
    }
}
