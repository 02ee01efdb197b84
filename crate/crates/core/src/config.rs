//! TOML problem configuration.
//!
//! Unknown keys are rejected everywhere. Load-time errors carry the line of
//! the offending key (or of its table header when the problem is a
//! cross-field invariant).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::diagnose::DiagnoseOptions;
use crate::elasticity::LoadData;
use crate::error::{Error, Result};
use crate::expr::{Expr, ScalarSource, VectorSource};
use crate::geometry::{build_baseline, build_baseline_3d, fourier_bump_basis, AdmissibilityOptions, BaselineDesign, Mesh};
use crate::material::MaterialParams;
use crate::optimize::{OptimizationConfig, Problem};
use crate::reliability::ObjectiveOptions;
use crate::thermal::RobinData;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub geometry: GeometryConfig,
    pub material: MaterialParams,
    pub loads: LoadsConfig,
    #[serde(default)]
    pub reliability: ReliabilityConfig,
    #[serde(default)]
    pub optimizer: OptimizationConfig,
    #[serde(default)]
    pub diagnose: DiagnoseOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub outer_radius: f64,
    pub hole_radius: f64,
    #[serde(default)]
    pub hole_center: [f64; 2],
    pub ext_radius: f64,
    /// Target mesh size.
    pub resolution: f64,
    /// Number of angular modes; the basis has twice as many fields.
    #[serde(default = "default_modes")]
    pub basis_modes: usize,
    /// Extrusion thickness; present means a 3D mesh.
    #[serde(default)]
    pub thickness: Option<f64>,
    #[serde(default)]
    pub admissibility: AdmissibilityOptions,
}

fn default_modes() -> usize {
    4
}

/// Load expressions over `x, y, z` (and `nx, ny, nz` on the boundary).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsConfig {
    /// Ambient temperature `T_e`.
    pub ambient: Spanned<String>,
    /// Heat transfer coefficient `η`.
    pub eta: Spanned<String>,
    #[serde(default)]
    pub body_force: Option<Spanned<Vec<String>>>,
    #[serde(default)]
    pub traction: Option<Spanned<Vec<String>>>,
    #[serde(default)]
    pub traction_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliabilityConfig {
    pub include_dirichlet: bool,
    /// Times at which CDF and hazard are tabulated; empty means twenty
    /// points spread over `(0, 3N]`.
    pub times: Vec<f64>,
    /// Sampling horizon; defaults to `2N`.
    pub t_max: Option<f64>,
    pub replications: usize,
    pub seed: u64,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        ReliabilityConfig {
            include_dirichlet: true,
            times: Vec::new(),
            t_max: None,
            replications: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Any of `json` and `csv`.
    pub formats: Vec<String>,
    /// Also write gnuplot scripts next to the CSV files.
    pub gnuplot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec!["json".into(), "csv".into()],
            gnuplot: false,
        }
    }
}

impl OutputConfig {
    pub fn json(&self) -> bool {
        self.formats.iter().any(|f| f == "json")
    }

    pub fn csv(&self) -> bool {
        self.formats.iter().any(|f| f == "csv")
    }
}

/// 1-based line of byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line of the `[name]` header, or 1 if absent.
fn header_line(text: &str, name: &str) -> usize {
    let header = format!("[{name}]");
    text.lines()
        .position(|l| l.trim() == header)
        .map(|i| i + 1)
        .unwrap_or(1)
}

fn config_error(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

/// A parsed configuration with its compiled sources.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ProblemConfig,
    pub robin: RobinData,
    pub loads: LoadData,
    pub design: BaselineDesign,
    /// Directory of the config file; relative output paths resolve here.
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Parses and validates; every module invariant is checked here.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config: ProblemConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
            config_error(line, e.message())
        })?;
        config.material = config.material.clone().normalized();
        config
            .material
            .validate()
            .map_err(|e| config_error(header_line(text, "material"), e))?;

        let g = &config.geometry;
        let design = BaselineDesign {
            outer_radius: g.outer_radius,
            hole_center: g.hole_center,
            hole_radius: g.hole_radius,
            ext_radius: g.ext_radius,
        };
        let gline = header_line(text, "geometry");
        design.validate().map_err(|e| config_error(gline, e))?;
        if !(g.resolution > 0.0) || g.resolution > design.clearance() {
            return Err(config_error(
                gline,
                format!("resolution must lie in (0, {}], got {}", design.clearance(), g.resolution),
            ));
        }
        if g.basis_modes == 0 {
            return Err(config_error(gline, "basis_modes must be at least 1"));
        }
        if let Some(t) = g.thickness {
            if !(t > 0.0) {
                return Err(config_error(gline, format!("thickness must be positive, got {t}")));
            }
        }
        g.admissibility
            .validate()
            .map_err(|e| config_error(header_line(text, "geometry.admissibility"), e))?;

        let l = &config.loads;
        let scalar = |s: &Spanned<String>, name: &str| -> Result<ScalarSource> {
            Expr::parse(s.get_ref())
                .map(ScalarSource::from_expr)
                .map_err(|e| config_error(line_of(text, s.span().start), format!("loads.{name}: {e}")))
        };
        let vector = |s: &Option<Spanned<Vec<String>>>, name: &str| -> Result<VectorSource> {
            match s {
                None => Ok(VectorSource::zero()),
                Some(v) => {
                    let line = line_of(text, v.span().start);
                    let dim = if g.thickness.is_some() { 3 } else { 2 };
                    if v.get_ref().len() != dim {
                        return Err(config_error(
                            line,
                            format!("loads.{name} needs {dim} components, got {}", v.get_ref().len()),
                        ));
                    }
                    VectorSource::parse(v.get_ref()).map_err(|e| config_error(line, format!("loads.{name}: {e}")))
                }
            }
        };
        let robin = RobinData::new(scalar(&l.eta, "eta")?, scalar(&l.ambient, "ambient")?, config.material.conductivity);
        let loads = LoadData {
            body_force: vector(&l.body_force, "body_force")?,
            traction: vector(&l.traction, "traction")?,
            traction_bound: l.traction_bound,
        };

        let r = &config.reliability;
        let rline = header_line(text, "reliability");
        if r.times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(config_error(rline, "reliability.times must be finite and non-negative"));
        }
        if let Some(t) = r.t_max {
            if !(t > 0.0) || !t.is_finite() {
                return Err(config_error(rline, format!("reliability.t_max must be positive, got {t}")));
            }
        }
        config
            .optimizer
            .validate()
            .map_err(|e| config_error(header_line(text, "optimizer"), e))?;
        if !config.optimizer.initial.is_empty() && config.optimizer.initial.len() != 2 * g.basis_modes {
            return Err(config_error(
                header_line(text, "optimizer"),
                format!(
                    "optimizer.initial has {} entries, the basis has {}",
                    config.optimizer.initial.len(),
                    2 * g.basis_modes
                ),
            ));
        }
        let d = &config.diagnose;
        if !(d.amplitude >= 0.0) || !d.amplitude.is_finite() {
            return Err(config_error(header_line(text, "diagnose"), "diagnose.amplitude must be non-negative"));
        }
        let o = &config.output;
        if let Some(bad) = o.formats.iter().find(|f| *f != "json" && *f != "csv") {
            return Err(config_error(
                header_line(text, "output"),
                format!("unknown output format `{bad}` (expected json or csv)"),
            ));
        }
        Ok(LoadedConfig {
            config,
            robin,
            loads,
            design,
            base_dir: PathBuf::new(),
        })
    }

    pub fn baseline_mesh(&self) -> Result<Mesh> {
        let g = &self.config.geometry;
        match g.thickness {
            Some(t) => build_baseline_3d(&self.design, g.resolution, t),
            None => build_baseline(&self.design, g.resolution),
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let mesh = Arc::new(self.baseline_mesh()?);
        let g = &self.config.geometry;
        Problem::new(
            self.design.clone(),
            mesh,
            fourier_bump_basis(&self.design, g.basis_modes),
            self.config.material.clone(),
            self.robin.clone(),
            self.loads.clone(),
            ObjectiveOptions {
                include_dirichlet: self.config.reliability.include_dirichlet,
            },
            g.admissibility.clone(),
        )
    }

    pub fn output_dir(&self) -> PathBuf {
        let d = &self.config.output.directory;
        if d.is_absolute() {
            d.clone()
        } else {
            self.base_dir.join(d)
        }
    }
}
