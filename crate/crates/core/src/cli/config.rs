//! Run configuration: a TOML file, command-line overrides, and validation
//! that names the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fields::io::load_field;
use crate::fields::FieldSource;
use crate::grid::{make_grid, GridSpec};
use crate::pauli::SolverOptions;
use crate::spectral::{default_gap_tol, LobpcgOptions, NullityOptions};
use crate::sweep::{DetectionWindow, PerturbationOptions, SweepOptions};

/// A configuration problem, tied to a dotted key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: &str, message: impl Into<String>) -> Self {
        ConfigError {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "`{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    #[default]
    LossYau,
    Random,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldKind,
    /// Multiplies the Loss–Yau field.
    pub scale: f64,
    /// Random fields: L^{3/2} norm.
    pub amplitude: f64,
    pub correlation_length: f64,
    /// Random fields: seed (the run seed is used when absent).
    pub seed: Option<u64>,
    /// File fields: binary or text field data.
    pub path: Option<PathBuf>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            kind: FieldKind::LossYau,
            scale: 1.0,
            amplitude: 1.0,
            correlation_length: 1.0,
            seed: None,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_width: 16.0,
            points: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    /// Coupling of single-point commands.
    pub t: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub step: f64,
    /// Bracket width at which refinement stops.
    pub resolution: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        CouplingConfig {
            t: 1.0,
            t_min: 0.6,
            t_max: 2.0,
            step: 0.05,
            resolution: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub cg_rtol: f64,
    pub cg_max_iterations: usize,
    pub eig_tol: f64,
    pub eig_max_iterations: usize,
    /// Smallest Pauli eigenpairs per coupling.
    pub k: usize,
    /// Top Birman–Schwinger eigenvalues per coupling.
    pub bs_k: usize,
    /// Nullity threshold; `10 (π/(2L))²` when absent.
    pub gap_tol: Option<f64>,
    /// Largest `|1 − μ|` accepted as a Birman–Schwinger crossing.
    pub bs_tol: f64,
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cg_rtol: 1e-8,
            cg_max_iterations: 5000,
            eig_tol: 1e-4,
            eig_max_iterations: 400,
            k: 6,
            bs_k: 3,
            gap_tol: None,
            bs_tol: 0.02,
            warm_start: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    /// Perturbation size relative to the base field's L^{3/2} norm.
    pub relative_epsilon: f64,
    pub trials: usize,
    pub correlation_length: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            relative_epsilon: 0.1,
            trials: 5,
            correlation_length: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Grid of the oracle and gauge suites (at most 8 points per axis).
    pub half_width: f64,
    pub points: usize,
    /// Random cases of the inequality suites.
    pub cases: usize,
    /// Random contexts of the oracle suite.
    pub oracle_contexts: usize,
    pub gauge_shifts: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            half_width: 3.0,
            points: 8,
            cases: 200,
            oracle_contexts: 10,
            gauge_shifts: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write localized eigenvectors at detected couplings.
    pub eigenvectors: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            eigenvectors: true,
        }
    }
}

/// Every setting of a run. `materialize` fills derived defaults so that the
/// echoed configuration reproduces the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub field: FieldConfig,
    pub grid: GridConfig,
    pub coupling: CouplingConfig,
    pub solver: SolverConfig,
    pub perturb: PerturbConfig,
    pub validate: ValidateConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            field: FieldConfig::default(),
            grid: GridConfig::default(),
            coupling: CouplingConfig::default(),
            solver: SolverConfig::default(),
            perturb: PerturbConfig::default(),
            validate: ValidateConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Extracts the dotted key from a TOML error message path like `grid.points`.
fn toml_error(e: toml::de::Error) -> ConfigError {
    let message = e.message().to_string();
    let key = message
        .split('`')
        .nth(1)
        .filter(|k| !k.contains(' '))
        .unwrap_or_default()
        .to_string();
    let location = e.span().map(|s| format!(" (byte {})", s.start)).unwrap_or_default();
    ConfigError {
        key,
        message: format!("{message}{location}"),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(toml_error)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every key and fills derived defaults.
    pub fn materialize(mut self) -> Result<Self, ConfigError> {
        self.check()?;
        if self.solver.gap_tol.is_none() {
            self.solver.gap_tol = Some(default_gap_tol(&self.grid_spec()?));
        }
        if self.field.kind == FieldKind::Random && self.field.seed.is_none() {
            self.field.seed = Some(self.seed);
        }
        Ok(self)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("must be finite and > 0, got {v}")))
            }
        };
        self.grid_spec()?;
        match self.field.kind {
            FieldKind::LossYau => {
                if !self.field.scale.is_finite() {
                    return Err(ConfigError::new("field.scale", "must be finite"));
                }
            }
            FieldKind::Random => {
                if !(self.field.amplitude >= 0.0) || !self.field.amplitude.is_finite() {
                    return Err(ConfigError::new("field.amplitude", "must be finite and ≥ 0"));
                }
                positive("field.correlation_length", self.field.correlation_length)?;
            }
            FieldKind::File => {
                if self.field.path.is_none() {
                    return Err(ConfigError::new("field.path", "required when field.kind = \"file\""));
                }
            }
        }
        let c = &self.coupling;
        if !(c.t >= 0.0) || !c.t.is_finite() {
            return Err(ConfigError::new("coupling.t", format!("must be finite and ≥ 0, got {}", c.t)));
        }
        positive("coupling.t_min", c.t_min)?;
        if !(c.t_max > c.t_min) || !c.t_max.is_finite() {
            return Err(ConfigError::new(
                "coupling.t_max",
                format!("must exceed coupling.t_min = {}, got {}", c.t_min, c.t_max),
            ));
        }
        positive("coupling.step", c.step)?;
        positive("coupling.resolution", c.resolution)?;
        let s = &self.solver;
        positive("solver.cg_rtol", s.cg_rtol)?;
        positive("solver.eig_tol", s.eig_tol)?;
        positive("solver.bs_tol", s.bs_tol)?;
        if s.cg_max_iterations == 0 {
            return Err(ConfigError::new("solver.cg_max_iterations", "must be ≥ 1"));
        }
        if s.eig_max_iterations == 0 {
            return Err(ConfigError::new("solver.eig_max_iterations", "must be ≥ 1"));
        }
        if !(1..=10).contains(&s.k) {
            return Err(ConfigError::new("solver.k", format!("must lie in 1..=10, got {}", s.k)));
        }
        if !(1..=10).contains(&s.bs_k) {
            return Err(ConfigError::new("solver.bs_k", format!("must lie in 1..=10, got {}", s.bs_k)));
        }
        if let Some(g) = s.gap_tol {
            positive("solver.gap_tol", g)?;
        }
        let p = &self.perturb;
        if !(p.relative_epsilon >= 0.0) || !p.relative_epsilon.is_finite() {
            return Err(ConfigError::new("perturb.relative_epsilon", "must be finite and ≥ 0"));
        }
        positive("perturb.correlation_length", p.correlation_length)?;
        if p.trials == 0 {
            return Err(ConfigError::new("perturb.trials", "must be ≥ 1"));
        }
        let v = &self.validate;
        make_grid(v.half_width, v.points)
            .map_err(|e| ConfigError::new("validate.points", e.to_string()))?;
        if v.points > crate::spectral::DENSE_MAX_POINTS {
            return Err(ConfigError::new(
                "validate.points",
                format!("the dense oracle supports at most {} points per axis", crate::spectral::DENSE_MAX_POINTS),
            ));
        }
        if v.cases == 0 {
            return Err(ConfigError::new("validate.cases", "must be ≥ 1"));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        if !(self.grid.half_width > 0.0) || !self.grid.half_width.is_finite() {
            return Err(ConfigError::new(
                "grid.half_width",
                format!("must be finite and > 0, got {}", self.grid.half_width),
            ));
        }
        make_grid(self.grid.half_width, self.grid.points).map_err(|e| ConfigError::new("grid.points", e.to_string()))
    }

    pub fn validate_grid(&self) -> Result<GridSpec, ConfigError> {
        make_grid(self.validate.half_width, self.validate.points)
            .map_err(|e| ConfigError::new("validate.points", e.to_string()))
    }

    /// The configured field. Reading a field file can fail for reasons
    /// outside the configuration, so it reports a computation error.
    pub fn field_source(&self) -> crate::error::Result<FieldSource> {
        Ok(match self.field.kind {
            FieldKind::LossYau if self.field.scale == 1.0 => FieldSource::LossYau,
            FieldKind::LossYau => FieldSource::LossYau.scaled(self.field.scale),
            FieldKind::Random => FieldSource::RandomDivFree {
                seed: self.field.seed.unwrap_or(self.seed),
                amplitude: self.field.amplitude,
                correlation_length: self.field.correlation_length,
            },
            FieldKind::File => {
                let path = self.field.path.as_ref().expect("checked in materialize");
                FieldSource::GridData(load_field(path)?)
            }
        })
    }

    pub fn gap_tol(&self) -> f64 {
        self.solver
            .gap_tol
            .unwrap_or_else(|| default_gap_tol(&self.grid_spec().expect("validated grid")))
    }

    pub fn sweep_options(&self) -> SweepOptions {
        let s = &self.solver;
        let lobpcg = LobpcgOptions {
            tol: s.eig_tol,
            max_iterations: s.eig_max_iterations,
            seed: self.seed,
            ..LobpcgOptions::default()
        };
        let gap_tol = self.gap_tol();
        SweepOptions {
            nullity: NullityOptions {
                gap_tol,
                k: s.k,
                cluster_tol: 0.05 * gap_tol,
                lobpcg,
            },
            bs_k: s.bs_k,
            bs: lobpcg,
            bs_tol: s.bs_tol,
            warm_start: s.warm_start,
            solver: SolverOptions {
                rtol: s.cg_rtol,
                max_iterations: s.cg_max_iterations,
            },
        }
    }

    pub fn perturbation_options(&self) -> PerturbationOptions {
        PerturbationOptions {
            correlation_length: self.perturb.correlation_length,
            t: 1.0,
        }
    }

    pub fn detection_window(&self) -> DetectionWindow {
        DetectionWindow {
            range: (self.coupling.t_min, self.coupling.t_max),
            step: self.coupling.step,
            resolution: self.coupling.resolution,
        }
    }
}

/// `A:B:STEP`, or a single coupling `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplingArg {
    Single(f64),
    Range { a: f64, b: f64, step: f64 },
}

pub fn parse_coupling(text: &str) -> Result<CouplingArg, ConfigError> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| ConfigError::new("--t", format!("`{s}` is not a number")))
    };
    match parts.as_slice() {
        [t] => Ok(CouplingArg::Single(num(t)?)),
        [a, b, step] => Ok(CouplingArg::Range {
            a: num(a)?,
            b: num(b)?,
            step: num(step)?,
        }),
        _ => Err(ConfigError::new("--t", format!("expected T or A:B:STEP, got `{text}`"))),
    }
}

/// Command-line overrides, applied on top of the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub points: Option<usize>,
    pub half_width: Option<f64>,
    pub coupling: Option<CouplingArg>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if let Some(n) = self.points {
            cfg.grid.points = n;
        }
        if let Some(l) = self.half_width {
            cfg.grid.half_width = l;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        match self.coupling {
            Some(CouplingArg::Single(t)) => cfg.coupling.t = t,
            Some(CouplingArg::Range { a, b, step }) => {
                cfg.coupling.t_min = a;
                cfg.coupling.t_max = b;
                cfg.coupling.step = step;
            }
            None => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_materialize_and_round_trip() {
        let cfg = RunConfig::default().materialize().unwrap();
        assert!(cfg.solver.gap_tol.is_some());
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn errors_name_the_key() {
        let e = RunConfig::from_toml("[grid]\npoints = 33\n").unwrap().materialize().unwrap_err();
        assert_eq!(e.key, "grid.points");
        let e = RunConfig::from_toml("[grid]\nspacing = 1.0\n").unwrap_err();
        assert_eq!(e.key, "spacing", "{e}");
        let e = RunConfig::from_toml("[coupling]\nt_min = 1.0\nt_max = 1.0\n").unwrap().materialize().unwrap_err();
        assert_eq!(e.key, "coupling.t_max");
        let e = RunConfig::from_toml("[field]\nkind = \"file\"\n").unwrap().materialize().unwrap_err();
        assert_eq!(e.key, "field.path");
        let e = RunConfig::from_toml("[validate]\npoints = 16\n").unwrap().materialize().unwrap_err();
        assert_eq!(e.key, "validate.points");
    }

    #[test]
    fn coupling_argument_forms() {
        assert_eq!(parse_coupling("1.5").unwrap(), CouplingArg::Single(1.5));
        assert_eq!(
            parse_coupling("0.6:2:0.05").unwrap(),
            CouplingArg::Range {
                a: 0.6,
                b: 2.0,
                step: 0.05
            }
        );
        assert!(parse_coupling("1:2").is_err());
        assert!(parse_coupling("x").is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = RunConfig::default();
        Overrides {
            points: Some(32),
            half_width: Some(8.0),
            coupling: Some(CouplingArg::Range {
                a: 0.1,
                b: 0.2,
                step: 0.05,
            }),
            seed: Some(9),
            out: Some("x".into()),
        }
        .apply(&mut cfg);
        let cfg = cfg.materialize().unwrap();
        assert_eq!((cfg.grid.points, cfg.grid.half_width, cfg.seed), (32, 8.0, 9));
        assert_eq!((cfg.coupling.t_min, cfg.coupling.t_max), (0.1, 0.2));
        assert_eq!(cfg.gap_tol(), default_gap_tol(&make_grid(8.0, 32).unwrap()));
    }

    proptest! {
        #[test]
        fn materialized_configs_round_trip(
            points in (4usize..40).prop_map(|n| 2 * n),
            half_width in 0.5f64..50.0,
            t in 0.0f64..5.0,
            eig_tol in 1e-12f64..1e-2,
            seed in any::<u64>(),
            kind in 0usize..2,
        ) {
            let mut cfg = RunConfig::default();
            cfg.grid = GridConfig { half_width, points };
            cfg.coupling.t = t;
            cfg.solver.eig_tol = eig_tol;
            cfg.seed = seed;
            cfg.field.kind = [FieldKind::LossYau, FieldKind::Random][kind];
            let cfg = cfg.materialize().unwrap();
            let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
