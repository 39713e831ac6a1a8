use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Version of the configuration layout understood by this binary.
pub const SCHEMA_VERSION: u32 = 1;

/// Scenario configuration. Every table is optional and defaults to the
/// values used by the module test suites; unknown keys are rejected.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub schema: u32,
    pub seed: u64,
    pub shiftmap: ShiftmapConfig,
    pub porkbarrel: PorkbarrelConfig,
    pub brokenpath: BrokenpathConfig,
    pub germ: GermConfig,
    pub stokes: StokesConfig,
    pub perturb: PerturbConfig,
    pub groupoid: GroupoidConfig,
    pub pairing: PairingConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema: SCHEMA_VERSION,
            seed: 1,
            shiftmap: ShiftmapConfig::default(),
            porkbarrel: PorkbarrelConfig::default(),
            brokenpath: BrokenpathConfig::default(),
            germ: GermConfig::default(),
            stokes: StokesConfig::default(),
            perturb: PerturbConfig::default(),
            groupoid: GroupoidConfig::default(),
            pairing: PairingConfig::default(),
        }
    }
}

/// Weighted grid `[-radius, radius]` with the given spacing and weights.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub radius: f64,
    pub spacing: f64,
    pub weights: Vec<f64>,
}

impl GridSpec {
    fn validate(&self, table: &str) -> Result<()> {
        if !(self.radius > 0.0 && self.spacing > 0.0 && self.spacing < self.radius) {
            bail!("[{table}.grid] needs 0 < spacing < radius");
        }
        if self.weights.is_empty() {
            bail!("[{table}.grid] weights must not be empty");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftmapConfig {
    pub grid: GridSpec,
    /// Base shift `t` of the probe point.
    pub shift: f64,
    pub steps: Vec<f64>,
    pub slope_threshold: f64,
    /// Lower bound the sawtooth quotient must stay above.
    pub stagnation_floor: f64,
}

impl Default for ShiftmapConfig {
    fn default() -> Self {
        ShiftmapConfig {
            grid: GridSpec {
                radius: 8.0,
                spacing: 1.0 / 128.0,
                weights: vec![0.0, 0.1, 0.2],
            },
            shift: 0.25,
            steps: vec![1e-1, 1e-2, 1e-3, 1e-4],
            slope_threshold: 0.9,
            stagnation_floor: 0.1,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PorkbarrelConfig {
    pub grid: GridSpec,
    /// Gluing parameters of the dimension profile.
    pub s_values: Vec<f64>,
    /// Run the transversal section demo on the pork-barrel bundle.
    pub transversal_demo: bool,
    pub epsilon: f64,
    pub max_attempts: usize,
}

impl Default for PorkbarrelConfig {
    fn default() -> Self {
        PorkbarrelConfig {
            grid: GridSpec {
                radius: 64.0,
                spacing: 1.0 / 16.0,
                weights: vec![0.0, 0.01, 0.02, 0.03],
            },
            s_values: (-4..=4).map(|k| 0.25 * k as f64).collect(),
            transversal_demo: true,
            epsilon: 0.1,
            max_attempts: 20,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BrokenpathConfig {
    pub grid: GridSpec,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Default for BrokenpathConfig {
    fn default() -> Self {
        BrokenpathConfig {
            grid: PorkbarrelConfig::default().grid,
            a: vec![0.0, 0.0],
            b: vec![1.0, 0.5],
            c: vec![2.0, -1.0],
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GermConfig {
    /// Contraction factor `c` of the scalar germ `B(a, w) = c w + a`.
    pub contraction: f64,
    /// Parameter nodes `a` of the scalar sheet, evenly spaced on `[-a_max, a_max]`.
    pub a_max: f64,
    pub nodes: usize,
    pub tolerance: f64,
    /// Affine fixture `B(a, w) = Q w + g(a)`.
    pub fiber_dim: usize,
    pub param_dim: usize,
    pub max_level: usize,
    pub nodes_per_axis: usize,
    pub rate_range: [f64; 2],
    pub level_tolerance: f64,
}

impl Default for GermConfig {
    fn default() -> Self {
        GermConfig {
            contraction: 0.5,
            a_max: 0.45,
            nodes: 19,
            tolerance: 1e-10,
            fiber_dim: 8,
            param_dim: 2,
            max_level: 3,
            nodes_per_axis: 10,
            rate_range: [0.35, 0.45],
            level_tolerance: 2e-12,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StokesConfig {
    pub disk_order: usize,
    pub disk_tolerance: f64,
    pub orders: Vec<usize>,
    pub final_tolerance: f64,
    pub measure_order: usize,
    pub measure_tolerance: f64,
}

impl Default for StokesConfig {
    fn default() -> Self {
        StokesConfig {
            disk_order: 12,
            disk_tolerance: 1e-8,
            orders: (1..=14).collect(),
            final_tolerance: 1e-6,
            measure_order: 12,
            measure_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbConfig {
    pub epsilon: f64,
    pub max_attempts: usize,
    pub control_margin: f64,
    pub control_resolution: usize,
    pub cobordism_samples: usize,
    pub min_singular: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            epsilon: 0.1,
            max_attempts: 20,
            control_margin: 0.3,
            control_resolution: 41,
            cobordism_samples: 5,
            min_singular: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GroupoidConfig {
    /// Samples of `[-extent, extent]` for the reflection groupoid.
    pub line_samples: usize,
    pub line_extent: f64,
    /// Radii and angular samples per sector of the rotation groupoid.
    pub rotation_radii: Vec<f64>,
    pub rotation_angles: usize,
}

impl Default for GroupoidConfig {
    fn default() -> Self {
        GroupoidConfig {
            line_samples: 9,
            line_extent: 1.0,
            rotation_radii: vec![0.5, 1.0],
            rotation_angles: 4,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PairingConfig {
    pub trials: usize,
    pub loop_tolerance: f64,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            trials: 5,
            loop_tolerance: 1e-6,
        }
    }
}

impl Config {
    /// Parses a configuration text. Errors carry the line and column of
    /// the offending key or value.
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| anyhow::anyhow!("{e}"))?;
        if cfg.schema != SCHEMA_VERSION {
            let line = text
                .lines()
                .position(|l| l.trim_start().starts_with("schema"))
                .map_or(String::new(), |i| format!("line {}: ", i + 1));
            bail!("{line}unsupported schema version {} (expected {SCHEMA_VERSION})", cfg.schema);
        }
        if !text.lines().any(|l| l.trim_start().starts_with("schema")) {
            bail!("missing `schema = {SCHEMA_VERSION}`");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Config::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        self.shiftmap.grid.validate("shiftmap")?;
        self.porkbarrel.grid.validate("porkbarrel")?;
        self.brokenpath.grid.validate("brokenpath")?;
        if self.shiftmap.steps.len() < 2 {
            bail!("[shiftmap] steps needs at least two entries");
        }
        if self.porkbarrel.s_values.is_empty() {
            bail!("[porkbarrel] s_values must not be empty");
        }
        if !(0.0..1.0).contains(&self.germ.contraction) {
            bail!("[germ] contraction must lie in [0, 1)");
        }
        if self.germ.nodes < 2 || self.germ.nodes_per_axis < 2 {
            bail!("[germ] needs at least two nodes per axis");
        }
        if self.stokes.orders.is_empty() || self.stokes.orders.contains(&0) {
            bail!("[stokes] orders must be nonempty and positive");
        }
        if self.pairing.trials == 0 {
            bail!("[pairing] trials must be positive");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
