//! TOML run configuration for the command-line front end.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KreinError, Result};
use crate::geometry::{validate_spec, PotentialSegment, ProblemSpec, RadialPotential};
use crate::scan::ScanRegion;
use crate::sources::{GaussianTerm, ImageProfile, SourceProfile};

/// One potential segment as written in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub r_left: f64,
    pub r_right: f64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    #[serde(default)]
    pub segments: Vec<SegmentConfig>,
}

/// Source field used by `resolve`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Seeded random Gaussian bumps on both sides for every mode.
    #[default]
    Random,
    /// Explicit bumps `amplitude (r/center)^{|m|} exp(-width (r² - center²)² / (4 center²))`.
    Gaussian { terms: Vec<GaussianTerm> },
    /// `f = (L - λ) w` for `w = amplitude r^{|m|} exp(-width r²)`.
    Image {
        mode: i32,
        #[serde(default = "default_amplitude")]
        amplitude: [f64; 2],
        #[serde(default = "default_width")]
        width: f64,
    },
}

fn default_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

fn default_width() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub re_cells: usize,
    pub im_cells: usize,
    pub cut_band: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            re_min: -20.0,
            re_max: -0.01,
            im_min: -5.0,
            im_max: 5.0,
            re_cells: 16,
            im_cells: 8,
            cut_band: 1e-3,
        }
    }
}

impl ScanConfig {
    pub fn region(&self) -> ScanRegion {
        ScanRegion {
            re_min: self.re_min,
            re_max: self.re_max,
            im_min: self.im_min,
            im_max: self.im_max,
            re_cells: self.re_cells,
            im_cells: self.im_cells,
            cut_band: self.cut_band,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Seeded pairs per randomized suite.
    pub pairs: usize,
    /// Grid sizes `N` of the discrete Schur suite.
    pub discrete_sizes: Vec<usize>,
    /// Box half-width of the discrete suite, in units of the interface radius.
    pub discrete_box: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            pairs: 10,
            discrete_sizes: vec![16, 24],
            discrete_box: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub points_per_unit: usize,
    pub levels: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            points_per_unit: 64,
            levels: 4,
        }
    }
}

/// Everything a command needs. Missing keys take the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub interface_radius: f64,
    pub truncation_radius: f64,
    pub mode_cutoff: u32,
    pub grid_points: usize,
    pub potential: PotentialConfig,
    /// Spectral parameters as `[re, im]` pairs.
    pub lambda: Vec<[f64; 2]>,
    /// Modes to evaluate; all `|m| <= mode_cutoff` when absent.
    pub modes: Option<Vec<i32>>,
    pub seed: u64,
    pub oracle: bool,
    /// Worker threads, `0` for automatic. Not part of the config hash.
    #[serde(skip_serializing)]
    pub threads: usize,
    /// Output path. Not part of the config hash.
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    pub source: SourceConfig,
    pub scan: ScanConfig,
    pub verify: VerifyConfig,
    pub fd_oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            interface_radius: 1.0,
            truncation_radius: 4.0,
            mode_cutoff: 8,
            grid_points: 400,
            potential: PotentialConfig::default(),
            lambda: Vec::new(),
            modes: None,
            seed: 0,
            oracle: false,
            threads: 0,
            output: None,
            source: SourceConfig::default(),
            scan: ScanConfig::default(),
            verify: VerifyConfig::default(),
            fd_oracle: OracleConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| KreinError::InvalidSpec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KreinError::InvalidSpec(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn potential(&self) -> RadialPotential {
        RadialPotential {
            segments: self
                .potential
                .segments
                .iter()
                .map(|s| PotentialSegment {
                    r_left: s.r_left,
                    r_right: s.r_right,
                    value: Complex64::new(s.re, s.im),
                })
                .collect(),
        }
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec::new(
            self.interface_radius,
            self.truncation_radius,
            self.mode_cutoff,
            self.grid_points,
            self.potential(),
        )
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.lambda.iter().map(|l| Complex64::new(l[0], l[1])).collect()
    }

    /// Configured modes, or `-M..=M`.
    pub fn mode_list(&self) -> Vec<i32> {
        self.modes
            .clone()
            .unwrap_or_else(|| self.problem_spec().modes().collect())
    }

    /// Spec validation plus checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        let report = validate_spec(&self.problem_spec());
        let mut violations = report.violations;
        if let Some(modes) = &self.modes {
            let cutoff = self.mode_cutoff as i32;
            for m in modes {
                if m.abs() > cutoff {
                    violations.push(format!("mode {m} exceeds mode_cutoff {cutoff}"));
                }
            }
            if modes.is_empty() {
                violations.push("mode list is empty".into());
            }
        }
        for l in &self.lambda {
            if !l[0].is_finite() || !l[1].is_finite() {
                violations.push("lambda values must be finite".into());
            }
        }
        if self.verify.pairs == 0 {
            violations.push("verify.pairs must be positive".into());
        }
        if !(self.verify.discrete_box > 1.0) {
            violations.push("verify.discrete_box must exceed 1".into());
        }
        if self.fd_oracle.levels == 0 || self.fd_oracle.points_per_unit == 0 {
            violations.push("fd_oracle needs positive points_per_unit and levels".into());
        }
        if let SourceConfig::Image { mode, width, .. } = &self.source {
            if mode.unsigned_abs() > self.mode_cutoff {
                violations.push(format!("source mode {mode} exceeds mode_cutoff"));
            }
            if !(*width > 0.0) {
                violations.push("source width must be positive".into());
            }
        }
        if let SourceConfig::Gaussian { terms } = &self.source {
            for t in terms {
                if t.mode.unsigned_abs() > self.mode_cutoff || !(t.center > 0.0) || !(t.width > 0.0) {
                    violations.push(format!("invalid gaussian source term {t:?}"));
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(KreinError::InvalidSpec(violations.join("; ")))
        }
    }

    /// Hex SHA-256 of the canonical JSON form, excluding threads and output path.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The `Random` and `Gaussian` sources; `None` for the λ-dependent image source.
    pub fn fixed_source(&self) -> Option<SourceProfile> {
        match &self.source {
            SourceConfig::Random => Some(SourceProfile::random(
                self.seed,
                self.mode_cutoff,
                self.interface_radius,
            )),
            SourceConfig::Gaussian { terms } => Some(SourceProfile { terms: terms.clone() }),
            SourceConfig::Image { .. } => None,
        }
    }

    pub fn image_source(&self) -> Option<ImageProfile> {
        match self.source {
            SourceConfig::Image { mode, amplitude, width } => Some(ImageProfile {
                mode,
                amplitude: Complex64::new(amplitude[0], amplitude[1]),
                width,
            }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
interface_radius = 1.0
truncation_radius = 4.0
mode_cutoff = 4
grid_points = 120
lambda = [[-2.0, 0.5], [-1.0, 0.0]]
seed = 3

[[potential.segments]]
r_left = 0.0
r_right = 1.0
re = 2.0
im = 1.0

[scan]
re_min = -10.0
re_max = -0.5
im_min = -3.0
im_max = 1.0
re_cells = 6
im_cells = 3
cut_band = 1e-3
"#;

    #[test]
    fn parses_example() {
        let c = RunConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(c.mode_cutoff, 4);
        assert_eq!(c.lambdas(), vec![Complex64::new(-2.0, 0.5), Complex64::new(-1.0, 0.0)]);
        assert_eq!(c.potential(), RadialPotential::disk(1.0, Complex64::new(2.0, 1.0)));
        assert_eq!(c.mode_list(), (-4..=4).collect::<Vec<_>>());
        c.validate().unwrap();
    }

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_toml("unknown_key = 1").is_err());
        assert!(RunConfig::from_toml("mode_cutoff = \"x\"").is_err());
        let mut c = RunConfig::default();
        c.truncation_radius = c.interface_radius;
        assert!(c.validate().is_err());
        let c = RunConfig {
            modes: Some(vec![99]),
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_threads_and_output() {
        let a = RunConfig::from_toml(EXAMPLE).unwrap();
        let mut b = a.clone();
        b.threads = 8;
        b.output = Some("x.csv".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 4;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn source_kinds() {
        let c = RunConfig::from_toml("[source]\nkind = \"image\"\nmode = 1\n").unwrap();
        assert!(c.fixed_source().is_none());
        assert_eq!(c.image_source().unwrap().width, 2.0);
        let c = RunConfig::from_toml(
            "[source]\nkind = \"gaussian\"\nterms = [{ mode = 0, side = \"interior\", amplitude = [1.0, 0.0], center = 0.5, width = 4.0 }]\n",
        )
        .unwrap();
        assert_eq!(c.fixed_source().unwrap().terms.len(), 1);
    }
}
