use std::path::{Path, PathBuf};

use rodlab::constructions::QuadrantGlueSpec;
use rodlab::geometry::{CrossSection, Grid, Shape};
use rodlab::material::{ElasticModel, MismatchSpec};
use rodlab::record::content_id;
use rodlab::solver::SolverConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Gamma,
    Sweep,
    Construct,
    Probe,
    Gammaconv,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gamma => "gamma",
            Command::Sweep => "sweep",
            Command::Construct => "construct",
            Command::Probe => "probe",
            Command::Gammaconv => "gammaconv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<[f64; 3]>,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self { p: ElasticModel::DEFAULT_P, alpha: None, zeta: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonConfig {
    pub curve: Vec<[f64; 2]>,
    pub direction: [f64; 3],
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlueConfig {
    pub mu: f64,
    #[serde(default = "two")]
    pub tiles_per_side: usize,
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub shape: Shape,
    pub r: f64,
    /// Defaults to `r`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    /// Defaults to `r / 16`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dislocation: Option<PolygonConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glue: Option<GlueConfig>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { shape: Shape::Disk, r: 1.0, half_length: None, spacing: None, dislocation: None, glue: None }
    }
}

impl GeometryConfig {
    pub fn cross_section(&self) -> CrossSection {
        CrossSection { shape: self.shape, half_extent: self.r }
    }
    pub fn half_length(&self) -> f64 {
        self.half_length.unwrap_or(self.r)
    }
    pub fn spacing(&self) -> f64 {
        self.spacing.unwrap_or(self.r / 16.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    RigidityClassic,
    RigidityTruncated,
    Poincare,
    Pointwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Ramp,
    Glue,
    Recovery,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Also minimize at half lengths 2M and 4M (`gamma`).
    pub sensitivity: bool,
    pub r_list: Vec<f64>,
    pub cells_per_radius: usize,
    pub m_factor: f64,
    pub mu_cells: usize,
    pub tiles: Vec<usize>,
    pub construction: Construction,
    pub probes: Vec<ProbeKind>,
    pub samples: usize,
    /// Transverse spacing of the probe domain (disk of radius 1, half length 1).
    pub probe_spacing: f64,
    /// `G = g_scale · I` for the pointwise probe.
    pub g_scale: f64,
    pub h_list: Vec<f64>,
    /// Half length of the thin rod in the trend.
    pub trend_half_length: f64,
    /// Break point of the left rotation band.
    pub trend_break: f64,
    /// Angle of the left rotation band about `e₁`.
    pub trend_angle: f64,
    /// Also minimize from each recovery field.
    pub trend_minimize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sensitivity: false,
            r_list: vec![1.0, 2.0, 4.0, 8.0],
            cells_per_radius: 16,
            m_factor: 1.0,
            mu_cells: 2,
            tiles: vec![2],
            construction: Construction::Ramp,
            probes: vec![ProbeKind::RigidityClassic, ProbeKind::RigidityTruncated, ProbeKind::Poincare, ProbeKind::Pointwise],
            samples: 100,
            probe_spacing: 0.25,
            g_scale: 5.0,
            h_list: vec![0.125, 0.0625, 0.03125],
            trend_half_length: 1.0,
            trend_break: -0.6,
            trend_angle: 0.02,
            trend_minimize: false,
        }
    }
}

/// Configuration problem with the 1-based line it refers to, if known.
#[derive(Debug, thiserror::Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]` (top level when `section` is empty).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        let matches_key = line
            .split_once('=')
            .map(|(k, _)| k.trim() == key)
            .unwrap_or(false);
        if matches_key && current == section {
            return Some(i + 1);
        }
    }
    None
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { line: None, message: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Hash of everything that affects results (the output directory does not).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = None;
        content_id(canonical.to_toml().as_bytes())[..16].to_string()
    }

    pub fn model(&self) -> rodlab::Result<ElasticModel> {
        let m = &self.material;
        let mismatch = match (m.alpha, m.zeta) {
            (Some(_), Some(_)) => {
                return Err(rodlab::Error::Model("give either alpha or zeta, not both".into()));
            }
            (None, Some(z)) => MismatchSpec::from_zeta(z)?,
            (a, None) => MismatchSpec::from_alpha(a.unwrap_or(ElasticModel::DEFAULT_ALPHA))?,
        };
        ElasticModel::new(mismatch, m.p)
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let err = |section: &str, key: &str, message: String| ConfigError { line: locate(text, section, key), message };
        if let Err(e) = self.model() {
            let key = if self.material.zeta.is_some() && self.material.alpha.is_none() {
                "zeta"
            } else if matches!(e, rodlab::Error::Mismatch(_)) {
                "alpha"
            } else {
                "p"
            };
            return Err(err("material", key, format!("material.{key}: {e}")));
        }
        let g = &self.geometry;
        if !(g.r > 0.0 && g.r.is_finite()) {
            return Err(err("geometry", "r", format!("geometry.r = {} must be positive", g.r)));
        }
        if self.needs_grid() {
            if let Err(e) = Grid::build(g.cross_section(), g.half_length(), g.spacing()) {
                return Err(err("geometry", "spacing", format!("geometry: {e}")));
            }
        }
        if let Some(glue) = &g.glue {
            let spec = QuadrantGlueSpec { r: g.r, mu: glue.mu, m: g.half_length(), tiles_per_side: glue.tiles_per_side };
            if let Err(e) = spec.validate(g.spacing()) {
                return Err(err("geometry.glue", "mu", format!("geometry.glue: {e}")));
            }
        }
        if g.glue.is_some() && g.dislocation.is_some() {
            return Err(err("geometry.glue", "mu", "give either a dislocation polygon or a glue, not both".into()));
        }
        if let Err(e) = self.solver.validate() {
            return Err(err("solver", "grad_tol", format!("solver: {e}")));
        }
        let x = &self.experiment;
        match self.command {
            Command::Sweep => {
                if x.r_list.len() < 4 || x.r_list.windows(2).any(|w| w[1] <= w[0]) || x.r_list[0] <= 0.0 {
                    return Err(err("experiment", "r_list", "experiment.r_list must be positive, increasing, with at least four entries".into()));
                }
                if x.cells_per_radius < 2 || x.mu_cells == 0 || x.tiles.is_empty() || !(x.m_factor > 0.0) {
                    return Err(err("experiment", "cells_per_radius", "experiment: sweep resolution settings are invalid".into()));
                }
            }
            Command::Probe => {
                if x.samples < 10 {
                    return Err(err("experiment", "samples", format!("experiment.samples = {} must be at least 10", x.samples)));
                }
                if Grid::build(CrossSection::disk(1.0), 1.0, x.probe_spacing).is_err() {
                    return Err(err("experiment", "probe_spacing", format!("experiment.probe_spacing = {} does not divide 1", x.probe_spacing)));
                }
            }
            Command::Gammaconv => {
                if x.h_list.is_empty() || x.h_list.windows(2).any(|w| w[1] >= w[0]) || x.h_list.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
                    return Err(err("experiment", "h_list", "experiment.h_list must be decreasing within (0, 1]".into()));
                }
            }
            Command::Gamma | Command::Construct => {}
        }
        Ok(())
    }

    fn needs_grid(&self) -> bool {
        matches!(self.command, Command::Gamma | Command::Construct | Command::Gammaconv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let text = "command = \"sweep\"\n[material]\nalpha = 0.04\n[experiment]\nr_list = [1.0, 2.0, 3.0, 4.0]\n";
        let cfg = RunConfig::parse(text).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let text = "command = \"gamma\"\n[solver]\ngrad_tol = 1e-5\nbogus = 3\n";
        let e = RunConfig::parse(text).unwrap_err();
        assert_eq!(e.line, Some(4), "{e}");
    }

    #[test]
    fn bad_alpha_cites_determinant() {
        let text = "command = \"gamma\"\n\n[material]\np = 1.5\nalpha = 1.2\n";
        let e = RunConfig::parse(text).unwrap_err();
        assert_eq!(e.line, Some(5));
        assert!(e.message.contains("det H > 0"), "{e}");
    }
}
