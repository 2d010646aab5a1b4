//! Pipeline configuration and its flat `key = value` text form.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tunable parameters for every pipeline stage.
///
/// `alpha`, `beta` and `sigma_inlier` default to the published values; every
/// other default is an engineering choice.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Occupied-kernel standard deviation, meters.
    pub sigma_o: f64,
    /// Free-kernel standard deviation, meters.
    pub sigma_f: f64,
    pub tau_l: f64,
    pub tau_g: f64,
    pub k_uncertainty: f64,
    pub knn: usize,
    pub free_sample_step: f64,
    /// Free samples stop this far short of the ray endpoint.
    pub endpoint_margin: f64,
    pub nn_radius: f64,
    pub density_radius: f64,
    pub density_saturation: f64,
    pub voxel_size: f64,
    pub sigma_inlier: f64,
    pub max_range: f64,
    pub coverage_cell: f64,
    pub match_radius: f64,
    pub passes: usize,
    /// Voxel-compact the aggregated session map and the merged lifelong map.
    pub compact: bool,
    pub gicp_max_iterations: usize,
    pub gicp_neighbors: usize,
    pub gicp_max_correspondence: f64,
    pub scan_voxel: f64,
    pub loop_gate: f64,
    pub max_failed_fraction: f64,
    pub heatmap_floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 0.5,
            beta: 0.1,
            sigma_o: 0.1,
            sigma_f: 0.12,
            tau_l: 0.5,
            tau_g: 0.7,
            k_uncertainty: 0.6,
            knn: 6,
            free_sample_step: 0.15,
            endpoint_margin: 0.5,
            nn_radius: 0.2,
            density_radius: 0.5,
            density_saturation: 20.0,
            voxel_size: 0.1,
            sigma_inlier: 0.5,
            max_range: 80.0,
            coverage_cell: 1.0,
            match_radius: 0.05,
            passes: 1,
            compact: true,
            gicp_max_iterations: 50,
            gicp_neighbors: 20,
            gicp_max_correspondence: 1.0,
            scan_voxel: 0.2,
            loop_gate: 0.3,
            max_failed_fraction: 0.3,
            heatmap_floor: 0.1,
        }
    }
}

enum Field<'a> {
    Real(&'a mut f64),
    Count(&'a mut usize),
    Flag(&'a mut bool),
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 27] = [
        "alpha",
        "beta",
        "sigma_o",
        "sigma_f",
        "tau_l",
        "tau_g",
        "k_uncertainty",
        "knn",
        "free_sample_step",
        "endpoint_margin",
        "nn_radius",
        "density_radius",
        "density_saturation",
        "voxel_size",
        "sigma_inlier",
        "max_range",
        "coverage_cell",
        "match_radius",
        "passes",
        "compact",
        "gicp_max_iterations",
        "gicp_neighbors",
        "gicp_max_correspondence",
        "scan_voxel",
        "loop_gate",
        "max_failed_fraction",
        "heatmap_floor",
    ];

    fn field(&mut self, key: &str) -> Option<Field<'_>> {
        Some(match key {
            "alpha" => Field::Real(&mut self.alpha),
            "beta" => Field::Real(&mut self.beta),
            "sigma_o" => Field::Real(&mut self.sigma_o),
            "sigma_f" => Field::Real(&mut self.sigma_f),
            "tau_l" => Field::Real(&mut self.tau_l),
            "tau_g" => Field::Real(&mut self.tau_g),
            "k_uncertainty" => Field::Real(&mut self.k_uncertainty),
            "knn" => Field::Count(&mut self.knn),
            "free_sample_step" => Field::Real(&mut self.free_sample_step),
            "endpoint_margin" => Field::Real(&mut self.endpoint_margin),
            "nn_radius" => Field::Real(&mut self.nn_radius),
            "density_radius" => Field::Real(&mut self.density_radius),
            "density_saturation" => Field::Real(&mut self.density_saturation),
            "voxel_size" => Field::Real(&mut self.voxel_size),
            "sigma_inlier" => Field::Real(&mut self.sigma_inlier),
            "max_range" => Field::Real(&mut self.max_range),
            "coverage_cell" => Field::Real(&mut self.coverage_cell),
            "match_radius" => Field::Real(&mut self.match_radius),
            "passes" => Field::Count(&mut self.passes),
            "compact" => Field::Flag(&mut self.compact),
            "gicp_max_iterations" => Field::Count(&mut self.gicp_max_iterations),
            "gicp_neighbors" => Field::Count(&mut self.gicp_neighbors),
            "gicp_max_correspondence" => Field::Real(&mut self.gicp_max_correspondence),
            "scan_voxel" => Field::Real(&mut self.scan_voxel),
            "loop_gate" => Field::Real(&mut self.loop_gate),
            "max_failed_fraction" => Field::Real(&mut self.max_failed_fraction),
            "heatmap_floor" => Field::Real(&mut self.heatmap_floor),
            _ => return None,
        })
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match self.field(key) {
            None => Err(format!("unknown config key `{key}`")),
            Some(Field::Real(slot)) => {
                *slot = value
                    .parse()
                    .map_err(|_| format!("`{key}` expects a real number, got `{value}`"))?;
                Ok(())
            }
            Some(Field::Count(slot)) => {
                *slot = value
                    .parse()
                    .map_err(|_| format!("`{key}` expects a count, got `{value}`"))?;
                Ok(())
            }
            Some(Field::Flag(slot)) => {
                *slot = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(format!("`{key}` expects true/false, got `{value}`")),
                };
                Ok(())
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let mut copy = self.clone();
        let text = match copy.field(key)? {
            Field::Real(v) => format!("{v:?}"),
            Field::Count(v) => v.to_string(),
            Field::Flag(v) => v.to_string(),
        };
        Some(text)
    }

    /// Parses the `key = value` dialect on top of the defaults.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (number, line) in text.lines().enumerate() {
            let line = strip_comment(line);
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: number + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            config
                .set(key.trim(), value.trim())
                .map_err(parse_err)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    /// Stable 64-bit fingerprint of every field, embedded in archives.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_text().as_bytes());
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            problems.push("alpha must lie in (0,1)");
        }
        if !(self.beta >= 0.0 && self.beta <= self.alpha) {
            problems.push("beta must lie in [0, alpha]");
        }
        for (name, v) in [("tau_l", self.tau_l), ("tau_g", self.tau_g)] {
            if !(v > 0.0 && v < 1.0) {
                problems.push(if name == "tau_l" {
                    "tau_l must lie in (0,1)"
                } else {
                    "tau_g must lie in (0,1)"
                });
            }
        }
        if !(self.k_uncertainty > 0.0 && self.k_uncertainty <= 1.0) {
            problems.push("k_uncertainty must lie in (0,1]");
        }
        let lengths = [
            self.sigma_o,
            self.sigma_f,
            self.free_sample_step,
            self.nn_radius,
            self.density_radius,
            self.density_saturation,
            self.voxel_size,
            self.sigma_inlier,
            self.max_range,
            self.coverage_cell,
            self.match_radius,
            self.gicp_max_correspondence,
            self.scan_voxel,
        ];
        if lengths.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            problems.push("all lengths must be positive and finite");
        }
        if !(self.endpoint_margin >= 0.0) {
            problems.push("endpoint_margin must be non-negative");
        }
        if self.knn < 1 || self.gicp_neighbors < 3 || self.passes < 1 {
            problems.push("knn >= 1, gicp_neighbors >= 3 and passes >= 1 are required");
        }
        if !(self.max_failed_fraction >= 0.0 && self.max_failed_fraction <= 1.0) {
            problems.push("max_failed_fraction must lie in [0,1]");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(problems.join("; ")))
        }
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn text_roundtrip_preserves_every_field() {
        let mut config = PipelineConfig::default();
        config.sigma_o = 0.123456789;
        config.knn = 9;
        config.compact = false;
        let back = PipelineConfig::parse(&config.to_text(), Path::new("x")).unwrap();
        assert_eq!(config, back);
        assert_eq!(config.hash(), back.hash());
    }

    #[test]
    fn every_key_is_addressable() {
        let config = PipelineConfig::default();
        for key in PipelineConfig::KEYS {
            assert!(config.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header\n\nalpha = 0.4   # trailing\n  tau_g=0.6\n";
        let config = PipelineConfig::parse(text, Path::new("c")).unwrap();
        assert_eq!(config.alpha, 0.4);
        assert_eq!(config.tau_g, 0.6);
    }

    #[test]
    fn bad_line_reports_line_number() {
        let err = PipelineConfig::parse("alpha = 0.5\nbogus = 1\n", Path::new("c")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_ranges_rejected() {
        assert!(PipelineConfig::parse("beta = 0.6", Path::new("c")).is_err());
        assert!(PipelineConfig::parse("tau_l = 1.0", Path::new("c")).is_err());
        assert!(PipelineConfig::parse("knn = 0", Path::new("c")).is_err());
        assert!(PipelineConfig::parse("voxel_size = -1", Path::new("c")).is_err());
    }

    #[test]
    fn hash_changes_with_any_field() {
        let base = PipelineConfig::default();
        let mut other = base.clone();
        other.tau_g = 0.71;
        assert_ne!(base.hash(), other.hash());
    }
}
