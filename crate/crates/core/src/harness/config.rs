use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsl::{parse_map, MapProgram, SearchBox};
use crate::error::{Error, Result};
use crate::maps::LinearMap;
use crate::singular::Tolerances;

/// Which genericity statement a run checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Every critical point of `F_alpha o f : R^n -> R` is nondegenerate.
    MorseGenericity,
    /// `F_alpha o f : R^2 -> R^2` has only folds and cusps, on a transverse
    /// corank-1 stratum.
    PlaneExcellent,
    /// `F_alpha o f : R^2 -> R^3` has only cross-caps and transverse double
    /// points.
    SpacePinch,
    /// Distance-squared mappings with random central points.
    GdsmCusp,
    /// Round trip of the coordinate change on `(Lambda, alpha)` and the
    /// composition identity relating the graph embedding to `F_alpha`.
    IdentityChecks,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::MorseGenericity => "morse_genericity",
            ExperimentKind::PlaneExcellent => "plane_excellent",
            ExperimentKind::SpacePinch => "space_pinch",
            ExperimentKind::GdsmCusp => "gdsm_cusp",
            ExperimentKind::IdentityChecks => "identity_checks",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `n = dim N`, `m = dim` of the space containing `N`, `ell` = target dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub ell: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdsmConfig {
    pub a: LinearMap,
}

fn default_grid() -> usize {
    32
}

fn default_sigma() -> f64 {
    1.0
}

fn default_identity_points() -> usize {
    100
}

/// A self-contained experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// DSL sources keyed `F` (the map being perturbed) and `f` (the
    /// embedding, identity when absent).
    #[serde(default)]
    pub map_sources: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Dims>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub search_box: Option<SearchBox>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Diagnostic mode: every sample uses the zero perturbation.
    #[serde(default)]
    pub zero_perturbation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gdsm: Option<GdsmConfig>,
    /// Evaluation points per sample for `identity_checks`.
    #[serde(default = "default_identity_points")]
    pub identity_points: usize,
}

/// Parsed maps and dimensions of a validated configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub big_f: Option<MapProgram>,
    pub embedding: Option<MapProgram>,
    pub dims: Dims,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.prepare()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn source(&self, key: &str) -> Result<Option<MapProgram>> {
        self.map_sources
            .get(key)
            .map(|src| parse_map(src).map_err(|e| Error::Config(format!("map_sources.{key}: {e}"))))
            .transpose()
    }

    /// Checks the configuration and parses its maps.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if !self.zero_perturbation && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(k) = self.map_sources.keys().find(|k| *k != "F" && *k != "f") {
            return Err(Error::Config(format!("unknown map source `{k}` (expected `F` or `f`)")));
        }
        let prepared = if self.kind == ExperimentKind::GdsmCusp {
            let a = &self
                .gdsm
                .as_ref()
                .ok_or_else(|| Error::Config("gdsm_cusp needs a `gdsm` section with `a`".into()))?
                .a;
            Prepared {
                big_f: None,
                embedding: None,
                dims: Dims {
                    n: a.cols(),
                    m: a.cols(),
                    ell: a.rows(),
                },
            }
        } else {
            let big_f = self
                .source("F")?
                .ok_or_else(|| Error::Config(format!("{} needs map_sources.F", self.kind)))?;
            let embedding = self.source("f")?;
            let m = big_f.n_in();
            let n = match &embedding {
                Some(f) if f.n_out() != m => {
                    return Err(Error::Config(format!(
                        "f maps into R^{} but F is defined on R^{m}",
                        f.n_out()
                    )))
                }
                Some(f) => f.n_in(),
                None => m,
            };
            Prepared {
                dims: Dims {
                    n,
                    m,
                    ell: big_f.n_out(),
                },
                big_f: Some(big_f),
                embedding,
            }
        };
        let d = prepared.dims;
        if let Some(given) = self.dims {
            if given != d {
                return Err(Error::Config(format!(
                    "dims {given:?} disagree with the maps, which give {d:?}"
                )));
            }
        }
        let required = match self.kind {
            ExperimentKind::MorseGenericity => (d.ell == 1).then_some(()).ok_or("ell = 1"),
            ExperimentKind::PlaneExcellent => (d.n == 2 && d.ell == 2).then_some(()).ok_or("n = ell = 2"),
            ExperimentKind::SpacePinch => (d.n == 2 && d.ell == 3).then_some(()).ok_or("n = 2, ell = 3"),
            ExperimentKind::GdsmCusp | ExperimentKind::IdentityChecks => Ok(()),
        };
        if let Err(what) = required {
            return Err(Error::Config(format!("{} requires {what}, got {d:?}", self.kind)));
        }
        if self.kind != ExperimentKind::GdsmCusp {
            let b = self
                .search_box
                .as_ref()
                .ok_or_else(|| Error::Config(format!("{} needs a `box`", self.kind)))?;
            if b.dim() != d.n {
                return Err(Error::Config(format!("box has dimension {}, expected {}", b.dim(), d.n)));
            }
        }
        if self.grid < 2 {
            return Err(Error::Config(format!("grid must be at least 2, got {}", self.grid)));
        }
        if self.kind == ExperimentKind::IdentityChecks && self.identity_points == 0 {
            return Err(Error::Config("identity_points must be at least 1".into()));
        }
        Ok(prepared)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLANE: &str = r#"{
        "kind": "plane_excellent",
        "map_sources": {"F": "map (x,y) -> (x^2, y^2)"},
        "box": {"lo": [-3, -3], "hi": [3, 3]},
        "n_samples": 5,
        "seed": 1
    }"#;

    #[test]
    fn defaults_and_dims() {
        let cfg = ExperimentConfig::from_json(PLANE).unwrap();
        assert_eq!(cfg.grid, 32);
        assert_eq!(cfg.sigma, 1.0);
        assert_eq!(cfg.prepare().unwrap().dims, Dims { n: 2, m: 2, ell: 2 });
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json(PLANE).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            PLANE.replace("\"n_samples\": 5", "\"n_samples\": 0"),
            PLANE.replace("plane_excellent", "morse_genericity"),
            PLANE.replace("\"seed\": 1", "\"seed\": 1, \"sigma\": 0"),
            PLANE.replace("\"seed\": 1", "\"seed\": 1, \"colour\": 3"),
            PLANE.replace("\"F\"", "\"G\""),
            PLANE.replace("y^2)", "y^2"),
            PLANE.replace("\"box\": {\"lo\": [-3, -3], \"hi\": [3, 3]},", ""),
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn dims_must_match_maps() {
        let text = PLANE.replace("\"seed\": 1", "\"seed\": 1, \"dims\": {\"n\": 2, \"m\": 3, \"ell\": 2}");
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = PLANE.replace("\"seed\": 1", "\"seed\": 1, \"dims\": {\"n\": 2, \"m\": 2, \"ell\": 2}");
        assert!(ExperimentConfig::from_json(&text).is_ok());
    }

    #[test]
    fn gdsm_needs_matrix() {
        let text = r#"{"kind": "gdsm_cusp", "n_samples": 2, "seed": 3}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
        let text = r#"{"kind": "gdsm_cusp", "n_samples": 2, "seed": 3, "gdsm": {"a": [[1, 2], [3, 1]]}}"#;
        assert_eq!(ExperimentConfig::from_json(text).unwrap().prepare().unwrap().dims.ell, 2);
    }
}
