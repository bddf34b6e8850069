//! Singular points of maps between low-dimensional spaces: detection,
//! Thom-Boardman symbols, germ classification, transversality of the
//! corank-1 stratum, double points of surfaces in space, and an
//! infinitesimal stability test on truncated jets.

mod classify;
mod detect;
mod double;
pub(crate) mod grid;
pub(crate) mod local;
mod stability;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use classify::{analyze_point, check_transverse_corank1, classify_germ, tb_symbol, Transversality};
pub use detect::{find_singular_points, SingularSearch};
pub use double::{find_double_points, DoublePoint};
pub use stability::{infinitesimal_stability_check, StabilityResult};

/// Numerical tolerances shared by the search and classification routines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative singular-value threshold for rank decisions.
    pub rank_rtol: f64,
    /// A decision whose margin is below this factor counts as indeterminate.
    pub indeterminate_factor: f64,
    pub newton_max_iter: usize,
    /// Newton stops once the step is below `newton_step_tol * max(1, |x|)`.
    pub newton_step_tol: f64,
    /// Converged points closer than this are merged.
    pub dedup_radius: f64,
    /// Double-point pairs closer than this many grid spacings are rejected.
    pub separation_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rtol: crate::linalg::RANK_RTOL,
            indeterminate_factor: 10.0,
            newton_max_iter: 50,
            newton_step_tol: 1e-12,
            dedup_radius: 1e-6,
            separation_factor: 4.0,
        }
    }
}

impl Tolerances {
    pub(crate) fn threshold(&self, scale: f64) -> f64 {
        self.rank_rtol * scale.max(1.0)
    }
}

/// Germ classes recognised by [`classify_germ`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    MorseNondegenerate,
    DegenerateCritical,
    Fold,
    Cusp,
    CrossCap,
    Regular,
    Unclassified,
}

impl Classification {
    pub const ALL: [Classification; 7] = [
        Classification::MorseNondegenerate,
        Classification::DegenerateCritical,
        Classification::Fold,
        Classification::Cusp,
        Classification::CrossCap,
        Classification::Regular,
        Classification::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::MorseNondegenerate => "morse_nondegenerate",
            Classification::DegenerateCritical => "degenerate_critical",
            Classification::Fold => "fold",
            Classification::Cusp => "cusp",
            Classification::CrossCap => "cross_cap",
            Classification::Regular => "regular",
            Classification::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Classification::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown classification `{s}`"))
    }
}

/// Thom-Boardman symbol `(i_1, i_2, ...)`, non-increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TbSymbol(pub Vec<usize>);

impl TbSymbol {
    pub fn entries(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for TbSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for TbSymbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("malformed symbol `{s}`"))?;
        inner
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("malformed symbol `{s}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(TbSymbol)
    }
}

/// A point where the differential drops rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub location: Vec<f64>,
    /// `n_in - rank dg`.
    pub corank: usize,
    pub tb_symbol: TbSymbol,
    pub classification: Classification,
    /// Smallest `value / threshold` ratio (or its inverse) among the
    /// decisions behind the classification; near 1 means borderline.
    pub margin: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_text_round_trip() {
        let s: TbSymbol = "(1,1,0)".parse().unwrap();
        assert_eq!(s, TbSymbol(vec![1, 1, 0]));
        assert_eq!(s.to_string(), "(1,1,0)");
        assert!("1,0".parse::<TbSymbol>().is_err());
    }

    #[test]
    fn classification_names() {
        for c in Classification::ALL {
            assert_eq!(c.as_str().parse::<Classification>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.as_str()));
        }
    }
}
