//! Generalized distance-squared mappings
//! `G_(p,A)(x) = (sum_j a_ij (x_j - p_ij)^2)_i` and their reduction to a
//! linear perturbation of the pure quadratic map `F_i(x) = sum_j a_ij x_j^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::{default_vars, BoxDomain, MapProgram, ProgramBuilder, SearchBox};
use crate::error::{Error, Result};
use crate::linalg;
use crate::maps::LinearMap;
use crate::rng;
use crate::singular::{
    find_double_points, find_singular_points, Classification, SingularPoint, Tolerances,
};

/// Smallest admissible `|a_ij|`.
pub const MIN_ENTRY: f64 = 1e-9;

/// `A` (`l x m`, no zero entries) and the central point `p` (`l` rows of `m`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct GdsmSpec {
    a: LinearMap,
    p: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    a: LinearMap,
    p: Vec<Vec<f64>>,
}

impl TryFrom<RawSpec> for GdsmSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        GdsmSpec::new(raw.a, raw.p)
    }
}

impl From<GdsmSpec> for RawSpec {
    fn from(s: GdsmSpec) -> Self {
        RawSpec { a: s.a, p: s.p }
    }
}

fn check_entries(a: &LinearMap) -> Result<()> {
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let v = a.get(i, j);
            if v.is_nan() || v.abs() < MIN_ENTRY {
                return Err(Error::InvalidSpec(format!("a[{i}][{j}] = {v} is (nearly) zero")));
            }
        }
    }
    Ok(())
}

impl GdsmSpec {
    pub fn new(a: LinearMap, p: Vec<Vec<f64>>) -> Result<GdsmSpec> {
        check_entries(&a)?;
        if p.len() != a.rows() || p.iter().any(|row| row.len() != a.cols()) {
            return Err(Error::InvalidSpec(format!(
                "central point must have {} rows of length {}",
                a.rows(),
                a.cols()
            )));
        }
        if p.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("central point has a non-finite entry".into()));
        }
        Ok(GdsmSpec { a, p })
    }

    /// Source dimension.
    pub fn m(&self) -> usize {
        self.a.cols()
    }

    /// Target dimension.
    pub fn ell(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &LinearMap {
        &self.a
    }

    pub fn p(&self) -> &[Vec<f64>] {
        &self.p
    }
}

/// The program `x -> (sum_j a_ij (x_j - p_ij)^2)_i` on all of `R^m`.
pub fn build_gdsm(spec: &GdsmSpec) -> MapProgram {
    let (m, ell) = (spec.m(), spec.ell());
    let mut b = ProgramBuilder::new(m);
    let outputs = (0..ell)
        .map(|i| {
            let terms: Vec<(f64, usize)> = (0..m)
                .map(|j| {
                    let c = spec.p[i][j];
                    let shifted = if c == 0.0 {
                        j
                    } else {
                        let k = b.constant(c);
                        b.sub(j, k)
                    };
                    (spec.a.get(i, j), b.powi(shifted, 2))
                })
                .collect();
            b.add_linear(None, &terms)
        })
        .collect();
    b.finish(default_vars(m), BoxDomain::whole(m), outputs)
}

/// `psi(p)_ij = -2 a_ij p_ij`.
pub fn psi(spec: &GdsmSpec) -> LinearMap {
    let (ell, m) = (spec.ell(), spec.m());
    let data: Vec<f64> = (0..ell)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| -2.0 * spec.a.get(i, j) * spec.p[i][j])
        .collect();
    LinearMap::from_row_slice(ell, m, &data).expect("shape is consistent")
}

/// Inverse of [`psi`]: `p_ij = -alpha_ij / (2 a_ij)`.
pub fn psi_inverse(alpha: &LinearMap, a: &LinearMap) -> Result<Vec<Vec<f64>>> {
    check_entries(a)?;
    if alpha.rows() != a.rows() || alpha.cols() != a.cols() {
        return Err(Error::shape(format!(
            "alpha is {}x{}, A is {}x{}",
            alpha.rows(),
            alpha.cols(),
            a.rows(),
            a.cols()
        )));
    }
    Ok((0..a.rows())
        .map(|i| (0..a.cols()).map(|j| -alpha.get(i, j) / (2.0 * a.get(i, j))).collect())
        .collect())
}

/// `G_(p,A) = F_alpha + shift` with `F` the pure quadratic part.
#[derive(Debug, Clone)]
pub struct GdsmReduction {
    pub f: MapProgram,
    pub alpha: LinearMap,
    pub shift: Vec<f64>,
}

pub fn reduce_gdsm(spec: &GdsmSpec) -> GdsmReduction {
    let centered = GdsmSpec {
        a: spec.a.clone(),
        p: vec![vec![0.0; spec.m()]; spec.ell()],
    };
    let shift = (0..spec.ell())
        .map(|i| (0..spec.m()).map(|j| spec.a.get(i, j) * spec.p[i][j].powi(2)).sum())
        .collect();
    GdsmReduction {
        f: build_gdsm(&centered),
        alpha: psi(spec),
        shift,
    }
}

/// Search box heuristic: centered at the mean of the rows of `p`, half-width
/// `4 (1 + max |p_ij|)`.
pub fn default_box(spec: &GdsmSpec) -> SearchBox {
    let m = spec.m();
    let ell = spec.ell() as f64;
    let center: Vec<f64> = (0..m).map(|j| spec.p.iter().map(|row| row[j]).sum::<f64>() / ell).collect();
    let pmax = spec.p.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    SearchBox::centered(&center, 4.0 * (1.0 + pmax)).expect("finite central point")
}

/// Which statement an experiment checks, chosen from the shape and rank of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuspVariant {
    /// Plane to plane, rank 2: one cusp, folds elsewhere.
    PlaneRank2,
    /// Plane to plane, rank 1: folds only.
    PlaneRank1,
    /// Plane to space, rank 2: one cross-cap and transverse double points.
    Umbrella,
}

impl CuspVariant {
    pub fn for_matrix(a: &LinearMap) -> Result<CuspVariant> {
        check_entries(a)?;
        let (rank, margin, threshold) = linalg::rank_with_margin(a.matrix());
        if margin < 10.0 {
            let value = linalg::singular_values(a.matrix())
                .into_iter()
                .min_by(|x, y| (x / threshold).ln().abs().total_cmp(&(y / threshold).ln().abs()))
                .unwrap_or(0.0);
            return Err(Error::IndeterminateRank { value, threshold });
        }
        match (a.rows(), a.cols(), rank) {
            (2, 2, 2) => Ok(CuspVariant::PlaneRank2),
            (2, 2, 1) => Ok(CuspVariant::PlaneRank1),
            (3, 2, 2) => Ok(CuspVariant::Umbrella),
            (r, c, k) => Err(Error::UnsupportedStratum(format!(
                "distance-squared experiments cover 2x2 and 3x2 matrices of full or unit rank, got {r}x{c} of rank {k}"
            ))),
        }
    }
}

/// Settings of [`cusp_count_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CuspExperiment {
    pub n_samples: usize,
    pub seed: u64,
    /// Scale of the Gaussian central point.
    pub sigma: f64,
    pub grid: usize,
    /// Fixed search box; when absent, [`default_box`] is used per sample.
    #[serde(rename = "box")]
    pub search_box: Option<SearchBox>,
    pub tolerances: Tolerances,
}

impl Default for CuspExperiment {
    fn default() -> Self {
        CuspExperiment {
            n_samples: 50,
            seed: 42,
            sigma: 1.0,
            grid: 48,
            search_box: None,
            tolerances: Tolerances::default(),
        }
    }
}

/// One sampled central point and what was found for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspSample {
    pub sample_index: usize,
    pub p: Vec<Vec<f64>>,
    /// Box actually searched, after any expansions.
    #[serde(rename = "box")]
    pub search_box: SearchBox,
    pub box_expansions: usize,
    pub points: Vec<SingularPoint>,
    pub cusp_count: usize,
    pub cross_cap_count: usize,
    /// Every singular point other than the expected special one is a fold.
    pub fold_only_elsewhere: bool,
    pub double_points: usize,
    pub double_points_transverse: bool,
    pub min_margin: Option<f64>,
    pub boundary_margin: Option<f64>,
    pub pass: bool,
}

/// Samples central points and checks the singularities of each `G_(p,A)`
/// against the statement selected by [`CuspVariant::for_matrix`].
pub fn cusp_count_experiment(a: &LinearMap, cfg: &CuspExperiment) -> Result<Vec<CuspSample>> {
    let variant = CuspVariant::for_matrix(a)?;
    if cfg.n_samples == 0 {
        return Err(Error::Precondition("n_samples must be at least 1".into()));
    }
    (0..cfg.n_samples)
        .into_par_iter()
        .map(|k| cusp_sample(a, variant, cfg, k))
        .collect()
}

pub(crate) fn sample_spec(a: &LinearMap, seed: u64, index: usize, sigma: f64) -> Result<GdsmSpec> {
    let p = rng::normal_matrix(&mut rng::stream(seed, index as u64), a.rows(), a.cols(), sigma)?;
    GdsmSpec::new(a.clone(), p.to_rows())
}

/// How many times the search box may be widened (by [`BOX_GROWTH`] about its
/// center) when the expected cusp or cross-cap is not inside it.
pub const MAX_BOX_EXPANSIONS: usize = 2;
pub const BOX_GROWTH: f64 = 4.0;

fn cusp_sample(a: &LinearMap, variant: CuspVariant, cfg: &CuspExperiment, k: usize) -> Result<CuspSample> {
    let spec = sample_spec(a, cfg.seed, k, cfg.sigma)?;
    cusp_sample_for(&spec, variant, cfg, k)
}

pub(crate) fn cusp_sample_for(
    spec: &GdsmSpec,
    variant: CuspVariant,
    cfg: &CuspExperiment,
    k: usize,
) -> Result<CuspSample> {
    let g = build_gdsm(spec);
    let mut bbox = cfg.search_box.clone().unwrap_or_else(|| default_box(spec));
    let mut expansions = 0;
    let search = loop {
        let search = find_singular_points(&g, &bbox, cfg.grid, &cfg.tolerances)?;
        let special = match variant {
            CuspVariant::PlaneRank2 => Classification::Cusp,
            CuspVariant::Umbrella => Classification::CrossCap,
            CuspVariant::PlaneRank1 => break search,
        };
        if expansions == MAX_BOX_EXPANSIONS || search.points.iter().any(|sp| sp.classification == special) {
            break search;
        }
        bbox = bbox.expanded(BOX_GROWTH);
        expansions += 1;
    };
    let count = |c: Classification| search.points.iter().filter(|sp| sp.classification == c).count();
    let cusp_count = count(Classification::Cusp);
    let cross_cap_count = count(Classification::CrossCap);
    let folds = count(Classification::Fold);
    let (double_points, transverse) = if variant == CuspVariant::Umbrella {
        let d = find_double_points(&g, &bbox, cfg.grid, &cfg.tolerances)?;
        (d.len(), d.iter().all(|dp| dp.crossing_transverse))
    } else {
        (0, true)
    };
    let special = match variant {
        CuspVariant::PlaneRank2 => cusp_count,
        CuspVariant::PlaneRank1 => 0,
        CuspVariant::Umbrella => cross_cap_count,
    };
    let fold_only_elsewhere = folds + special == search.points.len();
    let pass = match variant {
        CuspVariant::PlaneRank2 => cusp_count == 1 && fold_only_elsewhere,
        CuspVariant::PlaneRank1 => cusp_count == 0 && fold_only_elsewhere,
        CuspVariant::Umbrella => search.points.len() == 1 && cross_cap_count == 1 && transverse,
    };
    Ok(CuspSample {
        sample_index: k,
        p: spec.p().to_vec(),
        search_box: bbox,
        box_expansions: expansions,
        min_margin: search.points.iter().map(|sp| sp.margin).reduce(f64::min),
        boundary_margin: search.boundary_margin,
        points: search.points,
        cusp_count,
        cross_cap_count,
        fold_only_elsewhere,
        double_points,
        double_points_transverse: transverse,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(a: &[Vec<f64>], p: &[Vec<f64>]) -> GdsmSpec {
        GdsmSpec::new(LinearMap::from_rows(a).unwrap(), p.to_vec()).unwrap()
    }

    #[test]
    fn scalar_example() {
        let s = spec(&[vec![1.0]], &[vec![3.0]]);
        let g = build_gdsm(&s);
        assert_eq!(g.eval(&[5.0]).unwrap(), vec![4.0]);
        let r = reduce_gdsm(&s);
        assert_eq!(r.alpha.flatten(), vec![-6.0]);
        assert_eq!(r.shift, vec![9.0]);
        assert_eq!(r.f.eval(&[5.0]).unwrap(), vec![25.0]);
        assert_eq!(psi_inverse(&r.alpha, s.a()).unwrap(), vec![vec![3.0]]);
    }

    #[test]
    fn zero_center() {
        let s = spec(&[vec![1.0, -2.0], vec![0.5, 3.0]], &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let r = reduce_gdsm(&s);
        assert!(r.alpha.flatten().iter().all(|&v| v == 0.0));
        assert_eq!(r.shift, vec![0.0, 0.0]);
        assert_eq!(r.f, build_gdsm(&s));
        let zero = LinearMap::zeros(2, 2);
        assert_eq!(psi_inverse(&zero, s.a()).unwrap(), vec![vec![0.0, 0.0]; 2]);
    }

    #[test]
    fn lorentzian_and_plain_distance_squared() {
        let p = vec![vec![1.0, 2.0], vec![-1.0, 0.5]];
        let d = build_gdsm(&spec(&[vec![1.0, 1.0], vec![1.0, 1.0]], &p));
        let l = build_gdsm(&spec(&[vec![-1.0, 1.0], vec![-1.0, 1.0]], &p));
        let x = [0.3, -0.7];
        let dv = d.eval(&x).unwrap();
        let lv = l.eval(&x).unwrap();
        for i in 0..2 {
            let (u, v) = (x[0] - p[i][0], x[1] - p[i][1]);
            assert!((dv[i] - (u * u + v * v)).abs() < 1e-15);
            assert!((lv[i] - (-u * u + v * v)).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_specs() {
        let a = LinearMap::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(matches!(GdsmSpec::new(a.clone(), vec![vec![0.0, 0.0]]), Err(Error::InvalidSpec(_))));
        assert!(matches!(psi_inverse(&LinearMap::zeros(1, 2), &a), Err(Error::InvalidSpec(_))));
        let a = LinearMap::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(GdsmSpec::new(a, vec![vec![0.0]]).is_err());
    }

    #[test]
    fn spec_json_is_validated() {
        let ok: GdsmSpec = serde_json::from_str(r#"{"a": [[1.0, 2.0]], "p": [[0.5, 1.5]]}"#).unwrap();
        assert_eq!(ok.m(), 2);
        assert!(serde_json::from_str::<GdsmSpec>(r#"{"a": [[0.0]], "p": [[1.0]]}"#).is_err());
    }

    #[test]
    fn variants() {
        let m = |rows: &[Vec<f64>]| LinearMap::from_rows(rows).unwrap();
        assert_eq!(
            CuspVariant::for_matrix(&m(&[vec![1.0, 2.0], vec![3.0, 1.0]])).unwrap(),
            CuspVariant::PlaneRank2
        );
        assert_eq!(
            CuspVariant::for_matrix(&m(&[vec![1.0, 2.0], vec![2.0, 4.0]])).unwrap(),
            CuspVariant::PlaneRank1
        );
        assert_eq!(
            CuspVariant::for_matrix(&m(&[vec![1.0, 2.0], vec![3.0, 1.0], vec![-1.0, 1.0]])).unwrap(),
            CuspVariant::Umbrella
        );
        assert!(CuspVariant::for_matrix(&m(&[vec![1.0, 2.0, 3.0]])).is_err());
    }
}
