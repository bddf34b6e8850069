//! Reproducible random streams: one independent ChaCha stream per sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::maps::LinearMap;

/// The stream for sample `index` of a run seeded with `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `rows x cols` matrix of i.i.d. `N(0, sigma^2)` entries, drawn row by row.
pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, sigma: f64) -> Result<LinearMap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Precondition(format!("sigma must be positive, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Precondition(e.to_string()))?;
    let data: Vec<f64> = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    LinearMap::from_row_slice(rows, cols, &data)
}
