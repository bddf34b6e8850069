use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const WHOLE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn open(lo: f64, hi: f64) -> std::result::Result<Interval, String> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(format!("empty interval ({lo}, {hi})"));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn is_whole(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }
}

/// Product of open intervals: the domain of a map program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    intervals: Vec<Interval>,
}

impl BoxDomain {
    pub fn whole(n: usize) -> BoxDomain {
        BoxDomain {
            intervals: vec![Interval::WHOLE; n],
        }
    }

    pub fn new(intervals: Vec<Interval>) -> BoxDomain {
        BoxDomain { intervals }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub(crate) fn intervals_mut(&mut self) -> &mut [Interval] {
        &mut self.intervals
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.intervals.len()
            && self.intervals.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    pub fn is_whole(&self) -> bool {
        self.intervals.iter().all(Interval::is_whole)
    }

    /// True when the closed box lies inside this open box.
    pub fn contains_closed(&self, b: &SearchBox) -> bool {
        b.dim() == self.dim()
            && self
                .intervals
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .all(|(iv, (&lo, &hi))| iv.lo < lo && hi < iv.hi)
    }
}

impl fmt::Display for BoxDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "({}, {})", iv.lo, iv.hi)?;
        }
        Ok(())
    }
}

/// Closed, bounded box `[lo_i, hi_i]` used for searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<SearchBox> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::shape("search box bounds differ in length"));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::Precondition(format!(
                "search box must be finite and non-empty: {lo:?} .. {hi:?}"
            )));
        }
        Ok(SearchBox { lo, hi })
    }

    /// `[-h, h]^n`.
    pub fn cube(n: usize, half_width: f64) -> Result<SearchBox> {
        SearchBox::new(vec![-half_width; n], vec![half_width; n])
    }

    pub fn centered(center: &[f64], half_width: f64) -> Result<SearchBox> {
        SearchBox::new(
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&lo, &hi))| lo <= v && v <= hi)
    }

    /// Same box scaled by `factor` about its center.
    pub fn expanded(&self, factor: f64) -> SearchBox {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| {
                let c = 0.5 * (a + b);
                let h = 0.5 * (b - a) * factor;
                (c - h, c + h)
            })
            .unzip();
        SearchBox { lo, hi }
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    /// Distance from `x` to the nearest face, relative to the box width.
    pub fn boundary_margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| ((v - lo).min(hi - v)) / (hi - lo))
            .fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for SearchBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, b)) in self.lo.iter().zip(&self.hi).enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "[{a}, {b}]")?;
        }
        Ok(())
    }
}
