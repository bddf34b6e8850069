//! Regular sampling grids over a search box.

use crate::dsl::SearchBox;

pub(crate) struct Grid {
    lo: Vec<f64>,
    step: Vec<f64>,
    cells: usize,
}

impl Grid {
    /// `cells` intervals per axis, so `cells + 1` nodes per axis.
    pub fn new(b: &SearchBox, cells: usize) -> Grid {
        Grid {
            lo: b.lo.clone(),
            step: b.widths().iter().map(|w| w / cells as f64).collect(),
            cells,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn max_step(&self) -> f64 {
        self.step.iter().copied().fold(0.0, f64::max)
    }

    pub fn n_nodes(&self) -> usize {
        (self.cells + 1).pow(self.dim() as u32)
    }

    fn multi(&self, mut idx: usize) -> Vec<usize> {
        let side = self.cells + 1;
        let mut out = vec![0; self.dim()];
        for v in out.iter_mut() {
            *v = idx % side;
            idx /= side;
        }
        out
    }

    fn flat(&self, multi: &[usize]) -> usize {
        let side = self.cells + 1;
        multi.iter().rev().fold(0, |acc, &v| acc * side + v)
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        self.multi(idx)
            .iter()
            .zip(self.lo.iter().zip(&self.step))
            .map(|(&k, (&lo, &h))| lo + k as f64 * h)
            .collect()
    }

    /// Indices of the nodes within one step in every coordinate, excluding `idx`.
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let m = self.multi(idx);
        let n = self.dim();
        let mut out = Vec::with_capacity(3usize.pow(n as u32) - 1);
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let mut nb = m.clone();
            let mut ok = true;
            for v in nb.iter_mut() {
                let d = c % 3;
                c /= 3;
                match d {
                    0 if *v == 0 => ok = false,
                    0 => *v -= 1,
                    2 if *v == self.cells => ok = false,
                    2 => *v += 1,
                    _ => {}
                }
            }
            if ok && nb != m {
                out.push(self.flat(&nb));
            }
        }
        out
    }

    /// Neighbors along the positive coordinate directions.
    pub fn forward_neighbors(&self, idx: usize) -> Vec<usize> {
        let m = self.multi(idx);
        (0..self.dim())
            .filter(|&k| m[k] < self.cells)
            .map(|k| {
                let mut nb = m.clone();
                nb[k] += 1;
                self.flat(&nb)
            })
            .collect()
    }

    /// Each cell as (center, corner node indices).
    pub fn cells(&self) -> impl Iterator<Item = (Vec<f64>, Vec<usize>)> + '_ {
        let n = self.dim();
        let total = self.cells.pow(n as u32);
        (0..total).map(move |mut c| {
            let mut base = vec![0; n];
            for v in base.iter_mut() {
                *v = c % self.cells;
                c /= self.cells;
            }
            let center = base
                .iter()
                .zip(self.lo.iter().zip(&self.step))
                .map(|(&k, (&lo, &h))| lo + (k as f64 + 0.5) * h)
                .collect();
            let corners = (0..1usize << n)
                .map(|bits| {
                    let corner: Vec<usize> = base
                        .iter()
                        .enumerate()
                        .map(|(k, &v)| v + ((bits >> k) & 1))
                        .collect();
                    self.flat(&corner)
                })
                .collect();
            (center, corners)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing() {
        let b = SearchBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let g = Grid::new(&b, 4);
        assert_eq!(g.n_nodes(), 25);
        assert_eq!(g.node(0), vec![0.0, -1.0]);
        assert_eq!(g.node(24), vec![1.0, 1.0]);
        assert_eq!(g.node(6), vec![0.25, -0.5]);
        assert_eq!(g.neighbors(0).len(), 3);
        assert_eq!(g.neighbors(12).len(), 8);
        assert_eq!(g.forward_neighbors(24).len(), 0);
        assert_eq!(g.cells().count(), 16);
        let (c, corners) = g.cells().next().unwrap();
        assert_eq!(c, vec![0.125, -0.75]);
        assert_eq!(corners, vec![0, 1, 5, 6]);
    }
}
