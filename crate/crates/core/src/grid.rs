//! Uniform hash grid over point indices.
//!
//! Any two points at sup-distance `< cell` lie in cells whose integer
//! coordinates differ by at most one, so a query at radius `r <= cell` only
//! has to visit the `3^D` neighboring cells. Euclidean distance dominates the
//! sup distance, so the same holds for euclidean balls.

use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct HashGrid {
    cell: f64,
    origin: Vec<f64>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl HashGrid {
    pub fn new(origin: &[f64], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell must be positive");
        HashGrid { cell, origin: origin.to_vec(), cells: HashMap::new() }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().zip(&self.origin).map(|(v, o)| ((v - o) / self.cell).floor() as i64).collect()
    }

    pub fn insert(&mut self, x: &[f64], id: usize) {
        let k = self.key(x);
        self.cells.entry(k).or_default().push(id);
    }

    pub fn len_cells(&self) -> usize {
        self.cells.len()
    }

    /// Calls `f` for every id stored within `reach` cells of `x`'s cell.
    pub fn for_each_near(&self, x: &[f64], reach: i64, mut f: impl FnMut(usize)) {
        let center = self.key(x);
        let dim = center.len();
        let mut offset = vec![-reach; dim];
        let mut probe = center.clone();
        loop {
            for i in 0..dim {
                probe[i] = center[i] + offset[i];
            }
            if let Some(ids) = self.cells.get(&probe) {
                ids.iter().for_each(|&id| f(id));
            }
            let mut i = 0;
            loop {
                if i == dim {
                    return;
                }
                offset[i] += 1;
                if offset[i] <= reach {
                    break;
                }
                offset[i] = -reach;
                i += 1;
            }
        }
    }

    /// Number of cells within `reach` of a cell, i.e. `(2 reach + 1)^D`.
    pub fn neighborhood_size(&self, reach: i64) -> usize {
        ((2 * reach + 1) as usize).pow(self.origin.len() as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_include_close_points() {
        let mut g = HashGrid::new(&[0.0, 0.0], 0.1);
        g.insert(&[0.05, 0.05], 0);
        g.insert(&[0.14, 0.05], 1);
        g.insert(&[0.5, 0.5], 2);
        let mut seen = vec![];
        g.for_each_near(&[0.06, 0.06], 1, |i| seen.push(i));
        seen.sort();
        assert_eq!(seen, vec![0, 1]);
    }
}
