use serde::Serialize;

use crate::metric::{BoxRegion, Point};

/// The 0/1 process `1{X_n ∈ A}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndicatorProcess {
    flags: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndicatorStats {
    /// `k(n)` for `n = 1..=len`.
    pub k: Vec<usize>,
    /// `τ_j`, the 1-based round of the `j`-th hit.
    pub stopping_times: Vec<usize>,
    pub rate: f64,
}

impl IndicatorProcess {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        IndicatorProcess { flags }
    }

    pub fn from_membership(points: &[Point], region: &BoxRegion) -> Self {
        IndicatorProcess { flags: points.iter().map(|p| region.contains(p)).collect() }
    }

    pub fn push(&mut self, hit: bool) {
        self.flags.push(hit);
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    /// Number of hits among the first `n` rounds.
    pub fn k(&self, n: usize) -> usize {
        self.flags[..n.min(self.flags.len())].iter().filter(|&&f| f).count()
    }

    /// Round of the `j`-th hit (1-based), if it happened.
    pub fn stopping_time(&self, j: usize) -> Option<usize> {
        if j == 0 {
            return None;
        }
        self.flags.iter().enumerate().filter(|(_, &f)| f).nth(j - 1).map(|(i, _)| i + 1)
    }

    pub fn stats(&self) -> IndicatorStats {
        let mut k = Vec::with_capacity(self.flags.len());
        let mut taus = Vec::new();
        let mut acc = 0;
        for (i, &f) in self.flags.iter().enumerate() {
            if f {
                acc += 1;
                taus.push(i + 1);
            }
            k.push(acc);
        }
        let rate = if self.flags.is_empty() { 0.0 } else { acc as f64 / self.flags.len() as f64 };
        IndicatorStats { k, stopping_times: taus, rate }
    }
}
