//! The reference measure ν: exact masses of boxes and sup-norm balls, Monte
//! Carlo elsewhere, and upper-doubling certification.

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{Ball, BoxRegion, MetricKind, MetricSpace, Point};
use crate::rng::{derive_seed, stream_rng, Rng};

/// Default sample count for Monte Carlo ball masses.
pub const DEFAULT_BALL_SAMPLES: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub exact: bool,
}

impl MassEstimate {
    pub fn exact(value: f64) -> Self {
        MassEstimate { value, stderr: 0.0, n_samples: 0, exact: true }
    }

    /// Estimate from `hits` out of `n` draws from a region of mass `scale`.
    pub fn from_hits(hits: usize, n: usize, scale: f64) -> Self {
        let p = hits as f64 / n as f64;
        MassEstimate { value: scale * p, stderr: scale * (p * (1.0 - p) / n as f64).sqrt(), n_samples: n, exact: false }
    }

    /// Upper confidence value `value + k·stderr`.
    pub fn upper(&self, k: f64) -> f64 {
        self.value + k * self.stderr
    }
}

/// A component of a mixture: normalized Lebesgue on `region`, with `weight`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedBox {
    pub weight: f64,
    pub region: BoxRegion,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum MeasureKind {
    /// Lebesgue measure on the domain, normalized to total mass 1.
    Lebesgue,
    Mixture(Vec<WeightedBox>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceMeasure {
    pub space: MetricSpace,
    pub kind: MeasureKind,
    total: f64,
}

impl ReferenceMeasure {
    pub fn lebesgue(space: &MetricSpace) -> Self {
        ReferenceMeasure { space: space.clone(), kind: MeasureKind::Lebesgue, total: 1.0 }
    }

    pub fn mixture(space: &MetricSpace, parts: Vec<WeightedBox>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("mixture needs at least one box"));
        }
        for p in &parts {
            if !(p.weight > 0.0) || !p.weight.is_finite() {
                return Err(Error::invalid("mixture weights must be positive"));
            }
            if p.region.dim() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), got: p.region.dim() });
            }
            let inside = space.domain.intersect(&p.region).map(|b| b == p.region).unwrap_or(false);
            if !inside || p.region.volume() <= 0.0 {
                return Err(Error::invalid("mixture boxes must lie in the domain with positive volume"));
            }
        }
        let total = parts.iter().map(|p| p.weight).sum();
        Ok(ReferenceMeasure { space: space.clone(), kind: MeasureKind::Mixture(parts), total })
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Upper-doubling constant for this measure in original units, from the
    /// maximum density times the volume of a unit ball.
    pub fn default_doubling_const(&self) -> f64 {
        let dim = self.space.dim();
        let ball = match self.space.kind {
            MetricKind::Euclidean => crate::metric::unit_ball_volume(dim),
            _ => 2f64.powi(dim as i32),
        };
        let density = match &self.kind {
            MeasureKind::Lebesgue => 1.0 / self.space.domain.volume(),
            MeasureKind::Mixture(parts) => parts.iter().map(|p| p.weight / p.region.volume()).sum(),
        };
        ball * density
    }

    /// Exact mass of a box.
    pub fn mass_of_box(&self, b: &BoxRegion) -> f64 {
        match &self.kind {
            MeasureKind::Lebesgue => {
                let vol = self.space.domain.intersect(b).map(|c| c.volume()).unwrap_or(0.0);
                vol / self.space.domain.volume()
            }
            MeasureKind::Mixture(parts) => parts
                .iter()
                .map(|p| {
                    let v = p.region.intersect(b).map(|c| c.volume()).unwrap_or(0.0);
                    p.weight * v / p.region.volume()
                })
                .sum(),
        }
    }

    /// Mass of an open ball: exact when the ball is a box (sup-norm, interval,
    /// one-dimensional euclidean), Monte Carlo otherwise.
    pub fn mass_of_ball(&self, ball: &Ball) -> MassEstimate {
        if let Some(b) = self.ball_as_box(ball) {
            return MassEstimate::exact(self.mass_of_box(&b));
        }
        let mut words: Vec<u64> = ball.center.iter().map(|v| v.to_bits()).collect();
        words.push(ball.radius.to_bits());
        self.mass_of_ball_mc(ball, DEFAULT_BALL_SAMPLES, derive_seed(0xba11, &words))
    }

    fn ball_as_box(&self, ball: &Ball) -> Option<BoxRegion> {
        let boxlike = self.space.kind != MetricKind::Euclidean || self.space.dim() == 1;
        // Open and closed balls differ by a null set for these measures.
        boxlike.then(|| {
            self.space
                .domain
                .clipped_cube(&ball.center, ball.radius)
                .unwrap_or(BoxRegion { lo: vec![0.0; self.space.dim()], hi: vec![0.0; self.space.dim()] })
        })
    }

    /// Monte Carlo ball mass using samples from ν restricted to the ball's
    /// bounding cube.
    pub fn mass_of_ball_mc(&self, ball: &Ball, n: usize, seed: u64) -> MassEstimate {
        let Some(cube) = self.space.domain.clipped_cube(&ball.center, ball.radius) else {
            return MassEstimate::exact(0.0);
        };
        let cube_mass = self.mass_of_box(&cube);
        if cube_mass == 0.0 || n == 0 {
            return MassEstimate::exact(0.0);
        }
        let mut rng = stream_rng(seed, 0);
        let mut hits = 0;
        for _ in 0..n {
            let x = self.sample_in_box(&cube, &mut rng).expect("cube has mass");
            if ball.contains(&self.space, &x) {
                hits += 1;
            }
        }
        MassEstimate::from_hits(hits, n, cube_mass)
    }

    /// Unbiased Monte Carlo estimate of `ν({x : f(x)})`.
    pub fn mass_of_indicator(&self, f: impl Fn(&[f64]) -> bool, n: usize, seed: u64) -> MassEstimate {
        let n = n.max(1);
        let mut rng = stream_rng(seed, 0);
        let mut hits = 0;
        for _ in 0..n {
            if f(&self.sample(&mut rng)) {
                hits += 1;
            }
        }
        MassEstimate::from_hits(hits, n, self.total)
    }

    /// A draw from ν / ν(X).
    pub fn sample(&self, rng: &mut Rng) -> Point {
        match &self.kind {
            MeasureKind::Lebesgue => uniform_in(&self.space.domain, rng),
            MeasureKind::Mixture(parts) => {
                let mut u = rng.random::<f64>() * self.total;
                for p in parts {
                    if u < p.weight {
                        return uniform_in(&p.region, rng);
                    }
                    u -= p.weight;
                }
                uniform_in(&parts[parts.len() - 1].region, rng)
            }
        }
    }

    /// A draw from ν restricted to `b` and normalized; `None` when
    /// `ν(b) = 0`.
    pub fn sample_in_box(&self, b: &BoxRegion, rng: &mut Rng) -> Option<Point> {
        match &self.kind {
            MeasureKind::Lebesgue => {
                let c = self.space.domain.intersect(b)?;
                (c.volume() > 0.0 || self.space.dim() == 0).then(|| uniform_in(&c, rng))
            }
            MeasureKind::Mixture(parts) => {
                let pieces: Vec<(f64, BoxRegion)> = parts
                    .iter()
                    .filter_map(|p| {
                        let c = p.region.intersect(b)?;
                        let m = p.weight * c.volume() / p.region.volume();
                        (m > 0.0).then_some((m, c))
                    })
                    .collect();
                let total: f64 = pieces.iter().map(|p| p.0).sum();
                if total <= 0.0 {
                    return None;
                }
                let mut u = rng.random::<f64>() * total;
                for (m, c) in &pieces {
                    if u < *m {
                        return Some(uniform_in(c, rng));
                    }
                    u -= m;
                }
                Some(uniform_in(&pieces[pieces.len() - 1].1, rng))
            }
        }
    }

    /// Exact mass of a finite union of intervals in one dimension.
    pub fn mass_of_interval_union(&self, intervals: &[(f64, f64)]) -> Result<f64> {
        if self.space.dim() != 1 {
            return Err(Error::Unsupported("interval unions need a one-dimensional space".into()));
        }
        let mut iv: Vec<(f64, f64)> = intervals.iter().cloned().filter(|(a, b)| a < b).collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(merged.iter().map(|(a, b)| self.mass_of_box(&BoxRegion { lo: vec![*a], hi: vec![*b] })).sum())
    }

    /// Checks `ν(B(x, r)) <= c r^d` on random and deterministic probes.
    pub fn certify_upper_doubling(&self, c: f64, d: f64, n_trials: usize, seed: u64) -> Result<DoublingCertificate> {
        if !(c > 0.0 && d > 0.0) {
            return Err(Error::invalid("doubling parameters must be positive"));
        }
        let big_r = self.space.diameter();
        let mut rng = stream_rng(seed, 0);
        let mut probes: Vec<(Point, f64)> = Vec::new();
        let center = self.space.domain.center();
        for j in 0..12 {
            probes.push((center.clone(), big_r * 0.5f64.powi(j)));
            probes.push((self.space.domain.lo.clone().into(), big_r * 0.5f64.powi(j)));
        }
        for _ in 0..n_trials {
            let x = self.sample(&mut rng);
            let r = big_r * rng.random::<f64>().max(1e-9);
            probes.push((x, r));
        }
        let mc_samples =
            if self.ball_as_box(&Ball { center: center.clone(), radius: 1.0 }).is_some() { 0 } else { 20_000 };
        let mut report = DoublingCertificate { pass: true, worst_ratio: 0.0, witness: None, trials: probes.len() };
        for (k, (x, r)) in probes.into_iter().enumerate() {
            let ball = Ball { center: x, radius: r };
            let m = if mc_samples == 0 {
                self.mass_of_ball(&ball)
            } else {
                self.mass_of_ball_mc(&ball, mc_samples, derive_seed(seed, &[k as u64]))
            };
            let bound = c * r.powf(d);
            let ratio = m.value / bound;
            let violated = m.value - 3.0 * m.stderr > bound;
            let witness = DoublingWitness { center: ball.center, radius: r, mass: m, bound };
            if ratio > report.worst_ratio {
                report.worst_ratio = ratio;
                if report.pass {
                    report.witness = Some(witness.clone());
                }
            }
            if violated && report.pass {
                report.pass = false;
                report.witness = Some(witness);
            }
        }
        Ok(report)
    }
}

fn uniform_in(b: &BoxRegion, rng: &mut Rng) -> Point {
    Point(b.lo.iter().zip(&b.hi).map(|(a, h)| if a == h { *a } else { a + (h - a) * rng.random::<f64>() }).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingWitness {
    pub center: Point,
    pub radius: f64,
    pub mass: MassEstimate,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingCertificate {
    pub pass: bool,
    /// Largest observed `ν(B) / (c r^d)`.
    pub worst_ratio: f64,
    /// The worst probe, or the first violating probe when the check fails.
    pub witness: Option<DoublingWitness>,
    pub trials: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ReferenceMeasure {
        ReferenceMeasure::lebesgue(&MetricSpace::unit_interval())
    }

    #[test]
    fn interval_ball_masses() {
        let m = unit();
        let b = m.mass_of_ball(&Ball { center: 0.5.into(), radius: 0.1 });
        assert!(b.exact && (b.value - 0.2).abs() < 1e-15);
        let b = m.mass_of_ball(&Ball { center: 0.0.into(), radius: 0.1 });
        assert!(b.exact);
        assert_eq!(b.value, 0.1);
    }

    #[test]
    fn square_ball_mass() {
        let s = MetricSpace::unit_cube(MetricKind::Sup, 2).unwrap();
        let m = ReferenceMeasure::lebesgue(&s);
        let v = m.mass_of_ball(&Ball { center: Point(vec![0.5, 0.5]), radius: 0.2 }).value;
        assert!((v - 0.16).abs() < 1e-15);
    }

    #[test]
    fn euclidean_disc_is_estimated() {
        let s = MetricSpace::unit_cube(MetricKind::Euclidean, 2).unwrap();
        let m = ReferenceMeasure::lebesgue(&s);
        let e = m.mass_of_ball(&Ball { center: Point(vec![0.5, 0.5]), radius: 0.2 });
        assert!(!e.exact);
        let truth = std::f64::consts::PI * 0.04;
        assert!((e.value - truth).abs() < 4.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn indicator_masses() {
        let m = unit();
        let f = m.mass_of_indicator(|_| false, 100, 1);
        assert_eq!((f.value, f.stderr), (0.0, 0.0));
        assert_eq!(m.mass_of_indicator(|_| true, 100, 1).value, 1.0);
        let h = m.mass_of_indicator(|x| x[0] < 0.5, 100_000, 7);
        assert!((h.value - 0.5).abs() < 3.0 * h.stderr);
    }

    #[test]
    fn doubling_certificates() {
        let m = unit();
        assert!(m.certify_upper_doubling(2.0, 1.0, 500, 3).unwrap().pass);
        let bad = m.certify_upper_doubling(0.5, 1.0, 500, 3).unwrap();
        assert!(!bad.pass);
        assert!(bad.witness.is_some());
        let sq = ReferenceMeasure::lebesgue(&MetricSpace::unit_cube(MetricKind::Sup, 2).unwrap());
        assert!(sq.certify_upper_doubling(4.0, 2.0, 500, 3).unwrap().pass);
    }

    #[test]
    fn mixture_masses_add_up() {
        let s = MetricSpace::unit_interval();
        let m = ReferenceMeasure::mixture(
            &s,
            vec![
                WeightedBox { weight: 1.0, region: BoxRegion::new(vec![0.0], vec![0.5]).unwrap() },
                WeightedBox { weight: 3.0, region: BoxRegion::new(vec![0.25], vec![1.0]).unwrap() },
            ],
        )
        .unwrap();
        assert_eq!(m.total_mass(), 4.0);
        assert_eq!(m.mass_of_box(&s.domain), 4.0);
        let left = m.mass_of_box(&BoxRegion::new(vec![0.0], vec![0.25]).unwrap());
        let right = m.mass_of_box(&BoxRegion::new(vec![0.25], vec![1.0]).unwrap());
        assert_eq!(left + right, 4.0);
    }

    #[test]
    fn interval_union_mass() {
        let m = unit();
        assert_eq!(m.mass_of_interval_union(&[(0.0, 0.25), (0.125, 0.5), (0.75, 2.0)]).unwrap(), 0.75);
    }
}
