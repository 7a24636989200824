//! Planar helpers: point-to-segment distance under both norms and
//! half-plane clipping of convex polygons.

use crate::metric::MetricKind;

pub type P2 = [f64; 2];

/// Distance from `p` to segment `[a, b]` and the closest point.
pub fn segment_distance(kind: MetricKind, p: P2, a: P2, b: P2) -> (f64, P2) {
    let u = [b[0] - a[0], b[1] - a[1]];
    let at = |t: f64| [a[0] + t * u[0], a[1] + t * u[1]];
    match kind {
        MetricKind::Euclidean | MetricKind::Interval => {
            let len2 = u[0] * u[0] + u[1] * u[1];
            let t =
                if len2 > 0.0 { (((p[0] - a[0]) * u[0] + (p[1] - a[1]) * u[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let q = at(t);
            (crate::metric::norm2(&[p[0] - q[0], p[1] - q[1]]), q)
        }
        MetricKind::Sup => {
            // max(|f0(t)|, |f1(t)|) with f_i affine is minimized at a kink.
            let f = [p[0] - a[0], p[1] - a[1]];
            let mut cands = vec![0.0, 1.0];
            for i in 0..2 {
                if u[i] != 0.0 {
                    cands.push(f[i] / u[i]);
                }
            }
            for s in [1.0, -1.0] {
                let den = u[0] - s * u[1];
                if den != 0.0 {
                    cands.push((f[0] - s * f[1]) / den);
                }
            }
            let mut best = (f64::INFINITY, a);
            for t in cands {
                let q = at(t.clamp(0.0, 1.0));
                let d = (p[0] - q[0]).abs().max((p[1] - q[1]).abs());
                if d < best.0 {
                    best = (d, q);
                }
            }
            best
        }
    }
}

/// Clips a convex polygon to `{y : s·(w·y - b) >= 0}`.
pub fn clip_halfplane(poly: &[P2], w: P2, b: f64, s: f64) -> Vec<P2> {
    let side = |p: &P2| s * (w[0] * p[0] + w[1] * p[1] - b);
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (fp, fq) = (side(&p), side(&q));
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Distance from `p` to the boundary of a polygon given by its vertices.
pub fn polygon_boundary_distance(kind: MetricKind, p: P2, poly: &[P2]) -> Option<(f64, P2)> {
    match poly.len() {
        0 => None,
        1 => Some(segment_distance(kind, p, poly[0], poly[0])),
        n => (0..n).map(|i| segment_distance(kind, p, poly[i], poly[(i + 1) % n])).min_by(|x, y| x.0.total_cmp(&y.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_segment_distance_matches_dense_scan() {
        let cases = [([0.3, 0.9], [0.0, 0.0], [1.0, 0.5]), ([-0.2, 0.1], [0.0, 0.0], [0.2, 1.0])];
        for (p, a, b) in cases {
            let (d, _) = segment_distance(MetricKind::Sup, p, a, b);
            let brute = (0..=100_000)
                .map(|k| {
                    let t = k as f64 / 100_000.0;
                    let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    (p[0] - q[0]).abs().max((p[1] - q[1]).abs())
                })
                .fold(f64::INFINITY, f64::min);
            assert!((d - brute).abs() < 1e-5, "{d} vs {brute}");
        }
    }

    #[test]
    fn clipping_a_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let half = clip_halfplane(&sq, [1.0, 0.0], 0.5, 1.0);
        assert_eq!(half.len(), 4);
        assert!(half.iter().all(|p| p[0] >= 0.5));
        assert!(clip_halfplane(&sq, [1.0, 0.0], 2.0, 1.0).is_empty());
    }
}
