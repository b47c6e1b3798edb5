//! Distances and statistics on persistence diagrams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homology::PersistenceDiagram;
use crate::matching::{hungarian, matching_size};
use crate::pointcloud::PointCloud;

/// ∞-norm distance between two diagram points.
pub fn point_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

/// ∞-norm distance from a point to the diagonal.
pub fn diagonal_distance(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

fn infinite_parts(d1: &PersistenceDiagram, d2: &PersistenceDiagram, dim: usize) -> Result<Vec<f64>> {
    let a = d1.infinite_births(dim);
    let b = d2.infinite_births(dim);
    if a.len() != b.len() {
        return Err(Error::InfiniteBarMismatch { dim, left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect())
}

/// Bottleneck distance in one dimension. Essential classes are matched to
/// each other in order of birth.
pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram, dim: usize) -> Result<f64> {
    let inf = infinite_parts(d1, d2, dim)?;
    let finite = bottleneck_intervals(&d1.finite_intervals(dim), &d2.finite_intervals(dim));
    Ok(inf.into_iter().fold(finite, f64::max))
}

/// 1-Wasserstein distance in one dimension with ∞-norm ground cost.
pub fn wasserstein1(d1: &PersistenceDiagram, d2: &PersistenceDiagram, dim: usize) -> Result<f64> {
    let inf: f64 = infinite_parts(d1, d2, dim)?.iter().sum();
    Ok(inf + wasserstein1_intervals(&d1.finite_intervals(dim), &d2.finite_intervals(dim)))
}

/// Bottleneck distance between finite interval sets.
///
/// The optimum is one of the point-to-point or point-to-diagonal distances,
/// so a binary search over those values with a perfect-matching test is exact.
pub fn bottleneck_intervals(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n + m == 0 {
        return 0.0;
    }
    let mut candidates: Vec<f64> = Vec::with_capacity(n * m + n + m);
    for &p in a {
        candidates.push(diagonal_distance(p));
        for &q in b {
            candidates.push(point_distance(p, q));
        }
    }
    candidates.extend(b.iter().map(|&q| diagonal_distance(q)));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let feasible = |delta: f64| {
        // left: a[0..n], then diagonal copies of b; right: b[0..m], then diagonal copies of a
        let mut adj: Vec<Vec<usize>> = Vec::with_capacity(n + m);
        for (i, &p) in a.iter().enumerate() {
            let mut row: Vec<usize> = (0..m).filter(|&j| point_distance(p, b[j]) <= delta).collect();
            if diagonal_distance(p) <= delta {
                row.push(m + i);
            }
            adj.push(row);
        }
        for (j, &q) in b.iter().enumerate() {
            let mut row: Vec<usize> = (m..m + n).collect();
            if diagonal_distance(q) <= delta {
                row.push(j);
            }
            adj.push(row);
        }
        matching_size(n + m, &adj) == n + m
    };

    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// 1-Wasserstein distance between finite interval sets.
pub fn wasserstein1_intervals(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    if size == 0 {
        return 0.0;
    }
    let mut cost = vec![vec![f64::INFINITY; size]; size];
    for (i, &p) in a.iter().enumerate() {
        for (j, &q) in b.iter().enumerate() {
            cost[i][j] = point_distance(p, q);
        }
        cost[i][m + i] = diagonal_distance(p);
    }
    for (j, &q) in b.iter().enumerate() {
        cost[n + j][j] = diagonal_distance(q);
        for k in 0..n {
            cost[n + j][m + k] = 0.0;
        }
    }
    hungarian(&cost).iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

/// Positive finite bar lengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarLengthSet {
    lengths: Vec<f64>,
}

impl BarLengthSet {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if let Some(bad) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidArgument(format!("bar lengths must be positive and finite, got {bad}")));
        }
        Ok(BarLengthSet { lengths })
    }

    /// Finite bars of positive length in one dimension.
    pub fn from_diagram(diagram: &PersistenceDiagram, dim: usize) -> Self {
        let lengths = diagram.finite_intervals(dim).iter().map(|(b, d)| d - b).filter(|l| *l > 0.0).collect();
        BarLengthSet { lengths }
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn sorted_descending(&self) -> Vec<f64> {
        let mut v = self.lengths.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

/// Shannon entropy of normalized lengths, natural log.
pub fn entropy_of(lengths: &[f64]) -> f64 {
    let total: f64 = lengths.iter().sum();
    -lengths
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| {
            let p = l / total;
            p * p.ln()
        })
        .sum::<f64>()
}

pub fn persistence_entropy(bars: &BarLengthSet) -> Result<f64> {
    if bars.is_empty() {
        return Err(Error::Empty("bar set"));
    }
    Ok(entropy_of(&bars.lengths))
}

/// Upper bound on the number of feature bars among `n` bars.
pub fn max_feature_count(n: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n = n as f64;
    Ok(n * (alpha * (1.0 / alpha).ln() - alpha * (1.0 - alpha)) / ((1.0 - alpha) * (1.0 - alpha)))
}

/// Replaces the `i` longest bars (descending order assumed) by
/// `P_i / e^{E(R_i)}`, where `R_i` are the remaining bars and `P_i` their sum.
pub fn entropy_substitution(sorted_desc: &[f64], i: usize) -> Vec<f64> {
    let rest = &sorted_desc[i..];
    let p: f64 = rest.iter().sum();
    let scale = if rest.is_empty() { 1.0 } else { entropy_of(rest).exp() };
    let mut out = vec![p / scale; i];
    out.extend_from_slice(rest);
    out
}

/// `S_{L'_i}`: total length after substituting the `i` longest bars.
fn substituted_total(sorted_desc: &[f64], i: usize) -> f64 {
    let rest = &sorted_desc[i..];
    let p: f64 = rest.iter().sum();
    if rest.is_empty() {
        return 0.0;
    }
    p + i as f64 * p / entropy_of(rest).exp()
}

/// Quotients within this of one count as one; equal bars otherwise round either way.
pub const QUOTIENT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseClassification {
    /// Bars judged to be features, descending.
    pub features: Vec<f64>,
    /// Remaining bars, descending.
    pub noise: Vec<f64>,
    /// Quotient `C_i` for every step evaluated, starting at `i = 1`.
    pub quotients: Vec<f64>,
    pub max_features: f64,
}

/// Splits bars into features and noise.
///
/// Bars are taken longest first. Bar `i` is a feature while the quotient
/// `C_i = S_{L'_{i-1}} / S_{L'_i}` exceeds one and `i ≤ Q`. The first bar
/// failing either test ends the scan and it and all later bars are noise.
/// Substituting every bar leaves nothing to average over, so the last step
/// has `S_{L'_n} = 0` and `C_n = ∞`. That step always ends the scan.
pub fn classify_noise(bars: &BarLengthSet, alpha: f64) -> Result<NoiseClassification> {
    if bars.is_empty() {
        return Err(Error::Empty("bar set"));
    }
    let q = max_feature_count(bars.len(), alpha)?;
    let sorted = bars.sorted_descending();
    let n = sorted.len();
    let mut quotients = Vec::new();
    let mut split = 0;
    let mut previous = substituted_total(&sorted, 0);
    for i in 1..=n {
        let current = substituted_total(&sorted, i);
        let c = if current > 0.0 { previous / current } else { f64::INFINITY };
        quotients.push(c);
        if i == n || !(c > 1.0 + QUOTIENT_TOLERANCE) || (i as f64) > q {
            break;
        }
        split = i;
        previous = current;
    }
    Ok(NoiseClassification { features: sorted[..split].to_vec(), noise: sorted[split..].to_vec(), quotients, max_features: q })
}

/// Length a new bar must exceed to register as a feature on top of `bars`.
pub fn min_feature_length(bars: &BarLengthSet) -> Result<f64> {
    let e = persistence_entropy(bars)?;
    Ok(bars.total() / e.exp())
}

/// Half the shortest persistence among finite intervals.
pub fn min_torsion_bottleneck_intervals(intervals: &[(f64, f64)]) -> Result<f64> {
    intervals
        .iter()
        .map(|&(b, d)| (d - b) / 2.0)
        .filter(|x| x.is_finite())
        .min_by(f64::total_cmp)
        .ok_or(Error::Empty("diagram"))
}

/// Lower bound on the bottleneck distance induced by an extra latent bar.
pub fn min_torsion_bottleneck(diagram: &PersistenceDiagram, dim: usize) -> Result<f64> {
    min_torsion_bottleneck_intervals(&diagram.finite_intervals(dim))
}

/// Scale statistics of a cloud used to pick `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryRatios {
    /// Minimum pairwise distance.
    pub r: f64,
    /// Enclosing radius, written `2T`.
    pub radius: f64,
    pub t: f64,
    pub r_over_t: f64,
}

pub fn geometry_ratios(cloud: &PointCloud) -> Result<GeometryRatios> {
    if cloud.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let dist = cloud.distance_matrix();
    let mut r = f64::INFINITY;
    for (i, row) in dist.iter().enumerate() {
        for &d in &row[i + 1..] {
            r = r.min(d);
        }
    }
    let radius = crate::rips::enclosing_radius(&dist);
    let t = radius / 2.0;
    Ok(GeometryRatios { r, radius, t, r_over_t: r / t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homology::{Coefficients, PersistencePair};

    fn dgm(intervals: &[(f64, f64)]) -> PersistenceDiagram {
        let pairs = intervals
            .iter()
            .enumerate()
            .map(|(k, &(b, d))| PersistencePair {
                birth: b,
                death: d,
                dim: 1,
                birth_index: k,
                death_index: d.is_finite().then_some(k + 100),
            })
            .collect();
        PersistenceDiagram::from_pairs(Coefficients::Prime(2), 1, pairs)
    }

    #[test]
    fn distance_fixtures() {
        let a = dgm(&[(0.0, 2.0)]);
        let e = dgm(&[]);
        assert_eq!(bottleneck(&a, &a, 1).unwrap(), 0.0);
        assert_eq!(bottleneck(&a, &e, 1).unwrap(), 1.0);
        let b = dgm(&[(0.0, 2.0), (0.0, 4.0)]);
        assert_eq!(wasserstein1(&b, &a, 1).unwrap(), 2.0);
        assert_eq!(wasserstein1(&b, &b, 1).unwrap(), 0.0);
    }

    #[test]
    fn infinite_bars() {
        let a = dgm(&[(0.0, f64::INFINITY), (0.0, 1.0)]);
        let b = dgm(&[(0.5, f64::INFINITY)]);
        assert_eq!(bottleneck(&a, &b, 1).unwrap(), 0.5);
        assert_eq!(wasserstein1(&a, &b, 1).unwrap(), 1.0);
        assert!(matches!(bottleneck(&a, &dgm(&[]), 1), Err(Error::InfiniteBarMismatch { .. })));
    }

    #[test]
    fn entropy_values() {
        let four = BarLengthSet::new(vec![2.0; 4]).unwrap();
        assert!((persistence_entropy(&four).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(persistence_entropy(&BarLengthSet::new(vec![3.0]).unwrap()).unwrap(), 0.0);
        let e = persistence_entropy(&BarLengthSet::new(vec![1.0, 3.0]).unwrap()).unwrap();
        assert!((e - 0.5623351446188083).abs() < 1e-12);
        assert!(persistence_entropy(&BarLengthSet::new(vec![]).unwrap()).is_err());
        assert!(BarLengthSet::new(vec![0.0]).is_err());
    }

    #[test]
    fn feature_count() {
        assert!((max_feature_count(100, 0.5).unwrap() - 38.62943611198906).abs() < 1e-12);
        assert!((max_feature_count(10, 0.1).unwrap() - 1.7315865345605508).abs() < 1e-12);
        assert!(max_feature_count(10, 1.0).is_err());
        assert!(max_feature_count(10, 0.0).is_err());
    }

    #[test]
    fn dominant_bar_is_a_feature() {
        let bars = BarLengthSet::new(vec![1.0, 100.0, 1.0, 1.0, 1.0]).unwrap();
        let c = classify_noise(&bars, 0.5).unwrap();
        assert_eq!(c.features, vec![100.0]);
        assert_eq!(c.noise.len(), 4);
        assert!((c.quotients[0] - 20.8).abs() < 1e-12);
        assert!((c.quotients[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_bars_are_noise() {
        let c = classify_noise(&BarLengthSet::new(vec![0.3; 6]).unwrap(), 0.5).unwrap();
        assert!(c.features.is_empty());
        assert_eq!(c.noise.len(), 6);
        let single = classify_noise(&BarLengthSet::new(vec![1.0]).unwrap(), 0.5).unwrap();
        assert!(single.features.is_empty());
        assert_eq!(single.quotients, vec![f64::INFINITY]);
    }

    #[test]
    fn feature_length_bound() {
        let rest = BarLengthSet::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let bound = min_feature_length(&rest).unwrap();
        assert!((bound - 1.0).abs() < 1e-12);
        for (delta, expect) in [(1e-6, true), (-1e-6, false)] {
            let mut v = rest.lengths().to_vec();
            v.push(bound + delta);
            let c = classify_noise(&BarLengthSet::new(v).unwrap(), 0.5).unwrap();
            assert_eq!(c.features.contains(&(bound + delta)), expect);
        }
    }

    #[test]
    fn torsion_bottleneck_bound() {
        assert_eq!(min_torsion_bottleneck_intervals(&[(0.0, 2.0)]).unwrap(), 1.0);
        assert_eq!(min_torsion_bottleneck_intervals(&[(0.0, 2.0), (1.0, 1.5)]).unwrap(), 0.25);
        assert!(min_torsion_bottleneck_intervals(&[]).is_err());
    }
}
