//! Persistent homology by column reduction over a prime field or the rationals.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, PrimeField, RationalField};
use crate::rips::Filtration;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coefficients {
    Prime(u64),
    Rational,
}

impl Coefficients {
    pub fn prime(q: u64) -> Result<Self> {
        PrimeField::new(q)?;
        Ok(Coefficients::Prime(q))
    }

    pub fn validate(&self) -> Result<()> {
        if let Coefficients::Prime(q) = self {
            PrimeField::new(*q)?;
        }
        Ok(())
    }
}

impl fmt::Display for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficients::Prime(q) => write!(f, "q{q}"),
            Coefficients::Rational => f.write_str("rational"),
        }
    }
}

impl FromStr for Coefficients {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("rational") || s == "Q" {
            return Ok(Coefficients::Rational);
        }
        let digits = s.strip_prefix('q').or_else(|| s.strip_prefix('Z')).unwrap_or(s);
        let q: u64 = digits.parse().map_err(|_| Error::Parse(format!("unknown coefficients '{s}'")))?;
        Coefficients::prime(q)
    }
}

impl Serialize for Coefficients {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Coefficients {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// One interval. `death` is `f64::INFINITY` for essential classes.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistencePair {
    pub birth: f64,
    pub death: f64,
    pub dim: usize,
    pub birth_index: usize,
    pub death_index: Option<usize>,
}

impl PersistencePair {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn is_infinite(&self) -> bool {
        self.death_index.is_none()
    }

    pub fn is_trivial(&self) -> bool {
        self.death_index.is_some() && self.death <= self.birth
    }
}

#[derive(Serialize, Deserialize)]
struct PairRepr {
    birth: f64,
    death: DeathRepr,
    dim: usize,
    birth_index: usize,
    death_index: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DeathRepr {
    Finite(f64),
    Token(String),
}

impl Serialize for PersistencePair {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let death = if self.death.is_finite() { DeathRepr::Finite(self.death) } else { DeathRepr::Token("inf".into()) };
        PairRepr { birth: self.birth, death, dim: self.dim, birth_index: self.birth_index, death_index: self.death_index }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PersistencePair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = PairRepr::deserialize(deserializer)?;
        let death = match r.death {
            DeathRepr::Finite(d) => d,
            DeathRepr::Token(t) if t == "inf" || t == "Infinity" => f64::INFINITY,
            DeathRepr::Token(t) => return Err(de::Error::custom(format!("bad death value '{t}'"))),
        };
        if death < r.birth {
            return Err(de::Error::custom("death precedes birth"));
        }
        Ok(PersistencePair { birth: r.birth, death, dim: r.dim, birth_index: r.birth_index, death_index: r.death_index })
    }
}

/// All intervals of a filtration, including zero-length ones. The accessors
/// hide zero-length intervals; use [`PersistenceDiagram::all_pairs`] to see them.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceDiagram {
    pub coefficients: Coefficients,
    pub max_hom_dim: usize,
    pairs: Vec<PersistencePair>,
}

#[derive(Serialize, Deserialize)]
struct DiagramRepr {
    coefficients: Coefficients,
    #[serde(default)]
    max_hom_dim: Option<usize>,
    pairs: Vec<PersistencePair>,
}

impl Serialize for PersistenceDiagram {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        DiagramRepr {
            coefficients: self.coefficients,
            max_hom_dim: Some(self.max_hom_dim),
            pairs: self.pairs().cloned().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PersistenceDiagram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = DiagramRepr::deserialize(deserializer)?;
        let max_hom_dim = r.max_hom_dim.unwrap_or_else(|| r.pairs.iter().map(|p| p.dim).max().unwrap_or(0));
        Ok(PersistenceDiagram::from_pairs(r.coefficients, max_hom_dim, r.pairs))
    }
}

impl PersistenceDiagram {
    pub fn from_pairs(coefficients: Coefficients, max_hom_dim: usize, mut pairs: Vec<PersistencePair>) -> Self {
        pairs.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(a.birth.total_cmp(&b.birth))
                .then(a.death.total_cmp(&b.death))
                .then(a.birth_index.cmp(&b.birth_index))
        });
        PersistenceDiagram { coefficients, max_hom_dim, pairs }
    }

    /// Every interval, zero-length ones included.
    pub fn all_pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    /// Intervals of positive length.
    pub fn pairs(&self) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(|p| !p.is_trivial())
    }

    pub fn pairs_in_dim(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> {
        self.pairs().filter(move |p| p.dim == dim)
    }

    /// Finite intervals of positive length in one dimension as `(birth, death)`.
    pub fn finite_intervals(&self, dim: usize) -> Vec<(f64, f64)> {
        self.pairs_in_dim(dim).filter(|p| !p.is_infinite()).map(|p| (p.birth, p.death)).collect()
    }

    /// Births of essential classes in one dimension, ascending.
    pub fn infinite_births(&self, dim: usize) -> Vec<f64> {
        let mut b: Vec<f64> = self.pairs_in_dim(dim).filter(|p| p.is_infinite()).map(|p| p.birth).collect();
        b.sort_by(f64::total_cmp);
        b
    }

    pub fn len(&self) -> usize {
        self.pairs().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same intervals as another diagram, ignoring coefficients.
    pub fn same_intervals(&self, other: &PersistenceDiagram) -> bool {
        let key = |p: &PersistencePair| (p.dim, p.birth, p.death);
        self.pairs().map(key).eq(other.pairs().map(key))
    }

    pub fn same_intervals_in_dim(&self, other: &PersistenceDiagram, dim: usize) -> bool {
        let key = |p: &PersistencePair| (p.birth, p.death);
        self.pairs_in_dim(dim).map(key).eq(other.pairs_in_dim(dim).map(key))
    }

    pub fn barcode(&self) -> Barcode {
        let dims = self.max_hom_dim + 1;
        let mut finite = vec![Vec::new(); dims];
        let mut infinite = vec![0usize; dims];
        for p in self.pairs() {
            if p.dim >= dims {
                continue;
            }
            if p.is_infinite() {
                infinite[p.dim] += 1;
            } else {
                finite[p.dim].push(p.persistence());
            }
        }
        Barcode { finite, infinite }
    }
}

/// Bar lengths per dimension, with essential bars counted separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barcode {
    pub finite: Vec<Vec<f64>>,
    pub infinite: Vec<usize>,
}

impl Barcode {
    pub fn lengths(&self, dim: usize) -> &[f64] {
        self.finite.get(dim).map_or(&[], Vec::as_slice)
    }
}

/// Rank of homology in `dim` at scale `radius`: intervals `[birth, death)` containing it.
pub fn betti_curve(diagram: &PersistenceDiagram, dim: usize, radius: f64) -> usize {
    diagram.pairs_in_dim(dim).filter(|p| p.birth <= radius && radius < p.death).count()
}

/// Alternating sum of Betti numbers at `radius` over dimensions `0..=max_hom_dim`.
pub fn euler_characteristic(diagram: &PersistenceDiagram, radius: f64) -> i64 {
    (0..=diagram.max_hom_dim)
        .map(|d| {
            let b = betti_curve(diagram, d, radius) as i64;
            if d % 2 == 0 {
                b
            } else {
                -b
            }
        })
        .sum()
}

/// Outcome of the reduction: for each column, the row of its lowest nonzero
/// entry after reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing {
    pub low: Vec<Option<usize>>,
    pub max_hom_dim: usize,
}

impl Pairing {
    pub fn len(&self) -> usize {
        self.low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.low.is_empty()
    }
}

/// Reduces boundary columns of dimension `1..=max_hom_dim + 1`.
///
/// Dimensions are processed from the top down so that columns whose index is
/// already a pivot can be cleared without touching them.
pub fn pairing(filtration: &Filtration, coefficients: Coefficients, max_hom_dim: usize) -> Result<Pairing> {
    match coefficients {
        Coefficients::Prime(q) => Ok(reduce_with(filtration, &PrimeField::new(q)?, max_hom_dim)),
        Coefficients::Rational => Ok(reduce_with(filtration, &RationalField, max_hom_dim)),
    }
}

fn reduce_with<F: Field>(filtration: &Filtration, field: &F, max_hom_dim: usize) -> Pairing {
    let n = filtration.len();
    let top = (max_hom_dim + 1).min(filtration.max_dim());
    let mut low = vec![None; n];
    let mut cleared = vec![false; n];
    let mut pivot_col: Vec<usize> = vec![usize::MAX; n];
    let mut reduced: Vec<Vec<(usize, F::Elem)>> = vec![Vec::new(); n];

    for dim in (1..=top).rev() {
        for j in 0..n {
            if filtration.simplex(j).dim() != dim || cleared[j] {
                continue;
            }
            let mut col: Vec<(usize, F::Elem)> = filtration
                .facets(j)
                .into_iter()
                .map(|(i, s)| (i, field.from_i64(s as i64)))
                .collect();
            col.sort_unstable_by_key(|e| e.0);
            while let Some(&(row, _)) = col.last() {
                let k = pivot_col[row];
                if k == usize::MAX {
                    break;
                }
                let other = &reduced[k];
                let factor = field.neg(&field.mul(&col.last().unwrap().1, &field.inv(&other.last().unwrap().1)));
                col = axpy(field, &col, &factor, other);
            }
            if let Some(&(row, _)) = col.last() {
                low[j] = Some(row);
                pivot_col[row] = j;
                cleared[row] = true;
                reduced[j] = col;
            }
        }
    }
    Pairing { low, max_hom_dim }
}

/// `a + factor * b` for sparse columns sorted by row.
fn axpy<F: Field>(field: &F, a: &[(usize, F::Elem)], factor: &F::Elem, b: &[(usize, F::Elem)]) -> Vec<(usize, F::Elem)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push((b[j].0, field.mul(factor, &b[j].1)));
            j += 1;
        } else {
            let v = field.add(&a[i].1, &field.mul(factor, &b[j].1));
            if !field.is_zero(&v) {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Converts a pairing into intervals for dimensions `0..=max_hom_dim`.
pub fn diagram_from_pairing(filtration: &Filtration, coefficients: Coefficients, pairing: &Pairing) -> PersistenceDiagram {
    let max_hom_dim = pairing.max_hom_dim;
    let n = filtration.len();
    let mut killed = vec![false; n];
    let mut pairs = Vec::new();
    for (j, low) in pairing.low.iter().enumerate() {
        if let Some(i) = *low {
            killed[i] = true;
            let dim = filtration.simplex(i).dim();
            if dim <= max_hom_dim {
                pairs.push(PersistencePair {
                    birth: filtration.simplex(i).birth(),
                    death: filtration.simplex(j).birth(),
                    dim,
                    birth_index: i,
                    death_index: Some(j),
                });
            }
        }
    }
    for i in 0..n {
        let s = filtration.simplex(i);
        if s.dim() <= max_hom_dim && pairing.low[i].is_none() && !killed[i] {
            pairs.push(PersistencePair {
                birth: s.birth(),
                death: f64::INFINITY,
                dim: s.dim(),
                birth_index: i,
                death_index: None,
            });
        }
    }
    PersistenceDiagram::from_pairs(coefficients, max_hom_dim, pairs)
}

/// Persistence diagram of a filtration in dimensions `0..=max_hom_dim`.
pub fn reduce(filtration: &Filtration, coefficients: Coefficients, max_hom_dim: usize) -> Result<PersistenceDiagram> {
    let p = pairing(filtration, coefficients, max_hom_dim)?;
    Ok(diagram_from_pairing(filtration, coefficients, &p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointcloud::PointCloud;
    use crate::rips::{build_rips, MaxRadius, RipsOptions};

    fn square() -> Filtration {
        let c = PointCloud::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        build_rips(&c, &RipsOptions::new(2, MaxRadius::Auto)).unwrap()
    }

    #[test]
    fn two_points() {
        let c = PointCloud::new(1, vec![vec![0.0], vec![1.0]]).unwrap();
        let f = build_rips(&c, &RipsOptions::new(1, MaxRadius::Infinite)).unwrap();
        let d = reduce(&f, Coefficients::Prime(2), 0).unwrap();
        assert_eq!(d.finite_intervals(0), vec![(0.0, 1.0)]);
        assert_eq!(d.infinite_births(0), vec![0.0]);
    }

    #[test]
    fn square_has_one_loop() {
        let f = square();
        let d = reduce(&f, Coefficients::Prime(2), 1).unwrap();
        let h1 = d.finite_intervals(1);
        assert_eq!(h1.len(), 1);
        assert_eq!(h1[0].0, 1.0);
        assert!((h1[0].1 - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(betti_curve(&d, 1, 1.2), 1);
        assert_eq!(betti_curve(&d, 1, 0.5), 0);
        assert_eq!(betti_curve(&d, 0, 0.0), 4);
        for (r, chi) in [(0.0, 4), (0.5, 4), (1.0, 0), (1.2, 0), (1.5, 1)] {
            assert_eq!(euler_characteristic(&d, r), chi);
        }
    }

    #[test]
    fn every_simplex_is_accounted_for() {
        let f = square();
        let d = reduce(&f, Coefficients::Rational, 2).unwrap();
        let paired = d.all_pairs().iter().filter(|p| !p.is_infinite()).count();
        let infinite = d.all_pairs().iter().filter(|p| p.is_infinite()).count();
        assert_eq!(2 * paired + infinite, f.len());
    }

    #[test]
    fn coefficient_tokens() {
        assert_eq!("q2".parse::<Coefficients>().unwrap(), Coefficients::Prime(2));
        assert_eq!("rational".parse::<Coefficients>().unwrap(), Coefficients::Rational);
        assert!("q4".parse::<Coefficients>().is_err());
        assert_eq!(Coefficients::Prime(13).to_string(), "q13");
    }

    #[test]
    fn diagram_json_round_trip() {
        let d = reduce(&square(), Coefficients::Prime(3), 1).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"inf\""));
        assert!(s.contains("\"death_index\":null"));
        let back: PersistenceDiagram = serde_json::from_str(&s).unwrap();
        assert!(back.same_intervals(&d));
        assert_eq!(back.coefficients, Coefficients::Prime(3));
    }
}
