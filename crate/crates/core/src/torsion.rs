//! Torsion in persistent integral homology.
//!
//! The detector compares the rational pairing with the pairing over each
//! `Z/q`. The pairings agree exactly when every lower-left block of the
//! boundary matrix has the same rank over both fields. That block is the
//! boundary of a quotient complex `K_hi / K_lo`, so a disagreement is the
//! same thing as `q`-torsion in some relative integral homology group. The
//! SNF routines here compute those groups directly and serve as the oracle.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::field::PrimeField;
use crate::homology::{pairing, Coefficients, Pairing};
use crate::rips::Filtration;
use crate::snf::smith_normal_form_sparse;

pub const DEFAULT_PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Largest complex the SNF oracle accepts by default.
pub const DEFAULT_ORACLE_CAP: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorsionMethod {
    PrimeComparison,
    SnfOracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorsionFinding {
    pub prime: u64,
    pub first_index: usize,
    pub hom_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorsionReport {
    pub has_torsion: bool,
    pub findings: Vec<TorsionFinding>,
    pub primes_tested: Vec<u64>,
    pub method: TorsionMethod,
}

impl TorsionReport {
    fn new(findings: Vec<TorsionFinding>, primes_tested: Vec<u64>, method: TorsionMethod) -> Self {
        TorsionReport { has_torsion: !findings.is_empty(), findings, primes_tested, method }
    }

    pub fn primes(&self) -> Vec<u64> {
        self.findings.iter().map(|f| f.prime).collect()
    }

    /// The earliest finding; ties go to the smaller prime.
    pub fn first(&self) -> Option<&TorsionFinding> {
        self.findings.iter().min_by_key(|f| (f.first_index, f.prime))
    }

    /// `Torsion: (q, index)` for the earliest finding, else `No Torsion`.
    pub fn label(&self) -> String {
        match self.first() {
            Some(f) => format!("Torsion: ({}, {})", f.prime, f.first_index),
            None => "No Torsion".to_string(),
        }
    }
}

fn validate_primes(primes: &[u64]) -> Result<Vec<u64>> {
    if primes.is_empty() {
        return Err(Error::InvalidArgument("prime list is empty".into()));
    }
    let mut out = Vec::with_capacity(primes.len());
    for &q in primes {
        PrimeField::new(q)?;
        if !out.contains(&q) {
            out.push(q);
        }
    }
    Ok(out)
}

/// First column whose reduced low differs between two pairings.
pub fn first_discrepancy(a: &Pairing, b: &Pairing) -> Option<usize> {
    a.low.iter().zip(&b.low).position(|(x, y)| x != y)
}

/// Compares the rational pairing with the pairing over each prime.
pub fn torsion_check(filtration: &Filtration, primes: &[u64], max_hom_dim: usize) -> Result<TorsionReport> {
    let primes = validate_primes(primes)?;
    let rational = pairing(filtration, Coefficients::Rational, max_hom_dim)?;
    let mut findings = Vec::new();
    for &q in &primes {
        let modular = pairing(filtration, Coefficients::Prime(q), max_hom_dim)?;
        if let Some(j) = first_discrepancy(&rational, &modular) {
            findings.push(TorsionFinding { prime: q, first_index: j, hom_dim: filtration.simplex(j).dim() - 1 });
        }
    }
    Ok(TorsionReport::new(findings, primes, TorsionMethod::PrimeComparison))
}

fn serialize_bigints<S: Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomologyGroup {
    pub dim: usize,
    pub free_rank: usize,
    #[serde(serialize_with = "serialize_bigints")]
    pub torsion: Vec<BigInt>,
}

impl HomologyGroup {
    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    pub fn torsion_as_u64(&self) -> Vec<u64> {
        self.torsion.iter().map(|t| t.to_u64().unwrap_or(u64::MAX)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntegralHomologySummary {
    pub groups: Vec<HomologyGroup>,
}

impl IntegralHomologySummary {
    pub fn group(&self, dim: usize) -> &HomologyGroup {
        &self.groups[dim]
    }

    pub fn has_torsion(&self) -> bool {
        self.groups.iter().any(|g| !g.torsion.is_empty())
    }

    /// Distinct primes dividing some torsion coefficient.
    pub fn torsion_primes(&self) -> Vec<u64> {
        let mut out: Vec<u64> = self.groups.iter().flat_map(|g| g.torsion.iter()).flat_map(big_prime_divisors).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_trivial(&self) -> bool {
        self.groups.iter().all(HomologyGroup::is_trivial)
    }
}

fn big_prime_divisors(n: &BigInt) -> Vec<u64> {
    let mut n = n.clone();
    let mut out = Vec::new();
    let mut d = 2u64;
    while BigInt::from(d) * BigInt::from(d) <= n {
        let bd = BigInt::from(d);
        if n.is_multiple_of(&bd) {
            out.push(d);
            while n.is_multiple_of(&bd) {
                n /= &bd;
            }
        }
        d += 1;
    }
    if n > BigInt::one() {
        out.push(n.to_u64().unwrap_or(u64::MAX));
    }
    out
}

/// Homology of the quotient complex made of simplices with index in
/// `lo..hi`, in dimensions `0..=max_hom_dim`.
pub fn relative_integral_homology_by_index(
    filtration: &Filtration,
    lo: usize,
    hi: usize,
    max_hom_dim: usize,
) -> Result<IntegralHomologySummary> {
    relative_by_index_capped(filtration, lo, hi, max_hom_dim, DEFAULT_ORACLE_CAP)
}

pub fn relative_by_index_capped(
    filtration: &Filtration,
    lo: usize,
    hi: usize,
    max_hom_dim: usize,
    cap: usize,
) -> Result<IntegralHomologySummary> {
    if lo > hi || hi > filtration.len() {
        return Err(Error::InvalidArgument(format!("bad index range {lo}..{hi} for {} simplices", filtration.len())));
    }
    if hi - lo > cap {
        return Err(Error::SimplexCapExceeded { count: hi - lo, cap });
    }
    let (counts, ranks, torsion) = boundary_invariants(filtration, lo, hi, max_hom_dim + 1);
    let groups = (0..=max_hom_dim)
        .map(|p| HomologyGroup {
            dim: p,
            free_rank: counts[p] - ranks[p] - ranks[p + 1],
            torsion: torsion[p + 1].clone(),
        })
        .collect();
    Ok(IntegralHomologySummary { groups })
}

/// Per dimension: simplex counts, boundary ranks `rank ∂_p`, and the
/// non-unit SNF entries of `∂_p`, all for the quotient complex `lo..hi`.
#[allow(clippy::type_complexity)]
fn boundary_invariants(
    filtration: &Filtration,
    lo: usize,
    hi: usize,
    top: usize,
) -> (Vec<usize>, Vec<usize>, Vec<Vec<BigInt>>) {
    let mut local = vec![usize::MAX; hi - lo];
    let mut counts = vec![0usize; top + 1];
    for j in lo..hi {
        let d = filtration.simplex(j).dim();
        if d <= top {
            local[j - lo] = counts[d];
            counts[d] += 1;
        }
    }
    let mut ranks = vec![0usize; top + 2];
    let mut torsion = vec![Vec::new(); top + 2];
    for p in 1..=top {
        if counts[p] == 0 || counts[p - 1] == 0 {
            continue;
        }
        let columns: Vec<Vec<(usize, i64)>> = (lo..hi)
            .filter(|&j| filtration.simplex(j).dim() == p)
            .map(|j| {
                filtration
                    .facets(j)
                    .into_iter()
                    .filter(|&(i, _)| i >= lo)
                    .map(|(i, s)| (local[i - lo], s as i64))
                    .collect()
            })
            .collect();
        let snf = smith_normal_form_sparse(counts[p - 1], columns);
        ranks[p] = snf.rank();
        torsion[p] = snf.torsion();
    }
    (counts, ranks, torsion)
}

/// Prefix lengths realizing the sublevel complex at `radius`.
fn prefix_len(filtration: &Filtration, radius: f64) -> Result<usize> {
    if radius.is_nan() {
        return Err(Error::InvalidArgument("radius is NaN".into()));
    }
    Ok(filtration.sublevel_len(radius))
}

/// Integral homology of the sublevel complex at `radius`.
pub fn integral_homology(filtration: &Filtration, radius: f64, max_hom_dim: usize) -> Result<IntegralHomologySummary> {
    let hi = prefix_len(filtration, radius)?;
    relative_integral_homology_by_index(filtration, 0, hi, max_hom_dim)
}

/// Homology of `K_{radius_i}` relative to `K_{radius_j}`.
pub fn relative_integral_homology(
    filtration: &Filtration,
    radius_j: f64,
    radius_i: f64,
    max_hom_dim: usize,
) -> Result<IntegralHomologySummary> {
    if radius_j > radius_i {
        return Err(Error::InvalidArgument(format!("radius_j {radius_j} exceeds radius_i {radius_i}")));
    }
    let lo = if radius_j < 0.0 { 0 } else { prefix_len(filtration, radius_j)? };
    let hi = prefix_len(filtration, radius_i)?;
    relative_integral_homology_by_index(filtration, lo, hi, max_hom_dim)
}

/// Scans every relative group `H_p(K_hi, K_lo)` with `0 ≤ lo < hi ≤ n` and
/// reports, for each prime, the smallest `hi - 1` at which `q`-torsion occurs.
pub fn snf_torsion_scan(filtration: &Filtration, primes: &[u64], max_hom_dim: usize) -> Result<TorsionReport> {
    let primes = validate_primes(primes)?;
    let n = filtration.len();
    if n > DEFAULT_ORACLE_CAP {
        return Err(Error::SimplexCapExceeded { count: n, cap: DEFAULT_ORACLE_CAP });
    }
    let big: Vec<BigInt> = primes.iter().map(|&q| BigInt::from(q)).collect();
    let mut found: Vec<Option<TorsionFinding>> = vec![None; primes.len()];
    for hi in 1..=n {
        for lo in 0..hi {
            let (_, _, torsion) = boundary_invariants(filtration, lo, hi, max_hom_dim + 1);
            for (p_plus_one, coeffs) in torsion.iter().enumerate() {
                for t in coeffs {
                    for (k, q) in big.iter().enumerate() {
                        if found[k].is_none() && t.is_multiple_of(q) && !t.is_zero() {
                            found[k] =
                                Some(TorsionFinding { prime: primes[k], first_index: hi - 1, hom_dim: p_plus_one - 1 });
                        }
                    }
                }
            }
        }
        if found.iter().all(Option::is_some) {
            break;
        }
    }
    Ok(TorsionReport::new(found.into_iter().flatten().collect(), primes, TorsionMethod::SnfOracle))
}
