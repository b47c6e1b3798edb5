//! Coefficient fields for column reduction.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// A field whose elements can be built from boundary coefficients.
pub trait Field: Clone + Debug {
    type Elem: Clone + Debug + PartialEq;

    fn zero(&self) -> Self::Elem;
    fn from_i64(&self, value: i64) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    /// Multiplicative inverse of a nonzero element.
    fn inv(&self, a: &Self::Elem) -> Self::Elem;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }
}

/// Integers modulo a prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u32,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if p > u32::MAX as u64 || !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(PrimeField { p: p as u32 })
    }

    pub fn modulus(&self) -> u32 {
        self.p
    }
}

impl Field for PrimeField {
    type Elem = u32;

    fn zero(&self) -> u32 {
        0
    }

    fn from_i64(&self, value: i64) -> u32 {
        value.rem_euclid(self.p as i64) as u32
    }

    fn is_zero(&self, a: &u32) -> bool {
        *a == 0
    }

    fn add(&self, a: &u32, b: &u32) -> u32 {
        ((*a as u64 + *b as u64) % self.p as u64) as u32
    }

    fn mul(&self, a: &u32, b: &u32) -> u32 {
        ((*a as u64 * *b as u64) % self.p as u64) as u32
    }

    fn neg(&self, a: &u32) -> u32 {
        if *a == 0 {
            0
        } else {
            self.p - a
        }
    }

    fn inv(&self, a: &u32) -> u32 {
        assert!(*a != 0, "inverse of zero");
        let (mut base, mut exp, mut acc) = (*a as u64, self.p as u64 - 2, 1u64);
        let p = self.p as u64;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % p;
            }
            base = base * base % p;
            exp >>= 1;
        }
        acc as u32
    }
}

/// The rationals. Elements stay on machine integers until an operation would
/// overflow, then move to arbitrary precision.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RationalField;

#[derive(Clone, Debug)]
pub enum Rat {
    Small(Ratio<i64>),
    Big(BigRational),
}

impl Rat {
    fn to_big(&self) -> BigRational {
        match self {
            Rat::Small(r) => BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())),
            Rat::Big(r) => r.clone(),
        }
    }

    fn shrink(r: BigRational) -> Rat {
        match (i64::try_from(r.numer()), i64::try_from(r.denom())) {
            (Ok(n), Ok(d)) if n != i64::MIN && d != i64::MIN => Rat::Small(Ratio::new_raw(n, d)),
            _ => Rat::Big(r),
        }
    }
}

impl PartialEq for Rat {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Rat::Small(a), Rat::Small(b)) => a == b,
            _ => self.to_big() == other.to_big(),
        }
    }
}

fn checked_add(a: &Ratio<i64>, b: &Ratio<i64>) -> Option<Ratio<i64>> {
    let g = num_integer::gcd(*a.denom(), *b.denom());
    let lhs = a.numer().checked_mul(b.denom() / g)?;
    let rhs = b.numer().checked_mul(a.denom() / g)?;
    let numer = lhs.checked_add(rhs)?;
    let denom = (a.denom() / g).checked_mul(*b.denom())?;
    if numer == i64::MIN || denom == i64::MIN {
        return None;
    }
    Some(Ratio::new(numer, denom))
}

fn checked_mul(a: &Ratio<i64>, b: &Ratio<i64>) -> Option<Ratio<i64>> {
    let g1 = num_integer::gcd(*a.numer(), *b.denom()).max(1);
    let g2 = num_integer::gcd(*b.numer(), *a.denom()).max(1);
    let numer = (a.numer() / g1).checked_mul(b.numer() / g2)?;
    let denom = (a.denom() / g2).checked_mul(b.denom() / g1)?;
    if numer == i64::MIN || denom == i64::MIN {
        return None;
    }
    Some(Ratio::new(numer, denom))
}

impl Field for RationalField {
    type Elem = Rat;

    fn zero(&self) -> Rat {
        Rat::Small(Ratio::zero())
    }

    fn from_i64(&self, value: i64) -> Rat {
        if value == i64::MIN {
            Rat::Big(BigRational::from_integer(BigInt::from(value)))
        } else {
            Rat::Small(Ratio::from_integer(value))
        }
    }

    fn is_zero(&self, a: &Rat) -> bool {
        match a {
            Rat::Small(r) => r.is_zero(),
            Rat::Big(r) => r.is_zero(),
        }
    }

    fn add(&self, a: &Rat, b: &Rat) -> Rat {
        if let (Rat::Small(x), Rat::Small(y)) = (a, b) {
            if let Some(r) = checked_add(x, y) {
                return Rat::Small(r);
            }
        }
        Rat::shrink(a.to_big() + b.to_big())
    }

    fn mul(&self, a: &Rat, b: &Rat) -> Rat {
        if let (Rat::Small(x), Rat::Small(y)) = (a, b) {
            if let Some(r) = checked_mul(x, y) {
                return Rat::Small(r);
            }
        }
        Rat::shrink(a.to_big() * b.to_big())
    }

    fn neg(&self, a: &Rat) -> Rat {
        match a {
            Rat::Small(r) => Rat::Small(-*r),
            Rat::Big(r) => Rat::shrink(-r.clone()),
        }
    }

    fn inv(&self, a: &Rat) -> Rat {
        assert!(!self.is_zero(a), "inverse of zero");
        match a {
            Rat::Small(r) => Rat::Small(r.recip()),
            Rat::Big(r) => Rat::shrink(BigRational::one() / r),
        }
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Distinct prime divisors in increasing order.
pub fn prime_divisors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

pub fn primes_up_to(limit: u64) -> Vec<u64> {
    (2..=limit).filter(|&n| is_prime(n)).collect()
}
