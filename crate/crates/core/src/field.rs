//! Prime-field arithmetic and the public evaluation constants.
//!
//! Elements are kept in canonical form (least non-negative residue), so two
//! elements compare equal exactly when their `u64` values do. Arithmetic goes
//! through a [`PrimeField`] handle rather than being stored on each element.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default prime for simulations, 2^31 - 1.
pub const SIM_PRIME: u64 = 2_147_483_647;
/// Default prime for enumeration audits.
pub const AUDIT_PRIME: u64 = 251;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u64,
}

impl PrimeField {
    /// Fails with [`Error::CompositeModulus`] unless `q` is prime.
    pub fn new(q: u64) -> Result<Self> {
        if is_prime(q) {
            Ok(Self { q })
        } else {
            Err(Error::CompositeModulus(q))
        }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// Reduces an arbitrary integer into the field.
    pub fn elem(&self, v: u64) -> FieldElement {
        FieldElement(v % self.q)
    }

    pub fn elem_i64(&self, v: i64) -> FieldElement {
        FieldElement(v.rem_euclid(self.q as i64) as u64)
    }

    /// Accepts a value only if it is already canonical.
    pub fn try_elem(&self, v: u64) -> Result<FieldElement> {
        if v < self.q {
            Ok(FieldElement(v))
        } else {
            Err(Error::Frame(format!("{v} is not a canonical element of F_{}", self.q)))
        }
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let s = a.0 as u128 + b.0 as u128;
        FieldElement((s % self.q as u128) as u64)
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(a.0 - b.0)
        } else {
            FieldElement(self.q - (b.0 - a.0))
        }
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        if a.0 == 0 {
            a
        } else {
            FieldElement(self.q - a.0)
        }
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(mul_mod(a.0, b.0, self.q))
    }

    pub fn pow(&self, a: FieldElement, e: u64) -> FieldElement {
        FieldElement(pow_mod(a.0, e, self.q))
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::DivisionByZero(self.q));
        }
        Ok(self.pow(a, self.q - 2))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn sum<I: IntoIterator<Item = FieldElement>>(&self, it: I) -> FieldElement {
        it.into_iter().fold(FieldElement::ZERO, |acc, v| self.add(acc, v))
    }

    pub fn product<I: IntoIterator<Item = FieldElement>>(&self, it: I) -> FieldElement {
        it.into_iter().fold(FieldElement::ONE, |acc, v| self.mul(acc, v))
    }

    /// Inner product of two equally long slices.
    pub fn dot(&self, a: &[FieldElement], b: &[FieldElement]) -> FieldElement {
        debug_assert_eq!(a.len(), b.len());
        let mut acc: u128 = 0;
        let q = self.q as u128;
        for (x, y) in a.iter().zip(b) {
            acc = (acc + x.0 as u128 * y.0 as u128) % q;
        }
        FieldElement(acc as u64)
    }

    /// Uniformly random element.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement(rng.random_range(0..self.q))
    }

    /// Iterates over every element, 0 first.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q).map(FieldElement)
    }
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in SMALL {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Public constants of one coded segment: one `alpha` per database and a
/// `y x K` grid of `f` values. All `N + y*K` values are distinct and nonzero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalConstants {
    alphas: Vec<FieldElement>,
    f: Vec<FieldElement>,
    y: usize,
    k: usize,
}

impl EvalConstants {
    /// Builds constants from explicit values, checking distinctness.
    pub fn from_parts(alphas: Vec<FieldElement>, f: Vec<FieldElement>, y: usize, k: usize) -> Result<Self> {
        if f.len() != y * k {
            return Err(Error::DimensionMismatch(format!("f has {} entries, expected {}x{}", f.len(), y, k)));
        }
        let mut seen = BTreeSet::new();
        for v in alphas.iter().chain(&f) {
            if !seen.insert(*v) {
                return Err(Error::Invariant(format!("evaluation constant {v} repeated")));
            }
        }
        Ok(Self { alphas, f, y, k })
    }

    pub fn alpha(&self, n: usize) -> FieldElement {
        self.alphas[n]
    }

    pub fn alphas(&self) -> &[FieldElement] {
        &self.alphas
    }

    /// `f_{j,i}` with zero-based `j < y`, `i < K`.
    pub fn f(&self, j: usize, i: usize) -> FieldElement {
        self.f[j * self.k + i]
    }

    pub fn f_values(&self) -> &[FieldElement] {
        &self.f
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    pub fn y(&self) -> usize {
        self.y
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Draws `N + y*K` distinct nonzero constants from a seeded PRNG, sorts them,
/// and hands the smallest `N` to the databases. The rest fill `f` row-major.
pub fn gen_eval_constants(field: &PrimeField, n: usize, y: usize, k: usize, seed: u64) -> Result<EvalConstants> {
    let needed = (n + y * k) as u64;
    if field.modulus() <= needed {
        return Err(Error::FieldTooSmall { q: field.modulus(), needed });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn = BTreeSet::new();
    while (drawn.len() as u64) < needed {
        drawn.insert(rng.random_range(1..field.modulus()));
    }
    let mut values = drawn.into_iter().map(FieldElement);
    let alphas: Vec<_> = values.by_ref().take(n).collect();
    let f: Vec<_> = values.collect();
    EvalConstants::from_parts(alphas, f, y, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_field_examples() {
        assert_eq!(PrimeField::new(251).unwrap().modulus(), 251);
        assert_eq!(PrimeField::new(10), Err(Error::CompositeModulus(10)));
        assert!(PrimeField::new((1 << 31) - 1).is_ok());
        assert!(PrimeField::new(1).is_err());
        assert!(PrimeField::new(0).is_err());
    }

    #[test]
    fn primality_matches_trial_division() {
        fn slow(n: u64) -> bool {
            n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
        }
        for n in 0..5000 {
            assert_eq!(is_prime(n), slow(n), "n = {n}");
        }
        // strong pseudoprimes to several small bases
        for n in [3_215_031_751u64, 2_152_302_898_747, 3_474_749_660_383] {
            assert!(!is_prime(n));
        }
    }

    #[test]
    fn inverse_round_trip() {
        let field = PrimeField::new(SIM_PRIME).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a = field.random(&mut rng);
            let mut b = field.random(&mut rng);
            if b.is_zero() {
                b = FieldElement::ONE;
            }
            let back = field.mul(field.mul(a, b), field.inv(b).unwrap());
            assert_eq!(back, a);
        }
        assert_eq!(field.inv(FieldElement::ZERO), Err(Error::DivisionByZero(SIM_PRIME)));
    }

    #[test]
    fn fermat() {
        let field = PrimeField::new(AUDIT_PRIME).unwrap();
        for a in field.elements().skip(1) {
            assert_eq!(field.pow(a, 250), FieldElement::ONE);
        }
        let big = PrimeField::new(SIM_PRIME).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = big.random(&mut rng);
            if !a.is_zero() {
                assert_eq!(big.pow(a, SIM_PRIME - 1), FieldElement::ONE);
            }
        }
    }

    #[test]
    fn sub_and_neg_wrap() {
        let field = PrimeField::new(7).unwrap();
        assert_eq!(field.sub(field.elem(2), field.elem(5)), field.elem(4));
        assert_eq!(field.neg(field.elem(3)), field.elem(4));
        assert_eq!(field.elem_i64(-1), field.elem(6));
    }

    #[test]
    fn constants_are_distinct_and_nonzero() {
        let field = PrimeField::new(251).unwrap();
        let c = gen_eval_constants(&field, 5, 1, 1, 0).unwrap();
        let all: Vec<_> = c.alphas().iter().chain(c.f_values()).copied().collect();
        assert_eq!(all.len(), 6);
        for i in 0..all.len() {
            assert!(!all[i].is_zero());
            for j in 0..i {
                assert_ne!(all[i], all[j]);
            }
        }
    }

    #[test]
    fn constants_sorted_alphas_first() {
        let field = PrimeField::new(251).unwrap();
        let c = gen_eval_constants(&field, 8, 3, 2, 11).unwrap();
        let all: Vec<_> = c.alphas().iter().chain(c.f_values()).copied().collect();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn constants_need_room() {
        let field = PrimeField::new(7).unwrap();
        assert_eq!(gen_eval_constants(&field, 5, 2, 2, 0), Err(Error::FieldTooSmall { q: 7, needed: 9 }));
        // q = needed + 1 leaves exactly enough nonzero values
        let field = PrimeField::new(11).unwrap();
        let c = gen_eval_constants(&field, 6, 2, 2, 0).unwrap();
        assert_eq!(c.alphas().len() + c.f_values().len(), 10);
    }

    #[test]
    fn constants_deterministic() {
        let field = PrimeField::new(SIM_PRIME).unwrap();
        let a = gen_eval_constants(&field, 12, 4, 3, 99).unwrap();
        let b = gen_eval_constants(&field, 12, 4, 3, 99).unwrap();
        assert_eq!(a, b);
        let c = gen_eval_constants(&field, 12, 4, 3, 100).unwrap();
        assert_ne!(a, c);
    }
}
