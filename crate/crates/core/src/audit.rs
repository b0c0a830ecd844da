//! Exact privacy and security audits over a small field.
//!
//! Each check fixes the public constants, enumerates the relevant noise space
//! exhaustively and compares the resulting distributions of what a single
//! database sees. Distances are exact rationals. Negative controls run the
//! same enumeration with the noise zeroed and must show a positive distance.
//!
//! The storage noise space `q^(y (x+1) M)` is too large to walk in full, so
//! storage checks enumerate the constant-term noise `Z[j][0][m]` exhaustively
//! with the remaining noise pinned to a few fixed assignments. Uniformity
//! conditional on every pinned assignment implies uniformity of the marginal.

use std::collections::HashMap;

use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::code::CodeSpec;
use crate::error::{Error, Result};
use crate::field::{gen_eval_constants, FieldElement, PrimeField, AUDIT_PRIME};
use crate::protocol::{CodedSegment, PlainSubpacket};
use crate::ratio::{frac, to_fraction_string, Rational};

type Fe = FieldElement;
type Histogram = HashMap<Vec<u64>, u64>;

/// Codes audited by default: one with an empty null set and one without.
pub const AUDIT_CODES: [(usize, usize); 2] = [(1, 4), (1, 5)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    Query,
    Update,
    Storage,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditOptions {
    pub q: u64,
    pub m: usize,
    /// Run the main checks with the noise removed, as a broken client would.
    pub omit_noise: bool,
    pub seed: u64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { q: AUDIT_PRIME, m: 2, omit_noise: false, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditCheck {
    pub kind: AuditKind,
    pub code: CodeSpec,
    /// 1-based database position inside the code.
    pub database: usize,
    /// Noise assignments enumerated per distribution.
    pub points: u64,
    /// Number of distributions compared against the reference.
    pub compared: usize,
    pub max_tv: String,
    #[serde(skip)]
    tv: Rational,
}

impl AuditCheck {
    pub fn tv(&self) -> &Rational {
        &self.tv
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub q: u64,
    pub m: usize,
    pub noise_removed: bool,
    pub checks: Vec<AuditCheck>,
    pub controls: Vec<AuditCheck>,
    pub max_tv: String,
    pub controls_detected: bool,
    pub passed: bool,
}

/// Total-variation distance between two histograms over the same number of
/// samples.
pub fn total_variation(a: &Histogram, b: &Histogram) -> Rational {
    let total: u64 = a.values().sum();
    debug_assert_eq!(total, b.values().sum::<u64>());
    if total == 0 {
        return Rational::zero();
    }
    let mut diff: u64 = 0;
    for (k, &ca) in a {
        diff += ca.abs_diff(*b.get(k).unwrap_or(&0));
    }
    for (k, &cb) in b {
        if !a.contains_key(k) {
            diff += cb;
        }
    }
    frac(diff as i64, 2 * total as i64)
}

/// Calls `visit` with every vector of `len` field elements, lexicographic.
fn for_each_vector(field: &PrimeField, len: usize, mut visit: impl FnMut(&[Fe]) -> Result<()>) -> Result<()> {
    let q = field.modulus();
    let mut digits = vec![0u64; len];
    let mut buf = vec![Fe::ZERO; len];
    loop {
        for (b, d) in buf.iter_mut().zip(&digits) {
            *b = field.elem(*d);
        }
        visit(&buf)?;
        let mut i = 0;
        loop {
            if i == len {
                return Ok(());
            }
            digits[i] += 1;
            if digits[i] < q {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

fn space_size(field: &PrimeField, len: usize) -> u64 {
    field.modulus().pow(len as u32)
}

fn key(v: &[Fe]) -> Vec<u64> {
    v.iter().map(|e| e.value()).collect()
}

fn segment(field: PrimeField, k: usize, r: usize, m: usize, seed: u64) -> Result<CodedSegment> {
    let spec = CodeSpec::derive(k, r)?;
    let consts = gen_eval_constants(&field, r, spec.y, spec.k, seed)?;
    CodedSegment::new(field, spec, consts, m)
}

fn max_tv(reference: &[Histogram], others: &[Vec<Histogram>]) -> Vec<Rational> {
    (0..reference.len())
        .map(|n| others.iter().map(|h| total_variation(&reference[n], &h[n])).max().unwrap_or_else(Rational::zero))
        .collect()
}

fn checks(kind: AuditKind, seg: &CodedSegment, points: u64, compared: usize, tvs: Vec<Rational>) -> Vec<AuditCheck> {
    tvs.into_iter()
        .enumerate()
        .map(|(n, tv)| AuditCheck {
            kind,
            code: *seg.spec(),
            database: n + 1,
            points,
            compared,
            max_tv: to_fraction_string(&tv),
            tv,
        })
        .collect()
}

/// Distribution of each database's query over all query noise, per index.
pub fn audit_queries(seg: &CodedSegment, omit_noise: bool) -> Result<Vec<AuditCheck>> {
    let field = *seg.field();
    let r = seg.spec().r;
    let len = seg.query_noise_len();
    let zeros = vec![Fe::ZERO; len];
    let per_theta = (0..seg.submodels())
        .map(|theta| {
            let mut hist: Vec<Histogram> = vec![HashMap::new(); r];
            for_each_vector(&field, len, |noise| {
                let bundle = seg.build_queries_with_noise(theta, if omit_noise { &zeros } else { noise })?;
                for (n, h) in hist.iter_mut().enumerate() {
                    let seen: Vec<Fe> = bundle.for_database(n).vectors.concat();
                    *h.entry(key(&seen)).or_insert(0) += 1;
                }
                Ok(())
            })?;
            Ok(hist)
        })
        .collect::<Result<Vec<_>>>()?;
    let tvs = max_tv(&per_theta[0], &per_theta[1..]);
    Ok(checks(AuditKind::Query, seg, space_size(&field, len), per_theta.len() - 1, tvs))
}

/// Distribution of each database's update symbols over the update noise, for
/// every update value of one subpacket.
pub fn audit_updates(seg: &CodedSegment, omit_noise: bool) -> Result<Vec<AuditCheck>> {
    let field = *seg.field();
    let r = seg.spec().r;
    let null_set = seg.null_set();
    let len = seg.update_noise_len();
    let zeros = vec![Fe::ZERO; len];
    let mut per_delta: Vec<Vec<Histogram>> = Vec::new();
    for_each_vector(&field, seg.spec().subpacket_params(), |delta| {
        let mut hist: Vec<Histogram> = vec![HashMap::new(); r];
        for_each_vector(&field, len, |noise| {
            let bundle = seg.build_updates_with_noise(delta, &null_set, if omit_noise { &zeros } else { noise })?;
            for (n, h) in hist.iter_mut().enumerate() {
                let seen = bundle.payloads[n].as_ref().map(|u| key(&u.values)).unwrap_or_default();
                *h.entry(seen).or_insert(0) += 1;
            }
            Ok(())
        })?;
        per_delta.push(hist);
        Ok(())
    })?;
    let tvs = max_tv(&per_delta[0], &per_delta[1..]);
    Ok(checks(AuditKind::Update, seg, space_size(&field, len), per_delta.len() - 1, tvs))
}

/// Distribution of each database's stored column for several models.
pub fn audit_storage(seg: &CodedSegment, omit_noise: bool, seed: u64) -> Result<Vec<AuditCheck>> {
    let field = *seg.field();
    let spec = *seg.spec();
    let (m, y, x) = (seg.submodels(), spec.y, spec.x);
    let r = spec.r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let models: Vec<PlainSubpacket> = std::iter::once(PlainSubpacket::zeros(m, y, spec.k))
        .chain((0..2).map(|_| PlainSubpacket::random(&field, m, y, spec.k, &mut rng)))
        .collect();
    let full = seg.storage_noise_len();
    let pinned: Vec<Vec<Fe>> =
        std::iter::once(vec![Fe::ZERO; full]).chain(std::iter::once(seg.random_noise(full, &mut rng))).collect();
    // positions of Z[j][0][m] inside Z[j][t][m]
    let free: Vec<usize> = (0..y).flat_map(|j| (0..m).map(move |mm| j * (x + 1) * m + mm)).collect();
    let mut worst = vec![Rational::zero(); r];
    for base in &pinned {
        let per_model = models
            .iter()
            .map(|plain| {
                let mut hist: Vec<Histogram> = vec![HashMap::new(); r];
                let mut noise = base.clone();
                for_each_vector(&field, free.len(), |vals| {
                    for (&pos, &v) in free.iter().zip(vals) {
                        noise[pos] = if omit_noise { Fe::ZERO } else { v };
                    }
                    if omit_noise {
                        noise.iter_mut().for_each(|z| *z = Fe::ZERO);
                    }
                    let cols = seg.encode_subpacket_with_noise(plain, &noise)?;
                    for (h, col) in hist.iter_mut().zip(&cols) {
                        *h.entry(key(col)).or_insert(0) += 1;
                    }
                    Ok(())
                })?;
                Ok(hist)
            })
            .collect::<Result<Vec<_>>>()?;
        for (w, tv) in worst.iter_mut().zip(max_tv(&per_model[0], &per_model[1..])) {
            if tv > *w {
                *w = tv;
            }
        }
    }
    Ok(checks(AuditKind::Storage, seg, space_size(&field, free.len()), models.len() - 1, worst))
}

fn audit_code(seg: &CodedSegment, omit_noise: bool, seed: u64) -> Result<Vec<AuditCheck>> {
    let mut out = audit_queries(seg, omit_noise)?;
    out.extend(audit_updates(seg, omit_noise)?);
    out.extend(audit_storage(seg, omit_noise, seed)?);
    Ok(out)
}

/// Runs every check on [`AUDIT_CODES`] plus the noise-free controls.
pub fn audit_privacy(opts: &AuditOptions) -> Result<AuditReport> {
    let field = PrimeField::new(opts.q)?;
    if opts.m < 2 {
        return Err(Error::InvalidConstraints(format!("the audit needs M >= 2, got {}", opts.m)));
    }
    let mut checks = Vec::new();
    let mut controls = Vec::new();
    for (i, &(k, r)) in AUDIT_CODES.iter().enumerate() {
        let seg = segment(field, k, r, opts.m, opts.seed.wrapping_add(i as u64))?;
        let space = space_size(&field, seg.query_noise_len().max(seg.spec().y * opts.m));
        if space > 1 << 24 {
            return Err(Error::InvalidConstraints(format!(
                "q = {} and M = {} are too large to enumerate",
                opts.q, opts.m
            )));
        }
        checks.extend(audit_code(&seg, opts.omit_noise, opts.seed)?);
        controls.extend(audit_code(&seg, true, opts.seed)?);
    }
    let worst = checks.iter().map(|c| c.tv.clone()).max().unwrap_or_else(Rational::zero);
    // every kind of leak must be caught by at least one control database
    let controls_detected = [AuditKind::Query, AuditKind::Update, AuditKind::Storage]
        .iter()
        .all(|kind| controls.iter().any(|c| c.kind == *kind && c.tv.is_positive()));
    Ok(AuditReport {
        q: opts.q,
        m: opts.m,
        noise_removed: opts.omit_noise,
        max_tv: to_fraction_string(&worst),
        passed: worst.is_zero() && controls_detected,
        checks,
        controls,
        controls_detected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::int;

    fn small() -> PrimeField {
        PrimeField::new(13).unwrap()
    }

    #[test]
    fn tv_of_disjoint_and_equal() {
        let a: Histogram = [(vec![1], 2)].into_iter().collect();
        let b: Histogram = [(vec![2], 2)].into_iter().collect();
        let c: Histogram = [(vec![1], 1), (vec![2], 1)].into_iter().collect();
        assert_eq!(total_variation(&a, &b), int(1));
        assert_eq!(total_variation(&a, &a), int(0));
        assert_eq!(total_variation(&a, &c), frac(1, 2));
    }

    #[test]
    fn enumeration_visits_everything() {
        let f = small();
        let mut seen = std::collections::HashSet::new();
        for_each_vector(&f, 2, |v| {
            seen.insert(key(v));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 169);
    }

    #[test]
    fn small_field_checks_are_clean() {
        let seg = segment(small(), 1, 4, 2, 3).unwrap();
        for c in audit_code(&seg, false, 1).unwrap() {
            assert!(c.tv.is_zero(), "{c:?}");
        }
    }

    #[test]
    fn small_field_controls_leak() {
        let seg = segment(small(), 1, 5, 2, 4).unwrap();
        let controls = audit_code(&seg, true, 1).unwrap();
        for kind in [AuditKind::Query, AuditKind::Update, AuditKind::Storage] {
            assert!(controls.iter().any(|c| c.kind == kind && c.tv.is_positive()), "{kind:?}");
        }
    }

    #[test]
    fn null_set_member_sees_nothing() {
        let seg = segment(small(), 1, 5, 2, 4).unwrap();
        let upd = audit_updates(&seg, true).unwrap();
        // position 1 is the null set of (1,5) and never gets a payload
        assert!(upd[0].tv.is_zero());
        assert!(upd[1..].iter().all(|c| c.tv.is_positive()));
    }

    #[test]
    fn composite_modulus_rejected() {
        let opts = AuditOptions { q: 10, ..AuditOptions::default() };
        assert!(matches!(audit_privacy(&opts), Err(Error::CompositeModulus(10))));
    }
}
