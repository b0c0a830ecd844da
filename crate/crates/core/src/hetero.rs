//! Storage planning for heterogeneous constraints.
//!
//! Submodels are split across up to four MDS codes built from `⌊k⌋, ⌈k⌉`
//! and `⌊r⌋, ⌈r⌉` (or `⌊s⌋, ⌈s⌉` when only `⌊k⌋` is used), every database is
//! filled exactly, and each code's share is cut into replication subsets.

use num_traits::{One, Signed, Zero};

use crate::code::{cost_or_zero, CodeSpec};
use crate::error::{Error, Result};
use crate::partition::solve_partition;
use crate::plan::{PlanKind, Segment, StoragePlan};
use crate::ratio::{ceil_i64, floor_i64, in_unit_interval, int, pos, to_fraction_string, truncate_decimal, Rational};

/// Per-database storage constraints `μ(n)` as exact fractions of the model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSet {
    mu: Vec<Rational>,
}

impl ConstraintSet {
    pub fn new(mu: Vec<Rational>) -> Result<Self> {
        if mu.len() < 4 {
            return Err(Error::InvalidConstraints(format!("need at least 4 databases, got {}", mu.len())));
        }
        for (n, m) in mu.iter().enumerate() {
            if !m.is_positive() || *m > Rational::one() {
                return Err(Error::InvalidConstraints(format!(
                    "database {} has constraint {} outside (0, 1]",
                    n + 1,
                    to_fraction_string(m)
                )));
            }
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> &[Rational] {
        &self.mu
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.mu.windows(2).all(|w| w[0] == w[1])
    }

    pub fn max(&self) -> &Rational {
        self.mu.iter().max().expect("non-empty")
    }

    pub fn total(&self) -> Rational {
        self.mu.iter().sum()
    }
}

/// `k = 1 / max μ`, `p = Σ μ`, `r = k p`, `s = ⌊k⌋ p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivedParams {
    pub k: Rational,
    pub p: Rational,
    pub r: Rational,
    pub s: Rational,
}

impl DerivedParams {
    fn from_k(k: Rational, p: Rational) -> Self {
        let r = &k * &p;
        let s = k.floor() * &p;
        Self { k, p, r, s }
    }

    pub fn k_floor(&self) -> i64 {
        floor_i64(&self.k)
    }

    pub fn k_ceil(&self) -> i64 {
        ceil_i64(&self.k)
    }

    pub fn r_floor(&self) -> i64 {
        floor_i64(&self.r)
    }

    pub fn r_ceil(&self) -> i64 {
        ceil_i64(&self.r)
    }

    pub fn s_floor(&self) -> i64 {
        floor_i64(&self.s)
    }

    pub fn s_ceil(&self) -> i64 {
        ceil_i64(&self.s)
    }
}

pub fn derive_params(cs: &ConstraintSet) -> DerivedParams {
    DerivedParams::from_k(cs.max().recip(), cs.total())
}

/// Same as [`derive_params`] but with `k` truncated to one decimal place,
/// reproducing hand computations that round `k` first.
pub fn derive_params_paper_rounded(cs: &ConstraintSet) -> DerivedParams {
    DerivedParams::from_k(truncate_decimal(&cs.max().recip(), 1), cs.total())
}

/// Cost of the `α = 1` branch: only `⌊k⌋`-coded storage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct C1Branch {
    pub cost: Rational,
    /// Fraction stored with `(⌊k⌋, ⌊s⌋)`, `⌈s⌉ - s`.
    pub beta_tilde: Rational,
    /// `(fraction, K, R)` per code in use.
    pub codes: Vec<(Rational, usize, usize)>,
}

/// `α, β, δ` and the four-code split they induce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixtureSelection {
    pub alpha: Rational,
    pub beta: Rational,
    pub delta: Rational,
    /// Fractions for `(⌊k⌋,⌊r⌋), (⌊k⌋,⌈r⌉), (⌈k⌉,⌊r⌋), (⌈k⌉,⌈r⌉)`.
    pub fractions: [Rational; 4],
    pub codes: [(usize, usize); 4],
}

impl MixtureSelection {
    /// Storage taken by the `⌊k⌋`-coded part, `(α/⌊k⌋)(β⌊r⌋ + (1-β)⌈r⌉)`.
    pub fn floor_k_space(&self) -> Rational {
        let (k, r1) = self.codes[0];
        let r2 = self.codes[1].1;
        (&self.fractions[0] * int(r1 as i64) + &self.fractions[1] * int(r2 as i64)) / int(k as i64)
    }

    /// Storage taken by the `⌈k⌉`-coded part.
    pub fn ceil_k_space(&self) -> Rational {
        let (k, r1) = self.codes[2];
        let r2 = self.codes[3].1;
        (&self.fractions[2] * int(r1 as i64) + &self.fractions[3] * int(r2 as i64)) / int(k as i64)
    }

    pub fn cost(&self) -> Result<Rational> {
        let mut total = Rational::zero();
        for (w, (k, r)) in self.fractions.iter().zip(self.codes) {
            total += cost_or_zero(w, k as i64, r as i64)?;
        }
        Ok(total)
    }

    /// Balance identity and the lower bounds on `α, β, δ` under which the
    /// two-stage allocation is valid.
    pub fn check_feasibility(&self, params: &DerivedParams) -> Result<()> {
        let fail = |what: String| Err(Error::Invariant(format!("mixture infeasible: {what}")));
        for (name, v) in [("alpha", &self.alpha), ("beta", &self.beta), ("delta", &self.delta)] {
            if !in_unit_interval(v) {
                return fail(format!("{name} = {} outside [0, 1]", to_fraction_string(v)));
            }
        }
        let (kf, kc) = (int(params.k_floor()), int(params.k_ceil()));
        let frac_r = &params.r - params.r.floor();
        let alpha0 = alpha_floor(params);
        if self.alpha < alpha0 {
            return fail(format!("alpha below {}", to_fraction_string(&alpha0)));
        }
        let beta_min = pos(Rational::one() - &kf / (&params.k * &self.alpha) * &frac_r);
        if self.beta < beta_min {
            return fail(format!("beta below {}", to_fraction_string(&beta_min)));
        }
        // with alpha = 1 nothing is ⌈k⌉-coded and delta carries no weight
        let delta_min = if self.alpha.is_one() {
            Rational::zero()
        } else {
            pos(Rational::one() - &kc / (&params.k * (Rational::one() - &self.alpha)) * &frac_r)
        };
        if self.delta < delta_min {
            return fail(format!("delta below {}", to_fraction_string(&delta_min)));
        }
        let filled = self.floor_k_space() + self.ceil_k_space();
        if filled != params.p {
            return fail(format!(
                "codes fill {} instead of p = {}",
                to_fraction_string(&filled),
                to_fraction_string(&params.p)
            ));
        }
        Ok(())
    }
}

fn alpha_floor(params: &DerivedParams) -> Rational {
    let (kf, kc) = (int(params.k_floor()), int(params.k_ceil()));
    &kf / &params.k * (kc - &params.k)
}

pub fn compute_c1(params: &DerivedParams) -> Result<C1Branch> {
    let kf = params.k_floor();
    if kf < 1 {
        return Err(Error::InvalidConstraints("k below 1".into()));
    }
    let kf_u = kf as usize;
    if params.s.is_integer() {
        let s = params.s_floor();
        let cost = cost_or_zero(&Rational::one(), kf, s)?;
        return Ok(C1Branch { cost, beta_tilde: Rational::zero(), codes: vec![(Rational::one(), kf_u, s as usize)] });
    }
    let beta_tilde = int(params.s_ceil()) - &params.s;
    let rest = Rational::one() - &beta_tilde;
    let cost = cost_or_zero(&beta_tilde, kf, params.s_floor())? + cost_or_zero(&rest, kf, params.s_ceil())?;
    Ok(C1Branch {
        cost,
        codes: vec![(beta_tilde.clone(), kf_u, params.s_floor() as usize), (rest, kf_u, params.s_ceil() as usize)],
        beta_tilde,
    })
}

/// Closed-form `α, β, δ` for the `α < 1` branch.
pub fn select_mixture(params: &DerivedParams) -> Result<MixtureSelection> {
    if params.k.is_integer() {
        return Err(Error::InvalidConstraints("k is an integer, so the two-parameter mixture does not apply".into()));
    }
    let one = Rational::one();
    let (kf, kc) = (params.k_floor(), params.k_ceil());
    let (rf, rc) = (params.r_floor(), params.r_ceil());
    let (kf_q, kc_q, rf_q, rc_q) = (int(kf), int(kc), int(rf), int(rc));
    let k = &params.k;
    let r = &params.r;
    let p = &params.p;
    let frac_r = r - &rf_q;
    let frac_k = k - &kf_q;
    let alpha0 = alpha_floor(params);
    let (alpha, beta, delta) = if (rf - kf).rem_euclid(2) == 1 {
        let alpha = if frac_r > frac_k && params.s <= rf_q {
            &kf_q * (p * &kc_q - &rc_q) / (&kc_q * &rf_q - &kf_q * &rc_q)
        } else {
            alpha0
        };
        let beta = if frac_r > frac_k && params.s > rf_q { (&rc_q - r) / (&kc_q - k) } else { one.clone() };
        let delta = if frac_r <= frac_k { &one - &frac_r / &frac_k } else { Rational::zero() };
        (alpha, beta, delta)
    } else if frac_r < &kc_q - k {
        let beta = &one - &frac_r / (&kc_q - k);
        (alpha0, beta, one.clone())
    } else {
        let alpha = &kf_q * (p * &kc_q - &rf_q) / (&kc_q * &rc_q - &kf_q * &rf_q);
        (alpha, Rational::zero(), one.clone())
    };
    let fractions =
        [&alpha * &beta, &alpha * (&one - &beta), (&one - &alpha) * &delta, (&one - &alpha) * (&one - &delta)];
    let (kf, kc, rf, rc) = (kf as usize, kc as usize, rf as usize, rc as usize);
    Ok(MixtureSelection { alpha, beta, delta, fractions, codes: [(kf, rf), (kf, rc), (kc, rf), (kc, rc)] })
}

/// Cost of the `α < 1` branch with its mixture.
pub fn compute_c2(params: &DerivedParams) -> Result<(Rational, MixtureSelection)> {
    let mix = select_mixture(params)?;
    Ok((mix.cost()?, mix))
}

/// Intermediate mixing weights; each lies in `[0, 1]` for a valid plan.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GammaFamily {
    pub gamma_tilde: Option<Rational>,
    pub gamma: Option<Rational>,
    pub gamma_hat: Option<Rational>,
    pub gamma_bar: Option<Rational>,
}

impl GammaFamily {
    pub fn values(&self) -> impl Iterator<Item = &Rational> {
        [&self.gamma_tilde, &self.gamma, &self.gamma_hat, &self.gamma_bar].into_iter().flatten()
    }

    pub fn all_in_unit_interval(&self) -> bool {
        self.values().all(in_unit_interval)
    }
}

/// Per-database shares for the four codes, in table order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationTable {
    pub mu_hat1: Vec<Rational>,
    pub mu_hat2: Vec<Rational>,
    pub mu_bar1: Vec<Rational>,
    pub mu_bar2: Vec<Rational>,
    pub gammas: GammaFamily,
}

impl AllocationTable {
    pub fn columns(&self) -> [&Vec<Rational>; 4] {
        [&self.mu_hat1, &self.mu_hat2, &self.mu_bar1, &self.mu_bar2]
    }

    /// Checks totals, per-database caps and per-database sums against the
    /// `(fraction, K, R)` of each column.
    pub fn verify(&self, mu: &[Rational], codes: &[(Rational, usize, usize); 4]) -> Result<()> {
        for (col, (fraction, k, r)) in self.columns().into_iter().zip(codes) {
            let k = int(*k as i64);
            let total: Rational = col.iter().sum();
            let want = fraction * int(*r as i64) / &k;
            if total != want {
                return Err(Error::Invariant(format!(
                    "code column sums to {}, expected {}",
                    to_fraction_string(&total),
                    to_fraction_string(&want)
                )));
            }
            let cap = fraction / &k;
            if let Some(v) = col.iter().find(|v| v.is_negative() || **v > cap) {
                return Err(Error::Invariant(format!(
                    "share {} outside [0, {}]",
                    to_fraction_string(v),
                    to_fraction_string(&cap)
                )));
            }
        }
        for (n, m) in mu.iter().enumerate() {
            let got = &self.mu_hat1[n] + &self.mu_hat2[n] + &self.mu_bar1[n] + &self.mu_bar2[n];
            if got != *m {
                return Err(Error::Invariant(format!(
                    "database {} filled to {} of {}",
                    n + 1,
                    to_fraction_string(&got),
                    to_fraction_string(m)
                )));
            }
        }
        if !self.gammas.all_in_unit_interval() {
            return Err(Error::Invariant("mixing weight outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Splits `total` per database into two columns with column sums `first_sum`
/// and `total_sum - first_sum` and per-database caps `cap1`, `cap2`.
/// Returns the columns and the mixing weight used, if any.
fn two_way_split(
    total: &[Rational],
    first_sum: &Rational,
    cap1: &Rational,
    cap2: &Rational,
) -> Result<(Vec<Rational>, Vec<Rational>, Option<Rational>)> {
    let m: Vec<Rational> = total.iter().map(|t| pos(t - cap2)).collect();
    let h: Vec<Rational> = total.iter().map(|t| pos(t - cap1)).collect();
    let sum_t: Rational = total.iter().sum();
    let sum_m: Rational = m.iter().sum();
    let sum_h: Rational = h.iter().sum();
    let den = &sum_t - &sum_m - &sum_h;
    if den.is_zero() {
        // every database sits at both caps at once; only a uniform split is left
        if total.windows(2).all(|w| w[0] == w[1]) && !sum_t.is_zero() {
            let share = first_sum / &sum_t;
            let a: Vec<Rational> = total.iter().map(|t| t * &share).collect();
            let b: Vec<Rational> = total.iter().zip(&a).map(|(t, x)| t - x).collect();
            return Ok((a, b, None));
        }
        return Err(Error::DegenerateHomogeneous(
            "mixing weight is undefined because every database is at its cap".into(),
        ));
    }
    let g = (first_sum - &sum_m) / den;
    let one = Rational::one();
    let a = total.iter().zip(&m).zip(&h).map(|((t, mm), hh)| mm + (t - mm - hh) * &g).collect();
    let b = total.iter().zip(&m).zip(&h).map(|((t, mm), hh)| hh + (t - mm - hh) * (&one - &g)).collect();
    Ok((a, b, Some(g)))
}

/// Allocation for the `α = 1` branch.
pub fn allocate_single_k(cs: &ConstraintSet, params: &DerivedParams) -> Result<AllocationTable> {
    let n = cs.n();
    let zeros = vec![Rational::zero(); n];
    if params.s.is_integer() {
        return Ok(AllocationTable {
            mu_hat1: cs.mu().to_vec(),
            mu_hat2: zeros.clone(),
            mu_bar1: zeros.clone(),
            mu_bar2: zeros,
            gammas: GammaFamily::default(),
        });
    }
    let kf = int(params.k_floor());
    let beta_tilde = int(params.s_ceil()) - &params.s;
    let rest = &params.s - params.s.floor();
    let first_sum = int(params.s_floor()) / &kf * &beta_tilde;
    let (a, b, g) = two_way_split(cs.mu(), &first_sum, &(&beta_tilde / &kf), &(&rest / &kf))?;
    if g.is_none() {
        return Err(Error::DegenerateHomogeneous("all constraints equal 1/⌊k⌋".into()));
    }
    Ok(AllocationTable {
        mu_hat1: a,
        mu_hat2: b,
        mu_bar1: zeros.clone(),
        mu_bar2: zeros,
        gammas: GammaFamily { gamma_tilde: g, ..Default::default() },
    })
}

/// Allocation for the `α < 1` branch: first `⌊k⌋` vs `⌈k⌉`, then each of
/// those between `⌊r⌋` and `⌈r⌉`.
pub fn allocate_split_k(cs: &ConstraintSet, params: &DerivedParams, mix: &MixtureSelection) -> Result<AllocationTable> {
    let one = Rational::one();
    let (kf, kc) = (int(params.k_floor()), int(params.k_ceil()));
    let floor_space = mix.floor_k_space();
    let (mu_hat, mu_bar, gamma) =
        two_way_split(cs.mu(), &floor_space, &(&mix.alpha / &kf), &((&one - &mix.alpha) / &kc))?;
    if gamma.is_none() {
        return Err(Error::DegenerateHomogeneous("constraints are homogeneous at 1/k".into()));
    }
    let rf = int(params.r_floor());
    let stage = |share: &Vec<Rational>, weight: &Rational, frac: &Rational, kk: &Rational| {
        if frac.is_zero() || frac.is_one() {
            let first: Vec<Rational> = share.iter().map(|v| v * frac).collect();
            let second = share.iter().map(|v| v * (&one - frac)).collect();
            return Ok((first, second, None));
        }
        let first_sum = weight * frac / kk * &rf;
        two_way_split(share, &first_sum, &(weight * frac / kk), &(weight * (&one - frac) / kk))
    };
    let (mu_hat1, mu_hat2, gamma_hat) = stage(&mu_hat, &mix.alpha, &mix.beta, &kf)?;
    let (mu_bar1, mu_bar2, gamma_bar) = stage(&mu_bar, &(&one - &mix.alpha), &mix.delta, &kc)?;
    Ok(AllocationTable {
        mu_hat1,
        mu_hat2,
        mu_bar1,
        mu_bar2,
        gammas: GammaFamily { gamma_tilde: None, gamma, gamma_hat, gamma_bar },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    C1,
    C2,
}

#[derive(Clone, Debug, Default)]
pub struct HeteroOptions {
    pub paper_rounded: bool,
}

#[derive(Clone, Debug)]
pub struct HeteroPlan {
    pub params: DerivedParams,
    /// Branch costs, or the reason the branch is unavailable.
    pub c1: std::result::Result<Rational, Error>,
    pub c2: std::result::Result<Rational, Error>,
    pub branch: Branch,
    pub mixture: Option<MixtureSelection>,
    pub table: AllocationTable,
    pub plan: StoragePlan,
}

pub fn plan_hetero(cs: &ConstraintSet) -> Result<HeteroPlan> {
    plan_hetero_with(cs, &HeteroOptions::default())
}

pub fn plan_hetero_with(cs: &ConstraintSet, opts: &HeteroOptions) -> Result<HeteroPlan> {
    if cs.is_homogeneous() {
        return Err(Error::DegenerateHomogeneous(
            "all constraints are equal; use the homogeneous planner (plan-homo)".into(),
        ));
    }
    let params = if opts.paper_rounded { derive_params_paper_rounded(cs) } else { derive_params(cs) };
    let c1 = compute_c1(&params);
    let c2 = compute_c2(&params);
    let branch = match (&c1, &c2) {
        // alpha = 1 is the single-⌊k⌋ storage of the first branch
        (Ok(a), Ok((b, mix))) => {
            if *b <= a.cost && !mix.alpha.is_one() {
                Branch::C2
            } else {
                Branch::C1
            }
        }
        (Ok(_), Err(_)) => Branch::C1,
        (Err(_), Ok(_)) => Branch::C2,
        (Err(e), Err(_)) => return Err(e.clone()),
    };
    let one = Rational::one();
    let (table, codes, cost, mixture) = match branch {
        Branch::C1 => {
            let c = c1.clone()?;
            let table = allocate_single_k(cs, &params)?;
            let zero = (Rational::zero(), 1, 4);
            let codes = if c.codes.len() == 1 {
                [c.codes[0].clone(), zero.clone(), zero.clone(), zero]
            } else {
                [c.codes[0].clone(), c.codes[1].clone(), zero.clone(), zero]
            };
            (table, codes, c.cost, None)
        }
        Branch::C2 => {
            let (cost, mix) = c2.clone()?;
            mix.check_feasibility(&params)?;
            let table = allocate_split_k(cs, &params, &mix)?;
            let codes = [0, 1, 2, 3].map(|i| (mix.fractions[i].clone(), mix.codes[i].0, mix.codes[i].1));
            (table, codes, cost, Some(mix))
        }
    };
    table.verify(cs.mu(), &codes)?;

    let mut segments: Vec<Segment> = Vec::new();
    for (col, (fraction, k, r)) in table.columns().into_iter().zip(&codes) {
        if fraction.is_zero() {
            if col.iter().any(|v| !v.is_zero()) {
                return Err(Error::Invariant("storage assigned to an unused code".into()));
            }
            continue;
        }
        let code = CodeSpec::derive(*k, *r)?;
        match segments.iter_mut().find(|s| s.code == code) {
            Some(seg) => {
                seg.fraction += fraction;
                for (a, b) in seg.allocation.iter_mut().zip(col) {
                    *a += b;
                }
            }
            None => segments.push(Segment {
                code,
                fraction: fraction.clone(),
                allocation: col.clone(),
                partition: Default::default(),
            }),
        }
    }
    for seg in &mut segments {
        let normalized: Vec<Rational> = seg.allocation.iter().map(|a| a / &seg.fraction).collect();
        seg.partition = solve_partition(&normalized, seg.code.k, seg.code.r)?;
    }
    let total: Rational = segments.iter().map(|s| s.fraction.clone()).sum();
    if total != one {
        return Err(Error::Invariant(format!("segment fractions sum to {}", to_fraction_string(&total))));
    }
    let seeds = (0..segments.len() as u64).collect();
    let plan = StoragePlan {
        kind: PlanKind::Heterogeneous,
        constraints: cs.mu().to_vec(),
        derived: Some(params.clone()),
        mixture: mixture.clone(),
        homogeneous: None,
        segments,
        predicted_cost: cost,
        seeds,
    };
    plan.verify()?;
    Ok(HeteroPlan { params, c1: c1.map(|c| c.cost), c2: c2.map(|(c, _)| c), branch, mixture, table, plan })
}

/// Stores everything with one `(K, R)` code, `K = R / p`; mainly a probe of
/// whether replication `R` is feasible for the constraints.
pub fn plan_single_code(cs: &ConstraintSet, r: usize) -> Result<StoragePlan> {
    let p = cs.total();
    let n = cs.n();
    if r == 0 || r > n {
        return Err(Error::InvalidConstraints(format!("replication {r} with {n} databases")));
    }
    let cap = &p / int(r as i64);
    if let Some((db, m)) = cs.mu().iter().enumerate().find(|(_, m)| **m > cap) {
        return Err(Error::InfeasibleAllocation(format!(
            "database {} has constraint {} above p/R = {}, so replication {r} cannot fill it",
            db + 1,
            to_fraction_string(m),
            to_fraction_string(&cap)
        )));
    }
    let k = int(r as i64) / &p;
    if !k.is_integer() {
        return Err(Error::InvalidConstraints(format!(
            "R/p = {} is not an integer coding parameter",
            to_fraction_string(&k)
        )));
    }
    let code = CodeSpec::derive(floor_i64(&k) as usize, r)?;
    let partition = solve_partition(cs.mu(), code.k, code.r)?;
    let plan = StoragePlan {
        kind: PlanKind::SingleCode,
        constraints: cs.mu().to_vec(),
        derived: Some(derive_params(cs)),
        mixture: None,
        homogeneous: None,
        predicted_cost: code.total_cost(),
        segments: vec![Segment { code, fraction: Rational::one(), allocation: cs.mu().to_vec(), partition }],
        seeds: vec![0],
    };
    plan.verify()?;
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::cost_function;
    use crate::ratio::{frac, parse_rational, to_f64};

    fn worked_constraints() -> ConstraintSet {
        let mut mu = vec![frac(37, 100); 5];
        mu.extend(vec![frac(35, 100); 7]);
        ConstraintSet::new(mu).unwrap()
    }

    #[test]
    fn constraint_validation() {
        assert!(ConstraintSet::new(vec![frac(1, 2); 3]).is_err());
        assert!(ConstraintSet::new(vec![frac(1, 2), int(0), frac(1, 2), frac(1, 2)]).is_err());
        assert!(ConstraintSet::new(vec![frac(1, 2), frac(3, 2), frac(1, 2), frac(1, 2)]).is_err());
        assert!(ConstraintSet::new(vec![frac(1, 2); 4]).unwrap().is_homogeneous());
    }

    #[test]
    fn derived_exact_and_rounded() {
        let cs = worked_constraints();
        let d = derive_params(&cs);
        assert_eq!(d.k, frac(100, 37));
        assert_eq!(d.p, frac(43, 10));
        assert_eq!(d.r, frac(430, 37));
        assert_eq!(d.s, frac(86, 10));
        let d = derive_params_paper_rounded(&cs);
        assert_eq!(d.k, frac(27, 10));
        assert_eq!(d.r, frac(1161, 100));
        assert_eq!(d.s, frac(86, 10));
        let h = ConstraintSet::new(vec![frac(1, 2); 8]).unwrap();
        let d = derive_params(&h);
        assert_eq!((d.k, d.p, d.r, d.s), (int(2), int(4), int(8), int(8)));
    }

    #[test]
    fn c1_examples() {
        let d = derive_params_paper_rounded(&worked_constraints());
        let c1 = compute_c1(&d).unwrap();
        assert_eq!(c1.cost, frac(33, 5));
        assert_eq!(c1.beta_tilde, frac(2, 5));
        // integer s collapses to one code
        let d = DerivedParams::from_k(int(2), int(4));
        assert_eq!(compute_c1(&d).unwrap().cost, frac(15, 2));
        // k = 1.5, p = 4.5 gives s = 4.5
        let d = DerivedParams::from_k(frac(3, 2), frac(9, 2));
        let brute = frac(1, 2) * cost_function(1, 4).unwrap() + frac(1, 2) * cost_function(1, 5).unwrap();
        assert_eq!(compute_c1(&d).unwrap().cost, brute);
        assert_eq!(brute, frac(17, 2));
    }

    #[test]
    fn c2_worked_values() {
        let d = derive_params_paper_rounded(&worked_constraints());
        let (cost, mix) = compute_c2(&d).unwrap();
        assert_eq!(mix.alpha, frac(2, 9));
        assert_eq!(mix.beta, int(1));
        assert_eq!(mix.delta, frac(9, 70));
        // (2/9) 11/2 + (7/9)(9/70) 7 + (7/9)(61/70) 6
        let expected =
            frac(2, 9) * frac(11, 2) + frac(7, 9) * frac(9, 70) * int(7) + frac(7, 9) * frac(61, 70) * int(6);
        assert_eq!(cost, expected);
        assert!((to_f64(&cost) - 5.99).abs() < 0.005);
        mix.check_feasibility(&d).unwrap();
    }

    #[test]
    fn integer_r_keeps_delta_one() {
        // k = 5/2, p = 4 so r = 10 exactly
        let d = DerivedParams::from_k(frac(5, 2), int(4));
        let mix = select_mixture(&d).unwrap();
        assert_eq!(mix.alpha, frac(2, 5));
        assert_eq!(mix.delta, int(1));
        mix.check_feasibility(&d).unwrap();
    }

    #[test]
    fn integer_k_has_no_mixture() {
        let d = DerivedParams::from_k(int(2), frac(9, 2));
        assert!(select_mixture(&d).is_err());
    }

    #[test]
    fn balance_identity_on_grid() {
        // sweep k and p over a grid of non-integer values
        for kn in 11..60 {
            let k = frac(kn, 10);
            if k.is_integer() {
                continue;
            }
            for pn in 40..200 {
                let p = frac(pn, 10);
                let d = DerivedParams::from_k(k.clone(), p);
                if d.r_floor() < d.k_ceil() + 3 {
                    continue;
                }
                let mix = select_mixture(&d).unwrap();
                mix.check_feasibility(&d).unwrap_or_else(|e| panic!("k={k} p={}: {e}", d.p));
            }
        }
    }

    #[test]
    fn worked_allocation() {
        let cs = worked_constraints();
        let d = derive_params_paper_rounded(&cs);
        let (_, mix) = compute_c2(&d).unwrap();
        let t = allocate_split_k(&cs, &d, &mix).unwrap();
        let close = |v: &Rational, want: f64| (to_f64(v) - want).abs() < 5e-4;
        for n in 0..12 {
            let (h1, b1) = if n < 5 { (0.1107, 0.033) } else { (0.0951, 0.029) };
            assert!(close(&t.mu_hat1[n], h1), "{n}: {}", to_f64(&t.mu_hat1[n]));
            assert!(close(&t.mu_bar1[n], b1), "{n}: {}", to_f64(&t.mu_bar1[n]));
            assert!(t.mu_hat2[n].is_zero());
            assert!(close(&t.mu_bar2[n], 0.226));
        }
        assert_eq!(t.gammas.gamma, Some(frac(3, 13)));
    }

    #[test]
    fn worked_plan() {
        let cs = worked_constraints();
        let plan = plan_hetero_with(&cs, &HeteroOptions { paper_rounded: true }).unwrap();
        assert_eq!(plan.branch, Branch::C2);
        assert_eq!(plan.c1.clone().unwrap(), frac(33, 5));
        assert_eq!(plan.plan.predicted_cost, plan.c2.clone().unwrap());
        let seg = plan.plan.segments.iter().find(|s| (s.code.k, s.code.r) == (2, 11)).unwrap();
        let alpha = frac(2, 9);
        for part in &seg.partition.parts {
            let missing: Vec<usize> = (0..12).filter(|d| !part.subset.contains(d)).collect();
            assert_eq!(missing.len(), 1);
            if missing[0] >= 5 {
                assert!((to_f64(&(&alpha * &part.eta)) - 0.0315).abs() < 5e-4);
            }
        }
    }

    #[test]
    fn homogeneous_rejected() {
        let cs = ConstraintSet::new(vec![frac(1, 2); 8]).unwrap();
        assert!(matches!(plan_hetero(&cs), Err(Error::DegenerateHomogeneous(_))));
    }

    #[test]
    fn single_k_sums() {
        let mu: Vec<Rational> = ["0.3", "0.25", "0.2", "0.2", "0.3", "0.15", "0.3", "0.1"]
            .iter()
            .map(|s| parse_rational(s).unwrap())
            .collect();
        let cs = ConstraintSet::new(mu).unwrap();
        let d = derive_params(&cs);
        let t = allocate_single_k(&cs, &d).unwrap();
        let s1: Rational = t.mu_hat1.iter().sum();
        let kf = int(d.k_floor());
        assert_eq!(s1, int(d.s_floor()) / &kf * (int(d.s_ceil()) - &d.s));
        assert!(t.gammas.all_in_unit_interval());
    }

    #[test]
    fn single_code_probe() {
        let cs = ConstraintSet::new(["0.9", "0.1", "0.1", "0.1"].iter().map(|s| parse_rational(s).unwrap()).collect())
            .unwrap();
        assert!(matches!(plan_single_code(&cs, 4), Err(Error::InfeasibleAllocation(_))));
        let mut mu = vec![frac(1, 2); 4];
        mu.extend(vec![frac(1, 4); 4]);
        let cs = ConstraintSet::new(mu).unwrap();
        let plan = plan_single_code(&cs, 6).unwrap();
        assert_eq!(plan.segments[0].code, CodeSpec::derive(2, 6).unwrap());
    }
}
