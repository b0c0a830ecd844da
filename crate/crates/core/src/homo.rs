//! Homogeneous storage: every database holds the same fraction `μ`.
//!
//! Each admissible odd-gap code `(K, R)` with `R <= N` yields a basic point
//! `(μ, C_T) = (R / (N K), 4R / (R - K - 1))`. The lower convex hull of those
//! points is achievable by splitting each submodel between the two codes on
//! either side of `μ`. Each code stores its share with `N` cyclic sections,
//! database `n` holding sections `n, n+1, ..., n+R-1 (mod N)`.

use num_traits::{One, Signed, Zero};

use crate::code::{admissible_codes, CodeSpec};
use crate::error::{Error, Result};
use crate::partition::{PartitionPart, PartitionSolution};
use crate::plan::{HomoDetails, HomoVertex, PlanKind, Segment, StoragePlan};
use crate::ratio::{frac, to_fraction_string, Rational};

/// An achievable `(μ, C_T)` point for a single code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicPair {
    pub r: usize,
    pub k: usize,
    pub mu: Rational,
    pub cost: Rational,
}

impl BasicPair {
    pub fn new(n: usize, code: &CodeSpec) -> Self {
        Self { r: code.r, k: code.k, mu: frac(code.r as i64, (n * code.k) as i64), cost: code.total_cost() }
    }

    pub fn code(&self) -> CodeSpec {
        CodeSpec::derive(self.k, self.r).expect("basic pairs are admissible")
    }

    fn vertex(&self) -> HomoVertex {
        HomoVertex { k: self.k, r: self.r, mu: self.mu.clone(), cost: self.cost.clone() }
    }
}

/// Which codes a cost curve may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    /// Every odd-gap code.
    Hybrid,
    /// Uncoded replication only, `K = 1`.
    Divided,
    /// All databases, `R = N`.
    Coded,
}

impl CurveKind {
    pub const ALL: [CurveKind; 3] = [CurveKind::Hybrid, CurveKind::Divided, CurveKind::Coded];

    pub fn name(&self) -> &'static str {
        match self {
            CurveKind::Hybrid => "hybrid",
            CurveKind::Divided => "divided",
            CurveKind::Coded => "coded",
        }
    }

    fn admits(&self, n: usize, pair: &BasicPair) -> bool {
        match self {
            CurveKind::Hybrid => true,
            CurveKind::Divided => pair.k == 1,
            CurveKind::Coded => pair.r == n,
        }
    }
}

/// All odd-gap pairs for `N` databases, sorted by `μ` then cost.
pub fn basic_pairs(n: usize) -> Vec<BasicPair> {
    let mut pairs: Vec<BasicPair> = (4..=n)
        .flat_map(|r| (1..=r.saturating_sub(3)).map(move |k| (k, r)))
        .filter(|(k, r)| (r - k) % 2 == 1)
        .map(|(k, r)| BasicPair::new(n, &CodeSpec::derive(k, r).expect("odd gap of at least 3")))
        .collect();
    pairs.sort_by(|a, b| a.mu.cmp(&b.mu).then_with(|| a.cost.cmp(&b.cost)).then(a.r.cmp(&b.r)));
    pairs
}

fn cross(o: &BasicPair, a: &BasicPair, b: &BasicPair) -> Rational {
    (&a.mu - &o.mu) * (&b.cost - &o.cost) - (&a.cost - &o.cost) * (&b.mu - &o.mu)
}

/// Lower convex hull, `μ`-ascending. Collinear points stay on the hull; for
/// equal `μ` only the cheapest pair (smallest `R` on ties) is kept. The hull
/// is cut at its cheapest vertex so the returned curve never increases.
pub fn lower_hull(pairs: &[BasicPair]) -> Vec<BasicPair> {
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.mu.cmp(&b.mu).then_with(|| a.cost.cmp(&b.cost)).then(a.r.cmp(&b.r)));
    sorted.dedup_by(|later, earlier| later.mu == earlier.mu);

    let mut hull: Vec<BasicPair> = Vec::new();
    for p in sorted {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], &p).is_negative() {
            hull.pop();
        }
        hull.push(p);
    }
    if let Some(best) = hull.iter().map(|p| p.cost.clone()).min() {
        let last = hull.iter().position(|p| p.cost == best).expect("minimum is present");
        hull.truncate(last + 1);
    }
    hull
}

/// Hull of the pairs a curve kind may use.
pub fn curve_hull(n: usize, kind: CurveKind) -> Vec<BasicPair> {
    let pairs: Vec<BasicPair> = basic_pairs(n).into_iter().filter(|p| kind.admits(n, p)).collect();
    lower_hull(&pairs)
}

/// The two hull vertices around `μ` and the weight on the lower one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bracket {
    pub lo: BasicPair,
    pub hi: BasicPair,
    pub gamma: Rational,
}

impl Bracket {
    pub fn cost(&self) -> Rational {
        &self.gamma * &self.lo.cost + (Rational::one() - &self.gamma) * &self.hi.cost
    }

    pub fn is_vertex(&self) -> bool {
        self.lo == self.hi
    }
}

/// Brackets `μ` between adjacent hull vertices; `None` outside the hull.
pub fn bracket(hull: &[BasicPair], mu: &Rational) -> Option<Bracket> {
    if let Some(v) = hull.iter().find(|v| &v.mu == mu) {
        return Some(Bracket { lo: v.clone(), hi: v.clone(), gamma: Rational::one() });
    }
    hull.windows(2).find(|w| &w[0].mu < mu && mu < &w[1].mu).map(|w| {
        let gamma = (&w[1].mu - mu) / (&w[1].mu - &w[0].mu);
        Bracket { lo: w[0].clone(), hi: w[1].clone(), gamma }
    })
}

/// Database `n` holds sections `n .. n + R - 1 (mod N)`, all 0-based.
pub fn section_allocation(n: usize, r: usize) -> Vec<Vec<usize>> {
    (0..n).map(|db| (0..r).map(|j| (db + j) % n).collect()).collect()
}

/// Sorted holders of every section.
pub fn section_holders(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut holders = vec![Vec::new(); n];
    for (db, sections) in section_allocation(n, r).iter().enumerate() {
        for &s in sections {
            holders[s].push(db);
        }
    }
    holders
}

/// The cyclic layout as a partition: one part of weight `1/N` per section,
/// identical holder sets merged.
pub fn cyclic_partition(n: usize, r: usize) -> PartitionSolution {
    let mut parts: Vec<PartitionPart> = Vec::new();
    let eta = frac(1, n as i64);
    for subset in section_holders(n, r) {
        match parts.iter_mut().find(|p| p.subset == subset) {
            Some(p) => p.eta += &eta,
            None => parts.push(PartitionPart { eta: eta.clone(), subset }),
        }
    }
    PartitionSolution { parts }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomoPlan {
    pub n: usize,
    pub mu: Rational,
    pub gamma: Rational,
    pub lo: BasicPair,
    pub hi: BasicPair,
    pub cost: Rational,
    pub plan: StoragePlan,
}

pub fn plan_homo(n: usize, mu: &Rational) -> Result<HomoPlan> {
    if n < 4 {
        return Err(Error::InvalidConstraints(format!("need at least 4 databases, got {n}")));
    }
    let hull = curve_hull(n, CurveKind::Hybrid);
    let lo_end = &hull[0].mu;
    let hi_end = &hull[hull.len() - 1].mu;
    let out_of_range = || Error::OutOfRange {
        mu: to_fraction_string(mu),
        lo: to_fraction_string(lo_end),
        hi: to_fraction_string(hi_end),
    };
    if mu < lo_end || mu > hi_end {
        return Err(out_of_range());
    }
    let b = bracket(&hull, mu).ok_or_else(out_of_range)?;
    let cost = b.cost();

    let mut segments = Vec::new();
    let mut pieces = vec![(b.lo.clone(), b.gamma.clone())];
    if !b.is_vertex() {
        pieces.push((b.hi.clone(), Rational::one() - &b.gamma));
    }
    for (pair, fraction) in pieces {
        if fraction.is_zero() {
            continue;
        }
        let code = pair.code();
        let share = &fraction * &pair.mu;
        segments.push(Segment { code, fraction, allocation: vec![share; n], partition: cyclic_partition(n, code.r) });
    }
    let plan = StoragePlan {
        kind: PlanKind::Homogeneous,
        constraints: vec![mu.clone(); n],
        derived: None,
        mixture: None,
        homogeneous: Some(HomoDetails { mu: mu.clone(), gamma: b.gamma.clone(), lo: b.lo.vertex(), hi: b.hi.vertex() }),
        predicted_cost: cost.clone(),
        seeds: (0..segments.len() as u64).collect(),
        segments,
    };
    plan.verify()?;
    Ok(HomoPlan { n, mu: mu.clone(), gamma: b.gamma, lo: b.lo, hi: b.hi, cost, plan })
}

/// An even-gap code compared with the odd-gap hull at the same `μ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DominanceReport {
    pub code: CodeSpec,
    pub mu: Rational,
    pub even_cost: Rational,
    /// Hull cost at `μ`; past the cheapest vertex the hull is extended flat.
    pub hull_cost: Rational,
    /// `4(R+1)/(R-K)`, the cost of `(K, R+1)`.
    pub neighbour_bound: Rational,
}

impl DominanceReport {
    pub fn dominated(&self) -> bool {
        self.hull_cost < self.even_cost && self.neighbour_bound < self.even_cost
    }
}

pub fn even_gap_dominance(n: usize, r: usize, k: usize) -> Result<DominanceReport> {
    dominance_against(&curve_hull(n, CurveKind::Hybrid), n, r, k)
}

/// Reports for every admissible even-gap code with `R <= N`.
pub fn even_gap_sweep(n: usize) -> Result<Vec<DominanceReport>> {
    let hull = curve_hull(n, CurveKind::Hybrid);
    admissible_codes(n).iter().filter(|c| !c.odd_gap()).map(|c| dominance_against(&hull, n, c.r, c.k)).collect()
}

fn dominance_against(hull: &[BasicPair], n: usize, r: usize, k: usize) -> Result<DominanceReport> {
    let code = CodeSpec::derive(k, r)?;
    if code.odd_gap() {
        return Err(Error::InvalidConstraints(format!("{code} has an odd gap")));
    }
    if r > n {
        return Err(Error::InvalidConstraints(format!("R = {r} exceeds N = {n}")));
    }
    let mu = frac(r as i64, (n * k) as i64);
    let last = hull.last().expect("N >= 4 has at least one pair");
    let hull_cost = if mu > last.mu {
        last.cost.clone()
    } else {
        bracket(hull, &mu)
            .map(|b| b.cost())
            .ok_or_else(|| Error::Invariant(format!("μ = {} lies outside the hull", to_fraction_string(&mu))))?
    };
    let neighbour_bound = frac(4 * (r as i64 + 1), (r - k) as i64);
    Ok(DominanceReport { code, even_cost: code.total_cost(), mu, hull_cost, neighbour_bound })
}

/// One row of a cost-curve export.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurvePoint {
    pub curve: CurveKind,
    pub mu: Rational,
    pub cost: Rational,
    pub lo: (usize, usize),
    pub hi: (usize, usize),
    pub gamma: Rational,
}

/// Samples a curve at every vertex and at `steps` evenly spaced interior
/// points between consecutive vertices.
pub fn sample_curve(n: usize, kind: CurveKind, steps: usize) -> Vec<CurvePoint> {
    let hull = curve_hull(n, kind);
    let mut mus: Vec<Rational> = Vec::new();
    for w in hull.windows(2) {
        mus.push(w[0].mu.clone());
        for i in 1..=steps {
            let t = frac(i as i64, steps as i64 + 1);
            mus.push(&w[0].mu + t * (&w[1].mu - &w[0].mu));
        }
    }
    if let Some(last) = hull.last() {
        mus.push(last.mu.clone());
    }
    mus.into_iter()
        .map(|mu| {
            let b = bracket(&hull, &mu).expect("sampled inside the hull");
            CurvePoint { curve: kind, cost: b.cost(), lo: (b.lo.r, b.lo.k), hi: (b.hi.r, b.hi.k), gamma: b.gamma, mu }
        })
        .collect()
}

pub(crate) fn min_mu(n: usize) -> Rational {
    frac(1, n as i64 - 3)
}

/// Smallest `μ` any homogeneous plan supports, `1/(N-3)`.
pub fn mu_floor(n: usize) -> Result<Rational> {
    if n < 4 {
        return Err(Error::InvalidConstraints(format!("need at least 4 databases, got {n}")));
    }
    Ok(min_mu(n))
}
