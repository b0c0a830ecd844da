//! Splitting one code's storage into replication subsets.
//!
//! Given per-database shares `a(n)` with `Σ a(n) = R / K`, find weights
//! `η_i >= 0` over `R`-element subsets `B_i` with `Σ η_i = 1` and
//! `(1/K) Σ_i η_i [n ∈ B_i] = a(n)` for every `n`. A solution exists iff
//! `max a(n) <= Σ a(n) / R`.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::ratio::{int, to_fraction_string, Rational};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionPart {
    pub eta: Rational,
    /// Sorted, 0-based database ids.
    pub subset: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PartitionSolution {
    pub parts: Vec<PartitionPart>,
}

impl PartitionSolution {
    /// Per-database share implied by the parts, `(1/K) Σ η_i [n ∈ B_i]`.
    pub fn reconstruct(&self, n: usize, k: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); n];
        for part in &self.parts {
            for &db in &part.subset {
                if db < n {
                    out[db] += &part.eta;
                }
            }
        }
        let k = int(k as i64);
        out.into_iter().map(|v| v / &k).collect()
    }

    /// Exact check of every partition invariant against `alloc`.
    pub fn verify(&self, alloc: &[Rational], k: usize, r: usize) -> Result<()> {
        let n = alloc.len();
        let mut total = Rational::zero();
        for part in &self.parts {
            if part.eta.is_negative() || part.eta.is_zero() {
                return Err(Error::Invariant(format!("non-positive weight {}", part.eta)));
            }
            if part.subset.len() != r {
                return Err(Error::Invariant(format!("subset of size {} for replication {r}", part.subset.len())));
            }
            if part.subset.windows(2).any(|w| w[0] >= w[1]) || part.subset.iter().any(|&d| d >= n) {
                return Err(Error::Invariant(format!("malformed subset {:?}", part.subset)));
            }
            total += &part.eta;
        }
        if !total.is_one() {
            return Err(Error::Invariant(format!("weights sum to {}", to_fraction_string(&total))));
        }
        let rebuilt = self.reconstruct(n, k);
        for (db, (got, want)) in rebuilt.iter().zip(alloc).enumerate() {
            if got != want {
                return Err(Error::Invariant(format!(
                    "database {db}: partition gives {}, allocation is {}",
                    to_fraction_string(got),
                    to_fraction_string(want)
                )));
            }
        }
        Ok(())
    }
}

/// Greedy descending fill. Each step serves the `R` databases with the most
/// remaining demand, by the largest amount that keeps the remainder feasible.
pub fn solve_partition(alloc: &[Rational], k: usize, r: usize) -> Result<PartitionSolution> {
    let n = alloc.len();
    if k == 0 || r == 0 || r > n {
        return Err(Error::InfeasibleAllocation(format!(
            "replication {r} with coding parameter {k} over {n} databases"
        )));
    }
    if alloc.iter().any(|a| a.is_negative()) {
        return Err(Error::InfeasibleAllocation("negative share".into()));
    }
    let kk = int(k as i64);
    let rr = int(r as i64);
    let sum: Rational = alloc.iter().sum();
    if sum != &rr / &kk {
        return Err(Error::InfeasibleAllocation(format!(
            "shares sum to {}, expected R/K = {}",
            to_fraction_string(&sum),
            to_fraction_string(&(&rr / &kk))
        )));
    }
    let cap = &sum / &rr;
    if let Some((db, a)) = alloc.iter().enumerate().find(|(_, a)| **a > cap) {
        return Err(Error::InfeasibleAllocation(format!(
            "database {} holds {} but at most {} fits replication {r}",
            db + 1,
            to_fraction_string(a),
            to_fraction_string(&cap)
        )));
    }

    // remaining demand in units where each step of weight η removes η
    let mut rem: Vec<Rational> = alloc.iter().map(|a| a * &kk).collect();
    let mut level = Rational::one();
    let mut parts: Vec<PartitionPart> = Vec::new();
    while level.is_positive() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
        let chosen = &order[..r];
        let mut step = chosen.iter().map(|&d| rem[d].clone()).min().expect("r >= 1");
        if let Some(&out) = order.get(r) {
            let slack = &level - &rem[out];
            if slack < step {
                step = slack;
            }
        }
        if !step.is_positive() {
            return Err(Error::Invariant("partition step vanished".into()));
        }
        let mut subset = chosen.to_vec();
        subset.sort_unstable();
        for &d in &subset {
            rem[d] -= &step;
        }
        level -= &step;
        match parts.iter_mut().find(|p| p.subset == subset) {
            Some(p) => p.eta += step,
            None => parts.push(PartitionPart { eta: step, subset }),
        }
    }
    let solution = PartitionSolution { parts };
    solution.verify(alloc, k, r)?;
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;
    use proptest::prelude::*;

    #[test]
    fn full_replication() {
        let alloc = vec![int(1); 4];
        let sol = solve_partition(&alloc, 1, 4).unwrap();
        assert_eq!(sol.parts, vec![PartitionPart { eta: int(1), subset: vec![0, 1, 2, 3] }]);
    }

    #[test]
    fn leave_one_out_is_unique() {
        // with R = N - 1 every subset omits one database, so η_i = 1 - K a(i)
        let alloc = vec![frac(2, 5), frac(2, 5), frac(1, 2), frac(1, 2), frac(1, 2), frac(1, 5)];
        let sol = solve_partition(&alloc, 2, 5).unwrap();
        for part in &sol.parts {
            let missing = (0..6).find(|d| !part.subset.contains(d)).unwrap();
            assert_eq!(part.eta, int(1) - int(2) * &alloc[missing]);
        }
    }

    #[test]
    fn rejects_overfull_database() {
        let alloc = [frac(9, 10), frac(1, 10), frac(1, 10), frac(1, 10)];
        let sum: Rational = alloc.iter().sum();
        assert_eq!(sum, frac(6, 5));
        // 0.9 > 1.2 / R for R = 2
        let scaled: Vec<_> = alloc.iter().map(|a| a * frac(5, 6) * int(2)).collect();
        assert!(matches!(solve_partition(&scaled, 1, 2), Err(Error::InfeasibleAllocation(_))));
    }

    #[test]
    fn rejects_wrong_total() {
        assert!(solve_partition(&vec![frac(1, 2); 4], 1, 4).is_err());
        assert!(solve_partition(&vec![frac(1, 2); 4], 1, 5).is_err());
    }

    fn feasible_alloc() -> impl Strategy<Value = (Vec<Rational>, usize, usize)> {
        (4usize..12)
            .prop_flat_map(|n| (Just(n), 1usize..=n, 1usize..4, proptest::collection::vec(1i64..40, n)))
            .prop_filter_map("needs a feasible cap", |(n, r, k, weights)| {
                // clip to the cap by water-filling the largest weights down
                let mut w: Vec<Rational> = weights.iter().map(|&v| int(v)).collect();
                for _ in 0..n {
                    let total: Rational = w.iter().sum();
                    let cap = &total / int(r as i64);
                    let mut changed = false;
                    for v in w.iter_mut() {
                        if *v > cap {
                            *v = cap.clone();
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
                let total: Rational = w.iter().sum();
                if total.is_zero() {
                    return None;
                }
                let scale = frac(r as i64, k as i64) / total;
                let alloc: Vec<Rational> = w.into_iter().map(|v| v * &scale).collect();
                let cap = frac(1, k as i64);
                alloc.iter().all(|a| *a <= cap).then_some((alloc, k, r))
            })
    }

    proptest! {
        #[test]
        fn random_feasible_instances((alloc, k, r) in feasible_alloc()) {
            let sol = solve_partition(&alloc, k, r).unwrap();
            prop_assert!(sol.parts.len() <= alloc.len());
            prop_assert!(sol.verify(&alloc, k, r).is_ok());
        }
    }
}
