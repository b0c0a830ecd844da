//! Storage plans shared by both planners, and their JSON file form.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::code::CodeSpec;
use crate::error::{Error, Result};
use crate::hetero::{DerivedParams, MixtureSelection};
use crate::partition::{PartitionPart, PartitionSolution};
use crate::ratio::{int, parse_rational, to_fraction_string, Rational};

pub const PLAN_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Heterogeneous,
    Homogeneous,
    SingleCode,
}

/// One code's slice of every submodel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub code: CodeSpec,
    /// Fraction of each submodel's parameters stored with this code.
    pub fraction: Rational,
    /// Share of each database's capacity used by this code (model units).
    pub allocation: Vec<Rational>,
    /// Replication subsets for the segment, weights relative to the segment.
    pub partition: PartitionSolution,
}

/// One vertex of the homogeneous mixture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomoVertex {
    pub k: usize,
    pub r: usize,
    pub mu: Rational,
    pub cost: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HomoDetails {
    pub mu: Rational,
    pub gamma: Rational,
    pub lo: HomoVertex,
    pub hi: HomoVertex,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoragePlan {
    pub kind: PlanKind,
    pub constraints: Vec<Rational>,
    pub derived: Option<DerivedParams>,
    pub mixture: Option<MixtureSelection>,
    pub homogeneous: Option<HomoDetails>,
    pub segments: Vec<Segment>,
    pub predicted_cost: Rational,
    /// Seed for the public constants of each segment.
    pub seeds: Vec<u64>,
}

impl StoragePlan {
    pub fn n(&self) -> usize {
        self.constraints.len()
    }

    /// Exact check of every structural invariant.
    pub fn verify(&self) -> Result<()> {
        let n = self.n();
        if self.segments.is_empty() {
            return Err(Error::Plan("no segments".into()));
        }
        if self.seeds.len() != self.segments.len() {
            return Err(Error::Plan(format!("{} seeds for {} segments", self.seeds.len(), self.segments.len())));
        }
        let mut fraction_total = Rational::zero();
        let mut filled = vec![Rational::zero(); n];
        let mut replicated = Rational::zero();
        let mut cost = Rational::zero();
        for (idx, seg) in self.segments.iter().enumerate() {
            seg.code.validate()?;
            if !seg.fraction.is_positive() {
                return Err(Error::Plan(format!("segment {idx} has non-positive fraction")));
            }
            if seg.allocation.len() != n {
                return Err(Error::Plan(format!("segment {idx} allocates {} databases of {n}", seg.allocation.len())));
            }
            if seg.code.r > n {
                return Err(Error::Plan(format!("segment {idx} replicates over {} of {n} databases", seg.code.r)));
            }
            let normalized: Vec<Rational> = seg.allocation.iter().map(|a| a / &seg.fraction).collect();
            seg.partition
                .verify(&normalized, seg.code.k, seg.code.r)
                .map_err(|e| Error::Plan(format!("segment {idx}: {e}")))?;
            for (f, a) in filled.iter_mut().zip(&seg.allocation) {
                *f += a;
            }
            fraction_total += &seg.fraction;
            replicated += &seg.fraction * int(seg.code.r as i64) / int(seg.code.k as i64);
            cost += &seg.fraction * seg.code.total_cost();
        }
        if !fraction_total.is_one() {
            return Err(Error::Plan(format!("fractions sum to {}", to_fraction_string(&fraction_total))));
        }
        for (db, (f, mu)) in filled.iter().zip(&self.constraints).enumerate() {
            if f != mu {
                return Err(Error::Plan(format!(
                    "database {} holds {} but its constraint is {}",
                    db + 1,
                    to_fraction_string(f),
                    to_fraction_string(mu)
                )));
            }
        }
        let p: Rational = self.constraints.iter().sum();
        if replicated != p {
            return Err(Error::Plan(format!(
                "stored volume {} differs from total capacity {}",
                to_fraction_string(&replicated),
                to_fraction_string(&p)
            )));
        }
        if cost != self.predicted_cost {
            return Err(Error::Plan(format!(
                "predicted cost {} differs from the segment mixture {}",
                to_fraction_string(&self.predicted_cost),
                to_fraction_string(&cost)
            )));
        }
        Ok(())
    }

    pub fn to_file(&self) -> PlanFile {
        let fs = |v: &Rational| to_fraction_string(v);
        PlanFile {
            schema: PLAN_SCHEMA,
            plan_kind: self.kind,
            n: self.n(),
            constraints: self.constraints.iter().map(fs).collect(),
            derived: self.derived.as_ref().map(|d| DerivedFile { k: fs(&d.k), p: fs(&d.p), r: fs(&d.r), s: fs(&d.s) }),
            mixture: self.mixture.as_ref().map(|m| MixtureFile {
                alpha: fs(&m.alpha),
                beta: fs(&m.beta),
                delta: fs(&m.delta),
            }),
            homogeneous: self.homogeneous.as_ref().map(|h| {
                let v = |x: &HomoVertex| VertexFile { k: x.k, r: x.r, mu: fs(&x.mu), cost: fs(&x.cost) };
                HomoFile { mu: fs(&h.mu), gamma: fs(&h.gamma), lo: v(&h.lo), hi: v(&h.hi) }
            }),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentFile {
                    code: s.code,
                    fraction: fs(&s.fraction),
                    allocation: s.allocation.iter().map(fs).collect(),
                    partition: s
                        .partition
                        .parts
                        .iter()
                        .map(|p| PartFile { eta: fs(&p.eta), subset: p.subset.iter().map(|d| d + 1).collect() })
                        .collect(),
                })
                .collect(),
            predicted_cost: fs(&self.predicted_cost),
            seeds: self.seeds.clone(),
        }
    }

    /// Canonical JSON text: pretty-printed with a trailing newline.
    pub fn to_json(&self) -> String {
        self.to_file().to_json()
    }

    pub fn from_json(text: &str) -> Result<StoragePlan> {
        let file: PlanFile = serde_json::from_str(text).map_err(|e| Error::Plan(e.to_string()))?;
        file.into_plan()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub schema: u32,
    pub plan_kind: PlanKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub constraints: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homogeneous: Option<HomoFile>,
    pub segments: Vec<SegmentFile>,
    pub predicted_cost: String,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedFile {
    pub k: String,
    pub p: String,
    pub r: String,
    pub s: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureFile {
    pub alpha: String,
    pub beta: String,
    pub delta: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexFile {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub mu: String,
    pub cost: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomoFile {
    pub mu: String,
    pub gamma: String,
    pub lo: VertexFile,
    pub hi: VertexFile,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub code: CodeSpec,
    pub fraction: String,
    pub allocation: Vec<String>,
    pub partition: Vec<PartFile>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartFile {
    pub eta: String,
    /// 1-based database ids.
    pub subset: Vec<usize>,
}

impl PlanFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan file serializes");
        s.push('\n');
        s
    }

    pub fn into_plan(self) -> Result<StoragePlan> {
        if self.schema != PLAN_SCHEMA {
            return Err(Error::Plan(format!("unsupported schema {}", self.schema)));
        }
        let q = |s: &str| parse_rational(s).map_err(|e| Error::Plan(e.to_string()));
        let constraints = self.constraints.iter().map(|s| q(s)).collect::<Result<Vec<_>>>()?;
        if constraints.len() != self.n {
            return Err(Error::Plan(format!("N = {} but {} constraints", self.n, constraints.len())));
        }
        let derived = match &self.derived {
            Some(d) => Some(DerivedParams { k: q(&d.k)?, p: q(&d.p)?, r: q(&d.r)?, s: q(&d.s)? }),
            None => None,
        };
        let mixture = match (&self.mixture, &derived) {
            (Some(m), Some(d)) => Some(rebuild_mixture(q(&m.alpha)?, q(&m.beta)?, q(&m.delta)?, d)),
            (Some(_), None) => return Err(Error::Plan("mixture without derived parameters".into())),
            (None, _) => None,
        };
        let homogeneous = match &self.homogeneous {
            Some(h) => {
                let v = |x: &VertexFile| -> Result<HomoVertex> {
                    Ok(HomoVertex { k: x.k, r: x.r, mu: q(&x.mu)?, cost: q(&x.cost)? })
                };
                Some(HomoDetails { mu: q(&h.mu)?, gamma: q(&h.gamma)?, lo: v(&h.lo)?, hi: v(&h.hi)? })
            }
            None => None,
        };
        let mut segments = Vec::with_capacity(self.segments.len());
        for s in &self.segments {
            s.code.validate()?;
            let parts = s
                .partition
                .iter()
                .map(|p| {
                    let subset = p
                        .subset
                        .iter()
                        .map(|&d| {
                            if d == 0 || d > self.n {
                                Err(Error::Plan(format!("database id {d} outside 1..={}", self.n)))
                            } else {
                                Ok(d - 1)
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(PartitionPart { eta: q(&p.eta)?, subset })
                })
                .collect::<Result<Vec<_>>>()?;
            segments.push(Segment {
                code: s.code,
                fraction: q(&s.fraction)?,
                allocation: s.allocation.iter().map(|a| q(a)).collect::<Result<Vec<_>>>()?,
                partition: PartitionSolution { parts },
            });
        }
        let plan = StoragePlan {
            kind: self.plan_kind,
            constraints,
            derived,
            mixture,
            homogeneous,
            segments,
            predicted_cost: q(&self.predicted_cost)?,
            seeds: self.seeds,
        };
        plan.verify()?;
        Ok(plan)
    }
}

fn rebuild_mixture(alpha: Rational, beta: Rational, delta: Rational, d: &DerivedParams) -> MixtureSelection {
    let one = Rational::one();
    let fractions =
        [&alpha * &beta, &alpha * (&one - &beta), (&one - &alpha) * &delta, (&one - &alpha) * (&one - &delta)];
    let (kf, kc, rf, rc) = (d.k_floor() as usize, d.k_ceil() as usize, d.r_floor() as usize, d.r_ceil() as usize);
    MixtureSelection { alpha, beta, delta, fractions, codes: [(kf, rf), (kf, rc), (kc, rf), (kc, rc)] }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetero::{plan_hetero_with, ConstraintSet, HeteroOptions};
    use crate::ratio::frac;

    fn worked_plan() -> StoragePlan {
        let mut mu = vec![frac(37, 100); 5];
        mu.extend(vec![frac(35, 100); 7]);
        let cs = ConstraintSet::new(mu).unwrap();
        plan_hetero_with(&cs, &HeteroOptions { paper_rounded: true }).unwrap().plan
    }

    #[test]
    fn json_roundtrip_is_byte_identical() {
        let plan = worked_plan();
        let text = plan.to_json();
        let back = StoragePlan::from_json(&text).unwrap();
        assert_eq!(back, plan);
        assert_eq!(back.to_json(), text);
        assert!(text.contains("\"schema\": 1"));
        assert!(text.contains("\"plan_kind\": \"heterogeneous\""));
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn tampered_plan_rejected() {
        let plan = worked_plan();
        let mut file = plan.to_file();
        file.segments[0].allocation[0] = "1/2".into();
        assert!(file.clone().into_plan().is_err());
        let mut file = plan.to_file();
        file.predicted_cost = "6".into();
        assert!(file.into_plan().is_err());
        let mut file = plan.to_file();
        file.schema = 2;
        assert!(file.into_plan().is_err());
        assert!(StoragePlan::from_json("{}").is_err());
    }
}
