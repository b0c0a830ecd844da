//! `(K, R)` MDS code parameters and the closed-form communication costs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratio::{int, Rational};

/// One `(K, R)` configuration: `K` symbols are combined per coded symbol and
/// every coded symbol lives on `R` databases. `x + 1` noise terms are stored
/// and `y` coded symbols per submodel make up a subpacket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CodeSpec {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub x: usize,
    pub y: usize,
}

impl CodeSpec {
    /// Picks the cost-minimising noise count for `(K, R)`: `x = y` when `R - K`
    /// is odd, `x = y + 1` when it is even.
    pub fn derive(k: usize, r: usize) -> Result<Self> {
        let infeasible = |reason: &str| Error::InfeasibleCode { k: k as u64, r: r as u64, reason: reason.to_string() };
        if k < 1 {
            return Err(infeasible("K must be at least 1"));
        }
        if r < 4 {
            return Err(infeasible("R must be at least 4"));
        }
        if k > r {
            return Err(infeasible("K exceeds R"));
        }
        let gap = r - k;
        let (x, y) = if gap % 2 == 1 {
            if gap < 3 {
                return Err(infeasible("odd R - K requires K <= R - 3"));
            }
            let y = (gap - 1) / 2;
            (y, y)
        } else {
            if gap < 4 {
                return Err(infeasible("even R - K requires K <= R - 4"));
            }
            (gap / 2, gap / 2 - 1)
        };
        Ok(Self { k, r, x, y })
    }

    /// Checks that a deserialized spec is the one `derive` would produce.
    pub fn validate(&self) -> Result<()> {
        let expected = Self::derive(self.k, self.r)?;
        if expected != *self {
            return Err(Error::Plan(format!("code {self} does not match the derived parameters {expected}")));
        }
        Ok(())
    }

    pub fn odd_gap(&self) -> bool {
        (self.r - self.k) % 2 == 1
    }

    /// Size of the null-shaper set, `x - y`.
    pub fn null_set_size(&self) -> usize {
        self.x - self.y
    }

    /// Parameters of one submodel carried by one subpacket, `y * K`.
    pub fn subpacket_params(&self) -> usize {
        self.y * self.k
    }

    pub fn download_per_subpacket(&self) -> usize {
        self.r * self.k
    }

    pub fn upload_per_subpacket(&self) -> usize {
        self.k * (self.r - self.null_set_size())
    }

    /// `R / (R - K - x - 1)`.
    pub fn read_cost(&self) -> Rational {
        Rational::new((self.r as i64).into(), (self.r as i64 - self.k as i64 - self.x as i64 - 1).into())
    }

    /// `(2R - 2x - K - 1) / (R - x - K - 1)`.
    pub fn write_cost(&self) -> Rational {
        let (r, k, x) = (self.r as i64, self.k as i64, self.x as i64);
        Rational::new((2 * r - 2 * x - k - 1).into(), (r - x - k - 1).into())
    }

    /// `4R / (R - K - 1)` for odd gaps, `(4R - 2) / (R - K - 2)` for even ones.
    pub fn total_cost(&self) -> Rational {
        let (r, k) = (self.r as i64, self.k as i64);
        if self.odd_gap() {
            Rational::new((4 * r).into(), (r - k - 1).into())
        } else {
            Rational::new((4 * r - 2).into(), (r - k - 2).into())
        }
    }

    /// `(C_R, C_W, C_T)`.
    pub fn costs(&self) -> (Rational, Rational, Rational) {
        (self.read_cost(), self.write_cost(), self.total_cost())
    }
}

impl fmt::Display for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(K={}, R={}, x={}, y={})", self.k, self.r, self.x, self.y)
    }
}

/// Total cost of the `(a, b)` code, with `a` the coding parameter and `b` the
/// replication count.
pub fn cost_function(a: i64, b: i64) -> Result<Rational> {
    if a < 1 || b < 1 {
        return Err(Error::InfeasibleCode {
            k: a.max(0) as u64,
            r: b.max(0) as u64,
            reason: "parameters must be positive".into(),
        });
    }
    Ok(CodeSpec::derive(a as usize, b as usize)?.total_cost())
}

/// Every admissible `(K, R)` with `4 <= R <= max_r`.
pub fn admissible_codes(max_r: usize) -> Vec<CodeSpec> {
    (4..=max_r).flat_map(|r| (1..r).filter_map(move |k| CodeSpec::derive(k, r).ok())).collect()
}

pub(crate) fn cost_or_zero(weight: &Rational, a: i64, b: i64) -> Result<Rational> {
    use num_traits::Zero;
    if weight.is_zero() {
        Ok(int(0))
    } else {
        Ok(weight * cost_function(a, b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    #[test]
    fn derive_examples() {
        assert_eq!(CodeSpec::derive(2, 7).unwrap(), CodeSpec { k: 2, r: 7, x: 2, y: 2 });
        assert_eq!(CodeSpec::derive(1, 4).unwrap(), CodeSpec { k: 1, r: 4, x: 1, y: 1 });
        assert_eq!(CodeSpec::derive(1, 5).unwrap(), CodeSpec { k: 1, r: 5, x: 2, y: 1 });
        // odd gap 3 is the smallest admissible one
        assert_eq!(CodeSpec::derive(2, 5).unwrap(), CodeSpec { k: 2, r: 5, x: 1, y: 1 });
        assert!(matches!(CodeSpec::derive(2, 4), Err(Error::InfeasibleCode { .. })));
        assert!(matches!(CodeSpec::derive(3, 5), Err(Error::InfeasibleCode { .. })));
        assert!(matches!(CodeSpec::derive(5, 7), Err(Error::InfeasibleCode { .. })));
        assert!(CodeSpec::derive(0, 5).is_err());
        assert!(CodeSpec::derive(1, 3).is_err());
    }

    #[test]
    fn subpacket_square_system() {
        for c in admissible_codes(20) {
            assert_eq!(c.y + c.k + c.x + 1, c.r, "{c}");
            assert!(c.y >= 1 && c.x >= c.y);
            assert!(c.x - c.y <= 1);
        }
    }

    #[test]
    fn total_cost_examples() {
        assert_eq!(CodeSpec::derive(2, 11).unwrap().total_cost(), frac(11, 2));
        assert_eq!(CodeSpec::derive(2, 8).unwrap().total_cost(), frac(15, 2));
        assert_eq!(CodeSpec::derive(1, 6).unwrap().total_cost(), int(6));
    }

    #[test]
    fn cost_function_examples() {
        assert_eq!(cost_function(2, 9).unwrap(), int(6));
        assert_eq!(cost_function(3, 11).unwrap(), int(7));
        assert_eq!(cost_function(1, 4).unwrap(), int(8));
        assert!(cost_function(3, 5).is_err());
        assert!(cost_function(0, 5).is_err());
    }

    #[test]
    fn read_plus_write_is_total() {
        for c in admissible_codes(30) {
            let (cr, cw, ct) = c.costs();
            assert_eq!(cr + cw, ct, "{c}");
            // counting route
            let counted = Rational::new(
                ((c.download_per_subpacket() + c.upload_per_subpacket()) as i64).into(),
                (c.subpacket_params() as i64).into(),
            );
            assert_eq!(counted, c.total_cost(), "{c}");
        }
    }
}
