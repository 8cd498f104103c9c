//! Convergence check for `Σ_y √p_y` along growing truncations.

use serde::Serialize;

use crate::bracketing::{aj_partition, entropy_bound_from_census};
use crate::error::{invalid, Result};
use crate::measures::{ddb_statistic, MeasureFamily};

/// Increment below which the partial sums are taken as settled.
pub const CAUCHY_TOL: f64 = 1e-6;

/// Increment ratio at or above which the dyadic block sums are read as not
/// summable.
pub const DIVERGENCE_RATIO: f64 = 0.99;

/// Supports `16, 32, …, 2^20`.
pub fn default_schedule() -> Vec<usize> {
    (4..=20).map(|k| 1usize << k).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DdbVerdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdbRow {
    pub support: usize,
    pub partial_sum: f64,
    /// Change from the previous truncation; the first row reports its own sum.
    pub increment: f64,
    /// Entropy majorant at `delta = 1` of the same truncation.
    pub entropy_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DdbReport {
    pub rows: Vec<DdbRow>,
    pub verdict: DdbVerdict,
    /// Whether the entropy majorant settles or keeps growing in step with
    /// the partial sums.
    pub entropy_agrees: bool,
}

impl DdbReport {
    pub fn limit_estimate(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.partial_sum)
    }
}

/// Evaluates partial sums on the truncations to `schedule[i]` atoms.
pub fn check_ddb(family: &MeasureFamily, schedule: &[usize]) -> Result<DdbReport> {
    family.validate()?;
    if schedule.len() < 2 || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(
            "schedule",
            "need at least two strictly increasing supports",
        ));
    }
    let mut rows: Vec<DdbRow> = Vec::with_capacity(schedule.len());
    for &k in schedule {
        let t = family.truncate_support(k)?;
        let partial_sum = ddb_statistic(&t.measure)?;
        let entropy_bound = entropy_bound_from_census(&aj_partition(&t.measure)?, 1.0)?.value;
        let increment = partial_sum - rows.last().map_or(0.0, |r| r.partial_sum);
        rows.push(DdbRow {
            support: k,
            partial_sum,
            increment,
            entropy_bound,
        });
    }
    let last = &rows[rows.len() - 1];
    let prev = &rows[rows.len() - 2];
    let verdict = if last.increment.abs() < CAUCHY_TOL {
        DdbVerdict::Convergent
    } else if prev.increment > 0.0 && last.increment >= DIVERGENCE_RATIO * prev.increment {
        DdbVerdict::Divergent
    } else {
        DdbVerdict::Inconclusive
    };
    let entropy_step = last.entropy_bound - prev.entropy_bound;
    let entropy_agrees = match verdict {
        DdbVerdict::Convergent => entropy_step.abs() <= CAUCHY_TOL * last.entropy_bound.max(1.0),
        DdbVerdict::Divergent => entropy_step > 0.0,
        DdbVerdict::Inconclusive => true,
    };
    Ok(DdbReport {
        rows,
        verdict,
        entropy_agrees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_converges_to_closed_form() {
        let r = check_ddb(
            &MeasureFamily::Geometric { ratio: 0.5 },
            &default_schedule(),
        )
        .unwrap();
        assert_eq!(r.verdict, DdbVerdict::Convergent);
        assert!(r.entropy_agrees);
        assert!((r.limit_estimate() - (2f64.sqrt() + 1.0)).abs() < 1e-6);
    }

    #[test]
    fn zeta_two_diverges_like_harmonic_sums() {
        let fam = MeasureFamily::Zeta { exponent: 2.0 };
        let r = check_ddb(&fam, &default_schedule()).unwrap();
        assert_eq!(r.verdict, DdbVerdict::Divergent);
        assert!(r.entropy_agrees);
        // √p_y = (y+1)^{-1}/√ζ(2): dyadic blocks approach ln 2/√ζ(2)
        let block = std::f64::consts::LN_2 / (std::f64::consts::PI.powi(2) / 6.0).sqrt();
        assert!((r.rows.last().unwrap().increment - block).abs() < 1e-5);
    }

    #[test]
    fn finite_support_converges() {
        for fam in [
            MeasureFamily::Uniform { size: 40 },
            MeasureFamily::Dirac { atom: 3 },
            MeasureFamily::Explicit {
                masses: vec![0.1, 0.2, 0.7],
            },
        ] {
            let r = check_ddb(&fam, &[8, 16, 64, 128]).unwrap();
            assert_eq!(r.verdict, DdbVerdict::Convergent, "{fam:?}");
        }
        let r = check_ddb(&MeasureFamily::Uniform { size: 40 }, &[8, 16, 64]).unwrap();
        assert!((r.limit_estimate() - 40f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_schedule() {
        let g = MeasureFamily::Geometric { ratio: 0.5 };
        assert!(check_ddb(&g, &[16]).is_err());
        assert!(check_ddb(&g, &[32, 16]).is_err());
    }
}
