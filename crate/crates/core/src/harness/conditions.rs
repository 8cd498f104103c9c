//! Monte Carlo diagnostics for the weight conditions of the uniform law of
//! large numbers: `‖β‖₂ → 0` with `‖β‖₁` bounded.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{quantile_sorted, sorted};
use crate::bracketing::entropy_integral_bound;
use crate::dirichlet::sample_stick_weights;
use crate::error::{invalid, Result};
use crate::measures::{DiscreteMeasure, WeightSeq};
use crate::processes::INDICATOR_ENVELOPE;
use crate::rng::rng_for;

/// How the weight vector `βₙ` is generated for sample size `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case")]
pub enum WeightSampler {
    /// `n⁻¹` on each of `n` points.
    Empirical,
    /// `n^{−1/2}` on each of `n` points.
    RescaledEmpirical,
    /// Stick-breaking weights with concentration `concentration + n`.
    DpPosterior { concentration: f64, tol: f64 },
    /// `√n` times the posterior stick weights.
    RescaledDp { concentration: f64, tol: f64 },
    /// `1` on each of `n` points.
    Constant,
}

impl WeightSampler {
    pub fn is_random(&self) -> bool {
        matches!(self, Self::DpPosterior { .. } | Self::RescaledDp { .. })
    }

    pub fn draw(&self, n: usize, seed: u64, path: &[u64]) -> Result<WeightSeq> {
        match *self {
            Self::Empirical => WeightSeq::constant(n, 1.0 / n as f64),
            Self::RescaledEmpirical => WeightSeq::constant(n, 1.0 / (n as f64).sqrt()),
            Self::Constant => WeightSeq::constant(n, 1.0),
            Self::DpPosterior { concentration, tol } => {
                sample_stick_weights(concentration + n as f64, tol, &mut rng_for(seed, path))
            }
            Self::RescaledDp { concentration, tol } => {
                sample_stick_weights(concentration + n as f64, tol, &mut rng_for(seed, path))?
                    .scaled((n as f64).sqrt())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q95: f64,
}

impl Spread {
    fn of(xs: &[f64]) -> Self {
        let s = sorted(xs);
        Self {
            median: quantile_sorted(&s, 0.5),
            q95: quantile_sorted(&s, 0.95),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionRow {
    pub n: usize,
    pub l1: Spread,
    pub l2: Spread,
    pub l4: Spread,
    pub linf: Spread,
    /// `‖β‖₁·‖β‖_∞^{power−1}`.
    pub l1_linf_power: Spread,
    /// `𝐏ₙ(F^power 𝟙_{F > M})`, zero for indicators once `M ≥ 1`.
    pub envelope_moment: f64,
    /// Dyadic entropy majorant of the baseline at `delta = 1`.
    pub entropy_partial_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
    /// Median `‖β‖₂` strictly decreasing along the schedule.
    pub l2_decreasing: bool,
    /// Every 95% quantile of `‖β‖₁` within twice the first median.
    pub l1_bounded: bool,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.l2_decreasing && self.l1_bounded
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSettings {
    /// Moment order `p` in `‖β‖₁·‖β‖_∞^{p−1}`.
    pub power: f64,
    /// Envelope truncation level `M`.
    pub envelope_level: f64,
}

impl Default for ConditionSettings {
    fn default() -> Self {
        Self {
            power: 2.0,
            envelope_level: 1.0,
        }
    }
}

pub fn check_theorem1_conditions(
    sampler: &WeightSampler,
    baseline: &DiscreteMeasure,
    n_schedule: &[usize],
    replications: usize,
    master_seed: u64,
    settings: ConditionSettings,
) -> Result<ConditionReport> {
    if replications == 0 {
        return Err(invalid("replications", "need at least one"));
    }
    if n_schedule.is_empty() || n_schedule[0] == 0 || n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(
            "n_schedule",
            "must be positive and strictly increasing",
        ));
    }
    if !(settings.power >= 1.0) {
        return Err(invalid(
            "power",
            format!("{} must be at least 1", settings.power),
        ));
    }
    let entropy = entropy_integral_bound(baseline, 1.0)?.value;
    let envelope_moment = if INDICATOR_ENVELOPE > settings.envelope_level {
        baseline.total_mass()
    } else {
        0.0
    };
    let reps = if sampler.is_random() { replications } else { 1 };
    let mut rows = Vec::with_capacity(n_schedule.len());
    for (ni, &n) in n_schedule.iter().enumerate() {
        let norms = (0..reps)
            .into_par_iter()
            .map(|r| {
                let w = sampler.draw(n, master_seed, &[ni as u64, r as u64])?;
                let l1 = w.l1();
                let linf = w.lr_norm(f64::INFINITY)?;
                Ok([
                    l1,
                    w.lr_norm(2.0)?,
                    w.lr_norm(4.0)?,
                    linf,
                    l1 * linf.powf(settings.power - 1.0),
                ])
            })
            .collect::<Result<Vec<[f64; 5]>>>()?;
        let col = |i: usize| Spread::of(&norms.iter().map(|v| v[i]).collect::<Vec<_>>());
        rows.push(ConditionRow {
            n,
            l1: col(0),
            l2: col(1),
            l4: col(2),
            linf: col(3),
            l1_linf_power: col(4),
            envelope_moment,
            entropy_partial_sum: entropy,
        });
    }
    let l2_decreasing = rows.windows(2).all(|w| w[1].l2.median < w[0].l2.median);
    let cap = 2.0 * rows[0].l1.median;
    let l1_bounded = rows.iter().all(|r| r.l1.q95 <= cap);
    Ok(ConditionReport {
        rows,
        l2_decreasing,
        l1_bounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> DiscreteMeasure {
        DiscreteMeasure::from_masses(&[0.5, 0.25, 0.25]).unwrap()
    }

    const SCHEDULE: [usize; 4] = [10, 100, 1000, 10_000];

    #[test]
    fn empirical_weights_closed_form() {
        let r = check_theorem1_conditions(
            &WeightSampler::Empirical,
            &base(),
            &SCHEDULE,
            5,
            1,
            Default::default(),
        )
        .unwrap();
        for row in &r.rows {
            assert!((row.l1.median - 1.0).abs() < 1e-12);
            assert!((row.l2.median - (row.n as f64).powf(-0.5)).abs() < 1e-15);
            assert!((row.linf.median - 1.0 / row.n as f64).abs() < 1e-18);
            assert_eq!(row.envelope_moment, 0.0);
        }
        assert!(r.holds());
    }

    #[test]
    fn dp_posterior_l2_matches_beta_moment() {
        let m = 2.0;
        let r = check_theorem1_conditions(
            &WeightSampler::DpPosterior {
                concentration: m,
                tol: 1e-10,
            },
            &base(),
            &SCHEDULE,
            200,
            7,
            Default::default(),
        )
        .unwrap();
        for row in &r.rows {
            let target = 1.0 / (m + row.n as f64 + 1.0);
            let got = row.l2.median.powi(2);
            assert!(
                (got / target - 1.0).abs() < 0.5,
                "n={} {got} vs {target}",
                row.n
            );
        }
        assert!(r.holds());
    }

    #[test]
    fn constant_and_rescaled_weights_fail() {
        let c = check_theorem1_conditions(
            &WeightSampler::Constant,
            &base(),
            &SCHEDULE,
            3,
            1,
            Default::default(),
        )
        .unwrap();
        assert!(!c.l2_decreasing);
        assert!(!c.holds());
        let s = check_theorem1_conditions(
            &WeightSampler::RescaledEmpirical,
            &base(),
            &SCHEDULE,
            3,
            1,
            Default::default(),
        )
        .unwrap();
        assert!(!s.l1_bounded);
    }

    #[test]
    fn envelope_moment_counts_truncated_mass() {
        let settings = ConditionSettings {
            power: 2.0,
            envelope_level: 0.5,
        };
        let r =
            check_theorem1_conditions(&WeightSampler::Empirical, &base(), &[5, 6], 1, 1, settings)
                .unwrap();
        assert_eq!(r.rows[0].envelope_moment, 1.0);
    }

    #[test]
    fn deterministic_across_pools() {
        let s = WeightSampler::RescaledDp {
            concentration: 1.0,
            tol: 1e-10,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    check_theorem1_conditions(&s, &base(), &[10, 50], 64, 3, Default::default())
                        .unwrap()
                })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn rejects_bad_inputs() {
        let e = WeightSampler::Empirical;
        assert!(
            check_theorem1_conditions(&e, &base(), &[10, 5], 1, 1, Default::default()).is_err()
        );
        assert!(check_theorem1_conditions(&e, &base(), &[0, 5], 1, 1, Default::default()).is_err());
        assert!(check_theorem1_conditions(&e, &base(), &[5], 0, 1, Default::default()).is_err());
    }
}
