//! Weighted empirical processes indexed by the indicators of all subsets of
//! the countable space, and their Gaussian limits.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::measures::{
    compensated_sum, signed_sup_norm, AtomId, DiscreteMeasure, WeightSeq, PROBABILITY_TOL,
};

/// Envelope of the class of indicators.
pub const INDICATOR_ENVELOPE: f64 = 1.0;

/// Random atoms `Y` with weights `β`, centred at a fixed conditional law.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    weights: WeightSeq,
    atoms: Vec<AtomId>,
    baseline: DiscreteMeasure,
}

impl WeightedSample {
    /// `baseline` must be non-negative with total mass in `(0, 1]`; a
    /// deficit below one is read as the mass lost to truncation.
    pub fn new(weights: WeightSeq, atoms: Vec<AtomId>, baseline: DiscreteMeasure) -> Result<Self> {
        if weights.len() != atoms.len() {
            return Err(invalid(
                "atoms",
                format!("{} atoms for {} weights", atoms.len(), weights.len()),
            ));
        }
        let total = baseline.total_mass();
        if baseline.masses().any(|m| m < 0.0) || !(total > 0.0 && total <= 1.0 + PROBABILITY_TOL) {
            return Err(Error::NotProbability {
                total,
                min: baseline.masses().fold(f64::INFINITY, f64::min),
            });
        }
        Ok(Self {
            weights,
            atoms,
            baseline,
        })
    }

    /// Classical empirical process: `β = n^{−1/2}` on every observation.
    pub fn empirical_process(sample: &[AtomId], baseline: DiscreteMeasure) -> Result<Self> {
        let n = sample.len();
        let w = if n == 0 { 0.0 } else { 1.0 / (n as f64).sqrt() };
        Self::new(WeightSeq::constant(n, w)?, sample.to_vec(), baseline)
    }

    pub fn weights(&self) -> &WeightSeq {
        &self.weights
    }

    pub fn atoms(&self) -> &[AtomId] {
        &self.atoms
    }

    pub fn baseline(&self) -> &DiscreteMeasure {
        &self.baseline
    }

    /// Mass the baseline is missing, `1 − baseline(𝔛)`, clamped at zero.
    pub fn baseline_remainder(&self) -> f64 {
        (1.0 - self.baseline.total_mass()).max(0.0)
    }

    /// `Σ βᵢ δ_{Yᵢ}` without centring.
    pub fn weighted_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::from_pairs(
            self.atoms
                .iter()
                .copied()
                .zip(self.weights.weights().iter().copied()),
        )
    }
}

/// `Gₙ = Σ βᵢ δ_{Yᵢ} − ‖β‖₁·baseline` as a signed measure. Indicators have
/// envelope one, so a threshold below one truncates every function to zero.
pub fn gn_signed_measure(s: &WeightedSample, envelope_threshold: f64) -> DiscreteMeasure {
    if !(envelope_threshold >= INDICATOR_ENVELOPE) {
        return DiscreteMeasure::zero();
    }
    let l1 = s.weights.l1();
    if l1 == 0.0 {
        return DiscreteMeasure::zero();
    }
    let point = s
        .weighted_measure()
        .expect("weights are finite by construction");
    point.linear_combination(1.0, &s.baseline, -l1)
}

/// `‖Gₙ‖` over all indicators.
pub fn gn_sup_norm(s: &WeightedSample) -> f64 {
    signed_sup_norm(&gn_signed_measure(s, f64::INFINITY))
}

/// Values of a centred Gaussian field on the singletons.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFieldDraw {
    pub values: Vec<(AtomId, f64)>,
}

impl GaussianFieldDraw {
    pub fn total(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v.1))
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::from_pairs(self.values.iter().copied())
    }
}

/// Brownian bridge on the singletons of `p`: `Z_y = B_y − p_y Σ_z B_z` with
/// independent `B_y ~ N(0, p_y)`.
pub fn sample_bridge<R: Rng + ?Sized>(
    p: &DiscreteMeasure,
    rng: &mut R,
) -> Result<GaussianFieldDraw> {
    p.require_probability()?;
    let b: Vec<f64> = p
        .masses()
        .map(|m| m.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let sum_b = compensated_sum(b.iter().copied());
    let values = p
        .iter()
        .zip(&b)
        .map(|((id, m), &by)| (id, by - m * sum_b))
        .collect();
    Ok(GaussianFieldDraw { values })
}

/// `sup_C |Σ_{y∈C} Z_y| = ½Σ|Z_y| + ½|Σ Z_y|`.
pub fn bridge_sup_norm(d: &GaussianFieldDraw) -> f64 {
    let abs = compensated_sum(d.values.iter().map(|v| v.1.abs()));
    0.5 * abs + 0.5 * d.total().abs()
}

/// One draw of `Σ_y |n^{−1/2} Σ_{i: xᵢ = y} ξᵢ|` with `ξᵢ` i.i.d. standard
/// normal, one per observation in sample order.
pub fn multiplier_abs_sum<R: Rng + ?Sized>(sample: &[AtomId], rng: &mut R) -> Result<f64> {
    if sample.is_empty() {
        return Err(invalid(
            "sample",
            "multiplier statistic needs at least one observation",
        ));
    }
    let mut pairs: Vec<(AtomId, f64)> = sample
        .iter()
        .map(|&x| (x, rng.sample::<f64, _>(StandardNormal)))
        .collect();
    pairs.sort_by_key(|p| p.0);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        groups.push(compensated_sum(pairs[i..j].iter().map(|p| p.1)).abs());
        i = j;
    }
    Ok(compensated_sum(groups) / (sample.len() as f64).sqrt())
}

/// Mean of [`multiplier_abs_sum`]: `√(2/π) Σ_y √(n_y/n)`.
pub fn expected_multiplier_abs_sum(sample: &[AtomId]) -> Result<f64> {
    if sample.is_empty() {
        return Err(invalid(
            "sample",
            "multiplier statistic needs at least one observation",
        ));
    }
    let ddb = crate::measures::ddb_statistic(&DiscreteMeasure::empirical(sample))?;
    Ok((2.0 / std::f64::consts::PI).sqrt() * ddb)
}
