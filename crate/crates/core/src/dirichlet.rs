//! Stick-breaking sampler for Dirichlet processes over a discrete base
//! measure, and the conjugate posterior update.
//!
//! Sticks are broken until the untouched mass falls below a tolerance. The
//! leftover is carried as the draw's remainder and never renormalized away,
//! so every downstream distance can be bounded by it.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::error::{invalid, Result};
use crate::measures::{mix, AtomId, DiscreteMeasure, WeightSeq};

/// Default bound on the untouched stick mass.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;

/// Parameters of `DP(α, M)`: a probability base measure and a positive
/// concentration.
#[derive(Clone, Debug, PartialEq)]
pub struct DpParams {
    base: DiscreteMeasure,
    concentration: f64,
}

impl DpParams {
    pub fn new(base: DiscreteMeasure, concentration: f64) -> Result<Self> {
        check_concentration(concentration)?;
        base.require_probability()?;
        Ok(Self {
            base,
            concentration,
        })
    }

    pub fn base(&self) -> &DiscreteMeasure {
        &self.base
    }

    pub fn concentration(&self) -> f64 {
        self.concentration
    }
}

fn check_concentration(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            "concentration",
            format!("{m} must be finite and positive"),
        ))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol < 1.0 {
        Ok(())
    } else {
        Err(invalid("tol", format!("{tol} must lie in (0, 1)")))
    }
}

/// One Beta(1, M) break by inversion, `V = 1 − U^{1/M}`. Returns `(V, 1 − V)`
/// computed without cancellation.
#[inline]
fn beta_one_m<R: Rng + ?Sized>(inv_m: f64, rng: &mut R) -> (f64, f64) {
    // U in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    let log_keep = u.ln() * inv_m;
    (-log_keep.exp_m1(), log_keep.exp())
}

/// Iterator over `(Vᵢ, βᵢ)` stopping once the untouched stick mass drops
/// below the tolerance.
pub struct StickBreaker<'r, R: Rng + ?Sized> {
    inv_m: f64,
    tol: f64,
    remaining: f64,
    rng: &'r mut R,
}

impl<'r, R: Rng + ?Sized> StickBreaker<'r, R> {
    pub fn new(concentration: f64, tol: f64, rng: &'r mut R) -> Result<Self> {
        check_concentration(concentration)?;
        check_tol(tol)?;
        Ok(Self {
            inv_m: 1.0 / concentration,
            tol,
            remaining: 1.0,
            rng,
        })
    }

    /// Stick mass not yet assigned.
    pub fn remaining(&self) -> f64 {
        self.remaining
    }
}

impl<R: Rng + ?Sized> Iterator for StickBreaker<'_, R> {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        if self.remaining < self.tol {
            return None;
        }
        let (v, keep) = beta_one_m(self.inv_m, self.rng);
        let w = self.remaining * v;
        self.remaining *= keep;
        Some((v, w))
    }
}

/// Draws the break sequence `V₁, V₂, …` and the induced weights.
pub fn sample_stick_breaks<R: Rng + ?Sized>(
    concentration: f64,
    tol: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, WeightSeq)> {
    let mut sb = StickBreaker::new(concentration, tol, rng)?;
    let mut breaks = Vec::new();
    let mut weights = Vec::new();
    for (v, w) in sb.by_ref() {
        breaks.push(v);
        weights.push(w);
    }
    let rem = sb.remaining();
    Ok((breaks, WeightSeq::from_parts_unchecked(weights, rem)))
}

/// `βᵢ = Vᵢ·Π_{j<i}(1 − Vⱼ)`, remainder `Π(1 − Vⱼ)`.
pub fn weights_from_breaks(breaks: &[f64]) -> Result<WeightSeq> {
    let mut remaining = 1.0;
    let mut weights = Vec::with_capacity(breaks.len());
    for &v in breaks {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid("breaks", format!("{v} is outside [0, 1]")));
        }
        weights.push(remaining * v);
        remaining *= 1.0 - v;
    }
    WeightSeq::new(weights, remaining)
}

pub fn sample_stick_weights<R: Rng + ?Sized>(
    concentration: f64,
    tol: f64,
    rng: &mut R,
) -> Result<WeightSeq> {
    let mut sb = StickBreaker::new(concentration, tol, rng)?;
    let weights: Vec<f64> = sb.by_ref().map(|(_, w)| w).collect();
    let rem = sb.remaining();
    Ok(WeightSeq::from_parts_unchecked(weights, rem))
}

/// Atoms and weights of a single stick-breaking draw, before merging
/// coinciding atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct StickBreakingDraw {
    pub weights: WeightSeq,
    pub atoms: Vec<AtomId>,
}

impl StickBreakingDraw {
    pub fn remainder(&self) -> f64 {
        self.weights.remainder()
    }

    /// `Σ βᵢ δ_{Yᵢ}` with coinciding atoms merged; not renormalized.
    pub fn to_measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::from_pairs(
            self.atoms
                .iter()
                .copied()
                .zip(self.weights.weights().iter().copied()),
        )
        .expect("stick weights are finite")
    }
}

/// Reusable sampler for one `DP(α, M)`: builds the alias table over the base
/// atoms once.
pub struct DpSampler {
    params: DpParams,
    atoms: Vec<AtomId>,
    alias: WeightedAliasIndex<f64>,
}

impl DpSampler {
    pub fn new(params: DpParams) -> Result<Self> {
        let atoms: Vec<AtomId> = params.base.support().collect();
        let alias = WeightedAliasIndex::new(params.base.masses().collect())
            .map_err(|e| invalid("base", format!("cannot index base measure: {e}")))?;
        Ok(Self {
            params,
            atoms,
            alias,
        })
    }

    pub fn params(&self) -> &DpParams {
        &self.params
    }

    /// Full draw keeping the per-stick atoms.
    pub fn draw_sticks<R: Rng + ?Sized>(&self, tol: f64, rng: &mut R) -> Result<StickBreakingDraw> {
        let inv_m = 1.0 / self.params.concentration;
        check_tol(tol)?;
        let mut remaining = 1.0;
        let mut weights = Vec::new();
        let mut atoms = Vec::new();
        while remaining >= tol {
            let (v, keep) = beta_one_m(inv_m, rng);
            weights.push(remaining * v);
            remaining *= keep;
            atoms.push(self.atoms[self.alias.sample(rng)]);
        }
        Ok(StickBreakingDraw {
            weights: WeightSeq::from_parts_unchecked(weights, remaining),
            atoms,
        })
    }

    /// Draw as a merged measure. Consumes the generator exactly like
    /// [`draw_sticks`](Self::draw_sticks) but accumulates per base atom.
    /// Returns the measure and the untouched stick mass.
    pub fn draw<R: Rng + ?Sized>(&self, tol: f64, rng: &mut R) -> Result<(DiscreteMeasure, f64)> {
        let inv_m = 1.0 / self.params.concentration;
        check_tol(tol)?;
        let mut remaining = 1.0;
        let mut acc = vec![0.0_f64; self.atoms.len()];
        while remaining >= tol {
            let (v, keep) = beta_one_m(inv_m, rng);
            let w = remaining * v;
            remaining *= keep;
            acc[self.alias.sample(rng)] += w;
        }
        let m = DiscreteMeasure::from_pairs(self.atoms.iter().copied().zip(acc))?;
        Ok((m, remaining))
    }
}

/// One draw from `DP(α, M)` as `Σ βᵢ δ_{Yᵢ}` with total mass `1 − remainder`.
pub fn sample_dp<R: Rng + ?Sized>(
    params: &DpParams,
    tol: f64,
    rng: &mut R,
) -> Result<DiscreteMeasure> {
    Ok(DpSampler::new(params.clone())?.draw(tol, rng)?.0)
}

/// Conjugate update: `DP(θₙα + (1−θₙ)𝐏ₙ, M + n)` with `θₙ = M/(M+n)`.
pub fn posterior_params(prior: &DpParams, sample: &[AtomId]) -> Result<DpParams> {
    if sample.is_empty() {
        return Ok(prior.clone());
    }
    let m = prior.concentration;
    let n = sample.len() as f64;
    let theta = m / (m + n);
    let base = mix(&prior.base, &DiscreteMeasure::empirical(sample), theta)?;
    DpParams::new(base, m + n)
}

/// `θₙ = M/(M+n)`.
pub fn prior_weight(concentration: f64, n: usize) -> f64 {
    concentration / (concentration + n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn stick_decomposition_holds() {
        let mut rng = rng_for(1, &[0]);
        for m in [0.3, 1.0, 5.0, 500.0, 5000.0] {
            for _ in 0..20 {
                let w = sample_stick_weights(m, 1e-10, &mut rng).unwrap();
                assert!((w.l1() + w.remainder() - 1.0).abs() < 1e-12, "M={m}");
                assert!(w.remainder() < 1e-10);
            }
        }
    }

    #[test]
    fn weights_reconstruct_from_breaks() {
        let mut rng = rng_for(2, &[0]);
        let (breaks, w) = sample_stick_breaks(3.0, 1e-8, &mut rng).unwrap();
        let rebuilt = weights_from_breaks(&breaks).unwrap();
        assert_eq!(breaks.len(), w.len());
        for (a, b) in rebuilt.weights().iter().zip(w.weights()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300) + 1e-18);
        }
        assert!((rebuilt.remainder() - w.remainder()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = rng_for(0, &[0]);
        assert!(sample_stick_weights(0.0, 1e-3, &mut rng).is_err());
        assert!(sample_stick_weights(1.0, 0.0, &mut rng).is_err());
        assert!(sample_stick_weights(1.0, 1.0, &mut rng).is_err());
        assert!(DpParams::new(DiscreteMeasure::from_masses(&[0.5]).unwrap(), 1.0).is_err());
    }

    #[test]
    fn squared_l2_mean_matches_beta_moments() {
        // E‖β‖₂² = Σ E Vᵢ² Π E(1−Vⱼ)² = [2/((M+1)(M+2))] / [1 − M/(M+2)] = 1/(M+1)
        let mut rng = rng_for(3, &[0]);
        let m = 5.0;
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                sample_stick_weights(m, 1e-10, &mut rng)
                    .unwrap()
                    .lr_norm(2.0)
                    .unwrap()
                    .powi(2)
            })
            .collect();
        let (mean, se) = mean_se(&xs);
        assert!((mean - 1.0 / (m + 1.0)).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn small_concentration_puts_mass_on_first_stick() {
        let mut rng = rng_for(4, &[0]);
        let m = 1e-3;
        let xs: Vec<f64> = (0..5000)
            .map(|_| sample_stick_weights(m, 1e-10, &mut rng).unwrap().weights()[0])
            .collect();
        let (mean, se) = mean_se(&xs);
        assert!((mean - 1.0 / (1.0 + m)).abs() < 3.0 * se + 1e-12);
        assert!(mean > 0.99);
    }

    #[test]
    fn stick_count_is_one_plus_poisson() {
        // −ln(1−V) ~ Exp(M), so the count of breaks needed to push the
        // stick below tol is 1 + Poisson(M·ln(1/tol)).
        let mut rng = rng_for(5, &[0]);
        let tol = 1e-10;
        let xs: Vec<f64> = (0..20_000)
            .map(|_| sample_stick_weights(1.0, tol, &mut rng).unwrap().len() as f64)
            .collect();
        let (mean, se) = mean_se(&xs);
        let lambda = (1.0 / tol).ln();
        assert!((mean - (lambda + 1.0)).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn degenerate_base() {
        let params = DpParams::new(DiscreteMeasure::dirac(AtomId(0)), 2.0).unwrap();
        let mut rng = rng_for(6, &[0]);
        let (d, rem) = DpSampler::new(params)
            .unwrap()
            .draw(1e-10, &mut rng)
            .unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.mass(AtomId(0)) - (1.0 - rem)).abs() < 1e-12);
    }

    #[test]
    fn fast_draw_matches_stick_draw() {
        let base = DiscreteMeasure::from_masses(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let sampler = DpSampler::new(DpParams::new(base, 7.0).unwrap()).unwrap();
        let a = sampler.draw_sticks(1e-9, &mut rng_for(7, &[1])).unwrap();
        let (b, rem) = sampler.draw(1e-9, &mut rng_for(7, &[1])).unwrap();
        assert_eq!(a.remainder(), rem);
        let am = a.to_measure();
        for (x, y) in am.iter().zip(b.iter()) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_mean_is_base() {
        let base = DiscreteMeasure::from_masses(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let sampler = DpSampler::new(DpParams::new(base.clone(), 1.5).unwrap()).unwrap();
        let mut rng = rng_for(8, &[0]);
        let set = [AtomId(1), AtomId(3)];
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sampler.draw(1e-10, &mut rng).unwrap().0.measure_of(&set))
            .collect();
        let (mean, se) = mean_se(&xs);
        assert!((mean - 0.6).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn posterior_examples() {
        let prior = DpParams::new(DiscreteMeasure::dirac(AtomId(2)), 1.0).unwrap();
        assert_eq!(posterior_params(&prior, &[]).unwrap(), prior);
        let post = posterior_params(&prior, &[AtomId(0), AtomId(0), AtomId(1)]).unwrap();
        assert_eq!(post.concentration(), 4.0);
        let b = post.base();
        assert!((b.mass(AtomId(0)) - 0.5).abs() < 1e-15);
        assert!((b.mass(AtomId(1)) - 0.25).abs() < 1e-15);
        assert!((b.mass(AtomId(2)) - 0.25).abs() < 1e-15);

        let sample: Vec<AtomId> = (0..100_000).map(|i| AtomId(i % 3)).collect();
        let post = posterior_params(&prior, &sample).unwrap();
        let emp = DiscreteMeasure::empirical(&sample);
        assert!(
            crate::measures::tv_distance(post.base(), &emp)
                <= prior_weight(1.0, sample.len()) + 1e-15
        );
    }

    #[test]
    fn posterior_mean_matches_posterior_base() {
        let prior = DpParams::new(DiscreteMeasure::from_masses(&[0.5, 0.5]).unwrap(), 2.0).unwrap();
        let sample = [AtomId(1), AtomId(2), AtomId(2), AtomId(4)];
        let post = posterior_params(&prior, &sample).unwrap();
        let sampler = DpSampler::new(post.clone()).unwrap();
        let mut rng = rng_for(9, &[0]);
        for set in [vec![AtomId(0)], vec![AtomId(2), AtomId(4)]] {
            let xs: Vec<f64> = (0..10_000)
                .map(|_| sampler.draw(1e-10, &mut rng).unwrap().0.measure_of(&set))
                .collect();
            let (mean, se) = mean_se(&xs);
            let want = post.base().measure_of(&set);
            assert!((mean - want).abs() < 3.0 * se, "{set:?}: {mean} vs {want}");
        }
    }
}
