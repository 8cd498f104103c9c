//! Monte Carlo experiments on Dirichlet process posteriors, bracketing
//! profiles and the local empirical process.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ddb::{check_ddb, DdbReport, DdbVerdict};
use super::stats::{ks_distance, mean, quantile_sorted, sorted};
use crate::bracketing::{
    aj_partition, entropy_bound_from_census, lemma6_from_census, start_level, EntropyBound,
};
use crate::dirichlet::{posterior_params, prior_weight, DpParams, DpSampler};
use crate::error::{invalid, Error, Result};
use crate::local_empirical::{LocalConfig, LocalModel, SimulationMethod};
use crate::measures::{compensated_sum, tv_distance, AtomId, DiscreteMeasure, MeasureFamily};
use crate::processes::{bridge_sup_norm, sample_bridge};
use crate::rng::rng_for;

/// Path tag reserved for the data stream.
const STREAM_TAG: u64 = u64::MAX;
/// Slack for the exact inequalities checked on every draw.
const CHECK_SLACK: f64 = 1e-12;

/// `len` i.i.d. draws from `family`, fixed by the seed.
pub fn data_stream(family: &MeasureFamily, len: usize, master_seed: u64) -> Result<Vec<AtomId>> {
    family.validate()?;
    let mut rng = rng_for(master_seed, &[STREAM_TAG]);
    Ok((0..len).map(|_| family.sample(&mut rng)).collect())
}

/// Truncates `family` below `tol` and, if the retained mass misses one by
/// more than the probability tolerance, rescales it to a probability.
pub fn truncated_probability(family: &MeasureFamily, tol: f64) -> Result<DiscreteMeasure> {
    let t = family.truncate(tol)?;
    if t.measure.is_probability() {
        return Ok(t.measure);
    }
    let total = t.measure.total_mass();
    let m = DiscreteMeasure::from_pairs(t.measure.iter().map(|(id, m)| (id, m / total)))?;
    m.require_probability()?;
    Ok(m)
}

/// Data law, prior and numerical tolerances of a posterior experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorModel {
    pub data: MeasureFamily,
    pub prior: MeasureFamily,
    pub concentration: f64,
    /// Tail tolerance for truncating the prior base measure.
    pub truncation_tol: f64,
    /// Stick-breaking stopping tolerance.
    pub stick_tol: f64,
}

impl PosteriorModel {
    pub fn prior_params(&self) -> Result<DpParams> {
        DpParams::new(
            truncated_probability(&self.prior, self.truncation_tol)?,
            self.concentration,
        )
    }
}

fn check_schedule(n_schedule: &[usize], replications: usize) -> Result<()> {
    if replications == 0 {
        return Err(invalid("replications", "need at least one"));
    }
    if n_schedule.is_empty() || n_schedule[0] == 0 || n_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(
            "n_schedule",
            "must be positive and strictly increasing",
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GcRow {
    pub n: usize,
    pub theta: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub mean: f64,
    /// `‖α_x − 𝐏_x‖` for the posterior base `α_x`.
    pub tv_base_empirical: f64,
    /// Largest stick mass left undrawn.
    pub max_remainder: f64,
    /// Triangle inequality and `‖α_x − 𝐏_x‖ ≤ θ` held on every draw.
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GcReport {
    pub rows: Vec<GcRow>,
}

impl GcReport {
    pub fn medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.median).collect()
    }
}

/// Posterior concentration around the empirical measure of one fixed data
/// stream: `TV(draw, 𝐏_x)` over `replications` posterior draws per `n`.
pub fn run_gc(
    model: &PosteriorModel,
    n_schedule: &[usize],
    replications: usize,
    master_seed: u64,
) -> Result<GcReport> {
    check_schedule(n_schedule, replications)?;
    let prior = model.prior_params()?;
    let stream = data_stream(&model.data, *n_schedule.last().unwrap(), master_seed)?;
    let mut rows = Vec::with_capacity(n_schedule.len());
    for (ni, &n) in n_schedule.iter().enumerate() {
        let x = &stream[..n];
        let empirical = DiscreteMeasure::empirical(x);
        let post = posterior_params(&prior, x)?;
        let theta = prior_weight(model.concentration, n);
        let base_gap = tv_distance(post.base(), &empirical);
        let sampler = DpSampler::new(post)?;
        let draws = (0..replications)
            .into_par_iter()
            .map(|r| {
                let (draw, rem) = sampler.draw(
                    model.stick_tol,
                    &mut rng_for(master_seed, &[ni as u64, r as u64]),
                )?;
                let tv = tv_distance(&draw, &empirical);
                let ok = tv <= tv_distance(&draw, sampler.params().base()) + base_gap + CHECK_SLACK;
                Ok((tv, rem, ok))
            })
            .collect::<Result<Vec<(f64, f64, bool)>>>()?;
        let tvs: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let s = sorted(&tvs);
        rows.push(GcRow {
            n,
            theta,
            q05: quantile_sorted(&s, 0.05),
            q25: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            q75: quantile_sorted(&s, 0.75),
            q95: quantile_sorted(&s, 0.95),
            mean: mean(&tvs),
            tv_base_empirical: base_gap,
            max_remainder: draws.iter().map(|d| d.1).fold(0.0, f64::max),
            consistent: base_gap <= theta + CHECK_SLACK && draws.iter().all(|d| d.2),
        });
    }
    Ok(GcReport { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvmRow {
    pub n: usize,
    pub ks: f64,
    pub mean_posterior: f64,
    pub mean_bridge: f64,
    pub median_posterior: f64,
    pub median_bridge: f64,
    /// Ascending `√n·TV(draw, 𝐏_x)`.
    #[serde(skip)]
    pub posterior: Vec<f64>,
    /// Ascending bridge sup-norms over `𝐏_x`.
    #[serde(skip)]
    pub bridge: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvmReport {
    pub data_ddb: DdbReport,
    pub prior_ddb: DdbReport,
    pub rows: Vec<BvmRow>,
}

/// Refuses unless both the data law and the prior base pass [`check_ddb`].
pub fn ddb_gate(model: &PosteriorModel, schedule: &[usize]) -> Result<(DdbReport, DdbReport)> {
    let data = check_ddb(&model.data, schedule)?;
    let prior = check_ddb(&model.prior, schedule)?;
    for (name, r) in [("data law", &data), ("prior base", &prior)] {
        if r.verdict != DdbVerdict::Convergent {
            return Err(Error::GateRefused(format!(
                "{name}: square-root mass sums are {:?} (last increment {:e})",
                r.verdict,
                r.rows.last().map_or(f64::NAN, |row| row.increment)
            )));
        }
    }
    Ok((data, prior))
}

/// Compares `√n·TV(posterior draw, 𝐏_x)` with the sup-norm of the bridge
/// over `𝐏_x` by a two-sample KS distance.
pub fn run_bvm(
    model: &PosteriorModel,
    n_schedule: &[usize],
    replications: usize,
    master_seed: u64,
    ddb_schedule: &[usize],
) -> Result<BvmReport> {
    check_schedule(n_schedule, replications)?;
    let (data_ddb, prior_ddb) = ddb_gate(model, ddb_schedule)?;
    let prior = model.prior_params()?;
    let stream = data_stream(&model.data, *n_schedule.last().unwrap(), master_seed)?;
    let mut rows = Vec::with_capacity(n_schedule.len());
    for (ni, &n) in n_schedule.iter().enumerate() {
        let x = &stream[..n];
        let empirical = DiscreteMeasure::empirical(x);
        let sampler = DpSampler::new(posterior_params(&prior, x)?)?;
        let root_n = (n as f64).sqrt();
        let pairs = (0..replications)
            .into_par_iter()
            .map(|r| {
                let path = [ni as u64, r as u64];
                let (draw, _) = sampler.draw(model.stick_tol, &mut rng_for(master_seed, &path))?;
                let a = root_n * tv_distance(&draw, &empirical);
                let bridge = sample_bridge(
                    &empirical,
                    &mut rng_for(master_seed, &[ni as u64, r as u64, 1]),
                )?;
                Ok((a, bridge_sup_norm(&bridge)))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let a = sorted(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
        let b = sorted(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        rows.push(BvmRow {
            n,
            ks: ks_distance(&a, &b)?,
            mean_posterior: mean(&a),
            mean_bridge: mean(&b),
            median_posterior: quantile_sorted(&a, 0.5),
            median_bridge: quantile_sorted(&b, 0.5),
            posterior: a,
            bridge: b,
        });
    }
    Ok(BvmReport {
        data_ddb,
        prior_ddb,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketingRow {
    pub k: u32,
    pub j_k: u32,
    pub m_k: usize,
    /// `2^{m(k)}`.
    pub count_bound: f64,
    /// `√(log 2)·Σ_{start ≤ k' ≤ k} √m(k')·2^{−k'}`, zero before the start level.
    pub partial_sum: f64,
    /// Tail-sum product at level `k`.
    pub lemma6_structural: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketingReport {
    pub rows: Vec<BracketingRow>,
    pub bound: EntropyBound,
    pub support: usize,
}

/// Dyadic entropy profile of `family` truncated below `truncation_tol`.
pub fn run_bracketing(
    family: &MeasureFamily,
    truncation_tol: f64,
    max_level: u32,
    delta: f64,
) -> Result<BracketingReport> {
    if max_level == 0 {
        return Err(invalid("max_level", "need at least one level"));
    }
    let measure = family.truncate(truncation_tol)?.measure;
    let census = aj_partition(&measure)?;
    let bound = entropy_bound_from_census(&census, delta)?;
    let start = start_level(delta);
    let sqrt_ln2 = std::f64::consts::LN_2.sqrt();
    let mut terms = Vec::new();
    let rows = (1..=max_level)
        .map(|k| {
            let m_k = census.mk(k);
            if k >= start {
                terms.push((m_k as f64).sqrt() * 2f64.powi(-(k as i32)));
            }
            BracketingRow {
                k,
                j_k: census.jk(k),
                m_k,
                count_bound: 2f64.powf(m_k as f64),
                partial_sum: sqrt_ln2 * compensated_sum(terms.iter().copied()),
                lemma6_structural: lemma6_from_census(&census, k).structural(),
            }
        })
        .collect();
    Ok(BracketingReport {
        rows,
        bound,
        support: measure.len(),
    })
}

/// Bandwidth schedule and sampling settings of a local-process study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalStudy {
    pub center: f64,
    pub window: (f64, f64),
    pub density: crate::local_empirical::Density,
    pub t_grid: Vec<f64>,
    pub bandwidths: Vec<f64>,
    /// `n·h`, held fixed across bandwidths.
    pub n_times_h: f64,
    pub method: SimulationMethod,
}

impl Default for LocalStudy {
    fn default() -> Self {
        let c = LocalConfig::default();
        Self {
            center: c.center,
            window: c.window,
            density: c.density,
            t_grid: c.t_grid,
            bandwidths: vec![0.4, 0.2, 0.1, 0.05],
            n_times_h: 2000.0,
            method: SimulationMethod::Multinomial,
        }
    }
}

impl LocalStudy {
    pub fn config(&self, bandwidth: f64) -> LocalConfig {
        LocalConfig {
            center: self.center,
            bandwidth,
            window: self.window,
            density: self.density.clone(),
            t_grid: self.t_grid.clone(),
        }
    }

    pub fn sample_size(&self, bandwidth: f64) -> u64 {
        (self.n_times_h / bandwidth).round().max(1.0) as u64
    }
}

/// Normalized covariance of `T(𝟙_{[s_lo,t₁]})` and `T(𝟙_{[s_lo,t₂]})` at
/// one bandwidth, `t₁ ≤ t₂`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalRow {
    pub h: f64,
    pub t1: f64,
    pub t2: f64,
    pub n: u64,
    /// Mean of `T(𝟙_{[s_lo,t₁]})`.
    pub mean: f64,
    /// Sample covariance divided by `λ(S)·f(z)`.
    pub covariance: f64,
    pub target: f64,
    /// Monte Carlo standard error of `covariance`.
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalReport {
    pub rows: Vec<LocalRow>,
}

impl LocalReport {
    /// `max |covariance − target|` and the matching error in standard errors, per bandwidth.
    pub fn errors_by_bandwidth(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = Vec::new();
        for r in &self.rows {
            let err = (r.covariance - r.target).abs();
            match out.last_mut() {
                Some(last) if last.0 == r.h => {
                    last.1 = last.1.max(err);
                    last.2 = last.2.max(err / r.se);
                }
                _ => out.push((r.h, err, err / r.se)),
            }
        }
        out
    }
}

pub fn run_local_ep(
    study: &LocalStudy,
    replications: usize,
    master_seed: u64,
) -> Result<LocalReport> {
    if replications < 2 {
        return Err(invalid(
            "replications",
            "need at least two for a covariance",
        ));
    }
    if study.bandwidths.is_empty() || !(study.n_times_h > 0.0) {
        return Err(invalid("bandwidths", "need bandwidths and a positive n·h"));
    }
    let mut rows = Vec::new();
    for (hi, &h) in study.bandwidths.iter().enumerate() {
        let model = LocalModel::new(study.config(h))?;
        let n = study.sample_size(h);
        let draws = (0..replications)
            .into_par_iter()
            .map(|r| {
                let d = model.simulate(
                    n,
                    study.method,
                    &mut rng_for(master_seed, &[hi as u64, r as u64]),
                )?;
                Ok(d.t_values.iter().map(|v| v.1).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let k = study.t_grid.len();
        let means: Vec<f64> = (0..k)
            .map(|i| mean(&draws.iter().map(|d| d[i]).collect::<Vec<_>>()))
            .collect();
        let scale = model.config().limit_scale();
        let rf = replications as f64;
        for i in 0..k {
            for j in i..k {
                let prods: Vec<f64> = draws
                    .iter()
                    .map(|d| (d[i] - means[i]) * (d[j] - means[j]))
                    .collect();
                let cov = compensated_sum(prods.iter().copied()) / (rf - 1.0);
                let spread = compensated_sum(prods.iter().map(|p| (p - cov).powi(2))) / (rf - 1.0);
                rows.push(LocalRow {
                    h,
                    t1: study.t_grid[i],
                    t2: study.t_grid[j],
                    n,
                    mean: means[i],
                    covariance: cov / scale,
                    target: model
                        .config()
                        .limit_covariance(study.t_grid[i], study.t_grid[j]),
                    se: (spread / rf).sqrt() / scale,
                });
            }
        }
    }
    Ok(LocalReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> PosteriorModel {
        PosteriorModel {
            data: MeasureFamily::Geometric { ratio: 0.5 },
            prior: MeasureFamily::Geometric { ratio: 0.3 },
            concentration: 1.0,
            truncation_tol: 1e-12,
            stick_tol: 1e-10,
        }
    }

    #[test]
    fn degenerate_gc_run() {
        let m = PosteriorModel {
            data: MeasureFamily::Dirac { atom: 0 },
            prior: MeasureFamily::Dirac { atom: 0 },
            ..model()
        };
        let r = run_gc(&m, &[5, 20], 30, 4).unwrap();
        for row in &r.rows {
            assert!(row.q95 <= row.max_remainder + 1e-15);
            assert!(row.max_remainder < 1e-10);
            assert!(row.consistent);
        }
    }

    #[test]
    fn gc_medians_shrink() {
        let r = run_gc(&model(), &[50, 3200], 100, 9).unwrap();
        assert!(r.rows[1].median < r.rows[0].median);
        assert!(r
            .rows
            .iter()
            .all(|row| row.consistent && row.tv_base_empirical <= row.theta));
    }

    #[test]
    fn truncated_probability_rescales_when_needed() {
        let z = truncated_probability(&MeasureFamily::Zeta { exponent: 2.0 }, 1e-3).unwrap();
        assert!(z.is_probability());
        let g = truncated_probability(&MeasureFamily::Geometric { ratio: 0.5 }, 1e-13).unwrap();
        assert!(g.is_probability());
        assert_eq!(g.mass(AtomId(0)), 0.5);
    }

    #[test]
    fn bvm_gate_refuses_heavy_tails() {
        let m = PosteriorModel {
            data: MeasureFamily::Zeta { exponent: 2.0 },
            ..model()
        };
        let err = run_bvm(&m, &[100], 10, 1, &super::super::ddb::default_schedule()).unwrap_err();
        assert!(matches!(err, Error::GateRefused(_)));
    }

    #[test]
    fn bvm_small_run() {
        let r = run_bvm(&model(), &[400], 300, 2, &[64, 128, 256]).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.posterior.len(), 300);
        assert!(row.ks < 0.25, "ks {}", row.ks);
        // A against itself and against a doubled copy
        assert_eq!(ks_distance(&row.posterior, &row.posterior).unwrap(), 0.0);
        let doubled: Vec<f64> = row.posterior.iter().map(|a| 2.0 * a).collect();
        assert!(ks_distance(&row.posterior, &doubled).unwrap() > 0.3);
    }

    #[test]
    fn bracketing_profile_for_geometric() {
        let r = run_bracketing(&MeasureFamily::Geometric { ratio: 0.5 }, 1e-12, 12, 1.0).unwrap();
        for row in &r.rows {
            assert_eq!(row.j_k, (2 * row.k + 1).div_ceil(4));
        }
        assert!(r
            .rows
            .windows(2)
            .all(|w| w[0].partial_sum <= w[1].partial_sum));
        assert!(r.rows.last().unwrap().partial_sum <= r.bound.value);
    }

    #[test]
    fn local_study_small() {
        let study = LocalStudy {
            bandwidths: vec![0.2],
            n_times_h: 200.0,
            ..LocalStudy::default()
        };
        let r = run_local_ep(&study, 2000, 5).unwrap();
        assert_eq!(r.rows.len(), 15);
        for row in &r.rows {
            assert!(
                (row.covariance - row.target).abs() < 0.1 + 5.0 * row.se,
                "{row:?}"
            );
        }
    }
}
