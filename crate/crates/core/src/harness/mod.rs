//! Experiment configuration, dispatch and CSV reporting.
//!
//! Every float in a report is written with 17 significant digits. Results
//! depend only on the configuration and the master seed, never on the
//! number of worker threads.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dirichlet::DEFAULT_TRUNCATION_TOL;
use crate::error::{invalid, Error, Result};
use crate::measures::MeasureFamily;

pub mod conditions;
pub mod ddb;
pub mod experiments;
pub mod stats;

pub use conditions::{
    check_theorem1_conditions, ConditionReport, ConditionSettings, WeightSampler,
};
pub use ddb::{check_ddb, DdbReport, DdbVerdict};
pub use experiments::{
    run_bracketing, run_bvm, run_gc, run_local_ep, BracketingReport, BvmReport, GcReport,
    LocalReport, LocalStudy, PosteriorModel,
};
pub use stats::ks_distance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "gc")]
    Gc,
    #[serde(rename = "bvm")]
    Bvm,
    #[serde(rename = "bracketing")]
    Bracketing,
    #[serde(rename = "local-ep")]
    LocalEp,
    #[serde(rename = "conditions")]
    Conditions,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gc => "gc",
            Self::Bvm => "bvm",
            Self::Bracketing => "bracketing",
            Self::LocalEp => "local-ep",
            Self::Conditions => "conditions",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BracketingSettings {
    pub max_level: u32,
    pub delta: f64,
}

impl Default for BracketingSettings {
    fn default() -> Self {
        Self {
            max_level: 30,
            delta: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionsSection {
    pub sampler: WeightSampler,
    pub power: f64,
    pub envelope_level: f64,
}

impl Default for ConditionsSection {
    fn default() -> Self {
        let s = ConditionSettings::default();
        Self {
            sampler: WeightSampler::DpPosterior {
                concentration: 1.0,
                tol: DEFAULT_TRUNCATION_TOL,
            },
            power: s.power,
            envelope_level: s.envelope_level,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    pub n_schedule: Vec<usize>,
    pub replications: usize,
    /// Law of the data.
    pub base: MeasureFamily,
    /// Base measure of the Dirichlet prior.
    pub prior: MeasureFamily,
    pub concentration: f64,
    /// Tail tolerance for truncating infinite-support laws.
    pub truncation_tol: f64,
    pub stick_tol: f64,
    /// Supports used by the square-root mass check.
    pub ddb_schedule: Vec<usize>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub bracketing: BracketingSettings,
    pub local: LocalStudy,
    pub conditions: ConditionsSection,
}

impl ExperimentConfig {
    /// Defaults for one experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let (n_schedule, replications) = match kind {
            ExperimentKind::Gc => (vec![50, 200, 800, 3200], 200),
            ExperimentKind::Bvm => (vec![5000], 2000),
            ExperimentKind::Bracketing => (vec![], 1),
            ExperimentKind::LocalEp => (vec![], 5000),
            ExperimentKind::Conditions => (vec![10, 100, 1000, 10_000], 200),
        };
        Self {
            experiment: kind,
            master_seed: 20_240_601,
            n_schedule,
            replications,
            base: MeasureFamily::Geometric { ratio: 0.5 },
            prior: MeasureFamily::Geometric { ratio: 0.3 },
            concentration: 1.0,
            truncation_tol: 1e-12,
            stick_tol: DEFAULT_TRUNCATION_TOL,
            ddb_schedule: ddb::default_schedule(),
            output: None,
            threads: None,
            bracketing: BracketingSettings::default(),
            local: LocalStudy::default(),
            conditions: ConditionsSection::default(),
        }
    }

    /// Parses a JSON document whose top-level keys override
    /// [`default_for(kind)`](Self::default_for). An `experiment` key, if
    /// present, must name `kind`.
    pub fn from_json(kind: ExperimentKind, text: &str) -> Result<Self> {
        let user: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(user) = user else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(Self::default_for(kind))?;
        let target = merged
            .as_object_mut()
            .expect("struct serializes to an object");
        for (k, v) in user {
            if !target.contains_key(&k) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
            target.insert(k, v);
        }
        let cfg: Self = serde_json::from_value(merged)?;
        if cfg.experiment != kind {
            return Err(Error::Config(format!(
                "configuration is for `{}`, not `{}`",
                cfg.experiment.name(),
                kind.name()
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(kind: ExperimentKind, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(kind, &text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications", "must be at least 1"));
        }
        let needs_schedule = matches!(
            self.experiment,
            ExperimentKind::Gc | ExperimentKind::Bvm | ExperimentKind::Conditions
        );
        if needs_schedule && self.n_schedule.is_empty() {
            return Err(invalid("n_schedule", "must not be empty"));
        }
        if self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_schedule", "must be strictly increasing"));
        }
        for (name, v) in [
            ("concentration", self.concentration),
            ("truncation_tol", self.truncation_tol),
            ("stick_tol", self.stick_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        self.base.validate()?;
        self.prior.validate()
    }

    pub fn posterior_model(&self) -> PosteriorModel {
        PosteriorModel {
            data: self.base.clone(),
            prior: self.prior.clone(),
            concentration: self.concentration,
            truncation_tol: self.truncation_tol,
            stick_tol: self.stick_tol,
        }
    }
}

/// A finished run: the main CSV plus named companion tables.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub extra: Vec<(String, String)>,
}

impl Outcome {
    /// Writes the main table to `path` and each companion to `path` with
    /// its name spliced in before the extension.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.csv)?;
        for (name, body) in &self.extra {
            std::fs::write(companion_path(path, name), body)?;
        }
        Ok(())
    }

    /// Main table followed by `# name` sections.
    pub fn to_text(&self) -> String {
        let mut s = self.csv.clone();
        for (name, body) in &self.extra {
            let _ = write!(s, "\n# {name}\n{body}");
        }
        s
    }
}

pub fn companion_path(path: &Path, name: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    let file = match path.extension() {
        Some(ext) => format!("{stem}.{name}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{name}"),
    };
    path.with_file_name(file)
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(cells: &[String]) -> String {
    let mut s = cells.join(",");
    s.push('\n');
    s
}

/// Runs `cfg` on a pool of `threads` workers (all cores when `None`).
pub fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Outcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.or(cfg.threads).unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    let f = fmt_f64;
    match cfg.experiment {
        ExperimentKind::Gc => {
            let r = run_gc(
                &cfg.posterior_model(),
                &cfg.n_schedule,
                cfg.replications,
                cfg.master_seed,
            )?;
            let mut csv = row(&[
                "n,theta,q05,q25,median,q75,q95,mean,tv_base_empirical,max_remainder,consistent"
                    .into(),
            ]);
            for g in &r.rows {
                csv += &row(&[
                    g.n.to_string(),
                    f(g.theta),
                    f(g.q05),
                    f(g.q25),
                    f(g.median),
                    f(g.q75),
                    f(g.q95),
                    f(g.mean),
                    f(g.tv_base_empirical),
                    f(g.max_remainder),
                    g.consistent.to_string(),
                ]);
            }
            Ok(Outcome { csv, extra: vec![] })
        }
        ExperimentKind::Bvm => {
            let r = run_bvm(
                &cfg.posterior_model(),
                &cfg.n_schedule,
                cfg.replications,
                cfg.master_seed,
                &cfg.ddb_schedule,
            )?;
            let mut csv = row(&[
                "n,replications,ks,mean_posterior,mean_bridge,median_posterior,median_bridge"
                    .into(),
            ]);
            let mut ecdf = row(&["n,sample,value,ecdf".into()]);
            for b in &r.rows {
                csv += &row(&[
                    b.n.to_string(),
                    cfg.replications.to_string(),
                    f(b.ks),
                    f(b.mean_posterior),
                    f(b.mean_bridge),
                    f(b.median_posterior),
                    f(b.median_bridge),
                ]);
                for (name, sample) in [("posterior", &b.posterior), ("bridge", &b.bridge)] {
                    for (x, p) in stats::ecdf(sample) {
                        ecdf += &row(&[b.n.to_string(), name.into(), f(x), f(p)]);
                    }
                }
            }
            Ok(Outcome {
                csv,
                extra: vec![("ecdf".into(), ecdf)],
            })
        }
        ExperimentKind::Bracketing => {
            let r = run_bracketing(
                &cfg.base,
                cfg.truncation_tol,
                cfg.bracketing.max_level,
                cfg.bracketing.delta,
            )?;
            let mut csv = row(&["k,j_k,m_k,count_bound,partial_sum,lemma6_structural".into()]);
            for b in &r.rows {
                csv += &row(&[
                    b.k.to_string(),
                    b.j_k.to_string(),
                    b.m_k.to_string(),
                    f(b.count_bound),
                    f(b.partial_sum),
                    f(b.lemma6_structural),
                ]);
            }
            let d = check_ddb(&cfg.base, &cfg.ddb_schedule)?;
            let mut ddb = row(&["support,partial_sum,increment,entropy_bound,verdict".into()]);
            for x in &d.rows {
                ddb += &row(&[
                    x.support.to_string(),
                    f(x.partial_sum),
                    f(x.increment),
                    f(x.entropy_bound),
                    format!("{:?}", d.verdict).to_lowercase(),
                ]);
            }
            Ok(Outcome {
                csv,
                extra: vec![("ddb".into(), ddb)],
            })
        }
        ExperimentKind::LocalEp => {
            let r = run_local_ep(&cfg.local, cfg.replications, cfg.master_seed)?;
            let mut csv = row(&["h,t1,t2,n,mean,covariance,target,se".into()]);
            for l in &r.rows {
                csv += &row(&[
                    f(l.h),
                    f(l.t1),
                    f(l.t2),
                    l.n.to_string(),
                    f(l.mean),
                    f(l.covariance),
                    f(l.target),
                    f(l.se),
                ]);
            }
            Ok(Outcome { csv, extra: vec![] })
        }
        ExperimentKind::Conditions => {
            let baseline = experiments::truncated_probability(&cfg.base, cfg.truncation_tol)?;
            let settings = ConditionSettings {
                power: cfg.conditions.power,
                envelope_level: cfg.conditions.envelope_level,
            };
            let r = check_theorem1_conditions(
                &cfg.conditions.sampler,
                &baseline,
                &cfg.n_schedule,
                cfg.replications,
                cfg.master_seed,
                settings,
            )?;
            let mut csv = row(&[concat!(
                "n,l1_median,l1_q95,l2_median,l2_q95,l4_median,l4_q95,linf_median,linf_q95,",
                "l1_linf_power_median,l1_linf_power_q95,envelope_moment,entropy_partial_sum,",
                "l2_decreasing,l1_bounded"
            )
            .into()]);
            for c in &r.rows {
                csv += &row(&[
                    c.n.to_string(),
                    f(c.l1.median),
                    f(c.l1.q95),
                    f(c.l2.median),
                    f(c.l2.q95),
                    f(c.l4.median),
                    f(c.l4.q95),
                    f(c.linf.median),
                    f(c.linf.q95),
                    f(c.l1_linf_power.median),
                    f(c.l1_linf_power.q95),
                    f(c.envelope_moment),
                    f(c.entropy_partial_sum),
                    r.l2_decreasing.to_string(),
                    r.l1_bounded.to_string(),
                ]);
            }
            Ok(Outcome { csv, extra: vec![] })
        }
    }
}
