//! Local empirical process around a point `z` in one dimension: observations
//! are rescaled by a bandwidth `h` and only those landing in a fixed window
//! `S` contribute.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Absolute error target for window integrals.
pub const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "density", rename_all = "snake_case")]
pub enum Density {
    StandardNormal,
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Density {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Normal { mean, sd } if !(mean.is_finite() && sd > 0.0 && sd.is_finite()) => Err(
                invalid("sd", format!("normal({mean}, {sd}) is not a valid law")),
            ),
            Self::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(invalid("hi", format!("uniform on [{lo}, {hi}] is empty")))
            }
            _ => Ok(()),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Self::StandardNormal => (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Self::Normal { mean, sd } => {
                let u = (x - mean) / sd;
                (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed interval outside which the density vanishes.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Uniform { lo, hi } => (lo, hi),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::StandardNormal => rng.sample(StandardNormal),
            Self::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Probability of `[a, b]` under `density`, by double-exponential quadrature
/// on the part of the interval where the density is positive.
pub fn interval_probability(density: &Density, a: f64, b: f64) -> Result<f64> {
    if !(a <= b) {
        return Err(invalid("b", format!("interval [{a}, {b}] is reversed")));
    }
    let (lo, hi) = density.support();
    let (a, b) = (a.max(lo), b.min(hi));
    if a >= b {
        return Ok(0.0);
    }
    let out = quadrature::double_exponential::integrate(|x| density.pdf(x), a, b, QUADRATURE_TOL);
    if !(out.integral.is_finite() && out.error_estimate <= QUADRATURE_TOL) {
        return Err(Error::Quadrature {
            lo: a,
            hi: b,
            reason: format!("error estimate {:e}", out.error_estimate),
        });
    }
    Ok(out.integral.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    pub center: f64,
    pub bandwidth: f64,
    /// `(s_lo, s_hi)`.
    pub window: (f64, f64),
    pub density: Density,
    /// Right ends `t` of the indicators `𝟙_{[s_lo, t]}`, strictly increasing.
    pub t_grid: Vec<f64>,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self {
            center: 0.0,
            bandwidth: 0.1,
            window: (-1.0, 1.0),
            density: Density::StandardNormal,
            t_grid: vec![-0.6, -0.2, 0.2, 0.6, 1.0],
        }
    }
}

impl LocalConfig {
    pub fn validate(&self) -> Result<()> {
        self.density.validate()?;
        let (lo, hi) = self.window;
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(invalid(
                "bandwidth",
                format!("{} must be positive", self.bandwidth),
            ));
        }
        if !(lo < hi) || !self.center.is_finite() {
            return Err(invalid(
                "window",
                format!("[{lo}, {hi}] is not a proper interval"),
            ));
        }
        if self.t_grid.is_empty() {
            return Err(invalid("t_grid", "empty grid"));
        }
        if self.t_grid.iter().any(|t| !(lo..=hi).contains(t)) {
            return Err(invalid(
                "t_grid",
                format!("points must lie in [{lo}, {hi}]"),
            ));
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("t_grid", "points must be strictly increasing"));
        }
        Ok(())
    }

    /// `λ(S)`.
    pub fn window_length(&self) -> f64 {
        self.window.1 - self.window.0
    }

    /// `λ(S)·f(z)`, the limiting variance of the window count.
    pub fn limit_scale(&self) -> f64 {
        self.window_length() * self.density.pdf(self.center)
    }

    /// Limiting normalized covariance of `T(𝟙_{[s_lo,t₁]})` and `T(𝟙_{[s_lo,t₂]})`.
    pub fn limit_covariance(&self, t1: f64, t2: f64) -> f64 {
        (t1.min(t2) - self.window.0) / self.window_length()
    }

    fn to_data_scale(&self, s: f64) -> f64 {
        self.center + self.bandwidth * s
    }
}

/// `a = P(h⁻¹(Y − z) ∈ S)`.
pub fn window_probability(cfg: &LocalConfig) -> Result<f64> {
    cfg.validate()?;
    interval_probability(
        &cfg.density,
        cfg.to_data_scale(cfg.window.0),
        cfg.to_data_scale(cfg.window.1),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMethod {
    /// Draw every observation.
    Direct,
    /// Draw the cell counts through sequential binomials.
    Multinomial,
}

/// One realization of the local process on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalDraw {
    /// `(t, T(𝟙_{[s_lo,t]}))`.
    pub t_values: Vec<(f64, f64)>,
    /// Observed fraction of the sample inside the window.
    pub a_hat: f64,
    pub count_in_window: u64,
    /// Uncentred counts of `[s_lo, t]` per grid point.
    pub cumulative_counts: Vec<u64>,
}

/// Grid cell probabilities for a configuration, computed once.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalModel {
    cfg: LocalConfig,
    /// `[s_lo,t₀], (t₀,t₁], …, (t_last, s_hi]`.
    cells: Vec<f64>,
    /// `P(h⁻¹(Y − z) ∈ [s_lo, t])` per grid point.
    cumulative: Vec<f64>,
    window: f64,
}

impl LocalModel {
    pub fn new(cfg: LocalConfig) -> Result<Self> {
        cfg.validate()?;
        let mut edges = vec![cfg.window.0];
        edges.extend(cfg.t_grid.iter().copied());
        edges.push(cfg.window.1);
        let cells = edges
            .windows(2)
            .map(|w| {
                interval_probability(
                    &cfg.density,
                    cfg.to_data_scale(w[0]),
                    cfg.to_data_scale(w[1]),
                )
            })
            .collect::<Result<Vec<f64>>>()?;
        let cumulative: Vec<f64> = cells
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .take(cfg.t_grid.len())
            .collect();
        let window = window_probability(&cfg)?;
        Ok(Self {
            cfg,
            cells,
            cumulative,
            window,
        })
    }

    pub fn config(&self) -> &LocalConfig {
        &self.cfg
    }

    pub fn window_probability(&self) -> f64 {
        self.window
    }

    /// Centring constants `E 𝟙_{[s_lo,t]}(h⁻¹(Y − z))` per grid point.
    pub fn centering(&self) -> &[f64] {
        &self.cumulative
    }

    /// Assembles a draw from per-cell counts (grid cells then the last
    /// window cell).
    pub fn draw_from_cell_counts(&self, n: u64, cell_counts: &[u64]) -> Result<LocalDraw> {
        if cell_counts.len() != self.cells.len() {
            return Err(invalid(
                "cell_counts",
                format!(
                    "expected {} cells, got {}",
                    self.cells.len(),
                    cell_counts.len()
                ),
            ));
        }
        let count_in_window: u64 = cell_counts.iter().sum();
        if n == 0 || count_in_window > n {
            return Err(invalid(
                "n",
                format!("{count_in_window} window hits out of {n}"),
            ));
        }
        let scale = (n as f64 * self.cfg.bandwidth).sqrt();
        let mut cumulative_counts = Vec::with_capacity(self.cumulative.len());
        let mut acc = 0;
        for c in &cell_counts[..self.cumulative.len()] {
            acc += c;
            cumulative_counts.push(acc);
        }
        let t_values = self
            .cfg
            .t_grid
            .iter()
            .zip(&cumulative_counts)
            .zip(&self.cumulative)
            .map(|((&t, &c), &a_t)| (t, (c as f64 - n as f64 * a_t) / scale))
            .collect();
        Ok(LocalDraw {
            t_values,
            a_hat: count_in_window as f64 / n as f64,
            count_in_window,
            cumulative_counts,
        })
    }

    pub fn simulate<R: Rng + ?Sized>(
        &self,
        n: u64,
        method: SimulationMethod,
        rng: &mut R,
    ) -> Result<LocalDraw> {
        if n == 0 {
            return Err(invalid("n", "need at least one observation"));
        }
        let counts = match method {
            SimulationMethod::Direct => self.direct_counts(n, rng),
            SimulationMethod::Multinomial => self.multinomial_counts(n, rng),
        };
        self.draw_from_cell_counts(n, &counts)
    }

    fn direct_counts<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Vec<u64> {
        let (lo, hi) = self.cfg.window;
        let mut counts = vec![0u64; self.cells.len()];
        for _ in 0..n {
            let s = (self.cfg.density.sample(rng) - self.cfg.center) / self.cfg.bandwidth;
            if (lo..=hi).contains(&s) {
                counts[self.cfg.t_grid.partition_point(|&t| t < s)] += 1;
            }
        }
        counts
    }

    fn multinomial_counts<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> Vec<u64> {
        let mut left_n = n;
        let mut left_p = 1.0_f64;
        let mut counts = Vec::with_capacity(self.cells.len());
        for &p in &self.cells {
            let q = if left_p > 0.0 {
                (p / left_p).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let x = if left_n == 0 || q == 0.0 {
                0
            } else {
                Binomial::new(left_n, q).expect("q in [0, 1]").sample(rng)
            };
            counts.push(x);
            left_n -= x;
            left_p -= p;
        }
        counts
    }

    /// `(window count − n·a)/√(n·h)`.
    pub fn drift_from_draw(&self, n: u64, draw: &LocalDraw) -> f64 {
        (draw.count_in_window as f64 - n as f64 * self.window)
            / (n as f64 * self.cfg.bandwidth).sqrt()
    }

    /// Exact variance of [`drift_from_draw`](Self::drift_from_draw): `a(1−a)/h`.
    pub fn drift_variance(&self) -> f64 {
        self.window * (1.0 - self.window) / self.cfg.bandwidth
    }
}

/// Draws `n` observations directly and evaluates the process on the grid.
pub fn simulate_t_process<R: Rng + ?Sized>(
    cfg: &LocalConfig,
    n: u64,
    rng: &mut R,
) -> Result<LocalDraw> {
    LocalModel::new(cfg.clone())?.simulate(n, SimulationMethod::Direct, rng)
}

/// Centred and scaled window count `(Σ bᵢ − n·a)/√(n·h)`.
pub fn drift_statistic<R: Rng + ?Sized>(cfg: &LocalConfig, n: u64, rng: &mut R) -> Result<f64> {
    let model = LocalModel::new(cfg.clone())?;
    let a = model.window_probability();
    let hits = if a == 0.0 {
        0
    } else {
        Binomial::new(n, a)
            .map_err(|e| invalid("a", e.to_string()))?
            .sample(rng)
    };
    Ok((hits as f64 - n as f64 * a) / (n as f64 * cfg.bandwidth).sqrt())
}
