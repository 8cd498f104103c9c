//! Named infinite-support laws on the non-negative integers. They only turn
//! into [`DiscreteMeasure`]s through an explicit truncation that reports the
//! mass it leaves out.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AtomId, DiscreteMeasure};
use crate::error::{invalid, Error, Result};

/// Largest support a truncation may materialize.
pub const MAX_TRUNCATED_SUPPORT: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MeasureFamily {
    /// `p_y = (1 − ratio)·ratio^y`.
    Geometric {
        ratio: f64,
    },
    /// `p_y = (y + 1)^{−exponent} / ζ(exponent)`.
    Zeta {
        exponent: f64,
    },
    /// Uniform on `0..size`.
    Uniform {
        size: usize,
    },
    Dirac {
        atom: u64,
    },
    /// Explicit masses on atoms `0..len`, must sum to one.
    Explicit {
        masses: Vec<f64>,
    },
}

/// A truncated law: `measure` holds the retained atoms unnormalized and
/// `remainder` is the mass of everything cut away.
#[derive(Clone, Debug, PartialEq)]
pub struct Truncation {
    pub measure: DiscreteMeasure,
    pub remainder: f64,
}

impl MeasureFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Geometric { ratio } if !(*ratio > 0.0 && *ratio < 1.0) => {
                Err(invalid("ratio", format!("{ratio} must lie in (0, 1)")))
            }
            Self::Zeta { exponent } if !(*exponent > 1.0 && exponent.is_finite()) => {
                Err(invalid("exponent", format!("{exponent} must be > 1")))
            }
            Self::Uniform { size: 0 } => {
                Err(invalid("size", "uniform law needs at least one atom"))
            }
            Self::Explicit { masses } => {
                DiscreteMeasure::from_masses(masses)?.require_probability()?;
                if masses.iter().any(|m| *m < 0.0) {
                    return Err(invalid("masses", "negative mass"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Number of atoms with positive mass, `None` when infinite.
    pub fn support_size(&self) -> Option<usize> {
        match self {
            Self::Geometric { .. } | Self::Zeta { .. } => None,
            Self::Uniform { size } => Some(*size),
            Self::Dirac { .. } => Some(1),
            Self::Explicit { masses } => Some(masses.len()),
        }
    }

    pub fn mass(&self, y: u64) -> f64 {
        match self {
            Self::Geometric { ratio } => (1.0 - ratio) * ratio.powf(y as f64),
            Self::Zeta { exponent } => ((y + 1) as f64).powf(-exponent) / zeta(*exponent),
            Self::Uniform { size } => {
                if (y as usize) < *size {
                    1.0 / *size as f64
                } else {
                    0.0
                }
            }
            Self::Dirac { atom } => f64::from(u8::from(y == *atom)),
            Self::Explicit { masses } => masses.get(y as usize).copied().unwrap_or(0.0),
        }
    }

    /// Mass of the atoms `y ≥ k`.
    pub fn tail_mass(&self, k: u64) -> f64 {
        match self {
            Self::Geometric { ratio } => ratio.powf(k as f64),
            Self::Zeta { exponent } => hurwitz_tail(*exponent, k + 1) / zeta(*exponent),
            Self::Uniform { size } => (*size as u64).saturating_sub(k) as f64 / *size as f64,
            Self::Dirac { atom } => f64::from(u8::from(*atom >= k)),
            Self::Explicit { masses } => masses.iter().skip(k as usize).sum(),
        }
    }

    /// Keeps atoms `0..k`.
    pub fn truncate_support(&self, k: usize) -> Result<Truncation> {
        self.validate()?;
        let k = match self.support_size() {
            Some(s) => k.min(s),
            None => k,
        };
        if k > MAX_TRUNCATED_SUPPORT {
            return Err(invalid(
                "support",
                format!("{k} atoms exceeds {MAX_TRUNCATED_SUPPORT}"),
            ));
        }
        let measure = match self {
            Self::Dirac { atom } => {
                if (*atom as usize) < k {
                    DiscreteMeasure::dirac(AtomId(*atom))
                } else {
                    DiscreteMeasure::zero()
                }
            }
            Self::Zeta { exponent } => {
                let z = zeta(*exponent);
                DiscreteMeasure::from_pairs(
                    (0..k as u64).map(|y| (AtomId(y), ((y + 1) as f64).powf(-exponent) / z)),
                )?
            }
            _ => DiscreteMeasure::from_pairs((0..k as u64).map(|y| (AtomId(y), self.mass(y))))?,
        };
        Ok(Truncation {
            measure,
            remainder: self.tail_mass(k as u64).max(0.0),
        })
    }

    /// Smallest prefix of atoms whose cut-away mass is below `tail_tol`.
    pub fn truncate(&self, tail_tol: f64) -> Result<Truncation> {
        if !(tail_tol > 0.0) {
            return Err(invalid("tail_tol", format!("{tail_tol} must be positive")));
        }
        self.validate()?;
        let k = match self {
            Self::Geometric { ratio } => {
                // ratio^k < tol  ⇔  k > ln tol / ln ratio
                let mut k = (tail_tol.ln() / ratio.ln()).floor().max(0.0) as u64;
                while self.tail_mass(k) >= tail_tol {
                    k += 1;
                }
                k as usize
            }
            Self::Zeta { exponent } => {
                let s = *exponent;
                let z = zeta(s);
                // Σ_{j>k} j^{-s} ≈ k^{1-s}/(s-1)
                let guess = ((tail_tol * z * (s - 1.0)).powf(-1.0 / (s - 1.0))).ceil();
                if !guess.is_finite() || guess > MAX_TRUNCATED_SUPPORT as f64 {
                    return Err(Error::Domain(format!(
                        "zeta({s}) tail below {tail_tol} needs about {guess:e} atoms"
                    )));
                }
                let mut k = (guess as u64).saturating_sub(2);
                while k > 0 && self.tail_mass(k - 1) < tail_tol {
                    k -= 1;
                }
                while self.tail_mass(k) >= tail_tol {
                    k += 1;
                }
                k as usize
            }
            _ => self.support_size().expect("finite family"),
        };
        self.truncate_support(k)
    }

    /// Draws one atom from the untruncated law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AtomId {
        match self {
            Self::Geometric { ratio } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                AtomId((u.ln() / ratio.ln()).floor() as u64)
            }
            Self::Zeta { exponent } => AtomId(sample_zeta(*exponent, rng) - 1),
            Self::Uniform { size } => AtomId(rng.random_range(0..*size as u64)),
            Self::Dirac { atom } => AtomId(*atom),
            Self::Explicit { masses } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, m) in masses.iter().enumerate() {
                    acc += m;
                    if u < acc {
                        return AtomId(i as u64);
                    }
                }
                AtomId(masses.iter().rposition(|m| *m > 0.0).unwrap_or(0) as u64)
            }
        }
    }
}

/// Devroye's rejection sampler for the zeta law on `{1, 2, …}`.
fn sample_zeta<R: Rng + ?Sized>(s: f64, rng: &mut R) -> u64 {
    let b = 2f64.powf(s - 1.0);
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let v: f64 = rng.random();
        let x = u.powf(-1.0 / (s - 1.0)).floor();
        if !(x >= 1.0 && x < 1e18) {
            continue;
        }
        let t = (1.0 + 1.0 / x).powf(s - 1.0);
        if v * x * (t - 1.0) / (b - 1.0) <= t / b {
            return x as u64;
        }
    }
}

/// `Σ_{j ≥ n} j^{−s}` for `n ≥ 1`, `s > 1`: explicit terms up to 64 then an
/// Euler–Maclaurin tail.
pub fn hurwitz_tail(s: f64, n: u64) -> f64 {
    let start = n.max(1);
    let cut = start.max(64);
    let head: f64 = (start..cut).map(|j| (j as f64).powf(-s)).sum();
    let m = cut as f64;
    let em = m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s) + s * m.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * m.powf(-s - 3.0) / 720.0
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * m.powf(-s - 5.0) / 30240.0;
    head + em
}

/// Riemann zeta for real `s > 1`.
pub fn zeta(s: f64) -> f64 {
    hurwitz_tail(s, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::ddb_statistic;
    use crate::rng::rng_for;

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-13);
        assert!((zeta(4.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-13);
    }

    #[test]
    fn geometric_truncation_reports_remainder() {
        let g = MeasureFamily::Geometric { ratio: 0.5 };
        let t = g.truncate(1e-12).unwrap();
        assert!(t.remainder < 1e-12);
        assert!((t.measure.total_mass() + t.remainder - 1.0).abs() < 1e-14);
        assert_eq!(t.measure.mass(AtomId(0)), 0.5);
        assert_eq!(t.measure.mass(AtomId(3)), 1.0 / 16.0);
        assert!(t.measure.is_probability());
        // partial DDB sums approach √2 + 1
        let s = ddb_statistic(&g.truncate_support(120).unwrap().measure).unwrap();
        assert!((s - (2f64.sqrt() + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn zeta_truncation() {
        let z = MeasureFamily::Zeta { exponent: 2.0 };
        let t = z.truncate(1e-4).unwrap();
        assert!(t.remainder < 1e-4);
        assert!((t.measure.total_mass() + t.remainder - 1.0).abs() < 1e-12);
        let n = t.measure.len() as u64;
        assert!(z.tail_mass(n - 1) >= 1e-4);
        assert!(MeasureFamily::Zeta { exponent: 2.0 }
            .truncate(1e-12)
            .is_err());
    }

    #[test]
    fn sample_frequencies_match_masses() {
        let mut rng = rng_for(11, &[0]);
        for fam in [
            MeasureFamily::Geometric { ratio: 0.5 },
            MeasureFamily::Zeta { exponent: 2.0 },
            MeasureFamily::Explicit {
                masses: vec![0.2, 0.3, 0.5],
            },
        ] {
            let n = 200_000;
            let mut counts = [0usize; 3];
            for _ in 0..n {
                let y = fam.sample(&mut rng).0 as usize;
                if y < 3 {
                    counts[y] += 1;
                }
            }
            for (y, &c) in counts.iter().enumerate() {
                let p = fam.mass(y as u64);
                let se = (p * (1.0 - p) / n as f64).sqrt();
                let phat = c as f64 / n as f64;
                assert!(
                    (phat - p).abs() < 4.0 * se,
                    "{fam:?} atom {y}: {phat} vs {p}"
                );
            }
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(MeasureFamily::Geometric { ratio: 1.0 }.validate().is_err());
        assert!(MeasureFamily::Zeta { exponent: 1.0 }.validate().is_err());
        assert!(MeasureFamily::Explicit {
            masses: vec![0.5, 0.4]
        }
        .validate()
        .is_err());
    }
}
