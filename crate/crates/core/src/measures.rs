//! Finitely-supported signed measures over a countable space whose points are
//! identified with non-negative integers, plus the weight sequences that
//! drive random discrete measures.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub mod family;

pub use family::{MeasureFamily, Truncation};

/// Masses whose magnitude falls below this after arithmetic (linear
/// combinations, scaling) are dropped and booked as lost mass. Construction
/// from explicit pairs only drops exact zeros.
pub const DROP_THRESHOLD: f64 = 1e-15;

/// Tolerance on the total mass of a probability measure.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// A point of the countable space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomId(pub u64);

impl From<u64> for AtomId {
    fn from(v: u64) -> Self {
        AtomId(v)
    }
}

impl std::fmt::Display for AtomId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Neumaier-compensated summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Finite non-negative weight vector together with the mass that was cut
/// away when an infinite sequence was truncated.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSeq {
    weights: Vec<f64>,
    remainder: f64,
}

impl WeightSeq {
    pub fn new(weights: Vec<f64>, remainder: f64) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(invalid(
                "weights",
                format!("entry {w} is not a finite non-negative number"),
            ));
        }
        if !(remainder.is_finite() && remainder >= 0.0) {
            return Err(invalid(
                "remainder",
                format!("{remainder} is not finite and non-negative"),
            ));
        }
        Ok(Self { weights, remainder })
    }

    /// Weights with no truncated remainder.
    pub fn exact(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights, 0.0)
    }

    /// `n` weights all equal to `value`.
    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::exact(vec![value; n])
    }

    pub(crate) fn from_parts_unchecked(weights: Vec<f64>, remainder: f64) -> Self {
        Self { weights, remainder }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn remainder(&self) -> f64 {
        self.remainder
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sum of the stored weights; the remainder is not included.
    pub fn l1(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// The ℓʳ norm of the stored weights, `r ∈ [1, ∞]` (pass `f64::INFINITY`
    /// for the sup norm).
    pub fn lr_norm(&self, r: f64) -> Result<f64> {
        lr_norm(self, r)
    }

    /// Multiplies every weight (and the remainder) by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid(
                "scale",
                format!("{c} is not finite and non-negative"),
            ));
        }
        Ok(Self {
            weights: self.weights.iter().map(|w| w * c).collect(),
            remainder: self.remainder * c,
        })
    }
}

pub fn lr_norm(w: &WeightSeq, r: f64) -> Result<f64> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::Domain(format!("ℓʳ norm needs r ≥ 1, got {r}")));
    }
    if w.weights.is_empty() {
        return Ok(0.0);
    }
    if r.is_infinite() {
        return Ok(w.weights.iter().copied().fold(0.0, f64::max));
    }
    if r == 1.0 {
        return Ok(w.l1());
    }
    // Scale by the max entry so that high powers of tiny weights do not underflow.
    let max = w.weights.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0.0);
    }
    let s = compensated_sum(w.weights.iter().map(|x| (x / max).powf(r)));
    Ok(max * s.powf(1.0 / r))
}

/// Sparse signed measure with finitely many atoms, sorted by id.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<(AtomId, f64)>,
    is_probability: bool,
    lost_mass: f64,
}

impl Default for DiscreteMeasure {
    fn default() -> Self {
        Self::zero()
    }
}

impl DiscreteMeasure {
    pub fn zero() -> Self {
        Self {
            atoms: Vec::new(),
            is_probability: false,
            lost_mass: 0.0,
        }
    }

    /// Builds a measure from arbitrary `(id, mass)` pairs. Repeated ids are
    /// merged and atoms whose merged mass is exactly zero are removed.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (AtomId, f64)>,
    {
        let mut raw: Vec<(AtomId, f64)> = pairs.into_iter().collect();
        if let Some((id, m)) = raw.iter().find(|(_, m)| !m.is_finite()) {
            return Err(invalid(
                "mass",
                format!("atom {id} has non-finite mass {m}"),
            ));
        }
        raw.sort_by_key(|&(id, _)| id);
        Ok(Self::from_sorted(merge_sorted_runs(raw), 0.0, 0.0))
    }

    /// Like [`from_pairs`](Self::from_pairs) but fails unless the result is a
    /// probability measure.
    pub fn probability<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (AtomId, f64)>,
    {
        let m = Self::from_pairs(pairs)?;
        m.require_probability()?;
        Ok(m)
    }

    /// Masses for atoms `0, 1, …, len-1`.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        Self::from_pairs(
            masses
                .iter()
                .enumerate()
                .map(|(i, &m)| (AtomId(i as u64), m)),
        )
    }

    pub fn dirac(id: AtomId) -> Self {
        Self::from_sorted(vec![(id, 1.0)], 0.0, 0.0)
    }

    /// Uniform probability on atoms `0..m`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "uniform measure needs at least one atom"));
        }
        let w = 1.0 / m as f64;
        Ok(Self::from_sorted(
            (0..m as u64).map(|i| (AtomId(i), w)).collect(),
            0.0,
            0.0,
        ))
    }

    /// Empirical measure `n⁻¹ Σ δ_{xᵢ}`. The empty sample gives the zero measure.
    pub fn empirical(sample: &[AtomId]) -> Self {
        if sample.is_empty() {
            return Self::zero();
        }
        let mut ids = sample.to_vec();
        ids.sort_unstable();
        let n = ids.len() as f64;
        let mut atoms = Vec::new();
        let mut i = 0;
        while i < ids.len() {
            let mut j = i;
            while j < ids.len() && ids[j] == ids[i] {
                j += 1;
            }
            atoms.push((ids[i], (j - i) as f64 / n));
            i = j;
        }
        Self::from_sorted(atoms, 0.0, 0.0)
    }

    fn from_sorted(atoms: Vec<(AtomId, f64)>, lost_mass: f64, drop_below: f64) -> Self {
        let mut lost = lost_mass;
        let atoms: Vec<(AtomId, f64)> = atoms
            .into_iter()
            .filter(|&(_, m)| {
                if m == 0.0 || m.abs() < drop_below {
                    lost += m.abs();
                    false
                } else {
                    true
                }
            })
            .collect();
        debug_assert!(atoms.windows(2).all(|w| w[0].0 < w[1].0));
        let is_probability = !atoms.is_empty()
            && atoms.iter().all(|&(_, m)| m > 0.0)
            && (compensated_sum(atoms.iter().map(|a| a.1)) - 1.0).abs() <= PROBABILITY_TOL;
        Self {
            atoms,
            is_probability,
            lost_mass: lost,
        }
    }

    pub fn atoms(&self) -> &[(AtomId, f64)] {
        &self.atoms
    }

    pub fn iter(&self) -> impl Iterator<Item = (AtomId, f64)> + '_ {
        self.atoms.iter().copied()
    }

    pub fn support(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_probability(&self) -> bool {
        self.is_probability
    }

    /// Total magnitude of masses dropped below [`DROP_THRESHOLD`].
    pub fn lost_mass(&self) -> f64 {
        self.lost_mass
    }

    pub fn mass(&self, id: AtomId) -> f64 {
        self.atoms
            .binary_search_by_key(&id, |a| a.0)
            .map(|i| self.atoms[i].1)
            .unwrap_or(0.0)
    }

    /// Measure of a finite set of atoms.
    pub fn measure_of<'a, I: IntoIterator<Item = &'a AtomId>>(&self, set: I) -> f64 {
        compensated_sum(set.into_iter().map(|&id| self.mass(id)))
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.masses())
    }

    pub fn require_probability(&self) -> Result<()> {
        if self.is_probability {
            Ok(())
        } else {
            Err(Error::NotProbability {
                total: self.total_mass(),
                min: self.masses().fold(f64::INFINITY, f64::min),
            })
        }
    }

    /// `a·self + b·other`, merged atomwise.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        let mut out = Vec::with_capacity(self.atoms.len() + other.atoms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.atoms.len() || j < other.atoms.len() {
            let left = self.atoms.get(i);
            let right = other.atoms.get(j);
            match (left, right) {
                (Some(&(x, mx)), Some(&(y, my))) if x == y => {
                    out.push((x, a * mx + b * my));
                    i += 1;
                    j += 1;
                }
                (Some(&(x, mx)), Some(&(y, _))) if x < y => {
                    out.push((x, a * mx));
                    i += 1;
                }
                (Some(&(x, mx)), None) => {
                    out.push((x, a * mx));
                    i += 1;
                }
                (_, Some(&(y, my))) => {
                    out.push((y, b * my));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        let lost = a.abs() * self.lost_mass + b.abs() * other.lost_mass;
        Self::from_sorted(out, lost, DROP_THRESHOLD)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_sorted(
            self.atoms.iter().map(|&(id, m)| (id, c * m)).collect(),
            c.abs() * self.lost_mass,
            DROP_THRESHOLD,
        )
    }

    /// `sup_C |μ(C)|` over all subsets of the space.
    pub fn signed_sup_norm(&self) -> f64 {
        signed_sup_norm(self)
    }

    /// One `id,mass` line per atom, masses in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for &(id, m) in &self.atoms {
            let _ = writeln!(s, "{},{:?}", id.0, m);
        }
        s
    }

    /// Parses the format written by [`to_csv`](Self::to_csv). An `id,mass`
    /// header line and blank lines are accepted.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.eq_ignore_ascii_case("id,mass")) {
                continue;
            }
            let parse_err = |reason: String| Error::Parse {
                line: lineno + 1,
                reason,
            };
            let (id, mass) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected `id,mass`".into()))?;
            let id: u64 = id
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad id: {e}")))?;
            let mass: f64 = mass
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad mass: {e}")))?;
            pairs.push((AtomId(id), mass));
        }
        Self::from_pairs(pairs)
    }
}

fn merge_sorted_runs(sorted: Vec<(AtomId, f64)>) -> Vec<(AtomId, f64)> {
    let mut out: Vec<(AtomId, Vec<f64>)> = Vec::with_capacity(sorted.len());
    for (id, m) in sorted {
        match out.last_mut() {
            Some((last, ms)) if *last == id => ms.push(m),
            _ => out.push((id, vec![m])),
        }
    }
    out.into_iter()
        .map(|(id, ms)| (id, compensated_sum(ms)))
        .collect()
}

/// `sup_C |μ(C)| = max(Σ positive masses, −Σ negative masses)
///               = ½(Σ|m_y| + |Σ m_y|)`.
pub fn signed_sup_norm(mu: &DiscreteMeasure) -> f64 {
    let pos = compensated_sum(mu.masses().filter(|m| *m > 0.0));
    let neg = compensated_sum(mu.masses().filter(|m| *m < 0.0));
    pos.max(-neg)
}

/// Total variation `sup_C |p(C) − q(C)|`.
pub fn tv_distance(p: &DiscreteMeasure, q: &DiscreteMeasure) -> f64 {
    signed_sup_norm(&p.sub(q))
}

/// `Σ_y √p_y` over the stored atoms.
pub fn ddb_statistic(p: &DiscreteMeasure) -> Result<f64> {
    if let Some((id, m)) = p.iter().find(|&(_, m)| m < 0.0) {
        return Err(Error::Domain(format!("atom {id} has negative mass {m}")));
    }
    Ok(compensated_sum(p.masses().map(f64::sqrt)))
}

/// Convex combination `θ·a + (1−θ)·b` of two probability measures.
pub fn mix(a: &DiscreteMeasure, b: &DiscreteMeasure, theta: f64) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid("theta", format!("{theta} is outside [0, 1]")));
    }
    a.require_probability()?;
    b.require_probability()?;
    if theta == 1.0 {
        return Ok(a.clone());
    }
    if theta == 0.0 {
        return Ok(b.clone());
    }
    Ok(a.linear_combination(theta, b, 1.0 - theta))
}
