//! Bracketing numbers and bracketing entropy for the class of all indicator
//! functions on a countable space.
//!
//! Atoms are grouped into 16-adic mass bands `A_j = {y : 16^{−j−1} < p_y ≤ 16^{−j}}`.
//! The band census drives the level map `j(k)`, the counts `m(k)` whose
//! powers `2^{m(k)}` bound `N_[](2^{−k})`, and the dyadic majorant of the
//! entropy integral. A brute-force search gives exact bracketing numbers on
//! supports of at most four atoms and serves as an oracle for the bounds.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{compensated_sum, AtomId, DiscreteMeasure};

/// Largest core `C₀` for which [`bracket_cover_l1`] materializes its `2^{#C₀}` brackets.
pub const MAX_COVER_CORE: usize = 20;

/// Largest support accepted by [`brute_force_bracket_number`].
pub const MAX_BRUTE_FORCE_SUPPORT: usize = 4;

/// Increments of the dyadic entropy series below this end the summation.
pub const ENTROPY_SERIES_TOL: f64 = 1e-12;

/// A constant for the tail-sum entropy bound obtained by chaining the
/// inequalities of its proof: `√(log 2)·2·√(8·32)`. Conservative, not sharp.
pub fn lemma6_conservative_constant() -> f64 {
    std::f64::consts::LN_2.sqrt() * 2.0 * (8.0_f64 * 32.0).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    L1,
    L2,
}

impl NormOrder {
    pub fn exponent(self) -> i32 {
        match self {
            NormOrder::L1 => 1,
            NormOrder::L2 => 2,
        }
    }

    /// `‖1_U − 1_L‖_{Q,r}` from the mass `Q(U \ L)`.
    pub fn diameter(self, gap_mass: f64) -> f64 {
        match self {
            NormOrder::L1 => gap_mass,
            NormOrder::L2 => gap_mass.sqrt(),
        }
    }
}

/// A set of atoms that is either finite or the complement of a finite set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AtomSet {
    Finite(BTreeSet<AtomId>),
    /// Everything except the listed atoms.
    Cofinite(BTreeSet<AtomId>),
}

impl AtomSet {
    pub fn contains(&self, id: AtomId) -> bool {
        match self {
            AtomSet::Finite(s) => s.contains(&id),
            AtomSet::Cofinite(ex) => !ex.contains(&id),
        }
    }

    pub fn contains_all(&self, set: &BTreeSet<AtomId>) -> bool {
        set.iter().all(|&id| self.contains(id))
    }
}

/// The bracket `⟦1_lower, 1_upper⟧`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndicatorBracket {
    lower: BTreeSet<AtomId>,
    upper: AtomSet,
}

impl IndicatorBracket {
    pub fn new(lower: BTreeSet<AtomId>, upper: AtomSet) -> Result<Self> {
        if !upper.contains_all(&lower) {
            return Err(invalid(
                "bracket",
                "lower set is not contained in upper set",
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &BTreeSet<AtomId> {
        &self.lower
    }

    pub fn upper(&self) -> &AtomSet {
        &self.upper
    }

    /// Whether `lower ⊆ set ⊆ upper`.
    pub fn contains(&self, set: &BTreeSet<AtomId>) -> bool {
        self.lower.is_subset(set) && self.upper.contains_all(set)
    }

    /// `q(upper \ lower)` over the stored support of `q`.
    pub fn gap_mass(&self, q: &DiscreteMeasure) -> f64 {
        compensated_sum(
            q.iter()
                .filter(|&(id, _)| self.upper.contains(id) && !self.lower.contains(&id))
                .map(|(_, m)| m),
        )
    }

    pub fn diameter(&self, q: &DiscreteMeasure, order: NormOrder) -> f64 {
        order.diameter(self.gap_mass(q))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketCover {
    pub brackets: Vec<IndicatorBracket>,
    pub radius: f64,
    pub norm_order: NormOrder,
    /// The finite core `C₀` the brackets are built around, by decreasing mass.
    pub core: Vec<AtomId>,
}

impl BracketCover {
    pub fn len(&self) -> usize {
        self.brackets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.brackets.is_empty()
    }

    /// Some bracket containing `set`, if any.
    pub fn find(&self, set: &BTreeSet<AtomId>) -> Option<&IndicatorBracket> {
        self.brackets.iter().find(|b| b.contains(set))
    }
}

fn check_nonnegative(p: &DiscreteMeasure) -> Result<()> {
    match p.iter().find(|&(_, m)| m < 0.0) {
        Some((id, m)) => Err(Error::Domain(format!("atom {id} has negative mass {m}"))),
        None => Ok(()),
    }
}

/// `16^{−j}` computed exactly as a power of two.
fn sixteen_pow_neg(j: i32) -> f64 {
    2f64.powi(-4 * j)
}

/// The band index `j` with `16^{−j−1} < mass ≤ 16^{−j}`; masses above one land in band 0.
pub fn aj_level(mass: f64) -> u32 {
    debug_assert!(mass > 0.0);
    if mass >= 1.0 {
        return 0;
    }
    let mut j = ((-mass.log2()) / 4.0).floor().max(0.0) as i32;
    while j > 0 && mass > sixteen_pow_neg(j) {
        j -= 1;
    }
    while mass <= sixteen_pow_neg(j + 1) {
        j += 1;
    }
    j as u32
}

/// Per-band counts `r_j` and masses of the 16-adic partition.
#[derive(Clone, Debug, PartialEq)]
pub struct AjCensus {
    counts: Vec<usize>,
    masses: Vec<f64>,
    sqrt_masses: Vec<f64>,
    /// `tails[J] = Σ_{j ≥ J} mass(A_j)`, with a trailing zero.
    tails: Vec<f64>,
}

impl AjCensus {
    /// `r_j`, zero beyond the deepest occupied band.
    pub fn count(&self, j: u32) -> usize {
        self.counts.get(j as usize).copied().unwrap_or(0)
    }

    pub fn mass(&self, j: u32) -> f64 {
        self.masses.get(j as usize).copied().unwrap_or(0.0)
    }

    pub fn sqrt_mass(&self, j: u32) -> f64 {
        self.sqrt_masses.get(j as usize).copied().unwrap_or(0.0)
    }

    /// Number of bands up to the deepest occupied one.
    pub fn depth(&self) -> u32 {
        self.counts.len() as u32
    }

    /// Non-zero `(j, r_j)` pairs.
    pub fn occupied(&self) -> impl Iterator<Item = (u32, usize)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, &c)| (j as u32, c))
    }

    /// `Σ_{y : p_y ≤ 16^{−J}} p_y`.
    pub fn tail_mass(&self, big_j: u32) -> f64 {
        self.tails.get(big_j as usize).copied().unwrap_or(0.0)
    }

    /// `Σ_{y : p_y ≤ 16^{−J}} √p_y`.
    pub fn tail_sqrt_sum(&self, big_j: u32) -> f64 {
        compensated_sum(self.sqrt_masses.iter().skip(big_j as usize).copied())
    }

    /// `j(k)`: the least `J` with `tail_mass(J) ≤ 4^{−k}`.
    pub fn jk(&self, k: u32) -> u32 {
        let bound = 4f64.powi(-(k as i32));
        (0..=self.depth())
            .find(|&j| self.tail_mass(j) <= bound)
            .expect("tail mass vanishes past the deepest band")
    }

    /// `m(k) = Σ_{j ≤ j(k)} r_j`.
    pub fn mk(&self, k: u32) -> usize {
        (0..=self.jk(k)).map(|j| self.count(j)).sum()
    }

    pub fn total_atoms(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub fn aj_partition(p: &DiscreteMeasure) -> Result<AjCensus> {
    check_nonnegative(p)?;
    let mut counts: Vec<usize> = Vec::new();
    let mut per_band: Vec<Vec<f64>> = Vec::new();
    for m in p.masses() {
        let j = aj_level(m) as usize;
        if counts.len() <= j {
            counts.resize(j + 1, 0);
            per_band.resize(j + 1, Vec::new());
        }
        counts[j] += 1;
        per_band[j].push(m);
    }
    let masses: Vec<f64> = per_band
        .iter()
        .map(|b| compensated_sum(b.iter().copied()))
        .collect();
    let sqrt_masses: Vec<f64> = per_band
        .iter()
        .map(|b| compensated_sum(b.iter().map(|m| m.sqrt())))
        .collect();
    let mut tails = vec![0.0; masses.len() + 1];
    for j in (0..masses.len()).rev() {
        tails[j] = tails[j + 1] + masses[j];
    }
    Ok(AjCensus {
        counts,
        masses,
        sqrt_masses,
        tails,
    })
}

pub fn jk_index(p: &DiscreteMeasure, k: u32) -> Result<u32> {
    if k == 0 {
        return Err(invalid("k", "level must be positive"));
    }
    Ok(aj_partition(p)?.jk(k))
}

pub fn mk_count(p: &DiscreteMeasure, k: u32) -> Result<usize> {
    if k == 0 {
        return Err(invalid("k", "level must be positive"));
    }
    Ok(aj_partition(p)?.mk(k))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DyadicLevel {
    pub k: u32,
    pub j_k: u32,
    pub m_k: usize,
}

impl DyadicLevel {
    /// `2^{m(k)}`, the bracket-count bound at radius `2^{−k}` in L².
    pub fn count_bound(&self) -> f64 {
        2f64.powf(self.m_k as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicEntropyProfile {
    pub levels: Vec<DyadicLevel>,
    pub census: AjCensus,
}

/// `j(k)` and `m(k)` for `k = 1..=max_level`.
pub fn dyadic_profile(p: &DiscreteMeasure, max_level: u32) -> Result<DyadicEntropyProfile> {
    let census = aj_partition(p)?;
    let levels = (1..=max_level)
        .map(|k| DyadicLevel {
            k,
            j_k: census.jk(k),
            m_k: census.mk(k),
        })
        .collect();
    Ok(DyadicEntropyProfile { levels, census })
}

/// The `2^{#C₀}` brackets `⟦1_C, 1_{C ∪ C₀ᶜ}⟧`, `C ⊆ C₀`, where `C₀` is the
/// shortest prefix of atoms by decreasing mass (ties by ascending id) with
/// `p(C₀) > 1 − eps`.
pub fn bracket_cover_l1(p: &DiscreteMeasure, eps: f64) -> Result<BracketCover> {
    if !(eps > 0.0) {
        return Err(invalid("eps", format!("{eps} must be positive")));
    }
    check_nonnegative(p)?;
    let mut order: Vec<(AtomId, f64)> = p.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let target = 1.0 - eps;
    let mut core = Vec::new();
    let mut acc = 0.0;
    if !(acc > target) {
        for &(id, m) in &order {
            core.push(id);
            acc += m;
            if acc > target {
                break;
            }
        }
    }
    if !(acc > target) {
        return Err(Error::CoverUnreachable {
            eps,
            remaining: 1.0 - acc,
        });
    }
    if core.len() > MAX_COVER_CORE {
        return Err(Error::CoverTooLarge {
            core_size: core.len(),
            limit: MAX_COVER_CORE,
        });
    }

    let radius = (1.0 - acc).max(0.0);
    let core_set: BTreeSet<AtomId> = core.iter().copied().collect();
    let k = core.len();
    let brackets = (0u32..(1 << k))
        .map(|mask| {
            let lower: BTreeSet<AtomId> = (0..k)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| core[i])
                .collect();
            let excluded: BTreeSet<AtomId> = core_set.difference(&lower).copied().collect();
            IndicatorBracket {
                lower,
                upper: AtomSet::Cofinite(excluded),
            }
        })
        .collect();
    Ok(BracketCover {
        brackets,
        radius,
        norm_order: NormOrder::L1,
        core,
    })
}

/// Exact `N_[](eps, F, ‖·‖_{p,r})` by exhaustive search over indicator
/// brackets. A bracket is admissible when its diameter is `≤ eps` (up to a
/// `1e-12` absolute slack on the gap mass, to absorb decimal round-off).
pub fn brute_force_bracket_number(
    p: &DiscreteMeasure,
    eps: f64,
    order: NormOrder,
) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(invalid("eps", format!("{eps} must be positive")));
    }
    check_nonnegative(p)?;
    let n = p.len();
    if n > MAX_BRUTE_FORCE_SUPPORT {
        return Err(Error::SupportTooLarge {
            support: n,
            limit: MAX_BRUTE_FORCE_SUPPORT,
        });
    }
    let masses: Vec<f64> = p.masses().collect();
    let subsets = 1usize << n;
    let full: u32 = if subsets == 32 {
        u32::MAX
    } else {
        (1u32 << subsets) - 1
    };
    let max_gap = eps.powi(order.exponent()) + 1e-12;

    // Coverage bitmask over the 2^n subsets for every admissible (L, U), L ⊆ U.
    let mut candidates: Vec<u32> = Vec::new();
    for upper in 0..subsets {
        let mut lower = upper;
        loop {
            let gap = upper & !lower;
            let gap_mass: f64 = (0..n)
                .filter(|i| gap >> i & 1 == 1)
                .map(|i| masses[i])
                .sum();
            if gap_mass <= max_gap {
                let cov = (0..subsets)
                    .filter(|&s| s & lower == lower && s & !upper == 0)
                    .fold(0u32, |acc, s| acc | 1 << s);
                candidates.push(cov);
            }
            if lower == 0 {
                break;
            }
            lower = (lower - 1) & upper;
        }
    }
    // Drop brackets whose coverage is strictly inside another's.
    candidates.sort_unstable();
    candidates.dedup();
    let maximal: Vec<u32> = candidates
        .iter()
        .copied()
        .filter(|&c| !candidates.iter().any(|&d| d != c && d & c == c))
        .collect();

    // Breadth-first search over covered-subset masks, always branching on
    // the lowest uncovered subset.
    let mut seen = vec![false; 1usize << subsets.min(16)];
    let index = |m: u32| m as usize;
    let mut queue = VecDeque::from([(0u32, 0usize)]);
    seen[0] = true;
    while let Some((covered, depth)) = queue.pop_front() {
        if covered == full {
            return Ok(depth);
        }
        let first = (!covered).trailing_zeros();
        for &c in maximal.iter().filter(|&&c| c >> first & 1 == 1) {
            let next = covered | c;
            if !seen[index(next)] {
                seen[index(next)] = true;
                queue.push_back((next, depth + 1));
            }
        }
    }
    unreachable!("degenerate brackets always cover every subset")
}

/// Value and error bound of the dyadic entropy majorant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyBound {
    /// `√(log 2)·Σ_{k=start}^{last} √m(k)·2^{−k}`.
    pub value: f64,
    /// Upper bound on the omitted terms `k > last`.
    pub truncation_error: f64,
    pub start_level: u32,
    pub last_level: u32,
}

/// Smallest `p ≥ 1` with `2^{−(p−1)} ≤ delta`.
pub fn start_level(delta: f64) -> u32 {
    let mut p = 1u32;
    while 2f64.powi(1 - p as i32) > delta {
        p += 1;
    }
    p
}

/// Majorant of `J_[](delta, F, p)` via `N_[](2^{−k}) ≤ 2^{m(k)}`:
/// `√(log 2)·Σ_{k ≥ p} √m(k)/2^k` with `p` the first level whose radius
/// `2^{−(p−1)}` fits inside `delta`.
pub fn entropy_integral_bound(p: &DiscreteMeasure, delta: f64) -> Result<EntropyBound> {
    if !(delta > 0.0) {
        return Err(invalid("delta", format!("{delta} must be positive")));
    }
    let census = aj_partition(p)?;
    entropy_bound_from_census(&census, delta)
}

pub(crate) fn entropy_bound_from_census(census: &AjCensus, delta: f64) -> Result<EntropyBound> {
    let sqrt_ln2 = std::f64::consts::LN_2.sqrt();
    let start = start_level(delta);
    let max_m = census.total_atoms() as f64;
    let mut terms = Vec::new();
    let mut k = start;
    loop {
        let term = (census.mk(k) as f64).sqrt() * 2f64.powi(-(k as i32));
        terms.push(term);
        // m(k) never exceeds the support size, so the omitted tail is at most √S·2^{−k}.
        let tail = max_m.sqrt() * 2f64.powi(-(k as i32));
        if term < ENTROPY_SERIES_TOL && tail < ENTROPY_SERIES_TOL || k > 1100 {
            return Ok(EntropyBound {
                value: sqrt_ln2 * compensated_sum(terms),
                truncation_error: sqrt_ln2 * tail,
                start_level: start,
                last_level: k,
            });
        }
        k += 1;
    }
}

/// The two sums in the tail-sum bound on `J_[](2^{−(level−1)})`:
/// `√(Σ_y √p_y) · √(Σ_{y : p_y ≤ 16^{−j(level)+1}} √p_y)`, without the
/// universal constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma6Rhs {
    pub level: u32,
    pub j_level: u32,
    /// `Σ_y √p_y`.
    pub ddb_sum: f64,
    /// `Σ_{y : p_y ≤ 16^{−j(level)+1}} √p_y`.
    pub tail_sum: f64,
}

impl Lemma6Rhs {
    /// `√ddb_sum · √tail_sum`.
    pub fn structural(&self) -> f64 {
        self.ddb_sum.sqrt() * self.tail_sum.sqrt()
    }

    /// Structural product times [`lemma6_conservative_constant`].
    pub fn with_conservative_constant(&self) -> f64 {
        lemma6_conservative_constant() * self.structural()
    }
}

pub fn lemma6_rhs(p: &DiscreteMeasure, level: u32) -> Result<Lemma6Rhs> {
    if level == 0 {
        return Err(invalid("level", "level must be positive"));
    }
    let census = aj_partition(p)?;
    Ok(lemma6_from_census(&census, level))
}

pub(crate) fn lemma6_from_census(census: &AjCensus, level: u32) -> Lemma6Rhs {
    let j = census.jk(level);
    // {p_y ≤ 16^{−(j−1)}} is the union of the bands j−1, j, j+1, …
    let first_band = j.saturating_sub(1);
    Lemma6Rhs {
        level,
        j_level: j,
        ddb_sum: census.tail_sqrt_sum(0),
        tail_sum: census.tail_sqrt_sum(first_band),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureFamily;
    use proptest::prelude::*;
    use rand::Rng;

    fn geometric(n: usize) -> DiscreteMeasure {
        MeasureFamily::Geometric { ratio: 0.5 }
            .truncate_support(n)
            .unwrap()
            .measure
    }

    #[test]
    fn band_levels() {
        assert_eq!(aj_level(1.0), 0);
        assert_eq!(aj_level(0.5), 0);
        assert_eq!(aj_level(1.0 / 16.0), 1);
        assert_eq!(aj_level(1.0 / 16.0 + 1e-12), 0);
        assert_eq!(aj_level(1.0 / 256.0), 2);
        assert_eq!(aj_level(1.0 / 255.0), 1);
    }

    #[test]
    fn census_examples() {
        let c = aj_partition(&geometric(60)).unwrap();
        assert_eq!(c.count(0), 3);
        assert_eq!(c.count(1), 4);
        let c = aj_partition(&DiscreteMeasure::uniform(2).unwrap()).unwrap();
        assert_eq!(c.count(0), 2);
        assert_eq!(c.occupied().count(), 1);
        let c = aj_partition(&DiscreteMeasure::dirac(AtomId(0))).unwrap();
        assert_eq!(c.count(0), 1);
        assert_eq!(c.total_atoms(), 1);
    }

    #[test]
    fn jk_and_mk_examples() {
        let u2 = DiscreteMeasure::uniform(2).unwrap();
        assert_eq!(jk_index(&u2, 1).unwrap(), 1);
        assert_eq!(mk_count(&u2, 1).unwrap(), 2);
        let d = DiscreteMeasure::dirac(AtomId(0));
        for k in 1..10 {
            assert_eq!(jk_index(&d, k).unwrap(), 1);
            assert_eq!(mk_count(&d, k).unwrap(), 1);
        }
        let g = geometric(80);
        assert_eq!(jk_index(&g, 1).unwrap(), 1);
        assert_eq!(mk_count(&g, 1).unwrap(), 7);
        // tail(J) = 2^{1−4J}, so j(k) = ⌈(2k+1)/4⌉
        for k in 1..15u32 {
            assert_eq!(jk_index(&g, k).unwrap(), (2 * k + 1).div_ceil(4), "k={k}");
        }
        assert!(jk_index(&g, 0).is_err());
    }

    #[test]
    fn cover_examples() {
        let u4 = DiscreteMeasure::uniform(4).unwrap();
        let c = bracket_cover_l1(&u4, 0.3).unwrap();
        assert_eq!(c.core.len(), 3);
        assert_eq!(c.len(), 8);
        for b in &c.brackets {
            assert!((b.diameter(&u4, NormOrder::L1) - 0.25).abs() < 1e-15);
        }
        let c = bracket_cover_l1(&u4, 1.5).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.brackets[0].lower().is_empty());
        assert_eq!(c.brackets[0].upper(), &AtomSet::Cofinite(BTreeSet::new()));
        assert!(matches!(
            bracket_cover_l1(&u4, 0.0),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn cover_ties_break_by_id() {
        let m = DiscreteMeasure::from_masses(&[0.25, 0.25, 0.5]).unwrap();
        let c = bracket_cover_l1(&m, 0.4).unwrap();
        assert_eq!(c.core, vec![AtomId(2), AtomId(0)]);
    }

    #[test]
    fn cover_fails_on_short_truncation() {
        let t = MeasureFamily::Geometric { ratio: 0.5 }
            .truncate_support(3)
            .unwrap();
        match bracket_cover_l1(&t.measure, 0.05) {
            Err(Error::CoverUnreachable { remaining, .. }) => {
                assert!((remaining - 0.125).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cover_contains_random_subsets() {
        let mut rng = crate::rng::rng_for(3, &[0]);
        let g = geometric(40);
        for eps in [0.5, 0.1, 0.01] {
            let c = bracket_cover_l1(&g, eps).unwrap();
            assert!(c.radius < eps);
            for b in &c.brackets {
                assert!(b.diameter(&g, NormOrder::L1) <= c.radius + 1e-15);
            }
            for _ in 0..200 {
                let set: BTreeSet<AtomId> = (0..50u64)
                    .filter(|_| rng.random_bool(0.5))
                    .map(AtomId)
                    .collect();
                assert!(c.find(&set).is_some());
            }
        }
    }

    #[test]
    fn brute_force_examples() {
        let u2 = DiscreteMeasure::uniform(2).unwrap();
        assert_eq!(
            brute_force_bracket_number(&u2, 0.5, NormOrder::L2).unwrap(),
            4
        );
        let m = DiscreteMeasure::from_masses(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(
            brute_force_bracket_number(&m, 1.0, NormOrder::L1).unwrap(),
            1
        );
        let mut prev = usize::MAX;
        for eps in [0.05, 0.1, 0.2, 0.35, 0.5, 0.8, 1.0] {
            let n = brute_force_bracket_number(&m, eps, NormOrder::L1).unwrap();
            assert!(n <= prev);
            prev = n;
        }
        // Below the smallest atom every bracket is degenerate: one per subset.
        assert_eq!(
            brute_force_bracket_number(&m, 0.05, NormOrder::L1).unwrap(),
            16
        );
        assert!(matches!(
            brute_force_bracket_number(&DiscreteMeasure::uniform(5).unwrap(), 0.5, NormOrder::L1),
            Err(Error::SupportTooLarge { .. })
        ));
    }

    #[test]
    fn brute_force_single_free_atom() {
        // eps covers exactly atom 0 (mass 0.1): brackets may leave it free,
        // halving the count for each fixed pattern on the other atoms.
        let m = DiscreteMeasure::from_masses(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(
            brute_force_bracket_number(&m, 0.1, NormOrder::L1).unwrap(),
            8
        );
    }

    #[test]
    fn entropy_bound_for_point_mass() {
        let d = DiscreteMeasure::dirac(AtomId(0));
        for p in 1..6u32 {
            let delta = 2f64.powi(1 - p as i32);
            let b = entropy_integral_bound(&d, delta).unwrap();
            assert_eq!(b.start_level, p);
            let want = std::f64::consts::LN_2.sqrt() * 2f64.powi(1 - p as i32);
            assert!((b.value - want).abs() < 1e-11, "{} vs {want}", b.value);
            assert!(b.truncation_error < 1e-11);
        }
    }

    #[test]
    fn entropy_bound_monotone_in_delta() {
        let g = geometric(100);
        let mut prev = 0.0;
        for delta in [1e-4, 1e-3, 0.01, 0.1, 0.3, 0.5, 1.0, 4.0] {
            let b = entropy_integral_bound(&g, delta).unwrap();
            assert!(b.value >= prev);
            assert!(b.value.is_finite());
            prev = b.value;
        }
    }

    #[test]
    fn lemma6_point_mass_and_geometric() {
        let d = DiscreteMeasure::dirac(AtomId(0));
        for level in 1..8 {
            let r = lemma6_rhs(&d, level).unwrap();
            assert_eq!(r.j_level, 1);
            assert_eq!(r.structural(), 1.0);
        }
        let g = geometric(200);
        let mut prev = f64::INFINITY;
        for level in 1..30 {
            let r = lemma6_rhs(&g, level).unwrap();
            assert!(r.tail_sum <= r.ddb_sum);
            assert!(r.structural() <= prev);
            prev = r.structural();
        }
        assert!(prev < 1e-3);
        assert!(lemma6_conservative_constant() > 26.0 && lemma6_conservative_constant() < 27.0);
    }

    #[test]
    fn lemma6_dominates_entropy_majorant_up_to_constant() {
        let c = lemma6_conservative_constant();
        for m in [
            geometric(100),
            DiscreteMeasure::uniform(7).unwrap(),
            geometric(5).scaled(1.0 / geometric(5).total_mass()),
        ] {
            for level in 1..12u32 {
                let delta = 2f64.powi(1 - level as i32);
                let j = entropy_integral_bound(&m, delta).unwrap().value;
                let rhs = c * lemma6_rhs(&m, level).unwrap().structural();
                assert!(j <= rhs + 1e-12, "level {level}: {j} > {rhs}");
            }
        }
    }

    fn small_probability() -> impl Strategy<Value = DiscreteMeasure> {
        prop::collection::vec(1u32..20, 1..=4).prop_map(|w| {
            let t: u32 = w.iter().sum();
            DiscreteMeasure::from_masses(
                &w.iter().map(|&x| x as f64 / t as f64).collect::<Vec<_>>(),
            )
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jk_and_mk_are_monotone(ws in prop::collection::vec(1u32..1000, 1..60)) {
            let t: u32 = ws.iter().sum();
            let m = DiscreteMeasure::from_masses(&ws.iter().map(|&x| x as f64 / t as f64).collect::<Vec<_>>()).unwrap();
            let prof = dyadic_profile(&m, 20).unwrap();
            for w in prof.levels.windows(2) {
                prop_assert!(w[1].j_k >= w[0].j_k);
                prop_assert!(w[1].m_k >= w[0].m_k);
            }
        }

        #[test]
        fn brute_force_below_constructive_bounds(p in small_probability(), e in 1u32..10, k in 1u32..4) {
            let eps = e as f64 / 10.0;
            let core = bracket_cover_l1(&p, eps).unwrap().core.len();
            prop_assert!(brute_force_bracket_number(&p, eps, NormOrder::L1).unwrap() <= 1 << core);
            let r = 2f64.powi(-(k as i32));
            prop_assert!(brute_force_bracket_number(&p, r, NormOrder::L2).unwrap() <= 1 << mk_count(&p, k).unwrap());
        }
    }
}
