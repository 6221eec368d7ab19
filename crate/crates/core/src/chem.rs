//! Population model of nicked-DNA solutions.
//!
//! A template molecule has two nicking sites, A and B, close enough that the
//! stretch between them melts off once both are nicked. A solution is the
//! split of its molecules over the four nick patterns. The value stored at a
//! site is the fraction of molecules nicked there; nicking B independently
//! of A makes the doubly nicked fraction the product of the two values.
//!
//! Reactions are modelled at completion. An [`ChemistryErrorModel`] scales
//! intended reactions by an efficiency and adds a spurious background.
//!
//! Two representations are supported. [`ChemistryMode::Ideal`] tracks exact
//! real fractions. [`ChemistryMode::Sampled`] tracks integer molecule counts
//! and draws every stochastic step from a seeded generator.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution, Hypergeometric};

use crate::rng::{self, derive_seed, mix64};
use crate::{Error, FractionalValue, Result};

/// Longest stretch between the two nicks that still melts into a toehold.
pub const MAX_INTER_NICK_SPAN_BP: u32 = 18;

/// Round to nearest, ties to even.
#[inline]
pub fn round_half_even(x: f64) -> f64 {
    libm::rint(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChemistryMode {
    Ideal,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NickTemplate {
    pub site_a: u32,
    pub site_b: u32,
    pub inter_nick_span_bp: u32,
    pub has_magnetic_bead: bool,
}

impl NickTemplate {
    pub fn new(site_a: u32, site_b: u32, inter_nick_span_bp: u32, has_magnetic_bead: bool) -> Result<Self> {
        if inter_nick_span_bp > MAX_INTER_NICK_SPAN_BP {
            return Err(Error::OutOfRange {
                what: "inter_nick_span_bp",
                value: f64::from(inter_nick_span_bp),
                range: "[0, 18]",
            });
        }
        if site_a == site_b {
            return Err(Error::arg("nicking sites A and B must differ"));
        }
        Ok(Self {
            site_a,
            site_b,
            inter_nick_span_bp,
            has_magnetic_bead,
        })
    }
}

impl Default for NickTemplate {
    fn default() -> Self {
        Self {
            site_a: 0,
            site_b: 1,
            inter_nick_span_bp: MAX_INTER_NICK_SPAN_BP,
            has_magnetic_bead: true,
        }
    }
}

/// The four nick patterns a two-site template can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Unnicked = 0,
    AOnly = 1,
    BOnly = 2,
    Both = 3,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::Unnicked, Species::AOnly, Species::BOnly, Species::Both];
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Population {
    Fractions([f64; 4]),
    Counts([u64; 4]),
}

/// A droplet's worth of template molecules.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    total: u64,
    population: Population,
    seed: u64,
    template: NickTemplate,
}

impl SolutionState {
    pub fn ideal(fractions: [f64; 4], total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::arg("a solution needs at least one molecule"));
        }
        if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::arg(format!("species fractions {fractions:?} must be nonnegative and sum to 1")));
        }
        Ok(Self {
            total,
            population: Population::Fractions(fractions),
            seed: 0,
            template: NickTemplate::default(),
        })
    }

    pub fn sampled(counts: [u64; 4], seed: u64) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::arg("a solution needs at least one molecule"));
        }
        Ok(Self {
            total,
            population: Population::Counts(counts),
            seed,
            template: NickTemplate::default(),
        })
    }

    pub fn with_template(mut self, template: NickTemplate) -> Self {
        self.template = template;
        self
    }

    pub fn template(&self) -> &NickTemplate {
        &self.template
    }

    pub fn mode(&self) -> ChemistryMode {
        match self.population {
            Population::Fractions(_) => ChemistryMode::Ideal,
            Population::Counts(_) => ChemistryMode::Sampled,
        }
    }

    /// Number of template molecules in the droplet.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fraction(&self, species: Species) -> f64 {
        match self.population {
            Population::Fractions(f) => f[species as usize],
            Population::Counts(c) => c[species as usize] as f64 / self.total as f64,
        }
    }

    /// Molecule count of a species; real-valued in ideal mode.
    pub fn count(&self, species: Species) -> f64 {
        match self.population {
            Population::Fractions(f) => f[species as usize] * self.total as f64,
            Population::Counts(c) => c[species as usize] as f64,
        }
    }

    /// Integer counts, if sampled.
    pub fn counts(&self) -> Option<[u64; 4]> {
        match self.population {
            Population::Counts(c) => Some(c),
            Population::Fractions(_) => None,
        }
    }

    pub fn fractions(&self) -> [f64; 4] {
        Species::ALL.map(|s| self.fraction(s))
    }

    /// Value stored at site A.
    pub fn site_a(&self) -> f64 {
        match self.population {
            Population::Fractions(f) => f[1] + f[3],
            Population::Counts(c) => (c[1] + c[3]) as f64 / self.total as f64,
        }
    }

    /// Value stored at site B.
    pub fn site_b(&self) -> f64 {
        match self.population {
            Population::Fractions(f) => f[2] + f[3],
            Population::Counts(c) => (c[2] + c[3]) as f64 / self.total as f64,
        }
    }

    /// Doubly nicked fraction: the product carried by the solution.
    pub fn both(&self) -> f64 {
        self.fraction(Species::Both)
    }
}

/// Nicking enzyme in a droplet, in molecules per droplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnzymeDose {
    pub concentration: f64,
    /// Still carrying its DNA tag and bead.
    pub tagged: bool,
}

impl EnzymeDose {
    pub fn new(concentration: f64, tagged: bool) -> Result<Self> {
        if !(concentration >= 0.0) || !concentration.is_finite() {
            return Err(Error::OutOfRange {
                what: "enzyme concentration",
                value: concentration,
                range: "[0, inf)",
            });
        }
        Ok(Self { concentration, tagged })
    }

    /// Dose encoding weight `b` for a droplet of `t` molecules when the
    /// enzyme is spread across `k` microcells: `E = b * t / k`.
    pub fn for_weight(b: FractionalValue, t: u64, k: usize) -> Result<Self> {
        if k == 0 || t == 0 {
            return Err(Error::arg("dose needs t >= 1 and k >= 1"));
        }
        Self::new(b.get() * t as f64 / k as f64, false)
    }
}

/// Single-stranded fragments released by probe displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsdnaPool {
    /// Number of fragments; integral in sampled runs.
    pub count: f64,
    /// Template molecules the fraction is measured against.
    pub reference_total: u64,
}

impl SsdnaPool {
    pub fn new(count: f64, reference_total: u64) -> Result<Self> {
        if reference_total == 0 {
            return Err(Error::arg("pool reference total must be positive"));
        }
        if !(count >= 0.0) || count > reference_total as f64 {
            return Err(Error::OutOfRange {
                what: "ssDNA count",
                value: count,
                range: "[0, reference_total]",
            });
        }
        Ok(Self { count, reference_total })
    }

    pub fn fraction(&self) -> f64 {
        self.count / self.reference_total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationParams {
    pub threshold: f64,
    pub output_cap: f64,
    /// Replenishment strand supplied in excess, so any residual drives the
    /// output to the cap.
    pub replenishment_excess: bool,
    /// Linear gain used when replenishment is limited.
    pub gain: f64,
}

impl ActivationParams {
    pub const DEFAULT_GAIN: f64 = 1e3;

    pub fn new(threshold: f64) -> Result<Self> {
        Self {
            threshold,
            output_cap: 1.0,
            replenishment_excess: true,
            gain: Self::DEFAULT_GAIN,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::OutOfRange {
                what: "threshold",
                value: self.threshold,
                range: "(0, 1)",
            });
        }
        if !(self.output_cap > 0.0 && self.output_cap <= 1.0) {
            return Err(Error::OutOfRange {
                what: "output_cap",
                value: self.output_cap,
                range: "(0, 1]",
            });
        }
        if !(self.gain > 0.0) || !self.gain.is_finite() {
            return Err(Error::OutOfRange {
                what: "gain",
                value: self.gain,
                range: "(0, inf)",
            });
        }
        Ok(self)
    }
}

/// Imperfect strand displacement: `efficiency` of the intended reactions
/// complete, and `spurious_rate` of molecules that should stay inert react
/// anyway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChemistryErrorModel {
    pub efficiency: f64,
    pub spurious_rate: f64,
}

impl ChemistryErrorModel {
    pub const IDEAL: Self = Self {
        efficiency: 1.0,
        spurious_rate: 0.0,
    };

    pub fn new(efficiency: f64, spurious_rate: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::OutOfRange {
                what: "efficiency",
                value: efficiency,
                range: "(0, 1]",
            });
        }
        if !(0.0..1.0).contains(&spurious_rate) {
            return Err(Error::OutOfRange {
                what: "spurious_rate",
                value: spurious_rate,
                range: "[0, 1)",
            });
        }
        Ok(Self {
            efficiency,
            spurious_rate,
        })
    }
}

impl Default for ChemistryErrorModel {
    fn default() -> Self {
        Self::IDEAL
    }
}

/// Encodes `a` at site A by split, nick, mix.
///
/// The split is volumetric, so a sampled solution gets exactly
/// `round(a * t)` nicked molecules (ties to even).
pub fn encode_fraction(a: FractionalValue, t: u64, mode: ChemistryMode, seed: u64) -> Result<SolutionState> {
    if t == 0 {
        return Err(Error::arg("encode needs t >= 1 molecules"));
    }
    match mode {
        ChemistryMode::Ideal => SolutionState::ideal([1.0 - a.get(), a.get(), 0.0, 0.0], t),
        ChemistryMode::Sampled => {
            let nicked = (round_half_even(a.get() * t as f64) as u64).min(t);
            SolutionState::sampled([t - nicked, nicked, 0, 0], seed)
        }
    }
}

/// Nicks site B with `dose`, given time to act on `k` strands per enzyme.
///
/// Each molecule is nicked at B with probability `b = E * k / t`,
/// independently of site A.
pub fn nick_site_b(s: &SolutionState, dose: &EnzymeDose, k: usize) -> Result<SolutionState> {
    let b = dose.concentration * k as f64 / s.total as f64;
    if b > 1.0 + 1e-9 {
        return Err(Error::DoseOverflow { ratio: b });
    }
    let b = b.clamp(0.0, 1.0);
    let population = match s.population {
        Population::Fractions([u, a, bo, ab]) => {
            Population::Fractions([u * (1.0 - b), a * (1.0 - b), bo + u * b, ab + a * b])
        }
        Population::Counts([u, a, bo, ab]) => {
            let mut rng = rng::seeded(derive_seed(s.seed, &[0xb]));
            let binom = |n: u64, rng: &mut rng::Rng| -> u64 {
                Binomial::new(n, b).expect("b in [0, 1]").sample(rng)
            };
            let u_to_b = binom(u, &mut rng);
            let a_to_ab = binom(a, &mut rng);
            Population::Counts([u - u_to_b, a - a_to_ab, bo + u_to_b, ab + a_to_ab])
        }
    };
    Ok(SolutionState {
        total: s.total,
        population,
        seed: mix64(s.seed),
        template: s.template,
    })
}

/// Heat, probe, and pull down: releases one fragment per doubly nicked
/// molecule, scaled by the error model.
pub fn probe_readout(s: &SolutionState, err: &ChemistryErrorModel) -> SsdnaPool {
    let both = s.count(Species::Both);
    let rest = s.total as f64 - both;
    let mut count = err.efficiency * both + err.spurious_rate * rest;
    if s.mode() == ChemistryMode::Sampled {
        count = round_half_even(count);
    }
    SsdnaPool {
        count: count.min(s.total as f64),
        reference_total: s.total,
    }
}

/// Merges equally sized pools; the merged fraction is the mean fraction.
pub fn merge_pools(pools: &[SsdnaPool]) -> Result<SsdnaPool> {
    let first = pools.first().ok_or_else(|| Error::arg("merge needs at least one pool"))?;
    for p in pools {
        if p.reference_total != first.reference_total {
            return Err(Error::ReferenceMismatch {
                expected: first.reference_total,
                found: p.reference_total,
            });
        }
    }
    Ok(SsdnaPool {
        count: pools.iter().map(|p| p.count).sum(),
        reference_total: first.reference_total * pools.len() as u64,
    })
}

/// Merges droplets of the same mode into one.
pub fn merge_solutions(states: &[SolutionState]) -> Result<SolutionState> {
    let first = states.first().ok_or_else(|| Error::arg("merge needs at least one droplet"))?;
    let total: u64 = states.iter().map(|s| s.total).sum();
    let population = match first.population {
        Population::Fractions(_) => {
            let mut acc = [0.0; 4];
            for s in states {
                let Population::Fractions(f) = s.population else {
                    return Err(Error::ModeMismatch);
                };
                let w = s.total as f64 / total as f64;
                for (a, v) in acc.iter_mut().zip(f) {
                    *a += w * v;
                }
            }
            Population::Fractions(acc)
        }
        Population::Counts(_) => {
            let mut acc = [0u64; 4];
            for s in states {
                let Population::Counts(c) = s.population else {
                    return Err(Error::ModeMismatch);
                };
                for (a, v) in acc.iter_mut().zip(c) {
                    *a += v;
                }
            }
            Population::Counts(acc)
        }
    };
    let seed = states.iter().fold(first.seed, |acc, s| mix64(acc ^ s.seed));
    Ok(SolutionState {
        total,
        population,
        seed,
        template: first.template,
    })
}

/// Seesaw threshold-and-amplify.
///
/// The threshold strand consumes `min(x, theta)` of the input one to one.
/// Any residual drives the gate: with excess replenishment the output goes
/// to the cap, otherwise it is `min(cap, gain * residual)`. No residual
/// means no output (apart from spurious leak).
pub fn seesaw_activation(x: f64, p: &ActivationParams, err: &ChemistryErrorModel) -> FractionalValue {
    let residual = x - x.min(p.threshold);
    let out = if residual > 0.0 {
        if p.replenishment_excess {
            p.output_cap
        } else {
            (p.gain * residual).min(p.output_cap)
        }
    } else {
        err.spurious_rate * p.output_cap
    };
    FractionalValue::saturating(out)
}

/// Untags nicking enzyme one-for-one with output strands; the tagged
/// surplus is pulled down.
pub fn translate_to_enzyme(out: FractionalValue, reference_total: u64, err: &ChemistryErrorModel) -> EnzymeDose {
    EnzymeDose {
        concentration: err.efficiency * out.get() * reference_total as f64,
        tagged: false,
    }
}

/// Nicks site A of `fresh_total` un-nicked molecules with an untagged dose
/// measured against `reference_total`.
pub fn nick_fresh_site_a(
    dose: &EnzymeDose,
    reference_total: u64,
    fresh_total: u64,
    mode: ChemistryMode,
    seed: u64,
) -> Result<SolutionState> {
    let ratio = dose.concentration / reference_total as f64;
    if ratio > 1.0 + 1e-9 {
        return Err(Error::DoseOverflow { ratio });
    }
    encode_fraction(FractionalValue::saturating(ratio), fresh_total, mode, seed)
}

fn part_sizes(total: u64, k: usize) -> impl Iterator<Item = u64> {
    let k64 = k as u64;
    let (base, rem) = (total / k64, total % k64);
    (0..k64).map(move |i| base + u64::from(i < rem))
}

/// Pinches a droplet into `k` parts of equal volume.
///
/// When the molecule count is not divisible by `k` the remainder goes one
/// molecule each to the first parts. Sampled droplets are partitioned by a
/// multivariate hypergeometric draw, so every species count is conserved.
pub fn split_droplet(s: &SolutionState, k: usize, seed: u64) -> Result<Vec<SolutionState>> {
    if k == 0 {
        return Err(Error::arg("split needs k >= 1"));
    }
    if k == 1 {
        return Ok(alloc::vec![s.clone()]);
    }
    if (k as u64) > s.total {
        return Err(Error::arg(format!("cannot split {} molecules into {k} parts", s.total)));
    }
    let mut parts = Vec::with_capacity(k);
    match s.population {
        Population::Fractions(f) => {
            for (i, size) in part_sizes(s.total, k).enumerate() {
                parts.push(SolutionState {
                    total: size,
                    population: Population::Fractions(f),
                    seed: derive_seed(seed, &[i as u64]),
                    template: s.template,
                });
            }
        }
        Population::Counts(c) => {
            let mut rng = rng::seeded(seed);
            let mut remaining = c;
            let mut left = s.total;
            for (i, size) in part_sizes(s.total, k).enumerate() {
                let mut part = [0u64; 4];
                let mut draws = size;
                let mut pool = left;
                for sp in 0..4 {
                    if draws == 0 {
                        break;
                    }
                    let x = if remaining[sp] == 0 {
                        0
                    } else if sp == 3 || remaining[sp] == pool {
                        draws.min(remaining[sp])
                    } else {
                        Hypergeometric::new(pool, remaining[sp], draws)
                            .expect("valid hypergeometric parameters")
                            .sample(&mut rng)
                    };
                    part[sp] = x;
                    pool -= remaining[sp];
                    remaining[sp] -= x;
                    draws -= x;
                }
                debug_assert_eq!(draws, 0);
                left -= size;
                parts.push(SolutionState {
                    total: size,
                    population: Population::Counts(part),
                    seed: derive_seed(seed, &[i as u64]),
                    template: s.template,
                });
            }
        }
    }
    Ok(parts)
}
