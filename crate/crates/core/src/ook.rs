//! On-off keying over the Poisson channel: MAP threshold, analytic error
//! probability and Monte Carlo bit error rate.
//!
//! Bit `1` releases `N` molecules at the slot start, bit `0` releases none.
//! The received count at the sampling time is Poisson with mean
//! `b_0 N p_0 + sum_i b_i N p_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::channel::IsiProfile;
use crate::error::ensure;
use crate::{poisson, Result};

/// Largest memory for which the analytic BER enumerates every pattern.
pub const EXACT_MEMORY_LIMIT: usize = 20;
/// Lattice size for the ISI-mean distribution beyond the exact limit.
pub const LATTICE_POINTS: usize = 1 << 20;
/// Bits per Monte Carlo block; each block has its own stream.
pub const MC_BLOCK: usize = 1 << 16;
pub const MIN_MC_BITS: u64 = 10_000;
/// Lattice nodes lighter than this are skipped.
const NEGLIGIBLE_MASS: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    /// Thresholds use the true past bits.
    Genie,
    /// Thresholds use the detector's own past decisions.
    DecisionFeedback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OokLink {
    /// Mean molecules per `1`.
    pub n_molecules: f64,
    pub slot: f64,
    pub t_s: f64,
    /// `p_0..=p_M`.
    pub coefficients: Vec<f64>,
}

impl OokLink {
    pub fn new(n_molecules: f64, profile: &IsiProfile) -> Result<Self> {
        Self::from_coefficients(n_molecules, profile.slot, profile.t_s, profile.coefficients.clone())
    }

    pub fn from_coefficients(
        n_molecules: f64,
        slot: f64,
        t_s: f64,
        coefficients: Vec<f64>,
    ) -> Result<Self> {
        ensure(n_molecules > 0.0 && n_molecules.is_finite(), || {
            format!("molecule count {n_molecules} must be > 0")
        })?;
        ensure(!coefficients.is_empty() && coefficients[0] > 0.0, || {
            "p_0 must be > 0".into()
        })?;
        ensure(coefficients.iter().all(|p| (0.0..=1.0).contains(p)), || {
            "observation probabilities must lie in [0, 1]".into()
        })?;
        Ok(Self {
            n_molecules,
            slot,
            t_s,
            coefficients,
        })
    }

    pub fn memory(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `N p_0`.
    pub fn signal_mean(&self) -> f64 {
        self.n_molecules * self.coefficients[0]
    }

    /// `N p_i` for `i = 1..=M`.
    pub fn isi_weights(&self) -> Vec<f64> {
        self.coefficients[1..].iter().map(|p| self.n_molecules * p).collect()
    }

    /// ISI mean for past bits `history[i - 1] = b_i`.
    pub fn isi_mean(&self, history: &[bool]) -> f64 {
        history
            .iter()
            .zip(&self.coefficients[1..])
            .filter(|(&b, _)| b)
            .map(|(_, p)| self.n_molecules * p)
            .sum()
    }
}

/// MAP threshold between `Poisson(isi)` and `Poisson(signal + isi)`:
/// `signal / ln(1 + signal / isi)`, and 0 when there is no ISI.
pub fn threshold(signal: f64, isi: f64) -> f64 {
    if isi <= 0.0 {
        0.0
    } else {
        signal / (signal / isi).ln_1p()
    }
}

/// Threshold for the past bits `history[i - 1] = b_i`.
pub fn map_threshold(history: &[bool], link: &OokLink) -> f64 {
    threshold(link.signal_mean(), link.isi_mean(history))
}

/// Decide `1` iff `y > thr`; ties go to `0`.
pub fn decide(y: u64, thr: f64) -> bool {
    y as f64 > thr
}

/// Error probabilities given `b_0 = 0` and `b_0 = 1` at ISI mean `isi`.
pub fn conditional_errors(signal: f64, isi: f64) -> Result<(f64, f64)> {
    let k = threshold(signal, isi).floor() as u64;
    let false_alarm = poisson::sf(k, isi)?;
    let miss = poisson::cdf(k, signal + isi)?;
    Ok((false_alarm, miss))
}

/// Conditional error of one ISI history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternError {
    /// Past bits packed with `b_i` in bit `i - 1`.
    pub history: u32,
    pub isi: f64,
    pub threshold: f64,
    pub given_zero: f64,
    pub given_one: f64,
}

/// Conditional errors for all `2^M` histories; `M <= EXACT_MEMORY_LIMIT`.
pub fn pattern_table(link: &OokLink) -> Result<Vec<PatternError>> {
    let m = link.memory();
    ensure(m <= EXACT_MEMORY_LIMIT, || {
        format!("pattern table needs memory <= {EXACT_MEMORY_LIMIT}, got {m}")
    })?;
    let weights = link.isi_weights();
    let signal = link.signal_mean();
    (0..1u32 << m)
        .into_par_iter()
        .map(|history| {
            let isi: f64 = weights
                .iter()
                .enumerate()
                .filter(|&(i, _)| history >> i & 1 == 1)
                .map(|(_, w)| w)
                .sum();
            let (given_zero, given_one) = conditional_errors(signal, isi)?;
            Ok(PatternError {
                history,
                isi,
                threshold: threshold(signal, isi),
                given_zero,
                given_one,
            })
        })
        .collect()
}

/// Genie-aided error probability averaged over equiprobable patterns.
///
/// Memories up to [`EXACT_MEMORY_LIMIT`] are enumerated exactly. Longer
/// memories use the distribution of the ISI mean on a lattice of
/// [`LATTICE_POINTS`] points, each weight's mass split linearly between
/// neighbouring nodes.
pub fn analytic_ber(link: &OokLink) -> Result<f64> {
    if link.memory() <= EXACT_MEMORY_LIMIT {
        let table = pattern_table(link)?;
        let total: f64 = table.iter().map(|p| p.given_zero + p.given_one).sum();
        return Ok(0.5 * total / table.len() as f64);
    }
    lattice_ber(link, LATTICE_POINTS)
}

fn lattice_ber(link: &OokLink, points: usize) -> Result<f64> {
    let weights = link.isi_weights();
    let span: f64 = weights.iter().sum();
    if span == 0.0 {
        let (e0, e1) = conditional_errors(link.signal_mean(), 0.0)?;
        return Ok(0.5 * (e0 + e1));
    }
    let spacing = span / (points - 1) as f64;
    let mut mass = vec![0.0; points];
    let mut next = vec![0.0; points];
    mass[0] = 1.0;
    let mut reach = 0usize;
    for &w in &weights {
        let shift = w / spacing;
        let whole = shift.floor() as usize;
        let frac = shift - whole as f64;
        let new_reach = (reach + whole + 1).min(points - 1);
        next[..=new_reach].iter_mut().for_each(|x| *x = 0.0);
        for j in 0..=reach {
            let half = 0.5 * mass[j];
            if half == 0.0 {
                continue;
            }
            next[j] += half;
            let a = (j + whole).min(points - 1);
            let b = (j + whole + 1).min(points - 1);
            next[a] += half * (1.0 - frac);
            next[b] += half * frac;
        }
        reach = new_reach;
        std::mem::swap(&mut mass, &mut next);
    }
    let signal = link.signal_mean();
    let total = mass[..=reach]
        .par_iter()
        .enumerate()
        .filter(|(_, &m)| m > NEGLIGIBLE_MASS)
        .map(|(j, &m)| {
            let (e0, e1) = conditional_errors(signal, j as f64 * spacing)?;
            Ok(m * (e0 + e1))
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>();
    Ok(0.5 * total)
}

/// Monte Carlo error count with a binomial confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub bits: u64,
    pub errors: u64,
    pub rate: f64,
    pub stderr: f64,
    /// 95% Wilson score interval.
    pub ci: (f64, f64),
}

impl McEstimate {
    fn new(bits: u64, errors: u64) -> Self {
        let n = bits as f64;
        let p = errors as f64 / n;
        let z = 1.959_963_984_540_054;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        Self {
            bits,
            errors,
            rate: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            ci: ((centre - half).max(0.0), (centre + half).min(1.0)),
        }
    }
}

/// Simulates `n_bits` equiprobable bits. Blocks of [`MC_BLOCK`] bits use
/// independent streams and start from a random history, so every decision
/// sees the full memory.
pub fn monte_carlo_ber(link: &OokLink, n_bits: u64, seed: u64, detector: Detector) -> Result<McEstimate> {
    ensure(n_bits >= MIN_MC_BITS, || {
        format!("Monte Carlo needs at least {MIN_MC_BITS} bits, got {n_bits}")
    })?;
    let weights = link.isi_weights();
    let m = weights.len();
    let signal = link.signal_mean();
    let blocks = n_bits.div_ceil(MC_BLOCK as u64);
    let errors: u64 = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let len = (n_bits - block * MC_BLOCK as u64).min(MC_BLOCK as u64) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block);
            // bits[m + k] is bit k of the block, bits[..m] the pre-history
            let bits: Vec<bool> = (0..m + len).map(|_| rng.random::<bool>()).collect();
            let mut decided = bits.clone();
            let mut errors = 0u64;
            for k in 0..len {
                let now = m + k;
                let isi_true = isi_at(&weights, &bits, now);
                let isi_seen = match detector {
                    Detector::Genie => isi_true,
                    Detector::DecisionFeedback => isi_at(&weights, &decided, now),
                };
                let mean = if bits[now] { signal + isi_true } else { isi_true };
                let y = sample_poisson(mean, &mut rng);
                let d = decide(y, threshold(signal, isi_seen));
                decided[now] = d;
                errors += u64::from(d != bits[now]);
            }
            errors
        })
        .sum();
    Ok(McEstimate::new(n_bits, errors))
}

fn isi_at(weights: &[f64], bits: &[bool], now: usize) -> f64 {
    weights
        .iter()
        .enumerate()
        .filter(|&(i, _)| bits[now - 1 - i])
        .map(|(_, w)| w)
        .sum()
}

fn sample_poisson(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("mean is positive and finite");
    d.sample(rng) as u64
}

/// Analytic and Monte Carlo results for one link.
#[derive(Debug, Clone, PartialEq)]
pub struct BerResult {
    pub analytic: f64,
    pub monte_carlo: Option<McEstimate>,
    /// Present when the memory allows exact enumeration.
    pub patterns: Option<Vec<PatternError>>,
}

pub fn evaluate(link: &OokLink, mc: Option<(u64, u64, Detector)>) -> Result<BerResult> {
    let analytic = analytic_ber(link)?;
    let monte_carlo = match mc {
        Some((n_bits, seed, detector)) => Some(monte_carlo_ber(link, n_bits, seed, detector)?),
        None => None,
    };
    let patterns = if link.memory() <= EXACT_MEMORY_LIMIT {
        Some(pattern_table(link)?)
    } else {
        None
    };
    Ok(BerResult {
        analytic,
        monte_carlo,
        patterns,
    })
}
