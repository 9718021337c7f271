//! Direct simulation of the random substitution dynamics on finite prefixes.
//!
//! Every sample owns a ChaCha8 stream selected by its index, so results do not
//! depend on how rayon splits the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::correlation::{correlation_series, PrecisionMode, DEFAULT_PRECISION};
use crate::dynamics::{Symbol, Word};
use crate::error::{Error, Result};
use crate::marginals::stationary_exact;
use crate::probability::Probability;
use crate::scaling::beta;

pub const DEFAULT_BURN_IN: usize = 60;
pub const DEFAULT_SEED: u64 = 0x5eed_0f_e4_0d;
const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitialWord {
    AllOnes,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub p: Probability,
    pub prefix_length: usize,
    pub burn_in: usize,
    pub samples: usize,
    pub seed: u64,
    pub initial: InitialWord,
}

impl SimConfig {
    pub fn new(p: Probability, prefix_length: usize, burn_in: usize, samples: usize, seed: u64) -> Result<Self> {
        if prefix_length == 0 || burn_in == 0 || samples == 0 {
            return Err(Error::InvalidParameter(format!(
                "prefix length {prefix_length}, burn-in {burn_in}, samples {samples} must all be positive"
            )));
        }
        Ok(SimConfig { p, prefix_length, burn_in, samples, seed, initial: InitialWord::AllOnes })
    }

    pub fn with_initial(mut self, initial: InitialWord) -> Self {
        self.initial = initial;
        self
    }

    fn rng(&self, sample: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample as u64);
        rng
    }

    fn initial_word(&self, len: usize) -> Vec<u8> {
        match self.initial {
            InitialWord::AllOnes => vec![1; len],
            InitialWord::Alternating => (0..len).map(|i| (i % 2 == 0) as u8).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub half_width: f64,
    pub n_samples: usize,
}

impl EstimateWithCI {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.point).abs() <= self.half_width
    }
}

/// One global substitution step on a prefix: symbols are consumed until the
/// output reaches `len`, then the output is cut to `len`.
fn step(input: &[u8], output: &mut Vec<u8>, len: usize, mut mutate: impl FnMut() -> bool) {
    output.clear();
    for &x in input {
        if output.len() >= len {
            break;
        }
        if mutate() {
            output.push(1 - x);
        } else {
            output.push(x);
            output.push(x);
        }
    }
    output.truncate(len);
}

/// Runs one sample for `steps` steps, calling `visit(t, prefix)` for
/// `t = 0..=steps`.
fn run(cfg: &SimConfig, sample: usize, len: usize, steps: usize, mut visit: impl FnMut(usize, &[u8])) {
    let mut rng = cfg.rng(sample);
    let p = cfg.p.value();
    let mut cur = cfg.initial_word(len);
    let mut next = Vec::with_capacity(len + 1);
    visit(0, &cur);
    for t in 1..=steps {
        step(&cur, &mut next, len, || rng.gen::<f64>() < p);
        std::mem::swap(&mut cur, &mut next);
        visit(t, &cur);
    }
}

/// Word of length `L` after `T` steps for sample 0 of the configuration.
pub fn simulate_prefix(cfg: &SimConfig) -> Word {
    simulate_sample(cfg, 0)
}

pub fn simulate_sample(cfg: &SimConfig, sample: usize) -> Word {
    let mut out = Word::new();
    run(cfg, sample, cfg.prefix_length, cfg.burn_in, |t, w| {
        if t == cfg.burn_in {
            out = Word::from_symbols(w.iter().map(|&b| if b == 1 { Symbol::ONE } else { Symbol::ZERO }));
        }
    });
    out
}

/// Binomial 95% half-width; a single sample uses the worst-case variance 1/4.
fn bernoulli_half_width(q: f64, n: usize) -> f64 {
    let var = if n > 1 { q * (1.0 - q) } else { 0.25 };
    Z95 * (var / n as f64).sqrt()
}

fn count_matches(cfg: &SimConfig, distances: &[usize]) -> Vec<u64> {
    (0..cfg.samples)
        .into_par_iter()
        .fold(
            || vec![0u64; distances.len()],
            |mut acc, i| {
                run(cfg, i, cfg.prefix_length, cfg.burn_in, |t, w| {
                    if t == cfg.burn_in {
                        for (a, &n) in acc.iter_mut().zip(distances) {
                            *a += (w[0] == w[n]) as u64;
                        }
                    }
                });
                acc
            },
        )
        .reduce(|| vec![0u64; distances.len()], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect())
}

/// `C(n) = (P{x₀ = xₙ} − 1/2)/2` with its CI, for each requested distance,
/// all from the same `N` runs.
pub fn estimate_correlations(distances: &[usize], cfg: &SimConfig) -> Result<Vec<EstimateWithCI>> {
    if let Some(&n) = distances.iter().find(|&&n| cfg.prefix_length < n + 1) {
        return Err(Error::Range(format!("prefix length {} too short for distance {n}", cfg.prefix_length)));
    }
    let counts = count_matches(cfg, distances);
    Ok(counts
        .into_iter()
        .map(|c| {
            let q = c as f64 / cfg.samples as f64;
            EstimateWithCI {
                point: (q - 0.5) / 2.0,
                half_width: bernoulli_half_width(q, cfg.samples) / 2.0,
                n_samples: cfg.samples,
            }
        })
        .collect())
}

pub fn estimate_correlation(n: usize, cfg: &SimConfig) -> Result<EstimateWithCI> {
    Ok(estimate_correlations(&[n], cfg)?[0])
}

/// Empirical frequency of `x₀ = 1`.
pub fn estimate_first_symbol(cfg: &SimConfig) -> EstimateWithCI {
    let ones: u64 = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut hit = 0;
            run(cfg, i, cfg.prefix_length, cfg.burn_in, |t, w| {
                if t == cfg.burn_in {
                    hit = w[0] as u64;
                }
            });
            hit
        })
        .sum();
    let q = ones as f64 / cfg.samples as f64;
    EstimateWithCI { point: q, half_width: bernoulli_half_width(q, cfg.samples), n_samples: cfg.samples }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub t: usize,
    pub total_variation: f64,
}

/// Total-variation distance between the empirical length-`(ℓ+1)` prefix
/// distribution after `t` steps and the exact stationary vector, for
/// `t = 0..=t_max`.
pub fn convergence_scan(ell: usize, t_max: usize, cfg: &SimConfig) -> Result<Vec<ConvergencePoint>> {
    if ell > 8 {
        return Err(Error::Resource { ell, max: 8 });
    }
    let exact = stationary_exact::<f64>(ell, &cfg.p)?;
    let width = ell + 1;
    let cells = 1usize << width;
    let len = cfg.prefix_length.max(width);
    let counts = (0..cfg.samples)
        .into_par_iter()
        .fold(
            || vec![0u64; (t_max + 1) * cells],
            |mut acc, i| {
                run(cfg, i, len, t_max, |t, w| {
                    let idx = w[..width].iter().fold(0usize, |a, &b| (a << 1) | b as usize);
                    acc[t * cells + idx] += 1;
                });
                acc
            },
        )
        .reduce(|| vec![0u64; (t_max + 1) * cells], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    let n = cfg.samples as f64;
    Ok((0..=t_max)
        .map(|t| {
            let row = &counts[t * cells..(t + 1) * cells];
            let tv = 0.5 * row.iter().zip(exact.weights()).map(|(&c, &m)| (c as f64 / n - m).abs()).sum::<f64>();
            ConvergencePoint { t, total_variation: tv }
        })
        .collect())
}

/// Samples needed for the 95% half-width at `q = 1/2` to equal `|c|`.
pub fn required_samples(c: f64) -> f64 {
    (Z95 * 0.5 / 2.0 / c.abs()).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleComplexityRow {
    pub n: usize,
    pub correlation: f64,
    pub required_samples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleComplexityReport {
    pub p: f64,
    pub beta: f64,
    pub decades: u32,
    pub rows: Vec<SampleComplexityRow>,
    /// Required `N` at the far end, `n = 10^decades`.
    pub required_at_end: f64,
    pub budget: f64,
    /// First `n` whose correlation is below the half-width reachable with `budget` samples.
    pub crossover: Option<usize>,
}

/// Samples needed to resolve `C_p(n)` over `n ∈ [1, 10^decades]`.
pub fn sample_complexity_demo(p: &Probability, target_decades: u32, budget: f64) -> Result<SampleComplexityReport> {
    let b = beta(p.value())?;
    if target_decades == 0 || target_decades > 5 {
        return Err(Error::InvalidParameter(format!("{target_decades} decades outside 1..=5")));
    }
    let n_end = 10usize.pow(target_decades);
    let series = correlation_series(p, n_end, PrecisionMode::Float { bits: DEFAULT_PRECISION })?;
    let rows: Vec<SampleComplexityRow> = (0..=target_decades)
        .map(|k| {
            let n = 10usize.pow(k);
            let c = series.get(n).unwrap();
            SampleComplexityRow { n, correlation: c, required_samples: required_samples(c) }
        })
        .collect();
    let crossover = (1..=n_end).find(|&n| required_samples(series.get(n).unwrap()) > budget);
    Ok(SampleComplexityReport {
        p: p.value(),
        beta: b.value,
        decades: target_decades,
        required_at_end: rows.last().unwrap().required_samples,
        rows,
        budget,
        crossover,
    })
}
