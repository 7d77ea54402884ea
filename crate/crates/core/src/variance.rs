//! Momentum variance of the rotor started in the zero-momentum eigenstate.
//!
//! For a single noise history the variance after `N` kicks is
//! `K²/2 · Σ_{j,k} (1 - x_j)(1 - x_k) cos((j - k)τ)`; averaging over the
//! Markov chain replaces the bit products by `(1 + a^{|k-j|})/4`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kicks::{MarkovKickProcess, Realization};
use crate::par;
use crate::params::RotorParams;

/// Trials handled by one sequential work item in Monte Carlo runs.
const MC_BATCH: usize = 512;

/// Smallest trial count accepted by the Monte Carlo estimators.
pub const MIN_TRIALS: usize = 100;

/// Kick statistics driving a variance computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KickNoise {
    /// Every kick fires with strength `K`.
    Deterministic,
    Markov(MarkovKickProcess),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMode {
    Exact,
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub n: usize,
    pub variance: f64,
    /// Standard error of a Monte Carlo estimate; `None` for exact values.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VarianceCurve {
    pub points: Vec<VariancePoint>,
}

impl VarianceCurve {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.variance).collect()
    }

    pub fn max(&self) -> f64 {
        self.points.iter().map(|p| p.variance).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Least-squares slope of variance against `N` over `n_lo..=n_hi`.
    pub fn slope(&self, n_lo: usize, n_hi: usize) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| (n_lo..=n_hi).contains(&p.n))
            .map(|p| (p.n as f64, p.variance))
            .collect();
        least_squares_slope(&pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Variance for one noise history, via `K²/2·|Σ_j (1 - x_j) e^{ijτ}|²`.
pub fn variance_realization(params: &RotorParams, x: &Realization) -> f64 {
    let tau = params.tau_value();
    let (mut re, mut im) = (0.0, 0.0);
    for (j, &b) in x.bits().iter().enumerate() {
        if b == 0 {
            let (s, c) = ((j + 1) as f64 * tau).sin_cos();
            re += c;
            im += s;
        }
    }
    0.5 * params.kick_strength().powi(2) * (re * re + im * im)
}

/// Literal double sum `K² Σ_{j,k} (1 - x_j)(1 - x_k) cos((j - k)τ) / 2`.
pub fn variance_realization_direct(params: &RotorParams, bits: &[u8]) -> f64 {
    let tau = params.tau_value();
    let mut sum = 0.0;
    for (j, &xj) in bits.iter().enumerate() {
        for (k, &xk) in bits.iter().enumerate() {
            let w = f64::from(1 - xj) * f64::from(1 - xk);
            sum += w * ((j as f64 - k as f64) * tau).cos();
        }
    }
    params.kick_strength().powi(2) * sum / 2.0
}

/// Deterministic (noise-free) variance `K²/2 · Σ_{j,k≤N} cos((j - k)τ)` for
/// `N = 1..=n_max`, each step adding the new row and column.
pub fn deterministic_variance_curve(params: &RotorParams, n_max: usize) -> Vec<f64> {
    let tau = params.tau_value();
    let half_k2 = params.kick_strength().powi(2) / 2.0;
    let mut lag_sum = 0.0;
    let mut total = 0.0;
    (1..=n_max)
        .map(|n| {
            if n > 1 {
                lag_sum += ((n - 1) as f64 * tau).cos();
            }
            total += half_k2 * (1.0 + 2.0 * lag_sum);
            total
        })
        .collect()
}

pub fn deterministic_variance(params: &RotorParams, n: usize) -> f64 {
    deterministic_variance_curve(params, n).last().copied().unwrap_or(0.0)
}

/// Markov-averaged variance by the literal double sum
/// `Σ_{j,k} K²/8 · (1 + a^{|k-j|}) cos((j - k)τ)`.
pub fn variance_markov_exact(params: &RotorParams, process: &MarkovKickProcess, n: usize) -> f64 {
    let tau = params.tau_value();
    let a = process.memory();
    let mut sum = 0.0;
    for j in 1..=n {
        for k in 1..=n {
            let lag = j.abs_diff(k) as i32;
            sum += (1.0 + a.powi(lag)) * ((j as f64 - k as f64) * tau).cos();
        }
    }
    params.kick_strength().powi(2) / 8.0 * sum
}

/// Markov-averaged variance for `N = 1..=n_max` in `O(n_max)` total work.
///
/// Going from `N - 1` to `N` adds the diagonal term `2` and the pairs at lags
/// `d = 1..N-1`, i.e. `K²/8 · (2 + 2 Σ_d (1 + a^d) cos(dτ))`.
pub fn variance_markov_exact_curve(
    params: &RotorParams,
    process: &MarkovKickProcess,
    n_max: usize,
) -> Vec<f64> {
    let tau = params.tau_value();
    let a = process.memory();
    let k2_8 = params.kick_strength().powi(2) / 8.0;
    let mut lag_sum = 0.0;
    let mut a_pow = 1.0;
    let mut total = 0.0;
    (1..=n_max)
        .map(|n| {
            if n > 1 {
                a_pow *= a;
                lag_sum += (1.0 + a_pow) * ((n - 1) as f64 * tau).cos();
            }
            total += k2_8 * (2.0 + 2.0 * lag_sum);
            total
        })
        .collect()
}

/// Long-time growth rate of the averaged variance for `a < 1`:
/// `K²/8 · Σ_{d∈ℤ} a^{|d|} cos(dτ) = K²/8 · (1 - a²)/(1 - 2a cos τ + a²)`.
pub fn diffusion_rate(params: &RotorParams, process: &MarkovKickProcess) -> f64 {
    let a = process.memory();
    let denom = 1.0 - 2.0 * a * params.tau_value().cos() + a * a;
    if a >= 1.0 || denom <= 0.0 {
        return 0.0;
    }
    params.kick_strength().powi(2) / 8.0 * (1.0 - a * a) / denom
}

/// Running mean and sum of squared deviations, mergeable pairwise.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&self, other: &Self) -> Self {
        let count = self.count + other.count;
        if count == 0.0 {
            return Self::default();
        }
        let d = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + d * other.count / count,
            m2: self.m2 + other.m2 + d * d * self.count * other.count / count,
        }
    }

    fn estimate(&self) -> McEstimate {
        let var = if self.count > 1.0 {
            self.m2 / (self.count - 1.0)
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            stderr: (var / self.count).sqrt(),
            trials: self.count as usize,
        }
    }
}

/// Sample moments of the variance at every `N ≤ n_max`.
///
/// Trial `t` always draws from stream `t` (see
/// [`MarkovKickProcess::trajectory_rng`]); trials are grouped into fixed
/// batches whose moments are merged in a fixed pairwise order.
fn mc_moments(
    params: &RotorParams,
    process: &MarkovKickProcess,
    n_max: usize,
    trials: usize,
    seed: u64,
) -> Vec<Moments> {
    let phasors = params.kick_phasors(n_max);
    let half_k2 = params.kick_strength().powi(2) / 2.0;
    let batches = trials.div_ceil(MC_BATCH);
    let per_batch = par::map_indexed(batches, |b| {
        let mut moments = vec![Moments::default(); n_max];
        let mut bits = Vec::with_capacity(n_max);
        for t in (b * MC_BATCH)..((b + 1) * MC_BATCH).min(trials) {
            let mut rng = MarkovKickProcess::trajectory_rng(seed, t as u64);
            process.sample_into(n_max, &mut rng, &mut bits);
            let (mut re, mut im) = (0.0, 0.0);
            for ((m, &x), &(c, s)) in moments.iter_mut().zip(&bits).zip(&phasors) {
                if x == 0 {
                    re += c;
                    im += s;
                }
                m.push(half_k2 * (re * re + im * im));
            }
        }
        moments
    });
    par::pairwise_reduce(&per_batch, &|l: &Vec<Moments>, r: &Vec<Moments>| {
        l.iter().zip(r).map(|(x, y)| x.merge(y)).collect()
    })
    .unwrap_or_else(|| vec![Moments::default(); n_max])
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(invalid("trials", format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    Ok(())
}

/// Monte Carlo estimate of the averaged variance at horizon `n`.
pub fn variance_markov_mc(
    params: &RotorParams,
    process: &MarkovKickProcess,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_trials(trials)?;
    if n == 0 {
        return Err(invalid("N", "horizon must be at least 1"));
    }
    let moments = mc_moments(params, process, n, trials, seed);
    Ok(moments[n - 1].estimate())
}

/// Variance against `N = 1..=n_max`.
///
/// Deterministic kicks are always evaluated exactly. In Monte Carlo mode all
/// horizons share the same sampled histories.
pub fn variance_curve(
    params: &RotorParams,
    noise: KickNoise,
    n_max: usize,
    mode: CurveMode,
) -> Result<VarianceCurve> {
    if n_max == 0 {
        return Err(invalid("N_max", "must be at least 1"));
    }
    let exact = |values: Vec<f64>| VarianceCurve {
        points: values
            .into_iter()
            .enumerate()
            .map(|(i, variance)| VariancePoint {
                n: i + 1,
                variance,
                stderr: None,
            })
            .collect(),
    };
    Ok(match (noise, mode) {
        (KickNoise::Deterministic, _) => exact(deterministic_variance_curve(params, n_max)),
        (KickNoise::Markov(p), CurveMode::Exact) => exact(variance_markov_exact_curve(params, &p, n_max)),
        (KickNoise::Markov(p), CurveMode::MonteCarlo { trials, seed }) => {
            check_trials(trials)?;
            VarianceCurve {
                points: mc_moments(params, &p, n_max, trials, seed)
                    .iter()
                    .enumerate()
                    .map(|(i, m)| {
                        let e = m.estimate();
                        VariancePoint {
                            n: i + 1,
                            variance: e.mean,
                            stderr: Some(e.stderr),
                        }
                    })
                    .collect(),
            }
        }
    })
}
