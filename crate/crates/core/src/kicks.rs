//! The one-step Markov process that switches kicks on and off.
//!
//! Each step carries a symbol `x ∈ {0, 1}`; the kick fires with strength
//! `K(1 - x)`. Both symbols have stationary probability ½ and the chain
//! repeats its previous symbol with the extra weight `a` (the memory):
//! `T = a·I + (1 - a)/2·𝟙`. Columns of `T` are indexed by the current symbol,
//! rows by the next one.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// A 2×2 real matrix, indexed `[row][column]`.
pub type Matrix2 = [[f64; 2]; 2];

/// Largest horizon accepted by [`MarkovKickProcess::characteristic_fn_enumerated`].
pub const MAX_ENUMERATION_HORIZON: usize = 20;

fn check_memory(a: f64) -> Result<f64> {
    if a.is_finite() && (0.0..=1.0).contains(&a) {
        Ok(a)
    } else {
        Err(invalid("a", format!("memory parameter must lie in [0, 1], got {a}")))
    }
}

/// `a·I + (1 - a)/2·𝟙`.
pub fn transition_matrix(a: f64) -> Result<Matrix2> {
    let a = check_memory(a)?;
    Ok(blend(a))
}

/// `Tⁿ = aⁿ·I + (1 - aⁿ)/2·𝟙`, using the closed form rather than repeated products.
pub fn transition_power(a: f64, n: u32) -> Result<Matrix2> {
    let a = check_memory(a)?;
    Ok(blend(powu(a, n)))
}

fn powu(a: f64, n: u32) -> f64 {
    match i32::try_from(n) {
        Ok(n) => a.powi(n),
        Err(_) => a.powf(f64::from(n)),
    }
}

fn blend(weight: f64) -> Matrix2 {
    let off = (1.0 - weight) / 2.0;
    [[weight + off, off], [off, weight + off]]
}

/// Phases `u_1, …, u_N` conjugate to the noise symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for PhaseVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl std::ops::Neg for &PhaseVector {
    type Output = PhaseVector;

    fn neg(self) -> PhaseVector {
        PhaseVector(self.0.iter().map(|u| -u).collect())
    }
}

/// A finite noise history `x_1 … x_N` together with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    bits: Vec<u8>,
    probability: f64,
}

impl Realization {
    /// Builds a realization and computes its probability under `process`.
    pub fn new(bits: Vec<u8>, process: &MarkovKickProcess) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(invalid("bits", "symbols must be 0 or 1"));
        }
        let probability = process.probability(&bits);
        Ok(Self { bits, probability })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    /// Number of steps at which the kick fired (`x = 0`).
    pub fn kicks(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 0).count()
    }
}

impl fmt::Display for Realization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b == 0 { "0" } else { "1" })?;
        }
        write!(f, " p={}", self.probability)
    }
}

impl FromStr for Realization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (bits, prob) = s
            .trim()
            .split_once(" p=")
            .ok_or_else(|| Error::Format(format!("expected `<bits> p=<prob>`, got {s:?}")))?;
        let bits = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Format(format!("bad symbol {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        let probability: f64 = prob
            .parse()
            .map_err(|e| Error::Format(format!("bad probability {prob:?}: {e}")))?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::Format(format!("probability {probability} outside [0, 1]")));
        }
        Ok(Self { bits, probability })
    }
}

/// Streaming evaluation of the characteristic function.
///
/// Pushing the phasors `e^{-iu_1}, e^{-iu_2}, …` one at a time yields
/// `Λ_1, Λ_2, …` in turn. The state is the vector `T_{u_j}⋯T_{u_2}·½(1, e^{-iu_1})ᵀ`,
/// so the cost per step is one 2×2 product.
#[derive(Debug, Clone, Copy)]
pub struct CharFnAccumulator {
    stay: f64,
    switch: f64,
    state: [Complex64; 2],
    steps: usize,
}

impl CharFnAccumulator {
    /// Consumes `e^{-iu_j}` and returns `Λ_j`.
    #[inline]
    pub fn push(&mut self, phasor: Complex64) -> Complex64 {
        let [v0, v1] = self.state;
        self.state = if self.steps == 0 {
            [Complex64::new(0.5, 0.0), phasor * 0.5]
        } else {
            [
                v0 * self.stay + v1 * self.switch,
                phasor * (v0 * self.switch + v1 * self.stay),
            ]
        };
        self.steps += 1;
        self.value()
    }

    /// Current `Λ_j`; equals 1 before anything was pushed.
    #[inline]
    pub fn value(&self) -> Complex64 {
        if self.steps == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            self.state[0] + self.state[1]
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// The stationary two-symbol Markov chain with memory parameter `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovKickProcess {
    memory: f64,
}

impl MarkovKickProcess {
    pub fn new(a: f64) -> Result<Self> {
        Ok(Self {
            memory: check_memory(a)?,
        })
    }

    /// Independent fair coin flips (`a = 0`).
    pub fn bernoulli() -> Self {
        Self { memory: 0.0 }
    }

    pub fn memory(&self) -> f64 {
        self.memory
    }

    pub fn transition(&self) -> Matrix2 {
        blend(self.memory)
    }

    pub fn transition_power(&self, n: u32) -> Matrix2 {
        blend(powu(self.memory, n))
    }

    /// Probability that the next symbol repeats the current one.
    pub fn stay_probability(&self) -> f64 {
        (1.0 + self.memory) / 2.0
    }

    pub fn switch_probability(&self) -> f64 {
        (1.0 - self.memory) / 2.0
    }

    /// `p(x̄_N) = T_{x_N x_{N-1}} ⋯ T_{x_2 x_1} p_{x_1}`.
    pub fn probability(&self, bits: &[u8]) -> f64 {
        let t = self.transition();
        let mut p = if bits.is_empty() { 1.0 } else { 0.5 };
        for w in bits.windows(2) {
            p *= t[usize::from(w[1])][usize::from(w[0])];
        }
        p
    }

    /// `⟨x_j x_k⟩ = (1 + a^{|k-j|}) / 4` for 1-based step indices.
    pub fn second_moment(&self, j: usize, k: usize) -> f64 {
        let lag = u32::try_from(j.abs_diff(k)).unwrap_or(u32::MAX);
        (1.0 + powu(self.memory, lag)) / 4.0
    }

    /// RNG for trajectory `index` of a run seeded with `seed`.
    ///
    /// Every trajectory gets its own ChaCha8 stream (`set_stream(index)`) of
    /// the generator keyed by `seed`, so a Monte Carlo run reproduces
    /// bit-for-bit regardless of how trajectories are scheduled.
    pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng
    }

    /// Draws `n` symbols into `out` (cleared first).
    pub fn sample_into<R: Rng + ?Sized>(&self, n: usize, rng: &mut R, out: &mut Vec<u8>) {
        out.clear();
        if n == 0 {
            return;
        }
        let stay = self.stay_probability();
        let mut x = u8::from(rng.random::<f64>() >= 0.5);
        out.push(x);
        for _ in 1..n {
            if rng.random::<f64>() >= stay {
                x = 1 - x;
            }
            out.push(x);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Realization> {
        if n == 0 {
            return Err(invalid("N", "horizon must be at least 1"));
        }
        let mut bits = Vec::with_capacity(n);
        self.sample_into(n, rng, &mut bits);
        let probability = self.probability(&bits);
        Ok(Realization { bits, probability })
    }

    /// Samples trajectory 0 of the stream family keyed by `seed`.
    pub fn sample_seeded(&self, n: usize, seed: u64) -> Result<Realization> {
        self.sample(n, &mut Self::trajectory_rng(seed, 0))
    }

    pub fn char_fn_accumulator(&self) -> CharFnAccumulator {
        CharFnAccumulator {
            stay: self.stay_probability(),
            switch: self.switch_probability(),
            state: [Complex64::new(0.0, 0.0); 2],
            steps: 0,
        }
    }

    /// `Λ_N(ū) = (1, 1)·T_{u_N}⋯T_{u_2}·½(1, e^{-iu_1})ᵀ` with `T_u = diag(1, e^{-iu})·T`.
    pub fn characteristic_fn(&self, u: &PhaseVector) -> Result<Complex64> {
        if u.is_empty() {
            return Err(invalid("u", "phase vector must be non-empty"));
        }
        let mut acc = self.char_fn_accumulator();
        for &uj in u.as_slice() {
            acc.push(Complex64::cis(-uj));
        }
        Ok(acc.value())
    }

    /// Brute-force `Σ_{x̄} e^{-i⟨x̄|ū⟩} p(x̄)` over all `2^N` histories.
    pub fn characteristic_fn_enumerated(&self, u: &PhaseVector) -> Result<Complex64> {
        let n = u.len();
        if n == 0 {
            return Err(invalid("u", "phase vector must be non-empty"));
        }
        if n > MAX_ENUMERATION_HORIZON {
            return Err(Error::HorizonTooLarge {
                requested: n,
                limit: MAX_ENUMERATION_HORIZON,
            });
        }
        let mut bits = vec![0u8; n];
        let mut total = Complex64::new(0.0, 0.0);
        for mask in 0u32..(1 << n) {
            let mut phase = 0.0;
            for (j, b) in bits.iter_mut().enumerate() {
                *b = ((mask >> j) & 1) as u8;
                if *b == 1 {
                    phase += u.as_slice()[j];
                }
            }
            total += Complex64::cis(-phase) * self.probability(&bits);
        }
        Ok(total)
    }

    /// All `2^N` realizations in lexicographic order of `x_1 x_2 … x_N`.
    pub fn realizations(&self, n: usize) -> Result<Vec<Realization>> {
        if n > MAX_ENUMERATION_HORIZON {
            return Err(Error::HorizonTooLarge {
                requested: n,
                limit: MAX_ENUMERATION_HORIZON,
            });
        }
        Ok((0u32..(1 << n))
            .map(|mask| {
                let bits: Vec<u8> = (0..n).map(|j| ((mask >> (n - 1 - j)) & 1) as u8).collect();
                let probability = self.probability(&bits);
                Realization { bits, probability }
            })
            .collect())
    }
}

/// Samples a length-`n` history with memory `a`, reproducibly from `seed`.
pub fn sample_chain(a: f64, n: usize, seed: u64) -> Result<Realization> {
    MarkovKickProcess::new(a)?.sample_seeded(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat_mul(x: &Matrix2, y: &Matrix2) -> Matrix2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = (0..2).map(|k| x[i][k] * y[k][j]).sum();
            }
        }
        out
    }

    #[test]
    fn transition_matrix_limits() {
        assert_eq!(transition_matrix(0.0).unwrap(), [[0.5, 0.5], [0.5, 0.5]]);
        assert_eq!(transition_matrix(1.0).unwrap(), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(transition_matrix(0.5).unwrap(), [[0.75, 0.25], [0.25, 0.75]]);
    }

    #[test]
    fn out_of_range_memory_is_rejected() {
        for a in [-0.1, 1.0001, f64::NAN, f64::INFINITY] {
            assert!(transition_matrix(a).is_err(), "{a}");
            assert!(MarkovKickProcess::new(a).is_err());
        }
    }

    #[test]
    fn transition_power_examples() {
        // squaring [[.75,.25],[.25,.75]] by hand
        let sq = transition_power(0.5, 2).unwrap();
        assert_abs_diff_eq!(sq[0][0], 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(sq[0][1], 0.375, epsilon = 1e-15);
        let t = transition_matrix(0.5).unwrap();
        assert_eq!(mat_mul(&t, &t), sq);
        assert_eq!(transition_power(0.37, 0).unwrap(), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(transition_power(1.0, 7).unwrap(), [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn columns_are_stochastic_and_stationary() {
        for i in 0..=10 {
            let a = f64::from(i) / 10.0;
            let t = transition_matrix(a).unwrap();
            for (top, bottom) in t[0].iter().zip(&t[1]) {
                assert_abs_diff_eq!(top + bottom, 1.0, epsilon = 1e-15);
            }
            let pi = [0.5 * (t[0][0] + t[0][1]), 0.5 * (t[1][0] + t[1][1])];
            assert_abs_diff_eq!(pi[0], 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(pi[1], 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn full_memory_repeats_first_symbol() {
        let process = MarkovKickProcess::new(1.0).unwrap();
        for seed in 0..20 {
            let r = process.sample_seeded(64, seed).unwrap();
            let first = r.bits()[0];
            assert!(r.bits().iter().all(|&b| b == first));
            assert_eq!(r.probability(), 0.5);
        }
    }

    #[test]
    fn sampling_rejects_empty_horizon_and_is_reproducible() {
        assert!(sample_chain(0.3, 0, 1).is_err());
        assert_eq!(sample_chain(0.3, 100, 9).unwrap(), sample_chain(0.3, 100, 9).unwrap());
        assert_ne!(sample_chain(0.3, 100, 9).unwrap(), sample_chain(0.3, 100, 10).unwrap());
    }

    #[test]
    fn sampled_bit_mean_obeys_law_of_large_numbers() {
        let n = 100_000;
        let r = sample_chain(0.0, n, 2024).unwrap();
        let mean = r.bits().iter().map(|&b| f64::from(b)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn sampled_lag_one_covariance_matches_memory() {
        // (x_j - ½)(x_{j+1} - ½) is +¼ when the chain repeats and -¼ when it
        // switches; repeats are i.i.d. with probability (1 + a)/2, so the
        // products have mean a/4 and variance (1 - a²)/16.
        let a = 0.8;
        let n = 100_000;
        let r = sample_chain(a, n, 77).unwrap();
        let cov = r
            .bits()
            .windows(2)
            .map(|w| (f64::from(w[0]) - 0.5) * (f64::from(w[1]) - 0.5))
            .sum::<f64>()
            / (n - 1) as f64;
        let se = ((1.0 - a * a) / 16.0 / (n - 1) as f64).sqrt();
        assert!((cov - a / 4.0).abs() < 3.0 * se, "cov = {cov}, se = {se}");
    }

    #[test]
    fn second_moment_matches_enumeration() {
        let process = MarkovKickProcess::new(0.5).unwrap();
        let from_enum: f64 = process
            .realizations(3)
            .unwrap()
            .iter()
            .map(|r| f64::from(r.bits()[0] * r.bits()[2]) * r.probability())
            .sum();
        assert_abs_diff_eq!(from_enum, 0.3125, epsilon = 1e-15);
        assert_abs_diff_eq!(process.second_moment(1, 3), 0.3125, epsilon = 1e-15);
        assert_abs_diff_eq!(process.second_moment(3, 1), 0.3125, epsilon = 1e-15);
        assert_eq!(process.second_moment(4, 4), 0.5);
        assert_eq!(MarkovKickProcess::bernoulli().second_moment(2, 5), 0.25);
    }

    #[test]
    fn characteristic_fn_examples() {
        let process = MarkovKickProcess::new(0.4).unwrap();
        let z = process.characteristic_fn(&PhaseVector::zeros(7)).unwrap();
        assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);

        let (u1, u2) = (0.7, -1.9);
        let full = MarkovKickProcess::new(1.0).unwrap();
        let got = full.characteristic_fn(&vec![u1, u2].into()).unwrap();
        let want = (Complex64::new(1.0, 0.0) + Complex64::cis(-(u1 + u2))) / 2.0;
        assert_abs_diff_eq!((got - want).norm(), 0.0, epsilon = 1e-15);

        let pi = std::f64::consts::PI;
        let got = MarkovKickProcess::bernoulli()
            .characteristic_fn(&vec![pi, pi, pi].into())
            .unwrap();
        assert!(got.norm() < 1e-15);

        // N = 1: (1 + e^{-iu})/2 regardless of memory
        let got = process.characteristic_fn(&vec![1.3].into()).unwrap();
        let want = (Complex64::new(1.0, 0.0) + Complex64::cis(-1.3)) / 2.0;
        assert_abs_diff_eq!((got - want).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_or_oversized_phase_vectors_are_rejected() {
        let p = MarkovKickProcess::new(0.2).unwrap();
        assert!(p.characteristic_fn(&PhaseVector::zeros(0)).is_err());
        assert!(p.characteristic_fn_enumerated(&PhaseVector::zeros(0)).is_err());
        assert!(matches!(
            p.characteristic_fn_enumerated(&PhaseVector::zeros(21)),
            Err(Error::HorizonTooLarge { .. })
        ));
    }

    #[test]
    fn realization_text_form() {
        let p = MarkovKickProcess::bernoulli();
        let r = Realization::new(vec![0, 1, 1, 0, 1], &p).unwrap();
        assert_eq!(r.to_string(), "01101 p=0.03125");
        assert_eq!("01101 p=0.03125".parse::<Realization>().unwrap(), r);
        assert!("0121 p=0.5".parse::<Realization>().is_err());
        assert!("0101".parse::<Realization>().is_err());
        assert!(Realization::new(vec![2], &p).is_err());
    }
}
