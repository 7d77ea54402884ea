//! Cross-checks between independent evaluation routes.
//!
//! Each check pairs a production path with an oracle and records the
//! largest discrepancy seen. A nonzero `perturbation` is added to the
//! production side only, as a negative control.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::{default_n_max, hs_norm_trace, DensityMatrix, MarkovKickMap};
use crate::kicks::{MarkovKickProcess, PhaseVector};
use crate::params::{RotorParams, Tau};
use crate::variance::{variance_markov_exact, variance_realization};
use crate::witness::{delta_from_kernel, delta_probe, hs_squared_quadrature, DEFAULT_EPS_SING};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    fn new(name: &str, tolerance: f64, errors: impl IntoIterator<Item = f64>) -> Self {
        let mut cases = 0;
        let mut max_error: f64 = 0.0;
        let mut finite = true;
        for e in errors {
            cases += 1;
            finite &= e.is_finite();
            max_error = max_error.max(e);
        }
        Self {
            name: name.into(),
            cases,
            max_error,
            tolerance,
            passed: finite && max_error <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// Largest horizon used by the enumeration oracles.
    pub max_n: usize,
    pub seed: u64,
    pub perturbation: f64,
    pub params: RotorParams,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            max_n: 12,
            seed: 0,
            perturbation: 0.0,
            params: RotorParams::new(3.0, Tau::sqrt2_default()).expect("finite"),
        }
    }
}

const CHAR_FN_CASES: usize = 100;
const CHAR_FN_TOL: f64 = 1e-12;
const VARIANCE_MEMORIES: [f64; 4] = [0.0, 0.3, 0.7, 1.0];
const VARIANCE_TOL: f64 = 1e-10;
const EVOLUTION_MAX_N: usize = 10;
const EVOLUTION_TOL: f64 = 1e-10;
const HS_MEMORIES: [f64; 3] = [0.0, 0.5, 0.9];
const HS_MAX_N: usize = 8;
const HS_GRID: usize = 128;
const HS_TOL: f64 = 1e-5;
const DELTA_CASES: usize = 10_000;
const DELTA_TOL: f64 = 1e-10;

/// Transfer-matrix product against the `2^N` sum, random `a` and phases.
pub fn check_characteristic_fn(cfg: &VerifyConfig) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut errors = Vec::with_capacity(CHAR_FN_CASES);
    for _ in 0..CHAR_FN_CASES {
        let process = MarkovKickProcess::new(rng.random_range(0.0..=1.0))?;
        let n = rng.random_range(1..=cfg.max_n.max(1));
        let u = PhaseVector::new((0..n).map(|_| rng.random_range(-10.0..10.0)).collect());
        let fast = process.characteristic_fn(&u)? + cfg.perturbation;
        let slow = process.characteristic_fn_enumerated(&u)?;
        errors.push((fast - slow).norm());
    }
    Ok(OracleReport::new("characteristic function: transfer matrix vs enumeration", CHAR_FN_TOL, errors))
}

/// Correlation-sum variance against the probability-weighted average over
/// every noise history.
pub fn check_variance(cfg: &VerifyConfig) -> Result<OracleReport> {
    let mut errors = Vec::new();
    for a in VARIANCE_MEMORIES {
        let process = MarkovKickProcess::new(a)?;
        for n in 1..=cfg.max_n {
            let closed = variance_markov_exact(&cfg.params, &process, n) + cfg.perturbation;
            let enumerated: f64 = process
                .realizations(n)?
                .iter()
                .map(|x| x.probability() * variance_realization(&cfg.params, x))
                .sum();
            errors.push((closed - enumerated).abs());
        }
    }
    Ok(OracleReport::new("variance: closed form vs enumeration", VARIANCE_TOL, errors))
}

/// Conditional-state recursion against branch enumeration on a random state.
pub fn check_evolution(cfg: &VerifyConfig) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let n = cfg.max_n.clamp(1, EVOLUTION_MAX_N);
    let n_max = 20;
    let rho = DensityMatrix::random(n_max, 3, 2, &mut rng)?;
    let mut errors = Vec::new();
    for a in [0.0, 0.4, 0.95] {
        let map = MarkovKickMap::new(&cfg.params, MarkovKickProcess::new(a)?, n_max)?;
        let fast = map.recursive_trajectory(rho.entries(), n)?;
        let slow = map.enumerated_trajectory(rho.entries(), n)?;
        for (f, s) in fast.iter().zip(&slow) {
            let worst = f
                .iter()
                .zip(s)
                .map(|(x, y)| (x + cfg.perturbation - y).norm())
                .fold(0.0, f64::max);
            errors.push(worst);
        }
    }
    Ok(OracleReport::new("evolution: recursion vs enumeration", EVOLUTION_TOL, errors))
}

/// Angle-space quadrature of the purity against `Tr ρ_N²` from evolving `|0⟩⟨0|`.
pub fn check_hs_quadrature(cfg: &VerifyConfig) -> Result<OracleReport> {
    let n = cfg.max_n.clamp(1, HS_MAX_N);
    let n_max = default_n_max(&cfg.params, n, 0);
    let rho = DensityMatrix::momentum_eigenstate(n_max, 0)?;
    let mut errors = Vec::new();
    for a in HS_MEMORIES {
        let process = MarkovKickProcess::new(a)?;
        let map = MarkovKickMap::new(&cfg.params, process, n_max)?;
        let states = map.recursive_trajectory(rho.entries(), n)?;
        for (i, state) in states.into_iter().enumerate() {
            let purity = hs_norm_trace(&DensityMatrix::from_entries(n_max, state)?).powi(2);
            let quad = hs_squared_quadrature(&cfg.params, &process, i + 1, HS_GRID)?.value + cfg.perturbation;
            errors.push((quad - purity).abs());
        }
    }
    Ok(OracleReport::new("purity: quadrature vs trace", HS_TOL, errors))
}

/// Closed-form `Δ` against the kernel built from characteristic functions,
/// at random points away from the singular set. Errors are relative to
/// `max(1, |Δ|)`.
pub fn check_delta(cfg: &VerifyConfig) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xde17a);
    let tau = std::f64::consts::TAU;
    let mut errors = Vec::with_capacity(DELTA_CASES);
    while errors.len() < DELTA_CASES {
        let process = MarkovKickProcess::new(rng.random_range(0.0..=1.0))?;
        let (t1, t2) = (rng.random_range(0.0..tau), rng.random_range(0.0..tau));
        let Ok(closed) = delta_probe(&cfg.params, &process, t1, t2, DEFAULT_EPS_SING) else {
            continue;
        };
        let kernel: Complex64 = delta_from_kernel(&cfg.params, &process, t1, t2, DEFAULT_EPS_SING)?;
        let err = (Complex64::new(closed + cfg.perturbation, 0.0) - kernel).norm();
        errors.push(err / closed.abs().max(1.0));
    }
    Ok(OracleReport::new("probe: closed form vs kernel", DELTA_TOL, errors))
}

/// Every check, in a fixed order.
pub fn run_all(cfg: &VerifyConfig) -> Result<Vec<OracleReport>> {
    Ok(vec![
        check_characteristic_fn(cfg)?,
        check_variance(cfg)?,
        check_evolution(cfg)?,
        check_hs_quadrature(cfg)?,
        check_delta(cfg)?,
    ])
}
