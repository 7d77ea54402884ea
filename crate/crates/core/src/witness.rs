//! Non-Markovianity diagnostics.
//!
//! * The purity `‖Φ_N[|0⟩⟨0|]‖²_HS` as a function of `N`, evaluated in the
//!   angle representation as `(1/2π)² ∬ |Λ_N(ν̄_N(θ₁) - ν̄_N(θ₂))|² dθ₁dθ₂`.
//!   Unital trace-preserving CP maps cannot increase it, so any increase
//!   from `N - 1` to `N` rules out a CP intertwiner between the two times.
//! * The positivity probe `Δ(θ̄₁, θ̄₂) = 2 - (G(θ̄₁,θ̄₂) + G(θ̄₂,θ̄₁))` of the
//!   intertwiner `Φ₂∘Φ₁⁻¹`; a negative value shows it is not even positive.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kicks::{MarkovKickProcess, PhaseVector};
use crate::par;
use crate::params::RotorParams;

/// Minimum increase counted as a monotonicity violation.
pub const TOL_MONO: f64 = 1e-8;

/// Largest accepted `|hs(G) - hs(2G)|`.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Default threshold on `|cos(A/2)| = |Λ₁(A)|` below which a point is masked.
pub const DEFAULT_EPS_SING: f64 = 1e-6;

pub const MIN_HS_GRID: usize = 64;
pub const MIN_SCAN_GRID: usize = 128;

/// Gauss–Legendre nodes per axis for the smeared probe.
pub const SMEARING_NODES: usize = 32;

fn check_grid(grid: usize, min: usize) -> Result<()> {
    if grid < min || !grid.is_power_of_two() {
        return Err(invalid("grid", format!("need a power of two >= {min}, got {grid}")));
    }
    Ok(())
}

fn angles(grid: usize) -> Vec<f64> {
    (0..grid)
        .map(|i| std::f64::consts::TAU * i as f64 / grid as f64)
        .collect()
}

/// Rectangle-rule purities `‖Φ_N[|0⟩⟨0|]‖²_HS` for `N = 1..=n_max` on a
/// `grid × grid` mesh.
///
/// The phases `u_j` do not depend on `N`, so a single pass of the streaming
/// characteristic function per mesh point yields every horizon at once.
pub fn hs_squared_rule(
    params: &RotorParams,
    process: &MarkovKickProcess,
    n_max: usize,
    grid: usize,
) -> Result<Vec<f64>> {
    check_grid(grid, MIN_HS_GRID)?;
    if n_max == 0 {
        return Err(invalid("N", "horizon must be at least 1"));
    }
    let k = params.kick_strength();
    let tau = params.tau_value();
    let theta = angles(grid);
    // kick_phase[j][i] = e^{-iK cos(θ_i + (j+1)τ)}
    let kick_phase: Vec<Vec<Complex64>> = (1..=n_max)
        .map(|j| {
            theta
                .iter()
                .map(|t| Complex64::cis(-k * (t + j as f64 * tau).cos()))
                .collect()
        })
        .collect();
    let rows = par::map_indexed(grid, |i1| {
        let mut sums = vec![0.0; n_max];
        for i2 in 0..grid {
            let mut acc = process.char_fn_accumulator();
            for (s, phases) in sums.iter_mut().zip(&kick_phase) {
                *s += acc.push(phases[i1] * phases[i2].conj()).norm_sqr();
            }
        }
        sums
    });
    let norm = (grid * grid) as f64;
    Ok((0..n_max)
        .map(|j| {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            par::pairwise_sum(&column) / norm
        })
        .collect())
}

/// Purity at one horizon with its grid-refinement discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsEstimate {
    /// Value on the refined `2G` grid.
    pub value: f64,
    /// `|hs(G) - hs(2G)|`.
    pub refinement_error: f64,
    pub grid: usize,
}

/// `‖Φ_N[|0⟩⟨0|]‖²_HS`, gated on agreement between grids `G` and `2G`.
pub fn hs_squared_quadrature(
    params: &RotorParams,
    process: &MarkovKickProcess,
    n: usize,
    grid: usize,
) -> Result<HsEstimate> {
    let coarse = hs_squared_rule(params, process, n, grid)?;
    let fine = hs_squared_rule(params, process, n, 2 * grid)?;
    let estimate = HsEstimate {
        value: fine[n - 1],
        refinement_error: (coarse[n - 1] - fine[n - 1]).abs(),
        grid,
    };
    if estimate.refinement_error.is_nan() || estimate.refinement_error > CONVERGENCE_TOL {
        return Err(Error::NotConverged {
            step: n,
            grid,
            discrepancy: estimate.refinement_error,
        });
    }
    Ok(estimate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessPoint {
    pub n: usize,
    pub hs_squared: f64,
    pub refinement_error: f64,
    pub violation: bool,
}

/// Purity against time, with the steps at which it increased.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCurve {
    pub points: Vec<WitnessPoint>,
    /// Horizons `N` where `hs(N) > hs(N - 1) + tol_mono + refinement errors`.
    pub violations: Vec<usize>,
    pub tol_mono: f64,
}

impl WitnessCurve {
    /// Largest step-to-step increase (negative if the curve is strictly decreasing).
    pub fn max_increase(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1].hs_squared - w[0].hs_squared)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Flags every `N ≥ 2` whose increase exceeds `tol_mono` plus both
    /// points' refinement errors.
    pub fn from_values(values: &[f64], refinement: &[f64], tol_mono: f64) -> Self {
        let mut points: Vec<WitnessPoint> = values
            .iter()
            .zip(refinement)
            .enumerate()
            .map(|(i, (&hs_squared, &refinement_error))| WitnessPoint {
                n: i + 1,
                hs_squared,
                refinement_error,
                violation: false,
            })
            .collect();
        let mut violations = Vec::new();
        for i in 1..points.len() {
            let (prev, cur) = (points[i - 1], points[i]);
            let slack = tol_mono + prev.refinement_error.max(cur.refinement_error);
            if cur.hs_squared > prev.hs_squared + slack {
                points[i].violation = true;
                violations.push(cur.n);
            }
        }
        Self {
            points,
            violations,
            tol_mono,
        }
    }
}

/// Purity curve for `N = 1..=n_max` with monotonicity violations.
pub fn witness_curve(
    params: &RotorParams,
    process: &MarkovKickProcess,
    n_max: usize,
    grid: usize,
) -> Result<WitnessCurve> {
    if n_max < 2 {
        return Err(invalid("N_max", "need at least two points"));
    }
    let coarse = hs_squared_rule(params, process, n_max, grid)?;
    let fine = hs_squared_rule(params, process, n_max, 2 * grid)?;
    let refinement: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| (c - f).abs()).collect();
    if let Some((i, &d)) = refinement
        .iter()
        .enumerate()
        .find(|(_, &d)| d.is_nan() || d > CONVERGENCE_TOL)
    {
        return Err(Error::NotConverged {
            step: i + 1,
            grid,
            discrepancy: d,
        });
    }
    Ok(WitnessCurve::from_values(&fine, &refinement, TOL_MONO))
}

/// The phase pair `(A, B)` with `A = K(cos(θ₂-τ) - cos(θ₁-τ))` and
/// `B = K(cos θ₂ - cos θ₁)`.
fn probe_phases(params: &RotorParams, theta1: f64, theta2: f64) -> (f64, f64) {
    let k = params.kick_strength();
    let tau = params.tau_value();
    (
        k * ((theta2 - tau).cos() - (theta1 - tau).cos()),
        k * (theta2.cos() - theta1.cos()),
    )
}

/// Closed-form probe `Δ = 2 - δ` with
/// `δ = 2 cos(B/2) (cos(A/2) cos(B/2) - a sin(A/2) sin(B/2)) / cos(A/2)`.
///
/// Points with `|cos(A/2)| ≤ eps_sing` are reported as [`Error::Singular`].
pub fn delta_probe(
    params: &RotorParams,
    process: &MarkovKickProcess,
    theta1: f64,
    theta2: f64,
    eps_sing: f64,
) -> Result<f64> {
    let (a_phase, b_phase) = probe_phases(params, theta1, theta2);
    let (half_a, half_b) = (a_phase / 2.0, b_phase / 2.0);
    let cos_a = half_a.cos();
    if cos_a.is_nan() || cos_a.abs() <= eps_sing {
        return Err(Error::Singular {
            theta1,
            theta2,
            magnitude: cos_a.abs(),
        });
    }
    let cos_b = half_b.cos();
    // swapping θ₁ and θ₂ flips both signs; evaluate on magnitudes so the
    // probe is exactly symmetric
    let sin_sin = half_a.abs().sin() * half_b.abs().sin() * (half_a.signum() * half_b.signum());
    let delta = 2.0 * cos_b * (cos_a * cos_b - process.memory() * sin_sin) / cos_a;
    Ok(2.0 - delta)
}

/// `G(θ₁, θ₂) = Λ₂(A, B) / Λ₁(A)`, both from the transfer-matrix product.
pub fn gamma_kernel(
    params: &RotorParams,
    process: &MarkovKickProcess,
    theta1: f64,
    theta2: f64,
    eps_sing: f64,
) -> Result<Complex64> {
    let (a_phase, b_phase) = probe_phases(params, theta1, theta2);
    let lambda1 = process.characteristic_fn(&PhaseVector::new(vec![a_phase]))?;
    if lambda1.is_nan() || lambda1.norm() <= eps_sing {
        return Err(Error::Singular {
            theta1,
            theta2,
            magnitude: lambda1.norm(),
        });
    }
    let lambda2 = process.characteristic_fn(&PhaseVector::new(vec![a_phase, b_phase]))?;
    Ok(lambda2 / lambda1)
}

/// `2 - (G(θ₁,θ₂) + G(θ₂,θ₁))` from the kernel; its real part is `Δ`.
pub fn delta_from_kernel(
    params: &RotorParams,
    process: &MarkovKickProcess,
    theta1: f64,
    theta2: f64,
    eps_sing: f64,
) -> Result<Complex64> {
    let g12 = gamma_kernel(params, process, theta1, theta2, eps_sing)?;
    let g21 = gamma_kernel(params, process, theta2, theta1, eps_sing)?;
    Ok(Complex64::new(2.0, 0.0) - (g12 + g21))
}

/// `Δ` on the uniform `grid × grid` mesh over `[0, 2π)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaScan {
    pub grid: usize,
    pub memory: f64,
    pub eps_sing: f64,
    /// Row-major; row `i` is `θ₁ = 2πi/grid`. Masked entries hold NaN.
    pub values: Vec<f64>,
    /// `true` where the denominator is near-singular.
    pub mask: Vec<bool>,
    pub min_value: f64,
    pub argmin: (usize, usize),
}

impl DeltaScan {
    pub fn theta(&self, i: usize) -> f64 {
        std::f64::consts::TAU * i as f64 / self.grid as f64
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let idx = i * self.grid + j;
        (!self.mask[idx]).then(|| self.values[idx])
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Minimum over unmasked points satisfying `keep`, ties going to the
    /// smallest row and then column.
    pub fn argmin_where(&self, keep: impl Fn(usize, usize) -> bool) -> Option<((usize, usize), f64)> {
        let mut best: Option<((usize, usize), f64)> = None;
        for i in 0..self.grid {
            for j in 0..self.grid {
                if let Some(v) = self.value(i, j) {
                    if keep(i, j) && best.is_none_or(|(_, b)| v < b) {
                        best = Some(((i, j), v));
                    }
                }
            }
        }
        best
    }

    /// Minimum over points whose smearing boxes of width `eps` stay clear of
    /// denominator zeros (`|cos(A/2)| > K·eps/2`, since `A` moves by at most
    /// `K·eps` across the box).
    pub fn smearing_argmin(&self, params: &RotorParams, eps: f64) -> Option<((usize, usize), f64)> {
        let margin = smearing_margin(params, eps).max(self.eps_sing);
        self.argmin_where(|i, j| {
            let (a_phase, _) = probe_phases(params, self.theta(i), self.theta(j));
            (a_phase / 2.0).cos().abs() > margin
        })
    }
}

fn smearing_margin(params: &RotorParams, eps: f64) -> f64 {
    params.kick_strength().abs() * eps / 2.0
}

/// Evaluates [`delta_probe`] over the mesh, masking near-singular points.
pub fn delta_scan(params: &RotorParams, process: &MarkovKickProcess, grid: usize, eps_sing: f64) -> Result<DeltaScan> {
    if grid < MIN_SCAN_GRID {
        return Err(invalid("grid", format!("need at least {MIN_SCAN_GRID} points per axis, got {grid}")));
    }
    let theta = angles(grid);
    let rows = par::map_indexed(grid, |i| {
        theta
            .iter()
            .map(|&t2| delta_probe(params, process, theta[i], t2, eps_sing).ok())
            .collect::<Vec<_>>()
    });
    let mut values = Vec::with_capacity(grid * grid);
    let mut mask = Vec::with_capacity(grid * grid);
    for v in rows.into_iter().flatten() {
        mask.push(v.is_none());
        values.push(v.unwrap_or(f64::NAN));
    }
    let mut scan = DeltaScan {
        grid,
        memory: process.memory(),
        eps_sing,
        values,
        mask,
        min_value: f64::NAN,
        argmin: (0, 0),
    };
    if let Some((argmin, min_value)) = scan.argmin_where(|_, _| true) {
        scan.argmin = argmin;
        scan.min_value = min_value;
    }
    Ok(scan)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (pn, pn1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let step = pn / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `Δ(ε) = I₁ + I₂ - I₁₂ - I₂₁`, the probe against indicator functions of
/// width `eps` around `θ̄₁, θ̄₂`, each box average by a
/// [`SMEARING_NODES`]-point Gauss–Legendre rule per axis.
///
/// Fails if a box could contain a zero of the denominator.
pub fn delta_smeared(
    params: &RotorParams,
    process: &MarkovKickProcess,
    theta1: f64,
    theta2: f64,
    eps: f64,
) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid("eps", "smearing width must be positive"));
    }
    let (a_phase, _) = probe_phases(params, theta1, theta2);
    let margin = smearing_margin(params, eps);
    if a_phase.is_nan() || (a_phase / 2.0).cos().abs() <= margin {
        return Err(Error::Singular {
            theta1,
            theta2,
            magnitude: (a_phase / 2.0).cos().abs(),
        });
    }
    let (nodes, weights) = gauss_legendre(SMEARING_NODES);
    let box_average = |c1: f64, c2: f64| -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for (x, wx) in nodes.iter().zip(&weights) {
            for (y, wy) in nodes.iter().zip(&weights) {
                let g = gamma_kernel(params, process, c1 + eps * x / 2.0, c2 + eps * y / 2.0, 0.0)?;
                total += g * (wx * wy / 4.0);
            }
        }
        Ok(total)
    };
    let delta = box_average(theta1, theta1)? + box_average(theta2, theta2)?
        - box_average(theta1, theta2)?
        - box_average(theta2, theta1)?;
    Ok(delta.re)
}
