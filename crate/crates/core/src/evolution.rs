//! Density-matrix evolution under the noise-averaged maps `Φ_N`.
//!
//! States live on the truncated momentum basis `|m⟩, m ∈ [-n_max, n_max]`
//! (row/column index `m + n_max`). One period applies the free rotation
//! `e^{-ip̂τ}` followed by the kick `e^{-iz cos θ̂}` with `z = K(1 - x)`.
//!
//! Two routes compute `Φ_N[ρ]`:
//! * [`MarkovKickMap::apply_enumerated`] sums all `2^N` unitary branches;
//! * [`MarkovKickMap::apply_recursive`] carries one conditional state per
//!   last symbol and costs `O(N)` matrix products.
//!
//! The first is kept as an oracle for the second.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{linalg::general_mat_mul, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::kicks::MarkovKickProcess;
use crate::par;
use crate::params::RotorParams;

pub type C64 = Complex64;

/// A (not necessarily positive) operator on the truncated momentum basis.
pub type Operator = Array2<C64>;

/// Largest horizon for [`MarkovKickMap::apply_enumerated`].
pub const MAX_ENUMERATED_STEPS: usize = 14;

/// Depth down to which the branch enumeration forks work items.
const PAR_DEPTH: usize = 6;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Density matrix on the truncated momentum basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_max: usize,
    entries: Operator,
}

impl DensityMatrix {
    /// Wraps a square matrix of side `2 n_max + 1` without checking positivity.
    pub fn from_entries(n_max: usize, entries: Operator) -> Result<Self> {
        let d = 2 * n_max + 1;
        if entries.dim() != (d, d) {
            return Err(invalid(
                "entries",
                format!("expected a {d}x{d} matrix, got {:?}", entries.dim()),
            ));
        }
        Ok(Self { n_max, entries })
    }

    /// `|m⟩⟨m|`.
    pub fn momentum_eigenstate(n_max: usize, m: i64) -> Result<Self> {
        let idx = index_of(n_max, m)?;
        let d = 2 * n_max + 1;
        let mut entries = Array2::zeros((d, d));
        entries[[idx, idx]] = ONE;
        Ok(Self { n_max, entries })
    }

    pub fn maximally_mixed(n_max: usize) -> Self {
        let d = 2 * n_max + 1;
        Self {
            n_max,
            entries: Array2::eye(d) * C64::new(1.0 / d as f64, 0.0),
        }
    }

    /// Normalized projector onto `Σ_m ψ_m |m⟩`, amplitudes listed from `m = -n_max`.
    pub fn pure(n_max: usize, amplitudes: &[C64]) -> Result<Self> {
        let d = 2 * n_max + 1;
        if amplitudes.len() != d {
            return Err(invalid("amplitudes", format!("expected {d} amplitudes")));
        }
        let norm2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Err(invalid("amplitudes", "zero vector"));
        }
        let entries = Array2::from_shape_fn((d, d), |(i, j)| amplitudes[i] * amplitudes[j].conj() / norm2);
        Ok(Self { n_max, entries })
    }

    /// Random mixed state of the given rank supported on `|m| ≤ support`.
    pub fn random<R: Rng + ?Sized>(n_max: usize, support: usize, rank: usize, rng: &mut R) -> Result<Self> {
        if support > n_max || rank == 0 {
            return Err(invalid("support", "need support <= n_max and rank >= 1"));
        }
        let d = 2 * n_max + 1;
        let lo = n_max - support;
        let width = 2 * support + 1;
        let factor = Array2::from_shape_fn((width, rank), |_| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let block = factor.dot(&factor.t().mapv(|z| z.conj()));
        let trace: f64 = block.diag().iter().map(|z| z.re).sum();
        let mut entries = Array2::zeros((d, d));
        entries
            .slice_mut(ndarray::s![lo..lo + width, lo..lo + width])
            .assign(&(block / C64::new(trace, 0.0)));
        Ok(Self { n_max, entries })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn entries(&self) -> &Operator {
        &self.entries
    }

    pub fn into_entries(self) -> Operator {
        self.entries
    }

    /// `⟨m|ρ|n⟩`.
    pub fn entry(&self, m: i64, n: i64) -> Result<C64> {
        Ok(self.entries[[index_of(self.n_max, m)?, index_of(self.n_max, n)?]])
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    /// `max |ρ - ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.entries)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let e = &self.entries;
        let herm = DMatrix::from_fn(d, d, |i, j| (e[[i, j]] + e[[j, i]].conj()) * 0.5);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    /// Copies the state into a larger truncation, zero-padded.
    pub fn embed(&self, n_max: usize) -> Result<Self> {
        if n_max < self.n_max {
            return Err(invalid("n_max", "cannot embed into a smaller basis"));
        }
        let off = n_max - self.n_max;
        let d = 2 * n_max + 1;
        let mut entries = Array2::zeros((d, d));
        entries
            .slice_mut(ndarray::s![off..off + self.dim(), off..off + self.dim()])
            .assign(&self.entries);
        Ok(Self { n_max, entries })
    }
}

fn index_of(n_max: usize, m: i64) -> Result<usize> {
    let n = n_max as i64;
    if m.abs() > n {
        return Err(invalid("m", format!("momentum {m} outside [-{n}, {n}]")));
    }
    Ok((m + n) as usize)
}

pub fn hermiticity_error(op: &Operator) -> f64 {
    let d = op.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((op[[i, j]] - op[[j, i]].conj()).norm());
        }
    }
    worst
}

/// `‖ρ‖_HS = √Tr(ρ†ρ)`.
pub fn hs_norm_trace(rho: &DensityMatrix) -> f64 {
    operator_hs_norm(rho.entries())
}

pub fn operator_hs_norm(op: &Operator) -> f64 {
    // Tr(X†X) = Σ_{ij} conj(X_ij) X_ij
    op.iter().map(|z| (z.conj() * z).re).sum::<f64>().sqrt()
}

/// `⟨m|e^{-iz cos θ̂}|n⟩` on the truncated basis.
#[derive(Debug, Clone)]
pub struct KickUnitary {
    strength: f64,
    n_max: usize,
    entries: Operator,
}

impl KickUnitary {
    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn entries(&self) -> &Operator {
        &self.entries
    }

    /// `⟨m|V|n⟩`.
    pub fn entry(&self, m: i64, n: i64) -> Result<C64> {
        Ok(self.entries[[index_of(self.n_max, m)?, index_of(self.n_max, n)?]])
    }
}

/// Smallest admissible quadrature size for a basis of radius `n_max`.
pub fn default_quad_points(n_max: usize) -> usize {
    (4 * n_max).max(4).next_power_of_two()
}

/// Builds the kick matrix by the `Q`-point rectangle rule for
/// `(1/2π) ∫ e^{-iz cos θ} e^{i(n-m)θ} dθ`.
///
/// The integrand is a trigonometric series whose coefficients are Bessel
/// values `(-i)^k J_k(z)`, so the rule is exact up to aliasing from orders
/// `≥ Q - 2 n_max`, which requiring `Q ≥ 4 n_max` pushes far into the
/// super-exponentially small Bessel tail.
pub fn kick_unitary(z: f64, n_max: usize, quad_points: usize) -> Result<KickUnitary> {
    let required = (4 * n_max).max(4);
    if !quad_points.is_power_of_two() || quad_points < required {
        return Err(Error::QuadratureResolution {
            quad_points,
            n_max,
            required,
        });
    }
    if !z.is_finite() {
        return Err(invalid("z", "kick strength must be finite"));
    }
    let q = quad_points;
    let roots: Vec<C64> = (0..q)
        .map(|r| C64::cis(std::f64::consts::TAU * r as f64 / q as f64))
        .collect();
    let samples: Vec<C64> = roots.iter().map(|w| C64::cis(-z * w.re)).collect();
    let span = 2 * n_max as i64;
    // coeff[k + span] = (1/Q) Σ_q f(θ_q) e^{ikθ_q}, k = n - m
    let coeff: Vec<C64> = (-span..=span)
        .map(|k| {
            let sum: C64 = samples
                .iter()
                .enumerate()
                .map(|(idx, f)| f * roots[((k * idx as i64).rem_euclid(q as i64)) as usize])
                .sum();
            sum / q as f64
        })
        .collect();
    let d = 2 * n_max + 1;
    let entries = Array2::from_shape_fn((d, d), |(i, j)| coeff[(j as i64 - i as i64 + span) as usize]);
    Ok(KickUnitary {
        strength: z,
        n_max,
        entries,
    })
}

/// The diagonal unitary `e^{-ip̂τ}`.
#[derive(Debug, Clone)]
pub struct FreeRotation {
    phases: Vec<C64>,
}

impl FreeRotation {
    /// `e^{-inτ}` for `n = -n_max..=n_max`.
    pub fn phases(&self) -> &[C64] {
        &self.phases
    }

    /// `R X R†`.
    pub fn conjugate(&self, op: &Operator) -> Operator {
        let ph = &self.phases;
        Array2::from_shape_fn(op.dim(), |(i, j)| op[[i, j]] * ph[i] * ph[j].conj())
    }
}

pub fn free_rotation(tau: f64, n_max: usize) -> FreeRotation {
    let n = n_max as i64;
    FreeRotation {
        phases: (-n..=n).map(|m| C64::cis(-(m as f64) * tau)).collect(),
    }
}

/// Upper bound on the kick amplitude `|K Σ_{ℓ∈S} e^{iℓτ}|` reachable by any
/// subset `S ⊆ {1..steps}` of fired kicks, in units of `K`.
///
/// The best subset for a direction `φ` keeps the terms with positive
/// projection, so the bound is `max_φ Σ_ℓ max(0, cos(ℓτ - φ))`.
pub fn kick_reach(tau: f64, steps: usize) -> f64 {
    const DIRECTIONS: usize = 1024;
    let best = (0..DIRECTIONS)
        .map(|i| {
            let phi = std::f64::consts::TAU * i as f64 / DIRECTIONS as f64;
            (1..=steps)
                .map(|l| (l as f64 * tau - phi).cos().max(0.0))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    // a direction grid of spacing δ misses at most a factor cos(δ/2)
    best / (std::f64::consts::PI / DIRECTIONS as f64).cos()
}

/// Default truncation radius for `steps` periods acting on a state supported
/// on `|m| ≤ support`: `⌈K⌉ + 25` for one kick's Bessel band plus the extra
/// reach accumulated by later kicks.
pub fn default_n_max(params: &RotorParams, steps: usize, support: usize) -> usize {
    let k = params.kick_strength().abs();
    let extra = k * (kick_reach(params.tau_value(), steps.max(1)) - 1.0).max(0.0);
    k.ceil() as usize + 25 + extra.ceil() as usize + support
}

/// Unnormalized states conditioned on the most recent noise symbol.
#[derive(Debug, Clone)]
pub struct ConditionalStatePair {
    /// Branches whose last symbol was 0 (kick fired).
    pub kicked: Operator,
    /// Branches whose last symbol was 1 (no kick).
    pub free: Operator,
}

impl ConditionalStatePair {
    pub fn total(&self) -> Operator {
        &self.kicked + &self.free
    }

    pub fn traces(&self) -> (f64, f64) {
        (self.kicked.diag().sum().re, self.free.diag().sum().re)
    }
}

/// The family `Φ_N` for fixed rotor, noise and truncation.
#[derive(Debug, Clone)]
pub struct MarkovKickMap {
    process: MarkovKickProcess,
    n_max: usize,
    kick: KickUnitary,
    kick_adjoint: Operator,
    rotation: FreeRotation,
}

impl MarkovKickMap {
    pub fn new(params: &RotorParams, process: MarkovKickProcess, n_max: usize) -> Result<Self> {
        let kick = kick_unitary(params.kick_strength(), n_max, default_quad_points(n_max))?;
        let kick_adjoint = kick.entries.t().mapv(|z| z.conj());
        Ok(Self {
            process,
            n_max,
            kick,
            kick_adjoint,
            rotation: free_rotation(params.tau_value(), n_max),
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        2 * self.n_max + 1
    }

    pub fn process(&self) -> &MarkovKickProcess {
        &self.process
    }

    pub fn kick(&self) -> &KickUnitary {
        &self.kick
    }

    fn check_op(&self, op: &Operator) -> Result<()> {
        let d = self.dim();
        if op.dim() != (d, d) {
            return Err(invalid("operator", format!("expected {d}x{d}, got {:?}", op.dim())));
        }
        Ok(())
    }

    /// `U_x X U_x†` with `U_x = e^{-iK(1-x) cos θ̂} e^{-ip̂τ}`.
    pub fn apply_step(&self, op: &Operator, x: u8) -> Operator {
        let rotated = self.rotation.conjugate(op);
        if x == 0 && self.kick.strength != 0.0 {
            self.kick_congruence(&rotated)
        } else {
            rotated
        }
    }

    fn kick_congruence(&self, op: &Operator) -> Operator {
        let d = self.dim();
        let mut tmp = Array2::zeros((d, d));
        general_mat_mul(ONE, &self.kick.entries, op, ZERO, &mut tmp);
        let mut out = Array2::zeros((d, d));
        general_mat_mul(ONE, &tmp, &self.kick_adjoint, ZERO, &mut out);
        out
    }

    /// One period of the memoryless map `X ↦ ½ Σ_x U_x X U_x†`.
    pub fn memoryless_step(&self, op: &Operator) -> Operator {
        let (kicked, free) = par::join(|| self.apply_step(op, 0), || self.apply_step(op, 1));
        (kicked + free) * C64::new(0.5, 0.0)
    }

    /// Conditional states after `n ≥ 1` periods.
    ///
    /// `ρ^{(y)}_{ℓ+1} = U_y (Σ_x T_{yx} ρ^{(x)}_ℓ) U_y†`, seeded with
    /// `ρ^{(x)}_1 = ½ U_x ρ U_x†`.
    pub fn conditional_states(&self, op: &Operator, n: usize) -> Result<ConditionalStatePair> {
        Ok(self.conditional_trajectory(op, n)?.pop().expect("n >= 1"))
    }

    fn conditional_trajectory(&self, op: &Operator, n: usize) -> Result<Vec<ConditionalStatePair>> {
        self.check_op(op)?;
        if n == 0 {
            return Err(invalid("N", "horizon must be at least 1"));
        }
        let half = C64::new(0.5, 0.0);
        let (kicked, free) = par::join(|| self.apply_step(op, 0) * half, || self.apply_step(op, 1) * half);
        let mut pair = ConditionalStatePair { kicked, free };
        let stay = C64::new(self.process.stay_probability(), 0.0);
        let switch = C64::new(self.process.switch_probability(), 0.0);
        let mut out = Vec::with_capacity(n);
        for _ in 1..n {
            let next = {
                let p = &pair;
                let (kicked, free) = par::join(
                    || self.apply_step(&(&p.kicked * stay + &p.free * switch), 0),
                    || self.apply_step(&(&p.kicked * switch + &p.free * stay), 1),
                );
                ConditionalStatePair { kicked, free }
            };
            out.push(std::mem::replace(&mut pair, next));
        }
        out.push(pair);
        Ok(out)
    }

    /// `Φ_n[X]` by the conditional-state recursion.
    pub fn apply_recursive(&self, op: &Operator, n: usize) -> Result<Operator> {
        Ok(self.conditional_states(op, n)?.total())
    }

    /// `Φ_1[X], …, Φ_n[X]` by the conditional-state recursion.
    pub fn recursive_trajectory(&self, op: &Operator, n: usize) -> Result<Vec<Operator>> {
        Ok(self
            .conditional_trajectory(op, n)?
            .iter()
            .map(ConditionalStatePair::total)
            .collect())
    }

    /// `Φ_n[X] = Σ_{x̄} p(x̄) U(x̄) X U(x̄)†` by explicit branch enumeration.
    pub fn apply_enumerated(&self, op: &Operator, n: usize) -> Result<Operator> {
        Ok(self.enumerated_trajectory(op, n)?.pop().expect("n >= 1"))
    }

    /// `Φ_1[X], …, Φ_n[X]` from one walk over the branch tree.
    ///
    /// A node at depth `ℓ` holds `U_ℓ(x_ℓ)⋯U_1(x_1) X (⋯)†` and contributes
    /// with weight `p(x_1 … x_ℓ)` to `Φ_ℓ`, since the continuations' weights
    /// sum to one.
    pub fn enumerated_trajectory(&self, op: &Operator, n: usize) -> Result<Vec<Operator>> {
        self.check_op(op)?;
        if n == 0 {
            return Err(invalid("N", "horizon must be at least 1"));
        }
        if n > MAX_ENUMERATED_STEPS {
            return Err(Error::HorizonTooLarge {
                requested: n,
                limit: MAX_ENUMERATED_STEPS,
            });
        }
        Ok(self.subtree(op, 1.0, None, 0, n))
    }

    fn subtree(&self, state: &Operator, prob: f64, last: Option<u8>, depth: usize, n: usize) -> Vec<Operator> {
        if depth == n {
            return Vec::new();
        }
        let t = self.process.transition();
        let child = |y: u8| -> Option<Vec<Operator>> {
            let p = prob
                * match last {
                    None => 0.5,
                    Some(x) => t[usize::from(y)][usize::from(x)],
                };
            if p == 0.0 {
                return None;
            }
            let next = self.apply_step(state, y);
            let mut sums = Vec::with_capacity(n - depth);
            sums.push(&next * C64::new(p, 0.0));
            sums.extend(self.subtree(&next, p, Some(y), depth + 1, n));
            Some(sums)
        };
        let (kicked, free) = if depth < PAR_DEPTH {
            par::join(|| child(0), || child(1))
        } else {
            (child(0), child(1))
        };
        match (kicked, free) {
            (Some(mut a), Some(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += &y;
                }
                a
            }
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => {
                let d = self.dim();
                vec![Array2::zeros((d, d)); n - depth]
            }
        }
    }
}

fn map_for(rho0: &DensityMatrix, params: &RotorParams, a: f64) -> Result<MarkovKickMap> {
    MarkovKickMap::new(params, MarkovKickProcess::new(a)?, rho0.n_max())
}

/// `Φ_N[ρ₀]` by enumerating all `2^N` noise histories (`N ≤ 14`).
pub fn evolve_enumerated(rho0: &DensityMatrix, params: &RotorParams, a: f64, n: usize) -> Result<DensityMatrix> {
    let map = map_for(rho0, params, a)?;
    DensityMatrix::from_entries(rho0.n_max(), map.apply_enumerated(rho0.entries(), n)?)
}

/// `Φ_N[ρ₀]` by the linear-cost conditional-state recursion.
pub fn evolve_recursive(rho0: &DensityMatrix, params: &RotorParams, a: f64, n: usize) -> Result<DensityMatrix> {
    let map = map_for(rho0, params, a)?;
    DensityMatrix::from_entries(rho0.n_max(), map.apply_recursive(rho0.entries(), n)?)
}
