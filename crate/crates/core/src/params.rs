//! Rotor parameters: kick strength `K` and kick period `τ = 2π·m`.

use std::f64::consts::TAU as TWO_PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Whether the multiplier `m` in `τ = 2π·m` is meant to be rational.
///
/// Floating point cannot tell the two apart; the flag only records intent
/// (resonant versus localizing dynamics) so outputs can be labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauKind {
    Rational,
    Irrational,
}

/// Kick period stored as a multiple of 2π.
///
/// Parses and prints the symbolic forms `2pi`, `2pi*sqrt<k>` and
/// `2pi*<decimal>`, so the label survives into output provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tau {
    multiplier: f64,
    kind: TauKind,
    label: String,
}

impl Tau {
    /// `τ = 2π`, the quantum resonance.
    pub fn resonant() -> Self {
        Self {
            multiplier: 1.0,
            kind: TauKind::Rational,
            label: "2pi".into(),
        }
    }

    /// `τ = 2π·√k`. Perfect squares are flagged rational.
    pub fn two_pi_sqrt(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(invalid("tau", "sqrt argument must be positive"));
        }
        let root = f64::from(k).sqrt();
        let kind = if root.fract() == 0.0 {
            TauKind::Rational
        } else {
            TauKind::Irrational
        };
        Ok(Self {
            multiplier: root,
            kind,
            label: format!("2pi*sqrt{k}"),
        })
    }

    /// `τ = 2π·m` for an explicit multiplier.
    pub fn two_pi_times(multiplier: f64, kind: TauKind) -> Result<Self> {
        if !(multiplier.is_finite() && multiplier > 0.0) {
            return Err(invalid("tau", format!("multiplier must be positive, got {multiplier}")));
        }
        Ok(Self {
            multiplier,
            kind,
            label: format!("2pi*{multiplier}"),
        })
    }

    /// The canonical localizing choice `τ = 2π√2`.
    pub fn sqrt2_default() -> Self {
        Self::two_pi_sqrt(2).expect("2 is positive")
    }

    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }

    pub fn kind(&self) -> TauKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self) -> f64 {
        TWO_PI * self.multiplier
    }
}

impl fmt::Display for Tau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl FromStr for Tau {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace(' ', "");
        let rest = s
            .strip_prefix("2pi")
            .ok_or_else(|| invalid("tau", format!("expected `2pi`, `2pi*sqrt<k>` or `2pi*<decimal>`, got {s:?}")))?;
        if rest.is_empty() {
            return Ok(Self::resonant());
        }
        let rest = rest
            .strip_prefix('*')
            .ok_or_else(|| invalid("tau", format!("expected `*` after `2pi` in {s:?}")))?;
        if let Some(k) = rest.strip_prefix("sqrt") {
            let k: u32 = k
                .trim_matches(|c| c == '(' || c == ')')
                .parse()
                .map_err(|_| invalid("tau", format!("bad sqrt argument in {s:?}")))?;
            return Self::two_pi_sqrt(k);
        }
        let m: f64 = rest
            .parse()
            .map_err(|_| invalid("tau", format!("bad multiplier in {s:?}")))?;
        let mut tau = Self::two_pi_times(m, TauKind::Rational)?;
        tau.label = format!("2pi*{rest}");
        Ok(tau)
    }
}

/// Kick strength and period of the rotor (ħ = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorParams {
    kick_strength: f64,
    tau: Tau,
}

impl RotorParams {
    pub fn new(kick_strength: f64, tau: Tau) -> Result<Self> {
        if !kick_strength.is_finite() {
            return Err(invalid("K", format!("kick strength must be finite, got {kick_strength}")));
        }
        Ok(Self { kick_strength, tau })
    }

    pub fn kick_strength(&self) -> f64 {
        self.kick_strength
    }

    pub fn tau(&self) -> &Tau {
        &self.tau
    }

    /// Free rotation angle per period.
    pub fn tau_value(&self) -> f64 {
        self.tau.value()
    }

    /// `(cos jτ, sin jτ)` for `j = 1..=n`, each evaluated directly (no recurrence drift).
    pub fn kick_phasors(&self, n: usize) -> Vec<(f64, f64)> {
        let tau = self.tau_value();
        (1..=n)
            .map(|j| {
                let (s, c) = (j as f64 * tau).sin_cos();
                (c, s)
            })
            .collect()
    }
}
