//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::time::{Duration, Instant};

use maryland::evolution::{default_n_max, hs_norm_trace, DensityMatrix, MarkovKickMap, Operator};
use maryland::variance::{
    deterministic_variance_curve, variance_curve, variance_markov_exact, variance_markov_exact_curve,
    variance_markov_mc, variance_realization, CurveMode, KickNoise,
};
use maryland::verify::{check_delta, VerifyConfig};
use maryland::witness::{delta_scan, delta_smeared, hs_squared_quadrature, witness_curve, DEFAULT_EPS_SING};
use maryland::{MarkovKickProcess, PhaseVector, RotorParams, Tau};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn k3_sqrt2() -> RotorParams {
    RotorParams::new(3.0, Tau::sqrt2_default()).unwrap()
}

fn markov(a: f64) -> MarkovKickProcess {
    MarkovKickProcess::new(a).unwrap()
}

fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn char_fn_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = markov(rng.random_range(0.0..=1.0));
        let n = rng.random_range(1..=12);
        let u = PhaseVector::new((0..n).map(|_| rng.random_range(-10.0..10.0)).collect());
        let err = (p.characteristic_fn(&u).unwrap() - p.characteristic_fn_enumerated(&u).unwrap()).norm();
        worst = worst.max(err);
    }
    outcome(worst <= 1e-12, format!("max |Λ_transfer - Λ_enum| = {worst:.2e} (tol 1e-12, 100 cases)"))
}

fn variance_vs_enumeration() -> Outcome {
    let params = k3_sqrt2();
    let mut worst: f64 = 0.0;
    for a in [0.0, 0.3, 0.7, 1.0] {
        let p = markov(a);
        for n in 1..=12 {
            let avg: f64 = p
                .realizations(n)
                .unwrap()
                .iter()
                .map(|x| x.probability() * variance_realization(&params, x))
                .sum();
            worst = worst.max((avg - variance_markov_exact(&params, &p, n)).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max |closed - enumerated| = {worst:.2e} (tol 1e-10)"))
}

fn localization_vs_resonance() -> Outcome {
    let k = 3.0;
    let loc = k3_sqrt2();
    let bound = k * k / (2.0 * (loc.tau_value() / 2.0).sin().powi(2)) + 1e-6;
    let sup = deterministic_variance_curve(&loc, 500).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let res = RotorParams::new(k, Tau::resonant()).unwrap();
    let curve = deterministic_variance_curve(&res, 500);
    let exact = curve
        .iter()
        .enumerate()
        .all(|(i, &v)| v == k * k * ((i + 1) * (i + 1)) as f64 / 2.0);
    outcome(
        sup <= bound && exact,
        format!("sup = {sup:.6} <= {bound:.6}; resonant curve equals K²N²/2 exactly: {exact}"),
    )
}

fn full_memory_halving() -> Outcome {
    let params = k3_sqrt2();
    let full = variance_markov_exact_curve(&params, &markov(1.0), 500);
    let det = deterministic_variance_curve(&params, 500);
    let worst = full
        .iter()
        .zip(&det)
        .map(|(f, d)| (f - d / 2.0).abs())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-10, format!("max |V(a=1) - V_det/2| = {worst:.2e} (tol 1e-10, N <= 500)"))
}

fn diffusion_suppression() -> Outcome {
    let params = k3_sqrt2();
    let slope = |a: f64| {
        variance_curve(&params, KickNoise::Markov(markov(a)), 500, CurveMode::Exact)
            .unwrap()
            .slope(100, 500)
    };
    let (s0, s99) = (slope(0.0), slope(0.99));
    outcome(
        s0 > s99 && s99 >= 0.0,
        format!("slope(a=0) = {s0:.4}, slope(a=0.99) = {s99:.4}"),
    )
}

fn monte_carlo_consistency() -> Outcome {
    let params = k3_sqrt2();
    let mut parts = Vec::new();
    let mut ok = true;
    for a in [0.0, 0.5] {
        let p = markov(a);
        let mc = variance_markov_mc(&params, &p, 50, 100_000, 2024).unwrap();
        let exact = variance_markov_exact(&params, &p, 50);
        let z = (mc.mean - exact) / mc.stderr;
        ok &= z.abs() <= 3.0;
        parts.push(format!("a={a}: {:.4} vs {exact:.4} ({z:+.2} se)", mc.mean));
    }
    outcome(ok, parts.join("; "))
}

fn hs_oracle_agreement() -> Outcome {
    let params = k3_sqrt2();
    let n = 8;
    let n_max = default_n_max(&params, n, 0);
    let rho = DensityMatrix::momentum_eigenstate(n_max, 0).unwrap();
    let big = rho.embed(2 * n_max).unwrap();
    let mut worst: f64 = 0.0;
    let mut truncation: f64 = 0.0;
    for a in [0.0, 0.5, 0.9] {
        let p = markov(a);
        let states = MarkovKickMap::new(&params, p, n_max).unwrap().recursive_trajectory(rho.entries(), n).unwrap();
        let wide = MarkovKickMap::new(&params, p, 2 * n_max).unwrap().recursive_trajectory(big.entries(), n).unwrap();
        for (i, (s, w)) in states.into_iter().zip(wide).enumerate() {
            let purity = hs_norm_trace(&DensityMatrix::from_entries(n_max, s).unwrap()).powi(2);
            let purity_wide = hs_norm_trace(&DensityMatrix::from_entries(2 * n_max, w).unwrap()).powi(2);
            truncation = truncation.max((purity - purity_wide).abs());
            let quad = match hs_squared_quadrature(&params, &p, i + 1, 128) {
                Ok(q) => q.value,
                Err(e) => return outcome(false, format!("quadrature gate failed: {e}")),
            };
            worst = worst.max((quad - purity).abs());
        }
    }
    outcome(
        worst <= 1e-5 && truncation < 1e-8,
        format!("max |quad - Tr ρ²| = {worst:.2e} (tol 1e-5); truncation doubling shift {truncation:.2e} (gate 1e-8)"),
    )
}

fn witness_classification() -> Outcome {
    let params = k3_sqrt2();
    let c0 = witness_curve(&params, &markov(0.0), 40, 256);
    let c9 = witness_curve(&params, &markov(0.9), 40, 256);
    match (c0, c9) {
        (Ok(c0), Ok(c9)) => {
            let genuine = c9.violations.iter().any(|&n| {
                let (prev, cur) = (c9.points[n - 2], c9.points[n - 1]);
                cur.hs_squared - prev.hs_squared > c9.tol_mono + prev.refinement_error.max(cur.refinement_error)
            });
            outcome(
                c0.violations.is_empty() && genuine,
                format!(
                    "violations: a=0 -> {}, a=0.9 -> {} (largest increase {:.3e})",
                    c0.violations.len(),
                    c9.violations.len(),
                    c9.max_increase()
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("convergence gate failed: {e}")),
    }
}

fn memoryless_semigroup() -> Outcome {
    let params = k3_sqrt2();
    let n_max = default_n_max(&params, 6, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rho = DensityMatrix::random(n_max, 2, 2, &mut rng).unwrap();
    let map = MarkovKickMap::new(&params, markov(0.0), n_max).unwrap();
    // branch enumeration, so the composition is not the recursion rewritten
    let family = map.enumerated_trajectory(rho.entries(), 6).unwrap();
    let mut worst = max_abs_diff(&family[0], &map.memoryless_step(rho.entries()));
    for n in 2..=6 {
        worst = worst.max(max_abs_diff(&family[n - 1], &map.memoryless_step(&family[n - 2])));
    }
    outcome(worst <= 1e-10, format!("max |Φ_N - Φ∘Φ_(N-1)| = {worst:.2e} (tol 1e-10, N <= 6)"))
}

fn positivity_scan() -> Outcome {
    let params = k3_sqrt2();
    let with_memory = delta_scan(&params, &markov(0.1), 512, DEFAULT_EPS_SING).unwrap();
    let memoryless = delta_scan(&params, &markov(0.0), 512, DEFAULT_EPS_SING).unwrap();
    let kernel = check_delta(&VerifyConfig::default()).unwrap();
    let eps = 1e-3;
    let smeared = with_memory.smearing_argmin(&params, eps).and_then(|((i, j), v)| {
        let s = delta_smeared(&params, &markov(0.1), with_memory.theta(i), with_memory.theta(j), eps).ok()?;
        Some((v, s))
    });
    let smeared_ok = matches!(smeared, Some((v, s)) if v < -1e-3 && s < 0.0);
    let passed = with_memory.min_value < 0.0 && memoryless.min_value >= -1e-10 && kernel.passed && smeared_ok;
    let smear_text = match smeared {
        Some((v, s)) => format!("smearable min {v:.3} -> Δ(ε=1e-3) = {s:.3}"),
        None => "no smearable point".into(),
    };
    outcome(
        passed,
        format!(
            "min(a=0.1) = {:.3}, min(a=0) = {:.1e}, closed vs kernel {:.1e} over {} pts, {smear_text}",
            with_memory.min_value, memoryless.min_value, kernel.max_error, kernel.cases
        ),
    )
}

fn cp_sanity() -> Outcome {
    let params = k3_sqrt2();
    let n = 20;
    let support = 2;
    let n_max = default_n_max(&params, n, support);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let starts = [
        DensityMatrix::momentum_eigenstate(n_max, 0).unwrap(),
        DensityMatrix::random(n_max, support, 3, &mut rng).unwrap(),
    ];
    let (mut trace_err, mut herm_err, mut min_eig, mut max_hs) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    for a in [0.0, 0.5, 0.9, 1.0] {
        let map = MarkovKickMap::new(&params, markov(a), n_max).unwrap();
        for rho0 in &starts {
            for state in map.recursive_trajectory(rho0.entries(), n).unwrap() {
                let state = DensityMatrix::from_entries(n_max, state).unwrap();
                trace_err = trace_err.max((state.trace() - Complex64::new(1.0, 0.0)).norm());
                herm_err = herm_err.max(state.hermiticity_error());
                min_eig = min_eig.min(state.min_eigenvalue());
                max_hs = max_hs.max(hs_norm_trace(&state));
            }
        }
    }
    outcome(
        trace_err <= 1e-10 && herm_err <= 1e-10 && min_eig >= -1e-8 && max_hs <= 1.0 + 1e-8,
        format!("trace err {trace_err:.1e}, hermiticity err {herm_err:.1e}, min eigenvalue {min_eig:.1e}, max HS norm {max_hs:.6}"),
    )
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("characteristic-function equivalence", Some(Duration::from_secs(5)), char_fn_equivalence),
        ("variance closed form vs enumeration", Some(Duration::from_secs(10)), variance_vs_enumeration),
        ("localization vs resonance", Some(Duration::from_secs(1)), localization_vs_resonance),
        ("full-memory halving", None, full_memory_halving),
        ("diffusion suppression", None, diffusion_suppression),
        ("Monte Carlo consistency", Some(Duration::from_secs(30)), monte_carlo_consistency),
        ("purity oracle agreement", Some(Duration::from_secs(120)), hs_oracle_agreement),
        ("purity monotonicity classification", None, witness_classification),
        ("memoryless semigroup", None, memoryless_semigroup),
        ("positivity scan", Some(Duration::from_secs(60)), positivity_scan),
        ("CP-map sanity", None, cp_sanity),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let passed = result.passed && in_time;
        failures += usize::from(!passed);
        let budget_text = budget.map_or(String::new(), |b| format!(" / {}s", b.as_secs()));
        println!(
            "[{}] {:>2}. {name}: {} ({:.2}s{budget_text})",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed.as_secs_f64(),
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
