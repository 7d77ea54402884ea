use std::io::Write;
use std::path::PathBuf;

use maryland::evolution::{default_n_max, hs_norm_trace, DensityMatrix, MarkovKickMap};
use maryland::io::{self, DeltaScanMeta, DeltaScanRecord, DensityHeader, Provenance};
use maryland::variance::{variance_curve, CurveMode, KickNoise};
use maryland::verify::{run_all, VerifyConfig};
use maryland::witness::{delta_scan, delta_smeared, witness_curve, TOL_MONO};
use maryland::{Error, MarkovKickProcess, RotorParams, Tau};

use crate::{DeltaArgs, EvolveArgs, Format, Model, Output, Route, SampleArgs, VarianceArgs, VerifyArgs, WitnessArgs};

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_CONVERGENCE: u8 = 3;
pub const EXIT_ORACLE: u8 = 4;

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter { .. } | Error::HorizonTooLarge { .. } | Error::QuadratureResolution { .. } => {
                EXIT_CONFIG
            }
            Error::NotConverged { .. } | Error::Singular { .. } => EXIT_CONVERGENCE,
            Error::Format(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_IO, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn rotor(model: &Model) -> Result<(RotorParams, MarkovKickProcess), Failure> {
    let tau: Tau = model.tau.parse()?;
    Ok((RotorParams::new(model.k, tau)?, MarkovKickProcess::new(model.a)?))
}

fn output_path(output: &Output, command: &str) -> PathBuf {
    output
        .out
        .clone()
        .unwrap_or_else(|| output.out_dir.join(format!("{command}.{}", output.format.extension())))
}

fn announce(provenance: &Provenance) {
    println!("{}", provenance.header_line());
}

pub fn variance(args: &VarianceArgs) -> CmdResult {
    let (params, process) = rotor(&args.model)?;
    let noise = if args.deterministic {
        KickNoise::Deterministic
    } else {
        KickNoise::Markov(process)
    };
    let mode = match args.trials {
        Some(trials) => CurveMode::MonteCarlo {
            trials,
            seed: args.seed,
        },
        None => CurveMode::Exact,
    };
    let mut provenance = Provenance::new("variance")
        .with_rotor(&params)
        .with("deterministic", args.deterministic)
        .with("N_max", args.n_max)
        .with("seed", args.seed);
    if !args.deterministic {
        provenance = provenance.with("a", args.model.a);
    }
    if let Some(trials) = args.trials {
        provenance = provenance.with("trials", trials);
    }
    let curve = variance_curve(&params, noise, args.n_max, mode)?;
    let path = output_path(&args.output, "variance");
    let mut file = io::create_file(&path)?;
    match args.output.format {
        Format::Csv => io::write_variance_csv(&mut file, Some(&provenance), &curve)?,
        Format::Json => io::write_json(&mut file, &provenance, &curve)?,
    }
    file.flush()?;
    announce(&provenance);
    println!("wrote {} points to {}", curve.points.len(), path.display());
    Ok(())
}

pub fn witness(args: &WitnessArgs) -> CmdResult {
    let (params, process) = rotor(&args.model)?;
    let provenance = Provenance::new("witness")
        .with_rotor(&params)
        .with("a", args.model.a)
        .with("N_max", args.n_max)
        .with("grid", args.grid)
        .with("tol_mono", TOL_MONO);
    let curve = witness_curve(&params, &process, args.n_max, args.grid)?;
    let path = output_path(&args.output, "witness");
    let mut file = io::create_file(&path)?;
    match args.output.format {
        Format::Csv => io::write_witness_csv(&mut file, Some(&provenance), &curve)?,
        Format::Json => io::write_json(&mut file, &provenance, &curve)?,
    }
    file.flush()?;
    announce(&provenance);
    println!("violations: {}", curve.violations.len());
    if !curve.violations.is_empty() {
        let list: Vec<String> = curve.violations.iter().map(usize::to_string).collect();
        println!("violating N: {}", list.join(" "));
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn delta(args: &DeltaArgs) -> CmdResult {
    let (params, process) = rotor(&args.model)?;
    if args.eps_sing.is_nan() || args.eps_sing < 0.0 {
        return Err(Failure::new(EXIT_CONFIG, "eps-sing must be nonnegative"));
    }
    let provenance = Provenance::new("delta")
        .with_rotor(&params)
        .with("a", args.model.a)
        .with("grid", args.grid)
        .with("eps_sing", args.eps_sing);
    let scan = delta_scan(&params, &process, args.grid, args.eps_sing)?;
    let meta = DeltaScanMeta::new(provenance.clone(), &scan);
    let path = output_path(&args.output, "delta");
    match args.output.format {
        Format::Csv => io::write_delta_scan(&path, &meta, &scan)?,
        Format::Json => {
            let mut file = io::create_file(&path)?;
            serde_json::to_writer_pretty(&mut file, &DeltaScanRecord::new(meta.clone(), &scan))
                .map_err(Error::from)?;
            file.flush()?;
        }
    }
    announce(&provenance);
    println!("masked points: {}", meta.masked);
    println!(
        "min: {:e} at ({}, {}) theta = ({}, {})",
        scan.min_value, scan.argmin.0, scan.argmin.1, meta.argmin_theta.0, meta.argmin_theta.1
    );
    if args.smear > 0.0 {
        match scan.smearing_argmin(&params, args.smear) {
            Some(((i, j), v)) => {
                let smeared = delta_smeared(&params, &process, scan.theta(i), scan.theta(j), args.smear)?;
                println!(
                    "smearable min: {v:e} at ({i}, {j}); smeared (eps = {}): {smeared:e}",
                    args.smear
                );
            }
            None => println!("no point is far enough from the singular set to smear with eps = {}", args.smear),
        }
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    if args.max_n == 0 || args.max_n > maryland::kicks::MAX_ENUMERATION_HORIZON {
        return Err(Failure::new(
            EXIT_CONFIG,
            format!("max-N must be in 1..={}", maryland::kicks::MAX_ENUMERATION_HORIZON),
        ));
    }
    let cfg = VerifyConfig {
        max_n: args.max_n,
        seed: args.seed,
        perturbation: args.perturb,
        ..VerifyConfig::default()
    };
    let reports = run_all(&cfg)?;
    match args.format {
        Format::Csv => {
            println!("{:<58} {:>7} {:>12} {:>10}  result", "check", "cases", "max error", "tolerance");
            for r in &reports {
                println!(
                    "{:<58} {:>7} {:>12.3e} {:>10.1e}  {}",
                    r.name,
                    r.cases,
                    r.max_error,
                    r.tolerance,
                    if r.passed { "PASS" } else { "FAIL" }
                );
            }
        }
        Format::Json => {
            let provenance = Provenance::new("verify")
                .with("max_N", args.max_n)
                .with("seed", args.seed);
            io::write_json(std::io::stdout().lock(), &provenance, &reports)?;
            println!();
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::new(EXIT_ORACLE, format!("{failed} check(s) failed")));
    }
    Ok(())
}

pub fn sample(args: &SampleArgs) -> CmdResult {
    let process = MarkovKickProcess::new(args.a)?;
    if args.n == 0 {
        return Err(Failure::new(EXIT_CONFIG, "N must be at least 1"));
    }
    let realizations = (0..args.count as u64)
        .map(|i| process.sample(args.n, &mut MarkovKickProcess::trajectory_rng(args.seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let provenance = Provenance::new("sample")
        .with("a", args.a)
        .with("N", args.n)
        .with("count", args.count)
        .with("seed", args.seed);
    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(io::create_file(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    match args.format {
        Format::Csv => {
            writeln!(sink, "{}", provenance.header_line())?;
            writeln!(sink, "index,bits,probability")?;
            for (i, r) in realizations.iter().enumerate() {
                let bits: String = r.bits().iter().map(|b| char::from(b'0' + b)).collect();
                writeln!(sink, "{i},{bits},{:?}", r.probability())?;
            }
        }
        Format::Json => {
            let rows: Vec<String> = realizations.iter().map(ToString::to_string).collect();
            io::write_json(&mut sink, &provenance, &rows)?;
            writeln!(sink)?;
        }
    }
    sink.flush()?;
    Ok(())
}

pub fn evolve(args: &EvolveArgs) -> CmdResult {
    let (params, process) = rotor(&args.model)?;
    if args.n == 0 {
        return Err(Failure::new(EXIT_CONFIG, "N must be at least 1"));
    }
    let n_max = args
        .n_max
        .unwrap_or_else(|| default_n_max(&params, args.n, args.m.unsigned_abs() as usize));
    let rho0 = DensityMatrix::momentum_eigenstate(n_max, args.m)?;
    let map = MarkovKickMap::new(&params, process, n_max)?;
    let entries = match args.route {
        Route::Recursive => map.apply_recursive(rho0.entries(), args.n)?,
        Route::Enumerated => map.apply_enumerated(rho0.entries(), args.n)?,
    };
    let rho = DensityMatrix::from_entries(n_max, entries)?;
    let header = DensityHeader {
        n_max: n_max as u64,
        steps: args.n as u64,
        kick_strength: params.kick_strength(),
        tau: params.tau_value(),
        memory: args.model.a,
    };
    let path = args.out.clone().unwrap_or_else(|| args.out_dir.join("evolve.rho"));
    let mut file = io::create_file(&path)?;
    io::write_density_matrix(&mut file, &header, &rho)?;
    let provenance = Provenance::new("evolve")
        .with_rotor(&params)
        .with("a", args.model.a)
        .with("N", args.n)
        .with("m", args.m)
        .with("n_max", n_max);
    announce(&provenance);
    println!("trace: {:.15}", rho.trace().re);
    println!("purity: {:.15}", hs_norm_trace(&rho).powi(2));
    println!("min eigenvalue: {:e}", rho.min_eigenvalue());
    println!("wrote {}", path.display());
    Ok(())
}
