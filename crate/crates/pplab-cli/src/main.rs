//! `pplab` — command-line driver for the pseudoparabolic evolution
//! laboratory: solve a configured Cauchy problem, classify it by the
//! existence/blow-up trichotomy, scan a parameter plane, run verification
//! suites, or dump kernel tables.

mod config;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{load_config, RunConfig, ScanConfig, ScanFamily};
use pplab::analysis::{self, Verdict};
use pplab::evolution::{self, SeriesParams, SolveStatus};
use pplab::grid::{sample_initial, GridDomain};
use pplab::io::{field_to_binary, field_to_csv, format_f64, write_json_17};
use pplab::kernel::BesselKernel;
use pplab::operators::{PotentialSpec, TimeProfile};
use pplab::verify::{run_suite, Suite};

const EXIT_TRUNCATED: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_CONFIG: u8 = 64;
const EXIT_BUDGET: u8 = 65;

#[derive(Parser)]
#[command(name = "pplab", version, about = "Pseudoparabolic evolution laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the configured Cauchy problem and write snapshots + manifest.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run outside the convergent regime (sigma >= 1 or datum outside
        /// the weighted space); divergence is then reported, not refused.
        #[arg(long)]
        force_unsafe: bool,
    },
    /// Classify the configured instance; the exit code encodes the verdict.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify every cell of a (sigma, Lambda0) grid into a CSV phase table.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a named verification suite (kernel, operators, comparison,
    /// lower-bound, all) and print a machine-readable report.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump (r, B, |grad B|, lower, upper) rows as CSV.
    KernelTable {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        r_min: f64,
        #[arg(long, default_value_t = 30.0)]
        r_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Log-spaced radii instead of linear.
        #[arg(long)]
        log_spaced: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Solve { config, out, force_unsafe } => cmd_solve(&config, out, force_unsafe),
        Cmd::Classify { config, out } => cmd_classify(&config, out),
        Cmd::Scan { config, out, jobs } => cmd_scan(&config, out, jobs),
        Cmd::Verify { suite, seed, out } => cmd_verify(&suite, seed, out),
        Cmd::KernelTable { n, r_min, r_max, points, log_spaced, out } => {
            cmd_kernel_table(n, r_min, r_max, points, log_spaced, out)
        }
    }
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn build_domain(cfg: &RunConfig) -> Result<GridDomain, pplab::Error> {
    GridDomain::new(
        cfg.problem.n,
        cfg.problem.half_width,
        cfg.problem.points_per_dim,
    )
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn cmd_solve(config_path: &Path, out: Option<PathBuf>, force_unsafe: bool) -> ExitCode {
    let cfg: RunConfig = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));

    let domain = match build_domain(&cfg) {
        Ok(d) => d,
        Err(e) => return config_error(e),
    };
    if !cfg.problem.initial.in_weighted_space() && !force_unsafe {
        return config_error(
            "initial datum grows too fast for the weighted solution space \
             (pass --force-unsafe to run anyway)",
        );
    }
    let mut sp = match SeriesParams::new(cfg.solver.time_grid.clone()) {
        Ok(sp) => sp,
        Err(e) => return config_error(e),
    };
    sp.max_terms = cfg.solver.max_terms;
    sp.tol = cfg.solver.tol;
    sp.rho = cfg.solver.rho;
    sp.force_unsafe = force_unsafe;
    if let Err(e) = sp.validate() {
        return config_error(e);
    }

    let u0 = sample_initial(&cfg.problem.initial, &domain);
    let p = &cfg.problem.potential;
    let solved = match (&cfg.problem.convection, p.is_autonomous()) {
        (Some(cs), _) => evolution::solve_convection(&u0, p, cs, &sp, cfg.solver.quad_steps),
        (None, true) => evolution::solve_autonomous(&u0, p, &sp),
        (None, false) => evolution::solve_picard(&u0, p, &sp, cfg.solver.quad_steps),
    };
    let result = match solved {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };

    if let Err(e) = write_solve_artifacts(&cfg, &result, &out_dir) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    println!(
        "status: {:?}; snapshots: {}; outputs: {}",
        result.status,
        result.snapshots.len(),
        out_dir.display()
    );
    match result.status {
        SolveStatus::Converged => ExitCode::SUCCESS,
        SolveStatus::Truncated => ExitCode::from(EXIT_TRUNCATED),
        SolveStatus::Diverged => ExitCode::from(EXIT_DIVERGED),
    }
}

fn write_solve_artifacts(
    cfg: &RunConfig,
    result: &evolution::EvolutionResult,
    out_dir: &Path,
) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let want = |f: &str| cfg.outputs.formats.iter().any(|s| s == f);

    let mut snapshot_entries = Vec::new();
    for (i, snap) in result.snapshots.iter().enumerate() {
        let mut entry = serde_json::Map::new();
        entry.insert("t".into(), serde_json::json!(snap.time));
        if want("csv") {
            let name = format!("snapshot_{i:03}.csv");
            let mut fh = std::fs::File::create(out_dir.join(&name))?;
            field_to_csv(snap, &mut fh).map_err(to_io)?;
            entry.insert("csv".into(), serde_json::json!(name));
        }
        if want("bin") {
            let name = format!("snapshot_{i:03}.bin");
            let mut fh = std::fs::File::create(out_dir.join(&name))?;
            field_to_binary(snap, &mut fh).map_err(to_io)?;
            entry.insert("bin".into(), serde_json::json!(name));
        }
        snapshot_entries.push(serde_json::Value::Object(entry));
    }

    let manifest = serde_json::json!({
        "config": serde_json::to_value(cfg).unwrap(),
        "status": result.status,
        "times": cfg.solver.time_grid,
        "residuals": result.residuals,
        "term_norms": result.term_norms,
        "sweep_diffs": result.sweep_diffs,
        "snapshots": snapshot_entries,
    });
    let mut fh = std::fs::File::create(out_dir.join("manifest.json"))?;
    write_json_17(&manifest, &mut fh).map_err(to_io)?;
    Ok(())
}

fn to_io(e: pplab::Error) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

fn verdict_exit(v: Verdict) -> ExitCode {
    ExitCode::from(match v {
        Verdict::GlobalExists => 0,
        Verdict::NoGlobalSolution => 10,
        Verdict::InstantaneousBlowup => 11,
        Verdict::CompleteBlowupAnyPotential => 12,
        Verdict::Undetermined => 20,
    })
}

fn cmd_classify(config_path: &Path, out: Option<PathBuf>) -> ExitCode {
    let cfg: RunConfig = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let horizon = cfg.solver.time_grid.last().copied().unwrap_or(f64::INFINITY);
    let c = match analysis::classify(&cfg.problem.potential, &cfg.problem.initial, horizon) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    println!("verdict: {:?} ({})", c.verdict, c.citation);
    for item in &c.certificate {
        match item.threshold {
            Some(th) => println!("  {} = {} (threshold {})", item.name, item.value, th),
            None => println!("  {} = {}", item.name, item.value),
        }
    }
    if matches!(
        c.verdict,
        Verdict::InstantaneousBlowup | Verdict::CompleteBlowupAnyPotential
    ) {
        // truncated domains cannot produce infinities; the verdict is a
        // divergence-trend statement, not a proof
        println!("  note: numerically consistent with instantaneous blow-up");
    }
    let json = serde_json::to_value(&c).unwrap();
    if let Some(dir) = out {
        if std::fs::create_dir_all(&dir).is_err() {
            return ExitCode::from(EXIT_CONFIG);
        }
        let mut fh = match std::fs::File::create(dir.join("classification.json")) {
            Ok(f) => f,
            Err(e) => return config_error(e),
        };
        if write_json_17(&json, &mut fh).is_err() {
            return ExitCode::from(EXIT_CONFIG);
        }
    } else {
        let mut buf = Vec::new();
        write_json_17(&json, &mut buf).unwrap();
        println!("{}", String::from_utf8_lossy(&buf));
    }
    verdict_exit(c.verdict)
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

const SCAN_CELL_BUDGET: usize = 10_000;

fn cmd_scan(config_path: &Path, out: Option<PathBuf>, jobs: Option<usize>) -> ExitCode {
    let cfg: ScanConfig = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let sigmas = cfg.sigma.values();
    let lambdas = cfg.lambda0.values();
    let cells = sigmas.len() * lambdas.len();
    if cells > SCAN_CELL_BUDGET {
        eprintln!("error: scan has {cells} cells, budget is {SCAN_CELL_BUDGET}");
        return ExitCode::from(EXIT_BUDGET);
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.outputs.directory));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return config_error(e);
    }

    let mut grid: Vec<(usize, f64, f64)> = Vec::with_capacity(cells);
    for (i, &s) in sigmas.iter().enumerate() {
        for (j, &l) in lambdas.iter().enumerate() {
            grid.push((i * lambdas.len() + j, s, l));
        }
    }

    let classify_cell = |&(idx, sigma, lambda0): &(usize, f64, f64)| {
        let lambda = match cfg.lambda_family {
            ScanFamily::Constant => TimeProfile::Constant { c: lambda0 },
            ScanFamily::ExpDecay => TimeProfile::ExpDecay { c: lambda0 },
        };
        let p = PotentialSpec::new(
            sigma,
            lambda,
            cfg.r0,
            pplab::operators::PotentialMode::ExactPower,
        )
        .expect("scan potential");
        let c = analysis::classify(&p, &cfg.initial, f64::INFINITY).expect("scan classify");
        (idx, sigma, lambda0, c.verdict)
    };

    let mut rows: Vec<(usize, f64, f64, Verdict)> = match jobs {
        Some(1) => grid.iter().map(classify_cell).collect(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool");
            pool.install(|| grid.par_iter().map(classify_cell).collect())
        }
        None => grid.par_iter().map(classify_cell).collect(),
    };
    rows.sort_by_key(|r| r.0);

    let path = out_dir.join("phase_scan.csv");
    let mut fh = match std::fs::File::create(&path) {
        Ok(f) => f,
        Err(e) => return config_error(e),
    };
    let mut write_all = || -> std::io::Result<()> {
        writeln!(fh, "sigma,Lambda0,alpha,delta,verdict")?;
        for (_, sigma, lambda0, verdict) in &rows {
            writeln!(
                fh,
                "{},{},{},{},{}",
                format_f64(*sigma),
                format_f64(*lambda0),
                format_f64(cfg.initial.alpha),
                format_f64(cfg.initial.delta),
                verdict_name(*verdict)
            )?;
        }
        Ok(())
    };
    if let Err(e) = write_all() {
        return config_error(e);
    }
    println!("{} cells -> {}", rows.len(), path.display());
    ExitCode::SUCCESS
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::GlobalExists => "global_exists",
        Verdict::NoGlobalSolution => "no_global_solution",
        Verdict::InstantaneousBlowup => "instantaneous_blowup",
        Verdict::CompleteBlowupAnyPotential => "complete_blowup_any_potential",
        Verdict::Undetermined => "undetermined",
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn cmd_verify(suite: &str, seed: u64, out: Option<PathBuf>) -> ExitCode {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let report = match run_suite(suite, seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    for c in &report.checks {
        println!("{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let json = serde_json::to_value(&report).unwrap();
    let mut buf = Vec::new();
    write_json_17(&json, &mut buf).unwrap();
    if let Some(dir) = out {
        if std::fs::create_dir_all(&dir).is_err() {
            return ExitCode::from(EXIT_CONFIG);
        }
        if std::fs::write(dir.join("verify_report.json"), &buf).is_err() {
            return ExitCode::from(EXIT_CONFIG);
        }
        // the operators suites also export the reference envelope dump
        if matches!(suite, Suite::Operators | Suite::All) {
            match pplab::verify::reference_envelope_dump(seed) {
                Ok(dump) => {
                    let mut ebuf = Vec::new();
                    write_json_17(&serde_json::to_value(&dump).unwrap(), &mut ebuf).unwrap();
                    if std::fs::write(dir.join("envelope_dump.json"), &ebuf).is_err() {
                        return ExitCode::from(EXIT_CONFIG);
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            }
        }
    } else {
        println!("{}", String::from_utf8_lossy(&buf));
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// ---------------------------------------------------------------------------
// kernel-table
// ---------------------------------------------------------------------------

fn cmd_kernel_table(
    n: usize,
    r_min: f64,
    r_max: f64,
    points: usize,
    log_spaced: bool,
    out: Option<PathBuf>,
) -> ExitCode {
    let kernel = match BesselKernel::new(n) {
        Ok(k) => k,
        Err(e) => return config_error(e),
    };
    if !(r_min > 0.0) || r_max <= r_min || points < 2 {
        return config_error("need 0 < r_min < r_max and points >= 2");
    }
    let mut rows = String::from("r,B,gradB,lower,upper\n");
    for i in 0..points {
        let s = i as f64 / (points - 1) as f64;
        let r = if log_spaced {
            r_min * (r_max / r_min).powf(s)
        } else {
            r_min + (r_max - r_min) * s
        };
        let b = kernel.eval_b(r).unwrap();
        let g = kernel.eval_grad_b_mag(r).unwrap();
        let (lo, up) = kernel.bound_functions(r).unwrap();
        // 12 significant digits
        rows.push_str(&format!(
            "{r:.11e},{b:.11e},{g:.11e},{lo:.11e},{up:.11e}\n"
        ));
    }
    match out {
        Some(dir) => {
            if std::fs::create_dir_all(&dir).is_err() {
                return ExitCode::from(EXIT_CONFIG);
            }
            if let Err(e) = std::fs::write(dir.join("kernel_table.csv"), rows) {
                return config_error(e);
            }
        }
        None => print!("{rows}"),
    }
    ExitCode::SUCCESS
}
