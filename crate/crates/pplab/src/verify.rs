//! Named verification suites: the same checks are reachable from the CLI
//! (`verify <suite>`) and from the acceptance tests.

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::analysis;
use crate::error::{Error, Result};
use crate::evolution::{solve_autonomous, solve_picard, SeriesParams};
use crate::grid::{Field, GridDomain, InitialSpec};
use crate::kernel::BesselKernel;
use crate::operators::{self, envelope, PotentialMode, PotentialSpec, TimeProfile};

/// A suite name accepted by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Kernel,
    Operators,
    Comparison,
    LowerBound,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kernel" => Ok(Suite::Kernel),
            "operators" => Ok(Suite::Operators),
            "comparison" => Ok(Suite::Comparison),
            "lower-bound" => Ok(Suite::LowerBound),
            "all" => Ok(Suite::All),
            other => Err(Error::Precondition(format!(
                "unknown suite '{other}'; expected kernel, operators, comparison, lower-bound or all"
            ))),
        }
    }
}

/// One named check with its outcome and a short numeric detail.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// A full suite report.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

fn check(name: &str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), pass, detail }
}

/// Runs a suite with a deterministic seed.
pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    match suite {
        Suite::Kernel => checks.extend(kernel_checks()?),
        Suite::Operators => checks.extend(operator_checks(seed)?),
        Suite::Comparison => checks.extend(comparison_checks(seed)?),
        Suite::LowerBound => checks.extend(lower_bound_checks()?),
        Suite::All => {
            checks.extend(kernel_checks()?);
            checks.extend(operator_checks(seed)?);
            checks.extend(comparison_checks(seed)?);
            checks.extend(lower_bound_checks()?);
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(SuiteReport {
        suite: format!("{suite:?}").to_lowercase(),
        seed,
        pass,
        checks,
    })
}

/// The reference envelope dump (`sigma = 0.5`, `rho = 0.5`, `tau0 = 1`),
/// evaluated at a reference time small enough for the ratio test. The same
/// JSON schema serves as the external dump format for any envelope.
pub fn reference_envelope_dump(seed: u64) -> Result<envelope::EnvelopeDump> {
    let p = PotentialSpec::power_law(0.5, 1.0)?;
    let es = envelope::make_eps_sequence(0.5, 0.5, 10_000)?;
    let d = GridDomain::new(1, 16.0, 256)?;
    let env = envelope::make_envelope(&p, &es, 1.0, &d, seed)?;
    let t_ref = 1.0 / (50.0 * env.h * env.f_const);
    env.dump(t_ref)
}

fn kernel_checks() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    for n in 1..=3usize {
        let k = BesselKernel::new(n)?;
        let v = k.integral_over_space(40.0)?;
        out.push(check(
            &format!("kernel-normalization-n{n}"),
            (v - 1.0).abs() < 1e-6,
            format!("int B = {v:.12}"),
        ));
    }

    // 1D closed form at 100 radii
    let k1 = BesselKernel::new(1)?;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let r = 1e-3 + 30.0 * i as f64 / 99.0;
        worst = worst.max((k1.eval_b(r)? - 0.5 * (-r).exp()).abs());
    }
    out.push(check(
        "kernel-1d-closed-form",
        worst < 1e-10,
        format!("max deviation {worst:.3e}"),
    ));

    // two-sided sandwich with bounded spread
    for n in 1..=3usize {
        let k = BesselKernel::new(n)?;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..=400 {
            let r = 1e-3 * (30.0f64 / 1e-3).powf(i as f64 / 400.0);
            let b = k.eval_b(r)?;
            let (bl, bu) = k.bound_functions(r)?;
            lo = lo.min(b / bl);
            hi = hi.max(b / bu);
        }
        let spread = hi / lo;
        out.push(check(
            &format!("kernel-sandwich-n{n}"),
            lo > 0.0 && hi.is_finite() && spread < 100.0,
            format!("C1 = {lo:.4}, C2 = {hi:.4}, spread {spread:.2}"),
        ));
    }

    // gradient kernel: finite-difference consistency and exponential decay
    for n in 1..=3usize {
        let k = BesselKernel::new(n)?;
        let fd = (k.eval_b(2.0 + 1e-4)? - k.eval_b(2.0 - 1e-4)?).abs() / 2e-4;
        let gv = k.eval_grad_b_mag(2.0)?;
        let mut ratio_max = 0.0f64;
        for i in 0..=30 {
            let r = 5.0 + 15.0 * i as f64 / 30.0;
            ratio_max = ratio_max.max(k.eval_grad_b_mag(r)? / (-r).exp());
        }
        out.push(check(
            &format!("kernel-gradient-n{n}"),
            (fd - gv).abs() < 1e-6 && ratio_max.is_finite(),
            format!("|FD - grad| = {:.2e}, max ratio to e^-r = {ratio_max:.3}", (fd - gv).abs()),
        ));
    }
    Ok(out)
}

fn operator_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    // backend equivalence, 1D
    let d = GridDomain::new(1, 20.0, 512)?;
    let f = Field::from_fn(d, |x| (-x[0] * x[0]).exp());
    let s = operators::apply_b_spectral(&f);
    let q = operators::apply_b_quadrature(&f, operators::QuadratureMode::ProductInterp, false)?;
    let diff = s.sub(&q)?.max_abs();
    out.push(check(
        "operators-backend-equivalence-1d",
        diff < 1e-5,
        format!("max difference {diff:.3e}"),
    ));

    // elementary inequality sweep
    let rep = envelope::verify_shift_inequality(2, 10_000, seed)?;
    out.push(check(
        "operators-pointwise-inequality",
        rep.violations == 0,
        format!("{} samples, min slack {:.6}", rep.samples, rep.min_slack),
    ));

    // series-control constants
    let es = envelope::make_eps_sequence(0.5, 0.5, 1000)?;
    out.push(check(
        "operators-theta0",
        (es.theta - 0.132_666_077_428_101_5).abs() < 1e-8,
        format!("theta0 = {:.9}", es.theta),
    ));
    out.push(check(
        "operators-rho-star",
        es.rho_star >= es.rho_star_lower_bound && es.rho_star_lower_bound >= 0.5 - 1e-12,
        format!("rho* = {:.6} >= bound {:.6}", es.rho_star, es.rho_star_lower_bound),
    ));

    // iterated-operator envelope at three growth exponents
    let d_env = GridDomain::new(1, 12.0, 128)?;
    let probe = Field::from_fn(d_env, |x| (-0.7 * x[0] * x[0]).exp());
    for &sigma in &[0.0, 0.3, 0.7] {
        let p = PotentialSpec::power_law(sigma, 1.0)?;
        let es = envelope::make_eps_sequence(sigma, 0.5, 16)?;
        let env = envelope::make_envelope(&p, &es, 1.0, &d_env, seed)?;
        let checks = envelope::check_iterate_envelope(&probe, &p, &env, &es, 4, 0.0)?;
        let worst = checks.iter().map(|c| c.max_ratio).fold(0.0f64, f64::max);
        out.push(check(
            &format!("operators-iterate-envelope-sigma{sigma}"),
            checks.iter().all(|c| c.pass),
            format!("max ratio to envelope {worst:.3e}"),
        ));
    }

    // kernel minorant certificate on a decaying profile
    let d_cert = GridDomain::new(1, 40.0, 1024)?;
    let cert = analysis::certify_operator_minorant(&d_cert, -1.0, 1.0, 0.5, &[0.0, 2.0, 4.0, 8.0, 16.0])?;
    out.push(check(
        "operators-minorant-certificate",
        cert.d0.is_some(),
        format!("d0 = {:?}, min interior ratio {:.4}", cert.d0, cert.min_ratio),
    ));

    // Gronwall decay of the iterated-operator sequence
    let d_g = GridDomain::new(1, 10.0, 256)?;
    let ones = Field::constant(d_g, 1.0);
    for &(sigma, t) in &[(0.0, 1.0), (0.7, 2.0)] {
        let p = PotentialSpec::power_law(sigma, 1.0)?;
        let rep = analysis::gronwall_decay_check(&ones, &p, t, 60)?;
        out.push(check(
            &format!("operators-gronwall-sigma{sigma}"),
            rep.pass,
            format!("s_k below 1e-10 after {} terms", rep.s.len() - 1),
        ));
    }
    Ok(out)
}

fn comparison_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = GridDomain::new(1, 12.0, 128)?;
    let sp = SeriesParams::new(vec![0.5])?;

    // time-independent potentials, ordered smooth random data
    let mut worst = f64::NEG_INFINITY;
    let mut all_pass = true;
    for _ in 0..20 {
        let sigma: f64 = rng.gen_range(0.0..0.9);
        let lambda0: f64 = rng.gen_range(0.1..1.0);
        let (u0, v0) = random_ordered_pair(&d, &mut rng);
        let p = PotentialSpec::power_law(sigma, lambda0)?;
        let ru = solve_autonomous(&u0, &p, &sp)?;
        let rv = solve_autonomous(&v0, &p, &sp)?;
        let rep = analysis::check_comparison(&ru, &rv)?;
        worst = worst.max(rep.max_violation);
        all_pass &= rep.pass;
    }
    out.push(check(
        "comparison-time-independent",
        all_pass,
        format!("20 instances, max violation {worst:.3e}"),
    ));

    // nonnegative time-dependent potentials
    let mut worst2 = f64::NEG_INFINITY;
    let mut all_pass2 = true;
    for _ in 0..20 {
        let sigma: f64 = rng.gen_range(0.0..0.9);
        let c: f64 = rng.gen_range(0.1..1.0);
        let (u0, v0) = random_ordered_pair(&d, &mut rng);
        let p = PotentialSpec::new(
            sigma,
            TimeProfile::ExpDecay { c },
            0.0,
            PotentialMode::ExactPower,
        )?;
        let ru = solve_picard(&u0, &p, &sp, 32)?;
        let rv = solve_picard(&v0, &p, &sp, 32)?;
        let rep = analysis::check_comparison(&ru, &rv)?;
        worst2 = worst2.max(rep.max_violation);
        all_pass2 &= rep.pass;
    }
    out.push(check(
        "comparison-time-dependent",
        all_pass2,
        format!("20 instances, max violation {worst2:.3e}"),
    ));
    Ok(out)
}

/// Smooth random nonnegative pair `u0 <= v0` (Gaussian mixtures plus a gap).
pub fn random_ordered_pair(
    d: &GridDomain,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (Field, Field) {
    let n = d.dimension();
    let l = d.half_width();
    let bumps: Vec<([f64; 3], f64, f64)> = (0..3)
        .map(|_| {
            let mut c = [0.0f64; 3];
            for ck in c.iter_mut().take(n) {
                *ck = rng.gen_range(-l / 2.0..l / 2.0);
            }
            (c, rng.gen_range(0.5..2.0), rng.gen_range(0.1..1.0))
        })
        .collect();
    let gap_center = rng.gen_range(-l / 2.0..l / 2.0);
    let gap_width: f64 = rng.gen_range(0.5..2.0);
    let gap_height: f64 = rng.gen_range(0.05..0.5);
    let u0 = Field::from_fn(*d, |x| {
        bumps
            .iter()
            .map(|(c, w, a)| {
                let r2: f64 = x.iter().zip(c.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
                a * (-r2 / (w * w)).exp()
            })
            .sum()
    });
    let mut v0 = u0.clone();
    for i in d.indices() {
        let c = d.coords(i);
        let r2: f64 = c[..n]
            .iter()
            .map(|p| (p - gap_center) * (p - gap_center))
            .sum();
        v0.values[i] += gap_height * (-r2 / (gap_width * gap_width)).exp() + 0.01;
    }
    (u0, v0)
}

fn lower_bound_checks() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let d = GridDomain::new(1, 20.0, 512)?;
    let u0 = Field::constant(d, 1.0);
    let i = InitialSpec::new(1.0, 0.0, 0.0, 0.0)?;
    for &sigma in &[0.3, 0.5, 0.7] {
        let p = PotentialSpec::power_law(sigma, 1.0)?;
        let r = solve_autonomous(&u0, &p, &SeriesParams::new(vec![1.0])?)?;
        let fits = analysis::verify_lower_bound(&r, &p, &i, 0.2, 0.5)?;
        let f = &fits[0];
        out.push(check(
            &format!("lower-bound-sigma{sigma}"),
            f.pass,
            format!("slope {:.4} >= floor {:.4} - tol {:.4}", f.slope, f.floor, f.fit_tol),
        ));
    }
    Ok(out)
}
