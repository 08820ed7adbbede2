//! Independent end-to-end oracles for the solvers: the same evolution is
//! reproduced with a different operator backend (direct quadrature instead
//! of spectral) and a different time discretization (classical RK4 instead
//! of the exponential series / trapezoid Picard), and the two must agree.

use pplab::evolution::{solve_autonomous, solve_convection, SeriesParams, SolveStatus};
use pplab::grid::{Field, Gauge, GridDomain};
use pplab::operators::{
    apply_b_quadrature, ConvectionSpec, PotentialMode, PotentialSpec, QuadratureMode,
    TimeProfile,
};

/// One application of the gauged generator `mu -> B(V mu)` through the
/// quadrature backend.
fn generator(mu: &Field, p: &PotentialSpec) -> Field {
    let d = mu.domain;
    let mut vf = mu.clone();
    for i in d.indices() {
        vf.values[i] *= p.v(d.radius(i), 0.0);
    }
    apply_b_quadrature(&vf, QuadratureMode::ProductInterp, false).unwrap()
}

fn rk4_mu(u0: &Field, p: &PotentialSpec, t_end: f64, dt: f64) -> Field {
    let mut mu = u0.clone();
    let steps = (t_end / dt).round() as usize;
    let d = u0.domain;
    let axpy = |y: &Field, a: f64, x: &Field| -> Field {
        let mut out = y.clone();
        for i in d.indices() {
            out.values[i] += a * x.values[i];
        }
        out
    };
    for _ in 0..steps {
        let k1 = generator(&mu, p);
        let k2 = generator(&axpy(&mu, 0.5 * dt, &k1), p);
        let k3 = generator(&axpy(&mu, 0.5 * dt, &k2), p);
        let k4 = generator(&axpy(&mu, dt, &k3), p);
        for i in d.indices() {
            mu.values[i] += dt / 6.0
                * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]);
        }
    }
    mu.time = t_end;
    mu.gauge = Gauge::Mu;
    mu
}

#[test]
fn series_solver_matches_rk4_quadrature_oracle() {
    // sigma = 0.5 potential: genuinely x-dependent, no scalar reduction
    let d = GridDomain::new(1, 12.0, 256).unwrap();
    let u0 = Field::from_fn(d, |x| (-0.4 * x[0] * x[0]).exp() + 0.05);
    let p = PotentialSpec::power_law(0.5, 0.5).unwrap();
    let t = 1.0;

    let series = solve_autonomous(&u0, &p, &SeriesParams::new(vec![t]).unwrap()).unwrap();
    assert_eq!(series.status, SolveStatus::Converged);

    let mu_oracle = rk4_mu(&u0, &p, t, 1e-3);
    let u_oracle = mu_oracle.to_u();
    let mut worst = 0.0f64;
    for i in d.indices() {
        worst = worst.max((series.snapshots[0].values[i] - u_oracle.values[i]).abs());
    }
    assert!(worst < 1e-4, "series vs RK4/quadrature oracle: {worst}");
    println!("series vs RK4+quadrature oracle max gap: {worst:.3e}");
}

#[test]
fn two_dimensional_scalar_reduction() {
    // sigma = 0 constants reduce to the scalar flow in any dimension:
    // u(t) = e^{Lambda0 t} interior
    let d = GridDomain::new(2, 24.0, 96).unwrap();
    let u0 = Field::constant(d, 1.0);
    let p = PotentialSpec::power_law(0.0, 0.4).unwrap();
    let r = solve_autonomous(&u0, &p, &SeriesParams::new(vec![1.0]).unwrap()).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    let want = (0.4f64).exp();
    let mut worst = 0.0f64;
    for i in d.indices().filter(|&i| d.is_interior(i)) {
        worst = worst.max((r.snapshots[0].values[i] - want).abs());
    }
    assert!(worst < 1e-3, "2D scalar reduction gap {worst}");
    println!("2D scalar reduction gap: {worst:.3e}");
}

#[test]
fn combined_time_dependent_potential_and_drift() {
    // full generality in one run: decaying potential plus linear drift
    let d = GridDomain::new(1, 14.0, 256).unwrap();
    let u0 = Field::from_fn(d, |x| (-x[0] * x[0]).exp());
    let p = PotentialSpec::new(
        0.3,
        TimeProfile::ExpDecay { c: 0.3 },
        0.0,
        PotentialMode::BoundedAbs,
    )
    .unwrap();
    let cs = ConvectionSpec::linear(0.05);
    let r = solve_convection(&u0, &p, &cs, &SeriesParams::new(vec![0.25, 0.5]).unwrap(), 64)
        .unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    for &res in &r.residuals {
        assert!(res < 1e-5, "residual {res}");
    }
    // positivity carries over
    for snap in &r.snapshots {
        let min = snap.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > -1e-8, "min {min}");
    }
}
