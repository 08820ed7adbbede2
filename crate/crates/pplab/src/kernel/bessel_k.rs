//! Modified Bessel functions of the second kind for the handful of orders
//! the potential kernel needs: nu in {-1/2, 0, 1/2, 1, 3/2}.
//!
//! Half-integer orders have elementary closed forms. Integer orders use the
//! classical two-regime evaluation: the ascending (Temme-style) series below
//! the crossover radius and the Steed continued fraction CF2 above it
//! (Temme, J. Comput. Phys. 19 (1975); see also DLMF 10.31, 10.37). Both
//! regimes are accurate to ~1e-14 relative, comfortably inside the 1e-10
//! contract.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Crossover between the ascending series and the continued fraction.
pub const CROSSOVER_RADIUS: f64 = 2.0;

/// Evaluates `K_nu(r)` for `nu` in {-1/2, 0, 1/2, 1, 3/2} and `r > 0`.
pub fn eval_k_nu(nu: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonpositiveRadius(r));
    }
    let two_nu = 2.0 * nu;
    let idx = two_nu.round();
    if (two_nu - idx).abs() > 1e-12 {
        return Err(Error::UnsupportedOrder(nu));
    }
    match idx as i64 {
        // K_{-1/2} = K_{1/2} by symmetry of the integral representation.
        -1 | 1 => Ok(k_half(r)),
        0 => Ok(k01(r).0),
        2 => Ok(k01(r).1),
        3 => Ok(k_three_halves(r)),
        _ => Err(Error::UnsupportedOrder(nu)),
    }
}

/// `K_{1/2}(r) = sqrt(pi/(2r)) e^{-r}`, exact for all r.
pub fn k_half(r: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2 / r).sqrt() * (-r).exp()
}

/// `K_{3/2}(r) = sqrt(pi/(2r)) e^{-r} (1 + 1/r)`, exact for all r.
pub fn k_three_halves(r: f64) -> f64 {
    k_half(r) * (1.0 + 1.0 / r)
}

/// Evaluates the pair `(K_0(r), K_1(r))`.
pub fn k01(r: f64) -> (f64, f64) {
    let (s0, s1) = if r < CROSSOVER_RADIUS {
        k01_series_scaled(r)
    } else {
        k01_cf2_scaled(r)
    };
    let e = (-r).exp();
    (s0 * e, s1 * e)
}

/// Ascending series at order zero, returning `e^r`-scaled `(K_0, K_1)`.
///
/// Series start: `K_0(x) = -(ln(x/2) + gamma) I_0(x) + sum_k H_k (x^2/4)^k/(k!)^2`,
/// organised as a single recurrence that yields K_1 alongside.
fn k01_series_scaled(x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let ex = x.exp();

    let mut fk = -(ln_half_x + EULER_GAMMA);
    let mut pk = 0.5;
    let mut qk = 0.5;
    let mut ck = 1.0;
    let mut sum0 = fk;
    let mut sum1 = pk;

    for k in 1..=1000 {
        let kf = k as f64;
        fk = (kf * fk + pk + qk) / (kf * kf);
        ck *= half_x * half_x / kf;
        pk /= kf;
        qk /= kf;
        let hk = -kf * fk + pk;
        let d0 = ck * fk;
        sum0 += d0;
        sum1 += ck * hk;
        if d0.abs() < 0.5 * f64::EPSILON * sum0.abs() {
            break;
        }
    }
    (sum0 * ex, sum1 * (2.0 / x) * ex)
}

/// Steed continued fraction CF2 at order zero for `x >= 2`, returning
/// `e^r`-scaled `(K_0, K_1)`.
fn k01_cf2_scaled(x: f64) -> (f64, f64) {
    let mut bi = 2.0 * (1.0 + x);
    let mut di = 1.0 / bi;
    let mut delhi = di;
    let mut hi = di;

    let mut qi = 0.0;
    let mut qip1 = 1.0;

    let mut ai = -0.25;
    let a1 = ai;
    let mut ci = -ai;
    let mut bqi = -ai;

    let mut s = 1.0 + bqi * delhi;

    for i in 2..=10_000u64 {
        ai -= 2.0 * (i - 1) as f64;
        ci = -ai * ci / i as f64;
        let tmp = (qi - bi * qip1) / ai;
        qi = qip1;
        qip1 = tmp;
        bqi += ci * qip1;
        bi += 2.0;
        di = 1.0 / (bi + ai * di);
        delhi *= bi * di - 1.0;
        hi += delhi;
        let dels = bqi * delhi;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    hi *= -a1;

    let k0 = (std::f64::consts::FRAC_PI_2 / x).sqrt() / s;
    let k1 = k0 * (x + 0.5 - hi) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: numerical evaluation of the integral
    /// representation `K_nu(r) = int_0^inf e^{-r cosh t} cosh(nu t) dt`
    /// by composite Gauss–Legendre on [0, 12] (the integrand is below
    /// 1e-300 past t = 12 for every r >= 1e-3 of interest... at r=1e-3,
    /// e^{-r cosh 12} = e^{-81.4}, well below the integrand scale).
    fn k_nu_integral_oracle(nu: f64, r: f64) -> f64 {
        // 20-point Gauss-Legendre nodes/weights on [-1, 1].
        let (nodes, weights) = crate::operators::quadrature::gauss_legendre_20();
        let panels = 96;
        let t_max = 12.0;
        let dt = t_max / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let a = p as f64 * dt;
            let mid = a + 0.5 * dt;
            for (x, w) in nodes.iter().zip(weights.iter()) {
                let t = mid + 0.5 * dt * x;
                sum += w * 0.5 * dt * (-r * t.cosh()).exp() * (nu * t).cosh();
            }
        }
        sum
    }

    #[test]
    fn half_order_closed_form_value() {
        // K_{1/2}(1) = sqrt(pi/2) e^{-1}
        let expected = 0.461_068_504_447_894_6;
        assert!((eval_k_nu(0.5, 1.0).unwrap() - expected).abs() < 1e-12);
        // and the integral-representation oracle agrees
        let oracle = k_nu_integral_oracle(0.5, 1.0);
        assert!(
            (oracle - expected).abs() < 1e-12,
            "oracle = {oracle}, expected = {expected}"
        );
    }

    #[test]
    fn negative_half_equals_positive_half() {
        let a = eval_k_nu(-0.5, 2.0).unwrap();
        let b = eval_k_nu(0.5, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k0_diverges_like_log_at_origin() {
        // Sign and log-rate on r = 1e-3 and 1e-4.
        let k3 = eval_k_nu(0.0, 1e-3).unwrap();
        let k4 = eval_k_nu(0.0, 1e-4).unwrap();
        assert!(k3 > 0.0 && k4 > 0.0);
        let r3 = k3 / (-(1e-3f64).ln());
        let r4 = k4 / (-(1e-4f64).ln());
        assert!((r3 - 1.0).abs() < 0.15, "ratio at 1e-3: {r3}");
        assert!((r4 - 1.0).abs() < 0.15, "ratio at 1e-4: {r4}");
        // the log-rate sharpens as r -> 0
        assert!((r4 - 1.0).abs() < (r3 - 1.0).abs());
    }

    #[test]
    fn integral_oracle_across_orders_and_radii() {
        let orders = [-0.5, 0.0, 0.5, 1.0, 1.5];
        // log-spaced radii spanning both evaluation regimes
        let radii = [1e-3, 0.01, 0.1, 0.5, 1.0, 1.9, 2.0, 2.1, 5.0, 10.0, 30.0];
        for &nu in &orders {
            for &r in &radii {
                let got = eval_k_nu(nu, r).unwrap();
                let want = k_nu_integral_oracle(nu, r);
                let rel = (got - want).abs() / want.abs();
                assert!(rel < 1e-10, "nu={nu} r={r}: got {got}, oracle {want}, rel {rel}");
            }
        }
    }

    #[test]
    fn frozen_reference_values() {
        // mpmath besselk, 25 digits
        assert!((eval_k_nu(0.0, 1.0).unwrap() - 0.421_024_438_240_708_33).abs() < 1e-13);
        assert!((eval_k_nu(1.0, 1.0).unwrap() - 0.601_907_230_197_234_6).abs() < 1e-13);
        assert!((eval_k_nu(0.0, 3.0).unwrap() - 0.034_739_504_386_279_25).abs() < 1e-14);
        let rel = (eval_k_nu(1.0, 0.05).unwrap() - 19.909_674_325_882_505).abs() / 19.909_674_325_882_505;
        assert!(rel < 1e-13);
    }

    #[test]
    fn tolerance_contract_near_range_ends() {
        // relative tolerance 1e-10 on [1e-6, 50]: spot-check the extremes
        // against the next-door closed forms.
        let r = 1e-6;
        let k0 = eval_k_nu(0.0, r).unwrap();
        // K_0(r) ~ -ln(r/2) - gamma as r -> 0, remainder O(r^2 ln r)
        let approx = -(r / 2.0f64).ln() - EULER_GAMMA;
        assert!((k0 - approx).abs() / approx < 1e-11);

        let r = 50.0;
        let oracle = k_nu_integral_oracle(1.0, r);
        let got = eval_k_nu(1.0, r).unwrap();
        assert!((got - oracle).abs() / oracle < 1e-10);
    }

    #[test]
    fn domain_and_order_errors() {
        assert!(matches!(eval_k_nu(0.5, 0.0), Err(Error::NonpositiveRadius(_))));
        assert!(matches!(eval_k_nu(0.5, -1.0), Err(Error::NonpositiveRadius(_))));
        assert!(matches!(eval_k_nu(2.5, 1.0), Err(Error::UnsupportedOrder(_))));
        assert!(matches!(eval_k_nu(0.3, 1.0), Err(Error::UnsupportedOrder(_))));
    }
}
