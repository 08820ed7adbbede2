//! The Bessel potential kernel `B`, its radial derivative, and the two-sided
//! exponential bounds it satisfies.
//!
//! `B` is the convolution kernel of `(1 - Δ)^{-1}`, built from the modified
//! Bessel function of the second kind:
//!
//! ```text
//! B(x) = (2 pi)^{-n/2} |x|^{1 - n/2} K_{n/2 - 1}(|x|),
//! ```
//!
//! where the prefactor fixes the Fourier multiplier to exactly
//! `1/(1 + |xi|^2)`, i.e. `int B = 1`. In closed form: `e^{-|x|}/2` for
//! n = 1 and `e^{-|x|}/(4 pi |x|)` for n = 3; for n = 2 it is
//! `K_0(|x|)/(2 pi)` with a logarithmic singularity at the origin.
//!
//! The radial derivative satisfies `B'(r) = -(2 pi)^{-n/2} r^{1-n/2} K_{n/2}(r)`,
//! so `|grad B|` is again a radial kernel of the same shape one order up.

pub mod bessel_k;

pub use bessel_k::eval_k_nu;

use crate::error::{Error, Result};

/// Validates a spatial dimension; only 1, 2 and 3 are supported.
pub fn check_dimension(n: usize) -> Result<usize> {
    if (1..=3).contains(&n) {
        Ok(n)
    } else {
        Err(Error::BadDimension(n))
    }
}

/// Surface area of the unit sphere in `R^n` (2, 2*pi, 4*pi).
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// The Bessel potential kernel in dimension `n`, normalized so that its
/// integral over `R^n` equals 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselKernel {
    n: usize,
    normalization: f64,
}

impl BesselKernel {
    pub fn new(n: usize) -> Result<Self> {
        let n = check_dimension(n)?;
        let normalization = (2.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0);
        Ok(Self { n, normalization })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// The multiplicative constant `(2 pi)^{-n/2}` in front of
    /// `r^{1-n/2} K_{n/2-1}(r)`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Evaluates `B(r)` for `r >= 0`.
    ///
    /// At `r = 0` the kernel is finite only for n = 1 (value 1/2); for
    /// n >= 2 the singular value `+inf` is reported as such.
    pub fn eval_b(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::NonpositiveRadius(r));
        }
        if r == 0.0 {
            return Ok(match self.n {
                1 => 0.5,
                _ => f64::INFINITY,
            });
        }
        let nu = self.n as f64 / 2.0 - 1.0;
        Ok(self.normalization * r.powf(1.0 - self.n as f64 / 2.0) * eval_k_nu(nu, r)?)
    }

    /// Evaluates `|B'(r)| = (2 pi)^{-n/2} r^{1-n/2} K_{n/2}(r)` for `r > 0`.
    pub fn eval_grad_b_mag(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::NonpositiveRadius(r));
        }
        let nu = self.n as f64 / 2.0;
        Ok(self.normalization * r.powf(1.0 - self.n as f64 / 2.0) * eval_k_nu(nu, r)?)
    }

    /// The two-sided bound functions of the kernel estimate
    /// `lower(r) <= C1 B(r)` and `B(r) <= C2 upper(r)`: returns
    /// `(lower, upper) = (b_low(r) e^{-r}, b_up(r) e^{-r})` with the
    /// dimension-dependent piecewise prefactors
    ///
    /// ```text
    /// b_low(r) = r^{(1-n)/2}            if n != 2 or r >= 1,
    ///            1 - ln r               if n == 2 and r < 1,
    /// b_up(r)  = r^{(1-n)/2}            if r >= 1,
    ///            1 - ln r               if n == 2 and r < 1,
    ///            r^{2-n}                if n >= 3 and r < 1,
    ///            1                      if n == 1 and r < 1.
    /// ```
    pub fn bound_functions(&self, r: f64) -> Result<(f64, f64)> {
        if !(r > 0.0) {
            return Err(Error::NonpositiveRadius(r));
        }
        let decay = (-r).exp();
        let power = r.powf((1.0 - self.n as f64) / 2.0);
        let lower = if self.n == 2 && r < 1.0 { 1.0 - r.ln() } else { power };
        let upper = if r >= 1.0 {
            power
        } else {
            match self.n {
                1 => 1.0,
                2 => 1.0 - r.ln(),
                _ => r.powf(2.0 - self.n as f64),
            }
        };
        Ok((lower * decay, upper * decay))
    }

    /// `int_{R^n} B(x) dx` by adaptive radial quadrature truncated at
    /// `r_max` (the tail beyond 40 is below double-precision relevance).
    ///
    /// The radial integrand `r^{n-1} B(r)` is bounded; its derivative is
    /// log-singular at the origin for n = 2, which the `r = u^2`
    /// substitution on [0, 1] absorbs.
    pub fn integral_over_space(&self, r_max: f64) -> Result<f64> {
        let f = |r: f64| -> f64 {
            if r == 0.0 {
                // limit of r^{n-1} B(r): 1/2 for n=1, 0 for n=2, 1/(4 pi) * 0... r*e^{-r}/(4 pi)/r^0
                match self.n {
                    1 => 0.5,
                    2 => 0.0,
                    _ => 0.0,
                }
            } else {
                r.powi(self.n as i32 - 1) * self.eval_b(r).unwrap()
            }
        };
        let inner = integrate_sqrt_graded(&f, 1.0_f64.min(r_max));
        let outer = if r_max > 1.0 {
            integrate_panels(&f, 1.0, r_max, (2.0 * (r_max - 1.0)).ceil() as usize)
        } else {
            0.0
        };
        Ok(unit_sphere_area(self.n) * (inner + outer))
    }
}

/// A radial kernel `H(r) = B(r) + |grad B|(r)` (or plain `B`), the composite
/// kernel that dominates the convection operator.
#[derive(Debug, Clone, Copy)]
pub struct CompositeKernel {
    pub base: BesselKernel,
    pub include_gradient: bool,
}

impl CompositeKernel {
    pub fn new(base: BesselKernel, include_gradient: bool) -> Self {
        Self { base, include_gradient }
    }

    /// `H(r)`, radial and nonnegative; `+inf` at the origin for n >= 2.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(if self.base.dimension() == 1 && !self.include_gradient {
                0.5
            } else {
                f64::INFINITY
            });
        }
        let mut v = self.base.eval_b(r)?;
        if self.include_gradient {
            v += self.base.eval_grad_b_mag(r)?;
        }
        Ok(v)
    }
}

/// `int_0^b f(r) dr` with an `r = u^2` substitution that tames
/// `r log r`-type behavior at the left endpoint.
fn integrate_sqrt_graded(f: &dyn Fn(f64) -> f64, b: f64) -> f64 {
    let s = b.sqrt();
    let g = |u: f64| 2.0 * u * f(u * u);
    integrate_panels(&g, 0.0, s, 16)
}

/// Composite 20-point Gauss–Legendre over `panels` equal panels.
pub(crate) fn integrate_panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = crate::operators::quadrature::gauss_legendre_20();
    let dt = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * dt;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            sum += w * 0.5 * dt * f(mid + 0.5 * dt * x);
        }
    }
    sum
}
