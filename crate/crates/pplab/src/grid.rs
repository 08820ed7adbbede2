//! Truncated computational domains, scalar fields with a gauge flag, the
//! weighted `L^1` norms that decide membership in the solution space, and
//! the auxiliary convolution `Phi_rho g = e^{-rho|.|} * g`.
//!
//! Grids are cell-centered: `x_i = -L + (i + 1/2) h` with `h = 2L/M`, so no
//! node ever sits exactly at the origin and singular kernels or negative
//! powers of `|x|` are always evaluated at nonzero radii.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default cap on the total number of grid points.
pub const DEFAULT_POINT_CAP: usize = 1 << 24;

/// A symmetric truncated box `[-L, L)^n` discretized by `M` cells per
/// dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    n: usize,
    half_width: f64,
    points_per_dim: usize,
}

impl GridDomain {
    pub fn new(n: usize, half_width: f64, points_per_dim: usize) -> Result<Self> {
        Self::with_point_cap(n, half_width, points_per_dim, DEFAULT_POINT_CAP)
    }

    pub fn with_point_cap(
        n: usize,
        half_width: f64,
        points_per_dim: usize,
        cap: usize,
    ) -> Result<Self> {
        let n = crate::kernel::check_dimension(n)?;
        if !(half_width > 0.0) || points_per_dim < 2 || points_per_dim % 2 != 0 {
            return Err(Error::Precondition(format!(
                "grid needs half_width > 0 and an even points_per_dim >= 2, \
                 got L = {half_width}, M = {points_per_dim}"
            )));
        }
        let total = points_per_dim.checked_pow(n as u32).unwrap_or(usize::MAX);
        if total > cap {
            return Err(Error::GridTooLarge { points: total, cap });
        }
        Ok(Self { n, half_width, points_per_dim })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    /// Cell width `h = 2L/M`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_dim as f64
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    /// Total number of grid points `M^n`.
    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the cell center along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    /// Decomposes a flat index into per-axis indices (row-major, axis 0
    /// slowest).
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let m = self.points_per_dim;
        let mut out = [0usize; 3];
        let mut rest = flat;
        for k in (0..self.n).rev() {
            out[k] = rest % m;
            rest /= m;
        }
        out
    }

    /// The cell-center coordinates of a flat index.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let mi = self.multi_index(flat);
        let mut out = [0.0f64; 3];
        for k in 0..self.n {
            out[k] = self.axis_coord(mi[k]);
        }
        out
    }

    /// Euclidean radius of a grid point.
    pub fn radius(&self, flat: usize) -> f64 {
        let c = self.coords(flat);
        (c[..self.n].iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// True when every coordinate satisfies `|x_k| <= L/2` (the inner half
    /// of the box, where truncation bias is negligible).
    pub fn is_interior(&self, flat: usize) -> bool {
        let c = self.coords(flat);
        c[..self.n].iter().all(|v| v.abs() <= self.half_width / 2.0)
    }

    /// Iterator over flat indices.
    pub fn indices(&self) -> std::ops::Range<usize> {
        0..self.len()
    }
}

/// Which quantity a field stores: the solution `u` or its gauge transform
/// `mu = e^t u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gauge {
    U,
    Mu,
}

/// Finite / diverged / invalid tri-state for field values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldState {
    Finite,
    Diverged,
    Invalid,
}

/// A scalar grid function at a fixed time, tagged with its gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub domain: GridDomain,
    pub values: Vec<f64>,
    pub time: f64,
    pub gauge: Gauge,
    pub state: FieldState,
}

impl Field {
    pub fn zeros(domain: GridDomain) -> Self {
        Self::constant(domain, 0.0)
    }

    pub fn constant(domain: GridDomain, c: f64) -> Self {
        Self {
            domain,
            values: vec![c; domain.len()],
            time: 0.0,
            gauge: Gauge::U,
            state: FieldState::Finite,
        }
    }

    /// Builds a field by evaluating `f` at every cell center.
    pub fn from_fn(domain: GridDomain, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let n = domain.dimension();
        let values = domain
            .indices()
            .map(|i| {
                let c = domain.coords(i);
                f(&c[..n])
            })
            .collect();
        let mut out = Self {
            domain,
            values,
            time: 0.0,
            gauge: Gauge::U,
            state: FieldState::Finite,
        };
        out.refresh_state();
        out
    }

    /// Re-derives the tri-state from the stored values.
    pub fn refresh_state(&mut self) {
        if self.values.iter().any(|v| v.is_nan()) {
            self.state = FieldState::Invalid;
        } else if self.values.iter().any(|v| v.is_infinite()) {
            self.state = FieldState::Diverged;
        } else {
            self.state = FieldState::Finite;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.state == FieldState::Finite
    }

    /// Converts to the `mu = e^t u` gauge (no-op if already there).
    pub fn to_mu(&self) -> Field {
        match self.gauge {
            Gauge::Mu => self.clone(),
            Gauge::U => {
                let factor = self.time.exp();
                let mut out = self.clone();
                out.values.iter_mut().for_each(|v| *v *= factor);
                out.gauge = Gauge::Mu;
                out
            }
        }
    }

    /// Converts to the `u` gauge (no-op if already there).
    pub fn to_u(&self) -> Field {
        match self.gauge {
            Gauge::U => self.clone(),
            Gauge::Mu => {
                let factor = (-self.time).exp();
                let mut out = self.clone();
                out.values.iter_mut().for_each(|v| *v *= factor);
                out.gauge = Gauge::U;
                out
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Max absolute value over the inner half of the box.
    pub fn max_abs_interior(&self) -> f64 {
        self.domain
            .indices()
            .filter(|&i| self.domain.is_interior(i))
            .fold(0.0f64, |m, i| m.max(self.values[i].abs()))
    }

    pub fn scaled(&self, c: f64) -> Field {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        check_same_domain(self, other)?;
        let mut out = self.clone();
        out.values
            .iter_mut()
            .zip(other.values.iter())
            .for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        check_same_domain(self, other)?;
        let mut out = self.clone();
        out.values
            .iter_mut()
            .zip(other.values.iter())
            .for_each(|(a, b)| *a -= b);
        Ok(out)
    }
}

pub fn check_same_domain(a: &Field, b: &Field) -> Result<()> {
    if a.domain != b.domain {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?}",
            a.domain, b.domain
        )));
    }
    Ok(())
}

/// The exponential weight `e^{-rho |x|}` with `rho` in `[0, 1)`, defining
/// the weighted `L^1` norm of the solution space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    rho: f64,
}

impl WeightedNorm {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::BadRho { rho, range: "[0, 1)" });
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Midpoint-rule weighted `L^1` norm `sum_i e^{-rho |x_i|} |f_i| h^n`.
///
/// Diverged fields report `+inf`.
pub fn weighted_l1_norm(f: &Field, w: &WeightedNorm) -> f64 {
    if f.state == FieldState::Diverged {
        return f64::INFINITY;
    }
    let vol = f.domain.cell_volume();
    f.domain
        .indices()
        .map(|i| (-w.rho * f.domain.radius(i)).exp() * f.values[i].abs())
        .sum::<f64>()
        * vol
}

/// Discrete convolution with the kernel `e^{-rho |x|}` sampled at grid
/// offsets (zero extension outside the box).
pub fn phi_rho_convolve(f: &Field, w: &WeightedNorm) -> Result<Field> {
    if !(w.rho > 0.0) {
        return Err(Error::BadRho { rho: w.rho, range: "(0, 1)" });
    }
    if !f.is_finite() {
        return Err(Error::Precondition("phi_rho_convolve needs a finite field".into()));
    }
    let d = f.domain;
    let n = d.dimension();
    let m = d.points_per_dim();
    let h = d.spacing();
    let vol = d.cell_volume();

    // kernel table over absolute per-axis offsets
    let mut out = Field::zeros(d);
    out.time = f.time;
    out.gauge = f.gauge;
    match n {
        1 => {
            let table: Vec<f64> = (0..m).map(|k| (-w.rho * h * k as f64).exp() * vol).collect();
            for i in 0..m {
                let mut acc = 0.0;
                for (j, fv) in f.values.iter().enumerate() {
                    acc += table[i.abs_diff(j)] * fv;
                }
                out.values[i] = acc;
            }
        }
        2 => {
            let mut table = vec![0.0f64; m * m];
            for a in 0..m {
                for b in 0..m {
                    let r = h * ((a * a + b * b) as f64).sqrt();
                    table[a * m + b] = (-w.rho * r).exp() * vol;
                }
            }
            for i1 in 0..m {
                for i2 in 0..m {
                    let mut acc = 0.0;
                    for j1 in 0..m {
                        let da = i1.abs_diff(j1);
                        let row = &f.values[j1 * m..(j1 + 1) * m];
                        let trow = &table[da * m..(da + 1) * m];
                        for (j2, fv) in row.iter().enumerate() {
                            acc += trow[i2.abs_diff(j2)] * fv;
                        }
                    }
                    out.values[i1 * m + i2] = acc;
                }
            }
        }
        _ => {
            for i in d.indices() {
                let ci = d.coords(i);
                let mut acc = 0.0;
                for j in d.indices() {
                    let cj = d.coords(j);
                    let r = (0..n).map(|k| (ci[k] - cj[k]).powi(2)).sum::<f64>().sqrt();
                    acc += (-w.rho * r).exp() * f.values[j];
                }
                out.values[i] = acc * vol;
            }
        }
    }
    out.refresh_state();
    Ok(out)
}

/// Structured description of the initial datum
/// `u0(x) = C0 * exp(delta |x|^alpha) * |x|^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub c0: f64,
    pub delta: f64,
    pub alpha: f64,
    #[serde(default)]
    pub d_pow: f64,
}

impl InitialSpec {
    pub fn new(c0: f64, delta: f64, alpha: f64, d_pow: f64) -> Result<Self> {
        if !(c0 > 0.0) || d_pow < 0.0 {
            return Err(Error::Precondition(format!(
                "initial spec needs C0 > 0 and d >= 0, got C0 = {c0}, d = {d_pow}"
            )));
        }
        Ok(Self { c0, delta, alpha, d_pow })
    }

    pub fn eval(&self, r: f64) -> f64 {
        // cell-centered grids never evaluate at r = 0 exactly, but the
        // alpha = 0 / d = 0 limits are still made exact here.
        let pow_term = if self.d_pow == 0.0 { 1.0 } else { r.powf(self.d_pow) };
        let exp_arg = if self.alpha == 0.0 {
            self.delta
        } else {
            self.delta * r.powf(self.alpha)
        };
        self.c0 * exp_arg.exp() * pow_term
    }

    /// Analytic membership in the weighted space: the profile lies in some
    /// `E_rho` with `rho < 1` iff it does not grow exp-linearly or faster.
    pub fn in_weighted_space(&self) -> bool {
        if self.alpha < 1.0 {
            true
        } else if self.alpha == 1.0 {
            self.delta < 1.0
        } else {
            self.delta <= 0.0
        }
    }
}

/// Samples the initial profile at the cell centers (gauge `u`, time 0).
pub fn sample_initial(spec: &InitialSpec, d: &GridDomain) -> Field {
    Field::from_fn(*d, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        spec.eval(r)
    })
}

/// Outcome of the numerical membership probe for `E_rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipTrend {
    /// The weighted norm is stable when the box is enlarged.
    Stable,
    /// The weighted norm grows by more than factor 1.5 when the box doubles:
    /// not in `E_rho` at this resolution.
    DivergesAtThisResolution,
}

/// Probes membership of the initial profile in `E_rho` by comparing the
/// weighted norm on boxes of half-width `L` and `2L` at fixed spacing.
///
/// Truncated domains cannot prove integrability; a growth trend is the
/// honest surrogate.
pub fn membership_trend(spec: &InitialSpec, base: &GridDomain, w: &WeightedNorm) -> Result<MembershipTrend> {
    let d2 = GridDomain::new(
        base.dimension(),
        2.0 * base.half_width(),
        2 * base.points_per_dim(),
    )?;
    let n1 = weighted_l1_norm(&sample_initial(spec, base), w);
    let n2 = weighted_l1_norm(&sample_initial(spec, &d2), w);
    if n2 > 1.5 * n1 {
        Ok(MembershipTrend::DivergesAtThisResolution)
    } else {
        Ok(MembershipTrend::Stable)
    }
}
