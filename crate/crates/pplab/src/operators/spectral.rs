//! Spectral realization of the convolution operators on a 2x zero-padded
//! box.
//!
//! The operator `B = (1 - Δ)^{-1}` acts as the Fourier multiplier
//! `1/(1 + |xi|^2)` with `xi` the continuous frequencies of the padded box;
//! the component derivative kernels act as `i xi_k / (1 + |xi|^2)`. Zero
//! padding doubles every axis, so periodic images sit at distance at least
//! `2L` and their exponentially decaying contribution stays below the
//! stated tolerances for data supported in the box.

use once_cell::sync::Lazy;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::grid::Field;

static PLAN_CACHE: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLAN_CACHE.lock().unwrap();
    cache
        .entry((len, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(len)
            } else {
                planner.plan_fft_inverse(len)
            }
        })
        .clone()
}

/// In-place FFT along every axis of an n-dimensional cube of side `p`.
fn fft_all_axes(data: &mut [Complex<f64>], n: usize, p: usize, forward: bool) {
    let fft = plan(p, forward);
    let mut line = vec![Complex::default(); p];
    match n {
        1 => fft.process(data),
        2 => {
            // rows
            for r in 0..p {
                fft.process(&mut data[r * p..(r + 1) * p]);
            }
            // columns
            for c in 0..p {
                for r in 0..p {
                    line[r] = data[r * p + c];
                }
                fft.process(&mut line);
                for r in 0..p {
                    data[r * p + c] = line[r];
                }
            }
        }
        _ => {
            let p2 = p * p;
            // axis 2 (contiguous)
            for r in 0..p2 {
                fft.process(&mut data[r * p..(r + 1) * p]);
            }
            // axis 1
            for a in 0..p {
                for c in 0..p {
                    for b in 0..p {
                        line[b] = data[a * p2 + b * p + c];
                    }
                    fft.process(&mut line);
                    for b in 0..p {
                        data[a * p2 + b * p + c] = line[b];
                    }
                }
            }
            // axis 0
            for b in 0..p {
                for c in 0..p {
                    for a in 0..p {
                        line[a] = data[a * p2 + b * p + c];
                    }
                    fft.process(&mut line);
                    for a in 0..p {
                        data[a * p2 + b * p + c] = line[a];
                    }
                }
            }
        }
    }
}

/// Applies a Fourier-multiplier convolution to a field on the 2x padded box.
///
/// `multiplier(xi, at_nyquist)` receives the frequency vector of one padded
/// mode and whether any component sits on the (unpaired) Nyquist line.
pub fn apply_multiplier(
    f: &Field,
    multiplier: impl Fn(&[f64], bool) -> Complex<f64>,
) -> Field {
    let d = f.domain;
    let n = d.dimension();
    let m = d.points_per_dim();
    let h = d.spacing();
    let p = 2 * m;
    let offset = m / 2;

    let total = p.pow(n as u32);
    let mut buf = vec![Complex::new(0.0, 0.0); total];

    // place the box in the center of the padded cube
    for i in d.indices() {
        let mi = d.multi_index(i);
        let mut flat = 0usize;
        for &mik in &mi[..n] {
            flat = flat * p + (mik + offset);
        }
        buf[flat] = Complex::new(f.values[i], 0.0);
    }

    fft_all_axes(&mut buf, n, p, true);

    // frequency table for one axis
    let mut xi = vec![0.0f64; p];
    for (k, x) in xi.iter_mut().enumerate() {
        let freq = if k < p / 2 { k as i64 } else { k as i64 - p as i64 };
        *x = 2.0 * std::f64::consts::PI * freq as f64 / (p as f64 * h);
    }
    let nyquist = p / 2;

    let mut v = [0.0f64; 3];
    for (flat, value) in buf.iter_mut().enumerate() {
        let mut rest = flat;
        let mut at_nyq = false;
        for k in (0..n).rev() {
            let idx = rest % p;
            rest /= p;
            v[k] = xi[idx];
            at_nyq |= idx == nyquist;
        }
        *value *= multiplier(&v[..n], at_nyq);
    }

    fft_all_axes(&mut buf, n, p, false);

    let norm = 1.0 / total as f64;
    let mut out = Field::zeros(d);
    out.time = f.time;
    out.gauge = f.gauge;
    for i in d.indices() {
        let mi = d.multi_index(i);
        let mut flat = 0usize;
        for &mik in &mi[..n] {
            flat = flat * p + (mik + offset);
        }
        out.values[i] = buf[flat].re * norm;
    }
    out.refresh_state();
    out
}

/// `B f` through the multiplier `1/(1 + |xi|^2)`.
pub fn apply_b_spectral(f: &Field) -> Field {
    apply_multiplier(f, |xi, _| {
        let s: f64 = xi.iter().map(|v| v * v).sum();
        Complex::new(1.0 / (1.0 + s), 0.0)
    })
}

/// Convolution against the component derivative kernel `∂_axis B`, realized
/// by the multiplier `i xi_axis / (1 + |xi|^2)` (zeroed on the unpaired
/// Nyquist line to keep the output real).
pub fn apply_grad_b_spectral(f: &Field, axis: usize) -> Field {
    apply_multiplier(f, move |xi, at_nyq| {
        if at_nyq {
            return Complex::new(0.0, 0.0);
        }
        let s: f64 = xi.iter().map(|v| v * v).sum();
        Complex::new(0.0, xi[axis] / (1.0 + s))
    })
}
