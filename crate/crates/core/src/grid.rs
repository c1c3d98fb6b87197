//! Uniform periodic grid and Fourier spectral differentiation.
//!
//! Fields live on `x_i = -L + 2L i / N`, `i = 0..N`. Wavenumbers are stored in
//! transform order (non-negative frequencies first, then negative ones). The
//! Nyquist entry carries `k = -pi N / (2L)` and is dropped for odd-order
//! derivatives so that real fields stay real.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest admissible number of grid points.
pub const MIN_POINTS: usize = 16;

/// Uniform periodic grid on `[-L, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    half_length: f64,
    n_points: usize,
    nodes: Vec<f64>,
    wavenumbers: Vec<f64>,
}

impl GridSpec {
    pub fn new(half_length: f64, n_points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half_length must be positive, got {half_length}"
            )));
        }
        if !n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid("n_points must be even".into()));
        }
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "n_points must be at least {MIN_POINTS}, got {n_points}"
            )));
        }

        let spacing = 2.0 * half_length / n_points as f64;
        let nodes = (0..n_points)
            .map(|i| -half_length + spacing * i as f64)
            .collect();
        let half = n_points / 2;
        let wavenumbers = (0..n_points)
            .map(|i| {
                let n = if i < half {
                    i as f64
                } else {
                    i as f64 - n_points as f64
                };
                PI * n / half_length
            })
            .collect();

        Ok(Self {
            half_length,
            n_points,
            nodes,
            wavenumbers,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n_points as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Wavenumbers in transform order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Largest wavenumber magnitude, attained by the Nyquist mode.
    pub fn max_wavenumber(&self) -> f64 {
        PI * (self.n_points / 2) as f64 / self.half_length
    }

    pub(crate) fn check_len(&self, found: usize) -> Result<()> {
        if found == self.n_points {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: self.n_points,
                found,
            })
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L = {}, N = {}", self.half_length, self.n_points)
    }
}

/// Cached FFT plans and derivative multipliers for one grid.
///
/// Cheap to clone; the plans are shared.
#[derive(Clone)]
pub struct SpectralOps {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    first: Vec<Complex64>,
    second: Vec<f64>,
    scale: f64,
}

impl fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralOps")
            .field("len", &self.second.len())
            .finish_non_exhaustive()
    }
}

impl SpectralOps {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let nyquist = n / 2;
        let first = grid
            .wavenumbers()
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                if i == nyquist {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k)
                }
            })
            .collect();
        let second = grid.wavenumbers().iter().map(|&k| -k * k).collect();
        Self {
            forward,
            inverse,
            first,
            second,
            scale: 1.0 / n as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.second.len()
    }

    pub fn is_empty(&self) -> bool {
        self.second.is_empty()
    }

    /// Scratch length needed by [`SpectralOps::derivative_with_scratch`].
    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// Overwrites `buf` with its derivative of the given order.
    pub fn derivative_in_place(&self, buf: &mut [Complex64], order: u32) -> Result<()> {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len()];
        self.derivative_with_scratch(buf, order, &mut scratch)
    }

    /// Allocation-free variant of [`SpectralOps::derivative_in_place`];
    /// `scratch` must hold at least [`SpectralOps::scratch_len`] entries.
    pub fn derivative_with_scratch(
        &self,
        buf: &mut [Complex64],
        order: u32,
        scratch: &mut [Complex64],
    ) -> Result<()> {
        if buf.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: buf.len(),
            });
        }
        if !(order == 1 || order == 2) {
            return Err(Error::InvalidOrder(order));
        }
        self.forward.process_with_scratch(buf, scratch);
        if order == 1 {
            for (v, m) in buf.iter_mut().zip(&self.first) {
                *v *= m * self.scale;
            }
        } else {
            for (v, m) in buf.iter_mut().zip(&self.second) {
                *v *= m * self.scale;
            }
        }
        self.inverse.process_with_scratch(buf, scratch);
        Ok(())
    }

    pub fn derivative(&self, field: &[Complex64], order: u32) -> Result<Vec<Complex64>> {
        let mut out = field.to_vec();
        self.derivative_in_place(&mut out, order)?;
        Ok(out)
    }

    /// Forward transform followed by the normalized inverse.
    pub fn round_trip(&self, field: &[Complex64]) -> Vec<Complex64> {
        let mut buf = field.to_vec();
        self.forward.process(&mut buf);
        self.inverse.process(&mut buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
        buf
    }
}

pub fn make_grid(half_length: f64, n_points: usize) -> Result<GridSpec> {
    GridSpec::new(half_length, n_points)
}

/// `order`-th spectral derivative of `field`. Plans a fresh transform on every
/// call; hold a [`SpectralOps`] for repeated use.
pub fn spectral_derivative(
    field: &[Complex64],
    order: u32,
    grid: &GridSpec,
) -> Result<Vec<Complex64>> {
    grid.check_len(field.len())?;
    SpectralOps::new(grid).derivative(field, order)
}

/// Dense second-derivative collocation matrix.
///
/// Uses the closed-form circulant entries of the trigonometric interpolant,
/// which include the Nyquist mode with weight `-k^2` exactly as the FFT path
/// does.
pub fn diff_matrix_2(grid: &GridSpec) -> Mat<Complex64> {
    let n = grid.len();
    let h = 2.0 * PI / n as f64;
    let stretch = (PI / grid.half_length()).powi(2);
    let column: Vec<f64> = (0..n)
        .map(|m| {
            if m == 0 {
                -(PI * PI) / (3.0 * h * h) - 1.0 / 6.0
            } else {
                let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
                let s = (0.5 * m as f64 * h).sin();
                sign / (2.0 * s * s)
            }
        })
        .map(|c| c * stretch)
        .collect();
    Mat::from_fn(n, n, |i, j| {
        let m = (i + n - j) % n;
        Complex64::new(column[m], 0.0)
    })
}
