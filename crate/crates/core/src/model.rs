//! Scarf-II potentials and the analytic bright-soliton family.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SpectralOps};

/// Default relative tolerance on agreement of the two amplitude constraints.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// Physical parameters of one condensate component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    /// Cubic nonlinearity coefficient (positive is focusing).
    pub nonlinearity: f64,
    /// Depth of the real `sech^2` well.
    pub depth: f64,
    /// Strength of the odd `sech * tanh` gain-loss profile.
    pub gain_loss: f64,
    pub propagation: f64,
}

impl Component {
    pub fn new(nonlinearity: f64, depth: f64, gain_loss: f64) -> Self {
        Self {
            nonlinearity,
            depth,
            gain_loss,
            propagation: 1.0,
        }
    }

    pub fn potential(&self, x: f64) -> Complex64 {
        scarf_potential(self.depth, self.gain_loss, x)
    }

    /// Value of the constrained total `A1^2 + A2^2` implied by this component.
    fn constrained_total(&self) -> f64 {
        let w = self.gain_loss;
        (18.0 + w * w - 9.0 * self.depth) / (9.0 * self.nonlinearity)
    }
}

/// Parameters of both components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub components: [Component; 2],
}

impl ModelParams {
    pub fn new(first: Component, second: Component) -> Self {
        Self {
            components: [first, second],
        }
    }

    /// Both components share the same nonlinearity, depth and gain-loss.
    pub fn symmetric(nonlinearity: f64, depth: f64, gain_loss: f64) -> Self {
        let c = Component::new(nonlinearity, depth, gain_loss);
        Self::new(c, c)
    }

    pub fn first(&self) -> &Component {
        &self.components[0]
    }

    pub fn second(&self) -> &Component {
        &self.components[1]
    }
}

/// How the single free amplitude of the soliton family is pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeMode {
    FixedFirst(f64),
    Equal,
}

/// Exact stationary state `phi_j(x) = A_j sech(x) exp(i W_j/3 atan(sinh x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonSolution {
    pub params: ModelParams,
    pub amplitudes: [f64; 2],
    /// Relative disagreement between the two amplitude constraints.
    pub constraint_mismatch: f64,
}

impl SolitonSolution {
    pub fn phase(&self, component: usize, x: f64) -> f64 {
        self.params.components[component].gain_loss / 3.0 * x.sinh().atan()
    }

    pub fn profile(&self, component: usize, x: f64) -> Complex64 {
        let amp = self.amplitudes[component] / x.cosh();
        Complex64::from_polar(amp, self.phase(component, x))
    }

    /// `A_1^2 + A_2^2`.
    pub fn total_intensity(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    pub fn sample(&self, grid: &GridSpec) -> [Vec<Complex64>; 2] {
        [0, 1].map(|j| grid.nodes().iter().map(|&x| self.profile(j, x)).collect())
    }
}

/// `V sech^2(x) + i W sech(x) tanh(x)`.
pub fn scarf_potential(depth: f64, gain_loss: f64, x: f64) -> Complex64 {
    let sech = 1.0 / x.cosh();
    Complex64::new(depth * sech * sech, gain_loss * sech * x.tanh())
}

pub fn solve_amplitudes(params: &ModelParams, mode: AmplitudeMode) -> Result<SolitonSolution> {
    solve_amplitudes_with_tolerance(params, mode, CONSTRAINT_TOLERANCE)
}

/// Like [`solve_amplitudes`] with a caller-chosen consistency tolerance.
///
/// The constrained total is always taken from the first component; the
/// mismatch against the second is recorded on the solution.
pub fn solve_amplitudes_with_tolerance(
    params: &ModelParams,
    mode: AmplitudeMode,
    tolerance: f64,
) -> Result<SolitonSolution> {
    for (j, c) in params.components.iter().enumerate() {
        if c.nonlinearity == 0.0 {
            return Err(Error::ZeroNonlinearity { component: j + 1 });
        }
    }
    let [c1, c2] = params.components;
    if c1.propagation != 1.0 || c2.propagation != 1.0 {
        return Err(Error::NonUnitPropagation(c1.propagation, c2.propagation));
    }

    let first = c1.constrained_total();
    let second = c2.constrained_total();
    let relative = (first - second).abs() / first.abs().max(second.abs()).max(f64::MIN_POSITIVE);
    if relative > tolerance {
        return Err(Error::InconsistentConstraints {
            first,
            second,
            relative,
        });
    }

    let total = first;
    if total < 0.0 {
        return Err(Error::NoRealAmplitude(format!(
            "constrained A1^2 + A2^2 = {total} is negative"
        )));
    }

    let amplitudes = match mode {
        AmplitudeMode::FixedFirst(a1) => {
            if !(a1.is_finite() && a1 >= 0.0) {
                return Err(Error::InvalidAmplitude(a1));
            }
            let rest = total - a1 * a1;
            if rest < 0.0 {
                return Err(Error::NoRealAmplitude(format!(
                    "A1 = {a1} exceeds the constrained total {total}"
                )));
            }
            [a1, rest.sqrt()]
        }
        AmplitudeMode::Equal => {
            let a = (0.5 * total).sqrt();
            [a, a]
        }
    };

    Ok(SolitonSolution {
        params: *params,
        amplitudes,
        constraint_mismatch: relative,
    })
}

pub fn sample_soliton(sol: &SolitonSolution, grid: &GridSpec) -> [Vec<Complex64>; 2] {
    sol.sample(grid)
}

/// Sup-norm residuals of the stationary equations
/// `phi'' + a (|phi_1|^2 + |phi_2|^2) phi + U phi - nu phi = 0`.
pub fn stationary_residual(
    fields: [&[Complex64]; 2],
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<[f64; 2]> {
    for f in fields {
        grid.check_len(f.len())?;
    }
    let ops = SpectralOps::new(grid);
    let density: Vec<f64> = fields[0]
        .iter()
        .zip(fields[1])
        .map(|(u, v)| u.norm_sqr() + v.norm_sqr())
        .collect();

    let mut out = [0.0; 2];
    for (j, c) in params.components.iter().enumerate() {
        let field = fields[j];
        let second = ops.derivative(field, 2)?;
        out[j] = grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let local = c.nonlinearity * density[i] + c.potential(x) - c.propagation;
                (second[i] + local * field[i]).norm()
            })
            .fold(0.0, f64::max);
    }
    Ok(out)
}

/// Rectangle-rule power `dx * sum |phi|^2` on the periodic grid.
pub fn power(field: &[Complex64], grid: &GridSpec) -> Result<f64> {
    grid.check_len(field.len())?;
    Ok(grid.spacing() * field.iter().map(|v| v.norm_sqr()).sum::<f64>())
}

/// Local power flux `(i/2)(phi phi_x^* - phi^* phi_x)`, which reduces to
/// `Im(phi^* phi_x)`.
pub fn poynting(field: &[Complex64], grid: &GridSpec) -> Result<Vec<f64>> {
    grid.check_len(field.len())?;
    let dx = SpectralOps::new(grid).derivative(field, 1)?;
    Ok(field
        .iter()
        .zip(&dx)
        .map(|(f, d)| (f.conj() * d).im)
        .collect())
}
