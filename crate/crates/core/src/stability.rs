//! Linearized stability of the exact solitons.
//!
//! Perturbing `psi_j = (phi_j + eps (f_j e^{i delta t} + g_j^* e^{-i delta^* t})) e^{i nu_j t}`
//! and keeping first order in `eps` gives a `4N x 4N` eigenproblem in the
//! unknowns ordered `(f_1, g_1, f_2, g_2)`. A positive `|Im delta|` means
//! exponential growth.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{evd_cplx, evd_scratch, ComputeEigenvectors};
use faer::{Mat, Par};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{diff_matrix_2, GridSpec};
use crate::model::{solve_amplitudes, AmplitudeMode, Component, ModelParams, SolitonSolution};

/// Largest matrix order accepted by [`eigenspectrum`].
pub const MAX_ORDER: usize = 4096;
pub const DEFAULT_THRESHOLD: f64 = 1e-4;
/// Floor applied before taking `log10` of map values.
pub const LOG_FLOOR: f64 = 1e-8;

/// Dense linearization matrix with blocks ordered `(f_1, g_1, f_2, g_2)`.
#[derive(Debug, Clone)]
pub struct StabilityMatrix {
    matrix: Mat<Complex64>,
    n_points: usize,
    half_length: f64,
}

impl StabilityMatrix {
    pub fn matrix(&self) -> &Mat<Complex64> {
        &self.matrix
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.order() {
            return Err(Error::LengthMismatch {
                expected: self.order(),
                found: v.len(),
            });
        }
        let m = &self.matrix;
        Ok((0..self.order())
            .map(|i| (0..self.order()).map(|j| m[(i, j)] * v[j]).sum())
            .collect())
    }

    /// Sup-norms of the operator applied to the two phase-rotation modes
    /// `(phi_1, -phi_1^*, 0, 0)` and `(0, 0, phi_2, -phi_2^*)`.
    pub fn zero_mode_residuals(&self, fields: [&[Complex64]; 2]) -> Result<[f64; 2]> {
        let n = self.n_points;
        let mut out = [0.0; 2];
        for (j, field) in fields.iter().enumerate() {
            if field.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: field.len(),
                });
            }
            let mut v = vec![Complex64::new(0.0, 0.0); 4 * n];
            let f_block = 2 * j * n;
            for (i, phi) in field.iter().enumerate() {
                v[f_block + i] = *phi;
                v[f_block + n + i] = -phi.conj();
            }
            out[j] = self.apply(&v)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        Ok(out)
    }
}

/// Builds the linearization about the sampled stationary fields.
pub fn assemble_stability_matrix(
    fields: [&[Complex64]; 2],
    params: &ModelParams,
    grid: &GridSpec,
) -> Result<StabilityMatrix> {
    let n = grid.len();
    for f in fields {
        grid.check_len(f.len())?;
    }
    for c in &params.components {
        if !c.propagation.is_finite() {
            return Err(Error::InvalidParameter(
                "propagation constant must be finite".into(),
            ));
        }
    }
    let [p1, p2] = fields;
    let [c1, c2] = params.components;
    let d2 = diff_matrix_2(grid);
    let mut m = Mat::<Complex64>::zeros(4 * n, 4 * n);

    // Differentiation parts of L_1, -L_1^*, L_2, -L_2^*; D2 is real.
    for (block, sign) in [(0, 1.0), (1, -1.0), (2, 1.0), (3, -1.0)] {
        let off = block * n;
        for j in 0..n {
            for i in 0..n {
                m[(off + i, off + j)] = d2[(i, j)] * sign;
            }
        }
    }

    let (a1, a2) = (c1.nonlinearity, c2.nonlinearity);
    for (i, &x) in grid.nodes().iter().enumerate() {
        let (f1, f2) = (p1[i], p2[i]);
        let (f1c, f2c) = (f1.conj(), f2.conj());
        let (n1, n2) = (f1.norm_sqr(), f2.norm_sqr());
        let l1 = c1.potential(x) - c1.propagation + 2.0 * a1 * n1 + a1 * n2;
        let l2 = c2.potential(x) - c2.propagation + a2 * n1 + 2.0 * a2 * n2;

        let rows: [[Complex64; 4]; 4] = [
            [l1, a1 * f1 * f1, a1 * f1 * f2c, a1 * f1 * f2],
            [-a1 * f1c * f1c, -l1.conj(), -a1 * f1c * f2c, -a1 * f1c * f2],
            [a2 * f1c * f2, a2 * f1 * f2, l2, a2 * f2 * f2],
            [-a2 * f1c * f2c, -a2 * f1 * f2c, -a2 * f2c * f2c, -l2.conj()],
        ];
        for (r, row) in rows.iter().enumerate() {
            for (c, value) in row.iter().enumerate() {
                m[(r * n + i, c * n + i)] += value;
            }
        }
    }

    Ok(StabilityMatrix {
        matrix: m,
        n_points: n,
        half_length: grid.half_length(),
    })
}

/// Samples `sol` on `grid` and assembles its linearization.
pub fn assemble_for_solution(sol: &SolitonSolution, grid: &GridSpec) -> Result<StabilityMatrix> {
    let [f1, f2] = sol.sample(grid);
    assemble_stability_matrix([&f1, &f2], &sol.params, grid)
}

fn check_order(n: usize) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::MatrixTooLarge {
            order: n,
            limit: MAX_ORDER,
        });
    }
    Ok(())
}

fn evd(a: &Mat<Complex64>, vectors: bool) -> Result<(Vec<Complex64>, Option<Mat<Complex64>>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidParameter(format!(
            "eigenproblem needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    check_order(n)?;
    if n == 0 {
        return Ok((Vec::new(), vectors.then(|| Mat::zeros(0, 0))));
    }
    let want = if vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let par = Par::Seq;
    let mut s = Diag::<Complex64>::zeros(n);
    let mut u = vectors.then(|| Mat::<Complex64>::zeros(n, n));
    let mut mem = MemBuffer::new(evd_scratch::<Complex64>(
        n,
        ComputeEigenvectors::No,
        want,
        par,
        Default::default(),
    ));
    evd_cplx(
        a.as_ref(),
        s.as_mut(),
        None,
        u.as_mut().map(|u| u.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|e| Error::ConvergenceFailure(format!("{e:?}")))?;
    let eigs: Vec<Complex64> = s.column_vector().iter().copied().collect();
    if eigs.iter().any(|z| !z.is_finite()) {
        return Err(Error::ConvergenceFailure("non-finite eigenvalue".into()));
    }
    Ok((eigs, u))
}

/// All eigenvalues of a dense complex matrix (Hessenberg reduction followed by
/// shifted QR). Runs single-threaded so results do not depend on scheduling.
pub fn eigenvalues(a: &Mat<Complex64>) -> Result<Vec<Complex64>> {
    Ok(evd(a, false)?.0)
}

/// Eigenvalues with right eigenvectors stored column-wise.
pub fn eigen_decomposition(a: &Mat<Complex64>) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    let (eigs, vecs) = evd(a, true)?;
    Ok((eigs, vecs.unwrap_or_else(|| Mat::zeros(0, 0))))
}

pub fn eigenspectrum(mat: &StabilityMatrix) -> Result<Vec<Complex64>> {
    eigenvalues(&mat.matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stable,
    Unstable,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub n_points: usize,
    pub half_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Complex64>,
    /// `max |Im delta|` over `eigenvalues`.
    pub max_im: f64,
    /// The eigenvalue attaining `max_im`.
    pub dominant: Complex64,
    pub classification: Classification,
    pub threshold: f64,
    pub zero_mode_residuals: Option<[f64; 2]>,
    pub resolution: Option<Resolution>,
}

impl StabilityReport {
    /// The `k` eigenvalues of smallest modulus, ascending.
    pub fn smallest(&self, k: usize) -> Vec<Complex64> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        v.truncate(k);
        v
    }
}

pub fn classify(eigs: Vec<Complex64>, threshold: f64) -> Result<StabilityReport> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let dominant = *eigs
        .iter()
        .max_by(|a, b| a.im.abs().total_cmp(&b.im.abs()))
        .ok_or(Error::EmptySpectrum)?;
    let max_im = dominant.im.abs();
    let classification = if max_im <= threshold {
        Classification::Stable
    } else {
        Classification::Unstable
    };
    Ok(StabilityReport {
        eigenvalues: eigs,
        max_im,
        dominant,
        classification,
        threshold,
        zero_mode_residuals: None,
        resolution: None,
    })
}

/// Assemble, eigensolve and classify one exact soliton.
pub fn analyze(sol: &SolitonSolution, grid: &GridSpec, threshold: f64) -> Result<StabilityReport> {
    let [f1, f2] = sol.sample(grid);
    let mat = assemble_stability_matrix([&f1, &f2], &sol.params, grid)?;
    let mut report = classify(eigenspectrum(&mat)?, threshold)?;
    report.zero_mode_residuals = Some(mat.zero_mode_residuals([&f1, &f2])?);
    report.resolution = Some(Resolution {
        n_points: grid.len(),
        half_length: grid.half_length(),
    });
    Ok(report)
}

/// Largest distance from an eigenvalue `z` to the nearest `-conj(w)` in the
/// same list. Zero when the spectrum is symmetric under `delta -> -delta^*`.
pub fn reflection_mismatch(eigs: &[Complex64]) -> f64 {
    eigs.iter()
        .map(|z| {
            let target = -z.conj();
            eigs.iter()
                .map(|w| (w - target).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Evenly spaced sample points, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidParameter(format!(
                "axis needs at least 2 points, got {count}"
            )));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidParameter(format!(
                "axis range [{min}, {max}] is empty or not finite"
            )));
        }
        Ok(Self { min, max, count })
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.max
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    NoRealAmplitude,
    EigFailed,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NoRealAmplitude => "no_real_amplitude",
            CellStatus::EigFailed => "eig_failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCell {
    pub depth: f64,
    pub gain_loss: f64,
    /// `NaN` unless `status` is `Ok`.
    pub max_im: f64,
    pub log10_max_im: f64,
    pub status: CellStatus,
}

impl MapCell {
    pub fn classification(&self, threshold: f64) -> Option<Classification> {
        (self.status == CellStatus::Ok).then_some(if self.max_im <= threshold {
            Classification::Stable
        } else {
            Classification::Unstable
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    pub depth_axis: Axis,
    pub gain_loss_axis: Axis,
    /// Outer index over gain-loss values, inner over depths.
    pub cells: Vec<MapCell>,
}

impl StabilityMap {
    pub fn cell(&self, depth_index: usize, gain_loss_index: usize) -> &MapCell {
        &self.cells[gain_loss_index * self.depth_axis.count + depth_index]
    }
}

/// Sweeps `max |Im delta|` over tied `(V_1 = V_2, W_1 = W_2)` with the
/// nonlinearities of `nonlinearity`. Cells run in parallel on the current
/// rayon pool; the result is independent of scheduling.
pub fn scan_map(
    depth_axis: Axis,
    gain_loss_axis: Axis,
    nonlinearity: [f64; 2],
    mode: AmplitudeMode,
    grid: &GridSpec,
) -> Result<StabilityMap> {
    let [a1, a2] = nonlinearity;
    if a1 == 0.0 || a2 == 0.0 {
        return Err(Error::ZeroNonlinearity {
            component: if a1 == 0.0 { 1 } else { 2 },
        });
    }
    if a1 != a2 {
        return Err(Error::InvalidParameter(
            "tied potentials need equal nonlinearities for a consistent amplitude constraint"
                .into(),
        ));
    }
    check_order(4 * grid.len())?;

    let n_depth = depth_axis.count;
    let cells = (0..n_depth * gain_loss_axis.count)
        .into_par_iter()
        .map(|idx| {
            let depth = depth_axis.value(idx % n_depth);
            let gain_loss = gain_loss_axis.value(idx / n_depth);
            let params = ModelParams::new(
                Component::new(a1, depth, gain_loss),
                Component::new(a2, depth, gain_loss),
            );
            map_cell(&params, mode, grid)
        })
        .collect();

    Ok(StabilityMap {
        depth_axis,
        gain_loss_axis,
        cells,
    })
}

fn map_cell(params: &ModelParams, mode: AmplitudeMode, grid: &GridSpec) -> MapCell {
    let [c1, _] = params.components;
    let sentinel = |status| MapCell {
        depth: c1.depth,
        gain_loss: c1.gain_loss,
        max_im: f64::NAN,
        log10_max_im: f64::NAN,
        status,
    };
    let sol = match solve_amplitudes(params, mode) {
        Ok(sol) => sol,
        Err(_) => return sentinel(CellStatus::NoRealAmplitude),
    };
    let eigs = assemble_for_solution(&sol, grid).and_then(|m| eigenspectrum(&m));
    match eigs {
        Ok(eigs) if !eigs.is_empty() => {
            let max_im = eigs.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            MapCell {
                depth: c1.depth,
                gain_loss: c1.gain_loss,
                max_im,
                log10_max_im: max_im.max(LOG_FLOOR).log10(),
                status: CellStatus::Ok,
            }
        }
        _ => sentinel(CellStatus::EigFailed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::solve_amplitudes;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let d = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0), c(0.0, 0.0)];
        let m = Mat::from_fn(4, 4, |i, j| if i == j { d[i] } else { c(0.0, 0.0) });
        let got = sorted(eigenvalues(&m).unwrap());
        let want = sorted(d.to_vec());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_field_operator_has_real_linear_spectrum() {
        let g = GridSpec::new(10.0, 16).unwrap();
        let zeros = vec![c(0.0, 0.0); 16];
        let p = ModelParams::symmetric(1.0, 0.0, 0.0);
        let mat = assemble_stability_matrix([&zeros, &zeros], &p, &g).unwrap();
        let got = sorted(eigenspectrum(&mat).unwrap());
        let mut want = Vec::new();
        for _ in 0..2 {
            for k in g.wavenumbers() {
                want.push(c(-(1.0 + k * k), 0.0));
                want.push(c(1.0 + k * k, 0.0));
            }
        }
        let want = sorted(want);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-8, "{g} vs {w}");
        }
    }

    #[test]
    fn phase_modes_are_annihilated() {
        let g = GridSpec::new(30.0, 384).unwrap();
        let p = ModelParams::symmetric(1.0, 1.0, 0.25);
        let sol = solve_amplitudes(&p, AmplitudeMode::FixedFirst(0.5)).unwrap();
        let [f1, f2] = sol.sample(&g);
        let mat = assemble_stability_matrix([&f1, &f2], &p, &g).unwrap();
        let r = mat.zero_mode_residuals([&f1, &f2]).unwrap();
        assert!(r[0] < 1e-8 && r[1] < 1e-8, "{r:?}");
    }

    #[test]
    fn classify_edge_cases() {
        assert!(matches!(classify(vec![], 1e-4), Err(Error::EmptySpectrum)));
        assert!(classify(vec![c(1.0, 0.0)], 0.0).is_err());
        let r = classify(vec![c(1.0, 1e-5), c(-2.0, -3e-4)], 1e-4).unwrap();
        assert_eq!(r.max_im, 3e-4);
        assert_eq!(r.dominant, c(-2.0, -3e-4));
        assert_eq!(r.classification, Classification::Unstable);
        let r = classify(vec![c(1.0, 1e-5), c(-2.0, -1e-4)], 1e-4).unwrap();
        assert_eq!(r.classification, Classification::Stable);
    }

    #[test]
    fn oversized_matrix_is_rejected() {
        let m = Mat::<Complex64>::zeros(MAX_ORDER + 4, MAX_ORDER + 4);
        assert!(matches!(eigenvalues(&m), Err(Error::MatrixTooLarge { .. })));
    }

    #[test]
    fn axis_values() {
        let a = Axis::new(0.0, 1.0, 5).unwrap();
        assert_eq!(a.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(Axis::new(0.0, 1.0, 1).is_err());
        assert!(Axis::new(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn small_map_layout_and_sentinels() {
        let g = GridSpec::new(20.0, 32).unwrap();
        let depth = Axis::new(0.5, 3.0, 3).unwrap();
        let gain = Axis::new(0.0, 0.5, 2).unwrap();
        let map = scan_map(depth, gain, [1.0, 1.0], AmplitudeMode::FixedFirst(0.5), &g).unwrap();
        assert_eq!(map.cells.len(), 6);
        assert_eq!(map.cell(2, 1).depth, 3.0);
        assert_eq!(map.cell(2, 1).gain_loss, 0.5);
        assert_eq!(map.cells[1].depth, 1.75);
        assert_eq!(map.cells[1].gain_loss, 0.0);
        // V = 3 gives a negative constrained total in the focusing case.
        assert_eq!(map.cell(2, 0).status, CellStatus::NoRealAmplitude);
        assert!(map.cell(2, 0).max_im.is_nan());
        assert_eq!(map.cell(0, 0).status, CellStatus::Ok);
        assert!(map.cell(0, 0).log10_max_im >= LOG_FLOOR.log10());
    }

    #[test]
    fn map_rejects_mismatched_nonlinearities() {
        let g = GridSpec::new(20.0, 32).unwrap();
        let ax = Axis::new(0.0, 1.0, 2).unwrap();
        assert!(scan_map(ax, ax, [1.0, 0.5], AmplitudeMode::Equal, &g).is_err());
        assert!(scan_map(ax, ax, [0.0, 0.0], AmplitudeMode::Equal, &g).is_err());
    }
}
