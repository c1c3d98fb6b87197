//! Time integration of the coupled equations
//! `psi_j,t = i [psi_j'' + a_j (|psi_1|^2 + |psi_2|^2) psi_j + U_j psi_j]`
//! with classical RK4 on the Fourier collocation grid.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SpectralOps};
use crate::model::{power, ModelParams};

/// Upper bound on `dt * k_max^2` (RK4 imaginary-axis stability interval is
/// `2 sqrt 2`).
pub const RK4_STABILITY_LIMIT: f64 = 2.8;
pub const BLOWUP_AMPLITUDE: f64 = 1e6;
pub const RAMP_END: f64 = 500.0;
pub const HOLD_END: f64 = 1500.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_NOISE: f64 = 0.05;
pub const DEFAULT_SAMPLE_EVERY: usize = 100;

type Fields = [Vec<Complex64>; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub fields: Fields,
}

impl FieldState {
    pub fn new(t: f64, fields: Fields) -> Result<Self> {
        if fields[0].len() != fields[1].len() {
            return Err(Error::LengthMismatch {
                expected: fields[0].len(),
                found: fields[1].len(),
            });
        }
        Ok(Self { t, fields })
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().flatten().all(|z| z.is_finite())
    }

    pub fn peak(&self, component: usize) -> f64 {
        self.fields[component]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Smooth switch-on: a half-period sine ramp from `initial` to `target` over
/// `(0, ramp_end)`, then constant up to `hold_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledParam {
    pub initial: f64,
    pub target: f64,
    pub ramp_end: f64,
    pub hold_end: f64,
}

impl ScheduledParam {
    pub fn new(initial: f64, target: f64) -> Self {
        Self {
            initial,
            target,
            ramp_end: RAMP_END,
            hold_end: HOLD_END,
        }
    }

    pub fn with_times(initial: f64, target: f64, ramp_end: f64, hold_end: f64) -> Result<Self> {
        if !(ramp_end > 0.0 && ramp_end < hold_end && hold_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "schedule needs 0 < ramp_end < hold_end, got {ramp_end} and {hold_end}"
            )));
        }
        Ok(Self {
            initial,
            target,
            ramp_end,
            hold_end,
        })
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        schedule_value(self, t)
    }
}

pub fn schedule_value(p: &ScheduledParam, t: f64) -> Result<f64> {
    if !(0.0..=p.hold_end).contains(&t) {
        return Err(Error::ScheduleOutOfRange { t, end: p.hold_end });
    }
    Ok(if t == 0.0 {
        p.initial
    } else if t < p.ramp_end {
        let phase = std::f64::consts::PI * t / p.ramp_end - std::f64::consts::FRAC_PI_2;
        p.initial + 0.5 * (p.target - p.initial) * (1.0 + phase.sin())
    } else {
        p.target
    })
}

/// A model parameter that can follow a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamKey {
    Nonlinearity1,
    Nonlinearity2,
    Depth1,
    Depth2,
    GainLoss1,
    GainLoss2,
}

impl ParamKey {
    pub const ALL: [ParamKey; 6] = [
        ParamKey::Nonlinearity1,
        ParamKey::Nonlinearity2,
        ParamKey::Depth1,
        ParamKey::Depth2,
        ParamKey::GainLoss1,
        ParamKey::GainLoss2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParamKey::Nonlinearity1 => "a1",
            ParamKey::Nonlinearity2 => "a2",
            ParamKey::Depth1 => "v1",
            ParamKey::Depth2 => "v2",
            ParamKey::GainLoss1 => "w1",
            ParamKey::GainLoss2 => "w2",
        }
    }

    fn slot<'a>(&self, params: &'a mut ModelParams) -> &'a mut f64 {
        let [c1, c2] = &mut params.components;
        match self {
            ParamKey::Nonlinearity1 => &mut c1.nonlinearity,
            ParamKey::Nonlinearity2 => &mut c2.nonlinearity,
            ParamKey::Depth1 => &mut c1.depth,
            ParamKey::Depth2 => &mut c2.depth,
            ParamKey::GainLoss1 => &mut c1.gain_loss,
            ParamKey::GainLoss2 => &mut c2.gain_loss,
        }
    }
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        ParamKey::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown model parameter `{s}`")))
    }
}

/// Static parameters plus an optional schedule per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Drive {
    pub base: ModelParams,
    pub schedules: BTreeMap<ParamKey, ScheduledParam>,
}

impl Drive {
    pub fn fixed(base: ModelParams) -> Self {
        Self {
            base,
            schedules: BTreeMap::new(),
        }
    }

    pub fn with_schedule(mut self, key: ParamKey, schedule: ScheduledParam) -> Self {
        self.schedules.insert(key, schedule);
        self
    }

    pub fn is_fixed(&self) -> bool {
        self.schedules.is_empty()
    }

    /// Latest time at which every schedule is defined.
    pub fn horizon(&self) -> Option<f64> {
        self.schedules.values().map(|s| s.hold_end).reduce(f64::min)
    }

    pub fn params_at(&self, t: f64) -> Result<ModelParams> {
        let mut params = self.base;
        for (key, schedule) in &self.schedules {
            *key.slot(&mut params) = schedule.value(t)?;
        }
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    Complex,
    Real,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::Complex => "complex",
            NoiseKind::Real => "real",
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(NoiseKind::Complex),
            "real" => Ok(NoiseKind::Real),
            other => Err(Error::InvalidParameter(format!(
                "noise kind must be `complex` or `real`, got `{other}`"
            ))),
        }
    }
}

/// Multiplicative noise `psi_j <- psi_j (1 + xi_j)`, with `xi_j` uniform on
/// `amplitude * ([-1, 1] + i [-1, 1])` (imaginary part omitted for
/// [`NoiseKind::Real`]). Component 1 is drawn before component 2.
pub fn perturb(
    state: &FieldState,
    amplitude: f64,
    seed: u64,
    kind: NoiseKind,
) -> Result<FieldState> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::InvalidParameter(format!(
            "noise amplitude must lie in [0, 1), got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = state.fields.clone().map(|field| {
        field
            .into_iter()
            .map(|z| {
                let re: f64 = rng.random_range(-1.0..=1.0);
                let im: f64 = match kind {
                    NoiseKind::Complex => rng.random_range(-1.0..=1.0),
                    NoiseKind::Real => 0.0,
                };
                z * (Complex64::new(1.0, 0.0) + amplitude * Complex64::new(re, im))
            })
            .collect()
    });
    Ok(FieldState { t: state.t, fields })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Record diagnostics every this many steps (and at the final step).
    pub sample_every: usize,
    /// Field snapshots are taken at the step nearest each requested time.
    pub snapshot_times: Vec<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_end: HOLD_END,
            sample_every: DEFAULT_SAMPLE_EVERY,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub power1: Vec<f64>,
    pub power2: Vec<f64>,
    pub total_power: Vec<f64>,
    pub peak1: Vec<f64>,
    pub peak2: Vec<f64>,
    pub snapshots: Vec<FieldState>,
    /// Time at which the run was halted by a non-finite or runaway field.
    pub blow_up: Option<f64>,
    pub steps_taken: usize,
}

impl EvolutionTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn peaks(&self, component: usize) -> &[f64] {
        if component == 0 {
            &self.peak1
        } else {
            &self.peak2
        }
    }

    fn record(&mut self, state: &FieldState, grid: &GridSpec) -> Result<()> {
        let p1 = power(&state.fields[0], grid)?;
        let p2 = power(&state.fields[1], grid)?;
        self.times.push(state.t);
        self.power1.push(p1);
        self.power2.push(p2);
        self.total_power.push(p1 + p2);
        self.peak1.push(state.peak(0));
        self.peak2.push(state.peak(1));
        Ok(())
    }
}

/// Reusable RK4 integrator bound to one grid.
#[derive(Debug, Clone)]
pub struct Evolver {
    grid: GridSpec,
    ops: SpectralOps,
    sech2: Vec<f64>,
    sech_tanh: Vec<f64>,
    scratch: Vec<Complex64>,
    stages: [Fields; 4],
    probe: Fields,
}

impl Evolver {
    pub fn new(grid: &GridSpec) -> Self {
        let ops = SpectralOps::new(grid);
        let n = grid.len();
        let zero = || {
            [
                vec![Complex64::new(0.0, 0.0); n],
                vec![Complex64::new(0.0, 0.0); n],
            ]
        };
        let sech: Vec<f64> = grid.nodes().iter().map(|x| 1.0 / x.cosh()).collect();
        Self {
            sech2: sech.iter().map(|s| s * s).collect(),
            sech_tanh: sech
                .iter()
                .zip(grid.nodes())
                .map(|(s, x)| s * x.tanh())
                .collect(),
            scratch: vec![Complex64::new(0.0, 0.0); ops.scratch_len()],
            stages: [zero(), zero(), zero(), zero()],
            probe: zero(),
            grid: grid.clone(),
            ops,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `dt * k_max^2` for this grid.
    pub fn stiffness(&self, dt: f64) -> f64 {
        dt.abs() * self.grid.max_wavenumber().powi(2)
    }

    pub fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time step must be nonzero, got {dt}"
            )));
        }
        let product = self.stiffness(dt);
        if product > RK4_STABILITY_LIMIT {
            return Err(Error::StabilityGuard {
                dt,
                product,
                limit: RK4_STABILITY_LIMIT,
            });
        }
        Ok(())
    }

    fn check_fields(&self, fields: &Fields) -> Result<()> {
        for f in fields {
            self.grid.check_len(f.len())?;
        }
        Ok(())
    }

    fn eval_into(
        ops: &SpectralOps,
        sech2: &[f64],
        sech_tanh: &[f64],
        scratch: &mut [Complex64],
        y: &Fields,
        params: &ModelParams,
        out: &mut Fields,
    ) -> Result<()> {
        for (j, c) in params.components.iter().enumerate() {
            out[j].copy_from_slice(&y[j]);
            ops.derivative_with_scratch(&mut out[j], 2, scratch)?;
            for i in 0..y[j].len() {
                let density = y[0][i].norm_sqr() + y[1][i].norm_sqr();
                let local = Complex64::new(
                    c.nonlinearity * density + c.depth * sech2[i],
                    c.gain_loss * sech_tanh[i],
                );
                let d = out[j][i] + local * y[j][i];
                out[j][i] = Complex64::new(-d.im, d.re);
            }
        }
        Ok(())
    }

    /// Time derivative of both components under `params`.
    pub fn rhs(&mut self, fields: [&[Complex64]; 2], params: &ModelParams) -> Result<Fields> {
        let y: Fields = [fields[0].to_vec(), fields[1].to_vec()];
        self.check_fields(&y)?;
        let mut out = y.clone();
        Self::eval_into(
            &self.ops,
            &self.sech2,
            &self.sech_tanh,
            &mut self.scratch,
            &y,
            params,
            &mut out,
        )?;
        Ok(out)
    }

    /// Advances `y` in place from `t` to `t + dt`. Negative `dt` integrates
    /// backwards.
    fn advance(
        &mut self,
        y: &mut Fields,
        t: f64,
        dt: f64,
        drive: &Drive,
        clamp: f64,
    ) -> Result<()> {
        let stage_params = |s: f64| drive.params_at((t + s * dt).min(clamp));
        let p_start = stage_params(0.0)?;
        let p_mid = stage_params(0.5)?;
        let p_end = stage_params(1.0)?;
        let n = y[0].len();
        let Self {
            ops,
            sech2,
            sech_tanh,
            scratch,
            stages,
            probe,
            ..
        } = self;
        let [k1, k2, k3, k4] = stages;

        Self::eval_into(ops, sech2, sech_tanh, scratch, y, &p_start, k1)?;
        for j in 0..2 {
            for i in 0..n {
                probe[j][i] = y[j][i] + 0.5 * dt * k1[j][i];
            }
        }
        Self::eval_into(ops, sech2, sech_tanh, scratch, probe, &p_mid, k2)?;
        for j in 0..2 {
            for i in 0..n {
                probe[j][i] = y[j][i] + 0.5 * dt * k2[j][i];
            }
        }
        Self::eval_into(ops, sech2, sech_tanh, scratch, probe, &p_mid, k3)?;
        for j in 0..2 {
            for i in 0..n {
                probe[j][i] = y[j][i] + dt * k3[j][i];
            }
        }
        Self::eval_into(ops, sech2, sech_tanh, scratch, probe, &p_end, k4)?;
        let w = dt / 6.0;
        for j in 0..2 {
            for i in 0..n {
                y[j][i] += w * (k1[j][i] + 2.0 * (k2[j][i] + k3[j][i]) + k4[j][i]);
            }
        }
        Ok(())
    }

    pub fn rk4_step(&mut self, state: &FieldState, dt: f64, drive: &Drive) -> Result<FieldState> {
        self.check_step(dt)?;
        self.check_fields(&state.fields)?;
        let mut y = state.fields.clone();
        self.advance(&mut y, state.t, dt, drive, f64::INFINITY)?;
        let next = FieldState {
            t: state.t + dt,
            fields: y,
        };
        if !next.is_finite() {
            return Err(Error::BlowUp { t: next.t });
        }
        Ok(next)
    }

    pub fn evolve(
        &mut self,
        initial: &FieldState,
        drive: &Drive,
        opts: &EvolveOptions,
    ) -> Result<EvolutionTrace> {
        let dt = opts.dt;
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        self.check_step(dt)?;
        self.check_fields(&initial.fields)?;
        if opts.sample_every == 0 {
            return Err(Error::InvalidParameter(
                "sample_every must be at least 1".into(),
            ));
        }
        let span = opts.t_end - initial.t;
        if !(span > 0.0 && span.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} must exceed the start time {}",
                opts.t_end, initial.t
            )));
        }
        let steps = (span / dt).round() as usize;
        if ((steps as f64) * dt - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_end - t0 = {span} is not a whole number of steps of {dt}"
            )));
        }
        let clamp = match drive.horizon() {
            Some(h) if opts.t_end > h * (1.0 + 1e-12) => {
                return Err(Error::ScheduleOutOfRange {
                    t: opts.t_end,
                    end: h,
                })
            }
            Some(h) => h,
            None => f64::INFINITY,
        };

        let mut snapshot_steps: Vec<usize> = opts
            .snapshot_times
            .iter()
            .filter(|&&s| s >= initial.t && s <= opts.t_end)
            .map(|&s| ((s - initial.t) / dt).round() as usize)
            .collect();
        snapshot_steps.sort_unstable();
        snapshot_steps.dedup();
        let mut next_snapshot = snapshot_steps.iter().peekable();

        let mut trace = EvolutionTrace::default();
        let mut y = initial.fields.clone();
        let t0 = initial.t;
        for step in 0..=steps {
            let t = t0 + step as f64 * dt;
            if step > 0 {
                let prev = t0 + (step - 1) as f64 * dt;
                self.advance(&mut y, prev, dt, drive, clamp)?;
                trace.steps_taken = step;
                let runaway = y
                    .iter()
                    .flatten()
                    .any(|z| !z.is_finite() || z.norm() > BLOWUP_AMPLITUDE);
                if runaway {
                    trace.blow_up = Some(t);
                    return Ok(trace);
                }
            }
            let sample = step % opts.sample_every == 0 || step == steps;
            let snap = next_snapshot.peek().is_some_and(|&&s| s == step);
            if sample || snap {
                let state = FieldState {
                    t,
                    fields: y.clone(),
                };
                if sample {
                    trace.record(&state, &self.grid)?;
                }
                if snap {
                    next_snapshot.next();
                    trace.snapshots.push(state);
                }
            }
        }
        Ok(trace)
    }
}

pub fn rhs(state: &FieldState, params: &ModelParams, grid: &GridSpec) -> Result<Fields> {
    Evolver::new(grid).rhs([&state.fields[0], &state.fields[1]], params)
}

pub fn rk4_step(state: &FieldState, dt: f64, drive: &Drive, grid: &GridSpec) -> Result<FieldState> {
    Evolver::new(grid).rk4_step(state, dt, drive)
}

pub fn evolve(
    initial: &FieldState,
    drive: &Drive,
    opts: &EvolveOptions,
    grid: &GridSpec,
) -> Result<EvolutionTrace> {
    Evolver::new(grid).evolve(initial, drive, opts)
}

/// Indices of local maxima whose topographic prominence is at least
/// `min_prominence`. Plateaus count once, at their first sample.
pub fn local_maxima(values: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut end = i;
            while end + 1 < n && values[end + 1] == values[i] {
                end += 1;
            }
            if end + 1 < n && values[end + 1] < values[i] {
                let peak = values[i];
                let left = values[..i]
                    .iter()
                    .rev()
                    .take_while(|&&v| v <= peak)
                    .fold(peak, |m, &v| m.min(v));
                let right = values[end + 1..]
                    .iter()
                    .take_while(|&&v| v <= peak)
                    .fold(peak, |m, &v| m.min(v));
                if peak - left.max(right) >= min_prominence {
                    out.push(i);
                }
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{solve_amplitudes, AmplitudeMode};
    use std::f64::consts::PI;

    fn plane_wave(grid: &GridSpec, k: f64, t: f64) -> Vec<Complex64> {
        grid.nodes()
            .iter()
            .map(|&x| Complex64::new(0.0, k * x - k * k * t).exp())
            .collect()
    }

    fn linear() -> Drive {
        Drive::fixed(ModelParams::symmetric(0.0, 0.0, 0.0))
    }

    #[test]
    fn schedule_examples() {
        let p = ScheduledParam::new(1.0, 2.0);
        assert_eq!(p.value(0.0).unwrap(), 1.0);
        assert!((p.value(250.0).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(p.value(500.0).unwrap(), 2.0);
        assert_eq!(p.value(1500.0).unwrap(), 2.0);
        assert!(p.value(1e-9).unwrap() - 1.0 < 1e-15);
        assert!((p.value(499.999_999).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            p.value(-1.0),
            Err(Error::ScheduleOutOfRange { .. })
        ));
        assert!(matches!(
            p.value(1500.5),
            Err(Error::ScheduleOutOfRange { .. })
        ));
        assert!(ScheduledParam::with_times(0.0, 1.0, 10.0, 5.0).is_err());
    }

    #[test]
    fn drive_applies_schedules() {
        let drive = Drive::fixed(ModelParams::symmetric(0.1, 1.0, 0.55))
            .with_schedule(ParamKey::Nonlinearity1, ScheduledParam::new(0.1, 1.0))
            .with_schedule(ParamKey::Depth2, ScheduledParam::new(1.0, 2.0));
        let p = drive.params_at(600.0).unwrap();
        assert_eq!(p.first().nonlinearity, 1.0);
        assert_eq!(p.second().nonlinearity, 0.1);
        assert_eq!(p.second().depth, 2.0);
        assert_eq!(p.first().depth, 1.0);
        assert_eq!(drive.horizon(), Some(1500.0));
        assert_eq!("V2".parse::<ParamKey>().unwrap(), ParamKey::Depth2);
        assert!("nu".parse::<ParamKey>().is_err());
    }

    #[test]
    fn plane_wave_rhs() {
        let g = GridSpec::new(20.0, 64).unwrap();
        let k1 = PI / 20.0;
        let psi = plane_wave(&g, k1, 0.0);
        let zeros = vec![Complex64::new(0.0, 0.0); 64];
        let state = FieldState::new(0.0, [psi.clone(), zeros.clone()]).unwrap();
        let d = rhs(&state, &ModelParams::symmetric(0.0, 0.0, 0.0), &g).unwrap();
        for (dv, v) in d[0].iter().zip(&psi) {
            assert!((dv - Complex64::new(0.0, -k1 * k1) * v).norm() < 1e-13);
        }
        let zero_state = FieldState::new(0.0, [zeros.clone(), zeros]).unwrap();
        let d = rhs(&zero_state, &ModelParams::symmetric(1.0, 1.0, 0.3), &g).unwrap();
        assert!(d.iter().flatten().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn soliton_rhs_is_phase_rotation() {
        let g = GridSpec::new(30.0, 384).unwrap();
        let p = ModelParams::symmetric(1.0, 1.0, 0.25);
        let sol = solve_amplitudes(&p, AmplitudeMode::FixedFirst(0.5)).unwrap();
        let state = FieldState::new(0.0, sol.sample(&g)).unwrap();
        let d = rhs(&state, &p, &g).unwrap();
        for (j, dj) in d.iter().enumerate() {
            let err = dj
                .iter()
                .zip(&state.fields[j])
                .map(|(dv, v)| (dv - Complex64::new(0.0, 1.0) * v).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "component {j}: {err}");
        }
    }

    #[test]
    fn single_step_matches_exact_phase() {
        let g = GridSpec::new(20.0, 64).unwrap();
        let k1 = PI / 20.0;
        let zeros = vec![Complex64::new(0.0, 0.0); 64];
        let state = FieldState::new(0.0, [plane_wave(&g, k1, 0.0), zeros]).unwrap();
        let next = rk4_step(&state, 1e-3, &linear(), &g).unwrap();
        let exact = plane_wave(&g, k1, 1e-3);
        let err = next.fields[0]
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-14, "{err}");
        assert_eq!(next.t, 1e-3);
    }

    #[test]
    fn guard_rejects_large_steps() {
        let g = GridSpec::new(20.0, 256).unwrap();
        let zeros = vec![Complex64::new(0.0, 0.0); 256];
        let state = FieldState::new(0.0, [zeros.clone(), zeros]).unwrap();
        let dt = 2.9 / g.max_wavenumber().powi(2);
        assert!(matches!(
            rk4_step(&state, dt, &linear(), &g),
            Err(Error::StabilityGuard { .. })
        ));
    }

    #[test]
    fn perturb_contract() {
        let g = GridSpec::new(20.0, 128).unwrap();
        let p = ModelParams::symmetric(1.0, 1.0, 0.25);
        let sol = solve_amplitudes(&p, AmplitudeMode::FixedFirst(0.5)).unwrap();
        let state = FieldState::new(0.0, sol.sample(&g)).unwrap();

        assert_eq!(perturb(&state, 0.0, 7, NoiseKind::Complex).unwrap(), state);

        let a = perturb(&state, 0.05, 7, NoiseKind::Complex).unwrap();
        let b = perturb(&state, 0.05, 7, NoiseKind::Complex).unwrap();
        let c = perturb(&state, 0.05, 8, NoiseKind::Complex).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for j in 0..2 {
            let dev = a.fields[j]
                .iter()
                .zip(&state.fields[j])
                .map(|(u, v)| (u - v).norm())
                .fold(0.0, f64::max);
            assert!(dev / state.peak(j) <= 0.05 * 2f64.sqrt());
        }

        let r = perturb(&state, 0.05, 7, NoiseKind::Real).unwrap();
        for (u, v) in r.fields[0].iter().zip(&state.fields[0]) {
            let ratio = u / v;
            assert!(ratio.im.abs() < 1e-12 && (ratio.re - 1.0).abs() <= 0.05 + 1e-12);
        }
        assert!(perturb(&state, 1.0, 7, NoiseKind::Real).is_err());
        assert!(perturb(&state, -0.1, 7, NoiseKind::Real).is_err());
    }

    #[test]
    fn evolve_sampling_and_snapshots() {
        let g = GridSpec::new(20.0, 64).unwrap();
        let p = ModelParams::symmetric(1.0, 1.0, 0.25);
        let sol = solve_amplitudes(&p, AmplitudeMode::FixedFirst(0.5)).unwrap();
        let state = FieldState::new(0.0, sol.sample(&g)).unwrap();
        let opts = EvolveOptions {
            dt: 1e-2,
            t_end: 1.05,
            sample_every: 10,
            snapshot_times: vec![0.0, 0.5, 0.52, 5.0],
        };
        let trace = evolve(&state, &Drive::fixed(p), &opts, &g).unwrap();
        assert_eq!(trace.steps_taken, 105);
        assert_eq!(trace.len(), 12);
        assert!((trace.times[11] - 1.05).abs() < 1e-12);
        assert!(trace.times.windows(2).all(|w| w[1] > w[0]));
        for i in 0..trace.len() {
            assert!((trace.total_power[i] - trace.power1[i] - trace.power2[i]).abs() < 1e-12);
        }
        let snaps: Vec<f64> = trace.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(snaps.len(), 3);
        assert!((snaps[1] - 0.5).abs() < 1e-12 && (snaps[2] - 0.52).abs() < 1e-12);
        assert!(trace.blow_up.is_none());
    }

    #[test]
    fn evolve_rejects_bad_options() {
        let g = GridSpec::new(20.0, 64).unwrap();
        let zeros = vec![Complex64::new(0.0, 0.0); 64];
        let state = FieldState::new(0.0, [zeros.clone(), zeros]).unwrap();
        let bad = |opts: EvolveOptions, drive: &Drive| evolve(&state, drive, &opts, &g).is_err();
        let base = EvolveOptions {
            dt: 1e-2,
            t_end: 1.0,
            sample_every: 1,
            snapshot_times: vec![],
        };
        assert!(bad(
            EvolveOptions {
                sample_every: 0,
                ..base.clone()
            },
            &linear()
        ));
        assert!(bad(
            EvolveOptions {
                t_end: 1.005,
                ..base.clone()
            },
            &linear()
        ));
        assert!(bad(
            EvolveOptions {
                dt: -1e-2,
                ..base.clone()
            },
            &linear()
        ));
        let driven = linear().with_schedule(
            ParamKey::Depth1,
            ScheduledParam::with_times(0.0, 1.0, 0.1, 0.5).unwrap(),
        );
        assert!(matches!(
            evolve(&state, &driven, &base, &g),
            Err(Error::ScheduleOutOfRange { .. })
        ));
    }

    #[test]
    fn runaway_growth_is_flagged() {
        let g = GridSpec::new(20.0, 64).unwrap();
        let big = vec![Complex64::new(1e5, 0.0); 64];
        let state = FieldState::new(0.0, [big.clone(), big]).unwrap();
        // Gain on the left half pushes the amplitude past the runaway bound.
        let drive = Drive::fixed(ModelParams::symmetric(0.0, 0.0, 50.0));
        let opts = EvolveOptions {
            dt: 1e-3,
            t_end: 5.0,
            sample_every: 100,
            snapshot_times: vec![],
        };
        let trace = evolve(&state, &drive, &opts, &g).unwrap();
        assert!(trace.blow_up.is_some());
        assert!(trace.steps_taken < 5000);
    }

    #[test]
    fn peak_detection() {
        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.1).collect();
        let s: Vec<f64> = t
            .iter()
            .map(|t| 1.0 + 0.1 * (t * 2.0 * PI / 6.0).sin())
            .collect();
        assert_eq!(local_maxima(&s, 0.01).len(), 7);
        assert!(local_maxima(&s, 0.3).is_empty());
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 0.0], 0.5), vec![1]);
        assert!(local_maxima(&[1.0, 2.0, 3.0], 0.0).is_empty());
        assert_eq!(local_maxima(&[0.0, 2.0, 1.9, 3.0, 0.0], 0.5), vec![3]);
    }
}
