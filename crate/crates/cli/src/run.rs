//! Mode dispatch, output files and the run manifest.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ptsoliton_core::stability::reflection_mismatch;
use ptsoliton_core::{
    analyze, evolve, perturb, power, scan_map, solve_amplitudes_with_tolerance,
    stationary_residual, CellStatus, Classification, Complex64, Drive, Error, EvolutionTrace,
    EvolveOptions, FieldState, GridSpec, SolitonSolution, StabilityReport,
};
use serde_json::{json, Value};

use crate::config::{ConfigError, Mode, RunConfig};
use crate::output;

/// Constraint mismatches below this are reported as warnings instead of errors.
pub const CONSTRAINT_WARN_LIMIT: f64 = 5e-2;
/// Relative peak-amplitude excursion that flags an evolution as unstable.
pub const UNSTABLE_DEVIATION: f64 = 0.5;
/// Thread count for the parallel stability map.
pub const THREADS_ENV: &str = "PTSOLITON_THREADS";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    BlowUp,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub summary: String,
    pub manifest: Value,
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        match self.status {
            RunStatus::Ok => 0,
            RunStatus::BlowUp => 4,
        }
    }
}

struct Session<'a> {
    dir: &'a Path,
    files: Vec<String>,
    warnings: Vec<String>,
}

impl Session<'_> {
    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let io_err = |source| RunError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }
}

struct ModeResult {
    status: RunStatus,
    summary: String,
    results: Value,
}

/// Executes `config`, writing CSV outputs and `manifest.json` into its output
/// directory. On failure the manifest is still written, flagged `incomplete`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let dir = config.out_dir.as_path();
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut session = Session {
        dir,
        files: Vec::new(),
        warnings: Vec::new(),
    };
    let outcome = match config.mode {
        Mode::Solve => run_solve(config, &mut session),
        Mode::Stability => run_stability(config, &mut session),
        Mode::Map => run_map(config, &mut session),
        Mode::Evolve | Mode::Excite => run_evolution(config, &mut session),
    };

    let config_json = serde_json::to_value(config.to_table()).expect("toml tables serialize");
    let mut manifest = json!({
        "program": "ptsoliton",
        "version": env!("CARGO_PKG_VERSION"),
        "mode": config.mode.as_str(),
        "config": config_json,
        "warnings": session.warnings,
    });
    let result = match outcome {
        Ok(r) => {
            manifest["status"] = json!(match r.status {
                RunStatus::Ok => "ok",
                RunStatus::BlowUp => "blow_up",
            });
            manifest["incomplete"] = json!(false);
            manifest["error"] = Value::Null;
            manifest["results"] = r.results;
            Ok((r.status, r.summary))
        }
        Err(e) => {
            manifest["status"] = json!("error");
            manifest["incomplete"] = json!(true);
            manifest["error"] = json!(e.to_string());
            Err(e)
        }
    };
    manifest["files"] = json!(session.files);
    let text = serde_json::to_string_pretty(&manifest).expect("json values serialize");
    let manifest_path = dir.join(MANIFEST);
    fs::write(&manifest_path, text + "\n").map_err(|source| RunError::Io {
        path: manifest_path,
        source,
    })?;
    let (status, summary) = result?;
    Ok(RunOutcome {
        status,
        summary,
        manifest,
        files: session.files,
    })
}

fn solve(config: &RunConfig, session: &mut Session) -> Result<SolitonSolution, RunError> {
    let params = config
        .params()
        .expect("non-map modes carry a full parameter set");
    match solve_amplitudes_with_tolerance(&params, config.amplitude, config.constraint_tolerance) {
        Err(Error::InconsistentConstraints { relative, .. })
            if relative < CONSTRAINT_WARN_LIMIT =>
        {
            session.warn(format!(
                "amplitude constraints agree only to {relative:.3e} relative; using component 1"
            ));
            Ok(solve_amplitudes_with_tolerance(
                &params,
                config.amplitude,
                CONSTRAINT_WARN_LIMIT,
            )?)
        }
        other => Ok(other?),
    }
}

fn solution_json(sol: &SolitonSolution) -> Value {
    json!({
        "amplitudes": sol.amplitudes,
        "constraint_mismatch": sol.constraint_mismatch,
    })
}

fn run_solve(config: &RunConfig, session: &mut Session) -> Result<ModeResult, RunError> {
    let grid = config.grid();
    let sol = solve(config, session)?;
    let [f1, f2] = sol.sample(&grid);
    let residual = stationary_residual([&f1, &f2], &sol.params, &grid)?;
    let powers = [power(&f1, &grid)?, power(&f2, &grid)?];
    session.write("profile.csv", |w| {
        output::write_profile_csv(w, [&f1, &f2], &grid)
    })?;

    let mut results = solution_json(&sol);
    results["power"] = json!(powers);
    results["total_power"] = json!(powers[0] + powers[1]);
    results["residual"] = json!(residual);
    Ok(ModeResult {
        status: RunStatus::Ok,
        summary: format!(
            "solve: A1 = {:.6}, A2 = {:.6}, P1 = {:.6}, P2 = {:.6}, residual = {:.2e}",
            sol.amplitudes[0],
            sol.amplitudes[1],
            powers[0],
            powers[1],
            residual[0].max(residual[1])
        ),
        results,
    })
}

fn report_json(report: &StabilityReport) -> Value {
    let pair = |z: Complex64| json!([z.re, z.im]);
    json!({
        "classification": report.classification.as_str(),
        "max_im": report.max_im,
        "dominant": pair(report.dominant),
        "threshold": report.threshold,
        "smallest": report.smallest(2).into_iter().map(pair).collect::<Vec<_>>(),
        "zero_mode_residuals": report.zero_mode_residuals,
        "reflection_mismatch": reflection_mismatch(&report.eigenvalues),
    })
}

fn run_stability(config: &RunConfig, session: &mut Session) -> Result<ModeResult, RunError> {
    let grid = config.grid();
    let sol = solve(config, session)?;
    let [f1, f2] = sol.sample(&grid);
    session.write("profile.csv", |w| {
        output::write_profile_csv(w, [&f1, &f2], &grid)
    })?;
    let report = analyze(&sol, &grid, config.threshold)?;
    session.write("eigenvalues.csv", |w| {
        output::write_eigenvalues_csv(w, &report.eigenvalues)
    })?;

    let mut results = solution_json(&sol);
    results["stability"] = report_json(&report);
    let mut summary = format!(
        "stability: {} (max_im = {:.3e}, threshold {:.1e}, N = {}, L = {})",
        report.classification.as_str(),
        report.max_im,
        config.threshold,
        config.n_points,
        config.half_length
    );
    if config.check_convergence {
        let coarse_grid = GridSpec::new(config.half_length, config.n_points / 2)?;
        let coarse = analyze(&sol, &coarse_grid, config.threshold)?;
        let delta = (report.max_im - coarse.max_im).abs();
        let agrees = coarse.classification == report.classification;
        results["convergence"] = json!({
            "n_points": coarse_grid.len(),
            "max_im": coarse.max_im,
            "classification": coarse.classification.as_str(),
            "max_im_change": delta,
            "classification_agrees": agrees,
        });
        summary.push_str(&format!(
            "; N = {}: {} (|change| = {:.3e})",
            coarse_grid.len(),
            coarse.classification.as_str(),
            delta
        ));
    }
    Ok(ModeResult {
        status: RunStatus::Ok,
        summary,
        results,
    })
}

/// Reads the thread-count override; `None` keeps rayon's default pool.
pub fn thread_override() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError::InvalidValue {
                field: THREADS_ENV.into(),
                message: format!("must be a positive integer (got `{s}`)"),
            }),
        },
    }
}

fn run_map(config: &RunConfig, session: &mut Session) -> Result<ModeResult, RunError> {
    let axes = config.map.as_ref().expect("map mode carries axes");
    let grid = config.grid();
    let scan = || {
        scan_map(
            axes.depth,
            axes.gain_loss,
            config.nonlinearity,
            config.amplitude,
            &grid,
        )
    };
    let (map, threads) = match thread_override()? {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            (pool.install(scan)?, n)
        }
        None => (scan()?, rayon::current_num_threads()),
    };
    session.write("map.csv", |w| output::write_map_csv(w, &map))?;

    let count = |s: CellStatus| map.cells.iter().filter(|c| c.status == s).count();
    let stable = map
        .cells
        .iter()
        .filter(|c| c.classification(config.threshold) == Some(Classification::Stable))
        .count();
    let ok = count(CellStatus::Ok);
    let results = json!({
        "cells": map.cells.len(),
        "ok": ok,
        "no_real_amplitude": count(CellStatus::NoRealAmplitude),
        "eig_failed": count(CellStatus::EigFailed),
        "stable": stable,
        "unstable": ok - stable,
        "threads": threads,
    });
    Ok(ModeResult {
        status: RunStatus::Ok,
        summary: format!(
            "map: {} cells, {} stable, {} unstable, {} without real amplitude, {} eigensolver failures",
            map.cells.len(),
            stable,
            ok - stable,
            count(CellStatus::NoRealAmplitude),
            count(CellStatus::EigFailed)
        ),
        results,
    })
}

/// Largest relative excursion `|amax_j(t) / A_j - 1|` over the trace.
pub fn peak_deviation(trace: &EvolutionTrace, amplitudes: [f64; 2]) -> [f64; 2] {
    [0, 1].map(|j| {
        trace
            .peaks(j)
            .iter()
            .map(|&p| {
                if amplitudes[j] > 0.0 {
                    (p / amplitudes[j] - 1.0).abs()
                } else {
                    p
                }
            })
            .fold(0.0, f64::max)
    })
}

fn run_evolution(config: &RunConfig, session: &mut Session) -> Result<ModeResult, RunError> {
    let ev = config
        .evolution
        .as_ref()
        .expect("evolution modes carry settings");
    let grid = config.grid();
    let sol = solve(config, session)?;
    let exact = FieldState::new(0.0, sol.sample(&grid))?;
    let initial = perturb(&exact, ev.noise, ev.seed, ev.noise_kind)?;
    let drive = config
        .schedule
        .iter()
        .fold(Drive::fixed(sol.params), |d, (k, s)| {
            d.with_schedule(*k, *s)
        });
    let opts = EvolveOptions {
        dt: ev.dt,
        t_end: ev.t_end,
        sample_every: ev.sample_every,
        snapshot_times: ev.snapshots.clone(),
    };
    let trace = evolve(&initial, &drive, &opts, &grid)?;

    session.write("trace.csv", |w| output::write_trace_csv(w, &trace))?;
    for snap in &trace.snapshots {
        session.write(&output::snapshot_file_name(snap.t), |w| {
            output::write_snapshot_csv(w, snap, &grid)
        })?;
    }

    let deviation = peak_deviation(&trace, sol.amplitudes);
    let unstable = trace.blow_up.is_some() || deviation.iter().any(|&d| d > UNSTABLE_DEVIATION);
    let last = trace.len() - 1;
    let (min_idx, min_power) =
        trace
            .total_power
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, p)| if p < acc.1 { (i, p) } else { acc },
            );
    let mut results = solution_json(&sol);
    results["steps"] = json!(trace.steps_taken);
    results["final_time"] = json!(trace.times[last]);
    results["initial_power"] = json!(trace.total_power[0]);
    results["final_power"] = json!(trace.total_power[last]);
    results["min_power"] = json!({"t": trace.times[min_idx], "P": min_power});
    results["peak_deviation"] = json!(deviation);
    results["blow_up"] = json!(trace.blow_up);
    results["unstable"] = json!(unstable);

    let status = if trace.blow_up.is_some() {
        RunStatus::BlowUp
    } else {
        RunStatus::Ok
    };
    let verdict = match trace.blow_up {
        Some(t) => format!("blow-up at t = {t:.3}"),
        None if unstable => "unstable".to_string(),
        None => "stable".to_string(),
    };
    Ok(ModeResult {
        status,
        summary: format!(
            "{}: {} at t = {:.1}, P(0) = {:.6}, P(end) = {:.6}, peak deviation = ({:.3}, {:.3})",
            config.mode,
            verdict,
            trace.times[last],
            trace.total_power[0],
            trace.total_power[last],
            deviation[0],
            deviation[1]
        ),
        results,
    })
}
