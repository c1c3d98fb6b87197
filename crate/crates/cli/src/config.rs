//! Run configuration: TOML-style files, `key=value` overrides, validation.
//!
//! All keys are flat. Tables are accepted only as grouping (`[model]`,
//! `[grid]`, ...) except `[schedule]`, whose entries map a parameter name to
//! `[initial, target]`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ptsoliton_core::evolution::{HOLD_END, RAMP_END};
use ptsoliton_core::model::CONSTRAINT_TOLERANCE;
use ptsoliton_core::stability::DEFAULT_THRESHOLD;
use ptsoliton_core::{
    AmplitudeMode, Axis, Component, GridSpec, ModelParams, NoiseKind, ParamKey, ScheduledParam,
};
use toml::{Table, Value};

pub const DEFAULT_HALF_LENGTH: f64 = 20.0;
pub const DEFAULT_POINTS: usize = 256;
pub const DEFAULT_MAP_POINTS: usize = 128;
pub const DEFAULT_MAP_COUNT: usize = 60;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "output";

const GROUPS: [&str; 7] = [
    "model",
    "grid",
    "stability",
    "map",
    "evolve",
    "excite",
    "output",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("invalid value: {field} {message}")]
    InvalidValue { field: String, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed config ({origin}): {message}")]
    Syntax { origin: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::InvalidValue {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// The key the error refers to, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::MissingField(f) | ConfigError::UnknownKey(f) => Some(f),
            ConfigError::InvalidValue { field, .. } => Some(field),
            _ => None,
        }
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Stability,
    Map,
    Evolve,
    Excite,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Solve,
        Mode::Stability,
        Mode::Map,
        Mode::Evolve,
        Mode::Excite,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Stability => "stability",
            Mode::Map => "map",
            Mode::Evolve => "evolve",
            Mode::Excite => "excite",
        }
    }

    fn evolves(&self) -> bool {
        matches!(self, Mode::Evolve | Mode::Excite)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                ConfigError::invalid(
                    "mode",
                    format!("must be one of solve, stability, map, evolve, excite (got `{s}`)"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapAxes {
    pub depth: Axis,
    pub gain_loss: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionSettings {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub noise: f64,
    pub noise_kind: NoiseKind,
    pub sample_every: usize,
    pub snapshots: Vec<f64>,
}

/// A validated run description with every default materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub nonlinearity: [f64; 2],
    /// `(V_1, V_2)`; absent in map mode, where the depth is swept.
    pub depth: Option<[f64; 2]>,
    /// `(W_1, W_2)`; absent in map mode.
    pub gain_loss: Option<[f64; 2]>,
    pub amplitude: AmplitudeMode,
    pub constraint_tolerance: f64,
    pub half_length: f64,
    pub n_points: usize,
    pub threshold: f64,
    /// Stability mode only: repeat the analysis at `n_points / 2`.
    pub check_convergence: bool,
    pub map: Option<MapAxes>,
    pub evolution: Option<EvolutionSettings>,
    pub schedule: BTreeMap<ParamKey, ScheduledParam>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.half_length, self.n_points).expect("validated at parse time")
    }

    /// Model parameters at `t = 0`. Map mode has no single parameter set.
    pub fn params(&self) -> Option<ModelParams> {
        let [a1, a2] = self.nonlinearity;
        let [v1, v2] = self.depth?;
        let [w1, w2] = self.gain_loss?;
        Some(ModelParams::new(
            Component::new(a1, v1, w1),
            Component::new(a2, v2, w2),
        ))
    }

    /// Flat key-value form; feeding it back through [`RawConfig`] reproduces
    /// this configuration exactly.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        let mut put = |k: &str, v: Value| {
            t.insert(k.to_string(), v);
        };
        put("mode", self.mode.as_str().into());
        put("a1", self.nonlinearity[0].into());
        put("a2", self.nonlinearity[1].into());
        for (keys, pair) in [(["v1", "v2"], self.depth), (["w1", "w2"], self.gain_loss)] {
            if let Some([p, q]) = pair {
                put(keys[0], p.into());
                put(keys[1], q.into());
            }
        }
        put(
            "amplitude",
            match self.amplitude {
                AmplitudeMode::Equal => "equal".into(),
                AmplitudeMode::FixedFirst(a) => a.into(),
            },
        );
        put("constraint_tolerance", self.constraint_tolerance.into());
        put("half_length", self.half_length.into());
        put("n_points", int(self.n_points as u64));
        put("threshold", self.threshold.into());
        if self.mode == Mode::Stability {
            put("check_convergence", self.check_convergence.into());
        }
        if let Some(map) = &self.map {
            for (prefix, axis) in [("v1", &map.depth), ("w1", &map.gain_loss)] {
                put(&format!("{prefix}_min"), axis.min.into());
                put(&format!("{prefix}_max"), axis.max.into());
                put(&format!("{prefix}_count"), int(axis.count as u64));
            }
        }
        if let Some(ev) = &self.evolution {
            put("dt", ev.dt.into());
            put("t_end", ev.t_end.into());
            put("seed", int(ev.seed));
            put("noise", ev.noise.into());
            put("noise_kind", ev.noise_kind.as_str().into());
            put("sample_every", int(ev.sample_every as u64));
            put(
                "snapshots",
                Value::Array(ev.snapshots.iter().map(|&s| s.into()).collect()),
            );
        }
        if let Some(s) = self.schedule.values().next() {
            put("ramp_end", s.ramp_end.into());
            put("hold_end", s.hold_end.into());
        }
        put("out", self.out_dir.display().to_string().into());
        if !self.schedule.is_empty() {
            let sched: Table = self
                .schedule
                .iter()
                .map(|(k, s)| {
                    (
                        k.name().to_string(),
                        Value::Array(vec![s.initial.into(), s.target.into()]),
                    )
                })
                .collect();
            t.insert("schedule".into(), Value::Table(sched));
        }
        t
    }
}

fn int(v: u64) -> Value {
    // Seeds above i64::MAX are not representable in TOML; they are rejected at parse time.
    Value::Integer(v as i64)
}

/// Unvalidated keys collected from files and overrides. Later sources win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, Value>,
    schedule: BTreeMap<String, Value>,
}

impl RawConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.merge_str(&text, &path.display().to_string())
    }

    pub fn merge_str(&mut self, text: &str, origin: &str) -> Result<()> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax {
                origin: origin.to_string(),
                message: e.message().to_string(),
            })?;
        self.merge_table(table, None)
    }

    fn merge_table(&mut self, table: Table, group: Option<&str>) -> Result<()> {
        for (key, value) in table {
            match value {
                Value::Table(inner) if group.is_none() && key == "schedule" => {
                    for (k, v) in inner {
                        self.schedule.insert(k.to_ascii_lowercase(), v);
                    }
                }
                Value::Table(inner) if group.is_none() && GROUPS.contains(&key.as_str()) => {
                    self.merge_table(inner, Some(&key))?;
                }
                Value::Table(_) => {
                    let name = match group {
                        Some(g) => format!("{g}.{key}"),
                        None => key,
                    };
                    return Err(ConfigError::UnknownKey(name));
                }
                v => {
                    self.entries.insert(key.to_ascii_lowercase(), v);
                }
            }
        }
        Ok(())
    }

    /// Applies one `key=value` override. The value is read as a TOML value
    /// and falls back to a bare string; `schedule.<param>` addresses the
    /// schedule table.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax {
                origin: "--set".into(),
                message: format!("expected key=value, got `{assignment}`"),
            })?;
        let key = key.trim().to_ascii_lowercase();
        let raw = raw.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                origin: "--set".into(),
                message: format!("empty key in `{assignment}`"),
            });
        }
        let value = match format!("v = {raw}").parse::<Table>() {
            Ok(mut t) => t.remove("v").expect("single key"),
            Err(_) => Value::String(raw.to_string()),
        };
        if let Some(param) = key.strip_prefix("schedule.") {
            self.schedule.insert(param.to_string(), value);
        } else if let Some((group, k)) = key.split_once('.') {
            if !GROUPS.contains(&group) {
                return Err(ConfigError::UnknownKey(key));
            }
            self.entries.insert(k.to_string(), value);
        } else {
            self.entries.insert(key, value);
        }
        Ok(())
    }

    /// Validates and fills defaults. `mode` overrides a `mode` key.
    pub fn resolve(mut self, mode: Option<Mode>) -> Result<RunConfig> {
        let file_mode = match self.entries.remove("mode") {
            Some(Value::String(s)) => Some(s.parse::<Mode>()?),
            Some(_) => return Err(ConfigError::invalid("mode", "must be a string")),
            None => None,
        };
        let mode = mode
            .or(file_mode)
            .ok_or_else(|| ConfigError::MissingField("mode".into()))?;
        let mut r = Reader {
            entries: self.entries,
        };

        let schedule = parse_schedule(mode, self.schedule, &mut r)?;
        let param = |r: &mut Reader, key: ParamKey| -> Result<f64> {
            let given = r.f64(key.name())?;
            match (given, schedule.get(&key)) {
                (Some(v), Some(s)) if v != s.initial => Err(ConfigError::invalid(
                    key.name(),
                    format!("is {v} but its schedule starts at {}", s.initial),
                )),
                (Some(v), _) => Ok(v),
                (None, Some(s)) => Ok(s.initial),
                (None, None) => Err(ConfigError::MissingField(key.name().into())),
            }
        };

        let nonlinearity = [
            param(&mut r, ParamKey::Nonlinearity1)?,
            param(&mut r, ParamKey::Nonlinearity2)?,
        ];
        let (depth, gain_loss) = if mode == Mode::Map {
            for key in ["v1", "v2", "w1", "w2"] {
                if r.entries.contains_key(key) {
                    return Err(ConfigError::invalid(
                        key,
                        "is swept in map mode; set v1_min/v1_max/v1_count and w1_min/w1_max/w1_count",
                    ));
                }
            }
            (None, None)
        } else {
            (
                Some([
                    param(&mut r, ParamKey::Depth1)?,
                    param(&mut r, ParamKey::Depth2)?,
                ]),
                Some([
                    param(&mut r, ParamKey::GainLoss1)?,
                    param(&mut r, ParamKey::GainLoss2)?,
                ]),
            )
        };

        let amplitude = match r.entries.remove("amplitude") {
            None => return Err(ConfigError::MissingField("amplitude".into())),
            Some(Value::String(s)) if s.eq_ignore_ascii_case("equal") => AmplitudeMode::Equal,
            Some(v) => {
                let a = as_f64(&v).ok_or_else(|| {
                    ConfigError::invalid("amplitude", "must be \"equal\" or a nonnegative number")
                })?;
                if !(a.is_finite() && a >= 0.0) {
                    return Err(ConfigError::invalid("amplitude", "must be nonnegative"));
                }
                AmplitudeMode::FixedFirst(a)
            }
        };
        let constraint_tolerance = r.positive("constraint_tolerance", CONSTRAINT_TOLERANCE)?;

        let half_length = r.positive("half_length", DEFAULT_HALF_LENGTH)?;
        let default_points = if mode == Mode::Map {
            DEFAULT_MAP_POINTS
        } else {
            DEFAULT_POINTS
        };
        let n_points = r.usize("n_points")?.unwrap_or(default_points);
        if !n_points.is_multiple_of(2) {
            return Err(ConfigError::invalid("n_points", "must be even"));
        }
        if n_points < ptsoliton_core::grid::MIN_POINTS {
            return Err(ConfigError::invalid(
                "n_points",
                format!("must be at least {}", ptsoliton_core::grid::MIN_POINTS),
            ));
        }
        let threshold = r.positive("threshold", DEFAULT_THRESHOLD)?;
        let check_convergence = r.bool("check_convergence")?.unwrap_or(false);
        if check_convergence
            && (n_points / 2 % 2 != 0 || n_points / 2 < ptsoliton_core::grid::MIN_POINTS)
        {
            return Err(ConfigError::invalid(
                "check_convergence",
                "needs n_points / 2 to be an even grid size of at least 16",
            ));
        }

        let map = if mode == Mode::Map {
            Some(MapAxes {
                depth: r.axis("v1")?,
                gain_loss: r.axis("w1")?,
            })
        } else {
            None
        };

        let evolution = if mode.evolves() {
            let dt = r.positive("dt", ptsoliton_core::evolution::DEFAULT_DT)?;
            let default_end = schedule.values().next().map_or(HOLD_END, |s| s.hold_end);
            let t_end = r.positive("t_end", default_end)?;
            if let Some(s) = schedule.values().next() {
                if t_end > s.hold_end {
                    return Err(ConfigError::invalid(
                        "t_end",
                        format!("must not exceed the schedule end {}", s.hold_end),
                    ));
                }
            }
            let seed = match r.entries.remove("seed") {
                None => DEFAULT_SEED,
                Some(Value::Integer(i)) if i >= 0 => i as u64,
                Some(_) => {
                    return Err(ConfigError::invalid(
                        "seed",
                        "must be a nonnegative integer",
                    ))
                }
            };
            let default_noise = if mode == Mode::Evolve {
                ptsoliton_core::evolution::DEFAULT_NOISE
            } else {
                0.0
            };
            let noise = r.f64("noise")?.unwrap_or(default_noise);
            if !(0.0..1.0).contains(&noise) {
                return Err(ConfigError::invalid("noise", "must lie in [0, 1)"));
            }
            let noise_kind = match r.entries.remove("noise_kind") {
                None => NoiseKind::default(),
                Some(Value::String(s)) => s
                    .parse()
                    .map_err(|_| ConfigError::invalid("noise_kind", "must be complex or real"))?,
                Some(_) => {
                    return Err(ConfigError::invalid(
                        "noise_kind",
                        "must be complex or real",
                    ))
                }
            };
            let sample_every = r
                .usize("sample_every")?
                .unwrap_or(ptsoliton_core::evolution::DEFAULT_SAMPLE_EVERY);
            if sample_every == 0 {
                return Err(ConfigError::invalid("sample_every", "must be at least 1"));
            }
            let snapshots = match r.entries.remove("snapshots") {
                None => Vec::new(),
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| as_f64(v).filter(|t| (0.0..=t_end).contains(t)))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| {
                        ConfigError::invalid("snapshots", "must be times within [0, t_end]")
                    })?,
                Some(_) => {
                    return Err(ConfigError::invalid(
                        "snapshots",
                        "must be an array of times",
                    ))
                }
            };
            Some(EvolutionSettings {
                dt,
                t_end,
                seed,
                noise,
                noise_kind,
                sample_every,
                snapshots,
            })
        } else {
            None
        };

        let out_dir = match r.entries.remove("out") {
            None => PathBuf::from(DEFAULT_OUT),
            Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
            Some(_) => return Err(ConfigError::invalid("out", "must be a directory path")),
        };

        // Keys for other modes are accepted and dropped so one recipe can serve several modes.
        for key in OTHER_MODE_KEYS {
            r.entries.remove(*key);
        }
        if let Some(key) = r.entries.keys().next() {
            return Err(ConfigError::UnknownKey(key.clone()));
        }

        Ok(RunConfig {
            mode,
            nonlinearity,
            depth,
            gain_loss,
            amplitude,
            constraint_tolerance,
            half_length,
            n_points,
            threshold,
            check_convergence,
            map,
            evolution,
            schedule,
            out_dir,
        })
    }
}

const OTHER_MODE_KEYS: &[&str] = &[
    "check_convergence",
    "v1_min",
    "v1_max",
    "v1_count",
    "w1_min",
    "w1_max",
    "w1_count",
    "dt",
    "t_end",
    "seed",
    "noise",
    "noise_kind",
    "sample_every",
    "snapshots",
    "ramp_end",
    "hold_end",
];

fn parse_schedule(
    mode: Mode,
    raw: BTreeMap<String, Value>,
    r: &mut Reader,
) -> Result<BTreeMap<ParamKey, ScheduledParam>> {
    let ramp_end = r.f64("ramp_end")?;
    let hold_end = r.f64("hold_end")?;
    if mode != Mode::Excite {
        if let Some(name) = raw.keys().next() {
            return Err(ConfigError::invalid(
                &format!("schedule.{name}"),
                "is only used in excite mode",
            ));
        }
        return Ok(BTreeMap::new());
    }
    if raw.is_empty() {
        return Err(ConfigError::MissingField("schedule".into()));
    }
    let ramp_end = ramp_end.unwrap_or(RAMP_END);
    let hold_end = hold_end.unwrap_or(HOLD_END);
    let mut out = BTreeMap::new();
    for (name, value) in raw {
        let field = format!("schedule.{name}");
        let key: ParamKey = name
            .parse()
            .map_err(|_| ConfigError::UnknownKey(field.clone()))?;
        let pair = match &value {
            Value::Array(items) if items.len() == 2 => {
                items.iter().map(as_f64).collect::<Option<Vec<_>>>()
            }
            _ => None,
        }
        .filter(|p| p.iter().all(|x| x.is_finite()))
        .ok_or_else(|| ConfigError::invalid(&field, "must be [initial, target]"))?;
        let sched = ScheduledParam::with_times(pair[0], pair[1], ramp_end, hold_end)
            .map_err(|e| ConfigError::invalid("ramp_end", e.to_string()))?;
        out.insert(key, sched);
    }
    Ok(out)
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

struct Reader {
    entries: BTreeMap<String, Value>,
}

impl Reader {
    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(v) => match as_f64(&v) {
                Some(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(ConfigError::invalid(key, "must be a finite number")),
            },
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.f64(key)?.unwrap_or(default);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError::invalid(key, "must be positive"))
        }
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
            Some(_) => Err(ConfigError::invalid(key, "must be a nonnegative integer")),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(_) => Err(ConfigError::invalid(key, "must be true or false")),
        }
    }

    fn axis(&mut self, prefix: &str) -> Result<Axis> {
        let min_key = format!("{prefix}_min");
        let max_key = format!("{prefix}_max");
        let count_key = format!("{prefix}_count");
        let min = self
            .f64(&min_key)?
            .ok_or(ConfigError::MissingField(min_key.clone()))?;
        let max = self
            .f64(&max_key)?
            .ok_or(ConfigError::MissingField(max_key.clone()))?;
        let count = self.usize(&count_key)?.unwrap_or(DEFAULT_MAP_COUNT);
        if count < 2 {
            return Err(ConfigError::invalid(&count_key, "must be at least 2"));
        }
        if max <= min {
            return Err(ConfigError::invalid(
                &max_key,
                format!("must exceed {min_key}"),
            ));
        }
        Axis::new(min, max, count).map_err(|e| ConfigError::invalid(&count_key, e.to_string()))
    }
}

/// Reads an optional config file, applies overrides in order, then an
/// optional output directory, and validates.
pub fn parse_config(
    mode: Option<Mode>,
    file: Option<&Path>,
    overrides: &[String],
    out: Option<&Path>,
) -> Result<RunConfig> {
    let mut raw = RawConfig::new();
    if let Some(path) = file {
        raw.merge_file(path)?;
    }
    for s in overrides {
        raw.set(s)?;
    }
    if let Some(dir) = out {
        raw.entries
            .insert("out".into(), Value::String(dir.display().to_string()));
    }
    raw.resolve(mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(mode: Mode, text: &str) -> Result<RunConfig> {
        let mut raw = RawConfig::new();
        raw.merge_str(text, "test")?;
        raw.resolve(Some(mode))
    }

    const SOLVE: &str = "a1 = 1\na2 = 1\nv1 = 1\nv2 = 1\nw1 = 0.25\nw2 = 0.25\namplitude = 0.5\n";

    #[test]
    fn minimal_solve_fills_defaults() {
        let cfg = resolve(Mode::Solve, SOLVE).unwrap();
        assert_eq!(cfg.half_length, 20.0);
        assert_eq!(cfg.n_points, 256);
        assert_eq!(cfg.threshold, 1e-4);
        assert_eq!(cfg.amplitude, AmplitudeMode::FixedFirst(0.5));
        assert_eq!(
            cfg.params().unwrap(),
            ModelParams::symmetric(1.0, 1.0, 0.25)
        );
        assert!(cfg.evolution.is_none());
    }

    #[test]
    fn odd_grid_rejected_by_name() {
        let err = resolve(Mode::Solve, &format!("{SOLVE}n_points = 255\n")).unwrap_err();
        assert_eq!(err.to_string(), "invalid value: n_points must be even");
        assert_eq!(err.field(), Some("n_points"));
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let err = resolve(Mode::Solve, &format!("{SOLVE}wl = 3\n")).unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("wl".into()));
        let err = resolve(Mode::Solve, &SOLVE.replace("v2 = 1\n", "")).unwrap_err();
        assert_eq!(err, ConfigError::MissingField("v2".into()));
        let err = resolve(Mode::Solve, "[modle]\na1 = 1\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("modle".into()));
    }

    #[test]
    fn groups_flatten() {
        let text = "[model]\na1 = 1\na2 = 1\nv1 = 1\nv2 = 1\nw1 = 0.25\nw2 = 0.25\namplitude = \"equal\"\n[grid]\nn_points = 128\n";
        let cfg = resolve(Mode::Stability, text).unwrap();
        assert_eq!(cfg.n_points, 128);
        assert_eq!(cfg.amplitude, AmplitudeMode::Equal);
    }

    #[test]
    fn overrides_win_and_parse_values() {
        let mut raw = RawConfig::new();
        raw.merge_str(SOLVE, "test").unwrap();
        raw.set("w1=0.55").unwrap();
        raw.set("grid.n_points = 64").unwrap();
        raw.set("out=runs/a").unwrap();
        let cfg = raw.resolve(Some(Mode::Solve)).unwrap();
        assert_eq!(cfg.gain_loss, Some([0.55, 0.25]));
        assert_eq!(cfg.n_points, 64);
        assert_eq!(cfg.out_dir, PathBuf::from("runs/a"));
        assert!(matches!(
            RawConfig::new().set("novalue"),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn excite_schedule_supplies_base_values() {
        let text = "a2 = 0.1\nw1 = 0.55\nw2 = 0.55\namplitude = \"equal\"\n\
                    [schedule]\na1 = [0.1, 1.0]\nv1 = [1.0, 2.0]\nv2 = [1.0, 2.0]\n";
        let cfg = resolve(Mode::Excite, text).unwrap();
        let keys: Vec<_> = cfg.schedule.keys().map(|k| k.name()).collect();
        assert_eq!(keys, ["a1", "v1", "v2"]);
        assert_eq!(
            cfg.params().unwrap(),
            ModelParams::symmetric(0.1, 1.0, 0.55)
        );
        let ev = cfg.evolution.unwrap();
        assert_eq!(ev.t_end, 1500.0);
        assert_eq!(ev.noise, 0.0);

        let err = resolve(Mode::Excite, &format!("a1 = 0.2\n{text}")).unwrap_err();
        assert_eq!(err.field(), Some("a1"));
        let err = resolve(Mode::Evolve, text).unwrap_err();
        assert_eq!(err.field(), Some("schedule.a1"));
        let err = resolve(Mode::Excite, &format!("t_end = 2000\n{text}")).unwrap_err();
        assert_eq!(err.field(), Some("t_end"));
    }

    #[test]
    fn map_mode_requires_axes() {
        let base = "a1 = 1\na2 = 1\namplitude = 0.5\n";
        assert_eq!(
            resolve(Mode::Map, base).unwrap_err(),
            ConfigError::MissingField("v1_min".into())
        );
        let text =
            format!("{base}v1_min = 0\nv1_max = 2\nv1_count = 10\nw1_min = -1\nw1_max = 1\n");
        let cfg = resolve(Mode::Map, &text).unwrap();
        assert_eq!(cfg.n_points, 128);
        let map = cfg.map.unwrap();
        assert_eq!((map.depth.count, map.gain_loss.count), (10, 60));
        let err = resolve(Mode::Map, &format!("{text}w1_count = 1\n")).unwrap_err();
        assert_eq!(err.field(), Some("w1_count"));
        let err = resolve(Mode::Map, &format!("{text}v1 = 1\n")).unwrap_err();
        assert_eq!(err.field(), Some("v1"));
    }

    #[test]
    fn evolution_defaults_and_ranges() {
        let cfg = resolve(Mode::Evolve, SOLVE).unwrap();
        let ev = cfg.evolution.unwrap();
        assert_eq!(
            (ev.dt, ev.t_end, ev.noise, ev.sample_every),
            (1e-3, 1500.0, 0.05, 100)
        );
        assert_eq!(ev.noise_kind, NoiseKind::Complex);
        for (extra, field) in [
            ("dt = 0", "dt"),
            ("noise = 1.5", "noise"),
            ("seed = -1", "seed"),
            ("sample_every = 0", "sample_every"),
            ("noise_kind = \"pink\"", "noise_kind"),
            ("snapshots = [2000]", "snapshots"),
        ] {
            let err = resolve(Mode::Evolve, &format!("{SOLVE}{extra}\n")).unwrap_err();
            assert_eq!(err.field(), Some(field), "{extra}");
        }
    }

    #[test]
    fn table_round_trips() {
        for (mode, text) in [
            (Mode::Evolve, format!("{SOLVE}snapshots = [0, 250.5]\nseed = 7\nnoise_kind = \"real\"\n")),
            (Mode::Stability, format!("{SOLVE}check_convergence = true\n")),
            (
                Mode::Excite,
                "a2 = 0.0033\nw1 = 0.55\nw2 = 0.55\namplitude = \"equal\"\nramp_end = 50\nhold_end = 150\n\
                 [schedule]\na1 = [0.1, 1.0]\nv1 = [1.0, 2.0]\nv2 = [2.0, 1.0]\n"
                    .to_string(),
            ),
            (
                Mode::Map,
                "a1 = -1\na2 = -1\namplitude = 0.5\nv1_min = 2\nv1_max = 10\nw1_min = -4\nw1_max = 4.1\n".to_string(),
            ),
        ] {
            let cfg = resolve(mode, &text).unwrap();
            let text2 = toml::to_string(&cfg.to_table()).unwrap();
            let again = resolve(mode, &text2).unwrap();
            assert_eq!(again, cfg, "{text2}");
        }
    }
}
