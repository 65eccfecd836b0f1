//! Run configuration: key=value files, manifests and flags, merged into a
//! validated [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use kerr_core::ensemble::{EnsembleConfig, InitialMode};
use kerr_core::sde::Integrator;
use kerr_core::{Complex64, Representation};
use thiserror::Error;

/// Where a configuration value came from, for error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Default,
    File { path: PathBuf, line: usize },
    Manifest { path: PathBuf },
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Default => write!(f, "default"),
            Source::File { path, line } => write!(f, "{}:{line}", path.display()),
            Source::Manifest { path } => write!(f, "{} (config)", path.display()),
            Source::Flag => write!(f, "command line"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{at}: unknown key `{key}`")]
    UnknownKey { key: String, at: Source },
    #[error("{at}: invalid value {value:?} for `{key}`: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
        at: Source,
    },
    #[error("{at}: {reason}")]
    Syntax { reason: String, at: Source },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Analytic,
    Compare,
    Fpcheck,
    Qgrid,
    Diverge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Analytic => "analytic",
            Command::Compare => "compare",
            Command::Fpcheck => "fpcheck",
            Command::Qgrid => "qgrid",
            Command::Diverge => "diverge",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "simulate" => Command::Simulate,
            "analytic" => Command::Analytic,
            "compare" => Command::Compare,
            "fpcheck" => Command::Fpcheck,
            "qgrid" => Command::Qgrid,
            "diverge" => Command::Diverge,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

/// Every accepted key with its default. `extent` and `integrator` default
/// per command and are resolved in [`RunConfig::resolve`].
pub const KEYS: &[(&str, &str)] = &[
    ("command", ""),
    ("mu", "1"),
    ("representation", "q"),
    ("initial", "fixed-beta"),
    ("beta", "0.001+0.1i"),
    ("alpha0", "1"),
    ("n-traj", "1000"),
    ("t-final", "1"),
    ("dt", "0.0001"),
    ("record-stride", "100"),
    ("threshold", "1000000"),
    ("seed", "0"),
    ("integrator", ""),
    ("times", "0:0.01:1"),
    ("t", "1.5707963267948966"),
    ("extent", ""),
    ("res", "256"),
    ("betas", "0,0.5,1,2"),
    ("points", "100"),
    ("tolerance", "1e-12"),
    ("out", "kerr-out"),
    ("format", "csv"),
];

/// Raw `key → (value, source)` assignments; later sources override earlier.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub values: BTreeMap<String, (String, Source)>,
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str, source: Source) -> Result<(), ConfigError> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                at: source,
            });
        }
        self.values.insert(key.to_string(), (value.to_string(), source));
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn load_key_values(&mut self, text: &str, path: &Path) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let source = Source::File {
                path: path.to_path_buf(),
                line: i + 1,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    reason: format!("expected `key = value`, got {line:?}"),
                    at: source,
                });
            };
            self.set(k.trim(), v.trim(), source)?;
        }
        Ok(())
    }

    /// The `config` object of a run manifest.
    pub fn load_manifest(&mut self, text: &str, path: &Path) -> Result<(), ConfigError> {
        let source = Source::Manifest { path: path.to_path_buf() };
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
            reason: format!("manifest is not valid JSON: {e}"),
            at: source.clone(),
        })?;
        let Some(cfg) = doc.get("config").and_then(|c| c.as_object()) else {
            return Err(ConfigError::Syntax {
                reason: "manifest has no `config` object".into(),
                at: source,
            });
        };
        for (k, v) in cfg {
            let Some(s) = v.as_str() else {
                return Err(ConfigError::Invalid {
                    key: k.clone(),
                    value: v.to_string(),
                    reason: "manifest values must be strings".into(),
                    at: source.clone(),
                });
            };
            self.set(k, s, source.clone())?;
        }
        Ok(())
    }

    /// Load a config file, deciding between a manifest (JSON object) and
    /// key=value text by the first non-blank character.
    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let bytes = std::fs::read(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let text = String::from_utf8(bytes).map_err(|_| ConfigError::Read {
            path: path.to_path_buf(),
            reason: "not valid UTF-8".into(),
        })?;
        if text.trim_start().starts_with('{') {
            self.load_manifest(&text, path)
        } else {
            self.load_key_values(&text, path)
        }
    }

    fn get(&self, key: &str) -> (String, Source) {
        match self.values.get(key) {
            Some((v, s)) => (v.clone(), s.clone()),
            None => {
                let d = KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or("");
                (d.to_string(), Source::Default)
            }
        }
    }
}

/// Parse `a+bi`, `a-bi`, `a`, `bi`, `i`, `-i` (exponents allowed).
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty complex literal".into());
    }
    let num = |t: &str| -> Result<f64, String> {
        let v: f64 = t.parse().map_err(|_| format!("bad number {t:?}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite number {t:?}"))
        }
    };
    let Some(body) = s.strip_suffix('i') else {
        return Ok(Complex64::new(num(&s)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => num(t)?,
    };
    Ok(Complex64::new(num(re)?, im))
}

/// Inverse of [`parse_complex`], exact for every finite value.
pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", z.re, z.im.abs())
}

/// `start:step:stop` including `stop` when within half a step, or a comma
/// separated list.
pub fn parse_times(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number {t:?}"));
    match parts.len() {
        1 => {
            let v: Vec<f64> = s.split(',').map(|t| num(t.trim())).collect::<Result<_, _>>()?;
            if v.iter().any(|t| !t.is_finite()) {
                return Err("times must be finite".into());
            }
            Ok(v)
        }
        3 => {
            let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                return Err("need finite start <= stop and step > 0".into());
            }
            // Last point may overshoot `stop` by strictly less than half a step.
            let n = ((stop - start) / step - 0.5).ceil().max(0.0);
            if n > 1e7 {
                return Err("time grid too long".into());
            }
            Ok((0..=n as usize).map(|k| start + step * k as f64).collect())
        }
        _ => Err("expected start:step:stop or a comma separated list".into()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub mu: f64,
    pub representation: Representation,
    pub ensemble: EnsembleConfig<f64>,
    pub alpha0: Complex64,
    pub times: Vec<f64>,
    pub qgrid_times: Vec<f64>,
    pub extent: f64,
    pub res: usize,
    pub betas: Vec<Complex64>,
    pub points: usize,
    pub tolerance: f64,
    pub out: PathBuf,
    pub format: OutputFormat,
    /// Every key with its resolved textual value, as recorded in the manifest.
    pub resolved: BTreeMap<String, String>,
}

struct Resolver<'a> {
    raw: &'a RawConfig,
    resolved: BTreeMap<String, String>,
}

impl Resolver<'_> {
    fn take<V>(&mut self, key: &str, parse: impl FnOnce(&str) -> Result<V, String>) -> Result<V, ConfigError> {
        let (value, source) = self.raw.get(key);
        let v = parse(&value).map_err(|reason| ConfigError::Invalid {
            key: key.to_string(),
            value: value.clone(),
            reason,
            at: source,
        })?;
        self.resolved.insert(key.to_string(), value);
        Ok(v)
    }

    /// Like [`take`](Self::take), but a key left at an empty default takes
    /// `fallback` (which is recorded).
    fn take_or(&mut self, key: &str, fallback: String, parse: impl FnOnce(&str) -> Result<f64, String>) -> Result<f64, ConfigError> {
        let (value, source) = self.raw.get(key);
        let value = if value.is_empty() && source == Source::Default { fallback } else { value };
        let v = parse(&value).map_err(|reason| ConfigError::Invalid {
            key: key.to_string(),
            value: value.clone(),
            reason,
            at: source,
        })?;
        self.resolved.insert(key.to_string(), value);
        Ok(v)
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite and > 0".into())
    }
}

fn count(min: usize) -> impl Fn(&str) -> Result<usize, String> {
    move |s: &str| {
        let v: usize = s.trim().parse().map_err(|_| format!("not a non-negative integer: {s:?}"))?;
        if v >= min {
            Ok(v)
        } else {
            Err(format!("must be >= {min}"))
        }
    }
}

/// The repr that round-trips through `str::parse::<f64>`.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

impl RunConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self, ConfigError> {
        let mut r = Resolver {
            raw,
            resolved: BTreeMap::new(),
        };
        let (cmd, _) = raw.get("command");
        if cmd.is_empty() {
            return Err(ConfigError::Missing("command".into()));
        }
        let command = r.take("command", |s| {
            Command::parse(s).ok_or_else(|| "expected simulate, analytic, compare, fpcheck, qgrid or diverge".to_string())
        })?;
        let mu = r.take("mu", positive)?;
        let representation = r.take("representation", |s| match s {
            "q" => Ok(Representation::Q),
            "positive-p" => Ok(Representation::PositiveP),
            _ => Err("expected q or positive-p".into()),
        })?;
        let beta = r.take("beta", parse_complex)?;
        let alpha0 = r.take("alpha0", parse_complex)?;
        let initial_mode = r.take("initial", |s| match s {
            "fixed-beta" => Ok(InitialMode::FixedBeta(beta)),
            "sample-q0" => Ok(InitialMode::SampleQ0(alpha0)),
            "delta-positive-p" => Ok(InitialMode::DeltaPositiveP(alpha0)),
            _ => Err("expected fixed-beta, sample-q0 or delta-positive-p".into()),
        })?;
        let n_trajectories = r.take("n-traj", count(1))?;
        let t_final = r.take("t-final", positive)?;
        let dt = r.take("dt", positive)?;
        let record_stride = r.take("record-stride", count(1))?;
        let divergence_threshold = r.take("threshold", positive)?;
        let master_seed = r.take("seed", |s| s.trim().parse::<u64>().map_err(|_| "expected an unsigned 64-bit integer".into()))?;
        let default_integrator = if command == Command::Diverge { "pathwise" } else { "heun" };
        let (iv, isrc) = raw.get("integrator");
        let integrator_text = if iv.is_empty() && isrc == Source::Default { default_integrator.to_string() } else { iv };
        let integrator = match integrator_text.as_str() {
            "heun" => Integrator::Heun,
            "pathwise" => Integrator::Pathwise,
            _ => {
                return Err(ConfigError::Invalid {
                    key: "integrator".into(),
                    value: integrator_text,
                    reason: "expected heun or pathwise".into(),
                    at: isrc,
                })
            }
        };
        r.resolved.insert("integrator".into(), integrator_text);
        let times = r.take("times", parse_times)?;
        let qgrid_times = r.take("t", parse_times)?;
        let extent = r.take_or("extent", fmt_f64(alpha0.norm() + 4.0), positive)?;
        let res = r.take("res", count(2))?;
        let betas = r.take("betas", |s| s.split(',').map(parse_complex).collect::<Result<Vec<_>, _>>())?;
        let points = r.take("points", count(1))?;
        let tolerance = r.take("tolerance", positive)?;
        let out = r.take("out", |s| if s.is_empty() { Err("empty path".into()) } else { Ok(PathBuf::from(s)) })?;
        let format = r.take("format", |s| match s {
            "csv" => Ok(OutputFormat::Csv),
            "json-lines" => Ok(OutputFormat::JsonLines),
            _ => Err("expected csv or json-lines".into()),
        })?;

        let ensemble = EnsembleConfig {
            n_trajectories,
            initial_mode,
            t_final,
            dt,
            record_stride,
            divergence_threshold,
            master_seed,
            integrator,
            zero_noise: false,
        };
        if matches!(command, Command::Simulate | Command::Compare | Command::Diverge) {
            ensemble.validate().map_err(|e| {
                let (value, source) = raw.get("dt");
                ConfigError::Invalid {
                    key: "dt".into(),
                    value,
                    reason: e.to_string(),
                    at: source,
                }
            })?;
        }
        Ok(Self {
            command,
            mu,
            representation,
            ensemble,
            alpha0,
            times,
            qgrid_times,
            extent,
            res,
            betas,
            points,
            tolerance,
            out,
            format,
            resolved: r.resolved,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.001+0.1i").unwrap(), Complex64::new(0.001, 0.1));
        assert_eq!(parse_complex("1").unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(parse_complex("-2.5i").unwrap(), Complex64::new(0.0, -2.5));
        assert_eq!(parse_complex("i").unwrap(), Complex64::new(0.0, 1.0));
        assert_eq!(parse_complex("3-i").unwrap(), Complex64::new(3.0, -1.0));
        assert_eq!(parse_complex("1e-3-2E+2i").unwrap(), Complex64::new(1e-3, -200.0));
        assert_eq!(parse_complex(" -1 + 2i ").unwrap(), Complex64::new(-1.0, 2.0));
        assert!(parse_complex("1+").is_err());
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
        for z in [Complex64::new(0.1, -0.0), Complex64::new(-1e-300, 3.3e10), Complex64::new(1.0 / 3.0, 2.0 / 7.0)] {
            let back = parse_complex(&format_complex(z)).unwrap();
            assert_eq!(back.re.to_bits(), z.re.to_bits());
            assert_eq!(back.im.to_bits(), z.im.to_bits());
        }
    }

    #[test]
    fn time_grids() {
        let t = parse_times("0:0.01:6.3").unwrap();
        assert_eq!(t.len(), 631);
        assert!((t[630] - 6.3).abs() < 1e-12);
        assert_eq!(parse_times("0:0.3:1").unwrap().len(), 4);
        assert_eq!(parse_times("0:0.4:1").unwrap().len(), 3);
        assert_eq!(parse_times("2:0.1:2").unwrap(), vec![2.0]);
        assert_eq!(parse_times("1.5").unwrap(), vec![1.5]);
        assert_eq!(parse_times("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_times("0:0:1").is_err());
        assert!(parse_times("1:0.1:0").is_err());
        assert!(parse_times("0:1").is_err());
    }

    #[test]
    fn key_value_file_with_line_numbers() {
        let mut raw = RawConfig::default();
        let path = Path::new("run.cfg");
        raw.load_key_values("# comment\ncommand = analytic\n\nmu=2 # trailing\n", path).unwrap();
        let cfg = RunConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.command, Command::Analytic);
        assert_eq!(cfg.mu, 2.0);
        assert_eq!(cfg.resolved["extent"], "5");

        let err = RawConfig::default().load_key_values("mu = 1\nbogus = 3\n", path).unwrap_err();
        assert_eq!(err.to_string(), "run.cfg:2: unknown key `bogus`");
        let err = RawConfig::default().load_key_values("mu 1\n", path).unwrap_err();
        assert!(err.to_string().starts_with("run.cfg:1:"));

        let mut raw = RawConfig::default();
        raw.load_key_values("command = simulate\ndt = -1\n", path).unwrap();
        let err = RunConfig::resolve(&raw).unwrap_err();
        assert!(matches!(&err, ConfigError::Invalid { key, .. } if key == "dt"), "{err}");
        assert!(err.to_string().contains("run.cfg:2"));
    }

    #[test]
    fn missing_command_and_type_errors() {
        assert_eq!(RunConfig::resolve(&RawConfig::default()).unwrap_err(), ConfigError::Missing("command".into()));
        let mut raw = RawConfig::default();
        raw.set("command", "simulate", Source::Flag).unwrap();
        raw.set("n-traj", "many", Source::Flag).unwrap();
        assert!(matches!(RunConfig::resolve(&raw), Err(ConfigError::Invalid { key, .. }) if key == "n-traj"));
        let mut raw = RawConfig::default();
        raw.set("command", "simulate", Source::Flag).unwrap();
        raw.set("dt", "0.3", Source::Flag).unwrap();
        assert!(matches!(RunConfig::resolve(&raw), Err(ConfigError::Invalid { key, .. }) if key == "dt"));
    }

    #[test]
    fn per_command_defaults() {
        let mut raw = RawConfig::default();
        raw.set("command", "diverge", Source::Flag).unwrap();
        let cfg = RunConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.ensemble.integrator, Integrator::Pathwise);
        assert_eq!(cfg.resolved["integrator"], "pathwise");
        assert_eq!(cfg.betas.len(), 4);
        assert_eq!(cfg.resolved.len(), KEYS.len());
    }

    #[test]
    fn manifest_round_trip() {
        let mut raw = RawConfig::default();
        raw.set("command", "qgrid", Source::Flag).unwrap();
        raw.set("alpha0", "3", Source::Flag).unwrap();
        let cfg = RunConfig::resolve(&raw).unwrap();
        let doc = serde_json::json!({ "config": cfg.resolved });
        let mut again = RawConfig::default();
        again.load_manifest(&doc.to_string(), Path::new("m.json")).unwrap();
        assert_eq!(RunConfig::resolve(&again).unwrap(), cfg);
        let bad = serde_json::json!({ "config": { "nope": "1" } });
        assert!(matches!(
            RawConfig::default().load_manifest(&bad.to_string(), Path::new("m.json")),
            Err(ConfigError::UnknownKey { .. })
        ));
    }
}
