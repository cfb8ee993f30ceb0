//! Layered run configuration.
//!
//! Every setting is a `key = value` pair. Values are resolved from, in
//! increasing priority: built-in defaults, a config file (`--config` or
//! `BTC_CONFIG`), `BTC_<KEY>` environment variables, and command-line
//! flags. The winning source is kept so the manifest and error messages can
//! name it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use btc_core::thermo::EntropyRate;
use btc_core::SystemParams;
use clap::{Arg, ArgAction};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "BTC_";

/// Where a value came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Default,
    Argument,
    File { path: PathBuf, line: usize },
    Env(String),
    Flag(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Default => write!(f, "default"),
            Source::Argument => write!(f, "command-line argument"),
            Source::File { path, line } => write!(f, "{}:{line}", path.display()),
            Source::Env(name) => write!(f, "environment variable {name}"),
            Source::Flag(name) => write!(f, "flag --{name}"),
        }
    }
}

pub struct KeySpec {
    pub key: &'static str,
    pub flag: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

impl KeySpec {
    pub fn env_name(&self) -> String {
        format!("{ENV_PREFIX}{}", self.key.to_uppercase())
    }
}

const fn spec(
    key: &'static str,
    flag: &'static str,
    default: Option<&'static str>,
    help: &'static str,
) -> KeySpec {
    KeySpec {
        key,
        flag,
        default,
        help,
    }
}

/// Every accepted key, in manifest order.
pub const KEYS: &[KeySpec] = &[
    spec("command", "command", None, "subcommand to run"),
    spec("nspins", "nspins", Some("10"), "number of spins N"),
    spec("omega", "omega", Some("2"), "transverse field Ω"),
    spec("gamma", "gamma", Some("1"), "collective decay rate Γ"),
    spec(
        "omega_bath",
        "omega-bath",
        Some("1"),
        "bath oscillator energy ω",
    ),
    spec("nbeta", "nbeta", Some("1"), "thermal occupation n_β"),
    spec("t_max", "t-max", Some("10"), "final time"),
    spec("dt", "dt", Some("0.001"), "RK4 step"),
    spec(
        "save_every",
        "save-every",
        Some("10"),
        "store every k-th step",
    ),
    spec(
        "dt_channel",
        "dt-channel",
        Some("0.1"),
        "duration of the channel for ep-dist",
    ),
    spec(
        "t_state",
        "t-state",
        Some("1"),
        "evolution time of the ep-dist input state",
    ),
    spec(
        "n_max",
        "n-max",
        Some("auto"),
        "ancilla truncation (auto or an integer ≥ 1)",
    ),
    spec("bin_tol", "bin-tol", Some("1e-10"), "σ merging tolerance"),
    spec(
        "initial",
        "initial",
        Some("ground-h"),
        "ground-h, ground-vz, coherent or thermal-ladder",
    ),
    spec(
        "theta",
        "theta",
        Some("0"),
        "polar angle of the coherent initial state",
    ),
    spec(
        "phi",
        "phi",
        Some("0"),
        "azimuth of the coherent initial state",
    ),
    spec(
        "omegas",
        "omegas",
        Some("0.1:2.0:0.1"),
        "sweep values, lo:hi:step or a comma list",
    ),
    spec(
        "method",
        "method",
        Some("meanfield"),
        "sweep-power backend: meanfield or lindblad",
    ),
    spec("jobs", "jobs", Some("1"), "worker threads for sweeps"),
    spec(
        "entropy_rate",
        "entropy-rate",
        Some("difference"),
        "Ṡ estimator: difference or exact",
    ),
    spec(
        "deltas",
        "deltas",
        Some("4e-3,2e-3,1e-3"),
        "collision times for collision-check",
    ),
    spec("output", "output", Some("btc-out"), "output directory"),
    spec(
        "overwrite",
        "overwrite",
        Some("false"),
        "replace existing outputs",
    ),
];

fn key_spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    MeanField,
    Fluct,
    Lindblad,
    Steady,
    SweepPower,
    CollisionCheck,
    EpDist,
    EntropyCompare,
}

impl CommandKind {
    pub const ALL: [CommandKind; 8] = [
        CommandKind::MeanField,
        CommandKind::Fluct,
        CommandKind::Lindblad,
        CommandKind::Steady,
        CommandKind::SweepPower,
        CommandKind::CollisionCheck,
        CommandKind::EpDist,
        CommandKind::EntropyCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::MeanField => "meanfield",
            CommandKind::Fluct => "fluct",
            CommandKind::Lindblad => "lindblad",
            CommandKind::Steady => "steady",
            CommandKind::SweepPower => "sweep-power",
            CommandKind::CollisionCheck => "collision-check",
            CommandKind::EpDist => "ep-dist",
            CommandKind::EntropyCompare => "entropy-compare",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    GroundH,
    GroundVz,
    Coherent { theta: f64, phi: f64 },
    ThermalLadder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMethod {
    MeanField,
    Lindblad,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Numeric {
    pub t_max: f64,
    pub dt: f64,
    pub save_every: usize,
    pub dt_channel: f64,
    pub t_state: f64,
    /// `None` picks the truncation from the thermal tail.
    pub n_max: Option<usize>,
    pub bin_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Io {
    pub output: PathBuf,
    pub overwrite: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub omegas: Vec<f64>,
    pub method: SweepMethod,
    pub jobs: usize,
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub params: SystemParams,
    pub numeric: Numeric,
    pub io: Io,
    pub initial: InitialState,
    pub sweep: Sweep,
    pub entropy_rate: EntropyRate,
    pub deltas: Vec<f64>,
    /// `(key, value, source)` for every key, in [`KEYS`] order.
    pub effective: Vec<(String, String, Source)>,
}

/// Raw `key → (value, source)` map before typing.
#[derive(Clone, Debug, Default)]
pub struct Layers {
    values: BTreeMap<&'static str, (String, Source)>,
}

impl Layers {
    fn set(&mut self, spec: &'static KeySpec, value: String, source: Source) {
        self.values.insert(spec.key, (value, source));
    }

    pub fn get(&self, key: &str) -> Option<&(String, Source)> {
        self.values.get(key)
    }
}

fn cli_command() -> clap::Command {
    let mut cmd = clap::Command::new("btc")
        .about("Boundary time-crystal thermodynamics simulator")
        .version(env!("CARGO_PKG_VERSION"))
        .after_help(
            "Settings are resolved as flags > BTC_<KEY> environment variables > config file > defaults.",
        )
        .arg(
            Arg::new("command")
                .value_name("COMMAND")
                .help("meanfield, fluct, lindblad, steady, sweep-power, collision-check, ep-dist or entropy-compare"),
        )
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("line-oriented `key = value` file; `#` starts a comment"),
        );
    for k in KEYS.iter().filter(|k| k.key != "command") {
        let arg = Arg::new(k.key).long(k.flag).help(k.help);
        let arg = if k.key == "overwrite" {
            arg.action(ArgAction::SetTrue)
        } else {
            arg.value_name("VALUE").allow_negative_numbers(true)
        };
        cmd = cmd.arg(arg);
    }
    cmd
}

/// Reads a config file into `layers`, rejecting unknown keys and malformed
/// lines.
pub fn read_config_file(path: &Path, layers: &mut Layers) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(CliError::config(format!(
                "{}:{line}: expected `key = value`, found `{content}`",
                path.display()
            )));
        };
        let key = key.trim();
        let spec = key_spec(key).ok_or_else(|| {
            CliError::config(format!("{}:{line}: unknown key `{key}`", path.display()))
        })?;
        layers.set(
            spec,
            value.trim().to_string(),
            Source::File {
                path: path.to_path_buf(),
                line,
            },
        );
    }
    Ok(())
}

/// Resolves the configuration from argv, environment pairs and an optional
/// config file named by either.
pub fn parse_config<I, T>(args: I, env: &[(String, String)]) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = cli_command()
        .try_get_matches_from(args)
        .map_err(CliError::from_clap)?;

    let mut layers = Layers::default();
    for k in KEYS {
        if let Some(d) = k.default {
            layers.set(k, d.to_string(), Source::Default);
        }
    }

    let env_config = env
        .iter()
        .find(|(k, _)| k == "BTC_CONFIG")
        .map(|(_, v)| v.clone());
    let config_path = matches.get_one::<String>("config").cloned().or(env_config);
    if let Some(path) = config_path {
        read_config_file(Path::new(&path), &mut layers)?;
    }

    for (name, value) in env {
        let Some(suffix) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        if suffix == "CONFIG" {
            continue;
        }
        let spec = KEYS
            .iter()
            .find(|k| k.key.to_uppercase() == suffix)
            .ok_or_else(|| CliError::config(format!("unknown environment variable {name}")))?;
        layers.set(spec, value.clone(), Source::Env(name.clone()));
    }

    if let Some(c) = matches.get_one::<String>("command") {
        layers.set(&KEYS[0], c.clone(), Source::Argument);
    }
    for k in KEYS.iter().filter(|k| k.key != "command") {
        if k.key == "overwrite" {
            if matches.get_flag(k.key) {
                layers.set(k, "true".into(), Source::Flag(k.flag.into()));
            }
        } else if let Some(v) = matches.get_one::<String>(k.key) {
            layers.set(k, v.clone(), Source::Flag(k.flag.into()));
        }
    }

    resolve(&layers)
}

struct Reader<'a> {
    layers: &'a Layers,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Result<(&str, &Source), CliError> {
        match self.layers.get(key) {
            Some((v, s)) => Ok((v.as_str(), s)),
            None => Err(CliError::config(format!(
                "missing required field `{key}` (give it as the first argument or `{key} = ...`)"
            ))),
        }
    }

    fn invalid(&self, key: &str, why: impl fmt::Display) -> CliError {
        let (v, s) = self.raw(key).unwrap_or(("", &Source::Default));
        CliError::config(format!("invalid value `{v}` for {key} ({s}): {why}"))
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        let (v, _) = self.raw(key)?;
        let x: f64 = v.parse().map_err(|_| self.invalid(key, "not a number"))?;
        if !x.is_finite() {
            return Err(self.invalid(key, "must be finite"));
        }
        Ok(x)
    }

    fn positive(&self, key: &str, symbol: &str) -> Result<f64, CliError> {
        let x = self.f64(key)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.invalid(key, format!("must satisfy {symbol} > 0")))
        }
    }

    fn count(&self, key: &str, min: usize) -> Result<usize, CliError> {
        let (v, _) = self.raw(key)?;
        let n: usize = v
            .parse()
            .map_err(|_| self.invalid(key, "not a non-negative integer"))?;
        if n < min {
            return Err(self.invalid(key, format!("must be ≥ {min}")));
        }
        Ok(n)
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let (v, _) = self.raw(key)?;
        let values = parse_list(v).map_err(|why| self.invalid(key, why))?;
        if values.is_empty() {
            return Err(self.invalid(key, "empty list"));
        }
        Ok(values)
    }
}

/// `lo:hi:step` (inclusive, rounded to 12 decimals) or `a,b,c`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| -> Result<f64, String> {
        let x: f64 = t
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a number", t.trim()))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("`{}` is not finite", t.trim()))
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if step.is_nan() || step <= 0.0 || hi < lo {
                return Err("range needs step > 0 and hi ≥ lo".into());
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        [single] => single
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(num)
            .collect(),
        _ => Err("expected lo:hi:step or a comma-separated list".into()),
    }
}

fn resolve(layers: &Layers) -> Result<RunConfig, CliError> {
    let r = Reader { layers };

    let (cmd, _) = r.raw("command")?;
    let command = CommandKind::parse(cmd).ok_or_else(|| {
        let names: Vec<&str> = CommandKind::ALL.iter().map(|c| c.name()).collect();
        r.invalid("command", format!("expected one of {}", names.join(", ")))
    })?;

    let n_spins = r.count("nspins", 1)?;
    if n_spins > btc_core::dicke::DEFAULT_MAX_SPINS {
        return Err(r.invalid(
            "nspins",
            format!("must be ≤ {}", btc_core::dicke::DEFAULT_MAX_SPINS),
        ));
    }
    let omega = r.f64("omega")?;
    let gamma = r.positive("gamma", "Γ")?;
    let omega_bath = r.positive("omega_bath", "ω")?;
    let n_beta = r.f64("nbeta")?;
    if n_beta < 0.0 {
        return Err(r.invalid("nbeta", "must satisfy n_β ≥ 0"));
    }
    let params = SystemParams::new(n_spins, omega, gamma, omega_bath, n_beta)
        .map_err(|e| CliError::config(e.to_string()))?;

    let n_max = match r.raw("n_max")?.0 {
        "auto" => None,
        _ => Some(r.count("n_max", 1)?),
    };
    let numeric = Numeric {
        t_max: r.positive("t_max", "t_max")?,
        dt: r.positive("dt", "dt")?,
        save_every: r.count("save_every", 1)?,
        dt_channel: r.positive("dt_channel", "dt_channel")?,
        t_state: {
            let t = r.f64("t_state")?;
            if t < 0.0 {
                return Err(r.invalid("t_state", "must satisfy t_state ≥ 0"));
            }
            t
        },
        n_max,
        bin_tol: r.positive("bin_tol", "bin_tol")?,
    };
    if numeric.dt > numeric.t_max {
        return Err(r.invalid("dt", "must not exceed t_max"));
    }

    let initial = match r.raw("initial")?.0 {
        "ground-h" => InitialState::GroundH,
        "ground-vz" => InitialState::GroundVz,
        "coherent" => InitialState::Coherent {
            theta: r.f64("theta")?,
            phi: r.f64("phi")?,
        },
        "thermal-ladder" => InitialState::ThermalLadder,
        _ => {
            return Err(r.invalid(
                "initial",
                "expected ground-h, ground-vz, coherent or thermal-ladder",
            ))
        }
    };

    let omegas = r.list("omegas")?;
    let method = match r.raw("method")?.0 {
        "meanfield" => SweepMethod::MeanField,
        "lindblad" => SweepMethod::Lindblad,
        _ => return Err(r.invalid("method", "expected meanfield or lindblad")),
    };
    let sweep = Sweep {
        omegas,
        method,
        jobs: r.count("jobs", 1)?,
    };

    let entropy_rate = match r.raw("entropy_rate")?.0 {
        "difference" => EntropyRate::FiniteDifference,
        "exact" => EntropyRate::Exact,
        _ => return Err(r.invalid("entropy_rate", "expected difference or exact")),
    };

    let deltas = r.list("deltas")?;
    if deltas.iter().any(|&d| d <= 0.0) {
        return Err(r.invalid("deltas", "every δt must be > 0"));
    }

    let overwrite = match r.raw("overwrite")?.0 {
        "true" | "1" | "yes" => true,
        "false" | "0" | "no" => false,
        _ => return Err(r.invalid("overwrite", "expected true or false")),
    };
    let (out, _) = r.raw("output")?;
    if out.is_empty() {
        return Err(r.invalid("output", "empty path"));
    }
    let io = Io {
        output: PathBuf::from(out),
        overwrite,
    };

    let effective = KEYS
        .iter()
        .filter_map(|k| {
            layers
                .get(k.key)
                .map(|(v, s)| (k.key.to_string(), v.clone(), s.clone()))
        })
        .collect();

    Ok(RunConfig {
        command,
        params,
        numeric,
        io,
        initial,
        sweep,
        entropy_rate,
        deltas,
        effective,
    })
}

impl RunConfig {
    pub fn source_of(&self, key: &str) -> Option<&Source> {
        self.effective
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, _, s)| s)
    }

    pub fn value_of(&self, key: &str) -> Option<&str> {
        self.effective
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }
}
