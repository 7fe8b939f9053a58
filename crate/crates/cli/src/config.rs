//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment. Keys are case-sensitive;
//! unknown keys are rejected, except `const.NAME`, which defines a kernel
//! constant. `N`, `backend` and `workers` accept comma-separated lists
//! (used by `bench`).

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use partloop_core::lattice::Structure;
use partloop_core::sim::{LjParams, ThermostatParams};
use partloop_core::{Backend, Constant, Scalar};

/// Seed used when the configuration does not set one.
pub const DEFAULT_SEED: u64 = 20_160_901;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    AnalyzeBoa,
    AnalyzeCna,
    Bench,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::AnalyzeBoa => "analyze-boa",
            Mode::AnalyzeCna => "analyze-cna",
            Mode::Bench => "bench",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "analyze-boa" => Ok(Mode::AnalyzeBoa),
            "analyze-cna" => Ok(Mode::AnalyzeCna),
            "bench" => Ok(Mode::Bench),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

/// Force kernel implementation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelChoice {
    Native,
    /// Built-in kernel text.
    Dsl,
    /// Kernel text read from a file.
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Xyz,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Xyz => "xyz",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required keys: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("{0}")]
    Invalid(String),
}

fn at(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Line {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub lattice: Structure,
    /// Particle counts; `bench` runs each, other modes use one.
    pub particles: Vec<usize>,
    /// Unit cells per side for generated analysis lattices.
    pub cells: usize,
    /// Nearest-neighbour distance of generated analysis lattices.
    pub spacing: f64,
    pub density: f64,
    pub temperature: f64,
    pub lj: LjParams,
    pub delta: f64,
    pub dt: f64,
    pub n_max: usize,
    pub reuse: usize,
    pub thermostat: Option<ThermostatParams>,
    pub backends: Vec<Backend>,
    pub workers: Vec<usize>,
    pub seed: u64,
    pub seed_was_random: bool,
    pub kernel: KernelChoice,
    pub constants: Vec<Constant>,
    pub sample_every: usize,
    /// Snapshot interval in steps; 0 writes only the final state.
    pub snapshot_every: usize,
    pub format: Format,
    /// On-the-fly bond-order analysis during `simulate`.
    pub boa: bool,
    pub boa_l: Vec<u32>,
    pub analysis_rc: Option<f64>,
    /// XYZ file to analyse instead of a generated lattice.
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub bench_steps: usize,
}

impl RunConfig {
    /// Parses a configuration whose `mode` key is required.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_inner(text, None)
    }

    /// Parses a configuration for `mode`; a `mode` key in the text must
    /// agree with it.
    pub fn parse_for(text: &str, mode: Mode) -> Result<Self, ConfigError> {
        Self::parse_inner(text, Some(mode))
    }

    fn parse_inner(text: &str, mode: Option<Mode>) -> Result<Self, ConfigError> {
        let raw = Raw::read(text)?;
        raw.build(mode)
    }

    pub fn backend(&self) -> Backend {
        self.backends[0]
    }

    pub fn worker_count(&self) -> usize {
        self.workers[0]
    }

    pub fn npart(&self) -> usize {
        self.particles[0]
    }

    /// Unit cells per side giving `n` particles of the configured lattice.
    pub fn cells_for(&self, n: usize) -> Result<usize, ConfigError> {
        cells_for(self.lattice, n)
    }

    /// Analysis cutoff: `analysis_rc` if set, otherwise the standard one
    /// for the configured lattice at the configured spacing.
    pub fn analysis_cutoff(&self) -> f64 {
        self.analysis_rc.unwrap_or_else(|| {
            self.lattice
                .analysis_cutoff(self.lattice.lattice_constant_for(self.spacing))
        })
    }
}

fn cells_for(structure: Structure, n: usize) -> Result<usize, ConfigError> {
    let per = structure.atoms_per_cell();
    let cells = n / per;
    let side = (cells as f64).cbrt().round() as usize;
    if n.is_multiple_of(per) && side.pow(3) == cells && side > 0 {
        Ok(side)
    } else {
        Err(ConfigError::Invalid(format!(
            "N = {n} is not {per} k^3 for a whole number k ({structure} lattice)"
        )))
    }
}

/// Key-value pairs with the line each came from.
struct Raw {
    values: HashMap<String, (usize, String)>,
    constants: Vec<(usize, String, String)>,
}

const KEYS: &[&str] = &[
    "mode",
    "lattice",
    "N",
    "cells",
    "spacing",
    "rho",
    "temperature",
    "epsilon",
    "sigma",
    "rc",
    "delta",
    "dt",
    "n_max",
    "reuse",
    "thermostat_T",
    "thermostat_nu",
    "backend",
    "workers",
    "seed",
    "kernel",
    "sample_every",
    "snapshot_every",
    "format",
    "boa",
    "boa_l",
    "analysis_rc",
    "input",
    "out_dir",
    "bench_steps",
];

impl Raw {
    fn read(text: &str) -> Result<Self, ConfigError> {
        let mut values = HashMap::new();
        let mut constants = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let n = k + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| at(n, format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(at(n, format!("`{key}` has no value")));
            }
            if let Some(name) = key.strip_prefix("const.") {
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(at(n, format!("bad constant name `{name}`")));
                }
                if constants.iter().any(|(_, c, _)| c == name) {
                    return Err(at(n, format!("constant `{name}` defined twice")));
                }
                constants.push((n, name.to_string(), value.to_string()));
                continue;
            }
            if !KEYS.contains(&key) {
                return Err(at(n, format!("unknown key `{key}`")));
            }
            if let Some((first, _)) = values.insert(key.to_string(), (n, value.to_string())) {
                return Err(at(n, format!("`{key}` already set on line {first}")));
            }
        }
        Ok(Self { values, constants })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| at(*line, format!("`{key}`: cannot parse `{v}`: {e}"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|p| {
                    let p = p.trim();
                    p.parse()
                        .map_err(|e| at(*line, format!("`{key}`: cannot parse `{p}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Line of `key`, for validation messages.
    fn line(&self, key: &str) -> Option<usize> {
        self.values.get(key).map(|(l, _)| *l)
    }

    fn check(&self, ok: bool, key: &str, what: &str, value: impl fmt::Display) -> Result<(), ConfigError> {
        if ok {
            return Ok(());
        }
        let message = format!("`{key}` {what}, got {value}");
        Err(match self.line(key) {
            Some(line) => at(line, message),
            None => ConfigError::Invalid(message),
        })
    }

    fn build(&self, forced: Option<Mode>) -> Result<RunConfig, ConfigError> {
        let mode: Option<Mode> = self.get("mode")?;
        let mode = match (mode, forced) {
            (Some(m), Some(f)) if m != f => {
                return Err(at(
                    self.line("mode").unwrap_or(0),
                    format!("mode `{m}` does not match command `{f}`"),
                ))
            }
            (Some(m), _) | (None, Some(m)) => m,
            (None, None) => {
                let mut missing = vec!["mode".to_string()];
                missing.extend(
                    ["N", "rho", "n_max"]
                        .iter()
                        .filter(|k| !self.values.contains_key(**k))
                        .map(|k| k.to_string()),
                );
                return Err(ConfigError::Missing(missing));
            }
        };

        let input: Option<PathBuf> = self.get::<String>("input")?.map(PathBuf::from);
        let required: &[&str] = match mode {
            Mode::Simulate => &["N", "rho", "n_max"],
            Mode::Bench => &["N", "rho"],
            Mode::AnalyzeBoa | Mode::AnalyzeCna if input.is_some() => &["analysis_rc"],
            Mode::AnalyzeBoa | Mode::AnalyzeCna => &["lattice"],
        };
        let lattice: Structure = match self.values.get("lattice") {
            Some((line, v)) => v.parse().map_err(|e| at(*line, format!("`lattice`: {e}")))?,
            None => Structure::Sc,
        };
        let particles: Vec<usize> = self.list("N")?.unwrap_or_default();
        let density: f64 = self.get("rho")?.unwrap_or(1.0);
        let temperature: f64 = self.get("temperature")?.unwrap_or(1.0);
        let epsilon: f64 = self.get("epsilon")?.unwrap_or(1.0);
        let sigma: f64 = self.get("sigma")?.unwrap_or(1.0);
        let rc: f64 = self.get("rc")?.unwrap_or(2.5);
        let delta: f64 = self.get("delta")?.unwrap_or(0.25);
        let dt: f64 = self.get("dt")?.unwrap_or(0.005);
        let n_max: usize = self.get("n_max")?.unwrap_or(0);
        let reuse: usize = self.get("reuse")?.unwrap_or(20);
        let cells: usize = self.get("cells")?.unwrap_or(4);
        let spacing: f64 = self.get("spacing")?.unwrap_or(1.0);
        let sample_every: usize = self.get("sample_every")?.unwrap_or(10);
        let snapshot_every: usize = self.get("snapshot_every")?.unwrap_or(0);
        let bench_steps: usize = self.get("bench_steps")?.unwrap_or(10);
        let analysis_rc: Option<f64> = self.get("analysis_rc")?;
        let boa: bool = self.get("boa")?.unwrap_or(false);
        let boa_l: Vec<u32> = self.list("boa_l")?.unwrap_or_else(|| vec![4, 6]);

        let missing: Vec<String> = required
            .iter()
            .filter(|k| !self.values.contains_key(**k))
            .map(|k| k.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }

        self.check(
            particles.iter().all(|&n| n > 0),
            "N",
            "must be positive",
            format!("{particles:?}"),
        )?;
        self.check(density.is_finite() && density > 0.0, "rho", "must be positive", density)?;
        self.check(
            temperature.is_finite() && temperature >= 0.0,
            "temperature",
            "must be non-negative",
            temperature,
        )?;
        self.check(
            epsilon.is_finite() && epsilon > 0.0,
            "epsilon",
            "must be positive",
            epsilon,
        )?;
        self.check(sigma.is_finite() && sigma > 0.0, "sigma", "must be positive", sigma)?;
        self.check(rc.is_finite() && rc > 0.0, "rc", "must be positive", rc)?;
        self.check(rc > sigma, "rc", "must exceed sigma", rc)?;
        self.check(
            delta.is_finite() && delta >= 0.0,
            "delta",
            "must be non-negative",
            delta,
        )?;
        self.check(dt.is_finite() && dt > 0.0, "dt", "must be positive", dt)?;
        self.check(reuse >= 1, "reuse", "must be at least 1", reuse)?;
        self.check(cells >= 1, "cells", "must be at least 1", cells)?;
        self.check(
            spacing.is_finite() && spacing > 0.0,
            "spacing",
            "must be positive",
            spacing,
        )?;
        self.check(sample_every >= 1, "sample_every", "must be at least 1", sample_every)?;
        self.check(bench_steps >= 1, "bench_steps", "must be at least 1", bench_steps)?;
        self.check(
            snapshot_every.is_multiple_of(sample_every),
            "snapshot_every",
            "must be a multiple of sample_every",
            snapshot_every,
        )?;
        self.check(!boa_l.is_empty(), "boa_l", "needs at least one degree", "nothing")?;
        if let Some(r) = analysis_rc {
            self.check(r.is_finite() && r > 0.0, "analysis_rc", "must be positive", r)?;
        }
        if mode == Mode::Simulate && boa && analysis_rc.is_none() {
            return Err(ConfigError::Missing(vec!["analysis_rc".into()]));
        }
        let lj = LjParams {
            epsilon,
            sigma,
            r_c: rc,
        };

        let thermostat = match self.get::<f64>("thermostat_T")? {
            Some(t) => {
                let nu: f64 = self.get("thermostat_nu")?.unwrap_or(1.0);
                self.check(t.is_finite() && t >= 0.0, "thermostat_T", "must be non-negative", t)?;
                self.check(nu.is_finite() && nu >= 0.0, "thermostat_nu", "must be non-negative", nu)?;
                self.check(nu * dt <= 1.0, "thermostat_nu", "times dt must not exceed 1", nu * dt)?;
                Some((t, nu))
            }
            None if self.values.contains_key("thermostat_nu") => {
                return Err(at(
                    self.line("thermostat_nu").unwrap_or(0),
                    "`thermostat_nu` needs `thermostat_T`",
                ))
            }
            None => None,
        };

        let backends: Vec<Backend> = match self.values.get("backend") {
            Some((line, v)) => v
                .split(',')
                .map(|p| p.trim().parse().map_err(|e| at(*line, format!("`backend`: {e}"))))
                .collect::<Result<_, _>>()?,
            None if mode == Mode::Bench => vec![Backend::CellList, Backend::NeighbourList],
            None => vec![Backend::NeighbourList],
        };
        let workers: Vec<usize> = self.list("workers")?.unwrap_or_else(|| vec![1]);
        self.check(
            workers.iter().all(|&w| w >= 1),
            "workers",
            "must be at least 1",
            format!("{workers:?}"),
        )?;

        let (seed, seed_was_random) = match self.values.get("seed") {
            Some((_, v)) if v == "random" => {
                let s: u64 = rand::random();
                log::info!("seed = random: drew seed {s}");
                (s, true)
            }
            Some((line, v)) => (
                v.parse()
                    .map_err(|e| at(*line, format!("`seed`: cannot parse `{v}`: {e}")))?,
                false,
            ),
            None => (DEFAULT_SEED, false),
        };

        let kernel = match self.get::<String>("kernel")?.as_deref() {
            None | Some("native") => KernelChoice::Native,
            Some("dsl") => KernelChoice::Dsl,
            Some(path) => KernelChoice::File(PathBuf::from(path)),
        };
        let format = match self.get::<String>("format")?.as_deref() {
            None | Some("xyz") => Format::Xyz,
            Some("csv") => Format::Csv,
            Some(other) => {
                return Err(at(
                    self.line("format").unwrap_or(0),
                    format!("`format` must be xyz or csv, got `{other}`"),
                ))
            }
        };
        let constants = self
            .constants
            .iter()
            .map(|(line, name, v)| {
                let value = if let Ok(i) = v.parse::<i64>() {
                    Scalar::Int(i)
                } else {
                    Scalar::Float(
                        v.parse::<f64>()
                            .map_err(|e| at(*line, format!("`const.{name}`: cannot parse `{v}`: {e}")))?,
                    )
                };
                Ok(Constant::new(name.as_str(), value))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;

        if matches!(mode, Mode::Simulate | Mode::AnalyzeBoa | Mode::AnalyzeCna) && particles.len() > 1 {
            return Err(at(
                self.line("N").unwrap_or(0),
                format!("`N` takes one value in {mode} mode"),
            ));
        }
        if mode != Mode::Bench {
            for (key, len) in [("backend", backends.len()), ("workers", workers.len())] {
                if len > 1 {
                    return Err(at(
                        self.line(key).unwrap_or(0),
                        format!("`{key}` takes one value in {mode} mode"),
                    ));
                }
            }
        }
        if matches!(mode, Mode::Simulate | Mode::Bench) {
            if lattice == Structure::Hcp {
                return Err(at(
                    self.line("lattice").unwrap_or(0),
                    "dynamics start from sc, fcc or bcc lattices",
                ));
            }
            for &n in &particles {
                cells_for(lattice, n).map_err(|e| match self.line("N") {
                    Some(line) => at(line, e.to_string()),
                    None => e,
                })?;
            }
        }

        Ok(RunConfig {
            mode,
            lattice,
            particles,
            cells,
            spacing,
            density,
            temperature,
            lj,
            delta,
            dt,
            n_max,
            reuse,
            thermostat: thermostat.map(|(t, nu)| ThermostatParams::new(t, nu, seed ^ 0x7468_6572_6d6f)),
            backends,
            workers,
            seed,
            seed_was_random,
            kernel,
            constants,
            sample_every,
            snapshot_every,
            format,
            boa,
            boa_l,
            analysis_rc,
            input,
            out_dir: self
                .get::<String>("out_dir")?
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            bench_steps,
        })
    }
}
