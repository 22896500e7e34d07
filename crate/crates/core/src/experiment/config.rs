//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `n` | 20 | total qubits (axis + ring) |
//! | `hops` | `9,18,56` | hop counts; items are `m`, `a..b` or `a..b:step` (inclusive) |
//! | `mode` | `dynamic` | `dynamic` or `post_selection` |
//! | `shots` | 1000 | shots per tomography setting |
//! | `trajectories` | 200 | noise trajectories per hop count |
//! | `bootstrap` | 200 | bootstrap resamples |
//! | `seed` | 0 | master seed |
//! | `p1`, `p2` | 0 | one- and two-qubit gate fault rates |
//! | `eps01`, `eps10` | 0 | readout flip rates |
//! | `reset_flip` | 0 | probability a reset leaves `|1⟩` |
//! | `mid_circuit_flips` | true | readout flips also hit hop outcomes |
//! | `exact` | false | exact outcome probabilities instead of shots |
//! | `calibration` | `analytic` | `analytic` or `empirical` REM matrices |
//! | `calibration_shots` | 10000 | shots per prepared state for `empirical` |
//! | `timing` | false | record wall-clock seconds in results |
//! | `format` | `csv` | `csv` or `json` |
//! | `output` | unset | output path; stdout when unset |

use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::wheel::CorrectionMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

/// Where REM calibration matrices come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibrationSource {
    /// The model's readout rates.
    Analytic,
    /// Estimated from simulated calibration shots.
    Empirical,
}

impl fmt::Display for CalibrationSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibrationSource::Analytic => "analytic",
            CalibrationSource::Empirical => "empirical",
        })
    }
}

impl FromStr for CalibrationSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(CalibrationSource::Analytic),
            "empirical" => Ok(CalibrationSource::Empirical),
            other => Err(Error::InvalidConfig(format!("unknown calibration source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub hops: Vec<usize>,
    pub mode: CorrectionMode,
    pub shots: u64,
    pub trajectories: usize,
    pub bootstrap: usize,
    pub seed: u64,
    pub noise: NoiseModel,
    pub exact: bool,
    pub calibration: CalibrationSource,
    pub calibration_shots: u64,
    pub timing: bool,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 20,
            hops: vec![9, 18, 56],
            mode: CorrectionMode::Dynamic,
            shots: 1000,
            trajectories: 200,
            bootstrap: 200,
            seed: 0,
            noise: NoiseModel::noiseless(),
            exact: false,
            calibration: CalibrationSource::Analytic,
            calibration_shots: 10_000,
            timing: false,
            format: OutputFormat::Csv,
            output: None,
        }
    }
}

const KEYS: [&str; 19] = [
    "n",
    "hops",
    "mode",
    "shots",
    "trajectories",
    "bootstrap",
    "seed",
    "p1",
    "p2",
    "eps01",
    "eps10",
    "reset_flip",
    "mid_circuit_flips",
    "exact",
    "calibration",
    "calibration_shots",
    "timing",
    "format",
    "output",
];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n as u64),
            ("shots", self.shots),
            ("trajectories", self.trajectories as u64),
            ("bootstrap", self.bootstrap as u64),
            ("calibration_shots", self.calibration_shots),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.hops.is_empty() {
            return Err(Error::InvalidConfig("hops must not be empty".into()));
        }
        if self.bootstrap < 2 && !self.exact {
            return Err(Error::BootstrapSize(self.bootstrap));
        }
        if self.n < 3 {
            return Err(Error::WheelTooSmall(self.n));
        }
        if self.n > crate::sim::MAX_QUBITS {
            return Err(Error::QubitCount(self.n));
        }
        self.noise.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| Error::Config { line, msg: format!("expected `key = value`, got {trimmed:?}") })?;
            let (key, value) = (key.trim(), value.trim());
            let known = KEYS
                .iter()
                .find(|&&k| k == key)
                .ok_or_else(|| Error::Config { line, msg: format!("unknown key {key:?}") })?;
            if seen.contains(known) {
                return Err(Error::Config { line, msg: format!("duplicate key {key:?}") });
            }
            seen.push(known);
            config
                .set(key, value)
                .map_err(|e| Error::Config { line, msg: format!("{key}: {e}") })?;
        }
        config.validate().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::Config { line: 0, msg: other.to_string() },
        })?;
        Ok(config)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e: T::Err| Error::InvalidConfig(format!("{value:?}: {e}")))
        }
        match key {
            "n" => self.n = num(value)?,
            "hops" => self.hops = parse_hops(value)?,
            "mode" => self.mode = value.parse()?,
            "shots" => self.shots = num(value)?,
            "trajectories" => self.trajectories = num(value)?,
            "bootstrap" => self.bootstrap = num(value)?,
            "seed" => self.seed = num(value)?,
            "p1" => self.noise.p1 = num(value)?,
            "p2" => self.noise.p2 = num(value)?,
            "eps01" => self.noise.eps01 = num(value)?,
            "eps10" => self.noise.eps10 = num(value)?,
            "reset_flip" => self.noise.reset_flip = num(value)?,
            "mid_circuit_flips" => self.noise.mid_circuit_flips = num(value)?,
            "exact" => self.exact = num(value)?,
            "calibration" => self.calibration = value.parse()?,
            "calibration_shots" => self.calibration_shots = num(value)?,
            "timing" => self.timing = num(value)?,
            "format" => self.format = value.parse()?,
            "output" => {
                self.output = if value.is_empty() { None } else { Some(PathBuf::from(value)) };
            }
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Ordered `(key, value)` pairs that [`ExperimentConfig::parse`] reads back
    /// to an equal configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let hops: Vec<String> = self.hops.iter().map(usize::to_string).collect();
        let mut out = vec![
            ("n", self.n.to_string()),
            ("hops", hops.join(",")),
            ("mode", self.mode.to_string()),
            ("shots", self.shots.to_string()),
            ("trajectories", self.trajectories.to_string()),
            ("bootstrap", self.bootstrap.to_string()),
            ("seed", self.seed.to_string()),
            ("p1", self.noise.p1.to_string()),
            ("p2", self.noise.p2.to_string()),
            ("eps01", self.noise.eps01.to_string()),
            ("eps10", self.noise.eps10.to_string()),
            ("reset_flip", self.noise.reset_flip.to_string()),
            ("mid_circuit_flips", self.noise.mid_circuit_flips.to_string()),
            ("exact", self.exact.to_string()),
            ("calibration", self.calibration.to_string()),
            ("calibration_shots", self.calibration_shots.to_string()),
            ("timing", self.timing.to_string()),
            ("format", self.format.to_string()),
        ];
        if let Some(path) = &self.output {
            out.push(("output", path.display().to_string()));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Parses a hop list such as `0,5..20:5,56`.
pub fn parse_hops(value: &str) -> Result<Vec<usize>> {
    let bad = |item: &str, why: &str| Error::InvalidConfig(format!("hop item {item:?}: {why}"));
    let mut hops = Vec::new();
    for item in value.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(bad(item, "empty"));
        }
        let Some((start, rest)) = item.split_once("..") else {
            hops.push(item.parse().map_err(|_| bad(item, "not a non-negative integer"))?);
            continue;
        };
        let (end, step) = match rest.split_once(':') {
            Some((end, step)) => (end, step),
            None => (rest, "1"),
        };
        let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(item, "not a non-negative integer"));
        let (start, end, step) = (parse(start)?, parse(end)?, parse(step)?);
        if step == 0 {
            return Err(bad(item, "step must be positive"));
        }
        if end < start {
            return Err(bad(item, "range end before start"));
        }
        hops.extend((start..=end).step_by(step));
    }
    let mut sorted = hops.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig(format!("hop count {} listed twice", w[0])));
    }
    Ok(hops)
}
