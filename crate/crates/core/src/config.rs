//! Run configuration and its plain-text `key = value` format.
//!
//! Keys are dotted (`scene.coverage_radius = 4`). A `[section]` header
//! prefixes the undotted keys that follow it. `#` starts a comment. Every key
//! has a default; an empty file gives the baseline office scenario
//! (50 m floor, 3 m ceiling, 25 × 25 LEDs, r = 4 m, M = 200, 1000 receivers).

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::geometry::SceneGeometry;
use crate::positioning::Estimator;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("invalid value `{value}` for `{key}`: expected {expected}")]
    InvalidValue {
        key: String,
        value: String,
        expected: String,
    },
    #[error("`{key}` = {value} is out of range: expected {expected}")]
    OutOfRange {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    SignatureLength,
    CoverageRadius,
    LedDensity,
}

impl SweepAxis {
    /// Short flag name (`snr`, `m`, `r`, `nled`).
    pub fn flag(self) -> &'static str {
        match self {
            Self::SnrDb => "snr",
            Self::SignatureLength => "m",
            Self::CoverageRadius => "r",
            Self::LedDensity => "nled",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SnrDb => "snr_db",
            Self::SignatureLength => "signature_length",
            Self::CoverageRadius => "coverage_radius",
            Self::LedDensity => "led_density",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            Self::SnrDb => parse_values("10:5:45").unwrap(),
            Self::SignatureLength => vec![25.0, 50.0, 75.0, 100.0, 150.0, 200.0],
            Self::CoverageRadius => parse_values("2:0.25:6").unwrap(),
            Self::LedDensity => parse_values("10:5:30").unwrap(),
        }
    }

    /// Whether axis values must be whole numbers.
    pub fn is_integral(self) -> bool {
        matches!(self, Self::SignatureLength | Self::LedDensity)
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snr" | "snr_db" => Ok(Self::SnrDb),
            "m" | "signature_length" => Ok(Self::SignatureLength),
            "r" | "coverage_radius" => Ok(Self::CoverageRadius),
            "nled" | "led_density" => Ok(Self::LedDensity),
            _ => Err("snr | m | r | nled".into()),
        }
    }
}

/// Whether receivers are re-used across sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UdSampling {
    /// Same receiver positions and noise draws at every sweep point.
    #[default]
    Shared,
    /// Fresh positions and noise per sweep point.
    Independent,
}

impl FromStr for UdSampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared" => Ok(Self::Shared),
            "independent" => Ok(Self::Independent),
            _ => Err("shared | independent".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    /// Signature length `M` (bits).
    pub m: usize,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    /// `None`: computed from the geometry.
    pub k_max: Option<usize>,
    pub k_max_resolution: f64,
    /// `None`: `d_th_factor · r`.
    pub d_th: Option<f64>,
    pub d_th_factor: f64,
    pub estimator: Estimator,
    /// Grid step for the area-centroid estimator (m).
    pub area_resolution: f64,
    /// `None`: noise floor `√M · σ`.
    pub residual_tol: Option<f64>,
    pub support_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub axis: SweepAxis,
    /// `None`: the axis defaults.
    pub values: Option<Vec<f64>>,
    pub n_ud: usize,
    pub master_seed: u64,
    pub ud_sampling: UdSampling,
    /// Width of the wall band excluded from receiver placement; `None` means `r`.
    pub ud_margin: Option<f64>,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plot_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scene: SceneGeometry,
    pub channel: ChannelParams,
    pub signal: SignalConfig,
    pub algorithm: AlgorithmConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: SceneGeometry::default(),
            channel: ChannelParams::default(),
            signal: SignalConfig { m: 200, snr_db: 20.0 },
            algorithm: AlgorithmConfig {
                k_max: None,
                k_max_resolution: 0.1,
                d_th: None,
                d_th_factor: 2.0,
                estimator: Estimator::Algorithm1,
                area_resolution: 0.05,
                residual_tol: None,
                support_threshold: 0.0,
            },
            experiment: ExperimentConfig {
                axis: SweepAxis::SnrDb,
                values: None,
                n_ud: 1000,
                master_seed: 1,
                ud_sampling: UdSampling::Shared,
                ud_margin: None,
                threads: 0,
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                plot_data: true,
            },
        }
    }
}

/// Parses `start:step:stop` (inclusive) or a comma separated list.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("`{s}` is not start:step:stop"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
        let (start, step, stop) = (num(a)?, num(b)?, num(c)?);
        if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(format!("`{s}` needs step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.is_empty() {
        return Err("empty list".into());
    }
    Ok(vals)
}

fn fmt_values(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt_to_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies assignments from `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: n + 1, text: raw.to_string() });
            };
            let k = k.trim();
            let key = if k.contains('.') || section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            self.set(&key, v.trim())?;
        }
        Ok(())
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn p<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
                expected: expected.to_string(),
            })
        }
        fn auto<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<Option<T>, ConfigError> {
            if value == "auto" {
                Ok(None)
            } else {
                p(key, value, expected).map(Some)
            }
        }
        let value = value.trim_matches('"');
        let num = "a number";
        match key {
            "scene.floor_side" => self.scene.floor_side = p(key, value, num)?,
            "scene.ceiling_height" => self.scene.ceiling_height = p(key, value, num)?,
            "scene.n_led_per_side" => self.scene.n_led_per_side = p(key, value, "a positive integer")?,
            "scene.coverage_radius" => self.scene.coverage_radius = p(key, value, num)?,
            "channel.detector_area" => self.channel.detector_area = p(key, value, num)?,
            "channel.half_power_semiangle_deg" => {
                self.channel.half_power_semiangle_deg = p::<f64>(key, value, num)?
            }
            "channel.optical_filter_gain" => self.channel.optical_filter_gain = p(key, value, num)?,
            "channel.refractive_index" => self.channel.refractive_index = p(key, value, num)?,
            "channel.fov_deg" => self.channel.fov_deg = p::<f64>(key, value, num)?,
            "signal.m" => self.signal.m = p(key, value, "a positive integer")?,
            "signal.snr_db" => self.signal.snr_db = p(key, value, num)?,
            "algorithm.k_max" => self.algorithm.k_max = auto(key, value, "`auto` or a positive integer")?,
            "algorithm.k_max_resolution" => self.algorithm.k_max_resolution = p(key, value, num)?,
            "algorithm.d_th" => self.algorithm.d_th = auto(key, value, "`auto` or meters")?,
            "algorithm.d_th_factor" => self.algorithm.d_th_factor = p(key, value, num)?,
            "algorithm.estimator" => self.algorithm.estimator = p(key, value, "algorithm1 | area-centroid")?,
            "algorithm.area_resolution" => self.algorithm.area_resolution = p(key, value, num)?,
            "algorithm.residual_tol" => self.algorithm.residual_tol = auto(key, value, "`auto` or a number")?,
            "algorithm.support_threshold" => self.algorithm.support_threshold = p(key, value, num)?,
            "experiment.axis" => self.experiment.axis = p(key, value, "snr | m | r | nled")?,
            "experiment.values" => {
                self.experiment.values = if value == "auto" {
                    None
                } else {
                    Some(parse_values(value).map_err(|e| ConfigError::InvalidValue {
                        key: key.to_string(),
                        value: value.to_string(),
                        expected: format!("start:step:stop or a comma list ({e})"),
                    })?)
                }
            }
            "experiment.n_ud" => self.experiment.n_ud = p(key, value, "a positive integer")?,
            "experiment.master_seed" => self.experiment.master_seed = p(key, value, "an unsigned integer")?,
            "experiment.ud_sampling" => self.experiment.ud_sampling = p(key, value, "shared | independent")?,
            "experiment.ud_margin" => self.experiment.ud_margin = auto(key, value, "`auto` or meters")?,
            "experiment.threads" => self.experiment.threads = p(key, value, "an unsigned integer")?,
            "output.dir" => self.output.dir = PathBuf::from(value),
            "output.plot_data" => self.output.plot_data = p(key, value, "true | false")?,
            _ => return Err(ConfigError::UnknownKey { key: key.to_string() }),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn range(ok: bool, key: &'static str, value: impl ToString, expected: &'static str) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { key, value: value.to_string(), expected })
            }
        }
        let s = &self.scene;
        range(s.floor_side.is_finite() && s.floor_side > 0.0, "scene.floor_side", s.floor_side, "> 0")?;
        range(s.ceiling_height.is_finite() && s.ceiling_height > 0.0, "scene.ceiling_height", s.ceiling_height, "> 0")?;
        range(s.n_led_per_side >= 1, "scene.n_led_per_side", s.n_led_per_side, ">= 1")?;
        range(s.coverage_radius.is_finite() && s.coverage_radius > 0.0, "scene.coverage_radius", s.coverage_radius, "> 0")?;
        let c = &self.channel;
        range(c.detector_area.is_finite() && c.detector_area > 0.0, "channel.detector_area", c.detector_area, "> 0")?;
        range(
            c.half_power_semiangle_deg > 0.0 && c.half_power_semiangle_deg < 90.0,
            "channel.half_power_semiangle_deg",
            c.half_power_semiangle_deg,
            "in (0, 90)",
        )?;
        range(c.optical_filter_gain.is_finite() && c.optical_filter_gain > 0.0, "channel.optical_filter_gain", c.optical_filter_gain, "> 0")?;
        range(c.refractive_index.is_finite() && c.refractive_index >= 1.0, "channel.refractive_index", c.refractive_index, ">= 1")?;
        range(c.fov_deg > 0.0 && c.fov_deg <= 90.0, "channel.fov_deg", c.fov_deg, "in (0, 90]")?;
        range(self.signal.m >= 1, "signal.m", self.signal.m, ">= 1")?;
        range(!self.signal.snr_db.is_nan(), "signal.snr_db", self.signal.snr_db, "a number (inf for noiseless)")?;
        let a = &self.algorithm;
        range(a.k_max != Some(0), "algorithm.k_max", opt_to_string(&a.k_max), "auto or >= 1")?;
        range(a.k_max_resolution > 0.0, "algorithm.k_max_resolution", a.k_max_resolution, "> 0")?;
        range(a.d_th.is_none_or(|d| d.is_finite() && d > 0.0), "algorithm.d_th", opt_to_string(&a.d_th), "auto or > 0")?;
        range(a.d_th_factor.is_finite() && a.d_th_factor > 0.0, "algorithm.d_th_factor", a.d_th_factor, "> 0")?;
        range(a.area_resolution > 0.0, "algorithm.area_resolution", a.area_resolution, "> 0")?;
        range(
            a.residual_tol.is_none_or(|t| t.is_finite() && t >= 0.0),
            "algorithm.residual_tol",
            opt_to_string(&a.residual_tol),
            "auto or >= 0",
        )?;
        range(a.support_threshold >= 0.0, "algorithm.support_threshold", a.support_threshold, ">= 0")?;
        let e = &self.experiment;
        range(e.n_ud >= 1, "experiment.n_ud", e.n_ud, ">= 1")?;
        if let Some(v) = &e.values {
            range(!v.is_empty(), "experiment.values", fmt_values(v), "non-empty")?;
            range(
                !e.axis.is_integral() || v.iter().all(|x| x.fract() == 0.0 && *x >= 1.0),
                "experiment.values",
                fmt_values(v),
                "positive integers for the m and nled axes",
            )?;
        }
        range(
            e.ud_margin.is_none_or(|m| m >= 0.0 && 2.0 * m < s.floor_side),
            "experiment.ud_margin",
            opt_to_string(&e.ud_margin),
            "auto or in [0, floor_side/2)",
        )?;
        Ok(())
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        self.experiment
            .values
            .clone()
            .unwrap_or_else(|| self.experiment.axis.default_values())
    }

    /// Copy of `self` with the sweep axis set to `value`.
    pub fn at_axis_value(&self, value: f64) -> RunConfig {
        let mut cfg = self.clone();
        match self.experiment.axis {
            SweepAxis::SnrDb => cfg.signal.snr_db = value,
            SweepAxis::SignatureLength => cfg.signal.m = value as usize,
            SweepAxis::CoverageRadius => cfg.scene.coverage_radius = value,
            SweepAxis::LedDensity => cfg.scene.n_led_per_side = value as usize,
        }
        cfg
    }

    /// Full `key = value` listing; parsing it back gives the same config.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("scene.floor_side", self.scene.floor_side.to_string());
        kv("scene.ceiling_height", self.scene.ceiling_height.to_string());
        kv("scene.n_led_per_side", self.scene.n_led_per_side.to_string());
        kv("scene.coverage_radius", self.scene.coverage_radius.to_string());
        kv("channel.detector_area", self.channel.detector_area.to_string());
        kv("channel.half_power_semiangle_deg", self.channel.half_power_semiangle_deg.to_string());
        kv("channel.optical_filter_gain", self.channel.optical_filter_gain.to_string());
        kv("channel.refractive_index", self.channel.refractive_index.to_string());
        kv("channel.fov_deg", self.channel.fov_deg.to_string());
        kv("signal.m", self.signal.m.to_string());
        kv("signal.snr_db", self.signal.snr_db.to_string());
        kv("algorithm.k_max", opt_to_string(&self.algorithm.k_max));
        kv("algorithm.k_max_resolution", self.algorithm.k_max_resolution.to_string());
        kv("algorithm.d_th", opt_to_string(&self.algorithm.d_th));
        kv("algorithm.d_th_factor", self.algorithm.d_th_factor.to_string());
        kv("algorithm.estimator", self.algorithm.estimator.to_string());
        kv("algorithm.area_resolution", self.algorithm.area_resolution.to_string());
        kv("algorithm.residual_tol", opt_to_string(&self.algorithm.residual_tol));
        kv("algorithm.support_threshold", self.algorithm.support_threshold.to_string());
        kv("experiment.axis", self.experiment.axis.flag().to_string());
        kv(
            "experiment.values",
            self.experiment.values.as_deref().map_or_else(|| "auto".to_string(), fmt_values),
        );
        kv("experiment.n_ud", self.experiment.n_ud.to_string());
        kv("experiment.master_seed", self.experiment.master_seed.to_string());
        kv(
            "experiment.ud_sampling",
            match self.experiment.ud_sampling {
                UdSampling::Shared => "shared",
                UdSampling::Independent => "independent",
            }
            .to_string(),
        );
        kv("experiment.ud_margin", opt_to_string(&self.experiment.ud_margin));
        kv("experiment.threads", self.experiment.threads.to_string());
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.plot_data", self.output.plot_data.to_string());
        s
    }
}
