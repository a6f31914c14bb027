//! Radar waveform, array and discretization parameters.
//!
//! A [`RadarConfig`] is plain data that mirrors the JSON config file. Every
//! consumer takes a [`ValidatedConfig`], which carries the derived Doppler
//! dilation between transmitter replicas and the virtual array size.

use std::fmt;
use std::ops::Deref;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REL_TOL: f64 = 1e-9;

/// Physical and discretization parameters of a Doppler-multiplexed MIMO radar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Range bins (fast-time samples per chirp).
    pub b_r: usize,
    /// Doppler bins (chirps per frame).
    pub b_d: usize,
    pub b_a: usize,
    pub b_e: usize,
    /// Meters per range bin.
    pub range_res: f64,
    /// Meters per second per Doppler bin.
    pub doppler_res: f64,
    pub max_range: f64,
    /// Largest unambiguous Doppler span, m/s.
    pub d_max: f64,
    /// Doppler offset between consecutive transmitters, m/s.
    pub doppler_shift: f64,
    /// Degrees.
    pub azimuth_fov: f64,
    /// Degrees.
    pub elevation_fov: f64,
}

/// Named parameter sets selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Toy,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "toy" => Ok(Preset::Toy),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

impl RadarConfig {
    /// Full-size HD radar: 12 Tx, 16 Rx, 512 range and 256 Doppler bins,
    /// 0.2 m / 0.1 m/s resolution, 180 deg azimuth over 896 bins.
    ///
    /// The Tx Doppler offset is set to `d_max / 16` (dilation 16), which fits
    /// all twelve replicas into one Doppler period with a 64-bin empty band.
    pub fn paper() -> Self {
        Self {
            n_tx: 12,
            n_rx: 16,
            b_r: 512,
            b_d: 256,
            b_a: 896,
            b_e: 11,
            range_res: 0.2,
            doppler_res: 0.1,
            max_range: 512.0 * 0.2,
            d_max: 256.0 * 0.1,
            doppler_shift: 256.0 * 0.1 / 16.0,
            azimuth_fov: 180.0,
            elevation_fov: 12.0,
        }
    }

    /// Desk-scale variant used by tests and the toy training run: 4 Tx, 2 Rx,
    /// 128 x 64 range-Doppler bins, dilation 16, 128 azimuth bins over 90 deg.
    pub fn toy() -> Self {
        Self {
            n_tx: 4,
            n_rx: 2,
            b_r: 128,
            b_d: 64,
            b_a: 128,
            b_e: 1,
            range_res: 0.1,
            doppler_res: 0.25,
            max_range: 128.0 * 0.1,
            d_max: 64.0 * 0.25,
            doppler_shift: 64.0 * 0.25 / 4.0,
            azimuth_fov: 90.0,
            elevation_fov: 0.0,
        }
    }

    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self::paper(),
            Preset::Toy => Self::toy(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Doppler bins between consecutive transmitter replicas, unrounded.
    pub fn raw_dilation(&self) -> f64 {
        self.doppler_shift * self.b_d as f64 / self.d_max
    }

    pub fn validate(self) -> Result<ValidatedConfig> {
        ValidatedConfig::new(self)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// A [`RadarConfig`] whose fields are mutually consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    config: RadarConfig,
    dilation: usize,
}

impl ValidatedConfig {
    pub fn new(config: RadarConfig) -> Result<Self> {
        let counts = [
            ("n_tx", config.n_tx),
            ("n_rx", config.n_rx),
            ("b_r", config.b_r),
            ("b_d", config.b_d),
            ("b_a", config.b_a),
            ("b_e", config.b_e),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let positive = [
            ("range_res", config.range_res),
            ("doppler_res", config.doppler_res),
            ("max_range", config.max_range),
            ("d_max", config.d_max),
            ("doppler_shift", config.doppler_shift),
            ("azimuth_fov", config.azimuth_fov),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and positive")));
            }
        }
        if !(config.elevation_fov.is_finite() && config.elevation_fov >= 0.0) {
            return Err(Error::InvalidConfig("elevation_fov must be finite and non-negative".into()));
        }
        if config.azimuth_fov > 180.0 || config.elevation_fov > 180.0 {
            return Err(Error::InvalidConfig("fields of view are limited to 180 degrees".into()));
        }
        if !close(config.max_range, config.b_r as f64 * config.range_res) {
            return Err(Error::InvalidConfig(format!(
                "max_range {} != b_r * range_res = {}",
                config.max_range,
                config.b_r as f64 * config.range_res
            )));
        }
        if !close(config.d_max, config.b_d as f64 * config.doppler_res) {
            return Err(Error::InvalidConfig(format!(
                "d_max {} != b_d * doppler_res = {}",
                config.d_max,
                config.b_d as f64 * config.doppler_res
            )));
        }

        let raw = config.raw_dilation();
        let rounded = raw.round();
        if rounded < 1.0 || !close(raw, rounded) {
            return Err(Error::NonIntegerDilation(raw));
        }
        let dilation = rounded as usize;
        let needed = config.n_tx * dilation;
        if needed > config.b_d {
            return Err(Error::ReplicaOverflow { needed, b_d: config.b_d });
        }
        Ok(Self { config, dilation })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn into_inner(self) -> RadarConfig {
        self.config
    }

    /// Doppler bins between the replicas of two consecutive transmitters.
    pub fn dilation(&self) -> usize {
        self.dilation
    }

    pub fn virtual_antennas(&self) -> usize {
        self.config.n_tx * self.config.n_rx
    }

    /// Per-chirp phase increment between consecutive transmitters, radians.
    pub fn tx_phase_step(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.config.doppler_shift / self.config.d_max
    }

    pub fn azimuth_bin_width(&self) -> f64 {
        self.config.azimuth_fov / self.config.b_a as f64
    }

    pub fn elevation_bin_width(&self) -> f64 {
        self.config.elevation_fov / self.config.b_e as f64
    }

    /// Center of azimuth bin `a`, degrees. Bin `b_a / 2` sits at boresight.
    pub fn azimuth_of_bin(&self, a: usize) -> f64 {
        centered_grid(a, self.config.b_a, self.azimuth_bin_width())
    }

    pub fn elevation_of_bin(&self, e: usize) -> f64 {
        centered_grid(e, self.config.b_e, self.elevation_bin_width())
    }

    /// Azimuth bin whose center is nearest to `azimuth` (degrees), clamped.
    pub fn azimuth_bin(&self, azimuth: f64) -> usize {
        nearest_on_grid(azimuth, self.config.b_a, self.azimuth_bin_width())
    }

    pub fn elevation_bin(&self, elevation: f64) -> usize {
        nearest_on_grid(elevation, self.config.b_e, self.elevation_bin_width())
    }

    /// Doppler index, in the FFT-shifted axis, of radial velocity `v`
    /// (bin `b_d / 2` is zero Doppler). Not rounded.
    pub fn doppler_index(&self, velocity: f64) -> f64 {
        velocity / self.config.doppler_res + (self.config.b_d / 2) as f64
    }

    pub fn velocity_of_doppler_index(&self, d: usize) -> f64 {
        (d as f64 - (self.config.b_d / 2) as f64) * self.config.doppler_res
    }
}

fn centered_grid(i: usize, n: usize, width: f64) -> f64 {
    (i as f64 - (n / 2) as f64) * width
}

fn nearest_on_grid(x: f64, n: usize, width: f64) -> usize {
    if width <= 0.0 {
        return n / 2;
    }
    let i = (x / width).round() + (n / 2) as f64;
    i.clamp(0.0, (n - 1) as f64) as usize
}

impl Deref for ValidatedConfig {
    type Target = RadarConfig;

    fn deref(&self) -> &RadarConfig {
        &self.config
    }
}

impl fmt::Display for ValidatedConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}Tx x {}Rx, RD {}x{}, dilation {}",
            self.n_tx, self.n_rx, self.b_r, self.b_d, self.dilation
        )
    }
}
