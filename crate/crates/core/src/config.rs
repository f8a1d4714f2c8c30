//! Scenario parameters and their derived quantities.
//!
//! Raw records ([`FrameConfig`], [`RadioConfig`], [`TrafficConfig`]) are
//! checked by [`validate`], which produces an immutable [`SimConfig`] carrying
//! the derived lengths. Everything downstream takes a `SimConfig`.
//!
//! The text format read by [`SimConfig::from_kv_str`] is a flat list of
//! `key = value` lines with `#` comments. Keys are the field names below
//! (`L_pre`, `N_slot`, `sigma_dB`, ...). Powers are in watts unless the key
//! carries a `_dBm` suffix (`P_t_dBm`, `sigma_w2_dBm`). Keys that are not
//! given keep their default values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Frame timing and coding parameters, all lengths in symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub l_pre: usize,
    pub l_code: usize,
    pub l_tail: usize,
    /// Information bits per codeword.
    pub k: usize,
    /// Maximum number of codewords per command unit.
    pub iota_max: usize,
    pub n_slot: usize,
    pub n_rep: usize,
    /// Superframe length.
    pub t_sf: usize,
    /// Decoder iterations (no early stopping).
    pub i_max: usize,
}

/// Physical layer parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    /// Receive antennas.
    pub antennas: usize,
    /// Transmit power, W.
    pub p_t: f64,
    /// Carrier wavelength, m.
    pub lambda_c: f64,
    /// Reference distance, m.
    pub d_ref: f64,
    /// Path-loss exponent.
    pub beta: f64,
    /// Shadowing standard deviation, dB.
    pub sigma_db: f64,
    /// Rician K-factor, dB.
    pub k_db: f64,
    /// Noise variance per antenna, W. Zero gives a noiseless receiver.
    pub sigma_w2: f64,
    pub l_x: f64,
    pub l_y: f64,
    pub l_z: f64,
    /// Lower bound of the device distance draw, m.
    pub d_min: f64,
}

/// Aggregate activation process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    /// Mean activations per symbol interval.
    pub lambda: f64,
    pub seed: u64,
}

/// Quantities derived from the raw records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    /// Slot length, `L_pre + iota_max * L_code + L_tail`.
    pub l_max: usize,
    /// Virtual frame length, `N_slot * L_max`.
    pub t_vf: usize,
    /// Number of admissible activation instants, `T_SF - T_VF + 1`.
    pub t_act: usize,
    /// Space diagonal of the deployment volume, m.
    pub d_max: f64,
}

/// A validated parameter bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub frame: FrameConfig,
    pub radio: RadioConfig,
    pub traffic: TrafficConfig,
    derived: Derived,
}

impl FrameConfig {
    pub fn l_max(&self) -> usize {
        self.l_pre + self.iota_max * self.l_code + self.l_tail
    }

    /// Symbols between the start of a replica and the start of its tail.
    pub fn tail_offset(&self, iota: usize) -> usize {
        self.l_pre + iota * self.l_code
    }

    /// Command unit length for `iota` codewords.
    pub fn unit_len(&self, iota: usize) -> usize {
        self.tail_offset(iota) + self.l_tail
    }

    /// Largest in-slot offset for a unit of `iota` codewords.
    pub fn max_offset(&self, iota: usize) -> usize {
        self.l_max() - self.unit_len(iota)
    }

    fn check(&self) -> Result<Derived> {
        for (field, v) in [
            ("L_pre", self.l_pre),
            ("L_code", self.l_code),
            ("L_tail", self.l_tail),
            ("k", self.k),
            ("iota_max", self.iota_max),
            ("N_slot", self.n_slot),
            ("T_SF", self.t_sf),
        ] {
            if v == 0 {
                return Err(Error::invalid(field, "must be at least 1"));
            }
        }
        if self.k > self.l_code {
            return Err(Error::invalid(
                "k",
                format!("{} exceeds L_code = {}", self.k, self.l_code),
            ));
        }
        if self.n_rep < 1 || self.n_rep > self.n_slot {
            return Err(Error::invalid(
                "N_rep",
                format!("must lie in [1, N_slot = {}], got {}", self.n_slot, self.n_rep),
            ));
        }
        if self.i_max < 1 {
            return Err(Error::invalid("i_max", "must be at least 1"));
        }
        let l_max = self.l_max();
        let t_vf = self.n_slot * l_max;
        if self.t_sf < t_vf {
            return Err(Error::invalid(
                "T_SF",
                format!(
                    "T_act = T_SF - N_slot*L_max + 1 = {} must be >= 1",
                    self.t_sf as i64 - t_vf as i64 + 1
                ),
            ));
        }
        Ok(Derived {
            l_max,
            t_vf,
            t_act: self.t_sf - t_vf + 1,
            d_max: 0.0,
        })
    }
}

impl RadioConfig {
    pub fn d_max(&self) -> f64 {
        (self.l_x * self.l_x + self.l_y * self.l_y + self.l_z * self.l_z).sqrt()
    }

    /// Linear Rician K-factor.
    pub fn k_linear(&self) -> f64 {
        10f64.powf(self.k_db / 10.0)
    }

    fn check(&self) -> Result<()> {
        if self.antennas < 1 {
            return Err(Error::invalid("R", "must be at least 1"));
        }
        for (field, v) in [
            ("P_t", self.p_t),
            ("lambda_c", self.lambda_c),
            ("d_ref", self.d_ref),
            ("L_x", self.l_x),
            ("L_y", self.l_y),
            ("L_z", self.l_z),
            ("d_min", self.d_min),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        for (field, v) in [
            ("beta", self.beta),
            ("sigma_dB", self.sigma_db),
            ("sigma_w2", self.sigma_w2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !self.k_db.is_finite() {
            return Err(Error::invalid("K_dB", "must be finite"));
        }
        if self.d_min >= self.d_max() {
            return Err(Error::invalid(
                "d_min",
                format!("must be below d_max = {}", self.d_max()),
            ));
        }
        Ok(())
    }
}

/// Checks every invariant and computes the derived quantities.
pub fn validate(frame: FrameConfig, radio: RadioConfig, traffic: TrafficConfig) -> Result<SimConfig> {
    let mut derived = frame.check()?;
    radio.check()?;
    if !(traffic.lambda.is_finite() && traffic.lambda >= 0.0) {
        return Err(Error::invalid(
            "lambda",
            format!("must be finite and >= 0, got {}", traffic.lambda),
        ));
    }
    derived.d_max = radio.d_max();
    Ok(SimConfig {
        frame,
        radio,
        traffic,
        derived,
    })
}

/// The reference indoor setup: 6 x 6 x 2 m volume, four receive antennas,
/// the (128, 64) code with 20 decoder iterations, two replicas in ten slots
/// and a 10 000-symbol superframe.
pub fn default_config() -> SimConfig {
    validate(default_frame(), default_radio(), default_traffic()).expect("default configuration is valid")
}

fn default_frame() -> FrameConfig {
    FrameConfig {
        l_pre: 128,
        l_code: 128,
        l_tail: 128,
        k: 64,
        iota_max: 5,
        n_slot: 10,
        n_rep: 2,
        t_sf: 10_000,
        i_max: 20,
    }
}

fn default_radio() -> RadioConfig {
    RadioConfig {
        antennas: 4,
        p_t: 0.075,
        lambda_c: 0.125,
        d_ref: 1.0,
        beta: 2.1,
        // 9 dB^2 shadowing variance.
        sigma_db: 3.0,
        k_db: 4.0,
        sigma_w2: dbm_to_watts(-120.0),
        l_x: 6.0,
        l_y: 6.0,
        l_z: 2.0,
        d_min: 0.1,
    }
}

fn default_traffic() -> TrafficConfig {
    TrafficConfig { lambda: 1e-3, seed: 0 }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

impl SimConfig {
    pub fn derived(&self) -> &Derived {
        &self.derived
    }

    pub fn l_max(&self) -> usize {
        self.derived.l_max
    }

    pub fn t_vf(&self) -> usize {
        self.derived.t_vf
    }

    pub fn t_act(&self) -> usize {
        self.derived.t_act
    }

    pub fn d_max(&self) -> f64 {
        self.derived.d_max
    }

    /// Re-runs validation on the raw records.
    pub fn revalidate(&self) -> Result<SimConfig> {
        validate(self.frame, self.radio, self.traffic)
    }

    /// Copy with a different superframe length.
    pub fn with_superframe(&self, t_sf: usize) -> Result<SimConfig> {
        validate(FrameConfig { t_sf, ..self.frame }, self.radio, self.traffic)
    }

    /// Copy with a different arrival rate.
    pub fn with_lambda(&self, lambda: f64) -> Result<SimConfig> {
        validate(self.frame, self.radio, TrafficConfig { lambda, ..self.traffic })
    }

    /// Copy with a different noise variance.
    pub fn with_noise(&self, sigma_w2: f64) -> Result<SimConfig> {
        validate(self.frame, RadioConfig { sigma_w2, ..self.radio }, self.traffic)
    }

    /// Parses a `key = value` file on top of the defaults.
    pub fn from_kv_str(text: &str) -> Result<SimConfig> {
        let mut frame = default_frame();
        let mut radio = default_radio();
        let mut traffic = default_traffic();
        let mut seen = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
                line: line_no,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if let Some(prev) = seen.insert(key.to_string(), line_no) {
                return Err(Error::ConfigParse {
                    line: line_no,
                    reason: format!("duplicate key `{key}` (first set on line {prev})"),
                });
            }
            let int = || {
                value.parse::<usize>().map_err(|e| Error::ConfigParse {
                    line: line_no,
                    reason: format!("`{key}`: {e}"),
                })
            };
            let real = || {
                value.parse::<f64>().map_err(|e| Error::ConfigParse {
                    line: line_no,
                    reason: format!("`{key}`: {e}"),
                })
            };
            match key {
                "L_pre" => frame.l_pre = int()?,
                "L_code" => frame.l_code = int()?,
                "L_tail" => frame.l_tail = int()?,
                "k" => frame.k = int()?,
                "iota_max" => frame.iota_max = int()?,
                "N_slot" => frame.n_slot = int()?,
                "N_rep" => frame.n_rep = int()?,
                "T_SF" => frame.t_sf = int()?,
                "i_max" => frame.i_max = int()?,
                "R" => radio.antennas = int()?,
                "P_t" => radio.p_t = real()?,
                "P_t_dBm" => radio.p_t = dbm_to_watts(real()?),
                "lambda_c" => radio.lambda_c = real()?,
                "d_ref" => radio.d_ref = real()?,
                "beta" => radio.beta = real()?,
                "sigma_dB" => radio.sigma_db = real()?,
                "K_dB" => radio.k_db = real()?,
                "sigma_w2" => radio.sigma_w2 = real()?,
                "sigma_w2_dBm" => radio.sigma_w2 = dbm_to_watts(real()?),
                "L_x" => radio.l_x = real()?,
                "L_y" => radio.l_y = real()?,
                "L_z" => radio.l_z = real()?,
                "d_min" => radio.d_min = real()?,
                "lambda" => traffic.lambda = real()?,
                "seed" => {
                    traffic.seed = value.parse::<u64>().map_err(|e| Error::ConfigParse {
                        line: line_no,
                        reason: format!("`seed`: {e}"),
                    })?
                }
                other => {
                    return Err(Error::ConfigParse {
                        line: line_no,
                        reason: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        validate(frame, radio, traffic)
    }

    /// Writes every raw field in the `key = value` format.
    pub fn to_kv_string(&self) -> String {
        let f = &self.frame;
        let r = &self.radio;
        let mut out = String::new();
        let _ = writeln!(out, "# frame");
        for (k, v) in [
            ("L_pre", f.l_pre),
            ("L_code", f.l_code),
            ("L_tail", f.l_tail),
            ("k", f.k),
            ("iota_max", f.iota_max),
            ("N_slot", f.n_slot),
            ("N_rep", f.n_rep),
            ("T_SF", f.t_sf),
            ("i_max", f.i_max),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "# radio");
        let _ = writeln!(out, "R = {}", r.antennas);
        for (k, v) in [
            ("P_t", r.p_t),
            ("lambda_c", r.lambda_c),
            ("d_ref", r.d_ref),
            ("beta", r.beta),
            ("sigma_dB", r.sigma_db),
            ("K_dB", r.k_db),
            ("sigma_w2", r.sigma_w2),
            ("L_x", r.l_x),
            ("L_y", r.l_y),
            ("L_z", r.l_z),
            ("d_min", r.d_min),
        ] {
            let _ = writeln!(out, "{k} = {v:?}");
        }
        let _ = writeln!(out, "# traffic");
        let _ = writeln!(out, "lambda = {:?}", self.traffic.lambda);
        let _ = writeln!(out, "seed = {}", self.traffic.seed);
        out
    }
}
