//! Simulated GPS receiver stream and the attacker's injection point on it.
//!
//! Log format, one message per line:
//!
//! ```text
//! seq,t,lat_deg,lon_deg,alt_m,h_acc
//! ```
//!
//! Degrees carry nine decimals; `t` six; altitude and accuracy three. Lines
//! starting with `#` are ignored when reading.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{geodetic_to_local, local_to_geodetic, FlatEarthFrame, GeoCoord, LocalPos};
use crate::world::UavState;

#[derive(Debug, Error)]
pub enum GpsLogError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsMessage {
    pub seq: u64,
    pub t: f64,
    pub coord: GeoCoord,
    /// Reported horizontal accuracy, m.
    pub h_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpsNoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl Default for GpsNoiseModel {
    fn default() -> Self {
        Self { sigma: 0.5, seed: 0 }
    }
}

/// Samples a GPS fix of `truth`. The noise draw depends only on `(noise.seed, seq)`.
pub fn sample_gps(truth: &UavState, frame: &FlatEarthFrame, noise: &GpsNoiseModel, t: f64, seq: u64) -> GpsMessage {
    let mut pos = truth.pos;
    if noise.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(seq);
        let ex: f64 = StandardNormal.sample(&mut rng);
        let ey: f64 = StandardNormal.sample(&mut rng);
        pos += LocalPos::new(ex, ey) * noise.sigma;
    }
    GpsMessage { seq, t, coord: local_to_geodetic(pos, frame), h_acc: noise.sigma }
}

/// Overwrites the message position with the reported position shifted by `offset`.
pub fn inject_spoof(msg: &GpsMessage, offset: LocalPos, frame: &FlatEarthFrame) -> GpsMessage {
    if offset == LocalPos::ORIGIN {
        return *msg;
    }
    let local = geodetic_to_local(&msg.coord, frame) + offset;
    let mut coord = local_to_geodetic(local, frame);
    coord.alt_m = msg.coord.alt_m;
    GpsMessage { coord, ..*msg }
}

/// Sequential message source at a fixed rate.
#[derive(Debug, Clone)]
pub struct GpsChannel {
    pub frame: FlatEarthFrame,
    pub noise: GpsNoiseModel,
    pub rate_hz: f64,
    next_seq: u64,
}

impl GpsChannel {
    pub fn new(frame: FlatEarthFrame, noise: GpsNoiseModel, rate_hz: f64) -> Self {
        Self { frame, noise, rate_hz, next_seq: 0 }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Emits the next message for `truth` at time `t`.
    pub fn sample(&mut self, truth: &UavState, t: f64) -> GpsMessage {
        let msg = sample_gps(truth, &self.frame, &self.noise, t, self.next_seq);
        self.next_seq += 1;
        msg
    }
}

pub fn format_message(m: &GpsMessage) -> String {
    format!(
        "{},{:.6},{:.9},{:.9},{:.3},{:.3}",
        m.seq, m.t, m.coord.lat_deg, m.coord.lon_deg, m.coord.alt_m, m.h_acc
    )
}

pub fn parse_message(line: &str, line_no: usize) -> Result<GpsMessage, GpsLogError> {
    let err = |msg: String| GpsLogError::Parse { line: line_no, msg };
    let fields: Vec<&str> = line.trim().split(',').collect();
    if fields.len() != 6 {
        return Err(err(format!("expected 6 fields, found {}", fields.len())));
    }
    let num = |i: usize| -> Result<f64, GpsLogError> {
        fields[i].parse::<f64>().map_err(|e| err(format!("field {}: {e}", i + 1)))
    };
    let seq = fields[0].parse::<u64>().map_err(|e| err(format!("seq: {e}")))?;
    let coord = GeoCoord::new(num(2)?, num(3)?, num(4)?).map_err(|e| err(e.to_string()))?;
    Ok(GpsMessage { seq, t: num(1)?, coord, h_acc: num(5)? })
}

pub fn write_log<W: Write>(mut w: W, msgs: &[GpsMessage]) -> std::io::Result<()> {
    for m in msgs {
        writeln!(w, "{}", format_message(m))?;
    }
    Ok(())
}

/// Reads a log and checks stream ordering (`seq` strictly increasing, `t` nondecreasing).
pub fn read_log<R: BufRead>(r: R) -> Result<Vec<GpsMessage>, GpsLogError> {
    let mut out: Vec<GpsMessage> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let m = parse_message(trimmed, i + 1)?;
        if let Some(prev) = out.last() {
            if m.seq <= prev.seq || m.t < prev.t {
                return Err(GpsLogError::Parse { line: i + 1, msg: "stream out of order".into() });
            }
        }
        out.push(m);
    }
    Ok(out)
}
