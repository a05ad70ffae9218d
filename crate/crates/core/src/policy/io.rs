//! Binary policy weight files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "UAVSPOL\0"
//! version      u32
//! v_max        f64
//! omega_max    f64
//! depth branch: n_dims u32, dims [u32; n_dims], activations [u8; n_dims - 1]
//! trunk:        same encoding
//! n_params     u64
//! params       [f64; n_params]   depth branch then trunk; per layer the
//!                                row-major (out x in) weights then biases
//! ```
//!
//! A JSON sidecar `<file>.meta.json` describing the same layout is written next
//! to the weights for human inspection; loading reads only the binary file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{MlpPolicy, PolicyError};
use crate::nn::{Activation, BranchNet, MlpShape};
use crate::world::ActionLimits;

pub const POLICY_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"UAVSPOL\0";

#[derive(Serialize)]
struct Sidecar<'a> {
    format_version: u32,
    v_max: f64,
    omega_max: f64,
    depth_branch: &'a MlpShape,
    trunk: &'a MlpShape,
    n_params: usize,
    layout: &'static str,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn put_shape(buf: &mut Vec<u8>, s: &MlpShape) {
    buf.extend((s.dims.len() as u32).to_le_bytes());
    for &d in &s.dims {
        buf.extend((d as u32).to_le_bytes());
    }
    buf.extend(s.acts.iter().map(|a| a.tag()));
}

pub fn encode_policy(p: &MlpPolicy) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + 8 * p.net.params.len());
    buf.extend(MAGIC);
    buf.extend(POLICY_FORMAT_VERSION.to_le_bytes());
    buf.extend(p.limits.v_max.to_le_bytes());
    buf.extend(p.limits.omega_max.to_le_bytes());
    put_shape(&mut buf, &p.net.depth);
    put_shape(&mut buf, &p.net.trunk);
    buf.extend((p.net.params.len() as u64).to_le_bytes());
    for v in &p.net.params {
        buf.extend(v.to_le_bytes());
    }
    buf
}

pub fn save_policy(p: &MlpPolicy, path: &Path) -> Result<(), PolicyError> {
    fs::write(path, encode_policy(p))?;
    let meta = Sidecar {
        format_version: POLICY_FORMAT_VERSION,
        v_max: p.limits.v_max,
        omega_max: p.limits.omega_max,
        depth_branch: &p.net.depth,
        trunk: &p.net.trunk,
        n_params: p.net.params.len(),
        layout: "little-endian f64; per layer row-major (out x in) weights then biases; depth branch first",
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| PolicyError::Format(e.to_string()))?;
    fs::write(sidecar_path(path), json + "\n")?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], PolicyError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            PolicyError::Format(format!("truncated file while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, PolicyError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, PolicyError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, PolicyError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn shape(&mut self, what: &str) -> Result<MlpShape, PolicyError> {
        let n = self.u32(what)? as usize;
        if !(2..=64).contains(&n) {
            return Err(PolicyError::Format(format!("{what}: implausible layer count {n}")));
        }
        let dims = (0..n).map(|_| self.u32(what).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let acts = self
            .take(n - 1, what)?
            .iter()
            .map(|&t| Activation::from_tag(t).ok_or_else(|| PolicyError::Format(format!("{what}: unknown activation tag {t}"))))
            .collect::<Result<Vec<_>, _>>()?;
        MlpShape::new(dims, acts).map_err(|e| PolicyError::Format(format!("{what}: {e}")))
    }
}

pub fn decode_policy(buf: &[u8]) -> Result<MlpPolicy, PolicyError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(PolicyError::Format("not a policy file (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != POLICY_FORMAT_VERSION {
        return Err(PolicyError::Format(format!(
            "unsupported version {version}; this build reads version {POLICY_FORMAT_VERSION}"
        )));
    }
    let limits = ActionLimits { v_max: r.f64("v_max")?, omega_max: r.f64("omega_max")? };
    let depth = r.shape("depth branch")?;
    let trunk = r.shape("trunk")?;
    let mut net = BranchNet::zeros(depth, trunk).map_err(|e| PolicyError::Format(e.to_string()))?;
    let n = r.u64("parameter count")? as usize;
    if n != net.params.len() {
        return Err(PolicyError::Format(format!("header implies {} parameters, file declares {n}", net.params.len())));
    }
    for (i, p) in net.params.iter_mut().enumerate() {
        *p = r.f64(&format!("parameter {i}"))?;
        if !p.is_finite() {
            return Err(PolicyError::Format(format!("parameter {i} is not finite")));
        }
    }
    if r.pos != buf.len() {
        return Err(PolicyError::Format(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    MlpPolicy::from_net(net, limits)
}

pub fn load_policy(path: &Path) -> Result<MlpPolicy, PolicyError> {
    decode_policy(&fs::read(path)?)
}
