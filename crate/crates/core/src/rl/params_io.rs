//! Policy file format (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "SLCIMPOL"
//! version  u32      1
//! actions  u32      size of the action space
//! actor    u32 L, then L+1 u32 layer sizes
//! critic   u32 L, then L+1 u32 layer sizes
//! actor parameters   f64 × count, row-major weights then biases per layer
//! critic parameters  f64 × count
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::mlp::Mlp;
use super::ppo::PolicyParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SLCIMPOL";
const VERSION: u32 = 1;

pub fn write_params<W: Write>(params: &PolicyParams, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(params.actions() as u32).to_le_bytes())?;
    for net in [&params.actor, &params.critic] {
        out.write_all(&((net.sizes().len() - 1) as u32).to_le_bytes())?;
        for &s in net.sizes() {
            out.write_all(&(s as u32).to_le_bytes())?;
        }
    }
    for net in [&params.actor, &params.critic] {
        for p in net.params() {
            out.write_all(&p.to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptParams(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a policy. `expected_actions`, when set, must match the file.
pub fn read_params<R: Read>(mut input: R, expected_actions: Option<usize>) -> Result<PolicyParams> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::CorruptParams("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::CorruptParams(format!("unsupported version {version}")));
    }
    let actions = cur.u32()? as usize;
    if let Some(expected) = expected_actions {
        if expected != actions {
            return Err(Error::ShapeMismatch {
                expected: format!("{expected} actions"),
                found: format!("{actions} actions"),
            });
        }
    }
    let mut shapes = Vec::new();
    for _ in 0..2 {
        let layers = cur.u32()? as usize;
        if layers == 0 || layers > 16 {
            return Err(Error::CorruptParams(format!("implausible layer count {layers}")));
        }
        let sizes = (0..=layers)
            .map(|_| cur.u32().map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        shapes.push(sizes);
    }
    if shapes[0].last() != Some(&actions) || shapes[1].last() != Some(&1) {
        return Err(Error::ShapeMismatch {
            expected: format!("actor head {actions}, critic head 1"),
            found: format!("{:?} / {:?}", shapes[0], shapes[1]),
        });
    }
    let mut nets = Vec::new();
    for sizes in shapes {
        let count = Mlp::param_count_for(&sizes);
        let params = (0..count).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        nets.push(Mlp::from_parts(sizes, params).expect("count matches sizes"));
    }
    if cur.pos != bytes.len() {
        return Err(Error::CorruptParams(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    let critic = nets.pop().expect("two nets");
    let actor = nets.pop().expect("two nets");
    Ok(PolicyParams { actor, critic })
}

pub fn save_params(params: &PolicyParams, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_params(params, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_params(path: impl AsRef<Path>, expected_actions: Option<usize>) -> Result<PolicyParams> {
    let file = fs::File::open(path)?;
    read_params(std::io::BufReader::new(file), expected_actions)
}
