//! Binary model checkpoints.
//!
//! Layout: magic "MCNN", version byte 0x01, a u32-length-prefixed UTF-8
//! spec string ("<registry-name> <waveform> N=<block-len>"), a u64
//! parameter count, then three f64 arrays of that count (parameters,
//! first Adam moment, second Adam moment) and the u64 Adam step counter.
//! All integers and floats little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{count_params, registry_for_block, Model};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MCNN";
const VERSION: u8 = 0x01;

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let spec = model.spec();
    let block_len = spec.output_dim / 2;
    let spec_str = format!("{} {} N={}", spec.name, spec.waveform, block_len);

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(spec_str.len() as u32).to_le_bytes())?;
    w.write_all(spec_str.as_bytes())?;
    w.write_all(&(model.n_params() as u64).to_le_bytes())?;
    let (m, v, t) = model.adam_state();
    for arr in [model.params(), m, v] {
        for x in arr {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.write_all(&t.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let mut version = [0u8; 1];
    read_exact(&mut r, &mut version, "version")?;
    if version[0] != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {}",
            version[0]
        )));
    }

    let spec_len = read_u32(&mut r, "spec length")? as usize;
    if spec_len > 4096 {
        return Err(Error::Checkpoint(format!(
            "implausible spec length {spec_len}"
        )));
    }
    let mut spec_bytes = vec![0u8; spec_len];
    read_exact(&mut r, &mut spec_bytes, "spec string")?;
    let spec_str = String::from_utf8(spec_bytes)
        .map_err(|_| Error::Checkpoint("spec string is not UTF-8".into()))?;
    let (name, waveform, block_len) = parse_spec_str(&spec_str)?;
    let spec = registry_for_block(&name, block_len, &waveform)?;

    let count = read_u64(&mut r, "parameter count")? as usize;
    if count != count_params(&spec) {
        return Err(Error::Checkpoint(format!(
            "parameter count {count} does not match `{name}` ({} expected)",
            count_params(&spec)
        )));
    }

    let params = read_f64_vec(&mut r, count, "parameters")?;
    let m = read_f64_vec(&mut r, count, "first moment")?;
    let v = read_f64_vec(&mut r, count, "second moment")?;
    let t = read_u64(&mut r, "step counter")?;

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }

    let mut model = Model::zeroed(spec)?;
    model.params_mut().copy_from_slice(&params);
    model.set_adam_state(m, v, t);
    Ok(model)
}

fn parse_spec_str(s: &str) -> Result<(String, String, usize)> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Checkpoint(format!("malformed spec string `{s}`")));
    }
    let block_len = parts[2]
        .strip_prefix("N=")
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| Error::Checkpoint(format!("malformed block length in `{s}`")))?;
    Ok((parts[0].to_string(), parts[1].to_string(), block_len))
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Checkpoint(format!("truncated while reading {what}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64_vec(r: &mut impl Read, n: usize, what: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
