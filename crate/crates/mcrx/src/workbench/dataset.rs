//! Dataset generation (bits -> symbols -> channel -> received block) and
//! the binary dataset file format.
//!
//! File layout: magic "MCRX", version 0x01, u32 record count, u32 block
//! length N, then per record 2N f64 interleaved (re, im) received
//! samples, 2N f64 training targets ([Re(d); Im(d)] concatenated), and N
//! bits packed LSB-first; a 16-byte trailer holds the Eb/No in millibels
//! (i64) and the generation seed (u64). Little-endian throughout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;

use super::config::ExperimentConfig;
use super::seed::{derive_seed, ebno_millibels, rng_from_seed, stream};
use crate::channel::{apply_channel, ebno_to_sigma2};
use crate::error::{Error, Result};
use crate::neuralnet::Tensor;
use crate::numerics::{CVec, Cpx};
use crate::waveform::{add_cp, map_bits, modulate, remove_cp, ModMatrix};

const MAGIC: &[u8; 4] = b"MCRX";
const VERSION: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataRole {
    Train,
    Test,
}

impl DataRole {
    fn stream(&self) -> u64 {
        match self {
            DataRole::Train => stream::TRAIN_DATA,
            DataRole::Test => stream::TEST_DATA,
        }
    }
}

/// One simulated block: received samples, transmitted symbols, and the
/// ground-truth bits behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub received: CVec,
    pub symbols: CVec,
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    /// waveform label when generated in-process; absent after file load
    pub waveform: Option<String>,
    pub ebno_db: f64,
    /// channel taps when generated in-process; absent after file load
    pub taps: Option<CVec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn block_len(&self) -> usize {
        self.records[0].received.len()
    }

    /// All ground-truth bits, record-major.
    pub fn all_bits(&self) -> Vec<u8> {
        self.records.iter().flat_map(|r| r.bits.clone()).collect()
    }
}

/// Generate a dataset over a fixed channel: i.i.d. bits are mapped,
/// modulated, sent through CP + channel + CP removal, and stored with
/// their ground truth. Train and test roles use disjoint derived seeds.
pub fn gen_dataset(
    cfg: &ExperimentConfig,
    mm: &ModMatrix,
    ebno_db: f64,
    role: DataRole,
    h: &CVec,
) -> Result<Dataset> {
    if h.len() > cfg.waveform.ncp + 1 {
        return Err(Error::Config(format!(
            "{} taps exceed ncp + 1 = {}",
            h.len(),
            cfg.waveform.ncp + 1
        )));
    }
    let n_records = match role {
        DataRole::Train => cfg.data.train_symbols,
        DataRole::Test => cfg.data.test_symbols,
    };
    let seed = derive_seed(
        derive_seed(cfg.seed, role.stream()),
        ebno_millibels(ebno_db) as u64,
    );
    let sigma2 = ebno_to_sigma2(ebno_db, cfg.waveform.bits_per_symbol);
    let n = cfg.waveform.block_len();
    let ncp = cfg.waveform.ncp;

    let mut rng = rng_from_seed(seed);
    let mut records = Vec::with_capacity(n_records);
    for _ in 0..n_records {
        let bits: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let d = map_bits(&bits)?;
        let x = modulate(mm, &d)?;
        let tx = add_cp(&x, ncp)?;
        let rx = apply_channel(&tx, h, sigma2, &mut rng);
        let y = remove_cp(&rx, ncp)?;
        records.push(DatasetRecord {
            received: y,
            symbols: d,
            bits,
        });
    }
    Ok(Dataset {
        records,
        meta: DatasetMeta {
            waveform: Some(cfg.waveform.kind.label().to_string()),
            ebno_db,
            taps: Some(h.clone()),
            seed,
        },
    })
}

/// Received blocks as network input, shaped to a model's input contract:
/// `[2N]` or `[2N, 1]` takes [Re(y); Im(y)] serially, `[N, 2, 1]` puts
/// real and imaginary parts side by side as a two-column image.
pub fn to_inputs(ds: &Dataset, input_shape: &[usize]) -> Result<Tensor> {
    let n = ds.block_len();
    let n_rec = ds.records.len();
    let expected: usize = input_shape.iter().product();
    if expected != 2 * n {
        return Err(Error::DimensionMismatch(format!(
            "input shape {input_shape:?} incompatible with block length {n}"
        )));
    }
    let mut data = Vec::with_capacity(n_rec * 2 * n);
    match input_shape.len() {
        1 | 2 => {
            for rec in &ds.records {
                data.extend(rec.received.iter().map(|z| z.re));
                data.extend(rec.received.iter().map(|z| z.im));
            }
        }
        3 => {
            for rec in &ds.records {
                for z in rec.received.iter() {
                    data.push(z.re);
                    data.push(z.im);
                }
            }
        }
        _ => {
            return Err(Error::DimensionMismatch(format!(
                "unsupported input rank {input_shape:?}"
            )))
        }
    }
    let mut shape = vec![n_rec];
    shape.extend_from_slice(input_shape);
    Tensor::new(shape, data)
}

/// Training targets [Re(d); Im(d)] per record (the imaginary half is zero
/// for BPSK).
pub fn to_targets(ds: &Dataset) -> Tensor {
    let n = ds.block_len();
    let n_rec = ds.records.len();
    let mut data = Vec::with_capacity(n_rec * 2 * n);
    for rec in &ds.records {
        data.extend(rec.symbols.iter().map(|z| z.re));
        data.extend(rec.symbols.iter().map(|z| z.im));
    }
    Tensor::new(vec![n_rec, 2 * n], data).expect("target tensor")
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let n = ds.block_len();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(ds.records.len() as u32).to_le_bytes())?;
    w.write_all(&(n as u32).to_le_bytes())?;
    for rec in &ds.records {
        for z in rec.received.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        for z in rec.symbols.iter() {
            w.write_all(&z.re.to_le_bytes())?;
        }
        for z in rec.symbols.iter() {
            w.write_all(&z.im.to_le_bytes())?;
        }
        for chunk in rec.bits.chunks(8) {
            let mut byte = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                byte |= (b & 1) << i;
            }
            w.write_all(&[byte])?;
        }
    }
    w.write_all(&ebno_millibels(ds.meta.ebno_db).to_le_bytes())?;
    w.write_all(&ds.meta.seed.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::DatasetFile(format!("bad magic {magic:?}")));
    }
    let mut version = [0u8; 1];
    read_exact(&mut r, &mut version, "version")?;
    if version[0] != VERSION {
        return Err(Error::DatasetFile(format!(
            "unsupported version {}",
            version[0]
        )));
    }
    let n_records = read_u32(&mut r, "record count")? as usize;
    let n = read_u32(&mut r, "block length")? as usize;
    if n_records == 0 || n == 0 {
        return Err(Error::DatasetFile("empty dataset".into()));
    }

    let mut records = Vec::with_capacity(n_records);
    let bits_bytes = n.div_ceil(8);
    for _ in 0..n_records {
        let y_raw = read_f64_vec(&mut r, 2 * n, "received samples")?;
        let received = CVec::new(
            y_raw
                .chunks_exact(2)
                .map(|p| Cpx::new(p[0], p[1]))
                .collect(),
        )
        .map_err(|e| Error::DatasetFile(format!("received block: {e}")))?;
        let t_raw = read_f64_vec(&mut r, 2 * n, "targets")?;
        let symbols = CVec::new((0..n).map(|i| Cpx::new(t_raw[i], t_raw[n + i])).collect())
            .map_err(|e| Error::DatasetFile(format!("target block: {e}")))?;
        let mut packed = vec![0u8; bits_bytes];
        read_exact(&mut r, &mut packed, "bits")?;
        let bits: Vec<u8> = (0..n).map(|i| (packed[i / 8] >> (i % 8)) & 1).collect();
        records.push(DatasetRecord {
            received,
            symbols,
            bits,
        });
    }

    let mut mb = [0u8; 8];
    read_exact(&mut r, &mut mb, "metadata")?;
    let millibels = i64::from_le_bytes(mb);
    let mut sd = [0u8; 8];
    read_exact(&mut r, &mut sd, "metadata")?;
    let seed = u64::from_le_bytes(sd);

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::DatasetFile("trailing bytes after metadata".into()));
    }

    let ebno_db = if millibels == i64::MAX {
        f64::INFINITY
    } else if millibels == i64::MIN {
        f64::NEG_INFINITY
    } else {
        millibels as f64 / 1000.0
    };
    Ok(Dataset {
        records,
        meta: DatasetMeta {
            waveform: None,
            ebno_db,
            taps: None,
            seed,
        },
    })
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::DatasetFile(format!("truncated while reading {what}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64_vec(r: &mut impl Read, count: usize, what: &str) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    read_exact(r, &mut bytes, what)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
