//! `OEC1` checkpoints.
//!
//! Layout: magic `OEC1`, `u64` LE header length, UTF-8 header, `f64` LE
//! tensor payload, then an 8-byte checksum (leading bytes of the SHA-256 of
//! everything before it). The header has four blocks:
//!
//! ```text
//! [config]
//! key = value            (TrainConfig fields)
//! [meta]
//! epoch = 7
//! dev_metric = 91.5
//! [tensors]
//! name<TAB>d0,d1<TAB>offset<TAB>len   (offset/len in f64 elements)
//! [vocab]
//! one entry per line
//! ```

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::training::{Checkpoint, NamedTensor, TaskKind, TrainConfig};

use super::{read_bytes, write_atomic};

const MAGIC: &[u8; 4] = b"OEC1";

fn checksum(bytes: &[u8]) -> [u8; 8] {
    let digest = Sha256::digest(bytes);
    digest[..8].try_into().expect("sha256 is 32 bytes")
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut header = String::from("[config]\n");
    header.push_str(&ckpt.config.to_text());
    let _ = writeln!(header, "[meta]\nepoch = {}\ndev_metric = {}", ckpt.epoch, ckpt.dev_metric);
    header.push_str("[tensors]\n");
    let mut offset = 0;
    for t in &ckpt.tensors {
        if t.name.contains(['\t', '\n']) {
            return Err(Error::contract(format!("tensor name {:?} not storable", t.name)));
        }
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(Error::contract(format!("tensor '{}' data does not match its shape", t.name)));
        }
        let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
        let _ = writeln!(header, "{}\t{}\t{}\t{}", t.name, shape.join(","), offset, t.data.len());
        offset += t.data.len();
    }
    header.push_str("[vocab]\n");
    for v in &ckpt.vocab {
        if v.is_empty() || v.contains('\n') {
            return Err(Error::contract(format!("vocabulary entry {v:?} not storable")));
        }
        header.push_str(v);
        header.push('\n');
    }

    let mut out = Vec::with_capacity(4 + 8 + header.len() + offset * 8 + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for t in &ckpt.tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum);
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corruption(msg.into())
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "bad magic at byte 0, expected OEC1"));
    }
    if bytes.len() < 4 + 8 + 8 {
        return Err(corrupt(format!("{}: truncated ({} bytes)", path.display(), bytes.len())));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if checksum(body) != sum {
        return Err(corrupt(format!("{}: checksum mismatch", path.display())));
    }
    let header_len = u64::from_le_bytes(body[4..12].try_into().expect("8 bytes"));
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|n| n.checked_add(12))
        .filter(|&e| e <= body.len())
        .ok_or_else(|| corrupt("header length exceeds file size"))?;
    let header = std::str::from_utf8(&body[12..header_end]).map_err(|_| corrupt("header is not UTF-8"))?;
    let payload = &body[header_end..];
    if payload.len() % 8 != 0 {
        return Err(corrupt("payload is not a whole number of f64 values"));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();

    let mut block = "";
    let mut config_text = String::new();
    let mut epoch = None;
    let mut dev_metric = None;
    let mut tensors = Vec::new();
    let mut vocab = Vec::new();
    let mut expected_offset = 0;
    for line in header.lines() {
        if block != "vocab" && line.starts_with('[') && line.ends_with(']') {
            block = match line {
                "[config]" => "config",
                "[meta]" => "meta",
                "[tensors]" => "tensors",
                "[vocab]" => "vocab",
                other => return Err(Error::Version(format!("unknown header block {other}"))),
            };
            continue;
        }
        match block {
            "config" => {
                config_text.push_str(line);
                config_text.push('\n');
            }
            "meta" => {
                let (k, v) = line
                    .split_once(" = ")
                    .ok_or_else(|| corrupt(format!("bad meta line '{line}'")))?;
                match k {
                    "epoch" => epoch = Some(v.parse().map_err(|_| corrupt("bad epoch"))?),
                    "dev_metric" => dev_metric = Some(v.parse().map_err(|_| corrupt("bad dev_metric"))?),
                    other => return Err(Error::Version(format!("unknown meta key '{other}'"))),
                }
            }
            "tensors" => {
                let f: Vec<&str> = line.split('\t').collect();
                if f.len() != 4 {
                    return Err(corrupt(format!("bad tensor entry '{line}'")));
                }
                let shape = f[1]
                    .split(',')
                    .map(|d| d.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| corrupt(format!("bad shape for '{}'", f[0])))?;
                let offset: usize = f[2].parse().map_err(|_| corrupt("bad tensor offset"))?;
                let len: usize = f[3].parse().map_err(|_| corrupt("bad tensor length"))?;
                if offset != expected_offset
                    || shape.iter().product::<usize>() != len
                    || offset + len > values.len()
                {
                    return Err(corrupt(format!("tensor '{}' directory entry is inconsistent", f[0])));
                }
                expected_offset += len;
                tensors.push(NamedTensor {
                    name: f[0].to_string(),
                    shape,
                    data: values[offset..offset + len].to_vec(),
                });
            }
            "vocab" => vocab.push(line.to_string()),
            _ => return Err(corrupt("header does not start with [config]")),
        }
    }
    if expected_offset != values.len() {
        return Err(corrupt("payload size does not match the tensor directory"));
    }
    let config = TrainConfig::parse(&config_text, TaskKind::Hypernym)
        .map_err(|e| Error::Version(format!("config block: {e}")))?;
    Ok(Checkpoint {
        config,
        epoch: epoch.ok_or_else(|| corrupt("missing epoch"))?,
        dev_metric: dev_metric.ok_or_else(|| corrupt("missing dev_metric"))?,
        vocab,
        tensors,
    })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ckpt)?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_bytes(path)?, path)
}
