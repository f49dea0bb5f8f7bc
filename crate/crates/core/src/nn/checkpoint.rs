//! Checkpoint container.
//!
//! ```text
//! magic      8 bytes  "SNKDQN01"
//! count      u32      number of records
//! record*    name_len u32, name (UTF-8), dtype u8, rank u32,
//!            dims u64 x rank, raw little-endian elements
//! checksum   u32      CRC-32 (IEEE) of every byte between magic and checksum
//! ```
//!
//! dtype codes: 0 = f32, 1 = f64, 2 = u64, 3 = u8.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Network, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SNKDQN01";

#[derive(Debug, Clone, PartialEq)]
pub enum RecordData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U64(Vec<u64>),
    U8(Vec<u8>),
}

impl RecordData {
    fn code(&self) -> u8 {
        match self {
            RecordData::F32(_) => 0,
            RecordData::F64(_) => 1,
            RecordData::U64(_) => 2,
            RecordData::U8(_) => 3,
        }
    }

    fn len(&self) -> usize {
        match self {
            RecordData::F32(v) => v.len(),
            RecordData::F64(v) => v.len(),
            RecordData::U64(v) => v.len(),
            RecordData::U8(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub dims: Vec<u64>,
    pub data: RecordData,
}

/// Named records in insertion-independent (sorted) order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    records: BTreeMap<String, Record>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, dims: Vec<u64>, data: RecordData) {
        debug_assert_eq!(dims.iter().product::<u64>() as usize, data.len());
        self.records.insert(name.into(), Record { dims, data });
    }

    pub fn insert_u64(&mut self, name: impl Into<String>, value: u64) {
        self.insert(name, vec![1], RecordData::U64(vec![value]));
    }

    pub fn insert_f64(&mut self, name: impl Into<String>, value: f64) {
        self.insert(name, vec![1], RecordData::F64(vec![value]));
    }

    pub fn get(&self, name: &str) -> Option<&Record> {
        self.records.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.records.contains_key(name)
    }

    pub fn u64(&self, name: &str) -> Result<u64> {
        match self.get(name).map(|r| &r.data) {
            Some(RecordData::U64(v)) if v.len() == 1 => Ok(v[0]),
            Some(_) => Err(corrupt(format!("record {name} is not a u64 scalar"))),
            None => Err(corrupt(format!("missing record {name}"))),
        }
    }

    pub fn f64(&self, name: &str) -> Result<f64> {
        match self.get(name).map(|r| &r.data) {
            Some(RecordData::F64(v)) if v.len() == 1 => Ok(v[0]),
            Some(_) => Err(corrupt(format!("record {name} is not an f64 scalar"))),
            None => Err(corrupt(format!("missing record {name}"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        payload.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, rec) in &self.records {
            payload.extend_from_slice(&(name.len() as u32).to_le_bytes());
            payload.extend_from_slice(name.as_bytes());
            payload.push(rec.data.code());
            payload.extend_from_slice(&(rec.dims.len() as u32).to_le_bytes());
            for d in &rec.dims {
                payload.extend_from_slice(&d.to_le_bytes());
            }
            match &rec.data {
                RecordData::F32(v) => v
                    .iter()
                    .for_each(|x| payload.extend_from_slice(&x.to_le_bytes())),
                RecordData::F64(v) => v
                    .iter()
                    .for_each(|x| payload.extend_from_slice(&x.to_le_bytes())),
                RecordData::U64(v) => v
                    .iter()
                    .for_each(|x| payload.extend_from_slice(&x.to_le_bytes())),
                RecordData::U8(v) => payload.extend_from_slice(v),
            }
        }
        let crc = crc32fast::hash(&payload);
        let mut out = Vec::with_capacity(MAGIC.len() + payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (payload, crc_bytes) = bytes[MAGIC.len()..].split_at(bytes.len() - MAGIC.len() - 4);
        let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
        if crc32fast::hash(payload) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        let mut cur = Cursor {
            buf: payload,
            pos: 0,
        };
        let count = cur.u32()?;
        let mut records = BTreeMap::new();
        for _ in 0..count {
            let name_len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(name_len)?)
                .map_err(|_| corrupt("record name is not UTF-8"))?
                .to_owned();
            let code = cur.take(1)?[0];
            let rank = cur.u32()? as usize;
            let dims = (0..rank).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
            let n = dims
                .iter()
                .try_fold(1u64, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| corrupt("dimension overflow"))? as usize;
            let data = match code {
                0 => RecordData::F32(
                    cur.take(n.checked_mul(4).ok_or_else(|| corrupt("size overflow"))?)?
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect(),
                ),
                1 => RecordData::F64(
                    cur.take(n.checked_mul(8).ok_or_else(|| corrupt("size overflow"))?)?
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect(),
                ),
                2 => RecordData::U64(
                    cur.take(n.checked_mul(8).ok_or_else(|| corrupt("size overflow"))?)?
                        .chunks_exact(8)
                        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect(),
                ),
                3 => RecordData::U8(cur.take(n)?.to_vec()),
                other => return Err(corrupt(format!("unknown dtype code {other}"))),
            };
            records.insert(name, Record { dims, data });
        }
        if cur.pos != payload.len() {
            return Err(corrupt("trailing bytes after records"));
        }
        Ok(Checkpoint { records })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // Replaced atomically through a sibling temp file.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Store every parameter and running statistic of `net` under `prefix`.
    pub fn insert_network(&mut self, prefix: &str, net: &Network<f32>) {
        for (name, t) in net.named_state() {
            self.insert_tensor(format!("{prefix}{name}"), t);
        }
    }

    pub fn insert_tensor(&mut self, name: impl Into<String>, t: &Tensor<f32>) {
        self.insert(
            name,
            t.shape().iter().map(|&d| d as u64).collect(),
            RecordData::F32(t.data().to_vec()),
        );
    }

    /// Fill `t` from record `name`, which must have the same shape.
    pub fn read_tensor_into(&self, name: &str, t: &mut Tensor<f32>) -> Result<()> {
        let rec = self
            .get(name)
            .ok_or_else(|| corrupt(format!("architecture mismatch: missing {name}")))?;
        let dims: Vec<u64> = t.shape().iter().map(|&d| d as u64).collect();
        if rec.dims != dims {
            return Err(corrupt(format!(
                "architecture mismatch: {name} has shape {:?}, expected {dims:?}",
                rec.dims
            )));
        }
        match &rec.data {
            RecordData::F32(v) => {
                t.data_mut().copy_from_slice(v);
                Ok(())
            }
            _ => Err(corrupt(format!("{name} is not f32 data"))),
        }
    }

    /// Load every parameter and running statistic of `net` from `prefix`.
    pub fn read_network_into(&self, prefix: &str, net: &mut Network<f32>) -> Result<()> {
        let expected = net.named_state().len();
        let present = self.names().filter(|n| n.starts_with(prefix)).count();
        if present != expected {
            return Err(corrupt(format!(
                "architecture mismatch: {present} tensors under '{prefix}', expected {expected}"
            )));
        }
        for (name, t) in net.named_state_mut() {
            self.read_tensor_into(&format!("{prefix}{name}"), t)?;
        }
        Ok(())
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt("truncated record"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}
