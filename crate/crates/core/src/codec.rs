//! Versioned little-endian binary container.
//!
//! Layout:
//!
//! ```text
//! magic   b"SNET"
//! version u32
//! kind    u8            (what the records describe)
//! count   u64
//! record* tag u8 | n_ints u32 | ints u64* | n_reals u64 | reals f64*
//! ```
//!
//! Every integer and real is little-endian. Reals are stored as raw IEEE-754
//! bits so round trips are exact.

use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SNET";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum ContainerKind {
    Network = 1,
    Flow = 2,
    Images = 3,
}

impl ContainerKind {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Self::Network),
            2 => Ok(Self::Flow),
            3 => Ok(Self::Images),
            _ => Err(Error::Format(format!("unknown container kind {v}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub tag: u8,
    pub ints: Vec<u64>,
    pub reals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: ContainerKind,
    pub records: Vec<Record>,
}

impl Container {
    pub fn new(kind: ContainerKind) -> Self {
        Self { kind, records: Vec::new() }
    }

    pub fn push(&mut self, tag: u8, ints: Vec<u64>, reals: Vec<f64>) {
        self.records.push(Record { tag, ints, reals });
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            out.push(r.tag);
            out.extend_from_slice(&(r.ints.len() as u32).to_le_bytes());
            for i in &r.ints {
                out.extend_from_slice(&i.to_le_bytes());
            }
            out.extend_from_slice(&(r.reals.len() as u64).to_le_bytes());
            for x in &r.reals {
                out.extend_from_slice(&x.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let kind = ContainerKind::from_u8(cur.u8()?)?;
        let count = cur.u64()?;
        let mut records = Vec::new();
        for _ in 0..count {
            let tag = cur.u8()?;
            let n_ints = cur.u32()? as usize;
            let ints = (0..n_ints).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
            let n_reals = cur.u64()? as usize;
            if n_reals > cur.remaining() / 8 {
                return Err(Error::Format("truncated real payload".into()));
            }
            let reals = (0..n_reals)
                .map(|_| cur.u64().map(f64::from_bits))
                .collect::<Result<Vec<_>>>()?;
            records.push(Record { tag, ints, reals });
        }
        if cur.remaining() != 0 {
            return Err(Error::Format(format!("{} trailing bytes", cur.remaining())));
        }
        Ok(Self { kind, records })
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format("unexpected end of container".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
