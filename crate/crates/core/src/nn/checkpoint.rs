//! Binary checkpoint format.
//!
//! ```text
//! "ADRLCKPT" | version u16 | tag_len u16 | tag utf8 | spec_hash u64 | count u32
//! per array: name_len u16 | name | rank u32 | dims u32 * rank | f32 * prod(dims)
//! ```
//! All integers and floats are little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::params::{Param, ParameterSet};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ADRLCKPT";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tag: String,
    pub params: ParameterSet,
}

pub fn encode_checkpoint(tag: &str, params: &ParameterSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + params.len() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tag.len() as u16).to_le_bytes());
    out.extend_from_slice(tag.as_bytes());
    out.extend_from_slice(&params.spec_hash.to_le_bytes());
    out.extend_from_slice(&(params.params.len() as u32).to_le_bytes());
    for p in &params.params {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for &d in &p.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &p.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        if self.buf.len() - self.pos < n {
            return Err(format!("truncated at byte {} (wanted {n} more)", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> std::result::Result<String, String> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| "invalid utf-8 string".to_string())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(8)? != CHECKPOINT_MAGIC {
        return Err("bad magic".into());
    }
    let version = c.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let tag = c.string()?;
    let spec_hash = c.u64()?;
    let count = c.u32()? as usize;
    let mut params = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = c.string()?;
        let rank = c.u32()? as usize;
        if rank > 8 {
            return Err(format!("array {name} has implausible rank {rank}"));
        }
        let shape = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let raw = c.take(n.checked_mul(4).ok_or("array too large")?)?;
        let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        params.push(Param { name, shape, data });
    }
    if c.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - c.pos));
    }
    Ok(Checkpoint {
        tag,
        params: ParameterSet { spec_hash, params },
    })
}

pub fn save_checkpoint(path: &Path, tag: &str, params: &ParameterSet) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&encode_checkpoint(tag, params))?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes).map_err(|message| Error::Checkpoint {
        path: path.to_path_buf(),
        message,
    })
}

/// Loads a checkpoint and checks it was written for the network with `expected_hash`.
pub fn load_checkpoint_for(path: &Path, expected_hash: u64) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    if ck.params.spec_hash != expected_hash {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            message: format!(
                "spec hash {:016x} does not match expected {:016x}",
                ck.params.spec_hash, expected_hash
            ),
        });
    }
    Ok(ck)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{HeadSpec, Network, NetworkSpec};
    use proptest::prelude::*;

    fn sample() -> ParameterSet {
        let net = Network::new(NetworkSpec::tiny(HeadSpec::Gaussian { dims: 2 }, 7, vec![8])).unwrap();
        let mut ps = net.init(9);
        // Awkward bit patterns must survive too.
        ps.params[0].data[0] = f32::MIN_POSITIVE / 2.0;
        ps.params[0].data[1] = -0.0;
        ps
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ps = sample();
        let ck = decode_checkpoint(&encode_checkpoint("PPO", &ps)).unwrap();
        assert_eq!(ck.tag, "PPO");
        assert_eq!(ck.params.spec_hash, ps.spec_hash);
        assert_eq!(ck.params.fingerprint(), ps.fingerprint());
    }

    #[test]
    fn file_round_trip_and_hash_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.ckpt");
        let ps = sample();
        save_checkpoint(&path, "TD3", &ps).unwrap();
        let ck = load_checkpoint_for(&path, ps.spec_hash).unwrap();
        assert_eq!(ck.params, ps);
        assert!(load_checkpoint_for(&path, ps.spec_hash ^ 1).unwrap_err().is_config());
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = encode_checkpoint("DQN", &sample());
        for cut in [0, 4, 9, 12, 20, 30, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_checkpoint(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_checkpoint(&extra).is_err());
    }

    #[test]
    fn missing_file_is_checkpoint_error() {
        let err = load_checkpoint(Path::new("/nonexistent/x.ckpt")).unwrap_err();
        assert!(matches!(err, Error::Checkpoint { .. }));
    }

    proptest! {
        #[test]
        fn arbitrary_bits_round_trip(bits in prop::collection::vec(any::<u32>(), 1..40), tag in "[A-Z0-9-]{0,12}") {
            let ps = ParameterSet {
                spec_hash: 7,
                params: vec![Param { name: "x".into(), shape: vec![bits.len()], data: bits.iter().map(|b| f32::from_bits(*b)).collect() }],
            };
            let ck = decode_checkpoint(&encode_checkpoint(&tag, &ps)).unwrap();
            prop_assert_eq!(ck.params.fingerprint(), bits);
            prop_assert_eq!(ck.tag, tag);
        }
    }
}
