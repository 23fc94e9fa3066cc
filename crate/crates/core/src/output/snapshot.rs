//! Field snapshots (`.fld`).
//!
//! Layout: a text header of `key = value` lines introduced by the magic
//! line `SKFLD` and terminated by an empty line, then the payload of
//! little-endian `f64` values, one row-major field after the other in the
//! order of `vars`.
//!
//! ```text
//! SKFLD
//! version = 1
//! time = 0.5
//! it = 50
//! shape = 64,64
//! vars = rot
//! solver = ns2d
//! digest = 3f2a9c0d11e4b870
//!
//! <payload>
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::{self, ParamTree};

pub const MAGIC: &str = "SKFLD";
pub const VERSION: u32 = 1;
const MAX_HEADER: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub time: f64,
    pub it: usize,
    pub shape: Vec<usize>,
    pub vars: Vec<String>,
    pub solver: String,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub fields: Vec<Vec<f64>>,
}

/// Fingerprint of the parameters a snapshot depends on: solver and grid.
pub fn params_digest(params: &ParamTree) -> Result<String> {
    let mut text = format!("solver = {:?}\n", params.get_str("solver")?);
    text.push_str(&params::serialize(params.subtree("oper")?));
    let hash = Sha256::digest(text.as_bytes());
    Ok(hex::encode(&hash[..8]))
}

impl SnapshotHeader {
    fn field_len(&self) -> Option<usize> {
        self.shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n))
    }

    fn payload_len(&self) -> Option<usize> {
        self.field_len()?.checked_mul(self.vars.len())?.checked_mul(8)
    }

    fn encode(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "{MAGIC}\nversion = {VERSION}\ntime = {:?}\nit = {}\nshape = {}\nvars = {}\nsolver = {}\ndigest = {}\n\n",
            self.time,
            self.it,
            join(self.shape.iter().map(|n| n.to_string()).collect()),
            self.vars.join(","),
            self.solver,
            self.digest
        )
    }

    /// Parses the header; returns it with the offset of the payload.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<(SnapshotHeader, usize)> {
        let bad = |msg: String| Error::format(path, msg);
        let limit = bytes.len().min(MAX_HEADER);
        let end = bytes[..limit]
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| bad("header is not terminated by an empty line".into()))?;
        let text = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
        let mut lines = text.split('\n');
        if lines.next() != Some(MAGIC) {
            return Err(bad(format!("missing magic `{MAGIC}`")));
        }
        let mut fields: [Option<&str>; 7] = [None; 7];
        const KEYS: [&str; 7] = ["version", "time", "it", "shape", "vars", "solver", "digest"];
        for line in lines {
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
            let slot = KEYS
                .iter()
                .position(|key| *key == k)
                .ok_or_else(|| bad(format!("unknown header key `{k}`")))?;
            if fields[slot].replace(v).is_some() {
                return Err(bad(format!("duplicate header key `{k}`")));
            }
        }
        let get = |i: usize| fields[i].ok_or_else(|| bad(format!("missing header key `{}`", KEYS[i])));
        let version: u32 = get(0)?.parse().map_err(|_| bad("invalid version".into()))?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let time: f64 = get(1)?.parse().map_err(|_| bad("invalid time".into()))?;
        let it: usize = get(2)?.parse().map_err(|_| bad("invalid iteration".into()))?;
        let shape = get(3)?
            .split(',')
            .map(|s| s.parse::<usize>().ok().filter(|n| *n > 0))
            .collect::<Option<Vec<_>>>()
            .filter(|s| (1..=3).contains(&s.len()))
            .ok_or_else(|| bad("invalid shape".into()))?;
        let vars: Vec<String> = get(4)?.split(',').map(str::to_string).collect();
        if vars.iter().any(|v| !params::valid_identifier(v)) {
            return Err(bad("invalid variable names".into()));
        }
        let solver = get(5)?;
        if !params::valid_identifier(solver) {
            return Err(bad(format!("invalid solver name `{solver}`")));
        }
        let digest = get(6)?;
        if digest.len() != 16 || !digest.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(bad(format!("invalid digest `{digest}`")));
        }
        let header = SnapshotHeader {
            time,
            it,
            shape,
            vars,
            solver: solver.to_string(),
            digest: digest.to_string(),
        };
        Ok((header, end + 2))
    }
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.encode().into_bytes();
        for field in &self.fields {
            for v in field {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let (header, offset) = SnapshotHeader::decode(bytes, path)?;
        let payload = &bytes[offset..];
        let expected = header
            .payload_len()
            .ok_or_else(|| Error::format(path, "declared shape is too large"))?;
        if payload.len() != expected {
            return Err(Error::format(
                path,
                format!("payload has {} bytes, header declares {expected}", payload.len()),
            ));
        }
        let n = header.field_len().unwrap_or(0);
        let fields = if n == 0 {
            vec![Vec::new(); header.vars.len()]
        } else {
            payload
                .chunks_exact(n * 8)
                .map(|chunk| {
                    chunk
                        .chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                        .collect()
                })
                .collect()
        };
        Ok(Snapshot { header, fields })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.header.field_len().unwrap_or(usize::MAX);
        if self.fields.len() != self.header.vars.len() || self.fields.iter().any(|f| f.len() != n) {
            return Err(Error::Shape("snapshot fields do not match the header".into()));
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?, path)
    }

    pub fn read_header(path: &Path) -> Result<SnapshotHeader> {
        use std::io::Read;
        let mut buf = Vec::new();
        std::fs::File::open(path)?
            .take(MAX_HEADER as u64)
            .read_to_end(&mut buf)?;
        SnapshotHeader::decode(&buf, path).map(|(h, _)| h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn sample() -> Snapshot {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        Snapshot {
            header: SnapshotHeader {
                time: 0.1 + 0.2,
                it: 7,
                shape: vec![4, 6],
                vars: vec!["vx".into(), "vy".into()],
                solver: "ns2d".into(),
                digest: "0123456789abcdef".into(),
            },
            fields: (0..2).map(|_| (0..24).map(|_| rng.random::<f64>() - 0.5).collect()).collect(),
        }
    }

    #[test]
    fn header_values_are_validated() {
        let bytes = sample().to_bytes();
        let text = String::from_utf8_lossy(&bytes[..bytes.len() - 2 * 24 * 8]).into_owned();
        for (from, to) in [("ns2d", "ns2d\r"), ("ns2d", "a b"), ("0123456789abcdef", "9"), ("0123456789abcdef", "0123456789ABCDEF")] {
            let mut bad = text.replacen(from, to, 1).into_bytes();
            bad.extend_from_slice(&bytes[text.len()..]);
            assert!(Snapshot::from_bytes(&bad, Path::new("x.fld")).is_err(), "{to:?}");
        }
    }

    #[test]
    fn save_load_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.fld");
        let snap = sample();
        snap.save(&path).unwrap();
        let back = Snapshot::load(&path).unwrap();
        assert_eq!(back.header.time.to_bits(), snap.header.time.to_bits());
        for (a, b) in snap.fields.iter().flatten().zip(back.fields.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(Snapshot::read_header(&path).unwrap(), snap.header);
    }

    #[test]
    fn truncated_payload_is_reported() {
        let bytes = sample().to_bytes();
        let err = Snapshot::from_bytes(&bytes[..bytes.len() - 3], Path::new("x.fld")).unwrap_err();
        assert!(err.to_string().contains("payload has"), "{err}");
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let p = Path::new("x.fld");
        let text = String::from_utf8_lossy(&sample().to_bytes()[..100]).to_string();
        for (from, to) in [("SKFLD", "SKFLX"), ("version = 1", "version = 2"), ("shape = 4,6", "shape = 4,0")] {
            let mut bytes = sample().to_bytes();
            let head = text.replacen(from, to, 1);
            bytes.splice(..100, head.bytes());
            assert!(Snapshot::from_bytes(&bytes, p).is_err(), "{from}");
        }
        assert!(Snapshot::from_bytes(b"SKFLD\n", p).is_err());
        let huge = b"SKFLD\nversion = 1\ntime = 0\nit = 0\nshape = 99999999999,99999999999,999999999\nvars = a\nsolver = s\ndigest = d\n\n";
        assert!(Snapshot::from_bytes(huge, p).is_err());
    }
}
