//! Matrix dumps for checking channels and precoders from other tools.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic  b"MMWD"
//! u32    version (1)
//! u64    seed
//! u32    matrix count
//! per matrix: u32 rows, u32 cols, rows*cols*(f64 re, f64 im) row-major
//! ```
//!
//! The CSV form carries the same content: a `mmwdse-dump,<version>,<seed>,<count>`
//! header, then per matrix a `<rows>,<cols>` line followed by one line per
//! row of interleaved `re,im` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::precoding::PrecoderPair;

pub const MAGIC: &[u8; 4] = b"MMWD";
pub const VERSION: u32 = 1;

/// Largest matrix dimension accepted when reading.
const MAX_DIM: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDump {
    pub seed: u64,
    pub matrices: Vec<CMatrix>,
}

impl MatrixDump {
    pub fn new(seed: u64, matrices: Vec<CMatrix>) -> Self {
        Self { seed, matrices }
    }

    /// Per-user MIMO channels `H_u`, then the post-combining channel.
    pub fn from_channels(set: &ChannelSet) -> Self {
        let mut matrices = set.per_user_h.clone();
        matrices.push(set.post_combining());
        Self::new(set.seed, matrices)
    }

    /// `R` then `B`.
    pub fn from_precoder(pre: &PrecoderPair, seed: u64) -> Self {
        Self::new(seed, vec![pre.r.clone(), pre.b.clone()])
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        w.write_u64::<LittleEndian>(self.seed)?;
        w.write_u32::<LittleEndian>(self.matrices.len() as u32)?;
        for m in &self.matrices {
            w.write_u32::<LittleEndian>(m.nrows() as u32)?;
            w.write_u32::<LittleEndian>(m.ncols() as u32)?;
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    w.write_f64::<LittleEndian>(m[(r, c)].re)?;
                    w.write_f64::<LittleEndian>(m[(r, c)].im)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let truncated = |e: std::io::Error| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::MalformedDump("truncated".into()),
            _ => Error::Io(e),
        };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::MalformedDump(format!("bad magic {magic:?}")));
        }
        let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
        if version != VERSION {
            return Err(Error::MalformedDump(format!("unsupported version {version}")));
        }
        let seed = r.read_u64::<LittleEndian>().map_err(truncated)?;
        let count = r.read_u32::<LittleEndian>().map_err(truncated)?;
        let mut matrices = Vec::new();
        for _ in 0..count {
            let rows = r.read_u32::<LittleEndian>().map_err(truncated)?;
            let cols = r.read_u32::<LittleEndian>().map_err(truncated)?;
            check_dims(rows, cols)?;
            let mut m = CMatrix::zeros(rows as usize, cols as usize);
            for i in 0..rows as usize {
                for j in 0..cols as usize {
                    let re = r.read_f64::<LittleEndian>().map_err(truncated)?;
                    let im = r.read_f64::<LittleEndian>().map_err(truncated)?;
                    m[(i, j)] = C64::new(re, im);
                }
            }
            matrices.push(m);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::MalformedDump("trailing bytes after last matrix".into()));
        }
        Ok(Self { seed, matrices })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().flexible(true).from_writer(w);
        out.write_record([
            "mmwdse-dump".to_string(),
            VERSION.to_string(),
            self.seed.to_string(),
            self.matrices.len().to_string(),
        ])?;
        for m in &self.matrices {
            out.write_record([m.nrows().to_string(), m.ncols().to_string()])?;
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .flat_map(|c| [format!("{:e}", m[(r, c)].re), format!("{:e}", m[(r, c)].im)])
                    .collect();
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
        let mut records = rd.records();
        let mut next = |what: &str| -> Result<csv::StringRecord> {
            records
                .next()
                .ok_or_else(|| Error::MalformedDump(format!("missing {what}")))?
                .map_err(Error::from)
        };
        let header = next("header")?;
        if header.len() != 4 || &header[0] != "mmwdse-dump" {
            return Err(Error::MalformedDump("bad header".into()));
        }
        let version: u32 = parse(&header[1])?;
        if version != VERSION {
            return Err(Error::MalformedDump(format!("unsupported version {version}")));
        }
        let seed: u64 = parse(&header[2])?;
        let count: usize = parse(&header[3])?;
        let mut matrices = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let dims = next("dimensions")?;
            if dims.len() != 2 {
                return Err(Error::MalformedDump("dimension line needs two fields".into()));
            }
            let (rows, cols): (u32, u32) = (parse(&dims[0])?, parse(&dims[1])?);
            check_dims(rows, cols)?;
            let mut m = CMatrix::zeros(rows as usize, cols as usize);
            for i in 0..rows as usize {
                let rec = next("matrix row")?;
                // the csv writer emits a zero-column row as a single empty field
                let empty_row = cols == 0 && rec.len() == 1 && rec[0].is_empty();
                if rec.len() != 2 * cols as usize && !empty_row {
                    return Err(Error::MalformedDump(format!("row {i} has {} fields, expected {}", rec.len(), 2 * cols)));
                }
                for j in 0..cols as usize {
                    m[(i, j)] = C64::new(parse(&rec[2 * j])?, parse(&rec[2 * j + 1])?);
                }
            }
            matrices.push(m);
        }
        if next("end").is_ok() {
            return Err(Error::MalformedDump("trailing records after last matrix".into()));
        }
        Ok(Self { seed, matrices })
    }

    /// Writes CSV for a `.csv` extension, binary otherwise.
    pub fn save(&self, path: &Path) -> Result<()> {
        let w = BufWriter::new(File::create(path)?);
        if is_csv(path) {
            self.write_csv(w)
        } else {
            self.write_binary(w)
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r = BufReader::new(File::open(path)?);
        if is_csv(path) {
            Self::read_csv(r)
        } else {
            Self::read_binary(r)
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn check_dims(rows: u32, cols: u32) -> Result<()> {
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(Error::MalformedDump(format!("implausible dimensions {rows}x{cols}")));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::MalformedDump(format!("cannot parse {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channel, ArrayGeometry, ClusterParams};
    use proptest::prelude::*;

    fn sample() -> MatrixDump {
        let a = CMatrix::from_fn(2, 3, |r, c| C64::new(r as f64 + 0.5, -(c as f64) * 1e-300));
        let b = CMatrix::from_fn(1, 1, |_, _| C64::new(f64::MAX, f64::MIN_POSITIVE));
        MatrixDump::new(0xDEAD_BEEF_0042, vec![a, b, CMatrix::zeros(0, 4)])
    }

    #[test]
    fn binary_layout() {
        let mut buf = Vec::new();
        MatrixDump::new(7, vec![CMatrix::from_fn(1, 2, |_, c| C64::new(c as f64, -1.0))])
            .write_binary(&mut buf)
            .unwrap();
        assert_eq!(&buf[..4], b"MMWD");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 7);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[20..24].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[24..28].try_into().unwrap()), 2);
        let f = |i: usize| f64::from_le_bytes(buf[28 + 8 * i..36 + 8 * i].try_into().unwrap());
        assert_eq!([f(0), f(1), f(2), f(3)], [0.0, -1.0, 1.0, -1.0]);
        assert_eq!(buf.len(), 28 + 32);
    }

    #[test]
    fn round_trips_are_exact() {
        let d = sample();
        let mut bin = Vec::new();
        d.write_binary(&mut bin).unwrap();
        assert_eq!(MatrixDump::read_binary(&bin[..]).unwrap(), d);
        let mut text = Vec::new();
        d.write_csv(&mut text).unwrap();
        assert_eq!(MatrixDump::read_csv(&text[..]).unwrap(), d);
    }

    #[test]
    fn csv_header_line() {
        let mut text = Vec::new();
        sample().write_csv(&mut text).unwrap();
        let s = String::from_utf8(text).unwrap();
        assert!(s.starts_with("mmwdse-dump,1,244837814042690,3\n2,3\n"));
    }

    #[test]
    fn rejects_damage() {
        let mut bin = Vec::new();
        sample().write_binary(&mut bin).unwrap();
        let mut bad = bin.clone();
        bad[0] = b'X';
        assert!(matches!(MatrixDump::read_binary(&bad[..]), Err(Error::MalformedDump(_))));
        assert!(matches!(MatrixDump::read_binary(&bin[..bin.len() - 3]), Err(Error::MalformedDump(_))));
        let mut extra = bin.clone();
        extra.push(0);
        assert!(matches!(MatrixDump::read_binary(&extra[..]), Err(Error::MalformedDump(_))));
        assert!(matches!(MatrixDump::read_csv(&b"mmwdse-dump,1,0,1\n2,2\n1,2,3,4\n"[..]), Err(Error::MalformedDump(_))));
        assert!(matches!(MatrixDump::read_csv(&b"other,1,0,0\n"[..]), Err(Error::MalformedDump(_))));
    }

    #[test]
    fn channel_files_round_trip() {
        let set = generate_channel(&ArrayGeometry::linear(16), &ArrayGeometry::linear(4), &ClusterParams::default(), 3, true, 99).unwrap();
        let d = MatrixDump::from_channels(&set);
        assert_eq!(d.matrices.len(), 4);
        assert_eq!(d.seed, 99);
        let dir = tempfile::tempdir().unwrap();
        for name in ["h.bin", "h.csv"] {
            let p = dir.path().join(name);
            d.save(&p).unwrap();
            assert_eq!(MatrixDump::load(&p).unwrap(), d);
        }
    }

    proptest! {
        #[test]
        fn arbitrary_matrices(seed in any::<u64>(), r in 0usize..5, c in 0usize..5, vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 50)) {
            let m = CMatrix::from_fn(r, c, |i, j| C64::new(vals[2 * (i * c + j) % 50], vals[(2 * (i * c + j) + 1) % 50]));
            let d = MatrixDump::new(seed, vec![m.clone(), m.adjoint()]);
            let mut bin = Vec::new();
            d.write_binary(&mut bin).unwrap();
            prop_assert_eq!(MatrixDump::read_binary(&bin[..]).unwrap(), d.clone());
            let mut text = Vec::new();
            d.write_csv(&mut text).unwrap();
            prop_assert_eq!(MatrixDump::read_csv(&text[..]).unwrap(), d);
        }
    }
}
