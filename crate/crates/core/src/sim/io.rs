//! Columnar binary format: header `"CVNB"`, version `u16`, `n` `u64`, `M`
//! `u16`, seed `u64`, then `2 + 2M` columns of `n` little-endian `f64`
//! (`alice_x`, `alice_p`, then `y_x`, `y_p` for each user).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{SymbolBlock, UserOutcomes};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CVNB";
pub const FORMAT_VERSION: u16 = 1;

pub fn write_block_to<W: Write>(block: &SymbolBlock, mut w: W) -> Result<()> {
    let m = u16::try_from(block.num_users())
        .map_err(|_| Error::Validation("too many users for the file format".into()))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&block.n.to_le_bytes())?;
    w.write_all(&m.to_le_bytes())?;
    w.write_all(&block.seed.to_le_bytes())?;
    let mut columns: Vec<&[f64]> = vec![&block.alice_x, &block.alice_p];
    for o in &block.outcomes {
        columns.push(&o.y_x);
        columns.push(&o.y_p);
    }
    for col in columns {
        if col.len() as u64 != block.n {
            return Err(Error::Validation(format!(
                "column has {} entries, block has n = {}",
                col.len(),
                block.n
            )));
        }
        for v in col {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_block(block: &SymbolBlock, path: &Path) -> Result<()> {
    write_block_to(block, BufWriter::new(File::create(path)?))
}

fn read_exact_or_corrupt<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::CorruptInput(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn read_u16<R: Read>(r: &mut R, what: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact_or_corrupt(r, &mut b, what)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact_or_corrupt(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_block_from<R: Read>(mut r: R) -> Result<SymbolBlock> {
    let mut magic = [0u8; 4];
    read_exact_or_corrupt(&mut r, &mut magic, "header")?;
    if &magic != MAGIC {
        return Err(Error::CorruptInput(format!("bad magic {magic:?}")));
    }
    let version = read_u16(&mut r, "header")?;
    if version != FORMAT_VERSION {
        return Err(Error::CorruptInput(format!("unsupported format version {version}")));
    }
    let n = read_u64(&mut r, "header")?;
    let m = read_u16(&mut r, "header")? as usize;
    let seed = read_u64(&mut r, "header")?;
    let len = usize::try_from(n).map_err(|_| Error::CorruptInput(format!("n = {n} too large")))?;

    let mut read_column = |idx: usize| -> Result<Vec<f64>> {
        let mut col = Vec::with_capacity(len.min(1 << 24));
        let mut b = [0u8; 8];
        for _ in 0..len {
            read_exact_or_corrupt(&mut r, &mut b, &format!("column {idx}"))?;
            col.push(f64::from_le_bytes(b));
        }
        Ok(col)
    };
    let alice_x = read_column(0)?;
    let alice_p = read_column(1)?;
    let mut outcomes = Vec::with_capacity(m);
    for k in 0..m {
        outcomes.push(UserOutcomes {
            y_x: read_column(2 + 2 * k)?,
            y_p: read_column(3 + 2 * k)?,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::CorruptInput("trailing bytes after last column".into()));
    }
    Ok(SymbolBlock {
        n,
        seed,
        alice_x,
        alice_p,
        outcomes,
        params_truth: None,
    })
}

pub fn read_block(path: &Path) -> Result<SymbolBlock> {
    read_block_from(BufReader::new(File::open(path)?))
}

/// One row per symbol: `alice_x,alice_p,y1_x,y1_p,…`, shortest round-trip digits.
pub fn write_csv<W: Write>(block: &SymbolBlock, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["alice_x".to_string(), "alice_p".to_string()];
    for k in 1..=block.num_users() {
        header.push(format!("y{k}_x"));
        header.push(format!("y{k}_p"));
    }
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..block.alice_x.len() {
        row.clear();
        row.push(format!("{:?}", block.alice_x[i]));
        row.push(format!("{:?}", block.alice_p[i]));
        for o in &block.outcomes {
            row.push(format!("{:?}", o.y_x[i]));
            row.push(format!("{:?}", o.y_p[i]));
        }
        out.write_record(&row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> SymbolBlock {
        SymbolBlock {
            n: 3,
            seed: 42,
            alice_x: vec![1.0, -2.5, 0.125],
            alice_p: vec![0.0, 3.0, -1.0],
            outcomes: vec![UserOutcomes {
                y_x: vec![0.5, 0.25, -0.75],
                y_p: vec![1e-300, f64::MAX, -0.0],
            }],
            params_truth: None,
        }
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_block_to(&block(), &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 2 + 8 + 2 + 8 + 4 * 3 * 8);
        assert_eq!(&buf[..4], b"CVNB");
        let back = read_block_from(buf.as_slice()).unwrap();
        assert_eq!(back, block());
    }

    #[test]
    fn truncation_and_garbage_are_corrupt() {
        let mut buf = Vec::new();
        write_block_to(&block(), &mut buf).unwrap();
        for cut in [0, 3, 10, 24, buf.len() - 1] {
            let r = read_block_from(&buf[..cut]);
            assert!(matches!(r, Err(Error::CorruptInput(_))), "cut at {cut}");
        }
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_block_from(extra.as_slice()), Err(Error::CorruptInput(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_block_from(bad.as_slice()), Err(Error::CorruptInput(_))));
        let mut ver = buf;
        ver[4] = 9;
        assert!(matches!(read_block_from(ver.as_slice()), Err(Error::CorruptInput(_))));
    }

    #[test]
    fn csv_layout() {
        let mut out = Vec::new();
        write_csv(&block(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("alice_x,alice_p,y1_x,y1_p"));
        assert_eq!(lines.next(), Some("1.0,0.0,0.5,1e-300"));
    }
}
