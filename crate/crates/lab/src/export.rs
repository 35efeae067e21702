//! Binary dataset export.
//!
//! Layout, all little-endian: a 16-byte header (`SLABDATA`, `u32` version,
//! `u32` record count), then per record `num_dense` `f64`s, the `hots`
//! `u32` indices of every table in order, and one label byte.

use std::io::{self, Read, Write};

use recscale_core::synthgen::{FeatureSchema, Sample};

pub const MAGIC: &[u8; 8] = b"SLABDATA";
pub const VERSION: u32 = 1;

pub fn write_dataset<W: Write>(mut w: W, schema: &FeatureSchema, samples: &[Sample]) -> io::Result<()> {
    let count = u32::try_from(samples.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "more than u32::MAX records"))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    for s in samples {
        if s.dense.len() != schema.num_dense || s.sparse.len() != schema.tables.len() {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "sample does not match the schema"));
        }
        for x in &s.dense {
            w.write_all(&x.to_le_bytes())?;
        }
        for (indices, table) in s.sparse.iter().zip(&schema.tables) {
            if indices.len() != table.hots as usize {
                return Err(io::Error::new(io::ErrorKind::InvalidInput, "sample does not match the schema"));
            }
            for i in indices {
                w.write_all(&i.to_le_bytes())?;
            }
        }
        w.write_all(&[u8::from(s.label)])?;
    }
    w.flush()
}

pub fn read_dataset<R: Read>(mut r: R, schema: &FeatureSchema) -> io::Result<Vec<Sample>> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_owned());
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..8] != MAGIC {
        return Err(bad("missing SLABDATA magic"));
    }
    let version = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad("unsupported version"));
    }
    let count = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes"));
    let mut b8 = [0u8; 8];
    let mut b4 = [0u8; 4];
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut dense = Vec::with_capacity(schema.num_dense);
        for _ in 0..schema.num_dense {
            r.read_exact(&mut b8)?;
            dense.push(f64::from_le_bytes(b8));
        }
        let mut sparse = Vec::with_capacity(schema.tables.len());
        for t in &schema.tables {
            let mut idx = Vec::with_capacity(t.hots as usize);
            for _ in 0..t.hots {
                r.read_exact(&mut b4)?;
                idx.push(u32::from_le_bytes(b4));
            }
            sparse.push(idx);
        }
        let mut label = [0u8; 1];
        r.read_exact(&mut label)?;
        if label[0] > 1 {
            return Err(bad("label byte must be 0 or 1"));
        }
        out.push(Sample { dense, sparse, label: label[0] == 1 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use recscale_core::synthgen::SparseTableSpec;

    #[test]
    fn layout_and_round_trip() {
        let schema = FeatureSchema {
            num_dense: 2,
            tables: vec![
                SparseTableSpec { vocab_size: 10, hots: 1, zipf_exponent: 1.0 },
                SparseTableSpec { vocab_size: 10, hots: 2, zipf_exponent: 1.0 },
            ],
        };
        let samples = vec![
            Sample { dense: vec![1.5, -2.0], sparse: vec![vec![3], vec![1, 7]], label: true },
            Sample { dense: vec![0.0, 0.25], sparse: vec![vec![0], vec![9, 2]], label: false },
        ];
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &schema, &samples).unwrap();
        assert_eq!(bytes.len(), 16 + 2 * (2 * 8 + 3 * 4 + 1));
        assert_eq!(&bytes[..8], b"SLABDATA");
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert_eq!(bytes[16 + 28], 1);
        assert_eq!(read_dataset(&bytes[..], &schema).unwrap(), samples);
    }
}
