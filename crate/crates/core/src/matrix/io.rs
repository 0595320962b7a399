//! Flat binary layout: rows and cols as little-endian u64, then the
//! row-major payload as little-endian f64. CSV is for inspection only.

use std::io::{BufRead, Read, Write};

use super::Matrix;
use crate::error::{Error, Result};

impl Matrix {
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_binary_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 8 * self.data.len());
        self.write_binary(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let cols = u64::from_le_bytes(word) as usize;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Parse(format!("header {rows}x{cols} overflows")))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Parse("trailing bytes after matrix payload".into()));
        }
        Matrix::new(rows, cols, data)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.data.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Matrix::from_rows(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_layout_is_little_endian() {
        let m = Matrix::new(1, 2, vec![1.0, -2.5]).unwrap();
        let bytes = m.to_binary_bytes();
        assert_eq!(bytes.len(), 16 + 16);
        assert_eq!(&bytes[0..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &2u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &(-2.5f64).to_le_bytes());
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let m = Matrix::new(2, 2, vec![1.0; 4]).unwrap();
        let bytes = m.to_binary_bytes();
        assert!(Matrix::read_binary(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Matrix::read_binary(&extra[..]).is_err());
    }

    proptest! {
        #[test]
        fn binary_and_csv_round_trip(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in proptest::collection::vec(-1e6f64..1e6, 36),
        ) {
            let m = Matrix::from_fn(rows, cols, |i, j| seed[i * 6 + j]);
            prop_assert_eq!(Matrix::read_binary(&m.to_binary_bytes()[..]).unwrap(), m.clone());
            let mut csv = Vec::new();
            m.write_csv(&mut csv).unwrap();
            prop_assert_eq!(Matrix::read_csv(&csv[..]).unwrap(), m);
        }
    }
}
