//! Binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `WNF1` |
//! | 4 | grid size n (u32) |
//! | 4 | component count c (u32) |
//! | 8 | time tag (f64; NaN when absent) |
//! | 16·c·n³ | coefficients: (re, im) f64 pairs, components in order, each in row-major FFT-index order |
//!
//! Reading back reproduces every coefficient bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::field::{FourierField3, ScalarField, SpectralData, SymTensorField3};
use super::grid::Grid3;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WNF1";
const HEADER_LEN: usize = 20;

/// Decoded snapshot contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Samples per axis.
    pub n: usize,
    /// Time tag, if recorded.
    pub time_tag: Option<f64>,
    /// Coefficient arrays.
    pub components: Vec<Vec<Complex64>>,
}

impl Snapshot {
    /// Snapshot of any field.
    pub fn of<T: SpectralData>(f: &T, time_tag: Option<f64>) -> Self {
        Self {
            n: f.grid().n(),
            time_tag,
            components: f.components().to_vec(),
        }
    }

    /// Encode to bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let len = self.n * self.n * self.n;
        let mut out = Vec::with_capacity(HEADER_LEN + 16 * len * self.components.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.components.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.time_tag.unwrap_or(f64::NAN).to_le_bytes());
        for c in &self.components {
            for z in c {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out
    }

    /// Decode from bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Snapshot("missing WNF1 header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let n = u32_at(4) as usize;
        let count = u32_at(8) as usize;
        let tag = f64_at(12);
        let len = n
            .checked_mul(n)
            .and_then(|x| x.checked_mul(n))
            .ok_or_else(|| Error::Snapshot(format!("grid size {n} overflows")))?;
        let expected = HEADER_LEN + 16 * len * count;
        if bytes.len() != expected {
            return Err(Error::Snapshot(format!(
                "expected {expected} bytes for n = {n}, {count} components; found {}",
                bytes.len()
            )));
        }
        let mut components = Vec::with_capacity(count);
        let mut o = HEADER_LEN;
        for _ in 0..count {
            let mut c = Vec::with_capacity(len);
            for _ in 0..len {
                c.push(Complex64::new(f64_at(o), f64_at(o + 8)));
                o += 16;
            }
            components.push(c);
        }
        Ok(Self {
            n,
            time_tag: if tag.is_nan() { None } else { Some(tag) },
            components,
        })
    }

    /// Write atomically (temporary file, then rename).
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp-wnf");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Read a snapshot file.
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    fn grid(&self) -> Result<Grid3> {
        Grid3::new(self.n)
    }

    fn expect_components(&self, c: usize) -> Result<()> {
        if self.components.len() != c {
            return Err(Error::Snapshot(format!(
                "expected {c} components, found {}",
                self.components.len()
            )));
        }
        Ok(())
    }

    /// Interpret as a scalar field.
    pub fn into_scalar(self) -> Result<ScalarField> {
        self.expect_components(1)?;
        let g = self.grid()?;
        Ok(ScalarField::from_coeffs(g, self.components.into_iter().next().expect("one")))
    }

    /// Interpret as a vector field.
    pub fn into_vector(self) -> Result<FourierField3> {
        self.expect_components(3)?;
        let g = self.grid()?;
        let tag = self.time_tag;
        let arr: [Vec<Complex64>; 3] = self.components.try_into().expect("three");
        let mut f = FourierField3::from_coeffs(g, arr);
        f.time_tag = tag;
        Ok(f)
    }

    /// Interpret as a symmetric tensor field (trace-free flag not stored).
    pub fn into_tensor(self) -> Result<SymTensorField3> {
        self.expect_components(6)?;
        let g = self.grid()?;
        let arr: [Vec<Complex64>; 6] = self.components.try_into().expect("six");
        Ok(SymTensorField3::from_coeffs(g, arr, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = Grid3::new(8).unwrap();
        let f = crate::spectral::ops::tests::random_field(g, 11, 4).with_time(0.125);
        let s = Snapshot::of(&f, f.time_tag);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.wnf");
        s.write(&p).unwrap();
        let back = Snapshot::read(&p).unwrap();
        assert_eq!(back.to_bytes(), s.to_bytes());
        let v = back.into_vector().unwrap();
        for c in 0..3 {
            for (a, b) in v.comp(c).iter().zip(f.comp(c)) {
                assert_eq!(a.re.to_bits(), b.re.to_bits());
                assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
        assert_eq!(v.time_tag, Some(0.125));
    }

    #[test]
    fn missing_tag_and_corruption() {
        let g = Grid3::new(8).unwrap();
        let s = Snapshot::of(&ScalarField::zeros(g), None);
        let b = s.to_bytes();
        assert_eq!(Snapshot::from_bytes(&b).unwrap().time_tag, None);
        assert!(Snapshot::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Snapshot::from_bytes(&bad).is_err());
        assert!(Snapshot::from_bytes(&b).unwrap().into_vector().is_err());
    }
}
