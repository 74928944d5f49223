//! Manifold-valued images and their on-disk format.
//!
//! An image is an N x M grid of points on one manifold, stored row-major as
//! a flat coordinate buffer, with an optional per-pixel mask (`true` means
//! the pixel carries data). Masked-out pixels still store coordinates so
//! buffers stay rectangular; only present pixels are validated.
//!
//! The `.mimg` format is self-describing and bit-exact:
//!
//! ```text
//! bytes 0..16   magic "MANIFOLDIMG\0v1\0\0"
//! bytes 16..20  u32 LE, length of the JSON header
//! ...           JSON header: kind, dim, rows, cols, ambient_dim, has_mask
//! ...           rows*cols*ambient_dim f64 coordinates, little-endian,
//!               row-major
//! ...           mask, packed bits LSB-first (present iff has_mask)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, PipelineError};
use crate::manifold::{Manifold, Point};

pub const MIMG_MAGIC: &[u8; 16] = b"MANIFOLDIMG\0v1\0\0";

#[derive(Clone, Debug)]
pub struct ManifoldImage {
    manifold: Manifold,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl ManifoldImage {
    /// Build an image from a flat coordinate buffer, validating the
    /// on-manifold predicate for every present pixel.
    pub fn new(
        manifold: Manifold,
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self, GeometryError> {
        let n = rows * cols;
        if n == 0 {
            return Err(GeometryError::InvalidParameter(
                "image must have at least one pixel".into(),
            ));
        }
        let amb = manifold.ambient_dim();
        if data.len() != n * amb {
            return Err(GeometryError::InvalidParameter(format!(
                "coordinate buffer has {} entries, expected {} ({} pixels x {} coordinates)",
                data.len(),
                n * amb,
                n,
                amb
            )));
        }
        if let Some(m) = &mask {
            if m.len() != n {
                return Err(GeometryError::InvalidParameter(format!(
                    "mask has {} entries, expected {n}",
                    m.len()
                )));
            }
        }
        let img = ManifoldImage {
            manifold,
            rows,
            cols,
            data,
            mask,
        };
        for p in 0..n {
            if img.is_present(p) {
                manifold.check_point(img.pixel(p))?;
            }
        }
        Ok(img)
    }

    /// Constant image with every pixel equal to `value`.
    pub fn constant(manifold: Manifold, rows: usize, cols: usize, value: &Point) -> Self {
        let amb = manifold.ambient_dim();
        let mut data = Vec::with_capacity(rows * cols * amb);
        for _ in 0..rows * cols {
            data.extend_from_slice(value.coords());
        }
        ManifoldImage {
            manifold,
            rows,
            cols,
            data,
            mask: None,
        }
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// Linear index of the pixel in row `i`, column `j` (0-based).
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols);
        i * self.cols + j
    }

    pub fn pixel(&self, idx: usize) -> &[f64] {
        let amb = self.manifold.ambient_dim();
        &self.data[idx * amb..(idx + 1) * amb]
    }

    pub fn pixel_mut(&mut self, idx: usize) -> &mut [f64] {
        let amb = self.manifold.ambient_dim();
        &mut self.data[idx * amb..(idx + 1) * amb]
    }

    pub fn point(&self, idx: usize) -> Point {
        Point::new_unchecked(self.manifold, self.pixel(idx))
    }

    pub fn set_point(&mut self, idx: usize, p: &Point) -> Result<(), GeometryError> {
        if p.manifold() != self.manifold {
            return Err(GeometryError::ManifoldMismatch {
                expected: self.manifold,
                got: p.manifold(),
            });
        }
        self.pixel_mut(idx).copy_from_slice(p.coords());
        Ok(())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn set_mask(&mut self, mask: Option<Vec<bool>>) -> Result<(), GeometryError> {
        if let Some(m) = &mask {
            if m.len() != self.n_pixels() {
                return Err(GeometryError::InvalidParameter(format!(
                    "mask has {} entries, expected {}",
                    m.len(),
                    self.n_pixels()
                )));
            }
        }
        self.mask = mask;
        Ok(())
    }

    /// Whether the pixel carries data (no mask means all pixels do).
    pub fn is_present(&self, idx: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[idx])
    }

    pub fn n_present(&self) -> usize {
        match &self.mask {
            None => self.n_pixels(),
            Some(m) => m.iter().filter(|&&b| b).count(),
        }
    }

    /// Replace this image's coordinates, keeping geometry and mask.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self, GeometryError> {
        ManifoldImage::new(self.manifold, self.rows, self.cols, data, self.mask.clone())
    }

    // ------------------------------------------------------------------
    // .mimg I/O
    // ------------------------------------------------------------------

    pub fn write_mimg<W: Write>(&self, w: &mut W) -> Result<(), PipelineError> {
        let header = MimgHeader {
            kind: self.manifold.kind_str().to_string(),
            dim: self.manifold.dim_param(),
            rows: self.rows,
            cols: self.cols,
            ambient_dim: self.manifold.ambient_dim(),
            has_mask: self.mask.is_some(),
        };
        let hbytes = serde_json::to_vec(&header)?;
        w.write_all(MIMG_MAGIC)?;
        w.write_all(&(hbytes.len() as u32).to_le_bytes())?;
        w.write_all(&hbytes)?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        if let Some(mask) = &self.mask {
            let mut byte = 0u8;
            for (i, &b) in mask.iter().enumerate() {
                if b {
                    byte |= 1 << (i % 8);
                }
                if i % 8 == 7 {
                    w.write_all(&[byte])?;
                    byte = 0;
                }
            }
            if mask.len() % 8 != 0 {
                w.write_all(&[byte])?;
            }
        }
        Ok(())
    }

    pub fn read_mimg<R: Read>(r: &mut R) -> Result<Self, PipelineError> {
        let mut magic = [0u8; 16];
        r.read_exact(&mut magic)?;
        if &magic != MIMG_MAGIC {
            return Err(PipelineError::BadFile("not a .mimg file (bad magic)".into()));
        }
        let mut len4 = [0u8; 4];
        r.read_exact(&mut len4)?;
        let hlen = u32::from_le_bytes(len4) as usize;
        if hlen > 1 << 20 {
            return Err(PipelineError::BadFile(format!(
                "implausible header length {hlen}"
            )));
        }
        let mut hbytes = vec![0u8; hlen];
        r.read_exact(&mut hbytes)?;
        let header: MimgHeader = serde_json::from_slice(&hbytes)?;
        let manifold = Manifold::from_kind_str(&header.kind, header.dim)?;
        if manifold.ambient_dim() != header.ambient_dim {
            return Err(PipelineError::BadFile(format!(
                "header says ambient_dim {} but {} has {}",
                header.ambient_dim,
                header.kind,
                manifold.ambient_dim()
            )));
        }
        let n = header.rows * header.cols;
        let mut data = vec![0.0f64; n * header.ambient_dim];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let mask = if header.has_mask {
            let nbytes = n.div_ceil(8);
            let mut raw = vec![0u8; nbytes];
            r.read_exact(&mut raw)?;
            Some((0..n).map(|i| raw[i / 8] & (1 << (i % 8)) != 0).collect())
        } else {
            None
        };
        Ok(ManifoldImage::new(
            manifold,
            header.rows,
            header.cols,
            data,
            mask,
        )?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_mimg(&mut w)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_mimg(&mut r)
    }
}

#[derive(Serialize, Deserialize)]
struct MimgHeader {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    rows: usize,
    cols: usize,
    ambient_dim: usize,
    has_mask: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_image(m: Manifold, rows: usize, cols: usize, seed: u64) -> ManifoldImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = m.origin();
        let amb = m.ambient_dim();
        let mut data = Vec::with_capacity(rows * cols * amb);
        for _ in 0..rows * cols {
            let v = m.random_tangent_raw(o.coords(), 0.8, &mut rng);
            data.extend_from_slice(&m.exp_raw(o.coords(), &v));
        }
        let mask: Vec<bool> = (0..rows * cols).map(|_| rng.gen_bool(0.8)).collect();
        ManifoldImage::new(m, rows, cols, data, Some(mask)).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        for m in [
            Manifold::euclidean(2).unwrap(),
            Manifold::hyperbolic(2).unwrap(),
            Manifold::spd(3).unwrap(),
            Manifold::GaussianFisher,
        ] {
            let img = sample_image(m, 5, 7, 99);
            let mut bytes = Vec::new();
            img.write_mimg(&mut bytes).unwrap();
            let back = ManifoldImage::read_mimg(&mut bytes.as_slice()).unwrap();
            assert_eq!(back.manifold(), img.manifold());
            assert_eq!(back.rows(), img.rows());
            assert_eq!(back.cols(), img.cols());
            assert_eq!(back.mask(), img.mask());
            // bit-exact coordinate reproduction
            for (a, b) in img.data().iter().zip(back.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let bytes = vec![0u8; 64];
        assert!(matches!(
            ManifoldImage::read_mimg(&mut bytes.as_slice()),
            Err(PipelineError::BadFile(_))
        ));
    }

    #[test]
    fn wrong_buffer_length_rejected() {
        let m = Manifold::euclidean(2).unwrap();
        assert!(ManifoldImage::new(m, 2, 2, vec![0.0; 7], None).is_err());
    }

    #[test]
    fn masked_pixels_skip_validation() {
        let m = Manifold::GaussianFisher;
        // second pixel has sigma = 0: invalid, but masked out
        let data = vec![0.0, 1.0, 0.0, 0.0];
        let img =
            ManifoldImage::new(m, 1, 2, data.clone(), Some(vec![true, false])).unwrap();
        assert_eq!(img.n_present(), 1);
        assert!(ManifoldImage::new(m, 1, 2, data, None).is_err());
    }
}
