//! Principal component analysis used by the temporal concatenation stage.
//!
//! Fitting eigendecomposes the sample covariance (1/(m-1) normalization) and
//! keeps the top-k components. Component signs are canonicalized so that the
//! largest-magnitude coordinate of each component is positive, which makes a
//! refit on identical data reproduce identical bits.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

use crate::store::{read_exact_ctx, read_f32_vec_ctx, read_u32_ctx};

pub const VPCA_MAGIC: [u8; 4] = *b"VPCA";
pub const VPCA_VERSION: u32 = 1;

// Eigenvalues below this fraction of the largest are treated as numerically
// zero when deciding the achievable rank.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("need at least k={k} samples, got m={m}")]
    TooFewSamples { m: usize, k: usize },
    #[error("requested k={k} exceeds input dim {dim}")]
    KExceedsDim { k: usize, dim: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("covariance rank {achievable} is below requested k={requested}")]
    RankDeficient { achievable: usize, requested: usize },
    #[error("input has dim {found}, model expects {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("components are not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("explained variance must be non-negative and non-increasing")]
    BadVariance,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Format(crate::store::StoreError),
}

/// A fitted PCA basis: `components` is k x D with orthonormal rows, applied
/// as `components * (x - mean)`. Kept in f64 internally; the VPCA file stores
/// f32 like every other payload in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Array1<f64>,
    components: Array2<f64>,
    explained_variance: Array1<f64>,
}

impl PcaModel {
    /// Assemble a model from raw parts, validating orthonormality and the
    /// variance ordering.
    pub fn from_parts(
        mean: Array1<f64>,
        components: Array2<f64>,
        explained_variance: Array1<f64>,
    ) -> Result<Self, PcaError> {
        let (k, d) = components.dim();
        if k == 0 {
            return Err(PcaError::ZeroK);
        }
        if k > d {
            return Err(PcaError::KExceedsDim { k, dim: d });
        }
        if mean.len() != d || explained_variance.len() != k {
            return Err(PcaError::DimMismatch {
                expected: d,
                found: mean.len(),
            });
        }
        let gram = components.dot(&components.t());
        let mut deviation = 0f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((gram[[i, j]] - target).abs());
            }
        }
        if deviation > 1e-5 {
            return Err(PcaError::NotOrthonormal { deviation });
        }
        for i in 0..k {
            let v = explained_variance[i];
            if v < 0.0 || !v.is_finite() || (i > 0 && v > explained_variance[i - 1]) {
                return Err(PcaError::BadVariance);
            }
        }
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    pub fn components(&self) -> ArrayView2<'_, f64> {
        self.components.view()
    }

    pub fn explained_variance(&self) -> ArrayView1<'_, f64> {
        self.explained_variance.view()
    }

    /// `components * (x - mean)` for a single vector.
    pub fn transform(&self, x: ArrayView1<'_, f32>) -> Result<Array1<f32>, PcaError> {
        if x.len() != self.input_dim() {
            return Err(PcaError::DimMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let centered = Array1::from_iter(x.iter().zip(self.mean.iter()).map(|(&v, &m)| v as f64 - m));
        let y = self.components.dot(&centered);
        Ok(y.mapv(|v| v as f32))
    }

    /// Transform each row of `rows`; returns an `n x k` matrix.
    pub fn transform_rows(&self, rows: ArrayView2<'_, f32>) -> Result<Array2<f32>, PcaError> {
        if rows.ncols() != self.input_dim() {
            return Err(PcaError::DimMismatch {
                expected: self.input_dim(),
                found: rows.ncols(),
            });
        }
        let mut centered = rows.mapv(|v| v as f64);
        for mut row in centered.rows_mut() {
            row -= &self.mean;
        }
        let y = centered.dot(&self.components.t());
        Ok(y.mapv(|v| v as f32))
    }

    /// `components^T * y + mean`, the least-squares reconstruction.
    pub fn reconstruct(&self, y: ArrayView1<'_, f32>) -> Result<Array1<f32>, PcaError> {
        if y.len() != self.output_dim() {
            return Err(PcaError::DimMismatch {
                expected: self.output_dim(),
                found: y.len(),
            });
        }
        let y64 = Array1::from_iter(y.iter().map(|&v| v as f64));
        let x = self.components.t().dot(&y64) + &self.mean;
        Ok(x.mapv(|v| v as f32))
    }
}

/// Fit a k-component PCA on an `m x D` sample matrix.
pub fn pca_fit(samples: ArrayView2<'_, f32>, k: usize) -> Result<PcaModel, PcaError> {
    let (m, d) = samples.dim();
    if k == 0 {
        return Err(PcaError::ZeroK);
    }
    if k > d {
        return Err(PcaError::KExceedsDim { k, dim: d });
    }
    if m < k {
        return Err(PcaError::TooFewSamples { m, k });
    }

    let x = samples.mapv(|v| v as f64);
    let mean = x.mean_axis(ndarray::Axis(0)).expect("m >= 1");
    let mut centered = x;
    for mut row in centered.rows_mut() {
        row -= &mean;
    }
    let denom = if m > 1 { (m - 1) as f64 } else { 1.0 };
    let cov = centered.t().dot(&centered) / denom;

    let cov_na = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]);
    let eig = SymmetricEigen::new(cov_na);

    // Order eigenpairs by descending eigenvalue; ties keep the solver's
    // native order so refits stay bit-identical.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .take_while(|&&i| eig.eigenvalues[i] > top * RANK_TOLERANCE && eig.eigenvalues[i] > 0.0)
        .count();
    if rank < k {
        return Err(PcaError::RankDeficient {
            achievable: rank,
            requested: k,
        });
    }

    let mut components = Array2::zeros((k, d));
    let mut explained = Array1::zeros(k);
    for (row, &src) in order[..k].iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        // Flip so the largest-magnitude coordinate is positive; first index
        // wins ties.
        let mut pivot = 0;
        for i in 1..d {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[[row, i]] = sign * col[i];
        }
        explained[row] = eig.eigenvalues[src].max(0.0);
    }

    PcaModel::from_parts(mean, components, explained)
}

pub fn write_pca(model: &PcaModel, path: &Path) -> Result<(), PcaError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_pca_to(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_pca_to<W: Write>(model: &PcaModel, w: &mut W) -> Result<(), PcaError> {
    w.write_all(&VPCA_MAGIC)?;
    w.write_u32::<LittleEndian>(VPCA_VERSION)?;
    w.write_u32::<LittleEndian>(model.input_dim() as u32)?;
    w.write_u32::<LittleEndian>(model.output_dim() as u32)?;
    for &v in model.mean.iter() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    for &v in model.components.iter() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    for &v in model.explained_variance.iter() {
        w.write_f32::<LittleEndian>(v as f32)?;
    }
    Ok(())
}

pub fn read_pca(path: &Path) -> Result<PcaModel, PcaError> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    read_pca_from(&mut r)
}

pub fn read_pca_from<R: Read>(r: &mut R) -> Result<PcaModel, PcaError> {
    let mut magic = [0u8; 4];
    read_exact_ctx(r, &mut magic, "magic").map_err(PcaError::Format)?;
    if magic != VPCA_MAGIC {
        return Err(PcaError::Format(crate::store::StoreError::BadMagic {
            expected: VPCA_MAGIC,
            found: magic,
        }));
    }
    let version = read_u32_ctx(r, "version").map_err(PcaError::Format)?;
    if version != VPCA_VERSION {
        return Err(PcaError::Format(crate::store::StoreError::VersionMismatch {
            expected: VPCA_VERSION,
            found: version,
        }));
    }
    let d = read_u32_ctx(r, "input dim").map_err(PcaError::Format)? as usize;
    let k = read_u32_ctx(r, "output dim").map_err(PcaError::Format)? as usize;
    let mean = read_f32_vec_ctx(r, d, "mean").map_err(PcaError::Format)?;
    let comps = read_f32_vec_ctx(r, k * d, "components").map_err(PcaError::Format)?;
    let ev = read_f32_vec_ctx(r, k, "explained variance").map_err(PcaError::Format)?;
    PcaModel::from_parts(
        Array1::from_iter(mean.into_iter().map(f64::from)),
        Array2::from_shape_vec((k, d), comps.into_iter().map(f64::from).collect())
            .expect("shape matches the vector length by construction"),
        Array1::from_iter(ev.into_iter().map(f64::from)),
    )
}
