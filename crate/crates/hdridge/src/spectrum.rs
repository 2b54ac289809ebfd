//! Block-diagonal population covariance matrices and their spectra.
//!
//! The population matrix is held as an ordered list of dense symmetric
//! blocks, each eigendecomposed on construction. The full p x p matrix is
//! never materialized; everything downstream consumes the blocks or their
//! eigenvalues.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::path::Path;

use crate::{HdError, Result};

/// Eigenvalues at or below this threshold fail positive-definiteness.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;
/// Tolerance on the unit diagonal of imported custom blocks.
pub const UNIT_DIAGONAL_TOL: f64 = 1e-8;

/// Specification of a single covariance block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockSpec {
    /// Toeplitz block with entries `rho^|i-j|`, `rho` in (-1, 1).
    Ar1 { rho: f64, size: usize },
    /// Unit diagonal, constant off-diagonal `rho` in (-1/(size-1), 1).
    Equicorrelated { rho: f64, size: usize },
    /// Arbitrary symmetric block with unit diagonal and positive spectrum.
    CustomDense(DMatrix<f64>),
}

impl BlockSpec {
    pub fn size(&self) -> usize {
        match self {
            BlockSpec::Ar1 { size, .. } => *size,
            BlockSpec::Equicorrelated { size, .. } => *size,
            BlockSpec::CustomDense(m) => m.nrows(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BlockSpec::Ar1 { rho, size } => {
                if *size == 0 {
                    return Err(HdError::DimensionMismatch("empty AR1 block".into()));
                }
                if !(-1.0..1.0).contains(rho) || *rho <= -1.0 {
                    return Err(HdError::InvalidParameter(format!(
                        "AR1 rho = {rho} outside (-1, 1)"
                    )));
                }
                Ok(())
            }
            BlockSpec::Equicorrelated { rho, size } => {
                if *size == 0 {
                    return Err(HdError::DimensionMismatch("empty equicorrelated block".into()));
                }
                let lower = if *size > 1 { -1.0 / (*size as f64 - 1.0) } else { -1.0 };
                if *rho <= lower || *rho >= 1.0 {
                    return Err(HdError::InvalidParameter(format!(
                        "equicorrelated rho = {rho} outside ({lower}, 1)"
                    )));
                }
                Ok(())
            }
            BlockSpec::CustomDense(m) => {
                if m.nrows() == 0 {
                    return Err(HdError::DimensionMismatch("empty custom block".into()));
                }
                if m.nrows() != m.ncols() {
                    return Err(HdError::DimensionMismatch(format!(
                        "custom block is {}x{}, expected square",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                for i in 0..m.nrows() {
                    if (m[(i, i)] - 1.0).abs() > UNIT_DIAGONAL_TOL {
                        return Err(HdError::InvalidParameter(format!(
                            "custom block diagonal entry {i} = {} is not 1",
                            m[(i, i)]
                        )));
                    }
                    for j in 0..i {
                        if (m[(i, j)] - m[(j, i)]).abs() > UNIT_DIAGONAL_TOL {
                            return Err(HdError::InvalidParameter(format!(
                                "custom block is not symmetric at ({i}, {j})"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }

    fn materialize(&self) -> DMatrix<f64> {
        match self {
            BlockSpec::Ar1 { rho, size } => DMatrix::from_fn(*size, *size, |i, j| {
                rho.powi((i as i32 - j as i32).abs())
            }),
            BlockSpec::Equicorrelated { rho, size } => {
                DMatrix::from_fn(*size, *size, |i, j| if i == j { 1.0 } else { *rho })
            }
            BlockSpec::CustomDense(m) => {
                // symmetrize to wash out import round-off
                let mut s = m.clone();
                for i in 0..s.nrows() {
                    for j in 0..i {
                        let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                        s[(i, j)] = v;
                        s[(j, i)] = v;
                    }
                }
                s
            }
        }
    }
}

/// One factorized covariance block.
#[derive(Debug, Clone)]
pub struct CovBlock {
    pub matrix: DMatrix<f64>,
    /// Eigenvalues in descending order.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl CovBlock {
    fn factorize(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        let eig = matrix.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("eigenvalues are finite")
        });
        let eigenvalues = DVector::from_fn(dim, |i, _| eig.eigenvalues[order[i]]);
        let mut eigenvectors = DMatrix::zeros(dim, dim);
        for (dst, &src) in order.iter().enumerate() {
            eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        if let Some(min) = eigenvalues.iter().cloned().reduce(f64::min) {
            if min <= EIGENVALUE_FLOOR {
                return Err(HdError::NonPositiveDefinite(format!(
                    "minimum eigenvalue {min:e} <= {EIGENVALUE_FLOOR:e}"
                )));
            }
        }
        Ok(CovBlock { matrix, eigenvalues, eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Symmetric square root assembled from the eigendecomposition.
    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.eigenvectors[(i, j)] * self.eigenvalues[j].sqrt()
        });
        &scaled * self.eigenvectors.transpose()
    }
}

/// Block-diagonal population covariance with per-block eigendecompositions.
#[derive(Debug, Clone)]
pub struct BlockCovariance {
    blocks: Vec<CovBlock>,
    /// Cumulative offsets: `boundaries[l]` is the first index of block `l`,
    /// with a final entry equal to the total dimension.
    boundaries: Vec<usize>,
    total_dim: usize,
}

impl BlockCovariance {
    fn from_blocks(blocks: Vec<CovBlock>) -> Self {
        let mut boundaries = Vec::with_capacity(blocks.len() + 1);
        let mut offset = 0;
        boundaries.push(0);
        for b in &blocks {
            offset += b.dim();
            boundaries.push(offset);
        }
        BlockCovariance { blocks, boundaries, total_dim: offset }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn blocks(&self) -> &[CovBlock] {
        &self.blocks
    }

    pub fn block(&self, index: usize) -> Result<&CovBlock> {
        self.blocks
            .get(index)
            .ok_or(HdError::IndexOutOfRange { index, k: self.blocks.len() })
    }

    /// Sizes of the blocks in order.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(CovBlock::dim).collect()
    }

    /// Cumulative offsets (length K + 1, starting at 0, ending at p).
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Column range of block `l`.
    pub fn block_range(&self, l: usize) -> std::ops::Range<usize> {
        self.boundaries[l]..self.boundaries[l + 1]
    }

    /// Whether every block is exactly the identity.
    pub fn is_identity(&self) -> bool {
        self.blocks.iter().all(|b| {
            b.matrix.iter().enumerate().all(|(k, &v)| {
                let (i, j) = (k % b.dim(), k / b.dim());
                if i == j { v == 1.0 } else { v == 0.0 }
            })
        })
    }

    /// Multiplies the columns of `x` (one block at a time) by each block's
    /// symmetric square root, producing correlated columns from iid ones.
    pub fn apply_sqrt(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.total_dim {
            return Err(HdError::DimensionMismatch(format!(
                "matrix has {} columns, covariance has dimension {}",
                x.ncols(),
                self.total_dim
            )));
        }
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (l, block) in self.blocks.iter().enumerate() {
            let range = self.block_range(l);
            let sqrt = block.sqrt_matrix();
            let sub = x.columns(range.start, block.dim());
            out.columns_mut(range.start, block.dim()).copy_from(&(&sub * &sqrt));
        }
        Ok(out)
    }
}

/// Builds and factorizes a block covariance from specs.
///
/// Blocks are validated and factorized independently; an error in any block
/// aborts the whole construction.
pub fn build_block_covariance(specs: &[BlockSpec]) -> Result<BlockCovariance> {
    if specs.is_empty() {
        return Err(HdError::DimensionMismatch("at least one block is required".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    let blocks: Vec<Result<CovBlock>> = specs
        .par_iter()
        .map(|spec| CovBlock::factorize(spec.materialize()))
        .collect();
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BlockCovariance::from_blocks(blocks))
}

/// Per-block symmetric square root, returned with the same block layout.
///
/// The result is a derived matrix: it keeps positive-definiteness but not the
/// unit diagonal of a correlation matrix.
pub fn block_sqrt(cov: &BlockCovariance) -> Result<BlockCovariance> {
    let blocks = cov
        .blocks
        .iter()
        .map(|b| CovBlock::factorize(b.sqrt_matrix()))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockCovariance::from_blocks(blocks))
}

/// A discrete spectral law: eigenvalues with uniform weights.
///
/// This is the empirical spectral distribution of one block (or of the pooled
/// matrix), used as the finite-p stand-in for the limiting law wherever the
/// theory integrates against it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLaw {
    eigenvalues: Vec<f64>,
}

impl SpectralLaw {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(HdError::DimensionMismatch("empty spectral law".into()));
        }
        if eigenvalues.iter().any(|&t| t <= 0.0 || !t.is_finite()) {
            return Err(HdError::NonPositiveDefinite("spectral law has nonpositive mass".into()));
        }
        Ok(SpectralLaw { eigenvalues })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Expectation of `f` under the law (equal weights).
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let sum: f64 = self.eigenvalues.iter().map(|&t| f(t)).sum();
        sum / self.eigenvalues.len() as f64
    }
}

/// The spectral law of a single block.
pub fn spectral_law(cov: &BlockCovariance, block_index: usize) -> Result<SpectralLaw> {
    let block = cov.block(block_index)?;
    SpectralLaw::new(block.eigenvalues.iter().cloned().collect())
}

/// The pooled law of the whole matrix: every block eigenvalue is one atom,
/// so blocks enter with weight `p_l / p` automatically.
pub fn pooled_law(cov: &BlockCovariance) -> Result<SpectralLaw> {
    let mut all = Vec::with_capacity(cov.total_dim());
    for b in &cov.blocks {
        all.extend(b.eigenvalues.iter().cloned());
    }
    SpectralLaw::new(all)
}

/// Reads a square numeric matrix (comma-separated, no header) as a custom
/// block spec.
pub fn read_block_csv(path: &Path) -> Result<BlockSpec> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| HdError::CsvImport(e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| HdError::CsvImport(e.to_string()))?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| HdError::CsvImport(format!("bad number {field:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(HdError::CsvImport("empty matrix".into()));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(HdError::CsvImport(format!(
            "matrix is not square: {n} rows, row lengths {:?}",
            rows.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(BlockSpec::CustomDense(m))
}
