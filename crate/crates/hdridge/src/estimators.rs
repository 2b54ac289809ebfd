//! Coefficient estimators: marginal, ridge, block-wise ridge with three
//! covariance sources, the non-block reference ridges, and block-wise local
//! principal component (PC) estimators.
//!
//! All estimators are pure functions of cohorts and the penalty. Ridge
//! solves go through symmetric positive-definite factorizations; when the
//! sample count is below the group dimension, the whole-matrix ridge uses
//! the algebraically identical n x n dual system.

use nalgebra::{Cholesky, DMatrix, DVector};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::datagen::Cohort;
use crate::{HdError, Result};

/// Relative threshold below which a squared singular value counts as zero.
const RANK_TOL: f64 = 1e-12;

/// Estimator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// `n^-1 X^T y`, no covariance adjustment.
    Marginal,
    /// Whole-matrix ridge on the training covariance.
    Ridge,
    /// Per-group ridge on the training covariance.
    BlockRidge,
    /// Whole-matrix ridge with the covariance from a reference cohort.
    RefRidge,
    /// Per-group ridge with the covariance from a reference cohort.
    BlockRefRidge,
    /// Marginal estimator in per-block PC space.
    BlpcMarginal,
    /// Per-block ridge in PC space.
    BlpcBlockRidge,
}

impl EstimatorKind {
    pub fn is_pc_space(self) -> bool {
        matches!(self, EstimatorKind::BlpcMarginal | EstimatorKind::BlpcBlockRidge)
    }
}

/// Which cohort supplies the covariance for reference estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovSource {
    TrainX,
    PanelW,
    TestZ,
}

/// Where the summary statistic `X^T y` gets its sample-count normalization
/// in reference estimators. The choice rescales coefficients by a constant
/// and leaves out-of-sample accuracy unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XtyNorm {
    /// Divide by the reference panel's sample count (the estimator
    /// definitions place the panel count in front of both terms).
    Panel,
    /// Divide by the training sample count.
    Training { n: usize },
}

/// A contiguous partition of the columns into groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    sizes: Vec<usize>,
}

impl Grouping {
    pub fn new(sizes: Vec<usize>, p: usize) -> Result<Self> {
        if sizes.is_empty() || sizes.iter().any(|&s| s == 0) {
            return Err(HdError::BadGrouping("groups must be nonempty".into()));
        }
        let total: usize = sizes.iter().sum();
        if total != p {
            return Err(HdError::BadGrouping(format!(
                "group sizes sum to {total}, expected {p}"
            )));
        }
        Ok(Grouping { sizes })
    }

    /// One group covering all columns.
    pub fn single(p: usize) -> Self {
        Grouping { sizes: vec![p] }
    }

    /// Groups matching a cohort's block boundaries.
    pub fn from_boundaries(boundaries: &[usize]) -> Result<Self> {
        let p = boundaries.iter().sum();
        Grouping::new(boundaries.to_vec(), p)
    }

    /// Merges consecutive blocks into `target` coarser groups of nearly
    /// equal block counts (the chromosome-wise option).
    pub fn merge_blocks(boundaries: &[usize], target: usize) -> Result<Self> {
        if target == 0 || target > boundaries.len() {
            return Err(HdError::BadGrouping(format!(
                "cannot merge {} blocks into {target} groups",
                boundaries.len()
            )));
        }
        let k = boundaries.len();
        let base = k / target;
        let extra = k % target;
        let mut sizes = Vec::with_capacity(target);
        let mut idx = 0;
        for g in 0..target {
            let count = base + usize::from(g < extra);
            let size: usize = boundaries[idx..idx + count].iter().sum();
            sizes.push(size);
            idx += count;
        }
        let p = boundaries.iter().sum();
        Grouping::new(sizes, p)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Column ranges of the groups, in order.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.sizes.len());
        let mut offset = 0;
        for &s in &self.sizes {
            out.push(offset..offset + s);
            offset += s;
        }
        out
    }
}

/// Per-block right singular vectors retained for PC-space estimators.
#[derive(Debug, Clone)]
pub struct BlpcBlock {
    /// `p_l x q_l` retained right singular vectors, descending singular value.
    pub vectors: DMatrix<f64>,
    /// Retained singular values of the unnormalized block `X_l`.
    pub singular_values: DVector<f64>,
    /// Share of the block's total squared singular values retained.
    pub variance_explained: f64,
}

/// A per-block PC basis fit on one training cohort.
#[derive(Debug, Clone)]
pub struct BlpcBasis {
    pub blocks: Vec<BlpcBlock>,
    /// Group sizes (in variant space) that the basis was fit on.
    pub group_sizes: Vec<usize>,
    /// Training sample count the scores came from.
    pub n: usize,
}

impl BlpcBasis {
    /// Total retained PC count `q`.
    pub fn total_components(&self) -> usize {
        self.blocks.iter().map(|b| b.vectors.ncols()).sum()
    }

    pub fn p(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    /// Applies the block-diagonal projection: `out = M V` for a matrix with
    /// p columns, producing one with q columns.
    pub fn project_columns(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.ncols() != self.p() {
            return Err(HdError::DimensionMismatch(format!(
                "matrix has {} columns, basis expects {}",
                m.ncols(),
                self.p()
            )));
        }
        let q = self.total_components();
        let mut out = DMatrix::zeros(m.nrows(), q);
        let mut col_in = 0;
        let mut col_out = 0;
        for (blk, &size) in self.blocks.iter().zip(&self.group_sizes) {
            let ql = blk.vectors.ncols();
            let sub = m.columns(col_in, size);
            out.columns_mut(col_out, ql).copy_from(&(&sub * &blk.vectors));
            col_in += size;
            col_out += ql;
        }
        Ok(out)
    }

    /// Applies the transposed projection to a length-p vector: `V^T v`.
    pub fn project_vector(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.p() {
            return Err(HdError::DimensionMismatch(format!(
                "vector has length {}, basis expects {}",
                v.len(),
                self.p()
            )));
        }
        let q = self.total_components();
        let mut out = DVector::zeros(q);
        let mut row_in = 0;
        let mut row_out = 0;
        for (blk, &size) in self.blocks.iter().zip(&self.group_sizes) {
            let ql = blk.vectors.ncols();
            let sub = v.rows(row_in, size);
            out.rows_mut(row_out, ql).copy_from(&(blk.vectors.transpose() * sub));
            row_in += size;
            row_out += ql;
        }
        Ok(out)
    }

    /// Squared singular values concatenated across blocks (the diagonal of
    /// the PC-score Gram `V^T X^T X V`).
    pub fn squared_singular_values(&self) -> DVector<f64> {
        let q = self.total_components();
        let mut out = DVector::zeros(q);
        let mut k = 0;
        for blk in &self.blocks {
            for &d in blk.singular_values.iter() {
                out[k] = d * d;
                k += 1;
            }
        }
        out
    }
}

/// Coefficients plus the projection needed to predict with them.
#[derive(Debug, Clone)]
pub struct EstimatorOutput {
    /// Length p (variant space) or q (PC space).
    pub coefficients: DVector<f64>,
    /// PC basis for PC-space estimators; `None` in variant space.
    pub projection: Option<Arc<BlpcBasis>>,
    pub kind: EstimatorKind,
    pub lambda: f64,
}

impl EstimatorOutput {
    /// Out-of-sample prediction `Z beta` or `Z V eta`.
    pub fn predict(&self, z: &Cohort) -> Result<DVector<f64>> {
        match &self.projection {
            None => {
                if z.p() != self.coefficients.len() {
                    return Err(HdError::DimensionMismatch(format!(
                        "testing cohort has p = {}, coefficients have length {}",
                        z.p(),
                        self.coefficients.len()
                    )));
                }
                Ok(&z.design * &self.coefficients)
            }
            Some(basis) => {
                let scores = basis.project_columns(&z.design)?;
                Ok(&scores * &self.coefficients)
            }
        }
    }

    /// Writes coefficients as CSV with columns (index, value, space).
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "index,value,space")?;
        let space = if self.projection.is_some() { "pc" } else { "variant" };
        for (i, v) in self.coefficients.iter().enumerate() {
            writeln!(file, "{i},{v},{space}")?;
        }
        Ok(())
    }
}

fn check_xy(x: &Cohort, y: &DVector<f64>) -> Result<()> {
    if x.n != y.len() {
        return Err(HdError::DimensionMismatch(format!(
            "cohort has n = {}, trait has length {}",
            x.n,
            y.len()
        )));
    }
    Ok(())
}

/// Marginal summary statistics `n^-1 X^T y`.
pub fn marginal(x: &Cohort, y: &DVector<f64>) -> Result<EstimatorOutput> {
    check_xy(x, y)?;
    let coefficients = x.design.transpose() * y / x.n as f64;
    Ok(EstimatorOutput {
        coefficients,
        projection: None,
        kind: EstimatorKind::Marginal,
        lambda: 0.0,
    })
}

/// Solves `(D^T D / n_norm + lambda I) b = rhs`, using the n x n dual system
/// when the group is wider than the sample count.
fn ridge_solve_group(
    design: &DMatrix<f64>,
    rhs: &DVector<f64>,
    n_norm: f64,
    lambda: f64,
) -> Result<DVector<f64>> {
    let n = design.nrows();
    let p = design.ncols();
    if n < p {
        // Woodbury: (D^T D/n + lambda I)^-1 rhs
        //   = (rhs - D^T (DD^T/n + lambda I)^-1 D rhs / n) / lambda
        let gram_dual =
            design * design.transpose() / n_norm + DMatrix::identity(n, n) * lambda;
        let chol = Cholesky::new(gram_dual)
            .ok_or_else(|| HdError::SolveFailure("dual Gram not positive definite".into()))?;
        let u = chol.solve(&(design * rhs / n_norm));
        Ok((rhs - design.transpose() * u) / lambda)
    } else {
        let gram = design.transpose() * design / n_norm + DMatrix::identity(p, p) * lambda;
        let chol = Cholesky::new(gram)
            .ok_or_else(|| HdError::SolveFailure("primal Gram not positive definite".into()))?;
        Ok(chol.solve(rhs))
    }
}

/// Solves directly against a provided Gram matrix; the dense oracle for the
/// grouped solvers and the homogeneity property.
pub fn ridge_solve_from_gram(
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    let p = gram.nrows();
    let system = gram + DMatrix::identity(p, p) * lambda;
    let chol = Cholesky::new(system)
        .ok_or_else(|| HdError::SolveFailure("regularized Gram not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

fn require_positive_lambda(lambda: f64) -> Result<()> {
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(HdError::InvalidParameter(format!(
            "ridge penalty must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Whole-matrix ridge `n^-1 (Sigma_hat + lambda I)^-1 X^T y`.
pub fn ridge(x: &Cohort, y: &DVector<f64>, lambda: f64) -> Result<EstimatorOutput> {
    check_xy(x, y)?;
    require_positive_lambda(lambda)?;
    let n = x.n as f64;
    let rhs = x.design.transpose() * y / n;
    let coefficients = ridge_solve_group(&x.design, &rhs, n, lambda)?;
    Ok(EstimatorOutput { coefficients, projection: None, kind: EstimatorKind::Ridge, lambda })
}

/// Block-wise ridge: per-group solves on the training covariance.
pub fn block_ridge(
    x: &Cohort,
    y: &DVector<f64>,
    lambda: f64,
    grouping: &Grouping,
) -> Result<EstimatorOutput> {
    check_xy(x, y)?;
    require_positive_lambda(lambda)?;
    if grouping.total() != x.p() {
        return Err(HdError::BadGrouping(format!(
            "grouping covers {} columns, cohort has {}",
            grouping.total(),
            x.p()
        )));
    }
    let n = x.n as f64;
    let mut coefficients = DVector::zeros(x.p());
    for range in grouping.ranges() {
        let sub = x.design.columns(range.start, range.len()).into_owned();
        let rhs = sub.transpose() * y / n;
        let b = ridge_solve_group(&sub, &rhs, n, lambda)?;
        coefficients.rows_mut(range.start, range.len()).copy_from(&b);
    }
    Ok(EstimatorOutput { coefficients, projection: None, kind: EstimatorKind::BlockRidge, lambda })
}

/// Block-wise ridge with the covariance estimated from a reference cohort.
///
/// `xty` is the unnormalized `X^T y`; the normalization is applied inside
/// according to `norm` (panel count by default, matching the estimator
/// definitions that place the panel's sample count in front of both terms).
pub fn block_ref_ridge(
    xty: &DVector<f64>,
    reference: &Cohort,
    lambda: f64,
    grouping: &Grouping,
    norm: XtyNorm,
) -> Result<EstimatorOutput> {
    require_positive_lambda(lambda)?;
    if xty.len() != reference.p() {
        return Err(HdError::DimensionMismatch(format!(
            "summary statistic has length {}, reference has p = {}",
            xty.len(),
            reference.p()
        )));
    }
    if grouping.total() != reference.p() {
        return Err(HdError::BadGrouping(format!(
            "grouping covers {} columns, reference has {}",
            grouping.total(),
            reference.p()
        )));
    }
    let n_ref = reference.n as f64;
    let n_rhs = match norm {
        XtyNorm::Panel => n_ref,
        XtyNorm::Training { n } => n as f64,
    };
    let mut coefficients = DVector::zeros(reference.p());
    for range in grouping.ranges() {
        let sub = reference.design.columns(range.start, range.len()).into_owned();
        let rhs = xty.rows(range.start, range.len()) / n_rhs;
        let b = ridge_solve_group(&sub, &rhs.into_owned(), n_ref, lambda)?;
        coefficients.rows_mut(range.start, range.len()).copy_from(&b);
    }
    Ok(EstimatorOutput {
        coefficients,
        projection: None,
        kind: EstimatorKind::BlockRefRidge,
        lambda,
    })
}

/// Non-block reference ridge: one group over all variants.
pub fn ref_ridge(
    xty: &DVector<f64>,
    reference: &Cohort,
    lambda: f64,
    norm: XtyNorm,
) -> Result<EstimatorOutput> {
    let out = block_ref_ridge(xty, reference, lambda, &Grouping::single(reference.p()), norm)?;
    Ok(EstimatorOutput { kind: EstimatorKind::RefRidge, ..out })
}

/// How many PCs to keep per group.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisSelection {
    /// Keep the smallest count whose cumulative squared singular values
    /// reach `tau` times the group total. Ties keep the earlier index.
    VarianceThreshold(f64),
    /// Keep exactly `q_l` components per group.
    FixedCount(Vec<usize>),
}

/// Fits per-group thin SVDs of the training design and retains the leading
/// right singular vectors.
pub fn fit_blpc_basis(
    x: &Cohort,
    grouping: &Grouping,
    selection: &BasisSelection,
) -> Result<BlpcBasis> {
    if grouping.total() != x.p() {
        return Err(HdError::BadGrouping(format!(
            "grouping covers {} columns, cohort has {}",
            grouping.total(),
            x.p()
        )));
    }
    if let BasisSelection::VarianceThreshold(tau) = selection {
        if !(*tau > 0.0 && *tau <= 1.0) {
            return Err(HdError::InvalidParameter(format!(
                "variance threshold tau = {tau} outside (0, 1]"
            )));
        }
    }
    if let BasisSelection::FixedCount(counts) = selection {
        if counts.len() != grouping.num_groups() {
            return Err(HdError::DimensionMismatch(format!(
                "fixed counts has length {}, grouping has {} groups",
                counts.len(),
                grouping.num_groups()
            )));
        }
    }
    let ranges = grouping.ranges();
    let mut blocks = Vec::with_capacity(ranges.len());
    for (g, range) in ranges.iter().enumerate() {
        let sub = x.design.columns(range.start, range.len()).into_owned();
        let (vectors, sq_singular) = thin_right_singular(&sub)?;
        let total: f64 = sq_singular.iter().sum();
        let rank = sq_singular.len();
        let keep = match selection {
            BasisSelection::VarianceThreshold(tau) => {
                let mut cum = 0.0;
                let mut q = rank;
                for (i, &d2) in sq_singular.iter().enumerate() {
                    cum += d2;
                    if cum >= tau * total - 1e-12 * total {
                        q = i + 1;
                        break;
                    }
                }
                q
            }
            BasisSelection::FixedCount(counts) => {
                let q = counts[g];
                if q == 0 {
                    return Err(HdError::InvalidParameter(format!(
                        "group {g}: at least one component must be kept"
                    )));
                }
                if q > rank {
                    return Err(HdError::RankDeficient(format!(
                        "group {g} has rank {rank}, requested {q} components"
                    )));
                }
                q
            }
        };
        let explained: f64 = sq_singular.iter().take(keep).sum::<f64>() / total;
        blocks.push(BlpcBlock {
            vectors: vectors.columns(0, keep).into_owned(),
            singular_values: DVector::from_fn(keep, |i, _| sq_singular[i].sqrt()),
            variance_explained: explained,
        });
    }
    Ok(BlpcBasis { blocks, group_sizes: grouping.sizes().to_vec(), n: x.n })
}

/// Right singular vectors and squared singular values (descending) of a
/// group design, via the eigendecomposition of the smaller Gram matrix.
/// Numerically zero directions are dropped.
fn thin_right_singular(design: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = design.nrows();
    let p = design.ncols();
    if p <= n {
        let gram = design.transpose() * design;
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let max = eig.eigenvalues[order[0]].max(0.0);
        if max <= 0.0 {
            return Err(HdError::RankDeficient("group design is identically zero".into()));
        }
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i] > RANK_TOL * max)
            .collect();
        let mut vectors = DMatrix::zeros(p, kept.len());
        let mut values = Vec::with_capacity(kept.len());
        for (dst, &src) in kept.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
            values.push(eig.eigenvalues[src]);
        }
        Ok((vectors, values))
    } else {
        // wide group: eigendecompose the n x n outer Gram and map back
        let outer = design * design.transpose();
        let eig = outer.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let max = eig.eigenvalues[order[0]].max(0.0);
        if max <= 0.0 {
            return Err(HdError::RankDeficient("group design is identically zero".into()));
        }
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i] > RANK_TOL * max)
            .collect();
        let mut vectors = DMatrix::zeros(p, kept.len());
        let mut values = Vec::with_capacity(kept.len());
        for (dst, &src) in kept.iter().enumerate() {
            let d2 = eig.eigenvalues[src];
            let u = eig.eigenvectors.column(src);
            let v = design.transpose() * u / d2.sqrt();
            vectors.set_column(dst, &v);
            values.push(d2);
        }
        Ok((vectors, values))
    }
}

/// PC-space marginal estimator `n^-1 V^T X^T y`.
pub fn blpc_marginal(
    x: &Cohort,
    y: &DVector<f64>,
    basis: &Arc<BlpcBasis>,
) -> Result<EstimatorOutput> {
    check_xy(x, y)?;
    let xty = x.design.transpose() * y;
    let coefficients = basis.project_vector(&xty)? / x.n as f64;
    Ok(EstimatorOutput {
        coefficients,
        projection: Some(Arc::clone(basis)),
        kind: EstimatorKind::BlpcMarginal,
        lambda: 0.0,
    })
}

/// PC-space block ridge `n^-1 R(lambda) V^T X^T y`; the PC-score Gram is
/// diagonal with the squared singular values, so each coefficient is the
/// projected summary statistic shrunk by `d_i^2 + lambda`.
pub fn blpc_block_ridge(
    x: &Cohort,
    y: &DVector<f64>,
    basis: &Arc<BlpcBasis>,
    lambda: f64,
) -> Result<EstimatorOutput> {
    check_xy(x, y)?;
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(HdError::InvalidParameter(format!(
            "PC ridge penalty must be nonnegative, got {lambda}"
        )));
    }
    let xty = x.design.transpose() * y;
    let projected = basis.project_vector(&xty)?;
    let d2 = basis.squared_singular_values();
    let n = x.n as f64;
    let mut coefficients = DVector::zeros(projected.len());
    for i in 0..projected.len() {
        let denom = d2[i] + lambda;
        if denom <= 0.0 {
            return Err(HdError::SolveFailure(format!(
                "retained singular value underflow at component {i} with lambda = {lambda}"
            )));
        }
        coefficients[i] = projected[i] / denom / n;
    }
    Ok(EstimatorOutput {
        coefficients,
        projection: Some(Arc::clone(basis)),
        kind: EstimatorKind::BlpcBlockRidge,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_design, stream_rng, CohortRole, DesignMode, StreamKind};
    use crate::spectrum::{build_block_covariance, BlockSpec};
    use approx::assert_relative_eq;
    use rand_distr::Distribution;

    fn cohort(n: usize, specs: &[BlockSpec], seed: u64) -> Cohort {
        let cov = build_block_covariance(specs).unwrap();
        let mut rng = stream_rng(seed, 0, StreamKind::Design(CohortRole::Training));
        gen_design(n, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng, "t".into())
            .unwrap()
    }

    fn random_y(n: usize, seed: u64) -> DVector<f64> {
        let mut rng = stream_rng(seed, 0, StreamKind::Noise(CohortRole::Training));
        DVector::from_fn(n, |_, _| rand_distr::StandardNormal.sample(&mut rng))
    }

    #[test]
    fn marginal_matches_double_loop() {
        let x = cohort(40, &[BlockSpec::Ar1 { rho: 0.4, size: 12 }], 1);
        let y = random_y(40, 2);
        let out = marginal(&x, &y).unwrap();
        for j in 0..x.p() {
            let mut acc = 0.0;
            for i in 0..x.n {
                acc += x.design[(i, j)] * y[i];
            }
            assert_relative_eq!(out.coefficients[j], acc / x.n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn marginal_zero_y() {
        let x = cohort(20, &[BlockSpec::Ar1 { rho: 0.0, size: 5 }], 3);
        let out = marginal(&x, &DVector::zeros(20)).unwrap();
        assert!(out.coefficients.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ridge_orthonormal_design_shrinkage() {
        // X^T X = n I implies coefficients = X^T y / (n (1 + lambda))
        let n = 6;
        let mut design = DMatrix::zeros(n, n);
        for i in 0..n {
            design[(i, i)] = (n as f64).sqrt();
        }
        let x = Cohort {
            design,
            role: CohortRole::Training,
            boundaries: vec![n],
            n,
            seed_tag: "manual".into(),
        };
        let y = DVector::from_fn(n, |i, _| (i + 1) as f64);
        let lambda = 0.7;
        let out = ridge(&x, &y, lambda).unwrap();
        let expect = x.design.transpose() * &y / (n as f64 * (1.0 + lambda));
        for j in 0..n {
            assert_relative_eq!(out.coefficients[j], expect[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn ridge_large_lambda_norm_bound() {
        let x = cohort(30, &[BlockSpec::Ar1 { rho: 0.3, size: 10 }], 4);
        let y = random_y(30, 5);
        let lambda = 1e6;
        let out = ridge(&x, &y, lambda).unwrap();
        let bound = (x.design.transpose() * &y).norm() / (x.n as f64 * lambda);
        assert!(out.coefficients.norm() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn primal_and_dual_routes_agree() {
        // n = 50 < p = 80 takes the dual; compare with an explicit primal solve
        let x = cohort(50, &[BlockSpec::Ar1 { rho: 0.5, size: 80 }], 6);
        let y = random_y(50, 7);
        let lambda = 0.3;
        let out = ridge(&x, &y, lambda).unwrap();
        let n = x.n as f64;
        let gram = x.design.transpose() * &x.design / n;
        let rhs = x.design.transpose() * &y / n;
        let primal = ridge_solve_from_gram(&gram, &rhs, lambda).unwrap();
        assert!((out.coefficients - primal).norm() < 1e-9);
    }

    #[test]
    fn block_ridge_single_group_equals_ridge() {
        let x = cohort(60, &[BlockSpec::Ar1 { rho: 0.5, size: 30 }], 8);
        let y = random_y(60, 9);
        let lambda = 0.5;
        let full = ridge(&x, &y, lambda).unwrap();
        let single = block_ridge(&x, &y, lambda, &Grouping::single(30)).unwrap();
        assert!((full.coefficients - single.coefficients).norm() < 1e-10);
    }

    #[test]
    fn block_ridge_singleton_groups() {
        let x = cohort(100, &[BlockSpec::Ar1 { rho: 0.0, size: 6 }], 10);
        let y = random_y(100, 11);
        let lambda = 0.4;
        let grouping = Grouping::new(vec![1; 6], 6).unwrap();
        let out = block_ridge(&x, &y, lambda, &grouping).unwrap();
        let n = x.n as f64;
        for j in 0..6 {
            let col = x.design.column(j);
            let sjj = col.dot(&col) / n;
            let expect = col.dot(&y) / n / (sjj + lambda);
            assert_relative_eq!(out.coefficients[j], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn block_ridge_matches_dense_block_oracle() {
        let specs =
            [BlockSpec::Ar1 { rho: 0.6, size: 15 }, BlockSpec::Ar1 { rho: 0.2, size: 10 }];
        let x = cohort(80, &specs, 12);
        let y = random_y(80, 13);
        let lambda = 0.25;
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let out = block_ridge(&x, &y, lambda, &grouping).unwrap();
        // dense oracle: assemble the block-diagonal Gram explicitly
        let n = x.n as f64;
        let p = x.p();
        let gram_full = x.design.transpose() * &x.design / n;
        let mut gram_block = DMatrix::zeros(p, p);
        for range in grouping.ranges() {
            for i in range.clone() {
                for j in range.clone() {
                    gram_block[(i, j)] = gram_full[(i, j)];
                }
            }
        }
        let rhs = x.design.transpose() * &y / n;
        let oracle = ridge_solve_from_gram(&gram_block, &rhs, lambda).unwrap();
        assert!((out.coefficients - oracle).norm() < 1e-10);
    }

    #[test]
    fn ref_ridge_with_training_cohort_equals_ridge() {
        let x = cohort(70, &[BlockSpec::Ar1 { rho: 0.5, size: 20 }], 14);
        let y = random_y(70, 15);
        let lambda = 0.6;
        let plain = ridge(&x, &y, lambda).unwrap();
        let xty = x.design.transpose() * &y;
        let viaref = ref_ridge(&xty, &x, lambda, XtyNorm::Panel).unwrap();
        assert!((plain.coefficients - viaref.coefficients).norm() < 1e-10);
    }

    #[test]
    fn xty_norm_switch_rescales_only() {
        let x = cohort(50, &[BlockSpec::Ar1 { rho: 0.5, size: 20 }], 16);
        let w = {
            let cov = build_block_covariance(&[BlockSpec::Ar1 { rho: 0.5, size: 20 }]).unwrap();
            let mut rng = stream_rng(17, 0, StreamKind::Design(CohortRole::Panel));
            gen_design(80, &cov, DesignMode::GaussianLatent, CohortRole::Panel, &mut rng,
                       "w".into())
                .unwrap()
        };
        let y = random_y(50, 18);
        let xty = x.design.transpose() * &y;
        let grouping = Grouping::single(20);
        let a = block_ref_ridge(&xty, &w, 0.5, &grouping, XtyNorm::Panel).unwrap();
        let b = block_ref_ridge(&xty, &w, 0.5, &grouping, XtyNorm::Training { n: x.n }).unwrap();
        // same direction, scale ratio n_train / n_panel
        let expect = x.n as f64 / w.n as f64;
        for j in 0..20 {
            assert_relative_eq!(a.coefficients[j] / b.coefficients[j], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn linearity_in_y() {
        let x = cohort(40, &[BlockSpec::Ar1 { rho: 0.4, size: 25 }], 19);
        let y1 = random_y(40, 20);
        let y2 = random_y(40, 21);
        let lambda = 0.8;
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let sum = block_ridge(&x, &(&y1 + &y2), lambda, &grouping).unwrap();
        let a = block_ridge(&x, &y1, lambda, &grouping).unwrap();
        let b = block_ridge(&x, &y2, lambda, &grouping).unwrap();
        assert!((sum.coefficients - (a.coefficients + b.coefficients)).norm() < 1e-10);
    }

    #[test]
    fn gram_lambda_joint_scaling_homogeneity() {
        let x = cohort(50, &[BlockSpec::Ar1 { rho: 0.3, size: 12 }], 22);
        let y = random_y(50, 23);
        let n = x.n as f64;
        let gram = x.design.transpose() * &x.design / n;
        let rhs = x.design.transpose() * &y / n;
        let lambda = 0.4;
        let c = 3.5;
        let base = ridge_solve_from_gram(&gram, &rhs, lambda).unwrap();
        let scaled = ridge_solve_from_gram(&(&gram * c), &rhs, c * lambda).unwrap();
        assert!((scaled * c - base).norm() < 1e-10);
    }

    #[test]
    fn bad_grouping_rejected() {
        let x = cohort(30, &[BlockSpec::Ar1 { rho: 0.0, size: 10 }], 24);
        let y = random_y(30, 25);
        assert!(Grouping::new(vec![4, 4], 10).is_err());
        assert!(Grouping::new(vec![0, 10], 10).is_err());
        let wrong = Grouping::single(8);
        assert!(matches!(block_ridge(&x, &y, 0.5, &wrong), Err(HdError::BadGrouping(_))));
    }

    #[test]
    fn merge_blocks_chromosome_style() {
        let g = Grouping::merge_blocks(&[10, 10, 10, 10, 10], 2).unwrap();
        assert_eq!(g.sizes(), &[30, 20]);
        assert_eq!(g.total(), 50);
    }

    #[test]
    fn blpc_full_rank_square_basis() {
        let x = cohort(100, &[BlockSpec::Ar1 { rho: 0.4, size: 8 }], 26);
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis =
            fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(1.0)).unwrap();
        assert_eq!(basis.total_components(), 8);
        let v = &basis.blocks[0].vectors;
        let vtv = v.transpose() * v;
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn blpc_repeated_column_drops_rank() {
        let mut x = cohort(60, &[BlockSpec::Ar1 { rho: 0.0, size: 6 }], 27);
        let dup = x.design.column(0).into_owned();
        x.design.set_column(5, &dup);
        let grouping = Grouping::single(6);
        let basis =
            fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(1.0)).unwrap();
        assert_eq!(basis.total_components(), 5);
    }

    #[test]
    fn blpc_fixed_count_beyond_rank_errors() {
        let mut x = cohort(60, &[BlockSpec::Ar1 { rho: 0.0, size: 6 }], 42);
        let dup = x.design.column(0).into_owned();
        x.design.set_column(5, &dup);
        let grouping = Grouping::single(6);
        let err = fit_blpc_basis(&x, &grouping, &BasisSelection::FixedCount(vec![6]));
        assert!(matches!(err, Err(HdError::RankDeficient(_))));
    }

    #[test]
    fn blpc_variance_threshold_truncates() {
        let x = cohort(1000, &[BlockSpec::Ar1 { rho: 0.5, size: 50 }], 28);
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis =
            fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(0.5)).unwrap();
        let q = basis.total_components();
        assert!(q < 50, "q = {q}");
        assert!(basis.blocks[0].variance_explained >= 0.5);
        let v = &basis.blocks[0].vectors;
        let vtv = v.transpose() * v;
        for i in 0..q {
            for j in 0..q {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn blpc_marginal_full_basis_prediction_equivalence() {
        // with q = p the projection satisfies V V^T = I and predictions
        // match the variant-space marginal estimator
        let specs =
            [BlockSpec::Ar1 { rho: 0.5, size: 10 }, BlockSpec::Ar1 { rho: 0.2, size: 10 }];
        let x = cohort(200, &specs, 29);
        let z = {
            let cov = build_block_covariance(&specs).unwrap();
            let mut rng = stream_rng(30, 0, StreamKind::Design(CohortRole::Testing));
            gen_design(150, &cov, DesignMode::GaussianLatent, CohortRole::Testing, &mut rng,
                       "z".into())
                .unwrap()
        };
        let y = random_y(200, 31);
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis = Arc::new(
            fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(1.0)).unwrap(),
        );
        let pc = blpc_marginal(&x, &y, &basis).unwrap();
        let var = marginal(&x, &y).unwrap();
        let pred_pc = pc.predict(&z).unwrap();
        let pred_var = var.predict(&z).unwrap();
        assert!((pred_pc - pred_var).norm() < 1e-8);
    }

    #[test]
    fn blpc_marginal_matches_dense_oracle() {
        let x = cohort(120, &[BlockSpec::Ar1 { rho: 0.5, size: 30 }], 32);
        let y = random_y(120, 33);
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis = Arc::new(
            fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(0.6)).unwrap(),
        );
        let out = blpc_marginal(&x, &y, &basis).unwrap();
        let v = &basis.blocks[0].vectors;
        let oracle = v.transpose() * x.design.transpose() * &y / x.n as f64;
        assert!((out.coefficients - oracle).norm() < 1e-10);
    }

    #[test]
    fn blpc_zero_y_gives_zero() {
        let x = cohort(50, &[BlockSpec::Ar1 { rho: 0.3, size: 10 }], 34);
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis = Arc::new(
            fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(0.9)).unwrap(),
        );
        let out = blpc_marginal(&x, &DVector::zeros(50), &basis).unwrap();
        assert!(out.coefficients.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn blpc_ridge_diagonal_shortcut_matches_dense_solve() {
        let x = cohort(90, &[BlockSpec::Ar1 { rho: 0.5, size: 20 }], 35);
        let y = random_y(90, 36);
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis = Arc::new(
            fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(0.8)).unwrap(),
        );
        let lambda = 2.5;
        let out = blpc_block_ridge(&x, &y, &basis, lambda).unwrap();
        // dense oracle: (V^T X^T X V + lambda I)^-1 V^T X^T y / n
        let v = &basis.blocks[0].vectors;
        let scores = &x.design * v;
        let gram = scores.transpose() * &scores;
        let rhs = v.transpose() * x.design.transpose() * &y;
        let q = gram.nrows();
        let system = gram + DMatrix::identity(q, q) * lambda;
        let oracle = Cholesky::new(system).unwrap().solve(&rhs) / x.n as f64;
        assert!((out.coefficients - oracle).norm() < 1e-10);
    }

    #[test]
    fn blpc_ridge_zero_lambda_is_group_least_squares() {
        let x = cohort(100, &[BlockSpec::Ar1 { rho: 0.4, size: 12 }], 37);
        let z = {
            let cov = build_block_covariance(&[BlockSpec::Ar1 { rho: 0.4, size: 12 }]).unwrap();
            let mut rng = stream_rng(38, 0, StreamKind::Design(CohortRole::Testing));
            gen_design(60, &cov, DesignMode::GaussianLatent, CohortRole::Testing, &mut rng,
                       "z".into())
                .unwrap()
        };
        let y = random_y(100, 39);
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis = Arc::new(
            fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(1.0)).unwrap(),
        );
        let out = blpc_block_ridge(&x, &y, &basis, 0.0).unwrap();
        let pred = out.predict(&z).unwrap();
        // least squares on the group column space, scaled by the leading n^-1
        let gram = x.design.transpose() * &x.design;
        let beta_ls = Cholesky::new(gram).unwrap().solve(&(x.design.transpose() * &y));
        let oracle = (&z.design * beta_ls) / x.n as f64;
        assert!((pred - oracle).norm() < 1e-7);
    }

    #[test]
    fn coefficient_export_csv_schema() {
        let x = cohort(30, &[BlockSpec::Ar1 { rho: 0.0, size: 4 }], 40);
        let y = random_y(30, 41);
        let out = marginal(&x, &y).unwrap();
        let dir = std::env::temp_dir().join("hdridge_estimators_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("coef.csv");
        out.export_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "index,value,space");
        assert!(lines.next().unwrap().ends_with(",variant"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
