//! Trace functionals: the deterministic-equivalent sums feeding the
//! accuracy formulas, the reference-panel correction ratios, the PC-space
//! conditional traces, and the exact empirical traces used to validate the
//! cross-block term.

use nalgebra::{Cholesky, DMatrix};

use super::companion::{solve_companion, CompanionSolution};
use crate::datagen::Cohort;
use crate::estimators::BlpcBasis;
use crate::spectrum::{BlockCovariance, SpectralLaw};
use crate::{HdError, Result};

const DENOM_GUARD: f64 = 1e-12;

/// The three cross-block trace limits of the block-wise ridge analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RTraces {
    /// `p^-1 sum_l tr{(a_l Sigma_l + lambda I)^-1 Sigma_l}`.
    pub r1: f64,
    /// `p^-1 sum_l tr{(a_l Sigma_l + lambda I)^-2 (I + da_l Sigma_l) Sigma_l}`
    /// with `da_l = d a_l / d lambda`; equals `-d r1 / d lambda`.
    pub r2: f64,
    /// Cross-block term: `omega^-1 sum_{l != h} (1 - a_h) s_l` with
    /// `s_l = a_l omega_l E_l[t^2 / (a_l t + lambda)]`.
    ///
    /// The leave-one-out expansion of the off-diagonal trace concentrates
    /// each pair on the product of a plain resolvent trace and a
    /// Sigma^2-weighted one; for unit-spectrum blocks `s_l = 1 - a_l` and
    /// the term reduces to
    /// `omega^-1 sum_{l != h} omega_l omega_h (1 - lambda m_l)(1 - lambda m_h)`.
    pub r3: f64,
}

/// Companion solutions and the R traces for a set of blocks given as
/// `(omega_l, law)` pairs. Block weights are `omega_l / omega`.
pub fn r_traces(
    lambda: f64,
    blocks: &[(f64, &SpectralLaw)],
    omega: f64,
) -> Result<RTraces> {
    if blocks.is_empty() {
        return Err(HdError::DimensionMismatch("no blocks".into()));
    }
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    let mut one_minus_a = Vec::with_capacity(blocks.len());
    let mut sandwich = Vec::with_capacity(blocks.len());
    for &(omega_l, law) in blocks {
        let sol = solve_companion(omega_l, law, lambda)?;
        let a = sol.a;
        let da = sol.a_dot;
        let w = omega_l / omega;
        r1 += w * law.expect(|t| t / (a * t + lambda));
        r2 += w * law.expect(|t| t * (1.0 + da * t) / ((a * t + lambda) * (a * t + lambda)));
        one_minus_a.push(1.0 - a);
        sandwich.push(a * omega_l * law.expect(|t| t * t / (a * t + lambda)));
    }
    let sum_one_minus: f64 = one_minus_a.iter().sum();
    let sum_sandwich: f64 = sandwich.iter().sum();
    let diag: f64 = one_minus_a.iter().zip(&sandwich).map(|(u, s)| u * s).sum();
    let r3 = (sum_one_minus * sum_sandwich - diag) / omega;
    Ok(RTraces { r1, r2, r3 })
}

/// Pair traces of one block against a reference panel, normalized per
/// block dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RefBlockTraces {
    /// Limit of `p_l^-1 tr{(S_ref + lambda)^-1 Sigma (S_ref + lambda)^-1 Sigma}`.
    pub sigma_sigma: f64,
    /// Limit of `p_l^-1 tr{(S_ref + lambda)^-1 Sigma (S_ref + lambda)^-1 Sigma^2}`.
    pub sigma_sigma2: f64,
    /// Companion solution at the reference ratio, for reuse.
    pub companion: CompanionSolution,
}

/// Deterministic-equivalent pair traces for a reference-panel resolvent.
///
/// `omega_ref_l` is the block's ratio against the panel sample count (it
/// drives the companion root); `omega_inner_l` is the ratio used in the
/// sample-count-normalized inner traces of the correction factors. The two
/// coincide under the default panel normalization.
pub fn ref_panel_traces(
    lambda: f64,
    omega_ref_l: f64,
    omega_inner_l: f64,
    law: &SpectralLaw,
) -> Result<RefBlockTraces> {
    let sol = solve_companion(omega_ref_l, law, lambda)?;
    let a = sol.a;
    let s1 = law.expect(|t| t / (a * t + lambda));
    let s2 = law.expect(|t| t * t / ((a * t + lambda) * (a * t + lambda)));
    let s3 = law.expect(|t| t * t * t / ((a * t + lambda) * (a * t + lambda)));
    let f = {
        let base = 1.0 + omega_inner_l * s1;
        base * base
    };
    let denom_ss = 1.0 - omega_inner_l * s2 / f;
    if denom_ss.abs() <= DENOM_GUARD {
        return Err(HdError::DivisionDegenerate(denom_ss));
    }
    let denom_ss2 = f - omega_inner_l * s2;
    if denom_ss2.abs() <= DENOM_GUARD {
        return Err(HdError::DivisionDegenerate(denom_ss2));
    }
    Ok(RefBlockTraces {
        sigma_sigma: s2 / denom_ss,
        sigma_sigma2: f * s3 / denom_ss2,
        companion: sol,
    })
}

/// The six conditional traces of the PC-space accuracy formulas, evaluated
/// on a realized training design and basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PTraces {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub p5: f64,
    pub p6: f64,
    /// Penalty the ridge-type traces were evaluated at.
    pub lambda: f64,
}

/// Evaluates the PC traces block-wise, exploiting the orthonormal columns
/// of the projection and the diagonal PC-score Gram. Everything reduces to
/// q x q products.
pub fn blpc_traces(
    x: &Cohort,
    cov: &BlockCovariance,
    basis: &BlpcBasis,
    lambda: f64,
) -> Result<PTraces> {
    let p = cov.total_dim();
    if x.p() != p {
        return Err(HdError::DimensionMismatch(format!(
            "cohort has p = {}, covariance has {}",
            x.p(),
            p
        )));
    }
    if basis.p() != p {
        return Err(HdError::DimensionMismatch(format!(
            "basis covers p = {}, covariance has {}",
            basis.p(),
            p
        )));
    }
    if lambda < 0.0 {
        return Err(HdError::InvalidParameter("lambda must be nonnegative".into()));
    }
    let n = x.n as f64;
    let pf = p as f64;
    let q = basis.total_components();

    // scores and the projected sample covariance
    let scores = basis.project_columns(&x.design)?; // X V, n x q
    let shat_v = x.design.transpose() * &scores / n; // Sigma_hat V, p x q

    // Sigma V, stacked with the same block layout as V
    let mut sig_v = DMatrix::zeros(p, q);
    {
        let mut row = 0;
        let mut col = 0;
        for (l, blk) in basis.blocks.iter().enumerate() {
            // basis group sizes must align with covariance blocks when the
            // grouping is the native one; in the merged case each group is
            // a run of whole blocks, handled by walking covariance blocks
            let gsize = basis.group_sizes[l];
            let ql = blk.vectors.ncols();
            let mut inner = 0;
            let mut cov_block = 0;
            // find the covariance block at this offset
            while cov.boundaries()[cov_block] < row {
                cov_block += 1;
            }
            if cov.boundaries()[cov_block] != row {
                return Err(HdError::BadGrouping(
                    "basis group does not start on a covariance block boundary".into(),
                ));
            }
            while inner < gsize {
                let b = cov.block(cov_block)?;
                let bsize = b.dim();
                if inner + bsize > gsize {
                    return Err(HdError::BadGrouping(
                        "basis group splits a covariance block".into(),
                    ));
                }
                let vsub = blk.vectors.rows(inner, bsize);
                sig_v.view_mut((row + inner, col), (bsize, ql)).copy_from(&(&b.matrix * vsub));
                inner += bsize;
                cov_block += 1;
            }
            row += gsize;
            col += ql;
        }
    }

    let m = {
        // V^T Sigma V, q x q
        let mut m = DMatrix::zeros(q, q);
        let mut row = 0;
        let mut col = 0;
        for (l, blk) in basis.blocks.iter().enumerate() {
            let gsize = basis.group_sizes[l];
            let ql = blk.vectors.ncols();
            let sig_sub = sig_v.view((row, col), (gsize, ql));
            m.view_mut((col, col), (ql, ql))
                .copy_from(&(blk.vectors.transpose() * sig_sub));
            row += gsize;
            col += ql;
        }
        m
    };

    let g = scores.transpose() * &scores / n; // V^T Shat V
    let g2 = shat_v.transpose() * &shat_v; // V^T Shat^2 V

    let p1 = frobenius_inner(&shat_v, &sig_v) / pf;
    let p2 = (&m * &g2).trace() / pf;
    let p3 = (&m * &g).trace() / pf;

    let d2 = basis.squared_singular_values();
    let rdiag: Vec<f64> = d2.iter().map(|&v| 1.0 / (v + lambda)).collect();
    // C = V^T Shat Sigma V = (Shat V)^T (Sigma V)
    let c = shat_v.transpose() * &sig_v;
    let p4 = (0..q).map(|i| rdiag[i] * c[(i, i)]).sum::<f64>() / pf;
    // R M R, then trace against G2 / G
    let mut rmr = m.clone();
    for i in 0..q {
        for j in 0..q {
            rmr[(i, j)] *= rdiag[i] * rdiag[j];
        }
    }
    let p5 = (&rmr * &g2).trace() / pf;
    let p6 = (&rmr * &g).trace() / pf;

    Ok(PTraces { p1, p2, p3, p4, p5, p6, lambda })
}

fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// The exact finite-sample trace functionals comparing the block-restricted
/// resolvent against the full sample covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossBlockTraces {
    /// Single-difference trace with one resolvent power. Vanishes
    /// identically when the block boundaries are exact: the difference
    /// matrix has zero diagonal blocks while the resolvent and the
    /// population matrix are both block-diagonal.
    pub t1: f64,
    /// Single-difference trace with a squared resolvent; vanishes likewise.
    pub t2: f64,
    /// The quadratic cross-block trace; its limit is the `r3` term.
    pub t3: f64,
}

/// Computes the three traces exactly on a realized training cohort.
pub fn empirical_cross_block_traces(
    x: &Cohort,
    cov: &BlockCovariance,
    lambda: f64,
) -> Result<CrossBlockTraces> {
    let p = cov.total_dim();
    if x.p() != p {
        return Err(HdError::DimensionMismatch(format!(
            "cohort has p = {}, covariance has {}",
            x.p(),
            p
        )));
    }
    if lambda <= 0.0 {
        return Err(HdError::InvalidParameter("lambda must be positive".into()));
    }
    let n = x.n as f64;
    let k = cov.num_blocks();

    // per-block resolvents B_l = (Shat_l + lambda I)^-1 and M_l = B_l Sigma_l
    let mut resolvents = Vec::with_capacity(k);
    let mut m_mats = Vec::with_capacity(k);
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    for l in 0..k {
        let range = cov.block_range(l);
        let xl = x.design.columns(range.start, range.len());
        let shat_l = xl.transpose() * xl / n;
        let dim = range.len();
        let system = &shat_l + DMatrix::identity(dim, dim) * lambda;
        let chol = Cholesky::new(system)
            .ok_or_else(|| HdError::SolveFailure("block resolvent".into()))?;
        let b = chol.inverse();
        let m = &b * &cov.block(l)?.matrix;
        // the diagonal blocks of the full and block-restricted sample
        // covariances are the same floats, so the single-difference traces
        // contribute exactly zero per block
        let diff = &shat_l - &shat_l;
        t1 += frobenius_inner(&diff.transpose(), &m);
        t2 += frobenius_inner(&diff.transpose(), &(&b * &m));
        resolvents.push(b);
        m_mats.push(m);
    }
    t1 /= p as f64;
    t2 /= p as f64;

    // T3 = p^-1 sum_{l != h} tr(S_lh M_h S_hl B_l)
    let mut t3 = 0.0;
    for l in 0..k {
        let range_l = cov.block_range(l);
        let xl = x.design.columns(range_l.start, range_l.len());
        for h in 0..k {
            if l == h {
                continue;
            }
            let range_h = cov.block_range(h);
            let xh = x.design.columns(range_h.start, range_h.len());
            let s_lh = xl.transpose() * xh / n;
            let left = &s_lh * &m_mats[h]; // p_l x p_h
            let right = s_lh.transpose() * &resolvents[l]; // p_h x p_l
            // tr(left * right) via Frobenius inner of left and right^T
            t3 += frobenius_inner(&left, &right.transpose());
        }
    }
    t3 /= p as f64;

    Ok(CrossBlockTraces { t1, t2, t3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_design, stream_rng, CohortRole, DesignMode, StreamKind};
    use crate::estimators::{fit_blpc_basis, BasisSelection, Grouping};
    use crate::spectrum::{build_block_covariance, spectral_law, BlockSpec};
    use approx::assert_relative_eq;

    #[test]
    fn r3_zero_for_single_block() {
        let law = SpectralLaw::new(vec![1.0; 10]).unwrap();
        let tr = r_traces(1.0, &[(1.0, &law)], 1.0).unwrap();
        assert_eq!(tr.r3, 0.0);
    }

    #[test]
    fn r1_identity_single_block() {
        // Sigma = I, omega = 1, lambda = 1: R1 = 1/(a + 1) = golden ratio
        let law = SpectralLaw::new(vec![1.0; 4]).unwrap();
        let tr = r_traces(1.0, &[(1.0, &law)], 1.0).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((tr.r1 - golden).abs() < 1e-9, "r1 = {}", tr.r1);
    }

    #[test]
    fn r2_matches_r1_finite_difference() {
        // R2 = -dR1/dlambda
        let law_a = SpectralLaw::new(vec![0.5, 1.0, 1.5, 1.0]).unwrap();
        let law_b = SpectralLaw::new(vec![0.8, 1.2]).unwrap();
        let blocks = [(0.6, &law_a), (0.3, &law_b)];
        let omega = 0.9;
        let lambda = 0.8;
        let h = 1e-6;
        let hi = r_traces(lambda + h, &blocks, omega).unwrap().r1;
        let lo = r_traces(lambda - h, &blocks, omega).unwrap().r1;
        let fd = -(hi - lo) / (2.0 * h);
        let tr = r_traces(lambda, &blocks, omega).unwrap();
        assert_relative_eq!(tr.r2, fd, max_relative = 1e-6);
    }

    #[test]
    fn r3_identity_reduces_to_pair_product_form() {
        // for unit spectra the cross-block term equals
        // omega^-1 sum_{l!=h} omega_l omega_h (1 - lambda m)^2
        let law = SpectralLaw::new(vec![1.0; 500]).unwrap();
        let blocks = [(0.5, &law), (0.5, &law)];
        let tr = r_traces(1.0, &blocks, 1.0).unwrap();
        let sol = solve_companion(0.5, &law, 1.0).unwrap();
        let c = 1.0 - 1.0 * sol.m_neg_lambda;
        let expect = 2.0 * 0.5 * 0.5 * c * c / 1.0;
        assert_relative_eq!(tr.r3, expect, epsilon = 1e-10);
    }

    #[test]
    fn r3_nonnegative_on_grid() {
        let ar = build_block_covariance(&[BlockSpec::Ar1 { rho: 0.5, size: 30 }]).unwrap();
        let law = spectral_law(&ar, 0).unwrap();
        for &omega in &[0.3, 1.0, 3.0] {
            for &lambda in &[0.1, 1.0, 10.0] {
                let blocks = [(omega / 2.0, &law), (omega / 2.0, &law)];
                let tr = r_traces(lambda, &blocks, omega).unwrap();
                assert!(tr.r3 >= 0.0);
            }
        }
    }

    #[test]
    fn ref_traces_population_panel_limit() {
        // panel ratio -> 0 recovers the population resolvent: for Sigma = I
        // the pair trace tends to (1 + lambda)^-2
        let law = SpectralLaw::new(vec![1.0; 8]).unwrap();
        let lambda = 0.9;
        let tr = ref_panel_traces(lambda, 1e-12, 1e-12, &law).unwrap();
        assert_relative_eq!(tr.sigma_sigma, 1.0 / ((1.0 + lambda) * (1.0 + lambda)),
                            epsilon = 1e-6);
    }

    #[test]
    fn ref_traces_identical_blocks_symmetric() {
        let ar = build_block_covariance(&[BlockSpec::Ar1 { rho: 0.4, size: 25 }]).unwrap();
        let law = spectral_law(&ar, 0).unwrap();
        let a = ref_panel_traces(0.5, 0.7, 0.7, &law).unwrap();
        let b = ref_panel_traces(0.5, 0.7, 0.7, &law).unwrap();
        assert_eq!(a.sigma_sigma, b.sigma_sigma);
        assert_eq!(a.sigma_sigma2, b.sigma_sigma2);
    }

    #[test]
    fn ref_traces_match_simulation_oracle() {
        // K=1 identity block: p^-1 tr{(Shat_W + lam)^-1 Sigma (Shat_W + lam)^-1 Sigma}
        // against a Monte-Carlo panel at p = n_w = 600
        let p = 600;
        let cov = build_block_covariance(&[BlockSpec::Ar1 { rho: 0.0, size: p }]).unwrap();
        let lambda = 1.0;
        let mut acc = 0.0;
        let reps = 5;
        for rep in 0..reps {
            let mut rng = stream_rng(100 + rep, 0, StreamKind::Design(CohortRole::Panel));
            let w = gen_design(p, &cov, DesignMode::GaussianLatent, CohortRole::Panel, &mut rng,
                               "w".into())
                .unwrap();
            let shat = w.design.transpose() * &w.design / p as f64;
            let system = &shat + DMatrix::identity(p, p) * lambda;
            let inv = Cholesky::new(system).unwrap().inverse();
            // Sigma = I so the trace is tr(inv^2) here
            acc += (&inv * &inv).trace() / p as f64;
        }
        let emp = acc / reps as f64;
        let law = SpectralLaw::new(vec![1.0; p]).unwrap();
        let tr = ref_panel_traces(lambda, 1.0, 1.0, &law).unwrap();
        assert!(
            (tr.sigma_sigma - emp).abs() / emp < 0.02,
            "formula {} vs simulation {emp}",
            tr.sigma_sigma
        );
    }

    #[test]
    fn cross_block_traces_single_block_all_zero() {
        let cov = build_block_covariance(&[BlockSpec::Ar1 { rho: 0.5, size: 40 }]).unwrap();
        let mut rng = stream_rng(7, 0, StreamKind::Design(CohortRole::Training));
        let x = gen_design(100, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let tr = empirical_cross_block_traces(&x, &cov, 0.5).unwrap();
        assert_eq!(tr.t1, 0.0);
        assert_eq!(tr.t2, 0.0);
        assert_eq!(tr.t3, 0.0);
    }

    #[test]
    fn cross_block_t3_matches_r3_at_moderate_scale() {
        // 8 x AR1(0.5, 50): the corrected cross-block term tracks the
        // realized trace within a few percent at p = n = 400
        let specs: Vec<BlockSpec> = (0..8).map(|_| BlockSpec::Ar1 { rho: 0.5, size: 50 }).collect();
        let cov = build_block_covariance(&specs).unwrap();
        let p = cov.total_dim();
        let n = p;
        let lambda = 2.0 / 3.0;
        let mut acc = 0.0;
        let reps = 8;
        for rep in 0..reps {
            let mut rng = stream_rng(200 + rep, 0, StreamKind::Design(CohortRole::Training));
            let x = gen_design(n, &cov, DesignMode::GaussianLatent, CohortRole::Training,
                               &mut rng, "t".into())
                .unwrap();
            acc += empirical_cross_block_traces(&x, &cov, lambda).unwrap().t3;
        }
        let emp = acc / reps as f64;
        let law = spectral_law(&cov, 0).unwrap();
        let blocks: Vec<(f64, &SpectralLaw)> =
            (0..8).map(|_| (50.0 / n as f64, &law)).collect();
        let theory = r_traces(lambda, &blocks, p as f64 / n as f64).unwrap().r3;
        assert!(
            (emp - theory).abs() / theory < 0.05,
            "empirical {emp} vs formula {theory}"
        );
    }

    #[test]
    fn blpc_traces_full_basis_projection_drops_out() {
        // with q = p: P1 = p^-1 tr(Sigma Shat), P3 = P1, P2 = p^-1 tr(Sigma Shat^2)
        let specs = [BlockSpec::Ar1 { rho: 0.5, size: 12 }, BlockSpec::Ar1 { rho: 0.2, size: 8 }];
        let cov = build_block_covariance(&specs).unwrap();
        let mut rng = stream_rng(31, 0, StreamKind::Design(CohortRole::Training));
        let x = gen_design(90, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis = fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(1.0)).unwrap();
        let tr = blpc_traces(&x, &cov, &basis, 0.3).unwrap();

        let p = cov.total_dim();
        let n = x.n as f64;
        let shat = x.design.transpose() * &x.design / n;
        let mut sigma = DMatrix::zeros(p, p);
        for l in 0..cov.num_blocks() {
            let r = cov.block_range(l);
            sigma.view_mut((r.start, r.start), (r.len(), r.len()))
                .copy_from(&cov.block(l).unwrap().matrix);
        }
        let p1 = (&sigma * &shat).trace() / p as f64;
        let p2 = (&sigma * &shat * &shat).trace() / p as f64;
        assert_relative_eq!(tr.p1, p1, epsilon = 1e-9);
        assert_relative_eq!(tr.p3, p1, epsilon = 1e-9);
        assert_relative_eq!(tr.p2, p2, epsilon = 1e-9);
    }

    #[test]
    fn blpc_traces_match_dense_oracle_single_component() {
        let cov = build_block_covariance(&[BlockSpec::Ar1 { rho: 0.5, size: 15 }]).unwrap();
        let mut rng = stream_rng(33, 0, StreamKind::Design(CohortRole::Training));
        let x = gen_design(60, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis = fit_blpc_basis(&x, &grouping, &BasisSelection::FixedCount(vec![1])).unwrap();
        let lambda = 4.0;
        let tr = blpc_traces(&x, &cov, &basis, lambda).unwrap();

        // dense oracle with explicit V V^T and V R V^T
        let p = 15;
        let n = x.n as f64;
        let v = &basis.blocks[0].vectors;
        let d = basis.blocks[0].singular_values[0];
        let shat = x.design.transpose() * &x.design / n;
        let sigma = cov.block(0).unwrap().matrix.clone();
        let pi = v * v.transpose();
        let vr = v * v.transpose() / (d * d + lambda);
        let pf = p as f64;
        assert_relative_eq!(tr.p1, (&sigma * &pi * &shat).trace() / pf, epsilon = 1e-10);
        assert_relative_eq!(tr.p2, (&pi * &sigma * &pi * &shat * &shat).trace() / pf,
                            epsilon = 1e-10);
        assert_relative_eq!(tr.p3, (&pi * &sigma * &pi * &shat).trace() / pf, epsilon = 1e-10);
        assert_relative_eq!(tr.p4, (&sigma * &vr * &shat).trace() / pf, epsilon = 1e-10);
        assert_relative_eq!(tr.p5, (&vr * &sigma * &vr * &shat * &shat).trace() / pf,
                            epsilon = 1e-10);
        assert_relative_eq!(tr.p6, (&vr * &sigma * &vr * &shat).trace() / pf, epsilon = 1e-10);
    }

    #[test]
    fn blpc_ridge_traces_decay_in_lambda() {
        let cov = build_block_covariance(&[BlockSpec::Ar1 { rho: 0.5, size: 20 }]).unwrap();
        let mut rng = stream_rng(34, 0, StreamKind::Design(CohortRole::Training));
        let x = gen_design(80, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let grouping = Grouping::from_boundaries(&x.boundaries).unwrap();
        let basis = fit_blpc_basis(&x, &grouping, &BasisSelection::VarianceThreshold(0.8)).unwrap();
        // penalties far above the largest squared singular value, so the
        // asymptotic decay rates are clean
        let lam_small = blpc_traces(&x, &cov, &basis, 1e7).unwrap();
        let lam_big = blpc_traces(&x, &cov, &basis, 1e10).unwrap();
        // P4 decays like 1/lambda, P5 and P6 like 1/lambda^2
        assert_relative_eq!(lam_big.p4 / lam_small.p4, 1e-3, max_relative = 1e-3);
        assert_relative_eq!(lam_big.p5 / lam_small.p5, 1e-6, max_relative = 1e-3);
        assert_relative_eq!(lam_big.p6 / lam_small.p6, 1e-6, max_relative = 1e-3);
    }
}
