//! Cohort, effect, and trait generation under the linear polygenic model.
//!
//! Everything here is a pure function of a specification and an RNG stream.
//! Streams come from a counter-based generator (ChaCha8) keyed by the base
//! seed, with the stream id packing `(replication_index, role)`:
//!
//! ```text
//! stream_id = replication_index << 3 | role_code
//! role codes: 0 train design, 1 panel design, 2 test design,
//!             3 architecture, 4 train noise, 5 test noise
//! ```
//!
//! Independent replications therefore draw from disjoint streams and can run
//! concurrently without shared state.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::Write;
use std::path::Path;

use crate::spectrum::BlockCovariance;
use crate::{HdError, Result};

/// Which cohort a design matrix plays in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CohortRole {
    Training,
    Panel,
    Testing,
}

impl CohortRole {
    pub fn short_name(self) -> &'static str {
        match self {
            CohortRole::Training => "train",
            CohortRole::Panel => "panel",
            CohortRole::Testing => "test",
        }
    }
}

/// RNG stream tags within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Design(CohortRole),
    Architecture,
    Noise(CohortRole),
}

fn stream_code(kind: StreamKind) -> u64 {
    match kind {
        StreamKind::Design(CohortRole::Training) => 0,
        StreamKind::Design(CohortRole::Panel) => 1,
        StreamKind::Design(CohortRole::Testing) => 2,
        StreamKind::Architecture => 3,
        StreamKind::Noise(CohortRole::Training) => 4,
        StreamKind::Noise(CohortRole::Testing) => 5,
        StreamKind::Noise(CohortRole::Panel) => 6,
    }
}

/// A ChaCha8 stream for `(base_seed, replication, kind)`.
pub fn stream_rng(base_seed: u64, replication: u64, kind: StreamKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(replication << 3 | stream_code(kind));
    rng
}

/// How design-matrix entries are generated before the covariance is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMode {
    /// Iid standard normals, correlated by the block square root.
    GaussianLatent,
    /// {0,1,2} genotypes under Hardy-Weinberg probabilities with per-column
    /// minor allele frequency drawn from Uniform[0.05, 0.45]. Non-identity
    /// covariance is injected by thresholding latent correlated Gaussians at
    /// the Hardy-Weinberg quantiles; realized correlations are attenuated
    /// relative to the latent ones.
    Genotype,
}

/// A column-standardized design matrix with its block layout.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub design: DMatrix<f64>,
    pub role: CohortRole,
    /// Block sizes copied from the covariance used to generate it.
    pub boundaries: Vec<usize>,
    pub n: usize,
    /// Provenance string, e.g. `seed=42/rep=3/train`.
    pub seed_tag: String,
}

impl Cohort {
    pub fn p(&self) -> usize {
        self.design.ncols()
    }

    /// Sample correlation between two columns (columns are standardized, so
    /// this is the normalized inner product).
    pub fn sample_correlation(&self, i: usize, j: usize) -> f64 {
        let a = self.design.column(i);
        let b = self.design.column(j);
        a.dot(&b) / (self.n as f64 - 1.0)
    }

    /// Writes the design matrix as CSV (rows = samples, no header).
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for i in 0..self.n {
            let mut first = true;
            for j in 0..self.p() {
                if !first {
                    write!(file, ",")?;
                }
                write!(file, "{}", self.design[(i, j)])?;
                first = false;
            }
            writeln!(file)?;
        }
        Ok(())
    }
}

const STANDARDIZED_MEAN_TOL: f64 = 1e-13;
const STANDARDIZED_SD_TOL: f64 = 1e-13;

/// Centers and scales each column to sample mean 0 and variance 1 (1/(n-1)).
///
/// Columns already standardized within tolerance are left untouched, which
/// makes the operation exactly idempotent.
pub fn standardize_columns(x: &mut DMatrix<f64>) -> Result<()> {
    let n = x.nrows();
    if n < 3 {
        return Err(HdError::InvalidParameter(format!(
            "standardization needs n >= 3, got {n}"
        )));
    }
    let nf = n as f64;
    for j in 0..x.ncols() {
        let mut col = x.column_mut(j);
        let mean = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
        if var == 0.0 {
            return Err(HdError::DegenerateColumn(j));
        }
        let sd = var.sqrt();
        if mean.abs() <= STANDARDIZED_MEAN_TOL && (sd - 1.0).abs() <= STANDARDIZED_SD_TOL {
            continue;
        }
        for v in col.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Ok(())
}

fn gaussian_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // row-major fill so the draw order is independent of storage layout
    let mut m = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Draws one genotype column with minor allele frequency `f`.
fn genotype_column(n: usize, f: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let p0 = (1.0 - f) * (1.0 - f);
    let p01 = p0 + 2.0 * f * (1.0 - f);
    DVector::from_fn(n, |_, _| {
        let u: f64 = rng.random();
        if u < p0 {
            0.0
        } else if u < p01 {
            1.0
        } else {
            2.0
        }
    })
}

/// Thresholds a latent standard-normal column into {0,1,2} at the
/// Hardy-Weinberg quantiles for frequency `f`.
fn threshold_column(latent: &mut DVector<f64>, f: f64, quantile: &Normal) {
    let p0 = (1.0 - f) * (1.0 - f);
    let p01 = p0 + 2.0 * f * (1.0 - f);
    let q0 = quantile.inverse_cdf(p0);
    let q1 = quantile.inverse_cdf(p01);
    for v in latent.iter_mut() {
        *v = if *v < q0 {
            0.0
        } else if *v < q1 {
            1.0
        } else {
            2.0
        };
    }
}

fn column_has_variance(col: &DVector<f64>) -> bool {
    let first = col[0];
    col.iter().any(|&v| v != first)
}

/// Test hook for genotype generation: fixed or uniformly drawn MAF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MafPolicy {
    Uniform,
    Fixed(f64),
}

/// Generates a standardized cohort of `n` samples under `cov`.
pub fn gen_design(
    n: usize,
    cov: &BlockCovariance,
    mode: DesignMode,
    role: CohortRole,
    rng: &mut ChaCha8Rng,
    seed_tag: String,
) -> Result<Cohort> {
    gen_design_with_maf(n, cov, mode, role, rng, seed_tag, MafPolicy::Uniform)
}

/// As [`gen_design`], with control over the minor-allele-frequency draw.
pub fn gen_design_with_maf(
    n: usize,
    cov: &BlockCovariance,
    mode: DesignMode,
    role: CohortRole,
    rng: &mut ChaCha8Rng,
    seed_tag: String,
    maf: MafPolicy,
) -> Result<Cohort> {
    if n < 3 {
        return Err(HdError::InvalidParameter(format!("cohort needs n >= 3, got {n}")));
    }
    let p = cov.total_dim();
    let mut design = match mode {
        DesignMode::GaussianLatent => {
            let x0 = gaussian_matrix(n, p, rng);
            cov.apply_sqrt(&x0)?
        }
        DesignMode::Genotype => {
            let maf_dist = Uniform::new(0.05, 0.45)
                .map_err(|e| HdError::InvalidParameter(e.to_string()))?;
            let freqs: Vec<f64> = (0..p)
                .map(|_| match maf {
                    MafPolicy::Uniform => maf_dist.sample(rng),
                    MafPolicy::Fixed(f) => f,
                })
                .collect();
            if cov.is_identity() {
                let mut m = DMatrix::zeros(n, p);
                for j in 0..p {
                    let mut col = genotype_column(n, freqs[j], rng);
                    if !column_has_variance(&col) {
                        col = genotype_column(n, freqs[j], rng);
                        if !column_has_variance(&col) {
                            return Err(HdError::DegenerateColumn(j));
                        }
                    }
                    m.set_column(j, &col);
                }
                m
            } else {
                // latent correlated Gaussians thresholded at Hardy-Weinberg
                // quantiles; the latent columns have unit variance because
                // the covariance has a unit diagonal
                let x0 = gaussian_matrix(n, p, rng);
                let mut latent = cov.apply_sqrt(&x0)?;
                let quantile = Normal::new(0.0, 1.0).expect("standard normal");
                for j in 0..p {
                    let mut col = DVector::from_column_slice(latent.column(j).as_slice());
                    threshold_column(&mut col, freqs[j], &quantile);
                    if !column_has_variance(&col) {
                        let redraw = gaussian_matrix(n, 1, rng);
                        col = DVector::from_column_slice(redraw.column(0).as_slice());
                        threshold_column(&mut col, freqs[j], &quantile);
                        if !column_has_variance(&col) {
                            return Err(HdError::DegenerateColumn(j));
                        }
                    }
                    latent.set_column(j, &col);
                }
                latent
            }
        }
    };
    standardize_columns(&mut design)?;
    Ok(Cohort { design, role, boundaries: cov.block_sizes(), n, seed_tag })
}

/// Raw (pre-standardization) genotype column sampler, exposed for tests of
/// the Hardy-Weinberg mean 2f.
pub fn raw_genotype_column(n: usize, f: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    genotype_column(n, f, rng)
}

/// Variance model for causal effects.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaMode {
    /// All causal effects have variance `sigma_sq / p`.
    Iid(f64),
    /// Per-causal-variant variances `sigma_i_sq / p` (independent random
    /// effects variant); length must equal the causal count.
    PerVariant(Vec<f64>),
}

/// Causal set, effect vector, and the target heritability they will be
/// calibrated to.
#[derive(Debug, Clone)]
pub struct GeneticArchitecture {
    /// Sorted causal indices, length m.
    pub causal_idx: Vec<usize>,
    /// Effect vector of length p, zero off the causal set.
    pub beta: DVector<f64>,
    /// Per-causal-variant variance scale(s) used for the draw.
    pub sigma_beta_sq: Vec<f64>,
    /// Sparsity m / p.
    pub gamma: f64,
    /// Target heritability in (0, 1).
    pub h2_target: f64,
}

/// Draws a causal set of size `m` uniformly and iid normal effects on it.
pub fn gen_architecture(
    p: usize,
    m: usize,
    sigma_mode: SigmaMode,
    h2_target: f64,
    rng: &mut ChaCha8Rng,
) -> Result<GeneticArchitecture> {
    if m == 0 || m > p {
        return Err(HdError::InvalidSparsity { m, p });
    }
    if !(0.0..1.0).contains(&h2_target) || h2_target <= 0.0 {
        return Err(HdError::InvalidParameter(format!(
            "h2 target {h2_target} outside (0, 1)"
        )));
    }
    let sigma: Vec<f64> = match &sigma_mode {
        SigmaMode::Iid(s) => {
            if *s <= 0.0 {
                return Err(HdError::InvalidParameter("sigma_beta_sq must be positive".into()));
            }
            vec![*s; m]
        }
        SigmaMode::PerVariant(v) => {
            if v.len() != m {
                return Err(HdError::DimensionMismatch(format!(
                    "per-variant sigma has length {}, causal count is {m}",
                    v.len()
                )));
            }
            if v.iter().any(|&s| s <= 0.0) {
                return Err(HdError::InvalidParameter("sigma_beta_sq must be positive".into()));
            }
            v.clone()
        }
    };
    let mut causal_idx: Vec<usize> = index_sample(rng, p, m).into_iter().collect();
    causal_idx.sort_unstable();
    let mut beta = DVector::zeros(p);
    let pf = p as f64;
    for (k, &idx) in causal_idx.iter().enumerate() {
        let sd = (sigma[k] / pf).sqrt();
        let z: f64 = StandardNormal.sample(rng);
        beta[idx] = sd * z;
    }
    Ok(GeneticArchitecture {
        causal_idx,
        beta,
        sigma_beta_sq: sigma,
        gamma: m as f64 / pf,
        h2_target,
    })
}

/// A simulated trait with its exact decomposition.
#[derive(Debug, Clone)]
pub struct TraitData {
    pub y: DVector<f64>,
    /// Genetic component `X beta`.
    pub genetic: DVector<f64>,
    /// Noise vector; `y = genetic + noise` holds exactly.
    pub noise: DVector<f64>,
    /// Heritability recomputed from the defining ratio.
    pub realized_h2: f64,
    /// Variance scale applied to the raw standard-normal noise draw.
    pub noise_var_used: f64,
}

/// Generates `y = X beta + eps` with the noise rescaled so the realized
/// heritability equals the architecture's target exactly.
pub fn gen_trait(
    x: &Cohort,
    arch: &GeneticArchitecture,
    rng: &mut ChaCha8Rng,
) -> Result<TraitData> {
    if x.p() != arch.beta.len() {
        return Err(HdError::DimensionMismatch(format!(
            "cohort has p = {}, architecture has p = {}",
            x.p(),
            arch.beta.len()
        )));
    }
    let genetic = &x.design * &arch.beta;
    let genetic_norm = genetic.norm();
    if genetic_norm == 0.0 {
        return Err(HdError::ZeroGeneticVariance);
    }
    let h2 = arch.h2_target;
    let mut noise = DVector::from_fn(x.n, |_, _| StandardNormal.sample(rng));
    let scale = genetic_norm * ((1.0 - h2) / h2).sqrt() / noise.norm();
    noise *= scale;
    let y = &genetic + &noise;
    let gss = genetic_norm * genetic_norm;
    let ess = noise.norm_squared();
    let realized_h2 = gss / (gss + ess);
    Ok(TraitData { y, genetic, noise, realized_h2, noise_var_used: scale * scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{build_block_covariance, BlockSpec};
    use approx::assert_relative_eq;

    fn identity_cov(p: usize) -> BlockCovariance {
        build_block_covariance(&[BlockSpec::Ar1 { rho: 0.0, size: p }]).unwrap()
    }

    #[test]
    fn gaussian_columns_standardized() {
        let cov = identity_cov(20);
        let mut rng = stream_rng(1, 0, StreamKind::Design(CohortRole::Training));
        let c = gen_design(1000, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let n = c.n as f64;
        for j in 0..c.p() {
            let col = c.design.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 1e-10);
            assert_relative_eq!(var, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn genotype_mean_matches_hardy_weinberg() {
        let n = 2000;
        let f = 0.25;
        let mut rng = stream_rng(2, 0, StreamKind::Design(CohortRole::Training));
        let col = raw_genotype_column(n, f, &mut rng);
        let mean = col.iter().sum::<f64>() / n as f64;
        // binomial mean 2f, variance 2f(1-f)/n per entry
        let se = (2.0 * f * (1.0 - f) / n as f64).sqrt();
        assert!((mean - 2.0 * f).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn latent_correlation_reproduced() {
        let specs: Vec<BlockSpec> =
            (0..2).map(|_| BlockSpec::Ar1 { rho: 0.5, size: 50 }).collect();
        let cov = build_block_covariance(&specs).unwrap();
        let mut rng = stream_rng(3, 0, StreamKind::Design(CohortRole::Training));
        let c = gen_design(4000, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let within = c.sample_correlation(10, 11);
        let across = c.sample_correlation(10, 60);
        assert!((within - 0.5).abs() < 0.05, "within-block correlation {within}");
        assert!(across.abs() < 0.05, "cross-block correlation {across}");
    }

    #[test]
    fn genotype_threshold_correlation_attenuated_but_present() {
        let specs: Vec<BlockSpec> = (0..1).map(|_| BlockSpec::Ar1 { rho: 0.5, size: 20 }).collect();
        let cov = build_block_covariance(&specs).unwrap();
        let mut rng = stream_rng(4, 0, StreamKind::Design(CohortRole::Training));
        let c = gen_design(4000, &cov, DesignMode::Genotype, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let within = c.sample_correlation(3, 4);
        assert!(within > 0.25 && within < 0.55, "attenuated correlation {within}");
    }

    #[test]
    fn standardization_idempotent_bitwise() {
        let cov = identity_cov(8);
        let mut rng = stream_rng(5, 0, StreamKind::Design(CohortRole::Training));
        let c = gen_design(50, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let mut again = c.design.clone();
        standardize_columns(&mut again).unwrap();
        assert_eq!(again, c.design);
    }

    #[test]
    fn architecture_support_and_variance() {
        let p = 10_000;
        let mut rng = stream_rng(6, 0, StreamKind::Architecture);
        let arch = gen_architecture(p, p, SigmaMode::Iid(1.0), 0.5, &mut rng).unwrap();
        assert_eq!(arch.causal_idx.len(), p);
        let var = arch.beta.iter().map(|&b| b * b).sum::<f64>() / p as f64;
        assert!((var - 1.0 / p as f64).abs() / (1.0 / p as f64) < 0.05, "variance {var}");
    }

    #[test]
    fn single_causal_variant() {
        let mut rng = stream_rng(7, 0, StreamKind::Architecture);
        let arch = gen_architecture(100, 1, SigmaMode::Iid(1.0), 0.3, &mut rng).unwrap();
        assert_eq!(arch.beta.iter().filter(|&&b| b != 0.0).count(), 1);
        assert_eq!(arch.causal_idx.len(), 1);
    }

    #[test]
    fn per_variant_equal_sigmas_match_iid_moments() {
        let p = 5000;
        let m = 1000;
        let mut rng_a = stream_rng(8, 0, StreamKind::Architecture);
        let a = gen_architecture(p, m, SigmaMode::Iid(2.0), 0.5, &mut rng_a).unwrap();
        let mut rng_b = stream_rng(8, 0, StreamKind::Architecture);
        let b =
            gen_architecture(p, m, SigmaMode::PerVariant(vec![2.0; m]), 0.5, &mut rng_b).unwrap();
        // identical streams and identical variances give identical draws
        assert_eq!(a.beta, b.beta);
    }

    #[test]
    fn invalid_sparsity_rejected() {
        let mut rng = stream_rng(9, 0, StreamKind::Architecture);
        assert!(matches!(
            gen_architecture(10, 11, SigmaMode::Iid(1.0), 0.5, &mut rng),
            Err(HdError::InvalidSparsity { .. })
        ));
        assert!(matches!(
            gen_architecture(10, 0, SigmaMode::Iid(1.0), 0.5, &mut rng),
            Err(HdError::InvalidSparsity { .. })
        ));
    }

    #[test]
    fn trait_calibration_exact() {
        let cov = identity_cov(100);
        let mut rng = stream_rng(10, 0, StreamKind::Design(CohortRole::Training));
        let x = gen_design(500, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let mut arng = stream_rng(10, 0, StreamKind::Architecture);
        let arch = gen_architecture(100, 50, SigmaMode::Iid(1.0), 0.5, &mut arng).unwrap();
        let mut nrng = stream_rng(10, 0, StreamKind::Noise(CohortRole::Training));
        let t = gen_trait(&x, &arch, &mut nrng).unwrap();
        assert!((t.realized_h2 - 0.5).abs() < 1e-10);
        // y is exactly the sum of its stored components, and the genetic
        // component is exactly reproducible from X and beta
        assert_eq!(t.y, &t.genetic + &t.noise);
        assert_eq!(t.genetic, &x.design * &arch.beta);
    }

    #[test]
    fn zero_beta_rejected() {
        let cov = identity_cov(10);
        let mut rng = stream_rng(11, 0, StreamKind::Design(CohortRole::Training));
        let x = gen_design(20, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let arch = GeneticArchitecture {
            causal_idx: vec![0],
            beta: DVector::zeros(10),
            sigma_beta_sq: vec![1.0],
            gamma: 0.1,
            h2_target: 0.5,
        };
        let mut nrng = stream_rng(11, 0, StreamKind::Noise(CohortRole::Training));
        assert!(matches!(gen_trait(&x, &arch, &mut nrng), Err(HdError::ZeroGeneticVariance)));
    }

    #[test]
    fn regression_check_on_genetic_component() {
        // h2 = 0.8: regressing y on g returns R^2 near 0.8
        let cov = identity_cov(1000);
        let mut rng = stream_rng(12, 0, StreamKind::Design(CohortRole::Training));
        let x = gen_design(10_000, &cov, DesignMode::GaussianLatent, CohortRole::Training,
                           &mut rng, "t".into())
            .unwrap();
        let mut arng = stream_rng(12, 0, StreamKind::Architecture);
        let arch = gen_architecture(1000, 500, SigmaMode::Iid(1.0), 0.8, &mut arng).unwrap();
        let mut nrng = stream_rng(12, 0, StreamKind::Noise(CohortRole::Training));
        let t = gen_trait(&x, &arch, &mut nrng).unwrap();
        let g = &t.genetic;
        let y = &t.y;
        let gy = g.dot(y);
        let r2 = gy * gy / (g.norm_squared() * y.norm_squared());
        assert!((r2 - 0.8).abs() < 0.02, "independent regression R^2 = {r2}");
    }

    #[test]
    fn same_seed_bitwise_identical() {
        let cov = identity_cov(30);
        let make = || {
            let mut rng = stream_rng(42, 7, StreamKind::Design(CohortRole::Panel));
            gen_design(100, &cov, DesignMode::Genotype, CohortRole::Panel, &mut rng, "p".into())
                .unwrap()
        };
        let a = make();
        let b = make();
        assert_eq!(a.design, b.design);
    }

    #[test]
    fn degenerate_genotype_column_fails_after_one_resample() {
        // n = 3 with the most extreme allowed frequency makes an all-equal
        // column likely; with many columns the double-degenerate draw is
        // certain and must surface as an error, not silent imputation
        let cov = identity_cov(300);
        let mut rng = stream_rng(13, 0, StreamKind::Design(CohortRole::Training));
        let err = gen_design_with_maf(
            3,
            &cov,
            DesignMode::Genotype,
            CohortRole::Training,
            &mut rng,
            "t".into(),
            MafPolicy::Fixed(0.05),
        );
        assert!(matches!(err, Err(HdError::DegenerateColumn(_))), "{err:?}");
    }

    #[test]
    fn cohort_csv_export_row_per_sample() {
        let cov = identity_cov(3);
        let mut rng = stream_rng(14, 0, StreamKind::Design(CohortRole::Training));
        let c = gen_design(5, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut rng,
                           "t".into())
            .unwrap();
        let dir = std::env::temp_dir().join("hdridge_datagen_export");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cohort.csv");
        c.export_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 3);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn distinct_streams_differ() {
        let cov = identity_cov(10);
        let mut r0 = stream_rng(1, 0, StreamKind::Design(CohortRole::Training));
        let mut r1 = stream_rng(1, 1, StreamKind::Design(CohortRole::Training));
        let a = gen_design(10, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut r0,
                           "a".into())
            .unwrap();
        let b = gen_design(10, &cov, DesignMode::GaussianLatent, CohortRole::Training, &mut r1,
                           "b".into())
            .unwrap();
        assert_ne!(a.design, b.design);
    }
}
