//! Difference operators of Poisson functionals and the variance-bound
//! estimators built on them.
//!
//! For a functional `F` of a point configuration, the add-one cost is
//! `D_x F = F(eta + x) - F(eta)` and the second-order operator is the
//! alternating sum over adding two points. The estimators below approximate
//! the two Dirichlet integrals `E int (D_x F)^2 dlambda` and
//! `E int (D^2_{x,y} F)^2 dlambda^2` for a homogeneous intensity
//! `lambda = intensity * Lebesgue` on a window, and combine them into a lower
//! variance bound `4 / (alpha + 2)^2 * E int (D_x F)^2 dlambda` with
//! `alpha = ratio of the two integrals`, next to the Poincare upper bound.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::process::{sample_poisson_with, PointConfiguration, SeedSpec, Window};
use crate::stats::{
    bootstrap_statistic, mean_with_ci, sample_variance, EstimateWithCI, BOOTSTRAP_RESAMPLES,
    DEFAULT_CI_LEVEL,
};

const BOOTSTRAP_TAG: u64 = 0xb007;
const OUTER_POINT_TAG: u64 = 0x0037;

/// A real-valued functional of a point configuration.
///
/// Implementations must be deterministic and must not depend on the point
/// order (the configuration represents a counting measure).
pub trait Functional: Send + Sync {
    fn evaluate(&self, config: &PointConfiguration) -> f64;
    fn label(&self) -> String;
}

impl<F: Functional + ?Sized> Functional for &F {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        (**self).evaluate(config)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

impl Functional for Box<dyn Functional> {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        (**self).evaluate(config)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// Number of points.
pub struct Cardinality;

impl Functional for Cardinality {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        config.len() as f64
    }
    fn label(&self) -> String {
        "count".into()
    }
}

/// `(-1)^{|eta|}`; its add-one cost has expectation `-2 E[(-1)^{|eta|}]`,
/// which is exponentially small in the mean count.
pub struct Parity;

impl Functional for Parity {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        if config.len() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
    fn label(&self) -> String {
        "parity".into()
    }
}

/// Indicator of a non-empty configuration.
pub struct NonEmptyIndicator;

impl Functional for NonEmptyIndicator {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        if config.is_empty() {
            0.0
        } else {
            1.0
        }
    }
    fn label(&self) -> String {
        "nonempty".into()
    }
}

/// `factor * F`.
pub struct Scaled<F> {
    pub inner: F,
    pub factor: f64,
}

impl<F: Functional> Functional for Scaled<F> {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        self.factor * self.inner.evaluate(config)
    }
    fn label(&self) -> String {
        format!("{}*{}", self.factor, self.inner.label())
    }
}

/// A linear combination of functionals, evaluated on the shared configuration.
pub struct LinearCombination {
    pub terms: Vec<(f64, Box<dyn Functional>)>,
}

impl Functional for LinearCombination {
    fn evaluate(&self, config: &PointConfiguration) -> f64 {
        self.terms.iter().map(|(a, f)| a * f.evaluate(config)).sum()
    }
    fn label(&self) -> String {
        let parts: Vec<String> =
            self.terms.iter().map(|(a, f)| format!("{a}*{}", f.label())).collect();
        parts.join("+")
    }
}

/// Add-one cost `F(config + x) - F(config)`.
pub fn difference<F: Functional + ?Sized>(
    functional: &F,
    config: &PointConfiguration,
    x: &[f64],
) -> Result<f64> {
    let mut scratch = config.clone();
    scratch.push(x)?;
    Ok(functional.evaluate(&scratch) - functional.evaluate(config))
}

/// Iterated second-order difference
/// `F(config+x+y) - F(config+x) - F(config+y) + F(config)`, symmetric in
/// `(x, y)`.
pub fn second_difference<F: Functional + ?Sized>(
    functional: &F,
    config: &PointConfiguration,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let base = functional.evaluate(config);
    let mut scratch = config.clone();
    scratch.push(x)?;
    let f_x = functional.evaluate(&scratch);
    scratch.push(y)?;
    let f_xy = functional.evaluate(&scratch);
    scratch.pop();
    scratch.pop();
    scratch.push(y)?;
    let f_y = functional.evaluate(&scratch);
    Ok(f_xy - f_x - f_y + base)
}

/// Monte Carlo estimates of the two Dirichlet integrals and their ratio.
///
/// `alpha_hat` is the empirical ratio `second_order / first_order`; it is
/// `+inf` when the first-order estimate vanishes. The resulting
/// `4/(alpha_hat+2)^2 * first_order` is an empirical version of the reversed
/// Poincare bound: the ratio is estimated, not certified over all of `L^2`.
#[derive(Clone, Debug)]
pub struct DirichletEstimate {
    pub first_order: EstimateWithCI,
    pub second_order: EstimateWithCI,
    pub alpha_hat: f64,
}

impl DirichletEstimate {
    pub fn lower_bound(&self) -> f64 {
        theorem1_lower_bound(self)
    }

    pub fn upper_bound(&self) -> f64 {
        poincare_upper_bound(self)
    }

    /// Standard error of the lower bound, treating `alpha_hat` as fixed.
    pub fn lower_bound_std_error(&self) -> f64 {
        if self.alpha_hat.is_finite() {
            4.0 / ((self.alpha_hat + 2.0) * (self.alpha_hat + 2.0)) * self.first_order.std_error
        } else {
            0.0
        }
    }

    pub fn upper_bound_std_error(&self) -> f64 {
        self.first_order.std_error
    }
}

/// Lower variance bound `4/(alpha_hat+2)^2 * first_order`; zero when the
/// ratio is flagged infinite.
pub fn theorem1_lower_bound(estimate: &DirichletEstimate) -> f64 {
    if !estimate.alpha_hat.is_finite() {
        return 0.0;
    }
    let denom = (estimate.alpha_hat + 2.0) * (estimate.alpha_hat + 2.0);
    4.0 / denom * estimate.first_order.estimate
}

/// Poincare upper bound: the first-order Dirichlet integral itself.
pub fn poincare_upper_bound(estimate: &DirichletEstimate) -> f64 {
    estimate.first_order.estimate
}

fn check_finite<F: Functional + ?Sized>(
    value: f64,
    functional: &F,
    seed: SeedSpec,
) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteValue {
            label: functional.label(),
            replication: seed.replication,
            master_seed: seed.master_seed,
            experiment: seed.experiment,
        })
    }
}

/// Estimates the first- and second-order Dirichlet integrals.
///
/// Each replication samples one process realization, one uniform integration
/// point for the first-order term and an independent uniform pair for the
/// second-order term; the uniform points carry the density weights
/// `intensity * vol(W)` and `(intensity * vol(W))^2`. This keeps every
/// replication unbiased with a single functional evaluation budget of six.
pub fn estimate_dirichlet<F: Functional + ?Sized>(
    functional: &F,
    window: &Window,
    intensity: f64,
    n_reps: u64,
    seed: SeedSpec,
) -> Result<DirichletEstimate> {
    if n_reps < 2 {
        return Err(Error::InvalidParameter("estimate_dirichlet needs n_reps >= 2".into()));
    }
    let vol = window.volume();
    let weight1 = intensity * vol;
    let weight2 = weight1 * weight1;
    let terms: Vec<(f64, f64)> = (0..n_reps)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let rep_seed = seed.with_replication(r);
            let mut rng = rep_seed.rng();
            let mut config = sample_poisson_with(window, intensity, &mut rng)?;
            let x = window.sample_uniform(&mut rng);
            let x2 = window.sample_uniform(&mut rng);
            let y2 = window.sample_uniform(&mut rng);

            let base = check_finite(functional.evaluate(&config), functional, rep_seed)?;
            config.push(&x)?;
            let f_x = check_finite(functional.evaluate(&config), functional, rep_seed)?;
            config.pop();
            let d1 = f_x - base;

            config.push(&x2)?;
            let f_a = check_finite(functional.evaluate(&config), functional, rep_seed)?;
            config.push(&y2)?;
            let f_ab = check_finite(functional.evaluate(&config), functional, rep_seed)?;
            config.pop();
            config.pop();
            config.push(&y2)?;
            let f_b = check_finite(functional.evaluate(&config), functional, rep_seed)?;
            let d2 = f_ab - f_a - f_b + base;

            Ok((weight1 * d1 * d1, weight2 * d2 * d2))
        })
        .collect::<Result<Vec<_>>>()?;

    let first: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let second: Vec<f64> = terms.iter().map(|t| t.1).collect();
    let first_order = mean_with_ci(&first, DEFAULT_CI_LEVEL)?;
    let second_order = mean_with_ci(&second, DEFAULT_CI_LEVEL)?;
    let alpha_hat = if first_order.estimate > 0.0 {
        second_order.estimate / first_order.estimate
    } else {
        f64::INFINITY
    };
    Ok(DirichletEstimate { first_order, second_order, alpha_hat })
}

/// Estimates the first-chaos lower bound `int (E[D_x F])^2 dlambda` with a
/// nested scheme: outer uniform points, an inner average of add-one costs
/// over independent realizations, and the unbiased squared-mean correction
/// `m^2 - v/n`. The total budget is split as evenly as a square allows; use
/// [`first_chaos_bound_with_split`] to control the split directly.
///
/// The estimate can legitimately sit at zero (up to noise) for functionals
/// whose add-one cost has vanishing expectation.
pub fn first_chaos_bound<F: Functional + ?Sized>(
    functional: &F,
    window: &Window,
    intensity: f64,
    n_reps: u64,
    seed: SeedSpec,
) -> Result<EstimateWithCI> {
    if n_reps < 2 {
        return Err(Error::InvalidParameter("first_chaos_bound needs n_reps >= 2".into()));
    }
    let n_outer = (n_reps as f64).sqrt().round().max(2.0) as u64;
    let n_inner = n_reps / n_outer;
    first_chaos_bound_with_split(functional, window, intensity, n_outer, n_inner, seed)
}

/// [`first_chaos_bound`] with an explicit (outer points, inner realizations)
/// split. The inner count controls the `m^2 - v/n` noise floor, so tight
/// comparisons against tiny targets want `n_inner >> n_outer`.
pub fn first_chaos_bound_with_split<F: Functional + ?Sized>(
    functional: &F,
    window: &Window,
    intensity: f64,
    n_outer: u64,
    n_inner: u64,
    seed: SeedSpec,
) -> Result<EstimateWithCI> {
    if n_outer < 2 {
        return Err(Error::InvalidParameter("first_chaos_bound needs >= 2 outer points".into()));
    }
    if n_inner < 2 {
        return Err(Error::InvalidParameter(format!(
            "first_chaos_bound: inner sample of {n_inner} < 2"
        )));
    }
    let outer_seed = seed.derive(OUTER_POINT_TAG);
    let weight = intensity * window.volume();
    let per_outer: Vec<f64> = (0..n_outer)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut point_rng = outer_seed.with_replication(i).rng();
            let x = window.sample_uniform(&mut point_rng);
            let mut costs = Vec::with_capacity(n_inner as usize);
            for j in 0..n_inner {
                let rep_seed = seed.with_replication(i * n_inner + j);
                let mut rng = rep_seed.rng();
                let mut config = sample_poisson_with(window, intensity, &mut rng)?;
                let base = check_finite(functional.evaluate(&config), functional, rep_seed)?;
                config.push(&x)?;
                let f_x = check_finite(functional.evaluate(&config), functional, rep_seed)?;
                costs.push(f_x - base);
            }
            let m = costs.iter().sum::<f64>() / costs.len() as f64;
            let v = sample_variance(&costs);
            Ok(m * m - v / costs.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut est = mean_with_ci(&per_outer, DEFAULT_CI_LEVEL)?;
    est.estimate *= weight;
    est.std_error *= weight;
    est.ci_lo *= weight;
    est.ci_hi *= weight;
    est.n_reps = n_outer * n_inner;
    Ok(est)
}

/// Sample variance of i.i.d. functional replications with a percentile
/// bootstrap CI (1000 resamples).
pub fn estimate_variance<F: Functional + ?Sized>(
    functional: &F,
    window: &Window,
    intensity: f64,
    n_reps: u64,
    seed: SeedSpec,
) -> Result<EstimateWithCI> {
    let values = replicate(functional, window, intensity, n_reps, seed)?;
    let mut rng = seed.derive(BOOTSTRAP_TAG).rng();
    bootstrap_statistic(&values, sample_variance, BOOTSTRAP_RESAMPLES, DEFAULT_CI_LEVEL, &mut rng)
}

/// Evaluates `functional` on `n_reps` independent realizations.
pub fn replicate<F: Functional + ?Sized>(
    functional: &F,
    window: &Window,
    intensity: f64,
    n_reps: u64,
    seed: SeedSpec,
) -> Result<Vec<f64>> {
    if n_reps < 2 {
        return Err(Error::InvalidParameter("need n_reps >= 2".into()));
    }
    (0..n_reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let rep_seed = seed.with_replication(r);
            let mut rng = rep_seed.rng();
            let config = sample_poisson_with(window, intensity, &mut rng)?;
            check_finite(functional.evaluate(&config), functional, rep_seed)
        })
        .collect()
}

/// Sample covariance matrix of several functionals over shared replications,
/// with a bootstrap CI for the smallest eigenvalue.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub min_eigenvalue: EstimateWithCI,
    /// True when the bootstrap CI for the smallest eigenvalue excludes zero
    /// from below.
    pub positive_definite: bool,
}

pub fn estimate_covariance(
    functionals: &[&dyn Functional],
    window: &Window,
    intensity: f64,
    n_reps: u64,
    seed: SeedSpec,
) -> Result<CovarianceEstimate> {
    if functionals.len() < 2 {
        return Err(Error::InvalidParameter("estimate_covariance needs >= 2 functionals".into()));
    }
    if n_reps < 2 {
        return Err(Error::InvalidParameter("estimate_covariance needs n_reps >= 2".into()));
    }
    let m = functionals.len();
    let rows: Vec<Vec<f64>> = (0..n_reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let rep_seed = seed.with_replication(r);
            let mut rng = rep_seed.rng();
            let config = sample_poisson_with(window, intensity, &mut rng)?;
            functionals
                .iter()
                .map(|f| check_finite(f.evaluate(&config), *f, rep_seed))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let matrix = covariance_matrix(&rows, m);
    let point = min_symmetric_eigenvalue(&matrix);

    // Bootstrap over replications (rows).
    let mut rng = seed.derive(BOOTSTRAP_TAG).rng();
    let mut eigs = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resampled: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for _ in 0..BOOTSTRAP_RESAMPLES {
        resampled.clear();
        for _ in 0..rows.len() {
            resampled.push(rows[rng.random_range(0..rows.len())].clone());
        }
        eigs.push(min_symmetric_eigenvalue(&covariance_matrix(&resampled, m)));
    }
    eigs.sort_by(|a, b| a.total_cmp(b));
    let mean = eigs.iter().sum::<f64>() / eigs.len() as f64;
    let sd = (eigs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
        / (eigs.len() - 1) as f64)
        .sqrt();
    let alpha = (1.0 - DEFAULT_CI_LEVEL) / 2.0;
    let lo = eigs[((alpha * (eigs.len() - 1) as f64).round()) as usize];
    let hi = eigs[(((1.0 - alpha) * (eigs.len() - 1) as f64).round()) as usize];
    let min_eigenvalue = EstimateWithCI {
        estimate: point,
        std_error: sd,
        n_reps,
        ci_level: DEFAULT_CI_LEVEL,
        ci_lo: lo,
        ci_hi: hi,
    };
    Ok(CovarianceEstimate {
        labels: functionals.iter().map(|f| f.label()).collect(),
        matrix,
        positive_definite: min_eigenvalue.ci_lo > 0.0,
        min_eigenvalue,
    })
}

fn covariance_matrix(rows: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let mut means = vec![0.0; m];
    for row in rows {
        for (mean, v) in means.iter_mut().zip(row) {
            *mean += v;
        }
    }
    for mean in &mut means {
        *mean /= n;
    }
    let mut cov = vec![vec![0.0; m]; m];
    for row in rows {
        for i in 0..m {
            let di = row[i] - means[i];
            for j in i..m {
                cov[i][j] += di * (row[j] - means[j]);
            }
        }
    }
    for i in 0..m {
        for j in i..m {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    cov
}

fn min_symmetric_eigenvalue(matrix: &[Vec<f64>]) -> f64 {
    let m = matrix.len();
    let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
    let mat = nalgebra::DMatrix::from_row_slice(m, m, &flat);
    mat.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

// Re-exported here because scaling checks always run on variance estimates
// produced by this module.
pub use crate::stats::{scaling_regression, LogLogFit};
