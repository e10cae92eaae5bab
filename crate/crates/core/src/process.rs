//! Point configurations, sampling windows and the seeded randomness contract.
//!
//! Every estimator in this crate consumes a [`SeedSpec`]; two runs with the
//! same spec produce bit-identical samples, and distinct
//! `(master_seed, experiment, replication)` triples yield independent streams.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// A finite multiset of points in `R^d`, stored in insertion order.
///
/// Coordinates are stored flat (`dim * len` values); duplicates are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct PointConfiguration {
    dim: usize,
    coords: Vec<f64>,
}

impl PointConfiguration {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim, coords: Vec::new() }
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut config = Self::new(dim);
        for p in points {
            config.push(p.as_ref())?;
        }
        Ok(config)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Appends a point. `push` followed by `pop` restores the configuration
    /// bit-exactly.
    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        self.coords.extend_from_slice(x);
        Ok(())
    }

    /// Removes the most recently added point.
    pub fn pop(&mut self) {
        let n = self.coords.len();
        if n >= self.dim {
            self.coords.truncate(n - self.dim);
        }
    }

    /// Returns a new configuration equal to `self` plus `extra`; `self` is
    /// not modified. Multiset semantics: repeated points are kept.
    pub fn with_points<P: AsRef<[f64]>>(&self, extra: &[P]) -> Result<Self> {
        let mut out = self.clone();
        for p in extra {
            out.push(p.as_ref())?;
        }
        Ok(out)
    }
}

/// Returns a configuration equal to `config` plus the extra points.
pub fn add_points<P: AsRef<[f64]>>(
    config: &PointConfiguration,
    extra: &[P],
) -> Result<PointConfiguration> {
    config.with_points(extra)
}

/// Sampling region: an axis-aligned box or a Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub enum Window {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Window {
    /// Axis box `[lo, hi]` in each coordinate.
    pub fn axis_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParameter("box corners must share a positive dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("box must satisfy lo < hi on every axis".into()));
        }
        Ok(Window::Box { lo, hi })
    }

    /// The unit cube `[0,1]^d`.
    pub fn unit_cube(dim: usize) -> Self {
        Window::Box { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter("ball needs dim >= 1 and finite radius > 0".into()));
        }
        Ok(Window::Ball { center, radius })
    }

    /// Ball of radius `r` centred at the origin.
    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(vec![0.0; dim], radius)
    }

    pub fn dim(&self) -> usize {
        match self {
            Window::Box { lo, .. } => lo.len(),
            Window::Ball { center, .. } => center.len(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Window::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Window::Ball { center, radius } => ball_volume(center.len(), *radius).unwrap(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Window::Box { lo, hi } => {
                x.len() == lo.len()
                    && x.iter().zip(lo).all(|(v, a)| v >= a)
                    && x.iter().zip(hi).all(|(v, b)| v <= b)
            }
            Window::Ball { center, radius } => {
                x.len() == center.len() && {
                    let d2: f64 = x.iter().zip(center).map(|(v, c)| (v - c) * (v - c)).sum();
                    d2 <= radius * radius
                }
            }
        }
    }

    /// One point uniform in the window. Balls are sampled by rejection from
    /// the bounding box, which is exact.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Window::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&a, &b)| rng.random_range(a..b))
                .collect(),
            Window::Ball { center, radius } => loop {
                let candidate: Vec<f64> = center
                    .iter()
                    .map(|&c| rng.random_range(c - radius..c + radius))
                    .collect();
                let d2: f64 = candidate
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c) * (v - c))
                    .sum();
                if d2 <= radius * radius {
                    return candidate;
                }
            },
        }
    }
}

/// Volume of the `d`-dimensional ball of radius `r`.
///
/// The unit-ball volume is computed by the recurrence
/// `kappa_d = 2 pi / d * kappa_{d-2}` with `kappa_0 = 1`, `kappa_1 = 2`.
pub fn ball_volume(dim: usize, radius: f64) -> Result<f64> {
    if dim == 0 {
        return Err(Error::InvalidParameter("ball dimension must be >= 1".into()));
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be >= 0, got {radius}")));
    }
    Ok(unit_ball_volume(dim) * radius.powi(dim as i32))
}

pub fn unit_ball_volume(dim: usize) -> f64 {
    let mut kappa = if dim % 2 == 0 { 1.0 } else { 2.0 };
    let mut d = if dim % 2 == 0 { 0 } else { 1 };
    while d < dim {
        d += 2;
        kappa *= 2.0 * std::f64::consts::PI / d as f64;
    }
    kappa
}

/// Identifies one independent random stream.
///
/// `experiment` separates estimators that must not share randomness;
/// `replication` indexes i.i.d. repetitions inside one estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    #[serde(default)]
    pub experiment: u64,
    #[serde(default)]
    pub replication: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, experiment: u64) -> Self {
        Self { master_seed, experiment, replication: 0 }
    }

    pub fn with_replication(self, replication: u64) -> Self {
        Self { replication, ..self }
    }

    /// Derives an unrelated child stream; used to split one seed into
    /// per-estimator streams without coordination.
    pub fn derive(self, tag: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            experiment: splitmix64(self.experiment ^ splitmix64(tag)),
            replication: 0,
        }
    }

    /// Counter-style stream construction: the three indices are mixed into a
    /// 256-bit ChaCha key, so distinct specs give independent streams and the
    /// mapping is stateless.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&splitmix64(self.master_seed).to_le_bytes());
        key[8..16].copy_from_slice(&splitmix64(self.experiment).to_le_bytes());
        key[16..24].copy_from_slice(&splitmix64(self.replication).to_le_bytes());
        key[24..32].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
        ChaCha12Rng::from_seed(key)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Samples a homogeneous Poisson process on `window` with the given
/// intensity: the count is Poisson(intensity * volume), point locations are
/// i.i.d. uniform. Deterministic given the seed.
pub fn sample_poisson(
    window: &Window,
    intensity: f64,
    seed: SeedSpec,
) -> Result<PointConfiguration> {
    let mut rng = seed.rng();
    sample_poisson_with(window, intensity, &mut rng)
}

/// Same as [`sample_poisson`], drawing from a caller-owned stream so that one
/// replication can interleave process samples with other draws.
pub fn sample_poisson_with<R: Rng>(
    window: &Window,
    intensity: f64,
    rng: &mut R,
) -> Result<PointConfiguration> {
    if !intensity.is_finite() || intensity <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "intensity must be finite and positive, got {intensity}"
        )));
    }
    let mean = intensity * window.volume();
    let count = Poisson::new(mean)
        .map_err(|e| Error::InvalidParameter(format!("Poisson({mean}): {e}")))?
        .sample(rng) as usize;
    let mut config = PointConfiguration::new(window.dim());
    for _ in 0..count {
        let p = window.sample_uniform(rng);
        config.push(&p).expect("window dimension matches configuration");
    }
    Ok(config)
}

/// Writes a point set as CSV with header `x1,...,xd`, one row per point.
/// Numbers carry 17 significant digits so the file round-trips bit-exactly.
pub fn write_points_csv<W: Write>(mut out: W, config: &PointConfiguration) -> Result<()> {
    let header: Vec<String> = (1..=config.dim()).map(|i| format!("x{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for p in config.iter() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_points_csv<P: AsRef<Path>>(path: P) -> Result<PointConfiguration> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or(Error::Parse { line: 1, msg: "empty file".into() })??;
    let dim = header.split(',').count();
    let mut config = PointConfiguration::new(dim);
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut point = Vec::with_capacity(dim);
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| Error::Parse {
                line: idx + 2,
                msg: format!("bad coordinate `{field}`: {e}"),
            })?;
            point.push(v);
        }
        if point.len() != dim {
            return Err(Error::Parse {
                line: idx + 2,
                msg: format!("expected {dim} columns, got {}", point.len()),
            });
        }
        config.push(&point)?;
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_volume_closed_forms() {
        assert!((ball_volume(2, 1.0).unwrap() - PI).abs() < 1e-14);
        assert!((ball_volume(3, 1.0).unwrap() - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((ball_volume(1, 2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((ball_volume(4, 1.0).unwrap() - PI * PI / 2.0).abs() < 1e-14);
        assert!(ball_volume(2, -1.0).is_err());
        assert!(ball_volume(0, 1.0).is_err());
    }

    #[test]
    fn add_then_pop_is_bitwise_identity() {
        let mut config =
            PointConfiguration::from_points(2, &[[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let before = config.clone();
        config.push(&[0.5, 0.6]).unwrap();
        config.pop();
        assert_eq!(config, before);
    }

    #[test]
    fn add_points_multiset_semantics() {
        let empty = PointConfiguration::new(2);
        let one = add_points(&empty, &[[1.0, 0.0]]).unwrap();
        assert_eq!(one.len(), 1);

        let base = PointConfiguration::from_points(2, &[[0.0, 0.0]]).unwrap();
        let tripled = add_points(&base, &[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(tripled.len(), 3);
        assert_eq!(tripled.point(1), tripled.point(2));

        let unchanged = add_points(&base, &[] as &[[f64; 2]]).unwrap();
        assert_eq!(unchanged, base);

        assert!(base.with_points(&[[1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn sample_poisson_rejects_bad_intensity() {
        let w = Window::unit_cube(2);
        assert!(sample_poisson(&w, f64::NAN, SeedSpec::new(1, 0)).is_err());
        assert!(sample_poisson(&w, f64::INFINITY, SeedSpec::new(1, 0)).is_err());
        assert!(sample_poisson(&w, 0.0, SeedSpec::new(1, 0)).is_err());
    }

    #[test]
    fn vanishing_intensity_gives_empty_configuration() {
        let w = Window::unit_cube(2);
        let c = sample_poisson(&w, 1e-12, SeedSpec::new(7, 0)).unwrap();
        assert_eq!(c.len(), 0);
    }

    #[test]
    fn poisson_count_mean_and_variance() {
        let w = Window::unit_cube(2);
        let n_reps = 20_000u64;
        let mut counts = Vec::with_capacity(n_reps as usize);
        for r in 0..n_reps {
            let seed = SeedSpec::new(11, 0).with_replication(r);
            counts.push(sample_poisson(&w, 100.0, seed).unwrap().len() as f64);
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
            / (counts.len() - 1) as f64;
        // Poisson(100): mean = var = 100; SE(mean) ~ 10/sqrt(n), SE(var) ~ 1.2.
        assert!((mean - 100.0).abs() < 3.0 * 10.0 / (n_reps as f64).sqrt(), "mean={mean}");
        assert!((var - 100.0).abs() < 5.0, "var={var}");
    }

    #[test]
    fn ball_sampling_mean_count_matches_analytic() {
        // Ball B^2(0,1), intensity 50: mean count 50*pi.
        let w = Window::centered_ball(2, 1.0).unwrap();
        let n_reps = 20_000u64;
        let mut total = 0usize;
        for r in 0..n_reps {
            let seed = SeedSpec::new(3, 1).with_replication(r);
            let c = sample_poisson(&w, 50.0, seed).unwrap();
            assert!(c.iter().all(|p| w.contains(p)));
            total += c.len();
        }
        let mean = total as f64 / n_reps as f64;
        let expected = 50.0 * PI;
        let se = (expected / n_reps as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean={mean} expected={expected}");
    }

    #[test]
    fn identical_seeds_reproduce_bit_identical_configurations() {
        let w = Window::centered_ball(3, 2.0).unwrap();
        let seed = SeedSpec::new(99, 4).with_replication(17);
        let a = sample_poisson(&w, 10.0, seed).unwrap();
        let b = sample_poisson(&w, 10.0, seed).unwrap();
        assert_eq!(a, b);
        let c = sample_poisson(&w, 10.0, seed.with_replication(18)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn chi_squared_goodness_of_fit_against_poisson() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let w = Window::unit_cube(2);
        let intensity = 5.0;
        let n_reps = 100_000u64;
        let mut histogram = std::collections::HashMap::<usize, u64>::new();
        for r in 0..n_reps {
            let seed = SeedSpec::new(21, 2).with_replication(r);
            let n = sample_poisson(&w, intensity, seed).unwrap().len();
            *histogram.entry(n).or_insert(0) += 1;
        }
        // Bin k = 0..=14, merge the upper tail; expected counts all >= 5.
        let lambda: f64 = intensity;
        let pmf = |k: usize| {
            let lnp = -lambda + k as f64 * lambda.ln()
                - (1..=k).map(|i| (i as f64).ln()).sum::<f64>();
            lnp.exp()
        };
        let k_max = 14usize;
        let mut chi2 = 0.0;
        let mut tail_obs = 0.0;
        let mut tail_exp = n_reps as f64;
        for k in 0..=k_max {
            let expected = n_reps as f64 * pmf(k);
            tail_exp -= expected;
            let observed = *histogram.get(&k).unwrap_or(&0) as f64;
            chi2 += (observed - expected) * (observed - expected) / expected;
        }
        for (k, count) in &histogram {
            if *k > k_max {
                tail_obs += *count as f64;
            }
        }
        chi2 += (tail_obs - tail_exp) * (tail_obs - tail_exp) / tail_exp;
        let df = (k_max + 1) as f64; // k_max + 2 bins - 1
        let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2={chi2} critical={critical}");
    }

    #[test]
    fn disjoint_subbox_counts_are_uncorrelated() {
        let w = Window::unit_cube(2);
        let box_a = Window::axis_box(vec![0.0, 0.0], vec![0.4, 0.4]).unwrap();
        let box_b = Window::axis_box(vec![0.6, 0.6], vec![1.0, 1.0]).unwrap();
        let n_reps = 20_000u64;
        let mut counts = Vec::with_capacity(n_reps as usize);
        for r in 0..n_reps {
            let seed = SeedSpec::new(5, 3).with_replication(r);
            let c = sample_poisson(&w, 60.0, seed).unwrap();
            let a = c.iter().filter(|p| box_a.contains(p)).count() as f64;
            let b = c.iter().filter(|p| box_b.contains(p)).count() as f64;
            counts.push((a, b));
        }
        let n = counts.len() as f64;
        let mean_a = counts.iter().map(|(a, _)| a).sum::<f64>() / n;
        let mean_b = counts.iter().map(|(_, b)| b).sum::<f64>() / n;
        // Sub-box count ~ Poisson(intensity * vol(B)).
        let exp_a = 60.0 * 0.16;
        assert!((mean_a - exp_a).abs() < 3.0 * (exp_a / n).sqrt());
        let mut cov = 0.0;
        let mut var_a = 0.0;
        let mut var_b = 0.0;
        for (a, b) in &counts {
            cov += (a - mean_a) * (b - mean_b);
            var_a += (a - mean_a) * (a - mean_a);
            var_b += (b - mean_b) * (b - mean_b);
        }
        let corr = cov / (var_a.sqrt() * var_b.sqrt());
        assert!(corr.abs() < 3.0 / n.sqrt(), "corr={corr}");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let seed = SeedSpec::new(1234, 9);
        let config =
            sample_poisson(&Window::centered_ball(3, 1.5).unwrap(), 20.0, seed).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &config).unwrap();
        let dir = std::env::temp_dir().join(format!("pvlab-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("points.csv");
        std::fs::write(&path, &buf).unwrap();
        let back = read_points_csv(&path).unwrap();
        assert_eq!(config, back);
        std::fs::remove_file(&path).ok();
    }
}
