//! Experiment implementations behind `pvlab run`.

use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use pvlab_core::malliavin::{
    estimate_covariance, estimate_dirichlet, estimate_variance, Functional, Scaled,
};
use pvlab_core::polytope::{
    check_lemma43, convex_hull, delta_p, lp_surface_area, random_admissible_simplex,
    visible_facets, SimplexCheck, SimplexUpdate,
};
use pvlab_core::process::{sample_poisson_with, SeedSpec, Window};
use pvlab_core::registry::{build_family, FunctionalFamily};
use pvlab_core::stats::{scaling_regression, EstimatorRecord};
use rand::Rng;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::report::{
    write_case_csv, write_grid_csv, write_summary, GridRow, RuleResult, Summary,
};

/// Stream tags separating the estimators that share one grid point.
mod tag {
    pub const VARIANCE: u64 = 1;
    pub const DIRICHLET: u64 = 2;
    pub const COVARIANCE: u64 = 3;
}

fn grid_seed(base: SeedSpec, grid_index: usize, role: u64) -> SeedSpec {
    base.derive((grid_index as u64) << 3 | role)
}

pub struct RunOutcome {
    pub pass: bool,
    pub summary: Summary,
}

/// Runs the configured experiment and writes both result files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let started = Instant::now();
    let mut summary = match config.experiment {
        ExperimentKind::Sandwich => run_sandwich(config)?,
        ExperimentKind::Scaling
        | ExperimentKind::PolytopeScaling
        | ExperimentKind::ShotnoiseScaling => run_scaling(config)?,
        ExperimentKind::Covariance => run_covariance(config)?,
        ExperimentKind::Lemma43Sweep => run_lemma43_sweep(config)?,
        ExperimentKind::DeltaConsistency => run_delta_consistency(config)?,
    };
    summary.wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
    summary.pass = summary.rules.iter().all(|r| r.pass);
    write_summary(&config.output.summary, &summary)?;
    Ok(RunOutcome { pass: summary.pass, summary })
}

fn family_of(config: &ExperimentConfig) -> Result<Box<dyn FunctionalFamily>> {
    let functional = config
        .functional
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a `functional` entry"))?;
    build_family(functional).map_err(|e| anyhow!("{e}"))
}

fn base_summary(config: &ExperimentConfig) -> Summary {
    Summary {
        experiment: config.experiment.as_str().into(),
        functionals: Vec::new(),
        s_grid: config.s_grid.clone(),
        n_reps: config.n_reps,
        master_seed: config.seed.master_seed,
        slope: None,
        slope_std_error: None,
        intercept: None,
        rules: Vec::new(),
        pass: false,
        wall_time_ms: 0.0,
        extra: serde_json::json!({}),
    }
}

fn run_sandwich(config: &ExperimentConfig) -> Result<Summary> {
    let family = family_of(config)?;
    let seed = config.seed.spec();
    let mut summary = base_summary(config);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (i, &s) in config.s_grid.iter().enumerate() {
        let instance = family.instance(s).map_err(|e| anyhow!("{e}"))?;
        let functional = instance.functional;
        if summary.functionals.is_empty() {
            summary.functionals.push(functional.label());
        }
        let var_seed = grid_seed(seed, i, tag::VARIANCE);
        let var_started = Instant::now();
        let var = estimate_variance(
            &functional,
            &instance.window,
            instance.intensity,
            config.n_reps,
            var_seed,
        )?;
        records.push(EstimatorRecord {
            label: format!("Var[{}]", functional.label()),
            estimate: var,
            seed: var_seed,
            wall_time_ms: var_started.elapsed().as_secs_f64() * 1e3,
        });
        let dirichlet_seed = grid_seed(seed, i, tag::DIRICHLET);
        let dirichlet_started = Instant::now();
        let dirichlet = estimate_dirichlet(
            &functional,
            &instance.window,
            instance.intensity,
            config.n_reps,
            dirichlet_seed,
        )?;
        let dirichlet_ms = dirichlet_started.elapsed().as_secs_f64() * 1e3;
        records.push(EstimatorRecord {
            label: format!("Dirichlet1[{}]", functional.label()),
            estimate: dirichlet.first_order,
            seed: dirichlet_seed,
            wall_time_ms: dirichlet_ms,
        });
        records.push(EstimatorRecord {
            label: format!("Dirichlet2[{}]", functional.label()),
            estimate: dirichlet.second_order,
            seed: dirichlet_seed,
            wall_time_ms: dirichlet_ms,
        });
        let lower = dirichlet.lower_bound();
        let upper = dirichlet.upper_bound();
        let lower_slack = 3.0 * (dirichlet.lower_bound_std_error() + var.std_error);
        let upper_slack = 3.0 * (dirichlet.upper_bound_std_error() + var.std_error);
        summary.rules.push(RuleResult::new(
            format!("lower-bound<=variance@s={s}"),
            lower <= var.estimate + lower_slack,
            format!("lower={lower:.6e} variance={:.6e} slack={lower_slack:.3e}", var.estimate),
        ));
        summary.rules.push(RuleResult::new(
            format!("variance<=upper-bound@s={s}"),
            var.estimate <= upper + upper_slack,
            format!("variance={:.6e} upper={upper:.6e} slack={upper_slack:.3e}", var.estimate),
        ));
        rows.push(GridRow {
            s,
            variance: var.estimate,
            var_ci_lo: var.ci_lo,
            var_ci_hi: var.ci_hi,
            lower_bound: lower,
            upper_bound: upper,
            alpha_hat: dirichlet.alpha_hat,
            n_reps: config.n_reps,
            seed: config.seed.master_seed,
        });
    }
    write_grid_csv(&config.output.csv, &rows)?;
    summary.extra = serde_json::json!({ "estimates": records });
    Ok(summary)
}

fn run_scaling(config: &ExperimentConfig) -> Result<Summary> {
    let family = family_of(config)?;
    let seed = config.seed.spec();
    let mut summary = base_summary(config);
    summary.functionals.push(family.name());
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (i, &s) in config.s_grid.iter().enumerate() {
        let (variance, ci_lo, ci_hi, reps) = match family.synthetic_variance(s) {
            Some(v) => (v, v, v, 0),
            None => {
                let instance = family.instance(s).map_err(|e| anyhow!("{e}"))?;
                let var = estimate_variance(
                    &instance.functional,
                    &instance.window,
                    instance.intensity,
                    config.n_reps,
                    grid_seed(seed, i, tag::VARIANCE),
                )?;
                (var.estimate, var.ci_lo, var.ci_hi, config.n_reps)
            }
        };
        pairs.push((s, variance));
        rows.push(GridRow {
            s,
            variance,
            var_ci_lo: ci_lo,
            var_ci_hi: ci_hi,
            lower_bound: f64::NAN,
            upper_bound: f64::NAN,
            alpha_hat: f64::NAN,
            n_reps: reps,
            seed: config.seed.master_seed,
        });
    }
    write_grid_csv(&config.output.csv, &rows)?;

    if config.s_grid.len() >= 3 {
        let fit = scaling_regression(&pairs)?;
        summary.slope = Some(fit.slope);
        summary.slope_std_error = Some(fit.slope_std_error);
        summary.intercept = Some(fit.intercept);
        if let Some(rule) = &config.slope_rule {
            let ok = (fit.slope - rule.target).abs() <= rule.tol;
            summary.rules.push(RuleResult::new(
                "slope-in-range",
                ok,
                format!("slope={:.4} target={} tol={}", fit.slope, rule.target, rule.tol),
            ));
        }
    }
    if let Some(rule) = &config.positivity_rule {
        let min_scaled = rows
            .iter()
            .map(|r| r.var_ci_lo / r.s.powf(rule.rate))
            .fold(f64::INFINITY, f64::min);
        summary.rules.push(RuleResult::new(
            "variance-ci-positive",
            min_scaled > 0.0,
            format!("min var_ci_lo/s^{} = {min_scaled:.6e}", rule.rate),
        ));
    }
    Ok(summary)
}

fn run_covariance(config: &ExperimentConfig) -> Result<Summary> {
    let seed = config.seed.spec();
    let mut summary = base_summary(config);
    let mut rows = Vec::new();
    let mut extras = Vec::new();
    for (i, &s) in config.s_grid.iter().enumerate() {
        let mut functionals: Vec<Box<dyn Functional>> = Vec::new();
        let mut window: Option<Window> = None;
        let mut intensity = s;
        for fc in &config.functionals {
            let family = build_family(fc).map_err(|e| anyhow!("{e}"))?;
            let instance = family.instance(s).map_err(|e| anyhow!("{e}"))?;
            match &window {
                None => window = Some(instance.window.clone()),
                Some(w) => {
                    if *w != instance.window {
                        bail!("covariance functionals must share one sampling window");
                    }
                }
            }
            intensity = instance.intensity;
            if config.scale_by_inv_sqrt_s {
                functionals.push(Box::new(Scaled {
                    inner: instance.functional,
                    factor: s.powf(-0.5),
                }));
            } else {
                functionals.push(instance.functional);
            }
        }
        if summary.functionals.is_empty() {
            summary.functionals = functionals.iter().map(|f| f.label()).collect();
        }
        let refs: Vec<&dyn Functional> = functionals.iter().map(|f| f.as_ref()).collect();
        let window = window.expect("at least two functionals");
        let est = estimate_covariance(
            &refs,
            &window,
            intensity,
            config.n_reps,
            grid_seed(seed, i, tag::COVARIANCE),
        )?;
        summary.rules.push(RuleResult::new(
            format!("min-eigenvalue-positive@s={s}"),
            est.positive_definite,
            format!(
                "min_eig={:.6e} ci=({:.6e}, {:.6e})",
                est.min_eigenvalue.estimate, est.min_eigenvalue.ci_lo, est.min_eigenvalue.ci_hi
            ),
        ));
        rows.push(GridRow {
            s,
            variance: est.min_eigenvalue.estimate,
            var_ci_lo: est.min_eigenvalue.ci_lo,
            var_ci_hi: est.min_eigenvalue.ci_hi,
            lower_bound: f64::NAN,
            upper_bound: f64::NAN,
            alpha_hat: f64::NAN,
            n_reps: config.n_reps,
            seed: config.seed.master_seed,
        });
        extras.push(serde_json::json!({
            "s": s,
            "labels": est.labels,
            "matrix": est.matrix,
            "min_eigenvalue": est.min_eigenvalue,
        }));
    }
    write_grid_csv(&config.output.csv, &rows)?;
    summary.extra = serde_json::json!({ "covariance": extras });
    Ok(summary)
}

const P_SWEEP: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const SLACK_FLOOR: f64 = -1e-9;

fn run_lemma43_sweep(config: &ExperimentConfig) -> Result<Summary> {
    let mut summary = base_summary(config);
    summary.functionals.push(format!("simplex-update(d={})", config.dim));
    let mut rng = config.seed.spec().rng();
    let mut rows = Vec::new();
    let mut global_min = f64::INFINITY;
    for case in 0..config.n_cases {
        let update = loop {
            if let Some(u) = random_admissible_simplex(config.dim, &mut rng) {
                break u;
            }
        };
        let mut min_magnitude = f64::INFINITY;
        let mut min_difference = f64::INFINITY;
        for &p in &P_SWEEP {
            for (a, &p1) in P_SWEEP.iter().enumerate() {
                for &p2 in &P_SWEEP[a + 1..] {
                    match check_lemma43(&update, p, p1, p2) {
                        SimplexCheck::Evaluated { slack_magnitude, slack_difference } => {
                            min_magnitude = min_magnitude.min(slack_magnitude);
                            min_difference = min_difference.min(slack_difference);
                        }
                        SimplexCheck::Skipped { reason } => {
                            bail!("admissible generator produced a skip: {reason}")
                        }
                    }
                }
            }
        }
        global_min = global_min.min(min_magnitude).min(min_difference);
        rows.push(vec![case as f64, min_magnitude, min_difference]);
    }
    write_case_csv(
        &config.output.csv,
        "case,min_slack_magnitude,min_slack_difference",
        &rows,
    )?;
    summary.rules.push(RuleResult::new(
        "slacks-above-floor",
        global_min >= SLACK_FLOOR,
        format!("min slack {global_min:.3e} over {} cases, floor {SLACK_FLOOR:.0e}", config.n_cases),
    ));
    Ok(summary)
}

const DELTA_TOLERANCE: f64 = 1e-10;

/// Samples a hull and an apex that sees exactly one facet; compares the
/// update formula against recomputing the hull from scratch.
pub fn single_visible_facet_case<R: Rng>(
    dim: usize,
    rng: &mut R,
) -> Result<(pvlab_core::PointConfiguration, SimplexUpdate)> {
    let window = Window::centered_ball(dim, 1.0).map_err(|e| anyhow!("{e}"))?;
    'outer: for _ in 0..100 {
        let mut config = sample_poisson_with(&window, 60.0, rng)?;
        config.push(&vec![0.0; dim])?;
        let Ok(hull) = convex_hull(&config) else { continue };
        let facet_index = rng.random_range(0..hull.facets.len());
        let facet = &hull.facets[facet_index];
        let centroid: Vec<f64> = (0..dim)
            .map(|a| {
                facet.ids.iter().map(|&id| config.point(id)[a]).sum::<f64>() / dim as f64
            })
            .collect();
        for height in [0.05, 0.02, 0.008, 0.003] {
            let apex: Vec<f64> = {
                // Push outward along the facet normal.
                let probe: Vec<f64> = centroid.clone();
                let normal_dist =
                    pvlab_core::polytope::facet_signed_distance(&config, facet, &probe);
                debug_assert!(normal_dist.abs() < 1e-9);
                // Build the outward normal by finite displacement.
                let mut n = vec![0.0; dim];
                for (a, slot) in n.iter_mut().enumerate() {
                    let mut shifted = centroid.clone();
                    shifted[a] += 1.0;
                    *slot =
                        pvlab_core::polytope::facet_signed_distance(&config, facet, &shifted)
                            - normal_dist;
                }
                centroid.iter().zip(&n).map(|(c, ni)| c + height * ni).collect()
            };
            let visible = visible_facets(&config, &hull, &apex);
            if visible == vec![facet_index] {
                let base: Vec<Vec<f64>> =
                    facet.ids.iter().map(|&id| config.point(id).to_vec()).collect();
                if let Ok(update) = SimplexUpdate::new(&base, &apex) {
                    return Ok((config, update));
                }
                continue 'outer;
            }
        }
    }
    bail!("no single-visible-facet case found in 100 draws")
}

fn run_delta_consistency(config: &ExperimentConfig) -> Result<Summary> {
    let mut summary = base_summary(config);
    summary.functionals.push(format!("delta-consistency(d={})", config.dim));
    let mut rng = config.seed.spec().rng();
    let mut rows = Vec::new();
    let mut max_error = 0.0f64;
    for case in 0..config.n_cases {
        let (config_points, update) = single_visible_facet_case(config.dim, &mut rng)?;
        let hull = convex_hull(&config_points).map_err(|e| anyhow!("{e}"))?;
        let extended = config_points
            .with_points(&[update.apex.clone()])
            .map_err(|e| anyhow!("{e}"))?;
        let new_hull = convex_hull(&extended).map_err(|e| anyhow!("{e}"))?;
        for &p in &P_SWEEP {
            let direct = lp_surface_area(&new_hull, p) - lp_surface_area(&hull, p);
            let error = (delta_p(&update, p) - direct).abs();
            max_error = max_error.max(error);
            rows.push(vec![case as f64, p, error]);
        }
    }
    write_case_csv(&config.output.csv, "case,p,abs_error", &rows)?;
    summary.rules.push(RuleResult::new(
        "update-matches-recomputation",
        max_error <= DELTA_TOLERANCE,
        format!("max |error| = {max_error:.3e} over {} cases, tolerance {DELTA_TOLERANCE:.0e}", config.n_cases),
    ));
    Ok(summary)
}

/// Built-in config used by `pvlab selftest`.
pub const SELFTEST_CONFIG: &str = r#"{
    "experiment": "sandwich",
    "functional": {"name": "rgg-degree-count", "params": {"j": 0, "rho": 1.0, "dim": 2}},
    "s_grid": [25.0, 50.0],
    "n_reps": 400,
    "seed": {"master_seed": 20260801},
    "output": {"csv": "SELFTEST_CSV", "summary": "SELFTEST_SUMMARY"}
}"#;

/// Runs the embedded config twice and byte-compares the CSVs.
pub fn selftest(work_dir: &std::path::Path) -> Result<bool> {
    std::fs::create_dir_all(work_dir)?;
    let mut outputs = Vec::new();
    for round in 0..2 {
        let csv = work_dir.join(format!("selftest-{round}.csv"));
        let summary = work_dir.join(format!("selftest-{round}.json"));
        let text = SELFTEST_CONFIG
            .replace("SELFTEST_CSV", &csv.to_string_lossy())
            .replace("SELFTEST_SUMMARY", &summary.to_string_lossy());
        let config: ExperimentConfig =
            serde_json::from_str(&text).context("embedded selftest config")?;
        let outcome = run_experiment(&config)?;
        if !outcome.pass {
            bail!("selftest experiment failed its own sandwich rules");
        }
        outputs.push(std::fs::read(&csv)?);
    }
    Ok(outputs[0] == outputs[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SeedConfig;
    use std::path::PathBuf;

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("pvlab-exp-{}-{tag}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn output_in(dir: &std::path::Path) -> crate::config::OutputConfig {
        crate::config::OutputConfig {
            csv: dir.join("out.csv"),
            summary: dir.join("out.json"),
        }
    }

    #[test]
    fn synthetic_scaling_recovers_exact_slope() {
        let dir = temp_dir("synthetic");
        let config = ExperimentConfig {
            experiment: ExperimentKind::Scaling,
            functional: Some(pvlab_core::registry::FunctionalConfig {
                name: "synthetic-power".into(),
                params: serde_json::json!({"coeff": 7.0, "exponent": 1.0}),
            }),
            functionals: vec![],
            s_grid: vec![50.0, 100.0, 200.0, 400.0],
            n_reps: 2,
            seed: SeedConfig { master_seed: 5, experiment: 0 },
            slope_rule: Some(crate::config::SlopeRule { target: 1.0, tol: 0.05 }),
            positivity_rule: Some(crate::config::PositivityRule { rate: 1.0 }),
            scale_by_inv_sqrt_s: false,
            n_cases: 0,
            dim: 2,
            output: output_in(&dir),
        };
        let outcome = run_experiment(&config).unwrap();
        assert!(outcome.pass, "rules: {:?}", outcome.summary.rules);
        assert!((outcome.summary.slope.unwrap() - 1.0).abs() < 1e-12);
        assert!((outcome.summary.intercept.unwrap() - 7f64.ln()).abs() < 1e-12);
        let csv = std::fs::read_to_string(&config.output.csv).unwrap();
        assert!(csv.starts_with(crate::report::GRID_CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn sandwich_on_count_functional_passes() {
        let dir = temp_dir("sandwich");
        let config = ExperimentConfig {
            experiment: ExperimentKind::Sandwich,
            functional: Some(pvlab_core::registry::FunctionalConfig {
                name: "count".into(),
                params: serde_json::Value::Null,
            }),
            functionals: vec![],
            s_grid: vec![100.0],
            n_reps: 2000,
            seed: SeedConfig { master_seed: 6, experiment: 0 },
            slope_rule: None,
            positivity_rule: None,
            scale_by_inv_sqrt_s: false,
            n_cases: 0,
            dim: 2,
            output: output_in(&dir),
        };
        let outcome = run_experiment(&config).unwrap();
        assert!(outcome.pass, "rules: {:?}", outcome.summary.rules);
    }

    #[test]
    fn covariance_of_duplicated_functionals_fails() {
        let dir = temp_dir("cov-dup");
        let duplicated = pvlab_core::registry::FunctionalConfig {
            name: "count".into(),
            params: serde_json::Value::Null,
        };
        let config = ExperimentConfig {
            experiment: ExperimentKind::Covariance,
            functional: None,
            functionals: vec![duplicated.clone(), duplicated],
            s_grid: vec![50.0],
            n_reps: 500,
            seed: SeedConfig { master_seed: 7, experiment: 0 },
            slope_rule: None,
            positivity_rule: None,
            scale_by_inv_sqrt_s: false,
            n_cases: 0,
            dim: 2,
            output: output_in(&dir),
        };
        let outcome = run_experiment(&config).unwrap();
        assert!(!outcome.pass, "duplicated functionals must fail the eigenvalue rule");
    }

    #[test]
    fn geometry_sweeps_pass_quickly() {
        let dir = temp_dir("geometry");
        for (experiment, n_cases) in
            [(ExperimentKind::Lemma43Sweep, 50), (ExperimentKind::DeltaConsistency, 20)]
        {
            let config = ExperimentConfig {
                experiment,
                functional: None,
                functionals: vec![],
                s_grid: vec![],
                n_reps: 2,
                seed: SeedConfig { master_seed: 8, experiment: 0 },
                slope_rule: None,
                positivity_rule: None,
                scale_by_inv_sqrt_s: false,
                n_cases,
                dim: 2,
                output: crate::config::OutputConfig {
                    csv: dir.join(format!("{}.csv", experiment.as_str())),
                    summary: dir.join(format!("{}.json", experiment.as_str())),
                },
            };
            let outcome = run_experiment(&config).unwrap();
            assert!(outcome.pass, "{}: {:?}", experiment.as_str(), outcome.summary.rules);
        }
    }

    #[test]
    fn selftest_is_deterministic() {
        let dir = temp_dir("selftest");
        assert!(selftest(&dir).unwrap());
    }
}
