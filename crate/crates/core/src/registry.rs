//! Catalogue of built-in functionals and the config-driven families the
//! experiment runner instantiates per intensity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::{KnnDegreeCountFunctional, KnnEdgeLengthFunctional};
use crate::malliavin::{Cardinality, Functional, NonEmptyIndicator, Parity};
use crate::polytope::PolytopeFunctional;
use crate::process::Window;
use crate::rgg::{RggFunctional, RggParams, RggStatistic};
use crate::shotnoise::{shotnoise_functional, ExcursionSpec, Kernel};

/// One registered functional kind.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CatalogueEntry {
    pub name: &'static str,
    pub group: &'static str,
    pub description: &'static str,
    pub params: &'static str,
}

pub fn catalogue() -> &'static [CatalogueEntry] {
    &[
        CatalogueEntry {
            name: "count",
            group: "basic",
            description: "number of points in the window",
            params: "{dim?=2}",
        },
        CatalogueEntry {
            name: "parity",
            group: "basic",
            description: "(-1)^(number of points); first-chaos blind spot",
            params: "{dim?=2}",
        },
        CatalogueEntry {
            name: "nonempty",
            group: "basic",
            description: "indicator of at least one point",
            params: "{dim?=2}",
        },
        CatalogueEntry {
            name: "rgg-degree-count",
            group: "rgg",
            description: "vertices of degree j in the geometric graph of radius rho*s^(-1/d)",
            params: "{j, rho?=1, dim?=2}",
        },
        CatalogueEntry {
            name: "rgg-component-count",
            group: "rgg",
            description: "components of size j in the geometric graph",
            params: "{j, rho?=1, dim?=2}",
        },
        CatalogueEntry {
            name: "knn-edge-length",
            group: "knn",
            description: "edge length functional of power q of the k-nearest-neighbour graph; scaled multiplies by s^(q/d)",
            params: "{k?=1, q?=1, scaled?=true, dim?=2}",
        },
        CatalogueEntry {
            name: "knn-degree-count",
            group: "knn",
            description: "vertices of degree j in the k-nearest-neighbour graph",
            params: "{k?=1, j, dim?=2}",
        },
        CatalogueEntry {
            name: "polytope-lp-area",
            group: "polytope",
            description: "weighted surface area A_p of the hull of points in the unit ball; scale_by_s multiplies by s",
            params: "{p, dim?=2, scale_by_s?=true}",
        },
        CatalogueEntry {
            name: "shotnoise-excursion",
            group: "shotnoise",
            description: "excursion-set volume of the shot-noise field at level u on B(0, s); s is the observation radius, intensity is 1",
            params: "{kernel: {kind, ...}, level, n_nodes?=2048}",
        },
        CatalogueEntry {
            name: "synthetic-power",
            group: "synthetic",
            description: "injected variance curve coeff*s^exponent for harness self-tests",
            params: "{coeff, exponent}",
        },
    ]
}

/// Functional selector as it appears in experiment configs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionalConfig {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

/// Kernel selector for shot-noise configs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelConfig {
    PowerLaw {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "one")]
        amplitude: f64,
        exponent: f64,
    },
    CompactIndicator {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "one")]
        amplitude: f64,
        radius: f64,
    },
}

fn default_dim() -> usize {
    2
}
fn one() -> f64 {
    1.0
}

impl KernelConfig {
    pub fn build(&self) -> Result<Kernel> {
        match self {
            KernelConfig::PowerLaw { dim, amplitude, exponent } => {
                Kernel::power_law(*dim, *amplitude, *exponent)
            }
            KernelConfig::CompactIndicator { dim, amplitude, radius } => {
                Kernel::compact_indicator(*dim, *amplitude, *radius)
            }
        }
    }
}

/// A functional, its sampling window and the process intensity for one grid
/// value `s`.
pub struct FamilyInstance {
    pub functional: Box<dyn Functional>,
    pub window: Window,
    pub intensity: f64,
}

/// A family of Poisson functionals indexed by the grid parameter `s`.
pub trait FunctionalFamily: Send + Sync {
    fn instance(&self, s: f64) -> Result<FamilyInstance>;
    fn name(&self) -> String;
    /// Synthetic families inject an exact variance curve instead of
    /// sampling; real families return `None`.
    fn synthetic_variance(&self, _s: f64) -> Option<f64> {
        None
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BasicParams {
    #[serde(default = "default_dim")]
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RggCountParams {
    j: usize,
    #[serde(default = "one")]
    rho: f64,
    #[serde(default = "default_dim")]
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnEdgeParams {
    #[serde(default = "one_usize")]
    k: usize,
    #[serde(default = "one")]
    q: f64,
    #[serde(default = "default_true")]
    scaled: bool,
    #[serde(default = "default_dim")]
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnDegreeParams {
    #[serde(default = "one_usize")]
    k: usize,
    j: usize,
    #[serde(default = "default_dim")]
    dim: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolytopeParams {
    p: f64,
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default = "default_true")]
    scale_by_s: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShotNoiseParams {
    kernel: KernelConfig,
    level: f64,
    #[serde(default = "default_nodes")]
    n_nodes: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticParams {
    coeff: f64,
    exponent: f64,
}

fn one_usize() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_nodes() -> usize {
    2048
}

fn parse_params<T: serde::de::DeserializeOwned>(config: &FunctionalConfig) -> Result<T> {
    let value = if config.params.is_null() {
        serde_json::Value::Object(serde_json::Map::new())
    } else {
        config.params.clone()
    };
    serde_json::from_value(value).map_err(|e| {
        Error::InvalidParameter(format!("params of functional `{}`: {e}", config.name))
    })
}

enum BasicKind {
    Count,
    Parity,
    NonEmpty,
}

struct BasicFamily {
    kind: BasicKind,
    dim: usize,
}

impl FunctionalFamily for BasicFamily {
    fn instance(&self, s: f64) -> Result<FamilyInstance> {
        let functional: Box<dyn Functional> = match self.kind {
            BasicKind::Count => Box::new(Cardinality),
            BasicKind::Parity => Box::new(Parity),
            BasicKind::NonEmpty => Box::new(NonEmptyIndicator),
        };
        Ok(FamilyInstance { functional, window: Window::unit_cube(self.dim), intensity: s })
    }
    fn name(&self) -> String {
        match self.kind {
            BasicKind::Count => "count".into(),
            BasicKind::Parity => "parity".into(),
            BasicKind::NonEmpty => "nonempty".into(),
        }
    }
}

struct RggFamily {
    stat_is_degree: bool,
    j: usize,
    rho: f64,
    dim: usize,
}

impl FunctionalFamily for RggFamily {
    fn instance(&self, s: f64) -> Result<FamilyInstance> {
        let params = RggParams::new(self.rho, self.dim, s)?;
        let stat = if self.stat_is_degree {
            RggStatistic::DegreeCount(self.j)
        } else {
            RggStatistic::ComponentCount(self.j)
        };
        Ok(FamilyInstance {
            functional: Box::new(RggFunctional { stat, params }),
            window: Window::unit_cube(self.dim),
            intensity: s,
        })
    }
    fn name(&self) -> String {
        if self.stat_is_degree {
            format!("rgg-degree-count(j={})", self.j)
        } else {
            format!("rgg-component-count(j={})", self.j)
        }
    }
}

struct KnnEdgeFamily {
    k: usize,
    q: f64,
    scaled: bool,
    dim: usize,
}

impl FunctionalFamily for KnnEdgeFamily {
    fn instance(&self, s: f64) -> Result<FamilyInstance> {
        Ok(FamilyInstance {
            functional: Box::new(KnnEdgeLengthFunctional {
                k: self.k,
                q: self.q,
                scale_intensity: self.scaled.then_some(s),
            }),
            window: Window::unit_cube(self.dim),
            intensity: s,
        })
    }
    fn name(&self) -> String {
        format!("knn-edge-length(k={}, q={})", self.k, self.q)
    }
}

struct KnnDegreeFamily {
    k: usize,
    j: usize,
    dim: usize,
}

impl FunctionalFamily for KnnDegreeFamily {
    fn instance(&self, s: f64) -> Result<FamilyInstance> {
        Ok(FamilyInstance {
            functional: Box::new(KnnDegreeCountFunctional { k: self.k, j: self.j }),
            window: Window::unit_cube(self.dim),
            intensity: s,
        })
    }
    fn name(&self) -> String {
        format!("knn-degree-count(k={}, j={})", self.k, self.j)
    }
}

struct PolytopeFamily {
    p: f64,
    dim: usize,
    scale_by_s: bool,
}

impl FunctionalFamily for PolytopeFamily {
    fn instance(&self, s: f64) -> Result<FamilyInstance> {
        Ok(FamilyInstance {
            functional: Box::new(PolytopeFunctional::new(
                self.p,
                self.scale_by_s.then_some(s),
            )),
            window: Window::centered_ball(self.dim, 1.0)?,
            intensity: s,
        })
    }
    fn name(&self) -> String {
        format!("polytope-lp-area(p={})", self.p)
    }
}

struct ShotNoiseFamily {
    kernel: KernelConfig,
    level: f64,
    n_nodes: usize,
}

impl FunctionalFamily for ShotNoiseFamily {
    fn instance(&self, s: f64) -> Result<FamilyInstance> {
        let kernel = self.kernel.build()?;
        let dim = kernel.dim();
        let spec = ExcursionSpec::for_kernel(&kernel, self.level, s, self.n_nodes)?;
        let window = spec.sampling_window(dim);
        Ok(FamilyInstance {
            functional: Box::new(shotnoise_functional(kernel, spec)),
            window,
            intensity: 1.0,
        })
    }
    fn name(&self) -> String {
        format!("shotnoise-excursion(u={})", self.level)
    }
}

struct SyntheticFamily {
    coeff: f64,
    exponent: f64,
}

impl FunctionalFamily for SyntheticFamily {
    fn instance(&self, _s: f64) -> Result<FamilyInstance> {
        Err(Error::InvalidParameter(
            "synthetic-power has no sampling instance; it only injects variances".into(),
        ))
    }
    fn name(&self) -> String {
        format!("synthetic-power(coeff={}, exponent={})", self.coeff, self.exponent)
    }
    fn synthetic_variance(&self, s: f64) -> Option<f64> {
        Some(self.coeff * s.powf(self.exponent))
    }
}

/// Instantiates the family named in the config, or reports the nearest
/// registered name.
pub fn build_family(config: &FunctionalConfig) -> Result<Box<dyn FunctionalFamily>> {
    match config.name.as_str() {
        "count" => {
            let p: BasicParams = parse_params(config)?;
            Ok(Box::new(BasicFamily { kind: BasicKind::Count, dim: p.dim }))
        }
        "parity" => {
            let p: BasicParams = parse_params(config)?;
            Ok(Box::new(BasicFamily { kind: BasicKind::Parity, dim: p.dim }))
        }
        "nonempty" => {
            let p: BasicParams = parse_params(config)?;
            Ok(Box::new(BasicFamily { kind: BasicKind::NonEmpty, dim: p.dim }))
        }
        "rgg-degree-count" => {
            let p: RggCountParams = parse_params(config)?;
            Ok(Box::new(RggFamily { stat_is_degree: true, j: p.j, rho: p.rho, dim: p.dim }))
        }
        "rgg-component-count" => {
            let p: RggCountParams = parse_params(config)?;
            if p.j == 0 {
                return Err(Error::InvalidParameter("component size j must be >= 1".into()));
            }
            Ok(Box::new(RggFamily { stat_is_degree: false, j: p.j, rho: p.rho, dim: p.dim }))
        }
        "knn-edge-length" => {
            let p: KnnEdgeParams = parse_params(config)?;
            Ok(Box::new(KnnEdgeFamily { k: p.k, q: p.q, scaled: p.scaled, dim: p.dim }))
        }
        "knn-degree-count" => {
            let p: KnnDegreeParams = parse_params(config)?;
            Ok(Box::new(KnnDegreeFamily { k: p.k, j: p.j, dim: p.dim }))
        }
        "polytope-lp-area" => {
            let p: PolytopeParams = parse_params(config)?;
            if !(0.0..=1.0).contains(&p.p) {
                return Err(Error::InvalidParameter("p must lie in [0,1]".into()));
            }
            if !(p.dim == 2 || p.dim == 3) {
                return Err(Error::InvalidParameter("polytope dim must be 2 or 3".into()));
            }
            Ok(Box::new(PolytopeFamily { p: p.p, dim: p.dim, scale_by_s: p.scale_by_s }))
        }
        "shotnoise-excursion" => {
            let p: ShotNoiseParams = parse_params(config)?;
            p.kernel.build()?;
            Ok(Box::new(ShotNoiseFamily { kernel: p.kernel, level: p.level, n_nodes: p.n_nodes }))
        }
        "synthetic-power" => {
            let p: SyntheticParams = parse_params(config)?;
            Ok(Box::new(SyntheticFamily { coeff: p.coeff, exponent: p.exponent }))
        }
        other => {
            let suggestion = nearest_name(other)
                .map(|n| format!("; nearest match: `{n}`"))
                .unwrap_or_default();
            Err(Error::InvalidParameter(format!("unknown functional `{other}`{suggestion}")))
        }
    }
}

/// Closest catalogue name by edit distance.
pub fn nearest_name(name: &str) -> Option<&'static str> {
    catalogue()
        .iter()
        .map(|e| (levenshtein(name, e.name), e.name))
        .min_by_key(|(d, _)| *d)
        .map(|(_, n)| n)
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut previous = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = if ca == cb { 0 } else { 1 };
            let value = (previous + cost).min(row[j] + 1).min(row[j + 1] + 1);
            previous = row[j + 1];
            row[j + 1] = value;
        }
    }
    row[b.len()]
}
