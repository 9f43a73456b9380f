//! JSON run configuration.
//!
//! Parsing happens in three stages, each with its own error kind: JSON
//! syntax, schema (shape, unknown keys, value ranges) and invariants of the
//! geometry and numerics built from it. Every error names the offending key.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use pcf_core::{
    extract_corners, CornerSpec, KPath, KVertex, Lattice2D, PermittivityMap, PolygonalPartition,
    Region,
};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_BANDS: usize = 8;
pub const DEFAULT_SAMPLES: usize = 8;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invariant violation at `{path}`: {message}")]
    Invariant { path: String, message: String },
}

impl ConfigError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    fn invariant(path: impl Into<String>, message: impl ToString) -> Self {
        Self::Invariant {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    lattice: RawLattice,
    background_n2: f64,
    #[serde(default)]
    regions: Vec<RawRegion>,
    beta: f64,
    cutoff: usize,
    #[serde(default)]
    ladder: Option<Vec<usize>>,
    #[serde(default)]
    bands: Option<usize>,
    #[serde(default)]
    kpath: Option<RawKPath>,
    #[serde(default)]
    converge_points: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    field: Option<RawField>,
    #[serde(default)]
    tol: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    a1: [f64; 2],
    a2: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    polygon: Vec<[f64; 2]>,
    n2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKPath {
    vertices: Vec<RawVertex>,
    #[serde(default)]
    samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVertex {
    label: String,
    xi: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    xi: [f64; 2],
    #[serde(default)]
    band: usize,
    #[serde(default)]
    grid: Option<usize>,
}

/// Which Bloch mode the `field` command samples, and on how fine a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRequest {
    pub xi: [f64; 2],
    pub band: usize,
    pub grid: usize,
}

/// A fully validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub lattice: Lattice2D,
    pub medium: PermittivityMap,
    /// Interface corners of the partition, in extraction order.
    pub corners: Vec<CornerSpec>,
    pub beta: f64,
    pub cutoff: usize,
    pub ladder: Option<Vec<usize>>,
    pub bands: usize,
    pub kpath: KPath,
    pub converge_points: Vec<[f64; 2]>,
    pub field: FieldRequest,
    pub tol: f64,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let raw: RawConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::schema(path, e.into_inner().to_string())
    })?;
    check_schema(&raw)?;
    build(raw)
}

fn positive(path: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::schema(path, format!("must be positive and finite, got {x}")))
    }
}

fn at_least_one(path: &str, n: usize) -> Result<(), ConfigError> {
    if n == 0 {
        Err(ConfigError::schema(path, "must be at least 1"))
    } else {
        Ok(())
    }
}

/// Range checks that need no geometry.
fn check_schema(raw: &RawConfig) -> Result<(), ConfigError> {
    positive("background_n2", raw.background_n2)?;
    for (i, r) in raw.regions.iter().enumerate() {
        positive(&format!("regions[{i}].n2"), r.n2)?;
        if r.polygon.len() < 3 {
            return Err(ConfigError::schema(
                format!("regions[{i}].polygon"),
                format!("needs at least 3 vertices, got {}", r.polygon.len()),
            ));
        }
    }
    at_least_one("cutoff", raw.cutoff)?;
    if let Some(b) = raw.bands {
        at_least_one("bands", b)?;
    }
    if let Some(t) = raw.tol {
        positive("tol", t)?;
    }
    if let Some(ladder) = &raw.ladder {
        for (i, &n) in ladder.iter().enumerate() {
            at_least_one(&format!("ladder[{i}]"), n)?;
        }
    }
    if let Some(kp) = &raw.kpath {
        if kp.vertices.is_empty() {
            return Err(ConfigError::schema("kpath.vertices", "must not be empty"));
        }
        if let Some(s) = kp.samples {
            at_least_one("kpath.samples", s)?;
        }
    }
    if let Some(g) = raw.field.as_ref().and_then(|f| f.grid) {
        at_least_one("field.grid", g)?;
    }
    Ok(())
}

fn default_kpath(lat: &Lattice2D) -> KPath {
    let r = lat.reciprocal();
    let b1 = r.vector([1, 0]);
    let b2 = r.vector([0, 1]);
    let v = |label: &str, xi: [f64; 2]| KVertex {
        label: label.into(),
        xi,
    };
    let x = [0.5 * b1[0], 0.5 * b1[1]];
    let m = [0.5 * (b1[0] + b2[0]), 0.5 * (b1[1] + b2[1])];
    KPath {
        vertices: vec![v("G", [0.0, 0.0]), v("X", x), v("M", m), v("G", [0.0, 0.0])],
        samples_per_segment: DEFAULT_SAMPLES,
    }
}

fn build(raw: RawConfig) -> Result<Config, ConfigError> {
    let lattice =
        Lattice2D::new(raw.lattice.a1, raw.lattice.a2).map_err(|e| ConfigError::invariant("lattice", e))?;
    let regions = raw
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Region::new(r.polygon.clone(), r.n2).map_err(|e| ConfigError::invariant(format!("regions[{i}].polygon"), e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let partition = PolygonalPartition::new(lattice, regions, raw.background_n2)
        .map_err(|e| ConfigError::invariant("regions", e))?;
    let corners = extract_corners(&partition).map_err(|e| ConfigError::invariant("regions", e))?;
    let medium = PermittivityMap::new(partition);

    if let Some(ladder) = &raw.ladder {
        if ladder.len() < 3 {
            return Err(ConfigError::invariant("ladder", "needs at least three cutoffs"));
        }
        if let Some(i) = ladder.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ConfigError::invariant(
                format!("ladder[{}]", i + 1),
                "cutoffs must be strictly increasing",
            ));
        }
    }

    let kpath = match raw.kpath {
        Some(kp) => KPath::new(
            kp.vertices
                .into_iter()
                .map(|v| KVertex {
                    label: v.label,
                    xi: v.xi,
                })
                .collect(),
            kp.samples.unwrap_or(DEFAULT_SAMPLES),
        )
        .map_err(|e| ConfigError::invariant("kpath", e))?,
        None => default_kpath(&lattice),
    };

    let converge_points = raw.converge_points.unwrap_or_else(|| {
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for v in &kpath.vertices {
            if !pts.contains(&v.xi) {
                pts.push(v.xi);
            }
        }
        pts
    });
    if converge_points.is_empty() {
        return Err(ConfigError::invariant("converge_points", "must not be empty"));
    }

    let bands = raw.bands.unwrap_or(DEFAULT_BANDS);
    let min_grid = 2 * raw.cutoff + 1;
    let field = match raw.field {
        Some(f) => {
            if f.band >= bands {
                return Err(ConfigError::invariant(
                    "field.band",
                    format!("band {} is not among the {bands} computed bands", f.band),
                ));
            }
            let grid = f.grid.unwrap_or(min_grid.max(32));
            if grid < min_grid {
                return Err(ConfigError::invariant(
                    "field.grid",
                    format!("grid {grid} cannot resolve cutoff {} (need at least {min_grid})", raw.cutoff),
                ));
            }
            FieldRequest {
                xi: f.xi,
                band: f.band,
                grid,
            }
        }
        None => FieldRequest {
            xi: kpath.vertices.get(1).unwrap_or(&kpath.vertices[0]).xi,
            band: 0,
            grid: min_grid.max(32),
        },
    };

    Ok(Config {
        lattice,
        medium,
        corners,
        beta: raw.beta,
        cutoff: raw.cutoff,
        ladder: raw.ladder,
        bands,
        kpath,
        converge_points,
        field,
        tol: raw.tol.unwrap_or(DEFAULT_TOL),
        seed: raw.seed.unwrap_or(0),
        output: raw.output,
    })
}
