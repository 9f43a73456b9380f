//! Direct and reciprocal lattices of the fibre cross-section, Brillouin-zone
//! folding and k-path sampling.
//!
//! Lengths are in units of the lattice pitch. The Brillouin zone is taken as
//! the parallelogram cell of the reciprocal lattice, centred at Γ:
//! `{f1 b1 + f2 b2 : f1, f2 ∈ (-1/2, 1/2]}`. For rectangular lattices this is
//! the usual `(-π/ℓ1, π/ℓ1] × (-π/ℓ2, π/ℓ2]`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

const DET_EPS: f64 = 1e-14;
const ZONE_EPS: f64 = 1e-12;

#[inline]
pub(crate) fn dot2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross2(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn sub2(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn norm2(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

/// Primitive vectors `a1`, `a2` of the transverse lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice2D {
    a1: Vec2,
    a2: Vec2,
}

impl Lattice2D {
    pub fn new(a1: Vec2, a2: Vec2) -> Result<Self> {
        let det = cross2(a1, a2);
        if !det.is_finite() || det.abs() < DET_EPS {
            return Err(Error::DegenerateLattice { det });
        }
        Ok(Self { a1, a2 })
    }

    pub fn square() -> Self {
        Self {
            a1: [1.0, 0.0],
            a2: [0.0, 1.0],
        }
    }

    pub fn hexagonal() -> Self {
        Self {
            a1: [1.0, 0.0],
            a2: [0.5, 3f64.sqrt() / 2.0],
        }
    }

    pub fn a1(&self) -> Vec2 {
        self.a1
    }

    pub fn a2(&self) -> Vec2 {
        self.a2
    }

    pub fn determinant(&self) -> f64 {
        cross2(self.a1, self.a2)
    }

    /// Area of the periodicity cell.
    pub fn cell_area(&self) -> f64 {
        self.determinant().abs()
    }

    pub fn reciprocal(&self) -> ReciprocalLattice2D {
        reciprocal_lattice(self).expect("Lattice2D is non-degenerate by construction")
    }

    pub fn to_cartesian(&self, frac: Vec2) -> Vec2 {
        [
            self.a1[0] * frac[0] + self.a2[0] * frac[1],
            self.a1[1] * frac[0] + self.a2[1] * frac[1],
        ]
    }

    pub fn to_fractional(&self, x: Vec2) -> Vec2 {
        let det = self.determinant();
        [cross2(x, self.a2) / det, cross2(self.a1, x) / det]
    }

    /// Lattice vector `i a1 + j a2`.
    pub fn translation(&self, i: i32, j: i32) -> Vec2 {
        self.to_cartesian([i as f64, j as f64])
    }

    /// Maps a point into the half-open fundamental cell `{f1 a1 + f2 a2 : f ∈ [0,1)²}`.
    pub fn fold_point(&self, x: Vec2) -> Vec2 {
        let f = self.to_fractional(x);
        self.to_cartesian([f[0] - f[0].floor(), f[1] - f[1].floor()])
    }
}

/// Reciprocal vectors with `a_i · b_j = 2π δ_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReciprocalLattice2D {
    pub b1: Vec2,
    pub b2: Vec2,
}

impl ReciprocalLattice2D {
    /// Reciprocal-lattice vector `m1 b1 + m2 b2`.
    #[inline]
    pub fn vector(&self, m: [i32; 2]) -> Vec2 {
        let (m1, m2) = (m[0] as f64, m[1] as f64);
        [
            m1 * self.b1[0] + m2 * self.b2[0],
            m1 * self.b1[1] + m2 * self.b2[1],
        ]
    }

    /// Coordinates of `xi` in the `(b1, b2)` basis.
    pub fn to_fractional(&self, xi: Vec2) -> Vec2 {
        let det = cross2(self.b1, self.b2);
        [cross2(xi, self.b2) / det, cross2(self.b1, xi) / det]
    }

    /// Whether `xi` lies in the closed first Brillouin zone.
    pub fn in_zone(&self, xi: Vec2) -> bool {
        let f = self.to_fractional(xi);
        f.iter().all(|c| c.abs() <= 0.5 + ZONE_EPS)
    }

    /// Folds `xi` into the zone `(-1/2, 1/2]` in reciprocal fractional
    /// coordinates. Points already in the closed zone are returned unchanged.
    pub fn fold(&self, xi: Vec2) -> Vec2 {
        if self.in_zone(xi) {
            return xi;
        }
        let f = self.to_fractional(xi);
        let wrap = |c: f64| c - (c - 0.5).ceil();
        let g = [wrap(f[0]), wrap(f[1])];
        [
            g[0] * self.b1[0] + g[1] * self.b2[0],
            g[0] * self.b1[1] + g[1] * self.b2[1],
        ]
    }
}

pub fn reciprocal_lattice(lat: &Lattice2D) -> Result<ReciprocalLattice2D> {
    let det = lat.determinant();
    if !det.is_finite() || det.abs() < DET_EPS {
        return Err(Error::DegenerateLattice { det });
    }
    let s = 2.0 * PI / det;
    Ok(ReciprocalLattice2D {
        b1: [lat.a2[1] * s, -lat.a2[0] * s],
        b2: [-lat.a1[1] * s, lat.a1[0] * s],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KVertex {
    pub label: String,
    pub xi: Vec2,
}

/// Piecewise-linear path through labelled Brillouin-zone points.
#[derive(Debug, Clone, PartialEq)]
pub struct KPath {
    pub vertices: Vec<KVertex>,
    pub samples_per_segment: usize,
}

impl KPath {
    pub fn new(vertices: Vec<KVertex>, samples_per_segment: usize) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyPath);
        }
        if samples_per_segment == 0 {
            return Err(Error::InvalidInput(
                "samples per segment must be positive".into(),
            ));
        }
        Ok(Self {
            vertices,
            samples_per_segment,
        })
    }

    /// Γ–X–M–Γ for the square lattice of unit pitch.
    pub fn square_gxmg(samples_per_segment: usize) -> Self {
        let v = |label: &str, xi: Vec2| KVertex {
            label: label.to_string(),
            xi,
        };
        Self {
            vertices: vec![
                v("G", [0.0, 0.0]),
                v("X", [PI, 0.0]),
                v("M", [PI, PI]),
                v("G", [0.0, 0.0]),
            ],
            samples_per_segment: samples_per_segment.max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSample {
    pub xi: Vec2,
    /// `xi` folded into the first Brillouin zone.
    pub folded: Vec2,
    pub arclength: f64,
    /// Label of the path vertex at this sample, if any.
    pub label: Option<String>,
}

/// Samples the path with `samples_per_segment` steps per segment. Vertices
/// are included exactly once and arclength is cumulative Euclidean length.
pub fn sample_kpath(path: &KPath, lat: &Lattice2D) -> Result<Vec<KSample>> {
    let first = path.vertices.first().ok_or(Error::EmptyPath)?;
    if path.samples_per_segment == 0 {
        return Err(Error::InvalidInput(
            "samples per segment must be positive".into(),
        ));
    }
    let rec = reciprocal_lattice(lat)?;
    let mut out = vec![KSample {
        xi: first.xi,
        folded: rec.fold(first.xi),
        arclength: 0.0,
        label: Some(first.label.clone()),
    }];
    let mut s0 = 0.0;
    for pair in path.vertices.windows(2) {
        let (p, q) = (pair[0].xi, pair[1].xi);
        let d = sub2(q, p);
        let len = norm2(d);
        let n = path.samples_per_segment;
        for j in 1..=n {
            let t = j as f64 / n as f64;
            let xi = if j == n {
                q
            } else {
                [p[0] + t * d[0], p[1] + t * d[1]]
            };
            out.push(KSample {
                xi,
                folded: rec.fold(xi),
                arclength: s0 + t * len,
                label: (j == n).then(|| pair[1].label.clone()),
            });
        }
        s0 += len;
    }
    Ok(out)
}
