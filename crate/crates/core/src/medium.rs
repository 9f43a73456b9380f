//! Inverse permittivity `η = 1/n²` on the periodicity cell and its Fourier
//! coefficients
//!
//! ```text
//! η̂(G) = (1/|Q'|) ∫_{Q'} η(x) e^{-iG·x} dx,    G = m1 b1 + m2 b2.
//! ```
//!
//! For polygonal partitions the coefficients are exact: the indicator of a
//! polygon is transformed edge by edge with the divergence theorem. A
//! grid-sampled DFT is provided as an independent cross-check.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::PolygonalPartition;
use crate::grid::{fft2, wrap_index};
use crate::lattice::{cross2, dot2, Lattice2D, ReciprocalLattice2D, Vec2};

/// Anything that can report `η̂` for arbitrary reciprocal-lattice indices.
pub trait EtaSource: Send + Sync {
    fn lattice(&self) -> &Lattice2D;

    /// Fourier coefficient of `η` at `G = m1 b1 + m2 b2`.
    fn eta_hat(&self, m: [i32; 2]) -> Complex64;

    /// Point value `η(x)`.
    fn eta_at(&self, x: Vec2) -> f64;

    /// Bounds `(inf η, sup η)`. May be conservative.
    fn eta_bounds(&self) -> (f64, f64);
}

/// Piecewise-constant `n²` over a polygonal partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityMap {
    partition: PolygonalPartition,
    reciprocal: ReciprocalLattice2D,
}

impl PermittivityMap {
    pub fn new(partition: PolygonalPartition) -> Self {
        let reciprocal = partition.lattice().reciprocal();
        Self {
            partition,
            reciprocal,
        }
    }

    pub fn partition(&self) -> &PolygonalPartition {
        &self.partition
    }

    pub fn reciprocal(&self) -> &ReciprocalLattice2D {
        &self.reciprocal
    }

    pub fn n2_at(&self, x: Vec2) -> f64 {
        self.partition.region_at(x)
    }

    /// `‖n‖²_∞ = max n²`.
    pub fn n2_max(&self) -> f64 {
        self.partition.n2_range().1
    }
}

impl EtaSource for PermittivityMap {
    fn lattice(&self) -> &Lattice2D {
        self.partition.lattice()
    }

    fn eta_hat(&self, m: [i32; 2]) -> Complex64 {
        let g = self.reciprocal.vector(m);
        let bg = 1.0 / self.partition.background_n2();
        let area = self.partition.lattice().cell_area();
        let mut acc = if m == [0, 0] {
            Complex64::new(bg, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        for r in self.partition.regions() {
            let contrast = 1.0 / r.n2() - bg;
            if contrast != 0.0 {
                acc += contrast / area * polygon_fourier(r.polygon(), g);
            }
        }
        acc
    }

    fn eta_at(&self, x: Vec2) -> f64 {
        1.0 / self.partition.region_at(x)
    }

    fn eta_bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.partition.n2_range();
        (1.0 / hi, 1.0 / lo)
    }
}

/// `sin(t)/t`, with the removable singularity handled by its series.
#[inline]
pub(crate) fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - t * t / 6.0
    } else {
        t.sin() / t
    }
}

/// `∫_P e^{-i g·x} dx` over a simple polygon with counterclockwise vertices.
///
/// With `e^{-ig·x} = ∇·(i g e^{-ig·x}) / |g|²` the area integral becomes a sum
/// over edges `p → q`:
/// `(i/|g|²) Σ (g × (q-p)) e^{-ig·(p+q)/2} sinc(g·(q-p)/2)`.
pub fn polygon_fourier(poly: &[Vec2], g: Vec2) -> Complex64 {
    let n = poly.len();
    let g2 = dot2(g, g);
    if g2 < 1e-24 {
        let area = 0.5 * (0..n).map(|i| cross2(poly[i], poly[(i + 1) % n])).sum::<f64>();
        return Complex64::new(area, 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let (p, q) = (poly[i], poly[(i + 1) % n]);
        let e = [q[0] - p[0], q[1] - p[1]];
        let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        let flux = cross2(g, e);
        if flux == 0.0 {
            continue;
        }
        let w = flux * sinc(0.5 * dot2(g, e));
        acc += Complex64::from_polar(w, -dot2(g, mid));
    }
    acc * Complex64::new(0.0, 1.0 / g2)
}

/// Trigonometric-polynomial `η`, i.e. a smooth (analytic) inverse permittivity
/// with finitely many nonzero Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEta {
    lattice: Lattice2D,
    reciprocal: ReciprocalLattice2D,
    terms: BTreeMap<[i32; 2], Complex64>,
    bounds: (f64, f64),
}

impl SmoothEta {
    /// `terms` lists coefficients for some `m`; the conjugate partner at `-m`
    /// is filled in. Fails if `η` is not bounded away from zero.
    pub fn new(lattice: Lattice2D, terms: &[([i32; 2], Complex64)]) -> Result<Self> {
        let mut map: BTreeMap<[i32; 2], Complex64> = BTreeMap::new();
        for &(m, c) in terms {
            if m == [0, 0] {
                map.insert(m, Complex64::new(c.re, 0.0));
            } else {
                map.insert(m, c);
                map.insert([-m[0], -m[1]], c.conj());
            }
        }
        let mean = map.get(&[0, 0]).map_or(0.0, |c| c.re);
        let spread: f64 = map
            .iter()
            .filter(|(m, _)| **m != [0, 0])
            .map(|(_, c)| c.norm())
            .sum();
        let lo = mean - spread;
        if !(lo > 0.0) {
            return Err(Error::InvalidInput(format!(
                "trigonometric eta is not bounded below by a positive constant (lower bound {lo})"
            )));
        }
        Ok(Self {
            reciprocal: lattice.reciprocal(),
            lattice,
            terms: map,
            bounds: (lo, mean + spread),
        })
    }

    /// `η(x) = mean + amplitude·(cos(b1·x) + cos(b2·x))`.
    pub fn cosine(lattice: Lattice2D, mean: f64, amplitude: f64) -> Result<Self> {
        let h = Complex64::new(0.5 * amplitude, 0.0);
        Self::new(
            lattice,
            &[([0, 0], Complex64::new(mean, 0.0)), ([1, 0], h), ([0, 1], h)],
        )
    }
}

impl EtaSource for SmoothEta {
    fn lattice(&self) -> &Lattice2D {
        &self.lattice
    }

    fn eta_hat(&self, m: [i32; 2]) -> Complex64 {
        self.terms.get(&m).copied().unwrap_or_default()
    }

    fn eta_at(&self, x: Vec2) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let g = self.reciprocal.vector(*m);
                (c * Complex64::from_polar(1.0, dot2(g, x))).re
            })
            .sum()
    }

    fn eta_bounds(&self) -> (f64, f64) {
        self.bounds
    }
}

/// Coefficients `η̂(m)` for `|m1|, |m2| <= 2N`, enough for every difference of
/// two basis vectors of cutoff `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    cutoff: usize,
    reach: i32,
    coeffs: Vec<Complex64>,
}

impl FourierTable {
    pub fn from_source(src: &dyn EtaSource, cutoff: usize) -> Self {
        let reach = 2 * cutoff as i32;
        let side = (2 * reach + 1) as usize;
        let mut coeffs = Vec::with_capacity(side * side);
        for m1 in -reach..=reach {
            for m2 in -reach..=reach {
                coeffs.push(src.eta_hat([m1, m2]));
            }
        }
        let mut table = Self {
            cutoff,
            reach,
            coeffs,
        };
        table.enforce_symmetry();
        table
    }

    /// Table from explicit coefficients; anything not listed is zero.
    pub fn from_coefficients(cutoff: usize, terms: &[([i32; 2], Complex64)]) -> Self {
        let reach = 2 * cutoff as i32;
        let side = (2 * reach + 1) as usize;
        let mut table = Self {
            cutoff,
            reach,
            coeffs: vec![Complex64::default(); side * side],
        };
        for &(m, c) in terms {
            if let Some(i) = table.index(m) {
                table.coeffs[i] = c;
            }
        }
        table.enforce_symmetry();
        table
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Largest stored `|m_i|` (= 2N).
    pub fn reach(&self) -> i32 {
        self.reach
    }

    #[inline]
    fn index(&self, m: [i32; 2]) -> Option<usize> {
        let r = self.reach;
        if m[0].abs() > r || m[1].abs() > r {
            return None;
        }
        let side = 2 * r + 1;
        Some(((m[0] + r) * side + (m[1] + r)) as usize)
    }

    #[inline]
    pub fn get(&self, m: [i32; 2]) -> Option<Complex64> {
        self.index(m).map(|i| self.coeffs[i])
    }

    /// All stored `(m, η̂(m))`, lexicographic in `m`.
    pub fn iter(&self) -> impl Iterator<Item = ([i32; 2], Complex64)> + '_ {
        let r = self.reach;
        (-r..=r)
            .flat_map(move |m1| (-r..=r).map(move |m2| [m1, m2]))
            .zip(self.coeffs.iter().copied())
    }

    /// Largest `|η̂(-G) - conj η̂(G)|`.
    pub fn symmetry_defect(&self) -> f64 {
        self.iter()
            .map(|(m, c)| (self.get([-m[0], -m[1]]).unwrap() - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `Σ_G |η̂(G)|²` over the table.
    pub fn parseval_sum(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    fn enforce_symmetry(&mut self) {
        let r = self.reach;
        for m1 in -r..=r {
            for m2 in -r..=r {
                let (a, b) = (self.index([m1, m2]).unwrap(), self.index([-m1, -m2]).unwrap());
                if a < b {
                    let avg = 0.5 * (self.coeffs[a] + self.coeffs[b].conj());
                    self.coeffs[a] = avg;
                    self.coeffs[b] = avg.conj();
                } else if a == b {
                    self.coeffs[a].im = 0.0;
                }
            }
        }
    }
}

/// Exact coefficients of `1/n²` for a polygonal partition.
pub fn eta_fourier_polygon(map: &PermittivityMap, cutoff: usize) -> FourierTable {
    FourierTable::from_source(map, cutoff)
}

/// Coefficients from midpoint samples of `η` on an `M × M` cell grid. Accurate
/// to first order in `1/M` for discontinuous `η`.
pub fn eta_fourier_grid(map: &PermittivityMap, grid: usize, cutoff: usize) -> Result<FourierTable> {
    let required = 8 * (2 * cutoff + 1);
    if grid < required {
        return Err(Error::Undersampled {
            grid,
            required,
        });
    }
    let lat = map.partition().lattice();
    let m = grid;
    let mut data: Vec<Complex64> = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let f = [(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64];
            data.push(Complex64::new(map.eta_at(lat.to_cartesian(f)), 0.0));
        }
    }
    fft2(&mut data, m, false);
    let reach = 2 * cutoff as i32;
    let scale = 1.0 / (m * m) as f64;
    let mut terms = Vec::new();
    for m1 in -reach..=reach {
        for m2 in -reach..=reach {
            let raw = data[wrap_index(m1, m) * m + wrap_index(m2, m)];
            // samples sit at half-cell offsets
            let shift = -std::f64::consts::PI * (m1 + m2) as f64 / m as f64;
            terms.push(([m1, m2], raw * Complex64::from_polar(scale, shift)));
        }
    }
    Ok(FourierTable::from_coefficients(cutoff, &terms))
}
