//! Divergence-free planewave discretisation of the Floquet operator.
//!
//! For Bloch parameters `(ξ', β)` and cutoff `N` the trial space is spanned by
//! `ê_p^G e^{i(ξ'+G)·x}` with `G = m1 b1 + m2 b2`, `|m1|, |m2| <= N` and two
//! polarisations orthogonal to `k_G = (ξ'+G, β)`. The form
//! `a(u, v) = ∫ η ∇'×u · conj(∇'×v)` becomes
//!
//! ```text
//! A[(G,p),(G',q)] = η̂(G − G') (k_G × ê_p)·(k_G' × ê_q)
//! ```
//!
//! and the mass matrix is the identity, so `A c = κ² c` is a standard
//! Hermitian eigenproblem. Multiplication by `η` uses the Laurent rule.

use std::sync::Arc;

use num_complex::Complex64;

use crate::eigen::hermitian_lowest;
use crate::error::{Error, Result};
use crate::lattice::{Lattice2D, ReciprocalLattice2D, Vec2};
use crate::medium::FourierTable;

pub type Vec3 = [f64; 3];

#[inline]
pub(crate) fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// Quasi-momentum `ξ'` (folded into the first zone) and propagation constant `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochParams {
    xi: Vec2,
    beta: f64,
}

impl BlochParams {
    /// `ξ'` outside the closed first zone is folded back into it.
    pub fn new(recip: &ReciprocalLattice2D, xi: Vec2, beta: f64) -> Result<Self> {
        if !(xi[0].is_finite() && xi[1].is_finite() && beta.is_finite()) {
            return Err(Error::InvalidInput("non-finite Bloch parameters".into()));
        }
        Ok(Self {
            xi: recip.fold(xi),
            beta,
        })
    }

    pub fn xi(&self) -> Vec2 {
        self.xi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `(ξ' + g, β)`.
    #[inline]
    pub fn wavevector(&self, g: Vec2) -> Vec3 {
        [self.xi[0] + g[0], self.xi[1] + g[1], self.beta]
    }

    /// `|(ξ', β)|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1] + self.beta * self.beta
    }
}

/// One reciprocal-lattice vector with its transverse polarisation frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEntry {
    pub m: [i32; 2],
    pub k: Vec3,
    pub e: [Vec3; 2],
    /// `k × ê_p`; the curl of the mode up to the factor `i`.
    pub curl: [Vec3; 2],
    pub zero_mode: bool,
}

/// Orthonormal polarisation pair for a wavevector, plus the zero-mode flag.
pub fn polarization_frame(k: Vec3) -> ([Vec3; 2], bool) {
    let kn = norm3(k);
    if kn < 1e-14 {
        return ([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], true);
    }
    let kt = (k[0] * k[0] + k[1] * k[1]).sqrt();
    if kt <= 1e-12 * kn {
        return ([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], false);
    }
    let khat = [k[0] / kn, k[1] / kn, k[2] / kn];
    // ẑ × k̂ = (−k̂_y, k̂_x, 0)
    let e1 = [-khat[1] / (kt / kn), khat[0] / (kt / kn), 0.0];
    let e2 = cross3(khat, e1);
    ([e1, e2], false)
}

/// Ordered planewave basis, lexicographic in `(m1, m2)`. Unknown `2 i + p`
/// belongs to entry `i`, polarisation `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanewaveBasis {
    cutoff: usize,
    params: BlochParams,
    lattice: Lattice2D,
    recip: ReciprocalLattice2D,
    entries: Vec<BasisEntry>,
}

pub fn build_basis(params: BlochParams, lat: &Lattice2D, cutoff: usize) -> PlanewaveBasis {
    let recip = lat.reciprocal();
    let n = cutoff as i32;
    let mut entries = Vec::with_capacity((2 * cutoff + 1).pow(2));
    for m1 in -n..=n {
        for m2 in -n..=n {
            let m = [m1, m2];
            let k = params.wavevector(recip.vector(m));
            let (e, zero_mode) = polarization_frame(k);
            let curl = [cross3(k, e[0]), cross3(k, e[1])];
            entries.push(BasisEntry {
                m,
                k,
                e,
                curl,
                zero_mode,
            });
        }
    }
    PlanewaveBasis {
        cutoff,
        params,
        lattice: *lat,
        recip,
        entries,
    }
}

impl PlanewaveBasis {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn params(&self) -> &BlochParams {
        &self.params
    }

    pub fn lattice(&self) -> &Lattice2D {
        &self.lattice
    }

    pub fn reciprocal(&self) -> &ReciprocalLattice2D {
        &self.recip
    }

    pub fn entries(&self) -> &[BasisEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of unknowns, `2 (2N+1)²`.
    pub fn dim(&self) -> usize {
        2 * self.entries.len()
    }

    /// Position of `m` in the ordering, if it is in the basis.
    pub fn index_of(&self, m: [i32; 2]) -> Option<usize> {
        let n = self.cutoff as i32;
        if m[0].abs() > n || m[1].abs() > n {
            return None;
        }
        let side = 2 * n + 1;
        Some(((m[0] + n) * side + (m[1] + n)) as usize)
    }

    /// Number of flagged zero modes times two (both polarisations).
    pub fn zero_mode_count(&self) -> usize {
        2 * self.entries.iter().filter(|e| e.zero_mode).count()
    }

    /// Vector coefficients `u_G = Σ_p c_{G,p} ê_p` of a coefficient vector.
    pub fn vector_coefficients(&self, c: &[Complex64]) -> Vec<[Complex64; 3]> {
        assert_eq!(c.len(), self.dim());
        self.entries
            .iter()
            .enumerate()
            .map(|(i, en)| {
                let (a, b) = (c[2 * i], c[2 * i + 1]);
                [0, 1, 2].map(|d| a * en.e[0][d] + b * en.e[1][d])
            })
            .collect()
    }
}

/// Hermitian matrix of the discretised form, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    basis: Arc<PlanewaveBasis>,
    data: Vec<Complex64>,
}

impl OperatorMatrix {
    pub fn basis(&self) -> &Arc<PlanewaveBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.dim() + row]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `max |A − Aᴴ|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in j..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        let mut y = vec![Complex64::default(); n];
        for (j, &xj) in x.iter().enumerate() {
            let col = &self.data[j * n..(j + 1) * n];
            for (yi, a) in y.iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
        y
    }
}

/// Assembles the operator. The table must cover every difference of two basis
/// vectors.
pub fn assemble(basis: &Arc<PlanewaveBasis>, table: &FourierTable) -> Result<OperatorMatrix> {
    if table.cutoff() < basis.cutoff() {
        return Err(Error::TableTooSmall {
            table: table.cutoff(),
            basis: basis.cutoff(),
        });
    }
    let n = basis.dim();
    let entries = basis.entries();
    let mut data = vec![Complex64::default(); n * n];
    for (j, ej) in entries.iter().enumerate() {
        for (i, ei) in entries.iter().enumerate().skip(j) {
            let eta = table
                .get([ei.m[0] - ej.m[0], ei.m[1] - ej.m[1]])
                .ok_or(Error::TableTooSmall {
                    table: table.cutoff(),
                    basis: basis.cutoff(),
                })?;
            for q in 0..2 {
                let col = (2 * j + q) * n;
                for p in 0..2 {
                    let row = 2 * i + p;
                    if row < 2 * j + q {
                        continue;
                    }
                    data[col + row] = eta * dot3(ei.curl[p], ej.curl[q]);
                }
            }
        }
    }
    // Mirror the lower triangle so the matrix is exactly Hermitian.
    for j in 0..n {
        data[j * n + j].im = 0.0;
        for i in j + 1..n {
            data[i * n + j] = data[j * n + i].conj();
        }
    }
    Ok(OperatorMatrix {
        basis: Arc::clone(basis),
        data,
    })
}

/// Lowest eigenpairs of an assembled operator.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// `κ²`, ascending.
    pub values: Vec<f64>,
    /// Column-major `dim × values.len()`, unit norm, largest entry real positive.
    pub vectors: Vec<Complex64>,
    pub basis: Arc<PlanewaveBasis>,
    /// Largest `‖A v − κ² v‖ / ‖A‖` over the returned pairs.
    pub max_residual: f64,
}

impl EigenSolution {
    pub fn params(&self) -> &BlochParams {
        self.basis.params()
    }

    pub fn nev(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> &[Complex64] {
        let n = self.basis.dim();
        &self.vectors[k * n..(k + 1) * n]
    }

    /// Eigenvalues with the flagged zero modes removed.
    pub fn band_values(&self) -> &[f64] {
        let z = self.basis.zero_mode_count().min(self.values.len());
        &self.values[z..]
    }

    /// Index into `values` of reported band `b`.
    pub fn band_index(&self, band: usize) -> usize {
        band + self.basis.zero_mode_count()
    }
}

pub fn eigensolve(a: &OperatorMatrix, nev: usize, tol: f64) -> Result<EigenSolution> {
    let eig = hermitian_lowest(a.as_slice(), a.dim(), nev, tol)?;
    Ok(EigenSolution {
        values: eig.values,
        vectors: eig.vectors,
        basis: Arc::clone(a.basis()),
        max_residual: eig.max_residual,
    })
}

/// Builds, assembles and solves for `nbands` reported bands (zero modes are
/// solved for as well, then skipped by [`EigenSolution::band_values`]).
pub fn solve_bands(
    lat: &Lattice2D,
    table: &FourierTable,
    params: BlochParams,
    cutoff: usize,
    nbands: usize,
    tol: f64,
) -> Result<EigenSolution> {
    let basis = Arc::new(build_basis(params, lat, cutoff));
    let nev = (nbands + basis.zero_mode_count()).min(basis.dim());
    let a = assemble(&basis, table)?;
    eigensolve(&a, nev, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PolygonalPartition, Region};
    use crate::medium::{eta_fourier_polygon, PermittivityMap};
    use proptest::prelude::*;

    fn rod_table(cutoff: usize) -> (Lattice2D, FourierTable) {
        let lat = Lattice2D::square();
        let rod = Region::square([0.5, 0.5], 0.4, 13.0).unwrap();
        let part = PolygonalPartition::new(lat, vec![rod], 1.0).unwrap();
        (lat, eta_fourier_polygon(&PermittivityMap::new(part), cutoff))
    }

    fn params(xi: Vec2, beta: f64) -> BlochParams {
        BlochParams::new(&Lattice2D::square().reciprocal(), xi, beta).unwrap()
    }

    #[test]
    fn frame_conventions() {
        let (e, z) = polarization_frame([0.0, 0.0, 1.0]);
        assert_eq!(e, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(!z);
        let (e, _) = polarization_frame([2.0, 0.0, 0.0]);
        for d in 0..3 {
            assert!((e[0][d] - [0.0, 1.0, 0.0][d]).abs() < 1e-15);
            assert!((e[1][d] - [0.0, 0.0, 1.0][d]).abs() < 1e-15);
        }
        let (_, z) = polarization_frame([0.0, 0.0, 0.0]);
        assert!(z);
    }

    proptest! {
        #[test]
        fn frame_is_orthonormal_and_transverse(kx in -50.0..50.0f64, ky in -50.0..50.0f64, kz in -5.0..5.0f64) {
            let k = [kx, ky, kz];
            prop_assume!(norm3(k) > 1e-6);
            let (e, _) = polarization_frame(k);
            let kn = norm3(k);
            prop_assert!((norm3(e[0]) - 1.0).abs() < 1e-12);
            prop_assert!((norm3(e[1]) - 1.0).abs() < 1e-12);
            prop_assert!(dot3(e[0], e[1]).abs() < 1e-12);
            for p in 0..2 {
                prop_assert!(dot3(e[p], k).abs() < 1e-12 * kn.max(1.0));
                prop_assert!((norm3(cross3(k, e[p])) - kn).abs() < 1e-12 * kn.max(1.0));
            }
        }
    }

    #[test]
    fn basis_is_lexicographic_and_nested() {
        let lat = Lattice2D::square();
        let p = params([0.1, -0.2], 0.5);
        let b2 = build_basis(p, &lat, 2);
        let b3 = build_basis(p, &lat, 3);
        assert_eq!(b2.len(), 25);
        assert_eq!(b2.dim(), 50);
        assert!(b2.entries().windows(2).all(|w| w[0].m < w[1].m));
        for e in b2.entries() {
            let j = b3.index_of(e.m).unwrap();
            assert_eq!(b3.entries()[j], *e);
            assert_eq!(b2.entries()[b2.index_of(e.m).unwrap()].m, e.m);
        }
    }

    #[test]
    fn homogeneous_matrix_is_diagonal() {
        let lat = Lattice2D::square();
        let c = 0.25;
        let table = FourierTable::from_coefficients(2, &[([0, 0], Complex64::new(c, 0.0))]);
        let basis = Arc::new(build_basis(params([0.3, 0.1], 0.7), &lat, 2));
        let a = assemble(&basis, &table).unwrap();
        for j in 0..a.dim() {
            for i in 0..a.dim() {
                let k = basis.entries()[i / 2].k;
                let expect = if i == j { c * dot3(k, k) } else { 0.0 };
                assert!((a.get(i, j) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_mode_rows_vanish() {
        let lat = Lattice2D::square();
        let (_, table) = rod_table(2);
        let basis = Arc::new(build_basis(params([0.0, 0.0], 0.0), &lat, 2));
        assert_eq!(basis.zero_mode_count(), 2);
        let a = assemble(&basis, &table).unwrap();
        let i0 = basis.index_of([0, 0]).unwrap();
        for r in [2 * i0, 2 * i0 + 1] {
            for j in 0..a.dim() {
                assert_eq!(a.get(r, j), Complex64::default());
                assert_eq!(a.get(j, r), Complex64::default());
            }
        }
        let sol = eigensolve(&a, 4, 1e-10).unwrap();
        assert!(sol.values[0].abs() < 1e-12 && sol.values[1].abs() < 1e-12);
        assert!(sol.band_values()[0] > 1e-3);
    }

    #[test]
    fn rod_matrix_is_hermitian_psd() {
        let (lat, table) = rod_table(2);
        let basis = Arc::new(build_basis(params([0.4, 0.9], 1.0), &lat, 2));
        let a = assemble(&basis, &table).unwrap();
        assert!(a.hermiticity_defect() < 1e-12);
        let sol = eigensolve(&a, a.dim(), 1e-10).unwrap();
        assert!(sol.values[0] >= -1e-10);
    }

    #[test]
    fn table_too_small() {
        let (lat, table) = rod_table(2);
        let basis = Arc::new(build_basis(params([0.0, 0.0], 1.0), &lat, 3));
        assert_eq!(
            assemble(&basis, &table),
            Err(Error::TableTooSmall { table: 2, basis: 3 })
        );
    }

    #[test]
    fn homogeneous_spectrum_is_analytic() {
        let lat = Lattice2D::square();
        let n = 3;
        let table = FourierTable::from_coefficients(n, &[([0, 0], Complex64::new(1.0, 0.0))]);
        let p = params([0.3, 0.2], 0.7);
        let sol = solve_bands(&lat, &table, p, n, 20, 1e-10).unwrap();
        let mut expect: Vec<f64> = build_basis(p, &lat, n)
            .entries()
            .iter()
            .flat_map(|e| [dot3(e.k, e.k); 2])
            .collect();
        expect.sort_by(f64::total_cmp);
        for (got, want) in sol.values.iter().zip(&expect) {
            assert!((got - want).abs() < 1e-10 * want);
        }
    }

    #[test]
    fn identity_operator() {
        // η̂ chosen so that A is the identity on a single-mode basis at |k| = 1.
        let lat = Lattice2D::square();
        let table = FourierTable::from_coefficients(0, &[([0, 0], Complex64::new(1.0, 0.0))]);
        let basis = Arc::new(build_basis(params([0.0, 0.0], 1.0), &lat, 0));
        let a = assemble(&basis, &table).unwrap();
        let sol = eigensolve(&a, 2, 1e-12).unwrap();
        assert_eq!(sol.values.len(), 2);
        assert!(sol.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn nested_bases_give_monotone_eigenvalues() {
        let (lat, table) = rod_table(9);
        let p = params([0.7, 0.3], 1.0);
        let s8 = solve_bands(&lat, &table, p, 8, 5, 1e-10).unwrap();
        let s9 = solve_bands(&lat, &table, p, 9, 5, 1e-10).unwrap();
        for (a, b) in s9.values.iter().zip(&s8.values) {
            assert!(*a <= b + 1e-9, "{a} > {b}");
        }
    }

    #[test]
    fn time_reversal() {
        let (lat, table) = rod_table(5);
        let a = solve_bands(&lat, &table, params([0.7, 0.3], 1.0), 5, 6, 1e-10).unwrap();
        let b = solve_bands(&lat, &table, params([-0.7, -0.3], 1.0), 5, 6, 1e-10).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenvectors_satisfy_residual_bound() {
        let (lat, table) = rod_table(4);
        let basis = Arc::new(build_basis(params([1.0, 0.2], 0.5), &lat, 4));
        let a = assemble(&basis, &table).unwrap();
        let sol = eigensolve(&a, 6, 1e-10).unwrap();
        for k in 0..6 {
            let v = sol.vector(k);
            let av = a.apply(v);
            let r: f64 = av
                .iter()
                .zip(v)
                .map(|(x, y)| (x - y * sol.values[k]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(r < 1e-10 * sol.values.last().unwrap().max(1.0) * 1e3);
        }
    }
}
