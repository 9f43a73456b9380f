//! Field reconstruction from eigenvectors: sampled `h` and `e`, the
//! divergence and Faraday residuals, and residuals of the expanded curl–curl
//! system.
//!
//! With `h = Σ u_G e^{i(ξ'+G)·x}` and `k_G = (ξ'+G, β)`:
//!
//! ```text
//! ∇'×h  ↔  i k_G × u_G
//! e      =  (i/(ω ε)) ∇'×h,   ω = +√κ²   (ε0 = μ0 = 1)
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{fft2, wrap_index, CellGrid};
use crate::lattice::{dot2, Vec2};
use crate::medium::{EtaSource, FourierTable};
use crate::planewave::{dot3, EigenSolution, Vec3};

const I: Complex64 = Complex64::new(0.0, 1.0);

pub type CVec3 = [Complex64; 3];

#[inline]
fn ccross(k: Vec3, u: CVec3) -> CVec3 {
    [
        u[2] * k[1] - u[1] * k[2],
        u[0] * k[2] - u[2] * k[0],
        u[1] * k[0] - u[0] * k[1],
    ]
}

#[inline]
fn cdot(k: Vec3, u: CVec3) -> Complex64 {
    u[0] * k[0] + u[1] * k[1] + u[2] * k[2]
}

#[inline]
fn cnorm_sqr(u: &CVec3) -> f64 {
    u.iter().map(|c| c.norm_sqr()).sum()
}

/// A complex 3-vector field sampled on a [`CellGrid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: CellGrid,
    pub values: Vec<CVec3>,
}

impl SampledField {
    pub fn at(&self, i: usize, j: usize) -> CVec3 {
        self.values[i * self.grid.m + j]
    }

    /// Pointwise Euclidean magnitudes.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| cnorm_sqr(v).sqrt()).collect()
    }

    /// Root mean square of the magnitude.
    pub fn rms(&self) -> f64 {
        (self.values.iter().map(cnorm_sqr).sum::<f64>() / self.values.len() as f64).sqrt()
    }
}

fn check_band(sol: &EigenSolution, band: usize) -> Result<()> {
    if band >= sol.nev() {
        return Err(Error::InvalidInput(format!(
            "band {band} out of range ({} computed)",
            sol.nev()
        )));
    }
    Ok(())
}

/// Vector coefficients `u_G` of eigenvector `band` (raw index into `values`).
pub fn h_coefficients(sol: &EigenSolution, band: usize) -> Result<Vec<CVec3>> {
    check_band(sol, band)?;
    Ok(sol.basis.vector_coefficients(sol.vector(band)))
}

/// `(i k_G × u_G)` for every basis vector.
fn curl_coefficients(sol: &EigenSolution, u: &[CVec3]) -> Vec<CVec3> {
    sol.basis
        .entries()
        .iter()
        .zip(u)
        .map(|(e, u)| ccross(e.k, *u).map(|c| I * c))
        .collect()
}

/// Samples `Σ c_G e^{i(ξ'+G)·x}` on an `M × M` grid with an inverse FFT.
fn synthesize(sol: &EigenSolution, coeffs: &[CVec3], m: usize) -> Result<SampledField> {
    let required = 2 * sol.basis.cutoff() + 1;
    if m < required {
        return Err(Error::Undersampled { grid: m, required });
    }
    let grid = CellGrid::new(m);
    let mut planes = vec![vec![Complex64::default(); m * m]; 3];
    for (e, c) in sol.basis.entries().iter().zip(coeffs) {
        let idx = wrap_index(e.m[0], m) * m + wrap_index(e.m[1], m);
        for d in 0..3 {
            planes[d][idx] += c[d];
        }
    }
    for p in planes.iter_mut() {
        fft2(p, m, true);
    }
    let lat = sol.basis.lattice();
    let xi = sol.params().xi();
    let mut values = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let phase = Complex64::from_polar(1.0, dot2(xi, grid.point(lat, i, j)));
            let idx = i * m + j;
            values.push([0, 1, 2].map(|d| planes[d][idx] * phase));
        }
    }
    Ok(SampledField { grid, values })
}

/// Samples `h` including the Bloch phase `e^{iξ'·x}`; the `z`-dependence
/// `e^{iβz}` is implicit. Requires `M >= 2N+1`.
pub fn reconstruct_h(sol: &EigenSolution, band: usize, m: usize) -> Result<SampledField> {
    let u = h_coefficients(sol, band)?;
    synthesize(sol, &u, m)
}

/// `Σ_G |k_G · u_G|`, a bound on the pointwise divergence of `h`.
pub fn divergence_residual(sol: &EigenSolution, band: usize) -> Result<f64> {
    let u = h_coefficients(sol, band)?;
    Ok(sol
        .basis
        .entries()
        .iter()
        .zip(&u)
        .map(|(e, u)| cdot(e.k, *u).norm())
        .sum())
}

fn omega(sol: &EigenSolution, band: usize) -> Result<f64> {
    let kappa2 = sol.values[band];
    if kappa2 <= 1e-12 {
        return Err(Error::ZeroFrequency { kappa2 });
    }
    Ok(kappa2.sqrt())
}

/// Coefficients of `e` in the truncated space: `e_G = (i/ω) P_N(η ∇'×h)_G`,
/// with the product taken by the Laurent rule, as in the operator.
pub fn e_coefficients(sol: &EigenSolution, band: usize, table: &FourierTable) -> Result<Vec<CVec3>> {
    check_band(sol, band)?;
    let basis = &sol.basis;
    if table.cutoff() < basis.cutoff() {
        return Err(Error::TableTooSmall {
            table: table.cutoff(),
            basis: basis.cutoff(),
        });
    }
    let w = omega(sol, band)?;
    let u = h_coefficients(sol, band)?;
    let curl = curl_coefficients(sol, &u);
    let entries = basis.entries();
    let mut out = Vec::with_capacity(entries.len());
    for ei in entries {
        let mut acc = [Complex64::default(); 3];
        for (ej, c) in entries.iter().zip(&curl) {
            let eta = table.get([ei.m[0] - ej.m[0], ei.m[1] - ej.m[1]]).unwrap();
            for d in 0..3 {
                acc[d] += eta * c[d];
            }
        }
        out.push(acc.map(|a| a * I / w));
    }
    Ok(out)
}

/// Samples the truncated-space `e` (see [`e_coefficients`]).
pub fn recover_e(sol: &EigenSolution, band: usize, table: &FourierTable, m: usize) -> Result<SampledField> {
    let e = e_coefficients(sol, band, table)?;
    synthesize(sol, &e, m)
}

/// `e(x) = (i η(x)/ω) ∇'×h(x)` evaluated point by point on the grid.
pub fn recover_e_pointwise(sol: &EigenSolution, band: usize, eta: &dyn EtaSource, m: usize) -> Result<SampledField> {
    check_band(sol, band)?;
    let w = omega(sol, band)?;
    let u = h_coefficients(sol, band)?;
    let curl = curl_coefficients(sol, &u);
    let mut f = synthesize(sol, &curl, m)?;
    let lat = *sol.basis.lattice();
    for i in 0..m {
        for j in 0..m {
            let s = I * eta.eta_at(f.grid.point(&lat, i, j)) / w;
            let v = &mut f.values[i * m + j];
            *v = v.map(|c| c * s);
        }
    }
    Ok(f)
}

/// `‖∇'×e − iωh‖ / ‖h‖` for the truncated-space `e`. By Parseval this is the
/// RMS over any alias-free grid.
pub fn faraday_residual(sol: &EigenSolution, band: usize, table: &FourierTable) -> Result<f64> {
    let w = omega(sol, band)?;
    let e = e_coefficients(sol, band, table)?;
    let u = h_coefficients(sol, band)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((en, e), u) in sol.basis.entries().iter().zip(&e).zip(&u) {
        let curl = ccross(en.k, *e);
        let r = [0, 1, 2].map(|d| I * curl[d] - I * w * u[d]);
        num += cnorm_sqr(&r);
        den += cnorm_sqr(u);
    }
    Ok((num / den).sqrt())
}

/// Point evaluation of `h` and `∇'×h` (Bloch phase included).
pub fn eval_h_and_curl(sol: &EigenSolution, band: usize, x: Vec2) -> Result<(CVec3, CVec3)> {
    let u = h_coefficients(sol, band)?;
    let mut h = [Complex64::default(); 3];
    let mut c = [Complex64::default(); 3];
    for (e, u) in sol.basis.entries().iter().zip(&u) {
        let phase = Complex64::from_polar(1.0, e.k[0] * x[0] + e.k[1] * x[1]);
        let cu = ccross(e.k, *u);
        for d in 0..3 {
            h[d] += u[d] * phase;
            c[d] += I * cu[d] * phase;
        }
    }
    Ok((h, c))
}

/// Jump of the tangential trace of the pointwise `e` across a straight
/// interface through `x` with unit normal `normal`, sampled at `x ± δ n`.
/// Both tangential directions (in-plane and `z`) are included. Returns the
/// jump relative to the mean tangential magnitude.
pub fn tangential_e_jump(
    sol: &EigenSolution,
    band: usize,
    eta: &dyn EtaSource,
    x: Vec2,
    normal: Vec2,
    delta: f64,
) -> Result<f64> {
    let w = omega(sol, band)?;
    let t: Vec3 = [-normal[1], normal[0], 0.0];
    let side = |s: f64| -> Result<[Complex64; 2]> {
        let p = [x[0] + s * delta * normal[0], x[1] + s * delta * normal[1]];
        let (_, c) = eval_h_and_curl(sol, band, p)?;
        let f = I * eta.eta_at(p) / w;
        let e = c.map(|z| z * f);
        Ok([cdot(t, e), e[2]])
    };
    let (a, b) = (side(1.0)?, side(-1.0)?);
    let jump = ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt();
    let scale = 0.5 * ((a[0].norm_sqr() + a[1].norm_sqr()).sqrt() + (b[0].norm_sqr() + b[1].norm_sqr()).sqrt());
    Ok(if scale > 0.0 { jump / scale } else { jump })
}

/// Residual norms of the four scalar equations of `∇'×(η∇'×h) = κ²h`,
/// `∇'·h = 0`, written out component by component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reg4Residual {
    pub r_a: f64,
    pub r_b: f64,
    pub r_c: f64,
    pub r_d: f64,
}

/// Weak residuals of the expanded system, tested against the planewave space
/// of cutoff `test_cutoff` (which must contain the trial space). The three
/// curl–curl components are measured in the dual norm
/// `(Σ_G |R_G|² / (1 + |k_G|²))^{1/2}`; `r_d` is `(Σ_G |k_G·u_G|²)^{1/2}`.
/// Keep `test_cutoff` fixed when comparing resolutions.
pub fn residual_reg4(sol: &EigenSolution, band: usize, eta: &dyn EtaSource, test_cutoff: usize) -> Result<Reg4Residual> {
    check_band(sol, band)?;
    let basis = &sol.basis;
    if test_cutoff < basis.cutoff() {
        return Err(Error::InvalidInput(format!(
            "test cutoff {test_cutoff} smaller than trial cutoff {}",
            basis.cutoff()
        )));
    }
    let kappa2 = sol.values[band];
    let u = h_coefficients(sol, band)?;
    let curl: Vec<CVec3> = basis.entries().iter().zip(&u).map(|(e, u)| ccross(e.k, *u)).collect();

    let reach = (test_cutoff + basis.cutoff()) as i32;
    let side = (2 * reach + 1) as usize;
    let mut hat = Vec::with_capacity(side * side);
    for m1 in -reach..=reach {
        for m2 in -reach..=reach {
            hat.push(eta.eta_hat([m1, m2]));
        }
    }
    let hat_at = |m: [i32; 2]| hat[((m[0] + reach) as usize) * side + (m[1] + reach) as usize];

    let t = test_cutoff as i32;
    let recip = basis.reciprocal();
    let params = basis.params();
    let mut sums = [0.0f64; 3];
    for m1 in -t..=t {
        for m2 in -t..=t {
            let k = params.wavevector(recip.vector([m1, m2]));
            let mut w = [Complex64::default(); 3];
            for (e, c) in basis.entries().iter().zip(&curl) {
                let h = hat_at([m1 - e.m[0], m2 - e.m[1]]);
                for d in 0..3 {
                    w[d] += h * c[d];
                }
            }
            // ∇'×(η∇'×h) ↔ −k × W
            let kw = ccross(k, w);
            let uk = basis.index_of([m1, m2]).map(|i| u[i]).unwrap_or_default();
            let weight = 1.0 / (1.0 + dot3(k, k));
            for d in 0..3 {
                sums[d] += (-kw[d] - uk[d] * kappa2).norm_sqr() * weight;
            }
        }
    }
    let r_d = basis
        .entries()
        .iter()
        .zip(&u)
        .map(|(e, u)| cdot(e.k, *u).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(Reg4Residual {
        r_a: sums[0].sqrt(),
        r_b: sums[1].sqrt(),
        r_c: sums[2].sqrt(),
        r_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PolygonalPartition, Region};
    use crate::lattice::Lattice2D;
    use crate::medium::{eta_fourier_polygon, PermittivityMap, SmoothEta};
    use crate::planewave::{assemble, build_basis, eigensolve, solve_bands, BlochParams};
    use std::sync::Arc;

    fn rod() -> PermittivityMap {
        let lat = Lattice2D::square();
        let r = Region::square([0.5, 0.5], 0.4, 13.0).unwrap();
        PermittivityMap::new(PolygonalPartition::new(lat, vec![r], 1.0).unwrap())
    }

    fn params(xi: Vec2, beta: f64) -> BlochParams {
        BlochParams::new(&Lattice2D::square().reciprocal(), xi, beta).unwrap()
    }

    #[test]
    fn single_coefficient_is_constant_frame_vector() {
        let lat = Lattice2D::square();
        let basis = Arc::new(build_basis(params([0.0, 0.0], 1.0), &lat, 1));
        let i0 = basis.index_of([0, 0]).unwrap();
        let mut v = vec![Complex64::default(); basis.dim()];
        v[2 * i0] = Complex64::new(1.0, 0.0);
        let sol = EigenSolution {
            values: vec![1.0],
            vectors: v,
            basis,
            max_residual: 0.0,
        };
        let h = reconstruct_h(&sol, 0, 5).unwrap();
        for v in &h.values {
            assert!((v[0] - 1.0).norm() < 1e-14 && v[1].norm() < 1e-14 && v[2].norm() < 1e-14);
        }
        assert!(matches!(reconstruct_h(&sol, 0, 2), Err(Error::Undersampled { .. })));
    }

    #[test]
    fn homogeneous_fields_have_constant_magnitude() {
        let lat = Lattice2D::square();
        let eta = SmoothEta::new(lat, &[([0, 0], Complex64::new(0.5, 0.0))]).unwrap();
        let table = FourierTable::from_source(&eta, 3);
        let sol = solve_bands(&lat, &table, params([0.4, 0.1], 0.8), 3, 4, 1e-12).unwrap();
        for b in 0..4 {
            let h = reconstruct_h(&sol, b, 9).unwrap();
            let mags = h.magnitudes();
            for m in &mags {
                assert!((m - mags[0]).abs() < 1e-12);
            }
            let e = recover_e(&sol, b, &table, 9).unwrap();
            let mags = e.magnitudes();
            for m in &mags {
                assert!((m - mags[0]).abs() < 1e-12);
            }
            let r = residual_reg4(&sol, b, &eta, 6).unwrap();
            assert!(r.r_a < 1e-10 && r.r_b < 1e-10 && r.r_c < 1e-10 && r.r_d < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn rod_fields_are_divergence_free_and_close_faraday() {
        let map = rod();
        let table = eta_fourier_polygon(&map, 6);
        let sol = solve_bands(map.partition().lattice(), &table, params([0.9, 0.4], 1.0), 6, 5, 1e-10).unwrap();
        for b in 0..5 {
            assert!(divergence_residual(&sol, b).unwrap() < 1e-12);
            assert!(faraday_residual(&sol, b, &table).unwrap() < 1e-8);
            let r = residual_reg4(&sol, b, &map, 8).unwrap();
            assert!(r.r_d < 1e-12);
            assert!(r.r_a > 0.0);
        }
    }

    #[test]
    fn grid_and_point_evaluation_agree() {
        let map = rod();
        let table = eta_fourier_polygon(&map, 3);
        let lat = *map.partition().lattice();
        let sol = solve_bands(&lat, &table, params([0.9, 0.4], 1.0), 3, 2, 1e-10).unwrap();
        let h = reconstruct_h(&sol, 1, 8).unwrap();
        let e = recover_e_pointwise(&sol, 1, &map, 8).unwrap();
        let w = sol.values[1].sqrt();
        for (i, j) in [(0, 0), (3, 5), (7, 2)] {
            let x = h.grid.point(&lat, i, j);
            let (hp, cp) = eval_h_and_curl(&sol, 1, x).unwrap();
            let ep = cp.map(|c| c * I * map.eta_at(x) / w);
            for d in 0..3 {
                assert!((hp[d] - h.at(i, j)[d]).norm() < 1e-12);
                assert!((ep[d] - e.at(i, j)[d]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_frequency_is_rejected() {
        let map = rod();
        let table = eta_fourier_polygon(&map, 2);
        let basis = Arc::new(build_basis(params([0.0, 0.0], 0.0), map.partition().lattice(), 2));
        let a = assemble(&basis, &table).unwrap();
        let sol = eigensolve(&a, 3, 1e-10).unwrap();
        assert!(matches!(recover_e(&sol, 0, &table, 8), Err(Error::ZeroFrequency { .. })));
        assert!(recover_e(&sol, 2, &table, 8).is_ok());
    }

    #[test]
    fn tangential_e_jump_shrinks_with_resolution() {
        let map = rod();
        let lat = *map.partition().lattice();
        let p = params([0.5, 0.2], 1.0);
        // midpoint of the left edge of the rod, normal along x
        let x = [0.3, 0.5];
        let mut jumps = Vec::new();
        for n in [4, 8, 16] {
            let table = eta_fourier_polygon(&map, n);
            let sol = solve_bands(&lat, &table, p, n, 1, 1e-10).unwrap();
            jumps.push(tangential_e_jump(&sol, 0, &map, x, [1.0, 0.0], 0.02).unwrap());
        }
        eprintln!("tangential jumps {jumps:?}");
        assert!(jumps[2] < jumps[0]);
    }
}
