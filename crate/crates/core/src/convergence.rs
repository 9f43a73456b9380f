//! Resolution sweeps, empirical convergence orders, band diagrams and gaps.
//!
//! Errors are measured against a Richardson extrapolation of the two finest
//! rungs of a cutoff ladder; orders are least-squares slopes of `log error`
//! against `log dof`, with `dof = 2(2N+1)²`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{KSample, Lattice2D};
use crate::medium::FourierTable;
use crate::planewave::{solve_bands, BlochParams};

/// Errors at or below this are treated as extrapolation noise.
pub const ERROR_FLOOR: f64 = 1e-13;
/// Relative gap below which eigenvalues are merged into one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Number of rungs in a windowed order fit.
pub const WINDOW: usize = 3;

pub fn dof(cutoff: usize) -> usize {
    2 * (2 * cutoff + 1).pow(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub lattice: Lattice2D,
    /// Must cover the largest rung.
    pub table: FourierTable,
    pub points: Vec<BlochParams>,
    pub ladder: Vec<usize>,
    pub bands: usize,
    pub tol: f64,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.len() < 3 {
            return Err(Error::InvalidInput("a cutoff ladder needs at least 3 rungs".into()));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("cutoff ladder must be strictly increasing".into()));
        }
        if self.bands == 0 {
            return Err(Error::InvalidInput("need at least one band".into()));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidInput("no k-points in the sweep".into()));
        }
        let top = *self.ladder.last().unwrap();
        if self.table.cutoff() < top {
            return Err(Error::TableTooSmall {
                table: self.table.cutoff(),
                basis: top,
            });
        }
        Ok(())
    }
}

/// Least-squares slope fit of `log e` against `log dof`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    /// Positive for decaying errors.
    pub order: f64,
    /// RMS deviation of the fit in `log e`.
    pub residual: f64,
    /// Indices of points at or below [`ERROR_FLOOR`], left out of the fit.
    pub excluded: Vec<usize>,
}

pub fn estimate_order(errors: &[f64], dofs: &[f64]) -> Result<OrderFit> {
    if errors.len() != dofs.len() {
        return Err(Error::InvalidInput("errors and dofs differ in length".into()));
    }
    if errors.len() < 3 {
        return Err(Error::InvalidInput("an order fit needs at least 3 points".into()));
    }
    if dofs.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidInput("degrees of freedom must be positive".into()));
    }
    let excluded: Vec<usize> = (0..errors.len())
        .filter(|&i| !(errors[i] > ERROR_FLOOR))
        .collect();
    let pts: Vec<(f64, f64)> = (0..errors.len())
        .filter(|i| !excluded.contains(i))
        .map(|i| (dofs[i].ln(), errors[i].ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} errors above the noise floor",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all dofs are equal".into()));
    }
    let slope = sxy / sxx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - (my + slope * (p.0 - mx))).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit {
        order: -slope + 0.0,
        residual,
        excluded,
    })
}

/// Fits over every run of [`WINDOW`] consecutive rungs; entry `j` covers
/// rungs `j .. j + WINDOW`. Windows that cannot be fitted are `None`.
pub fn windowed_orders(errors: &[f64], dofs: &[f64]) -> Vec<Option<OrderFit>> {
    if errors.len() < WINDOW {
        return Vec::new();
    }
    (0..=errors.len() - WINDOW)
        .map(|j| estimate_order(&errors[j..j + WINDOW], &dofs[j..j + WINDOW]).ok())
        .collect()
}

/// Order `p` for which `κ(N) = κ∞ + C dof^{−p}` passes through three points,
/// by bisection on `p ∈ (0, 64]`.
fn three_point_order(k: [f64; 3], d: [f64; 3]) -> Option<f64> {
    let (a, b) = (k[0] - k[1], k[1] - k[2]);
    if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
        return None;
    }
    let target = a / b;
    let g = |p: f64| {
        let f = |x: f64| x.powf(-p);
        (f(d[0]) - f(d[1])) / (f(d[1]) - f(d[2])) - target
    };
    let (mut lo, mut hi) = (1e-6, 64.0);
    let (glo, ghi) = (g(lo), g(hi));
    if !glo.is_finite() || !ghi.is_finite() || glo.signum() == ghi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid).signum() == glo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Richardson limit from the two finest rungs, using the order through the
/// three finest. Returns `(limit, order)`; the order is `None` when the
/// sequence is flat or not monotone, and the finest value is returned.
pub fn richardson(values: &[f64], dofs: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let fine = values[n - 1];
    if n < 3 {
        return (fine, None);
    }
    let coarse = values[n - 2];
    if (coarse - fine).abs() <= ERROR_FLOOR * fine.abs().max(1.0) {
        return (fine, None);
    }
    let k = [values[n - 3], coarse, fine];
    let d = [dofs[n - 3], dofs[n - 2], dofs[n - 1]];
    match three_point_order(k, d) {
        Some(p) => {
            let r = (d[2] / d[1]).powf(p);
            ((r * fine - coarse) / (r - 1.0), Some(p))
        }
        None => (fine, None),
    }
}

/// History of one tracked `(k-point, band)` across the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub k_index: usize,
    pub band: usize,
    /// Per rung; degenerate clusters replaced by their mean.
    pub kappa2: Vec<f64>,
    pub reference: f64,
    pub richardson_order: Option<f64>,
    /// `κ²(N) − reference`.
    pub errors: Vec<f64>,
    pub fit: Option<OrderFit>,
    pub windows: Vec<Option<OrderFit>>,
}

impl TrackRecord {
    /// Largest increase `κ²(N_{j+1}) − κ²(N_j)` (≤ 0 for a monotone sequence).
    pub fn max_increase(&self) -> f64 {
        self.kappa2
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn errors_strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }

    /// Order of the last fittable window.
    pub fn final_window_order(&self) -> Option<f64> {
        self.windows.iter().rev().flatten().next().map(|f| f.order)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub ladder: Vec<usize>,
    pub dofs: Vec<f64>,
    pub tracks: Vec<TrackRecord>,
}

/// Replaces each cluster of nearly equal values (relative gap below
/// [`CLUSTER_TOL`]) by its mean.
fn merge_clusters(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] <= CLUSTER_TOL * values[end].abs().max(1.0) {
            end += 1;
        }
        let mean = values[start..end].iter().sum::<f64>() / (end - start) as f64;
        out[start..end].iter_mut().for_each(|v| *v = mean);
        start = end;
    }
    out
}

pub fn resolution_sweep(plan: &SweepPlan) -> Result<ConvergenceRecord> {
    plan.validate()?;
    // two spare eigenvalues so a cluster straddling the last band is averaged whole
    let extra = 2;
    let jobs: Vec<(usize, usize)> = (0..plan.points.len())
        .flat_map(|k| (0..plan.ladder.len()).map(move |r| (k, r)))
        .collect();
    let solved: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(k, r)| {
            let n = plan.ladder[r];
            solve_bands(&plan.lattice, &plan.table, plan.points[k], n, plan.bands + extra, plan.tol)
                .map(|s| merge_clusters(s.band_values()))
                .map_err(|e| match e {
                    Error::SolverDiverged { residual } => {
                        log::error!("solver diverged at k-point {k}, N = {n}");
                        Error::SolverDiverged { residual }
                    }
                    other => other,
                })
        })
        .collect::<Result<_>>()?;

    let dofs: Vec<f64> = plan.ladder.iter().map(|&n| dof(n) as f64).collect();
    let mut tracks = Vec::new();
    for k in 0..plan.points.len() {
        for band in 0..plan.bands {
            let kappa2: Vec<f64> = (0..plan.ladder.len())
                .map(|r| solved[k * plan.ladder.len() + r][band])
                .collect();
            let (reference, richardson_order) = richardson(&kappa2, &dofs);
            let errors: Vec<f64> = kappa2.iter().map(|v| v - reference).collect();
            let fit = estimate_order(&errors, &dofs).ok();
            let windows = windowed_orders(&errors, &dofs);
            tracks.push(TrackRecord {
                k_index: k,
                band,
                kappa2,
                reference,
                richardson_order,
                errors,
                fit,
                windows,
            });
        }
    }
    Ok(ConvergenceRecord {
        ladder: plan.ladder.clone(),
        dofs,
        tracks,
    })
}

/// `κ²` over a k-path, indexed `[band][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub values: Vec<Vec<f64>>,
}

impl BandTable {
    pub fn bands(&self) -> usize {
        self.values.len()
    }

    pub fn kpoints(&self) -> usize {
        self.values.first().map_or(0, |b| b.len())
    }
}

/// Solves every k-sample at fixed `β` and cutoff. Zero modes are dropped.
pub fn band_sweep(
    lattice: &Lattice2D,
    table: &FourierTable,
    samples: &[KSample],
    beta: f64,
    cutoff: usize,
    nbands: usize,
    tol: f64,
) -> Result<BandTable> {
    if nbands == 0 {
        return Err(Error::InvalidInput("need at least one band".into()));
    }
    let recip = lattice.reciprocal();
    let per_k: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|s| {
            let p = BlochParams::new(&recip, s.folded, beta)?;
            let sol = solve_bands(lattice, table, p, cutoff, nbands, tol)?;
            let mut v = sol.band_values().to_vec();
            v.truncate(nbands);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let have = per_k.iter().map(Vec::len).min().unwrap_or(0);
    let values = (0..nbands.min(have))
        .map(|b| per_k.iter().map(|v| v[b]).collect())
        .collect();
    Ok(BandTable { values })
}

/// Gaps `(max_k band j, min_k band j+1)` wherever the second exceeds the first.
pub fn detect_gaps(table: &BandTable) -> Vec<(f64, f64)> {
    table
        .values
        .windows(2)
        .filter_map(|w| {
            let bottom = w[0].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let top = w[1].iter().copied().fold(f64::INFINITY, f64::min);
            (top > bottom).then_some((bottom, top))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PolygonalPartition, Region};
    use crate::lattice::{sample_kpath, KPath};
    use crate::medium::{eta_fourier_polygon, PermittivityMap};
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn order_examples() {
        let f = estimate_order(&[1.0, 0.25, 1.0 / 16.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((f.order - 2.0).abs() < 1e-12 && f.residual < 1e-12);
        let f = estimate_order(&[0.3, 0.3, 0.3], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(f.order, 0.0);
        let f = estimate_order(&[1e-2, 1e-3, 0.0, 1e-5], &[1.0, 2.0, 4.0, 8.0]).unwrap();
        assert_eq!(f.excluded, vec![2]);
        assert!(estimate_order(&[1.0, 0.0, -1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(estimate_order(&[1.0, 0.5], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn injected_power_law() {
        let ns = [4.0, 6.0, 8.0, 12.0, 16.0, 24.0];
        let e: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powi(-2)).collect();
        let f = estimate_order(&e, &ns).unwrap();
        assert!((f.order - 2.0).abs() < 0.01);
    }

    #[test]
    fn richardson_recovers_power_law_limit() {
        let d = [50.0, 98.0, 162.0, 338.0];
        let v: Vec<f64> = d.iter().map(|x: &f64| 1.5 + 4.0 * x.powf(-0.75)).collect();
        let (lim, p) = richardson(&v, &d);
        assert!((lim - 1.5).abs() < 1e-10);
        assert!((p.unwrap() - 0.75).abs() < 1e-8);
        let (lim, p) = richardson(&[2.0, 2.0, 2.0], &d[..3]);
        assert_eq!((lim, p), (2.0, None));
    }

    #[test]
    fn gaps() {
        let t = BandTable {
            values: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        };
        assert_eq!(detect_gaps(&t), vec![(2.0, 3.0)]);
        let t = BandTable {
            values: vec![vec![1.0, 3.0], vec![2.0, 4.0]],
        };
        assert!(detect_gaps(&t).is_empty());
    }

    #[test]
    fn clusters_are_averaged() {
        let m = merge_clusters(&[1.0, 2.0, 2.0 + 1e-12, 3.0]);
        assert_eq!(m[0], 1.0);
        assert_eq!(m[1], m[2]);
        assert_eq!(m[3], 3.0);
    }

    #[test]
    fn plan_validation() {
        let lat = Lattice2D::square();
        let p = BlochParams::new(&lat.reciprocal(), [0.0, 0.0], 1.0).unwrap();
        let mut plan = SweepPlan {
            lattice: lat,
            table: FourierTable::from_coefficients(4, &[([0, 0], Complex64::new(1.0, 0.0))]),
            points: vec![p],
            ladder: vec![1, 2],
            bands: 2,
            tol: 1e-10,
        };
        assert!(plan.validate().is_err());
        plan.ladder = vec![1, 3, 2];
        assert!(plan.validate().is_err());
        plan.ladder = vec![1, 2, 5];
        assert!(matches!(plan.validate(), Err(Error::TableTooSmall { .. })));
        plan.ladder = vec![1, 2, 4];
        assert!(plan.validate().is_ok());
    }

    #[test]
    fn homogeneous_sweep_is_exact() {
        let lat = Lattice2D::square();
        let p = BlochParams::new(&lat.reciprocal(), [0.3, 0.1], 0.5).unwrap();
        let plan = SweepPlan {
            lattice: lat,
            table: FourierTable::from_coefficients(4, &[([0, 0], Complex64::new(0.5, 0.0))]),
            points: vec![p],
            ladder: vec![2, 3, 4],
            bands: 4,
            tol: 1e-10,
        };
        let rec = resolution_sweep(&plan).unwrap();
        for t in &rec.tracks {
            assert!(t.errors.iter().all(|e| e.abs() < 1e-12));
        }
    }

    #[test]
    fn rod_sweep_is_monotone() {
        let lat = Lattice2D::square();
        let rod = Region::square([0.5, 0.5], 0.4, 13.0).unwrap();
        let map = PermittivityMap::new(PolygonalPartition::new(lat, vec![rod], 1.0).unwrap());
        let recip = lat.reciprocal();
        let plan = SweepPlan {
            lattice: lat,
            table: eta_fourier_polygon(&map, 8),
            points: vec![BlochParams::new(&recip, [0.5, 0.5], 1.0).unwrap()],
            ladder: vec![2, 4, 6, 8],
            bands: 3,
            tol: 1e-10,
        };
        let rec = resolution_sweep(&plan).unwrap();
        for t in &rec.tracks {
            assert!(t.max_increase() <= 1e-9, "{t:?}");
            assert!(t.errors_strictly_decreasing(), "{t:?}");
        }
    }

    #[test]
    fn homogeneous_bands_are_folded_parabolas() {
        let lat = Lattice2D::square();
        let n2 = 2.0;
        let table = FourierTable::from_coefficients(2, &[([0, 0], Complex64::new(1.0 / n2, 0.0))]);
        let samples = sample_kpath(&KPath::square_gxmg(3), &lat).unwrap();
        let beta = 0.8;
        let bt = band_sweep(&lat, &table, &samples, beta, 2, 4, 1e-10).unwrap();
        assert_eq!(bt.bands(), 4);
        assert_eq!(bt.kpoints(), samples.len());
        let recip = lat.reciprocal();
        for (k, s) in samples.iter().enumerate() {
            let mut expect: Vec<f64> = (-2..=2)
                .flat_map(|a| (-2..=2).map(move |b| [a, b]))
                .flat_map(|m| {
                    let g = recip.vector(m);
                    let q = [s.folded[0] + g[0], s.folded[1] + g[1]];
                    [(q[0] * q[0] + q[1] * q[1] + beta * beta) / n2; 2]
                })
                .collect();
            expect.sort_by(f64::total_cmp);
            for b in 0..4 {
                assert!((bt.values[b][k] - expect[b]).abs() < 1e-10);
            }
        }
        assert!(detect_gaps(&bt).is_empty() || detect_gaps(&bt).iter().all(|g| g.1 - g.0 > 0.0));
    }

    proptest! {
        #[test]
        fn power_law_orders(p in 0.2..3.0f64, c in 0.1..100.0f64) {
            let d: Vec<f64> = [4usize, 6, 8, 12, 16].iter().map(|&n| dof(n) as f64).collect();
            let e: Vec<f64> = d.iter().map(|x| c * x.powf(-p)).collect();
            let f = estimate_order(&e, &d).unwrap();
            prop_assert!((f.order - p).abs() < 1e-9);
            for w in windowed_orders(&e, &d).into_iter().flatten() {
                prop_assert!((w.order - p).abs() < 1e-9);
            }
        }
    }
}
