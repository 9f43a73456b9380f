//! Singular exponents of the scalar transmission problem `∇·(ε∇u) = 0` at
//! interface corners.
//!
//! Near a corner, `u = r^λ φ(θ)` with `φ'' + λ²φ = 0` in every sector and `φ`,
//! `εφ'` continuous across sector boundaries. Propagating the state
//! `s = (φ, εφ'/λ)` once around the corner gives a transfer matrix `T(λ)`
//! with `det T = 1`; exponents are the zeros of
//!
//! ```text
//! D(λ) = det(T(λ) − I) = 2 − tr T(λ).
//! ```
//!
//! For two materials the same roots solve
//! `sin((π−ω)λ) / sin(πλ) = ±(ε1+ε2)/(ε1−ε2)`, handled separately by
//! [`solve_lamc`] as an independent cross-check.

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::CornerSpec;

pub const SCAN_MIN: f64 = 1e-6;
pub const SCAN_MAX: f64 = 1.0 - 1e-6;
pub const SCAN_STEP: f64 = 1e-3;
/// Roots are accepted when the defining function is this small.
pub const RESIDUAL_TOL: f64 = 1e-11;
/// `‖T − I‖` below this at a root means a two-dimensional null space.
const NULLITY_TOL: f64 = 1e-7;

/// Which equation produced an exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExponentFamily {
    /// `+` branch of the two-material equation.
    Plus,
    /// `−` branch of the two-material equation.
    Minus,
    /// Zero of the angular determinant.
    Determinant,
}

impl fmt::Display for ExponentFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExponentFamily::Plus => "plus",
            ExponentFamily::Minus => "minus",
            ExponentFamily::Determinant => "determinant",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularExponent {
    pub lambda: f64,
    /// Index of the corner in the caller's list, if any.
    pub corner: Option<usize>,
    pub family: ExponentFamily,
    /// `|f(λ)|` for the defining function `f`.
    pub residual: f64,
}

/// Sign-change scan of `f` on `[SCAN_MIN, SCAN_MAX]`, refined by bisection to
/// full precision. Touching zeros (no sign change) are picked up where `|f|`
/// has a local minimum below `touch_tol`, refined by golden-section search.
fn scan_roots(f: impl Fn(f64) -> f64, touch_tol: f64) -> Vec<f64> {
    let steps = ((SCAN_MAX - SCAN_MIN) / SCAN_STEP).ceil() as usize;
    let xs: Vec<f64> = (0..=steps)
        .map(|i| (SCAN_MIN + i as f64 * SCAN_STEP).min(SCAN_MAX))
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..xs.len() - 1 {
        let (a, b) = (ys[i], ys[i + 1]);
        if a == 0.0 {
            roots.push(xs[i]);
        } else if a.signum() != b.signum() && b != 0.0 {
            roots.push(bisect(&f, xs[i], xs[i + 1], a));
        } else if i > 0 && touch_tol > 0.0 {
            let (l, m, r) = (ys[i - 1].abs(), a.abs(), b.abs());
            if m <= l && m <= r && ys[i - 1].signum() == a.signum() && a.signum() == b.signum() {
                let x = golden_min(|x| f(x).abs(), xs[i - 1], xs[i + 1]);
                if f(x).abs() <= touch_tol {
                    roots.push(x);
                }
            }
        }
    }
    if ys[xs.len() - 1] == 0.0 {
        roots.push(xs[xs.len() - 1]);
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    roots
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-14 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn check_two_material(omega: f64, eps1: f64, eps2: f64) -> Result<()> {
    if !(omega > 0.0 && omega < TAU) {
        return Err(Error::InvalidInput(format!("opening angle {omega} outside (0, 2π)")));
    }
    if !(eps1 > 0.0 && eps2 > 0.0 && eps1.is_finite() && eps2.is_finite()) {
        return Err(Error::InvalidInput("permittivities must be positive".into()));
    }
    if (omega - PI).abs() <= 1e-12 {
        return Err(Error::FlatInterface);
    }
    if eps1 == eps2 {
        return Err(Error::NoInterface);
    }
    Ok(())
}

/// Scaled two-material function for branch `sign`:
/// `sin((π−ω)λ) (ε1−ε2)/(ε1+ε2) − sign · sin(πλ)`.
pub fn lamc_function(omega: f64, eps1: f64, eps2: f64, sign: f64, lambda: f64) -> f64 {
    let q = (eps1 - eps2) / (eps1 + eps2);
    ((PI - omega) * lambda).sin() * q - sign * (PI * lambda).sin()
}

/// All real roots in `(0, 1)` of both branches of the two-material equation,
/// ascending. More than one root contradicts uniqueness and is logged.
pub fn solve_lamc(omega: f64, eps1: f64, eps2: f64) -> Result<Vec<SingularExponent>> {
    check_two_material(omega, eps1, eps2)?;
    let mut out = Vec::new();
    for (sign, family) in [(1.0, ExponentFamily::Plus), (-1.0, ExponentFamily::Minus)] {
        let f = |l: f64| lamc_function(omega, eps1, eps2, sign, l);
        for lambda in scan_roots(f, 0.0) {
            out.push(SingularExponent {
                lambda,
                corner: None,
                family,
                residual: f(lambda).abs(),
            });
        }
    }
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    if out.len() > 1 {
        log::warn!(
            "two-material corner (ω = {omega}, ε = {eps1}/{eps2}) has {} roots in (0,1): {:?}",
            out.len(),
            out.iter().map(|e| e.lambda).collect::<Vec<_>>()
        );
    }
    Ok(out)
}

type Mat2 = [[f64; 2]; 2];

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Propagator of `(φ, εφ'/λ)` across a sector of permittivity `eps`:
/// `diag(1, ε) R(λα) diag(1, 1/ε)`, with `R(t) = [[cos t, sin t], [−sin t, cos t]]`.
fn sector_matrix(lambda: f64, opening: f64, eps: f64) -> Mat2 {
    let (s, c) = (lambda * opening).sin_cos();
    [[c, s / eps], [-s * eps, c]]
}

/// `T(λ)`: product of the sector propagators, first sector applied first.
pub fn transfer_matrix(corner: &CornerSpec, lambda: f64) -> [[f64; 2]; 2] {
    corner.sectors.iter().fold([[1.0, 0.0], [0.0, 1.0]], |t, s| {
        mul(&sector_matrix(lambda, s.opening, s.n2), &t)
    })
}

/// `det(T(λ) − I)`.
pub fn angular_determinant(corner: &CornerSpec, lambda: f64) -> f64 {
    let t = transfer_matrix(corner, lambda);
    (t[0][0] - 1.0) * (t[1][1] - 1.0) - t[0][1] * t[1][0]
}

/// Real exponents in `(0, 1)` of one corner, ascending.
pub fn find_exponents(corner: &CornerSpec) -> Vec<SingularExponent> {
    // D is bounded by a polynomial in the contrast; scale the touch tolerance.
    let contrast = corner
        .sectors
        .iter()
        .map(|s| s.n2)
        .fold(1.0f64, |m, e| m.max(e).max(1.0 / e));
    let touch = RESIDUAL_TOL * contrast.powi(corner.sectors.len() as i32).min(1e6);
    let f = |l: f64| angular_determinant(corner, l);
    scan_roots(f, touch)
        .into_iter()
        .map(|lambda| SingularExponent {
            lambda,
            corner: None,
            family: ExponentFamily::Determinant,
            residual: f(lambda).abs(),
        })
        .collect()
}

/// Exponents of every corner, tagged with the corner index.
pub fn corner_exponents(corners: &[CornerSpec]) -> Vec<SingularExponent> {
    corners
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            find_exponents(c).into_iter().map(move |mut e| {
                e.corner = Some(i);
                e
            })
        })
        .collect()
}

/// `σ_ε = min_c λ_c`; `+∞` ("smooth") when there are no corners or no real
/// exponent in `(0, 1)`.
pub fn sigma_epsilon(corners: &[CornerSpec]) -> f64 {
    corner_exponents(corners)
        .iter()
        .map(|e| e.lambda)
        .fold(f64::INFINITY, f64::min)
}

/// `φ(θ)` around a corner: per sector `A cos(λ(θ−ω_{ℓ−1})) + B sin(λ(θ−ω_{ℓ−1}))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFunction {
    pub lambda: f64,
    /// Absolute angles `ω_0 < … < ω_L = ω_0 + 2π`.
    pub boundaries: Vec<f64>,
    pub eps: Vec<f64>,
    /// `(A_ℓ, B_ℓ)` per sector.
    pub coeffs: Vec<(f64, f64)>,
}

impl AngularFunction {
    fn locate(&self, theta: f64) -> (usize, f64) {
        let w0 = self.boundaries[0];
        let t = w0 + (theta - w0).rem_euclid(TAU);
        let l = self.boundaries[1..]
            .iter()
            .position(|&b| t < b)
            .unwrap_or(self.coeffs.len() - 1);
        (l, t - self.boundaries[l])
    }

    /// Sector containing `θ` (half-open on the right).
    pub fn sector_of(&self, theta: f64) -> usize {
        self.locate(theta).0
    }

    /// `φ` evaluated with the coefficients of sector `l` (also valid slightly
    /// outside the sector, for one-sided limits).
    pub fn eval_in(&self, l: usize, theta: f64) -> f64 {
        let (a, b) = self.coeffs[l];
        let t = self.lambda * (theta - self.boundaries[l]);
        a * t.cos() + b * t.sin()
    }

    pub fn derivative_in(&self, l: usize, theta: f64) -> f64 {
        let (a, b) = self.coeffs[l];
        let t = self.lambda * (theta - self.boundaries[l]);
        self.lambda * (-a * t.sin() + b * t.cos())
    }

    pub fn second_derivative_in(&self, l: usize, theta: f64) -> f64 {
        -self.lambda * self.lambda * self.eval_in(l, theta)
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let (l, local) = self.locate(theta);
        self.eval_in(l, self.boundaries[l] + local)
    }

    /// `max |φ|`, located analytically per sector.
    pub fn max_abs(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (l, &(a, b)) in self.coeffs.iter().enumerate() {
            let span = self.lambda * (self.boundaries[l + 1] - self.boundaries[l]);
            let phase = b.atan2(a);
            let mut cands = vec![0.0, span];
            for k in -3..=3 {
                let t = phase + k as f64 * PI;
                if t > 0.0 && t < span {
                    cands.push(t);
                }
            }
            for t in cands {
                best = best.max((a * t.cos() + b * t.sin()).abs());
            }
        }
        best
    }
}

/// Builds `φ` from the null vector of `T(λ) − I`, normalised to `max |φ| = 1`.
pub fn angular_function(corner: &CornerSpec, lambda: f64) -> Result<AngularFunction> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("exponent {lambda} must be positive")));
    }
    let t = transfer_matrix(corner, lambda);
    let m = [[t[0][0] - 1.0, t[0][1]], [t[1][0], t[1][1] - 1.0]];
    let scale = t.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
    let rows = [m[0][0].hypot(m[0][1]), m[1][0].hypot(m[1][1])];
    if rows[0].max(rows[1]) <= NULLITY_TOL * scale {
        return Err(Error::DegenerateExponent { lambda, nullity: 2 });
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() > 1e-6 * scale * scale {
        return Err(Error::DegenerateExponent { lambda, nullity: 0 });
    }
    let r = if rows[0] >= rows[1] { m[0] } else { m[1] };
    let mut s = [r[1], -r[0]];

    let mut boundaries = vec![corner.start_angle];
    let mut eps = Vec::new();
    let mut coeffs = Vec::new();
    for sec in &corner.sectors {
        coeffs.push((s[0], s[1] / sec.n2));
        eps.push(sec.n2);
        boundaries.push(boundaries.last().unwrap() + sec.opening);
        let p = sector_matrix(lambda, sec.opening, sec.n2);
        s = [p[0][0] * s[0] + p[0][1] * s[1], p[1][0] * s[0] + p[1][1] * s[1]];
    }
    let mut f = AngularFunction {
        lambda,
        boundaries,
        eps,
        coeffs,
    };
    let norm = f.max_abs();
    for c in f.coeffs.iter_mut() {
        c.0 /= norm;
        c.1 /= norm;
    }
    Ok(f)
}

/// `r^λ φ(θ)` on the tensor grid `r × θ`, row-major in `r`.
pub fn eval_singular_function(
    corner: &CornerSpec,
    exponent: &SingularExponent,
    r: &[f64],
    theta: &[f64],
) -> Result<(AngularFunction, Vec<f64>)> {
    let phi = angular_function(corner, exponent.lambda)?;
    let angular: Vec<f64> = theta.iter().map(|&t| phi.eval(t)).collect();
    let values = r
        .iter()
        .flat_map(|&ri| {
            let radial = ri.powf(exponent.lambda);
            angular.iter().map(move |a| radial * a)
        })
        .collect();
    Ok((phi, values))
}
