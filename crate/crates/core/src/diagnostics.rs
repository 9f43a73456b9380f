//! `∇_ξ` calculus on truncated trigonometric fields, and numerical checks of
//! the curl–div identity and the Gårding inequality.
//!
//! A field is `v(x) = Σ_G v_G e^{iG·x}` over `|m1|, |m2| <= N`; the shifted
//! operators act coefficientwise with `k_G = (ξ'+G, β)`:
//!
//! ```text
//! (∇_ξ × v)_G = i k_G × v_G,   (∇_ξ · v)_G = i k_G · v_G,   (∇_ξ s)_G = i k_G s_G
//! ```
//!
//! Norms are cell averages, `‖v‖² = Σ_G |v_G|²`. Every inequality checked
//! here is homogeneous in the cell area, so the normalisation is immaterial.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lattice::{Lattice2D, ReciprocalLattice2D};
use crate::medium::FourierTable;
use crate::planewave::{BlochParams, Vec3};

const I: Complex64 = Complex64::new(0.0, 1.0);

pub type CVec3 = [Complex64; 3];

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    cutoff: usize,
    lattice: Lattice2D,
    recip: ReciprocalLattice2D,
    params: BlochParams,
    /// `(m, k_G)` in lexicographic order.
    modes: Vec<([i32; 2], Vec3)>,
}

impl Layout {
    fn new(lattice: Lattice2D, params: BlochParams, cutoff: usize) -> Self {
        let recip = lattice.reciprocal();
        let n = cutoff as i32;
        let modes = (-n..=n)
            .flat_map(|m1| (-n..=n).map(move |m2| [m1, m2]))
            .map(|m| (m, params.wavevector(recip.vector(m))))
            .collect();
        Self {
            cutoff,
            lattice,
            recip,
            params,
            modes,
        }
    }

    fn same_as(&self, other: &Self) -> Result<()> {
        if self.cutoff != other.cutoff || self.params != other.params || self.lattice != other.lattice {
            return Err(Error::ParamMismatch);
        }
        Ok(())
    }
}

/// Truncated vector field `Σ v_G e^{iG·x}` with Bloch parameters attached.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigField {
    layout: Layout,
    coeffs: Vec<CVec3>,
}

/// Truncated scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    layout: Layout,
    coeffs: Vec<Complex64>,
}

impl TrigField {
    pub fn zeros(lattice: Lattice2D, params: BlochParams, cutoff: usize) -> Self {
        let layout = Layout::new(lattice, params, cutoff);
        let coeffs = vec![[Complex64::default(); 3]; layout.modes.len()];
        Self { layout, coeffs }
    }

    /// Coefficients in lexicographic `(m1, m2)` order.
    pub fn from_coefficients(lattice: Lattice2D, params: BlochParams, cutoff: usize, coeffs: Vec<CVec3>) -> Result<Self> {
        let layout = Layout::new(lattice, params, cutoff);
        if coeffs.len() != layout.modes.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                layout.modes.len()
            )));
        }
        Ok(Self { layout, coeffs })
    }

    /// Independent standard complex Gaussian coefficients.
    pub fn random(lattice: Lattice2D, params: BlochParams, cutoff: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Self::zeros(lattice, params, cutoff);
        for c in f.coeffs.iter_mut() {
            for z in c.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *z = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
            }
        }
        f
    }

    pub fn cutoff(&self) -> usize {
        self.layout.cutoff
    }

    pub fn params(&self) -> &BlochParams {
        &self.layout.params
    }

    pub fn coefficients(&self) -> &[CVec3] {
        &self.coeffs
    }

    pub fn set(&mut self, m: [i32; 2], v: CVec3) {
        let i = self.index(m).expect("mode outside cutoff");
        self.coeffs[i] = v;
    }

    pub fn get(&self, m: [i32; 2]) -> Option<CVec3> {
        self.index(m).map(|i| self.coeffs[i])
    }

    fn index(&self, m: [i32; 2]) -> Option<usize> {
        let n = self.layout.cutoff as i32;
        if m[0].abs() > n || m[1].abs() > n {
            return None;
        }
        Some(((m[0] + n) * (2 * n + 1) + m[1] + n) as usize)
    }

    /// `‖v‖²`.
    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(cnorm_sqr).sum()
    }

    /// `(v, w) = Σ v_G · conj(w_G)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.layout.same_as(&other.layout)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (0..3).map(|d| a[d] * b[d].conj()).sum::<Complex64>())
            .sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.layout.same_as(&other.layout)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| [0, 1, 2].map(|d| a[d] - b[d]))
            .collect();
        Ok(Self {
            layout: self.layout.clone(),
            coeffs,
        })
    }

    /// `‖∇_ξ v‖² = Σ |k_G|² |v_G|²`.
    pub fn shifted_gradient_norm_sqr(&self) -> f64 {
        self.layout
            .modes
            .iter()
            .zip(&self.coeffs)
            .map(|((_, k), v)| dot(*k, *k) * cnorm_sqr(v))
            .sum()
    }

    /// `‖∇v‖² = Σ |G|² |v_G|²` (no Bloch shift, no `z` derivative).
    pub fn plain_gradient_norm_sqr(&self) -> f64 {
        self.layout
            .modes
            .iter()
            .zip(&self.coeffs)
            .map(|((m, _), v)| {
                let g = self.layout.recip.vector(*m);
                (g[0] * g[0] + g[1] * g[1]) * cnorm_sqr(v)
            })
            .sum()
    }

    /// Removes the longitudinal part `k_G (k_G·v_G)/|k_G|²` of every mode
    /// (modes with `k_G = 0` are kept as they are).
    pub fn project_divergence_free(&self) -> Self {
        let coeffs = self
            .layout
            .modes
            .iter()
            .zip(&self.coeffs)
            .map(|((_, k), v)| {
                let kk = dot(*k, *k);
                if kk < 1e-28 {
                    return *v;
                }
                let s = cdot(*k, *v) / kk;
                [0, 1, 2].map(|d| v[d] - s * k[d])
            })
            .collect();
        Self {
            layout: self.layout.clone(),
            coeffs,
        }
    }
}

impl ScalarField {
    pub fn from_coefficients(lattice: Lattice2D, params: BlochParams, cutoff: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let layout = Layout::new(lattice, params, cutoff);
        if coeffs.len() != layout.modes.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                layout.modes.len()
            )));
        }
        Ok(Self { layout, coeffs })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[inline]
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cdot(k: Vec3, u: CVec3) -> Complex64 {
    u[0] * k[0] + u[1] * k[1] + u[2] * k[2]
}

#[inline]
fn ccross(k: Vec3, u: CVec3) -> CVec3 {
    [
        u[2] * k[1] - u[1] * k[2],
        u[0] * k[2] - u[2] * k[0],
        u[1] * k[0] - u[0] * k[1],
    ]
}

#[inline]
fn cnorm_sqr(u: &CVec3) -> f64 {
    u.iter().map(|c| c.norm_sqr()).sum()
}

pub fn curl_xi(v: &TrigField) -> TrigField {
    let coeffs = v
        .layout
        .modes
        .iter()
        .zip(&v.coeffs)
        .map(|((_, k), c)| ccross(*k, *c).map(|z| I * z))
        .collect();
    TrigField {
        layout: v.layout.clone(),
        coeffs,
    }
}

pub fn div_xi(v: &TrigField) -> ScalarField {
    let coeffs = v
        .layout
        .modes
        .iter()
        .zip(&v.coeffs)
        .map(|((_, k), c)| I * cdot(*k, *c))
        .collect();
    ScalarField {
        layout: v.layout.clone(),
        coeffs,
    }
}

pub fn grad_xi(s: &ScalarField) -> TrigField {
    let coeffs = s
        .layout
        .modes
        .iter()
        .zip(&s.coeffs)
        .map(|((_, k), c)| [0, 1, 2].map(|d| I * c * k[d]))
        .collect();
    TrigField {
        layout: s.layout.clone(),
        coeffs,
    }
}

/// Both sides of `‖∇_ξ×v‖² + ‖∇_ξ·v‖² = ‖∇_ξ v‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

pub fn check_identity(v: &TrigField) -> IdentityCheck {
    let lhs = curl_xi(v).norm_sqr() + div_xi(v).norm_sqr();
    let rhs = v.shifted_gradient_norm_sqr();
    IdentityCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    }
}

/// Gårding inequality in two forms, evaluated on the divergence-free part of
/// the input field:
///
/// ```text
/// lhs  = ‖n‖²∞ a(v,v) + (3|ξ|² + 1)‖v‖²    ≥ rhs  = ½‖v‖²_{H¹}
/// lhs2 = ‖n‖²∞ a(v,v) + (3|ξ'|² + 1)‖v‖²   ≥ rhs2 = ½‖v‖²_{H¹} + β²‖v‖²
/// ```
///
/// with `ξ = (ξ', β)`, `a(v,v) = ∫ η |∇_ξ×v|²` and the unshifted
/// `‖v‖²_{H¹} = ‖v‖² + ‖∇v‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GardingCheck {
    pub form: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub lhs2: f64,
    pub rhs2: f64,
    pub slack2: f64,
}

impl GardingCheck {
    /// Both slacks nonnegative up to `1e-10 (1 + |lhs|)`.
    pub fn holds(&self) -> bool {
        self.slack >= -1e-10 * (1.0 + self.lhs.abs()) && self.slack2 >= -1e-10 * (1.0 + self.lhs2.abs())
    }
}

/// `a(v, v) = Σ_{G,G'} η̂(G−G') (k_G×v_G)·conj(k_G'×v_G')`.
pub fn curl_form(v: &TrigField, table: &FourierTable) -> Result<f64> {
    if table.cutoff() < v.cutoff() {
        return Err(Error::TableTooSmall {
            table: table.cutoff(),
            basis: v.cutoff(),
        });
    }
    let modes = &v.layout.modes;
    let curls: Vec<CVec3> = modes.iter().zip(&v.coeffs).map(|((_, k), c)| ccross(*k, *c)).collect();
    let mut total = Complex64::default();
    for ((mi, _), ci) in modes.iter().zip(&curls) {
        let mut row = [Complex64::default(); 3];
        for ((mj, _), cj) in modes.iter().zip(&curls) {
            let eta = table.get([mi[0] - mj[0], mi[1] - mj[1]]).unwrap();
            for d in 0..3 {
                row[d] += eta * cj[d];
            }
        }
        total += (0..3).map(|d| row[d] * ci[d].conj()).sum::<Complex64>();
    }
    Ok(total.re)
}

pub fn check_garding(v: &TrigField, table: &FourierTable, n_inf: f64) -> Result<GardingCheck> {
    let v = v.project_divergence_free();
    let form = curl_form(&v, table)?;
    let p = v.params();
    let xi_t2 = p.xi()[0] * p.xi()[0] + p.xi()[1] * p.xi()[1];
    let beta2 = p.beta() * p.beta();
    let l2 = v.norm_sqr();
    let h1 = l2 + v.plain_gradient_norm_sqr();
    let scaled = n_inf * n_inf * form;
    let lhs = scaled + (3.0 * (xi_t2 + beta2) + 1.0) * l2;
    let rhs = 0.5 * h1;
    let lhs2 = scaled + (3.0 * xi_t2 + 1.0) * l2;
    let rhs2 = 0.5 * h1 + beta2 * l2;
    Ok(GardingCheck {
        form,
        lhs,
        rhs,
        slack: lhs - rhs,
        lhs2,
        rhs2,
        slack2: lhs2 - rhs2,
    })
}
