//! Dense Hermitian eigensolver for the lowest part of the spectrum.
//!
//! Householder reduction to tridiagonal form, a diagonal unitary scaling to a
//! real symmetric tridiagonal, Sturm-sequence bisection for the wanted
//! eigenvalues and inverse iteration for their vectors, which are then mapped
//! back through the reflectors. Every step is sequential with a fixed
//! summation order, so results are bit-reproducible.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Lowest eigenpairs of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEigen {
    pub dim: usize,
    /// Ascending.
    pub values: Vec<f64>,
    /// Column-major `dim × values.len()`, unit 2-norm columns.
    pub vectors: Vec<Complex64>,
    /// `max |λ|` over the whole spectrum.
    pub spectral_radius: f64,
    /// Largest `‖A v - λ v‖ / max(‖A‖, 1)` over the returned pairs.
    pub max_residual: f64,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> &[Complex64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }
}

/// Column-major lower triangle of a Hermitian matrix, split into real and
/// imaginary planes so the inner loops vectorise.
struct SplitLower {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitLower {
    fn from_full(a: &[Complex64], n: usize) -> Self {
        let mut re = vec![0.0; n * n];
        let mut im = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                let z = a[j * n + i];
                re[j * n + i] = z.re;
                im[j * n + i] = z.im;
            }
        }
        Self { n, re, im }
    }
}

/// Householder data kept for the back transformation.
struct Tridiagonal {
    diag: Vec<f64>,
    /// Complex subdiagonal `T[k+1, k]`.
    sub: Vec<Complex64>,
    /// Reflector `k` acts on rows `k+1..n`; stored in the strictly lower part.
    reflectors: SplitLower,
    tau: Vec<f64>,
}

/// Builds the reflector annihilating column `k` below the subdiagonal. The
/// reflector `v` is written back into the column and copied to `(vre, vim)`.
/// Returns `(alpha, tau)`; `tau == 0` means the column is already reduced.
fn make_reflector(a: &mut SplitLower, k: usize, vre: &mut [f64], vim: &mut [f64]) -> (Complex64, f64) {
    let n = a.n;
    let col = k * n;
    let lo = k + 1;
    let x0 = Complex64::new(a.re[col + lo], a.im[col + lo]);
    let tail2: f64 = (lo + 1..n)
        .map(|i| a.re[col + i] * a.re[col + i] + a.im[col + i] * a.im[col + i])
        .sum();
    if tail2 == 0.0 {
        return (x0, 0.0);
    }
    let norm = (tail2 + x0.norm_sqr()).sqrt();
    let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { Complex64::new(1.0, 0.0) };
    let alpha = -phase * norm;
    let v0 = x0 - alpha;
    a.re[col + lo] = v0.re;
    a.im[col + lo] = v0.im;
    vre[lo..n].copy_from_slice(&a.re[col + lo..col + n]);
    vim[lo..n].copy_from_slice(&a.im[col + lo..col + n]);
    (alpha, 2.0 / (tail2 + v0.norm_sqr()))
}

/// `B[j.., j] -= x conj(w_j) + y conj(v_j)` where `x = v[j..]`, `y = w[j..]`.
#[inline]
fn rank2_column(bre: &mut [f64], bim: &mut [f64], v: (&[f64], &[f64]), w: (&[f64], &[f64]), vj: (f64, f64), wj: (f64, f64)) {
    let (vr, vi) = vj;
    let (wr, wi) = wj;
    for ((((b, xr), xi), yr), yi) in bre.iter_mut().zip(v.0).zip(v.1).zip(w.0).zip(w.1) {
        *b -= xr * wr + xi * wi + yr * vr + yi * vi;
    }
    for ((((b, xr), xi), yr), yi) in bim.iter_mut().zip(v.0).zip(v.1).zip(w.0).zip(w.1) {
        *b -= xi * wr - xr * wi + yi * vr - yr * vi;
    }
    bim[0] = 0.0;
}

/// Accumulates column `j` of the Hermitian product `p += B v` from lower
/// storage: `bre/bim` hold `B[j.., j]`, `v` and `p` are indexed from `j`.
#[inline]
fn hermitian_column_product(bre: &[f64], bim: &[f64], v: (&[f64], &[f64]), p: (&mut [f64], &mut [f64])) {
    let len = bre.len();
    let (vr, vi) = (v.0[0], v.1[0]);
    let d = bre[0];
    let (bre, bim) = (&bre[1..], &bim[1..len]);
    let (wre, wim) = (&v.0[1..len], &v.1[1..len]);
    let (pr, pi) = (&mut p.0[..len], &mut p.1[..len]);
    let (p0r, pr) = pr.split_first_mut().unwrap();
    let (p0i, pi) = pi.split_first_mut().unwrap();
    for ((pr, br), bi) in pr.iter_mut().zip(bre).zip(bim) {
        *pr += br * vr - bi * vi;
    }
    for ((pi, br), bi) in pi.iter_mut().zip(bre).zip(bim) {
        *pi += br * vi + bi * vr;
    }
    let mut ar = [0.0f64; 8];
    let mut ai = [0.0f64; 8];
    let mut tail_r = 0.0;
    let mut tail_i = 0.0;
    let cb = bre.chunks_exact(8);
    let rem = cb.remainder().len();
    for (((br, bi), wr), wi) in cb
        .zip(bim.chunks_exact(8))
        .zip(wre.chunks_exact(8))
        .zip(wim.chunks_exact(8))
    {
        for l in 0..8 {
            ar[l] += br[l] * wr[l] + bi[l] * wi[l];
            ai[l] += br[l] * wi[l] - bi[l] * wr[l];
        }
    }
    let start = bre.len() - rem;
    for i in start..bre.len() {
        tail_r += bre[i] * wre[i] + bim[i] * wim[i];
        tail_i += bre[i] * wim[i] - bim[i] * wre[i];
    }
    let sr = ((ar[0] + ar[1]) + (ar[2] + ar[3])) + ((ar[4] + ar[5]) + (ar[6] + ar[7]));
    let si = ((ai[0] + ai[1]) + (ai[2] + ai[3])) + ((ai[4] + ai[5]) + (ai[6] + ai[7]));
    *p0r += d * vr + sr + tail_r;
    *p0i += d * vi + si + tail_i;
}

fn tridiagonalize(mut a: SplitLower) -> Tridiagonal {
    let n = a.n;
    let mut diag = vec![0.0; n];
    let mut sub = vec![Complex64::default(); n.saturating_sub(1)];
    let mut tau = vec![0.0; n.saturating_sub(1)];
    if n == 0 {
        return Tridiagonal { diag, sub, reflectors: a, tau };
    }
    // current reflector v, its product p (then w), and the next pair
    let (mut vre, mut vim) = (vec![0.0; n], vec![0.0; n]);
    let (mut pre, mut pim) = (vec![0.0; n], vec![0.0; n]);
    let (mut nvre, mut nvim) = (vec![0.0; n], vec![0.0; n]);
    let (mut npre, mut npim) = (vec![0.0; n], vec![0.0; n]);

    if n > 1 {
        let (alpha, t) = make_reflector(&mut a, 0, &mut vre, &mut vim);
        sub[0] = alpha;
        tau[0] = t;
        if t > 0.0 {
            for j in 1..n {
                let cj = j * n;
                hermitian_column_product(
                    &a.re[cj + j..cj + n],
                    &a.im[cj + j..cj + n],
                    (&vre[j..], &vim[j..]),
                    (&mut pre[j..], &mut pim[j..]),
                );
            }
        }
    }

    for k in 0..n.saturating_sub(1) {
        diag[k] = a.re[k * n + k];
        let lo = k + 1;
        let t = tau[k];
        if t > 0.0 {
            for i in lo..n {
                pre[i] *= t;
                pim[i] *= t;
            }
            let vhp: f64 = (lo..n).map(|i| vre[i] * pre[i] + vim[i] * pim[i]).sum();
            let kk = 0.5 * t * vhp;
            for i in lo..n {
                pre[i] -= kk * vre[i];
                pim[i] -= kk * vim[i];
            }
            let c = lo * n;
            rank2_column(
                &mut a.re[c + lo..c + n],
                &mut a.im[c + lo..c + n],
                (&vre[lo..], &vim[lo..]),
                (&pre[lo..], &pim[lo..]),
                (vre[lo], vim[lo]),
                (pre[lo], pim[lo]),
            );
        }
        let next_t = if k + 2 < n {
            let (alpha, nt) = make_reflector(&mut a, k + 1, &mut nvre, &mut nvim);
            sub[k + 1] = alpha;
            tau[k + 1] = nt;
            nt
        } else {
            0.0
        };
        if t == 0.0 && next_t == 0.0 {
            continue;
        }
        let nlo = k + 2;
        npre[nlo.min(n)..n].fill(0.0);
        npim[nlo.min(n)..n].fill(0.0);
        // one pass: finish step k on column j, then feed it to step k+1
        for j in nlo..n {
            let cj = j * n;
            let (bre, bim) = (&mut a.re[cj + j..cj + n], &mut a.im[cj + j..cj + n]);
            if t > 0.0 {
                rank2_column(
                    bre,
                    bim,
                    (&vre[j..], &vim[j..]),
                    (&pre[j..], &pim[j..]),
                    (vre[j], vim[j]),
                    (pre[j], pim[j]),
                );
            }
            if next_t > 0.0 {
                hermitian_column_product(bre, bim, (&nvre[j..], &nvim[j..]), (&mut npre[j..], &mut npim[j..]));
            }
        }
        std::mem::swap(&mut vre, &mut nvre);
        std::mem::swap(&mut vim, &mut nvim);
        std::mem::swap(&mut pre, &mut npre);
        std::mem::swap(&mut pim, &mut npim);
    }
    diag[n - 1] = a.re[(n - 1) * n + (n - 1)];
    Tridiagonal {
        diag,
        sub,
        reflectors: a,
        tau,
    }
}

/// Number of eigenvalues of the symmetric tridiagonal `(d, e)` below `x`.
fn sturm_count(d: &[f64], e2: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        q = d[i] - x - e2[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) by bisection.
fn bisect_eigenvalue(d: &[f64], e2: &[f64], k: usize, lo: f64, hi: f64, pivmin: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..256 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if sturm_count(d, e2, mid, pivmin) > k {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

/// Solves `(T - λ I) x = b` for symmetric tridiagonal `T` with partial pivoting.
/// Zero pivots are replaced by `pivmin`.
fn tridiagonal_solve(d: &[f64], e: &[f64], lambda: f64, b: &mut [f64], pivmin: f64) {
    let n = d.len();
    if n == 1 {
        let p = d[0] - lambda;
        b[0] /= if p.abs() < pivmin { pivmin } else { p };
        return;
    }
    // U has diagonal u0 and two superdiagonals u1, u2
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    // current row i of the partially eliminated matrix
    let mut ci = d[0] - lambda;
    let mut si = e[0];
    for i in 0..n - 1 {
        let below_diag = e[i];
        let below_next = d[i + 1] - lambda;
        let below_next2 = if i + 1 < n - 1 { e[i + 1] } else { 0.0 };
        if ci.abs() >= below_diag.abs() {
            let piv = if ci.abs() < pivmin { pivmin.copysign(ci) } else { ci };
            let l = below_diag / piv;
            u0[i] = piv;
            u1[i] = si;
            u2[i] = 0.0;
            b[i + 1] -= l * b[i];
            ci = below_next - l * si;
            si = below_next2;
        } else {
            let l = ci / below_diag;
            u0[i] = below_diag;
            u1[i] = below_next;
            u2[i] = below_next2;
            b.swap(i, i + 1);
            b[i + 1] -= l * b[i];
            ci = si - l * below_next;
            si = -l * below_next2;
        }
    }
    u0[n - 1] = if ci.abs() < pivmin { pivmin.copysign(if ci == 0.0 { 1.0 } else { ci }) } else { ci };
    // back substitution
    b[n - 1] /= u0[n - 1];
    if n >= 2 {
        b[n - 2] = (b[n - 2] - u1[n - 2] * b[n - 1]) / u0[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - u1[i] * b[i + 1] - u2[i] * b[i + 2]) / u0[i];
    }
}

/// Deterministic start vectors for inverse iteration.
fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x2545_F491_4F6C_DD1D);
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn normalize(x: &mut [f64]) -> f64 {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
    nrm
}

/// Lowest `nev` eigenpairs of the Hermitian matrix `a` (column-major, full
/// storage; only the lower triangle is read).
pub fn hermitian_lowest(a: &[Complex64], n: usize, nev: usize, tol: f64) -> Result<HermitianEigen> {
    if a.len() != n * n {
        return Err(Error::InvalidInput(format!(
            "matrix storage has {} entries, expected {}",
            a.len(),
            n * n
        )));
    }
    if nev > n {
        return Err(Error::InvalidInput(format!(
            "requested {nev} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if !(tol > 0.0 && tol <= 1e-4) {
        return Err(Error::InvalidInput(format!("tolerance {tol} outside (0, 1e-4]")));
    }
    if n == 0 || nev == 0 {
        return Ok(HermitianEigen {
            dim: n,
            values: vec![],
            vectors: vec![],
            spectral_radius: 0.0,
            max_residual: 0.0,
        });
    }

    let tri = tridiagonalize(SplitLower::from_full(a, n));
    let d = &tri.diag;
    let e: Vec<f64> = tri.sub.iter().map(|z| z.norm()).collect();
    let e2: Vec<f64> = e.iter().map(|v| v * v).collect();

    // Gershgorin interval
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1] } else { 0.0 } + if i + 1 < n { e[i] } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let tnorm = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    lo -= 2.0 * f64::EPSILON * tnorm * n as f64 + f64::MIN_POSITIVE;
    hi += 2.0 * f64::EPSILON * tnorm * n as f64 + f64::MIN_POSITIVE;
    let pivmin = f64::MIN_POSITIVE * e2.iter().copied().fold(1.0, f64::max);

    let mut values = Vec::with_capacity(nev);
    let mut left = lo;
    for k in 0..nev {
        let v = bisect_eigenvalue(d, &e2, k, left, hi, pivmin);
        values.push(v);
        left = lo.max(v - 4.0 * f64::EPSILON * tnorm);
    }
    let top = bisect_eigenvalue(d, &e2, n - 1, lo, hi, pivmin);
    let spectral_radius = values[0].abs().max(top.abs());

    // inverse iteration on the real tridiagonal
    let solve_pivmin = (f64::EPSILON * tnorm).max(pivmin);
    let mut real_vecs: Vec<Vec<f64>> = Vec::with_capacity(nev);
    for (k, &lambda) in values.iter().enumerate() {
        let mut x = start_vector(n, k as u64 + 1);
        normalize(&mut x);
        for _ in 0..4 {
            tridiagonal_solve(d, &e, lambda, &mut x, solve_pivmin);
            for _ in 0..2 {
                for prev in &real_vecs {
                    let c: f64 = prev.iter().zip(&x).map(|(p, v)| p * v).sum();
                    x.iter_mut().zip(prev).for_each(|(v, p)| *v -= c * p);
                }
            }
            if normalize(&mut x) == 0.0 {
                x = start_vector(n, 1000 + k as u64);
                normalize(&mut x);
            }
        }
        real_vecs.push(x);
    }

    // undo the phase scaling and the Householder reflectors
    let mut phase = vec![Complex64::new(1.0, 0.0); n];
    for i in 0..n - 1 {
        let s = tri.sub[i];
        let u = if s.norm() > 0.0 { s / s.norm() } else { Complex64::new(1.0, 0.0) };
        phase[i + 1] = phase[i] * u;
    }
    let refl = &tri.reflectors;
    let mut vectors = vec![Complex64::default(); n * nev];
    for (k, x) in real_vecs.iter().enumerate() {
        let y = &mut vectors[k * n..(k + 1) * n];
        for i in 0..n {
            y[i] = phase[i] * x[i];
        }
        for kk in (0..n - 1).rev() {
            let t = tri.tau[kk];
            if t == 0.0 {
                continue;
            }
            let col = kk * n;
            let mut s = Complex64::default();
            for i in kk + 1..n {
                let v = Complex64::new(refl.re[col + i], refl.im[col + i]);
                s += v.conj() * y[i];
            }
            s *= t;
            for i in kk + 1..n {
                let v = Complex64::new(refl.re[col + i], refl.im[col + i]);
                y[i] -= v * s;
            }
        }
        fix_phase(y);
    }

    let scale = spectral_radius.max(1.0);
    let mut max_residual: f64 = 0.0;
    for (k, &lambda) in values.iter().enumerate() {
        let r = residual_norm(a, n, &vectors[k * n..(k + 1) * n], lambda);
        max_residual = max_residual.max(r / scale);
    }
    if !(max_residual <= tol) {
        return Err(Error::SolverDiverged {
            residual: max_residual,
        });
    }
    Ok(HermitianEigen {
        dim: n,
        values,
        vectors,
        spectral_radius,
        max_residual,
    })
}

/// Makes the largest-magnitude entry (first on ties) real and positive.
pub(crate) fn fix_phase(y: &mut [Complex64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in y.iter().enumerate() {
        let m = z.norm_sqr();
        if m > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let u = y[best].conj() / y[best].norm();
        y.iter_mut().for_each(|z| *z *= u);
        y[best].im = 0.0;
    }
}

/// `‖A v - λ v‖₂` using the lower triangle of `a` only.
pub(crate) fn residual_norm(a: &[Complex64], n: usize, v: &[Complex64], lambda: f64) -> f64 {
    let mut r: Vec<Complex64> = v.iter().map(|z| -lambda * z).collect();
    for j in 0..n {
        let col = &a[j * n..(j + 1) * n];
        let vj = v[j];
        r[j] += Complex64::new(col[j].re, 0.0) * vj;
        let mut acc = Complex64::default();
        for i in j + 1..n {
            r[i] += col[i] * vj;
            acc += col[i].conj() * v[i];
        }
        r[j] += acc;
    }
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
