//! Deterministic CSV rendering for band tables, exponents and convergence
//! records.
//!
//! Every file starts with `#` metadata lines (including the seed), then one
//! header row naming each column with its unit. Reals are written as
//! `{:.12e}`, so equal inputs give byte-identical files.

use std::fmt::Write;

use crate::convergence::{BandTable, ConvergenceRecord};
use crate::corner::SingularExponent;
use crate::fields::SampledField;
use crate::geometry::CornerSpec;
use crate::lattice::{KSample, Lattice2D};

pub const BANDS_HEADER: &str = "k_index,arclength[1/a],xi_x[1/a],xi_y[1/a],band,kappa2[1/a^2]";
pub const EXPONENTS_HEADER: &str = "corner_index,x[a],y[a],sector_count,lambda,family,residual";
pub const CONVERGE_HEADER: &str = "k_index,band,N,dof,kappa2[1/a^2],error[1/a^2],p_hat_window";
pub const ORDERS_HEADER: &str =
    "k_index,band,reference[1/a^2],richardson_order,p_hat,fit_residual,p_hat_final_window";
pub const FIELD_HEADER: &str = "i,j,x[a],y[a],hx_re,hx_im,hy_re,hy_im,hz_re,hz_im,ex_re,ex_im,ey_re,ey_im,ez_re,ez_im";
pub const GAPS_HEADER: &str = "gap_index,bottom_kappa2[1/a^2],top_kappa2[1/a^2],width[1/a^2]";

pub fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.12e}")
    }
}

fn preamble(kind: &str, meta: &[(&str, String)], header: &str) -> String {
    let mut s = format!("# pcf {kind}");
    for (k, v) in meta {
        let _ = write!(s, " {k}={v}");
    }
    s.push('\n');
    s.push_str(header);
    s.push('\n');
    s
}

/// One row per `(k-point, band)`, k-major.
pub fn bands_csv(samples: &[KSample], table: &BandTable, meta: &[(&str, String)]) -> String {
    let mut s = preamble("bands", meta, BANDS_HEADER);
    for (k, smp) in samples.iter().enumerate() {
        for (b, band) in table.values.iter().enumerate() {
            let _ = writeln!(
                s,
                "{k},{},{},{},{b},{}",
                real(smp.arclength),
                real(smp.xi[0]),
                real(smp.xi[1]),
                real(band[k])
            );
        }
    }
    s
}

pub fn gaps_csv(gaps: &[(f64, f64)], meta: &[(&str, String)]) -> String {
    let mut s = preamble("gaps", meta, GAPS_HEADER);
    for (i, (lo, hi)) in gaps.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{}", real(*lo), real(*hi), real(hi - lo));
    }
    s
}

/// Exponents must carry their corner index. `sigma` is appended as a
/// trailing `# sigma_epsilon=` line, `smooth` when infinite (no corners).
pub fn exponents_csv(
    corners: &[CornerSpec],
    exponents: &[SingularExponent],
    sigma: f64,
    meta: &[(&str, String)],
) -> String {
    let mut s = preamble("exponents", meta, EXPONENTS_HEADER);
    for e in exponents {
        let i = e.corner.expect("exponent without corner index");
        let c = &corners[i];
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{}",
            real(c.location[0]),
            real(c.location[1]),
            c.sectors.len(),
            real(e.lambda),
            e.family,
            real(e.residual)
        );
    }
    let sigma = if sigma.is_infinite() { "smooth".into() } else { real(sigma) };
    let _ = writeln!(s, "# sigma_epsilon={sigma}");
    s
}

/// `p_hat_window` on the row of rung `j` is the fit over the window ending at
/// `j`; `nan` for the first rungs.
pub fn converge_csv(record: &ConvergenceRecord, meta: &[(&str, String)]) -> String {
    let mut s = preamble("converge", meta, CONVERGE_HEADER);
    let w = crate::convergence::WINDOW;
    for t in &record.tracks {
        for (j, &n) in record.ladder.iter().enumerate() {
            let p = if j + 1 >= w {
                t.windows
                    .get(j + 1 - w)
                    .and_then(|f| f.as_ref())
                    .map_or(f64::NAN, |f| f.order)
            } else {
                f64::NAN
            };
            let _ = writeln!(
                s,
                "{},{},{n},{},{},{},{}",
                t.k_index,
                t.band,
                record.dofs[j] as u64,
                real(t.kappa2[j]),
                real(t.errors[j]),
                real(p)
            );
        }
    }
    s
}

/// One row per track: the Richardson reference and the fitted orders.
pub fn orders_csv(record: &ConvergenceRecord, meta: &[(&str, String)]) -> String {
    let mut s = preamble("orders", meta, ORDERS_HEADER);
    for t in &record.tracks {
        let (p, r) = t.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.order, f.residual));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            t.k_index,
            t.band,
            real(t.reference),
            real(t.richardson_order.unwrap_or(f64::NAN)),
            real(p),
            real(r),
            real(t.final_window_order().unwrap_or(f64::NAN))
        );
    }
    s
}

/// `h` and `e` on the same grid, row-major in `(i, j)`.
pub fn field_csv(lat: &Lattice2D, h: &SampledField, e: &SampledField, meta: &[(&str, String)]) -> String {
    assert_eq!(h.grid, e.grid, "h and e sampled on different grids");
    let mut s = preamble("field", meta, FIELD_HEADER);
    let m = h.grid.m;
    for i in 0..m {
        for j in 0..m {
            let x = h.grid.point(lat, i, j);
            let _ = write!(s, "{i},{j},{},{}", real(x[0]), real(x[1]));
            for c in h.at(i, j).iter().chain(e.at(i, j).iter()) {
                let _ = write!(s, ",{},{}", real(c.re), real(c.im));
            }
            s.push('\n');
        }
    }
    s
}
