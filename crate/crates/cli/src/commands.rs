//! Subcommand implementations. Each command renders all of its files in
//! memory first; files are then written one at a time, and if any write
//! fails the ones already written are removed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use pcf_core::fields::{divergence_residual, faraday_residual};
use pcf_core::output::{
    bands_csv, converge_csv, exponents_csv, field_csv, gaps_csv, orders_csv, real,
};
use pcf_core::{
    assemble, band_sweep, build_basis, check_garding, check_identity, corner_exponents,
    detect_gaps, eigensolve, eta_fourier_polygon, find_exponents, reconstruct_h, recover_e,
    resolution_sweep, sample_kpath, sigma_epsilon, solve_bands, solve_lamc, BlochParams,
    FourierTable, KSample, SweepPlan, TrigField,
};

use crate::config::{Config, ConfigError};

pub const VALIDATE_HEADER: &str = "check,value,threshold,status";

/// Random fields per randomized validation check.
const VALIDATE_SAMPLES: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bands,
    Exponents,
    Converge,
    Validate,
    Field,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Exponents => "exponents",
            Command::Converge => "converge",
            Command::Validate => "validate",
            Command::Field => "field",
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{context}: {source}")]
    Solver {
        context: &'static str,
        #[source]
        source: pcf_core::Error,
    },

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} validation check(s) failed")]
    ValidationFailed { failed: usize, files: Vec<PathBuf> },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::ValidationFailed { .. } => 1,
            RunError::Config(_) => 2,
            RunError::Solver { .. } | RunError::Io { .. } => 3,
        }
    }
}

trait Context<T> {
    fn context(self, context: &'static str) -> Result<T, RunError>;
}

impl<T> Context<T> for pcf_core::Result<T> {
    fn context(self, context: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Solver { context, source })
    }
}

/// Files produced by one command, as `(file name, contents)`.
#[derive(Debug, Default)]
struct Outputs(Vec<(String, String)>);

impl Outputs {
    fn add(&mut self, name: &str, contents: String) {
        self.0.push((name.to_string(), contents));
    }

    fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| RunError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for (name, contents) in self.0 {
            let path = dir.join(name);
            if let Err(e) = std::fs::write(&path, contents) {
                let _ = std::fs::remove_file(&path);
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(io(&path)(e));
            }
            written.push(path);
        }
        Ok(written)
    }
}

fn meta(cfg: &Config) -> Vec<(&'static str, String)> {
    vec![
        ("seed", cfg.seed.to_string()),
        ("beta", real(cfg.beta)),
        ("N", cfg.cutoff.to_string()),
        ("tol", real(cfg.tol)),
    ]
}

/// Runs `cmd` and writes its files into `out`. Returns the written paths.
pub fn run(cmd: Command, cfg: &Config, out: &Path) -> Result<Vec<PathBuf>, RunError> {
    let mut files = Outputs::default();
    let failed = match cmd {
        Command::Bands => bands(cfg, &mut files)?,
        Command::Exponents => exponents(cfg, &mut files),
        Command::Converge => converge(cfg, &mut files)?,
        Command::Validate => validate(cfg, &mut files)?,
        Command::Field => field(cfg, &mut files)?,
    };
    let written = files.commit(out)?;
    if failed > 0 {
        return Err(RunError::ValidationFailed { failed, files: written });
    }
    Ok(written)
}

fn bands(cfg: &Config, files: &mut Outputs) -> Result<usize, RunError> {
    let samples = sample_kpath(&cfg.kpath, &cfg.lattice).context("k-path")?;
    let table = eta_fourier_polygon(&cfg.medium, cfg.cutoff);
    let bt = band_sweep(&cfg.lattice, &table, &samples, cfg.beta, cfg.cutoff, cfg.bands, cfg.tol)
        .context("band sweep")?;
    let gaps = detect_gaps(&bt);
    let m = meta(cfg);
    files.add("bands.csv", bands_csv(&samples, &bt, &m));
    files.add("gaps.csv", gaps_csv(&gaps, &m));
    files.add("bands.gp", plot_script(&samples, bt.bands(), &gaps));
    Ok(0)
}

/// gnuplot script for `bands.csv`, with vertex labels as x tics and gaps shaded.
fn plot_script(samples: &[KSample], nbands: usize, gaps: &[(f64, f64)]) -> String {
    let mut s = String::from("# pcf bands plot script; run from the output directory\n");
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\n");
    s.push_str("set xlabel 'k-path arclength [1/a]'\nset ylabel 'kappa^2 [1/a^2]'\n");
    let tics: Vec<String> = samples
        .iter()
        .filter_map(|k| k.label.as_ref().map(|l| format!("'{l}' {}", real(k.arclength))))
        .collect();
    if !tics.is_empty() {
        let _ = writeln!(s, "set xtics ({})", tics.join(", "));
        s.push_str("set grid xtics\n");
    }
    for (i, (lo, hi)) in gaps.iter().enumerate() {
        let _ = writeln!(
            s,
            "set object {} rect from graph 0, first {} to graph 1, first {} fc rgb '#dddddd' fs solid noborder behind",
            i + 1,
            real(*lo),
            real(*hi)
        );
    }
    let _ = writeln!(
        s,
        "plot for [b=0:{}] 'bands.csv' every ::1 using 2:($5 == b ? $6 : NaN) with linespoints pt 7 ps 0.4 title sprintf('band %d', b)",
        nbands.saturating_sub(1)
    );
    s.push_str("pause mouse close\n");
    s
}

fn exponents(cfg: &Config, files: &mut Outputs) -> usize {
    let exps = corner_exponents(&cfg.corners);
    let sigma = sigma_epsilon(&cfg.corners);
    let m = vec![("seed", cfg.seed.to_string()), ("corners", cfg.corners.len().to_string())];
    files.add("exponents.csv", exponents_csv(&cfg.corners, &exps, sigma, &m));
    0
}

fn bloch(cfg: &Config, xi: [f64; 2]) -> Result<BlochParams, RunError> {
    BlochParams::new(&cfg.lattice.reciprocal(), xi, cfg.beta).context("Bloch parameters")
}

fn converge(cfg: &Config, files: &mut Outputs) -> Result<usize, RunError> {
    let ladder = cfg.ladder.clone().ok_or_else(|| ConfigError::Invariant {
        path: "ladder".into(),
        message: "the converge command needs a ladder of cutoffs".into(),
    })?;
    let nmax = *ladder.last().expect("validated ladder is non-empty");
    let points = cfg
        .converge_points
        .iter()
        .map(|&xi| bloch(cfg, xi))
        .collect::<Result<Vec<_>, _>>()?;
    let plan = SweepPlan {
        lattice: cfg.lattice,
        table: eta_fourier_polygon(&cfg.medium, nmax),
        points,
        ladder: ladder.clone(),
        bands: cfg.bands,
        tol: cfg.tol,
    };
    let rec = resolution_sweep(&plan).context("resolution sweep")?;
    let mut m = meta(cfg);
    m[2] = (
        "ladder",
        ladder.iter().map(usize::to_string).collect::<Vec<_>>().join("/"),
    );
    files.add("converge.csv", converge_csv(&rec, &m));
    files.add("orders.csv", orders_csv(&rec, &m));
    Ok(0)
}

fn field(cfg: &Config, files: &mut Outputs) -> Result<usize, RunError> {
    let req = &cfg.field;
    let p = bloch(cfg, req.xi)?;
    let table = eta_fourier_polygon(&cfg.medium, cfg.cutoff);
    let sol = solve_bands(&cfg.lattice, &table, p, cfg.cutoff, req.band + 1, cfg.tol).context("eigensolve")?;
    let b = sol.band_index(req.band);
    let h = reconstruct_h(&sol, b, req.grid).context("h reconstruction")?;
    let e = recover_e(&sol, b, &table, req.grid).context("E recovery")?;
    let mut m = meta(cfg);
    m.extend([
        ("xi_x", real(p.xi()[0])),
        ("xi_y", real(p.xi()[1])),
        ("band", req.band.to_string()),
        ("kappa2", real(sol.values[b])),
    ]);
    files.add("field.csv", field_csv(&cfg.lattice, &h, &e, &m));
    Ok(0)
}

struct Check {
    name: String,
    value: f64,
    threshold: f64,
    pass: bool,
}

impl Check {
    /// Passes when `value <= threshold`.
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    /// Passes when `value >= threshold`.
    fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value >= threshold,
        }
    }
}

/// Runs the invariant suite. Returns the number of failed checks.
fn validate(cfg: &Config, files: &mut Outputs) -> Result<usize, RunError> {
    let table = eta_fourier_polygon(&cfg.medium, cfg.cutoff);
    let mut checks = vec![Check::below("eta_real_symmetry", table.symmetry_defect(), 1e-12)];
    checks.extend(operator_checks(cfg, &table)?);
    checks.extend(random_field_checks(cfg, &table)?);
    checks.extend(corner_checks(cfg)?);

    let mut s = String::new();
    let _ = write!(s, "# pcf validate");
    for (k, v) in meta(cfg) {
        let _ = write!(s, " {k}={v}");
    }
    let _ = writeln!(s, "\n{VALIDATE_HEADER}");
    for c in &checks {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            c.name,
            real(c.value),
            real(c.threshold),
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    files.add("validate.csv", s);
    Ok(checks.iter().filter(|c| !c.pass).count())
}

/// Matrix structure, field gauge, Faraday closure and time reversal at the
/// k-path vertices; exact spectra when the medium is homogeneous.
fn operator_checks(cfg: &Config, table: &FourierTable) -> Result<Vec<Check>, RunError> {
    let mut herm: f64 = 0.0;
    let mut lowest = f64::INFINITY;
    let mut div: f64 = 0.0;
    let mut faraday: f64 = 0.0;
    let mut reversal: f64 = 0.0;
    let mut analytic: f64 = 0.0;
    let homogeneous = cfg.medium.partition().is_homogeneous();
    let n2 = cfg.medium.partition().background_n2();
    for v in &cfg.kpath.vertices {
        let p = bloch(cfg, v.xi)?;
        let basis = Arc::new(build_basis(p, &cfg.lattice, cfg.cutoff));
        let a = assemble(&basis, table).context("assembly")?;
        herm = herm.max(a.hermiticity_defect());
        let nev = (cfg.bands + basis.zero_mode_count()).min(a.dim());
        let sol = eigensolve(&a, nev, cfg.tol).context("eigensolve")?;
        lowest = lowest.min(sol.values[0]);
        for b in 0..sol.nev() {
            div = div.max(divergence_residual(&sol, b).context("divergence")?);
            if sol.values[b] > 1e-8 {
                faraday = faraday.max(faraday_residual(&sol, b, table).context("Faraday residual")?);
            }
        }
        let mirror = bloch(cfg, [-v.xi[0], -v.xi[1]])?;
        let other = solve_bands(&cfg.lattice, table, mirror, cfg.cutoff, cfg.bands, cfg.tol).context("eigensolve")?;
        for (x, y) in sol.band_values().iter().zip(other.band_values()) {
            reversal = reversal.max((x - y).abs() / x.abs().max(1.0));
        }
        if homogeneous {
            let mut exact: Vec<f64> = basis
                .entries()
                .iter()
                .filter(|e| !e.zero_mode)
                .flat_map(|e| [(e.k[0] * e.k[0] + e.k[1] * e.k[1] + e.k[2] * e.k[2]) / n2; 2])
                .collect();
            exact.sort_by(f64::total_cmp);
            for (x, y) in sol.band_values().iter().zip(&exact) {
                analytic = analytic.max((x - y).abs() / y.abs().max(1e-300));
            }
        }
    }
    let mut out = vec![
        Check::below("hermiticity_defect", herm, 1e-12),
        Check::above("lowest_eigenvalue", lowest, -1e-10),
        Check::below("divergence_residual", div, 1e-12),
        Check::below("faraday_residual", faraday, 1e-8),
        Check::below("time_reversal", reversal, 1e-9),
    ];
    if homogeneous {
        out.push(Check::below("homogeneous_exact", analytic, 1e-8));
    }
    Ok(out)
}

/// Curl-div identity and Garding inequality on seeded random fields.
fn random_field_checks(cfg: &Config, table: &FourierTable) -> Result<Vec<Check>, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let recip = cfg.lattice.reciprocal();
    let b1 = recip.vector([1, 0]);
    let b2 = recip.vector([0, 1]);
    let n_inf = cfg.medium.n2_max().sqrt();
    let mut identity: f64 = 0.0;
    let (mut slack, mut slack2) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..VALIDATE_SAMPLES {
        let (s, t): (f64, f64) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let xi = [s * b1[0] + t * b2[0], s * b1[1] + t * b2[1]];
        let p = BlochParams::new(&recip, xi, rng.random_range(-2.0..2.0)).context("Bloch parameters")?;
        let v = TrigField::random(cfg.lattice, p, cfg.cutoff, rng.random());
        let id = check_identity(&v);
        identity = identity.max(id.gap / id.rhs.max(f64::MIN_POSITIVE));
        let g = check_garding(&v, table, n_inf).context("Garding check")?;
        slack = slack.min(g.slack / (1.0 + g.lhs.abs()));
        slack2 = slack2.min(g.slack2 / (1.0 + g.lhs2.abs()));
    }
    Ok(vec![
        Check::below("curl_div_identity", identity, 1e-12),
        Check::above("garding_slack", slack, -1e-10),
        Check::above("garding_slack_beta", slack2, -1e-10),
    ])
}

/// Two-material corners: closed-form and transfer-matrix exponents agree and
/// exceed one half.
fn corner_checks(cfg: &Config) -> Result<Vec<Check>, RunError> {
    let mut diff: f64 = 0.0;
    let mut lowest = f64::INFINITY;
    let mut any = false;
    for c in cfg.corners.iter().filter(|c| c.is_two_material()) {
        let s = &c.sectors;
        let lamc = solve_lamc(s[0].opening, s[0].n2, s[1].n2).context("corner exponent")?;
        let det = find_exponents(c);
        if let (Some(a), Some(b)) = (lamc.first(), det.first()) {
            diff = diff.max((a.lambda - b.lambda).abs());
            lowest = lowest.min(a.lambda.min(b.lambda));
            any = true;
        } else if lamc.len() != det.len() {
            diff = f64::INFINITY;
            any = true;
        }
    }
    if !any {
        return Ok(Vec::new());
    }
    Ok(vec![
        Check::below("exponent_agreement", diff, 1e-10),
        Check::above("two_material_exponent", lowest, 0.5),
    ])
}
