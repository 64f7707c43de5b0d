//! Command implementations behind the `grating` binary.
//!
//! Each command reads a [`RunConfig`], runs one pipeline of `grating-core`
//! and writes plain-text artifacts into the output directory. Every file
//! starts with a `#` header carrying the config hash, the crate versions and
//! the statistics of the mesh the numbers came from.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use grating_core::error::Error as CoreError;
use grating_core::field::ComplexField;
use grating_core::green::{fit_power, lateral_samples, symmetry_defect, PointSourceGreen};
use grating_core::inverse::{
    default_record_height, eig_count_below, eig_threshold, uniqueness_experiment,
    verify_counterexample, CounterexampleOptions, ExperimentOptions,
};
use grating_core::lap::{default_schedule, lap_limit};
use grating_core::mesh::{
    build_cell_mesh, build_supercell_mesh, CellMesh, MeshStats, SupercellMesh,
};
use grating_core::modes::scan_propagative;
use grating_core::perturbed::{near_field_record, solve_perturbed, Incident};
use grating_core::profile::{LocalPerturbation, PeriodicProfile};
use grating_core::qpsolver::{
    default_order, efficiencies, energy_balance, solve_plane_wave, CellOperators,
};
use grating_core::verify::{run_all, VerifyOptions};
use grating_core::wave::WaveParams;

pub use config::{ConfigError, RunConfig};

pub const CLI_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Scan,
    Green,
    Perturbed,
    Inverse,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Scan => "scan",
            Command::Green => "green",
            Command::Perturbed => "perturbed",
            Command::Inverse => "inverse",
            Command::Verify => "verify",
        }
    }
}

/// Command-line flags that override the config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub refine: usize,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(CoreError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(e) if e.is_config_error() => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            _ => match self {
                CliError::Io(_) => "io",
                _ => "numerical",
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(s) | CliError::Io(s) => f.write_str(s),
            CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Numerical(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Lines echoed to stdout.
    pub summary: Vec<String>,
    /// False when a check inside the command failed (exit status 1).
    pub pass: bool,
}

/// Output directory: the flag, else the config entry.
pub fn output_dir(config: Option<&RunConfig>, ov: &Overrides) -> PathBuf {
    ov.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(config.map_or("out", |c| c.output.dir.as_str())))
}

/// Writes `error.toml` with the status, kind and message of a failure.
pub fn write_error_record(dir: &Path, command: &str, err: &CliError) -> std::io::Result<PathBuf> {
    #[derive(serde::Serialize)]
    struct Record<'a> {
        command: &'a str,
        status: i32,
        kind: &'a str,
        message: String,
    }
    let rec = Record {
        command,
        status: err.exit_code(),
        kind: err.kind(),
        message: err.to_string(),
    };
    std::fs::create_dir_all(dir)?;
    let path = dir.join("error.toml");
    std::fs::write(&path, toml::to_string(&rec).expect("record serializes"))?;
    Ok(path)
}

struct Writer {
    dir: PathBuf,
    command: &'static str,
    hash: String,
    overrides: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(command: Command, config: &RunConfig, ov: &Overrides) -> Result<Self> {
        let dir = output_dir(Some(config), ov);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let seed = ov.seed.map_or("config".to_string(), |s| s.to_string());
        Ok(Self {
            dir,
            command: command.name(),
            hash: config.hash(),
            overrides: format!("refine={} seed={seed}", ov.refine),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, mesh: &str, body: &str) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "# grating {} / {name}", self.command);
        let _ = writeln!(s, "# config_hash = {}", self.hash);
        let _ = writeln!(
            s,
            "# versions = grating-core {} grating-cli {}",
            grating_core::VERSION,
            CLI_VERSION
        );
        let _ = writeln!(s, "# overrides = {}", self.overrides);
        let _ = writeln!(s, "# mesh = {mesh}");
        s.push_str(body);
        let path = self.dir.join(name);
        std::fs::write(&path, s)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, summary: Vec<String>, pass: bool) -> Outcome {
        Outcome {
            files: self.files,
            summary,
            pass,
        }
    }
}

fn stats_line(s: &MeshStats) -> String {
    format!(
        "nodes={} triangles={} max_edge={:.6} min_area={:.6e} area={:.6}",
        s.nodes, s.triangles, s.max_edge, s.min_area, s.area
    )
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn field_table(f: &ComplexField) -> String {
    let u = f.u_values();
    let mut s = String::from("x1,x2,re,im\n");
    for (p, v) in f.mesh.nodes.iter().zip(&u) {
        let _ = writeln!(s, "{},{},{},{}", num(p[0]), num(p[1]), num(v.re), num(v.im));
    }
    s
}

fn cell_mesh(config: &RunConfig, ov: &Overrides, profile: &PeriodicProfile) -> Result<CellMesh> {
    config.validate_mesh()?;
    let m = build_cell_mesh(profile, config.height(profile), config.mesh.target_size)?;
    Ok(m.refine_times(ov.refine)?)
}

fn supercell_mesh(
    config: &RunConfig,
    ov: &Overrides,
    profile: &PeriodicProfile,
    pert: Option<&LocalPerturbation>,
    h: f64,
) -> Result<Arc<SupercellMesh>> {
    config.validate_mesh()?;
    let m = &config.mesh;
    let mut sc = build_supercell_mesh(profile, pert, h, m.n_periods, m.pml_width, m.target_size)?;
    for _ in 0..ov.refine {
        sc = sc.refine()?;
    }
    Ok(Arc::new(sc))
}

/// Target size used where a pipeline builds its own meshes.
fn scaled_target(config: &RunConfig, ov: &Overrides) -> f64 {
    config.mesh.target_size / 2f64.powi(ov.refine as i32)
}

pub fn run(command: Command, config: &RunConfig, ov: &Overrides) -> Result<Outcome> {
    match command {
        Command::Solve => cmd_solve(config, ov),
        Command::Scan => cmd_scan(config, ov),
        Command::Green => cmd_green(config, ov),
        Command::Perturbed => cmd_perturbed(config, ov),
        Command::Inverse => cmd_inverse(config, ov),
        Command::Verify => cmd_verify(config, ov),
    }
}

/// Plane-wave solve on the cell; falls back to the limiting-absorption limit
/// when the direct system is singular.
pub fn cmd_solve(config: &RunConfig, ov: &Overrides) -> Result<Outcome> {
    let profile = config.profile()?;
    if config.perturbation(&profile)?.is_some() {
        return Err(CliError::Config(
            "solve handles the periodic cell; use `perturbed` for a local perturbation".into(),
        ));
    }
    let (k, theta) = match config.incident()? {
        Incident::PlaneWave { k, theta } => (k, theta),
        Incident::PointSource { .. } => {
            return Err(CliError::Config(
                "solve needs a plane wave; use `green` for a point source".into(),
            ))
        }
    };
    let wave = WaveParams::new(k, theta)?;
    let mesh = cell_mesh(config, ov, &profile)?;
    let stats = stats_line(&mesh.mesh.stats());
    let ops = CellOperators::new(&mesh);
    let order = config
        .solver
        .dtn_order
        .unwrap_or_else(|| default_order(k, wave.alpha()));
    let (field, method) = match solve_plane_wave(&ops, &wave, Some(order)) {
        Ok(f) => (f, "direct".to_string()),
        Err(CoreError::SingularSystem { sigma_rel, .. }) => {
            let r = lap_limit(&ops, k, theta, &default_schedule(), order)?;
            (
                r.field,
                format!(
                    "limiting absorption (direct system singular, sigma_rel = {sigma_rel:.3e})"
                ),
            )
        }
        Err(e) => return Err(e.into()),
    };
    let e = field
        .above
        .clone()
        .expect("cell solve carries its expansion");
    let balance = energy_balance(&e, theta, k);
    let eff = efficiencies(&e, wave.beta0());

    let mut w = Writer::new(Command::Solve, config, ov)?;
    w.write("field.csv", &stats, &field_table(&field))?;
    let mut t = String::from("n,xi,beta_re,beta_im,re,im,abs,efficiency\n");
    for n in e.orders() {
        let c = e.coefficient_at(n, 0.0);
        let b = e.beta(n);
        let eff_n = eff
            .iter()
            .find(|x| x.0 == n)
            .map_or(String::new(), |x| num(x.1));
        let _ = writeln!(
            t,
            "{n},{},{},{},{},{},{},{eff_n}",
            num(e.xi(n).re),
            num(b.re),
            num(b.im),
            num(c.re),
            num(c.im),
            num(c.norm())
        );
    }
    w.write("rayleigh.csv", &stats, &t)?;
    let mut summary = String::new();
    let _ = writeln!(summary, "profile = {}", profile.spec());
    let _ = writeln!(
        summary,
        "k = {k}\ntheta = {theta}\nalpha = {}\ndtn_order = {order}",
        wave.alpha()
    );
    let _ = writeln!(summary, "method = {method}");
    let _ = writeln!(summary, "energy_balance = {}", num(balance));
    w.write("energy.txt", &stats, &summary)?;
    let u0 = e.coefficient_at(0, 0.0);
    let lines = vec![
        format!("u0 = {:.6} {:+.6}i", u0.re, u0.im),
        format!("energy_balance = {balance:.3e}"),
        method,
    ];
    Ok(w.finish(lines, true))
}

pub fn cmd_scan(config: &RunConfig, ov: &Overrides) -> Result<Outcome> {
    let profile = config.profile()?;
    let k = config.wave()?.k;
    let mesh = cell_mesh(config, ov, &profile)?;
    let stats = stats_line(&mesh.mesh.stats());
    let ops = CellOperators::new(&mesh);
    let order = config
        .solver
        .dtn_order
        .unwrap_or_else(|| default_order(k, 0.5));
    let s = &config.scan;
    if s.grid_size < 64 || !(s.dip_factor > 1.0) {
        return Err(CliError::Config(
            "[scan] needs grid_size >= 64 and dip_factor > 1".into(),
        ));
    }
    let scan = scan_propagative(k, &ops, s.grid_size, s.dip_factor, order)?;

    let mut w = Writer::new(Command::Scan, config, ov)?;
    let mut t = String::from("alpha,sigma_min_rel\n");
    for (a, v) in &scan.table {
        let _ = writeln!(t, "{},{}", num(*a), num(*v));
    }
    w.write("sigma.csv", &stats, &t)?;
    let mut m = String::from(
        "alpha_hat,multiplicity,index,lambda,residual,decay_rate,propagating_content\n",
    );
    for e in &scan.set.entries {
        for i in 0..e.modes.len() {
            let get = |v: &[f64]| v.get(i).map_or(String::new(), |x| num(*x));
            let _ = writeln!(
                m,
                "{},{},{i},{},{},{},{}",
                num(e.alpha_hat),
                e.multiplicity,
                get(&e.lambdas),
                get(&e.residuals),
                get(&e.decay_rates),
                get(&e.propagating_content)
            );
        }
    }
    for c in &scan.rejected {
        let _ = writeln!(
            m,
            "# rejected alpha = {} sigma_rel = {}: {}",
            num(c.alpha),
            num(c.sigma_rel),
            c.reason
        );
    }
    w.write("modes.csv", &stats, &m)?;
    for (j, e) in scan.set.entries.iter().enumerate() {
        for (i, f) in e.modes.iter().enumerate() {
            w.write(&format!("mode_{j}_{i}.csv"), &stats, &field_table(f))?;
        }
    }
    let n: usize = scan.set.entries.iter().map(|e| e.modes.len()).sum();
    let lines = vec![
        format!("propagative wave numbers: {}", scan.set.entries.len()),
        format!("modes: {n}"),
        format!("rejected candidates: {}", scan.rejected.len()),
    ];
    Ok(w.finish(lines, true))
}

/// Symmetry check of the Green's function over seeded point pairs and its
/// lateral profile at the source height (m ≠ 0).
pub fn cmd_green(config: &RunConfig, ov: &Overrides) -> Result<Outcome> {
    let profile = config.profile()?;
    let wave = config.wave()?;
    let k = wave.k;
    let mesh = cell_mesh(config, ov, &profile)?;
    let stats = stats_line(&mesh.mesh.stats());
    let ops = CellOperators::new(&mesh);
    let h = mesh.h;
    let top = profile
        .vertices()
        .iter()
        .map(|v| v[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = top + 0.3 * (h - top);
    if !(lo < h - 0.05) {
        return Err(CliError::Config(format!(
            "[mesh] h = {h} leaves no room above the profile (max height {top})"
        )));
    }
    let source = wave.source.unwrap_or([PI, 0.5 * (lo + h)]);
    let rule = config.rule(k)?;
    let seed = ov.seed.unwrap_or_else(|| config.hash_seed());
    let xr = config.green.x_range;
    if !(xr[0] < xr[1]) {
        return Err(CliError::Config(
            "[green] x_range must be increasing".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<([f64; 2], [f64; 2])> = (0..config.green.pairs)
        .map(|_| {
            let mut pt = || {
                [
                    rng.random_range(xr[0]..xr[1]),
                    rng.random_range(lo..h - 0.05),
                ]
            };
            (pt(), pt())
        })
        .collect();
    let defect = if pairs.is_empty() {
        0.0
    } else {
        symmetry_defect(&ops, k, &rule, &pairs, config.solver.dtn_order)?
    };

    let g = PointSourceGreen::new(&ops, source, k, &rule, config.solver.dtn_order)?;
    let l = config.green.lateral_periods.max(0);
    let ms: Vec<i64> = (-l..=l).filter(|&m| m != 0).collect();
    let lateral = lateral_samples(&g, source[0], source[1], &ms)?;
    let far: Vec<(f64, f64)> = lateral
        .iter()
        .copied()
        .filter(|s| s.0.abs() >= 4.0 * PI)
        .collect();
    let rate = if far.len() >= 2 {
        fit_power(&far)
    } else {
        f64::NAN
    };
    let residual = g.gamma_residual()?;

    let mut w = Writer::new(Command::Green, config, ov)?;
    let mut r = String::new();
    let _ = writeln!(r, "profile = {}\nk = {k}\nseed = {seed}", profile.spec());
    let _ = writeln!(
        r,
        "quadrature = {} panels={} points={}",
        config.quadrature.kind, config.quadrature.panels, config.quadrature.points
    );
    let _ = writeln!(r, "pairs = {}", pairs.len());
    let _ = writeln!(r, "max_asymmetry = {}", num(defect));
    let _ = writeln!(r, "source = {},{}", num(source[0]), num(source[1]));
    let _ = writeln!(r, "gamma_residual = {}", num(residual));
    let _ = writeln!(r, "lateral_rate = {}", num(rate));
    r.push_str("x1,x2,y1,y2\n");
    for (x, y) in &pairs {
        let _ = writeln!(r, "{},{},{},{}", num(x[0]), num(x[1]), num(y[0]), num(y[1]));
    }
    w.write("symmetry.txt", &stats, &r)?;
    let mut t = String::from("m,offset,abs_g\n");
    for (m, (d, v)) in ms.iter().zip(&lateral) {
        let _ = writeln!(t, "{m},{},{}", num(*d), num(*v));
    }
    w.write("lateral.csv", &stats, &t)?;
    let lines = vec![
        format!("max asymmetry = {defect:.3e}"),
        format!("lateral decay exponent = {rate:.3}"),
        format!("residual on the curve = {residual:.3e}"),
    ];
    Ok(w.finish(lines, true))
}

fn incidents(config: &RunConfig) -> Result<Vec<Incident>> {
    let mut v = vec![config.incident()?];
    let k = config.wave()?.k;
    v.extend(
        config
            .perturbed
            .angles
            .iter()
            .map(|&theta| Incident::PlaneWave { k, theta }),
    );
    Ok(v)
}

fn parse_geometry(spec: &str, profile: &PeriodicProfile) -> Result<Option<LocalPerturbation>> {
    LocalPerturbation::parse(spec, profile)
        .map_err(|e| CliError::Config(format!("geometry {spec:?}: {e}")))
}

fn run_uniqueness(
    config: &RunConfig,
    ov: &Overrides,
    command: Command,
    profile: &PeriodicProfile,
    a: Option<LocalPerturbation>,
    b: Option<LocalPerturbation>,
) -> Result<Outcome> {
    let h = config
        .perturbed
        .record_height
        .unwrap_or_else(|| default_record_height(profile, a.as_ref(), b.as_ref()));
    config.validate_mesh()?;
    let opts = ExperimentOptions {
        target_size: scaled_target(config, ov),
        n_periods: config.mesh.n_periods,
        pml_width: config.mesh.pml_width,
        mesh_height: config.mesh.h,
        samples: config.perturbed.samples,
    };
    let incs = incidents(config)?;
    let report = uniqueness_experiment(
        profile,
        a.as_ref(),
        b.as_ref(),
        &incs,
        h,
        (0.0, 2.0 * PI),
        &opts,
    )?;
    let mut w = Writer::new(command, config, ov)?;
    let mesh = format!(
        "supercell n_periods={} pml_width={:.6} target_size={:.6} height={:.6}",
        opts.n_periods,
        opts.pml_width,
        opts.target_size,
        opts.mesh_height.unwrap_or(h + 0.4)
    );
    w.write("uniqueness.txt", &mesh, &report.to_text())?;
    let mut lines: Vec<String> = report
        .discrepancies
        .iter()
        .map(|d| format!("sup discrepancy {:.3e}, floor {:.3e}", d.sup, d.floor))
        .collect();
    lines.push(format!("verdict: {}", report.verdict));
    Ok(w.finish(lines, true))
}

/// Solves one perturbed geometry, or compares two when `[perturbed] compare`
/// is set.
pub fn cmd_perturbed(config: &RunConfig, ov: &Overrides) -> Result<Outcome> {
    let profile = config.profile()?;
    let a = config.perturbation(&profile)?;
    if let Some(spec) = &config.perturbed.compare {
        let b = parse_geometry(spec, &profile)?;
        return run_uniqueness(config, ov, Command::Perturbed, &profile, a, b);
    }
    let inc = config.incident()?;
    let record = config
        .perturbed
        .record_height
        .unwrap_or_else(|| default_record_height(&profile, a.as_ref(), None));
    let h = config.mesh.h.unwrap_or(record + 0.4);
    let sc = supercell_mesh(config, ov, &profile, a.as_ref(), h)?;
    let stats = stats_line(&sc.mesh.stats());
    let sol = solve_perturbed(&sc, inc, config.solver.dtn_order)?;
    let rec = near_field_record(&sol, record, 0.0, 2.0 * PI, config.perturbed.samples)?;

    let mut w = Writer::new(Command::Perturbed, config, ov)?;
    w.write("field.csv", &stats, &field_table(&sol.total))?;
    let mut t = format!("record_height = {}\nx1,re,im\n", num(record));
    for (x, v) in rec.x1.iter().zip(&rec.values) {
        let _ = writeln!(t, "{},{},{}", num(*x), num(v.re), num(v.im));
    }
    w.write("near_field.csv", &stats, &t)?;
    let mut r = String::new();
    let _ = writeln!(r, "profile = {}", profile.spec());
    let _ = writeln!(
        r,
        "perturbation = {}",
        a.as_ref().map_or("none".into(), |p| p.spec())
    );
    let _ = writeln!(r, "window = {},{}", num(sol.window.0), num(sol.window.1));
    let _ = writeln!(r, "sigma_min_rel = {}", num(sol.sigma_min_rel));
    let _ = writeln!(r, "leak_ratio = {}", num(sol.leak_ratio));
    let _ = writeln!(r, "pert_norm = {}", num(sol.pert_norm()));
    r.push_str("period,norm\n");
    for (m, n) in &sol.period_norms {
        let _ = writeln!(r, "{m},{}", num(*n));
    }
    w.write("report.txt", &stats, &r)?;
    let lines = vec![
        format!("perturbation norm = {:.3e}", sol.pert_norm()),
        format!("leak ratio = {:.3e}", sol.leak_ratio),
    ];
    Ok(w.finish(lines, true))
}

pub fn cmd_inverse(config: &RunConfig, ov: &Overrides) -> Result<Outcome> {
    let inv = &config.inverse;
    match inv.task.as_str() {
        "eig-count" => {
            let h = inv
                .h
                .ok_or_else(|| CliError::Config("[inverse] eig-count needs h".into()))?;
            let k = match inv.k {
                Some(k) => k,
                None => config.wave()?.k,
            };
            let n = eig_count_below(h, k)?;
            let mut w = Writer::new(Command::Inverse, config, ov)?;
            let body = format!(
                "h = {}\nk = {}\ncount = {n}\nthreshold_k = {}\n",
                num(h),
                num(k),
                num(eig_threshold(h))
            );
            w.write("eig_count.txt", "none", &body)?;
            Ok(w.finish(vec![format!("eigenvalues below k^2: {n}")], true))
        }
        "counterexample" => {
            let opts = CounterexampleOptions {
                cell_target: CounterexampleOptions::default().cell_target
                    / 2f64.powi(ov.refine as i32),
                supercell_target: CounterexampleOptions::default().supercell_target
                    / 2f64.powi(ov.refine as i32),
                ..Default::default()
            };
            let r = verify_counterexample(&opts)?;
            let mut w = Writer::new(Command::Inverse, config, ov)?;
            let mut b = String::new();
            let [e0, e2, em2] = r.rayleigh_errors;
            let _ = writeln!(
                b,
                "rayleigh_error_0 = {}\nrayleigh_error_2 = {}\nrayleigh_error_m2 = {}",
                num(e0),
                num(e2),
                num(em2)
            );
            let _ = writeln!(b, "cell_vs_closed_form = {}", num(r.cell_vs_analytic));
            let _ = writeln!(b, "floor = {}", num(r.floor));
            let _ = writeln!(
                b,
                "defect_vs_unperturbed = {}",
                num(r.perturbed_vs_unperturbed)
            );
            let _ = writeln!(
                b,
                "control_vs_unperturbed = {}",
                num(r.control_vs_unperturbed)
            );
            let _ = writeln!(
                b,
                "defect_ratio = {}\ncontrol_ratio = {}",
                num(r.defect_ratio()),
                num(r.control_ratio())
            );
            let mesh = format!(
                "cell target_size={:.6} h={:.6}; supercell target_size={:.6} n_periods={}",
                opts.cell_target, opts.h, opts.supercell_target, opts.n_periods
            );
            w.write("counterexample.txt", &mesh, &b)?;
            let lines = vec![
                format!("defect / floor = {:.2}", r.defect_ratio()),
                format!("control / floor = {:.1}", r.control_ratio()),
            ];
            Ok(w.finish(lines, true))
        }
        "uniqueness" => {
            let profile = config.profile()?;
            let a = config.perturbation(&profile)?;
            let b = match &config.perturbed.compare {
                Some(s) => parse_geometry(s, &profile)?,
                None => None,
            };
            run_uniqueness(config, ov, Command::Inverse, &profile, a, b)
        }
        other => Err(CliError::Config(format!(
            "[inverse] unknown task {other:?}"
        ))),
    }
}

/// Runs the acceptance criteria listed in `[verify] criteria`.
pub fn cmd_verify(config: &RunConfig, ov: &Overrides) -> Result<Outcome> {
    let ids = &config.verify.criteria;
    if let Some(bad) = ids.iter().find(|&&i| !(1..=14).contains(&i)) {
        return Err(CliError::Config(format!("[verify] no criterion {bad}")));
    }
    let seed = ov.seed.unwrap_or(VerifyOptions::default().seed);
    let reports = run_all(ids, &VerifyOptions { seed });
    let mut w = Writer::new(Command::Verify, config, ov)?;
    let body: String = reports.iter().map(|r| r.to_text()).collect();
    w.write("verify.txt", "per criterion", &body)?;
    let pass = reports.iter().all(|r| r.pass);
    Ok(w.finish(reports.iter().map(|r| r.summary()).collect(), pass))
}
