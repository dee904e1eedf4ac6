//! Configuration files, run artifacts, and the command implementations behind the binary.
//!
//! A run configuration is a flat `key = value` file with `#` comments:
//!
//! ```text
//! signature   = minkowski
//! omega       = interval 0 1
//! omega_tilde = interval -0.5 0.5
//! intervals   = 400
//! cadence     = 1
//! output      = out
//! ```
//!
//! Domains are written `interval a b`, `ball cx cy r` (any dimension) or
//! `ellipse cx cy q11 q12 q22` for `{(p-c)ᵀQ(p-c) < 1}`. Disk grids use `rings` and
//! `angles` instead of `intervals`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domains::ConvexDomain;
use crate::error::{Error, Result};
use crate::flow::{run_observed, FlowState, SolitonResult, StepRecord, Tolerances};
use crate::geometry::{graph_geometry_with, square_root_inverse_metric, PointJet, Signature, Transcription};
use crate::grid::{Grid, GridSpec};
use crate::monitors::{AuditSummary, Auditor, MonitorRecord};
use crate::operators::{g_kernel, legendre_transform};
use crate::oracles::{fd_check_derivatives, random_jet, translator_1d_closed_form, translator_radial_shooting};
use crate::SPACELIKE_MARGIN;

/// Shooting speed for `n = 2`, `R = 1`, `ρ = 0.5` in Minkowski space.
pub const FROZEN_DISK_SPEED: f64 = 1.0735826836105615;

pub const MONITOR_HEADER: [&str; 13] = [
    "t",
    "tau",
    "udot_min",
    "udot_max",
    "obliq_min",
    "hess_min",
    "hess_max",
    "grad_max",
    "TG_min",
    "TG_max",
    "convex_margin",
    "evo_residual",
    "newton_iters",
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub signature: Signature,
    pub omega: ConvexDomain,
    pub omega_tilde: ConvexDomain,
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub tau0: Option<f64>,
    pub cadence: usize,
    pub output: PathBuf,
    /// Node used for the additive normalization of `u∞` (defaults to the grid anchor).
    pub anchor: Option<usize>,
    pub evolution_monitor: bool,
}

pub fn parse_domain(spec: &str) -> Result<ConvexDomain> {
    let mut parts = spec.split_whitespace();
    let kind = parts.next().ok_or_else(|| Error::Config("empty domain".into()))?;
    let nums: Vec<f64> = parts
        .map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("bad number {t:?} in domain {spec:?}"))))
        .collect::<Result<_>>()?;
    match (kind, nums.len()) {
        ("interval", 2) => ConvexDomain::interval(nums[0], nums[1]),
        ("ball", k) if k >= 2 => ConvexDomain::ball(DVector::from_row_slice(&nums[..k - 1]), nums[k - 1]),
        ("ellipse", 5) => ConvexDomain::ellipse(
            DVector::from_row_slice(&nums[..2]),
            DMatrix::from_row_slice(2, 2, &[nums[2], nums[3], nums[3], nums[4]]),
        ),
        _ => Err(Error::Config(format!("unrecognized domain {spec:?}"))),
    }
}

fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl RunConfig {
    /// Parses a configuration; a relative `output` is resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut map = parse_key_values(text)?;
        let mut take = |k: &str| map.remove(k);
        let num = |k: &str, v: Option<String>| -> Result<Option<f64>> {
            v.map(|s| s.parse::<f64>().map_err(|_| Error::Config(format!("{k}: bad number {s:?}")))).transpose()
        };
        let int = |k: &str, v: Option<String>| -> Result<Option<usize>> {
            v.map(|s| s.parse::<usize>().map_err(|_| Error::Config(format!("{k}: bad integer {s:?}")))).transpose()
        };

        let signature = take("signature").unwrap_or_else(|| "minkowski".into());
        let signature =
            Signature::parse(&signature).ok_or_else(|| Error::Config(format!("unknown signature {signature:?}")))?;
        let omega = parse_domain(&take("omega").ok_or_else(|| Error::Config("missing omega".into()))?)?;
        let omega_tilde =
            parse_domain(&take("omega_tilde").ok_or_else(|| Error::Config("missing omega_tilde".into()))?)?;
        let dim = int("dimension", take("dimension"))?.unwrap_or(omega.dimension());
        if dim != omega.dimension() || dim != omega_tilde.dimension() {
            return Err(Error::Config("dimension does not match the domains".into()));
        }
        let grid = match dim {
            1 => GridSpec::Line { intervals: int("intervals", take("intervals"))?.unwrap_or(400) },
            2 => GridSpec::Disk {
                rings: int("rings", take("rings"))?.unwrap_or(32),
                angles: int("angles", take("angles"))?.unwrap_or(64),
            },
            _ => return Err(Error::Config(format!("dimension {dim} has no grid"))),
        };

        let mut tolerances = Tolerances::default();
        for (key, slot) in [
            ("tol_c", &mut tolerances.tol_c),
            ("tol_b", &mut tolerances.tol_b),
            ("tol_newton", &mut tolerances.tol_newton),
            ("tol_r", &mut tolerances.tol_r),
            ("tau_min", &mut tolerances.tau_min),
            ("tau_max", &mut tolerances.tau_max),
        ] {
            if let Some(v) = num(key, take(key))? {
                if !(v > 0.0) {
                    return Err(Error::Config(format!("{key} must be positive")));
                }
                *slot = v;
            }
        }
        if let Some(v) = int("max_steps", take("max_steps"))? {
            tolerances.max_steps = v;
        }
        if let Some(v) = int("max_newton", take("max_newton"))? {
            tolerances.max_newton = v;
        }
        let tau0 = num("tau0", take("tau0"))?;
        if tau0.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::Config("tau0 must be positive".into()));
        }
        let cadence = int("cadence", take("cadence"))?.unwrap_or(1).max(1);
        let output = base.join(take("output").unwrap_or_else(|| "out".into()));
        let anchor = int("anchor", take("anchor"))?;
        let evolution_monitor = match take("evolution_monitor").as_deref() {
            None | Some("true") => true,
            Some("false") => false,
            Some(v) => return Err(Error::Config(format!("evolution_monitor: expected true or false, got {v:?}"))),
        };
        if let Some(k) = map.keys().next() {
            return Err(Error::Config(format!("unknown key {k:?}")));
        }
        if signature == Signature::Minkowski {
            let outer = omega_tilde.norm_range().1;
            if outer > 1.0 - SPACELIKE_MARGIN {
                return Err(Error::Config(format!(
                    "omega_tilde reaches |p| = {outer}, violating the spacelike constraint |Du| < 1"
                )));
            }
        }
        Ok(Self { signature, omega, omega_tilde, grid, tolerances, tau0, cadence, output, anchor, evolution_monitor })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// Everything a run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub result: Result<SolitonResult>,
    pub audit: AuditSummary,
    pub records: Vec<MonitorRecord>,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.result.is_ok() {
            0
        } else {
            2
        }
    }
}

/// Initializes, runs and audits the flow, then writes the artifacts. Errors only on
/// configuration or I/O problems; solver failures land in [`RunOutcome::result`].
pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    let mut state = FlowState::on_grid(
        std::sync::Arc::new(Grid::new(&config.omega, config.grid).map_err(|e| Error::Config(e.to_string()))?),
        config.omega.clone(),
        config.omega_tilde.clone(),
        config.signature,
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    if let Some(tau) = config.tau0 {
        state.set_tau(tau)?;
    }
    if config.anchor.is_some_and(|a| a >= state.grid().len()) {
        return Err(Error::Config("anchor node is outside the grid".into()));
    }
    let mut auditor = Auditor::new(&state, config.cadence, config.tolerances.tau_max);
    if !config.evolution_monitor {
        auditor = auditor.without_evolution();
    }
    let mut audit_error = None;
    let mut result = run_observed(&mut state, &config.tolerances, |s, r| {
        if audit_error.is_none() {
            audit_error = auditor.observe(s, r).err();
        }
    });
    if let Some(e) = audit_error {
        result = Err(e);
    }
    if let (Ok(res), Some(a)) = (result.as_mut(), config.anchor) {
        let base = res.u_inf[a];
        res.u_inf.iter_mut().for_each(|x| *x -= base);
    }

    fs::create_dir_all(&config.output)?;
    let monitors = config.output.join("monitors.csv");
    write_monitors(&monitors, auditor.records())?;
    let fields_path = config.output.join("fields.csv");
    let u = match &result {
        Ok(r) => r.u_inf.clone(),
        Err(_) => state.u().to_vec(),
    };
    fs::write(&fields_path, fields_table(state.grid(), &u))?;
    let snapshot = config.output.join("snapshot.txt");
    let c_est = match &result {
        Ok(r) => r.c_inf,
        Err(_) => {
            let (a, b) = state.udot_range();
            0.5 * (a + b)
        }
    };
    write_snapshot(&snapshot, config, state.t(), c_est, &u, state.grid())?;
    let report = config.output.join("report.txt");
    fs::write(&report, run_report(config, &state, &result, auditor.summary()))?;
    Ok(RunOutcome {
        result,
        audit: auditor.summary().clone(),
        records: auditor.records().to_vec(),
        artifacts: vec![monitors, snapshot, fields_path, report],
    })
}

fn run_report(config: &RunConfig, state: &FlowState, result: &Result<SolitonResult>, audit: &AuditSummary) -> String {
    let mut s = String::new();
    s += &format!("signature: {}\n", config.signature.name());
    s += &format!("omega: {}\nomega_tilde: {}\n", config.omega.describe(), config.omega_tilde.describe());
    s += &format!("grid: {}\n", grid_label(config.grid));
    match result {
        Ok(r) => {
            s += "status: converged\n";
            s += &format!(
                "C_inf={:.12}\nresidual={:e}\nsteps={}\nt={}\nnewton_total={}\nwall_clock_s={:.3}\n",
                r.c_inf,
                r.residual,
                r.steps,
                r.t,
                r.newton_total,
                r.wall_clock.as_secs_f64()
            );
        }
        Err(e) => {
            s += &format!("status: not converged ({e})\nsteps={}\nt={}\n", state.step(), state.t());
        }
    }
    s += &format!("tol_mon={:e}\n", audit.tol_mon);
    s += &format!("udot bounds: {} (worst margin {:e})\n", pass(audit.udot_ok()), audit.udot_margin);
    s += &format!("obliqueness: {} (min {:.6})\n", pass(audit.obliqueness_ok()), audit.obliq_min);
    s += &format!("hessian range: {} ([{:.6}, {:.6}])\n", pass(audit.hessian_ok()), audit.hess_min, audit.hess_max);
    s += &format!(
        "convexity margin: {} (min {:e}, eps0 {:.6})\n",
        pass(audit.convexity_ok()),
        audit.convex_min,
        audit.eps0
    );
    s += &format!("curvature sandwich: {} (worst margin {:e})\n", pass(audit.sandwich_ok()), audit.sandwich_margin);
    if let Some(e) = audit.evo_max {
        s += &format!("evolution residual max: {e:e}\n");
    }
    for f in &audit.failures {
        s += &format!("failure: {f}\n");
    }
    s
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn grid_label(spec: GridSpec) -> String {
    match spec {
        GridSpec::Line { intervals } => format!("line {intervals}"),
        GridSpec::Disk { rings, angles } => format!("disk {rings} {angles}"),
    }
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_monitors(path: &Path, records: &[MonitorRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(MONITOR_HEADER).map_err(csv_err)?;
    for r in records {
        let evo = r.evo_residual.map(float).unwrap_or_else(|| "nan".into());
        w.write_record([
            float(r.t),
            float(r.tau),
            float(r.udot_min),
            float(r.udot_max),
            float(r.obliq_min),
            float(r.hess_min),
            float(r.hess_max),
            float(r.grad_max),
            float(r.tg_min),
            float(r.tg_max),
            float(r.convex_margin),
            evo,
            r.newton_iters.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Columns of a numeric CSV, keyed by header.
pub fn read_columns(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        for (k, cell) in row.iter().enumerate() {
            let v = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad value {cell:?} in {}", path.display())))?;
            cols[k].push(v);
        }
    }
    Ok((header, cols))
}

/// One row per node: structured index, coordinates, `u`, `Du`, smallest Hessian eigenvalue.
pub fn fields_table(grid: &Grid, u: &[f64]) -> String {
    let n = grid.dim();
    let mut head = vec!["i".to_string(), "j".to_string()];
    head.extend((0..n).map(|a| format!("x{a}")));
    head.push("u".into());
    head.extend((0..n).map(|a| format!("du{a}")));
    head.push("hess_min".into());
    let mut out = head.join(",") + "\n";
    for i in 0..grid.len() {
        let (a, b) = grid.label(i);
        let mut row = vec![a.to_string(), b.to_string()];
        row.extend(grid.coord(i).iter().map(|&x| float(x)));
        row.push(float(u[i]));
        row.extend(grid.gradient(u, i).iter().map(|&x| float(x)));
        row.push(float(SymmetricEigen::new(grid.hessian(u, i)).eigenvalues.min()));
        out += &(row.join(",") + "\n");
    }
    out
}

pub fn write_snapshot(path: &Path, config: &RunConfig, t: f64, c_inf: f64, u: &[f64], grid: &Grid) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "signature = {}", config.signature.name())?;
    writeln!(f, "dimension = {}", grid.dim())?;
    writeln!(f, "omega = {}", config.omega.describe())?;
    writeln!(f, "omega_tilde = {}", config.omega_tilde.describe())?;
    writeln!(f, "grid = {}", grid_label(config.grid))?;
    writeln!(f, "t = {}", float(t))?;
    writeln!(f, "c_inf = {}", float(c_inf))?;
    writeln!(f, "---")?;
    f.write_all(fields_table(grid, u).as_bytes())?;
    Ok(())
}

/// Parsed snapshot: header entries and the fields table.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path)?;
    let (head, table) = text.split_once("---\n").ok_or_else(|| Error::Config("snapshot has no table".into()))?;
    let header = parse_key_values(head)?;
    let mut lines = table.lines();
    let columns: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().map_err(|_| Error::Config(format!("bad snapshot value {c:?}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Snapshot { header, columns, rows })
}

/// `run --config <path>`.
pub fn run_command(config: &Path) -> i32 {
    let cfg = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match execute(&cfg) {
        Ok(out) => {
            match &out.result {
                Ok(r) => println!("converged: C_inf={:.12} residual={:e} steps={}", r.c_inf, r.residual, r.steps),
                Err(e) => eprintln!("not converged: {e}"),
            }
            for a in &out.artifacts {
                println!("wrote {}", a.display());
            }
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// `oracle closed1d a b c d <sig>` or `oracle radial R rho n <sig>`.
pub fn oracle_command(kind: &str, params: &[String], out: Option<&Path>) -> i32 {
    match oracle_inner(kind, params, out) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn oracle_inner(kind: &str, params: &[String], out: Option<&Path>) -> Result<Vec<String>> {
    let nums = |k: usize| -> Result<Vec<f64>> {
        if params.len() != k + 1 {
            return Err(Error::Argument(format!("{kind} expects {} parameters", k + 1)));
        }
        params[..k].iter().map(|p| p.parse().map_err(|_| Error::Argument(format!("bad number {p:?}")))).collect()
    };
    let sig = |s: &str| Signature::parse(s).ok_or_else(|| Error::Argument(format!("unknown signature {s:?}")));
    match kind {
        "closed1d" => {
            let v = nums(4)?;
            let t = translator_1d_closed_form(v[0], v[1], v[2], v[3], sig(&params[4])?)?;
            Ok(vec![format!("C={:.7}", t.speed), format!("C_full={:.16e}", t.speed), format!("x0={:.16e}", t.x0)])
        }
        "radial" => {
            let v = nums(3)?;
            if v[2] < 1.0 || v[2].fract() != 0.0 {
                return Err(Error::Argument("n must be a positive integer".into()));
            }
            let p = translator_radial_shooting(v[0], v[1], v[2] as usize, sig(&params[3])?, 1e-10)?;
            let path = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("profile.csv"));
            let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
            w.write_record(["r", "phi", "u"]).map_err(csv_err)?;
            for k in 0..p.radii.len() {
                w.write_record([float(p.radii[k]), float(p.slopes[k]), float(p.values[k])]).map_err(csv_err)?;
            }
            w.flush()?;
            Ok(vec![
                format!("C={:.10}", p.speed),
                format!("C_full={:.16e}", p.speed),
                format!("profile: {}", path.display()),
            ])
        }
        _ => Err(Error::Argument(format!("unknown oracle {kind:?} (expected closed1d or radial)"))),
    }
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self { name, value, tolerance, pass: value <= tolerance }
    }
}

/// Geometry identities, derivative checks, Legendre involution and oracle consistency.
pub fn check_suite(form: Transcription) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut bb = 0.0f64;
    let mut trace_div = 0.0f64;
    let mut gr = 0.0f64;
    for k in 0..1000 {
        let n = 1 + k % 3;
        for sig in [Signature::Minkowski, Signature::Euclidean] {
            let (p, r) = random_jet(&mut rng, n);
            let b = square_root_inverse_metric(&p, sig, form);
            let g = sig.inverse_metric(&p);
            bb = bb.max((&b * &b - &g).amax() / g.amax());
            if let Ok(jet) = PointJet::derivatives(p.clone(), r.clone()) {
                if let Ok(geo) = graph_geometry_with(&jet, sig, form) {
                    let scale = g_kernel(&p, &r, sig).abs().max(1.0);
                    trace_div = trace_div.max((geo.v * geo.mean_curvature - g_kernel(&p, &r, sig)).abs() / scale);
                }
            }
            let d = crate::operators::derivative_kernel(&p, &r, sig, form);
            gr = gr.max((d.g_r - g).amax());
        }
    }
    let fd = [Signature::Minkowski, Signature::Euclidean]
        .iter()
        .map(|&s| fd_check_derivatives(1000, s, 1e-5, form, 11))
        .fold(0.0, f64::max);

    let involution: Vec<f64> = [40usize, 80]
        .iter()
        .map(|&m| {
            let grid = Grid::line(0.0, 1.0, m).expect("grid");
            let u = grid.sample(|x| (1.0 + x[0] * x[0]).powf(1.5) / 3.0 + 0.2 * x[0]);
            legendre_transform(&grid, &u)
                .and_then(|d| d.inverse_transform())
                .map(|back| back.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let ratio = involution[0] / involution[1];

    let one_d = [Signature::Minkowski, Signature::Euclidean]
        .iter()
        .map(|&s| {
            let shot = translator_radial_shooting(1.0, 0.5, 1, s, 1e-10).map(|p| p.speed).unwrap_or(f64::NAN);
            let exact = translator_1d_closed_form(-1.0, 1.0, -0.5, 0.5, s).map(|t| t.speed).unwrap_or(f64::NAN);
            (shot - exact).abs()
        })
        .fold(0.0, f64::max);
    let frozen = translator_radial_shooting(1.0, 0.5, 2, Signature::Minkowski, 1e-10)
        .map(|p| (p.speed - FROZEN_DISK_SPEED).abs())
        .unwrap_or(f64::INFINITY);

    vec![
        CheckResult::at_most("b b = g^ij (1000 jets)", bb, 1e-12),
        CheckResult::at_most("trace form = divergence form", trace_div, 1e-10),
        CheckResult::at_most("G_r = g^ij", gr, 1e-14),
        CheckResult::at_most("G_r, G_p vs central differences", fd, 1e-6),
        CheckResult::at_most("Legendre involution error (h = 1/80)", involution[1], 1e-3),
        CheckResult {
            name: "Legendre involution order (error ratio)",
            value: ratio,
            tolerance: 3.5,
            pass: ratio >= 3.5,
        },
        CheckResult::at_most("radial shooting n=1 vs closed form", one_d, 1e-8),
        CheckResult::at_most("radial shooting n=2 vs frozen speed", frozen, 1e-8),
    ]
}

/// `check [--debug-paper-signs]`.
pub fn check_command(debug_paper_signs: bool) -> i32 {
    let form = if debug_paper_signs { Transcription::AsPrinted } else { Transcription::Corrected };
    let results = check_suite(form);
    println!("{:<44} {:>14} {:>10}  result", "check", "value", "tolerance");
    for r in &results {
        println!("{:<44} {:>14.3e} {:>10.1e}  {}", r.name, r.value, r.tolerance, pass(r.pass));
    }
    if results.iter().all(|r| r.pass) {
        0
    } else {
        1
    }
}

/// `report <csv>`: summary plus one `(t, value)` file per monitor column under `plot/`.
pub fn report_command(csv: &Path) -> i32 {
    match report_inner(csv) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn report_inner(csv: &Path) -> Result<String> {
    let (header, cols) = read_columns(csv)?;
    let col = |name: &str| header.iter().position(|h| h == name).map(|k| &cols[k]);
    let t = col("t").ok_or_else(|| Error::Config("monitors file has no t column".into()))?;
    if t.is_empty() {
        return Err(Error::Config(format!("{} has no rows", csv.display())));
    }
    let last = t.len() - 1;
    let get = |name: &str| col(name).ok_or_else(|| Error::Config(format!("missing column {name}")));
    let (umin, umax) = (get("udot_min")?, get("udot_max")?);
    let min_of = |v: &Vec<f64>| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_of = |v: &Vec<f64>| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = String::new();
    let dir = csv.parent().unwrap_or(Path::new("."));
    let snapshot = read_snapshot(&dir.join("snapshot.txt")).ok();
    let c_inf = snapshot
        .as_ref()
        .and_then(|s| s.header.get("c_inf"))
        .and_then(|c| c.parse::<f64>().ok())
        .unwrap_or(0.5 * (umin[last] + umax[last]));
    s += &format!("rows={}\nt_final={}\n", t.len(), t[last]);
    s += &format!("C_inf={c_inf:.12}\n");
    s += &format!("osc_final={:e}\n", umax[last] - umin[last]);
    if let Ok(report) = fs::read_to_string(dir.join("report.txt")) {
        if let Some(line) = report.lines().find(|l| l.starts_with("residual=")) {
            s += line;
            s += "\n";
        }
    }
    s += &format!("obliq_min={:.6}\n", min_of(get("obliq_min")?));
    s += &format!("hessian_range=[{:.6}, {:.6}]\n", min_of(get("hess_min")?), max_of(get("hess_max")?));
    let plot = dir.join("plot");
    fs::create_dir_all(&plot)?;
    for (k, name) in header.iter().enumerate().filter(|(_, h)| *h != "t") {
        let mut f = fs::File::create(plot.join(format!("{name}.dat")))?;
        for (x, y) in t.iter().zip(&cols[k]) {
            writeln!(f, "{} {}", float(*x), float(*y))?;
        }
    }
    let mut f = fs::File::create(plot.join("osc.dat"))?;
    for k in 0..t.len() {
        writeln!(f, "{} {}", float(t[k]), float(umax[k] - umin[k]))?;
    }
    s += &format!("plot data: {}\n", plot.display());
    Ok(s)
}

/// Record type used by examples that log their own steps.
pub fn step_line(r: &StepRecord) -> String {
    format!(
        "step {:>4}  t={:<12.6e} tau={:<10.3e} newton={} osc={:.3e} bdry={:.1e}",
        r.step,
        r.t,
        r.tau,
        r.newton_iters,
        r.oscillation(),
        r.boundary_residual
    )
}
