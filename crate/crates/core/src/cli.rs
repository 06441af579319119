//! Command-line front end. `run` parses arguments, builds the grid and data
//! fields, runs one pipeline and writes JSON reports and CSV fields to the
//! output directory.
//!
//! Exit status: 0 on success, 1 when a check fails or a solver does not
//! converge, 2 on usage and parameter errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::differential::{profile_log_slope, remainder_profile, write_profile_csv, x_differential};
use crate::eikonal::{residual_maps, solve_eikonal_with, EikonalOptions, Scheme, Source};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::frames::Frame;
use crate::grid::{read_scalar_csv, write_scalar_csv, Grid, ScalarField};
use crate::limits::{limit_compare, lipschitz_bound_check, monotonicity_check, p_sweep, LimitKind, Mode, SweepConfig, SweepData};
use crate::ppoisson::{dirichlet_flux_check, ep_identities, solve_p_poisson, Optimizer, SolveConfig};
use crate::viscosity::{probe_viscosity, write_verdicts_csv, Equation, ProbeOptions, ProbeStatus, Side};

pub const OUT_ENV: &str = "SUBELLIPTIC_OUT";
pub const MIN_RES: usize = 9;
const BUILTIN_FRAMES: [&str; 6] = ["euclidean1", "euclidean2", "euclidean3", "heisenberg1", "grushin", "flat_phi"];

#[derive(Parser, Debug, Serialize)]
#[command(name = "subelliptic", version, about = "Subelliptic p-Poisson solves, distance fields and p -> infinity checks")]
pub struct Cli {
    /// Output directory; falls back to $SUBELLIPTIC_OUT, then `./out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Single worker and no timings in reports, so reruns are bitwise identical.
    #[arg(long, global = true)]
    pub deterministic: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GridArgs {
    /// Built-in frame: euclidean<n>, heisenberg1, grushin, flat_phi.
    #[arg(long, default_value = "euclidean2")]
    pub frame: String,
    /// Custom frame definition file; overrides --frame.
    #[arg(long)]
    pub frame_file: Option<PathBuf>,
    /// Box lower corner, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub lower: Option<String>,
    /// Box upper corner, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub upper: Option<String>,
    /// Nodes per axis: one value or one per axis.
    #[arg(long, default_value = "33")]
    pub res: String,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerArg {
    Newton,
    Ncg,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "newton")]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    /// Absolute gradient tolerance; default `1e-8 (1 + E) h^n`.
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Regularization schedule, comma separated and decreasing.
    #[arg(long)]
    pub eps_schedule: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Sl,
    Lf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationArg {
    Inf,
    Eikonal,
    Ppoisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SideArg {
    Sub,
    Super,
    Both,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case", tag = "subcommand")]
pub enum Command {
    /// List built-in frames, or check one frame at sampled points.
    Frames {
        #[arg(long)]
        frame: Option<String>,
        #[arg(long)]
        frame_file: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Bracket depth of the Hormander probe.
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Solve one p-Poisson Dirichlet problem.
    Solve {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 4.0)]
        p: f64,
        /// const:<c> | expr:<expression in x1..xn> | file:<csv>
        #[arg(long, default_value = "const:1", allow_hyphen_values = true)]
        f: String,
        #[arg(long, default_value = "const:0", allow_hyphen_values = true)]
        g: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Sweep p and run the limit checks.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "4,8,16,32,64")]
        p_list: String,
        /// Source term (non-homogeneous mode, zero boundary values).
        #[arg(long, allow_hyphen_values = true)]
        f: Option<String>,
        /// Boundary data on the whole grid (homogeneous mode).
        #[arg(long, allow_hyphen_values = true)]
        g: Option<String>,
        /// Solve each p from scratch instead of warm starting.
        #[arg(long)]
        cold: bool,
        /// Also write every u_p as CSV.
        #[arg(long)]
        write_fields: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Distance field to the boundary or to a point.
    Distance {
        #[command(flatten)]
        grid: GridArgs,
        /// `boundary` or `point:x1,..,xn`.
        #[arg(long, default_value = "boundary", allow_hyphen_values = true)]
        source: String,
        #[arg(long, value_enum, default_value = "sl")]
        scheme: SchemeArg,
    },
    /// X-differential and remainder profile of a field at a point.
    Differential {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, allow_hyphen_values = true)]
        u: String,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long, default_value = "0.4,0.2,0.1")]
        radii: String,
        #[arg(long, value_enum, default_value = "sl")]
        scheme: SchemeArg,
    },
    /// Viscosity sign conditions at chosen or sampled points.
    Probe {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, allow_hyphen_values = true)]
        u: String,
        #[arg(long, value_enum, default_value = "inf")]
        equation: EquationArg,
        #[arg(long, default_value_t = 4.0)]
        p: f64,
        #[arg(long, default_value = "const:0", allow_hyphen_values = true)]
        f: String,
        #[arg(long, value_enum, default_value = "both")]
        side: SideArg,
        /// Probe point; when absent, `--points` interior nodes are sampled.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = 512)]
        budget: usize,
    },
    /// Run a suite of quick invariant checks.
    Verify {
        #[arg(long, default_value = "core")]
        suite: String,
    },
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let workers = if cli.deterministic { 1 } else { cli.workers };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: workers: {e}");
            return 2;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            match e.source {
                Error::NoConvergence { .. } | Error::SweepNoConvergence { .. } => 1,
                _ => 2,
            }
        }
    }
}

/// An error tagged with the flag or key it came from.
#[derive(Debug)]
pub struct CliError {
    pub key: String,
    pub source: Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.source)
    }
}

trait Keyed<T> {
    fn key(self, key: &str) -> std::result::Result<T, CliError>;
    /// Like `key`, but for calls that take many settings at once: a parameter
    /// error is keyed by the parameter it names instead of `stage`.
    fn stage(self, stage: &str) -> std::result::Result<T, CliError>;
}

impl<T> Keyed<T> for Result<T> {
    fn key(self, key: &str) -> std::result::Result<T, CliError> {
        self.map_err(|source| CliError { key: key.to_string(), source })
    }

    fn stage(self, stage: &str) -> std::result::Result<T, CliError> {
        self.map_err(|source| {
            let key = match &source {
                Error::Parameter { name, .. } if !name.contains(char::is_whitespace) => name.replace('_', "-"),
                _ => stage.to_string(),
            };
            CliError { key, source }
        })
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::param(key, format!("`{t}` is not a number")))
        })
        .collect()
}

pub fn build_grid(a: &GridArgs) -> CliResult<Grid> {
    let mut frame = match &a.frame_file {
        Some(p) => Frame::load(p).key("frame-file")?,
        None => Frame::by_name(&a.frame).key("frame")?,
    };
    match (&a.lower, &a.upper) {
        (Some(lo), Some(hi)) => {
            let lo = parse_list("lower", lo).key("lower")?;
            let hi = parse_list("upper", hi).key("upper")?;
            frame = frame.with_box(lo, hi).key("lower/upper")?;
        }
        (None, None) => {}
        _ => return Err(Error::param("box", "give both --lower and --upper")).key("lower/upper"),
    }
    let res: Vec<usize> = a
        .res
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::param("res", format!("`{t}` is not a count"))))
        .collect::<Result<_>>()
        .key("res")?;
    let res = match res.len() {
        1 => vec![res[0]; frame.n()],
        _ => res,
    };
    if res.iter().any(|r| *r < MIN_RES) {
        return Err(Error::param("res", format!("need at least {MIN_RES} nodes per axis"))).key("res");
    }
    Grid::new(frame, &res).key("res")
}

/// Reads a field specifier `const:<c>`, `expr:<expression>` or `file:<csv>`.
pub fn parse_field(grid: &Grid, text: &str) -> Result<ScalarField> {
    if let Some(c) = text.strip_prefix("const:") {
        let c: f64 = c.trim().parse().map_err(|_| Error::param("const", format!("`{c}` is not a number")))?;
        return Ok(ScalarField::constant(grid, c));
    }
    if let Some(src) = text.strip_prefix("expr:") {
        let e = Expr::parse(src, grid.dim())?;
        let u = ScalarField::from_fn(grid, |x| e.eval(x));
        if u.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::param("expr", format!("`{src}` is not finite on the grid")));
        }
        return Ok(u);
    }
    if let Some(path) = text.strip_prefix("file:") {
        return read_scalar_csv(grid, path);
    }
    Err(Error::param("specifier", format!("`{text}` must start with const:, expr: or file:")))
}

fn solve_config(s: &SolverArgs, p: f64) -> CliResult<SolveConfig> {
    let mut cfg = SolveConfig::new(p).with_optimizer(match s.optimizer {
        OptimizerArg::Newton => Optimizer::Newton,
        OptimizerArg::Ncg => Optimizer::NonlinearCg,
    });
    cfg.max_iters = s.max_iters;
    if let Some(t) = s.grad_tol {
        cfg = cfg.with_grad_tol(t);
    }
    if let Some(e) = &s.eps_schedule {
        cfg = cfg.with_eps_schedule(parse_list("eps-schedule", e).key("eps-schedule")?);
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::write(dir.join(name), text).map_err(Error::from).key(name)
}

fn write_json(dir: &Path, name: &str, v: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from).key(name)?;
    write_text(dir, name, &(text + "\n"))
}

fn write_field(dir: &Path, name: &str, grid: &Grid, u: &ScalarField) -> CliResult<()> {
    let file = fs::File::create(dir.join(name)).map_err(Error::from).key(name)?;
    write_scalar_csv(grid, u, std::io::BufWriter::new(file)).key(name)
}

fn grid_json(grid: &Grid) -> Value {
    json!({
        "frame": grid.frame().name(),
        "n": grid.dim(),
        "m": grid.m(),
        "lower": grid.frame().bounds().lower(),
        "upper": grid.frame().bounds().upper(),
        "resolution": grid.resolution(),
        "h": grid.h(),
    })
}

fn scheme_opts(s: SchemeArg) -> EikonalOptions {
    EikonalOptions {
        scheme: match s {
            SchemeArg::Sl => Scheme::SemiLagrangian,
            SchemeArg::Lf => Scheme::LaxFriedrichs,
        },
        ..EikonalOptions::default()
    }
}

fn execute(cli: &Cli) -> CliResult<bool> {
    let dir = out_dir(cli);
    fs::create_dir_all(&dir).map_err(Error::from).key("out")?;
    let timing = !cli.deterministic;
    let mut resolved = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "out": dir,
        "deterministic": cli.deterministic,
        "workers": rayon::current_num_threads(),
        "seed": cli.seed,
        "command": &cli.command,
    });
    let ok = match &cli.command {
        Command::Frames { frame, frame_file, samples, depth } => {
            let frame = match (frame_file, frame) {
                (Some(p), _) => Some(Frame::load(p).key("frame-file")?),
                (None, Some(n)) => Some(Frame::by_name(n).key("frame")?),
                (None, None) => None,
            };
            match frame {
                None => {
                    let list: Vec<Value> = BUILTIN_FRAMES
                        .iter()
                        .map(|n| {
                            let f = Frame::by_name(n).expect("built-in");
                            json!({"name": n, "n": f.n(), "m": f.m(), "lower": f.bounds().lower(), "upper": f.bounds().upper()})
                        })
                        .collect();
                    for v in &list {
                        println!("{} n={} m={}", v["name"].as_str().unwrap(), v["n"], v["m"]);
                    }
                    write_json(&dir, "frames.json", &list)?;
                    true
                }
                Some(f) => {
                    let rep = frame_report(&f, *samples, *depth, cli.seed).key("frame")?;
                    println!(
                        "{}: {} LIC points, left inverse error {:.3e}, bracket ranks {}",
                        f.name(),
                        rep["lic_points"],
                        rep["left_inverse_error"].as_f64().unwrap_or(f64::NAN),
                        rep["bracket_ranks"]
                    );
                    let passed = rep["passed"].as_bool().unwrap_or(false);
                    write_json(&dir, "frames.json", &rep)?;
                    passed
                }
            }
        }
        Command::Solve { grid, p, f, g, solver } => {
            let grid = build_grid(grid)?;
            resolved["grid"] = grid_json(&grid);
            let fv = parse_field(&grid, f).key("f")?;
            let gv = parse_field(&grid, g).key("g")?;
            let cfg = solve_config(solver, *p)?;
            resolved["solver"] = json!({"eps_schedule": cfg.validate(&grid).stage("eps-schedule")?, "max_iters": cfg.max_iters});
            let rep = solve_p_poisson(&grid, &fv, &gv, &cfg).stage("solve")?;
            let ids = ep_identities(&grid, &rep, &fv);
            let flux = dirichlet_flux_check(&grid, &rep, &fv);
            let mut out = json!({
                "summary": rep.summary(),
                "identities": ids,
                "flux": flux,
                "grad_tol": rep.grad_tol,
                "energy_trace": rep.energy_trace,
            });
            if timing {
                out["runtime_s"] = json!(rep.runtime_s);
            }
            println!("E_p = {:.10e}, iterations {}, duality gap {:.3e}", rep.e_p, rep.iterations, rep.duality_gap);
            write_json(&dir, "solve.json", &out)?;
            write_field(&dir, "u.csv", &grid, &rep.u)?;
            true
        }
        Command::Sweep { grid, p_list, f, g, cold, write_fields, solver } => {
            let grid = build_grid(grid)?;
            resolved["grid"] = grid_json(&grid);
            let ps = parse_list("p-list", p_list).key("p-list")?;
            let data = match (f, g) {
                (Some(_), Some(_)) => {
                    return Err(Error::param("f/g", "give --f (zero boundary data) or --g (f = 0), not both")).key("f/g")
                }
                (None, Some(g)) => SweepData::Boundary(parse_field(&grid, g).key("g")?),
                (Some(f), None) => SweepData::Source(parse_field(&grid, f).key("f")?),
                (None, None) => SweepData::Source(ScalarField::constant(&grid, 1.0)),
            };
            let cfg = SweepConfig {
                solve: solve_config(solver, 2.0)?,
                warm_start: !cold,
            };
            let mut rep = p_sweep(&grid, &data, &ps, &cfg).stage("sweep")?;
            if !timing {
                rep.entries.iter_mut().for_each(|e| e.runtime_s = 0.0);
            }
            let mut checks = json!({});
            let mut passed = true;
            match rep.mode {
                Mode::NonHomogeneous => {
                    let mono = monotonicity_check(&rep).key("sweep")?;
                    passed &= mono.passed;
                    checks["monotonicity"] = json!(mono);
                    if rep.limit_kind == LimitKind::Eikonal {
                        let cmp = limit_compare(&grid, &rep, &rep.limit).key("sweep")?;
                        passed &= cmp.bounds_hold;
                        checks["limit"] = json!(cmp);
                    }
                }
                Mode::Homogeneous => {
                    let lip = lipschitz_bound_check(&grid, &rep).key("sweep")?;
                    passed &= lip.passed;
                    checks["lipschitz"] = json!(lip);
                }
            }
            for e in &rep.entries {
                println!("p = {:>6}  E_p = {:.8e}  N_p = {:.8e}  sup_gap = {:.4e}", e.p, e.e_p, e.n_p, e.sup_gap);
            }
            let report: Value = serde_json::from_str(&rep.to_json().key("sweep")?).map_err(Error::from).key("sweep")?;
            write_json(&dir, "sweep.json", &json!({"report": report, "checks": checks}))?;
            if *write_fields {
                for (p, u) in rep.p_list.iter().zip(&rep.fields) {
                    write_field(&dir, &format!("u_p{p}.csv"), &grid, u)?;
                }
                write_field(&dir, "limit.csv", &grid, &rep.limit)?;
            }
            passed
        }
        Command::Distance { grid, source, scheme } => {
            let grid = build_grid(grid)?;
            resolved["grid"] = grid_json(&grid);
            let src = parse_source(&grid, source).key("source")?;
            let field = solve_eikonal_with(&grid, &src, &scheme_opts(*scheme)).key("distance")?;
            let maps = residual_maps(&grid, &field.d, &field.source_nodes);
            println!(
                "{} sweeps, residual max {:.3e} over {} nodes ({} ridge flagged)",
                field.sweeps, field.residual.max_abs, field.residual.checked, field.residual.ridge_flagged
            );
            write_json(
                &dir,
                "distance.json",
                &json!({"sweeps": field.sweeps, "last_update": field.last_update, "residual": field.residual,
                        "ridge_nodes": maps.ridge.iter().filter(|b| **b).count()}),
            )?;
            write_field(&dir, "distance.csv", &grid, &field.d)?;
            true
        }
        Command::Differential { grid, u, at, radii, scheme } => {
            let grid = build_grid(grid)?;
            resolved["grid"] = grid_json(&grid);
            let uv = parse_field(&grid, u).key("u")?;
            let x = parse_list("at", at).key("at")?;
            let node = locate(&grid, &x).key("at")?;
            let radii = parse_list("radii", radii).key("radii")?;
            let diff = x_differential(&grid, &uv, node).key("at")?;
            let dist = solve_eikonal_with(&grid, &Source::Nodes(vec![node]), &scheme_opts(*scheme)).key("distance")?;
            let prof = remainder_profile(&grid, &uv, node, &radii, &dist).key("radii")?;
            let slope = profile_log_slope(&prof);
            println!("L = {:?}, log-slope {:?}", diff.l, slope);
            let file = fs::File::create(dir.join("profile.csv")).map_err(Error::from).key("profile.csv")?;
            write_profile_csv(&prof, file).key("profile.csv")?;
            write_json(&dir, "differential.json", &json!({"differential": diff, "profile": prof, "log_slope": slope}))?;
            slope.is_none_or(|s| s > 0.0)
        }
        Command::Probe { grid, u, equation, p, f, side, at, points, budget } => {
            let grid = build_grid(grid)?;
            resolved["grid"] = grid_json(&grid);
            let uv = parse_field(&grid, u).key("u")?;
            let eq = match equation {
                EquationArg::Inf => Equation::InfLaplace,
                EquationArg::Eikonal => Equation::Eikonal,
                EquationArg::Ppoisson => Equation::PPoisson { p: *p, f: parse_field(&grid, f).key("f")? },
            };
            let opts = ProbeOptions { budget: *budget, ..ProbeOptions::default() };
            let nodes = match at {
                Some(a) => vec![locate(&grid, &parse_list("at", a).key("at")?).key("at")?],
                None => sample_probe_nodes(&grid, *points, opts.radius_cells, cli.seed),
            };
            if nodes.is_empty() {
                return Err(Error::param("points", "grid too coarse for the probe ball")).key("points");
            }
            let sides = match side {
                SideArg::Sub => vec![Side::Sub],
                SideArg::Super => vec![Side::Super],
                SideArg::Both => vec![Side::Sub, Side::Super],
            };
            let mut verdicts = Vec::new();
            for &v in &nodes {
                for &s in &sides {
                    verdicts.push(probe_viscosity(&grid, &uv, v, &eq, s, &opts).key("at")?);
                }
            }
            for v in &verdicts {
                println!("{:?} {:?}: {:?}, {} admissible, worst {:.3e}", v.point, v.side, v.status, v.admissible, v.worst_violation);
            }
            let file = fs::File::create(dir.join("verdicts.csv")).map_err(Error::from).key("verdicts.csv")?;
            write_verdicts_csv(&verdicts, file).key("verdicts.csv")?;
            write_json(&dir, "probe.json", &verdicts)?;
            verdicts.iter().all(|v| v.status != ProbeStatus::Violation)
        }
        Command::Verify { suite } => {
            let results = crate::verify::run_suite(suite).key("suite")?;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            write_json(&dir, "verify.json", &results)?;
            results.iter().all(|r| r.passed)
        }
    };
    write_json(&dir, "manifest.json", &resolved)?;
    Ok(ok)
}

fn locate(grid: &Grid, x: &[f64]) -> Result<usize> {
    if x.len() != grid.dim() {
        return Err(Error::param("at", format!("need {} coordinates", grid.dim())));
    }
    grid.nearest_node(x).ok_or_else(|| Error::Domain { point: x.to_vec() })
}

fn parse_source(grid: &Grid, s: &str) -> Result<Source> {
    if s == "boundary" {
        return Ok(Source::Boundary);
    }
    if let Some(pt) = s.strip_prefix("point:") {
        let x = parse_list("source", pt)?;
        if x.len() != grid.dim() {
            return Err(Error::param("source", format!("need {} coordinates", grid.dim())));
        }
        return Ok(Source::Point(x));
    }
    Err(Error::param("source", format!("`{s}` is neither `boundary` nor `point:..`")))
}

fn sample_probe_nodes(grid: &Grid, count: usize, radius_cells: f64, seed: u64) -> Vec<usize> {
    let r0 = radius_cells * grid.h();
    let mut eligible: Vec<usize> = grid
        .interior_nodes()
        .iter()
        .copied()
        .filter(|&v| grid.frame().bounds().inner_margin(&grid.coords(v)) >= r0)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    eligible.truncate(count);
    eligible.sort_unstable();
    eligible
}

fn frame_report(f: &Frame, samples: usize, depth: usize, seed: u64) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (f.bounds().lower(), f.bounds().upper());
    let (mut lic, mut singular, mut worst) = (0usize, 0usize, 0.0f64);
    for _ in 0..samples {
        let x: Vec<f64> = (0..f.n()).map(|k| rng.random_range(lo[k]..=hi[k])).collect();
        match f.left_inverse(&x) {
            Ok(ct) => {
                lic += 1;
                let c = f.eval_coeff(&x)?;
                let prod = &ct * c.transpose();
                let err = (prod - nalgebra::DMatrix::<f64>::identity(f.m(), f.m())).amax();
                worst = worst.max(err);
            }
            Err(Error::SingularFrame { .. }) => singular += 1,
            Err(e) => return Err(e),
        }
    }
    let center: Vec<f64> = (0..f.n()).map(|k| 0.5 * (lo[k] + hi[k])).collect();
    let probe_at: Vec<f64> = match f.lic_check(&center) {
        Ok(r) if r.rank == f.m() => center,
        _ => (0..f.n()).map(|k| lo[k] + 0.6 * (hi[k] - lo[k])).collect(),
    };
    let ranks = f.hormander_probe(&probe_at, depth)?;
    let spans = ranks.last().is_some_and(|r| *r == f.n());
    Ok(json!({
        "name": f.name(),
        "n": f.n(),
        "m": f.m(),
        "samples": samples,
        "lic_points": lic,
        "singular_points": singular,
        "left_inverse_error": worst,
        "bracket_point": probe_at,
        "bracket_ranks": ranks,
        "hormander_at_point": spans,
        "passed": worst <= 1e-10 && spans,
    }))
}
