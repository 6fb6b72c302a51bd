use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use lcp_cones::bifurcation::{
    detect_bifurcations, sample_diagram, sample_pwl_graph, trace_path, AnnotatedEvent, ContinuumEntry, CountPiece,
    GridSpec, PwlPath, SolutionBranch,
};
use lcp_cones::cone::signature;
use lcp_cones::equivalence::{
    census, classify_planar, stability_2x2, EquivalenceRegistry, StabilityStatus, Verdict, CHAIN,
};
use lcp_cones::export::{format_number, write_diagram_csv, write_split, write_surface_csv, Coords};
use lcp_cones::interconnect::{
    build_pleat_problem, interconnect, on_center_mu, InterconnectionSpec, PleatScenario, RampOrientation, DEFAULT_S,
};
use lcp_cones::io::{parse_fixed, parse_vector, read_problem_file};
use lcp_cones::singularity::classify_regularity;
use lcp_cones::solver::{solve_enumeration, ContinuumSolution, SolutionPoint, Solutions, SolverOptions};
use lcp_cones::tol::DEFAULT_TOL;
use lcp_cones::{DMatrix, LcpError, LcpProblem, Result, Tolerance};

const EXIT_NO_SOLUTION: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lcp",
    version,
    about = "Linear complementarity problems via complementary cones"
)]
struct Cli {
    /// Base tolerance for feasibility and determinant tests.
    #[arg(long, global = true, env = "LCP_TOL", default_value_t = DEFAULT_TOL)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoordArg {
    X,
    Z,
}

impl From<CoordArg> for Coords {
    fn from(c: CoordArg) -> Self {
        match c {
            CoordArg::X => Coords::X,
            CoordArg::Z => Coords::Z,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RampArg {
    Rising,
    Falling,
}

impl From<RampArg> for RampOrientation {
    fn from(r: RampArg) -> Self {
        match r {
            RampArg::Rising => RampOrientation::Rising,
            RampArg::Falling => RampOrientation::Falling,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate all solutions of LCP(M, q).
    Solve {
        /// JSON file {"m": [[..]], "q": [..]}; q is optional when --q is given.
        #[arg(short, long)]
        matrix: PathBuf,
        /// Comma-separated q, e.g. "-2,-2".
        #[arg(long, allow_hyphen_values = true)]
        q: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace solutions along a piecewise-linear path q(λ), λ in [0, 1].
    Trace {
        #[arg(short, long)]
        matrix: PathBuf,
        /// Path literal "(a,b);(c,d);..." or a JSON file {"waypoints": [...], "domain": [lo, hi]}.
        #[arg(long, allow_hyphen_values = true)]
        path: String,
        /// Samples per branch.
        #[arg(long, default_value_t = 401)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one CSV per branch next to --out.
        #[arg(long, requires = "out")]
        split: bool,
        #[arg(long, value_enum, default_value_t = CoordArg::X)]
        coords: CoordArg,
    },
    /// Stability, equivalence class and cone signature of a 2x2 matrix.
    Classify {
        #[arg(short, long)]
        matrix: PathBuf,
    },
    /// Decide LCP equivalence of two 2x2 matrices.
    Equiv {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// "auto" runs every test in order; otherwise one named test.
        #[arg(long, default_value = CHAIN)]
        method: String,
    },
    /// Assemble the block LCP of two interconnected LCPs.
    Interconnect {
        /// JSON with m_a, m_b, h_a, h_b, theta_a, theta_b.
        #[arg(long)]
        spec: PathBuf,
        /// Also solve the assembled LCP at this λ.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace the pleat scenario: a scalar ramp driving M_b = [[1,2],[2,1]].
    Pleat {
        /// Rotation angle in radians.
        #[arg(long, default_value_t = DEFAULT_S, allow_hyphen_values = true)]
        s: f64,
        /// Offset "m1,m2"; defaults to the on-center value.
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
        #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
        lambda_range: String,
        #[arg(long, default_value_t = 401)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = RampArg::Falling)]
        ramp: RampArg,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, requires = "out")]
        split: bool,
        #[arg(long, value_enum, default_value_t = CoordArg::X)]
        coords: CoordArg,
    },
    /// Sample the folded graph {(f_M(x), x1)} of a 2x2 matrix on a grid.
    Surface {
        /// Defaults to [[1,2],[2,1]].
        #[arg(short, long)]
        matrix: Option<PathBuf>,
        /// "lo,hi,step" for both x1 and x2.
        #[arg(long, default_value = "-1,1,0.1", allow_hyphen_values = true)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the planar normal forms with their stability and class.
    NormalForms {
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        // A closed downstream pipe (`lcp ... | head`) is not an error.
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn broken_pipe(e: &LcpError) -> bool {
    let kind = match e {
        LcpError::Io(e) => Some(e.kind()),
        LcpError::Json(e) => e.io_error_kind(),
        _ => None,
    };
    kind == Some(io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Result<u8> {
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        return Err(LcpError::parse("tol", "must be a positive number"));
    }
    let tol = Tolerance::new(cli.tol);
    match cli.command {
        Command::Solve { matrix, q, format, out } => cmd_solve(&matrix, q.as_deref(), format, out.as_deref(), tol),
        Command::Trace {
            matrix,
            path,
            samples,
            format,
            out,
            split,
            coords,
        } => {
            let m = read_problem_file(&matrix)?.matrix()?;
            let path = if path.trim_start().starts_with('(') {
                PwlPath::from_literal(&path)?
            } else {
                PwlPath::from_file(Path::new(&path))?
            };
            emit_diagram(&m, &path, samples, format, out.as_deref(), split, coords.into(), tol)
        }
        Command::Classify { matrix } => cmd_classify(&matrix, tol),
        Command::Equiv { a, b, method } => {
            let a = read_problem_file(&a)?.matrix()?;
            let b = read_problem_file(&b)?.matrix()?;
            let r = EquivalenceRegistry::default().decide(&method, &a, &b, &tol)?;
            println!("{} ({})", r.status, r.method);
            Ok(if r.status == Verdict::Unknown { EXIT_UNKNOWN } else { 0 })
        }
        Command::Interconnect { spec, lambda, out } => {
            let spec = InterconnectionSpec::from_json(&std::fs::read_to_string(&spec)?)?;
            let lcp = interconnect(&spec)?;
            let mut value = serde_json::to_value(&lcp)?;
            if let Some(l) = lambda {
                let sol = solve_classified(&lcp.at(l)?, tol)?;
                value["lambda"] = json!(l);
                value["solutions"] = serde_json::to_value(&sol)?;
            }
            write_output(out.as_deref(), |w| {
                serde_json::to_writer_pretty(&mut *w, &value)?;
                writeln!(w)?;
                Ok(())
            })?;
            Ok(0)
        }
        Command::Pleat {
            s,
            mu,
            lambda_range,
            samples,
            ramp,
            format,
            out,
            split,
            coords,
        } => {
            let ramp: RampOrientation = ramp.into();
            let mu = match mu {
                Some(text) => {
                    let v = parse_fixed(&text, 2, "mu")?;
                    [v[0], v[1]]
                }
                None => on_center_mu(s, ramp),
            };
            let r = parse_fixed(&lambda_range, 2, "lambda-range")?;
            let sc = PleatScenario {
                s,
                mu,
                lambda_range: [r[0], r[1]],
                samples,
                ramp,
            };
            let (lcp, path) = build_pleat_problem(&sc)?;
            emit_diagram(
                &lcp.m,
                &path,
                samples,
                format,
                out.as_deref(),
                split,
                coords.into(),
                tol,
            )
        }
        Command::Surface { matrix, grid, out } => {
            let m = match matrix {
                Some(p) => read_problem_file(&p)?.matrix()?,
                None => DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            };
            let pts = sample_pwl_graph(&m, &GridSpec::parse(&grid)?)?;
            write_output(out.as_deref(), |w| write_surface_csv(w, &pts))?;
            Ok(0)
        }
        Command::NormalForms { format } => cmd_normal_forms(format, tol),
    }
}

fn write_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn solve_classified(problem: &LcpProblem, tol: Tolerance) -> Result<Solutions> {
    let mut sol = solve_enumeration(
        problem,
        &SolverOptions {
            tol,
            ..Default::default()
        },
    )?;
    for s in &mut sol.isolated {
        s.regularity = classify_regularity(problem.m(), &s.x, &tol)?;
    }
    Ok(sol)
}

fn cmd_solve(matrix: &Path, q: Option<&str>, format: Format, out: Option<&Path>, tol: Tolerance) -> Result<u8> {
    let mut file = read_problem_file(matrix)?;
    if let Some(q) = q {
        file.q = Some(parse_vector(q, "q")?.iter().copied().collect());
    }
    let problem = file.problem()?;
    let sol = solve_classified(&problem, tol)?;
    let n = problem.n();
    write_output(out, |w| match format {
        Format::Json => {
            let report = SolveReport {
                n,
                solutions: &sol.isolated,
                continua: &sol.continua,
            };
            serde_json::to_writer_pretty(&mut *w, &report)?;
            writeln!(w)?;
            Ok(())
        }
        Format::Csv => {
            let mut cols = vec!["kind".to_string()];
            for p in ["x", "z", "w"] {
                cols.extend((1..=n).map(|i| format!("{p}{i}")));
            }
            writeln!(w, "{}", cols.join(","))?;
            let mut line = |kind: &str, x: &lcp_cones::DVector<f64>| -> Result<()> {
                let (z, wv) = lcp_cones::algebra::x_to_zw(x);
                let vals: Vec<String> = x
                    .iter()
                    .chain(z.iter())
                    .chain(wv.iter())
                    .map(|&v| format_number(v))
                    .collect();
                writeln!(w, "{kind},{}", vals.join(","))?;
                Ok(())
            };
            for s in &sol.isolated {
                line("point", &s.x)?;
            }
            for c in &sol.continua {
                for x in c.endpoints() {
                    line("continuum-end", &x)?;
                }
            }
            Ok(())
        }
    })?;
    Ok(if sol.is_empty() { EXIT_NO_SOLUTION } else { 0 })
}

#[allow(clippy::too_many_arguments)]
fn emit_diagram(
    m: &DMatrix<f64>,
    path: &PwlPath,
    samples: usize,
    format: Format,
    out: Option<&Path>,
    split: bool,
    coords: Coords,
    tol: Tolerance,
) -> Result<u8> {
    if samples < 2 {
        return Err(LcpError::parse("samples", "need at least 2"));
    }
    let d = trace_path(m, path, &tol)?;
    match format {
        Format::Json => {
            let report = DiagramReport {
                branches: &d.branches,
                continua: &d.continua,
                events: detect_bifurcations(&d)?,
                count_fn: &d.count_fn,
            };
            write_output(out, |w| {
                serde_json::to_writer_pretty(&mut *w, &report)?;
                writeln!(w)?;
                Ok(())
            })?;
        }
        Format::Csv => {
            let rows = sample_diagram(&d, samples)?;
            let n = m.nrows();
            match (split, out) {
                (true, Some(out)) => {
                    for p in write_split(out, &rows, n, coords)? {
                        eprintln!("wrote {}", p.display());
                    }
                }
                _ => write_output(out, |w| write_diagram_csv(w, &rows, n, coords))?,
            }
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct SolveReport<'a> {
    n: usize,
    solutions: &'a [SolutionPoint],
    continua: &'a [ContinuumSolution],
}

#[derive(Serialize)]
struct DiagramReport<'a> {
    branches: &'a [SolutionBranch],
    continua: &'a [ContinuumEntry],
    events: Vec<AnnotatedEvent>,
    count_fn: &'a [CountPiece],
}

#[derive(Serialize)]
struct ClassifyReport {
    class: String,
    stability: lcp_cones::equivalence::StabilityVerdict,
    signature: lcp_cones::cone::ConeSignature,
    canonical: Vec<i64>,
    count_values: Vec<u32>,
}

fn cmd_classify(matrix: &Path, tol: Tolerance) -> Result<u8> {
    let m = read_problem_file(matrix)?.matrix()?;
    let sig = signature(&m, &tol)?;
    let report = ClassifyReport {
        class: classify_planar(&m, &tol)?.to_string(),
        stability: stability_2x2(&m, &tol)?,
        canonical: sig.canonical(),
        count_values: sig.count_values(),
        signature: sig,
    };
    write_output(None, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(0)
}

fn cmd_normal_forms(format: Format, tol: Tolerance) -> Result<u8> {
    let entries = census(&tol)?;
    write_output(None, |out| match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &entries)?;
            writeln!(out)?;
            Ok(())
        }
        Format::Csv => {
            writeln!(out, "family,delta,m11,m12,m21,m22,stability,class")?;
            for e in &entries {
                let m = &e.form.matrix;
                let status = match e.stability {
                    StabilityStatus::Stable => "stable",
                    StabilityStatus::Unstable => "unstable",
                    StabilityStatus::Boundary => "boundary",
                };
                let delta: Vec<String> = e.form.delta.iter().map(|d| d.to_string()).collect();
                writeln!(
                    out,
                    "{:?},{},{},{},{},{},{status},{}",
                    e.form.family,
                    delta.join(" "),
                    format_number(m[(0, 0)]),
                    format_number(m[(0, 1)]),
                    format_number(m[(1, 0)]),
                    format_number(m[(1, 1)]),
                    e.class
                )?;
            }
            Ok(())
        }
    })?;
    Ok(0)
}
