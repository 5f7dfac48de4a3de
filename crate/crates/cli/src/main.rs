//! Command-line front end: solve relaxations, run the classical and
//! see-saw oracles, verify certificates, and sweep hierarchy levels.
//!
//! Exit codes: 0 success/optimal, 1 usage or parse error, 2 solver
//! non-optimal or verification failure, 3 monotonicity violation in
//! `sequence`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use ncgames::certificates;
use ncgames::games::{builtin, parse_game, serialize_game, Game};
use ncgames::hierarchy::{
    build_moment_sdp, build_sos_sdp, generate_basis, parse_custom_basis, parse_level_spec,
    LevelSpec, RelaxationProblem,
};
use ncgames::oracles::{classical_value, seesaw_lower_bound};
use ncgames::sdp::{export_sdpa, solve, SdpSolution, SolveOptions, SolveStatus};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "ncgames", version, about = "Certified upper bounds on nonlocal game values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a hierarchy relaxation and print the bound.
    Solve(SolveArgs),
    /// Exact classical value by strategy enumeration.
    Classical(GameOnlyArgs),
    /// See-saw lower bound at fixed Hilbert-space dimension.
    Seesaw(SeesawArgs),
    /// Verify a certificate file against a game.
    VerifyCert(VerifyArgs),
    /// Solve full:1 .. full:n and check monotone nonincrease.
    Sequence(SequenceArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Game file path or `builtin:NAME`.
    game: String,
    /// Level spec: `full:<n>`, shape list like `1+AB`, or `custom:<path>`.
    #[arg(long)]
    level: String,
    /// Formulation to solve.
    #[arg(long, default_value = "moment", value_parser = ["sos", "moment"])]
    form: String,
    /// `ipm` solves in-process; `export` only writes the SDPA file.
    #[arg(long, default_value = "ipm", value_parser = ["ipm", "export"])]
    solver: String,
    /// Interior-point duality-gap tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Write the extracted certificate here.
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Write the SDPA sparse-format problem here.
    #[arg(long)]
    export_sdpa: Option<PathBuf>,
    /// Write a key = value run report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GameOnlyArgs {
    game: String,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SeesawArgs {
    game: String,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    cert_file: PathBuf,
    game: String,
    /// Maximum accepted residual.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SequenceArgs {
    game: String,
    #[arg(long)]
    max_level: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Nine significant digits in plain decimal.
fn fmt9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.8}");
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (8 - exp).clamp(0, 17) as usize;
    format!("{v:.decimals$}")
}

struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    fn new(game: &str, hash: &str) -> Self {
        let mut r = Report { entries: Vec::new() };
        r.push("tool_version", VERSION);
        r.push("game", game);
        r.push("input_sha256", hash);
        r
    }

    fn push(&mut self, k: &str, v: impl ToString) {
        self.entries.push((k.to_string(), v.to_string()));
    }

    fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        std::fs::write(path, out)
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

/// Load a game from `builtin:NAME` or a file; the hash identifies the
/// exact input (file bytes, or canonical serialization for builtins).
fn load_game(spec: &str) -> Result<(Game, String), String> {
    let (game, bytes) = if let Some(name) = spec.strip_prefix("builtin:") {
        let g = builtin(name).map_err(|e| e.to_string())?;
        let text = serialize_game(&g);
        (g, text.into_bytes())
    } else {
        let text = std::fs::read_to_string(spec).map_err(|e| format!("{spec}: {e}"))?;
        let (g, report) = parse_game(&text).map_err(|e| e.to_string())?;
        for note in &report.notes {
            eprintln!("note: {note}");
        }
        (g, text.into_bytes())
    };
    Ok((game, hex::encode(Sha256::digest(&bytes))))
}

fn load_level(spec: &str, game: &Game) -> Result<LevelSpec, String> {
    if let Some(path) = spec.strip_prefix("custom:") {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
        let monos = parse_custom_basis(&text, game).map_err(|e| e.to_string())?;
        Ok(LevelSpec::Custom(monos))
    } else {
        parse_level_spec(spec, game.num_parties).map_err(|e| e.to_string())
    }
}

fn build(game: &Game, level: &LevelSpec, form: &str) -> Result<RelaxationProblem, String> {
    let basis = generate_basis(game, level).map_err(|e| e.to_string())?;
    match form {
        "sos" => build_sos_sdp(game, &basis).map_err(|e| e.to_string()),
        _ => build_moment_sdp(game, &basis).map_err(|e| e.to_string()),
    }
}

fn push_solution(report: &mut Report, sol: &SdpSolution, bound: f64, time: f64) {
    report.push("status", format!("{:?}", sol.status).to_lowercase());
    report.push("bound", fmt9(bound));
    report.push("iterations", sol.iterations);
    report.push("primal_residual", format!("{:.3e}", sol.primal_residual));
    report.push("dual_residual", format!("{:.3e}", sol.dual_residual));
    report.push("gap", format!("{:.3e}", sol.gap));
    report.push("time_s", format!("{time:.3}"));
}

fn cmd_solve(args: &SolveArgs) -> ExitCode {
    let (game, hash) = match load_game(&args.game) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let level = match load_level(&args.level, &game) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let relax = match build(&game, &level, &args.form) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };

    let mut report = Report::new(&game.name, &hash);
    report.push("level", &args.level);
    report.push("form", &args.form);
    report.push("solver", &args.solver);
    report.push("tol", format!("{:e}", args.tol));

    if let Some(path) = &args.export_sdpa {
        if let Err(e) = export_sdpa(&relax.sdp, path) {
            return fail(e);
        }
        report.push("sdpa_file", path.display());
    }
    if args.solver == "export" {
        if args.export_sdpa.is_none() {
            return fail("--solver export requires --export-sdpa <path>");
        }
        if let Some(path) = &args.report {
            if let Err(e) = report.write(path) {
                return fail(e);
            }
        }
        return ExitCode::SUCCESS;
    }

    let opts = SolveOptions { tol: args.tol, ..SolveOptions::default() };
    let t = Instant::now();
    let sol = match solve(&relax.sdp, &opts) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let bound = relax.bound_from(&sol);
    push_solution(&mut report, &sol, bound, t.elapsed().as_secs_f64());

    if let Some(path) = &args.cert {
        match certificates::extract(&relax, &sol).and_then(|cert| {
            let residual = certificates::verify(&cert, &game)?;
            certificates::write_certificate(path, &cert)?;
            Ok(residual)
        }) {
            Ok(residual) => report.push("certificate_residual", format!("{residual:.3e}")),
            Err(e) => return fail(format!("certificate extraction: {e}")),
        }
    }

    println!("{}", fmt9(bound));
    if let Some(path) = &args.report {
        if let Err(e) = report.write(path) {
            return fail(e);
        }
    }
    if sol.status == SolveStatus::Optimal {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_classical(args: &GameOnlyArgs) -> ExitCode {
    let (game, hash) = match load_game(&args.game) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let t = Instant::now();
    let value = match classical_value(&game) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    println!("{}", fmt9(value));
    if let Some(path) = &args.report {
        let mut report = Report::new(&game.name, &hash);
        report.push("classical_value", fmt9(value));
        report.push("time_s", format!("{:.3}", t.elapsed().as_secs_f64()));
        if let Err(e) = report.write(path) {
            return fail(e);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_seesaw(args: &SeesawArgs) -> ExitCode {
    let (game, hash) = match load_game(&args.game) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let t = Instant::now();
    let value = match seesaw_lower_bound(&game, args.dim, args.restarts, args.seed) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    println!("{}", fmt9(value));
    if let Some(path) = &args.report {
        let mut report = Report::new(&game.name, &hash);
        report.push("seesaw_value", fmt9(value));
        report.push("dim", args.dim);
        report.push("restarts", args.restarts);
        report.push("seed", args.seed);
        report.push("time_s", format!("{:.3}", t.elapsed().as_secs_f64()));
        if let Err(e) = report.write(path) {
            return fail(e);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_verify_cert(args: &VerifyArgs) -> ExitCode {
    let (game, hash) = match load_game(&args.game) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let cert = match certificates::read_certificate(&args.cert_file) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let residual = match certificates::verify(&cert, &game) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: verification: {e}");
            return ExitCode::from(2);
        }
    };
    println!("{}", fmt9(residual));
    if let Some(path) = &args.report {
        let mut report = Report::new(&game.name, &hash);
        report.push("certificate_bound", fmt9(cert.bound));
        report.push("certificate_residual", format!("{residual:.3e}"));
        report.push("tol", format!("{:e}", args.tol));
        if let Err(e) = report.write(path) {
            return fail(e);
        }
    }
    if residual <= args.tol {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: residual {residual:.3e} exceeds tolerance {:.3e}", args.tol);
        ExitCode::from(2)
    }
}

fn cmd_sequence(args: &SequenceArgs) -> ExitCode {
    if args.max_level == 0 {
        return fail("--max-level must be at least 1");
    }
    let (game, hash) = match load_game(&args.game) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let opts = SolveOptions { tol: args.tol, ..SolveOptions::default() };
    let mut report = Report::new(&game.name, &hash);
    report.push("max_level", args.max_level);
    let mut bounds = Vec::new();
    for lvl in 1..=args.max_level {
        let relax = match build(&game, &LevelSpec::Full(lvl), "moment") {
            Ok(r) => r,
            Err(e) => return fail(format!("level {lvl}: {e}")),
        };
        let t = Instant::now();
        let sol = match solve(&relax.sdp, &opts) {
            Ok(s) => s,
            Err(e) => return fail(format!("level {lvl}: {e}")),
        };
        let bound = relax.bound_from(&sol);
        let status = format!("{:?}", sol.status).to_lowercase();
        println!("{lvl} {} {} {:.3}", fmt9(bound), status, t.elapsed().as_secs_f64());
        report.push(&format!("level_{lvl}_bound"), fmt9(bound));
        report.push(&format!("level_{lvl}_status"), &status);
        bounds.push(bound);
    }
    if let Some(path) = &args.report {
        if let Err(e) = report.write(path) {
            return fail(e);
        }
    }
    for w in bounds.windows(2) {
        if w[1] > w[0] + 1e-6 {
            eprintln!("error: bound increased from {} to {}", fmt9(w[0]), fmt9(w[1]));
            return ExitCode::from(3);
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    // Usage errors must exit 1 (clap's default is 2).
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            // --help / --version go to stdout with success.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Classical(a) => cmd_classical(a),
        Command::Seesaw(a) => cmd_seesaw(a),
        Command::VerifyCert(a) => cmd_verify_cert(a),
        Command::Sequence(a) => cmd_sequence(a),
    }
}
