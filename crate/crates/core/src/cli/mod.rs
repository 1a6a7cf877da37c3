//! Command-line front end.
//!
//! ```text
//! wildflow [--json | --format text|json|kv] [--config FILE] [--out DIR] <command>
//!
//!   geometry dump      direction set, positivity radius, C_Λ and M
//!   jets build         jet family, identity report and W snapshots
//!   jets verify        jet identity report only
//!   ledger check       feasibility of a given parameter ledger
//!   ledger search      find a feasible ledger for m and a scheme
//!   stage run          one toy-scale iteration step with its identity suite
//!   stage residual     residual of a stored stage pair
//!   noise simulate     sample paths, stopping times, regularity study
//!   report             aggregate the run reports in a directory
//! ```
//!
//! Exit codes: 0 when every check passes, 1 when a check fails (or a
//! computation is refused, e.g. an unresolved grid), 2 for usage and
//! configuration errors, 3 for I/O failures. `WILDFLOW_THREADS` sets the
//! worker thread count.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use self::config::Config;
use self::output::{write_outputs, Envelope, Format, GeometryStamp, Outcome};
use crate::error::Error;
use crate::geometry::DirectionSet;

/// All checks passed.
pub const EXIT_PASS: i32 = 0;
/// A check failed.
pub const EXIT_FAIL: i32 = 1;
/// Bad flags, arguments or configuration.
pub const EXIT_USAGE: i32 = 2;
/// Reading or writing files failed.
pub const EXIT_IO: i32 = 3;

/// Environment variable with the worker thread count.
pub const THREADS_ENV: &str = "WILDFLOW_THREADS";

/// Numerical toolkit for convex-integration constructions on the 3-torus.
#[derive(Debug, Parser)]
#[command(name = "wildflow", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Machine-readable JSON on stdout (same as --format json).
    #[arg(long, global = true)]
    json: bool,
    /// Output format on stdout.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Configuration file (`key = value` with `[section]`s); flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Also write report.json, report.txt, config.cfg and artifacts into DIR.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Direction set and geometric constants.
    #[command(subcommand)]
    Geometry(GeometryCmd),
    /// Intermittent jet families.
    #[command(subcommand)]
    Jets(JetsCmd),
    /// Parameter ledger.
    #[command(subcommand)]
    Ledger(LedgerCmd),
    /// Iteration steps.
    #[command(subcommand)]
    Stage(StageCmd),
    /// Noise sampling.
    #[command(subcommand)]
    Noise(NoiseCmd),
    /// Aggregate the run reports found in a directory and its subdirectories.
    Report {
        /// Directory holding run outputs.
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum GeometryCmd {
    /// Emit Λ, frames, n*, positivity radius, C_Λ and M.
    Dump {
        /// Random samples for the estimate of M.
        #[arg(long)]
        m_samples: Option<String>,
    },
}

#[derive(Debug, Args)]
struct JetArgs {
    /// Frequency λ.
    #[arg(long)]
    lambda: Option<String>,
    /// Concentration r_⊥ (decimal or p/q).
    #[arg(long)]
    rperp: Option<String>,
    /// Concentration r_∥.
    #[arg(long)]
    rpar: Option<String>,
    /// Temporal speed μ.
    #[arg(long)]
    mu: Option<String>,
    /// Grid size.
    #[arg(long)]
    n: Option<String>,
    /// Evaluation time.
    #[arg(long)]
    t: Option<String>,
    /// Smoothness order of the profiles.
    #[arg(long)]
    profile_order: Option<String>,
    /// Shifts: centered or disjoint.
    #[arg(long)]
    shift: Option<String>,
}

impl JetArgs {
    fn flags(&self) -> Config {
        let mut c = Config::new();
        for (k, v) in [
            ("lambda", &self.lambda),
            ("r_perp", &self.rperp),
            ("r_par", &self.rpar),
            ("mu", &self.mu),
            ("n", &self.n),
            ("t", &self.t),
            ("profile_order", &self.profile_order),
            ("shift", &self.shift),
        ] {
            c.set_opt("jets", k, v.as_deref());
        }
        c
    }
}

#[derive(Debug, Subcommand)]
enum JetsCmd {
    /// Build a family, verify it and write W, W^(c) snapshots (with --out).
    Build(JetArgs),
    /// Verify the identities of a family.
    Verify(JetArgs),
}

#[derive(Debug, Args)]
struct LedgerArgs {
    /// additive or multiplicative.
    #[arg(long)]
    mode: Option<String>,
    /// Fractional order m (rational).
    #[arg(long)]
    m: Option<String>,
    /// Noise regularity σ.
    #[arg(long)]
    sigma: Option<String>,
    /// Hölder margin δ (rational or auto).
    #[arg(long)]
    delta: Option<String>,
    /// Threshold for "much less than".
    #[arg(long)]
    epsilon: Option<String>,
    /// Highest stage checked.
    #[arg(long)]
    q_max: Option<String>,
    /// Norm-inflation target K.
    #[arg(long = "K")]
    k: Option<String>,
    /// Time horizon T.
    #[arg(long = "T")]
    t: Option<String>,
}

impl LedgerArgs {
    fn flags(&self) -> Config {
        let mut c = Config::new();
        for (k, v) in [
            ("mode", &self.mode),
            ("m", &self.m),
            ("sigma", &self.sigma),
            ("delta", &self.delta),
            ("epsilon", &self.epsilon),
            ("q_max", &self.q_max),
            ("k_target", &self.k),
            ("t_target", &self.t),
        ] {
            c.set_opt("ledger", k, v.as_deref());
        }
        c
    }
}

#[derive(Debug, Subcommand)]
enum LedgerCmd {
    /// Check every catalogued constraint for a given ledger.
    Check {
        #[command(flatten)]
        common: LedgerArgs,
        /// Base a: a real > 1, k:<int> or k:2^<j>.
        #[arg(long)]
        a: Option<String>,
        /// Tower base b.
        #[arg(long)]
        b: Option<String>,
        /// Decay rate β (rational).
        #[arg(long)]
        beta: Option<String>,
        /// Stopping level L.
        #[arg(long = "L")]
        big_l: Option<String>,
        /// Smallness constant c_R.
        #[arg(long)]
        cr: Option<String>,
    },
    /// Search for a ledger passing every constraint.
    Search {
        #[command(flatten)]
        common: LedgerArgs,
        /// c_R, or auto.
        #[arg(long)]
        cr: Option<String>,
        /// Cap on ledger evaluations.
        #[arg(long)]
        max_iterations: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum StageCmd {
    /// Run one iteration step from the base pair.
    Run {
        /// additive or multiplicative.
        #[arg(long)]
        mode: Option<String>,
        /// Index of the starting stage (only 0 is supported).
        #[arg(long)]
        q: Option<String>,
        /// Use the toy scales (the default).
        #[arg(long)]
        toy: bool,
        /// Grid size.
        #[arg(long)]
        n: Option<String>,
        /// Stencil centre t₀.
        #[arg(long)]
        t0: Option<String>,
        /// Stencil spacing h.
        #[arg(long)]
        h: Option<String>,
        /// Drive with sampled noise instead of z ≡ 0 / Υ ≡ 1.
        #[arg(long)]
        noise: bool,
        /// Noise seed.
        #[arg(long)]
        seed: Option<String>,
        /// Run even when the grid does not resolve the jets.
        #[arg(long)]
        allow_underresolved: bool,
    },
    /// Residual of a stage pair written by `stage run --out`.
    Residual {
        /// Directory holding pair.cfg and the snapshots.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum NoiseCmd {
    /// Sample paths and report per-path and aggregate statistics.
    Simulate {
        /// additive or multiplicative.
        #[arg(long)]
        mode: Option<String>,
        /// Fractional order m.
        #[arg(long)]
        m: Option<String>,
        /// Spectral decay s₀ of GG*.
        #[arg(long)]
        s0: Option<String>,
        /// Regularity index σ.
        #[arg(long)]
        sigma: Option<String>,
        /// Time step.
        #[arg(long)]
        dt: Option<String>,
        /// Final time.
        #[arg(long = "T")]
        t_end: Option<String>,
        /// Seed.
        #[arg(long)]
        seed: Option<String>,
        /// Number of paths.
        #[arg(long)]
        samples: Option<String>,
        /// Spectral truncation.
        #[arg(long)]
        n: Option<String>,
        /// Stopping level L (enables stopping times), or none.
        #[arg(long = "L")]
        big_l: Option<String>,
        /// Mollification scale for the Υ check.
        #[arg(long)]
        l: Option<String>,
        /// Also run the regularity study across truncations.
        #[arg(long)]
        regularity: bool,
        /// Truncations for the regularity study, e.g. 32,48,64.
        #[arg(long)]
        truncations: Option<String>,
    },
}

/// Configure the global thread pool from `WILDFLOW_THREADS`.
fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?;
    // A pool may already exist when called twice in one process (tests).
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Snapshot(_) => EXIT_IO,
        Error::Config { .. } | Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_FAIL,
    }
}

fn execute(cli: &Cli, set: &DirectionSet, file: Option<&Config>) -> crate::Result<(String, Config, Outcome)> {
    let keep = cli.out.is_some();
    let no_file = |name: &str| -> crate::Result<()> {
        if file.is_some() {
            Err(Error::InvalidArgument(format!("{name} takes no --config")))
        } else {
            Ok(())
        }
    };
    let (name, (cfg, out)) = match &cli.command {
        Command::Geometry(GeometryCmd::Dump { m_samples }) => {
            let mut f = Config::new();
            f.set_opt("geometry", "m_samples", m_samples.as_deref());
            ("geometry dump", commands::geometry_dump(set, file, &f)?)
        }
        Command::Jets(JetsCmd::Build(a)) => ("jets build", commands::jets(set, file, &a.flags(), keep)?),
        Command::Jets(JetsCmd::Verify(a)) => ("jets verify", commands::jets(set, file, &a.flags(), false)?),
        Command::Ledger(LedgerCmd::Check { common, a, b, beta, big_l, cr }) => {
            let mut f = common.flags();
            for (k, v) in [("a", a), ("b", b), ("beta", beta), ("big_l", big_l), ("c_r", cr)] {
                f.set_opt("ledger", k, v.as_deref());
            }
            ("ledger check", commands::ledger_check(file, &f)?)
        }
        Command::Ledger(LedgerCmd::Search { common, cr, max_iterations }) => {
            let mut f = common.flags();
            f.set_opt("ledger", "c_r", cr.as_deref());
            f.set_opt("ledger", "max_iterations", max_iterations.as_deref());
            ("ledger search", commands::ledger_search(file, &f)?)
        }
        Command::Stage(StageCmd::Run { mode, q, toy, n, t0, h, noise, seed, allow_underresolved }) => {
            let mut f = Config::new();
            f.set_opt("stage", "mode", mode.as_deref());
            f.set_opt("stage", "q", q.as_deref());
            f.set_opt("grid", "n", n.as_deref());
            f.set_opt("stage", "t0", t0.as_deref());
            f.set_opt("stage", "h", h.as_deref());
            f.set_opt("noise", "seed", seed.as_deref());
            if *toy {
                f.set("scales", "kind", "toy");
            }
            if *noise {
                f.set("noise", "enabled", true);
            }
            if *allow_underresolved {
                f.set("stage", "allow_underresolved", true);
            }
            ("stage run", commands::stage_run(set, file, &f, keep)?)
        }
        Command::Stage(StageCmd::Residual { input }) => {
            no_file("stage residual")?;
            ("stage residual", commands::stage_residual(input, &Config::new())?)
        }
        Command::Noise(NoiseCmd::Simulate {
            mode,
            m,
            s0,
            sigma,
            dt,
            t_end,
            seed,
            samples,
            n,
            big_l,
            l,
            regularity,
            truncations,
        }) => {
            let mut f = Config::new();
            for (k, v) in [
                ("mode", mode),
                ("m", m),
                ("s0", s0),
                ("sigma", sigma),
                ("dt", dt),
                ("t_end", t_end),
                ("seed", seed),
                ("samples", samples),
                ("n", n),
                ("big_l", big_l),
                ("l", l),
                ("truncations", truncations),
            ] {
                f.set_opt("noise", k, v.as_deref());
            }
            if *regularity {
                f.set("noise", "regularity", true);
            }
            ("noise simulate", commands::noise_simulate(file, &f)?)
        }
        Command::Report { dir } => {
            no_file("report")?;
            ("report", commands::report(dir, &Config::new())?)
        }
    };
    Ok((name.to_string(), cfg, out))
}

/// Run the program on `argv`, printing to stdout/stderr, and return the
/// exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    match run_parsed(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Resolution { .. } = e {
                eprintln!("hint: pass --allow-underresolved to run anyway; resolution-dependent checks will then fail");
            }
            exit_code(&e)
        }
    }
}

fn run_parsed(cli: &Cli) -> crate::Result<i32> {
    let format = if cli.json { Format::Json } else { cli.format.unwrap_or(Format::Text) };
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?;
            Some(Config::parse(&text)?)
        }
        None => None,
    };
    let set = DirectionSet::build()?;
    let (name, cfg, outcome) = execute(cli, &set, file.as_ref())?;
    let env = Envelope::new(&name, &cfg, GeometryStamp::of(&set), &outcome);
    let text = env.text(&outcome.text, &cfg);
    if let Some(dir) = &cli.out {
        write_outputs(dir, &env, &text, &cfg, &outcome.artifacts)?;
    }
    let rendered = match format {
        Format::Text => text,
        Format::Json => env.json(),
        Format::Kv => env.kv(),
    };
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(rendered.as_bytes())?;
    stdout.flush()?;
    Ok(if outcome.pass { EXIT_PASS } else { EXIT_FAIL })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes_are_distinct() {
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
        assert_eq!(exit_code(&Error::Config { line: 1, msg: String::new() }), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Resolution { what: String::new(), min_n: 1 }), EXIT_FAIL);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(run(["wildflow", "geometry", "dump", "--bogus"]), EXIT_USAGE);
    }

    #[test]
    fn stage_residual_round_trip() {
        use crate::ledger::NoiseMode;
        for mode in [NoiseMode::Additive, NoiseMode::Multiplicative] {
            let dir = tempfile::tempdir().unwrap();
            for a in commands::base_pair_artifacts(16, mode) {
                std::fs::write(dir.path().join(&a.name), &a.bytes).unwrap();
            }
            let (_, out) = commands::stage_residual(dir.path(), &Config::new()).unwrap();
            assert!(out.pass, "{}", out.text);
        }
    }
}
