//! The `skini` command line. Exit codes: 0 success, 1 domain error (bad
//! score, causality error), 2 I/O or usage error.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::scheduler::{parse_csv, render_smf};
use crate::score::{Score, ScoreError};
use crate::server::{serve, ServeOptions};
use crate::simulator::{run, SimulatorConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "skini", version, about = "Audience-driven structured music")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a score and print its counts and findings.
    Check { score: PathBuf },
    /// Run a seeded simulated audience against a score.
    Play {
        score: PathBuf,
        #[command(flatten)]
        audience: AudienceArgs,
        /// Event log (CSV). Printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Statistics (JSON).
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Standard MIDI File.
        #[arg(long)]
        midi: Option<PathBuf>,
    },
    /// Serve the audience client and run the performance live.
    Serve {
        score: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        host: IpAddr,
        /// Add an in-process simulated audience.
        #[arg(long)]
        sim: bool,
        #[command(flatten)]
        audience: AudienceArgs,
    },
    /// Turn an event log back into a Standard MIDI File.
    Render {
        events: PathBuf,
        #[arg(long)]
        midi: PathBuf,
        /// The score the events were played from.
        #[arg(long)]
        score: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct AudienceArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub audience: u32,
    /// Seconds.
    #[arg(long, default_value_t = 300.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 2.0)]
    pub min_response: f64,
    #[arg(long, default_value_t = 10.0)]
    pub max_response: f64,
    #[arg(long, default_value_t = 30.0)]
    pub max_wait: f64,
}

impl AudienceArgs {
    pub fn config(&self) -> SimulatorConfig {
        SimulatorConfig {
            audience_size: self.audience,
            min_response_s: self.min_response,
            max_response_s: self.max_response,
            max_wait_s: self.max_wait,
            seed: self.seed,
            run_length_s: self.duration,
        }
    }
}

/// An error with its exit code.
struct Failure(i32, String);

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first) and runs the command.
pub fn main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_IO;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match cli.command {
        Command::Check { score } => check(&score, out, err),
        Command::Play {
            score,
            audience,
            out: csv,
            stats,
            midi,
        } => play(&score, &audience.config(), csv, stats, midi, out, err),
        Command::Serve {
            score,
            port,
            host,
            sim,
            audience,
        } => serve_cmd(&score, SocketAddr::new(host, port), sim.then(|| audience.config()), err),
        Command::Render {
            events,
            midi,
            score,
        } => render(&events, &midi, &score, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn load(path: &Path) -> Result<Arc<Score>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Score::from_json(&text)
        .map(Arc::new)
        .map_err(|e| Failure(EXIT_DOMAIN, format!("{}: {e}", path.display())))
}

fn check(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    match Score::from_json(&text) {
        Ok(score) => {
            let counts = score.counts();
            let _ = writeln!(out, "{counts}");
            for (inst, n) in &counts.per_instrument {
                let _ = writeln!(out, "  {inst}: {n}");
            }
            for w in &score.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
            Ok(())
        }
        Err(ScoreError::Validation(findings)) => {
            for f in &findings {
                let tag = if f.is_warning() { "warning" } else { "error" };
                let _ = writeln!(err, "{tag}: {f}");
            }
            let n = findings.iter().filter(|f| !f.is_warning()).count();
            Err(Failure(EXIT_DOMAIN, format!("{}: {n} error(s)", path.display())))
        }
        Err(e) => Err(Failure(EXIT_DOMAIN, format!("{}: {e}", path.display()))),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn play(
    path: &Path,
    config: &SimulatorConfig,
    csv: Option<PathBuf>,
    stats: Option<PathBuf>,
    midi: Option<PathBuf>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    config
        .validate()
        .map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    let score = load(path)?;
    let result = run(score.clone(), config).map_err(|e| Failure(EXIT_DOMAIN, e.to_string()))?;
    match &csv {
        Some(p) => write_file(p, result.csv().as_bytes())?,
        None => {
            let _ = out.write_all(result.csv().as_bytes());
        }
    }
    if let Some(p) = &stats {
        write_file(p, result.stats_json().as_bytes())?;
    }
    if let Some(p) = &midi {
        let smf = render_smf(&result.events, &score).map_err(|e| Failure(EXIT_DOMAIN, e.to_string()))?;
        write_file(p, &smf)?;
    }
    let s = &result.stats;
    let _ = writeln!(
        err,
        "{} admissions out of {} attempts, mean delay {:.3} s, {} at {:.3} s",
        s.admissions,
        s.attempts,
        s.mean_delay_s,
        if s.terminated { "score ended" } else { "stopped" },
        s.end_time_s
    );
    Ok(())
}

fn render(events: &Path, midi: &Path, score: &Path, out: &mut dyn Write) -> Outcome {
    let text = std::fs::read_to_string(events).map_err(|e| io_err(events, e))?;
    let parsed = parse_csv(&text).map_err(|e| Failure(EXIT_DOMAIN, format!("{}: {e}", events.display())))?;
    let score = load(score)?;
    let smf = render_smf(&parsed, &score).map_err(|e| Failure(EXIT_DOMAIN, e.to_string()))?;
    write_file(midi, &smf)?;
    let _ = writeln!(out, "{} events, {} tracks", parsed.len(), score.instruments().len());
    Ok(())
}

fn serve_cmd(
    path: &Path,
    addr: SocketAddr,
    sim: Option<SimulatorConfig>,
    err: &mut dyn Write,
) -> Outcome {
    let score = load(path)?;
    if let Some(c) = &sim {
        c.validate().map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(EXIT_IO, e.to_string()))?;
    rt.block_on(async {
        let mut options = ServeOptions::new(addr);
        options.sim = sim;
        let handle = serve(score, options).await.map_err(|e| match e {
            crate::server::ServeError::Bind { .. } => Failure(EXIT_IO, e.to_string()),
            e => Failure(EXIT_DOMAIN, e.to_string()),
        })?;
        let _ = writeln!(err, "listening on http://{}", handle.addr);
        let _ = tokio::signal::ctrl_c().await;
        handle.shutdown().await;
        Ok(())
    })
}
