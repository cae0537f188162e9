use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ifgame_core::epsilon::EpsilonRepresentation;
use ifgame_core::scenarios::{builtin, ScenarioSpec, BUILTIN_NAMES};
use ifgame_service::analysis::{analyze, analyze_log, Analysis};
use ifgame_service::config::{Mode, ScenarioRef, SessionConfig, LOG_DIR_ENV};
use ifgame_service::log::{MemorySink, ParsedLog};
use ifgame_service::replay::replay;
use ifgame_service::report::write_report;
use ifgame_service::session::{header_for, run_session, run_synthetic, shared};

#[derive(Debug, Parser)]
#[command(name = "ifgame", version, about = "Interactive games: simulate, play, replay and analyze sessions")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Debug, Args, Clone)]
struct SessionArgs {
    /// Built-in scenario name or path to a scenario JSON file.
    #[arg(long)]
    scenario: Option<String>,
    /// Session config JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = LOG_DIR_ENV)]
    log_dir: Option<PathBuf>,
    #[arg(long)]
    session_id: Option<String>,
    /// Set limit for perception-game scenarios.
    #[arg(long)]
    sets: Option<usize>,
    /// Simulated seconds for plain scenarios.
    #[arg(long)]
    horizon: Option<f64>,
    /// Ticks per second; must match the scenario step.
    #[arg(long)]
    tick_rate: Option<f64>,
}

impl SessionArgs {
    fn config(&self, mode: Option<Mode>) -> anyhow::Result<SessionConfig> {
        let mut config = match (&self.config, &self.scenario) {
            (Some(path), _) => SessionConfig::from_json_file(path).with_context(|| format!("reading {}", path.display()))?,
            (None, Some(_)) => SessionConfig::new(ScenarioRef::Named(String::new())),
            (None, None) => bail!("pass --scenario or --config"),
        };
        if let Some(name) = &self.scenario {
            config.scenario = ScenarioRef::Named(name.clone());
        }
        if let Some(mode) = mode {
            config.mode = mode;
        }
        config.seed = self.seed.or(config.seed);
        config.log_dir = self.log_dir.clone().or(config.log_dir);
        config.session_id = self.session_id.clone().or(config.session_id);
        config.sets = self.sets.or(config.sets);
        config.horizon = self.horizon.or(config.horizon);
        config.tick_rate = self.tick_rate.or(config.tick_rate);
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Run a synthetic session headless and write its log.
    Simulate {
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Estimate ε along a logged session and mine relations among its components.
    Estimate {
        log: PathBuf,
        /// JSON array of replacement representations, one per player.
        #[arg(long)]
        representations: Option<PathBuf>,
    },
    /// Print the transcript and verbalizability score of a log or a fresh synthetic run.
    Verbalize {
        log: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Serve live sessions at ws://HOST:PORT/session/{id}.
    Play {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "live")]
        mode: Mode,
        /// Run ticks as fast as possible instead of at wall-clock pace.
        #[arg(long)]
        no_realtime: bool,
    },
    /// Re-run a log and check that every tick line is reproduced exactly.
    Replay {
        log: PathBuf,
        /// Scenario file whose hash must match the log header.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        representations: Option<PathBuf>,
    },
    /// Write a per-tick CSV and a JSON summary for a log.
    Report {
        log: PathBuf,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
    },
    /// Print a built-in scenario as JSON, or list them.
    Scenario {
        name: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_representations(path: &Path) -> anyhow::Result<Vec<EpsilonRepresentation>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).context("parsing representations")
}

fn print_analysis(analysis: &Analysis) {
    println!("intervals: {}", analysis.partition.intervals());
    for u in &analysis.transcript.utterances {
        println!("  [{}] t={:.3} {} omega={:?} v={:?}", u.index, u.t, u.label, u.omega, u.v);
    }
    match analysis.score {
        Some(s) => println!("score: {s:.6}"),
        None => println!("score: n/a (too few intervals to fit)"),
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Verb::Simulate { session } => {
            let config = session.config(Some(Mode::Synthetic))?;
            let (path, outcome) = run_synthetic(&config)?;
            println!("log: {}", path.display());
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
        }
        Verb::Estimate { log, representations } => {
            let parsed = ParsedLog::read(&log)?;
            let reps = representations.as_deref().map(read_representations).transpose()?;
            let analysis = analyze_log(&parsed, reps.as_deref())?;
            let present = analysis.epsilon.present().count();
            println!("ticks: {} (estimated {present})", analysis.epsilon.len());
            if let Some((_, last)) = analysis.epsilon.present().last() {
                println!("final epsilon: {last:?}");
            }
            println!("partition ticks: {:?}", analysis.partition.ticks);
            if analysis.relations.is_empty() {
                println!("relations: none");
            }
            for r in &analysis.relations {
                let terms: Vec<String> =
                    r.coefficients.iter().zip(&r.terms).map(|(c, t)| format!("{c:+.6}*{t}")).collect();
                println!("relation: {} = 0 (rms {:.3e})", terms.join(" "), r.residual_rms);
            }
        }
        Verb::Verbalize { log, session } => {
            let analysis = match log {
                Some(path) => analyze_log(&ParsedLog::read(&path)?, None)?,
                None => {
                    let config = session.config(Some(Mode::Synthetic))?;
                    let spec: ScenarioSpec = config.scenario()?;
                    let header = header_for(&config, &spec);
                    let outcome =
                        run_session(&header, &mut ifgame_core::game::NominalSource, shared(MemorySink::default()))?;
                    let spans = outcome.record.as_ref().map(ifgame_service::analysis::set_spans);
                    analyze(&spec, &outcome.trajectory, spans.as_deref(), &spec.representations)?
                }
            };
            print_analysis(&analysis);
        }
        Verb::Play { session, port, host, mode, no_realtime } => {
            if mode == Mode::Synthetic {
                bail!("play needs --mode live or --mode multi-user");
            }
            let mut config = session.config(Some(mode))?;
            config.realtime = !no_realtime;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                tracing::info!("listening on ws://{}/session/{{id}}", listener.local_addr()?);
                ifgame_service::server::serve(listener, config).await?;
                anyhow::Ok(())
            })?;
        }
        Verb::Replay { log, scenario, representations } => {
            let parsed = ParsedLog::read(&log)?;
            let spec = scenario
                .map(|p| -> anyhow::Result<ScenarioSpec> { Ok(ScenarioSpec::from_json(&std::fs::read_to_string(p)?)?) })
                .transpose()?;
            let reps = representations.as_deref().map(read_representations).transpose()?;
            let result = replay(&parsed, spec.as_ref(), reps.as_deref())?;
            if let Some(tick) = result.partial_last_tick {
                println!("partial log: compared through tick {tick}");
            }
            match result.mismatch_tick {
                Some(tick) => println!("mismatch at tick {tick}"),
                None if result.identical => println!("identical: {} tick lines", parsed.tick_text.len()),
                None => println!("tick count differs: logged {}", parsed.tick_text.len()),
            }
            if let Some(same) = result.summary_match {
                println!("summary: {}", if same { "matches" } else { "differs" });
            }
            if let Some(analysis) = &result.analysis {
                print_analysis(analysis);
            }
            if !result.identical || result.summary_match == Some(false) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Verb::Report { log, out } => {
            let files = write_report(&ParsedLog::read(&log)?, &out)?;
            println!("rows: {}", files.rows);
            println!("csv: {}", files.csv.display());
            println!("summary: {}", files.summary.display());
        }
        Verb::Scenario { name, seed } => match name {
            Some(name) => println!("{}", builtin(&name, seed)?.to_json()),
            None => BUILTIN_NAMES.iter().for_each(|n| println!("{n}")),
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
