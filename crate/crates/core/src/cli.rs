//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::cycle_series::{classify_family, classify_finite, return_series, DEFAULT_ENUMERATION_CAP};
use crate::equilibrium::parry_measure;
use crate::error::{Error, Result};
use crate::families::FamilyDescriptor;
use crate::formats::{self, SpecInput};
use crate::graph::VertexId;
use crate::sequences::{
    evaluate_sequence, mix_sequences, regular_scan, run_irregular_search, Schedule, SubgraphSpec,
    DEFAULT_SEARCH_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Classify,
    Series,
    Equilibrium,
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Regular,
    Irregular,
    Mixed,
}

/// Recurrence classes, first-return series, equilibrium measures and
/// subgraph sequences of loaded graphs.
#[derive(Debug, Clone, Parser)]
#[command(name = "thermograph", version)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Graph or family JSON file.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Number of coefficients (series) or of G_n records (regular, mixed).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_max: Option<u64>,
    /// Steps of the irregular search.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_max: u64,
    /// Base vertex.
    #[arg(long)]
    pub v: Option<u64>,
    /// Cap on DFS nodes expanded by any enumeration.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub cap: u64,
    #[arg(long, value_enum, default_value = "regular")]
    pub mode: Mode,
    /// First index of the irregular search.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub n1: u64,
    /// Candidates per step of the irregular search.
    #[arg(long, default_value_t = DEFAULT_SEARCH_CAP as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub search_cap: u64,
}

/// Process exit status for an error: 2 for bad input, 3 when the analysis is
/// refused, 4 when a resource cap is hit.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Inconclusive(_)
        | Error::NotUplg(_)
        | Error::NotConnected
        | Error::NoBoundedJumps
        | Error::TooFewRecords { .. }
        | Error::TruncatedSeries
        | Error::BracketFailed(_) => 3,
        Error::SearchExhausted { .. }
        | Error::CapExceeded { .. }
        | Error::NoConvergence { .. }
        | Error::CalibrationFailed(_) => 4,
        _ => 2,
    }
}

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

fn render_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn require_family(input: SpecInput) -> Result<FamilyDescriptor> {
    match input {
        SpecInput::Family(f) => Ok(f),
        SpecInput::Graph(_) => Err(Error::Parse("this command needs a family file".into())),
    }
}

/// Output text, plus an error to report after the output was written.
type Rendered = (String, Option<Error>);

fn classify(cfg: &RunConfig, input: SpecInput, format: Format) -> Result<Rendered> {
    let c = match input {
        SpecInput::Graph(g) => {
            let v = match cfg.v {
                Some(v) => VertexId::new(v)?,
                None => g.vertices()[0],
            };
            classify_finite(&g, v)?
        }
        SpecInput::Family(f) => classify_family(&f)?,
    };
    Ok(match format {
        Format::Json => (render_json(&formats::classification_json(&c)), None),
        Format::Csv => (formats::classification_csv(&c), None),
    })
}

fn series(cfg: &RunConfig, input: SpecInput, format: Format) -> Result<Rendered> {
    let n = cfg.n_max.unwrap_or(10) as usize;
    let s = match input {
        SpecInput::Graph(g) => {
            let v = match cfg.v {
                Some(v) => VertexId::new(v)?,
                None => g.vertices()[0],
            };
            return_series(&g, v, n)?
        }
        SpecInput::Family(f) => {
            if let Some(v) = cfg.v.filter(|&v| v != 1) {
                return Err(Error::ParameterOutOfRange(format!(
                    "family series are rooted at vertex 1, not {v}"
                )));
            }
            f.return_series(n)?
        }
    };
    Ok(match format {
        Format::Csv => (formats::series_csv(&s), None),
        Format::Json => (render_json(&formats::series_json(&s)), None),
    })
}

fn equilibrium(input: SpecInput, format: Format) -> Result<Rendered> {
    let g = match input {
        SpecInput::Graph(g) => g,
        SpecInput::Family(_) => return Err(Error::Parse("equilibrium needs a graph file".into())),
    };
    let mu = parry_measure(&g)?;
    Ok(match format {
        Format::Json => (render_json(&formats::measure_json(&mu)), None),
        Format::Csv => (formats::measure_csv(&mu), None),
    })
}

fn sequence(cfg: &RunConfig, input: SpecInput, format: Format) -> Result<Rendered> {
    let f = require_family(input)?;
    let cap = cfg.cap as usize;
    let n_max = cfg.n_max.unwrap_or(200) as usize;
    let render = |report, indices: Option<&[usize]>, exhausted| match format {
        Format::Csv => formats::report_csv(report),
        Format::Json => render_json(&formats::report_json(report, indices, exhausted)),
    };
    match cfg.mode {
        Mode::Regular => {
            let scan = regular_scan(&f, n_max)?;
            Ok((render(&scan.report, None, None), None))
        }
        Mode::Irregular => {
            let out = run_irregular_search(&f, cfg.k_max as usize, cfg.n1 as usize, cfg.search_cap as usize)?;
            let text = render(&out.report, Some(&out.indices), out.exhausted.as_ref());
            let err = out.exhausted.map(|e| Error::SearchExhausted {
                k: e.k,
                n: e.n,
                best_m: e.best_m,
                best_dphi: e.best_dphi,
            });
            Ok((text, err))
        }
        Mode::Mixed => {
            let out = run_irregular_search(&f, cfg.k_max as usize, cfg.n1 as usize, cfg.search_cap as usize)?;
            let regular: Vec<SubgraphSpec> = (1..=n_max).map(SubgraphSpec::Gn).collect();
            let irregular: Vec<SubgraphSpec> = out
                .indices
                .windows(2)
                .map(|w| SubgraphSpec::Gnm(w[0], w[1]))
                .collect();
            let mixed = mix_sequences(&f, &regular, &irregular, Schedule::default(), cap)?;
            let report = evaluate_sequence(&f, &mixed, true, cap)?;
            Ok((render(&report, Some(&out.indices), out.exhausted.as_ref()), None))
        }
    }
}

/// Execute one command. Returns the process exit status.
pub fn run(cfg: &RunConfig) -> i32 {
    match execute(cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("thermograph: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cfg: &RunConfig) -> Result<()> {
    let text = std::fs::read_to_string(&cfg.spec)
        .map_err(|e| Error::Parse(format!("{}: {e}", cfg.spec.display())))?;
    let input = formats::parse_spec(&text)?;
    let default_format = match cfg.command {
        Command::Classify | Command::Equilibrium => Format::Json,
        Command::Series | Command::Sequence => Format::Csv,
    };
    let format = cfg.format.unwrap_or(default_format);
    let (output, late_error) = match cfg.command {
        Command::Classify => classify(cfg, input, format)?,
        Command::Series => series(cfg, input, format)?,
        Command::Equilibrium => equilibrium(input, format)?,
        Command::Sequence => sequence(cfg, input, format)?,
    };
    match &cfg.out {
        Some(path) => write_atomic(path, &output)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(output.as_bytes())?;
            stdout.flush()?;
        }
    }
    match late_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Size the global worker pool from `THERMOGRAPH_THREADS` when it is set.
pub fn configure_threads() {
    if let Some(n) = std::env::var("THERMOGRAPH_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
