use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use eigenlab::experiment::{
    csv_path, run_streaming, verify, write_report, write_summary, Command, CsvSink, ExperimentConfig, Format, Report,
};

#[derive(Parser)]
#[command(name = "eigenlab", version, about = "Scans over Laplace eigenfunctions on the torus and sphere")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// W1 distance between the positive and negative parts.
    ScanW1(Opts),
    /// Mass retained outside nodal tubes.
    ScanTubeMass(Opts),
    /// Doubling exponents and good-ball fractions.
    ScanDoubling(Opts),
    /// Product of W1 and nodal length.
    ScanUncertainty(Opts),
    /// Run the invariant suite; exits 1 if a hard check fails.
    Verify(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Opts {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; rows go to stdout when omitted.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads, one instance each.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
}

impl Opts {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(f) = self.format {
            cfg.output.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
        if let Some(d) = &self.out {
            cfg.output.dir = Some(d.clone());
        }
        Ok(cfg)
    }

    fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
            .max(1)
    }
}

fn scan(cmd: Command, opts: &Opts) -> Result<()> {
    let cfg = opts.load()?;
    let jobs = opts.jobs();
    let mut rows = Vec::new();
    match (cfg.output.format, cfg.output.dir.clone()) {
        (Format::Csv, dir) => {
            let out: Box<dyn Write> = match &dir {
                Some(d) => {
                    std::fs::create_dir_all(d)?;
                    Box::new(File::create(csv_path(d, cmd))?)
                }
                None => Box::new(io::stdout().lock()),
            };
            let mut sink = CsvSink::new(out, cmd)?;
            run_streaming(&cfg, cmd, jobs, &mut |r| {
                rows.push(r.clone());
                sink.push(r)
            })?;
            let report = Report::new(cmd, &cfg, rows);
            if let Some(d) = dir {
                write_summary(&report, &d)?;
            }
            summarize(&report);
        }
        (Format::Json, dir) => {
            run_streaming(&cfg, cmd, jobs, &mut |r| {
                rows.push(r.clone());
                Ok(())
            })?;
            let report = Report::new(cmd, &cfg, rows);
            match dir {
                Some(d) => {
                    write_report(&report, &d, Format::Json)?;
                }
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            summarize(&report);
        }
    }
    Ok(())
}

fn summarize(report: &Report) {
    eprintln!("{}: {} rows, {} errors, input {}", report.command, report.rows.len(), report.errors, &report.input_hash[..12]);
    for (name, fit) in &report.fits {
        eprintln!("  {name}: slope {:.4}, r2 {:.4}", fit.slope, fit.r2);
    }
}

fn run_verify(opts: &Opts) -> Result<bool> {
    let cfg = opts.load()?;
    let summary = verify(&cfg)?;
    for c in &summary.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let kind = if c.hard { "hard" } else { "soft" };
        println!("{status} [{kind}] {}: {}", c.name, c.detail);
    }
    if let Some(d) = &cfg.output.dir {
        std::fs::create_dir_all(d)?;
        std::fs::write(d.join("verify.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(summary.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::ScanW1(o) => scan(Command::ScanW1, o).map(|_| true),
        Cmd::ScanTubeMass(o) => scan(Command::ScanTubeMass, o).map(|_| true),
        Cmd::ScanDoubling(o) => scan(Command::ScanDoubling, o).map(|_| true),
        Cmd::ScanUncertainty(o) => scan(Command::ScanUncertainty, o).map(|_| true),
        Cmd::Verify(o) => run_verify(o),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
