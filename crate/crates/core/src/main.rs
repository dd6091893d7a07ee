use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rfimdi::cli::verify::{verify, VerifyOptions};
use rfimdi::cli::{heatmap, optimize_intensities, parse_scenario, run_scenario, write_csv, Mode, RunRecord, Scenario};

const EXIT_USAGE: u8 = 1;
const EXIT_SCENARIO: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Sps,
    Wcs,
}

#[derive(Debug, Parser)]
#[command(name = "rfimdi", version, about = "Key rates for reference-frame-independent MDI-QKD with flawed sources")]
struct Cli {
    /// Scenario file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; defaults to the scenario's `output` key, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the scenario's source mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the key rate along the scenario's sweep axis.
    Sweep,
    /// Evaluate the key rate over the scenario's two heatmap axes.
    Heatmap,
    /// Optimize the decoy intensities at the scenario's parameters.
    Optimize,
    /// Run the oracle self-check.
    Verify {
        /// Negative control: scramble the reconstructed transfer rates.
        #[arg(long, hide = true)]
        corrupt_q_order: bool,
    },
}

enum Failure {
    Usage(String),
    Scenario(String),
    Verify,
}

fn load(cli: &Cli) -> Result<Scenario, Failure> {
    let mut sc = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            parse_scenario(&text).map_err(|e| Failure::Scenario(format!("{}: {e}", path.display())))?
        }
        None => Scenario::default(),
    };
    if let Some(m) = cli.mode {
        sc.mode = match m {
            ModeArg::Sps => Mode::Sps,
            ModeArg::Wcs => Mode::Wcs,
        };
    }
    if cli.out.is_some() {
        sc.output = cli.out.clone();
    }
    sc.validate().map_err(|e| Failure::Scenario(e.to_string()))?;
    Ok(sc)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn emit(sc: &Scenario, records: &[RunRecord]) -> Result<(), Failure> {
    let mut out = sink(sc.output.as_deref())?;
    write_csv(records, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Usage(format!("write failed: {e}")))?;
    let failed = records.iter().filter(|r| r.result.is_err()).count();
    if failed > 0 {
        return Err(Failure::Scenario(format!("{failed} of {} points failed", records.len())));
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--jobs: {e}")))?;
    }
    match &cli.command {
        Command::Sweep => {
            let sc = load(cli)?;
            let records = run_scenario(&sc).map_err(|e| Failure::Scenario(e.to_string()))?;
            emit(&sc, &records)
        }
        Command::Heatmap => {
            let sc = load(cli)?;
            let records = heatmap(&sc).map_err(|e| Failure::Scenario(e.to_string()))?;
            emit(&sc, &records)
        }
        Command::Optimize => {
            let sc = load(cli)?;
            let opt = optimize_intensities(&sc).map_err(|e| Failure::Scenario(e.to_string()))?;
            let mut out = sink(sc.output.as_deref())?;
            writeln!(out, "mu,nu,r_raw,positive_key")
                .and_then(|_| writeln!(out, "{:.11e},{:.11e},{:.11e},{}", opt.mu, opt.nu, opt.rate, opt.positive))
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Usage(format!("write failed: {e}")))?;
            if !opt.positive {
                eprintln!("warning: no intensity pair gives a positive key rate");
            }
            Ok(())
        }
        Command::Verify { corrupt_q_order } => {
            let report = verify(VerifyOptions { corrupt_q_order: *corrupt_q_order });
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Verify)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Scenario(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_SCENARIO)
        }
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY),
    }
}
