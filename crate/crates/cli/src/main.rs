use bqml_core::channel::{detection_probability_oracle, AttackStrategy, BasisPolicy};
use bqml_core::quantum::Outcome;
use bqml_sim::{parse_config, run_experiment, CliError};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bqml-sim",
    version,
    about = "Seeded simulator of a blind delegated swap-test classification protocol"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the session seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the repetition count from the config file.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Report directory (default: bqml-report).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write transcript.jsonl with every classical message.
        #[arg(long)]
        emit_transcript: bool,
    },
    /// Print the exact eavesdrop-detection probability for an attack.
    Oracle {
        /// One of: intercept_resend, intercept_resend_fixed_computational,
        /// intercept_resend_fixed_diagonal, fake_photon, fake_photon_h,
        /// fake_photon_v, fake_photon_plus, fake_photon_minus.
        #[arg(long)]
        attack: String,
    },
    /// Parse and validate a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn named_attack(name: &str) -> Result<AttackStrategy, CliError> {
    let attack = match name {
        "intercept_resend" => AttackStrategy::InterceptResend {
            basis_policy: BasisPolicy::RandomUniform,
        },
        "intercept_resend_fixed_computational" => AttackStrategy::InterceptResend {
            basis_policy: BasisPolicy::FixedComputational,
        },
        "intercept_resend_fixed_diagonal" => AttackStrategy::InterceptResend {
            basis_policy: BasisPolicy::FixedDiagonal,
        },
        "fake_photon" | "fake_photon_h" => AttackStrategy::FakePhoton {
            replacement: Outcome::H,
        },
        "fake_photon_v" => AttackStrategy::FakePhoton {
            replacement: Outcome::V,
        },
        "fake_photon_plus" => AttackStrategy::FakePhoton {
            replacement: Outcome::Plus,
        },
        "fake_photon_minus" => AttackStrategy::FakePhoton {
            replacement: Outcome::Minus,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown attack {other:?}; see `bqml-sim oracle --help` for the supported names"
            )))
        }
    };
    Ok(attack)
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            repetitions,
            output,
            emit_transcript,
        } => {
            let mut experiment = parse_config(&config)?;
            if let Some(seed) = seed {
                experiment.session.seed = seed;
            }
            if let Some(repetitions) = repetitions {
                if repetitions == 0 {
                    return Err(CliError::Config("repetitions must be positive".into()));
                }
                experiment.repetitions = repetitions;
            }
            if let Some(output) = output {
                experiment.output_dir = output;
            }
            experiment.emit_transcript = emit_transcript;

            let report = run_experiment(&experiment)?;
            let summary = &report.summary;
            println!(
                "completed {} repetition(s), {} aborted; reports in {}",
                summary.repetitions,
                summary.aborted_count,
                experiment.output_dir.display()
            );
            println!(
                "assignments: A={} B={} Tie={}",
                summary.assignment_histogram.a,
                summary.assignment_histogram.b,
                summary.assignment_histogram.tie
            );
            if summary.aborted_count == summary.repetitions {
                return Ok(2);
            }
            Ok(0)
        }
        Command::Oracle { attack } => {
            let strategy = named_attack(&attack)?;
            let p = detection_probability_oracle(&strategy)?;
            println!("{p}");
            Ok(0)
        }
        Command::Validate { config } => {
            let experiment = parse_config(&config)?;
            println!(
                "OK: {} repetition(s) x {} shots, config hash {}",
                experiment.repetitions,
                experiment.session.shots,
                experiment.config_hash()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
