use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uavspoof::attack::{envelope_report, measure_reflection_delay};
use uavspoof::estimator::FusionConfig;
use uavspoof::geo::{FlatEarthFrame, LocalPos};
use uavspoof::harness::export::export_run;
use uavspoof::harness::replicate::{replicate, ExperimentId};
use uavspoof::harness::{run_scenario, HarnessError, ScenarioConfig};
use uavspoof::learner::{success_rate, train_with, write_learning_curve, Td3Config, TrainingTask};
use uavspoof::policy::save_policy;

const OUT_ENV: &str = "UAVSPOOF_OUT_DIR";

#[derive(Parser)]
#[command(name = "uavspoof", version, about = "GPS spoofing against a learned UAV navigator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUT_ENV)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a canned experiment (fig5, fig7-envelope, fig8a, fig8b) and its baseline.
    Replicate {
        id: String,
        #[arg(long, env = OUT_ENV)]
        out: PathBuf,
        /// Use these policy weights instead of the experiment's default navigator.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Train a navigation policy with TD3 and save its weights.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimator-gate measurements.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
}

#[derive(Subcommand)]
enum Analyze {
    /// Largest undetected drift rate and related readings, written as JSON.
    Envelope {
        #[arg(long)]
        out: PathBuf,
    },
    /// Samples needed before a constant offset shows up in the estimate.
    Delay {
        #[arg(long, allow_negative_numbers = true)]
        offset_m: f64,
    },
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let json = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run { config, out, seed } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let run = run_scenario(&cfg)?;
            export_run(&run, &out)?;
            let s = run.summary();
            println!(
                "{} at t={:.1}s, min obstacle distance {:.2} m, max test ratio {:.3}",
                s.verdict.label(),
                s.verdict.t(),
                s.min_obstacle_dist,
                s.max_test_ratio
            );
        }
        Command::Replicate { id, out, policy } => {
            let id: ExperimentId = id.parse()?;
            let loaded = policy.map(|p| uavspoof::policy::load_policy(&p)).transpose().map_err(HarnessError::PolicyLoad)?;
            let report = replicate(id, loaded.as_ref().map(|p| p as _), &out)?;
            println!("{id}: attack {}, baseline {}", report.attack.verdict.label(), report.baseline.verdict.label());
        }
        Command::Train { out, steps, seed } => {
            let task = TrainingTask::default();
            let mut cfg = Td3Config { seed, ..Td3Config::default() };
            if let Some(n) = steps {
                cfg.total_steps = n;
                cfg.warmup_steps = cfg.warmup_steps.min(n / 10);
            }
            let mut episodes = 0usize;
            let outcome = train_with(&task, &cfg, |e| {
                episodes += 1;
                if episodes.is_multiple_of(100) {
                    eprintln!("episode {} return {:.2} success {}", e.episode, e.ret, e.success);
                }
            })
            .map_err(|e| HarnessError::Config(e.to_string()))?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            save_policy(&outcome.policy, &out).map_err(HarnessError::PolicyLoad)?;
            let mut curve_path = out.clone().into_os_string();
            curve_path.push(".curve.csv");
            let f = fs::File::create(PathBuf::from(curve_path))?;
            let mut w = BufWriter::new(f);
            write_learning_curve(&mut w, &outcome.curve)?;
            w.flush()?;
            let free = success_rate(&outcome.policy, &task, 50, false, seed ^ 0xE7A1);
            let obst = success_rate(&outcome.policy, &task, 50, true, seed ^ 0xE7A1);
            println!("saved {}; success {:.0}% without obstacle, {:.0}% with", out.display(), free * 100.0, obst * 100.0);
        }
        Command::Analyze { what: Analyze::Envelope { out } } => {
            let report = envelope_report(&FusionConfig::default(), &FlatEarthFrame::default())?;
            write_json(&out, &report)?;
            println!("max undetected rate {:.2} m/s", report.max_undetected_rate_mps);
        }
        Command::Analyze { what: Analyze::Delay { offset_m } } => {
            if !offset_m.is_finite() {
                return Err(HarnessError::Config("offset must be finite".into()));
            }
            let d = measure_reflection_delay(&FusionConfig::default(), LocalPos::new(0.0, offset_m))?;
            println!("{}", serde_json::to_string(&d).expect("delay serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // usage errors share the config/IO exit code; 2 is reserved for infeasible scenarios
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
