use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use orchestra_sim::experiment::{compare_to_dir, read_steady_input, run_to_dir};
use orchestra_sim::{
    detect_steady, ConfigError, Scenario, SchedulerKind, SimTime, SteadyCriterion,
};

/// TSCH network simulator with Orchestra and minimal scheduling.
///
/// Log verbosity follows ORCHESTRA_SIM_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace files.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides the scheduler named in the scenario.
        #[arg(long)]
        scheduler: Option<SchedulerKind>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        criterion: CriterionArgs,
    },
    /// Run the scenario under both schedulers and compare them.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        criterion: CriterionArgs,
    },
    /// Detect steady state in a run directory written by `run`.
    Steady {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        criterion: CriterionArgs,
        /// Search from this time onward (ms).
        #[arg(long, default_value_t = 0)]
        from_ms: u64,
    },
}

#[derive(clap::Args, Clone, Copy)]
struct CriterionArgs {
    /// Quiet window without triggered DIOs, in seconds.
    #[arg(long, default_value_t = 60)]
    window_s: u64,
    /// Minimum trickle interval every alive node must reach, in ms.
    #[arg(long, default_value_t = 65_536)]
    interval_ms: u64,
}

impl CriterionArgs {
    fn criterion(self) -> SteadyCriterion {
        SteadyCriterion {
            window_ms: self.window_s * 1000,
            interval_ms: self.interval_ms,
        }
    }
}

fn fmt_ms(v: Option<u64>) -> String {
    v.map_or_else(
        || "none".into(),
        |ms| format!("{:.2} s", ms as f64 / 1000.0),
    )
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ORCHESTRA_SIM_LOG", "warn"))
        .init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), ConfigError> {
    match cmd {
        Command::Run {
            scenario,
            seed,
            scheduler,
            out,
            criterion,
        } => {
            let sc = Scenario::load(&scenario)?;
            let kind = sc.resolve_scheduler(scheduler)?;
            let r = run_to_dir(&sc, kind, seed, criterion.criterion(), &out)?.report;
            println!("scheduler      {}", r.scheduler);
            println!("all joined     {}", fmt_ms(r.all_joined_ms));
            println!("steady state   {}", fmt_ms(r.steady_state_ms));
            for rec in &r.recoveries {
                println!(
                    "recovery       node {} removed at {}: {}",
                    rec.node,
                    fmt_ms(Some(rec.removed_at_ms)),
                    fmt_ms(rec.recovery_ms)
                );
            }
            for w in &r.windows {
                println!("radio on       {:<10} {:.3} %", w.label, w.network_percent);
            }
            println!(
                "frames         generated {} delivered {}",
                r.frames.generated, r.frames.delivered
            );
            println!("output         {}", out.display());
        }
        Command::Compare {
            scenario,
            seed,
            out,
            criterion,
        } => {
            let sc = Scenario::load(&scenario)?;
            let c = compare_to_dir(&sc, seed, criterion.criterion(), &out)?.comparison;
            println!("window {}", c.measured_window);
            for r in &c.results {
                let pct = r
                    .measured_percent
                    .map_or_else(|| "n/a".into(), |p| format!("{p:.3} %"));
                let rec: Vec<String> = r.recovery_ms.iter().map(|&x| fmt_ms(x)).collect();
                println!(
                    "{:<10} radio on {pct:<10} recovery [{}]",
                    r.scheduler,
                    rec.join(", ")
                );
            }
            if let Some(ratio) = c.ratio {
                println!("ratio orchestra/minimal {ratio:.3}");
            }
            println!("output {}", out.display());
        }
        Command::Steady {
            trace,
            criterion,
            from_ms,
        } => {
            let crit = criterion.criterion();
            if crit.window_ms == 0 || crit.interval_ms == 0 {
                return Err(ConfigError::invalid(
                    "steady-state window and interval must be positive",
                ));
            }
            let input = read_steady_input(&trace)?;
            let steady = detect_steady(&input, &crit, SimTime(from_ms));
            println!("steady state   {}", fmt_ms(steady.map(|t| t.0)));
            for &(at, node) in &input.removals {
                let t = detect_steady(&input, &crit, at);
                println!(
                    "recovery       node {node} removed at {}: {}",
                    fmt_ms(Some(at.0)),
                    fmt_ms(t.map(|t| t - at))
                );
            }
        }
    }
    Ok(())
}
