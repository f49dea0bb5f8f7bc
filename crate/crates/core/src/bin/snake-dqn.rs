use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use snake_dqn::harness::{self, memreport, plot, TrainConfig, Trainer};
use snake_dqn::Error;

#[derive(Parser)]
#[command(
    name = "snake-dqn",
    version,
    about = "DQN agent for Snake on binary frames"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent, writing per-episode metrics and checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        deterministic: bool,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with learning disabled.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 50)]
        episodes: u64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print frame and replay memory tables.
    Memreport,
    /// Render a metrics CSV as an SVG line plot.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "score")]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> snake_dqn::Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            episodes,
            deterministic,
            resume,
        } => {
            let mut cfg = TrainConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if let Some(e) = episodes {
                cfg.run.episodes = e;
            }
            cfg.run.deterministic |= deterministic;
            cfg.validate()?;
            let mut trainer = match resume {
                Some(path) => Trainer::resume(cfg, &path)?,
                None => Trainer::new(cfg)?,
            };
            trainer.run(|m| {
                if (m.episode + 1) % 100 == 0 {
                    eprintln!(
                        "episode {} score {} reward {:.2} eps {:.3} frames {}",
                        m.episode, m.score, m.cumulative_reward, m.epsilon, m.frames_total
                    );
                }
            })?;
            println!(
                "trained {} episodes, {} frames, {} updates",
                trainer.episode, trainer.agent.frame_count, trainer.agent.learn_steps
            );
        }
        Command::Eval {
            checkpoint,
            episodes,
            epsilon,
            seed,
        } => {
            let s = harness::evaluate_checkpoint(&checkpoint, episodes, epsilon, seed)?;
            for (i, (score, steps)) in s.scores.iter().zip(&s.steps).enumerate() {
                println!("episode {i}: score {score} steps {steps}");
            }
            println!("mean score {:.3} best {}", s.mean(), s.best());
        }
        Command::Memreport => print!("{}", memreport::full_report()),
        Command::Plot { metrics, kind, out } => {
            plot::plot_file(&metrics, plot::PlotKind::parse(&kind)?, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
