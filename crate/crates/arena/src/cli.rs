//! The `skyjo` command line.

use crate::checkpoints::{CheckpointStore, CHECKPOINT_DIR_ENV};
use crate::protocol::CreateRequest;
use crate::session::Session;
use crate::{server, terminal};
use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use skyjo_core::bots::bot_roster;
use skyjo_core::Rules;
use skyjo_eval::matches::{bot_eval, default_threads, head_to_head, seed_list};
use skyjo_eval::probe::{collect_samples, probe_suite};
use skyjo_muzero::agent::Player;
use skyjo_muzero::search::SearchConfig;
use skyjo_muzero::trainer::{self_play_episode, OpponentPool, TrainConfig, Trainer};
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Parser)]
#[command(name = "skyjo", version, about = "Train, evaluate and play the Skyjo planning agent")]
pub struct Cli {
    /// Master seed; commands derive every game seed from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory holding `iter_N` checkpoints.
    #[arg(long, global = true, env = CHECKPOINT_DIR_ENV)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Worker threads for match play.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// No auxiliary heads, ego conditioning off.
    Baseline,
    /// Winner and rank losses with ego conditioning.
    Belief,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the self-play training loop from a TOML config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Belief)]
        mode: Mode,
        /// Overrides the configured iteration count.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Play self-play episodes with a checkpoint and write them as JSON lines.
    Selfplay {
        #[arg(long)]
        checkpoint: String,
        #[arg(long, default_value_t = 10)]
        games: usize,
        #[arg(long, default_value_t = 200)]
        sims: usize,
        #[arg(long, default_value_t = 2)]
        players: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Alternating-seat games against every roster bot.
    EvalBots {
        #[arg(long)]
        checkpoint: String,
        /// Games per bot.
        #[arg(long, default_value_t = 1000)]
        games: usize,
        #[arg(long, default_value_t = 200)]
        sims: usize,
        #[arg(long)]
        json: bool,
    },
    /// Head-to-head between two agents (checkpoints or `bot:<name>`).
    H2h {
        a: String,
        b: String,
        #[arg(long, default_value_t = 1000)]
        games: usize,
        #[arg(long, default_value_t = 200)]
        sims: usize,
        #[arg(long)]
        json: bool,
    },
    /// Linear probes on frozen latents of a baseline and a belief checkpoint.
    Probe {
        #[arg(long)]
        baseline: String,
        #[arg(long)]
        belief: String,
        #[arg(long, default_value_t = 200)]
        games: usize,
        /// Simulations for the games that generate probe states.
        #[arg(long, default_value_t = 50)]
        sims: usize,
        #[arg(long)]
        json: bool,
    },
    /// Serve the arena over websockets at `/ws`.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 200)]
        sims: usize,
    },
    /// Play against an agent in the terminal.
    Play {
        #[arg(long)]
        checkpoint: String,
        #[arg(long, default_value_t = 2)]
        players: usize,
        #[arg(long, default_value_t = 0)]
        seat: usize,
        #[arg(long, default_value_t = 200)]
        sims: usize,
    },
}

/// Applies `mode` to a training config.
pub fn apply_mode(config: &mut TrainConfig, mode: Mode) {
    config.baseline = mode == Mode::Baseline;
}

impl Cli {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn threads(&self) -> usize {
        self.threads.unwrap_or_else(default_threads).max(1)
    }

    fn store(&self, sims: usize) -> CheckpointStore {
        CheckpointStore::new(self.checkpoint_dir.clone(), SearchConfig::greedy(sims)).with_paths(true)
    }
}

pub fn run(cli: &Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> anyhow::Result<()> {
    let rules = Rules::default();
    match &cli.command {
        Command::Train { config, mode, iterations } => {
            let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = TrainConfig::from_toml(&text)?;
            apply_mode(&mut cfg, *mode);
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(n) = iterations {
                cfg.iterations = *n;
            }
            if cfg.checkpoint_dir.is_none() {
                cfg.checkpoint_dir = cli.checkpoint_dir.clone();
            }
            let dir = cfg.checkpoint_dir.clone();
            let mut trainer = Trainer::new(cfg)?;
            while trainer.iteration < trainer.config.iterations {
                let r = trainer.train_iteration()?;
                writeln!(
                    out,
                    "iter {:>5}  loss {:>9.4}  policy {:.4}  value {:.4}  reward {:.4}  steps {:.0}  {:.1}s",
                    r.iteration, r.total_loss, r.policy_loss, r.value_loss, r.reward_loss, r.mean_episode_steps, r.elapsed_s
                )?;
            }
            if let Some(dir) = dir {
                let path = trainer.save_checkpoint(&dir)?;
                writeln!(out, "saved {}", path.display())?;
            }
        }
        Command::Selfplay { checkpoint, games, sims, players, out: path } => {
            let nets = cli.store(*sims).nets(checkpoint)?;
            let cfg = TrainConfig {
                num_players: *players,
                simulations: Some(*sims),
                curriculum_iterations: 0,
                ..TrainConfig::default()
            };
            cfg.validate()?;
            let mut file = match path {
                Some(p) => Some(std::io::BufWriter::new(std::fs::File::create(p)?)),
                None => None,
            };
            for seed in seed_list(cli.seed(), *games) {
                let ep = self_play_episode(&nets, &OpponentPool::new(1), cfg.curriculum_iterations, seed, &cfg);
                writeln!(out, "seed {seed}: {} steps, scores {:?}, winners {:?}", ep.len(), ep.outcome.scores, ep.outcome.winners)?;
                if let Some(f) = file.as_mut() {
                    serde_json::to_writer(&mut *f, &ep)?;
                    writeln!(f)?;
                }
            }
        }
        Command::EvalBots { checkpoint, games, sims, json } => {
            let agent = cli.store(*sims).agent(checkpoint)?;
            let report = bot_eval(&agent, &bot_roster(), *games, cli.seed(), rules, cli.threads());
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                writeln!(out, "{report}")?;
            }
        }
        Command::H2h { a, b, games, sims, json } => {
            let store = cli.store(*sims);
            let (pa, pb) = (store.agent(a)?, store.agent(b)?);
            let mut report = head_to_head(&pa, &pb, &seed_list(cli.seed(), *games), rules, cli.threads());
            report.agent_a = a.clone();
            report.agent_b = b.clone();
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                writeln!(out, "{report}")?;
            }
        }
        Command::Probe { baseline, belief, games, sims, json } => {
            let store = cli.store(*sims);
            let (base, bel) = (store.nets(baseline)?, store.nets(belief)?);
            let seats = [
                Player::mcts(bel.clone(), SearchConfig::greedy(*sims)),
                Player::mcts(base.clone(), SearchConfig::greedy(*sims)),
            ];
            let samples = collect_samples(&[&seats[0], &seats[1]], *games, cli.seed(), rules);
            let report = probe_suite(&base, &bel, &samples, *games)?;
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                writeln!(out, "{report}")?;
            }
        }
        Command::Serve { port, host, sims } => {
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad host or port")?;
            let store = Arc::new(CheckpointStore::new(cli.checkpoint_dir.clone(), SearchConfig::greedy(*sims)));
            let runtime = tokio::runtime::Runtime::new()?;
            writeln!(out, "serving ws://{addr}/ws")?;
            out.flush()?;
            runtime.block_on(server::serve(addr, store))?;
        }
        Command::Play { checkpoint, players, seat, sims } => {
            let store = cli.store(*sims);
            let req = CreateRequest {
                num_players: *players,
                human_seat: *seat,
                checkpoint: checkpoint.clone(),
                seed: Some(cli.seed()),
            };
            let session = Session::open("terminal", &req, &store)?;
            let result = terminal::play(session, input, out)?;
            if result.is_none() {
                bail!("input ended before the game finished");
            }
        }
    }
    Ok(())
}
