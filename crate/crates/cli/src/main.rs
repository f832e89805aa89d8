use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::rc::Rc;

use clap::{Args, Parser, Subcommand};
use freeplan_core::harness::{self, read_steps_csv, write_aggregate_csv, EpisodeLog, ExperimentConfig, STEPS_FILE};
use freeplan_core::mcts::{self, MctsPlanner};
use freeplan_core::plan::{make_planner, PlanContext, Planner, PlannerKind};
use freeplan_core::{Action, Error, Result, RngStream, State};

#[derive(Parser)]
#[command(name = "freeplan", version, about = "Free-energy planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run(RunArgs),
    /// Recompute per-episode aggregates from a run directory.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize an MCTS tree dump.
    InspectTree {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    planner: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the final search tree of the run (MCTS planners only).
    #[arg(long)]
    dump_tree: Option<PathBuf>,
    /// Suppress per-episode progress lines.
    #[arg(long, short)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Aggregate { input, out } => aggregate(&input, &out),
        Command::InspectTree { input } => inspect_tree(&input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(env) = &args.env {
        cfg.set("env", env)?;
    }
    if let Some(p) = &args.planner {
        cfg.set("planner", p)?;
    }
    if let Some(n) = args.episodes {
        cfg.episodes = n;
    }
    if let Some(n) = args.trials {
        cfg.trials = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Forwards to an MCTS planner and keeps a dump of its latest tree.
struct DumpingPlanner {
    inner: MctsPlanner,
    slot: Rc<RefCell<Option<String>>>,
}

impl Planner for DumpingPlanner {
    fn plan(&mut self, state: &State, ctx: &PlanContext<'_>, rng: &mut RngStream) -> Result<Action> {
        let a = self.inner.plan(state, ctx, rng)?;
        *self.slot.borrow_mut() = self.inner.last_tree().map(mcts::Tree::dump);
        Ok(a)
    }

    fn reset(&mut self) {
        self.inner.reset();
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = resolve(&args)?;
    let kind = cfg.planner;
    let slot = Rc::new(RefCell::new(None));
    let mut factory: Box<dyn FnMut() -> Box<dyn Planner>> = match (&args.dump_tree, kind) {
        (None, _) => Box::new(move || make_planner(kind)),
        (Some(_), PlannerKind::Cem) => {
            return Err(Error::InvalidArgument("--dump-tree requires an mcts planner".into()));
        }
        (Some(_), _) => {
            let slot = Rc::clone(&slot);
            Box::new(move || {
                let inner = if kind == PlannerKind::MctsCem { MctsPlanner::cem() } else { MctsPlanner::random() };
                Box::new(DumpingPlanner { inner: inner.keep_last_tree(), slot: Rc::clone(&slot) }) as Box<dyn Planner>
            })
        }
    };
    let quiet = args.quiet;
    let mut report = |log: &EpisodeLog| {
        if !quiet {
            eprintln!(
                "trial {} episode {}: reward {:.3} over {} steps ({:.1}s)",
                log.trial,
                log.episode,
                log.cumulative_reward,
                log.rewards.len(),
                log.duration.as_secs_f64()
            );
        }
    };
    let logs = harness::run_experiment_with(&cfg, &mut *factory, &mut report)?;
    for a in harness::aggregate(&logs)? {
        println!("episode {} mean {:.4} std {:.4}", a.episode, a.mean, a.std);
    }
    if let Some(path) = &args.dump_tree {
        let text = slot.borrow().clone().ok_or_else(|| Error::InvalidState("no tree was built".into()))?;
        std::fs::write(path, text).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    }
    Ok(())
}

fn aggregate(input: &Path, out: &Path) -> Result<()> {
    let logs = read_steps_csv(&input.join(STEPS_FILE))?;
    let aggregates = harness::aggregate(&logs)?;
    write_aggregate_csv(out, &aggregates)
}

fn inspect_tree(input: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::Io { path: input.to_path_buf(), source: e })?;
    let rows = mcts::parse_dump(&text)?;
    let depth = rows.iter().map(|r| r.depth).max().unwrap_or(0);
    println!("nodes {} root_visits {} max_depth {}", rows.len(), rows[0].visits, depth);
    let children: Vec<_> = rows.iter().filter(|r| r.parent == Some(0)).collect();
    let best = children.iter().map(|r| r.visits).max();
    for c in &children {
        let q = if c.visits > 0 { format!("{:.4}", c.value_sum / c.visits as f64) } else { "-".into() };
        let action = c.action.as_deref().unwrap_or(&[]).iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(",");
        let mark = if Some(c.visits) == best { " *" } else { "" };
        println!("child {} action [{}] N {} Q {}{}", c.id, action, c.visits, q, mark);
    }
    let bad = mcts::conservation_violations(&rows);
    if !bad.is_empty() {
        return Err(Error::Format(format!("visit conservation fails at nodes {bad:?}")));
    }
    Ok(())
}
