use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use audamp_core::config::RunConfig;
use audamp_core::env::build_floorplan;
use audamp_core::eval::{
    evaluate_controller, label_motion_states, motion_fractions, npc_baseline, simulate_troupe,
    write_svg, EvalReport, MotionFractions,
};
use audamp_core::imitation::{generate_oracle_demos, DemoDataset, DemoSource};
use audamp_core::policy::{load_checkpoint, save_checkpoint, CheckpointMeta, PolicyParams};
use audamp_core::ppo::{select_models, train, write_curve_csv, Candidate, TrainConfig, TrainSetup};
use audamp_core::trajectory::{self, Trajectory};
use audamp_core::{load_config, Controller, ControllerContext, ControllerRegistry};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

/// Train and evaluate virtual audience agents in a corridor digital twin.
#[derive(Debug, Parser)]
#[command(name = "audamp", version)]
struct Cli {
    /// JSON run configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Roll out the scripted teacher and write demonstrations as JSONL.
    GenDemos {
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Behavioral cloning followed by PPO, once per candidate.
    Train {
        #[arg(long, default_value_t = 1)]
        candidates: u32,
    },
    /// Score every checkpoint in a directory and keep the top fraction.
    Select {
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long)]
        fraction: Option<f64>,
        /// Evaluation episodes per candidate.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Evaluate a checkpoint (or a built-in controller) and print a JSON report.
    Eval {
        #[arg(long, required_unless_present = "controller")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Use a registered controller instead of the checkpoint's network.
        #[arg(long)]
        controller: Option<String>,
        /// Sample actions instead of acting at the distribution mean.
        #[arg(long)]
        stochastic: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write every evaluated trajectory here as JSONL.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Run a staggered troupe of agents and compare it with the static NPC layout.
    Troupe {
        #[arg(long, required_unless_present = "controller")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        stochastic: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for trajectories, plot and summary.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Convert a JSONL trajectory file to another format.
    Export {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Csv,
    Jsonl,
    Svg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("AUDAMP_LOG_LEVEL", "info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::GenDemos { n, seed, out } => gen_demos(&cfg, n, seed, &out),
        Command::Train { candidates } => train_candidates(&cfg, candidates),
        Command::Select {
            checkpoints,
            fraction,
            episodes,
        } => select(&cfg, &checkpoints, fraction, episodes),
        Command::Eval {
            checkpoint,
            episodes,
            controller,
            stochastic,
            seed,
            out,
            trajectories,
        } => {
            let source = ControllerSource::new(
                checkpoint.as_deref(),
                controller,
                stochastic || cfg.eval.stochastic,
            )?;
            eval(
                &cfg,
                &source,
                episodes,
                seed,
                out.as_deref(),
                trajectories.as_deref(),
            )
        }
        Command::Troupe {
            checkpoint,
            agents,
            controller,
            stochastic,
            seed,
            out_dir,
        } => {
            let source = ControllerSource::new(
                checkpoint.as_deref(),
                controller,
                stochastic || cfg.eval.stochastic,
            )?;
            troupe(&cfg, &source, agents, seed, out_dir.as_deref())
        }
        Command::Export {
            trajectory,
            format,
            out,
        } => export(&cfg, &trajectory, format, &out),
    }
}

fn gen_demos(cfg: &RunConfig, n: usize, seed: u64, out: &Path) -> Result<()> {
    let demos = generate_oracle_demos(&cfg.env, n, seed)?;
    create_parent(out)?;
    demos
        .write_jsonl(out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "wrote {} episodes ({:.1} min of demonstrations) to {}",
        demos.len(),
        demos.total_duration() / 60.0,
        out.display()
    );
    Ok(())
}

fn load_or_generate_demos(cfg: &RunConfig) -> Result<DemoDataset> {
    let path = &cfg.paths.demo_file;
    if path.exists() {
        let demos = DemoDataset::read_jsonl(path)
            .with_context(|| format!("reading demos {}", path.display()))?;
        demos.validate(&build_floorplan(&cfg.env)?)?;
        info!(
            "loaded {} demonstration episodes from {}",
            demos.len(),
            path.display()
        );
        Ok(demos)
    } else {
        info!(
            "{} not found; generating {} oracle episodes with seed {}",
            path.display(),
            cfg.demos.episodes,
            cfg.demos.seed
        );
        Ok(generate_oracle_demos(
            &cfg.env,
            cfg.demos.episodes,
            cfg.demos.seed,
        )?)
    }
}

fn train_candidates(cfg: &RunConfig, candidates: u32) -> Result<()> {
    if candidates == 0 {
        bail!("--candidates must be at least 1");
    }
    let echoed = cfg.echo_to(&cfg.paths.log_dir)?;
    info!("resolved configuration written to {}", echoed.display());
    let demos = if cfg.bc.epochs > 0 || cfg.ppo.bc_regularizer > 0.0 {
        Some(load_or_generate_demos(cfg)?)
    } else {
        None
    };
    if demos
        .as_ref()
        .is_some_and(|d| d.source == DemoSource::Imported)
    {
        info!("cloning imported demonstrations");
    }
    fs::create_dir_all(&cfg.paths.checkpoint_dir)?;
    for id in 0..candidates {
        let ppo = TrainConfig {
            seed: cfg.ppo.seed.wrapping_add(id as u64),
            ..cfg.ppo.clone()
        };
        let setup = TrainSetup {
            env: &cfg.env,
            reward: &cfg.reward,
            net: &cfg.net,
            bc: &cfg.bc,
            ppo: &ppo,
            demos: demos.as_ref(),
            checkpoint_dir: Some(&cfg.paths.checkpoint_dir),
            model_id: Some(id),
        };
        info!("candidate {id}: training with seed {}", ppo.seed);
        let outcome = train(&setup).with_context(|| format!("training candidate {id}"))?;

        let ckpt = cfg
            .paths
            .checkpoint_dir
            .join(format!("candidate-{id:02}.ckpt"));
        let mut meta = CheckpointMeta::new(&outcome.params, ppo.seed, outcome.env_steps);
        meta.model_id = Some(id);
        save_checkpoint(&ckpt, &outcome.params, &meta)?;
        let curve = cfg.paths.log_dir.join(format!("curve-{id:02}.csv"));
        write_curve_csv(&curve, &outcome.curve)?;
        if let Some(report) = &outcome.bc_report {
            let path = cfg.paths.log_dir.join(format!("bc-{id:02}.json"));
            fs::write(&path, serde_json::to_string_pretty(report)? + "\n")?;
        }
        let last = outcome.curve.last();
        println!(
            "candidate {id}: {} env steps, final mean reward {}, checkpoint {}",
            outcome.env_steps,
            last.map_or("n/a".to_string(), |r| format!("{:.2}", r.mean_reward)),
            ckpt.display()
        );
    }
    Ok(())
}

fn select(
    cfg: &RunConfig,
    dir: &Path,
    fraction: Option<f64>,
    episodes: Option<usize>,
) -> Result<()> {
    let fraction = fraction.unwrap_or(cfg.eval.select_fraction);
    let episodes = episodes.unwrap_or(cfg.eval.selection_episodes);
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading checkpoint directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "ckpt"))
        .filter(|p| {
            !p.file_name()
                .is_some_and(|n| n.to_string_lossy().starts_with("diagnostic"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .ckpt files in {}", dir.display());
    }
    let mut candidates = Vec::with_capacity(paths.len());
    for (i, path) in paths.iter().enumerate() {
        let (params, meta) = load_checkpoint(path)?;
        let source = ControllerSource::network(Arc::new(params), false);
        let (report, _) = evaluate_with(cfg, &source, episodes, cfg.eval.seed)?;
        let model_id = meta.model_id.unwrap_or(i as u32);
        info!(
            "model {model_id}: mean reward {:.2}, completion {:.2} ({})",
            report.mean_reward,
            report.completion_rate,
            path.display()
        );
        candidates.push(Candidate {
            model_id,
            checkpoint: path.clone(),
            mean_reward: report.mean_reward,
            seed: meta.seed,
        });
    }
    let selected = select_models(&candidates, fraction)?;
    fs::create_dir_all(&cfg.paths.log_dir)?;
    let summary = json!({
        "fraction": fraction,
        "episodes": episodes,
        "candidates": candidates,
        "selected": selected,
    });
    fs::write(
        cfg.paths.log_dir.join("selection.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!(
        "selected {} of {} candidates",
        selected.len(),
        candidates.len()
    );
    for c in &selected {
        println!(
            "{}\t{:.4}\t{}",
            c.model_id,
            c.mean_reward,
            c.checkpoint.display()
        );
    }
    Ok(())
}

/// Where agent actions come from for `eval` and `troupe`.
struct ControllerSource {
    name: String,
    context: ControllerContext,
    registry: ControllerRegistry,
}

impl ControllerSource {
    fn new(
        checkpoint: Option<&Path>,
        controller: Option<String>,
        stochastic: bool,
    ) -> Result<Self> {
        let params = match checkpoint {
            Some(path) => Some(Arc::new(load_checkpoint(path)?.0)),
            None => None,
        };
        let registry = ControllerRegistry::with_builtins();
        let name = controller.unwrap_or_else(|| "network".to_string());
        if !registry.names().any(|n| n == name) {
            let known: Vec<&str> = registry.names().collect();
            bail!("unknown controller `{name}` (known: {})", known.join(", "));
        }
        Ok(Self {
            name,
            context: ControllerContext { params, stochastic },
            registry,
        })
    }

    fn network(params: Arc<PolicyParams>, stochastic: bool) -> Self {
        Self {
            name: "network".to_string(),
            context: ControllerContext {
                params: Some(params),
                stochastic,
            },
            registry: ControllerRegistry::with_builtins(),
        }
    }

    fn make(&self) -> audamp_core::Result<Box<dyn Controller>> {
        self.registry.create(&self.name, &self.context)
    }
}

fn evaluate_with(
    cfg: &RunConfig,
    source: &ControllerSource,
    episodes: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<Trajectory>)> {
    let (report, records) =
        evaluate_controller(&cfg.env, &cfg.reward, || source.make(), episodes, seed)?;
    Ok((report, records.into_iter().map(|r| r.trajectory).collect()))
}

fn eval(
    cfg: &RunConfig,
    source: &ControllerSource,
    episodes: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
    trajectories: Option<&Path>,
) -> Result<()> {
    let episodes = episodes.unwrap_or(cfg.eval.episodes);
    let (report, trajs) = evaluate_with(cfg, source, episodes, seed.unwrap_or(cfg.eval.seed))?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(path) = out {
        create_parent(path)?;
        fs::write(path, &text)?;
    }
    if let Some(path) = trajectories {
        create_parent(path)?;
        trajectory::write_jsonl(
            fs::File::create(path).map(std::io::BufWriter::new)?,
            &trajs,
            false,
        )?;
    }
    print!("{text}");
    Ok(())
}

fn troupe(
    cfg: &RunConfig,
    source: &ControllerSource,
    agents: Option<usize>,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<()> {
    let agents = agents.unwrap_or(cfg.eval.troupe_agents);
    let run = simulate_troupe(
        &cfg.env,
        || source.make(),
        agents,
        seed.unwrap_or(cfg.eval.seed),
    )?;
    let plan = build_floorplan(&cfg.env)?;
    let npc = npc_baseline(&plan, &cfg.env)?;
    let motion = pooled_motion(&run.trajectories)?;
    let summary = json!({
        "agents": run.n_agents,
        "controller": source.name,
        "stochastic": source.context.stochastic,
        "spawn_stagger": run.spawn_stagger,
        "mean_dispersion": run.mean_dispersion(),
        "npc_dispersion": npc.mean_dispersion(),
        "motion": motion,
    });
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let jsonl = fs::File::create(dir.join("troupe.jsonl")).map(std::io::BufWriter::new)?;
        trajectory::write_jsonl(jsonl, &run.trajectories, false)?;
        write_svg(&dir.join("troupe.svg"), &plan, &run.trajectories)?;
        write_svg(&dir.join("npc.svg"), &plan, &npc.trajectories)?;
        let mut series = String::from("t,present,dispersion\n");
        for (k, (d, p)) in run.dispersion.iter().zip(&run.present).enumerate() {
            series.push_str(&format!("{:.1},{p},{d}\n", k as f64 * run.dt));
        }
        fs::write(dir.join("dispersion.csv"), series)?;
        fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)? + "\n",
        )?;
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn pooled_motion(trajectories: &[Trajectory]) -> Result<MotionFractions> {
    let mut labels = Vec::new();
    for t in trajectories {
        labels.extend(label_motion_states(t)?);
    }
    Ok(motion_fractions(&labels))
}

fn export(cfg: &RunConfig, input: &Path, format: ExportFormat, out: &Path) -> Result<()> {
    let file = fs::File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let trajs = trajectory::read_jsonl(std::io::BufReader::new(file))?;
    create_parent(out)?;
    let writer = || -> Result<std::io::BufWriter<fs::File>> {
        Ok(std::io::BufWriter::new(fs::File::create(out)?))
    };
    match format {
        ExportFormat::Csv => trajectory::write_csv(writer()?, &trajs)?,
        ExportFormat::Jsonl => trajectory::write_jsonl(writer()?, &trajs, false)?,
        ExportFormat::Svg => write_svg(out, &build_floorplan(&cfg.env)?, &trajs)?,
    }
    println!("wrote {} trajectories to {}", trajs.len(), out.display());
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}
