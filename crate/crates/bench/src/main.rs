use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use grtc_core::bench::{
    build_oracle_script, generate_suite, is_scene_file, read_records, run_benchmark, summarize, Approach, BenchScene,
    CsvSink,
};
use grtc_core::clock::ClockMode;
use grtc_core::grtc::GrtcConfig;
use grtc_core::physics::PropagationConfig;
use grtc_core::planners::{PlannerConfig, PlannerKind};

#[derive(Parser)]
#[command(name = "bench", about = "Benchmark runner for guided reaching through clutter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials and stream records to CSV.
    Run(RunArgs),
    /// Compute statistics from a results CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate random scenes S1..Sn.
    GenScenes {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        objects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build oracle operator scripts next to each scene.
    MakeScripts(ScriptArgs),
}

#[derive(Args)]
struct PlanningArgs {
    /// Planner used inside the guided loop.
    #[arg(long, default_value = "rrt")]
    planner: PlannerKind,
    #[arg(long, default_value = "wall")]
    clock: ClockMode,
    #[arg(long, default_value_t = 10.0)]
    t_pushing: f64,
    #[arg(long)]
    substep_dt: Option<f64>,
    #[arg(long)]
    max_resolution_iterations: Option<usize>,
    #[arg(long)]
    penetration_tolerance: Option<f64>,
    #[arg(long)]
    rotation_gain: Option<f64>,
}

impl PlanningArgs {
    fn planner_config(&self) -> PlannerConfig {
        let overridden = self.substep_dt.is_some()
            || self.max_resolution_iterations.is_some()
            || self.penetration_tolerance.is_some()
            || self.rotation_gain.is_some();
        let propagation = overridden.then(|| {
            let d = PropagationConfig::default();
            PropagationConfig {
                substep_dt: self.substep_dt.unwrap_or(d.substep_dt),
                max_resolution_iterations: self.max_resolution_iterations.unwrap_or(d.max_resolution_iterations),
                penetration_tolerance: self.penetration_tolerance.unwrap_or(d.penetration_tolerance),
                rotation_gain: self.rotation_gain.unwrap_or(d.rotation_gain),
            }
        });
        PlannerConfig {
            clock: self.clock,
            propagation,
            ..PlannerConfig::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Glob selecting scene files; `*.script.json` files are skipped.
    #[arg(long)]
    scenes: String,
    /// One or more approaches, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    approach: Vec<Approach>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300.0)]
    t_overall: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    planning: PlanningArgs,
}

#[derive(Args)]
struct ScriptArgs {
    #[arg(long)]
    scenes: String,
    /// Seed the scripts are verified with; pass the same seed to `run`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    planning: PlanningArgs,
}

fn scene_paths(pattern: &str) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob {pattern:?}"))?
        .collect::<Result<_, _>>()?;
    paths.retain(|p| is_scene_file(p));
    paths.sort();
    if paths.is_empty() {
        bail!("no scene files match {pattern:?}");
    }
    Ok(paths)
}

fn load_scenes(pattern: &str) -> Result<Vec<BenchScene>> {
    scene_paths(pattern)?
        .iter()
        .map(|p| BenchScene::load(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn run(args: RunArgs) -> Result<()> {
    let scenes = load_scenes(&args.scenes)?;
    let gcfg = GrtcConfig {
        t_overall: args.t_overall,
        t_pushing: args.planning.t_pushing,
        ..GrtcConfig::default()
    };
    let pcfg = args.planning.planner_config();
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut sink = CsvSink::new(BufWriter::new(file));
    let records = run_benchmark(
        &scenes,
        &args.approach,
        args.trials,
        args.seed,
        &gcfg,
        &pcfg,
        args.planning.planner,
        &mut |r| {
            eprintln!(
                "{} {} seed {}: success {} planning {:.3}s",
                r.scene_id, r.approach, r.seed, r.success, r.planning_time
            );
            sink.write(r)
        },
    )?;
    sink.into_inner()?;
    eprintln!("{} records written to {}", records.len(), args.out.display());
    Ok(())
}

fn summarize_file(input: &Path, out: &Path) -> Result<()> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let stats = summarize(&read_records(file)?)?;
    fs::write(out, serde_json::to_string_pretty(&stats)?)?;
    Ok(())
}

fn gen_scenes(n: usize, objects: usize, seed: u64, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    for (id, scene) in generate_suite(n, objects, seed)? {
        fs::write(out.join(format!("{id}.json")), scene.to_json() + "\n")?;
    }
    Ok(())
}

fn make_scripts(args: ScriptArgs) -> Result<()> {
    let gcfg = GrtcConfig {
        t_overall: 1e9,
        t_pushing: args.planning.t_pushing,
        seed: args.seed,
        ..GrtcConfig::default()
    };
    let pcfg = args.planning.planner_config();
    for path in scene_paths(&args.scenes)? {
        let s = BenchScene::load(&path)?;
        let script = build_oracle_script(&s.scene, &gcfg, &pcfg, args.planning.planner)?;
        let target = path.with_file_name(format!("{}.script.json", s.id));
        fs::write(&target, serde_json::to_string_pretty(&script)? + "\n")?;
        eprintln!("{}: {} actions", s.id, script.len());
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Summarize { input, out } => summarize_file(&input, &out),
        Command::GenScenes { n, objects, seed, out } => gen_scenes(n, objects, seed, &out),
        Command::MakeScripts(args) => make_scripts(args),
    }
}
