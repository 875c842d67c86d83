use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use itergraph::engine::DFS_ROOT_ENV;
use itergraph::experiment::{run_single, run_sweep, Algorithm, GeneratorSpec, GraphSource, RunConfig};
use itergraph::{mean_iteration_time, CostModel, EngineKind};

/// Run iterative graph algorithms on MapReduce, map-side-join MapReduce and BSP engines.
#[derive(Parser)]
#[command(name = "itergraph", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write metrics.csv and states.tsv.
    Run {
        #[arg(long, default_value = "bsp")]
        engine: EngineKind,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run every engine × worker-count combination.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "mr,mr2,bsp")]
        engines: Vec<EngineKind>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        workers: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    algorithm: Algorithm,
    /// Edge list file: `src dst [weight]` per line.
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    input: Option<PathBuf>,
    /// Generated graph, e.g. `n=100000,avg=8,exp=2.2,seed=1`.
    #[arg(long)]
    generate: Option<GeneratorSpec>,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// SSSP source vertex.
    #[arg(long)]
    source: Option<u64>,
    /// RIP seed labels: `vertex p_0 ... p_{C-1}` per line.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// RIP class count.
    #[arg(long)]
    classes: Option<usize>,
    /// Fraction of vertices given random seed labels when --seeds is absent.
    #[arg(long, default_value_t = 0.1)]
    labeled_fraction: f64,
    #[arg(long)]
    combiner: bool,
    /// Let seed vertices drift with their neighbours instead of keeping their labels.
    #[arg(long)]
    no_clamp_seeds: bool,
    /// BSP worker-memory budget in bytes.
    #[arg(long)]
    memory_budget: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    network_secs_per_mib: f64,
    #[arg(long, default_value_t = 0.0)]
    disk_secs_per_mib: f64,
    /// Seed for random seed labels.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop MR and MR2 once no vertex is active.
    #[arg(long)]
    halt_when_quiescent: bool,
    #[arg(long, short)]
    output: PathBuf,
    /// Directory for DFS files.
    #[arg(long, env = DFS_ROOT_ENV)]
    dfs_root: Option<PathBuf>,
}

impl Common {
    fn config(self, engine: EngineKind, workers: usize) -> RunConfig {
        let graph = match (self.input, self.generate) {
            (Some(path), _) => GraphSource::File(path),
            (None, Some(spec)) => GraphSource::Generate(spec),
            (None, None) => unreachable!("clap requires one graph source"),
        };
        RunConfig {
            workers,
            iterations: self.iterations,
            source: self.source,
            seeds: self.seeds,
            classes: self.classes,
            labeled_fraction: self.labeled_fraction,
            combiner: self.combiner,
            clamp_seeds: !self.no_clamp_seeds,
            memory_budget: self.memory_budget,
            cost: CostModel {
                network_secs_per_mib: self.network_secs_per_mib,
                disk_secs_per_mib: self.disk_secs_per_mib,
            },
            seed: self.seed,
            halt_when_quiescent: self.halt_when_quiescent,
            dfs_root: self.dfs_root,
            ..RunConfig::new(engine, self.algorithm, graph, self.output)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { engine, workers, common } => {
            let config = common.config(engine, workers);
            match run_single(&config) {
                Ok(summary) => {
                    let mean = mean_iteration_time(&summary.metrics, false).unwrap_or(f64::NAN);
                    println!(
                        "{} {engine} workers={workers} iterations={} mean_iteration_ms={mean:.3} output={}",
                        summary.run_id,
                        summary.metrics.iterations.len(),
                        config.output.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Sweep { engines, workers, common } => {
            let base = common.config(EngineKind::Mr, 1);
            match run_sweep(&base, &workers, &engines) {
                Ok(summary) => {
                    for row in &summary.rows {
                        let mean = row.mean_iteration_ms.map_or("-".to_string(), |m| format!("{m:.3}"));
                        println!("{} {} workers={} {} mean_iteration_ms={mean}", row.run_id, row.engine, row.workers, row.status);
                    }
                    if summary.failures() > 0 {
                        eprintln!("{} of {} runs failed; see {}", summary.failures(), summary.rows.len(), summary.sweep_path.display());
                        ExitCode::from(4)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
