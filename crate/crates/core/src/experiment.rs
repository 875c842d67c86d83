//! Configured runs and parameter sweeps that write `metrics.csv` and `states.tsv`.

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cluster::CostModel;
use crate::engine::{run_engine, EngineError, EngineKind, RunOptions, RunOutput};
use crate::graph::{
    generate_power_law_graph, generate_seed_labels, load_edge_list, load_seed_labels, Graph, GraphError, VertexId,
};
use crate::metrics::{export_csv, mean_iteration_time, MetricsError, RunMetrics};
use crate::program::{Rip, Sssp, StateMap, VertexProgram};

pub const METRICS_FILE: &str = "metrics.csv";
pub const STATES_FILE: &str = "states.tsv";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sssp,
    Rip,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Sssp => "sssp",
            Algorithm::Rip => "rip",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sssp" => Ok(Algorithm::Sssp),
            "rip" => Ok(Algorithm::Rip),
            other => Err(format!("unknown algorithm '{other}' (expected sssp or rip)")),
        }
    }
}

/// Inline power-law generator parameters, written `n=..,avg=..,exp=..,seed=..`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub avg_degree: f64,
    pub exponent: f64,
    pub seed: u64,
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={},avg={},exp={},seed={}",
            self.n, self.avg_degree, self.exponent, self.seed
        )
    }
}

impl FromStr for GeneratorSpec {
    type Err = String;

    /// `n` is required; `avg` defaults to 4, `exp` to 2.2 and `seed` to 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut n = None;
        let mut spec = GeneratorSpec {
            n: 0,
            avg_degree: 4.0,
            exponent: 2.2,
            seed: 0,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, found '{part}'"))?;
            let bad = |e: &dyn fmt::Display| format!("bad value for {key}: {e}");
            match key.trim() {
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
                "avg" => spec.avg_degree = value.parse().map_err(|e| bad(&e))?,
                "exp" => spec.exponent = value.parse().map_err(|e| bad(&e))?,
                "seed" => spec.seed = value.parse().map_err(|e| bad(&e))?,
                other => return Err(format!("unknown generator key '{other}'")),
            }
        }
        spec.n = n.ok_or("generator spec needs n=<vertices>")?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphSource {
    File(PathBuf),
    Generate(GeneratorSpec),
}

impl GraphSource {
    /// Dataset label used in metrics.
    pub fn dataset(&self) -> String {
        match self {
            GraphSource::File(path) => path
                .file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
            GraphSource::Generate(spec) => format!("gen:{spec}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub engine: EngineKind,
    pub algorithm: Algorithm,
    pub graph: GraphSource,
    pub workers: usize,
    pub iterations: usize,
    /// SSSP source vertex.
    pub source: Option<VertexId>,
    /// RIP seed-label file; without one, seeds are drawn at random.
    pub seeds: Option<PathBuf>,
    pub classes: Option<usize>,
    /// Fraction of vertices given random seed labels when no seed file is set.
    pub labeled_fraction: f64,
    pub combiner: bool,
    pub clamp_seeds: bool,
    /// Only the BSP engine has a memory budget; MR engines ignore it.
    pub memory_budget: Option<u64>,
    pub cost: CostModel,
    /// Seed for random seed labels.
    pub seed: u64,
    pub halt_when_quiescent: bool,
    pub output: PathBuf,
    /// Where DFS files go; not part of the run's identity.
    #[serde(skip)]
    pub dfs_root: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(engine: EngineKind, algorithm: Algorithm, graph: GraphSource, output: impl Into<PathBuf>) -> Self {
        Self {
            engine,
            algorithm,
            graph,
            workers: 1,
            iterations: 10,
            source: None,
            seeds: None,
            classes: None,
            labeled_fraction: 0.1,
            combiner: false,
            clamp_seeds: true,
            memory_budget: None,
            cost: CostModel::default(),
            seed: 0,
            halt_when_quiescent: false,
            output: output.into(),
            dfs_root: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |m: String| Err(ExperimentError::Config(m));
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        match self.algorithm {
            Algorithm::Sssp => {
                if self.source.is_none() {
                    return fail("sssp needs a source vertex".into());
                }
                if self.seeds.is_some() || self.classes.is_some() {
                    return fail("seed labels and classes only apply to rip".into());
                }
            }
            Algorithm::Rip => {
                match self.classes {
                    None => return fail("rip needs a class count".into()),
                    Some(c) if c < 2 => return fail(format!("rip needs at least 2 classes, got {c}")),
                    _ => {}
                }
                if self.source.is_some() {
                    return fail("a source vertex only applies to sssp".into());
                }
            }
        }
        if !(0.0..=1.0).contains(&self.labeled_fraction) {
            return fail(format!("labeled fraction {} is outside [0, 1]", self.labeled_fraction));
        }
        for (name, rate) in [
            ("network", self.cost.network_secs_per_mib),
            ("disk", self.cost.disk_secs_per_mib),
        ] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return fail(format!("{name} cost must be a finite non-negative number, got {rate}"));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the config without its output directory.
    pub fn run_id(&self) -> String {
        let mut echo = self.clone();
        echo.output = PathBuf::new();
        let json = serde_json::to_vec(&echo).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            iterations: self.iterations,
            workers: self.workers,
            combiner: self.combiner,
            halt_when_quiescent: self.halt_when_quiescent,
            memory_budget: if self.engine == EngineKind::Bsp { self.memory_budget } else { None },
            cost: self.cost,
            dfs_root: self.dfs_root.clone(),
            ..RunOptions::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot load graph input {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: GraphError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ExperimentError {
    /// Process exit code: 2 configuration or input, 3 capacity, 4 engine fault.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Input { .. } | ExperimentError::Graph(_) => 2,
            ExperimentError::Engine(EngineError::Config(_) | EngineError::Program(_)) => 2,
            ExperimentError::Engine(EngineError::Capacity { .. }) => 3,
            _ => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A loaded graph plus its dataset label; shared by all runs of a sweep.
pub struct Input {
    pub graph: Graph<f64>,
    pub dataset: String,
}

pub fn prepare_input(config: &RunConfig) -> Result<Input, ExperimentError> {
    config.validate()?;
    let mut graph = match &config.graph {
        GraphSource::File(path) => {
            let file = File::open(path).map_err(|e| ExperimentError::Input {
                path: path.clone(),
                source: GraphError::Io(e),
            })?;
            load_edge_list(BufReader::new(file), 1.0).map_err(|source| ExperimentError::Input {
                path: path.clone(),
                source,
            })?
        }
        GraphSource::Generate(spec) => generate_power_law_graph(spec.n, spec.avg_degree, spec.exponent, spec.seed)?,
    };
    if config.algorithm == Algorithm::Rip {
        let classes = config.classes.expect("validated");
        let seeds = match &config.seeds {
            Some(path) => {
                let file = File::open(path).map_err(|e| ExperimentError::Input {
                    path: path.clone(),
                    source: GraphError::Io(e),
                })?;
                load_seed_labels(BufReader::new(file), classes).map_err(|source| ExperimentError::Input {
                    path: path.clone(),
                    source,
                })?
            }
            None => generate_seed_labels(&graph, classes, config.labeled_fraction, config.seed)?,
        };
        let (with_seeds, ignored) = graph.with_seed_labels(seeds)?;
        if ignored > 0 {
            log::warn!("{ignored} seed labels name vertices outside the graph");
        }
        graph = with_seeds;
    }
    Ok(Input {
        dataset: config.graph.dataset(),
        graph,
    })
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub run_id: String,
    pub metrics: RunMetrics,
    pub metrics_path: PathBuf,
    pub states_path: PathBuf,
}

/// Loads the input, runs once and writes the output files.
pub fn run_single(config: &RunConfig) -> Result<RunSummary, ExperimentError> {
    let input = prepare_input(config)?;
    run_prepared(config, &input)
}

/// Runs `config` on an already loaded input.
pub fn run_prepared(config: &RunConfig, input: &Input) -> Result<RunSummary, ExperimentError> {
    config.validate()?;
    let opts = config.options();
    let (states, mut metrics) = match config.algorithm {
        Algorithm::Sssp => {
            let program = Sssp::new(config.source.expect("validated"));
            execute(config.engine, &input.graph, &program, &opts)?
        }
        Algorithm::Rip => {
            let program = Rip::new(config.classes.expect("validated")).with_clamp_seeds(config.clamp_seeds);
            execute(config.engine, &input.graph, &program, &opts)?
        }
    };
    let run_id = config.run_id();
    metrics.run_id = run_id.clone();
    metrics.dataset = input.dataset.clone();

    fs::create_dir_all(&config.output).map_err(io_err(&config.output))?;
    let metrics_path = config.output.join(METRICS_FILE);
    let file = File::create(&metrics_path).map_err(io_err(&metrics_path))?;
    export_csv(std::slice::from_ref(&metrics), BufWriter::new(file))?;
    let states_path = config.output.join(STATES_FILE);
    fs::write(&states_path, states).map_err(io_err(&states_path))?;
    Ok(RunSummary {
        run_id,
        metrics,
        metrics_path,
        states_path,
    })
}

fn execute<P: VertexProgram>(
    engine: EngineKind,
    graph: &Graph<P::Weight>,
    program: &P,
    opts: &RunOptions,
) -> Result<(String, RunMetrics), ExperimentError> {
    let RunOutput { states, metrics, .. } = run_engine(engine, graph, program, opts)?;
    Ok((render_states(&states), metrics))
}

/// One `vertexId<TAB>value` line per vertex, ascending by id.
pub fn render_states<T: fmt::Display>(states: &StateMap<T>) -> String {
    let mut out = String::new();
    for (id, state) in states {
        use std::fmt::Write as _;
        let _ = writeln!(out, "{id}\t{}", state.value);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run_id: String,
    pub engine: EngineKind,
    pub workers: usize,
    pub status: String,
    pub mean_iteration_ms: Option<f64>,
    pub error: String,
}

#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunSummary>,
    pub metrics_path: PathBuf,
    pub sweep_path: PathBuf,
}

impl SweepSummary {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status != "ok").count()
    }
}

/// Runs every (engine, workers) pair in `engines × workers`. Each run writes
/// into `<output>/<engine>-w<workers>/`; a combined `metrics.csv` and a
/// per-run status table `sweep.csv` go to `<output>`. Failed runs are
/// recorded and the sweep continues.
pub fn run_sweep(base: &RunConfig, workers: &[usize], engines: &[EngineKind]) -> Result<SweepSummary, ExperimentError> {
    if workers.is_empty() || engines.is_empty() {
        return Err(ExperimentError::Config("sweep needs at least one engine and one worker count".into()));
    }
    let input = prepare_input(base)?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &engine in engines {
        for &w in workers {
            let mut config = base.clone();
            config.engine = engine;
            config.workers = w;
            config.output = base.output.join(format!("{engine}-w{w}"));
            let run_id = config.run_id();
            match run_prepared(&config, &input) {
                Ok(summary) => {
                    rows.push(SweepRow {
                        run_id,
                        engine,
                        workers: w,
                        status: "ok".into(),
                        mean_iteration_ms: mean_iteration_time(&summary.metrics, false).ok(),
                        error: String::new(),
                    });
                    runs.push(summary);
                }
                Err(e) => {
                    log::error!("{engine} with {w} workers failed: {e}");
                    rows.push(SweepRow {
                        run_id,
                        engine,
                        workers: w,
                        status: format!("exit {}", e.exit_code()),
                        mean_iteration_ms: None,
                        error: e.to_string(),
                    });
                }
            }
        }
    }

    fs::create_dir_all(&base.output).map_err(io_err(&base.output))?;
    let metrics_path = base.output.join(METRICS_FILE);
    let all: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    let file = File::create(&metrics_path).map_err(io_err(&metrics_path))?;
    export_csv(&all, BufWriter::new(file))?;

    let sweep_path = base.output.join(SWEEP_FILE);
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(MetricsError::from)?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(&sweep_path)(e.into_error()))?;
    File::create(&sweep_path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(io_err(&sweep_path))?;
    Ok(SweepSummary {
        rows,
        runs,
        metrics_path,
        sweep_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_file(dir: &Path) -> PathBuf {
        let path = dir.join("chain.txt");
        fs::write(&path, "0 1\n1 2\n2 3\n").unwrap();
        path
    }

    #[test]
    fn generator_spec_parses_and_prints() {
        let spec: GeneratorSpec = "n=1000,avg=8,exp=2.5,seed=3".parse().unwrap();
        assert_eq!(spec, GeneratorSpec { n: 1000, avg_degree: 8.0, exponent: 2.5, seed: 3 });
        assert_eq!(spec.to_string().parse::<GeneratorSpec>().unwrap(), spec);
        assert_eq!("n=10".parse::<GeneratorSpec>().unwrap().avg_degree, 4.0);
        assert!("avg=3".parse::<GeneratorSpec>().is_err());
        assert!("n=10,colour=red".parse::<GeneratorSpec>().is_err());
        assert!("n=ten".parse::<GeneratorSpec>().is_err());
    }

    #[test]
    fn invalid_combinations_are_config_errors() {
        let g = GraphSource::Generate("n=10".parse().unwrap());
        let sssp = RunConfig::new(EngineKind::Bsp, Algorithm::Sssp, g.clone(), "out");
        assert_eq!(sssp.validate().unwrap_err().exit_code(), 2);
        let mut rip = RunConfig::new(EngineKind::Mr, Algorithm::Rip, g, "out");
        rip.classes = Some(1);
        assert!(rip.validate().is_err());
        rip.classes = Some(2);
        rip.source = Some(0);
        assert!(rip.validate().is_err());
        rip.source = None;
        rip.validate().unwrap();
    }

    #[test]
    fn run_id_ignores_output_dir_only() {
        let g = GraphSource::Generate("n=10".parse().unwrap());
        let mut a = RunConfig::new(EngineKind::Bsp, Algorithm::Sssp, g, "one");
        a.source = Some(0);
        let mut b = a.clone();
        b.output = "two".into();
        assert_eq!(a.run_id(), b.run_id());
        assert_eq!(a.run_id().len(), 16);
        b.workers = 2;
        assert_ne!(a.run_id(), b.run_id());
    }

    #[test]
    fn chain_run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new(
            EngineKind::Bsp,
            Algorithm::Sssp,
            GraphSource::File(chain_file(dir.path())),
            dir.path().join("out"),
        );
        config.source = Some(0);
        config.workers = 4;
        let summary = run_single(&config).unwrap();
        let states = fs::read_to_string(summary.states_path).unwrap();
        assert_eq!(states, "0\t0\n1\t1\n2\t2\n3\t3\n");
        let csv = fs::read_to_string(summary.metrics_path).unwrap();
        assert_eq!(csv.lines().count(), 1 + summary.metrics.iterations.len());
        assert!(csv.lines().skip(1).all(|l| l.starts_with(&summary.run_id)));
        assert!(csv.contains(",chain,"));
    }

    #[test]
    fn capacity_error_has_its_own_code() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = RunConfig::new(
            EngineKind::Bsp,
            Algorithm::Sssp,
            GraphSource::File(chain_file(dir.path())),
            dir.path().join("out"),
        );
        config.source = Some(0);
        config.memory_budget = Some(16);
        assert_eq!(run_single(&config).unwrap_err().exit_code(), 3);
        config.engine = EngineKind::Mr;
        run_single(&config).unwrap();
    }

    #[test]
    fn missing_input_is_a_config_error() {
        let mut config = RunConfig::new(
            EngineKind::Mr,
            Algorithm::Sssp,
            GraphSource::File("/nonexistent/graph.txt".into()),
            "out",
        );
        config.source = Some(0);
        let err = run_single(&config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/nonexistent/graph.txt"));
    }

    #[test]
    fn sweep_runs_the_product_and_records_failures() {
        let dir = tempfile::tempdir().unwrap();
        let mut base = RunConfig::new(
            EngineKind::Mr,
            Algorithm::Rip,
            GraphSource::Generate("n=300,avg=3,exp=2.2,seed=5".parse().unwrap()),
            dir.path().join("sweep"),
        );
        base.classes = Some(3);
        base.iterations = 3;
        let summary = run_sweep(&base, &[1, 2, 4], &EngineKind::ALL).unwrap();
        assert_eq!(summary.rows.len(), 9);
        assert_eq!(summary.failures(), 0);
        let first = fs::read(&summary.runs[0].states_path).unwrap();
        for run in &summary.runs {
            assert_eq!(fs::read(&run.states_path).unwrap(), first);
        }
        let csv = fs::read_to_string(&summary.metrics_path).unwrap();
        assert_eq!(csv.lines().count(), 1 + 9 * 3);

        base.memory_budget = Some(100);
        base.output = dir.path().join("budget");
        let summary = run_sweep(&base, &[2], &EngineKind::ALL).unwrap();
        assert_eq!(summary.failures(), 1);
        assert_eq!(summary.rows[2].status, "exit 3");
        let table = fs::read_to_string(summary.sweep_path).unwrap();
        assert_eq!(table.lines().count(), 4);
    }
}
