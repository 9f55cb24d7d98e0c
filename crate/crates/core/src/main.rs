use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use graph_stoiht::classify::{read_dataset, run_classification, BlockChoice, ClassifySpec};
use graph_stoiht::config::{parse_range_list, Config};
use graph_stoiht::exec::{init_pool, trial_rng, Execution, THREADS_ENV};
use graph_stoiht::experiment::{run_experiment, spec_from_config, ExperimentKind};
use graph_stoiht::graph::{grid_center, grid_graph, Graph, WgmParams};
use graph_stoiht::pcst::{solve_pcst, PcstInstance};
use graph_stoiht::projection::{head_projection, tail_projection, ProjectionConfig};
use graph_stoiht::report::{manifest_path_for, Report};
use graph_stoiht::solver::Method;
use graph_stoiht::synth::{save_instance, synth_instance, DesignScale, SynthSpec};
use graph_stoiht::{Error, Result};

#[derive(Parser)]
#[command(name = "graph-stoiht", version, about = "Graph-structured sparse recovery experiments")]
#[command(after_help = format!("The work-pool size is read from {THREADS_ENV}."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recovery probability against the number of observations.
    Recover(ExperimentArgs),
    /// Error curves over block size or learning rate, or required m under noise.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        args: ExperimentArgs,
    },
    /// Cross-validated sparse logistic regression on a CSV dataset.
    Classify(ClassifyArgs),
    /// Head or tail projection of a vector onto the graph model.
    Project(ProjectArgs),
    /// Prize-collecting Steiner forest on a graph.
    Pcst(PcstArgs),
    /// Writes a synthetic instance to a directory.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SweepKind {
    BlockSize,
    LearningRate,
    Noise,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjKind {
    Head,
    Tail,
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file ("p N" header, then "u v weight" lines).
    #[arg(long, conflicts_with = "grid")]
    graph: Option<PathBuf>,
    /// Grid graph as ROWSxCOLS.
    #[arg(long)]
    grid: Option<String>,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph> {
        match (&self.graph, &self.grid) {
            (Some(path), _) => Graph::read_edge_list(path),
            (None, Some(dims)) => {
                let (r, c) = parse_dims(dims)?;
                grid_graph(r, c)
            }
            (None, None) => Err(Error::InvalidArgument("pass --graph or --grid".into())),
        }
    }
}

fn parse_dims(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("grid must look like 16x16, got {text:?}"));
    let (r, c) = text.split_once('x').ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

/// Settings shared by `recover` and `sweep`. Flags override the config file.
#[derive(Args)]
struct ExperimentArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV report path; the manifest goes next to it. Prints to stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rows: Option<String>,
    #[arg(long)]
    cols: Option<String>,
    /// Edge-list file replacing the grid.
    #[arg(long)]
    graph: Option<String>,
    /// Fixed support file; turns `recover` into a benchmark-graph run.
    #[arg(long)]
    support: Option<String>,
    #[arg(long)]
    start: Option<String>,
    /// Sparsity levels, e.g. "8,20" or "8..=36:4".
    #[arg(long)]
    sparsity: Option<String>,
    /// Observation counts, e.g. "5..=250:5".
    #[arg(long)]
    m: Option<String>,
    /// Block sizes, or "min" for b = min(s, m).
    #[arg(long)]
    block_size: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    /// Solvers: graph-sto-iht, graph-iht, sto-iht, iht.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    trim: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    curve_epochs: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    noisy_threshold: Option<String>,
    /// "var" (variance 1/√m, default) or "std" (standard deviation 1/√m).
    #[arg(long)]
    design_scale: Option<String>,
    #[arg(long)]
    iid_sampling: bool,
    /// Run trials one after another instead of in the work pool.
    #[arg(long)]
    sequential: bool,
    /// Observations per validation instance for tuning b and η.
    #[arg(long)]
    validation_m: Option<String>,
    #[arg(long)]
    validation_trials: Option<String>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::read(path)?,
            None => Config::default(),
        };
        let flags: [(&str, &Option<String>); 21] = [
            ("rows", &self.rows),
            ("cols", &self.cols),
            ("graph", &self.graph),
            ("support", &self.support),
            ("start", &self.start),
            ("sparsity", &self.sparsity),
            ("m", &self.m),
            ("block_size", &self.block_size),
            ("eta", &self.eta),
            ("noise", &self.noise),
            ("methods", &self.methods),
            ("trials", &self.trials),
            ("trim", &self.trim),
            ("seed", &self.seed),
            ("max_epochs", &self.max_epochs),
            ("curve_epochs", &self.curve_epochs),
            ("threshold", &self.threshold),
            ("noisy_threshold", &self.noisy_threshold),
            ("design_scale", &self.design_scale),
            ("validation_m", &self.validation_m),
            ("validation_trials", &self.validation_trials),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v.clone());
            }
        }
        if self.iid_sampling {
            cfg.set("iid_sampling", "true");
        }
        if self.sequential {
            cfg.set("sequential", "true");
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ClassifyArgs {
    /// CSV with a ±1 label column followed by one column per graph node.
    #[arg(long)]
    data: PathBuf,
    /// Edge-list file over the feature indices.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sparsity: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// Block choices: "full" (b = m) and/or "half" (b = m/2).
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long)]
    inner_folds: Option<String>,
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Skip per-feature z-scoring.
    #[arg(long)]
    raw_features: bool,
    #[arg(long)]
    sequential: bool,
}

impl ClassifyArgs {
    fn spec(&self) -> Result<(ClassifySpec, Config)> {
        let mut cfg = match &self.config {
            Some(path) => Config::read(path)?,
            None => Config::default(),
        };
        for (key, value) in [
            ("sparsity", &self.sparsity),
            ("lambda", &self.lambda),
            ("blocks", &self.blocks),
            ("folds", &self.folds),
            ("inner_folds", &self.inner_folds),
            ("methods", &self.methods),
            ("max_epochs", &self.max_epochs),
            ("seed", &self.seed),
        ] {
            if let Some(v) = value {
                cfg.set(key, v.clone());
            }
        }
        let mut spec = ClassifySpec::default();
        if let Some(text) = cfg.raw("sparsity") {
            spec.sparsities = parse_range_list(text)?;
        }
        if let Some(v) = cfg.list::<f64>("lambda")? {
            spec.lambdas = v;
        }
        if let Some(v) = cfg.list::<String>("blocks")? {
            spec.blocks = v
                .iter()
                .map(|b| match b.as_str() {
                    "full" => Ok(BlockChoice::Full),
                    "half" => Ok(BlockChoice::Half),
                    other => Err(Error::InvalidArgument(format!("unknown block choice {other:?}"))),
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = cfg.list::<String>("methods")? {
            spec.methods = parse_methods(&v)?;
        }
        spec.folds = cfg.get_or("folds", spec.folds)?;
        spec.inner_folds = cfg.get_or("inner_folds", spec.inner_folds)?;
        spec.max_epochs = cfg.get_or("max_epochs", spec.max_epochs)?;
        spec.seed = cfg.get_or("seed", spec.seed)?;
        spec.standardize = !self.raw_features && cfg.get_or("standardize", true)?;
        if self.sequential || cfg.get_or("sequential", false)? {
            spec.execution = Execution::Sequential;
        }
        Ok((spec, cfg))
    }
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    names
        .iter()
        .map(|n| Method::parse(n).ok_or_else(|| Error::InvalidArgument(format!("unknown solver {n:?}"))))
        .collect()
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long, value_enum)]
    kind: ProjKind,
    #[command(flatten)]
    graph: GraphArgs,
    /// Vector file: numbers separated by whitespace, commas or newlines.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    sparsity: usize,
    #[arg(long, default_value_t = 1)]
    components: usize,
    /// Place the head window at the sparsity instead of p/2.
    #[arg(long)]
    head_at_sparsity: bool,
}

#[derive(Args)]
struct PcstArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// One prize per node: numbers separated by whitespace, commas or newlines.
    #[arg(long)]
    prizes: PathBuf,
    #[arg(long, default_value_t = 1)]
    components: usize,
    #[arg(long, default_value_t = 1.0)]
    cost_scale: f64,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 16)]
    rows: usize,
    #[arg(long, default_value_t = 16)]
    cols: usize,
    #[arg(long, default_value_t = 8)]
    sparsity: usize,
    #[arg(long, default_value_t = 180)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "var")]
    design_scale: String,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(tok.parse().map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: format!("bad number {tok:?}: {e}"),
            })?);
        }
    }
    Ok(out)
}

fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let manifest = manifest_path_for(path);
            report.write(path, &manifest)?;
            eprintln!("wrote {} and {}", path.display(), manifest.display());
        }
        None => {
            print!("{}", report.to_csv());
            eprint!("{}", report.manifest_text());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_pool();
    match cli.command {
        Command::Recover(args) => {
            let cfg = args.config()?;
            let kind = if cfg.contains("support") {
                ExperimentKind::BenchmarkGraphs
            } else {
                ExperimentKind::RecoveryCurve
            };
            let spec = spec_from_config(kind, &cfg)?;
            emit(&run_experiment(&spec, &cfg.canonical())?, args.out.as_deref())
        }
        Command::Sweep { kind, args } => {
            let cfg = args.config()?;
            let kind = match kind {
                SweepKind::BlockSize => ExperimentKind::BlockSize,
                SweepKind::LearningRate => ExperimentKind::LearningRate,
                SweepKind::Noise => ExperimentKind::Noise,
            };
            let spec = spec_from_config(kind, &cfg)?;
            emit(&run_experiment(&spec, &cfg.canonical())?, args.out.as_deref())
        }
        Command::Classify(args) => {
            let (spec, cfg) = args.spec()?;
            let data = read_dataset(&args.data)?;
            let graph = Graph::read_edge_list(&args.graph)?;
            let text = format!("data = {}\ngraph = {}\n{}", args.data.display(), args.graph.display(), cfg.canonical());
            emit(&run_classification(&data, &graph, &spec, &text)?, args.out.as_deref())
        }
        Command::Project(args) => {
            let graph = args.graph.load()?;
            let x = read_numbers(&args.input)?;
            let wgm = WgmParams::new(args.sparsity, args.components, f64::INFINITY)?;
            let result = match args.kind {
                ProjKind::Head => {
                    let cfg = if args.head_at_sparsity {
                        ProjectionConfig::head_at_sparsity(wgm)?
                    } else {
                        ProjectionConfig::head(graph.num_nodes(), wgm)?
                    };
                    head_projection(&x, &graph, &cfg)?
                }
                ProjKind::Tail => tail_projection(&x, &graph, &ProjectionConfig::tail(wgm)?)?,
            };
            let support: Vec<String> = result.support.indices().iter().map(usize::to_string).collect();
            println!("support = {}", support.join(","));
            println!("achieved_sparsity = {}", result.achieved_sparsity);
            println!("pcst_calls = {}", result.iterations_used);
            let captured: f64 = result.vector.iter().map(|v| v * v).sum();
            println!("captured_energy = {captured:.12e}");
            Ok(())
        }
        Command::Pcst(args) => {
            let graph = args.graph.load()?;
            let prizes = read_numbers(&args.prizes)?;
            let inst = PcstInstance {
                graph: &graph,
                prizes: &prizes,
                target_components: args.components,
                cost_scale: args.cost_scale,
            };
            let forest = solve_pcst(&inst)?;
            let nodes: Vec<String> = forest.nodes.indices().iter().map(usize::to_string).collect();
            let edges: Vec<String> = forest.edges.iter().map(usize::to_string).collect();
            println!("nodes = {}", nodes.join(","));
            println!("edges = {}", edges.join(","));
            println!("objective = {:.12e}", forest.objective);
            println!("penalty = {:.12e}", inst.penalty(&forest));
            Ok(())
        }
        Command::Gen(args) => {
            let graph = grid_graph(args.rows, args.cols)?;
            let design_scale = match args.design_scale.as_str() {
                "var" => DesignScale::VarInvSqrtM,
                "std" => DesignScale::StdInvSqrtM,
                other => return Err(Error::InvalidArgument(format!("design scale must be var or std, got {other:?}"))),
            };
            let spec = SynthSpec {
                graph: &graph,
                start: grid_center(args.rows, args.cols),
                sparsity: args.sparsity,
                num_obs: args.m,
                noise_norm: args.noise,
                design_scale,
            };
            let inst = synth_instance(&spec, &mut trial_rng(args.seed, 0))?;
            std::fs::create_dir_all(&args.out)?;
            save_instance(
                &args.out,
                &inst,
                &[
                    ("rows", args.rows.to_string()),
                    ("cols", args.cols.to_string()),
                    ("sparsity", args.sparsity.to_string()),
                    ("m", args.m.to_string()),
                    ("noise", args.noise.to_string()),
                    ("seed", args.seed.to_string()),
                    ("design_scale", args.design_scale.clone()),
                ],
            )?;
            std::fs::write(args.out.join("graph.txt"), graph.to_edge_list())?;
            eprintln!("wrote instance to {}", args.out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
