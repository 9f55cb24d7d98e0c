//! Sparse logistic regression on tabular data with cross-validated tuning.
//!
//! Dataset files are CSV: the first column holds `±1` labels, the remaining
//! columns one feature per graph node. A header row is detected by a
//! non-numeric first field and skipped.

use std::io::Read;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};

use crate::error::{invalid, Error, Result};
use crate::exec::{map_indexed, trial_rng, Execution};
use crate::graph::{Graph, Support, WgmParams};
use crate::loss::{Instance, LogisticParams};
use crate::metrics::{auc, balanced_error, kfold_split, mean, std_dev};
use crate::report::{Report, Row};
use crate::solver::{solve, ArmijoParams, Loss, Method, SolverConfig, StepSize, LOGISTIC_MAX_EPOCHS};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Array1<f64>,
}

impl Dataset {
    pub fn instance(&self) -> Result<Instance> {
        Instance::new(self.features.clone(), self.labels.clone())
    }
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_dataset(file, &path.display().to_string())
}

pub fn parse_dataset(input: impl Read, origin: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { path: origin.into(), line, msg: e.to_string() }
        })?;
        let line = record.position().map_or(index + 1, |p| p.line() as usize);
        let err = |msg: String| Error::Parse { path: origin.into(), line, msg };
        let first = record.get(0).unwrap_or("");
        if index == 0 && first.parse::<f64>().is_err() {
            continue;
        }
        if record.len() < 2 {
            return Err(err("expected a label and at least one feature".into()));
        }
        match width {
            None => width = Some(record.len() - 1),
            Some(w) if w != record.len() - 1 => {
                return Err(err(format!("{} features, expected {w}", record.len() - 1)))
            }
            Some(_) => {}
        }
        let label: f64 = first
            .parse()
            .map_err(|_| err(format!("label {first:?} is not a number")))?;
        if label != 1.0 && label != -1.0 {
            return Err(err(format!("label {first:?} is not ±1")));
        }
        labels.push(label);
        for (col, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| err(format!("column {}: {field:?} is not a number", col + 1)))?;
            if !v.is_finite() {
                return Err(err(format!("column {}: non-finite value", col + 1)));
            }
            values.push(v);
        }
    }
    let Some(p) = width else {
        return invalid(format!("{origin}: no data rows"));
    };
    let features = Array2::from_shape_vec((labels.len(), p), values)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(Dataset { features, labels: Array1::from(labels) })
}

/// Centers each column and scales it to unit sample standard deviation.
/// Constant columns become zero.
pub fn zscore(features: &mut Array2<f64>) {
    for mut col in features.axis_iter_mut(Axis(1)) {
        let values: Vec<f64> = col.to_vec();
        let mu = mean(&values);
        let sd = std_dev(&values);
        if sd > 0.0 {
            col.mapv_inplace(|v| (v - mu) / sd);
        } else {
            col.fill(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockChoice {
    /// One block: `b = m`.
    Full,
    /// Two blocks: `b = m / 2`.
    Half,
}

impl BlockChoice {
    pub fn block_size(self, m: usize) -> usize {
        match self {
            BlockChoice::Full => m,
            BlockChoice::Half => (m / 2).max(1),
        }
    }

    fn code(self) -> f64 {
        match self {
            BlockChoice::Full => 1.0,
            BlockChoice::Half => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifySpec {
    pub sparsities: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub blocks: Vec<BlockChoice>,
    pub folds: usize,
    pub inner_folds: usize,
    pub components: usize,
    pub max_epochs: usize,
    pub methods: Vec<Method>,
    pub standardize: bool,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ClassifySpec {
    fn default() -> Self {
        Self {
            sparsities: (10..=100).step_by(5).collect(),
            lambdas: vec![1e-3, 1e-4],
            blocks: vec![BlockChoice::Full, BlockChoice::Half],
            folds: 5,
            inner_folds: 5,
            components: 1,
            max_epochs: LOGISTIC_MAX_EPOCHS,
            methods: Method::ALL.to_vec(),
            standardize: true,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub sparsity: usize,
    pub lambda: f64,
    pub block: BlockChoice,
}

/// Fits `method` with Armijo steps on `train` and returns the coefficients.
pub fn fit_logistic(
    train: &Instance,
    graph: &Graph,
    method: Method,
    hyper: &Hyper,
    components: usize,
    max_epochs: usize,
    seed: u64,
) -> Result<Array1<f64>> {
    let p = train.dim();
    let wgm = WgmParams::new(hyper.sparsity.min(p), components, f64::INFINITY)?;
    let mut config = SolverConfig::new(method, p, wgm, hyper.block.block_size(train.len()))?;
    config.step = StepSize::Armijo(ArmijoParams::default());
    config.max_epochs = max_epochs;
    config.seed = seed;
    let loss = Loss::Logistic(LogisticParams::new(hyper.lambda, 1.0)?);
    Ok(solve(train, &loss, &config, graph)?.final_x)
}

pub fn scores(inst: &Instance, x: &Array1<f64>) -> Vec<f64> {
    inst.design.dot(x).to_vec()
}

pub fn predictions(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| if s >= 0.0 { 1.0 } else { -1.0 }).collect()
}

fn complement(m: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; m];
    for &i in fold {
        held[i] = true;
    }
    (0..m).filter(|&i| !held[i]).collect()
}

/// Best hyperparameters by mean validation AUC; ties go to smaller `s`, then
/// smaller `λ`, then the earlier block choice.
fn select(grid: &[Hyper], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        let (a, b) = (scores[i], scores[best]);
        let better = a > b
            || (a == b
                && (grid[i].sparsity, grid[i].lambda) < (grid[best].sparsity, grid[best].lambda));
        if better {
            best = i;
        }
    }
    best
}

struct FoldOutcome {
    hyper: Hyper,
    auc: f64,
    balanced_error: f64,
    support_size: usize,
}

pub fn run_classification(data: &Dataset, graph: &Graph, spec: &ClassifySpec, config_text: &str) -> Result<Report> {
    let started = Instant::now();
    let (m, p) = data.features.dim();
    if graph.num_nodes() != p {
        return invalid(format!("graph has {} nodes but the data has {p} features", graph.num_nodes()));
    }
    if spec.sparsities.is_empty() || spec.lambdas.is_empty() || spec.blocks.is_empty() || spec.methods.is_empty() {
        return invalid("empty tuning grid");
    }
    let mut features = data.features.clone();
    if spec.standardize {
        zscore(&mut features);
    }
    let full = Instance::new(features, data.labels.clone())?;
    full.check_labels()?;

    let outer = kfold_split(m, spec.folds, &mut trial_rng(spec.seed, 0))?;
    let mut inner = Vec::with_capacity(outer.len());
    for (k, fold) in outer.iter().enumerate() {
        let train = complement(m, fold);
        inner.push(kfold_split(train.len(), spec.inner_folds, &mut trial_rng(spec.seed, k as u64 + 1))?);
    }
    let grid: Vec<Hyper> = spec
        .sparsities
        .iter()
        .flat_map(|&sparsity| {
            spec.lambdas.iter().flat_map(move |&lambda| {
                spec.blocks.iter().map(move |&block| Hyper { sparsity, lambda, block })
            })
        })
        .collect();

    let mut report = Report::new(spec.seed, config_text);
    report.note("kind", "classification");
    report.note("samples", m);
    report.note("features", p);

    for &method in &spec.methods {
        // Validation AUC for every (outer fold, grid point, inner fold).
        let per_fold = grid.len() * spec.inner_folds;
        let val = map_indexed(outer.len() * per_fold, spec.execution, |job| {
            let (k, rest) = (job / per_fold, job % per_fold);
            let (g, j) = (rest / spec.inner_folds, rest % spec.inner_folds);
            let train_idx = complement(m, &outer[k]);
            let train = full.subset(&train_idx);
            let inner_val = &inner[k][j];
            let fit_set = train.subset(&complement(train_idx.len(), inner_val));
            let held = train.subset(inner_val);
            fit_logistic(&fit_set, graph, method, &grid[g], spec.components, spec.max_epochs, spec.seed)
                .and_then(|x| auc(&scores(&held, &x), held.targets.as_slice().unwrap()))
                .unwrap_or(f64::NAN)
        });
        let outcomes = map_indexed(outer.len(), spec.execution, |k| -> Result<FoldOutcome> {
            let mean_auc: Vec<f64> = (0..grid.len())
                .map(|g| {
                    let start = k * per_fold + g * spec.inner_folds;
                    let v = mean(&val[start..start + spec.inner_folds]);
                    if v.is_nan() { f64::NEG_INFINITY } else { v }
                })
                .collect();
            let hyper = grid[select(&grid, &mean_auc)];
            let train = full.subset(&complement(m, &outer[k]));
            let test = full.subset(&outer[k]);
            let x = fit_logistic(&train, graph, method, &hyper, spec.components, spec.max_epochs, spec.seed)?;
            let s = scores(&test, &x);
            let labels = test.targets.as_slice().unwrap();
            Ok(FoldOutcome {
                hyper,
                auc: auc(&s, labels).unwrap_or(f64::NAN),
                balanced_error: balanced_error(&predictions(&s), labels)?,
                support_size: Support::of_nonzeros(x.as_slice().unwrap()).len(),
            })
        });
        let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        let mut push = |parameter: &str, point: f64, metric: &str, value: f64, stddev: f64| {
            report.rows.push(Row {
                experiment: "classification".into(),
                parameter: parameter.into(),
                point,
                epoch: None,
                solver: method.name().into(),
                metric: metric.into(),
                value,
                stddev,
            });
        };
        for (k, o) in outcomes.iter().enumerate() {
            let k = k as f64;
            push("fold", k, "auc", o.auc, 0.0);
            push("fold", k, "balanced_error", o.balanced_error, 0.0);
            push("fold", k, "support_size", o.support_size as f64, 0.0);
            push("fold", k, "selected_sparsity", o.hyper.sparsity as f64, 0.0);
            push("fold", k, "selected_lambda", o.hyper.lambda, 0.0);
            push("fold", k, "selected_blocks", o.hyper.block.code(), 0.0);
        }
        let col = |f: fn(&FoldOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };
        for (metric, values) in [
            ("auc", col(|o| o.auc)),
            ("balanced_error", col(|o| o.balanced_error)),
            ("support_size", col(|o| o.support_size as f64)),
        ] {
            push("mean", 0.0, metric, mean(&values), std_dev(&values));
        }
    }
    report.sort();
    report.wall_time = started.elapsed();
    Ok(report)
}
