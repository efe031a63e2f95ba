use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::method::{bias_spec, fit_method, Method, ParamSource};
use super::{derive_seed, split_cv, ExperimentConfig, ExperimentError};
use crate::data::{generate, generate_multi, Dataset, Role};
use crate::fairness::EvalReport;

/// One unit of work: a dataset (true bias and seed), an assumed bias, and a fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub beta: f64,
    pub beta_hat: f64,
    pub seed: usize,
    pub fold: usize,
}

impl Cell {
    fn key(&self) -> String {
        format!("{}|{}|{}|{}", self.beta, self.beta_hat, self.seed, self.fold)
    }
}

/// One evaluated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub scenario: String,
    pub beta: f64,
    pub beta_hat: f64,
    pub fold: usize,
    pub seed: usize,
    pub n: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub disparity: f64,
    pub hard_disparity: f64,
    pub eo_gap: f64,
    pub pos_rate_1: f64,
    pub pos_rate_0: f64,
    pub tpr_1: f64,
    pub tpr_0: f64,
    pub fpr_1: f64,
    pub fpr_0: f64,
    pub n_1: usize,
    pub n_0: usize,
}

impl ResultRow {
    fn new(method: &Method, config: &ExperimentConfig, cell: &Cell, r: EvalReport) -> Self {
        ResultRow {
            method: method.name(),
            scenario: config.scenario.name().into(),
            beta: cell.beta,
            beta_hat: cell.beta_hat,
            fold: cell.fold,
            seed: cell.seed,
            n: r.n,
            accuracy: r.accuracy,
            f1: r.f1,
            disparity: r.disparity,
            hard_disparity: r.hard_disparity,
            eo_gap: r.eo_gap,
            pos_rate_1: r.pos_rate_1,
            pos_rate_0: r.pos_rate_0,
            tpr_1: r.tpr_1,
            tpr_0: r.tpr_0,
            fpr_1: r.fpr_1,
            fpr_0: r.fpr_0,
            n_1: r.n_1,
            n_0: r.n_0,
        }
    }

    fn cell(&self) -> Cell {
        Cell {
            beta: self.beta,
            beta_hat: self.beta_hat,
            seed: self.seed,
            fold: self.fold,
        }
    }
}

fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &beta in &config.betas {
        let hats = if config.beta_hats.is_empty() { vec![beta] } else { config.beta_hats.clone() };
        for beta_hat in hats {
            for seed in 0..config.seeds {
                for fold in 0..config.folds {
                    out.push(Cell { beta, beta_hat, seed, fold });
                }
            }
        }
    }
    out
}

/// Trains and evaluates every configured method on one cell.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<Vec<ResultRow>, ExperimentError> {
    let scenario = config.scenario;
    let data_seed = derive_seed(
        config.base_seed,
        &[scenario.name(), &cell.beta.to_string(), &cell.seed.to_string()],
    );
    let (data, source): (Dataset, ParamSource) = if let Some(path) = &config.data {
        (Dataset::load(path)?.0, ParamSource::Estimated)
    } else if let Some(mut multi) = config.multi_for(cell.beta) {
        multi.base.seed = data_seed;
        let assumed = config.multi_for(cell.beta_hat).expect("multi config");
        let stages = assumed.beta.iter().copied().zip(assumed.noise.iter().copied()).collect();
        (generate_multi(&multi)?, ParamSource::Chain(stages))
    } else {
        let mut g = config.generator_for(cell.beta);
        g.seed = data_seed;
        let data = generate(&g)?;
        (data, ParamSource::Generator { config: g, beta_hat: cell.beta_hat })
    };
    let folds = split_cv(data.len(), config.folds, data_seed)?;
    let test_rows = &folds[cell.fold];
    let train_rows: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != cell.fold)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    let mut train = config.train.clone();
    train.seed = derive_seed(data_seed, &["fold", &cell.fold.to_string()]);
    let observed = data.view(scenario, Role::TrainBiased, &train_rows)?;
    let unbiased = data.view(scenario, Role::TestUnbiased, &train_rows)?;
    let test = data.view(scenario, scenario.test_role(), test_rows)?;
    let mut rows = Vec::with_capacity(config.methods.len());
    for method in &config.methods {
        let spec = match method {
            Method::Debias => Some(bias_spec(scenario, &source, &data, &train_rows, None)?),
            Method::DebiasOnly(a) => Some(bias_spec(scenario, &source, &data, &train_rows, Some(a))?),
            _ => None,
        };
        let model = fit_method(
            method,
            scenario,
            spec.as_ref(),
            &observed,
            &unbiased,
            &data.sensitive_names,
            config.dependent,
            &train,
        )?;
        rows.push(ResultRow::new(method, config, cell, model.evaluate(&test)?));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
    /// Cells reused from an earlier run with the same config.
    pub resumed: usize,
    pub failed: Vec<(Cell, String)>,
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<Vec<ResultRow>, _>>()?)
}

/// Runs every cell of `config` (reusing finished cells of an interrupted run
/// with the same config), then writes `results.csv`, `summary.csv` and SVG plots.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepSummary, ExperimentError> {
    config.validate()?;
    let out = &config.output;
    fs::create_dir_all(out)?;
    let config_path = out.join("config.json");
    let results_path = out.join("results.csv");
    let same_config = match fs::read_to_string(&config_path) {
        Ok(text) => serde_json::from_str::<ExperimentConfig>(&text).ok().as_ref() == Some(config),
        Err(_) => false,
    };
    let mut previous = if same_config && results_path.exists() {
        read_results(&results_path)?
    } else {
        Vec::new()
    };
    fs::write(&config_path, serde_json::to_string_pretty(config)?)?;

    let n_methods = config.methods.len();
    let mut per_cell: BTreeMap<String, usize> = BTreeMap::new();
    for r in &previous {
        *per_cell.entry(r.cell().key()).or_default() += 1;
    }
    let done: HashSet<String> = per_cell.into_iter().filter(|(_, c)| *c == n_methods).map(|(k, _)| k).collect();
    previous.retain(|r| done.contains(&r.cell().key()));
    let all = cells(config);
    let todo: Vec<Cell> = all.iter().copied().filter(|c| !done.contains(&c.key())).collect();
    log::info!("{} cells, {} already finished", all.len(), all.len() - todo.len());

    let mut writer = csv::Writer::from_writer(File::create(&results_path)?);
    for r in &previous {
        writer.serialize(r)?;
    }
    writer.flush()?;

    let workers = if config.workers == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        config.workers
    }
    .min(todo.len().max(1));
    let next = AtomicUsize::new(0);
    let mut rows = previous;
    let mut failed = Vec::new();
    std::thread::scope(|scope| -> Result<(), ExperimentError> {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, todo) = (&next, &todo);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = todo.get(i) else { break };
                let result = run_cell(config, cell).map_err(|e| e.to_string());
                if tx.send((*cell, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (k, (cell, result)) in rx.into_iter().enumerate() {
            match result {
                Ok(cell_rows) => {
                    for r in &cell_rows {
                        writer.serialize(r)?;
                    }
                    writer.flush()?;
                    rows.extend(cell_rows);
                }
                Err(e) => {
                    log::error!("cell {cell:?} failed: {e}");
                    failed.push((cell, e));
                }
            }
            log::info!("finished {}/{} cells", k + 1, todo.len());
        }
        Ok(())
    })?;
    drop(writer);

    let order = |r: &ResultRow| {
        let m = config.methods.iter().position(|m| m.name() == r.method).unwrap_or(usize::MAX);
        (all.iter().position(|c| c.key() == r.cell().key()).unwrap_or(usize::MAX), m)
    };
    rows.sort_by_key(order);
    let mut writer = csv::Writer::from_writer(File::create(&results_path)?);
    for r in &rows {
        writer.serialize(r)?;
    }
    writer.flush()?;

    let by_hat = !config.beta_hats.is_empty();
    let aggregates = aggregate(&rows, by_hat);
    let mut w = csv::Writer::from_writer(OpenOptions::new().write(true).create(true).truncate(true).open(out.join("summary.csv"))?);
    for a in &aggregates {
        w.serialize(a)?;
    }
    w.flush()?;
    super::plot_results(&aggregates, if by_hat { "assumed bias probability" } else { "bias probability" }, out)?;
    Ok(SweepSummary {
        resumed: all.len() - todo.len(),
        rows,
        aggregates,
        failed,
    })
}

/// Mean and standard error of a metric over folds and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    /// Bias probability, or the assumed one when aggregating by it.
    pub x: f64,
    pub count: usize,
    pub accuracy_mean: f64,
    pub accuracy_se: f64,
    pub f1_mean: f64,
    pub f1_se: f64,
    pub disparity_mean: f64,
    pub disparity_se: f64,
    pub hard_disparity_mean: f64,
    pub hard_disparity_se: f64,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Groups rows by method and bias probability (`by_hat`: assumed bias probability).
pub fn aggregate(rows: &[ResultRow], by_hat: bool) -> Vec<Aggregate> {
    let mut methods: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let m = match methods.iter().position(|m| *m == r.method) {
            Some(i) => i,
            None => {
                methods.push(&r.method);
                methods.len() - 1
            }
        };
        let x = if by_hat { r.beta_hat } else { r.beta };
        // order-preserving key for non-negative floats
        groups.entry((m, x.to_bits())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((m, x), g)| {
            let col = |f: fn(&ResultRow) -> f64| mean_se(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (accuracy_mean, accuracy_se) = col(|r| r.accuracy);
            let (f1_mean, f1_se) = col(|r| r.f1);
            let (disparity_mean, disparity_se) = col(|r| r.disparity);
            let (hard_disparity_mean, hard_disparity_se) = col(|r| r.hard_disparity);
            Aggregate {
                method: methods[m].to_string(),
                x: f64::from_bits(x),
                count: g.len(),
                accuracy_mean,
                accuracy_se,
                f1_mean,
                f1_se,
                disparity_mean,
                disparity_se,
                hard_disparity_mean,
                hard_disparity_se,
            }
        })
        .collect()
}
