use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use fairlog::bias::{estimate_params, hoeffding_n, Direction, InputLayout};
use fairlog::data::{generate, generate_multi, Dataset, GenConfig, Manifest, MultiGenConfig, Role, Scenario};
use fairlog::experiments::{bias_spec, fit_method, run_sweep, ExperimentConfig, Method, ParamSource, Predictor};
use fairlog::logic::{evaluate, ground, parse, parse_atom, LeafSource, NeuralBindings, ParameterTable};
use fairlog::net::{Checkpoint, TrainConfig};

#[derive(Parser)]
#[command(name = "fairlog", version, about = "Bias-aware classification with probabilistic logic programs")]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (CSV plus `<out>.json` manifest).
    Gen {
        #[arg(long)]
        out: PathBuf,
        /// Generator settings: a generator JSON or a dataset manifest.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Bias type set by --beta.
        #[arg(long, default_value = "label")]
        scenario: Scenario,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Let the sensitive attribute influence the label.
        #[arg(long)]
        dependent: bool,
        /// Three sensitive attributes, each with its own label-bias stage.
        #[arg(long)]
        multi: bool,
    },
    /// Train one method on a dataset and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// debias, debias_only_<attribute>, lower, upper, unawareness, massaging, error_parity
        #[arg(long)]
        method: String,
        #[arg(long, default_value = "label")]
        scenario: Scenario,
        /// Assumed bias probability for the program (default: the generator's).
        #[arg(long)]
        beta_hat: Option<f64>,
        /// Training settings JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Give the bias-aware classifier the sensitive attributes as inputs.
        #[arg(long)]
        sees_sensitive: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a view of a dataset and print the metrics as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "label")]
        scenario: Scenario,
        /// train_biased, test_unbiased or test_biased (default: the scenario's test view).
        #[arg(long)]
        role: Option<String>,
    },
    /// Run an experiment sweep from a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Estimate flip probabilities from a CSV with both biased and unbiased columns.
    EstimateParams {
        #[arg(long)]
        data: PathBuf,
        /// `y` or a feature column name.
        #[arg(long, default_value = "y")]
        target: String,
        /// forward: P(observed | unbiased); reverse: P(unbiased | observed).
        #[arg(long, default_value = "forward")]
        direction: String,
    },
    /// Samples needed to estimate a probability within eps with confidence gamma.
    Hoeffding {
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.95)]
        gamma: f64,
    },
    /// Evaluate the queries of a program and print their probabilities.
    Infer {
        #[arg(long)]
        program: PathBuf,
        /// Query atom (default: the program's own queries).
        #[arg(long)]
        query: Option<String>,
        /// JSON object of parameter values: `{"p": 0.3, "q": {"1": 0.2}}`.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Comma-separated input vector: selector values, then features.
        #[arg(long)]
        input: Option<String>,
        /// Comma-separated selector names (columns at the front of --input).
        #[arg(long, default_value = "a")]
        selectors: String,
        /// Classifier behind `h`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_method(s: &str) -> Result<Method> {
    if let Some(a) = s.strip_prefix("debias_only_") {
        return Ok(Method::DebiasOnly(a.to_string()));
    }
    serde_json::from_value(json!(s)).map_err(|_| anyhow::anyhow!("unknown method `{s}`"))
}

fn parse_role(s: &str) -> Result<Role> {
    serde_json::from_value(json!(s)).map_err(|_| anyhow::anyhow!("unknown role `{s}`"))
}

/// Bias probability of `scenario` in generator settings.
fn generator_beta(g: &GenConfig, scenario: Scenario) -> f64 {
    match scenario {
        Scenario::Label => g.beta_label,
        Scenario::Measurement => g.beta_measure_r,
        Scenario::Historical => g.beta_hist_r,
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen {
            out,
            config,
            scenario,
            beta,
            rows,
            seed,
            dependent,
            multi,
        } => {
            let mut g = match &config {
                None => GenConfig::standard(3),
                Some(p) => {
                    let v: serde_json::Value = read_json(p)?;
                    if v.get("sensitive").is_some() {
                        let m: Manifest = serde_json::from_value(v)?;
                        m.generator.context("the manifest records no generator settings")?
                    } else {
                        serde_json::from_value(v)?
                    }
                }
            };
            if let Some(n) = rows {
                g.n_rows = n;
            }
            if let Some(s) = seed {
                g.seed = s;
            }
            if dependent {
                g = g.dependent();
            }
            if multi {
                let mut m = MultiGenConfig { base: g, ..Default::default() };
                if let Some(b) = beta {
                    m.beta = vec![b; m.attributes.len()];
                }
                let ds = generate_multi(&m)?;
                ds.save(&out, None)?;
                println!("wrote {} rows to {}", ds.len(), out.display());
                return Ok(ExitCode::SUCCESS);
            }
            if let Some(b) = beta {
                let base = ExperimentConfig {
                    scenario,
                    generator: g.clone(),
                    ..Default::default()
                };
                g = base.generator_for(b);
            }
            let ds = generate(&g)?;
            ds.save(&out, Some(&g))?;
            println!("wrote {} rows to {}", ds.len(), out.display());
        }
        Command::Train {
            data,
            method,
            scenario,
            beta_hat,
            config,
            seed,
            sees_sensitive,
            out,
        } => {
            let method = parse_method(&method)?;
            let mut train: TrainConfig = match &config {
                Some(p) => read_json(p)?,
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                train.seed = s;
            }
            let (ds, manifest) = Dataset::load(&data)?;
            let rows: Vec<usize> = (0..ds.len()).collect();
            let source = match manifest.generator {
                Some(g) => {
                    let beta_hat = beta_hat.unwrap_or_else(|| generator_beta(&g, scenario));
                    ParamSource::Generator { config: g, beta_hat }
                }
                None if beta_hat.is_some() => bail!("--beta-hat needs generator settings in the manifest"),
                None => ParamSource::Estimated,
            };
            let spec = match &method {
                Method::Debias => Some(bias_spec(scenario, &source, &ds, &rows, None)?),
                Method::DebiasOnly(a) => Some(bias_spec(scenario, &source, &ds, &rows, Some(a))?),
                _ => None,
            };
            let observed = ds.view(scenario, Role::TrainBiased, &rows)?;
            let unbiased = ds.view(scenario, Role::TestUnbiased, &rows)?;
            let model = fit_method(
                &method,
                scenario,
                spec.as_ref(),
                &observed,
                &unbiased,
                &ds.sensitive_names,
                sees_sensitive,
                &train,
            )?;
            let mut ckpt = model.to_checkpoint(&train)?;
            ckpt.metadata.insert("method".into(), json!(method.name()));
            ckpt.metadata.insert("scenario".into(), json!(scenario.name()));
            ckpt.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Eval {
            checkpoint,
            data,
            scenario,
            role,
        } => {
            let model = Predictor::from_checkpoint(&Checkpoint::load(&checkpoint)?)?;
            let (ds, _) = Dataset::load(&data)?;
            let role = match role {
                Some(r) => parse_role(&r)?,
                None => scenario.test_role(),
            };
            let rows: Vec<usize> = (0..ds.len()).collect();
            let report = model.evaluate(&ds.view(scenario, role, &rows)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep { config, output, workers } => {
            let mut cfg: ExperimentConfig = read_json(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let summary = run_sweep(&cfg)?;
            println!("{:<16} {:>6} {:>16} {:>16} {:>16}", "method", "x", "accuracy", "f1", "disparity");
            for a in &summary.aggregates {
                println!(
                    "{:<16} {:>6.3} {:>9.4}±{:.4} {:>9.4}±{:.4} {:>+9.4}±{:.4}",
                    a.method, a.x, a.accuracy_mean, a.accuracy_se, a.f1_mean, a.f1_se, a.disparity_mean, a.disparity_se
                );
            }
            println!("results in {}", cfg.output.display());
            if !summary.failed.is_empty() {
                eprintln!("{} cells failed", summary.failed.len());
                return Ok(ExitCode::from(2));
            }
        }
        Command::EstimateParams { data, target, direction } => {
            let (ds, _) = Dataset::load(&data)?;
            let direction = match direction.as_str() {
                "forward" => Direction::Forward,
                "reverse" => Direction::Reverse,
                other => bail!("unknown direction `{other}`"),
            };
            let t = if target == "y" {
                None
            } else {
                Some(ds.feature_names.iter().position(|n| *n == target).with_context(|| format!("no feature `{target}`"))?)
            };
            let rows: Vec<usize> = (0..ds.len()).collect();
            let est = estimate_params(&ds.paired(t, &rows), direction)?;
            let p = est.params;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "p1": p.neg_sensitive, "p2": p.neg_other, "p3": p.pos_sensitive, "p4": p.pos_other,
                    "counts": est.counts, "flips": est.flips, "unestimated": est.unestimated,
                }))?
            );
        }
        Command::Hoeffding { eps, gamma } => {
            let n = hoeffding_n(eps, gamma)?;
            println!("{n}");
            let exact = (2.0 / (1.0 - gamma)).ln() / (2.0 * eps * eps);
            println!("note: the exact bound is {exact:.2}, rounded up to {n}.");
            if (eps - 0.1).abs() < 1e-12 && (gamma - 0.95).abs() < 1e-12 {
                println!("note: 184 is the figure usually printed for these settings; it rounds the bound down.");
            }
        }
        Command::Infer {
            program,
            query,
            params,
            input,
            selectors,
            checkpoint,
        } => {
            let src = std::fs::read_to_string(&program).with_context(|| format!("reading {}", program.display()))?;
            let prog = parse(&src)?;
            let queries = match query {
                Some(q) => vec![parse_atom(&q)?],
                None => prog.queries.clone(),
            };
            if queries.is_empty() {
                bail!("no query given and the program has none");
            }
            let table = match &params {
                Some(p) => param_table(&read_json(p)?)?,
                None => ParameterTable::new(),
            };
            let x: Vec<f64> = match &input {
                Some(s) => s.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<_, _>>()?,
                None => Vec::new(),
            };
            let (bindings, mlp) = if input.is_some() {
                let sel: Vec<String> = selectors.split(',').map(|s| s.trim().to_string()).collect();
                if x.len() < sel.len() {
                    bail!("input has fewer columns than selectors");
                }
                let mlp = match &checkpoint {
                    Some(c) => Some(Checkpoint::load(c)?.network()?),
                    None => None,
                };
                let sees = mlp.as_ref().is_some_and(|m| m.input_dim() == x.len());
                let layout = InputLayout {
                    n_features: x.len() - sel.len(),
                    classifier_selectors: if sees { (0..sel.len()).collect() } else { vec![] },
                    selectors: sel,
                };
                (layout.bindings(), mlp)
            } else {
                (NeuralBindings::new(), None)
            };
            for q in &queries {
                let circuit = ground(&prog, q, &table, &bindings, &x)?;
                let mut missing = false;
                let probs = circuit.leaf_probs(|_, leaf| match (&leaf.source, &mlp) {
                    (LeafSource::Neural { features, .. }, Some(m)) => m.predict_one(features).unwrap_or(f64::NAN),
                    _ => {
                        missing = true;
                        f64::NAN
                    }
                });
                if missing {
                    bail!("the query needs a classifier; pass --checkpoint");
                }
                println!("{q}\t{}", evaluate(&circuit, &probs)?.probability);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn param_table(v: &serde_json::Value) -> Result<ParameterTable> {
    let obj = v.as_object().context("parameters must be a JSON object")?;
    let mut t = ParameterTable::new();
    let check = |name: &str, p: f64| {
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(anyhow::anyhow!("parameter {name} = {p} is not a probability"))
        }
    };
    for (name, val) in obj {
        match val {
            serde_json::Value::Number(n) => {
                let p = check(name, n.as_f64().context("not a number")?)?;
                t.set(name.clone(), 0, p);
            }
            serde_json::Value::Object(idx) => {
                for (i, n) in idx {
                    let i: i64 = i.parse().with_context(|| format!("index `{i}` of {name}"))?;
                    let p = check(name, n.as_f64().with_context(|| format!("{name}({i}) is not a number"))?)?;
                    t.set(name.clone(), i, p);
                }
            }
            _ => bail!("parameter {name} must be a number or an index map"),
        }
    }
    Ok(t)
}
