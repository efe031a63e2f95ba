//! Training the bias-aware classifier and the baselines behind one interface.

use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, BaselineKind, Fitted};
use crate::bias::{
    derive_forward_label_params, estimate_params, historical_mode, reverse_params_from_joints, BiasKind, BiasModel,
    BiasSpec, Direction, FlipParams, HistoricalPredictor, InputLayout,
};
use crate::data::{Dataset, GenConfig, Scenario, View};
use crate::fairness::{self, EvalReport, Thresholds};
use crate::net::{train, Checkpoint, LabelledRows, Mlp, TrainConfig};

use super::ExperimentError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classifier trained (or read) through the bias program of the scenario.
    Debias,
    /// Label-bias program over a single sensitive attribute of a multi-attribute dataset.
    DebiasOnly(String),
    Lower,
    Upper,
    Unawareness,
    Massaging,
    ErrorParity,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Debias => "debias".into(),
            Method::DebiasOnly(a) => format!("debias_only_{a}"),
            other => other.baseline().expect("baseline").name().into(),
        }
    }

    pub fn baseline(&self) -> Option<BaselineKind> {
        Some(match self {
            Method::Lower => BaselineKind::Lower,
            Method::Upper => BaselineKind::Upper,
            Method::Unawareness => BaselineKind::Unawareness,
            Method::Massaging => BaselineKind::Massaging,
            Method::ErrorParity => BaselineKind::ErrorParity,
            Method::Debias | Method::DebiasOnly(_) => return None,
        })
    }
}

/// How the bias parameters of the program are obtained.
#[derive(Debug, Clone)]
pub enum ParamSource {
    /// Derived exactly from the generator settings, with the scenario's bias
    /// probability replaced by the assumed one.
    Generator { config: GenConfig, beta_hat: f64 },
    /// Per-attribute label channels `(beta, noise)` of a multi-attribute generator.
    Chain(Vec<(f64, f64)>),
    /// Estimated from rows where both versions are known.
    Estimated,
}

/// Bias parameters for `scenario`; `rows` are the rows usable for estimation.
pub fn bias_spec(
    scenario: Scenario,
    source: &ParamSource,
    data: &Dataset,
    rows: &[usize],
    only: Option<&str>,
) -> Result<BiasSpec, ExperimentError> {
    let kind = match scenario {
        Scenario::Label => BiasKind::Label,
        Scenario::Measurement => BiasKind::Measurement,
        Scenario::Historical => BiasKind::Historical,
    };
    let spec = match (kind, source) {
        (BiasKind::Label, ParamSource::Generator { config, beta_hat }) => {
            BiasSpec::label(vec![("a".into(), derive_forward_label_params(*beta_hat, config.p_noise_y))])
        }
        (BiasKind::Label, ParamSource::Chain(stages)) => {
            let mut v = Vec::new();
            for (name, &(beta, noise)) in data.sensitive_names.iter().zip(stages) {
                if only.is_none_or(|o| o == name) {
                    v.push((name.clone(), derive_forward_label_params(beta, noise)));
                }
            }
            if v.is_empty() {
                return Err(ExperimentError::Config(format!("no sensitive attribute named {only:?}")));
            }
            BiasSpec::label(v)
        }
        (BiasKind::Label, ParamSource::Estimated) => {
            let est = estimate_params(&data.paired(None, rows), Direction::Forward)?;
            BiasSpec::label(vec![(data.sensitive_names[0].clone(), est.params)])
        }
        (_, ParamSource::Generator { config, beta_hat }) => {
            let mut assumed = config.clone();
            if kind == BiasKind::Measurement {
                assumed.beta_measure_r = *beta_hat;
                assumed.beta_measure_q = vec![*beta_hat; assumed.n_q];
            } else {
                assumed.beta_hist_r = *beta_hat;
                assumed.beta_hist_q = vec![*beta_hat; assumed.n_q];
            }
            let params = (0..=assumed.n_q)
                .map(|i| reverse_params_from_joints(&assumed.feature_channel_joints(i)))
                .collect::<Result<Vec<FlipParams>, _>>()?;
            BiasSpec::features(kind, params)
        }
        (_, ParamSource::Estimated) => {
            let params = (0..data.n_features())
                .map(|i| estimate_params(&data.paired(Some(i), rows), Direction::Reverse).map(|e| e.params))
                .collect::<Result<Vec<_>, _>>()?;
            BiasSpec::features(kind, params)
        }
        (_, ParamSource::Chain(_)) => {
            return Err(ExperimentError::Config("attribute chains only model label bias".into()));
        }
    };
    Ok(spec)
}

/// A trained model ready to score views.
#[derive(Debug, Clone)]
pub enum Predictor {
    Plain { mlp: Mlp, with_sensitive: bool, thresholds: Thresholds },
    Historical { predictor: HistoricalPredictor, spec: BiasSpec },
}

impl From<Fitted> for Predictor {
    fn from(f: Fitted) -> Self {
        Predictor::Plain {
            mlp: f.mlp,
            with_sensitive: f.with_sensitive,
            thresholds: f.thresholds,
        }
    }
}

impl Predictor {
    pub fn scores(&self, view: &View) -> Result<Vec<f64>, ExperimentError> {
        Ok(match self {
            Predictor::Plain { mlp, with_sensitive, .. } => mlp.predict(view.matrix(*with_sensitive).view())?.to_vec(),
            Predictor::Historical { predictor, .. } => predictor.predict(&view.inputs())?,
        })
    }

    pub fn thresholds(&self) -> Thresholds {
        match self {
            Predictor::Plain { thresholds, .. } => *thresholds,
            Predictor::Historical { .. } => Thresholds::default(),
        }
    }

    /// Checkpoint of the classifier with what is needed to score views again.
    pub fn to_checkpoint(&self, config: &TrainConfig) -> Result<Checkpoint, ExperimentError> {
        let (mlp, with_sensitive) = match self {
            Predictor::Plain { mlp, with_sensitive, .. } => (mlp, *with_sensitive),
            Predictor::Historical { predictor, .. } => {
                (&predictor.classifier, !predictor.model.layout.classifier_selectors.is_empty())
            }
        };
        let mut c = Checkpoint::new(mlp, config);
        c.metadata.insert("with_sensitive".into(), serde_json::to_value(with_sensitive)?);
        c.metadata.insert("thresholds".into(), serde_json::to_value(self.thresholds())?);
        if let Predictor::Historical { predictor, spec } = self {
            c.metadata.insert("historical_spec".into(), serde_json::to_value(spec)?);
            c.metadata.insert("layout".into(), serde_json::to_value(&predictor.model.layout)?);
        }
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Predictor, ExperimentError> {
        let mlp = c.network()?;
        let meta = |k: &str| c.metadata.get(k).cloned().unwrap_or(serde_json::Value::Null);
        let with_sensitive: bool = serde_json::from_value(meta("with_sensitive")).unwrap_or(false);
        let thresholds: Thresholds = serde_json::from_value(meta("thresholds")).unwrap_or_default();
        match c.metadata.get("historical_spec") {
            None => Ok(Predictor::Plain { mlp, with_sensitive, thresholds }),
            Some(spec) => {
                let spec: BiasSpec = serde_json::from_value(spec.clone())?;
                let layout: InputLayout = serde_json::from_value(meta("layout"))?;
                let model = BiasModel::from_spec(&spec, layout)?;
                Ok(Predictor::Historical {
                    predictor: historical_mode(mlp, model)?,
                    spec,
                })
            }
        }
    }

    pub fn evaluate(&self, view: &View) -> Result<EvalReport, ExperimentError> {
        let s = self.scores(view)?;
        Ok(fairness::evaluate(&s, &view.labels, &view.group(), self.thresholds())?)
    }
}

/// Trains the bias-aware classifier on the observed view of `scenario`.
/// `selectors` names the sensitive columns of the view; with
/// `sees_sensitive`, the classifier also gets them as inputs.
pub fn fit_debias(
    scenario: Scenario,
    spec: &BiasSpec,
    observed: &View,
    selectors: &[String],
    sees_sensitive: bool,
    config: &TrainConfig,
) -> Result<Predictor, ExperimentError> {
    let layout = InputLayout {
        selectors: selectors.to_vec(),
        n_features: observed.features.first().map_or(0, Vec::len),
        classifier_selectors: if sees_sensitive { (0..selectors.len()).collect() } else { vec![] },
    };
    let mut mlp = config.init_network(layout.classifier_dim());
    let model = BiasModel::from_spec(spec, layout)?;
    match scenario {
        Scenario::Label | Scenario::Measurement => {
            let sup = model.supervision(&observed.inputs(), &observed.labels)?;
            train(&mut mlp, &sup, config)?;
            Ok(Predictor::Plain {
                mlp,
                with_sensitive: sees_sensitive,
                thresholds: Thresholds::default(),
            })
        }
        Scenario::Historical => {
            let data = LabelledRows::new(observed.matrix(sees_sensitive), observed.labels.clone());
            train(&mut mlp, &data, config)?;
            Ok(Predictor::Historical {
                predictor: historical_mode(mlp, model)?,
                spec: spec.clone(),
            })
        }
    }
}

/// Trains `method` for one cell. `unbiased` is the unbiased training view
/// (upper baseline only); `spec` is required for the bias-aware methods.
pub fn fit_method(
    method: &Method,
    scenario: Scenario,
    spec: Option<&BiasSpec>,
    observed: &View,
    unbiased: &View,
    selectors: &[String],
    sees_sensitive: bool,
    config: &TrainConfig,
) -> Result<Predictor, ExperimentError> {
    match method.baseline() {
        Some(kind) => Ok(run_baseline(kind, observed, unbiased, config)?.into()),
        None => {
            let spec = spec.ok_or_else(|| ExperimentError::Config("bias parameters missing".into()))?;
            fit_debias(scenario, spec, observed, selectors, sees_sensitive, config)
        }
    }
}
