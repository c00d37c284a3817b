//! One fit/predict surface over every model family.

use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, Target};
use crate::encode::MinMaxScaler;
use crate::error::{Error, Result};
use crate::kernel::{self, KernelModel, SvcParams, SvmKind, SvrParams};
use crate::linear::{self, CentroidModel, LdaModel, LdaParams, LinearModel};
use crate::matrix::{check_width, Matrix};
use crate::neural::{self, Head, MlpConfig, MlpModel};
use crate::trees::{self, TreeKind, TreeModel, TreeParams};

/// Always predicts the same value; used for baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub width: usize,
    pub value: f64,
    pub classifier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Model {
    Tree(TreeModel),
    Centroid(CentroidModel),
    Lda(LdaModel),
    Linear(LinearModel),
    Kernel(KernelModel),
    Mlp(MlpModel),
    Constant(ConstantModel),
}

impl Model {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Tree(_) => "tree",
            Model::Centroid(_) => "centroid",
            Model::Lda(_) => "lda",
            Model::Linear(_) => "linreg",
            Model::Kernel(k) if k.kind == SvmKind::Classification => "svm",
            Model::Kernel(_) => "svr",
            Model::Mlp(_) => "mlp",
            Model::Constant(_) => "constant",
        }
    }

    pub fn is_classifier(&self) -> bool {
        match self {
            Model::Tree(t) => t.kind == TreeKind::Classification,
            Model::Centroid(_) | Model::Lda(_) => true,
            Model::Linear(_) => false,
            Model::Kernel(k) => k.kind == SvmKind::Classification,
            Model::Mlp(m) => m.head == Head::Sigmoid,
            Model::Constant(c) => c.classifier,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            Model::Tree(t) => t.width,
            Model::Centroid(c) => c.centroids[0].len(),
            Model::Lda(l) => l.w.len(),
            Model::Linear(l) => l.weights.len(),
            Model::Kernel(k) => k.width(),
            Model::Mlp(m) => m.width(),
            Model::Constant(c) => c.width,
        }
    }

    /// Regression estimate, or for classifiers a score that orders plays by
    /// how strongly success is predicted (decision value, share or
    /// probability depending on the family).
    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Model::Tree(t) => t.score(x),
            Model::Centroid(c) => c.decision(x),
            Model::Lda(l) => l.decision(x),
            Model::Linear(l) => l.predict(x),
            Model::Kernel(k) => k.decision(x),
            Model::Mlp(m) => m.forward(x),
            Model::Constant(c) => {
                check_width(c.width, x.len())?;
                Ok(c.value)
            }
        }
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<bool> {
        if !self.is_classifier() {
            return Err(Error::TargetMismatch { kind: self.kind_name().into(), target: Target::Success.to_string() });
        }
        match self {
            Model::Tree(t) => Ok(t.predict(x)? > 0.5),
            Model::Centroid(c) => c.predict(x),
            Model::Lda(l) => l.predict(x),
            Model::Kernel(k) => k.predict_class(x),
            Model::Mlp(m) => m.predict_class(x),
            Model::Constant(c) => {
                check_width(c.width, x.len())?;
                Ok(c.value > 0.5)
            }
            Model::Linear(_) => unreachable!("regressor rejected above"),
        }
    }
}

/// A model plus the input transform it was trained behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<MinMaxScaler>,
}

impl Pipeline {
    pub fn width(&self) -> usize {
        self.scaler.as_ref().map_or(self.model.width(), |s| s.width())
    }

    fn prepare<'a>(&self, x: &'a [f64]) -> Result<std::borrow::Cow<'a, [f64]>> {
        match &self.scaler {
            Some(s) => Ok(std::borrow::Cow::Owned(s.transform_row(x)?)),
            None => Ok(std::borrow::Cow::Borrowed(x)),
        }
    }

    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        self.model.predict_value(&self.prepare(x)?)
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<bool> {
        self.model.predict_class(&self.prepare(x)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree(TreeParams),
    Centroid,
    Lda(LdaParams),
    /// Shrinkage chosen on a hold-out from `grid`.
    LdaGrid {
        grid: Vec<f64>,
    },
    Linreg,
    Svm(SvcParams),
    Svr(SvrParams),
    Mlp(MlpConfig),
    /// Majority class or mean target.
    Constant,
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Centroid => "centroid",
            ModelSpec::Lda(_) | ModelSpec::LdaGrid { .. } => "lda",
            ModelSpec::Linreg => "linreg",
            ModelSpec::Svm(_) => "svm",
            ModelSpec::Svr(_) => "svr",
            ModelSpec::Mlp(_) => "mlp",
            ModelSpec::Constant => "constant",
        }
    }

    pub fn supports(&self, target: Target) -> bool {
        match self {
            ModelSpec::Tree(_) | ModelSpec::Mlp(_) | ModelSpec::Constant => true,
            ModelSpec::Centroid | ModelSpec::Lda(_) | ModelSpec::LdaGrid { .. } | ModelSpec::Svm(_) => {
                target.is_classification()
            }
            ModelSpec::Linreg | ModelSpec::Svr(_) => !target.is_classification(),
        }
    }
}

/// Everything needed to turn a dataset into a fitted pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub spec: ModelSpec,
    /// Min-max scale features before fitting.
    #[serde(default)]
    pub scale: bool,
    /// Balance classes by undersampling the training rows.
    #[serde(default)]
    pub undersample: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Recipe {
    pub fn new(spec: ModelSpec) -> Self {
        Self { spec, scale: false, undersample: false, seed: 0 }
    }

    pub fn fit(&self, ds: &Dataset, target: Target) -> Result<Pipeline> {
        if !self.spec.supports(target) {
            return Err(Error::TargetMismatch { kind: self.spec.name().into(), target: target.to_string() });
        }
        if ds.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let balanced;
        let ds = if self.undersample && target.is_classification() {
            balanced = dataset::undersample(ds, self.seed)?;
            &balanced
        } else {
            ds
        };
        let (x, scaler) = if self.scale {
            let s = MinMaxScaler::fit(&ds.x)?;
            (std::borrow::Cow::Owned(s.transform(&ds.x)?), Some(s))
        } else {
            (std::borrow::Cow::Borrowed(&ds.x), None)
        };
        let model = fit_model(&self.spec, &x, ds, target, self.seed)?;
        Ok(Pipeline { model, scaler })
    }
}

fn fit_model(spec: &ModelSpec, x: &Matrix, ds: &Dataset, target: Target, seed: u64) -> Result<Model> {
    let values = ds.target_values(target);
    let y = &ds.success;
    Ok(match spec {
        ModelSpec::Tree(p) if target.is_classification() => Model::Tree(trees::fit_classification_tree(x, y, p)?),
        ModelSpec::Tree(p) => Model::Tree(trees::fit_regression_tree(x, &values, p)?),
        ModelSpec::Centroid => Model::Centroid(CentroidModel::fit(x, y)?),
        ModelSpec::Lda(p) => Model::Lda(LdaModel::fit(x, y, p)?),
        ModelSpec::LdaGrid { grid } => Model::Lda(linear::fit_lda_shrinkage_grid(x, y, grid, None, seed)?.0),
        ModelSpec::Linreg => Model::Linear(LinearModel::fit(x, &values)?),
        ModelSpec::Svm(p) => Model::Kernel(kernel::fit_svc(x, y, p)?.model),
        ModelSpec::Svr(p) => Model::Kernel(kernel::fit_svr(x, &values, p)?.model),
        ModelSpec::Mlp(c) => Model::Mlp(
            neural::fit_mlp(x, &values, &MlpConfig { seed: c.seed ^ seed, ..*c }, target.is_classification())?.model,
        ),
        ModelSpec::Constant => {
            let value = if target.is_classification() {
                let (fails, succ) = ds.class_counts();
                f64::from(u8::from(succ > fails))
            } else {
                values.iter().sum::<f64>() / values.len() as f64
            };
            Model::Constant(ConstantModel { width: x.cols(), value, classifier: target.is_classification() })
        }
    })
}
