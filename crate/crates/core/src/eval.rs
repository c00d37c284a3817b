//! Metrics, k-fold evaluation and grid search.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold, Dataset, Target};
use crate::error::{Error, Result};
use crate::kernel::{GridSpec, KernelSpec, SmoParams, SvcParams, SvrParams};
use crate::model::{ModelSpec, Pipeline, Recipe};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

impl ClassificationReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let n = (tp + fp + tn + fn_) as f64;
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        Self {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio((tp + tn) as f64, n),
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn classification_report(y_true: &[bool], y_pred: &[bool]) -> Result<ClassificationReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!("{} labels but {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    Ok(ClassificationReport::from_counts(tp, fp, tn, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

pub fn regression_report(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!("{} targets but {} predictions", y_true.len(), y_pred.len())));
    }
    if y_true.is_empty() {
        return Err(Error::Empty("targets"));
    }
    let n = y_true.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = p - t;
        abs += e.abs();
        sq += e * e;
    }
    Ok(RegressionReport { mae: abs / n, rmse: (sq / n).sqrt(), n: y_true.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evaluation {
    Classification(ClassificationReport),
    Regression(RegressionReport),
}

impl Evaluation {
    /// Selection score, higher is better: accuracy, or negative MAE.
    pub fn score(&self) -> f64 {
        match self {
            Evaluation::Classification(r) => r.accuracy,
            Evaluation::Regression(r) => -r.mae,
        }
    }
}

pub fn evaluate(model: &Pipeline, ds: &Dataset, target: Target) -> Result<Evaluation> {
    if target.is_classification() {
        let pred = ds.x.iter_rows().map(|r| model.predict_class(r)).collect::<Result<Vec<_>>>()?;
        Ok(Evaluation::Classification(classification_report(&ds.success, &pred)?))
    } else {
        let pred = ds.x.iter_rows().map(|r| model.predict_value(r)).collect::<Result<Vec<_>>>()?;
        Ok(Evaluation::Regression(regression_report(&ds.target_values(target), &pred)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<Evaluation>,
    /// Unweighted mean of the fold scores.
    pub mean_score: f64,
    /// Fold-mean of every reported metric.
    pub mean: Evaluation,
}

fn mean_evaluation(folds: &[Evaluation]) -> Evaluation {
    let k = folds.len() as f64;
    match folds[0] {
        Evaluation::Classification(_) => {
            let mut m = ClassificationReport::from_counts(0, 0, 0, 0);
            for f in folds {
                if let Evaluation::Classification(r) = f {
                    m.tp += r.tp;
                    m.fp += r.fp;
                    m.tn += r.tn;
                    m.fn_ += r.fn_;
                    m.accuracy += r.accuracy / k;
                    m.precision += r.precision / k;
                    m.recall += r.recall / k;
                    m.f1 += r.f1 / k;
                }
            }
            Evaluation::Classification(m)
        }
        Evaluation::Regression(_) => {
            let mut m = RegressionReport { mae: 0.0, rmse: 0.0, n: 0 };
            for f in folds {
                if let Evaluation::Regression(r) = f {
                    m.mae += r.mae / k;
                    m.rmse += r.rmse / k;
                    m.n += r.n;
                }
            }
            Evaluation::Regression(m)
        }
    }
}

/// k-fold evaluation with an arbitrary fitting function. Folds run in
/// parallel; results keep fold order.
pub fn cross_validate_with<F>(fit: F, ds: &Dataset, target: Target, k: usize, seed: u64) -> Result<CvResult>
where
    F: Fn(&Dataset) -> Result<Pipeline> + Sync,
{
    let folds = kfold(ds.len(), k, seed)?;
    let folds = folds
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let annotate = |e| Error::Fold { fold: i, source: Box::new(e) };
            let model = fit(&ds.subset(&f.train)).map_err(annotate)?;
            evaluate(&model, &ds.subset(&f.valid), target).map_err(annotate)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_score = folds.iter().map(Evaluation::score).sum::<f64>() / folds.len() as f64;
    Ok(CvResult { mean: mean_evaluation(&folds), folds, mean_score })
}

pub fn cross_validate(recipe: &Recipe, ds: &Dataset, target: Target, k: usize, seed: u64) -> Result<CvResult> {
    cross_validate_with(|train| recipe.fit(train, target), ds, target, k, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub label: String,
    pub recipe: Recipe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub recipe: Recipe,
    pub fold_scores: Vec<f64>,
    pub mean_score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub cells: Vec<CellResult>,
    /// Index of the best cell; the first in grid order wins ties.
    pub best: Option<usize>,
    /// Rows actually used after subsampling.
    pub rows_used: usize,
    pub cap: Option<usize>,
}

impl GridSearchResult {
    pub fn best_cell(&self) -> Option<&CellResult> {
        self.best.map(|i| &self.cells[i])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "label,mean_score,error")?;
        for c in &self.cells {
            let score = c.mean_score.map(|s| s.to_string()).unwrap_or_default();
            let err = c.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            writeln!(out, "{},{score},{err}", c.label)?;
        }
        Ok(())
    }
}

/// Evaluates every cell by k-fold cross-validation on the same folds.
/// Failing cells are recorded and skipped when picking the best.
pub fn grid_search(
    cells: &[GridCell],
    ds: &Dataset,
    target: Target,
    k: usize,
    seed: u64,
    cap: Option<usize>,
) -> Result<GridSearchResult> {
    if cells.is_empty() {
        return Err(Error::Empty("grid"));
    }
    let capped;
    let ds = match cap {
        Some(c) if ds.len() > c => {
            capped = ds.cap(c, seed);
            &capped
        }
        _ => ds,
    };
    // validates k against n once, so every cell fails or succeeds on its own
    kfold(ds.len(), k, seed)?;
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|cell| match cross_validate(&cell.recipe, ds, target, k, seed) {
            Ok(cv) => CellResult {
                label: cell.label.clone(),
                recipe: cell.recipe.clone(),
                fold_scores: cv.folds.iter().map(Evaluation::score).collect(),
                mean_score: Some(cv.mean_score),
                error: None,
            },
            Err(e) => {
                log::warn!("grid cell {} failed: {e}", cell.label);
                CellResult {
                    label: cell.label.clone(),
                    recipe: cell.recipe.clone(),
                    fold_scores: vec![],
                    mean_score: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in results.iter().enumerate() {
        if let Some(s) = c.mean_score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    Ok(GridSearchResult { cells: results, best: best.map(|(i, _)| i), rows_used: ds.len(), cap })
}

/// RBF cells over a C x gamma grid, gamma-major. Regression targets use
/// SVR with `epsilon`.
pub fn rbf_grid_cells(grid: &GridSpec, target: Target, epsilon: f64, smo: SmoParams, scale: bool) -> Vec<GridCell> {
    grid.cells()
        .into_iter()
        .map(|(g, c)| {
            let kernel = KernelSpec::Rbf { gamma: 2f64.powi(g) };
            let c_val = 2f64.powi(c);
            let spec = if target.is_classification() {
                ModelSpec::Svm(SvcParams { c: c_val, kernel, smo })
            } else {
                ModelSpec::Svr(SvrParams { c: c_val, epsilon, kernel, smo })
            };
            GridCell { label: format!("gamma=2^{g} C=2^{c}"), recipe: Recipe { scale, ..Recipe::new(spec) } }
        })
        .collect()
}

/// Score table with gamma rows and C columns for a result produced from
/// [`rbf_grid_cells`] over the same grid.
pub fn write_rbf_table<W: Write>(out: W, grid: &GridSpec, result: &GridSearchResult) -> Result<()> {
    let n_c = grid.c_exponents.len();
    crate::kernel::write_grid_csv(out, grid, |g, c| {
        let gi = grid.gamma_exponents.iter().position(|&v| v == g)?;
        let ci = grid.c_exponents.iter().position(|&v| v == c)?;
        result.cells.get(gi * n_c + ci)?.mean_score
    })
}

/// One row per method, columns shaped like the method comparison tables.
pub fn write_comparison_csv<W: Write>(mut out: W, rows: &[(String, Evaluation)]) -> Result<()> {
    let classification = rows.iter().any(|(_, e)| matches!(e, Evaluation::Classification(_)));
    if classification {
        writeln!(out, "method,accuracy,precision,recall,f1")?;
    } else {
        writeln!(out, "method,mae,rmse")?;
    }
    for (name, e) in rows {
        match e {
            Evaluation::Classification(r) => {
                writeln!(out, "{name},{:.6},{:.6},{:.6},{:.6}", r.accuracy, r.precision, r.recall, r.f1)?
            }
            Evaluation::Regression(r) => writeln!(out, "{name},{:.6},{:.6}", r.mae, r.rmse)?,
        }
    }
    Ok(())
}
