//! Nearest centroid, two-class linear discriminant analysis, and
//! least-squares linear regression.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_width, dot, squared_distance, Matrix};
use crate::rng;

fn class_split(x: &Matrix, y: &[bool]) -> Result<[Vec<usize>; 2]> {
    if x.rows() == 0 {
        return Err(Error::Empty("training set"));
    }
    if y.len() != x.rows() {
        return Err(Error::InvalidInput("label count differs from row count".into()));
    }
    let mut idx = [Vec::new(), Vec::new()];
    for (i, &b) in y.iter().enumerate() {
        idx[usize::from(b)].push(i);
    }
    if idx[0].is_empty() || idx[1].is_empty() {
        return Err(Error::SingleClass(y.len()));
    }
    Ok(idx)
}

fn mean_of(x: &Matrix, idx: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; x.cols()];
    for &i in idx {
        for (a, v) in m.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|a| *a /= idx.len() as f64);
    m
}

/// Class centroids; index 0 is failure, 1 is success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    pub centroids: [Vec<f64>; 2],
}

impl CentroidModel {
    pub fn fit(x: &Matrix, y: &[bool]) -> Result<Self> {
        let idx = class_split(x, y)?;
        Ok(Self { centroids: [mean_of(x, &idx[0]), mean_of(x, &idx[1])] })
    }

    /// Squared distance to the failure centroid minus that to the success
    /// centroid; positive means success.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_width(self.centroids[0].len(), x.len())?;
        Ok(squared_distance(x, &self.centroids[0]) - squared_distance(x, &self.centroids[1]))
    }

    /// Ties go to failure.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.decision(x)? > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdaSolver {
    /// Pseudo-inverse from the singular values of the class-centred data.
    /// Ignores shrinkage.
    #[default]
    Svd,
    /// Eigendecomposition of the (optionally shrunk) pooled covariance.
    Eigen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub means: [Vec<f64>; 2],
    pub priors: [f64; 2],
    pub shrinkage: f64,
    pub solver: LdaSolver,
    pub w: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LdaParams {
    pub solver: LdaSolver,
    pub shrinkage: f64,
    /// Class priors (failure, success); empirical frequencies when absent.
    pub priors: Option<[f64; 2]>,
}

/// Rows of `x` minus their class mean.
fn centred(x: &Matrix, y: &[bool], means: &[Vec<f64>; 2]) -> DMatrix<f64> {
    DMatrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) - means[usize::from(y[i])][j])
}

impl LdaModel {
    pub fn fit(x: &Matrix, y: &[bool], params: &LdaParams) -> Result<Self> {
        let idx = class_split(x, y)?;
        let lambda = params.shrinkage;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidInput(format!("shrinkage {lambda} outside [0, 1]")));
        }
        let (n, d) = (x.rows(), x.cols());
        let priors = match params.priors {
            Some(p) => {
                if p[0] <= 0.0 || p[1] <= 0.0 || ((p[0] + p[1]) - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput("priors must be positive and sum to 1".into()));
                }
                p
            }
            None => [idx[0].len() as f64 / n as f64, idx[1].len() as f64 / n as f64],
        };
        let means = [mean_of(x, &idx[0]), mean_of(x, &idx[1])];
        let delta = DVector::from_iterator(d, means[1].iter().zip(&means[0]).map(|(a, b)| a - b));
        let dof = (n as f64 - 2.0).max(1.0);
        let xc = centred(x, y, &means);

        let w = match params.solver {
            LdaSolver::Eigen => {
                let s = xc.transpose() * &xc / dof;
                let trace = s.trace();
                let shrunk = s * (1.0 - lambda) + DMatrix::identity(d, d) * (lambda * trace / d as f64);
                let eig = SymmetricEigen::new(shrunk);
                let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
                let tol = top * d as f64 * f64::EPSILON * 16.0;
                if top <= 0.0 || eig.eigenvalues.iter().any(|&v| v <= tol) {
                    return Err(Error::SingularCovariance);
                }
                let proj = eig.eigenvectors.transpose() * &delta;
                let scaled = proj.component_div(&eig.eigenvalues);
                eig.eigenvectors * scaled
            }
            LdaSolver::Svd => {
                let scaled = xc / dof.sqrt();
                let svd = scaled.svd(false, true);
                let v_t = svd.v_t.expect("requested V^T");
                let top = svd.singular_values.max();
                if top <= 0.0 {
                    return Err(Error::SingularCovariance);
                }
                let tol = top * (n.max(d) as f64) * f64::EPSILON;
                let mut proj = &v_t * &delta;
                for (k, s) in svd.singular_values.iter().enumerate() {
                    proj[k] = if *s > tol { proj[k] / (s * s) } else { 0.0 };
                }
                v_t.transpose() * proj
            }
        };
        let w: Vec<f64> = w.iter().copied().collect();
        let mid: Vec<f64> = means[0].iter().zip(&means[1]).map(|(a, b)| (a + b) / 2.0).collect();
        let b = -dot(&w, &mid) + (priors[1] / priors[0]).ln();
        Ok(Self { means, priors, shrinkage: lambda, solver: params.solver, w, b })
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_width(self.w.len(), x.len())?;
        Ok(dot(&self.w, x) + self.b)
    }

    /// Success iff the decision value is positive.
    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.decision(x)? > 0.0)
    }
}

pub const SHRINKAGE_GRID: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

/// Hold-out accuracy per shrinkage value; `None` where the fit was singular.
pub type ShrinkageTrace = Vec<(f64, Option<f64>)>;

/// Picks the shrinkage with the best accuracy on a seeded 20% hold-out
/// (first in grid order on ties, singular fits skipped) and refits the
/// eigen solver on all rows.
pub fn fit_lda_shrinkage_grid(
    x: &Matrix,
    y: &[bool],
    grid: &[f64],
    priors: Option<[f64; 2]>,
    seed: u64,
) -> Result<(LdaModel, ShrinkageTrace)> {
    class_split(x, y)?;
    let perm = rng::permutation(x.rows(), seed);
    let n_valid = (x.rows() / 5).max(1);
    let (valid, train) = perm.split_at(n_valid);
    let ytr: Vec<bool> = train.iter().map(|&i| y[i]).collect();
    let xtr = x.select_rows(train);
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lambda in grid {
        let params = LdaParams { solver: LdaSolver::Eigen, shrinkage: lambda, priors };
        let score = LdaModel::fit(&xtr, &ytr, &params).ok().map(|m| {
            let hits = valid.iter().filter(|&&i| m.predict(x.row(i)).unwrap() == y[i]).count();
            hits as f64 / valid.len() as f64
        });
        if let Some(s) = score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((lambda, s));
            }
        }
        scores.push((lambda, score));
    }
    let (lambda, _) = best.ok_or(Error::SingularCovariance)?;
    let model = LdaModel::fit(x, y, &LdaParams { solver: LdaSolver::Eigen, shrinkage: lambda, priors })?;
    Ok((model, scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// Least squares with an intercept; rank-deficient designs get the
    /// minimum-norm weights.
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Empty("training set"));
        }
        if y.len() != x.rows() {
            return Err(Error::InvalidInput("target count differs from row count".into()));
        }
        let (n, d) = (x.rows(), x.cols());
        let xm = x.column_means();
        let ym = y.iter().sum::<f64>() / n as f64;
        if d == 0 {
            return Ok(Self { weights: vec![], intercept: ym });
        }
        let a = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - xm[j]);
        let rhs = DVector::from_iterator(n, y.iter().map(|v| v - ym));
        let svd = a.svd(true, true);
        let top = svd.singular_values.max();
        let weights: Vec<f64> = if top == 0.0 {
            vec![0.0; d]
        } else {
            let eps = top * n.max(d) as f64 * f64::EPSILON;
            svd.solve(&rhs, eps).map_err(|e| Error::InvalidInput(e.to_string()))?.iter().copied().collect()
        };
        let intercept = ym - dot(&weights, &xm);
        Ok(Self { weights, intercept })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_width(self.weights.len(), x.len())?;
        Ok(dot(&self.weights, x) + self.intercept)
    }
}
