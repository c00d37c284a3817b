//! Exploratory statistics: per-column ANOVA F-scores against the success
//! label, and principal component analysis.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{check_width, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub column: String,
    /// `+inf` when the groups are internally constant but differ.
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScoreTable {
    /// Sorted by `f` descending; equal scores keep column order.
    pub rows: Vec<FeatureScore>,
}

impl FeatureScoreTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "column,f_value")?;
        for r in &self.rows {
            writeln!(out, "{},{}", r.column, r.f)?;
        }
        Ok(())
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.column == column).map(|r| r.f)
    }
}

/// Mean that is exact for constant inputs, so a constant group has a
/// within-group sum of squares of exactly zero.
fn mean(xs: &[f64]) -> f64 {
    match xs.first() {
        Some(&first) if xs.iter().all(|&x| x == first) => first,
        _ => xs.iter().sum::<f64>() / xs.len() as f64,
    }
}

/// One-way ANOVA F statistic for two groups.
pub fn f_statistic(a: &[f64], b: &[f64]) -> f64 {
    let n = (a.len() + b.len()) as f64;
    let (ma, mb) = (mean(a), mean(b));
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let m = mean(&all);
    let between = a.len() as f64 * (ma - m).powi(2) + b.len() as f64 * (mb - m).powi(2);
    let within: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
    if within == 0.0 {
        return if ma == mb { 0.0 } else { f64::INFINITY };
    }
    // K = 2 groups: between / (K - 1) over within / (N - K)
    between / (within / (n - 2.0))
}

/// F-score of every column of `x` against a binary label.
pub fn anova_columns(x: &Matrix, labels: &[bool], names: &[String]) -> Result<FeatureScoreTable> {
    check_width(x.cols(), names.len())?;
    if labels.len() != x.rows() {
        return Err(Error::InvalidInput("label count differs from row count".into()));
    }
    if x.rows() < 3 {
        return Err(Error::InvalidInput("ANOVA needs at least three samples".into()));
    }
    let positives = labels.iter().filter(|&&b| b).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass(labels.len()));
    }
    let mut rows: Vec<FeatureScore> = (0..x.cols())
        .map(|j| {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (i, &l) in labels.iter().enumerate() {
                if l {
                    a.push(x.get(i, j))
                } else {
                    b.push(x.get(i, j))
                }
            }
            FeatureScore { column: names[j].clone(), f: f_statistic(&a, &b) }
        })
        .collect();
    rows.sort_by(|p, q| q.f.total_cmp(&p.f));
    Ok(FeatureScoreTable { rows })
}

pub fn anova_f(ds: &Dataset) -> Result<FeatureScoreTable> {
    anova_columns(&ds.x, &ds.success, ds.schema.columns())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// One orthonormal direction per row, by decreasing variance.
    pub components: Matrix,
    /// Sample variance along each component.
    pub variances: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.rows()
    }

    /// Coordinates of each row of `x` on the first `k` components.
    pub fn project(&self, x: &Matrix, k: usize) -> Result<Matrix> {
        check_width(self.mean.len(), x.cols())?;
        if k == 0 || k > self.n_components() {
            return Err(Error::InvalidInput(format!("k = {k} outside 1..={}", self.n_components())));
        }
        let mut out = Matrix::zeros(x.rows(), k);
        for (i, row) in x.iter_rows().enumerate() {
            let centered: Vec<f64> = row.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
            for c in 0..k {
                out.set(i, c, crate::matrix::dot(&centered, self.components.row(c)));
            }
        }
        Ok(out)
    }

    /// Maps component coordinates back to feature space.
    pub fn back_project(&self, z: &Matrix) -> Result<Matrix> {
        let k = z.cols();
        if k > self.n_components() {
            return Err(Error::WidthMismatch { expected: self.n_components(), got: k });
        }
        let d = self.mean.len();
        let mut out = Matrix::zeros(z.rows(), d);
        for i in 0..z.rows() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for c in 0..k {
                let s = z.get(i, c);
                for (o, v) in row.iter_mut().zip(self.components.row(c)) {
                    *o += s * v;
                }
            }
        }
        Ok(out)
    }
}

/// Principal components from the singular values of the centred data.
pub fn pca_fit(x: &Matrix) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 || d == 0 {
        return Err(Error::InvalidInput("PCA needs at least two rows and one column".into()));
    }
    let mean = x.column_means();
    let centered = DMatrix::from_fn(n, d, |i, j| x.get(i, j) - mean[j]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let variances: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].powi(2) / (n - 1) as f64).collect();
    let total: f64 = variances.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut components = Matrix::zeros(order.len(), d);
    for (r, &i) in order.iter().enumerate() {
        let row = components.row_mut(r);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = v_t[(i, j)];
        }
        // sign convention: the largest-magnitude entry is positive
        let pivot = row.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
    let ratios = variances.iter().map(|v| v / total).collect();
    Ok(PcaModel { mean, components, variances, ratios })
}

pub fn write_projection_csv<W: Write>(mut out: W, z: &Matrix, labels: Option<&[bool]>) -> Result<()> {
    let header: Vec<String> = (1..=z.cols()).map(|c| format!("pc{c}")).collect();
    write!(out, "{}", header.join(","))?;
    writeln!(out, "{}", if labels.is_some() { ",success" } else { "" })?;
    for (i, row) in z.iter_rows().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        write!(out, "{}", cells.join(","))?;
        match labels {
            Some(l) => writeln!(out, ",{}", u8::from(l[i]))?,
            None => writeln!(out)?,
        }
    }
    Ok(())
}
