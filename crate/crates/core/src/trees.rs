//! CART classification and regression trees.
//!
//! Nodes live in a flat arena (`nodes[0]` is the root) so that very deep
//! trees neither overflow the stack during fitting nor hit recursion limits
//! when serialised. Splits use the rule `x[column] <= threshold` goes left,
//! with thresholds at midpoints between adjacent observed values.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_width, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    /// Each sample weighs `n / (2 * n_class)`.
    #[default]
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub class_weighting: ClassWeighting,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 1, class_weighting: ClassWeighting::Balanced }
    }
}

impl TreeParams {
    pub fn depth(d: usize) -> Self {
        Self { max_depth: Some(d), ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::InvalidInput("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidInput("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class 0/1 for classification, mean target for regression.
        value: f64,
        /// Weighted (failure, success) mass; zero for regression leaves.
        mass: [f64; 2],
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub kind: TreeKind,
    pub width: usize,
    pub nodes: Vec<Node>,
}

/// Weighted impurity of a node, scaled by its total weight.
#[derive(Clone, Copy, Default)]
struct Acc {
    w: f64,
    wy: f64,
    wyy: f64,
}

impl Acc {
    fn add(&mut self, y: f64, w: f64) {
        self.w += w;
        self.wy += w * y;
        self.wyy += w * y * y;
    }

    fn minus(self, o: Acc) -> Acc {
        Acc { w: self.w - o.w, wy: self.wy - o.wy, wyy: self.wyy - o.wyy }
    }

    fn impurity(self, criterion: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match criterion {
            // W * gini with class masses m1 = wy, m0 = w - wy
            Criterion::Gini => {
                let (m1, m0) = (self.wy, self.w - self.wy);
                (self.w - (m0 * m0 + m1 * m1) / self.w).max(0.0)
            }
            Criterion::Mse => (self.wyy - self.wy * self.wy / self.w).max(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    column: usize,
    threshold: f64,
    decrease: f64,
}

fn better(a: &Candidate, best: Option<&Candidate>) -> bool {
    match best {
        None => true,
        // relative slack so float noise never overrides the index tie-break
        Some(b) => a.decrease > b.decrease + 1e-12 * b.decrease.abs().max(1e-300),
    }
}

/// Best threshold on one column given `(value, target, weight)` triples
/// sorted by value.
fn scan(sorted: &[(f64, f64, f64)], criterion: Criterion, min_leaf: usize) -> Option<(f64, f64)> {
    let n = sorted.len();
    if n < 2 * min_leaf {
        return None;
    }
    let mut total = Acc::default();
    for &(_, y, w) in sorted {
        total.add(y, w);
    }
    let parent = total.impurity(criterion);
    if parent <= 0.0 {
        return None;
    }
    let floor = 1e-12 * parent;
    let mut left = Acc::default();
    let mut best: Option<(f64, f64)> = None;
    for i in 1..n {
        let (x_prev, y_prev, w_prev) = sorted[i - 1];
        left.add(y_prev, w_prev);
        let x = sorted[i].0;
        if x == x_prev || i < min_leaf || n - i < min_leaf {
            continue;
        }
        let decrease = parent - left.impurity(criterion) - total.minus(left).impurity(criterion);
        if decrease <= floor {
            continue;
        }
        if best.is_none_or(|(_, d)| decrease > d + 1e-12 * d) {
            let mut t = x_prev + (x - x_prev) / 2.0;
            if t >= x {
                t = x_prev;
            }
            best = Some((t, decrease));
        }
    }
    best
}

/// Threshold maximising the weighted impurity decrease on a single column,
/// or `None` when no split decreases impurity. For `Gini`, `y` holds 0/1.
pub fn best_split(col: &[f64], y: &[f64], weights: &[f64], criterion: Criterion) -> Option<(f64, f64)> {
    if col.len() != y.len() || col.len() != weights.len() {
        return None;
    }
    let mut sorted: Vec<(f64, f64, f64)> = col.iter().zip(y).zip(weights).map(|((&x, &y), &w)| (x, y, w)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    scan(&sorted, criterion, 1)
}

struct Fitter<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    w: &'a [f64],
    criterion: Criterion,
    params: TreeParams,
}

impl Fitter<'_> {
    fn best(&self, idx: &[usize]) -> Option<Candidate> {
        let found: Vec<Option<Candidate>> = (0..self.x.cols())
            .into_par_iter()
            .map(|j| {
                let mut sorted: Vec<(f64, f64, f64)> =
                    idx.iter().map(|&i| (self.x.get(i, j), self.y[i], self.w[i])).collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                scan(&sorted, self.criterion, self.params.min_samples_leaf).map(|(threshold, decrease)| Candidate {
                    column: j,
                    threshold,
                    decrease,
                })
            })
            .collect();
        let mut best: Option<Candidate> = None;
        for c in found.into_iter().flatten() {
            if better(&c, best.as_ref()) {
                best = Some(c);
            }
        }
        best
    }

    fn leaf(&self, idx: &[usize]) -> Node {
        let mut acc = Acc::default();
        for &i in idx {
            acc.add(self.y[i], self.w[i]);
        }
        match self.criterion {
            Criterion::Gini => {
                let mass = [acc.w - acc.wy, acc.wy];
                // equal mass predicts failure
                let value = if mass[1] > mass[0] { 1.0 } else { 0.0 };
                Node::Leaf { value, mass, samples: idx.len() }
            }
            Criterion::Mse => Node::Leaf { value: acc.wy / acc.w, mass: [0.0, 0.0], samples: idx.len() },
        }
    }

    fn fit(&self) -> Vec<Node> {
        let mut nodes = Vec::new();
        let all: Vec<usize> = (0..self.x.rows()).collect();
        nodes.push(self.leaf(&all));
        let mut stack = vec![(0usize, all, 0usize)];
        while let Some((slot, idx, depth)) = stack.pop() {
            if self.params.max_depth.is_some_and(|d| depth >= d) {
                continue;
            }
            let Some(c) = self.best(&idx) else { continue };
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x.get(i, c.column) <= c.threshold);
            let (li, ri) = (nodes.len(), nodes.len() + 1);
            nodes.push(self.leaf(&l));
            nodes.push(self.leaf(&r));
            nodes[slot] = Node::Split { column: c.column, threshold: c.threshold, left: li, right: ri };
            stack.push((ri, r, depth + 1));
            stack.push((li, l, depth + 1));
        }
        nodes
    }
}

fn check_input(x: &Matrix, n_targets: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Empty("training set"));
    }
    if n_targets != x.rows() {
        return Err(Error::InvalidInput("target count differs from row count".into()));
    }
    Ok(())
}

/// Sample weights for a binary label under the given weighting.
pub fn class_weights(y: &[bool], weighting: ClassWeighting) -> Vec<f64> {
    let n = y.len() as f64;
    let pos = y.iter().filter(|&&b| b).count() as f64;
    let neg = n - pos;
    y.iter()
        .map(|&b| match weighting {
            ClassWeighting::None => 1.0,
            ClassWeighting::Balanced => n / (2.0 * if b { pos } else { neg }),
        })
        .collect()
}

pub fn fit_classification_tree(x: &Matrix, y: &[bool], params: &TreeParams) -> Result<TreeModel> {
    params.validate()?;
    check_input(x, y.len())?;
    if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
        return Err(Error::SingleClass(y.len()));
    }
    let w = class_weights(y, params.class_weighting);
    let yf: Vec<f64> = y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let nodes = Fitter { x, y: &yf, w: &w, criterion: Criterion::Gini, params: *params }.fit();
    Ok(TreeModel { kind: TreeKind::Classification, width: x.cols(), nodes })
}

pub fn fit_regression_tree(x: &Matrix, y: &[f64], params: &TreeParams) -> Result<TreeModel> {
    params.validate()?;
    check_input(x, y.len())?;
    let w = vec![1.0; y.len()];
    let nodes = Fitter { x, y, w: &w, criterion: Criterion::Mse, params: *params }.fit();
    Ok(TreeModel { kind: TreeKind::Regression, width: x.cols(), nodes })
}

impl TreeModel {
    fn leaf(&self, x: &[f64]) -> Result<&Node> {
        check_width(self.width, x.len())?;
        if self.nodes.is_empty() {
            return Err(Error::Empty("tree"));
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { column, threshold, left, right } => {
                    i = if x[*column] <= *threshold { *left } else { *right }
                }
                leaf => return Ok(leaf),
            }
        }
    }

    /// Class (0.0 / 1.0) for classification trees, mean for regression.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self.leaf(x)? {
            Node::Leaf { value, .. } => Ok(*value),
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Weighted success share of the leaf for classification trees; the
    /// leaf mean for regression trees.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match (self.kind, self.leaf(x)?) {
            (TreeKind::Classification, Node::Leaf { mass, .. }) => {
                let total = mass[0] + mass[1];
                Ok(if total > 0.0 { mass[1] / total } else { 0.0 })
            }
            (_, Node::Leaf { value, .. }) => Ok(*value),
            _ => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes.get(i) {
                Some(Node::Split { left, right, .. }) => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
                _ => best = best.max(d),
            }
        }
        best
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Root split as (column, threshold), if any.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()? {
            Node::Split { column, threshold, .. } => Some((*column, *threshold)),
            Node::Leaf { .. } => None,
        }
    }

    /// Indented rule listing; `names` labels the columns.
    pub fn export_text(&self, names: &[String]) -> String {
        let mut out = String::new();
        let mut stack = vec![(0usize, 0usize, String::new())];
        while let Some((i, depth, prefix)) = stack.pop() {
            let pad = "|   ".repeat(depth);
            match &self.nodes[i] {
                Node::Split { column, threshold, left, right } => {
                    let name = names.get(*column).cloned().unwrap_or(format!("x[{column}]"));
                    let _ = writeln!(out, "{pad}{prefix}{name} <= {threshold}");
                    stack.push((*right, depth + 1, "else: ".into()));
                    stack.push((*left, depth + 1, String::new()));
                }
                Node::Leaf { value, mass, samples } => {
                    let _ = match self.kind {
                        TreeKind::Classification => writeln!(
                            out,
                            "{pad}{prefix}{} (failure {:.3}, success {:.3}, n={samples})",
                            if *value > 0.5 { "success" } else { "failure" },
                            mass[0],
                            mass[1]
                        ),
                        TreeKind::Regression => {
                            writeln!(out, "{pad}{prefix}value {value:.4} (n={samples})")
                        }
                    };
                }
            }
        }
        out
    }
}
