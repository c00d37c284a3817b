//! Kernel machines trained by sequential minimal optimisation.
//!
//! Both C-SVC and epsilon-SVR are cast as one dual problem
//!
//! ```text
//! min  f(a) = 1/2 a'Qa + p'a   s.t.  y'a = 0,  0 <= a_t <= C
//! ```
//!
//! with `Q_st = y_s y_t K(s, t)`. For SVC `p = -1` and `y` holds the labels;
//! for SVR the variables are `[a; a*]` over two copies of the data with
//! `y = [+1; -1]` and `p = [eps - z; eps + z]`. Working pairs are the
//! maximal violating pair, ties going to the lowest index, and the pair
//! update is the usual analytic two-variable step clipped to the box.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_width, dot, squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidInput(format!("rbf gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, z),
            KernelSpec::Rbf { gamma } => (-gamma * squared_distance(x, z)).exp(),
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    check_width(x.len(), z.len())?;
    Ok(spec.eval_unchecked(x, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub iterations: usize,
    pub converged: bool,
    /// Final maximal-violating-pair gap.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub kind: SvmKind,
    pub kernel: KernelSpec,
    pub c: f64,
    pub epsilon: Option<f64>,
    /// Support vectors, one per row.
    pub support: Matrix,
    /// `a_i y_i` for SVC, `a_i - a*_i` for SVR.
    pub coef: Vec<f64>,
    pub b: f64,
    pub meta: TrainMeta,
}

impl KernelModel {
    pub fn width(&self) -> usize {
        self.support.cols()
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_width(self.width(), x.len())?;
        let mut f = self.b;
        for (sv, c) in self.support.iter_rows().zip(&self.coef) {
            f += c * self.kernel.eval_unchecked(sv, x);
        }
        Ok(f)
    }

    /// SVC: success iff the decision value is positive.
    pub fn predict_class(&self, x: &[f64]) -> Result<bool> {
        Ok(self.decision(x)? > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoParams {
    pub tol: f64,
    pub max_iter: usize,
    /// Kernel row cache budget.
    pub cache_mb: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 1_000_000, cache_mb: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub c: f64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub smo: SmoParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub smo: SmoParams,
}

/// Default epsilon for yards and progress targets.
pub const EPSILON_YARDS: f64 = 0.1;
pub const EPSILON_PROGRESS: f64 = 0.01;

/// Kernel rows over the base points, least-recently-used eviction.
struct RowCache<'a> {
    x: &'a Matrix,
    kernel: KernelSpec,
    rows: Vec<Option<Vec<f64>>>,
    stamp: Vec<u64>,
    clock: u64,
    cached: usize,
    capacity: usize,
}

impl<'a> RowCache<'a> {
    fn new(x: &'a Matrix, kernel: KernelSpec, budget_mb: usize) -> Self {
        let n = x.rows();
        let per_row = (n * 8).max(1);
        let capacity = ((budget_mb << 20) / per_row).clamp(2, n.max(2));
        Self { x, kernel, rows: vec![None; n], stamp: vec![0; n], clock: 0, cached: 0, capacity }
    }

    fn ensure(&mut self, i: usize) {
        self.clock += 1;
        self.stamp[i] = self.clock;
        if self.rows[i].is_some() {
            return;
        }
        if self.cached >= self.capacity {
            let victim = (0..self.rows.len())
                .filter(|&k| self.rows[k].is_some())
                .min_by_key(|&k| self.stamp[k])
                .expect("cache non-empty");
            self.rows[victim] = None;
            self.cached -= 1;
        }
        let xi = self.x.row(i);
        let row = self.x.iter_rows().map(|xj| self.kernel.eval_unchecked(xi, xj)).collect();
        self.rows[i] = Some(row);
        self.cached += 1;
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].as_deref().expect("row ensured")
    }
}

/// A solved dual problem together with everything needed to audit it.
#[derive(Debug, Clone)]
pub struct KernelFit {
    pub model: KernelModel,
    /// Dual variables over the `l` problem variables.
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    /// Dual objective `-f(a)` recorded after every sweep of `l` updates
    /// and at termination. Non-decreasing.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktAudit {
    pub max_violation: f64,
    pub violators: usize,
    pub checked: usize,
}

impl KktAudit {
    pub fn passed(&self) -> bool {
        self.violators == 0
    }
}

impl KernelFit {
    /// Checks every dual variable's optimality condition against the
    /// model's own decision values (a fresh kernel sum, not the solver's
    /// gradient). With `r_t = y_t f(x_t) + p_t`: `a_t = 0` needs
    /// `r_t >= -tol`, `a_t = C` needs `r_t <= tol`, free needs `|r_t| <= tol`.
    pub fn kkt_audit(&self, x: &Matrix, tol: f64) -> KktAudit {
        let n = x.rows();
        let f: Vec<f64> = x.iter_rows().map(|row| self.model.decision(row).expect("training width")).collect();
        let c = self.model.c;
        let mut audit = KktAudit { max_violation: 0.0, violators: 0, checked: self.alpha.len() };
        for t in 0..self.alpha.len() {
            let r = self.y[t] * f[t % n] + self.p[t];
            let a = self.alpha[t];
            let violation = if a <= 0.0 {
                (-r).max(0.0)
            } else if a >= c {
                r.max(0.0)
            } else {
                r.abs()
            };
            audit.max_violation = audit.max_violation.max(violation);
            if violation > tol {
                audit.violators += 1;
            }
        }
        audit
    }
}

struct Problem<'a> {
    x: &'a Matrix,
    kernel: KernelSpec,
    y: Vec<f64>,
    p: Vec<f64>,
    c: f64,
    smo: SmoParams,
}

struct Solution {
    alpha: Vec<f64>,
    b: f64,
    iterations: usize,
    converged: bool,
    gap: f64,
    objective: Vec<f64>,
}

fn objective(alpha: &[f64], g: &[f64], p: &[f64]) -> f64 {
    // f = 1/2 a'(G + p) since G = Qa + p; report the maximisation form -f
    -0.5 * alpha.iter().zip(g.iter().zip(p)).map(|(a, (g, p))| a * (g + p)).sum::<f64>()
}

impl Problem<'_> {
    fn solve(&self) -> Solution {
        let n = self.x.rows();
        let l = self.y.len();
        let c = self.c;
        let y = &self.y;
        let mut alpha = vec![0.0; l];
        let mut g = self.p.clone();
        let mut cache = RowCache::new(self.x, self.kernel, self.smo.cache_mb);
        let qd: Vec<f64> = (0..l)
            .map(|t| {
                let xi = self.x.row(t % n);
                self.kernel.eval_unchecked(xi, xi)
            })
            .collect();
        let mut trace = vec![objective(&alpha, &g, &self.p)];
        let mut iterations = 0;
        let mut gap;
        let converged;

        loop {
            // maximal violating pair
            let (mut gmax, mut i) = (f64::NEG_INFINITY, usize::MAX);
            let (mut gmin, mut j) = (f64::INFINITY, usize::MAX);
            for t in 0..l {
                let v = -y[t] * g[t];
                let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
                let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
                if up && v > gmax {
                    gmax = v;
                    i = t;
                }
                if low && v < gmin {
                    gmin = v;
                    j = t;
                }
            }
            gap = gmax - gmin;
            if i == usize::MAX || j == usize::MAX || gap < self.smo.tol {
                converged = true;
                break;
            }
            if iterations >= self.smo.max_iter {
                converged = false;
                break;
            }
            iterations += 1;

            let (bi, bj) = (i % n, j % n);
            cache.ensure(bi);
            cache.ensure(bj);
            let kij = cache.row(bi)[bj];
            let qij = y[i] * y[j] * kij;
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let (mut ai, mut aj) = (old_i, old_j);

            if y[i] != y[j] {
                let quad = (qd[i] + qd[j] + 2.0 * qij).max(1e-12);
                let delta = (-g[i] - g[j]) / quad;
                let diff = ai - aj;
                ai += delta;
                aj += delta;
                if diff > 0.0 {
                    if aj < 0.0 {
                        aj = 0.0;
                        ai = diff;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = -diff;
                }
                if diff > 0.0 {
                    if ai > c {
                        ai = c;
                        aj = c - diff;
                    }
                } else if aj > c {
                    aj = c;
                    ai = c + diff;
                }
            } else {
                let quad = (qd[i] + qd[j] - 2.0 * qij).max(1e-12);
                let delta = (g[i] - g[j]) / quad;
                let sum = ai + aj;
                ai -= delta;
                aj += delta;
                if sum > c {
                    if ai > c {
                        ai = c;
                        aj = sum - c;
                    }
                } else if aj < 0.0 {
                    aj = 0.0;
                    ai = sum;
                }
                if sum > c {
                    if aj > c {
                        aj = c;
                        ai = sum - c;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = sum;
                }
            }
            alpha[i] = ai;
            alpha[j] = aj;

            let (di, dj) = (ai - old_i, aj - old_j);
            let (ri, rj) = (cache.row(bi), cache.row(bj));
            for t in 0..l {
                let b = t % n;
                g[t] += y[t] * (y[i] * ri[b] * di + y[j] * rj[b] * dj);
            }

            if iterations % l.max(1) == 0 {
                let obj = objective(&alpha, &g, &self.p);
                debug_assert!(
                    obj >= trace.last().copied().unwrap_or(f64::NEG_INFINITY) - 1e-9 * obj.abs().max(1.0),
                    "dual objective decreased"
                );
                trace.push(obj);
            }
        }
        trace.push(objective(&alpha, &g, &self.p));
        if !converged {
            log::warn!("SMO stopped after {iterations} updates with violation gap {gap:.3e} (tol {})", self.smo.tol);
        }

        // bias from free variables, else the midpoint of the feasible interval
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..l {
            let yg = y[t] * g[t];
            if alpha[t] >= c {
                if y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if alpha[t] <= 0.0 {
                if y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };

        Solution { alpha, b: -rho, iterations, converged, gap: gap.max(0.0), objective: trace }
    }
}

fn validate_common(x: &Matrix, n_targets: usize, c: f64, kernel: &KernelSpec, smo: &SmoParams) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::Empty("training set"));
    }
    if n_targets != x.rows() {
        return Err(Error::InvalidInput("target count differs from row count".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("C must be positive, got {c}")));
    }
    if smo.tol.is_nan() || smo.tol <= 0.0 {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    kernel.validate()
}

fn assemble(kind: SvmKind, x: &Matrix, problem: &Problem, sol: Solution, epsilon: Option<f64>) -> KernelFit {
    let n = x.rows();
    let mut coef_full = vec![0.0; n];
    for (t, a) in sol.alpha.iter().enumerate() {
        coef_full[t % n] += problem.y[t] * a;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| coef_full[i] != 0.0).collect();
    let model = KernelModel {
        kind,
        kernel: problem.kernel,
        c: problem.c,
        epsilon,
        support: x.select_rows(&keep),
        coef: keep.iter().map(|&i| coef_full[i]).collect(),
        b: sol.b,
        meta: TrainMeta { iterations: sol.iterations, converged: sol.converged, gap: sol.gap },
    };
    KernelFit { model, alpha: sol.alpha, y: problem.y.clone(), p: problem.p.clone(), objective: sol.objective }
}

pub fn fit_svc(x: &Matrix, y: &[bool], params: &SvcParams) -> Result<KernelFit> {
    validate_common(x, y.len(), params.c, &params.kernel, &params.smo)?;
    if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
        return Err(Error::SingleClass(y.len()));
    }
    let problem = Problem {
        x,
        kernel: params.kernel,
        y: y.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect(),
        p: vec![-1.0; y.len()],
        c: params.c,
        smo: params.smo,
    };
    let sol = problem.solve();
    Ok(assemble(SvmKind::Classification, x, &problem, sol, None))
}

pub fn fit_svr(x: &Matrix, z: &[f64], params: &SvrParams) -> Result<KernelFit> {
    validate_common(x, z.len(), params.c, &params.kernel, &params.smo)?;
    if params.epsilon.is_nan() || params.epsilon <= 0.0 {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let n = z.len();
    let mut y = vec![1.0; n];
    y.extend(std::iter::repeat_n(-1.0, n));
    let p: Vec<f64> = z.iter().map(|v| params.epsilon - v).chain(z.iter().map(|v| params.epsilon + v)).collect();
    let problem = Problem { x, kernel: params.kernel, y, p, c: params.c, smo: params.smo };
    let sol = problem.solve();
    Ok(assemble(SvmKind::Regression, x, &problem, sol, Some(params.epsilon)))
}

/// Exponent grids for C and gamma, both powers of two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_exponents: Vec<i32>,
    pub gamma_exponents: Vec<i32>,
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { c_exponents: (-5..=17).step_by(2).collect(), gamma_exponents: (-17..=4).step_by(2).collect(), folds: 5 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c_exponents.is_empty() || self.gamma_exponents.is_empty() {
            return Err(Error::InvalidInput("grid must be non-empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidInput("need at least two folds".into()));
        }
        Ok(())
    }

    /// Cells in grid order: gamma-major, then C.
    pub fn cells(&self) -> Vec<(i32, i32)> {
        self.gamma_exponents.iter().flat_map(|&g| self.c_exponents.iter().map(move |&c| (g, c))).collect()
    }
}

/// Table with one row per gamma and one column per C; `score(g, c)` gives
/// the cell value, `None` for failed cells.
pub fn write_grid_csv<W: Write>(mut out: W, grid: &GridSpec, score: impl Fn(i32, i32) -> Option<f64>) -> Result<()> {
    let header: Vec<String> = grid.c_exponents.iter().map(|c| format!("C=2^{c}")).collect();
    writeln!(out, "gamma,{}", header.join(","))?;
    for &g in &grid.gamma_exponents {
        let cells: Vec<String> =
            grid.c_exponents.iter().map(|&c| score(g, c).map(|v| format!("{v:.5}")).unwrap_or_default()).collect();
        writeln!(out, "2^{g},{}", cells.join(","))?;
    }
    Ok(())
}
