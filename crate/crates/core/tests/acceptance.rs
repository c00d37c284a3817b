//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines always
//! reach stdout.

#![allow(clippy::needless_range_loop)]

use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use gridiron::dataset::{ingest, ingest_str, Dataset, IngestOptions, Target};
use gridiron::encode::{decode, encode, nfl_schema};
use gridiron::eval::{classification_report, cross_validate, regression_report, Evaluation};
use gridiron::kernel::{fit_svc, fit_svr, KernelFit, KernelSpec, SmoParams, SvcParams, SvrParams};
use gridiron::labels::{label_play, progress};
use gridiron::linear::{CentroidModel, LdaModel, LdaParams, LdaSolver, LinearModel};
use gridiron::matrix::{dot, Matrix};
use gridiron::model::{ModelSpec, Recipe};
use gridiron::neural::{fit_mlp, grad_check, init_mlp, Activation, Head, Loss, MlpConfig};
use gridiron::playparse::{process_record, FilterOptions, PassLength, PlayFeatures, RawPlayRecord, Side};
use gridiron::serve::http::{router, AppState};
use gridiron::serve::{enumerate_candidates, BundleMeta, ModelBundle, ModelSet};
use gridiron::stats::{f_statistic, pca_fit};
use gridiron::synth::{synthesize, write_records, SynthSpec};
use gridiron::trees::{fit_classification_tree, fit_regression_tree, TreeParams};
use gridiron::{encode::NFL_TEAMS, rng};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn planted(n: usize, seed: u64) -> Dataset {
    let out = synthesize(&SynthSpec { n, ..SynthSpec::default() }, seed).unwrap();
    let mut buf = Vec::new();
    write_records(&mut buf, &out.records).unwrap();
    ingest_str(std::str::from_utf8(&buf).unwrap(), "planted", &IngestOptions::default()).unwrap().0
}

fn random_matrix(r: &mut impl Rng, n: usize, d: usize, lo: f64, hi: f64) -> Matrix {
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x.set(i, j, r.random_range(lo..hi));
        }
    }
    x
}

// ---------------------------------------------------------------- parser

const CORPUS: &str = include_str!("data/golden_corpus.jsonl");
const EXPECTED: &str = include_str!("data/golden_expected.jsonl");

fn parser_golden() -> Outcome {
    // the three printed feature examples, transcribed field by field
    struct Row {
        desc: &'static str,
        team: &'static str,
        opponent: &'static str,
        half: u8,
        time: u32,
        position: u32,
        down: u8,
        togo: u32,
        shotgun: bool,
        pass: bool,
        side: Side,
        passlen: PassLength,
        success: bool,
        yards: f64,
        progress: f64,
    }
    let rows = [
        Row {
            desc: "(9:56) M.Ryan pass short left to M.Jenkins to CAR 17 for 7 yards (T.Davis).",
            team: "ATL",
            opponent: "CAR",
            half: 2,
            time: 1496,
            position: 24,
            down: 2,
            togo: 10,
            shotgun: false,
            pass: true,
            side: Side::Left,
            passlen: PassLength::Short,
            success: false,
            yards: 7.0,
            progress: 0.49,
        },
        Row {
            desc: "(10:32) K.Moreno right tackle to OAK 27 for 1 yard (T.Kelly).",
            team: "DEN",
            opponent: "OAK",
            half: 1,
            time: 1532,
            position: 28,
            down: 2,
            togo: 1,
            shotgun: false,
            pass: false,
            side: Side::Right,
            passlen: PassLength::None,
            success: true,
            yards: 1.0,
            progress: 1.0,
        },
        Row {
            desc: "(:27) (No Huddle, Shotgun) K.Warner pass deep left to L.Fitzgerald for 26 yards, TOUCHDOWN.",
            team: "ARI",
            opponent: "HOU",
            half: 1,
            time: 27,
            position: 26,
            down: 1,
            togo: 10,
            shotgun: true,
            pass: true,
            side: Side::Left,
            passlen: PassLength::Deep,
            success: true,
            yards: 26.0,
            progress: 1.0,
        },
    ];
    let records: Vec<RawPlayRecord> = CORPUS.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    for row in &rows {
        let rec = records
            .iter()
            .find(|r| r.description == row.desc)
            .ok_or_else(|| format!("example missing from corpus: {}", row.desc))?;
        let p = process_record(rec, &FilterOptions::default()).map_err(|e| format!("{}: rejected {e:?}", row.desc))?;
        let f = &p.features;
        let want = PlayFeatures {
            team: row.team.into(),
            opponent: row.opponent.into(),
            half: row.half,
            time: row.time,
            position: row.position,
            down: row.down,
            togo: row.togo,
            shotgun: row.shotgun,
            pass: row.pass,
            side: row.side,
            passlen: row.passlen,
            qbrun: false,
        };
        ensure!(*f == want, "{}: features {f:?}", row.desc);
        let l = label_play(f, &p.outcome);
        ensure!(
            l.success == row.success && l.yards == row.yards && l.progress == row.progress,
            "{}: labels {l:?}",
            row.desc
        );
    }

    let expected: Vec<Value> = EXPECTED.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    ensure!(records.len() == 300 && expected.len() == 300, "corpus size {}", records.len());
    for (i, (rec, want)) in records.iter().zip(&expected).enumerate() {
        let got = match process_record(rec, &FilterOptions::default()) {
            Ok(p) => json!({
                "id": i + 1,
                "status": "relevant",
                "features": p.features,
                "outcome": p.outcome,
                "labels": label_play(&p.features, &p.outcome),
            }),
            Err(reason) => json!({"id": i + 1, "status": "rejected", "reason": reason}),
        };
        ensure!(got == *want, "line {}: got {got} want {want}", i + 1);
    }
    Ok(())
}

// -------------------------------------------------------------- progress

fn progress_formula() -> Outcome {
    ensure!(progress(2, 10, 7) == 0.49, "progress(2,10,7) = {}", progress(2, 10, 7));
    ensure!(progress(1, 10, 5) == 0.5, "progress(1,10,5) = {}", progress(1, 10, 5));
    ensure!(progress(2, 10, 5) == 0.25, "progress(2,10,5) = {}", progress(2, 10, 5));
    let mut r = rng::seeded(101);
    for _ in 0..100_000 {
        let down = r.random_range(1..=4u8);
        let togo = r.random_range(1..=99u32);
        let g = r.random_range(-30..=99i32);
        let (a, b) = (progress(down, togo, g), progress(down, togo, g + 1));
        ensure!(a <= b, "not monotone at ({down},{togo},{g}): {a} > {b}");
        ensure!((0.0..=1.0).contains(&a), "out of range at ({down},{togo},{g}): {a}");
        if down >= 3 {
            ensure!(a == 0.0 || a == 1.0, "down {down} gave {a}");
        }
    }
    Ok(())
}

// -------------------------------------------------------------- encoding

fn encoding_width() -> Outcome {
    let schema = nfl_schema();
    ensure!(schema.width() == 77, "width {}", schema.width());
    let col = |name: &str| schema.column_index(name).unwrap();
    let sides = [Side::Left, Side::Middle, Side::Right, Side::None];
    let mut r = rng::seeded(202);
    for _ in 0..10_000 {
        let pass = r.random_bool(0.5);
        let f = PlayFeatures {
            team: NFL_TEAMS[r.random_range(0..32)].into(),
            opponent: NFL_TEAMS[r.random_range(0..32)].into(),
            half: r.random_range(1..=2),
            time: r.random_range(0..=1800),
            position: r.random_range(1..=99),
            down: r.random_range(1..=4),
            togo: r.random_range(1..=99),
            shotgun: r.random_bool(0.5),
            pass,
            side: sides[r.random_range(0..4)],
            passlen: if pass { [PassLength::Short, PassLength::Deep][r.random_range(0..2)] } else { PassLength::None },
            qbrun: !pass && r.random_bool(0.2),
        };
        let v = encode(&f, &schema).map_err(|e| e.to_string())?;
        ensure!(v.len() == 77, "encoded length {}", v.len());
        let block = |prefix: &str| -> Vec<f64> {
            schema.columns().iter().zip(&v).filter(|(c, _)| c.starts_with(prefix)).map(|(_, x)| *x).collect()
        };
        for (prefix, want) in [
            ("team=", 1.0),
            ("opponent=", 1.0),
            ("side=", if f.side == Side::None { 0.0 } else { 1.0 }),
            ("passlen=", if pass { 1.0 } else { 0.0 }),
        ] {
            let b = block(prefix);
            ensure!(b.iter().all(|&x| x == 0.0 || x == 1.0), "{prefix} block not binary: {b:?}");
            ensure!(b.iter().sum::<f64>() == want, "{prefix} block sums to {}", b.iter().sum::<f64>());
        }
        ensure!(v[col(&format!("team={}", f.team))] == 1.0, "team hot bit misplaced");
        ensure!(v[col(&format!("opponent={}", f.opponent))] == 1.0, "opponent hot bit misplaced");
        ensure!(v[col("togo")] == f.togo as f64 && v[col("time")] == f.time as f64, "continuous block");
        let back = decode(&v, &schema).map_err(|e| e.to_string())?;
        ensure!(back == f, "decode mismatch: {back:?} vs {f:?}");
    }
    Ok(())
}

// --------------------------------------------------------------- metrics

fn metrics() -> Outcome {
    let mut r = rng::seeded(303);
    for _ in 0..100_000 {
        let n = r.random_range(1..200usize);
        let y: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
        let p: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
        let rep = classification_report(&y, &p).map_err(|e| e.to_string())?;
        let tp = y.iter().zip(&p).filter(|(a, b)| **a && **b).count();
        let tn = y.iter().zip(&p).filter(|(a, b)| !**a && !**b).count();
        ensure!(rep.tp == tp && rep.tn == tn && rep.n() == n, "counts {rep:?}");
        ensure!((rep.accuracy - (tp + tn) as f64 / n as f64).abs() < 1e-12, "accuracy {rep:?}");
        let harmonic = if rep.precision + rep.recall > 0.0 {
            2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
        } else {
            0.0
        };
        ensure!((rep.f1 - harmonic).abs() < 1e-12, "f1 identity {rep:?}");

        let t: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        let reg = regression_report(&t, &q).map_err(|e| e.to_string())?;
        ensure!(reg.rmse >= reg.mae - 1e-12, "rmse {} < mae {}", reg.rmse, reg.mae);
    }
    let y: Vec<bool> = (0..1000).map(|i| i % 10 < 3).collect();
    let rep = classification_report(&y, &[false; 1000]).map_err(|e| e.to_string())?;
    ensure!(
        (rep.accuracy - 0.70).abs() < 1e-12 && rep.precision == 0.0 && rep.recall == 0.0,
        "all-failure predictor {rep:?}"
    );
    Ok(())
}

// ----------------------------------------------------------------- trees

fn trees() -> Outcome {
    let ds = planted(10_000, 0);
    let togo = ds.schema.column_index("togo").unwrap();
    let deep = ds.schema.column_index("passlen=deep").unwrap();
    let c = fit_classification_tree(&ds.x, &ds.success, &TreeParams::depth(1)).map_err(|e| e.to_string())?;
    let (col, t) = c.root_split().ok_or("classification stump has no split")?;
    ensure!(col == togo && t > 7.0 && t < 8.0, "classification stump split {} at {t}", ds.schema.columns()[col]);

    let reg = fit_regression_tree(&ds.x, &ds.yards, &TreeParams::depth(1)).map_err(|e| e.to_string())?;
    let (col, _) = reg.root_split().ok_or("regression stump has no split")?;
    ensure!(col == deep, "regression stump split {}", ds.schema.columns()[col]);
    let mut q = vec![0.0; ds.width()];
    let low = reg.predict(&q).map_err(|e| e.to_string())?;
    q[deep] = 1.0;
    let high = reg.predict(&q).map_err(|e| e.to_string())?;
    ensure!((low - 5.3).abs() <= 0.3 && (high - 11.1).abs() <= 0.3, "leaf means {low:.3} / {high:.3}");

    // unlimited depth reproduces every training label on distinct rows
    let mut r = rng::seeded(404);
    for _ in 0..20 {
        let n = r.random_range(4..200);
        let x = random_matrix(&mut r, n, 3, -5.0, 5.0);
        let y: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let z: Vec<f64> = (0..n).map(|_| r.random_range(-9.0..9.0)).collect();
        if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
            continue;
        }
        let c = fit_classification_tree(&x, &y, &TreeParams::default()).map_err(|e| e.to_string())?;
        let g = fit_regression_tree(&x, &z, &TreeParams::default()).map_err(|e| e.to_string())?;
        for i in 0..n {
            ensure!((c.predict(x.row(i)).unwrap() == 1.0) == y[i], "classification tree missed row {i}");
            ensure!(g.predict(x.row(i)).unwrap() == z[i], "regression tree missed row {i}");
        }
    }
    Ok(())
}

// ---------------------------------------------------------- LDA / linear

fn lda_linear() -> Outcome {
    // class means (0,0) and (2,3); within-class deviations (±a,0), (0,±b)
    // scatter 2a², 2b² per class; pooled over n - 2 = 6 that is diag(4a²/6, 4b²/6)
    let (a2, b2) = (1.5, 150.0);
    let (a, b) = (f64::sqrt(a2), f64::sqrt(b2));
    let mut rows = vec![];
    let mut y = vec![];
    for (cls, mu) in [(false, [0.0, 0.0]), (true, [2.0, 3.0])] {
        for d in [[a, 0.0], [-a, 0.0], [0.0, b], [0.0, -b]] {
            rows.push([mu[0] + d[0], mu[1] + d[1]]);
            y.push(cls);
        }
    }
    let x = Matrix::from_rows(&rows, 2).unwrap();
    let var = [4.0 * a2 / 6.0, 4.0 * b2 / 6.0];
    let w_want = [2.0 / var[0], 3.0 / var[1]];
    let b_want = -(w_want[0] * 1.0 + w_want[1] * 1.5);
    for solver in [LdaSolver::Svd, LdaSolver::Eigen] {
        let lda = LdaModel::fit(&x, &y, &LdaParams { solver, ..LdaParams::default() }).map_err(|e| e.to_string())?;
        ensure!(
            (lda.w[0] - w_want[0]).abs() < 1e-8 && (lda.w[1] - w_want[1]).abs() < 1e-8 && (lda.b - b_want).abs() < 1e-8,
            "{solver:?}: w {:?} b {} vs {w_want:?} {b_want}",
            lda.w,
            lda.b
        );
    }

    let mut r = rng::seeded(505);
    for _ in 0..50 {
        let n = r.random_range(5..200);
        let d = r.random_range(1..8);
        let x = random_matrix(&mut r, n, d, -10.0, 10.0);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-20.0..20.0)).collect();
        let lm = LinearModel::fit(&x, &y).map_err(|e| e.to_string())?;
        let res: Vec<f64> = (0..n).map(|i| y[i] - lm.predict(x.row(i)).unwrap()).collect();
        let tol = 1e-6 * n as f64;
        ensure!(res.iter().sum::<f64>().abs() <= tol, "residuals not centred");
        for j in 0..d {
            let c: f64 = (0..n).map(|i| res[i] * x.get(i, j)).sum();
            ensure!(c.abs() <= tol, "residual . column {j} = {c}");
        }
    }

    let n = 80;
    let mut x = random_matrix(&mut r, n, 4, -3.0, 3.0);
    let y: Vec<bool> = (0..n).map(|i| i % 2 == 1).collect();
    for i in (1..n).step_by(2) {
        for j in 0..4 {
            x.set(i, j, x.get(i, j) + 1.5);
        }
    }
    let params = LdaParams { solver: LdaSolver::Eigen, shrinkage: 1.0, priors: Some([0.5, 0.5]) };
    let lda = LdaModel::fit(&x, &y, &params).map_err(|e| e.to_string())?;
    let nc = CentroidModel::fit(&x, &y).map_err(|e| e.to_string())?;
    for _ in 0..1000 {
        let q: Vec<f64> = (0..4).map(|_| r.random_range(-6.0..8.0)).collect();
        // nearest-centroid oracle by explicit distances
        let d0: f64 = q.iter().zip(&lda.means[0]).map(|(a, m)| (a - m).powi(2)).sum();
        let d1: f64 = q.iter().zip(&lda.means[1]).map(|(a, m)| (a - m).powi(2)).sum();
        if (d0 - d1).abs() < 1e-9 {
            continue;
        }
        let l = lda.predict(&q).unwrap();
        ensure!(l == (d1 < d0), "lambda=1 LDA disagrees with nearest centroid at {q:?}");
        ensure!(nc.predict(&q).unwrap() == (d1 < d0), "centroid model disagrees at {q:?}");
    }
    Ok(())
}

// -------------------------------------------------------------- SVM/SVR

fn audit(name: &str, fit: &KernelFit, x: &Matrix) -> Outcome {
    ensure!(fit.model.meta.converged, "{name}: not converged");
    let a = fit.kkt_audit(x, 1e-3);
    ensure!(a.passed(), "{name}: KKT audit {a:?}");
    for w in fit.objective.windows(2) {
        ensure!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{name}: objective fell {w:?}");
    }
    Ok(())
}

fn timed_case(name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    f()?;
    ensure!(t.elapsed() < budget, "{name} took {:?}", t.elapsed());
    Ok(())
}

fn svm_svr() -> Outcome {
    let minute = Duration::from_secs(60);
    timed_case("four-point", minute, || {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]], 2).unwrap();
        let y = [false, false, true, true];
        let ys = [-1.0, -1.0, 1.0, 1.0];
        let smo = SmoParams { tol: 1e-8, ..SmoParams::default() };
        let fit = fit_svc(&x, &y, &SvcParams { c: 1.0, kernel: KernelSpec::Linear, smo }).map_err(|e| e.to_string())?;
        // brute-force dual: grid over a1..a3 in steps of 0.01, a4 from the equality
        let mut best = f64::NEG_INFINITY;
        for s1 in 0..=100 {
            for s2 in 0..=100 {
                for s3 in 0..=100 {
                    let al = [s1 as f64 / 100.0, s2 as f64 / 100.0, s3 as f64 / 100.0];
                    let a4 = al[0] + al[1] - al[2];
                    if !(0.0..=1.0).contains(&a4) {
                        continue;
                    }
                    let al = [al[0], al[1], al[2], a4];
                    let mut q = 0.0;
                    for i in 0..4 {
                        for j in 0..4 {
                            q += al[i] * al[j] * ys[i] * ys[j] * dot(x.row(i), x.row(j));
                        }
                    }
                    best = best.max(al.iter().sum::<f64>() - 0.5 * q);
                }
            }
        }
        let dual = *fit.objective.last().ok_or("no objective trace")?;
        ensure!((dual - best).abs() < 1e-4, "dual {dual} vs brute force {best}");
        audit("four-point", &fit, &x)
    })?;

    timed_case("svr exact fit", minute, || {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.125).collect();
        let x = Matrix::from_vec(40, 1, xs.clone()).unwrap();
        let z: Vec<f64> = xs.iter().map(|v| 2.0 * v - 1.0).collect();
        let eps = 0.01;
        let fit = fit_svr(
            &x,
            &z,
            &SvrParams { c: 100.0, epsilon: eps, kernel: KernelSpec::Linear, smo: SmoParams::default() },
        )
        .map_err(|e| e.to_string())?;
        let mae = (0..40).map(|i| (fit.model.decision(x.row(i)).unwrap() - z[i]).abs()).sum::<f64>() / 40.0;
        ensure!(mae <= eps + 1e-3, "training MAE {mae}");
        audit("svr exact fit", &fit, &x)
    })?;

    // desk-scale fits on the planted corpus, scaled, both targets
    let ds = planted(400, 6);
    let scaler = gridiron::encode::MinMaxScaler::fit(&ds.x).map_err(|e| e.to_string())?;
    let xs = scaler.transform(&ds.x).map_err(|e| e.to_string())?;
    for (c, gamma) in [(1.0, 0.05), (8.0, 0.5), (0.25, 2.0)] {
        let kernel = KernelSpec::Rbf { gamma };
        let name = format!("svc C={c} gamma={gamma}");
        timed_case(&name, minute, || {
            let fit = fit_svc(&xs, &ds.success, &SvcParams { c, kernel, smo: SmoParams::default() })
                .map_err(|e| e.to_string())?;
            audit(&name, &fit, &xs)
        })?;
        let name = format!("svr C={c} gamma={gamma}");
        timed_case(&name, minute, || {
            let fit = fit_svr(&xs, &ds.progress, &SvrParams { c, epsilon: 0.01, kernel, smo: SmoParams::default() })
                .map_err(|e| e.to_string())?;
            audit(&name, &fit, &xs)
        })?;
    }
    let name = "linear svc";
    timed_case(name, minute, || {
        let fit =
            fit_svc(&xs, &ds.success, &SvcParams { c: 0.5, kernel: KernelSpec::Linear, smo: SmoParams::default() })
                .map_err(|e| e.to_string())?;
        audit(name, &fit, &xs)
    })
}

// ------------------------------------------------------------------- MLP

fn mlp() -> Outcome {
    let mut r = rng::seeded(606);
    for seed in 0..3 {
        let cfg = MlpConfig { hidden_layers: 2, hidden_units: 50, seed, ..MlpConfig::default() };
        let x = random_matrix(&mut r, 3, 77, -1.0, 1.0);
        let y: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        let net = init_mlp(&cfg, 77, Head::Linear).map_err(|e| e.to_string())?;
        let err = grad_check(&net, &x, &y, Loss::SquaredError).map_err(|e| e.to_string())?;
        ensure!(err < 1e-4, "77-50-50-1 net seed {seed}: relative error {err}");
    }

    let x = random_matrix(&mut r, 120, 6, -1.0, 1.0);
    let y: Vec<f64> = (0..120).map(|i| x.get(i, 0) - 0.5 * x.get(i, 3)).collect();
    let cfg = MlpConfig { hidden_layers: 2, max_epochs: 15, seed: 77, ..MlpConfig::default() };
    let a = fit_mlp(&x, &y, &cfg, false).map_err(|e| e.to_string())?;
    let b = fit_mlp(&x, &y, &cfg, false).map_err(|e| e.to_string())?;
    let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
    ensure!(bits(&a.losses) == bits(&b.losses), "loss curves differ between identical runs");
    ensure!(bits(&a.model.params()) == bits(&b.model.params()), "weights differ between identical runs");

    let xs: Vec<f64> = (0..200).map(|i| -1.0 + 2.0 * i as f64 / 199.0).collect();
    let x = Matrix::from_vec(200, 1, xs.clone()).unwrap();
    let cfg = MlpConfig { activation: Activation::Tanh, max_epochs: 100, seed: 1, ..MlpConfig::default() };
    let fit = fit_mlp(&x, &xs, &cfg, false).map_err(|e| e.to_string())?;
    let mae = xs.iter().map(|&v| (fit.model.forward(&[v]).unwrap() - v).abs()).sum::<f64>() / 200.0;
    ensure!(fit.losses.len() == 100 && mae < 0.05, "line task MAE {mae} after {} epochs", fit.losses.len());
    Ok(())
}

// ------------------------------------------------------------ PCA/ANOVA

/// Cyclic Jacobi eigenvalues of a symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (kp, kq) = (row[p], row[q]);
                    row[p] = c * kp - s * kq;
                    row[q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (a[p][k], a[q][k]);
                    a[p][k] = c * pk - s * qk;
                    a[q][k] = s * pk + c * qk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

fn pca_anova() -> Outcome {
    let mut r = rng::seeded(707);
    for trial in 0..10 {
        let n = r.random_range(20..150);
        let d = r.random_range(2..7);
        let mut x = random_matrix(&mut r, n, d, -1.0, 1.0);
        for i in 0..n {
            for j in 0..d {
                x.set(i, j, x.get(i, j) * (j + 1) as f64 + 0.4 * x.get(i, 0));
            }
        }
        let model = pca_fit(&x).map_err(|e| e.to_string())?;
        let sum: f64 = model.ratios.iter().sum();
        ensure!((sum - 1.0).abs() <= 1e-9, "trial {trial}: ratios sum to {sum}");
        let mean = x.column_means();
        let mut cov = vec![vec![0.0; d]; d];
        for row in x.iter_rows() {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]) / (n - 1) as f64;
                }
            }
        }
        let eig = jacobi_eigenvalues(cov);
        let total: f64 = eig.iter().sum();
        for (k, (got, e)) in model.ratios.iter().zip(&eig).enumerate() {
            ensure!((got - e / total).abs() < 1e-8, "trial {trial} component {k}: {got} vs {}", e / total);
        }
    }

    let f = f_statistic(&[1.0, 2.0, 3.0], &[7.0, 8.0, 9.0]);
    ensure!((f - 54.0).abs() < 1e-9, "hand case F = {f}");
    for _ in 0..1000 {
        let a: Vec<f64> = (0..r.random_range(2..30)).map(|_| r.random_range(-50.0..50.0)).collect();
        let b: Vec<f64> = (0..r.random_range(2..30)).map(|_| r.random_range(-50.0..50.0)).collect();
        let s = r.random_range(0.01..100.0);
        let base = f_statistic(&a, &b);
        let scaled =
            f_statistic(&a.iter().map(|v| v * s).collect::<Vec<_>>(), &b.iter().map(|v| v * s).collect::<Vec<_>>());
        ensure!((base - scaled).abs() <= 1e-9 * base.abs().max(1.0), "F {base} vs scaled {scaled} (s = {s})");
    }
    Ok(())
}

// ----------------------------------------------------- persistence + /rank

fn bundle(ds: &Dataset, recipe: Recipe, target: Target) -> ModelBundle {
    let pipeline = recipe.fit(ds, target).unwrap();
    let meta = BundleMeta { target, recipe: Some(recipe.clone()), corpus_fingerprint: None, metrics: None };
    ModelBundle::new(recipe.spec.name(), pipeline, ds.schema.clone(), meta).unwrap()
}

async fn post(app: &axum::Router, uri: &str, body: &Value) -> (StatusCode, Value) {
    let req = Request::builder()
        .method("POST")
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn persistence_service() -> Outcome {
    let ds = planted(800, 8);
    let recipes = [
        (Recipe::new(ModelSpec::Tree(TreeParams::depth(6))), Target::Success),
        (Recipe::new(ModelSpec::Lda(LdaParams::default())), Target::Success),
        (Recipe::new(ModelSpec::Linreg), Target::Progress),
        (
            Recipe {
                scale: true,
                ..Recipe::new(ModelSpec::Svr(SvrParams {
                    c: 1.0,
                    epsilon: 0.01,
                    kernel: KernelSpec::Rbf { gamma: 0.2 },
                    smo: SmoParams::default(),
                }))
            },
            Target::Progress,
        ),
        (Recipe::new(ModelSpec::Mlp(MlpConfig { max_epochs: 3, ..MlpConfig::default() })), Target::Yards),
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = rng::seeded(808);
    let mut progress_bundle = None;
    for (i, (recipe, target)) in recipes.into_iter().enumerate() {
        let b = bundle(&ds, recipe, target);
        let path = dir.path().join(format!("m{i}.json"));
        b.save(&path).map_err(|e| e.to_string())?;
        let back = ModelBundle::load(&path).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..77).map(|_| r.random_range(-2.0..100.0)).collect();
            let (a, z) = (b.pipeline.predict_value(&x).unwrap(), back.pipeline.predict_value(&x).unwrap());
            ensure!(a.to_bits() == z.to_bits(), "{}: {a} vs {z} after reload", b.name);
        }
        if target == Target::Progress && progress_bundle.is_none() {
            progress_bundle = Some(back);
        }
    }

    let success = bundle(&ds, Recipe::new(ModelSpec::Tree(TreeParams::depth(3))), Target::Success);
    let app = router(AppState::new(ModelSet::new(vec![progress_bundle.unwrap(), success])));
    let rt = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let body = json!({"situation": {"team": "NE", "opponent": "NYJ", "half": 2, "time": 420, "position": 62, "down": 3, "togo": 8}});
        let (s, first) = post(&app, "/rank", &body).await;
        ensure!(s == StatusCode::OK, "/rank status {s}: {first}");
        let plays = first["plays"].as_array().ok_or("no plays array")?;
        let mut got: Vec<String> = plays.iter().map(|p| p["candidate"].to_string()).collect();
        let mut want: Vec<String> = enumerate_candidates(None)
            .unwrap()
            .iter()
            .map(|c| serde_json::to_value(c).unwrap().to_string())
            .collect();
        got.sort();
        want.sort();
        ensure!(got == want, "ranked plays are not a permutation of the candidates");
        for w in plays.windows(2) {
            ensure!(w[0]["predicted_progress"].as_f64() >= w[1]["predicted_progress"].as_f64(), "ordering broken");
        }
        for _ in 0..10 {
            let (_, again) = post(&app, "/rank", &body).await;
            ensure!(again == first, "ordering changed on repetition");
        }
        Ok(())
    })
}

// ------------------------------------------------------- real corpus

fn real_corpus(path: &str) -> Outcome {
    let (ds, _) = ingest(std::path::Path::new(path), &IngestOptions::default()).map_err(|e| e.to_string())?;
    let accuracy = |recipe: Recipe| -> Result<f64, String> {
        let cv = cross_validate(&recipe, &ds, Target::Success, 5, 0).map_err(|e| e.to_string())?;
        let mut acc = 0.0;
        for f in &cv.folds {
            match f {
                Evaluation::Classification(c) => acc += c.accuracy,
                Evaluation::Regression(_) => return Err("regression fold for a success target".into()),
            }
        }
        Ok(acc / cv.folds.len() as f64)
    };
    let tree = accuracy(Recipe::new(ModelSpec::Tree(TreeParams::depth(1))))?;
    println!("      depth-1 tree accuracy {tree:.4} (reference 0.692 +/- 0.01)");
    let lda = accuracy(Recipe::new(ModelSpec::Lda(LdaParams::default())))?;
    println!("      SVD-LDA accuracy {lda:.4} (reference 0.6691 +/- 0.015)");
    println!("      RBF grid search and SVR not run here; use `gridiron grid-search`");
    ensure!((tree - 0.692).abs() <= 0.01, "tree accuracy {tree:.4}");
    ensure!((lda - 0.6691).abs() <= 0.015, "LDA accuracy {lda:.4}");
    Ok(())
}

/// Name, optional runtime budget, check.
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("parser golden suite", Some(Duration::from_secs(1)), parser_golden),
        ("progress formula", Some(Duration::from_secs(1)), progress_formula),
        ("encoding width", None, encoding_width),
        ("metrics", None, metrics),
        ("trees", Some(Duration::from_secs(30)), trees),
        ("LDA / linear", None, lda_linear),
        ("SVM / SVR", None, svm_svr),
        ("MLP", None, mlp),
        ("PCA / ANOVA", None, pca_anova),
        ("persistence + service", None, persistence_service),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(()), Some(limit)) = (&outcome, budget) {
            if elapsed > limit {
                outcome = Err(format!("took {elapsed:?}, budget {limit:?}"));
            }
        }
        match outcome {
            Ok(()) => println!("PASS  {name} ({:.2}s)", elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} ({:.2}s): {why}", elapsed.as_secs_f64());
            }
        }
    }
    match std::env::var("GRIDIRON_REAL_CORPUS") {
        Ok(path) => match real_corpus(&path) {
            Ok(()) => println!("PASS  real corpus (optional)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  real corpus (optional): {why}");
            }
        },
        Err(_) => println!("SKIP  real corpus (optional): set GRIDIRON_REAL_CORPUS to a play-by-play JSONL file"),
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
