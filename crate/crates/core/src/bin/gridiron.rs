use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use gridiron::dataset::{self, Dataset, IngestOptions, Target};
use gridiron::eval::{self, GridCell};
use gridiron::kernel::{self, GridSpec, KernelSpec, SmoParams, SvcParams, SvrParams};
use gridiron::linear::{LdaParams, LdaSolver, SHRINKAGE_GRID};
use gridiron::model::{ModelSpec, Recipe};
use gridiron::neural::{Activation, MlpConfig};
use gridiron::playparse::{FilterOptions, RawPlayRecord};
use gridiron::serve::http::AppState;
use gridiron::serve::{self, BundleMeta, CandidatePlay, ModelBundle, ModelSet, RankBy, Situation};
use gridiron::stats;
use gridiron::synth::{self, SynthSpec};
use gridiron::trees::{ClassWeighting, TreeParams};
use gridiron::{Error, Result};

const DEFAULT_PORT: u16 = 8080;

#[derive(Parser)]
#[command(name = "gridiron", version, about = "Play-outcome prediction workbench")]
struct Cli {
    /// TOML file with defaults; `gridiron.toml` in the working directory is
    /// read when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus and print the ingest report.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Write the report as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the labelled, encoded dataset as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic corpus with planted structure.
    Synthesize {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator settings (TOML); flags override `n`.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Planted-truth sidecar; defaults to `<out>.truth.json`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Fit one model and save it as a bundle.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Hold out this share of rows for the stored metrics (0 = training fit).
        #[arg(long, default_value_t = 0.0)]
        holdout: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate models, or score a saved bundle on a corpus.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Bundle to score; when absent the `--models` list is cross-validated.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "constant,tree,centroid,lda")]
        models: Vec<ModelKind>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        folds: Option<usize>,
        /// Comparison table CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated grid over RBF (C, gamma) or tree depth.
    GridSearch {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = GridFamily::Rbf)]
        family: GridFamily,
        #[arg(long, default_value_t = Target::Success)]
        target: Target,
        /// Exponent range `start:end:step` for C = 2^k.
        #[arg(long, default_value = "-5:17:2", allow_hyphen_values = true)]
        c_exp: String,
        #[arg(long, default_value = "-17:4:2", allow_hyphen_values = true)]
        gamma_exp: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,6,8,10")]
        depths: Vec<usize>,
        #[arg(long)]
        folds: Option<usize>,
        /// Row subsample cap for kernel grids.
        #[arg(long, default_value_t = 20_000)]
        cap: usize,
        /// Min-max scale features for kernel cells.
        #[arg(long)]
        scale: bool,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Score table CSV (gamma rows, C columns for RBF).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-way ANOVA F value per encoded column against success.
    FeatureScores {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Principal components of the encoded features.
    Pca {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 2)]
        components: usize,
        /// Projection CSV with a success column.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict every relevant record in a corpus with a bundle (JSON lines).
    Predict {
        #[arg(long)]
        bundle: PathBuf,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Rank candidate plays for one situation.
    Rank {
        #[arg(long, env = "GRIDIRON_MODELS")]
        models: Option<PathBuf>,
        /// Situation JSON (file path or inline object).
        #[arg(long)]
        situation: String,
        /// Playbook JSON array of candidate plays.
        #[arg(long)]
        playbook: Option<PathBuf>,
        #[arg(long)]
        rank_by: Option<String>,
    },
    /// Run the advisor HTTP API.
    Serve {
        #[arg(long, env = "GRIDIRON_PORT")]
        port: Option<u16>,
        #[arg(long, env = "GRIDIRON_MODELS")]
        models: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Corpus in JSON-lines form.
    #[arg(long)]
    data: PathBuf,
    /// Abort on the first malformed line.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    exclude_interceptions: bool,
    /// Comma-separated team roster for the encoding (default: 32 teams).
    #[arg(long, value_delimiter = ',')]
    teams: Option<Vec<String>>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Constant,
    Tree,
    Centroid,
    Lda,
    Linreg,
    Svm,
    Svr,
    Mlp,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridFamily {
    Rbf,
    Tree,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::Tree)]
    model: ModelKind,
    #[arg(long, default_value_t = Target::Success)]
    target: Target,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scale: bool,
    #[arg(long)]
    undersample: bool,
    // trees
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    /// Unweighted Gini instead of balanced class weights.
    #[arg(long)]
    no_balance: bool,
    // lda
    #[arg(long, default_value = "svd")]
    solver: String,
    /// Fixed shrinkage; `grid` picks one on a hold-out.
    #[arg(long)]
    shrinkage: Option<String>,
    // kernel machines
    #[arg(long, value_enum, default_value_t = KernelKind::Rbf)]
    kernel: KernelKind,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0 / 77.0)]
    gamma: f64,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    // networks
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value_t = 10)]
    units: usize,
    #[arg(long, default_value = "tanh")]
    activation: String,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    port: Option<u16>,
    models: Option<PathBuf>,
    seed: Option<u64>,
    folds: Option<usize>,
    teams: Option<Vec<String>>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => {
            let default = PathBuf::from("gridiron.toml");
            if !default.exists() {
                return Ok(Config::default());
            }
            default
        }
    };
    let text = fs::read_to_string(&path)?;
    toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn epsilon_for(target: Target) -> f64 {
    match target {
        Target::Yards => kernel::EPSILON_YARDS,
        _ => kernel::EPSILON_PROGRESS,
    }
}

impl ModelArgs {
    fn spec(&self, kind: ModelKind) -> Result<ModelSpec> {
        let kernel = match self.kernel {
            KernelKind::Linear => KernelSpec::Linear,
            KernelKind::Rbf => KernelSpec::Rbf { gamma: self.gamma },
        };
        let smo = SmoParams { tol: self.tol, max_iter: self.max_iter, ..SmoParams::default() };
        Ok(match kind {
            ModelKind::Constant => ModelSpec::Constant,
            ModelKind::Tree => ModelSpec::Tree(TreeParams {
                max_depth: self.max_depth,
                min_samples_leaf: self.min_leaf,
                class_weighting: if self.no_balance { ClassWeighting::None } else { ClassWeighting::Balanced },
            }),
            ModelKind::Centroid => ModelSpec::Centroid,
            ModelKind::Lda => {
                let solver = match self.solver.as_str() {
                    "svd" => LdaSolver::Svd,
                    "eigen" => LdaSolver::Eigen,
                    s => return Err(Error::InvalidInput(format!("unknown solver {s:?}"))),
                };
                match self.shrinkage.as_deref() {
                    Some("grid") => ModelSpec::LdaGrid { grid: SHRINKAGE_GRID.to_vec() },
                    Some(v) => ModelSpec::Lda(LdaParams {
                        solver,
                        shrinkage: v.parse().map_err(|_| Error::InvalidInput(format!("bad shrinkage {v:?}")))?,
                        priors: None,
                    }),
                    None => ModelSpec::Lda(LdaParams { solver, ..LdaParams::default() }),
                }
            }
            ModelKind::Linreg => ModelSpec::Linreg,
            ModelKind::Svm => ModelSpec::Svm(SvcParams { c: self.c, kernel, smo }),
            ModelKind::Svr => ModelSpec::Svr(SvrParams {
                c: self.c,
                epsilon: self.epsilon.unwrap_or(epsilon_for(self.target)),
                kernel,
                smo,
            }),
            ModelKind::Mlp => ModelSpec::Mlp(MlpConfig {
                hidden_layers: self.layers,
                hidden_units: self.units,
                activation: self.activation.parse::<Activation>()?,
                max_epochs: self.epochs,
                learning_rate: self.lr,
                momentum: self.momentum,
                batch_size: self.batch,
                seed: self.seed.unwrap_or(0),
            }),
        })
    }

    fn recipe(&self, kind: ModelKind, seed: u64) -> Result<Recipe> {
        Ok(Recipe { spec: self.spec(kind)?, scale: self.scale, undersample: self.undersample, seed })
    }
}

fn load_data(args: &DataArgs, cfg: &Config) -> Result<(Dataset, dataset::IngestReport)> {
    let opts = IngestOptions {
        strict: args.strict,
        filter: FilterOptions { exclude_interceptions: args.exclude_interceptions },
        teams: args.teams.clone().or_else(|| cfg.teams.clone()),
    };
    let (ds, report) = dataset::ingest(&args.data, &opts)?;
    log::info!("{}: kept {} of {} records", args.data.display(), report.records_kept, report.records_read);
    Ok((ds, report))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_range(s: &str) -> Result<Vec<i32>> {
    let bad = || Error::InvalidInput(format!("range {s:?} is not start:end:step"));
    let parts: Vec<i32> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
    match parts[..] {
        [a, b, step] if step > 0 && a <= b => Ok((a..=b).step_by(step as usize).collect()),
        [a] => Ok(vec![a]),
        _ => Err(bad()),
    }
}

fn read_json_arg<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with(['{', '[']) { arg.to_string() } else { fs::read_to_string(arg)? };
    Ok(serde_json::from_str(&text)?)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let default_seed = cfg.seed.unwrap_or(0);
    let default_folds = cfg.folds.unwrap_or(5);
    match cli.command {
        Command::Ingest { data, report, out } => {
            let (ds, rep) = load_data(&data, &cfg)?;
            println!("{rep}");
            if let Some(p) = report {
                fs::write(p, serde_json::to_string_pretty(&rep)?)?;
            }
            if let Some(p) = out {
                fs::write(p, serde_json::to_string(&ds)?)?;
            }
        }
        Command::Synthesize { n, seed, spec, out, truth } => {
            let mut s = match spec {
                Some(p) => toml::from_str::<SynthSpec>(&fs::read_to_string(&p)?)
                    .map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?,
                None => SynthSpec::default(),
            };
            s.n = n;
            let generated = synth::synthesize(&s, seed)?;
            synth::write_records(BufWriter::new(File::create(&out)?), &generated.records)?;
            let truth_path = truth.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".truth.json");
                p.into()
            });
            fs::write(&truth_path, serde_json::to_string_pretty(&generated.truth)?)?;
            println!(
                "wrote {} records to {} (truth: {})",
                generated.records.len(),
                out.display(),
                truth_path.display()
            );
        }
        Command::Train { data, model, holdout, out } => {
            let (ds, _) = load_data(&data, &cfg)?;
            let seed = model.seed.unwrap_or(default_seed);
            let recipe = model.recipe(model.model, seed)?;
            let (pipeline, metrics) = if holdout > 0.0 {
                let (train, test) = dataset::split(&ds, holdout, seed)?;
                let p = recipe.fit(&train, model.target)?;
                let m = eval::evaluate(&p, &test, model.target)?;
                (p, m)
            } else {
                let p = recipe.fit(&ds, model.target)?;
                let m = eval::evaluate(&p, &ds, model.target)?;
                (p, m)
            };
            let bundle = ModelBundle::new(
                format!("{}-{}", recipe.spec.name(), model.target),
                pipeline,
                ds.schema.clone(),
                BundleMeta {
                    target: model.target,
                    recipe: Some(recipe),
                    corpus_fingerprint: Some(ds.provenance.clone()),
                    metrics: Some(metrics),
                },
            )?;
            bundle.save(&out)?;
            println!("{}", serde_json::to_string(&metrics)?);
        }
        Command::Evaluate { data, bundle, models, model, folds, out } => {
            let (ds, _) = load_data(&data, &cfg)?;
            if let Some(path) = bundle {
                let b = ModelBundle::load(&path)?;
                let m = eval::evaluate(&b.pipeline, &ds, b.meta.target)?;
                eval::write_comparison_csv(output(out.as_deref())?, &[(b.name, m)])?;
                return Ok(());
            }
            let seed = model.seed.unwrap_or(default_seed);
            let k = folds.unwrap_or(default_folds);
            let mut rows = Vec::new();
            for kind in models {
                let recipe = model.recipe(kind, seed)?;
                if !recipe.spec.supports(model.target) {
                    log::warn!("skipping {}: cannot predict {}", recipe.spec.name(), model.target);
                    continue;
                }
                let cv = eval::cross_validate(&recipe, &ds, model.target, k, seed)?;
                rows.push((recipe.spec.name().to_string(), cv.mean));
            }
            eval::write_comparison_csv(output(out.as_deref())?, &rows)?;
        }
        Command::GridSearch {
            data,
            family,
            target,
            c_exp,
            gamma_exp,
            depths,
            folds,
            cap,
            scale,
            epsilon,
            seed,
            out,
        } => {
            let (ds, _) = load_data(&data, &cfg)?;
            let seed = seed.unwrap_or(default_seed);
            let k = folds.unwrap_or(default_folds);
            match family {
                GridFamily::Rbf => {
                    let grid = GridSpec {
                        c_exponents: parse_range(&c_exp)?,
                        gamma_exponents: parse_range(&gamma_exp)?,
                        folds: k,
                    };
                    grid.validate()?;
                    let cells = eval::rbf_grid_cells(
                        &grid,
                        target,
                        epsilon.unwrap_or(epsilon_for(target)),
                        SmoParams::default(),
                        scale,
                    );
                    let res = eval::grid_search(&cells, &ds, target, k, seed, Some(cap))?;
                    eval::write_rbf_table(output(out.as_deref())?, &grid, &res)?;
                    report_best(&res);
                }
                GridFamily::Tree => {
                    let cells: Vec<GridCell> = depths
                        .iter()
                        .map(|&d| GridCell {
                            label: format!("depth={d}"),
                            recipe: Recipe::new(ModelSpec::Tree(TreeParams::depth(d))),
                        })
                        .collect();
                    let res = eval::grid_search(&cells, &ds, target, k, seed, None)?;
                    res.write_csv(output(out.as_deref())?)?;
                    report_best(&res);
                }
            }
        }
        Command::FeatureScores { data, out } => {
            let (ds, _) = load_data(&data, &cfg)?;
            stats::anova_f(&ds)?.write_csv(output(out.as_deref())?)?;
        }
        Command::Pca { data, components, out } => {
            let (ds, _) = load_data(&data, &cfg)?;
            let pca = stats::pca_fit(&ds.x)?;
            let mut cumulative = 0.0;
            for (i, r) in pca.ratios.iter().take(components.max(10)).enumerate() {
                cumulative += r;
                eprintln!("pc{:<3} ratio {r:.6}  cumulative {cumulative:.6}", i + 1);
            }
            if let Some(p) = out {
                let z = pca.project(&ds.x, components)?;
                stats::write_projection_csv(BufWriter::new(File::create(p)?), &z, Some(&ds.success))?;
            }
        }
        Command::Predict { bundle, data } => {
            let b = ModelBundle::load(&bundle)?;
            let text = fs::read_to_string(&data.data)?;
            let mut out = output(None)?;
            let filter = FilterOptions { exclude_interceptions: data.exclude_interceptions };
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let record: RawPlayRecord = serde_json::from_str(line)?;
                let value = match gridiron::playparse::process_record(&record, &filter) {
                    Ok(p) => {
                        let score = b.score(&p.features)?;
                        serde_json::json!({"line": i + 1, "game_id": record.game_id, "prediction": score})
                    }
                    Err(reason) => serde_json::json!({"line": i + 1, "game_id": record.game_id, "rejected": reason}),
                };
                writeln!(out, "{value}")?;
            }
        }
        Command::Rank { models, situation, playbook, rank_by } => {
            let dir = models.or(cfg.models).ok_or_else(|| Error::InvalidInput("no model directory given".into()))?;
            let set = ModelSet::load_dir(&dir)?;
            let situation: Situation = read_json_arg(&situation)?;
            let book: Option<Vec<CandidatePlay>> = match playbook {
                Some(p) => Some(serde_json::from_str(&fs::read_to_string(p)?)?),
                None => None,
            };
            let candidates = serve::enumerate_candidates(book.as_deref())?;
            let rank_by = rank_by.map(|s| s.parse::<RankBy>()).transpose()?;
            let (by, ranked) = serve::rank_plays(&situation, &candidates, &set, rank_by)?;
            let mut out = output(None)?;
            writeln!(out, "rank,pass,side,passlen,shotgun,qbrun,progress,success_score,yards  (model estimates, ranked by {by:?})")?;
            let fmt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
            for r in ranked {
                let c = r.candidate;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.rank,
                    c.pass,
                    c.side.as_str(),
                    c.passlen.as_str(),
                    c.shotgun,
                    c.qbrun,
                    fmt(r.predicted_progress),
                    fmt(r.success_score),
                    fmt(r.predicted_yards)
                )?;
            }
        }
        Command::Serve { port, models, host } => {
            let port = port.or(cfg.port).unwrap_or(DEFAULT_PORT);
            let state = match models.or(cfg.models) {
                Some(dir) => AppState::from_dir(dir)?,
                None => {
                    log::warn!("no model directory configured; /rank will answer no_models");
                    AppState::new(ModelSet::default())
                }
            };
            let addr: SocketAddr =
                format!("{host}:{port}").parse().map_err(|e| Error::InvalidInput(format!("bad address: {e}")))?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(gridiron::serve::http::serve(state, addr))?;
        }
    }
    Ok(())
}

fn report_best(res: &eval::GridSearchResult) {
    match res.best_cell() {
        Some(c) => {
            eprintln!("best {} mean score {:.5} ({} rows)", c.label, c.mean_score.unwrap_or(f64::NAN), res.rows_used)
        }
        None => eprintln!("every grid cell failed"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed the pipe (e.g. `| head`)
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
