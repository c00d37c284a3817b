//! Model bundles on disk and the play-ranking engine behind the advisor API.

pub mod http;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::Target;
use crate::encode::{self, EncodingSchema};
use crate::error::{Error, Result};
use crate::eval::Evaluation;
use crate::model::{Pipeline, Recipe};
use crate::playparse::{check_play_shape, PassLength, PlayFeatures, Side};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<Recipe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Evaluation>,
}

/// A fitted pipeline with the schema that produced its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub name: String,
    pub pipeline: Pipeline,
    pub schema: EncodingSchema,
    pub meta: BundleMeta,
}

impl ModelBundle {
    pub fn new(name: impl Into<String>, pipeline: Pipeline, schema: EncodingSchema, meta: BundleMeta) -> Result<Self> {
        let b = Self { format_version: FORMAT_VERSION, name: name.into(), pipeline, schema, meta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: self.format_version, expected: FORMAT_VERSION });
        }
        self.schema.validate()?;
        crate::matrix::check_width(self.schema.width(), self.pipeline.width())?;
        crate::matrix::check_width(self.pipeline.width(), self.pipeline.model.width())?;
        if self.pipeline.model.is_classifier() != self.meta.target.is_classification() {
            return Err(Error::TargetMismatch {
                kind: self.pipeline.model.kind_name().into(),
                target: self.meta.target.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(Error::VersionMismatch {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let bundle: ModelBundle = serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
        bundle.validate()?;
        Ok(bundle)
    }

    /// Writes through a temporary file so readers never see a partial bundle.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(text.as_bytes())?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn score(&self, features: &PlayFeatures) -> Result<f64> {
        self.pipeline.predict_value(&encode::encode(features, &self.schema)?)
    }
}

/// Game context of the snap to be called.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Situation {
    pub team: String,
    pub opponent: String,
    pub half: u8,
    pub time: u32,
    pub position: u32,
    pub down: u8,
    pub togo: u32,
}

impl Situation {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(1..=2).contains(&self.half) {
            return bad(format!("half {} outside 1..=2", self.half));
        }
        if self.time > 1800 {
            return bad(format!("time {} above 1800", self.time));
        }
        if !(1..=99).contains(&self.position) {
            return bad(format!("position {} outside 1..=99", self.position));
        }
        if !(1..=4).contains(&self.down) {
            return bad(format!("down {} outside 1..=4", self.down));
        }
        if !(1..=99).contains(&self.togo) {
            return bad(format!("togo {} outside 1..=99", self.togo));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePlay {
    pub pass: bool,
    pub side: Side,
    pub passlen: PassLength,
    pub shotgun: bool,
    pub qbrun: bool,
}

impl CandidatePlay {
    pub fn validate(&self) -> Result<()> {
        check_play_shape(self.pass, self.passlen, self.qbrun)
    }

    pub fn features(&self, s: &Situation) -> PlayFeatures {
        PlayFeatures {
            team: s.team.clone(),
            opponent: s.opponent.clone(),
            half: s.half,
            time: s.time,
            position: s.position,
            down: s.down,
            togo: s.togo,
            shotgun: self.shotgun,
            pass: self.pass,
            side: self.side,
            passlen: self.passlen,
            qbrun: self.qbrun,
        }
    }
}

/// The playbook if given (validated), else every sided pass and run:
/// 3 sides x 2 lengths x 2 formations plus 3 sides x 2 formations x 2 run kinds.
pub fn enumerate_candidates(playbook: Option<&[CandidatePlay]>) -> Result<Vec<CandidatePlay>> {
    if let Some(book) = playbook {
        for (i, c) in book.iter().enumerate() {
            c.validate().map_err(|e| Error::InvalidInput(format!("playbook entry {i}: {e}")))?;
        }
        return Ok(book.to_vec());
    }
    let mut out = Vec::with_capacity(24);
    for side in Side::DIRECTIONS {
        for passlen in PassLength::LENGTHS {
            for shotgun in [false, true] {
                out.push(CandidatePlay { pass: true, side, passlen, shotgun, qbrun: false });
            }
        }
    }
    for side in Side::DIRECTIONS {
        for shotgun in [false, true] {
            for qbrun in [false, true] {
                out.push(CandidatePlay { pass: false, side, passlen: PassLength::None, shotgun, qbrun });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankBy {
    Progress,
    Success,
    Yards,
}

impl RankBy {
    fn target(self) -> Target {
        match self {
            RankBy::Progress => Target::Progress,
            RankBy::Success => Target::Success,
            RankBy::Yards => Target::Yards,
        }
    }
}

impl std::str::FromStr for RankBy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<Target>()? {
            Target::Progress => Ok(RankBy::Progress),
            Target::Success => Ok(RankBy::Success),
            Target::Yards => Ok(RankBy::Yards),
        }
    }
}

/// Scores are model outputs, not observed outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPlay {
    pub rank: usize,
    pub candidate: CandidatePlay,
    pub predicted_progress: Option<f64>,
    pub success_score: Option<f64>,
    pub predicted_yards: Option<f64>,
}

impl RankedPlay {
    fn get(&self, by: RankBy) -> Option<f64> {
        match by {
            RankBy::Progress => self.predicted_progress,
            RankBy::Success => self.success_score,
            RankBy::Yards => self.predicted_yards,
        }
    }
}

/// Loaded bundles; the first bundle for a target is the one used.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub bundles: Vec<Arc<ModelBundle>>,
}

impl ModelSet {
    pub fn new(bundles: Vec<ModelBundle>) -> Self {
        Self { bundles: bundles.into_iter().map(Arc::new).collect() }
    }

    /// Every `*.json` bundle in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let bundles = paths
            .iter()
            .map(|p| ModelBundle::load(p).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display()))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(bundles))
    }

    pub fn is_empty(&self) -> bool {
        self.bundles.is_empty()
    }

    pub fn for_target(&self, target: Target) -> Option<&ModelBundle> {
        self.bundles.iter().find(|b| b.meta.target == target).map(|b| &**b)
    }

    /// Progress when a progress model is loaded, then success, then yards.
    pub fn default_rank_by(&self) -> Option<RankBy> {
        [RankBy::Progress, RankBy::Success, RankBy::Yards].into_iter().find(|r| self.for_target(r.target()).is_some())
    }
}

/// Scores every candidate in `situation` with each loaded target model and
/// sorts by the primary score, descending; equal scores keep candidate order.
pub fn rank_plays(
    situation: &Situation,
    candidates: &[CandidatePlay],
    models: &ModelSet,
    primary: Option<RankBy>,
) -> Result<(RankBy, Vec<RankedPlay>)> {
    situation.validate()?;
    if candidates.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    let primary = match primary {
        Some(p) => p,
        None => models.default_rank_by().ok_or(Error::NoModels)?,
    };
    if models.for_target(primary.target()).is_none() {
        return Err(Error::InvalidInput(format!("no {} model loaded", primary.target())));
    }
    let score = |target: Target, f: &PlayFeatures| -> Result<Option<f64>> {
        models.for_target(target).map(|b| b.score(f)).transpose()
    };
    let mut ranked = candidates
        .iter()
        .map(|c| {
            c.validate()?;
            let f = c.features(situation);
            Ok(RankedPlay {
                rank: 0,
                candidate: *c,
                predicted_progress: score(Target::Progress, &f)?,
                success_score: score(Target::Success, &f)?,
                predicted_yards: score(Target::Yards, &f)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        let (x, y) = (a.get(primary).unwrap_or(f64::NEG_INFINITY), b.get(primary).unwrap_or(f64::NEG_INFINITY));
        y.total_cmp(&x)
    });
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok((primary, ranked))
}
