//! One-hot encoding of play features into fixed-width numeric vectors.
//!
//! Column layout (fixed, versioned by [`SCHEMA_VERSION`]):
//!
//! | block            | columns                                   |
//! |------------------|-------------------------------------------|
//! | team             | `team=X` per roster team, sorted          |
//! | opponent         | `opponent=X` per roster team, sorted      |
//! | side             | `side=left`, `side=middle`, `side=right`  |
//! | pass length      | `passlen=short`, `passlen=deep`           |
//! | continuous       | `half`, `time`, `position`, `down`, `togo`|
//! | binary flags     | `shotgun`, `pass`, `qbrun`                |
//!
//! "No side" and "no pass length" encode as all-zero blocks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::playparse::{PassLength, PlayFeatures, Side};

pub const SCHEMA_VERSION: u32 = 1;

/// Team codes of the 2009-2014 league seasons.
pub const NFL_TEAMS: [&str; 32] = [
    "ARI", "ATL", "BAL", "BUF", "CAR", "CHI", "CIN", "CLE", "DAL", "DEN", "DET", "GB", "HOU", "IND", "JAC", "KC",
    "MIA", "MIN", "NE", "NO", "NYG", "NYJ", "OAK", "PHI", "PIT", "SD", "SEA", "SF", "STL", "TB", "TEN", "WAS",
];

const CONTINUOUS: [&str; 5] = ["half", "time", "position", "down", "togo"];
const FLAGS: [&str; 3] = ["shotgun", "pass", "qbrun"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingSchema {
    pub version: u32,
    teams: Vec<String>,
    columns: Vec<String>,
}

pub type FeatureVector = Vec<f64>;

impl EncodingSchema {
    pub fn teams(&self) -> &[String] {
        &self.teams
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn team_index(&self, team: &str) -> Option<usize> {
        self.teams.binary_search_by(|t| t.as_str().cmp(team)).ok()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn side_offset(&self) -> usize {
        2 * self.teams.len()
    }

    fn passlen_offset(&self) -> usize {
        self.side_offset() + 3
    }

    fn continuous_offset(&self) -> usize {
        self.passlen_offset() + 2
    }

    fn flag_offset(&self) -> usize {
        self.continuous_offset() + CONTINUOUS.len()
    }

    /// Re-derives the column list from the team roster; used to validate
    /// deserialized schemas.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = build_schema(&self.teams)?;
        if rebuilt.columns != self.columns || self.teams != rebuilt.teams {
            return Err(Error::InvalidInput("schema columns do not match its team roster".into()));
        }
        if self.version != SCHEMA_VERSION {
            return Err(Error::VersionMismatch { found: self.version, expected: SCHEMA_VERSION });
        }
        Ok(())
    }
}

pub fn build_schema<S: AsRef<str>>(teams: &[S]) -> Result<EncodingSchema> {
    if teams.is_empty() {
        return Err(Error::Empty("team roster"));
    }
    let mut seen = BTreeSet::new();
    for t in teams {
        let t = t.as_ref();
        if t.is_empty() {
            return Err(Error::InvalidInput("empty team code".into()));
        }
        if !seen.insert(t.to_string()) {
            return Err(Error::DuplicateTeam(t.to_string()));
        }
    }
    let teams: Vec<String> = seen.into_iter().collect();

    let mut columns = Vec::with_capacity(2 * teams.len() + 13);
    columns.extend(teams.iter().map(|t| format!("team={t}")));
    columns.extend(teams.iter().map(|t| format!("opponent={t}")));
    columns.extend(Side::DIRECTIONS.iter().map(|s| format!("side={}", s.as_str())));
    columns.extend(PassLength::LENGTHS.iter().map(|p| format!("passlen={}", p.as_str())));
    columns.extend(CONTINUOUS.iter().map(|s| s.to_string()));
    columns.extend(FLAGS.iter().map(|s| s.to_string()));

    Ok(EncodingSchema { version: SCHEMA_VERSION, teams, columns })
}

/// Schema over the full 32-team roster (77 columns).
pub fn nfl_schema() -> EncodingSchema {
    build_schema(&NFL_TEAMS).expect("static roster is valid")
}

pub fn encode(features: &PlayFeatures, schema: &EncodingSchema) -> Result<FeatureVector> {
    let team = schema.team_index(&features.team).ok_or_else(|| Error::UnknownTeam(features.team.clone()))?;
    let opponent =
        schema.team_index(&features.opponent).ok_or_else(|| Error::UnknownTeam(features.opponent.clone()))?;
    let n_teams = schema.teams.len();

    let mut v = vec![0.0; schema.width()];
    v[team] = 1.0;
    v[n_teams + opponent] = 1.0;
    match features.side {
        Side::Left => v[schema.side_offset()] = 1.0,
        Side::Middle => v[schema.side_offset() + 1] = 1.0,
        Side::Right => v[schema.side_offset() + 2] = 1.0,
        Side::None => {}
    }
    match features.passlen {
        PassLength::Short => v[schema.passlen_offset()] = 1.0,
        PassLength::Deep => v[schema.passlen_offset() + 1] = 1.0,
        PassLength::None => {}
    }
    let c = schema.continuous_offset();
    v[c] = features.half as f64;
    v[c + 1] = features.time as f64;
    v[c + 2] = features.position as f64;
    v[c + 3] = features.down as f64;
    v[c + 4] = features.togo as f64;
    let f = schema.flag_offset();
    v[f] = flag(features.shotgun);
    v[f + 1] = flag(features.pass);
    v[f + 2] = flag(features.qbrun);
    Ok(v)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Inverse of [`encode`] for well-formed vectors.
pub fn decode(v: &[f64], schema: &EncodingSchema) -> Result<PlayFeatures> {
    crate::matrix::check_width(schema.width(), v.len())?;
    let n_teams = schema.teams.len();
    let one_hot = |block: &[f64], what: &str| -> Result<Option<usize>> {
        let hot: Vec<usize> = (0..block.len()).filter(|&i| block[i] == 1.0).collect();
        match hot.as_slice() {
            [] => Ok(None),
            [i] => Ok(Some(*i)),
            _ => Err(Error::InvalidInput(format!("{what} block has several hot columns"))),
        }
    };
    let team = one_hot(&v[..n_teams], "team")?.ok_or_else(|| Error::InvalidInput("team block is empty".into()))?;
    let opponent = one_hot(&v[n_teams..2 * n_teams], "opponent")?
        .ok_or_else(|| Error::InvalidInput("opponent block is empty".into()))?;
    let s = schema.side_offset();
    let side = match one_hot(&v[s..s + 3], "side")? {
        Some(i) => Side::DIRECTIONS[i],
        None => Side::None,
    };
    let p = schema.passlen_offset();
    let passlen = match one_hot(&v[p..p + 2], "passlen")? {
        Some(i) => PassLength::LENGTHS[i],
        None => PassLength::None,
    };
    let c = schema.continuous_offset();
    let f = schema.flag_offset();
    Ok(PlayFeatures {
        team: schema.teams[team].clone(),
        opponent: schema.teams[opponent].clone(),
        half: v[c] as u8,
        time: v[c + 1] as u32,
        position: v[c + 2] as u32,
        down: v[c + 3] as u8,
        togo: v[c + 4] as u32,
        shotgun: v[f] == 1.0,
        pass: v[f + 1] == 1.0,
        qbrun: v[f + 2] == 1.0,
        side,
        passlen,
    })
}

/// Per-column min-max scaling to `[0, 1]`, fitted on training data.
///
/// Constant columns map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("scaler training matrix"));
        }
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for row in x.iter_rows() {
            for j in 0..row.len() {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        crate::matrix::check_width(self.width(), row.len())?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    (v - self.min[j]) / span
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            let row = self.transform_row(x.row(i))?;
            out.row_mut(i).copy_from_slice(&row);
        }
        Ok(out)
    }
}
