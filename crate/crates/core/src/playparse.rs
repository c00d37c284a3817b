//! Play-description parsing.
//!
//! A raw play record carries the game context (clock, field position,
//! down and distance) plus the free-text description produced by the
//! league's game center feed, e.g.
//!
//! ```text
//! (9:56) M.Ryan pass short left to M.Jenkins to CAR 17 for 7 yards (T.Davis).
//! ```
//!
//! [`classify_record`] decides whether a record describes an ordinary
//! offensive snap (run, pass, scramble). [`parse_play`] extracts the
//! twelve situation/play features and the raw outcome from a relevant
//! record.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One imported play: game context plus the free-text description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawPlayRecord {
    pub game_id: String,
    /// Offense.
    pub team: String,
    /// Defense.
    pub opponent: String,
    /// 1-4, 5 for overtime.
    pub quarter: u8,
    /// Seconds remaining in the quarter, 0-900.
    pub clock_seconds: u32,
    /// Yards to the opponent's end zone, 1-99.
    pub yardline: u32,
    pub down: u8,
    pub togo: u32,
    pub description: String,
}

impl RawPlayRecord {
    /// Checks the range invariants of the context fields.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(1..=5).contains(&self.quarter) {
            return bad(format!("quarter {} outside 1..=5", self.quarter));
        }
        if self.clock_seconds > 900 {
            return bad(format!("clock_seconds {} above 900", self.clock_seconds));
        }
        if !(1..=99).contains(&self.yardline) {
            return bad(format!("yardline {} outside 1..=99", self.yardline));
        }
        if !(1..=4).contains(&self.down) {
            return bad(format!("down {} outside 1..=4", self.down));
        }
        if self.togo < 1 {
            return bad("togo must be at least 1".to_string());
        }
        if self.team.is_empty() || self.opponent.is_empty() {
            return bad("team and opponent must be non-empty".to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Middle,
    Right,
    None,
}

impl Side {
    pub const DIRECTIONS: [Side; 3] = [Side::Left, Side::Middle, Side::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Middle => "middle",
            Side::Right => "right",
            Side::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PassLength {
    Short,
    Deep,
    None,
}

impl PassLength {
    pub const LENGTHS: [PassLength; 2] = [PassLength::Short, PassLength::Deep];

    pub fn as_str(self) -> &'static str {
        match self {
            PassLength::Short => "short",
            PassLength::Deep => "deep",
            PassLength::None => "none",
        }
    }
}

/// The twelve features extracted for every relevant play.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayFeatures {
    pub team: String,
    pub opponent: String,
    pub half: u8,
    /// Seconds remaining in the half.
    pub time: u32,
    /// Yards to the opponent's end zone.
    pub position: u32,
    pub down: u8,
    pub togo: u32,
    pub shotgun: bool,
    pub pass: bool,
    pub side: Side,
    pub passlen: PassLength,
    pub qbrun: bool,
}

impl PlayFeatures {
    /// Play-type invariants: a pass length exists exactly for passes and a
    /// quarterback run is never a pass.
    pub fn check_play_invariants(&self) -> Result<()> {
        check_play_shape(self.pass, self.passlen, self.qbrun)
    }
}

pub(crate) fn check_play_shape(pass: bool, passlen: PassLength, qbrun: bool) -> Result<()> {
    if pass != (passlen != PassLength::None) {
        return Err(Error::InvalidInput(format!("pass={pass} is inconsistent with passlen={}", passlen.as_str())));
    }
    if qbrun && pass {
        return Err(Error::InvalidInput("a quarterback run cannot also be a pass".to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayOutcome {
    /// Yards gained; negative for losses, 0 for incomplete or intercepted passes.
    pub gained: i32,
    pub touchdown: bool,
    pub intercepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Penalty,
    NoPlaySentence,
    Kick,
    Punt,
    FieldGoal,
    Sack,
    Fumble,
    #[serde(rename = "interception_or_turnover_notes_kept_separately")]
    Interception,
    TimeoutOrAdmin,
    Overtime,
    Unparseable,
}

impl RejectReason {
    pub const ALL: [RejectReason; 11] = [
        RejectReason::Penalty,
        RejectReason::NoPlaySentence,
        RejectReason::Kick,
        RejectReason::Punt,
        RejectReason::FieldGoal,
        RejectReason::Sack,
        RejectReason::Fumble,
        RejectReason::Interception,
        RejectReason::TimeoutOrAdmin,
        RejectReason::Overtime,
        RejectReason::Unparseable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Penalty => "penalty",
            RejectReason::NoPlaySentence => "no_play_sentence",
            RejectReason::Kick => "kick",
            RejectReason::Punt => "punt",
            RejectReason::FieldGoal => "field_goal",
            RejectReason::Sack => "sack",
            RejectReason::Fumble => "fumble",
            RejectReason::Interception => "interception_or_turnover_notes_kept_separately",
            RejectReason::TimeoutOrAdmin => "timeout_or_admin",
            RejectReason::Overtime => "overtime",
            RejectReason::Unparseable => "unparseable",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Relevant,
    Rejected(RejectReason),
}

/// Record filter switches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOptions {
    /// Reject intercepted passes instead of keeping them as zero-yard failures.
    #[serde(default)]
    pub exclude_interceptions: bool,
}

/// A relevant record after extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedPlay {
    pub features: PlayFeatures,
    pub outcome: PlayOutcome,
}

macro_rules! re {
    ($name:ident, $pat:expr) => {
        static $name: LazyLock<Regex> = LazyLock::new(|| Regex::new($pat).unwrap());
    };
}

re!(PENALTY, r"PENALTY|\bNo Play\b");
re!(FIELD_GOAL, r"(?i)\bfield goal\b");
re!(PUNT, r"\bpunts\b");
re!(KICK, r"\bkicks\b|(?i)\bextra point\b|(?i)\btwo-point conversion\b");
re!(SACK, r"\bsacked\b");
re!(FUMBLE, r"(?i)\bfumbles?\b");
re!(KNEEL_SPIKE, r"\bkneels\b|\bspiked\b");
re!(INTERCEPTED, r"INTERCEPTED");
re!(
    ADMIN,
    r"(?i)\btimeout\b|two-minute warning|\bend (?:of )?(?:quarter|half|game)\b|\binjured\b|\breported in as eligible\b"
);
re!(YARDAGE, r"\bfor (-?\d+) yards?\b|\bfor no gain\b");
re!(INCOMPLETE, r"\bincomplete\b");
re!(TOUCHDOWN, r"TOUCHDOWN");
re!(PASS_TOKEN, r"\bpass\b");
re!(PASS_DETAIL, r"\bpass(?: incomplete)? (short|deep)(?: (left|middle|right)\b)?");
re!(SCRAMBLE, r"\bscrambles\b");
re!(RUN_DIRECTION, r"\b(left|right) (?:end|tackle|guard)\b|\bup the middle\b");

/// Maps quarter and quarter clock to (half, seconds remaining in the half).
///
/// Quarter 5 (overtime) has no half; callers reject it before this point.
pub fn clock_to_half_time(quarter: u8, clock_seconds: u32) -> Result<(u8, u32)> {
    match quarter {
        1 => Ok((1, clock_seconds + 900)),
        2 => Ok((1, clock_seconds)),
        3 => Ok((2, clock_seconds + 900)),
        4 => Ok((2, clock_seconds)),
        q => Err(Error::InvalidInput(format!("quarter {q} has no regulation half"))),
    }
}

/// Decides whether a record describes an offensive snap we model.
pub fn classify_record(record: &RawPlayRecord) -> Classification {
    classify_with(record, &FilterOptions::default())
}

pub fn classify_with(record: &RawPlayRecord, opts: &FilterOptions) -> Classification {
    match process_record(record, opts) {
        Ok(_) => Classification::Relevant,
        Err(reason) => Classification::Rejected(reason),
    }
}

/// Classification and extraction in one pass; rejected records are never
/// handed to the extractor.
pub fn process_record(record: &RawPlayRecord, opts: &FilterOptions) -> std::result::Result<ParsedPlay, RejectReason> {
    if let Some(reason) = screen(record, opts) {
        return Err(reason);
    }
    let sentence = match play_sentence(&record.description) {
        Some(s) => s,
        None if ADMIN.is_match(&record.description) => return Err(RejectReason::TimeoutOrAdmin),
        None => return Err(RejectReason::NoPlaySentence),
    };
    extract(record, sentence)
        .map(|(features, outcome)| ParsedPlay { features, outcome })
        .map_err(|_| RejectReason::Unparseable)
}

/// Extracts features and outcome from a relevant record.
pub fn parse_play(record: &RawPlayRecord) -> Result<(PlayFeatures, PlayOutcome)> {
    let sentence = play_sentence(&record.description)
        .ok_or_else(|| Error::Unparseable(format!("no play sentence in {:?}", record.description)))?;
    extract(record, sentence)
}

fn screen(record: &RawPlayRecord, opts: &FilterOptions) -> Option<RejectReason> {
    let d = record.description.as_str();
    if record.quarter == 5 {
        return Some(RejectReason::Overtime);
    }
    if PENALTY.is_match(d) {
        return Some(RejectReason::Penalty);
    }
    if FIELD_GOAL.is_match(d) {
        return Some(RejectReason::FieldGoal);
    }
    if PUNT.is_match(d) {
        return Some(RejectReason::Punt);
    }
    if KICK.is_match(d) {
        return Some(RejectReason::Kick);
    }
    if SACK.is_match(d) {
        return Some(RejectReason::Sack);
    }
    if FUMBLE.is_match(d) {
        return Some(RejectReason::Fumble);
    }
    if KNEEL_SPIKE.is_match(d) {
        return Some(RejectReason::TimeoutOrAdmin);
    }
    if opts.exclude_interceptions && INTERCEPTED.is_match(d) {
        return Some(RejectReason::Interception);
    }
    None
}

/// Splits on ". " and returns the first sentence that reports a result.
fn play_sentence(description: &str) -> Option<&str> {
    description
        .split(". ")
        .find(|s| YARDAGE.is_match(s) || INCOMPLETE.is_match(s) || TOUCHDOWN.is_match(s) || INTERCEPTED.is_match(s))
}

/// Strips leading parenthesised groups such as "(9:56)" or
/// "(No Huddle, Shotgun)" and returns them with the remainder.
fn leading_groups(s: &str) -> (Vec<&str>, &str) {
    let mut groups = Vec::new();
    let mut rest = s.trim_start();
    while let Some(inner) = rest.strip_prefix('(') {
        match inner.find(')') {
            Some(end) => {
                groups.push(&inner[..end]);
                rest = inner[end + 1..].trim_start();
            }
            None => break,
        }
    }
    (groups, rest)
}

fn extract(record: &RawPlayRecord, sentence: &str) -> Result<(PlayFeatures, PlayOutcome)> {
    let unparseable = |why: &str| Error::Unparseable(format!("{why}: {:?}", record.description));

    let (half, time) = clock_to_half_time(record.quarter, record.clock_seconds)?;
    let (head_groups, _) = leading_groups(&record.description);
    let (sentence_groups, body) = leading_groups(sentence);
    let shotgun = head_groups.iter().chain(sentence_groups.iter()).any(|g| g.contains("Shotgun"));

    let intercepted = INTERCEPTED.is_match(body);
    let incomplete = INCOMPLETE.is_match(body);
    let qbrun = SCRAMBLE.is_match(body);
    let pass = !qbrun && PASS_TOKEN.is_match(body);

    let (side, passlen) = if pass {
        let caps = PASS_DETAIL.captures(body).ok_or_else(|| unparseable("pass without short/deep length"))?;
        let passlen = match &caps[1] {
            "short" => PassLength::Short,
            _ => PassLength::Deep,
        };
        let side = match caps.get(2).map(|m| m.as_str()) {
            Some("left") => Side::Left,
            Some("middle") => Side::Middle,
            Some("right") => Side::Right,
            _ => Side::None,
        };
        (side, passlen)
    } else {
        let caps = RUN_DIRECTION.captures(body).ok_or_else(|| unparseable("run without direction"))?;
        let side = match caps.get(1).map(|m| m.as_str()) {
            Some("left") => Side::Left,
            Some("right") => Side::Right,
            _ => Side::Middle,
        };
        (side, PassLength::None)
    };

    let touchdown = !intercepted && TOUCHDOWN.is_match(body);
    let gained = if intercepted || (pass && incomplete) {
        0
    } else if touchdown {
        // the ball reached the end zone
        record.yardline as i32
    } else {
        let caps = YARDAGE.captures(body).ok_or_else(|| unparseable("no yardage phrase"))?;
        match caps.get(1) {
            Some(n) => n.as_str().parse::<i32>().map_err(|_| unparseable("yardage out of range"))?,
            None => 0,
        }
    };

    let features = PlayFeatures {
        team: record.team.clone(),
        opponent: record.opponent.clone(),
        half,
        time,
        position: record.yardline,
        down: record.down,
        togo: record.togo,
        shotgun,
        pass,
        side,
        passlen,
        qbrun,
    };
    let outcome = PlayOutcome { gained, touchdown, intercepted };
    Ok((features, outcome))
}
