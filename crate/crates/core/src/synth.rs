//! Synthetic play-by-play corpora with planted structure.
//!
//! The real multi-season corpus is not redistributable, so tests and demos
//! run on generated records. The generator plants two signals whose exact
//! values are known:
//!
//! * success probability is a logistic step in `togo` centred on
//!   `success_threshold` (7.5 yards by default);
//! * deep passes gain `deep_mean` yards on average and every other play
//!   gains `other_mean`.
//!
//! Success is drawn first and the gain is drawn conditional on it, so the
//! success label and the yards label agree by construction. For non-deep
//! plays the conditional means are solved per `togo` value so that
//! `E[gained | togo] = other_mean` exactly; without that, yards would leak
//! `togo` information and compete with the deep-pass split.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::encode::NFL_TEAMS;
use crate::error::{Error, Result};
use crate::playparse::{PassLength, RawPlayRecord, Side};
use crate::rng;

/// A play type whose success probability is overridden, used to plant a
/// single dominant candidate for ranking tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FavoredPlay {
    pub side: Side,
    pub passlen: PassLength,
    pub success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub teams: Vec<String>,
    /// Share of plays drawn at exactly 10 yards to go; the rest are uniform
    /// on `1..=max_togo`.
    pub togo_ten_share: f64,
    pub max_togo: u32,
    pub success_low: f64,
    pub success_high: f64,
    pub success_slope: f64,
    pub success_threshold: f64,
    pub deep_share: f64,
    pub short_share: f64,
    pub scramble_share: f64,
    pub deep_mean: f64,
    pub other_mean: f64,
    /// Expected shortfall below `togo - 1` on a failed deep pass.
    pub deep_failure_shortfall: f64,
    pub shotgun_share: f64,
    pub favored: Option<FavoredPlay>,
    /// Share of lines replaced by penalties and punts.
    pub reject_share: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            teams: NFL_TEAMS.iter().map(|t| t.to_string()).collect(),
            togo_ten_share: 0.45,
            max_togo: 20,
            success_low: 0.12,
            success_high: 0.8,
            success_slope: 4.0,
            success_threshold: 7.5,
            deep_share: 0.35,
            short_share: 0.3,
            scramble_share: 0.05,
            deep_mean: 11.1,
            other_mean: 5.3,
            deep_failure_shortfall: 1.0,
            shotgun_share: 0.5,
            favored: None,
            reject_share: 0.0,
        }
    }
}

/// Exact values implied by a spec, for comparison against fitted models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub success_threshold: f64,
    /// `P(togo = t)` for `t = 1..=max_togo`.
    pub togo_probabilities: Vec<f64>,
    pub success_probabilities: Vec<f64>,
    pub success_rate: f64,
    /// Accuracy of the rule "success iff togo <= threshold" on the
    /// generating distribution (favored plays excluded).
    pub stump_accuracy: f64,
    pub deep_mean: f64,
    pub other_mean: f64,
    /// Conditional mean surplus over `togo` of a successful deep pass.
    pub deep_success_surplus: f64,
    pub expected_rejects: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub records: Vec<RawPlayRecord>,
    pub truth: PlantedTruth,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("synth spec: {m}")));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if self.teams.len() < 2 {
            return bad("need at least two teams");
        }
        if self.max_togo < 10 {
            return bad("max_togo must be at least 10");
        }
        for (name, v) in [
            ("togo_ten_share", self.togo_ten_share),
            ("deep_share", self.deep_share),
            ("short_share", self.short_share),
            ("scramble_share", self.scramble_share),
            ("shotgun_share", self.shotgun_share),
            ("reject_share", self.reject_share),
        ] {
            if !unit(v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if self.deep_share + self.short_share + self.scramble_share > 1.0 {
            return bad("play-type shares exceed 1");
        }
        if !(0.0 < self.success_low && self.success_low < self.success_high && self.success_high < 1.0) {
            return bad("need 0 < success_low < success_high < 1");
        }
        if !(self.deep_mean > 0.0 && self.other_mean > 0.0 && self.deep_failure_shortfall >= 0.0) {
            return bad("gain means must be positive");
        }
        if let Some(f) = self.favored {
            if f.passlen == PassLength::None || f.side == Side::None || !(0.0 < f.success && f.success < 1.0) {
                return bad("favored play must be a sided pass with success in (0, 1)");
            }
        }
        if self.deep_surplus() < 0.0 {
            return bad("deep_mean too small for the success curve");
        }
        Ok(())
    }

    pub fn success_probability(&self, togo: u32) -> f64 {
        let z = self.success_slope * (self.success_threshold - togo as f64);
        self.success_low + (self.success_high - self.success_low) / (1.0 + (-z).exp())
    }

    fn togo_probabilities(&self) -> Vec<f64> {
        let uniform = (1.0 - self.togo_ten_share) / self.max_togo as f64;
        (1..=self.max_togo).map(|t| uniform + if t == 10 { self.togo_ten_share } else { 0.0 }).collect()
    }

    /// Deep passes: failures fall `1 + shortfall` short of `togo` on average,
    /// successes exceed it by this surplus, solved on the togo marginal.
    fn deep_surplus(&self) -> f64 {
        let pt = self.togo_probabilities();
        let (mut et, mut ps) = (0.0, 0.0);
        for (i, p) in pt.iter().enumerate() {
            let t = (i + 1) as u32;
            et += p * t as f64;
            ps += p * self.success_probability(t);
        }
        (self.deep_mean - et + (1.0 - ps) * (1.0 + self.deep_failure_shortfall)) / ps
    }

    pub fn truth(&self) -> PlantedTruth {
        let pt = self.togo_probabilities();
        let ps: Vec<f64> = (1..=self.max_togo).map(|t| self.success_probability(t)).collect();
        let success_rate = pt.iter().zip(&ps).map(|(a, b)| a * b).sum();
        let stump_accuracy = pt
            .iter()
            .zip(&ps)
            .enumerate()
            .map(|(i, (a, p))| if ((i + 1) as f64) <= self.success_threshold { a * p } else { a * (1.0 - p) })
            .sum();
        PlantedTruth {
            success_threshold: self.success_threshold,
            togo_probabilities: pt,
            success_probabilities: ps,
            success_rate,
            stump_accuracy,
            deep_mean: self.deep_mean,
            other_mean: self.other_mean,
            deep_success_surplus: self.deep_surplus(),
            expected_rejects: self.reject_share * self.n as f64,
        }
    }
}

/// Conditional (surplus on success, shortfall on failure) for a non-deep
/// play at `togo` so that the unconditional mean gain is exactly `mean`.
fn calibrated_gain_means(togo: u32, p: f64, mean: f64) -> (f64, f64) {
    let t = togo as f64;
    let shortfall = (0.5 * t).max((t - mean) / (1.0 - p) - 1.0 + 0.5);
    let surplus = (mean - t + (1.0 - p) * (1.0 + shortfall)) / p;
    (surplus, shortfall)
}

/// Non-negative integer with the given mean and a light right tail.
fn draw_count<R: Rng>(rng: &mut R, mean: f64) -> i32 {
    if mean <= 0.0 {
        return 0;
    }
    let trials = (2.0 * mean).ceil() as u64 + 1;
    Binomial::new(trials, mean / trials as f64).expect("binomial parameters in range").sample(rng) as i32
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Deep,
    Short,
    Run,
    Scramble,
}

const QBS: [&str; 6] = ["M.Ryan", "T.Brady", "A.Rodgers", "D.Brees", "P.Rivers", "E.Manning"];
const BACKS: [&str; 6] = ["A.Peterson", "M.Lynch", "F.Gore", "J.Charles", "L.McCoy", "C.Johnson"];
const RECEIVERS: [&str; 6] = ["J.Jones", "C.Johnson", "A.Green", "D.Bryant", "W.Welker", "J.Graham"];
const DEFENDERS: [&str; 6] = ["T.Davis", "J.Peppers", "L.Kuechly", "R.Lewis", "P.Willis", "E.Reed"];

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

fn clock_text(seconds: u32) -> String {
    let (m, s) = (seconds / 60, seconds % 60);
    if m == 0 {
        format!("(:{s:02})")
    } else {
        format!("({m}:{s:02})")
    }
}

/// Spot of the ball after the play, e.g. "CAR 17" or "ATL 40".
fn spot(team: &str, opponent: &str, yards_to_goal: i32) -> String {
    match yards_to_goal {
        50 => "50".to_string(),
        r if r < 50 => format!("{opponent} {r}"),
        r => format!("{team} {}", 100 - r),
    }
}

fn yardage(g: i32) -> String {
    match g {
        0 => "for no gain".to_string(),
        1 | -1 => format!("for {g} yard"),
        _ => format!("for {g} yards"),
    }
}

fn run_direction<R: Rng>(rng: &mut R, side: Side) -> &'static str {
    match side {
        Side::Left => ["left end", "left tackle", "left guard"][rng.random_range(0..3)],
        Side::Right => ["right end", "right tackle", "right guard"][rng.random_range(0..3)],
        _ => "up the middle",
    }
}

fn random_side<R: Rng>(rng: &mut R) -> Side {
    Side::DIRECTIONS[rng.random_range(0..3)]
}

/// Generates `spec.n` records. Identical (spec, seed) pairs give identical
/// output.
pub fn synthesize(spec: &SynthSpec, seed: u64) -> Result<SynthOutput> {
    spec.validate()?;
    let truth = spec.truth();
    let mut rng = rng::seeded(seed);
    let surplus_deep = truth.deep_success_surplus;
    let mut records = Vec::with_capacity(spec.n);

    for i in 0..spec.n {
        let ti = rng.random_range(0..spec.teams.len());
        let mut oi = rng.random_range(0..spec.teams.len() - 1);
        if oi >= ti {
            oi += 1;
        }
        let team = spec.teams[ti].clone();
        let opponent = spec.teams[oi].clone();
        let quarter = rng.random_range(1..=4u8);
        let clock_seconds = rng.random_range(0..=900u32);
        let down = [1u8, 1, 1, 1, 2, 2, 2, 3, 3, 4][rng.random_range(0..10)];
        let yardline = rng.random_range(45..=99u32);
        let togo = if rng.random_bool(spec.togo_ten_share) { 10 } else { rng.random_range(1..=spec.max_togo) };
        let game_id = format!("synth-{seed}-{:05}", i / 150);
        let clock = clock_text(clock_seconds);

        if spec.reject_share > 0.0 && rng.random_bool(spec.reject_share) {
            let description = if rng.random_bool(0.5) {
                format!(
                    "{clock} PENALTY on {team}-{}, False Start, 5 yards, enforced at {} - No Play.",
                    pick(&mut rng, &BACKS),
                    spot(&team, &opponent, yardline as i32)
                )
            } else {
                format!(
                    "{clock} S.Koch punts 45 yards to {}, Center-M.Cox.",
                    spot(&team, &opponent, (yardline as i32 - 45).max(1))
                )
            };
            records.push(RawPlayRecord {
                game_id,
                team,
                opponent,
                quarter,
                clock_seconds,
                yardline,
                down,
                togo,
                description,
            });
            continue;
        }

        let u: f64 = rng.random();
        let kind = if u < spec.deep_share {
            Kind::Deep
        } else if u < spec.deep_share + spec.short_share {
            Kind::Short
        } else if u < spec.deep_share + spec.short_share + spec.scramble_share {
            Kind::Scramble
        } else {
            Kind::Run
        };
        let side = random_side(&mut rng);
        let shotgun = kind == Kind::Scramble || rng.random_bool(spec.shotgun_share);
        let passlen = match kind {
            Kind::Deep => PassLength::Deep,
            Kind::Short => PassLength::Short,
            _ => PassLength::None,
        };

        let favored = spec.favored.filter(|f| f.side == side && f.passlen == passlen);
        let p = match favored {
            Some(f) => f.success,
            None => spec.success_probability(togo),
        };
        let success = rng.random_bool(p);
        let (surplus, shortfall) = if kind == Kind::Deep {
            (surplus_deep, spec.deep_failure_shortfall)
        } else {
            calibrated_gain_means(togo, p, spec.other_mean)
        };
        let t = togo as i32;
        let gained = if success { t + draw_count(&mut rng, surplus) } else { t - 1 - draw_count(&mut rng, shortfall) };

        let formation = if shotgun { "(Shotgun) " } else { "" };
        let tackler = pick(&mut rng, &DEFENDERS);
        let to = spot(&team, &opponent, yardline as i32 - gained);
        let description = match kind {
            Kind::Deep | Kind::Short => {
                let qb = pick(&mut rng, &QBS);
                let wr = pick(&mut rng, &RECEIVERS);
                let len = passlen.as_str();
                let dir = side.as_str();
                if gained == 0 && rng.random_bool(0.8) {
                    format!("{clock} {formation}{qb} pass incomplete {len} {dir} to {wr}.")
                } else {
                    format!("{clock} {formation}{qb} pass {len} {dir} to {wr} to {to} {} ({tackler}).", yardage(gained))
                }
            }
            Kind::Run => format!(
                "{clock} {formation}{} {} to {to} {} ({tackler}).",
                pick(&mut rng, &BACKS),
                run_direction(&mut rng, side),
                yardage(gained)
            ),
            Kind::Scramble => format!(
                "{clock} {formation}{} scrambles {} to {to} {} ({tackler}).",
                pick(&mut rng, &QBS),
                run_direction(&mut rng, side),
                yardage(gained)
            ),
        };
        records.push(RawPlayRecord {
            game_id,
            team,
            opponent,
            quarter,
            clock_seconds,
            yardline,
            down,
            togo,
            description,
        });
    }
    Ok(SynthOutput { records, truth })
}

/// Writes records in the line-delimited corpus format.
pub fn write_records<W: Write>(mut out: W, records: &[RawPlayRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
