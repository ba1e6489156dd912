//! Synthetic check-in corpora with a known temporal pattern.
//!
//! POIs are grouped into neighbourhoods of two: POI `k` (daytime) and POI
//! `k + n/2` (evening), with an odd last POI pairing with itself. Visits
//! happen one or two days apart, at an hour drawn from `[6, 14]` or
//! `[15, 23]` with equal probability. Under [`Pattern::TimeDependent`] the
//! successor of POI `a` is the daytime POI of `a`'s neighbourhood when the
//! next visit falls in daytime hours and its evening POI otherwise, so a
//! ranker blind to the next visit's hour cannot beat a coin flip between the
//! two. A user's first POI is uniform, which fixes their neighbourhood.
//! Under [`Pattern::TimeBlind`] every visit is uniform over all POIs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{CheckInRecord, Corpus};

/// 2012-04-02T00:00:00Z, a Monday.
const START: i64 = 1_333_324_800;
const DAY: i64 = 86_400;

pub const DAYTIME_HOURS: std::ops::RangeInclusive<u8> = 6..=14;
pub const EVENING_HOURS: std::ops::RangeInclusive<u8> = 15..=23;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    TimeDependent,
    TimeBlind,
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time-dependent" | "time_dependent" => Ok(Pattern::TimeDependent),
            "time-blind" | "time_blind" => Ok(Pattern::TimeBlind),
            other => Err(format!("unknown pattern `{other}`")),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::TimeDependent => "time-dependent",
            Pattern::TimeBlind => "time-blind",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_pois: usize,
    pub records_per_user: usize,
    pub pattern: Pattern,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n_users: usize, n_pois: usize, pattern: Pattern, seed: u64) -> Self {
        Self {
            n_users,
            n_pois,
            records_per_user: 100,
            pattern,
            seed,
        }
    }
}

/// Neighbourhood successor of `poi` among `2 * half (+1)` POIs.
fn successor(poi: usize, half: usize, daytime: bool) -> usize {
    if poi >= 2 * half {
        return poi;
    }
    let neighbourhood = poi % half;
    if daytime {
        neighbourhood
    } else {
        neighbourhood + half
    }
}

/// Whether `hour` falls in the daytime bucket.
pub fn is_daytime(hour: u8) -> bool {
    DAYTIME_HOURS.contains(&hour)
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Corpus> {
    if config.n_users < 1 {
        return Err(Error::InvalidArgument("need at least 1 user".into()));
    }
    if config.n_pois < 4 {
        return Err(Error::InvalidArgument("need at least 4 POIs".into()));
    }
    if config.records_per_user < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 records per user".into(),
        ));
    }
    let user_width = (config.n_users - 1).to_string().len();
    let poi_width = (config.n_pois - 1).to_string().len();
    let half = config.n_pois / 2;

    let mut records = Vec::with_capacity(config.n_users * config.records_per_user);
    for u in 0..config.n_users {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(u as u64);

        let mut day = rng.gen_range(0..365i64);
        let user = format!("u{u:0user_width$}");

        let mut prev = 0;
        for k in 0..config.records_per_user {
            if k > 0 {
                day += rng.gen_range(1..=2);
            }
            let daytime = rng.gen_bool(0.5);
            let hour = if daytime {
                rng.gen_range(DAYTIME_HOURS)
            } else {
                rng.gen_range(EVENING_HOURS)
            };
            let minute = rng.gen_range(0..60i64);
            let poi = match config.pattern {
                _ if k == 0 => rng.gen_range(0..config.n_pois),
                Pattern::TimeDependent => successor(prev, half, daytime),
                Pattern::TimeBlind => rng.gen_range(0..config.n_pois),
            };
            prev = poi;
            records.push(CheckInRecord {
                user: user.clone(),
                poi: format!("p{poi:0poi_width$}"),
                timestamp: START + day * DAY + i64::from(hour) * 3600 + minute * 60,
                tz_offset_minutes: 0,
            });
        }
    }
    Corpus::from_records(&records)
}
