//! Check-in dataset ingestion.
//!
//! Two line formats are understood:
//!
//! * `generic_tsv`: `user<TAB>poi<TAB>timestamp`, where the timestamp is
//!   ISO-8601 / RFC 3339. The string's own UTC offset is the local zone; a
//!   timestamp without an offset is taken as UTC.
//! * `foursquare_tsv`: the 8-column NYC/TKY check-in dump. Columns 1, 2, 7
//!   (timezone offset in minutes) and 8 (`Tue Apr 03 18:00:09 +0000 2012`)
//!   are consumed, everything else is ignored.
//!
//! Vocabularies are normalized to lexicographic id order so that the same
//! set of records always yields the same dense indices regardless of line
//! order.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, FixedOffset, NaiveDateTime, SecondsFormat, Timelike};

use crate::error::{Error, Result};

/// Calendar features of a local time. `weekday` is 0 = Monday, `month` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeKey {
    pub month: u8,
    pub weekday: u8,
    pub hour: u8,
}

impl TimeKey {
    pub fn new(month: u8, weekday: u8, hour: u8) -> Result<Self> {
        if !(1..=12).contains(&month) || weekday > 6 || hour > 23 {
            return Err(Error::InvalidArgument(format!(
                "time key out of range: month={month} weekday={weekday} hour={hour}"
            )));
        }
        Ok(Self {
            month,
            weekday,
            hour,
        })
    }
}

/// Splits an instant (UTC seconds) into local month / weekday / hour, where
/// local time is the instant shifted by `tz_offset_minutes`.
pub fn decompose_time(timestamp: i64, tz_offset_minutes: i32) -> TimeKey {
    let local = timestamp + i64::from(tz_offset_minutes) * 60;
    let dt = DateTime::from_timestamp(local, 0)
        .expect("timestamp within chrono's representable range")
        .naive_utc();
    TimeKey {
        month: dt.month() as u8,
        weekday: dt.weekday().num_days_from_monday() as u8,
        hour: dt.hour() as u8,
    }
}

/// One raw check-in line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckInRecord {
    pub user: String,
    pub poi: String,
    /// UTC seconds.
    pub timestamp: i64,
    pub tz_offset_minutes: i32,
}

impl CheckInRecord {
    pub fn time_key(&self) -> TimeKey {
        decompose_time(self.timestamp, self.tz_offset_minutes)
    }
}

/// A check-in inside a [`Corpus`] sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub time: TimeKey,
    pub poi: usize,
    pub timestamp: i64,
    pub tz_offset_minutes: i32,
}

/// Bijection between string ids and dense indices `[0, n)`.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
    }
}

impl Eq for Vocab {}

impl Vocab {
    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if id.is_empty() {
                return Err(Error::InvalidArgument("empty id in vocabulary".into()));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate id `{id}`")));
            }
        }
        Ok(Self { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    fn push(&mut self, id: &str) -> usize {
        if let Some(i) = self.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }
}

/// Users, POIs, and each user's chronologically sorted visits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    users: Vocab,
    pois: Vocab,
    sequences: Vec<Vec<Visit>>,
}

impl Corpus {
    /// Builds a corpus with sorted vocabularies. Records of one user keep
    /// their input order among equal timestamps.
    pub fn from_records(records: &[CheckInRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for r in records {
            if r.user.is_empty() || r.poi.is_empty() {
                return Err(Error::InvalidArgument("empty user or poi id".into()));
            }
        }
        let user_ids: BTreeSet<&str> = records.iter().map(|r| r.user.as_str()).collect();
        let poi_ids: BTreeSet<&str> = records.iter().map(|r| r.poi.as_str()).collect();
        let users = Vocab::from_ids(user_ids.into_iter().map(str::to_owned).collect())?;
        let pois = Vocab::from_ids(poi_ids.into_iter().map(str::to_owned).collect())?;

        let mut sequences = vec![Vec::new(); users.len()];
        for r in records {
            let u = users.get(&r.user).expect("user interned above");
            sequences[u].push(Visit {
                time: r.time_key(),
                poi: pois.get(&r.poi).expect("poi interned above"),
                timestamp: r.timestamp,
                tz_offset_minutes: r.tz_offset_minutes,
            });
        }
        for seq in &mut sequences {
            seq.sort_by_key(|v| v.timestamp);
        }
        Ok(Self {
            users,
            pois,
            sequences,
        })
    }

    pub fn users(&self) -> &Vocab {
        &self.users
    }

    pub fn pois(&self) -> &Vocab {
        &self.pois
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_pois(&self) -> usize {
        self.pois.len()
    }

    pub fn sequence(&self, user: usize) -> &[Visit] {
        &self.sequences[user]
    }

    pub fn sequences(&self) -> &[Vec<Visit>] {
        &self.sequences
    }

    pub fn n_records(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    /// Re-indexes the corpus against a model's vocabularies. Known ids take
    /// the model's indices; unknown ids are appended after them, so any index
    /// `>= user_ids.len()` (or `>= poi_ids.len()`) marks an id the model has
    /// never seen.
    pub fn align_to(&self, user_ids: &[String], poi_ids: &[String]) -> Result<Self> {
        let mut users = Vocab::from_ids(user_ids.to_vec())?;
        let mut pois = Vocab::from_ids(poi_ids.to_vec())?;
        let poi_map: Vec<usize> = self.pois.ids().iter().map(|id| pois.push(id)).collect();
        let mut sequences = vec![Vec::new(); users.len()];
        for (u, seq) in self.sequences.iter().enumerate() {
            let new_u = users.push(self.users.id(u));
            if new_u >= sequences.len() {
                sequences.resize(new_u + 1, Vec::new());
            }
            sequences[new_u] = seq
                .iter()
                .map(|v| Visit {
                    poi: poi_map[v.poi],
                    ..*v
                })
                .collect();
        }
        Ok(Self {
            users,
            pois,
            sequences,
        })
    }

    /// Every record in user-index order, each user's visits in sequence order.
    pub fn records(&self) -> impl Iterator<Item = CheckInRecord> + '_ {
        self.sequences.iter().enumerate().flat_map(move |(u, seq)| {
            seq.iter().map(move |v| CheckInRecord {
                user: self.users.id(u).to_owned(),
                poi: self.pois.id(v.poi).to_owned(),
                timestamp: v.timestamp,
                tz_offset_minutes: v.tz_offset_minutes,
            })
        })
    }

    /// Writes the corpus as `generic_tsv`. Each timestamp carries its record's
    /// offset so local calendar features survive a re-parse.
    pub fn write_generic_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in self.records() {
            writeln!(
                out,
                "{}\t{}\t{}",
                r.user,
                r.poi,
                format_iso(r.timestamp, r.tz_offset_minutes)
            )?;
        }
        out.flush()
    }
}

/// Formats an instant in the given offset, e.g. `2012-04-12T15:30:00Z`.
pub fn format_iso(timestamp: i64, tz_offset_minutes: i32) -> String {
    let offset = FixedOffset::east_opt(tz_offset_minutes * 60).expect("offset within ±24h");
    DateTime::from_timestamp(timestamp, 0)
        .expect("representable timestamp")
        .with_timezone(&offset)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Parses an ISO-8601 timestamp into (UTC seconds, offset minutes).
pub fn parse_iso(s: &str) -> Option<(i64, i32)> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some((dt.timestamp(), dt.offset().local_minus_utc() / 60));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some((naive.and_utc().timestamp(), 0));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    GenericTsv,
    FoursquareTsv,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generic" | "generic_tsv" | "generic-tsv" => Ok(Self::GenericTsv),
            "foursquare" | "foursquare_tsv" | "foursquare-tsv" => Ok(Self::FoursquareTsv),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GenericTsv => "generic",
            Self::FoursquareTsv => "foursquare",
        })
    }
}

fn parse_generic_line(line: &str) -> Option<CheckInRecord> {
    let mut cols = line.split('\t');
    let user = cols.next()?.trim();
    let poi = cols.next()?.trim();
    let time = cols.next()?;
    if cols.next().is_some() || user.is_empty() || poi.is_empty() {
        return None;
    }
    let (timestamp, tz_offset_minutes) = parse_iso(time)?;
    Some(CheckInRecord {
        user: user.to_owned(),
        poi: poi.to_owned(),
        timestamp,
        tz_offset_minutes,
    })
}

fn parse_foursquare_line(line: &str) -> Option<CheckInRecord> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 8 {
        return None;
    }
    let user = cols[0].trim();
    let poi = cols[1].trim();
    if user.is_empty() || poi.is_empty() {
        return None;
    }
    let tz_offset_minutes: i32 = cols[6].trim().parse().ok()?;
    if tz_offset_minutes.abs() >= 24 * 60 {
        return None;
    }
    let dt = DateTime::parse_from_str(cols[7].trim(), "%a %b %d %H:%M:%S %z %Y").ok()?;
    Some(CheckInRecord {
        user: user.to_owned(),
        poi: poi.to_owned(),
        timestamp: dt.timestamp(),
        tz_offset_minutes,
    })
}

/// Line accounting from a parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestReport {
    pub lines: usize,
    pub malformed: usize,
}

/// Parses dataset text. Blank lines are ignored; malformed lines are counted
/// and skipped unless they make up more than half of the input.
pub fn parse_str(text: &str, format: DatasetFormat) -> Result<(Corpus, IngestReport)> {
    let parse_line = match format {
        DatasetFormat::GenericTsv => parse_generic_line,
        DatasetFormat::FoursquareTsv => parse_foursquare_line,
    };
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for line in text.lines().map(|l| l.trim_end_matches('\r')) {
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        match parse_line(line) {
            Some(r) => records.push(r),
            None => report.malformed += 1,
        }
    }
    if report.lines == 0 {
        return Err(Error::EmptyCorpus);
    }
    if report.malformed * 2 > report.lines {
        return Err(Error::FormatError {
            lines: report.lines,
            malformed: report.malformed,
        });
    }
    Ok((Corpus::from_records(&records)?, report))
}

pub fn parse_dataset(path: &Path, format: DatasetFormat) -> Result<(Corpus, IngestReport)> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(Error::FileNotFound(path.to_owned()))
        }
        Err(e) => return Err(e.into()),
    };
    parse_str(&text, format)
}
