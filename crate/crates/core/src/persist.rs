//! The `TRANSTAREC 1` model archive: a line-oriented text file holding the
//! hyperparameters, both vocabularies, every tensor and a little training
//! metadata.
//!
//! ```text
//! TRANSTAREC 1
//! [header]
//! dim 2
//! ...
//! [users 1]
//! u0
//! [pois 2]
//! p0
//! p1
//! [user_emb 1 2]
//! 1.0000000000000000e-1 -2.5000000000000000e-1
//! ...
//! ```
//!
//! Floats are written with 17 significant digits, so a load returns the exact
//! bits that were saved.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::Vocab;
use crate::model::{HyperParams, Model, ModelParams, RankMode, TENSOR_NAMES};
use crate::training::TrainConfig;

pub const MAGIC: &str = "TRANSTAREC";
pub const FORMAT_VERSION: u32 = 1;

/// How the parameters in an archive were produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub epochs_run: usize,
    /// Mean total loss of the last epoch, if any epoch ran.
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArchive {
    pub format_version: u32,
    pub hyper: HyperParams,
    pub users: Vec<String>,
    pub pois: Vec<String>,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

impl ModelArchive {
    pub fn new(
        model: Model,
        users: Vec<String>,
        pois: Vec<String>,
        meta: TrainingMeta,
    ) -> Result<Self> {
        let archive = Self {
            format_version: FORMAT_VERSION,
            hyper: model.hyper,
            users,
            pois,
            params: model.params,
            meta,
        };
        archive.check()?;
        Ok(archive)
    }

    /// Checks vocabulary sizes and tensor shapes against each other.
    pub fn check(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(self.format_version));
        }
        let d = self.hyper.dim;
        let p = &self.params;
        let mismatch = |section: &str, detail: String| {
            Err(Error::ShapeMismatch {
                section: section.to_string(),
                detail,
            })
        };
        if p.dim() != d {
            return mismatch("header", format!("dim {d} but tensors have {}", p.dim()));
        }
        if self.users.len() != p.n_users() {
            return mismatch(
                "users",
                format!(
                    "{} ids for {} embedding rows",
                    self.users.len(),
                    p.n_users()
                ),
            );
        }
        if self.pois.len() != p.n_pois() {
            return mismatch(
                "pois",
                format!("{} ids for {} embedding rows", self.pois.len(), p.n_pois()),
            );
        }
        for (name, rows, cols, values) in p.tensors() {
            let expected = expected_shape(name, d, self.users.len(), self.pois.len());
            if (rows, cols) != expected || values.len() != rows * cols {
                return mismatch(
                    name,
                    format!("{rows}x{cols}, expected {}x{}", expected.0, expected.1),
                );
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Model {
        Model::new(self.hyper, self.params.clone())
    }

    pub fn user_vocab(&self) -> Result<Vocab> {
        Vocab::from_ids(self.users.clone())
    }

    pub fn poi_vocab(&self) -> Result<Vocab> {
        Vocab::from_ids(self.pois.clone())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let h = &self.hyper;
        let c = &self.meta.config;
        // Writing to a String cannot fail.
        let _ = writeln!(out, "{MAGIC} {}", self.format_version);
        out.push_str("[header]\n");
        let _ = writeln!(out, "dim {}", h.dim);
        let _ = writeln!(out, "users {}", self.users.len());
        let _ = writeln!(out, "pois {}", self.pois.len());
        let _ = writeln!(out, "margin {}", float(h.margin));
        let _ = writeln!(out, "soft_c {}", float(h.soft_c));
        let _ = writeln!(out, "epsilon {}", float(h.epsilon));
        let _ = writeln!(out, "rank_mode {}", h.rank_mode);
        let _ = writeln!(out, "baseline_mode {}", h.baseline_mode);
        let _ = writeln!(out, "seed {}", c.seed);
        let _ = writeln!(out, "learning_rate {}", float(c.learning_rate));
        let _ = writeln!(out, "epochs {}", c.epochs);
        let _ = writeln!(out, "neg_samples {}", c.neg_samples);
        let _ = writeln!(out, "batch_size {}", c.batch_size);
        let _ = writeln!(out, "clamp_entities {}", c.clamp_entities);
        let _ = writeln!(out, "init_scale {}", float(c.init_scale));
        let _ = writeln!(out, "epochs_run {}", self.meta.epochs_run);
        match self.meta.final_loss {
            Some(l) => {
                let _ = writeln!(out, "final_loss {}", float(l));
            }
            None => out.push_str("final_loss none\n"),
        }
        for (section, ids) in [("users", &self.users), ("pois", &self.pois)] {
            let _ = writeln!(out, "[{section} {}]", ids.len());
            for id in ids {
                out.push_str(id);
                out.push('\n');
            }
        }
        for (name, rows, cols, values) in self.params.tensors() {
            let _ = writeln!(out, "[{name} {rows} {cols}]");
            for row in values.chunks(cols.max(1)) {
                let mut first = true;
                for v in row {
                    if !first {
                        out.push(' ');
                    }
                    out.push_str(&float(*v));
                    first = false;
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Reader::new(text).archive()
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn expected_shape(name: &str, d: usize, n_users: usize, n_pois: usize) -> (usize, usize) {
    match name {
        "user_emb" => (n_users, d),
        "poi_emb" => (n_pois, d),
        "month_emb" => (crate::model::MONTHS, d),
        "weekday_emb" => (crate::model::WEEKDAYS, d),
        "hour_emb" => (crate::model::HOURS, d),
        "g_weight" | "h_weight" => (d, 3 * d),
        _ => (1, d),
    }
}

/// Writes `archive` to `path` through a temporary file in the same
/// directory, so readers never see a half-written archive.
pub fn save(archive: &ModelArchive, path: &Path) -> Result<()> {
    archive.check()?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(archive.to_text().as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelArchive> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::FileNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    ModelArchive::from_text(&text)
}

struct Reader<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        Self { lines, pos: 0 }
    }

    /// 1-based number of the line most recently returned.
    fn line_no(&self) -> usize {
        self.pos
    }

    fn next(&mut self) -> Option<&'a str> {
        let line = self.lines.get(self.pos).copied();
        if line.is_some() {
            self.pos += 1;
        }
        line
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn parse_error(&self, msg: impl Into<String>) -> Error {
        Error::ParseError {
            line: self.line_no(),
            msg: msg.into(),
        }
    }

    fn expect_line(&mut self, what: &str) -> Result<&'a str> {
        match self.next() {
            Some(l) => Ok(l),
            None => Err(Error::ParseError {
                line: self.lines.len() + 1,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let line = self.expect_line(key)?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| self.parse_error(format!("expected `{key} <value>`")))?;
        value
            .parse()
            .map_err(|_| self.parse_error(format!("bad value for {key}: `{value}`")))
    }

    fn section_header(&mut self, name: &str) -> Result<Vec<usize>> {
        let line = self.expect_line(&format!("[{name}]"))?;
        let inner = line
            .strip_prefix('[')
            .and_then(|l| l.strip_suffix(']'))
            .ok_or_else(|| self.parse_error(format!("expected section [{name}]")))?;
        let mut parts = inner.split(' ');
        if parts.next() != Some(name) {
            return Err(self.parse_error(format!("expected section [{name}], found `{line}`")));
        }
        parts
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| self.parse_error(format!("bad size `{p}` in [{name}]")))
            })
            .collect()
    }

    fn archive(mut self) -> Result<ModelArchive> {
        let magic = self.next().ok_or(Error::BadMagic)?;
        let version = match magic.split_once(' ') {
            Some((MAGIC, v)) => v.parse::<u32>().map_err(|_| Error::BadMagic)?,
            _ => return Err(Error::BadMagic),
        };
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }

        self.section_header("header")?;
        let dim: usize = self.field("dim")?;
        let n_users: usize = self.field("users")?;
        let n_pois: usize = self.field("pois")?;
        let hyper = HyperParams {
            dim,
            margin: self.field("margin")?,
            soft_c: self.field("soft_c")?,
            epsilon: self.field("epsilon")?,
            rank_mode: self.field::<RankMode>("rank_mode")?,
            baseline_mode: self.field("baseline_mode")?,
        };
        hyper
            .validate()
            .map_err(|e| self.parse_error(format!("header: {e}")))?;
        let config = TrainConfig {
            seed: self.field("seed")?,
            learning_rate: self.field("learning_rate")?,
            epochs: self.field("epochs")?,
            neg_samples: self.field("neg_samples")?,
            batch_size: self.field("batch_size")?,
            clamp_entities: self.field("clamp_entities")?,
            init_scale: self.field("init_scale")?,
        };
        let epochs_run = self.field("epochs_run")?;
        let final_loss = match self.field::<String>("final_loss")?.as_str() {
            "none" => None,
            v => Some(
                v.parse::<f64>()
                    .map_err(|_| self.parse_error(format!("bad final_loss `{v}`")))?,
            ),
        };

        let users = self.ids("users", n_users)?;
        let pois = self.ids("pois", n_pois)?;

        let mut params = ModelParams::zeros(n_users, n_pois, dim);
        for (t, name) in TENSOR_NAMES.iter().enumerate() {
            let (rows, cols) = expected_shape(name, dim, n_users, n_pois);
            let declared = self.section_header(name)?;
            if declared != [rows, cols] {
                return Err(Error::ShapeMismatch {
                    section: name.to_string(),
                    detail: format!("declared {declared:?}, expected [{rows}, {cols}]"),
                });
            }
            let dest = &mut params.tensors_mut()[t];
            for r in 0..rows {
                let line = match self.peek() {
                    Some(l) if !l.starts_with('[') => {
                        self.next();
                        l
                    }
                    _ => {
                        return Err(Error::ShapeMismatch {
                            section: name.to_string(),
                            detail: format!("{r} of {rows} rows present"),
                        })
                    }
                };
                let mut n = 0;
                for tok in line.split(' ') {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| self.parse_error(format!("bad number `{tok}` in [{name}]")))?;
                    if n < cols {
                        dest[r * cols + n] = v;
                    }
                    n += 1;
                }
                if n != cols {
                    return Err(Error::ShapeMismatch {
                        section: name.to_string(),
                        detail: format!("row {r} has {n} values, expected {cols}"),
                    });
                }
            }
        }
        if self.next().is_some() {
            return Err(self.parse_error("trailing content after last tensor"));
        }

        let archive = ModelArchive {
            format_version: version,
            hyper,
            users,
            pois,
            params,
            meta: TrainingMeta {
                config,
                epochs_run,
                final_loss,
            },
        };
        archive.check()?;
        Ok(archive)
    }

    fn ids(&mut self, section: &str, n: usize) -> Result<Vec<String>> {
        let declared = self.section_header(section)?;
        if declared != [n] {
            return Err(Error::ShapeMismatch {
                section: section.to_string(),
                detail: format!("declared {declared:?}, header says {n}"),
            });
        }
        let mut ids = Vec::with_capacity(n);
        for k in 0..n {
            match self.peek() {
                Some(l) if !l.starts_with('[') && !l.is_empty() => {
                    self.next();
                    ids.push(l.to_string());
                }
                _ => {
                    return Err(Error::ShapeMismatch {
                        section: section.to_string(),
                        detail: format!("{k} of {n} ids present"),
                    })
                }
            }
        }
        Vocab::from_ids(ids.clone()).map_err(|e| self.parse_error(format!("[{section}]: {e}")))?;
        Ok(ids)
    }
}
