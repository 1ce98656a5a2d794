//! In-memory vote matrix plus its tab-separated file forms.
//!
//! Files (all tab-separated with a header row, UTF-8):
//!
//! | file                   | columns                                   |
//! |------------------------|-------------------------------------------|
//! | `votes.tsv`            | `location_id attribute_id yes no`         |
//! | `side_info.tsv`        | `location_id tokens` (space-separated)    |
//! | `gold.tsv`             | `location_id attribute_id label`          |
//! | `true_theta.tsv`       | `location_id attribute_id theta`          |
//! | `generating_prior.tsv` | `location_id attribute_id alpha beta`     |
//!
//! Only `side_info.tsv` is required; it defines the location set. Attribute
//! ids are the union of those appearing in the other files. Rows are written
//! in (location, attribute) order so a load/save round trip is byte-exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use crate::consensus::{BetaBelief, VoteCount};
use crate::error::{Error, Result};
use crate::estimators::LocationRecord;

pub const VOTES_FILE: &str = "votes.tsv";
pub const SIDE_INFO_FILE: &str = "side_info.tsv";
pub const GOLD_FILE: &str = "gold.tsv";
pub const TRUE_THETA_FILE: &str = "true_theta.tsv";
pub const PRIOR_FILE: &str = "generating_prior.tsv";

/// Index of a location-attribute pair into a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairKey {
    pub location: usize,
    pub attribute: usize,
}

impl PairKey {
    pub fn new(location: usize, attribute: usize) -> Self {
        Self {
            location,
            attribute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityStats {
    pub pairs: usize,
    pub voted: usize,
    pub single_vote: usize,
}

impl SparsityStats {
    /// Fraction of pairs with at least one vote.
    pub fn voted_fraction(&self) -> f64 {
        ratio(self.voted, self.pairs)
    }

    /// Fraction of voted pairs with exactly one vote.
    pub fn single_vote_fraction(&self) -> f64 {
        ratio(self.single_vote, self.voted)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    locations: Vec<LocationRecord>,
    attributes: Vec<String>,
    votes: Vec<VoteCount>,
    gold: BTreeMap<PairKey, bool>,
    true_theta: Option<Vec<f64>>,
    generating_prior: Option<Vec<BetaBelief>>,
}

impl Dataset {
    /// `votes` is row-major, `locations × attributes`. Locations and
    /// attributes must be strictly ascending by id.
    pub fn new(
        locations: Vec<LocationRecord>,
        attributes: Vec<String>,
        votes: Vec<VoteCount>,
    ) -> Result<Self> {
        if !locations.windows(2).all(|w| w[0].id < w[1].id) {
            return Err(Error::Contract(
                "location ids must be unique and ascending".into(),
            ));
        }
        if !attributes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Contract(
                "attribute ids must be unique and ascending".into(),
            ));
        }
        if votes.len() != locations.len() * attributes.len() {
            return Err(Error::Contract(format!(
                "vote matrix has {} entries for {}×{} pairs",
                votes.len(),
                locations.len(),
                attributes.len()
            )));
        }
        Ok(Self {
            locations,
            attributes,
            votes,
            gold: BTreeMap::new(),
            true_theta: None,
            generating_prior: None,
        })
    }

    pub fn with_gold(mut self, gold: BTreeMap<PairKey, bool>) -> Result<Self> {
        if let Some(k) = gold.keys().find(|k| !self.contains(**k)) {
            return Err(Error::Contract(format!(
                "gold label for unknown pair {k:?}"
            )));
        }
        self.gold = gold;
        Ok(self)
    }

    pub fn with_true_theta(mut self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.votes.len() {
            return Err(Error::Contract("true theta must cover every pair".into()));
        }
        if let Some(t) = theta.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Contract(format!("true theta {t} outside [0, 1]")));
        }
        self.true_theta = Some(theta);
        Ok(self)
    }

    pub fn with_generating_prior(mut self, prior: Vec<BetaBelief>) -> Result<Self> {
        if prior.len() != self.votes.len() {
            return Err(Error::Contract(
                "generating prior must cover every pair".into(),
            ));
        }
        self.generating_prior = Some(prior);
        Ok(self)
    }

    pub fn num_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.votes.len()
    }

    pub fn locations(&self) -> &[LocationRecord] {
        &self.locations
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations
            .binary_search_by(|r| r.id.as_str().cmp(id))
            .ok()
    }

    pub fn attribute_index(&self, id: &str) -> Option<usize> {
        self.attributes
            .binary_search_by(|a| a.as_str().cmp(id))
            .ok()
    }

    fn contains(&self, k: PairKey) -> bool {
        k.location < self.locations.len() && k.attribute < self.attributes.len()
    }

    fn flat(&self, k: PairKey) -> usize {
        k.location * self.attributes.len() + k.attribute
    }

    /// All pairs in (location, attribute) order.
    pub fn pairs(&self) -> impl Iterator<Item = PairKey> + '_ {
        let a = self.attributes.len();
        (0..self.votes.len()).map(move |i| PairKey::new(i / a, i % a))
    }

    pub fn votes(&self, k: PairKey) -> VoteCount {
        self.votes[self.flat(k)]
    }

    /// One entry per attribute for location `l`.
    pub fn location_votes(&self, l: usize) -> &[VoteCount] {
        let a = self.attributes.len();
        &self.votes[l * a..(l + 1) * a]
    }

    pub fn vote_matrix(&self) -> &[VoteCount] {
        &self.votes
    }

    pub fn gold(&self) -> &BTreeMap<PairKey, bool> {
        &self.gold
    }

    pub fn true_theta(&self, k: PairKey) -> Option<f64> {
        self.true_theta.as_ref().map(|t| t[self.flat(k)])
    }

    pub fn true_theta_matrix(&self) -> Option<&[f64]> {
        self.true_theta.as_deref()
    }

    pub fn generating_prior(&self) -> Option<&[BetaBelief]> {
        self.generating_prior.as_deref()
    }

    pub fn sparsity(&self) -> SparsityStats {
        let voted = self.votes.iter().filter(|v| !v.is_empty()).count();
        let single_vote = self.votes.iter().filter(|v| v.total() == 1).count();
        SparsityStats {
            pairs: self.votes.len(),
            voted,
            single_vote,
        }
    }

    /// Writes the dataset files into `dir`, creating it if needed. The
    /// generating prior is written only when `with_prior` is set.
    pub fn save(&self, dir: &Path, with_prior: bool) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let path = dir.join(SIDE_INFO_FILE);
        let mut w = writer(&path)?;
        write_row(&mut w, &path, &["location_id", "tokens"])?;
        for r in &self.locations {
            write_row(&mut w, &path, &[r.id.as_str(), r.tokens.join(" ").as_str()])?;
        }
        finish(w, &path)?;

        let path = dir.join(VOTES_FILE);
        let mut w = writer(&path)?;
        write_row(&mut w, &path, &["location_id", "attribute_id", "yes", "no"])?;
        for k in self.pairs() {
            let v = self.votes(k);
            if !v.is_empty() {
                let (l, a) = self.ids(k);
                write_row(
                    &mut w,
                    &path,
                    &[l, a, &v.yes.to_string(), &v.no.to_string()],
                )?;
            }
        }
        finish(w, &path)?;

        let path = dir.join(GOLD_FILE);
        let mut w = writer(&path)?;
        write_row(&mut w, &path, &["location_id", "attribute_id", "label"])?;
        for (&k, &label) in &self.gold {
            let (l, a) = self.ids(k);
            write_row(&mut w, &path, &[l, a, if label { "1" } else { "0" }])?;
        }
        finish(w, &path)?;

        if let Some(theta) = &self.true_theta {
            let path = dir.join(TRUE_THETA_FILE);
            let mut w = writer(&path)?;
            write_row(&mut w, &path, &["location_id", "attribute_id", "theta"])?;
            for (k, t) in self.pairs().zip(theta) {
                let (l, a) = self.ids(k);
                write_row(&mut w, &path, &[l, a, &t.to_string()])?;
            }
            finish(w, &path)?;
        }

        if let (true, Some(prior)) = (with_prior, &self.generating_prior) {
            let path = dir.join(PRIOR_FILE);
            let mut w = writer(&path)?;
            write_row(
                &mut w,
                &path,
                &["location_id", "attribute_id", "alpha", "beta"],
            )?;
            for (k, b) in self.pairs().zip(prior) {
                let (l, a) = self.ids(k);
                write_row(
                    &mut w,
                    &path,
                    &[l, a, &b.alpha().to_string(), &b.beta().to_string()],
                )?;
            }
            finish(w, &path)?;
        }
        Ok(())
    }

    fn ids(&self, k: PairKey) -> (&str, &str) {
        (
            &self.locations[k.location].id,
            &self.attributes[k.attribute],
        )
    }

    /// Loads a dataset directory written by [`Dataset::save`] or by hand.
    pub fn load(dir: &Path) -> Result<Self> {
        let side_path = dir.join(SIDE_INFO_FILE);
        let mut records: Vec<LocationRecord> = Vec::new();
        for row in read_rows(&side_path, &["location_id", "tokens"])? {
            let (_, fields) = row?;
            let tokens = fields[1].split_whitespace().map(str::to_owned).collect();
            records.push(LocationRecord::new(fields[0].clone(), tokens));
        }
        records.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Parse {
                path: side_path,
                line: 0,
                msg: format!("duplicate location id `{}`", w[0].id),
            });
        }
        let loc_index: BTreeMap<String, usize> = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();

        let votes_rows = read_optional(
            &dir.join(VOTES_FILE),
            &["location_id", "attribute_id", "yes", "no"],
        )?;
        let gold_rows = read_optional(
            &dir.join(GOLD_FILE),
            &["location_id", "attribute_id", "label"],
        )?;
        let theta_rows = read_optional(
            &dir.join(TRUE_THETA_FILE),
            &["location_id", "attribute_id", "theta"],
        )?;
        let prior_rows = read_optional(
            &dir.join(PRIOR_FILE),
            &["location_id", "attribute_id", "alpha", "beta"],
        )?;

        let attributes: Vec<String> = [&votes_rows, &gold_rows, &theta_rows, &prior_rows]
            .iter()
            .flat_map(|rows| rows.iter().map(|r| r.fields[1].clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let attr_index: BTreeMap<&str, usize> = attributes
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        let key = |r: &Row| -> Result<PairKey> {
            let l = *loc_index
                .get(&r.fields[0])
                .ok_or_else(|| r.error(format!("unknown location id `{}`", r.fields[0])))?;
            Ok(PairKey::new(l, attr_index[r.fields[1].as_str()]))
        };

        let n_attr = attributes.len();
        let mut votes = vec![VoteCount::default(); records.len() * n_attr];
        for r in &votes_rows {
            let k = key(r)?;
            let yes: u32 = r.parse(2)?;
            let no: u32 = r.parse(3)?;
            let slot = &mut votes[k.location * n_attr + k.attribute];
            let sum = slot
                .yes
                .checked_add(yes)
                .zip(slot.no.checked_add(no))
                .ok_or_else(|| r.error("vote count overflow".into()))?;
            *slot = VoteCount::new(sum.0, sum.1);
        }

        let mut gold = BTreeMap::new();
        for r in &gold_rows {
            let k = key(r)?;
            let label = match r.fields[2].as_str() {
                "0" => false,
                "1" => true,
                other => return Err(r.error(format!("label must be 0 or 1, got `{other}`"))),
            };
            if gold.insert(k, label).is_some() {
                return Err(r.error("duplicate gold label for pair".into()));
            }
        }

        let mut data = Dataset::new(records, attributes.clone(), votes)?.with_gold(gold)?;

        if let Some(path) = theta_rows.first().map(|r| r.path.clone()) {
            let mut theta = vec![f64::NAN; data.num_pairs()];
            for r in &theta_rows {
                let k = key(r)?;
                let t: f64 = r.parse(2)?;
                if !(0.0..=1.0).contains(&t) {
                    return Err(r.error(format!("theta {t} outside [0, 1]")));
                }
                theta[data.flat(k)] = t;
            }
            if theta.iter().any(|t| t.is_nan()) {
                return Err(Error::Parse {
                    path,
                    line: 0,
                    msg: "true theta must list every location-attribute pair".into(),
                });
            }
            data = data.with_true_theta(theta)?;
        }

        if let Some(path) = prior_rows.first().map(|r| r.path.clone()) {
            let mut prior: Vec<Option<BetaBelief>> = vec![None; data.num_pairs()];
            for r in &prior_rows {
                let k = key(r)?;
                let b = BetaBelief::from_shape(r.parse(2)?, r.parse(3)?)
                    .map_err(|e| r.error(e.to_string()))?;
                prior[data.flat(k)] = Some(b);
            }
            let prior: Option<Vec<BetaBelief>> = prior.into_iter().collect();
            let prior = prior.ok_or_else(|| Error::Parse {
                path,
                line: 0,
                msg: "generating prior must list every location-attribute pair".into(),
            })?;
            data = data.with_generating_prior(prior)?;
        }
        Ok(data)
    }
}

struct Row {
    path: PathBuf,
    line: usize,
    fields: Vec<String>,
}

impl Row {
    fn error(&self, msg: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            msg,
        }
    }

    fn parse<T: std::str::FromStr>(&self, i: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.fields[i]
            .trim()
            .parse()
            .map_err(|e| self.error(format!("column {}: {e}", i + 1)))
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .from_reader(file))
}

fn read_rows(
    path: &Path,
    header: &[&str],
) -> Result<impl Iterator<Item = Result<(usize, Vec<String>)>>> {
    let mut rdr = reader(path)?;
    let found = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            msg: format!("expected header `{}`", header.join("\\t")),
        });
    }
    let path = path.to_owned();
    let width = header.len();
    Ok(rdr.into_records().map(move |rec| {
        let rec = rec.map_err(|e| csv_error(&path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.clone(),
                line,
                msg: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        Ok((line, rec.iter().map(str::to_owned).collect()))
    }))
}

fn read_optional(path: &Path, header: &[&str]) -> Result<Vec<Row>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_rows(path, header)?
        .map(|r| {
            r.map(|(line, fields)| Row {
                path: path.to_owned(),
                line,
                fields,
            })
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_owned(),
        line,
        msg: e.to_string(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .delimiter(b'\t')
        .quote_style(csv::QuoteStyle::Never)
        .from_writer(file))
}

fn write_row(w: &mut csv::Writer<File>, path: &Path, fields: &[&str]) -> Result<()> {
    w.write_record(fields).map_err(|e| csv_error(path, e))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}
