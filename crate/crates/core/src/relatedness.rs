//! Attribute-attribute relatedness from majority-vote agreement.

use std::io::Write;

use crate::consensus::VoteCount;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_BIAS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stance {
    Yes,
    No,
    Neutral,
}

pub fn majority_stance(votes: VoteCount) -> Stance {
    match votes.yes.cmp(&votes.no) {
        std::cmp::Ordering::Greater => Stance::Yes,
        std::cmp::Ordering::Less => Stance::No,
        std::cmp::Ordering::Equal => Stance::Neutral,
    }
}

/// Symmetric `|A| × |A|` matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RelatednessMatrix {
    size: usize,
    values: Vec<f64>,
    pub bias: f64,
    pub locations: usize,
}

impl RelatednessMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Sum of row `i`, diagonal excluded (it is zero).
    pub fn row_total(&self, i: usize) -> f64 {
        self.values[i * self.size..(i + 1) * self.size].iter().sum()
    }
}

/// `votes` is row-major, `locations × attributes`.
pub fn relatedness(votes: &[VoteCount], attributes: usize, bias: f64) -> Result<RelatednessMatrix> {
    if !(bias >= 0.0 && bias.is_finite()) {
        return Err(Error::config("bias", "must be finite and non-negative"));
    }
    if attributes == 0 || votes.len() % attributes != 0 {
        return Err(Error::Contract(format!(
            "{} vote entries do not form rows of {attributes} attributes",
            votes.len()
        )));
    }
    let locations = votes.len() / attributes;
    let mut net = vec![0i64; attributes * attributes];
    let mut stances = Vec::with_capacity(attributes);
    for row in votes.chunks(attributes) {
        stances.clear();
        stances.extend(
            row.iter()
                .enumerate()
                .filter_map(|(a, v)| match majority_stance(*v) {
                    Stance::Neutral => None,
                    s => Some((a, s)),
                }),
        );
        for (x, &(i, si)) in stances.iter().enumerate() {
            for &(j, sj) in &stances[x + 1..] {
                let d = if si == sj { 1 } else { -1 };
                net[i * attributes + j] += d;
                net[j * attributes + i] += d;
            }
        }
    }
    let denom = locations as f64 + bias;
    let values = net
        .into_iter()
        .map(|n| if n == 0 { 0.0 } else { n as f64 / denom })
        .collect();
    Ok(RelatednessMatrix {
        size: attributes,
        values,
        bias,
        locations,
    })
}

pub fn dataset_relatedness(data: &Dataset, bias: f64) -> Result<RelatednessMatrix> {
    relatedness(data.vote_matrix(), data.num_attributes(), bias)
}

/// Attribute indices in stable ascending order of row total.
pub fn sort_by_total(m: &RelatednessMatrix) -> Vec<usize> {
    let totals: Vec<f64> = (0..m.size).map(|i| m.row_total(i)).collect();
    let mut order: Vec<usize> = (0..m.size).collect();
    order.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]));
    order
}

/// Writes the matrix permuted by `order`: a header of attribute ids, then
/// one row per attribute led by its id.
pub fn write_csv<W: Write>(
    out: W,
    m: &RelatednessMatrix,
    ids: &[String],
    order: &[usize],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Contract(format!("writing relatedness csv: {e}"));
    let mut header = vec![String::from("attribute")];
    header.extend(order.iter().map(|&i| ids[i].clone()));
    w.write_record(&header).map_err(io)?;
    for &i in order {
        let mut row = vec![ids[i].clone()];
        row.extend(order.iter().map(|&j| m.get(i, j).to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| io(e.into()))
}
