use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::panel::{GroupFilter, HoldingsPanel, SparseWeights};

pub fn cosine_similarity(wi: &[f64], wj: &[f64]) -> Result<f64> {
    if wi.len() != wj.len() {
        return Err(domain(format!("length mismatch {} vs {}", wi.len(), wj.len())));
    }
    let ni = wi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nj = wj.iter().map(|x| x * x).sum::<f64>().sqrt();
    if ni == 0.0 || nj == 0.0 {
        return Err(domain("cosine similarity of a zero vector"));
    }
    let dot: f64 = wi.iter().zip(wj).map(|(a, b)| a * b).sum();
    Ok((dot / (ni * nj)).clamp(-1.0, 1.0))
}

pub fn sparse_cosine(wi: &SparseWeights, wj: &SparseWeights) -> Result<f64> {
    let (ni, nj) = (wi.norm(), wj.norm());
    if ni == 0.0 || nj == 0.0 {
        return Err(domain("cosine similarity of a zero vector"));
    }
    Ok((wi.dot(wj) / (ni * nj)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairIndex {
    pub index: f64,
    pub pairs: usize,
}

/// Mean cosine similarity over every admitted pair in `quarter`.
pub fn convergence_index(panel: &HoldingsPanel, quarter: usize, filter: GroupFilter) -> Result<PairIndex> {
    if quarter >= panel.n_quarters() {
        return Err(domain(format!("quarter {quarter} out of range")));
    }
    let rows = panel.quarter_rows(quarter);
    let labels = &panel.labels;
    let members = panel.members(filter);
    if members.len() < 2 {
        return Err(domain(format!("{} institutions pass the filter, need 2", members.len())));
    }
    let norms: Vec<f64> = rows.iter().map(|r| r.norm()).collect();
    if members.iter().any(|&i| norms[i] == 0.0) {
        return Err(domain("zero weight vector in quarter"));
    }
    // One partial sum per leading institution, reduced in index order.
    let partial: Vec<(f64, usize)> = members
        .par_iter()
        .enumerate()
        .map(|(k, &i)| {
            let mut acc = 0.0;
            let mut n = 0;
            for &j in &members[k + 1..] {
                if filter.admits_pair(labels[i], labels[j]) {
                    acc += rows[i].dot(&rows[j]) / (norms[i] * norms[j]);
                    n += 1;
                }
            }
            (acc, n)
        })
        .collect();
    let (sum, pairs) = partial.iter().fold((0.0, 0), |(s, n), &(a, m)| (s + a, n + m));
    if pairs == 0 {
        return Err(domain("no admissible pairs"));
    }
    Ok(PairIndex {
        index: sum / pairs as f64,
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub quarters: Vec<String>,
    pub aggregate: Vec<f64>,
    pub ai_ai: Vec<f64>,
    pub non_ai: Vec<f64>,
    pub cross: Vec<f64>,
    pub pairs_aggregate: usize,
    pub pairs_ai_ai: usize,
    pub pairs_non_ai: usize,
    pub pairs_cross: usize,
}

fn window_mean(xs: &[f64], head: bool, w: usize) -> f64 {
    let w = w.min(xs.len()).max(1);
    let s = if head { &xs[..w] } else { &xs[xs.len() - w..] };
    s.iter().sum::<f64>() / w as f64
}

impl ConvergenceSeries {
    pub fn first_window(xs: &[f64], w: usize) -> f64 {
        window_mean(xs, true, w)
    }

    pub fn last_window(xs: &[f64], w: usize) -> f64 {
        window_mean(xs, false, w)
    }

    /// Last-window mean over first-window mean, minus one.
    pub fn relative_rise(xs: &[f64], w: usize) -> f64 {
        window_mean(xs, false, w) / window_mean(xs, true, w) - 1.0
    }

    /// Columns: quarter, s_all, s_ai_ai, s_non_ai, s_cross, pairs_all,
    /// pairs_ai_ai, pairs_non_ai, pairs_cross.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "quarter",
            "s_all",
            "s_ai_ai",
            "s_non_ai",
            "s_cross",
            "pairs_all",
            "pairs_ai_ai",
            "pairs_non_ai",
            "pairs_cross",
        ])?;
        for q in 0..self.quarters.len() {
            out.write_record([
                self.quarters[q].clone(),
                format!("{:.10}", self.aggregate[q]),
                format!("{:.10}", self.ai_ai[q]),
                format!("{:.10}", self.non_ai[q]),
                format!("{:.10}", self.cross[q]),
                self.pairs_aggregate.to_string(),
                self.pairs_ai_ai.to_string(),
                self.pairs_non_ai.to_string(),
                self.pairs_cross.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// All four indices for every quarter. Needs two institutions in each group.
pub fn convergence_series(panel: &HoldingsPanel) -> Result<ConvergenceSeries> {
    let mut s = ConvergenceSeries {
        quarters: panel.quarters.clone(),
        aggregate: Vec::new(),
        ai_ai: Vec::new(),
        non_ai: Vec::new(),
        cross: Vec::new(),
        pairs_aggregate: 0,
        pairs_ai_ai: 0,
        pairs_non_ai: 0,
        pairs_cross: 0,
    };
    for q in 0..panel.n_quarters() {
        let all = convergence_index(panel, q, GroupFilter::All)?;
        let ai = convergence_index(panel, q, GroupFilter::Ai)?;
        let non = convergence_index(panel, q, GroupFilter::NonAi)?;
        let cross = convergence_index(panel, q, GroupFilter::Cross)?;
        s.aggregate.push(all.index);
        s.ai_ai.push(ai.index);
        s.non_ai.push(non.index);
        s.cross.push(cross.index);
        s.pairs_aggregate = all.pairs;
        s.pairs_ai_ai = ai.pairs;
        s.pairs_non_ai = non.pairs;
        s.pairs_cross = cross.pairs;
    }
    Ok(s)
}
