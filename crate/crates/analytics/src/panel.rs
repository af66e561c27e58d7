//! Holdings panels stored as one sparse weight vector per institution-quarter.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, AnalyticsError, Result};

const ROW_SUM_TOL: f64 = 1e-9;
const CACHE_MAGIC: &[u8; 8] = b"ADPANEL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "NON_AI")]
    NonAi,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Ai => "AI",
            Group::NonAi => "NON_AI",
        }
    }

    pub fn parse(s: &str) -> Result<Group> {
        match s {
            "AI" => Ok(Group::Ai),
            "NON_AI" => Ok(Group::NonAi),
            other => Err(domain(format!("unknown group '{other}'"))),
        }
    }
}

/// Which institutions (or, for `Cross`, which pairs) enter an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroupFilter {
    All,
    Ai,
    NonAi,
    /// AI–NON_AI pairs only.
    Cross,
}

impl GroupFilter {
    pub fn admits(self, g: Group) -> bool {
        match self {
            GroupFilter::All | GroupFilter::Cross => true,
            GroupFilter::Ai => g == Group::Ai,
            GroupFilter::NonAi => g == Group::NonAi,
        }
    }

    pub fn admits_pair(self, a: Group, b: Group) -> bool {
        match self {
            GroupFilter::Cross => a != b,
            f => f.admits(a) && f.admits(b),
        }
    }
}

/// Sorted asset indices with their weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseWeights {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl SparseWeights {
    pub fn from_dense(w: &[f64]) -> Self {
        let mut s = SparseWeights::default();
        for (a, &x) in w.iter().enumerate() {
            if x != 0.0 {
                s.idx.push(a as u32);
                s.val.push(x);
            }
        }
        s
    }

    /// Builds from unsorted (asset, weight) pairs; duplicates are summed.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut s = SparseWeights::default();
        for (a, w) in pairs {
            if s.idx.last() == Some(&a) {
                *s.val.last_mut().unwrap() += w;
            } else {
                s.idx.push(a);
                s.val.push(w);
            }
        }
        s
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn sum(&self) -> f64 {
        self.val.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.val.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Merge over the two supports.
    pub fn dot(&self, other: &SparseWeights) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.idx.len() && j < other.idx.len() {
            match self.idx[i].cmp(&other.idx[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.val[i] * other.val[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn to_dense(&self, n_assets: usize) -> Vec<f64> {
        let mut d = vec![0.0; n_assets];
        self.scatter_into(&mut d);
        d
    }

    pub fn scatter_into(&self, out: &mut [f64]) {
        for (&a, &w) in self.idx.iter().zip(&self.val) {
            out[a as usize] = w;
        }
    }
}

/// Portfolio weights w_i(t) for institutions × assets × quarters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldingsPanel {
    pub n_assets: usize,
    pub quarters: Vec<String>,
    pub labels: Vec<Group>,
    /// Quarter-major: row (i, q) lives at `q * n_institutions + i`.
    rows: Vec<SparseWeights>,
}

impl HoldingsPanel {
    pub fn new(n_assets: usize, quarters: Vec<String>, labels: Vec<Group>, rows: Vec<SparseWeights>) -> Result<Self> {
        let p = HoldingsPanel {
            n_assets,
            quarters,
            labels,
            rows,
        };
        p.validate()?;
        Ok(p)
    }

    /// `dense[q][i][a]`.
    pub fn from_dense(quarters: Vec<String>, labels: Vec<Group>, dense: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n_assets = dense.first().and_then(|q| q.first()).map_or(0, |r| r.len());
        let rows = dense.iter().flat_map(|q| q.iter().map(|r| SparseWeights::from_dense(r))).collect();
        if dense.iter().any(|q| q.iter().any(|r| r.len() != n_assets)) {
            return Err(AnalyticsError::InvalidPanel("ragged asset dimension".into()));
        }
        HoldingsPanel::new(n_assets, quarters, labels, rows)
    }

    pub fn n_institutions(&self) -> usize {
        self.labels.len()
    }

    pub fn n_quarters(&self) -> usize {
        self.quarters.len()
    }

    pub fn row(&self, inst: usize, quarter: usize) -> &SparseWeights {
        &self.rows[quarter * self.labels.len() + inst]
    }

    pub fn quarter_rows(&self, quarter: usize) -> &[SparseWeights] {
        let n = self.labels.len();
        &self.rows[quarter * n..(quarter + 1) * n]
    }

    pub fn weight(&self, inst: usize, quarter: usize, asset: usize) -> f64 {
        let r = self.row(inst, quarter);
        match r.idx.binary_search(&(asset as u32)) {
            Ok(k) => r.val[k],
            Err(_) => 0.0,
        }
    }

    pub fn quarter_index(&self, label: &str) -> Option<usize> {
        self.quarters.iter().position(|q| q == label)
    }

    /// Institutions admitted by `filter`, in index order.
    pub fn members(&self, filter: GroupFilter) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| filter.admits(self.labels[i])).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AnalyticsError::InvalidPanel(m));
        let n = self.labels.len();
        if self.rows.len() != n * self.quarters.len() {
            return bad(format!(
                "{} rows for {} institutions × {} quarters",
                self.rows.len(),
                n,
                self.quarters.len()
            ));
        }
        for (k, r) in self.rows.iter().enumerate() {
            let (q, i) = (k / n.max(1), k % n.max(1));
            if r.idx.len() != r.val.len() {
                return bad(format!("institution {i}, quarter {q}: index/value length mismatch"));
            }
            if r.idx.windows(2).any(|w| w[1] <= w[0]) || r.idx.last().is_some_and(|&a| a as usize >= self.n_assets) {
                return bad(format!("institution {i}, quarter {q}: asset indices unsorted or out of range"));
            }
            if r.val.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return bad(format!("institution {i}, quarter {q}: negative or non-finite weight"));
            }
            let s = r.sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return bad(format!("institution {i}, quarter {q}: weights sum to {s}"));
            }
        }
        Ok(())
    }

    /// Long format: institution, group, quarter, asset, weight (nonzero entries only).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["institution", "group", "quarter", "asset", "weight"])?;
        for q in 0..self.n_quarters() {
            for i in 0..self.n_institutions() {
                let r = self.row(i, q);
                for (&a, &x) in r.idx.iter().zip(&r.val) {
                    out.write_record([
                        i.to_string(),
                        self.labels[i].as_str().to_string(),
                        self.quarters[q].clone(),
                        a.to_string(),
                        format!("{x:e}"),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the long format. Quarters keep their order of first appearance;
    /// institutions are numbered 0..n and must all have a group.
    pub fn read_csv<R: Read>(r: R, n_assets: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut quarters: Vec<String> = Vec::new();
        let mut labels: BTreeMap<usize, Group> = BTreeMap::new();
        let mut cells: BTreeMap<(usize, usize), Vec<(u32, f64)>> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(AnalyticsError::InvalidPanel(format!("expected 5 columns, got {}", rec.len())));
            }
            let parse_err = |what: &str| AnalyticsError::InvalidPanel(format!("bad {what} in {rec:?}"));
            let inst: usize = rec[0].parse().map_err(|_| parse_err("institution"))?;
            let group = Group::parse(&rec[1])?;
            let q = match quarters.iter().position(|x| x == &rec[2]) {
                Some(q) => q,
                None => {
                    quarters.push(rec[2].to_string());
                    quarters.len() - 1
                }
            };
            let asset: u32 = rec[3].parse().map_err(|_| parse_err("asset"))?;
            let weight: f64 = rec[4].parse().map_err(|_| parse_err("weight"))?;
            if let Some(prev) = labels.insert(inst, group) {
                if prev != group {
                    return Err(AnalyticsError::InvalidPanel(format!("institution {inst} has two groups")));
                }
            }
            cells.entry((q, inst)).or_default().push((asset, weight));
        }
        let n = labels.len();
        if labels.keys().enumerate().any(|(k, &i)| k != i) {
            return Err(AnalyticsError::InvalidPanel("institution ids must be 0..n".into()));
        }
        let mut rows = Vec::with_capacity(n * quarters.len());
        for q in 0..quarters.len() {
            for i in 0..n {
                rows.push(SparseWeights::from_pairs(cells.remove(&(q, i)).unwrap_or_default()));
            }
        }
        HoldingsPanel::new(n_assets, quarters, labels.into_values().collect(), rows)
    }

    /// Little-endian binary cache.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        for x in [self.n_assets, self.n_institutions(), self.n_quarters()] {
            w.write_all(&(x as u64).to_le_bytes())?;
        }
        for g in &self.labels {
            w.write_all(&[matches!(g, Group::Ai) as u8])?;
        }
        for q in &self.quarters {
            w.write_all(&(q.len() as u32).to_le_bytes())?;
            w.write_all(q.as_bytes())?;
        }
        for r in &self.rows {
            w.write_all(&(r.nnz() as u32).to_le_bytes())?;
            for (&a, &x) in r.idx.iter().zip(&r.val) {
                w.write_all(&a.to_le_bytes())?;
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(AnalyticsError::Format("bad magic".into()));
        }
        let mut u64buf = [0u8; 8];
        let mut dims = [0usize; 3];
        for d in &mut dims {
            r.read_exact(&mut u64buf)?;
            *d = u64::from_le_bytes(u64buf) as usize;
        }
        let [n_assets, n_inst, n_q] = dims;
        let mut lab = vec![0u8; n_inst];
        r.read_exact(&mut lab)?;
        let labels = lab
            .iter()
            .map(|&b| match b {
                1 => Ok(Group::Ai),
                0 => Ok(Group::NonAi),
                _ => Err(AnalyticsError::Format(format!("bad group byte {b}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut u32buf = [0u8; 4];
        let mut quarters = Vec::with_capacity(n_q);
        for _ in 0..n_q {
            r.read_exact(&mut u32buf)?;
            let mut s = vec![0u8; u32::from_le_bytes(u32buf) as usize];
            r.read_exact(&mut s)?;
            quarters.push(String::from_utf8(s).map_err(|e| AnalyticsError::Format(e.to_string()))?);
        }
        let mut rows = Vec::with_capacity(n_inst * n_q);
        for _ in 0..n_inst * n_q {
            r.read_exact(&mut u32buf)?;
            let nnz = u32::from_le_bytes(u32buf) as usize;
            let mut s = SparseWeights {
                idx: Vec::with_capacity(nnz),
                val: Vec::with_capacity(nnz),
            };
            for _ in 0..nnz {
                r.read_exact(&mut u32buf)?;
                r.read_exact(&mut u64buf)?;
                s.idx.push(u32::from_le_bytes(u32buf));
                s.val.push(f64::from_le_bytes(u64buf));
            }
            rows.push(s);
        }
        HoldingsPanel::new(n_assets, quarters, labels, rows)
    }

    /// Quarter-over-quarter changes w_i(q) − w_i(q−1), dense, for `members`.
    pub(crate) fn weight_changes(&self, quarter: usize, members: &[usize]) -> Result<Vec<Vec<f64>>> {
        if quarter == 0 || quarter >= self.n_quarters() {
            return Err(domain(format!(
                "weight changes need quarters {} and {} of {}",
                quarter as i64 - 1,
                quarter,
                self.n_quarters()
            )));
        }
        Ok(members
            .iter()
            .map(|&i| {
                let mut d = self.row(i, quarter).to_dense(self.n_assets);
                let prev = self.row(i, quarter - 1);
                for (&a, &x) in prev.idx.iter().zip(&prev.val) {
                    d[a as usize] -= x;
                }
                d
            })
            .collect())
    }
}

/// "YYYYQn" labels starting at `start`.
pub fn quarter_labels(start: &str, count: usize) -> Result<Vec<String>> {
    let (y, q) = parse_quarter(start)?;
    let base = y * 4 + (q - 1);
    Ok((0..count as i64)
        .map(|k| {
            let t = base + k;
            format!("{}Q{}", t.div_euclid(4), t.rem_euclid(4) + 1)
        })
        .collect())
}

pub fn parse_quarter(s: &str) -> Result<(i64, i64)> {
    let err = || domain(format!("quarter label '{s}' is not of the form YYYYQn"));
    let (y, q) = s.split_once('Q').ok_or_else(err)?;
    let y: i64 = y.parse().map_err(|_| err())?;
    let q: i64 = q.parse().map_err(|_| err())?;
    if !(1..=4).contains(&q) {
        return Err(err());
    }
    Ok((y, q))
}

/// Number of quarters from `start` to `label`.
pub fn quarter_offset(start: &str, label: &str) -> Result<i64> {
    let (y0, q0) = parse_quarter(start)?;
    let (y1, q1) = parse_quarter(label)?;
    Ok((y1 * 4 + q1) - (y0 * 4 + q0))
}
