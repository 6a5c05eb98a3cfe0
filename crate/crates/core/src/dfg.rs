//! Directly-follows matrices and the RMSE / MAE distances between them.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eventlog::EventLog;

/// Directly-follows frequencies over an alphabetically sorted universe.
///
/// Entry `(i, j)` counts how often `universe[i]` is immediately followed by
/// `universe[j]` inside a trace. No artificial start/end nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfMatrix {
    universe: Vec<String>,
    counts: Vec<u64>,
}

impl DfMatrix {
    pub fn zeros(universe: impl IntoIterator<Item = String>) -> Self {
        let universe: Vec<String> = universe.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let n = universe.len();
        DfMatrix {
            universe,
            counts: vec![0; n * n],
        }
    }

    /// Builds a matrix from explicit rows. `universe` must already be sorted and distinct.
    pub fn from_rows(universe: Vec<String>, rows: Vec<Vec<u64>>) -> Result<Self> {
        let n = universe.len();
        if universe.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("matrix universe must be sorted and distinct".into()));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("expected a {n}x{n} matrix")));
        }
        Ok(DfMatrix {
            universe,
            counts: rows.concat(),
        })
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn size(&self) -> usize {
        self.universe.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.size() + j]
    }

    /// Count for a labelled pair; 0 when either label is outside the universe.
    pub fn count(&self, from: &str, to: &str) -> u64 {
        match (self.position(from), self.position(to)) {
            (Some(i), Some(j)) => self.get(i, j),
            _ => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    fn position(&self, label: &str) -> Option<usize> {
        self.universe.binary_search_by(|u| u.as_str().cmp(label)).ok()
    }

    /// Re-indexes over a superset universe, zero-filling new rows and columns.
    pub fn reindex(&self, universe: &[String]) -> Result<DfMatrix> {
        let mut out = DfMatrix::zeros(universe.iter().cloned());
        let map: Vec<usize> = self
            .universe
            .iter()
            .map(|u| out.position(u).ok_or_else(|| Error::UnknownActivity(u.clone())))
            .collect::<Result<_>>()?;
        let (n, m) = (self.size(), out.size());
        for i in 0..n {
            for j in 0..n {
                out.counts[map[i] * m + map[j]] = self.counts[i * n + j];
            }
        }
        Ok(out)
    }

    /// CSV with a header row and a leading label column.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("from");
        for u in &self.universe {
            s.push(',');
            s.push_str(u);
        }
        s.push('\n');
        for (i, u) in self.universe.iter().enumerate() {
            s.push_str(u);
            for j in 0..self.size() {
                let _ = write!(s, ",{}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }
}

/// Counts directly-follows pairs of `log`. When `universe` is given it fixes
/// the rows/columns and must cover every activity in the log.
pub fn df_matrix(log: &EventLog, universe: Option<&[String]>) -> Result<DfMatrix> {
    let mut m = match universe {
        Some(u) => DfMatrix::zeros(u.iter().cloned()),
        None => DfMatrix::zeros(log.activity_universe().iter().cloned()),
    };
    let n = m.size();
    let index: HashMap<&str, usize> = m.universe.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    for trace in log.traces() {
        let ids = trace
            .activities
            .iter()
            .map(|a| index.get(a.as_str()).copied().ok_or_else(|| Error::UnknownActivity(a.clone())))
            .collect::<Result<Vec<_>>>()?;
        for w in ids.windows(2) {
            m.counts[w[0] * n + w[1]] += 1;
        }
    }
    Ok(m)
}

/// Brings both matrices onto their sorted union universe.
pub fn align(a: &DfMatrix, b: &DfMatrix) -> (DfMatrix, DfMatrix) {
    if a.universe == b.universe {
        return (a.clone(), b.clone());
    }
    let union: Vec<String> = a
        .universe
        .iter()
        .chain(&b.universe)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    // both universes are subsets of the union
    (a.reindex(&union).unwrap(), b.reindex(&union).unwrap())
}

fn diffs<'a>(x: &'a DfMatrix, y: &'a DfMatrix) -> Result<impl Iterator<Item = f64> + 'a> {
    if x.universe != y.universe {
        return Err(Error::UniverseMismatch);
    }
    Ok(x.counts.iter().zip(&y.counts).map(|(&a, &b)| a as f64 - b as f64))
}

/// `sqrt(sum((X - Y)^2) / n^2)`; 0 for empty matrices.
pub fn rmse(x: &DfMatrix, y: &DfMatrix) -> Result<f64> {
    let n2 = (x.size() * x.size()) as f64;
    let sum: f64 = diffs(x, y)?.map(|d| d * d).sum();
    Ok(if n2 == 0.0 { 0.0 } else { (sum / n2).sqrt() })
}

/// `sum(|X - Y|) / n^2`; 0 for empty matrices.
pub fn mae(x: &DfMatrix, y: &DfMatrix) -> Result<f64> {
    let n2 = (x.size() * x.size()) as f64;
    let sum: f64 = diffs(x, y)?.map(f64::abs).sum();
    Ok(if n2 == 0.0 { 0.0 } else { sum / n2 })
}

/// RMSE and MAE of two logs compared over the union of their activities.
pub fn compare_logs(predicted: &EventLog, truth: &EventLog) -> (f64, f64) {
    let (p, t) = align(
        &df_matrix(predicted, None).expect("own universe"),
        &df_matrix(truth, None).expect("own universe"),
    );
    (rmse(&p, &t).unwrap(), mae(&p, &t).unwrap())
}
