//! Sliding-window directly-follows frequency series and their
//! auto-correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::EventLog;

pub const DEFAULT_WINDOW: usize = 200;

/// Mean |r| over lags 1.. below this marks a pair as weakly correlated.
pub const WEAK_CORRELATION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfSeries {
    pub from: String,
    pub to: String,
    pub window: usize,
    pub stride: usize,
    /// Value `k` counts `from -> to` within traces `[k * stride, k * stride + window)`.
    pub values: Vec<f64>,
}

impl DfSeries {
    /// `index,value` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{v}\n"));
        }
        s
    }
}

fn pair_count(trace: &[String], from: &str, to: &str) -> u64 {
    trace.windows(2).filter(|w| w[0] == from && w[1] == to).count() as u64
}

pub fn df_series(log: &EventLog, from: &str, to: &str, window: usize, stride: usize) -> Result<DfSeries> {
    if window == 0 || stride == 0 {
        return Err(Error::Config("window and stride must be at least 1".into()));
    }
    if window > log.len() {
        return Err(Error::InsufficientTraces {
            required: window,
            available: log.len(),
        });
    }
    let per_trace: Vec<u64> = log.sequences().iter().map(|t| pair_count(t, from, to)).collect();
    let mut prefix = vec![0u64; per_trace.len() + 1];
    for (i, c) in per_trace.iter().enumerate() {
        prefix[i + 1] = prefix[i] + c;
    }
    let values = (0..=log.len() - window)
        .step_by(stride)
        .map(|k| (prefix[k + window] - prefix[k]) as f64)
        .collect();
    Ok(DfSeries {
        from: from.to_string(),
        to: to.to_string(),
        window,
        stride,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autocorrelation {
    /// `r[k]` for lags `0..=max_lag`.
    pub r: Vec<f64>,
    /// Zero-variance series; every `r[k]` is then 1 by convention.
    pub degenerate: bool,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Pearson correlation between the series and itself shifted by `k`, over
/// the overlapping `n - k` values. A segment with zero variance yields 0.
pub fn autocorrelation(values: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    if values.len() <= max_lag {
        return Err(Error::Config(format!(
            "series of length {} is too short for lag {max_lag}",
            values.len()
        )));
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(Autocorrelation {
            r: vec![1.0; max_lag + 1],
            degenerate: true,
        });
    }
    let n = values.len();
    let r = (0..=max_lag)
        .map(|k| if k == 0 { 1.0 } else { pearson(&values[..n - k], &values[k..]) })
        .collect();
    Ok(Autocorrelation { r, degenerate: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub from: String,
    pub to: String,
    /// Mean |r(k)| over lags `1..=max_lag`.
    pub mean_abs_r: f64,
    pub degenerate: bool,
    pub weak: bool,
}

/// One summary per ordered activity pair, rows in sorted activity order.
pub fn autocorr_report(log: &EventLog, window: usize, max_lag: usize) -> Result<Vec<PairSummary>> {
    let acts: Vec<&String> = log.activity_universe().iter().collect();
    let mut out = Vec::with_capacity(acts.len() * acts.len());
    for from in &acts {
        for to in &acts {
            let series = df_series(log, from, to, window, 1)?;
            let ac = autocorrelation(&series.values, max_lag)?;
            let mean_abs_r = if max_lag == 0 {
                1.0
            } else {
                ac.r[1..].iter().map(|r| r.abs()).sum::<f64>() / max_lag as f64
            };
            out.push(PairSummary {
                from: from.to_string(),
                to: to.to_string(),
                mean_abs_r,
                degenerate: ac.degenerate,
                weak: !ac.degenerate && mean_abs_r < WEAK_CORRELATION,
            });
        }
    }
    Ok(out)
}

/// `from,to,mean_abs_r,degenerate,weak` rows with a header.
pub fn report_csv(rows: &[PairSummary]) -> String {
    let mut s = String::from("from,to,mean_abs_r,degenerate,weak\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.6},{},{}\n", r.from, r.to, r.mean_abs_r, r.degenerate, r.weak));
    }
    s
}
