//! Perfectly seasonal synthetic logs.
//!
//! A season cycles through a fixed list of trace variants, repeating each one
//! `repeat` times: `([v1^r, v2^r, ...], ...)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::EventLog;

/// Full periods generated per log in [`standard_suite`].
pub const SUITE_PERIODS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `<a,b,c,d>` / `<a,c,b,d>`
    Parallel,
    /// `<a,b,c,d>` / `<a,b,c,b,c,d>`
    LongLoop,
    /// `<a,b,d>` / `<a,b,b,d>`
    ShortLoop,
    /// `<a,b,d>` / `<a,d>`
    Skip,
    /// `<a,b,c>` / `<a,b,b,c>` / `<a,c>`
    Tri1,
    /// `<a,b,c,d>` / `<a,b,d>` / `<a,d>`
    Tri2,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Parallel,
        Family::LongLoop,
        Family::ShortLoop,
        Family::Skip,
        Family::Tri1,
        Family::Tri2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Parallel => "parallel",
            Family::LongLoop => "longloop",
            Family::ShortLoop => "shortloop",
            Family::Skip => "skip",
            Family::Tri1 => "tri1",
            Family::Tri2 => "tri2",
        }
    }

    pub fn templates(self) -> Vec<Vec<String>> {
        let t: &[&str] = match self {
            Family::Parallel => &["a b c d", "a c b d"],
            Family::LongLoop => &["a b c d", "a b c b c d"],
            Family::ShortLoop => &["a b d", "a b b d"],
            Family::Skip => &["a b d", "a d"],
            Family::Tri1 => &["a b c", "a b b c", "a c"],
            Family::Tri2 => &["a b c d", "a b d", "a d"],
        };
        t.iter()
            .map(|s| s.split(' ').map(str::to_string).collect())
            .collect()
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown family {s:?}")))
    }
}

/// Ordered variant templates, each repeated `repeat` times per period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonSpec {
    pub variants: Vec<Vec<String>>,
    pub repeat: usize,
}

impl SeasonSpec {
    pub fn new(variants: Vec<Vec<String>>, repeat: usize) -> Result<Self> {
        if variants.is_empty() {
            return Err(Error::Config("season needs at least one variant".into()));
        }
        if variants.iter().any(Vec::is_empty) {
            return Err(Error::Config("season variants must be non-empty traces".into()));
        }
        if repeat == 0 {
            return Err(Error::Config("season repeat must be at least 1".into()));
        }
        Ok(SeasonSpec { variants, repeat })
    }

    pub fn family(family: Family, repeat: usize) -> Result<Self> {
        SeasonSpec::new(family.templates(), repeat)
    }

    /// Traces per full period.
    pub fn period(&self) -> usize {
        self.variants.len() * self.repeat
    }

    /// The variant at position `i` of the infinite cyclic sequence.
    pub fn trace_at(&self, i: usize) -> &[String] {
        &self.variants[(i % self.period()) / self.repeat]
    }
}

/// The first `total` traces of the cyclic sequence.
pub fn generate(spec: &SeasonSpec, total: usize) -> Result<EventLog> {
    if spec.variants.is_empty() {
        return Err(Error::Config("season needs at least one variant".into()));
    }
    if total < spec.period() {
        return Err(Error::Config(format!(
            "total {total} is shorter than one period ({})",
            spec.period()
        )));
    }
    Ok(EventLog::from_sequences((0..total).map(|i| spec.trace_at(i).to_vec())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub family: Family,
    pub spec: SeasonSpec,
    pub total: usize,
    #[serde(skip)]
    pub log: EventLog,
}

/// Four two-variant families at season lengths 2..=5, plus the two
/// three-variant logs (`tri1` at 2, `tri2` at 3): 18 logs of
/// [`SUITE_PERIODS`] periods each.
pub fn standard_suite() -> Vec<SuiteEntry> {
    let mut plan: Vec<(Family, usize)> = Vec::new();
    for family in [Family::Parallel, Family::LongLoop, Family::ShortLoop, Family::Skip] {
        for r in 2..=5 {
            plan.push((family, r));
        }
    }
    plan.push((Family::Tri1, 2));
    plan.push((Family::Tri2, 3));
    plan.into_iter()
        .map(|(family, r)| {
            let spec = SeasonSpec::family(family, r).expect("built-in templates");
            let total = SUITE_PERIODS * spec.period();
            let log = generate(&spec, total).expect("total covers a period");
            SuiteEntry {
                name: format!("{}-r{r}", family.name()),
                family,
                spec,
                total,
                log,
            }
        })
        .collect()
}
