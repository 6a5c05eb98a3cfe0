//! Shared fixtures for the benchmarks.

use logcast_core::eventlog::EventLog;
use logcast_core::preprocess::{make_pairs, TrainingPair, Vocabulary, WindowSpec};
use logcast_core::synthetic::{generate, Family, SeasonSpec};

/// A synthetic log of `total` traces with its vocabulary and pairs.
pub fn fixture(family: Family, season: usize, total: usize, window: WindowSpec) -> (EventLog, Vocabulary, Vec<TrainingPair>) {
    let log = generate(&SeasonSpec::family(family, season).expect("valid season"), total).expect("total covers a period");
    let vocab = Vocabulary::build(&log);
    let pairs = make_pairs(&log, window, &vocab).expect("log spans the window");
    (log, vocab, pairs)
}
