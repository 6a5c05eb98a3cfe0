use logcast_core::Error;

// 2 is left to clap for usage errors.
pub const CONFIG: u8 = 3;
pub const IO: u8 = 4;
pub const INPUT: u8 = 5;
pub const TRAINING: u8 = 6;
pub const PREDICTION: u8 = 7;

/// Exit status per failure class; stage failures report their cause.
pub fn code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InsufficientTraces { .. } => CONFIG,
        Error::Io { .. } => IO,
        Error::Parse { .. }
        | Error::Csv(_)
        | Error::Json(_)
        | Error::Format { .. }
        | Error::EmptyActivity(_)
        | Error::UnknownActivity(_)
        | Error::TokenOutOfRange { .. }
        | Error::UniverseMismatch => INPUT,
        Error::NonFinite { .. } | Error::EmptyEncoderOutputs => TRAINING,
        Error::NoCompleteTrace => PREDICTION,
        Error::Stage { source, .. } => code(source),
    }
}
