use std::fmt;

use meshless::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;
pub const EXIT_NO_CANDIDATE: u8 = 5;
const EXIT_OTHER: u8 = 1;

/// Invalid flag values or combinations that clap cannot catch.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// A failure while reading an input file.
#[derive(Debug)]
pub struct InputError(pub std::path::PathBuf, pub Error);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "reading {}", self.0.display())
    }
}

impl std::error::Error for InputError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.1)
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(InputError(_, e)) = cause.downcast_ref::<InputError>() {
            return match core_code(e) {
                EXIT_OTHER => EXIT_PARSE,
                c => c,
            };
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_code(e);
        }
    }
    EXIT_OTHER
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::AllCandidatesFailed { .. } => EXIT_NO_CANDIDATE,
        Error::InvalidParameter(_) => EXIT_USAGE,
        Error::Parse { .. }
        | Error::Json(_)
        | Error::UnsupportedVersion { .. }
        | Error::EmptyCloud { .. } => EXIT_PARSE,
        Error::Backend(_) => EXIT_NUMERICAL,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_OTHER,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        let usage = anyhow::Error::new(UsageError("x".into()));
        assert_eq!(exit_code(&usage), EXIT_USAGE);
        let parse = anyhow::Error::new(InputError(
            "in.xyz".into(),
            Error::Io(std::io::Error::other("gone")),
        ));
        assert_eq!(exit_code(&parse), EXIT_PARSE);
        let num = anyhow::Error::new(Error::NonFinite).context("building model");
        assert_eq!(exit_code(&num), EXIT_NUMERICAL);
        let none = anyhow::Error::new(Error::AllCandidatesFailed { last: "x".into() });
        assert_eq!(exit_code(&none), EXIT_NO_CANDIDATE);
        assert_eq!(exit_code(&anyhow::anyhow!("disk full")), EXIT_OTHER);
    }
}
