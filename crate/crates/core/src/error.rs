use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no connected placement of {nodes} nodes after {attempts} attempts (seed {seed})")]
    Disconnected { nodes: usize, seed: u64, attempts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contention matrix violates its bounds: {0}")]
    InvalidContention(String),

    #[error("link {link} carries traffic {load} but has zero rate")]
    ZeroRate { link: usize, load: f64 },

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },

    #[error("no path from node {src} to node {dst}")]
    Unreachable { src: usize, dst: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(Error::Dimension { what, got, expected })
    }
}
