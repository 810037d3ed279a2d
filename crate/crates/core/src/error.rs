use thiserror::Error;

/// Errors raised by channel construction, beamformer design and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A channel or simulation parameter violates its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Every channel tap is zero, so the transmit normalization is undefined.
    #[error("degenerate channel: total channel power is zero")]
    DegenerateChannel,
    /// The summed channel spectrum has a (numerical) null and has no finite
    /// zero-forcing inverse.
    #[error("near-singular channel: spectral power {power:e} at bin {bin} is below {threshold:e}")]
    NearSingularChannel { bin: usize, power: f64, threshold: f64 },
    /// Redrawing near-singular realizations did not yield a usable channel.
    #[error("near-singular channel persisted after {attempts} draws for realization {realization}")]
    RedrawBudgetExhausted { realization: u64, attempts: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
