//! Filtering and spectral analysis of the force feedback channel.

mod lowpass;
mod observer;
mod spectral;

pub use lowpass::{LowPassFilter, LowPassVec3};
pub use observer::{ObserverConfig, ObserverState};
pub use spectral::{hanning, SignalError, SlidingDft, SpectralWindow};
