//! One-dimensional signal processing for pulse signals.

mod rate;
mod signal;
mod spectral;
mod transform;

pub use rate::{
    accuracy, rate_trace, rmse, RateEstimator, RateTrace, ACCURACY_THRESHOLD_BPM, CONFIDENCE_FLOOR,
    FFT_LEN, MAX_BPM, MIN_BPM, WINDOW_LEN,
};
pub use signal::Signal;
pub use spectral::{
    analytic_signal, bandpass, bandpass_pulse, hilbert_phase_shift, magnitude_spectrum,
    PULSE_BAND_HZ,
};
pub use transform::{delay, differentiate, resample_linear, sample_at, zscore};
