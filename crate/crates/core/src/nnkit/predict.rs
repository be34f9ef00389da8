use rayon::prelude::*;

use super::network::Network;
use crate::error::{Error, Result};
use crate::frames::DiffClip;
use crate::sigproc::Signal;

/// Per-frame network outputs, at the clip frame rate and unfiltered.
pub fn predict_clip(net: &Network, clip: &DiffClip) -> Result<Signal> {
    let expected = net.config().input_shape();
    if clip.shape() != expected {
        return Err(Error::shape(
            "predict_clip",
            "frame shape",
            format!("{expected:?}"),
            format!("{:?}", clip.shape()),
        ));
    }
    let out = (0..clip.len())
        .into_par_iter()
        .map(|t| net.predict(&clip.frame(t)))
        .collect::<Result<Vec<f64>>>()?;
    Signal::new(out, clip.fps())
}
