use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::network::Network;

/// Per-channel weight sums of the first convolution layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSummary {
    /// `K x C`: row `k` holds, for each input channel, the sum of kernel
    /// `k`'s nine spatial taps.
    pub per_kernel_channel_sums: Vec<Vec<f64>>,
    /// Unit vector along the dominant direction of the rows.
    pub principal_direction: Vec<f64>,
}

/// Summarises how the first layer mixes input channels.
///
/// The principal direction is the leading right-singular vector of the
/// (uncentred) sums matrix, signed so its largest-magnitude entry is positive.
pub fn first_layer_channel_sums(net: &Network) -> KernelSummary {
    let w = &net.params()[0];
    let (c_in, k_out) = (w.shape()[2], w.shape()[3]);
    let mut sums = vec![vec![0.0; c_in]; k_out];
    for tap in w.data().chunks_exact(c_in * k_out) {
        for c in 0..c_in {
            for (k, row) in sums.iter_mut().enumerate() {
                row[c] += tap[c * k_out + k];
            }
        }
    }
    let principal_direction = principal_direction(&sums, c_in);
    KernelSummary {
        per_kernel_channel_sums: sums,
        principal_direction,
    }
}

fn principal_direction(rows: &[Vec<f64>], dim: usize) -> Vec<f64> {
    let m = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
    let scatter = m.transpose() * &m;
    let eig = SymmetricEigen::new(scatter);
    let (best, _) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
    let mut dir: Vec<f64> = eig.eigenvectors.column(best).iter().copied().collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        let u = 1.0 / (dim as f64).sqrt();
        return vec![u; dim];
    }
    dir.iter_mut().for_each(|v| *v /= norm);
    let lead = dir
        .iter()
        .copied()
        .fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
    if lead < 0.0 {
        dir.iter_mut().for_each(|v| *v = -*v);
    }
    dir
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::NetworkConfig;

    #[test]
    fn equal_weights_give_uniform_direction() {
        let mut net = Network::init(NetworkConfig::tiny(), 0).unwrap();
        net.params_mut()[0]
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 0.1);
        let s = first_layer_channel_sums(&net);
        assert_eq!(s.per_kernel_channel_sums.len(), 8);
        for row in &s.per_kernel_channel_sums {
            for &v in row {
                assert!((v - 0.9).abs() < 1e-12);
            }
        }
        let u = 1.0 / 3f64.sqrt();
        for &d in &s.principal_direction {
            assert!((d - u).abs() < 1e-9);
        }
    }

    #[test]
    fn direction_is_unit_and_scale_invariant() {
        let mut net = Network::init(NetworkConfig::tiny(), 5).unwrap();
        let a = first_layer_channel_sums(&net);
        let norm: f64 = a
            .principal_direction
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        net.params_mut()[0].scale(3.7);
        let b = first_layer_channel_sums(&net);
        for (x, y) in a.principal_direction.iter().zip(&b.principal_direction) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sums_use_the_right_taps() {
        let mut net = Network::init(NetworkConfig::tiny().with_input_channels(2), 0).unwrap();
        // weights shaped 3x3x2x8: put 1 on channel 1 of kernel 3 at every tap
        let w = &mut net.params_mut()[0];
        w.data_mut().iter_mut().for_each(|v| *v = 0.0);
        for tap in 0..9 {
            w.data_mut()[tap * 16 + 8 + 3] = 1.0;
        }
        let s = first_layer_channel_sums(&net);
        assert_eq!(s.per_kernel_channel_sums[3], vec![0.0, 9.0]);
        assert_eq!(s.principal_direction, vec![0.0, 1.0]);
    }
}
