//! Layer primitives of the frame-difference CNN.
//!
//! Image tensors are stored height x width x channels. Convolution weights are
//! `3 x 3 x c_in x c_out`, which is exactly the row-major layout of the
//! `(9 c_in) x c_out` matrix multiplied against the im2col patch matrix.

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;

/// `c = a * b + beta * c` with optional transposition of either operand.
///
/// `a` is `m x k` (or `k x m` if `trans_a`), `b` is `k x n` (or `n x k`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if trans_a { (1, m) } else { (k, 1) };
    let (rsb, csb) = if trans_b { (1, k) } else { (n, 1) };
    // SAFETY: the asserted slice lengths cover every index matrixmultiply
    // touches for the given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn image_dims(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, c] => Ok((h, w, c)),
        ref s => Err(Error::shape(op, "rank", 3, s.len())),
    }
}

/// Patch matrix with one row per output pixel and `9 c` columns.
fn im2col(input: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let row = KERNEL * KERNEL * c;
    let mut col = vec![0.0; h * w * row];
    for y in 0..h {
        for x in 0..w {
            let dst = &mut col[(y * w + x) * row..(y * w + x + 1) * row];
            for ky in 0..KERNEL {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..KERNEL {
                    let sx = x as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let src = (sy as usize * w + sx as usize) * c;
                    let off = (ky * KERNEL + kx) * c;
                    dst[off..off + c].copy_from_slice(&input[src..src + c]);
                }
            }
        }
    }
    col
}

fn col2im(col: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let row = KERNEL * KERNEL * c;
    let mut out = vec![0.0; h * w * c];
    for y in 0..h {
        for x in 0..w {
            let src_row = &col[(y * w + x) * row..(y * w + x + 1) * row];
            for ky in 0..KERNEL {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..KERNEL {
                    let sx = x as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let dst = (sy as usize * w + sx as usize) * c;
                    let off = (ky * KERNEL + kx) * c;
                    for ch in 0..c {
                        out[dst + ch] += src_row[off + ch];
                    }
                }
            }
        }
    }
    out
}

fn check_conv_shapes(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
) -> Result<(usize, usize, usize, usize)> {
    const OP: &str = "conv2d_forward";
    let (h, w, c_in) = image_dims(OP, input)?;
    if h == 0 || w == 0 {
        return Err(Error::shape(
            OP,
            "input height/width",
            ">= 1",
            format!("{h}x{w}"),
        ));
    }
    let c_out = match *weights.shape() {
        [3, 3, wc, co] => {
            if wc != c_in {
                return Err(Error::shape(OP, "weights input channels", c_in, wc));
            }
            co
        }
        ref s => {
            return Err(Error::shape(
                OP,
                "weights shape",
                "[3, 3, c_in, c_out]",
                format!("{s:?}"),
            ))
        }
    };
    if bias.shape() != [c_out] {
        return Err(Error::shape(
            OP,
            "bias length",
            c_out,
            format!("{:?}", bias.shape()),
        ));
    }
    Ok((h, w, c_in, c_out))
}

/// Same-size 3x3 convolution (zero padding 1, stride 1).
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (h, w, c_in, c_out) = check_conv_shapes(input, weights, bias)?;
    let col = im2col(input.data(), h, w, c_in);
    let mut out = Vec::with_capacity(h * w * c_out);
    for _ in 0..h * w {
        out.extend_from_slice(bias.data());
    }
    gemm(
        h * w,
        KERNEL * KERNEL * c_in,
        c_out,
        &col,
        false,
        weights.data(),
        false,
        1.0,
        &mut out,
    );
    Tensor::new(&[h, w, c_out], out)
}

/// Gradients of a convolution with respect to its input, weights and bias.
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
    need_input_grad: bool,
) -> Result<ConvGrads> {
    const OP: &str = "conv2d_backward";
    let (h, w, c_in) = image_dims(OP, input)?;
    let c_out = weights.shape()[3];
    grad_out.expect_shape(OP, &[h, w, c_out])?;
    let k = KERNEL * KERNEL * c_in;
    let col = im2col(input.data(), h, w, c_in);

    let mut dw = vec![0.0; k * c_out];
    gemm(
        k,
        h * w,
        c_out,
        &col,
        true,
        grad_out.data(),
        false,
        0.0,
        &mut dw,
    );

    let mut db = vec![0.0; c_out];
    for px in grad_out.data().chunks_exact(c_out) {
        for (acc, g) in db.iter_mut().zip(px) {
            *acc += g;
        }
    }

    let dinput = if need_input_grad {
        let mut dcol = vec![0.0; h * w * k];
        gemm(
            h * w,
            c_out,
            k,
            grad_out.data(),
            false,
            weights.data(),
            true,
            0.0,
            &mut dcol,
        );
        Some(Tensor::new(&[h, w, c_in], col2im(&dcol, h, w, c_in))?)
    } else {
        None
    };

    Ok(ConvGrads {
        input: dinput,
        weights: Tensor::new(weights.shape(), dw)?,
        bias: Tensor::new(&[c_out], db)?,
    })
}

/// 2x2 average pooling with stride 2.
pub fn avgpool2x2(input: &Tensor) -> Result<Tensor> {
    const OP: &str = "avgpool2x2";
    let (h, w, c) = image_dims(OP, input)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(
            OP,
            "height/width parity",
            "even",
            format!("{h}x{w}"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let src = input.data();
    let mut out = vec![0.0; oh * ow * c];
    for y in 0..oh {
        for x in 0..ow {
            let o = (y * ow + x) * c;
            let a = ((2 * y) * w + 2 * x) * c;
            let b = a + c;
            let cc = a + w * c;
            let d = cc + c;
            for ch in 0..c {
                out[o + ch] = 0.25 * (src[a + ch] + src[b + ch] + src[cc + ch] + src[d + ch]);
            }
        }
    }
    Tensor::new(&[oh, ow, c], out)
}

pub fn avgpool2x2_backward(grad_out: &Tensor) -> Result<Tensor> {
    let (oh, ow, c) = image_dims("avgpool2x2_backward", grad_out)?;
    let (h, w) = (oh * 2, ow * 2);
    let g = grad_out.data();
    let mut out = vec![0.0; h * w * c];
    for y in 0..h {
        for x in 0..w {
            let o = (y * w + x) * c;
            let s = ((y / 2) * ow + x / 2) * c;
            for ch in 0..c {
                out[o + ch] = 0.25 * g[s + ch];
            }
        }
    }
    Tensor::new(&[h, w, c], out)
}

pub fn tanh_activation(input: &Tensor) -> Tensor {
    input.map(f64::tanh)
}

/// Backward of tanh given its *output* `y`: `grad * (1 - y^2)`.
pub fn tanh_backward(output: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    grad_out.expect_shape("tanh_backward", output.shape())?;
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(y, g)| g * (1.0 - y * y))
        .collect();
    Tensor::new(output.shape(), data)
}

/// Inverted dropout. Returns the output and the multiplicative mask applied
/// (entries are `0` or `1 / (1 - rate)`; all ones outside training).
pub fn dropout<R: Rng + ?Sized>(
    input: &Tensor,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), Tensor::filled(input.shape(), 1.0)));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask = Tensor::from_fn(input.shape(), |_| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    });
    let out = apply_mask(input, &mask)?;
    Ok((out, mask))
}

pub fn apply_mask(input: &Tensor, mask: &Tensor) -> Result<Tensor> {
    input.expect_shape("apply_mask", mask.shape())?;
    let data = input
        .data()
        .iter()
        .zip(mask.data())
        .map(|(a, m)| a * m)
        .collect();
    Tensor::new(input.shape(), data)
}

/// Affine map `y = x W + b` with `W` stored `n_in x n_out`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    const OP: &str = "dense_forward";
    let (n_in, n_out) = match *weights.shape() {
        [a, b] => (a, b),
        ref s => return Err(Error::shape(OP, "weights rank", 2, s.len())),
    };
    if input.len() != n_in {
        return Err(Error::shape(OP, "input length", n_in, input.len()));
    }
    if bias.shape() != [n_out] {
        return Err(Error::shape(
            OP,
            "bias length",
            n_out,
            format!("{:?}", bias.shape()),
        ));
    }
    let mut out = bias.data().to_vec();
    gemm(
        1,
        n_in,
        n_out,
        input.data(),
        false,
        weights.data(),
        false,
        1.0,
        &mut out,
    );
    Tensor::new(&[n_out], out)
}

pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (n_in, n_out) = (weights.shape()[0], weights.shape()[1]);
    grad_out.expect_shape("dense_backward", &[n_out])?;
    let mut dw = vec![0.0; n_in * n_out];
    gemm(
        n_in,
        1,
        n_out,
        input.data(),
        false,
        grad_out.data(),
        false,
        0.0,
        &mut dw,
    );
    let mut dx = vec![0.0; n_in];
    gemm(
        1,
        n_out,
        n_in,
        grad_out.data(),
        false,
        weights.data(),
        true,
        0.0,
        &mut dx,
    );
    Ok(DenseGrads {
        input: Tensor::new(input.shape(), dx)?,
        weights: Tensor::new(weights.shape(), dw)?,
        bias: grad_out.clone(),
    })
}

/// `0.5 * ||pred - label||^2` and its gradient with respect to `pred`.
pub fn euclidean_loss(pred: &Tensor, label: &Tensor) -> Result<(f64, Tensor)> {
    pred.expect_shape("euclidean_loss", label.shape())?;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(label.data())
        .map(|(p, l)| p - l)
        .collect();
    let loss = 0.5 * grad.iter().map(|d| d * d).sum::<f64>();
    Ok((loss, Tensor::new(pred.shape(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    /// Direct six-loop convolution.
    fn conv_oracle(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Tensor {
        let (h, w, ci) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let co = weights.shape()[3];
        let mut out = Tensor::zeros(&[h, w, co]);
        for y in 0..h {
            for x in 0..w {
                for o in 0..co {
                    let mut acc = bias.data()[o];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            for c in 0..ci {
                                let sy = y as isize + ky as isize - 1;
                                let sx = x as isize + kx as isize - 1;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                let iv = input.data()[(sy as usize * w + sx as usize) * ci + c];
                                let wv = weights.data()[((ky * 3 + kx) * ci + c) * co + o];
                                acc += iv * wv;
                            }
                        }
                    }
                    out.data_mut()[(y * w + x) * co + o] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_tensor(&[5, 7, 1], &mut rng);
        let mut k = Tensor::zeros(&[3, 3, 1, 1]);
        k.data_mut()[4] = 1.0;
        let out = conv2d_forward(&img, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn conv_all_ones_on_constant() {
        let c = 2.5;
        let img = Tensor::filled(&[6, 6, 1], c);
        let k = Tensor::filled(&[3, 3, 1, 1], 1.0);
        let out = conv2d_forward(&img, &k, &Tensor::zeros(&[1])).unwrap();
        for y in 1..5 {
            for x in 1..5 {
                assert_eq!(out.data()[y * 6 + x], 9.0 * c);
            }
        }
        // corners see four in-bounds taps
        assert_eq!(out.data()[0], 4.0 * c);
    }

    #[test]
    fn conv_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = random_tensor(&[8, 8, 3], &mut rng);
        let k = random_tensor(&[3, 3, 3, 4], &mut rng);
        let b = random_tensor(&[4], &mut rng);
        let fast = conv2d_forward(&img, &k, &b).unwrap();
        let slow = conv_oracle(&img, &k, &b);
        assert!(fast.max_abs_diff(&slow) < 1e-12);
    }

    #[test]
    fn conv_shape_errors_name_dimension() {
        let img = Tensor::zeros(&[8, 8, 3]);
        let k = Tensor::zeros(&[3, 3, 2, 4]);
        let err = conv2d_forward(&img, &k, &Tensor::zeros(&[4])).unwrap_err();
        assert!(err.to_string().contains("input channels"), "{err}");
        let k = Tensor::zeros(&[3, 3, 3, 4]);
        let err = conv2d_forward(&img, &k, &Tensor::zeros(&[5])).unwrap_err();
        assert!(err.to_string().contains("bias"), "{err}");
        let flat = Tensor::zeros(&[64, 3]);
        assert!(conv2d_forward(&flat, &k, &Tensor::zeros(&[4])).is_err());
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = random_tensor(&[4, 5, 2], &mut rng);
        let k = random_tensor(&[3, 3, 2, 3], &mut rng);
        let b = random_tensor(&[3], &mut rng);
        let probe = random_tensor(&[4, 5, 3], &mut rng);
        let objective = |img: &Tensor, k: &Tensor, b: &Tensor| -> f64 {
            let y = conv2d_forward(img, k, b).unwrap();
            y.data().iter().zip(probe.data()).map(|(a, p)| a * p).sum()
        };
        let g = conv2d_backward(&img, &k, &probe, true).unwrap();
        let h = 1e-6;
        for i in 0..k.len() {
            let (mut kp, mut km) = (k.clone(), k.clone());
            kp.data_mut()[i] += h;
            km.data_mut()[i] -= h;
            let fd = (objective(&img, &kp, &b) - objective(&img, &km, &b)) / (2.0 * h);
            assert!((fd - g.weights.data()[i]).abs() < 1e-7);
        }
        for i in 0..img.len() {
            let (mut ip, mut im) = (img.clone(), img.clone());
            ip.data_mut()[i] += h;
            im.data_mut()[i] -= h;
            let fd = (objective(&ip, &k, &b) - objective(&im, &k, &b)) / (2.0 * h);
            assert!((fd - g.input.as_ref().unwrap().data()[i]).abs() < 1e-7);
        }
        for i in 0..3 {
            let sum: f64 = probe.data().iter().skip(i).step_by(3).sum();
            assert!((sum - g.bias.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_constant_and_block_mean() {
        let img = Tensor::filled(&[4, 6, 2], 3.0);
        let p = avgpool2x2(&img).unwrap();
        assert_eq!(p.shape(), &[2, 3, 2]);
        assert!(p.data().iter().all(|&v| v == 3.0));

        let block = Tensor::new(&[2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(avgpool2x2(&block).unwrap().data(), &[2.5]);
        assert!(avgpool2x2(&Tensor::zeros(&[3, 4, 1])).is_err());
    }

    #[test]
    fn pool_matches_block_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = random_tensor(&[64, 64, 3], &mut rng);
        let p = avgpool2x2(&img).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                for c in 0..3 {
                    let at = |yy: usize, xx: usize| img.data()[(yy * 64 + xx) * 3 + c];
                    let blk = [
                        at(2 * y, 2 * x),
                        at(2 * y, 2 * x + 1),
                        at(2 * y + 1, 2 * x),
                        at(2 * y + 1, 2 * x + 1),
                    ];
                    let expected = 0.25 * (blk[0] + blk[1] + blk[2] + blk[3]);
                    assert_eq!(p.data()[(y * 32 + x) * 3 + c], expected);
                }
            }
        }
    }

    #[test]
    fn tanh_values_and_derivative() {
        let t = Tensor::new(&[4], vec![0.0, 12.5, -13.0, 0.3]).unwrap();
        let y = tanh_activation(&t);
        assert_eq!(y.data()[0], 0.0);
        assert!((y.data()[1] - 1.0).abs() < 1e-9);
        assert!((y.data()[2] + 1.0).abs() < 1e-9);
        let g = tanh_backward(&y, &Tensor::filled(&[4], 1.0)).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let x = t.data()[i];
            let fd = ((x + h).tanh() - (x - h).tanh()) / (2.0 * h);
            assert!((fd - g.data()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn dropout_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(&[10, 10, 2], &mut rng);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap().0, x);
        assert_eq!(dropout(&x, 0.9, &mut rng, false).unwrap().0, x);
        assert!(dropout(&x, 1.0, &mut rng, true).is_err());

        let big = Tensor::filled(&[1_000_000], 1.0);
        let (out, _) = dropout(&big, 0.25, &mut rng, true).unwrap();
        let survivors = out.data().iter().filter(|&&v| v != 0.0).count() as f64 / 1e6;
        assert!((survivors - 0.75).abs() < 0.002, "{survivors}");
        assert!(out
            .data()
            .iter()
            .all(|&v| v == 0.0 || (v - 4.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn dense_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_tensor(&[4], &mut rng);
        let eye = Tensor::from_fn(&[4, 4], |i| if i / 4 == i % 4 { 1.0 } else { 0.0 });
        assert_eq!(dense_forward(&x, &eye, &Tensor::zeros(&[4])).unwrap(), x);

        let b = random_tensor(&[3], &mut rng);
        assert_eq!(dense_forward(&x, &Tensor::zeros(&[4, 3]), &b).unwrap(), b);

        let w = random_tensor(&[4, 3], &mut rng);
        let y = dense_forward(&x, &w, &b).unwrap();
        for j in 0..3 {
            let mut acc = b.data()[j];
            for i in 0..4 {
                acc += x.data()[i] * w.data()[i * 3 + j];
            }
            assert!((acc - y.data()[j]).abs() < 1e-12);
        }
        assert!(dense_forward(&Tensor::zeros(&[5]), &w, &b).is_err());
    }

    #[test]
    fn euclidean_loss_cases() {
        let p = Tensor::new(&[2], vec![4.0, 6.0]).unwrap();
        assert_eq!(euclidean_loss(&p, &p).unwrap().0, 0.0);
        let l = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let (loss, grad) = euclidean_loss(&p, &l).unwrap();
        assert_eq!(loss, 12.5);
        assert_eq!(grad.data(), &[3.0, 4.0]);

        let h = 1e-6;
        for i in 0..2 {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.data_mut()[i] += h;
            b.data_mut()[i] -= h;
            let fd =
                (euclidean_loss(&a, &l).unwrap().0 - euclidean_loss(&b, &l).unwrap().0) / (2.0 * h);
            assert!(((fd - grad.data()[i]) / grad.data()[i]).abs() < 1e-8);
        }
        assert!(euclidean_loss(&p, &Tensor::zeros(&[3])).is_err());
    }
}
