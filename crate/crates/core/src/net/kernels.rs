//! Per-sample layer kernels. Buffers are flat, row-major, channel-first.

use super::params::KERNEL;

/// Dimensions of a valid, stride-1 convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvDims {
    pub c_in: usize,
    pub rows: usize,
    pub cols: usize,
    pub c_out: usize,
}

impl ConvDims {
    pub fn out_rows(&self) -> usize {
        self.rows - KERNEL + 1
    }

    pub fn out_cols(&self) -> usize {
        self.cols - KERNEL + 1
    }

    #[cfg(test)]
    pub fn in_len(&self) -> usize {
        self.c_in * self.rows * self.cols
    }

    #[cfg(test)]
    pub fn out_len(&self) -> usize {
        self.c_out * self.out_rows() * self.out_cols()
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn conv_forward(
    d: ConvDims,
    input: &[f64],
    weight: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    let (or, oc) = (d.out_rows(), d.out_cols());
    for o in 0..d.c_out {
        let plane = &mut out[o * or * oc..(o + 1) * or * oc];
        plane.fill(bias[o]);
        for c in 0..d.c_in {
            let src = &input[c * d.rows * d.cols..(c + 1) * d.rows * d.cols];
            let kern = &weight[(o * d.c_in + c) * KERNEL * KERNEL..][..KERNEL * KERNEL];
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let w = kern[ky * KERNEL + kx];
                    for y in 0..or {
                        let s = &src[(y + ky) * d.cols + kx..][..oc];
                        axpy(w, s, &mut plane[y * oc..(y + 1) * oc]);
                    }
                }
            }
        }
    }
}

/// Accumulate weight and bias gradients, and optionally the input gradient.
pub(crate) fn conv_backward(
    d: ConvDims,
    input: &[f64],
    weight: &[f64],
    d_out: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    mut d_input: Option<&mut [f64]>,
) {
    let (or, oc) = (d.out_rows(), d.out_cols());
    for o in 0..d.c_out {
        let g = &d_out[o * or * oc..(o + 1) * or * oc];
        d_bias[o] += g.iter().sum::<f64>();
        for c in 0..d.c_in {
            let src = &input[c * d.rows * d.cols..(c + 1) * d.rows * d.cols];
            let base = (o * d.c_in + c) * KERNEL * KERNEL;
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let mut acc = 0.0;
                    for y in 0..or {
                        acc += dot(
                            &g[y * oc..(y + 1) * oc],
                            &src[(y + ky) * d.cols + kx..][..oc],
                        );
                    }
                    d_weight[base + ky * KERNEL + kx] += acc;
                    if let Some(dx) = d_input.as_deref_mut() {
                        let w = weight[base + ky * KERNEL + kx];
                        let plane = &mut dx[c * d.rows * d.cols..(c + 1) * d.rows * d.cols];
                        for y in 0..or {
                            axpy(
                                w,
                                &g[y * oc..(y + 1) * oc],
                                &mut plane[(y + ky) * d.cols + kx..][..oc],
                            );
                        }
                    }
                }
            }
        }
    }
}

/// `out = weight · input + bias` with `weight` shaped `[out.len()][input.len()]`.
pub(crate) fn dense_forward(input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let n = input.len();
    for (j, o) in out.iter_mut().enumerate() {
        *o = bias[j] + dot(&weight[j * n..(j + 1) * n], input);
    }
}

pub(crate) fn dense_backward(
    input: &[f64],
    weight: &[f64],
    d_out: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    mut d_input: Option<&mut [f64]>,
) {
    let n = input.len();
    for (j, &g) in d_out.iter().enumerate() {
        d_bias[j] += g;
        if g == 0.0 {
            continue;
        }
        axpy(g, input, &mut d_weight[j * n..(j + 1) * n]);
        if let Some(dx) = d_input.as_deref_mut() {
            axpy(g, &weight[j * n..(j + 1) * n], dx);
        }
    }
}

pub(crate) fn relu(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zero the gradient wherever the (post-ReLU) activation is not positive.
pub(crate) fn relu_backward(activation: &[f64], grad: &mut [f64]) {
    for (g, a) in grad.iter_mut().zip(activation) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct quadruple-loop convolution used as reference.
    fn conv_reference(d: ConvDims, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let (or, oc) = (d.out_rows(), d.out_cols());
        let mut out = vec![0.0; d.out_len()];
        for o in 0..d.c_out {
            for y in 0..or {
                for x in 0..oc {
                    let mut s = bias[o];
                    for c in 0..d.c_in {
                        for ky in 0..KERNEL {
                            for kx in 0..KERNEL {
                                s += weight[((o * d.c_in + c) * KERNEL + ky) * KERNEL + kx]
                                    * input[(c * d.rows + y + ky) * d.cols + x + kx];
                            }
                        }
                    }
                    out[(o * or + y) * oc + x] = s;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_reference() {
        let d = ConvDims {
            c_in: 2,
            rows: 7,
            cols: 9,
            c_out: 3,
        };
        let input: Vec<f64> = (0..d.in_len())
            .map(|i| ((i * 37) % 11) as f64 - 5.0)
            .collect();
        let weight: Vec<f64> = (0..3 * 2 * 25)
            .map(|i| ((i * 13) % 7) as f64 * 0.1 - 0.3)
            .collect();
        let bias = [0.5, -1.0, 0.25];
        let mut out = vec![0.0; d.out_len()];
        conv_forward(d, &input, &weight, &bias, &mut out);
        let want = conv_reference(d, &input, &weight, &bias);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_backward_is_adjoint() {
        // <conv(x), g> = <x, conv^T g> + <b, sum g>, checked for the input and
        // the weights separately.
        let d = ConvDims {
            c_in: 2,
            rows: 6,
            cols: 8,
            c_out: 2,
        };
        let x: Vec<f64> = (0..d.in_len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..2 * 2 * 25).map(|i| (i as f64 * 0.11).cos()).collect();
        let g: Vec<f64> = (0..d.out_len()).map(|i| (i as f64 * 0.73).sin()).collect();
        let zero_b = [0.0, 0.0];
        let mut y = vec![0.0; d.out_len()];
        conv_forward(d, &x, &w, &zero_b, &mut y);
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut dw = vec![0.0; w.len()];
        let mut db = [0.0; 2];
        let mut dx = vec![0.0; x.len()];
        conv_backward(d, &x, &w, &g, &mut dw, &mut db, Some(&mut dx));
        let via_x: f64 = dx.iter().zip(&x).map(|(a, b)| a * b).sum();
        let via_w: f64 = dw.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((lhs - via_x).abs() < 1e-10);
        assert!((lhs - via_w).abs() < 1e-10);
        assert!((db[0] - g[..d.out_len() / 2].iter().sum::<f64>()).abs() < 1e-12);
    }
}
