//! Four-gate LSTM without peepholes. Gate rows are stacked `[i, f, o, g]`
//! and act on the concatenation `[x; h_prev]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::sigmoid;
use super::tensor::axpy;
use super::{NnError, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `[4·hidden, input + hidden]`
    pub w: Tensor,
    /// `[4·hidden]`
    pub b: Tensor,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Tensor::zeros(&[4 * hidden, input + hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn uniform<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        LstmParams {
            w: Tensor::uniform(&[4 * hidden, input + hidden], scale, rng),
            b: Tensor::uniform(&[4 * hidden], scale, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input(&self) -> usize {
        self.w.cols() - self.hidden()
    }
}

/// Values kept from the forward pass for [`cell_backward`].
#[derive(Debug, Clone)]
pub struct CellCache {
    xh: Vec<f64>,
    /// Activated gates, `[i, f, o, g]`.
    gates: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn check(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(), NnError> {
    let h = p.hidden();
    if x.len() != p.input() || h_prev.len() != h || c_prev.len() != h {
        return Err(NnError::ShapeMismatch {
            expected: vec![p.input(), h, h],
            found: vec![x.len(), h_prev.len(), c_prev.len()],
        });
    }
    Ok(())
}

pub fn cell_forward(
    p: &LstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, CellCache), NnError> {
    check(p, x, h_prev, c_prev)?;
    let n = p.hidden();
    let mut xh = Vec::with_capacity(x.len() + n);
    xh.extend_from_slice(x);
    xh.extend_from_slice(h_prev);
    let mut gates = p.w.matvec(&xh)?;
    for (z, b) in gates.iter_mut().zip(p.b.data()) {
        *z += b;
    }
    for (k, z) in gates.iter_mut().enumerate() {
        *z = if k < 3 * n { sigmoid(*z) } else { z.tanh() };
    }
    let mut c = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut tanh_c = vec![0.0; n];
    for k in 0..n {
        c[k] = gates[n + k] * c_prev[k] + gates[k] * gates[3 * n + k];
        tanh_c[k] = c[k].tanh();
        h[k] = gates[2 * n + k] * tanh_c[k];
    }
    let cache = CellCache {
        xh,
        gates,
        c_prev: c_prev.to_vec(),
        tanh_c,
    };
    Ok((h, c, cache))
}

pub fn cell_step(
    p: &LstmParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    cell_forward(p, x, h_prev, c_prev).map(|(h, c, _)| (h, c))
}

/// Accumulates parameter gradients into `grad` and returns
/// `(dx, dh_prev, dc_prev)` given the gradients flowing into `h` and `c`.
pub fn cell_backward(
    p: &LstmParams,
    cache: &CellCache,
    dh: &[f64],
    dc: &[f64],
    grad: &mut LstmParams,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = p.hidden();
    let g = &cache.gates;
    let mut dz = vec![0.0; 4 * n];
    let mut dc_prev = vec![0.0; n];
    for k in 0..n {
        let (i, f, o, gg) = (g[k], g[n + k], g[2 * n + k], g[3 * n + k]);
        let tc = cache.tanh_c[k];
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        dz[k] = dct * gg * i * (1.0 - i);
        dz[n + k] = dct * cache.c_prev[k] * f * (1.0 - f);
        dz[2 * n + k] = dh[k] * tc * o * (1.0 - o);
        dz[3 * n + k] = dct * i * (1.0 - gg * gg);
        dc_prev[k] = dct * f;
    }
    grad.w
        .add_outer(1.0, &dz, &cache.xh)
        .expect("gradient shapes match parameters");
    axpy(grad.b.data_mut(), 1.0, &dz);
    let dxh = p.w.matvec_t(&dz).expect("cache shapes match parameters");
    let split = cache.xh.len() - n;
    (dxh[..split].to_vec(), dxh[split..].to_vec(), dc_prev)
}
