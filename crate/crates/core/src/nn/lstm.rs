use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// One LSTM layer. Gate blocks are stored in the order input, forget,
/// output, candidate (`i, f, o, g`): `w` is `4H x I`, `u` is `4H x H`,
/// `b` has length `4H`, all row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_width: usize,
    pub hidden_width: usize,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

/// Activations retained by a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub steps: usize,
    /// `T x 4H` post-activation gates.
    gates: Vec<f64>,
    /// `T x H` cell states.
    cells: Vec<f64>,
    /// `T x H` `tanh(c_t)`.
    cell_tanh: Vec<f64>,
    /// `T x H` hidden states.
    pub hidden: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LstmParams {
    pub fn zeros(input_width: usize, hidden_width: usize) -> Self {
        let g = 4 * hidden_width;
        LstmParams {
            input_width,
            hidden_width,
            w: vec![0.0; g * input_width],
            u: vec![0.0; g * hidden_width],
            b: vec![0.0; g],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().chain(&self.u).chain(&self.b)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w.iter_mut().chain(self.u.iter_mut()).chain(self.b.iter_mut())
    }

    /// Runs the recurrence over `x` (`steps x input_width`, row-major) from
    /// `h_0 = c_0 = 0`.
    pub fn forward(&self, x: &[f64], steps: usize) -> LstmTrace {
        let (n_in, n_h) = (self.input_width, self.hidden_width);
        debug_assert_eq!(x.len(), steps * n_in);
        let mut trace = LstmTrace {
            steps,
            gates: vec![0.0; steps * 4 * n_h],
            cells: vec![0.0; steps * n_h],
            cell_tanh: vec![0.0; steps * n_h],
            hidden: vec![0.0; steps * n_h],
        };
        let zero = vec![0.0; n_h];
        for t in 0..steps {
            let xt = &x[t * n_in..(t + 1) * n_in];
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                (
                    &trace.hidden[(t - 1) * n_h..t * n_h],
                    &trace.cells[(t - 1) * n_h..t * n_h],
                )
            };
            let mut z = vec![0.0; 4 * n_h];
            for (r, zr) in z.iter_mut().enumerate() {
                *zr = self.b[r]
                    + dot(&self.w[r * n_in..(r + 1) * n_in], xt)
                    + dot(&self.u[r * n_h..(r + 1) * n_h], h_prev);
            }
            let mut c = vec![0.0; n_h];
            let mut tc = vec![0.0; n_h];
            let mut h = vec![0.0; n_h];
            for k in 0..n_h {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[n_h + k]);
                let o = sigmoid(z[2 * n_h + k]);
                let g = z[3 * n_h + k].tanh();
                z[k] = i;
                z[n_h + k] = f;
                z[2 * n_h + k] = o;
                z[3 * n_h + k] = g;
                c[k] = f * c_prev[k] + i * g;
                tc[k] = c[k].tanh();
                h[k] = o * tc[k];
            }
            trace.gates[t * 4 * n_h..(t + 1) * 4 * n_h].copy_from_slice(&z);
            trace.cells[t * n_h..(t + 1) * n_h].copy_from_slice(&c);
            trace.cell_tanh[t * n_h..(t + 1) * n_h].copy_from_slice(&tc);
            trace.hidden[t * n_h..(t + 1) * n_h].copy_from_slice(&h);
        }
        trace
    }

    /// Backpropagation through time.
    ///
    /// `dh_out` holds `dL/dh_t` arriving from above for every step
    /// (`steps x H`). Parameter gradients are accumulated into `grad`; when
    /// `dx` is given it receives `dL/dx_t` (`steps x I`, overwritten).
    pub fn backward(
        &self,
        x: &[f64],
        trace: &LstmTrace,
        dh_out: &[f64],
        grad: &mut LstmParams,
        mut dx: Option<&mut [f64]>,
    ) {
        let (n_in, n_h) = (self.input_width, self.hidden_width);
        let steps = trace.steps;
        if let Some(dx) = dx.as_deref_mut() {
            dx.fill(0.0);
        }
        let mut dh_next = vec![0.0; n_h];
        let mut dc_next = vec![0.0; n_h];
        let mut dz = vec![0.0; 4 * n_h];
        let zero = vec![0.0; n_h];
        for t in (0..steps).rev() {
            let gates = &trace.gates[t * 4 * n_h..(t + 1) * 4 * n_h];
            let tc = &trace.cell_tanh[t * n_h..(t + 1) * n_h];
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                (
                    &trace.hidden[(t - 1) * n_h..t * n_h],
                    &trace.cells[(t - 1) * n_h..t * n_h],
                )
            };
            for k in 0..n_h {
                let (i, f, o, g) = (gates[k], gates[n_h + k], gates[2 * n_h + k], gates[3 * n_h + k]);
                let dh = dh_out[t * n_h + k] + dh_next[k];
                let dc = dh * o * (1.0 - tc[k] * tc[k]) + dc_next[k];
                dz[k] = dc * g * i * (1.0 - i);
                dz[n_h + k] = dc * c_prev[k] * f * (1.0 - f);
                dz[2 * n_h + k] = dh * tc[k] * o * (1.0 - o);
                dz[3 * n_h + k] = dc * i * (1.0 - g * g);
                dc_next[k] = dc * f;
            }
            let xt = &x[t * n_in..(t + 1) * n_in];
            dh_next.fill(0.0);
            for (r, &d) in dz.iter().enumerate() {
                grad.b[r] += d;
                let w_row = &self.w[r * n_in..(r + 1) * n_in];
                let gw_row = &mut grad.w[r * n_in..(r + 1) * n_in];
                for j in 0..n_in {
                    gw_row[j] += d * xt[j];
                }
                if let Some(dx) = dx.as_deref_mut() {
                    let dxt = &mut dx[t * n_in..(t + 1) * n_in];
                    for j in 0..n_in {
                        dxt[j] += w_row[j] * d;
                    }
                }
                let u_row = &self.u[r * n_h..(r + 1) * n_h];
                let gu_row = &mut grad.u[r * n_h..(r + 1) * n_h];
                for j in 0..n_h {
                    gu_row[j] += d * h_prev[j];
                    dh_next[j] += u_row[j] * d;
                }
            }
        }
    }
}

impl LstmTrace {
    pub fn last_hidden(&self, hidden_width: usize) -> &[f64] {
        &self.hidden[(self.steps - 1) * hidden_width..]
    }
}

/// Runs one layer over a `T x input_width` sequence and returns the `T x H`
/// hidden states.
pub fn lstm_layer_forward(params: &LstmParams, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (steps, width) = inputs.dim();
    if width != params.input_width {
        return Err(Error::Shape {
            context: "lstm input width",
            expected: params.input_width,
            actual: width,
        });
    }
    if steps == 0 {
        return Err(Error::Contract("empty input sequence".into()));
    }
    let x: Vec<f64> = inputs.iter().copied().collect();
    let trace = params.forward(&x, steps);
    Ok(Array2::from_shape_vec((steps, params.hidden_width), trace.hidden).expect("trace shape"))
}
