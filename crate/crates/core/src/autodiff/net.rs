//! Multilayer perceptrons over the scalar tape, with a buffer-reusing fast
//! path for the training hot loop. The tape path is the reference
//! implementation; the fast path is pinned to it by tests.

use super::tape::{Tape, Var};
use crate::error::{GaniceError, Result};
use crate::numeric::logistic;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Softplus,
}

/// Fully connected network with a flat parameter vector.
///
/// Layout per layer: `w[out][in]` row-major, then biases. When
/// `output_bound = Some(k)` every output passes through `k * tanh(z / k)`,
/// so outputs stay in `[-k, k]` while the map is near-identity well inside
/// the bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpNet {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub output_bound: Option<f64>,
    pub weights: Vec<f64>,
}

/// A recorded forward evaluation: the tape plus handles to the leaves.
pub struct ForwardPass {
    pub tape: Tape,
    pub inputs: Vec<Var>,
    pub params: Vec<Var>,
    pub outputs: Vec<Var>,
}

#[derive(Debug, Clone, Copy)]
pub enum Wrt {
    Params,
    Inputs,
}

impl MlpNet {
    pub fn param_count_for(layer_widths: &[usize]) -> usize {
        layer_widths
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    pub fn new(layer_widths: Vec<usize>, activation: Activation, output_bound: Option<f64>) -> Result<Self> {
        if layer_widths.len() < 2 || layer_widths.iter().any(|&w| w == 0) {
            return Err(GaniceError::Contract(
                "layer widths need at least input and output, all positive".into(),
            ));
        }
        let n = Self::param_count_for(&layer_widths);
        Ok(MlpNet {
            layer_widths,
            activation,
            output_bound,
            weights: vec![0.0; n],
        })
    }

    /// Uniform init in +-sqrt(6/(fan_in+fan_out)); biases zero.
    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        let mut off = 0;
        for lw in self.layer_widths.windows(2) {
            let (fan_in, fan_out) = (lw[0], lw[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for k in 0..fan_in * fan_out {
                self.weights[off + k] = rng.random_range(-bound..bound);
            }
            for k in 0..fan_out {
                self.weights[off + fan_in * fan_out + k] = 0.0;
            }
            off += (fan_in + 1) * fan_out;
        }
    }

    pub fn with_random_init(
        layer_widths: Vec<usize>,
        activation: Activation,
        output_bound: Option<f64>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut net = Self::new(layer_widths, activation, output_bound)?;
        net.init(rng);
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(GaniceError::Shape(format!(
                "input length {len}, first layer width {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Record a full forward evaluation on a fresh tape.
    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass> {
        let tape = Tape::with_capacity(4 * self.weights.len() + 64);
        self.forward_on(tape, input)
    }

    /// Record a forward evaluation on an existing tape (leaves appended).
    pub fn forward_on(&self, mut tape: Tape, input: &[f64]) -> Result<ForwardPass> {
        self.check_input(input.len())?;
        let inputs: Vec<Var> = input.iter().map(|&x| tape.leaf(x)).collect();
        let params: Vec<Var> = self.weights.iter().map(|&w| tape.leaf(w)).collect();
        let outputs = self.forward_vars(&mut tape, &inputs, &params);
        Ok(ForwardPass {
            tape,
            inputs,
            params,
            outputs,
        })
    }

    /// Build the network computation from existing leaf vars.
    pub fn forward_vars(&self, tape: &mut Tape, inputs: &[Var], params: &[Var]) -> Vec<Var> {
        debug_assert_eq!(inputs.len(), self.input_dim());
        debug_assert_eq!(params.len(), self.weights.len());
        let mut act: Vec<Var> = inputs.to_vec();
        let mut off = 0;
        let last = self.layer_widths.len() - 2;
        for (l, lw) in self.layer_widths.windows(2).enumerate() {
            let (w_in, w_out) = (lw[0], lw[1]);
            let bias_off = off + w_in * w_out;
            let mut next = Vec::with_capacity(w_out);
            for j in 0..w_out {
                let mut acc = params[bias_off + j];
                for (i, &a) in act.iter().enumerate() {
                    let t = tape.mul(params[off + j * w_in + i], a);
                    acc = tape.add(acc, t);
                }
                if l < last {
                    acc = match self.activation {
                        Activation::Tanh => tape.tanh(acc),
                        Activation::Relu => tape.relu(acc),
                        Activation::Softplus => tape.softplus(acc),
                    };
                } else if let Some(k) = self.output_bound {
                    let s = tape.scale(acc, 1.0 / k);
                    let t = tape.tanh(s);
                    acc = tape.scale(t, k);
                }
                next.push(acc);
            }
            act = next;
            off += (w_in + 1) * w_out;
        }
        act
    }

    /// Plain forward evaluation without recording.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input.len())?;
        let mut ws = Workspace::new();
        Ok(self.predict_ws(input, &mut ws).to_vec())
    }

    /// Fast forward into reusable buffers; returns the output slice.
    pub fn predict_ws<'w>(&self, input: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        ws.prepare(&self.layer_widths);
        ws.acts[0].copy_from_slice(input);
        let mut off = 0;
        let last = self.layer_widths.len() - 2;
        for (l, lw) in self.layer_widths.windows(2).enumerate() {
            let (w_in, w_out) = (lw[0], lw[1]);
            let bias_off = off + w_in * w_out;
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let prev = &head[l];
            let cur = &mut tail[0];
            for j in 0..w_out {
                let mut acc = self.weights[bias_off + j];
                let wrow = &self.weights[off + j * w_in..off + (j + 1) * w_in];
                for (i, &a) in prev.iter().enumerate() {
                    acc += wrow[i] * a;
                }
                ws.pre[l][j] = acc;
                cur[j] = if l < last {
                    match self.activation {
                        Activation::Tanh => acc.tanh(),
                        Activation::Relu => acc.max(0.0),
                        Activation::Softplus => acc.max(0.0) + (-acc.abs()).exp().ln_1p(),
                    }
                } else if let Some(k) = self.output_bound {
                    k * (acc / k).tanh()
                } else {
                    acc
                };
            }
            off += (w_in + 1) * w_out;
        }
        ws.acts.last().unwrap()
    }

    /// First-order backprop through the fast path. `seed` is dL/d(output);
    /// gradients are accumulated (`+=`) into `grad_params` and `grad_input`
    /// when given. Requires a `predict_ws` call on the same input first.
    pub fn backprop_ws(
        &self,
        ws: &mut Workspace,
        seed: &[f64],
        mut grad_params: Option<&mut [f64]>,
        mut grad_input: Option<&mut [f64]>,
    ) {
        let n_layers = self.layer_widths.len() - 1;
        let last = n_layers - 1;
        ws.delta.resize(self.layer_widths[n_layers], 0.0);
        ws.delta.copy_from_slice(seed);

        let mut off_end = self.weights.len();
        for l in (0..n_layers).rev() {
            let (w_in, w_out) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let off = off_end - (w_in + 1) * w_out;
            let bias_off = off + w_in * w_out;

            // chain through this layer's nonlinearity
            for j in 0..w_out {
                let d_act = if l < last {
                    match self.activation {
                        Activation::Tanh => {
                            let a = ws.acts[l + 1][j];
                            1.0 - a * a
                        }
                        Activation::Relu => {
                            if ws.pre[l][j] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Activation::Softplus => logistic(ws.pre[l][j]),
                    }
                } else if let Some(k) = self.output_bound {
                    let t = (ws.pre[l][j] / k).tanh();
                    1.0 - t * t
                } else {
                    1.0
                };
                ws.delta[j] *= d_act;
            }

            ws.next_delta.clear();
            ws.next_delta.resize(w_in, 0.0);
            for j in 0..w_out {
                let d = ws.delta[j];
                if d == 0.0 {
                    continue;
                }
                let wrow = &self.weights[off + j * w_in..off + (j + 1) * w_in];
                if let Some(gp) = grad_params.as_deref_mut() {
                    gp[bias_off + j] += d;
                    let grow = &mut gp[off + j * w_in..off + (j + 1) * w_in];
                    for i in 0..w_in {
                        grow[i] += d * ws.acts[l][i];
                        ws.next_delta[i] += d * wrow[i];
                    }
                } else {
                    for i in 0..w_in {
                        ws.next_delta[i] += d * wrow[i];
                    }
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.next_delta);
            off_end = off;
        }
        if let Some(gi) = grad_input.as_deref_mut() {
            for (g, d) in gi.iter_mut().zip(ws.delta.iter()) {
                *g += *d;
            }
        }
    }
}

impl ForwardPass {
    pub fn output_values(&self) -> Vec<f64> {
        self.outputs.iter().map(|&v| self.tape.value(v)).collect()
    }

    /// Gradient of the (scalar) recorded output.
    pub fn grad(&mut self, wrt: Wrt) -> Result<Vec<f64>> {
        let root = Tape::require_scalar(&self.outputs)?;
        let sel = match wrt {
            Wrt::Params => &self.params,
            Wrt::Inputs => &self.inputs,
        };
        let sel = sel.clone();
        Ok(self.tape.grad(root, &sel))
    }
}

/// Reusable forward/backward buffers.
#[derive(Debug, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Workspace::default()
    }

    fn prepare(&mut self, layer_widths: &[usize]) {
        self.acts.resize(layer_widths.len(), Vec::new());
        self.pre.resize(layer_widths.len() - 1, Vec::new());
        for (buf, &w) in self.acts.iter_mut().zip(layer_widths.iter()) {
            buf.resize(w, 0.0);
        }
        for (buf, &w) in self.pre.iter_mut().zip(layer_widths[1..].iter()) {
            buf.resize(w, 0.0);
        }
    }
}

/// Buffers for the fast second-order penalty path.
#[derive(Debug, Default)]
pub struct GpWorkspace {
    ws: Workspace,
    grad_in: Vec<f64>,
    tang_pre: Vec<Vec<f64>>,
    tang_act: Vec<Vec<f64>>,
    dz: Vec<f64>,
    dzt: Vec<f64>,
    da: Vec<f64>,
    dat: Vec<f64>,
}

impl GpWorkspace {
    pub fn new() -> Self {
        GpWorkspace::default()
    }
}

impl MlpNet {
    /// Fast WGAN-GP penalty with parameter gradient: a forward-tangent
    /// pass in the direction of the input gradient followed by a reverse
    /// sweep over the tangent program. Equivalent to double backprop
    /// through the tape (pinned by tests) at a fraction of the cost.
    /// `scale * dP/dtheta` is accumulated into `grad`.
    pub fn grad_penalty_ws(
        &self,
        y_interp: &[f64],
        gp: &mut GpWorkspace,
        grad: &mut [f64],
        scale: f64,
    ) -> Result<f64> {
        if self.activation == Activation::Relu {
            return Err(GaniceError::Unsupported(
                "gradient penalty needs a twice-differentiable activation (tanh or softplus), not relu"
                    .into(),
            ));
        }
        if self.output_dim() != 1 {
            return Err(GaniceError::Contract("penalty needs a scalar critic".into()));
        }
        // primal forward + input gradient
        self.predict_ws(y_interp, &mut gp.ws);
        gp.grad_in.clear();
        gp.grad_in.resize(y_interp.len(), 0.0);
        {
            let GpWorkspace { ws, grad_in, .. } = gp;
            self.backprop_ws(ws, &[1.0], None, Some(grad_in));
        }
        let norm2: f64 = gp.grad_in.iter().map(|g| g * g).sum();
        if norm2 == 0.0 {
            // degenerate critic: constant subgradient choice
            return Ok(1.0);
        }
        let norm = norm2.sqrt();
        let penalty = (norm - 1.0) * (norm - 1.0);

        // tangent pass with direction v = grad_in: output tangent is
        // ||grad||^2 and its theta-gradient is d/dtheta (1/2 ||grad||^2)
        // doubled, by symmetry of second derivatives
        let n_layers = self.layer_widths.len() - 1;
        let last = n_layers - 1;
        gp.tang_pre.resize(n_layers, Vec::new());
        gp.tang_act.resize(n_layers + 1, Vec::new());
        gp.tang_act[0].clear();
        gp.tang_act[0].extend_from_slice(&gp.grad_in);
        let mut off = 0;
        for l in 0..n_layers {
            let (w_in, w_out) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let (head, tail) = gp.tang_act.split_at_mut(l + 1);
            let prev_t = &head[l];
            gp.tang_pre[l].clear();
            gp.tang_pre[l].resize(w_out, 0.0);
            tail[0].clear();
            tail[0].resize(w_out, 0.0);
            for j in 0..w_out {
                let wrow = &self.weights[off + j * w_in..off + (j + 1) * w_in];
                let mut zt = 0.0;
                for i in 0..w_in {
                    zt += wrow[i] * prev_t[i];
                }
                gp.tang_pre[l][j] = zt;
                tail[0][j] = self.act_prime(l, last, &gp.ws, j) * zt;
            }
            off += (w_in + 1) * w_out;
        }

        // reverse over the tangent program: adjoints of (z, zdot) per layer
        let coeff = scale * 2.0 * (norm - 1.0) / norm;
        gp.dzt.clear();
        gp.dzt.resize(self.layer_widths[n_layers], 0.0);
        gp.dz.clear();
        gp.dz.resize(self.layer_widths[n_layers], 0.0);
        // output layer is linear in z: a = z (critics carry no bound), so
        // seed the tangent adjoint directly
        gp.dzt[0] = 1.0;
        gp.dz[0] = 0.0;
        let mut off_end = self.weights.len();
        for l in (0..n_layers).rev() {
            let (w_in, w_out) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let off = off_end - (w_in + 1) * w_out;
            let bias_off = off + w_in * w_out;

            // chain adjoints through this layer's nonlinearity
            if l == last {
                if self.output_bound.is_some() {
                    return Err(GaniceError::Contract(
                        "penalty expects an unbounded critic head".into(),
                    ));
                }
            } else {
                for j in 0..w_out {
                    let phi1 = self.act_prime(l, last, &gp.ws, j);
                    let phi2 = self.act_second(l, &gp.ws, j);
                    let zt = gp.tang_pre[l][j];
                    let dat = gp.dzt[j]; // adjoint of a-tangent at this layer
                    let da = gp.dz[j]; // adjoint of a at this layer
                    gp.dz[j] = phi1 * da + phi2 * zt * dat;
                    gp.dzt[j] = phi1 * dat;
                }
            }

            gp.da.clear();
            gp.da.resize(w_in, 0.0);
            gp.dat.clear();
            gp.dat.resize(w_in, 0.0);
            // workspace acts[0] holds the input, so acts[l] is always the
            // layer-l input activation
            let prev_a = &gp.ws.acts[l];
            let prev_t = &gp.tang_act[l];
            for j in 0..w_out {
                let dzj = gp.dz[j];
                let dztj = gp.dzt[j];
                grad[bias_off + j] += coeff * dzj;
                let wrow = &self.weights[off + j * w_in..off + (j + 1) * w_in];
                let grow = &mut grad[off + j * w_in..off + (j + 1) * w_in];
                for i in 0..w_in {
                    grow[i] += coeff * (dzj * prev_a[i] + dztj * prev_t[i]);
                    gp.da[i] += dzj * wrow[i];
                    gp.dat[i] += dztj * wrow[i];
                }
            }
            std::mem::swap(&mut gp.dz, &mut gp.da);
            std::mem::swap(&mut gp.dzt, &mut gp.dat);
            off_end = off;
        }
        Ok(penalty)
    }

    #[inline]
    fn act_prime(&self, l: usize, last: usize, ws: &Workspace, j: usize) -> f64 {
        if l < last {
            match self.activation {
                Activation::Tanh => {
                    let a = ws.acts[l + 1][j];
                    1.0 - a * a
                }
                Activation::Relu => {
                    if ws.pre[l][j] > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Softplus => logistic(ws.pre[l][j]),
            }
        } else {
            1.0
        }
    }

    #[inline]
    fn act_second(&self, l: usize, ws: &Workspace, j: usize) -> f64 {
        match self.activation {
            Activation::Tanh => {
                let a = ws.acts[l + 1][j];
                -2.0 * a * (1.0 - a * a)
            }
            Activation::Relu => 0.0,
            Activation::Softplus => {
                let s = logistic(ws.pre[l][j]);
                s * (1.0 - s)
            }
        }
    }
}

/// WGAN-GP penalty `(||grad_y D(y)|| - 1)^2` at an interpolated point,
/// recorded so the result is differentiable in the critic parameters.
///
/// Returns the penalty value. Use [`grad_penalty_param_grad`] for the
/// parameter gradient used by training.
pub fn grad_penalty(critic: &MlpNet, y_interp: &[f64]) -> Result<f64> {
    let (val, _) = penalty_pass(critic, y_interp, false)?;
    Ok(val)
}

/// Penalty value together with its gradient in the critic parameters
/// (double backprop through the tape).
pub fn grad_penalty_param_grad(critic: &MlpNet, y_interp: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (val, grad) = penalty_pass(critic, y_interp, true)?;
    Ok((val, grad.unwrap()))
}

fn penalty_pass(
    critic: &MlpNet,
    y_interp: &[f64],
    want_param_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if critic.activation == Activation::Relu {
        return Err(GaniceError::Unsupported(
            "gradient penalty needs a twice-differentiable activation (tanh or softplus), not relu"
                .into(),
        ));
    }
    let mut pass = critic.forward(y_interp)?;
    let root = Tape::require_scalar(&pass.outputs)?;
    let input_adj = pass.tape.backward(root, &pass.inputs);

    let mut sq_sum = pass.tape.constant(0.0);
    for g in &input_adj {
        let s = pass.tape.mul(*g, *g);
        sq_sum = pass.tape.add(sq_sum, s);
    }
    // ||grad|| = 0 exactly only for a degenerate critic; treat it as the
    // constant subgradient choice (penalty 1, zero parameter gradient).
    if pass.tape.value(sq_sum) == 0.0 {
        return Ok((1.0, want_param_grad.then(|| vec![0.0; critic.param_count()])));
    }
    let norm = pass.tape.sqrt(sq_sum);
    let one = pass.tape.constant(1.0);
    let diff = pass.tape.sub(norm, one);
    let penalty = pass.tape.mul(diff, diff);
    let val = pass.tape.value(penalty);
    if !want_param_grad {
        return Ok((val, None));
    }
    let g = pass.tape.grad(penalty, &pass.params);
    Ok((val, Some(g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng_stream;

    fn manual_forward(net: &MlpNet, input: &[f64]) -> Vec<f64> {
        // straight-line evaluation, independent of the tape
        let mut act = input.to_vec();
        let mut off = 0;
        let last = net.layer_widths.len() - 2;
        for (l, lw) in net.layer_widths.windows(2).enumerate() {
            let (w_in, w_out) = (lw[0], lw[1]);
            let mut next = vec![0.0; w_out];
            for (j, n) in next.iter_mut().enumerate() {
                let mut z = net.weights[off + w_in * w_out + j];
                for (i, a) in act.iter().enumerate() {
                    z += net.weights[off + j * w_in + i] * a;
                }
                *n = if l < last {
                    match net.activation {
                        Activation::Tanh => z.tanh(),
                        Activation::Relu => z.max(0.0),
                        Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
                    }
                } else if let Some(k) = net.output_bound {
                    k * (z / k).tanh()
                } else {
                    z
                };
            }
            act = next;
            off += (w_in + 1) * w_out;
        }
        act
    }

    #[test]
    fn zero_weight_net_outputs_zero() {
        let net = MlpNet::new(vec![3, 4, 2], Activation::Tanh, None).unwrap();
        let pass = net.forward(&[0.3, -0.7, 2.0]).unwrap();
        for v in pass.output_values() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn identity_linear_net() {
        let mut net = MlpNet::new(vec![1, 1], Activation::Tanh, None).unwrap();
        net.weights = vec![1.0, 0.0]; // weight 1, bias 0
        let pass = net.forward(&[0.7]).unwrap();
        assert_eq!(pass.output_values(), vec![0.7]);
    }

    #[test]
    fn forward_matches_independent_evaluation() {
        let mut rng = rng_stream(11, 0);
        let net =
            MlpNet::with_random_init(vec![2, 4, 1], Activation::Tanh, None, &mut rng).unwrap();
        let input = [0.1, 0.2];
        let pass = net.forward(&input).unwrap();
        let want = manual_forward(&net, &input);
        for (a, b) in pass.output_values().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn input_shape_is_checked() {
        let net = MlpNet::new(vec![3, 2], Activation::Tanh, None).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(GaniceError::Shape(_))
        ));
    }

    #[test]
    fn fast_path_matches_tape_path() {
        for act in [Activation::Tanh, Activation::Relu, Activation::Softplus] {
            let mut rng = rng_stream(5, act as u64);
            let mut net =
                MlpNet::with_random_init(vec![3, 8, 5, 1], act, Some(2.5), &mut rng).unwrap();
            // nonzero biases so every parameter matters
            for w in net.weights.iter_mut() {
                if *w == 0.0 {
                    *w = rng.random_range(-0.3..0.3);
                }
            }
            let input = [0.4, -1.1, 0.9];
            let mut pass = net.forward(&input).unwrap();
            let tape_out = pass.output_values();
            let fast_out = net.predict(&input).unwrap();
            assert!((tape_out[0] - fast_out[0]).abs() <= 1e-13 * tape_out[0].abs().max(1.0));

            let tape_gp = pass.grad(Wrt::Params).unwrap();
            let mut ws = Workspace::new();
            net.predict_ws(&input, &mut ws);
            let mut fast_gp = vec![0.0; net.param_count()];
            let mut fast_gi = vec![0.0; 3];
            net.backprop_ws(&mut ws, &[1.0], Some(&mut fast_gp), Some(&mut fast_gi));
            for (a, b) in tape_gp.iter().zip(fast_gp.iter()) {
                assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0), "{a} vs {b}");
            }
            let mut pass2 = net.forward(&input).unwrap();
            let tape_gi = pass2.grad(Wrt::Inputs).unwrap();
            for (a, b) in tape_gi.iter().zip(fast_gi.iter()) {
                assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_stream(42, 1);
        let mut net =
            MlpNet::with_random_init(vec![2, 6, 1], Activation::Tanh, None, &mut rng).unwrap();
        for w in net.weights.iter_mut() {
            *w += rng.random_range(-0.1..0.1);
        }
        let input = [0.5, -0.3];
        let mut pass = net.forward(&input).unwrap();
        let g = pass.grad(Wrt::Params).unwrap();
        let h = 1e-5;
        let mut fd = vec![0.0; net.param_count()];
        for k in 0..net.param_count() {
            let mut np = net.clone();
            np.weights[k] += h;
            let up = np.predict(&input).unwrap()[0];
            np.weights[k] -= 2.0 * h;
            let dn = np.predict(&input).unwrap()[0];
            fd[k] = (up - dn) / (2.0 * h);
        }
        let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = fd.iter().map(|b| b * b).sum();
        assert!(num.sqrt() <= 1e-4 * den.sqrt().max(1e-12));
    }

    #[test]
    fn bounded_output_respects_k0() {
        let mut rng = rng_stream(3, 9);
        let k0 = 1.7;
        let net =
            MlpNet::with_random_init(vec![4, 16, 1], Activation::Relu, Some(k0), &mut rng).unwrap();
        for trial in 0..10_000 {
            let mut r = rng_stream(trial, 77);
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-5.0..5.0)).collect();
            let y = net.predict(&x).unwrap()[0];
            assert!(y.abs() <= k0, "output {y} exceeds bound {k0}");
        }
    }

    #[test]
    fn penalty_exact_on_linear_critics() {
        // D(y) = y: unit slope, zero penalty
        let mut c = MlpNet::new(vec![1, 1], Activation::Tanh, None).unwrap();
        c.weights = vec![1.0, 0.0];
        assert_eq!(grad_penalty(&c, &[0.3]).unwrap(), 0.0);
        // D(y) = 2y: penalty (2-1)^2 = 1
        c.weights = vec![2.0, 0.0];
        assert_eq!(grad_penalty(&c, &[0.3]).unwrap(), 1.0);
    }

    #[test]
    fn penalty_rejects_relu() {
        let c = MlpNet::new(vec![1, 4, 1], Activation::Relu, None).unwrap();
        assert!(matches!(
            grad_penalty(&c, &[0.0]),
            Err(GaniceError::Unsupported(_))
        ));
    }

    #[test]
    fn fast_penalty_matches_tape_penalty() {
        for act in [Activation::Tanh, Activation::Softplus] {
            for dims in [vec![1usize, 8, 1], vec![3, 6, 5, 1]] {
                let mut rng = rng_stream(77, dims.len() as u64 + act as u64);
                let critic = MlpNet::with_random_init(dims.clone(), act, None, &mut rng).unwrap();
                let y: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (pen_tape, grad_tape) = grad_penalty_param_grad(&critic, &y).unwrap();
                let mut gp = GpWorkspace::new();
                let mut grad_fast = vec![0.0; critic.param_count()];
                let pen_fast = critic.grad_penalty_ws(&y, &mut gp, &mut grad_fast, 1.0).unwrap();
                assert!((pen_tape - pen_fast).abs() <= 1e-12 * pen_tape.abs().max(1.0));
                for (a, b) in grad_tape.iter().zip(grad_fast.iter()) {
                    assert!(
                        (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                        "tape {a} vs fast {b}"
                    );
                }
                // scale accumulates
                let mut grad2 = vec![0.0; critic.param_count()];
                critic.grad_penalty_ws(&y, &mut gp, &mut grad2, 0.5).unwrap();
                critic.grad_penalty_ws(&y, &mut gp, &mut grad2, 0.5).unwrap();
                for (a, b) in grad_fast.iter().zip(grad2.iter()) {
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn penalty_param_grad_matches_finite_differences() {
        let mut rng = rng_stream(8, 2);
        let critic =
            MlpNet::with_random_init(vec![1, 8, 1], Activation::Tanh, None, &mut rng).unwrap();
        let y = [0.37];
        let (_, g) = grad_penalty_param_grad(&critic, &y).unwrap();
        let h = 1e-5;
        let mut fd = vec![0.0; critic.param_count()];
        for k in 0..critic.param_count() {
            let mut c = critic.clone();
            c.weights[k] += h;
            let up = grad_penalty(&c, &y).unwrap();
            c.weights[k] -= 2.0 * h;
            let dn = grad_penalty(&c, &y).unwrap();
            fd[k] = (up - dn) / (2.0 * h);
        }
        let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum();
        let den: f64 = fd.iter().map(|b| b * b).sum();
        assert!(
            num.sqrt() <= 1e-3 * den.sqrt().max(1e-12),
            "rel err {}",
            num.sqrt() / den.sqrt().max(1e-12)
        );
    }
}
