//! Append-only scalar operation tape with reverse-mode differentiation.
//!
//! The reverse sweep emits its adjoint arithmetic as new tape nodes, so the
//! gradient of any recorded scalar is itself a tape value and can be
//! differentiated again. That is what makes the gradient penalty trainable:
//! its parameter gradient is an ordinary second reverse sweep.

use crate::error::{GaniceError, Result};

/// Handle to a scalar value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub u32);

#[derive(Debug, Clone, Copy)]
enum Op {
    /// Externally supplied value (input or parameter).
    Leaf,
    Const,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    /// Multiply by a compile-time constant factor.
    Scale(u32, f64),
    Tanh(u32),
    Sigmoid(u32),
    Softplus(u32),
    Relu(u32),
    Abs(u32),
    Sqrt(u32),
    Exp(u32),
    Ln(u32),
    /// Heaviside step; derivative identically zero.
    Step(u32),
    /// Sign; derivative identically zero.
    Sign(u32),
}

/// Record of a scalar computation. Nodes are in topological order by
/// construction: parents always precede children.
#[derive(Debug, Default)]
pub struct Tape {
    ops: Vec<Op>,
    vals: Vec<f64>,
    adj_scratch: Vec<u32>,
}

const NO_ADJ: u32 = u32::MAX;

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            ops: Vec::with_capacity(n),
            vals: Vec::with_capacity(n),
            adj_scratch: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Drop all nodes but keep allocations for reuse.
    pub fn clear(&mut self) {
        self.ops.clear();
        self.vals.clear();
    }

    pub fn value(&self, v: Var) -> f64 {
        self.vals[v.0 as usize]
    }

    #[inline]
    fn push(&mut self, op: Op, val: f64) -> Var {
        let id = self.ops.len() as u32;
        self.ops.push(op);
        self.vals.push(val);
        Var(id)
    }

    pub fn leaf(&mut self, val: f64) -> Var {
        self.push(Op::Leaf, val)
    }

    pub fn constant(&mut self, val: f64) -> Var {
        self.push(Op::Const, val)
    }

    #[inline]
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0 as usize] + self.vals[b.0 as usize];
        self.push(Op::Add(a.0, b.0), v)
    }

    #[inline]
    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0 as usize] - self.vals[b.0 as usize];
        self.push(Op::Sub(a.0, b.0), v)
    }

    #[inline]
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0 as usize] * self.vals[b.0 as usize];
        self.push(Op::Mul(a.0, b.0), v)
    }

    #[inline]
    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0 as usize] / self.vals[b.0 as usize];
        self.push(Op::Div(a.0, b.0), v)
    }

    #[inline]
    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.vals[a.0 as usize];
        self.push(Op::Neg(a.0), v)
    }

    #[inline]
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = c * self.vals[a.0 as usize];
        self.push(Op::Scale(a.0, c), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.vals[a.0 as usize].tanh();
        self.push(Op::Tanh(a.0), v)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = crate::numeric::logistic(self.vals[a.0 as usize]);
        self.push(Op::Sigmoid(a.0), v)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let x = self.vals[a.0 as usize];
        // max(x,0) + ln(1+exp(-|x|)), stable for large |x|
        let v = x.max(0.0) + (-x.abs()).exp().ln_1p();
        self.push(Op::Softplus(a.0), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.vals[a.0 as usize].max(0.0);
        self.push(Op::Relu(a.0), v)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.vals[a.0 as usize].abs();
        self.push(Op::Abs(a.0), v)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.vals[a.0 as usize].sqrt();
        self.push(Op::Sqrt(a.0), v)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.vals[a.0 as usize].exp();
        self.push(Op::Exp(a.0), v)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.vals[a.0 as usize].ln();
        self.push(Op::Ln(a.0), v)
    }

    fn step_fn(&mut self, a: Var) -> Var {
        let v = if self.vals[a.0 as usize] > 0.0 { 1.0 } else { 0.0 };
        self.push(Op::Step(a.0), v)
    }

    fn sign_fn(&mut self, a: Var) -> Var {
        let x = self.vals[a.0 as usize];
        let v = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.push(Op::Sign(a.0), v)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    /// Recompute every node from its parents. Yields bit-identical values;
    /// leaves and constants keep their stored value.
    pub fn replay(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vals.len()];
        for (i, op) in self.ops.iter().enumerate() {
            let v = |j: u32| out[j as usize];
            out[i] = match *op {
                Op::Leaf | Op::Const => self.vals[i],
                Op::Add(a, b) => v(a) + v(b),
                Op::Sub(a, b) => v(a) - v(b),
                Op::Mul(a, b) => v(a) * v(b),
                Op::Div(a, b) => v(a) / v(b),
                Op::Neg(a) => -v(a),
                Op::Scale(a, c) => c * v(a),
                Op::Tanh(a) => v(a).tanh(),
                Op::Sigmoid(a) => crate::numeric::logistic(v(a)),
                Op::Softplus(a) => v(a).max(0.0) + (-v(a).abs()).exp().ln_1p(),
                Op::Relu(a) => v(a).max(0.0),
                Op::Abs(a) => v(a).abs(),
                Op::Sqrt(a) => v(a).sqrt(),
                Op::Exp(a) => v(a).exp(),
                Op::Ln(a) => v(a).ln(),
                Op::Step(a) => {
                    if v(a) > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Op::Sign(a) => {
                    if v(a) > 0.0 {
                        1.0
                    } else if v(a) < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        out
    }

    /// Reverse sweep from a scalar root. Returns one adjoint `Var` per entry
    /// of `wrt` (a fresh zero constant where the root does not depend on it).
    /// The adjoints are tape values, so they can be differentiated again.
    pub fn backward(&mut self, root: Var, wrt: &[Var]) -> Vec<Var> {
        let n = root.0 as usize + 1;
        let mut adj = std::mem::take(&mut self.adj_scratch);
        adj.clear();
        adj.resize(n, NO_ADJ);

        let one = self.constant(1.0);
        adj[root.0 as usize] = one.0;

        for i in (0..n).rev() {
            let g = adj[i];
            if g == NO_ADJ {
                continue;
            }
            let g = Var(g);
            match self.ops[i] {
                Op::Leaf | Op::Const => {}
                Op::Add(a, b) => {
                    Self::accumulate(self, &mut adj, a, g);
                    Self::accumulate(self, &mut adj, b, g);
                }
                Op::Sub(a, b) => {
                    Self::accumulate(self, &mut adj, a, g);
                    let ng = self.neg(g);
                    Self::accumulate(self, &mut adj, b, ng);
                }
                Op::Mul(a, b) => {
                    let ga = self.mul(g, Var(b));
                    Self::accumulate(self, &mut adj, a, ga);
                    let gb = self.mul(g, Var(a));
                    Self::accumulate(self, &mut adj, b, gb);
                }
                Op::Div(a, b) => {
                    let ga = self.div(g, Var(b));
                    Self::accumulate(self, &mut adj, a, ga);
                    let t = self.mul(g, Var(i as u32));
                    let t = self.div(t, Var(b));
                    let gb = self.neg(t);
                    Self::accumulate(self, &mut adj, b, gb);
                }
                Op::Neg(a) => {
                    let ga = self.neg(g);
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Scale(a, c) => {
                    let ga = self.scale(g, c);
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Tanh(a) => {
                    // d tanh = 1 - tanh^2, reusing the node's own value
                    let sq = self.mul(Var(i as u32), Var(i as u32));
                    let t = self.mul(g, sq);
                    let ga = self.sub(g, t);
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Sigmoid(a) => {
                    let node = Var(i as u32);
                    let sq = self.mul(node, node);
                    let d = self.sub(node, sq);
                    let ga = self.mul(g, d);
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Softplus(a) => {
                    let s = self.sigmoid(Var(a));
                    let ga = self.mul(g, s);
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Relu(a) => {
                    let s = self.step_fn(Var(a));
                    let ga = self.mul(g, s);
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Abs(a) => {
                    let s = self.sign_fn(Var(a));
                    let ga = self.mul(g, s);
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Sqrt(a) => {
                    let t = self.div(g, Var(i as u32));
                    let ga = self.scale(t, 0.5);
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Exp(a) => {
                    let ga = self.mul(g, Var(i as u32));
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Ln(a) => {
                    let ga = self.div(g, Var(a));
                    Self::accumulate(self, &mut adj, a, ga);
                }
                Op::Step(_) | Op::Sign(_) => {}
            }
        }

        let out = wrt
            .iter()
            .map(|w| {
                let slot = adj.get(w.0 as usize).copied().unwrap_or(NO_ADJ);
                if slot == NO_ADJ {
                    self.constant(0.0)
                } else {
                    Var(slot)
                }
            })
            .collect();
        self.adj_scratch = adj;
        out
    }

    #[inline]
    fn accumulate(tape: &mut Tape, adj: &mut [u32], parent: u32, g: Var) {
        let slot = adj[parent as usize];
        if slot == NO_ADJ {
            adj[parent as usize] = g.0;
        } else {
            let s = tape.add(Var(slot), g);
            adj[parent as usize] = s.0;
        }
    }

    /// Gradient values of a scalar root with respect to `wrt`.
    pub fn grad(&mut self, root: Var, wrt: &[Var]) -> Vec<f64> {
        let adj = self.backward(root, wrt);
        adj.into_iter().map(|v| self.value(v)).collect()
    }

    /// Guard used by the public gradient entry points: reverse mode is only
    /// defined from a scalar root.
    pub fn require_scalar(outputs: &[Var]) -> Result<Var> {
        if outputs.len() != 1 {
            return Err(GaniceError::Contract(format!(
                "reverse sweep needs a scalar root, got {} outputs",
                outputs.len()
            )));
        }
        Ok(outputs[0])
    }
}
