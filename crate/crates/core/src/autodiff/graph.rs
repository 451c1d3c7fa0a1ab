//! Reverse-mode tape over batched complex tensors.
//!
//! Nodes are appended in evaluation order while the forward pass runs, so the
//! tape is already topologically sorted; [`Graph::backward`] walks it in
//! reverse and accumulates parameter gradients into the [`ParamStore`]'s
//! gradient slots.

use num_complex::Complex64;

use super::bank::FourierFeatureBank;
use super::ops::{self, GateMode};
use super::params::{ParamId, ParamStore};
use super::tensor::CTensor;
use crate::error::{Error, Result};
use crate::scene::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Linear {
        input: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
    },
    ReluC(NodeId),
    Gate {
        input: NodeId,
        mode: GateMode,
    },
    DictCombine {
        coeffs: NodeId,
        atoms: NodeId,
    },
    Scale {
        input: NodeId,
        scale: ParamId,
    },
    L2Loss {
        pred: NodeId,
        target: Vec<Complex64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: CTensor,
    op: Op,
    requires_grad: bool,
}

/// Points where the graph is not differentiable: ReLU inputs (per part) and
/// gate inputs (at zero magnitude).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KinkSite {
    Relu,
    GateMagnitude,
}

#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: CTensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn requires(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn value(&self, id: NodeId) -> &CTensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant input; never receives a gradient.
    pub fn input(&mut self, value: CTensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    /// Locations as a `[B, 2]` complex batch with zero imaginary parts.
    pub fn locations(&mut self, points: &[Point]) -> NodeId {
        let values = points
            .iter()
            .flat_map(|p| [Complex64::new(p.x, 0.0), Complex64::new(p.y, 0.0)])
            .collect();
        let t = CTensor::from_vec(&[points.len(), 2], values).expect("shape");
        self.input(t)
    }

    pub fn fourier_features(&mut self, points: &[Point], bank: &FourierFeatureBank) -> NodeId {
        let t = ops::fourier_features(points, bank);
        self.input(t)
    }

    pub fn linear(
        &mut self,
        params: &ParamStore,
        input: NodeId,
        weight: ParamId,
        bias: Option<ParamId>,
    ) -> Result<NodeId> {
        let y = ops::complex_linear(
            self.value(input),
            params.get(weight),
            bias.map(|b| params.get(b)),
        )?;
        Ok(self.push(y, Op::Linear { input, weight, bias }, true))
    }

    pub fn relu_c(&mut self, input: NodeId) -> NodeId {
        let y = ops::relu_c(self.value(input));
        let rg = self.requires(input);
        self.push(y, Op::ReluC(input), rg)
    }

    pub fn gate(&mut self, input: NodeId, mode: GateMode) -> Result<NodeId> {
        let y = ops::softmax_c_gate(self.value(input), mode)?;
        let rg = self.requires(input);
        Ok(self.push(y, Op::Gate { input, mode }, rg))
    }

    pub fn dict_combine(&mut self, coeffs: NodeId, atoms: NodeId) -> Result<NodeId> {
        let y = ops::dict_combine(self.value(coeffs), self.value(atoms))?;
        let rg = self.requires(coeffs) || self.requires(atoms);
        Ok(self.push(y, Op::DictCombine { coeffs, atoms }, rg))
    }

    /// Multiplies every entry by the scalar parameter `scale` (shape `[1]`).
    pub fn scale(&mut self, params: &ParamStore, input: NodeId, scale: ParamId) -> Result<NodeId> {
        let s = params.get(scale);
        if s.len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "scale parameter must hold one entry, has {}",
                s.len()
            )));
        }
        let s = s.values()[0];
        let x = self.value(input);
        let values = x.values().iter().map(|v| v * s).collect();
        let y = CTensor::from_vec(x.shape(), values)?;
        Ok(self.push(y, Op::Scale { input, scale }, true))
    }

    /// Mean squared modulus error against `target`, as a `[1]` real scalar.
    pub fn l2_loss(&mut self, pred: NodeId, target: &[Complex64]) -> Result<NodeId> {
        let loss = crate::train::l2_loss(self.value(pred).values(), target)?;
        let rg = self.requires(pred);
        Ok(self.push(
            CTensor::vector(vec![Complex64::new(loss, 0.0)]),
            Op::L2Loss {
                pred,
                target: target.to_vec(),
            },
            rg,
        ))
    }

    /// Values at every non-differentiable site, in tape order.
    pub fn kink_sites(&self) -> Vec<(KinkSite, &[Complex64])> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::ReluC(input) => Some((KinkSite::Relu, self.value(input).values())),
                Op::Gate { input, .. } => Some((KinkSite::GateMagnitude, self.value(input).values())),
                _ => None,
            })
            .collect()
    }

    /// Back-propagates from the scalar `loss`, adding into parameter gradients.
    pub fn backward(&self, loss: NodeId, params: &mut ParamStore) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<Complex64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![Complex64::new(1.0, 0.0)]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.op {
                Op::Leaf => {}
                Op::Linear { input, weight, bias } => {
                    let x = self.value(*input);
                    let (rows, n) = x.rows_cols();
                    let m = node.value.rows_cols().1;
                    ops::linear_backward_weight(&g, x.values(), rows, n, m, params.get_mut(*weight).grad_mut());
                    if let Some(b) = bias {
                        ops::linear_backward_bias(&g, rows, m, params.get_mut(*b).grad_mut());
                    }
                    if self.requires(*input) {
                        let gx = ops::linear_backward_input(&g, params.get(*weight).values(), rows, n, m);
                        accumulate(&mut grads[input.0], gx);
                    }
                }
                Op::ReluC(input) => {
                    let gx = ops::relu_c_backward(self.value(*input).values(), &g);
                    accumulate(&mut grads[input.0], gx);
                }
                Op::Gate { input, mode } => {
                    let z = self.value(*input);
                    let d = z.rows_cols().1;
                    let gx = ops::softmax_c_gate_backward(z.values(), &g, d, *mode);
                    accumulate(&mut grads[input.0], gx);
                }
                Op::DictCombine { coeffs, atoms } => {
                    let d = self.value(*coeffs).rows_cols().1;
                    if self.requires(*coeffs) {
                        let gw = ops::dict_combine_backward_coeffs(&g, self.value(*atoms).values(), d);
                        accumulate(&mut grads[coeffs.0], gw);
                    }
                    if self.requires(*atoms) {
                        let gpsi = ops::dict_combine_backward_atoms(&g, self.value(*coeffs).values(), d);
                        accumulate(&mut grads[atoms.0], gpsi);
                    }
                }
                Op::Scale { input, scale } => {
                    let u = self.value(*input).values();
                    let s = params.get(*scale).values()[0];
                    let gs: Complex64 = g.iter().zip(u).map(|(gy, uy)| gy * uy.conj()).sum();
                    params.get_mut(*scale).grad_mut()[0] += gs;
                    if self.requires(*input) {
                        let gu = g.iter().map(|gy| s.conj() * gy).collect();
                        accumulate(&mut grads[input.0], gu);
                    }
                }
                Op::L2Loss { pred, target } => {
                    let y = self.value(*pred).values();
                    let factor = 2.0 * g[0].re / y.len() as f64;
                    let gy = y.iter().zip(target).map(|(a, b)| (a - b) * factor).collect();
                    accumulate(&mut grads[pred.0], gy);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(slot: &mut Option<Vec<Complex64>>, g: Vec<Complex64>) {
    match slot {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(g) {
                *e += v;
            }
        }
        None => *slot = Some(g),
    }
}
