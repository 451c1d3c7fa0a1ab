//! The four location-to-channel architectures.
//!
//! * `Mb`: a complex hypernetwork `2 → T1 → T2 → D` ending in the softmax
//!   gate produces coefficients `w(x)`; the output is `Σ w_i(x) ψ_i(x)` over
//!   the fixed plane-wave dictionary, times an optional global scale.
//! * `Mlp`: `2 → T1 → T2 → 1` on raw coordinates.
//! * `Rff`: `D → T1 → T2 → 1` on the Fourier features.
//! * `RffLin`: a single bias-free `D → 1` layer on the Fourier features.
//!
//! Hidden layers use `ReLU_C`. All weights are complex.

use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::checkpoint::Checkpoint;
use crate::autodiff::{CTensor, FourierFeatureBank, GateMode, Graph, NodeId, ParamId, ParamStore};
use crate::binio::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::scene::Point;

/// Rows per forward chunk in [`Model::forward_batch`].
const FORWARD_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Mb,
    Mlp,
    Rff,
    RffLin,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Mb, ModelKind::Mlp, ModelKind::Rff, ModelKind::RffLin];

    pub fn tag(self) -> u32 {
        match self {
            ModelKind::Mb => 0,
            ModelKind::Mlp => 1,
            ModelKind::Rff => 2,
            ModelKind::RffLin => 3,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mb => "mb",
            ModelKind::Mlp => "mlp",
            ModelKind::Rff => "rff",
            ModelKind::RffLin => "rff-lin",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "mb" => Some(ModelKind::Mb),
            "mlp" => Some(ModelKind::Mlp),
            "rff" => Some(ModelKind::Rff),
            "rff-lin" | "rfflin" => Some(ModelKind::RffLin),
            _ => None,
        }
    }

    pub fn uses_bank(self) -> bool {
        !matches!(self, ModelKind::Mlp)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub t1: usize,
    pub t2: usize,
    /// Dictionary size (Fourier-feature count).
    pub d: usize,
    pub gate: GateMode,
    /// Trainable global complex output scale on the MB head.
    pub output_scale: bool,
}

impl ModelSpec {
    /// Hypernetwork widths 256/128 with a 2000-atom dictionary.
    pub fn mb() -> Self {
        ModelSpec {
            kind: ModelKind::Mb,
            t1: 256,
            t2: 128,
            d: 2000,
            gate: GateMode::PhasePreserving,
            output_scale: true,
        }
    }

    /// Baseline widths 4096/2048 with a 2000-atom dictionary.
    pub fn baseline(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            t1: 4096,
            t2: 2048,
            d: 2000,
            gate: GateMode::PhasePreserving,
            output_scale: false,
        }
    }

    /// Full-size spec for `kind`.
    pub fn paper(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Mb => ModelSpec::mb(),
            other => ModelSpec::baseline(other),
        }
    }

    pub fn with_widths(mut self, t1: usize, t2: usize) -> Self {
        self.t1 = t1;
        self.t2 = t2;
        self
    }

    pub fn with_dictionary(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let needs_hidden = !matches!(self.kind, ModelKind::RffLin);
        if needs_hidden && (self.t1 == 0 || self.t2 == 0) {
            return Err(Error::BadConfig(format!("{}: hidden widths must be positive", self.kind)));
        }
        if self.kind.uses_bank() && self.d == 0 {
            return Err(Error::BadConfig(format!("{}: dictionary size must be positive", self.kind)));
        }
        Ok(())
    }

    fn layer_shapes(&self) -> Vec<(String, usize, usize, bool)> {
        let (t1, t2, d) = (self.t1, self.t2, self.d);
        match self.kind {
            ModelKind::Mb => vec![
                ("hyper.0".into(), t1, 2, true),
                ("hyper.1".into(), t2, t1, true),
                ("hyper.2".into(), d, t2, true),
            ],
            ModelKind::Mlp => vec![
                ("mlp.0".into(), t1, 2, true),
                ("mlp.1".into(), t2, t1, true),
                ("mlp.2".into(), 1, t2, true),
            ],
            ModelKind::Rff => vec![
                ("rff.0".into(), t1, d, true),
                ("rff.1".into(), t2, t1, true),
                ("rff.2".into(), 1, t2, true),
            ],
            ModelKind::RffLin => vec![("head".into(), 1, d, false)],
        }
    }

    fn has_scale(&self) -> bool {
        self.kind == ModelKind::Mb && self.output_scale
    }

    fn encode(&self, bank: Option<&FourierFeatureBank>) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64(self.t1 as u64);
        enc.u64(self.t2 as u64);
        enc.u64(self.d as u64);
        enc.u32(self.gate.tag());
        enc.u8(self.output_scale as u8);
        match bank {
            None => enc.u64(0),
            Some(bank) => {
                enc.u64(bank.len() as u64);
                for k in bank.frequencies() {
                    enc.f64(k.x);
                    enc.f64(k.y);
                }
            }
        }
        // The container carries its own checksum; drop the inner one.
        let mut bytes = enc.finish();
        bytes.truncate(bytes.len() - 4);
        bytes
    }

    fn decode(kind: ModelKind, bytes: &[u8]) -> Result<(ModelSpec, Option<FourierFeatureBank>)> {
        let mut dec = Decoder::new(bytes);
        let t1 = dec.u64("t1")? as usize;
        let t2 = dec.u64("t2")? as usize;
        let d = dec.u64("d")? as usize;
        let gate_tag = dec.u32("gate mode")?;
        let gate = GateMode::from_tag(gate_tag).ok_or_else(|| Error::Format(format!("unknown gate mode {gate_tag}")))?;
        let output_scale = dec.u8("output scale flag")? != 0;
        let n = dec.u64("bank size")?;
        dec.require(16 * n as u128, "bank")?;
        let mut ks = Vec::with_capacity(n as usize);
        for _ in 0..n {
            ks.push(Point::new(dec.f64("k_x")?, dec.f64("k_y")?));
        }
        let bank = if ks.is_empty() { None } else { Some(FourierFeatureBank::new(ks)?) };
        let spec = ModelSpec {
            kind,
            t1,
            t2,
            d,
            gate,
            output_scale,
        };
        Ok((spec, bank))
    }
}

/// Real-valued trainable parameter count; complex entries count twice and
/// the fixed Fourier frequencies are excluded.
pub fn count_parameters(spec: &ModelSpec) -> usize {
    let complex: usize = spec
        .layer_shapes()
        .iter()
        .map(|(_, out, inp, bias)| out * inp + if *bias { *out } else { 0 })
        .sum::<usize>()
        + usize::from(spec.has_scale());
    2 * complex
}

#[derive(Debug, Clone)]
struct Layer {
    weight: ParamId,
    bias: Option<ParamId>,
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    bank: Option<FourierFeatureBank>,
    params: ParamStore,
    layers: Vec<Layer>,
    scale: Option<ParamId>,
}

/// Builds `spec` with Gaussian fan-in initialisation (real and imaginary
/// parts independent, std `1/√fan_in`) and zero biases. `bank` is required
/// by every kind except `Mlp` and must hold `spec.d` atoms.
pub fn build_model(spec: &ModelSpec, bank: Option<&FourierFeatureBank>, seed: u64) -> Result<Model> {
    spec.validate()?;
    let bank = if spec.kind.uses_bank() {
        let bank = bank.ok_or_else(|| Error::BadConfig(format!("{} needs a Fourier feature bank", spec.kind)))?;
        if bank.len() != spec.d {
            return Err(Error::BadConfig(format!(
                "bank holds {} atoms, spec expects {}",
                bank.len(),
                spec.d
            )));
        }
        Some(bank.clone())
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let mut layers = Vec::new();
    for (name, out, inp, has_bias) in spec.layer_shapes() {
        let normal = Normal::new(0.0, 1.0 / (inp as f64).sqrt()).expect("positive std");
        let values = (0..out * inp)
            .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let weight = params.insert(format!("{name}.weight"), CTensor::from_vec(&[out, inp], values)?)?;
        let bias = if has_bias {
            Some(params.insert(format!("{name}.bias"), CTensor::zeros(&[out]))?)
        } else {
            None
        };
        layers.push(Layer { weight, bias });
    }
    let scale = if spec.has_scale() {
        Some(params.insert("output_scale", CTensor::vector(vec![Complex64::new(1.0, 0.0)]))?)
    } else {
        None
    };
    Ok(Model {
        spec: *spec,
        bank,
        params,
        layers,
        scale,
    })
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn bank(&self) -> Option<&FourierFeatureBank> {
        self.bank.as_ref()
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.real_count()
    }

    fn hidden_stack(&self, graph: &mut Graph, mut h: NodeId) -> Result<NodeId> {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = graph.linear(&self.params, h, layer.weight, layer.bias)?;
            if i < last {
                h = graph.relu_c(h);
            }
        }
        Ok(h)
    }

    fn bank_ref(&self) -> &FourierFeatureBank {
        self.bank.as_ref().expect("bank present for dictionary models")
    }

    /// Records the forward pass for `points` on a fresh tape; the returned
    /// node holds the `[B, 1]` predictions.
    pub fn forward_graph(&self, points: &[Point]) -> Result<(Graph, NodeId)> {
        let mut g = Graph::new();
        let out = match self.spec.kind {
            ModelKind::Mb => {
                let x = g.locations(points);
                let z = self.hidden_stack(&mut g, x)?;
                let w = g.gate(z, self.spec.gate)?;
                let psi = g.fourier_features(points, self.bank_ref());
                let h = g.dict_combine(w, psi)?;
                match self.scale {
                    Some(s) => g.scale(&self.params, h, s)?,
                    None => h,
                }
            }
            ModelKind::Mlp => {
                let x = g.locations(points);
                self.hidden_stack(&mut g, x)?
            }
            ModelKind::Rff | ModelKind::RffLin => {
                let psi = g.fourier_features(points, self.bank_ref());
                self.hidden_stack(&mut g, psi)?
            }
        };
        Ok((g, out))
    }

    /// Forward pass plus the mean squared error against `targets`.
    pub fn loss_graph(&self, points: &[Point], targets: &[Complex64]) -> Result<(Graph, NodeId)> {
        let (mut g, out) = self.forward_graph(points)?;
        let loss = g.l2_loss(out, targets)?;
        Ok((g, loss))
    }

    pub fn forward(&self, x: Point) -> Result<Complex64> {
        let (g, out) = self.forward_graph(&[x])?;
        Ok(g.value(out).values()[0])
    }

    pub fn forward_batch(&self, points: &[Point]) -> Result<Vec<Complex64>> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(FORWARD_CHUNK) {
            let (g, node) = self.forward_graph(chunk)?;
            out.extend_from_slice(g.value(node).values());
        }
        Ok(out)
    }

    /// Gate output `w(x)` of the MB hypernetwork, `[B, D]`.
    pub fn gate_coefficients(&self, points: &[Point]) -> Result<CTensor> {
        if self.spec.kind != ModelKind::Mb {
            return Err(Error::BadConfig(format!("{} has no gate", self.spec.kind)));
        }
        let mut g = Graph::new();
        let x = g.locations(points);
        let z = self.hidden_stack(&mut g, x)?;
        let w = g.gate(z, self.spec.gate)?;
        Ok(g.value(w).clone())
    }

    pub fn to_checkpoint(&self, adam: Option<crate::autodiff::AdamState>) -> Checkpoint {
        let mut params = self.params.clone();
        for p in params.iter_mut() {
            p.tensor.clear_grad();
        }
        Checkpoint {
            kind_tag: self.spec.kind.tag(),
            spec: self.spec.encode(self.bank.as_ref()),
            params,
            adam,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Model> {
        let kind = ModelKind::from_tag(ckpt.kind_tag)
            .ok_or_else(|| Error::Format(format!("unknown model kind {}", ckpt.kind_tag)))?;
        let (spec, bank) = ModelSpec::decode(kind, &ckpt.spec)?;
        let mut model = build_model(&spec, bank.as_ref(), 0).map_err(|e| Error::Format(e.to_string()))?;
        if model.params.len() != ckpt.params.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {} tensors, {} expects {}",
                ckpt.params.len(),
                kind,
                model.params.len()
            )));
        }
        for (dst, src) in model.params.iter_mut().zip(ckpt.params.iter()) {
            if dst.name != src.name || dst.tensor.shape() != src.tensor.shape() {
                return Err(Error::Format(format!(
                    "parameter {} {:?} does not match expected {} {:?}",
                    src.name,
                    src.tensor.shape(),
                    dst.name,
                    dst.tensor.shape()
                )));
            }
            dst.tensor = src.tensor.clone();
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint(None).save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        Model::from_checkpoint(&Checkpoint::load(path)?)
    }
}
