//! Feed-forward ReLU networks as quasi-homogeneous maps.
//!
//! A network `N(x) = sigma_L(W_L ... sigma_1(W_1 x + b_1) ... + b_L)` with
//! ReLU-family activations is positively homogeneous up to the bias
//! contributions. Writing the activation as a gate matrix,
//! `sigma(p) = M_{g(p)} p`, the map
//!
//! ```text
//! Q(x) = M_{g_L} W_L ... M_{g_1} W_1        (gates frozen at x itself)
//! ```
//!
//! is the quasi-derivative of `N` at `x`: a linear operator with
//! `N(x) = Q(x) x + rem(x)` where the remainder collects the gated biases
//! and obeys `||rem(x)|| <= prod_l max(1, ||W_l||) * sum_l ||b_l||`
//! uniformly in `x`. With zero biases the remainder vanishes identically,
//! and this module is careful to make that exact in floating point: the
//! factored application of `Q` reuses the same matrix-vector products and
//! gate selections as the forward pass.
//!
//! Gate convention: `g(t) = 0` for `t <= 0` and `1` for `t > 0` (for the
//! parametric variant, slope `a` in place of `0`).

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::operator::LinearForwardOperator;
use crate::regularizers::Regularizer;
use crate::rng::Prng;
use crate::vector::RealVector;
use serde::{Deserialize, Serialize};

/// Activation nonlinearity applied componentwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    /// Leaky variant with slope `a` in `[0, 1)` on the closed negative axis.
    ParametricRelu(f64),
}

impl Activation {
    fn validate(self) -> Result<Self> {
        if let Activation::ParametricRelu(a) = self {
            if !(0.0..1.0).contains(&a) {
                return Err(Error::param(
                    "activation",
                    format!("parametric relu slope must lie in [0, 1), got {a}"),
                ));
            }
        }
        Ok(self)
    }

    /// Forward value. Written as a branch, not `max`, so the `t <= 0` side
    /// produces the literal constant `0.0` that the gate path also uses.
    fn forward(self, t: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t > 0.0 {
                    t
                } else {
                    0.0
                }
            }
            Activation::ParametricRelu(a) => {
                if t > 0.0 {
                    t
                } else {
                    a * t
                }
            }
        }
    }

    /// Gate factor `g(t)`.
    fn gate(self, t: f64) -> f64 {
        match self {
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::ParametricRelu(a) => {
                if t > 0.0 {
                    1.0
                } else {
                    a
                }
            }
        }
    }

    /// Applies the gate at preactivation `pre` to a carried value `v`,
    /// using selection rather than multiplication where the factor is 0 or
    /// 1. This keeps the factored quasi-derivative bit-identical to the
    /// forward pass on the zero-bias diagonal.
    fn gate_apply(self, pre: f64, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    v
                } else {
                    0.0
                }
            }
            Activation::ParametricRelu(a) => {
                if pre > 0.0 {
                    v
                } else {
                    a * v
                }
            }
        }
    }
}

/// One affine layer with its activation.
#[derive(Clone, Debug)]
pub struct Layer {
    weight: DenseMatrix,
    bias: RealVector,
    activation: Activation,
}

impl Layer {
    pub fn new(weight: DenseMatrix, bias: RealVector, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::dim("layer bias", weight.rows(), bias.len()));
        }
        let activation = activation.validate()?;
        Ok(Layer {
            weight,
            bias,
            activation,
        })
    }

    pub fn weight(&self) -> &DenseMatrix {
        &self.weight
    }

    pub fn bias(&self) -> &RealVector {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }
}

/// A validated stack of layers.
#[derive(Clone, Debug)]
pub struct QuasiHomNetwork {
    layers: Vec<Layer>,
}

impl QuasiHomNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::param("layers", "network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[1].weight.cols() != pair[0].weight.rows() {
                return Err(Error::dim(
                    "layer chain",
                    pair[0].weight.rows(),
                    pair[1].weight.cols(),
                ));
            }
        }
        Ok(QuasiHomNetwork { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// True when every bias is exactly zero.
    pub fn has_zero_bias(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.bias.iter().all(|&b| b == 0.0))
    }

    fn check_input(&self, x: &RealVector) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), x.len()));
        }
        Ok(())
    }

    /// Forward pass returning the output and every preactivation vector.
    /// The bias is added after the matrix product, never fused into it, so
    /// zero biases change nothing at the bit level.
    fn forward_trace(&self, x: &RealVector) -> Result<(RealVector, Vec<Vec<f64>>)> {
        self.check_input(x)?;
        let mut value = x.to_vec();
        let mut preacts = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut pre = layer.weight.matvec(&value);
            for (p, b) in pre.iter_mut().zip(layer.bias.iter()) {
                *p += b;
            }
            value = pre
                .iter()
                .map(|&p| layer.activation.forward(p))
                .collect();
            preacts.push(pre);
        }
        let out = RealVector::new(value).map_err(|_| Error::NonFinite("network forward"))?;
        Ok((out, preacts))
    }

    /// `N(x)`.
    pub fn forward(&self, x: &RealVector) -> Result<RealVector> {
        Ok(self.forward_trace(x)?.0)
    }

    /// Applies the quasi-derivative at `x` to `v` in factored form, one
    /// gated layer at a time.
    pub fn quasi_derivative_apply(&self, x: &RealVector, v: &RealVector) -> Result<RealVector> {
        self.check_input(v)?;
        let (_, preacts) = self.forward_trace(x)?;
        let mut carried = v.to_vec();
        for (layer, pre) in self.layers.iter().zip(&preacts) {
            let prod = layer.weight.matvec(&carried);
            carried = prod
                .iter()
                .zip(pre)
                .map(|(&pv, &p)| layer.activation.gate_apply(p, pv))
                .collect();
        }
        RealVector::new(carried).map_err(|_| Error::NonFinite("quasi derivative apply"))
    }

    /// Applies the adjoint of the quasi-derivative at `x` to `v`.
    pub fn quasi_derivative_adjoint_apply(
        &self,
        x: &RealVector,
        v: &RealVector,
    ) -> Result<RealVector> {
        if v.len() != self.output_dim() {
            return Err(Error::dim("network adjoint input", self.output_dim(), v.len()));
        }
        let (_, preacts) = self.forward_trace(x)?;
        let mut carried = v.to_vec();
        for (layer, pre) in self.layers.iter().zip(&preacts).rev() {
            let gated: Vec<f64> = carried
                .iter()
                .zip(pre)
                .map(|(&cv, &p)| layer.activation.gate_apply(p, cv))
                .collect();
            carried = layer.weight.matvec_transpose(&gated);
        }
        RealVector::new(carried).map_err(|_| Error::NonFinite("quasi derivative adjoint"))
    }

    /// Materializes the quasi-derivative at `x` as a dense operator.
    ///
    /// The factored application and this matrix agree up to rounding in the
    /// different summation orders; exactness claims (zero-bias remainder)
    /// refer to the factored path.
    pub fn quasi_derivative(&self, x: &RealVector) -> Result<LinearForwardOperator> {
        let (_, preacts) = self.forward_trace(x)?;
        let mut acc: Option<DenseMatrix> = None;
        for (layer, pre) in self.layers.iter().zip(&preacts) {
            let mut m = match acc {
                None => layer.weight.clone(),
                Some(prev) => layer.weight.matmul(&prev),
            };
            for (i, &p) in pre.iter().enumerate() {
                let g = layer.activation.gate(p);
                if g == 1.0 {
                    continue;
                }
                for j in 0..m.cols() {
                    let v = if g == 0.0 { 0.0 } else { g * m.at(i, j) };
                    m.set(i, j, v);
                }
            }
            acc = Some(m);
        }
        Ok(LinearForwardOperator::dense(acc.unwrap()))
    }

    /// `||N(x) - Q(x) x||`, the quasi-homogeneity defect at `x`, computed
    /// through the factored application.
    pub fn quasi_remainder(&self, x: &RealVector) -> Result<f64> {
        let fwd = self.forward(x)?;
        let lin = self.quasi_derivative_apply(x, x)?;
        Ok(fwd.sub(&lin).norm())
    }

    /// Uniform remainder bound `prod_l max(1, ||W_l||) * sum_l ||b_l||`.
    ///
    /// The sharper per-layer form `sum_l (prod_{j>l} ||W_j||) ||b_l||`
    /// follows from the remainder recursion; this product form dominates it
    /// and is what the audits pin.
    pub fn remainder_norm_bound(&self) -> f64 {
        let mut prod = 1.0;
        let mut bias_sum = 0.0;
        for layer in &self.layers {
            prod *= layer.weight.operator_norm().max(1.0);
            bias_sum += layer.bias.norm();
        }
        prod * bias_sum
    }

    /// Serializes to the versioned JSON weights format.
    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            format: 1,
            layers: self
                .layers
                .iter()
                .map(|l| LayerSpec {
                    weight: (0..l.weight.rows())
                        .map(|i| l.weight.row(i).to_vec())
                        .collect(),
                    bias: l.bias.to_vec(),
                    activation: match l.activation {
                        Activation::Relu => ActivationSpec::Relu,
                        Activation::ParametricRelu(a) => ActivationSpec::Prelu(a),
                    },
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("network serialization cannot fail")
    }

    /// Parses the JSON weights format, validating the version marker, the
    /// layer dimension chain, and activation parameters.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Malformed {
            what: "network weights json".into(),
            detail: e.to_string(),
        })?;
        if file.format != 1 {
            return Err(Error::Malformed {
                what: "network weights json".into(),
                detail: format!("unsupported format version {}", file.format),
            });
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for spec in file.layers {
            let weight = DenseMatrix::from_rows(spec.weight)?;
            let bias = RealVector::new(spec.bias)?;
            let activation = match spec.activation {
                ActivationSpec::Relu => Activation::Relu,
                ActivationSpec::Prelu(a) => Activation::ParametricRelu(a),
            };
            layers.push(Layer::new(weight, bias, activation)?);
        }
        QuasiHomNetwork::new(layers)
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format: u32,
    layers: Vec<LayerSpec>,
}

#[derive(Serialize, Deserialize)]
struct LayerSpec {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
    #[serde(rename = "activation")]
    activation: ActivationSpec,
}

#[derive(Serialize, Deserialize)]
enum ActivationSpec {
    #[serde(rename = "relu")]
    Relu,
    #[serde(rename = "prelu")]
    Prelu(f64),
}

/// Draws a random network with the given layer dimensions, weights scaled
/// by `1/sqrt(fan_in)`. `bias_scale = 0` gives an exactly homogeneous map.
pub fn random_network(
    seed: u64,
    dims: &[usize],
    activation: Activation,
    bias_scale: f64,
) -> Result<QuasiHomNetwork> {
    if dims.len() < 2 {
        return Err(Error::param("dims", "need input and output dimensions"));
    }
    let mut rng = Prng::new(seed);
    let mut layers = Vec::new();
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let weight = DenseMatrix::from_fn(fan_out, fan_in, |_, _| {
            rng.next_uniform_symmetric(1.0) * scale
        });
        let bias = if bias_scale == 0.0 {
            RealVector::zeros(fan_out)
        } else {
            RealVector::from_fn(fan_out, |_| rng.next_uniform_symmetric(bias_scale))
        };
        layers.push(Layer::new(weight, bias, activation)?);
    }
    QuasiHomNetwork::new(layers)
}

/// The composite penalty `x -> ||N(x)||^2 / 2`.
///
/// Its relative subgradient is the chain-rule selection
/// `Q(x)^* N(x)` with `Q` the quasi-derivative; no bound function is
/// evaluated for networks.
#[derive(Clone, Debug)]
pub struct NetworkRegularizer {
    net: QuasiHomNetwork,
}

impl NetworkRegularizer {
    pub fn new(net: QuasiHomNetwork) -> Self {
        NetworkRegularizer { net }
    }

    pub fn network(&self) -> &QuasiHomNetwork {
        &self.net
    }
}

impl Regularizer for NetworkRegularizer {
    fn value(&self, x: &RealVector) -> f64 {
        let out = self
            .net
            .forward(x)
            .expect("network regularizer: dimension mismatch");
        0.5 * out.dot(&out)
    }

    fn rel_subgradient(&self, x: &RealVector) -> RealVector {
        let out = self
            .net
            .forward(x)
            .expect("network regularizer: dimension mismatch");
        self.net
            .quasi_derivative_adjoint_apply(x, &out)
            .expect("network regularizer: dimension mismatch")
    }
}
