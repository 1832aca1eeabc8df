use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Pointwise nonlinearity applied after a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Activation::Identity),
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// `z = x·W + b` with `W: N×M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub name: String,
    pub weight: DenseMatrix,
    pub bias: Option<Vec<f64>>,
}

/// `z = x·A·B + b` with `A: N×r`, `B: r×M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedLinear {
    pub name: String,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub bias: Option<Vec<f64>>,
}

impl LinearLayer {
    pub fn new(name: impl Into<String>, weight: DenseMatrix, bias: Option<Vec<f64>>) -> Result<Self> {
        let layer = Self {
            name: name.into(),
            weight,
            bias,
        };
        layer.validate()?;
        Ok(layer)
    }

    fn validate(&self) -> Result<()> {
        self.weight.check_finite(&format!("{}.weight", self.name))?;
        check_bias(&self.name, self.bias.as_deref(), self.weight.cols())
    }
}

impl FactorizedLinear {
    pub fn new(
        name: impl Into<String>,
        a: DenseMatrix,
        b: DenseMatrix,
        bias: Option<Vec<f64>>,
    ) -> Result<Self> {
        let name = name.into();
        if a.cols() != b.rows() {
            return Err(Error::layer(
                &name,
                format!("inner ranks disagree: A is {:?}, B is {:?}", a.shape(), b.shape()),
            ));
        }
        a.check_finite(&format!("{name}.a"))?;
        b.check_finite(&format!("{name}.b"))?;
        check_bias(&name, bias.as_deref(), b.cols())?;
        Ok(Self { name, a, b, bias })
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    /// The dense matrix `A·B` this layer stands in for.
    pub fn product(&self) -> DenseMatrix {
        self.a.matmul(&self.b)
    }
}

fn check_bias(name: &str, bias: Option<&[f64]>, width: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.len() != width {
            return Err(Error::layer(
                name,
                format!("bias has {} entries for {width} outputs", b.len()),
            ));
        }
        if let Some(j) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("{name}.bias"),
                row: 0,
                col: j,
                value: b[j],
            });
        }
    }
    Ok(())
}

/// A layer slot in a model: dense or factorized.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(LinearLayer),
    Factorized(FactorizedLinear),
}

impl Layer {
    pub fn name(&self) -> &str {
        match self {
            Layer::Dense(l) => &l.name,
            Layer::Factorized(l) => &l.name,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Dense(l) => l.weight.rows(),
            Layer::Factorized(l) => l.a.rows(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Layer::Dense(l) => l.weight.cols(),
            Layer::Factorized(l) => l.b.cols(),
        }
    }

    pub fn bias(&self) -> Option<&[f64]> {
        match self {
            Layer::Dense(l) => l.bias.as_deref(),
            Layer::Factorized(l) => l.bias.as_deref(),
        }
    }

    pub fn bias_mut(&mut self) -> Option<&mut Vec<f64>> {
        match self {
            Layer::Dense(l) => l.bias.as_mut(),
            Layer::Factorized(l) => l.bias.as_mut(),
        }
    }

    /// Weight parameters plus bias.
    pub fn param_count(&self) -> usize {
        let weights = match self {
            Layer::Dense(l) => l.weight.rows() * l.weight.cols(),
            Layer::Factorized(l) => l.a.rows() * l.a.cols() + l.b.rows() * l.b.cols(),
        };
        weights + self.bias().map_or(0, <[f64]>::len)
    }

    /// The effective `N×M` weight: `W` itself or `A·B`.
    pub fn effective_weight(&self) -> DenseMatrix {
        match self {
            Layer::Dense(l) => l.weight.clone(),
            Layer::Factorized(l) => l.product(),
        }
    }

    /// Pre-activation `x·W + b` for a batch of rows.
    pub fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut z = match self {
            Layer::Dense(l) => x.matmul(&l.weight),
            Layer::Factorized(l) => x.matmul(&l.a).matmul(&l.b),
        };
        if let Some(b) = self.bias() {
            for i in 0..z.rows() {
                z.row_mut(i).iter_mut().zip(b).for_each(|(v, bj)| *v += bj);
            }
        }
        z
    }
}
