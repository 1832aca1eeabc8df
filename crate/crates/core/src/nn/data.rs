use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "eval" => Some(Split::Eval),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// One real vector per example (rows).
    Regression(DenseMatrix),
    /// One class index per example.
    Classes(Vec<usize>),
}

/// Inputs are the rows of `inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: DenseMatrix,
    pub targets: Targets,
    pub split: Split,
}

impl Dataset {
    pub fn new(inputs: DenseMatrix, targets: Targets, split: Split) -> Result<Self> {
        inputs.check_finite("dataset inputs")?;
        let n = inputs.rows();
        let t = match &targets {
            Targets::Regression(m) => {
                m.check_finite("dataset targets")?;
                m.rows()
            }
            Targets::Classes(c) => c.len(),
        };
        if t != n {
            return Err(Error::InvalidArgument(format!(
                "{n} inputs but {t} targets"
            )));
        }
        Ok(Self {
            inputs,
            targets,
            split,
        })
    }

    pub fn regression(inputs: DenseMatrix, targets: DenseMatrix, split: Split) -> Result<Self> {
        Self::new(inputs, Targets::Regression(targets), split)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.inputs.cols();
        let mut x = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            x.extend_from_slice(self.inputs.row(i));
        }
        let targets = match &self.targets {
            Targets::Regression(t) => {
                let w = t.cols();
                let mut y = Vec::with_capacity(indices.len() * w);
                for &i in indices {
                    y.extend_from_slice(t.row(i));
                }
                Targets::Regression(DenseMatrix::from_vec(indices.len(), w, y))
            }
            Targets::Classes(c) => Targets::Classes(indices.iter().map(|&i| c[i]).collect()),
        };
        Dataset {
            inputs: DenseMatrix::from_vec(indices.len(), d, x),
            targets,
            split: self.split,
        }
    }

    /// Contiguous examples `start..end`.
    pub fn range(&self, start: usize, end: usize) -> Dataset {
        let idx: Vec<usize> = (start..end).collect();
        self.subset(&idx)
    }

    /// The dataset with every example repeated `times` times back to back.
    pub fn repeated(&self, times: usize) -> Dataset {
        let idx: Vec<usize> = (0..times).flat_map(|_| 0..self.len()).collect();
        self.subset(&idx)
    }
}
