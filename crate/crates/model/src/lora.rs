//! Low-rank adapters on a frozen projection.

use rand::Rng;

use crate::autograd::Mat;
use crate::params::normal;
use crate::ModelError;

/// `A: r × d_out`, `B: d_in × r`; the effective weight is `W + scale·B·A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub a: Mat,
    pub b: Mat,
    pub scale: f64,
}

impl LoraAdapter {
    /// Random `A`, zero `B`: the initial delta is exactly zero.
    pub fn init(rng: &mut impl Rng, d_in: usize, d_out: usize, rank: usize, scale: f64) -> Self {
        Self {
            a: normal(rng, rank, d_out, 1.0 / (d_out as f64).sqrt()),
            b: Mat::zeros((d_in, rank)),
            scale,
        }
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    /// `scale·B·A`, materialised.
    pub fn dense_delta(&self) -> Mat {
        self.b.dot(&self.a) * self.scale
    }

    fn check(&self, w: &Mat, x: &Mat) -> Result<(), ModelError> {
        let (d_in, d_out) = w.dim();
        let ok = x.ncols() == d_in
            && self.b.dim() == (d_in, self.rank())
            && self.a.ncols() == d_out;
        if ok {
            Ok(())
        } else {
            Err(ModelError::DimensionError(format!(
                "x {:?}, W {:?}, A {:?}, B {:?}",
                x.dim(),
                w.dim(),
                self.a.dim(),
                self.b.dim()
            )))
        }
    }
}

/// `x·W + scale·(x·B)·A` for each row of `x`.
pub fn lora_apply(w: &Mat, adapter: &LoraAdapter, x: &Mat) -> Result<Mat, ModelError> {
    adapter.check(w, x)?;
    let low = x.dot(&adapter.b).dot(&adapter.a) * adapter.scale;
    Ok(x.dot(w) + low)
}

/// `x·(W + scale·B·A)`.
pub fn lora_apply_dense(w: &Mat, adapter: &LoraAdapter, x: &Mat) -> Result<Mat, ModelError> {
    adapter.check(w, x)?;
    Ok(x.dot(&(w + &adapter.dense_delta())))
}
