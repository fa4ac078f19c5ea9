//! Control inputs: DG-represented controls and closed-form callables.

use std::fmt;
use std::sync::Arc;

use crate::basis::ReferenceBasis;
use crate::error::{Error, Result};
use crate::mesh::{DGFunction, Partition, QuadField, Side};

type ControlFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A control `t ↦ u(t) ∈ ℝ^m`.
#[derive(Clone)]
pub enum ControlFunction {
    Dg(DGFunction),
    Closed { dim: usize, f: ControlFn },
}

impl fmt::Debug for ControlFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dg(g) => f.debug_tuple("Dg").field(g).finish(),
            Self::Closed { dim, .. } => f.debug_struct("Closed").field("dim", dim).finish_non_exhaustive(),
        }
    }
}

impl From<DGFunction> for ControlFunction {
    fn from(f: DGFunction) -> Self {
        Self::Dg(f)
    }
}

impl ControlFunction {
    pub fn closed<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::Closed { dim, f: Arc::new(f) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dg(g) => g.dim(),
            Self::Closed { dim, .. } => *dim,
        }
    }

    pub fn as_dg(&self) -> Option<&DGFunction> {
        match self {
            Self::Dg(g) => Some(g),
            Self::Closed { .. } => None,
        }
    }

    /// Pointwise value; DG controls use the right limit at nodes.
    pub fn value(&self, t: f64) -> Result<Vec<f64>> {
        match self {
            Self::Dg(g) => g.eval(t, Side::Right),
            Self::Closed { f, .. } => Ok(f(t)),
        }
    }

    /// Values at the quadrature points of `basis` on `partition`.
    pub fn sample(&self, partition: &Partition, basis: &ReferenceBasis) -> Result<QuadField> {
        match self {
            Self::Dg(g) if **g.partition() == *partition => Ok(g.sample(basis)),
            _ => {
                let nq = basis.n_points();
                let mut field = QuadField::zeros(partition.len(), nq, self.dim());
                for n in 0..partition.len() {
                    for (q, &xi) in basis.quadrature().points().iter().enumerate() {
                        let t = partition.to_time(n, xi);
                        let v = match self {
                            Self::Dg(g) => {
                                let m = g.partition().locate(t, Side::Right)?;
                                let mut out = vec![0.0; g.dim()];
                                g.eval_local(m, g.partition().to_reference(m, t), &mut out);
                                out
                            }
                            Self::Closed { f, .. } => f(t),
                        };
                        if v.len() != self.dim() {
                            return Err(Error::InvalidArgument(format!(
                                "control returned {} components, expected {}",
                                v.len(),
                                self.dim()
                            )));
                        }
                        field.at_mut(n, q).copy_from_slice(&v);
                    }
                }
                Ok(field)
            }
        }
    }

    /// Total variation; only defined for DG-backed controls.
    pub fn total_variation(&self) -> Result<f64> {
        match self {
            Self::Dg(g) => Ok(g.total_variation()),
            Self::Closed { .. } => Err(Error::Unsupported(
                "total variation of a closed-form control".into(),
            )),
        }
    }

    /// Whether `lo <= u <= hi` holds at every quadrature point of `basis`.
    pub fn within_box(&self, partition: &Partition, basis: &ReferenceBasis, lo: &[f64], hi: &[f64]) -> Result<bool> {
        let field = self.sample(partition, basis)?;
        for n in 0..field.n_intervals() {
            for q in 0..field.n_points() {
                let u = field.at(n, q);
                if u.iter().zip(lo.iter().zip(hi)).any(|(v, (l, h))| v < l || v > h) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}
