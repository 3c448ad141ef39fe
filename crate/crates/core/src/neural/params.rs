use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};

/// Named learnable tensors in a fixed creation order.
///
/// Slot indices are the flat ordering used by optimizers, gradient checks
/// and checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Norm {
    pub gamma: usize,
    pub beta: usize,
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    /// Fan-in scaled uniform weights `U(-1/sqrt(in), 1/sqrt(in))` and zero bias.
    pub fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Linear {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-bound..bound));
        Linear {
            w: self.add(format!("{name}.weight"), w),
            b: self.add(format!("{name}.bias"), Array2::zeros((1, fan_out))),
        }
    }

    pub fn zero_linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: self.add(format!("{name}.weight"), Array2::zeros((fan_in, fan_out))),
            b: self.add(format!("{name}.bias"), Array2::zeros((1, fan_out))),
        }
    }

    pub fn norm(&mut self, name: &str, width: usize) -> Norm {
        Norm {
            gamma: self.add(format!("{name}.gamma"), Array2::ones((1, width))),
            beta: self.add(format!("{name}.beta"), Array2::zeros((1, width))),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: usize) -> &Array2<f64> {
        &self.values[id]
    }

    pub fn get_mut(&mut self, id: usize) -> &mut Array2<f64> {
        &mut self.values[id]
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Scalar count of the slots whose name starts with `prefix`.
    pub fn scalar_count_with_prefix(&self, prefix: &str) -> usize {
        self.names
            .iter()
            .zip(&self.values)
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, v)| v.len())
            .sum()
    }

    pub fn zeros_like(&self) -> Vec<Array2<f64>> {
        self.values.iter().map(|v| Array2::zeros(v.raw_dim())).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Replace every value, checking shapes against the current layout.
    pub fn load_values(&mut self, values: Vec<Array2<f64>>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} tensors, got {}",
                self.values.len(),
                values.len()
            )));
        }
        for (i, (old, new)) in self.values.iter().zip(&values).enumerate() {
            if old.dim() != new.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {} ({}) expected {:?}, got {:?}",
                    i,
                    self.names[i],
                    old.dim(),
                    new.dim()
                )));
            }
        }
        self.values = values;
        Ok(())
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[Array2<f64>]) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter slot");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (i, g) in grads.iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = params.get_mut(i);
            ndarray::Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_init_is_bounded_and_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let l = store.linear("proj", 16, 4, &mut rng);
        assert_eq!((l.w, l.b), (0, 1));
        assert_eq!(store.name(0), "proj.weight");
        assert!(store.get(0).iter().all(|w| w.abs() <= 0.25));
        assert!(store.get(1).iter().all(|&b| b == 0.0));
        assert_eq!(store.scalar_count(), 68);
        assert_eq!(store.scalar_count_with_prefix("proj."), 68);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        store.add("x", array![[3.0, -2.0]]);
        let mut opt = Adam::new(&store, 0.1);
        for _ in 0..500 {
            let g = store.get(0) * 2.0;
            opt.step(&mut store, &[g]);
        }
        assert!(store.get(0).iter().all(|x| x.abs() < 1e-2), "{:?}", store.get(0));
    }

    #[test]
    fn load_values_rejects_wrong_shapes() {
        let mut store = ParamStore::new();
        store.add("x", Array2::zeros((2, 2)));
        assert!(store.load_values(vec![Array2::zeros((2, 3))]).is_err());
        assert!(store.load_values(vec![]).is_err());
        assert!(store.load_values(vec![Array2::ones((2, 2))]).is_ok());
    }
}
