use std::collections::BTreeMap;

use rand::Rng;

use super::DiffError;

/// Dense row-major array of `f64` with an optional gradient slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, DiffError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(DiffError::ShapeMismatch {
                context: "Tensor::from_vec".into(),
                expected: shape.to_vec(),
                found: vec![data.len()],
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    /// Uniform initialisation in `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self {
            shape: shape.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Gradient slot, allocated (zeroed) on first access.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        let len = self.data.len();
        self.grad.get_or_insert_with(|| vec![0.0; len])
    }

    /// Simultaneous view of the data and a mutable gradient slot.
    pub fn split_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let len = self.data.len();
        let grad = self.grad.get_or_insert_with(|| vec![0.0; len]);
        (&mut self.data, grad)
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }
}

/// Named collection of learnable tensors.
///
/// Iteration order is the sorted name order, which keeps global-norm
/// clipping, optimiser updates and checkpoints reproducible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Tensor>,
    step_count: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<(), DiffError> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(DiffError::DuplicateParam(name));
        }
        self.entries.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, DiffError> {
        self.entries
            .get(name)
            .ok_or_else(|| DiffError::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor, DiffError> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| DiffError::MissingParam(name.to_string()))
    }

    /// Data slice of a parameter; panics on an unknown name (a wiring bug).
    pub fn data(&self, name: &str) -> &[f64] {
        match self.entries.get(name) {
            Some(t) => t.data(),
            None => panic!("unknown parameter `{name}`"),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.entries.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn set_step_count(&mut self, steps: u64) {
        self.step_count = steps;
    }

    pub(crate) fn bump_step(&mut self) -> u64 {
        self.step_count += 1;
        self.step_count
    }

    pub fn zero_grad(&mut self) {
        self.entries.values_mut().for_each(Tensor::zero_grad);
    }

    /// Overwrites every gradient slot with the matching entry of `grads`.
    /// Parameters absent from `grads` get a zero gradient.
    pub fn set_grads(&mut self, grads: &Grads) -> Result<(), DiffError> {
        for (name, g) in grads.iter() {
            let t = self.get(name)?;
            if t.len() != g.len() {
                return Err(DiffError::ShapeMismatch {
                    context: format!("gradient for `{name}`"),
                    expected: t.shape().to_vec(),
                    found: vec![g.len()],
                });
            }
        }
        for (name, t) in self.entries.iter_mut() {
            let slot = t.grad_mut();
            match grads.get(name) {
                Some(g) => slot.copy_from_slice(g),
                None => slot.iter_mut().for_each(|x| *x = 0.0),
            }
        }
        Ok(())
    }

    /// Concatenated gradients in iteration order (zeros where absent).
    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for t in self.entries.values() {
            match t.grad() {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat(0.0).take(t.len())),
            }
        }
        out
    }

    pub fn flat_data(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for t in self.entries.values() {
            out.extend_from_slice(t.data());
        }
        out
    }
}

/// Gradient buffers keyed by parameter name, filled by hand-derived backward passes.
#[derive(Clone, Debug, Default)]
pub struct Grads {
    entries: BTreeMap<String, Vec<f64>>,
}

impl Grads {
    pub fn new() -> Self {
        Self::default()
    }

    /// Zeroed buffers for every parameter of `params`.
    pub fn zeros_like(params: &ParamStore) -> Self {
        let entries = params
            .iter()
            .map(|(n, t)| (n.clone(), vec![0.0; t.len()]))
            .collect();
        Self { entries }
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.entries.get(name).map(Vec::as_slice)
    }

    /// Buffer for `name`; panics if it was not allocated (a wiring bug).
    pub fn slot(&mut self, name: &str) -> &mut [f64] {
        match self.entries.get_mut(name) {
            Some(g) => g,
            None => panic!("no gradient buffer for `{name}`"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.entries.iter()
    }

    pub fn add_scaled(&mut self, other: &Grads, scale: f64) {
        for (name, g) in other.entries.iter() {
            let dst = self
                .entries
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; g.len()]);
            dst.iter_mut().zip(g).for_each(|(d, s)| *d += scale * s);
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .values()
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(
            Tensor::from_vec(&[2, 3], vec![0.0; 5]),
            Err(DiffError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn grad_matches_data_shape() {
        let mut t = Tensor::zeros(&[3, 4]);
        assert!(t.grad().is_none());
        assert_eq!(t.grad_mut().len(), 12);
    }

    #[test]
    fn names_are_unique_and_sorted() {
        let mut p = ParamStore::new();
        p.insert("b", Tensor::zeros(&[1])).unwrap();
        p.insert("a", Tensor::zeros(&[1])).unwrap();
        assert!(p.insert("a", Tensor::zeros(&[1])).is_err());
        assert_eq!(p.names().collect::<Vec<_>>(), vec!["a", "b"]);
    }
}
