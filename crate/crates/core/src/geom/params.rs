use crate::adiff::{Bindings, Tensor};

use super::{GeomError, POINT_LEAF};

/// A named shape parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: f64,
    pub bounds: Option<(f64, f64)>,
    /// Explicit mutation scale for unbounded parameters during evolution.
    pub mutation_scale: Option<f64>,
}

/// Ordered set of shape parameters `p`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: f64, bounds: Option<(f64, f64)>) -> Result<(), GeomError> {
        if name == POINT_LEAF || self.get(name).is_some() {
            return Err(GeomError::DuplicateParam(name.to_string()));
        }
        if let Some((lo, hi)) = bounds {
            if !(lo <= hi) {
                return Err(GeomError::InvalidParameter {
                    what: format!("bounds of `{name}`"),
                    value: lo,
                    reason: "lower bound exceeds upper bound",
                });
            }
            check_bounds(name, value, lo, hi)?;
        }
        if !value.is_finite() {
            return Err(GeomError::InvalidParameter { what: name.to_string(), value, reason: "not finite" });
        }
        self.params.push(Param { name: name.to_string(), value, bounds, mutation_scale: None });
        Ok(())
    }

    /// Builder-style [`add`](Self::add).
    pub fn with(mut self, name: &str, value: f64, bounds: Option<(f64, f64)>) -> Result<Self, GeomError> {
        self.add(name, value, bounds)?;
        Ok(self)
    }

    pub fn set_mutation_scale(&mut self, name: &str, scale: f64) -> Result<(), GeomError> {
        let p = self.params.iter_mut().find(|p| p.name == name).ok_or_else(|| GeomError::UnknownParam(name.into()))?;
        p.mutation_scale = Some(scale);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<(), GeomError> {
        let p = self.params.iter_mut().find(|p| p.name == name).ok_or_else(|| GeomError::UnknownParam(name.into()))?;
        if let Some((lo, hi)) = p.bounds {
            check_bounds(name, value, lo, hi)?;
        }
        p.value = value;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }

    /// Overwrites all values in order, clamping to bounds.
    pub fn set_values(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.params.len(), "parameter vector length");
        for (p, &v) in self.params.iter_mut().zip(values) {
            p.value = match p.bounds {
                Some((lo, hi)) => v.clamp(lo, hi),
                None => v,
            };
        }
    }

    pub fn bindings(&self) -> Bindings {
        self.params.iter().map(|p| (p.name.clone(), Tensor::scalar(p.value))).collect()
    }
}

fn check_bounds(name: &str, value: f64, lo: f64, hi: f64) -> Result<(), GeomError> {
    if value < lo || value > hi {
        return Err(GeomError::OutOfBounds { name: name.to_string(), value, lo, hi });
    }
    Ok(())
}
