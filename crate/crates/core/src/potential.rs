//! Radial potentials `V(s) = 1 + a/s^m + O(s^{-m-σ_V})`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialForm {
    /// `1 + a/(1 + s²)^{m/2}`; far-field correction order `σ_V = 2`.
    SmoothedPower,
}

impl PotentialForm {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialForm::SmoothedPower => "smoothed-power",
        }
    }

    /// Order of the first correction past `a/s^m`.
    pub fn correction_order(&self) -> f64 {
        match self {
            PotentialForm::SmoothedPower => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialModel {
    pub a: f64,
    pub m: f64,
    pub form: PotentialForm,
}

impl PotentialModel {
    pub fn new(a: f64, m: f64) -> Result<Self> {
        if !(m > 1.0) || !m.is_finite() {
            return Err(Error::InvalidParameter(format!("decay exponent m = {m} must exceed 1")));
        }
        if !a.is_finite() {
            return Err(Error::InvalidParameter(format!("strength a = {a} not finite")));
        }
        Ok(Self {
            a,
            m,
            form: PotentialForm::SmoothedPower,
        })
    }

    /// `V(s) - 1`, kept separate to avoid cancellation.
    pub fn excess(&self, s: f64) -> f64 {
        match self.form {
            PotentialForm::SmoothedPower => self.a * (1.0 + s * s).powf(-0.5 * self.m),
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        1.0 + self.excess(s)
    }
}
