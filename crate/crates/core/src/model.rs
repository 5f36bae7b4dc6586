//! A prepotential paired with a Joyce provider, plus the central-difference
//! stencils used by every bracket and exterior-derivative check.

use num_complex::Complex64;

use crate::ask::{jet, ChartJet, Prepotential};
use crate::error::{Error, Result};
use crate::hk::{tensor_report, TensorReport};
use crate::linalg::{CMat, RMat};
use crate::joyce::{frame_hv_with, j_partials, ChartPoint, FrameAtPoint, JoyceProvider, DEFAULT_COND_MAX};

/// Default relative finite-difference step.
pub const DEFAULT_H_FD: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct Model {
    pub prepotential: Prepotential,
    pub provider: JoyceProvider,
    pub h_fd: f64,
    pub cond_max: f64,
}

impl Model {
    pub fn new(prepotential: Prepotential, provider: JoyceProvider) -> Result<Self> {
        if let Some(b) = provider.bps() {
            if b.n() != prepotential.n() {
                return Err(Error::Dimension(format!(
                    "BPS rank {} differs from prepotential dimension {}",
                    b.n(),
                    prepotential.n()
                )));
            }
        }
        Ok(Model {
            prepotential,
            provider,
            h_fd: DEFAULT_H_FD,
            cond_max: DEFAULT_COND_MAX,
        })
    }

    pub fn with_h_fd(mut self, h: f64) -> Self {
        self.h_fd = h;
        self
    }

    pub fn with_cond_max(mut self, c: f64) -> Self {
        self.cond_max = c;
        self
    }

    pub fn n(&self) -> usize {
        self.prepotential.n()
    }

    /// The same prepotential with `J = 0`.
    pub fn semi_flat(&self) -> Model {
        Model {
            provider: JoyceProvider::Zero,
            ..self.clone()
        }
    }

    pub fn jet(&self, z: &[Complex64]) -> Result<ChartJet> {
        jet(&self.prepotential, z)
    }

    pub fn frame(&self, pt: &ChartPoint) -> Result<FrameAtPoint> {
        let j = self.jet(&pt.z)?;
        frame_hv_with(&self.provider, pt, &j, self.cond_max)
    }

    /// All tensors at `pt`, with twistor checks at `zetas`.
    pub fn report(&self, pt: &ChartPoint, zetas: &[Complex64]) -> Result<TensorReport> {
        let j = self.jet(&pt.z)?;
        let t = j_partials(&self.provider, pt, &j, 2)?;
        let f = frame_hv_with(&self.provider, pt, &j, self.cond_max)?;
        tensor_report(&f, &j, &t, zetas)
    }

    /// Evaluates `f` at `pt` and at `pt ± h e_k` for every real coordinate.
    pub fn stencil<T, F>(&self, pt: &ChartPoint, f: F) -> Result<Stencil<T>>
    where
        F: Fn(&ChartPoint) -> Result<T>,
    {
        let x = pt.real_coords();
        let mut plus = Vec::with_capacity(x.len());
        let mut minus = Vec::with_capacity(x.len());
        let mut steps = Vec::with_capacity(x.len());
        for (k, xk) in x.iter().enumerate() {
            let h = self.h_fd * xk.abs().max(1.0);
            plus.push(f(&pt.shifted(k, h))?);
            minus.push(f(&pt.shifted(k, -h))?);
            steps.push(h);
        }
        Ok(Stencil {
            center: f(pt)?,
            plus,
            minus,
            steps,
        })
    }
}

/// Values of a field at a point and its `±h` neighbours.
#[derive(Debug, Clone)]
pub struct Stencil<T> {
    pub center: T,
    pub plus: Vec<T>,
    pub minus: Vec<T>,
    pub steps: Vec<f64>,
}

impl<T> Stencil<T> {
    pub fn dim(&self) -> usize {
        self.steps.len()
    }

    /// Applies `g` to every sample.
    pub fn map<U>(&self, g: impl Fn(&T) -> U) -> Stencil<U> {
        Stencil {
            center: g(&self.center),
            plus: self.plus.iter().map(&g).collect(),
            minus: self.minus.iter().map(&g).collect(),
            steps: self.steps.clone(),
        }
    }
}

/// Quantities that can be central-differenced.
pub trait Difference {
    fn central(plus: &Self, minus: &Self, h: f64) -> Self;
}

impl Difference for CMat {
    fn central(plus: &Self, minus: &Self, h: f64) -> Self {
        (plus - minus) * Complex64::new(0.5 / h, 0.0)
    }
}

impl Difference for RMat {
    fn central(plus: &Self, minus: &Self, h: f64) -> Self {
        (plus - minus) * (0.5 / h)
    }
}

impl Difference for Complex64 {
    fn central(plus: &Self, minus: &Self, h: f64) -> Self {
        (plus - minus) * (0.5 / h)
    }
}

impl<T: Difference> Stencil<T> {
    /// Central difference along real coordinate `k`.
    pub fn derivative(&self, k: usize) -> T {
        T::central(&self.plus[k], &self.minus[k], self.steps[k])
    }
}
