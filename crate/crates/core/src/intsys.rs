//! The torus fibration `N → M`: lattice periodicity of the tensors and the
//! Lagrangian, polarization and holomorphic-projection properties of fibers.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hk::{projection_defect, TensorReport};
use crate::joyce::ChartPoint;
use crate::linalg::max_abs_r;
use crate::model::Model;

/// A lattice translation `(φ^, φ_) ↦ (φ^ + 2πm, φ_ + 2πk)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeShift {
    pub m: Vec<i64>,
    pub k: Vec<i64>,
}

impl LatticeShift {
    pub fn new(m: Vec<i64>, k: Vec<i64>) -> Self {
        LatticeShift { m, k }
    }

    pub fn as_fiber_shift(&self) -> FiberShift {
        FiberShift {
            d_up: self.m.iter().map(|&x| 2.0 * PI * x as f64).collect(),
            d_down: self.k.iter().map(|&x| 2.0 * PI * x as f64).collect(),
        }
    }
}

/// An arbitrary fiber translation.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberShift {
    pub d_up: Vec<f64>,
    pub d_down: Vec<f64>,
}

impl FiberShift {
    pub fn apply(&self, pt: &ChartPoint) -> Result<ChartPoint> {
        let n = pt.n();
        if self.d_up.len() != n || self.d_down.len() != n {
            return Err(Error::Dimension(format!("shift does not have rank {n}")));
        }
        ChartPoint::new(
            pt.z.clone(),
            pt.phi_up.iter().zip(&self.d_up).map(|(a, b)| a + b).collect(),
            pt.phi_down.iter().zip(&self.d_down).map(|(a, b)| a + b).collect(),
        )
    }
}

fn tensor_distance(a: &TensorReport, b: &TensorReport) -> f64 {
    [
        max_abs_r(&(&a.i1 - &b.i1)),
        max_abs_r(&(&a.i2 - &b.i2)),
        max_abs_r(&(&a.i3 - &b.i3)),
        max_abs_r(&(&a.om1 - &b.om1)),
        max_abs_r(&(&a.om2 - &b.om2)),
        max_abs_r(&(&a.om3 - &b.om3)),
        max_abs_r(&(&a.g - &b.g)),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Largest entrywise change of `I_k`, `ω_k` and `g` under `shift`.
pub fn periodicity_check(model: &Model, pt: &ChartPoint, shift: &FiberShift) -> Result<f64> {
    let a = model.report(pt, &[])?;
    let b = model.report(&shift.apply(pt)?, &[])?;
    Ok(tensor_distance(&a, &b))
}

/// Same as [`periodicity_check`] for a lattice vector.
pub fn lattice_periodicity(model: &Model, pt: &ChartPoint, shift: &LatticeShift) -> Result<f64> {
    periodicity_check(model, pt, &shift.as_fiber_shift())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FiberChecks {
    /// `max |Ω|` on the fiber block.
    pub lagrangian: f64,
    /// `ω₃` on the fiber block minus `(1/4π²) dφ_i∧dφ^i`.
    pub polarization: f64,
    /// `‖dπ ∘ I₃ − I ∘ dπ‖`.
    pub holomorphic_projection: f64,
}

impl FiberChecks {
    pub fn max(&self) -> f64 {
        self.lagrangian
            .max(self.polarization)
            .max(self.holomorphic_projection)
    }
}

pub fn fiber_checks(report: &TensorReport) -> FiberChecks {
    let m = report.om3.nrows();
    let n = m / 4;
    let mut lag = 0.0f64;
    let mut pol = 0.0f64;
    let s = 1.0 / (4.0 * PI * PI);
    for a in 2 * n..m {
        for b in 2 * n..m {
            lag = lag.max(Complex64::norm(report.omega_hol[(a, b)]));
            // dφ_i∧dφ^i evaluated on (∂_a, ∂_b)
            let want = if a >= 3 * n && b == a - n {
                s
            } else if b >= 3 * n && a == b - n {
                -s
            } else {
                0.0
            };
            pol = pol.max((report.om3[(a, b)] - want).abs());
        }
    }
    FiberChecks {
        lagrangian: lag,
        polarization: pol,
        holomorphic_projection: projection_defect(&report.i3),
    }
}
