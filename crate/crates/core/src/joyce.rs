//! The Joyce function, its derivative table, the frames `h`, `v`, and the
//! residuals of the flatness and Plebański-type equations.
//!
//! Vectors live in the complexified basis
//! `B = (∂Z^1..∂Z^n | ∂Z̄^1..∂Z̄^n | ∂φ^1..∂φ^n | ∂φ_1..∂φ_n)`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::ask::ChartJet;
use crate::bps::{central_charge, make_bps_structure, BpsStructure, Charge, DEFAULT_SUPPORT_FLOOR};
use crate::error::{Error, Result};
use crate::linalg::{c, condition_number, max_abs_v, CMat, CVec};
use crate::model::Model;
use crate::special::{bessel_k0123, ray_integral_dilog, RayIntegralSpec};

/// Default ceiling on the condition number of `[h | h̄ | v | v̄]`.
pub const DEFAULT_COND_MAX: f64 = 1e6;

/// Default twistor samples for flatness checks.
pub fn default_zetas() -> Vec<Complex64> {
    vec![
        c(1.0, 0.0),
        c(0.0, 1.0),
        c(-1.0, 0.0),
        c(0.0, -1.0),
        c(2.0, 0.0),
        c(0.5, 0.5),
    ]
}

/// A point of `TM` in the chart `(Z^i, φ^i, φ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub z: Vec<Complex64>,
    pub phi_up: Vec<f64>,
    pub phi_down: Vec<f64>,
}

impl ChartPoint {
    pub fn new(z: Vec<Complex64>, phi_up: Vec<f64>, phi_down: Vec<f64>) -> Result<Self> {
        let n = z.len();
        if phi_up.len() != n || phi_down.len() != n || n == 0 {
            return Err(Error::Dimension("chart point blocks must share length n ≥ 1".into()));
        }
        let finite = z.iter().all(|c| c.is_finite())
            && phi_up.iter().chain(&phi_down).all(|x| x.is_finite());
        if !finite {
            return Err(Error::Domain("non-finite chart point".into()));
        }
        Ok(ChartPoint { z, phi_up, phi_down })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// `(Re Z, Im Z, φ^, φ_)`.
    pub fn real_coords(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.z.iter().map(|c| c.re).collect();
        out.extend(self.z.iter().map(|c| c.im));
        out.extend(&self.phi_up);
        out.extend(&self.phi_down);
        out
    }

    pub fn from_real(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(4) || x.is_empty() {
            return Err(Error::Dimension("real coordinates must have length 4n".into()));
        }
        let n = x.len() / 4;
        ChartPoint::new(
            (0..n).map(|i| c(x[i], x[n + i])).collect(),
            x[2 * n..3 * n].to_vec(),
            x[3 * n..].to_vec(),
        )
    }

    /// Moves real coordinate `k` by `delta`.
    pub fn shifted(&self, k: usize, delta: f64) -> ChartPoint {
        let mut x = self.real_coords();
        x[k] += delta;
        ChartPoint::from_real(&x).expect("same shape")
    }

    /// The involution `φ ↦ −φ`.
    pub fn fiber_negated(&self) -> ChartPoint {
        ChartPoint {
            z: self.z.clone(),
            phi_up: self.phi_up.iter().map(|x| -x).collect(),
            phi_down: self.phi_down.iter().map(|x| -x).collect(),
        }
    }
}

/// Source of the Joyce function.
#[derive(Debug, Clone, PartialEq)]
pub enum JoyceProvider {
    /// `J = 0`: the semi-flat structure.
    Zero,
    /// The series over an uncoupled BPS spectrum.
    UncoupledBps {
        bps: BpsStructure,
        tail_tol: f64,
        support_floor: f64,
    },
}

impl JoyceProvider {
    pub fn uncoupled(bps: BpsStructure, tail_tol: f64) -> Result<Self> {
        if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
            return Err(Error::Domain(format!(
                "tail_tol must lie in (0, 1e-6], got {tail_tol:e}"
            )));
        }
        Ok(JoyceProvider::UncoupledBps {
            bps,
            tail_tol,
            support_floor: DEFAULT_SUPPORT_FLOOR,
        })
    }

    pub fn with_support_floor(self, floor: f64) -> Self {
        match self {
            JoyceProvider::UncoupledBps { bps, tail_tol, .. } => JoyceProvider::UncoupledBps {
                bps,
                tail_tol,
                support_floor: floor,
            },
            z => z,
        }
    }

    pub fn bps(&self) -> Option<&BpsStructure> {
        match self {
            JoyceProvider::Zero => None,
            JoyceProvider::UncoupledBps { bps, .. } => Some(bps),
        }
    }
}

/// Index helpers for the variable order `(Z, Z̄, φ^, φ_)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Z(usize),
    Zb(usize),
    Up(usize),
    Dn(usize),
}

impl Var {
    pub fn index(self, n: usize) -> usize {
        match self {
            Var::Z(i) => i,
            Var::Zb(i) => n + i,
            Var::Up(i) => 2 * n + i,
            Var::Dn(i) => 3 * n + i,
        }
    }

    pub fn from_index(a: usize, n: usize) -> Var {
        match a / n {
            0 => Var::Z(a),
            1 => Var::Zb(a - n),
            2 => Var::Up(a - 2 * n),
            _ => Var::Dn(a - 3 * n),
        }
    }
}

/// Dense derivatives of a function of `(Z, Z̄, φ^, φ_)` up to order three,
/// Wirtinger in the base.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivTable {
    n: usize,
    order: usize,
    pub val: Complex64,
    d1: Vec<Complex64>,
    d2: Vec<Complex64>,
    d3: Vec<Complex64>,
    /// Bound on the omitted part of the series.
    pub tail: f64,
    /// Largest `n` kept in the instanton sum.
    pub terms: usize,
}

impl DerivTable {
    pub fn zeros(n: usize, order: usize) -> Self {
        let m = 4 * n;
        DerivTable {
            n,
            order,
            val: c(0.0, 0.0),
            d1: vec![c(0.0, 0.0); m],
            d2: vec![c(0.0, 0.0); if order >= 2 { m * m } else { 0 }],
            d3: vec![c(0.0, 0.0); if order >= 3 { m * m * m } else { 0 }],
            tail: 0.0,
            terms: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn d1(&self, a: Var) -> Complex64 {
        self.d1[a.index(self.n)]
    }

    pub fn d2(&self, a: Var, b: Var) -> Complex64 {
        assert!(self.order >= 2, "table holds order {}", self.order);
        let m = 4 * self.n;
        self.d2[a.index(self.n) * m + b.index(self.n)]
    }

    pub fn d3(&self, a: Var, b: Var, e: Var) -> Complex64 {
        assert!(self.order >= 3, "table holds order {}", self.order);
        let m = 4 * self.n;
        self.d3[(a.index(self.n) * m + b.index(self.n)) * m + e.index(self.n)]
    }

    /// Table of the complex conjugate function.
    pub fn conj(&self) -> DerivTable {
        let n = self.n;
        let m = 4 * n;
        let swap = |a: usize| match a / n {
            0 => a + n,
            1 => a - n,
            _ => a,
        };
        let mut out = DerivTable::zeros(n, self.order);
        out.val = self.val.conj();
        out.tail = self.tail;
        out.terms = self.terms;
        for a in 0..m {
            out.d1[a] = self.d1[swap(a)].conj();
        }
        if self.order >= 2 {
            for a in 0..m {
                for b in 0..m {
                    out.d2[a * m + b] = self.d2[swap(a) * m + swap(b)].conj();
                }
            }
        }
        if self.order >= 3 {
            for a in 0..m {
                for b in 0..m {
                    for e in 0..m {
                        out.d3[(a * m + b) * m + e] =
                            self.d3[(swap(a) * m + swap(b)) * m + swap(e)].conj();
                    }
                }
            }
        }
        out
    }

    /// Entrywise `self − other`.
    pub fn sub(&self, other: &DerivTable) -> DerivTable {
        let mut out = self.clone();
        out.val -= other.val;
        for (x, y) in out.d1.iter_mut().zip(&other.d1) {
            *x -= y;
        }
        for (x, y) in out.d2.iter_mut().zip(&other.d2) {
            *x -= y;
        }
        for (x, y) in out.d3.iter_mut().zip(&other.d3) {
            *x -= y;
        }
        out.tail += other.tail;
        out
    }
}

/// `J` at a point with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JValue {
    pub value: Complex64,
    pub tail: f64,
    pub terms: usize,
}

pub fn j_eval(p: &JoyceProvider, pt: &ChartPoint, jet: &ChartJet) -> Result<JValue> {
    let t = j_partials(p, pt, jet, 0)?;
    Ok(JValue {
        value: t.val,
        tail: t.tail,
        terms: t.terms,
    })
}

const MAX_TERMS: usize = 100_000;

/// Upper bound on the `n`-th instanton term including derivative growth.
fn term_bound(omega_max: f64, r: f64, kmax: f64, n: usize, order: usize) -> f64 {
    let nf = n as f64;
    let base = omega_max * (PI / (4.0 * PI * nf * r)).sqrt() * (-2.0 * PI * nf * r).exp() / (nf * nf);
    let growth = 1.0 + kmax * (nf * (2.0 * PI + 1.0) + 1.0 / r);
    base * growth.powi(order as i32) / (1.0 - (-2.0 * PI * r).exp())
}

/// Derivatives of `J` up to `max_order ≤ 3` by termwise differentiation.
pub fn j_partials(
    p: &JoyceProvider,
    pt: &ChartPoint,
    jet: &ChartJet,
    max_order: usize,
) -> Result<DerivTable> {
    let n = jet.n();
    if pt.n() != n {
        return Err(Error::Dimension("point and jet disagree on n".into()));
    }
    if max_order > 3 {
        return Err(Error::Dimension("derivative tables stop at order 3".into()));
    }
    let mut t = DerivTable::zeros(n, max_order);
    let (bps, tail_tol, floor) = match p {
        JoyceProvider::Zero => return Ok(t),
        JoyceProvider::UncoupledBps {
            bps,
            tail_tol,
            support_floor,
        } => (bps, *tail_tol, *support_floor),
    };
    if bps.n() != n {
        return Err(Error::Dimension("BPS rank differs from the prepotential".into()));
    }
    bps.check_support(jet, floor)?;
    let m = 4 * n;
    let support: Vec<_> = bps.support().collect();
    let per_charge_tol = tail_tol / support.len().max(1) as f64;
    let omega_max = bps.omega_max();
    for (g, om) in &support {
        let om = om.to_f64().unwrap_or(f64::NAN);
        let (u, kcoef) = central_charge(bps, jet, g);
        let r = u.norm();
        let ub = u.conj();
        let s = r * r;
        let phig = g.phase(&pt.phi_up);
        let kmax = kcoef.iter().map(|k| k.unsigned_abs() as f64).fold(0.0, f64::max);
        let mut nn = 1;
        loop {
            let nf = nn as f64;
            let a = 2.0 * PI * nf;
            let x = a * r;
            let ks = bessel_k0123(x)?;
            let mut gm = [0.0; 4];
            for (mi, g_m) in gm.iter_mut().enumerate() {
                *g_m = (-a * a / 2.0).powi(mi as i32) * x.powi(-(mi as i32)) * ks[mi];
            }
            let gc = |k: usize| c(gm[k], 0.0);
            // ∂_u^p ∂_ū^q K0(a|u|)
            let mut dd = [[c(0.0, 0.0); 4]; 4];
            dd[0][0] = gc(0);
            dd[1][0] = ub * gc(1);
            dd[0][1] = u * gc(1);
            dd[2][0] = ub * ub * gc(2);
            dd[0][2] = u * u * gc(2);
            dd[1][1] = gc(1) + gc(2) * s;
            dd[3][0] = ub * ub * ub * gc(3);
            dd[0][3] = u * u * u * gc(3);
            dd[2][1] = ub * gc(2) * 2.0 + ub * ub * u * gc(3);
            dd[1][2] = u * gc(2) * 2.0 + u * u * ub * gc(3);
            let phase = Complex64::from_polar(1.0, nf * phig);
            let cf = phase * om / (c(0.0, 2.0 * PI) * (nf * nf));
            // per-variable weight and (p, q) increment
            let mut w = vec![c(0.0, 0.0); m];
            let mut pq = vec![(0usize, 0usize); m];
            for j in 0..n {
                let kj = kcoef[j] as f64;
                w[j] = c(kj, 0.0);
                pq[j] = (1, 0);
                w[n + j] = c(kj, 0.0);
                pq[n + j] = (0, 1);
                w[2 * n + j] = c(0.0, nf * kj);
            }
            t.val += cf * dd[0][0];
            if max_order >= 1 {
                for a1 in 0..m {
                    let (p1, q1) = pq[a1];
                    t.d1[a1] += cf * w[a1] * dd[p1][q1];
                }
            }
            if max_order >= 2 {
                for a1 in 0..m {
                    for a2 in 0..m {
                        let p2 = pq[a1].0 + pq[a2].0;
                        let q2 = pq[a1].1 + pq[a2].1;
                        t.d2[a1 * m + a2] += cf * w[a1] * w[a2] * dd[p2][q2];
                    }
                }
            }
            if max_order >= 3 {
                for a1 in 0..m {
                    for a2 in 0..m {
                        let w12 = w[a1] * w[a2];
                        for a3 in 0..m {
                            let p3 = pq[a1].0 + pq[a2].0 + pq[a3].0;
                            let q3 = pq[a1].1 + pq[a2].1 + pq[a3].1;
                            t.d3[(a1 * m + a2) * m + a3] += cf * w12 * w[a3] * dd[p3][q3];
                        }
                    }
                }
            }
            let bound = term_bound(omega_max, r, kmax, nn + 1, max_order);
            if bound < per_charge_tol || nn >= MAX_TERMS {
                t.tail += bound;
                t.terms = t.terms.max(nn);
                break;
            }
            nn += 1;
        }
    }
    Ok(t)
}

/// `Ham_f = ∂f/∂φ^i ∂φ_i − ∂f/∂φ_i ∂φ^i` in basis `B`.
pub fn vertical_ham(grad_up: &[Complex64], grad_down: &[Complex64]) -> CVec {
    let n = grad_up.len();
    let mut v = DVector::zeros(4 * n);
    for i in 0..n {
        v[3 * n + i] = grad_up[i];
        v[2 * n + i] = -grad_down[i];
    }
    v
}

/// `{f, g} = f_{φ^k} g_{φ_k} − f_{φ_k} g_{φ^k}`.
pub fn poisson(f_up: &[Complex64], f_dn: &[Complex64], g_up: &[Complex64], g_dn: &[Complex64]) -> Complex64 {
    (0..f_up.len())
        .map(|k| f_up[k] * g_dn[k] - f_dn[k] * g_up[k])
        .sum()
}

/// `ω^ν = dφ^k ∧ dφ_k` on two `B`-vectors.
pub fn omega_nu(a: &CVec, b: &CVec) -> Complex64 {
    let n = a.len() / 4;
    (0..n)
        .map(|k| a[2 * n + k] * b[3 * n + k] - a[3 * n + k] * b[2 * n + k])
        .sum()
}

/// Complex conjugate of a `B`-vector: swaps the `∂Z`, `∂Z̄` blocks.
pub fn conj_b(v: &CVec) -> CVec {
    let n = v.len() / 4;
    let mut out = v.map(|z| z.conj());
    for i in 0..n {
        out[i] = v[n + i].conj();
        out[n + i] = v[i].conj();
    }
    out
}

/// Frames at one point, in basis `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameAtPoint {
    pub hor: Vec<CVec>,
    pub nu: Vec<CVec>,
    pub h: Vec<CVec>,
    pub v: Vec<CVec>,
    pub cond: f64,
}

impl FrameAtPoint {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    /// Columns `[h | h̄ | v | v̄]` in basis `B`.
    pub fn matrix_b(&self) -> CMat {
        let n = self.n();
        let mut m = CMat::zeros(4 * n, 4 * n);
        for i in 0..n {
            m.set_column(i, &self.h[i]);
            m.set_column(n + i, &conj_b(&self.h[i]));
            m.set_column(2 * n + i, &self.v[i]);
            m.set_column(3 * n + i, &conj_b(&self.v[i]));
        }
        m
    }

    /// Columns `[h | h̄ | v | v̄]` in the real coordinate basis
    /// `R = (∂u | ∂w | ∂φ^ | ∂φ_)`, complex coefficients.
    pub fn matrix_r(&self) -> CMat {
        b_to_r(self.n()) * self.matrix_b()
    }
}

/// Change of components from basis `B` to basis `R`.
pub fn b_to_r(n: usize) -> CMat {
    let mut p = CMat::zeros(4 * n, 4 * n);
    for i in 0..n {
        p[(i, i)] = c(0.5, 0.0);
        p[(i, n + i)] = c(0.5, 0.0);
        p[(n + i, i)] = c(0.0, -0.5);
        p[(n + i, n + i)] = c(0.0, 0.5);
        p[(2 * n + i, 2 * n + i)] = c(1.0, 0.0);
        p[(3 * n + i, 3 * n + i)] = c(1.0, 0.0);
    }
    p
}

fn unit(m: usize, k: usize) -> CVec {
    let mut v = DVector::zeros(m);
    v[k] = c(1.0, 0.0);
    v
}

/// Assembles `H`, `ν`, `h`, `v` from the Hamiltonian definitions.
pub fn frame_from_table(jet: &ChartJet, t: &DerivTable) -> FrameAtPoint {
    let n = jet.n();
    let m = 4 * n;
    let tau = &jet.tau;
    let mut hor = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let hi = unit(m, i);
        let mut nui = unit(m, 2 * n + i) * c(0.5, 0.0);
        for j in 0..n {
            nui[3 * n + j] -= tau[(i, j)] * 0.5;
        }
        // Ham of H_i J
        let up: Vec<_> = (0..n).map(|k| t.d2(Var::Z(i), Var::Up(k))).collect();
        let dn: Vec<_> = (0..n).map(|k| t.d2(Var::Z(i), Var::Dn(k))).collect();
        h.push(&hi + vertical_ham(&up, &dn));
        // ν_ī = ½(∂φ^i − τ̄_ij ∂φ_j), and Ham of ν_ī J
        let mut nubar = unit(m, 2 * n + i) * c(0.5, 0.0);
        for j in 0..n {
            nubar[3 * n + j] -= tau[(i, j)].conj() * 0.5;
        }
        let grad = |dir: Var| -> Complex64 {
            let mut s = t.d2(Var::Up(i), dir);
            for j in 0..n {
                s -= tau[(i, j)].conj() * t.d2(Var::Dn(j), dir);
            }
            s * 0.5
        };
        let up: Vec<_> = (0..n).map(|k| grad(Var::Up(k))).collect();
        let dn: Vec<_> = (0..n).map(|k| grad(Var::Dn(k))).collect();
        v.push((nubar + vertical_ham(&up, &dn)) * c(0.0, 2.0 * PI));
        hor.push(hi);
        nu.push(nui);
    }
    let mut f = FrameAtPoint {
        hor,
        nu,
        h,
        v,
        cond: 0.0,
    };
    f.cond = condition_number(&f.matrix_b());
    f
}

/// Closed-form frames valid when `J` does not depend on `φ_`:
/// `h_i = ∂Z^i + J_{Z^iφ^j}∂φ_j`, `v_i = πi(∂φ^i − τ̄_ij∂φ_j + J_{φ^iφ^j}∂φ_j)`.
pub fn explicit_uncoupled_frame(jet: &ChartJet, t: &DerivTable) -> (Vec<CVec>, Vec<CVec>) {
    let n = jet.n();
    let m = 4 * n;
    let mut h = Vec::new();
    let mut v = Vec::new();
    for i in 0..n {
        let mut hi = unit(m, i);
        let mut vi = unit(m, 2 * n + i);
        for j in 0..n {
            hi[3 * n + j] += t.d2(Var::Z(i), Var::Up(j));
            vi[3 * n + j] += -jet.tau[(i, j)].conj() + t.d2(Var::Up(i), Var::Up(j));
        }
        h.push(hi);
        v.push(vi * c(0.0, PI));
    }
    (h, v)
}

/// Builds the frame and rejects it if `cond > cond_max`.
pub fn frame_hv_with(
    p: &JoyceProvider,
    pt: &ChartPoint,
    jet: &ChartJet,
    cond_max: f64,
) -> Result<FrameAtPoint> {
    let t = j_partials(p, pt, jet, 2)?;
    let f = frame_from_table(jet, &t);
    if !(f.cond <= cond_max) {
        return Err(Error::DegenerateFrame {
            cond: f.cond,
            max: cond_max,
        });
    }
    Ok(f)
}

pub fn frame_hv(p: &JoyceProvider, pt: &ChartPoint, jet: &ChartJet) -> Result<FrameAtPoint> {
    frame_hv_with(p, pt, jet, DEFAULT_COND_MAX)
}

/// Twistor parameter including the two poles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Twistor {
    Finite(Complex64),
    Zero,
    Infinity,
}

/// `A^ζ_i = h_i − ζ⁻¹ v̄_i` or `A^ζ_ī = h̄_i + ζ v_i`; the poles return the
/// rescaled limits.
pub fn connection_family(
    frame: &FrameAtPoint,
    zeta: Twistor,
    i: usize,
    conjugated: bool,
) -> Result<CVec> {
    let h = &frame.h[i];
    let v = &frame.v[i];
    Ok(match (zeta, conjugated) {
        (Twistor::Finite(z), _) if z.norm() == 0.0 => return Err(Error::ZeroZeta),
        (Twistor::Finite(z), false) => h - conj_b(v) / z,
        (Twistor::Finite(z), true) => conj_b(h) + v * z,
        (Twistor::Zero, false) => -conj_b(v),
        (Twistor::Zero, true) => conj_b(h),
        (Twistor::Infinity, false) => h.clone(),
        (Twistor::Infinity, true) => v.clone(),
    })
}

/// Frame fields and their first derivatives along the real coordinates.
pub(crate) struct FrameField {
    pub e: CMat,
    pub de: Vec<CMat>,
}

impl FrameField {
    /// Components of `Σ α_a F_a` and of its derivatives.
    fn field(&self, alpha: &CVec) -> (CVec, Vec<CVec>) {
        (&self.e * alpha, self.de.iter().map(|d| d * alpha).collect())
    }

    /// `[X, Y]^a = X^b ∂_b Y^a − Y^b ∂_b X^a` for constant-coefficient
    /// combinations of frame fields.
    pub fn bracket(&self, alpha: &CVec, beta: &CVec) -> CVec {
        let (x, dx) = self.field(alpha);
        let (y, dy) = self.field(beta);
        let mut out = DVector::zeros(x.len());
        for b in 0..x.len() {
            out += &dy[b] * x[b] - &dx[b] * y[b];
        }
        out
    }

    /// Bracket of two frame columns.
    pub fn bracket_cols(&self, a: usize, b: usize) -> CVec {
        let m = self.e.ncols();
        self.bracket(&unit(m, a), &unit(m, b))
    }
}

pub(crate) fn frame_field(model: &Model, pt: &ChartPoint) -> Result<FrameField> {
    let st = model.stencil(pt, |q| Ok(model.frame(q)?.matrix_r()))?;
    let de = (0..st.dim()).map(|k| st.derivative(k)).collect();
    Ok(FrameField { e: st.center, de })
}

/// Maximum bracket residuals of the flatness equations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatnessReport {
    /// `max ‖[A^ζ_a, A^ζ_b]‖` over coordinate directions and sampled `ζ`.
    pub direct: f64,
    /// `[h,h]`, `[h,v̄]+[v̄,h]`, `[v,v]`, `[h,h̄]−[v̄,v]`, `[h,v]`.
    pub termwise: [f64; 5],
}

impl FlatnessReport {
    pub fn max(&self) -> f64 {
        self.termwise.iter().cloned().fold(self.direct, f64::max)
    }
}

pub fn flatness_residuals(model: &Model, pt: &ChartPoint, zetas: &[Complex64]) -> Result<FlatnessReport> {
    let ff = frame_field(model, pt)?;
    let n = pt.n();
    let m = 4 * n;
    let col = |k: usize| unit(m, k);
    let (h, hb, v, vb) = (0, n, 2 * n, 3 * n);
    let mut rep = FlatnessReport::default();
    for &z in zetas {
        if z.norm() == 0.0 {
            return Err(Error::ZeroZeta);
        }
        let mut fields = Vec::new();
        for i in 0..n {
            fields.push(col(h + i) - col(vb + i) / z);
            fields.push(col(hb + i) + col(v + i) * z);
        }
        for a in 0..fields.len() {
            for b in a + 1..fields.len() {
                rep.direct = rep.direct.max(max_abs_v(&ff.bracket(&fields[a], &fields[b])));
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let t = [
                ff.bracket_cols(h + i, h + j),
                ff.bracket_cols(h + i, vb + j) + ff.bracket_cols(vb + i, h + j),
                ff.bracket_cols(v + i, v + j),
                ff.bracket_cols(h + i, hb + j) - ff.bracket_cols(vb + i, v + j),
                ff.bracket_cols(h + i, v + j),
            ];
            for (r, x) in rep.termwise.iter_mut().zip(&t) {
                *r = r.max(max_abs_v(x));
            }
        }
    }
    Ok(rep)
}

/// A function on `N` through its value and fiber derivatives at one point.
/// Fiber index `k < n` is `φ^k`, `k ≥ n` is `φ_{k−n}`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FiberJet {
    pub val: Complex64,
    pub grad: Vec<Complex64>,
    pub hess: Option<Vec<Complex64>>,
}

fn fiber_var(k: usize, n: usize) -> Var {
    if k < n {
        Var::Up(k)
    } else {
        Var::Dn(k - n)
    }
}

impl FiberJet {
    fn zero(n: usize, with_hess: bool) -> Self {
        FiberJet {
            val: c(0.0, 0.0),
            grad: vec![c(0.0, 0.0); 2 * n],
            hess: with_hess.then(|| vec![c(0.0, 0.0); 4 * n * n]),
        }
    }

    /// `∂_a f` for `f` with table `t`.
    pub fn first(t: &DerivTable, a: Var) -> Self {
        let n = t.n();
        let with_hess = t.order() >= 3;
        let mut out = FiberJet::zero(n, with_hess);
        out.val = t.d1(a);
        for k in 0..2 * n {
            out.grad[k] = t.d2(a, fiber_var(k, n));
        }
        if let Some(hs) = out.hess.as_mut() {
            for k in 0..2 * n {
                for l in 0..2 * n {
                    hs[k * 2 * n + l] = t.d3(a, fiber_var(k, n), fiber_var(l, n));
                }
            }
        }
        out
    }

    /// `∂_a ∂_b f` (value and fiber gradient only).
    pub fn second(t: &DerivTable, a: Var, b: Var) -> Self {
        let n = t.n();
        let mut out = FiberJet::zero(n, false);
        out.val = t.d2(a, b);
        for k in 0..2 * n {
            out.grad[k] = t.d3(a, b, fiber_var(k, n));
        }
        out
    }

    pub fn axpy(&mut self, s: Complex64, other: &FiberJet) {
        self.val += s * other.val;
        for (x, y) in self.grad.iter_mut().zip(&other.grad) {
            *x += s * y;
        }
        self.hess = match (self.hess.take(), &other.hess) {
            (Some(mut a), Some(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += s * y;
                }
                Some(a)
            }
            _ => None,
        };
    }

    pub fn scaled(mut self, s: Complex64) -> Self {
        self.val *= s;
        for x in self.grad.iter_mut() {
            *x *= s;
        }
        if let Some(h) = self.hess.as_mut() {
            for x in h.iter_mut() {
                *x *= s;
            }
        }
        self
    }

    pub fn minus(mut self, other: &FiberJet) -> Self {
        self.axpy(c(-1.0, 0.0), other);
        self
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Poisson bracket; the result carries value and gradient.
    pub fn poisson(&self, g: &FiberJet) -> FiberJet {
        let nn = self.grad.len();
        let n = nn / 2;
        let mut out = FiberJet::zero(n, false);
        let fu = &self.grad[..n];
        let fd = &self.grad[n..];
        let gu = &g.grad[..n];
        let gd = &g.grad[n..];
        out.val = poisson(fu, fd, gu, gd);
        if let (Some(fh), Some(gh)) = (&self.hess, &g.hess) {
            for mm in 0..nn {
                let mut s = c(0.0, 0.0);
                for k in 0..n {
                    s += fh[k * nn + mm] * gd[k] + fu[k] * gh[(n + k) * nn + mm]
                        - fh[(n + k) * nn + mm] * gu[k]
                        - fd[k] * gh[k * nn + mm];
                }
                out.grad[mm] = s;
            }
        } else {
            for x in out.grad.iter_mut() {
                *x = c(f64::NAN, f64::NAN);
            }
        }
        out
    }
}

/// `ν_ī f = ½(∂_{φ^i} f − τ̄_ij ∂_{φ_j} f)` (or with `τ` when `holo`).
pub(crate) fn nu_first(t: &DerivTable, jet: &ChartJet, i: usize, holo: bool) -> FiberJet {
    let n = jet.n();
    let mut out = FiberJet::first(t, Var::Up(i));
    for j in 0..n {
        let tij = if holo { jet.tau[(i, j)] } else { jet.tau[(i, j)].conj() };
        out.axpy(-tij, &FiberJet::first(t, Var::Dn(j)));
    }
    out.scaled(c(0.5, 0.0))
}

/// `ν ∘ ∂_a` applied to `f`: `½(∂_{φ^i} − τ_ij ∂_{φ_j}) ∂_a f`.
fn nu_of_second(t: &DerivTable, jet: &ChartJet, i: usize, holo: bool, a: Var) -> FiberJet {
    let n = jet.n();
    let mut out = FiberJet::second(t, Var::Up(i), a);
    for j in 0..n {
        let tij = if holo { jet.tau[(i, j)] } else { jet.tau[(i, j)].conj() };
        out.axpy(-tij, &FiberJet::second(t, Var::Dn(j), a));
    }
    out.scaled(c(0.5, 0.0))
}

/// `ν_i ν_j̄ f` (both base-constant along the fiber).
fn nu_nubar(t: &DerivTable, jet: &ChartJet, i: usize, j: usize) -> FiberJet {
    let n = jet.n();
    let mut out = nu_of_second(t, jet, i, true, Var::Up(j));
    for l in 0..n {
        out.axpy(-jet.tau[(j, l)].conj(), &nu_of_second(t, jet, i, true, Var::Dn(l)));
    }
    out.scaled(c(0.5, 0.0))
}

/// Residuals of the compatibility, descent and Plebański-type equations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlebanskiReport {
    /// `max |{ν_ī J, ν_j̄ J}|`.
    pub compcond: f64,
    /// Fiber gradients of `{H_iJ,H_jJ}`, `{ν_īJ,ν_j̄J}`, `{H_iJ,ν_j̄J}`.
    pub descent: [f64; 3],
    /// Fiber gradients of LHS − RHS for both equations.
    pub plebanski_like: [f64; 2],
    /// `J_{Z^iφ^j} − J_{Z^jφ^i}` and `J_{Z^iZ̄^j} + π² J_{φ^iφ^j}`.
    pub linear: Option<[f64; 2]>,
}

impl PlebanskiReport {
    pub fn max(&self) -> f64 {
        let mut m = self.compcond;
        for x in self.descent.iter().chain(&self.plebanski_like) {
            m = m.max(*x);
        }
        if let Some(l) = self.linear {
            m = m.max(l[0]).max(l[1]);
        }
        m
    }
}

pub fn plebanski_residuals(p: &JoyceProvider, pt: &ChartPoint, jet: &ChartJet) -> Result<PlebanskiReport> {
    let n = jet.n();
    let t = j_partials(p, pt, jet, 3)?;
    let tb = t.conj();
    let k = t.sub(&tb);
    let mut rep = PlebanskiReport::default();
    let four_pi2 = c(4.0 * PI * PI, 0.0);
    for i in 0..n {
        for j in 0..n {
            let hi = FiberJet::first(&t, Var::Z(i));
            let hj = FiberJet::first(&t, Var::Z(j));
            let nbi = nu_first(&t, jet, i, false);
            let nbj = nu_first(&t, jet, j, false);
            let cc = nbi.poisson(&nbj);
            rep.compcond = rep.compcond.max(cc.val.norm());
            rep.descent[0] = rep.descent[0].max(hi.poisson(&hj).grad_norm());
            rep.descent[1] = rep.descent[1].max(cc.grad_norm());
            rep.descent[2] = rep.descent[2].max(hi.poisson(&nbj).grad_norm());

            // ν_X(H_Y K) − ν_Y(H_X K) = {ν_Y J̄, H_X J} − {ν_X J̄, H_Y J}
            let lhs1 = nu_of_second(&k, jet, i, true, Var::Z(j))
                .minus(&nu_of_second(&k, jet, j, true, Var::Z(i)));
            let nui_b = nu_first(&tb, jet, i, true);
            let nuj_b = nu_first(&tb, jet, j, true);
            let rhs1 = nuj_b.poisson(&hi).minus(&nui_b.poisson(&hj));
            rep.plebanski_like[0] = rep.plebanski_like[0].max(lhs1.minus(&rhs1).grad_norm());

            // H_X H_Ȳ K + 4π² ν_X ν_Ȳ K = {H_X J, H_Ȳ J̄} − 4π² {ν_X J̄, ν_Ȳ J}
            let mut lhs2 = FiberJet::second(&k, Var::Z(i), Var::Zb(j));
            lhs2.axpy(four_pi2, &nu_nubar(&k, jet, i, j));
            let hbj_b = FiberJet::first(&tb, Var::Zb(j));
            let rhs2 = hi
                .poisson(&hbj_b)
                .minus(&nui_b.poisson(&nbj).scaled(four_pi2));
            rep.plebanski_like[1] = rep.plebanski_like[1].max(lhs2.minus(&rhs2).grad_norm());
        }
    }
    if matches!(p, JoyceProvider::UncoupledBps { .. }) {
        let mut lin = [0.0f64; 2];
        for i in 0..n {
            for j in 0..n {
                lin[0] = lin[0].max((t.d2(Var::Z(i), Var::Up(j)) - t.d2(Var::Z(j), Var::Up(i))).norm());
                lin[1] = lin[1].max(
                    (t.d2(Var::Z(i), Var::Zb(j)) + t.d2(Var::Up(i), Var::Up(j)) * (PI * PI)).norm(),
                );
            }
        }
        rep.linear = Some(lin);
    }
    Ok(rep)
}

/// Series `J` of one `±γ` pair against its dilogarithm ray representation.
#[derive(Debug, Clone, PartialEq)]
pub struct RayCheck {
    pub charge: Charge,
    pub series: Complex64,
    pub ray: Complex64,
}

impl RayCheck {
    pub fn residual(&self) -> f64 {
        (self.series - self.ray).norm()
    }
}

/// Compares, per support pair, the Bessel series with
/// `(1/4πi) Ω(γ) (∫_{ℓ_γ} + ∫_{ℓ_{−γ}}) Li₂(X)`.
pub fn ray_crosscheck(p: &JoyceProvider, pt: &ChartPoint, jet: &ChartJet) -> Result<Vec<RayCheck>> {
    let JoyceProvider::UncoupledBps {
        bps,
        tail_tol,
        support_floor,
    } = p
    else {
        return Err(Error::Domain("the ray representation needs BPS data".into()));
    };
    let mut out = Vec::new();
    for (g, om) in bps.pairs() {
        let single = make_bps_structure(bps.n(), &[(g.clone(), *om)])?;
        let sp = JoyceProvider::UncoupledBps {
            bps: single,
            tail_tol: *tail_tol,
            support_floor: *support_floor,
        };
        let series = j_eval(&sp, pt, jet)?.value;
        let mut ray = c(0.0, 0.0);
        for h in [g.clone(), g.neg()] {
            let (zg, _) = central_charge(bps, jet, &h);
            ray += ray_integral_dilog(&RayIntegralSpec::new(zg, h.phase(&pt.phi_up))?)?;
        }
        let om = om.to_f64().unwrap_or(f64::NAN);
        out.push(RayCheck {
            charge: g.clone(),
            series,
            ray: ray * om / c(0.0, 4.0 * PI),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ask::{jet, parse_prepotential, Prepotential};
    use crate::bps::{make_bps_structure, Charge};
    use crate::special::bessel_k;
    use num_rational::Rational64;

    fn ov(tail: f64) -> JoyceProvider {
        let b = make_bps_structure(1, &[(Charge::magnetic(vec![1]), Rational64::from_integer(1))]).unwrap();
        JoyceProvider::uncoupled(b, tail).unwrap()
    }

    fn pt1(z: Complex64, up: f64, dn: f64) -> ChartPoint {
        ChartPoint::new(vec![z], vec![up], vec![dn]).unwrap()
    }

    #[test]
    fn zero_provider_is_identically_zero() {
        let f = Prepotential::cubic();
        let p = pt1(c(0.2, 1.0), 0.3, 0.4);
        let j = jet(&f, &p.z).unwrap();
        let t = j_partials(&JoyceProvider::Zero, &p, &j, 3).unwrap();
        assert_eq!(t.val, c(0.0, 0.0));
        assert!(t.d3.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn ov_value_matches_series() {
        let f = Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap();
        let p = pt1(c(1.0, 0.0), 0.0, 0.0);
        let j = jet(&f, &p.z).unwrap();
        let val = j_eval(&ov(1e-14), &p, &j).unwrap();
        let oracle: f64 = (1..40)
            .map(|n| bessel_k(0, 2.0 * PI * n as f64).unwrap() / (n * n) as f64)
            .sum();
        assert!((val.value - c(0.0, -oracle / PI)).norm() < 1e-15);
        assert_eq!(val.value.re, 0.0);
    }

    #[test]
    fn tail_tol_range_is_enforced() {
        let b = make_bps_structure(1, &[(Charge::magnetic(vec![1]), Rational64::from_integer(1))]).unwrap();
        assert!(JoyceProvider::uncoupled(b.clone(), 1e-5).is_err());
        assert!(JoyceProvider::uncoupled(b, 0.0).is_err());
    }

    #[test]
    fn vertical_ham_and_bracket() {
        let one = [c(1.0, 0.0)];
        let zero = [c(0.0, 0.0)];
        let hf = vertical_ham(&one, &zero);
        let hg = vertical_ham(&zero, &one);
        assert_eq!(hf[3], c(1.0, 0.0));
        assert_eq!(hg[2], c(-1.0, 0.0));
        assert_eq!(omega_nu(&hf, &hg), c(1.0, 0.0));
        assert_eq!(poisson(&one, &zero, &zero, &one), c(1.0, 0.0));
    }

    #[test]
    fn semi_flat_frame() {
        let f = parse_prepotential("(i/2)*Z1^2", 1).unwrap();
        let p = pt1(c(0.3, 0.2), 0.1, 0.2);
        let j = jet(&f, &p.z).unwrap();
        let fr = frame_hv(&JoyceProvider::Zero, &p, &j).unwrap();
        assert_eq!(fr.h[0], unit(4, 0));
        let want = DVector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, PI), c(-PI, 0.0)]);
        assert!(max_abs_v(&(&fr.v[0] - want)) < 1e-15);
        let a = connection_family(&fr, Twistor::Finite(c(0.0, 1.0)), 0, false).unwrap();
        let want = &fr.h[0] - conj_b(&fr.v[0]) / c(0.0, 1.0);
        assert!(max_abs_v(&(a - want)) < 1e-15);
        assert!(matches!(
            connection_family(&fr, Twistor::Finite(c(0.0, 0.0)), 0, true),
            Err(Error::ZeroZeta)
        ));
    }

    #[test]
    fn generic_and_explicit_frames_agree() {
        let f = Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap();
        for (z, ph) in [(c(1.0, 0.0), 0.0), (c(0.3, 0.8), 1.1), (c(-0.5, 1.2), 4.0)] {
            let p = pt1(z, ph, 0.7);
            let j = jet(&f, &p.z).unwrap();
            let t = j_partials(&ov(1e-13), &p, &j, 2).unwrap();
            let fr = frame_from_table(&j, &t);
            let (h, v) = explicit_uncoupled_frame(&j, &t);
            assert!(max_abs_v(&(&fr.h[0] - &h[0])) < 1e-12);
            assert!(max_abs_v(&(&fr.v[0] - &v[0])) < 1e-12);
        }
    }

    #[test]
    fn connection_projects_to_base() {
        let f = Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap();
        let p = pt1(c(0.4, 1.0), 0.5, 0.2);
        let j = jet(&f, &p.z).unwrap();
        let fr = frame_hv(&ov(1e-12), &p, &j).unwrap();
        for z in default_zetas() {
            let a = connection_family(&fr, Twistor::Finite(z), 0, false).unwrap();
            assert_eq!(a[0], c(1.0, 0.0));
            assert_eq!(a[1], c(0.0, 0.0));
            let ab = connection_family(&fr, Twistor::Finite(z), 0, true).unwrap();
            assert!(max_abs_v(&(conj_b(&ab) - &a)) > 1e-3);
        }
        assert_eq!(fr.v[0][0], c(0.0, 0.0));
        assert_eq!(fr.v[0][1], c(0.0, 0.0));
    }

    #[test]
    fn phi_down_partials_vanish() {
        let f = Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap();
        let p = pt1(c(0.4, 1.0), 0.5, 0.2);
        let j = jet(&f, &p.z).unwrap();
        let t = j_partials(&ov(1e-12), &p, &j, 3).unwrap();
        for a in 0..4 {
            let va = Var::from_index(a, 1);
            assert_eq!(t.d2(va, Var::Dn(0)), c(0.0, 0.0));
            for b in 0..4 {
                assert_eq!(t.d3(va, Var::from_index(b, 1), Var::Dn(0)), c(0.0, 0.0));
            }
        }
        assert_eq!(t.d1(Var::Dn(0)), c(0.0, 0.0));
    }

    #[test]
    fn involution_and_periodicity() {
        let f = Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap();
        let p = pt1(c(0.4, 1.0), 0.5, 0.2);
        let j = jet(&f, &p.z).unwrap();
        let a = j_eval(&ov(1e-12), &p, &j).unwrap().value;
        let b = j_eval(&ov(1e-12), &p.fiber_negated(), &j).unwrap().value;
        assert!((a - b).norm() <= 1e-15 * a.norm().max(1e-300));
        let q = pt1(c(0.4, 1.0), 0.5 + 2.0 * PI, 0.2);
        let cval = j_eval(&ov(1e-12), &q, &j).unwrap().value;
        assert!((a - cval).norm() < 1e-15);
    }

    #[test]
    fn zero_provider_plebanski_is_exact() {
        let f = Prepotential::cubic();
        let p = pt1(c(0.2, 1.0), 0.3, 0.4);
        let j = jet(&f, &p.z).unwrap();
        let r = plebanski_residuals(&JoyceProvider::Zero, &p, &j).unwrap();
        assert_eq!(r.max(), 0.0);
        assert!(r.linear.is_none());
    }

    #[test]
    fn ov_plebanski() {
        let f = Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap();
        let p = pt1(c(0.3, 0.9), 0.8, 0.1);
        let j = jet(&f, &p.z).unwrap();
        let r = plebanski_residuals(&ov(1e-12), &p, &j).unwrap();
        assert!(r.compcond < 1e-14);
        let lin = r.linear.unwrap();
        assert!(lin[0] < 1e-11 && lin[1] < 1e-11, "{lin:?}");
        assert!(r.plebanski_like[1] < 1e-11, "{r:?}");
    }

    #[test]
    fn ray_representation_matches_series() {
        let f = Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap();
        for up in [0.0, 2.5] {
            let p = pt1(c(1.0, 0.0), up, 0.0);
            let j = jet(&f, &p.z).unwrap();
            let r = ray_crosscheck(&ov(1e-13), &p, &j).unwrap();
            assert_eq!(r.len(), 1);
            assert!(r[0].residual() < 1e-10, "{:?}", r[0]);
        }
        let p = pt1(c(1.0, 0.0), 0.0, 0.0);
        let j = jet(&f, &p.z).unwrap();
        assert!(ray_crosscheck(&JoyceProvider::Zero, &p, &j).is_err());
    }
}
