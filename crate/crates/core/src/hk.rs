//! Complex structures, Kähler forms and metric on `TM`, with the residuals of
//! the hyperkähler conditions.
//!
//! Tensors are reported in the real basis `R = (∂u | ∂w | ∂φ^ | ∂φ_)` with
//! `Z = u + iw`. A 2-form is stored as the matrix `M[a][b] = ω(e_a, e_b)` and
//! an endomorphism by its columns `L e_a`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::ask::{base_complex_structure, signature, ChartJet};
use crate::bps::central_charge;
use crate::error::{Error, Result};
use crate::joyce::{
    nu_first, omega_nu, ChartPoint, DerivTable, FrameAtPoint, JoyceProvider, Var,
};
use crate::linalg::{bilinear, c, max_abs_c, max_abs_r, max_abs_v, to_complex, wedge, CMat, CVec, RMat};
use crate::model::Model;
use crate::special::bessel_k;

/// All tensors at one point together with pointwise residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorReport {
    pub i1: RMat,
    pub i2: RMat,
    pub i3: RMat,
    pub izeta: Vec<(Complex64, RMat)>,
    pub om1: RMat,
    pub om2: RMat,
    pub om3: RMat,
    pub omega_hol: CMat,
    pub g: RMat,
    pub signature: (usize, usize),
    /// Columns `[h | h̄ | v | v̄]` in basis `R`.
    pub frame_r: CMat,
    /// `ω₃(v_i, v̄_j)`.
    pub v_block: CMat,
    pub residuals: BTreeMap<String, f64>,
}

/// `I₁, I₂, I₃` and `I_ζ` with quaternion diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStructures {
    pub i1: RMat,
    pub i2: RMat,
    pub i3: RMat,
    pub izeta: Vec<(Complex64, RMat)>,
    pub residuals: BTreeMap<String, f64>,
}

/// Twistor samples used by default in reports.
pub fn report_zetas() -> Vec<Complex64> {
    vec![c(0.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.5, 0.5)]
}

fn frame_inverse(e: &CMat, cond: f64) -> Result<CMat> {
    e.clone().try_inverse().ok_or(Error::DegenerateFrame {
        cond,
        max: f64::INFINITY,
    })
}

/// Actions of `I₁, I₂, I₃` on frame coordinates `[h | h̄ | v | v̄]`.
fn frame_actions(n: usize) -> [CMat; 3] {
    let m = 4 * n;
    let mut l1 = CMat::zeros(m, m);
    let mut l2 = CMat::zeros(m, m);
    let mut l3 = CMat::zeros(m, m);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    for k in 0..n {
        let (h, hb, v, vb) = (k, n + k, 2 * n + k, 3 * n + k);
        // I₁: h→v̄, v→−h̄, h̄→v, v̄→−h
        l1[(vb, h)] = one;
        l1[(hb, v)] = -one;
        l1[(v, hb)] = one;
        l1[(h, vb)] = -one;
        // I₂: h→−iv̄, v→ih̄, h̄→iv, v̄→−ih
        l2[(vb, h)] = -i;
        l2[(hb, v)] = i;
        l2[(v, hb)] = i;
        l2[(h, vb)] = -i;
        // I₃: +i on h, v; −i on h̄, v̄
        l3[(h, h)] = i;
        l3[(v, v)] = i;
        l3[(hb, hb)] = -i;
        l3[(vb, vb)] = -i;
    }
    [l1, l2, l3]
}

fn split_real(m: &CMat) -> (RMat, f64) {
    (m.map(|z| z.re), m.iter().fold(0.0, |a, z| a.max(z.im.abs())))
}

/// `(i(ζ̄−ζ)I₁ − (ζ+ζ̄)I₂ + (1−|ζ|²)I₃)/(1+|ζ|²)`.
pub fn stereographic(z: Complex64, i1: &RMat, i2: &RMat, i3: &RMat) -> RMat {
    let r2 = z.norm_sqr();
    let a = (c(0.0, 1.0) * (z.conj() - z)).re;
    let b = -(z + z.conj()).re;
    (i1 * a + i2 * b + i3 * (1.0 - r2)) / (1.0 + r2)
}

/// `I_ζ` from its eigenspaces: `−i` on `span{ζh − v̄, h̄ + ζv}`, `+i` on the
/// conjugate span.
pub fn izeta_eigen(e: &CMat, z: Complex64) -> Result<RMat> {
    let m = e.ncols();
    let n = m / 4;
    let mut basis = CMat::zeros(m, m);
    for k in 0..n {
        let a = e.column(k) * z - e.column(3 * n + k);
        let b = e.column(n + k) + e.column(2 * n + k) * z;
        basis.set_column(k, &a);
        basis.set_column(n + k, &b);
        basis.set_column(2 * n + k, &a.map(|x| x.conj()));
        basis.set_column(3 * n + k, &b.map(|x| x.conj()));
    }
    let mut d = CMat::zeros(m, m);
    for k in 0..m {
        d[(k, k)] = if k < 2 * n { c(0.0, -1.0) } else { c(0.0, 1.0) };
    }
    let inv = basis.clone().try_inverse().ok_or(Error::DegenerateFrame {
        cond: f64::INFINITY,
        max: f64::INFINITY,
    })?;
    Ok((basis * d * inv).map(|x| x.re))
}

pub fn complex_structures(frame: &FrameAtPoint, zetas: &[Complex64]) -> Result<ComplexStructures> {
    let n = frame.n();
    let e = frame.matrix_r();
    let einv = frame_inverse(&e, frame.cond)?;
    let mut reality = 0.0f64;
    let mut mats = Vec::new();
    for lf in frame_actions(n) {
        let (re, im) = split_real(&(&e * lf * &einv));
        reality = reality.max(im);
        mats.push(re);
    }
    let i3 = mats.pop().expect("three");
    let i2 = mats.pop().expect("three");
    let i1 = mats.pop().expect("three");
    let id = RMat::identity(4 * n, 4 * n);
    let quaternion = [
        &i1 * &i2 - &i3,
        &i2 * &i3 - &i1,
        &i3 * &i1 - &i2,
        &i1 * &i2 + &i2 * &i1,
        &i2 * &i3 + &i3 * &i2,
        &i3 * &i1 + &i1 * &i3,
        &i1 * &i1 + &id,
        &i2 * &i2 + &id,
        &i3 * &i3 + &id,
    ]
    .iter()
    .map(max_abs_r)
    .fold(0.0, f64::max);
    let mut twistor = 0.0f64;
    let mut izeta = Vec::new();
    for &z in zetas {
        let a = izeta_eigen(&e, z)?;
        let b = stereographic(z, &i1, &i2, &i3);
        twistor = twistor.max(max_abs_r(&(&a - &b)));
        izeta.push((z, a));
    }
    let mut residuals = BTreeMap::new();
    residuals.insert("reality".to_string(), reality);
    residuals.insert("quaternion".to_string(), quaternion);
    residuals.insert("twistor".to_string(), twistor);
    Ok(ComplexStructures {
        i1,
        i2,
        i3,
        izeta,
        residuals,
    })
}

/// `ω₃(v_i, v̄_j) = −ω^ν(v_i, v̄_j)/4π²`.
pub fn v_block(frame: &FrameAtPoint) -> CMat {
    let n = frame.n();
    let f = frame.matrix_b();
    CMat::from_fn(n, n, |i, j| {
        omega_nu(&f.column(2 * n + i).into_owned(), &f.column(3 * n + j).into_owned()) * (-1.0 / (4.0 * PI * PI))
    })
}

/// `(i/2)Im τ_ij + ν_ī ν_j (J − J̄) − {ν_ī J, ν_j J̄}`.
pub fn keyexp_block(jet: &ChartJet, t: &DerivTable) -> CMat {
    let n = jet.n();
    let tb = t.conj();
    let k = t.sub(&tb);
    let tau = &jet.tau;
    CMat::from_fn(n, n, |i, j| {
        // ν_ī ν_j K = ¼ (∂φ^i − τ̄_il ∂φ_l)(∂φ^j − τ_jm ∂φ_m) K
        let mut nn = k.d2(Var::Up(i), Var::Up(j));
        for l in 0..n {
            nn -= tau[(i, l)].conj() * k.d2(Var::Dn(l), Var::Up(j));
            nn -= tau[(j, l)] * k.d2(Var::Up(i), Var::Dn(l));
            for mm in 0..n {
                nn += tau[(i, l)].conj() * tau[(j, mm)] * k.d2(Var::Dn(l), Var::Dn(mm));
            }
        }
        let a = nu_first(t, jet, i, false);
        let b = nu_first(&tb, jet, j, true);
        let n_up = &a.grad[..n];
        let n_dn = &a.grad[n..];
        let b_up = &b.grad[..n];
        let b_dn = &b.grad[n..];
        let pb = crate::joyce::poisson(n_up, n_dn, b_up, b_dn);
        c(0.0, 0.5 * tau[(i, j)].im) + nn * 0.25 - pb
    })
}

/// Kähler forms, metric and holomorphic symplectic form.
#[derive(Debug, Clone, PartialEq)]
pub struct KahlerForms {
    pub om1: RMat,
    pub om2: RMat,
    pub om3: RMat,
    pub omega_hol: CMat,
    pub g: RMat,
    pub signature: (usize, usize),
    pub v_block: CMat,
    pub residuals: BTreeMap<String, f64>,
}

pub fn kahler_forms(
    frame: &FrameAtPoint,
    jet: &ChartJet,
    t: &DerivTable,
    cs: &ComplexStructures,
) -> Result<KahlerForms> {
    let n = frame.n();
    let m = 4 * n;
    let e = frame.matrix_r();
    let einv = frame_inverse(&e, frame.cond)?;
    let cb = v_block(frame);
    let mut wf = CMat::zeros(m, m);
    for i in 0..n {
        for j in 0..n {
            let v = cb[(i, j)];
            wf[(2 * n + i, 3 * n + j)] = v;
            wf[(3 * n + j, 2 * n + i)] = -v;
            wf[(j, n + i)] = v;
            wf[(n + i, j)] = -v;
        }
    }
    let wr = einv.transpose() * wf * &einv;
    let (om3, reality) = split_real(&wr);
    let g = &om3 * &cs.i3;
    let om1 = cs.i1.transpose() * &g;
    let om2 = cs.i2.transpose() * &g;
    let omega_hol = to_complex(&om1) + to_complex(&om2) * c(0.0, 1.0);

    let mut res = BTreeMap::new();
    res.insert("om3-reality".to_string(), reality);
    let keyexp = keyexp_block(jet, t);
    res.insert("keyexp".to_string(), max_abs_c(&(&keyexp - &cb)));

    let col = |k: usize| -> CVec { e.column(k).into_owned() };
    let mut hol = 0.0f64;
    let mut type20 = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let (hi, hj) = (col(i), col(j));
            let (vi, vj) = (col(2 * n + i), col(2 * n + j));
            let vbi = col(3 * n + i);
            let w3 = to_complex(&om3);
            hol = hol
                .max(bilinear(&omega_hol, &hi, &hj).norm())
                .max(bilinear(&omega_hol, &vi, &vj).norm())
                .max(
                    (bilinear(&omega_hol, &hi, &vj) - c(0.0, 2.0) * bilinear(&w3, &vbi, &vj)).norm(),
                );
        }
        for k in [n + i, 3 * n + i] {
            type20 = type20.max(max_abs_v(&(&omega_hol * col(k))));
        }
    }
    res.insert("holomega3".to_string(), hol);
    res.insert("type20".to_string(), type20);

    let mut herm = 0.0f64;
    for l in [&cs.i1, &cs.i2, &cs.i3] {
        herm = herm.max(max_abs_r(&(&g - l.transpose() * &g * l)));
    }
    res.insert("hermitian".to_string(), herm);
    let anti = [
        max_abs_r(&(&om1 + om1.transpose())),
        max_abs_r(&(&om2 + om2.transpose())),
        max_abs_r(&(&om3 + om3.transpose())),
        max_abs_r(&(&g - g.transpose())),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    res.insert("symmetry".to_string(), anti);
    let sig = signature(&g);
    Ok(KahlerForms {
        om1,
        om2,
        om3,
        omega_hol,
        g,
        signature: sig,
        v_block: cb,
        residuals: res,
    })
}

/// Complex structures and forms in one report.
pub fn tensor_report(
    frame: &FrameAtPoint,
    jet: &ChartJet,
    t: &DerivTable,
    zetas: &[Complex64],
) -> Result<TensorReport> {
    let cs = complex_structures(frame, zetas)?;
    let kf = kahler_forms(frame, jet, t, &cs)?;
    let mut residuals = cs.residuals.clone();
    residuals.extend(kf.residuals);
    Ok(TensorReport {
        i1: cs.i1,
        i2: cs.i2,
        i3: cs.i3,
        izeta: cs.izeta,
        om1: kf.om1,
        om2: kf.om2,
        om3: kf.om3,
        omega_hol: kf.omega_hol,
        g: kf.g,
        signature: kf.signature,
        frame_r: frame.matrix_r(),
        v_block: kf.v_block,
        residuals,
    })
}

/// Exterior-derivative and Appendix-style bracket residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClosednessReport {
    /// `max |dω_k|` over coordinate triples, `k = 1, 2, 3`.
    pub d_omega: [f64; 3],
    /// The four bracket conditions equivalent to closedness.
    pub closedsimp: [f64; 4],
}

impl ClosednessReport {
    pub fn max(&self) -> f64 {
        self.d_omega
            .iter()
            .chain(&self.closedsimp)
            .cloned()
            .fold(0.0, f64::max)
    }
}

fn exterior_derivative(dw: &[RMat]) -> f64 {
    let m = dw.len();
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in a + 1..m {
            for cc in b + 1..m {
                let v = dw[a][(b, cc)] - dw[b][(a, cc)] + dw[cc][(a, b)];
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

pub fn closedness_residuals(model: &Model, pt: &ChartPoint) -> Result<ClosednessReport> {
    let st = model.stencil(pt, |q| model.report(q, &[]))?;
    let m = st.dim();
    let n = m / 4;
    let mut rep = ClosednessReport::default();
    let forms: [fn(&TensorReport) -> RMat; 3] = [|r| r.om1.clone(), |r| r.om2.clone(), |r| r.om3.clone()];
    for (k, get) in forms.iter().enumerate() {
        let s = st.map(get);
        let dw: Vec<RMat> = (0..m).map(|a| s.derivative(a)).collect();
        rep.d_omega[k] = exterior_derivative(&dw);
    }

    let es = st.map(|r| r.frame_r.clone());
    let e = es.center.clone();
    let de: Vec<CMat> = (0..m).map(|a| es.derivative(a)).collect();
    let ff = crate::joyce::FrameField { e: e.clone(), de };
    let cs = st.map(|r| r.v_block.clone());
    let dc: Vec<CMat> = (0..m).map(|a| cs.derivative(a)).collect();
    let w3 = to_complex(&st.center.om3);
    let col = |k: usize| -> CVec { e.column(k).into_owned() };
    // X(c_jk) = Σ_b X^b ∂_b c_jk
    let dir = |x: &CVec, j: usize, k: usize| -> Complex64 { (0..m).map(|b| x[b] * dc[b][(j, k)]).sum() };
    let w = |a: &CVec, b: &CVec| bilinear(&w3, a, b);
    let (h, hb, v, vb) = (0usize, n, 2 * n, 3 * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let r1 = dir(&col(v + i), j, k) - dir(&col(v + j), i, k);
                let r2 = dir(&col(h + j), i, k) - w(&col(v + i), &ff.bracket_cols(h + j, vb + k));
                let r3 = w(&ff.bracket_cols(v + i, hb + k), &col(v + j))
                    - w(&ff.bracket_cols(v + j, hb + k), &col(v + i));
                let r4 = dir(&col(v + i), j, k) - w(&col(v + i), &ff.bracket_cols(v + j, vb + k));
                for (slot, r) in rep.closedsimp.iter_mut().zip([r1, r2, r3, r4]) {
                    *slot = slot.max(r.norm());
                }
            }
        }
    }
    Ok(rep)
}

/// `max ‖N(e_a, e_b)‖` for `I_k`, `k ∈ {1, 2, 3}`.
pub fn nijenhuis_residual(model: &Model, pt: &ChartPoint, k: usize) -> Result<f64> {
    if !(1..=3).contains(&k) {
        return Err(Error::Dimension(format!("no complex structure I{k}")));
    }
    let st = model.stencil(pt, |q| {
        let f = model.frame(q)?;
        let cs = complex_structures(&f, &[])?;
        Ok(match k {
            1 => cs.i1,
            2 => cs.i2,
            _ => cs.i3,
        })
    })?;
    let l = st.center.clone();
    let m = st.dim();
    let dl: Vec<RMat> = (0..m).map(|b| st.derivative(b)).collect();
    let mut worst = 0.0f64;
    for a in 0..m {
        for b in a + 1..m {
            let ua = l.column(a).into_owned();
            let ub = l.column(b).into_owned();
            let mut br = DVector::<f64>::zeros(m);
            for d in 0..m {
                br += dl[d].column(b) * ua[d] - dl[d].column(a) * ub[d];
            }
            let nab = br + &l * dl[b].column(a) - &l * dl[a].column(b);
            worst = worst.max(nab.amax());
        }
    }
    Ok(worst)
}

/// `V_γ` and the coefficient `a_γ` with `A_γ = a_γ (dZ_γ/Z_γ − dZ̄_γ/Z̄_γ)`.
fn v_and_a(r: f64, phig: f64) -> Result<(Complex64, Complex64)> {
    let mut v = c(0.0, 0.0);
    let mut a = c(0.0, 0.0);
    for nn in 1..10_000 {
        let nf = nn as f64;
        let x = 2.0 * PI * nf * r;
        let ph = Complex64::from_polar(1.0, nf * phig);
        v += ph * bessel_k(0, x)?;
        a += ph * (r * bessel_k(1, x)?);
        if x > 45.0 {
            break;
        }
    }
    Ok((v / (2.0 * PI), a * (-1.0 / (4.0 * PI))))
}

/// Which chart the closed forms are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// `(u, w, φ^i, φ_i)` on `TM`.
    Tangent,
    /// `(u, w, θ_i, θ^i)` on `T*M`.
    Cotangent,
}

/// `ω₃` and `Ω` written directly from their coordinate expressions.
pub fn closed_forms(
    provider: &JoyceProvider,
    pt: &ChartPoint,
    jet: &ChartJet,
    chart: Chart,
) -> Result<(CMat, CMat)> {
    let n = jet.n();
    let m = 4 * n;
    let e = |k: usize, s: Complex64| -> CVec {
        let mut v = DVector::zeros(m);
        v[k] = s;
        v
    };
    let one = c(1.0, 0.0);
    let dz = |i: usize| e(i, one) + e(n + i, c(0.0, 1.0));
    let dzb = |i: usize| e(i, one) - e(n + i, c(0.0, 1.0));
    // fiber covectors: (dφ^i, dφ_i) or (dθ^i, dθ_i)
    let (d_up, d_dn): (Vec<CVec>, Vec<CVec>) = match chart {
        Chart::Tangent => ((0..n).map(|i| e(2 * n + i, one)).collect(), (0..n).map(|i| e(3 * n + i, one)).collect()),
        Chart::Cotangent => ((0..n).map(|i| e(3 * n + i, one)).collect(), (0..n).map(|i| e(2 * n + i, one)).collect()),
    };
    let tau = &jet.tau;
    let mut om3 = CMat::zeros(m, m);
    let mut omega = CMat::zeros(m, m);
    let (fib_sign, hol_sign) = match chart {
        Chart::Tangent => (1.0, -1.0),
        Chart::Cotangent => (-1.0, 1.0),
    };
    for i in 0..n {
        for j in 0..n {
            om3 += wedge(&dz(i), &dzb(j)) * c(0.0, 0.5 * tau[(i, j)].im);
        }
        om3 += wedge(&d_dn[i], &d_up[i]) * c(fib_sign / (4.0 * PI * PI), 0.0);
        let mut rhs = d_dn[i].clone();
        for j in 0..n {
            rhs += &d_up[j] * (tau[(i, j)] * (-hol_sign));
        }
        // TM: −(1/2π) dZ∧(dφ_i + τ dφ^j); T*M: (1/2π) dZ∧(dθ_i − τ dθ^j)
        omega += wedge(&dz(i), &rhs) * c(hol_sign / (2.0 * PI), 0.0);
    }
    if let JoyceProvider::UncoupledBps { bps, .. } = provider {
        for (g, o) in bps.support() {
            let o = o.to_f64().unwrap_or(f64::NAN);
            let (zg, k) = central_charge(bps, jet, &g);
            let phig = g.phase(&pt.phi_up);
            let (vg, ag) = v_and_a(zg.norm(), phig)?;
            let mut dzg = DVector::zeros(m);
            let mut dphig = DVector::zeros(m);
            for j in 0..n {
                dzg += dz(j) * c(k[j] as f64, 0.0);
                dphig += &d_up[j] * c(k[j] as f64, 0.0);
            }
            let dzgb = dzg.map(|x| x.conj());
            let a1 = (&dzg / zg - &dzgb / zg.conj()) * ag;
            om3 += (wedge(&dzg, &dzgb) * (c(0.0, 0.5) * vg) + wedge(&dphig, &a1) * c(1.0 / (2.0 * PI), 0.0)) * c(o, 0.0);
            omega += (wedge(&dzg, &a1) + wedge(&dphig, &dzg) * (c(0.0, 1.0 / (2.0 * PI)) * vg)) * c(o, 0.0);
        }
    }
    Ok((om3, omega))
}

/// Differences between frame-assembled and closed-form tensors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CrosscheckReport {
    pub om3: f64,
    pub omega: f64,
    pub om3_cotangent: f64,
    pub omega_cotangent: f64,
}

impl CrosscheckReport {
    pub fn max(&self) -> f64 {
        self.om3
            .max(self.omega)
            .max(self.om3_cotangent)
            .max(self.omega_cotangent)
    }
}

pub fn closed_form_crosscheck(model: &Model, pt: &ChartPoint) -> Result<CrosscheckReport> {
    let j = model.jet(&pt.z)?;
    let rep = model.report(pt, &[])?;
    let (w3, om) = closed_forms(&model.provider, pt, &j, Chart::Tangent)?;
    let (w3c, omc) = closed_forms(&model.provider, pt, &j, Chart::Cotangent)?;
    let push = cotangent_pushforward(&rep);
    Ok(CrosscheckReport {
        om3: max_abs_c(&(to_complex(&rep.om3) - w3)),
        omega: max_abs_c(&(&rep.omega_hol - om)),
        om3_cotangent: max_abs_c(&(to_complex(&push.om3) - w3c)),
        omega_cotangent: max_abs_c(&(&push.omega_hol - omc)),
    })
}

/// Jacobian of `(u, w, φ^, φ_) ↦ (u, w, θ_ = −φ_, θ^ = φ^)`.
pub fn cotangent_jacobian(n: usize) -> RMat {
    let mut d = RMat::zeros(4 * n, 4 * n);
    for i in 0..2 * n {
        d[(i, i)] = 1.0;
    }
    for i in 0..n {
        d[(2 * n + i, 3 * n + i)] = -1.0;
        d[(3 * n + i, 2 * n + i)] = 1.0;
    }
    d
}

fn transform(report: &TensorReport, d: &RMat) -> TensorReport {
    let dinv = d.clone().try_inverse().expect("signed permutation");
    let form = |w: &RMat| dinv.transpose() * w * &dinv;
    let endo = |l: &RMat| d * l * &dinv;
    let dc = to_complex(d);
    let dinvc = to_complex(&dinv);
    TensorReport {
        i1: endo(&report.i1),
        i2: endo(&report.i2),
        i3: endo(&report.i3),
        izeta: report.izeta.iter().map(|(z, l)| (*z, endo(l))).collect(),
        om1: form(&report.om1),
        om2: form(&report.om2),
        om3: form(&report.om3),
        omega_hol: dinvc.transpose() * &report.omega_hol * &dinvc,
        g: form(&report.g),
        signature: report.signature,
        frame_r: dc * &report.frame_r,
        v_block: report.v_block.clone(),
        residuals: report.residuals.clone(),
    }
}

/// Rewrites every tensor in the chart `(u, w, θ_i, θ^i)` of `T*M`.
pub fn cotangent_pushforward(report: &TensorReport) -> TensorReport {
    let n = report.i1.nrows() / 4;
    transform(report, &cotangent_jacobian(n))
}

/// Inverse of [`cotangent_pushforward`].
pub fn cotangent_pullback(report: &TensorReport) -> TensorReport {
    let n = report.i1.nrows() / 4;
    let d = cotangent_jacobian(n).try_inverse().expect("signed permutation");
    transform(report, &d)
}

/// `dπ ∘ I₃ − I ∘ dπ`.
pub fn projection_defect(i3: &RMat) -> f64 {
    let m = i3.nrows();
    let n = m / 4;
    let mut dpi = RMat::zeros(2 * n, m);
    for i in 0..2 * n {
        dpi[(i, i)] = 1.0;
    }
    max_abs_r(&(&dpi * i3 - base_complex_structure(n) * &dpi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ask::{parse_prepotential, Prepotential};
    use crate::bps::{make_bps_structure, Charge};
    use num_rational::Rational64;

    fn ov_model() -> Model {
        let b = make_bps_structure(1, &[(Charge::magnetic(vec![1]), Rational64::from_integer(1))]).unwrap();
        Model::new(
            Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap(),
            JoyceProvider::uncoupled(b, 1e-12).unwrap(),
        )
        .unwrap()
    }

    fn pt(z: Complex64, up: f64, dn: f64) -> ChartPoint {
        ChartPoint::new(vec![z], vec![up], vec![dn]).unwrap()
    }

    #[test]
    fn semi_flat_forms_match_closed_form() {
        let f = parse_prepotential("(i/2)*Z1^2", 1).unwrap();
        let m = Model::new(f, JoyceProvider::Zero).unwrap();
        let r = m.report(&pt(c(0.3, 0.4), 0.2, 0.1), &report_zetas()).unwrap();
        let mut want = RMat::zeros(4, 4);
        want[(0, 1)] = 1.0;
        want[(1, 0)] = -1.0;
        want[(3, 2)] = 1.0 / (4.0 * PI * PI);
        want[(2, 3)] = -1.0 / (4.0 * PI * PI);
        assert!(max_abs_r(&(&r.om3 - want)) < 1e-15);
        assert_eq!(r.signature, (4, 0));
        for (k, v) in &r.residuals {
            assert!(*v < 1e-12, "{k} = {v}");
        }
        assert!(max_abs_r(&(&r.izeta[0].1 - &r.i3)) < 1e-12);
        assert!(max_abs_r(&(&r.izeta[1].1 - &r.i1)) < 1e-12);
        assert!(max_abs_r(&(&r.izeta[2].1 - &r.i2)) < 1e-12);
    }

    #[test]
    fn ov_pointwise_identities() {
        let m = ov_model();
        let r = m.report(&pt(c(0.2, 0.9), 0.4, 1.3), &report_zetas()).unwrap();
        for (k, v) in &r.residuals {
            assert!(*v < 1e-10, "{k} = {v}");
        }
        assert_eq!(r.signature.0 % 4, 0);
        assert_eq!(r.signature.1 % 4, 0);
        assert!(projection_defect(&r.i3) < 1e-12);
    }

    #[test]
    fn ov_closed_forms_agree() {
        let m = ov_model();
        let x = closed_form_crosscheck(&m, &pt(c(1.0, 0.5), 1.0, 0.0)).unwrap();
        assert!(x.max() < 1e-10, "{x:?}");
    }

    #[test]
    fn pushforward_round_trip() {
        let m = ov_model();
        let r = m.report(&pt(c(0.2, 0.9), 0.4, 1.3), &report_zetas()).unwrap();
        let back = cotangent_pullback(&cotangent_pushforward(&r));
        assert!(max_abs_r(&(&back.om3 - &r.om3)) < 1e-14);
        assert!(max_abs_c(&(&back.omega_hol - &r.omega_hol)) < 1e-14);
        assert!(max_abs_r(&(&back.i1 - &r.i1)) < 1e-14);
    }

    #[test]
    fn constant_case_has_no_derivatives() {
        let f = parse_prepotential("(i/2)*Z1^2", 1).unwrap();
        let m = Model::new(f, JoyceProvider::Zero).unwrap();
        let p = pt(c(0.3, 0.4), 0.2, 0.1);
        assert!(closedness_residuals(&m, &p).unwrap().max() < 1e-12);
        for k in 1..=3 {
            assert!(nijenhuis_residual(&m, &p, k).unwrap() < 1e-12);
        }
    }
}
