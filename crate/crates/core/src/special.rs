//! Modified Bessel functions of the second kind, the dilogarithm, and the ray
//! integral `∫ dζ/ζ Li₂(X_γ(ζ))`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Beyond this argument `e^{-x}` underflows a double.
pub const EXP_RANGE: f64 = 745.0;

/// Value of `K_ν(x)` with an underflow flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselValue {
    pub value: f64,
    /// `e^x K_ν(x)`, always finite for `x > 0`.
    pub scaled: f64,
    pub underflow: bool,
}

fn k01_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let lg = (0.5 * x).ln();
    // K0 = -(ln(x/2)+γ) I0 + Σ y^k/(k!)² H_k
    let mut t = 1.0;
    let mut i0 = 1.0;
    let mut s0 = 0.0;
    let mut hk = 0.0;
    // I1 = (x/2) Σ y^k/(k!(k+1)!), and the ψ-sum for K1
    let mut u = 1.0;
    let mut i1s = 1.0;
    let mut psi_k1 = -EULER_GAMMA; // ψ(k+1)
    let mut psi_k2 = 1.0 - EULER_GAMMA; // ψ(k+2)
    let mut s1 = psi_k1 + psi_k2;
    for k in 1..60 {
        let kf = k as f64;
        t *= y / (kf * kf);
        hk += 1.0 / kf;
        i0 += t;
        s0 += t * hk;
        u *= y / (kf * (kf + 1.0));
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        i1s += u;
        s1 += u * (psi_k1 + psi_k2);
        if t < 1e-18 * i0 && u < 1e-18 * i1s {
            break;
        }
    }
    let k0 = -(lg + EULER_GAMMA) * i0 + s0;
    let i1 = 0.5 * x * i1s;
    let k1 = 1.0 / x + lg * i1 - 0.25 * x * s1;
    (k0, k1)
}

/// Steed's continued fraction for `(e^x K0, e^x K1)`, valid for `x ≳ 2`.
fn k01_scaled_cf(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..100_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// `e^x K0(x)` and `e^x K1(x)`.
pub fn bessel_k01_scaled(x: f64) -> Result<(f64, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::NonPositiveArgument(x));
    }
    if x <= 2.0 {
        let (k0, k1) = k01_series(x);
        let e = x.exp();
        Ok((k0 * e, k1 * e))
    } else {
        Ok(k01_scaled_cf(x))
    }
}

/// `K_ν(x)` for integer `ν ≥ 0`, with underflow reporting.
pub fn bessel_k_flagged(order: u32, x: f64) -> Result<BesselValue> {
    let (s0, s1) = bessel_k01_scaled(x)?;
    let scaled = match order {
        0 => s0,
        1 => s1,
        _ => {
            let (mut km, mut k) = (s0, s1);
            for nu in 1..order {
                let kp = km + 2.0 * nu as f64 / x * k;
                km = k;
                k = kp;
            }
            k
        }
    };
    if x > EXP_RANGE {
        return Ok(BesselValue {
            value: 0.0,
            scaled,
            underflow: true,
        });
    }
    let value = if x <= 2.0 {
        let (k0, k1) = k01_series(x);
        match order {
            0 => k0,
            1 => k1,
            _ => scaled * (-x).exp(),
        }
    } else {
        scaled * (-x).exp()
    };
    Ok(BesselValue {
        value,
        scaled,
        underflow: value == 0.0,
    })
}

/// `K_ν(x)`; orders above 1 use the upward recurrence.
pub fn bessel_k(order: u32, x: f64) -> Result<f64> {
    Ok(bessel_k_flagged(order, x)?.value)
}

/// `K0..K3` at one argument.
pub fn bessel_k0123(x: f64) -> Result<[f64; 4]> {
    let (k0, k1) = if x <= 2.0 && x > 0.0 {
        k01_series(x)
    } else {
        let (s0, s1) = bessel_k01_scaled(x)?;
        let e = (-x).exp();
        (s0 * e, s1 * e)
    };
    let k2 = k0 + 2.0 / x * k1;
    let k3 = k1 + 4.0 / x * k2;
    Ok([k0, k1, k2, k3])
}

const BERNOULLI: [f64; 31] = [
    1.0,
    -0.5,
    1.0 / 6.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    1.0 / 42.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    5.0 / 66.0,
    0.0,
    -691.0 / 2730.0,
    0.0,
    7.0 / 6.0,
    0.0,
    -3617.0 / 510.0,
    0.0,
    43867.0 / 798.0,
    0.0,
    -174611.0 / 330.0,
    0.0,
    854513.0 / 138.0,
    0.0,
    -236364091.0 / 2730.0,
    0.0,
    8553103.0 / 6.0,
    0.0,
    -23749461029.0 / 870.0,
    0.0,
    8615841276005.0 / 14322.0,
];

fn dilog_power_series(z: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut p = z;
    for k in 1..200 {
        let term = p / (k * k) as f64;
        sum += term;
        if term.norm() < 1e-17 * sum.norm().max(1e-300) {
            break;
        }
        p *= z;
    }
    sum
}

fn dilog_bernoulli(w: Complex64) -> Complex64 {
    let u = -(Complex64::new(1.0, 0.0) - w).ln();
    let mut p = u;
    let mut sum = Complex64::new(0.0, 0.0);
    for (n, b) in BERNOULLI.iter().enumerate() {
        sum += p * *b;
        p *= u / (n as f64 + 2.0);
    }
    sum
}

/// Principal branch of `Li₂(z)` on the closed unit disk.
pub fn dilog(z: Complex64) -> Result<Complex64> {
    let r = z.norm();
    if !(r <= 1.0 + 1e-12) {
        return Err(Error::OutOfDomain(r));
    }
    if z == Complex64::new(1.0, 0.0) {
        return Ok(Complex64::new(PI * PI / 6.0, 0.0));
    }
    if r <= 0.5 {
        return Ok(dilog_power_series(z));
    }
    if z.re > 0.5 {
        let one = Complex64::new(1.0, 0.0);
        let w = one - z;
        let prod = if w.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            z.ln() * w.ln()
        };
        let rest = if w.norm() <= 0.5 {
            dilog_power_series(w)
        } else {
            dilog_bernoulli(w)
        };
        return Ok(Complex64::new(PI * PI / 6.0, 0.0) - prod - rest);
    }
    Ok(dilog_bernoulli(z))
}

/// Parameters of the ray integral for one charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayIntegralSpec {
    pub zg: Complex64,
    pub phig: f64,
    pub t_cutoff: f64,
    /// Gauss–Legendre nodes per half-interval, rounded up to whole panels.
    pub quad_points: usize,
}

/// Nodes per Gauss–Legendre panel.
pub const PANEL_NODES: usize = 16;

impl RayIntegralSpec {
    /// Uses the default cutoff `2π|Z|cosh t = 42` and 257 points per half.
    pub fn new(zg: Complex64, phig: f64) -> Result<Self> {
        Ok(RayIntegralSpec {
            zg,
            phig,
            t_cutoff: default_t_cutoff(zg)?,
            quad_points: 257,
        })
    }
}

/// Solves `2π|Z|cosh t = 42`, falling back to `1` when `|Z|` is large.
pub fn default_t_cutoff(zg: Complex64) -> Result<f64> {
    let r = zg.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::NonPositiveArgument(r));
    }
    let arg = 42.0 / (2.0 * PI * r);
    Ok(if arg > 1.0 { arg.acosh() } else { 1.0 })
}

fn gauss_legendre_16() -> &'static [(f64, f64); PANEL_NODES] {
    static NODES: OnceLock<[(f64, f64); PANEL_NODES]> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = PANEL_NODES;
        let mut out = [(0.0, 0.0); PANEL_NODES];
        for i in 0..n / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            out[i] = (-x, w);
            out[n - 1 - i] = (x, w);
        }
        out
    })
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub fn integrate_gl<F: FnMut(f64) -> Result<Complex64>>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
) -> Result<Complex64> {
    let nodes = gauss_legendre_16();
    let width = (b - a) / panels as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + width * p as f64;
        let mid = lo + 0.5 * width;
        let mut part = Complex64::new(0.0, 0.0);
        for &(x, w) in nodes.iter() {
            part += f(mid + 0.5 * width * x)? * w;
        }
        sum += part * (0.5 * width);
    }
    Ok(sum)
}

/// `∫ Li₂(X_γ) dt` along the ray `ζ = −e^t Z_γ/|Z_γ|`, where
/// `X_γ = exp(−2π|Z_γ|cosh t + iφ_γ)`.
pub fn ray_integral_dilog(spec: &RayIntegralSpec) -> Result<Complex64> {
    let r = spec.zg.norm();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::NonPositiveArgument(r));
    }
    if !(spec.t_cutoff > 0.0) || spec.quad_points == 0 {
        return Err(Error::Domain("ray integral needs a positive cutoff and node count".into()));
    }
    let phase = Complex64::from_polar(1.0, spec.phig.rem_euclid(2.0 * PI));
    let integrand = |t: f64| {
        let x = phase * (-2.0 * PI * r * t.cosh()).exp();
        debug_assert!(x.norm() < 1.0);
        dilog(x)
    };
    let panels = spec.quad_points.div_ceil(PANEL_NODES);
    let left = integrate_gl(integrand, -spec.t_cutoff, 0.0, panels)?;
    let right = integrate_gl(integrand, 0.0, spec.t_cutoff, panels)?;
    Ok(left + right)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn reference_values() {
        let k0 = bessel_k(0, 1.0).unwrap();
        let k1 = bessel_k(1, 1.0).unwrap();
        assert!((k0 - 0.421_024_438_240_708_3).abs() < 1e-15);
        assert!((k1 - 0.601_907_230_197_234_6).abs() < 1e-15);
    }

    #[test]
    fn crossover_is_continuous() {
        let (s0, s1) = k01_series(2.0);
        let (c0, c1) = k01_scaled_cf(2.0);
        let e = (-2.0f64).exp();
        assert!((s0 - c0 * e).abs() < 1e-14 * s0);
        assert!((s1 - c1 * e).abs() < 1e-14 * s1);
    }

    #[test]
    fn derivative_identity() {
        let h = 1e-5;
        let d = (bessel_k(0, 2.0 + h).unwrap() - bessel_k(0, 2.0 - h).unwrap()) / (2.0 * h);
        assert!((d + bessel_k(1, 2.0).unwrap()).abs() < 1e-9);
        for x in [0.5, 1.0, 2.0, 5.0] {
            let f = |t: f64| t * bessel_k(1, t).unwrap();
            let h = 1e-5;
            let d = (f(x + h) - f(x - h)) / (2.0 * h);
            assert!((d + x * bessel_k(0, x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn underflow_and_domain() {
        let v = bessel_k_flagged(0, 800.0).unwrap();
        assert!(v.underflow);
        assert_eq!(v.value, 0.0);
        assert!(v.scaled > 0.0);
        assert!(matches!(bessel_k(0, 0.0), Err(Error::NonPositiveArgument(_))));
        assert!(matches!(bessel_k(1, -1.0), Err(Error::NonPositiveArgument(_))));
    }

    #[test]
    fn dilog_special_values() {
        assert_eq!(dilog(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!((dilog(c(1.0, 0.0)).unwrap().re - PI * PI / 6.0).abs() < 1e-15);
        assert!((dilog(c(-1.0, 0.0)).unwrap().re + PI * PI / 12.0).abs() < 1e-14);
        assert!((dilog(c(0.5, 0.0)).unwrap().re - (PI * PI / 12.0 - 0.5 * 2f64.ln().powi(2))).abs() < 1e-15);
        assert!(matches!(dilog(c(1.1, 0.0)), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn dilog_branches_agree_on_overlap() {
        for z in [c(0.45, 0.1), c(-0.3, 0.35), c(0.2, -0.45)] {
            let a = dilog_power_series(z);
            let b = dilog_bernoulli(z);
            assert!((a - b).norm() < 1e-14, "{z}");
        }
    }

    #[test]
    fn gl_nodes_integrate_polynomials() {
        let v = integrate_gl(|t| Ok(c(t.powi(30), 0.0)), -1.0, 1.0, 1).unwrap();
        assert!((v.re - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn ray_integral_convergence_and_period() {
        let mut s = RayIntegralSpec::new(c(0.8, 0.6), 0.7).unwrap();
        let a = ray_integral_dilog(&s).unwrap();
        s.quad_points *= 2;
        let b = ray_integral_dilog(&s).unwrap();
        assert!((a - b).norm() < 1e-12);
        s.quad_points /= 2;
        s.phig += 2.0 * PI;
        let p = ray_integral_dilog(&s).unwrap();
        assert!((a - p).norm() < 1e-14);
    }
}
