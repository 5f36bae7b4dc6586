//! Affine special Kähler data derived from a holomorphic prepotential.
//!
//! Real base coordinates are ordered `(u^1..u^n, w^1..w^n)` with
//! `Z^i = u^i + i w^i`.

pub mod expr;

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
pub use expr::{parse, Expr};

/// Which built-in family a prepotential came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogTag {
    Quadratic,
    Cubic,
    OvLog,
    Custom,
}

impl CatalogTag {
    pub fn name(self) -> &'static str {
        match self {
            CatalogTag::Quadratic => "quadratic",
            CatalogTag::Cubic => "cubic",
            CatalogTag::OvLog => "ov-log",
            CatalogTag::Custom => "custom",
        }
    }
}

/// A holomorphic prepotential with its first three derivatives precomputed
/// symbolically.
#[derive(Debug, Clone)]
pub struct Prepotential {
    n: usize,
    expr: Expr,
    tag: CatalogTag,
    grad: Vec<Expr>,
    hess: Vec<Expr>,
    third: Vec<Expr>,
}

fn tri2(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

fn sort3(i: usize, j: usize, k: usize) -> (usize, usize, usize) {
    let mut a = [i, j, k];
    a.sort_unstable();
    (a[0], a[1], a[2])
}

impl Prepotential {
    /// Wraps an expression tree; fails if it references variables beyond `n`.
    pub fn new(expr: Expr, n: usize, tag: CatalogTag) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("n must be at least 1".into()));
        }
        if let Some(k) = expr.max_var() {
            if k >= n {
                return Err(Error::UnknownVariable { index: k + 1, n });
            }
        }
        let grad: Vec<Expr> = (0..n).map(|i| expr.diff(i)).collect();
        let mut hess = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = tri2(i, j);
                hess.push(if i <= j { grad[a].diff(b) } else { Expr::Num(0.0) });
            }
        }
        for i in 0..n {
            for j in 0..i {
                hess[i * n + j] = hess[j * n + i].clone();
            }
        }
        let mut third = vec![Expr::Num(0.0); n * n * n];
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    third[(i * n + j) * n + k] = hess[i * n + j].diff(k);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (a, b, c) = sort3(i, j, k);
                    if (a, b, c) != (i, j, k) {
                        third[(i * n + j) * n + k] = third[(a * n + b) * n + c].clone();
                    }
                }
            }
        }
        Ok(Prepotential {
            n,
            expr,
            tag,
            grad,
            hess,
            third,
        })
    }

    /// `F = ½ Σ c_ij Z^i Z^j` with `c` symmetric.
    pub fn quadratic(c: &DMatrix<Complex64>) -> Result<Self> {
        let n = c.nrows();
        if c.ncols() != n || n == 0 {
            return Err(Error::Dimension("quadratic coefficients must be square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (c[(i, j)] - c[(j, i)]).norm() > 1e-14 * (1.0 + c[(i, j)].norm()) {
                    return Err(Error::Dimension(
                        "quadratic coefficients must be symmetric".into(),
                    ));
                }
            }
        }
        let mut e = Expr::Const(Complex64::new(0.0, 0.0));
        for i in 0..n {
            for j in i..n {
                let coeff = if i == j { c[(i, i)] * 0.5 } else { c[(i, j)] };
                let mono = if i == j {
                    expr::pow(Expr::Var(i), 2)
                } else {
                    expr::mul(Expr::Var(i), Expr::Var(j))
                };
                e = expr::add(e, expr::mul(Expr::Const(coeff), mono));
            }
        }
        Prepotential::new(e, n, CatalogTag::Quadratic)
    }

    /// `F = Z³/6` in one variable, so `τ(Z) = Z`.
    pub fn cubic() -> Self {
        let e = expr::div(expr::pow(Expr::Var(0), 3), Expr::Num(6.0));
        Prepotential::new(e, 1, CatalogTag::Cubic).expect("valid cubic")
    }

    /// `F = Z²/(4πi)·(log(Z/Λ) − 3/2) + (τ₀/2)·Z²`, giving
    /// `τ = log(Z/Λ)/(2πi) + τ₀`.
    pub fn ov_log(lambda: f64, tau0: Complex64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::NonPositiveArgument(lambda));
        }
        let z2 = || expr::pow(Expr::Var(0), 2);
        let pref = Expr::Const(Complex64::new(1.0, 0.0) / Complex64::new(0.0, 4.0 * PI));
        let logt = expr::sub(
            expr::log(expr::div(Expr::Var(0), Expr::Num(lambda))),
            Expr::Num(1.5),
        );
        let e = expr::add(
            expr::mul(expr::mul(pref, z2()), logt),
            expr::mul(Expr::Const(tau0 * 0.5), z2()),
        );
        Prepotential::new(e, 1, CatalogTag::OvLog)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn catalog_tag(&self) -> CatalogTag {
        self.tag
    }

    /// Symbolic `∂F/∂Z^i`.
    pub fn gradient_expr(&self, i: usize) -> &Expr {
        &self.grad[i]
    }

    /// Symbolic `τ_ij`.
    pub fn hessian_expr(&self, i: usize, j: usize) -> &Expr {
        &self.hess[i * self.n + j]
    }
}

/// Parses a prepotential in `Z1..Zn`.
pub fn parse_prepotential(text: &str, n: usize) -> Result<Prepotential> {
    if n == 0 {
        return Err(Error::Dimension("n must be at least 1".into()));
    }
    Prepotential::new(parse(text, n)?, n, CatalogTag::Custom)
}

/// Values of `F` and its derivatives at one point of the base.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartJet {
    pub z: Vec<Complex64>,
    pub f: Complex64,
    pub zlow: Vec<Complex64>,
    pub tau: DMatrix<Complex64>,
    dtau: Vec<Complex64>,
}

impl ChartJet {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// `∂τ_ij/∂Z^k`.
    pub fn dtau(&self, i: usize, j: usize, k: usize) -> Complex64 {
        let n = self.n();
        self.dtau[(i * n + j) * n + k]
    }

    pub fn im_tau(&self) -> DMatrix<f64> {
        self.tau.map(|c| c.im)
    }
}

/// Relative threshold for declaring `Im τ` singular.
pub const IM_TAU_DET_THRESHOLD: f64 = 1e-10;

/// Evaluates `F`, `Z_i`, `τ_ij` and `∂τ_ij/∂Z^k` at `z`.
pub fn jet(f: &Prepotential, z: &[Complex64]) -> Result<ChartJet> {
    let n = f.n;
    if z.len() != n {
        return Err(Error::Dimension(format!(
            "expected {n} coordinates, got {}",
            z.len()
        )));
    }
    if z.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("non-finite coordinate".into()));
    }
    let fv = f.expr.eval(z)?;
    let zlow = f
        .grad
        .iter()
        .map(|e| e.eval(z))
        .collect::<Result<Vec<_>>>()?;
    let mut tau = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let t = f.hess[i * n + j].eval(z)?;
            tau[(i, j)] = t;
            tau[(j, i)] = t;
        }
    }
    let mut dtau = vec![Complex64::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let t = f.third[(i * n + j) * n + k].eval(z)?;
                for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                    dtau[(a * n + b) * n + c] = t;
                }
            }
        }
    }
    let jet = ChartJet {
        z: z.to_vec(),
        f: fv,
        zlow,
        tau,
        dtau,
    };
    check_im_tau(&jet)?;
    if jet.zlow.iter().any(|c| !c.is_finite()) || jet.tau.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("non-finite derivative".into()));
    }
    Ok(jet)
}

fn check_im_tau(jet: &ChartJet) -> Result<()> {
    let im = jet.im_tau();
    let n = jet.n();
    let scale = im.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let det = im.determinant();
    if !(det.abs() > IM_TAU_DET_THRESHOLD * scale.powi(n as i32)) || scale == 0.0 {
        return Err(Error::NonInvertibleImTau { det });
    }
    Ok(())
}

/// Kähler form, metric and signature of the base in the `(u, w)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AskTensors {
    pub omega: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub signature: (usize, usize),
}

/// Matrix of the base complex structure: `∂u ↦ ∂w`, `∂w ↦ −∂u`.
pub fn base_complex_structure(n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        l[(n + i, i)] = 1.0;
        l[(i, n + i)] = -1.0;
    }
    l
}

/// Counts eigenvalues of a symmetric matrix above `1e-10·max|λ|` by sign.
pub fn signature(g: &DMatrix<f64>) -> (usize, usize) {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let scale = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let thr = 1e-10 * scale;
    let p = eig.iter().filter(|&&l| l > thr).count();
    let q = eig.iter().filter(|&&l| l < -thr).count();
    (p, q)
}

pub fn ask_tensors(jet: &ChartJet) -> Result<AskTensors> {
    check_im_tau(jet)?;
    let n = jet.n();
    let im = jet.im_tau();
    let mut omega = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            omega[(i, n + j)] = im[(i, j)];
            omega[(n + j, i)] = -im[(i, j)];
        }
    }
    let metric = &omega * base_complex_structure(n);
    let signature = signature(&metric);
    Ok(AskTensors {
        omega,
        metric,
        signature,
    })
}

/// Affine special coordinates and the holomorphic Euler field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateCoordinates {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Components of `ξ^{1,0}` in the frame `(∂x^i, ∂y_i)`.
    pub xi10: Vec<Complex64>,
}

pub fn conjugate_coordinates(jet: &ChartJet) -> ConjugateCoordinates {
    let x = jet.z.iter().map(|z| z.re).collect();
    let y = jet.zlow.iter().map(|z| -z.re).collect();
    let xi10 = jet
        .z
        .iter()
        .map(|z| z * 0.5)
        .chain(jet.zlow.iter().map(|z| -z * 0.5))
        .collect();
    ConjugateCoordinates { x, y, xi10 }
}

/// Jacobian `∂(x, y)/∂(u, w)`.
pub fn affine_jacobian(jet: &ChartJet) -> DMatrix<f64> {
    let n = jet.n();
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        d[(i, i)] = 1.0;
        for j in 0..n {
            d[(n + i, j)] = -jet.tau[(i, j)].re;
            d[(n + i, n + j)] = jet.tau[(i, j)].im;
        }
    }
    d
}

/// Maximum residuals of the special period structure checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeriodReport {
    /// `dZ_i − τ_ij dZ^j`, via central differences of `Z_i`.
    pub dz_lower: f64,
    /// `|τ_ij − τ_ji|`.
    pub tau_symmetry: f64,
    /// `∇ξ^{1,0} − π^{1,0}` in affine coordinates.
    pub holomorphic_euler: f64,
}

/// Central-difference derivatives of `xi10` along `u` and `w`; the columns are
/// `∂/∂u^1..∂/∂u^n, ∂/∂w^1..∂/∂w^n`.
fn xi_jacobian_uw(f: &Prepotential, z: &[Complex64], h: f64) -> Result<DMatrix<Complex64>> {
    let n = z.len();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        let dir = if c < n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        let i = c % n;
        let step = h * z[i].norm().max(1.0);
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[i] += dir * step;
        zm[i] -= dir * step;
        let xp = conjugate_coordinates(&jet(f, &zp)?).xi10;
        let xm = conjugate_coordinates(&jet(f, &zm)?).xi10;
        for r in 0..2 * n {
            out[(r, c)] = (xp[r] - xm[r]) / (2.0 * step);
        }
    }
    Ok(out)
}

/// `∇ξ^{1,0}` as an endomorphism in the affine frame `(∂x, ∂y)`, by central
/// differences with relative step `h`.
pub fn euler_derivative(f: &Prepotential, z: &[Complex64], h: f64) -> Result<DMatrix<Complex64>> {
    let j0 = jet(f, z)?;
    let d = affine_jacobian(&j0);
    let dinv = d
        .clone()
        .try_inverse()
        .ok_or(Error::NonInvertibleImTau { det: 0.0 })?;
    let juw = xi_jacobian_uw(f, z, h)?;
    Ok(juw * dinv.map(|x| Complex64::new(x, 0.0)))
}

/// `π^{1,0} = ½(1 − iI)` in the affine frame.
pub fn projector_10(jet: &ChartJet) -> Result<DMatrix<Complex64>> {
    let n = jet.n();
    let d = affine_jacobian(jet);
    let dinv = d
        .clone()
        .try_inverse()
        .ok_or(Error::NonInvertibleImTau { det: 0.0 })?;
    let ixy = &d * base_complex_structure(n) * dinv;
    let id = DMatrix::<Complex64>::identity(2 * n, 2 * n);
    Ok((id - ixy.map(|x| Complex64::new(0.0, x))) * Complex64::new(0.5, 0.0))
}

pub fn verify_special_period_structure(
    f: &Prepotential,
    samples: &[Vec<Complex64>],
    h: f64,
) -> Result<PeriodReport> {
    let mut rep = PeriodReport::default();
    for z in samples {
        let j0 = jet(f, z)?;
        let n = j0.n();
        for i in 0..n {
            for k in 0..n {
                rep.tau_symmetry = rep
                    .tau_symmetry
                    .max((j0.tau[(i, k)] - j0.tau[(k, i)]).norm());
            }
        }
        for k in 0..n {
            for (dir, factor) in [
                (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
                (Complex64::new(0.0, 1.0), Complex64::new(0.0, 1.0)),
            ] {
                let step = h * z[k].norm().max(1.0);
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[k] += dir * step;
                zm[k] -= dir * step;
                let jp = jet(f, &zp)?;
                let jm = jet(f, &zm)?;
                for i in 0..n {
                    let fd = (jp.zlow[i] - jm.zlow[i]) / (2.0 * step);
                    rep.dz_lower = rep.dz_lower.max((fd - factor * j0.tau[(i, k)]).norm());
                }
            }
        }
        let nabla = euler_derivative(f, z, h)?;
        let proj = projector_10(&j0)?;
        let diff = (nabla - proj).iter().fold(0.0f64, |m, c| m.max(c.norm()));
        rep.holomorphic_euler = rep.holomorphic_euler.max(diff);
    }
    Ok(rep)
}
