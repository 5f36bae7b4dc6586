//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;

use joyce_hk::ask::{parse_prepotential, Prepotential};
use joyce_hk::bps::{make_bps_structure, Charge};
use joyce_hk::hk::{
    closed_form_crosscheck, closed_forms, closedness_residuals, cotangent_pushforward, nijenhuis_residual,
    report_zetas, Chart,
};
use joyce_hk::intsys::{fiber_checks, lattice_periodicity, periodicity_check, FiberShift, LatticeShift};
use joyce_hk::joyce::{
    default_zetas, flatness_residuals, j_partials, plebanski_residuals, ray_crosscheck, ChartPoint,
    DerivTable, JoyceProvider, Var,
};
use joyce_hk::model::Model;
use joyce_hk::special::bessel_k;
use joyce_hk::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAIL_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn pt(z: &[Complex64], up: &[f64], dn: &[f64]) -> ChartPoint {
    ChartPoint::new(z.to_vec(), up.to_vec(), dn.to_vec()).expect("valid point")
}

fn one() -> Rational64 {
    Rational64::from_integer(1)
}

fn ov_provider() -> JoyceProvider {
    let b = make_bps_structure(1, &[(Charge::magnetic(vec![1]), one())]).unwrap();
    JoyceProvider::uncoupled(b, TAIL_TOL).unwrap()
}

fn ov_model() -> Model {
    Model::new(Prepotential::ov_log(1.0, c(0.0, 1.0)).unwrap(), ov_provider()).unwrap()
}

/// Two commuting magnetic charges over a coupled two-variable log prepotential.
fn ov2_model() -> Model {
    let f = parse_prepotential(
        "(i/2)*Z1^2 + (i/2)*Z2^2 + 0.2*i*Z1*Z2 \
         - 0.07957747154594767*i*Z1^2*(log(Z1)-1.5) - 0.07957747154594767*i*Z2^2*(log(Z2)-1.5)",
        2,
    )
    .unwrap();
    let b = make_bps_structure(
        2,
        &[
            (Charge::magnetic(vec![1, 0]), one()),
            (Charge::magnetic(vec![0, 1]), one()),
        ],
    )
    .unwrap();
    Model::new(f, JoyceProvider::uncoupled(b, TAIL_TOL).unwrap()).unwrap()
}

fn semi_flat_model(n: usize) -> Model {
    let text = (1..=n).map(|k| format!("(i/2)*Z{k}^2")).collect::<Vec<_>>().join(" + ");
    Model::new(parse_prepotential(&text, n).unwrap(), JoyceProvider::Zero).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = Result<Outcome, Error>;
type Criterion = (&'static str, fn() -> Check);

/// Maximum over every residual family computed at a point.
fn all_residuals(model: &Model, p: &ChartPoint) -> Result<f64, Error> {
    let rep = model.report(p, &report_zetas())?;
    let jet = model.jet(&p.z)?;
    let mut worst = rep.residuals.values().cloned().fold(0.0, f64::max);
    worst = worst.max(flatness_residuals(model, p, &default_zetas())?.max());
    worst = worst.max(plebanski_residuals(&model.provider, p, &jet)?.max());
    worst = worst.max(closedness_residuals(model, p)?.max());
    for k in 1..=3 {
        worst = worst.max(nijenhuis_residual(model, p, k)?);
    }
    worst = worst.max(fiber_checks(&rep).max());
    worst = worst.max(lattice_periodicity(model, p, &LatticeShift::new(vec![1; p.n()], vec![-1; p.n()]))?);
    Ok(worst)
}

fn wedge(a: usize, b: usize, m: usize, s: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(m, m);
    w[(a, b)] = s;
    w[(b, a)] = -s;
    w
}

fn criterion_1() -> Check {
    let mut resid = 0.0f64;
    let mut entry = 0.0f64;
    for n in [1usize, 2] {
        let model = semi_flat_model(n);
        let m = 4 * n;
        // du∧dw + (1/4π²) dφ_i∧dφ^i for τ = i
        let mut om3 = DMatrix::zeros(m, m);
        for i in 0..n {
            om3 += wedge(i, n + i, m, 1.0) + wedge(3 * n + i, 2 * n + i, m, 1.0 / (4.0 * PI * PI));
        }
        // Ω = −(1/2π)(du + i dw)∧(dφ_i + i dφ^i)
        let mut omega = DMatrix::<Complex64>::zeros(m, m);
        for i in 0..n {
            let mut dz = nalgebra::DVector::<Complex64>::zeros(m);
            dz[i] = c(1.0, 0.0);
            dz[n + i] = c(0.0, 1.0);
            let mut rhs = nalgebra::DVector::<Complex64>::zeros(m);
            rhs[3 * n + i] = c(1.0, 0.0);
            rhs[2 * n + i] = c(0.0, 1.0);
            omega += (&dz * rhs.transpose() - &rhs * dz.transpose()) * c(-1.0 / (2.0 * PI), 0.0);
        }
        for (z, up, dn) in [(c(0.3, 0.4), 0.2, 0.1), (c(-1.2, 0.7), 3.0, -2.0), (c(2.0, -1.5), 5.5, 0.9)] {
            let p = pt(&vec![z; n], &vec![up; n], &vec![dn; n]);
            resid = resid.max(all_residuals(&model, &p)?);
            let rep = model.report(&p, &[])?;
            entry = entry.max((&rep.om3 - &om3).amax());
            entry = entry.max((&rep.omega_hol - &omega).map(|x| x.norm()).max());
            entry = entry.max(closed_form_crosscheck(&model, &p)?.max());
        }
    }
    Ok(outcome(
        resid <= 1e-12 && entry <= 1e-13,
        format!("suite max {resid:.2e} (≤ 1e-12), closed forms {entry:.2e} (≤ 1e-13)"),
    ))
}

fn criterion_2() -> Check {
    let model = Model::new(Prepotential::cubic(), JoyceProvider::Zero)?.with_h_fd(1e-4);
    let mut fd = 0.0f64;
    let mut sig_ok = true;
    for (z, up, dn) in [(c(0.0, 1.0), 0.3, 0.4), (c(0.7, 0.5), -1.0, 2.0), (c(-1.5, 2.5), 4.0, 1.0)] {
        let p = pt(&[z], &[up], &[dn]);
        fd = fd.max(flatness_residuals(&model, &p, &default_zetas())?.max());
        fd = fd.max(closedness_residuals(&model, &p)?.max());
        for k in 1..=3 {
            fd = fd.max(nijenhuis_residual(&model, &p, k)?);
        }
        sig_ok &= model.report(&p, &[])?.signature == (4, 0);
    }
    Ok(outcome(
        fd <= 1e-5 && sig_ok,
        format!("flatness/closedness/Nijenhuis {fd:.2e} (≤ 1e-5), signature (4, 0): {sig_ok}"),
    ))
}

fn ov_grid() -> Vec<ChartPoint> {
    let mut out = Vec::new();
    for x in [-0.8, 0.0, 0.8] {
        for y in [0.5, 1.2, 3.0] {
            for (up, dn) in [(0.0, 0.0), (1.3, -0.7)] {
                out.push(pt(&[c(x, y)], &[up], &[dn]));
            }
        }
    }
    out.push(pt(&[c(0.6, 0.5), c(-0.3, 0.9)], &[0.4, 2.0], &[0.1, -0.5]));
    out
}

fn model_for(p: &ChartPoint) -> Model {
    if p.n() == 1 {
        ov_model()
    } else {
        ov2_model()
    }
    .with_cond_max(1e3)
}

fn criterion_3() -> Check {
    let (mut alg, mut lin, mut fd, mut simp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut used = 0;
    for p in ov_grid() {
        let model = model_for(&p);
        let rep = match model.report(&p, &report_zetas()) {
            Ok(r) => r,
            Err(Error::DegenerateFrame { .. }) => continue,
            Err(e) => return Err(e),
        };
        used += 1;
        alg = alg.max(rep.residuals["quaternion"]).max(rep.residuals["hermitian"]);
        let jet = model.jet(&p.z)?;
        let pl = plebanski_residuals(&model.provider, &p, &jet)?;
        let l = pl.linear.expect("uncoupled");
        lin = lin.max(l[0]).max(l[1]);
        fd = fd.max(flatness_residuals(&model, &p, &default_zetas())?.max());
        let cl = closedness_residuals(&model, &p)?;
        fd = fd.max(cl.d_omega.iter().cloned().fold(0.0, f64::max));
        simp = simp.max(cl.closedsimp.iter().cloned().fold(0.0, f64::max));
        for k in 1..=3 {
            fd = fd.max(nijenhuis_residual(&model, &p, k)?);
        }
    }
    Ok(outcome(
        used >= 10 && alg <= 1e-10 && lin <= 10.0 * TAIL_TOL && fd <= 1e-5 && simp <= 1e-5,
        format!(
            "{used} points; quaternion/hermitian {alg:.2e}, linear {lin:.2e}, FD {fd:.2e}, closedsimp {simp:.2e}"
        ),
    ))
}

fn criterion_4() -> Check {
    let mut worst = 0.0f64;
    for p in ov_grid() {
        let model = model_for(&p);
        match closed_form_crosscheck(&model, &p) {
            Ok(x) => worst = worst.max(x.max()),
            Err(Error::DegenerateFrame { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    // the Ω coefficient of dZ∧dθ_1 is minus that of dZ∧dφ_1
    let model = ov_model();
    let p = pt(&[c(1.0, 0.5)], &[1.0], &[0.0]);
    let rep = model.report(&p, &[])?;
    let push = cotangent_pushforward(&rep);
    let jet = model.jet(&p.z)?;
    let (_, omc) = closed_forms(&model.provider, &p, &jet, Chart::Cotangent)?;
    let flip = (push.omega_hol[(0, 2)] + rep.omega_hol[(0, 3)]).norm();
    worst = worst.max(flip).max((&push.omega_hol - omc).map(|x| x.norm()).max());
    Ok(outcome(worst <= 1e-10, format!("max difference {worst:.2e} (≤ 1e-10)")))
}

fn criterion_5() -> Check {
    let model = ov_model();
    let mut worst = 0.0f64;
    for k in 0..20 {
        let r = 0.5 + 2.5 * k as f64 / 19.0;
        let phi = 2.0 * PI * ((k * 7) % 20) as f64 / 20.0;
        let arg = 0.3 * k as f64 - 2.0;
        let z = Complex64::from_polar(r, arg);
        let p = pt(&[z], &[phi], &[0.0]);
        let jet = model.jet(&p.z)?;
        for rc in ray_crosscheck(&model.provider, &p, &jet)? {
            worst = worst.max(rc.residual());
        }
    }
    Ok(outcome(worst <= 1e-9, format!("20 points, max {worst:.2e} (≤ 1e-9)")))
}

fn criterion_6() -> Check {
    let (mut per, mut fib) = (0.0f64, 0.0f64);
    for p in ov_grid() {
        let model = model_for(&p);
        let n = p.n();
        let rep = match model.report(&p, &[]) {
            Ok(r) => r,
            Err(Error::DegenerateFrame { .. }) => continue,
            Err(e) => return Err(e),
        };
        fib = fib.max(fiber_checks(&rep).max());
        for (m, k) in [(1, 0), (0, 1), (-1, 2)] {
            let s = LatticeShift::new(vec![m; n], vec![k; n]);
            per = per.max(lattice_periodicity(&model, &p, &s)?);
        }
    }
    let control = periodicity_check(
        &ov_model(),
        &pt(&[c(0.7, 0.0)], &[0.3], &[0.0]),
        &FiberShift {
            d_up: vec![1.0],
            d_down: vec![0.0],
        },
    )?;
    Ok(outcome(
        per <= 1e-12 && fib <= 1e-10 && control > 1e-3,
        format!("periodicity {per:.2e}, fiber {fib:.2e}, non-lattice control {control:.2e} (> 1e-3)"),
    ))
}

fn criterion_7() -> Check {
    let model = ov_model();
    let flat = model.semi_flat();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for k in 0..=10 {
        let r = 1.0 + k as f64 / 10.0;
        let p = pt(&[c(r, 0.0)], &[0.0], &[0.0]);
        let d = (&model.report(&p, &[])?.v_block - &flat.report(&p, &[])?.v_block).norm();
        xs.push(2.0 * PI * r);
        ys.push(d.ln());
    }
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(outcome(
        (slope + 1.0).abs() <= 0.2,
        format!("slope {slope:.4} (−1 ± 20%)"),
    ))
}

/// `∂_a` of `f` from real central differences, Wirtinger in the base.
fn fd_partial<F>(p: &ChartPoint, a: Var, h: f64, f: F) -> Result<Complex64, Error>
where
    F: Fn(&ChartPoint) -> Result<Complex64, Error>,
{
    let n = p.n();
    let d = |k: usize| -> Result<Complex64, Error> {
        Ok((f(&p.shifted(k, h))? - f(&p.shifted(k, -h))?) / (2.0 * h))
    };
    Ok(match a {
        Var::Z(i) => (d(i)? - c(0.0, 1.0) * d(n + i)?) * 0.5,
        Var::Zb(i) => (d(i)? + c(0.0, 1.0) * d(n + i)?) * 0.5,
        Var::Up(i) => d(2 * n + i)?,
        Var::Dn(i) => d(3 * n + i)?,
    })
}

fn within(analytic: Complex64, fd: Complex64) -> (bool, f64) {
    let err = (analytic - fd).norm();
    (err <= 1e-7f64.max(1e-6 * analytic.norm()), err)
}

/// `∫_0^∞ e^{−x cosh t} cosh(νt) dt` by the trapezoid rule.
fn bessel_oracle(order: u32, x: f64) -> f64 {
    let h = 1.0 / 32.0;
    let mut sum = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let term = (-x * t.cosh()).exp() * (order as f64 * t).cosh();
        sum += term;
        if term < 1e-300 || term < 1e-18 * sum {
            break;
        }
        t += h;
    }
    sum * h
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20_241_018);
    let (mut fails, mut worst) = (0usize, 0.0f64);
    let models = [ov_model(), ov2_model(), Model::new(Prepotential::cubic(), JoyceProvider::Zero)?];
    let h = 1e-5;
    let mut note = |ok: bool, err: f64| {
        if !ok {
            fails += 1;
        }
        worst = worst.max(err);
    };
    for s in 0..100 {
        let model = &models[s % 3];
        let n = model.n();
        let z: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.6..2.0), rng.random_range(0.2..2.9)))
            .collect();
        let up: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let dn: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let p = pt(&z, &up, &dn);
        let jet = model.jet(&z)?;
        // prepotential jets along each holomorphic direction
        for k in 0..n {
            let shift = |d: f64| {
                let mut w = z.clone();
                w[k] += d;
                model.jet(&w)
            };
            let (jp, jm) = (shift(h)?, shift(-h)?);
            let (ok, e) = within(jet.zlow[k], (jp.f - jm.f) / (2.0 * h));
            note(ok, e);
            for i in 0..n {
                let (ok, e) = within(jet.tau[(i, k)], (jp.zlow[i] - jm.zlow[i]) / (2.0 * h));
                note(ok, e);
                for j in 0..n {
                    let (ok, e) = within(jet.dtau(i, j, k), (jp.tau[(i, j)] - jm.tau[(i, j)]) / (2.0 * h));
                    note(ok, e);
                }
            }
        }
        // Joyce function partials up to order three
        let t = j_partials(&model.provider, &p, &jet, 3)?;
        let table = |q: &ChartPoint| -> Result<DerivTable, Error> {
            let jq = model.jet(&q.z)?;
            j_partials(&model.provider, q, &jq, 2)
        };
        let m = 4 * n;
        let vars: Vec<Var> = (0..m).map(|a| Var::from_index(a, n)).collect();
        let a = vars[s % m];
        let b = vars[(s / 3) % m];
        let (ok, e) = within(t.d1(a), fd_partial(&p, a, h, |q| Ok(table(q)?.val))?);
        note(ok, e);
        for &v in &vars {
            let (ok, e) = within(t.d2(a, v), fd_partial(&p, v, h, |q| Ok(table(q)?.d1(a)))?);
            note(ok, e);
            let (ok, e) = within(t.d3(a, b, v), fd_partial(&p, v, h, |q| Ok(table(q)?.d2(a, b)))?);
            note(ok, e);
        }
    }
    let mut bessel = 0.0f64;
    for k in 0..=200 {
        let x = 0.1 * (300.0f64).powf(k as f64 / 200.0);
        for order in [0, 1] {
            let want = bessel_oracle(order, x);
            bessel = bessel.max((bessel_k(order, x)? - want).abs() / want);
        }
    }
    Ok(outcome(
        fails == 0 && bessel <= 1e-12,
        format!("derivative mismatches {fails} (worst abs {worst:.2e}), K0/K1 rel {bessel:.2e} (≤ 1e-12)"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("semi-flat exactness", criterion_1),
        ("semi-flat over a curved base", criterion_2),
        ("uncoupled BPS identities", criterion_3),
        ("closed-form equivalence", criterion_4),
        ("dilogarithm ray representation", criterion_5),
        ("integrable system", criterion_6),
        ("instanton decay", criterion_7),
        ("oracle consistency", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let o = run().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {} ({name}): {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
