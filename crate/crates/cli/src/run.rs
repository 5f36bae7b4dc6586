//! Suite orchestration over a point grid.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use joyce_hk::hk::{closed_form_crosscheck, closedness_residuals, nijenhuis_residual, report_zetas, TensorReport};
use joyce_hk::intsys::{fiber_checks, lattice_periodicity, periodicity_check, FiberShift, LatticeShift};
use joyce_hk::joyce::{
    default_zetas, flatness_residuals, j_eval, plebanski_residuals, ray_crosscheck, ChartPoint, JoyceProvider,
};
use joyce_hk::model::Model;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SUITES};
use crate::error::{CliError, ConfigError};
use crate::grid;

/// Lower bound the non-lattice control must exceed somewhere on the grid.
pub const CONTROL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Offender {
    pub point: Vec<f64>,
    pub residual: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub max_residual: Option<f64>,
    pub budget: f64,
    pub verdict: String,
    pub worst: Option<Offender>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCensus {
    pub total: usize,
    pub evaluated: usize,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config: RunConfig,
    pub seed: u64,
    pub max_tail: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub verdict: String,
    pub suites: BTreeMap<String, SuiteSummary>,
    pub residuals: BTreeMap<String, f64>,
    pub controls: BTreeMap<String, f64>,
    pub signatures: BTreeMap<String, usize>,
    pub points: PointCensus,
    pub provenance: Provenance,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

fn verdict(ok: bool) -> String {
    if ok { "pass" } else { "fail" }.to_string()
}

#[derive(Debug, Default)]
struct PointResult {
    residuals: BTreeMap<String, f64>,
    controls: BTreeMap<String, f64>,
    signature: Option<(usize, usize)>,
    tail: f64,
}

fn fold_max(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn evaluate(model: &Model, suites: &[String], p: &ChartPoint) -> joyce_hk::Result<PointResult> {
    let mut out = PointResult::default();
    let has = |s: &str| suites.iter().any(|x| x == s);
    let rep: TensorReport = model.report(p, &report_zetas())?;
    out.signature = Some(rep.signature);
    let jet = model.jet(&p.z)?;
    out.tail = j_eval(&model.provider, p, &jet)?.tail;
    let mut put = |k: &str, v: f64| {
        out.residuals.insert(k.to_string(), v);
    };
    if has("quaternion") {
        for (k, v) in &rep.residuals {
            put(&format!("quaternion.{k}"), *v);
        }
    }
    if has("flatness") {
        let f = flatness_residuals(model, p, &default_zetas())?;
        put("flatness.direct", f.direct);
        put("flatness.termwise", fold_max(f.termwise));
    }
    if has("plebanski") {
        let r = plebanski_residuals(&model.provider, p, &jet)?;
        put("plebanski.compcond", r.compcond);
        put("plebanski.descent", fold_max(r.descent));
        put("plebanski.plebanski_like", fold_max(r.plebanski_like));
        if let Some(l) = r.linear {
            put("plebanski.linear", fold_max(l));
        }
    }
    if has("closedness") {
        let r = closedness_residuals(model, p)?;
        put("closedness.d_omega", fold_max(r.d_omega));
        put("closedness.closedsimp", fold_max(r.closedsimp));
    }
    if has("nijenhuis") {
        for k in 1..=3 {
            put(&format!("nijenhuis.I{k}"), nijenhuis_residual(model, p, k)?);
        }
    }
    if has("crosscheck") {
        let r = closed_form_crosscheck(model, p)?;
        put("crosscheck.om3", r.om3);
        put("crosscheck.omega", r.omega);
        put("crosscheck.om3_cotangent", r.om3_cotangent);
        put("crosscheck.omega_cotangent", r.omega_cotangent);
    }
    if has("integrable") {
        let n = p.n();
        let mut per = 0.0f64;
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 1;
            per = per
                .max(lattice_periodicity(model, p, &LatticeShift::new(e.clone(), vec![0; n]))?)
                .max(lattice_periodicity(model, p, &LatticeShift::new(vec![0; n], e))?);
        }
        put("integrable.periodicity", per);
        let f = fiber_checks(&rep);
        put("integrable.lagrangian", f.lagrangian);
        put("integrable.polarization", f.polarization);
        put("integrable.holomorphic_projection", f.holomorphic_projection);
        let mut d_up = vec![0.0; n];
        d_up[0] = 1.0;
        let shift = FiberShift {
            d_up,
            d_down: vec![0.0; n],
        };
        out.controls
            .insert("non_lattice_shift".into(), periodicity_check(model, p, &shift)?);
    }
    if has("dilog") {
        let r = ray_crosscheck(&model.provider, p, &jet)?;
        put("dilog.ray", fold_max(r.iter().map(|x| x.residual())));
    }
    Ok(out)
}

fn evaluate_grid<T: Send>(
    points: &[ChartPoint],
    f: impl Fn(&ChartPoint) -> joyce_hk::Result<T> + Sync + Send,
) -> Vec<joyce_hk::Result<T>> {
    points.par_iter().map(f).collect()
}

pub fn run_verify(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    cfg.validate()?;
    let model = cfg.model()?;
    let points = grid::points(&cfg.grid, cfg.seed);
    let results = evaluate_grid(&points, |p| evaluate(&model, &cfg.suites, p));

    let mut residuals: BTreeMap<String, f64> = BTreeMap::new();
    let mut controls: BTreeMap<String, f64> = BTreeMap::new();
    let mut worst: BTreeMap<String, Offender> = BTreeMap::new();
    let mut signatures: BTreeMap<String, usize> = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut max_tail = 0.0f64;
    for (p, r) in points.iter().zip(results) {
        match r {
            Err(e) => skipped.push(Skipped {
                point: p.real_coords(),
                reason: format!("skipped: {e}"),
            }),
            Ok(r) => {
                max_tail = max_tail.max(r.tail);
                if let Some((a, b)) = r.signature {
                    *signatures.entry(format!("({a}, {b})")).or_default() += 1;
                }
                for (k, v) in r.residuals {
                    let slot = residuals.entry(k.clone()).or_insert(0.0);
                    // NaN must win the max so it cannot hide
                    if v.is_nan() || v > *slot {
                        *slot = v;
                    }
                    let suite = k.split('.').next().unwrap_or("").to_string();
                    let replace = match worst.get(&suite) {
                        Some(o) => v.is_nan() || v > o.value,
                        None => true,
                    };
                    if replace {
                        worst.insert(
                            suite,
                            Offender {
                                point: p.real_coords(),
                                residual: k,
                                value: v,
                            },
                        );
                    }
                }
                for (k, v) in r.controls {
                    let slot = controls.entry(k).or_insert(0.0);
                    *slot = slot.max(v);
                }
            }
        }
    }
    let evaluated = points.len() - skipped.len();
    let mut suites = BTreeMap::new();
    for s in SUITES.iter().filter(|s| cfg.suites.iter().any(|x| x == *s)) {
        let budget = cfg.budget(s);
        let vals: Vec<f64> = residuals
            .iter()
            .filter(|(k, _)| k.split('.').next() == Some(*s))
            .map(|(_, v)| *v)
            .collect();
        let max = if evaluated == 0 {
            None
        } else {
            Some(vals.iter().cloned().fold(0.0, |a: f64, b| if b.is_nan() { b } else { a.max(b) }))
        };
        let mut ok = max.is_some_and(|m| m <= budget);
        if *s == "integrable" && matches!(model.provider, JoyceProvider::UncoupledBps { .. }) {
            ok &= controls.get("non_lattice_shift").is_some_and(|c| *c > CONTROL_FLOOR);
        }
        suites.insert(
            s.to_string(),
            SuiteSummary {
                max_residual: max,
                budget,
                verdict: verdict(ok),
                worst: worst.get(*s).cloned(),
            },
        );
    }
    let all = suites.values().all(|s| s.verdict == "pass");
    Ok(RunReport {
        verdict: verdict(all),
        suites,
        residuals,
        controls,
        signatures,
        points: PointCensus {
            total: points.len(),
            evaluated,
            skipped,
        },
        provenance: Provenance {
            config: cfg.clone(),
            seed: cfg.seed,
            max_tail,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// A scalar read from a [`TensorReport`].
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// Frobenius norm of `ω₃(v_i, v̄_j)`.
    VBlock,
    Entry { tensor: String, a: usize, b: usize },
}

impl Observable {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        let unknown = || CliError::UnknownObservable(name.to_string());
        if name == "om3[v-block]" {
            return Ok(Observable::VBlock);
        }
        let (tensor, rest) = name.split_once('[').ok_or_else(unknown)?;
        let inner = rest.strip_suffix(']').ok_or_else(unknown)?;
        let (a, b) = inner.split_once(',').ok_or_else(unknown)?;
        let a = a.trim().parse().map_err(|_| unknown())?;
        let b = b.trim().parse().map_err(|_| unknown())?;
        if !["I1", "I2", "I3", "om1", "om2", "om3", "g", "OmegaHol"].contains(&tensor) {
            return Err(unknown());
        }
        Ok(Observable::Entry {
            tensor: tensor.to_string(),
            a,
            b,
        })
    }

    pub fn read(&self, r: &TensorReport) -> Option<f64> {
        match self {
            Observable::VBlock => Some(r.v_block.norm()),
            Observable::Entry { tensor, a, b } => {
                let m = match tensor.as_str() {
                    "I1" => &r.i1,
                    "I2" => &r.i2,
                    "I3" => &r.i3,
                    "om1" => &r.om1,
                    "om2" => &r.om2,
                    "om3" => &r.om3,
                    "g" => &r.g,
                    _ => return r.omega_hol.get((*a, *b)).map(|z| z.norm()),
                };
                m.get((*a, *b)).copied()
            }
        }
    }
}

/// One scan row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub point: Vec<f64>,
    pub value: Option<f64>,
    pub semi_flat: Option<f64>,
    /// For the v-block, the norm of the difference of the blocks.
    pub difference: Option<f64>,
    pub status: String,
}

pub fn run_scan(cfg: &RunConfig, observable: &str) -> Result<Vec<ScanRow>, CliError> {
    let obs = Observable::parse(observable)?;
    cfg.validate()?;
    let model = cfg.model()?;
    let flat = model.semi_flat();
    let points = grid::points(&cfg.grid, cfg.seed);
    let results = evaluate_grid(&points, |p| {
        let r = model.report(p, &[])?;
        let s = flat.report(p, &[])?;
        let (v, f) = (obs.read(&r), obs.read(&s));
        let d = match obs {
            Observable::VBlock => Some((&r.v_block - &s.v_block).norm()),
            _ => v.zip(f).map(|(a, b)| a - b),
        };
        Ok((v, f, d))
    });
    let mut rows = Vec::with_capacity(points.len());
    for (p, r) in points.iter().zip(results) {
        rows.push(match r {
            Ok((Some(v), Some(s), d)) => ScanRow {
                point: p.real_coords(),
                value: Some(v),
                semi_flat: Some(s),
                difference: d,
                status: "ok".into(),
            },
            Ok(_) => return Err(CliError::UnknownObservable(observable.to_string())),
            Err(e) => ScanRow {
                point: p.real_coords(),
                value: None,
                semi_flat: None,
                difference: None,
                status: format!("skipped: {e}"),
            },
        });
    }
    Ok(rows)
}

pub fn write_scan<W: Write>(rows: &[ScanRow], n: usize, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = Vec::new();
    for prefix in ["re_z", "im_z", "phi_up", "phi_down"] {
        header.extend((1..=n).map(|i| format!("{prefix}{i}")));
    }
    header.extend(["value", "semi_flat", "difference", "status"].map(String::from));
    w.write_record(&header)?;
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for r in rows {
        let mut rec: Vec<String> = r.point.iter().map(|x| format!("{x}")).collect();
        rec.push(fmt(r.value));
        rec.push(fmt(r.semi_flat));
        rec.push(fmt(r.difference));
        rec.push(r.status.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayRow {
    pub point: Vec<f64>,
    pub charge: String,
    pub series: [f64; 2],
    pub ray: [f64; 2],
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub verdict: String,
    pub budget: f64,
    pub max_residual: Option<f64>,
    pub rows: Vec<RayRow>,
    pub skipped: Vec<Skipped>,
}

impl CrosscheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }
}

pub fn run_crosscheck(cfg: &RunConfig) -> Result<CrosscheckReport, CliError> {
    cfg.validate()?;
    if cfg.bps.is_empty() {
        return Err(ConfigError::Invalid {
            path: "bps".into(),
            message: "crosscheck needs BPS data".into(),
        }
        .into());
    }
    let model = cfg.model()?;
    let points = grid::points(&cfg.grid, cfg.seed);
    let results = evaluate_grid(&points, |p| {
        let jet = model.jet(&p.z)?;
        ray_crosscheck(&model.provider, p, &jet)
    });
    let budget = cfg.budget("dilog");
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(list) => rows.extend(list.into_iter().map(|x| RayRow {
                point: p.real_coords(),
                charge: x.charge.to_string(),
                series: [x.series.re, x.series.im],
                ray: [x.ray.re, x.ray.im],
                residual: x.residual(),
            })),
            Err(e) => skipped.push(Skipped {
                point: p.real_coords(),
                reason: format!("skipped: {e}"),
            }),
        }
    }
    let max = (!rows.is_empty()).then(|| rows.iter().map(|r| r.residual).fold(0.0, f64::max));
    let ok = max.is_some_and(|m| m <= budget) && rows.iter().all(|r| r.residual.is_finite());
    Ok(CrosscheckReport {
        verdict: verdict(ok),
        budget,
        max_residual: max,
        rows,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observables_parse() {
        assert_eq!(Observable::parse("om3[v-block]").unwrap(), Observable::VBlock);
        assert!(matches!(Observable::parse("g[0, 3]").unwrap(), Observable::Entry { a: 0, b: 3, .. }));
        assert!(Observable::parse("h[0,0]").is_err());
        assert!(Observable::parse("g[0]").is_err());
    }
}
