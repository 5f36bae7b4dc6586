//! Charge lattices with a Darboux frame `(γ_i, γ^i)` and uncoupled BPS indices.

use std::fmt;

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::ask::ChartJet;
use crate::error::{Error, Result};

/// Default lower bound on `|Z_γ|` over the support.
pub const DEFAULT_SUPPORT_FLOOR: f64 = 1e-6;

/// `γ = m_i γ_i + k_i γ^i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Charge {
    pub m: Vec<i64>,
    pub k: Vec<i64>,
}

impl Charge {
    pub fn new(m: Vec<i64>, k: Vec<i64>) -> Self {
        Charge { m, k }
    }

    /// A charge in the span of the `γ^i`.
    pub fn magnetic(k: Vec<i64>) -> Self {
        Charge {
            m: vec![0; k.len()],
            k,
        }
    }

    pub fn rank(&self) -> usize {
        self.k.len()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().chain(&self.k).all(|&x| x == 0)
    }

    pub fn neg(&self) -> Charge {
        Charge {
            m: self.m.iter().map(|x| -x).collect(),
            k: self.k.iter().map(|x| -x).collect(),
        }
    }

    pub fn add(&self, other: &Charge) -> Charge {
        Charge {
            m: self.m.iter().zip(&other.m).map(|(a, b)| a + b).collect(),
            k: self.k.iter().zip(&other.k).map(|(a, b)| a + b).collect(),
        }
    }

    /// `⟨γ, γ'⟩ = Σ (m_i k'_i − k_i m'_i)`.
    pub fn pairing(&self, other: &Charge) -> i64 {
        (0..self.rank())
            .map(|i| self.m[i] * other.k[i] - self.k[i] * other.m[i])
            .sum()
    }

    /// `φ_γ = k_i φ^i`.
    pub fn phase(&self, phi_up: &[f64]) -> f64 {
        self.k
            .iter()
            .zip(phi_up)
            .map(|(&k, &p)| k as f64 * p)
            .sum()
    }
}

impl fmt::Display for Charge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(m={:?}, k={:?})", self.m, self.k)
    }
}

/// Finite, parity-complete, uncoupled BPS data in an adapted frame.
///
/// The support is stored as pairs `{γ, −γ}` sharing one index.
#[derive(Debug, Clone, PartialEq)]
pub struct BpsStructure {
    n: usize,
    pairs: Vec<(Charge, Rational64)>,
}

impl BpsStructure {
    pub fn n(&self) -> usize {
        self.n
    }

    /// One representative per `±γ` pair.
    pub fn pairs(&self) -> &[(Charge, Rational64)] {
        &self.pairs
    }

    /// Every support charge, with `γ` immediately followed by `−γ`.
    pub fn support(&self) -> impl Iterator<Item = (Charge, Rational64)> + '_ {
        self.pairs
            .iter()
            .flat_map(|(g, o)| [(g.clone(), *o), (g.neg(), *o)])
    }

    pub fn index(&self, g: &Charge) -> Rational64 {
        self.support()
            .find(|(h, _)| h == g)
            .map(|(_, o)| o)
            .unwrap_or_else(Rational64::zero)
    }

    pub fn omega_max(&self) -> f64 {
        self.pairs
            .iter()
            .map(|(_, o)| o.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Returns a copy with every index multiplied by `s`.
    pub fn scaled(&self, s: Rational64) -> BpsStructure {
        BpsStructure {
            n: self.n,
            pairs: self.pairs.iter().map(|(g, o)| (g.clone(), o * s)).collect(),
        }
    }

    /// Fails with `SupportViolation` if some `|Z_γ|` is at or below `floor`.
    pub fn check_support(&self, jet: &ChartJet, floor: f64) -> Result<()> {
        for (g, _) in &self.pairs {
            let z = central_charge(self, jet, g).0;
            if !(z.norm() > floor) {
                return Err(Error::SupportViolation {
                    charge: g.to_string(),
                    value: z.norm(),
                    floor,
                });
            }
        }
        Ok(())
    }
}

/// Validates and parity-completes a list of `(charge, index)` entries.
pub fn make_bps_structure(n: usize, entries: &[(Charge, Rational64)]) -> Result<BpsStructure> {
    let mut pairs: Vec<(Charge, Rational64)> = Vec::new();
    for (g, o) in entries {
        if g.m.len() != n || g.k.len() != n {
            return Err(Error::Dimension(format!("charge {g} does not have rank {n}")));
        }
        if g.is_zero() {
            if o.is_zero() {
                continue;
            }
            return Err(Error::ZeroCharge);
        }
        if o.is_zero() {
            continue;
        }
        let neg = g.neg();
        match pairs.iter().find(|(h, _)| *h == *g || *h == neg) {
            Some((_, prev)) if prev == o => {}
            Some(_) => return Err(Error::InconsistentIndex(g.to_string())),
            None => pairs.push((g.clone(), *o)),
        }
    }
    for (a, (ga, _)) in pairs.iter().enumerate() {
        for (gb, _) in pairs.iter().skip(a + 1) {
            let p = ga.pairing(gb);
            if p != 0 {
                return Err(Error::CoupledSupport {
                    a: ga.to_string(),
                    b: gb.to_string(),
                    pairing: p,
                });
            }
        }
    }
    if let Some((g, _)) = pairs.iter().find(|(g, _)| g.m.iter().any(|&x| x != 0)) {
        return Err(Error::MixedFrame(g.to_string()));
    }
    Ok(BpsStructure { n, pairs })
}

/// `Z_γ = m_i Z_i + k_i Z^i` and the coefficients of `φ_γ = k_i φ^i`.
pub fn central_charge(_bps: &BpsStructure, jet: &ChartJet, g: &Charge) -> (Complex64, Vec<i64>) {
    let mut z = Complex64::new(0.0, 0.0);
    for i in 0..jet.n() {
        z += jet.zlow[i] * g.m[i] as f64 + jet.z[i] * g.k[i] as f64;
    }
    (z, g.k.clone())
}

/// Parses an index such as `"1"` or `"-1/2"`.
pub fn parse_index(s: &str) -> Result<Rational64> {
    s.trim()
        .parse::<Rational64>()
        .map_err(|_| Error::Domain(format!("invalid BPS index {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ask::{jet, Prepotential};
    use proptest::prelude::*;

    fn r(n: i64) -> Rational64 {
        Rational64::from_integer(n)
    }

    #[test]
    fn parity_completion() {
        let b = make_bps_structure(1, &[(Charge::magnetic(vec![1]), r(1))]).unwrap();
        let s: Vec<_> = b.support().collect();
        assert_eq!(s.len(), 2);
        assert_eq!(b.index(&Charge::magnetic(vec![-1])), r(1));
    }

    #[test]
    fn commuting_magnetic_charges() {
        let b = make_bps_structure(
            2,
            &[
                (Charge::magnetic(vec![1, 0]), r(1)),
                (Charge::magnetic(vec![0, 1]), r(1)),
            ],
        );
        assert!(b.is_ok());
    }

    #[test]
    fn coupled_support_is_rejected() {
        let e = make_bps_structure(
            1,
            &[
                (Charge::new(vec![1], vec![0]), r(1)),
                (Charge::magnetic(vec![1]), r(1)),
            ],
        );
        assert!(matches!(e, Err(Error::CoupledSupport { pairing: 1, .. })));
    }

    #[test]
    fn mixed_frame_and_zero_charge() {
        assert!(matches!(
            make_bps_structure(1, &[(Charge::new(vec![1], vec![0]), r(1))]),
            Err(Error::MixedFrame(_))
        ));
        assert!(matches!(
            make_bps_structure(1, &[(Charge::magnetic(vec![0]), r(2))]),
            Err(Error::ZeroCharge)
        ));
        assert!(matches!(
            make_bps_structure(
                1,
                &[(Charge::magnetic(vec![1]), r(1)), (Charge::magnetic(vec![-1]), r(2))]
            ),
            Err(Error::InconsistentIndex(_))
        ));
    }

    #[test]
    fn central_charges() {
        let b = make_bps_structure(1, &[(Charge::magnetic(vec![1]), r(1))]).unwrap();
        let q = parse_prepotential_quadratic();
        let j = jet(&q, &[Complex64::new(2.0, 1.0)]).unwrap();
        let (z, k) = central_charge(&b, &j, &Charge::magnetic(vec![1]));
        assert_eq!(z, Complex64::new(2.0, 1.0));
        assert_eq!(k, vec![1]);
        let (z2, k2) = central_charge(&b, &j, &Charge::magnetic(vec![2]));
        assert_eq!(z2, z * 2.0);
        assert_eq!(k2, vec![2]);
        let cubic = Prepotential::cubic();
        let j = jet(&cubic, &[Complex64::new(0.0, 2.0)]).unwrap();
        let (z, _) = central_charge(&b, &j, &Charge::new(vec![1], vec![0]));
        assert!((z - Complex64::new(-2.0, 0.0)).norm() < 1e-15);
    }

    fn parse_prepotential_quadratic() -> Prepotential {
        crate::ask::parse_prepotential("(i/2)*Z1^2", 1).unwrap()
    }

    #[test]
    fn support_floor() {
        let b = make_bps_structure(1, &[(Charge::magnetic(vec![1]), r(1))]).unwrap();
        let q = parse_prepotential_quadratic();
        let j = jet(&q, &[Complex64::new(1e-7, 0.0)]).unwrap();
        assert!(matches!(
            b.check_support(&j, DEFAULT_SUPPORT_FLOOR),
            Err(Error::SupportViolation { .. })
        ));
    }

    #[test]
    fn rational_indices_parse() {
        assert_eq!(parse_index("-1/2").unwrap(), Rational64::new(-1, 2));
        assert_eq!(parse_index("3").unwrap(), r(3));
        assert!(parse_index("x").is_err());
    }

    #[test]
    fn darboux_frame() {
        for i in 0..3 {
            for j in 0..3 {
                let mut m = vec![0; 3];
                m[i] = 1;
                let mut k = vec![0; 3];
                k[j] = 1;
                let gl = Charge::new(m, vec![0; 3]);
                let gu = Charge::magnetic(k);
                assert_eq!(gl.pairing(&gu), i64::from(i == j));
            }
        }
    }

    fn charge(n: usize) -> impl Strategy<Value = Charge> {
        (
            proptest::collection::vec(-5i64..5, n),
            proptest::collection::vec(-5i64..5, n),
        )
            .prop_map(|(m, k)| Charge::new(m, k))
    }

    proptest! {
        #[test]
        fn pairing_is_antisymmetric_and_bilinear(a in charge(3), b in charge(3), c in charge(3)) {
            prop_assert_eq!(a.pairing(&b), -b.pairing(&a));
            prop_assert_eq!(a.add(&b).pairing(&c), a.pairing(&c) + b.pairing(&c));
        }

        #[test]
        fn central_charge_is_additive(a in charge(1), b in charge(1), x in -2.0f64..2.0, y in 0.2f64..2.0) {
            let bps = make_bps_structure(1, &[]).unwrap();
            let j = jet(&Prepotential::cubic(), &[Complex64::new(x, y)]).unwrap();
            let za = central_charge(&bps, &j, &a).0;
            let zb = central_charge(&bps, &j, &b).0;
            let zab = central_charge(&bps, &j, &a.add(&b)).0;
            prop_assert!((zab - za - zb).norm() <= 1e-12 * (1.0 + za.norm() + zb.norm()));
        }
    }
}
