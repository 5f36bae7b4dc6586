use std::f64::consts::PI;

use joyce_hk::joyce::ChartPoint;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::GridConfig;

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
        .collect()
}

/// Base points of the regular grid followed by the random ones, each paired
/// with `fiber_samples` fiber positions. The first fiber position is the origin.
pub fn points(grid: &GridConfig, seed: u64) -> Vec<ChartPoint> {
    let n = grid.z_lo.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            let re = linspace(grid.z_lo[i][0], grid.z_hi[i][0], grid.counts[0]);
            let im = linspace(grid.z_lo[i][1], grid.z_hi[i][1], grid.counts[1]);
            im.iter()
                .flat_map(|&y| re.iter().map(move |&x| Complex64::new(x, y)))
                .collect()
        })
        .collect();
    let mut bases: Vec<Vec<Complex64>> = vec![Vec::new()];
    for axis in &axes {
        bases = bases
            .into_iter()
            .flat_map(|b| {
                axis.iter().map(move |&z| {
                    let mut v = b.clone();
                    v.push(z);
                    v
                })
            })
            .collect();
    }
    for _ in 0..grid.random_points {
        bases.push(
            (0..n)
                .map(|i| {
                    Complex64::new(
                        uniform(&mut rng, grid.z_lo[i][0], grid.z_hi[i][0]),
                        uniform(&mut rng, grid.z_lo[i][1], grid.z_hi[i][1]),
                    )
                })
                .collect(),
        );
    }
    let mut out = Vec::with_capacity(bases.len() * grid.fiber_samples);
    for z in bases {
        for s in 0..grid.fiber_samples {
            let (up, dn): (Vec<f64>, Vec<f64>) = if s == 0 {
                (vec![0.0; n], vec![0.0; n])
            } else {
                (
                    (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
                    (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
                )
            };
            out.push(ChartPoint::new(z.clone(), up, dn).expect("finite grid point"));
        }
    }
    out
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(counts: [usize; 2], fiber: usize, random: usize) -> GridConfig {
        GridConfig {
            z_lo: vec![[0.0, 1.0]],
            z_hi: vec![[1.0, 2.0]],
            counts,
            fiber_samples: fiber,
            random_points: random,
        }
    }

    #[test]
    fn cardinality() {
        assert_eq!(points(&grid([3, 4], 2, 5), 1).len(), (12 + 5) * 2);
        let mut g = grid([2, 2], 1, 0);
        g.z_lo.push([0.0, 1.0]);
        g.z_hi.push([1.0, 2.0]);
        assert_eq!(points(&g, 1).len(), 16);
    }

    #[test]
    fn seeded() {
        let g = grid([2, 2], 3, 2);
        assert_eq!(points(&g, 9), points(&g, 9));
        assert_ne!(points(&g, 9), points(&g, 10));
    }
}
