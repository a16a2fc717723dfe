//! Deterministic instance generators, all on [0,1]^2.

use clap::ValueEnum;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// Uniform points in the unit square.
    Uniform2d,
    /// Gaussian blobs (sigma = 0.05) around uniform centers.
    Clustered2d,
    /// Integer lattice scaled into the unit square.
    Grid,
    /// Uniform points, ingested through the distance-matrix path.
    Matrix,
}

pub fn generate(family: Family, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family {
        Family::Uniform2d | Family::Matrix => (0..n)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect(),
        Family::Clustered2d => {
            let c = (n / 32).clamp(2, 16);
            let centers: Vec<(f64, f64)> = (0..c)
                .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
                .collect();
            (0..n)
                .map(|_| {
                    let (cx, cy) = centers[rng.gen_range(0..c)];
                    let (gx, gy) = gauss_pair(&mut rng);
                    vec![cx + 0.05 * gx, cy + 0.05 * gy]
                })
                .collect()
        }
        Family::Grid => {
            let side = (n as f64).sqrt().ceil() as usize;
            let denom = (side.max(2) - 1) as f64;
            (0..n)
                .map(|i| vec![(i % side) as f64 / denom, (i / side) as f64 / denom])
                .collect()
        }
    }
}

fn gauss_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Box-Muller.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    (r * th.cos(), r * th.sin())
}
