//! Metric ingestion and global parameters. The [`MetricSpace`] is the only
//! holder of the distance function and is used exclusively by the
//! preprocessing phase (and by the verification oracles).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Source data for a metric: coordinate vectors or an explicit matrix.
#[derive(Debug, Clone)]
pub enum MetricSource {
    /// `n` points of fixed dimension, row-major.
    Points { coords: Vec<f64>, dim: usize },
    /// Symmetric `n × n` distance matrix, row-major.
    Matrix(Vec<f64>),
}

/// A finite metric space over point ids `0..n`.
#[derive(Debug, Clone)]
pub struct MetricSpace {
    pub n: usize,
    source: MetricSource,
    pub min_dist: f64,
    pub max_dist: f64,
}

/// Global parameters derived from a metric.
#[derive(Debug, Clone, Copy)]
pub struct MetricParams {
    /// Estimated doubling constant (upper estimate; used for reporting and
    /// capacity pre-sizing only, never for correctness).
    pub lambda_hat: usize,
    /// max_dist / min_dist.
    pub stretch: f64,
    /// Base radius, strictly below the smallest positive distance.
    pub r0: f64,
}

const TRIANGLE_SAMPLE_CAP: usize = 1_000_000;

impl MetricSpace {
    /// Build a metric from 2D-or-higher coordinate rows.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::TooFewPoints(n));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::MalformedInput("zero-dimensional points".into()));
        }
        let mut coords = Vec::with_capacity(n * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::MalformedInput(format!(
                    "point {i} has dimension {} but expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::MalformedInput(format!("point {i} has a non-finite coordinate")));
            }
            coords.extend_from_slice(p);
        }
        let ms = MetricSpace {
            n,
            source: MetricSource::Points { coords, dim },
            min_dist: 0.0,
            max_dist: 0.0,
        };
        ms.finish_ingest()
    }

    /// Build a metric from an explicit symmetric matrix (row-major, length n²).
    pub fn from_matrix(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewPoints(n));
        }
        if entries.len() != n * n {
            return Err(Error::MalformedInput(format!(
                "matrix has {} entries, expected {}",
                entries.len(),
                n * n
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let x = entries[i * n + j];
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::NegativeDistance(i, j));
                }
                if x != entries[j * n + i] {
                    return Err(Error::AsymmetricMatrix(i, j));
                }
            }
            if entries[i * n + i] != 0.0 {
                return Err(Error::MalformedInput(format!("nonzero diagonal at {i}")));
            }
        }
        let ms = MetricSpace {
            n,
            source: MetricSource::Matrix(entries),
            min_dist: 0.0,
            max_dist: 0.0,
        };
        let ms = ms.finish_ingest()?;
        ms.check_triangles()?;
        Ok(ms)
    }

    fn finish_ingest(mut self) -> Result<Self> {
        let mut min_d = f64::INFINITY;
        let mut max_d: f64 = 0.0;
        let mut dup: Option<(usize, usize)> = None;
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                let d = self.dist_raw(u, v);
                if d == 0.0 {
                    dup = Some((u, v));
                    break;
                }
                min_d = min_d.min(d);
                max_d = max_d.max(d);
            }
            if dup.is_some() {
                break;
            }
        }
        if let Some((u, v)) = dup {
            return Err(Error::DuplicatePoint(u, v));
        }
        self.min_dist = min_d;
        self.max_dist = max_d;
        Ok(self)
    }

    /// Triangle-inequality validation for matrix sources: exhaustive for
    /// n ≤ 64, otherwise a seeded random sample of triples.
    fn check_triangles(&self) -> Result<()> {
        let n = self.n;
        let check = |u: usize, v: usize, w: usize| -> Result<()> {
            if self.dist_raw(u, w) > self.dist_raw(u, v) + self.dist_raw(v, w) {
                Err(Error::TriangleViolation(u, v, w))
            } else {
                Ok(())
            }
        };
        if n <= 64 {
            for u in 0..n {
                for v in 0..n {
                    for w in 0..n {
                        check(u, v, w)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7269_616e_676c_65);
            let samples = (10usize.saturating_mul(n).saturating_mul(n).saturating_mul(n))
                .min(TRIANGLE_SAMPLE_CAP);
            for _ in 0..samples {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                let w = rng.gen_range(0..n);
                check(u, v, w)?;
            }
        }
        Ok(())
    }

    #[inline]
    fn dist_raw(&self, u: usize, v: usize) -> f64 {
        match &self.source {
            MetricSource::Points { coords, dim } => {
                let a = &coords[u * dim..(u + 1) * dim];
                let b = &coords[v * dim..(v + 1) * dim];
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }
            MetricSource::Matrix(m) => m[u * self.n + v],
        }
    }

    /// Exact distance between two points. Preprocessing-phase only by module
    /// layering: query-phase modules never receive a `MetricSpace`.
    pub fn distance(&self, u: usize, v: usize) -> Result<f64> {
        if u >= self.n {
            return Err(Error::InvalidId(u));
        }
        if v >= self.n {
            return Err(Error::InvalidId(v));
        }
        Ok(self.dist_raw(u, v))
    }

    /// Infallible distance for internal hot loops; panics on bad ids.
    #[inline]
    pub fn d(&self, u: usize, v: usize) -> f64 {
        debug_assert!(u < self.n && v < self.n);
        self.dist_raw(u, v)
    }

    pub fn source(&self) -> &MetricSource {
        &self.source
    }
}

/// Derive global parameters: `r0 = min_dist / 2`, stretch, and a greedy
/// upper estimate of the doubling constant. Deterministic for a fixed seed.
pub fn compute_params(ms: &MetricSpace) -> MetricParams {
    compute_params_seeded(ms, 0xd0b1)
}

pub fn compute_params_seeded(ms: &MetricSpace, seed: u64) -> MetricParams {
    let n = ms.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<usize> = if n <= 32 {
        (0..n).collect()
    } else {
        (0..32).map(|_| rng.gen_range(0..n)).collect()
    };
    let mut lambda_hat = 2usize;
    for &c in &centers {
        // Candidate radii: quantiles of the distance profile from c.
        let mut ds: Vec<f64> = (0..n).filter(|&v| v != c).map(|v| ms.d(c, v)).collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let picks: Vec<f64> = (1..=16)
            .map(|i| ds[(i * (ds.len() - 1)) / 16])
            .collect();
        for r in picks {
            if r <= 0.0 {
                continue;
            }
            // Greedily cover B(c, 2r) with r-balls centered at members.
            let ball: Vec<usize> = (0..n).filter(|&v| ms.d(c, v) <= 2.0 * r).collect();
            let mut covered = vec![false; ball.len()];
            let mut count = 0usize;
            for i in 0..ball.len() {
                if covered[i] {
                    continue;
                }
                count += 1;
                for j in i..ball.len() {
                    if !covered[j] && ms.d(ball[i], ball[j]) <= r {
                        covered[j] = true;
                    }
                }
            }
            lambda_hat = lambda_hat.max(count);
        }
    }
    MetricParams {
        lambda_hat,
        stretch: ms.max_dist / ms.min_dist,
        r0: ms.min_dist / 2.0,
    }
}
