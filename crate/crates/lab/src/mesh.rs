//! Discretization carrier for the boundary surface measure σ.
//!
//! A mesh is a quasi-uniform point cloud on bΩ with equal weights 1/N, so
//! that σ(E) is estimated by the weighted count of mesh points in E. The
//! circle mesh is equally spaced; the sphere meshes come from a seeded
//! Kronecker lattice pushed through measure-preserving coordinates
//! z_j = √t_j·e^{iθ_j} with t uniform on the simplex.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Model, Point, MAX_DIM};
use crate::error::{Error, Result};
use crate::spatial::SpatialIndex;

/// A unitary transformation of ℂⁿ, used to decorrelate adjacent grids.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary {
    n: usize,
    m: [[Complex64; MAX_DIM]; MAX_DIM],
}

impl Unitary {
    pub fn identity(n: usize) -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
        for (j, row) in m.iter_mut().enumerate() {
            row[j] = Complex64::new(1.0, 0.0);
        }
        Unitary { n, m }
    }

    /// Haar-distributed random unitary via Gram-Schmidt of a complex
    /// Gaussian matrix.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let gauss = |rng: &mut R| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let v: f64 = rng.random();
            let r = (-2.0 * u.ln()).sqrt();
            let t = 2.0 * std::f64::consts::PI * v;
            Complex64::new(r * t.cos(), r * t.sin())
        };
        let mut cols = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
        for col in cols.iter_mut().take(n) {
            for slot in col.iter_mut().take(n) {
                *slot = gauss(rng);
            }
        }
        // Gram-Schmidt with positive normalization = QR with positive
        // diagonal, which is Haar for Gaussian input.
        for j in 0..n {
            for i in 0..j {
                let mut proj = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    proj += cols[j][k] * cols[i][k].conj();
                }
                for k in 0..n {
                    let correction = proj * cols[i][k];
                    cols[j][k] -= correction;
                }
            }
            let norm: f64 = cols[j].iter().take(n).map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            for slot in cols[j].iter_mut().take(n) {
                *slot /= norm;
            }
        }
        // Store columns as the matrix acting by m * z.
        let mut m = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = cols[j][i];
            }
        }
        Unitary { n, m }
    }

    pub fn apply(&self, p: &Point) -> Point {
        debug_assert_eq!(p.dim(), self.n);
        let mut out = [Complex64::new(0.0, 0.0); MAX_DIM];
        for i in 0..self.n {
            for j in 0..self.n {
                out[i] += self.m[i][j] * p.coords()[j];
            }
        }
        Point::new(&out[..self.n])
    }

    pub fn entries(&self) -> Vec<Complex64> {
        let mut v = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                v.push(self.m[i][j]);
            }
        }
        v
    }

    pub fn from_entries(n: usize, entries: &[Complex64]) -> Self {
        let mut m = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = entries[i * n + j];
            }
        }
        Unitary { n, m }
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryMesh {
    model: Model,
    points: Vec<Point>,
    seed: u64,
    index: SpatialIndex,
}

/// Kronecker sequence offsets: fractional parts of √(primes).
const ALPHA: [f64; 5] = [
    1.4142135623730951,
    1.7320508075688772,
    2.23606797749979,
    2.6457513110645907,
    3.3166247903554,
];

impl BoundaryMesh {
    /// Build a quasi-uniform mesh with `resolution` points and equal
    /// weights. Deterministic for a fixed seed.
    pub fn build(model: &Model, resolution: usize, seed: u64) -> Result<Self> {
        if resolution < 1 << 10 {
            return Err(Error::Input(format!(
                "mesh resolution {resolution} below the minimum 1024"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = model.dim();
        let points = match n {
            1 => {
                let offset: f64 = rng.random();
                (0..resolution)
                    .map(|j| {
                        let t = 2.0 * std::f64::consts::PI * (j as f64 + offset)
                            / resolution as f64;
                        Point::scalar(Complex64::new(t.cos(), t.sin()))
                    })
                    .collect::<Vec<_>>()
            }
            _ => {
                let dims = 2 * n - 1;
                let offsets: Vec<f64> = (0..dims).map(|_| rng.random()).collect();
                (0..resolution)
                    .map(|j| {
                        let mut u = [0.0f64; 5];
                        for (d, slot) in u.iter_mut().enumerate().take(dims) {
                            *slot = (offsets[d] + j as f64 * ALPHA[d]).fract();
                        }
                        lattice_point(n, &u)
                    })
                    .collect::<Vec<_>>()
            }
        };
        let index = SpatialIndex::build(&points);
        Ok(BoundaryMesh {
            model: *model,
            points,
            seed,
            index,
        })
    }

    pub fn from_points(model: &Model, points: Vec<Point>, seed: u64) -> Self {
        let index = SpatialIndex::build(&points);
        BoundaryMesh {
            model: *model,
            points,
            seed,
            index,
        }
    }

    /// The same mesh transported by a unitary rotation.
    pub fn rotated(&self, u: &Unitary) -> Self {
        let points: Vec<Point> = self.points.iter().map(|p| u.apply(p)).collect();
        BoundaryMesh::from_points(&self.model, points, self.seed)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Per-point weight; weights are equal and sum to σ(bΩ) = 1.
    pub fn weight(&self) -> f64 {
        1.0 / self.points.len() as f64
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    /// Nearest mesh point in the quasi-metric: (index, distance).
    pub fn nearest(&self, p: &Point) -> (usize, f64) {
        self.index.nearest_quasi(p)
    }

    /// Measured covering radius: max over sampled boundary points of the
    /// quasi-distance to the nearest mesh point.
    pub fn covering_radius(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let q = self.model.sample_boundary(&mut rng);
            let (_, d) = self.nearest(&q);
            worst = worst.max(d);
        }
        worst
    }
}

/// Measure-preserving map from the unit cube to S^{2n-1}:
/// z_j = √t_j e^{2πi u_j} with (t_1..t_n) uniform on the simplex.
fn lattice_point(n: usize, u: &[f64]) -> Point {
    let mut t = [0.0f64; MAX_DIM];
    match n {
        2 => {
            t[0] = u[0];
            t[1] = 1.0 - u[0];
        }
        3 => {
            // Fold the unit square onto the triangle {a + b <= 1}.
            let (mut a, mut b) = (u[0], u[1]);
            if a + b > 1.0 {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            t[0] = a;
            t[1] = b;
            t[2] = 1.0 - a - b;
        }
        _ => unreachable!(),
    }
    let mut c = [Complex64::new(0.0, 0.0); MAX_DIM];
    for j in 0..n {
        let angle = 2.0 * std::f64::consts::PI * u[n - 1 + j];
        c[j] = Complex64::new(angle.cos(), angle.sin()) * t[j].sqrt();
    }
    // Guard against rounding drift off the sphere.
    let norm: f64 = c[..n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for slot in c.iter_mut().take(n) {
        *slot /= norm;
    }
    Point::new(&c[..n])
}
