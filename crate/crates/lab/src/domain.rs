//! Closed-form geometry and analysis on the model domains: the unit disc in
//! ℂ and the unit ball in ℂⁿ, n ≤ 3.
//!
//! The boundary carries the anisotropic quasi-metric d(ζ,η) = |1 − ⟨ζ,η⟩|
//! (normal scale r, complex-tangential scale r^{1/2}) and the normalized
//! surface measure σ, which together form a space of homogeneous type. The
//! interior carries the Bergman kernel n!/(πⁿ(1 − ⟨z,w⟩)^{n+1}) and the
//! Möbius pseudo-hyperbolic distance, i.e. tanh of the Kobayashi distance.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum complex dimension of a model domain.
pub const MAX_DIM: usize = 3;

/// Tolerance for the "on the boundary" test |z| = 1.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// A point of the closed domain, stored inline so it is `Copy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    dim: u8,
    coords: [Complex64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[Complex64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "point dimension must be 1..=3"
        );
        let mut c = [Complex64::new(0.0, 0.0); MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    /// One-dimensional point (unit disc model).
    pub fn scalar(z: Complex64) -> Self {
        Point::new(&[z])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords[..self.dim as usize]
    }

    /// First coordinate; the whole point in the disc model.
    pub fn z1(&self) -> Complex64 {
        self.coords[0]
    }

    pub fn origin(dim: usize) -> Self {
        Point::new(&vec![Complex64::new(0.0, 0.0); dim])
    }

    /// Hermitian inner product ⟨self, other⟩ = Σ zⱼ conj(wⱼ).
    pub fn inner(&self, other: &Point) -> Complex64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = Complex64::new(0.0, 0.0);
        for j in 0..self.dim as usize {
            s += self.coords[j] * other.coords[j].conj();
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords()[..].iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut p = *self;
        for c in &mut p.coords[..p.dim as usize] {
            *c *= t;
        }
        p
    }

    /// Euclidean distance in ℂⁿ ≅ ℝ²ⁿ.
    pub fn euclid_dist(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for j in 0..self.dim as usize {
            s += (self.coords[j] - other.coords[j]).norm_sqr();
        }
        s.sqrt()
    }

    pub fn is_boundary(&self) -> bool {
        (self.norm() - 1.0).abs() <= BOUNDARY_TOL
    }

    pub fn is_interior(&self) -> bool {
        self.norm() < 1.0 - BOUNDARY_TOL
    }
}

/// Measured quasi-metric and doubling constants for (bΩ, d, σ).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomogeneityCertificate {
    /// sup over sampled triples of d(x,y)/(d(x,z) + d(z,y)).
    pub quasi_triangle: f64,
    /// sup over sampled (x, r) of σ(B(x,2r))/σ(B(x,r)).
    pub doubling: f64,
    pub sample_count: usize,
    pub seed: u64,
}

/// A model domain: the unit disc (n = 1) or unit ball (n = 2, 3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    dim: usize,
    /// Width of the collar on which the normal projection is certified;
    /// for the ball the radial projection is global away from the origin.
    eps0: f64,
    /// Bergman kernel normalization n!/πⁿ.
    kernel_norm: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl Model {
    pub fn ball(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "model dimension must be 1..=3");
        Model {
            dim,
            eps0: 0.5,
            kernel_norm: factorial(dim) / std::f64::consts::PI.powi(dim as i32),
        }
    }

    pub fn disc() -> Self {
        Model::ball(1)
    }

    /// Parse a model name: `disc`, `ball:2` or `ball:3`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "disc" | "ball:1" => Ok(Model::disc()),
            "ball:2" => Ok(Model::ball(2)),
            "ball:3" => Ok(Model::ball(3)),
            other => Err(Error::Input(format!(
                "unknown model `{other}` (expected disc, ball:2 or ball:3)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        if self.dim == 1 {
            "disc".to_string()
        } else {
            format!("ball:{}", self.dim)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn kernel_norm(&self) -> f64 {
        self.kernel_norm
    }

    /// Lebesgue volume of the ball: πⁿ/n!.
    pub fn volume(&self) -> f64 {
        std::f64::consts::PI.powi(self.dim as i32) / factorial(self.dim)
    }

    /// Surface area of the unit sphere S^{2n-1}: 2πⁿ/(n−1)!.
    pub fn boundary_area(&self) -> f64 {
        2.0 * std::f64::consts::PI.powi(self.dim as i32) / factorial(self.dim - 1)
    }

    fn check_dim(&self, z: &Point) -> Result<()> {
        if z.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.dim(),
            });
        }
        Ok(())
    }

    /// Signed Euclidean distance to the boundary: ρ(z) = |z| − 1, so that
    /// |∇ρ| = 1 on the boundary.
    pub fn defining_function(&self, z: &Point) -> Result<f64> {
        self.check_dim(z)?;
        Ok(z.norm() - 1.0)
    }

    /// Normal (radial) projection z ↦ z/|z| onto the boundary.
    pub fn project_to_boundary(&self, z: &Point) -> Result<Point> {
        self.check_dim(z)?;
        let r = z.norm();
        if r == 0.0 {
            return Err(Error::UndefinedProjection);
        }
        Ok(z.scale(1.0 / r))
    }

    /// Boundary quasi-metric d(ζ,η) = |1 − ⟨ζ,η⟩|.
    pub fn boundary_quasimetric(&self, zeta: &Point, eta: &Point) -> Result<f64> {
        self.check_dim(zeta)?;
        self.check_dim(eta)?;
        for p in [zeta, eta] {
            if !p.is_boundary() {
                return Err(Error::OffBoundary { norm: p.norm() });
            }
        }
        Ok(quasi_dist(zeta, eta))
    }

    /// Bergman kernel K(z,w) = n!/(πⁿ (1 − ⟨z,w⟩)^{n+1}).
    pub fn bergman_kernel(&self, z: &Point, w: &Point) -> Result<Complex64> {
        self.check_dim(z)?;
        self.check_dim(w)?;
        let one = Complex64::new(1.0, 0.0);
        let denom = (one - z.inner(w)).powi(self.dim as i32 + 1);
        Ok(self.kernel_norm / denom)
    }

    /// K(z,z), always real and positive for interior z.
    pub fn kernel_diag(&self, z: &Point) -> f64 {
        let d = 1.0 - z.norm_sq();
        self.kernel_norm / d.powi(self.dim as i32 + 1)
    }

    /// tanh of the Kobayashi distance: the Möbius pseudo-hyperbolic distance
    /// |φ_z(w)|, computed from the identity
    /// 1 − |φ_z(w)|² = (1−|z|²)(1−|w|²)/|1 − ⟨z,w⟩|².
    pub fn kobayashi_tanh(&self, z: &Point, w: &Point) -> Result<f64> {
        self.check_dim(z)?;
        self.check_dim(w)?;
        for p in [z, w] {
            if !p.is_interior() {
                return Err(Error::NotInterior { norm: p.norm() });
            }
        }
        let num = (1.0 - z.norm_sq()) * (1.0 - w.norm_sq());
        let den = (Complex64::new(1.0, 0.0) - z.inner(w)).norm_sqr();
        let t = 1.0 - num / den;
        Ok(t.max(0.0).sqrt().min(1.0 - f64::EPSILON))
    }

    /// Möbius automorphism φ_a(z) of the ball, with φ_a(0) = a and
    /// φ_a(a) = 0 (an involution).
    pub fn mobius(&self, a: &Point, z: &Point) -> Point {
        debug_assert_eq!(a.dim(), self.dim);
        debug_assert_eq!(z.dim(), self.dim);
        let a_sq = a.norm_sq();
        if a_sq == 0.0 {
            return z.scale(-1.0);
        }
        let one = Complex64::new(1.0, 0.0);
        let za = z.inner(a);
        let s = (1.0 - a_sq).sqrt();
        // φ_a(z) = (a − P_a z − s Q_a z)/(1 − ⟨z,a⟩),
        // P_a the orthogonal projection onto span{a}.
        let coef_p = za / a_sq;
        let mut out = [Complex64::new(0.0, 0.0); MAX_DIM];
        for j in 0..self.dim {
            let pz = coef_p * a.coords()[j];
            let qz = z.coords()[j] - pz;
            out[j] = (a.coords()[j] - pz - s * qz) / (one - za);
        }
        Point::new(&out[..self.dim])
    }

    /// Real Jacobian of φ_a at w: ((1−|a|²)/|1−⟨w,a⟩|²)^{n+1}.
    pub fn mobius_jacobian(&self, a: &Point, w: &Point) -> f64 {
        let num = 1.0 - a.norm_sq();
        let den = (Complex64::new(1.0, 0.0) - w.inner(a)).norm_sqr();
        (num / den).powi(self.dim as i32 + 1)
    }

    /// Uniform sample from the normalized surface measure σ on bΩ.
    pub fn sample_boundary<R: Rng>(&self, rng: &mut R) -> Point {
        let mut c = [Complex64::new(0.0, 0.0); MAX_DIM];
        loop {
            let mut n2 = 0.0;
            for slot in c.iter_mut().take(self.dim) {
                *slot = Complex64::new(gauss(rng), gauss(rng));
                n2 += slot.norm_sqr();
            }
            if n2 > 1e-12 {
                let inv = 1.0 / n2.sqrt();
                for slot in c.iter_mut().take(self.dim) {
                    *slot *= inv;
                }
                return Point::new(&c[..self.dim]);
            }
        }
    }

    /// Uniform sample from Lebesgue measure on Ω, via the radial inverse CDF
    /// r = u^{1/2n}.
    pub fn sample_interior<R: Rng>(&self, rng: &mut R) -> Point {
        let dir = self.sample_boundary(rng);
        let u: f64 = rng.random();
        let r = u.powf(1.0 / (2.0 * self.dim as f64));
        dir.scale(r)
    }

    /// Measure the quasi-triangle constant and the doubling constant of
    /// (bΩ, d, σ) over seeded random triples and balls.
    pub fn certify_homogeneous_type(
        &self,
        sample_count: usize,
        seed: u64,
    ) -> HomogeneityCertificate {
        assert!(sample_count >= 1000, "need at least 1000 samples");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut kappa: f64 = 0.0;
        for _ in 0..sample_count {
            let x = self.sample_boundary(&mut rng);
            let y = self.sample_boundary(&mut rng);
            let z = self.sample_boundary(&mut rng);
            let den = quasi_dist(&x, &z) + quasi_dist(&z, &y);
            if den > 1e-14 {
                kappa = kappa.max(quasi_dist(&x, &y) / den);
            }
        }

        // Reference cloud for measuring σ(B(x,r)) by counting.
        let cloud_size = sample_count.min(200_000);
        let cloud: Vec<Point> = (0..cloud_size)
            .map(|_| self.sample_boundary(&mut rng))
            .collect();
        // Keep the expected count in the smaller ball above ~40 so the
        // ratio is resolved.
        let r_min = match self.dim {
            1 => 40.0 * std::f64::consts::PI / cloud_size as f64,
            _ => (80.0 / cloud_size as f64).powf(1.0 / self.dim as f64),
        };
        let r_max: f64 = 0.4;
        let trials = (sample_count / 10).max(100);
        let mut doubling: f64 = 0.0;
        for _ in 0..trials {
            let x = self.sample_boundary(&mut rng);
            let u: f64 = rng.random();
            let r = r_min * (r_max / r_min).powf(u);
            let mut small = 0usize;
            let mut big = 0usize;
            for p in &cloud {
                let d = quasi_dist(&x, p);
                if d < r {
                    small += 1;
                }
                if d < 2.0 * r {
                    big += 1;
                }
            }
            if small >= 20 {
                doubling = doubling.max(big as f64 / small as f64);
            }
        }

        HomogeneityCertificate {
            quasi_triangle: kappa,
            doubling,
            sample_count,
            seed,
        }
    }
}

/// d(ζ,η) = |1 − ⟨ζ,η⟩| without boundary validation, for hot loops.
#[inline]
pub fn quasi_dist(zeta: &Point, eta: &Point) -> f64 {
    (Complex64::new(1.0, 0.0) - zeta.inner(eta)).norm()
}

/// Standard normal via Box-Muller, using only `Rng::random`.
fn gauss<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            let v: f64 = rng.random();
            return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn defining_function_values() {
        let disc = Model::disc();
        assert_relative_eq!(
            disc.defining_function(&Point::scalar(c(0.3, 0.0))).unwrap(),
            -0.7
        );
        assert_relative_eq!(disc.defining_function(&Point::scalar(c(0.0, 0.0))).unwrap(), -1.0);
        let ball = Model::ball(2);
        let z = Point::new(&[c(1.0, 0.0), c(0.0, 0.0)]);
        assert_relative_eq!(ball.defining_function(&z).unwrap(), 0.0);
    }

    #[test]
    fn defining_function_dimension_mismatch() {
        let ball = Model::ball(2);
        let err = ball.defining_function(&Point::scalar(c(0.1, 0.0))).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn projection_cases() {
        let ball = Model::ball(2);
        let z = Point::new(&[c(0.5, 0.0), c(0.0, 0.0)]);
        let p = ball.project_to_boundary(&z).unwrap();
        assert_relative_eq!(p.coords()[0].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.coords()[1].norm(), 0.0);

        let disc = Model::disc();
        let p = disc.project_to_boundary(&Point::scalar(c(0.0, 0.9))).unwrap();
        assert_relative_eq!(p.z1().re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(p.z1().im, 1.0, epsilon = 1e-15);

        assert!(matches!(
            disc.project_to_boundary(&Point::scalar(c(0.0, 0.0))),
            Err(Error::UndefinedProjection)
        ));
    }

    #[test]
    fn projection_is_nearest_boundary_point() {
        let ball = Model::ball(2);
        let z = Point::new(&[c(0.3, -0.2), c(0.1, 0.4)]);
        let p = ball.project_to_boundary(&z).unwrap();
        assert!(p.is_boundary());
        // dist(z, π(z)) = dist(z, bΩ) = 1 − |z|, and the difference is radial.
        assert_relative_eq!(z.euclid_dist(&p), 1.0 - z.norm(), epsilon = 1e-14);
    }

    #[test]
    fn quasimetric_values() {
        let disc = Model::disc();
        let one = Point::scalar(c(1.0, 0.0));
        let i = Point::scalar(c(0.0, 1.0));
        assert_relative_eq!(disc.boundary_quasimetric(&one, &one).unwrap(), 0.0);
        assert_relative_eq!(
            disc.boundary_quasimetric(&one, &i).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-14
        );
        let sphere = Model::ball(2);
        let e1 = Point::new(&[c(1.0, 0.0), c(0.0, 0.0)]);
        let e2 = Point::new(&[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_relative_eq!(sphere.boundary_quasimetric(&e1, &e2).unwrap(), 1.0);

        let off = Point::scalar(c(0.5, 0.0));
        assert!(matches!(
            disc.boundary_quasimetric(&one, &off),
            Err(Error::OffBoundary { .. })
        ));
    }

    #[test]
    fn kernel_values() {
        let disc = Model::disc();
        let zero = Point::scalar(c(0.0, 0.0));
        let half = Point::scalar(c(0.5, 0.0));
        let pi = std::f64::consts::PI;
        assert_relative_eq!(
            disc.bergman_kernel(&zero, &zero).unwrap().re,
            1.0 / pi,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            disc.bergman_kernel(&half, &half).unwrap().re,
            16.0 / (9.0 * pi),
            epsilon = 1e-14
        );
        let ball = Model::ball(2);
        let z0 = Point::origin(2);
        assert_relative_eq!(
            ball.bergman_kernel(&z0, &z0).unwrap().re,
            2.0 / (pi * pi),
            epsilon = 1e-14
        );
    }

    #[test]
    fn kernel_hermitian_symmetry() {
        let ball = Model::ball(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let z = ball.sample_interior(&mut rng);
            let w = ball.sample_interior(&mut rng);
            let kzw = ball.bergman_kernel(&z, &w).unwrap();
            let kwz = ball.bergman_kernel(&w, &z).unwrap();
            assert!((kzw - kwz.conj()).norm() < 1e-12 * (1.0 + kzw.norm()));
            let diag = ball.bergman_kernel(&z, &z).unwrap();
            assert!(diag.im.abs() < 1e-13 * diag.re);
            assert!(diag.re > 0.0);
            assert_relative_eq!(diag.re, ball.kernel_diag(&z), max_relative = 1e-12);
        }
    }

    #[test]
    fn kobayashi_values() {
        let disc = Model::disc();
        let z0 = Point::scalar(c(0.0, 0.0));
        let h = Point::scalar(c(0.5, 0.0));
        assert_relative_eq!(disc.kobayashi_tanh(&z0, &h).unwrap(), 0.5, epsilon = 1e-14);
        let a = Point::scalar(c(0.5, 0.0));
        let b = Point::scalar(c(0.8, 0.0));
        assert_relative_eq!(disc.kobayashi_tanh(&a, &b).unwrap(), 0.5, epsilon = 1e-14);
        let ball = Model::ball(2);
        let p = Point::new(&[c(0.1, 0.0), c(0.2, 0.0)]);
        assert_relative_eq!(ball.kobayashi_tanh(&p, &p).unwrap(), 0.0);

        let boundary = Point::scalar(c(1.0, 0.0));
        assert!(matches!(
            disc.kobayashi_tanh(&z0, &boundary),
            Err(Error::NotInterior { .. })
        ));
    }

    #[test]
    fn mobius_matches_distance_and_jacobian() {
        let ball = Model::ball(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = ball.sample_interior(&mut rng);
            let z = ball.sample_interior(&mut rng);
            let img = ball.mobius(&a, &z);
            assert_relative_eq!(
                img.norm(),
                ball.kobayashi_tanh(&a, &z).unwrap(),
                epsilon = 1e-10
            );
            // Involution: φ_a(φ_a(z)) = z.
            let back = ball.mobius(&a, &img);
            assert!(back.euclid_dist(&z) < 1e-10);
        }
        // φ_a(0) = a.
        let a = Point::new(&[c(0.3, 0.1), c(-0.2, 0.4)]);
        let at0 = ball.mobius(&a, &Point::origin(2));
        assert!(at0.euclid_dist(&a) < 1e-14);
    }

    #[test]
    fn circle_quasi_triangle_is_chordal_metric() {
        // On the circle |1 − ζη̄| = |ζ − η|, so the quasi-triangle constant
        // is exactly 1. Dense 1-D scan as the independent oracle.
        let m = 120usize;
        let pt = |j: usize| {
            let t = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            Point::scalar(c(t.cos(), t.sin()))
        };
        let mut sup: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                for d in 0..m {
                    let (x, y, z) = (pt(a), pt(b), pt(d));
                    let den = quasi_dist(&x, &z) + quasi_dist(&z, &y);
                    if den > 1e-14 {
                        sup = sup.max(quasi_dist(&x, &y) / den);
                    }
                }
            }
        }
        assert!(sup <= 1.0 + 1e-12, "oracle sup = {sup}");
        assert!(sup > 0.95);
    }

    #[test]
    fn homogeneity_certificates() {
        let disc = Model::disc();
        let cert = disc.certify_homogeneous_type(20_000, 7);
        assert!(cert.quasi_triangle <= 2.0);
        assert!(cert.quasi_triangle > 0.9);
        assert!(cert.doubling.is_finite() && cert.doubling > 1.0);

        let sphere = Model::ball(2);
        let cert2 = sphere.certify_homogeneous_type(20_000, 7);
        assert!(cert2.quasi_triangle <= 2.0, "kappa = {}", cert2.quasi_triangle);
        assert!(cert2.doubling.is_finite() && cert2.doubling > 1.0);

        // Determinism.
        let again = sphere.certify_homogeneous_type(20_000, 7);
        assert_eq!(cert2.quasi_triangle, again.quasi_triangle);
        assert_eq!(cert2.doubling, again.doubling);

        // Stability of kappa across seeds (±5%).
        let other = sphere.certify_homogeneous_type(20_000, 8);
        let rel = (cert2.quasi_triangle - other.quasi_triangle).abs()
            / cert2.quasi_triangle;
        assert!(rel < 0.05, "kappa unstable: {rel}");
    }

    #[test]
    fn volume_constants() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(Model::disc().volume(), pi);
        assert_relative_eq!(Model::ball(2).volume(), pi * pi / 2.0);
        assert_relative_eq!(Model::ball(3).volume(), pi.powi(3) / 6.0);
        assert_relative_eq!(Model::disc().boundary_area(), 2.0 * pi);
        assert_relative_eq!(Model::ball(2).boundary_area(), 2.0 * pi * pi);
    }

    #[test]
    fn model_parsing() {
        assert_eq!(Model::parse("disc").unwrap().dim(), 1);
        assert_eq!(Model::parse("ball:2").unwrap().dim(), 2);
        assert_eq!(Model::parse("ball:3").unwrap().dim(), 3);
        assert!(Model::parse("ball:4").is_err());
        assert_eq!(Model::parse("ball:2").unwrap().name(), "ball:2");
    }
}
