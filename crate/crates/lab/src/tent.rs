//! Tents, kubes and the Bergman tree over a dyadic grid family.
//!
//! The tent of a cube Q is T(Q) = {z : π(z) ∈ Q, 1−|z| ≤ ℓ(Q)}, with
//! T(bΩ) = Ω. Because children partition their parent and tents are
//! monotone, the kube T(Q) minus all offspring tents is the band
//! {z : π(z) ∈ Q, δℓ < 1−|z| ≤ ℓ}. The tent center sits on the inward
//! normal at half the sidelength: c_Q = (1 − δᵏ/2)·c(Q).
//!
//! Volumes are Monte-Carlo estimates in polar form: the radial integral
//! ∫ r^{2n-1} dr over the tent band is exact, the boundary factor is the
//! mesh estimate of σ(Q), and the standard error is the binomial error of
//! that boundary factor. The analytic comparison value ℓ^{n+1} is kept
//! only as a cross-check.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::domain::{Model, Point};
use crate::error::{Error, Result};
use crate::grid::GridFamily;
use crate::spatial::SpatialIndex;

/// Address of a cube inside a grid family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CubeKey {
    pub grid: usize,
    pub gen: usize,
    pub idx: usize,
}

impl CubeKey {
    pub fn root(grid: usize) -> Self {
        CubeKey { grid, gen: 0, idx: 0 }
    }

    pub fn is_root(&self) -> bool {
        self.gen == 0
    }
}

/// Calibrated Kobayashi-ball sandwich parameters for the kubes:
/// B_Ω(c_Q, α) ⊆ T^K(Q) ⊆ B_Ω(c_Q, β) on every sampled non-root cube.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KubeParams {
    pub alpha: f64,
    pub beta: f64,
    pub beta_tilde: f64,
    /// (α, β) calibrated per generation, for the uniformity check.
    pub per_generation: Vec<(f64, f64)>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmeanReport {
    /// sup over sampled (z, Q) of f(z)·Vol(T^K(Q)) / ∫_{B(c_Q, β̃)} f dV.
    pub constant: f64,
    /// Max of the ratio per generation, 1-indexed by generation.
    pub per_generation_max: Vec<f64>,
    pub sampled_cubes: usize,
    pub low_confidence: usize,
}

/// One audit row per cube for the volume report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TentAuditRow {
    pub grid: usize,
    pub gen: usize,
    pub cube: usize,
    pub sidelength: f64,
    pub vol_mc: f64,
    pub vol_se: f64,
    pub vol_analytic: f64,
    pub kube_vol_mc: f64,
}

pub struct TentTree {
    model: Model,
    family: GridFamily,
    /// Lazily built per-(grid, generation) indices over tent centers.
    center_idx: Vec<Vec<OnceLock<SpatialIndex>>>,
    /// Euclidean mesh spacing scale, for kube jitter sampling.
    jitter_scale: f64,
}

impl TentTree {
    pub fn new(family: GridFamily) -> Self {
        let model = *family.model();
        let depth = family.depth();
        let center_idx = (0..family.grids().len())
            .map(|_| (0..=depth).map(|_| OnceLock::new()).collect())
            .collect();
        let n = model.dim();
        let mesh_len = family.grid(0).mesh().len() as f64;
        // Typical Euclidean spacing of a quasi-uniform mesh on the
        // (2n−1)-manifold S^{2n-1}.
        let manifold_vol = match n {
            1 => 2.0 * std::f64::consts::PI,
            2 => 2.0 * std::f64::consts::PI.powi(2),
            _ => std::f64::consts::PI.powi(3),
        };
        let jitter_scale = (manifold_vol / mesh_len).powf(1.0 / (2.0 * n as f64 - 1.0));
        TentTree {
            model,
            family,
            center_idx,
            jitter_scale,
        }
    }

    pub fn family(&self) -> &GridFamily {
        &self.family
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn delta(&self) -> f64 {
        self.family.delta()
    }

    pub fn depth(&self) -> usize {
        self.family.depth()
    }

    pub fn sidelength(&self, gen: usize) -> f64 {
        self.family.grid(0).sidelength(gen)
    }

    pub fn cube_count(&self, grid: usize, gen: usize) -> usize {
        self.family.grid(grid).generation(gen).len()
    }

    /// Iterate all cubes of all grids, generation 0 included.
    pub fn keys(&self) -> impl Iterator<Item = CubeKey> + '_ {
        (0..self.family.grids().len()).flat_map(move |grid| {
            (0..=self.depth()).flat_map(move |gen| {
                (0..self.cube_count(grid, gen)).map(move |idx| CubeKey { grid, gen, idx })
            })
        })
    }

    // ------------------------------------------------------------------
    // Geometry.
    // ------------------------------------------------------------------

    /// ∫ r^{2n-1} dr over [lo, hi] — the exact radial factor of a polar
    /// volume.
    fn radial(&self, lo: f64, hi: f64) -> f64 {
        let m = 2 * self.model.dim() as i32;
        (hi.powi(m) - lo.powi(m)) / m as f64
    }

    /// Tent center c_Q = (1 − δᵏ/2)·c(Q); the origin for the root.
    pub fn tent_center(&self, key: CubeKey) -> Point {
        if key.is_root() {
            return Point::origin(self.model.dim());
        }
        let c = self.family.grid(key.grid).center_point(key.gen, key.idx);
        c.scale(1.0 - self.sidelength(key.gen) / 2.0)
    }

    /// Monte-Carlo tent volume and its standard error.
    pub fn tent_volume(&self, key: CubeKey) -> (f64, f64) {
        if key.is_root() {
            return (self.model.volume(), 0.0);
        }
        let grid = self.family.grid(key.grid);
        let sigma = grid.generation(key.gen).sigma[key.idx];
        let l = self.sidelength(key.gen);
        let area = self.model.boundary_area();
        let radial = self.radial(1.0 - l, 1.0);
        let n_mesh = grid.mesh().len() as f64;
        let se = area * radial * (sigma * (1.0 - sigma) / n_mesh).sqrt();
        (area * sigma * radial, se)
    }

    /// Monte-Carlo volume of the kube band of a cube. For the root this is
    /// the region above the generation-1 tents.
    pub fn kube_volume(&self, key: CubeKey) -> (f64, f64) {
        let area = self.model.boundary_area();
        if key.is_root() {
            let hi = if self.depth() == 0 {
                1.0
            } else {
                1.0 - self.delta()
            };
            return (area * self.radial(0.0, hi), 0.0);
        }
        let grid = self.family.grid(key.grid);
        let sigma = grid.generation(key.gen).sigma[key.idx];
        let l = self.sidelength(key.gen);
        let radial = self.radial(1.0 - l, 1.0 - self.delta() * l);
        let n_mesh = grid.mesh().len() as f64;
        let se = area * radial * (sigma * (1.0 - sigma) / n_mesh).sqrt();
        (area * sigma * radial, se)
    }

    /// The comparison value ℓ(Q)^{n+1}.
    pub fn analytic_volume(&self, key: CubeKey) -> f64 {
        if key.is_root() {
            return 1.0;
        }
        self.sidelength(key.gen).powi(self.model.dim() as i32 + 1)
    }

    // ------------------------------------------------------------------
    // Membership predicates.
    // ------------------------------------------------------------------

    /// Deepest generation whose tents still contain a point at boundary
    /// distance `dist`, together with the nearest mesh index of π(z).
    /// Returns (mesh index, max generation); generation 0 always counts.
    pub fn tent_chain(&self, grid: usize, z: &Point) -> (usize, usize) {
        let dist = 1.0 - z.norm();
        let mut max_gen = 0;
        for k in 1..=self.depth() {
            if dist <= self.sidelength(k) {
                max_gen = k;
            } else {
                break;
            }
        }
        if max_gen == 0 {
            return (0, 0);
        }
        let proj = z.scale(1.0 / z.norm());
        let (i, _) = self.family.grid(grid).mesh().nearest(&proj);
        (i, max_gen)
    }

    pub fn tent_membership(&self, z: &Point, key: CubeKey) -> bool {
        if key.is_root() {
            return true;
        }
        let dist = 1.0 - z.norm();
        if dist > self.sidelength(key.gen) || z.norm() == 0.0 {
            return false;
        }
        let grid = self.family.grid(key.grid);
        let proj = z.scale(1.0 / z.norm());
        let (i, _) = grid.mesh().nearest(&proj);
        grid.chain(key.gen, i) == key.idx as u32
    }

    /// Band predicate: π(z) ∈ Q and δℓ < 1−|z| ≤ ℓ. For the root the band
    /// is 1−|z| > δ (everything above the generation-1 tents).
    pub fn kube_membership(&self, z: &Point, key: CubeKey) -> bool {
        let dist = 1.0 - z.norm();
        if key.is_root() {
            return self.depth() == 0 || dist > self.delta();
        }
        let l = self.sidelength(key.gen);
        if !(dist > self.delta() * l && dist <= l) {
            return false;
        }
        let grid = self.family.grid(key.grid);
        let proj = z.scale(1.0 / z.norm());
        let (i, _) = grid.mesh().nearest(&proj);
        grid.chain(key.gen, i) == key.idx as u32
    }

    /// The kube generation claiming boundary distance `dist` under the
    /// truncated tree: the root band is (δ, 1], generation k claims
    /// (δ^{k+1}, δᵏ], and the leaf generation extends down to 0.
    pub fn band_generation(&self, dist: f64) -> usize {
        if self.depth() == 0 || dist > self.delta() {
            return 0;
        }
        for k in 1..self.depth() {
            if dist > self.sidelength(k + 1) {
                return k;
            }
        }
        self.depth()
    }

    /// The unique kube of one grid claiming z (a partition of Ω; tents of
    /// unbuilt deeper generations are attributed to the leaf).
    pub fn kube_of(&self, grid: usize, z: &Point) -> CubeKey {
        let dist = 1.0 - z.norm();
        let gen = self.band_generation(dist);
        if gen == 0 {
            return CubeKey::root(grid);
        }
        let g = self.family.grid(grid);
        let proj = z.scale(1.0 / z.norm());
        let (i, _) = g.mesh().nearest(&proj);
        CubeKey {
            grid,
            gen,
            idx: g.chain(gen, i) as usize,
        }
    }

    /// All cubes of strictly deeper generations whose center projects into
    /// Q (the Bergman-tree offspring).
    pub fn offspring(&self, key: CubeKey) -> Vec<CubeKey> {
        let grid = self.family.grid(key.grid);
        let mut out = Vec::new();
        for gen in key.gen + 1..=self.depth() {
            for (idx, &center) in grid.generation(gen).centers.iter().enumerate() {
                if grid.chain(key.gen, center as usize) == key.idx as u32 {
                    out.push(CubeKey {
                        grid: key.grid,
                        gen,
                        idx,
                    });
                }
            }
        }
        out
    }

    // ------------------------------------------------------------------
    // Kobayashi-ball machinery.
    // ------------------------------------------------------------------

    fn center_index(&self, grid: usize, gen: usize) -> &SpatialIndex {
        self.center_idx[grid][gen].get_or_init(|| {
            let pts: Vec<Point> = (0..self.cube_count(grid, gen))
                .map(|idx| self.tent_center(CubeKey { grid, gen, idx }))
                .collect();
            SpatialIndex::build(&pts)
        })
    }

    /// Visit every non-root tent center of one grid within Kobayashi
    /// pseudo-hyperbolic distance `beta` of z, passing (gen, idx, tanh).
    ///
    /// Candidate generations and Euclidean radii come from the rigorous
    /// bounds (1−β²)(a+b−ab)² ≤ 4ab and |z−c|² ≤ 2|1−⟨z,c⟩| for
    /// a = 1−|c|, b = 1−|z|.
    pub fn visit_kobayashi_centers<F: FnMut(usize, usize, f64)>(
        &self,
        grid: usize,
        z: &Point,
        beta: f64,
        mut f: F,
    ) {
        let b = 1.0 - z.norm();
        let one_minus_b2 = 1.0 - beta * beta;
        for gen in 1..=self.depth() {
            let a = self.sidelength(gen) / 2.0;
            let t = b / a;
            if t < one_minus_b2 / 16.0 || t > 16.0 / one_minus_b2 {
                continue;
            }
            let r_e = 2.0 * (a * b / one_minus_b2).powf(0.25) * 1.000001;
            let index = self.center_index(grid, gen);
            let mut hits: Vec<(u32, f64)> = Vec::new();
            index.visit_euclid_ball(z, r_e, |i, _| {
                let c = self.tent_center(CubeKey {
                    grid,
                    gen,
                    idx: i as usize,
                });
                if let Ok(th) = self.model.kobayashi_tanh(&c, z) {
                    if th < beta {
                        hits.push((i, th));
                    }
                }
            });
            hits.sort_unstable_by(|x, y| x.0.cmp(&y.0));
            for (i, th) in hits {
                f(gen, i as usize, th);
            }
        }
    }

    /// Membership in the enlarged tent of Q: some offspring tent center
    /// is within Kobayashi distance β of z.
    pub fn enlarged_tent_membership(&self, z: &Point, key: CubeKey, beta: f64) -> bool {
        let grid = self.family.grid(key.grid);
        let mut found = false;
        self.visit_kobayashi_centers(key.grid, z, beta, |gen, idx, _| {
            if found || gen <= key.gen {
                return;
            }
            let center = grid.generation(gen).centers[idx] as usize;
            if grid.chain(key.gen, center) == key.idx as u32 {
                found = true;
            }
        });
        found
    }

    /// ∫_{B_Ω(c,r)} f dV by Möbius-pushforward importance sampling:
    /// z = φ_c(w) for w uniform in the ball of radius r, weighted by the
    /// real Jacobian. Returns (value, batch standard error).
    pub fn kobayashi_ball_integral<F: Fn(&Point) -> f64>(
        &self,
        center: &Point,
        r: f64,
        f: &F,
        samples: usize,
        rng: &mut ChaCha8Rng,
    ) -> (f64, f64) {
        let n = self.model.dim();
        let ball_vol = self.model.volume() * r.powi(2 * n as i32);
        let batches = 16usize.min(samples);
        let per = samples / batches;
        let mut means = Vec::with_capacity(batches);
        for _ in 0..batches {
            let mut acc = 0.0;
            for _ in 0..per {
                let dir = self.model.sample_boundary(rng);
                let u: f64 = rng.random();
                let w = dir.scale(r * u.powf(1.0 / (2.0 * n as f64)));
                let z = self.model.mobius(center, &w);
                acc += f(&z) * self.model.mobius_jacobian(center, &w);
            }
            means.push(acc / per as f64);
        }
        let mean: f64 = means.iter().sum::<f64>() / batches as f64;
        let var: f64 = means
            .iter()
            .map(|m| (m - mean).powi(2))
            .sum::<f64>()
            / (batches as f64 - 1.0).max(1.0);
        (
            ball_vol * mean,
            ball_vol * (var / batches as f64).sqrt(),
        )
    }

    /// Draw a point of the kube band of a non-root cube: a member mesh
    /// direction with tangential jitter (rejected if it leaves the cube)
    /// and an exact radial draw from the band.
    pub fn sample_kube<R: Rng>(&self, key: CubeKey, rng: &mut R) -> Point {
        debug_assert!(!key.is_root());
        let grid = self.family.grid(key.grid);
        let gen = grid.generation(key.gen);
        let members = gen.members(key.idx);
        let l = self.sidelength(key.gen);
        let (r_lo, r_hi) = (1.0 - l, 1.0 - self.delta() * l);
        let m = 2.0 * self.model.dim() as f64;
        for _ in 0..64 {
            let i = members[rng.random_range(0..members.len())] as usize;
            let base = grid.mesh().point(i);
            let mut coords = [num_complex::Complex64::new(0.0, 0.0); 3];
            for (j, c) in base.coords().iter().enumerate() {
                let jr: f64 = rng.random::<f64>() - 0.5;
                let ji: f64 = rng.random::<f64>() - 0.5;
                coords[j] = c + num_complex::Complex64::new(jr, ji) * (2.0 * self.jitter_scale);
            }
            let dir = Point::new(&coords[..self.model.dim()]);
            let dir = dir.scale(1.0 / dir.norm());
            let (nearest, _) = grid.mesh().nearest(&dir);
            if grid.chain(key.gen, nearest) != key.idx as u32 {
                continue;
            }
            let u: f64 = rng.random();
            let r = (r_lo.powf(m) + u * (r_hi.powf(m) - r_lo.powf(m))).powf(1.0 / m);
            return dir.scale(r);
        }
        // Jitter kept escaping the cube; fall back to the exact member
        // direction.
        let i = members[rng.random_range(0..members.len())] as usize;
        let u: f64 = rng.random();
        let r = (r_lo.powf(m) + u * (r_hi.powf(m) - r_lo.powf(m))).powf(1.0 / m);
        grid.mesh().point(i).scale(r)
    }

    // ------------------------------------------------------------------
    // Calibration and sub-mean checks.
    // ------------------------------------------------------------------

    /// Deterministic subset of non-root cube keys: up to `cap` per
    /// generation per grid, by stride.
    pub fn sampled_cubes(&self, cap: usize) -> Vec<CubeKey> {
        let mut keys = Vec::new();
        for grid in 0..self.family.grids().len() {
            for gen in 1..=self.depth() {
                let len = self.cube_count(grid, gen);
                let stride = len.div_ceil(cap).max(1);
                let mut idx = 0;
                while idx < len {
                    keys.push(CubeKey { grid, gen, idx });
                    idx += stride;
                }
            }
        }
        keys
    }

    /// Calibrate the largest α and smallest β (grid step 0.01) such that
    /// no sampled point violates B(c_Q, α) ⊆ T^K(Q) ⊆ B(c_Q, β), uniformly
    /// over the sampled cubes.
    pub fn calibrate_kube_params(
        &self,
        samples_per_cube: usize,
        cube_cap: usize,
        seed: u64,
    ) -> Result<KubeParams> {
        let keys = self.sampled_cubes(cube_cap);
        if keys.is_empty() {
            return Err(Error::Calibration("tree has no non-root cubes".into()));
        }
        // Per-cube: (min |w| that escapes the kube, max tanh over kube
        // points).
        let per_cube: Vec<(usize, f64, f64)> = keys
            .par_iter()
            .enumerate()
            .map(|(j, &key)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                let center = self.tent_center(key);
                let mut escape: f64 = 1.0;
                let mut reach: f64 = 0.0;
                for _ in 0..samples_per_cube {
                    // Lower inclusion probe.
                    let w = self.model.sample_interior(&mut rng);
                    let z = self.model.mobius(&center, &w);
                    if !self.kube_membership(&z, key) {
                        escape = escape.min(w.norm());
                    }
                    // Upper inclusion probe.
                    let zk = self.sample_kube(key, &mut rng);
                    let th = self.model.kobayashi_tanh(&center, &zk).unwrap_or(1.0);
                    reach = reach.max(th);
                }
                (key.gen, escape, reach)
            })
            .collect();

        let step = 0.01;
        let floor_step = |v: f64| ((v / step).ceil() - 1.0).max(0.0) * step;
        let ceil_step = |v: f64| ((v / step).floor() + 1.0).min(99.0) * step;

        let mut per_generation = vec![(f64::INFINITY, 0.0f64); self.depth() + 1];
        let mut escape_all: f64 = 1.0;
        let mut reach_all: f64 = 0.0;
        for &(gen, escape, reach) in &per_cube {
            escape_all = escape_all.min(escape);
            reach_all = reach_all.max(reach);
            per_generation[gen].0 = per_generation[gen].0.min(escape);
            per_generation[gen].1 = per_generation[gen].1.max(reach);
        }
        let alpha = floor_step(escape_all);
        let beta = ceil_step(reach_all).min(0.99);
        if alpha <= 0.0 {
            return Err(Error::Calibration(format!(
                "no admissible alpha: a Kobayashi ball of radius {step} already \
                 leaves some kube (min escape {escape_all})"
            )));
        }
        if alpha >= beta {
            return Err(Error::Calibration(format!(
                "calibration collapsed: alpha {alpha} >= beta {beta}"
            )));
        }
        Ok(KubeParams {
            alpha,
            beta,
            beta_tilde: (1.0 + beta) / 2.0,
            per_generation: per_generation[1..]
                .iter()
                .map(|&(e, r)| (floor_step(e.min(1.0)), ceil_step(r).min(0.99)))
                .collect(),
            samples: samples_per_cube * keys.len(),
            seed,
        })
    }

    /// Count violations of the calibrated inclusions on a fresh seed.
    pub fn validate_kube_params(
        &self,
        params: &KubeParams,
        samples_per_cube: usize,
        cube_cap: usize,
        seed: u64,
    ) -> usize {
        let keys = self.sampled_cubes(cube_cap);
        keys.par_iter()
            .enumerate()
            .map(|(j, &key)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64 + 1_000_003);
                let center = self.tent_center(key);
                let mut violations = 0usize;
                for _ in 0..samples_per_cube {
                    let dir = self.model.sample_boundary(&mut rng);
                    let u: f64 = rng.random();
                    let w = dir.scale(
                        params.alpha * u.powf(1.0 / (2.0 * self.model.dim() as f64)),
                    );
                    let z = self.model.mobius(&center, &w);
                    if !self.kube_membership(&z, key) {
                        violations += 1;
                    }
                    let zk = self.sample_kube(key, &mut rng);
                    let th = self.model.kobayashi_tanh(&center, &zk).unwrap_or(1.0);
                    if th >= params.beta {
                        violations += 1;
                    }
                }
                violations
            })
            .sum()
    }

    /// Empirical sub-mean-value constant for a non-negative integrand:
    /// sup over sampled kube points of f(z)·Vol(T^K(Q)) / ∫_{B(c_Q,β̃)} f.
    pub fn submean_constant<F: Fn(&Point) -> f64 + Sync>(
        &self,
        f: &F,
        beta_tilde: f64,
        points_per_cube: usize,
        ball_samples: usize,
        cube_cap: usize,
        seed: u64,
    ) -> SubmeanReport {
        let keys = self.sampled_cubes(cube_cap);
        let per_cube: Vec<(usize, f64, bool)> = keys
            .par_iter()
            .enumerate()
            .map(|(j, &key)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64 + 7_000_017);
                let center = self.tent_center(key);
                let (integral, se) =
                    self.kobayashi_ball_integral(&center, beta_tilde, f, ball_samples, &mut rng);
                let low_confidence = integral <= 0.0 || se > 0.2 * integral.abs();
                if integral <= 0.0 {
                    return (key.gen, 0.0, true);
                }
                let (kube_vol, _) = self.kube_volume(key);
                let mut sup = 0.0f64;
                for _ in 0..points_per_cube {
                    let z = self.sample_kube(key, &mut rng);
                    sup = sup.max(f(&z));
                }
                (key.gen, sup * kube_vol / integral, low_confidence)
            })
            .collect();
        let mut per_generation_max = vec![0.0f64; self.depth()];
        let mut constant = 0.0f64;
        let mut low = 0usize;
        for &(gen, ratio, low_conf) in &per_cube {
            constant = constant.max(ratio);
            per_generation_max[gen - 1] = per_generation_max[gen - 1].max(ratio);
            if low_conf {
                low += 1;
            }
        }
        SubmeanReport {
            constant,
            per_generation_max,
            sampled_cubes: keys.len(),
            low_confidence: low,
        }
    }

    /// Per-cube audit rows, ordered by (grid, generation, cube).
    pub fn audit_rows(&self) -> Vec<TentAuditRow> {
        self.keys()
            .map(|key| {
                let (vol, se) = self.tent_volume(key);
                let (kube, _) = self.kube_volume(key);
                TentAuditRow {
                    grid: key.grid,
                    gen: key.gen,
                    cube: key.idx,
                    sidelength: self.sidelength(key.gen),
                    vol_mc: vol,
                    vol_se: se,
                    vol_analytic: self.analytic_volume(key),
                    kube_vol_mc: kube,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridParams;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn disc_tree(depth: usize, resolution: usize, seed: u64) -> TentTree {
        let model = Model::disc();
        let mut params = GridParams::new(0.125, depth, 2, resolution, seed);
        params.cover_samples = 50;
        TentTree::new(GridFamily::build(&model, &params).unwrap())
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tent_centers_on_normal() {
        let tree = disc_tree(3, 4096, 1);
        for key in tree.keys().take(200) {
            let center = tree.tent_center(key);
            if key.is_root() {
                assert_eq!(center.norm(), 0.0);
                continue;
            }
            let l = tree.sidelength(key.gen);
            assert_relative_eq!(1.0 - center.norm(), l / 2.0, epsilon = 1e-12);
            // π(c_Q) = c(Q).
            let proj = center.scale(1.0 / center.norm());
            let boundary = tree.family().grid(key.grid).center_point(key.gen, key.idx);
            assert!(proj.euclid_dist(boundary) < 1e-12);
        }
    }

    #[test]
    fn tent_membership_cases() {
        let tree = disc_tree(1, 4096, 3);
        let root = CubeKey::root(0);
        assert!(tree.tent_membership(&Point::scalar(c(0.0, 0.0)), root));
        assert!(tree.tent_membership(&Point::scalar(c(0.5, 0.2)), root));

        // A generation-1 cube: pick the one containing boundary point 1.
        let grid = tree.family().grid(0);
        let one = Point::scalar(c(1.0, 0.0));
        let idx = grid.cube_of(&one, 1).unwrap();
        let key = CubeKey { grid: 0, gen: 1, idx };
        let z_in = Point::scalar(c(0.95, 0.0));
        assert!(tree.tent_membership(&z_in, key));
        let z_deep = Point::scalar(c(0.5, 0.0));
        assert!(!tree.tent_membership(&z_deep, key));
    }

    #[test]
    fn kube_band_conventions() {
        let tree = disc_tree(2, 4096, 5);
        // Root kube holds deep points.
        assert!(tree.kube_membership(&Point::scalar(c(0.5, 0.0)), CubeKey::root(0)));
        assert!(!tree.kube_membership(&Point::scalar(c(0.9, 0.0)), CubeKey::root(0)));

        let grid = tree.family().grid(0);
        let one = Point::scalar(c(1.0, 0.0));
        let idx = grid.cube_of(&one, 1).unwrap();
        let key = CubeKey { grid: 0, gen: 1, idx };
        // Exactly at distance ℓ(Q): in this kube, not the parent band.
        let z_edge = Point::scalar(c(1.0 - 0.125, 0.0));
        assert!(tree.kube_membership(&z_edge, key));
        assert_eq!(tree.band_generation(0.125), 1);
        assert_eq!(tree.band_generation(0.125 + 1e-12), 0);
    }

    #[test]
    fn kube_partition_of_sampled_points() {
        let tree = disc_tree(3, 4096, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..2000 {
            let z = tree.model().sample_interior(&mut rng);
            for grid in 0..tree.family().grids().len() {
                // kube_of picks the unique claimant.
                let key = tree.kube_of(grid, &z);
                let dist = 1.0 - z.norm();
                if key.is_root() {
                    assert!(dist > tree.delta());
                } else if key.gen < tree.depth() {
                    assert!(tree.kube_membership(&z, key));
                }
                // Band predicates over all generations agree: at most one
                // claims z, and it is kube_of unless z is below the leaf
                // band.
                let mut claims = Vec::new();
                if tree.kube_membership(&z, CubeKey::root(grid)) {
                    claims.push(CubeKey::root(grid));
                }
                for gen in 1..=tree.depth() {
                    for idx in 0..tree.cube_count(grid, gen) {
                        let k = CubeKey { grid, gen, idx };
                        if tree.kube_membership(&z, k) {
                            claims.push(k);
                        }
                    }
                }
                if dist > tree.sidelength(tree.depth()) * tree.delta() {
                    assert_eq!(claims.len(), 1, "z claimed by {claims:?}");
                    assert_eq!(claims[0], key);
                } else {
                    assert!(claims.is_empty());
                    assert_eq!(key.gen, tree.depth());
                }
            }
        }
    }

    #[test]
    fn offspring_matches_brute_force() {
        let tree = disc_tree(3, 4096, 9);
        let grid = tree.family().grid(0);
        // A generation-1 cube.
        let key = CubeKey { grid: 0, gen: 1, idx: 0 };
        let offspring = tree.offspring(key);
        // Brute force: centers of deeper cubes lying in the cube.
        let mut expected = Vec::new();
        for gen in 2..=3 {
            for idx in 0..tree.cube_count(0, gen) {
                let center = grid.generation(gen).centers[idx] as usize;
                if grid.chain(1, center) == 0 {
                    expected.push(CubeKey { grid: 0, gen, idx });
                }
            }
        }
        let mut got = offspring.clone();
        got.sort_by_key(|k| (k.gen, k.idx));
        expected.sort_by_key(|k| (k.gen, k.idx));
        assert_eq!(got, expected);

        // Leaf cubes have no offspring; the root owns every non-root cube.
        let leaf = CubeKey { grid: 0, gen: 3, idx: 0 };
        assert!(tree.offspring(leaf).is_empty());
        let total: usize = (1..=3).map(|g| tree.cube_count(0, g)).sum();
        assert_eq!(tree.offspring(CubeKey::root(0)).len(), total);
    }

    #[test]
    fn tent_volumes_against_closed_forms() {
        let tree = disc_tree(2, 8192, 11);
        // Root: the full disc.
        let (v, se) = tree.tent_volume(CubeKey::root(0));
        assert_relative_eq!(v, std::f64::consts::PI);
        assert_eq!(se, 0.0);

        // Sum of generation-1 tent volumes = volume of the annulus
        // 1−|z| ≤ δ (σ sums to 1 exactly).
        let total: f64 = (0..tree.cube_count(0, 1))
            .map(|idx| tree.tent_volume(CubeKey { grid: 0, gen: 1, idx }).0)
            .sum();
        let annulus = std::f64::consts::PI * (1.0 - 0.875f64.powi(2));
        assert_relative_eq!(total, annulus, epsilon = 1e-10);

        // Kube + child tents = tent, per cube.
        let key = CubeKey { grid: 0, gen: 1, idx: 0 };
        let (tent, _) = tree.tent_volume(key);
        let (kube, _) = tree.kube_volume(key);
        let children_total: f64 = (0..tree.cube_count(0, 2))
            .filter(|&idx| tree.family().grid(0).generation(2).parent[idx] == 0)
            .map(|idx| tree.tent_volume(CubeKey { grid: 0, gen: 2, idx }).0)
            .sum();
        assert_relative_eq!(tent, kube + children_total, epsilon = 1e-10);
    }

    #[test]
    fn volume_comparability_on_resolved_grid() {
        let tree = disc_tree(3, 1 << 14, 13);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for key in tree.keys() {
            if key.is_root() {
                continue;
            }
            let (v, _) = tree.tent_volume(key);
            let ratio = v / tree.analytic_volume(key);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        assert!(lo > 0.0);
        assert!(hi / lo < 20.0, "volume spread {lo}..{hi}");

        for key in tree.keys() {
            if key.is_root() {
                continue;
            }
            let r = tree.kube_volume(key).0 / tree.tent_volume(key).0;
            assert!(r > 0.0 && r <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn tent_volume_matches_predicate_monte_carlo() {
        let tree = disc_tree(2, 8192, 15);
        let key = CubeKey { grid: 0, gen: 1, idx: 0 };
        let (vol, _) = tree.tent_volume(key);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 200_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let z = tree.model().sample_interior(&mut rng);
            if tree.tent_membership(&z, key) {
                hits += 1;
            }
        }
        let est = hits as f64 / n as f64 * tree.model().volume();
        let se = tree.model().volume() * ((hits as f64).sqrt() / n as f64);
        assert!(
            (est - vol).abs() < 4.0 * se.max(1e-4),
            "polar {vol} vs predicate {est} (se {se})"
        );
    }

    #[test]
    fn kobayashi_center_visits_match_brute_force() {
        let tree = disc_tree(3, 4096, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for beta in [0.5, 0.9] {
            for _ in 0..100 {
                let z = tree.model().sample_interior(&mut rng);
                let mut got = Vec::new();
                tree.visit_kobayashi_centers(0, &z, beta, |gen, idx, _| {
                    got.push((gen, idx));
                });
                let mut expected = Vec::new();
                for gen in 1..=tree.depth() {
                    for idx in 0..tree.cube_count(0, gen) {
                        let c = tree.tent_center(CubeKey { grid: 0, gen, idx });
                        if tree.model().kobayashi_tanh(&c, &z).unwrap() < beta {
                            expected.push((gen, idx));
                        }
                    }
                }
                got.sort_unstable();
                expected.sort_unstable();
                assert_eq!(got, expected, "beta {beta}");
            }
        }
    }

    #[test]
    fn enlarged_tent_contains_offspring_centers() {
        let tree = disc_tree(3, 4096, 19);
        let key = CubeKey { grid: 0, gen: 1, idx: 0 };
        for off in tree.offspring(key).into_iter().take(20) {
            let c = tree.tent_center(off);
            assert!(tree.enlarged_tent_membership(&c, key, 0.5));
        }
        // Leaf: empty offspring set, so never a member.
        let leaf = CubeKey { grid: 0, gen: 3, idx: 2 };
        let z = tree.tent_center(leaf);
        assert!(!tree.enlarged_tent_membership(&z, leaf, 0.9));
    }

    #[test]
    fn kube_calibration_finds_sandwich() {
        let tree = disc_tree(3, 8192, 21);
        let params = tree.calibrate_kube_params(200, 64, 5).unwrap();
        assert!(params.alpha > 0.0 && params.alpha < params.beta && params.beta < 1.0);
        assert_relative_eq!(params.beta_tilde, (1.0 + params.beta) / 2.0);
        // Zero violations on a fresh seed at the calibrated values.
        let violations = tree.validate_kube_params(&params, 200, 64, 77);
        assert_eq!(violations, 0);
        // Per-generation calibrations are compatible with the global pair.
        for &(a, b) in &params.per_generation {
            assert!(a >= params.alpha - 1e-12);
            assert!(b <= params.beta + 1e-12);
        }
    }

    #[test]
    fn submean_constant_for_unit_function() {
        let tree = disc_tree(2, 8192, 23);
        let report = tree.submean_constant(&|_z: &Point| 1.0, 0.9, 32, 512, 32, 3);
        // f ≡ 1: ratio = Vol(kube)/Vol(Kobayashi ball), uniformly bounded.
        assert!(report.constant.is_finite() && report.constant > 0.0);
        for &m in &report.per_generation_max {
            assert!(m <= report.constant + 1e-12);
        }
    }

    #[test]
    fn mobius_ball_integral_of_one_is_ball_volume() {
        let tree = disc_tree(1, 4096, 25);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let center = Point::scalar(c(0.4, 0.1));
        let (v, se) = tree.kobayashi_ball_integral(&center, 0.5, &|_| 1.0, 20_000, &mut rng);
        // Möbius invariance: Vol(B_Ω(c, r)) via pushforward of the
        // Euclidean ball; compare with direct rejection sampling.
        let mut hits = 0usize;
        let n = 200_000;
        for _ in 0..n {
            let z = tree.model().sample_interior(&mut rng);
            if tree.model().kobayashi_tanh(&center, &z).unwrap() < 0.5 {
                hits += 1;
            }
        }
        let direct = hits as f64 / n as f64 * tree.model().volume();
        assert!(
            (v - direct).abs() < 4.0 * (se + 0.01),
            "mobius {v} (se {se}) vs rejection {direct}"
        );
    }
}
