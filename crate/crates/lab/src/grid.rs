//! Hytönen–Kairema style dyadic grids on the boundary, built at mesh level.
//!
//! Generation k of a grid is a maximal δᵏ-separated net of mesh points,
//! selected greedily farthest-first and always re-using the generation-(k−1)
//! centers, so every cube has a child containing its own center. Mesh points
//! are assigned hierarchically: within the members of its generation-(k−1)
//! cube, a point goes to the nearest generation-k sibling center (ties to
//! the lowest center index). Cubes are therefore nested by construction and
//! partition the mesh at every generation.
//!
//! An adjacent family consists of `k0` grids built on independently rotated
//! copies of the mesh (Haar-random unitaries), together with a measured
//! quasi-ball cover certificate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{quasi_dist, Model, Point};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryMesh, Unitary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    pub delta: f64,
    pub depth: usize,
    pub k0: usize,
    pub resolution: usize,
    pub seed: u64,
    /// Permit generations whose net swallows the whole mesh (singleton
    /// cubes). Required for deep grids on the sphere at laptop-scale
    /// meshes; off by default so a genuinely under-resolved mesh errors.
    pub allow_saturation: bool,
    pub cover_samples: usize,
}

impl GridParams {
    pub fn new(delta: f64, depth: usize, k0: usize, resolution: usize, seed: u64) -> Self {
        GridParams {
            delta,
            depth,
            k0,
            resolution,
            seed,
            allow_saturation: false,
            cover_samples: 1000,
        }
    }
}

/// One generation of cubes: parallel arrays indexed by cube index.
#[derive(Clone, Debug)]
pub struct Generation {
    /// Mesh index of each cube's center, in selection order.
    pub centers: Vec<u32>,
    /// Parent cube index in the previous generation (0 for the root).
    pub parent: Vec<u32>,
    /// Mesh-weighted measure of each cube.
    pub sigma: Vec<f64>,
    member_perm: Vec<u32>,
    cube_start: Vec<u32>,
}

impl Generation {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn members(&self, cube: usize) -> &[u32] {
        let lo = self.cube_start[cube] as usize;
        let hi = self.cube_start[cube + 1] as usize;
        &self.member_perm[lo..hi]
    }
}

#[derive(Clone, Debug)]
pub struct DyadicGrid {
    pub grid_id: usize,
    mesh: BoundaryMesh,
    rotation: Unitary,
    delta: f64,
    depth: usize,
    gens: Vec<Generation>,
    /// chains[k][i] = cube index of mesh point i at generation k.
    chains: Vec<Vec<u32>>,
    /// First generation whose net contains every mesh point, if any.
    pub saturated_from: Option<usize>,
}

/// Max-heap entry for farthest-first selection; ties broken toward the
/// lowest point index.
#[derive(PartialEq)]
struct HeapEntry {
    d: f64,
    idx: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d
            .total_cmp(&other.d)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl DyadicGrid {
    /// One greedy farthest-point traversal starting from mesh point 0,
    /// stopped once every remaining point is closer than `sep_min` to the
    /// selected set. Returns the selection order with each point's
    /// distance-to-net at selection time; a maximal δᵏ-separated net is
    /// the prefix of selections with distance ≥ δᵏ.
    ///
    /// When a point is selected its distance is the current maximum, so
    /// distance updates only reach that far; the update balls shrink as
    /// the traversal proceeds.
    fn fps_sequence(mesh: &BoundaryMesh, sep_min: f64) -> (Vec<u32>, Vec<f64>) {
        let n = mesh.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut selected = vec![false; n];
        let mut order = vec![0u32];
        let mut gaps = vec![f64::INFINITY];
        selected[0] = true;
        dist[0] = 0.0;
        let root = mesh.point(0);
        let mut heap = BinaryHeap::new();
        for i in 1..n {
            let d = quasi_dist(root, mesh.point(i));
            dist[i] = d;
            if d >= sep_min {
                heap.push(HeapEntry { d, idx: i as u32 });
            }
        }
        while let Some(e) = heap.pop() {
            let i = e.idx as usize;
            if selected[i] || e.d != dist[i] {
                continue;
            }
            selected[i] = true;
            order.push(e.idx);
            gaps.push(e.d);
            let p = mesh.point(i);
            mesh.index().visit_quasi_ball(p, e.d, |j, d| {
                let j = j as usize;
                if d < dist[j] {
                    dist[j] = d;
                    if d >= sep_min && !selected[j] {
                        heap.push(HeapEntry { d, idx: j as u32 });
                    }
                }
            });
        }
        (order, gaps)
    }

    pub fn build(
        mesh: BoundaryMesh,
        delta: f64,
        depth: usize,
        allow_saturation: bool,
        grid_id: usize,
        rotation: Unitary,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < mesh.model().eps0()) {
            return Err(Error::Input(format!(
                "delta {delta} must lie in (0, eps0 = {})",
                mesh.model().eps0()
            )));
        }
        if delta.powi(depth as i32) < 1e-14 {
            return Err(Error::Resolution(format!(
                "depth {depth} drives the sidelength below floating-point resolution"
            )));
        }
        let n = mesh.len();

        // Root generation: one cube holding everything.
        let mut gens = vec![Generation {
            centers: vec![0],
            parent: vec![0],
            sigma: vec![1.0],
            member_perm: (0..n as u32).collect(),
            cube_start: vec![0, n as u32],
        }];
        let mut chains = vec![vec![0u32; n]];
        let mut saturated_from = None;

        let (order, gaps) = if depth > 0 {
            Self::fps_sequence(&mesh, delta.powi(depth as i32))
        } else {
            (vec![0], vec![f64::INFINITY])
        };

        for k in 1..=depth {
            let sep = delta.powi(k as i32);
            // Maximal sep-separated net: the prefix selected while the
            // farthest remaining point was at least sep away.
            let count = gaps.partition_point(|&g| g >= sep);
            let centers: Vec<u32> = order[..count].to_vec();
            if centers.len() == n && saturated_from.is_none() {
                saturated_from = Some(k);
                if !allow_saturation {
                    return Err(Error::Resolution(format!(
                        "net saturates the mesh at generation {k} \
                         (every mesh point becomes a center); increase the \
                         resolution or reduce the depth"
                    )));
                }
            }

            // Group the new centers by their parent cube.
            let parent: Vec<u32> = centers
                .iter()
                .map(|&c| chains[k - 1][c as usize])
                .collect();
            let mut families: Vec<Vec<u32>> = vec![Vec::new(); gens[k - 1].len()];
            for (ci, &p) in parent.iter().enumerate() {
                families[p as usize].push(ci as u32);
            }

            // Hierarchical nearest-sibling assignment.
            let prev_chain = &chains[k - 1];
            let chain: Vec<u32> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let fam = &families[prev_chain[i] as usize];
                    debug_assert!(!fam.is_empty());
                    let p = mesh.point(i);
                    let mut best = fam[0];
                    let mut best_d = quasi_dist(p, mesh.point(centers[fam[0] as usize] as usize));
                    for &ci in &fam[1..] {
                        let d = quasi_dist(p, mesh.point(centers[ci as usize] as usize));
                        if d < best_d {
                            best_d = d;
                            best = ci;
                        }
                    }
                    best
                })
                .collect();

            let gen = Self::finish_generation(centers, parent, &chain, mesh.weight());
            gens.push(gen);
            chains.push(chain);
        }

        Ok(DyadicGrid {
            grid_id,
            mesh,
            rotation,
            delta,
            depth,
            gens,
            chains,
            saturated_from,
        })
    }

    fn finish_generation(
        centers: Vec<u32>,
        parent: Vec<u32>,
        chain: &[u32],
        weight: f64,
    ) -> Generation {
        let cubes = centers.len();
        let mut counts = vec![0u32; cubes];
        for &c in chain {
            counts[c as usize] += 1;
        }
        let mut cube_start = vec![0u32; cubes + 1];
        for c in 0..cubes {
            cube_start[c + 1] = cube_start[c] + counts[c];
        }
        let mut cursor = cube_start[..cubes].to_vec();
        let mut member_perm = vec![0u32; chain.len()];
        for (i, &c) in chain.iter().enumerate() {
            member_perm[cursor[c as usize] as usize] = i as u32;
            cursor[c as usize] += 1;
        }
        let sigma = counts.iter().map(|&c| c as f64 * weight).collect();
        Generation {
            centers,
            parent,
            sigma,
            member_perm,
            cube_start,
        }
    }

    pub fn mesh(&self) -> &BoundaryMesh {
        &self.mesh
    }

    pub fn rotation(&self) -> &Unitary {
        &self.rotation
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn generation(&self, k: usize) -> &Generation {
        &self.gens[k]
    }

    /// Sidelength δᵏ of generation k (k = 0 is the root with ℓ = 1).
    pub fn sidelength(&self, k: usize) -> f64 {
        self.delta.powi(k as i32)
    }

    /// Cube index containing mesh point `i` at generation `k`.
    pub fn chain(&self, k: usize, i: usize) -> u32 {
        self.chains[k][i]
    }

    pub fn center_point(&self, k: usize, cube: usize) -> &Point {
        self.mesh.point(self.gens[k].centers[cube] as usize)
    }

    /// Generation-k cube containing a boundary point, snapped to the
    /// nearest mesh point.
    pub fn cube_of(&self, zeta: &Point, k: usize) -> Result<usize> {
        if k > self.depth {
            return Err(Error::GenerationOutOfRange {
                k,
                depth: self.depth,
            });
        }
        let (i, _) = self.mesh.nearest(zeta);
        Ok(self.chains[k][i] as usize)
    }
}

/// Constants measured exhaustively over every cube of every grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyConstants {
    /// Smallest 𝔠 with Q ⊆ B(c(Q), 𝔠·δᵏ) for all cubes, k ≥ 1.
    pub outer_sandwich: f64,
    /// Largest λ with B(c(Q), λ·δᵏ) ∩ mesh ⊆ Q for all cubes, k ≥ 1
    /// (fraction of the sidelength; hierarchical assignment makes λ = 1
    /// unreachable in general, so it is measured and reported).
    pub inner_sandwich: f64,
    /// Min over cubes of σ(child)/σ(parent).
    pub min_child_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverCertificate {
    pub samples: usize,
    pub failures: usize,
    /// C with: every sampled quasi-ball B(ξ,r) fits inside a cube of some
    /// grid with ℓ(Q) ≤ C·r.
    pub cover_const: f64,
    pub seed: u64,
}

impl CoverCertificate {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Exhaustive mesh-level verification of the grid axioms.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridVerification {
    pub covering_ok: bool,
    pub nesting_ok: bool,
    pub child_ok: bool,
    pub parent_ok: bool,
    pub separation_ok: bool,
    pub net_covering_ok: bool,
    pub constants: FamilyConstants,
    pub generation_sizes: Vec<Vec<usize>>,
    pub violations: usize,
}

impl GridVerification {
    pub fn all_ok(&self) -> bool {
        self.covering_ok
            && self.nesting_ok
            && self.child_ok
            && self.parent_ok
            && self.separation_ok
            && self.net_covering_ok
            && self.violations == 0
            && self.constants.min_child_ratio > 0.0
            && self.constants.inner_sandwich > 0.0
    }
}

#[derive(Clone, Debug)]
pub struct GridFamily {
    model: Model,
    params: GridParams,
    grids: Vec<DyadicGrid>,
    pub constants: FamilyConstants,
    pub cover: CoverCertificate,
}

impl GridFamily {
    /// Build `k0` adjacent grids on independently rotated meshes and
    /// measure the family constants and the cover certificate.
    pub fn build(model: &Model, params: &GridParams) -> Result<Self> {
        if params.k0 < 1 {
            return Err(Error::Input("k0 must be at least 1".into()));
        }
        let base = BoundaryMesh::build(model, params.resolution, params.seed)?;
        let mut grids = Vec::with_capacity(params.k0);
        for t in 0..params.k0 {
            let mut rng = ChaCha8Rng::seed_from_u64(
                params.seed ^ 0x9e3779b97f4a7c15u64.wrapping_mul(t as u64 + 1),
            );
            let rotation = if t == 0 {
                Unitary::identity(model.dim())
            } else {
                Unitary::random(model.dim(), &mut rng)
            };
            let mesh = if t == 0 {
                base.clone()
            } else {
                base.rotated(&rotation)
            };
            grids.push(DyadicGrid::build(
                mesh,
                params.delta,
                params.depth,
                params.allow_saturation,
                t,
                rotation,
            )?);
        }
        let mut family = GridFamily {
            model: *model,
            params: params.clone(),
            grids,
            constants: FamilyConstants {
                outer_sandwich: 0.0,
                inner_sandwich: 1.0,
                min_child_ratio: 1.0,
            },
            cover: CoverCertificate {
                samples: 0,
                failures: 0,
                cover_const: 0.0,
                seed: params.seed,
            },
        };
        family.constants = family.measure_constants();
        family.cover = family.cover_certificate(params.cover_samples, params.seed ^ 0xc0ffee);
        Ok(family)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn grids(&self) -> &[DyadicGrid] {
        &self.grids
    }

    pub fn grid(&self, t: usize) -> &DyadicGrid {
        &self.grids[t]
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    pub fn depth(&self) -> usize {
        self.params.depth
    }

    fn measure_constants(&self) -> FamilyConstants {
        let mut outer: f64 = 0.0;
        let mut inner: f64 = 1.0;
        let mut eps: f64 = 1.0;
        for grid in &self.grids {
            for k in 1..=grid.depth {
                let side = grid.sidelength(k);
                let gen = &grid.gens[k];
                // Per-cube maxima reduce with max/min, so parallel order
                // does not affect the result.
                let (o, i, e) = (0..gen.len())
                    .into_par_iter()
                    .map(|cube| {
                        let c = grid.center_point(k, cube);
                        let mut o: f64 = 0.0;
                        for &m in gen.members(cube) {
                            let d = quasi_dist(c, grid.mesh.point(m as usize));
                            o = o.max(d / side);
                        }
                        let mut i: f64 = 1.0;
                        grid.mesh.index().visit_quasi_ball(c, side, |j, d| {
                            if grid.chains[k][j as usize] != cube as u32 {
                                i = i.min(d / side);
                            }
                        });
                        let parent = gen.parent[cube] as usize;
                        let e = gen.sigma[cube] / grid.gens[k - 1].sigma[parent];
                        (o, i, e)
                    })
                    .reduce(
                        || (0.0f64, 1.0f64, 1.0f64),
                        |a, b| (a.0.max(b.0), a.1.min(b.1), a.2.min(b.2)),
                    );
                outer = outer.max(o);
                inner = inner.min(i);
                eps = eps.min(e);
            }
        }
        FamilyConstants {
            outer_sandwich: outer,
            inner_sandwich: inner,
            min_child_ratio: eps,
        }
    }

    /// Exhaustive verification of the six grid properties on the mesh.
    pub fn verify(&self) -> GridVerification {
        let mut covering_ok = true;
        let mut nesting_ok = true;
        let mut child_ok = true;
        let mut parent_ok = true;
        let mut separation_ok = true;
        let mut net_covering_ok = true;
        let mut violations = 0usize;
        let mut generation_sizes = Vec::new();

        for grid in &self.grids {
            let n = grid.mesh.len();
            generation_sizes.push(grid.gens.iter().map(|g| g.len()).collect::<Vec<_>>());

            for k in 0..=grid.depth {
                let gen = &grid.gens[k];
                // (1) covering/partition: member lists partition the mesh.
                let total: usize = (0..gen.len()).map(|c| gen.members(c).len()).sum();
                if total != n {
                    covering_ok = false;
                    violations += 1;
                }
                let mut seen = vec![false; n];
                for c in 0..gen.len() {
                    for &m in gen.members(c) {
                        if seen[m as usize] || grid.chains[k][m as usize] != c as u32 {
                            covering_ok = false;
                            violations += 1;
                        }
                        seen[m as usize] = true;
                    }
                }
                if k == 0 {
                    continue;
                }
                // (2)+(4) nesting with a unique parent: each point's cube
                // chain is consistent with the parent pointers.
                for i in 0..n {
                    if gen.parent[grid.chains[k][i] as usize] != grid.chains[k - 1][i] {
                        nesting_ok = false;
                        violations += 1;
                    }
                }
                // (3) every cube of the previous generation has a child.
                let mut has_child = vec![false; grid.gens[k - 1].len()];
                for &p in &gen.parent {
                    has_child[p as usize] = true;
                }
                if !has_child.iter().all(|&b| b) {
                    child_ok = false;
                    violations += 1;
                }
                // A cube's center is one of its own members.
                for (cube, &center) in gen.centers.iter().enumerate() {
                    if grid.chains[k][center as usize] != cube as u32 {
                        parent_ok = false;
                        violations += 1;
                    }
                }
                // Net separation >= δᵏ and net covering < δᵏ, via one range
                // sweep around each center on the mesh index.
                let side = grid.sidelength(k);
                let mut is_center = vec![false; n];
                for &c in &gen.centers {
                    is_center[c as usize] = true;
                }
                let mut covered = vec![false; n];
                for &cmesh in &gen.centers {
                    let p = grid.mesh.point(cmesh as usize);
                    let mut bad = 0usize;
                    grid.mesh.index().visit_quasi_ball(p, side, |j, _| {
                        covered[j as usize] = true;
                        if is_center[j as usize] && j != cmesh {
                            bad += 1;
                        }
                    });
                    if bad > 0 {
                        separation_ok = false;
                        violations += bad;
                    }
                }
                let uncovered = covered.iter().filter(|&&b| !b).count();
                if uncovered > 0 {
                    net_covering_ok = false;
                    violations += uncovered;
                }
            }
        }

        GridVerification {
            covering_ok,
            nesting_ok,
            child_ok,
            parent_ok,
            separation_ok,
            net_covering_ok,
            constants: self.constants.clone(),
            generation_sizes,
            violations,
        }
    }

    /// Sample quasi-balls B(ξ,r) and check each is contained in some cube
    /// of comparable sidelength in one of the grids.
    pub fn cover_certificate(&self, samples: usize, seed: u64) -> CoverCertificate {
        let r_min = self.params.delta.powi(self.params.depth as i32);
        let r_max = 1.2f64;
        let per_sample: Vec<Option<f64>> = (0..samples)
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s as u64 + 1);
                let xi = self.model.sample_boundary(&mut rng);
                let u: f64 = rand::Rng::random(&mut rng);
                let r = r_min * (r_max / r_min).powf(u);
                let mut ball: Vec<u32> = Vec::new();
                let mut best_side: Option<f64> = None;
                for grid in &self.grids {
                    ball.clear();
                    grid.mesh.index().visit_quasi_ball(&xi, r, |j, _| ball.push(j));
                    let (anchor, _) = grid.mesh.nearest(&xi);
                    // Smallest cube in this grid's chain of the anchor
                    // point containing the whole ball.
                    for k in (0..=grid.depth).rev() {
                        let cube = grid.chains[k][anchor];
                        if ball.iter().all(|&j| grid.chains[k][j as usize] == cube) {
                            let side = grid.sidelength(k);
                            if best_side.is_none_or(|b| side < b) {
                                best_side = Some(side);
                            }
                            break;
                        }
                    }
                }
                best_side.map(|side| side / r)
            })
            .collect();
        let failures = per_sample.iter().filter(|r| r.is_none()).count();
        let cover_const = per_sample
            .iter()
            .flatten()
            .fold(0.0f64, |a, &b| a.max(b));
        CoverCertificate {
            samples,
            failures,
            cover_const,
            seed,
        }
    }

    // ------------------------------------------------------------------
    // Lossless binary cache.
    // ------------------------------------------------------------------

    const MAGIC: &'static [u8; 8] = b"LABDYG01";

    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        let name = self.model.name();
        w.write_u8(name.len() as u8)?;
        w.write_all(name.as_bytes())?;
        w.write_f64::<LittleEndian>(self.params.delta)?;
        w.write_u32::<LittleEndian>(self.params.depth as u32)?;
        w.write_u32::<LittleEndian>(self.params.k0 as u32)?;
        w.write_u64::<LittleEndian>(self.params.seed)?;
        w.write_u64::<LittleEndian>(self.params.resolution as u64)?;
        w.write_u8(self.params.allow_saturation as u8)?;
        w.write_u64::<LittleEndian>(self.params.cover_samples as u64)?;
        for grid in &self.grids {
            for e in grid.rotation.entries() {
                w.write_f64::<LittleEndian>(e.re)?;
                w.write_f64::<LittleEndian>(e.im)?;
            }
            w.write_u64::<LittleEndian>(grid.mesh.len() as u64)?;
            for p in grid.mesh.points() {
                for c in p.coords() {
                    w.write_f64::<LittleEndian>(c.re)?;
                    w.write_f64::<LittleEndian>(c.im)?;
                }
            }
            for k in 1..=grid.depth {
                let gen = &grid.gens[k];
                w.write_u64::<LittleEndian>(gen.len() as u64)?;
                for &c in &gen.centers {
                    w.write_u32::<LittleEndian>(c)?;
                }
                for &c in &grid.chains[k] {
                    w.write_u32::<LittleEndian>(c)?;
                }
            }
        }
        w.write_f64::<LittleEndian>(self.constants.outer_sandwich)?;
        w.write_f64::<LittleEndian>(self.constants.inner_sandwich)?;
        w.write_f64::<LittleEndian>(self.constants.min_child_ratio)?;
        w.write_u64::<LittleEndian>(self.cover.samples as u64)?;
        w.write_u64::<LittleEndian>(self.cover.failures as u64)?;
        w.write_f64::<LittleEndian>(self.cover.cover_const)?;
        w.write_u64::<LittleEndian>(self.cover.seed)?;
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let name_len = r.read_u8()? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Cache("bad model name".into()))?;
        let model = Model::parse(&name)?;
        let n_dim = model.dim();
        let delta = r.read_f64::<LittleEndian>()?;
        let depth = r.read_u32::<LittleEndian>()? as usize;
        let k0 = r.read_u32::<LittleEndian>()? as usize;
        let seed = r.read_u64::<LittleEndian>()?;
        let resolution = r.read_u64::<LittleEndian>()? as usize;
        let allow_saturation = r.read_u8()? != 0;
        let cover_samples = r.read_u64::<LittleEndian>()? as usize;
        let params = GridParams {
            delta,
            depth,
            k0,
            resolution,
            seed,
            allow_saturation,
            cover_samples,
        };

        let mut grids = Vec::with_capacity(k0);
        for t in 0..k0 {
            let mut entries = Vec::with_capacity(n_dim * n_dim);
            for _ in 0..n_dim * n_dim {
                let re = r.read_f64::<LittleEndian>()?;
                let im = r.read_f64::<LittleEndian>()?;
                entries.push(Complex64::new(re, im));
            }
            let rotation = Unitary::from_entries(n_dim, &entries);
            let n = r.read_u64::<LittleEndian>()? as usize;
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let mut coords = [Complex64::new(0.0, 0.0); 3];
                for slot in coords.iter_mut().take(n_dim) {
                    let re = r.read_f64::<LittleEndian>()?;
                    let im = r.read_f64::<LittleEndian>()?;
                    *slot = Complex64::new(re, im);
                }
                points.push(Point::new(&coords[..n_dim]));
            }
            let mesh = BoundaryMesh::from_points(&model, points, seed);
            let weight = mesh.weight();

            let mut gens = vec![Generation {
                centers: vec![0],
                parent: vec![0],
                sigma: vec![1.0],
                member_perm: (0..n as u32).collect(),
                cube_start: vec![0, n as u32],
            }];
            let mut chains = vec![vec![0u32; n]];
            let mut saturated_from = None;
            for k in 1..=depth {
                let cubes = r.read_u64::<LittleEndian>()? as usize;
                let mut centers = Vec::with_capacity(cubes);
                for _ in 0..cubes {
                    centers.push(r.read_u32::<LittleEndian>()?);
                }
                let mut chain = vec![0u32; n];
                for slot in chain.iter_mut() {
                    *slot = r.read_u32::<LittleEndian>()?;
                }
                if cubes == n && saturated_from.is_none() {
                    saturated_from = Some(k);
                }
                let parent: Vec<u32> = centers
                    .iter()
                    .map(|&c| chains[k - 1][c as usize])
                    .collect();
                let gen = DyadicGrid::finish_generation(centers, parent, &chain, weight);
                gens.push(gen);
                chains.push(chain);
            }
            grids.push(DyadicGrid {
                grid_id: t,
                mesh,
                rotation,
                delta,
                depth,
                gens,
                chains,
                saturated_from,
            });
        }
        let constants = FamilyConstants {
            outer_sandwich: r.read_f64::<LittleEndian>()?,
            inner_sandwich: r.read_f64::<LittleEndian>()?,
            min_child_ratio: r.read_f64::<LittleEndian>()?,
        };
        let cover = CoverCertificate {
            samples: r.read_u64::<LittleEndian>()? as usize,
            failures: r.read_u64::<LittleEndian>()? as usize,
            cover_const: r.read_f64::<LittleEndian>()?,
            seed: r.read_u64::<LittleEndian>()?,
        };
        Ok(GridFamily {
            model,
            params,
            grids,
            constants,
            cover,
        })
    }

    pub fn save_to_path(&self, path: &std::path::Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save(&mut file)
    }

    pub fn load_from_path(path: &std::path::Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::load(&mut file)
    }
}
