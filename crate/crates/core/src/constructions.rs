//! Explicit competitor fields: the mismatch ramp, the glued-tile field with
//! interfacial dislocations, and the thin-rod recovery field.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DisplacementField, JumpSet};
use crate::geometry::{CrossSection, Grid, Shape};
use crate::linalg::{rotation_exp, rotation_log, skew, Mat3, Vec3};
use crate::material::ElasticModel;
use crate::solver::{Assembler, EndClamp};

/// Linear interpolation between the wells over `|x₁| ≤ r/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub r: f64,
}

impl RampSpec {
    /// `φ = 1` for `x₁ ≤ −r/2`, `0` for `x₁ ≥ r/2`, affine between.
    pub fn phi(&self, x1: f64) -> f64 {
        let half = 0.5 * self.r;
        if x1 <= -half {
            1.0
        } else if x1 >= half {
            0.0
        } else {
            0.5 - x1 / self.r
        }
    }
}

/// Nodal sampling of `y = φ(x₁) x + (1 − φ(x₁)) H x`, with its energy.
pub fn mismatch_ramp(spec: &RampSpec, grid: Arc<Grid>, model: &ElasticModel) -> Result<(DisplacementField, f64)> {
    if !(spec.r > 0.0 && spec.r.is_finite()) {
        return Err(Error::Construction(format!("ramp radius {} must be positive", spec.r)));
    }
    let need = 0.5 * spec.r + grid.axial_spacing();
    if grid.axial_half_length() < need - 1e-12 {
        return Err(Error::Construction(format!(
            "half length {} is shorter than r/2 plus one slab ({need})",
            grid.axial_half_length()
        )));
    }
    let d = model.h() - Mat3::identity();
    let u = DisplacementField::from_fn(grid, |x| d * x * (1.0 - spec.phi(x.x)));
    let energy = Assembler::new(&u).energy(&u.values, model);
    Ok((u, energy))
}

/// Compose a field with a rotation: `y ↦ R y`.
pub fn rotated(u: &DisplacementField, r: &Mat3) -> DisplacementField {
    let grid = u.grid().clone();
    let s = u.stretch();
    let mut out = u.clone();
    for (node, v) in out.values.iter_mut().enumerate() {
        let x = grid.node_position(node);
        let sx = Vec3::new(x.x, s * x.y, s * x.z);
        *v = r * (sx + *v) - sx;
    }
    out.jumps = u.jumps.clone();
    let jumps = &mut out.jumps;
    let n = grid.transverse_cells();
    for i2 in 0..n {
        for i3 in 0..n {
            let b = jumps.get(i2, i3);
            if b != Vec3::zeros() {
                jumps.set(i2, i3, r * b);
            }
        }
    }
    out
}

/// Copy a field onto a grid with the same spacings whose box lies inside
/// the source box (e.g. the inscribed disk of a square section).
pub fn restrict_field(u: &DisplacementField, target: Arc<Grid>) -> Result<DisplacementField> {
    let src = u.grid();
    if src.spacing() != target.spacing() || src.axial_spacing() != target.axial_spacing() {
        return Err(Error::Construction("restriction needs identical spacings".into()));
    }
    let o1 = (target.origin().x - src.origin().x) / src.axial_spacing();
    let o2 = (target.origin().y - src.origin().y) / src.spacing();
    let o3 = (target.origin().z - src.origin().z) / src.spacing();
    let offs = [o1, o2, o3];
    if offs.iter().any(|o| (o - o.round()).abs() > 1e-9 || *o < -1e-9) {
        return Err(Error::Construction("target grid is not aligned inside the source grid".into()));
    }
    let offs = [o1.round() as usize, o2.round() as usize, o3.round() as usize];
    let tn = target.nodes_per_axis();
    let sn = src.nodes_per_axis();
    for k in 0..3 {
        if offs[k] + tn[k] > sn[k] {
            return Err(Error::Construction("target grid exceeds the source grid".into()));
        }
    }
    let mut values = Vec::with_capacity(target.node_count());
    for i1 in 0..tn[0] {
        for i2 in 0..tn[1] {
            for i3 in 0..tn[2] {
                values.push(u.values[src.node_index(i1 + offs[0], i2 + offs[1], i3 + offs[2])]);
            }
        }
    }
    if target.interface_layer() + offs[0] != src.interface_layer() {
        return Err(Error::Construction("interface planes do not coincide".into()));
    }
    let mut jumps = JumpSet::empty(&target);
    let n = target.transverse_cells();
    for i2 in 0..n {
        for i3 in 0..n {
            if target.face_masked(i2, i3) {
                jumps.set(i2, i3, u.jumps.get(i2 + offs[1], i3 + offs[2]));
            }
        }
    }
    DisplacementField::from_values(target, values, jumps, u.stretch())
}

/// Tiling of `Q_r` into `N × N` sub-squares glued along wedge-shaped
/// sectors `|x_k − t| < (μ/M)|x₁|` around each interior cut `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadrantGlueSpec {
    pub r: f64,
    pub mu: f64,
    /// Transition half-length `M` (also the half length of the grid).
    pub m: f64,
    /// Tiles per side: 2 (four quadrants) or 4.
    pub tiles_per_side: usize,
}

impl QuadrantGlueSpec {
    pub fn four_quadrants(r: f64, mu: f64, m: f64) -> Self {
        Self { r, mu, m, tiles_per_side: 2 }
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_per_side * self.tiles_per_side
    }

    /// Half side of the square on which the base field lives.
    pub fn base_half_side(&self) -> f64 {
        if self.tiles_per_side == 2 {
            0.5 * (self.r + self.mu)
        } else {
            self.r / self.tiles_per_side as f64 + self.mu
        }
    }

    /// Tile index `k₂ N + k₃`.
    pub fn tile_index(&self, k2: usize, k3: usize) -> usize {
        k2 * self.tiles_per_side + k3
    }

    fn tile_center_1d(&self, k: usize) -> f64 {
        let n = self.tiles_per_side as f64;
        -self.r + (2 * k + 1) as f64 * self.r / n
    }

    fn shifted_center_1d(&self, k: usize) -> f64 {
        let p = self.tile_center_1d(k);
        if self.tiles_per_side == 2 {
            p - p.signum() * 0.5 * self.mu
        } else {
            p
        }
    }

    /// Tile centres `p_k = (x₂, x₃)`.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let n = self.tiles_per_side;
        (0..n * n).map(|k| [self.tile_center_1d(k / n), self.tile_center_1d(k % n)]).collect()
    }

    /// Centres `p̃_k` of the enlarged base squares.
    pub fn shifted_centers(&self) -> Vec<[f64; 2]> {
        let n = self.tiles_per_side;
        (0..n * n).map(|k| [self.shifted_center_1d(k / n), self.shifted_center_1d(k % n)]).collect()
    }

    /// The tile at `x₂ < 0, x₃ > 0` whose translation is the reference.
    pub fn reference_tile(&self) -> usize {
        self.tile_index(0, self.tiles_per_side - 1)
    }

    /// `b_k = (H − I)(0, p̃_k − p̃_ref)`.
    pub fn burgers(&self, h: &Mat3) -> Vec<Vec3> {
        let centers = self.shifted_centers();
        let reference = centers[self.reference_tile()];
        centers
            .iter()
            .map(|c| (h - Mat3::identity()) * Vec3::new(0.0, c[0] - reference[0], c[1] - reference[1]))
            .collect()
    }

    /// Interior cut positions `t_j`.
    pub fn cuts(&self) -> Vec<f64> {
        let n = self.tiles_per_side;
        (1..n).map(|j| -self.r + 2.0 * self.r * j as f64 / n as f64).collect()
    }

    pub fn validate(&self, spacing: f64) -> Result<()> {
        if self.tiles_per_side != 2 && self.tiles_per_side != 4 {
            return Err(Error::Construction(format!(
                "tiles per side must be 2 or 4, got {}",
                self.tiles_per_side
            )));
        }
        if !(self.r > 0.0 && self.m > 0.0 && self.mu > 0.0) {
            return Err(Error::Construction("r, mu and M must be positive".into()));
        }
        if self.mu > self.r / 8.0 * (1.0 + 1e-12) {
            return Err(Error::Construction(format!("mu = {} exceeds r/8 = {}", self.mu, self.r / 8.0)));
        }
        if self.mu < 2.0 * spacing * (1.0 - 1e-12) {
            return Err(Error::Construction(format!(
                "mu = {} is resolved by fewer than 2 cells of size {spacing}",
                self.mu
            )));
        }
        let aligned = |x: f64| ((x / spacing) - (x / spacing).round()).abs() <= 1e-9;
        let mut lengths = vec![self.r, self.base_half_side(), self.m];
        lengths.extend(self.shifted_centers().iter().flat_map(|c| [c[0], c[1]]));
        lengths.extend(self.cuts());
        if !lengths.iter().all(|&x| aligned(x)) {
            return Err(Error::Construction(format!(
                "tile geometry (r = {}, mu = {}) is not aligned with spacing {spacing}",
                self.r, self.mu
            )));
        }
        Ok(())
    }

    /// Per-axis tile weights at transverse coordinate `x` and axial `x₁`:
    /// pairs `(tile, weight)` with positive weights summing to one.
    fn axis_weights(&self, x: f64, x1: f64) -> Vec<(usize, f64)> {
        let n = self.tiles_per_side;
        let width = 2.0 * self.r / n as f64;
        let k = (((x + self.r) / width).floor().max(0.0) as usize).min(n - 1);
        let slope = self.mu / self.m;
        for (j, &t) in self.cuts().iter().enumerate() {
            let reach = slope * x1.abs();
            if x1.abs() < self.m && (x - t).abs() < reach {
                let lambda = 0.5 * (1.0 + (x - t) / reach);
                return vec![(j, 1.0 - lambda), (j + 1, lambda)];
            }
        }
        vec![(k, 1.0)]
    }

    /// Sector membership of a point: `Some(2)` for `ω₁`, `Some(3)` for `ω₂`.
    pub fn sector(&self, x: Vec3) -> Option<usize> {
        let reach = self.mu / self.m * x.x.abs();
        if x.x.abs() >= self.m {
            return None;
        }
        let cuts = self.cuts();
        if cuts.iter().any(|&t| (x.y - t).abs() < reach) {
            Some(2)
        } else if cuts.iter().any(|&t| (x.z - t).abs() < reach) {
            Some(3)
        } else {
            None
        }
    }

    /// Tile containing the transverse point (cuts belong to the upper tile).
    pub fn tile_of(&self, x2: f64, x3: f64) -> usize {
        let n = self.tiles_per_side;
        let width = 2.0 * self.r / n as f64;
        let k = |x: f64| (((x + self.r) / width).floor().max(0.0) as usize).min(n - 1);
        self.tile_index(k(x2), k(x3))
    }
}

/// Itemized energy of a glued field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GlueEnergy {
    /// Cells outside both sectors, per tile.
    pub tiles: Vec<f64>,
    /// Cells in the sector around the cuts in `x₂`.
    pub sector_x2: f64,
    /// Cells in the sector around the cuts in `x₃` but not in the first.
    pub sector_x3: f64,
    pub total: f64,
}

impl GlueEnergy {
    pub fn tile_sum(&self) -> f64 {
        self.tiles.iter().sum()
    }
    pub fn sector_sum(&self) -> f64 {
        self.sector_x2 + self.sector_x3
    }
}

#[derive(Clone, Debug)]
pub struct GluedField {
    pub field: DisplacementField,
    /// Translation of the right end slab.
    pub right_translation: Vec3,
    pub burgers: Vec<Vec3>,
    pub energy: GlueEnergy,
}

/// Split the energy of a field on a tiled section by region.
pub fn itemize_glue_energy(spec: &QuadrantGlueSpec, u: &DisplacementField, model: &ElasticModel) -> GlueEnergy {
    let grid = u.grid();
    let cell_energy = Assembler::new(u).cell_energies(&u.values, model);
    let mut out = GlueEnergy { tiles: vec![0.0; spec.tile_count()], ..GlueEnergy::default() };
    for (slot, &cell) in grid.masked_cells().iter().enumerate() {
        let x = grid.cell_center(cell);
        let e = cell_energy[slot];
        match spec.sector(x) {
            Some(2) => out.sector_x2 += e,
            Some(_) => out.sector_x3 += e,
            None => out.tiles[spec.tile_of(x.y, x.z)] += e,
        }
    }
    out.total = out.tile_sum() + out.sector_sum();
    out
}

/// Glue translated copies of a base transition field into a field on
/// `(−M, M) × Q_r` with one jump surface per non-reference tile.
///
/// `base` lives on the square of half side [`QuadrantGlueSpec::base_half_side`]
/// with the same spacings and half length, satisfies the clamps `(I, H)` and
/// has right-slab translation `base_translation`.
pub fn glued_quadrant_field(
    spec: &QuadrantGlueSpec,
    base: &DisplacementField,
    base_translation: Vec3,
    grid: Arc<Grid>,
    model: &ElasticModel,
) -> Result<GluedField> {
    let a = grid.spacing();
    spec.validate(a)?;
    let cs = grid.cross_section();
    if cs.shape != Shape::Square || (cs.half_extent - spec.r).abs() > 1e-12 * spec.r {
        return Err(Error::Construction("glued field needs a square grid of half side r".into()));
    }
    let bg = base.grid();
    let bcs = bg.cross_section();
    if bcs.shape != Shape::Square
        || (bcs.half_extent - spec.base_half_side()).abs() > 1e-12 * spec.r
        || bg.spacing() != a
        || bg.axial_spacing() != grid.axial_spacing()
        || bg.axial_half_length() != grid.axial_half_length()
    {
        return Err(Error::Construction(format!(
            "base field must live on the square of half side {} with the same spacings",
            spec.base_half_side()
        )));
    }
    if (grid.axial_half_length() - spec.m).abs() > 1e-12 * spec.m {
        return Err(Error::Construction("grid half length must equal M".into()));
    }
    if !base.jumps.is_empty() || base.stretch() != 1.0 {
        return Err(Error::Construction("base field must be continuous and unstretched".into()));
    }
    let h = model.h();
    let burgers = spec.burgers(&h);
    let shifted = spec.shifted_centers();
    let s = spec.base_half_side();
    let layer = grid.interface_layer();
    let bn = bg.nodes_per_axis();
    // index offsets from main node to base node, per tile and axis
    let offset = |c: f64, main_origin: f64| -> i64 { ((main_origin - (c - s)) / a).round() as i64 };

    let mut values = vec![Vec3::zeros(); grid.node_count()];
    let nn = grid.nodes_per_axis();
    for i1 in 0..nn[0] {
        for i2 in 0..nn[1] {
            for i3 in 0..nn[2] {
                let node = grid.node_index(i1, i2, i3);
                if !grid.is_active(node) {
                    continue;
                }
                let x = grid.node_position(node);
                let w2 = spec.axis_weights(x.y, x.x);
                let w3 = spec.axis_weights(x.z, x.x);
                let mut v = Vec3::zeros();
                for &(k2, l2) in &w2 {
                    for &(k3, l3) in &w3 {
                        let k = spec.tile_index(k2, k3);
                        let c = shifted[k];
                        let j2 = i2 as i64 + offset(c[0], grid.origin().y);
                        let j3 = i3 as i64 + offset(c[1], grid.origin().z);
                        if j2 < 0 || j3 < 0 || j2 as usize >= bn[1] || j3 as usize >= bn[2] {
                            return Err(Error::Construction(format!(
                                "node at ({:.4}, {:.4}, {:.4}) falls outside base square {k}",
                                x.x, x.y, x.z
                            )));
                        }
                        let mut d = base.values[bg.node_index(i1, j2 as usize, j3 as usize)];
                        if i1 > layer {
                            d += burgers[k];
                        }
                        v += d * (l2 * l3);
                    }
                }
                values[node] = v;
            }
        }
    }

    let mut jumps = JumpSet::empty(&grid);
    let n = grid.transverse_cells();
    for i2 in 0..n {
        for i3 in 0..n {
            if grid.face_masked(i2, i3) {
                let (x2, x3) = grid.face_center(i2, i3);
                jumps.set(i2, i3, burgers[spec.tile_of(x2, x3)]);
            }
        }
    }
    let field = DisplacementField::from_values(grid, values, jumps, 1.0)?;
    let energy = itemize_glue_energy(spec, &field, model);
    let reference = shifted[spec.reference_tile()];
    let right_translation = base_translation - (h - Mat3::identity()) * Vec3::new(0.0, reference[0], reference[1]);
    Ok(GluedField { field, right_translation, burgers, energy })
}

/// Geodesic `R₀ exp(t log(R₀ᵀ R₁))`.
pub fn rotation_path(r0: &Mat3, r1: &Mat3, t: f64) -> Mat3 {
    let w = rotation_log(&(r0.transpose() * r1));
    r0 * rotation_exp(&(w * t))
}

/// `∫₀^τ exp(s·skew(w)) ds`.
fn integrated_exp(w: &Vec3, tau: f64) -> Mat3 {
    let theta = w.norm();
    if theta < 1e-12 {
        return Mat3::identity() * tau + skew(w) * (0.5 * tau * tau);
    }
    let k = skew(&(w / theta));
    Mat3::identity() * tau
        + k * ((1.0 - (tau * theta).cos()) / theta)
        + k * k * (tau - (tau * theta).sin() / theta)
}

/// Interface block: a minimizer of the transition problem with clamps
/// `(P, Q)`, used at scale `h` around `x₁ = 0`.
#[derive(Clone, Debug)]
pub struct TransitionBlock {
    pub field: DisplacementField,
    pub clamp: EndClamp,
    pub right_translation: Vec3,
    pub energy: f64,
}

/// Piecewise-constant limit profile with smooth rotation bands of half
/// width `sigma` around each break point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoverySpec {
    pub h: f64,
    pub sigma: f64,
    /// Half length `L` of the rod.
    pub half_length: f64,
    /// Break points `a₁ < … < a_n` in `(−L, 0)`.
    pub left_breaks: Vec<f64>,
    /// `R₀ … R_n`.
    pub left_rotations: Vec<Mat3>,
    /// Break points `b₁ < … < b_k` in `(0, L)`.
    pub right_breaks: Vec<f64>,
    /// Rotations `R′₀ … R′_k`; the profile on the right is `R′_j H`.
    pub right_rotations: Vec<Mat3>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEnergy {
    pub block: f64,
    pub bands: Vec<f64>,
    pub far_field: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct RecoveryField {
    pub field: DisplacementField,
    pub energy: RecoveryEnergy,
    /// Largest trace mismatch between adjacent pieces.
    pub trace_mismatch: f64,
}

/// One axial piece of the profile.
#[derive(Clone, Debug)]
enum Piece {
    Constant { m: Mat3, start: f64, end: f64 },
    Band { from: Mat3, w: Vec3, well: Mat3, start: f64, end: f64 },
    Block { start: f64, end: f64 },
}

impl RecoverySpec {
    fn validate(&self, block: &TransitionBlock, model: &ElasticModel) -> Result<f64> {
        let bad = |m: String| Err(Error::Construction(m));
        if !(self.h > 0.0 && self.h <= 1.0) {
            return bad(format!("h = {} must lie in (0, 1]", self.h));
        }
        if self.left_rotations.len() != self.left_breaks.len() + 1
            || self.right_rotations.len() != self.right_breaks.len() + 1
        {
            return bad("need one rotation more than break points on each side".into());
        }
        for r in self.left_rotations.iter().chain(&self.right_rotations) {
            if (r.transpose() * r - Mat3::identity()).norm() > 1e-10 || r.determinant() < 0.0 {
                return bad("profile matrices must be proper rotations".into());
            }
        }
        let block_half = self.h * block.field.grid().axial_half_length();
        if self.sigma <= 0.0 {
            return bad(format!("sigma = {} must be positive", self.sigma));
        }
        let mut marks = vec![-self.half_length];
        for &a in &self.left_breaks {
            marks.push(a - self.sigma);
            marks.push(a + self.sigma);
        }
        marks.push(-block_half);
        marks.push(block_half);
        for &b in &self.right_breaks {
            marks.push(b - self.sigma);
            marks.push(b + self.sigma);
        }
        marks.push(self.half_length);
        if marks.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!(
                "bands of half width {} and the block of half length {block_half} do not fit disjointly in (-L, L)",
                self.sigma
            ));
        }
        let n = self.left_rotations.len();
        if (block.clamp.left - self.left_rotations[n - 1]).norm() > 1e-12
            || (block.clamp.right - self.right_rotations[0] * model.h()).norm() > 1e-12
        {
            return bad("interface block clamps do not match the profile at x1 = 0".into());
        }
        Ok(block_half)
    }

    fn pieces(&self, block_half: f64, h: &Mat3) -> Vec<Piece> {
        let mut out = Vec::new();
        let mut start = -self.half_length;
        for (i, &a) in self.left_breaks.iter().enumerate() {
            let (r0, r1) = (self.left_rotations[i], self.left_rotations[i + 1]);
            out.push(Piece::Constant { m: r0, start, end: a - self.sigma });
            out.push(Piece::Band {
                from: r0,
                w: rotation_log(&(r0.transpose() * r1)),
                well: Mat3::identity(),
                start: a - self.sigma,
                end: a + self.sigma,
            });
            start = a + self.sigma;
        }
        out.push(Piece::Constant { m: *self.left_rotations.last().unwrap(), start, end: -block_half });
        out.push(Piece::Block { start: -block_half, end: block_half });
        start = block_half;
        for (j, &b) in self.right_breaks.iter().enumerate() {
            let (r0, r1) = (self.right_rotations[j], self.right_rotations[j + 1]);
            out.push(Piece::Constant { m: r0 * h, start, end: b - self.sigma });
            out.push(Piece::Band {
                from: r0,
                w: rotation_log(&(r0.transpose() * r1)),
                well: *h,
                start: b - self.sigma,
                end: b + self.sigma,
            });
            start = b + self.sigma;
        }
        out.push(Piece::Constant { m: *self.right_rotations.last().unwrap() * h, start, end: self.half_length });
        out
    }
}

/// Assemble the recovery field on `(−L, L) × S` at thickness `h`:
/// constant rotations away from the break points, geodesic rotation bands
/// of half width `σ`, and the interface block rescaled to `|x₁| ≤ hM`.
/// Returns the field (stretch `h`) and its rescaled energy `(1/h) 𝓘⁽ʰ⁾`.
pub fn recovery_sequence(spec: &RecoverySpec, block: &TransitionBlock, model: &ElasticModel) -> Result<RecoveryField> {
    let block_half = spec.validate(block, model)?;
    let bg = block.field.grid();
    if block.field.stretch() != 1.0 {
        return Err(Error::Construction("interface block must be an unstretched field".into()));
    }
    let h = spec.h;
    let grid = Arc::new(Grid::build_anisotropic(
        bg.cross_section(),
        spec.half_length,
        h * bg.axial_spacing(),
        bg.spacing(),
    )?);
    let hm = model.h();
    let pieces = spec.pieces(block_half, &hm);
    let a1 = grid.axial_spacing();
    let block_offset = grid.interface_layer() - bg.interface_layer();
    let tol = |x: f64, y: f64| (x - y).abs() <= 1e-9 * a1;
    let sx = |x: Vec3| Vec3::new(x.x, h * x.y, h * x.z);

    // translation of each piece so that adjacent traces agree
    let mut consts: Vec<Vec3> = Vec::with_capacity(pieces.len());
    // centreline position Y(x₁) at the end of the previous piece
    let mut y_end = Vec3::zeros();
    for (idx, piece) in pieces.iter().enumerate() {
        match piece {
            Piece::Constant { m, start, end } => {
                let c = if idx == 0 { Vec3::zeros() } else { y_end - m * Vec3::new(*start, 0.0, 0.0) };
                consts.push(c);
                y_end = m * Vec3::new(*end, 0.0, 0.0) + c;
            }
            Piece::Band { from, w, well, start, end } => {
                consts.push(y_end);
                let len = end - start;
                y_end += from * integrated_exp(w, 1.0) * well * Vec3::x() * len;
            }
            Piece::Block { start, .. } => {
                let prev = match &pieces[idx - 1] {
                    Piece::Constant { m, .. } => *m,
                    _ => unreachable!("a constant piece precedes the block"),
                };
                // left slab of the block: y = h P z + l with z₁ = x₁/h
                let l = y_end - prev * Vec3::new(*start, 0.0, 0.0);
                consts.push(l);
                y_end = block.clamp.right * Vec3::new(block_half, 0.0, 0.0) + block.right_translation * h + l;
            }
        }
    }

    let piece_of = |x1: f64| -> usize {
        pieces
            .iter()
            .position(|p| {
                let (_, e) = match p {
                    Piece::Constant { start, end, .. } | Piece::Band { start, end, .. } | Piece::Block { start, end } => {
                        (*start, *end)
                    }
                };
                x1 <= e || tol(x1, e)
            })
            .unwrap_or(pieces.len() - 1)
    };

    let eval = |idx: usize, node: usize, x: Vec3| -> Vec3 {
        match &pieces[idx] {
            Piece::Constant { m, .. } => (m - Mat3::identity()) * sx(x) + consts[idx],
            Piece::Band { from, w, well, start, end } => {
                let len = end - start;
                let t = ((x.x - start) / len).clamp(0.0, 1.0);
                let p = from * rotation_exp(&(w * t)) * well;
                let centre = consts[idx] + from * integrated_exp(w, t) * well * Vec3::x() * len;
                centre + p * Vec3::new(0.0, h * x.y, h * x.z) - sx(x)
            }
            Piece::Block { .. } => {
                let [i1, i2, i3] = grid.node_ijk(node);
                let j1 = i1 - block_offset;
                block.field.values[bg.node_index(j1, i2, i3)] * h + consts[idx]
            }
        }
    };

    let mut values = vec![Vec3::zeros(); grid.node_count()];
    let mut mismatch = 0.0f64;
    let bn1 = bg.nodes_per_axis()[0];
    for node in 0..grid.node_count() {
        let x = grid.node_position(node);
        let i1 = grid.node_ijk(node)[0];
        let in_block = i1 >= block_offset && i1 < block_offset + bn1;
        let idx = if in_block {
            pieces.iter().position(|p| matches!(p, Piece::Block { .. })).unwrap()
        } else {
            piece_of(x.x)
        };
        let v = eval(idx, node, x);
        // compare with the neighbouring piece at shared trace planes
        let (s, e) = match &pieces[idx] {
            Piece::Constant { start, end, .. } | Piece::Band { start, end, .. } | Piece::Block { start, end } => (*start, *end),
        };
        if idx + 1 < pieces.len() && tol(x.x, e) && grid.is_active(node) {
            mismatch = mismatch.max((eval(idx + 1, node, x) - v).norm());
        }
        if idx > 0 && tol(x.x, s) && grid.is_active(node) {
            mismatch = mismatch.max((eval(idx - 1, node, x) - v).norm());
        }
        values[node] = v;
    }
    if mismatch > 1e-10 {
        return Err(Error::Construction(format!("block traces disagree by {mismatch:e}")));
    }
    let jumps = block_jumps(&grid, block, h);
    let field = DisplacementField::from_values(grid.clone(), values, jumps, h)?;
    let cell_energy = Assembler::new(&field).cell_energies(&field.values, model);
    let band_count = spec.left_breaks.len() + spec.right_breaks.len();
    let mut energy = RecoveryEnergy { bands: vec![0.0; band_count], ..RecoveryEnergy::default() };
    let band_pieces: Vec<usize> = pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p, Piece::Band { .. }))
        .map(|(i, _)| i)
        .collect();
    for (slot, &cell) in grid.masked_cells().iter().enumerate() {
        let x1 = grid.cell_center(cell).x;
        let e = cell_energy[slot];
        let idx = piece_of(x1);
        match pieces[idx] {
            Piece::Block { .. } => energy.block += e,
            Piece::Band { .. } => {
                let b = band_pieces.iter().position(|&i| i == idx).unwrap();
                energy.bands[b] += e;
            }
            Piece::Constant { .. } => energy.far_field += e,
        }
    }
    energy.total = cell_energy.iter().sum();
    Ok(RecoveryField { field, energy, trace_mismatch: mismatch })
}

fn block_jumps(grid: &Grid, block: &TransitionBlock, h: f64) -> JumpSet {
    let mut jumps = JumpSet::empty(grid);
    if block.field.jumps.is_empty() {
        return jumps;
    }
    let n = grid.transverse_cells();
    for i2 in 0..n {
        for i3 in 0..n {
            let b = block.field.jumps.get(i2, i3);
            if b != Vec3::zeros() {
                jumps.set(i2, i3, b * h);
            }
        }
    }
    jumps
}

/// Square grid `Q_s` with the layout used by the glued construction.
pub fn square_grid(half_side: f64, half_length: f64, spacing: f64) -> Result<Arc<Grid>> {
    Ok(Arc::new(Grid::build(CrossSection::square(half_side), half_length, spacing)?))
}
