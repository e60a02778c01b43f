//! Hexahedral rod grids, dislocation loops rasterized on the interface
//! plane `x₁ = 0`, and discrete Burgers circuits.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::StrainField;
use crate::linalg::Vec3;
use crate::material::Phase;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Disk,
    Square,
}

/// Disk `S_r` of radius `r` or square `Q_r` of side `2r`, centred at the
/// origin of the `(x₂, x₃)` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub shape: Shape,
    pub half_extent: f64,
}

impl CrossSection {
    pub fn disk(r: f64) -> Self {
        Self { shape: Shape::Disk, half_extent: r }
    }

    pub fn square(r: f64) -> Self {
        Self { shape: Shape::Square, half_extent: r }
    }

    /// Open-set membership.
    pub fn contains(&self, x2: f64, x3: f64) -> bool {
        let r = self.half_extent;
        match self.shape {
            Shape::Disk => x2 * x2 + x3 * x3 < r * r,
            Shape::Square => x2.abs() < r && x3.abs() < r,
        }
    }

    pub fn area(&self) -> f64 {
        let r = self.half_extent;
        match self.shape {
            Shape::Disk => std::f64::consts::PI * r * r,
            Shape::Square => 4.0 * r * r,
        }
    }
}

const NO_SLOT: u32 = u32::MAX;

/// Regular grid over `(−M, M) × box(cross-section)` with a cell mask.
///
/// Nodes and cells are numbered lexicographically in `(i₁, i₂, i₃)` with
/// `i₃` fastest. The interface plane `x₁ = 0` is the node plane
/// `i₁ = n₁/2`.
#[derive(Clone, Debug)]
pub struct Grid {
    spacing: f64,
    axial_spacing: f64,
    axial_half_length: f64,
    cross_section: CrossSection,
    cells: [usize; 3],
    origin: Vec3,
    masked: Vec<usize>,
    slot: Vec<u32>,
    active: Vec<bool>,
    hash: String,
}

fn integer_ratio(num: f64, den: f64) -> Option<usize> {
    let q = num / den;
    let n = q.round();
    if n >= 0.0 && (q - n).abs() <= 1e-9 * n.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

impl Grid {
    /// Isotropic grid with spacing `a` in every direction.
    pub fn build(cross_section: CrossSection, half_length: f64, spacing: f64) -> Result<Self> {
        Self::build_anisotropic(cross_section, half_length, spacing, spacing)
    }

    /// Grid whose axial spacing differs from the transverse spacing; used for
    /// thin-domain fields written in the reference cross-section.
    pub fn build_anisotropic(
        cross_section: CrossSection,
        half_length: f64,
        axial_spacing: f64,
        spacing: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("spacing", spacing),
            ("axial spacing", axial_spacing),
            ("half length", half_length),
            ("cross-section half extent", cross_section.half_extent),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Grid(format!("{name} = {v} must be positive")));
            }
        }
        let half_axial = integer_ratio(half_length, axial_spacing).ok_or_else(|| {
            Error::Grid(format!(
                "axial spacing {axial_spacing} does not divide the half length {half_length}"
            ))
        })?;
        let half_cross = (cross_section.half_extent / spacing - 1e-9).ceil().max(0.0) as usize;
        let n1 = 2 * half_axial;
        let n2 = 2 * half_cross;
        if n1 < 4 || n2 < 4 {
            return Err(Error::Grid(format!(
                "under-resolved grid: {n1} axial and {n2} transverse cells (need at least 4)"
            )));
        }
        let origin = Vec3::new(
            -(half_axial as f64) * axial_spacing,
            -(half_cross as f64) * spacing,
            -(half_cross as f64) * spacing,
        );
        let n_cells = n1 * n2 * n2;
        let mut slot = vec![NO_SLOT; n_cells];
        let mut masked = Vec::new();
        let mut section_mask = vec![false; n2 * n2];
        for i2 in 0..n2 {
            for i3 in 0..n2 {
                let x2 = origin.y + (i2 as f64 + 0.5) * spacing;
                let x3 = origin.z + (i3 as f64 + 0.5) * spacing;
                section_mask[i2 * n2 + i3] = cross_section.contains(x2, x3);
            }
        }
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                for i3 in 0..n2 {
                    if section_mask[i2 * n2 + i3] {
                        let c = (i1 * n2 + i2) * n2 + i3;
                        slot[c] = masked.len() as u32;
                        masked.push(c);
                    }
                }
            }
        }
        let nn = [n1 + 1, n2 + 1, n2 + 1];
        let mut active = vec![false; nn[0] * nn[1] * nn[2]];
        for &c in &masked {
            let [i1, i2, i3] = Self::unflatten(c, [n1, n2, n2]);
            for o in 0..8 {
                let (d1, d2, d3) = (o >> 2 & 1, o >> 1 & 1, o & 1);
                active[((i1 + d1) * nn[1] + i2 + d2) * nn[2] + i3 + d3] = true;
            }
        }
        let mut hasher = Sha256::new();
        hasher.update(format!(
            "{:?}|{:016x}|{:016x}|{:016x}|{:016x}",
            cross_section.shape,
            cross_section.half_extent.to_bits(),
            half_length.to_bits(),
            axial_spacing.to_bits(),
            spacing.to_bits()
        ));
        let hash = hex::encode(&hasher.finalize()[..8]);
        Ok(Self {
            spacing,
            axial_spacing,
            axial_half_length: half_length,
            cross_section,
            cells: [n1, n2, n2],
            origin,
            masked,
            slot,
            active,
            hash,
        })
    }

    fn unflatten(idx: usize, dims: [usize; 3]) -> [usize; 3] {
        let i3 = idx % dims[2];
        let rest = idx / dims[2];
        [rest / dims[1], rest % dims[1], i3]
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn axial_spacing(&self) -> f64 {
        self.axial_spacing
    }
    pub fn axial_half_length(&self) -> f64 {
        self.axial_half_length
    }
    pub fn cross_section(&self) -> CrossSection {
        self.cross_section
    }
    pub fn cells_per_axis(&self) -> [usize; 3] {
        self.cells
    }
    pub fn nodes_per_axis(&self) -> [usize; 3] {
        [self.cells[0] + 1, self.cells[1] + 1, self.cells[2] + 1]
    }
    pub fn node_count(&self) -> usize {
        let n = self.nodes_per_axis();
        n[0] * n[1] * n[2]
    }
    pub fn cell_volume(&self) -> f64 {
        self.axial_spacing * self.spacing * self.spacing
    }
    pub fn origin(&self) -> Vec3 {
        self.origin
    }
    /// Short content hash of the defining parameters.
    pub fn hash(&self) -> &str {
        &self.hash
    }
    /// Node-plane index of `x₁ = 0`.
    pub fn interface_layer(&self) -> usize {
        self.cells[0] / 2
    }

    pub fn masked_cells(&self) -> &[usize] {
        &self.masked
    }
    pub fn masked_count(&self) -> usize {
        self.masked.len()
    }
    pub fn slot_of(&self, cell: usize) -> Option<usize> {
        match self.slot.get(cell) {
            Some(&s) if s != NO_SLOT => Some(s as usize),
            _ => None,
        }
    }
    pub fn is_active(&self, node: usize) -> bool {
        self.active[node]
    }

    pub fn node_index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        let n = self.nodes_per_axis();
        (i1 * n[1] + i2) * n[2] + i3
    }
    pub fn node_ijk(&self, node: usize) -> [usize; 3] {
        Self::unflatten(node, self.nodes_per_axis())
    }
    pub fn node_position(&self, node: usize) -> Vec3 {
        let [i1, i2, i3] = self.node_ijk(node);
        self.node_position_ijk(i1, i2, i3)
    }
    pub fn node_position_ijk(&self, i1: usize, i2: usize, i3: usize) -> Vec3 {
        Vec3::new(
            self.origin.x + i1 as f64 * self.axial_spacing,
            self.origin.y + i2 as f64 * self.spacing,
            self.origin.z + i3 as f64 * self.spacing,
        )
    }

    pub fn cell_index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.cells[1] + i2) * self.cells[2] + i3
    }
    pub fn cell_ijk(&self, cell: usize) -> [usize; 3] {
        Self::unflatten(cell, self.cells)
    }
    pub fn cell_center(&self, cell: usize) -> Vec3 {
        let [i1, i2, i3] = self.cell_ijk(cell);
        Vec3::new(
            self.origin.x + (i1 as f64 + 0.5) * self.axial_spacing,
            self.origin.y + (i2 as f64 + 0.5) * self.spacing,
            self.origin.z + (i3 as f64 + 0.5) * self.spacing,
        )
    }
    /// Eight corner nodes, ordered by the bit pattern `(d₁ d₂ d₃)`.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 8] {
        let [i1, i2, i3] = self.cell_ijk(cell);
        let mut out = [0; 8];
        for (o, slot) in out.iter_mut().enumerate() {
            *slot = self.node_index(i1 + (o >> 2 & 1), i2 + (o >> 1 & 1), i3 + (o & 1));
        }
        out
    }
    pub fn cell_phase(&self, cell: usize) -> Phase {
        if self.cell_ijk(cell)[0] < self.interface_layer() {
            Phase::Left
        } else {
            Phase::Right
        }
    }

    /// Centre `(x₂, x₃)` of the interface face `(i₂, i₃)`.
    pub fn face_center(&self, i2: usize, i3: usize) -> (f64, f64) {
        (
            self.origin.y + (i2 as f64 + 0.5) * self.spacing,
            self.origin.z + (i3 as f64 + 0.5) * self.spacing,
        )
    }
    /// Whether the interface face `(i₂, i₃)` lies inside the cell mask.
    pub fn face_masked(&self, i2: usize, i3: usize) -> bool {
        self.slot_of(self.cell_index(self.interface_layer(), i2, i3)).is_some()
    }
    pub fn transverse_cells(&self) -> usize {
        self.cells[1]
    }

    /// Same index structure, spacings and mask: nodal arrays can be shared.
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.cells == other.cells && self.masked == other.masked
    }
}

/// A closed dislocation loop `Γ` in the interface plane, the scaled Burgers
/// vector `h b`, and the rasterized jump surface `D`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DislocationSpec {
    /// Unit Burgers direction `b`.
    pub direction: [f64; 3],
    /// Scale `h ≥ 0`; the jump across `D` is `h b`.
    pub scale: f64,
    /// Polygon vertices `(x₂, x₃)`, implicitly closed.
    pub curve: Vec<[f64; 2]>,
    /// Interface faces `(i₂, i₃)` whose centres lie in the enclosed region.
    pub faces: Vec<(usize, usize)>,
    /// Set when the polygon is smaller than one face and nothing was
    /// rasterized.
    pub unresolved: bool,
}

impl DislocationSpec {
    pub fn burgers(&self) -> Vec3 {
        Vec3::new(self.direction[0], self.direction[1], self.direction[2]) * self.scale
    }

    /// Spec with an explicit face set (used by constructions whose jump sets
    /// are tiles rather than polygons).
    pub fn from_faces(burgers: Vec3, curve: Vec<[f64; 2]>, faces: Vec<(usize, usize)>) -> Self {
        let scale = burgers.norm();
        let direction = if scale > 0.0 { burgers / scale } else { Vec3::x() };
        Self {
            direction: [direction.x, direction.y, direction.z],
            scale,
            curve,
            faces,
            unresolved: false,
        }
    }
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s.abs()
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }
    fn on_segment(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
        c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    }
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Even-odd point-in-polygon test; points on an edge count as inside.
pub fn point_in_polygon(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = poly.len();
    let scale = poly.iter().fold(1.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
    for i in 0..n {
        let [ax, ay] = poly[i];
        let [bx, by] = poly[(i + 1) % n];
        let cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
        if cross.abs() <= 1e-12 * scale * len.max(f64::MIN_POSITIVE)
            && x >= ax.min(bx) - 1e-12 * scale
            && x <= ax.max(bx) + 1e-12 * scale
            && y >= ay.min(by) - 1e-12 * scale
            && y <= ay.max(by) + 1e-12 * scale
        {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Rasterize the region enclosed by `curve` onto the interface faces of
/// `grid`.
pub fn rasterize_dislocation(
    curve: &[[f64; 2]],
    grid: &Grid,
    direction: Vec3,
    scale: f64,
) -> Result<DislocationSpec> {
    if curve.len() < 3 {
        return Err(Error::Dislocation(format!("polygon needs at least 3 vertices, got {}", curve.len())));
    }
    if curve.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Dislocation("non-finite polygon vertex".into()));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Dislocation(format!("Burgers scale {scale} must be non-negative")));
    }
    let norm = direction.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Dislocation(format!("Burgers direction must be a unit vector, |b| = {norm}")));
    }
    let cs = grid.cross_section();
    for p in curve {
        if !cs.contains(p[0], p[1]) {
            return Err(Error::Dislocation(format!(
                "vertex ({}, {}) touches or leaves the cross-section",
                p[0], p[1]
            )));
        }
    }
    if !is_simple(curve) {
        return Err(Error::Dislocation("polygon is not simple".into()));
    }
    let a = grid.spacing();
    let mut spec = DislocationSpec {
        direction: [direction.x, direction.y, direction.z],
        scale,
        curve: curve.to_vec(),
        faces: Vec::new(),
        unresolved: false,
    };
    if polygon_area(curve) < a * a {
        log::warn!("dislocation loop of area {} is below one face ({}); nothing rasterized", polygon_area(curve), a * a);
        spec.unresolved = true;
        return Ok(spec);
    }
    let n = grid.transverse_cells();
    for i2 in 0..n {
        for i3 in 0..n {
            if !grid.face_masked(i2, i3) {
                continue;
            }
            let (x2, x3) = grid.face_center(i2, i3);
            if point_in_polygon(curve, x2, x3) {
                spec.faces.push((i2, i3));
            }
        }
    }
    Ok(spec)
}

/// Regular polygon approximating a circle (counter-clockwise).
pub fn circle_polygon(center: [f64; 2], radius: f64, vertices: usize) -> Vec<[f64; 2]> {
    (0..vertices)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / vertices as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

/// Closed path of face-adjacent masked cells; the circulation is taken
/// along the segments joining consecutive cell centres.
#[derive(Clone, Debug)]
pub struct CellLoop {
    pub cells: Vec<[usize; 3]>,
}

impl CellLoop {
    pub fn new(cells: Vec<[usize; 3]>) -> Self {
        Self { cells }
    }

    /// Rectangle in the `(x₁, x_k)` plane (`k = 2` or `3`) through the
    /// boundary cells of `[a1, b1] × [ak, bk]`, the remaining index fixed.
    /// Traversal: +x₁ along `ak`, +x_k along `b1`, −x₁ along `bk`, −x_k
    /// along `a1`.
    pub fn axial_rectangle(k: usize, (a1, b1): (usize, usize), (ak, bk): (usize, usize), fixed: usize) -> Self {
        assert!(k == 2 || k == 3);
        assert!(a1 < b1 && ak < bk);
        let cell = |i1: usize, ik: usize| if k == 2 { [i1, ik, fixed] } else { [i1, fixed, ik] };
        let mut cells = Vec::new();
        for i1 in a1..b1 {
            cells.push(cell(i1, ak));
        }
        for ik in ak..bk {
            cells.push(cell(b1, ik));
        }
        for i1 in (a1 + 1..=b1).rev() {
            cells.push(cell(i1, bk));
        }
        for ik in (ak + 1..=bk).rev() {
            cells.push(cell(a1, ik));
        }
        Self { cells }
    }

    /// Concatenate a loop with itself `times` times.
    pub fn repeated(&self, times: usize) -> Self {
        let mut cells = Vec::with_capacity(self.cells.len() * times);
        for _ in 0..times {
            cells.extend_from_slice(&self.cells);
        }
        Self { cells }
    }

    pub fn reversed(&self) -> Self {
        let mut cells = self.cells.clone();
        cells.reverse();
        Self { cells }
    }
}

fn step_axis(a: [usize; 3], b: [usize; 3]) -> Option<(usize, f64)> {
    let mut axis = None;
    for k in 0..3 {
        let d = b[k] as i64 - a[k] as i64;
        match d {
            0 => {}
            1 | -1 if axis.is_none() => axis = Some((k, d as f64)),
            _ => return None,
        }
    }
    axis
}

/// Discrete circulation `∮ G t ds` along a closed cell loop.
///
/// Each step between face-adjacent cells contributes
/// `(G_c + G_c') e_k Δ_k / 2` (midpoint rule on the shared face). For fields
/// built by [`crate::fields::strain`] this telescopes exactly, except that
/// every crossing of a jump face in the `+x₁` direction adds `−h b`. Loops
/// must keep one cell away from the dislocation line inside the interface
/// layer.
pub fn burgers_circuit(strain: &StrainField, path: &CellLoop) -> Result<Vec3> {
    let grid = strain.grid();
    let mut cells = path.cells.clone();
    if cells.len() > 1 && cells.first() == cells.last() {
        cells.pop();
    }
    if cells.len() < 2 {
        return Err(Error::Loop("a loop needs at least two cells".into()));
    }
    let dims = grid.cells_per_axis();
    let mut slots = Vec::with_capacity(cells.len());
    for c in &cells {
        if c[0] >= dims[0] || c[1] >= dims[1] || c[2] >= dims[2] {
            return Err(Error::Loop(format!("cell {c:?} outside the grid")));
        }
        let slot = grid
            .slot_of(grid.cell_index(c[0], c[1], c[2]))
            .ok_or_else(|| Error::Loop(format!("cell {c:?} is not in the mask")))?;
        slots.push(slot);
    }
    let spacing = [grid.axial_spacing(), grid.spacing(), grid.spacing()];
    let mut total = Vec3::zeros();
    let n = cells.len();
    for i in 0..n {
        let j = (i + 1) % n;
        let (axis, sign) = step_axis(cells[i], cells[j]).ok_or_else(|| {
            if j == 0 {
                Error::Loop(format!("open path: last cell {:?} is not adjacent to the first {:?}", cells[i], cells[j]))
            } else {
                Error::Loop(format!("cells {:?} and {:?} are not face-adjacent", cells[i], cells[j]))
            }
        })?;
        let gi = strain.cell(slots[i]);
        let gj = strain.cell(slots[j]);
        total += (gi.column(axis) + gj.column(axis)) * (0.5 * sign * spacing[axis]);
    }
    Ok(total)
}

/// Shared handle used by fields and solvers.
pub type GridRef = Arc<Grid>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_grid_counts() {
        let g = Grid::build(CrossSection::square(1.0), 2.0, 0.5).unwrap();
        assert_eq!(g.cells_per_axis(), [8, 4, 4]);
        assert_eq!(g.masked_count(), 128);
        assert!(Grid::build(CrossSection::square(1.0), 2.0, 0.3).is_err());
        assert!(Grid::build(CrossSection::square(1.0), 2.0, 0.6).is_err());
    }

    #[test]
    fn disk_mask_matches_enumeration() {
        let a = 0.25;
        let g = Grid::build(CrossSection::disk(1.0), 1.0, a).unwrap();
        // enumeration oracle over the bounding box of cell centres
        let mut per_layer = 0;
        for i in -4i32..4 {
            for j in -4i32..4 {
                let (x, y) = ((i as f64 + 0.5) * a, (j as f64 + 0.5) * a);
                if x * x + y * y < 1.0 {
                    per_layer += 1;
                }
            }
        }
        assert_eq!(per_layer, 52);
        assert!((per_layer as f64 - std::f64::consts::PI / (a * a)).abs() <= 2.0);
        assert_eq!(g.masked_count(), per_layer * 8);
    }

    #[test]
    fn disk_mask_is_point_symmetric() {
        let g = Grid::build(CrossSection::disk(1.3), 0.5, 0.125).unwrap();
        let n = g.transverse_cells();
        for i2 in 0..n {
            for i3 in 0..n {
                assert_eq!(g.face_masked(i2, i3), g.face_masked(n - 1 - i2, n - 1 - i3));
            }
        }
    }

    #[test]
    fn interface_layer_is_node_plane_zero() {
        let g = Grid::build(CrossSection::square(1.0), 1.5, 0.25).unwrap();
        let layer = g.interface_layer();
        assert_eq!(g.node_position_ijk(layer, 0, 0).x, 0.0);
        assert_eq!(g.cell_phase(g.cell_index(layer - 1, 0, 0)), Phase::Left);
        assert_eq!(g.cell_phase(g.cell_index(layer, 0, 0)), Phase::Right);
    }

    #[test]
    fn rasterize_aligned_square() {
        let g = Grid::build(CrossSection::disk(1.0), 1.0, 0.25).unwrap();
        let square = vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
        let d = rasterize_dislocation(&square, &g, Vec3::y(), 0.1).unwrap();
        assert_eq!(d.faces.len(), 16);
        assert!(!d.unresolved);
    }

    #[test]
    fn rasterize_circle_area() {
        let a = 0.125;
        let g = Grid::build(CrossSection::disk(1.0), 1.0, a).unwrap();
        let circle = circle_polygon([0.0, 0.0], 0.5, 256);
        let d = rasterize_dislocation(&circle, &g, Vec3::y(), 0.1).unwrap();
        let target = std::f64::consts::PI * 0.25 / (a * a);
        assert!((d.faces.len() as f64 - target).abs() <= 0.08 * target, "{} faces", d.faces.len());
    }

    #[test]
    fn rasterize_degenerate_and_touching() {
        let g = Grid::build(CrossSection::disk(1.0), 1.0, 0.25).unwrap();
        let tiny = vec![[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]];
        let d = rasterize_dislocation(&tiny, &g, Vec3::y(), 0.1).unwrap();
        assert!(d.unresolved && d.faces.is_empty());
        let touching = vec![[-1.0, 0.0], [0.5, -0.5], [0.5, 0.5]];
        assert!(rasterize_dislocation(&touching, &g, Vec3::y(), 0.1).is_err());
        let bow_tie = vec![[-0.5, -0.5], [0.5, 0.5], [0.5, -0.5], [-0.5, 0.5]];
        assert!(rasterize_dislocation(&bow_tie, &g, Vec3::y(), 0.1).is_err());
    }

    #[test]
    fn rasterized_area_converges_linearly() {
        let circle = circle_polygon([0.1, -0.05], 0.55, 512);
        let exact = polygon_area(&circle);
        let mut errors = Vec::new();
        for a in [0.125, 0.0625, 0.03125] {
            let g = Grid::build(CrossSection::disk(1.0), 0.5, a).unwrap();
            let d = rasterize_dislocation(&circle, &g, Vec3::y(), 0.1).unwrap();
            errors.push((d.faces.len() as f64 * a * a - exact).abs());
        }
        // O(a): error bounded by perimeter × a
        let perimeter = 2.0 * std::f64::consts::PI * 0.55;
        for (k, a) in [0.125, 0.0625, 0.03125].iter().enumerate() {
            assert!(errors[k] <= perimeter * a, "a = {a}: error {}", errors[k]);
        }
    }

    #[test]
    fn point_in_polygon_ties_are_inside() {
        let sq = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(point_in_polygon(&sq, 0.5, 0.5));
        assert!(point_in_polygon(&sq, 1.0, 0.5));
        assert!(point_in_polygon(&sq, 0.0, 0.0));
        assert!(!point_in_polygon(&sq, 1.5, 0.5));
    }
}
