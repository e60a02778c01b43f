//! Nodal displacement fields, per-cell deformation gradients with the jump
//! correction, and the thin-domain change of variables.
//!
//! A field stores nodal displacements `u` over a grid and a transverse
//! stretch `s`; the deformation is `y(x) = S x + u(x)` with
//! `S = diag(1, s, s)`. Physical fields have `s = 1`. Pulling a field on the
//! thin domain `(−L, L) × hS` back to `(−L, L) × S` keeps the nodal values and
//! sets `s = h`, so that `F_h = G · diag(1, 1/s, 1/s)` is the physical gradient.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{DislocationSpec, Grid};
use crate::linalg::{Mat3, Vec3};

/// Burgers vector per interface face; the cells right of a jump face see
/// the face nodes as `u + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpSet {
    n: usize,
    burgers: Vec<Vec3>,
    faces: usize,
}

impl JumpSet {
    pub fn empty(grid: &Grid) -> Self {
        let n = grid.transverse_cells();
        Self { n, burgers: vec![Vec3::zeros(); n * n], faces: 0 }
    }

    pub fn from_spec(grid: &Grid, spec: &DislocationSpec) -> Result<Self> {
        let mut set = Self::empty(grid);
        set.add(grid, spec)?;
        Ok(set)
    }

    /// Add an independent jump surface; surfaces must not share faces.
    pub fn add(&mut self, grid: &Grid, spec: &DislocationSpec) -> Result<()> {
        if grid.transverse_cells() != self.n {
            return Err(Error::Field("jump set built for a different grid".into()));
        }
        let b = spec.burgers();
        if !(b.x.is_finite() && b.y.is_finite() && b.z.is_finite()) {
            return Err(Error::NonFinite("Burgers vector".into()));
        }
        for &(i2, i3) in &spec.faces {
            if i2 >= self.n || i3 >= self.n || !grid.face_masked(i2, i3) {
                return Err(Error::Field(format!("jump face ({i2}, {i3}) outside the masked interface")));
            }
            let slot = &mut self.burgers[i2 * self.n + i3];
            if *slot != Vec3::zeros() {
                return Err(Error::Field(format!("jump surfaces overlap at face ({i2}, {i3})")));
            }
            *slot = b;
            if b != Vec3::zeros() {
                self.faces += 1;
            }
        }
        Ok(())
    }

    pub fn get(&self, i2: usize, i3: usize) -> Vec3 {
        self.burgers[i2 * self.n + i3]
    }

    pub fn set(&mut self, i2: usize, i3: usize, b: Vec3) {
        let slot = &mut self.burgers[i2 * self.n + i3];
        match (*slot == Vec3::zeros(), b == Vec3::zeros()) {
            (true, false) => self.faces += 1,
            (false, true) => self.faces -= 1,
            _ => {}
        }
        *slot = b;
    }

    pub fn face_count(&self) -> usize {
        self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces == 0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.burgers {
            *b *= factor;
        }
        if factor == 0.0 {
            out.faces = 0;
        }
        out
    }

    /// Content hash of the Burgers vectors.
    pub fn id(&self) -> String {
        if self.is_empty() {
            return "none".into();
        }
        let mut hasher = Sha256::new();
        for b in &self.burgers {
            for c in b.iter() {
                hasher.update(c.to_bits().to_le_bytes());
            }
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

#[derive(Clone, Debug)]
pub struct DisplacementField {
    grid: Arc<Grid>,
    pub values: Vec<Vec3>,
    pub jumps: JumpSet,
    stretch: f64,
}

impl DisplacementField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        let jumps = JumpSet::empty(&grid);
        Self { grid, values: vec![Vec3::zeros(); n], jumps, stretch: 1.0 }
    }

    /// Sample `f(x)` at every node position.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(Vec3) -> Vec3) -> Self {
        let values = (0..grid.node_count()).map(|n| f(grid.node_position(n))).collect();
        let jumps = JumpSet::empty(&grid);
        Self { grid, values, jumps, stretch: 1.0 }
    }

    /// `u(x) = (A − I) x`.
    pub fn affine(grid: Arc<Grid>, a: &Mat3) -> Self {
        let d = a - Mat3::identity();
        Self::from_fn(grid, |x| d * x)
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<Vec3>, jumps: JumpSet, stretch: f64) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Field(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("displacement value".into()));
        }
        if !(stretch.is_finite() && stretch > 0.0) {
            return Err(Error::Field(format!("stretch {stretch} must be positive")));
        }
        if jumps.n != grid.transverse_cells() {
            return Err(Error::Field("jump set built for a different grid".into()));
        }
        Ok(Self { grid, values, jumps, stretch })
    }

    pub fn with_jumps(mut self, jumps: JumpSet) -> Self {
        self.jumps = jumps;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    /// Deformed position `S x + u` of a node.
    pub fn position(&self, node: usize) -> Vec3 {
        let x = self.grid.node_position(node);
        Vec3::new(x.x, self.stretch * x.y, self.stretch * x.z) + self.values[node]
    }

    /// Write a text representation: a small header and one node per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# rodlab field v1")?;
        writeln!(w, "grid {}", self.grid.hash())?;
        writeln!(w, "stretch {:?}", self.stretch)?;
        writeln!(w, "jump {}", self.jumps.id())?;
        writeln!(w, "nodes {}", self.values.len())?;
        for v in &self.values {
            writeln!(w, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
        }
        Ok(())
    }

    /// Read a field written by [`write_text`](Self::write_text); the grid
    /// and jump set must match the header.
    pub fn read_text<R: BufRead>(r: R, grid: Arc<Grid>, jumps: JumpSet) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Field(format!("truncated field file: missing {what}")))
        };
        let magic = next("header")?;
        if magic.trim() != "# rodlab field v1" {
            return Err(Error::Field(format!("unrecognized header {magic:?}")));
        }
        let header = |line: String, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| Error::Field(format!("expected `{key}` line, got {line:?}")))
        };
        let grid_hash = header(next("grid")?, "grid ")?;
        if grid_hash != grid.hash() {
            return Err(Error::Field(format!("grid hash {grid_hash} does not match {}", grid.hash())));
        }
        let stretch: f64 = header(next("stretch")?, "stretch ")?
            .parse()
            .map_err(|e| Error::Field(format!("stretch: {e}")))?;
        let jump_id = header(next("jump")?, "jump ")?;
        if jump_id != jumps.id() {
            return Err(Error::Field(format!("jump id {jump_id} does not match {}", jumps.id())));
        }
        let count: usize = header(next("nodes")?, "nodes ")?
            .parse()
            .map_err(|e| Error::Field(format!("node count: {e}")))?;
        let mut values = Vec::with_capacity(count);
        for k in 0..count {
            let line = next("node values")?;
            let parts: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Field(format!("node {k}: {e}")))?;
            if parts.len() != 3 {
                return Err(Error::Field(format!("node {k}: expected 3 components")));
            }
            values.push(Vec3::new(parts[0], parts[1], parts[2]));
        }
        Self::from_values(grid, values, jumps, stretch)
    }
}

/// Per-cell differencing data shared by [`strain`] and the solver.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    /// `1/(4 a_k)`.
    inv: [f64; 3],
}

impl Stencil {
    pub(crate) fn new(grid: &Grid) -> Self {
        Self {
            inv: [
                0.25 / grid.axial_spacing(),
                0.25 / grid.spacing(),
                0.25 / grid.spacing(),
            ],
        }
    }

    /// Gradient of the trilinear shape function of corner `o` at the centre.
    #[inline]
    pub(crate) fn shape_gradient(&self, o: usize) -> Vec3 {
        let s = |bit: usize| if bit == 1 { 1.0 } else { -1.0 };
        Vec3::new(
            s(o >> 2 & 1) * self.inv[0],
            s(o >> 1 & 1) * self.inv[1],
            s(o & 1) * self.inv[2],
        )
    }

    /// `S + Σ v_o ⊗ ∇N_o` for the eight corner values.
    #[inline]
    pub(crate) fn gradient(&self, v: &[Vec3; 8], stretch: f64) -> Mat3 {
        let c0 = (v[4] + v[5] + v[6] + v[7] - v[0] - v[1] - v[2] - v[3]) * self.inv[0];
        let c1 = (v[2] + v[3] + v[6] + v[7] - v[0] - v[1] - v[4] - v[5]) * self.inv[1];
        let c2 = (v[1] + v[3] + v[5] + v[7] - v[0] - v[2] - v[4] - v[6]) * self.inv[2];
        let mut g = Mat3::from_columns(&[c0, c1, c2]);
        g[(0, 0)] += 1.0;
        g[(1, 1)] += stretch;
        g[(2, 2)] += stretch;
        g
    }
}

/// Burgers vector seen by a cell: non-zero only for cells in the first
/// layer right of the interface above a jump face.
#[inline]
pub(crate) fn cell_jump(grid: &Grid, jumps: &JumpSet, cell: usize) -> Option<Vec3> {
    if jumps.is_empty() {
        return None;
    }
    let [i1, i2, i3] = grid.cell_ijk(cell);
    if i1 != grid.interface_layer() {
        return None;
    }
    let b = jumps.get(i2, i3);
    (b != Vec3::zeros()).then_some(b)
}

/// Corner values of a cell with the jump correction applied.
#[inline]
pub(crate) fn corner_values(nodes: &[usize; 8], values: &[Vec3], jump: Option<Vec3>) -> [Vec3; 8] {
    let mut v = [Vec3::zeros(); 8];
    for o in 0..8 {
        v[o] = values[nodes[o]];
    }
    if let Some(b) = jump {
        for item in v.iter_mut().take(4) {
            *item += b;
        }
    }
    v
}

/// Per masked cell deformation gradient (absolutely continuous part).
#[derive(Clone, Debug)]
pub struct StrainField {
    grid: Arc<Grid>,
    stretch: f64,
    cells: Vec<Mat3>,
}

impl StrainField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn stretch(&self) -> f64 {
        self.stretch
    }
    /// Gradient of the masked cell with the given slot.
    pub fn cell(&self, slot: usize) -> &Mat3 {
        &self.cells[slot]
    }
    pub fn cells(&self) -> &[Mat3] {
        &self.cells
    }
    /// Gradient at grid cell `(i₁, i₂, i₃)` if it is masked.
    pub fn at(&self, i1: usize, i2: usize, i3: usize) -> Option<&Mat3> {
        self.grid.slot_of(self.grid.cell_index(i1, i2, i3)).map(|s| &self.cells[s])
    }
    /// The thin-domain gradient `F_h = G · diag(1, 1/s, 1/s)`.
    pub fn physical(&self) -> RescaledField {
        rescale_cells(&self.cells, self.stretch)
    }
}

/// Trilinear-average gradient of `S x + u` in every masked cell.
pub fn strain(u: &DisplacementField) -> StrainField {
    let grid = &u.grid;
    let stencil = Stencil::new(grid);
    let cells: Vec<Mat3> = grid
        .masked_cells()
        .par_iter()
        .map(|&c| {
            let nodes = grid.cell_nodes(c);
            let v = corner_values(&nodes, &u.values, cell_jump(grid, &u.jumps, c));
            stencil.gradient(&v, u.stretch)
        })
        .collect();
    StrainField { grid: u.grid.clone(), stretch: u.stretch, cells }
}

/// `F_h = (F¹ | F²/h | F³/h)` per cell.
#[derive(Clone, Debug)]
pub struct RescaledField {
    pub h: f64,
    pub cells: Vec<Mat3>,
}

fn rescale_cells(cells: &[Mat3], h: f64) -> RescaledField {
    let cells = cells
        .iter()
        .map(|f| {
            let mut out = *f;
            for i in 0..3 {
                out[(i, 1)] = f[(i, 1)] / h;
                out[(i, 2)] = f[(i, 2)] / h;
            }
            out
        })
        .collect();
    RescaledField { h, cells }
}

pub fn rescale(f: &StrainField, h: f64) -> Result<RescaledField> {
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return Err(Error::Field(format!("rescaling factor h = {h} must lie in (0, 1]")));
    }
    Ok(rescale_cells(&f.cells, h))
}

fn check_conformal(thin: &Grid, reference: &Grid, h: f64) -> Result<()> {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
    let ok = thin.cross_section().shape == reference.cross_section().shape
        && close(thin.cross_section().half_extent, h * reference.cross_section().half_extent)
        && close(thin.spacing(), h * reference.spacing())
        && thin.axial_spacing() == reference.axial_spacing()
        && thin.axial_half_length() == reference.axial_half_length()
        && thin.same_layout(reference);
    if ok {
        Ok(())
    } else {
        Err(Error::Field(format!(
            "grids {} and {} are not related by the scaling h = {h}",
            thin.hash(),
            reference.hash()
        )))
    }
}

/// Pull a field on the thin domain back to the reference cross-section:
/// `z₁ = x₁, z′ = h x′`. Nodal values are carried over unchanged.
pub fn change_of_variables(u: &DisplacementField, reference: Arc<Grid>, h: f64) -> Result<DisplacementField> {
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return Err(Error::Field(format!("h = {h} must lie in (0, 1]")));
    }
    check_conformal(&u.grid, &reference, h)?;
    Ok(DisplacementField {
        grid: reference,
        values: u.values.clone(),
        jumps: u.jumps.clone(),
        stretch: u.stretch * h,
    })
}

/// Inverse of [`change_of_variables`].
pub fn inverse_change_of_variables(v: &DisplacementField, thin: Arc<Grid>, h: f64) -> Result<DisplacementField> {
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return Err(Error::Field(format!("h = {h} must lie in (0, 1]")));
    }
    check_conformal(&thin, &v.grid, h)?;
    Ok(DisplacementField {
        grid: thin,
        values: v.values.clone(),
        jumps: v.jumps.clone(),
        stretch: v.stretch / h,
    })
}
