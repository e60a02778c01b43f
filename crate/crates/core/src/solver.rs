//! Energy assembly and constrained minimization over nodal fields.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{cell_jump, corner_values, DisplacementField, Stencil};
use crate::geometry::Grid;
use crate::linalg::{Mat3, Vec3};
use crate::material::{density_and_gradient, ElasticModel, Phase};

/// Affine end slabs: `G = P` on the first `slab_depth` cell layers, `G = Q`
/// on the last. The left slab passes through the origin; the right slab
/// carries a free translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndClamp {
    pub left: Mat3,
    pub right: Mat3,
    pub slab_depth: usize,
}

impl EndClamp {
    pub fn new(left: Mat3, right: Mat3, slab_depth: usize) -> Result<Self> {
        if slab_depth == 0 {
            return Err(Error::Grid("slab depth must be at least one cell layer".into()));
        }
        if !left.iter().chain(right.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("clamp matrix".into()));
        }
        Ok(Self { left, right, slab_depth })
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if self.slab_depth == 0 || self.slab_depth >= grid.interface_layer() {
            return Err(Error::Grid(format!(
                "slab depth {} must lie in [1, {})",
                self.slab_depth,
                grid.interface_layer()
            )));
        }
        Ok(())
    }

    fn is_left(&self, grid: &Grid, node: usize) -> bool {
        grid.node_ijk(node)[0] <= self.slab_depth
    }

    fn is_right(&self, grid: &Grid, node: usize) -> bool {
        grid.node_ijk(node)[0] >= grid.cells_per_axis()[0] - self.slab_depth
    }

    /// `(M − I) S x`, the slab displacement without translation; the
    /// physical gradient `F_h` of the slab is then `M`.
    fn affine_part(m: &Mat3, stretch: f64, x: Vec3) -> Vec3 {
        (m - Mat3::identity()) * Vec3::new(x.x, stretch * x.y, stretch * x.z)
    }

    /// Target displacement of a left-slab node.
    pub fn left_value(&self, stretch: f64, x: Vec3) -> Vec3 {
        Self::affine_part(&self.left, stretch, x)
    }

    /// Target displacement of a right-slab node for translation `c`.
    pub fn right_value(&self, stretch: f64, x: Vec3, c: Vec3) -> Vec3 {
        Self::affine_part(&self.right, stretch, x) + c
    }

    /// Overwrite slab nodes with their targets.
    pub fn apply(&self, u: &mut DisplacementField, c: Vec3) {
        let grid = u.grid().clone();
        let s = u.stretch();
        for node in 0..grid.node_count() {
            let x = grid.node_position(node);
            if self.is_left(&grid, node) {
                u.values[node] = self.left_value(s, x);
            } else if self.is_right(&grid, node) {
                u.values[node] = self.right_value(s, x, c);
            }
        }
    }

    /// Translation of the right slab read off a field (mean residual).
    pub fn infer_translation(&self, u: &DisplacementField) -> Vec3 {
        let grid = u.grid();
        let s = u.stretch();
        let mut sum = Vec3::zeros();
        let mut count = 0.0;
        for node in 0..grid.node_count() {
            if grid.is_active(node) && self.is_right(grid, node) {
                sum += u.values[node] - Self::affine_part(&self.right, s, grid.node_position(node));
                count += 1.0;
            }
        }
        if count > 0.0 {
            sum / count
        } else {
            sum
        }
    }

    /// Whether every active slab node equals its target bit for bit.
    pub fn holds(&self, u: &DisplacementField, c: Vec3) -> bool {
        let grid = u.grid();
        let s = u.stretch();
        (0..grid.node_count()).filter(|&n| grid.is_active(n)).all(|node| {
            let x = grid.node_position(node);
            if self.is_left(grid, node) {
                u.values[node] == self.left_value(s, x)
            } else if self.is_right(grid, node) {
                u.values[node] == self.right_value(s, x, c)
            } else {
                true
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stopping threshold on the scaled residual `‖∇E‖∞ · a / (cell weight)`,
    /// which has the units of the density gradient.
    pub grad_tol: f64,
    pub max_iter: usize,
    pub backtrack: f64,
    pub armijo: f64,
    /// L-BFGS memory; 0 gives steepest descent.
    pub memory: usize,
    pub seed: u64,
    /// Perturbation restarts after the first run.
    pub restarts: usize,
    /// Restart perturbation amplitude in units of the smallest spacing.
    pub perturbation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iter: 50_000,
            backtrack: 0.5,
            armijo: 1e-4,
            memory: 12,
            seed: 0,
            restarts: 3,
            perturbation: 0.05,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Experiment(msg));
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad(format!("grad_tol = {} must be positive", self.grad_tol));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!("backtrack = {} must lie in (0, 1)", self.backtrack));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad(format!("armijo = {} must lie in (0, 1)", self.armijo));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return bad(format!("perturbation = {} must be non-negative", self.perturbation));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchStalled,
    Stagnated,
}

#[derive(Clone, Debug)]
pub struct MinimizationResult {
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub field: DisplacementField,
    pub converged: bool,
    pub stop: StopReason,
    pub right_translation: Vec3,
    pub history: Vec<f64>,
}

#[derive(Clone, Copy)]
struct CellInfo {
    nodes: [usize; 8],
    phase: Phase,
    jump: Option<Vec3>,
}

const CHUNK: usize = 256;

/// Precomputed cell data for repeated energy evaluations on one grid.
pub struct Assembler {
    grid: Arc<Grid>,
    stencil: Stencil,
    stretch: f64,
    weight: f64,
    cells: Vec<CellInfo>,
}

impl Assembler {
    pub fn new(u: &DisplacementField) -> Self {
        let grid = u.grid().clone();
        let cells = grid
            .masked_cells()
            .iter()
            .map(|&c| CellInfo {
                nodes: grid.cell_nodes(c),
                phase: grid.cell_phase(c),
                jump: cell_jump(&grid, &u.jumps, c),
            })
            .collect();
        let stretch = u.stretch();
        Self {
            stencil: Stencil::new(&grid),
            weight: grid.cell_volume() / stretch,
            stretch,
            grid,
            cells,
        }
    }

    #[inline]
    fn cell_strain(&self, cell: &CellInfo, values: &[Vec3]) -> Mat3 {
        let v = corner_values(&cell.nodes, values, cell.jump);
        let mut f = self.stencil.gradient(&v, self.stretch);
        if self.stretch != 1.0 {
            for i in 0..3 {
                f[(i, 1)] /= self.stretch;
                f[(i, 2)] /= self.stretch;
            }
        }
        f
    }

    /// Per-cell energies `weight · W(F_h)` in slot order.
    pub fn cell_energies(&self, values: &[Vec3], model: &ElasticModel) -> Vec<f64> {
        self.cells
            .par_iter()
            .map(|cell| {
                let f = self.cell_strain(cell, values);
                self.weight * density_and_gradient(cell.phase, &f, model).value
            })
            .collect()
    }

    pub fn energy(&self, values: &[Vec3], model: &ElasticModel) -> f64 {
        let partial: Vec<f64> = self
            .cells
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut s = 0.0;
                for cell in chunk {
                    let f = self.cell_strain(cell, values);
                    s += density_and_gradient(cell.phase, &f, model).value;
                }
                s
            })
            .collect();
        self.weight * partial.iter().sum::<f64>()
    }

    /// Energy and nodal gradient; `grad` is overwritten.
    pub fn energy_and_gradient(&self, values: &[Vec3], model: &ElasticModel, grad: &mut [Vec3]) -> f64 {
        let inv_s = 1.0 / self.stretch;
        let partial: Vec<(f64, Vec<[Vec3; 8]>)> = self
            .cells
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut s = 0.0;
                let mut contrib = Vec::with_capacity(chunk.len());
                for cell in chunk {
                    let f = self.cell_strain(cell, values);
                    let eval = density_and_gradient(cell.phase, &f, model);
                    s += eval.value;
                    let mut dg = eval.gradient * self.weight;
                    if self.stretch != 1.0 {
                        for i in 0..3 {
                            dg[(i, 1)] *= inv_s;
                            dg[(i, 2)] *= inv_s;
                        }
                    }
                    let mut local = [Vec3::zeros(); 8];
                    for (o, slot) in local.iter_mut().enumerate() {
                        *slot = dg * self.stencil.shape_gradient(o);
                    }
                    contrib.push(local);
                }
                (s, contrib)
            })
            .collect();
        grad.iter_mut().for_each(|g| *g = Vec3::zeros());
        let mut energy = 0.0;
        let mut k = 0;
        for (s, contrib) in &partial {
            energy += s;
            for local in contrib {
                for (o, node) in self.cells[k].nodes.iter().enumerate() {
                    grad[*node] += local[o];
                }
                k += 1;
            }
        }
        self.weight * energy
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Normalization turning nodal gradients into density-gradient units.
    fn residual_scale(&self) -> f64 {
        self.grid.axial_spacing().min(self.grid.spacing()) / self.weight
    }
}

/// One-point quadrature of the stored energy (rescaled by `1/s` for
/// stretched fields).
pub fn total_energy(u: &DisplacementField, model: &ElasticModel) -> f64 {
    Assembler::new(u).energy(&u.values, model)
}

/// Exact gradient of [`total_energy`]; entries of clamped and inactive nodes
/// are zero.
pub fn total_gradient(u: &DisplacementField, model: &ElasticModel, clamp: Option<&EndClamp>) -> Vec<Vec3> {
    let asm = Assembler::new(u);
    let mut grad = vec![Vec3::zeros(); u.values.len()];
    asm.energy_and_gradient(&u.values, model, &mut grad);
    if let Some(clamp) = clamp {
        let grid = u.grid();
        for (node, g) in grad.iter_mut().enumerate() {
            if clamp.is_left(grid, node) || clamp.is_right(grid, node) {
                *g = Vec3::zeros();
            }
        }
    }
    grad
}

struct Problem<'a> {
    asm: Assembler,
    model: &'a ElasticModel,
    free: Vec<usize>,
    right: Vec<usize>,
    right_base: Vec<Vec3>,
    values: Vec<Vec3>,
    grad: Vec<Vec3>,
}

impl<'a> Problem<'a> {
    fn new(u0: &DisplacementField, clamp: &EndClamp, model: &'a ElasticModel) -> Result<(Self, Vec<f64>)> {
        let grid = u0.grid().clone();
        clamp.validate(&grid)?;
        let s = u0.stretch();
        let c0 = clamp.infer_translation(u0);
        let mut values = u0.values.clone();
        let mut free = Vec::new();
        let mut right = Vec::new();
        let mut right_base = Vec::new();
        for node in 0..grid.node_count() {
            let x = grid.node_position(node);
            if clamp.is_left(&grid, node) {
                values[node] = clamp.left_value(s, x);
            } else if clamp.is_right(&grid, node) {
                values[node] = clamp.right_value(s, x, c0);
                if grid.is_active(node) {
                    right.push(node);
                    right_base.push(x);
                }
            } else if grid.is_active(node) {
                free.push(node);
            }
        }
        let mut z = Vec::with_capacity(3 * free.len() + 3);
        for &n in &free {
            z.extend_from_slice(values[n].as_slice());
        }
        z.extend_from_slice(c0.as_slice());
        let n = values.len();
        Ok((
            Self {
                asm: Assembler::new(u0),
                model,
                free,
                right,
                right_base,
                values,
                grad: vec![Vec3::zeros(); n],
            },
            z,
        ))
    }

    fn translation(z: &[f64]) -> Vec3 {
        let k = z.len() - 3;
        Vec3::new(z[k], z[k + 1], z[k + 2])
    }

    fn load(&mut self, z: &[f64], clamp: &EndClamp) {
        for (k, &n) in self.free.iter().enumerate() {
            self.values[n] = Vec3::new(z[3 * k], z[3 * k + 1], z[3 * k + 2]);
        }
        let c = Self::translation(z);
        let s = self.asm.stretch;
        for (k, &n) in self.right.iter().enumerate() {
            self.values[n] = clamp.right_value(s, self.right_base[k], c);
        }
    }

    fn energy(&mut self, z: &[f64], clamp: &EndClamp) -> f64 {
        self.load(z, clamp);
        self.asm.energy(&self.values, self.model)
    }

    fn energy_and_gradient(&mut self, z: &[f64], clamp: &EndClamp, g: &mut [f64]) -> f64 {
        self.load(z, clamp);
        let e = self.asm.energy_and_gradient(&self.values, self.model, &mut self.grad);
        for (k, &n) in self.free.iter().enumerate() {
            g[3 * k..3 * k + 3].copy_from_slice(self.grad[n].as_slice());
        }
        let mut gc = Vec3::zeros();
        for &n in &self.right {
            gc += self.grad[n];
        }
        let k = g.len() - 3;
        g[k..].copy_from_slice(gc.as_slice());
        e
    }

    fn residual(&self, g: &[f64]) -> f64 {
        let k = g.len() - 3;
        let free = g[..k].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let nr = self.right.len().max(1) as f64;
        let c = g[k..].iter().fold(0.0f64, |m, x| m.max(x.abs())) / nr;
        free.max(c) * self.asm.residual_scale()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimize the stored energy over fields satisfying `clamp`, starting from
/// `u0` (slab nodes are reset to their targets, the right translation taken
/// from `u0`). L-BFGS with Armijo backtracking.
pub fn minimize(
    u0: &DisplacementField,
    clamp: &EndClamp,
    cfg: &SolverConfig,
    model: &ElasticModel,
) -> Result<MinimizationResult> {
    cfg.validate()?;
    if cfg.max_iter == 0 {
        let energy = total_energy(u0, model);
        return Ok(MinimizationResult {
            energy,
            iterations: 0,
            grad_norm: f64::NAN,
            field: u0.clone(),
            converged: false,
            stop: StopReason::MaxIterations,
            right_translation: clamp.infer_translation(u0),
            history: vec![energy],
        });
    }
    let (mut prob, mut z) = Problem::new(u0, clamp, model)?;
    let dim = z.len();
    let a_min = prob.asm.grid.axial_spacing().min(prob.asm.grid.spacing());
    let mut g = vec![0.0; dim];
    let mut f = prob.energy_and_gradient(&z, clamp, &mut g);
    if !f.is_finite() {
        return Err(Error::SolverAbort { iteration: 0, reason: format!("initial energy is {f}") });
    }
    let mut history = vec![f];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut residual = prob.residual(&g);
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    let mut d = vec![0.0; dim];
    let mut z_new = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];
    let mut alpha = vec![0.0; cfg.memory];
    let mut stagnant = 0usize;

    while iterations < cfg.max_iter {
        if residual <= cfg.grad_tol {
            stop = StopReason::Converged;
            break;
        }
        // two-loop recursion
        d.copy_from_slice(&g);
        let m = s_hist.len();
        for i in (0..m).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &d);
            for (dk, yk) in d.iter_mut().zip(&y_hist[i]) {
                *dk -= alpha[i] * yk;
            }
        }
        let quasi_newton = m > 0;
        if quasi_newton {
            let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
            d.iter_mut().for_each(|x| *x *= gamma);
            for i in 0..m {
                let beta = rho_hist[i] * dot(&y_hist[i], &d);
                for (dk, sk) in d.iter_mut().zip(&s_hist[i]) {
                    *dk += (alpha[i] - beta) * sk;
                }
            }
        } else {
            // first step moves nodes by at most 1% of a cell
            let scale = 0.01 * a_min / inf_norm(&g).max(f64::MIN_POSITIVE);
            d.iter_mut().for_each(|x| *x *= scale);
        }
        d.iter_mut().for_each(|x| *x = -*x);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            // not a descent direction: fall back to scaled steepest descent
            let scale = 0.01 * a_min / inf_norm(&g).max(f64::MIN_POSITIVE);
            for (dk, gk) in d.iter_mut().zip(&g) {
                *dk = -gk * scale;
            }
            slope = dot(&g, &d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        let mut t = 1.0;
        let mut accepted = None;
        let mut saw_finite = false;
        for _ in 0..60 {
            for k in 0..dim {
                z_new[k] = z[k] + t * d[k];
            }
            let f_try = prob.energy(&z_new, clamp);
            if f_try.is_finite() {
                saw_finite = true;
                if f_try <= f + cfg.armijo * t * slope {
                    accepted = Some(f_try);
                    break;
                }
            }
            t *= cfg.backtrack;
        }
        let Some(_) = accepted else {
            if !saw_finite {
                return Err(Error::SolverAbort {
                    iteration: iterations,
                    reason: "non-finite energy along the whole line search (field blow-up)".into(),
                });
            }
            if quasi_newton {
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            stop = StopReason::LineSearchStalled;
            break;
        };
        let f_new = prob.energy_and_gradient(&z_new, clamp, &mut g_new);
        iterations += 1;
        if cfg.memory > 0 {
            let s: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                if s_hist.len() == cfg.memory {
                    s_hist.remove(0);
                    y_hist.remove(0);
                    rho_hist.remove(0);
                }
                rho_hist.push(1.0 / sy);
                s_hist.push(s);
                y_hist.push(y);
            }
        }
        std::mem::swap(&mut z, &mut z_new);
        std::mem::swap(&mut g, &mut g_new);
        if f - f_new <= 1e-14 * f.abs().max(f64::MIN_POSITIVE) {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        f = f_new;
        history.push(f);
        residual = prob.residual(&g);
        log::trace!(target: "rodlab::solver", "iter={iterations} energy={f:.15e} residual={residual:.6e}");
        if iterations % 500 == 0 {
            log::debug!(target: "rodlab::solver", "iter={iterations} energy={f:.15e} residual={residual:.6e}");
        }
        if stagnant >= 50 {
            stop = StopReason::Stagnated;
            break;
        }
    }
    if residual <= cfg.grad_tol {
        stop = StopReason::Converged;
    }
    prob.load(&z, clamp);
    let c = Problem::translation(&z);
    let mut field = u0.clone();
    field.values = prob.values.clone();
    clamp.apply(&mut field, c);
    log::debug!(
        target: "rodlab::solver",
        "done iterations={iterations} energy={f:.15e} residual={residual:.6e} stop={stop:?}"
    );
    Ok(MinimizationResult {
        energy: f,
        iterations,
        grad_norm: residual,
        field,
        converged: stop == StopReason::Converged,
        stop,
        right_translation: c,
        history,
    })
}

/// Result of a seeded multistart.
#[derive(Clone, Debug)]
pub struct MultiStart {
    pub best: MinimizationResult,
    /// Final energy of every run, the unperturbed one first.
    pub energies: Vec<f64>,
}

/// Run [`minimize`] from `u0`, then `cfg.restarts` more times from seeded
/// random perturbations of the best field so far, keeping the lowest energy.
pub fn minimize_multistart(
    u0: &DisplacementField,
    clamp: &EndClamp,
    cfg: &SolverConfig,
    model: &ElasticModel,
) -> Result<MultiStart> {
    let mut best = minimize(u0, clamp, cfg, model)?;
    let mut energies = vec![best.energy];
    let grid = u0.grid().clone();
    let amplitude = cfg.perturbation * grid.axial_spacing().min(grid.spacing());
    for k in 1..=cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        let mut start = best.field.clone();
        for (node, v) in start.values.iter_mut().enumerate() {
            let noise = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if grid.is_active(node) {
                *v += noise * amplitude;
            }
        }
        clamp.apply(&mut start, best.right_translation);
        let run = minimize(&start, clamp, cfg, model)?;
        energies.push(run.energy);
        if run.energy < best.energy {
            best = run;
        }
    }
    Ok(MultiStart { best, energies })
}
