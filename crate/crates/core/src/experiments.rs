//! Transition-cost estimates, the r-sweep comparing elastic and dislocated
//! transitions, rotation invariance and the thin-rod trend.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constructions::{
    glued_quadrant_field, mismatch_ramp, recovery_sequence, restrict_field, rotated, square_grid, GlueEnergy,
    QuadrantGlueSpec, RampSpec, RecoveryEnergy, RecoverySpec, TransitionBlock,
};
use crate::error::{Error, Result};
use crate::fields::{strain, DisplacementField, JumpSet};
use crate::geometry::{burgers_circuit, rasterize_dislocation, CellLoop, CrossSection, Grid, Shape};
use crate::linalg::{Mat3, Vec3};
use crate::material::ElasticModel;
use crate::solver::{minimize, minimize_multistart, EndClamp, MinimizationResult, SolverConfig, StopReason};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Elastic,
    Dislocated,
}

/// Upper bound for a transition cost together with how it was obtained.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub kind: EstimateKind,
    pub cross_section: CrossSection,
    pub r: f64,
    pub m: f64,
    pub spacing: f64,
    pub dislocation_id: Option<String>,
    /// Minimum of the restart energies.
    pub energy: f64,
    pub restart_energies: Vec<f64>,
    /// Energy of the starting field (ramp or construction).
    pub initial_energy: f64,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    pub grad_norm: f64,
    /// `(E_M, E_2M, E_4M)` when requested.
    pub m_sensitivity: Option<[f64; 3]>,
    pub right_translation: [f64; 3],
    #[serde(skip)]
    pub field: Option<DisplacementField>,
}

impl GammaEstimate {
    fn from_run(
        kind: EstimateKind,
        grid: &Grid,
        dislocation_id: Option<String>,
        initial_energy: f64,
        best: MinimizationResult,
        energies: Vec<f64>,
    ) -> Self {
        let cs = grid.cross_section();
        let c = best.right_translation;
        Self {
            kind,
            cross_section: cs,
            r: cs.half_extent,
            m: grid.axial_half_length(),
            spacing: grid.spacing(),
            dislocation_id,
            energy: best.energy,
            restart_energies: energies,
            initial_energy,
            converged: best.converged,
            stop: best.stop,
            iterations: best.iterations,
            grad_norm: best.grad_norm,
            m_sensitivity: None,
            right_translation: [c.x, c.y, c.z],
            field: Some(best.field),
        }
    }

    /// Whether the estimate exceeds `factor` times the solver tolerance
    /// measured in energy units (`grad_tol` times the domain volume).
    pub fn resolved_positive(&self, cfg: &SolverConfig, factor: f64) -> bool {
        let volume = self.cross_section.area() * 2.0 * self.m;
        self.energy > factor * cfg.grad_tol * volume
    }
}

fn clamp_for(model: &ElasticModel, left: &Mat3) -> Result<EndClamp> {
    EndClamp::new(*left, left * model.h(), 1)
}

/// Ramp width that fits `(−M, M)` with one slab to spare.
fn ramp_for(grid: &Grid) -> RampSpec {
    let r = grid.cross_section().half_extent;
    let room = 2.0 * (grid.axial_half_length() - grid.axial_spacing());
    RampSpec { r: r.min(room) }
}

fn run(u0: &DisplacementField, clamp: &EndClamp, cfg: &SolverConfig, model: &ElasticModel) -> Result<(MinimizationResult, Vec<f64>)> {
    let ms = minimize_multistart(u0, clamp, cfg, model)?;
    if !ms.best.converged {
        log::warn!(
            "no restart reached the tolerance (best residual {:.3e}, stop {:?})",
            ms.best.grad_norm,
            ms.best.stop
        );
    }
    Ok((ms.best, ms.energies))
}

/// Extend a clamped field to a longer grid with the same section and
/// spacings by continuing the end slabs affinely.
pub fn extend_axially(u: &DisplacementField, clamp: &EndClamp, c: Vec3, target: Arc<Grid>) -> Result<DisplacementField> {
    let src = u.grid();
    if src.cross_section() != target.cross_section()
        || src.spacing() != target.spacing()
        || src.axial_spacing() != target.axial_spacing()
    {
        return Err(Error::Experiment("axial extension needs the same section and spacings".into()));
    }
    let (ns, nt) = (src.cells_per_axis()[0], target.cells_per_axis()[0]);
    if nt < ns || (nt - ns) % 2 != 0 {
        return Err(Error::Experiment(format!("cannot extend {ns} axial cells to {nt}")));
    }
    let off = (nt - ns) / 2;
    let s = u.stretch();
    let values = (0..target.node_count())
        .map(|node| {
            let [i1, i2, i3] = target.node_ijk(node);
            let x = target.node_position(node);
            if i1 < off {
                clamp.left_value(s, x)
            } else if i1 > off + ns {
                clamp.right_value(s, x, c)
            } else {
                u.values[src.node_index(i1 - off, i2, i3)]
            }
        })
        .collect();
    // jump faces are indexed transversally and carry over unchanged
    DisplacementField::from_values(target, values, u.jumps.clone(), s)
}

/// Minimized transition between `SO(3)` and `SO(3)H` without dislocations,
/// started from the ramp. With `sensitivity` the minimizer is extended to
/// half lengths `2M` and `4M` and minimized again.
pub fn gamma_elastic(
    cs: CrossSection,
    m: f64,
    a: f64,
    model: &ElasticModel,
    cfg: &SolverConfig,
    sensitivity: bool,
) -> Result<GammaEstimate> {
    gamma_elastic_rotated(cs, m, a, model, cfg, &Mat3::identity(), sensitivity)
}

/// [`gamma_elastic`] with clamps `(R, R H)` and the rotated ramp as start.
pub fn gamma_elastic_rotated(
    cs: CrossSection,
    m: f64,
    a: f64,
    model: &ElasticModel,
    cfg: &SolverConfig,
    rot: &Mat3,
    sensitivity: bool,
) -> Result<GammaEstimate> {
    let grid = Arc::new(Grid::build(cs, m, a)?);
    let clamp = clamp_for(model, rot)?;
    let (ramp, _) = mismatch_ramp(&ramp_for(&grid), grid.clone(), model)?;
    let u0 = if *rot == Mat3::identity() { ramp } else { rotated(&ramp, rot) };
    let initial = crate::solver::total_energy(&u0, model);
    let (best, energies) = run(&u0, &clamp, cfg, model)?;
    let mut est = GammaEstimate::from_run(EstimateKind::Elastic, &grid, None, initial, best, energies);
    if sensitivity {
        let mut triple = [est.energy, 0.0, 0.0];
        let mut field = est.field.clone().unwrap();
        let mut c = Vec3::from(est.right_translation);
        for (k, factor) in [2.0, 4.0].into_iter().enumerate() {
            let longer = Arc::new(Grid::build(cs, factor * m, a)?);
            let start = extend_axially(&field, &clamp, c, longer)?;
            let res = minimize(&start, &clamp, cfg, model)?;
            triple[k + 1] = res.energy;
            c = res.right_translation;
            field = res.field;
        }
        est.m_sensitivity = Some(triple);
    }
    Ok(est)
}

/// Prescribed jump surfaces for a dislocated estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DislocationInput {
    /// One polygonal loop with jump `scale · direction` across its interior.
    Polygon { curve: Vec<[f64; 2]>, direction: [f64; 3], scale: f64 },
    /// Tiles glued from a square base transition; `mu` is the sector width.
    Glue { mu: f64, tiles_per_side: usize },
}

/// Dislocated estimate together with the energy of the construction that
/// seeded it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DislocatedEstimate {
    pub estimate: GammaEstimate,
    /// Energy of the starting field on the estimate's section.
    pub construction_energy: f64,
    /// Itemized energy of the glued field on the square (glue input only).
    pub glue: Option<GlueEnergy>,
    /// Base square transition energy (glue input only).
    pub base_energy: Option<f64>,
    pub circuits_checked: usize,
}

/// Minimized transition over fields with prescribed jump surfaces. Glue
/// inputs start from the glued-quadrant field (restricted to the disk when
/// the section is a disk); polygon inputs start from the ramp. Burgers
/// circuits are re-verified on the final field.
pub fn gamma_dislocated(
    cs: CrossSection,
    m: f64,
    a: f64,
    input: &DislocationInput,
    model: &ElasticModel,
    cfg: &SolverConfig,
) -> Result<DislocatedEstimate> {
    let grid = Arc::new(Grid::build(cs, m, a)?);
    let clamp = clamp_for(model, &Mat3::identity())?;
    let r = cs.half_extent;
    let (u0, c0, glue, base_energy) = match input {
        DislocationInput::Polygon { curve, direction, scale } => {
            let dir = Vec3::from(*direction);
            let spec = rasterize_dislocation(curve, &grid, dir, *scale)?;
            let jumps = JumpSet::from_spec(&grid, &spec)?;
            let (ramp, _) = mismatch_ramp(&ramp_for(&grid), grid.clone(), model)?;
            let u0 = ramp.with_jumps(jumps);
            let c = clamp.infer_translation(&u0);
            (u0, c, None, None)
        }
        DislocationInput::Glue { mu, tiles_per_side } => {
            let spec = QuadrantGlueSpec { r, mu: *mu, m, tiles_per_side: *tiles_per_side };
            spec.validate(a)?;
            let base_grid = square_grid(spec.base_half_side(), m, a)?;
            let (ramp, _) = mismatch_ramp(&ramp_for(&base_grid), base_grid.clone(), model)?;
            let (base, _) = run(&ramp, &clamp, cfg, model)?;
            let square = square_grid(r, m, a)?;
            let glued = glued_quadrant_field(&spec, &base.field, base.right_translation, square, model)?;
            let u0 = match cs.shape {
                Shape::Square => glued.field.clone(),
                Shape::Disk => restrict_field(&glued.field, grid.clone())?,
            };
            (u0, glued.right_translation, Some(glued.energy), Some(base.energy))
        }
    };
    let mut start = u0;
    clamp.apply(&mut start, c0);
    let construction_energy = crate::solver::total_energy(&start, model);
    let (best, energies) = run(&start, &clamp, cfg, model)?;
    let circuits_checked = verify_circuits(&best.field)?;
    let id = best.field.jumps.id();
    let estimate = GammaEstimate::from_run(EstimateKind::Dislocated, &grid, Some(id), construction_energy, best, energies);
    Ok(DislocatedEstimate { estimate, construction_energy, glue, base_energy, circuits_checked })
}

/// Check circuits around the interface on every transverse row: each
/// rectangle through layers `i₀−2 … i₀+1` between the first masked column
/// and another column must give minus the difference of the two jumps.
/// Returns the number of loops checked.
pub fn verify_circuits(u: &DisplacementField) -> Result<usize> {
    let grid = u.grid();
    let f = strain(u);
    let layer = grid.interface_layer();
    if layer < 2 || layer + 1 >= grid.cells_per_axis()[0] {
        return Err(Error::Circulation("grid too short for interface loops".into()));
    }
    let n = grid.transverse_cells();
    let mut checked = 0;
    for k in [2usize, 3] {
        for fixed in 0..n {
            let cols: Vec<usize> = (0..n)
                .filter(|&c| if k == 2 { grid.face_masked(c, fixed) } else { grid.face_masked(fixed, c) })
                .collect();
            let Some(&first) = cols.first() else { continue };
            let jump = |c: usize| if k == 2 { u.jumps.get(c, fixed) } else { u.jumps.get(fixed, c) };
            for &other in &cols[1..] {
                let lp = CellLoop::axial_rectangle(k, (layer - 2, layer + 1), (first, other), fixed);
                let got = burgers_circuit(&f, &lp)?;
                let expected = -(jump(first) - jump(other));
                if (got - expected).norm() > 1e-10 {
                    return Err(Error::Circulation(format!(
                        "loop in x{k} row {fixed} between columns {first} and {other}: {got:?} vs {expected:?}"
                    )));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub spacing: f64,
    pub half_length: f64,
    pub elastic: f64,
    pub elastic_per_r3: f64,
    pub dislocated: f64,
    pub dislocated_per_r3: f64,
    pub glued_construction: f64,
}

impl SweepRow {
    pub const COLUMNS: [&'static str; 8] = [
        "r",
        "spacing",
        "half_length",
        "elastic",
        "elastic_per_r3",
        "dislocated",
        "dislocated_per_r3",
        "glued_construction",
    ];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSettings {
    pub r_list: Vec<f64>,
    pub cells_per_radius: usize,
    /// Half length as a multiple of `r`.
    pub m_factor: f64,
    /// Glue sector width in cells (`μ = mu_cells · a`).
    pub mu_cells: usize,
    /// Tilings tried for the dislocated column; the lowest energy is kept.
    pub tiles: Vec<usize>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { r_list: vec![1.0, 2.0, 4.0, 8.0], cells_per_radius: 16, m_factor: 1.0, mu_cells: 2, tiles: vec![2] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Smallest radius where the dislocated cost per `r³` is below the
    /// elastic one.
    pub crossover: Option<f64>,
    /// Elastic cost per `r³` at the smallest radius.
    pub elastic_reference: f64,
    /// Largest relative deviation of the elastic column per `r³` from its mean.
    pub elastic_spread: f64,
}

/// Elastic and dislocated transition costs on disks of increasing radius at
/// a fixed number of cells per radius.
pub fn crossover_sweep(settings: &SweepSettings, model: &ElasticModel, cfg: &SolverConfig) -> Result<SweepTable> {
    let rs = &settings.r_list;
    if rs.len() < 4 || rs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Experiment("r_list must be increasing with at least four entries".into()));
    }
    if settings.tiles.is_empty() {
        return Err(Error::Experiment("at least one tiling is needed".into()));
    }
    let mut rows = Vec::with_capacity(rs.len());
    for &r in rs {
        let a = r / settings.cells_per_radius as f64;
        let m = settings.m_factor * r;
        let cs = CrossSection::disk(r);
        let elastic = gamma_elastic(cs, m, a, model, cfg, false)?;
        let mut best: Option<DislocatedEstimate> = None;
        for &n in &settings.tiles {
            let input = DislocationInput::Glue { mu: settings.mu_cells as f64 * a, tiles_per_side: n };
            let d = gamma_dislocated(cs, m, a, &input, model, cfg)?;
            if best.as_ref().is_none_or(|b| d.estimate.energy < b.estimate.energy) {
                best = Some(d);
            }
        }
        let best = best.unwrap();
        let r3 = r * r * r;
        log::info!(
            "r = {r}: elastic {:.6e}, dislocated {:.6e}",
            elastic.energy,
            best.estimate.energy
        );
        rows.push(SweepRow {
            r,
            spacing: a,
            half_length: m,
            elastic: elastic.energy,
            elastic_per_r3: elastic.energy / r3,
            dislocated: best.estimate.energy,
            dislocated_per_r3: best.estimate.energy / r3,
            glued_construction: best.construction_energy,
        });
    }
    let crossover = rows.iter().find(|row| row.dislocated_per_r3 < row.elastic_per_r3).map(|row| row.r);
    let mean = rows.iter().map(|row| row.elastic_per_r3).sum::<f64>() / rows.len() as f64;
    let elastic_spread = if mean > 0.0 {
        rows.iter().map(|row| (row.elastic_per_r3 / mean - 1.0).abs()).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(SweepTable { elastic_reference: rows[0].elastic_per_r3, rows, crossover, elastic_spread })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotationInvariance {
    pub reference: f64,
    pub energies: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// Compare the estimate with clamps `(R, R H)` against `(I, H)`.
pub fn rotation_invariance_check(
    rotations: &[Mat3],
    cs: CrossSection,
    m: f64,
    a: f64,
    model: &ElasticModel,
    cfg: &SolverConfig,
) -> Result<RotationInvariance> {
    for r in rotations {
        if (r.transpose() * r - Mat3::identity()).norm() > 1e-10 || r.determinant() <= 0.0 {
            return Err(Error::Experiment("rotation samples must be proper rotations".into()));
        }
    }
    let reference = gamma_elastic(cs, m, a, model, cfg, false)?.energy;
    let mut energies = Vec::with_capacity(rotations.len());
    for r in rotations {
        energies.push(gamma_elastic_rotated(cs, m, a, model, cfg, r, false)?.energy);
    }
    let deviations: Vec<f64> = energies
        .iter()
        .map(|e| if reference > 0.0 { (e - reference).abs() / reference } else { e.abs() })
        .collect();
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(RotationInvariance { reference, energies, deviations, max_deviation })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendRow {
    pub h: f64,
    pub sigma: f64,
    pub recovery: f64,
    pub breakdown: RecoveryEnergy,
    pub minimized: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendTable {
    /// Standalone transition estimate used as the interface block.
    pub gamma: f64,
    pub rows: Vec<TrendRow>,
}

/// Profile shared by every `h` of the trend: break points and rotations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendProfile {
    pub half_length: f64,
    pub left_breaks: Vec<f64>,
    pub left_rotations: Vec<Mat3>,
    pub right_breaks: Vec<f64>,
    pub right_rotations: Vec<Mat3>,
}

/// Rescaled energies of recovery fields at decreasing `h` with `σ_h = √h`;
/// with `minimize_cfg` each field is also used as a start for the solver.
pub fn gamma_convergence_trend(
    h_list: &[f64],
    profile: &TrendProfile,
    block: &TransitionBlock,
    model: &ElasticModel,
    minimize_cfg: Option<&SolverConfig>,
) -> Result<TrendTable> {
    if h_list.is_empty() || h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Experiment("h_list must be decreasing".into()));
    }
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let spec = RecoverySpec {
            h,
            sigma: h.sqrt(),
            half_length: profile.half_length,
            left_breaks: profile.left_breaks.clone(),
            left_rotations: profile.left_rotations.clone(),
            right_breaks: profile.right_breaks.clone(),
            right_rotations: profile.right_rotations.clone(),
        };
        let rec = recovery_sequence(&spec, block, model)?;
        let minimized = match minimize_cfg {
            Some(cfg) => {
                let clamp = EndClamp::new(profile.left_rotations[0], profile.right_rotations.last().unwrap() * model.h(), 1)?;
                Some(minimize(&rec.field, &clamp, cfg, model)?.energy)
            }
            None => None,
        };
        rows.push(TrendRow { h, sigma: spec.sigma, recovery: rec.energy.total, breakdown: rec.energy, minimized });
    }
    Ok(TrendTable { gamma: block.energy, rows })
}

/// Interface block from a minimized transition with clamps `(P, Q H)`.
pub fn transition_block(
    cs: CrossSection,
    m: f64,
    a: f64,
    left: Mat3,
    right: Mat3,
    model: &ElasticModel,
    cfg: &SolverConfig,
) -> Result<TransitionBlock> {
    let grid = Arc::new(Grid::build(cs, m, a)?);
    let clamp = EndClamp::new(left, right * model.h(), 1)?;
    let (ramp, _) = mismatch_ramp(&ramp_for(&grid), grid.clone(), model)?;
    let mut u0 = ramp;
    let c = clamp.infer_translation(&u0);
    clamp.apply(&mut u0, c);
    let (best, _) = run(&u0, &clamp, cfg, model)?;
    Ok(TransitionBlock { energy: best.energy, right_translation: best.right_translation, clamp, field: best.field })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sandwich {
    pub disk: f64,
    pub square: f64,
    /// Radius used for the outer disk: `√2 r` rounded up to the grid.
    pub outer_radius: f64,
    pub outer_disk: f64,
}

/// Disk estimate at `r`, square estimate at `r` and disk estimate at the
/// smallest grid-aligned radius `≥ √2 r`.
pub fn section_sandwich(r: f64, m: f64, a: f64, model: &ElasticModel, cfg: &SolverConfig) -> Result<Sandwich> {
    let outer_radius = ((2f64.sqrt() * r / a) - 1e-9).ceil() * a;
    let disk = gamma_elastic(CrossSection::disk(r), m, a, model, cfg, false)?.energy;
    let square = gamma_elastic(CrossSection::square(r), m, a, model, cfg, false)?.energy;
    let outer_disk = gamma_elastic(CrossSection::disk(outer_radius), m, a, model, cfg, false)?.energy;
    Ok(Sandwich { disk, square, outer_radius, outer_disk })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SolverConfig {
        SolverConfig { grad_tol: 1e-4, max_iter: 3000, restarts: 0, ..SolverConfig::default() }
    }

    #[test]
    fn matching_wells_give_zero() {
        let model = ElasticModel::isotropic(0.0, 1.5).unwrap();
        let est = gamma_elastic(CrossSection::disk(0.5), 0.5, 0.125, &model, &quick(), false).unwrap();
        assert_eq!(est.energy, 0.0);
    }

    #[test]
    fn extension_preserves_energy() {
        let model = ElasticModel::default();
        let cfg = quick();
        let est = gamma_elastic(CrossSection::disk(0.5), 0.5, 0.125, &model, &cfg, false).unwrap();
        let u = est.field.clone().unwrap();
        let clamp = clamp_for(&model, &Mat3::identity()).unwrap();
        let longer = Arc::new(Grid::build(CrossSection::disk(0.5), 1.0, 0.125).unwrap());
        let v = extend_axially(&u, &clamp, Vec3::from(est.right_translation), longer).unwrap();
        let (e0, e1) = (crate::solver::total_energy(&u, &model), crate::solver::total_energy(&v, &model));
        assert!((e0 - e1).abs() <= 1e-12 * e0.max(1e-30), "{e0} vs {e1}");
        assert!(clamp.holds(&v, Vec3::from(est.right_translation)));
    }

    #[test]
    fn zero_burgers_polygon_matches_elastic() {
        let model = ElasticModel::default();
        let cfg = quick();
        let cs = CrossSection::disk(0.5);
        let el = gamma_elastic(cs, 0.5, 0.125, &model, &cfg, false).unwrap();
        let input = DislocationInput::Polygon {
            curve: vec![[-0.3, -0.3], [0.3, -0.3], [0.3, 0.3], [-0.3, 0.3]],
            direction: [0.0, 1.0, 0.0],
            scale: 0.0,
        };
        let d = gamma_dislocated(cs, 0.5, 0.125, &input, &model, &cfg).unwrap();
        assert_eq!(d.estimate.energy, el.energy);
        assert!(d.circuits_checked > 0);
    }

    #[test]
    fn polygon_dislocation_keeps_circuits() {
        let model = ElasticModel::default();
        let cfg = SolverConfig { max_iter: 200, ..quick() };
        let input = DislocationInput::Polygon {
            curve: vec![[-0.3, -0.3], [0.3, -0.3], [0.3, 0.3], [-0.3, 0.3]],
            direction: [0.0, 0.0, 1.0],
            scale: 0.02,
        };
        let d = gamma_dislocated(CrossSection::disk(0.5), 0.5, 0.125, &input, &model, &cfg).unwrap();
        assert!(d.estimate.energy <= d.construction_energy);
        assert!(d.circuits_checked > 0);
    }
}
