use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rodlab::constructions::{glued_quadrant_field, mismatch_ramp, recovery_sequence, square_grid, QuadrantGlueSpec, RampSpec, RecoverySpec};
use rodlab::estimates::{pointwise_equivalence_probe, poincare_probe, rigidity_ratio_probe, ProbeReport, RigidityMode};
use rodlab::experiments::{
    crossover_sweep, gamma_convergence_trend, gamma_dislocated, gamma_elastic, transition_block, DislocationInput,
    SweepRow, SweepSettings, TrendProfile,
};
use rodlab::fields::DisplacementField;
use rodlab::geometry::{CrossSection, Grid};
use rodlab::linalg::rotation_exp;
use rodlab::record::{write_atomic, write_plot_data, ExperimentRecord};
use rodlab::solver::{minimize, EndClamp};
use rodlab::{Mat3, Vec3};
use serde_json::json;

use crate::config::{Command, Construction, ProbeKind, RunConfig};

pub struct Outputs {
    pub dir: PathBuf,
    pub hash: String,
    pub seed: u64,
    summary: String,
    files: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: PathBuf, cfg: &RunConfig) -> std::io::Result<Self> {
        std::fs::create_dir_all(&dir)?;
        let hash = cfg.hash();
        let summary = format!("rodlab {} (config {hash}, seed {})\n", cfg.command.name(), cfg.solver.seed);
        Ok(Self { dir, hash, seed: cfg.solver.seed, summary, files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }

    pub fn record(&mut self, name: &str, rec: &ExperimentRecord) -> rodlab::Result<()> {
        let p = self.path(name);
        rec.write(&p)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> anyhow::Result<()> {
        let mut buf = format!("# config_hash {}\n", self.hash).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row.iter().map(|x| format!("{x:?}")))?;
            }
            w.flush()?;
        }
        let p = self.path(name);
        write_atomic(&p, &buf)?;
        Ok(())
    }

    fn plot(&mut self, name: &str, labels: (&str, &str), points: &[(f64, f64)]) -> rodlab::Result<()> {
        let hash = self.hash.clone();
        let p = self.path(name);
        write_plot_data(&p, &hash, labels, points)
    }

    fn field(&mut self, name: &str, u: &DisplacementField) -> rodlab::Result<()> {
        let mut buf = Vec::new();
        u.write_text(&mut buf)?;
        buf.extend_from_slice(format!("# config_hash {}\n", self.hash).as_bytes());
        let p = self.path(name);
        write_atomic(&p, &buf)
    }

    /// Write `summary.txt` and return the summary text.
    pub fn finish(mut self) -> rodlab::Result<String> {
        let names: Vec<String> = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let _ = writeln!(self.summary, "files: {}", names.join(", "));
        let p = self.dir.join("summary.txt");
        write_atomic(&p, self.summary.as_bytes())?;
        Ok(self.summary)
    }
}

pub fn run(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    match cfg.command {
        Command::Gamma => gamma(cfg, out),
        Command::Sweep => sweep(cfg, out),
        Command::Construct => construct(cfg, out),
        Command::Probe => probe(cfg, out),
        Command::Gammaconv => gammaconv(cfg, out),
    }
}

/// Persist a flagged record for a run that stopped with an error.
pub fn persist_failure(cfg: &RunConfig, out: &mut Outputs, err: &rodlab::Error) -> rodlab::Result<()> {
    let rec = ExperimentRecord::new(cfg.command.name(), &out.hash, out.seed, cfg, &json!(null))?.flag(err.to_string());
    out.line(format!("aborted: {err}"));
    out.record(&format!("{}.json", cfg.command.name()), &rec)
}

fn status(converged: bool) -> &'static str {
    if converged {
        "converged"
    } else {
        "not converged"
    }
}

fn gamma(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let g = &cfg.geometry;
    let (cs, m, a) = (g.cross_section(), g.half_length(), g.spacing());
    let input = if let Some(p) = &g.dislocation {
        Some(DislocationInput::Polygon { curve: p.curve.clone(), direction: p.direction, scale: p.scale })
    } else {
        g.glue.as_ref().map(|gl| DislocationInput::Glue { mu: gl.mu, tiles_per_side: gl.tiles_per_side })
    };
    let (est, extra) = match &input {
        None => (gamma_elastic(cs, m, a, &model, &cfg.solver, cfg.experiment.sensitivity)?, json!(null)),
        Some(input) => {
            let d = gamma_dislocated(cs, m, a, input, &model, &cfg.solver)?;
            let extra = json!({
                "construction_energy": d.construction_energy,
                "glue": d.glue,
                "base_energy": d.base_energy,
                "circuits_checked": d.circuits_checked,
            });
            (d.estimate, extra)
        }
    };
    let mut rec = ExperimentRecord::new("gamma", &out.hash, out.seed, cfg, &json!({ "estimate": est, "dislocated": extra }))?;
    if !est.converged {
        rec = rec.flag(format!("solver stopped ({:?}) at residual {:e}", est.stop, est.grad_norm));
    }
    out.record("gamma.json", &rec)?;
    if let Some(u) = &est.field {
        out.field("gamma_field.txt", u)?;
    }
    out.line(format!(
        "gamma ({}): energy = {:.6e} ({}, {} iterations, residual {:.2e})",
        if input.is_some() { "dislocated" } else { "elastic" },
        est.energy,
        status(est.converged),
        est.iterations,
        est.grad_norm
    ));
    if !est.resolved_positive(&cfg.solver, 10.0) {
        out.line("estimate is 0 within solver tolerance");
    }
    if let Some(t) = est.m_sensitivity {
        out.line(format!("M-sensitivity: E_M = {:.6e}, E_2M = {:.6e}, E_4M = {:.6e}", t[0], t[1], t[2]));
        out.plot("gamma_msens.dat", ("M", "energy"), &[(m, t[0]), (2.0 * m, t[1]), (4.0 * m, t[2])])?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let x = &cfg.experiment;
    let settings = SweepSettings {
        r_list: x.r_list.clone(),
        cells_per_radius: x.cells_per_radius,
        m_factor: x.m_factor,
        mu_cells: x.mu_cells,
        tiles: x.tiles.clone(),
    };
    let table = crossover_sweep(&settings, &model, &cfg.solver)?;
    let rows: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|r| vec![r.r, r.spacing, r.half_length, r.elastic, r.elastic_per_r3, r.dislocated, r.dislocated_per_r3, r.glued_construction])
        .collect();
    out.csv("sweep.csv", &SweepRow::COLUMNS, &rows)?;
    let el: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.r, r.elastic_per_r3)).collect();
    let di: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.r, r.dislocated_per_r3)).collect();
    out.plot("sweep_elastic.dat", ("r", "elastic_per_r3"), &el)?;
    out.plot("sweep_dislocated.dat", ("r", "dislocated_per_r3"), &di)?;
    let rec = ExperimentRecord::new("sweep", &out.hash, out.seed, cfg, &table)?;
    out.record("sweep.json", &rec)?;
    for r in &table.rows {
        out.line(format!("r = {}: elastic/r^3 = {:.6e}, dislocated/r^3 = {:.6e}", r.r, r.elastic_per_r3, r.dislocated_per_r3));
    }
    out.line(format!("elastic/r^3 spread: {:.2}%", 100.0 * table.elastic_spread));
    match table.crossover {
        Some(r) => out.line(format!("crossover radius: r* = {r}")),
        None => out.line("crossover radius: none in range"),
    }
    Ok(())
}

fn construct(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let g = &cfg.geometry;
    let (cs, m, a) = (g.cross_section(), g.half_length(), g.spacing());
    match cfg.experiment.construction {
        Construction::Ramp => {
            let grid = Arc::new(Grid::build(cs, m, a)?);
            let spec = RampSpec { r: g.r.min(2.0 * (m - grid.axial_spacing())) };
            let (u, energy) = mismatch_ramp(&spec, grid, &model)?;
            out.field("construct_field.txt", &u)?;
            let rec = ExperimentRecord::new("construct", &out.hash, out.seed, cfg, &json!({ "ramp": spec, "energy": energy }))?;
            out.record("construct.json", &rec)?;
            out.line(format!("ramp energy = {energy:.6e}"));
        }
        Construction::Glue => {
            let gl = g.glue.as_ref().ok_or_else(|| anyhow::anyhow!("construct glue needs a [geometry.glue] section"))?;
            let spec = QuadrantGlueSpec { r: g.r, mu: gl.mu, m, tiles_per_side: gl.tiles_per_side };
            let base_grid = square_grid(spec.base_half_side(), m, a)?;
            let clamp = EndClamp::new(Mat3::identity(), model.h(), 1)?;
            let (ramp, _) = mismatch_ramp(&RampSpec { r: spec.base_half_side().min(2.0 * (m - a)) }, base_grid, &model)?;
            let base = minimize(&ramp, &clamp, &cfg.solver, &model)?;
            let glued = glued_quadrant_field(&spec, &base.field, base.right_translation, square_grid(g.r, m, a)?, &model)?;
            out.field("construct_field.txt", &glued.field)?;
            let payload = json!({ "glue": spec, "base_energy": base.energy, "energy": glued.energy, "burgers": glued.burgers });
            let rec = ExperimentRecord::new("construct", &out.hash, out.seed, cfg, &payload)?;
            out.record("construct.json", &rec)?;
            out.line(format!(
                "glued field energy = {:.6e} (tiles {:.6e}, sectors {:.6e}); base transition {:.6e}",
                glued.energy.total,
                glued.energy.tile_sum(),
                glued.energy.sector_sum(),
                base.energy
            ));
        }
        Construction::Recovery => {
            let (block, profile) = trend_setup(cfg)?;
            let h = cfg.experiment.h_list[0];
            let spec = RecoverySpec {
                h,
                sigma: h.sqrt(),
                half_length: profile.half_length,
                left_breaks: profile.left_breaks,
                left_rotations: profile.left_rotations,
                right_breaks: profile.right_breaks,
                right_rotations: profile.right_rotations,
            };
            let rec_field = recovery_sequence(&spec, &block, &model)?;
            out.field("construct_field.txt", &rec_field.field)?;
            let payload = json!({ "h": h, "sigma": spec.sigma, "block_energy": block.energy, "energy": rec_field.energy });
            let rec = ExperimentRecord::new("construct", &out.hash, out.seed, cfg, &payload)?;
            out.record("construct.json", &rec)?;
            out.line(format!(
                "recovery field at h = {h}: rescaled energy = {:.6e} (block {:.6e}, bands {:?})",
                rec_field.energy.total, rec_field.energy.block, rec_field.energy.bands
            ));
        }
    }
    Ok(())
}

fn probe(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let x = &cfg.experiment;
    let p = cfg.material.p;
    let seed = out.seed;
    let grid = Arc::new(Grid::build(CrossSection::disk(1.0), 1.0, x.probe_spacing)?);
    let mut reports: Vec<ProbeReport> = Vec::new();
    for kind in &x.probes {
        let r = match kind {
            ProbeKind::RigidityClassic => rigidity_ratio_probe(&grid, x.samples, seed, p, RigidityMode::Classic)?,
            ProbeKind::RigidityTruncated => rigidity_ratio_probe(&grid, x.samples, seed, p, RigidityMode::Truncated)?,
            ProbeKind::Poincare => poincare_probe(&grid, x.samples, seed, p)?,
            ProbeKind::Pointwise => pointwise_equivalence_probe(x.samples, &(Mat3::identity() * x.g_scale), p, seed)?,
        };
        out.line(format!(
            "{}: constant {:.6}, validation max {:.6} over {} samples, violations {}, stable {}",
            r.probe, r.calibrated_constant, r.validation_max_ratio, r.validation_samples, r.violations, r.stable
        ));
        reports.push(r);
    }
    let rows: Vec<Vec<f64>> = reports
        .iter()
        .map(|r| vec![r.samples as f64, r.max_ratio, r.calibrated_constant, r.validation_max_ratio, r.violations as f64])
        .collect();
    out.csv("probe.csv", &["samples", "max_ratio", "calibrated_constant", "validation_max_ratio", "violations"], &rows)?;
    let mut rec = ExperimentRecord::new("probe", &out.hash, seed, cfg, &reports)?;
    if reports.iter().any(|r| r.violations > 0 || !r.stable) {
        rec = rec.flag("a probe reported violations or an unstable calibration");
    }
    out.record("probe.json", &rec)?;
    Ok(())
}

fn trend_setup(cfg: &RunConfig) -> anyhow::Result<(rodlab::constructions::TransitionBlock, TrendProfile)> {
    let model = cfg.model()?;
    let g = &cfg.geometry;
    let x = &cfg.experiment;
    let block = transition_block(g.cross_section(), g.half_length(), g.spacing(), Mat3::identity(), Mat3::identity(), &model, &cfg.solver)?;
    let profile = TrendProfile {
        half_length: x.trend_half_length,
        left_breaks: vec![x.trend_break],
        left_rotations: vec![rotation_exp(&Vec3::new(x.trend_angle, 0.0, 0.0)), Mat3::identity()],
        right_breaks: vec![],
        right_rotations: vec![Mat3::identity()],
    };
    Ok((block, profile))
}

fn gammaconv(cfg: &RunConfig, out: &mut Outputs) -> anyhow::Result<()> {
    let model = cfg.model()?;
    let (block, profile) = trend_setup(cfg)?;
    let minimize_cfg = cfg.experiment.trend_minimize.then_some(&cfg.solver);
    let table = gamma_convergence_trend(&cfg.experiment.h_list, &profile, &block, &model, minimize_cfg)?;
    let rows: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|r| vec![r.h, r.sigma, r.recovery, r.minimized.unwrap_or(f64::NAN), table.gamma])
        .collect();
    out.csv("gammaconv.csv", &["h", "sigma", "recovery", "minimized", "gamma"], &rows)?;
    let pts: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.h, r.recovery)).collect();
    out.plot("gammaconv.dat", ("h", "recovery"), &pts)?;
    let rec = ExperimentRecord::new("gammaconv", &out.hash, out.seed, cfg, &table)?;
    out.record("gammaconv.json", &rec)?;
    out.line(format!("interface block estimate = {:.6e}", table.gamma));
    for r in &table.rows {
        let rel = if table.gamma > 0.0 { r.recovery / table.gamma - 1.0 } else { 0.0 };
        out.line(format!("h = {}: recovery = {:.6e} ({:+.2}% vs block){}", r.h, r.recovery, 100.0 * rel,
            r.minimized.map(|e| format!(", minimized = {e:.6e}")).unwrap_or_default()));
    }
    Ok(())
}

pub fn default_out(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| Path::new("rodlab-out").join(cfg.command.name()))
}
