//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rodlab::constructions::{glued_quadrant_field, mismatch_ramp, restrict_field, square_grid, QuadrantGlueSpec, RampSpec};
use rodlab::estimates::{pointwise_equivalence_probe, poincare_probe, rigidity_ratio_probe, RigidityMode};
use rodlab::experiments::{
    crossover_sweep, gamma_convergence_trend, gamma_dislocated, gamma_elastic, rotation_invariance_check, transition_block,
    verify_circuits, DislocationInput, SweepSettings, SweepTable, TrendProfile,
};
use rodlab::fields::{strain, JumpSet};
use rodlab::geometry::{burgers_circuit, rasterize_dislocation, CellLoop, CrossSection, Grid};
use rodlab::linalg::rotation_exp;
use rodlab::material::{density_and_gradient, energy_density, Branch, ElasticModel, Phase};
use rodlab::record::ExperimentRecord;
use rodlab::solver::{EndClamp, SolverConfig};
use rodlab::{Mat3, Vec3};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn solver(tol: f64) -> SolverConfig {
    SolverConfig { grad_tol: tol, max_iter: 20_000, restarts: 0, ..SolverConfig::default() }
}

fn random_matrix(rng: &mut impl Rng, scale: f64) -> Mat3 {
    Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0)) * scale
}

fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let w = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    rotation_exp(&(w.normalize() * rng.gen_range(0.0..std::f64::consts::PI)))
}

fn well_exactness() -> Outcome {
    let model = ElasticModel::default();
    let zero_left = energy_density(Phase::Left, &Mat3::identity(), &model);
    let zero_right = energy_density(Phase::Right, &model.h(), &model);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let a = random_matrix(&mut rng, scale);
        let r = random_rotation(&mut rng);
        let phase = if k % 2 == 0 { Phase::Left } else { Phase::Right };
        let (w0, w1) = (energy_density(phase, &a, &model), energy_density(phase, &(r * a), &model));
        worst = worst.max((w1 - w0).abs() / w0.max(1.0));
    }
    outcome(
        zero_left == 0.0 && zero_right == 0.0 && worst <= 1e-12,
        format!("W(I) = {zero_left:e}, W(H) = {zero_right:e}, frame deviation {worst:.2e}"),
    )
}

fn gradient_fidelity() -> Outcome {
    let model = ElasticModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut used = 0;
    let mut quadratic = 0;
    while used < 1000 {
        let phase = if used % 2 == 0 { Phase::Left } else { Phase::Right };
        let well = model.well(phase);
        let scale = 10f64.powf(rng.gen_range(-3.0..0.7));
        let a = random_rotation(&mut rng) * well + random_matrix(&mut rng, scale);
        let eval = density_and_gradient(phase, &a, &model);
        let dist2 = {
            let k = model.well(phase);
            rodlab::material::nearest_well_point(&a, &k).1.powi(2)
        };
        let cap = a.norm().powf(model.p) + 1.0;
        if (dist2 - cap).abs() <= 1e-4 * cap {
            continue;
        }
        let step = 1e-6 * a.norm().max(1.0);
        let mut fd = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut e = Mat3::zeros();
                e[(i, j)] = step;
                fd[(i, j)] = (energy_density(phase, &(a + e), &model) - energy_density(phase, &(a - e), &model)) / (2.0 * step);
            }
        }
        let norm = eval.gradient.norm();
        if norm == 0.0 {
            continue;
        }
        worst = worst.max((fd - eval.gradient).norm() / norm);
        if eval.branch == Branch::Quadratic {
            quadratic += 1;
        }
        used += 1;
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.2e} over {used} states ({quadratic} quadratic branch)"))
}

fn circulation(sweep_circuits: bool) -> Outcome {
    let model = ElasticModel::default();
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut errors = Vec::new();
    for n in [2usize, 4] {
        let r = 1.0;
        let a = 1.0 / 16.0;
        let spec = QuadrantGlueSpec { r, mu: 2.0 * a, m: 0.5, tiles_per_side: n };
        let base_grid = square_grid(spec.base_half_side(), 0.5, a).unwrap();
        let (base, _) = mismatch_ramp(&RampSpec { r: 0.75 }, base_grid.clone(), &model).unwrap();
        let clamp = EndClamp::new(Mat3::identity(), model.h(), 1).unwrap();
        let c = clamp.infer_translation(&base);
        let glued = glued_quadrant_field(&spec, &base, c, square_grid(r, 0.5, a).unwrap(), &model).unwrap();
        let disk = restrict_field(&glued.field, Arc::new(Grid::build(CrossSection::disk(r), 0.5, a).unwrap())).unwrap();
        for u in [&glued.field, &disk] {
            match verify_circuits(u) {
                Ok(k) => checked += k,
                Err(e) => errors.push(e.to_string()),
            }
        }
        // a loop wound twice around the cut between two tiles
        let f = strain(&glued.field);
        let g = glued.field.grid();
        let layer = g.interface_layer();
        let nt = g.transverse_cells();
        let lp = CellLoop::axial_rectangle(2, (layer - 2, layer + 1), (1, nt - 2), nt / 2);
        let jump = |i2: usize| glued.field.jumps.get(i2, nt / 2);
        let once = -(jump(1) - jump(nt - 2));
        for (times, sign) in [(2usize, 1.0), (1, -1.0)] {
            let path = if sign > 0.0 { lp.repeated(times) } else { lp.reversed() };
            let got = burgers_circuit(&f, &path).unwrap();
            worst = worst.max((got - once * (times as f64 * sign)).norm());
            checked += 1;
        }
    }
    let grid = Arc::new(Grid::build(CrossSection::disk(1.0), 0.5, 0.125).unwrap());
    let spec = rasterize_dislocation(&[[-0.5, -0.4], [0.45, -0.5], [0.3, 0.5], [-0.4, 0.3]], &grid, Vec3::new(0.0, 0.6, 0.8), 0.03).unwrap();
    let (ramp, _) = mismatch_ramp(&RampSpec { r: 0.75 }, grid.clone(), &model).unwrap();
    let u = ramp.with_jumps(JumpSet::from_spec(&grid, &spec).unwrap());
    match verify_circuits(&u) {
        Ok(k) => checked += k,
        Err(e) => errors.push(e.to_string()),
    }
    let pass = errors.is_empty() && worst <= 1e-10 && sweep_circuits;
    outcome(
        pass,
        format!(
            "{checked} loops on glued (2x2, 4x4), restricted, polygon fields; winding error {worst:.1e}; minimized sweep fields {}{}",
            if sweep_circuits { "ok" } else { "FAILED" },
            errors.first().map(|e| format!("; {e}")).unwrap_or_default()
        ),
    )
}

fn cubic_scaling(table: &SweepTable) -> Outcome {
    let e = |r: f64| table.rows.iter().find(|row| row.r == r).map(|row| row.elastic).unwrap();
    let (q1, q2) = (e(2.0) / e(1.0), e(4.0) / e(2.0));
    let ok = (7.2..=8.8).contains(&q1) && (7.2..=8.8).contains(&q2);
    outcome(ok, format!("gamma(2)/gamma(1) = {q1:.4}, gamma(4)/gamma(2) = {q2:.4} at 16 cells/radius"))
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

struct MismatchLaw {
    outcome: Outcome,
    ramp_dominates: bool,
}

fn mismatch_law() -> MismatchLaw {
    let deltas = [0.02, 0.04, 0.08];
    let cs = CrossSection::disk(1.0);
    let (m, a) = (1.0, 0.125);
    let mut ramps = Vec::new();
    let mut gammas = Vec::new();
    let mut dominates = true;
    for &d in &deltas {
        let model = ElasticModel::isotropic(d, 1.5).unwrap();
        let grid = Arc::new(Grid::build(cs, m, a).unwrap());
        let (_, ramp) = mismatch_ramp(&RampSpec { r: 1.0 }, grid, &model).unwrap();
        let est = gamma_elastic(cs, m, a, &model, &solver(1e-6), false).unwrap();
        dominates &= est.energy <= ramp;
        ramps.push(ramp);
        gammas.push(est.energy);
    }
    let (sr, sg) = (slope(&deltas, &ramps), slope(&deltas, &gammas));
    let ok = (1.9..=2.1).contains(&sr) && (1.9..=2.1).contains(&sg);
    MismatchLaw { outcome: outcome(ok, format!("slopes: ramp {sr:.4}, gamma {sg:.4} over delta = 0.02, 0.04, 0.08")), ramp_dominates: dominates }
}

fn crossover(table: &SweepTable) -> Outcome {
    let ok = table.crossover.is_some() && table.elastic_spread <= 0.10;
    let rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("r={}: {:.4e}/{:.4e}", r.r, r.elastic_per_r3, r.dislocated_per_r3))
        .collect();
    let last = table.rows.last().unwrap();
    outcome(
        ok,
        format!(
            "r* = {}; elastic/dislocated per r^3 {}; elastic spread {:.2}%; largest-r dislocated/r^3 below elastic(r=1): {}",
            table.crossover.map(|r| r.to_string()).unwrap_or_else(|| "none".into()),
            rows.join(", "),
            100.0 * table.elastic_spread,
            last.dislocated_per_r3 < table.elastic_reference
        ),
    )
}

fn m_sensitivity() -> Outcome {
    let model = ElasticModel::default();
    let cfg = solver(1e-6);
    let est = gamma_elastic(CrossSection::disk(1.0), 0.5, 0.125, &model, &cfg, true).unwrap();
    let [e1, e2, e4] = est.m_sensitivity.unwrap();
    let tol = 1e-9;
    let (g1, g2) = (e1 - e2, e2 - e4);
    let ok = e1 >= e2 && e2 >= e4 - tol && g2 <= g1;
    outcome(ok, format!("E_M = {e1:.6e}, E_2M = {e2:.6e}, E_4M = {e4:.6e}; gaps {g1:.3e} -> {g2:.3e} (M = r/2)"))
}

struct Trend {
    outcome: Outcome,
    recovery_dominates: bool,
    detail: String,
}

fn gamma_trend() -> Trend {
    let model = ElasticModel::default();
    let block = transition_block(CrossSection::disk(1.0), 1.0, 0.125, Mat3::identity(), Mat3::identity(), &model, &solver(1e-6)).unwrap();
    let profile = TrendProfile {
        half_length: 1.0,
        left_breaks: vec![-0.6],
        left_rotations: vec![rotation_exp(&Vec3::new(0.02, 0.0, 0.0)), Mat3::identity()],
        right_breaks: vec![],
        right_rotations: vec![Mat3::identity()],
    };
    let short = SolverConfig { max_iter: 100, ..solver(1e-6) };
    let table = gamma_convergence_trend(&[0.125, 0.0625, 0.03125], &profile, &block, &model, Some(&short)).unwrap();
    let rec: Vec<f64> = table.rows.iter().map(|r| r.recovery).collect();
    let decreasing = rec.windows(2).all(|w| w[1] < w[0]);
    let rel = (rec.last().unwrap() / table.gamma - 1.0).abs();
    let dominates = table.rows.iter().all(|r| r.minimized.unwrap() <= r.recovery);
    let detail = table
        .rows
        .iter()
        .map(|r| format!("h={}: {:.4e} -> {:.4e}", r.h, r.recovery, r.minimized.unwrap()))
        .collect::<Vec<_>>()
        .join(", ");
    Trend {
        outcome: outcome(
            decreasing && rel <= 0.10,
            format!("recovery {:?}; gamma {:.6e}; gap at h = 1/32: {:.2}%", rec.iter().map(|e| format!("{e:.6e}")).collect::<Vec<_>>(), table.gamma, 100.0 * rel),
        ),
        recovery_dominates: dominates,
        detail,
    }
}

fn rotation_invariance() -> Outcome {
    let model = ElasticModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rotations: Vec<Mat3> = (0..5).map(|_| random_rotation(&mut rng)).collect();
    let res = rotation_invariance_check(&rotations, CrossSection::disk(1.0), 1.0, 0.125, &model, &solver(1e-6)).unwrap();
    outcome(
        res.max_deviation <= 0.05,
        format!("reference {:.6e}, max relative deviation {:.2e} over 5 rotations", res.reference, res.max_deviation),
    )
}

fn probes() -> Outcome {
    let grid = Arc::new(Grid::build(CrossSection::disk(1.0), 1.0, 0.25).unwrap());
    let reports = vec![
        rigidity_ratio_probe(&grid, 100, 11, 1.5, RigidityMode::Classic).unwrap(),
        rigidity_ratio_probe(&grid, 100, 11, 1.5, RigidityMode::Truncated).unwrap(),
        poincare_probe(&grid, 100, 11, 1.5).unwrap(),
    ];
    let pointwise = pointwise_equivalence_probe(10_000, &(Mat3::identity() * 5.0), 1.5, 11);
    let mut ok = pointwise.is_ok();
    let mut parts = Vec::new();
    for r in &reports {
        ok &= r.violations == 0 && r.stable;
        parts.push(format!("{} C = {:.4} (doubled {:.4}, violations {})", r.probe, r.calibrated_constant, r.validation_max_ratio, r.violations));
    }
    match &pointwise {
        Ok(r) => parts.push(format!("pointwise c1 = {:.4}, c2 = {:.4}, 0 violations", r.extra["c1"], r.extra["c2"])),
        Err(e) => parts.push(format!("pointwise: {e}")),
    }
    outcome(ok, parts.join("; "))
}

fn determinism() -> Outcome {
    let model = ElasticModel::default();
    let cfg = SolverConfig { grad_tol: 1e-5, max_iter: 400, restarts: 1, seed: 3, ..SolverConfig::default() };
    let run = || -> String {
        let input = DislocationInput::Glue { mu: 0.125, tiles_per_side: 2 };
        let d = gamma_dislocated(CrossSection::disk(1.0), 0.5, 0.0625, &input, &model, &cfg).unwrap();
        let grid = Arc::new(Grid::build(CrossSection::disk(1.0), 1.0, 0.25).unwrap());
        let p = poincare_probe(&grid, 20, 3, 1.5).unwrap();
        let rec = ExperimentRecord::new("determinism", "fixed", 3, &"inputs", &(d, p)).unwrap();
        rec.to_json().unwrap()
    };
    let (a, b) = (run(), run());
    outcome(a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let start = Instant::now();
    let mut lines: Vec<(usize, &str, Outcome)> = Vec::new();
    let timed = |f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let mut o = f();
        o.detail.push_str(&format!(" [{:.0}s]", t.elapsed().as_secs_f64()));
        o
    };
    lines.push((1, "well exactness", timed(&mut well_exactness)));
    lines.push((2, "gradient fidelity", timed(&mut gradient_fidelity)));

    let t = Instant::now();
    let model = ElasticModel::default();
    let settings = SweepSettings::default();
    let sweep = crossover_sweep(&settings, &model, &solver(1e-4));
    let sweep_time = t.elapsed().as_secs_f64();
    let (sweep_ok, table) = match sweep {
        Ok(t) => (true, Some(t)),
        Err(e) => {
            eprintln!("sweep failed: {e}");
            (false, None)
        }
    };
    lines.push((3, "circulation quantization", timed(&mut || circulation(sweep_ok))));
    let failed = || outcome(false, "sweep did not complete".into());
    lines.push((4, "cubic scaling", table.as_ref().map(cubic_scaling).unwrap_or_else(failed)));
    let law = mismatch_law();
    lines.push((5, "quadratic mismatch law", law.outcome));
    let trend = gamma_trend();
    let glue_dominates = table.as_ref().map(|t| t.rows.iter().all(|r| r.dislocated <= r.glued_construction)).unwrap_or(false);
    lines.push((
        6,
        "competitor dominance",
        outcome(
            law.ramp_dominates && glue_dominates && trend.recovery_dominates,
            format!(
                "ramp {}, glued {}, recovery {} ({})",
                law.ramp_dominates, glue_dominates, trend.recovery_dominates, trend.detail
            ),
        ),
    ));
    let mut c7 = table.as_ref().map(crossover).unwrap_or_else(failed);
    c7.detail.push_str(&format!(" [sweep {sweep_time:.0}s]"));
    lines.push((7, "crossover", c7));
    lines.push((8, "M-sensitivity", timed(&mut m_sensitivity)));
    lines.push((9, "gamma trend", trend.outcome));
    lines.push((10, "rotation invariance", timed(&mut rotation_invariance)));
    lines.push((11, "estimate probes", timed(&mut probes)));
    lines.push((12, "determinism", timed(&mut determinism)));

    let mut all = true;
    for (n, name, o) in &lines {
        all &= o.pass;
        println!("criterion {n:>2} {:<26} {}  {}", name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} criteria pass ({:.0}s)", lines.iter().filter(|l| l.2.pass).count(), lines.len(), start.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
