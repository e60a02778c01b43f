//! The two-well stored energy.
//!
//! Each phase uses `W(A) = dist²(A, SO(3)K) ∧ (|A|^p + 1)` with `K = I` on the
//! left (`x₁ < 0`) and `K = H = diag(ζ)` on the right. This is the extremal
//! density allowed by the two-sided growth bound with both constants equal
//! to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd3, Mat3, Vec3};

/// Diagonal mismatch `H = diag(ζ₁, ζ₂, ζ₃)`, optionally derived from an
/// isotropic lattice mismatch `α` as `H = (1 − α) I`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchSpec {
    pub zeta: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl MismatchSpec {
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        let h = mismatch_to_h(alpha)?;
        Ok(Self {
            zeta: [h[(0, 0)], h[(1, 1)], h[(2, 2)]],
            alpha: Some(alpha),
        })
    }

    pub fn from_zeta(zeta: [f64; 3]) -> Result<Self> {
        let spec = Self { zeta, alpha: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, z) in self.zeta.iter().enumerate() {
            if !z.is_finite() || *z <= 0.0 {
                return Err(Error::Mismatch(format!(
                    "zeta[{i}] = {z} must be positive so that det H > 0"
                )));
            }
        }
        if let Some(alpha) = self.alpha {
            let h = mismatch_to_h(alpha)?;
            if self.zeta != [h[(0, 0)], h[(1, 1)], h[(2, 2)]] {
                return Err(Error::Mismatch(format!(
                    "zeta {:?} inconsistent with alpha = {alpha}",
                    self.zeta
                )));
            }
        }
        Ok(())
    }

    pub fn h(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(self.zeta[0], self.zeta[1], self.zeta[2]))
    }

    /// `max |ζᵢ − 1|`, the size of `H − I`.
    pub fn delta(&self) -> f64 {
        self.zeta.iter().map(|z| (z - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `H = (1 − α) I` for a lattice mismatch `0 ≤ α < 1`.
pub fn mismatch_to_h(alpha: f64) -> Result<Mat3> {
    if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
        return Err(Error::Mismatch(format!(
            "alpha = {alpha} outside [0, 1): H = (1 - alpha) I needs det H > 0"
        )));
    }
    Ok(Mat3::identity() * (1.0 - alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mismatch: MismatchSpec,
    pub p: f64,
}

/// Validated density parameters with the right well `H` cached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParams", into = "ModelParams")]
pub struct ElasticModel {
    pub mismatch: MismatchSpec,
    pub p: f64,
    right_well: Mat3,
}

impl TryFrom<ModelParams> for ElasticModel {
    type Error = Error;
    fn try_from(raw: ModelParams) -> Result<Self> {
        Self::new(raw.mismatch, raw.p)
    }
}

impl From<ElasticModel> for ModelParams {
    fn from(m: ElasticModel) -> Self {
        ModelParams {
            mismatch: m.mismatch,
            p: m.p,
        }
    }
}

impl ElasticModel {
    pub const DEFAULT_P: f64 = 1.5;
    pub const DEFAULT_ALPHA: f64 = 0.05;

    pub fn new(mismatch: MismatchSpec, p: f64) -> Result<Self> {
        mismatch.validate()?;
        if !(p > 1.0 && p < 2.0) {
            return Err(Error::Model(format!("growth exponent p = {p} must lie in (1, 2)")));
        }
        let right_well = mismatch.h();
        Ok(Self {
            mismatch,
            p,
            right_well,
        })
    }

    /// `H = (1 − α) I` with exponent `p`.
    pub fn isotropic(alpha: f64, p: f64) -> Result<Self> {
        Self::new(MismatchSpec::from_alpha(alpha)?, p)
    }

    pub fn h(&self) -> Mat3 {
        self.right_well
    }

    pub fn well(&self, phase: Phase) -> Mat3 {
        match phase {
            Phase::Left => Mat3::identity(),
            Phase::Right => self.right_well,
        }
    }
}

impl Default for ElasticModel {
    fn default() -> Self {
        Self::isotropic(Self::DEFAULT_ALPHA, Self::DEFAULT_P).expect("default model is valid")
    }
}

fn check_finite(a: &Mat3) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("matrix {a:?}")))
    }
}

/// Minimizing rotation `R*` of `|A − R K|` together with the distance.
///
/// `max_R <A, R K> = max_R <R, A Kᵀ>` is attained at the polar rotation of
/// `A Kᵀ` with the smallest singular direction flipped when `det(A Kᵀ) < 0`.
pub fn nearest_well_point(a: &Mat3, k: &Mat3) -> (Mat3, f64) {
    let m = a * k.transpose();
    let rot = svd3(&m).closest_rotation();
    let dist = (a - rot * k).norm();
    (rot, dist)
}

/// `dist(A, SO(3)K)` in the Frobenius norm.
pub fn dist_to_rotation_well(a: &Mat3, k: &Mat3) -> Result<f64> {
    check_finite(a)?;
    check_finite(k)?;
    Ok(nearest_well_point(a, k).1)
}

/// The truncation branch `|A|^p + 1`.
pub fn growth_cap(a: &Mat3, p: f64) -> f64 {
    a.norm().powf(p) + 1.0
}

/// Which branch of the min is active; ties select the quadratic branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Quadratic,
    Growth,
}

#[derive(Clone, Copy, Debug)]
pub struct DensityEval {
    pub value: f64,
    pub branch: Branch,
    pub gradient: Mat3,
}

/// Energy and its gradient in one pass; this is the hot path of assembly.
#[inline]
pub fn density_and_gradient(phase: Phase, a: &Mat3, model: &ElasticModel) -> DensityEval {
    let k = model.well(phase);
    let (rot, dist) = nearest_well_point(a, &k);
    let dist2 = dist * dist;
    let norm = a.norm();
    let cap = norm.powf(model.p) + 1.0;
    if dist2 <= cap {
        DensityEval {
            value: dist2,
            branch: Branch::Quadratic,
            gradient: (a - rot * k) * 2.0,
        }
    } else {
        let gradient = if norm > 0.0 {
            a * (model.p * norm.powf(model.p - 2.0))
        } else {
            Mat3::zeros()
        };
        DensityEval {
            value: cap,
            branch: Branch::Growth,
            gradient,
        }
    }
}

pub fn energy_density(phase: Phase, a: &Mat3, model: &ElasticModel) -> f64 {
    let k = model.well(phase);
    let dist = nearest_well_point(a, &k).1;
    (dist * dist).min(growth_cap(a, model.p))
}

pub fn energy_density_gradient(phase: Phase, a: &Mat3, model: &ElasticModel) -> Mat3 {
    density_and_gradient(phase, a, model).gradient
}

/// `min_{R, a} |R − H − a ⊗ e₁|` over a sample of rotations. For fixed `R`
/// the optimal `a` is the first column of `R − H`, leaving the norm of
/// columns two and three.
pub fn rank_one_incompatibility(h: &Mat3, rotations: &[Mat3]) -> f64 {
    rotations
        .iter()
        .map(|r| {
            let d = r - h;
            (d.column(1).norm_squared() + d.column(2).norm_squared()).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rotation_exp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
        let w = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        rotation_exp(&(w.normalize() * rng.gen_range(0.0..std::f64::consts::PI)))
    }

    #[test]
    fn mismatch_examples() {
        assert_eq!(mismatch_to_h(0.0).unwrap(), Mat3::identity());
        assert_eq!(mismatch_to_h(0.05).unwrap(), Mat3::identity() * 0.95);
        assert_eq!(mismatch_to_h(0.5).unwrap(), Mat3::identity() * 0.5);
        assert!(mismatch_to_h(1.0).is_err());
        assert!(mismatch_to_h(1.2).is_err());
        assert!(mismatch_to_h(-0.1).is_err());
        assert!(MismatchSpec::from_zeta([1.0, -0.5, 1.0]).is_err());
    }

    #[test]
    fn model_rejects_bad_exponent() {
        let m = MismatchSpec::from_alpha(0.05).unwrap();
        assert!(ElasticModel::new(m.clone(), 1.0).is_err());
        assert!(ElasticModel::new(m.clone(), 2.0).is_err());
        assert!(ElasticModel::new(m, 1.5).is_ok());
    }

    #[test]
    fn distance_examples() {
        let i = Mat3::identity();
        assert_eq!(dist_to_rotation_well(&i, &i).unwrap(), 0.0);
        let d = dist_to_rotation_well(&(i * 2.0), &i).unwrap();
        assert!((d - 3f64.sqrt()).abs() < 1e-14);
        let flip = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        let d = dist_to_rotation_well(&flip, &i).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
        let mut bad = i;
        bad[(0, 1)] = f64::NAN;
        assert!(dist_to_rotation_well(&bad, &i).is_err());
    }

    #[test]
    fn reflection_distance_matches_brute_force_search() {
        // sample SO(3) densely and refine by random local search
        let a = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut best = f64::INFINITY;
        let mut best_w = Vec3::zeros();
        for _ in 0..20000 {
            let w = Vec3::new(rng.gen_range(-3.2..3.2), rng.gen_range(-3.2..3.2), rng.gen_range(-3.2..3.2));
            let d = (a - rotation_exp(&w)).norm();
            if d < best {
                best = d;
                best_w = w;
            }
        }
        let mut step = 0.1;
        for _ in 0..4000 {
            let w = best_w + Vec3::new(rng.gen_range(-step..step), rng.gen_range(-step..step), rng.gen_range(-step..step));
            let d = (a - rotation_exp(&w)).norm();
            if d < best {
                best = d;
                best_w = w;
            } else {
                step *= 0.999;
            }
        }
        assert!((best - 2.0).abs() < 1e-6, "brute force found {best}");
    }

    #[test]
    fn density_wells_and_growth_branch() {
        let model = ElasticModel::default();
        assert_eq!(energy_density(Phase::Left, &Mat3::identity(), &model), 0.0);
        assert_eq!(energy_density(Phase::Right, &model.h(), &model), 0.0);

        let big = Mat3::identity() * 1000.0;
        let quad = 3.0 * 999.0f64.powi(2);
        let cap = (3f64.sqrt() * 1000.0).powf(1.5) + 1.0;
        assert!(cap < quad);
        let w = energy_density(Phase::Left, &big, &model);
        assert!((w - cap).abs() < 1e-9 * cap);
        assert!((w - 72_085.342_424).abs() < 1e-3);
    }

    #[test]
    fn gradient_examples() {
        let model = ElasticModel::default();
        assert_eq!(energy_density_gradient(Phase::Left, &Mat3::identity(), &model), Mat3::zeros());
        assert!(energy_density_gradient(Phase::Right, &model.h(), &model).norm() < 1e-15);
        let a = Mat3::identity() * 1.1;
        let g = energy_density_gradient(Phase::Left, &a, &model);
        assert!((g - Mat3::identity() * 0.2).norm() < 1e-14);
        // central differences
        let step = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let mut ap = a;
                let mut am = a;
                ap[(i, j)] += step;
                am[(i, j)] -= step;
                let fd = (energy_density(Phase::Left, &ap, &model) - energy_density(Phase::Left, &am, &model)) / (2.0 * step);
                assert!((fd - g[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn frame_indifference_on_samples() {
        let model = ElasticModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..2000 {
            let r = random_rotation(&mut rng);
            let a = Mat3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
            for phase in [Phase::Left, Phase::Right] {
                let w = energy_density(phase, &a, &model);
                let wr = energy_density(phase, &(r * a), &model);
                assert!((w - wr).abs() <= 1e-12 * (1.0 + w));
            }
        }
    }

    #[test]
    fn incompatibility_of_default_wells() {
        let model = ElasticModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rots: Vec<Mat3> = (0..5000).map(|_| random_rotation(&mut rng)).collect();
        rots.push(Mat3::identity());
        let m = rank_one_incompatibility(&model.h(), &rots);
        // identity gives 0.05·√2 and is the sampled optimum for H = 0.95 I
        assert!((m - 0.05 * 2f64.sqrt()).abs() < 1e-12);
        // a rank-one compatible H = diag(ζ₁, 1, 1) has zero defect at R = I
        let compatible = Mat3::from_diagonal(&Vec3::new(0.9, 1.0, 1.0));
        assert_eq!(rank_one_incompatibility(&compatible, &[Mat3::identity()]), 0.0);
    }
}
