use super::*;
use crate::geometry::rotation_distance;
use crate::noise::{total_cost, Covariance};
use crate::sim::{generate_pair, SceneConfig, SimulatedPair};
use alloc::vec;

fn calib() -> StereoCalibration {
    StereoCalibration::kitti_like()
}

fn inliers(pair: &SimulatedPair) -> Vec<Correspondence> {
    pair.correspondences.iter().filter(|c| !c.is_outlier).map(|c| c.correspondence).collect()
}

fn pose_error(a: &Pose, b: &Pose) -> f64 {
    (a.translation - b.translation).norm()
}

#[test]
fn ground_truth_is_a_fixed_point_on_clean_data() {
    let pair = generate_pair(&SceneConfig::default().with_sigma(0.0), &calib(), 1).unwrap();
    let data = inliers(&pair);
    for scope in [RefinementScope::MotionOnly, RefinementScope::MotionStructure] {
        let r = refine(scope, &pair.motion, &data, &calib(), &NoiseModel::Gaussian).unwrap();
        assert!(r.initial_cost < 1e-12, "{}", r.initial_cost);
        assert!(pose_error(&r.pose, &pair.motion) < 1e-10, "{scope:?}");
        assert!(rotation_distance(&r.pose.rotation, &pair.motion.rotation) < 1e-10);
        assert!(r.final_cost <= r.initial_cost);
    }
}

#[test]
fn every_scope_converges_from_a_perturbed_start() {
    let pair = generate_pair(&SceneConfig::default().with_sigma(0.0), &calib(), 2).unwrap();
    let data = inliers(&pair);
    let start = pair.motion.retract(&nalgebra::Vector6::new(0.05, -0.03, 0.1, 0.01, -0.01, 0.005));
    for scope in RefinementScope::ALL {
        let model = match scope {
            RefinementScope::MotionStructureNoise => NoiseModel::Cauchy(SqrtInformation::identity(6)),
            _ => NoiseModel::Gaussian,
        };
        let r = refine(scope, &start, &data, &calib(), &model).unwrap();
        assert!(
            pose_error(&r.pose, &pair.motion) < 1e-6,
            "{scope:?}: {}",
            pose_error(&r.pose, &pair.motion)
        );
        assert!(rotation_distance(&r.pose.rotation, &pair.motion.rotation) < 1e-6);
        assert!(r.final_cost <= r.initial_cost);
    }
}

#[test]
fn initial_cost_equals_total_cost_data_term() {
    let pair = generate_pair(&SceneConfig::default(), &calib(), 1).unwrap();
    let data = inliers(&pair);
    let r = refine(RefinementScope::MotionOnly, &pair.motion, &data, &calib(), &NoiseModel::Gaussian).unwrap();
    let errors: Vec<_> = data
        .iter()
        .map(|c| ErrorVec::from3(&motion_error(&pair.motion, &c.point, &c.measurement.cur, &calib()).unwrap()))
        .collect();
    let weights = vec![1.0; data.len()];
    let c = total_cost(&NoiseModel::Gaussian, &errors, &weights).unwrap();
    assert!((r.initial_cost - c.data_cost).abs() < 1e-9 * c.data_cost);
}

#[test]
fn noise_scope_requires_cauchy() {
    let pair = generate_pair(&SceneConfig::default(), &calib(), 1).unwrap();
    let err = refine(
        RefinementScope::MotionStructureNoise,
        &pair.motion,
        &inliers(&pair),
        &calib(),
        &NoiseModel::Gaussian,
    )
    .unwrap_err();
    assert!(matches!(err, Error::InvalidModel(_)));
}

#[test]
fn too_few_points() {
    let pair = generate_pair(&SceneConfig::default(), &calib(), 1).unwrap();
    let data = inliers(&pair);
    let err = refine(RefinementScope::MotionOnly, &pair.motion, &data[..3], &calib(), &NoiseModel::Gaussian).unwrap_err();
    assert!(matches!(err, Error::InsufficientCorrespondences { .. }));
}

#[test]
fn robust_kernels_refine() {
    let pair = generate_pair(
        &SceneConfig {
            outlier_ratio: 0.2,
            ..SceneConfig::default()
        },
        &calib(),
        3,
    )
    .unwrap();
    let data: Vec<_> = pair.correspondences.iter().map(|c| c.correspondence).collect();
    let start = pair.motion.retract(&nalgebra::Vector6::new(0.02, 0.0, 0.02, 0.0, 0.002, 0.0));
    let mix = crate::noise::MixtureParams::new(Covariance::isotropic(3, 1.0).unwrap(), calib().domain_volume(), 0.8).unwrap();
    for model in [
        NoiseModel::Erode { scale: 2.0, threshold: 2.79 },
        NoiseModel::Msac { threshold: 2.79 },
        NoiseModel::Mlesac(mix),
    ] {
        let r = refine(RefinementScope::MotionOnly, &start, &data, &calib(), &model).unwrap();
        assert!(
            pose_error(&r.pose, &pair.motion) < 0.05,
            "{}: {}",
            model.name(),
            pose_error(&r.pose, &pair.motion)
        );
    }
}

fn anisotropic_errors(n: usize, su: f64, sv: f64, seed: u64) -> Vec<ErrorVec> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let u = Normal::new(0.0, su).unwrap();
    let v = Normal::new(0.0, sv).unwrap();
    (0..n)
        .map(|_| {
            ErrorVec::from6([
                u.sample(&mut rng),
                u.sample(&mut rng),
                v.sample(&mut rng),
                u.sample(&mut rng),
                u.sample(&mut rng),
                v.sample(&mut rng),
            ])
        })
        .collect()
}

#[test]
fn noise_fit_is_stationary_under_error_scaling() {
    let errors = anisotropic_errors(500, 2.0, 0.5, 1);
    let weights = vec![1.0; errors.len()];
    let fit = fit_cauchy_noise(&errors, &weights, &SqrtInformation::identity(6)).unwrap();
    let s = 3.0;
    let scaled: Vec<_> = errors.iter().map(|e| e.scaled(s)).collect();
    let compensated = SqrtInformation::new(fit.noise.matrix() / s).unwrap();
    let refit = fit_cauchy_noise(&scaled, &weights, &compensated).unwrap();
    let moved = (refit.noise.matrix() - compensated.matrix()).amax();
    assert!(moved < 1e-6, "{moved}");
    // The data term is unchanged by the compensation.
    let data = |es: &[ErrorVec], l: &SqrtInformation| -> f64 { es.iter().map(|e| l.mahalanobis_sq(e.as_slice()).ln_1p()).sum() };
    assert!((data(&errors, &fit.noise) - data(&scaled, &compensated)).abs() < 1e-9);
}

#[test]
fn noise_fit_recovers_axis_ratio() {
    let errors = anisotropic_errors(2000, 2.0, 0.5, 2);
    let fit = fit_cauchy_noise(&errors, &vec![1.0; errors.len()], &SqrtInformation::identity(6)).unwrap();
    let cov = fit.noise.covariance();
    let ratio = (cov[(0, 0)] / cov[(2, 2)]).sqrt();
    assert!((2.0..=8.0).contains(&ratio), "{ratio}");
}

#[test]
fn identity_noise_has_zero_normalizer() {
    let errors = anisotropic_errors(10, 1.0, 1.0, 3);
    let c = total_cost(&NoiseModel::Cauchy(SqrtInformation::identity(6)), &errors, &[1.0; 10]).unwrap();
    assert_eq!(c.normalization_cost, 0.0);
}

#[test]
fn structure_helps_under_noise() {
    let scene = SceneConfig::default().with_sigma(0.5);
    let (mut motion_sum, mut ba_sum, mut wins) = (0.0, 0.0, 0);
    for seed in 0..60 {
        let pair = generate_pair(&SceneConfig { seed, ..scene.clone() }, &calib(), 1).unwrap();
        let data = inliers(&pair);
        let motion = refine(RefinementScope::MotionOnly, &pair.motion, &data, &calib(), &NoiseModel::Gaussian).unwrap();
        let ba = refine(RefinementScope::MotionStructure, &motion.pose, &data, &calib(), &NoiseModel::Gaussian).unwrap();
        let (em, eb) = (pose_error(&motion.pose, &pair.motion), pose_error(&ba.pose, &pair.motion));
        motion_sum += em;
        ba_sum += eb;
        wins += usize::from(eb <= em);
    }
    assert!(ba_sum < motion_sum, "{ba_sum} vs {motion_sum}");
    assert!(wins >= 36, "{wins}/60");
}

#[test]
fn noise_scope_recovers_anisotropy() {
    let mut ratios: Vec<f64> = (0..20)
        .map(|seed| {
            let scene = SceneConfig {
                seed,
                sigma_u: 2.0,
                sigma_v: 0.5,
                ..SceneConfig::default()
            };
            let pair = generate_pair(&scene, &calib(), 1).unwrap();
            let model = NoiseModel::Cauchy(SqrtInformation::identity(6));
            let r = refine(RefinementScope::MotionStructureNoise, &pair.motion, &inliers(&pair), &calib(), &model).unwrap();
            let cov = r.noise.unwrap().covariance();
            (cov[(0, 0)] / cov[(2, 2)]).sqrt()
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[9] + ratios[10]);
    assert!((2.0..=8.0).contains(&median), "{median}");
}
