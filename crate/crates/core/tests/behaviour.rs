mod common;

use common::*;
use edpmoe::gp::{self, log_marginal};
use edpmoe::input_models::SuffStats;
use edpmoe::prediction::{PredictSettings, Predictor};
use edpmoe::sampler::{leapfrog_energy_error, run, run_with, Chain, RunSettings, Schedule};
use edpmoe::special::normal_ln_pdf;
use edpmoe::summary::{psm_y, vi_distance, vi_point_estimate, SummaryOptions};
use edpmoe::synthetic::{generate, sample_inputs, DampedCosineConfig};
use edpmoe::{
    ConcentrationParams, Dataset, ExpertParams, InputFamily, NestedPartition, OutputKind, PriorConfig, SamplerState,
    ScalarPrior,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn params1(l: f64) -> ExpertParams {
    ExpertParams { noise_var: 0.2, mean: 0.5, magnitude: 0.8, length_scales: vec![l] }
}

fn refs(xs: &[Vec<f64>]) -> Vec<&[f64]> {
    xs.iter().map(Vec::as_slice).collect()
}

// ------------------------------------------------------------ input models

#[test]
fn sufficient_statistics_by_hand() {
    let nig = [InputFamily::default_gaussian(0.0)];
    let s = SuffStats::from_rows(&nig, [[1.0].as_slice()]);
    assert_eq!(s.count(), 1);
    assert_eq!(s.dims()[0], edpmoe::input_models::DimStats::Gaussian { sum: 1.0, sum_sq: 1.0 });

    let cat = [InputFamily::CategoricalDirichlet { gamma: vec![1.0; 3] }];
    let s = SuffStats::from_rows(&cat, [[0.0].as_slice(), &[0.0], &[2.0]]);
    assert_eq!(s.dims()[0], edpmoe::input_models::DimStats::Categorical { counts: vec![2, 0, 1] });
}

#[test]
fn nig_predictive_after_two_points_matches_quadrature() {
    let (u0, c, a, b) = (0.0, 1.0, 2.0, 1.0);
    let spec = [InputFamily::GaussianNig { u0, c, a, b }];
    let s = SuffStats::from_rows(&spec, [[1.0].as_slice(), &[2.0]]);
    let lib = s.ln_predictive(&[1.5], &spec);
    let oracle = nig_joint_by_quadrature(&[1.0, 2.0, 1.5], u0, c, a, b) - nig_joint_by_quadrature(&[1.0, 2.0], u0, c, a, b);
    assert!((lib - oracle).abs() < 1e-8, "{lib} vs {oracle}");
}

// ---------------------------------------------------------------------- GP

#[test]
fn long_length_scales_approach_the_constant_kernel() {
    let xs: Vec<Vec<f64>> = vec![vec![0.0], vec![1.3], vec![-2.0]];
    let y = [0.4, 1.1, -0.3];
    let p = params1(1e6);
    let lib = log_marginal(&y, &refs(&xs), &p).unwrap();
    let cov = DMatrix::from_fn(3, 3, |i, j| p.magnitude + if i == j { p.noise_var } else { 0.0 });
    let r = DVector::from_iterator(3, y.iter().map(|v| v - p.mean));
    let chol = cov.clone().cholesky().unwrap();
    let quad = r.dot(&chol.solve(&r));
    let ln_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let oracle = -0.5 * (quad + ln_det + 3.0 * (2.0 * std::f64::consts::PI).ln());
    assert!((lib - oracle).abs() < 1e-6, "{lib} vs {oracle}");
}

#[test]
fn conditional_and_prediction_match_two_by_two_formulas() {
    let p = params1(1.0);
    let (x1, x2) = (vec![0.0], vec![0.7]);
    let (y1, y2) = (0.9, 0.2);
    let k12 = gp::kernel(&x1, &x2, &p);
    let v = p.magnitude + p.noise_var;
    // y2 | y1 is normal with the usual bivariate conditional moments.
    let m = p.mean + k12 / v * (y1 - p.mean);
    let s2 = v - k12 * k12 / v;
    let lib = gp::log_conditional_block(&[y2], &[&x2], &[y1], &[&x1], &p).unwrap();
    assert!((lib - normal_ln_pdf(y2, m, s2)).abs() < 1e-12);

    // Prediction from two points: k*^T K^-1 (y - beta0) with an explicit 2x2 inverse.
    let xs = vec![x1.clone(), x2.clone()];
    let x_star = [0.3];
    let ks = [gp::kernel(&x_star, &x1, &p), gp::kernel(&x_star, &x2, &p)];
    let det = v * v - k12 * k12;
    let inv = [[v / det, -k12 / det], [-k12 / det, v / det]];
    let r = [y1 - p.mean, y2 - p.mean];
    let mean = p.mean + (0..2).map(|i| ks[i] * (0..2).map(|j| inv[i][j] * r[j]).sum::<f64>()).sum::<f64>();
    let var = p.magnitude - (0..2).map(|i| ks[i] * (0..2).map(|j| inv[i][j] * ks[j]).sum::<f64>()).sum::<f64>() + p.noise_var;
    let (lm, lv) = gp::predict(&x_star, &[y1, y2], &refs(&xs), &p).unwrap();
    assert!((lm - mean).abs() < 1e-10 && (lv - var).abs() < 1e-10, "({lm}, {lv}) vs ({mean}, {var})");
}

#[test]
fn leapfrog_energy_error_is_second_order() {
    let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.5]).collect();
    let y: Vec<f64> = xs.iter().map(|x| (x[0]).sin()).collect();
    let p = params1(1.0);
    let priors = PriorConfig::damped_cosine(1);
    let momentum = [0.3, -0.5, 0.8, 0.2];
    // Fixed integration time, tenfold change in step size.
    let err = |eps: f64| leapfrog_energy_error(&y, &refs(&xs), &p, &priors, eps, (0.5 / eps).round() as usize, &momentum).unwrap().abs();
    let (coarse, fine) = (err(0.02), err(0.002));
    let order = (coarse / fine).log10();
    assert!((1.5..2.5).contains(&order), "observed order {order} ({coarse:e} vs {fine:e})");
}

// ------------------------------------------------------------------ sampler

fn small_data(n: usize, seed: u64) -> Dataset {
    generate(&DampedCosineConfig::new(n, 1, seed)).unwrap().data
}

#[test]
fn same_seed_gives_identical_draws_and_burn_in_plus_one_keeps_one() {
    let data = small_data(20, 2);
    let priors = PriorConfig::damped_cosine(1);
    let settings = RunSettings { iters: 25, burn_in: 15, thin: 3, seed: 9, schedule: Schedule::default() };
    let a = run(&data, &priors, &settings).unwrap();
    let b = run(&data, &priors, &settings).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iterations, vec![18, 21, 24]);
    // Gaussian outputs are their own latent values.
    assert!(a.states.iter().all(|s| s.latent == data.outputs()));

    let one = run(&data, &priors, &RunSettings { iters: 16, burn_in: 15, thin: 1, ..settings }).unwrap();
    assert_eq!(one.len(), 1);
}

#[test]
fn vanishing_concentrations_keep_one_cluster() {
    let prob = FrozenProblem::new(5);
    let mut priors = prob.priors.clone();
    priors.alpha_theta = ScalarPrior::fixed(1e-12);
    priors.alpha_psi = ScalarPrior::fixed(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut chain = Chain::new(&prob.data, &priors, Schedule::partition_only(), &mut rng).unwrap();
    for _ in 0..2000 {
        chain.iterate(false, &mut rng).unwrap();
        assert_eq!(chain.to_state().partition, NestedPartition::one_cluster(5));
    }
}

#[test]
fn hmc_recovers_noise_variance_of_one_expert() {
    let truth = ExpertParams { noise_var: 0.05, mean: 0.0, magnitude: 1.0, length_scales: vec![1.0] };
    let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.6]).collect();
    let cov = gp::covariance(&refs(&xs), &truth);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let z = DVector::from_fn(10, |_, _| StandardNormal.sample(&mut rng));
    let y = cov.cholesky().unwrap().l() * z;
    let data = Dataset::new(xs, y.iter().copied().collect(), OutputKind::Gaussian, vec![InputFamily::default_gaussian(2.7)]).unwrap();
    let mut priors = PriorConfig::damped_cosine(1);
    priors.noise_var = ScalarPrior::LogNormal { mu: 0.1f64.ln(), sigma2: 1.0 };
    let schedule = Schedule { gibbs: false, y_moves: false, x_split_merge: false, concentrations: false, ..Schedule::default() };
    let draws = run_with(&data, &priors, &RunSettings { iters: 5000, burn_in: 1000, thin: 1, seed: 5, schedule }, None, None).unwrap();
    let mut s2: Vec<f64> = draws.states.iter().map(|s| s.experts[0].noise_var).collect();
    s2.sort_by(f64::total_cmp);
    let median = s2[s2.len() / 2];
    assert!(median > truth.noise_var / 2.0 && median < truth.noise_var * 2.0, "median noise variance {median}");
}

// --------------------------------------------------------------- prediction

fn one_cluster_state(n: usize, p: ExpertParams, alpha_theta: f64, alpha_psi: f64, latent: Vec<f64>) -> SamplerState {
    SamplerState {
        partition: NestedPartition::one_cluster(n),
        experts: vec![p],
        conc: ConcentrationParams { alpha_theta, alpha_psi: vec![alpha_psi] },
        latent,
    }
}

#[test]
fn new_cluster_odds_equal_n_over_alpha_when_inputs_are_uninformative() {
    // With counts (1, 1) under a uniform Dirichlet the input predictive is the prior one.
    let spec = vec![InputFamily::CategoricalDirichlet { gamma: vec![1.0, 1.0] }];
    let data = Dataset::new(vec![vec![0.0], vec![1.0]], vec![0.3, -0.2], OutputKind::Gaussian, spec).unwrap();
    let p = ExpertParams { noise_var: 0.1, mean: 0.0, magnitude: 1.0, length_scales: vec![1.0] };
    let states = vec![one_cluster_state(2, p.clone(), 0.7, 1.3, vec![0.3, -0.2])];
    let priors = fixed_priors(1, &p);
    let pred = Predictor::from_states(&data, &states, &priors, false, PredictSettings::default()).unwrap();
    let w = pred.weights(&[0.0]).unwrap();
    assert!((w.cluster_weight(0, 0) / w.new_weight(0) - 2.0 / 0.7).abs() < 1e-12);
    assert!((w.total() - 1.0).abs() < 1e-12);
}

fn gp_instance() -> (Dataset, Vec<SamplerState>, PriorConfig, ExpertParams) {
    let xs: Vec<Vec<f64>> = vec![vec![0.0], vec![0.8], vec![2.0]];
    let ys = vec![0.2, 0.9, -0.1];
    let data = Dataset::new(xs, ys.clone(), OutputKind::Gaussian, vec![InputFamily::default_gaussian(0.9)]).unwrap();
    let p = params1(0.9);
    let states = vec![one_cluster_state(3, p.clone(), 1e-300, 1e-300, ys)];
    let priors = fixed_priors(1, &p);
    (data, states, priors, p)
}

#[test]
fn degenerate_weights_reduce_to_the_cluster_gp() {
    let (data, states, priors, p) = gp_instance();
    let pred = Predictor::from_states(&data, &states, &priors, false, PredictSettings::default()).unwrap();
    let rows: Vec<&[f64]> = (0..3).map(|i| data.row(i)).collect();
    let x = [1.1];
    let (m, v) = gp::predict(&x, data.outputs(), &rows, &p).unwrap();
    assert!((pred.predictive_mean(&x).unwrap() - m).abs() < 1e-12);
    for y in [-1.0, 0.3, 2.0] {
        let d = pred.predictive_density(y, &x).unwrap();
        assert!((d.ln() - normal_ln_pdf(y, m, v)).abs() < 1e-10);
    }
}

#[test]
fn predictive_mean_matches_quadrature_and_reverts_far_away() {
    let (data, mut states, _, p) = gp_instance();
    states[0].conc = ConcentrationParams { alpha_theta: 0.8, alpha_psi: vec![0.5] };
    let priors = PriorConfig { mc_samples: 400, ..PriorConfig::damped_cosine(1) };
    let pred = Predictor::from_states(&data, &states, &priors, false, PredictSettings { mc_samples: 400, ..Default::default() }).unwrap();
    let x = [0.5];
    let quad = integrate(&|y| y * pred.predictive_density(y, &x).unwrap(), -15.0, 15.0, 1e-8);
    // The mean uses the exact prior mean of beta_0, the density its Monte Carlo average.
    let new = pred.new_cluster_sample();
    let mc_beta = new.params.iter().map(|p| p.mean).sum::<f64>() / new.params.len() as f64;
    let mix = pred.mixture(&x).unwrap();
    let mean = pred.predictive_mean(&x).unwrap() + mix.new_weight * (mc_beta - new.mean_beta);
    assert!((quad - mean).abs() < 1e-3, "{quad} vs {mean}");

    let far = pred.predictive_mean(&[1e6 * p.length_scales[0]]).unwrap();
    let mu_beta = pred.new_cluster_sample().mean_beta;
    assert!(far >= mu_beta.min(p.mean) - 1e-9 && far <= mu_beta.max(p.mean) + 1e-9, "{far}");
    let w = pred.weights(&[0.5]).unwrap();
    assert!(w.draws.iter().all(|d| d.ln_new.is_finite() && d.ln_clusters.iter().all(|c| c.is_finite())));
}

#[test]
fn bimodal_predictive_on_the_benchmark() {
    let sim = generate(&DampedCosineConfig::new(200, 1, 1)).unwrap();
    let priors = PriorConfig::damped_cosine(1);
    let draws = run(&sim.data, &priors, &RunSettings { iters: 1500, burn_in: 500, thin: 5, seed: 1, schedule: Schedule::default() }).unwrap();
    let pred = Predictor::new(&sim.data, &draws, PredictSettings { mc_samples: 200, ..Default::default() }).unwrap();
    let mix = pred.mixture(&[4.0]).unwrap();
    let new = pred.new_cluster_sample();
    let grid: Vec<f64> = (0..=600).map(|i| -1.5 + i as f64 * 0.005).collect();
    let dens: Vec<f64> = grid.iter().map(|&y| mix.density(y, new)).collect();
    let modes: Vec<f64> = (1..grid.len() - 1).filter(|&i| dens[i] > dens[i - 1] && dens[i] >= dens[i + 1]).map(|i| grid[i]).collect();
    let truth = sim.truth;
    for c in 0..2 {
        let target = truth.component_mean(c, 4.0);
        assert!(modes.iter().any(|m| (m - target).abs() < 0.1), "no mode near {target}: {modes:?}");
    }
}

// ----------------------------------------------------------------- summary

#[test]
fn vi_matches_a_hand_contingency_table() {
    let a = [0, 0, 0, 1, 1, 1];
    let b = [0, 0, 1, 1, 2, 2];
    let (ln2, ln3, ln6) = (2f64.ln(), 3f64.ln(), 6f64.ln());
    // Cells (0,0):2, (0,1):1, (1,1):1, (1,2):2; H(a) = ln 2, H(b) = ln 3.
    let h_joint = 2.0 / 3.0 * ln3 + 1.0 / 3.0 * ln6;
    let expected = 2.0 * h_joint - ln2 - ln3;
    assert!((vi_distance(&a, &b).unwrap() - expected).abs() < 1e-14);
}

#[test]
fn single_draw_similarity_is_binary_and_majority_partition_wins() {
    let one = vec![NestedPartition::new(vec![0, 1, 0, 2], vec![0; 4]).unwrap()];
    let m = psm_y(&one).unwrap();
    assert!((0..4).all(|i| (0..4).all(|j| m.get(i, j) == 0.0 || m.get(i, j) == 1.0)));

    let major = vec![0, 0, 1, 1];
    let draws: Vec<NestedPartition> = [major.clone(), major.clone(), vec![0, 1, 1, 1]]
        .into_iter()
        .map(|z| NestedPartition::new(z, vec![0; 4]).unwrap())
        .collect();
    let est = vi_point_estimate(&draws, &SummaryOptions::default()).unwrap();
    // Exhaustive average VI over all 15 partitions of four items.
    let avg = |c: &[usize]| draws.iter().map(|d| vi_distance(c, d.zy()).unwrap()).sum::<f64>() / 3.0;
    let best = set_partitions(4).into_iter().min_by(|a, b| avg(a).total_cmp(&avg(b))).unwrap();
    assert_eq!(best, major);
    assert_eq!(est.zy, major);
    assert!((est.expected_vi - avg(&major)).abs() < 1e-12);
}

// --------------------------------------------------------------- synthetic

#[test]
fn synthetic_inputs_and_density_have_the_stated_moments() {
    let cfg = DampedCosineConfig::new(10_000, 1, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs = sample_inputs(&cfg, 10_000, &mut rng).unwrap();
    let mean = xs.iter().map(|x| x[0]).sum::<f64>() / 1e4;
    let var = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / (1e4 - 1.0);
    assert!((var - 4.0).abs() < 0.4, "{var}");

    let truth = cfg.truth();
    for x1 in [0.0, 3.0, 6.5] {
        let mass = integrate(&|y| truth.density(y, x1), -4.0, 4.0, 1e-10);
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    }

    let sim = generate(&DampedCosineConfig::new(500, 5, 4)).unwrap();
    let mut labels = sim.labels.clone();
    labels.sort_unstable();
    labels.dedup();
    assert_eq!(labels.len(), 2);
}
