//! Monte-Carlo check of the closed-form mixture posterior.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xdc_core::denoiser::MixtureComponent;
use xdc_core::{GaussianMixture, ImageGrid, NoiseSchedule};

/// Self-normalised importance estimate of `E[x0 | x_t]` with the prior as
/// proposal.
fn importance_mean(gmm: &GaussianMixture<f64>, x_t: &ImageGrid<f64>, ab: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (root, var) = (ab.sqrt(), 1.0 - ab);
    let dim = x_t.data().len();
    let draws: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|_| {
            let (_, x0) = gmm.sample(&mut rng);
            let sq: f64 = x_t.data().iter().zip(x0.data()).map(|(x, c)| (x - root * c).powi(2)).sum();
            (-sq / (2.0 * var), x0.into_data())
        })
        .collect();
    let max = draws.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    for (logw, x0) in &draws {
        let w = (logw - max).exp();
        total += w;
        for (a, v) in acc.iter_mut().zip(x0) {
            *a += w * v;
        }
    }
    acc.iter().map(|a| a / total).collect()
}

fn mixture() -> GaussianMixture<f64> {
    let a = ImageGrid::new(1, 3, 1, vec![0.5, -0.5, 0.25]).unwrap();
    let b = a.scale(-1.0);
    GaussianMixture::new(vec![
        MixtureComponent { weight: 0.4, mean: a, std: 0.3 },
        MixtureComponent { weight: 0.6, mean: b, std: 0.2 },
    ])
    .unwrap()
}

#[test]
fn posterior_mean_matches_importance_sampling() {
    let sched = NoiseSchedule::<f64>::linear(50).unwrap();
    let gmm = mixture();
    for (i, t) in [3usize, 8, 15].into_iter().enumerate() {
        let ab = sched.alpha_bar(t);
        let x_t = ImageGrid::new(1, 3, 1, vec![0.6, -0.45, 0.3]).unwrap().scale(ab.sqrt());
        let exact = gmm.posterior_mean(&x_t, t, &sched).unwrap();
        let mc = importance_mean(&gmm, &x_t, ab, 100_000, 40 + i as u64);
        let norm = exact.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = exact.data().iter().zip(&mc).map(|(e, m)| (e - m).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 0.02 * norm, "t = {t}: exact {:?}, monte carlo {mc:?}", exact.data());
    }
}

#[test]
fn responsibilities_match_importance_weights() {
    let sched = NoiseSchedule::<f64>::linear(50).unwrap();
    let gmm = mixture();
    let t = 10;
    let ab = sched.alpha_bar(t);
    let x_t = ImageGrid::new(1, 3, 1, vec![0.1, -0.05, 0.0]).unwrap();
    let exact = gmm.responsibilities(&x_t, t, &sched).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (root, var) = (ab.sqrt(), 1.0 - ab);
    let mut mass = [0.0f64; 2];
    for _ in 0..100_000 {
        let (k, x0) = gmm.sample(&mut rng);
        let sq: f64 = x_t.data().iter().zip(x0.data()).map(|(x, c)| (x - root * c).powi(2)).sum();
        mass[k] += (-sq / (2.0 * var)).exp();
    }
    let total = mass[0] + mass[1];
    for k in 0..2 {
        let mc = mass[k] / total;
        assert!((mc - exact[k]).abs() <= 0.02 * exact[k], "component {k}: {mc} vs {}", exact[k]);
    }
}
