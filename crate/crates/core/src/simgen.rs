//! Simulation designs used for benchmarks and acceptance checks.
//!
//! * Univariate: 10 relevant and 10 irrelevant uniform covariates; the
//!   response is a two-component normal mixture at `±floor(sum of relevant)`.
//! * Joint: one uniform covariate and a bivariate response on a nested
//!   triangular support.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::Scalar;

pub const N_RELEVANT: usize = 10;
pub const N_IRRELEVANT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateSimConfig {
    pub n: usize,
    /// Noise standard deviation of each mixture component.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for UnivariateSimConfig {
    fn default() -> Self {
        UnivariateSimConfig {
            n: 1000,
            sigma: 1.0,
            seed: 0,
        }
    }
}

fn mode_of(relevant: impl IntoIterator<Item = f64>) -> f64 {
    relevant.into_iter().sum::<f64>().floor()
}

/// Columns `0..10` relevant, `10..20` irrelevant; response is `n x 1`.
pub fn gen_univariate<T: Scalar>(cfg: &UnivariateSimConfig) -> (Array2<T>, Array2<T>) {
    let (x, z, _) = gen_univariate_labeled(cfg);
    (x, z)
}

/// [`gen_univariate`] plus the latent mixture label of each row (`true` for the positive mode).
pub fn gen_univariate_labeled<T: Scalar>(
    cfg: &UnivariateSimConfig,
) -> (Array2<T>, Array2<T>, Vec<bool>) {
    let mut labels = Vec::with_capacity(cfg.n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = N_RELEVANT + N_IRRELEVANT;
    let mut x = Array2::<T>::zeros((cfg.n, p));
    let mut z = Array2::<T>::zeros((cfg.n, 1));
    let mut row = vec![0.0f64; p];
    for i in 0..cfg.n {
        for v in row.iter_mut() {
            *v = rng.random();
        }
        let m = mode_of(row[..N_RELEVANT].iter().copied());
        let positive = rng.random_bool(0.5);
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(positive);
        let centre = if positive { m } else { -m };
        for (dst, &v) in x.row_mut(i).iter_mut().zip(&row) {
            *dst = T::of(v);
        }
        z[[i, 0]] = T::of(centre + cfg.sigma * noise);
    }
    (x, z, labels)
}

fn normal_pdf(z: f64, mean: f64, sd: f64) -> f64 {
    let u = (z - mean) / sd;
    (-0.5 * u * u).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// True conditional density of the univariate design at `(x, z)`.
pub fn true_density_univariate(x: &[f64], z: f64, sigma: f64) -> f64 {
    let m = mode_of(x[..N_RELEVANT].iter().copied());
    0.5 * normal_pdf(z, m, sigma) + 0.5 * normal_pdf(z, -m, sigma)
}

/// Law of the second response in the joint design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondResponse {
    /// `z2 ~ Uniform(z1, x)`: support `0 <= z1 <= z2 <= x`.
    #[default]
    BetweenFirstAndX,
    /// `z2 ~ Uniform(x, 1)`.
    AboveX,
}

impl SecondResponse {
    /// Whether `(z1, z2)` lies in the true support for covariate `x`.
    pub fn in_support(&self, x: f64, z1: f64, z2: f64) -> bool {
        match self {
            SecondResponse::BetweenFirstAndX => 0.0 <= z1 && z1 <= z2 && z2 <= x,
            SecondResponse::AboveX => 0.0 <= z1 && z1 <= x && x <= z2 && z2 <= 1.0,
        }
    }
}

/// `x ~ U(0,1)`, `z1 ~ U(0,x)`, `z2` per `law`. Returns `(n x 1, n x 2)`.
pub fn gen_joint<T: Scalar>(n: usize, seed: u64, law: SecondResponse) -> (Array2<T>, Array2<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<T>::zeros((n, 1));
    let mut z = Array2::<T>::zeros((n, 2));
    for i in 0..n {
        let xv: f64 = rng.random();
        let z1 = xv * rng.random::<f64>();
        let u: f64 = rng.random();
        let z2 = match law {
            SecondResponse::BetweenFirstAndX => z1 + (xv - z1) * u,
            SecondResponse::AboveX => xv + (1.0 - xv) * u,
        };
        x[[i, 0]] = T::of(xv);
        z[[i, 0]] = T::of(z1);
        z[[i, 1]] = T::of(z2);
    }
    (x, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
        gen_univariate(&UnivariateSimConfig { n, sigma: 1.0, seed })
    }

    #[test]
    fn univariate_shape_and_determinism() {
        let (x, z) = sim(5, 7);
        assert_eq!(x.dim(), (5, 20));
        assert_eq!(z.dim(), (5, 1));
        assert_eq!(sim(5, 7), (x.clone(), z));
        assert_ne!(sim(5, 8).0, x);
        assert!(x.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn univariate_moments() {
        let n = 100_000;
        let (x, z) = sim(n, 1);
        let mean = z.sum() / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");

        for i in 0..n {
            let m = mode_of(x.row(i).iter().take(N_RELEVANT).copied());
            assert!((0.0..=10.0).contains(&m));
        }
        let (_, _, labels) = gen_univariate_labeled::<f64>(&UnivariateSimConfig { n, sigma: 1.0, seed: 1 });
        let frac = labels.iter().filter(|&&s| s).count() as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.005, "positive fraction {frac}");

        for c in N_RELEVANT..N_RELEVANT + N_IRRELEVANT {
            let col = x.column(c);
            let mx = col.sum() / n as f64;
            let cov = col.iter().zip(z.column(0)).map(|(a, b)| (a - mx) * (b - mean)).sum::<f64>();
            let vx = col.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
            let vz = z.column(0).iter().map(|b| (b - mean) * (b - mean)).sum::<f64>();
            let corr = cov / (vx * vz).sqrt();
            assert!(corr.abs() < 0.02, "column {c} corr {corr}");
        }
    }

    #[test]
    fn true_density_values() {
        let mut x = [0.0; 20];
        // mode 0: both components coincide
        assert!((true_density_univariate(&x, 0.3, 1.0) - normal_pdf(0.3, 0.0, 1.0)).abs() < 1e-15);
        x[..10].fill(0.55);
        let v = true_density_univariate(&x, 0.0, 1.0);
        assert!((v - 1.4867e-6).abs() < 1e-9, "{v}");

        let sigma = 1.0;
        let m = 5.0;
        let (lo, hi) = (-m - 6.0 * sigma, m + 6.0 * sigma);
        let pts = 10_001;
        let step = (hi - lo) / (pts - 1) as f64;
        let mut integral = 0.0;
        for i in 0..pts {
            let w = if i == 0 || i == pts - 1 { 0.5 } else { 1.0 };
            integral += w * true_density_univariate(&x, lo + step * i as f64, sigma);
        }
        integral *= step;
        assert!((integral - 1.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn joint_support_and_moments() {
        let n = 100_000;
        let (x, z) = gen_joint::<f64>(n, 3, SecondResponse::default());
        for i in 0..n {
            let (xv, z1, z2) = (x[[i, 0]], z[[i, 0]], z[[i, 1]]);
            assert!(0.0 <= z1 && z1 <= z2 && z2 <= xv && xv <= 1.0);
        }
        let mean_z1 = z.column(0).sum() / n as f64;
        assert!((mean_z1 - 0.25).abs() < 0.01, "{mean_z1}");
        assert_eq!(gen_joint::<f64>(n, 3, SecondResponse::default()), (x, z));
    }

    #[test]
    fn joint_alternative_law() {
        let (x, z) = gen_joint::<f64>(2000, 4, SecondResponse::AboveX);
        for i in 0..2000 {
            assert!(SecondResponse::AboveX.in_support(x[[i, 0]], z[[i, 0]], z[[i, 1]]));
        }
    }
}
