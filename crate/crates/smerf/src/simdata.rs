//! Simulated data families, the matching analytic distance oracles, and a
//! stochastic block model generator for desk-scale link-prediction runs.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{derive_stream, RngStream};
use crate::types::{DistanceMatrix, FeatureMatrix};

/// Input dimensionality of the simulated distance families.
pub const SIM_P: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// z = (y - y')^2 with y the noisy additive response of the first two
    /// features.
    RegressionDistance,
    /// q = y y' with noiseless responses; z = 1 - q.
    BilinearDistance,
    /// z = squared difference of the first-two-dimension norms on the unit
    /// ball.
    RadialDistance,
    /// y = x1^2 + x2^2 + N(0, 0.01) noise; z = (y - y')^2 / 2.
    AdditiveTheory,
}

#[derive(Debug, Clone)]
pub struct SimulatedSet {
    pub x: FeatureMatrix,
    pub z_true: DistanceMatrix,
    /// Similarity Q = 1 - Z, for the families where that conversion applies.
    pub q_true: Option<DistanceMatrix>,
    /// Latent responses, when the family has them.
    pub y: Option<Vec<f64>>,
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    Ok(())
}

fn pair_matrix(n: usize, f: impl Fn(usize, usize) -> f64) -> DistanceMatrix {
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = f(i, j);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    DistanceMatrix::from_flat(n, values).expect("constructed symmetric")
}

fn one_minus(z: &DistanceMatrix) -> DistanceMatrix {
    let values = z.values().iter().map(|&v| 1.0 - v).collect();
    DistanceMatrix::from_flat(z.n(), values).expect("constructed symmetric")
}

fn additive_response(x: &[f64]) -> f64 {
    0.5 * (x[0] + x[1])
}

/// Regression Distance family: features U(0.1, 0.9), y = (x1 + x2)/2 + eps
/// with eps ~ U(-0.1, 0.1), z = (y - y')^2.
pub fn gen_regression_distance(n: usize, seed: u64) -> Result<SimulatedSet> {
    check_n(n)?;
    let mut rng = derive_stream(seed, 0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..SIM_P).map(|_| rng.random_range(0.1..0.9)).collect())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| additive_response(r) + rng.random_range(-0.1..0.1))
        .collect();
    let z = pair_matrix(n, |i, j| {
        let d = y[i] - y[j];
        d * d
    });
    Ok(SimulatedSet {
        x: FeatureMatrix::from_rows(&rows)?,
        q_true: Some(one_minus(&z)),
        z_true: z,
        y: Some(y),
    })
}

/// Bilinear Distance family: features U(0, 1), noiseless responses,
/// similarity q = y y', z = 1 - q.
pub fn gen_bilinear_distance(n: usize, seed: u64) -> Result<SimulatedSet> {
    check_n(n)?;
    let mut rng = derive_stream(seed, 0);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..SIM_P).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| additive_response(r)).collect();
    let q = pair_matrix(n, |i, j| y[i] * y[j]);
    Ok(SimulatedSet {
        x: FeatureMatrix::from_rows(&rows)?,
        z_true: one_minus(&q),
        q_true: Some(q),
        y: Some(y),
    })
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Radial Distance family: points uniform in the 20-dimensional unit ball
/// (Gaussian direction times U^(1/20) radius), z = (|x^(1:2)| - |x'^(1:2)|)^2.
pub fn gen_radial_distance(n: usize, seed: u64) -> Result<SimulatedSet> {
    check_n(n)?;
    let mut rng = derive_stream(seed, 0);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut dir: Vec<f64> = (0..SIM_P).map(|_| normal.sample(&mut rng)).collect();
            let len = norm2(&dir);
            let radius: f64 = rng.random_range(0.0..1.0f64).powf(1.0 / SIM_P as f64);
            for v in &mut dir {
                *v *= radius / len;
            }
            dir
        })
        .collect();
    let radii: Vec<f64> = rows.iter().map(|r| norm2(&r[..2])).collect();
    let z = pair_matrix(n, |i, j| {
        let d = radii[i] - radii[j];
        d * d
    });
    Ok(SimulatedSet {
        x: FeatureMatrix::from_rows(&rows)?,
        q_true: Some(one_minus(&z)),
        z_true: z,
        y: Some(radii),
    })
}

/// Additive-theory family: p features uniform on [0,1] (only the first two
/// matter), y = x1^2 + x2^2 + N(0, 0.01), z = (y - y')^2 / 2.
pub fn gen_additive_theory(n: usize, p: usize, seed: u64) -> Result<SimulatedSet> {
    check_n(n)?;
    if p < 2 {
        return Err(Error::InvalidInput("additive theory family needs p >= 2".into()));
    }
    let mut rng = derive_stream(seed, 0);
    let normal = Normal::new(0.0, 0.1).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| r[0] * r[0] + r[1] * r[1] + normal.sample(&mut rng))
        .collect();
    let z = pair_matrix(n, |i, j| {
        let d = y[i] - y[j];
        0.5 * d * d
    });
    Ok(SimulatedSet {
        x: FeatureMatrix::from_rows(&rows)?,
        z_true: z,
        q_true: None,
        y: Some(y),
    })
}

/// Analytic expected distance E[Z | x, x'] for each family, used as test
/// ground truth.
///
/// For noisy families the additive constant is Var(eps - eps') scaled to the
/// family's distance definition: the regression family uses z = (y - y')^2
/// with uniform noise (variance 0.2^2/12 each), the theory family uses
/// z = (y - y')^2 / 2 with sigma^2 = 0.01 Gaussian noise.
pub fn bayes_distance_oracle(family: Family, x: &[f64], x_prime: &[f64]) -> f64 {
    match family {
        Family::RegressionDistance => {
            let d = additive_response(x) - additive_response(x_prime);
            let noise_var = 0.2 * 0.2 / 12.0;
            d * d + 2.0 * noise_var
        }
        Family::BilinearDistance => 1.0 - additive_response(x) * additive_response(x_prime),
        Family::RadialDistance => {
            let d = norm2(&x[..2]) - norm2(&x_prime[..2]);
            d * d
        }
        Family::AdditiveTheory => {
            let m = x[0] * x[0] + x[1] * x[1];
            let m_prime = x_prime[0] * x_prime[0] + x_prime[1] * x_prime[1];
            0.5 * (m - m_prime) * (m - m_prime) + 0.01
        }
    }
}

/// Stochastic block model adjacency plus noisy one-hot block attributes.
/// Each attribute bit is flipped independently with probability `attr_noise`.
pub fn gen_sbm_network(
    n: usize,
    blocks: usize,
    p_in: f64,
    p_out: f64,
    attr_noise: f64,
    seed: u64,
) -> Result<(DistanceMatrix, FeatureMatrix)> {
    check_n(n)?;
    if blocks < 2 || blocks > n {
        return Err(Error::InvalidInput("need 2 <= blocks <= n".into()));
    }
    for p in [p_in, p_out, attr_noise] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
    }
    let mut rng = derive_stream(seed, 0);
    let membership: Vec<usize> = (0..n).map(|i| i * blocks / n).collect();
    let mut adj = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let p = if membership[i] == membership[j] {
                p_in
            } else {
                p_out
            };
            if rng.random_bool(p) {
                adj[i * n + j] = 1.0;
                adj[j * n + i] = 1.0;
            }
        }
    }
    let rows: Vec<Vec<f64>> = membership
        .iter()
        .map(|&b| {
            (0..blocks)
                .map(|k| {
                    let bit = (k == b) as u8 as f64;
                    if attr_noise > 0.0 && rng.random_bool(attr_noise) {
                        1.0 - bit
                    } else {
                        bit
                    }
                })
                .collect()
        })
        .collect();
    Ok((
        DistanceMatrix::from_flat(n, adj)?,
        FeatureMatrix::from_rows(&rows)?,
    ))
}

/// Shared helper for tests and the CLI: derive a child RNG for replicate k.
pub fn replicate_stream(seed: u64, replicate: u64) -> RngStream {
    derive_stream(seed, replicate)
}
