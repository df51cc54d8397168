//! Independent reference values: the variance constant, the exact covariance,
//! a dense Gaussian sampler and naive recomputation of the moving-average sum.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::fbm::inv_gamma_shifted;
use crate::walk::TwoSidedBm;

/// Largest grid accepted by the dense sampler.
pub const MAX_REFERENCE_GRID: usize = 4096;

/// Variance of the normalised fBM at `t = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalizationConstant {
    pub hurst: f64,
    pub value: f64,
    pub error_estimate: f64,
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("hurst {h} is not in (0, 1)")))
    }
}

// ((1+s)^a - s^a)^2, written to avoid cancellation for large s.
fn integrand(s: f64, a: f64) -> f64 {
    let d = if s >= 1.0 {
        s.powf(a) * (a * (1.0 / s).ln_1p()).exp_m1()
    } else if s > 0.0 {
        (1.0 + s).powf(a) - s.powf(a)
    } else {
        return if a == 0.0 { 0.0 } else { 1.0 };
    };
    d * d
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

// Composite Gauss–Legendre over dyadic panels [2^i, 2^{i+1}], analytic ends.
fn dyadic_integral(a: f64, nodes: usize) -> f64 {
    const LO: i32 = -60;
    const HI: i32 = 60;
    let (x, w) = gauss_legendre(nodes);
    let eps = (LO as f64).exp2();
    // (1+s)^a ~ 1 near zero
    let mut total = eps - 2.0 * eps.powf(a + 1.0) / (a + 1.0) + eps.powf(2.0 * a + 1.0) / (2.0 * a + 1.0);
    for i in LO..HI {
        let (lo, hi) = ((i as f64).exp2(), ((i + 1) as f64).exp2());
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let panel: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| wi * integrand(mid + half * xi, a))
            .sum();
        total += half * panel;
    }
    // ((1+s)^a - s^a)^2 ~ a^2 s^{2a-2} far out
    let big = (HI as f64).exp2();
    total + a * a * big.powf(2.0 * a - 1.0) / (1.0 - 2.0 * a)
}

/// Same integral by the exp-sinh (double exponential) trapezoid rule.
pub fn integral_exp_sinh(a: f64, step: f64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut total = 0.0;
    let mut j: i64 = 0;
    loop {
        let mut added = 0.0;
        for t in [j as f64 * step, -(j as f64) * step] {
            let u = half_pi * t.sinh();
            if u > 700.0 {
                continue;
            }
            let s = u.exp();
            let ds = half_pi * t.cosh() * s;
            added += integrand(s, a) * ds;
            if j == 0 {
                break;
            }
        }
        total += added * step;
        j += 1;
        if (j as f64 * step > 3.0 && added.abs() < 1e-20) || half_pi * (j as f64 * step).sinh() > 700.0 {
            break;
        }
    }
    total
}

/// `V_H = Γ(H+1/2)^{-2} [ 1/(2H) + ∫_0^∞ ((1+s)^{H-1/2} - s^{H-1/2})^2 ds ]`.
pub fn variance_constant(hurst: f64) -> Result<NormalizationConstant> {
    check_hurst(hurst)?;
    let a = hurst - 0.5;
    let g = inv_gamma_shifted(hurst);
    if a == 0.0 {
        return Ok(NormalizationConstant {
            hurst,
            value: 1.0,
            error_estimate: 0.0,
        });
    }
    let fine = dyadic_integral(a, 20);
    let coarse = dyadic_integral(a, 12);
    let value = g * g * (0.5 / hurst + fine);
    Ok(NormalizationConstant {
        hurst,
        value,
        error_estimate: g * g * (fine - coarse).abs() + 1e-15 * value,
    })
}

/// Second estimate of `V_H` using the double exponential rule.
pub fn variance_constant_exp_sinh(hurst: f64) -> Result<NormalizationConstant> {
    check_hurst(hurst)?;
    let a = hurst - 0.5;
    let g = inv_gamma_shifted(hurst);
    let fine = integral_exp_sinh(a, 1.0 / 256.0);
    let coarse = integral_exp_sinh(a, 1.0 / 128.0);
    Ok(NormalizationConstant {
        hurst,
        value: g * g * (0.5 / hurst + fine),
        error_estimate: g * g * (fine - coarse).abs(),
    })
}

/// `(V_H / 2)(s^{2H} + t^{2H} - |t-s|^{2H})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceModel {
    pub hurst: f64,
    pub variance: f64,
}

impl CovarianceModel {
    pub fn new(hurst: f64) -> Result<Self> {
        let v = variance_constant(hurst)?;
        Ok(Self {
            hurst,
            variance: v.value,
        })
    }

    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        if s < 0.0 || t < 0.0 {
            return Err(Error::Domain(format!("negative time in covariance ({s}, {t})")));
        }
        let e = 2.0 * self.hurst;
        Ok(0.5 * self.variance * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e)))
    }

    pub fn matrix(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        let n = grid.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = self.cov(grid[i], grid[j])?;
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        Ok(m)
    }
}

pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    CovarianceModel::new(hurst)?.cov(s, t)
}

/// Dense Cholesky sampler of fBM on a fixed grid.
#[derive(Clone, Debug)]
pub struct ReferenceSampler {
    grid: Vec<f64>,
    // the grid point at time 0, if any, is excluded from the factor
    skip: usize,
    factor: DMatrix<f64>,
}

impl ReferenceSampler {
    pub fn new(grid: &[f64], hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        if grid.is_empty() || grid.len() > MAX_REFERENCE_GRID {
            return Err(invalid(
                "grid",
                format!("size {} is outside 1..={MAX_REFERENCE_GRID}", grid.len()),
            ));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] >= 0.0) {
            return Err(invalid("grid", "must be non-negative and strictly increasing"));
        }
        let skip = usize::from(grid[0] == 0.0);
        let model = CovarianceModel::new(hurst)?;
        let cov = model.matrix(&grid[skip..])?;
        let factor = Cholesky::new(cov)
            .ok_or_else(|| Error::Factorization("covariance matrix is not positive definite".into()))?
            .unpack();
        Ok(Self {
            grid: grid.to_vec(),
            skip,
            factor,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.factor.nrows();
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let x = &self.factor * z;
        let mut out = vec![0.0; self.skip];
        out.extend(x.iter());
        out
    }
}

pub fn reference_sample(grid: &[f64], hurst: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(ReferenceSampler::new(grid, hurst)?.sample(seed))
}

/// Left-to-right evaluation of the moving-average sum with weights recomputed
/// term by term from the definition.
pub fn brute_force_recompute(bm: &TwoSidedBm, m: u32, hurst: f64, k: usize, cutoff: u64) -> Result<f64> {
    check_hurst(hurst)?;
    if k == 0 {
        return Ok(0.0);
    }
    let a = hurst - 0.5;
    let scale = 2f64.powf(-2.0 * hurst * m as f64) / gamma(hurst + 0.5);
    let pw = |x: i64| if x > 0 { (x as f64).powf(a) } else { 0.0 };
    let mut acc = 0.0;
    for r in -(cutoff as i64)..(k as i64) {
        let w = scale * (pw(k as i64 - r) - pw(-r));
        acc += w * bm.step(m, r)? as f64;
    }
    Ok(acc)
}
