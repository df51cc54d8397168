//! Discrete moving-average approximation of fractional Brownian motion.
//!
//! At level `m` the value on the grid `t_k = k 4^{-m}` is
//!
//! ```text
//! B_m^H(t_k) = c_m * sum_{r=-V}^{k-1} [ (k-r)^a - (-r)_+^a ] X̃_m(r+1),
//! c_m = 4^{-Hm} / Γ(H + 1/2),   a = H - 1/2,   0^a := 0,
//! ```
//!
//! where `X̃_m(r+1)` for `r < 0` comes from the left hierarchy.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{RealFftPlanner, RealToComplex, ComplexToReal};
use statrs::function::gamma::gamma;

use crate::bits::SignVec;
use crate::error::{invalid, Error, Result};
use crate::walk::{grid_count, Hierarchy, TwoSidedBm};

/// Mandelbrot–van Ness kernel with Hurst index `H`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    hurst: f64,
    inv_gamma: f64,
}

impl Kernel {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(invalid("hurst", format!("{hurst} is not in (0, 1)")));
        }
        Ok(Self {
            hurst,
            inv_gamma: inv_gamma_shifted(hurst),
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// `H - 1/2`.
    pub fn exponent(&self) -> f64 {
        self.hurst - 0.5
    }

    /// `1 / Γ(H + 1/2)`.
    pub fn normalization(&self) -> f64 {
        self.inv_gamma
    }

    /// Convergence of the walk construction is only established for `H > 1/4`.
    pub fn is_convergence_proven(&self) -> bool {
        self.hurst > 0.25
    }

    /// `x^{H-1/2}` for `x > 0`, and `0` for `x <= 0`.
    #[inline]
    pub fn power(&self, x: f64) -> f64 {
        if x > 0.0 {
            x.powf(self.exponent())
        } else {
            0.0
        }
    }

    /// `h(s, t) = [(t-s)^a - (-s)_+^a] / Γ(H+1/2)`.
    pub fn h(&self, s: f64, t: f64) -> Result<f64> {
        if s > t {
            return Err(Error::Domain(format!("kernel needs s <= t, got s={s}, t={t}")));
        }
        Ok(self.inv_gamma * (self.power(t - s) - self.power(-s)))
    }

    /// `c_m = 4^{-Hm} / Γ(H+1/2)`.
    pub fn level_scale(&self, m: u32) -> f64 {
        (-2.0 * self.hurst * m as f64).exp2() * self.inv_gamma
    }
}

/// `1 / Γ(H + 1/2)`, exact at `H = 1/2`.
pub(crate) fn inv_gamma_shifted(hurst: f64) -> f64 {
    if hurst == 0.5 {
        1.0
    } else {
        1.0 / gamma(hurst + 0.5)
    }
}

pub fn kernel_h(s: f64, t: f64, kernel: &Kernel) -> Result<f64> {
    kernel.h(s, t)
}

/// How far into the past the moving average is summed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    /// Target ratio of the neglected tail's standard deviation to the total.
    pub epsilon: f64,
    /// Optional ceiling on the look-back, in time units.
    pub max_lookback: Option<f64>,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_lookback: Some(4.0),
        }
    }
}

impl TruncationPolicy {
    pub fn new(epsilon: f64, max_lookback: Option<f64>) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(invalid("epsilon", "must be positive and finite"));
        }
        if let Some(l) = max_lookback {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(invalid("lookback", "must be non-negative and finite"));
            }
        }
        Ok(Self {
            epsilon,
            max_lookback,
        })
    }

    /// Pure epsilon rule with no look-back ceiling.
    pub fn unbounded(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, None)
    }

    /// Cutoff `V` demanded by epsilon alone, before any ceiling.
    pub fn epsilon_cutoff(&self, k: usize, kernel: &Kernel) -> f64 {
        let a = kernel.exponent();
        if k == 0 || a == 0.0 {
            return 0.0;
        }
        let h = kernel.hurst();
        let kf = k as f64;
        let ratio = kf * kf * a * a / ((2.0 - 2.0 * h) * self.epsilon * self.epsilon * variance_floor(k, h));
        let v = 2.0 * ratio.powf(1.0 / (2.0 - 2.0 * h));
        v.ceil().min(MAX_CUTOFF)
    }

    /// Number of past steps `V` summed for grid index `k` at level `m`.
    pub fn cutoff(&self, k: usize, m: u32, kernel: &Kernel) -> u64 {
        let mut v = self.epsilon_cutoff(k, kernel);
        if let Some(l) = self.max_lookback {
            v = v.min((l * (2.0 * m as f64).exp2()).ceil());
        }
        v as u64
    }
}

const MAX_CUTOFF: f64 = 4.0e18;

// Lower bound on sum_{j=1}^k j^{2H-1}.
fn variance_floor(k: usize, h: f64) -> f64 {
    let kf = k as f64;
    if h >= 0.5 {
        kf.powf(2.0 * h) / (2.0 * h)
    } else {
        ((kf + 1.0).powf(2.0 * h) - 1.0) / (2.0 * h)
    }
}

/// Bound on the neglected tail standard deviation relative to the whole, for cutoff `v`.
pub fn tail_sd_ratio(k: usize, v: f64, kernel: &Kernel) -> f64 {
    let a = kernel.exponent();
    if k == 0 || a == 0.0 {
        return 0.0;
    }
    if v <= 0.0 {
        return f64::INFINITY;
    }
    let h = kernel.hurst();
    let kf = k as f64;
    let tail = kf * kf * a * a * v.powf(2.0 * h - 2.0) / (2.0 - 2.0 * h);
    (tail / variance_floor(k, h)).sqrt()
}

/// Moving-average weights for one grid index over `r = -V ..= k-1`.
#[derive(Clone, Debug)]
pub struct MovingAverageWeights {
    pub k: usize,
    pub level: u32,
    pub tail_cutoff_used: u64,
    pub tail_sd_ratio: f64,
    weights: Vec<f64>,
}

pub fn moving_average_weights(
    k: usize,
    m: u32,
    kernel: &Kernel,
    policy: &TruncationPolicy,
) -> Result<MovingAverageWeights> {
    if k == 0 {
        return Err(invalid("k", "grid index must be at least 1"));
    }
    let v = policy.cutoff(k, m, kernel);
    weights_with_cutoff(k, m, kernel, v)
}

/// Moving-average weights with an explicit cutoff.
pub fn weights_with_cutoff(k: usize, m: u32, kernel: &Kernel, v: u64) -> Result<MovingAverageWeights> {
    let vu = usize::try_from(v).map_err(|_| invalid("cutoff", "does not fit in memory"))?;
    let len = vu
        .checked_add(k)
        .filter(|&n| n <= 1 << 32)
        .ok_or_else(|| invalid("cutoff", format!("window of {v} + {k} weights is too large")))?;
    let c = kernel.level_scale(m);
    let kf = k as f64;
    let mut weights = Vec::with_capacity(len);
    for i in 0..len {
        let r = i as f64 - v as f64;
        weights.push(c * (kernel.power(kf - r) - kernel.power(-r)));
    }
    Ok(MovingAverageWeights {
        k,
        level: m,
        tail_cutoff_used: v,
        tail_sd_ratio: tail_sd_ratio(k, v as f64, kernel),
        weights,
    })
}

impl MovingAverageWeights {
    pub fn first_index(&self) -> i64 {
        -(self.tail_cutoff_used as i64)
    }

    /// Weights for `r = first_index() ..= k-1`.
    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, r: i64) -> f64 {
        let i = r - self.first_index();
        if i < 0 {
            return 0.0;
        }
        self.weights.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Applies the weights to the steps of `bm`, which must already cover the window.
    pub fn apply(&self, bm: &TwoSidedBm) -> Result<f64> {
        let v = self.tail_cutoff_used as usize;
        let m = self.level;
        let mut acc = 0.0;
        if v > 0 {
            let left = level_steps(bm.left(), m, v)?;
            // left step j sits at r = -1 - j and enters with a minus sign
            acc -= signed_dot(left, self.weights[..v].iter().rev());
        }
        let right = level_steps(bm.right(), m, self.k)?;
        acc += signed_dot(right, self.weights[v..v + self.k].iter());
        Ok(acc)
    }
}

// sum_j ±w_j with the sign taken from bit j of `steps`.
fn signed_dot<'a>(steps: &SignVec, weights: impl Iterator<Item = &'a f64>) -> f64 {
    let words = steps.words();
    let mut acc = [0.0f64; 4];
    for (j, &w) in weights.enumerate() {
        let bit = (words[j >> 6] >> (j & 63)) & 1;
        acc[j & 3] += f64::from_bits(w.to_bits() ^ ((bit ^ 1) << 63));
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

fn level_steps(h: &Hierarchy, m: u32, n: usize) -> Result<&SignVec> {
    let dt = (-2.0 * m as f64).exp2();
    match h.level(m) {
        Some(l) if l.len() >= n => Ok(l.twisted_steps()),
        l => Err(Error::OutOfHorizon {
            t: n as f64 * dt,
            lo: 0.0,
            hi: l.map_or(0, |l| l.len()) as f64 * dt,
        }),
    }
}

/// `B_m^H` on the grid `0..=N`, with interpolation between grid points.
#[derive(Clone, Debug)]
pub struct FbmLevelPath {
    pub level: u32,
    pub hurst: f64,
    pub horizon: f64,
    pub policy: TruncationPolicy,
    pub tail_cutoff_used: u64,
    pub tail_sd_ratio: f64,
    values: Vec<f64>,
}

impl FbmLevelPath {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dt(&self) -> f64 {
        (-2.0 * self.level as f64).exp2()
    }

    /// Last grid index.
    pub fn grid_count(&self) -> usize {
        self.values.len() - 1
    }

    /// `γ B(t_{k+1}) + (1-γ) B(t_k)` with `k = floor(t 4^m)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let x = t / self.dt();
        let n = self.grid_count();
        if !(t >= 0.0 && t <= self.horizon) || x > n as f64 {
            return Err(Error::Domain(format!(
                "t={t} outside [0, {}]",
                (n as f64 * self.dt()).min(self.horizon)
            )));
        }
        let k = x.floor() as usize;
        let g = x - k as f64;
        if k == n {
            return Ok(self.values[n]);
        }
        Ok(g * self.values[k + 1] + (1.0 - g) * self.values[k])
    }
}

/// Seed-independent part of a full-grid evaluation: cutoff, FFT plans, kernel spectrum.
pub struct FbmPlan {
    kernel: Kernel,
    level: u32,
    horizon: f64,
    policy: TruncationPolicy,
    n: usize,
    v: usize,
    size: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    spectrum: Vec<Complex<f64>>,
    tail_sd_ratio: f64,
}

impl std::fmt::Debug for FbmPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmPlan")
            .field("hurst", &self.kernel.hurst())
            .field("level", &self.level)
            .field("grid", &self.n)
            .field("cutoff", &self.v)
            .field("fft_size", &self.size)
            .finish()
    }
}

// Smallest 2^i 3^j >= n.
fn fast_len(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p3 = 1usize;
    while p3 < best {
        let mut x = p3;
        while x < n {
            x *= 2;
        }
        best = best.min(x);
        p3 *= 3;
    }
    best
}

impl FbmPlan {
    pub fn new(kernel: Kernel, m: u32, horizon: f64, policy: TruncationPolicy) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid("horizon", "must be positive and finite"));
        }
        let n = grid_count(horizon, m);
        let v64 = policy.cutoff(n, m, &kernel);
        let v = usize::try_from(v64)
            .ok()
            .filter(|&v| v <= 1 << 32)
            .ok_or_else(|| invalid("lookback", format!("cutoff {v64} is too large for a full grid")))?;
        let size = fast_len((v + 2 * n).max(2));
        let mut planner = RealFftPlanner::<f64>::new();
        let r2c = planner.plan_fft_forward(size);
        let c2r = planner.plan_fft_inverse(size);
        let mut g = r2c.make_input_vec();
        for (j, x) in g.iter_mut().enumerate().take(v + n + 1).skip(1) {
            *x = kernel.power(j as f64);
        }
        let mut spectrum = r2c.make_output_vec();
        r2c.process(&mut g, &mut spectrum)
            .map_err(|e| Error::Domain(e.to_string()))?;
        Ok(Self {
            kernel,
            level: m,
            horizon,
            policy,
            n,
            v,
            size,
            r2c,
            c2r,
            spectrum,
            tail_sd_ratio: tail_sd_ratio(n, v as f64, &kernel),
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Last grid index `N = floor(K 4^m)`.
    pub fn grid_count(&self) -> usize {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.v
    }

    /// Extends `bm` far enough for this plan.
    pub fn prepare(&self, bm: &mut TwoSidedBm) -> Result<()> {
        bm.ensure_steps(self.level, self.n, self.v)
    }

    /// Grid values from an already-extended walk.
    pub fn grid_values(&self, bm: &TwoSidedBm) -> Result<FbmLevelPath> {
        let (n, v) = (self.n, self.v);
        let z = bm.increments(self.level, v, n)?;
        let mut values = vec![0.0; n + 1];
        if n > 0 && self.kernel.exponent() == 0.0 {
            let c = self.kernel.level_scale(self.level);
            let mut s = 0.0;
            for k in 1..=n {
                s += z[v + k - 1];
                values[k] = c * s;
            }
        } else if n > 0 {
            let c0: f64 = (0..v)
                .map(|i| self.kernel.power((v - i) as f64) * z[i])
                .sum();
            let mut buf = self.r2c.make_input_vec();
            buf[..z.len()].copy_from_slice(&z);
            drop(z);
            let mut spec = self.r2c.make_output_vec();
            self.r2c
                .process(&mut buf, &mut spec)
                .map_err(|e| Error::Domain(e.to_string()))?;
            for (x, g) in spec.iter_mut().zip(&self.spectrum) {
                *x *= g;
            }
            self.c2r
                .process(&mut spec, &mut buf)
                .map_err(|e| Error::Domain(e.to_string()))?;
            let c = self.kernel.level_scale(self.level) / self.size as f64;
            let c0 = c0 * self.size as f64;
            for k in 1..=n {
                values[k] = c * (buf[v + k] - c0);
            }
        }
        Ok(FbmLevelPath {
            level: self.level,
            hurst: self.kernel.hurst(),
            horizon: self.horizon,
            policy: self.policy,
            tail_cutoff_used: v as u64,
            tail_sd_ratio: self.tail_sd_ratio,
            values,
        })
    }

    /// Extends `bm` and evaluates the grid.
    pub fn run(&self, bm: &mut TwoSidedBm) -> Result<FbmLevelPath> {
        self.prepare(bm)?;
        self.grid_values(bm)
    }
}

/// `B_m^H(t_k)` for `0 <= t_k <= K`, extending `bm` as needed.
pub fn fbm_grid_values(
    bm: &mut TwoSidedBm,
    m: u32,
    kernel: &Kernel,
    horizon: f64,
    policy: &TruncationPolicy,
) -> Result<FbmLevelPath> {
    FbmPlan::new(*kernel, m, horizon, *policy)?.run(bm)
}

/// Summation-by-parts form over the finite window `[-V, k]`:
/// `sum_{r=-V+1}^{k} [h(t_{r-1}, t_k) - h(t_r, t_k)] B_m(t_r) - h(t_{-V}, t_k) B_m(t_{-V})`.
pub fn summation_by_parts_value(bm: &TwoSidedBm, m: u32, kernel: &Kernel, k: usize, v: usize) -> Result<f64> {
    if k == 0 {
        return Ok(0.0);
    }
    let dt = (-2.0 * m as f64).exp2();
    let tk = k as f64 * dt;
    let b = |r: i64| -> Result<f64> {
        let (h, idx) = if r >= 0 { (bm.right(), r as usize) } else { (bm.left(), (-r) as usize) };
        h.bm(m)?.value_at_index(idx)
    };
    let h = |r: i64| kernel.h(r as f64 * dt, tk);
    let lo = -(v as i64);
    let mut acc = 0.0;
    for r in (lo + 1)..=(k as i64) {
        acc += (h(r - 1)? - h(r)?) * b(r)?;
    }
    acc -= h(lo)? * b(lo)?;
    Ok(acc)
}

/// `sum_r weight(r)^2` for grid index `k` at level `m` under `policy`.
pub fn exact_second_moment(k: usize, m: u32, kernel: &Kernel, policy: &TruncationPolicy) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let v = policy.cutoff(k, m, kernel) as f64;
    second_moment_with_cutoff(k, m, kernel, v)
}

/// `c_m^2 [ sum_{j=1}^k j^{2a} + sum_{v=1}^{V} ((k+v)^a - v^a)^2 ]`.
pub fn second_moment_with_cutoff(k: usize, m: u32, kernel: &Kernel, v: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let a = kernel.exponent();
    let c = kernel.level_scale(m);
    let kf = k as f64;
    let head = power_sum(2.0 * a, 1.0, kf);
    let direct_end = v.min((4.0 * kf).max(64.0)).floor();
    let mut tail = 0.0;
    let mut i = 1.0;
    while i <= direct_end {
        let d = (kf + i).powf(a) - i.powf(a);
        tail += d * d;
        i += 1.0;
    }
    if v > direct_end && a != 0.0 {
        tail += binomial_tail(a, kf, direct_end + 1.0, v);
    }
    c * c * (head + tail)
}

// sum_{v=lo}^{hi} ((k+v)^a - v^a)^2 for lo >= 4k, via
// ((1+x)^a - 1)^2 = sum_{n>=2} d_n x^n.
fn binomial_tail(a: f64, k: f64, lo: f64, hi: f64) -> f64 {
    const TERMS: usize = 48;
    let mut c = [0.0f64; TERMS + 1];
    c[0] = 1.0;
    for j in 1..=TERMS {
        c[j] = c[j - 1] * (a - (j - 1) as f64) / j as f64;
    }
    let x = k / lo;
    let base = lo.powf(2.0 * a);
    let mut total = 0.0;
    let mut xn = x;
    for n in 2..=TERMS {
        xn *= x;
        let d: f64 = (1..n).map(|j| c[j] * c[n - j]).sum();
        let term = d * xn * base * scaled_power_sum(2.0 * a - n as f64, lo, hi);
        total += term;
        if term.abs() < 1e-18 * total.abs() {
            break;
        }
    }
    total
}

/// `sum_{v=lo}^{hi} v^p` over integers.
pub fn power_sum(p: f64, lo: f64, hi: f64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    lo.powf(p) * scaled_power_sum(p, lo, hi)
}

// sum_{v=lo}^{hi} (v/lo)^p: direct near lo, Euler-Maclaurin beyond.
fn scaled_power_sum(p: f64, lo: f64, hi: f64) -> f64 {
    if hi < lo {
        return 0.0;
    }
    let switch = lo.max(2.0 * p.abs() + 64.0).min(hi);
    let mut direct = 0.0;
    let mut v = lo;
    while v < switch || (v <= hi && hi - lo < 4096.0) {
        direct += (v / lo).powf(p);
        v += 1.0;
    }
    if v > hi {
        return direct;
    }
    direct + euler_maclaurin(p, lo, v, hi)
}

// sum_{x=a}^{b} (x/s)^p for integer a <= b, a large relative to |p|.
fn euler_maclaurin(p: f64, s: f64, a: f64, b: f64) -> f64 {
    const BERN: [f64; 6] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
    ];
    let f = |x: f64| (x / s).powf(p);
    let integral = if (p + 1.0).abs() < 1e-14 {
        s * (b / a).ln()
    } else {
        s * ((b / s).powf(p + 1.0) - (a / s).powf(p + 1.0)) / (p + 1.0)
    };
    let mut total = integral + 0.5 * (f(a) + f(b));
    // f^{(q)}(x) = p (p-1) ... (p-q+1) x^{p-q} s^{-p}
    let deriv = |q: usize, x: f64| {
        let mut fall = 1.0;
        for i in 0..q {
            fall *= p - i as f64;
        }
        fall * f(x) / x.powi(q as i32)
    };
    let mut fact = 1.0;
    for (j, b2j) in BERN.iter().enumerate() {
        let q = 2 * j + 2;
        fact *= ((q - 1) * q) as f64;
        total += b2j / fact * (deriv(q - 1, b) - deriv(q - 1, a));
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_reference_values() {
        let k = Kernel::new(0.5).unwrap();
        assert_eq!(k.h(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(k.h(-1.0, 1.0).unwrap(), 0.0);
        assert_eq!(k.h(1.0, 1.0).unwrap(), 0.0);
        assert!(k.h(2.0, 1.0).is_err());
        for h in [0.2, 0.6, 0.95] {
            let k = Kernel::new(h).unwrap();
            assert_eq!(k.h(0.3, 0.3).unwrap(), 0.0);
        }
        assert!(Kernel::new(0.0).is_err());
        assert!(Kernel::new(1.0).is_err());
        assert!(!Kernel::new(0.25).unwrap().is_convergence_proven());
        assert!(Kernel::new(0.3).unwrap().is_convergence_proven());
    }

    #[test]
    fn kernel_at_unit_hurst_limit() {
        // Γ(3/2) = √π / 2; evaluated via the same formula outside the open interval
        let inv = 2.0 / std::f64::consts::PI.sqrt();
        let k = Kernel {
            hurst: 1.0,
            inv_gamma: 1.0 / gamma(1.5),
        };
        assert!((k.inv_gamma - inv).abs() < 1e-14);
        assert!((k.h(0.0, 4.0).unwrap() - 2.256758).abs() < 1e-6);
    }

    #[test]
    fn weights_degenerate_at_half() {
        let k = Kernel::new(0.5).unwrap();
        let p = TruncationPolicy::default();
        for m in 0..5 {
            let w = moving_average_weights(7, m, &k, &p).unwrap();
            assert_eq!(w.tail_cutoff_used, 0);
            for r in -3..7 {
                let expect = if r >= 0 { (-(m as f64)).exp2() } else { 0.0 };
                assert_eq!(w.weight(r), expect);
            }
        }
    }

    #[test]
    fn weight_reference_value() {
        let k = Kernel::new(0.75).unwrap();
        let w = moving_average_weights(1, 0, &k, &TruncationPolicy::default()).unwrap();
        assert!((w.weight(0) - 1.103262).abs() < 1e-6);
    }

    #[test]
    fn cutoff_is_monotone_in_epsilon() {
        let k = Kernel::new(0.7).unwrap();
        for eps in [1e-1, 1e-2, 1e-3, 1e-6] {
            let a = TruncationPolicy::unbounded(eps).unwrap().cutoff(100, 3, &k);
            let b = TruncationPolicy::unbounded(eps / 2.0).unwrap().cutoff(100, 3, &k);
            assert!(b >= a);
            let a = TruncationPolicy::new(eps, Some(2.0)).unwrap().cutoff(100, 3, &k);
            let b = TruncationPolicy::new(eps / 2.0, Some(2.0)).unwrap().cutoff(100, 3, &k);
            assert!(b >= a);
        }
    }

    #[test]
    fn power_sums_match_direct_summation() {
        for p in [-2.7, -1.0, -0.4, 0.0, 0.3, 0.8] {
            for (lo, hi) in [(1.0, 10.0), (3.0, 20000.0), (100.0, 123456.0)] {
                let mut direct = 0.0;
                let mut v = lo;
                while v <= hi {
                    direct += f64::powf(v, p);
                    v += 1.0;
                }
                let fast = power_sum(p, lo, hi);
                assert!(((fast - direct) / direct).abs() < 1e-12, "p={p} lo={lo} hi={hi}");
            }
        }
    }

    #[test]
    fn second_moment_matches_squared_weights() {
        for (h, v) in [(0.75, 100_000u64), (0.3, 50_000), (0.9, 1_000_000)] {
            let k = Kernel::new(h).unwrap();
            let w = weights_with_cutoff(16, 2, &k, v).unwrap();
            let fast = second_moment_with_cutoff(16, 2, &k, v as f64);
            let slow = w.sum_of_squares();
            assert!(((fast - slow) / slow).abs() < 1e-12, "H={h}: {fast} vs {slow}");
        }
    }

    #[test]
    fn second_moment_trivial_cases() {
        let k = Kernel::new(0.5).unwrap();
        let p = TruncationPolicy::default();
        for m in 0..6 {
            assert_eq!(exact_second_moment(1 << (2 * m), m, &k, &p), 1.0);
        }
        assert_eq!(exact_second_moment(0, 3, &Kernel::new(0.7).unwrap(), &p), 0.0);
    }

    #[test]
    fn fast_len_is_smooth() {
        assert_eq!(fast_len(5), 6);
        assert_eq!(fast_len(17), 18);
        assert_eq!(fast_len(1 << 20), 1 << 20);
        assert_eq!(fast_len((1 << 22) * 3 - 5), (1 << 22) * 3);
    }

    #[test]
    fn grid_values_match_direct_weights() {
        let mut bm = TwoSidedBm::new(4);
        let k = Kernel::new(0.75).unwrap();
        let p = TruncationPolicy::new(1e-6, Some(2.0)).unwrap();
        let path = fbm_grid_values(&mut bm, 3, &k, 1.0, &p).unwrap();
        assert_eq!(path.values()[0], 0.0);
        let v = path.tail_cutoff_used;
        for idx in [1usize, 17, 64] {
            let w = weights_with_cutoff(idx, 3, &k, v).unwrap();
            let direct = w.apply(&bm).unwrap();
            assert!((direct - path.values()[idx]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation() {
        let mut bm = TwoSidedBm::new(8);
        let k = Kernel::new(0.6).unwrap();
        let path = fbm_grid_values(&mut bm, 2, &k, 1.0, &TruncationPolicy::default()).unwrap();
        let v = path.values();
        assert_eq!(path.eval(3.0 / 16.0).unwrap(), v[3]);
        assert!((path.eval(3.5 / 16.0).unwrap() - 0.5 * (v[3] + v[4])).abs() < 1e-15);
        assert!(path.eval(1.5).is_err());
        assert!(path.eval(-0.1).is_err());
        assert_eq!(path.eval(1.0).unwrap(), v[16]);
    }
}
