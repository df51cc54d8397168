//! Nested twisted random walks and their shrunken Brownian approximations.
//!
//! Level `m` carries an i.i.d. ±1 sequence `X_m`. Stopping times `T_m(k)`
//! mark the instants where the walk has moved by two from its previous
//! stopping value. Each bridge `(T_m(k), T_m(k+1)]` is negated as a block
//! whenever its displacement disagrees with `2 X̃_{m-1}(k+1)`, which makes the
//! twisted walk satisfy `S̃_m(T_m(k)) = 2 S̃_{m-1}(k)` exactly.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bits::{matched_pairs, SignVec};
use crate::error::{invalid, Error, Result};
use crate::seed::derive_seed;

/// Default ceiling on raw steps generated at a single level.
pub const DEFAULT_STEP_CAP: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Right,
    Left,
}

impl Side {
    fn tag(self) -> u64 {
        match self {
            Side::Right => 0x5249_4748_54,
            Side::Left => 0x4c45_4654,
        }
    }
}

/// Address of one row of the i.i.d. lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StepSource {
    pub master_seed: u64,
    pub side: Side,
    pub level: u32,
}

impl StepSource {
    pub fn new(master_seed: u64, side: Side, level: u32) -> Self {
        Self {
            master_seed,
            side,
            level,
        }
    }

    pub fn sub_seed(&self) -> u64 {
        derive_seed(&[self.master_seed, self.side.tag(), self.level as u64])
    }

    /// Raw word stream; bit `i` of word `i / 64` (LSB first) is step `i`.
    pub fn stream(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.sub_seed())
    }
}

/// First `count` raw steps of `source`.
pub fn generate_level_steps(source: StepSource, count: usize) -> Result<Vec<i8>> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    let mut rng = source.stream();
    let mut v = SignVec::new();
    while v.len() < count {
        v.push_word(rng.next_u64());
    }
    let mut out = v.to_vec();
    out.truncate(count);
    Ok(out)
}

/// Stopping times found on a finite path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoppingTimes {
    /// `T(0) = 0, T(1), ...` as far as the path reaches.
    pub times: Vec<usize>,
    /// Number of stopping times after `T(0)`.
    pub found: usize,
}

/// Stopping times of a walk given by its partial sums `S(0) = 0, S(1), ...`.
pub fn compute_stopping_times(partial_sums: &[i64]) -> Result<StoppingTimes> {
    match partial_sums.first() {
        Some(0) => {}
        _ => return Err(invalid("partial_sums", "must start at 0")),
    }
    if partial_sums.windows(2).any(|w| (w[1] - w[0]).abs() != 1) {
        return Err(invalid("partial_sums", "increments must be ±1"));
    }
    let mut times = vec![0];
    let mut anchor = 0i64;
    for (n, &s) in partial_sums.iter().enumerate().skip(1) {
        if (s - anchor).abs() == 2 {
            times.push(n);
            anchor = s;
        }
    }
    let found = times.len() - 1;
    Ok(StoppingTimes { times, found })
}

/// Plain twisting of `raw` against the previous level's twisted steps.
///
/// Only complete bridges are returned; a trailing partial bridge is dropped.
pub fn twist_level(prev_twisted: &[i8], raw: &[i8]) -> Result<Vec<i8>> {
    let mut sums = Vec::with_capacity(raw.len() + 1);
    sums.push(0i64);
    for &x in raw {
        if x != 1 && x != -1 {
            return Err(invalid("raw", "steps must be ±1"));
        }
        sums.push(sums.last().unwrap() + x as i64);
    }
    let st = compute_stopping_times(&sums)?;
    if st.found > prev_twisted.len() {
        return Err(Error::InsufficientPreviousLevel {
            level: 0,
            needed: st.found,
            available: prev_twisted.len(),
        });
    }
    let mut out = Vec::with_capacity(*st.times.last().unwrap());
    for k in 0..st.found {
        let (a, b) = (st.times[k], st.times[k + 1]);
        let keep = sums[b] - sums[a] == 2 * prev_twisted[k] as i64;
        out.extend(raw[a..b].iter().map(|&x| if keep { x } else { -x }));
    }
    Ok(out)
}

/// One row of the lattice after twisting.
#[derive(Clone, Debug)]
pub struct WalkLevel {
    level: u32,
    // None for levels given explicitly, which cannot grow.
    stream: Option<ChaCha8Rng>,
    raw: SignVec,
    twisted: SignVec,
    // T_m(0) = 0, T_m(1), ... for m >= 1; empty at level 0 where T_0(k) = k.
    stopping: Vec<u64>,
    // prefix[w] = sum of the twisted steps held in words before w.
    prefix: Vec<i64>,
}

impl WalkLevel {
    fn new(source: StepSource) -> Self {
        let stopping = if source.level == 0 { Vec::new() } else { vec![0] };
        Self {
            level: source.level,
            stream: Some(source.stream()),
            raw: SignVec::new(),
            twisted: SignVec::new(),
            stopping,
            prefix: vec![0],
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn raw_steps(&self) -> &SignVec {
        &self.raw
    }

    pub fn twisted_steps(&self) -> &SignVec {
        &self.twisted
    }

    /// Number of twisted steps available.
    pub fn len(&self) -> usize {
        self.twisted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.twisted.is_empty()
    }

    /// Number of complete bridges, i.e. the largest `k` with `T_m(k)` known.
    pub fn bridges(&self) -> usize {
        if self.level == 0 {
            self.twisted.len()
        } else {
            self.stopping.len() - 1
        }
    }

    /// `T_m(k)`, if already generated.
    pub fn stopping_time(&self, k: usize) -> Option<usize> {
        if self.level == 0 {
            (k <= self.twisted.len()).then_some(k)
        } else {
            self.stopping.get(k).map(|&t| t as usize)
        }
    }

    /// `T_m(0), T_m(1), ...` (only meaningful for `m >= 1`).
    pub fn stopping_times(&self) -> &[u64] {
        &self.stopping
    }

    /// `S̃_m(n)` for `n <= len()`.
    #[inline]
    pub fn partial_sum(&self, n: usize) -> i64 {
        assert!(n <= self.twisted.len(), "partial sum index out of range");
        let w = n >> 6;
        self.prefix[w] + self.twisted.partial_word_sum(w, n & 63)
    }

    /// `S̃_m(0..=n)` as a vector.
    pub fn partial_sums(&self, n: usize) -> Vec<i64> {
        assert!(n <= self.twisted.len(), "partial sum index out of range");
        let mut out = Vec::with_capacity(n + 1);
        let mut s = 0i64;
        out.push(0);
        for i in 0..n {
            s += self.twisted.get(i) as i64;
            out.push(s);
        }
        out
    }

    fn fixed(level: u32, raw: SignVec) -> Self {
        let stopping = if level == 0 { Vec::new() } else { vec![0] };
        Self {
            level,
            stream: None,
            raw,
            twisted: SignVec::new(),
            stopping,
            prefix: vec![0],
        }
    }

    fn push_raw_words(&mut self, words: usize) -> Result<()> {
        let Some(stream) = self.stream.as_mut() else {
            return Err(Error::ResourceLimit {
                level: self.level,
                cap: self.raw.len(),
            });
        };
        for _ in 0..words {
            self.raw.push_word(stream.next_u64());
        }
        Ok(())
    }

    // Pairs of word `wi` that start at or after `start` and lie inside the raw steps.
    #[inline]
    fn pair_mask(&self, wi: usize, start: usize) -> u64 {
        let mut mask = matched_pairs(self.raw.words()[wi]);
        if wi == start >> 6 {
            mask &= !((1u64 << (start & 63)) - 1);
        }
        let valid = self.raw.len() - (wi << 6);
        if valid < 64 {
            mask &= (1u64 << valid.saturating_sub(1)) - 1;
        }
        mask
    }

    // Complete bridges present in raw steps that are not yet twisted.
    fn pending_bridges(&self) -> usize {
        let start = self.twisted.len();
        (start >> 6..self.raw.words().len())
            .map(|wi| self.pair_mask(wi, start).count_ones() as usize)
            .sum()
    }

    // Twists every complete bridge whose target step exists in `prev`.
    // Bridges ending in one raw word are resolved together into a single invert mask.
    fn twist_from(&mut self, prev: &SignVec) {
        let start = self.twisted.len();
        let nwords = self.raw.words().len();
        let pw = prev.words();
        let mut k = self.stopping.len() - 1;
        for wi in (start >> 6)..nwords {
            let mut mask = self.pair_mask(wi, start);
            if mask == 0 {
                continue;
            }
            let avail = prev.len() - k;
            let last_word = (mask.count_ones() as usize) >= avail;
            if last_word {
                let mut keep = 0u64;
                for _ in 0..avail {
                    keep |= mask & mask.wrapping_neg();
                    mask &= mask - 1;
                }
                mask = keep;
                if mask == 0 {
                    break;
                }
            }
            let w = self.raw.words()[wi];
            let base = wi << 6;
            let seg0 = self.twisted.len();
            let mut lo = seg0.saturating_sub(base);
            let mut inv = 0u64;
            let mut first_flip = 0u64;
            let mut first = true;
            while mask != 0 {
                let j = mask.trailing_zeros() as usize;
                let end = j + 2;
                let flip = ((w >> j) ^ (pw[k >> 6] >> (k & 63))) & 1;
                inv |= flip.wrapping_neg() & (u64::MAX >> (64 - end)) & !((1u64 << lo) - 1);
                if first {
                    first_flip = flip;
                    first = false;
                }
                self.stopping.push((base + end) as u64);
                lo = end;
                k += 1;
                mask &= mask - 1;
            }
            if seg0 < base {
                self.twisted.extend_from(&self.raw, base, first_flip == 1);
            }
            self.twisted.extend_within_word(w ^ inv, base + lo, false);
            if last_word {
                break;
            }
        }
        self.refresh_prefix();
    }

    fn refresh_prefix(&mut self) {
        let complete = self.twisted.len() >> 6;
        while self.prefix.len() <= complete {
            let w = self.prefix.len() - 1;
            let s = self.prefix[w] + self.twisted.partial_word_sum(w, 64);
            self.prefix.push(s);
        }
    }

    fn rebuild_prefix(&mut self) {
        self.prefix.truncate(1);
        self.refresh_prefix();
    }
}

/// The nested sequence of twisted walks on one half-axis.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    master_seed: u64,
    side: Side,
    levels: Vec<WalkLevel>,
    step_cap: usize,
}

impl Hierarchy {
    pub fn new(master_seed: u64, side: Side) -> Self {
        Self {
            master_seed,
            side,
            levels: Vec::new(),
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    /// Hierarchy whose raw steps are given level by level; it cannot be extended.
    pub fn from_raw_levels(side: Side, raw_levels: &[Vec<i8>]) -> Result<Self> {
        let mut levels: Vec<WalkLevel> = Vec::with_capacity(raw_levels.len());
        for (m, steps) in raw_levels.iter().enumerate() {
            let raw = SignVec::from_steps(steps)
                .ok_or_else(|| invalid("raw_levels", format!("level {m} has a step other than ±1")))?;
            let mut lvl = WalkLevel::fixed(m as u32, raw);
            if m == 0 {
                lvl.twisted = lvl.raw.clone();
            } else {
                lvl.twist_from(&levels[m - 1].twisted);
            }
            lvl.refresh_prefix();
            levels.push(lvl);
        }
        Ok(Self {
            master_seed: 0,
            side,
            levels,
            step_cap: DEFAULT_STEP_CAP,
        })
    }

    /// Overrides the absolute per-level raw step ceiling.
    pub fn with_step_cap(mut self, cap: usize) -> Self {
        self.step_cap = cap;
        self
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Number of levels materialised so far.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, m: u32) -> Option<&WalkLevel> {
        self.levels.get(m as usize)
    }

    fn open_levels(&mut self, m: u32) {
        while self.levels.len() <= m as usize {
            let l = self.levels.len() as u32;
            let src = StepSource::new(self.master_seed, self.side, l);
            self.levels.push(WalkLevel::new(src));
        }
    }

    // Generates about `extra` more raw steps at level m and twists them.
    fn grow(&mut self, m: u32, extra: usize, limit: usize) -> Result<()> {
        let mi = m as usize;
        let lvl = &mut self.levels[mi];
        let words = extra.div_ceil(64).max(1);
        let target = lvl.raw.len() + 64 * words;
        if target > limit {
            return Err(Error::ResourceLimit { level: m, cap: limit });
        }
        lvl.push_raw_words(words)?;
        if m == 0 {
            lvl.twisted.extend_from(&lvl.raw, lvl.raw.len(), false);
            lvl.refresh_prefix();
            return Ok(());
        }
        let want = lvl.bridges() + lvl.pending_bridges();
        self.ensure_steps(m - 1, want)?;
        let (lo, hi) = self.levels.split_at_mut(mi);
        hi[0].twist_from(&lo[mi - 1].twisted);
        Ok(())
    }

    fn limit_for(&self, expected_raw: usize) -> usize {
        64usize.saturating_mul(expected_raw.max(64)).min(self.step_cap)
    }

    /// Makes at least `n` twisted steps available at level `m`.
    pub fn ensure_steps(&mut self, m: u32, n: usize) -> Result<()> {
        self.open_levels(m);
        let limit = self.limit_for(n);
        loop {
            let have = self.levels[m as usize].len();
            if have >= n {
                return Ok(());
            }
            let deficit = n - have;
            self.grow(m, deficit + deficit / 4 + 128, limit)?;
        }
    }

    /// Makes `T_m(k)` available for every `k <= count`.
    pub fn ensure_bridges(&mut self, m: u32, count: usize) -> Result<()> {
        if m == 0 {
            return self.ensure_steps(0, count);
        }
        self.open_levels(m);
        let limit = self.limit_for(count.saturating_mul(4));
        loop {
            let have = self.levels[m as usize].bridges();
            if have >= count {
                return Ok(());
            }
            let deficit = count - have;
            self.grow(m, 4 * deficit + deficit / 2 + 128, limit)?;
        }
    }

    /// Shrunken walk of level `m`.
    pub fn bm(&self, m: u32) -> Result<BmApprox<'_>> {
        self.level(m)
            .map(build_bm_approx)
            .ok_or_else(|| invalid("level", format!("level {m} has not been generated")))
    }

    #[doc(hidden)]
    /// Negates one twisted step without re-twisting; for fault-injection tests only.
    pub fn corrupt_step(&mut self, m: u32, index: usize) {
        let lvl = &mut self.levels[m as usize];
        lvl.twisted.flip(index);
        lvl.rebuild_prefix();
    }
}

/// `B_m(t) = 2^{-m} S̃_m(t 4^m)`, linear between grid points.
#[derive(Clone, Copy, Debug)]
pub struct BmApprox<'a> {
    walk: &'a WalkLevel,
}

pub fn build_bm_approx(level: &WalkLevel) -> BmApprox<'_> {
    BmApprox { walk: level }
}

impl<'a> BmApprox<'a> {
    pub fn level(&self) -> u32 {
        self.walk.level
    }

    pub fn walk(&self) -> &'a WalkLevel {
        self.walk
    }

    /// Grid spacing `4^{-m}`.
    pub fn dt(&self) -> f64 {
        (-2.0 * self.walk.level as f64).exp2()
    }

    /// Space unit `2^{-m}`.
    pub fn dx(&self) -> f64 {
        (-(self.walk.level as f64)).exp2()
    }

    /// Largest grid index available.
    pub fn grid_len(&self) -> usize {
        self.walk.len()
    }

    pub fn horizon(&self) -> f64 {
        self.walk.len() as f64 * self.dt()
    }

    /// `B_m(k 4^{-m})`.
    pub fn value_at_index(&self, k: usize) -> Result<f64> {
        if k > self.walk.len() {
            return Err(Error::OutOfHorizon {
                t: k as f64 * self.dt(),
                lo: 0.0,
                hi: self.horizon(),
            });
        }
        Ok(self.walk.partial_sum(k) as f64 * self.dx())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let x = t / self.dt();
        if !(t >= 0.0) || x > self.walk.len() as f64 {
            return Err(Error::OutOfHorizon {
                t,
                lo: 0.0,
                hi: self.horizon(),
            });
        }
        let k = x.floor() as usize;
        let g = x - k as f64;
        let a = self.value_at_index(k)?;
        if g == 0.0 {
            return Ok(a);
        }
        let b = self.value_at_index(k + 1)?;
        Ok(a + g * (b - a))
    }

    /// `B_m(t_k)` for `k = 0..=n`.
    pub fn grid_values(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.walk.len() {
            return Err(Error::OutOfHorizon {
                t: n as f64 * self.dt(),
                lo: 0.0,
                hi: self.horizon(),
            });
        }
        let dx = self.dx();
        Ok(self
            .walk
            .partial_sums(n)
            .into_iter()
            .map(|s| s as f64 * dx)
            .collect())
    }
}

/// Two independent hierarchies read as one two-sided walk,
/// with `B_m(-t) := B_m^{left}(t)`.
#[derive(Clone, Debug)]
pub struct TwoSidedBm {
    master_seed: u64,
    right: Hierarchy,
    left: Hierarchy,
}

impl TwoSidedBm {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            right: Hierarchy::new(master_seed, Side::Right),
            left: Hierarchy::new(master_seed, Side::Left),
        }
    }

    /// Joins two hierarchies; `right` supplies `t >= 0`.
    pub fn from_sides(right: Hierarchy, left: Hierarchy) -> Self {
        Self {
            master_seed: right.master_seed,
            right,
            left,
        }
    }

    pub fn with_step_cap(mut self, cap: usize) -> Self {
        self.right = self.right.with_step_cap(cap);
        self.left = self.left.with_step_cap(cap);
        self
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn right(&self) -> &Hierarchy {
        &self.right
    }

    pub fn left(&self) -> &Hierarchy {
        &self.left
    }

    pub fn side(&self, side: Side) -> &Hierarchy {
        match side {
            Side::Right => &self.right,
            Side::Left => &self.left,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Hierarchy {
        match side {
            Side::Right => &mut self.right,
            Side::Left => &mut self.left,
        }
    }

    /// Ensures `right_steps` and `left_steps` twisted steps at level `m`.
    pub fn ensure_steps(&mut self, m: u32, right_steps: usize, left_steps: usize) -> Result<()> {
        self.right.ensure_steps(m, right_steps)?;
        self.left.ensure_steps(m, left_steps)
    }

    /// Makes `T_j(k)` available for every `j <= m` and `k <= K 4^j` on both sides.
    pub fn extend_two_sided(&mut self, m: u32, horizon: f64) -> Result<()> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid("horizon", "must be positive and finite"));
        }
        for j in 0..=m {
            let count = grid_count(horizon, j);
            self.right.ensure_bridges(j, count)?;
            self.left.ensure_bridges(j, count)?;
        }
        Ok(())
    }

    /// `X̃_m(r + 1)` under the two-sided convention.
    pub fn step(&self, m: u32, r: i64) -> Result<i8> {
        let (h, idx, sign) = if r >= 0 {
            (&self.right, r as usize, 1)
        } else {
            (&self.left, (-r - 1) as usize, -1)
        };
        let lvl = h
            .level(m)
            .filter(|l| idx < l.len())
            .ok_or_else(|| self.out_of_horizon(m, r))?;
        Ok(sign * lvl.twisted.get(idx))
    }

    /// `X̃_m(r + 1)` for `r = -left..right-1`, as reals.
    pub fn increments(&self, m: u32, left: usize, right: usize) -> Result<Vec<f64>> {
        let need = |h: &Hierarchy, n: usize| h.level(m).map_or(n == 0, |l| l.len() >= n);
        if !need(&self.left, left) {
            return Err(self.out_of_horizon(m, -(left as i64)));
        }
        if !need(&self.right, right) {
            return Err(self.out_of_horizon(m, right as i64 - 1));
        }
        let mut out = vec![0.0; left + right];
        if left > 0 {
            let l = self.left.level(m).unwrap();
            l.twisted.write_scaled(0, -1.0, &mut out[..left]);
            out[..left].reverse();
        }
        if right > 0 {
            let r = self.right.level(m).unwrap();
            r.twisted.write_scaled(0, 1.0, &mut out[left..]);
        }
        Ok(out)
    }

    fn out_of_horizon(&self, m: u32, r: i64) -> Error {
        let dt = (-2.0 * m as f64).exp2();
        let len = |h: &Hierarchy| h.level(m).map_or(0, |l| l.len()) as f64 * dt;
        Error::OutOfHorizon {
            t: r as f64 * dt,
            lo: -len(&self.left),
            hi: len(&self.right),
        }
    }

    /// Two-sided `B_m(t)`.
    pub fn eval(&self, m: u32, t: f64) -> Result<f64> {
        let h = if t >= 0.0 { &self.right } else { &self.left };
        let lo = -self.left.level(m).map_or(0.0, |l| build_bm_approx(l).horizon());
        let hi = self.right.level(m).map_or(0.0, |l| build_bm_approx(l).horizon());
        let lvl = h.level(m).ok_or(Error::OutOfHorizon { t, lo, hi })?;
        build_bm_approx(lvl)
            .eval(t.abs())
            .map_err(|_| Error::OutOfHorizon { t, lo, hi })
    }
}

/// `floor(K 4^m)`.
pub fn grid_count(horizon: f64, m: u32) -> usize {
    (horizon * (2.0 * m as f64).exp2()).floor() as usize
}
