//! Markov chains on cell indices with linear (`m/n^2` on `[m/beta, beta m]`)
//! or algebraic (`(m + n)/n^3` on `[sqrt m, m^2]`) spreading kernels.
//!
//! Rows are normalised exactly on the finite state space `1..=m_max` through
//! tail sums `T_p(k) = sum_{j=k}^{m_max} j^-p`, accumulated from the top so
//! that differences of tails stay accurate.
//!
//! The algebraic support is widened to `[1, 4]` for `m = 1`, which the literal
//! range `[1, 1]` would make absorbing.

use rand::Rng;

use crate::error::{Error, Result};

/// Default state cap.
pub const DEFAULT_M_MAX: u64 = 1_000_000;
/// Burn-in applied when a run starts from the `m^-3` law.
pub const DEFAULT_BURN_IN: u64 = 10_000;

/// `theta = 2 ln(beta) / (beta - 1/beta)`.
pub fn theta_linear(beta: f64) -> Result<f64> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "spreading factor must exceed 1, got {beta}"
        )));
    }
    Ok(2.0 * beta.ln() / (beta - 1.0 / beta))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelFamily {
    Linear { beta: f64 },
    Algebraic,
}

#[derive(Clone, Debug)]
pub struct SpreadingKernel {
    family: KernelFamily,
    m_max: u64,
    // t[p - 1][k] = sum_{j=k}^{m_max} j^-p, index 0 unused, t[.][m_max + 1] = 0
    t1: Vec<f64>,
    t2: Vec<f64>,
    t3: Vec<f64>,
}

/// A chain position: the cell index and the component label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainState {
    pub m: u64,
    pub label: u32,
}

fn tails(m_max: u64, p: i32) -> Vec<f64> {
    let n = m_max as usize;
    let mut t = vec![0.0; n + 2];
    for k in (1..=n).rev() {
        t[k] = t[k + 1] + (k as f64).powi(-p);
    }
    t
}

impl SpreadingKernel {
    fn with_family(family: KernelFamily, m_max: u64) -> Result<Self> {
        if m_max < 1000 {
            return Err(Error::InvalidParameter(format!(
                "state cap must be at least 1000, got {m_max}"
            )));
        }
        if m_max > 1 << 32 {
            return Err(Error::InvalidParameter(format!("state cap {m_max} is too large")));
        }
        Ok(Self {
            family,
            m_max,
            t1: tails(m_max, 1),
            t2: tails(m_max, 2),
            t3: tails(m_max, 3),
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn m_max(&self) -> u64 {
        self.m_max
    }

    /// Contraction coefficient: `theta(beta)` for linear kernels, 0 for algebraic ones.
    pub fn theta(&self) -> f64 {
        match self.family {
            KernelFamily::Linear { beta } => theta_linear(beta).expect("validated at construction"),
            KernelFamily::Algebraic => 0.0,
        }
    }

    /// Support `[lo, hi]` of row `m`.
    pub fn support(&self, m: u64) -> (u64, u64) {
        match self.family {
            KernelFamily::Linear { beta } => {
                let lo = ((m as f64 / beta) - 1e-9).ceil().max(1.0) as u64;
                let hi = ((m as f64 * beta) + 1e-9).floor() as u64;
                (lo, hi.min(self.m_max).max(lo))
            }
            KernelFamily::Algebraic => {
                let mut lo = (m as f64).sqrt().ceil() as u64;
                while lo > 1 && (lo - 1) * (lo - 1) >= m {
                    lo -= 1;
                }
                while lo * lo < m {
                    lo += 1;
                }
                // m = 1 would otherwise be absorbing
                let hi = m.saturating_mul(m).max(4);
                (lo.max(1), hi.min(self.m_max).max(lo))
            }
        }
    }

    // tail difference sum_{j=a}^{b} j^-p
    fn seg(t: &[f64], a: u64, b: u64) -> f64 {
        if b < a {
            0.0
        } else {
            t[a as usize] - t[b as usize + 1]
        }
    }

    // unnormalised weight mass on [a, b] for row m
    fn mass(&self, m: u64, a: u64, b: u64) -> f64 {
        match self.family {
            KernelFamily::Linear { .. } => Self::seg(&self.t2, a, b),
            KernelFamily::Algebraic => {
                m as f64 * Self::seg(&self.t3, a, b) + Self::seg(&self.t2, a, b)
            }
        }
    }

    // unnormalised first moment on [a, b] for row m
    fn moment(&self, m: u64, a: u64, b: u64) -> f64 {
        match self.family {
            KernelFamily::Linear { .. } => Self::seg(&self.t1, a, b),
            KernelFamily::Algebraic => {
                m as f64 * Self::seg(&self.t2, a, b) + Self::seg(&self.t1, a, b)
            }
        }
    }

    fn weight(&self, m: u64, n: u64) -> f64 {
        let x = n as f64;
        match self.family {
            KernelFamily::Linear { .. } => 1.0 / (x * x),
            KernelFamily::Algebraic => (m as f64 + x) / (x * x * x),
        }
    }

    /// Normalising constant of row `m`.
    pub fn row_mass(&self, m: u64) -> f64 {
        let (lo, hi) = self.support(m);
        self.mass(m, lo, hi)
    }

    /// Transition probability `p(n | m)`.
    pub fn prob(&self, m: u64, n: u64) -> f64 {
        let (lo, hi) = self.support(m);
        if n < lo || n > hi {
            return 0.0;
        }
        self.weight(m, n) / self.mass(m, lo, hi)
    }

    /// `sum_n n p(n | m)`.
    pub fn conditional_mean(&self, m: u64) -> f64 {
        let (lo, hi) = self.support(m);
        self.moment(m, lo, hi) / self.mass(m, lo, hi)
    }

    /// `sum_{n < c} n p(n | m)`.
    pub fn conditional_truncated_mean(&self, m: u64, c: f64) -> f64 {
        let (lo, hi) = self.support(m);
        if !(c > lo as f64) {
            return 0.0;
        }
        let top = if c.is_finite() {
            (c.ceil() as u64).saturating_sub(1).min(hi)
        } else {
            hi
        };
        self.moment(m, lo, top) / self.mass(m, lo, hi)
    }

    /// `(P(a <= n <= b | m), sum_{n=a}^{b} n p(n | m))`.
    pub fn conditional_window(&self, m: u64, a: u64, b: u64) -> (f64, f64) {
        let (lo, hi) = self.support(m);
        let (a, b) = (a.max(lo), b.min(hi));
        if b < a {
            return (0.0, 0.0);
        }
        let z = self.mass(m, lo, hi);
        (self.mass(m, a, b) / z, self.moment(m, a, b) / z)
    }

    /// `sum_{n=a}^{b} n^2 p(n | m)`.
    pub fn conditional_window_second(&self, m: u64, a: u64, b: u64) -> f64 {
        let (lo, hi) = self.support(m);
        let (a, b) = (a.max(lo), b.min(hi));
        if b < a {
            return 0.0;
        }
        let count = (b - a + 1) as f64;
        let s = match self.family {
            KernelFamily::Linear { .. } => count,
            KernelFamily::Algebraic => m as f64 * Self::seg(&self.t1, a, b) + count,
        };
        s / self.mass(m, lo, hi)
    }

    /// `P(n >= k | m)`.
    pub fn conditional_tail(&self, m: u64, k: u64) -> f64 {
        let (lo, hi) = self.support(m);
        if k <= lo {
            return 1.0;
        }
        if k > hi {
            return 0.0;
        }
        self.mass(m, k, hi) / self.mass(m, lo, hi)
    }

    /// Draw the next index from row `m`.
    pub fn sample_next<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> u64 {
        let (lo, hi) = self.support(m);
        if lo == hi {
            return lo;
        }
        let total = self.mass(m, lo, hi);
        // smallest n with mass(n + 1 ..= hi) < u * total, i.e. P(N > n) < u
        let target = rng.random::<f64>() * total;
        let above = |n: u64| self.mass(m, n + 1, hi);
        // continuous guess from the 1/n^2 part, refined by a short walk
        let guess = {
            let a = 1.0 / lo as f64;
            let b = 1.0 / (hi as f64 + 1.0);
            let frac = target / total;
            let x = 1.0 / (b + frac * (a - b));
            (x.floor() as u64).clamp(lo, hi)
        };
        let mut n = guess;
        for _ in 0..16 {
            if above(n) >= target {
                if n == hi {
                    return hi;
                }
                n += 1;
            } else if n > lo && above(n - 1) < target {
                n -= 1;
            } else {
                return n;
            }
        }
        // fall back to bisection on [lo, hi]
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = a + (b - a) / 2;
            if above(mid) < target {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        a
    }

    /// One transition, carrying a component label drawn uniformly from
    /// `1..=labels`.
    pub fn chain_step<R: Rng + ?Sized>(&self, state: ChainState, labels: u32, rng: &mut R) -> ChainState {
        let m = self.sample_next(state.m, rng);
        let label = if labels <= 1 {
            1
        } else {
            rng.random_range(1..=labels)
        };
        ChainState { m, label }
    }

    /// Draw from the law `pi_m ∝ m^-3` on `1..=m_max` by exact inverse CDF.
    pub fn sample_stationary_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> ChainState {
        let total = self.t3[1];
        let u = rng.random::<f64>() * total;
        // largest k with T3(k) > u
        let (mut a, mut b) = (1u64, self.m_max);
        while a < b {
            let mid = a + (b - a).div_ceil(2);
            if self.t3[mid as usize] > u {
                a = mid;
            } else {
                b = mid - 1;
            }
        }
        ChainState { m: a, label: 1 }
    }

    /// `P(m >= k)` under the `m^-3` law.
    pub fn cubic_tail(&self, k: u64) -> f64 {
        if k > self.m_max {
            return 0.0;
        }
        self.t3[k.max(1) as usize] / self.t3[1]
    }

    /// One application of the transpose: `(pi P)_n`.
    pub fn push_forward(&self, pi: &[f64]) -> Vec<f64> {
        let n_states = self.m_max as usize;
        assert_eq!(pi.len(), n_states + 1, "distribution must be indexed 0..=m_max");
        // prefix sums of pi(m) / Z(m) and m pi(m) / Z(m)
        let mut p0 = vec![0.0; n_states + 1];
        let mut p1 = vec![0.0; n_states + 1];
        for m in 1..=n_states {
            let w = pi[m] / self.row_mass(m as u64);
            p0[m] = p0[m - 1] + w;
            p1[m] = p1[m - 1] + w * m as f64;
        }
        let range = |a: u64, b: u64, p: &[f64]| -> f64 {
            if b < a {
                0.0
            } else {
                p[b as usize] - p[a as usize - 1]
            }
        };
        let mut out = vec![0.0; n_states + 1];
        for n in 1..=self.m_max {
            let (a, b) = self.sources(n);
            let x = n as f64;
            out[n as usize] = match self.family {
                KernelFamily::Linear { .. } => range(a, b, &p0) / (x * x),
                KernelFamily::Algebraic => {
                    range(a, b, &p1) / (x * x * x) + range(a, b, &p0) / (x * x)
                }
            };
        }
        out
    }

    /// Rows `m` whose support contains `n`, as an interval. Both support
    /// ends are nondecreasing in `m`, so a guess is walked to the exact ends.
    fn sources(&self, n: u64) -> (u64, u64) {
        let (guess_a, guess_b) = match self.family {
            KernelFamily::Linear { beta } => {
                ((n as f64 / beta).floor() as u64, (n as f64 * beta).ceil() as u64)
            }
            KernelFamily::Algebraic => ((n as f64).sqrt().floor() as u64, n.saturating_mul(n)),
        };
        let mut a = guess_a.clamp(1, self.m_max);
        while a > 1 && self.support(a - 1).1 >= n {
            a -= 1;
        }
        while a < self.m_max && self.support(a).1 < n {
            a += 1;
        }
        let mut b = guess_b.clamp(1, self.m_max);
        while b < self.m_max && self.support(b + 1).0 <= n {
            b += 1;
        }
        while b > 1 && self.support(b).0 > n {
            b -= 1;
        }
        (a, b)
    }

    /// Stationary law by power iteration from the `m^-3` law, stopped when
    /// the L1 change drops below `tol` or after `max_iter` sweeps.
    pub fn stationary_distribution(&self, tol: f64, max_iter: usize) -> Vec<f64> {
        let total = self.t3[1];
        let mut pi: Vec<f64> = (0..=self.m_max)
            .map(|m| if m == 0 { 0.0 } else { (m as f64).powi(-3) / total })
            .collect();
        for _ in 0..max_iter {
            let next = self.push_forward(&pi);
            let s: f64 = next.iter().sum();
            let next: Vec<f64> = next.iter().map(|v| v / s).collect();
            let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
            pi = next;
            if diff < tol {
                break;
            }
        }
        pi
    }
}

pub fn build_linear_kernel(beta: f64, m_max: u64) -> Result<SpreadingKernel> {
    let theta = theta_linear(beta)?;
    if theta >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "spreading factor {beta} gives theta = {theta} >= 1"
        )));
    }
    SpreadingKernel::with_family(KernelFamily::Linear { beta }, m_max)
}

pub fn build_algebraic_kernel(m_max: u64) -> Result<SpreadingKernel> {
    SpreadingKernel::with_family(KernelFamily::Algebraic, m_max)
}

/// Mean of a distribution indexed `0..=m_max`.
pub fn distribution_mean(pi: &[f64]) -> f64 {
    pi.iter().enumerate().map(|(m, p)| m as f64 * p).sum()
}
