//! Truncated triangular arrays and their martingale decomposition.
//!
//! For a trajectory `m_0, ..., m_n` and centre `mu`, the array is
//! `X_{n,k} = (m_k - mu) 1{|m_k - mu| < c_n}`. Its predictable part is
//! `Y_{n,k} = E(X_{n,k} | m_{k-1})`, the martingale differences are
//! `Z_{n,k} = X_{n,k} - Y_{n,k}` and the residuals are
//! `E_{n,k-1} = Y_{n,k} - theta X_{n,k-1}`, so that
//! `(1 - theta) S_n = M_n + theta (X_{n,0} - X_{n,n}) + sum_k E_{n,k-1}`.

use std::collections::BTreeMap;

use crate::chain::SpreadingKernel;
use crate::error::{Error, Result};

/// `c_n = sqrt(n * max(1, ln ln max(n, 3)))`.
pub fn truncation_level(n: u64) -> f64 {
    let x = n.max(1) as f64;
    let lnln = (n.max(3) as f64).ln().ln();
    (x * lnln.max(1.0)).sqrt()
}

/// Truncation rule `max(floor, c_n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationRule {
    pub floor: f64,
}

impl Default for TruncationRule {
    fn default() -> Self {
        Self { floor: 1.0 }
    }
}

impl TruncationRule {
    pub fn level(&self, n: u64) -> f64 {
        truncation_level(n).max(self.floor)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoobDecomposition {
    /// `X_{n,0..=n}`.
    pub x: Vec<f64>,
    /// `Y_{n,1..=n}` stored at indices `0..n`.
    pub y: Vec<f64>,
    /// `Z_{n,1..=n}` stored at indices `0..n`.
    pub z: Vec<f64>,
    /// `E_{n,0..n}`.
    pub e: Vec<f64>,
    pub theta: f64,
    pub truncation: f64,
    /// True when `Y` comes from an estimate rather than the exact kernel.
    pub approximate: bool,
}

impl DoobDecomposition {
    pub fn steps(&self) -> usize {
        self.z.len()
    }

    /// `S_n = sum_{k=1}^n X_{n,k}`.
    pub fn partial_sum(&self) -> f64 {
        self.x[1..].iter().sum()
    }

    /// `M_n = sum_k Z_{n,k}`.
    pub fn martingale(&self) -> f64 {
        self.z.iter().sum()
    }

    /// Difference of the two sides of the decomposition identity.
    pub fn identity_defect(&self) -> f64 {
        let n = self.x.len() - 1;
        let lhs = (1.0 - self.theta) * self.partial_sum();
        let rhs = self.martingale()
            + self.theta * (self.x[0] - self.x[n])
            + self.e.iter().sum::<f64>();
        lhs - rhs
    }
}

fn truncate(v: f64, c: f64) -> f64 {
    if v.abs() < c {
        v
    } else {
        0.0
    }
}

/// Exact decomposition of a chain trajectory, using kernel sums for `Y`.
pub fn doob_decompose_chain(
    kernel: &SpreadingKernel,
    trajectory: &[u64],
    center: f64,
    c: f64,
) -> Result<DoobDecomposition> {
    if trajectory.len() < 2 {
        return Err(Error::InsufficientData("trajectory needs at least two states".into()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level must be positive, got {c}")));
    }
    for w in trajectory.windows(2) {
        let (lo, hi) = kernel.support(w[0]);
        if w[1] < lo || w[1] > hi {
            return Err(Error::InvalidParameter(format!(
                "transition {} -> {} is outside the kernel support",
                w[0], w[1]
            )));
        }
    }
    let theta = kernel.theta();
    // indices j with |j - center| < c
    let a = ((center - c).floor() + 1.0).max(1.0) as u64;
    let b_f = (center + c).ceil() - 1.0;
    let x: Vec<f64> = trajectory
        .iter()
        .map(|&m| truncate(m as f64 - center, c))
        .collect();
    let n = trajectory.len() - 1;
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    for k in 1..=n {
        let prev = trajectory[k - 1];
        let yk = if b_f < a as f64 {
            0.0
        } else {
            let (p, mom) = kernel.conditional_window(prev, a, b_f as u64);
            mom - center * p
        };
        y.push(yk);
        z.push(x[k] - yk);
        e.push(yk - theta * x[k - 1]);
    }
    Ok(DoobDecomposition {
        x,
        y,
        z,
        e,
        theta,
        truncation: c,
        approximate: false,
    })
}

/// Bin used for cell-conditional estimates: exact below 32, 20% wide above.
pub fn cell_bin(m: u64) -> u64 {
    if m < 32 {
        m
    } else {
        32 + ((m as f64 / 32.0).ln() / 1.2f64.ln()).floor() as u64
    }
}

/// Approximate decomposition for processes whose filtration is not
/// computable: `Y` is the empirical mean of `X_{n,k}` given the bin of the
/// previous cell, `theta` the least-squares slope of `Y` on `X_{n,k-1}`
/// supplied by the caller.
pub fn doob_decompose_estimated(
    values: &[f64],
    cells: &[u64],
    theta: f64,
    c: f64,
) -> Result<DoobDecomposition> {
    if values.len() != cells.len() || values.len() < 2 {
        return Err(Error::InvalidParameter(
            "values and cells must have equal length of at least two".into(),
        ));
    }
    let x: Vec<f64> = values.iter().map(|&v| truncate(v, c)).collect();
    let mut groups: BTreeMap<u64, (f64, u64)> = BTreeMap::new();
    for k in 1..x.len() {
        let g = groups.entry(cell_bin(cells[k - 1])).or_insert((0.0, 0));
        g.0 += x[k];
        g.1 += 1;
    }
    let n = x.len() - 1;
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    for k in 1..=n {
        let (s, cnt) = groups[&cell_bin(cells[k - 1])];
        let yk = s / cnt as f64;
        y.push(yk);
        z.push(x[k] - yk);
        e.push(yk - theta * x[k - 1]);
    }
    Ok(DoobDecomposition {
        x,
        y,
        z,
        e,
        theta,
        truncation: c,
        approximate: true,
    })
}

/// McLeish quantities normalised by `n H(c_n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McLeish {
    /// `max_k Z_{n,k}^2 / (n H)`, which should vanish.
    pub max_term: f64,
    /// `sum_k Z_{n,k}^2 / (n H)`, which should approach `1 - theta^2`.
    pub sum_squares: f64,
    pub target: f64,
}

pub fn mcleish_diagnostics(decomp: &DoobDecomposition, h_cn: f64) -> Result<McLeish> {
    if !(h_cn > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncated variance must be positive, got {h_cn}"
        )));
    }
    let n = decomp.steps() as f64;
    let norm = n * h_cn;
    let max = decomp.z.iter().map(|z| z * z).fold(0.0, f64::max);
    let sum: f64 = decomp.z.iter().map(|z| z * z).sum();
    Ok(McLeish {
        max_term: max / norm,
        sum_squares: sum / norm,
        target: 1.0 - decomp.theta * decomp.theta,
    })
}

/// Proxy for `xi = f~ - E(f~ | F_0)`: each induced value minus the mean of
/// the induced values sharing its return time.
pub fn xi_residual(samples: &[(u64, f64)]) -> Vec<f64> {
    let mut groups: BTreeMap<u64, (f64, u64)> = BTreeMap::new();
    for &(r, v) in samples {
        let g = groups.entry(r).or_insert((0.0, 0));
        g.0 += v;
        g.1 += 1;
    }
    samples
        .iter()
        .map(|&(r, v)| {
            let (s, c) = groups[&r];
            v - s / c as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_linear_kernel, distribution_mean};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_level(1), 1.0);
        let c16 = truncation_level(16);
        assert!((c16 - (16.0 * 16f64.ln().ln()).sqrt()).abs() < 1e-12);
        assert!((16f64.ln().ln() - 1.0197).abs() < 1e-4);
        let mut prev = 0.0;
        for n in 1..=1_000_000u64 {
            let c = truncation_level(n);
            assert!(c >= prev);
            prev = c;
        }
    }

    fn run_chain(kernel: &SpreadingKernel, n: usize, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = kernel.sample_stationary_cell(&mut rng);
        for _ in 0..1000 {
            s = kernel.chain_step(s, 1, &mut rng);
        }
        let mut out = vec![s.m];
        for _ in 0..n {
            s = kernel.chain_step(s, 1, &mut rng);
            out.push(s.m);
        }
        out
    }

    #[test]
    fn decomposition_identities() {
        let k = build_linear_kernel(3.0, 100_000).unwrap();
        let traj = run_chain(&k, 20_000, 1);
        let c = truncation_level(20_000);
        let d = doob_decompose_chain(&k, &traj, 1.7, c).unwrap();
        for i in 0..d.steps() {
            assert!((d.x[i + 1] - (d.z[i] + d.y[i])).abs() < 1e-12);
        }
        let scale = d.x.iter().map(|v| v.abs()).sum::<f64>();
        assert!(d.identity_defect().abs() < 1e-10 * scale.max(1.0));
        // residuals stay bounded for the linear kernel
        let c0 = 1.0 / (3.0 - 1.0 / 3.0);
        let worst = d.e.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst < 10.0 * c0 * 10.0, "max residual {worst}");
    }

    #[test]
    fn martingale_differences_are_centred() {
        let k = build_linear_kernel(3.0, 100_000).unwrap();
        let pi = k.stationary_distribution(1e-12, 500);
        let mu = distribution_mean(&pi);
        let traj = run_chain(&k, 1_000_000, 2);
        let d = doob_decompose_chain(&k, &traj, mu, truncation_level(1_000_000)).unwrap();
        let n = d.z.len() as f64;
        let mean = d.z.iter().sum::<f64>() / n;
        let var = d.z.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * (var / n).sqrt(), "mean {mean}");
        // lagged covariances vanish within 3 sigma
        for lag in 1..=10 {
            let prods: Vec<f64> = d.z.windows(lag + 1).map(|w| w[0] * w[lag]).collect();
            let cov = prods.iter().sum::<f64>() / n;
            // products of heavy-tailed neighbours: use their own spread
            let sd = (prods.iter().map(|p| p * p).sum::<f64>() / n / n).sqrt();
            assert!(cov.abs() < 3.5 * sd, "lag {lag}: {cov} vs {sd}");
        }
    }

    #[test]
    fn rejects_foreign_trajectory() {
        let k = build_linear_kernel(3.0, 10_000).unwrap();
        assert!(doob_decompose_chain(&k, &[100, 5], 1.0, 10.0).is_err());
        assert!(doob_decompose_chain(&k, &[100], 1.0, 10.0).is_err());
        assert!(doob_decompose_chain(&k, &[100, 100], 1.0, 0.0).is_err());
    }

    #[test]
    fn iid_bounded_input_has_unit_sum_of_squares() {
        // theta = 0 and Y = 0: sum Z^2 / (n H) -> 1
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vals: Vec<f64> = (0..200_000)
            .map(|_| if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 })
            .collect();
        let d = DoobDecomposition {
            x: vals.clone(),
            y: vec![0.0; vals.len() - 1],
            z: vals[1..].to_vec(),
            e: vals[..vals.len() - 1].iter().map(|_| 0.0).collect(),
            theta: 0.0,
            truncation: 2.0,
            approximate: false,
        };
        let m = mcleish_diagnostics(&d, 1.0).unwrap();
        assert!((m.sum_squares - 1.0).abs() < 1e-12);
        assert_eq!(m.target, 1.0);
        assert!(m.max_term < 1e-4);
        assert!(mcleish_diagnostics(&d, 0.0).is_err());
    }

    #[test]
    fn max_term_shrinks_with_n() {
        let k = build_linear_kernel(3.0, 1_000_000).unwrap();
        let mu = 1.688;
        let avg_max = |n: usize| {
            let reps = 20;
            (0..reps)
                .map(|r| {
                    let traj = run_chain(&k, n, 100 + r as u64);
                    let c = truncation_level(n as u64);
                    let d = doob_decompose_chain(&k, &traj, mu, c).unwrap();
                    let h = crate::stats::truncated_variance(&d.x, c).unwrap();
                    mcleish_diagnostics(&d, h).unwrap().max_term
                })
                .sum::<f64>()
                / reps as f64
        };
        let (a, b, c) = (avg_max(1000), avg_max(10_000), avg_max(100_000));
        assert!(c < a && b < a, "{a} {b} {c}");
    }

    #[test]
    fn truncation_becomes_negligible() {
        let k = build_linear_kernel(3.0, 1_000_000).unwrap();
        let mu = 1.688;
        let frac_times_n = |n: usize| {
            let reps = 10;
            let mut hits = 0usize;
            for r in 0..reps {
                let traj = run_chain(&k, n, 500 + r as u64);
                let c = truncation_level(n as u64);
                hits += traj[1..].iter().filter(|&&m| (m as f64 - mu).abs() >= c).count();
            }
            hits as f64 / reps as f64
        };
        let (a, b) = (frac_times_n(1000), frac_times_n(100_000));
        // n P(|X| >= c_n) = n * O(1 / (n ln ln n)) decreases slowly
        assert!(b < a.max(0.5) * 1.5, "{a} {b}");
    }

    #[test]
    fn xi_proxy() {
        let r: Vec<(u64, f64)> = [1u64, 3, 3, 7, 1].iter().map(|&r| (r, r as f64)).collect();
        assert!(xi_residual(&r).iter().all(|v| *v == 0.0));
        let s = [(2u64, 1.0), (2, 3.0), (5, -1.0)];
        assert_eq!(xi_residual(&s), vec![-1.0, 1.0, 0.0]);
        let total: f64 = xi_residual(&s).iter().sum();
        assert!(total.abs() < 1e-15);
    }

    #[test]
    fn estimated_decomposition_is_labelled() {
        let vals = vec![1.0, -2.0, 0.5, 3.0, -1.0];
        let cells = vec![3, 1, 2, 5, 1];
        let d = doob_decompose_estimated(&vals, &cells, 0.5, 10.0).unwrap();
        assert!(d.approximate);
        for i in 0..d.steps() {
            assert!((d.x[i + 1] - d.z[i] - d.y[i]).abs() < 1e-15);
        }
        assert!(d.identity_defect().abs() < 1e-12);
        assert!(doob_decompose_estimated(&vals, &cells[..3], 0.5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn identity_holds_for_any_centre(seed in any::<u64>(), center in 0.5f64..5.0, c in 2.0f64..500.0) {
            let k = build_linear_kernel(3.0, 10_000).unwrap();
            let traj = run_chain(&k, 500, seed);
            let d = doob_decompose_chain(&k, &traj, center, c).unwrap();
            let scale = d.x.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            prop_assert!(d.identity_defect().abs() < 1e-10 * scale);
        }
    }
}
