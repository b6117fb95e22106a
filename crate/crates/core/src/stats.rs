//! Empirical limit-theorem machinery: truncated variances, tail constants,
//! normalised partial sums over independent replicas, goodness of fit,
//! transition-kernel estimates and autocovariances.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::chain::{ChainState, SpreadingKernel, DEFAULT_BURN_IN};
use crate::error::{Error, Result};
use crate::geometry::{sample_collision_measure, BilliardTable, PhaseVec};
use crate::induced::{previous_piece, InducedOrbit, ReducedSpaceSpec};
use crate::martingale::truncation_level;
use crate::observables::Observable;
use crate::seed::replica_rng;

/// Bootstrap resamples used for tail-constant intervals.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Minimum count for a tail grid point to enter the plateau fit.
pub const TAIL_MIN_COUNT: u64 = 100;

/// `H(t) = Var(X 1{|X| < t})`.
pub fn truncated_variance(samples: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation must be positive, got {t}")));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut acc = TruncatedMoments::default();
    for &x in samples {
        acc.push(x, t);
    }
    Ok(acc.variance())
}

/// Streaming first and second moments of `X 1{|X| < t}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TruncatedMoments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl TruncatedMoments {
    pub fn push(&mut self, x: f64, t: f64) {
        self.count += 1;
        if x.abs() < t {
            self.sum += x;
            self.sum_sq += x * x;
        }
    }

    pub fn merge(&mut self, o: &Self) {
        self.count += o.count;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let n = self.count as f64;
        let m = self.sum / n;
        (self.sum_sq / n - m * m).max(0.0)
    }
}

/// Roughly logarithmic integer grid from `lo` to `hi` with `points` entries
/// (duplicates removed).
pub fn log_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    if points <= 1 || hi <= lo {
        return vec![lo];
    }
    let r = (hi as f64 / lo as f64).ln() / (points - 1) as f64;
    let mut g: Vec<u64> = (0..points)
        .map(|i| (lo as f64 * (r * i as f64).exp()).round() as u64)
        .collect();
    g.dedup();
    g
}

/// Counts of samples in the buckets `[g_j, g_{j+1})` of a tail grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TailCounter {
    grid: Vec<u64>,
    buckets: Vec<u64>,
    total: u64,
}

impl TailCounter {
    pub fn new(grid: Vec<u64>) -> Result<Self> {
        if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] == 0 {
            return Err(Error::InvalidParameter(
                "tail grid must be positive and strictly increasing".into(),
            ));
        }
        let k = grid.len();
        Ok(Self {
            grid,
            buckets: vec![0; k],
            total: 0,
        })
    }

    pub fn grid(&self) -> &[u64] {
        &self.grid
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn push(&mut self, x: f64) {
        self.total += 1;
        let a = x.abs();
        if a < self.grid[0] as f64 {
            return;
        }
        let j = self.grid.partition_point(|&g| g as f64 <= a) - 1;
        self.buckets[j] += 1;
    }

    pub fn merge(&mut self, o: &Self) -> Result<()> {
        if o.grid != self.grid {
            return Err(Error::InvalidParameter("tail grids differ".into()));
        }
        self.total += o.total;
        for (a, b) in self.buckets.iter_mut().zip(&o.buckets) {
            *a += b;
        }
        Ok(())
    }

    /// `#{|X| >= g_j}` for every grid point.
    pub fn cumulative(&self) -> Vec<u64> {
        cumulate(&self.buckets)
    }

    /// Plateau of `n^2 P(|X| >= n)` with a Poisson-bootstrap percentile
    /// interval.
    pub fn estimate(&self, seed: u64) -> Result<TailEstimate> {
        let counts = self.cumulative();
        let total = self.total;
        if total == 0 {
            return Err(Error::InsufficientData("no samples".into()));
        }
        let nf = total as f64;
        let prob: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
        let n2prob: Vec<f64> = self
            .grid
            .iter()
            .zip(&prob)
            .map(|(&g, &p)| (g as f64).powi(2) * p)
            .collect();
        let used: Vec<bool> = counts.iter().map(|&c| c >= TAIL_MIN_COUNT).collect();
        if counts[0] == 0 {
            return Ok(TailEstimate {
                grid: self.grid.clone(),
                counts,
                prob,
                n2prob,
                used,
                total,
                plateau: 0.0,
                slope: 0.0,
                ci: (0.0, 0.0),
            });
        }
        let (plateau, slope) = plateau_fit(&self.grid, &counts, total)?;
        let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(seed);
        let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        for _ in 0..BOOTSTRAP_RESAMPLES {
            let resampled: Vec<u64> = self
                .buckets
                .iter()
                .map(|&b| {
                    if b == 0 {
                        0
                    } else {
                        Poisson::new(b as f64).expect("positive mean").sample(&mut rng) as u64
                    }
                })
                .collect();
            if let Ok((c, _)) = plateau_fit(&self.grid, &cumulate(&resampled), total) {
                boot.push(c);
            }
        }
        boot.sort_by(f64::total_cmp);
        let ci = if boot.is_empty() {
            (plateau, plateau)
        } else {
            (quantile_sorted(&boot, 0.025), quantile_sorted(&boot, 0.975))
        };
        Ok(TailEstimate {
            grid: self.grid.clone(),
            counts,
            prob,
            n2prob,
            used,
            total,
            plateau,
            slope,
            ci,
        })
    }
}

fn cumulate(buckets: &[u64]) -> Vec<u64> {
    let mut out = vec![0; buckets.len()];
    let mut acc = 0;
    for j in (0..buckets.len()).rev() {
        acc += buckets[j];
        out[j] = acc;
    }
    out
}

/// Weighted least squares `n^2 P = c + b / n` over grid points with enough
/// mass; weights are inverse Poisson variances. A single usable point gives
/// its own value.
fn plateau_fit(grid: &[u64], counts: &[u64], total: u64) -> Result<(f64, f64)> {
    let nf = total as f64;
    let pts: Vec<(f64, f64, f64)> = grid
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c >= TAIL_MIN_COUNT)
        .map(|(&g, &c)| {
            let g = g as f64;
            let y = g * g * c as f64 / nf;
            let var = g.powi(4) * c as f64 / (nf * nf);
            (1.0 / g, y, 1.0 / var)
        })
        .collect();
    match pts.len() {
        0 => Err(Error::InsufficientData(
            "no tail grid point reaches the minimum count; the grid is too deep".into(),
        )),
        1 => Ok((pts[0].1, 0.0)),
        _ => {
            let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &(x, y, w) in &pts {
                sw += w;
                sx += w * x;
                sy += w * y;
                sxx += w * x * x;
                sxy += w * x * y;
            }
            let det = sw * sxx - sx * sx;
            if det.abs() <= 1e-300 {
                return Ok((sy / sw, 0.0));
            }
            let b = (sw * sxy - sx * sy) / det;
            let c = (sy - b * sx) / sw;
            Ok((c, b))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailEstimate {
    pub grid: Vec<u64>,
    pub counts: Vec<u64>,
    pub prob: Vec<f64>,
    pub n2prob: Vec<f64>,
    /// Grid points that entered the fit.
    pub used: Vec<bool>,
    pub total: u64,
    /// Intercept `c` of `n^2 P = c + b / n`.
    pub plateau: f64,
    /// The `b` coefficient.
    pub slope: f64,
    /// 95% percentile bootstrap interval of the plateau.
    pub ci: (f64, f64),
}

impl TailEstimate {
    /// Unweighted mean of `n^2 P` over the points used in the fit.
    pub fn mean_over_used(&self) -> f64 {
        let v: Vec<f64> = self
            .n2prob
            .iter()
            .zip(&self.used)
            .filter(|(_, &u)| u)
            .map(|(&y, _)| y)
            .collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

pub fn tail_constant(samples: &[f64], grid: Vec<u64>, seed: u64) -> Result<TailEstimate> {
    let mut c = TailCounter::new(grid)?;
    for &x in samples {
        c.push(x);
    }
    c.estimate(seed)
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (pos - i as f64) * (v[j] - v[i])
}

/// Kolmogorov–Smirnov distance between the empirical law of `values` and
/// the standard normal.
pub fn ks_distance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// Mean, variance, skewness and excess kurtosis (population moments).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub skew: f64,
    pub kurt: f64,
}

pub fn moments(values: &[f64]) -> Moments {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Moments {
        mean,
        var: m2,
        skew,
        kurt,
    }
}

/// Interquartile range divided by that of the standard normal.
pub fn robust_scale(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.len() < 2 {
        return 0.0;
    }
    (quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)) / 1.348_979_500_392_163_6
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub stat: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Pearson test of equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> Result<ChiSquare> {
    if counts.len() < 2 {
        return Err(Error::InsufficientData("need at least two cells".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData("no counts".into()));
    }
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dof = (counts.len() - 1) as f64;
    let p_value = ChiSquared::new(dof).expect("positive dof").sf(stat);
    Ok(ChiSquare { stat, dof, p_value })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData("need two or more paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        intercept: my - slope * mx,
        slope,
        r2,
    })
}

/// Biased autocovariances `(1/N) sum (x_i - m)(x_{i+k} - m)` for `k = 0..=max_lag`.
pub fn autocovariance(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return vec![0.0; max_lag + 1];
    }
    let m = series.iter().sum::<f64>() / n as f64;
    (0..=max_lag)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            series[..n - k]
                .iter()
                .zip(&series[k..])
                .map(|(a, b)| (a - m) * (b - m))
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

/// A stationary process whose partial sums feed the CLT experiments.
pub trait IncrementSource: Sync {
    /// Append `n` consecutive raw values of one fresh stationary replica.
    fn fill(&self, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<()>;
    /// Stationary mean subtracted before summing.
    fn center(&self) -> f64;
    fn theta(&self) -> f64;
    fn describe(&self) -> String;
}

/// Cell indices of a spreading chain started from the `m^-3` law and run
/// through a burn-in.
pub struct ChainSource<'a> {
    pub kernel: &'a SpreadingKernel,
    pub center: f64,
    pub burn_in: u64,
    pub labels: u32,
}

impl<'a> ChainSource<'a> {
    pub fn new(kernel: &'a SpreadingKernel, center: f64) -> Self {
        Self {
            kernel,
            center,
            burn_in: DEFAULT_BURN_IN,
            labels: 1,
        }
    }

    /// Raw trajectory `m_0, ..., m_n` after burn-in.
    pub fn trajectory(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let mut s: ChainState = self.kernel.sample_stationary_cell(rng);
        for _ in 0..self.burn_in {
            s = self.kernel.chain_step(s, self.labels, rng);
        }
        let mut out = Vec::with_capacity(n + 1);
        out.push(s.m);
        for _ in 0..n {
            s = self.kernel.chain_step(s, self.labels, rng);
            out.push(s.m);
        }
        out
    }
}

impl IncrementSource for ChainSource<'_> {
    fn fill(&self, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<()> {
        let t = self.trajectory(n, rng);
        out.extend(t[1..].iter().map(|&m| m as f64));
        Ok(())
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn theta(&self) -> f64 {
        self.kernel.theta()
    }

    fn describe(&self) -> String {
        format!("chain {:?}", self.kernel.family())
    }
}

/// Induced values `f~` along an induced billiard orbit started from `mu`.
pub struct InducedSource<'a> {
    pub table: &'a BilliardTable,
    pub spec: ReducedSpaceSpec,
    pub observable: &'a dyn Observable,
    pub center: f64,
    pub theta: f64,
    pub cap: u64,
}

impl IncrementSource for InducedSource<'_> {
    fn fill(&self, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<()> {
        let mut orbit = InducedOrbit::new(self.table, self.spec, self.cap, rng);
        for _ in 0..n {
            let (_, v) = orbit.next_summed(rng, |x, m| self.observable.eval(x, m))?;
            out.push(v);
        }
        Ok(())
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn theta(&self) -> f64 {
        self.theta
    }

    fn describe(&self) -> String {
        format!("induced {}", self.observable.describe())
    }
}

/// Values `f(T^k x)` along a billiard-map orbit started from the collision
/// measure.
pub struct MapSource<'a> {
    pub table: &'a BilliardTable,
    pub spec: ReducedSpaceSpec,
    pub observable: &'a dyn Observable,
    pub center: f64,
    pub theta: f64,
}

impl MapSource<'_> {
    fn fresh_start(&self, rng: &mut ChaCha8Rng) -> (PhaseVec, usize, bool) {
        loop {
            let x = sample_collision_measure(self.table, rng);
            if let Ok(prev) = previous_piece(self.table, x) {
                let (piece, _) = self.table.locate(x.r);
                let in_m = self.spec.contains_piece(self.table, piece, prev);
                return (x, piece, in_m);
            }
        }
    }
}

impl IncrementSource for MapSource<'_> {
    fn fill(&self, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<()> {
        let (mut x, mut piece, mut in_m) = self.fresh_start(rng);
        for _ in 0..n {
            out.push(self.observable.eval(x, in_m));
            match self.table.step(x) {
                Ok(c) => {
                    in_m = self.spec.contains_piece(self.table, c.piece, piece);
                    x = c.state;
                    piece = c.piece;
                }
                Err(e) if e.is_singular() => (x, piece, in_m) = self.fresh_start(rng),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn theta(&self) -> f64 {
        self.theta
    }

    fn describe(&self) -> String {
        format!("map {}", self.observable.describe())
    }
}

/// Independent standard normal values.
pub struct IidNormalSource;

impl IncrementSource for IidNormalSource {
    fn fill(&self, n: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) -> Result<()> {
        out.extend((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        Ok(())
    }

    fn center(&self) -> f64 {
        0.0
    }

    fn theta(&self) -> f64 {
        0.0
    }

    fn describe(&self) -> String {
        "iid normal".into()
    }
}

/// Centred partial sums of independent replicas at a set of checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaRuns {
    pub n: usize,
    pub checkpoints: Vec<usize>,
    /// `partial[r][j] = S_{checkpoints[j]}` for successful replica `r`.
    pub partial: Vec<Vec<f64>>,
    /// `c_n` used for the pooled truncated variance.
    pub truncation: f64,
    /// Pooled `H(c_n)` over all centred values.
    pub h_cn: f64,
    pub theta: f64,
    /// Replicas dropped because of simulation errors.
    pub failures: u64,
    pub errors: Vec<String>,
}

/// Run `replicas` independent replicas of length `n`. Replica `r` uses the
/// stream `replica_rng(seed, r)`; results are kept in replica order.
pub fn run_replicas(
    source: &dyn IncrementSource,
    n: usize,
    replicas: usize,
    checkpoints: &[usize],
    seed: u64,
) -> Result<ReplicaRuns> {
    if n == 0 || replicas == 0 {
        return Err(Error::InvalidParameter("n and replicas must be positive".into()));
    }
    let mut cps: Vec<usize> = checkpoints.iter().copied().filter(|&c| c <= n).collect();
    cps.push(n);
    cps.sort_unstable();
    cps.dedup();
    let c = truncation_level(n as u64);
    let center = source.center();
    let outcomes: Vec<Result<(Vec<f64>, TruncatedMoments)>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            let mut buf = Vec::with_capacity(n);
            source.fill(n, &mut rng, &mut buf)?;
            let mut tm = TruncatedMoments::default();
            let mut sums = Vec::with_capacity(cps.len());
            let mut s = 0.0;
            let mut next = 0;
            while next < cps.len() && cps[next] == 0 {
                sums.push(0.0);
                next += 1;
            }
            for (k, &v) in buf.iter().enumerate() {
                let x = v - center;
                tm.push(x, c);
                s += x;
                while next < cps.len() && cps[next] == k + 1 {
                    sums.push(s);
                    next += 1;
                }
            }
            Ok((sums, tm))
        })
        .collect();
    let mut partial = Vec::with_capacity(replicas);
    let mut pooled = TruncatedMoments::default();
    let mut errors = Vec::new();
    for o in outcomes {
        match o {
            Ok((s, tm)) => {
                partial.push(s);
                pooled.merge(&tm);
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    if partial.is_empty() {
        return Err(Error::InsufficientData(format!(
            "every replica failed; first error: {}",
            errors.first().cloned().unwrap_or_default()
        )));
    }
    Ok(ReplicaRuns {
        n,
        checkpoints: cps,
        partial,
        truncation: c,
        h_cn: pooled.variance(),
        theta: source.theta(),
        failures: errors.len() as u64,
        errors,
    })
}

/// Denominator applied to `S_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Normalizer {
    /// `sqrt(factor n H(c_n))` with the pooled empirical `H`.
    Empirical { factor: f64 },
    /// `sqrt(factor n h)` with a given `h`.
    Given { factor: f64, h: f64 },
    /// `sqrt(sigma2 n ln n)`.
    ClosedForm { sigma2: f64 },
}

impl Normalizer {
    /// Empirical normaliser with the `(1 + theta)/(1 - theta)` factor.
    pub fn empirical(theta: f64) -> Self {
        Self::Empirical {
            factor: (1.0 + theta) / (1.0 - theta),
        }
    }

    pub fn denominator(&self, n: usize, h_cn: f64) -> f64 {
        let nf = n as f64;
        match *self {
            Self::Empirical { factor } => (factor * nf * h_cn).sqrt(),
            Self::Given { factor, h } => (factor * nf * h).sqrt(),
            Self::ClosedForm { sigma2 } => (sigma2 * nf * nf.ln()).sqrt(),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Empirical { factor } => format!("empirical(factor={factor})"),
            Self::Given { factor, h } => format!("given(factor={factor},h={h})"),
            Self::ClosedForm { sigma2 } => format!("closed_form(sigma2={sigma2})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CltResult {
    pub values: Vec<f64>,
    pub ks: f64,
    pub moments: Moments,
    pub denominator: f64,
    pub normalizer: Normalizer,
    pub failures: u64,
}

impl ReplicaRuns {
    /// Final sums `S_n` in replica order.
    pub fn final_sums(&self) -> Vec<f64> {
        self.partial.iter().map(|p| *p.last().expect("n is a checkpoint")).collect()
    }

    pub fn normalize(&self, normalizer: Normalizer) -> CltResult {
        let d = normalizer.denominator(self.n, self.h_cn);
        let values: Vec<f64> = self.final_sums().iter().map(|s| s / d).collect();
        CltResult {
            ks: ks_distance(&values),
            moments: moments(&values),
            values,
            denominator: d,
            normalizer,
            failures: self.failures,
        }
    }
}

pub fn clt_experiment(
    source: &dyn IncrementSource,
    n: usize,
    replicas: usize,
    normalizer: Normalizer,
    seed: u64,
) -> Result<CltResult> {
    Ok(run_replicas(source, n, replicas, &[], seed)?.normalize(normalizer))
}

/// Finite-dimensional marginals of `W_n(t) = S_[tn] / denominator`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    /// `t` values, starting with 0.
    pub t: Vec<f64>,
    /// `w[r][j] = W_n(t_j)` for replica `r`.
    pub w: Vec<Vec<f64>>,
    pub var: Vec<f64>,
    /// OLS fit of `Var W(t)` against `t` over the positive grid.
    pub var_fit: LinearFit,
    /// Correlations of the increments over consecutive grid intervals.
    pub increment_corr: Vec<Vec<f64>>,
    /// KS distance of `W(t)` against `N(0, Var W(1) t)` for each positive `t`.
    pub ks: Vec<f64>,
}

impl PathSample {
    pub fn var_at_one(&self) -> f64 {
        *self.var.last().expect("non-empty grid")
    }

    pub fn max_increment_corr(&self) -> f64 {
        let k = self.increment_corr.len();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    worst = worst.max(self.increment_corr[i][j].abs());
                }
            }
        }
        worst
    }
}

pub fn path_experiment(
    source: &dyn IncrementSource,
    n: usize,
    replicas: usize,
    t_grid: &[f64],
    normalizer: Normalizer,
    seed: u64,
) -> Result<PathSample> {
    let cps = path_checkpoints(n, t_grid)?;
    let runs = run_replicas(source, n, replicas, &cps, seed)?;
    runs.path(t_grid, normalizer)
}

fn path_checkpoints(n: usize, t_grid: &[f64]) -> Result<Vec<usize>> {
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::InvalidParameter("t grid must lie in (0, 1]".into()));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("t grid must be increasing".into()));
    }
    Ok(t_grid.iter().map(|&t| (t * n as f64).floor() as usize).collect())
}

impl ReplicaRuns {
    pub fn path(&self, t_grid: &[f64], normalizer: Normalizer) -> Result<PathSample> {
        let cps = path_checkpoints(self.n, t_grid)?;
        let d = normalizer.denominator(self.n, self.h_cn);
        let mut t = vec![0.0];
        t.extend_from_slice(t_grid);
        let idx: Vec<usize> = cps
            .iter()
            .map(|c| {
                self.checkpoints
                    .binary_search(c)
                    .map_err(|_| Error::InvalidParameter(format!("checkpoint {c} was not recorded")))
            })
            .collect::<Result<_>>()?;
        let w: Vec<Vec<f64>> = self
            .partial
            .iter()
            .map(|p| {
                let mut row = vec![0.0];
                row.extend(idx.iter().map(|&i| p[i] / d));
                row
            })
            .collect();
        let k = t.len();
        let column = |j: usize| -> Vec<f64> { w.iter().map(|row| row[j]).collect() };
        let var: Vec<f64> = (0..k).map(|j| moments(&column(j)).var).collect();
        let var_fit = linear_fit(&t[1..], &var[1..]).unwrap_or(LinearFit {
            intercept: 0.0,
            slope: var[k - 1],
            r2: 1.0,
        });
        let incs: Vec<Vec<f64>> = (1..k)
            .map(|j| w.iter().map(|row| row[j] - row[j - 1]).collect())
            .collect();
        let increment_corr = (0..incs.len())
            .map(|a| (0..incs.len()).map(|b| correlation(&incs[a], &incs[b])).collect())
            .collect();
        let v1 = var[k - 1];
        let ks = (1..k)
            .map(|j| {
                let s = (v1 * t[j]).sqrt();
                let col: Vec<f64> = column(j).iter().map(|x| x / s).collect();
                ks_distance(&col)
            })
            .collect();
        Ok(PathSample {
            t,
            w,
            var,
            var_fit,
            increment_corr,
            ks,
        })
    }
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Integer bin edges growing by `ratio`, starting at 1 and covering `max`.
pub fn log_bin_edges(max: u64, ratio: f64) -> Vec<u64> {
    let mut e = vec![1u64];
    while *e.last().expect("non-empty") <= max {
        let last = *e.last().expect("non-empty");
        e.push(((last as f64 * ratio).ceil() as u64).max(last + 1));
    }
    e
}

/// Index of the bin `[e_j, e_{j+1})` that holds `v`.
pub fn bin_index(edges: &[u64], v: u64) -> Option<usize> {
    if v < edges[0] {
        return None;
    }
    let j = edges.partition_point(|&e| e <= v);
    (j < edges.len()).then(|| j - 1)
}

/// `P(lo <= n <= hi | m)` under a model kernel.
pub type WindowMass<'a> = &'a (dyn Fn(u64, u64, u64) -> f64 + Sync);

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionCell {
    pub m_lo: u64,
    pub m_hi: u64,
    pub n_lo: u64,
    pub n_hi: u64,
    pub count: u64,
    pub row_total: u64,
    /// Frequency per integer `n` in the bin.
    pub p_hat: f64,
    pub stderr: f64,
    pub model_p: Option<f64>,
}

impl TransitionCell {
    /// Geometric centre of the `n` bin.
    pub fn n_center(&self) -> f64 {
        ((self.n_lo as f64) * (self.n_hi as f64)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionEstimate {
    pub cells: Vec<TransitionCell>,
    /// m bins without any pair.
    pub empty_m_bins: Vec<(u64, u64)>,
}

/// Binned conditional frequencies of `n` given `m`. `m` bins are 20% wide,
/// `n` bins grow geometrically by 20% as well. Model masses are averaged over
/// the pairs of each `m` bin, evaluated once per distinct `m`.
pub fn transition_estimate(
    pairs: &[(u64, u64)],
    model: Option<WindowMass<'_>>,
) -> Result<TransitionEstimate> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no transition pairs".into()));
    }
    let max = pairs.iter().map(|&(m, n)| m.max(n)).max().unwrap_or(1).max(1);
    let edges = log_bin_edges(max, 1.2);
    let nb = edges.len() - 1;
    let mut counts = vec![vec![0u64; nb]; nb];
    let mut by_m: Vec<std::collections::BTreeMap<u64, u64>> = vec![Default::default(); nb];
    for &(m, n) in pairs {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("cell indices start at 1".into()));
        }
        let i = bin_index(&edges, m).expect("edges cover max");
        let j = bin_index(&edges, n).expect("edges cover max");
        counts[i][j] += 1;
        *by_m[i].entry(m).or_default() += 1;
    }
    let mut cells = Vec::new();
    let mut empty = Vec::new();
    for i in 0..nb {
        let total: u64 = counts[i].iter().sum();
        let (m_lo, m_hi) = (edges[i], edges[i + 1] - 1);
        if total == 0 {
            empty.push((m_lo, m_hi));
            continue;
        }
        let lo_j = counts[i].iter().position(|&c| c > 0).expect("non-empty row");
        let hi_j = counts[i].iter().rposition(|&c| c > 0).expect("non-empty row");
        for j in lo_j..=hi_j {
            let (n_lo, n_hi) = (edges[j], edges[j + 1] - 1);
            let width = (n_hi - n_lo + 1) as f64;
            let p = counts[i][j] as f64 / total as f64;
            let model_p = model.map(|f| {
                by_m[i]
                    .iter()
                    .map(|(&m, &c)| c as f64 * f(m, n_lo, n_hi))
                    .sum::<f64>()
                    / total as f64
                    / width
            });
            cells.push(TransitionCell {
                m_lo,
                m_hi,
                n_lo,
                n_hi,
                count: counts[i][j],
                row_total: total,
                p_hat: p / width,
                stderr: (p * (1.0 - p) / total as f64).sqrt() / width,
                model_p,
            });
        }
    }
    Ok(TransitionEstimate {
        cells,
        empty_m_bins: empty,
    })
}

/// Observed over expected counts for `n / m` in `[u_lo, u_hi)`, pooled over
/// the pairs with `m` in `[m_lo, m_hi]`. For a kernel `c m / n^2` this is the
/// average of `n^2 p(n | m) / (c m)` over the window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelRatio {
    pub u_lo: f64,
    pub u_hi: f64,
    pub observed: u64,
    pub expected: f64,
    pub ratio: f64,
    pub stderr: f64,
}

pub fn kernel_ratios(
    pairs: &[(u64, u64)],
    m_range: (u64, u64),
    u_edges: &[f64],
    model: WindowMass<'_>,
) -> Vec<KernelRatio> {
    let mut by_m = std::collections::BTreeMap::<u64, u64>::new();
    let mut obs = vec![0u64; u_edges.len().saturating_sub(1)];
    for &(m, n) in pairs {
        if m < m_range.0 || m > m_range.1 {
            continue;
        }
        *by_m.entry(m).or_default() += 1;
        for j in 0..obs.len() {
            let (lo, hi) = window(m, u_edges[j], u_edges[j + 1]);
            if n >= lo && n <= hi {
                obs[j] += 1;
                break;
            }
        }
    }
    (0..obs.len())
        .map(|j| {
            let expected: f64 = by_m
                .iter()
                .map(|(&m, &c)| {
                    let (lo, hi) = window(m, u_edges[j], u_edges[j + 1]);
                    if hi < lo {
                        0.0
                    } else {
                        c as f64 * model(m, lo, hi)
                    }
                })
                .sum();
            let ratio = if expected > 0.0 { obs[j] as f64 / expected } else { f64::NAN };
            KernelRatio {
                u_lo: u_edges[j],
                u_hi: u_edges[j + 1],
                observed: obs[j],
                expected,
                ratio,
                stderr: (obs[j] as f64).sqrt() / expected,
            }
        })
        .collect()
}

// integers n with u_lo <= n / m < u_hi
fn window(m: u64, u_lo: f64, u_hi: f64) -> (u64, u64) {
    let mf = m as f64;
    let lo = (u_lo * mf).ceil().max(1.0) as u64;
    let hi_excl = (u_hi * mf).ceil() as u64;
    (lo, hi_excl.saturating_sub(1))
}

/// Number of pairs with `m >= m_min` whose `n` falls outside `support(m)`.
pub fn support_violations<S>(pairs: &[(u64, u64)], m_min: u64, support: S) -> u64
where
    S: Fn(u64) -> (f64, f64),
{
    pairs
        .iter()
        .filter(|&&(m, n)| {
            if m < m_min {
                return false;
            }
            let (lo, hi) = support(m);
            (n as f64) < lo || (n as f64) > hi
        })
        .count() as u64
}

/// `3m / (8 n^2)` summed over `[lo, hi]` intersected with `[m/3, 3m]`.
pub fn stadium_kernel_mass(m: u64, lo: u64, hi: u64) -> f64 {
    let mf = m as f64;
    let a = lo.max((mf / 3.0).ceil() as u64);
    let b = hi.min((3.0 * mf).floor() as u64);
    if b < a {
        return 0.0;
    }
    if b - a <= 4096 {
        return (a..=b).map(|n| 3.0 * mf / (8.0 * (n as f64).powi(2))).sum();
    }
    // Euler–Maclaurin for the long sums
    let f = |x: f64| 3.0 * mf / (8.0 * x * x);
    let (af, bf) = (a as f64, b as f64);
    3.0 * mf / 8.0 * (1.0 / af - 1.0 / bf) + 0.5 * (f(af) + f(bf))
        + (3.0 * mf / 4.0) * (1.0 / af.powi(3) - 1.0 / bf.powi(3)) / 12.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_linear_kernel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn cubic_sample(rng: &mut ChaCha8Rng) -> f64 {
        // P(X >= n) = 1/n^2
        1.0 / rng.random::<f64>().sqrt()
    }

    #[test]
    fn truncated_variance_basics() {
        assert_eq!(truncated_variance(&[3.0; 2000], 10.0).unwrap(), 0.0);
        assert!(truncated_variance(&[1.0], 0.0).is_err());
        assert!(truncated_variance(&[], 1.0).is_err());
        // values at or above t are zeroed
        let v = truncated_variance(&[1.0, -1.0, 5.0, -5.0], 2.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    // H(t) for P(X = n) ∝ n^-3 on [1, m_max], X centred at its mean
    fn cubic_law_h(t: f64, m_max: u64) -> f64 {
        let z: f64 = (1..=m_max).map(|n| (n as f64).powi(-3)).sum();
        let mean: f64 = (1..=m_max).map(|n| (n as f64).powi(-2)).sum::<f64>() / z;
        let (mut s1, mut s2) = (0.0, 0.0);
        for n in 1..=m_max {
            let x = n as f64 - mean;
            if x.abs() < t {
                let p = (n as f64).powi(-3) / z;
                s1 += p * x;
                s2 += p * x * x;
            }
        }
        s2 - s1 * s1
    }

    #[test]
    fn cubic_law_truncated_variance_is_slowly_varying() {
        let m_max = 1_000_000;
        // H(t) = (ln t + K) / zeta(3) + o(1), so H(2t)/H(t) - 1 decays like ln 2 / ln t
        let mut prev = f64::INFINITY;
        for t in [10.0, 100.0, 1000.0, 100_000.0] {
            let excess = cubic_law_h(2.0 * t, m_max) / cubic_law_h(t, m_max) - 1.0;
            assert!(excess > 0.0 && excess < prev, "t {t}: {excess}");
            prev = excess;
        }
        let zeta3 = 1.202_056_903_159_594;
        let gap = cubic_law_h(200_000.0, m_max) - cubic_law_h(100_000.0, m_max);
        assert!((gap * zeta3 / 2f64.ln() - 1.0).abs() < 0.01, "{gap}");
        // c_M = lim n^2 P(X >= n) = 1 / (2 zeta(3)); H(c_n) ~ c_M ln n with ln c_n ~ ln n / 2
        let c_m = 1.0 / (2.0 * 1.202_056_903_159_594);
        let n = 1e8f64;
        let h = cubic_law_h(truncation_level(n as u64), m_max);
        let r = h / (c_m * n.ln());
        assert!((r - 1.0).abs() < 0.2, "ratio {r}");
        // Monte Carlo agrees with the closed form
        let k = build_linear_kernel(3.0, m_max).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mean: f64 = (1..=m_max).map(|n| (n as f64).powi(-2)).sum::<f64>()
            / (1..=m_max).map(|n| (n as f64).powi(-3)).sum::<f64>();
        let xs: Vec<f64> = (0..400_000)
            .map(|_| k.sample_stationary_cell(&mut rng).m as f64 - mean)
            .collect();
        let mc = truncated_variance(&xs, 50.0).unwrap();
        let exact = cubic_law_h(50.0, m_max);
        assert!((mc / exact - 1.0).abs() < 0.03, "{mc} vs {exact}");
    }

    #[test]
    fn synthetic_tail_constant_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = TailCounter::new(log_grid(10, 100, 11)).unwrap();
        for _ in 0..2_000_000 {
            c.push(cubic_sample(&mut rng));
        }
        let e = c.estimate(1).unwrap();
        assert!((e.plateau - 1.0).abs() < 0.05, "{}", e.plateau);
        assert!(e.ci.0 <= e.plateau && e.plateau <= e.ci.1);
        assert!(e.prob.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(e.counts.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn bounded_samples_have_no_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>() * 10.0).collect();
        let e = tail_constant(&xs, log_grid(20, 200, 5), 0).unwrap();
        assert_eq!(e.plateau, 0.0);
        // a grid deeper than the data reaches is an error
        let ys: Vec<f64> = (0..1000).map(|_| cubic_sample(&mut rng)).collect();
        assert!(matches!(
            tail_constant(&ys, log_grid(50, 500, 5), 0),
            Err(Error::InsufficientData(_))
        ));
        assert!(TailCounter::new(vec![5, 5]).is_err());
    }

    #[test]
    fn ks_reference_values() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 1000;
        let q: Vec<f64> = (1..=n)
            .map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64))
            .collect();
        let d = ks_distance(&q);
        assert!(d <= 0.5 / n as f64 * (1.0 + 1e-6), "{d}");
        assert!((ks_distance(&[0.0]) - 0.5).abs() < 1e-15);
        let wide: Vec<f64> = q.iter().map(|x| 2.0 * x).collect();
        // sup |Phi(x/2) - Phi(x)| is about 0.17
        assert!(ks_distance(&wide) > 0.15);
    }

    #[test]
    fn chi_square_detects_bias() {
        let even = chi_square_uniform(&[1000, 1000, 1000, 1000]).unwrap();
        assert_eq!(even.stat, 0.0);
        assert!((even.p_value - 1.0).abs() < 1e-12);
        let skewed = chi_square_uniform(&[1200, 1000, 900, 900]).unwrap();
        assert!(skewed.p_value < 1e-6);
    }

    #[test]
    fn iid_normal_clt() {
        let r = clt_experiment(
            &IidNormalSource,
            200,
            4000,
            Normalizer::Given { factor: 1.0, h: 1.0 },
            3,
        )
        .unwrap();
        assert!(r.ks <= 0.02, "{}", r.ks);
        assert!((r.moments.var - 1.0).abs() < 0.08);
        // the empirical H of a standard normal at c_n is close to one
        let runs = run_replicas(&IidNormalSource, 200, 500, &[], 3).unwrap();
        assert!((runs.h_cn - 1.0).abs() < 0.05);
    }

    #[test]
    fn replica_runs_are_deterministic() {
        let a = run_replicas(&IidNormalSource, 50, 64, &[10, 25], 9).unwrap();
        let b = run_replicas(&IidNormalSource, 50, 64, &[10, 25], 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checkpoints, vec![10, 25, 50]);
    }

    #[test]
    fn brownian_paths_from_iid_input() {
        let grid: Vec<f64> = (1..=5).map(|i| i as f64 / 5.0).collect();
        let p = path_experiment(
            &IidNormalSource,
            500,
            4000,
            &grid,
            Normalizer::Given { factor: 1.0, h: 1.0 },
            8,
        )
        .unwrap();
        assert!(p.w.iter().all(|row| row[0] == 0.0));
        let rel = (p.var_fit.slope - p.var_at_one()).abs() / p.var_at_one();
        assert!(rel < 0.15, "{rel}");
        assert!(p.max_increment_corr() < 0.06);
        assert!(p.ks.iter().all(|&d| d < 0.03));
        assert!(path_experiment(&IidNormalSource, 10, 10, &[0.0, 1.0], Normalizer::Given { factor: 1.0, h: 1.0 }, 0).is_err());
    }

    #[test]
    fn autocovariance_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let xs: Vec<f64> = (0..50_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ac = autocovariance(&xs, 10);
        assert!((ac[0] - moments(&xs).var).abs() < 1e-9);
        let sd = ac[0] / (xs.len() as f64).sqrt();
        assert!(ac[1..].iter().all(|a| a.abs() < 3.5 * sd));
    }

    #[test]
    fn chain_autocovariance_decays() {
        let k = build_linear_kernel(3.0, 100_000).unwrap();
        let src = ChainSource::new(&k, 1.688);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let c = truncation_level(2_000_000);
        let series: Vec<f64> = src
            .trajectory(2_000_000, &mut rng)
            .iter()
            .map(|&m| {
                let x = m as f64 - 1.688;
                if x.abs() < c {
                    x
                } else {
                    0.0
                }
            })
            .collect();
        let ac = autocovariance(&series, 20);
        let lags: Vec<f64> = (1..=20).map(|k| k as f64).collect();
        let logs: Vec<f64> = ac[1..].iter().map(|a| a.abs().max(1e-300).ln()).collect();
        let fit = linear_fit(&lags, &logs).unwrap();
        assert!(fit.slope < 0.0 && fit.r2 > 0.5, "{fit:?}");
    }

    #[test]
    fn chain_recovers_its_own_kernel() {
        let k = build_linear_kernel(3.0, 100_000).unwrap();
        let src = ChainSource::new(&k, 1.688);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let traj = src.trajectory(2_000_000, &mut rng);
        let pairs: Vec<(u64, u64)> = traj.windows(2).map(|w| (w[0], w[1])).collect();
        let mass = |m: u64, lo: u64, hi: u64| k.conditional_window(m, lo, hi).0;
        let est = transition_estimate(&pairs, Some(&mass)).unwrap();
        let mut checked = 0;
        for c in est.cells.iter().filter(|c| c.count >= 50) {
            let mp = c.model_p.unwrap();
            let z = (c.p_hat - mp) / c.stderr.max(1e-300);
            assert!(z.abs() < 4.5, "{c:?}");
            checked += 1;
        }
        assert!(checked > 20);
        let ratios = kernel_ratios(&pairs, (10, 40), &[0.5, 1.0, 2.0], &mass);
        for r in ratios {
            assert!((r.ratio - 1.0).abs() < 4.0 * r.stderr, "{r:?}");
        }
        assert_eq!(
            support_violations(&pairs, 50, |m| (m as f64 / 3.0 - 1.0, 3.0 * m as f64 + 1.0)),
            0
        );
    }

    #[test]
    fn stadium_kernel_mass_is_a_law() {
        for m in [100u64, 1000, 100_000] {
            let total = stadium_kernel_mass(m, 1, 10 * m);
            // sum over the support tends to one
            assert!((total - 1.0).abs() < 0.05, "m {m}: {total}");
        }
        let exact: f64 = (5000..=20000).map(|n| 3.0 * 10_000.0 / (8.0 * (n as f64).powi(2))).sum();
        assert!((stadium_kernel_mass(10_000, 5000, 20_000) - exact).abs() < 1e-10);
    }

    #[test]
    fn bins() {
        let e = log_bin_edges(100, 1.2);
        assert_eq!(e[0], 1);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        assert!(*e.last().unwrap() > 100);
        for v in 1..=100 {
            let j = bin_index(&e, v).unwrap();
            assert!(e[j] <= v && v < e[j + 1]);
        }
        assert_eq!(bin_index(&e, 0), None);
    }

    proptest! {
        #[test]
        fn moments_are_shift_invariant(xs in prop::collection::vec(-1e3f64..1e3, 3..50), s in -1e3f64..1e3) {
            let a = moments(&xs);
            let shifted: Vec<f64> = xs.iter().map(|x| x + s).collect();
            let b = moments(&shifted);
            prop_assert!((a.var - b.var).abs() <= 1e-6 * a.var.max(1.0));
            prop_assert!((a.mean + s - b.mean).abs() <= 1e-9 * (a.mean.abs() + s.abs()).max(1.0));
        }

        #[test]
        fn ks_is_a_distance(xs in prop::collection::vec(-5f64..5.0, 1..200)) {
            let d = ks_distance(&xs);
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn tail_counts_are_monotone(xs in prop::collection::vec(0f64..1e4, 1..500)) {
            let mut c = TailCounter::new(log_grid(1, 1000, 8)).unwrap();
            for &x in &xs { c.push(x); }
            let cum = c.cumulative();
            prop_assert!(cum.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(cum[0] as usize <= xs.len());
        }
    }
}
