//! Batch experiments behind the command line: each `cmd_*` reads an
//! [`ExperimentConfig`], runs replica-parallel simulations and writes CSV
//! files into the output directory.
//!
//! Replica `r` always draws from `replica_rng(seed, r)`, and results are
//! reduced in replica order, so outputs do not depend on the thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::chain::{
    build_algebraic_kernel, build_linear_kernel, distribution_mean, SpreadingKernel,
};
use crate::config::{ConfigError, ExperimentConfig, ModelConfig, NormalizerChoice, Process};
use crate::constants::{
    chain_constants, cusp_sigma2, drivebelt_sigma2, semidispersing_sigma2, stadium_sigma2,
    ChannelTerm, DiffusionConstant,
};
use crate::error::Error;
use crate::geometry::{
    build_drivebelt, build_lorentz_rect, build_stadium, BilliardTable, PhaseVec, RectCorner,
    Scatterer, TableKind, Vec2,
};
use crate::induced::{
    acceptance_count, measure_m_closed_form, return_map_with, sample_mu, InducedOrbit,
    ReducedSpaceSpec,
};
use crate::observables::{integrate_on_ranges, simpson, singular_ranges, CatalogObservable, Observable, ObservableSpec};
use crate::seed::{replica_rng, split_seed};
use crate::stats::{
    log_grid, path_experiment, run_replicas, stadium_kernel_mass, transition_estimate,
    ChainSource, IncrementSource, InducedSource, MapSource, Normalizer, TailCounter,
    TailEstimate, TransitionEstimate,
};

/// Draws per independent work unit of `collect_returns`.
pub const DRAW_CHUNK: u64 = 100_000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 2 for configuration errors, 3 when a simulation
    /// hits its iteration cap, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Sim(Error::InvalidParameter(_)) => 2,
            Self::Sim(Error::IterationCap { .. }) => 3,
            _ => 1,
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

/// Stationary reference `mu`-measure of the reduced space and where it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedMeasure {
    pub value: f64,
    pub monte_carlo: bool,
}

pub enum Model {
    Billiard {
        table: BilliardTable,
        spec: ReducedSpaceSpec,
        mu: ReducedMeasure,
    },
    Chain {
        kernel: SpreadingKernel,
    },
}

/// The Case I layout: 2x2 rectangle, a disk at the centre and quarter disks
/// at the two bottom corners, all of the same radius.
pub fn lorentz_case1_table(radius: f64) -> crate::Result<BilliardTable> {
    build_lorentz_rect(
        2.0,
        2.0,
        &[
            Scatterer::Disk {
                center: Vec2::new(1.0, 1.0),
                radius,
            },
            Scatterer::QuarterDisk {
                corner: RectCorner::BottomLeft,
                radius,
            },
            Scatterer::QuarterDisk {
                corner: RectCorner::BottomRight,
                radius,
            },
        ],
    )
}

impl Model {
    pub fn build(cfg: &ExperimentConfig) -> RunResult<Self> {
        let billiard = |table: BilliardTable| -> RunResult<Self> {
            let spec = ReducedSpaceSpec::for_table(&table);
            let mu = match measure_m_closed_form(&table) {
                Ok(v) => ReducedMeasure {
                    value: v,
                    monte_carlo: false,
                },
                Err(Error::Unsupported(_)) => {
                    let mut rng = replica_rng(split_seed(cfg.seed, u64::MAX), 0);
                    let c = acceptance_count(&table, spec, cfg.mu_proposals, &mut rng);
                    log::info!("Monte Carlo mu_M(M) = {} from {} proposals", c.rate(), c.proposals);
                    ReducedMeasure {
                        value: c.rate(),
                        monte_carlo: true,
                    }
                }
                Err(e) => return Err(e.into()),
            };
            Ok(Self::Billiard { table, spec, mu })
        };
        match cfg.model {
            ModelConfig::Stadium { l } => billiard(build_stadium(l)?),
            ModelConfig::Drivebelt { theta0, theta1, l } => {
                billiard(build_drivebelt(theta0, theta1, l)?)
            }
            ModelConfig::LorentzCase1 { radius } => billiard(lorentz_case1_table(radius)?),
            ModelConfig::ChainLinear { beta, m_max } => Ok(Self::Chain {
                kernel: build_linear_kernel(beta, m_max)?,
            }),
            ModelConfig::ChainAlgebraic { m_max } => Ok(Self::Chain {
                kernel: build_algebraic_kernel(m_max)?,
            }),
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            Self::Chain { kernel } => kernel.theta(),
            Self::Billiard { table, .. } => match table.kind() {
                TableKind::Stadium { .. } => crate::constants::theta_stadium(),
                TableKind::Drivebelt { .. } => crate::constants::theta_drivebelt(),
                TableKind::LorentzRect { .. } => 0.0,
            },
        }
    }
}

/// `nu(f)`, the mean of `f` under the collision measure, by piecewise
/// Simpson integration between the discontinuities of the catalog
/// observables. Catalog observables other than the return correction do not
/// depend on `phi`, so `nu(f) = int f(r) dr / |dD|`.
pub fn collision_mean(table: &BilliardTable, obs: &CatalogObservable, mu: f64) -> f64 {
    if let ObservableSpec::ReturnCorrection { mean_return } = obs.spec() {
        return 1.0 - mean_return.unwrap_or(1.0 / mu) * mu;
    }
    let p = table.perimeter();
    let mut cuts: Vec<f64> = (0..table.pieces().len()).map(|i| table.piece_offset(i)).collect();
    for (a, b) in singular_ranges(table) {
        cuts.push(a);
        cuts.push(b);
    }
    if let ObservableSpec::Bump { center, width, .. } = obs.spec() {
        cuts.push(center - width);
        cuts.push(*center);
        cuts.push(center + width);
    }
    cuts.push(p);
    cuts.retain(|&c| (0.0..=p).contains(&c));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            // stay off the cut points, where the sinusoid jumps
            let h = (w[1] - w[0]) * 1e-12;
            total += simpson(|r| obs.eval(PhaseVec::new(r, 0.0), false), w[0] + h, w[1] - h, 512);
        }
    }
    total / p
}

/// Returns gathered from independent `mu` draws.
#[derive(Clone, Debug)]
pub struct ReturnCollection {
    pub tail: TailCounter,
    /// `(R(x), R(F x))` for draws with `R(x) >= pair_min`.
    pub pairs: Vec<(u64, u64)>,
    /// Draws discarded because the excursion hit a singular collision.
    pub singular: u64,
    pub draws: u64,
    pub sum_return: f64,
}

/// Draw `draws` independent points from `mu`, record the return time `R(x)`
/// in a tail counter and, when `R(x) >= pair_min`, the pair `(R(x), R(F x))`.
/// Work is split into chunks of [`DRAW_CHUNK`] draws; chunk `j` uses
/// `replica_rng(seed, j)`.
pub fn collect_returns(
    table: &BilliardTable,
    spec: ReducedSpaceSpec,
    draws: u64,
    grid: Vec<u64>,
    pair_min: u64,
    cap: u64,
    seed: u64,
) -> crate::Result<ReturnCollection> {
    let chunks = draws.div_ceil(DRAW_CHUNK);
    let empty = TailCounter::new(grid)?;
    let parts: Vec<crate::Result<ReturnCollection>> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let mut rng = replica_rng(seed, j);
            let k = DRAW_CHUNK.min(draws - j * DRAW_CHUNK);
            let mut out = ReturnCollection {
                tail: empty.clone(),
                pairs: Vec::new(),
                singular: 0,
                draws: 0,
                sum_return: 0.0,
            };
            for _ in 0..k {
                let s = sample_mu(table, spec, &mut rng);
                let first = match return_map_with(table, spec, s.state, s.piece, cap, |_, _| {}) {
                    Ok(r) => r,
                    Err(e) if e.is_singular() => {
                        out.singular += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let m = first.return_time;
                if m >= pair_min {
                    match return_map_with(table, spec, first.end, first.end_piece, cap, |_, _| {}) {
                        Ok(r) => out.pairs.push((m, r.return_time)),
                        Err(e) if e.is_singular() => {
                            out.singular += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    }
                }
                out.draws += 1;
                out.sum_return += m as f64;
                out.tail.push(m as f64);
            }
            Ok(out)
        })
        .collect();
    let mut total = ReturnCollection {
        tail: empty,
        pairs: Vec::new(),
        singular: 0,
        draws: 0,
        sum_return: 0.0,
    };
    for p in parts {
        let p = p?;
        total.tail.merge(&p.tail)?;
        total.pairs.extend(p.pairs);
        total.singular += p.singular;
        total.draws += p.draws;
        total.sum_return += p.sum_return;
    }
    Ok(total)
}

/// Exact stationary law of a chain and its mean.
pub fn chain_stationary(kernel: &SpreadingKernel) -> (Vec<f64>, f64) {
    let pi = kernel.stationary_distribution(1e-13, 20_000);
    let mean = distribution_mean(&pi);
    (pi, mean)
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn write_file(dir: &Path, name: &str, body: &str) -> RunResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn observable(cfg: &ExperimentConfig, table: &BilliardTable) -> RunResult<CatalogObservable> {
    cfg.observable
        .instantiate(table)
        .map_err(|e| ConfigError::Field {
            field: "observable".into(),
            message: e.to_string(),
        }
        .into())
}

/// `returns.csv` with header `replica,step,m,k,f_tilde`. For billiards `m` is
/// the return time, `k` the component label and `f_tilde` the induced value;
/// for chains `m` is the cell index, `k = 1` and `f_tilde = m`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> RunResult<PathBuf> {
    let model = Model::build(cfg)?;
    let rows: Vec<crate::Result<String>> = match &model {
        Model::Billiard { table, spec, .. } => {
            let obs = observable(cfg, table)?;
            (0..cfg.replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replica_rng(cfg.seed, r as u64);
                    let mut orbit = InducedOrbit::new(table, *spec, cfg.cap, &mut rng);
                    let mut s = String::new();
                    for step in 1..=cfg.n {
                        let (ret, v) = orbit.next_summed(&mut rng, |x, m| obs.eval(x, m))?;
                        let _ = writeln!(s, "{r},{step},{},{},{}", ret.return_time, ret.label, real(v));
                    }
                    Ok(s)
                })
                .collect()
        }
        Model::Chain { kernel } => {
            let mut src = ChainSource::new(kernel, 0.0);
            src.burn_in = cfg.burn_in;
            (0..cfg.replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replica_rng(cfg.seed, r as u64);
                    let t = src.trajectory(cfg.n, &mut rng);
                    let mut s = String::new();
                    for (step, &m) in t.iter().enumerate().skip(1) {
                        let _ = writeln!(s, "{r},{step},{m},1,{}", real(m as f64));
                    }
                    Ok(s)
                })
                .collect()
        }
    };
    let mut body = String::from("replica,step,m,k,f_tilde\n");
    for r in rows {
        body.push_str(&r?);
    }
    write_file(&cfg.out, "returns.csv", &body)
}

/// Return-time samples of a billiard (independent `mu` draws) or cell indices
/// of a chain (stationary trajectories), as a tail counter plus transition pairs.
fn gather(cfg: &ExperimentConfig, model: &Model, pair_min: u64) -> RunResult<ReturnCollection> {
    let grid = log_grid(cfg.tail_min, cfg.tail_max, cfg.tail_points);
    match model {
        Model::Billiard { table, spec, .. } => Ok(collect_returns(
            table, *spec, cfg.draws, grid, pair_min, cfg.cap, cfg.seed,
        )?),
        Model::Chain { kernel } => {
            let mut src = ChainSource::new(kernel, 0.0);
            src.burn_in = cfg.burn_in;
            let trajs: Vec<Vec<u64>> = (0..cfg.replicas)
                .into_par_iter()
                .map(|r| src.trajectory(cfg.n, &mut replica_rng(cfg.seed, r as u64)))
                .collect();
            let mut out = ReturnCollection {
                tail: TailCounter::new(grid)?,
                pairs: Vec::new(),
                singular: 0,
                draws: 0,
                sum_return: 0.0,
            };
            for t in &trajs {
                for w in t.windows(2) {
                    out.tail.push(w[0] as f64);
                    out.draws += 1;
                    out.sum_return += w[0] as f64;
                    if w[0] >= pair_min {
                        out.pairs.push((w[0], w[1]));
                    }
                }
            }
            Ok(out)
        }
    }
}

/// `tail.csv` (`n,count,prob,n2prob`) and `tail_summary.csv`
/// (`plateau,slope,ci_lo,ci_hi,samples`).
pub fn cmd_tail(cfg: &ExperimentConfig) -> RunResult<TailEstimate> {
    let model = Model::build(cfg)?;
    let c = gather(cfg, &model, u64::MAX)?;
    let est = c.tail.estimate(cfg.seed)?;
    let mut body = String::from("n,count,prob,n2prob\n");
    for j in 0..est.grid.len() {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            est.grid[j],
            est.counts[j],
            real(est.prob[j]),
            real(est.n2prob[j])
        );
    }
    write_file(&cfg.out, "tail.csv", &body)?;
    let summary = format!(
        "plateau,slope,ci_lo,ci_hi,samples\n{},{},{},{},{}\n",
        real(est.plateau),
        real(est.slope),
        real(est.ci.0),
        real(est.ci.1),
        est.total
    );
    write_file(&cfg.out, "tail_summary.csv", &summary)?;
    Ok(est)
}

/// `kernel.csv` (`m_bin,n,p_hat,stderr,model_p`): `m_bin` and `n` are the
/// lower edges of 20%-wide bins, `p_hat` the frequency per integer `n` and
/// `model_p` the model kernel averaged the same way (empty when the model has
/// no closed-form kernel).
pub fn cmd_transition(cfg: &ExperimentConfig) -> RunResult<TransitionEstimate> {
    let model = Model::build(cfg)?;
    let c = gather(cfg, &model, 1)?;
    let est = match &model {
        Model::Chain { kernel } => {
            let f = |m: u64, lo: u64, hi: u64| kernel.conditional_window(m, lo, hi).0;
            transition_estimate(&c.pairs, Some(&f))?
        }
        Model::Billiard { table, .. } => match table.kind() {
            TableKind::Stadium { .. } => transition_estimate(&c.pairs, Some(&stadium_kernel_mass))?,
            _ => transition_estimate(&c.pairs, None)?,
        },
    };
    let mut body = String::from("m_bin,n,p_hat,stderr,model_p\n");
    for cell in &est.cells {
        let _ = writeln!(
            body,
            "{},{},{},{},{}",
            cell.m_lo,
            cell.n_lo,
            real(cell.p_hat),
            real(cell.stderr),
            opt_real(cell.model_p)
        );
    }
    write_file(&cfg.out, "kernel.csv", &body)?;
    Ok(est)
}

/// Closed-form diffusion record for the configured model.
pub fn model_constants(cfg: &ExperimentConfig, model: &Model) -> RunResult<DiffusionConstant> {
    match (model, &cfg.model) {
        (Model::Chain { kernel }, _) => {
            let (pi, _) = chain_stationary(kernel);
            Ok(chain_constants(kernel, &pi))
        }
        (Model::Billiard { table, mu, .. }, m) => {
            let obs = observable(cfg, table)?;
            Ok(match *m {
                ModelConfig::Stadium { l } => stadium_sigma2(&obs, l)?,
                ModelConfig::Drivebelt { theta0, theta1, l } => {
                    drivebelt_sigma2(&obs, theta0, theta1, l, mu.value)?
                }
                _ => {
                    let terms: Vec<ChannelTerm> = table
                        .channels()
                        .iter()
                        .map(|c| ChannelTerm {
                            integral: integrate_on_ranges(&obs, &c.ranges, c.angle),
                            a_len: c.measure(),
                            flight: c.flight_length,
                        })
                        .collect();
                    let mut d = semidispersing_sigma2(&terms, table.perimeter())?;
                    d.model = "lorentz_case1".into();
                    d.mu_m_m = Some(mu.value);
                    d
                }
            })
        }
    }
}

struct SourceBox<'a> {
    src: Box<dyn IncrementSource + 'a>,
    /// `sigma^2` per `n ln n` for the summed process, when known.
    sigma2: Option<f64>,
}

fn make_source<'a>(
    cfg: &ExperimentConfig,
    model: &'a Model,
    obs: Option<&'a CatalogObservable>,
) -> RunResult<SourceBox<'a>> {
    let theta = model.theta();
    match model {
        Model::Chain { kernel } => {
            let (_, mean) = chain_stationary(kernel);
            let mut src = ChainSource::new(kernel, mean);
            src.burn_in = cfg.burn_in;
            Ok(SourceBox {
                src: Box::new(src),
                sigma2: None,
            })
        }
        Model::Billiard { table, spec, mu } => {
            let obs = obs.expect("billiards carry an observable");
            let sigma2 = model_constants(cfg, model).ok().map(|d| d.sigma2_induced);
            let nu = collision_mean(table, obs, mu.value);
            Ok(match cfg.process {
                Process::Induced => SourceBox {
                    src: Box::new(InducedSource {
                        table,
                        spec: *spec,
                        observable: obs,
                        center: nu / mu.value,
                        theta,
                        cap: cfg.cap,
                    }),
                    sigma2,
                },
                Process::Map => SourceBox {
                    src: Box::new(MapSource {
                        table,
                        spec: *spec,
                        observable: obs,
                        center: nu,
                        theta,
                    }),
                    sigma2: sigma2.map(|s| s * mu.value),
                },
            })
        }
    }
}

fn normalizer(cfg: &ExperimentConfig, theta: f64, sigma2: Option<f64>) -> RunResult<Normalizer> {
    match cfg.normalizer {
        NormalizerChoice::Empirical => Ok(Normalizer::empirical(theta)),
        NormalizerChoice::ClosedForm => match sigma2 {
            Some(s) if s > 0.0 => Ok(Normalizer::ClosedForm { sigma2: s }),
            _ => Err(ConfigError::Field {
                field: "normalizer".into(),
                message: "no positive closed-form constant for this model and observable".into(),
            }
            .into()),
        },
    }
}

fn billiard_observable(cfg: &ExperimentConfig, model: &Model) -> RunResult<Option<CatalogObservable>> {
    match model {
        Model::Billiard { table, .. } => Ok(Some(observable(cfg, table)?)),
        Model::Chain { .. } => Ok(None),
    }
}

/// `clt.csv` (`replica,value`) and `clt_summary.csv`
/// (`D,mean,var,skew,kurt,normalizer`).
pub fn cmd_clt(cfg: &ExperimentConfig) -> RunResult<crate::stats::CltResult> {
    let model = Model::build(cfg)?;
    let obs = billiard_observable(cfg, &model)?;
    let sb = make_source(cfg, &model, obs.as_ref())?;
    let norm = normalizer(cfg, sb.src.theta(), sb.sigma2)?;
    let runs = run_replicas(sb.src.as_ref(), cfg.n, cfg.replicas, &[], cfg.seed)?;
    let res = runs.normalize(norm);
    let mut body = String::from("replica,value\n");
    for (r, v) in res.values.iter().enumerate() {
        let _ = writeln!(body, "{r},{}", real(*v));
    }
    write_file(&cfg.out, "clt.csv", &body)?;
    let m = res.moments;
    let summary = format!(
        "D,mean,var,skew,kurt,normalizer\n{},{},{},{},{},{}\n",
        real(res.ks),
        real(m.mean),
        real(m.var),
        real(m.skew),
        real(m.kurt),
        norm.label().replace(',', ";")
    );
    write_file(&cfg.out, "clt_summary.csv", &summary)?;
    Ok(res)
}

/// `path.csv` (`replica,t,W`), `ip_summary.csv` (`t,var,ks`) and
/// `ip_increments.csv` (`i,j,corr`).
pub fn cmd_ip(cfg: &ExperimentConfig) -> RunResult<crate::stats::PathSample> {
    let model = Model::build(cfg)?;
    let obs = billiard_observable(cfg, &model)?;
    let sb = make_source(cfg, &model, obs.as_ref())?;
    let norm = normalizer(cfg, sb.src.theta(), sb.sigma2)?;
    let ps = path_experiment(sb.src.as_ref(), cfg.n, cfg.replicas, &cfg.t_grid, norm, cfg.seed)?;
    let mut body = String::from("replica,t,W\n");
    for (r, row) in ps.w.iter().enumerate() {
        for (t, w) in ps.t.iter().zip(row) {
            let _ = writeln!(body, "{r},{},{}", real(*t), real(*w));
        }
    }
    write_file(&cfg.out, "path.csv", &body)?;
    let mut summary = String::from("t,var,ks\n");
    for j in 1..ps.t.len() {
        let _ = writeln!(summary, "{},{},{}", real(ps.t[j]), real(ps.var[j]), real(ps.ks[j - 1]));
    }
    write_file(&cfg.out, "ip_summary.csv", &summary)?;
    let mut inc = String::from("i,j,corr\n");
    for (i, row) in ps.increment_corr.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let _ = writeln!(inc, "{i},{j},{}", real(*c));
        }
    }
    write_file(&cfg.out, "ip_increments.csv", &inc)?;
    Ok(ps)
}

/// `constants.csv` with the configured model's record followed by a cusp
/// record for `f = 1` on both walls (curvature average and perimeter from
/// the `cusp.*` keys).
pub fn cmd_constants(cfg: &ExperimentConfig) -> RunResult<Vec<DiffusionConstant>> {
    let model = Model::build(cfg)?;
    let rows = vec![
        model_constants(cfg, &model)?,
        cusp_sigma2(|_| 2.0, cfg.cusp_a_bar, cfg.cusp_perimeter)?,
    ];
    let mut body = String::from("model,theta,c_M,mu_M_M,sigma2_induced,sigma2_original,provenance\n");
    for d in &rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{}",
            d.model,
            real(d.theta),
            real(d.c_m),
            opt_real(d.mu_m_m),
            real(d.sigma2_induced),
            opt_real(d.sigma2_original),
            d.provenance
        );
    }
    write_file(&cfg.out, "constants.csv", &body)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str, dir: &Path) -> ExperimentConfig {
        let mut c: ExperimentConfig = text.parse().unwrap();
        c.out = dir.to_path_buf();
        c
    }

    #[test]
    fn collision_mean_of_simple_observables() {
        let t = build_stadium(1.0).unwrap();
        let mu = 2.0 / (std::f64::consts::PI + 1.0);
        let c = ObservableSpec::Constant { value: 2.5 }.instantiate(&t).unwrap();
        assert!((collision_mean(&t, &c, mu) - 2.5).abs() < 1e-10);
        let rc = ObservableSpec::ReturnCorrection { mean_return: None }.instantiate(&t).unwrap();
        assert!(collision_mean(&t, &rc, mu).abs() < 1e-12);
        // a whole number of periods on each flat side averages to the mean
        let s = ObservableSpec::Sinusoid {
            mean: 0.0,
            amplitude: 1.0,
            periods: 2.0,
        }
        .instantiate(&t)
        .unwrap();
        assert!(collision_mean(&t, &s, mu).abs() < 1e-9);
        // bump of height 1 and half-width w integrates to 4w/3
        let b = ObservableSpec::Bump {
            center: 0.5,
            width: 0.25,
            height: 1.0,
        }
        .instantiate(&t)
        .unwrap();
        let exact = 4.0 * 0.25 / 3.0 / t.perimeter();
        assert!((collision_mean(&t, &b, mu) - exact).abs() < 1e-9);
    }

    #[test]
    fn collection_is_independent_of_chunking_order() {
        let t = build_stadium(1.0).unwrap();
        let spec = ReducedSpaceSpec::for_table(&t);
        let a = collect_returns(&t, spec, 2_500, log_grid(5, 50, 4), 3, 1_000_000, 11).unwrap();
        let b = collect_returns(&t, spec, 2_500, log_grid(5, 50, 4), 3, 1_000_000, 11).unwrap();
        assert_eq!(a.pairs, b.pairs);
        assert_eq!(a.tail, b.tail);
        assert_eq!(a.draws + a.singular, 2_500);
    }

    #[test]
    fn chain_tail_and_transition_files() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            "model = chain_linear\nmodel.m_max = 10000\nn = 2000\nreplicas = 2\nburn_in = 100\ntail.min = 5\ntail.max = 40\ntail.points = 4",
            dir.path(),
        );
        cmd_tail(&c).unwrap();
        let tail = fs::read_to_string(dir.path().join("tail.csv")).unwrap();
        assert!(tail.starts_with("n,count,prob,n2prob\n"));
        assert_eq!(tail.lines().count(), 5);
        let est = cmd_transition(&c).unwrap();
        assert!(est.cells.iter().all(|c| c.model_p.is_some()));
        let k = fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
        assert!(k.starts_with("m_bin,n,p_hat,stderr,model_p\n"));
    }

    #[test]
    fn stadium_constants_row() {
        let dir = tempfile::tempdir().unwrap();
        let rows = cmd_constants(&cfg("model = stadium", dir.path())).unwrap();
        assert!((rows[0].sigma2_original.unwrap() - 0.6255).abs() < 5e-4);
        assert_eq!(rows[1].provenance.to_string(), "constants-only");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::from(ConfigError::UnknownKey("x".into())).exit_code(), 2);
        assert_eq!(RunError::from(Error::IterationCap { cap: 3 }).exit_code(), 3);
        assert_eq!(RunError::from(Error::InsufficientData("x".into())).exit_code(), 1);
    }
}
