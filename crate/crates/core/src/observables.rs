//! Observables on the collision space and their induced versions.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{sample_collision_measure, BilliardTable, Channel, PhaseVec, TableKind};
use crate::induced::{measure_m_closed_form, return_map_with, ReducedSpaceSpec, ReturnSample};

/// Number of Simpson panels per integration range.
pub const SIMPSON_PANELS: usize = 4096;

/// A real function on the collision space. `in_m` tells whether the state
/// belongs to the reduced space, which some observables depend on.
///
/// Implementations are shared between worker threads and must be pure.
pub trait Observable: Send + Sync {
    fn eval(&self, x: PhaseVec, in_m: bool) -> f64;

    /// Declared Hölder exponent in (0, 1).
    fn holder_exponent(&self) -> f64 {
        0.5
    }

    fn describe(&self) -> String;
}

impl<F> Observable for F
where
    F: Fn(PhaseVec, bool) -> f64 + Send + Sync,
{
    fn eval(&self, x: PhaseVec, in_m: bool) -> f64 {
        self(x, in_m)
    }

    fn describe(&self) -> String {
        "closure".into()
    }
}

/// Parsed catalog entry, e.g. `sinusoid(amplitude=1, periods=2)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ObservableSpec {
    Constant { value: f64 },
    /// `mean + amplitude * sin(2 pi periods (r - a) / (b - a))` on every range
    /// `[a, b]` of the singular set, `mean` elsewhere.
    Sinusoid { mean: f64, amplitude: f64, periods: f64 },
    /// `height * (1 - ((r - center) / width)^2)` where positive, 0 elsewhere.
    Bump { center: f64, width: f64, height: f64 },
    /// `1 - E(R) * 1_M`, whose induced function is `R - E(R)`.
    ReturnCorrection { mean_return: Option<f64> },
}

impl ObservableSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Sinusoid { .. } => "sinusoid",
            Self::Bump { .. } => "bump",
            Self::ReturnCorrection { .. } => "return_correction",
        }
    }

    /// Bind the spec to a table.
    pub fn instantiate(&self, table: &BilliardTable) -> Result<CatalogObservable> {
        let ranges = singular_ranges(table);
        let kind = match *self {
            Self::Constant { value } => Kind::Constant(value),
            Self::Sinusoid {
                mean,
                amplitude,
                periods,
            } => Kind::Sinusoid {
                mean,
                amplitude,
                periods,
            },
            Self::Bump {
                center,
                width,
                height,
            } => Kind::Bump {
                center,
                width,
                height,
            },
            Self::ReturnCorrection { mean_return } => {
                let er = match mean_return {
                    Some(v) => v,
                    None => 1.0 / measure_m_closed_form(table)?,
                };
                Kind::ReturnCorrection(er)
            }
        };
        Ok(CatalogObservable {
            spec: self.clone(),
            kind,
            ranges,
        })
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("observable parameter {key}: not a number: {v:?}")))?;
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "observable parameter {key} must be finite"
        )));
    }
    Ok(x)
}

impl FromStr for ObservableSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(i) => {
                let rest = s[i + 1..].trim_end();
                let inner = rest.strip_suffix(')').ok_or_else(|| {
                    Error::InvalidParameter(format!("observable {s:?}: missing closing parenthesis"))
                })?;
                (s[..i].trim(), inner)
            }
            None => (s, ""),
        };
        let mut params: Vec<(&str, f64)> = Vec::new();
        for part in args.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("observable parameter {part:?}: expected key=value"))
            })?;
            let k = k.trim();
            if params.iter().any(|(p, _)| *p == k) {
                return Err(Error::InvalidParameter(format!(
                    "observable parameter {k} given twice"
                )));
            }
            params.push((k, parse_f64(k, v)?));
        }
        let allowed: &[&str] = match name {
            "constant" => &["value"],
            "sinusoid" => &["mean", "amplitude", "periods"],
            "bump" => &["center", "width", "height"],
            "return_correction" => &["mean_return"],
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown observable {other:?} (expected constant, sinusoid, bump, return_correction)"
                )))
            }
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(Error::InvalidParameter(format!(
                "observable {name} has no parameter {k}"
            )));
        }
        let get = |k: &str| params.iter().find(|(p, _)| *p == k).map(|&(_, v)| v);
        let spec = match name {
            "constant" => Self::Constant {
                value: get("value").unwrap_or(1.0),
            },
            "sinusoid" => Self::Sinusoid {
                mean: get("mean").unwrap_or(0.0),
                amplitude: get("amplitude").unwrap_or(1.0),
                periods: get("periods").unwrap_or(1.0),
            },
            "bump" => {
                let width = get("width").unwrap_or(0.5);
                if width <= 0.0 {
                    return Err(Error::InvalidParameter("bump width must be positive".into()));
                }
                Self::Bump {
                    center: get("center").unwrap_or(0.5),
                    width,
                    height: get("height").unwrap_or(1.0),
                }
            }
            _ => {
                let mean_return = get("mean_return");
                if matches!(mean_return, Some(v) if v < 1.0) {
                    return Err(Error::InvalidParameter(
                        "mean_return must be at least 1".into(),
                    ));
                }
                Self::ReturnCorrection { mean_return }
            }
        };
        Ok(spec)
    }
}

impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { value } => write!(f, "constant(value={value})"),
            Self::Sinusoid {
                mean,
                amplitude,
                periods,
            } => write!(f, "sinusoid(mean={mean}, amplitude={amplitude}, periods={periods})"),
            Self::Bump {
                center,
                width,
                height,
            } => write!(f, "bump(center={center}, width={width}, height={height})"),
            Self::ReturnCorrection { mean_return: None } => write!(f, "return_correction"),
            Self::ReturnCorrection {
                mean_return: Some(v),
            } => write!(f, "return_correction(mean_return={v})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Constant(f64),
    Sinusoid {
        mean: f64,
        amplitude: f64,
        periods: f64,
    },
    Bump {
        center: f64,
        width: f64,
        height: f64,
    },
    ReturnCorrection(f64),
}

/// A catalog observable bound to a table.
#[derive(Clone, Debug, PartialEq)]
pub struct CatalogObservable {
    spec: ObservableSpec,
    kind: Kind,
    ranges: Vec<(f64, f64)>,
}

impl CatalogObservable {
    pub fn spec(&self) -> &ObservableSpec {
        &self.spec
    }
}

impl Observable for CatalogObservable {
    fn eval(&self, x: PhaseVec, in_m: bool) -> f64 {
        match self.kind {
            Kind::Constant(c) => c,
            Kind::Sinusoid {
                mean,
                amplitude,
                periods,
            } => {
                for &(a, b) in &self.ranges {
                    if x.r >= a && x.r <= b {
                        return mean + amplitude * (TAU * periods * (x.r - a) / (b - a)).sin();
                    }
                }
                mean
            }
            Kind::Bump {
                center,
                width,
                height,
            } => {
                let u = (x.r - center) / width;
                if u.abs() < 1.0 {
                    height * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kind::ReturnCorrection(er) => {
                if in_m {
                    1.0 - er
                } else {
                    1.0
                }
            }
        }
    }

    fn describe(&self) -> String {
        self.spec.to_string()
    }
}

/// The arclength set `A` carrying the long excursions: the flat sides of the
/// stadium, the parts `[0, theta0 - pi]` and `[pi, theta0]` of the drivebelt's
/// major arc, and the channel wall ranges of rectangle tables.
pub fn singular_ranges(table: &BilliardTable) -> Vec<(f64, f64)> {
    match *table.kind() {
        TableKind::Stadium { l } => vec![(0.0, l), (PI + l, PI + 2.0 * l)],
        TableKind::Drivebelt { theta0, .. } => vec![(0.0, theta0 - PI), (PI, theta0)],
        TableKind::LorentzRect { .. } => table
            .channels()
            .iter()
            .flat_map(|c| c.ranges.iter().copied())
            .collect(),
    }
}

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `int_A f(r, phi) dr` over a list of ranges at fixed angle.
pub fn integrate_on_ranges(f: &dyn Observable, ranges: &[(f64, f64)], phi: f64) -> f64 {
    ranges
        .iter()
        .map(|&(a, b)| simpson(|r| f.eval(PhaseVec::new(r, phi), false), a, b, SIMPSON_PANELS))
        .sum()
}

/// Per-component averages `a_k` of `f` along the singular set.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelAverages {
    /// `a[k - 1]` belongs to component label `k`.
    pub a: Vec<f64>,
    /// Integration ranges per component.
    pub ranges: Vec<Vec<(f64, f64)>>,
    /// Common value when all components agree.
    pub i_f: Option<f64>,
}

impl ChannelAverages {
    fn from_parts(a: Vec<f64>, ranges: Vec<Vec<(f64, f64)>>) -> Self {
        let i_f = a
            .first()
            .copied()
            .filter(|&v| a.iter().all(|&x| (x - v).abs() <= 1e-12 * v.abs().max(1.0)));
        Self { a, ranges, i_f }
    }
}

/// `I_f = (1 / 2l) int_A f(r, 0) dr` for the stadium.
pub fn channel_average_stadium(f: &dyn Observable, l: f64) -> f64 {
    let ranges = [(0.0, l), (PI + l, PI + 2.0 * l)];
    integrate_on_ranges(f, &ranges, 0.0) / (2.0 * l)
}

/// `I_f = int_A f(r, 0) dr / (2 (theta0 - pi))` for the drivebelt.
pub fn channel_average_drivebelt(f: &dyn Observable, theta0: f64) -> f64 {
    let ranges = [(0.0, theta0 - PI), (PI, theta0)];
    integrate_on_ranges(f, &ranges, 0.0) / (2.0 * (theta0 - PI))
}

/// `a_i = int_{A_i} f(r, phi_i) dr / |A_i|` for each channel.
pub fn channel_averages_lorentz(f: &dyn Observable, channels: &[Channel]) -> Result<ChannelAverages> {
    if channels.is_empty() {
        return Err(Error::InvalidParameter("empty channel list".into()));
    }
    let mut a = Vec::with_capacity(channels.len());
    for c in channels {
        let m = c.measure();
        if !(m > 0.0) {
            return Err(Error::InvalidParameter("channel with empty range".into()));
        }
        a.push(integrate_on_ranges(f, &c.ranges, c.angle) / m);
    }
    Ok(ChannelAverages::from_parts(
        a,
        channels.iter().map(|c| c.ranges.clone()).collect(),
    ))
}

/// Channel averages for any supported table, indexed by component label.
pub fn channel_averages(f: &dyn Observable, table: &BilliardTable) -> Result<ChannelAverages> {
    match *table.kind() {
        TableKind::Stadium { l } => {
            let v = channel_average_stadium(f, l);
            Ok(ChannelAverages::from_parts(vec![v; 4], vec![singular_ranges(table); 4]))
        }
        TableKind::Drivebelt { theta0, .. } => {
            let v = channel_average_drivebelt(f, theta0);
            Ok(ChannelAverages::from_parts(vec![v; 4], vec![singular_ranges(table); 4]))
        }
        TableKind::LorentzRect { .. } => channel_averages_lorentz(f, table.channels()),
    }
}

/// The dominant part `J_f = a_k * R` of the induced function.
pub fn j_f_value(averages: &ChannelAverages, sample: &ReturnSample) -> Result<f64> {
    let k = sample.label as usize;
    if k == 0 || k > averages.a.len() {
        return Err(Error::InvalidParameter(format!(
            "component label {k} outside 1..={}",
            averages.a.len()
        )));
    }
    Ok(averages.a[k - 1] * sample.return_time as f64)
}

/// `f~(x) = f(x) + ... + f(T^{R-1} x)` together with the return sample.
pub fn induced_value(
    table: &BilliardTable,
    spec: ReducedSpaceSpec,
    f: &dyn Observable,
    x: PhaseVec,
    cap: u64,
) -> Result<(f64, ReturnSample)> {
    let (piece, _) = table.locate(x.r);
    let mut sum = 0.0;
    let s = return_map_with(table, spec, x, piece, cap, |y, m| sum += f.eval(y, m))?;
    Ok((sum, s))
}

/// Spot check of the declared Hölder exponent on random pairs of nearby
/// points close to the singular set (`|phi| < 0.1`). Returns the largest
/// ratio `|f(x) - f(y)| / d(x, y)^gamma` and logs a warning when it exceeds
/// `warn_above`.
pub fn holder_spot_check<R: Rng + ?Sized>(
    f: &dyn Observable,
    table: &BilliardTable,
    pairs: usize,
    warn_above: f64,
    rng: &mut R,
) -> f64 {
    let gamma = f.holder_exponent();
    let ranges = singular_ranges(table);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = if ranges.is_empty() {
            sample_collision_measure(table, rng)
        } else {
            let (a, b) = ranges[rng.random_range(0..ranges.len())];
            PhaseVec::new(rng.random_range(a..=b), rng.random_range(-0.1..=0.1))
        };
        let dr: f64 = rng.random_range(-1e-3..=1e-3);
        let dp: f64 = rng.random_range(-1e-3..=1e-3);
        let y = PhaseVec::new(table.wrap(x.r + dr), (x.phi + dp).clamp(-0.1, 0.1));
        let d = dr.hypot(y.phi - x.phi);
        if d == 0.0 {
            continue;
        }
        let ratio = (f.eval(x, false) - f.eval(y, false)).abs() / d.powf(gamma);
        worst = worst.max(ratio);
    }
    if worst > warn_above {
        log::warn!(
            "observable {} looks rougher than its declared exponent {gamma}: ratio {worst:.3e}",
            f.describe()
        );
    }
    worst
}
