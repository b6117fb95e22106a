//! Closed-form superdiffusion constants.
//!
//! For the induced process the variance per `n ln n` is
//! `sigma~^2 = (1 + theta)/(1 - theta) * c_{M,f}`; for the original map it
//! is `sigma^2 = mu_M(M) * sigma~^2`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::chain::SpreadingKernel;
use crate::error::{Error, Result};
use crate::observables::{channel_average_drivebelt, channel_average_stadium, simpson, Observable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Backed by simulation in this crate.
    Simulated,
    /// `mu_M(M)` comes from a Monte Carlo estimate.
    MonteCarloMeasure,
    /// No simulated table behind the numbers.
    ConstantsOnly,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Simulated => "simulated",
            Self::MonteCarloMeasure => "monte-carlo-measure",
            Self::ConstantsOnly => "constants-only",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionConstant {
    pub model: String,
    pub theta: f64,
    /// `c_{M,f}`.
    pub c_m: f64,
    pub mu_m_m: Option<f64>,
    pub sigma2_induced: f64,
    pub sigma2_original: Option<f64>,
    pub provenance: Provenance,
}

impl DiffusionConstant {
    fn build(model: &str, theta: f64, c_m: f64, mu: Option<f64>, provenance: Provenance) -> Self {
        let s = variance_factor(theta) * c_m;
        Self {
            model: model.into(),
            theta,
            c_m,
            mu_m_m: mu,
            sigma2_induced: s,
            sigma2_original: mu.map(|m| m * s),
            provenance,
        }
    }
}

/// `(1 + theta) / (1 - theta)`.
pub fn variance_factor(theta: f64) -> f64 {
    (1.0 + theta) / (1.0 - theta)
}

pub fn theta_stadium() -> f64 {
    3.0 * 3f64.ln() / 4.0
}

pub fn theta_drivebelt() -> f64 {
    7.0 * 7f64.ln() / 24.0
}

fn warn_if_vacuous(integral: f64, model: &str) {
    if integral == 0.0 {
        log::warn!("{model}: the observable integrates to zero on A, the limit law is degenerate");
    }
}

/// Stadium record from `int_A f(r, 0) dr`: `c_M = l^2/8`, `mu_M(M) = 2/(pi + l)`,
/// `c_{M,f} = I_f^2 c_M` with `I_f = int / (2l)`.
pub fn stadium_sigma2_from_integral(integral: f64, l: f64) -> Result<DiffusionConstant> {
    if !(l > 0.0) {
        return Err(Error::InvalidParameter(format!("segment length must be positive, got {l}")));
    }
    warn_if_vacuous(integral, "stadium");
    let i_f = integral / (2.0 * l);
    let c_m = l * l / 8.0;
    let mu = 2.0 / (PI + l);
    Ok(DiffusionConstant::build(
        "stadium",
        theta_stadium(),
        i_f * i_f * c_m,
        Some(mu),
        Provenance::Simulated,
    ))
}

pub fn stadium_sigma2(f: &dyn Observable, l: f64) -> Result<DiffusionConstant> {
    let integral = channel_average_stadium(f, l) * 2.0 * l;
    stadium_sigma2_from_integral(integral, l)
}

/// `((4 + 3 ln 3)/(4 - 3 ln 3)) (int_A f)^2 / (16 (pi + l))`.
pub fn stadium_sigma2_printed(integral: f64, l: f64) -> f64 {
    let l3 = 3.0 * 3f64.ln();
    (4.0 + l3) / (4.0 - l3) * integral * integral / (16.0 * (PI + l))
}

fn check_drivebelt(theta0: f64, theta1: f64, l: f64) -> Result<f64> {
    if !(theta0 > PI && theta0 < 1.5 * PI) || !(theta1 > 0.0 && theta1 < FRAC_PI_2) || !(l > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "invalid drivebelt angles/length ({theta0}, {theta1}, {l})"
        )));
    }
    Ok(theta0 + theta1 + 2.0 * l)
}

/// Drivebelt record from `int_A f(r, 0) dr` and a value of `mu_M(M)`
/// (estimated by Monte Carlo). The tail constant is fixed by
/// `mu_M(M) c_M = |A|^2 / (8 |dD|)` with `|A| = 2 (theta0 - pi)`.
pub fn drivebelt_sigma2_from_integral(
    integral: f64,
    theta0: f64,
    theta1: f64,
    l: f64,
    mu_m_m: f64,
) -> Result<DiffusionConstant> {
    let perimeter = check_drivebelt(theta0, theta1, l)?;
    if !(mu_m_m > 0.0 && mu_m_m <= 1.0) {
        return Err(Error::InvalidParameter(format!("mu_M(M) must lie in (0, 1], got {mu_m_m}")));
    }
    warn_if_vacuous(integral, "drivebelt");
    let a_len = 2.0 * (theta0 - PI);
    let i_f = integral / a_len;
    let c_m = a_len * a_len / (8.0 * perimeter * mu_m_m);
    Ok(DiffusionConstant::build(
        "drivebelt",
        theta_drivebelt(),
        i_f * i_f * c_m,
        Some(mu_m_m),
        Provenance::MonteCarloMeasure,
    ))
}

pub fn drivebelt_sigma2(
    f: &dyn Observable,
    theta0: f64,
    theta1: f64,
    l: f64,
    mu_m_m: f64,
) -> Result<DiffusionConstant> {
    let integral = channel_average_drivebelt(f, theta0) * 2.0 * (theta0 - PI);
    drivebelt_sigma2_from_integral(integral, theta0, theta1, l, mu_m_m)
}

/// `((24 + 7 ln 7)/(24 - 7 ln 7)) (int_A f)^2 / (8 |dD|)`.
pub fn drivebelt_sigma2_printed(integral: f64, theta0: f64, theta1: f64, l: f64) -> Result<f64> {
    let perimeter = check_drivebelt(theta0, theta1, l)?;
    let l7 = 7.0 * 7f64.ln();
    Ok((24.0 + l7) / (24.0 - l7) * integral * integral / (8.0 * perimeter))
}

/// `int_{-pi/2}^{pi/2} g(phi) sqrt(cos phi) dphi`, computed after the
/// substitution `phi = (pi/2) sin s`, which removes the endpoint square-root
/// singularities.
pub fn sqrt_cos_integral<G: Fn(f64) -> f64>(g: G) -> f64 {
    simpson(
        |s| {
            let phi = FRAC_PI_2 * s.sin();
            g(phi) * phi.cos().max(0.0).sqrt() * FRAC_PI_2 * s.cos()
        },
        -FRAC_PI_2,
        FRAC_PI_2,
        4096,
    )
}

/// Cusp record: `sigma^2 = (int (f(r', phi) + f(r'', phi)) sqrt(cos phi) dphi)^2 / (8 a |dD|)`
/// with `theta = 0`. The argument is the sum of the two wall profiles.
pub fn cusp_sigma2<G: Fn(f64) -> f64>(
    walls: G,
    a_bar: f64,
    perimeter: f64,
) -> Result<DiffusionConstant> {
    if !(a_bar > 0.0) || !(perimeter > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "curvature average and perimeter must be positive, got {a_bar}, {perimeter}"
        )));
    }
    let j = sqrt_cos_integral(walls);
    let sigma2 = j * j / (8.0 * a_bar * perimeter);
    Ok(DiffusionConstant {
        model: "cusp".into(),
        theta: 0.0,
        c_m: sigma2,
        mu_m_m: None,
        sigma2_induced: sigma2,
        sigma2_original: Some(sigma2),
        provenance: Provenance::ConstantsOnly,
    })
}

/// One free-flight channel: `int_{A_i} f(r, phi_i) dr`, `|A_i|` and the
/// flight length `I_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelTerm {
    pub integral: f64,
    pub a_len: f64,
    pub flight: f64,
}

/// Semi-dispersing record: `sigma^2 = sum_i (int_{A_i} f)^2 / (4 I_i |dD|)`,
/// `theta = 0`.
pub fn semidispersing_sigma2(channels: &[ChannelTerm], perimeter: f64) -> Result<DiffusionConstant> {
    if channels.is_empty() {
        return Err(Error::InvalidParameter("empty channel list".into()));
    }
    if !(perimeter > 0.0) || channels.iter().any(|c| !(c.flight > 0.0)) {
        return Err(Error::InvalidParameter("perimeter and flight lengths must be positive".into()));
    }
    let sigma2: f64 = channels
        .iter()
        .map(|c| c.integral * c.integral / (4.0 * c.flight * perimeter))
        .sum();
    Ok(DiffusionConstant {
        model: "semidispersing".into(),
        theta: 0.0,
        c_m: sigma2,
        mu_m_m: None,
        sigma2_induced: sigma2,
        sigma2_original: Some(sigma2),
        provenance: Provenance::ConstantsOnly,
    })
}

/// Linear-spreading chain record for the cell index itself; `c_M` is read
/// off the stationary law as the mean of `n^2 P(m >= n)` over `n` in
/// `[100, 1000]`.
pub fn chain_constants(kernel: &SpreadingKernel, stationary: &[f64]) -> DiffusionConstant {
    let mut tail = vec![0.0; stationary.len() + 1];
    for m in (0..stationary.len()).rev() {
        tail[m] = tail[m + 1] + stationary[m];
    }
    let hi = 1000.min(stationary.len().saturating_sub(1));
    let lo = 100.min(hi);
    let vals: Vec<f64> = (lo..=hi).map(|n| (n * n) as f64 * tail[n]).collect();
    let c_m = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
    let model = match kernel.family() {
        crate::chain::KernelFamily::Linear { .. } => "chain_linear",
        crate::chain::KernelFamily::Algebraic => "chain_algebraic",
    };
    DiffusionConstant::build(model, kernel.theta(), c_m, None, Provenance::Simulated)
}

/// `sqrt((1 + theta)/(1 - theta) mu_M(M) c_{M,f} n ln n)`; the `mu_M(M)`
/// factor applies to the original map.
pub fn clt_denominator(n: u64, theta: f64, c_m_f: f64, mu_m_m: Option<f64>) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")));
    }
    if !(theta > -1.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (-1, 1), got {theta}")));
    }
    if !(c_m_f > 0.0) {
        return Err(Error::InvalidParameter(format!("tail constant must be positive, got {c_m_f}")));
    }
    let nf = n as f64;
    Ok((variance_factor(theta) * mu_m_m.unwrap_or(1.0) * c_m_f * nf * nf.ln()).sqrt())
}

/// The two published values of the stadium's `mu_M(M)`: `2/(pi + l)` and
/// the earlier `pi/(2(pi + l))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureComparison {
    pub corrected: f64,
    pub prior: f64,
}

pub fn stadium_measure_comparison(l: f64) -> MeasureComparison {
    MeasureComparison {
        corrected: 2.0 / (PI + l),
        prior: PI / (2.0 * (PI + l)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_stadium;
    use crate::observables::ObservableSpec;
    use proptest::prelude::*;

    #[test]
    fn variance_factors() {
        let l3 = 3.0 * 3f64.ln();
        assert!((variance_factor(theta_stadium()) - (4.0 + l3) / (4.0 - l3)).abs() < 1e-12);
        let l7 = 7.0 * 7f64.ln();
        assert!((variance_factor(theta_drivebelt()) - (24.0 + l7) / (24.0 - l7)).abs() < 1e-12);
        assert!((variance_factor(theta_drivebelt()) - 3.624_888_335_507_6).abs() < 1e-12);
        assert_eq!(variance_factor(0.5), 3.0);
    }

    #[test]
    fn stadium_flat_constant() {
        // f = 1 on the flats: int_A f = 2l
        let d = stadium_sigma2_from_integral(2.0, 1.0).unwrap();
        let s = d.sigma2_original.unwrap();
        assert!((s - 0.6255).abs() < 5e-4, "{s}");
        assert!((s - stadium_sigma2_printed(2.0, 1.0)).abs() < 1e-12);
        let direct = variance_factor(theta_stadium()) * 0.125 * 2.0 / (PI + 1.0);
        assert!((s - direct).abs() < 1e-12);
        assert!((d.sigma2_induced - s / d.mu_m_m.unwrap()).abs() < 1e-12);
        let zero = stadium_sigma2_from_integral(0.0, 1.0).unwrap();
        assert_eq!(zero.sigma2_original, Some(0.0));
        // via an observable
        let t = build_stadium(1.0).unwrap();
        let f = ObservableSpec::Constant { value: 1.0 }.instantiate(&t).unwrap();
        let g = stadium_sigma2(&f, 1.0).unwrap();
        assert!((g.sigma2_original.unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn drivebelt_constant() {
        let theta0 = 7.0 * PI / 6.0;
        let a = 2.0 * (theta0 - PI);
        let per = theta0 + PI / 3.0 + 2.0;
        let d = drivebelt_sigma2_from_integral(a, theta0, PI / 3.0, 1.0, 0.3).unwrap();
        let printed = drivebelt_sigma2_printed(a, theta0, PI / 3.0, 1.0).unwrap();
        let l7 = 7.0 * 7f64.ln();
        let expected = a * a / (8.0 * per) * (24.0 + l7) / (24.0 - l7);
        assert!((printed - expected).abs() < 1e-14);
        assert!((d.sigma2_original.unwrap() - printed).abs() < 1e-12);
        let z = drivebelt_sigma2_from_integral(0.0, theta0, PI / 3.0, 1.0, 0.3).unwrap();
        assert_eq!(z.sigma2_original, Some(0.0));
        assert!(drivebelt_sigma2_from_integral(a, 3.0, 1.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn cusp_constant() {
        // sqrt(pi) Gamma(3/4) / Gamma(5/4)
        let exact = PI.sqrt() * 1.225_416_702_465_178 / 0.906_402_477_055_477;
        let j = sqrt_cos_integral(|_| 1.0);
        assert!((j - exact).abs() < 1e-8, "{j}");
        assert!((j - 2.39628).abs() < 1e-5);
        let d = cusp_sigma2(|_| 2.0, 0.7, 9.0).unwrap();
        assert!((d.sigma2_original.unwrap() - (2.0 * exact).powi(2) / (8.0 * 0.7 * 9.0)).abs() < 1e-8);
        assert_eq!(d.theta, 0.0);
        assert_eq!(d.provenance, Provenance::ConstantsOnly);
        assert_eq!(cusp_sigma2(|_| 0.0, 1.0, 1.0).unwrap().sigma2_original, Some(0.0));
        assert!(cusp_sigma2(|_| 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn semidispersing_constant() {
        let one = ChannelTerm {
            integral: 1.0,
            a_len: 1.0,
            flight: 2.0,
        };
        let d = semidispersing_sigma2(&[one], 10.0).unwrap();
        assert!((d.sigma2_original.unwrap() - 1.0 / (4.0 * 2.0 * 10.0)).abs() < 1e-15);
        assert_eq!(d.sigma2_original, Some(d.sigma2_induced));
        let zero = ChannelTerm { integral: 0.0, ..one };
        assert_eq!(semidispersing_sigma2(&[zero, zero], 3.0).unwrap().sigma2_original, Some(0.0));
        assert!(semidispersing_sigma2(&[], 3.0).is_err());
    }

    #[test]
    fn denominators() {
        let e2 = std::f64::consts::E.powi(2);
        // n = e^2 is not an integer; check the formula through n = 7389 instead
        let v = clt_denominator(7389, 0.0, 1.0, None).unwrap();
        assert!((v - (7389.0 * 7389f64.ln()).sqrt()).abs() < 1e-9);
        assert!((e2 * 2.0).sqrt() - std::f64::consts::E * 2f64.sqrt() < 1e-12);
        let a = clt_denominator(1000, 0.5, 1.0, None).unwrap();
        let b = clt_denominator(1000, 0.0, 1.0, None).unwrap();
        assert!(((a / b).powi(2) - 3.0).abs() < 1e-12);
        let s = stadium_sigma2_from_integral(2.0, 1.0).unwrap();
        let d = clt_denominator(1_000_000, s.theta, s.c_m, s.mu_m_m).unwrap();
        assert!((d - 2939.6).abs() < 1.0, "{d}");
        assert!(clt_denominator(10, 1.0, 1.0, None).is_err());
        assert!(clt_denominator(1, 0.0, 1.0, None).is_err());
        assert!(clt_denominator(10, 0.0, 0.0, None).is_err());
    }

    #[test]
    fn measure_comparison() {
        let c = stadium_measure_comparison(1.0);
        assert!((c.corrected - 0.482_906_014).abs() < 1e-9);
        assert!((c.prior - 0.379_273_496).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn sigma2_grows_with_integral(a in 0.01f64..10.0, b in 0.01f64..10.0, l in 0.1f64..5.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let sa = stadium_sigma2_from_integral(a, l).unwrap().sigma2_original.unwrap();
            let sb = stadium_sigma2_from_integral(b, l).unwrap().sigma2_original.unwrap();
            prop_assert_eq!(sa < sb, a < b);
            prop_assert!((sa - stadium_sigma2_printed(a, l)).abs() <= 1e-10 * sa.max(1e-300));
        }
    }
}
