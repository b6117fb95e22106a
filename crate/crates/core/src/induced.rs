//! First-return dynamics on the reduced collision space `M`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    reverse, sample_collision_measure, BilliardTable, Curvature, PhaseVec, TableKind,
};

/// Default bound on the number of billiard-map steps in one excursion.
pub const DEFAULT_ITERATION_CAP: u64 = 1_000_000_000;

/// Which collisions form the reduced space `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReducedSpaceSpec {
    /// Collisions on a focusing arc whose predecessor lies on a different piece.
    FirstFocusingArc,
    /// Every collision with a scatterer.
    Scatterer,
}

impl ReducedSpaceSpec {
    pub fn for_table(table: &BilliardTable) -> Self {
        match table.kind() {
            TableKind::Stadium { .. } | TableKind::Drivebelt { .. } => Self::FirstFocusingArc,
            TableKind::LorentzRect { .. } => Self::Scatterer,
        }
    }

    /// Membership of a collision on `piece` reached from `prev_piece`.
    pub fn contains_piece(&self, table: &BilliardTable, piece: usize, prev_piece: usize) -> bool {
        let c = table.pieces()[piece].curvature();
        match self {
            Self::FirstFocusingArc => c == Curvature::Focusing && piece != prev_piece,
            Self::Scatterer => c == Curvature::Dispersing,
        }
    }
}

/// Membership test for a collision state given the piece of the previous collision.
pub fn in_m(table: &BilliardTable, spec: ReducedSpaceSpec, x: PhaseVec, prev_piece: usize) -> bool {
    let (piece, _) = table.locate(x.r);
    spec.contains_piece(table, piece, prev_piece)
}

/// Piece of the collision preceding `x`, found by running the map backwards.
pub fn previous_piece(table: &BilliardTable, x: PhaseVec) -> Result<usize> {
    table.step(reverse(x)).map(|c| c.piece)
}

/// One step of the induced map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnSample {
    pub start: PhaseVec,
    pub end: PhaseVec,
    /// Number of billiard-map steps until the first re-entry to `M`.
    pub return_time: u64,
    /// Component label, starting at 1.
    pub label: u32,
    /// Piece of `end`, needed to continue the induced orbit.
    pub end_piece: usize,
}

/// Component label of an excursion starting at `x`.
///
/// Stadium: `1 + 2 * [left arc] + [phi < 0]`, the four families of long
/// bouncing excursions. Drivebelt: the same scheme with the major arc in the
/// role of the right arc. Rectangles with scatterers: `1 +` the index of the
/// channel most aligned with the outgoing velocity.
pub fn component_label(table: &BilliardTable, x: PhaseVec) -> u32 {
    match table.kind() {
        TableKind::Stadium { .. } => {
            let (piece, _) = table.locate(x.r);
            1 + 2 * u32::from(piece == 3) + u32::from(x.phi < 0.0)
        }
        TableKind::Drivebelt { .. } => {
            let (piece, _) = table.locate(x.r);
            1 + 2 * u32::from(piece == 2) + u32::from(x.phi < 0.0)
        }
        TableKind::LorentzRect { .. } => {
            let ch = table.channels();
            if ch.len() <= 1 {
                return 1;
            }
            let v = table.velocity(x);
            let mut best = 0;
            for (i, c) in ch.iter().enumerate() {
                if v.dot(c.direction).abs() > v.dot(ch[best].direction).abs() {
                    best = i;
                }
            }
            1 + best as u32
        }
    }
}

/// Iterate the billiard map from `x` (on `piece`, in `M`) until the orbit
/// re-enters `M`. `visit` sees every state of the excursion block, from `x`
/// itself up to the last state before re-entry, together with its membership
/// in `M`.
pub fn return_map_with<V>(
    table: &BilliardTable,
    spec: ReducedSpaceSpec,
    x: PhaseVec,
    piece: usize,
    cap: u64,
    mut visit: V,
) -> Result<ReturnSample>
where
    V: FnMut(PhaseVec, bool),
{
    visit(x, true);
    let mut cur = x;
    let mut cur_piece = piece;
    let mut steps = 0u64;
    loop {
        let c = table.step(cur)?;
        steps += 1;
        if spec.contains_piece(table, c.piece, cur_piece) {
            return Ok(ReturnSample {
                start: x,
                end: c.state,
                return_time: steps,
                label: component_label(table, x),
                end_piece: c.piece,
            });
        }
        if steps >= cap {
            return Err(Error::IterationCap { cap });
        }
        visit(c.state, false);
        cur = c.state;
        cur_piece = c.piece;
    }
}

/// The induced map `F` with return time and label.
pub fn return_map(
    table: &BilliardTable,
    spec: ReducedSpaceSpec,
    x: PhaseVec,
    cap: u64,
) -> Result<ReturnSample> {
    let (piece, _) = table.locate(x.r);
    return_map_with(table, spec, x, piece, cap, |_, _| {})
}

/// A draw from `mu` (the collision measure conditioned on `M`) together with
/// the number of proposals it took.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuSample {
    pub state: PhaseVec,
    pub piece: usize,
    pub proposals: u64,
}

/// Rejection sampling of `mu` from the collision measure. Proposals whose
/// backward step is singular are rejected as well.
pub fn sample_mu<R: Rng + ?Sized>(
    table: &BilliardTable,
    spec: ReducedSpaceSpec,
    rng: &mut R,
) -> MuSample {
    let mut proposals = 0;
    loop {
        proposals += 1;
        let x = sample_collision_measure(table, rng);
        let (piece, _) = table.locate(x.r);
        if spec == ReducedSpaceSpec::Scatterer {
            if spec.contains_piece(table, piece, piece) {
                return MuSample {
                    state: x,
                    piece,
                    proposals,
                };
            }
            continue;
        }
        if table.pieces()[piece].curvature() != Curvature::Focusing {
            continue;
        }
        match previous_piece(table, x) {
            Ok(prev) if prev != piece => {
                return MuSample {
                    state: x,
                    piece,
                    proposals,
                }
            }
            _ => continue,
        }
    }
}

/// Outcome of a batch of proposals onto `M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceptanceCount {
    pub proposals: u64,
    pub accepted: u64,
    /// Proposals whose membership could not be decided (singular backward step).
    pub singular: u64,
}

impl AcceptanceCount {
    pub fn rate(&self) -> f64 {
        self.accepted as f64 / self.proposals as f64
    }
}

/// Count how many of `proposals` draws from the collision measure fall in `M`.
pub fn acceptance_count<R: Rng + ?Sized>(
    table: &BilliardTable,
    spec: ReducedSpaceSpec,
    proposals: u64,
    rng: &mut R,
) -> AcceptanceCount {
    let mut out = AcceptanceCount {
        proposals,
        accepted: 0,
        singular: 0,
    };
    for _ in 0..proposals {
        let x = sample_collision_measure(table, rng);
        let (piece, _) = table.locate(x.r);
        let member = match spec {
            ReducedSpaceSpec::Scatterer => spec.contains_piece(table, piece, piece),
            ReducedSpaceSpec::FirstFocusingArc => {
                if table.pieces()[piece].curvature() != Curvature::Focusing {
                    false
                } else {
                    match previous_piece(table, x) {
                        Ok(prev) => prev != piece,
                        Err(_) => {
                            out.singular += 1;
                            false
                        }
                    }
                }
            }
        };
        out.accepted += u64::from(member);
    }
    out
}

/// Closed-form `mu_M(M)`: `2 / (pi + l)` for the stadium, `|dB| / |dD|` for
/// rectangles with scatterers.
pub fn measure_m_closed_form(table: &BilliardTable) -> Result<f64> {
    match table.kind() {
        TableKind::Stadium { l } => Ok(2.0 / (PI + l)),
        TableKind::LorentzRect { .. } => Ok(table.scatterer_length() / table.perimeter()),
        TableKind::Drivebelt { .. } => Err(Error::Unsupported(
            "no closed form for the drivebelt reduced-space measure; use Monte Carlo".into(),
        )),
    }
}

/// The value `pi / (2 (pi + l))` once reported for the stadium, kept for comparison.
pub fn stadium_prior_measure(l: f64) -> f64 {
    PI / (2.0 * (PI + l))
}

/// Empirical mean return time against the Kac prediction `1 / mu_M(M)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KacCheck {
    pub mean_return: f64,
    pub predicted: f64,
}

impl KacCheck {
    pub fn relative_error(&self) -> f64 {
        (self.mean_return / self.predicted - 1.0).abs()
    }
}

pub fn kac_check<I>(return_times: I, mu_m: f64) -> Result<KacCheck>
where
    I: IntoIterator<Item = u64>,
{
    let (mut n, mut s) = (0u64, 0f64);
    for r in return_times {
        n += 1;
        s += r as f64;
    }
    if n == 0 {
        return Err(Error::InsufficientData("no return samples".into()));
    }
    if !(mu_m > 0.0 && mu_m <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "reduced-space measure must lie in (0, 1], got {mu_m}"
        )));
    }
    Ok(KacCheck {
        mean_return: s / n as f64,
        predicted: 1.0 / mu_m,
    })
}

/// Generator of a stationary induced orbit: starts from a `mu` sample and
/// restarts from a fresh one whenever a singular collision interrupts it.
pub struct InducedOrbit<'a> {
    table: &'a BilliardTable,
    spec: ReducedSpaceSpec,
    cap: u64,
    state: PhaseVec,
    piece: usize,
    /// Number of restarts caused by singular collisions.
    pub restarts: u64,
}

impl<'a> InducedOrbit<'a> {
    pub fn new<R: Rng + ?Sized>(
        table: &'a BilliardTable,
        spec: ReducedSpaceSpec,
        cap: u64,
        rng: &mut R,
    ) -> Self {
        let s = sample_mu(table, spec, rng);
        Self {
            table,
            spec,
            cap,
            state: s.state,
            piece: s.piece,
            restarts: 0,
        }
    }

    pub fn state(&self) -> PhaseVec {
        self.state
    }

    /// Advance by one return and sum `f` over the excursion block.
    /// Singular hits restart from a fresh `mu` sample and discard the partial
    /// sum; an iteration-cap overflow is returned as an error.
    pub fn next_summed<R, G>(&mut self, rng: &mut R, f: G) -> Result<(ReturnSample, f64)>
    where
        R: Rng + ?Sized,
        G: Fn(PhaseVec, bool) -> f64,
    {
        loop {
            let mut sum = 0.0;
            let res = return_map_with(
                self.table,
                self.spec,
                self.state,
                self.piece,
                self.cap,
                |x, m| sum += f(x, m),
            );
            match res {
                Ok(s) => {
                    self.state = s.end;
                    self.piece = s.end_piece;
                    return Ok((s, sum));
                }
                Err(e) if e.is_singular() => {
                    self.restarts += 1;
                    let s = sample_mu(self.table, self.spec, rng);
                    self.state = s.state;
                    self.piece = s.piece;
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<ReturnSample> {
        self.next_summed(rng, |_, _| 0.0).map(|(s, _)| s)
    }
}
