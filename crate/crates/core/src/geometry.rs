//! Billiard tables and the billiard map in collision coordinates `(r, phi)`.
//!
//! A table boundary is an ordered list of pieces (segments and circular arcs).
//! Every piece is oriented so that the table interior lies to the left of the
//! direction of increasing arclength; the inward normal is therefore the left
//! normal of the unit tangent. The reflection angle `phi` is measured from the
//! inward normal, positive towards the tangent direction, so an outgoing
//! velocity reads `cos(phi) * n + sin(phi) * t`.
//!
//! Arclength origins:
//! - stadium: start of the bottom segment, then right arc, top segment, left arc;
//! - drivebelt: start of the major arc, then bottom segment, minor arc, top segment;
//! - Lorentz rectangle: start of the bottom side, walking the outer boundary
//!   counterclockwise (corner quarter disks inline), followed by each interior
//!   disk traversed clockwise.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{Error, Result};

/// Rays shorter than this are treated as re-hitting the launch point.
pub const EPS_T: f64 = 1e-12;
/// Minimum `cos` of the incidence angle before a hit counts as tangential.
pub const EPS_TAN: f64 = 1e-10;
/// Minimum arclength distance from a piece junction.
pub const EPS_CORNER: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Counterclockwise rotation by a right angle.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A collision state: boundary arclength `r` and reflection angle `phi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseVec {
    pub r: f64,
    pub phi: f64,
}

impl PhaseVec {
    pub const fn new(r: f64, phi: f64) -> Self {
        Self { r, phi }
    }
}

/// Time-reversal involution `(r, phi) -> (r, -phi)`.
pub fn reverse(x: PhaseVec) -> PhaseVec {
    PhaseVec::new(x.r, -x.phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Curvature {
    Focusing,
    Dispersing,
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PieceShape {
    Segment {
        start: Vec2,
        end: Vec2,
    },
    /// Circular arc starting at `center + radius * (cos a, sin a)` with
    /// `a = start_angle`, swept by the signed angle `sweep`. Positive sweeps
    /// (counterclockwise) bound the table from outside and focus; negative
    /// sweeps belong to scatterers and disperse.
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPiece {
    pub shape: PieceShape,
}

impl BoundaryPiece {
    pub fn segment(start: Vec2, end: Vec2) -> Self {
        Self {
            shape: PieceShape::Segment { start, end },
        }
    }

    pub fn arc(center: Vec2, radius: f64, start_angle: f64, sweep: f64) -> Self {
        Self {
            shape: PieceShape::Arc {
                center,
                radius,
                start_angle,
                sweep,
            },
        }
    }

    pub fn length(&self) -> f64 {
        match self.shape {
            PieceShape::Segment { start, end } => (end - start).norm(),
            PieceShape::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn curvature(&self) -> Curvature {
        match self.shape {
            PieceShape::Segment { .. } => Curvature::Flat,
            PieceShape::Arc { sweep, .. } if sweep > 0.0 => Curvature::Focusing,
            PieceShape::Arc { .. } => Curvature::Dispersing,
        }
    }

    /// A full circle has no junction of its own.
    pub fn is_closed_loop(&self) -> bool {
        matches!(self.shape, PieceShape::Arc { sweep, .. } if (sweep.abs() - TAU).abs() < 1e-12)
    }

    pub fn start_point(&self) -> Vec2 {
        self.point_at(0.0)
    }

    pub fn end_point(&self) -> Vec2 {
        self.point_at(self.length())
    }

    /// Point at local arclength `s`.
    pub fn point_at(&self, s: f64) -> Vec2 {
        match self.shape {
            PieceShape::Segment { start, end } => {
                let d = end - start;
                start + d * (s / d.norm())
            }
            PieceShape::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let a = start_angle + sweep.signum() * s / radius;
                center + Vec2::from_angle(a) * radius
            }
        }
    }

    /// Unit tangent (direction of increasing arclength) at local arclength `s`.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        match self.shape {
            PieceShape::Segment { start, end } => {
                let d = end - start;
                d * (1.0 / d.norm())
            }
            PieceShape::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => {
                let a = start_angle + sweep.signum() * s / radius;
                Vec2::from_angle(a).perp() * sweep.signum()
            }
        }
    }

    /// Inward unit normal at local arclength `s`.
    pub fn normal_at(&self, s: f64) -> Vec2 {
        self.tangent_at(s).perp()
    }

    /// Nearest forward intersection of the ray `p + t v` (`|v| = 1`) with this
    /// piece, as `(t, s)`. Roots belonging to a launch point lying on the same
    /// line or circle are discarded.
    fn intersect(&self, p: Vec2, v: Vec2) -> Option<(f64, f64)> {
        match self.shape {
            PieceShape::Segment { start, end } => {
                let d = end - start;
                let len = d.norm();
                let w = start - p;
                // launch point on this line: no forward hit possible
                if (w.cross(d) / len).abs() < 1e-12 {
                    return None;
                }
                let denom = v.cross(d);
                if denom.abs() < 1e-300 {
                    return None;
                }
                let t = w.cross(d) / denom;
                let u = w.cross(v) / denom;
                if t > EPS_T && (-1e-12..=1.0 + 1e-12).contains(&u) {
                    Some((t, (u * len).clamp(0.0, len)))
                } else {
                    None
                }
            }
            PieceShape::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let w = p - center;
                let b = w.dot(v);
                let c = w.norm_sq() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let mut roots = [f64::NAN; 2];
                if c.abs() < 1e-9 * radius * radius {
                    // launch point on this circle: the other root is -2b
                    roots[0] = -2.0 * b;
                } else {
                    let q = -(b + b.signum() * sq);
                    roots[0] = q;
                    roots[1] = if q != 0.0 { c / q } else { f64::NAN };
                }
                let mut best: Option<(f64, f64)> = None;
                for &t in roots.iter() {
                    if !(t > EPS_T) {
                        continue;
                    }
                    let hit = w + v * t;
                    let rel = (hit.angle() - start_angle) * sweep.signum();
                    let mut off = rel.rem_euclid(TAU);
                    let span = sweep.abs();
                    let tol = 1e-12;
                    if off > span + tol {
                        // allow a hair below zero at the start junction
                        if TAU - off <= tol {
                            off = 0.0;
                        } else {
                            continue;
                        }
                    }
                    let s = (off.min(span)) * radius;
                    if best.map_or(true, |(bt, _)| t < bt) {
                        best = Some((t, s));
                    }
                }
                best
            }
        }
    }
}

/// Scatterer descriptor for rectangle tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scatterer {
    Disk { center: Vec2, radius: f64 },
    QuarterDisk { corner: RectCorner, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RectCorner {
    BottomLeft,
    BottomRight,
    TopRight,
    TopLeft,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TableKind {
    Stadium {
        l: f64,
    },
    Drivebelt {
        theta0: f64,
        theta1: f64,
        l: f64,
    },
    LorentzRect {
        l1: f64,
        l2: f64,
        scatterers: Vec<Scatterer>,
    },
}

/// A collision with the boundary produced by [`BilliardTable::step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collision {
    pub state: PhaseVec,
    pub piece: usize,
    pub free_path: f64,
}

#[derive(Clone, Debug)]
pub struct BilliardTable {
    kind: TableKind,
    pieces: Vec<BoundaryPiece>,
    offsets: Vec<f64>,
    lengths: Vec<f64>,
    perimeter: f64,
    scatterer_length: f64,
    channels: Vec<Channel>,
}

impl BilliardTable {
    fn from_pieces(kind: TableKind, pieces: Vec<BoundaryPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidTable("no boundary pieces".into()));
        }
        let mut offsets = Vec::with_capacity(pieces.len());
        let mut lengths = Vec::with_capacity(pieces.len());
        let mut total = 0.0;
        let mut scatterer_length = 0.0;
        for p in &pieces {
            if let PieceShape::Arc { radius, .. } = p.shape {
                if !(radius > 0.0) {
                    return Err(Error::InvalidTable("arc radius must be positive".into()));
                }
            }
            let len = p.length();
            if !(len > 0.0) {
                return Err(Error::InvalidTable("boundary piece of zero length".into()));
            }
            offsets.push(total);
            lengths.push(len);
            total += len;
            if p.curvature() == Curvature::Dispersing {
                scatterer_length += len;
            }
        }
        Ok(Self {
            kind,
            pieces,
            offsets,
            lengths,
            perimeter: total,
            scatterer_length,
            channels: Vec::new(),
        })
    }

    pub fn kind(&self) -> &TableKind {
        &self.kind
    }

    pub fn pieces(&self) -> &[BoundaryPiece] {
        &self.pieces
    }

    /// Total boundary length `|dD|`.
    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Total length of dispersing pieces `|dB|` (zero for stadia).
    pub fn scatterer_length(&self) -> f64 {
        self.scatterer_length
    }

    /// Free-flight channels (rectangle tables only).
    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Replace the channel list, e.g. with user-supplied descriptors.
    pub fn set_channels(&mut self, channels: Vec<Channel>) {
        self.channels = channels;
    }

    /// Arclength where piece `i` starts.
    pub fn piece_offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    pub fn piece_length(&self, i: usize) -> f64 {
        self.lengths[i]
    }

    /// Reduce `r` modulo the perimeter.
    pub fn wrap(&self, r: f64) -> f64 {
        let w = r.rem_euclid(self.perimeter);
        if w >= self.perimeter {
            0.0
        } else {
            w
        }
    }

    /// Piece index and local arclength for a boundary coordinate.
    pub fn locate(&self, r: f64) -> (usize, f64) {
        let r = self.wrap(r);
        let i = match self
            .offsets
            .binary_search_by(|o| o.partial_cmp(&r).expect("finite arclength"))
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (i, (r - self.offsets[i]).min(self.lengths[i]))
    }

    pub fn position(&self, r: f64) -> Vec2 {
        let (i, s) = self.locate(r);
        self.pieces[i].point_at(s)
    }

    /// Outgoing unit velocity for a collision state.
    pub fn velocity(&self, x: PhaseVec) -> Vec2 {
        let (i, s) = self.locate(x.r);
        let piece = &self.pieces[i];
        let (sp, cp) = x.phi.sin_cos();
        piece.normal_at(s) * cp + piece.tangent_at(s) * sp
    }

    /// One application of the billiard map, reporting the hit piece.
    pub fn step(&self, x: PhaseVec) -> Result<Collision> {
        let (i, s) = self.locate(x.r);
        self.step_from(i, s, x.phi)
    }

    fn step_from(&self, piece: usize, s: f64, phi: f64) -> Result<Collision> {
        let launch = &self.pieces[piece];
        let p = launch.point_at(s);
        let (sp, cp) = phi.sin_cos();
        let v = launch.normal_at(s) * cp + launch.tangent_at(s) * sp;

        let mut best: Option<(f64, usize, f64)> = None;
        for (j, pc) in self.pieces.iter().enumerate() {
            if let Some((t, sj)) = pc.intersect(p, v) {
                if best.map_or(true, |(bt, _, _)| t < bt) {
                    best = Some((t, j, sj));
                }
            }
        }
        let Some((t, j, sj)) = best else {
            return Err(Error::Escaped {
                r: self.offsets[piece] + s,
                phi,
            });
        };

        let hit = &self.pieces[j];
        let r_new = self.offsets[j] + sj;
        if !hit.is_closed_loop() && (sj < EPS_CORNER || sj > self.lengths[j] - EPS_CORNER) {
            return Err(Error::Corner { r: r_new });
        }
        let n = hit.normal_at(sj);
        let cos_inc = -v.dot(n);
        if cos_inc < EPS_TAN {
            return Err(Error::Tangency { r: r_new });
        }
        let out = v + n * (2.0 * cos_inc);
        let tan = hit.tangent_at(sj);
        let phi_new = out.dot(tan).atan2(out.dot(n)).clamp(-FRAC_PI_2, FRAC_PI_2);
        Ok(Collision {
            state: PhaseVec::new(self.wrap(r_new), phi_new),
            piece: j,
            free_path: t,
        })
    }
}

/// Bunimovich stadium: two unit semicircles joined by horizontal segments of
/// length `l`.
pub fn build_stadium(l: f64) -> Result<BilliardTable> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "stadium segment length must be positive, got {l}"
        )));
    }
    let pieces = vec![
        BoundaryPiece::segment(Vec2::new(0.0, -1.0), Vec2::new(l, -1.0)),
        BoundaryPiece::arc(Vec2::new(l, 0.0), 1.0, -FRAC_PI_2, PI),
        BoundaryPiece::segment(Vec2::new(l, 1.0), Vec2::new(0.0, 1.0)),
        BoundaryPiece::arc(Vec2::new(0.0, 0.0), 1.0, FRAC_PI_2, PI),
    ];
    BilliardTable::from_pieces(TableKind::Stadium { l }, pieces)
}

/// Skewed stadium: a unit major arc of central angle `theta0`, a unit minor
/// arc of central angle `theta1`, and two segments of length `l`, placed
/// symmetrically about the x-axis. The perimeter is `theta0 + theta1 + 2l`.
/// Unit radii and the three lengths fix the layout, so the segment/arc joints
/// are in general corners rather than tangential junctions.
pub fn build_drivebelt(theta0: f64, theta1: f64, l: f64) -> Result<BilliardTable> {
    if !(theta0 > PI && theta0 < 1.5 * PI) {
        return Err(Error::InvalidParameter(format!(
            "major arc angle must lie in (pi, 3pi/2), got {theta0}"
        )));
    }
    if !(theta1 > 0.0 && theta1 < FRAC_PI_2) {
        return Err(Error::InvalidParameter(format!(
            "minor arc angle must lie in (0, pi/2), got {theta1}"
        )));
    }
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "segment length must be positive, got {l}"
        )));
    }
    let (h0, h1) = (theta0 / 2.0, theta1 / 2.0);
    let dy = h0.sin() - h1.sin();
    if l * l <= dy * dy {
        return Err(Error::InvalidParameter(format!(
            "segments of length {l} cannot join arcs whose endpoints differ by {dy} in height"
        )));
    }
    let d = -h1.cos() - h0.cos() + (l * l - dy * dy).sqrt();
    let major_start = PI - h0;
    let minor_center = Vec2::new(d, 0.0);
    let major = BoundaryPiece::arc(Vec2::default(), 1.0, major_start, theta0);
    let minor = BoundaryPiece::arc(minor_center, 1.0, -h1, theta1);
    let pieces = vec![
        major,
        BoundaryPiece::segment(major.end_point(), minor.start_point()),
        minor,
        BoundaryPiece::segment(minor.end_point(), major.start_point()),
    ];
    BilliardTable::from_pieces(TableKind::Drivebelt { theta0, theta1, l }, pieces)
}

/// Rectangle `[0, l1] x [0, l2]` with disks and corner quarter disks removed.
pub fn build_lorentz_rect(l1: f64, l2: f64, scatterers: &[Scatterer]) -> Result<BilliardTable> {
    if !(l1 > 0.0 && l2 > 0.0) || !l1.is_finite() || !l2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rectangle sides must be positive, got {l1} x {l2}"
        )));
    }
    if scatterers.is_empty() {
        return Err(Error::InvalidTable(
            "at least one scatterer is required".into(),
        ));
    }
    let corner_point = |c: RectCorner| match c {
        RectCorner::BottomLeft => Vec2::new(0.0, 0.0),
        RectCorner::BottomRight => Vec2::new(l1, 0.0),
        RectCorner::TopRight => Vec2::new(l1, l2),
        RectCorner::TopLeft => Vec2::new(0.0, l2),
    };
    let mut corner_radius = [0.0f64; 4];
    let mut disks: Vec<(Vec2, f64)> = Vec::new();
    // (center, radius) of every scatterer for the overlap test
    let mut all: Vec<(Vec2, f64)> = Vec::new();
    for s in scatterers {
        match *s {
            Scatterer::Disk { center, radius } => {
                if !(radius > 0.0) {
                    return Err(Error::InvalidTable("disk radius must be positive".into()));
                }
                if center.x - radius <= 0.0
                    || center.x + radius >= l1
                    || center.y - radius <= 0.0
                    || center.y + radius >= l2
                {
                    return Err(Error::InvalidTable(format!(
                        "disk at ({}, {}) radius {radius} is not inside the rectangle",
                        center.x, center.y
                    )));
                }
                disks.push((center, radius));
                all.push((center, radius));
            }
            Scatterer::QuarterDisk { corner, radius } => {
                if !(radius > 0.0) || radius >= l1 || radius >= l2 {
                    return Err(Error::InvalidTable(format!(
                        "quarter disk radius {radius} does not fit the rectangle"
                    )));
                }
                let idx = corner as usize;
                if corner_radius[idx] > 0.0 {
                    return Err(Error::InvalidTable("two quarter disks on one corner".into()));
                }
                corner_radius[idx] = radius;
                all.push((corner_point(corner), radius));
            }
        }
    }
    for (a, &(ca, ra)) in all.iter().enumerate() {
        for &(cb, rb) in &all[a + 1..] {
            if (ca - cb).norm() <= ra + rb {
                return Err(Error::InvalidTable("scatterers overlap".into()));
            }
        }
    }

    use RectCorner::*;
    let corners = [BottomLeft, BottomRight, TopRight, TopLeft];
    // angle from each corner towards the end of the side arriving at it
    let arrive_angle = [FRAC_PI_2, PI, -FRAC_PI_2, 0.0];
    let mut pieces = Vec::new();
    for k in 0..4 {
        let from = corners[k];
        let to = corners[(k + 1) % 4];
        let (p0, p1) = (corner_point(from), corner_point(to));
        let dir = (p1 - p0) * (1.0 / (p1 - p0).norm());
        let start = p0 + dir * corner_radius[from as usize];
        let end = p1 - dir * corner_radius[to as usize];
        pieces.push(BoundaryPiece::segment(start, end));
        let rq = corner_radius[to as usize];
        if rq > 0.0 {
            let a0 = arrive_angle[(k + 1) % 4];
            pieces.push(BoundaryPiece::arc(p1, rq, a0, -FRAC_PI_2));
        }
    }
    for (center, radius) in disks {
        pieces.push(BoundaryPiece::arc(center, radius, 0.0, -TAU));
    }
    let mut table = BilliardTable::from_pieces(
        TableKind::LorentzRect {
            l1,
            l2,
            scatterers: scatterers.to_vec(),
        },
        pieces,
    )?;
    table.channels = detect_axis_channels(&table, l1, l2, scatterers);
    Ok(table)
}

/// A corridor of free flights: trajectories leaving the walls at angle
/// `angle` from the points in `ranges` travel `flight_length` without
/// meeting a scatterer.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub angle: f64,
    pub ranges: Vec<(f64, f64)>,
    pub flight_length: f64,
    /// Direction of travel, used to assign excursions to channels.
    pub direction: Vec2,
}

impl Channel {
    /// Total length `|A_i|` of the wall ranges.
    pub fn measure(&self) -> f64 {
        self.ranges.iter().map(|(a, b)| b - a).sum()
    }
}

// Complement of the union of `covered` inside [0, len], keeping pieces of positive width.
fn free_intervals(mut covered: Vec<(f64, f64)>, len: f64) -> Vec<(f64, f64)> {
    covered.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut at = 0.0;
    for (a, b) in covered {
        if a > at + 1e-12 {
            out.push((at, a.min(len)));
        }
        at = at.max(b);
    }
    if at < len - 1e-12 {
        out.push((at, len));
    }
    out
}

/// Horizontal and vertical bands not met by any scatterer, expressed as
/// arclength ranges on the walls where the 2-periodic orbits of the band sit.
fn detect_axis_channels(
    table: &BilliardTable,
    l1: f64,
    l2: f64,
    scatterers: &[Scatterer],
) -> Vec<Channel> {
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for s in scatterers {
        match *s {
            Scatterer::Disk { center, radius } => {
                ys.push((center.y - radius, center.y + radius));
                xs.push((center.x - radius, center.x + radius));
            }
            Scatterer::QuarterDisk { corner, radius } => {
                let (left, bottom) = match corner {
                    RectCorner::BottomLeft => (true, true),
                    RectCorner::BottomRight => (false, true),
                    RectCorner::TopRight => (false, false),
                    RectCorner::TopLeft => (true, false),
                };
                ys.push(if bottom { (0.0, radius) } else { (l2 - radius, l2) });
                xs.push(if left { (0.0, radius) } else { (l1 - radius, l1) });
            }
        }
    }
    // arclength range of the wall points with coordinate in [lo, hi]
    let wall_range = |on_wall: &dyn Fn(Vec2) -> bool, coord: &dyn Fn(Vec2) -> f64, lo: f64, hi: f64| {
        for (i, p) in table.pieces().iter().enumerate() {
            if let PieceShape::Segment { start, end } = p.shape {
                if on_wall(start) && on_wall(end) {
                    let (c0, c1) = (coord(start), coord(end));
                    let len = p.length();
                    let s_of = |c: f64| (c - c0) / (c1 - c0) * len;
                    let (a, b) = (s_of(lo), s_of(hi));
                    let (a, b) = (a.min(b).max(0.0), a.max(b).min(len));
                    if b > a {
                        let off = table.piece_offset(i);
                        return Some((off + a, off + b));
                    }
                }
            }
        }
        None
    };
    let mut channels = Vec::new();
    for (lo, hi) in free_intervals(ys, l2) {
        let left = wall_range(&|p: Vec2| p.x.abs() < 1e-12, &|p: Vec2| p.y, lo, hi);
        let right = wall_range(&|p: Vec2| (p.x - l1).abs() < 1e-12, &|p: Vec2| p.y, lo, hi);
        let ranges: Vec<_> = [right, left].into_iter().flatten().collect();
        if !ranges.is_empty() {
            channels.push(Channel {
                angle: 0.0,
                ranges,
                flight_length: l1,
                direction: Vec2::new(1.0, 0.0),
            });
        }
    }
    for (lo, hi) in free_intervals(xs, l1) {
        let bottom = wall_range(&|p: Vec2| p.y.abs() < 1e-12, &|p: Vec2| p.x, lo, hi);
        let top = wall_range(&|p: Vec2| (p.y - l2).abs() < 1e-12, &|p: Vec2| p.x, lo, hi);
        let ranges: Vec<_> = [bottom, top].into_iter().flatten().collect();
        if !ranges.is_empty() {
            channels.push(Channel {
                angle: 0.0,
                ranges,
                flight_length: l2,
                direction: Vec2::new(0.0, 1.0),
            });
        }
    }
    channels
}

/// The billiard map `T`.
pub fn billiard_map(table: &BilliardTable, x: PhaseVec) -> Result<PhaseVec> {
    table.step(x).map(|c| c.state)
}

/// Draw a state from the invariant measure `cos(phi) dr dphi` (normalised).
///
/// `r` is uniform on the boundary and `sin(phi)` is uniform on `[-1, 1]`,
/// which is the exact inverse-CDF form of the `cos(phi)` density.
pub fn sample_collision_measure<R: Rng + ?Sized>(table: &BilliardTable, rng: &mut R) -> PhaseVec {
    let r = rng.random::<f64>() * table.perimeter();
    let u: f64 = rng.random_range(-1.0..=1.0);
    PhaseVec::new(table.wrap(r), u.asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn stadium_perimeter_and_pieces() {
        let t = build_stadium(1.0).unwrap();
        assert!(close(t.perimeter(), TAU + 2.0, 1e-12));
        let t2 = build_stadium(2.0).unwrap();
        let lens: Vec<f64> = t2.pieces().iter().map(|p| p.length()).collect();
        assert!(close(lens[0], 2.0, 1e-15) && close(lens[2], 2.0, 1e-15));
        assert!(close(lens[1], PI, 1e-15) && close(lens[3], PI, 1e-15));
        // closed and tangent at every junction
        for i in 0..4 {
            let a = &t2.pieces()[i];
            let b = &t2.pieces()[(i + 1) % 4];
            assert!((a.end_point() - b.start_point()).norm() < 1e-12);
            assert!((a.tangent_at(a.length()) - b.tangent_at(0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn degenerate_stadium_rejected() {
        assert!(build_stadium(0.0).is_err());
        assert!(build_stadium(-1.0).is_err());
        assert!(build_stadium(f64::NAN).is_err());
    }

    #[test]
    fn drivebelt_perimeter_and_ranges() {
        let t = build_drivebelt(7.0 * PI / 6.0, PI / 6.0, 1.0).unwrap();
        assert!(close(t.perimeter(), 4.0 * PI / 3.0 + 2.0, 1e-12));
        for i in 0..4 {
            let a = &t.pieces()[i];
            let b = &t.pieces()[(i + 1) % 4];
            assert!((a.end_point() - b.start_point()).norm() < 1e-12);
        }
        assert!(build_drivebelt(PI, PI / 6.0, 1.0).is_err());
        assert!(build_drivebelt(7.0 * PI / 6.0, FRAC_PI_2, 1.0).is_err());
        assert!(build_drivebelt(1.5 * PI, 0.3, 1.0).is_err());
        assert!(build_drivebelt(7.0 * PI / 6.0, PI / 6.0, 0.1).is_err());
    }

    fn case1() -> BilliardTable {
        build_lorentz_rect(
            2.0,
            2.0,
            &[
                Scatterer::Disk {
                    center: Vec2::new(1.0, 1.0),
                    radius: 0.5,
                },
                Scatterer::QuarterDisk {
                    corner: RectCorner::BottomLeft,
                    radius: 0.5,
                },
                Scatterer::QuarterDisk {
                    corner: RectCorner::BottomRight,
                    radius: 0.5,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn lorentz_case1_lengths() {
        let t = case1();
        assert!(close(t.scatterer_length(), 1.5 * PI, 1e-12));
        assert!(close(t.perimeter(), 6.0 + 1.5 * PI, 1e-12));
        // numeric piece-length summation agrees with the closed form
        let sum: f64 = t.pieces().iter().map(|p| p.length()).sum();
        assert!(close(sum, 6.0 + 1.5 * PI, 1e-12));
        // outer loop closes
        let outer = &t.pieces()[..t.pieces().len() - 1];
        for i in 0..outer.len() {
            let a = &outer[i];
            let b = &outer[(i + 1) % outer.len()];
            assert!((a.end_point() - b.start_point()).norm() < 1e-12, "gap after {i}");
        }
    }

    #[test]
    fn case1_has_one_horizontal_channel() {
        let t = case1();
        let ch = t.channels();
        assert_eq!(ch.len(), 1);
        assert!(close(ch[0].measure(), 1.0, 1e-12));
        assert!(close(ch[0].flight_length, 2.0, 1e-15));
        // every range point is a horizontal 2-periodic orbit
        for &(a, b) in &ch[0].ranges {
            for k in 1..10 {
                let r = a + (b - a) * k as f64 / 10.0;
                let c = t.step(PhaseVec::new(r, 0.0)).unwrap();
                assert!(close(c.free_path, 2.0, 1e-12));
                assert!(close(c.state.phi, 0.0, 1e-12));
                let p = t.position(r);
                assert!(p.y >= 1.5 - 1e-12);
            }
        }
    }

    #[test]
    fn lorentz_rejects_bad_layouts() {
        let overlapping = [
            Scatterer::Disk {
                center: Vec2::new(1.0, 1.0),
                radius: 0.5,
            },
            Scatterer::Disk {
                center: Vec2::new(1.6, 1.0),
                radius: 0.3,
            },
        ];
        assert!(build_lorentz_rect(3.0, 2.0, &overlapping).is_err());
        assert!(build_lorentz_rect(2.0, 2.0, &[]).is_err());
        let outside = [Scatterer::Disk {
            center: Vec2::new(1.9, 1.0),
            radius: 0.5,
        }];
        assert!(build_lorentz_rect(2.0, 2.0, &outside).is_err());
    }

    #[test]
    fn perpendicular_bounce_between_flats() {
        let t = build_stadium(1.0).unwrap();
        let x = PhaseVec::new(0.5, 0.0);
        let c = t.step(x).unwrap();
        assert_eq!(c.piece, 2);
        // top segment runs from (1, 1) to (0, 1): midpoint at local s = 0.5
        assert!(close(c.state.r, 1.0 + PI + 0.5, 1e-12));
        assert!(close(c.state.phi, 0.0, 1e-12));
        assert!(close(c.free_path, 2.0, 1e-12));
    }

    #[test]
    fn axis_orbit_between_arc_apexes() {
        let l = 1.0;
        let t = build_stadium(l).unwrap();
        // left arc apex (-1, 0) sits half way along the left arc
        let x = PhaseVec::new(2.0 * l + PI + FRAC_PI_2, 0.0);
        let c = t.step(x).unwrap();
        assert_eq!(c.piece, 1);
        assert!(close(c.state.r, l + FRAC_PI_2, 1e-12));
        assert!(close(c.state.phi, 0.0, 1e-12));
        assert!(close(c.free_path, 2.0 + l, 1e-12));
        let back = t.step(c.state).unwrap();
        assert!(close(back.state.r, x.r, 1e-12));
    }

    #[test]
    fn reverse_is_an_involution() {
        let x = PhaseVec::new(1.0, 0.3);
        assert_eq!(reverse(x), PhaseVec::new(1.0, -0.3));
        assert_eq!(reverse(reverse(x)), x);
        let y = PhaseVec::new(2.5, 0.0);
        assert_eq!(reverse(y).r, y.r);
        assert_eq!(reverse(y).phi.abs(), 0.0);
    }

    #[test]
    fn map_then_reverse_returns_to_start() {
        let t = build_stadium(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for _ in 0..2000 {
            let x = sample_collision_measure(&t, &mut rng);
            let Ok(y) = billiard_map(&t, reverse(x)) else { continue };
            let Ok(z) = billiard_map(&t, reverse(y)) else { continue };
            let dr = (z.r - x.r).abs().min(t.perimeter() - (z.r - x.r).abs());
            assert!(dr < 1e-9 && (z.phi - x.phi).abs() < 1e-9, "{x:?} -> {z:?}");
            checked += 1;
        }
        assert!(checked > 1990);
    }

    #[test]
    fn reflection_angle_stays_bounded() {
        for t in [build_stadium(1.0).unwrap(), case1()] {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut x = sample_collision_measure(&t, &mut rng);
            for _ in 0..5000 {
                match t.step(x) {
                    Ok(c) => {
                        assert!(c.state.phi.abs() <= FRAC_PI_2);
                        assert!(c.free_path > 0.0);
                        x = c.state;
                    }
                    Err(e) => {
                        assert!(e.is_singular());
                        x = sample_collision_measure(&t, &mut rng);
                    }
                }
            }
        }
    }

    #[test]
    fn collision_measure_moments() {
        let t = build_stadium(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let (mut s_sin, mut s_r) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_collision_measure(&t, &mut rng);
            assert!(x.phi.abs() <= FRAC_PI_2 && x.r >= 0.0 && x.r < t.perimeter());
            s_sin += x.phi.sin();
            s_r += x.r;
        }
        assert!((s_sin / n as f64).abs() < 3e-3);
        let mean_r = s_r / n as f64;
        assert!((mean_r / (t.perimeter() / 2.0) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn drivebelt_and_lorentz_maps_run() {
        let tables = [
            build_drivebelt(7.0 * PI / 6.0, PI / 6.0, 1.0).unwrap(),
            build_drivebelt(1.3 * PI, 0.4, 1.5).unwrap(),
            case1(),
        ];
        for t in tables {
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut ok = 0;
            for _ in 0..1000 {
                let x = sample_collision_measure(&t, &mut rng);
                if let Ok(y) = billiard_map(&t, x) {
                    let z = billiard_map(&t, reverse(y)).unwrap();
                    let dr = (z.r - x.r).abs().min(t.perimeter() - (z.r - x.r).abs());
                    assert!(dr < 1e-9 && (z.phi + x.phi).abs() < 1e-9);
                    ok += 1;
                }
            }
            assert!(ok > 990);
        }
    }
}
