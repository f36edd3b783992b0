//! Stable and unstable curves of hyperbolic periodic orbits.
//!
//! A branch is parameterized by `tau = k + s`, `0 <= s < 1`:
//! `point(tau) = G^k(p + eps mu^s v)`, where `G` is the orbit's return map
//! (forward for unstable branches, inverse for stable ones, squared when
//! the multiplier is negative), `v` the signed eigendirection and `mu > 1`
//! the expansion factor of `G` along `v`. Consecutive fundamental domains
//! abut up to `O(eps²)`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::billiard::{forward_lifted, inverse_lifted, LiftedPhasePoint, PhasePoint};
use crate::curve::Oval;
use crate::math::{cross, wrap_tau, Mat2, Vec2};
use crate::stability::{phase_distance, PeriodicOrbit};
use crate::{Error, Result};

/// Eigen-decomposition of a hyperbolic monodromy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenDirections {
    pub unstable: Vec2,
    pub stable: Vec2,
    pub lambda_u: f64,
    pub lambda_s: f64,
}

fn eigenvector(m: &Mat2, lambda: f64) -> Vec2 {
    let a = Vec2::new(m[(0, 1)], lambda - m[(0, 0)]);
    let b = Vec2::new(lambda - m[(1, 1)], m[(1, 0)]);
    let mut v = if a.norm_squared() >= b.norm_squared() { a } else { b };
    v /= v.norm();
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        v = -v;
    }
    v
}

/// Unit eigenvectors, oriented with nonnegative `phi` component.
pub fn eigen_directions(m: &Mat2) -> Result<EigenDirections> {
    let (lambda_u, lambda_s) = crate::stability::hyperbolic_eigenvalues(m)?;
    Ok(EigenDirections {
        unstable: eigenvector(m, lambda_u),
        stable: eigenvector(m, lambda_s),
        lambda_u,
        lambda_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BranchKind {
    UnstablePlus,
    UnstableMinus,
    StablePlus,
    StableMinus,
}

impl BranchKind {
    pub const ALL: [BranchKind; 4] = [
        BranchKind::UnstablePlus,
        BranchKind::UnstableMinus,
        BranchKind::StablePlus,
        BranchKind::StableMinus,
    ];

    pub fn is_unstable(&self) -> bool {
        matches!(self, BranchKind::UnstablePlus | BranchKind::UnstableMinus)
    }

    fn sign(&self) -> f64 {
        match self {
            BranchKind::UnstablePlus | BranchKind::StablePlus => 1.0,
            _ => -1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BranchKind::UnstablePlus => "unstable+",
            BranchKind::UnstableMinus => "unstable-",
            BranchKind::StablePlus => "stable+",
            BranchKind::StableMinus => "stable-",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s || alloc::format!("{k:?}").eq_ignore_ascii_case(s))
    }
}

/// Resolution and size limits for branch growth.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Budget {
    pub max_points: usize,
    pub max_arclength: f64,
    pub max_step: f64,
    pub max_turn: f64,
    /// Seed offset; `None` means `1e-7` times the phase-space diameter.
    pub epsilon: Option<f64>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_points: 20_000,
            max_arclength: 5.0,
            max_step: 1e-3,
            max_turn: 0.2,
            epsilon: None,
        }
    }
}

/// Diameter of the closed cylinder `[0, 2pi] x [0, pi]`.
pub fn phase_space_diameter() -> f64 {
    libm::hypot(TAU, PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchPoint {
    pub tau: f64,
    /// Cumulative polyline length from the periodic point.
    pub arc: f64,
    pub point: LiftedPhasePoint,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManifoldBranch {
    pub kind: BranchKind,
    pub point_index: usize,
    pub periodic_point: LiftedPhasePoint,
    /// All points of the underlying orbit.
    pub orbit_points: Vec<LiftedPhasePoint>,
    /// Multiplier of `T^n` along this branch (`lambda_u` or `lambda_s`).
    pub eigenvalue: f64,
    /// Signed unit seed direction.
    pub direction: Vec2,
    pub epsilon: f64,
    /// Expansion factor of the growth map.
    pub expansion: f64,
    /// Number of bounces in one application of the growth map.
    pub power: usize,
    /// Lift shift `2 pi m power / n` removed after each application.
    pub shift: f64,
    pub points: Vec<BranchPoint>,
    /// True when the arclength budget was reached; false when growth
    /// stopped on the point budget or a map failure.
    pub complete: bool,
}

impl ManifoldBranch {
    fn grow_map(&self, oval: &Oval, p: LiftedPhasePoint) -> Result<LiftedPhasePoint> {
        let mut q = p;
        for _ in 0..self.power {
            q = if self.kind.is_unstable() {
                forward_lifted(oval, q)?
            } else {
                inverse_lifted(oval, q)?
            };
        }
        q.phi += if self.kind.is_unstable() { -self.shift } else { self.shift };
        Ok(q)
    }

    fn seed(&self, s: f64) -> LiftedPhasePoint {
        let r = self.epsilon * libm::pow(self.expansion, s);
        LiftedPhasePoint::new(
            self.periodic_point.phi + r * self.direction.x,
            self.periodic_point.theta + r * self.direction.y,
        )
    }

    /// Exact branch point at parameter `tau >= 0`.
    pub fn evaluate(&self, oval: &Oval, tau: f64) -> Result<LiftedPhasePoint> {
        let k = libm::floor(tau).max(0.0);
        let mut q = self.seed(tau - k);
        for _ in 0..k as usize {
            q = self.grow_map(oval, q)?;
        }
        Ok(q)
    }

    pub fn arclength(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.arc)
    }

    fn same_as(&self, other: &ManifoldBranch) -> bool {
        self.kind == other.kind && phase_distance(self.periodic_point, other.periodic_point) < 1e-12
    }

    fn shares_orbit(&self, other: &ManifoldBranch) -> bool {
        self.orbit_points
            .iter()
            .any(|p| phase_distance(*p, other.periodic_point) < 1e-9)
    }
}

fn as_vec(p: &LiftedPhasePoint) -> Vec2 {
    Vec2::new(p.phi, p.theta)
}

struct Grower<'a> {
    oval: &'a Oval,
    budget: Budget,
    branch: ManifoldBranch,
    stop: bool,
}

impl Grower<'_> {
    fn push(&mut self, tau: f64, p: LiftedPhasePoint) {
        let last = self.branch.points.last().copied();
        let arc = last.map_or(0.0, |l| l.arc + (as_vec(&p) - as_vec(&l.point)).norm());
        self.branch.points.push(BranchPoint { tau, arc, point: p });
        if arc >= self.budget.max_arclength {
            self.branch.complete = true;
            self.stop = true;
        } else if self.branch.points.len() >= self.budget.max_points {
            self.stop = true;
        }
    }

    fn acceptable(&self, a: &(f64, LiftedPhasePoint), b: &(f64, LiftedPhasePoint)) -> bool {
        if b.0 - a.0 < 1e-13 {
            return true;
        }
        let seg = as_vec(&b.1) - as_vec(&a.1);
        if seg.norm() > self.budget.max_step {
            return false;
        }
        let n = self.branch.points.len();
        if n >= 2 {
            let prev = as_vec(&self.branch.points[n - 1].point) - as_vec(&self.branch.points[n - 2].point);
            let turn = libm::atan2(cross(&prev, &seg), prev.dot(&seg)).abs();
            if prev.norm() > 0.0 && seg.norm() > 0.0 && turn > self.budget.max_turn {
                return false;
            }
        }
        true
    }

    /// Pushes `b` after inserting enough exact points between `a` and `b`.
    fn refine(&mut self, a: (f64, LiftedPhasePoint), b: (f64, LiftedPhasePoint)) -> Result<()> {
        if self.stop {
            return Ok(());
        }
        if self.acceptable(&a, &b) {
            self.push(b.0, b.1);
            return Ok(());
        }
        let tau = 0.5 * (a.0 + b.0);
        let mid = (tau, self.branch.evaluate(self.oval, tau)?);
        self.refine(a, mid)?;
        self.refine(mid, b)
    }

    fn grow(&mut self) -> Result<()> {
        let origin = (0.0, self.branch.seed(0.0));
        self.push(origin.0, origin.1);
        let mut domain: Vec<(f64, LiftedPhasePoint)> = (0..=8)
            .map(|j| {
                let s = j as f64 / 8.0;
                (s, self.branch.seed(s))
            })
            .collect();
        domain[8].0 = 1.0;
        loop {
            for w in 1..domain.len() {
                let a = (domain[w - 1].0, self.branch.points.last().unwrap().point);
                self.refine(a, domain[w])?;
                if self.stop {
                    return Ok(());
                }
            }
            // The next domain starts with the images of every point placed
            // in this one.
            let start = domain[0].0;
            let placed: Vec<(f64, LiftedPhasePoint)> = self
                .branch
                .points
                .iter()
                .rev()
                .take_while(|p| p.tau >= start)
                .map(|p| (p.tau, p.point))
                .collect();
            let mut next = Vec::with_capacity(placed.len());
            for (tau, p) in placed.into_iter().rev() {
                next.push((tau + 1.0, self.branch.grow_map(self.oval, p)?));
            }
            domain = next;
        }
    }
}

/// Grows one branch of the stable or unstable curve at orbit point `index`.
pub fn grow_branch(
    oval: &Oval,
    orbit: &PeriodicOrbit,
    index: usize,
    kind: BranchKind,
    budget: &Budget,
) -> Result<ManifoldBranch> {
    if index >= orbit.n {
        return Err(Error::InvalidInput(alloc::format!("orbit point {index} out of range")));
    }
    if !orbit.class.is_saddle() {
        return Err(Error::NotHyperbolic { trace: orbit.trace });
    }
    let local = orbit.rotated(index);
    let eig = eigen_directions(&local.monodromy)?;
    let (lambda, dir) = if kind.is_unstable() {
        (eig.lambda_u, eig.unstable)
    } else {
        (eig.lambda_s, eig.stable)
    };
    let power = if lambda < 0.0 { 2 * orbit.n } else { orbit.n };
    let expansion = if lambda < 0.0 { eig.lambda_u * eig.lambda_u } else { eig.lambda_u.abs() };
    let mut periodic_point = local.lifted_points()[0];
    periodic_point.phi = orbit.vertices[index].phi;
    let branch = ManifoldBranch {
        kind,
        point_index: index,
        periodic_point,
        orbit_points: orbit.lifted_points(),
        eigenvalue: lambda,
        direction: dir * kind.sign(),
        epsilon: budget.epsilon.unwrap_or(1e-7 * phase_space_diameter()),
        expansion,
        power,
        shift: TAU * orbit.m as f64 * (power / orbit.n) as f64,
        points: Vec::new(),
        complete: false,
    };
    let mut grower = Grower {
        oval,
        budget: *budget,
        branch,
        stop: false,
    };
    if let Err(e) = grower.grow() {
        if grower.branch.points.len() < 2 {
            return Err(e);
        }
        grower.branch.complete = false;
    }
    Ok(grower.branch)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum IntersectionKind {
    Homoclinic,
    Heteroclinic,
}

/// A crossing between two branches.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeteroclinicPoint {
    pub location: PhasePoint,
    pub branches: (BranchKind, BranchKind),
    pub tau: (f64, f64),
    /// Acute angle between the branches, in `[0, pi/2]`.
    pub crossing_angle: f64,
    pub transversal: bool,
    pub kind: IntersectionKind,
    /// Unit tangents of the two branches at the crossing, in `(phi, theta)`.
    pub direction_a: Vec2,
    pub direction_b: Vec2,
    /// Points of the periodic orbits the branches belong to.
    pub periodic_points: Vec<PhasePoint>,
}

impl HeteroclinicPoint {
    /// `d theta / d phi` of the first branch at the crossing.
    pub fn slope(&self) -> f64 {
        self.direction_a.y / self.direction_a.x
    }
}

fn segment_crossing(p0: Vec2, p1: Vec2, q0: Vec2, q1: Vec2) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let denom = cross(&r, &s);
    if denom == 0.0 {
        return None;
    }
    let d = q0 - p0;
    let t = cross(&d, &s) / denom;
    let u = cross(&d, &r) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some((t, u))
}

fn acute_angle(a: &Vec2, b: &Vec2) -> f64 {
    let ang = libm::atan2(cross(a, b), a.dot(b)).abs();
    if ang > PI / 2.0 {
        PI - ang
    } else {
        ang
    }
}

struct Segment {
    index: usize,
    a: Vec2,
    b: Vec2,
}

/// Segments with `phi` shifted so the first endpoint lies in `[0, 2pi)`,
/// plus a copy shifted by `-2pi` when a segment leaves that window.
fn reduced_segments(branch: &ManifoldBranch) -> Vec<Segment> {
    let mut out = Vec::with_capacity(branch.points.len());
    for (i, w) in branch.points.windows(2).enumerate() {
        let (a, b) = (as_vec(&w[0].point), as_vec(&w[1].point));
        let shift = TAU * libm::floor(a.x / TAU);
        let off = Vec2::new(shift, 0.0);
        let (a, b) = (a - off, b - off);
        if b.x >= TAU || b.x < 0.0 {
            let dir = if b.x >= TAU { TAU } else { -TAU };
            out.push(Segment {
                index: i,
                a: a - Vec2::new(dir, 0.0),
                b: b - Vec2::new(dir, 0.0),
            });
        }
        out.push(Segment { index: i, a, b });
    }
    out
}

/// All crossings between two branches, refined on the exact curves.
pub fn find_intersections(
    oval: &Oval,
    a: &ManifoldBranch,
    b: &ManifoldBranch,
    angle_threshold: f64,
) -> Vec<HeteroclinicPoint> {
    if a.same_as(b) || a.points.len() < 2 || b.points.len() < 2 {
        return Vec::new();
    }
    let seg_a = reduced_segments(a);
    let seg_b = reduced_segments(b);
    let longest = seg_a.iter().chain(&seg_b).fold(1e-9f64, |m, s| m.max((s.b - s.a).norm()));
    let cell = 2.0 * longest;
    let key = |v: f64| libm::floor(v / cell) as i64;
    let mut buckets: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (k, s) in seg_b.iter().enumerate() {
        for x in key(s.a.x.min(s.b.x))..=key(s.a.x.max(s.b.x)) {
            for y in key(s.a.y.min(s.b.y))..=key(s.a.y.max(s.b.y)) {
                buckets.entry((x, y)).or_default().push(k);
            }
        }
    }
    let periodic_points: Vec<PhasePoint> = a
        .orbit_points
        .iter()
        .chain(if a.shares_orbit(b) { [].iter() } else { b.orbit_points.iter() })
        .map(|p| p.project())
        .collect();
    let kind = if a.shares_orbit(b) {
        IntersectionKind::Homoclinic
    } else {
        IntersectionKind::Heteroclinic
    };

    let mut found: Vec<HeteroclinicPoint> = Vec::new();
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for sa in &seg_a {
        let mut candidates: Vec<usize> = Vec::new();
        for x in key(sa.a.x.min(sa.b.x))..=key(sa.a.x.max(sa.b.x)) {
            for y in key(sa.a.y.min(sa.b.y))..=key(sa.a.y.max(sa.b.y)) {
                if let Some(list) = buckets.get(&(x, y)) {
                    candidates.extend(list);
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        for k in candidates {
            let sb = &seg_b[k];
            if seen.contains(&(sa.index, sb.index)) {
                continue;
            }
            let Some((t, u)) = segment_crossing(sa.a, sa.b, sb.a, sb.b) else {
                continue;
            };
            // Crossings at the shared periodic point are not intersections
            // of the curves proper.
            let at = sa.a + t * (sa.b - sa.a);
            let near_periodic = periodic_points
                .iter()
                .any(|p| libm::hypot(crate::math::wrap_pi(at.x - p.phi), at.y - p.theta) < 10.0 * a.epsilon.max(b.epsilon));
            if near_periodic {
                continue;
            }
            seen.push((sa.index, sb.index));
            let ta = (a.points[sa.index].tau, a.points[sa.index + 1].tau);
            let tb = (b.points[sb.index].tau, b.points[sb.index + 1].tau);
            let hit = refine_crossing(oval, a, b, ta, tb, t, u);
            let angle = acute_angle(&hit.da, &hit.db);
            if found.iter().any(|f| {
                libm::hypot(crate::math::wrap_pi(f.location.phi - hit.location.phi), f.location.theta - hit.location.theta)
                    < 1e-9
            }) {
                continue;
            }
            found.push(HeteroclinicPoint {
                location: hit.location,
                branches: (a.kind, b.kind),
                tau: hit.tau,
                crossing_angle: angle,
                transversal: angle > angle_threshold,
                kind,
                direction_a: hit.da,
                direction_b: hit.db,
                periodic_points: periodic_points.clone(),
            });
        }
    }
    found
}

struct Hit {
    location: PhasePoint,
    tau: (f64, f64),
    da: Vec2,
    db: Vec2,
}

/// Bisects both parameter intervals, keeping the pair of sub-chords that
/// still cross, until the chords are shorter than `1e-9`.
fn refine_crossing(
    oval: &Oval,
    a: &ManifoldBranch,
    b: &ManifoldBranch,
    mut ta: (f64, f64),
    mut tb: (f64, f64),
    t: f64,
    u: f64,
) -> Hit {
    let eval = |br: &ManifoldBranch, tau: f64| br.evaluate(oval, tau).ok().map(|p| as_vec(&p));
    let lift_b = |p: Vec2, reference: Vec2| {
        let shift = TAU * libm::round((p.x - reference.x) / TAU);
        Vec2::new(p.x - shift, p.y)
    };
    let init = (
        eval(a, ta.0),
        eval(a, ta.1),
        eval(b, tb.0),
        eval(b, tb.1),
    );
    let (Some(mut a0), Some(mut a1), Some(b0r), Some(b1r)) = init else {
        let pa = as_vec(&a.points[0].point);
        return Hit {
            location: PhasePoint::new(pa.x, pa.y),
            tau: (ta.0, tb.0),
            da: Vec2::new(1.0, 0.0),
            db: Vec2::new(1.0, 0.0),
        };
    };
    let mut b0 = lift_b(b0r, a0);
    let mut b1 = lift_b(b1r, a0);
    let (mut tt, mut uu) = (t, u);
    for _ in 0..80 {
        if (a1 - a0).norm() < 1e-9 && (b1 - b0).norm() < 1e-9 {
            break;
        }
        let am = 0.5 * (ta.0 + ta.1);
        let bm = 0.5 * (tb.0 + tb.1);
        let (Some(amv), Some(bmv)) = (eval(a, am), eval(b, bm)) else {
            break;
        };
        let bmv = lift_b(bmv, a0);
        let halves_a = [((ta.0, am), (a0, amv)), ((am, ta.1), (amv, a1))];
        let halves_b = [((tb.0, bm), (b0, bmv)), ((bm, tb.1), (bmv, b1))];
        let mut chosen = None;
        'search: for ha in &halves_a {
            for hb in &halves_b {
                if let Some((t2, u2)) = segment_crossing(ha.1 .0, ha.1 .1, hb.1 .0, hb.1 .1) {
                    chosen = Some((*ha, *hb, t2, u2));
                    break 'search;
                }
            }
        }
        let Some((ha, hb, t2, u2)) = chosen else {
            break;
        };
        ta = ha.0;
        (a0, a1) = ha.1;
        tb = hb.0;
        (b0, b1) = hb.1;
        tt = t2;
        uu = u2;
    }
    let at = a0 + tt * (a1 - a0);
    let da = (a1 - a0).normalize();
    let db = (b1 - b0).normalize();
    Hit {
        location: PhasePoint::new(wrap_tau(at.x), at.y),
        tau: (ta.0 + tt * (ta.1 - ta.0), tb.0 + uu * (tb.1 - tb.0)),
        da,
        db,
    }
}

/// Focusing distances of the forward and backward pencils through a point
/// where an invariant curve has slope `slope = d theta / d phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PencilSlopes {
    pub r0: f64,
    pub theta0: f64,
    pub slope: f64,
    /// `R0 sin(theta0) / (1 + slope)`; infinite when flagged.
    pub d_plus: f64,
    /// `R0 sin(theta0) / (1 - slope)`; infinite when flagged.
    pub d_minus: f64,
    pub plus_finite: bool,
    pub minus_finite: bool,
}

pub fn focusing_distances(r0: f64, theta0: f64, slope: f64) -> PencilSlopes {
    let x = r0 * libm::sin(theta0);
    let (dp, dm) = (1.0 + slope, 1.0 - slope);
    let plus_finite = dp.abs() > 1e-12;
    let minus_finite = dm.abs() > 1e-12;
    PencilSlopes {
        r0,
        theta0,
        slope,
        d_plus: if plus_finite { x / dp } else { f64::INFINITY },
        d_minus: if minus_finite { x / dm } else { f64::INFINITY },
        plus_finite,
        minus_finite,
    }
}

/// Slopes of the unstable and stable curves after a bump with
/// `lambda'' = h` at a tangency with common slope `slope`.
pub fn tangency_splitting_prediction(r0: f64, _theta0: f64, slope: f64, h: f64) -> (f64, f64) {
    (slope + h * (1.0 - slope) / r0, slope - h * (1.0 + slope) / r0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::OvalSpec;
    use crate::math::unit;
    use core::f64::consts::FRAC_PI_2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigen_directions_of_the_ellipse_axis_matrix() {
        let m = Mat2::new(7.0, 8.0, 6.0, 7.0);
        let e = eigen_directions(&m).unwrap();
        assert!((e.lambda_u - (7.0 + 4.0 * libm::sqrt(3.0))).abs() < 1e-12);
        assert!((e.lambda_u * e.lambda_s - 1.0).abs() < 1e-12);
        assert!((m * e.unstable - e.lambda_u * e.unstable).norm() < 1e-10 * e.lambda_u);
        assert!((m * e.stable - e.lambda_s * e.stable).norm() < 1e-10);
        // at a symmetric point the stable direction is the reversed unstable one
        let h = Vec2::new(e.unstable.x, -e.unstable.y);
        assert!(cross(&h, &e.stable).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_product_for_random_hyperbolic_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut count = 0;
        while count < 100 {
            let (a, b, c): (f64, f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            if a.abs() < 1e-3 {
                continue;
            }
            let d = (1.0 + b * c) / a;
            let m = Mat2::new(a, b, c, d);
            if (a + d).abs() <= 2.0 + 1e-6 {
                continue;
            }
            let e = eigen_directions(&m).unwrap();
            assert!((e.lambda_u * e.lambda_s - 1.0).abs() < 1e-8);
            count += 1;
        }
        assert!(eigen_directions(&Mat2::new(0.0, 1.0, -1.0, 0.0)).is_err());
    }

    fn ellipse_major(a: f64) -> (Oval, PeriodicOrbit) {
        let oval = Oval::new(OvalSpec::ellipse(a, 1.0)).unwrap();
        let orbit = PeriodicOrbit::from_point(&oval, 1, 2, LiftedPhasePoint::new(FRAC_PI_2, FRAC_PI_2)).unwrap();
        (oval, orbit)
    }

    #[test]
    fn fundamental_domain_abuts_its_image() {
        let (oval, orbit) = ellipse_major(1.2);
        let br = grow_branch(&oval, &orbit, 0, BranchKind::UnstablePlus, &Budget { max_arclength: 0.5, ..Default::default() }).unwrap();
        let far = br.evaluate(&oval, 1.0).unwrap();
        let image = br.grow_map(&oval, br.evaluate(&oval, 0.0).unwrap()).unwrap();
        assert!(phase_distance(far, image) < 1e-6);
        assert!(br.complete);
        for w in br.points.windows(2) {
            assert!((as_vec(&w[1].point) - as_vec(&w[0].point)).norm() <= 1e-3 + 1e-12);
        }
    }

    #[test]
    fn branch_contracts_backward_at_the_stable_rate() {
        let oval = Oval::new(OvalSpec::fourier(1.0, &[(2, 0.05, 0.0)])).unwrap();
        // the diameter at tangent angle pi/2 is the short axis
        let orbit = PeriodicOrbit::from_point(&oval, 1, 2, LiftedPhasePoint::new(FRAC_PI_2, FRAC_PI_2)).unwrap();
        assert!(orbit.trace > 2.0);
        let br = grow_branch(&oval, &orbit, 0, BranchKind::UnstablePlus, &Budget { max_arclength: 0.3, ..Default::default() }).unwrap();
        let (_, ls) = crate::stability::hyperbolic_eigenvalues(&orbit.monodromy).unwrap();
        let mut q = br.evaluate(&oval, 6.5).unwrap();
        let mut dists = Vec::new();
        for _ in 0..10 {
            for _ in 0..2 {
                q = inverse_lifted(&oval, q).unwrap();
            }
            q.phi += TAU;
            dists.push(phase_distance(q, orbit.lifted_points()[0]));
        }
        let rate = dists[9] / dists[8];
        assert!((rate - ls.abs()).abs() < 0.05 * ls.abs(), "{rate} vs {ls}");
    }

    #[test]
    fn branch_is_invariant_and_epsilon_independent() {
        let oval = Oval::new(OvalSpec::fourier(1.0, &[(2, 0.05, 0.0)])).unwrap();
        let orbit = PeriodicOrbit::from_point(&oval, 1, 2, LiftedPhasePoint::new(FRAC_PI_2, FRAC_PI_2)).unwrap();
        let budget = Budget { max_arclength: 1.0, ..Default::default() };
        let br = grow_branch(&oval, &orbit, 0, BranchKind::UnstablePlus, &budget).unwrap();
        let half = grow_branch(&oval, &orbit, 0, BranchKind::UnstablePlus, &Budget { epsilon: Some(0.5 * br.epsilon), ..budget }).unwrap();
        let dist_to = |poly: &[BranchPoint], p: Vec2| {
            poly.windows(2)
                .map(|w| {
                    let (a, b) = (as_vec(&w[0].point), as_vec(&w[1].point));
                    let t = ((p - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
                    (a + t * (b - a) - p).norm()
                })
                .fold(f64::INFINITY, f64::min)
        };
        for bp in half.points.iter().step_by(7).filter(|p| p.arc < 0.9) {
            assert!(dist_to(&br.points, as_vec(&bp.point)) < 1e-5);
        }
        for bp in br.points.iter().step_by(11).filter(|p| p.arc < 0.3) {
            let img = br.grow_map(&oval, bp.point).unwrap();
            assert!(dist_to(&br.points, as_vec(&img)) < 1e-5);
        }
    }

    #[test]
    fn self_intersection_is_empty_and_symmetric_homoclinic_points_exist() {
        let oval = Oval::new(OvalSpec::fourier(1.0, &[(2, 0.05, 0.0)])).unwrap();
        let orbit = PeriodicOrbit::from_point(&oval, 1, 2, LiftedPhasePoint::new(FRAC_PI_2, FRAC_PI_2)).unwrap();
        let budget = Budget { max_arclength: 4.0, ..Default::default() };
        let u = grow_branch(&oval, &orbit, 0, BranchKind::UnstablePlus, &budget).unwrap();
        assert!(find_intersections(&oval, &u, &u, 1e-4).is_empty());
        let mut hits = Vec::new();
        for kind in [BranchKind::StablePlus, BranchKind::StableMinus] {
            for idx in 0..2 {
                let s = grow_branch(&oval, &orbit, idx, kind, &budget).unwrap();
                hits.extend(find_intersections(&oval, &u, &s, 1e-4));
            }
        }
        assert!(!hits.is_empty());
        assert!(hits.iter().all(|h| h.kind == IntersectionKind::Homoclinic));
        let on_symmetry_line: Vec<_> = hits.iter().filter(|h| (h.location.theta - FRAC_PI_2).abs() < 1e-7).collect();
        assert!(!on_symmetry_line.is_empty());
        assert!(on_symmetry_line.iter().all(|h| h.transversal));
    }

    #[test]
    fn focusing_distance_values() {
        let p = focusing_distances(1.0, FRAC_PI_2, 0.0);
        assert_eq!(p.d_plus, 1.0);
        assert_eq!(p.d_minus, 1.0);
        let p = focusing_distances(1.0, FRAC_PI_2, 0.5);
        assert!((p.d_plus - 2.0 / 3.0).abs() < 1e-15 && (p.d_minus - 2.0).abs() < 1e-15);
        let p = focusing_distances(1.0, 1.0, -1.0);
        assert!(!p.plus_finite && p.d_plus.is_infinite() && p.minus_finite);
    }

    /// Intersects two rays of a pencil leaving a circle of radius `r0`.
    fn traced_focus(r0: f64, theta0: f64, slope: f64, forward: bool) -> f64 {
        let delta = 1e-5;
        let ray = |phi: f64| {
            let theta = theta0 + slope * phi;
            let base = r0 * Vec2::new(libm::sin(phi), -libm::cos(phi));
            let dir = if forward { unit(phi + theta) } else { -unit(phi - theta) };
            (base, dir)
        };
        let (p0, d0) = ray(0.0);
        let (p1, d1) = ray(delta);
        let s = cross(&(p1 - p0), &d1) / cross(&d0, &d1);
        s
    }

    #[test]
    fn ray_traced_focus_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut done = 0;
        while done < 100 {
            let r0 = rng.random_range(0.3..3.0);
            let theta0 = rng.random_range(0.2..PI - 0.2);
            let slope: f64 = rng.random_range(-3.0..3.0);
            if (1.0 + slope).abs() <= 0.1 || (1.0 - slope).abs() <= 0.1 {
                continue;
            }
            let p = focusing_distances(r0, theta0, slope);
            assert!((traced_focus(r0, theta0, slope, true) - p.d_plus).abs() < 1e-3);
            assert!((traced_focus(r0, theta0, slope, false) - p.d_minus).abs() < 1e-3);
            done += 1;
        }
    }

    #[test]
    fn splitting_gap() {
        assert_eq!(tangency_splitting_prediction(1.0, 1.0, 0.3, 0.0), (0.3, 0.3));
        let (u, s) = tangency_splitting_prediction(1.0, 1.0, 0.0, 0.01);
        assert!((u - 0.01).abs() < 1e-15 && (s + 0.01).abs() < 1e-15);
        for slope in [-2.0, -0.5, 0.0, 0.7, 4.0] {
            let (u, s) = tangency_splitting_prediction(1.7, 1.0, slope, 1e-3);
            assert!((u - s - 2e-3 / 1.7).abs() < 1e-15);
        }
    }
}
