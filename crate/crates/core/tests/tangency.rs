use core::f64::consts::FRAC_PI_2;

use obl_core::billiard::LiftedPhasePoint;
use obl_core::genericity::split_tangency;
use obl_core::manifolds::{find_intersections, grow_branch, BranchKind, Budget, HeteroclinicPoint, IntersectionKind, ManifoldBranch};
use obl_core::math::{wrap_pi, Vec2};
use obl_core::{Oval, OvalSpec, PeriodicOrbit, PhasePoint};

fn segment_distance(branch: &ManifoldBranch, q: PhasePoint) -> f64 {
    branch
        .points
        .windows(2)
        .map(|w| {
            let a = Vec2::new(q.phi + wrap_pi(w[0].point.phi - q.phi), w[0].point.theta);
            let b = Vec2::new(a.x + (w[1].point.phi - w[0].point.phi), w[1].point.theta);
            let p = Vec2::new(q.phi, q.theta);
            let t = ((p - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
            (a + t * (b - a) - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn nearest(branch: &ManifoldBranch, q: PhasePoint) -> (usize, f64) {
    branch
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (wrap_pi(p.point.phi - q.phi)).hypot(p.point.theta - q.theta)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

#[test]
fn separatrix_splits_at_predicted_angle() {
    let oval = Oval::new(OvalSpec::ellipse(1.2, 1.0)).unwrap();
    let orbit = PeriodicOrbit::from_point(&oval, 1, 2, LiftedPhasePoint::new(FRAC_PI_2, FRAC_PI_2)).unwrap();
    let budget = Budget { max_arclength: 3.0, ..Default::default() };
    let u = grow_branch(&oval, &orbit, 0, BranchKind::UnstablePlus, &budget).unwrap();
    // a point of the separatrix half way along
    let mid = u.points.iter().find(|p| (wrap_pi(p.point.phi - core::f64::consts::PI)).abs() < 2e-3).unwrap();
    let q = mid.point.project();
    let mut best = None;
    for kind in [BranchKind::StablePlus, BranchKind::StableMinus] {
        let s = grow_branch(&oval, &orbit, 1, kind, &budget).unwrap();
        let d = segment_distance(&s, q);
        if d < 1e-6 {
            best = Some(kind);
        }
    }
    let skind = best.expect("separatrix");
    let (i, _) = nearest(&u, q);
    let d = Vec2::new(u.points[i + 1].point.phi - u.points[i - 1].point.phi, u.points[i + 1].point.theta - u.points[i - 1].point.theta).normalize();
    let tangency = HeteroclinicPoint {
        location: q,
        branches: (BranchKind::UnstablePlus, skind),
        tau: (mid.tau, 0.0),
        crossing_angle: 0.0,
        transversal: false,
        kind: IntersectionKind::Heteroclinic,
        direction_a: d,
        direction_b: d,
        periodic_points: orbit.phase_points(),
    };
    let h = 1e-3;
    let split = split_tangency(&oval, &tangency, h, None).unwrap();
    let perturbed = Oval::new(split.spec.clone()).unwrap();
    let u2 = grow_branch(&perturbed, &orbit, 0, BranchKind::UnstablePlus, &budget).unwrap();
    let s2 = grow_branch(&perturbed, &orbit, 1, skind, &budget).unwrap();
    let hits = find_intersections(&perturbed, &u2, &s2, 1e-6);
    let hit = hits
        .iter()
        .min_by(|a, b| {
            let da = wrap_pi(a.location.phi - q.phi).hypot(a.location.theta - q.theta);
            let db = wrap_pi(b.location.phi - q.phi).hypot(b.location.theta - q.theta);
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let predicted = (split.predicted_unstable_slope.atan() - split.predicted_stable_slope.atan()).abs();
    assert!((hit.crossing_angle - predicted).abs() < 0.25 * predicted);
}
