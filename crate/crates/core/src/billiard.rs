//! The billiard map, its inverse, its lift and its tangent map.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::curve::Oval;
use crate::math::{cross, perp, unit, wrap_tau, Mat2, Vec2};
use crate::{Error, Result};

/// A point of the open phase cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhasePoint {
    pub phi: f64,
    pub theta: f64,
}

impl PhasePoint {
    /// Reduces `phi` modulo 2pi; `theta` is not checked here.
    pub fn new(phi: f64, theta: f64) -> Self {
        Self {
            phi: wrap_tau(phi),
            theta,
        }
    }

    /// The reversing symmetry `(phi, theta) -> (phi, pi - theta)`.
    pub fn reversed(&self) -> Self {
        Self {
            phi: self.phi,
            theta: PI - self.theta,
        }
    }

    pub fn lift(&self) -> LiftedPhasePoint {
        LiftedPhasePoint {
            phi: self.phi,
            theta: self.theta,
        }
    }
}

/// A point on the universal cover, with an unreduced boundary angle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LiftedPhasePoint {
    pub phi: f64,
    pub theta: f64,
}

impl LiftedPhasePoint {
    pub fn new(phi: f64, theta: f64) -> Self {
        Self { phi, theta }
    }

    pub fn project(&self) -> PhasePoint {
        PhasePoint::new(self.phi, self.theta)
    }

    pub fn reversed(&self) -> Self {
        Self {
            phi: self.phi,
            theta: PI - self.theta,
        }
    }
}

/// Linearization of one bounce, in `(d phi, d theta)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentMap {
    pub matrix: Mat2,
    /// `R(phi0) sin(theta0)`.
    pub x0: f64,
    /// `R(phi1) sin(theta1)`.
    pub x1: f64,
    /// Chord length.
    pub chord: f64,
}

impl TangentMap {
    /// `(1/x1) [[l - x0, l], [l - x0 - x1, l - x1]]`.
    pub fn from_chord(x0: f64, x1: f64, chord: f64) -> Self {
        let l = chord;
        let matrix = Mat2::new(l - x0, l, l - x0 - x1, l - x1) / x1;
        Self { matrix, x0, x1, chord }
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }
}

/// Everything known about one forward bounce.
#[derive(Debug, Clone, Copy)]
pub struct Bounce {
    pub from: LiftedPhasePoint,
    pub to: LiftedPhasePoint,
    pub start: Vec2,
    pub end: Vec2,
    pub radius_from: f64,
    pub radius_to: f64,
}

impl Bounce {
    pub fn chord(&self) -> f64 {
        (self.end - self.start).norm()
    }

    pub fn tangent_map(&self) -> TangentMap {
        TangentMap::from_chord(
            self.radius_from * libm::sin(self.from.theta),
            self.radius_to * libm::sin(self.to.theta),
            self.chord(),
        )
    }
}

fn admissible(oval: &Oval, theta: f64) -> Result<f64> {
    let tol = oval.tolerances();
    if !theta.is_finite() || theta <= tol.theta_reject || theta >= PI - tol.theta_reject {
        return Err(Error::BoundaryAngle { theta });
    }
    Ok(theta.clamp(tol.theta_margin, PI - tol.theta_margin))
}

/// One forward bounce from a lifted point; the returned lift increment lies
/// in `(0, 2pi)`.
pub fn bounce(oval: &Oval, p: LiftedPhasePoint) -> Result<Bounce> {
    let theta = admissible(oval, p.theta)?;
    let tol = oval.tolerances();
    // Solve on the reduced angle so that the root tolerance stays
    // meaningful far up the lift.
    let turns = TAU * libm::floor(p.phi / TAU);
    let phi0 = p.phi - turns;
    let t0 = oval.param_of_angle(phi0);
    let f0 = oval.frame(t0);
    let tangent = unit(phi0);
    let dir = libm::cos(theta) * tangent + libm::sin(theta) * perp(&tangent);

    // Signed angle from the ray to the chord, increasing from -theta to
    // pi - theta on (t0, t0 + 2pi).
    let signed = |t: f64| -> (f64, f64, Vec2, Vec2) {
        let (pos, vel) = oval.pos_vel(t);
        let c = pos - f0.pos;
        let h = libm::atan2(cross(&dir, &c), dir.dot(&c));
        let dh = cross(&c, &vel) / c.norm_squared();
        (h, dh, pos, c)
    };

    let (mut lo, mut hi) = (t0, t0 + TAU);
    let mut t = if oval.is_angle_parameterized() {
        t0 + 2.0 * theta
    } else {
        oval.param_of_angle(phi0 + 2.0 * theta)
    };
    if !(t > lo && t < hi) {
        t = 0.5 * (lo + hi);
    }
    let mut converged = false;
    for _ in 0..tol.max_root_iterations {
        let (h, dh, _, _) = signed(t);
        if h == 0.0 {
            converged = true;
            break;
        }
        let newton = h / dh;
        if newton.abs() < tol.root {
            t -= newton;
            converged = true;
            break;
        }
        if h < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let mut next = t - newton;
        if !(next > lo && next < hi) || !dh.is_finite() {
            next = 0.5 * (lo + hi);
        }
        t = next;
        if hi - lo < tol.root {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NextImpact {
            phi: p.phi,
            theta,
            detail: "root iteration limit reached",
        });
    }
    let f1 = oval.frame(t);
    let chord = f1.pos - f0.pos;
    let t1 = f1.tangent();
    let theta1 = libm::atan2(cross(&chord, &t1), chord.dot(&t1));
    let mut phi1 = oval.angle_of_param(t);
    if oval.is_angle_parameterized() {
        phi1 = t;
    }
    if !(phi1 > phi0 && phi1 < phi0 + TAU) || !(theta1 > 0.0 && theta1 < PI) {
        return Err(Error::NextImpact {
            phi: p.phi,
            theta,
            detail: "impact outside the admissible range",
        });
    }
    let theta1 = theta1.clamp(tol.theta_margin, PI - tol.theta_margin);
    Ok(Bounce {
        from: LiftedPhasePoint::new(p.phi, theta),
        to: LiftedPhasePoint::new(phi1 + turns, theta1),
        start: f0.pos,
        end: f1.pos,
        radius_from: f0.radius(),
        radius_to: f1.radius(),
    })
}

pub fn forward_lifted(oval: &Oval, p: LiftedPhasePoint) -> Result<LiftedPhasePoint> {
    Ok(bounce(oval, p)?.to)
}

/// The preimage, with lift increment in `(-2pi, 0)`.
pub fn inverse_lifted(oval: &Oval, p: LiftedPhasePoint) -> Result<LiftedPhasePoint> {
    let image = bounce(oval, p.reversed())?.to;
    Ok(LiftedPhasePoint::new(image.phi - TAU, PI - image.theta))
}

pub fn forward_map(oval: &Oval, p: PhasePoint) -> Result<PhasePoint> {
    Ok(forward_lifted(oval, p.lift())?.project())
}

pub fn inverse_map(oval: &Oval, p: PhasePoint) -> Result<PhasePoint> {
    Ok(inverse_lifted(oval, p.lift())?.project())
}

pub fn tangent_map(oval: &Oval, p: PhasePoint) -> Result<TangentMap> {
    Ok(bounce(oval, p.lift())?.tangent_map())
}

/// Tangent map of the inverse at `p`, the inverse of the forward tangent map
/// at the preimage.
pub fn inverse_tangent_map(oval: &Oval, p: LiftedPhasePoint) -> Result<Mat2> {
    let pre = inverse_lifted(oval, p)?;
    let m = bounce(oval, pre)?.tangent_map().matrix;
    m.try_inverse().ok_or(Error::NextImpact {
        phi: p.phi,
        theta: p.theta,
        detail: "singular tangent map",
    })
}

/// Orbit of `p` under `T^sign(n)`, `|n| + 1` points including `p`.
pub fn iterate(oval: &Oval, p: LiftedPhasePoint, n: i64) -> Result<Vec<LiftedPhasePoint>> {
    let mut out = Vec::with_capacity(n.unsigned_abs() as usize + 1);
    out.push(p);
    let mut q = p;
    for k in 1..=n.unsigned_abs() {
        q = if n > 0 {
            forward_lifted(oval, q)
        } else {
            inverse_lifted(oval, q)
        }
        .map_err(|e| e.at_step(if n > 0 { k as i64 } else { -(k as i64) }))?;
        out.push(q);
    }
    Ok(out)
}

/// Density `R(phi) sin(theta)` of the invariant measure in `(phi, theta)`.
pub fn measure_weight(oval: &Oval, p: PhasePoint) -> f64 {
    oval.radius(p.phi) * libm::sin(p.theta)
}

/// Invariant-measure masses of a phase box and of its image.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasureCheck {
    pub box_mass: f64,
    pub image_mass: f64,
    pub samples: usize,
}

impl MeasureCheck {
    pub fn relative_error(&self) -> f64 {
        (self.image_mass - self.box_mass).abs() / self.box_mass
    }
}

/// Stratified Monte-Carlo estimate of `mu(B)` and `mu(T(B))` for the box
/// `B = phi_range x theta_range`, with roughly `samples` jittered points
/// for each integral. The image mass integrates the weight over a box
/// containing `T(B)`, counting points whose preimage lies in `B`.
pub fn measure_check<R: rand::Rng>(
    oval: &Oval,
    phi_range: (f64, f64),
    theta_range: (f64, f64),
    samples: usize,
    rng: &mut R,
) -> Result<MeasureCheck> {
    let k = (libm::sqrt(samples as f64) as usize).max(2);
    let stratified = |rng: &mut R, (x0, x1): (f64, f64), (y0, y1): (f64, f64), f: &mut dyn FnMut(f64, f64) -> Result<f64>| -> Result<f64> {
        let (hx, hy) = ((x1 - x0) / k as f64, (y1 - y0) / k as f64);
        let mut sum = 0.0;
        for i in 0..k {
            for j in 0..k {
                let x = x0 + (i as f64 + rng.random::<f64>()) * hx;
                let y = y0 + (j as f64 + rng.random::<f64>()) * hy;
                sum += f(x, y)?;
            }
        }
        Ok(sum * hx * hy)
    };
    let box_mass = stratified(rng, phi_range, theta_range, &mut |phi, theta| {
        Ok(measure_weight(oval, PhasePoint::new(phi, theta)))
    })?;

    // Bounding box of the image from the image of the boundary.
    let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    let edge = 4 * k;
    for e in 0..edge {
        let s = e as f64 / edge as f64;
        let (p0, p1) = (phi_range.0 + s * (phi_range.1 - phi_range.0), theta_range.0 + s * (theta_range.1 - theta_range.0));
        for q in [
            LiftedPhasePoint::new(p0, theta_range.0),
            LiftedPhasePoint::new(p0, theta_range.1),
            LiftedPhasePoint::new(phi_range.0, p1),
            LiftedPhasePoint::new(phi_range.1, p1),
        ] {
            let img = forward_lifted(oval, q)?;
            lo = lo.inf(&Vec2::new(img.phi, img.theta));
            hi = hi.sup(&Vec2::new(img.phi, img.theta));
        }
    }
    let margin = 0.02 * ((hi.x - lo.x) + (hi.y - lo.y));
    let image_phi = (lo.x - margin, hi.x + margin);
    let image_theta = ((lo.y - margin).max(1e-9), (hi.y + margin).min(PI - 1e-9));
    let image_mass = stratified(rng, image_phi, image_theta, &mut |phi, theta| {
        let pre = inverse_lifted(oval, LiftedPhasePoint::new(phi, theta))?;
        let inside = pre.phi >= phi_range.0 && pre.phi < phi_range.1 && pre.theta >= theta_range.0 && pre.theta < theta_range.1;
        Ok(if inside { measure_weight(oval, PhasePoint::new(phi, theta)) } else { 0.0 })
    })?;
    Ok(MeasureCheck {
        box_mass,
        image_mass,
        samples: k * k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::OvalSpec;
    use crate::math::wrap_pi;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ovals() -> Vec<Oval> {
        [
            OvalSpec::circle(1.0),
            OvalSpec::ellipse(2.0, 1.0),
            OvalSpec::fourier(1.0, &[(3, 0.1, 0.0)]),
            OvalSpec::fourier(1.0, &[(2, 0.06, 0.0), (3, 0.0, 0.04)]),
            OvalSpec::ellipse(1.4, 1.0).perturbed(alloc::vec![crate::NormalBump::new(0.5, 0.4, 0.05)]),
        ]
        .into_iter()
        .map(|s| Oval::new(s).unwrap())
        .collect()
    }

    #[test]
    fn circle_rotates_rigidly() {
        let oval = Oval::new(OvalSpec::circle(1.0)).unwrap();
        let q = forward_map(&oval, PhasePoint::new(0.3, 0.7)).unwrap();
        assert!((q.phi - 1.7).abs() < 1e-12 && (q.theta - 0.7).abs() < 1e-12);
        let r = inverse_map(&oval, PhasePoint::new(0.3, 0.7)).unwrap();
        assert!((wrap_pi(r.phi - (0.3 - 1.4))).abs() < 1e-12);
        let mut p = PhasePoint::new(0.0, PI / 3.0);
        for _ in 0..3 {
            p = forward_map(&oval, p).unwrap();
        }
        assert!(wrap_pi(p.phi).abs() < 1e-12 && (p.theta - PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ellipse_axis_bounces() {
        let oval = Oval::new(OvalSpec::ellipse(2.0, 1.0)).unwrap();
        // vertex (2, 0) has tangent angle pi/2
        let q = forward_map(&oval, PhasePoint::new(PI / 2.0, PI / 2.0)).unwrap();
        assert!((q.phi - 1.5 * PI).abs() < 1e-12 && (q.theta - PI / 2.0).abs() < 1e-12);
        assert!((oval.position(q.phi) - Vec2::new(-2.0, 0.0)).norm() < 1e-12);
        // minor axis: (0, 1) has tangent angle pi
        let r = inverse_map(&oval, PhasePoint::new(PI, PI / 2.0)).unwrap();
        assert!(r.phi.abs() < 1e-12 || (r.phi - TAU).abs() < 1e-12);
        assert!((oval.position(r.phi) - Vec2::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn circle_jacobian_is_a_shear() {
        let oval = Oval::new(OvalSpec::circle(1.0)).unwrap();
        let m = tangent_map(&oval, PhasePoint::new(1.0, 0.8)).unwrap().matrix;
        assert!((m - Mat2::new(1.0, 2.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn ellipse_major_axis_jacobian() {
        let oval = Oval::new(OvalSpec::ellipse(2.0, 1.0)).unwrap();
        let tm = tangent_map(&oval, PhasePoint::new(PI / 2.0, PI / 2.0)).unwrap();
        assert!((tm.x0 - 0.5).abs() < 1e-12 && (tm.x1 - 0.5).abs() < 1e-12);
        assert!((tm.chord - 4.0).abs() < 1e-12);
        assert!((tm.matrix - Mat2::new(7.0, 8.0, 6.0, 7.0)).norm() < 1e-10);
    }

    #[test]
    fn jacobian_matches_finite_differences_and_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for oval in ovals() {
            for _ in 0..40 {
                let p = PhasePoint::new(rng.random_range(0.0..TAU), rng.random_range(0.2..PI - 0.2));
                let tm = tangent_map(&oval, p).unwrap();
                let h = 1e-6;
                let f = |q: LiftedPhasePoint| forward_lifted(&oval, q).unwrap();
                let dp = f(LiftedPhasePoint::new(p.phi + h, p.theta));
                let dm = f(LiftedPhasePoint::new(p.phi - h, p.theta));
                let tp = f(LiftedPhasePoint::new(p.phi, p.theta + h));
                let tmn = f(LiftedPhasePoint::new(p.phi, p.theta - h));
                let fd = Mat2::new(
                    (dp.phi - dm.phi) / (2.0 * h),
                    (tp.phi - tmn.phi) / (2.0 * h),
                    (dp.theta - dm.theta) / (2.0 * h),
                    (tp.theta - tmn.theta) / (2.0 * h),
                );
                let scale = tm.matrix.abs().max().max(1.0);
                assert!((fd - tm.matrix).abs().max() < 1e-5 * scale, "{p:?}\n{fd}\n{}", tm.matrix);
                assert!((tm.determinant() - tm.x0 / tm.x1).abs() < 1e-10);
                assert!(tm.matrix[(0, 1)] > 0.0);
                let q = forward_map(&oval, p).unwrap();
                assert!(((oval.position(q.phi) - oval.position(p.phi)).norm() - tm.chord).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reversibility_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for oval in ovals() {
            for _ in 0..100 {
                let p = PhasePoint::new(rng.random_range(0.0..TAU), rng.random_range(0.05..PI - 0.05));
                let q = forward_map(&oval, p).unwrap();
                let back = inverse_map(&oval, q).unwrap();
                assert!(wrap_pi(back.phi - p.phi).abs() < 1e-9 && (back.theta - p.theta).abs() < 1e-9);
                let a = forward_map(&oval, p.reversed()).unwrap();
                let b = inverse_map(&oval, p).unwrap().reversed();
                assert!(wrap_pi(a.phi - b.phi).abs() < 1e-9 && (a.theta - b.theta).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn boundary_angles_are_rejected() {
        let oval = Oval::new(OvalSpec::circle(1.0)).unwrap();
        assert!(matches!(forward_map(&oval, PhasePoint::new(0.0, 0.0)), Err(Error::BoundaryAngle { .. })));
        assert!(matches!(forward_map(&oval, PhasePoint::new(0.0, PI)), Err(Error::BoundaryAngle { .. })));
        assert!(forward_map(&oval, PhasePoint::new(0.0, 1e-6)).is_ok());
    }

    #[test]
    fn lifted_iteration() {
        let oval = Oval::new(OvalSpec::circle(1.0)).unwrap();
        let orbit = iterate(&oval, LiftedPhasePoint::new(0.0, PI / 2.0), 4).unwrap();
        for (k, q) in orbit.iter().enumerate() {
            assert!((q.phi - k as f64 * PI).abs() < 1e-12);
        }
        assert_eq!(iterate(&oval, LiftedPhasePoint::new(0.1, 0.2), 0).unwrap().len(), 1);

        let oval = Oval::new(OvalSpec::fourier(1.0, &[(3, 0.1, 0.0), (2, 0.0, 0.03)])).unwrap();
        let start = LiftedPhasePoint::new(0.4, 1.1);
        let fwd = iterate(&oval, start, 100).unwrap();
        for w in fwd.windows(2) {
            let d = w[1].phi - w[0].phi;
            assert!(d > 0.0 && d < TAU);
        }
        let back = iterate(&oval, *fwd.last().unwrap(), -100).unwrap();
        let end = back.last().unwrap();
        assert!((end.phi - start.phi).abs() < 1e-8 && (end.theta - start.theta).abs() < 1e-8);
    }

    #[test]
    fn measure_weight_values() {
        let oval = Oval::new(OvalSpec::circle(1.0)).unwrap();
        assert!((measure_weight(&oval, PhasePoint::new(0.3, PI / 2.0)) - 1.0).abs() < 1e-15);
        assert!(measure_weight(&oval, PhasePoint::new(0.3, 1e-8)) < 1e-7);
    }

    #[test]
    fn box_and_image_have_equal_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for oval in ovals() {
            let c = measure_check(&oval, (0.5, 1.1), (0.8, 1.6), 250_000, &mut rng).unwrap();
            assert!(c.relative_error() < 5e-3, "{c:?}");
        }
    }
}
