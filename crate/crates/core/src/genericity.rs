//! Local bump perturbations that break degeneracies and split tangencies.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use crate::billiard::{bounce, forward_lifted, inverse_lifted, LiftedPhasePoint, PhasePoint};
use crate::curve::{perturbed_radius_at_center, NormalBump, Oval, OvalSpec};
use crate::manifolds::{tangency_splitting_prediction, HeteroclinicPoint};
use crate::math::{circular_distance, wrap_pi};
use crate::stability::{phase_distance, sequential_scan, trace_decomposition, PeriodicOrbit};
use crate::{Error, Result};

/// Vertex whose `x` is varied to change the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SiteReport {
    pub site: usize,
    pub b: f64,
    pub c: f64,
    /// Set when every `b_k` vanished and site 0 carries the perimeter form.
    pub fallback: bool,
}

/// Smallest `k >= 1` with `|b_k| > threshold`, else site 0 with
/// `tr = (-1)^(n-1) 2 (L / x_0 - 1)`.
pub fn select_perturbation_site(orbit: &PeriodicOrbit, threshold: f64) -> SiteReport {
    let scan = sequential_scan(orbit, threshold);
    match scan.first_nonzero {
        Some(k) => {
            let (_, b, c) = scan.coefficients[k - 1];
            SiteReport { site: k, b, c, fallback: false }
        }
        None => {
            let sign = if orbit.n % 2 == 1 { 1.0 } else { -1.0 };
            SiteReport {
                site: 0,
                b: sign * 2.0 * orbit.perimeter(),
                c: -sign * 2.0,
                fallback: true,
            }
        }
    }
}

/// Outcome of a degeneracy-breaking perturbation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegeneracyBreak {
    pub spec: OvalSpec,
    pub bump: NormalBump,
    pub site: usize,
    pub b: f64,
    pub c: f64,
    pub fallback: bool,
    pub h: f64,
    pub trace_before: f64,
    /// Affine model with the exact perturbed `x`.
    pub trace_predicted: f64,
    /// Affine model with `x ~ (R - h) sin(theta)`.
    pub trace_predicted_first_order: f64,
    pub trace_measured: f64,
    pub closure_error: f64,
    pub orbit: PeriodicOrbit,
}

fn site_param(oval: &Oval, orbit: &PeriodicOrbit, i: usize) -> f64 {
    oval.param_of_angle(orbit.vertices[i].phi)
}

/// Largest `|h|` (with the sign of `sign`) keeping the perturbed curve
/// positively curved, found by bisection on validation.
fn largest_safe_h(oval: &Oval, center: f64, half_width: f64, sign: f64) -> f64 {
    let valid = |h: f64| {
        let bump = NormalBump::new(center, half_width, oval.bump_second_deriv(center, h));
        let spec = oval.spec().clone().perturbed(alloc::vec![bump]);
        Oval::with_tolerances(spec, oval.tolerances()).is_ok()
    };
    let r0 = oval.radius(oval.angle_of_param(center));
    let (mut lo, mut hi) = (0.0, 4.0 * r0);
    if valid(sign * hi) {
        return hi;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if valid(sign * mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Places a bump with `lambda'' = h` (with respect to the tangent angle)
/// at the selected vertex of a degenerate orbit and measures the new trace.
///
/// With `h = None` the sign pushes the trace away from the nearest of
/// `±2` and the magnitude is half the largest safe value, capped at
/// `1e-2`.
pub fn break_degeneracy(oval: &Oval, orbit: &PeriodicOrbit, h: Option<f64>, threshold: f64) -> Result<DegeneracyBreak> {
    let tol = oval.tolerances();
    if (orbit.trace.abs() - 2.0).abs() > tol.degeneracy {
        return Err(Error::NotDegenerate { trace: orbit.trace });
    }
    let report = select_perturbation_site(orbit, threshold);
    let site = report.site;
    let center = site_param(oval, orbit, site);
    let nearest = (0..orbit.n)
        .filter(|&j| j != site)
        .map(|j| circular_distance(site_param(oval, orbit, j), center))
        .fold(PI, f64::min);
    let half_width = (0.5 * nearest).min(0.5);
    let offending: Vec<f64> = (0..orbit.n)
        .filter(|&j| j != site)
        .map(|j| site_param(oval, orbit, j))
        .filter(|&t| circular_distance(t, center) < half_width)
        .collect();
    if !offending.is_empty() || half_width <= 0.0 {
        return Err(Error::SupportConflict { center, offending });
    }

    // d tr / dh has the sign of b; the target direction is the sign of tr.
    let dir = orbit.trace.signum() * if report.b != 0.0 { report.b.signum() } else { 1.0 };
    let h = match h {
        Some(h) => h,
        None => dir * (0.5 * largest_safe_h(oval, center, half_width, dir)).min(1e-2),
    };

    let bump = NormalBump::new(center, half_width, oval.bump_second_deriv(center, h));
    let spec = if h == 0.0 {
        oval.spec().clone()
    } else {
        oval.spec().clone().perturbed(alloc::vec![bump])
    };
    let perturbed = Oval::with_tolerances(spec.clone(), tol)?;

    let v = &orbit.vertices[site];
    let sin_t = libm::sin(v.theta);
    let x_exact = perturbed_radius_at_center(v.radius, h)? * sin_t;
    let x_first = (v.radius - h) * sin_t;
    let (b, c) = (report.b, report.c);
    let (trace_predicted, trace_predicted_first_order) = if report.fallback {
        (b / x_exact + c, b / x_first + c)
    } else {
        let dec = trace_decomposition(orbit, site, threshold)?;
        (dec.evaluate(x_exact), dec.evaluate(x_first))
    };

    let start = orbit.lifted_points()[0];
    let new_orbit = PeriodicOrbit::from_point(&perturbed, orbit.m, orbit.n, start)?;
    Ok(DegeneracyBreak {
        spec,
        bump,
        site,
        b,
        c,
        fallback: report.fallback,
        h,
        trace_before: orbit.trace,
        trace_predicted,
        trace_predicted_first_order,
        trace_measured: new_orbit.trace,
        closure_error: new_orbit.closure_error,
        orbit: new_orbit,
    })
}

/// Outcome of a tangency-splitting perturbation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TangencySplit {
    pub spec: OvalSpec,
    pub bump: NormalBump,
    pub h: f64,
    pub r0: f64,
    pub theta0: f64,
    pub slope: f64,
    pub predicted_unstable_slope: f64,
    pub predicted_stable_slope: f64,
    /// Tangent angles of the other bounces of the tangent trajectory.
    pub footprints: Vec<f64>,
}

impl TangencySplit {
    pub fn predicted_gap(&self) -> f64 {
        self.predicted_unstable_slope - self.predicted_stable_slope
    }
}

/// Tangent angles visited by the trajectory through `q`, excluding `q`
/// itself, until it settles within `1e-7` of a periodic point.
pub fn trajectory_footprints(oval: &Oval, q: PhasePoint, periodic: &[PhasePoint], max_steps: usize) -> Vec<f64> {
    let settled = |p: LiftedPhasePoint| {
        periodic
            .iter()
            .any(|c| libm::hypot(wrap_pi(p.phi - c.phi), p.theta - c.theta) < 1e-7)
    };
    let mut out = Vec::new();
    for forward in [true, false] {
        let mut p = q.lift();
        for _ in 0..max_steps {
            let next = if forward { forward_lifted(oval, p) } else { inverse_lifted(oval, p) };
            let Ok(next) = next else { break };
            p = next;
            out.push(p.project().phi);
            if settled(p) {
                break;
            }
        }
    }
    out
}

/// Bends the boundary at the bounce of a tangential intersection so that
/// the two branches cross there at a nonzero angle.
///
/// The support must avoid every periodic vertex and every other bounce of
/// the trajectory; with `half_width = None` it is chosen as half the
/// distance to the nearest such point, at most `0.3`.
pub fn split_tangency(
    oval: &Oval,
    tangency: &HeteroclinicPoint,
    h: f64,
    half_width: Option<f64>,
) -> Result<TangencySplit> {
    if tangency.transversal {
        return Err(Error::InvalidInput("intersection is already transversal".into()));
    }
    let q = tangency.location;
    let center = oval.param_of_angle(q.phi);
    let mut footprints = trajectory_footprints(oval, q, &tangency.periodic_points, 400);
    footprints.extend(tangency.periodic_points.iter().map(|p| p.phi));
    let params: Vec<f64> = footprints.iter().map(|&phi| oval.param_of_angle(phi)).collect();
    let nearest = params.iter().map(|&t| circular_distance(t, center)).fold(PI, f64::min);
    let width = half_width.unwrap_or((0.5 * nearest).min(0.3));
    let offending: Vec<f64> = footprints
        .iter()
        .zip(&params)
        .filter(|(_, &t)| circular_distance(t, center) < width)
        .map(|(&phi, _)| phi)
        .collect();
    if !offending.is_empty() || width < 1e-4 {
        return Err(Error::SupportConflict { center, offending });
    }
    let bump = NormalBump::new(center, width, oval.bump_second_deriv(center, h));
    let spec = if h == 0.0 {
        oval.spec().clone()
    } else {
        oval.spec().clone().perturbed(alloc::vec![bump])
    };
    Oval::with_tolerances(spec.clone(), oval.tolerances())?;
    let r0 = oval.radius(q.phi);
    let slope = 0.5 * (tangency.direction_a.y / tangency.direction_a.x + tangency.direction_b.y / tangency.direction_b.x);
    let (su, ss) = tangency_splitting_prediction(r0, q.theta, slope, h);
    Ok(TangencySplit {
        spec,
        bump,
        h,
        r0,
        theta0: q.theta,
        slope,
        predicted_unstable_slope: su,
        predicted_stable_slope: ss,
        footprints,
    })
}

/// Sup over a `grid x grid` phase lattice of the image distance plus the
/// largest tangent-map entry difference.
pub fn c1_distance(a: &Oval, b: &Oval, grid: usize) -> f64 {
    let mut sup = 0.0f64;
    for i in 0..grid {
        let phi = TAU * (i as f64 + 0.5) / grid as f64;
        for j in 0..grid {
            let theta = PI * (0.05 + 0.9 * (j as f64 + 0.5) / grid as f64);
            let p = LiftedPhasePoint::new(phi, theta);
            let (Ok(ba), Ok(bb)) = (bounce(a, p), bounce(b, p)) else {
                continue;
            };
            let image = phase_distance(ba.to, bb.to);
            let diff = ba.tangent_map().matrix - bb.tangent_map().matrix;
            let entry = diff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            sup = sup.max(image + entry);
        }
    }
    sup
}
