//! Ovals: closed, convex, positively curved C² curves.
//!
//! Every curve has a native parameter `t` (the tangent angle for Fourier
//! specs, the eccentric angle for ellipses, and the base curve's parameter
//! for perturbed specs) and is also addressable by its tangent angle `phi`,
//! which is the boundary coordinate of the billiard phase space.
//!
//! Orientation is counterclockwise and the normal field is the inward unit
//! normal, so that `d tangent / d phi = normal`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::config::Tolerances;
use crate::math::{angle_between, circular_distance, cross, perp, wrap_pi, wrap_tau, Vec2};
use crate::quadrature::CompositeRule;
use crate::{Error, Result};

/// One term `a cos(k phi) + b sin(k phi)` of a radius-of-curvature series.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Harmonic {
    pub k: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub a: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub b: f64,
}

/// A C² normal displacement `lambda(t) = (h/2) s² B(s/delta)`, `s = t - center`,
/// supported on `(center - delta, center + delta)`.
///
/// `B(u) = (1 - u²)³ (1 + 3u²)` has `B(0) = 1`, `B'(0) = B''(0) = 0` and a
/// triple zero at `u = ±1`, so `lambda(center) = lambda'(center) = 0`,
/// `lambda''(center) = h`, and the displacement is C² across the support
/// boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalBump {
    pub center: f64,
    pub half_width: f64,
    pub second_deriv: f64,
}

impl NormalBump {
    pub fn new(center: f64, half_width: f64, second_deriv: f64) -> Self {
        Self {
            center,
            half_width,
            second_deriv,
        }
    }

    /// `(lambda, lambda', lambda'')` at parameter `t`.
    pub fn displacement(&self, t: f64) -> (f64, f64, f64) {
        let s = wrap_pi(t - self.center);
        let delta = self.half_width;
        if s.abs() >= delta {
            return (0.0, 0.0, 0.0);
        }
        let u = s / delta;
        let q = 1.0 - u * u;
        let b0 = q * q * q * (1.0 + 3.0 * u * u);
        let b1 = -24.0 * u * u * u * q * q;
        let b2 = 24.0 * u * u * q * (7.0 * u * u - 3.0);
        let half_h = 0.5 * self.second_deriv;
        let g0 = s * s * b0;
        let g1 = 2.0 * s * b0 + s * s * b1 / delta;
        let g2 = 2.0 * b0 + 4.0 * s * b1 / delta + s * s * b2 / (delta * delta);
        (half_h * g0, half_h * g1, half_h * g2)
    }

    /// True when `t` lies in the open support.
    pub fn contains(&self, t: f64) -> bool {
        circular_distance(t, self.center) < self.half_width
    }

    fn overlaps(&self, other: &NormalBump) -> bool {
        circular_distance(self.center, other.center) < self.half_width + other.half_width
    }
}

/// Free-function form of [`NormalBump::displacement`].
pub fn bump_displacement(bump: &NormalBump, t: f64) -> (f64, f64, f64) {
    bump.displacement(t)
}

/// A curve description as it appears in files.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum OvalSpec {
    /// Radius of curvature `a0 + sum (a_k cos k phi + b_k sin k phi)` as a
    /// function of the tangent angle.
    Fourier {
        a0: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        harmonics: Vec<Harmonic>,
    },
    /// `(a cos t, b sin t)` with `0 < b <= a`.
    Ellipse { a: f64, b: f64 },
    /// `base + (sum of bumps) * inward normal`.
    Perturbed {
        base: Box<OvalSpec>,
        bumps: Vec<NormalBump>,
    },
}

impl OvalSpec {
    pub fn circle(radius: f64) -> Self {
        OvalSpec::Fourier {
            a0: radius,
            harmonics: Vec::new(),
        }
    }

    /// Fourier spec from `(k, a_k, b_k)` triples.
    pub fn fourier(a0: f64, harmonics: &[(u32, f64, f64)]) -> Self {
        OvalSpec::Fourier {
            a0,
            harmonics: harmonics.iter().map(|&(k, a, b)| Harmonic { k, a, b }).collect(),
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        OvalSpec::Ellipse { a, b }
    }

    pub fn perturbed(self, bumps: Vec<NormalBump>) -> Self {
        OvalSpec::Perturbed {
            base: Box::new(self),
            bumps,
        }
    }
}

/// Geometry of the curve at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    /// Native parameter, reduced to `[0, 2pi)`.
    pub param: f64,
    pub position: Vec2,
    pub tangent: Vec2,
    pub inward_normal: Vec2,
    /// Tangent angle in `[0, 2pi)`.
    pub tangent_angle: f64,
    pub radius: f64,
}

/// Position and first two derivatives with respect to the native parameter.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub pos: Vec2,
    pub vel: Vec2,
    pub acc: Vec2,
}

impl Frame {
    pub fn curvature(&self) -> f64 {
        let speed = self.vel.norm();
        cross(&self.vel, &self.acc) / (speed * speed * speed)
    }

    pub fn radius(&self) -> f64 {
        1.0 / self.curvature()
    }

    pub fn tangent(&self) -> Vec2 {
        self.vel.normalize()
    }

    /// `d phi / d t`.
    pub fn angle_rate(&self) -> f64 {
        cross(&self.vel, &self.acc) / self.vel.norm_squared()
    }
}

#[derive(Debug, Clone, Copy)]
struct Jet {
    pos: Vec2,
    d1: Vec2,
    d2: Vec2,
    d3: Vec2,
}

#[derive(Debug, Clone)]
enum Base {
    Fourier { a0: f64, harmonics: Vec<Harmonic> },
    Ellipse { a: f64, b: f64 },
}

impl Base {
    /// `(R, R', R'')` of a Fourier series at `t`.
    fn series(a0: f64, harmonics: &[Harmonic], t: f64) -> (f64, f64, f64) {
        let (mut r, mut dr, mut ddr) = (a0, 0.0, 0.0);
        for h in harmonics {
            let k = h.k as f64;
            let (s, c) = libm::sincos(k * t);
            let v = h.a * c + h.b * s;
            r += v;
            dr += k * (h.b * c - h.a * s);
            ddr -= k * k * v;
        }
        (r, dr, ddr)
    }

    fn fourier_position(a0: f64, harmonics: &[Harmonic], t: f64) -> Vec2 {
        let (s1, c1) = libm::sincos(t);
        let mut x = a0 * s1;
        let mut y = a0 * (1.0 - c1);
        for h in harmonics {
            let k = h.k as f64;
            let (km, kp) = (k - 1.0, k + 1.0);
            let (sm, cm) = libm::sincos(km * t);
            let (sp, cp) = libm::sincos(kp * t);
            // Antiderivatives of cos(kt) cos t, sin(kt) cos t, cos(kt) sin t,
            // sin(kt) sin t, taken from zero.
            let cc = 0.5 * (sm / km + sp / kp);
            let sc = -0.5 * (cp / kp + cm / km) + 0.5 * (1.0 / kp + 1.0 / km);
            let cs = 0.5 * (cm / km - cp / kp) - 0.5 * (1.0 / km - 1.0 / kp);
            let ss = 0.5 * (sm / km - sp / kp);
            x += h.a * cc + h.b * sc;
            y += h.a * cs + h.b * ss;
        }
        Vec2::new(x, y)
    }

    fn jet(&self, t: f64) -> Jet {
        match self {
            Base::Fourier { a0, harmonics } => {
                let (r, dr, ddr) = Self::series(*a0, harmonics, t);
                let (s, c) = libm::sincos(t);
                let tan = Vec2::new(c, s);
                let nor = Vec2::new(-s, c);
                Jet {
                    pos: Self::fourier_position(*a0, harmonics, t),
                    d1: r * tan,
                    d2: dr * tan + r * nor,
                    d3: (ddr - r) * tan + 2.0 * dr * nor,
                }
            }
            Base::Ellipse { a, b } => {
                let (s, c) = libm::sincos(t);
                Jet {
                    pos: Vec2::new(a * c, b * s),
                    d1: Vec2::new(-a * s, b * c),
                    d2: Vec2::new(-a * c, -b * s),
                    d3: Vec2::new(a * s, -b * c),
                }
            }
        }
    }

    fn pos_vel(&self, t: f64) -> (Vec2, Vec2) {
        match self {
            Base::Fourier { a0, harmonics } => {
                let (r, _, _) = Self::series(*a0, harmonics, t);
                (Self::fourier_position(*a0, harmonics, t), r * crate::math::unit(t))
            }
            Base::Ellipse { a, b } => {
                let (s, c) = libm::sincos(t);
                (Vec2::new(a * c, b * s), Vec2::new(-a * s, b * c))
            }
        }
    }

    /// Continuous tangent angle, `angle(t + 2pi) = angle(t) + 2pi`.
    fn angle(&self, t: f64) -> f64 {
        match self {
            Base::Fourier { .. } => t,
            Base::Ellipse { a, b } => {
                let (s, c) = libm::sincos(t);
                t + FRAC_PI_2 + libm::atan((a - b) * s * c / (a * s * s + b * c * c))
            }
        }
    }

    /// Parameter whose continuous tangent angle equals `phi`.
    fn param_of_angle(&self, phi: f64) -> f64 {
        match self {
            Base::Fourier { .. } => phi,
            Base::Ellipse { a, b } => {
                let (s, c) = libm::sincos(phi);
                let t = libm::atan2(-b * c, a * s);
                let turns = libm::round((phi - self.angle(t)) / TAU);
                t + turns * TAU
            }
        }
    }
}

/// A validated curve ready for evaluation.
#[derive(Debug, Clone)]
pub struct Oval {
    spec: OvalSpec,
    base: Base,
    bumps: Vec<NormalBump>,
    tol: Tolerances,
}

impl Oval {
    /// Validates `spec` with the default tolerances.
    pub fn new(spec: OvalSpec) -> Result<Self> {
        Self::with_tolerances(spec, &Tolerances::default())
    }

    pub fn with_tolerances(spec: OvalSpec, tol: &Tolerances) -> Result<Self> {
        let (base, bumps) = flatten(&spec, tol)?;
        let oval = Oval {
            spec,
            base,
            bumps,
            tol: *tol,
        };
        oval.check_curvature(tol.curvature_grid.max(4096))?;
        Ok(oval)
    }

    pub fn spec(&self) -> &OvalSpec {
        &self.spec
    }

    /// Tolerances the curve was validated with; every map evaluation on
    /// this curve uses them.
    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// All bumps after flattening nested perturbations.
    pub fn bumps(&self) -> &[NormalBump] {
        &self.bumps
    }

    /// True when the native parameter coincides with the tangent angle.
    pub fn is_angle_parameterized(&self) -> bool {
        matches!(self.base, Base::Fourier { .. }) && self.bumps.is_empty()
    }

    fn bump_sum(&self, t: f64) -> (f64, f64, f64) {
        self.bumps.iter().fold((0.0, 0.0, 0.0), |acc, b| {
            let (l0, l1, l2) = b.displacement(t);
            (acc.0 + l0, acc.1 + l1, acc.2 + l2)
        })
    }

    fn in_support(&self, t: f64) -> bool {
        self.bumps.iter().any(|b| b.contains(t))
    }

    pub(crate) fn frame(&self, t: f64) -> Frame {
        let jet = self.base.jet(t);
        if !self.in_support(t) {
            return Frame {
                pos: jet.pos,
                vel: jet.d1,
                acc: jet.d2,
            };
        }
        let (l0, l1, l2) = self.bump_sum(t);
        let v2 = jet.d1.norm_squared();
        let tan = jet.d1 / libm::sqrt(v2);
        let nor = perp(&tan);
        let c12 = cross(&jet.d1, &jet.d2);
        let w = c12 / v2;
        let dw = (cross(&jet.d1, &jet.d3) * v2 - 2.0 * c12 * jet.d1.dot(&jet.d2)) / (v2 * v2);
        Frame {
            pos: jet.pos + l0 * nor,
            vel: jet.d1 + l1 * nor - l0 * w * tan,
            acc: jet.d2 + l2 * nor - 2.0 * l1 * w * tan - l0 * (dw * tan + w * w * nor),
        }
    }

    /// Position and velocity only; the hot path of the billiard map.
    pub(crate) fn pos_vel(&self, t: f64) -> (Vec2, Vec2) {
        if self.bumps.is_empty() || !self.in_support(t) {
            return self.base.pos_vel(t);
        }
        let f = self.frame(t);
        (f.pos, f.vel)
    }

    /// Continuous tangent angle at native parameter `t`.
    pub fn angle_of_param(&self, t: f64) -> f64 {
        let base = self.base.angle(t);
        if !self.in_support(t) {
            return base;
        }
        let jet = self.base.jet(t);
        base + angle_between(&jet.d1, &self.frame(t).vel)
    }

    /// Native parameter whose continuous tangent angle equals `phi`.
    /// `d phi / d t` at native parameter `t`.
    pub fn angle_rate(&self, t: f64) -> f64 {
        self.frame(t).angle_rate()
    }

    /// Native-parameter second derivative of a bump at `t` whose second
    /// derivative with respect to the tangent angle is `h`.
    pub fn bump_second_deriv(&self, t: f64, h: f64) -> f64 {
        let rate = self.angle_rate(t);
        h * rate * rate
    }

    pub fn param_of_angle(&self, phi: f64) -> f64 {
        let t0 = self.base.param_of_angle(phi);
        if !self.in_support(t0) && !self.bumps.iter().any(|b| circular_distance(t0, b.center) <= b.half_width + 0.5) {
            return t0;
        }
        self.invert_angle(phi, t0)
    }

    fn invert_angle(&self, phi: f64, guess: f64) -> f64 {
        let f = |t: f64| self.angle_of_param(t) - phi;
        let (mut lo, mut hi) = (guess - 0.25, guess + 0.25);
        while f(lo) > 0.0 {
            lo -= 0.25;
        }
        while f(hi) < 0.0 {
            hi += 0.25;
        }
        let mut t = guess.clamp(lo, hi);
        for _ in 0..100 {
            let val = f(t);
            if val == 0.0 {
                return t;
            }
            let newton = val / self.frame(t).angle_rate();
            if newton.abs() < 1e-13 {
                return t - newton;
            }
            if val < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - newton;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            t = next;
            if hi - lo < 1e-15 * (1.0 + t.abs()) {
                break;
            }
        }
        t
    }

    fn curve_point(&self, t: f64, frame: &Frame) -> CurvePoint {
        let tangent = frame.tangent();
        CurvePoint {
            param: wrap_tau(t),
            position: frame.pos,
            tangent,
            inward_normal: perp(&tangent),
            tangent_angle: wrap_tau(self.angle_of_param(t)),
            radius: frame.radius(),
        }
    }

    /// Geometry at native parameter `param` (reduced modulo 2pi).
    pub fn eval_point(&self, param: f64) -> Result<CurvePoint> {
        let t = wrap_tau(param);
        let frame = self.frame(t);
        if !(self.signed_curvature(t, &frame) > 0.0) {
            return Err(Error::NonPositiveCurvature {
                param: t,
                radius: frame.radius(),
            });
        }
        Ok(self.curve_point(t, &frame))
    }

    /// Geometry at tangent angle `phi`.
    pub fn point(&self, phi: f64) -> CurvePoint {
        let t = self.param_of_angle(phi);
        self.curve_point(t, &self.frame(t))
    }

    pub fn position(&self, phi: f64) -> Vec2 {
        self.pos_vel(self.param_of_angle(phi)).0
    }

    /// Radius of curvature at tangent angle `phi`.
    pub fn radius(&self, phi: f64) -> f64 {
        match (&self.base, self.bumps.is_empty()) {
            (Base::Fourier { a0, harmonics }, true) => Base::series(*a0, harmonics, phi).0,
            _ => self.frame(self.param_of_angle(phi)).radius(),
        }
    }

    /// `dR / dphi` at tangent angle `phi`.
    pub fn radius_derivative(&self, phi: f64) -> f64 {
        match (&self.base, self.bumps.is_empty()) {
            (Base::Fourier { a0, harmonics }, true) => Base::series(*a0, harmonics, phi).1,
            (Base::Ellipse { .. }, true) => {
                let t = self.param_of_angle(phi);
                let jet = self.base.jet(t);
                let speed = jet.d1.norm();
                let c = cross(&jet.d1, &jet.d2);
                let dspeed = jet.d1.dot(&jet.d2) / speed;
                let dc = cross(&jet.d1, &jet.d3);
                let dr_dt = (3.0 * speed * speed * dspeed * c - speed * speed * speed * dc) / (c * c);
                dr_dt / (c / (speed * speed))
            }
            _ => {
                // The bump profile is only C² so R is only C⁰ across support
                // boundaries; a central difference is adequate here.
                let t = self.param_of_angle(phi);
                let h = 1e-6;
                let (f0, f1) = (self.frame(t - h), self.frame(t + h));
                let rate = self.frame(t).angle_rate();
                (f1.radius() - f0.radius()) / (2.0 * h * rate)
            }
        }
    }

    /// Curvature with the orientation of the base series taken into account:
    /// a Fourier series with `R < 0` somewhere traces a cusped curve whose
    /// unsigned curvature looks positive.
    fn signed_curvature(&self, t: f64, frame: &Frame) -> f64 {
        if let Base::Fourier { a0, harmonics } = &self.base {
            let r = Base::series(*a0, harmonics, t).0;
            if r <= 0.0 {
                return 1.0 / r;
            }
        }
        frame.curvature()
    }

    fn check_curvature(&self, grid: usize) -> Result<()> {
        let step = TAU / grid as f64;
        let curvature = |t: f64| self.signed_curvature(t, &self.frame(t));
        let mut worst = (0.0, f64::INFINITY);
        for i in 0..grid {
            let t = i as f64 * step;
            let k = curvature(t);
            if !(k > 0.0) {
                return Err(Error::NonPositiveCurvature {
                    param: t,
                    radius: 1.0 / k,
                });
            }
            if k < worst.1 {
                worst = (t, k);
            }
            if !self.bumps.is_empty() && self.in_support(t) {
                let jet = self.base.jet(t);
                if jet.d1.dot(&self.frame(t).vel) <= 0.0 {
                    return Err(Error::spec("bumps", format!("displacement folds the curve near t = {t}")));
                }
            }
        }
        // Golden-section refinement around the smallest sampled curvature.
        let (mut a, mut b) = (worst.0 - step, worst.0 + step);
        let g = 0.5 * (libm::sqrt(5.0) - 1.0);
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        for _ in 0..60 {
            if curvature(c) < curvature(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        let t = 0.5 * (a + b);
        let k = curvature(t);
        if !(k > 0.0) {
            return Err(Error::NonPositiveCurvature {
                param: wrap_tau(t),
                radius: 1.0 / k,
            });
        }
        Ok(())
    }
}

fn flatten(spec: &OvalSpec, tol: &Tolerances) -> Result<(Base, Vec<NormalBump>)> {
    match spec {
        OvalSpec::Fourier { a0, harmonics } => {
            if !(a0.is_finite() && *a0 > 0.0) {
                return Err(Error::spec("a0", "must be positive and finite"));
            }
            for (i, h) in harmonics.iter().enumerate() {
                if h.k < 2 {
                    return Err(Error::spec(
                        &format!("harmonics[{i}].k"),
                        "harmonics must have k >= 2 (k = 1 does not close the curve)",
                    ));
                }
                if !(h.a.is_finite() && h.b.is_finite()) {
                    return Err(Error::spec(&format!("harmonics[{i}]"), "coefficients must be finite"));
                }
            }
            let defect = closure_defect(spec);
            if defect.norm() > tol.closure_defect {
                return Err(Error::spec("harmonics", format!("closure defect {:e}", defect.norm())));
            }
            Ok((
                Base::Fourier {
                    a0: *a0,
                    harmonics: harmonics.clone(),
                },
                Vec::new(),
            ))
        }
        OvalSpec::Ellipse { a, b } => {
            if !(a.is_finite() && b.is_finite() && *b > 0.0 && b <= a) {
                return Err(Error::spec("a, b", "ellipse requires 0 < b <= a"));
            }
            Ok((Base::Ellipse { a: *a, b: *b }, Vec::new()))
        }
        OvalSpec::Perturbed { base, bumps } => {
            let (inner, mut all) = flatten(base, tol)?;
            for (i, bump) in bumps.iter().enumerate() {
                if !(bump.center.is_finite() && bump.second_deriv.is_finite()) {
                    return Err(Error::spec(&format!("bumps[{i}]"), "values must be finite"));
                }
                if !(bump.half_width > 0.0 && bump.half_width <= PI) {
                    return Err(Error::spec(&format!("bumps[{i}].half_width"), "must lie in (0, pi]"));
                }
                if all.iter().any(|b| b.overlaps(bump)) {
                    return Err(Error::spec(
                        &format!("bumps[{i}]"),
                        "support overlaps a bump of the base curve",
                    ));
                }
            }
            all.extend(bumps.iter().copied());
            Ok((inner, all))
        }
    }
}

/// `∮ R(phi) (cos phi, sin phi) dphi` by composite Gauss-Legendre
/// quadrature; zero for every closed curve. Ellipses are closed by
/// construction and perturbations are periodic displacements, so only the
/// Fourier series contributes.
pub fn closure_defect(spec: &OvalSpec) -> Vec2 {
    match spec {
        OvalSpec::Fourier { a0, harmonics } => {
            let kmax = harmonics.iter().map(|h| h.k).max().unwrap_or(0) as usize;
            let rule = CompositeRule::new(16, (4 * kmax).max(64));
            let [x, y] = rule.integrate(0.0, TAU, |phi| {
                let r = harmonics.iter().fold(*a0, |acc, h| {
                    let (s, c) = libm::sincos(h.k as f64 * phi);
                    acc + h.a * c + h.b * s
                });
                let (s, c) = libm::sincos(phi);
                [r * c, r * s]
            });
            Vec2::new(x, y)
        }
        OvalSpec::Ellipse { .. } => Vec2::zeros(),
        OvalSpec::Perturbed { base, .. } => closure_defect(base),
    }
}

/// Radius of curvature at the center of a bump with `lambda'' = h` placed on
/// a curve whose radius there is `r0`.
///
/// At the center `lambda = lambda' = 0`, so the perturbed velocity is
/// `r0 T` and the acceleration is `r0' T + (r0 + h) N`; the result is
/// `|v|³ / (v x a) = r0² / (r0 + h)`.
pub fn perturbed_radius_at_center(r0: f64, h: f64) -> Result<f64> {
    let tangent = Vec2::new(1.0, 0.0);
    let normal = perp(&tangent);
    let vel = r0 * tangent;
    let acc = (r0 + h) * normal;
    let c = cross(&vel, &acc);
    if !(r0 > 0.0) || !(c > 0.0) {
        return Err(Error::NonPositiveCurvature { param: 0.0, radius: r0 * r0 / (r0 + h) });
    }
    let speed = vel.norm();
    Ok(speed * speed * speed / c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn circle_start_point() {
        let oval = Oval::new(OvalSpec::circle(1.0)).unwrap();
        let p = oval.eval_point(0.0).unwrap();
        assert!(p.position.norm() < 1e-15);
        assert!(close(p.tangent.x, 1.0, 1e-15) && close(p.tangent.y, 0.0, 1e-15));
        assert!(close(p.inward_normal.y, 1.0, 1e-15));
        assert!(close(p.radius, 1.0, 1e-14));
    }

    #[test]
    fn ellipse_vertices() {
        let oval = Oval::new(OvalSpec::ellipse(2.0, 1.0)).unwrap();
        let p = oval.eval_point(0.0).unwrap();
        assert!(close(p.position.x, 2.0, 1e-15) && close(p.position.y, 0.0, 1e-15));
        assert!(close(p.radius, 0.5, 1e-14));
        assert!(close(p.tangent_angle, FRAC_PI_2, 1e-15));
        let q = oval.eval_point(FRAC_PI_2).unwrap();
        assert!(close(q.position.x, 0.0, 1e-15) && close(q.position.y, 1.0, 1e-15));
        assert!(close(q.radius, 4.0, 1e-13));
    }

    #[test]
    fn ellipse_radius_matches_finite_differences() {
        let oval = Oval::new(OvalSpec::ellipse(2.0, 1.0)).unwrap();
        let h = 1e-4;
        for &t in &[0.0, 0.3, FRAC_PI_2, 2.0, 4.4] {
            let p = |s: f64| oval.eval_point(s).unwrap().position;
            let d1 = (p(t + h) - p(t - h)) / (2.0 * h);
            let d2 = (p(t + h) - 2.0 * p(t) + p(t - h)) / (h * h);
            let r_fd = libm::pow(d1.norm(), 3.0) / cross(&d1, &d2);
            assert!(close(oval.eval_point(t).unwrap().radius, r_fd, 1e-6 * r_fd));
        }
    }

    #[test]
    fn ellipse_tangent_angle_inverts() {
        let oval = Oval::new(OvalSpec::ellipse(1.7, 0.9)).unwrap();
        for i in 0..50 {
            let phi = -3.0 + 0.37 * i as f64;
            let t = oval.param_of_angle(phi);
            assert!(close(oval.angle_of_param(t), phi, 1e-12));
            let p = oval.point(phi);
            assert!(close(wrap_pi(libm::atan2(p.tangent.y, p.tangent.x) - phi), 0.0, 1e-12));
        }
    }

    #[test]
    fn fourier_position_matches_quadrature() {
        let spec = OvalSpec::fourier(1.0, &[(2, 0.05, -0.02), (3, 0.1, 0.0), (5, 0.0, 0.01)]);
        let oval = Oval::new(spec.clone()).unwrap();
        let OvalSpec::Fourier { a0, harmonics } = spec else { unreachable!() };
        let rule = CompositeRule::new(16, 64);
        for &phi in &[0.4, 1.9, 3.3, 6.0] {
            let [x, y] = rule.integrate(0.0, phi, |u| {
                let r = harmonics.iter().fold(a0, |acc, h| {
                    acc + h.a * libm::cos(h.k as f64 * u) + h.b * libm::sin(h.k as f64 * u)
                });
                [r * libm::cos(u), r * libm::sin(u)]
            });
            let p = oval.position(phi);
            assert!(close(p.x, x, 1e-13) && close(p.y, y, 1e-13), "{phi}");
        }
    }

    #[test]
    fn fourier_tangent_angle_and_radius_are_consistent() {
        let spec = OvalSpec::fourier(1.0, &[(3, 0.1, 0.0), (2, 0.0, 0.04)]);
        let oval = Oval::new(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1024 {
            let phi = rng.random_range(0.0..TAU);
            let p = oval.eval_point(phi).unwrap();
            assert!(close(wrap_pi(p.tangent_angle - phi), 0.0, 1e-9));
            let series = 1.0 + 0.1 * libm::cos(3.0 * phi) + 0.04 * libm::sin(2.0 * phi);
            assert!(close(p.radius, series, 1e-8));
            assert!(close(p.tangent.dot(&p.inward_normal), 0.0, 1e-15));
        }
    }

    #[test]
    fn k1_harmonic_is_rejected_with_nonzero_defect() {
        let spec = OvalSpec::fourier(1.0, &[(1, 0.2, 0.0)]);
        let d = closure_defect(&spec);
        assert!(close(d.x, PI * 0.2, 1e-12));
        let err = Oval::new(spec).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec { ref field, .. } if field == "harmonics[0].k"));
    }

    #[test]
    fn closure_defect_vanishes_for_valid_specs() {
        assert!(closure_defect(&OvalSpec::circle(1.0)).norm() < 1e-14);
        assert!(closure_defect(&OvalSpec::fourier(1.0, &[(3, 0.3, 0.1)])).norm() < 1e-14);
    }

    #[test]
    fn non_convex_spec_reports_parameter() {
        let err = Oval::new(OvalSpec::fourier(1.0, &[(3, 1.2, 0.0)])).unwrap_err();
        match err {
            Error::NonPositiveCurvature { param, .. } => {
                assert!(1.0 + 1.2 * libm::cos(3.0 * param) < 0.05);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bump_defining_constraints() {
        let bump = NormalBump::new(1.0, 0.3, 0.1);
        assert_eq!(bump.displacement(1.0), (0.0, 0.0, 0.1));
        assert_eq!(bump.displacement(1.31), (0.0, 0.0, 0.0));
        assert_eq!(bump.displacement(1.0 + PI), (0.0, 0.0, 0.0));
        assert!(bump.displacement(1.15).0 > 0.0 && bump.displacement(0.85).0 > 0.0);
    }

    #[test]
    fn bump_is_c2_and_derivatives_match_finite_differences() {
        let bump = NormalBump::new(0.5, 0.3, 0.1);
        let h = 1e-6;
        for i in 1..60 {
            let t = 0.5 - 0.3 + 0.01 * i as f64;
            let (l0, l1, l2) = bump.displacement(t);
            let fd1 = (bump.displacement(t + h).0 - bump.displacement(t - h).0) / (2.0 * h);
            let fd2 = (bump.displacement(t + h).1 - bump.displacement(t - h).1) / (2.0 * h);
            assert!(close(l1, fd1, 1e-8), "{t}");
            assert!(close(l2, fd2, 1e-7), "{t}");
            assert!(l0.is_finite());
        }
        // second derivative tends to zero at the support boundary
        let edge = bump.displacement(0.8 - 1e-10).2;
        assert!(edge.abs() < 1e-6);
    }

    #[test]
    fn perturbed_radius_closed_form() {
        assert!(close(perturbed_radius_at_center(1.0, 0.0).unwrap(), 1.0, 1e-15));
        assert!(close(perturbed_radius_at_center(1.0, 0.1).unwrap(), 1.0 / 1.1, 1e-15));
        assert!(close(perturbed_radius_at_center(1.0, -0.1).unwrap(), 1.0 / 0.9, 1e-15));
        assert!(perturbed_radius_at_center(1.0, -1.5).is_err());
    }

    #[test]
    fn perturbed_radius_matches_numerical_curvature_of_the_curve() {
        // finite differences of positions of the explicitly perturbed circle
        for &h in &[0.1, -0.1] {
            let spec = OvalSpec::circle(1.0).perturbed(vec![NormalBump::new(2.0, 0.4, h)]);
            let oval = Oval::new(spec).unwrap();
            let e = 1e-4;
            let p = |t: f64| oval.eval_point(t).unwrap().position;
            let d1 = (p(2.0 + e) - p(2.0 - e)) / (2.0 * e);
            let d2 = (p(2.0 + e) - 2.0 * p(2.0) + p(2.0 - e)) / (e * e);
            let r_fd = libm::pow(d1.norm(), 3.0) / cross(&d1, &d2);
            let exact = perturbed_radius_at_center(1.0, h).unwrap();
            assert!(close(r_fd, exact, 1e-6), "{h}: {r_fd} vs {exact}");
            assert!(close(oval.eval_point(2.0).unwrap().radius, exact, 1e-12));
        }
    }

    #[test]
    fn zero_amplitude_bumps_are_identity() {
        let base = OvalSpec::fourier(1.0, &[(3, 0.1, 0.0)]);
        let a = Oval::new(base.clone()).unwrap();
        let b = Oval::new(base.perturbed(vec![NormalBump::new(1.0, 0.5, 0.0)])).unwrap();
        for i in 0..200 {
            let t = 0.0314 * i as f64;
            assert_eq!(a.eval_point(t).unwrap().position, b.eval_point(t).unwrap().position);
        }
    }

    #[test]
    fn bump_support_containment() {
        let base = OvalSpec::ellipse(1.5, 1.0);
        let a = Oval::new(base.clone()).unwrap();
        let b = Oval::new(base.perturbed(vec![NormalBump::new(1.0, 0.3, 0.05)])).unwrap();
        for i in 0..400 {
            let t = TAU * i as f64 / 400.0;
            let d = (a.eval_point(t).unwrap().position - b.eval_point(t).unwrap().position).norm();
            if circular_distance(t, 1.0) >= 0.3 {
                assert!(d <= 1e-12);
            }
        }
        // tangent angle is preserved at the bump center (first-order contact)
        let pa = a.eval_point(1.0).unwrap();
        let pb = b.eval_point(1.0).unwrap();
        assert!(close(pa.tangent_angle, pb.tangent_angle, 1e-14));
    }

    #[test]
    fn perturbed_angle_inversion_round_trips() {
        let spec = OvalSpec::ellipse(1.3, 1.0).perturbed(vec![NormalBump::new(0.7, 0.4, 0.08)]);
        let oval = Oval::new(spec).unwrap();
        for i in 0..300 {
            let phi = 0.021 * i as f64;
            let t = oval.param_of_angle(phi);
            assert!(close(oval.angle_of_param(t), phi, 1e-12), "{phi}");
        }
    }

    #[test]
    fn nested_perturbations_flatten_or_reject_overlap() {
        let base = OvalSpec::circle(1.0).perturbed(vec![NormalBump::new(0.0, 0.3, 0.05)]);
        let ok = base.clone().perturbed(vec![NormalBump::new(2.0, 0.3, 0.05)]);
        assert_eq!(Oval::new(ok).unwrap().bumps().len(), 2);
        let bad = base.perturbed(vec![NormalBump::new(0.2, 0.3, 0.05)]);
        assert!(matches!(Oval::new(bad), Err(Error::InvalidSpec { .. })));
    }

    #[test]
    fn large_negative_bump_breaks_convexity() {
        let spec = OvalSpec::circle(1.0).perturbed(vec![NormalBump::new(0.0, 0.3, -1.5)]);
        assert!(matches!(Oval::new(spec), Err(Error::NonPositiveCurvature { .. })));
    }
}
