//! Periodic orbits as critical points of `G(psi) = -sum |alpha(psi_{i+1}) - alpha(psi_i)|`.
//!
//! Vertices are tangent angles on the universal cover, strictly increasing,
//! with `psi_n = psi_0 + 2 pi m`. Minima of `G` are perimeter maxima.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::billiard::{bounce, LiftedPhasePoint};
use crate::curve::Oval;
use crate::math::{circular_distance, cross, perp, unit, wrap_tau, Vec2};
use crate::stability::{phase_distance, PeriodicOrbit, Vertex};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolygonConfig {
    pub m: usize,
    pub n: usize,
    pub psi: Vec<f64>,
}

impl PolygonConfig {
    pub fn new(m: usize, n: usize, psi: Vec<f64>) -> Result<Self> {
        check_rotation(m, n)?;
        let config = Self { m, n, psi };
        if config.psi.len() != n {
            return Err(Error::InvalidConfig(format!("expected {n} angles, got {}", config.psi.len())));
        }
        if !config.is_ordered() {
            return Err(Error::InvalidConfig(
                "angles must increase strictly and span less than 2 pi m".into(),
            ));
        }
        Ok(config)
    }

    pub fn equally_spaced(m: usize, n: usize, start: f64) -> Self {
        let gap = TAU * m as f64 / n as f64;
        Self {
            m,
            n,
            psi: (0..n).map(|i| start + gap * i as f64).collect(),
        }
    }

    /// `psi_i` for `0 <= i <= n`, with `psi_n = psi_0 + 2 pi m`.
    pub fn lifted(&self, i: usize) -> f64 {
        if i == self.n {
            self.psi[0] + TAU * self.m as f64
        } else {
            self.psi[i]
        }
    }

    fn is_ordered(&self) -> bool {
        self.psi.iter().all(|v| v.is_finite()) && (0..self.n).all(|i| self.lifted(i + 1) > self.lifted(i))
    }

    /// Relabels so that vertex `k` becomes vertex 0.
    pub fn shifted(&self, k: usize) -> Self {
        let k = k % self.n;
        let psi = (0..self.n)
            .map(|i| {
                let j = i + k;
                if j >= self.n {
                    self.psi[j - self.n] + TAU * self.m as f64
                } else {
                    self.psi[j]
                }
            })
            .collect();
        Self { psi, ..self.clone() }
    }

    /// Labels chosen so that vertex 0 has the smallest reduced angle, lifted
    /// into `[0, 2pi)`.
    pub fn canonical(&self) -> Self {
        let k = (0..self.n)
            .min_by(|&a, &b| wrap_tau(self.psi[a]).total_cmp(&wrap_tau(self.psi[b])))
            .unwrap_or(0);
        let mut out = self.shifted(k);
        let offset = TAU * libm::floor(out.psi[0] / TAU);
        out.psi.iter_mut().for_each(|v| *v -= offset);
        out
    }

    /// Vertex angles reduced to `[0, 2pi)` and sorted.
    pub fn vertex_set(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.psi.iter().map(|&p| wrap_tau(p)).collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

fn check_rotation(m: usize, n: usize) -> Result<()> {
    if n < 2 || m < 1 || m >= n {
        return Err(Error::InvalidConfig(format!("need 1 <= m < n and n >= 2, got m = {m}, n = {n}")));
    }
    Ok(())
}

struct Geometry {
    pos: Vec<Vec2>,
    tan: Vec<Vec2>,
    radius: Vec<f64>,
    dradius: Vec<f64>,
}

struct Chord {
    from: usize,
    to: usize,
    unit: Vec2,
    length: f64,
}

impl Geometry {
    fn new(oval: &Oval, config: &PolygonConfig, with_dradius: bool) -> Self {
        let n = config.n;
        let mut g = Geometry {
            pos: Vec::with_capacity(n),
            tan: Vec::with_capacity(n),
            radius: Vec::with_capacity(n),
            dradius: Vec::with_capacity(n),
        };
        for &psi in &config.psi {
            let t = oval.param_of_angle(psi);
            let frame = oval.frame(t);
            g.pos.push(frame.pos);
            g.tan.push(unit(psi));
            g.radius.push(frame.radius());
            g.dradius.push(if with_dradius { oval.radius_derivative(psi) } else { 0.0 });
        }
        g
    }

    fn chords(&self) -> Result<Vec<Chord>> {
        let n = self.pos.len();
        (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                let d = self.pos[j] - self.pos[i];
                let length = d.norm();
                if !(length > 1e-12) {
                    return Err(Error::CoincidentVertices { index: i, next: j });
                }
                Ok(Chord {
                    from: i,
                    to: j,
                    unit: d / length,
                    length,
                })
            })
            .collect()
    }
}

/// `G = -(total chord length)`.
pub fn action(oval: &Oval, config: &PolygonConfig) -> f64 {
    -perimeter(oval, config)
}

pub fn perimeter(oval: &Oval, config: &PolygonConfig) -> f64 {
    let pos: Vec<Vec2> = config.psi.iter().map(|&p| oval.position(p)).collect();
    (0..config.n).map(|i| (pos[(i + 1) % config.n] - pos[i]).norm()).sum()
}

fn gradient_from(geo: &Geometry, chords: &[Chord]) -> Vec<f64> {
    let mut g = vec![0.0; geo.pos.len()];
    for c in chords {
        g[c.from] += geo.radius[c.from] * c.unit.dot(&geo.tan[c.from]);
        g[c.to] -= geo.radius[c.to] * c.unit.dot(&geo.tan[c.to]);
    }
    g
}

/// `dG/dpsi_i = -R_i (cos theta_in - cos theta_out)`.
pub fn action_gradient(oval: &Oval, config: &PolygonConfig) -> Result<Vec<f64>> {
    let geo = Geometry::new(oval, config, false);
    Ok(gradient_from(&geo, &geo.chords()?))
}

fn hessian_from(geo: &Geometry, chords: &[Chord]) -> DMatrix<f64> {
    let n = geo.pos.len();
    let mut h = DMatrix::zeros(n, n);
    for c in chords {
        let (a, b) = (c.from, c.to);
        let da = geo.radius[a] * geo.tan[a];
        let db = geo.radius[b] * geo.tan[b];
        let dda = geo.dradius[a] * geo.tan[a] + geo.radius[a] * perp(&geo.tan[a]);
        let ddb = geo.dradius[b] * geo.tan[b] + geo.radius[b] * perp(&geo.tan[b]);
        let (ca, cb) = (cross(&c.unit, &da), cross(&c.unit, &db));
        let l = c.length;
        h[(a, a)] -= -c.unit.dot(&dda) + ca * ca / l;
        h[(b, b)] -= c.unit.dot(&ddb) + cb * cb / l;
        let mixed = ca * cb / l;
        h[(a, b)] += mixed;
        h[(b, a)] += mixed;
    }
    h
}

pub fn action_hessian(oval: &Oval, config: &PolygonConfig) -> Result<DMatrix<f64>> {
    let geo = Geometry::new(oval, config, true);
    Ok(hessian_from(&geo, &geo.chords()?))
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// A converged critical point of `G`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalPoint {
    pub config: PolygonConfig,
    pub action: f64,
    pub gradient_norm: f64,
    /// Counts of negative, zero and positive Hessian eigenvalues.
    pub hessian_signature: (usize, usize, usize),
    pub nondegenerate: bool,
    /// `(m', n')` when the orbit is a multiple traversal of a shorter one.
    pub repetition_of: Option<(usize, usize)>,
    pub orbit: PeriodicOrbit,
}

impl CriticalPoint {
    /// Nondegenerate minimum of `G` (a local perimeter maximum).
    pub fn is_minimum(&self) -> bool {
        self.nondegenerate && self.hessian_signature.0 == 0
    }

    pub fn perimeter(&self) -> f64 {
        -self.action
    }
}

pub fn hessian_signature(h: &DMatrix<f64>, zero: f64) -> (usize, usize, usize) {
    let eig = SymmetricEigen::new(h.clone());
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let threshold = zero * scale;
    eig.eigenvalues.iter().fold((0, 0, 0), |(neg, z, pos), &v| {
        if v.abs() <= threshold {
            (neg, z + 1, pos)
        } else if v < 0.0 {
            (neg + 1, z, pos)
        } else {
            (neg, z, pos + 1)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchOptions {
    /// Number of multistart seeds; `None` means `50 n`.
    pub starts: Option<usize>,
    pub seed: u64,
    /// Gradient-norm tolerance; `None` uses the oval's tolerances.
    pub tolerance: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            starts: None,
            seed: 0,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub points: Vec<CriticalPoint>,
    pub starts: usize,
    pub converged: usize,
    /// Converged runs discarded because the configuration failed the
    /// closure test or the angle band test.
    pub rejected: usize,
}

impl SearchReport {
    pub fn orbits(&self) -> impl Iterator<Item = &PeriodicOrbit> {
        self.points.iter().map(|p| &p.orbit)
    }
}

struct Solver<'a> {
    oval: &'a Oval,
    m: usize,
    n: usize,
    tolerance: f64,
    max_iterations: usize,
}

impl Solver<'_> {
    fn config(&self, psi: Vec<f64>) -> PolygonConfig {
        PolygonConfig {
            m: self.m,
            n: self.n,
            psi,
        }
    }

    fn gradient(&self, config: &PolygonConfig) -> Option<Vec<f64>> {
        if !config.is_ordered() {
            return None;
        }
        action_gradient(self.oval, config).ok()
    }

    /// Levenberg-Marquardt on the gradient system, which converges to
    /// critical points of any index and tolerates degenerate families.
    fn find_critical(&self, start: PolygonConfig) -> Option<(PolygonConfig, f64)> {
        let n = self.n;
        let mut config = start;
        let mut g = self.gradient(&config)?;
        let mut gn = norm(&g);
        let mut mu: Option<f64> = None;
        let mut polish = 0;
        for _ in 0..self.max_iterations {
            if gn <= self.tolerance {
                polish += 1;
                if polish > 3 || gn < 1e-15 {
                    break;
                }
            }
            let h = action_hessian(self.oval, &config).ok()?;
            let hh = &h * &h;
            let rhs = -(&h * DVector::from_column_slice(&g));
            let mut damping = *mu.get_or_insert(1e-10 * (1.0 + hh.trace() / n as f64));
            let mut accepted = false;
            for _ in 0..40 {
                let a = &hh + DMatrix::identity(n, n) * damping;
                let Some(step) = a.lu().solve(&rhs) else {
                    damping *= 10.0;
                    continue;
                };
                let biggest = step.amax();
                let scale = if biggest > 0.3 { 0.3 / biggest } else { 1.0 };
                let psi: Vec<f64> = config.psi.iter().zip(step.iter()).map(|(p, s)| p + scale * s).collect();
                let candidate = self.config(psi);
                if let Some(gc) = self.gradient(&candidate) {
                    let gcn = norm(&gc);
                    if gcn < gn {
                        config = candidate;
                        g = gc;
                        gn = gcn;
                        mu = Some((damping / 10.0).max(1e-18));
                        accepted = true;
                        break;
                    }
                }
                damping *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        (gn <= self.tolerance).then_some((config, gn))
    }

    /// Descent on `G` with a shifted Newton step; converges to a minimum
    /// of `G`, the Birkhoff maximal-perimeter orbit.
    fn maximize_perimeter(&self, start: PolygonConfig) -> Option<PolygonConfig> {
        let n = self.n;
        let mut config = start;
        let mut value = action(self.oval, &config);
        for _ in 0..4 * self.max_iterations {
            let g = self.gradient(&config)?;
            if norm(&g) <= self.tolerance {
                break;
            }
            let h = action_hessian(self.oval, &config).ok()?;
            let eig = SymmetricEigen::new(h.clone());
            let lowest = eig.eigenvalues.min();
            let scale = eig.eigenvalues.amax().max(1e-12);
            let shift = if lowest > 1e-6 * scale { 0.0 } else { -lowest + 1e-3 * scale };
            let a = h + DMatrix::identity(n, n) * shift;
            let step = a.lu().solve(&(-DVector::from_column_slice(&g)))?;
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let psi: Vec<f64> = config.psi.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
                let candidate = self.config(psi);
                if candidate.is_ordered() {
                    let v = action(self.oval, &candidate);
                    if v < value {
                        config = candidate;
                        value = v;
                        moved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        Some(config)
    }
}

/// Multistart search for `(m, n)` critical points of `G`.
pub fn find_orbits(oval: &Oval, m: usize, n: usize, options: &SearchOptions) -> Result<SearchReport> {
    check_rotation(m, n)?;
    let tol = oval.tolerances();
    let solver = Solver {
        oval,
        m,
        n,
        tolerance: options.tolerance.unwrap_or(tol.solver_gradient),
        max_iterations: tol.solver_max_iterations,
    };
    let starts = options.starts.unwrap_or(50 * n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut report = SearchReport {
        points: Vec::new(),
        starts,
        converged: 0,
        rejected: 0,
    };

    let mut seeds = Vec::with_capacity(starts + 4);
    for k in 0..4 {
        let offset = TAU * m as f64 / n as f64 * k as f64 / 4.0;
        if let Some(c) = solver.maximize_perimeter(PolygonConfig::equally_spaced(m, n, offset)) {
            seeds.push(c);
        }
    }
    for s in 0..starts {
        let start = TAU * (s as f64 + rng.random::<f64>()) / starts as f64;
        let jitter = 0.8 * rng.random::<f64>();
        let gaps: Vec<f64> = (0..n).map(|_| 1.0 + jitter * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let total: f64 = gaps.iter().sum();
        let mut psi = Vec::with_capacity(n);
        let mut acc = start;
        for g in &gaps {
            psi.push(acc);
            acc += TAU * m as f64 * g / total;
        }
        seeds.push(solver.config(psi));
    }

    for seed in seeds {
        let Some((config, gn)) = solver.find_critical(seed) else {
            continue;
        };
        report.converged += 1;
        let config = config.canonical();
        if report
            .points
            .iter()
            .any(|p| same_vertex_set(&p.config, &config, tol.dedup))
        {
            continue;
        }
        match critical_point(oval, config, gn) {
            Ok(point) => report.points.push(point),
            Err(_) => report.rejected += 1,
        }
    }
    report.points.sort_by(|a, b| a.action.total_cmp(&b.action));
    Ok(report)
}

fn critical_point(oval: &Oval, config: PolygonConfig, gradient_norm: f64) -> Result<CriticalPoint> {
    let tol = oval.tolerances();
    let orbit = config_to_orbit(oval, &config)?;
    let n = config.n as f64;
    let band = (PI / n - 1e-9)..=((n - 1.0) * PI / n + 1e-9);
    if !orbit.vertices.iter().any(|v| band.contains(&v.theta)) {
        return Err(Error::InvalidConfig("orbit misses the angle band".into()));
    }
    let hessian = action_hessian(oval, &config)?;
    let signature = hessian_signature(&hessian, tol.hessian_zero);
    Ok(CriticalPoint {
        action: action(oval, &config),
        gradient_norm,
        hessian_signature: signature,
        nondegenerate: signature.1 == 0,
        repetition_of: repetition(&config, tol.dedup),
        config,
        orbit,
    })
}

/// Equal vertex sets after the best cyclic alignment.
pub fn same_vertex_set(a: &PolygonConfig, b: &PolygonConfig, tolerance: f64) -> bool {
    if a.n != b.n || a.m != b.m {
        return false;
    }
    let (va, vb) = (a.vertex_set(), b.vertex_set());
    (0..a.n).any(|k| (0..a.n).all(|i| circular_distance(va[i], vb[(i + k) % a.n]) < tolerance))
}

fn repetition(config: &PolygonConfig, tolerance: f64) -> Option<(usize, usize)> {
    let (m, n) = (config.m, config.n);
    (1..n)
        .filter(|q| n % q == 0 && (m * q) % n == 0)
        .find(|&q| {
            let advance = TAU * (m * q / n) as f64;
            (0..n).all(|i| {
                let j = i + q;
                let lifted = if j >= n {
                    config.psi[j - n] + TAU * m as f64
                } else {
                    config.psi[j]
                };
                (lifted - config.psi[i] - advance).abs() < tolerance
            })
        })
        .map(|q| (m * q / n, q))
}

/// Phase-space orbit of a critical configuration, checked against the map.
pub fn config_to_orbit(oval: &Oval, config: &PolygonConfig) -> Result<PeriodicOrbit> {
    let tol = oval.tolerances();
    if !config.is_ordered() {
        return Err(Error::InvalidConfig("angles are not strictly increasing".into()));
    }
    let geo = Geometry::new(oval, config, false);
    let chords = geo.chords()?;
    let vertices: Vec<Vertex> = chords
        .iter()
        .map(|c| {
            let t = geo.tan[c.from];
            let theta = libm::atan2(cross(&t, &c.unit), t.dot(&c.unit));
            Vertex::new(config.psi[c.from], theta, geo.radius[c.from], c.length)
        })
        .collect();

    let min_x = vertices.iter().fold(f64::INFINITY, |a, v| a.min(v.x));
    let step_tolerance = (10.0 * tol.solver_gradient / min_x.min(1.0)).max(1e-9);
    let mut worst_step = 0.0f64;
    let mut p = LiftedPhasePoint::new(config.psi[0], vertices[0].theta);
    let start = p;
    for i in 0..config.n {
        let own = LiftedPhasePoint::new(config.psi[i], vertices[i].theta);
        let next_theta = vertices[(i + 1) % config.n].theta;
        let next = LiftedPhasePoint::new(config.lifted(i + 1), next_theta);
        let image = bounce(oval, own).map_err(|e| e.at_step(i as i64))?.to;
        worst_step = worst_step.max(phase_distance(image, next));
        p = bounce(oval, p).map_err(|e| e.at_step(i as i64))?.to;
    }
    if worst_step > step_tolerance {
        return Err(Error::ClosureFailure {
            what: "critical configuration",
            error: worst_step,
            tolerance: step_tolerance,
        });
    }
    let lift_error = (p.phi - start.phi - TAU * config.m as f64).abs();
    let closure = libm::hypot(lift_error, p.theta - start.theta);
    PeriodicOrbit::from_vertices(config.m, config.n, vertices, closure, tol.degeneracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::OvalSpec;
    use crate::stability::OrbitClass;
    use core::f64::consts::FRAC_PI_2;

    fn fd_gradient(oval: &Oval, config: &PolygonConfig) -> Vec<f64> {
        let h = 1e-6;
        (0..config.n)
            .map(|i| {
                let mut a = config.clone();
                let mut b = config.clone();
                a.psi[i] += h;
                b.psi[i] -= h;
                (action(oval, &a) - action(oval, &b)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn circle_actions() {
        let oval = Oval::new(OvalSpec::circle(1.0)).unwrap();
        let tri = PolygonConfig::equally_spaced(1, 3, 0.3);
        assert!((action(&oval, &tri) + 3.0 * libm::sqrt(3.0)).abs() < 1e-12);
        let dia = PolygonConfig::equally_spaced(1, 2, 0.0);
        assert!((action(&oval, &dia) + 4.0).abs() < 1e-12);
        assert!(norm(&action_gradient(&oval, &tri).unwrap()) < 1e-12);
        for (m, n) in [(1, 4), (2, 5), (3, 7)] {
            let c = PolygonConfig::equally_spaced(m, n, 1.0);
            let closed = -2.0 * n as f64 * libm::sin(PI * m as f64 / n as f64);
            assert!((action(&oval, &c) - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_major_axis_action() {
        let oval = Oval::new(OvalSpec::ellipse(2.0, 1.0)).unwrap();
        let c = PolygonConfig::new(1, 2, vec![FRAC_PI_2, 1.5 * PI]).unwrap();
        assert!((action(&oval, &c) + 8.0).abs() < 1e-12);
        let orbit = config_to_orbit(&oval, &c).unwrap();
        assert!(orbit.vertices.iter().all(|v| (v.theta - FRAC_PI_2).abs() < 1e-12));
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let ovals = [
            Oval::new(OvalSpec::fourier(1.0, &[(3, 0.1, 0.0), (2, 0.03, 0.05)])).unwrap(),
            Oval::new(OvalSpec::ellipse(1.6, 1.0)).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for oval in &ovals {
            for (m, n) in [(1, 2), (1, 3), (2, 5)] {
                let mut c = PolygonConfig::equally_spaced(m, n, rng.random::<f64>());
                c.psi.iter_mut().for_each(|p| *p += 0.2 * (rng.random::<f64>() - 0.5));
                let g = action_gradient(oval, &c).unwrap();
                let fd = fd_gradient(oval, &c);
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() < 1e-6 * (1.0 + a.abs()), "{a} vs {b}");
                }
                let h = action_hessian(oval, &c).unwrap();
                let e = 1e-6;
                for j in 0..n {
                    let mut a = c.clone();
                    let mut b = c.clone();
                    a.psi[j] += e;
                    b.psi[j] -= e;
                    let ga = action_gradient(oval, &a).unwrap();
                    let gb = action_gradient(oval, &b).unwrap();
                    for i in 0..n {
                        let fd = (ga[i] - gb[i]) / (2.0 * e);
                        assert!((h[(i, j)] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{i},{j}: {} vs {fd}", h[(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn action_is_invariant_under_relabeling() {
        let oval = Oval::new(OvalSpec::fourier(1.0, &[(3, 0.1, 0.0)])).unwrap();
        let c = PolygonConfig::new(2, 5, vec![0.1, 1.5, 2.4, 3.9, 5.3]).unwrap();
        for k in 0..5 {
            assert!((action(&oval, &c.shifted(k)) - action(&oval, &c)).abs() < 1e-13);
        }
        assert!(PolygonConfig::new(1, 3, vec![0.0, 2.0, 1.0]).is_err());
        assert!(PolygonConfig::new(3, 3, vec![0.0, 2.0, 4.0]).is_err());
    }

    #[test]
    fn ellipse_two_periodic_orbits() {
        let oval = Oval::new(OvalSpec::ellipse(2.0, 1.0)).unwrap();
        let report = find_orbits(&oval, 1, 2, &SearchOptions::default()).unwrap();
        assert_eq!(report.points.len(), 2, "{:#?}", report.points);
        let traces: Vec<f64> = report.orbits().map(|o| o.trace).collect();
        assert!((traces[0] - 194.0).abs() < 1e-4, "{traces:?}");
        assert!((traces[1] + 1.0).abs() < 1e-6);
        assert!(report.points[0].is_minimum());
        for p in &report.points {
            assert!(p.orbit.closure_error < 1e-8);
        }
    }

    #[test]
    fn circle_triangles_are_degenerate() {
        let oval = Oval::new(OvalSpec::circle(1.0)).unwrap();
        let report = find_orbits(&oval, 1, 3, &SearchOptions { starts: Some(20), ..Default::default() }).unwrap();
        assert!(!report.points.is_empty());
        for p in &report.points {
            assert!((p.action + 3.0 * libm::sqrt(3.0)).abs() < 1e-10);
            assert!(!p.nondegenerate && p.hessian_signature.1 >= 1);
            assert!(p.orbit.vertices.iter().all(|v| (v.theta - PI / 3.0).abs() < 1e-8));
        }
    }

    #[test]
    fn constant_width_oval_has_degenerate_diameters() {
        // R(phi) + R(phi + pi) is constant, so every double normal has the
        // same length and the 2-periodic orbits form a continuous family.
        let oval = Oval::new(OvalSpec::fourier(1.0, &[(3, 0.1, 0.0)])).unwrap();
        let report = find_orbits(&oval, 1, 2, &SearchOptions { starts: Some(10), ..Default::default() }).unwrap();
        assert!(!report.points.is_empty());
        for p in &report.points {
            assert!((p.perimeter() - 4.0).abs() < 1e-9);
            assert_eq!(p.orbit.class, OrbitClass::Degenerate);
        }
    }

    #[test]
    fn generic_oval_two_periodic_orbits_are_nondegenerate() {
        let oval = Oval::new(OvalSpec::fourier(1.0, &[(2, 0.08, 0.0), (3, 0.0, 0.03)])).unwrap();
        let report = find_orbits(&oval, 1, 2, &SearchOptions::default()).unwrap();
        assert!(report.points.len() >= 2);
        for p in &report.points {
            assert!(p.nondegenerate);
            assert_ne!(p.orbit.class, OrbitClass::Degenerate);
            assert!(p.gradient_norm <= 1e-11);
            assert!(p.orbit.closure_error < 1e-8);
            assert_eq!(p.is_minimum(), p.orbit.trace > 2.0);
        }
    }

    #[test]
    fn repetitions_are_tagged() {
        let oval = Oval::new(OvalSpec::ellipse(1.5, 1.0)).unwrap();
        let report = find_orbits(&oval, 2, 4, &SearchOptions { starts: Some(60), ..Default::default() }).unwrap();
        assert!(report.points.iter().any(|p| p.repetition_of == Some((1, 2))));
    }
}
