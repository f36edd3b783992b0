//! Monodromy, trace classification, and the affine dependence of the trace
//! on each vertex's `x_i = R_i sin(theta_i)`.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::billiard::{bounce, LiftedPhasePoint, PhasePoint, TangentMap};
use crate::curve::Oval;
use crate::math::{wrap_pi, Mat2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OrbitClass {
    Elliptic,
    Hyperbolic,
    InverseHyperbolic,
    Degenerate,
}

impl OrbitClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrbitClass::Elliptic => "elliptic",
            OrbitClass::Hyperbolic => "hyperbolic",
            OrbitClass::InverseHyperbolic => "inverse_hyperbolic",
            OrbitClass::Degenerate => "degenerate",
        }
    }

    /// True for both hyperbolic and inverse hyperbolic orbits.
    pub fn is_saddle(&self) -> bool {
        matches!(self, OrbitClass::Hyperbolic | OrbitClass::InverseHyperbolic)
    }
}

/// Degenerate band `|tr -/+ 2| <= tolerance`, then `|tr| < 2` elliptic.
pub fn classify(trace: f64, tolerance: f64) -> OrbitClass {
    if (trace - 2.0).abs() <= tolerance || (trace + 2.0).abs() <= tolerance {
        OrbitClass::Degenerate
    } else if trace.abs() < 2.0 {
        OrbitClass::Elliptic
    } else if trace > 2.0 {
        OrbitClass::Hyperbolic
    } else {
        OrbitClass::InverseHyperbolic
    }
}

/// Data attached to one bounce of a periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vertex {
    /// Lifted tangent angle.
    pub phi: f64,
    pub theta: f64,
    pub radius: f64,
    /// `radius * sin(theta)`.
    pub x: f64,
    /// Length of the chord to the next vertex.
    pub chord: f64,
}

impl Vertex {
    pub fn new(phi: f64, theta: f64, radius: f64, chord: f64) -> Self {
        Self {
            phi,
            theta,
            radius,
            x: radius * libm::sin(theta),
            chord,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeriodicOrbit {
    pub m: usize,
    pub n: usize,
    pub vertices: Vec<Vertex>,
    pub monodromy: Mat2,
    pub trace: f64,
    pub class: OrbitClass,
    /// Phase-space distance between the start and its `n`-th lifted image
    /// shifted back by `2 pi m`.
    pub closure_error: f64,
}

impl PeriodicOrbit {
    /// Builds the orbit from vertex data; the monodromy is the ordered
    /// product of the per-bounce tangent maps.
    pub fn from_vertices(m: usize, n: usize, vertices: Vec<Vertex>, closure_error: f64, degeneracy: f64) -> Result<Self> {
        if n < 2 || vertices.len() != n {
            return Err(Error::InvalidInput(alloc::format!(
                "orbit needs n >= 2 vertices, got n = {n} with {} vertices",
                vertices.len()
            )));
        }
        let monodromy = chain_product(&step_matrices(&vertices));
        let trace = monodromy.trace();
        Ok(Self {
            m,
            n,
            vertices,
            monodromy,
            trace,
            class: classify(trace, degeneracy),
            closure_error,
        })
    }

    /// Follows the map `n` times from `start`, which should be a periodic
    /// point of rotation type `(m, n)`.
    pub fn from_point(oval: &Oval, m: usize, n: usize, start: LiftedPhasePoint) -> Result<Self> {
        let mut vertices = Vec::with_capacity(n);
        let mut p = start;
        for step in 0..n {
            let b = bounce(oval, p).map_err(|e| e.at_step(step as i64))?;
            vertices.push(Vertex::new(b.from.phi, b.from.theta, b.radius_from, b.chord()));
            p = b.to;
        }
        let closure = phase_distance(
            LiftedPhasePoint::new(p.phi - TAU * m as f64, p.theta),
            LiftedPhasePoint::new(start.phi, vertices[0].theta),
        );
        Self::from_vertices(m, n, vertices, closure, oval.tolerances().degeneracy)
    }

    pub fn phase_points(&self) -> Vec<PhasePoint> {
        self.vertices.iter().map(|v| PhasePoint::new(v.phi, v.theta)).collect()
    }

    pub fn lifted_points(&self) -> Vec<LiftedPhasePoint> {
        self.vertices.iter().map(|v| LiftedPhasePoint::new(v.phi, v.theta)).collect()
    }

    /// Per-bounce tangent maps `A_0, ..., A_{n-1}`.
    pub fn step_matrices(&self) -> Vec<Mat2> {
        step_matrices(&self.vertices)
    }

    /// Sum of the chord lengths.
    pub fn perimeter(&self) -> f64 {
        self.vertices.iter().map(|v| v.chord).sum()
    }

    /// The same orbit started at vertex `k`.
    pub fn rotated(&self, k: usize) -> Self {
        let k = k % self.n;
        let shift = TAU * self.m as f64;
        let vertices: Vec<Vertex> = (0..self.n)
            .map(|i| {
                let j = (i + k) % self.n;
                let mut v = self.vertices[j];
                if i + k >= self.n {
                    v.phi += shift;
                }
                v
            })
            .collect();
        let monodromy = chain_product(&step_matrices(&vertices));
        Self {
            vertices,
            trace: monodromy.trace(),
            monodromy,
            ..self.clone()
        }
    }

    pub fn check_closure(&self, tolerance: f64) -> Result<()> {
        if self.closure_error > tolerance || !self.closure_error.is_finite() {
            return Err(Error::ClosureFailure {
                what: "periodic orbit",
                error: self.closure_error,
                tolerance,
            });
        }
        Ok(())
    }
}

/// Distance in the phase cylinder, with `phi` compared modulo 2pi.
pub fn phase_distance(a: LiftedPhasePoint, b: LiftedPhasePoint) -> f64 {
    libm::hypot(wrap_pi(a.phi - b.phi), a.theta - b.theta)
}

fn step_matrices(vertices: &[Vertex]) -> Vec<Mat2> {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let (a, b) = (&vertices[i], &vertices[(i + 1) % n]);
            TangentMap::from_chord(a.x, b.x, a.chord).matrix
        })
        .collect()
}

/// `A_{n-1} ... A_1 A_0`.
fn chain_product(steps: &[Mat2]) -> Mat2 {
    steps.iter().fold(Mat2::identity(), |acc, a| a * acc)
}

/// Monodromy recomputed by running the map from every vertex; fails if a
/// bounce does not land on the next vertex.
pub fn monodromy(oval: &Oval, orbit: &PeriodicOrbit) -> Result<Mat2> {
    let tolerance = 1e-8;
    let mut product = Mat2::identity();
    let points = orbit.lifted_points();
    for (i, p) in points.iter().enumerate() {
        let b = bounce(oval, *p).map_err(|e| e.at_step(i as i64))?;
        let mut next = points[(i + 1) % orbit.n];
        if i + 1 == orbit.n {
            next.phi += TAU * orbit.m as f64;
        }
        let defect = phase_distance(b.to, next);
        if defect > tolerance {
            return Err(Error::ClosureFailure {
                what: "monodromy step",
                error: defect,
                tolerance,
            });
        }
        product = b.tangent_map().matrix * product;
    }
    Ok(product)
}

/// Trace as an affine function `b / x_i + c` of one vertex's `x_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceDecomposition {
    pub site: usize,
    pub b: f64,
    pub c: f64,
    /// Deviation of a third evaluation from the affine model.
    pub residual: f64,
    /// Present when every sequential coefficient `b_1 .. b_{n-1}` vanishes:
    /// the trace then equals `(-1)^(n-1) 2 (perimeter / x_0 - 1)`.
    pub all_b_zero_fallback: Option<f64>,
}

impl TraceDecomposition {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.b / x + self.c
    }
}

/// Trace of the monodromy with `x_site` replaced by `value`, every other
/// vertex quantity held fixed.
pub fn trace_with_x(orbit: &PeriodicOrbit, site: usize, value: f64) -> f64 {
    let mut vertices = orbit.vertices.clone();
    vertices[site].x = value;
    chain_product(&step_matrices(&vertices)).trace()
}

/// Affine coefficients at `site` from the trace at `x`, `2x` and `x/2`.
pub fn trace_decomposition(orbit: &PeriodicOrbit, site: usize, threshold: f64) -> Result<TraceDecomposition> {
    if site >= orbit.n {
        return Err(Error::InvalidInput(alloc::format!("site {site} out of range for n = {}", orbit.n)));
    }
    let x = orbit.vertices[site].x;
    let (s1, s2, s3) = (x, 2.0 * x, 0.5 * x);
    let (t1, t2, t3) = (
        trace_with_x(orbit, site, s1),
        trace_with_x(orbit, site, s2),
        trace_with_x(orbit, site, s3),
    );
    let b = (t1 - t2) / (1.0 / s1 - 1.0 / s2);
    let c = t1 - b / s1;
    let residual = (b / s3 + c - t3).abs();
    let scale = 1.0 + t1.abs().max(t2.abs()).max(t3.abs());
    if residual > 1e-10 * scale {
        return Err(Error::AffinityViolation { site, residual });
    }
    let scan = sequential_scan(orbit, threshold);
    Ok(TraceDecomposition {
        site,
        b,
        c,
        residual,
        all_b_zero_fallback: scan.first_nonzero.is_none().then_some(scan.fallback_trace),
    })
}

/// Coefficients of the sequential elimination `x_1, x_2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialScan {
    /// `(k, b_k, c_k)` for `k = 1 .. n-1`.
    pub coefficients: Vec<(usize, f64, f64)>,
    /// Smallest `k` with `|b_k| > threshold`.
    pub first_nonzero: Option<usize>,
    /// `(-1)^(n-1) 2 (perimeter / x_0 - 1)`.
    pub fallback_trace: f64,
}

/// The matrices in this scan are `P_j = (x_{j+1}/x_j) A_j`, whose cyclic
/// product has the same trace as the monodromy. With
/// `C_{0,0} = P_0` and `P_k C_{k-1,0} = B_k / x_k + C_{k,0}`, one has
/// `C_{k,0} = (-1)^k / x_0 * N(x_0, x_{k+1}, l_0 + ... + l_k)` where
/// `N(u, v, l) = [[l - u, l], [l - u - v, l - v]]`, and
/// `tr = b_k / x_k + c_k` with `b_k = tr(P_{n-1} .. P_{k+1} B_k)`,
/// `c_k = tr(P_{n-1} .. P_{k+1} C_{k,0})`.
pub fn sequential_scan(orbit: &PeriodicOrbit, threshold: f64) -> SequentialScan {
    let v = &orbit.vertices;
    let n = orbit.n;
    let x = |j: usize| v[j % n].x;
    let nmat = |u: f64, w: f64, l: f64| Mat2::new(l - u, l, l - u - w, l - w);
    let p = |j: usize| nmat(x(j), x(j + 1), v[j].chord) / x(j);
    let tail = |k: usize| (k + 1..n).fold(Mat2::identity(), |acc, j| p(j) * acc);

    let mut coefficients = Vec::with_capacity(n.saturating_sub(1));
    let mut length = v[0].chord;
    let mut c_prev = p(0);
    let mut first_nonzero = None;
    for k in 1..n {
        length += v[k].chord;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let c_k = nmat(x(0), x(k + 1), length) * (sign / x(0));
        let b_mat = (p(k) * c_prev - c_k) * x(k);
        let t = tail(k);
        let (b, c) = ((t * b_mat).trace(), (t * c_k).trace());
        if first_nonzero.is_none() && b.abs() > threshold {
            first_nonzero = Some(k);
        }
        coefficients.push((k, b, c));
        c_prev = c_k;
    }
    let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
    SequentialScan {
        coefficients,
        first_nonzero,
        fallback_trace: sign * 2.0 * (orbit.perimeter() / x(0) - 1.0),
    }
}

/// Eigenvalues `(lambda_u, lambda_s)` of a hyperbolic monodromy, ordered by
/// modulus.
pub fn hyperbolic_eigenvalues(m: &Mat2) -> Result<(f64, f64)> {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 || tr.abs() <= 2.0 {
        return Err(Error::NotHyperbolic { trace: tr });
    }
    let root = libm::sqrt(disc);
    let big = 0.5 * (tr + tr.signum() * root);
    Ok((big, det / big))
}
