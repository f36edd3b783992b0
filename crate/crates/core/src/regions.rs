//! Rotation numbers, rotational invariant curves, instability regions and
//! their islands.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::billiard::{forward_lifted, LiftedPhasePoint, PhasePoint};
use crate::curve::Oval;
use crate::manifolds::{grow_branch, BranchKind, Budget, ManifoldBranch};
use crate::math::{gcd, wrap_tau};
use crate::stability::PeriodicOrbit;
use crate::variational::{find_orbits, SearchOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RotationEstimate {
    /// In `[0, 1)`.
    pub value: f64,
    pub iterations: usize,
    /// Largest deviation of the running estimate over the second half of
    /// the run.
    pub error: f64,
}

/// `(phi_N - phi_0) / (2 pi N)` on the lift.
pub fn rotation_number(oval: &Oval, p: PhasePoint, iterations: usize) -> Result<RotationEstimate> {
    if iterations < 100 {
        return Err(Error::InvalidInput("rotation number needs at least 100 iterations".into()));
    }
    let start = p.lift();
    let mut q = start;
    let mut running = Vec::with_capacity(iterations);
    for step in 0..iterations {
        q = forward_lifted(oval, q).map_err(|e| e.at_step(step as i64))?;
        running.push((q.phi - start.phi) / (TAU * (step + 1) as f64));
    }
    let value = running[iterations - 1];
    let error = running[iterations / 2..]
        .iter()
        .map(|r| (r - value).abs())
        .fold(0.0, f64::max);
    Ok(RotationEstimate {
        value: value - libm::floor(value),
        iterations,
        error,
    })
}

/// A binned orbit closure that passed the graph tests.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RicCandidate {
    /// Mean `theta` per `phi` bin.
    pub theta: Vec<f64>,
    /// `max - min` of `theta` per bin.
    pub spread: Vec<f64>,
    pub lipschitz_estimate: f64,
    pub rotation: Option<RotationEstimate>,
    /// Some bin straddles `theta = pi/2`.
    pub crosses_midline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Coverage {
    pub bins: usize,
    pub min_count: usize,
    /// Bins holding at least the required number of samples.
    pub covered: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RicDetection {
    pub candidate: Option<RicCandidate>,
    pub coverage: Coverage,
    /// Why no candidate was produced, when none was.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RicOptions {
    pub bins: usize,
    /// Samples required in every bin.
    pub min_per_bin: usize,
    /// Largest admissible `theta` spread inside one bin.
    pub gap: f64,
    /// Largest admissible Lipschitz estimate.
    pub max_lipschitz: f64,
}

impl Default for RicOptions {
    fn default() -> Self {
        Self {
            bins: 256,
            min_per_bin: 5,
            gap: 0.1,
            max_lipschitz: 50.0,
        }
    }
}

fn bin_of(phi: f64, bins: usize) -> usize {
    ((wrap_tau(phi) / TAU * bins as f64) as usize).min(bins - 1)
}

/// Graph tests on a finite sample of an orbit closure.
pub fn ric_from_samples(samples: &[PhasePoint], options: &RicOptions) -> RicDetection {
    let bins = options.bins.max(1);
    let mut lo = alloc::vec![f64::INFINITY; bins];
    let mut hi = alloc::vec![f64::NEG_INFINITY; bins];
    let mut sum = alloc::vec![0.0; bins];
    let mut count = alloc::vec![0usize; bins];
    for p in samples {
        let b = bin_of(p.phi, bins);
        lo[b] = lo[b].min(p.theta);
        hi[b] = hi[b].max(p.theta);
        sum[b] += p.theta;
        count[b] += 1;
    }
    let covered = count.iter().filter(|&&c| c >= options.min_per_bin).count();
    let coverage = Coverage {
        bins,
        min_count: count.iter().copied().min().unwrap_or(0),
        covered,
    };
    let none = |reason: String| RicDetection {
        candidate: None,
        coverage,
        reason: Some(reason),
    };
    if covered < bins {
        return none(alloc::format!("only {covered} of {bins} bins hold {} samples", options.min_per_bin));
    }
    let spread: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
    let worst = spread.iter().copied().fold(0.0, f64::max);
    if worst > options.gap {
        return none(alloc::format!("bin spread {worst:.3e} exceeds gap {:.3e}", options.gap));
    }
    let theta: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let width = TAU / bins as f64;
    let lipschitz = (0..bins)
        .map(|i| (theta[(i + 1) % bins] - theta[i]).abs() / width)
        .fold(0.0, f64::max);
    if !(lipschitz <= options.max_lipschitz) {
        return none(alloc::format!("Lipschitz estimate {lipschitz:.3e} too large"));
    }
    let crosses_midline = lo.iter().zip(&hi).any(|(l, h)| *l <= FRAC_PI_2 && FRAC_PI_2 <= *h);
    RicDetection {
        candidate: Some(RicCandidate {
            theta,
            spread,
            lipschitz_estimate: lipschitz,
            rotation: None,
            crosses_midline,
        }),
        coverage,
        reason: None,
    }
}

/// Follows the orbit of `p` for `iterations` steps and tests whether its
/// closure looks like a rotational invariant curve.
pub fn detect_ric(oval: &Oval, p: PhasePoint, iterations: usize, options: &RicOptions) -> Result<RicDetection> {
    let mut samples = Vec::with_capacity(iterations + 1);
    let start = p.lift();
    let mut q = start;
    samples.push(p);
    for step in 0..iterations {
        q = forward_lifted(oval, q).map_err(|e| e.at_step(step as i64))?;
        samples.push(q.project());
    }
    let mut detection = ric_from_samples(&samples, options);
    if let Some(c) = detection.candidate.as_mut() {
        let value = (q.phi - start.phi) / (TAU * iterations as f64);
        c.rotation = Some(RotationEstimate {
            value: value - libm::floor(value),
            iterations,
            error: 1.0 / iterations as f64,
        });
    }
    Ok(detection)
}

/// One side of the region: a binned graph or a boundary circle.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Envelope {
    Graph { theta: Vec<f64> },
    /// `theta = 0`.
    B0,
    /// `theta = pi`.
    BPi,
}

impl Envelope {
    pub fn value(&self, bin: usize) -> f64 {
        match self {
            Envelope::Graph { theta } => theta[bin],
            Envelope::B0 => 0.0,
            Envelope::BPi => PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RegionOptions {
    pub bins: usize,
    pub theta_cells: usize,
    /// Budget for each unstable branch.
    pub budget: Budget,
    /// Envelopes closer than this to `0` or `pi` become boundary circles.
    pub boundary_tolerance: f64,
    /// Components smaller than this are speckle.
    pub min_island_cells: usize,
    pub samples: usize,
    pub rotation_iterations: usize,
    pub max_period: usize,
    pub seed: u64,
    /// Run the periodic-orbit search inside every island.
    pub locate_centers: bool,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            bins: 512,
            theta_cells: 512,
            budget: Budget {
                max_points: 400_000,
                max_arclength: 40.0,
                ..Budget::default()
            },
            boundary_tolerance: 1e-3,
            min_island_cells: 10,
            samples: 10,
            rotation_iterations: 3000,
            max_period: 30,
            seed: 0,
            locate_centers: true,
        }
    }
}

/// A `phi x theta` cell raster; `phi` wraps.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub bins: usize,
    pub cells: usize,
}

impl Grid {
    pub fn cell(&self, p: PhasePoint) -> (usize, usize) {
        let j = ((p.theta / PI * self.cells as f64) as usize).min(self.cells - 1);
        (bin_of(p.phi, self.bins), j)
    }

    pub fn center(&self, i: usize, j: usize) -> PhasePoint {
        PhasePoint::new(
            TAU * (i as f64 + 0.5) / self.bins as f64,
            PI * (j as f64 + 0.5) / self.cells as f64,
        )
    }

    fn index(&self, i: usize, j: usize) -> usize {
        i * self.cells + j
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Island {
    /// `(phi bin, theta cell)` pairs.
    pub cells: Vec<(u32, u32)>,
    pub period: usize,
    /// `(m, n)` with `n` equal to the period.
    pub rotation_type: (usize, usize),
    pub center_orbit: Option<PeriodicOrbit>,
    /// Rotation estimates of the random interior samples.
    pub sample_rotations: Vec<f64>,
    /// Every sample agrees with `m / n` to within `1 / iterations`.
    pub samples_agree: bool,
    pub notes: Vec<String>,
}

impl Island {
    pub fn area(&self) -> usize {
        self.cells.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstabilityRegion {
    pub grid: Grid,
    pub lower: Envelope,
    pub upper: Envelope,
    pub islands: Vec<Island>,
    /// Complement components below the island size threshold.
    pub speckle: usize,
    /// Complement components with no detectable return period.
    pub unresolved: usize,
    pub source_orbit: Vec<PhasePoint>,
    pub rotation: (usize, usize),
    /// Arclength grown per branch.
    pub arclength_budget: f64,
    /// Cells touched by the unstable branches.
    pub manifold_cells: Vec<(u32, u32)>,
}

impl InstabilityRegion {
    /// True when `theta` lies between the envelopes at `phi`, with `slack`.
    pub fn contains(&self, p: PhasePoint, slack: f64) -> bool {
        let b = bin_of(p.phi, self.grid.bins);
        self.lower.value(b) - slack <= p.theta && p.theta <= self.upper.value(b) + slack
    }
}

/// Grows every unstable branch of every point of `orbit`.
pub fn unstable_branches(oval: &Oval, orbit: &PeriodicOrbit, budget: &Budget) -> Result<Vec<ManifoldBranch>> {
    let mut out = Vec::with_capacity(2 * orbit.n);
    for i in 0..orbit.n {
        for kind in [BranchKind::UnstablePlus, BranchKind::UnstableMinus] {
            out.push(grow_branch(oval, orbit, i, kind, budget)?);
        }
    }
    Ok(out)
}

/// Region between the per-bin infimum and supremum of the unstable curves
/// of a hyperbolic orbit, with its islands.
pub fn build_instability_region(oval: &Oval, orbit: &PeriodicOrbit, options: &RegionOptions) -> Result<InstabilityRegion> {
    let branches = unstable_branches(oval, orbit, &options.budget)?;
    let mut region = region_from_branches(orbit, &branches, options)?;
    let comps = components(&region);
    region.islands = analyze_islands(oval, &region, &comps, options);
    region.speckle = comps.iter().filter(|c| c.len() < options.min_island_cells).count();
    region.unresolved = comps.len() - region.speckle - region.islands.len();
    Ok(region)
}

/// Envelopes and manifold raster from already grown branches.
pub fn region_from_branches(
    orbit: &PeriodicOrbit,
    branches: &[ManifoldBranch],
    options: &RegionOptions,
) -> Result<InstabilityRegion> {
    let grid = Grid {
        bins: options.bins,
        cells: options.theta_cells,
    };
    let mut lo = alloc::vec![f64::INFINITY; grid.bins];
    let mut hi = alloc::vec![f64::NEG_INFINITY; grid.bins];
    let mut touched = alloc::vec![false; grid.bins * grid.cells];
    let mut mark = |p: PhasePoint, lo: &mut [f64], hi: &mut [f64]| {
        let (i, j) = grid.cell(p);
        lo[i] = lo[i].min(p.theta);
        hi[i] = hi[i].max(p.theta);
        touched[grid.index(i, j)] = true;
    };
    for p in orbit.phase_points() {
        mark(p, &mut lo, &mut hi);
    }
    for br in branches {
        for w in br.points.windows(2) {
            let (a, b) = (w[0].point, w[1].point);
            // Sample each segment finely enough to visit every cell it crosses.
            let dphi = (b.phi - a.phi).abs() * grid.bins as f64 / TAU;
            let dtheta = (b.theta - a.theta).abs() * grid.cells as f64 / PI;
            let steps = libm::ceil(2.0 * (dphi + dtheta)).max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let p = PhasePoint::new(a.phi + t * (b.phi - a.phi), a.theta + t * (b.theta - a.theta));
                mark(p, &mut lo, &mut hi);
            }
        }
    }
    let covered = lo.iter().filter(|v| v.is_finite()).count();
    if covered < grid.bins {
        return Err(Error::CoverageFailure { covered, bins: grid.bins });
    }
    let lower = if lo.iter().copied().fold(PI, f64::min) < options.boundary_tolerance {
        Envelope::B0
    } else {
        Envelope::Graph { theta: lo }
    };
    let upper = if hi.iter().copied().fold(0.0, f64::max) > PI - options.boundary_tolerance {
        Envelope::BPi
    } else {
        Envelope::Graph { theta: hi }
    };
    let manifold_cells = (0..grid.bins)
        .flat_map(|i| (0..grid.cells).map(move |j| (i, j)))
        .filter(|&(i, j)| touched[grid.index(i, j)])
        .map(|(i, j)| (i as u32, j as u32))
        .collect();
    Ok(InstabilityRegion {
        grid,
        lower,
        upper,
        islands: Vec::new(),
        speckle: 0,
        unresolved: 0,
        source_orbit: orbit.phase_points(),
        rotation: (orbit.m, orbit.n),
        arclength_budget: options.budget.max_arclength,
        manifold_cells,
    })
}

/// Connected components of untouched cells between the envelopes, with
/// `phi` wrapping around.
pub fn components(region: &InstabilityRegion) -> Vec<Vec<(u32, u32)>> {
    let grid = &region.grid;
    let mut blocked = alloc::vec![false; grid.bins * grid.cells];
    for &(i, j) in &region.manifold_cells {
        blocked[grid.index(i as usize, j as usize)] = true;
    }
    for i in 0..grid.bins {
        for j in 0..grid.cells {
            let c = grid.center(i, j);
            if !(region.lower.value(i) <= c.theta && c.theta <= region.upper.value(i)) {
                blocked[grid.index(i, j)] = true;
            }
        }
    }
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..blocked.len() {
        if blocked[start] {
            continue;
        }
        blocked[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k / grid.cells, k % grid.cells);
            cells.push((i as u32, j as u32));
            let left = (i + grid.bins - 1) % grid.bins;
            let right = (i + 1) % grid.bins;
            let mut next = [Some(grid.index(left, j)), Some(grid.index(right, j)), None, None];
            if j > 0 {
                next[2] = Some(grid.index(i, j - 1));
            }
            if j + 1 < grid.cells {
                next[3] = Some(grid.index(i, j + 1));
            }
            for n in next.into_iter().flatten() {
                if !blocked[n] {
                    blocked[n] = true;
                    queue.push_back(n);
                }
            }
        }
        out.push(cells);
    }
    out
}

/// Period, rotation type, center orbit and sample agreement for each
/// complement component large enough to be an island.
pub fn analyze_islands(
    oval: &Oval,
    region: &InstabilityRegion,
    comps: &[Vec<(u32, u32)>],
    options: &RegionOptions,
) -> Vec<Island> {
    let grid = &region.grid;
    let mut label = alloc::vec![usize::MAX; grid.bins * grid.cells];
    for (c, cells) in comps.iter().enumerate() {
        for &(i, j) in cells {
            label[grid.index(i as usize, j as usize)] = c;
        }
    }
    let label_of = |p: PhasePoint| {
        let (i, j) = grid.cell(p);
        label[grid.index(i, j)]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut islands = Vec::new();
    for (c, cells) in comps.iter().enumerate() {
        if cells.len() < options.min_island_cells {
            continue;
        }
        let Some((period, m)) = return_period(oval, grid, cells, c, &label_of, options.max_period) else {
            continue;
        };
        let mut notes = Vec::new();
        if period < 2 {
            notes.push(String::from("period 1 component"));
        }
        let g = gcd(m, period).max(1);
        if g > 1 {
            notes.push(alloc::format!("rotation type {m}/{period} is not reduced"));
        }

        let n_iter = (options.rotation_iterations / period).max(1) * period;
        let mut sample_rotations = Vec::with_capacity(options.samples);
        let target = m as f64 / period as f64;
        let mut agree = true;
        for _ in 0..options.samples {
            let (i, j) = cells[rng.random_range(0..cells.len())];
            let center = grid.center(i as usize, j as usize);
            let p = PhasePoint::new(
                center.phi + (rng.random::<f64>() - 0.5) * TAU / grid.bins as f64,
                center.theta + (rng.random::<f64>() - 0.5) * PI / grid.cells as f64,
            );
            match rotation_number(oval, p, n_iter.max(100)) {
                Ok(r) => {
                    let v = if r.value > target + 0.5 { r.value - 1.0 } else { r.value };
                    sample_rotations.push(r.value);
                    if (v - target).abs() > 1.0 / n_iter.max(100) as f64 {
                        agree = false;
                    }
                }
                Err(_) => agree = false,
            }
        }
        if !agree {
            notes.push(String::from("interior samples disagree on the rotation type"));
        }

        let mut center_orbit = None;
        if options.locate_centers && period >= 2 {
            let search = SearchOptions {
                starts: Some(8 * period),
                seed: options.seed,
                tolerance: None,
            };
            if let Ok(report) = find_orbits(oval, m, period, &search) {
                center_orbit = report
                    .orbits()
                    .find(|o| o.phase_points().iter().any(|p| label_of(*p) == c))
                    .cloned();
            }
            match &center_orbit {
                None => notes.push(String::from("no periodic orbit located inside")),
                Some(o) if o.n % period != 0 => notes.push(String::from("center period is not a multiple of the island period")),
                _ => {}
            }
        }
        islands.push(Island {
            cells: cells.clone(),
            period,
            rotation_type: (m, period),
            center_orbit,
            sample_rotations,
            samples_agree: agree,
            notes,
        });
    }
    islands
}

/// Least `k` for which most sampled cell centers return to the component
/// after `k` steps, with the lift winding `m` over those steps.
fn return_period(
    oval: &Oval,
    grid: &Grid,
    cells: &[(u32, u32)],
    label: usize,
    label_of: &dyn Fn(PhasePoint) -> usize,
    max_period: usize,
) -> Option<(usize, usize)> {
    let stride = (cells.len() / 32).max(1);
    let starts: Vec<LiftedPhasePoint> = cells
        .iter()
        .step_by(stride)
        .map(|&(i, j)| grid.center(i as usize, j as usize).lift())
        .collect();
    let mut current = starts.clone();
    for k in 1..=max_period {
        let mut back = 0;
        let mut alive = 0;
        for p in current.iter_mut() {
            if let Ok(q) = forward_lifted(oval, *p) {
                *p = q;
                alive += 1;
                if label_of(q.project()) == label {
                    back += 1;
                }
            }
        }
        if alive > 0 && back * 10 >= current.len() * 9 {
            let mut windings: Vec<f64> = current
                .iter()
                .zip(&starts)
                .map(|(q, s)| (q.phi - s.phi) / TAU)
                .collect();
            windings.sort_by(f64::total_cmp);
            let m = libm::round(windings[windings.len() / 2]).max(0.0) as usize;
            return Some((k, m));
        }
    }
    None
}
