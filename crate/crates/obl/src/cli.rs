//! The `obl` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use obl_core::billiard::{iterate, LiftedPhasePoint, PhasePoint};
use obl_core::curve::closure_defect;
use obl_core::genericity::{break_degeneracy, select_perturbation_site, split_tangency, SiteReport};
use obl_core::manifolds::{find_intersections, grow_branch, BranchKind, Budget, HeteroclinicPoint};
use obl_core::regions::{build_instability_region, RegionOptions};
use obl_core::stability::{hyperbolic_eigenvalues, monodromy, sequential_scan, trace_decomposition};
use obl_core::variational::{find_orbits, SearchOptions};
use obl_core::{Oval, OvalSpec, PeriodicOrbit, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{
    emit, read_curve, read_json, to_json, BranchDocumentBody, CurveDocument, Document, IntersectionsBody,
    OrbitLibrary, OrbitRecord, Table,
};
use crate::svg::{PhasePlot, PALETTE};

#[derive(Debug, Parser)]
#[command(name = "obl", version, about = "Billiard maps, periodic orbits and invariant curves in convex tables")]
pub struct Cli {
    /// Curve spec JSON.
    #[arg(long, global = true)]
    pub curve: Option<PathBuf>,
    /// Output file; standard output when omitted (not for SVG).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance and budget configuration JSON.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    #[command(subcommand)]
    Oval(OvalCommand),
    #[command(subcommand)]
    Map(MapCommand),
    /// Phase portrait from random initial conditions.
    Portrait(PortraitArgs),
    #[command(subcommand)]
    Orbits(OrbitsCommand),
    #[command(subcommand)]
    Perturb(PerturbCommand),
    #[command(subcommand)]
    Manifold(ManifoldCommand),
    #[command(subcommand)]
    Tangle(TangleCommand),
    #[command(subcommand)]
    Region(RegionCommand),
}

#[derive(Debug, Subcommand)]
pub enum OvalCommand {
    /// Validate a curve and report its closure defect.
    Check,
}

#[derive(Debug, Subcommand)]
pub enum MapCommand {
    /// Iterate the map from one point and write the orbit as CSV.
    Iterate(IterateArgs),
}

#[derive(Debug, Args)]
pub struct IterateArgs {
    #[arg(long)]
    pub phi: f64,
    #[arg(long)]
    pub theta: f64,
    /// Number of steps; negative values iterate the inverse map.
    #[arg(long, allow_negative_numbers = true)]
    pub n: i64,
}

#[derive(Debug, Args)]
pub struct PortraitArgs {
    #[arg(long, default_value_t = 24)]
    pub samples: usize,
    #[arg(long, default_value_t = 600)]
    pub iters: usize,
    /// Points CSV; defaults to the SVG path with a `.csv` extension.
    #[arg(long)]
    pub points: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OrbitsCommand {
    /// Search for periodic orbits of rotation type m/n.
    Find(FindArgs),
    /// Stability report for the orbits of a library.
    Classify(ClassifyArgs),
}

#[derive(Debug, Args)]
pub struct FindArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub starts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub orbits: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PerturbCommand {
    /// Bump the curve at one vertex of a degenerate orbit.
    BreakDegeneracy(BreakArgs),
    /// Bump the curve at the bounce of a tangential intersection.
    SplitTangency(SplitArgs),
}

#[derive(Debug, Args)]
pub struct BreakArgs {
    #[arg(long)]
    pub orbits: PathBuf,
    #[arg(long)]
    pub orbit: usize,
    /// Second derivative of the bump in the tangent angle; chosen
    /// automatically when omitted.
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Experiment report; defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Intersections report or a single intersection point.
    #[arg(long)]
    pub tangle: PathBuf,
    /// Entry of the intersections report to use.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub h: f64,
    #[arg(long)]
    pub half_width: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ManifoldCommand {
    /// Grow one stable or unstable branch and write it as CSV.
    Grow(GrowArgs),
}

#[derive(Debug, Args)]
pub struct GrowArgs {
    #[arg(long)]
    pub orbits: PathBuf,
    #[arg(long)]
    pub orbit: usize,
    /// Index of the orbit point the branch is attached to.
    #[arg(long, default_value_t = 0)]
    pub point: usize,
    /// unstable+, unstable-, stable+ or stable-.
    #[arg(long, value_parser = parse_kind)]
    pub kind: BranchKind,
    /// Arclength budget.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Full branch document, needed by `tangle intersections`.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<BranchKind, String> {
    BranchKind::parse(s).ok_or_else(|| format!("unknown branch kind `{s}`"))
}

#[derive(Debug, Subcommand)]
pub enum TangleCommand {
    /// Crossings between two grown branches.
    Intersections(IntersectionArgs),
}

#[derive(Debug, Args)]
pub struct IntersectionArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Crossing angle below which a point is reported as tangential.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum RegionCommand {
    /// Instability region of a hyperbolic orbit, with its islands.
    Build(RegionArgs),
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long)]
    pub orbits: PathBuf,
    #[arg(long)]
    pub orbit: usize,
    /// Arclength budget per unstable branch.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

/// Contents of `--config`; every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Accepted for symmetry with the other documents.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    pub tolerances: Tolerances,
    pub budget: Budget,
    pub region: RegionOptions,
}

struct Context {
    curve: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: u64,
    config: Config,
}

impl Context {
    fn spec(&self) -> CliResult<OvalSpec> {
        let path = self
            .curve
            .as_deref()
            .ok_or_else(|| CliError::Validation("--curve is required".into()))?;
        read_curve(path)
    }

    fn oval(&self) -> CliResult<Oval> {
        Oval::with_tolerances(self.spec()?, &self.config.tolerances).map_err(|e| CliError::core("curve validation", e))
    }

    fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    fn required_out(&self, what: &str) -> CliResult<&Path> {
        self.out()
            .ok_or_else(|| CliError::Validation(format!("--out is required for {what}")))
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("obl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(path) => read_json(path)?,
        None => Config::default(),
    };
    let ctx = Context {
        curve: cli.curve,
        out: cli.out,
        seed: cli.seed,
        config,
    };
    match &cli.command {
        Command::Oval(OvalCommand::Check) => oval_check(&ctx),
        Command::Map(MapCommand::Iterate(a)) => map_iterate(&ctx, a),
        Command::Portrait(a) => portrait(&ctx, a),
        Command::Orbits(OrbitsCommand::Find(a)) => orbits_find(&ctx, a),
        Command::Orbits(OrbitsCommand::Classify(a)) => orbits_classify(&ctx, a),
        Command::Perturb(PerturbCommand::BreakDegeneracy(a)) => perturb_break(&ctx, a),
        Command::Perturb(PerturbCommand::SplitTangency(a)) => perturb_split(&ctx, a),
        Command::Manifold(ManifoldCommand::Grow(a)) => manifold_grow(&ctx, a),
        Command::Tangle(TangleCommand::Intersections(a)) => tangle_intersections(&ctx, a),
        Command::Region(RegionCommand::Build(a)) => region_build(&ctx, a),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub valid: bool,
    pub error: Option<String>,
    pub closure_defect: f64,
    /// Smallest radius of curvature on a uniform tangent-angle grid.
    pub min_radius: Option<f64>,
    pub curve: OvalSpec,
}

fn oval_check(ctx: &Context) -> CliResult<()> {
    let spec = ctx.spec()?;
    let defect = closure_defect(&spec).norm();
    let result = Oval::with_tolerances(spec.clone(), &ctx.config.tolerances);
    let min_radius = result.as_ref().ok().map(|oval| {
        (0..4096)
            .map(|i| oval.radius(std::f64::consts::TAU * i as f64 / 4096.0))
            .fold(f64::INFINITY, f64::min)
    });
    let report = CheckReport {
        valid: result.is_ok(),
        error: result.as_ref().err().map(|e| e.to_string()),
        closure_defect: defect,
        min_radius,
        curve: spec,
    };
    emit(ctx.out(), &to_json(&Document::new("oval_check", report)))?;
    result.map(|_| ()).map_err(|e| CliError::core("curve validation", e))
}

fn map_iterate(ctx: &Context, a: &IterateArgs) -> CliResult<()> {
    let oval = ctx.oval()?;
    let points = iterate(&oval, LiftedPhasePoint::new(a.phi, a.theta), a.n).map_err(|e| CliError::core("map iterate", e))?;
    let mut table = Table::new(&["step", "phi_lifted", "phi_mod", "theta"])?;
    let sign = if a.n < 0 { -1 } else { 1 };
    for (k, p) in points.iter().enumerate() {
        table.row(&[sign * k as i64], &[p.phi, p.project().phi, p.theta])?;
    }
    emit(ctx.out(), &table.finish()?)
}

fn portrait(ctx: &Context, a: &PortraitArgs) -> CliResult<()> {
    let oval = ctx.oval()?;
    let svg_path = ctx.required_out("portrait")?;
    let points_path = a.points.clone().unwrap_or_else(|| svg_path.with_extension("csv"));
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut table = Table::new(&["sample", "step", "phi", "theta"])?;
    let mut plot = PhasePlot::new(900.0, 480.0);
    for s in 0..a.samples {
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let theta = rng.random_range(0.05..0.95) * std::f64::consts::PI;
        let mut orbit = vec![PhasePoint::new(phi, theta)];
        let mut p = LiftedPhasePoint::new(phi, theta);
        for _ in 0..a.iters {
            match obl_core::billiard::forward_lifted(&oval, p) {
                Ok(q) => {
                    p = q;
                    orbit.push(q.project());
                }
                Err(_) => break,
            }
        }
        for (k, q) in orbit.iter().enumerate() {
            table.row(&[s as i64, k as i64], &[q.phi, q.theta])?;
        }
        plot.dots(&orbit, PALETTE[s % PALETTE.len()], 0.8);
    }
    emit(Some(&points_path), &table.finish()?)?;
    emit(Some(svg_path), &plot.finish("phase portrait"))
}

fn orbits_find(ctx: &Context, a: &FindArgs) -> CliResult<()> {
    let oval = ctx.oval()?;
    let options = SearchOptions {
        starts: a.starts,
        seed: ctx.seed,
        tolerance: None,
    };
    let report = find_orbits(&oval, a.m, a.n, &options).map_err(|e| CliError::core("orbits find", e))?;
    let orbits = report
        .points
        .iter()
        .enumerate()
        .map(|(id, p)| OrbitRecord {
            id,
            action: Some(p.action),
            gradient_norm: Some(p.gradient_norm),
            hessian_signature: Some(p.hessian_signature),
            is_minimum: Some(p.is_minimum()),
            nondegenerate: Some(p.nondegenerate),
            repetition_of: p.repetition_of,
            config: Some(p.config.clone()),
            orbit: p.orbit.clone(),
        })
        .collect();
    let library = OrbitLibrary {
        curve: oval.spec().clone(),
        m: a.m,
        n: a.n,
        starts: report.starts,
        converged: report.converged,
        rejected: report.rejected,
        orbits,
    };
    emit(ctx.out(), &to_json(&Document::new("orbit_library", library)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteDecomposition {
    pub site: usize,
    pub x: f64,
    pub b: f64,
    pub c: f64,
    pub residual: f64,
    pub reconstructed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitClassification {
    pub id: usize,
    pub m: usize,
    pub n: usize,
    pub trace: f64,
    /// Trace of the monodromy recomputed on the given curve.
    pub trace_recomputed: Option<f64>,
    pub class: obl_core::OrbitClass,
    pub eigenvalues: Option<(f64, f64)>,
    pub decompositions: Vec<SiteDecomposition>,
    pub decomposition_errors: Vec<String>,
    /// `(k, b_k, c_k)` of the sequential elimination.
    pub scan: Vec<(usize, f64, f64)>,
    pub fallback_trace: f64,
    pub selected_site: SiteReport,
}

pub fn classify(oval: Option<&Oval>, id: usize, orbit: &PeriodicOrbit, threshold: f64) -> OrbitClassification {
    let mut decompositions = Vec::new();
    let mut errors = Vec::new();
    for site in 0..orbit.n {
        match trace_decomposition(orbit, site, threshold) {
            Ok(d) => {
                let x = orbit.vertices[site].x;
                decompositions.push(SiteDecomposition {
                    site,
                    x,
                    b: d.b,
                    c: d.c,
                    residual: d.residual,
                    reconstructed: d.evaluate(x),
                });
            }
            Err(e) => errors.push(format!("site {site}: {e}")),
        }
    }
    let scan = sequential_scan(orbit, threshold);
    OrbitClassification {
        id,
        m: orbit.m,
        n: orbit.n,
        trace: orbit.trace,
        trace_recomputed: oval.and_then(|o| monodromy(o, orbit).ok()).map(|m| m.trace()),
        class: orbit.class,
        eigenvalues: hyperbolic_eigenvalues(&orbit.monodromy).ok(),
        decompositions,
        decomposition_errors: errors,
        scan: scan.coefficients,
        fallback_trace: scan.fallback_trace,
        selected_site: select_perturbation_site(orbit, threshold),
    }
}

fn orbits_classify(ctx: &Context, a: &ClassifyArgs) -> CliResult<()> {
    let library: OrbitLibrary = read_json(&a.orbits)?;
    let oval = match &ctx.curve {
        Some(_) => ctx.oval()?,
        None => Oval::with_tolerances(library.curve.clone(), &ctx.config.tolerances)
            .map_err(|e| CliError::core("curve validation", e))?,
    };
    let threshold = ctx.config.tolerances.decomposition_threshold;
    let orbits: Vec<OrbitClassification> = library
        .orbits
        .iter()
        .map(|r| classify(Some(&oval), r.id, &r.orbit, threshold))
        .collect();
    #[derive(Serialize)]
    struct Body {
        orbits: Vec<OrbitClassification>,
    }
    emit(ctx.out(), &to_json(&Document::new("classification", Body { orbits })))
}

fn report_path(explicit: &Option<PathBuf>, out: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| out.with_extension("report.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakReport {
    pub orbit: usize,
    pub site: usize,
    pub b: f64,
    pub c: f64,
    pub fallback: bool,
    pub h: f64,
    pub bump: obl_core::NormalBump,
    pub trace_before: f64,
    pub trace_predicted: f64,
    pub trace_predicted_first_order: f64,
    pub trace_measured: f64,
    pub closure_error: f64,
}

fn perturb_break(ctx: &Context, a: &BreakArgs) -> CliResult<()> {
    let oval = ctx.oval()?;
    let out = ctx.required_out("perturb break-degeneracy")?;
    let library: OrbitLibrary = read_json(&a.orbits)?;
    let orbit = &library.get(a.orbit)?.orbit;
    let threshold = ctx.config.tolerances.decomposition_threshold;
    let r = break_degeneracy(&oval, orbit, a.h, threshold).map_err(|e| CliError::core("break degeneracy", e))?;
    let report = BreakReport {
        orbit: a.orbit,
        site: r.site,
        b: r.b,
        c: r.c,
        fallback: r.fallback,
        h: r.h,
        bump: r.bump,
        trace_before: r.trace_before,
        trace_predicted: r.trace_predicted,
        trace_predicted_first_order: r.trace_predicted_first_order,
        trace_measured: r.trace_measured,
        closure_error: r.closure_error,
    };
    emit(Some(out), &to_json(&CurveDocument::new(r.spec)))?;
    emit(Some(&report_path(&a.report, out)), &to_json(&Document::new("break_degeneracy", report)))
}

fn load_tangency(path: &Path, index: usize) -> CliResult<HeteroclinicPoint> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("points").is_some() {
        let doc: Document<IntersectionsBody> = read_json(path)?;
        doc.body
            .points
            .get(index)
            .cloned()
            .ok_or_else(|| CliError::Validation(format!("{}: no intersection {index}", path.display())))
    } else {
        read_json(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub h: f64,
    pub bump: obl_core::NormalBump,
    pub r0: f64,
    pub theta0: f64,
    pub slope: f64,
    pub predicted_unstable_slope: f64,
    pub predicted_stable_slope: f64,
    pub predicted_gap: f64,
    pub footprints: Vec<f64>,
}

fn perturb_split(ctx: &Context, a: &SplitArgs) -> CliResult<()> {
    let oval = ctx.oval()?;
    let out = ctx.required_out("perturb split-tangency")?;
    let tangency = load_tangency(&a.tangle, a.index)?;
    let s = split_tangency(&oval, &tangency, a.h, a.half_width).map_err(|e| CliError::core("split tangency", e))?;
    let report = SplitReport {
        h: s.h,
        bump: s.bump,
        r0: s.r0,
        theta0: s.theta0,
        slope: s.slope,
        predicted_unstable_slope: s.predicted_unstable_slope,
        predicted_stable_slope: s.predicted_stable_slope,
        predicted_gap: s.predicted_gap(),
        footprints: s.footprints.clone(),
    };
    emit(Some(out), &to_json(&CurveDocument::new(s.spec)))?;
    emit(Some(&report_path(&a.report, out)), &to_json(&Document::new("split_tangency", report)))
}

fn manifold_grow(ctx: &Context, a: &GrowArgs) -> CliResult<()> {
    let oval = ctx.oval()?;
    let library: OrbitLibrary = read_json(&a.orbits)?;
    let orbit = &library.get(a.orbit)?.orbit;
    let mut budget = ctx.config.budget;
    if let Some(l) = a.budget {
        budget.max_arclength = l;
    }
    let branch = grow_branch(&oval, orbit, a.point, a.kind, &budget).map_err(|e| CliError::core("manifold grow", e))?;
    let mut table = Table::new(&["arc", "phi_lifted", "theta"])?;
    for p in &branch.points {
        table.row(&[], &[p.arc, p.point.phi, p.point.theta])?;
    }
    emit(ctx.out(), &table.finish()?)?;
    if let Some(path) = &a.json {
        let body = BranchDocumentBody {
            curve: oval.spec().clone(),
            branch,
        };
        emit(Some(path), &to_json(&Document::new("manifold_branch", body)))?;
    }
    Ok(())
}

fn tangle_intersections(ctx: &Context, a: &IntersectionArgs) -> CliResult<()> {
    let da: Document<BranchDocumentBody> = read_json(&a.a)?;
    let db: Document<BranchDocumentBody> = read_json(&a.b)?;
    if da.body.curve != db.body.curve {
        return Err(CliError::Validation("the two branches were grown on different curves".into()));
    }
    let oval = match &ctx.curve {
        Some(_) => ctx.oval()?,
        None => Oval::with_tolerances(da.body.curve.clone(), &ctx.config.tolerances)
            .map_err(|e| CliError::core("curve validation", e))?,
    };
    let threshold = a.threshold.unwrap_or(ctx.config.tolerances.tangency_angle);
    let points = find_intersections(&oval, &da.body.branch, &db.body.branch, threshold);
    let body = IntersectionsBody {
        threshold,
        count: points.len(),
        points,
    };
    emit(ctx.out(), &to_json(&Document::new("intersections", body)))
}

fn region_build(ctx: &Context, a: &RegionArgs) -> CliResult<()> {
    let oval = ctx.oval()?;
    let library: OrbitLibrary = read_json(&a.orbits)?;
    let orbit = &library.get(a.orbit)?.orbit;
    let mut options = ctx.config.region;
    options.seed = ctx.seed;
    if let Some(l) = a.budget {
        options.budget.max_arclength = l;
    }
    if let Some(b) = a.bins {
        options.bins = b;
        options.theta_cells = b;
    }
    let region = build_instability_region(&oval, orbit, &options).map_err(|e| CliError::core("region build", e))?;
    if let Some(path) = &a.svg {
        let mut plot = PhasePlot::new(900.0, 480.0);
        let (bins, rows) = (region.grid.bins, region.grid.cells);
        plot.cells(&region.manifold_cells, bins, rows, "#777777", 0.5);
        for (k, isl) in region.islands.iter().enumerate() {
            plot.cells(&isl.cells, bins, rows, PALETTE[k % PALETTE.len()], 0.6);
        }
        for env in [&region.lower, &region.upper] {
            let pts: Vec<PhasePoint> = (0..bins)
                .map(|i| PhasePoint::new(std::f64::consts::TAU * (i as f64 + 0.5) / bins as f64, env.value(i)))
                .collect();
            plot.curve(&pts, "#000000", 1.2);
        }
        plot.dots(&region.source_orbit, "#d62728", 3.0);
        emit(Some(path), &plot.finish("instability region"))?;
    }
    emit(ctx.out(), &to_json(&Document::new("instability_region", region)))
}
