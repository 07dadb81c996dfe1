//! The subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use levytopic::corpus::{CorpusError, TokenStream};
use levytopic::flow::{
    fit_trajectory, flow_curve_with, lda_seed, limit_region_from_fits, mahalanobis_contains,
    prepare_stream, sim_seed, FlowCurve, FlowError, FlowOptions, FlowPoint, GaussianRegion,
    ScaleProvenance, DEBATE_LIMIT_CENTROID, PHILOSOPHY_LIMIT_CENTROID,
};
use levytopic::inference::{FitDiagnostics, FitResult};
use levytopic::levy::{density_grid, simulate_trajectory};
use levytopic::rng::{derive_seed, SimRng};
use levytopic::simplex::{AlphaVector, LevyParams, SimplexPoint};
use levytopic::trees::{average_depth, depth_distribution, nesting_fraction, ols_regression};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::TrajectoryCache;
use crate::config::{RunConfig, SourceConfig, SourceKind};
use crate::error::CliError;
use crate::output::Output;
use crate::recovery::run_recovery;
use crate::sources::{load_stream, load_tree};
use crate::svg;

/// Flag overrides shared by the subcommands.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub strict: bool,
    pub null: bool,
    pub error_weighted: bool,
    pub recovery: bool,
    pub k_list: Vec<usize>,
}

#[derive(Debug, Default)]
pub struct Summary {
    pub warnings: Vec<String>,
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub written: Vec<std::path::PathBuf>,
}

impl Summary {
    fn finish(mut self, out: &Output, strict: bool) -> Result<Summary, CliError> {
        self.written = out.written();
        for w in &self.warnings {
            log::warn!("{w}");
        }
        if strict && !self.warnings.is_empty() {
            return Err(CliError::Strict(self.warnings.len()));
        }
        Ok(self)
    }
}

/// FitResult artifact (`fit.json`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub source: String,
    pub k: usize,
    pub mu_hat: f64,
    pub sigma_hat: f64,
    pub sd_mu: f64,
    pub sd_sigma: f64,
    pub lambda_median: f64,
    pub lambda_q15: f64,
    pub lambda_q85: f64,
    pub diagnostics: FitDiagnostics,
    pub provenance: ScaleProvenance,
}

impl FitRecord {
    pub fn new(source: &str, k: usize, fit: &FitResult, provenance: ScaleProvenance) -> Self {
        let l = fit.lambda_range();
        FitRecord {
            source: source.to_string(),
            k,
            mu_hat: fit.mu_hat,
            sigma_hat: fit.sigma_hat,
            sd_mu: fit.sd_mu,
            sd_sigma: fit.sd_sigma,
            lambda_median: l.median,
            lambda_q15: l.q15,
            lambda_q85: l.q85,
            diagnostics: fit.diagnostics.clone(),
            provenance,
        }
    }
}

#[derive(Serialize)]
struct LambdaRecord<'a> {
    source: &'a str,
    k: usize,
    median: f64,
    q15: f64,
    q85: f64,
}

fn fit_dir(source: &str, k: usize) -> String {
    format!("fit/{source}/k{k}")
}

fn fit_warnings(source: &str, k: usize, d: &FitDiagnostics, p: &ScaleProvenance) -> Vec<String> {
    let mut w = Vec::new();
    if d.boundary_hit {
        w.push(format!(
            "{source} k={k}: posterior maximum on the grid boundary"
        ));
    }
    if !p.alpha_converged {
        w.push(format!(
            "{source} k={k}: stationary Dirichlet fit did not converge"
        ));
    }
    w
}

fn require_sources(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.sources.is_empty() {
        return Err(CliError::Config("no [[sources]] configured".into()));
    }
    Ok(())
}

fn load_prepared(cfg: &RunConfig, srcs: &[&SourceConfig]) -> Result<Vec<TokenStream>, CliError> {
    let pipeline = cfg.pipeline();
    srcs.iter()
        .map(|s| Ok(prepare_stream(&load_stream(s, cfg)?, &pipeline)))
        .collect()
}

enum FitOutcome {
    Done(Box<FitRecord>),
    Skipped(String),
}

/// Full pipeline for one `(source, k)`, writing its artifacts.
fn fit_one(
    cfg: &RunConfig,
    out: &Output,
    cache: &TrajectoryCache,
    prepared: &TokenStream,
    k: usize,
    seed: u64,
) -> Result<FitOutcome, CliError> {
    let id = &prepared.source_id;
    let pipeline = cfg.pipeline();
    let lseed = lda_seed(seed, id, k);
    let traj = match cache.trajectory(prepared, k, &pipeline.lda, lseed) {
        Ok(t) => t,
        Err(FlowError::Corpus(e @ CorpusError::TooShort { .. })) => {
            return Ok(FitOutcome::Skipped(format!("{id} k={k}: skipped: {e}")));
        }
        Err(e) => return Err(CliError::data(format!("{id} k={k}"), e)),
    };
    let sseed = sim_seed(seed, &traj);
    let tf = fit_trajectory(&traj, &pipeline, sseed)
        .map_err(|e| CliError::data(format!("{id} k={k}"), e))?;
    let provenance = ScaleProvenance {
        chunks: traj.len(),
        lda_seed: lseed,
        sim_seed: sseed,
        trajectory_fingerprint: traj.fingerprint(),
        alpha_sum: tf.alpha.total(),
        alpha_converged: tf.alpha_converged,
    };
    let record = FitRecord::new(id, k, &tf.fit, provenance);
    let dir = fit_dir(id, k);
    out.write(format!("{dir}/trajectory.csv"), &traj.to_csv())?;
    out.write_json(format!("{dir}/fit.json"), &record)?;
    out.write_json(
        format!("{dir}/lambda.json"),
        &LambdaRecord {
            source: id,
            k,
            median: record.lambda_median,
            q15: record.lambda_q15,
            q85: record.lambda_q85,
        },
    )?;
    if cfg.output.posterior_csv {
        out.write(format!("{dir}/posterior.csv"), &tf.grid.to_csv())?;
    }
    Ok(FitOutcome::Done(Box::new(record)))
}

fn run_fits(
    cfg: &RunConfig,
    out: &Output,
    cache: &TrajectoryCache,
    prepared: &[TokenStream],
    ks: &[usize],
    seed: u64,
    summary: &mut Summary,
) -> Result<Vec<FitRecord>, CliError> {
    let tasks: Vec<(&TokenStream, usize)> = prepared
        .iter()
        .flat_map(|s| ks.iter().map(move |&k| (s, k)))
        .collect();
    let results: Vec<Result<FitOutcome, CliError>> = tasks
        .par_iter()
        .map(|(s, k)| fit_one(cfg, out, cache, s, *k, seed))
        .collect();
    let mut records = Vec::new();
    for r in results {
        match r? {
            FitOutcome::Done(rec) => {
                summary.warnings.extend(fit_warnings(
                    &rec.source,
                    rec.k,
                    &rec.diagnostics,
                    &rec.provenance,
                ));
                records.push(*rec);
            }
            FitOutcome::Skipped(msg) => summary.warnings.push(msg),
        }
    }
    Ok(records)
}

/// Per `(source, k)`: trajectory CSV, FitResult JSON, lambda-range JSON.
pub fn run_fit(cfg: &RunConfig, opts: &Options) -> Result<Summary, CliError> {
    let seed = cfg.master_seed(opts.seed)?;
    cfg.validate()?;
    require_sources(cfg)?;
    let out = Output::new(&cfg.output_dir);
    let cache = TrajectoryCache::new(cfg.cache_dir());
    let ks = if opts.k_list.is_empty() {
        cfg.k_list()
    } else {
        let mut k = opts.k_list.clone();
        k.sort_unstable();
        k.dedup();
        k
    };
    let srcs: Vec<&SourceConfig> = cfg.sources.iter().collect();
    let prepared = load_prepared(cfg, &srcs)?;
    let mut summary = Summary::default();
    let records = run_fits(cfg, &out, &cache, &prepared, &ks, seed, &mut summary)?;
    if records.is_empty() {
        return Err(CliError::data("fit", "no (source, k) pair could be fitted"));
    }
    summary.cache_hits = cache.hits();
    summary.cache_misses = cache.misses();
    summary.finish(&out, opts.strict)
}

fn flow_csv_from(points: &[(usize, &FitResult)]) -> String {
    let mut s =
        String::from("k,mu_hat,sd_mu,sigma_hat,sd_sigma,lambda_median,lambda_q15,lambda_q85\n");
    for (k, f) in points {
        let l = f.lambda_range();
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            k, f.mu_hat, f.sd_mu, f.sigma_hat, f.sd_sigma, l.median, l.q15, l.q85
        ));
    }
    s
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Endpoint {
    pub source: String,
    pub k: usize,
    pub mu_hat: f64,
    pub sigma_hat: f64,
    /// Inside the 2-sigma contour of the limit region, when one exists.
    pub inside_2sigma: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionReport {
    pub n_points: usize,
    pub error_weighted: bool,
    pub degenerate: bool,
    pub centroid: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
    pub ellipse_2sigma: Vec<[f64; 2]>,
}

impl RegionReport {
    fn new(r: &GaussianRegion, n: usize, error_weighted: bool, degenerate: bool) -> Self {
        let (eig, _) = r.principal_axes();
        RegionReport {
            n_points: n,
            error_weighted,
            degenerate,
            centroid: r.centroid,
            covariance: r.covariance,
            eigenvalues: eig,
            ellipse_2sigma: r
                .ellipse(2.0, 72)
                .into_iter()
                .map(|(x, y)| [x, y])
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionArtifact {
    pub region: Option<RegionReport>,
    pub reason: Option<String>,
    pub endpoints: Vec<Endpoint>,
    pub reference_centroids: BTreeMap<String, [f64; 2]>,
}

fn reference_centroids() -> BTreeMap<String, [f64; 2]> {
    BTreeMap::from([
        (
            "philosophy".to_string(),
            [PHILOSOPHY_LIMIT_CENTROID.0, PHILOSOPHY_LIMIT_CENTROID.1],
        ),
        (
            "debate".to_string(),
            [DEBATE_LIMIT_CENTROID.0, DEBATE_LIMIT_CENTROID.1],
        ),
    ])
}

#[derive(Serialize)]
struct OverlayCurve<'a> {
    source: &'a str,
    /// `[k, mu_hat, sigma_hat]` per point.
    points: Vec<(usize, f64, f64)>,
    null_points: Option<Vec<(usize, f64, f64)>>,
}

#[derive(Serialize)]
struct Overlay<'a> {
    reference_centroids: BTreeMap<String, [f64; 2]>,
    curves: Vec<OverlayCurve<'a>>,
    region: &'a RegionArtifact,
}

/// Flow curves per source, limit region of their endpoints, overlay data.
pub fn run_flow(cfg: &RunConfig, opts: &Options) -> Result<Summary, CliError> {
    let seed = cfg.master_seed(opts.seed)?;
    cfg.validate()?;
    require_sources(cfg)?;
    let out = Output::new(&cfg.output_dir);
    let cache = TrajectoryCache::new(cfg.cache_dir());
    let pipeline = cfg.pipeline();
    let null = opts.null || cfg.flow.null;
    let error_weighted = opts.error_weighted || cfg.flow.error_weighted;
    let ks = if opts.k_list.is_empty() {
        cfg.k_list()
    } else {
        opts.k_list.clone()
    };
    let mut summary = Summary::default();
    let provider = |s: &TokenStream, k: usize, lda: &levytopic::topics::LdaConfig, sd: u64| {
        cache.trajectory(s, k, lda, sd)
    };

    let mut curves: Vec<FlowCurve> = Vec::new();
    for src in &cfg.sources {
        let stream = load_stream(src, cfg)?;
        let curve = flow_curve_with(
            &stream,
            &ks,
            &pipeline,
            seed,
            FlowOptions { null },
            &provider,
        );
        for s in &curve.skipped {
            summary
                .warnings
                .push(format!("{} k={}: skipped: {}", src.id, s.k, s.reason));
        }
        for p in &curve.points {
            summary.warnings.extend(fit_warnings(
                &src.id,
                p.k,
                &p.fit.diagnostics,
                &p.provenance,
            ));
        }
        let rows: Vec<(usize, &FitResult)> = curve.points.iter().map(|p| (p.k, &p.fit)).collect();
        out.write(format!("flow/{}.csv", src.id), &flow_csv_from(&rows))?;
        out.write_json(format!("flow/{}.json", src.id), &curve)?;
        if null {
            let rows: Vec<(usize, &FitResult)> = curve
                .points
                .iter()
                .filter_map(|p| p.null_fit.as_ref().map(|f| (p.k, f)))
                .collect();
            out.write(format!("flow/{}.null.csv", src.id), &flow_csv_from(&rows))?;
        }
        curves.push(curve);
    }
    if curves.iter().all(|c| c.points.is_empty()) {
        return Err(CliError::data("flow", "no source could be fitted at any k"));
    }

    let ends: Vec<&FlowPoint> = curves.iter().filter_map(|c| c.endpoint()).collect();
    let fits: Vec<FitResult> = ends.iter().map(|p| p.fit.clone()).collect();
    let mut endpoints: Vec<Endpoint> = curves
        .iter()
        .filter_map(|c| {
            c.endpoint().map(|p| Endpoint {
                source: c.source_id.clone(),
                k: p.k,
                mu_hat: p.fit.mu_hat,
                sigma_hat: p.fit.sigma_hat,
                inside_2sigma: None,
            })
        })
        .collect();
    let (region, reason) = match limit_region_from_fits(&fits, error_weighted) {
        Ok(r) => {
            for e in &mut endpoints {
                e.inside_2sigma = mahalanobis_contains(&r, (e.mu_hat, e.sigma_hat), 2.0).ok();
            }
            (
                Some(RegionReport::new(&r, fits.len(), error_weighted, false)),
                None,
            )
        }
        Err(FlowError::DegenerateCovariance { region }) => {
            summary
                .warnings
                .push("limit region: endpoint covariance is degenerate".into());
            (
                Some(RegionReport::new(&region, fits.len(), error_weighted, true)),
                Some("collinear endpoints; the contour has a zero-width axis".to_string()),
            )
        }
        Err(e) => (None, Some(e.to_string())),
    };
    let region_artifact = RegionArtifact {
        region,
        reason,
        endpoints,
        reference_centroids: reference_centroids(),
    };
    out.write_json("flow/region.json", &region_artifact)?;
    let overlay = Overlay {
        reference_centroids: reference_centroids(),
        curves: curves
            .iter()
            .map(|c| OverlayCurve {
                source: &c.source_id,
                points: c
                    .points
                    .iter()
                    .map(|p| (p.k, p.fit.mu_hat, p.fit.sigma_hat))
                    .collect(),
                null_points: null.then(|| {
                    c.points
                        .iter()
                        .filter_map(|p| p.null_fit.as_ref().map(|f| (p.k, f.mu_hat, f.sigma_hat)))
                        .collect()
                }),
            })
            .collect(),
        region: &region_artifact,
    };
    out.write_json("flow/overlay.json", &overlay)?;
    if cfg.output.svg {
        let plot_curves: Vec<svg::Curve> = curves
            .iter()
            .map(|c| svg::Curve {
                label: c.source_id.clone(),
                points: c
                    .points
                    .iter()
                    .map(|p| (p.fit.mu_hat, p.fit.sigma_hat))
                    .collect(),
            })
            .collect();
        let contour: Option<Vec<(f64, f64)>> = region_artifact
            .region
            .as_ref()
            .map(|r| r.ellipse_2sigma.iter().map(|p| (p[0], p[1])).collect());
        let markers: Vec<svg::Marker> = region_artifact
            .reference_centroids
            .iter()
            .map(|(name, c)| svg::Marker {
                label: name.clone(),
                at: (c[0], c[1]),
            })
            .collect();
        out.write(
            "flow/flow.svg",
            &svg::flow_plot(&plot_curves, contour.as_deref(), &markers),
        )?;
    }
    summary.cache_hits = cache.hits();
    summary.cache_misses = cache.misses();
    summary.finish(&out, opts.strict)
}

fn lambda_label(l: f64) -> String {
    format!("{l}").replace('.', "p")
}

/// Synthetic trajectory, density grids, and optionally the recovery suite.
pub fn run_simulate(cfg: &RunConfig, opts: &Options) -> Result<Summary, CliError> {
    let seed = cfg.master_seed(opts.seed)?;
    let sim = &cfg.simulate;
    let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("simulate: {e}"));
    let alpha = AlphaVector::symmetric(sim.n_topics, sim.alpha).map_err(|e| bad(&e))?;
    let params = LevyParams::new(sim.mu, sim.sigma).map_err(|e| bad(&e))?;
    let out = Output::new(&cfg.output_dir);
    let mut summary = Summary::default();

    let mut rng = SimRng::new(derive_seed(seed, "simulate/trajectory"));
    let traj = simulate_trajectory(&alpha, &params, sim.points, &mut rng).map_err(|e| bad(&e))?;
    out.write("simulate/trajectory.csv", &traj.to_csv())?;

    let alpha3 = AlphaVector::symmetric(3, sim.alpha).map_err(|e| bad(&e))?;
    let v_prev = SimplexPoint::new(sim.v_prev.clone()).map_err(|e| bad(&e))?;
    for &l in &sim.density_lambdas {
        let g = density_grid(&alpha3, l, &v_prev, sim.resolution).map_err(|e| bad(&e))?;
        let name = lambda_label(l);
        out.write(format!("simulate/density_lambda_{name}.csv"), &g.to_csv())?;
        if cfg.output.svg {
            let v = [
                v_prev.components()[0],
                v_prev.components()[1],
                v_prev.components()[2],
            ];
            out.write(
                format!("simulate/density_lambda_{name}.svg"),
                &svg::density_plot(&g, Some(v)),
            )?;
        }
    }

    if opts.recovery {
        cfg.grid.validate().map_err(|e| bad(&e))?;
        let report = run_recovery(
            &sim.recovery,
            &cfg.grid,
            &cfg.budget(),
            derive_seed(seed, "recovery"),
        )?;
        if !report.pass() {
            summary
                .warnings
                .push("recovery suite: at least one check failed".into());
        }
        out.write_json("simulate/recovery.json", &report)?;
    }
    summary.finish(&out, opts.strict)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeStats {
    pub source: String,
    pub group: Option<String>,
    pub comments: usize,
    pub max_depth: usize,
    pub average_depth: f64,
    pub min_depth: usize,
    pub nesting_fraction: f64,
    /// Share of comments ten or more levels deep.
    pub depth10_fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegressionPoint {
    pub source: String,
    pub group: Option<String>,
    pub average_depth: f64,
    pub mu_hat: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegressionOutcome {
    Fit {
        n: usize,
        slope: f64,
        intercept: f64,
        r_squared: f64,
    },
    Unavailable {
        n: usize,
        error: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegressionArtifact {
    pub k: usize,
    pub x: String,
    pub y: String,
    pub points: Vec<RegressionPoint>,
    pub pooled: RegressionOutcome,
    pub groups: BTreeMap<String, RegressionOutcome>,
    pub missing_fits: Vec<String>,
}

fn regress(points: &[&RegressionPoint]) -> RegressionOutcome {
    let x: Vec<f64> = points.iter().map(|p| p.average_depth).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mu_hat).collect();
    match ols_regression(&x, &y) {
        Ok(r) => RegressionOutcome::Fit {
            n: points.len(),
            slope: r.slope,
            intercept: r.intercept,
            r_squared: r.r_squared,
        },
        Err(e) => RegressionOutcome::Unavailable {
            n: points.len(),
            error: e.to_string(),
        },
    }
}

fn read_fit(out: &Output, source: &str, k: usize) -> Option<FitRecord> {
    let text =
        std::fs::read_to_string(out.path(format!("{}/fit.json", fit_dir(source, k)))).ok()?;
    serde_json::from_str(&text).ok()
}

/// Depth statistics per thread and the depth-versus-focus regression.
pub fn run_trees(cfg: &RunConfig, opts: &Options) -> Result<Summary, CliError> {
    cfg.validate()?;
    let threads: Vec<&SourceConfig> = cfg
        .sources
        .iter()
        .filter(|s| s.kind == SourceKind::ThreadJson)
        .collect();
    if threads.is_empty() {
        return Err(CliError::Config("no thread-json sources configured".into()));
    }
    let out = Output::new(&cfg.output_dir);
    let mut summary = Summary::default();
    let min_depth = cfg.trees.min_depth.max(1);
    let mut stats = Vec::new();
    for src in &threads {
        let tree = load_tree(src)?;
        let h = depth_distribution(&tree);
        let ctx = |e| CliError::data(&src.id, e);
        let st = TreeStats {
            source: src.id.clone(),
            group: src.group.clone(),
            comments: h.total(),
            max_depth: h.max_depth(),
            average_depth: average_depth(&h).map_err(ctx)?,
            min_depth,
            nesting_fraction: nesting_fraction(&h, min_depth).map_err(ctx)?,
            depth10_fraction: nesting_fraction(&h, 10).map_err(ctx)?,
        };
        out.write(format!("trees/{}/depth.csv", src.id), &h.to_csv())?;
        out.write_json(format!("trees/{}/stats.json", src.id), &st)?;
        stats.push(st);
    }

    let k = cfg
        .trees
        .regress_k
        .unwrap_or_else(|| *cfg.k_list().last().expect("validated"));
    let seed = opts.seed.or(cfg.seed);
    let mut missing: Vec<&SourceConfig> = threads
        .iter()
        .copied()
        .filter(|s| read_fit(&out, &s.id, k).is_none())
        .collect();
    if let (Some(seed), false) = (seed, missing.is_empty()) {
        let cache = TrajectoryCache::new(cfg.cache_dir());
        let prepared = load_prepared(cfg, &missing)?;
        run_fits(cfg, &out, &cache, &prepared, &[k], seed, &mut summary)?;
        missing.retain(|s| read_fit(&out, &s.id, k).is_none());
    }
    let mut points = Vec::new();
    for st in &stats {
        if let Some(f) = read_fit(&out, &st.source, k) {
            points.push(RegressionPoint {
                source: st.source.clone(),
                group: st.group.clone(),
                average_depth: st.average_depth,
                mu_hat: f.mu_hat,
            });
        }
    }
    let missing_fits: Vec<String> = missing.iter().map(|s| s.id.clone()).collect();
    if !missing_fits.is_empty() {
        summary.warnings.push(format!(
            "trees: no k={k} fit for {} (run `fit` or pass --seed)",
            missing_fits.join(", ")
        ));
    }
    let mut by_group: BTreeMap<String, Vec<&RegressionPoint>> = BTreeMap::new();
    for p in &points {
        if let Some(g) = &p.group {
            by_group.entry(g.clone()).or_default().push(p);
        }
    }
    let artifact = RegressionArtifact {
        k,
        x: "average_depth".into(),
        y: "mu_hat".into(),
        pooled: regress(&points.iter().collect::<Vec<_>>()),
        groups: by_group
            .iter()
            .map(|(g, pts)| (g.clone(), regress(pts)))
            .collect(),
        points,
        missing_fits,
    };
    out.write_json("trees/regression.json", &artifact)?;
    summary.finish(&out, opts.strict)
}

fn sorted_dirs(path: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = std::fs::read_dir(path)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    v.sort();
    v
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    serde_json::from_str(&std::fs::read_to_string(path).ok()?).ok()
}

#[derive(Serialize)]
struct Report {
    fits: Vec<FitRecord>,
    region: Option<RegionArtifact>,
    trees: Vec<TreeStats>,
    regression: Option<RegressionArtifact>,
}

/// Collects existing artifacts into `report.md` and `report.json`.
pub fn run_report(cfg: &RunConfig, opts: &Options) -> Result<Summary, CliError> {
    let out = Output::new(&cfg.output_dir);
    let mut fits: Vec<FitRecord> = Vec::new();
    for src in sorted_dirs(&out.path("fit")) {
        for kdir in sorted_dirs(&src) {
            if let Some(f) = read_json::<FitRecord>(&kdir.join("fit.json")) {
                fits.push(f);
            }
        }
    }
    fits.sort_by(|a, b| a.source.cmp(&b.source).then(a.k.cmp(&b.k)));
    // Flow runs that were not preceded by `fit` still carry per-k fits.
    for src in &cfg.sources {
        if let Some(curve) = read_json::<FlowCurve>(&out.path(format!("flow/{}.json", src.id))) {
            for p in curve.points {
                if !fits.iter().any(|f| f.source == src.id && f.k == p.k) {
                    fits.push(FitRecord::new(&src.id, p.k, &p.fit, p.provenance));
                }
            }
        }
    }
    fits.sort_by(|a, b| a.source.cmp(&b.source).then(a.k.cmp(&b.k)));
    let region: Option<RegionArtifact> = read_json(&out.path("flow/region.json"));
    let mut trees: Vec<TreeStats> = sorted_dirs(&out.path("trees"))
        .iter()
        .filter_map(|d| read_json(&d.join("stats.json")))
        .collect();
    trees.sort_by(|a, b| a.source.cmp(&b.source));
    let regression: Option<RegressionArtifact> = read_json(&out.path("trees/regression.json"));
    if fits.is_empty() && region.is_none() && trees.is_empty() {
        return Err(CliError::data(
            out.root().display().to_string(),
            "no artifacts found; run fit, flow or trees first",
        ));
    }

    let mut md = String::from("# levytopic report\n\n");
    if !fits.is_empty() {
        md.push_str("## Fits\n\n| source | k | mu | sigma | lambda |\n|---|---|---|---|---|\n");
        for f in &fits {
            md.push_str(&format!(
                "| {} | {} | {:.2} ± {:.2} | {:.2} ± {:.2} | {:.2}_{{{:.2}}}^{{{:.2}}} |\n",
                f.source,
                f.k,
                f.mu_hat,
                f.sd_mu,
                f.sigma_hat,
                f.sd_sigma,
                f.lambda_median,
                f.lambda_q15,
                f.lambda_q85
            ));
        }
        md.push('\n');
    }
    if let Some(r) = &region {
        md.push_str("## Limit region\n\n");
        match &r.region {
            Some(g) => md.push_str(&format!(
                "Centroid (mu, sigma) = ({:.3}, {:.3}) from {} endpoints{}.\n\n",
                g.centroid[0],
                g.centroid[1],
                g.n_points,
                if g.degenerate { " (degenerate)" } else { "" }
            )),
            None => md.push_str(&format!(
                "Not available: {}.\n\n",
                r.reason.as_deref().unwrap_or("unknown")
            )),
        }
        for (name, c) in &r.reference_centroids {
            md.push_str(&format!("- reference {name}: ({}, {})\n", c[0], c[1]));
        }
        md.push('\n');
    }
    if !trees.is_empty() {
        md.push_str("## Threads\n\n| source | comments | max depth | average depth | nested share |\n|---|---|---|---|---|\n");
        for t in &trees {
            md.push_str(&format!(
                "| {} | {} | {} | {:.3} | {:.3} |\n",
                t.source, t.comments, t.max_depth, t.average_depth, t.nesting_fraction
            ));
        }
        md.push('\n');
    }
    if let Some(reg) = &regression {
        md.push_str(&format!("## mu (k={}) on average depth\n\n", reg.k));
        match &reg.pooled {
            RegressionOutcome::Fit {
                n,
                slope,
                intercept,
                r_squared,
            } => md.push_str(&format!(
                "Pooled, n = {n}: mu = {intercept:.3} + {slope:.3} depth, R² = {r_squared:.3}\n"
            )),
            RegressionOutcome::Unavailable { n, error } => {
                md.push_str(&format!("Pooled, n = {n}: {error}\n"))
            }
        }
    }
    out.write("report.md", &md)?;
    out.write_json(
        "report.json",
        &Report {
            fits,
            region,
            trees,
            regression,
        },
    )?;
    Summary::default().finish(&out, opts.strict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use levytopic::flow::limit_region;

    #[test]
    fn lambda_labels_are_file_safe() {
        assert_eq!(lambda_label(0.0), "0");
        assert_eq!(lambda_label(10.0), "10");
        assert_eq!(lambda_label(0.5), "0p5");
    }

    #[test]
    fn flow_csv_header() {
        assert!(flow_csv_from(&[]).starts_with("k,mu_hat,sd_mu,sigma_hat,sd_sigma,"));
    }

    #[test]
    fn limit_region_reexport_matches() {
        let r = limit_region(&[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)]).unwrap();
        let rep = RegionReport::new(&r, 3, false, false);
        assert_eq!(rep.centroid, [1.0, 1.0]);
        assert_eq!(rep.ellipse_2sigma.len(), 73);
    }
}
