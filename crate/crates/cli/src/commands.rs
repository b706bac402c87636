use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use grf_core::bench::{frobenius_error, run_frobenius_experiment, run_speed_comparison, write_frobenius_csv, write_speed_csv, FrobeniusExperiment, SpeedComparison};
use grf_core::clustering::{clustering_error, kernel_kmeans_restarts, read_labels_csv, write_labels_csv, KernelOperator};
use grf_core::compression::sample_anchors;
use grf_core::format::{write_chain, write_feature_matrix};
use grf_core::graph::{build_u_matrix, load_labeled_edge_list, spectral_radius_upper_bound};
use grf_core::oracle::{exact_kernel_matrix, exact_walk_inverse, min_eigenvalue, positive_definiteness_check};
use grf_core::rng::derive_seed;
use grf_core::walk::{compute_feature_matrix, compute_feature_matrix_anchored, Sampler};
use grf_core::{datasets, estimate_kernel, generate_erdos_renyi, load_edge_list, solve_linear, symmetrize};
use grf_core::{Compression, Graph, LaplacianKernelSpec, WalkConfig};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

/// Streams derived from `--seed`; graph generation uses the seed itself.
mod stream {
    pub const WALK: u64 = 1;
    pub const ANCHORS: u64 = 2;
    pub const KMEANS: u64 = 3;
}

pub struct LoadedGraph {
    pub graph: Graph,
    pub labels: Option<Vec<String>>,
}

impl GraphSource {
    pub fn load(&self, seed: u64) -> Result<LoadedGraph> {
        if let Some(path) = &self.graph {
            let reader = BufReader::new(File::open(path).map_err(CliError::io(path))?);
            if self.labeled {
                let (graph, labels) = load_labeled_edge_list(reader)?;
                return Ok(LoadedGraph { graph, labels: Some(labels) });
            }
            return Ok(LoadedGraph { graph: load_edge_list(reader)?, labels: None });
        }
        if self.karate {
            return Ok(LoadedGraph { graph: datasets::karate(), labels: None });
        }
        let er = self.er.as_deref().unwrap_or_default();
        let [n, p] = er else {
            return Err(CliError::Usage("one of --graph, --karate or --er N P is required".into()));
        };
        if *n < 0.0 || n.fract() != 0.0 {
            return Err(CliError::Usage(format!("--er node count must be a nonnegative integer, got {n}")));
        }
        Ok(LoadedGraph { graph: generate_erdos_renyi(*n as usize, *p, seed)?, labels: None })
    }
}

impl WalkArgs {
    fn config(&self, seed: u64) -> Result<WalkConfig> {
        let sampler: Sampler = self.sampler.parse()?;
        Ok(WalkConfig::new(self.p_term, self.m, sampler, derive_seed(seed, &[stream::WALK]))?)
    }
}

impl CompressionArgs {
    fn resolve(&self) -> Compression {
        if self.anchors.is_some() && self.jlt.is_some() {
            warn("--anchors and --jlt combined: anchors restrict the walks first, then the JLT projects the result");
        }
        Compression { anchors: self.anchors, jlt: self.jlt }
    }
}

pub fn warn(message: &str) {
    eprintln!("{}", json!({ "warning": message }));
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

fn finish(mut out: BufWriter<File>, path: &Path) -> Result<()> {
    out.flush().map_err(CliError::io(path))
}

/// Writes `summary` to stdout and, next to `output`, the run manifest.
fn report(manifest: Manifest, output: &Path, summary: Value) -> Result<()> {
    manifest.write(output, &summary)?;
    println!("{summary}");
    Ok(())
}

fn graph_summary(g: &LoadedGraph) -> Value {
    json!({ "nodes": g.graph.n(), "edges": g.graph.edge_count() })
}

pub fn run(cli: &Cli, manifest: Manifest) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => generate(a, manifest),
        Command::Features(a) => features(a, manifest),
        Command::Estimate(a) => estimate(a, manifest),
        Command::Solve(a) => solve(a, manifest),
        Command::Kmeans(a) => kmeans(a, manifest),
        Command::BenchFrobenius(a) => bench_frobenius(a, manifest),
        Command::BenchSpeed(a) => bench_speed(a, manifest),
        Command::Validate(a) => validate(a, manifest),
    }
}

fn generate(a: &GenerateArgs, manifest: Manifest) -> Result<()> {
    let g = a.source.load(a.seed)?;
    let mut out = create(&a.output)?;
    out.write_all(g.graph.to_edge_list().as_bytes()).map_err(CliError::io(&a.output))?;
    finish(out, &a.output)?;
    let manifest = manifest.with_labels(g.labels.clone());
    report(manifest, &a.output, json!({ "graph": graph_summary(&g) }))
}

fn features(a: &FeaturesArgs, manifest: Manifest) -> Result<()> {
    let g = a.source.load(a.seed)?;
    let u = build_u_matrix(&g.graph, a.sigma2)?;
    let cfg = a.walk.config(a.seed)?;
    let fm = match a.anchors {
        Some(k) => {
            let anchors = sample_anchors(g.graph.n(), k, derive_seed(a.seed, &[stream::ANCHORS]))?;
            compute_feature_matrix_anchored(&u, &cfg, &anchors)?
        }
        None => compute_feature_matrix(&u, &cfg)?,
    };
    if fm.stats.truncated_walks > 0 {
        warn(&format!("{} walks hit the step cap; the features are biased", fm.stats.truncated_walks));
    }
    let mut out = create(&a.output)?;
    write_feature_matrix(&fm, &mut out)?;
    finish(out, &a.output)?;
    let summary = json!({
        "graph": graph_summary(&g),
        "nnz": fm.rows.nnz(),
        "transitions": fm.stats.transitions,
        "truncated_walks": fm.stats.truncated_walks,
        "flops": fm.flops(),
    });
    report(manifest.with_labels(g.labels), &a.output, summary)
}

fn estimate(a: &EstimateArgs, manifest: Manifest) -> Result<()> {
    let g = a.source.load(a.seed)?;
    let spec = LaplacianKernelSpec::new(a.kernel.d, a.kernel.sigma2)?;
    let cfg = a.walk.config(a.seed)?;
    let mut chain = estimate_kernel(&g.graph, &spec, &cfg, &a.compression.resolve())?;
    if a.symmetrize {
        chain = symmetrize(&chain)?;
    }
    let mut out = create(&a.output)?;
    write_chain(&chain, &mut out)?;
    finish(out, &a.output)?;
    let mut summary = json!({
        "graph": graph_summary(&g),
        "d": a.kernel.d,
        "terms": chain.terms().len(),
        "rank": chain.rank(),
        "preprocessing_flops": chain.preprocessing_flops,
    });
    if a.check {
        let exact = exact_kernel_matrix(&g.graph, &spec)?;
        summary["frobenius_error"] = json!(frobenius_error(&exact, &chain.materialize())?);
    }
    report(manifest.with_labels(g.labels), &a.output, summary)
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| CliError::Usage(format!("{}: bad number `{t}`: {e}", path.display()))))
        .collect()
}

fn solve(a: &SolveArgs, manifest: Manifest) -> Result<()> {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let g = a.source.load(a.seed)?;
    let u = build_u_matrix(&g.graph, a.sigma2)?;
    let n = u.n();
    let b = match &a.rhs {
        Some(path) => read_vector(path)?,
        None => vec![1.0; n],
    };
    let cfg = a.walk.config(a.seed)?;
    let mut x = vec![0.0; n];
    for t in 0..a.trials {
        let est = solve_linear(&u, &b, &cfg.fork(&[t as u64]))?;
        x.iter_mut().zip(est).for_each(|(acc, v)| *acc += v);
    }
    x.iter_mut().for_each(|v| *v /= a.trials as f64);
    let mut out = create(&a.output)?;
    for v in &x {
        writeln!(out, "{v:.16e}").map_err(CliError::io(&a.output))?;
    }
    finish(out, &a.output)?;
    let mut summary = json!({ "graph": graph_summary(&g), "trials": a.trials });
    if a.check {
        let inv = exact_walk_inverse(&u, 1)?;
        let exact: Vec<f64> = (0..n).map(|i| inv.row(i).iter().zip(&b).map(|(p, q)| p * q).sum()).collect();
        let num: f64 = exact.iter().zip(&x).map(|(e, v)| (e - v) * (e - v)).sum();
        let den: f64 = exact.iter().map(|e| e * e).sum();
        summary["relative_error"] = json!((num / den).sqrt());
    }
    report(manifest.with_labels(g.labels), &a.output, summary)
}

fn kmeans(a: &KmeansArgs, manifest: Manifest) -> Result<()> {
    let g = a.source.load(a.seed)?;
    let spec = LaplacianKernelSpec::new(a.kernel.d, a.kernel.sigma2)?;
    let kernel: Box<dyn KernelOperator> = if a.exact {
        Box::new(exact_kernel_matrix(&g.graph, &spec)?)
    } else {
        let cfg = a.walk.config(a.seed)?;
        Box::new(symmetrize(&estimate_kernel(&g.graph, &spec, &cfg, &a.compression.resolve())?)?)
    };
    let seed = derive_seed(a.seed, &[stream::KMEANS]);
    let result = kernel_kmeans_restarts(kernel.as_ref(), a.clusters, seed, a.max_iter, a.restarts)?;
    if result.min_raw_distance < 0.0 {
        warn(&format!("negative squared distance {:.3e} clamped to 0", result.min_raw_distance));
    }
    let mut out = create(&a.output)?;
    write_labels_csv(&result.labels, &mut out)?;
    finish(out, &a.output)?;
    let mut summary = json!({
        "graph": graph_summary(&g),
        "clusters": a.clusters,
        "objective": result.objective.last(),
        "iterations": result.iterations_run,
        "converged": result.converged,
    });
    if let Some(path) = &a.reference {
        let reference = read_labels_csv(BufReader::new(File::open(path).map_err(CliError::io(path))?))?;
        summary["clustering_error"] = json!(clustering_error(&result.labels, &reference)?);
    }
    report(manifest.with_labels(g.labels), &a.output, summary)
}

fn bench_frobenius(a: &BenchFrobeniusArgs, manifest: Manifest) -> Result<()> {
    let g = a.source.load(a.seed)?;
    let name = a.name.clone().unwrap_or_else(|| match (&a.source.graph, a.source.karate, &a.source.er) {
        (Some(p), _, _) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        (_, true, _) => "karate".into(),
        (_, _, Some(er)) => format!("er-{}-{}", er[0], er[1]),
        _ => "graph".into(),
    });
    let mut exp = FrobeniusExperiment::new(
        name,
        a.kernel.d,
        a.kernel.sigma2,
        a.p_terms.clone(),
        a.ms.clone(),
        a.trials,
        derive_seed(a.seed, &[stream::WALK]),
    );
    exp.sampler = a.sampler.parse()?;
    exp.compression = a.compression.resolve();
    let records = run_frobenius_experiment(&g.graph, &exp)?;
    if a.trials == 1 {
        warn("a single trial per cell: std is reported as 0");
    }
    let mut out = create(&a.output)?;
    write_frobenius_csv(&records, &mut out)?;
    finish(out, &a.output)?;
    let cells: Vec<Value> = records.iter().map(|r| json!({ "p_term": r.p_term, "m": r.m, "mean": r.mean, "std": r.std })).collect();
    report(manifest, &a.output, json!({ "graph": graph_summary(&g), "cells": cells }))
}

fn bench_speed(a: &BenchSpeedArgs, manifest: Manifest) -> Result<()> {
    let walk = WalkConfig::uniform(a.p_term, a.m, derive_seed(a.seed, &[stream::WALK]))?;
    let mut cmp = SpeedComparison::new(a.ns.clone(), walk);
    cmp.density = a.density;
    cmp.sigma2 = a.sigma2;
    cmp.iterations = a.iterations;
    cmp.cg_max_iters = a.cg_max_iters;
    cmp.cg_tol = a.cg_tol;
    let records = run_speed_comparison(&cmp)?;
    let mut out = create(&a.output)?;
    write_speed_csv(&records, &mut out)?;
    finish(out, &a.output)?;
    let rows: Vec<Value> = records
        .iter()
        .map(|r| json!({ "n": r.n, "method": r.method, "preprocessing": r.preprocessing, "inference": r.inference }))
        .collect();
    report(manifest, &a.output, json!({ "rows": rows }))
}

fn validate(a: &ValidateArgs, manifest: Manifest) -> Result<()> {
    if a.max_d == 0 {
        return Err(CliError::Usage("--max-d must be at least 1".into()));
    }
    let g = a.source.load(a.seed)?;
    let u = build_u_matrix(&g.graph, a.sigma2)?;
    let radius = spectral_radius_upper_bound(&u, a.power_iters, derive_seed(a.seed, &[stream::WALK]))?;
    let mut failures = Vec::new();
    if radius.estimate >= 1.0 {
        failures.push(format!("spectral radius estimate {} is not below 1", radius.estimate));
    }
    let mut kernels = Vec::new();
    for d in 1..=a.max_d {
        let k = exact_kernel_matrix(&g.graph, &LaplacianKernelSpec::new(d, a.sigma2)?)?;
        let pd = positive_definiteness_check(&k, a.tol)?;
        if !pd {
            failures.push(format!("kernel d={d} is not positive definite"));
        }
        if d == 1 && k.iter().any(|&v| v <= 0.0) {
            warn("the inverse of I + σ²L̃ has entries that are not positive (disconnected graph?)");
        }
        kernels.push(json!({ "d": d, "positive_definite": pd, "min_eigenvalue": min_eigenvalue(&k)? }));
    }
    let summary = json!({
        "graph": graph_summary(&g),
        "spectral_radius": {
            "estimate": radius.estimate,
            "gershgorin_bound": radius.gershgorin_bound,
            "upper": radius.upper(),
        },
        "kernels": kernels,
        "ok": failures.is_empty(),
    });
    match &a.output {
        Some(path) => {
            let mut out = create(path)?;
            serde_json::to_writer_pretty(&mut out, &summary)?;
            finish(out, path)?;
            report(manifest.with_labels(g.labels), path, summary)?;
        }
        None => println!("{summary}"),
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failures.join("; ")))
    }
}
