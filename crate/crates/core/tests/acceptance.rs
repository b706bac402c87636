//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_GAPS` are still evaluated and reported, but do
//! not make the process exit with a failure code.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{collect_stats, in_pool, karate_reference_labels, pair_product, KMEANS_SEED};
use grf_core::bench::{run_frobenius_experiment, run_speed_comparison, ExperimentRecord, FrobeniusExperiment, SpeedComparison};
use grf_core::clustering::{clustering_error, kernel_kmeans_restarts};
use grf_core::datasets::{er8, karate, six_node, small_corpus};
use grf_core::graph::{build_u_matrix, generate_erdos_renyi, WalkMatrix};
use grf_core::kernel::{estimate_d2_with, estimate_kernel, solve_linear, symmetrize, Compression, LaplacianKernelSpec};
use grf_core::oracle::{exact_kernel_matrix, exact_walk_inverse, neumann_partial_sum, positive_definiteness_check, variance_formula, walk_sum};
use grf_core::rng::derive_seed;
use grf_core::walk::{compute_feature_matrix, compute_signature, History, Sampler, WalkConfig};
use nalgebra::{DMatrix, DVector};

const SIGMA2: f64 = 0.2;
const Z: f64 = 5.0;
const SEED: u64 = 20230615;

// 1
const UNBIASED_TRIALS: usize = 20_000;
const UNBIASED_FRACTION: f64 = 0.99;
// 2
const WALK_SUM_LEN: usize = 60;
const WALK_SUM_TOL: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-8;
// 3
const VARIANCE_TRIALS: usize = 100_000;
const VARIANCE_REL_TOL: f64 = 0.10;
const VARIANCE_MAX_LEN: usize = 40;
// 4, 5
const FROB_N: usize = 200;
const FROB_P: f64 = 0.4;
const FROB_MS: [usize; 6] = [1, 2, 10, 20, 40, 80];
const FROB_TRIALS: usize = 10;
const FROB_TARGET: f64 = 0.04;
const PTERMS: [f64; 3] = [0.1, 0.06, 0.01];
const PTERM_REL_TOL: f64 = 0.5;
// 6
const BF_800: u64 = 512_640_000;
const ITER_800: u64 = 6_400_000;
const GRF_BUDGET: u64 = 2_000_000;
const SPEED_M: usize = 10;
const SPEED_PTERM: f64 = 0.1;
// 9
const KMEANS_TRIALS: u64 = 20;
const KMEANS_RESTARTS: usize = 100;
const KARATE_PTERM: f64 = 0.1;
const KARATE_M: usize = 40;
const REG_MEDIAN: f64 = 0.15;
const COMPRESSED_MEDIAN: f64 = 0.35;
// 11
const PD_TOL: f64 = 1e-10;

const KNOWN_GAPS: [&str; 1] = ["9b"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, &str, fn() -> Outcome)> = vec![
        ("1", "unbiasedness of (I-U)^-2 on the corpus, all samplers", unbiasedness),
        ("2", "walk sums vs Neumann sums, exact kernel inverses", oracle_cross_validation),
        ("3", "variance formula vs empirical variance", variance),
        ("4", "Frobenius error on ER(200, 0.4)", frobenius),
        ("5", "p_term insensitivity at m=80", p_term_insensitivity),
        ("6", "FLOP table at N=800 and N=1000", speed),
        ("7", "linear solver unbiasedness", linear_solver),
        ("8", "d=3 and d=4 chains", higher_powers),
        ("9a", "karate clustering, regular GRFs", clustering_regular),
        ("9b", "karate clustering, anchors and JLT", clustering_compressed),
        ("10", "determinism across 1/2/8 threads", determinism),
        ("11", "positive definiteness of exact kernels", positive_definiteness),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let out = run();
        let secs = start.elapsed().as_secs_f64();
        let status = if out.pass { "PASS" } else { "FAIL" };
        let note = if !out.pass && KNOWN_GAPS.contains(&id) { " [known gap]" } else { "" };
        println!("{status} criterion {id}: {name}: {} ({secs:.1}s){note}", out.detail);
        if !out.pass && !KNOWN_GAPS.contains(&id) {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn unbiasedness() -> Outcome {
    let samplers = [Sampler::Uniform, Sampler::WeightProportional, Sampler::Reinforced { alpha: 1.0 }];
    let mut total = None;
    let mut details = Vec::new();
    for (gi, entry) in small_corpus().iter().enumerate() {
        let u = build_u_matrix(&entry.graph, SIGMA2).unwrap();
        let expected = exact_walk_inverse(&u, 2).unwrap();
        let n = u.n();
        for (si, &sampler) in samplers.iter().enumerate() {
            let base = WalkConfig::new(0.5, 2, sampler, derive_seed(SEED, &[1, gi as u64, si as u64])).unwrap();
            let stats = collect_stats(UNBIASED_TRIALS, n, n, |t| pair_product(&u, &base.fork(&[t as u64])));
            let check = stats.check(&expected, Z);
            if check.passed < check.total {
                details.push(format!("{}/{sampler}: {}/{}", entry.name, check.passed, check.total));
            }
            total = Some(match total {
                None => check,
                Some(c) => check.merge(c),
            });
        }
    }
    let c = total.unwrap();
    let mut detail = format!("{}/{} entries within {Z} SE ({:.2}%), worst {:.2} SE", c.passed, c.total, 100.0 * c.fraction(), c.worst);
    if !details.is_empty() {
        detail += &format!("; misses: {}", details.join(", "));
    }
    outcome(c.fraction() >= UNBIASED_FRACTION, detail)
}

fn oracle_cross_validation() -> Outcome {
    let mut worst_walk: f64 = 0.0;
    let mut worst_inverse: f64 = 0.0;
    for entry in small_corpus() {
        let u = build_u_matrix(&entry.graph, SIGMA2).unwrap();
        let neumann = neumann_partial_sum(&u, WALK_SUM_LEN + 1, true).unwrap().matrix;
        for i in 0..u.n() {
            for j in 0..u.n() {
                let w = walk_sum(&u, i, j, WALK_SUM_LEN).unwrap().value;
                worst_walk = worst_walk.max((w - neumann[(i, j)]).abs());
            }
        }
        let n = entry.graph.n();
        let a = entry.graph.regularized_laplacian(SIGMA2).to_dense();
        let mut power = DMatrix::identity(n, n);
        for d in 1..=4 {
            power = &power * &a;
            let k = exact_kernel_matrix(&entry.graph, &LaplacianKernelSpec::new(d, SIGMA2).unwrap()).unwrap();
            let residual = (&k * &power - DMatrix::identity(n, n)).abs().row_sum().max();
            worst_inverse = worst_inverse.max(residual);
        }
    }
    outcome(
        worst_walk <= WALK_SUM_TOL && worst_inverse <= INVERSE_TOL,
        format!("max |walk_sum - neumann| = {worst_walk:.2e} (tol {WALK_SUM_TOL:e}), max ||K_d A^d - I||_inf = {worst_inverse:.2e} (tol {INVERSE_TOL:e})"),
    )
}

fn empirical_variance(u: &WalkMatrix, i: usize, j: usize, p_term: f64, seed: u64) -> f64 {
    let base = WalkConfig::uniform(p_term, 1, seed).unwrap();
    let stats = collect_stats(VARIANCE_TRIALS, 1, 1, |t| {
        let cfg = base.fork(&[t as u64]);
        let a = compute_signature(u, i, &cfg.independent_copy(0), &mut History::new()).unwrap();
        let b = compute_signature(u, j, &cfg.independent_copy(1), &mut History::new()).unwrap();
        DMatrix::from_element(1, 1, a.dot(&b))
    });
    stats.variance()[0]
}

fn variance() -> Outcome {
    let two = WalkMatrix::from_symmetric_triplets(2, &[(0, 1, 0.4)], 1.0).unwrap();
    // u = 0.2 keeps the fourth moment finite so the sample variance settles
    let cycle = WalkMatrix::from_symmetric_triplets(4, &[(0, 1, 0.2), (1, 2, 0.2), (2, 3, 0.2), (0, 3, 0.2)], 1.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, u, i, j, seed) in [("2-node u=0.4", &two, 0, 1, 31), ("4-cycle u=0.2", &cycle, 0, 2, 32)] {
        let formula = variance_formula(u, i, j, 0.5, 1, VARIANCE_MAX_LEN).unwrap().variance;
        let empirical = empirical_variance(u, i, j, 0.5, derive_seed(SEED, &[3, seed]));
        let rel = (formula - empirical).abs() / empirical;
        pass &= rel <= VARIANCE_REL_TOL;
        parts.push(format!("{name}: formula {formula:.5}, empirical {empirical:.5}, rel {rel:.3}"));
    }
    outcome(pass, format!("{} (tol {VARIANCE_REL_TOL})", parts.join("; ")))
}

fn frobenius_graph() -> grf_core::graph::Graph {
    generate_erdos_renyi(FROB_N, FROB_P, derive_seed(SEED, &[4])).unwrap()
}

fn monotone_within_one_sigma(records: &[ExperimentRecord]) -> bool {
    let mut inversions = 0;
    for w in records.windows(2) {
        if w[1].mean >= w[0].mean {
            inversions += 1;
            if w[1].mean - w[0].mean > w[0].std.max(w[1].std) {
                return false;
            }
        }
    }
    inversions <= 1
}

fn frobenius() -> Outcome {
    let g = frobenius_graph();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1, 2] {
        let exp = FrobeniusExperiment::new("er200", d, SIGMA2, vec![0.1], FROB_MS.to_vec(), FROB_TRIALS, derive_seed(SEED, &[4, d as u64]));
        let records = run_frobenius_experiment(&g, &exp).unwrap();
        let last = records.last().unwrap();
        let monotone = monotone_within_one_sigma(&records);
        pass &= last.mean < FROB_TARGET && monotone;
        let curve: Vec<String> = records.iter().map(|r| format!("{:.4}", r.mean)).collect();
        parts.push(format!("d={d}: eps(m=80) {:.4} +- {:.1e}, curve [{}], monotone {monotone}", last.mean, last.std, curve.join(", ")));
    }
    outcome(pass, format!("{} (target < {FROB_TARGET})", parts.join("; ")))
}

fn p_term_insensitivity() -> Outcome {
    let g = frobenius_graph();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [1, 2] {
        let exp = FrobeniusExperiment::new("er200", d, SIGMA2, PTERMS.to_vec(), vec![80], FROB_TRIALS, derive_seed(SEED, &[5, d as u64]));
        let records = run_frobenius_experiment(&g, &exp).unwrap();
        let means: Vec<f64> = records.iter().map(|r| r.mean).collect();
        let mut worst: f64 = 0.0;
        for a in 0..means.len() {
            for b in a + 1..means.len() {
                worst = worst.max((means[a] - means[b]).abs() / means[a].min(means[b]));
            }
        }
        pass &= worst < PTERM_REL_TOL;
        let shown: Vec<String> = records.iter().map(|r| format!("p={}: {:.4}", r.p_term, r.mean)).collect();
        parts.push(format!("d={d}: {} (max rel diff {worst:.3})", shown.join(", ")));
    }
    outcome(pass, format!("{} (tol {PTERM_REL_TOL})", parts.join("; ")))
}

fn speed() -> Outcome {
    let walk = WalkConfig::uniform(SPEED_PTERM, SPEED_M, derive_seed(SEED, &[6])).unwrap();
    let records = run_speed_comparison(&SpeedComparison::new(vec![800, 1000], walk)).unwrap();
    let flops = |n: usize, method: &str| records.iter().find(|r| r.n == n && r.method == method).unwrap().flops();
    let mut pass = flops(800, "brute_force") == BF_800
        && flops(800, "jacobi") == ITER_800
        && flops(800, "gauss_seidel") == ITER_800
        && flops(800, "grf") < GRF_BUDGET
        && (SPEED_M as f64 / SPEED_PTERM) <= 400.0;
    for n in [800, 1000] {
        pass &= flops(n, "grf") < flops(n, "jacobi") && flops(n, "jacobi") < flops(n, "brute_force");
    }
    let table: Vec<String> = records.iter().map(|r| format!("{}:{}={}", r.n, r.method, r.flops())).collect();
    outcome(pass, format!("m={SPEED_M}, p_term={SPEED_PTERM}; {}", table.join(" ")))
}

fn linear_solver() -> Outcome {
    let u = build_u_matrix(&er8(), SIGMA2).unwrap();
    let mut b = vec![0.0; 8];
    b[0] = 1.0;
    let expected = exact_walk_inverse(&u, 1).unwrap() * DVector::from_vec(b.clone());
    let base = WalkConfig::uniform(0.5, 1, derive_seed(SEED, &[7])).unwrap();
    let stats = collect_stats(UNBIASED_TRIALS, 8, 1, |t| DMatrix::from_vec(8, 1, solve_linear(&u, &b, &base.fork(&[t as u64])).unwrap()));
    let check = stats.check(&DMatrix::from_column_slice(8, 1, expected.as_slice()), Z);
    outcome(
        check.passed == check.total,
        format!("{}/{} coordinates within {Z} SE, worst {:.2} SE", check.passed, check.total, check.worst),
    )
}

fn higher_powers() -> Outcome {
    let g = six_node();
    let n = g.n();
    let mut pass = true;
    let mut parts = Vec::new();
    for d in [3u32, 4] {
        let spec = LaplacianKernelSpec::new(d, SIGMA2).unwrap();
        let expected = exact_kernel_matrix(&g, &spec).unwrap();
        let base = WalkConfig::uniform(0.5, 1, derive_seed(SEED, &[8, d as u64])).unwrap();
        let stats = collect_stats(UNBIASED_TRIALS, n, n, |t| {
            estimate_kernel(&g, &spec, &base.fork(&[t as u64]), &Compression::NONE).unwrap().materialize()
        });
        let check = stats.check(&expected, Z);
        pass &= check.passed == check.total;
        for k in [None, Some(4)] {
            let chain = estimate_kernel(&g, &spec, &base, &Compression { anchors: None, jlt: k }).unwrap();
            let (x, y) = chain.as_pair().unwrap();
            let width = k.unwrap_or(n);
            pass &= x.nrows() == n && y.nrows() == n && x.ncols() == width && y.ncols() == width;
        }
        parts.push(format!("d={d}: {}/{} entries within {Z} SE, worst {:.2} SE", check.passed, check.total, check.worst));
    }
    outcome(pass, format!("{}; factor shapes N x K checked for K=N and JLT K=4", parts.join("; ")))
}

fn karate_errors(compression: Compression) -> Vec<f64> {
    let g = karate();
    let reference = karate_reference_labels();
    let mut errors: Vec<f64> = (0..KMEANS_TRIALS)
        .map(|s| {
            let cfg = WalkConfig::uniform(KARATE_PTERM, KARATE_M, derive_seed(SEED, &[9, s])).unwrap();
            let chain = symmetrize(&estimate_d2_with(&g, SIGMA2, &cfg, &compression).unwrap()).unwrap();
            let labels = kernel_kmeans_restarts(&chain, 3, KMEANS_SEED, 100, KMEANS_RESTARTS).unwrap().labels;
            clustering_error(&labels, &reference).unwrap()
        })
        .collect();
    errors.sort_by(f64::total_cmp);
    errors
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn clustering_regular() -> Outcome {
    let g = karate();
    let exact = exact_kernel_matrix(&g, &LaplacianKernelSpec::new(2, SIGMA2).unwrap()).unwrap();
    let frozen = karate_reference_labels();
    let recomputed = kernel_kmeans_restarts(&exact, 3, KMEANS_SEED, 100, KMEANS_RESTARTS).unwrap().labels;
    let fixture_ok = clustering_error(&recomputed, &frozen).unwrap() == 0.0;
    let m = median(&karate_errors(Compression::NONE));
    outcome(
        fixture_ok && m <= REG_MEDIAN,
        format!("median error over {KMEANS_TRIALS} seeds {m:.3} (band {REG_MEDIAN}), fixture reproduced {fixture_ok}"),
    )
}

fn clustering_compressed() -> Outcome {
    let k = (0.6 * karate().n() as f64).floor() as usize;
    let anchors = median(&karate_errors(Compression { anchors: Some(k), jlt: None }));
    let jlt = median(&karate_errors(Compression { anchors: None, jlt: Some(k) }));
    outcome(
        anchors <= COMPRESSED_MEDIAN && jlt <= COMPRESSED_MEDIAN,
        format!("K={k}: anchors median {anchors:.3}, JLT median {jlt:.3} (band {COMPRESSED_MEDIAN})"),
    )
}

#[derive(PartialEq, Debug)]
struct Snapshot {
    features: Vec<grf_core::sparse::CsrMatrix>,
    chains: Vec<grf_core::kernel::DecompositionChain>,
    solve: Vec<f64>,
    labels: Vec<usize>,
    frobenius: Vec<ExperimentRecord>,
    speed: Vec<u64>,
}

fn snapshot() -> Snapshot {
    let k = karate();
    let u = build_u_matrix(&k, SIGMA2).unwrap();
    let features = [Sampler::Uniform, Sampler::WeightProportional, Sampler::Reinforced { alpha: 1.0 }]
        .into_iter()
        .map(|s| compute_feature_matrix(&u, &WalkConfig::new(0.1, 20, s, SEED).unwrap()).unwrap().rows)
        .collect();
    let cfg = WalkConfig::uniform(0.1, 10, SEED).unwrap();
    let spec3 = LaplacianKernelSpec::new(3, SIGMA2).unwrap();
    let both = Compression { anchors: Some(20), jlt: Some(16) };
    let chains = vec![
        estimate_kernel(&k, &spec3, &cfg, &Compression::NONE).unwrap(),
        estimate_kernel(&k, &spec3, &cfg, &both).unwrap(),
        symmetrize(&estimate_d2_with(&k, SIGMA2, &cfg, &Compression::NONE).unwrap()).unwrap(),
    ];
    let b: Vec<f64> = (0..k.n()).map(|i| i as f64).collect();
    let solve = solve_linear(&u, &b, &cfg).unwrap();
    let labels = kernel_kmeans_restarts(&chains[2], 3, KMEANS_SEED, 100, 10).unwrap().labels;
    let small = generate_erdos_renyi(30, 0.3, 1).unwrap();
    let frobenius = run_frobenius_experiment(&small, &FrobeniusExperiment::new("er30", 1, SIGMA2, vec![0.2], vec![5], 3, SEED)).unwrap();
    let speed = run_speed_comparison(&SpeedComparison::new(vec![60], cfg)).unwrap().iter().map(|r| r.flops()).collect();
    Snapshot { features, chains, solve, labels, frobenius, speed }
}

fn determinism() -> Outcome {
    let reference = in_pool(1, snapshot);
    let mut identical = true;
    for threads in [2, 8] {
        for _ in 0..2 {
            identical &= in_pool(threads, snapshot) == reference;
        }
    }
    outcome(identical, "features (3 samplers), d=3 chains with/without anchors+JLT, symmetrized d=2, solver, k-means, Frobenius and FLOP runs compared bitwise")
}

fn positive_definiteness() -> Outcome {
    let mut graphs = small_corpus();
    graphs.push(grf_core::datasets::CorpusGraph { name: "karate", graph: karate() });
    let mut failures = Vec::new();
    let mut checked = 0;
    for entry in &graphs {
        for d in 1..=4 {
            let k = exact_kernel_matrix(&entry.graph, &LaplacianKernelSpec::new(d, SIGMA2).unwrap()).unwrap();
            checked += 1;
            if !positive_definiteness_check(&k, PD_TOL).unwrap() {
                failures.push(format!("{} d={d}", entry.name));
            }
        }
    }
    outcome(failures.is_empty(), format!("{checked} kernels checked, failures: {failures:?}"))
}
