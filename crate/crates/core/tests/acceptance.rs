//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits 0 even when a criterion fails so the rest of the workspace tests keep
//! running; set `ACCEPTANCE_STRICT=1` to turn any failure into a non-zero exit.
//! `ACCEPTANCE_SKIP_BENCHMARK=1` skips the two long benchmark runs (4, 5, 9).

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{array, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use latent_replay::classifier::{loss_and_grad, KlDirection, MlpClassifier, Params};
use latent_replay::continual::{
    assemble_hybrid_batch, batch_plan, update_replay, ReplayState, StrategyConfig, StrategyKind,
};
use latent_replay::density::{silverman_bandwidth, GmmModel, KdeGenerator, LatentGenerator};
use latent_replay::experiment::{run_experiment, write_outputs, ExperimentConfig, RunOptions, ALL_SEQUENCES};
use latent_replay::metrics::{
    acc, bwt, fid, fidelity_report, ilm, loglik_comparison, mmd, FidMode, FidelityConfig, TrainTestMatrix,
};
use latent_replay::rng::stream;
use latent_replay::store::{synthesize_benchmark, BenchmarkSpec, DomainData, LatentDataset};

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
}

/// Runs one criterion; exceeding `budget` seconds is a failure.
fn check(id: u32, title: &'static str, budget: f64, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (ok, detail) = f();
    let seconds = t.elapsed().as_secs_f64();
    let pass = ok && seconds < budget;
    println!(
        "{} {id}. {title} ({seconds:.2}s, budget {budget}s): {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    Outcome { id, title, pass }
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = stream(seed, &[9_001]);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut r))
}

// ---------------------------------------------------------------- 1

/// Textbook forms on a 1-based matrix `p[i-1][j-1]`.
fn oracle(p: &[Vec<f64>]) -> (f64, f64, f64) {
    let t = p.len();
    let mut last = 0.0;
    for j in 1..=t {
        last += p[t - 1][j - 1];
    }
    let acc = last / t as f64;

    let mut outer = 0.0;
    for j in 1..t {
        let mut inner = 0.0;
        let mut count = 0;
        for i in (j + 1)..=t {
            inner += p[i - 1][j - 1] - p[j - 1][j - 1];
            count += 1;
        }
        outer += inner / count as f64;
    }
    let bwt = outer / (t - 1) as f64;

    let mut lower = 0.0;
    for i in 1..=t {
        for j in 1..=i {
            lower += p[i - 1][j - 1];
        }
    }
    let ilm = lower / (t * (t + 1) / 2) as f64;
    (acc, bwt, ilm)
}

fn criterion_1() -> (bool, String) {
    const LEVELS: [f64; 5] = [0.0, 25.0, 50.0, 75.0, 100.0];
    let mut checked = 0u64;
    let mut mismatches = 0u64;
    for t in [2usize, 3] {
        let cells = t * t;
        let mut m = TrainTestMatrix::new(t);
        let mut p = vec![vec![0.0; t]; t];
        for code in 0..5u64.pow(cells as u32) {
            let mut c = code;
            for k in 0..cells {
                let v = LEVELS[(c % 5) as usize];
                c /= 5;
                p[k / t][k % t] = v;
                m.set(k / t, k % t, v).unwrap();
            }
            let got = (acc(&m).unwrap(), bwt(&m).unwrap(), ilm(&m).unwrap());
            if got != oracle(&p) {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    let worked = TrainTestMatrix::from_rows(&[vec![100.0, 0.0], vec![90.0, 80.0]]).unwrap();
    let example = (acc(&worked).unwrap(), bwt(&worked).unwrap(), ilm(&worked).unwrap());
    let example_ok = example == (85.0, -10.0, 90.0);
    (
        mismatches == 0 && example_ok,
        format!(
            "{checked} matrices, {mismatches} mismatches; worked example ACC={} BWT={} ILM={}",
            example.0, example.1, example.2
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Loss recomputed from logits alone, independent of the backward pass.
fn forward_loss(model: &MlpClassifier, x: &Array2<f64>, y: &[usize], teacher: &Array2<f64>, alpha: f64) -> f64 {
    let logits = model.forward(x.view()).unwrap();
    let n = x.nrows() as f64;
    let log_softmax = |row: Vec<f64>| {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
        row.into_iter().map(|z| z - lse).collect::<Vec<_>>()
    };
    let (mut ce, mut kl) = (0.0, 0.0);
    for i in 0..x.nrows() {
        let ls = log_softmax(logits.row(i).to_vec());
        let lt = log_softmax(teacher.row(i).to_vec());
        ce -= ls[y[i]];
        kl += lt.iter().zip(&ls).map(|(t, s)| t.exp() * (t - s)).sum::<f64>();
    }
    (1.0 - alpha) * ce / n + alpha * kl / n
}

/// Smallest |pre-activation| over all hidden units. Central differences are
/// only meaningful when no ReLU switches inside the ±h stencil.
fn kink_margin(model: &MlpClassifier, x: &Array2<f64>) -> f64 {
    let p = model.params();
    let mut a = x.clone();
    let mut margin = f64::INFINITY;
    for (w, b) in p.weights.iter().zip(&p.biases).take(p.weights.len() - 1) {
        let z = a.dot(w) + b;
        margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
        a = z.mapv(|v| v.max(0.0));
    }
    margin
}

fn criterion_2() -> (bool, String) {
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    let mut skipped = 0;
    for alpha in [0.0, 0.5, 1.0] {
        let mut seed = 1000;
        for _ in 0..20 {
            let (model, x) = loop {
                seed += 1;
                let model = MlpClassifier::with_hidden(8, &[16, 8], 3, seed).unwrap();
                let x = gaussian(4, 8, seed);
                if kink_margin(&model, &x) > 1e-3 {
                    break (model, x);
                }
                skipped += 1;
            };
            let teacher = gaussian(4, 3, seed + 500);
            let mut r = stream(seed, &[77]);
            let y: Vec<usize> = (0..4).map(|_| r.random_range(0..3)).collect();
            let (_, grads) =
                loss_and_grad(&model, x.view(), &y, Some(teacher.view()), alpha, KlDirection::TeacherStudent).unwrap();
            let analytic = grads.flatten();
            let flat = model.params().flatten();
            let dims = model.layer_dims().to_vec();
            let at = |f: &[f64]| {
                let p = Params::from_flat(&dims, f).unwrap();
                let m = MlpClassifier::from_params(dims.clone(), p, model.activation()).unwrap();
                forward_loss(&m, &x, &y, &teacher, alpha)
            };
            let mut work = flat.clone();
            for i in 0..flat.len() {
                work[i] = flat[i] + h;
                let up = at(&work);
                work[i] = flat[i] - h;
                let down = at(&work);
                work[i] = flat[i];
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[i];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(err);
            }
            instances += 1;
        }
    }
    (
        worst <= 1e-5,
        format!(
            "{instances} instances (d=8, C=3, n=4, α∈{{0,0.5,1}}), max relative error {worst:.2e}; \
             {skipped} draws rejected for a ReLU within 1e-3 of its kink"
        ),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> (bool, String) {
    let support = gaussian(25, 6, 3);
    let kde = KdeGenerator::new(support.clone()).unwrap();
    let b = kde.bandwidth();
    let n = support.nrows();
    let gmm = GmmModel::new(vec![1.0 / n as f64; n], support.clone(), Array2::from_elem((n, 6), b * b)).unwrap();
    let queries = gaussian(200, 6, 4) * 1.5;
    let ll_gap = (kde.log_likelihood(queries.view()).unwrap() - gmm.log_likelihood(queries.view()).unwrap()).abs();

    let base = silverman_bandwidth(support.view()).unwrap();
    let equivariant = [0.25, 0.5, 2.0, 8.0]
        .iter()
        .all(|&c| silverman_bandwidth((&support * c).view()).unwrap() == c * base);

    let a = gaussian(300, 5, 5);
    let fid_self = fid(a.view(), a.view(), FidMode::Full).unwrap();
    let mmd_self = mmd(a.view(), a.view(), None).unwrap();
    let fid_1d = fid(array![[-1.0], [0.0], [1.0]].view(), array![[0.0], [1.0], [2.0]].view(), FidMode::Full).unwrap();

    let pass = ll_gap <= 1e-10 && equivariant && fid_self <= 1e-8 && mmd_self == 0.0 && (fid_1d - 1.0).abs() <= 1e-9;
    (
        pass,
        format!(
            "KDE vs matched GMM |ΔLL|={ll_gap:.1e}; Silverman equivariance exact={equivariant}; \
             FID(A,A)={fid_self:.1e}; MMD(A,A)={mmd_self}; 1-D FID={fid_1d}"
        ),
    )
}

// ---------------------------------------------------------------- 4, 5, 9

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

struct BenchmarkRun {
    metrics_csv: Vec<u8>,
    report: latent_replay::experiment::RunReport,
}

fn run_benchmark() -> BenchmarkRun {
    let path = repo_root().join("configs/benchmark.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let cfg = ExperimentConfig::from_json(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        jobs: 0,
        output_dir: None,
    };
    let report = run_experiment(&cfg, &text, path.parent().unwrap(), &opts).unwrap();
    write_outputs(&report, dir.path()).unwrap();
    BenchmarkRun {
        metrics_csv: std::fs::read(dir.path().join("metrics.csv")).unwrap(),
        report,
    }
}

fn mean_metric(run: &BenchmarkRun, strategy: &str, pick: fn(&latent_replay::experiment::MetricAggregate) -> Option<f64>) -> f64 {
    run.report
        .aggregates
        .iter()
        .find(|a| a.strategy == strategy && a.sequence == ALL_SEQUENCES)
        .and_then(pick)
        .unwrap_or(f64::NAN)
}

fn criterion_4(run: &BenchmarkRun) -> (bool, String) {
    let acc_of = |s| mean_metric(run, s, |a| a.acc.map(|m| m.mean));
    let bwt_of = |s| mean_metric(run, s, |a| a.bwt.map(|m| m.mean));
    let (ap, an) = (acc_of("proposed"), acc_of("naive"));
    let (bp, bn) = (bwt_of("proposed"), bwt_of("naive"));
    (
        ap >= an + 10.0 && bp >= bn + 10.0,
        format!(
            "ACC proposed {ap:.2} vs naive {an:.2} (Δ {:.2}); BWT proposed {bp:.2} vs naive {bn:.2} (Δ {:.2}); run {:.0}s",
            ap - an,
            bp - bn,
            run.report.total_seconds
        ),
    )
}

fn criterion_5(run: &BenchmarkRun) -> (bool, String) {
    let order = ["proposed", "glr_only", "dst_only", "naive"];
    let accs: Vec<f64> = order.iter().map(|s| mean_metric(run, s, |a| a.acc.map(|m| m.mean))).collect();
    let pass = accs.windows(2).all(|w| w[0] - w[1] >= -1.0);
    let listing: Vec<String> = order.iter().zip(&accs).map(|(s, a)| format!("{s} {a:.2}")).collect();
    (pass, format!("mean ACC {}", listing.join(" ≥ ")))
}

fn criterion_9(first: &BenchmarkRun, second: &BenchmarkRun) -> (bool, String) {
    let same = first.metrics_csv == second.metrics_csv;
    (
        same && !first.metrics_csv.is_empty(),
        format!(
            "metrics.csv {} bytes, byte-identical={same}; second run {:.0}s",
            first.metrics_csv.len(),
            second.report.total_seconds
        ),
    )
}

// ---------------------------------------------------------------- 6, 7

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn standard_domains() -> Vec<DomainData> {
    synthesize_benchmark(&BenchmarkSpec::default()).unwrap()
}

fn replay_history(domains: &[DomainData], cfg: &StrategyConfig) -> Vec<ReplayState> {
    let mut state = ReplayState::None;
    let mut out = Vec::new();
    for (i, d) in domains.iter().enumerate() {
        state = update_replay(&state, &d.train, cfg, i).unwrap();
        out.push(state.clone());
    }
    out
}

fn as_generators(states: &[ReplayState]) -> Vec<&dyn LatentGenerator> {
    states.iter().map(|s| s.as_generator().unwrap()).collect()
}

fn criterion_6(domains: &[DomainData]) -> (bool, String) {
    let tests: Vec<&LatentDataset> = domains.iter().map(|d| &d.test).collect();
    let mut wins = 0;
    let mut notes = Vec::new();
    for seed in SEEDS {
        let kde = replay_history(domains, &StrategyConfig { seed, ..StrategyConfig::new(StrategyKind::Proposed) });
        let gmm = replay_history(domains, &StrategyConfig { seed, ..StrategyConfig::new(StrategyKind::GlrclGmm) });
        let rows = loglik_comparison(&tests, &as_generators(&kde), &as_generators(&gmm)).unwrap();
        let min_gap = rows.iter().map(|r| r.kde - r.gmm).fold(f64::INFINITY, f64::min);
        if min_gap > 0.0 {
            wins += 1;
        }
        notes.push(format!("{min_gap:+.2}"));
    }
    (
        wins >= 4,
        format!("KDE > GMM bank at every prefix in {wins}/5 seeds (min gap per seed {})", notes.join(", ")),
    )
}

fn criterion_7(domains: &[DomainData]) -> (bool, String) {
    let trains: Vec<&LatentDataset> = domains.iter().map(|d| &d.train).collect();
    let mut wins = 0;
    let (mut fid_w, mut mmd_w, mut cos_w) = (0, 0, 0);
    for seed in SEEDS {
        let kde = replay_history(domains, &StrategyConfig { seed, ..StrategyConfig::new(StrategyKind::Proposed) });
        let gmm1 = replay_history(
            domains,
            &StrategyConfig {
                seed,
                gmm_components: 1,
                ..StrategyConfig::new(StrategyKind::GlrclGmm)
            },
        );
        let last = domains.len() - 1;
        let cfg = FidelityConfig::default();
        let k = fidelity_report(&as_generators(&kde)[..last], &trains, &cfg, seed).unwrap().mean;
        let g = fidelity_report(&as_generators(&gmm1)[..last], &trains, &cfg, seed).unwrap().mean;
        let (f, m, c) = (k.fid < g.fid, k.mmd < g.mmd, k.cosine > g.cosine);
        fid_w += f as u32;
        mmd_w += m as u32;
        cos_w += c as u32;
        if f && m && c {
            wins += 1;
        }
    }
    (
        wins >= 4,
        format!("KDE better on all three in {wins}/5 seeds (FID {fid_w}/5, MMD {mmd_w}/5, cosine {cos_w}/5)"),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8(domains: &[DomainData]) -> (bool, String) {
    let kde = replay_history(domains, &StrategyConfig::new(StrategyKind::Proposed));
    let support = kde.last().unwrap().size();

    let buffer = replay_history(domains, &StrategyConfig::new(StrategyKind::LatentBuffer));
    let buffer_max = buffer.iter().map(ReplayState::size).max().unwrap();

    let train = &domains[1].train;
    let teacher = MlpClassifier::new(train.dim(), train.class_count, 7).unwrap();
    let plan = batch_plan(train.len(), 64, 0.5);
    let full: Vec<_> = plan.iter().filter(|b| b.real + b.generated == 64).collect();
    let first = &plan[0];
    let idx: Vec<usize> = (0..first.real).collect();
    let mut r = stream(7, &[1]);
    let batch = assemble_hybrid_batch(train, &idx, first.generated, &kde[0], Some(&teacher), true, &mut r).unwrap();
    let generated_rows = batch.latents.nrows() - idx.len();
    let all_half = full.iter().all(|b| b.generated == 32);

    (
        support == 40 && buffer_max <= 40 && all_half && batch.labels.len() == 64 && generated_rows == 32,
        format!(
            "KDE support after 4 episodes {support}; buffer max size {buffer_max}; \
             {} full batches all 32+32={all_half}; assembled batch {} rows, {generated_rows} generated",
            full.len(),
            batch.labels.len()
        ),
    )
}

fn main() {
    let start = Instant::now();
    let skip_benchmark = std::env::var_os("ACCEPTANCE_SKIP_BENCHMARK").is_some();
    let mut outcomes = vec![
        check(1, "metric oracles", 1.0, criterion_1),
        check(2, "gradient correctness", 10.0, criterion_2),
        check(3, "density-core identities", 5.0, criterion_3),
    ];
    let domains = standard_domains();
    if skip_benchmark {
        println!("SKIP 4, 5, 9 (ACCEPTANCE_SKIP_BENCHMARK set)");
    } else {
        // 5 shares the first run with 4; 9 repeats it.
        let mut first = None;
        outcomes.push(check(4, "catastrophic-forgetting reproduction", 600.0, || {
            criterion_4(first.insert(run_benchmark()))
        }));
        let first = first.unwrap();
        outcomes.push(check(5, "ablation ordering", 600.0, || criterion_5(&first)));
        outcomes.push(check(9, "determinism", 600.0, || criterion_9(&first, &run_benchmark())));
    }
    outcomes.push(check(6, "KDE vs GMM log-likelihood", 120.0, || criterion_6(&domains)));
    outcomes.push(check(7, "generator fidelity direction", 120.0, || criterion_7(&domains)));
    outcomes.push(check(8, "protocol fidelity", 1.0, || criterion_8(&domains)));
    outcomes.sort_by_key(|o| o.id);

    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| format!("{} {}", o.id, o.title)).collect();
    println!(
        "acceptance: {}/{} passed in {:.0}s{}",
        outcomes.len() - failed.len(),
        outcomes.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!(", failing {failed:?}") }
    );
    if !failed.is_empty() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
