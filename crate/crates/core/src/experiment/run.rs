use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{BenchmarkConfig, ExperimentConfig, SCHEMA_VERSION};
use super::report::{aggregate, AlphaRow, CellReport, FidelityCell, LoglikCell, RunReport, ALL_SEQUENCES};
use crate::continual::{run_sequence, update_replay, ReplayState, StrategyConfig};
use crate::density::LatentGenerator;
use crate::error::{Error, Result};
use crate::metrics::{acc, bwt, fidelity_report, ilm, loglik_comparison, FidelityConfig};
use crate::rng::derive_seed;
use crate::store::{build_sequence, load_dataset, make_split, synthesize_benchmark, DomainData, EpisodeSequence, LatentDataset};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for independent cells; 0 uses all cores.
    pub jobs: usize,
    /// Overrides the config's output directory.
    pub output_dir: Option<PathBuf>,
}

/// Builds or loads every benchmark domain. Manifest paths are resolved
/// against `base_dir`.
pub fn prepare_domains(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Vec<DomainData>> {
    match &cfg.benchmark {
        BenchmarkConfig::Synthetic(spec) => synthesize_benchmark(spec),
        BenchmarkConfig::Manifests(m) => m
            .domains
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let train = load_dataset(ExperimentConfig::resolve(base_dir, &d.train))?;
                match &d.test {
                    Some(t) => Ok(DomainData {
                        train,
                        test: load_dataset(ExperimentConfig::resolve(base_dir, t))?,
                    }),
                    None => {
                        let (train, test) = make_split(&train, m.test_per_class, derive_seed(m.split_seed, &[k as u64]))?;
                        Ok(DomainData { train, test })
                    }
                }
            })
            .collect(),
    }
}

fn opt(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NotApplicable(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn run_cell(strategy: &StrategyConfig, seq: &EpisodeSequence, seed: u64) -> Result<CellReport> {
    let label = format!("{}/{}/seed {seed}", strategy.label(), seq.name);
    let start = Instant::now();
    let cfg = StrategyConfig {
        seed,
        ..strategy.clone()
    };
    let wrap = |e: Error| Error::Cell {
        cell: label.clone(),
        source: Box::new(e),
    };
    let run = run_sequence(seq, &cfg).map_err(wrap)?;
    let m = run.matrix;
    let report = CellReport {
        strategy: strategy.label().to_string(),
        sequence: seq.name.clone(),
        seed,
        acc: opt(acc(&m)).map_err(wrap)?,
        ilm: opt(ilm(&m)).map_err(wrap)?,
        bwt: opt(bwt(&m)).map_err(wrap)?,
        matrix: m,
        seconds: start.elapsed().as_secs_f64(),
    };
    log::info!("finished {label} in {:.1}s", report.seconds);
    Ok(report)
}

/// KDE and GMM replay states after each episode, built without training.
fn generator_states(seq: &EpisodeSequence, base: &StrategyConfig, seed: u64) -> Result<Vec<ReplayState>> {
    let cfg = StrategyConfig {
        seed,
        ..base.clone()
    };
    let mut state = ReplayState::None;
    let mut out = Vec::with_capacity(seq.len());
    for (i, ep) in seq.episodes.iter().enumerate() {
        state = update_replay(&state, &ep.train, &cfg, i)?;
        out.push(state.clone());
    }
    Ok(out)
}

fn generators(states: &[ReplayState]) -> Vec<&dyn LatentGenerator> {
    states.iter().filter_map(ReplayState::as_generator).collect()
}

struct GeneratorEval {
    fidelity: Vec<FidelityCell>,
    loglik: Option<LoglikCell>,
}

fn evaluate_generators(
    cfg: &ExperimentConfig,
    fidelity: Option<&FidelityConfig>,
    seq: &EpisodeSequence,
    seed: u64,
) -> Result<GeneratorEval> {
    let label = format!("generators/{}/seed {seed}", seq.name);
    let inner = || -> Result<GeneratorEval> {
        let kde_states = generator_states(seq, &cfg.proposed_base(), seed)?;
        let gmm_states = generator_states(seq, &cfg.gmm_base(), seed)?;
        let (kde, gmm) = (generators(&kde_states), generators(&gmm_states));
        let trains: Vec<&LatentDataset> = seq.episodes.iter().map(|e| &e.train).collect();
        let tests: Vec<&LatentDataset> = seq.episodes.iter().map(|e| &e.test).collect();
        let mut out = GeneratorEval {
            fidelity: Vec::new(),
            loglik: None,
        };
        if let Some(fc) = fidelity {
            if seq.len() >= 2 {
                for (name, g) in [("kde", &kde), ("gmm", &gmm)] {
                    out.fidelity.push(FidelityCell {
                        generator: name.into(),
                        sequence: seq.name.clone(),
                        seed,
                        report: fidelity_report(&g[..seq.len() - 1], &trains, fc, seed)?,
                    });
                }
            }
        }
        if cfg.loglik {
            out.loglik = Some(LoglikCell {
                sequence: seq.name.clone(),
                seed,
                rows: loglik_comparison(&tests, &kde, &gmm)?,
            });
        }
        Ok(out)
    };
    inner().map_err(|e| Error::Cell {
        cell: label,
        source: Box::new(e),
    })
}

fn alpha_label(alpha: f64) -> String {
    format!("alpha={alpha}")
}

/// Runs every cell of a validated config. Nothing is written to disk.
pub fn run_experiment(cfg: &ExperimentConfig, config_text: &str, base_dir: &Path, opts: &RunOptions) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let domains = prepare_domains(cfg, base_dir)?;
    let sequences: Vec<EpisodeSequence> = cfg
        .sequences
        .iter()
        .map(|s| build_sequence(s.name.clone(), &domains, &s.order))
        .collect::<Result<_>>()?;

    let mut strategies: Vec<StrategyConfig> = cfg.strategies.clone();
    let main_count = strategies.len();
    if let Some(alphas) = &cfg.alpha_sweep {
        let base = cfg.proposed_base();
        for &a in alphas {
            strategies.push(StrategyConfig {
                name: Some(alpha_label(a)),
                alpha: a,
                ..base.clone()
            });
        }
    }
    let mut tasks = Vec::new();
    for (si, _) in strategies.iter().enumerate() {
        for (qi, _) in sequences.iter().enumerate() {
            for &seed in &cfg.seeds {
                tasks.push((si, qi, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let results: Vec<Result<CellReport>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(si, qi, seed)| run_cell(&strategies[si], &sequences[qi], seed))
            .collect()
    });
    let mut all_cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let alpha_cells = all_cells.split_off(tasks.iter().take_while(|(si, _, _)| *si < main_count).count());
    let cells = all_cells;

    let mut fidelity = Vec::new();
    let mut loglik = Vec::new();
    if cfg.fidelity.is_some() || cfg.loglik {
        let evals: Vec<Result<GeneratorEval>> = pool.install(|| {
            sequences
                .par_iter()
                .flat_map(|seq| cfg.seeds.par_iter().map(move |&seed| (seq, seed)))
                .map(|(seq, seed)| evaluate_generators(cfg, cfg.fidelity.as_ref(), seq, seed))
                .collect()
        });
        for e in evals {
            let e = e?;
            fidelity.extend(e.fidelity);
            loglik.extend(e.loglik);
        }
    }

    let seq_names: Vec<String> = sequences.iter().map(|s| s.name.clone()).collect();
    let main_labels: Vec<String> = strategies[..main_count].iter().map(|s| s.label().to_string()).collect();
    let aggregates = aggregate(&cells, &main_labels, &seq_names, &cfg.seeds);
    let alpha_sweep = match &cfg.alpha_sweep {
        Some(alphas) => {
            let labels: Vec<String> = alphas.iter().map(|&a| alpha_label(a)).collect();
            let aggs = aggregate(&alpha_cells, &labels, &seq_names, &cfg.seeds);
            alphas
                .iter()
                .zip(&labels)
                .map(|(&alpha, l)| AlphaRow {
                    alpha,
                    ilm: aggs
                        .iter()
                        .find(|a| &a.strategy == l && a.sequence == ALL_SEQUENCES)
                        .and_then(|a| a.ilm),
                })
                .collect()
        }
        None => Vec::new(),
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        engine_version: env!("CARGO_PKG_VERSION").to_string(),
        std_convention: "population".into(),
        config: config_text.to_string(),
        cells,
        aggregates,
        alpha_cells,
        alpha_sweep,
        fidelity,
        loglik,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Writes `report.json`, `metrics.csv`, `curves.csv` and the optional tables.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
    let mut written = vec![
        json_path,
        report.write_metrics_csv(&dir.join("metrics.csv"))?,
        report.write_curves_csv(&dir.join("curves.csv"))?,
    ];
    if !report.alpha_sweep.is_empty() {
        written.push(report.write_alpha_csv(&dir.join("alpha_sweep.csv"))?);
    }
    if !report.fidelity.is_empty() {
        written.push(report.write_fidelity_csv(&dir.join("fidelity.csv"))?);
    }
    if !report.loglik.is_empty() {
        written.push(report.write_loglik_csv(&dir.join("loglik.csv"))?);
    }
    Ok(written)
}

/// Reads, validates and runs a config file, then writes the outputs.
/// Returns the report and the output directory.
pub fn run_experiment_file(path: &Path, opts: &RunOptions) -> Result<(RunReport, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    let out_dir = match &opts.output_dir {
        Some(d) => d.clone(),
        None => ExperimentConfig::resolve(base_dir, &cfg.output_dir),
    };
    let report = run_experiment(&cfg, &text, base_dir, opts)?;
    write_outputs(&report, &out_dir)?;
    Ok((report, out_dir))
}
