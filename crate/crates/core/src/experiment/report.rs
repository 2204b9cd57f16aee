use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{FidelityReport, LoglikRow, Pairing, TrainTestMatrix};

/// Sequence label of rows averaged over all sequences.
pub const ALL_SEQUENCES: &str = "ALL";
const AGG: &str = "AGG";
const NA: &str = "NA";

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }

    /// `None` when any value is undefined.
    pub fn of_defined(values: &[Option<f64>]) -> Option<Self> {
        let v: Option<Vec<f64>> = values.iter().copied().collect();
        v.and_then(|v| Self::of(&v))
    }
}

/// One `(strategy, sequence, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub strategy: String,
    pub sequence: String,
    pub seed: u64,
    pub matrix: TrainTestMatrix,
    pub acc: Option<f64>,
    pub ilm: Option<f64>,
    pub bwt: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub strategy: String,
    /// A sequence name or [`ALL_SEQUENCES`].
    pub sequence: String,
    pub seeds: Vec<u64>,
    /// Per-seed values the aggregate is computed from (sequence-averaged for
    /// the `ALL` rows).
    pub acc_values: Vec<Option<f64>>,
    pub ilm_values: Vec<Option<f64>>,
    pub bwt_values: Vec<Option<f64>>,
    pub acc: Option<MeanStd>,
    pub ilm: Option<MeanStd>,
    pub bwt: Option<MeanStd>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub ilm: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCell {
    /// `kde` or `gmm`.
    pub generator: String,
    pub sequence: String,
    pub seed: u64,
    pub report: FidelityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoglikCell {
    pub sequence: String,
    pub seed: u64,
    pub rows: Vec<LoglikRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub engine_version: String,
    /// Standard deviations divide by the number of seeds.
    pub std_convention: String,
    /// The configuration file exactly as read.
    pub config: String,
    pub cells: Vec<CellReport>,
    pub aggregates: Vec<MetricAggregate>,
    pub alpha_cells: Vec<CellReport>,
    pub alpha_sweep: Vec<AlphaRow>,
    pub fidelity: Vec<FidelityCell>,
    pub loglik: Vec<LoglikCell>,
    pub total_seconds: f64,
}

fn metric_of(c: &CellReport, m: usize) -> Option<f64> {
    [c.acc, c.ilm, c.bwt][m]
}

/// Aggregates per strategy × sequence, then per strategy over the
/// sequence-averaged per-seed values.
pub(crate) fn aggregate(cells: &[CellReport], strategies: &[String], sequences: &[String], seeds: &[u64]) -> Vec<MetricAggregate> {
    let find = |st: &str, sq: &str, seed: u64| {
        cells
            .iter()
            .find(|c| c.strategy == st && c.sequence == sq && c.seed == seed)
            .expect("every cell was run")
    };
    let build = |strategy: &str, sequence: &str, values: [Vec<Option<f64>>; 3]| {
        let [acc_values, ilm_values, bwt_values] = values;
        MetricAggregate {
            strategy: strategy.to_string(),
            sequence: sequence.to_string(),
            seeds: seeds.to_vec(),
            acc: MeanStd::of_defined(&acc_values),
            ilm: MeanStd::of_defined(&ilm_values),
            bwt: MeanStd::of_defined(&bwt_values),
            acc_values,
            ilm_values,
            bwt_values,
        }
    };
    let mut out = Vec::new();
    for st in strategies {
        for sq in sequences {
            let values = std::array::from_fn(|m| seeds.iter().map(|&s| metric_of(find(st, sq, s), m)).collect());
            out.push(build(st, sq, values));
        }
        let values = std::array::from_fn(|m| {
            seeds
                .iter()
                .map(|&s| {
                    let per_seq: Option<Vec<f64>> = sequences.iter().map(|sq| metric_of(find(st, sq, s), m)).collect();
                    per_seq.map(|v| v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect()
        });
        out.push(build(st, ALL_SEQUENCES, values));
    }
    out
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| format!("{x}"))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<PathBuf> {
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

impl RunReport {
    fn strategies(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for c in &self.cells {
            if !v.contains(&c.strategy) {
                v.push(c.strategy.clone());
            }
        }
        v
    }

    /// `strategy,sequence,seed_or_AGG,acc,acc_std,ilm,ilm_std,bwt,bwt_std`.
    pub fn write_metrics_csv(&self, path: &Path) -> Result<PathBuf> {
        let mut w = csv_writer(path)?;
        w.write_record(["strategy", "sequence", "seed_or_AGG", "acc", "acc_std", "ilm", "ilm_std", "bwt", "bwt_std"])?;
        for agg in &self.aggregates {
            for (i, seed) in agg.seeds.iter().enumerate() {
                let s = seed.to_string();
                let (a, il, b) = (num(agg.acc_values[i]), num(agg.ilm_values[i]), num(agg.bwt_values[i]));
                w.write_record([&agg.strategy, &agg.sequence, &s, &a, "", &il, "", &b, ""])?;
            }
            let pair = |m: Option<MeanStd>| (num(m.map(|m| m.mean)), num(m.map(|m| m.std)));
            let ((a, asd), (il, isd), (b, bsd)) = (pair(agg.acc), pair(agg.ilm), pair(agg.bwt));
            w.write_record([&agg.strategy, &agg.sequence, AGG, &a, &asd, &il, &isd, &b, &bsd])?;
        }
        finish(w, path)
    }

    /// First-domain accuracy after each session: `strategy,sequence,session,mean,std`.
    pub fn write_curves_csv(&self, path: &Path) -> Result<PathBuf> {
        let mut w = csv_writer(path)?;
        w.write_record(["strategy", "sequence", "session", "mean", "std"])?;
        for st in self.strategies() {
            let mut sequences: Vec<&str> = Vec::new();
            for c in self.cells.iter().filter(|c| c.strategy == st) {
                if !sequences.contains(&c.sequence.as_str()) {
                    sequences.push(&c.sequence);
                }
            }
            for sq in sequences {
                let runs: Vec<&CellReport> = self.cells.iter().filter(|c| c.strategy == st && c.sequence == sq).collect();
                let t = runs[0].matrix.size();
                for i in 0..t {
                    let vals: Vec<Option<f64>> = runs.iter().map(|c| c.matrix.get(i, 0)).collect();
                    if let Some(ms) = MeanStd::of_defined(&vals) {
                        let session = (i + 1).to_string();
                        w.write_record([st.as_str(), sq, &session, &num(Some(ms.mean)), &num(Some(ms.std))])?;
                    }
                }
            }
        }
        finish(w, path)
    }

    /// `alpha,ilm,ilm_std`.
    pub fn write_alpha_csv(&self, path: &Path) -> Result<PathBuf> {
        let mut w = csv_writer(path)?;
        w.write_record(["alpha", "ilm", "ilm_std"])?;
        for r in &self.alpha_sweep {
            w.write_record([num(Some(r.alpha)), num(r.ilm.map(|m| m.mean)), num(r.ilm.map(|m| m.std))])?;
        }
        finish(w, path)
    }

    /// Session-averaged fidelity per seed, with per-sequence and overall aggregates.
    pub fn write_fidelity_csv(&self, path: &Path) -> Result<PathBuf> {
        let mut w = csv_writer(path)?;
        w.write_record([
            "generator", "sequence", "seed_or_AGG", "pairing", "cosine", "cosine_std", "euclidean",
            "euclidean_std", "fid", "fid_std", "mmd", "mmd_std",
        ])?;
        let metric = |c: &FidelityCell, m: usize| {
            let r = &c.report.mean;
            [r.cosine, r.euclidean, r.fid, r.mmd][m]
        };
        let mut generators: Vec<&str> = Vec::new();
        let mut sequences: Vec<&str> = Vec::new();
        for c in &self.fidelity {
            if !generators.contains(&c.generator.as_str()) {
                generators.push(&c.generator);
            }
            if !sequences.contains(&c.sequence.as_str()) {
                sequences.push(&c.sequence);
            }
        }
        for g in generators {
            let mut per_seed_all: Vec<(u64, Vec<[f64; 4]>)> = Vec::new();
            let mut pairing = Pairing::default();
            for sq in &sequences {
                let cells: Vec<&FidelityCell> = self.fidelity.iter().filter(|c| c.generator == g && c.sequence == *sq).collect();
                if cells.is_empty() {
                    continue;
                }
                pairing = cells[0].report.pairing;
                let p = pairing_label(pairing);
                for c in &cells {
                    let vals: [f64; 4] = std::array::from_fn(|m| metric(c, m));
                    let mut rec = vec![g.to_string(), sq.to_string(), c.seed.to_string(), p.to_string()];
                    for v in vals {
                        rec.push(num(Some(v)));
                        rec.push(String::new());
                    }
                    w.write_record(&rec)?;
                    match per_seed_all.iter_mut().find(|(s, _)| *s == c.seed) {
                        Some((_, v)) => v.push(vals),
                        None => per_seed_all.push((c.seed, vec![vals])),
                    }
                }
                let mut rec = vec![g.to_string(), sq.to_string(), AGG.to_string(), p.to_string()];
                for m in 0..4 {
                    let ms = MeanStd::of(&cells.iter().map(|c| metric(c, m)).collect::<Vec<_>>());
                    rec.push(num(ms.map(|x| x.mean)));
                    rec.push(num(ms.map(|x| x.std)));
                }
                w.write_record(&rec)?;
            }
            let mut rec = vec![g.to_string(), ALL_SEQUENCES.to_string(), AGG.to_string(), pairing_label(pairing).to_string()];
            for m in 0..4 {
                let per_seed: Vec<f64> = per_seed_all
                    .iter()
                    .map(|(_, v)| v.iter().map(|x| x[m]).sum::<f64>() / v.len() as f64)
                    .collect();
                let ms = MeanStd::of(&per_seed);
                rec.push(num(ms.map(|x| x.mean)));
                rec.push(num(ms.map(|x| x.std)));
            }
            w.write_record(&rec)?;
        }
        finish(w, path)
    }

    /// `sequence,seed_or_AGG,prefix_len,kde,kde_std,gmm,gmm_std`.
    pub fn write_loglik_csv(&self, path: &Path) -> Result<PathBuf> {
        let mut w = csv_writer(path)?;
        w.write_record(["sequence", "seed_or_AGG", "prefix_len", "kde", "kde_std", "gmm", "gmm_std"])?;
        let mut sequences: Vec<&str> = Vec::new();
        for c in &self.loglik {
            if !sequences.contains(&c.sequence.as_str()) {
                sequences.push(&c.sequence);
            }
        }
        for sq in sequences {
            let cells: Vec<&LoglikCell> = self.loglik.iter().filter(|c| c.sequence == sq).collect();
            for c in &cells {
                for r in &c.rows {
                    w.write_record([sq, &c.seed.to_string(), &r.prefix_len.to_string(), &num(Some(r.kde)), "", &num(Some(r.gmm)), ""])?;
                }
            }
            for k in 0..cells[0].rows.len() {
                let kde = MeanStd::of(&cells.iter().map(|c| c.rows[k].kde).collect::<Vec<_>>()).expect("nonempty");
                let gmm = MeanStd::of(&cells.iter().map(|c| c.rows[k].gmm).collect::<Vec<_>>()).expect("nonempty");
                w.write_record([
                    sq,
                    AGG,
                    &(k + 1).to_string(),
                    &num(Some(kde.mean)),
                    &num(Some(kde.std)),
                    &num(Some(gmm.mean)),
                    &num(Some(gmm.std)),
                ])?;
            }
        }
        finish(w, path)
    }
}

fn pairing_label(p: Pairing) -> &'static str {
    match p {
        Pairing::AllPairs => "all_pairs",
        Pairing::IndexMatched => "index_matched",
    }
}
