//! Executes a [`RunConfig`] and writes its artifacts.
//!
//! Every output directory holds `config.resolved.toml`, `metadata.json` and
//! task-specific CSV/JSON files. Nothing time- or host-dependent is written,
//! so replaying the resolved config reproduces every file byte for byte in
//! exact-probability mode. Work runs in parallel; files are written afterwards
//! from a single thread in a fixed order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::circuit::{PhaseTag, MZI_CONVENTION};
use crate::config::{DatasetSource, ProbeKind, RunConfig, TaskKind};
use crate::data::{load_dataset, synth_dataset, VowelDataset};
use crate::dqfim::{capacity_vs_k, capacity_vs_l, CapacityScan, ScanSettings};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tasks::{
    run_metric_learning, run_unitary_learning, MetricOutcome, MetricTaskSpec, ProbeStates, UnitaryOutcome,
    UnitaryTaskSpec,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "MPQML_THREADS";

/// Sequential file sink for one output directory.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }
}

/// Shortest round-trip decimal form, independent of locale.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Headline numbers of a finished run, also stored as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub task: String,
    pub seed: u64,
    pub output: PathBuf,
    pub summary: Value,
}

pub fn run(config: &RunConfig, out: &Path) -> Result<RunSummary> {
    config.validate()?;
    let mut w = ArtifactWriter::create(out)?;
    w.write("config.resolved.toml", &config.to_toml()?)?;
    let (summary, meta) = match config.task {
        TaskKind::CapacityScanK | TaskKind::CapacityScanL => run_capacity(config, &mut w)?,
        TaskKind::TrainUnitary => run_unitary(config, &mut w)?,
        TaskKind::TrainMetric => run_metric(config, &mut w)?,
    };
    w.write_json("summary.json", &summary)?;
    let mut metadata = json!({
        "schema_version": SCHEMA_VERSION,
        "package_version": env!("CARGO_PKG_VERSION"),
        "task": config.task.name(),
        "seed": config.seed,
        "mode": config.mode,
        "mzi_convention": MZI_CONVENTION,
        "basis_order": "Fock states in lexicographically descending occupation order",
        "replay": "mpqml run --config config.resolved.toml --out <dir>",
    });
    if let (Value::Object(base), Value::Object(extra)) = (&mut metadata, meta) {
        base.extend(extra);
    }
    let mut files = w.files().to_vec();
    files.push("metadata.json".into());
    metadata["files"] = json!(files);
    w.write_json("metadata.json", &metadata)?;
    Ok(RunSummary {
        task: config.task.name().into(),
        seed: config.seed,
        output: out.to_path_buf(),
        summary,
    })
}

fn run_capacity(config: &RunConfig, w: &mut ArtifactWriter) -> Result<(Value, Value)> {
    let c = &config.capacity;
    let settings = ScanSettings {
        theta_samples: c.theta_samples,
        seed: config.seed,
        rel_tol: c.rel_tol,
        layout: c.layout,
    };
    let scan = match config.task {
        TaskKind::CapacityScanK => capacity_vs_k(c.m, c.n, c.l, &c.k_values, &settings)?,
        _ => capacity_vs_l(c.m, c.n, &c.l_values, &settings)?,
    };
    w.write("capacity.csv", &capacity_csv(&scan)?)?;
    w.write("spectrum.csv", &spectrum_csv(&scan)?)?;
    let summary = json!({
        "axis": scan.axis,
        "m": scan.m,
        "n": scan.n,
        "fixed": scan.fixed,
        "ranks": scan.ranks(),
        "max_rank": scan.max_rank(),
        "plateau": scan.plateau,
        "critical_l": scan.critical_l,
        "first_saturated": scan.points.iter().find(|p| p.rank >= scan.plateau).map(|p| p.axis_value),
    });
    let meta = json!({
        "ansatz": format!("{:?} mesh, all phases of the first K slots trainable, rest fixed at a random draw", c.layout),
        "training_data": "independent Haar-random mode unitaries applied to the input |1..1,0..0>",
        "rank_policy": {
            "rule": "count eigenvalues > max(rel_tol * max_eigenvalue, 1e-14)",
            "rel_tol": c.rel_tol,
            "robustness_columns": "rank_tight uses rel_tol/100, rank_loose uses rel_tol*100",
        },
        "theta_samples": c.theta_samples,
        "seeds": {
            "data": derive_seed(config.seed, &[0]),
            "theta": "derive_seed(seed, [1, sample])",
        },
    });
    Ok((summary, meta))
}

pub fn capacity_csv(scan: &CapacityScan) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "axis",
        "axis_value",
        "measured_rank",
        "predicted",
        "plateau",
        "tolerance",
        "rank_tight",
        "rank_loose",
    ])?;
    let axis = match scan.axis {
        crate::dqfim::ScanAxis::K => "K",
        crate::dqfim::ScanAxis::L => "L",
    };
    for p in &scan.points {
        w.write_record([
            axis.to_string(),
            p.axis_value.to_string(),
            p.rank.to_string(),
            p.predicted.to_string(),
            scan.plateau.to_string(),
            num(p.tolerance),
            p.rank_tight.to_string(),
            p.rank_loose.to_string(),
        ])?;
    }
    finish_csv(w)
}

fn spectrum_csv(scan: &CapacityScan) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["axis_value", "index", "eigenvalue"])?;
    for p in &scan.points {
        for (i, e) in p.spectrum.iter().enumerate() {
            w.write_record([p.axis_value.to_string(), i.to_string(), num(*e)])?;
        }
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Seed of repeat `r`; a single run uses the master seed itself.
fn repeat_seed(master: u64, repeats: usize, r: usize) -> u64 {
    if repeats == 1 {
        master
    } else {
        derive_seed(master, &[r as u64])
    }
}

pub fn unitary_spec(config: &RunConfig, run_seed: u64) -> UnitaryTaskSpec {
    let u = &config.unitary;
    let mut spec = UnitaryTaskSpec::new(u.m, u.n, u.probes, run_seed);
    spec.layers = u.layers;
    spec.layout = u.layout;
    spec.probe_states = match u.probe_states {
        ProbeKind::InputPorts => ProbeStates::InputPorts,
        ProbeKind::HaarEncoded => ProbeStates::HaarEncoded {
            seed: derive_seed(run_seed, &[3]),
        },
    };
    spec.gauge = u.gauge;
    spec.optimizer = u.optimizer.build(derive_seed(run_seed, &[2]));
    spec.mode = config.mode;
    spec.eval_every = u.eval_every;
    spec.success_threshold = u.success_threshold;
    spec.stall_threshold = u.stall_threshold;
    spec
}

fn run_unitary(config: &RunConfig, w: &mut ArtifactWriter) -> Result<(Value, Value)> {
    let u = &config.unitary;
    let seeds: Vec<u64> = (0..u.repeats).map(|r| repeat_seed(config.seed, u.repeats, r)).collect();
    let outcomes: Vec<UnitaryOutcome> = seeds
        .par_iter()
        .map(|&s| run_unitary_learning(&unitary_spec(config, s)))
        .collect::<Result<_>>()?;
    let mut table = String::from("run,seed,final_loss,final_closeness,success,stalled\n");
    for (r, (seed, o)) in seeds.iter().zip(&outcomes).enumerate() {
        let prefix = if u.repeats == 1 { String::new() } else { format!("run_{r:03}/") };
        w.write(&format!("{prefix}epochs.jsonl"), &o.record.to_jsonl()?)?;
        w.write_json(
            &format!("{prefix}result.json"),
            &json!({
                "seed": seed,
                "final_loss": o.final_loss,
                "final_closeness": o.final_closeness,
                "success": o.success,
                "stalled": o.stalled,
                "final_theta": o.record.final_theta,
            }),
        )?;
        writeln!(
            table,
            "{r},{seed},{},{},{},{}",
            num(o.final_loss),
            num(o.final_closeness),
            o.success,
            o.stalled
        )
        .expect("string write");
    }
    w.write("runs.csv", &table)?;
    let count = outcomes.len() as f64;
    let summary = json!({
        "m": u.m,
        "n": u.n,
        "probes": u.probes,
        "runs": outcomes.len(),
        "success_rate": outcomes.iter().filter(|o| o.success).count() as f64 / count,
        "stall_rate": outcomes.iter().filter(|o| o.stalled).count() as f64 / count,
        "mean_final_closeness": outcomes.iter().map(|o| o.final_closeness).sum::<f64>() / count,
        "success_threshold": u.success_threshold,
        "stall_threshold": u.stall_threshold,
    });
    let probes = unitary_spec(config, config.seed)
        .probe_patterns()?
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>();
    let meta = json!({
        "ansatz": format!("{} stacked {:?} layers, every phase trainable", u.layers, u.layout),
        "loss": "C_train = 1 - mean_l |<phi_l| V^dag U(theta) |phi_l>|^2",
        "closeness": format!(
            "C_M = min over local phases F and permutations P of 1 - tr(...)/m, gauge on the {:?} side",
            u.gauge
        ),
        "probe_states": u.probe_states,
        "probe_patterns": probes,
        "target": "Haar-random V from derive_seed(run_seed, [0])",
        "init": "theta uniform in [0, 2pi) from derive_seed(run_seed, [1])",
        "run_seeds": seeds,
    });
    Ok((summary, meta))
}

pub fn metric_spec(config: &RunConfig, run_seed: u64) -> MetricTaskSpec {
    let c = &config.metric;
    let mut spec = MetricTaskSpec::new(c.n, run_seed);
    spec.m = c.m;
    spec.input = c.input;
    spec.encoder_layers = c.encoder_layers;
    spec.body_layers = c.body_layers;
    spec.layout = c.layout;
    spec.split_ratio = c.split_ratio;
    spec.margin = c.margin;
    spec.snapshots = c.snapshots.clone();
    spec.optimizer = c.optimizer.build(derive_seed(run_seed, &[3]));
    spec.mode = config.mode;
    spec
}

pub fn load_metric_dataset(source: &DatasetSource) -> Result<VowelDataset> {
    match source {
        DatasetSource::Csv { path } => load_dataset(path),
        DatasetSource::Synthetic { .. } => synth_dataset(&source.synth_spec().expect("synthetic source")),
    }
}

fn run_metric(config: &RunConfig, w: &mut ArtifactWriter) -> Result<(Value, Value)> {
    let c = &config.metric;
    let dataset = load_metric_dataset(&c.dataset)?;
    let seeds: Vec<u64> = (0..c.repeats).map(|r| repeat_seed(config.seed, c.repeats, r)).collect();
    let outcomes: Vec<MetricOutcome> = seeds
        .par_iter()
        .map(|&s| run_metric_learning(&metric_spec(config, s), &dataset))
        .collect::<Result<_>>()?;
    let mut table = String::from("run,seed,final_train_loss,final_test_loss,initial_test_accuracy,final_test_accuracy\n");
    for (r, (seed, o)) in seeds.iter().zip(&outcomes).enumerate() {
        let prefix = if c.repeats == 1 { String::new() } else { format!("run_{r:03}/") };
        w.write(&format!("{prefix}epochs.jsonl"), &o.record.to_jsonl()?)?;
        for g in &o.grams {
            w.write(&format!("{prefix}gram_epoch_{:04}.csv", g.epoch), &g.to_csv()?)?;
        }
        w.write_json(
            &format!("{prefix}result.json"),
            &json!({
                "seed": seed,
                "final_train_loss": o.final_train_loss,
                "final_test_loss": o.final_test_loss,
                "initial_test_accuracy": o.initial_test_accuracy,
                "final_test_accuracy": o.final_test_accuracy,
                "pair_threshold": o.record.final_metric("pair_threshold"),
                "final_theta": o.record.final_theta,
            }),
        )?;
        writeln!(
            table,
            "{r},{seed},{},{},{},{}",
            num(o.final_train_loss),
            num(o.final_test_loss),
            num(o.initial_test_accuracy),
            num(o.final_test_accuracy)
        )
        .expect("string write");
    }
    w.write("runs.csv", &table)?;
    let count = outcomes.len() as f64;
    let mean = |f: fn(&MetricOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / count;
    let summary = json!({
        "m": c.m,
        "n": c.n,
        "runs": outcomes.len(),
        "mean_final_train_loss": mean(|o| o.final_train_loss),
        "mean_final_test_loss": mean(|o| o.final_test_loss),
        "mean_initial_test_accuracy": mean(|o| o.initial_test_accuracy),
        "mean_final_test_accuracy": mean(|o| o.final_test_accuracy),
    });
    let spec = metric_spec(config, config.seed);
    let ansatz = spec.ansatz()?;
    let encoding: Vec<Value> = ansatz
        .encoder()
        .binding
        .tags()
        .iter()
        .enumerate()
        .filter_map(|(phase, t)| match t {
            PhaseTag::Data(f) => Some(json!({"phase": phase, "feature": f})),
            _ => None,
        })
        .collect();
    let meta = json!({
        "dataset": c.dataset,
        "dataset_classes": dataset.classes(),
        "dataset_size": dataset.len(),
        "normalization": "per-feature min-max onto [0, pi], fit on the training split, clamped",
        "input_state": ansatz.input_state().to_string(),
        "encoding_map": encoding,
        "encoder": "features on the leading non-port phases (phase 2p = internal, 2p+1 = external of MZI p); other encoder phases fixed uniformly at random from the run's encoder seed",
        "body": format!("{} {:?} layer(s), every phase trainable", c.body_layers, c.layout),
        "loss": format!("mean over all train pairs: same class 1 - S_C, different class max(0, S_C - {})", c.margin),
        "similarity": "S_C(p, q) = sum_i sqrt(p_i q_i)",
        "pairwise_accuracy": "balanced accuracy of S_C >= t, t fit on train pairs and applied to test pairs",
        "run_seeds": seeds,
    });
    Ok((summary, meta))
}

/// Applies `MPQML_THREADS` to the global rayon pool, if set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV}='{v}' is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::OptimizerConfig;

    fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut out = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in fs::read_dir(&d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
                }
            }
        }
        out.sort();
        out
    }

    #[test]
    fn small_capacity_run_writes_schema() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(TaskKind::CapacityScanK, 5);
        cfg.capacity.m = 4;
        cfg.capacity.n = 2;
        cfg.capacity.k_values = vec![4, 12, 24];
        let s = run(&cfg, tmp.path()).unwrap();
        assert_eq!(s.summary["max_rank"], 10);
        let files: Vec<String> = read_dir(tmp.path()).into_iter().map(|f| f.0).collect();
        for f in ["capacity.csv", "config.resolved.toml", "metadata.json", "spectrum.csv", "summary.json"] {
            assert!(files.contains(&f.to_string()), "{files:?}");
        }
        let csv = fs::read_to_string(tmp.path().join("capacity.csv")).unwrap();
        assert!(csv.starts_with("axis,axis_value,measured_rank,predicted,plateau,tolerance"));
    }

    #[test]
    fn unitary_replay_is_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(TaskKind::TrainUnitary, 2);
        cfg.unitary.m = 3;
        cfg.unitary.n = 1;
        cfg.unitary.probes = 2;
        cfg.unitary.repeats = 2;
        cfg.unitary.optimizer.set_max_epochs(5);
        run(&cfg, a.path()).unwrap();
        let replay = RunConfig::load(&a.path().join("config.resolved.toml")).unwrap();
        run(&replay, b.path()).unwrap();
        assert_eq!(read_dir(a.path()), read_dir(b.path()));
    }

    #[test]
    fn metric_run_emits_grams() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(TaskKind::TrainMetric, 1);
        cfg.metric.m = 4;
        cfg.metric.n = 1;
        cfg.metric.encoder_layers = 3;
        cfg.metric.dataset = DatasetSource::Synthetic {
            per_class: 4,
            separation: 1.0,
            seed: 3,
        };
        cfg.metric.optimizer = OptimizerConfig::adam_default(2);
        run(&cfg, tmp.path()).unwrap();
        let gram = fs::read_to_string(tmp.path().join("gram_epoch_0001.csv")).unwrap();
        // 7 classes × ⌊0.3·4⌋ test samples, plus the label header.
        assert_eq!(gram.lines().count(), 8);
        let meta: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("metadata.json")).unwrap()).unwrap();
        assert_eq!(meta["encoding_map"].as_array().unwrap().len(), 12);
        assert_eq!(meta["schema_version"], SCHEMA_VERSION);
    }
}
