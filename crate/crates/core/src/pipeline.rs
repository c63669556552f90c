//! Batch pipeline driver: configuration, feature-extraction caching, and
//! the subcommand implementations behind the CLI.
//!
//! Every run echoes its effective configuration and writes a run manifest
//! (inputs, config, seed, version) into the output directory; report
//! files contain no timestamps, so identical configurations produce
//! byte-identical outputs. Feature CSVs are fingerprinted and reused
//! when the dataset and the relevant configuration are unchanged.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    loo_evaluate, loo_evaluate_fused, EvalConfig, EvalReport, FoldMode, SvmConfig,
    WindowClassifier,
};
use crate::data_model::{load_manifest, load_recording, Band, BandName, BandScheme, DatasetManifest};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, Measure};
use crate::preprocess::preprocess_trial;
use crate::recurrent::{loo_evaluate_rnn, CellKind, RnnConfig, TrainConfig, AUGMENT_SIGMAS};
use crate::selection::{k_sweep, FisherVariant, CONNECTIVITY_K_GRID, DE_K_GRID};
use crate::synth::SynthConfig;
use crate::temporal::{
    export_interval_grid_csv, export_interval_grid_svg, temporal_scan, IntervalSpec,
    TemporalProfile,
};
use crate::util::Fnv1a;

/// Fully resolved run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub bands: Vec<BandName>,
    pub measures: Vec<Measure>,
    /// Band used for selection sweeps, fusion, temporal and recurrent runs.
    pub analysis_band: BandName,
    pub window_len_s: f64,
    /// Resample target; trials already at this rate pass through.
    pub target_fs: Option<f64>,
    pub broadband: (f64, f64),
    pub band_scheme: BandScheme,
    pub intervals: Vec<IntervalSpec>,
    /// Per-measure top-k selection (clamped to the feature dimension).
    pub k: BTreeMap<Measure, usize>,
    pub svm_c: f64,
    pub fisher_weighted: bool,
    pub fold_mode: FoldMode,
    pub rnn: RnnSettings,
    pub seed: u64,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RnnSettings {
    pub cell: String,
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub sigmas: Vec<f64>,
    pub seq_len_s: f64,
    pub step_s: f64,
    /// Interval the SVM side of the comparison table is evaluated on.
    pub svm_interval: String,
}

impl Default for RnnSettings {
    fn default() -> Self {
        RnnSettings {
            cell: "gru".into(),
            hidden: 16,
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 16,
            sigmas: AUGMENT_SIGMAS.to_vec(),
            seq_len_s: 180.0,
            step_s: 2.0,
            svm_interval: "140:end".into(),
        }
    }
}

impl RnnSettings {
    pub fn to_rnn_config(&self, seed: u64) -> Result<RnnConfig> {
        let cell = match self.cell.as_str() {
            "gru" => CellKind::Gru,
            "vanilla" => CellKind::Vanilla,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown cell kind {other:?} (expected gru or vanilla)"
                )))
            }
        };
        Ok(RnnConfig {
            cell,
            hidden: self.hidden,
            train: TrainConfig {
                learning_rate: self.learning_rate,
                epochs: self.epochs,
                batch_size: self.batch_size,
                clip_norm: 5.0,
                seed,
            },
            sigmas: self.sigmas.clone(),
            seq_len_s: self.seq_len_s,
            step_s: self.step_s,
        })
    }
}

/// The paper-reported optimal selection sizes per feature type.
pub fn default_k() -> BTreeMap<Measure, usize> {
    BTreeMap::from([
        (Measure::De, 40),
        (Measure::Pearson, 700),
        (Measure::Coherence, 200),
        (Measure::Plv, 400),
    ])
}

/// On-disk configuration file; every field optional, flags win over file
/// values and defaults fill the rest.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub bands: Option<Vec<String>>,
    pub measures: Option<Vec<String>>,
    pub analysis_band: Option<String>,
    pub window_len_s: Option<f64>,
    pub target_fs: Option<f64>,
    pub broadband: Option<[f64; 2]>,
    pub band_scheme: Option<String>,
    pub intervals: Option<String>,
    pub k: Option<BTreeMap<String, usize>>,
    pub svm_c: Option<f64>,
    pub fisher_weighted: Option<bool>,
    pub fold_mode: Option<String>,
    pub rnn: Option<RnnFileConfig>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RnnFileConfig {
    pub cell: Option<String>,
    pub hidden: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub sigmas: Option<Vec<f64>>,
    pub seq_len_s: Option<f64>,
    pub step_s: Option<f64>,
    pub svm_interval: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("config {path:?}: {e}")))
    }
}

/// Command-line overrides that win over file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub bands: Option<Vec<String>>,
    pub measures: Option<Vec<String>>,
    pub intervals: Option<String>,
}

fn parse_band(s: &str) -> Result<BandName> {
    BandName::parse(s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown band {s:?}")))
}

fn parse_measure(s: &str) -> Result<Measure> {
    Measure::parse(s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown measure {s:?}")))
}

impl RunConfig {
    /// Merge defaults, file values and flag overrides (flags win).
    pub fn resolve(file: FileConfig, flags: Overrides) -> Result<RunConfig> {
        let dataset = flags
            .dataset
            .or(file.dataset)
            .ok_or_else(|| Error::InvalidArgument("no dataset path given".into()))?;
        let out_dir = flags
            .out
            .or(file.out)
            .ok_or_else(|| Error::InvalidArgument("no output directory given".into()))?;
        let bands = match flags.bands.or(file.bands) {
            Some(list) => list.iter().map(|s| parse_band(s)).collect::<Result<_>>()?,
            None => BandName::ALL.to_vec(),
        };
        let measures = match flags.measures.or(file.measures) {
            Some(list) => list
                .iter()
                .map(|s| parse_measure(s))
                .collect::<Result<_>>()?,
            None => Measure::ALL.to_vec(),
        };
        let analysis_band = match file.analysis_band {
            Some(s) => parse_band(&s)?,
            None => BandName::Gamma,
        };
        let band_scheme = match file.band_scheme.as_deref() {
            None | Some("preprocessing") => BandScheme::Preprocessing,
            Some("related_work") => BandScheme::RelatedWork,
            Some(other) => {
                return Err(Error::InvalidArgument(format!(
                    "unknown band scheme {other:?}"
                )))
            }
        };
        let intervals = IntervalSpec::parse_list(
            flags
                .intervals
                .or(file.intervals)
                .as_deref()
                .unwrap_or("canonical"),
        )?;
        let mut k = default_k();
        if let Some(map) = file.k {
            for (name, v) in map {
                k.insert(parse_measure(&name)?, v);
            }
        }
        let fold_mode = match file.fold_mode.as_deref() {
            None | Some("by_clip") => FoldMode::ByClip,
            Some("by_session_trial") => FoldMode::BySessionTrial,
            Some(other) => {
                return Err(Error::InvalidArgument(format!(
                    "unknown fold mode {other:?}"
                )))
            }
        };
        let rnn_file = file.rnn.unwrap_or_default();
        let rnn_default = RnnSettings::default();
        let rnn = RnnSettings {
            cell: rnn_file.cell.unwrap_or(rnn_default.cell),
            hidden: rnn_file.hidden.unwrap_or(rnn_default.hidden),
            learning_rate: rnn_file.learning_rate.unwrap_or(rnn_default.learning_rate),
            epochs: rnn_file.epochs.unwrap_or(rnn_default.epochs),
            batch_size: rnn_file.batch_size.unwrap_or(rnn_default.batch_size),
            sigmas: rnn_file.sigmas.unwrap_or(rnn_default.sigmas),
            seq_len_s: rnn_file.seq_len_s.unwrap_or(rnn_default.seq_len_s),
            step_s: rnn_file.step_s.unwrap_or(rnn_default.step_s),
            svm_interval: rnn_file.svm_interval.unwrap_or(rnn_default.svm_interval),
        };
        Ok(RunConfig {
            dataset,
            out_dir,
            bands,
            measures,
            analysis_band,
            window_len_s: file.window_len_s.unwrap_or(2.0),
            target_fs: file.target_fs,
            broadband: file
                .broadband
                .map(|b| (b[0], b[1]))
                .unwrap_or((0.3, 50.0)),
            band_scheme,
            intervals,
            k,
            svm_c: file.svm_c.unwrap_or(1.0),
            fisher_weighted: file.fisher_weighted.unwrap_or(false),
            fold_mode,
            rnn,
            seed: flags.seed.or(file.seed).unwrap_or(0),
            jobs: flags.jobs.or(file.jobs),
        })
    }

    pub fn eval_config(&self, k: Option<usize>) -> EvalConfig {
        EvalConfig {
            k,
            svm: SvmConfig {
                c: self.svm_c,
                ..SvmConfig::default()
            },
            fisher: if self.fisher_weighted {
                FisherVariant::ClassWeighted
            } else {
                FisherVariant::PaperUnweighted
            },
            fold_mode: self.fold_mode,
            classifier: WindowClassifier::LinearSvm,
            seed: self.seed,
        }
    }

    fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }

    fn features_dir(&self) -> PathBuf {
        self.out_dir.join("features")
    }
}

/// Hash of the dataset identity: manifest bytes plus data file sizes.
pub fn dataset_fingerprint(dataset_dir: &Path) -> Result<u64> {
    let manifest_path = dataset_dir.join("manifest.json");
    let bytes = std::fs::read(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut h = Fnv1a::new();
    h.write(&bytes);
    let manifest = load_manifest(&manifest_path)?;
    for t in &manifest.trials {
        let meta = std::fs::metadata(manifest.root.join(&t.file))
            .map_err(|e| Error::io(manifest.root.join(&t.file), e))?;
        h.write_u64(meta.len());
    }
    Ok(h.finish())
}

fn feature_fingerprint(cfg: &RunConfig, dataset_fp: u64, band: BandName, measure: Measure) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(dataset_fp)
        .write_str(band.name())
        .write_str(measure.name())
        .write_f64(cfg.window_len_s)
        .write_f64(cfg.broadband.0)
        .write_f64(cfg.broadband.1)
        .write_f64(cfg.target_fs.unwrap_or(-1.0))
        .write_str(match cfg.band_scheme {
            BandScheme::Preprocessing => "preprocessing",
            BandScheme::RelatedWork => "related_work",
        });
    h.finish()
}

fn feature_csv_path(cfg: &RunConfig, band: BandName, measure: Measure) -> PathBuf {
    cfg.features_dir().join(format!("{band}_{measure}.csv"))
}

/// Extract (or load from cache) the feature tables for the given bands
/// and measures. Returns tables keyed by (band, measure).
pub fn ensure_features(
    cfg: &RunConfig,
    bands: &[BandName],
    measures: &[Measure],
) -> Result<BTreeMap<(BandName, Measure), FeatureTable>> {
    std::fs::create_dir_all(cfg.features_dir())
        .map_err(|e| Error::io(cfg.features_dir(), e))?;
    let manifest = load_manifest(&cfg.dataset.join("manifest.json"))?;
    let dataset_fp = dataset_fingerprint(&cfg.dataset)?;

    let mut tables = BTreeMap::new();
    let mut missing: Vec<(BandName, Measure)> = Vec::new();
    for &band in bands {
        for &measure in measures {
            let path = feature_csv_path(cfg, band, measure);
            let fp_path = path.with_extension("csv.fp");
            let fp = format!(
                "{:016x}",
                feature_fingerprint(cfg, dataset_fp, band, measure)
            );
            let cached = path.is_file()
                && std::fs::read_to_string(&fp_path)
                    .map(|s| s.trim() == fp)
                    .unwrap_or(false);
            if cached {
                let table = FeatureTable::read_csv(
                    &path,
                    Band::canonical(band, cfg.band_scheme),
                    measure,
                )?;
                tables.insert((band, measure), table);
            } else {
                missing.push((band, measure));
            }
        }
    }
    if missing.is_empty() {
        return Ok(tables);
    }

    let missing_bands: Vec<BandName> = {
        let mut b: Vec<BandName> = missing.iter().map(|(b, _)| *b).collect();
        b.sort();
        b.dedup();
        b
    };
    for &band in &missing_bands {
        let band_spec = Band::canonical(band, cfg.band_scheme);
        let band_measures: Vec<Measure> = missing
            .iter()
            .filter(|(b, _)| *b == band)
            .map(|(_, m)| *m)
            .collect();
        // per-trial preprocessing is independent; extract in parallel,
        // collect in manifest order
        let per_trial: Vec<Result<BTreeMap<Measure, FeatureTable>>> = manifest
            .trials
            .par_iter()
            .map(|entry| {
                let rec = load_recording(&manifest, &entry.key())?;
                let epochs = preprocess_trial(
                    &rec,
                    cfg.target_fs,
                    cfg.broadband,
                    band_spec,
                    cfg.window_len_s,
                )?;
                let mut out = BTreeMap::new();
                for &measure in &band_measures {
                    let table = FeatureTable::from_epochs(
                        band_spec,
                        measure,
                        &rec.channels,
                        std::slice::from_ref(&epochs),
                    )?;
                    out.insert(measure, table);
                }
                Ok(out)
            })
            .collect();

        for &measure in &band_measures {
            let mut keys = Vec::new();
            let mut labels = Vec::new();
            let mut rows = Vec::new();
            let mut columns = Vec::new();
            for trial_tables in &per_trial {
                let t = match trial_tables {
                    Ok(map) => &map[&measure],
                    Err(e) => {
                        return Err(Error::Degenerate(format!("extraction failed: {e}")))
                    }
                };
                columns = t.columns.clone();
                keys.extend(t.keys.iter().cloned());
                labels.extend(t.labels.iter().copied());
                rows.extend(t.values.rows().into_iter().map(|r| r.to_vec()));
            }
            let table =
                FeatureTable::from_rows(band_spec, measure, columns, keys, labels, rows)?;
            let path = feature_csv_path(cfg, band, measure);
            table.write_csv(&path)?;
            let fp_path = path.with_extension("csv.fp");
            std::fs::write(
                &fp_path,
                format!(
                    "{:016x}\n",
                    feature_fingerprint(cfg, dataset_fp, band, measure)
                ),
            )
            .map_err(|e| Error::io(&fp_path, e))?;
            tables.insert((band, measure), table);
        }
    }
    Ok(tables)
}

/// Write the run manifest and echo the effective configuration.
pub fn write_run_manifest(cfg: &RunConfig, original_config: Option<&Path>) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    #[derive(Serialize)]
    struct RunManifest<'a> {
        version: &'a str,
        seed: u64,
        dataset: &'a Path,
        dataset_fingerprint: String,
        config: &'a RunConfig,
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        dataset: &cfg.dataset,
        dataset_fingerprint: format!("{:016x}", dataset_fingerprint(&cfg.dataset)?),
        config: cfg,
    };
    let path = cfg.out_dir.join("run_manifest.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::data(&path, e.to_string()))?,
    )
    .map_err(|e| Error::io(&path, e))?;
    // echo the configuration: the original file verbatim when given,
    // otherwise the serialized effective configuration
    let echo_path = cfg.out_dir.join("config.toml");
    match original_config {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            std::fs::write(&echo_path, bytes).map_err(|e| Error::io(&echo_path, e))?;
        }
        None => {
            let text = toml::to_string_pretty(&SerializableEcho::from(cfg))
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            std::fs::write(&echo_path, text).map_err(|e| Error::io(&echo_path, e))?;
        }
    }
    Ok(())
}

/// TOML-friendly echo of the effective configuration.
#[derive(Serialize)]
struct SerializableEcho {
    dataset: PathBuf,
    out: PathBuf,
    bands: Vec<String>,
    measures: Vec<String>,
    analysis_band: String,
    window_len_s: f64,
    target_fs: Option<f64>,
    broadband: [f64; 2],
    band_scheme: String,
    intervals: String,
    svm_c: f64,
    fisher_weighted: bool,
    fold_mode: String,
    seed: u64,
    k: BTreeMap<String, usize>,
    rnn: RnnSettings,
}

impl From<&RunConfig> for SerializableEcho {
    fn from(cfg: &RunConfig) -> Self {
        SerializableEcho {
            dataset: cfg.dataset.clone(),
            out: cfg.out_dir.clone(),
            bands: cfg.bands.iter().map(|b| b.name().to_string()).collect(),
            measures: cfg.measures.iter().map(|m| m.name().to_string()).collect(),
            analysis_band: cfg.analysis_band.name().to_string(),
            window_len_s: cfg.window_len_s,
            target_fs: cfg.target_fs,
            broadband: [cfg.broadband.0, cfg.broadband.1],
            band_scheme: match cfg.band_scheme {
                BandScheme::Preprocessing => "preprocessing".into(),
                BandScheme::RelatedWork => "related_work".into(),
            },
            intervals: cfg
                .intervals
                .iter()
                .map(|i| i.to_string().replace('-', ":"))
                .collect::<Vec<_>>()
                .join(","),
            svm_c: cfg.svm_c,
            fisher_weighted: cfg.fisher_weighted,
            fold_mode: match cfg.fold_mode {
                FoldMode::ByClip => "by_clip".into(),
                FoldMode::BySessionTrial => "by_session_trial".into(),
            },
            seed: cfg.seed,
            k: cfg
                .k
                .iter()
                .map(|(m, v)| (m.name().to_string(), *v))
                .collect(),
            rnn: cfg.rnn.clone(),
        }
    }
}

/// `synth` subcommand: generate a dataset from a preset.
pub fn cmd_synth(preset: &str, seed: u64, out_dir: &Path) -> Result<DatasetManifest> {
    let cfg = match preset {
        "desk" => SynthConfig::desk_default(seed),
        "ramped" => SynthConfig::ramped(seed),
        "null" => SynthConfig::null(seed),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset {other:?} (expected desk, ramped or null)"
            )))
        }
    };
    cmd_synth_config(&cfg, out_dir)
}

pub fn cmd_synth_config(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetManifest> {
    let manifest = crate::synth::generate(cfg, out_dir)?;
    let echo_path = out_dir.join("synth_config.json");
    std::fs::write(
        &echo_path,
        serde_json::to_string_pretty(cfg).map_err(|e| Error::data(&echo_path, e.to_string()))?,
    )
    .map_err(|e| Error::io(&echo_path, e))?;
    Ok(manifest)
}

/// `extract` subcommand: one feature CSV per (band, measure).
pub fn cmd_extract(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let tables = ensure_features(cfg, &cfg.bands, &cfg.measures)?;
    Ok(tables
        .keys()
        .map(|&(b, m)| feature_csv_path(cfg, b, m))
        .collect())
}

fn write_simple_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::data(path, format!("csv open failure: {e}")))?;
    w.write_record(header)
        .map_err(|e| Error::data(path, e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::data(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn save_eval(cfg: &RunConfig, name: &str, report: &EvalReport) -> Result<()> {
    let folds_dir = cfg.reports_dir().join("folds");
    std::fs::create_dir_all(&folds_dir).map_err(|e| Error::io(&folds_dir, e))?;
    report.write_csv(&folds_dir.join(format!("{name}.csv")))?;
    report.write_json(&cfg.reports_dir().join(format!("{name}.json")))?;
    Ok(())
}

/// `evaluate` subcommand: per-band accuracy table, selection sweep,
/// before/after-selection table, and decision-level fusion.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(cfg.reports_dir()).map_err(|e| Error::io(cfg.reports_dir(), e))?;
    let tables = ensure_features(cfg, &cfg.bands, &cfg.measures)?;

    // accuracy per (measure, band) without selection
    let mut band_rows = Vec::new();
    let cells: Vec<((BandName, Measure), Result<EvalReport>)> = tables
        .par_iter()
        .map(|(&key, table)| (key, loo_evaluate(table, &cfg.eval_config(None))))
        .collect();
    let mut cell_map: BTreeMap<(Measure, BandName), EvalReport> = BTreeMap::new();
    for ((band, measure), rep) in cells {
        cell_map.insert((measure, band), rep?);
    }
    for ((measure, band), rep) in &cell_map {
        band_rows.push(vec![
            measure.to_string(),
            band.to_string(),
            rep.mean_accuracy.to_string(),
            rep.std_accuracy.to_string(),
        ]);
        save_eval(cfg, &format!("band_{band}_{measure}"), rep)?;
    }
    write_simple_csv(
        &cfg.reports_dir().join("band_accuracy.csv"),
        &["measure", "band", "mean_accuracy", "std_accuracy"],
        &band_rows,
    )?;

    // selection sweep and before/after table on the analysis band
    let band = cfg.analysis_band;
    let mut sweep_rows = Vec::new();
    let mut effect_rows = Vec::new();
    for &measure in &cfg.measures {
        let table = match tables.get(&(band, measure)) {
            Some(t) => t,
            None => continue,
        };
        let d = table.dim();
        let grid_base: Vec<usize> = if measure == Measure::De {
            DE_K_GRID.to_vec()
        } else {
            CONNECTIVITY_K_GRID.to_vec()
        };
        let mut grid: Vec<usize> = grid_base.into_iter().map(|k| k.min(d)).collect();
        grid.sort_unstable();
        grid.dedup();
        let sweep = k_sweep(&grid, |k| {
            Ok(loo_evaluate(table, &cfg.eval_config(Some(k)))?.mean_accuracy)
        })?;
        for (k, acc) in &sweep {
            sweep_rows.push(vec![
                measure.to_string(),
                k.to_string(),
                acc.to_string(),
            ]);
        }
        let before = &cell_map[&(measure, band)];
        let k_opt = cfg.k.get(&measure).copied().unwrap_or(d).min(d);
        let after = loo_evaluate(table, &cfg.eval_config(Some(k_opt)))?;
        effect_rows.push(vec![
            measure.to_string(),
            before.mean_accuracy.to_string(),
            before.std_accuracy.to_string(),
            k_opt.to_string(),
            after.mean_accuracy.to_string(),
            after.std_accuracy.to_string(),
        ]);
        save_eval(cfg, &format!("selected_{band}_{measure}"), &after)?;
    }
    write_simple_csv(
        &cfg.reports_dir().join("selection_sweep.csv"),
        &["measure", "k", "mean_accuracy"],
        &sweep_rows,
    )?;
    write_simple_csv(
        &cfg.reports_dir().join("fisher_effect.csv"),
        &["measure", "before_mean", "before_std", "k", "after_mean", "after_std"],
        &effect_rows,
    )?;

    // decision-level fusion of each connectivity measure with DE
    if let Some(de_table) = tables.get(&(band, Measure::De)) {
        let mut fusion_rows = Vec::new();
        for measure in Measure::CONNECTIVITY {
            let table = match tables.get(&(band, measure)) {
                Some(t) => t,
                None => continue,
            };
            let k_conn = cfg.k.get(&measure).copied().map(|k| k.min(table.dim()));
            let k_de = cfg
                .k
                .get(&Measure::De)
                .copied()
                .map(|k| k.min(de_table.dim()));
            let alone = loo_evaluate(table, &cfg.eval_config(k_conn))?;
            let fused =
                loo_evaluate_fused(table, k_conn, de_table, k_de, &cfg.eval_config(None))?;
            fusion_rows.push(vec![
                measure.to_string(),
                alone.mean_accuracy.to_string(),
                alone.std_accuracy.to_string(),
                fused.mean_accuracy.to_string(),
                fused.std_accuracy.to_string(),
            ]);
            save_eval(cfg, &format!("fused_{band}_{measure}_de"), &fused)?;
        }
        write_simple_csv(
            &cfg.reports_dir().join("fusion.csv"),
            &["measure", "alone_mean", "alone_std", "fused_mean", "fused_std"],
            &fusion_rows,
        )?;
    }
    Ok(())
}

/// `temporal` subcommand: interval grid scan per measure with CSV + SVG
/// exports and the two summary approaches.
pub fn cmd_temporal(cfg: &RunConfig) -> Result<Vec<TemporalProfile>> {
    std::fs::create_dir_all(cfg.reports_dir()).map_err(|e| Error::io(cfg.reports_dir(), e))?;
    let band = cfg.analysis_band;
    let tables = ensure_features(cfg, &[band], &cfg.measures)?;
    let mut profiles = Vec::new();
    let mut summary_rows = Vec::new();
    let mut approach_rows = Vec::new();
    for &measure in &cfg.measures {
        let table = &tables[&(band, measure)];
        let k = cfg.k.get(&measure).copied().map(|k| k.min(table.dim()));
        let profile = temporal_scan(
            table,
            cfg.window_len_s,
            &cfg.intervals,
            &cfg.eval_config(k),
        )?;
        for w in &profile.warnings {
            eprintln!("temporal: {w}");
        }
        export_interval_grid_csv(
            &profile,
            &cfg.reports_dir().join(format!("interval_grid_{measure}.csv")),
        )?;
        export_interval_grid_svg(
            &profile,
            &cfg.reports_dir().join(format!("interval_grid_{measure}.svg")),
        )?;
        for (i, interval) in profile.intervals.iter().enumerate() {
            summary_rows.push(vec![
                measure.to_string(),
                interval.to_string(),
                profile.mean_per_interval[i].to_string(),
                profile.std_per_interval[i].to_string(),
            ]);
        }
        approach_rows.push(vec![
            measure.to_string(),
            profile.intervals[profile.approach1_interval].to_string(),
            profile.approach1.to_string(),
            profile.approach2.to_string(),
        ]);
        profiles.push(profile);
    }
    write_simple_csv(
        &cfg.reports_dir().join("temporal_summary.csv"),
        &["measure", "interval", "mean_accuracy", "std_accuracy"],
        &summary_rows,
    )?;
    write_simple_csv(
        &cfg.reports_dir().join("temporal_approaches.csv"),
        &["measure", "best_interval", "approach1_mean", "approach2_mean"],
        &approach_rows,
    )?;
    Ok(profiles)
}

/// `rnn` subcommand: recurrent baseline vs the SVM at the configured
/// comparison interval, per connectivity measure.
pub fn cmd_rnn(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(cfg.reports_dir()).map_err(|e| Error::io(cfg.reports_dir(), e))?;
    let band = cfg.analysis_band;
    let measures: Vec<Measure> = cfg
        .measures
        .iter()
        .copied()
        .filter(|m| m.is_connectivity())
        .collect();
    let tables = ensure_features(cfg, &[band], &measures)?;
    let svm_interval = {
        let list = IntervalSpec::parse_list(&cfg.rnn.svm_interval)?;
        list.into_iter().next().ok_or_else(|| {
            Error::InvalidArgument("rnn.svm_interval resolves to no interval".into())
        })?
    };
    let mut rows = Vec::new();
    for &measure in &measures {
        let table = &tables[&(band, measure)];
        let k = cfg.k.get(&measure).copied().map(|k| k.min(table.dim()));

        // SVM side, restricted to the comparison interval
        let mut trial_windows: BTreeMap<(String, u32, u32), u32> = BTreeMap::new();
        for key in &table.keys {
            let e = trial_windows
                .entry((key.subject.clone(), key.session, key.trial))
                .or_insert(0);
            *e = (*e).max(key.window + 1);
        }
        let sliced = table.filter_rows(|_, key| {
            let n_win = trial_windows[&(key.subject.clone(), key.session, key.trial)];
            let (k0, k1) = svm_interval.window_range(cfg.window_len_s, n_win as usize);
            (key.window as usize) >= k0 && (key.window as usize) < k1
        });
        let svm_report = loo_evaluate(&sliced, &cfg.eval_config(k))?;
        save_eval(cfg, &format!("rnn_svm_{band}_{measure}"), &svm_report)?;

        // recurrent side on full-length sequences
        let rnn_config = cfg.rnn.to_rnn_config(cfg.seed)?;
        let rnn_report =
            loo_evaluate_rnn(table, cfg.window_len_s, &rnn_config, &cfg.eval_config(k))?;
        save_eval(cfg, &format!("rnn_gru_{band}_{measure}"), &rnn_report)?;

        rows.push(vec![
            measure.to_string(),
            svm_report.mean_accuracy.to_string(),
            svm_report.std_accuracy.to_string(),
            rnn_report.mean_accuracy.to_string(),
            rnn_report.std_accuracy.to_string(),
        ]);
    }
    write_simple_csv(
        &cfg.reports_dir().join("rnn_comparison.csv"),
        &["measure", "svm_mean", "svm_std", "rnn_mean", "rnn_std"],
        &rows,
    )?;
    Ok(())
}

fn csv_to_markdown(path: &Path) -> Result<String> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::data(path, format!("csv open failure: {e}")))?;
    let mut out = String::new();
    let header = rdr
        .headers()
        .map_err(|e| Error::data(path, e.to_string()))?
        .clone();
    out.push('|');
    for h in header.iter() {
        out.push_str(h);
        out.push('|');
    }
    out.push('\n');
    out.push('|');
    for _ in header.iter() {
        out.push_str("---|");
    }
    out.push('\n');
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::data(path, e.to_string()))?;
        out.push('|');
        for field in rec.iter() {
            // trim long floats for readability
            match field.parse::<f64>() {
                Ok(v) if field.contains('.') => out.push_str(&format!("{v:.4}")),
                _ => out.push_str(field),
            }
            out.push('|');
        }
        out.push('\n');
    }
    Ok(out)
}

/// `report` subcommand: collate the generated CSVs into a markdown
/// summary.
pub fn cmd_report(out_dir: &Path) -> Result<PathBuf> {
    let reports = out_dir.join("reports");
    let mut md = String::from("# Run report\n");
    let sections: [(&str, &str); 6] = [
        ("Accuracy per band (no selection)", "band_accuracy.csv"),
        ("Selection sweep on the analysis band", "selection_sweep.csv"),
        ("Before/after top-k selection", "fisher_effect.csv"),
        ("Decision-level fusion with DE", "fusion.csv"),
        ("Interval accuracies", "temporal_summary.csv"),
        ("Recurrent baseline vs SVM", "rnn_comparison.csv"),
    ];
    let mut found_any = false;
    for (title, file) in sections {
        let path = reports.join(file);
        if path.is_file() {
            md.push_str(&format!("\n## {title}\n\n"));
            md.push_str(&csv_to_markdown(&path)?);
            found_any = true;
        }
    }
    let approaches = reports.join("temporal_approaches.csv");
    if approaches.is_file() {
        md.push_str("\n## Best-interval approaches\n\n");
        md.push_str(&csv_to_markdown(&approaches)?);
        md.push_str(
            "\napproach1 = best interval of the across-subject mean; \
             approach2 = mean of each subject's own best interval.\n",
        );
    }
    if !found_any {
        return Err(Error::InvalidArgument(format!(
            "no report CSVs under {reports:?}; run evaluate/temporal/rnn first"
        )));
    }
    let path = out_dir.join("report.md");
    std::fs::write(&path, md).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
