use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::classifier::checkpoint::{load_checkpoint, save_checkpoint};
use crate::classifier::predict::SampleFailure;
use crate::classifier::{predict_scores, train, Checkpoint, Cnn, EpochStats, ModelKind, Predictions};
use crate::cli::config::{read_config_file, resolve, FlagValue, RunConfig};
use crate::cli::{Command, Common, Status, TrainFlags, OUTPUT_ROOT_ENV};
use crate::data::{canonical_json, generate_synthetic, load_manifest, save_manifest, split, DatasetManifest};
use crate::dbvae::{predict_dbvae, train_dbvae};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::nn::Temperature;
use crate::report::{
    curves_csv, curves_svg, group_accuracy_table, histogram_svg, predictions_csv, score_histogram, MethodPredictions,
    PredictionRow, TrainingCurve, DEFAULT_BINS,
};
use crate::runlog::RunLog;
use crate::sbr::pipeline::{load_audit, save_audit, BASELINE_FILE, RETRAINED_FILE};
use crate::sbr::{audit_scores, flag_underrepresented, resample_dataset, run_sbr_pipeline};
use crate::svm::{cnn_svm_predict, fit_head, load_svm, save_svm, HeadSelection, SvmModel};

pub const DBVAE_FILE: &str = "dbvae.ckpt";
pub const SVM_FILE: &str = "svm.json";
pub const MODEL_FILE: &str = "model.ckpt";

pub const METHOD_CNN: &str = "Standard CNN";
pub const METHOD_DBVAE: &str = "DB-VAE";
pub const METHOD_SVM: &str = "CNN+SVM";

struct Ctx {
    name: &'static str,
    out: PathBuf,
    cfg: RunConfig,
    log: RunLog,
}

impl Ctx {
    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    fn write(&self, file: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(file);
        write_atomic(&p, text.as_bytes())?;
        Ok(p)
    }

    fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<PathBuf> {
        self.write(file, &canonical_json(value)?)
    }

    fn finish(&mut self, summary: Value, status: Status) -> Result<Status> {
        self.write_json(&format!("{}.summary.json", self.name), &summary)?;
        self.log.event("done", json!({ "command": self.name, "partial": status == Status::Partial }))?;
        eprintln!("{}: {} -> {}", self.name, summary_line(&summary), self.out.display());
        Ok(status)
    }
}

fn summary_line(v: &Value) -> String {
    v.as_object()
        .map(|m| {
            m.iter()
                .filter(|(_, v)| v.is_number() || v.is_string())
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .unwrap_or_default()
}

fn flag<T: Serialize>(value: Option<T>, flag: &'static str, pointer: &'static str) -> Option<FlagValue> {
    value.map(|v| FlagValue { flag, pointer, value: serde_json::to_value(v).expect("flag values serialise") })
}

fn train_flags(f: &TrainFlags) -> Vec<Option<FlagValue>> {
    vec![
        flag(f.batch_size, "--batch-size", "/train/batch_size"),
        flag(f.epochs, "--epochs", "/train/max_epochs"),
        flag(f.lr, "--lr", "/train/adam/learning_rate"),
        flag(f.patience, "--patience", "/train/early_stop_patience"),
    ]
}

fn output_dir(common: &Common, name: &str) -> PathBuf {
    if let Some(o) = &common.out {
        return o.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(name)
}

/// Resolves the configuration and echoes it into the output directory
/// before any work starts.
fn prepare(name: &'static str, common: &Common, flags: Vec<Option<FlagValue>>) -> Result<Ctx> {
    let flags: Vec<FlagValue> = flags.into_iter().flatten().collect();
    let file = common.config.as_deref().map(read_config_file).transpose()?;
    let resolved = resolve(file.as_ref(), common.seed, &flags)?;
    let out = output_dir(common, name);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
    write_atomic(&out.join(format!("{name}.config.json")), canonical_json(&resolved.config)?.as_bytes())?;
    let mut log = RunLog::open(&out.join("run.log"), false, common.verbose)?;
    log.event("command", json!({ "command": name }))?;
    for o in resolved.overrides {
        log.event("override", o)?;
    }
    Ok(Ctx { name, out, cfg: resolved.config, log })
}

fn load_opt_manifest(p: Option<&Path>) -> Result<Option<DatasetManifest>> {
    p.map(load_manifest).transpose()
}

fn temp_flag(t: Option<f64>) -> Result<Option<f64>> {
    t.map(|v| Temperature::new(v).map(f64::from)).transpose()
}

pub fn dispatch(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Synth { common, n_per_class, minority_fraction, image_size, val_fraction } => {
            let flags = vec![
                flag(n_per_class, "--n-per-class", "/synth/n_per_class"),
                flag(minority_fraction, "--minority-fraction", "/synth/minority_fraction"),
                flag(image_size, "--image-size", "/synth/image_size"),
                flag(val_fraction, "--val-fraction", "/val_fraction"),
            ];
            cmd_synth(prepare("synth", &common, flags)?)
        }
        Command::Train { common, train, val, flags, sbr, threshold, temperature } => {
            let mut f = train_flags(&flags);
            f.push(flag(threshold, "--threshold", "/sbr/threshold"));
            f.push(flag(temp_flag(temperature)?, "--temperature", "/sbr/audit_temperature"));
            let ctx = prepare("train", &common, f)?;
            cmd_train(ctx, &train, val.as_deref(), sbr, common.verbose)
        }
        Command::Audit { common, checkpoint, manifest, threshold, temperature } => {
            let f = vec![
                flag(threshold, "--threshold", "/sbr/threshold"),
                flag(temp_flag(temperature)?, "--temperature", "/sbr/audit_temperature"),
            ];
            cmd_audit(prepare("audit", &common, f)?, &checkpoint, &manifest)
        }
        Command::Resample { common, manifest, audit, threshold } => {
            cmd_resample(prepare("resample", &common, vec![])?, &manifest, &audit, threshold)
        }
        Command::DbvaeTrain {
            common,
            train,
            val,
            flags,
            latent_dim,
            kl_coefficient,
            histogram_bins,
            smoothing_alpha,
            no_resample,
        } => {
            let mut f = train_flags(&flags);
            f.extend([
                flag(latent_dim, "--latent-dim", "/vae/latent_dim"),
                flag(kl_coefficient, "--kl-coefficient", "/vae/kl_coefficient"),
                flag(histogram_bins, "--histogram-bins", "/vae/histogram_bins"),
                flag(smoothing_alpha, "--smoothing-alpha", "/vae/smoothing_alpha"),
                flag(no_resample.then_some(false), "--no-resample", "/vae/resample"),
            ]);
            cmd_dbvae_train(prepare("dbvae-train", &common, f)?, &train, val.as_deref())
        }
        Command::SvmFit { common, checkpoint, manifest, gamma, c, folds } => {
            let ctx = prepare("svm-fit", &common, vec![flag(folds, "--folds", "/grid/folds")])?;
            let fixed = gamma.zip(c).map(|(gamma, c)| HeadSelection::Fixed { gamma, c });
            cmd_svm_fit(ctx, &checkpoint, &manifest, fixed)
        }
        Command::Eval { common, checkpoint, manifest, svm, allow_mismatch } => {
            cmd_eval(prepare("eval", &common, vec![])?, &checkpoint, &manifest, svm.as_deref(), allow_mismatch)
        }
        Command::Compare { common, run, baseline, dbvae, retrained, svm, test, val, allow_mismatch } => {
            let pick = |explicit: Option<PathBuf>, file: &str, flag: &str| -> Result<PathBuf> {
                explicit.or_else(|| run.as_ref().map(|r| r.join(file))).ok_or_else(|| {
                    Error::Usage(format!("compare needs {flag} or --run pointing at a directory containing {file}"))
                })
            };
            let paths = ComparePaths {
                baseline: pick(baseline, BASELINE_FILE, "--baseline")?,
                dbvae: pick(dbvae, DBVAE_FILE, "--dbvae")?,
                retrained: pick(retrained, RETRAINED_FILE, "--retrained")?,
                svm: pick(svm, SVM_FILE, "--svm")?,
            };
            cmd_compare(prepare("compare", &common, vec![])?, &paths, &test, val.as_deref(), allow_mismatch)
        }
    }
}

fn group_counts(m: &DatasetManifest) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in &m.samples {
        *out.entry(s.group.clone().unwrap_or_else(|| "(none)".into())).or_insert(0) += 1;
    }
    out
}

fn cmd_synth(mut ctx: Ctx) -> Result<Status> {
    let manifest = generate_synthetic(&ctx.cfg.synth, &ctx.out)?;
    let mut summary = json!({ "samples": manifest.len(), "groups": group_counts(&manifest) });
    if ctx.cfg.val_fraction > 0.0 {
        let vf = ctx.cfg.val_fraction;
        let (tr, va) = split(&manifest, (1.0 - vf, vf), ctx.cfg.seed)?;
        save_manifest(&tr, ctx.path("train.json"))?;
        save_manifest(&va, ctx.path("val.json"))?;
        summary["train"] = json!(tr.len());
        summary["val"] = json!(va.len());
    }
    ctx.log.event("synth", summary.clone())?;
    ctx.finish(summary, Status::Complete)
}

fn write_curves(ctx: &Ctx, stem: &str, runs: &[TrainingCurve]) -> Result<()> {
    ctx.write(&format!("{stem}.csv"), &curves_csv(runs)?)?;
    ctx.write(&format!("{stem}.svg"), &curves_svg(runs, "training accuracy"))?;
    Ok(())
}

fn curve(run: &str, history: &[EpochStats]) -> TrainingCurve {
    TrainingCurve { run: run.into(), history: history.to_vec() }
}

fn cmd_train(mut ctx: Ctx, train_path: &Path, val_path: Option<&Path>, sbr: bool, verbose: bool) -> Result<Status> {
    let train_m = load_manifest(train_path)?;
    let val_m = load_opt_manifest(val_path)?;
    if sbr {
        let run = run_sbr_pipeline(&train_m, val_m.as_ref(), &ctx.cfg.train, &ctx.cfg.sbr, &ctx.cfg.architecture, &ctx.out, verbose)?;
        write_curves(&ctx, "curves", &[curve("baseline", &run.baseline.history), curve("sbr", &run.retrained.history)])?;
        let summary = json!({
            "baseline_id": run.baseline.id()?,
            "retrained_id": run.retrained.id()?,
            "flagged": run.flagged.len(),
            "samples_before": train_m.len(),
            "samples_after": run.resampled.len(),
        });
        return ctx.finish(summary, Status::Complete);
    }
    let mut model = Cnn::build(ctx.cfg.architecture.clone(), ctx.cfg.train.seed)?;
    let mut epochs = Vec::new();
    let ckpt = train(&mut model, &train_m, val_m.as_ref(), &ctx.cfg.train, &mut |e| epochs.push(e.clone()))?;
    for e in &epochs {
        ctx.log.event("epoch", json!({ "stats": e }))?;
    }
    let id = save_checkpoint(&ckpt, ctx.path(MODEL_FILE))?;
    write_curves(&ctx, "curves", &[curve("model", &ckpt.history)])?;
    let last = ckpt.history.last().expect("training ran at least one epoch");
    let summary = json!({ "checkpoint_id": id, "epochs": ckpt.final_epoch, "train_accuracy": last.train_accuracy });
    ctx.finish(summary, Status::Complete)
}

fn cmd_audit(mut ctx: Ctx, ckpt_path: &Path, manifest_path: &Path) -> Result<Status> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let manifest = load_manifest(manifest_path)?;
    let audit = audit_scores(&ckpt, &manifest, &ctx.cfg.sbr)?;
    save_audit(&audit, &ctx.path("audit.json"))?;
    let flagged = flag_underrepresented(&audit, ctx.cfg.sbr.threshold)?;
    ctx.write_json("flagged.json", &flagged)?;
    let hist = score_histogram(audit.records.iter().map(|r| (r.score, r.label)), DEFAULT_BINS)?;
    ctx.write_json("histogram.json", &hist)?;
    ctx.write("histogram.svg", &histogram_svg(&hist, ctx.cfg.sbr.threshold, "training-set scores"))?;
    let flagged_set: HashSet<&str> = flagged.iter().map(String::as_str).collect();
    let flagged_m = manifest.subset(&flagged_set);
    let summary = json!({
        "records": audit.records.len(),
        "flagged": flagged.len(),
        "threshold": audit.config.threshold,
        "temperature": audit.config.temperature,
        "flagged_by_group": group_counts(&flagged_m),
        "checkpoint_id": audit.checkpoint_id,
    });
    ctx.log.event("audit", json!({ "records": audit.records.len(), "flagged": flagged.len() }))?;
    ctx.finish(summary, Status::Complete)
}

fn cmd_resample(mut ctx: Ctx, manifest_path: &Path, audit_path: &Path, threshold: Option<f64>) -> Result<Status> {
    let manifest = load_manifest(manifest_path)?;
    let audit = load_audit(audit_path)?;
    let t = threshold.unwrap_or(audit.config.threshold);
    let flagged = flag_underrepresented(&audit, t)?;
    let out = resample_dataset(&manifest, &flagged, &ctx.out)?;
    save_manifest(&out, ctx.path("resampled_manifest.json"))?;
    let summary = json!({ "threshold": t, "flagged": flagged.len(), "before": manifest.len(), "after": out.len() });
    ctx.log.event("resample", summary.clone())?;
    ctx.finish(summary, Status::Complete)
}

fn cmd_dbvae_train(mut ctx: Ctx, train_path: &Path, val_path: Option<&Path>) -> Result<Status> {
    let train_m = load_manifest(train_path)?;
    let val_m = load_opt_manifest(val_path)?;
    let mut epochs = Vec::new();
    let (ckpt, history) = train_dbvae(&train_m, val_m.as_ref(), &ctx.cfg.architecture, &ctx.cfg.vae, &ctx.cfg.train, &mut |e| {
        epochs.push(json!({ "stats": e.stats, "class_loss": e.class_loss, "reconstruction": e.reconstruction, "kl": e.kl }))
    })?;
    for e in epochs {
        ctx.log.event("epoch", e)?;
    }
    let id = save_checkpoint(&ckpt, ctx.path(DBVAE_FILE))?;
    let stats: Vec<EpochStats> = history.iter().map(|e| e.stats.clone()).collect();
    write_curves(&ctx, "dbvae_curves", &[curve("dbvae", &stats)])?;
    let summary = json!({ "checkpoint_id": id, "epochs": ckpt.final_epoch });
    ctx.finish(summary, Status::Complete)
}

fn cmd_svm_fit(mut ctx: Ctx, ckpt_path: &Path, manifest_path: &Path, fixed: Option<HeadSelection>) -> Result<Status> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let manifest = load_manifest(manifest_path)?;
    let selection = fixed.unwrap_or_else(|| HeadSelection::GridSearch(ctx.cfg.grid.clone()));
    let model = fit_head(&ckpt, &manifest, Temperature::AUDIT, &selection)?;
    save_svm(&model, &ctx.path(SVM_FILE))?;
    if let Some(t) = &model.cv_table {
        let mut csv = String::from("gamma,C,mean_accuracy,converged\n");
        for c in &t.cells {
            csv.push_str(&format!("{},{},{:.4},{}\n", c.gamma, c.c, c.mean_accuracy, c.converged));
        }
        ctx.write("cv_table.csv", &csv)?;
    }
    let summary = json!({
        "gamma": model.gamma,
        "C": model.c,
        "support_vectors": model.support.len(),
        "grid_search": model.cv_table.is_some(),
        "source_checkpoint_id": model.source_checkpoint_id,
    });
    ctx.log.event("svm_fit", summary.clone())?;
    ctx.finish(summary, Status::Complete)
}

/// A model ready to predict a manifest.
enum Method {
    Cnn(Checkpoint),
    Dbvae(Checkpoint),
    CnnSvm(Checkpoint, SvmModel),
}

impl Method {
    fn name(&self) -> &'static str {
        match self {
            Method::Cnn(_) => METHOD_CNN,
            Method::Dbvae(_) => METHOD_DBVAE,
            Method::CnnSvm(..) => METHOD_SVM,
        }
    }

    fn slug(&self) -> &'static str {
        match self {
            Method::Cnn(_) => "standard_cnn",
            Method::Dbvae(_) => "db_vae",
            Method::CnnSvm(..) => "cnn_svm",
        }
    }

    fn predict(&self, m: &DatasetManifest, allow_mismatch: bool, log: &mut RunLog) -> Result<(Vec<PredictionRow>, Vec<SampleFailure>)> {
        let group = |id: &str| m.get(id).and_then(|s| s.group.clone());
        let threshold = |p: Predictions| -> (Vec<PredictionRow>, Vec<SampleFailure>) {
            let rows = p
                .scores
                .iter()
                .map(|s| PredictionRow { id: s.id.clone(), label: s.label, group: group(&s.id), score: s.score, predicted: u8::from(s.score > 0.5) })
                .collect();
            (rows, p.failures)
        };
        Ok(match self {
            Method::Cnn(c) => threshold(predict_scores(c, m, Temperature::AUDIT)?),
            Method::Dbvae(c) => threshold(predict_dbvae(c, m, Temperature::AUDIT)?),
            Method::CnnSvm(c, svm) => {
                let h = cnn_svm_predict(c, svm, m, allow_mismatch, log)?;
                let rows = h
                    .predictions
                    .into_iter()
                    .map(|p| PredictionRow { group: group(&p.id), id: p.id, label: p.label, score: p.score, predicted: p.predicted })
                    .collect();
                (rows, h.failures)
            }
        })
    }
}

fn load_method(ckpt_path: &Path, svm: Option<&Path>) -> Result<Method> {
    let ckpt = load_checkpoint(ckpt_path)?;
    match (ckpt.kind, svm) {
        (ModelKind::Cnn, None) => Ok(Method::Cnn(ckpt)),
        (ModelKind::Cnn, Some(p)) => Ok(Method::CnnSvm(ckpt, load_svm(p)?)),
        (ModelKind::Dbvae, None) => Ok(Method::Dbvae(ckpt)),
        (ModelKind::Dbvae, Some(_)) => Err(Error::Usage("an SVM head can only sit on a CNN checkpoint".into())),
    }
}

fn accuracy_of(rows: &[PredictionRow]) -> Option<f64> {
    (!rows.is_empty()).then(|| rows.iter().filter(|r| r.predicted == r.label).count() as f64 / rows.len() as f64)
}

fn cmd_eval(mut ctx: Ctx, ckpt_path: &Path, manifest_path: &Path, svm: Option<&Path>, allow_mismatch: bool) -> Result<Status> {
    let method = load_method(ckpt_path, svm)?;
    let manifest = load_manifest(manifest_path)?;
    let (rows, failures) = method.predict(&manifest, allow_mismatch, &mut ctx.log)?;
    ctx.write("predictions.csv", &predictions_csv(&rows)?)?;
    let mut by_group: BTreeMap<String, Vec<PredictionRow>> = BTreeMap::new();
    for r in &rows {
        by_group.entry(r.group.clone().unwrap_or_else(|| "(none)".into())).or_default().push(r.clone());
    }
    let groups: BTreeMap<&String, Option<f64>> = by_group.iter().map(|(g, r)| (g, accuracy_of(r))).collect();
    let status = report_failures(&mut ctx, &failures)?;
    let summary = json!({
        "method": method.name(),
        "samples": rows.len(),
        "failures": failures.len(),
        "accuracy": accuracy_of(&rows),
        "group_accuracy": groups,
    });
    ctx.finish(summary, status)
}

fn report_failures(ctx: &mut Ctx, failures: &[SampleFailure]) -> Result<Status> {
    if failures.is_empty() {
        return Ok(Status::Complete);
    }
    for f in failures {
        ctx.log.event("sample_failed", json!({ "id": f.id, "reason": f.reason }))?;
    }
    ctx.write_json("failures.json", &failures)?;
    Ok(Status::Partial)
}

pub struct ComparePaths {
    pub baseline: PathBuf,
    pub dbvae: PathBuf,
    pub retrained: PathBuf,
    pub svm: PathBuf,
}

/// Predicts `manifest` with every method; samples any method failed on are
/// dropped from all of them so the table compares like with like.
fn predict_all(
    methods: &[Method],
    manifest: &DatasetManifest,
    allow_mismatch: bool,
    log: &mut RunLog,
) -> Result<(Vec<MethodPredictions>, DatasetManifest, Vec<SampleFailure>)> {
    let mut all = Vec::new();
    let mut failures: Vec<SampleFailure> = Vec::new();
    for m in methods {
        let (rows, f) = m.predict(manifest, allow_mismatch, log)?;
        for x in f {
            if !failures.iter().any(|y| y.id == x.id) {
                failures.push(x);
            }
        }
        all.push(MethodPredictions { method: m.name().into(), rows });
    }
    let failed: HashSet<&str> = failures.iter().map(|f| f.id.as_str()).collect();
    let keep: HashSet<&str> = manifest.samples.iter().map(|s| s.id.as_str()).filter(|id| !failed.contains(id)).collect();
    for m in &mut all {
        m.rows.retain(|r| keep.contains(r.id.as_str()));
    }
    let kept = manifest.subset(&keep);
    failures.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((all, kept, failures))
}

fn cmd_compare(mut ctx: Ctx, paths: &ComparePaths, test_path: &Path, val_path: Option<&Path>, allow_mismatch: bool) -> Result<Status> {
    let methods = [
        load_method(&paths.baseline, None)?,
        load_method(&paths.dbvae, None)?,
        load_method(&paths.retrained, Some(&paths.svm))?,
    ];
    if !matches!(methods[1], Method::Dbvae(_)) {
        return Err(Error::Usage(format!("{} is not a DB-VAE checkpoint", paths.dbvae.display())));
    }
    let test = load_manifest(test_path)?;
    let (test_preds, test_kept, mut failures) = predict_all(&methods, &test, allow_mismatch, &mut ctx.log)?;
    let val = match load_opt_manifest(val_path)? {
        Some(v) => {
            let (p, _, f) = predict_all(&methods, &v, allow_mismatch, &mut ctx.log)?;
            failures.extend(f);
            Some(p)
        }
        None => None,
    };
    if test_kept.is_empty() {
        return Err(Error::Domain("no test sample could be scored".into()));
    }
    let table = group_accuracy_table(&test_preds, &test_kept, val.as_deref())?;
    ctx.write("report.csv", &table.to_csv())?;
    for (m, p) in methods.iter().zip(&test_preds) {
        ctx.write(&format!("predictions_{}.csv", m.slug()), &predictions_csv(&p.rows)?)?;
    }

    let baseline_rows = &test_preds[0].rows;
    let hist = score_histogram(baseline_rows.iter().map(|r| (r.score, r.label)), DEFAULT_BINS)?;
    ctx.write("histogram.svg", &histogram_svg(&hist, ctx.cfg.sbr.threshold, "Standard CNN test scores"))?;
    let ckpt = |m: &Method| match m {
        Method::Cnn(c) | Method::Dbvae(c) | Method::CnnSvm(c, _) => c.clone(),
    };
    let runs = [
        curve("baseline", &ckpt(&methods[0]).history),
        curve("dbvae", &ckpt(&methods[1]).history),
        curve("sbr", &ckpt(&methods[2]).history),
    ];
    write_curves(&ctx, "curves", &runs)?;

    let sources: BTreeMap<&str, Value> = methods
        .iter()
        .map(|m| {
            let c = ckpt(m);
            Ok((m.name(), json!({ "checkpoint_id": c.id()?, "predictions": format!("predictions_{}.csv", m.slug()) })))
        })
        .collect::<Result<_>>()?;
    let report = json!({ "table": table, "methods": sources, "score_histogram": hist, "failures": failures });
    ctx.write_json("report.json", &report)?;
    let status = report_failures(&mut ctx, &failures)?;
    let overall: BTreeMap<&str, f64> = table
        .methods
        .iter()
        .zip(&table.row(crate::report::OVERALL_ROW).expect("overall row").cells)
        .map(|(m, c)| (m.as_str(), c.accuracy))
        .collect();
    let summary = json!({ "test_samples": test_kept.len(), "failures": failures.len(), "overall_accuracy": overall });
    ctx.finish(summary, status)
}
