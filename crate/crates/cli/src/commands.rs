use std::path::{Path, PathBuf};
use std::sync::Arc;

use darkscan_core::detection::compare_sites;
use darkscan_core::evaluation::{
    compute_metrics, load_dataset, split, train_lr_baseline, tune_thresholds, LabeledExample, LrHyperParams,
    Objective, SplitRatios,
};
use darkscan_core::ingest::corpus_layout;
use darkscan_core::report::{parse_report, render_comparison, render_report, to_decimal_json, ReportFormat};
use darkscan_core::{
    classify_all, fetch_page, AggregationMode, Category, Detection, FetchConfig, LrBaseline, PageSource, Scanner,
    Thresholds,
};
use rayon::prelude::*;

use crate::backend::{self, DynBackend};
use crate::{BackendArgs, Command, FormatArg, ModeArg, ScanTarget};

type Result<T> = std::result::Result<T, Box<dyn std::error::Error + Send + Sync>>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Scan {
            target,
            backend,
            thresholds,
            mode,
            out,
            format,
            site_id,
            jobs,
            ignore_robots,
            renderer,
        } => {
            let fetch = FetchConfig {
                respect_robots: !ignore_robots,
                renderer_hook: renderer,
                ..FetchConfig::default()
            };
            let opts = ScanOptions {
                thresholds: load_thresholds(thresholds.as_deref())?,
                mode: mode.into(),
                format: format.into(),
                site_id,
                jobs,
                fetch,
            };
            let backend = backend::build(&backend, None)?;
            scan(&target, &*backend, &opts, out.as_deref())
        }
        Command::Classify {
            text,
            backend,
            thresholds,
            json,
        } => classify(&text, &backend::build(&backend, None)?, &load_thresholds(thresholds.as_deref())?, json),
        Command::Evaluate {
            dataset,
            backend,
            seed,
            out,
        } => evaluate(&dataset, &backend, seed, out.as_deref()),
        Command::TrainBaseline {
            dataset,
            seed,
            epochs,
            lr,
            batch_size,
            l2,
            out,
            metrics_out,
        } => {
            let hyper = LrHyperParams {
                learning_rate: lr,
                epochs,
                batch_size,
                l2,
                seed,
                ..LrHyperParams::default()
            };
            train_baseline(&dataset, hyper, &out, metrics_out.as_deref())
        }
        Command::TuneThresholds {
            dataset,
            backend,
            objective,
            seed,
            out,
        } => tune(&dataset, &backend, objective.parse()?, seed, out.as_deref()),
        Command::Compare { reports, format } => compare(&reports, format.into()),
        Command::Serve {
            bind,
            backend,
            thresholds,
            mode,
            allow_origin,
        } => {
            let mut config = darkscan_service::ServiceConfig {
                thresholds: load_thresholds(thresholds.as_deref())?,
                mode: mode.into(),
                ..Default::default()
            };
            if !allow_origin.is_empty() {
                config.allowed_origins = allow_origin;
            }
            let backend: darkscan_service::SharedBackend = Arc::from(backend::build(&backend, None)?);
            eprintln!("darkscan: serving {} backend on http://{bind}", backend.name());
            darkscan_service::serve_blocking(&bind, backend, config)?;
            Ok(())
        }
    }
}

impl From<ModeArg> for AggregationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Argmax => AggregationMode::ArgmaxFraction,
            ModeArg::Mean => AggregationMode::MeanProbability,
        }
    }
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Md => ReportFormat::Markdown,
        }
    }
}

fn load_thresholds(path: Option<&Path>) -> Result<Thresholds> {
    Ok(match path {
        Some(p) => Thresholds::from_path(p)?,
        None => Thresholds::default(),
    })
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()).into()),
        None => {
            print!("{content}");
            if !content.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

struct ScanOptions {
    thresholds: Thresholds,
    mode: AggregationMode,
    format: ReportFormat,
    site_id: Option<String>,
    jobs: Option<usize>,
    fetch: FetchConfig,
}

fn extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Json => "json",
        ReportFormat::Markdown => "md",
    }
}

fn scan(target: &ScanTarget, backend: &dyn darkscan_core::ClassifierBackend<f64>, opts: &ScanOptions, out: Option<&Path>) -> Result<()> {
    let scanner = Scanner::new(backend)
        .with_thresholds(opts.thresholds)
        .with_mode(opts.mode);

    if let Some(root) = &target.corpus {
        let sites = corpus_layout(root)?;
        if sites.is_empty() {
            return Err(format!("{} contains no <site>/<page>.html files", root.display()).into());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs.unwrap_or(0))
            .build()?;
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)?;
        }
        for (site, pages) in sites {
            let per_page: Vec<Result<Vec<Detection>>> = pool.install(|| {
                pages
                    .par_iter()
                    .map(|p| Ok(scanner.detect_page(&PageSource::from_file(p)?)?))
                    .collect()
            });
            let mut results = Vec::new();
            for r in per_page {
                results.extend(r?);
            }
            let report = scanner.report(&site, &results)?;
            let rendered = render_report(&report, opts.format);
            match out {
                Some(dir) => {
                    let path = dir.join(format!("{site}.{}", extension(opts.format)));
                    emit(Some(&path), &rendered)?;
                    eprintln!("{site}: {} segments, {} flagged -> {}", report.n_segments, report.flagged.len(), path.display());
                }
                None => emit(None, &rendered)?,
            }
        }
        return Ok(());
    }

    let (page, default_site) = if let Some(url) = &target.url {
        let page = fetch_page(url, &opts.fetch)?;
        let host = url::Url::parse(url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
            .unwrap_or_else(|| "site".into());
        (page, host)
    } else {
        let file: &PathBuf = target.file.as_ref().expect("clap enforces one target");
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "site".into());
        (PageSource::from_file(file)?, stem)
    };
    let site = opts.site_id.clone().unwrap_or(default_site);
    let report = scanner.scan_site(&site, &[page])?;
    emit(out, &render_report(&report, opts.format))
}

fn classify(texts: &[String], backend: &DynBackend, thresholds: &Thresholds, json: bool) -> Result<()> {
    let dists = classify_all(&**backend, texts, darkscan_core::classifier::DEFAULT_BATCH_SIZE)?;
    if json {
        let results: Vec<serde_json::Value> = dists
            .iter()
            .map(|d| {
                serde_json::json!({
                    "probabilities": d.probs(),
                    "predicted": d.argmax(),
                    "flagged": darkscan_core::flag(d, thresholds),
                })
            })
            .collect();
        return emit(None, &to_decimal_json(&serde_json::json!({ "results": results })));
    }
    let mut out = String::new();
    for (text, d) in texts.iter().zip(&dists) {
        out.push_str(&format!("{text}\n"));
        for c in Category::ALL {
            out.push_str(&format!("  {:<17} {:.4}\n", c.display_name(), d.prob(c)));
        }
        out.push_str(&format!("  predicted: {}\n", d.argmax()));
        let flagged: Vec<&str> = darkscan_core::flag(d, thresholds)
            .into_iter()
            .map(|c| c.display_name())
            .collect();
        out.push_str(&format!(
            "  flagged: {}\n",
            if flagged.is_empty() { "none".to_string() } else { flagged.join(", ") }
        ));
    }
    emit(None, &out)
}

fn load_split(dataset: &Path, seed: u64) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>, Vec<LabeledExample>)> {
    let loaded = load_dataset(dataset)?;
    if !loaded.rejects.is_empty() {
        eprintln!("{} rows rejected:", loaded.rejects.len());
        for r in loaded.rejects.iter().take(10) {
            eprintln!("  line {}: {} ({:?})", r.line, r.reason, r.label);
        }
    }
    let parts = split(&loaded.examples, SplitRatios::default(), seed)?;
    Ok((parts.train, parts.val, parts.test))
}

fn evaluate(dataset: &Path, args: &BackendArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let (train, val, test) = load_split(dataset, seed)?;
    let backend = backend::build(args, Some((&train, &val, seed)))?;
    let texts: Vec<String> = test.iter().map(|e| e.text.clone()).collect();
    let predicted: Vec<Category> = classify_all(&*backend, &texts, darkscan_core::classifier::DEFAULT_BATCH_SIZE)?
        .iter()
        .map(|d| d.argmax())
        .collect();
    let gold: Vec<Category> = test.iter().map(|e| e.label).collect();
    let metrics = compute_metrics(&predicted, &gold)?;
    eprintln!(
        "{} backend on {} test examples: accuracy {:.4}, macro F1 {:.4}",
        backend.name(),
        test.len(),
        metrics.accuracy,
        metrics.macro_f1
    );
    emit(out, &to_decimal_json(&metrics))
}

fn train_baseline(dataset: &Path, hyper: LrHyperParams, out: &Path, metrics_out: Option<&Path>) -> Result<()> {
    let (train, val, test) = load_split(dataset, hyper.seed)?;
    let model: LrBaseline = train_lr_baseline(&train, &val, hyper)?;
    for e in &model.history {
        println!(
            "epoch {:>3}  loss {:.4}  accuracy {:.4}  val_accuracy {:.4}",
            e.epoch,
            e.loss,
            e.train_accuracy,
            e.val_accuracy.unwrap_or(0.0)
        );
    }
    let predicted: Vec<Category> = test.iter().map(|e| model.predict(&e.text)).collect();
    let gold: Vec<Category> = test.iter().map(|e| e.label).collect();
    let metrics = compute_metrics(&predicted, &gold)?;
    println!(
        "train {} / val {} / test {}; vocabulary {}; test accuracy {:.4}",
        train.len(),
        val.len(),
        test.len(),
        model.n_features(),
        metrics.accuracy
    );
    model.save(out)?;
    println!("model written to {}", out.display());
    if let Some(path) = metrics_out {
        emit(Some(path), &to_decimal_json(&metrics))?;
    }
    Ok(())
}

fn tune(dataset: &Path, args: &BackendArgs, objective: Objective, seed: u64, out: Option<&Path>) -> Result<()> {
    let (train, val, _) = load_split(dataset, seed)?;
    let backend = backend::build(args, Some((&train, &val, seed)))?;
    let texts: Vec<String> = val.iter().map(|e| e.text.clone()).collect();
    let dists = classify_all(&*backend, &texts, darkscan_core::classifier::DEFAULT_BATCH_SIZE)?;
    let pairs: Vec<_> = dists.into_iter().zip(val.iter().map(|e| e.label)).collect();
    let tuned = tune_thresholds(&pairs, objective)?;
    for t in &tuned.categories {
        eprintln!(
            "{:<14} threshold {:.4}  {} {:.4}{}",
            t.category.display_name(),
            t.threshold,
            tuned.objective,
            t.score,
            t.note.as_ref().map(|n| format!("  ({n})")).unwrap_or_default()
        );
    }
    emit(out, &to_decimal_json(&tuned.thresholds))
}

fn compare(paths: &[PathBuf], format: ReportFormat) -> Result<()> {
    let mut docs = Vec::with_capacity(paths.len());
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
        docs.push(parse_report(&text).map_err(|e| format!("{}: {e}", p.display()))?);
    }
    let cmp = compare_sites(&docs)?;
    emit(None, &render_comparison(&cmp, format))
}
