use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vtraffic_core::ingest::{ingest_reader, DailyAggregator, IngestDiagnostics};
use vtraffic_core::pipeline::{
    adf_population, analyze_population, predict_population, summarize, Histogram, UserAnalysis,
};
use vtraffic_core::predictability::Clamp;
use vtraffic_core::quantizer::quantize_series;
use vtraffic_core::series_io::{cache_exists, load_cache, save_cache, write_states_csv};
use vtraffic_core::stationarity::AdfError;
use vtraffic_core::synth::generate_traffic_population;
use vtraffic_core::{
    DailyTrafficSeries, Estimator, FieldLayout, ObservationWindow, PredictorSpec, QuantizationConfig,
};

use crate::config::{self, FileConfig, RunConfig};
use crate::output::{csv_file, finish, json_file, num, text_file};
use crate::{AnalyzeArgs, CliError, GlobalArgs, IngestArgs, PredictArgs, ReportArgs, SynthArgs};

pub const DEFAULT_OUT: &str = "vtraffic-out";
pub const DEFAULT_FIRST_DAY: &str = "2014-07-01";
pub const DEFAULT_LAST_DAY: &str = "2014-12-31";
pub const DEFAULT_USERS: usize = 500;
pub const DEFAULT_DAYS: usize = 184;
pub const DEFAULT_PROFILE: &str = "dependent";

type CmdResult = Result<(), CliError>;

fn out_dir(g: &GlobalArgs, file: &FileConfig) -> PathBuf {
    g.out
        .clone()
        .or_else(|| file.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn cache_dir(arg: Option<&PathBuf>, g: &GlobalArgs, file: &FileConfig) -> PathBuf {
    arg.cloned()
        .or_else(|| file.cache.clone())
        .unwrap_or_else(|| out_dir(g, file).join("cache"))
}

fn interval_dir(base: &Path, t: u64) -> PathBuf {
    base.join(format!("T{t}"))
}

fn open_cache(dir: &Path) -> Result<(ObservationWindow, Vec<DailyTrafficSeries>), CliError> {
    if !cache_exists(dir) {
        return Err(CliError::MissingInput(format!(
            "no series cache in {} (run `ingest` or `synth` first)",
            dir.display()
        )));
    }
    let (window, series) = load_cache(dir).with_context(|| format!("loading cache {}", dir.display()))?;
    if series.is_empty() {
        return Err(CliError::MissingInput(format!("series cache {} has no users", dir.display())));
    }
    Ok((window, series))
}

fn quantizers(t_list: &[u64]) -> Result<Vec<QuantizationConfig>, CliError> {
    t_list
        .iter()
        .map(|&t| QuantizationConfig::new(t).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn collect_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.is_file() {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            walk(p, &mut files).with_context(|| format!("listing {}", p.display()))?;
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(CliError::MissingInput(format!("{} does not exist", p.display())));
        }
    }
    if files.is_empty() {
        return Err(CliError::MissingInput("no CDR files found under the given inputs".into()));
    }
    Ok(files)
}

fn layout_from(a: &IngestArgs, file: &FileConfig) -> Result<FieldLayout, CliError> {
    let spec = a.layout.as_deref().or(file.layout.as_deref()).unwrap_or("default");
    let mut layout = match spec {
        "default" => FieldLayout::default(),
        "compact" => FieldLayout::compact(),
        s => FieldLayout::parse_spec(s).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    if let Some(d) = a.delimiter.as_deref().or(file.delimiter.as_deref()) {
        layout = layout.with_delimiter(config::parse_delimiter(d)?);
    }
    layout.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(layout)
}

#[derive(Serialize)]
struct IngestSummary {
    files: usize,
    users: usize,
    first_day: String,
    last_day: String,
    #[serde(flatten)]
    diagnostics: IngestDiagnostics,
}

pub fn ingest(g: &GlobalArgs, file: &FileConfig, a: &IngestArgs) -> CmdResult {
    let inputs = if a.input.is_empty() {
        file.input.clone().unwrap_or_default()
    } else {
        a.input.clone()
    };
    if inputs.is_empty() {
        return Err(CliError::Usage("--input is required".into()));
    }
    let first = config::parse_date(a.first_day.as_deref().or(file.first_day.as_deref()).unwrap_or(DEFAULT_FIRST_DAY))?;
    let last = config::parse_date(a.last_day.as_deref().or(file.last_day.as_deref()).unwrap_or(DEFAULT_LAST_DAY))?;
    let window = ObservationWindow::new(first, last).map_err(|e| CliError::Usage(e.to_string()))?;
    let layout = layout_from(a, file)?;
    let files = collect_inputs(&inputs)?;

    let parts: Vec<(DailyAggregator, IngestDiagnostics)> = files
        .par_iter()
        .map(|path| {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let mut agg = DailyAggregator::new(window);
            let diag = ingest_reader(BufReader::new(f), &layout, &mut agg)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok((agg, diag))
        })
        .collect::<anyhow::Result<_>>()?;
    let mut agg = DailyAggregator::new(window);
    let mut diagnostics = IngestDiagnostics::default();
    for (part, diag) in parts {
        agg = agg.merge(part);
        diagnostics.merge(&diag);
    }
    let series: Vec<DailyTrafficSeries> = agg.finish().into_values().collect();

    let out = out_dir(g, file);
    let cache = cache_dir(None, g, file);
    save_cache(&cache, window, &series).context("writing series cache")?;
    let summary = IngestSummary {
        files: files.len(),
        users: series.len(),
        first_day: window.first_day().to_string(),
        last_day: window.last_day().to_string(),
        diagnostics,
    };
    json_file(&out.join("ingest_diagnostics.json"), &summary)?;
    eprintln!(
        "ingest: {} files, {} records parsed, {} skipped, {} users over {} days",
        summary.files,
        summary.diagnostics.parsed,
        summary.diagnostics.skipped,
        summary.users,
        window.day_count()
    );
    Ok(())
}

pub fn synth(g: &GlobalArgs, file: &FileConfig, a: &SynthArgs) -> CmdResult {
    let users = a.users.or(file.users).unwrap_or(DEFAULT_USERS);
    let days = a.days.or(file.days).unwrap_or(DEFAULT_DAYS);
    if days == 0 {
        return Err(CliError::Usage("--days must be at least 1".into()));
    }
    let name = a.profile.as_deref().or(file.profile.as_deref()).unwrap_or(DEFAULT_PROFILE);
    let mut profile = config::profile_named(name).map_err(|e| CliError::Usage(format!("{e:#}")))?;
    if let Some(seed) = g.seed.or(file.seed) {
        profile = profile.with_seed(seed);
    }
    if let Some(d) = a.first_day.as_deref().or(file.first_day.as_deref()) {
        profile.first_day = config::parse_date(d)?;
    }
    profile.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let series = generate_traffic_population(&profile, users, days).map_err(|e| CliError::Usage(e.to_string()))?;
    let window = ObservationWindow::starting(profile.first_day, days).map_err(|e| CliError::Usage(e.to_string()))?;

    let out = out_dir(g, file);
    save_cache(&cache_dir(None, g, file), window, &series).context("writing series cache")?;
    json_file(&out.join("synth_profile.json"), &profile)?;
    eprintln!("synth: {users} users x {days} days, profile {name}, seed {}", profile.seed);
    Ok(())
}

fn parse_estimator(raw: &str) -> Result<Estimator, CliError> {
    match raw.split_once(':') {
        None if raw == "lz" => Ok(Estimator::Lz),
        Some(("exact", k)) => k
            .parse()
            .ok()
            .filter(|&k: &usize| k >= 1)
            .map(|max_block| Estimator::Exact { max_block })
            .ok_or_else(|| CliError::Usage(format!("bad block length in {raw:?}"))),
        _ => Err(CliError::Usage(format!("estimator must be `lz` or `exact:K`, got {raw:?}"))),
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Serialize)]
struct IntervalSummary {
    interval_t: u64,
    users: usize,
    mean_states: f64,
    mean_s_rand: f64,
    mean_s_unc: f64,
    mean_s_real: f64,
    mean_pi_rand: f64,
    mean_pi_unc: f64,
    mean_pi_max: f64,
    clamped_low: usize,
    clamped_high: usize,
}

#[derive(Serialize)]
struct AdfSummary {
    tested: usize,
    skipped: BTreeMap<String, usize>,
    stationary_share_05: f64,
    stationary_share_01: f64,
}

#[derive(Serialize)]
struct AnalyzeSummary {
    estimator: String,
    users: usize,
    days: usize,
    intervals: Vec<IntervalSummary>,
    adf: AdfSummary,
}

fn write_histogram(path: &Path, label: &str, rows: &[(&str, Histogram)]) -> anyhow::Result<()> {
    let mut w = csv_file(path, &[label, "bin_start", "bin_end", "count"])?;
    for (name, h) in rows {
        for (lo, hi, count) in h.bins() {
            w.write_record([name.to_string(), num(lo), num(hi), count.to_string()])?;
        }
    }
    finish(w)
}

fn write_analysis(dir: &Path, series: &[DailyTrafficSeries], cfg: &QuantizationConfig, analyses: &[UserAnalysis]) -> anyhow::Result<()> {
    let mut w = csv_file(&dir.join("entropy.csv"), &["user_id", "n", "N", "s_rand", "s_unc", "s_real", "estimator"])?;
    for a in analyses {
        let e = &a.entropy;
        w.write_record([
            a.user.clone(),
            e.seq_length.to_string(),
            e.n_states.to_string(),
            num(e.s_rand),
            num(e.s_unc),
            num(e.s_real),
            e.estimator.tag().to_string(),
        ])?;
    }
    finish(w)?;

    let mut w = csv_file(&dir.join("predictability.csv"), &["user_id", "pi_rand", "pi_unc", "pi_max"])?;
    for a in analyses {
        let p = &a.predictability;
        w.write_record([a.user.clone(), num(p.pi_rand), num(p.pi_unc), num(p.pi_max)])?;
    }
    finish(w)?;

    let sequences: Vec<_> = series.iter().map(|s| quantize_series(s, cfg)).collect();
    let f = std::io::BufWriter::new(File::create(dir.join("states.csv"))?);
    write_states_csv(f, series.iter().map(|s| s.user()).zip(sequences.iter()))?;

    let col = |f: fn(&UserAnalysis) -> f64| analyses.iter().map(f).collect::<Vec<_>>();
    write_histogram(
        &dir.join("hist_entropy.csv"),
        "quantity",
        &[
            ("s_rand", Histogram::entropies(&col(|a| a.entropy.s_rand))),
            ("s_unc", Histogram::entropies(&col(|a| a.entropy.s_unc))),
            ("s_real", Histogram::entropies(&col(|a| a.entropy.s_real))),
        ],
    )?;
    write_histogram(
        &dir.join("hist_predictability.csv"),
        "quantity",
        &[
            ("pi_rand", Histogram::probabilities(col(|a| a.predictability.pi_rand))),
            ("pi_unc", Histogram::probabilities(col(|a| a.predictability.pi_unc))),
            ("pi_max", Histogram::probabilities(col(|a| a.predictability.pi_max))),
        ],
    )?;

    let mut by_states: BTreeMap<usize, usize> = BTreeMap::new();
    for a in analyses {
        *by_states.entry(a.entropy.n_states).or_default() += 1;
    }
    let mut w = csv_file(&dir.join("hist_states.csv"), &["n_states", "users"])?;
    for (n, users) in by_states {
        w.write_record([n.to_string(), users.to_string()])?;
    }
    finish(w)
}

fn adf_skip_reason(e: &AdfError) -> &'static str {
    match e {
        AdfError::SeriesTooShort(_) => "too_short",
        AdfError::ConstantSeries => "constant",
        AdfError::SingularRegression => "singular",
        AdfError::EmptyCollection => "empty",
    }
}

pub fn analyze(g: &GlobalArgs, file: &FileConfig, a: &AnalyzeArgs) -> CmdResult {
    let t_list = a.t_list.clone().or_else(|| file.t_list.clone()).unwrap_or_else(config::default_t_list);
    let estimator = parse_estimator(&a.estimator)?;
    let configs = quantizers(&t_list)?;
    let cache = cache_dir(a.cache.as_ref(), g, file);
    let (window, series) = open_cache(&cache)?;
    let base = out_dir(g, file).join("analyze");

    let mut intervals = Vec::new();
    for cfg in &configs {
        let analyses = analyze_population(&series, cfg, estimator).map_err(|e| anyhow!(e))?;
        write_analysis(&interval_dir(&base, cfg.interval_t()), &series, cfg, &analyses)?;
        let clamps = |c: Clamp| analyses.iter().filter(|a| a.predictability.clamp == c).count();
        intervals.push(IntervalSummary {
            interval_t: cfg.interval_t(),
            users: analyses.len(),
            mean_states: mean(analyses.iter().map(|a| a.entropy.n_states as f64)),
            mean_s_rand: mean(analyses.iter().map(|a| a.entropy.s_rand)),
            mean_s_unc: mean(analyses.iter().map(|a| a.entropy.s_unc)),
            mean_s_real: mean(analyses.iter().map(|a| a.entropy.s_real)),
            mean_pi_rand: mean(analyses.iter().map(|a| a.predictability.pi_rand)),
            mean_pi_unc: mean(analyses.iter().map(|a| a.predictability.pi_unc)),
            mean_pi_max: mean(analyses.iter().map(|a| a.predictability.pi_max)),
            clamped_low: clamps(Clamp::Low),
            clamped_high: clamps(Clamp::High),
        });
    }

    let adf = adf_population(&series);
    let mut w = csv_file(
        &base.join("adf.csv"),
        &["user_id", "t_stat", "p_value", "lags", "stationary_05", "stationary_01"],
    )?;
    let mut skipped: BTreeMap<String, usize> = BTreeMap::new();
    let mut tested = Vec::new();
    for (user, result) in &adf {
        match result {
            Ok(r) => {
                w.write_record([
                    user.clone(),
                    num(r.t_statistic),
                    num(r.p_value),
                    r.lags_used.to_string(),
                    r.stationary_at(0.05).to_string(),
                    r.stationary_at(0.01).to_string(),
                ])?;
                tested.push(*r);
            }
            Err(e) => *skipped.entry(adf_skip_reason(e).to_string()).or_default() += 1,
        }
    }
    finish(w)?;
    let share = |alpha| vtraffic_core::stationarity::stationary_fraction(&tested, alpha).unwrap_or(f64::NAN);
    let summary = AnalyzeSummary {
        estimator: match estimator {
            Estimator::Lz => "lz".into(),
            Estimator::Exact { max_block } => format!("exact:{max_block}"),
        },
        users: series.len(),
        days: window.day_count(),
        intervals,
        adf: AdfSummary {
            tested: tested.len(),
            stationary_share_05: share(0.05),
            stationary_share_01: share(0.01),
            skipped,
        },
    };
    json_file(&base.join("summary.json"), &summary)?;
    eprintln!(
        "analyze: {} users, T = {:?}, ADF stationary share at 0.01: {:.3}",
        series.len(),
        t_list,
        summary.adf.stationary_share_01
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PredictMeta {
    t_list: Vec<u64>,
    roster: Vec<PredictorSpec>,
    warmup: usize,
    users: usize,
}

pub fn predict(g: &GlobalArgs, file: &FileConfig, a: &PredictArgs) -> CmdResult {
    let orders = a.orders.clone().or_else(|| file.orders.clone()).unwrap_or_else(config::default_orders);
    let baselines = a
        .baselines
        .clone()
        .or_else(|| file.baselines.clone())
        .unwrap_or_else(config::default_baselines);
    let beta = a.beta.or(file.beta).unwrap_or_else(config::default_beta);
    let run = RunConfig {
        out: out_dir(g, file),
        cache: cache_dir(a.cache.as_ref(), g, file),
        t_list: a.t_list.clone().or_else(|| file.t_list.clone()).unwrap_or_else(config::default_t_list),
        roster: config::build_roster(&orders, &baselines, beta)?,
        warmup: a.warmup.or(file.warmup).unwrap_or(1),
    };
    run.validate()?;
    let configs = quantizers(&run.t_list)?;
    let (window, series) = open_cache(&run.cache)?;
    if run.warmup >= window.day_count() {
        return Err(CliError::Usage(format!(
            "warmup {} leaves nothing to predict in a {}-day window",
            run.warmup,
            window.day_count()
        )));
    }
    let base = run.out.join("predict");

    let mut summary = csv_file(&base.join("summary.csv"), &["T", "model", "mean_accuracy", "mean_pi_max"])?;
    for cfg in &configs {
        let result = predict_population(&series, cfg, &run.roster, run.warmup).map_err(|e| anyhow!(e))?;
        let dir = interval_dir(&base, cfg.interval_t());
        let mut w = csv_file(
            &dir.join("accuracy.csv"),
            &["user_id", "predictor", "param", "n_total", "n_correct", "accuracy"],
        )?;
        for r in &result.rows {
            w.write_record([
                r.user.clone(),
                r.predictor.name().to_string(),
                r.predictor.param(),
                r.n_total.to_string(),
                r.n_correct.to_string(),
                num(r.accuracy),
            ])?;
        }
        finish(w)?;

        let hists: Vec<(String, Histogram)> = run
            .roster
            .iter()
            .map(|spec| {
                let acc = result.rows.iter().filter(|r| r.predictor == *spec).map(|r| r.accuracy);
                (spec.to_string(), Histogram::probabilities(acc))
            })
            .collect();
        let named: Vec<(&str, Histogram)> = hists.iter().map(|(n, h)| (n.as_str(), h.clone())).collect();
        write_histogram(&dir.join("hist_accuracy.csv"), "model", &named)?;

        for row in summarize(&result, &run.roster) {
            summary.write_record([
                row.interval_t.to_string(),
                row.model,
                num(row.mean_accuracy),
                num(row.mean_pi_max),
            ])?;
        }
    }
    finish(summary)?;
    json_file(
        &base.join("run.json"),
        &PredictMeta {
            t_list: run.t_list.clone(),
            roster: run.roster.clone(),
            warmup: run.warmup,
            users: series.len(),
        },
    )?;
    eprintln!(
        "predict: {} users, {} predictors, T = {:?}, warmup {}",
        series.len(),
        run.roster.len(),
        run.t_list,
        run.warmup
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct SummaryIn {
    #[serde(rename = "T")]
    t: u64,
    model: String,
    mean_accuracy: f64,
    mean_pi_max: f64,
}

/// Highest Markov order present, which the headline table reports.
fn headline_model(rows: &[SummaryIn]) -> Option<String> {
    rows.iter()
        .filter_map(|r| r.model.parse::<PredictorSpec>().ok())
        .filter_map(|s| match s {
            PredictorSpec::Markov { order } => Some(order),
            _ => None,
        })
        .max()
        .map(|order| PredictorSpec::Markov { order }.to_string())
}

pub fn report(g: &GlobalArgs, file: &FileConfig, a: &ReportArgs) -> CmdResult {
    let per_erlang = a.seconds_per_erlang.or(file.seconds_per_erlang);
    if per_erlang.is_some_and(|d| !(d.is_finite() && d > 0.0)) {
        return Err(CliError::Usage("--seconds-per-erlang must be positive".into()));
    }
    let out = out_dir(g, file);
    let path = out.join("predict").join("summary.csv");
    if !path.is_file() {
        return Err(CliError::MissingInput(format!("{} not found (run `predict` first)", path.display())));
    }
    let rows: Vec<SummaryIn> = csv::Reader::from_path(&path)
        .context("opening predict summary")?
        .deserialize()
        .collect::<Result<_, _>>()
        .context("parsing predict summary")?;
    if rows.is_empty() {
        return Err(CliError::MissingInput(format!("{} has no rows", path.display())));
    }

    let base = out.join("report");
    let mut header = vec!["T", "model", "mean_accuracy", "mean_pi_max", "gap", "max_error_seconds"];
    if per_erlang.is_some() {
        header.push("max_error_erlang");
    }
    let mut w = csv_file(&base.join("table.csv"), &header)?;
    for r in &rows {
        let err = r.t as f64 / 2.0;
        let mut rec = vec![
            r.t.to_string(),
            r.model.clone(),
            num(r.mean_accuracy),
            num(r.mean_pi_max),
            num(r.mean_pi_max - r.mean_accuracy),
            num(err),
        ];
        if let Some(d) = per_erlang {
            rec.push(num(err / d));
        }
        w.write_record(&rec)?;
    }
    finish(w)?;

    let mut md = String::new();
    if let Some(model) = headline_model(&rows) {
        md.push_str(&format!("## {model} accuracy against maximum predictability\n\n"));
        md.push_str("| T (s) | error range (s) |");
        if per_erlang.is_some() {
            md.push_str(" error range (Erlang) |");
        }
        md.push_str(" accuracy | pi_max |\n|---:|---:|");
        if per_erlang.is_some() {
            md.push_str("---:|");
        }
        md.push_str("---:|---:|\n");
        for r in rows.iter().filter(|r| r.model == model) {
            let err = r.t as f64 / 2.0;
            md.push_str(&format!("| {} | {} |", r.t, err));
            if let Some(d) = per_erlang {
                md.push_str(&format!(" {:.4} |", err / d));
            }
            md.push_str(&format!(" {:.2}% | {:.4} |\n", 100.0 * r.mean_accuracy, r.mean_pi_max));
        }
        md.push('\n');
    }
    md.push_str("## All predictors\n\n| T (s) | model | accuracy | pi_max |\n|---:|:---|---:|---:|\n");
    for r in &rows {
        md.push_str(&format!(
            "| {} | {} | {:.4} | {:.4} |\n",
            r.t, r.model, r.mean_accuracy, r.mean_pi_max
        ));
    }
    text_file(&base.join("table.md"), &md)?;
    eprintln!("report: {} rows written to {}", rows.len(), base.display());
    Ok(())
}
