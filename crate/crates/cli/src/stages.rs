//! Pipeline stages behind the CLI verbs: ingest, build-dict, regressors,
//! fit, run, report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use varcast_core::backtest;
use varcast_core::combine;
use varcast_core::error::{Error, Result};
use varcast_core::estimate::{fit, FitConfig, FittedModel};
use varcast_core::forecast::{rolling_run, RollingOutput, VaRPanel};
use varcast_core::market::{aggregate_sector, load_ticks, resample, summary_stats, BarSeries};
use varcast_core::mcs::{loss_matrix, mcs_run, McsResult};
use varcast_core::model::{ModelSpec, RegressorKind, RegressorSet};
use varcast_core::sentiment::{
    build_dictionary, build_regressors, compute_thresholds, deduplicate, label_headlines,
    load_headlines, Headline, LabeledHeadline, RegressorSeries, SentimentDictionary,
};

use crate::config::{stage_seed, ExperimentConfig};
use crate::manifest::RunManifest;
use crate::outputs;

/// One sector's bar data on both grids.
#[derive(Debug, Clone)]
pub struct SectorData {
    pub name: String,
    pub label_bars: BarSeries,
    pub model_bars: BarSeries,
}

#[derive(Debug)]
pub struct IngestOutput {
    pub sectors: Vec<SectorData>,
}

fn load_sector_map(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "instrument_id,sector" => {}
        _ => {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                message: "expected header `instrument_id,sector`".into(),
            })
        }
    }
    let mut map = BTreeMap::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (instrument, sector) = line.split_once(',').ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: "expected `instrument_id,sector`".into(),
        })?;
        map.insert(instrument.trim().to_string(), sector.trim().to_string());
    }
    Ok(map)
}

/// Group member bar series by identical timestamp grids, keep the largest
/// group (ties: the group containing the alphabetically first member), and
/// report the excluded members.
fn align_members(
    members: Vec<(String, BarSeries)>,
) -> (Vec<BarSeries>, Vec<String>) {
    let mut groups: Vec<(Vec<i64>, Vec<(String, BarSeries)>)> = Vec::new();
    for (id, bars) in members {
        match groups.iter_mut().find(|(ts, _)| *ts == bars.timestamps) {
            Some((_, group)) => group.push((id, bars)),
            None => groups.push((bars.timestamps.clone(), vec![(id, bars)])),
        }
    }
    groups.sort_by(|a, b| {
        b.1.len()
            .cmp(&a.1.len())
            .then_with(|| a.1[0].0.cmp(&b.1[0].0))
    });
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (gi, (_, group)) in groups.into_iter().enumerate() {
        for (id, bars) in group {
            if gi == 0 {
                kept.push(bars);
            } else {
                excluded.push(id);
            }
        }
    }
    excluded.sort();
    (kept, excluded)
}

/// Ingest stage: load every tick file, resample to both grids, aggregate into
/// sectors, and write bars plus the summary-statistics tables.
pub fn run_ingest(config: &ExperimentConfig, manifest: &mut RunManifest) -> Result<IngestOutput> {
    manifest.begin_stage("ingest");
    let sector_map = load_sector_map(&config.data.sector_map)?;

    let mut tick_files: Vec<_> = std::fs::read_dir(&config.data.ticks_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    tick_files.sort();
    if tick_files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no tick CSVs in {}",
            config.data.ticks_dir.display()
        )));
    }

    let intervals = [
        config.bars.label_interval_seconds,
        config.bars.model_interval_seconds,
    ];
    // sector -> interval -> members
    let mut by_sector: BTreeMap<String, [Vec<(String, BarSeries)>; 2]> = BTreeMap::new();
    for path in &tick_files {
        let ticks = load_ticks(path)?;
        let sector = match sector_map.get(&ticks.instrument_id) {
            Some(s) => s.clone(),
            None => {
                manifest.warn(format!(
                    "instrument {} missing from the sector map; skipped",
                    ticks.instrument_id
                ));
                continue;
            }
        };
        let entry = by_sector.entry(sector).or_default();
        for (k, &interval) in intervals.iter().enumerate() {
            let bars = resample(&ticks, interval)?;
            outputs::write_file(
                manifest,
                &config.out_dir,
                format!("bars/instruments/{}_{}s.csv", ticks.instrument_id, interval),
                &outputs::bars_csv(&bars),
            )?;
            entry[k].push((ticks.instrument_id.clone(), bars));
        }
    }

    let mut sectors = Vec::new();
    let mut stats_rows: [Vec<(String, varcast_core::market::SummaryStats)>; 2] =
        [Vec::new(), Vec::new()];
    for (name, members) in by_sector {
        let mut per_interval: Vec<BarSeries> = Vec::with_capacity(2);
        for (k, &interval) in intervals.iter().enumerate() {
            let (kept, excluded) = align_members(members[k].clone());
            for id in &excluded {
                manifest.warn(format!(
                    "sector {name}: member {id} excluded at {interval}s (grid mismatch)"
                ));
            }
            if kept.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "sector {name} has no aligned members at {interval}s"
                )));
            }
            let agg = aggregate_sector(&kept)?;
            outputs::write_file(
                manifest,
                &config.out_dir,
                format!("bars/sectors/{name}_{interval}s.csv"),
                &outputs::bars_csv(&agg),
            )?;
            stats_rows[k].push((name.clone(), summary_stats(&agg.log_returns)?));
            per_interval.push(agg);
        }
        let model_bars = per_interval.pop().expect("two intervals");
        let label_bars = per_interval.pop().expect("two intervals");
        sectors.push(SectorData {
            name,
            label_bars,
            model_bars,
        });
    }
    for (k, &interval) in intervals.iter().enumerate() {
        outputs::write_file(
            manifest,
            &config.out_dir,
            format!("stats/summary_{interval}s.csv"),
            &outputs::summary_csv(&stats_rows[k]),
        )?;
    }
    manifest.end_stage();
    Ok(IngestOutput { sectors })
}

/// Headlines grouped per sector (ids may be instruments or sector names).
pub fn sector_headlines(
    config: &ExperimentConfig,
    sectors: &[SectorData],
    manifest: &mut RunManifest,
) -> Result<BTreeMap<String, Vec<Headline>>> {
    let path = config.data.headlines.as_ref().ok_or_else(|| {
        Error::InvalidInput("this stage requires data.headlines in the config".into())
    })?;
    let sector_map = load_sector_map(&config.data.sector_map)?;
    let headlines = deduplicate(load_headlines(path)?);
    let known: std::collections::BTreeSet<&str> =
        sectors.iter().map(|s| s.name.as_str()).collect();
    let mut grouped: BTreeMap<String, Vec<Headline>> = BTreeMap::new();
    let mut unknown = 0usize;
    for h in headlines {
        let sector = if known.contains(h.id.as_str()) {
            Some(h.id.clone())
        } else {
            sector_map.get(&h.id).cloned()
        };
        match sector {
            Some(s) if known.contains(s.as_str()) => grouped.entry(s).or_default().push(h),
            _ => unknown += 1,
        }
    }
    if unknown > 0 {
        manifest.warn(format!("{unknown} headlines with unknown instrument/sector ids"));
    }
    Ok(grouped)
}

fn insample_len(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).floor() as usize
}

/// Dictionary stage: label the in-sample half of each sector's headlines
/// against its labelling-grid returns, pool, score, and write the dictionary.
pub fn run_build_dict(
    config: &ExperimentConfig,
    sectors: &[SectorData],
    manifest: &mut RunManifest,
) -> Result<SentimentDictionary> {
    manifest.begin_stage("build-dict");
    let grouped = sector_headlines(config, sectors, manifest)?;
    let mut pooled: Vec<LabeledHeadline> = Vec::new();
    for sector in sectors {
        let Some(heads) = grouped.get(&sector.name) else {
            continue;
        };
        let n_in = insample_len(sector.label_bars.n_returns(), config.rolling.insample_fraction);
        if n_in < 200 {
            return Err(Error::InvalidInput(format!(
                "sector {}: {n_in} in-sample labelling returns is too short (need >= 200)",
                sector.name
            )));
        }
        let insample = &sector.label_bars.log_returns[..n_in];
        let thresholds = compute_thresholds(
            insample,
            config.sentiment.p_neg,
            config.sentiment.p_pos,
            config.sentiment.p_high,
        )?;
        // in-sample headlines: stamped inside the first n_in return windows
        let cutoff = sector.label_bars.timestamps[n_in];
        let insample_heads: Vec<Headline> = heads
            .iter()
            .filter(|h| h.timestamp <= cutoff)
            .cloned()
            .collect();
        let (labeled, unmatched) =
            label_headlines(&insample_heads, &sector.label_bars, &thresholds)?;
        if unmatched > 0 {
            manifest.warn(format!(
                "sector {}: {unmatched} in-sample headlines outside the labelling grid",
                sector.name
            ));
        }
        pooled.extend(labeled);
    }
    if pooled.is_empty() {
        return Err(Error::InvalidInput(
            "no labelled headlines: empty or unmatched headline file".into(),
        ));
    }
    let dictionary = build_dictionary(&pooled, config.sentiment.f_threshold)?;
    outputs::write_file(
        manifest,
        &config.out_dir,
        "dictionary.json",
        &dictionary.to_json()?,
    )?;
    manifest.end_stage();
    Ok(dictionary)
}

/// Regressor stage: apply the dictionary to the full headline span of every
/// sector on the modelling grid.
pub fn run_regressors(
    config: &ExperimentConfig,
    sectors: &[SectorData],
    dictionary: &SentimentDictionary,
    manifest: &mut RunManifest,
) -> Result<BTreeMap<String, RegressorSeries>> {
    manifest.begin_stage("regressors");
    let grouped = sector_headlines(config, sectors, manifest)?;
    let mut out = BTreeMap::new();
    for sector in sectors {
        let empty = Vec::new();
        let heads = grouped.get(&sector.name).unwrap_or(&empty);
        let series = build_regressors(heads, dictionary, &sector.model_bars)?;
        if series.n_after_grid > 0 {
            manifest.warn(format!(
                "sector {}: {} headlines after the last bar not counted",
                sector.name, series.n_after_grid
            ));
        }
        outputs::write_file(
            manifest,
            &config.out_dir,
            format!("regressors/{}.csv", sector.name),
            &outputs::regressors_csv(&series),
        )?;
        out.insert(sector.name.clone(), series);
    }
    manifest.end_stage();
    Ok(out)
}

fn regressor_set_for(
    spec: ModelSpec,
    regressors: Option<&RegressorSeries>,
    n_returns: usize,
) -> Result<RegressorSet> {
    match spec.regressors {
        RegressorKind::None => Ok(RegressorSet::none()),
        kind => {
            let series = regressors.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "model {} needs news regressors but none are available",
                    spec.id()
                ))
            })?;
            let set = series.regressor_set(kind)?;
            set.check_alignment(n_returns)?;
            Ok(set)
        }
    }
}

/// In-sample fit stage: fit the whole grid per sector on the in-sample half
/// and write the coefficient/criterion table.
pub fn run_fit(
    config: &ExperimentConfig,
    sectors: &[SectorData],
    regressors: &BTreeMap<String, RegressorSeries>,
    manifest: &mut RunManifest,
) -> Result<BTreeMap<String, Vec<FittedModel>>> {
    manifest.begin_stage("fit");
    let grid = config.model_grid()?;
    let mut all = BTreeMap::new();
    for sector in sectors {
        let returns = &sector.model_bars.log_returns;
        let n_in = insample_len(returns.len(), config.rolling.insample_fraction);
        let insample = &returns[..n_in];
        let mut fits = Vec::new();
        for spec in &grid {
            let full_set =
                regressor_set_for(*spec, regressors.get(&sector.name), returns.len())?;
            let insample_set = RegressorSet {
                kind: full_set.kind,
                columns: full_set.columns.iter().map(|c| c[..n_in].to_vec()).collect(),
            };
            let fit_config = FitConfig {
                seed: stage_seed(config.seed, &format!("fit:{}:{}", sector.name, spec.id())),
                ..config.fit.clone()
            };
            match fit(*spec, &insample_set, insample, &fit_config) {
                Ok(f) => fits.push(f),
                Err(e) => manifest.warn(format!(
                    "sector {}: fit of {} failed: {e}",
                    sector.name,
                    spec.id()
                )),
            }
        }
        outputs::write_file(
            manifest,
            &config.out_dir,
            format!("fit/{}.csv", sector.name),
            &outputs::fits_csv(&fits),
        )?;
        all.insert(sector.name.clone(), fits);
    }
    manifest.end_stage();
    Ok(all)
}

/// Everything the full run produces for one sector and one quantile level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelMeta {
    pub sector: String,
    pub tau: f64,
    pub model_ids: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombineMeta {
    pub sector: String,
    pub tau: f64,
    pub ssm_members: Vec<String>,
    pub kappa: Vec<f64>,
    pub kernel_sign: f64,
}

/// Analysis artifacts derived from one panel (backtests, MCS, combination).
pub fn analyze_panel(
    config: &ExperimentConfig,
    sector_name: &str,
    panel: &VaRPanel,
    manifest: &mut RunManifest,
) -> Result<()> {
    let tau_label = outputs::tau_label(panel.tau);

    // backtest battery per model column
    let mut reports = Vec::new();
    for (j, id) in panel.model_ids.iter().enumerate() {
        match backtest::backtest_report(
            &panel.realized_returns,
            &panel.var[j],
            panel.tau,
            config.dq_lags,
        ) {
            Ok(r) => reports.push((id.clone(), r)),
            Err(e) => manifest.warn(format!(
                "sector {sector_name} tau {tau_label}: backtest of {id} failed: {e}"
            )),
        }
    }
    outputs::write_file(
        manifest,
        &config.out_dir,
        format!("backtest/{sector_name}_tau{tau_label}.csv"),
        &outputs::backtests_csv(&reports),
    )?;
    let report_map: BTreeMap<&str, &varcast_core::backtest::BacktestReport> =
        reports.iter().map(|(id, r)| (id.as_str(), r)).collect();
    outputs::write_file(
        manifest,
        &config.out_dir,
        format!("backtest/{sector_name}_tau{tau_label}.json"),
        &outputs::json_pretty(&report_map)?,
    )?;

    // model confidence set
    let losses = loss_matrix(panel);
    let ssm_ids: Vec<String>;
    if panel.n_models() >= 2 {
        let mcs_config = varcast_core::mcs::McsConfig {
            seed: stage_seed(config.seed, &format!("mcs:{sector_name}:{tau_label}")),
            ..config.mcs.clone()
        };
        let result: McsResult = mcs_run(&losses, &mcs_config)?;
        outputs::write_file(
            manifest,
            &config.out_dir,
            format!("mcs/{sector_name}_tau{tau_label}.json"),
            &outputs::json_pretty(&result)?,
        )?;
        outputs::write_file(
            manifest,
            &config.out_dir,
            format!("mcs/{sector_name}_tau{tau_label}.csv"),
            &outputs::mcs_csv(&result, &panel.model_ids),
        )?;
        outputs::write_file(
            manifest,
            &config.out_dir,
            format!("mcs/{sector_name}_tau{tau_label}_composition.csv"),
            &outputs::mcs_composition_csv(&result.surviving_ids),
        )?;
        ssm_ids = result.surviving_ids;
    } else {
        manifest.warn(format!(
            "sector {sector_name} tau {tau_label}: fewer than 2 models; MCS skipped"
        ));
        ssm_ids = panel.model_ids.clone();
    }

    // combination restricted to the surviving set
    let positions: Vec<usize> = panel
        .model_ids
        .iter()
        .enumerate()
        .filter(|(_, id)| ssm_ids.contains(id))
        .map(|(j, _)| j)
        .collect();
    let ssm_panel = panel.select(&positions)?;
    let combined = combine::combined_var(&ssm_panel, config.kernel_sign())?;
    outputs::write_file(
        manifest,
        &config.out_dir,
        format!("combined/{sector_name}_tau{tau_label}.csv"),
        &outputs::combined_csv(
            &ssm_panel.timestamps,
            &ssm_panel.realized_returns,
            &combined.var_avg,
            &combined.var_dyn,
        ),
    )?;
    let mut ad_rows = Vec::new();
    for (method, var) in [("avg", &combined.var_avg), ("dyn", &combined.var_dyn)] {
        let h = backtest::hits(&ssm_panel.realized_returns, var, panel.tau)?;
        let (ad_mean, ad_max) = backtest::ad_stats(&ssm_panel.realized_returns, var, &h);
        ad_rows.push((method.to_string(), backtest::ae_ratio(&h), ad_mean, ad_max));
    }
    outputs::write_file(
        manifest,
        &config.out_dir,
        format!("combined/{sector_name}_tau{tau_label}_ad.csv"),
        &outputs::combined_ad_csv(&ad_rows),
    )?;
    outputs::write_file(
        manifest,
        &config.out_dir,
        format!("combined/{sector_name}_tau{tau_label}.json"),
        &outputs::json_pretty(&CombineMeta {
            sector: sector_name.to_string(),
            tau: panel.tau,
            ssm_members: ssm_ids,
            kappa: combined.kappa,
            kernel_sign: config.combine.kernel_sign,
        })?,
    )?;
    Ok(())
}

/// The full experiment: rolling forecasts per sector, then the analysis
/// battery per panel.
pub fn run_full(config: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    let ingest = run_ingest(config, manifest)?;
    let grid = config.model_grid()?;
    let needs_news = grid
        .iter()
        .any(|s| s.regressors != RegressorKind::None);
    let regressors = if needs_news {
        let dictionary = run_build_dict(config, &ingest.sectors, manifest)?;
        run_regressors(config, &ingest.sectors, &dictionary, manifest)?
    } else {
        BTreeMap::new()
    };

    manifest.begin_stage("rolling");
    // the rolling runs are pure and independent across sectors; fan out and
    // join in sector order so outputs stay deterministic
    let mut jobs: Vec<(usize, &SectorData, Vec<(ModelSpec, RegressorSet)>)> = Vec::new();
    for (i, sector) in ingest.sectors.iter().enumerate() {
        let n_returns = sector.model_bars.log_returns.len();
        let mut specs = Vec::with_capacity(grid.len());
        for spec in &grid {
            specs.push((
                *spec,
                regressor_set_for(*spec, regressors.get(&sector.name), n_returns)?,
            ));
        }
        jobs.push((i, sector, specs));
    }
    let fit_seed = |sector: &str| stage_seed(config.seed, &format!("roll:{sector}"));
    let mut outputs_by_sector: Vec<Option<RollingOutput>> = Vec::new();
    outputs_by_sector.resize_with(jobs.len(), || None);
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for (i, sector, specs) in &jobs {
            let fit_config = FitConfig {
                seed: fit_seed(&sector.name),
                ..config.fit.clone()
            };
            let rolling = config.rolling.clone();
            handles.push((
                *i,
                scope.spawn(move || rolling_run(specs, &sector.model_bars, &rolling, &fit_config)),
            ));
        }
        for (i, handle) in handles {
            let result = handle
                .join()
                .map_err(|_| Error::InvalidInput("rolling worker panicked".into()))??;
            outputs_by_sector[i] = Some(result);
        }
        Ok(())
    })?;
    manifest.end_stage();

    manifest.begin_stage("analysis");
    for ((_, sector, _), rolled) in jobs.iter().zip(outputs_by_sector.into_iter()) {
        let rolled = rolled.expect("joined");
        for ex in &rolled.excluded {
            manifest.warn(format!(
                "sector {}: model {} excluded at bar {}: {}",
                sector.name, ex.model_id, ex.at_bar, ex.reason
            ));
        }
        for panel in &rolled.panels {
            let tau_label = outputs::tau_label(panel.tau);
            if panel.n_models() == 0 {
                manifest.warn(format!(
                    "sector {} tau {}: every model failed; panel skipped",
                    sector.name, tau_label
                ));
                continue;
            }
            outputs::write_file(
                manifest,
                &config.out_dir,
                format!("panels/{}_tau{}.csv", sector.name, tau_label),
                &outputs::panel_csv(panel),
            )?;
            outputs::write_file(
                manifest,
                &config.out_dir,
                format!("panels/{}_tau{}_sigma2.csv", sector.name, tau_label),
                &outputs::panel_sigma2_csv(panel),
            )?;
            outputs::write_file(
                manifest,
                &config.out_dir,
                format!("panels/{}_tau{}_meta.json", sector.name, tau_label),
                &outputs::json_pretty(&PanelMeta {
                    sector: sector.name.clone(),
                    tau: panel.tau,
                    model_ids: panel.model_ids.clone(),
                    config_hash: config.config_hash(),
                    seed: config.seed,
                    excluded: rolled.excluded.iter().map(|e| e.model_id.clone()).collect(),
                })?,
            )?;
            analyze_panel(config, &sector.name, panel, manifest)?;
        }
    }
    manifest.end_stage();
    Ok(())
}

/// Rebuild the analysis artifacts from panel files already on disk.
pub fn run_report(config: &ExperimentConfig, manifest: &mut RunManifest) -> Result<()> {
    manifest.begin_stage("report");
    let panel_dir = config.out_dir.join("panels");
    if !panel_dir.is_dir() {
        return Err(Error::InvalidInput(format!(
            "no panels directory under {}; run `run` first",
            config.out_dir.display()
        )));
    }
    let mut metas: Vec<std::path::PathBuf> = std::fs::read_dir(&panel_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with("_meta.json")))
        .collect();
    metas.sort();
    if metas.is_empty() {
        return Err(Error::InvalidInput("no panel metadata found".into()));
    }
    for meta_path in metas {
        let meta: PanelMeta = serde_json::from_str(&std::fs::read_to_string(&meta_path)?)
            .map_err(|e| Error::InvalidInput(format!("panel meta parse: {e}")))?;
        let stem = meta_path
            .file_name()
            .expect("file")
            .to_string_lossy()
            .trim_end_matches("_meta.json")
            .to_string();
        let panel = read_panel(
            &panel_dir.join(format!("{stem}.csv")),
            &panel_dir.join(format!("{stem}_sigma2.csv")),
            meta.tau,
        )?;
        analyze_panel(config, &meta.sector, &panel, manifest)?;
    }
    manifest.end_stage();
    Ok(())
}

fn read_panel(var_path: &Path, sigma2_path: &Path, tau: f64) -> Result<VaRPanel> {
    let parse = |path: &Path, expect_realized: bool| -> Result<(Vec<String>, Vec<i64>, Vec<f64>, Vec<Vec<f64>>)> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        let skip = if expect_realized { 2 } else { 1 };
        let ids: Vec<String> = cols[skip..].iter().map(|s| s.to_string()).collect();
        let mut timestamps = Vec::new();
        let mut realized = Vec::new();
        let mut data: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: "ragged row".into(),
                });
            }
            timestamps.push(fields[0].parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: i + 2,
                message: "bad timestamp".into(),
            })?);
            if expect_realized {
                realized.push(fields[1].parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: "bad realized value".into(),
                })?);
            }
            for (j, f) in fields[skip..].iter().enumerate() {
                data[j].push(f.parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: "bad numeric field".into(),
                })?);
            }
        }
        Ok((ids, timestamps, realized, data))
    };
    let (ids, timestamps, realized, var) = parse(var_path, true)?;
    let (sigma_ids, _, _, sigma2_hat) = parse(sigma2_path, false)?;
    if ids != sigma_ids {
        return Err(Error::InvalidInput(
            "panel and sigma2 files disagree on model columns".into(),
        ));
    }
    Ok(VaRPanel {
        timestamps,
        realized_returns: realized,
        tau,
        model_ids: ids,
        var,
        sigma2_hat,
    })
}
