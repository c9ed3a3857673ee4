//! Multi-oracle comparison runs and their on-disk reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::attack::inject_attack;
use super::config::{Config, ConfigWarning};
use super::replay::{evaluate_security, replay, ReplayOutput, SecurityCheck};
use super::sampling::poisson_sample;
use super::{save_feed, HarnessError, OracleKind, PriceSeries, Result};
use crate::costmodel::CostSummary;
use crate::metrics::{self, AlignedFeeds, Delays, MetricsRow, SubScores};
use crate::slotcodec::SlotWord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub points: usize,
    /// Points fed to the oracles after sampling.
    pub replayed_points: usize,
    pub selection_ratio: f64,
    pub first_timestamp: Option<i64>,
    pub last_timestamp: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub oracle: OracleKind,
    pub window: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twap_window_seconds: Option<i64>,
    pub emitted: usize,
    /// Absent when the oracle never overlapped the reference.
    pub metrics: Option<MetricsRow>,
    pub update_cost: CostSummary,
    pub query_cost: CostSummary,
    /// Final persisted words, hex encoded.
    pub state: Vec<SlotWord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub security: Option<SecurityCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: Config,
    pub seed: u64,
    pub input: InputSummary,
    pub warnings: Vec<ConfigWarning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manipulated: Option<Vec<usize>>,
    pub oracles: Vec<OracleReport>,
}

/// Everything a comparison run produced.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub report: Report,
    pub reference: PriceSeries,
    pub outputs: Vec<ReplayOutput>,
}

struct FeedStats {
    row: MetricsRow,
    tweedie: [f64; 3],
    delays: Option<Delays>,
    gas: f64,
}

fn feed_stats(reference: &PriceSeries, out: &ReplayOutput, config: &Config) -> Result<Option<FeedStats>> {
    let gas = out.gas()?;
    let aligned = match AlignedFeeds::align(reference, &out.feed, config.grid_step) {
        Ok(a) => a,
        Err(metrics::MetricsError::EmptyOverlap) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let reg = metrics::regression_metrics(&aligned);
    let tweedie = metrics::tweedie_triple(&aligned)?;
    let step = config.grid_step as usize;
    let delays = metrics::delays(&aligned, config.delay_window as usize / step, config.delay_cap as usize / step)
        .ok()
        .map(|d| Delays {
            window: d.window * config.grid_step as f64,
            all: d.all * config.grid_step as f64,
        });
    Ok(Some(FeedStats {
        row: MetricsRow {
            feed: out.kind.name().to_string(),
            mae: reg.mae,
            mse: reg.mse,
            medae: reg.medae,
            max_err: reg.max_err,
            tdp: tweedie[1],
            tdg: tweedie[2],
            mape: reg.mape,
            stationary_score: None,
            delay_window: delays.map(|d| d.window),
            delay_all: delays.map(|d| d.all),
            delay_score: None,
            gas,
            gas_score: None,
            overall: None,
        },
        tweedie,
        delays,
        gas,
    }))
}

fn score(stats: &mut FeedStats, baseline: &FeedStats, config: &Config) {
    let row = &mut stats.row;
    row.stationary_score = Some(metrics::stationary_score(stats.tweedie, baseline.tweedie));
    row.delay_score = match (stats.delays, baseline.delays) {
        (Some(x), Some(b)) => metrics::delay_score(x, b).ok(),
        _ => None,
    };
    row.gas_score = metrics::gas_score(stats.gas, baseline.gas).ok();
    if let (Some(st), Some(de), Some(ga)) = (row.stationary_score, row.delay_score, row.gas_score) {
        let sub = SubScores {
            stationary: st,
            delay: de,
            gas: ga,
        };
        row.overall = Some(metrics::resistance_efficiency(sub, &config.weights));
    }
}

/// Samples and optionally attacks the reference feed, replays every
/// configured oracle and scores each against the reference and the
/// baseline oracle.
pub fn compare(reference: &PriceSeries, config: &Config) -> Result<Comparison> {
    if reference.is_empty() {
        return Err(HarnessError::EmptyFeed);
    }
    let warnings = config.validate()?;
    let observed = match config.sampling_rate {
        Some(rate) => poisson_sample(reference, rate, config.seed)?,
        None => reference.clone(),
    };
    let attack = match config.attack_spec()? {
        Some(spec) => Some(inject_attack(&observed, &spec, config.seed)?),
        None => None,
    };
    let fed = attack.as_ref().map_or(&observed, |a| &a.series);
    let opts = config.replay_options();

    let mut outputs = Vec::new();
    let mut stats = Vec::new();
    let mut security = Vec::new();
    for &kind in &config.oracles {
        let out = replay(fed, kind, &opts)?;
        let check = match (&attack, config.epsilon) {
            (Some(_), Some(eps)) => {
                let clean = replay(&observed, kind, &opts)?;
                Some(evaluate_security(&clean.feed, &out.feed, eps)?)
            }
            _ => None,
        };
        stats.push(feed_stats(reference, &out, config)?);
        security.push(check);
        outputs.push(out);
    }

    let baseline = match config.oracles.iter().position(|&k| k == config.baseline) {
        Some(i) => stats[i].as_ref().map(|s| (s.tweedie, s.delays, s.gas)),
        None => feed_stats(reference, &replay(fed, config.baseline, &opts)?, config)?
            .map(|s| (s.tweedie, s.delays, s.gas)),
    };
    if let Some((tweedie, delays, gas)) = baseline {
        let base = FeedStats {
            row: MetricsRow {
                feed: String::new(),
                mae: 0.0,
                mse: 0.0,
                medae: 0.0,
                max_err: 0.0,
                tdp: 0.0,
                tdg: 0.0,
                mape: 0.0,
                stationary_score: None,
                delay_window: None,
                delay_all: None,
                delay_score: None,
                gas: 0.0,
                gas_score: None,
                overall: None,
            },
            tweedie,
            delays,
            gas,
        };
        for s in stats.iter_mut().flatten() {
            score(s, &base, config);
        }
    }

    let oracles = outputs
        .iter()
        .zip(stats)
        .zip(security)
        .map(|((out, st), sec)| {
            Ok(OracleReport {
                oracle: out.kind,
                window: out.window,
                twap_window_seconds: out.twap_window_seconds,
                emitted: out.feed.len(),
                metrics: st.map(|s| s.row),
                update_cost: out.update_cost()?,
                query_cost: out.query_cost()?,
                state: out.state.clone(),
                security: sec,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = Report {
        config: config.clone(),
        seed: config.seed,
        input: InputSummary {
            points: reference.len(),
            replayed_points: observed.len(),
            selection_ratio: observed.len() as f64 / reference.len() as f64,
            first_timestamp: reference.first().map(|p| p.t),
            last_timestamp: reference.last().map(|p| p.t),
        },
        warnings,
        manipulated: attack.map(|a| a.manipulated),
        oracles,
    };
    Ok(Comparison {
        report,
        reference: reference.clone(),
        outputs,
    })
}

/// Writes `report.json`, one `<oracle>.csv` per output feed and, when
/// enabled, `comparison.svg`. Returns the written paths.
pub fn emit_report(dir: &Path, run: &Comparison) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();

    let json_path = dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&run.report)
        .map_err(|e| HarnessError::io(&json_path, e))?;
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| HarnessError::io(&json_path, e))?;
    written.push(json_path);

    for out in &run.outputs {
        let path = dir.join(format!("{}.csv", out.kind.name()));
        save_feed(&out.feed, &path)?;
        written.push(path);
    }

    if run.report.config.plot {
        let path = dir.join("comparison.svg");
        let feeds: Vec<(&str, &PriceSeries)> = std::iter::once(("reference", &run.reference))
            .chain(run.outputs.iter().map(|o| (o.kind.name(), &o.feed)))
            .collect();
        std::fs::write(&path, render_svg(&feeds)).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

const PALETTE: [&str; 6] = ["#444444", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
const MAX_PLOT_POINTS: usize = 2000;

/// Static line chart of several feeds on shared axes.
pub fn render_svg(feeds: &[(&str, &PriceSeries)]) -> String {
    let (w, h, margin) = (960.0, 480.0, 50.0);
    let all = feeds.iter().flat_map(|(_, s)| s.points());
    let (mut t0, mut t1, mut lo, mut hi) = (i64::MAX, i64::MIN, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        t0 = t0.min(p.t);
        t1 = t1.max(p.t);
        let v = p.price.to_f64();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if t0 > t1 {
        svg.push_str("</svg>\n");
        return svg;
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let span = (t1 - t0).max(1) as f64;
    let x = |t: i64| margin + (t - t0) as f64 / span * (w - 2.0 * margin);
    let y = |v: f64| h - margin - (v - lo) / (hi - lo) * (h - 2.0 * margin);
    let _ = writeln!(
        svg,
        r##"<g stroke="#999" stroke-width="1"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}"/></g>"##,
        m = margin,
        b = h - margin,
        r = w - margin
    );
    let _ = writeln!(
        svg,
        r#"<g font-family="sans-serif" font-size="11"><text x="4" y="{:.1}">{hi:.4}</text><text x="4" y="{:.1}">{lo:.4}</text></g>"#,
        margin + 4.0,
        h - margin
    );
    for (i, (name, series)) in feeds.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stride = series.len().div_ceil(MAX_PLOT_POINTS).max(1);
        let mut pts = String::new();
        for p in series.points().iter().step_by(stride) {
            let _ = write!(pts, "{:.1},{:.1} ", x(p.t), y(p.price.to_f64()));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" fill="{color}">{name}</text>"#,
            w - margin - 110.0,
            margin + 14.0 * (i as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
