//! News regressors: threshold-label headlines by market response, classify
//! words by modal class, score with the Fisher discriminant, and emit the
//! POS/NEG/HIGH/NUMB/LAGVOL covariate series on the modelling bar grid.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{empirical_quantile, parse_timestamp, BarSeries};
use crate::model::{RegressorKind, RegressorSet};

/// Floor applied to the Fisher denominator when the within-class scatter is
/// zero but the class means differ, so perfect discriminators are retained.
const FISHER_DENOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Headline {
    pub timestamp: i64,
    /// Instrument or sector identifier.
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SClass {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QClass {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Thresholds {
    pub r_neg: f64,
    pub r_pos: f64,
    /// Threshold on the squared return.
    pub r_high: f64,
}

#[derive(Debug, Clone)]
pub struct LabeledHeadline {
    pub headline: Headline,
    pub s_class: SClass,
    pub q_class: QClass,
    pub matched_return: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordEntry {
    pub s_class: SClass,
    pub q_class: QClass,
    pub fisher_s: f64,
    pub fisher_q: f64,
}

/// Scored word classes. Only words usable by at least one counter (a
/// Positive/Negative modal class with a passing sentiment score, or a High
/// modal class with a passing volatility score) are kept.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentimentDictionary {
    pub entries: BTreeMap<String, WordEntry>,
    pub f_threshold: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_high: usize,
}

impl SentimentDictionary {
    fn counts_as_positive(&self, entry: &WordEntry) -> bool {
        entry.s_class == SClass::Positive && entry.fisher_s >= self.f_threshold
    }

    fn counts_as_negative(&self, entry: &WordEntry) -> bool {
        entry.s_class == SClass::Negative && entry.fisher_s >= self.f_threshold
    }

    fn counts_as_high(&self, entry: &WordEntry) -> bool {
        entry.q_class == QClass::High && entry.fisher_q >= self.f_threshold
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("dictionary serialization: {e}")))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::InvalidInput(format!("dictionary deserialization: {e}")))
    }
}

/// The covariate series, aligned one-to-one with the return bars of the
/// modelling grid. Counts at row t cover headline arrivals in the interval
/// (t-1, t]; lagvol is the previous bar's volume.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorSeries {
    pub timestamps: Vec<i64>,
    pub pos: Vec<u32>,
    pub neg: Vec<u32>,
    pub high: Vec<u32>,
    pub numb: Vec<u32>,
    pub lagvol: Vec<f64>,
    /// Headlines stamped before the first bar window (folded into the first
    /// row).
    pub n_before_grid: usize,
    /// Headlines stamped after the last bar (not counted anywhere).
    pub n_after_grid: usize,
}

impl RegressorSeries {
    /// The information-volume covariate columns (NUMB, LAGVOL).
    pub fn info_volume_set(&self) -> Result<RegressorSet> {
        RegressorSet::new(
            RegressorKind::InfoVolume,
            vec![
                self.numb.iter().map(|&v| f64::from(v)).collect(),
                self.lagvol.clone(),
            ],
        )
    }

    /// The sentiment covariate columns (POS, NEG, HIGH).
    pub fn sentiment_set(&self) -> Result<RegressorSet> {
        RegressorSet::new(
            RegressorKind::Sentiment,
            vec![
                self.pos.iter().map(|&v| f64::from(v)).collect(),
                self.neg.iter().map(|&v| f64::from(v)).collect(),
                self.high.iter().map(|&v| f64::from(v)).collect(),
            ],
        )
    }

    pub fn regressor_set(&self, kind: RegressorKind) -> Result<RegressorSet> {
        match kind {
            RegressorKind::None => Ok(RegressorSet::none()),
            RegressorKind::InfoVolume => self.info_volume_set(),
            RegressorKind::Sentiment => self.sentiment_set(),
        }
    }
}

/// Load headlines from a CSV with header `timestamp,id,text`.
pub fn load_headlines(path: impl AsRef<Path>) -> Result<Vec<Headline>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    load_headlines_from(file, &path.display().to_string())
}

pub fn load_headlines_from<R: Read>(reader: R, source_name: &str) -> Result<Vec<Headline>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse {
        path: source_name.into(),
        line: 1,
        message: e.to_string(),
    })?;
    let got: Vec<&str> = headers.iter().collect();
    if got != ["timestamp", "id", "text"] {
        return Err(Error::Parse {
            path: source_name.into(),
            line: 1,
            message: format!("expected header `timestamp,id,text`, got `{}`", got.join(",")),
        });
    }
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::Parse {
            path: source_name.into(),
            line,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(Error::Parse {
                path: source_name.into(),
                line,
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let timestamp = parse_timestamp(&record[0]).ok_or_else(|| Error::Parse {
            path: source_name.into(),
            line,
            message: format!("bad timestamp `{}`", &record[0]),
        })?;
        out.push(Headline {
            timestamp,
            id: record[1].to_string(),
            text: record[2].to_string(),
        });
    }
    Ok(out)
}

/// Drop headlines with a duplicate (timestamp, text) pair, keeping the first.
pub fn deduplicate(headlines: Vec<Headline>) -> Vec<Headline> {
    let mut seen: HashSet<(i64, String)> = HashSet::new();
    headlines
        .into_iter()
        .filter(|h| seen.insert((h.timestamp, h.text.clone())))
        .collect()
}

/// Empirical labelling thresholds from the unconditional return distribution:
/// P(r < r_neg) = p_neg, P(r > r_pos) = p_pos, P(r^2 < r_high) = p_high.
pub fn compute_thresholds(
    returns: &[f64],
    p_neg: f64,
    p_pos: f64,
    p_high: f64,
) -> Result<Thresholds> {
    if returns.len() < 200 {
        return Err(Error::InvalidInput(format!(
            "threshold estimation needs at least 200 returns (got {})",
            returns.len()
        )));
    }
    let r_neg = empirical_quantile(returns, p_neg)?;
    let r_pos = empirical_quantile(returns, 1.0 - p_pos)?;
    if !(r_neg < r_pos) {
        return Err(Error::Degenerate(
            "return distribution too concentrated to separate thresholds".into(),
        ));
    }
    let squared: Vec<f64> = returns.iter().map(|r| r * r).collect();
    let r_high = empirical_quantile(&squared, p_high)?;
    Ok(Thresholds {
        r_neg,
        r_pos,
        r_high,
    })
}

/// Default threshold probabilities.
pub fn default_thresholds(returns: &[f64]) -> Result<Thresholds> {
    compute_thresholds(returns, 0.025, 0.025, 0.025)
}

fn classify(r: f64, thresholds: &Thresholds) -> (SClass, QClass) {
    let s = if r <= thresholds.r_neg {
        SClass::Negative
    } else if r >= thresholds.r_pos {
        SClass::Positive
    } else {
        SClass::Neutral
    };
    let q = if r * r >= thresholds.r_high {
        QClass::High
    } else {
        QClass::Low
    };
    (s, q)
}

/// Position of the return bar whose window (timestamps\[i\], timestamps\[i+1\]]
/// contains `ts`; None outside the grid.
fn match_bar(bars: &BarSeries, ts: i64) -> Option<usize> {
    let t = &bars.timestamps;
    if ts <= t[0] || ts > *t.last().expect("bars non-empty") {
        return None;
    }
    // first index with t[idx] >= ts; the window ending there contains ts
    let idx = t.partition_point(|&b| b < ts);
    Some(idx - 1) // return index: bar idx closes window (t[idx-1], t[idx]]
}

/// Label headlines by the return of the bar whose window contains their
/// stamp. Returns the labelled set and the number of unmatchable headlines.
pub fn label_headlines(
    headlines: &[Headline],
    bars: &BarSeries,
    thresholds: &Thresholds,
) -> Result<(Vec<LabeledHeadline>, usize)> {
    if bars.n_returns() == 0 {
        return Err(Error::InvalidInput("empty bar series".into()));
    }
    let mut labeled = Vec::new();
    let mut unmatched = 0usize;
    for h in headlines {
        match match_bar(bars, h.timestamp) {
            Some(ret_idx) => {
                let r = bars.log_returns[ret_idx];
                let (s_class, q_class) = classify(r, thresholds);
                labeled.push(LabeledHeadline {
                    headline: h.clone(),
                    s_class,
                    q_class,
                    matched_return: r,
                });
            }
            None => unmatched += 1,
        }
    }
    Ok((labeled, unmatched))
}

/// Lowercase, split on non-alphanumeric characters, drop tokens shorter than
/// two characters and pure numbers.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| tok.chars().count() >= 2)
        .filter(|tok| !tok.chars().all(|c| c.is_numeric()))
        .map(str::to_string)
        .collect()
}

/// Per-class occurrence statistics of one word across the labelled corpus.
#[derive(Debug, Clone, Default)]
pub struct WordStats {
    /// Headlines (by class) containing the word at least once.
    pub s_headlines: [usize; 3],
    pub q_headlines: [usize; 2],
    /// Total and squared occurrence counts per class.
    pub s_sum: [f64; 3],
    pub s_sum_sq: [f64; 3],
    pub q_sum: [f64; 2],
    pub q_sum_sq: [f64; 2],
}

fn s_index(c: SClass) -> usize {
    match c {
        SClass::Positive => 0,
        SClass::Negative => 1,
        SClass::Neutral => 2,
    }
}

fn q_index(c: QClass) -> usize {
    match c {
        QClass::High => 0,
        QClass::Low => 1,
    }
}

/// Modal classes of a word: the class of headlines in which it appears most
/// frequently. Ties resolve to Neutral / Low (the word is not retained).
pub fn modal_class(stats: &WordStats) -> (SClass, QClass) {
    let s = {
        let c = &stats.s_headlines;
        let max = *c.iter().max().expect("non-empty");
        let winners: Vec<usize> = (0..3).filter(|&i| c[i] == max).collect();
        if winners.len() > 1 {
            SClass::Neutral
        } else {
            [SClass::Positive, SClass::Negative, SClass::Neutral][winners[0]]
        }
    };
    let q = {
        let c = &stats.q_headlines;
        if c[0] > c[1] {
            QClass::High
        } else {
            QClass::Low
        }
    };
    (s, q)
}

/// Fisher discriminant score for one category partition.
///
/// `sums[i]`, `sum_sqs[i]` hold the total and squared-total occurrence counts
/// of the word in class i; `n[i]` the number of headlines of class i. The
/// numerator averages the squared mean differences over the ordered class
/// pairs (factor 1/3 for the three-class category, 1 for the two-class one);
/// the denominator is the within-class scatter over the total headline count.
pub fn fisher_score(sums: &[f64], sum_sqs: &[f64], n: &[usize]) -> f64 {
    let c = n.len();
    debug_assert!(c >= 2);
    let total_headlines: usize = n.iter().sum();
    if total_headlines == 0 {
        return 0.0;
    }
    let means: Vec<f64> = (0..c)
        .map(|i| if n[i] > 0 { sums[i] / n[i] as f64 } else { 0.0 })
        .collect();
    let mut numerator = 0.0;
    for i in 0..c {
        for k in 0..c {
            if i != k {
                let d = means[i] - means[k];
                numerator += d * d;
            }
        }
    }
    numerator /= c as f64;
    if numerator == 0.0 {
        return 0.0;
    }
    // sum_j (m_ij - mu_i)^2 over all headlines of class i, including those
    // without the word: sum m^2 - n mu^2
    let mut scatter = 0.0;
    for i in 0..c {
        scatter += sum_sqs[i] - n[i] as f64 * means[i] * means[i];
    }
    let denominator = (scatter / total_headlines as f64).max(FISHER_DENOM_EPS);
    numerator / denominator
}

/// Number of headlines per S class and per Q class.
fn class_counts(labeled: &[LabeledHeadline]) -> ([usize; 3], [usize; 2]) {
    let mut ns = [0usize; 3];
    let mut nq = [0usize; 2];
    for l in labeled {
        ns[s_index(l.s_class)] += 1;
        nq[q_index(l.q_class)] += 1;
    }
    (ns, nq)
}

/// Accumulate word statistics over the labelled corpus.
pub fn word_statistics(labeled: &[LabeledHeadline]) -> BTreeMap<String, WordStats> {
    let mut stats: BTreeMap<String, WordStats> = BTreeMap::new();
    for l in labeled {
        let mut counts: HashMap<String, f64> = HashMap::new();
        for tok in tokenize(&l.headline.text) {
            *counts.entry(tok).or_insert(0.0) += 1.0;
        }
        let si = s_index(l.s_class);
        let qi = q_index(l.q_class);
        for (word, m) in counts {
            let e = stats.entry(word).or_default();
            e.s_headlines[si] += 1;
            e.q_headlines[qi] += 1;
            e.s_sum[si] += m;
            e.s_sum_sq[si] += m * m;
            e.q_sum[qi] += m;
            e.q_sum_sq[qi] += m * m;
        }
    }
    stats
}

/// Build the dictionary from a labelled corpus. With `f_threshold = None` the
/// threshold defaults to the 75th percentile of the pooled nonzero Fisher
/// scores.
pub fn build_dictionary(
    labeled: &[LabeledHeadline],
    f_threshold: Option<f64>,
) -> Result<SentimentDictionary> {
    if labeled.is_empty() {
        return Err(Error::InvalidInput("empty labelled corpus".into()));
    }
    let (ns, nq) = class_counts(labeled);
    let stats = word_statistics(labeled);

    let mut scored: Vec<(String, SClass, QClass, f64, f64)> = Vec::with_capacity(stats.len());
    for (word, st) in &stats {
        let (s_class, q_class) = modal_class(st);
        let fisher_s = fisher_score(&st.s_sum, &st.s_sum_sq, &ns);
        let fisher_q = fisher_score(&st.q_sum, &st.q_sum_sq, &nq);
        scored.push((word.clone(), s_class, q_class, fisher_s, fisher_q));
    }

    let threshold = match f_threshold {
        Some(t) => {
            if t < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "fisher threshold must be non-negative (got {t})"
                )));
            }
            t
        }
        None => {
            let nonzero: Vec<f64> = scored
                .iter()
                .flat_map(|(_, _, _, fs, fq)| [*fs, *fq])
                .filter(|&f| f > 0.0)
                .collect();
            if nonzero.is_empty() {
                0.0
            } else {
                empirical_quantile(&nonzero, 0.75)?
            }
        }
    };

    let mut entries = BTreeMap::new();
    let mut n_positive = 0;
    let mut n_negative = 0;
    let mut n_high = 0;
    for (word, s_class, q_class, fisher_s, fisher_q) in scored {
        let sentiment_usable =
            matches!(s_class, SClass::Positive | SClass::Negative) && fisher_s >= threshold;
        let volatility_usable = q_class == QClass::High && fisher_q >= threshold;
        if !(sentiment_usable || volatility_usable) {
            continue;
        }
        if sentiment_usable {
            match s_class {
                SClass::Positive => n_positive += 1,
                SClass::Negative => n_negative += 1,
                SClass::Neutral => {}
            }
        }
        if volatility_usable {
            n_high += 1;
        }
        entries.insert(
            word,
            WordEntry {
                s_class,
                q_class,
                fisher_s,
                fisher_q,
            },
        );
    }
    Ok(SentimentDictionary {
        entries,
        f_threshold: threshold,
        n_positive,
        n_negative,
        n_high,
    })
}

/// Tally the covariate series on the modelling bar grid. Headlines stamped
/// before the first bar window fold into the first row; headlines after the
/// last bar are only counted. NUMB counts every token, categorized or not.
pub fn build_regressors(
    headlines: &[Headline],
    dictionary: &SentimentDictionary,
    bars: &BarSeries,
) -> Result<RegressorSeries> {
    let n = bars.n_returns();
    if n == 0 {
        return Err(Error::InvalidInput("empty bar series".into()));
    }
    let mut pos = vec![0u32; n];
    let mut neg = vec![0u32; n];
    let mut high = vec![0u32; n];
    let mut numb = vec![0u32; n];
    let mut n_before_grid = 0usize;
    let mut n_after_grid = 0usize;

    for h in headlines {
        let row = match match_bar(bars, h.timestamp) {
            Some(idx) => idx,
            None => {
                if h.timestamp <= bars.timestamps[0] {
                    n_before_grid += 1;
                    0
                } else {
                    n_after_grid += 1;
                    continue;
                }
            }
        };
        for tok in tokenize(&h.text) {
            numb[row] += 1;
            if let Some(entry) = dictionary.entries.get(&tok) {
                if dictionary.counts_as_positive(entry) {
                    pos[row] += 1;
                }
                if dictionary.counts_as_negative(entry) {
                    neg[row] += 1;
                }
                if dictionary.counts_as_high(entry) {
                    high[row] += 1;
                }
            }
        }
    }

    Ok(RegressorSeries {
        timestamps: bars.return_timestamps().to_vec(),
        pos,
        neg,
        high,
        numb,
        lagvol: bars.lagged_volumes().to_vec(),
        n_before_grid,
        n_after_grid,
    })
}
