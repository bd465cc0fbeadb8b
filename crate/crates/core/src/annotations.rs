//! Human review responses: quality filtering, 0–10 normalization, per-sample
//! spread, and Krippendorff's ordinal alpha.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Coherence,
    Creativity,
    Affinity,
    Recognition,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [
        Attribute::Coherence,
        Attribute::Creativity,
        Attribute::Affinity,
        Attribute::Recognition,
    ];
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "coherence" => Ok(Self::Coherence),
            "creativity" => Ok(Self::Creativity),
            "affinity" => Ok(Self::Affinity),
            "recognition" => Ok(Self::Recognition),
            other => Err(Error::invalid(format!("unknown attribute {other:?}"))),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Coherence => "coherence",
            Self::Creativity => "creativity",
            Self::Affinity => "affinity",
            Self::Recognition => "recognition",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub worker_id: String,
    pub sample_id: String,
    pub attribute: Attribute,
    /// 0-based ordinal level.
    pub raw_value: u32,
    pub level_count: u32,
    pub summary_text: Option<String>,
    pub literacy_pass: bool,
}

impl Response {
    pub fn validate(&self) -> Result<()> {
        if self.level_count < 2 {
            return Err(Error::invalid(format!(
                "level count {} is below 2",
                self.level_count
            )));
        }
        if self.raw_value >= self.level_count {
            return Err(Error::invalid(format!(
                "level {} out of range for {} levels",
                self.raw_value, self.level_count
            )));
        }
        Ok(())
    }

    pub fn normalized(&self) -> f64 {
        normalize_score(self.raw_value, self.level_count).expect("validated on construction")
    }

    fn has_summary(&self) -> bool {
        self.summary_text
            .as_deref()
            .is_some_and(|s| !s.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    responses: Vec<Response>,
    samples: BTreeSet<String>,
    pub expected_raters_per_sample: usize,
}

pub const DEFAULT_RATERS_PER_SAMPLE: usize = 3;

impl AnnotationSet {
    pub fn new(
        responses: Vec<Response>,
        samples: BTreeSet<String>,
        expected_raters_per_sample: usize,
    ) -> Result<Self> {
        for r in &responses {
            r.validate()?;
            if !samples.contains(&r.sample_id) {
                return Err(Error::invalid(format!(
                    "response for unknown sample {:?}",
                    r.sample_id
                )));
            }
        }
        Ok(Self {
            responses,
            samples,
            expected_raters_per_sample,
        })
    }

    /// Builds a set whose sample list is exactly the samples the responses mention.
    pub fn from_responses(responses: Vec<Response>) -> Result<Self> {
        let samples = responses.iter().map(|r| r.sample_id.clone()).collect();
        Self::new(responses, samples, DEFAULT_RATERS_PER_SAMPLE)
    }

    pub fn responses(&self) -> &[Response] {
        &self.responses
    }

    pub fn samples(&self) -> &BTreeSet<String> {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    /// Columns: `worker_id,sample_id,attribute,raw_value,level_count,summary,literacy_pass`.
    /// Errors cite 1-based file lines (the header is line 1).
    pub fn parse_csv(text: &str) -> Result<Self> {
        const COLUMNS: [&str; 7] = [
            "worker_id",
            "sample_id",
            "attribute",
            "raw_value",
            "level_count",
            "summary",
            "literacy_pass",
        ];
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        let position = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing column {name:?}"),
                })
        };
        let cols: Vec<usize> = COLUMNS.iter().map(|c| position(c)).collect::<Result<_>>()?;

        let mut responses = Vec::new();
        let mut seen: HashMap<(String, String, Attribute), usize> = HashMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize| record.get(cols[i]).unwrap_or("").trim();
            let parse_err = |message: String| Error::Parse { line, message };
            let attribute: Attribute = field(2)
                .parse()
                .map_err(|e: Error| parse_err(e.to_string()))?;
            let raw_value: u32 = field(3)
                .parse()
                .map_err(|_| parse_err(format!("invalid raw_value {:?}", field(3))))?;
            let level_count: u32 = field(4)
                .parse()
                .map_err(|_| parse_err(format!("invalid level_count {:?}", field(4))))?;
            let literacy_pass = match field(6).to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" | "y" => true,
                "false" | "0" | "no" | "n" | "" => false,
                other => return Err(parse_err(format!("invalid literacy_pass {other:?}"))),
            };
            let summary = record.get(cols[5]).unwrap_or("");
            let response = Response {
                worker_id: field(0).to_string(),
                sample_id: field(1).to_string(),
                attribute,
                raw_value,
                level_count,
                summary_text: (!summary.is_empty()).then(|| summary.to_string()),
                literacy_pass,
            };
            if response.worker_id.is_empty() || response.sample_id.is_empty() {
                return Err(parse_err("worker_id and sample_id are required".into()));
            }
            response.validate().map_err(|e| parse_err(e.to_string()))?;
            let key = (
                response.worker_id.clone(),
                response.sample_id.clone(),
                attribute,
            );
            if let Some(first) = seen.insert(key, line) {
                return Err(parse_err(format!(
                    "duplicate {attribute} answer by {} for {} (first at line {first})",
                    response.worker_id, response.sample_id
                )));
            }
            responses.push(response);
        }
        Self::from_responses(responses)
    }
}

/// Drops every answer of a worker on a sample when that worker failed the
/// literacy check or left no non-blank summary for the sample.
pub fn filter_responses(set: &AnnotationSet) -> AnnotationSet {
    let mut literate: HashMap<(&str, &str), bool> = HashMap::new();
    let mut summarized: HashSet<(&str, &str)> = HashSet::new();
    for r in &set.responses {
        let key = (r.worker_id.as_str(), r.sample_id.as_str());
        let entry = literate.entry(key).or_insert(true);
        *entry &= r.literacy_pass;
        if r.has_summary() {
            summarized.insert(key);
        }
    }
    let keep = |r: &Response| {
        let key = (r.worker_id.as_str(), r.sample_id.as_str());
        literate[&key] && summarized.contains(&key)
    };
    AnnotationSet {
        responses: set.responses.iter().filter(|r| keep(r)).cloned().collect(),
        samples: set.samples.clone(),
        expected_raters_per_sample: set.expected_raters_per_sample,
    }
}

/// Linear map of level `raw_value` out of `level_count` onto 0–10.
pub fn normalize_score(raw_value: u32, level_count: u32) -> Result<f64> {
    if level_count < 2 {
        return Err(Error::invalid(format!(
            "level count {level_count} is below 2"
        )));
    }
    if raw_value >= level_count {
        return Err(Error::invalid(format!(
            "level {raw_value} out of range for {level_count} levels"
        )));
    }
    Ok(raw_value as f64 / (level_count - 1) as f64 * 10.0)
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    pub raters: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSummary {
    /// Mean of per-sample means on the 0–10 scale.
    pub mean: f64,
    /// Mean of per-sample population standard deviations over samples with at
    /// least two raters; absent when no sample qualifies.
    pub mean_std: Option<f64>,
    /// Krippendorff's ordinal alpha; absent when undefined or not requested.
    pub alpha: Option<f64>,
    pub samples: usize,
    pub per_sample: Vec<SampleScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub per_attribute: BTreeMap<Attribute, AttributeSummary>,
    pub filtered_count: usize,
    pub retained_count: usize,
    pub std_convention: String,
    pub warnings: Vec<String>,
}

/// Per-attribute score means and spreads over a (filtered) set.
pub fn aggregate(set: &AnnotationSet) -> (BTreeMap<Attribute, AttributeSummary>, Vec<String>) {
    let mut grouped: BTreeMap<Attribute, BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for r in &set.responses {
        grouped
            .entry(r.attribute)
            .or_default()
            .entry(r.sample_id.as_str())
            .or_default()
            .push(r.normalized());
    }
    let mut warnings = Vec::new();
    let mut out = BTreeMap::new();
    for (attribute, samples) in grouped {
        let per_sample: Vec<SampleScore> = samples
            .iter()
            .map(|(id, scores)| SampleScore {
                sample_id: id.to_string(),
                raters: scores.len(),
                mean: scores.iter().sum::<f64>() / scores.len() as f64,
                std: population_std(scores),
            })
            .collect();
        let mean = per_sample.iter().map(|s| s.mean).sum::<f64>() / per_sample.len() as f64;
        let spread: Vec<f64> = per_sample
            .iter()
            .filter(|s| s.raters >= 2)
            .map(|s| s.std)
            .collect();
        for s in per_sample.iter().filter(|s| s.raters < 2) {
            warnings.push(format!(
                "{attribute}: sample {} has a single rater and is excluded from mean_std",
                s.sample_id
            ));
        }
        out.insert(
            attribute,
            AttributeSummary {
                mean,
                mean_std: (!spread.is_empty())
                    .then(|| spread.iter().sum::<f64>() / spread.len() as f64),
                alpha: None,
                samples: per_sample.len(),
                per_sample,
            },
        );
    }
    (out, warnings)
}

/// Krippendorff's alpha with the ordinal difference function, built from the
/// coincidence matrix over samples with at least two ratings.
///
/// Returns `Ok(None)` when fewer than two pairable values exist. When the
/// observed disagreement is zero the result is 1.
pub fn krippendorff_alpha(set: &AnnotationSet, attribute: Attribute) -> Result<Option<f64>> {
    let mut units: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    let mut levels: Option<u32> = None;
    for r in set.responses.iter().filter(|r| r.attribute == attribute) {
        match levels {
            None => levels = Some(r.level_count),
            Some(l) if l != r.level_count => {
                return Err(Error::invalid(format!(
                    "{attribute}: mixed level counts {l} and {}",
                    r.level_count
                )))
            }
            _ => {}
        }
        units
            .entry(r.sample_id.as_str())
            .or_default()
            .push(r.raw_value);
    }
    let Some(levels) = levels else {
        return Ok(None);
    };
    let values: Vec<Vec<u32>> = units.into_values().filter(|v| v.len() >= 2).collect();
    Ok(ordinal_alpha(&values, levels as usize))
}

/// Ordinal alpha for units given as lists of level indices below `levels`.
pub fn ordinal_alpha(units: &[Vec<u32>], levels: usize) -> Option<f64> {
    let mut coincidence = vec![vec![0.0f64; levels]; levels];
    for unit in units.iter().filter(|u| u.len() >= 2) {
        let weight = 1.0 / (unit.len() - 1) as f64;
        for (i, &a) in unit.iter().enumerate() {
            for (j, &b) in unit.iter().enumerate() {
                if i != j {
                    coincidence[a as usize][b as usize] += weight;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return None;
    }
    let delta = ordinal_deltas(&marginals);
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..levels {
        for k in 0..levels {
            observed += coincidence[c][k] * delta[c][k];
            expected += marginals[c] * marginals[k] * delta[c][k];
        }
    }
    if observed == 0.0 {
        return Some(1.0);
    }
    Some(1.0 - (n - 1.0) * observed / expected)
}

/// `δ²(c,k) = (Σ_{g=c..k} n_g − (n_c + n_k)/2)²`.
fn ordinal_deltas(marginals: &[f64]) -> Vec<Vec<f64>> {
    let levels = marginals.len();
    let mut delta = vec![vec![0.0; levels]; levels];
    for c in 0..levels {
        let mut between = 0.0;
        for k in c..levels {
            between += marginals[k];
            let d = between - (marginals[c] + marginals[k]) / 2.0;
            delta[c][k] = d * d;
            delta[k][c] = d * d;
        }
    }
    delta
}

/// Filters `input`, then aggregates and (optionally) computes alpha per attribute.
pub fn agreement_report(input: &AnnotationSet, with_alpha: bool) -> Result<AgreementReport> {
    let filtered = filter_responses(input);
    let (mut per_attribute, mut warnings) = aggregate(&filtered);
    if with_alpha {
        for (attribute, summary) in per_attribute.iter_mut() {
            summary.alpha = krippendorff_alpha(&filtered, *attribute)?;
            if summary.alpha.is_none() {
                warnings.push(format!(
                    "{attribute}: alpha undefined (fewer than 2 pairable values)"
                ));
            }
        }
    }
    Ok(AgreementReport {
        per_attribute,
        filtered_count: input.len() - filtered.len(),
        retained_count: filtered.len(),
        std_convention: "population".into(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resp(worker: &str, sample: &str, value: u32, levels: u32) -> Response {
        Response {
            worker_id: worker.into(),
            sample_id: sample.into(),
            attribute: Attribute::Coherence,
            raw_value: value,
            level_count: levels,
            summary_text: Some("很好".into()),
            literacy_pass: true,
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_score(0, 5).unwrap(), 0.0);
        assert_eq!(normalize_score(4, 5).unwrap(), 10.0);
        assert_eq!(normalize_score(2, 5).unwrap(), 5.0);
        assert!(normalize_score(0, 1).is_err());
        assert!(normalize_score(5, 5).is_err());
    }

    #[test]
    fn filter_all_pass_is_identity() {
        let set =
            AnnotationSet::from_responses(vec![resp("w1", "s1", 1, 3), resp("w2", "s1", 2, 3)])
                .unwrap();
        assert_eq!(filter_responses(&set), set);
    }

    #[test]
    fn illiterate_worker_removed_entirely() {
        let mut bad = resp("w2", "s1", 2, 3);
        bad.literacy_pass = false;
        let mut bad_other_attr = resp("w2", "s1", 0, 3);
        bad_other_attr.attribute = Attribute::Creativity;
        let set = AnnotationSet::from_responses(vec![resp("w1", "s1", 1, 3), bad, bad_other_attr])
            .unwrap();
        let out = filter_responses(&set);
        assert_eq!(out.len(), 1);
        assert_eq!(out.responses()[0].worker_id, "w1");
    }

    #[test]
    fn blank_and_whitespace_summaries_removed() {
        let mut blank = resp("w2", "s1", 2, 3);
        blank.summary_text = None;
        let mut spaces = resp("w3", "s1", 2, 3);
        spaces.summary_text = Some(" \t　".into());
        let set =
            AnnotationSet::from_responses(vec![resp("w1", "s1", 1, 3), blank, spaces]).unwrap();
        assert_eq!(filter_responses(&set).len(), 1);
    }

    #[test]
    fn summary_on_any_row_counts_for_the_pair() {
        let mut no_summary = resp("w1", "s1", 1, 3);
        no_summary.attribute = Attribute::Affinity;
        no_summary.summary_text = None;
        let set = AnnotationSet::from_responses(vec![resp("w1", "s1", 1, 3), no_summary]).unwrap();
        assert_eq!(filter_responses(&set).len(), 2);
    }

    #[test]
    fn aggregate_examples() {
        let set = AnnotationSet::from_responses(vec![
            resp("w1", "s1", 2, 5),
            resp("w2", "s1", 2, 5),
            resp("w3", "s1", 2, 5),
            resp("w1", "s2", 0, 3),
            resp("w2", "s2", 1, 3),
            resp("w3", "s2", 2, 3),
            resp("w1", "s3", 1, 3),
        ])
        .unwrap();
        let (summary, warnings) = aggregate(&set);
        let coherence = &summary[&Attribute::Coherence];
        let by_id: HashMap<_, _> = coherence
            .per_sample
            .iter()
            .map(|s| (s.sample_id.as_str(), s))
            .collect();
        assert_eq!(by_id["s1"].std, 0.0);
        assert_eq!(by_id["s2"].mean, 5.0);
        assert!((by_id["s2"].std - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((by_id["s2"].std - 4.0825).abs() < 1e-4);
        // s3 counts toward the mean, not toward the spread
        assert!((coherence.mean - (5.0 + 5.0 + 5.0) / 3.0).abs() < 1e-12);
        assert!((coherence.mean_std.unwrap() - by_id["s2"].std / 2.0).abs() < 1e-12);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn perfect_agreement_is_one() {
        let units = vec![vec![0, 0, 0], vec![1, 1], vec![2, 2, 2]];
        assert_eq!(ordinal_alpha(&units, 3), Some(1.0));
    }

    #[test]
    fn systematic_disagreement_is_negative() {
        let units = vec![vec![0, 2], vec![2, 0], vec![0, 2], vec![2, 0]];
        let alpha = ordinal_alpha(&units, 3).unwrap();
        assert!((alpha + 0.75).abs() < 1e-12, "{alpha}");
    }

    #[test]
    fn too_few_values_is_undefined() {
        assert_eq!(ordinal_alpha(&[vec![1]], 3), None);
        assert_eq!(ordinal_alpha(&[], 3), None);
    }

    #[test]
    fn mixed_levels_rejected() {
        let set =
            AnnotationSet::from_responses(vec![resp("w1", "s1", 1, 3), resp("w2", "s1", 1, 4)])
                .unwrap();
        assert!(krippendorff_alpha(&set, Attribute::Coherence).is_err());
    }

    #[test]
    fn csv_parsing() {
        let text = "worker_id,sample_id,attribute,raw_value,level_count,summary,literacy_pass\n\
                    w1,s1,coherence,2,5,一首情歌,true\n\
                    w2,s1,coherence,4,5,,false\n";
        let set = AnnotationSet::parse_csv(text).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.responses()[1].summary_text, None);
        assert!(!set.responses()[1].literacy_pass);

        let bad = "worker_id,sample_id,attribute,raw_value,level_count,summary,literacy_pass\n\
                   w1,s1,coherence,7,5,x,true\n";
        assert!(matches!(
            AnnotationSet::parse_csv(bad),
            Err(Error::Parse { line: 2, .. })
        ));

        let dup = "worker_id,sample_id,attribute,raw_value,level_count,summary,literacy_pass\n\
                   w1,s1,coherence,1,5,x,true\nw1,s1,coherence,2,5,x,true\n";
        assert!(matches!(
            AnnotationSet::parse_csv(dup),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn report_counts_add_up() {
        let mut bad = resp("w3", "s1", 0, 3);
        bad.literacy_pass = false;
        let set = AnnotationSet::from_responses(vec![
            resp("w1", "s1", 1, 3),
            resp("w2", "s1", 2, 3),
            bad,
        ])
        .unwrap();
        let report = agreement_report(&set, true).unwrap();
        assert_eq!(report.filtered_count + report.retained_count, 3);
        assert_eq!(report.filtered_count, 1);
        assert_eq!(report.std_convention, "population");
    }
}
