use lyrics_eval::corpus::{Corpus, Document, TokenScheme};
use lyrics_eval::divergence::{mauve_score, MauveConfig};
use lyrics_eval::featurize::{hashed_ngram_features, FeatureSet, HashedNgramConfig};
use lyrics_eval::ngram_metrics::{corpus_degeneration, Aggregation, SequenceMetrics};
use lyrics_eval::sampling::{fit_char_lm, generate_batch, SamplingConfig};
use lyrics_eval::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub ps: Vec<f64>,
    pub n: usize,
    pub max_tokens: usize,
    pub seed: u64,
    pub order: usize,
    pub alpha: f64,
    pub prompt: String,
    /// Train on all training documents joined by newlines, so generations
    /// are not cut short by the end-of-text marker.
    pub join_training_docs: bool,
    pub scheme: TokenScheme,
    pub features: HashedNgramConfig,
    pub k: Option<usize>,
    /// MAUVE is averaged over k-means seeds `seed..seed + kmeans_seeds`.
    pub kmeans_seeds: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub p: Option<f64>,
    pub rep_2: f64,
    pub rep_3: f64,
    pub rep_4: f64,
    pub diversity: f64,
    pub distinct_2: f64,
    pub mauve: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trend {
    pub rep_2: f64,
    pub distinct_2: f64,
    pub mauve: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// Spearman rank correlation of each column against p.
    pub spearman_vs_p: Trend,
    pub heldout_documents: usize,
    pub training_documents: usize,
    pub warnings: Vec<String>,
}

/// Every fifth document (indices 4, 9, ...) is held out.
pub fn split_heldout(corpus: &Corpus) -> Result<(Corpus, Corpus)> {
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, doc) in corpus.documents().iter().enumerate() {
        if i % 5 == 4 {
            held.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    Ok((Corpus::new("train", train)?, Corpus::new("heldout", held)?))
}

fn row(label: String, p: Option<f64>, m: &SequenceMetrics, mauve: Option<f64>) -> ReportRow {
    let get = |v: Option<f64>| v.unwrap_or(f64::NAN);
    ReportRow {
        label,
        p,
        rep_2: get(m.rep(2)),
        rep_3: get(m.rep(3)),
        rep_4: get(m.rep(4)),
        diversity: m.diversity,
        distinct_2: get(m.distinct(2)),
        mauve,
    }
}

pub fn run(train: &Corpus, heldout: &Corpus, cfg: &ReportConfig) -> Result<Report> {
    if cfg.ps.is_empty() {
        return Err(Error::InvalidArgument("at least one p is required".into()));
    }
    let ns = [1, 2, 3, 4];
    let lm_corpus = if cfg.join_training_docs {
        let joined: Vec<&str> = train.documents().iter().map(|d| d.text()).collect();
        Corpus::new(
            "train-joined",
            vec![Document::new("joined", joined.join("\n"))],
        )?
    } else {
        train.clone()
    };
    let lm = fit_char_lm(&lm_corpus, cfg.order, cfg.alpha)?;
    let human = corpus_degeneration(heldout, cfg.scheme, &ns, Aggregation::MeanOfDocuments)?;
    let human_features = hashed_ngram_features(heldout, &cfg.features)?;
    let mut warnings = human.warnings.clone();
    let mut rows = vec![row("human".into(), None, &human.corpus_mean, None)];
    for &p in &cfg.ps {
        let sampling = SamplingConfig {
            p,
            max_tokens: cfg.max_tokens,
            seed: cfg.seed,
            prompt: cfg.prompt.clone(),
        };
        let texts = generate_batch(&lm, &sampling, cfg.n)?;
        let docs = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                Document::new(format!("p{p}-{i:04}"), t).with_source(format!("generated-p{p}"))
            })
            .collect();
        let generated = Corpus::new(format!("generated-p{p}"), docs)?;
        let metrics =
            corpus_degeneration(&generated, cfg.scheme, &ns, Aggregation::MeanOfDocuments)?;
        warnings.extend(metrics.warnings.iter().map(|w| format!("p={p}: {w}")));
        let features = hashed_ngram_features(&generated, &cfg.features)?;
        let mauve = mean_mauve(&human_features, &features, cfg)?;
        rows.push(row(
            format!("p={p:.2}"),
            Some(p),
            &metrics.corpus_mean,
            Some(mauve),
        ));
    }
    let gen = &rows[1..];
    let ps: Vec<f64> = gen.iter().map(|r| r.p.unwrap_or(f64::NAN)).collect();
    let col = |f: fn(&ReportRow) -> f64| spearman(&ps, &gen.iter().map(f).collect::<Vec<_>>());
    let spearman_vs_p = Trend {
        rep_2: col(|r| r.rep_2),
        distinct_2: col(|r| r.distinct_2),
        mauve: col(|r| r.mauve.unwrap_or(f64::NAN)),
    };
    Ok(Report {
        rows,
        spearman_vs_p,
        heldout_documents: heldout.len(),
        training_documents: train.len(),
        warnings,
    })
}

fn mean_mauve(human: &FeatureSet, generated: &FeatureSet, cfg: &ReportConfig) -> Result<f64> {
    let seeds = cfg.kmeans_seeds.max(1);
    let mut total = 0.0;
    for s in 0..seeds {
        let mc = MauveConfig {
            k: cfg.k,
            seed: cfg.seed + s,
            ..MauveConfig::default()
        };
        total += mauve_score(human, generated, &mc)?;
    }
    Ok(total / seeds as f64)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman's rho with average ranks for ties; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn table(report: &Report) -> String {
    let header = [
        "",
        "rep-2",
        "rep-3",
        "rep-4",
        "diversity",
        "distinct-2",
        "mauve",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in &report.rows {
        let f = |v: f64| format!("{v:.4}");
        cells.push(vec![
            r.label.clone(),
            f(r.rep_2),
            f(r.rep_3),
            f(r.rep_4),
            f(r.diversity),
            f(r.distinct_2),
            r.mauve.map(f).unwrap_or_else(|| "-".into()),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            cells
                .iter()
                .map(|row| row[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
