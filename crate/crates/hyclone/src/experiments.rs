//! Test-count sweeps, adversarial re-evaluation, and report rendering.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use hyclone_core::{
    compute_metrics, flip_rate, ChallengeCondition, ConfusionMatrix, Decision, Metrics,
    UndecidablePolicy,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::ExperimentError;
use crate::pipeline::{Pipeline, Verdict};

fn labels(corpus: &Corpus) -> Result<Vec<Option<bool>>, ExperimentError> {
    if let Some(p) = corpus.pairs.iter().find(|p| p.label.is_none()) {
        return Err(ExperimentError::MissingLabel(p.id.clone()));
    }
    Ok(corpus.labels())
}

/// Metrics for one labeled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub matrix: ConfusionMatrix,
    pub metrics: Metrics,
    pub undecidable: usize,
}

pub fn evaluate(
    corpus: &Corpus,
    decisions: &[Decision],
    policy: UndecidablePolicy,
) -> Result<Evaluation, ExperimentError> {
    let labels = labels(corpus)?;
    let (matrix, metrics) = compute_metrics(decisions, &labels, policy)?;
    Ok(Evaluation {
        matrix,
        metrics,
        undecidable: decisions.iter().filter(|d| **d == Decision::Undecidable).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    #[serde(flatten)]
    pub eval: Evaluation,
    /// Pairs whose processing failed outright (counted as undecidable).
    pub errors: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `verdicts[i][j]`: pair `j` at `rows[i].n`; `None` where the pair failed.
    #[serde(skip)]
    pub verdicts: Vec<Vec<Option<Verdict>>>,
}

/// Runs the pipeline at every n in `n_values`.
///
/// Each pair is screened once. Pairs routed to execution get inputs
/// collected and cross-executed once at the largest n; the run at a smaller
/// n scores the leading n inputs of those same sets.
pub fn sweep_n(
    pipeline: &Pipeline,
    corpus: &Corpus,
    n_values: &[usize],
    policy: UndecidablePolicy,
) -> Result<SweepReport, ExperimentError> {
    let ns: Vec<usize> = n_values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let Some(&n_max) = ns.last() else {
        return Err(ExperimentError::Invalid("n_values is empty".into()));
    };
    if ns[0] == 0 {
        return Err(ExperimentError::Invalid("every n must be at least 1".into()));
    }
    labels(corpus)?;
    let routing = pipeline.config().routing;

    let per_pair: Vec<Option<Vec<Verdict>>> = pipeline.install(|| {
        corpus
            .pairs
            .par_iter()
            .map(|pair| {
                let started = Instant::now();
                let screen = match pipeline.screen(pair) {
                    Ok(s) => s,
                    Err(e) => {
                        log::warn!("pair {}: {e}", pair.id);
                        return None;
                    }
                };
                if !routing.needs_execution(screen.is_clone) {
                    let v = pipeline.screen_verdict(pair, screen, started);
                    return Some(vec![v; ns.len()]);
                }
                match pipeline.cross_run(pair, n_max, false) {
                    Ok(run) => Some(
                        ns.iter()
                            .map(|&n| pipeline.verdict_from_cross(pair, screen.clone(), &run, n, started))
                            .collect(),
                    ),
                    Err(e) => {
                        log::warn!("pair {}: {e}", pair.id);
                        None
                    }
                }
            })
            .collect()
    });

    let errors = per_pair.iter().filter(|p| p.is_none()).count();
    let mut rows = Vec::with_capacity(ns.len());
    let mut verdicts = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let at_n: Vec<Option<Verdict>> = per_pair
            .iter()
            .map(|p| p.as_ref().map(|vs| vs[i].clone()))
            .collect();
        let decisions: Vec<Decision> = at_n
            .iter()
            .map(|v| v.as_ref().map_or(Decision::Undecidable, |v| v.decision))
            .collect();
        rows.push(SweepRow {
            n,
            eval: evaluate(corpus, &decisions, policy)?,
            errors,
        });
        verdicts.push(at_n);
    }
    Ok(SweepReport { rows, verdicts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipReport {
    pub condition: ChallengeCondition,
    pub flipped: usize,
    pub total: usize,
    /// Percentage of pairs whose screen verdict changed.
    pub flip_rate: f64,
    pub matrix: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialReport {
    pub baseline: Evaluation,
    pub conditions: Vec<FlipReport>,
}

/// Screens every pair, then re-evaluates it under each condition. Only the
/// screen is studied here; nothing is executed.
pub fn adversarial(
    pipeline: &Pipeline,
    corpus: &Corpus,
    conditions: &[ChallengeCondition],
) -> Result<AdversarialReport, ExperimentError> {
    let labels = labels(corpus)?;
    let gateway = pipeline.gateway();
    let baseline = pipeline.install(|| {
        corpus
            .pairs
            .par_iter()
            .map(|p| gateway.classify_clone(p))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let base_bits: Vec<bool> = baseline.iter().map(|v| v.is_clone).collect();
    let base_decisions: Vec<Decision> = base_bits.iter().map(|b| Decision::from(*b)).collect();
    let (matrix, metrics) = compute_metrics(&base_decisions, &labels, UndecidablePolicy::AsNegative)?;

    let mut reports = Vec::with_capacity(conditions.len());
    for &condition in conditions {
        let reeval = pipeline.install(|| {
            corpus
                .pairs
                .par_iter()
                .zip(baseline.par_iter())
                .map(|(p, prior)| gateway.reevaluate(p, prior, condition))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let bits: Vec<bool> = reeval.iter().map(|v| v.is_clone).collect();
        let decisions: Vec<Decision> = bits.iter().map(|b| Decision::from(*b)).collect();
        let (matrix, metrics) = compute_metrics(&decisions, &labels, UndecidablePolicy::AsNegative)?;
        reports.push(FlipReport {
            condition,
            flipped: bits.iter().zip(&base_bits).filter(|(a, b)| a != b).count(),
            total: bits.len(),
            flip_rate: flip_rate(&base_bits, &bits)?,
            matrix,
            metrics,
        });
    }
    Ok(AdversarialReport {
        baseline: Evaluation {
            matrix,
            metrics,
            undecidable: 0,
        },
        conditions: reports,
    })
}

/// Left-aligned first column, right-aligned numbers, two-space gutters.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                s.push_str(&format!("{cell:<w$}"));
            } else {
                s.push_str(&format!("  {cell:>w$}"));
            }
        }
        s.trim_end().to_string()
    };
    let rule: String = widths
        .iter()
        .enumerate()
        .map(|(i, w)| if i == 0 { "-".repeat(*w) } else { format!("  {}", "-".repeat(*w)) })
        .collect();
    let mut out = vec![line(headers.to_vec()), rule];
    for row in rows {
        out.push(line(row.iter().map(String::as_str).collect()));
    }
    out.join("\n") + "\n"
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

pub const DETECTION_HEADERS: [&str; 6] = ["Method", "Precision", "Recall", "F1-Score", "TPR", "TNR"];
pub const STABILITY_HEADERS: [&str; 8] = [
    "Condition", "Precision", "Recall", "F1-Score", "Accuracy", "TPR", "TNR", "Flip rate",
];

pub fn detection_row(label: &str, m: &Metrics) -> Vec<String> {
    vec![label.to_string(), f4(m.precision), f4(m.recall), f4(m.f1), f4(m.tpr), f4(m.tnr)]
}

pub fn stability_row(label: &str, m: &Metrics, flip: Option<f64>) -> Vec<String> {
    vec![
        label.to_string(),
        f4(m.precision),
        f4(m.recall),
        f4(m.f1),
        f4(m.accuracy),
        f4(m.tpr),
        f4(m.tnr),
        flip.map_or_else(|| "-".to_string(), |f| format!("{f:.2}")),
    ]
}

pub fn render_adversarial(report: &AdversarialReport) -> String {
    let mut rows = vec![stability_row("Baseline", &report.baseline.metrics, None)];
    rows.extend(
        report
            .conditions
            .iter()
            .map(|c| stability_row(c.condition.label(), &c.metrics, Some(c.flip_rate))),
    );
    render_table(&STABILITY_HEADERS, &rows)
}

pub fn render_sweep(report: &SweepReport) -> String {
    let headers = ["N", "Precision", "Recall", "F1-Score", "TPR", "TNR", "TP", "FP", "FN", "TN", "Undecidable"];
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let m = &r.eval.metrics;
            let c = &r.eval.matrix;
            vec![
                r.n.to_string(),
                f4(m.precision),
                f4(m.recall),
                f4(m.f1),
                f4(m.tpr),
                f4(m.tnr),
                c.tp.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                c.tn.to_string(),
                r.eval.undecidable.to_string(),
            ]
        })
        .collect();
    render_table(&headers, &rows)
}

pub fn write_sweep_csv(report: &SweepReport, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n", "precision", "recall", "f1", "accuracy", "tpr", "tnr", "tp", "fp", "fn", "tn",
        "undecidable", "errors",
    ])?;
    for r in &report.rows {
        let m = &r.eval.metrics;
        let c = &r.eval.matrix;
        w.serialize((
            r.n, m.precision, m.recall, m.f1, m.accuracy, m.tpr, m.tnr, c.tp, c.fp, c.fn_, c.tn,
            r.eval.undecidable, r.errors,
        ))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_adversarial_csv(report: &AdversarialReport, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "condition", "precision", "recall", "f1", "accuracy", "tpr", "tnr", "tp", "fp", "fn",
        "tn", "flipped", "total", "flip_rate",
    ])?;
    let b = &report.baseline;
    let (m, c) = (&b.metrics, &b.matrix);
    w.serialize((
        "Baseline", m.precision, m.recall, m.f1, m.accuracy, m.tpr, m.tnr, c.tp, c.fp, c.fn_,
        c.tn, 0usize, c.total(), 0.0,
    ))?;
    for f in &report.conditions {
        let (m, c) = (&f.metrics, &f.matrix);
        w.serialize((
            f.condition.label(), m.precision, m.recall, m.f1, m.accuracy, m.tpr, m.tnr, c.tp,
            c.fp, c.fn_, c.tn, f.flipped, f.total, f.flip_rate,
        ))?;
    }
    w.flush()?;
    Ok(())
}
