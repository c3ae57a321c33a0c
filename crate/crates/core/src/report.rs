//! Evaluation report: per-variant score summaries with Mann-Whitney p values
//! against a baseline, score-band breakdowns, subgroup tests, inter-rater
//! agreement and the pairwise ranking table. Rendered as aligned plain text
//! or serialised as JSON; both are deterministic.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::evalkit::{
    aggregate_independent, aggregate_pairwise, AggregatedResponse, Choice, Dimension, DiseaseCategory, Domain,
    EvalError, EvalQuestion, EvalRun, PairSealEntry, PairwiseRecord, PairwiseSummary, Persona, RatingRecord, SealEntry,
    Winner,
};
use crate::stats::{
    chi_square, cohens_kappa, describe, format_mean_sd, format_p, kruskal_wallis, mann_whitney_u, StatsError,
    SummaryStat,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("aggregation incomplete: {0}")]
    IncompleteAggregation(String),
    #[error("baseline variant `{variant}` has no responses in round {round}")]
    UnknownBaseline { round: u8, variant: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Everything a report is computed from.
#[derive(Debug, Clone, Default)]
pub struct ReportInput {
    pub ratings: Vec<RatingRecord>,
    pub seal: Vec<SealEntry>,
    pub pair_records: Vec<PairwiseRecord>,
    pub pair_seal: Vec<PairSealEntry>,
    pub questions: Vec<EvalQuestion>,
}

impl ReportInput {
    pub fn from_run(run: &EvalRun) -> Self {
        Self {
            ratings: run.ledger().ratings().to_vec(),
            seal: run.seal().to_vec(),
            pair_records: run.ledger().pairwise().to_vec(),
            pair_seal: run.pair_seal().to_vec(),
            questions: run.questions().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Baseline variant per round; defaults to the round's first variant.
    pub baselines: BTreeMap<u8, String>,
}

/// Rating bands over a two-rater mean.
pub const BAND_LABELS: [&str; 5] = ["Strongly disagree", "Disagree", "Neutral", "Agree", "Strongly agree"];

/// [1,2) → 0, [2,3) → 1, [3,4) → 2, [4,5) → 3, 5 → 4.
pub fn band_index(mean: f64) -> usize {
    (mean.floor() as i64 - 1).clamp(0, 4) as usize
}

/// `"n (x.x%)"`.
pub fn format_count_pct(count: usize, total: usize) -> String {
    format!("{count} ({})", format_pct(count, total))
}

pub fn format_pct(count: usize, total: usize) -> String {
    if total == 0 {
        return "NA".into();
    }
    format!("{:.1}%", 100.0 * count as f64 / total as f64)
}

fn fmt_opt_p(p: Option<f64>) -> String {
    p.map(format_p).unwrap_or_else(|| "NA".into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
}

impl Cell {
    fn of(values: &[f64]) -> Option<Cell> {
        describe(values)
            .ok()
            .map(|SummaryStat { n, mean, sd }| Cell { n, mean, sd })
    }

    pub fn render(&self) -> String {
        match self.sd {
            Some(sd) => format_mean_sd(self.mean, sd),
            None => format!("{:.2} ± NA", self.mean),
        }
    }
}

fn render_cell(c: &Option<Cell>) -> String {
    c.as_ref().map(Cell::render).unwrap_or_else(|| "NA".into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantRow {
    pub variant: String,
    pub n: usize,
    pub dimensions: BTreeMap<Dimension, Cell>,
    pub total: Cell,
    /// Two-sided Mann-Whitney p of totals against the baseline.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub dimension: Dimension,
    pub counts: [usize; 5],
    pub good: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandTable {
    pub variant: String,
    pub n: usize,
    pub rows: Vec<BandRow>,
    pub hallucinations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupLevel {
    pub label: String,
    /// One cell per variant column; `None` when the level has no responses.
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupBlock {
    pub title: String,
    pub test: String,
    pub levels: Vec<SubgroupLevel>,
    pub p_values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubgroupTable {
    pub variants: Vec<String>,
    pub blocks: Vec<SubgroupBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub dimension: Dimension,
    pub raters: Vec<(String, Cell)>,
    pub kappa: Option<f64>,
    pub band: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReport {
    pub round: u8,
    pub baseline: String,
    pub variants: Vec<VariantRow>,
    pub bands: Vec<BandTable>,
    pub subgroups: Option<SubgroupTable>,
    pub agreement: Vec<AgreementRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseRow {
    pub dimension: Dimension,
    pub source1_wins: usize,
    pub source2_wins: usize,
    pub ties: usize,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRaterRow {
    pub dimension: Dimension,
    /// Per rater: pairs where that rater preferred source 2.
    pub source2_preferred: Vec<(String, usize)>,
    pub pairs: usize,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseReport {
    pub source1: String,
    pub source2: String,
    pub rows: Vec<PairwiseRow>,
    pub agreement: Vec<PairRaterRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rounds: Vec<RoundReport>,
    pub pairwise: Option<PairwiseReport>,
    pub notes: Vec<String>,
}

pub const NOTE_MWU: &str =
    "p values: two-sided Mann-Whitney U (exact when n1+n2 <= 12 without ties, otherwise normal approximation with tie-corrected variance and continuity correction).";
pub const NOTE_PAIRWISE: &str =
    "pairwise p: Pearson chi-square on the 2x2 table of observed wins (source 1, source 2) against an even split of the same decided pairs; ties excluded; NA when no pair was decided.";
pub const NOTE_KAPPA: &str = "agreement: unweighted Cohen's kappa on raw integer scores or mapped pairwise choices.";

/// Builds the full report. Rounds without any ratings are skipped; a round
/// that is only partly rated is an error.
pub fn build_report(input: &ReportInput, opts: &ReportOptions) -> Result<Report, ReportError> {
    let mut rounds = Vec::new();
    let round_ids: BTreeSet<u8> = input.seal.iter().map(|s| s.round).collect();
    for round in round_ids {
        let seal: Vec<SealEntry> = input.seal.iter().filter(|s| s.round == round).cloned().collect();
        let ids: BTreeSet<&str> = seal.iter().map(|s| s.anon_id.as_str()).collect();
        let ratings: Vec<RatingRecord> = input
            .ratings
            .iter()
            .filter(|r| ids.contains(r.anon_id.as_str()))
            .cloned()
            .collect();
        if ratings.is_empty() {
            continue;
        }
        let aggregates = aggregate_independent(&ratings, &seal).map_err(|e| match e {
            EvalError::MissingRater(id) => {
                ReportError::IncompleteAggregation(format!("round {round} item `{id}` lacks two raters"))
            }
            other => other.into(),
        })?;
        rounds.push(round_report(round, &aggregates, &ratings, &input.questions, opts)?);
    }

    let pairwise = if input.pair_records.is_empty() {
        None
    } else {
        let summary = aggregate_pairwise(&input.pair_records, &input.pair_seal).map_err(|e| match e {
            EvalError::MissingRater(id) => ReportError::IncompleteAggregation(format!("pair `{id}` lacks two raters")),
            other => other.into(),
        })?;
        Some(pairwise_report(&summary, &input.pair_records, &input.pair_seal)?)
    };

    let mut notes = vec![NOTE_MWU.to_string(), NOTE_KAPPA.to_string()];
    if pairwise.is_some() {
        notes.push(NOTE_PAIRWISE.to_string());
    }
    Ok(Report {
        rounds,
        pairwise,
        notes,
    })
}

fn variant_order(aggregates: &[AggregatedResponse]) -> Vec<String> {
    let mut seen = Vec::<String>::new();
    for a in aggregates {
        if !seen.contains(&a.variant) {
            seen.push(a.variant.clone());
        }
    }
    seen
}

/// Builds one round's tables from already-aggregated responses.
pub fn round_report(
    round: u8,
    aggregates: &[AggregatedResponse],
    ratings: &[RatingRecord],
    questions: &[EvalQuestion],
    opts: &ReportOptions,
) -> Result<RoundReport, ReportError> {
    let variants = variant_order(aggregates);
    let baseline = match opts.baselines.get(&round) {
        Some(b) if variants.contains(b) => b.clone(),
        Some(b) => {
            return Err(ReportError::UnknownBaseline {
                round,
                variant: b.clone(),
            })
        }
        None => variants.first().cloned().unwrap_or_default(),
    };
    let totals = |v: &str| of_variant(aggregates, v).map(|a| a.total).collect::<Vec<_>>();
    let base_totals = totals(&baseline);

    let mut rows = Vec::new();
    let mut bands = Vec::new();
    for v in &variants {
        let t = totals(v);
        let dimensions = Dimension::ALL
            .into_iter()
            .filter_map(|d| Cell::of(&of_variant(aggregates, v).map(|a| a.mean(d)).collect::<Vec<_>>()).map(|c| (d, c)))
            .collect();
        let p_value = if *v == baseline {
            None
        } else {
            Some(mann_whitney_u(&base_totals, &t)?.p_value())
        };
        rows.push(VariantRow {
            variant: v.clone(),
            n: t.len(),
            dimensions,
            total: Cell::of(&t).expect("variant has responses"),
            p_value,
        });

        let band_rows = Dimension::ALL
            .into_iter()
            .map(|d| {
                let mut counts = [0usize; 5];
                for a in of_variant(aggregates, v) {
                    counts[band_index(a.mean(d))] += 1;
                }
                BandRow {
                    dimension: d,
                    counts,
                    good: counts[3] + counts[4],
                }
            })
            .collect();
        bands.push(BandTable {
            variant: v.clone(),
            n: t.len(),
            rows: band_rows,
            hallucinations: of_variant(aggregates, v).filter(|a| a.hallucination).count(),
        });
    }

    let subgroups = (!questions.is_empty())
        .then(|| subgroup_table(aggregates, &variants, questions))
        .transpose()?;
    Ok(RoundReport {
        round,
        baseline,
        variants: rows,
        bands,
        subgroups,
        agreement: agreement_rows(ratings)?,
    })
}

fn of_variant<'a>(aggregates: &'a [AggregatedResponse], v: &'a str) -> impl Iterator<Item = &'a AggregatedResponse> {
    aggregates.iter().filter(move |a| a.variant == v)
}

fn subgroup_table(
    aggregates: &[AggregatedResponse],
    variants: &[String],
    questions: &[EvalQuestion],
) -> Result<SubgroupTable, ReportError> {
    let by_id: HashMap<&str, &EvalQuestion> = questions.iter().map(|q| (q.id.as_str(), q)).collect();

    // Generic over the grouping key so each block uses the same code path.
    let block = |title: &str,
                 test: &str,
                 labels: Vec<String>,
                 key: &dyn Fn(&EvalQuestion) -> usize|
     -> Result<SubgroupBlock, ReportError> {
        let mut levels: Vec<SubgroupLevel> = labels
            .into_iter()
            .map(|label| SubgroupLevel {
                label,
                cells: Vec::new(),
            })
            .collect();
        let mut p_values = Vec::new();
        for v in variants {
            let mut groups: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
            for a in aggregates.iter().filter(|a| &a.variant == v) {
                if let Some(q) = by_id.get(a.question_id.as_str()) {
                    groups[key(q)].push(a.total);
                }
            }
            for (level, g) in levels.iter_mut().zip(&groups) {
                level.cells.push(Cell::of(g));
            }
            let present: Vec<Vec<f64>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
            let p = match present.len() {
                0 | 1 => None,
                2 if test == "Mann-Whitney U" => Some(mann_whitney_u(&present[0], &present[1])?.p_value()),
                _ => kruskal_wallis(&present)?.p_value,
            };
            p_values.push(p);
        }
        Ok(SubgroupBlock {
            title: title.into(),
            test: test.into(),
            levels,
            p_values,
        })
    };

    let category = |q: &EvalQuestion| {
        DiseaseCategory::ALL
            .iter()
            .position(|c| *c == q.disease_category)
            .unwrap()
    };
    let persona = |q: &EvalQuestion| Persona::ALL.iter().position(|p| *p == q.persona).unwrap();
    let domain = |q: &EvalQuestion| Domain::ALL.iter().position(|d| *d == q.domain).unwrap();
    Ok(SubgroupTable {
        variants: variants.to_vec(),
        blocks: vec![
            block(
                "Disease category",
                "Kruskal-Wallis",
                vec![
                    "Common diseases".into(),
                    "Specialty diseases".into(),
                    "Rare diseases".into(),
                ],
                &category,
            )?,
            block(
                "Persona",
                "Mann-Whitney U",
                vec!["Patients".into(), "Medical students".into()],
                &persona,
            )?,
            block(
                "Domain",
                "Kruskal-Wallis",
                vec![
                    "Disease description".into(),
                    "Risk factors".into(),
                    "Diagnosis".into(),
                    "Treatment and prevention".into(),
                    "Prognosis".into(),
                ],
                &domain,
            )?,
        ],
    })
}

fn kappa_or_none<T: Ord>(a: &[T], b: &[T]) -> Result<Option<f64>, StatsError> {
    if a.is_empty() {
        return Ok(None);
    }
    match cohens_kappa(a, b) {
        Ok(k) => Ok(Some(k.kappa)),
        Err(StatsError::DegenerateAgreement) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Per-rater summaries and kappa over items that both raters scored. With
/// more than two raters, each item pairs its two raters in id order.
fn agreement_rows(ratings: &[RatingRecord]) -> Result<Vec<AgreementRow>, ReportError> {
    let raters: BTreeSet<&str> = ratings.iter().map(|r| r.rater_id.as_str()).collect();
    let mut by_item: BTreeMap<&str, Vec<&RatingRecord>> = BTreeMap::new();
    for r in ratings {
        by_item.entry(r.anon_id.as_str()).or_default().push(r);
    }
    for recs in by_item.values_mut() {
        recs.sort_by(|a, b| a.rater_id.cmp(&b.rater_id));
    }

    let mut rows = Vec::new();
    for d in Dimension::ALL {
        let per_rater = raters
            .iter()
            .filter_map(|rater| {
                let v: Vec<f64> = ratings
                    .iter()
                    .filter(|r| r.rater_id == *rater)
                    .map(|r| f64::from(r.scores.get(d)))
                    .collect();
                Cell::of(&v).map(|c| (rater.to_string(), c))
            })
            .collect();
        let (first, second): (Vec<u8>, Vec<u8>) = by_item
            .values()
            .filter(|recs| recs.len() == 2)
            .map(|recs| (recs[0].scores.get(d), recs[1].scores.get(d)))
            .unzip();
        let kappa = kappa_or_none(&first, &second)?;
        rows.push(AgreementRow {
            dimension: d,
            raters: per_rater,
            kappa,
            band: kappa.map(|k| crate::stats::KappaBand::classify(k).label().to_string()),
        });
    }
    Ok(rows)
}

/// Chi-square p for one dimension's pairwise counts (see [`NOTE_PAIRWISE`]).
pub fn pairwise_p(source1_wins: usize, source2_wins: usize) -> Result<Option<f64>, StatsError> {
    let decided = (source1_wins + source2_wins) as f64;
    if decided == 0.0 {
        return Ok(None);
    }
    let table = vec![
        vec![source1_wins as f64, source2_wins as f64],
        vec![decided / 2.0, decided / 2.0],
    ];
    Ok(chi_square(&table)?.p_value)
}

fn pairwise_report(
    summary: &PairwiseSummary,
    records: &[PairwiseRecord],
    seal: &[PairSealEntry],
) -> Result<PairwiseReport, ReportError> {
    let mut rows = Vec::new();
    for (d, c) in &summary.counts {
        rows.push(PairwiseRow {
            dimension: *d,
            source1_wins: c.source1_wins,
            source2_wins: c.source2_wins,
            ties: c.ties,
            p_value: pairwise_p(c.source1_wins, c.source2_wins)?,
        });
    }

    let a_is: HashMap<&str, Winner> = seal.iter().map(|s| (s.pair_id.as_str(), s.a_is)).collect();
    let to_source = |r: &PairwiseRecord| match (r.choice, a_is[r.pair_id.as_str()]) {
        (Choice::Tie, _) => Winner::Tie,
        (Choice::A, w) => w,
        (Choice::B, Winner::Source1) => Winner::Source2,
        (Choice::B, _) => Winner::Source1,
    };
    let raters: BTreeSet<&str> = records.iter().map(|r| r.rater_id.as_str()).collect();
    let mut agreement = Vec::new();
    for d in summary.counts.keys() {
        let recs: Vec<&PairwiseRecord> = records.iter().filter(|r| r.dimension == *d).collect();
        let source2_preferred = raters
            .iter()
            .map(|rater| {
                let n = recs
                    .iter()
                    .filter(|r| r.rater_id == *rater && to_source(r) == Winner::Source2)
                    .count();
                (rater.to_string(), n)
            })
            .collect();
        let mut by_pair: BTreeMap<&str, Vec<&PairwiseRecord>> = BTreeMap::new();
        for r in &recs {
            by_pair.entry(r.pair_id.as_str()).or_default().push(r);
        }
        let code = |w: Winner| match w {
            Winner::Source1 => 0u8,
            Winner::Source2 => 1,
            Winner::Tie => 2,
        };
        let (first, second): (Vec<u8>, Vec<u8>) = by_pair
            .values_mut()
            .filter(|v| v.len() == 2)
            .map(|v| {
                v.sort_by(|a, b| a.rater_id.cmp(&b.rater_id));
                (code(to_source(v[0])), code(to_source(v[1])))
            })
            .unzip();
        agreement.push(PairRaterRow {
            dimension: *d,
            source2_preferred,
            pairs: by_pair.len(),
            kappa: kappa_or_none(&first, &second)?,
        });
    }

    Ok(PairwiseReport {
        source1: summary.source1.clone(),
        source2: summary.source2.clone(),
        rows,
        agreement,
    })
}

/// Left-aligned first column, the rest padded to a common width.
fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let cols = header.len();
    let mut widths = vec![0; cols];
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let mut line = String::new();
        for (i, c) in r.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            let pad = widths[i] - c.chars().count();
            line.push_str(c);
            line.extend(std::iter::repeat_n(' ', pad));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rounds {
            render_round(&mut out, r);
        }
        if let Some(p) = &self.pairwise {
            render_pairwise(&mut out, p);
        }
        out.push_str("Notes\n");
        for n in &self.notes {
            let _ = writeln!(out, "- {n}");
        }
        out
    }
}

fn render_round(out: &mut String, r: &RoundReport) {
    let _ = writeln!(
        out,
        "Round {}: independent evaluation (baseline: {})\n",
        r.round, r.baseline
    );
    let mut header = vec!["Variant".to_string(), "n".to_string()];
    header.extend(Dimension::ALL.iter().map(|d| d.title().to_string()));
    header.extend(["Total Score".to_string(), "p value".to_string()]);
    let rows: Vec<Vec<String>> = r
        .variants
        .iter()
        .map(|v| {
            let mut row = vec![v.variant.clone(), v.n.to_string()];
            row.extend(
                Dimension::ALL
                    .iter()
                    .map(|d| v.dimensions.get(d).map(Cell::render).unwrap_or_else(|| "NA".into())),
            );
            row.push(v.total.render());
            row.push(fmt_opt_p(v.p_value));
            row
        })
        .collect();
    table(out, &header, &rows);
    out.push('\n');

    let _ = writeln!(out, "Round {}: score bands (two-rater means)\n", r.round);
    let mut header = vec!["Variant".to_string(), "Dimension".to_string()];
    header.extend(["[1,2)", "[2,3)", "[3,4)", "[4,5)", "5", "GOOD"].map(String::from));
    let mut rows = Vec::new();
    for b in &r.bands {
        for row in &b.rows {
            let mut cells = vec![b.variant.clone(), row.dimension.title().to_string()];
            cells.extend(row.counts.iter().map(|c| format_pct(*c, b.n)));
            cells.push(format_pct(row.good, b.n));
            rows.push(cells);
        }
        rows.push(vec![
            b.variant.clone(),
            "Hallucination".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            format_pct(b.hallucinations, b.n),
        ]);
    }
    table(out, &header, &rows);
    out.push('\n');

    if let Some(s) = &r.subgroups {
        let _ = writeln!(out, "Round {}: subgroup analysis of total score\n", r.round);
        let mut header = vec!["Subgroup".to_string()];
        header.extend(s.variants.iter().cloned());
        let mut rows = Vec::new();
        for b in &s.blocks {
            let mut title = vec![format!("{} ({})", b.title, b.test)];
            title.extend(s.variants.iter().map(|_| String::new()));
            rows.push(title);
            for level in &b.levels {
                let mut row = vec![format!("  {}", level.label)];
                row.extend(level.cells.iter().map(render_cell));
                rows.push(row);
            }
            let mut row = vec!["  P value".to_string()];
            row.extend(b.p_values.iter().map(|p| fmt_opt_p(*p)));
            rows.push(row);
        }
        table(out, &header, &rows);
        out.push('\n');
    }

    let _ = writeln!(out, "Round {}: inter-rater agreement\n", r.round);
    let raters: Vec<String> = r
        .agreement
        .first()
        .map(|a| a.raters.iter().map(|(name, _)| name.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["Dimension".to_string()];
    header.extend(raters.iter().map(|n| format!("{n} Mean ± SD")));
    header.extend(["Kappa".to_string(), "Agreement".to_string()]);
    let rows: Vec<Vec<String>> = r
        .agreement
        .iter()
        .map(|a| {
            let mut row = vec![a.dimension.title().to_string()];
            row.extend(a.raters.iter().map(|(_, c)| c.render()));
            row.push(a.kappa.map(|k| format!("{k:.3}")).unwrap_or_else(|| "NA".into()));
            row.push(a.band.clone().unwrap_or_else(|| "NA".into()));
            row
        })
        .collect();
    table(out, &header, &rows);
    out.push('\n');
}

fn render_pairwise(out: &mut String, p: &PairwiseReport) {
    let _ = writeln!(out, "Pairwise ranking: {} vs {}\n", p.source1, p.source2);
    let header = vec![
        "Dimension".to_string(),
        p.source1.clone(),
        p.source2.clone(),
        "Tie".to_string(),
        "p value".to_string(),
    ];
    let rows: Vec<Vec<String>> = p
        .rows
        .iter()
        .map(|r| {
            let n = r.source1_wins + r.source2_wins + r.ties;
            vec![
                r.dimension.title().to_string(),
                format_count_pct(r.source1_wins, n),
                format_count_pct(r.source2_wins, n),
                format_count_pct(r.ties, n),
                fmt_opt_p(r.p_value),
            ]
        })
        .collect();
    table(out, &header, &rows);
    out.push('\n');

    let _ = writeln!(
        out,
        "Pairwise agreement: pairs where each rater preferred {}\n",
        p.source2
    );
    let raters: Vec<String> = p
        .agreement
        .first()
        .map(|a| a.source2_preferred.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["Dimension".to_string()];
    header.extend(raters.iter().map(|n| format!("{n} N (%)")));
    header.push("Kappa".to_string());
    let rows: Vec<Vec<String>> = p
        .agreement
        .iter()
        .map(|a| {
            let mut row = vec![a.dimension.title().to_string()];
            row.extend(a.source2_preferred.iter().map(|(_, n)| {
                let pct = if a.pairs == 0 {
                    0.0
                } else {
                    100.0 * *n as f64 / a.pairs as f64
                };
                format!("{n} ({pct:.1})")
            }));
            row.push(a.kappa.map(|k| format!("{k:.3}")).unwrap_or_else(|| "NA".into()));
            row
        })
        .collect();
    table(out, &header, &rows);
    out.push('\n');
}
