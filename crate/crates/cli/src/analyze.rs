//! Per-theorem pipeline: distances, MDS in one to three dimensions, a GMM
//! on the 2-d coordinates, and the summary table.

use std::fmt::Write as _;
use std::path::Path;

use proofspace::axiom_audit::lean_safe;
use proofspace::clustering::{select_gmm, GmmModel};
use proofspace::corpus::{corpus_distance_matrix, Corpus, ProofRecord};
use proofspace::geometry::{nested_embeddings, SmacofParams};
use proofspace::Condition;
use serde::Serialize;

use crate::error::CliError;
use crate::output::{write_atomic, write_json};
use crate::plot::{render_svg, LabeledSolution, PlotSpec};

pub const MAX_DIMENSION: usize = 3;
pub const SMACOF_MAX_ITERS: usize = 300;
pub const SMACOF_TOLERANCE: f64 = 1e-9;
pub const REPORT_HEADER: &str = "Theorem\tPlain (n)\tAblated (n)\t1d MDS r\t2d MDS r\t3d MDS r";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub smacof: bool,
    pub k_max: usize,
    pub seed: u64,
    pub responsibilities: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { smacof: false, k_max: proofspace::clustering::DEFAULT_K_MAX, seed: 0, responsibilities: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub theorem_id: String,
    pub plain_count: usize,
    pub ablated_count: usize,
    pub human_count: usize,
    #[serde(with = "proofspace::json::f17")]
    pub r_1d: f64,
    #[serde(with = "proofspace::json::f17")]
    pub r_2d: f64,
    #[serde(with = "proofspace::json::f17")]
    pub r_3d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{}\t{}\t{:.3}\t{:.3}\t{:.3}", r.theorem_id, r.plain_count, r.ablated_count, r.r_1d, r.r_2d, r.r_3d);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremAnalysis {
    pub row: ReportRow,
    pub solutions: Vec<LabeledSolution>,
    pub gmm: GmmModel,
}

pub fn analyze_theorem(theorem_id: &str, records: &[&ProofRecord], opts: &AnalyzeOptions) -> Result<TheoremAnalysis, CliError> {
    let d = corpus_distance_matrix(records)?;
    let proof_ids: Vec<String> = records.iter().map(|r| r.proof_id.clone()).collect();
    let conditions: Vec<Condition> = records.iter().map(|r| r.condition).collect();
    let smacof = opts.smacof.then_some(SmacofParams { max_iters: SMACOF_MAX_ITERS, tol: SMACOF_TOLERANCE });
    let solutions: Vec<LabeledSolution> = nested_embeddings(&d, MAX_DIMENSION, smacof)?
        .into_iter()
        .map(|solution| LabeledSolution { theorem_id: theorem_id.to_owned(), proof_ids: proof_ids.clone(), conditions: conditions.clone(), solution })
        .collect();
    let gmm = select_gmm(&solutions[1].solution.coordinates, opts.k_max, opts.seed)?;
    let count = |c: Condition| conditions.iter().filter(|&&x| x == c).count();
    let row = ReportRow {
        theorem_id: theorem_id.to_owned(),
        plain_count: count(Condition::Plain),
        ablated_count: count(Condition::Ablated),
        human_count: count(Condition::Human),
        r_1d: solutions[0].solution.r,
        r_2d: solutions[1].solution.r,
        r_3d: solutions[2].solution.r,
    };
    Ok(TheoremAnalysis { row, solutions, gmm })
}

pub fn analyze_corpus(corpus: &Corpus, opts: &AnalyzeOptions) -> Result<Vec<TheoremAnalysis>, CliError> {
    corpus.theorem_ids().into_iter().map(|t| analyze_theorem(t, &corpus.for_theorem(t), opts)).collect()
}

/// Directory holding one theorem's artifacts.
pub fn theorem_dir(out: &Path, theorem_id: &str) -> std::path::PathBuf {
    out.join(lean_safe(theorem_id))
}

/// Writes `<out>/<theorem>/{mds_k1,mds_k2,mds_k3,gmm}.json`,
/// `<out>/<theorem>/plot.svg` and `<out>/report.{tsv,json}`.
pub fn write_analysis(out: &Path, analyses: &[TheoremAnalysis], opts: &AnalyzeOptions) -> Result<Report, CliError> {
    for a in analyses {
        let dir = theorem_dir(out, &a.row.theorem_id);
        for s in &a.solutions {
            write_json(&dir.join(format!("mds_k{}.json", s.solution.k)), s)?;
        }
        let gmm = if opts.responsibilities { a.gmm.clone() } else { a.gmm.without_responsibilities() };
        write_json(&dir.join("gmm.json"), &gmm)?;
        let spec = PlotSpec::from_solution(&a.solutions[1], Some(&a.gmm))?;
        write_atomic(&dir.join("plot.svg"), render_svg(&spec).as_bytes())?;
    }
    let report = Report { rows: analyses.iter().map(|a| a.row.clone()).collect() };
    write_atomic(&out.join("report.tsv"), report.to_tsv().as_bytes())?;
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}
