//! Guesser-output ingestion: the candidate/alignment/error-mask stage.
//!
//! Candidates arrive through a line-delimited JSON interchange format, one
//! record per candidate. Token sequences use literal `"\n"` tokens as line
//! separators (the natural shape of LM output over assembly text); all other
//! tokens are mnemonics, operands, labels, or directive parts. Alignments
//! are extracted from the per-candidate attention matrix by aggregate
//! submatrix norm, and potential errors are marked from token probabilities
//! and scope analysis.

pub mod mock;

pub use mock::{mock_guess, MockError, MockOutcome, MutationKind, MutationSpec};

use crate::asm::{tokenize_function, AsmFunction, Isa, Program};
use crate::blocks::{ScopeReport, ScopeStatus, SubseqSpan};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GuessError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {record}: schema error: {reason}")]
    SchemaError { record: usize, reason: String },
    #[error("record {record}: shape error: {reason}")]
    ShapeError { record: usize, reason: String },
    #[error("empty span partition")]
    EmptyPartition,
}

/// Row-stochastic attention matrix of shape |y| × |x|, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl AttentionMatrix {
    pub fn zeros(rows: usize, cols: usize) -> AttentionMatrix {
        AttentionMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn renormalize_rows(&mut self) {
        for r in 0..self.rows {
            let sum: f64 = (0..self.cols).map(|c| self.at(r, c)).sum();
            if sum > 0.0 {
                for c in 0..self.cols {
                    *self.at_mut(r, c) /= sum;
                }
            }
        }
    }

    fn rows_stochastic(&self, tol: f64) -> bool {
        (0..self.rows).all(|r| {
            let sum: f64 = (0..self.cols).map(|c| self.at(r, c)).sum();
            (sum - 1.0).abs() <= tol
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProducerMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_aggregation: Option<String>,
}

/// One candidate translation with its attention and per-token probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessTuple {
    pub input_id: String,
    pub rank: u32,
    pub tokens: Vec<String>,
    pub probs: Vec<f64>,
    pub attention: AttentionMatrix,
    /// Producer hit its context limit while emitting this candidate.
    #[serde(default)]
    pub truncated: bool,
    /// Candidate program preamble (raw lines). When absent, the engine
    /// derives the output preamble from the input program.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preamble: Option<Vec<String>>,
    #[serde(default)]
    pub producer: ProducerMeta,
}

fn validate_tuple(t: &GuessTuple, record: usize) -> Result<(), GuessError> {
    if t.rank == 0 {
        return Err(GuessError::SchemaError {
            record,
            reason: "rank must be >= 1".into(),
        });
    }
    if t.probs.len() != t.tokens.len() {
        return Err(GuessError::SchemaError {
            record,
            reason: format!("{} tokens but {} probs", t.tokens.len(), t.probs.len()),
        });
    }
    if t.attention.data.len() != t.attention.rows * t.attention.cols {
        return Err(GuessError::ShapeError {
            record,
            reason: format!(
                "attention data length {} != {}x{}",
                t.attention.data.len(),
                t.attention.rows,
                t.attention.cols
            ),
        });
    }
    if t.attention.rows != t.tokens.len() {
        return Err(GuessError::ShapeError {
            record,
            reason: format!(
                "attention has {} rows for {} tokens",
                t.attention.rows,
                t.tokens.len()
            ),
        });
    }
    if !t.attention.rows_stochastic(1e-6) {
        return Err(GuessError::ShapeError {
            record,
            reason: "attention rows do not sum to 1 within 1e-6".into(),
        });
    }
    Ok(())
}

/// Load an interchange file: tuples grouped per input function, ordered by
/// rank, with at most `top_k` retained per input.
pub fn load_guesses(
    path: &Path,
    top_k: usize,
) -> Result<BTreeMap<String, Vec<GuessTuple>>, GuessError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut by_input: BTreeMap<String, Vec<GuessTuple>> = BTreeMap::new();
    for (record, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tuple: GuessTuple =
            serde_json::from_str(&line).map_err(|e| GuessError::SchemaError {
                record,
                reason: e.to_string(),
            })?;
        validate_tuple(&tuple, record)?;
        let entry = by_input.entry(tuple.input_id.clone()).or_default();
        if entry.iter().any(|t| t.rank == tuple.rank) {
            return Err(GuessError::SchemaError {
                record,
                reason: format!("duplicate rank {} for input {}", tuple.rank, tuple.input_id),
            });
        }
        entry.push(tuple);
    }
    for tuples in by_input.values_mut() {
        tuples.sort_by_key(|t| t.rank);
        tuples.truncate(top_k);
    }
    Ok(by_input)
}

pub fn save_guesses(path: &Path, tuples: &[GuessTuple]) -> Result<(), GuessError> {
    let mut file = std::fs::File::create(path)?;
    for t in tuples {
        let line = serde_json::to_string(t).expect("guess tuple serializes");
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Interchange token sequence of a function: operand-level tokens with a
/// literal "\n" after each line. This is the token table producers must
/// match for attention columns.
pub fn interchange_tokens(f: &AsmFunction) -> Vec<String> {
    let tf = tokenize_function(f);
    let mut out = Vec::new();
    let mut line = 0usize;
    for t in &tf.tokens {
        while t.line > line {
            out.push("\n".to_string());
            line += 1;
        }
        out.push(t.text.clone());
    }
    if !tf.tokens.is_empty() {
        out.push("\n".to_string());
    }
    out
}

/// Mapping between a candidate's interchange tokens and the internal tokens
/// of its parsed function.
#[derive(Debug, Clone)]
pub struct TokenMap {
    /// interchange index → internal token index (None for "\n" separators).
    pub to_internal: Vec<Option<usize>>,
    /// internal token index → interchange index.
    pub from_internal: Vec<usize>,
}

impl TokenMap {
    fn build(tokens: &[String]) -> TokenMap {
        let mut to_internal = Vec::with_capacity(tokens.len());
        let mut from_internal = Vec::new();
        let mut next = 0usize;
        for (i, t) in tokens.iter().enumerate() {
            if t == "\n" {
                to_internal.push(None);
            } else {
                to_internal.push(Some(next));
                from_internal.push(i);
                next += 1;
            }
        }
        TokenMap {
            to_internal,
            from_internal,
        }
    }

    /// Interchange index range (inclusive) covering an internal token span.
    pub fn span_to_interchange(&self, span: &SubseqSpan) -> std::ops::RangeInclusive<usize> {
        let lo = self.from_internal[span.start_token];
        let hi = self.from_internal[span.end_token];
        lo..=hi
    }
}

/// Reassemble candidate text from interchange tokens: lines split at "\n"
/// tokens; a lone `name:` token is a label line, a leading `.` token starts
/// a directive, anything else is mnemonic followed by operands.
pub fn reconstruct_text(tokens: &[String]) -> String {
    let mut out = String::new();
    for line in tokens.split(|t| t == "\n") {
        if line.is_empty() {
            continue;
        }
        let first = &line[0];
        if line.len() == 1 && first.ends_with(':') {
            out.push_str(first);
        } else if first.starts_with('.') {
            out.push('\t');
            out.push_str(first);
            if line.len() > 1 {
                out.push('\t');
                out.push_str(&line[1..].join(", "));
            }
        } else {
            out.push('\t');
            out.push_str(first);
            if line.len() > 1 {
                out.push('\t');
                out.push_str(&line[1..].join(", "));
            }
        }
        out.push('\n');
    }
    out
}

/// A candidate function reconstructed from interchange tokens and parsed.
#[derive(Debug, Clone)]
pub struct CandidateFunction {
    pub text: String,
    pub function: AsmFunction,
    pub map: TokenMap,
}

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error("candidate does not parse: {0}")]
    Parse(#[from] crate::asm::ParseError),
    #[error("candidate has no function body")]
    NoFunction,
    #[error("token count mismatch after reparse: {expected} vs {actual}")]
    TokenMismatch { expected: usize, actual: usize },
}

/// Parse a candidate token stream as a single function of `isa`.
pub fn reconstruct_candidate(
    tokens: &[String],
    isa: Isa,
) -> Result<CandidateFunction, CandidateError> {
    let text = reconstruct_text(tokens);
    let program = crate::asm::parse_program(&text, isa)?;
    let function = program
        .functions()
        .next()
        .cloned()
        .ok_or(CandidateError::NoFunction)?;
    let map = TokenMap::build(tokens);
    let tf = tokenize_function(&function);
    if tf.tokens.len() != map.from_internal.len() {
        return Err(CandidateError::TokenMismatch {
            expected: map.from_internal.len(),
            actual: tf.tokens.len(),
        });
    }
    Ok(CandidateFunction {
        text,
        function,
        map,
    })
}

/// Norm used to aggregate attention submatrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    Frobenius,
    Sum,
    Max,
}

impl NormKind {
    pub fn from_str_opt(s: &str) -> Option<NormKind> {
        match s {
            "frobenius" => Some(NormKind::Frobenius),
            "sum" => Some(NormKind::Sum),
            "max" => Some(NormKind::Max),
            _ => None,
        }
    }
}

/// Total alignment: for each output span, the index of the chosen input span
/// plus its aggregate score.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub map: Vec<(usize, f64)>,
}

fn submatrix_norm(
    m: &AttentionMatrix,
    rows: &std::ops::RangeInclusive<usize>,
    cols: &std::ops::RangeInclusive<usize>,
    norm: NormKind,
) -> f64 {
    let mut acc = 0.0f64;
    for r in rows.clone() {
        for c in cols.clone() {
            let v = m.at(r, c);
            match norm {
                NormKind::Frobenius => acc += v * v,
                NormKind::Sum => acc += v,
                NormKind::Max => acc = acc.max(v),
            }
        }
    }
    match norm {
        NormKind::Frobenius => acc.sqrt(),
        _ => acc,
    }
}

/// Align each output span to the input span with the highest aggregate
/// attention norm; ties break toward the earliest input span.
pub fn extract_alignment(
    m: &AttentionMatrix,
    x_spans: &[std::ops::RangeInclusive<usize>],
    y_spans: &[std::ops::RangeInclusive<usize>],
    norm: NormKind,
) -> Result<Alignment, GuessError> {
    if x_spans.is_empty() || y_spans.is_empty() {
        return Err(GuessError::EmptyPartition);
    }
    let mut map = Vec::with_capacity(y_spans.len());
    for ys in y_spans {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, xs) in x_spans.iter().enumerate() {
            let score = submatrix_norm(m, ys, xs, norm);
            if score > best.1 {
                best = (i, score);
            }
        }
        map.push(best);
    }
    Ok(Alignment { map })
}

/// Per-token error flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFlag {
    None,
    LowConfidence,
    OutOfScopeRef,
}

/// Error mask over a candidate's interchange tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMask {
    pub flags: Vec<ErrorFlag>,
}

impl ErrorMask {
    pub fn any_flagged(&self) -> bool {
        self.flags.iter().any(|f| *f != ErrorFlag::None)
    }

    pub fn flagged_in(&self, range: std::ops::RangeInclusive<usize>) -> Vec<usize> {
        range
            .filter(|&i| self.flags.get(i).copied().unwrap_or(ErrorFlag::None) != ErrorFlag::None)
            .collect()
    }
}

/// Mark potentially erroneous tokens: low-confidence predictions
/// (probability below gamma) and unresolved references found by the scope
/// scan of the candidate program. An out-of-scope flag takes precedence
/// over low confidence. Newline separator tokens are never flagged.
pub fn mark_errors(
    tokens: &[String],
    probs: &[f64],
    gamma: f64,
    candidate: &CandidateFunction,
    candidate_func_index: usize,
    scope: &ScopeReport,
) -> ErrorMask {
    let mut flags = vec![ErrorFlag::None; tokens.len()];
    for (i, (t, p)) in tokens.iter().zip(probs).enumerate() {
        if t != "\n" && *p < gamma {
            flags[i] = ErrorFlag::LowConfidence;
        }
    }
    let tf = tokenize_function(&candidate.function);
    for entry in &scope.entries {
        if entry.func_index != candidate_func_index || entry.status != ScopeStatus::Undefined {
            continue;
        }
        let line_tokens = tf.tokens_on_line(entry.line_index);
        let internal = line_tokens.start + 1 + entry.operand_index;
        if internal < line_tokens.end {
            let interchange = candidate.map.from_internal[internal];
            flags[interchange] = ErrorFlag::OutOfScopeRef;
        }
    }
    ErrorMask { flags }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;
    use crate::blocks::find_out_of_scope_refs;

    fn arm_function(text: &str) -> AsmFunction {
        parse_program(text, Isa::Armv8)
            .unwrap()
            .functions()
            .next()
            .unwrap()
            .clone()
    }

    #[test]
    fn interchange_tokens_round_trip_through_reconstruct() {
        let f = arm_function("main:\n\tmov\tw0, 3\n\tadd\tw0, w0, w1\n.L2:\n\tret\n");
        let tokens = interchange_tokens(&f);
        assert_eq!(tokens[0], "main:");
        assert_eq!(tokens[1], "\n");
        let cand = reconstruct_candidate(&tokens, Isa::Armv8).unwrap();
        assert_eq!(cand.function, f);
        // Mapping is a bijection between non-newline positions and internal
        // token indices.
        let internal: Vec<usize> = cand.map.to_internal.iter().flatten().copied().collect();
        assert_eq!(internal, (0..internal.len()).collect::<Vec<_>>());
    }

    #[test]
    fn load_rejects_mismatched_probs() {
        let tuple = GuessTuple {
            input_id: "main".into(),
            rank: 1,
            tokens: vec!["ret".into()],
            probs: vec![1.0, 1.0],
            attention: AttentionMatrix {
                rows: 1,
                cols: 1,
                data: vec![1.0],
            },
            truncated: false,
            preamble: None,
            producer: ProducerMeta::default(),
        };
        assert!(matches!(
            validate_tuple(&tuple, 0),
            Err(GuessError::SchemaError { .. })
        ));
    }

    #[test]
    fn load_rejects_bad_shape() {
        let tuple = GuessTuple {
            input_id: "main".into(),
            rank: 1,
            tokens: vec!["ret".into()],
            probs: vec![1.0],
            attention: AttentionMatrix {
                rows: 1,
                cols: 5,
                data: vec![0.2; 4],
            },
            truncated: false,
            preamble: None,
            producer: ProducerMeta::default(),
        };
        assert!(matches!(
            validate_tuple(&tuple, 0),
            Err(GuessError::ShapeError { .. })
        ));
    }

    #[test]
    fn top_k_truncation() {
        let dir = std::env::temp_dir().join(format!("asmsketch-guess-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("many.jsonl");
        let tuples: Vec<GuessTuple> = (1..=150)
            .map(|rank| GuessTuple {
                input_id: "main".into(),
                rank,
                tokens: vec!["ret".into()],
                probs: vec![1.0],
                attention: AttentionMatrix {
                    rows: 1,
                    cols: 1,
                    data: vec![1.0],
                },
                truncated: false,
                preamble: None,
                producer: ProducerMeta::default(),
            })
            .collect();
        save_guesses(&path, &tuples).unwrap();
        let loaded = load_guesses(&path, 100).unwrap();
        assert_eq!(loaded["main"].len(), 100);
        assert_eq!(loaded["main"][0].rank, 1);
        assert_eq!(loaded["main"][99].rank, 100);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn block_diagonal_alignment_is_identity() {
        let mut m = AttentionMatrix::zeros(4, 4);
        for i in 0..4 {
            *m.at_mut(i, i) = 1.0;
        }
        let spans = vec![0..=1usize, 2..=3usize];
        let a = extract_alignment(&m, &spans, &spans, NormKind::Frobenius).unwrap();
        assert_eq!(a.map[0].0, 0);
        assert_eq!(a.map[1].0, 1);
    }

    #[test]
    fn alignment_hand_computed_norms() {
        // M = [[0.3, 0.7]]; spans x: {[0,0],[1,1]}, y: {[0,0]}.
        let m = AttentionMatrix {
            rows: 1,
            cols: 2,
            data: vec![0.3, 0.7],
        };
        let x_spans = vec![0..=0usize, 1..=1usize];
        let y_spans = vec![0..=0usize];
        let a = extract_alignment(&m, &x_spans, &y_spans, NormKind::Frobenius).unwrap();
        assert_eq!(a.map[0].0, 1);
        assert!((a.map[0].1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn uniform_attention_ties_to_earliest() {
        let m = AttentionMatrix {
            rows: 2,
            cols: 4,
            data: vec![0.25; 8],
        };
        let x_spans = vec![0..=1usize, 2..=3usize];
        let y_spans = vec![0..=0usize, 1..=1usize];
        let a = extract_alignment(&m, &x_spans, &y_spans, NormKind::Frobenius).unwrap();
        assert!(a.map.iter().all(|(i, _)| *i == 0));
    }

    #[test]
    fn empty_partition_is_an_error() {
        let m = AttentionMatrix::zeros(1, 1);
        assert!(matches!(
            extract_alignment(&m, &[], &[0..=0], NormKind::Sum),
            Err(GuessError::EmptyPartition)
        ));
    }

    #[test]
    fn row_scaling_invariance_of_argmax() {
        // Scaling a full row then renormalizing leaves the argmax unchanged.
        let mut m = AttentionMatrix {
            rows: 1,
            cols: 4,
            data: vec![0.1, 0.2, 0.3, 0.4],
        };
        let x_spans = vec![0..=1usize, 2..=3usize];
        let y_spans = vec![0..=0usize];
        let before = extract_alignment(&m, &x_spans, &y_spans, NormKind::Frobenius).unwrap();
        for c in 0..4 {
            *m.at_mut(0, c) *= 3.0;
        }
        m.renormalize_rows();
        let after = extract_alignment(&m, &x_spans, &y_spans, NormKind::Frobenius).unwrap();
        assert_eq!(before.map[0].0, after.map[0].0);
    }

    #[test]
    fn mark_errors_low_confidence_and_oos() {
        let text = "main:\n\tlla\ta0,.LC9\n\tli\ta1,5\n\tret\n";
        let program = parse_program(text, Isa::Riscv64).unwrap();
        let f = program.functions().next().unwrap().clone();
        let tokens = interchange_tokens(&f);
        let cand = reconstruct_candidate(&tokens, Isa::Riscv64).unwrap();
        let cand_program = parse_program(&cand.text, Isa::Riscv64).unwrap();
        let scope = find_out_of_scope_refs(&cand_program);
        let mut probs = vec![1.0; tokens.len()];
        // Flag the "5" in li a1,5 as low confidence.
        let five = tokens.iter().position(|t| t == "5").unwrap();
        probs[five] = 0.85;
        let mask = mark_errors(&tokens, &probs, 0.9, &cand, 0, &scope);
        assert_eq!(mask.flags[five], ErrorFlag::LowConfidence);
        let lc9 = tokens.iter().position(|t| t == ".LC9").unwrap();
        assert_eq!(mask.flags[lc9], ErrorFlag::OutOfScopeRef);
        // All-resolved, all-confident mask is empty.
        let clean = mark_errors(&tokens, &vec![1.0; tokens.len()], 0.9, &cand, 0, &{
            let text2 = "main:\n\tli\ta1,5\n\tret\n";
            let p2 = parse_program(text2, Isa::Riscv64).unwrap();
            find_out_of_scope_refs(&p2)
        });
        assert!(!clean.any_flagged());
    }

    #[test]
    fn gamma_monotonicity() {
        let text = "main:\n\tli\ta1,5\n\tret\n";
        let program = parse_program(text, Isa::Riscv64).unwrap();
        let f = program.functions().next().unwrap().clone();
        let tokens = interchange_tokens(&f);
        let cand = reconstruct_candidate(&tokens, Isa::Riscv64).unwrap();
        let scope = find_out_of_scope_refs(&program);
        let probs: Vec<f64> = (0..tokens.len()).map(|i| 0.1 * (i as f64 + 1.0)).collect();
        let low = mark_errors(&tokens, &probs, 0.3, &cand, 0, &scope);
        let high = mark_errors(&tokens, &probs, 0.8, &cand, 0, &scope);
        for (l, h) in low.flags.iter().zip(&high.flags) {
            if *l == ErrorFlag::LowConfidence {
                assert_eq!(*h, ErrorFlag::LowConfidence);
            }
        }
    }
}
