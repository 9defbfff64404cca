//! Deterministic mock guesser: takes a ground-truth translation, applies
//! seeded mutations, and emits a [`GuessTuple`] with synthesized
//! block-diagonal attention. This stands in for a trained model so the
//! repair pipeline can be exercised end to end.

use super::{interchange_tokens, AttentionMatrix, GuessTuple, ProducerMeta};
use crate::asm::isa::{gpr_domain, imm_range, mnemonic_class};
use crate::asm::{
    print_line, AsmFunction, LabelRef, LineKind, Operand, Program, Radix, RefModifier, Reg,
};
use crate::blocks::{find_out_of_scope_refs, partition_spans, ScopeStatus};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationKind {
    ReplaceImmediate,
    ReplaceRegister,
    DropGlobalDefinition,
    RenameLabel,
    SwapMnemonicWithinClass,
}

impl MutationKind {
    pub fn from_str_opt(s: &str) -> Option<MutationKind> {
        match s {
            "replace-immediate" => Some(MutationKind::ReplaceImmediate),
            "replace-register" => Some(MutationKind::ReplaceRegister),
            "drop-global-definition" => Some(MutationKind::DropGlobalDefinition),
            "rename-label" => Some(MutationKind::RenameLabel),
            "swap-mnemonic-within-class" => Some(MutationKind::SwapMnemonicWithinClass),
            _ => None,
        }
    }
}

/// Mutations to apply, in order. Repeat a kind to apply it twice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MutationSpec {
    pub kinds: Vec<MutationKind>,
}

impl MutationSpec {
    pub fn parse(s: &str) -> Result<MutationSpec, String> {
        let mut kinds = Vec::new();
        for piece in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, count) = match piece.split_once('=') {
                Some((n, c)) => (
                    n.trim(),
                    c.trim().parse::<usize>().map_err(|e| e.to_string())?,
                ),
                None => (piece, 1),
            };
            let kind = MutationKind::from_str_opt(name)
                .ok_or_else(|| format!("unknown mutation kind: {name}"))?;
            kinds.extend(std::iter::repeat(kind).take(count));
        }
        Ok(MutationSpec { kinds })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MockError {
    #[error("mutation {0:?} has no applicable site in this function")]
    MutationInapplicable(MutationKind),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationSite {
    pub kind: MutationKind,
    /// Function-relative line index of the mutated token, when token-level.
    pub line: usize,
    /// Interchange token index given a low probability, when token-level.
    pub token: Option<usize>,
    pub original: String,
    pub mutated: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockOutcome {
    pub sites: Vec<MutationSite>,
    pub dropped_globals: Vec<String>,
    /// The mutated function actually emitted as the candidate.
    pub mutated_lines: usize,
}

/// Interchange index range of each line, including the trailing "\n" token.
pub fn line_ranges(tokens: &[String]) -> Vec<std::ops::RangeInclusive<usize>> {
    let mut ranges = Vec::new();
    let mut start = 0usize;
    for (i, t) in tokens.iter().enumerate() {
        if t == "\n" {
            ranges.push(start..=i);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        ranges.push(start..=tokens.len() - 1);
    }
    ranges
}

/// Probability assigned to mutated tokens; anything below gamma = 0.9 works.
const MUTATED_PROB: f64 = 0.5;

/// Build a mock guess for `truth_fn` (the ground-truth translation of
/// `input_fn`), applying `spec`'s mutations deterministically under `seed`.
///
/// Attention is synthesized block-diagonal from the span correspondence
/// between the input and the candidate (k-th span to k-th span when the
/// partitions agree in length, proportional per line otherwise), with
/// `noise` of each row's mass spread uniformly, then row-renormalized.
pub fn mock_guess(
    input_fn: &AsmFunction,
    truth_fn: &AsmFunction,
    truth_program: &Program,
    spec: &MutationSpec,
    seed: u64,
    rank: u32,
    noise: f64,
) -> Result<(GuessTuple, MockOutcome), MockError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = truth_fn.clone();
    let mut outcome = MockOutcome::default();

    for kind in &spec.kinds {
        apply_mutation(&mut work, truth_program, *kind, &mut rng, &mut outcome)?;
    }
    outcome.mutated_lines = work.lines.len();

    let tokens = interchange_tokens(&work);
    let mut probs = vec![1.0f64; tokens.len()];
    // Locate mutated tokens in the emitted stream and lower their
    // probability below the weak-guess threshold.
    let tf = crate::asm::tokenize_function(&work);
    let map = super::TokenMap::build(&tokens);
    for site in &mut outcome.sites {
        if site.token != Some(usize::MAX) {
            continue;
        }
        let line_span = tf.tokens_on_line(site.line);
        let found = (line_span.start..line_span.end)
            .find(|&i| tf.tokens[i].text == site.mutated)
            .map(|internal| map.from_internal[internal]);
        if let Some(idx) = found {
            probs[idx] = MUTATED_PROB;
            site.token = Some(idx);
        } else {
            site.token = None;
        }
    }

    let x_tokens = interchange_tokens(input_fn);
    let attention = synth_attention(input_fn, &work, &x_tokens, &tokens, noise, &mut rng);

    let preamble = emit_preamble(truth_program, &outcome.dropped_globals);

    let tuple = GuessTuple {
        input_id: truth_fn.name.clone(),
        rank,
        tokens,
        probs,
        attention,
        truncated: false,
        preamble: Some(preamble),
        producer: ProducerMeta {
            layer: None,
            head_aggregation: Some("mock-block-diagonal".into()),
        },
    };
    Ok((tuple, outcome))
}

fn emit_preamble(p: &Program, dropped: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip_data = false;
    for line in p.meta_lines() {
        match &line.kind {
            LineKind::Label(name) => {
                if dropped.iter().any(|d| d == name) {
                    skip_data = true;
                    continue;
                }
                skip_data = false;
                out.push(print_line(line));
            }
            LineKind::Directive { name, .. } => {
                let is_data = matches!(
                    name.as_str(),
                    ".string"
                        | ".asciz"
                        | ".ascii"
                        | ".word"
                        | ".xword"
                        | ".dword"
                        | ".quad"
                        | ".byte"
                        | ".zero"
                );
                if skip_data && is_data {
                    continue;
                }
                if !is_data {
                    skip_data = false;
                }
                out.push(print_line(line));
            }
            LineKind::Instruction(_) => out.push(print_line(line)),
        }
    }
    out
}

fn apply_mutation(
    work: &mut AsmFunction,
    truth_program: &Program,
    kind: MutationKind,
    rng: &mut ChaCha8Rng,
    outcome: &mut MockOutcome,
) -> Result<(), MockError> {
    let isa = work.isa;
    let inapplicable = || MockError::MutationInapplicable(kind);
    match kind {
        MutationKind::ReplaceImmediate => {
            let sites = solvable_sites(work, |instr| {
                instr
                    .operands
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| matches!(o, Operand::Immediate { .. }))
                    .map(|(i, _)| i)
                    .collect()
            });
            let &(line, op) = sites.choose(rng).ok_or_else(inapplicable)?;
            let instr = work.lines[line].instr().unwrap().clone();
            let old = instr.operands[op].as_immediate().unwrap();
            let range = imm_range(isa, &instr.mnemonic).unwrap_or((i64::MIN / 2, i64::MAX / 2));
            let mut new = old;
            for _ in 0..64 {
                let delta = rng.gen_range(1..=16i64) * if rng.gen_bool(0.5) { 1 } else { -1 };
                let candidate = old.saturating_add(delta).clamp(range.0, range.1);
                if candidate != old {
                    new = candidate;
                    break;
                }
            }
            if new == old {
                return Err(inapplicable());
            }
            set_operand(
                work,
                line,
                op,
                Operand::Immediate {
                    value: new,
                    radix: Radix::Dec,
                },
            );
            outcome.sites.push(MutationSite {
                kind,
                line,
                token: Some(usize::MAX),
                original: old.to_string(),
                mutated: new.to_string(),
            });
        }
        MutationKind::ReplaceRegister => {
            let sites = solvable_sites(work, |instr| {
                instr
                    .operands
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| matches!(o, Operand::Register(_)))
                    .map(|(i, _)| i)
                    .collect()
            });
            let &(line, op) = sites.choose(rng).ok_or_else(inapplicable)?;
            let instr = work.lines[line].instr().unwrap().clone();
            let old = instr.operands[op].as_register().unwrap().clone();
            let width = old
                .access(isa)
                .map(|a| a.width)
                .unwrap_or(crate::asm::Width::W64);
            let domain: Vec<&str> = gpr_domain(isa, width)
                .into_iter()
                .filter(|n| *n != old.name)
                .collect();
            let new = domain.choose(rng).ok_or_else(inapplicable)?.to_string();
            set_operand(work, line, op, Operand::reg(new.clone()));
            outcome.sites.push(MutationSite {
                kind,
                line,
                token: Some(usize::MAX),
                original: old.name,
                mutated: new,
            });
        }
        MutationKind::SwapMnemonicWithinClass => {
            let sites: Vec<usize> = {
                let (_, blocks) = partition_spans(work, 0);
                blocks
                    .iter()
                    .filter(|b| b.is_solvable)
                    .flat_map(|b| b.span.start_line..=b.span.end_line)
                    .filter(|&l| {
                        work.lines[l]
                            .instr()
                            .map(|i| mnemonic_class(isa, &i.mnemonic).len() >= 2)
                            .unwrap_or(false)
                    })
                    .collect()
            };
            let &line = sites.choose(rng).ok_or_else(inapplicable)?;
            let old = work.lines[line].instr().unwrap().mnemonic.clone();
            let class: Vec<&str> = mnemonic_class(isa, &old)
                .into_iter()
                .filter(|m| *m != old)
                .collect();
            let new = class.choose(rng).ok_or_else(inapplicable)?.to_string();
            if let LineKind::Instruction(i) = &mut work.lines[line].kind {
                i.mnemonic = new.clone();
            }
            outcome.sites.push(MutationSite {
                kind,
                line,
                token: Some(usize::MAX),
                original: old,
                mutated: new,
            });
        }
        MutationKind::RenameLabel => {
            let scope = find_out_of_scope_refs(truth_program);
            let func_index = truth_program
                .functions()
                .position(|f| f.name == work.name)
                .unwrap_or(0);
            let sites: Vec<(usize, usize, LabelRef)> = scope
                .entries
                .iter()
                .filter(|e| {
                    e.func_index == func_index
                        && e.status == ScopeStatus::GlobalDefined
                        && e.label.name.starts_with(".L")
                })
                .map(|e| (e.line_index, e.operand_index, e.label.clone()))
                .collect();
            let (line, op, old) = sites.choose(rng).ok_or_else(inapplicable)?.clone();
            let defined = truth_program.defined_labels();
            let fresh = (0..)
                .map(|k| format!(".LC9{k}"))
                .find(|n| !defined.contains(n.as_str()))
                .unwrap();
            set_operand(
                work,
                line,
                op,
                Operand::LabelRef(LabelRef {
                    name: fresh.clone(),
                    modifier: RefModifier::None,
                }),
            );
            outcome.sites.push(MutationSite {
                kind,
                line,
                token: Some(usize::MAX),
                original: old.to_string(),
                mutated: fresh,
            });
        }
        MutationKind::DropGlobalDefinition => {
            let scope = find_out_of_scope_refs(truth_program);
            let func_index = truth_program
                .functions()
                .position(|f| f.name == work.name)
                .unwrap_or(0);
            let mut labels: Vec<String> = scope
                .entries
                .iter()
                .filter(|e| {
                    e.func_index == func_index
                        && e.status == ScopeStatus::GlobalDefined
                        && e.label.name.starts_with(".L")
                        && !outcome.dropped_globals.contains(&e.label.name)
                })
                .map(|e| e.label.name.clone())
                .collect();
            labels.dedup();
            let label = labels.choose(rng).ok_or_else(inapplicable)?.clone();
            outcome.dropped_globals.push(label.clone());
            outcome.sites.push(MutationSite {
                kind,
                line: 0,
                token: None,
                original: label.clone(),
                mutated: String::new(),
            });
        }
    }
    Ok(())
}

/// (line, operand) sites within solvable pure blocks, selected by a
/// per-instruction operand filter. Destination and source positions are both
/// eligible.
fn solvable_sites(
    f: &AsmFunction,
    filter: impl Fn(&crate::asm::Instr) -> Vec<usize>,
) -> Vec<(usize, usize)> {
    let (_, blocks) = partition_spans(f, 0);
    let mut sites = Vec::new();
    for b in blocks.iter().filter(|b| b.is_solvable) {
        for line in b.span.start_line..=b.span.end_line {
            if let Some(instr) = f.lines[line].instr() {
                for op in filter(instr) {
                    sites.push((line, op));
                }
            }
        }
    }
    sites
}

fn set_operand(f: &mut AsmFunction, line: usize, op: usize, value: Operand) {
    if let LineKind::Instruction(i) = &mut f.lines[line].kind {
        i.operands[op] = value;
    }
}

/// Synthesize block-diagonal attention with `noise` mass spread uniformly.
fn synth_attention(
    input_fn: &AsmFunction,
    cand_fn: &AsmFunction,
    x_tokens: &[String],
    y_tokens: &[String],
    noise: f64,
    _rng: &mut ChaCha8Rng,
) -> AttentionMatrix {
    let rows = y_tokens.len();
    let cols = x_tokens.len();
    let mut m = AttentionMatrix::zeros(rows, cols);
    let x_lines = line_ranges(x_tokens);
    let y_lines = line_ranges(y_tokens);

    let (x_spans, _) = partition_spans(input_fn, 0);
    let (y_spans, _) = partition_spans(cand_fn, 0);

    // Interchange ranges per span; fall back to proportional lines when the
    // partitions disagree in length.
    let correspondence: Vec<(std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>)> =
        if x_spans.len() == y_spans.len() {
            y_spans
                .iter()
                .zip(&x_spans)
                .map(|(ys, xs)| {
                    (
                        span_interchange_range(&y_lines, ys.span.start_line, ys.span.end_line),
                        span_interchange_range(&x_lines, xs.span.start_line, xs.span.end_line),
                    )
                })
                .collect()
        } else {
            let ny = y_lines.len().max(1);
            let nx = x_lines.len().max(1);
            y_lines
                .iter()
                .enumerate()
                .map(|(j, yr)| {
                    let xi = (j * nx / ny).min(nx - 1);
                    (yr.clone(), x_lines[xi].clone())
                })
                .collect()
        };

    for (y_range, x_range) in &correspondence {
        let k = (x_range.end() - x_range.start() + 1) as f64;
        for r in y_range.clone() {
            for c in 0..cols {
                *m.at_mut(r, c) += noise / cols as f64;
            }
            for c in x_range.clone() {
                *m.at_mut(r, c) += (1.0 - noise) / k;
            }
        }
    }
    m.renormalize_rows();
    m
}

/// Interchange index range of lines `start..=end`, trailing newline included.
pub fn span_interchange_range(
    lines: &[std::ops::RangeInclusive<usize>],
    start_line: usize,
    end_line: usize,
) -> std::ops::RangeInclusive<usize> {
    let lo = *lines[start_line].start();
    let hi = *lines[end_line.min(lines.len() - 1)].end();
    lo..=hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;
    use crate::asm::Isa;

    const RV: &str = "\t.section\t.rodata\n.LC0:\n\t.string\t\"%d\\n\"\n\t.text\nmain:\n\taddi\tsp,sp,-16\n\tsd\tra,8(sp)\n\tli\ta5,6\n\tmulw\ta5,a5,a5\n\tmv\ta1,a5\n\tlla\ta0,.LC0\n\tcall\tprintf@plt\n\tli\ta0,0\n\tld\tra,8(sp)\n\taddi\tsp,sp,16\n\tjr\tra\n";

    fn setup() -> (Program, AsmFunction) {
        let p = parse_program(RV, Isa::Riscv64).unwrap();
        let f = p.functions().next().unwrap().clone();
        (p, f)
    }

    #[test]
    fn zero_mutations_is_exact_echo() {
        let (p, f) = setup();
        let (tuple, outcome) =
            mock_guess(&f, &f, &p, &MutationSpec::default(), 1, 1, 0.05).unwrap();
        assert!(outcome.sites.is_empty());
        assert_eq!(tuple.tokens, interchange_tokens(&f));
        assert!(tuple.probs.iter().all(|&p| p == 1.0));
        // Rows are stochastic.
        for r in 0..tuple.attention.rows {
            let sum: f64 = (0..tuple.attention.cols)
                .map(|c| tuple.attention.at(r, c))
                .sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn replace_immediate_one_token_differs_below_gamma() {
        let (p, f) = setup();
        let spec = MutationSpec {
            kinds: vec![MutationKind::ReplaceImmediate],
        };
        let (tuple, outcome) = mock_guess(&f, &f, &p, &spec, 7, 1, 0.05).unwrap();
        assert_eq!(outcome.sites.len(), 1);
        let clean = interchange_tokens(&f);
        let diff: Vec<usize> = (0..clean.len())
            .filter(|&i| clean[i] != tuple.tokens[i])
            .collect();
        assert_eq!(diff.len(), 1);
        assert!(tuple.probs[diff[0]] < 0.9);
        assert_eq!(outcome.sites[0].token, Some(diff[0]));
    }

    #[test]
    fn deterministic_under_seed() {
        let (p, f) = setup();
        let spec = MutationSpec {
            kinds: vec![MutationKind::ReplaceRegister],
        };
        let (a, _) = mock_guess(&f, &f, &p, &spec, 42, 1, 0.05).unwrap();
        let (b, _) = mock_guess(&f, &f, &p, &spec, 42, 1, 0.05).unwrap();
        assert_eq!(a, b);
        let (c, _) = mock_guess(&f, &f, &p, &spec, 43, 1, 0.05).unwrap();
        // Different seed may pick a different site/value.
        let _ = c;
    }

    #[test]
    fn drop_global_definition_creates_undefined_ref() {
        let (p, f) = setup();
        let spec = MutationSpec {
            kinds: vec![MutationKind::DropGlobalDefinition],
        };
        let (tuple, outcome) = mock_guess(&f, &f, &p, &spec, 3, 1, 0.05).unwrap();
        assert_eq!(outcome.dropped_globals, vec![".LC0".to_string()]);
        let preamble = tuple.preamble.unwrap();
        assert!(!preamble.iter().any(|l| l.contains(".LC0:")));
        assert!(!preamble.iter().any(|l| l.contains("%d")));
        // Candidate program (preamble + function) now has .LC0 undefined.
        let text = format!(
            "{}\n{}",
            preamble.join("\n"),
            super::super::reconstruct_text(&tuple.tokens)
        );
        let cand = parse_program(&text, Isa::Riscv64).unwrap();
        let scope = find_out_of_scope_refs(&cand);
        assert!(scope
            .entries
            .iter()
            .any(|e| e.label.name == ".LC0" && e.status == ScopeStatus::Undefined));
    }

    #[test]
    fn rename_label_flags_fresh_undefined_name() {
        let (p, f) = setup();
        let spec = MutationSpec {
            kinds: vec![MutationKind::RenameLabel],
        };
        let (tuple, outcome) = mock_guess(&f, &f, &p, &spec, 5, 1, 0.05).unwrap();
        assert_eq!(outcome.sites.len(), 1);
        let site = &outcome.sites[0];
        assert!(site.mutated.starts_with(".LC9"));
        assert!(tuple.tokens.iter().any(|t| t == &site.mutated));
    }

    #[test]
    fn inapplicable_mutation_errors() {
        let text = "main:\n\tret\n";
        let p = parse_program(text, Isa::Armv8).unwrap();
        let f = p.functions().next().unwrap().clone();
        let spec = MutationSpec {
            kinds: vec![MutationKind::ReplaceImmediate],
        };
        assert_eq!(
            mock_guess(&f, &f, &p, &spec, 1, 1, 0.05).unwrap_err(),
            MockError::MutationInapplicable(MutationKind::ReplaceImmediate)
        );
    }

    #[test]
    fn mutation_spec_parser() {
        let spec = MutationSpec::parse("replace-immediate=2, rename-label").unwrap();
        assert_eq!(
            spec.kinds,
            vec![
                MutationKind::ReplaceImmediate,
                MutationKind::ReplaceImmediate,
                MutationKind::RenameLabel
            ]
        );
        assert!(MutationSpec::parse("bogus").is_err());
    }
}
