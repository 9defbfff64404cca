//! Sketch construction and solving.
//!
//! A sketch is a candidate pure-block token sequence with flagged positions
//! replaced by typed holes. Semantic holes are solved by CEGIS against the
//! aligned input block ([`cegis`]); reference holes are solved by the
//! dedicated global-reference solver ([`globals`]).

pub mod cegis;
pub mod globals;

pub use cegis::{cegis_solve, SolveConfig, SolveResult, SolveStatus};
pub use globals::{resolve_global_reference, GlobalSlot, Required, Resolution};

use crate::asm::isa::{gpr_domain, imm_range, instr_kind, mnemonic_class, InstrKind};
use crate::asm::{
    AsmLine, Instr, Isa, LabelRef, LineKind, Operand, Radix, Reg, ShiftKind, Width,
};
use crate::blocks::{lookup_global, PartitionSpan, PureBlock, ScopeStatus, SubseqSpan};
use crate::semantics::smt::{SymInstr, SymOperand};
use crate::semantics::BlockSpec;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SketchError {
    #[error("flagged mnemonic `{0}` has no functional class to range over")]
    HoleOnMnemonic(String),
    #[error("hole {0} has no assignment")]
    IncompleteAssignment(u32),
    #[error("assignment for hole {hole} is not a valid {expected}: {text}")]
    BadAssignment {
        hole: u32,
        expected: &'static str,
        text: String,
    },
    #[error("aligned span is not repairable: {0}")]
    UnalignableSpan(String),
    #[error("joint hole domain exceeds the enumeration budget")]
    DomainExplosion,
    #[error("flagged token cannot be holed: {0}")]
    UnholeableToken(String),
    #[error("input-side entity has no bitvector decoding and no textual definition to copy")]
    UndecodableRequirement,
}

/// Domain a hole ranges over, inferred from the operand slot it occupies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HoleDomain {
    /// Plain immediate slot: intersection of the mnemonic's legal encoding
    /// range with the search window.
    Immediate { lo: i64, hi: i64 },
    /// Shift-amount slot of a shift instruction.
    ShiftAmount { lo: i64, hi: i64 },
    /// General-register slot; the class preserves access width.
    Register { class: Vec<String> },
    /// Mnemonic slot; same-arity functional class.
    Mnemonic { class: Vec<String> },
    /// Shift-spec slot (`lsl 16` on movk): the legal shift amounts.
    ShiftSpec { choices: Vec<u8> },
    /// Label slot; solved by the global-reference solver, not enumeration.
    Label,
}

impl HoleDomain {
    /// Number of candidate values, for enumeration budgeting. Label domains
    /// are not enumerable.
    pub fn size(&self) -> Option<u64> {
        match self {
            HoleDomain::Immediate { lo, hi } | HoleDomain::ShiftAmount { lo, hi } => {
                Some((hi - lo + 1) as u64)
            }
            HoleDomain::Register { class } | HoleDomain::Mnemonic { class } => {
                Some(class.len() as u64)
            }
            HoleDomain::ShiftSpec { choices } => Some(choices.len() as u64),
            HoleDomain::Label => None,
        }
    }

    /// Values in domain order.
    pub fn values(&self) -> Vec<String> {
        match self {
            HoleDomain::Immediate { lo, hi } | HoleDomain::ShiftAmount { lo, hi } => {
                (*lo..=*hi).map(|v| v.to_string()).collect()
            }
            HoleDomain::Register { class } | HoleDomain::Mnemonic { class } => class.clone(),
            HoleDomain::ShiftSpec { choices } => {
                choices.iter().map(|a| format!("lsl {a}")).collect()
            }
            HoleDomain::Label => Vec::new(),
        }
    }

    pub fn contains(&self, text: &str) -> bool {
        match self {
            HoleDomain::Immediate { lo, hi } | HoleDomain::ShiftAmount { lo, hi } => text
                .parse::<i64>()
                .map(|v| (*lo..=*hi).contains(&v))
                .unwrap_or(false),
            HoleDomain::Register { class } | HoleDomain::Mnemonic { class } => {
                class.iter().any(|c| c == text)
            }
            HoleDomain::ShiftSpec { choices } => choices
                .iter()
                .any(|a| text == format!("lsl {a}") || text == a.to_string()),
            HoleDomain::Label => true,
        }
    }
}

/// Default immediate search window; values outside it are reachable only
/// through counterexample-driven constraint propagation.
pub const IMM_WINDOW: (i64, i64) = (-4096, 4095);

/// One line of a sketch: a possibly-holed mnemonic plus possibly-holed
/// operands.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchLine {
    pub mnemonic: MnemonicSlot,
    pub operands: Vec<SymOperand>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MnemonicSlot {
    Concrete(String),
    Hole(u32),
}

/// Token-level view of a sketch position.
#[derive(Debug, Clone, PartialEq)]
pub enum SketchToken {
    Text(String),
    Hole(u32),
}

impl std::fmt::Display for SketchToken {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SketchToken::Text(t) => f.write_str(t),
            SketchToken::Hole(id) => write!(f, "?{id}"),
        }
    }
}

/// A candidate block with typed holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    pub isa: Isa,
    pub tokens: Vec<SketchToken>,
    pub domains: BTreeMap<u32, HoleDomain>,
    pub origin: SubseqSpan,
    pub lines: Vec<SketchLine>,
}

impl Sketch {
    pub fn hole_ids(&self) -> Vec<u32> {
        self.domains.keys().copied().collect()
    }

    /// Holes whose domain is `Label` (global-reference route).
    pub fn label_holes(&self) -> Vec<u32> {
        self.domains
            .iter()
            .filter(|(_, d)| matches!(d, HoleDomain::Label))
            .map(|(id, _)| *id)
            .collect()
    }

    /// Whether the block sets ARMv8 flags under any assignment (flag-setting
    /// mnemonics are never swapped into a non-setting class or vice versa).
    pub fn sets_flags(&self) -> bool {
        self.lines.iter().any(|l| match &l.mnemonic {
            MnemonicSlot::Concrete(m) => crate::asm::isa::sets_flags(self.isa, m),
            MnemonicSlot::Hole(_) => false,
        })
    }
}

/// A hole-to-token mapping.
pub type HoleAssignment = BTreeMap<u32, String>;

/// Element position within a block: line index (block-relative) and element
/// index (0 = mnemonic, k>0 = operand k-1).
pub type FlaggedElement = (usize, usize);

/// Build a sketch from a candidate block's lines by replacing flagged
/// elements with holes. Domains are inferred from the operand slot each
/// flagged token occupies.
pub fn make_sketch(
    isa: Isa,
    lines: &[AsmLine],
    flagged: &[FlaggedElement],
    origin: SubseqSpan,
) -> Result<Sketch, SketchError> {
    let mut sketch_lines = Vec::with_capacity(lines.len());
    let mut domains = BTreeMap::new();
    let mut next_hole = 0u32;
    let mut tokens = Vec::new();

    for (li, line) in lines.iter().enumerate() {
        let instr = match line.instr() {
            Some(i) => i,
            None => {
                return Err(SketchError::UnalignableSpan(
                    "sketch lines must be instructions".into(),
                ))
            }
        };
        let mnemonic_flagged = flagged.contains(&(li, 0));
        let mnemonic = if mnemonic_flagged {
            let class = mnemonic_class(isa, &instr.mnemonic);
            if class.len() < 2 {
                return Err(SketchError::HoleOnMnemonic(instr.mnemonic.clone()));
            }
            let id = next_hole;
            next_hole += 1;
            domains.insert(
                id,
                HoleDomain::Mnemonic {
                    class: class.into_iter().map(String::from).collect(),
                },
            );
            tokens.push(SketchToken::Hole(id));
            MnemonicSlot::Hole(id)
        } else {
            tokens.push(SketchToken::Text(instr.mnemonic.clone()));
            MnemonicSlot::Concrete(instr.mnemonic.clone())
        };

        let mut operands = Vec::with_capacity(instr.operands.len());
        for (oi, op) in instr.operands.iter().enumerate() {
            if flagged.contains(&(li, oi + 1)) {
                let id = next_hole;
                next_hole += 1;
                domains.insert(id, operand_domain(isa, instr, oi, op)?);
                tokens.push(SketchToken::Hole(id));
                operands.push(SymOperand::Hole(id));
            } else {
                tokens.push(SketchToken::Text(op.to_string()));
                operands.push(SymOperand::Concrete(op.clone()));
            }
        }
        sketch_lines.push(SketchLine { mnemonic, operands });
    }

    Ok(Sketch {
        isa,
        tokens,
        domains,
        origin,
        lines: sketch_lines,
    })
}

fn shift_amount_bound(isa: Isa, instr: &Instr) -> i64 {
    match isa {
        Isa::Riscv64 => {
            if instr.mnemonic.ends_with('w') {
                31
            } else {
                63
            }
        }
        Isa::Armv8 => {
            let dest_w = instr
                .operands
                .first()
                .and_then(Operand::as_register)
                .and_then(|r| r.access(isa))
                .map(|a| a.width == Width::W32)
                .unwrap_or(false);
            if dest_w {
                31
            } else {
                63
            }
        }
    }
}

fn operand_domain(
    isa: Isa,
    instr: &Instr,
    operand_index: usize,
    op: &Operand,
) -> Result<HoleDomain, SketchError> {
    let shift_mnemonics = [
        "lsl", "lsr", "asr", "sll", "slli", "sllw", "slliw", "srl", "srli", "srlw", "srliw",
        "sra", "srai", "sraw", "sraiw",
    ];
    match op {
        Operand::Immediate { .. } => {
            if shift_mnemonics.contains(&instr.mnemonic.as_str()) && operand_index == 2 {
                Ok(HoleDomain::ShiftAmount {
                    lo: 0,
                    hi: shift_amount_bound(isa, instr),
                })
            } else {
                let range = imm_range(isa, &instr.mnemonic).unwrap_or(IMM_WINDOW);
                Ok(HoleDomain::Immediate {
                    lo: range.0.max(IMM_WINDOW.0),
                    hi: range.1.min(IMM_WINDOW.1),
                })
            }
        }
        Operand::Register(r) => {
            let width = r.access(isa).map(|a| a.width).unwrap_or(Width::W64);
            Ok(HoleDomain::Register {
                class: gpr_domain(isa, width)
                    .into_iter()
                    .map(String::from)
                    .collect(),
            })
        }
        Operand::LabelRef(_) | Operand::FloatImmediate { .. } => Ok(HoleDomain::Label),
        Operand::Shift { .. } => Ok(HoleDomain::ShiftSpec {
            choices: vec![0, 16, 32, 48],
        }),
        Operand::Memory(_) => Err(SketchError::UnholeableToken(
            "memory operands are excluded from pure blocks".into(),
        )),
    }
}

fn operand_from_text(
    domain: &HoleDomain,
    hole: u32,
    text: &str,
) -> Result<Operand, SketchError> {
    let bad = |expected: &'static str| SketchError::BadAssignment {
        hole,
        expected,
        text: text.to_string(),
    };
    match domain {
        HoleDomain::Immediate { .. } | HoleDomain::ShiftAmount { .. } => text
            .parse::<i64>()
            .map(|value| Operand::Immediate {
                value,
                radix: Radix::Dec,
            })
            .map_err(|_| bad("integer")),
        HoleDomain::Register { .. } => Ok(Operand::Register(Reg::new(text))),
        HoleDomain::ShiftSpec { .. } => {
            let amount = text
                .strip_prefix("lsl ")
                .unwrap_or(text)
                .parse::<u8>()
                .map_err(|_| bad("shift spec"))?;
            Ok(Operand::Shift {
                kind: ShiftKind::Lsl,
                amount,
            })
        }
        HoleDomain::Label => Ok(Operand::LabelRef(LabelRef::plain(text))),
        HoleDomain::Mnemonic { .. } => Err(bad("mnemonic slots are not operands")),
    }
}

/// Instantiate a sketch into concrete lines under a total assignment.
pub fn instantiate(s: &Sketch, phi: &HoleAssignment) -> Result<Vec<AsmLine>, SketchError> {
    let mut out = Vec::with_capacity(s.lines.len());
    for line in &s.lines {
        let mnemonic = match &line.mnemonic {
            MnemonicSlot::Concrete(m) => m.clone(),
            MnemonicSlot::Hole(id) => phi
                .get(id)
                .cloned()
                .ok_or(SketchError::IncompleteAssignment(*id))?,
        };
        let mut operands = Vec::with_capacity(line.operands.len());
        for op in &line.operands {
            match op {
                SymOperand::Concrete(o) => operands.push(o.clone()),
                SymOperand::Hole(id) => {
                    let text = phi
                        .get(id)
                        .ok_or(SketchError::IncompleteAssignment(*id))?;
                    let domain = &s.domains[id];
                    operands.push(operand_from_text(domain, *id, text)?);
                }
            }
        }
        let raw = format!(
            "{mnemonic} {}",
            operands
                .iter()
                .map(|o| o.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
        out.push(AsmLine::new(
            LineKind::Instruction(Instr {
                mnemonic,
                operands,
                known: true,
                raw_operands: None,
            }),
            raw,
            0,
        ));
    }
    Ok(out)
}

/// Apply an assignment at the token level: holes substituted, everything
/// else unchanged.
pub fn apply_assignment(s: &Sketch, phi: &HoleAssignment) -> Result<Vec<String>, SketchError> {
    s.tokens
        .iter()
        .map(|t| match t {
            SketchToken::Text(t) => Ok(t.clone()),
            SketchToken::Hole(id) => phi
                .get(id)
                .cloned()
                .ok_or(SketchError::IncompleteAssignment(*id)),
        })
        .collect()
}

/// A block correctness specification extracted from the aligned input span,
/// with referenced global values inlined to complete its semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecBlock {
    pub block: BlockSpec,
    /// The lines can run on the interpreter (solvable pure block).
    pub executable: bool,
    /// Decoded values of global-defined references in the span.
    pub inlined_globals: BTreeMap<String, u64>,
    /// Textual definitions for references without a bitvector decoding.
    pub textual_globals: BTreeMap<String, crate::blocks::GlobalDefinition>,
    /// fmov-style float literal bit patterns appearing in the span.
    pub float_literals: Vec<u64>,
}

impl SpecBlock {
    /// The bitvector value the output side must materialize, when the span
    /// pins one down: a float literal, or a single decodable global.
    pub fn required_value(&self) -> Option<u64> {
        if let Some(&v) = self.float_literals.first() {
            return Some(v);
        }
        if self.inlined_globals.len() == 1 {
            return self.inlined_globals.values().next().copied();
        }
        None
    }
}

/// Build the correctness specification from an aligned input span: the
/// span's block (when it is one) plus inlined global values.
pub fn build_spec(
    x_program: &crate::asm::Program,
    x_fn: &crate::asm::AsmFunction,
    span: &PartitionSpan,
    blocks: &[PureBlock],
    scope: &crate::blocks::ScopeReport,
) -> Result<SpecBlock, SketchError> {
    let lines: Vec<AsmLine> = (span.span.start_line..=span.span.end_line)
        .map(|i| x_fn.lines[i].clone())
        .collect();
    if lines.is_empty() {
        return Err(SketchError::UnalignableSpan("empty aligned span".into()));
    }

    let mut inlined = BTreeMap::new();
    let mut textual = BTreeMap::new();
    let mut floats = Vec::new();
    for line in &lines {
        if let Some(instr) = line.instr() {
            for op in &instr.operands {
                if let Operand::FloatImmediate { bits, .. } = op {
                    floats.push(*bits);
                }
                if let Some(l) = op.referenced_label() {
                    let defined = scope.entries.iter().any(|e| {
                        e.label.name == l.name
                            && matches!(
                                e.status,
                                ScopeStatus::GlobalDefined | ScopeStatus::Local
                            )
                    });
                    if defined {
                        if let Ok(def) = lookup_global(x_program, &l.name) {
                            match def.decoded_value {
                                Some(v) => {
                                    inlined.insert(l.name.clone(), v);
                                }
                                None => {
                                    if !def.directive_lines.is_empty() {
                                        textual.insert(l.name.clone(), def);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    match span.block {
        Some(bi) => {
            let b = &blocks[bi];
            Ok(SpecBlock {
                block: BlockSpec::from_block(x_fn.isa, b),
                executable: b.is_solvable,
                inlined_globals: inlined,
                textual_globals: textual,
                float_literals: floats,
            })
        }
        None => {
            // Boundary span: carries reference semantics but no executable
            // block.
            let input_registers =
                crate::blocks::free_registers_of_lines(x_fn.isa, &lines).unwrap_or_default();
            Ok(SpecBlock {
                block: BlockSpec {
                    isa: x_fn.isa,
                    lines,
                    input_registers,
                    output_registers: Vec::new(),
                },
                executable: false,
                inlined_globals: inlined,
                textual_globals: textual,
                float_literals: floats,
            })
        }
    }
}
