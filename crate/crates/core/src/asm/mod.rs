//! Assembly intermediate representation, parsers, and printers for the
//! supported ARMv8 and RISC-V subsets.
//!
//! Programs parse into an ordered list of segments (metadata runs and
//! functions); printing a parsed program and re-parsing it yields a
//! structurally equal program. Structural equality ignores raw source text
//! and source line numbers, so whitespace canonicalization is invisible to
//! it.

pub mod isa;
mod parse;
mod print;
mod tokens;

pub use isa::{Isa, RegAccess, RegCell, Width};
pub use parse::{parse_program, ParseError};
pub use print::{print_function, print_line, print_program};
pub use tokens::{tokenize_function, Token, TokenizedFunction};

use isa::lookup_register;
use std::fmt;

/// A register operand, stored as written. `access()` resolves it against an
/// ISA to a storage cell plus access width.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Reg {
    pub name: String,
}

impl Reg {
    pub fn new(name: impl Into<String>) -> Reg {
        Reg { name: name.into() }
    }

    pub fn access(&self, isa: Isa) -> Option<RegAccess> {
        lookup_register(isa, &self.name)
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Relocation modifier attached to a label reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefModifier {
    None,
    /// `sym@plt`
    Plt,
    /// `:got:sym`
    Got,
    /// `:lo12:sym`
    Lo12,
    /// `#:got_lo12:sym` (memory-offset position) or `:got_lo12:sym`
    GotLo12,
}

/// A reference to a label or symbol, with optional relocation modifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelRef {
    pub name: String,
    pub modifier: RefModifier,
}

impl LabelRef {
    pub fn plain(name: impl Into<String>) -> LabelRef {
        LabelRef {
            name: name.into(),
            modifier: RefModifier::None,
        }
    }
}

impl fmt::Display for LabelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.modifier {
            RefModifier::None => write!(f, "{}", self.name),
            RefModifier::Plt => write!(f, "{}@plt", self.name),
            RefModifier::Got => write!(f, ":got:{}", self.name),
            RefModifier::Lo12 => write!(f, ":lo12:{}", self.name),
            RefModifier::GotLo12 => write!(f, "#:got_lo12:{}", self.name),
        }
    }
}

/// Addressing mode of an ARMv8 memory operand. RISC-V offsets are always
/// plain `Offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AddrMode {
    Offset,
    /// `[base, off]!`
    PreIndex,
    /// `[base], off`
    PostIndex,
}

/// Offset part of a memory operand: an immediate or a relocated symbol
/// (`[x0, #:got_lo12:sym]`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MemOffset {
    Imm(i64),
    Sym(LabelRef),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MemOperand {
    pub base: Reg,
    pub offset: MemOffset,
    pub mode: AddrMode,
}

/// Display radix recorded at parse time so printing reproduces the source
/// spelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Radix {
    Dec,
    Hex,
}

/// Shift kind in an ARMv8 shifted-immediate operand (`movk w1, 0x8888, lsl 16`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShiftKind {
    Lsl,
    Lsr,
    Asr,
}

impl fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShiftKind::Lsl => "lsl",
            ShiftKind::Lsr => "lsr",
            ShiftKind::Asr => "asr",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Register(Reg),
    Immediate { value: i64, radix: Radix },
    /// Float literal on fmov, kept as both bit pattern and source text.
    FloatImmediate { bits: u64, text: String },
    LabelRef(LabelRef),
    Memory(MemOperand),
    Shift { kind: ShiftKind, amount: u8 },
}

impl Operand {
    pub fn imm(value: i64) -> Operand {
        Operand::Immediate {
            value,
            radix: Radix::Dec,
        }
    }

    pub fn reg(name: impl Into<String>) -> Operand {
        Operand::Register(Reg::new(name))
    }

    pub fn as_register(&self) -> Option<&Reg> {
        match self {
            Operand::Register(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_immediate(&self) -> Option<i64> {
        match self {
            Operand::Immediate { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn as_label_ref(&self) -> Option<&LabelRef> {
        match self {
            Operand::LabelRef(l) => Some(l),
            _ => None,
        }
    }

    /// Label referenced anywhere in this operand, including memory offsets.
    pub fn referenced_label(&self) -> Option<&LabelRef> {
        match self {
            Operand::LabelRef(l) => Some(l),
            Operand::Memory(m) => match &m.offset {
                MemOffset::Sym(l) => Some(l),
                MemOffset::Imm(_) => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Register(r) => write!(f, "{r}"),
            Operand::Immediate { value, radix } => match radix {
                Radix::Dec => write!(f, "{value}"),
                Radix::Hex => {
                    if *value < 0 {
                        write!(f, "-0x{:x}", value.unsigned_abs())
                    } else {
                        write!(f, "0x{value:x}")
                    }
                }
            },
            Operand::FloatImmediate { text, .. } => f.write_str(text),
            Operand::LabelRef(l) => write!(f, "{l}"),
            Operand::Memory(m) => {
                let off = match &m.offset {
                    MemOffset::Imm(v) => {
                        if *v == 0 && m.mode == AddrMode::Offset {
                            String::new()
                        } else {
                            v.to_string()
                        }
                    }
                    MemOffset::Sym(l) => l.to_string(),
                };
                match m.mode {
                    AddrMode::Offset if off.is_empty() => write!(f, "[{}]", m.base),
                    AddrMode::Offset => write!(f, "[{}, {}]", m.base, off),
                    AddrMode::PreIndex => write!(f, "[{}, {}]!", m.base, off),
                    AddrMode::PostIndex => write!(f, "[{}], {}", m.base, off),
                }
            }
            Operand::Shift { kind, amount } => write!(f, "{kind} {amount}"),
        }
    }
}

/// One parsed instruction. Unknown-but-identifier-shaped mnemonics become
/// opaque instructions (`known == false`) whose operand text is preserved
/// verbatim; opaque instructions force block boundaries downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instr {
    pub mnemonic: String,
    pub operands: Vec<Operand>,
    pub known: bool,
    /// Verbatim operand text for opaque instructions.
    pub raw_operands: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineKind {
    /// `name:`
    Label(String),
    /// `.name args` with args preserved verbatim.
    Directive { name: String, args: String },
    Instruction(Instr),
}

/// One source line of assembly. Equality is structural: `raw` and
/// `source_index` are excluded so canonical reprinting compares equal.
#[derive(Debug, Clone, Eq)]
pub struct AsmLine {
    pub kind: LineKind,
    pub raw: String,
    pub source_index: usize,
}

impl PartialEq for AsmLine {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl AsmLine {
    pub fn new(kind: LineKind, raw: impl Into<String>, source_index: usize) -> AsmLine {
        AsmLine {
            kind,
            raw: raw.into(),
            source_index,
        }
    }

    pub fn instr(&self) -> Option<&Instr> {
        match &self.kind {
            LineKind::Instruction(i) => Some(i),
            _ => None,
        }
    }

    pub fn is_instruction(&self) -> bool {
        matches!(self.kind, LineKind::Instruction(_))
    }

    pub fn label(&self) -> Option<&str> {
        match &self.kind {
            LineKind::Label(n) => Some(n),
            _ => None,
        }
    }

    pub fn directive(&self) -> Option<(&str, &str)> {
        match &self.kind {
            LineKind::Directive { name, args } => Some((name, args)),
            _ => None,
        }
    }
}

/// A single function: its entry label line followed by its body, through the
/// trailing `.size` directive when one is present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmFunction {
    pub name: String,
    pub lines: Vec<AsmLine>,
    pub isa: Isa,
}

impl AsmFunction {
    /// Indices of instruction lines within `lines`.
    pub fn instruction_indices(&self) -> Vec<usize> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_instruction())
            .map(|(i, _)| i)
            .collect()
    }
}

/// A program segment: either a run of non-function lines (file directives,
/// rodata, alignment) or a function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Meta(Vec<AsmLine>),
    Function(AsmFunction),
}

/// A parsed assembly program: ordered segments over one ISA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub isa: Isa,
    pub segments: Vec<Segment>,
}

impl Program {
    pub fn functions(&self) -> impl Iterator<Item = &AsmFunction> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Function(f) => Some(f),
            Segment::Meta(_) => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&AsmFunction> {
        self.functions().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut AsmFunction> {
        self.segments.iter_mut().find_map(|s| match s {
            Segment::Function(f) if f.name == name => Some(f),
            _ => None,
        })
    }

    /// Leading metadata lines before the first function.
    pub fn preamble(&self) -> &[AsmLine] {
        match self.segments.first() {
            Some(Segment::Meta(lines)) => lines,
            _ => &[],
        }
    }

    /// All non-function lines in program order.
    pub fn meta_lines(&self) -> impl Iterator<Item = &AsmLine> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Meta(lines) => Some(lines.iter()),
                Segment::Function(_) => None,
            })
            .flatten()
    }

    /// All lines of the program in order.
    pub fn all_lines(&self) -> impl Iterator<Item = &AsmLine> {
        self.segments.iter().flat_map(|s| match s {
            Segment::Meta(lines) => lines.iter(),
            Segment::Function(f) => f.lines.iter(),
        })
    }

    /// Labels defined anywhere in the program (functions and data).
    pub fn defined_labels(&self) -> std::collections::BTreeSet<&str> {
        self.all_lines().filter_map(|l| l.label()).collect()
    }
}
