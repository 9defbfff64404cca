//! Function splitting, pure-basic-block extraction, block register dataflow,
//! and scope analysis.
//!
//! A pure basic block is a maximal run of instruction lines with a single
//! entry and exit and no memory or stack management: branches, calls,
//! returns, memory-operand instructions, stack-pointer writes, label
//! definitions, directives, and opaque instructions all end the current run
//! and belong to no block.

use crate::asm::isa::{
    instr_kind, is_solvable_mnemonic, is_stack_pointer, operand_roles, sets_flags,
};
use crate::asm::{
    tokenize_function, AsmFunction, AsmLine, Instr, Isa, LabelRef, LineKind, Operand, Program,
    Reg,
};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlockError {
    #[error("unsupported instruction: {mnemonic}")]
    UnsupportedInstruction { mnemonic: String },
    #[error("undefined label: {label}")]
    UndefinedLabel { label: String },
}

/// A contiguous token/line span within one function. Line and token indices
/// are function-relative, 0-based, and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubseqSpan {
    pub func_index: usize,
    pub start_line: usize,
    pub end_line: usize,
    pub start_token: usize,
    pub end_token: usize,
}

impl SubseqSpan {
    pub fn contains_line(&self, line: usize) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }

    pub fn contains_token(&self, token: usize) -> bool {
        (self.start_token..=self.end_token).contains(&token)
    }
}

/// A single-entry, single-exit, memory-free instruction span with its
/// input/output register sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PureBlock {
    pub span: SubseqSpan,
    pub lines: Vec<AsmLine>,
    /// Registers read before written, in first-read order.
    pub input_registers: Vec<Reg>,
    /// Registers written, in first-write order (deduplicated by cell).
    pub output_registers: Vec<Reg>,
    pub global_refs: Vec<LabelRef>,
    /// All instructions belong to the arithmetic/logic/move subset.
    pub is_solvable: bool,
    /// Some instruction in the block sets the ARMv8 NZCV flags.
    pub sets_flags: bool,
}

/// A data definition attached to a label: its directive lines and, for
/// numeric `.word`/`.xword`/`.dword` data, the decoded 64-bit value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalDefinition {
    pub label: String,
    pub directive_lines: Vec<AsmLine>,
    pub decoded_value: Option<u64>,
    pub shape: DataShape,
}

/// Directive shape of a decoded global, so re-encoding is bit-exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataShape {
    /// Single 64-bit directive (.xword/.dword/.quad).
    Double64(&'static str),
    /// Single 32-bit .word, zero-extended.
    Word,
    /// Two .word directives, little-endian (low then high).
    WordPair,
    Other,
}

/// Return the program's functions. The concatenation of the returned
/// functions with the interleaved metadata runs reconstructs the program.
pub fn split_functions(p: &Program) -> Vec<AsmFunction> {
    p.functions().cloned().collect()
}

fn instr_is_boundary(isa: Isa, instr: &Instr) -> bool {
    if !instr.known {
        return true;
    }
    let kind = match instr_kind(isa, &instr.mnemonic) {
        Some(k) => k,
        None => return true,
    };
    if kind.is_control() || kind.is_memory() {
        return true;
    }
    if instr
        .operands
        .iter()
        .any(|o| matches!(o, Operand::Memory(_)))
    {
        return true;
    }
    // Stack management: any write to the stack pointer.
    let roles = operand_roles(isa, &instr.mnemonic);
    for &w in roles.writes {
        if let Some(Operand::Register(r)) = instr.operands.get(w) {
            if let Some(acc) = r.access(isa) {
                if is_stack_pointer(isa, acc.cell) {
                    return true;
                }
            }
        }
    }
    false
}

/// True when this line ends (and is excluded from) any pure block.
pub fn is_boundary_line(isa: Isa, line: &AsmLine) -> bool {
    match &line.kind {
        LineKind::Instruction(i) => instr_is_boundary(isa, i),
        _ => true,
    }
}

/// Registers read by an instruction, in operand order, and registers written.
/// Memory bases count as reads (with writeback they are also writes), and a
/// movk destination is read before it is written.
pub fn reg_reads_writes(isa: Isa, instr: &Instr) -> (Vec<Reg>, Vec<Reg>) {
    let roles = operand_roles(isa, &instr.mnemonic);
    let mut reads = Vec::new();
    let mut writes = Vec::new();
    for (i, op) in instr.operands.iter().enumerate() {
        let written = roles.writes.contains(&i);
        match op {
            Operand::Register(r) => {
                if written {
                    if roles.dest_also_read {
                        reads.push(r.clone());
                    }
                    writes.push(r.clone());
                } else {
                    reads.push(r.clone());
                }
            }
            Operand::Memory(m) => {
                reads.push(m.base.clone());
                if m.mode != crate::asm::AddrMode::Offset {
                    writes.push(m.base.clone());
                }
            }
            _ => {}
        }
    }
    (reads, writes)
}

/// Free registers of an instruction sequence: registers read before they are
/// assigned to, in first-read order. The hardwired zero register is constant
/// and never free.
pub fn free_registers_of_lines(isa: Isa, lines: &[AsmLine]) -> Result<Vec<Reg>, BlockError> {
    let mut written: BTreeSet<crate::asm::RegCell> = BTreeSet::new();
    let mut free: Vec<Reg> = Vec::new();
    let mut free_cells: BTreeSet<crate::asm::RegCell> = BTreeSet::new();
    for line in lines {
        let instr = match line.instr() {
            Some(i) => i,
            None => continue,
        };
        if !instr.known {
            return Err(BlockError::UnsupportedInstruction {
                mnemonic: instr.mnemonic.clone(),
            });
        }
        let (reads, writes) = reg_reads_writes(isa, instr);
        for r in reads {
            let acc = match r.access(isa) {
                Some(a) => a,
                None => continue,
            };
            if acc.cell == crate::asm::RegCell::Zero {
                continue;
            }
            if !written.contains(&acc.cell) && free_cells.insert(acc.cell) {
                free.push(r);
            }
        }
        for w in writes {
            if let Some(acc) = w.access(isa) {
                written.insert(acc.cell);
            }
        }
    }
    Ok(free)
}

/// Free registers of a pure block (its input registers, recomputed).
pub fn free_registers(b: &PureBlock, isa: Isa) -> Result<Vec<Reg>, BlockError> {
    free_registers_of_lines(isa, &b.lines)
}

fn written_registers(isa: Isa, lines: &[AsmLine]) -> Vec<Reg> {
    let mut seen: BTreeSet<crate::asm::RegCell> = BTreeSet::new();
    let mut out = Vec::new();
    for line in lines {
        if let Some(instr) = line.instr() {
            let (_, writes) = reg_reads_writes(isa, instr);
            for w in writes {
                if let Some(acc) = w.access(isa) {
                    if acc.cell == crate::asm::RegCell::Zero {
                        continue;
                    }
                    if seen.insert(acc.cell) {
                        out.push(w);
                    }
                }
            }
        }
    }
    out
}

fn line_global_refs(line: &AsmLine) -> Vec<LabelRef> {
    match line.instr() {
        Some(instr) => instr
            .operands
            .iter()
            .filter_map(|o| o.referenced_label())
            .cloned()
            .collect(),
        None => Vec::new(),
    }
}

/// Extract every maximal pure basic block of a function. Boundary lines
/// (control flow, memory, stack writes, labels, directives, opaque
/// instructions) belong to no block; every other instruction line belongs to
/// exactly one.
pub fn extract_pure_blocks(f: &AsmFunction, func_index: usize) -> Vec<PureBlock> {
    let tf = tokenize_function(f);
    let mut blocks = Vec::new();
    let mut run: Vec<usize> = Vec::new();
    let flush = |run: &mut Vec<usize>, blocks: &mut Vec<PureBlock>| {
        if run.is_empty() {
            return;
        }
        let start_line = run[0];
        let end_line = *run.last().unwrap();
        let lines: Vec<AsmLine> = run.iter().map(|&i| f.lines[i].clone()).collect();
        let start_token = tf.tokens_on_line(start_line).start;
        let end_token = tf.tokens_on_line(end_line).end - 1;
        let input_registers = free_registers_of_lines(f.isa, &lines).unwrap_or_default();
        let output_registers = written_registers(f.isa, &lines);
        let global_refs = lines.iter().flat_map(line_global_refs).collect();
        let is_solvable = lines.iter().all(|l| match l.instr() {
            Some(i) => i.known && is_solvable_mnemonic(f.isa, &i.mnemonic),
            None => false,
        });
        let block_sets_flags = lines.iter().any(|l| match l.instr() {
            Some(i) => sets_flags(f.isa, &i.mnemonic),
            None => false,
        });
        blocks.push(PureBlock {
            span: SubseqSpan {
                func_index,
                start_line,
                end_line,
                start_token,
                end_token,
            },
            lines,
            input_registers,
            output_registers,
            global_refs,
            is_solvable,
            sets_flags: block_sets_flags,
        });
        run.clear();
    };
    for (idx, line) in f.lines.iter().enumerate() {
        if line.is_instruction() && !is_boundary_line(f.isa, line) {
            run.push(idx);
        } else {
            flush(&mut run, &mut blocks);
        }
    }
    flush(&mut run, &mut blocks);
    blocks
}

/// One span of the function partition used for alignment: a pure block or a
/// single boundary line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpan {
    pub span: SubseqSpan,
    /// Index into the block list when this span is a pure block.
    pub block: Option<usize>,
}

/// Partition every line (and therefore every token) of a function into
/// non-overlapping spans: each pure block is one span and each remaining
/// line is its own span.
pub fn partition_spans(f: &AsmFunction, func_index: usize) -> (Vec<PartitionSpan>, Vec<PureBlock>) {
    let tf = tokenize_function(f);
    let blocks = extract_pure_blocks(f, func_index);
    let mut by_start: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        by_start.insert(b.span.start_line, i);
    }
    let mut spans = Vec::new();
    let mut line = 0;
    while line < f.lines.len() {
        if let Some(&bi) = by_start.get(&line) {
            spans.push(PartitionSpan {
                span: blocks[bi].span,
                block: Some(bi),
            });
            line = blocks[bi].span.end_line + 1;
        } else {
            let toks = tf.tokens_on_line(line);
            spans.push(PartitionSpan {
                span: SubseqSpan {
                    func_index,
                    start_line: line,
                    end_line: line,
                    start_token: toks.start,
                    end_token: toks.end.saturating_sub(1),
                },
                block: None,
            });
            line += 1;
        }
    }
    (spans, blocks)
}

/// Resolution status of a label reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeStatus {
    /// Defined within the same function.
    Local,
    /// Defined elsewhere in the program (data or another function).
    GlobalDefined,
    /// Not defined in the file but plausibly resolved by the linker.
    External,
    /// A file-local (`.L`-prefixed) name with no definition anywhere.
    Undefined,
}

/// One label reference found in a function body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeEntry {
    pub func_index: usize,
    /// Function-relative line index.
    pub line_index: usize,
    /// Operand position of the reference within its instruction.
    pub operand_index: usize,
    pub label: LabelRef,
    pub status: ScopeStatus,
}

/// Scope report over a whole program: every label reference in every
/// function, with its resolution status.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScopeReport {
    pub entries: Vec<ScopeEntry>,
}

impl ScopeReport {
    pub fn refs_in_span<'a>(
        &'a self,
        span: &'a SubseqSpan,
    ) -> impl Iterator<Item = &'a ScopeEntry> {
        self.entries
            .iter()
            .filter(move |e| e.func_index == span.func_index && span.contains_line(e.line_index))
    }

    pub fn has_undefined(&self) -> bool {
        self.entries
            .iter()
            .any(|e| e.status == ScopeStatus::Undefined)
    }
}

/// Names defined by the program: labels, `.comm` objects, and function names.
fn defined_names(p: &Program) -> BTreeSet<String> {
    let mut names: BTreeSet<String> = p
        .all_lines()
        .filter_map(|l| l.label().map(str::to_string))
        .collect();
    for line in p.all_lines() {
        if let Some((".comm" | ".lcomm", args)) = line.directive() {
            if let Some(name) = args.split(',').next() {
                names.insert(name.trim().to_string());
            }
        }
    }
    names
}

/// Find every label reference in every function and classify its resolution
/// status. `.L`-prefixed names are file-local by convention, so an undefined
/// `.L` name can never be external.
pub fn find_out_of_scope_refs(p: &Program) -> ScopeReport {
    let program_defined = defined_names(p);
    let mut entries = Vec::new();
    for (func_index, f) in p.functions().enumerate() {
        let local_defined: BTreeSet<&str> = f.lines.iter().filter_map(|l| l.label()).collect();
        for (line_index, line) in f.lines.iter().enumerate() {
            let instr = match line.instr() {
                Some(i) => i,
                None => continue,
            };
            for (operand_index, op) in instr.operands.iter().enumerate() {
                let label = match op.referenced_label() {
                    Some(l) => l.clone(),
                    None => continue,
                };
                let status = if local_defined.contains(label.name.as_str()) {
                    ScopeStatus::Local
                } else if program_defined.contains(&label.name) {
                    ScopeStatus::GlobalDefined
                } else if label.name.starts_with(".L") {
                    ScopeStatus::Undefined
                } else {
                    ScopeStatus::External
                };
                entries.push(ScopeEntry {
                    func_index,
                    line_index,
                    operand_index,
                    label,
                    status,
                });
            }
        }
    }
    ScopeReport { entries }
}

const DATA_DIRECTIVES: &[&str] = &[
    ".string", ".asciz", ".ascii", ".word", ".xword", ".dword", ".quad", ".byte", ".hword",
    ".half", ".short", ".zero", ".2byte", ".4byte", ".8byte",
];

fn parse_data_int(s: &str) -> Option<u64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let v: u64 = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()?
    } else {
        body.parse::<u64>().ok()?
    };
    Some(if neg { v.wrapping_neg() } else { v })
}

/// Find the definition of `label` by a string-matching search: the label line
/// plus the run of data directives that follows it. Numeric `.word`/`.xword`/
/// `.dword` data is decoded to a 64-bit value.
pub fn lookup_global(p: &Program, label: &str) -> Result<GlobalDefinition, BlockError> {
    let all: Vec<&AsmLine> = p.all_lines().collect();
    let pos = all
        .iter()
        .position(|l| l.label() == Some(label))
        .ok_or_else(|| BlockError::UndefinedLabel {
            label: label.to_string(),
        })?;
    let mut directive_lines = Vec::new();
    for line in &all[pos + 1..] {
        match line.directive() {
            Some((name, _)) if DATA_DIRECTIVES.contains(&name) => {
                directive_lines.push((*line).clone());
            }
            _ => break,
        }
    }
    let (decoded_value, shape) = decode_directives(&directive_lines);
    Ok(GlobalDefinition {
        label: label.to_string(),
        directive_lines,
        decoded_value,
        shape,
    })
}

fn decode_directives(lines: &[AsmLine]) -> (Option<u64>, DataShape) {
    let dirs: Vec<(&str, &str)> = lines.iter().filter_map(|l| l.directive()).collect();
    match dirs.as_slice() {
        [(name @ (".xword" | ".dword" | ".quad"), args)] => {
            let static_name = match *name {
                ".xword" => ".xword",
                ".dword" => ".dword",
                _ => ".quad",
            };
            match parse_data_int(args) {
                Some(v) => (Some(v), DataShape::Double64(static_name)),
                None => (None, DataShape::Other),
            }
        }
        [(".word", args)] => match parse_data_int(args) {
            Some(v) => (Some(v as u32 as u64), DataShape::Word),
            None => (None, DataShape::Other),
        },
        [(".word", lo), (".word", hi)] => match (parse_data_int(lo), parse_data_int(hi)) {
            (Some(lo), Some(hi)) => (
                Some((lo as u32 as u64) | ((hi as u32 as u64) << 32)),
                DataShape::WordPair,
            ),
            _ => (None, DataShape::Other),
        },
        _ => (None, DataShape::Other),
    }
}

/// Re-encode a decoded value in the shape it was decoded from. The result
/// reproduces the original directive operands bit-exactly.
pub fn encode_value(value: u64, shape: DataShape) -> Option<Vec<String>> {
    match shape {
        DataShape::Double64(name) => Some(vec![format!("{name} 0x{value:x}")]),
        DataShape::Word => (value >> 32 == 0).then(|| vec![format!(".word {value}")]),
        DataShape::WordPair => Some(vec![
            format!(".word {}", value as u32),
            format!(".word {}", (value >> 32) as u32),
        ]),
        DataShape::Other => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{parse_program, print_program, Segment};

    fn arm_fn(body: &str) -> AsmFunction {
        let text = format!("f:\n{body}");
        parse_program(&text, Isa::Armv8)
            .unwrap()
            .functions()
            .next()
            .unwrap()
            .clone()
    }

    fn riscv_fn(body: &str) -> AsmFunction {
        let text = format!("f:\n{body}");
        parse_program(&text, Isa::Riscv64)
            .unwrap()
            .functions()
            .next()
            .unwrap()
            .clone()
    }

    #[test]
    fn ret_is_boundary() {
        let f = arm_fn("\tadd\tw1, w0, w2\n\tlsl\tw1, w1, 2\n\tret\n");
        let blocks = extract_pure_blocks(&f, 0);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].span.start_line, 1);
        assert_eq!(blocks[0].span.end_line, 2);
        assert!(blocks[0].is_solvable);
    }

    #[test]
    fn call_splits_blocks() {
        let f = arm_fn("\tmov\tw0, 1\n\tbl\tprintf\n\tmov\tw0, 0\n");
        let blocks = extract_pure_blocks(&f, 0);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].lines.len(), 1);
        assert_eq!(blocks[1].lines.len(), 1);
    }

    #[test]
    fn memory_operand_line_forms_no_block() {
        let f = arm_fn("\tldr\tx1, [x0]\n");
        let blocks = extract_pure_blocks(&f, 0);
        assert!(blocks.is_empty());
    }

    #[test]
    fn stack_pointer_write_is_boundary() {
        let f = riscv_fn("\taddi\tsp,sp,-48\n\tli\ta0,1\n");
        let blocks = extract_pure_blocks(&f, 0);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].lines[0].instr().unwrap().mnemonic, "li");
    }

    #[test]
    fn free_registers_read_before_write() {
        let f = arm_fn("\tadd\tw1, w0, w2\n\tmov\tw0, w1\n\tret\n");
        let blocks = extract_pure_blocks(&f, 0);
        let names: Vec<_> = blocks[0]
            .input_registers
            .iter()
            .map(|r| r.name.as_str())
            .collect();
        assert_eq!(names, vec!["w0", "w2"]);
    }

    #[test]
    fn constant_only_block_has_no_inputs() {
        let f = arm_fn("\tmov\tw0, 5\n\tret\n");
        let blocks = extract_pure_blocks(&f, 0);
        assert!(blocks[0].input_registers.is_empty());
        let outs: Vec<_> = blocks[0]
            .output_registers
            .iter()
            .map(|r| r.name.as_str())
            .collect();
        assert_eq!(outs, vec!["w0"]);
    }

    #[test]
    fn written_then_read_is_not_free() {
        let f = riscv_fn("\tmv\ta5, a4\n\taddw\ta5, a5, a4\n\tret\n");
        let blocks = extract_pure_blocks(&f, 0);
        let names: Vec<_> = blocks[0]
            .input_registers
            .iter()
            .map(|r| r.name.as_str())
            .collect();
        assert_eq!(names, vec!["a4"]);
    }

    #[test]
    fn w_write_covers_x_read() {
        // Writing w0 zeroes the high half of x0, so a later x0 read is
        // fully determined and x0 is not free.
        let f = arm_fn("\tmov\tw0, 1\n\tlsl\tx1, x0, 2\n\tret\n");
        let blocks = extract_pure_blocks(&f, 0);
        assert!(blocks[0].input_registers.is_empty());
    }

    #[test]
    fn movk_reads_its_destination() {
        let f = arm_fn("\tmovk\tw1, 0x8888, lsl 16\n\tret\n");
        let blocks = extract_pure_blocks(&f, 0);
        let names: Vec<_> = blocks[0]
            .input_registers
            .iter()
            .map(|r| r.name.as_str())
            .collect();
        assert_eq!(names, vec!["w1"]);
    }

    #[test]
    fn opaque_instruction_is_boundary() {
        let f = arm_fn("\tmov\tw0, 1\n\tfrobnicate\tw0\n\tmov\tw1, 2\n\tret\n");
        let blocks = extract_pure_blocks(&f, 0);
        assert_eq!(blocks.len(), 2);
        let err = free_registers_of_lines(Isa::Armv8, &f.lines[2..3]).unwrap_err();
        assert_eq!(
            err,
            BlockError::UnsupportedInstruction {
                mnemonic: "frobnicate".into()
            }
        );
    }

    #[test]
    fn partition_covers_all_lines() {
        let f = arm_fn("\tmov\tw0, 1\n\tbl\tprintf\n.L2:\n\tadd\tw0, w0, 1\n\tret\n");
        let (spans, blocks) = partition_spans(&f, 0);
        let mut covered = vec![false; f.lines.len()];
        for s in &spans {
            for l in s.span.start_line..=s.span.end_line {
                assert!(!covered[l], "line {l} covered twice");
                covered[l] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
        assert_eq!(blocks.len(), 2);
    }

    #[test]
    fn scope_statuses() {
        let text = "\t.section\t.rodata\n.LC0:\n\t.string\t\"x\"\n\t.text\nmain:\n\tlla\ta0,.LC0\n\tcall\tprintf@plt\n\tlla\ta0,.LC9\n\tbeq\ta0,zero,.L3\n.L3:\n\tret\n";
        let p = parse_program(text, Isa::Riscv64).unwrap();
        let report = find_out_of_scope_refs(&p);
        let by_label: BTreeMap<&str, ScopeStatus> = report
            .entries
            .iter()
            .map(|e| (e.label.name.as_str(), e.status))
            .collect();
        assert_eq!(by_label[".LC0"], ScopeStatus::GlobalDefined);
        assert_eq!(by_label["printf"], ScopeStatus::External);
        assert_eq!(by_label[".LC9"], ScopeStatus::Undefined);
        assert_eq!(by_label[".L3"], ScopeStatus::Local);
    }

    #[test]
    fn lookup_global_decodes_xword() {
        let text = ".LC8:\n\t.xword\t0x4014000000000000\n";
        let p = parse_program(text, Isa::Armv8).unwrap();
        let g = lookup_global(&p, ".LC8").unwrap();
        assert_eq!(g.decoded_value, Some(0x4014000000000000));
        let re = encode_value(g.decoded_value.unwrap(), g.shape).unwrap();
        assert_eq!(re, vec![".xword 0x4014000000000000".to_string()]);
    }

    #[test]
    fn lookup_global_string_has_no_decoded_value() {
        let text = ".LC1:\n\t.string\t\"hi\"\n";
        let p = parse_program(text, Isa::Riscv64).unwrap();
        let g = lookup_global(&p, ".LC1").unwrap();
        assert_eq!(g.decoded_value, None);
        assert_eq!(g.directive_lines.len(), 1);
    }

    #[test]
    fn lookup_global_word_pair_little_endian() {
        let text = ".LC2:\n\t.word\t305419896\n\t.word\t2596069104\n";
        let p = parse_program(text, Isa::Riscv64).unwrap();
        let g = lookup_global(&p, ".LC2").unwrap();
        // high * 2^32 + low
        assert_eq!(g.decoded_value, Some((2596069104u64 << 32) | 305419896u64));
        let re = encode_value(g.decoded_value.unwrap(), g.shape).unwrap();
        assert_eq!(
            re,
            vec![".word 305419896".to_string(), ".word 2596069104".to_string()]
        );
    }

    #[test]
    fn lookup_global_undefined() {
        let p = parse_program("main:\n\tret\n", Isa::Armv8).unwrap();
        assert_eq!(
            lookup_global(&p, ".LC9").unwrap_err(),
            BlockError::UndefinedLabel {
                label: ".LC9".into()
            }
        );
    }

    #[test]
    fn split_functions_reconstructs_program() {
        let text = "\t.text\nmain:\n\tmov\tw0, 0\n\tret\n\t.size\tmain, .-main\nfoo:\n\tret\n";
        let p = parse_program(text, Isa::Armv8).unwrap();
        let funcs = split_functions(&p);
        assert_eq!(funcs.len(), 2);
        // Rebuild by walking segments; function bodies come from the split.
        let mut rebuilt = String::new();
        let mut fi = 0;
        for seg in &p.segments {
            match seg {
                Segment::Meta(lines) => {
                    for l in lines {
                        rebuilt.push_str(&crate::asm::print_line(l));
                        rebuilt.push('\n');
                    }
                }
                Segment::Function(_) => {
                    rebuilt.push_str(&crate::asm::print_function(&funcs[fi]));
                    fi += 1;
                }
            }
        }
        assert_eq!(rebuilt, print_program(&p));
    }
}
