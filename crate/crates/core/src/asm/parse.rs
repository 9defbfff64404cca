//! GNU-assembler-syntax parser for the supported subsets.
//!
//! The parser is deliberately forgiving: unknown directives are preserved
//! verbatim, and unknown-but-identifier-shaped mnemonics become opaque
//! instructions rather than errors, so real compiler output never aborts
//! parsing. Only lines matching no grammar production at all are rejected.

use super::isa::{instr_kind, lookup_register};
use super::{
    AddrMode, AsmFunction, AsmLine, Instr, Isa, LabelRef, LineKind, MemOffset, MemOperand,
    Operand, Program, Radix, RefModifier, Reg, Segment, ShiftKind,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: unparsable line: {text:?}")]
    UnparsableLine { line: usize, text: String },
}

/// Parse GNU-assembler source text into a structured [`Program`].
pub fn parse_program(text: &str, isa: Isa) -> Result<Program, ParseError> {
    let mut lines = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let stripped = strip_comment(raw_line, isa);
        let trimmed = stripped.trim();
        if trimmed.is_empty() {
            continue;
        }
        parse_statements(trimmed, idx, isa, &mut lines)?;
    }
    Ok(structure_program(lines, isa))
}

/// Strip the line comment (`//` on AArch64, `#` on RISC-V), ignoring comment
/// starters inside double-quoted string literals.
fn strip_comment(line: &str, isa: Isa) -> &str {
    let bytes = line.as_bytes();
    let mut in_string = false;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if in_string => {
                i += 1; // skip escaped char
            }
            b'"' => in_string = !in_string,
            b'/' if !in_string
                && isa == Isa::Armv8
                && i + 1 < bytes.len()
                && bytes[i + 1] == b'/' =>
            {
                return &line[..i];
            }
            b'#' if !in_string && isa == Isa::Riscv64 => {
                return &line[..i];
            }
            _ => {}
        }
        i += 1;
    }
    line
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$')
}

/// Parse one trimmed, non-empty source line into one or more statements
/// (a label definition may share a physical line with a following statement).
fn parse_statements(
    text: &str,
    source_index: usize,
    isa: Isa,
    out: &mut Vec<AsmLine>,
) -> Result<(), ParseError> {
    // Label definition: ident ':' possibly followed by more.
    if let Some(colon) = text.find(':') {
        let (head, rest) = text.split_at(colon);
        if is_ident(head) {
            out.push(AsmLine::new(
                LineKind::Label(head.to_string()),
                text,
                source_index,
            ));
            let rest = rest[1..].trim();
            if !rest.is_empty() {
                parse_statements(rest, source_index, isa, out)?;
            }
            return Ok(());
        }
    }

    if text.starts_with('.') {
        let (name, args) = match text.find(char::is_whitespace) {
            Some(pos) => (&text[..pos], text[pos..].trim()),
            None => (text, ""),
        };
        out.push(AsmLine::new(
            LineKind::Directive {
                name: name.to_string(),
                args: args.to_string(),
            },
            text,
            source_index,
        ));
        return Ok(());
    }

    out.push(parse_instruction(text, source_index, isa)?);
    Ok(())
}

fn parse_instruction(text: &str, source_index: usize, isa: Isa) -> Result<AsmLine, ParseError> {
    let (mnemonic, rest) = match text.find(char::is_whitespace) {
        Some(pos) => (&text[..pos], text[pos..].trim()),
        None => (text, ""),
    };
    if !is_ident(mnemonic) {
        return Err(ParseError::UnparsableLine {
            line: source_index,
            text: text.to_string(),
        });
    }
    let kind = instr_kind(isa, mnemonic);
    if kind.is_none() {
        // Opaque instruction: flagged, not rejected.
        return Ok(AsmLine::new(
            LineKind::Instruction(Instr {
                mnemonic: mnemonic.to_string(),
                operands: Vec::new(),
                known: false,
                raw_operands: if rest.is_empty() {
                    None
                } else {
                    Some(rest.to_string())
                },
            }),
            text,
            source_index,
        ));
    }

    let pieces = split_operands(rest);
    let mut operands = Vec::with_capacity(pieces.len());
    let mut i = 0;
    while i < pieces.len() {
        let piece = pieces[i];
        // ARM post-index: `[base], imm` splits at the top-level comma.
        if piece.starts_with('[')
            && piece.ends_with(']')
            && i + 1 < pieces.len()
            && kind.map(|k| k.is_memory()).unwrap_or(false)
        {
            if let Some(off) = parse_int(pieces[i + 1]) {
                let mut mem = parse_memory(piece, isa).ok_or_else(|| unparsable(source_index, text))?;
                if matches!(mem.offset, MemOffset::Imm(0)) && mem.mode == AddrMode::Offset {
                    mem.offset = MemOffset::Imm(off.0);
                    mem.mode = AddrMode::PostIndex;
                    operands.push(Operand::Memory(mem));
                    i += 2;
                    continue;
                }
            }
        }
        let op = parse_operand(piece, isa, mnemonic).ok_or_else(|| unparsable(source_index, text))?;
        operands.push(op);
        i += 1;
    }

    Ok(AsmLine::new(
        LineKind::Instruction(Instr {
            mnemonic: mnemonic.to_string(),
            operands,
            known: true,
            raw_operands: None,
        }),
        text,
        source_index,
    ))
}

fn unparsable(line: usize, text: &str) -> ParseError {
    ParseError::UnparsableLine {
        line,
        text: text.to_string(),
    }
}

/// Split an operand list on top-level commas (commas inside brackets or
/// parentheses do not split).
fn split_operands(rest: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    if rest.is_empty() {
        return pieces;
    }
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in rest.char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            ',' if depth == 0 => {
                pieces.push(rest[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    pieces.push(rest[start..].trim());
    pieces.retain(|p| !p.is_empty());
    pieces
}

fn parse_int(s: &str) -> Option<(i64, Radix)> {
    let s = s.strip_prefix('#').unwrap_or(s);
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (value, radix) = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        (i64::from_str_radix(hex, 16).ok()?, Radix::Hex)
    } else if body.chars().all(|c| c.is_ascii_digit()) && !body.is_empty() {
        (body.parse::<i64>().ok()?, Radix::Dec)
    } else {
        return None;
    };
    Some((if neg { -value } else { value }, radix))
}

fn parse_label_ref(s: &str) -> Option<LabelRef> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("#:got_lo12:").or_else(|| s.strip_prefix(":got_lo12:")) {
        return is_ident(rest).then(|| LabelRef {
            name: rest.to_string(),
            modifier: RefModifier::GotLo12,
        });
    }
    if let Some(rest) = s.strip_prefix(":got:") {
        return is_ident(rest).then(|| LabelRef {
            name: rest.to_string(),
            modifier: RefModifier::Got,
        });
    }
    if let Some(rest) = s.strip_prefix(":lo12:") {
        return is_ident(rest).then(|| LabelRef {
            name: rest.to_string(),
            modifier: RefModifier::Lo12,
        });
    }
    if let Some(name) = s.strip_suffix("@plt") {
        return is_ident(name).then(|| LabelRef {
            name: name.to_string(),
            modifier: RefModifier::Plt,
        });
    }
    is_ident(s).then(|| LabelRef::plain(s))
}

fn parse_memory(piece: &str, isa: Isa) -> Option<MemOperand> {
    let (inner, mode) = if let Some(stripped) = piece.strip_suffix("]!") {
        (stripped.strip_prefix('[')?, AddrMode::PreIndex)
    } else {
        (
            piece.strip_prefix('[')?.strip_suffix(']')?,
            AddrMode::Offset,
        )
    };
    let mut parts = split_operands(inner);
    if parts.is_empty() || parts.len() > 2 {
        return None;
    }
    let base_name = parts.remove(0);
    lookup_register(isa, base_name)?;
    let offset = match parts.first() {
        None => MemOffset::Imm(0),
        Some(p) => match parse_int(p) {
            Some((v, _)) => MemOffset::Imm(v),
            None => MemOffset::Sym(parse_label_ref(p)?),
        },
    };
    Some(MemOperand {
        base: Reg::new(base_name),
        offset,
        mode,
    })
}

fn parse_operand(piece: &str, isa: Isa, mnemonic: &str) -> Option<Operand> {
    // ARM bracketed memory operand.
    if piece.starts_with('[') {
        return parse_memory(piece, isa).map(Operand::Memory);
    }
    // RISC-V memory operand: offset(base).
    if piece.ends_with(')') {
        if let Some(open) = piece.find('(') {
            let (off_text, base_text) = piece.split_at(open);
            let base_name = &base_text[1..base_text.len() - 1];
            if lookup_register(isa, base_name).is_some() {
                let off_text = off_text.trim();
                let offset = if off_text.is_empty() {
                    MemOffset::Imm(0)
                } else {
                    match parse_int(off_text) {
                        Some((v, _)) => MemOffset::Imm(v),
                        None => MemOffset::Sym(parse_label_ref(off_text)?),
                    }
                };
                return Some(Operand::Memory(MemOperand {
                    base: Reg::new(base_name),
                    offset,
                    mode: AddrMode::Offset,
                }));
            }
        }
    }
    if lookup_register(isa, piece).is_some() {
        return Some(Operand::reg(piece));
    }
    if let Some((value, radix)) = parse_int(piece) {
        return Some(Operand::Immediate { value, radix });
    }
    // ARM shifted-immediate operand: `lsl 16`.
    if isa == Isa::Armv8 {
        let mut it = piece.split_whitespace();
        if let (Some(kw), Some(amt), None) = (it.next(), it.next(), it.next()) {
            let kind = match kw {
                "lsl" => Some(ShiftKind::Lsl),
                "lsr" => Some(ShiftKind::Lsr),
                "asr" => Some(ShiftKind::Asr),
                _ => None,
            };
            if let (Some(kind), Some((amount, _))) = (kind, parse_int(amt)) {
                if (0..=63).contains(&amount) {
                    return Some(Operand::Shift {
                        kind,
                        amount: amount as u8,
                    });
                }
            }
        }
    }
    // Float literal immediate (fmov only).
    if mnemonic == "fmov" && piece.contains(['.', 'e', 'E']) {
        if let Ok(v) = piece.parse::<f64>() {
            return Some(Operand::FloatImmediate {
                bits: v.to_bits(),
                text: piece.to_string(),
            });
        }
    }
    parse_label_ref(piece).map(Operand::LabelRef)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Text,
    Data,
}

fn section_change(name: &str, args: &str) -> Option<Section> {
    match name {
        ".text" => Some(Section::Text),
        ".data" | ".bss" | ".rodata" => Some(Section::Data),
        ".section" => {
            if args.trim_start().starts_with(".text") {
                Some(Section::Text)
            } else {
                Some(Section::Data)
            }
        }
        _ => None,
    }
}

/// Group a flat line list into metadata runs and functions.
///
/// A function starts at a non-`.L` label in a text section that either is
/// declared `.type <name>, @function` (or `%function`), or is followed —
/// looking through local labels and `.cfi_*` directives — by an instruction.
/// It extends to the next function start, section switch, or end of file.
fn structure_program(lines: Vec<AsmLine>, isa: Isa) -> Program {
    let mut fn_typed: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for line in &lines {
        if let Some((".type", args)) = line.directive() {
            if args.contains("@function") || args.contains("%function") {
                if let Some(name) = args.split(',').next() {
                    fn_typed.insert(name.trim().to_string());
                }
            }
        }
    }

    let starts_function = |i: usize, lines: &[AsmLine]| -> bool {
        let name = match lines[i].label() {
            Some(n) => n,
            None => return false,
        };
        if name.starts_with(".L") {
            return false;
        }
        if fn_typed.contains(name) {
            return true;
        }
        for line in &lines[i + 1..] {
            match &line.kind {
                LineKind::Label(_) => continue,
                LineKind::Directive { name, .. } if name.starts_with(".cfi") => continue,
                LineKind::Instruction(_) => return true,
                _ => return false,
            }
        }
        false
    };

    let mut segments = Vec::new();
    let mut meta: Vec<AsmLine> = Vec::new();
    let mut section = Section::Text;
    let mut i = 0;
    while i < lines.len() {
        let line = &lines[i];
        if let Some((name, args)) = line.directive() {
            if let Some(s) = section_change(name, args) {
                section = s;
            }
        }
        if section == Section::Text && starts_function(i, &lines) {
            if !meta.is_empty() {
                segments.push(Segment::Meta(std::mem::take(&mut meta)));
            }
            let name = lines[i].label().unwrap().to_string();
            let mut body = vec![lines[i].clone()];
            let mut j = i + 1;
            while j < lines.len() {
                if let Some((dname, dargs)) = lines[j].directive() {
                    if section_change(dname, dargs).is_some() {
                        break;
                    }
                }
                if section == Section::Text && starts_function(j, &lines) {
                    break;
                }
                body.push(lines[j].clone());
                j += 1;
            }
            segments.push(Segment::Function(AsmFunction {
                name,
                lines: body,
                isa,
            }));
            i = j;
        } else {
            meta.push(line.clone());
            i += 1;
        }
    }
    if !meta.is_empty() {
        segments.push(Segment::Meta(meta));
    }
    Program { isa, segments }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_function() {
        let p = parse_program("main:\n\tmov\tw0, 0\n\tret\n", Isa::Armv8).unwrap();
        let funcs: Vec<_> = p.functions().collect();
        assert_eq!(funcs.len(), 1);
        assert_eq!(funcs[0].name, "main");
        let instrs: Vec<_> = funcs[0]
            .lines
            .iter()
            .filter_map(|l| l.instr())
            .collect();
        assert_eq!(instrs.len(), 2);
        assert_eq!(instrs[0].mnemonic, "mov");
        assert_eq!(
            instrs[0].operands,
            vec![Operand::reg("w0"), Operand::imm(0)]
        );
        assert_eq!(instrs[1].mnemonic, "ret");
        assert!(instrs[1].operands.is_empty());
    }

    #[test]
    fn riscv_addi_negative_immediate() {
        let p = parse_program("main:\n\taddi\tsp,sp,-48\n", Isa::Riscv64).unwrap();
        let f = p.function("main").unwrap();
        let instr = f.lines[1].instr().unwrap();
        assert_eq!(instr.mnemonic, "addi");
        assert_eq!(
            instr.operands,
            vec![Operand::reg("sp"), Operand::reg("sp"), Operand::imm(-48)]
        );
    }

    #[test]
    fn arm_adrp_label_ref() {
        let p = parse_program("main:\n\tadrp\tx0, .LC0\n\tret\n", Isa::Armv8).unwrap();
        let f = p.function("main").unwrap();
        let instr = f.lines[1].instr().unwrap();
        assert_eq!(instr.mnemonic, "adrp");
        assert_eq!(
            instr.operands,
            vec![
                Operand::reg("x0"),
                Operand::LabelRef(LabelRef::plain(".LC0"))
            ]
        );
    }

    #[test]
    fn arm_memory_forms() {
        let text = "main:\n\tstp\tx29, x30, [sp, -48]!\n\tldr\tw0, [sp, 24]\n\tldr\tx0, [x0, #:got_lo12:__stack_chk_guard]\n\tldp\tx29, x30, [sp], 48\n\tret\n";
        let p = parse_program(text, Isa::Armv8).unwrap();
        let f = p.function("main").unwrap();
        let ops: Vec<_> = f.lines.iter().filter_map(|l| l.instr()).collect();
        match &ops[0].operands[2] {
            Operand::Memory(m) => {
                assert_eq!(m.mode, AddrMode::PreIndex);
                assert_eq!(m.offset, MemOffset::Imm(-48));
            }
            other => panic!("expected memory operand, got {other:?}"),
        }
        match &ops[2].operands[1] {
            Operand::Memory(m) => match &m.offset {
                MemOffset::Sym(l) => {
                    assert_eq!(l.name, "__stack_chk_guard");
                    assert_eq!(l.modifier, RefModifier::GotLo12);
                }
                other => panic!("expected symbolic offset, got {other:?}"),
            },
            other => panic!("expected memory operand, got {other:?}"),
        }
        match &ops[3].operands[2] {
            Operand::Memory(m) => {
                assert_eq!(m.mode, AddrMode::PostIndex);
                assert_eq!(m.offset, MemOffset::Imm(48));
            }
            other => panic!("expected memory operand, got {other:?}"),
        }
    }

    #[test]
    fn riscv_memory_and_plt() {
        let text = "main:\n\tsd\tra,40(sp)\n\tlla\ta0,.LC0\n\tcall\tprintf@plt\n\tld\ta4, 0(a5)\n";
        let p = parse_program(text, Isa::Riscv64).unwrap();
        let f = p.function("main").unwrap();
        let ops: Vec<_> = f.lines.iter().filter_map(|l| l.instr()).collect();
        match &ops[0].operands[1] {
            Operand::Memory(m) => {
                assert_eq!(m.base, Reg::new("sp"));
                assert_eq!(m.offset, MemOffset::Imm(40));
            }
            other => panic!("expected memory operand, got {other:?}"),
        }
        assert_eq!(
            ops[2].operands[0],
            Operand::LabelRef(LabelRef {
                name: "printf".into(),
                modifier: RefModifier::Plt
            })
        );
    }

    #[test]
    fn movk_shift_operand() {
        let p = parse_program("f:\n\tmovk\tw1, 0x8888, lsl 16\n\tret\n", Isa::Armv8).unwrap();
        let f = p.function("f").unwrap();
        let instr = f.lines[1].instr().unwrap();
        assert_eq!(
            instr.operands,
            vec![
                Operand::reg("w1"),
                Operand::Immediate {
                    value: 0x8888,
                    radix: Radix::Hex
                },
                Operand::Shift {
                    kind: ShiftKind::Lsl,
                    amount: 16
                },
            ]
        );
    }

    #[test]
    fn fmov_float_literal() {
        let p = parse_program("f:\n\tfmov\td0, 5.0e+0\n\tret\n", Isa::Armv8).unwrap();
        let f = p.function("f").unwrap();
        let instr = f.lines[1].instr().unwrap();
        match &instr.operands[1] {
            Operand::FloatImmediate { bits, .. } => {
                assert_eq!(*bits, 0x4014000000000000);
            }
            other => panic!("expected float immediate, got {other:?}"),
        }
    }

    #[test]
    fn unknown_mnemonic_is_opaque_not_error() {
        let p = parse_program("f:\n\tfrobnicate\tw0, 3\n\tret\n", Isa::Armv8).unwrap();
        let f = p.function("f").unwrap();
        let instr = f.lines[1].instr().unwrap();
        assert!(!instr.known);
        assert_eq!(instr.raw_operands.as_deref(), Some("w0, 3"));
    }

    #[test]
    fn garbage_line_is_unparsable() {
        let err = parse_program("f:\n\t%%!!\n", Isa::Armv8).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnparsableLine {
                line: 1,
                text: "%%!!".into()
            }
        );
    }

    #[test]
    fn data_label_is_not_a_function() {
        let text = ".bss\nb:\n\t.zero\t8\n\t.text\nmain:\n\tret\n";
        let p = parse_program(text, Isa::Armv8).unwrap();
        let funcs: Vec<_> = p.functions().collect();
        assert_eq!(funcs.len(), 1);
        assert_eq!(funcs[0].name, "main");
    }

    #[test]
    fn local_labels_do_not_split_functions() {
        let text = "main:\n\tcmp\tw0, 0\n\tbeq\t.L3\n\tmov\tw0, 1\n.L3:\n\tret\n";
        let p = parse_program(text, Isa::Armv8).unwrap();
        let funcs: Vec<_> = p.functions().collect();
        assert_eq!(funcs.len(), 1);
        assert_eq!(funcs[0].lines.len(), 6);
    }

    #[test]
    fn two_typed_functions_split() {
        let text = "\t.text\n\t.type\tmain, %function\nmain:\n\tret\n\t.size\tmain, .-main\n\t.type\tfoo, %function\nfoo:\n\tret\n";
        let p = parse_program(text, Isa::Armv8).unwrap();
        let names: Vec<_> = p.functions().map(|f| f.name.as_str()).collect();
        assert_eq!(names, vec!["main", "foo"]);
        // .size main belongs to main's body.
        let main = p.function("main").unwrap();
        assert!(main
            .lines
            .iter()
            .any(|l| matches!(l.directive(), Some((".size", a)) if a.starts_with("main"))));
    }

    #[test]
    fn riscv_hash_comment_stripped() {
        let p = parse_program("main:\n\tli\ta0,1 # load one\n\tret\n", Isa::Riscv64).unwrap();
        let f = p.function("main").unwrap();
        let instr = f.lines[1].instr().unwrap();
        assert_eq!(instr.operands[1], Operand::imm(1));
    }
}
