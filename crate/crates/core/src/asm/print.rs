//! Canonical printer: tab after mnemonic, comma-space between operands,
//! labels at column zero. Printing then re-parsing yields a structurally
//! equal program.

use super::{AsmFunction, AsmLine, LineKind, Program, Segment};

/// Token texts of one line in print order, shared by the printer and the
/// tokenizer so the two can never disagree.
pub(crate) fn line_elements(line: &AsmLine) -> Vec<String> {
    match &line.kind {
        LineKind::Label(name) => vec![format!("{name}:")],
        LineKind::Directive { name, args } => {
            let mut v = vec![name.clone()];
            if !args.is_empty() {
                v.push(args.clone());
            }
            v
        }
        LineKind::Instruction(instr) => {
            let mut v = vec![instr.mnemonic.clone()];
            if instr.known {
                v.extend(instr.operands.iter().map(|o| o.to_string()));
            } else if let Some(raw) = &instr.raw_operands {
                v.push(raw.clone());
            }
            v
        }
    }
}

/// Separator preceding element `idx` of a line (the element after a label
/// definition never shares a line, so only leading/mnemonic/operand
/// separators exist).
pub(crate) fn separator(line: &AsmLine, idx: usize) -> &'static str {
    match idx {
        0 => match line.kind {
            LineKind::Label(_) => "",
            _ => "\t",
        },
        1 => "\t",
        _ => ", ",
    }
}

pub fn print_line(line: &AsmLine) -> String {
    let mut out = String::new();
    for (i, el) in line_elements(line).iter().enumerate() {
        out.push_str(separator(line, i));
        out.push_str(el);
    }
    out
}

pub fn print_function(f: &AsmFunction) -> String {
    let mut out = String::new();
    for line in &f.lines {
        out.push_str(&print_line(line));
        out.push('\n');
    }
    out
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for segment in &p.segments {
        match segment {
            Segment::Meta(lines) => {
                for line in lines {
                    out.push_str(&print_line(line));
                    out.push('\n');
                }
            }
            Segment::Function(f) => out.push_str(&print_function(f)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;
    use crate::asm::Isa;

    #[test]
    fn empty_program_prints_preamble_only() {
        let p = parse_program("\t.text\n\t.align\t2\n", Isa::Armv8).unwrap();
        assert_eq!(print_program(&p), "\t.text\n\t.align\t2\n");
    }

    #[test]
    fn round_trip_is_structural_identity() {
        let text = "\t.arch armv8-a\n\t.text\n\t.section\t.rodata\n\t.align\t3\n.LC0:\n\t.string\t\"hi %d\\n\"\n\t.text\nmain:\n\tstp\tx29, x30, [sp, -48]!\n\tmov\tx29, sp\n\tadrp\tx0, .LC0\n\tadd\tx0, x0, :lo12:.LC0\n\tmov\tw1, 34953\n\tmovk\tw1, 0x8888, lsl 16\n\tbl\tprintf\n\tmov\tw0, 0\n\tldp\tx29, x30, [sp], 48\n\tret\n";
        let p1 = parse_program(text, Isa::Armv8).unwrap();
        let printed = print_program(&p1);
        let p2 = parse_program(&printed, Isa::Armv8).unwrap();
        assert_eq!(p1, p2);
        // Printing is idempotent once canonical.
        assert_eq!(printed, print_program(&p2));
    }

    #[test]
    fn global_string_definition_prints_label_then_directive() {
        let text = ".LC0:\n\t.string\t\"hi\"\n";
        let p = parse_program(text, Isa::Riscv64).unwrap();
        let printed = print_program(&p);
        assert_eq!(printed, ".LC0:\n\t.string\t\"hi\"\n");
        assert_eq!(parse_program(&printed, Isa::Riscv64).unwrap(), p);
    }

    #[test]
    fn riscv_canonicalizes_comma_spacing() {
        let p = parse_program("main:\n\taddi\tsp,sp,-48\n", Isa::Riscv64).unwrap();
        let printed = print_program(&p);
        assert_eq!(printed, "main:\n\taddi\tsp, sp, -48\n");
        assert_eq!(parse_program(&printed, Isa::Riscv64).unwrap(), p);
    }
}
