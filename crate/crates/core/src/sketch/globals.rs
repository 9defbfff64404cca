//! Dedicated solver for out-of-scope reference holes.
//!
//! Given the required entity value from the input side (a decoded global or
//! a literal), either reuse an existing definition in the generated program
//! whose bitvector matches, create a fresh uniquely-labeled definition, or
//! inline the value textually for numeric slots.

use super::SketchError;
use crate::asm::{AsmLine, Isa, LineKind, Program, Segment};
use crate::blocks::{lookup_global, GlobalDefinition};

/// What the input side requires the output to materialize.
#[derive(Debug, Clone, PartialEq)]
pub enum Required {
    /// A 64-bit bitvector (decoded numeric global or float literal).
    Bits(u64),
    /// A textual definition with no bitvector decoding (string data).
    Textual(GlobalDefinition),
}

/// The kind of slot the hole occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalSlot {
    /// A label operand (lla/adrp/la reference).
    Label,
    /// A numeric operand that should carry the value directly.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    /// An existing definition matches; use its label.
    Reuse { label: String },
    /// No match: a new uniquely-labeled definition to add to the program.
    Create { label: String, lines: Vec<AsmLine> },
    /// Numeric slot: the value itself, in the ISA's expected spelling.
    Inline { text: String },
}

impl Resolution {
    pub fn label(&self) -> Option<&str> {
        match self {
            Resolution::Reuse { label } | Resolution::Create { label, .. } => Some(label),
            Resolution::Inline { .. } => None,
        }
    }
}

fn data_directive(isa: Isa) -> &'static str {
    match isa {
        Isa::Armv8 => ".xword",
        Isa::Riscv64 => ".dword",
    }
}

/// Labels already used anywhere in the program.
fn used_labels(p: &Program) -> std::collections::BTreeSet<String> {
    p.all_lines()
        .filter_map(|l| l.label().map(str::to_string))
        .collect()
}

fn fresh_label(p: &Program) -> String {
    let used = used_labels(p);
    (0..)
        .map(|n| format!(".LC_gs{n}"))
        .find(|name| !used.contains(name))
        .expect("an unused label index exists")
}

fn data_labels(p: &Program) -> Vec<String> {
    let function_names: std::collections::BTreeSet<&str> =
        p.functions().map(|f| f.name.as_str()).collect();
    let mut labels = Vec::new();
    for seg in &p.segments {
        if let Segment::Meta(lines) = seg {
            for line in lines {
                if let Some(l) = line.label() {
                    if !function_names.contains(l) {
                        labels.push(l.to_string());
                    }
                }
            }
        }
    }
    labels
}

fn make_definition_lines(label: &str, directives: Vec<(String, String)>) -> Vec<AsmLine> {
    let mut lines = vec![
        AsmLine::new(
            LineKind::Directive {
                name: ".align".into(),
                args: "3".into(),
            },
            "",
            0,
        ),
        AsmLine::new(LineKind::Label(label.to_string()), "", 0),
    ];
    for (name, args) in directives {
        lines.push(AsmLine::new(LineKind::Directive { name, args }, "", 0));
    }
    lines
}

/// Resolve a reference hole against the generated program `p_y`.
pub fn resolve_global_reference(
    p_y: &Program,
    slot: GlobalSlot,
    required: &Required,
) -> Result<Resolution, SketchError> {
    match (slot, required) {
        (GlobalSlot::Numeric, Required::Bits(v)) => Ok(Resolution::Inline {
            text: (*v as i64).to_string(),
        }),
        (GlobalSlot::Numeric, Required::Textual(_)) => Err(SketchError::UndecodableRequirement),
        (GlobalSlot::Label, Required::Bits(v)) => {
            for label in data_labels(p_y) {
                if let Ok(def) = lookup_global(p_y, &label) {
                    if def.decoded_value == Some(*v) {
                        return Ok(Resolution::Reuse { label });
                    }
                }
            }
            let label = fresh_label(p_y);
            let lines = make_definition_lines(
                &label,
                vec![(data_directive(p_y.isa).into(), format!("0x{v:016x}"))],
            );
            Ok(Resolution::Create { label, lines })
        }
        (GlobalSlot::Label, Required::Textual(def)) => {
            let wanted: Vec<(String, String)> = def
                .directive_lines
                .iter()
                .filter_map(|l| l.directive().map(|(n, a)| (n.to_string(), a.to_string())))
                .collect();
            if wanted.is_empty() {
                return Err(SketchError::UndecodableRequirement);
            }
            for label in data_labels(p_y) {
                if let Ok(existing) = lookup_global(p_y, &label) {
                    let have: Vec<(String, String)> = existing
                        .directive_lines
                        .iter()
                        .filter_map(|l| l.directive().map(|(n, a)| (n.to_string(), a.to_string())))
                        .collect();
                    if have == wanted {
                        return Ok(Resolution::Reuse { label });
                    }
                }
            }
            let label = fresh_label(p_y);
            let lines = make_definition_lines(&label, wanted);
            Ok(Resolution::Create { label, lines })
        }
    }
}

/// Add a solver-created definition to the program's data section, exactly
/// once. Returns false when the label already exists.
pub fn insert_global_definition(p: &mut Program, label: &str, lines: &[AsmLine]) -> bool {
    if p.all_lines().any(|l| l.label() == Some(label)) {
        return false;
    }
    let mut seg_lines = vec![AsmLine::new(
        LineKind::Directive {
            name: ".section".into(),
            args: ".rodata".into(),
        },
        "",
        0,
    )];
    seg_lines.extend(lines.iter().cloned());
    p.segments.push(Segment::Meta(seg_lines));
    true
}
