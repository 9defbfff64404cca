//! Register and mnemonic tables for the supported ARMv8 and RISC-V subsets.
//!
//! The executable update rule for every mnemonic listed here is documented in
//! `docs/semantics.md`; this module only knows names, operand shapes, and
//! instruction classes.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Instruction set architecture of a program or function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Isa {
    Armv8,
    Riscv64,
}

impl Isa {
    pub fn as_str(self) -> &'static str {
        match self {
            Isa::Armv8 => "armv8",
            Isa::Riscv64 => "riscv64",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Isa> {
        match s {
            "armv8" | "arm" | "aarch64" => Some(Isa::Armv8),
            "riscv64" | "riscv" | "rv64" => Some(Isa::Riscv64),
            _ => None,
        }
    }
}

impl fmt::Display for Isa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Storage cell in the register file, independent of the name used to access
/// it (`w3` and `x3` address the same cell at different widths).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RegCell {
    /// General-purpose integer register (ARMv8 x0..x30, RISC-V x1..x31).
    Int(u8),
    /// ARMv8 stack pointer (architecturally separate from the GPRs).
    Sp,
    /// Hardwired-zero cell (ARMv8 xzr/wzr, RISC-V x0).
    Zero,
    /// Floating-point register, held as a 64-bit bit pattern.
    Float(u8),
}

/// Access width implied by a register name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    W32,
    W64,
}

/// A register name resolved against an ISA: the cell it addresses plus the
/// access width. Reads of a 32-bit name take the low half; writes of a 32-bit
/// name zero the high half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RegAccess {
    pub cell: RegCell,
    pub width: Width,
}

/// Resolve a register name for an ISA. Returns `None` for names that are not
/// registers of that ISA.
pub fn lookup_register(isa: Isa, name: &str) -> Option<RegAccess> {
    match isa {
        Isa::Armv8 => lookup_arm_register(name),
        Isa::Riscv64 => lookup_riscv_register(name),
    }
}

fn lookup_arm_register(name: &str) -> Option<RegAccess> {
    match name {
        "sp" => {
            return Some(RegAccess {
                cell: RegCell::Sp,
                width: Width::W64,
            })
        }
        "wsp" => {
            return Some(RegAccess {
                cell: RegCell::Sp,
                width: Width::W32,
            })
        }
        "xzr" => {
            return Some(RegAccess {
                cell: RegCell::Zero,
                width: Width::W64,
            })
        }
        "wzr" => {
            return Some(RegAccess {
                cell: RegCell::Zero,
                width: Width::W32,
            })
        }
        _ => {}
    }
    let (prefix, rest) = name.split_at(1);
    let idx: u8 = rest.parse().ok()?;
    match prefix {
        "x" if idx <= 30 => Some(RegAccess {
            cell: RegCell::Int(idx),
            width: Width::W64,
        }),
        "w" if idx <= 30 => Some(RegAccess {
            cell: RegCell::Int(idx),
            width: Width::W32,
        }),
        "d" if idx <= 31 => Some(RegAccess {
            cell: RegCell::Float(idx),
            width: Width::W64,
        }),
        "s" if idx <= 31 => Some(RegAccess {
            cell: RegCell::Float(idx),
            width: Width::W32,
        }),
        _ => None,
    }
}

fn lookup_riscv_register(name: &str) -> Option<RegAccess> {
    let x64 = |n: u8| {
        Some(RegAccess {
            cell: if n == 0 { RegCell::Zero } else { RegCell::Int(n) },
            width: Width::W64,
        })
    };
    let f64_ = |n: u8| {
        Some(RegAccess {
            cell: RegCell::Float(n),
            width: Width::W64,
        })
    };
    match name {
        "zero" => return x64(0),
        "ra" => return x64(1),
        "sp" => return x64(2),
        "gp" => return x64(3),
        "tp" => return x64(4),
        "fp" => return x64(8),
        _ => {}
    }
    let (prefix, rest) = if let Some(r) = name.strip_prefix("ft") {
        ("ft", r)
    } else if let Some(r) = name.strip_prefix("fs") {
        ("fs", r)
    } else if let Some(r) = name.strip_prefix("fa") {
        ("fa", r)
    } else if let Some(r) = name.strip_prefix('f') {
        ("f", r)
    } else if let Some(r) = name.strip_prefix('x') {
        ("x", r)
    } else if let Some(r) = name.strip_prefix('t') {
        ("t", r)
    } else if let Some(r) = name.strip_prefix('s') {
        ("s", r)
    } else if let Some(r) = name.strip_prefix('a') {
        ("a", r)
    } else {
        return None;
    };
    let idx: u8 = rest.parse().ok()?;
    match prefix {
        "x" if idx <= 31 => x64(idx),
        "t" if idx <= 2 => x64(5 + idx),
        "t" if (3..=6).contains(&idx) => x64(28 + idx - 3),
        "s" if idx <= 1 => x64(8 + idx),
        "s" if (2..=11).contains(&idx) => x64(18 + idx - 2),
        "a" if idx <= 7 => x64(10 + idx),
        "f" if idx <= 31 => f64_(idx),
        "ft" if idx <= 7 => f64_(idx),
        "ft" if (8..=11).contains(&idx) => f64_(28 + idx - 8),
        "fs" if idx <= 1 => f64_(8 + idx),
        "fs" if (2..=11).contains(&idx) => f64_(18 + idx - 2),
        "fa" if idx <= 7 => f64_(10 + idx),
        _ => None,
    }
}

/// True when `cell` is the stack pointer of `isa` (ARMv8 `sp` or RISC-V `x2`).
pub fn is_stack_pointer(isa: Isa, cell: RegCell) -> bool {
    match isa {
        Isa::Armv8 => cell == RegCell::Sp,
        Isa::Riscv64 => cell == RegCell::Int(2),
    }
}

/// Coarse instruction class driving block boundaries and solvability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InstrKind {
    /// Arithmetic/logic/shift/compare; part of the solvable subset.
    Alu,
    /// Register/immediate moves (including float bit moves); solvable.
    Move,
    /// Address formation from a label (adrp/adr/la/lla). Allowed inside a
    /// pure block but not executable without a loader, so not solvable.
    AddrGen,
    /// Conditional or unconditional branch.
    Branch,
    /// Call (bl/call/jal/jalr).
    Call,
    /// Return (ret, and RISC-V `jr`, which is `ret` when its operand is ra).
    Ret,
    /// Memory load.
    Load,
    /// Memory store.
    Store,
    Nop,
}

impl InstrKind {
    /// Control-transfer instructions end a basic block.
    pub fn is_control(self) -> bool {
        matches!(self, InstrKind::Branch | InstrKind::Call | InstrKind::Ret)
    }

    /// Memory-touching instructions are excluded from pure blocks.
    pub fn is_memory(self) -> bool {
        matches!(self, InstrKind::Load | InstrKind::Store)
    }
}

const ARM_COND_SUFFIXES: &[&str] = &[
    "eq", "ne", "lt", "le", "gt", "ge", "hi", "ls", "cs", "cc", "mi", "pl", "vs", "vc", "hs", "lo",
];

/// Look up the instruction class of a mnemonic, or `None` when the mnemonic is
/// outside the supported subset (an opaque instruction).
pub fn instr_kind(isa: Isa, mnemonic: &str) -> Option<InstrKind> {
    match isa {
        Isa::Armv8 => arm_instr_kind(mnemonic),
        Isa::Riscv64 => riscv_instr_kind(mnemonic),
    }
}

fn arm_instr_kind(m: &str) -> Option<InstrKind> {
    use InstrKind::*;
    // b.cond and its unprefixed aliases (beq == b.eq).
    if let Some(suffix) = m.strip_prefix("b.") {
        if ARM_COND_SUFFIXES.contains(&suffix) {
            return Some(Branch);
        }
        return None;
    }
    if let Some(suffix) = m.strip_prefix('b') {
        if ARM_COND_SUFFIXES.contains(&suffix) {
            return Some(Branch);
        }
    }
    Some(match m {
        "mov" | "movk" | "fmov" => Move,
        "add" | "sub" | "adds" | "subs" | "mul" | "smull" | "lsl" | "lsr" | "asr" | "and"
        | "orr" | "eor" | "cmp" => Alu,
        "b" => Branch,
        "bl" => Call,
        "ret" => Ret,
        "ldr" | "ldrb" | "ldp" => Load,
        "str" | "strb" | "stp" => Store,
        "adrp" | "adr" => AddrGen,
        "nop" => Nop,
        _ => return None,
    })
}

fn riscv_instr_kind(m: &str) -> Option<InstrKind> {
    use InstrKind::*;
    Some(match m {
        "li" | "lui" | "mv" | "sext.w" | "fmv.x.d" => Move,
        "add" | "addw" | "addi" | "addiw" | "sub" | "subw" | "mul" | "mulw" | "div" | "divw"
        | "rem" | "remw" | "sll" | "sllw" | "slli" | "slliw" | "srl" | "srlw" | "srli"
        | "srliw" | "sra" | "sraw" | "srai" | "sraiw" | "and" | "andi" | "or" | "ori" | "xor"
        | "xori" => Alu,
        "beq" | "bne" | "blt" | "bge" | "bgt" | "ble" | "bltu" | "bgeu" | "beqz" | "bnez"
        | "bgez" | "blez" | "bgtz" | "bltz" | "j" => Branch,
        "jal" | "jalr" | "call" => Call,
        "jr" | "ret" => Ret,
        "ld" | "lw" | "lbu" | "fld" => Load,
        "sd" | "sw" | "sb" => Store,
        "la" | "lla" => AddrGen,
        "nop" => Nop,
        _ => return None,
    })
}

/// True when the mnemonic belongs to the arithmetic/logic/move subset the
/// sketch solver can execute symbolically. Address formation is excluded.
pub fn is_solvable_mnemonic(isa: Isa, mnemonic: &str) -> bool {
    matches!(
        instr_kind(isa, mnemonic),
        Some(InstrKind::Alu) | Some(InstrKind::Move) | Some(InstrKind::Nop)
    )
}

/// ARMv8 instructions that set the NZCV flags.
pub fn sets_flags(isa: Isa, mnemonic: &str) -> bool {
    isa == Isa::Armv8 && matches!(mnemonic, "adds" | "subs" | "cmp")
}

/// ARMv8 conditional branches read the NZCV flags.
pub fn reads_flags(isa: Isa, mnemonic: &str) -> bool {
    if isa != Isa::Armv8 {
        return false;
    }
    if let Some(s) = mnemonic.strip_prefix("b.") {
        return ARM_COND_SUFFIXES.contains(&s);
    }
    if let Some(s) = mnemonic.strip_prefix('b') {
        return ARM_COND_SUFFIXES.contains(&s);
    }
    false
}

/// Condition code of an ARMv8 conditional branch (`b.eq`/`beq` → "eq").
pub fn arm_branch_cond(mnemonic: &str) -> Option<&str> {
    let s = mnemonic
        .strip_prefix("b.")
        .or_else(|| mnemonic.strip_prefix('b'))?;
    if ARM_COND_SUFFIXES.contains(&s) {
        Some(s)
    } else {
        None
    }
}

/// Positions at which an operand is written by its instruction, used by
/// read/write dataflow. Most instructions write operand 0 and read the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OperandRoles {
    /// Indices of operands written (register operands only).
    pub writes: &'static [usize],
    /// Written operands that are also read (movk keeps unwritten bits).
    pub dest_also_read: bool,
}

pub fn operand_roles(isa: Isa, mnemonic: &str) -> OperandRoles {
    const W0: &[usize] = &[0];
    const W01: &[usize] = &[0, 1];
    const NONE: &[usize] = &[];
    let kind = instr_kind(isa, mnemonic);
    match (isa, mnemonic) {
        (_, "nop") => OperandRoles {
            writes: NONE,
            dest_also_read: false,
        },
        (Isa::Armv8, "cmp") => OperandRoles {
            writes: NONE,
            dest_also_read: false,
        },
        (Isa::Armv8, "movk") => OperandRoles {
            writes: W0,
            dest_also_read: true,
        },
        (Isa::Armv8, "stp") => OperandRoles {
            writes: NONE,
            dest_also_read: false,
        },
        (Isa::Armv8, "ldp") => OperandRoles {
            writes: W01,
            dest_also_read: false,
        },
        (Isa::Armv8, "str" | "strb") | (Isa::Riscv64, "sd" | "sw" | "sb") => OperandRoles {
            writes: NONE,
            dest_also_read: false,
        },
        _ => match kind {
            Some(InstrKind::Branch) | Some(InstrKind::Ret) => OperandRoles {
                writes: NONE,
                dest_also_read: false,
            },
            Some(InstrKind::Call) => OperandRoles {
                // bl/call write the link register implicitly, not an operand.
                writes: NONE,
                dest_also_read: false,
            },
            Some(_) => OperandRoles {
                writes: W0,
                dest_also_read: false,
            },
            None => OperandRoles {
                writes: NONE,
                dest_also_read: false,
            },
        },
    }
}

/// Inclusive legal range of the immediate operand of a mnemonic, where one is
/// defined by the encoding. `None` means the mnemonic takes no plain
/// immediate or the range is checked elsewhere (logical immediates).
pub fn imm_range(isa: Isa, mnemonic: &str) -> Option<(i64, i64)> {
    match isa {
        Isa::Armv8 => match mnemonic {
            // MOVZ 16-bit, or MOVN for negatives.
            "mov" => Some((-65536, 65535)),
            "movk" => Some((0, 65535)),
            "add" | "sub" | "adds" | "subs" | "cmp" => Some((0, 4095)),
            "lsl" | "lsr" | "asr" => Some((0, 63)),
            _ => None,
        },
        Isa::Riscv64 => match mnemonic {
            "addi" | "addiw" | "andi" | "ori" | "xori" => Some((-2048, 2047)),
            // li is a materializing pseudo; the assembler expands it.
            "li" => Some((i64::MIN, i64::MAX)),
            "lui" => Some((0, 0xFFFFF)),
            "slli" | "srli" | "srai" => Some((0, 63)),
            "slliw" | "srliw" | "sraiw" => Some((0, 31)),
            _ => None,
        },
    }
}

/// Legal memory-offset range for load/store mnemonics.
pub fn mem_offset_range(isa: Isa, mnemonic: &str) -> Option<(i64, i64)> {
    match isa {
        Isa::Armv8 => match mnemonic {
            // Scaled unsigned 12-bit or unscaled signed 9-bit.
            "ldr" | "str" => Some((-256, 4095 * 8)),
            "ldrb" | "strb" => Some((-256, 4095)),
            // Signed 7-bit scaled by 8.
            "stp" | "ldp" => Some((-512, 504)),
            _ => None,
        },
        Isa::Riscv64 => match mnemonic {
            "ld" | "sd" | "lw" | "sw" | "lbu" | "sb" | "fld" => Some((-2048, 2047)),
            _ => None,
        },
    }
}

/// ARMv8 logical-immediate encodability (bitmask immediates for and/orr/eor).
/// A value is encodable iff it is a repetition of a rotated run of ones of
/// some element size 2..64, and is neither all-zeros nor all-ones.
pub fn is_arm_logical_imm(value: u64, width: Width) -> bool {
    let value = match width {
        Width::W32 => {
            let v32 = value as u32;
            (v32 as u64) | ((v32 as u64) << 32)
        }
        Width::W64 => value,
    };
    if value == 0 || value == u64::MAX {
        return false;
    }
    let mut size = 64u32;
    loop {
        let mask = if size == 64 {
            u64::MAX
        } else {
            (1u64 << size) - 1
        };
        let elem = value & mask;
        let mut replicated = 0u64;
        let mut shift = 0;
        while shift < 64 {
            replicated |= elem << shift;
            shift += size;
        }
        if replicated == value {
            // The element must be a single cyclic run of ones: exactly two
            // 0/1 transitions when read cyclically over `size` bits.
            let mut transitions = 0;
            for i in 0..size {
                let b = (elem >> i) & 1;
                let next = (elem >> ((i + 1) % size)) & 1;
                if b != next {
                    transitions += 1;
                }
            }
            if transitions == 2 {
                return true;
            }
        }
        if size == 2 {
            return false;
        }
        size /= 2;
    }
}

/// ARMv8 fmov 8-bit float immediate encodability: ±(16..31)/16 × 2^(-3..4).
pub fn is_arm_fmov_imm(value: f64) -> bool {
    if !value.is_finite() || value == 0.0 {
        return false;
    }
    let mag = value.abs();
    for exp in -3i32..=4 {
        for frac in 16u32..=31 {
            if (frac as f64) / 16.0 * 2f64.powi(exp) == mag {
                return true;
            }
        }
    }
    false
}

/// General-purpose register names usable as a hole domain, in a deterministic
/// search order. Stack pointer, zero, and link registers are excluded.
pub fn gpr_domain(isa: Isa, width: Width) -> Vec<&'static str> {
    match isa {
        Isa::Armv8 => match width {
            Width::W32 => ARM_W_REGS.to_vec(),
            Width::W64 => ARM_X_REGS.to_vec(),
        },
        Isa::Riscv64 => RISCV_GPRS.to_vec(),
    }
}

const ARM_W_REGS: &[&str] = &[
    "w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9", "w10", "w11", "w12", "w13", "w14",
    "w15", "w16", "w17", "w19", "w20", "w21", "w22", "w23", "w24", "w25", "w26", "w27", "w28",
];
const ARM_X_REGS: &[&str] = &[
    "x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "x10", "x11", "x12", "x13", "x14",
    "x15", "x16", "x17", "x19", "x20", "x21", "x22", "x23", "x24", "x25", "x26", "x27", "x28",
];
const RISCV_GPRS: &[&str] = &[
    "a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "t0", "t1", "t2", "t3", "t4", "t5", "t6",
    "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11",
];

/// Same-arity functional class of a mnemonic, used as the hole domain when a
/// mnemonic token itself is flagged.
pub fn mnemonic_class(isa: Isa, mnemonic: &str) -> Vec<&'static str> {
    match isa {
        Isa::Armv8 => match mnemonic {
            "add" | "sub" | "and" | "orr" | "eor" | "lsl" | "lsr" | "asr" | "mul" => vec![
                "add", "sub", "and", "orr", "eor", "lsl", "lsr", "asr", "mul",
            ],
            "adds" | "subs" => vec!["adds", "subs"],
            _ => vec![],
        },
        Isa::Riscv64 => match mnemonic {
            "add" | "sub" | "mul" | "div" | "rem" | "and" | "or" | "xor" | "sll" | "srl"
            | "sra" => vec![
                "add", "sub", "mul", "div", "rem", "and", "or", "xor", "sll", "srl", "sra",
            ],
            "addw" | "subw" | "mulw" | "divw" | "remw" | "sllw" | "srlw" | "sraw" => {
                vec!["addw", "subw", "mulw", "divw", "remw", "sllw", "srlw", "sraw"]
            }
            "addi" | "andi" | "ori" | "xori" | "slli" | "srli" | "srai" => {
                vec!["addi", "andi", "ori", "xori", "slli", "srli", "srai"]
            }
            "addiw" | "slliw" | "srliw" | "sraiw" => vec!["addiw", "slliw", "srliw", "sraiw"],
            "mv" | "sext.w" => vec!["mv", "sext.w"],
            _ => vec![],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riscv_abi_names_resolve_to_numbered_cells() {
        assert_eq!(
            lookup_register(Isa::Riscv64, "a5").unwrap().cell,
            RegCell::Int(15)
        );
        assert_eq!(
            lookup_register(Isa::Riscv64, "x15").unwrap().cell,
            RegCell::Int(15)
        );
        assert_eq!(
            lookup_register(Isa::Riscv64, "zero").unwrap().cell,
            RegCell::Zero
        );
        assert_eq!(
            lookup_register(Isa::Riscv64, "fa5").unwrap().cell,
            RegCell::Float(15)
        );
        assert_eq!(
            lookup_register(Isa::Riscv64, "t3").unwrap().cell,
            RegCell::Int(28)
        );
        assert_eq!(
            lookup_register(Isa::Riscv64, "t6").unwrap().cell,
            RegCell::Int(31)
        );
        assert_eq!(
            lookup_register(Isa::Riscv64, "s11").unwrap().cell,
            RegCell::Int(27)
        );
    }

    #[test]
    fn arm_w_and_x_share_cells() {
        let w3 = lookup_register(Isa::Armv8, "w3").unwrap();
        let x3 = lookup_register(Isa::Armv8, "x3").unwrap();
        assert_eq!(w3.cell, x3.cell);
        assert_eq!(w3.width, Width::W32);
        assert_eq!(x3.width, Width::W64);
        assert!(lookup_register(Isa::Armv8, "x31").is_none());
        assert!(lookup_register(Isa::Armv8, "a5").is_none());
    }

    #[test]
    fn mnemonic_tables_are_isa_disjoint_on_shared_names() {
        // Names valid in both tables must carry the isa tag to disambiguate;
        // the kind may coincide (add) but the register grammar cannot.
        assert_eq!(arm_instr_kind("orr"), Some(InstrKind::Alu));
        assert_eq!(riscv_instr_kind("orr"), None);
        assert_eq!(riscv_instr_kind("addiw"), Some(InstrKind::Alu));
        assert_eq!(arm_instr_kind("addiw"), None);
    }

    #[test]
    fn cond_branch_aliases() {
        assert_eq!(arm_instr_kind("b.eq"), Some(InstrKind::Branch));
        assert_eq!(arm_instr_kind("beq"), Some(InstrKind::Branch));
        assert_eq!(arm_branch_cond("beq"), Some("eq"));
        assert_eq!(arm_branch_cond("b.ge"), Some("ge"));
        assert_eq!(arm_branch_cond("bl"), None);
        assert_eq!(arm_branch_cond("b"), None);
    }

    #[test]
    fn logical_imm_examples() {
        assert!(is_arm_logical_imm(1, Width::W32));
        assert!(is_arm_logical_imm(0xff, Width::W64));
        assert!(is_arm_logical_imm(0x5555_5555_5555_5555, Width::W64));
        assert!(!is_arm_logical_imm(0, Width::W64));
        assert!(!is_arm_logical_imm(u64::MAX, Width::W64));
        // 0b101 is not a contiguous run under any rotation/replication.
        assert!(!is_arm_logical_imm(0b101, Width::W64));
    }

    #[test]
    fn fmov_imm8_examples() {
        assert!(is_arm_fmov_imm(5.0));
        assert!(is_arm_fmov_imm(1.0));
        assert!(is_arm_fmov_imm(-0.5));
        assert!(!is_arm_fmov_imm(0.0));
        assert!(!is_arm_fmov_imm(0.1));
        assert!(!is_arm_fmov_imm(1e30));
    }
}
