//! Executable bitvector semantics for the supported instruction subsets.
//!
//! All semantics are width-parametric: a [`WordWidth`] of 64 gives the real
//! ISA behavior, while reduced widths (8 bits) make exhaustive ∀-verification
//! decidable at desk scale. Half-width accesses (ARMv8 w-registers, RISC-V
//! `*w` instructions) operate on the low half of the word at any width, and
//! immediates are masked into the active width.
//!
//! The update rule for every mnemonic is documented in `docs/semantics.md`.

pub mod exec;
pub mod smt;

use crate::asm::isa::sets_flags as mnemonic_sets_flags;
use crate::asm::{AsmLine, Instr, Isa, Operand, Reg, RegAccess, RegCell, Width};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("unsupported instruction: {mnemonic}")]
    UnsupportedInstruction { mnemonic: String },
    #[error("instruction contains a hole; concretize before evaluation")]
    HoleNotConcrete,
    #[error("malformed operands for {mnemonic}")]
    MalformedOperands { mnemonic: String },
    #[error("input value missing for register {0}")]
    MissingInput(String),
}

/// Active machine word width in bits. Must be even so half-width operations
/// stay meaningful; 64 is the architectural width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordWidth(u32);

impl WordWidth {
    pub const FULL: WordWidth = WordWidth(64);

    pub fn new(bits: u32) -> WordWidth {
        assert!(
            (2..=64).contains(&bits) && bits % 2 == 0,
            "word width must be even and within 2..=64"
        );
        WordWidth(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn mask(self) -> u64 {
        if self.0 == 64 {
            u64::MAX
        } else {
            (1u64 << self.0) - 1
        }
    }

    pub fn half_bits(self) -> u32 {
        self.0 / 2
    }

    pub fn half_mask(self) -> u64 {
        (1u64 << self.half_bits()) - 1
    }

    /// Width in bits of an access: full for 64-bit names, half for 32-bit
    /// names, scaled with the active word width.
    pub fn access_bits(self, w: Width) -> u32 {
        match w {
            Width::W64 => self.0,
            Width::W32 => self.half_bits(),
        }
    }
}

fn mask_bits(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Sign-extend the low `from` bits of `v` to `to` bits (result masked to `to`).
pub fn sign_extend(v: u64, from: u32, to: u32) -> u64 {
    let v = v & mask_bits(from);
    let sign = 1u64 << (from - 1);
    let extended = if v & sign != 0 {
        v | (!mask_bits(from))
    } else {
        v
    };
    extended & mask_bits(to)
}

fn to_signed(v: u64, bits: u32) -> i64 {
    sign_extend(v, bits, 64) as i64
}

/// ARMv8 NZCV condition flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub n: bool,
    pub z: bool,
    pub c: bool,
    pub v: bool,
}

/// Register-file state at one program point: a map from storage cells to
/// word-width bitvector values, plus condition flags (ARMv8 only).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    pub isa: Isa,
    pub width: WordWidth,
    regs: BTreeMap<RegCell, u64>,
    pub flags: Flags,
}

impl MachineState {
    pub fn new(isa: Isa, width: WordWidth) -> MachineState {
        MachineState {
            isa,
            width,
            regs: BTreeMap::new(),
            flags: Flags::default(),
        }
    }

    pub fn read_cell(&self, cell: RegCell) -> u64 {
        if cell == RegCell::Zero {
            return 0;
        }
        self.regs.get(&cell).copied().unwrap_or(0)
    }

    pub fn write_cell(&mut self, cell: RegCell, value: u64) {
        if cell == RegCell::Zero {
            return;
        }
        self.regs.insert(cell, value & self.width.mask());
    }

    /// Read through a register name: 32-bit names see the low half.
    pub fn read(&self, acc: RegAccess) -> u64 {
        let v = self.read_cell(acc.cell);
        match acc.width {
            Width::W64 => v,
            Width::W32 => v & self.width.half_mask(),
        }
    }

    /// Write through a register name: 32-bit names zero the high half.
    pub fn write(&mut self, acc: RegAccess, value: u64) {
        let v = match acc.width {
            Width::W64 => value & self.width.mask(),
            Width::W32 => value & self.width.half_mask(),
        };
        self.write_cell(acc.cell, v);
    }

    pub fn read_reg(&self, isa: Isa, r: &Reg) -> Result<u64, SemanticsError> {
        let acc = r
            .access(isa)
            .ok_or_else(|| SemanticsError::MissingInput(r.name.clone()))?;
        Ok(self.read(acc))
    }
}

/// Evaluate an ARMv8 condition code against flags.
pub fn cond_holds(cond: &str, f: Flags) -> bool {
    match cond {
        "eq" => f.z,
        "ne" => !f.z,
        "lt" => f.n != f.v,
        "ge" => f.n == f.v,
        "gt" => !f.z && f.n == f.v,
        "le" => f.z || f.n != f.v,
        "hi" => f.c && !f.z,
        "ls" => !f.c || f.z,
        "cs" | "hs" => f.c,
        "cc" | "lo" => !f.c,
        "mi" => f.n,
        "pl" => !f.n,
        "vs" => f.v,
        "vc" => !f.v,
        _ => false,
    }
}

fn reg_operand<'a>(instr: &'a Instr, i: usize) -> Result<&'a Reg, SemanticsError> {
    instr
        .operands
        .get(i)
        .and_then(Operand::as_register)
        .ok_or_else(|| SemanticsError::MalformedOperands {
            mnemonic: instr.mnemonic.clone(),
        })
}

fn access_of(isa: Isa, r: &Reg) -> Result<RegAccess, SemanticsError> {
    r.access(isa)
        .ok_or_else(|| SemanticsError::MissingInput(r.name.clone()))
}

/// Value of a register-or-immediate source operand, masked to `bits`.
/// Register reads at 32-bit names are half-width and zero-extended into the
/// active access width.
fn src_value(
    state: &MachineState,
    instr: &Instr,
    i: usize,
    bits: u32,
) -> Result<u64, SemanticsError> {
    match instr.operands.get(i) {
        Some(Operand::Register(r)) => {
            let acc = access_of(state.isa, r)?;
            Ok(state.read(acc) & mask_bits(bits))
        }
        Some(Operand::Immediate { value, .. }) => Ok((*value as u64) & mask_bits(bits)),
        _ => Err(SemanticsError::MalformedOperands {
            mnemonic: instr.mnemonic.clone(),
        }),
    }
}

fn arith_flags_add(a: u64, b: u64, bits: u32) -> (u64, Flags) {
    let mask = mask_bits(bits);
    let r = a.wrapping_add(b) & mask;
    let sign = 1u64 << (bits - 1);
    let carry = (a as u128 + b as u128) > mask as u128;
    let v = ((a ^ r) & (b ^ r) & sign) != 0;
    (
        r,
        Flags {
            n: r & sign != 0,
            z: r == 0,
            c: carry,
            v,
        },
    )
}

fn arith_flags_sub(a: u64, b: u64, bits: u32) -> (u64, Flags) {
    let mask = mask_bits(bits);
    let r = a.wrapping_sub(b) & mask;
    let sign = 1u64 << (bits - 1);
    (
        r,
        Flags {
            n: r & sign != 0,
            z: r == 0,
            // C is NOT borrow on AArch64.
            c: a >= b,
            v: ((a ^ b) & (a ^ r) & sign) != 0,
        },
    )
}

/// Execute one supported, non-boundary instruction, producing the successor
/// state. Pure: the input state is unchanged.
pub fn step(state: &MachineState, line: &AsmLine) -> Result<MachineState, SemanticsError> {
    let mut next = state.clone();
    step_mut(&mut next, line)?;
    Ok(next)
}

/// In-place variant of [`step`] for hot verification loops.
pub fn step_mut(state: &mut MachineState, line: &AsmLine) -> Result<(), SemanticsError> {
    let instr = match &line.kind {
        crate::asm::LineKind::Instruction(i) => i,
        _ => {
            return Err(SemanticsError::UnsupportedInstruction {
                mnemonic: crate::asm::print_line(line).trim().to_string(),
            })
        }
    };
    if !instr.known {
        return Err(SemanticsError::UnsupportedInstruction {
            mnemonic: instr.mnemonic.clone(),
        });
    }
    if instr.mnemonic == "nop" {
        return Ok(());
    }
    match state.isa {
        Isa::Armv8 => step_arm(state, instr),
        Isa::Riscv64 => step_riscv(state, instr),
    }
}

fn unsupported(instr: &Instr) -> SemanticsError {
    SemanticsError::UnsupportedInstruction {
        mnemonic: instr.mnemonic.clone(),
    }
}

fn step_arm(state: &mut MachineState, instr: &Instr) -> Result<(), SemanticsError> {
    let w = state.width;
    let m = instr.mnemonic.as_str();

    if m == "fmov" {
        let dst = reg_operand(instr, 0)?;
        let dst_acc = access_of(state.isa, dst)?;
        let value = match instr.operands.get(1) {
            Some(Operand::FloatImmediate { bits, .. }) => *bits & w.mask(),
            Some(Operand::Register(r)) => state.read(access_of(state.isa, r)?),
            _ => return Err(SemanticsError::MalformedOperands { mnemonic: m.into() }),
        };
        state.write(dst_acc, value);
        return Ok(());
    }

    if m == "cmp" {
        let lhs = reg_operand(instr, 0)?;
        let acc = access_of(state.isa, lhs)?;
        let bits = w.access_bits(acc.width);
        let a = state.read(acc);
        let b = src_value(state, instr, 1, bits)?;
        let (_, flags) = arith_flags_sub(a, b, bits);
        state.flags = flags;
        return Ok(());
    }

    let dst = reg_operand(instr, 0)?;
    let dst_acc = access_of(state.isa, dst)?;
    let bits = w.access_bits(dst_acc.width);

    match m {
        "mov" => {
            let v = src_value(state, instr, 1, bits)?;
            state.write(dst_acc, v);
        }
        "movk" => {
            let imm = instr.operands.get(1).and_then(Operand::as_immediate).ok_or_else(|| {
                SemanticsError::MalformedOperands { mnemonic: m.into() }
            })? as u64;
            let shift = match instr.operands.get(2) {
                Some(Operand::Shift { amount, .. }) => u32::from(*amount),
                None => 0,
                _ => return Err(SemanticsError::MalformedOperands { mnemonic: m.into() }),
            };
            let old = state.read(dst_acc);
            let chunk = 0xffffu64.checked_shl(shift).unwrap_or(0) & mask_bits(bits);
            let v = (old & !chunk) | ((imm & 0xffff).checked_shl(shift).unwrap_or(0) & chunk);
            state.write(dst_acc, v);
        }
        "add" | "sub" | "adds" | "subs" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?) & mask_bits(bits);
            let b = src_value(state, instr, 2, bits)?;
            let (r, flags) = if m.starts_with("add") {
                arith_flags_add(a, b, bits)
            } else {
                arith_flags_sub(a, b, bits)
            };
            if mnemonic_sets_flags(state.isa, m) {
                state.flags = flags;
            }
            state.write(dst_acc, r);
        }
        "mul" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?) & mask_bits(bits);
            let b = src_value(state, instr, 2, bits)?;
            state.write(dst_acc, a.wrapping_mul(b) & mask_bits(bits));
        }
        "smull" => {
            // xd = sext(wn) * sext(wm), destination at full width.
            let h = w.half_bits();
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?) & w.half_mask();
            let b = state.read(access_of(state.isa, reg_operand(instr, 2)?)?) & w.half_mask();
            let prod = to_signed(a, h).wrapping_mul(to_signed(b, h)) as u64;
            state.write(dst_acc, prod & w.mask());
        }
        "lsl" | "lsr" | "asr" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?) & mask_bits(bits);
            let amt = (src_value(state, instr, 2, 64)? % u64::from(bits)) as u32;
            let r = match m {
                "lsl" => a.checked_shl(amt).unwrap_or(0),
                "lsr" => a.checked_shr(amt).unwrap_or(0),
                _ => {
                    let sa = to_signed(a, bits);
                    (sa >> amt) as u64
                }
            };
            state.write(dst_acc, r & mask_bits(bits));
        }
        "and" | "orr" | "eor" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?) & mask_bits(bits);
            let b = src_value(state, instr, 2, bits)?;
            let r = match m {
                "and" => a & b,
                "orr" => a | b,
                _ => a ^ b,
            };
            state.write(dst_acc, r & mask_bits(bits));
        }
        _ => return Err(unsupported(instr)),
    }
    Ok(())
}

fn step_riscv(state: &mut MachineState, instr: &Instr) -> Result<(), SemanticsError> {
    let w = state.width;
    let m = instr.mnemonic.as_str();
    let full = w.bits();
    let h = w.half_bits();

    let dst = reg_operand(instr, 0)?;
    let dst_acc = access_of(state.isa, dst)?;

    let word_op = m.ends_with('w') && m != "lw" && m != "sw";
    let bits = if word_op || m == "sext.w" { h } else { full };

    let result: u64 = match m {
        "li" | "lui" => {
            let imm = instr
                .operands
                .get(1)
                .and_then(Operand::as_immediate)
                .ok_or_else(|| SemanticsError::MalformedOperands { mnemonic: m.into() })?
                as u64;
            if m == "lui" {
                sign_extend(imm.checked_shl(12).unwrap_or(0), h, full)
            } else {
                imm & w.mask()
            }
        }
        "mv" => state.read(access_of(state.isa, reg_operand(instr, 1)?)?),
        "sext.w" => {
            let v = state.read(access_of(state.isa, reg_operand(instr, 1)?)?);
            sign_extend(v, h, full)
        }
        "fmv.x.d" => state.read(access_of(state.isa, reg_operand(instr, 1)?)?),
        "add" | "addw" | "addi" | "addiw" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?);
            let b = src_value(state, instr, 2, bits)?;
            widen(a.wrapping_add(b), bits, full, word_op || m == "addiw")
        }
        "sub" | "subw" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?);
            let b = src_value(state, instr, 2, bits)?;
            widen(a.wrapping_sub(b), bits, full, word_op)
        }
        "mul" | "mulw" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?);
            let b = src_value(state, instr, 2, bits)?;
            widen(a.wrapping_mul(b), bits, full, word_op)
        }
        "div" | "divw" | "rem" | "remw" => {
            let a_raw = state.read(access_of(state.isa, reg_operand(instr, 1)?)?);
            let b_raw = src_value(state, instr, 2, bits)?;
            let a = to_signed(a_raw & mask_bits(bits), bits);
            let b = to_signed(b_raw & mask_bits(bits), bits);
            let min = to_signed(1u64 << (bits - 1), bits);
            let quot = m.starts_with("div");
            let r = if b == 0 {
                // Division by zero: quotient all-ones, remainder = dividend.
                if quot {
                    mask_bits(bits)
                } else {
                    a as u64 & mask_bits(bits)
                }
            } else if a == min && b == -1 {
                // Signed overflow: quotient MIN, remainder 0.
                if quot {
                    min as u64 & mask_bits(bits)
                } else {
                    0
                }
            } else if quot {
                (a / b) as u64 & mask_bits(bits)
            } else {
                (a % b) as u64 & mask_bits(bits)
            };
            widen(r, bits, full, word_op)
        }
        "sll" | "sllw" | "slli" | "slliw" | "srl" | "srlw" | "srli" | "srliw" | "sra" | "sraw"
        | "srai" | "sraiw" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?) & mask_bits(bits);
            let amt = (src_value(state, instr, 2, 64)? % u64::from(bits)) as u32;
            let r = if m.starts_with("sll") {
                a.checked_shl(amt).unwrap_or(0)
            } else if m.starts_with("srl") {
                a.checked_shr(amt).unwrap_or(0)
            } else {
                (to_signed(a, bits) >> amt) as u64
            };
            widen(r & mask_bits(bits), bits, full, word_op)
        }
        "and" | "andi" | "or" | "ori" | "xor" | "xori" => {
            let a = state.read(access_of(state.isa, reg_operand(instr, 1)?)?);
            let b = src_value(state, instr, 2, bits)?;
            let r = match &m[..2] {
                "an" => a & b,
                "or" => a | b,
                _ => a ^ b,
            };
            r & w.mask()
        }
        _ => return Err(unsupported(instr)),
    };
    state.write(dst_acc, result);
    Ok(())
}

/// Mask a word-op result to its operating width and sign-extend to full when
/// the mnemonic is a `*w` form.
fn widen(v: u64, bits: u32, full: u32, word_op: bool) -> u64 {
    let v = v & mask_bits(bits);
    if word_op {
        sign_extend(v, bits, full)
    } else {
        v
    }
}

/// A block correctness specification: executable lines plus named inputs and
/// outputs. Lines must satisfy pure-block purity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub isa: Isa,
    pub lines: Vec<AsmLine>,
    pub input_registers: Vec<Reg>,
    pub output_registers: Vec<Reg>,
}

impl BlockSpec {
    pub fn from_block(isa: Isa, b: &crate::blocks::PureBlock) -> BlockSpec {
        BlockSpec {
            isa,
            lines: b.lines.clone(),
            input_registers: b.input_registers.clone(),
            output_registers: b.output_registers.clone(),
        }
    }

    pub fn sets_flags(&self) -> bool {
        self.lines.iter().any(|l| match l.instr() {
            Some(i) => mnemonic_sets_flags(self.isa, &i.mnemonic),
            None => false,
        })
    }
}

/// Run a block from a state where the input registers hold `inputs` (set at
/// full cell width) and every other register is zero. Returns the values of
/// the output registers in order, plus the final flags.
pub fn eval_block(
    spec: &BlockSpec,
    inputs: &[u64],
    width: WordWidth,
) -> Result<(Vec<u64>, Flags), SemanticsError> {
    if inputs.len() != spec.input_registers.len() {
        return Err(SemanticsError::MissingInput(format!(
            "expected {} inputs, got {}",
            spec.input_registers.len(),
            inputs.len()
        )));
    }
    let mut state = MachineState::new(spec.isa, width);
    for (r, v) in spec.input_registers.iter().zip(inputs) {
        let acc = access_of(spec.isa, r)?;
        state.write_cell(acc.cell, *v);
    }
    for line in &spec.lines {
        step_mut(&mut state, line)?;
    }
    let mut outs = Vec::with_capacity(spec.output_registers.len());
    for r in &spec.output_registers {
        let acc = access_of(spec.isa, r)?;
        outs.push(state.read_cell(acc.cell));
    }
    Ok((outs, state.flags))
}

/// Map-based convenience wrapper over [`eval_block`].
pub fn eval_block_map(
    spec: &BlockSpec,
    inputs: &BTreeMap<String, u64>,
    width: WordWidth,
) -> Result<BTreeMap<String, u64>, SemanticsError> {
    let vals: Vec<u64> = spec
        .input_registers
        .iter()
        .map(|r| {
            inputs
                .get(&r.name)
                .copied()
                .ok_or_else(|| SemanticsError::MissingInput(r.name.clone()))
        })
        .collect::<Result<_, _>>()?;
    let (outs, _) = eval_block(spec, &vals, width)?;
    Ok(spec
        .output_registers
        .iter()
        .map(|r| r.name.clone())
        .zip(outs)
        .collect())
}

/// How input and output registers of two blocks are paired for equivalence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegPairing {
    /// Same-ISA: both blocks run over one shared register file; outputs are
    /// compared cell-by-cell over the union of both output sets.
    Identity,
    /// k-th input of x pairs with k-th input of y (first-read order), and
    /// k-th output with k-th output (first-write order).
    Positional,
    /// Explicit name pairs (x-side, y-side) covering inputs and outputs.
    Explicit(Vec<(Reg, Reg)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent {
        inputs_tested: usize,
    },
    /// Inputs (in x-side input order; for Identity, in the merged universe
    /// order) on which the blocks disagree.
    Counterexample {
        inputs: Vec<u64>,
        inputs_tested: usize,
    },
    /// Register sets cannot be paired under the given pairing.
    Incomparable {
        reason: String,
    },
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent { .. })
    }
}

/// Verification strategy for [`blocks_equivalent`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifierConfig {
    /// Reduced width for exhaustive checking; `None` disables it.
    pub exhaustive_width: Option<u32>,
    /// Exhaustive enumeration runs only when inputs × width ≤ this many bits.
    pub exhaustive_budget_bits: u32,
    /// Random full-width vectors on top of the corner battery.
    pub random_samples: usize,
    pub seed: u64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            exhaustive_width: Some(8),
            exhaustive_budget_bits: 16,
            random_samples: 10_000,
            seed: 0x5eed,
        }
    }
}

/// The input universe of an equivalence query, resolved against a pairing.
#[derive(Debug, Clone)]
pub struct PairedIo {
    /// Input registers fed per side; same length.
    pub x_inputs: Vec<Reg>,
    pub y_inputs: Vec<Reg>,
    /// Output register pairs compared after execution.
    pub outputs: Vec<(Reg, Reg)>,
    /// Identity pairing compares full storage cells (strict, same-ISA);
    /// cross-ISA pairings compare the named views at the narrower access
    /// width, since a 32-bit name is the value the block exposes.
    pub cell_compare: bool,
}

/// Resolve how two blocks' inputs and outputs pair up under a pairing.
pub fn pair_io(
    spec_x: &BlockSpec,
    spec_y: &BlockSpec,
    pairing: &RegPairing,
) -> Result<PairedIo, String> {
    match pairing {
        RegPairing::Identity => {
            if spec_x.isa != spec_y.isa {
                return Err("identity pairing requires matching ISAs".into());
            }
            let mut inputs: Vec<Reg> = Vec::new();
            let mut seen = std::collections::BTreeSet::new();
            for r in spec_x
                .input_registers
                .iter()
                .chain(spec_y.input_registers.iter())
            {
                let cell = r.access(spec_x.isa).map(|a| a.cell);
                if let Some(c) = cell {
                    if seen.insert(c) {
                        inputs.push(r.clone());
                    }
                }
            }
            let mut outputs: Vec<(Reg, Reg)> = Vec::new();
            let mut out_seen = std::collections::BTreeSet::new();
            for r in spec_x
                .output_registers
                .iter()
                .chain(spec_y.output_registers.iter())
            {
                if let Some(a) = r.access(spec_x.isa) {
                    if out_seen.insert(a.cell) {
                        outputs.push((r.clone(), r.clone()));
                    }
                }
            }
            Ok(PairedIo {
                x_inputs: inputs.clone(),
                y_inputs: inputs,
                outputs,
                cell_compare: true,
            })
        }
        RegPairing::Positional => {
            if spec_x.input_registers.len() != spec_y.input_registers.len() {
                return Err(format!(
                    "input counts differ: {} vs {}",
                    spec_x.input_registers.len(),
                    spec_y.input_registers.len()
                ));
            }
            if spec_x.output_registers.len() != spec_y.output_registers.len() {
                return Err(format!(
                    "output counts differ: {} vs {}",
                    spec_x.output_registers.len(),
                    spec_y.output_registers.len()
                ));
            }
            Ok(PairedIo {
                x_inputs: spec_x.input_registers.clone(),
                y_inputs: spec_y.input_registers.clone(),
                outputs: spec_x
                    .output_registers
                    .iter()
                    .cloned()
                    .zip(spec_y.output_registers.iter().cloned())
                    .collect(),
                cell_compare: false,
            })
        }
        RegPairing::Explicit(pairs) => {
            let map_y = |x: &Reg| -> Option<Reg> {
                pairs
                    .iter()
                    .find(|(a, _)| a.name == x.name)
                    .map(|(_, b)| b.clone())
            };
            let mut x_inputs = Vec::new();
            let mut y_inputs = Vec::new();
            for r in &spec_x.input_registers {
                let y = map_y(r).ok_or_else(|| format!("no pairing for input {}", r.name))?;
                x_inputs.push(r.clone());
                y_inputs.push(y);
            }
            // Every y input must be covered, or y reads an unconstrained reg.
            for ry in &spec_y.input_registers {
                if !y_inputs.iter().any(|r| r.name == ry.name) {
                    return Err(format!("y-side input {} not paired", ry.name));
                }
            }
            let mut outputs = Vec::new();
            for r in &spec_x.output_registers {
                let y = map_y(r).ok_or_else(|| format!("no pairing for output {}", r.name))?;
                outputs.push((r.clone(), y));
            }
            for ry in &spec_y.output_registers {
                if !outputs.iter().any(|(_, b)| b.name == ry.name) {
                    return Err(format!("y-side output {} not paired", ry.name));
                }
            }
            Ok(PairedIo {
                x_inputs,
                y_inputs,
                outputs,
                cell_compare: false,
            })
        }
    }
}

pub(crate) fn run_side(
    spec: &BlockSpec,
    inputs: &[Reg],
    values: &[u64],
    width: WordWidth,
) -> Result<(MachineState, Flags), SemanticsError> {
    let mut state = MachineState::new(spec.isa, width);
    for (r, v) in inputs.iter().zip(values) {
        let acc = access_of(spec.isa, r)?;
        state.write_cell(acc.cell, *v);
    }
    for line in &spec.lines {
        step_mut(&mut state, line)?;
    }
    let flags = state.flags;
    Ok((state, flags))
}

/// Run a block from a full cell-valued state (missing cells read as zero).
/// Returns the final state.
pub fn eval_block_cells(
    spec: &BlockSpec,
    cells: &BTreeMap<RegCell, u64>,
    width: WordWidth,
) -> Result<MachineState, SemanticsError> {
    let mut state = MachineState::new(spec.isa, width);
    for (&cell, &v) in cells {
        state.write_cell(cell, v);
    }
    for line in &spec.lines {
        step_mut(&mut state, line)?;
    }
    Ok(state)
}

/// Compare two blocks on one input vector. Flags are compared only when both
/// sides are flag-setting ARMv8 blocks.
fn agree_on(
    spec_x: &BlockSpec,
    spec_y: &BlockSpec,
    paired: &PairedIo,
    values: &[u64],
    width: WordWidth,
    compare_flags: bool,
) -> Result<bool, SemanticsError> {
    let (sx, fx) = run_side(spec_x, &paired.x_inputs, values, width)?;
    let (sy, fy) = run_side(spec_y, &paired.y_inputs, values, width)?;
    for (rx, ry) in &paired.outputs {
        let ax = access_of(spec_x.isa, rx)?;
        let ay = access_of(spec_y.isa, ry)?;
        if paired.cell_compare {
            if sx.read_cell(ax.cell) != sy.read_cell(ay.cell) {
                return Ok(false);
            }
        } else {
            let bits = width.access_bits(ax.width).min(width.access_bits(ay.width));
            if sx.read(ax) & mask_bits(bits) != sy.read(ay) & mask_bits(bits) {
                return Ok(false);
            }
        }
    }
    if compare_flags && fx != fy {
        return Ok(false);
    }
    Ok(true)
}

const CORNERS: [u64; 5] = [0, 1, u64::MAX, 1 << 63, (1 << 63) - 1];

/// Decide block equivalence under a register pairing: exhaustive enumeration
/// at reduced width when the joint input space fits the budget, plus a
/// corner battery and a randomized battery at full width. Returns a concrete
/// counterexample input vector on failure.
pub fn blocks_equivalent(
    spec_x: &BlockSpec,
    spec_y: &BlockSpec,
    pairing: &RegPairing,
    config: &VerifierConfig,
) -> Equivalence {
    let paired = match pair_io(spec_x, spec_y, pairing) {
        Ok(p) => p,
        Err(reason) => return Equivalence::Incomparable { reason },
    };
    let n = paired.x_inputs.len();
    let compare_flags = spec_x.isa == Isa::Armv8
        && spec_y.isa == Isa::Armv8
        && spec_x.sets_flags()
        && spec_y.sets_flags();

    let mut tested = 0usize;
    let check = |values: &[u64], width: WordWidth, tested: &mut usize| -> Option<Equivalence> {
        *tested += 1;
        match agree_on(spec_x, spec_y, &paired, values, width, compare_flags) {
            Ok(true) => None,
            Ok(false) => Some(Equivalence::Counterexample {
                inputs: values.to_vec(),
                inputs_tested: *tested,
            }),
            Err(e) => Some(Equivalence::Incomparable {
                reason: e.to_string(),
            }),
        }
    };

    // Corner battery at full width: full cartesian product for up to two
    // inputs, broadcast corners otherwise.
    if n <= 2 {
        let mut values = vec![0u64; n];
        let mut idx = vec![0usize; n];
        loop {
            for (i, v) in idx.iter().enumerate() {
                values[i] = CORNERS[*v];
            }
            if let Some(r) = check(&values, WordWidth::FULL, &mut tested) {
                return r;
            }
            let mut k = 0;
            loop {
                if k == n {
                    break;
                }
                idx[k] += 1;
                if idx[k] < CORNERS.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    } else {
        for c in CORNERS {
            let values = vec![c; n];
            if let Some(r) = check(&values, WordWidth::FULL, &mut tested) {
                return r;
            }
        }
    }

    // Exhaustive reduced-width enumeration.
    if let Some(wbits) = config.exhaustive_width {
        if n as u32 * wbits <= config.exhaustive_budget_bits {
            let width = WordWidth::new(wbits);
            let total: u64 = 1u64 << (n as u32 * wbits);
            let mut values = vec![0u64; n];
            for combo in 0..total {
                let mut c = combo;
                for v in values.iter_mut() {
                    *v = c & mask_bits(wbits);
                    c >>= wbits;
                }
                if let Some(r) = check(&values, width, &mut tested) {
                    return r;
                }
            }
        }
    }

    // Randomized battery at full width.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut values = vec![0u64; n];
    for _ in 0..config.random_samples {
        for v in values.iter_mut() {
            *v = rng.gen();
        }
        if let Some(r) = check(&values, WordWidth::FULL, &mut tested) {
            return r;
        }
    }

    Equivalence::Equivalent {
        inputs_tested: tested,
    }
}

#[cfg(test)]
mod tests;
