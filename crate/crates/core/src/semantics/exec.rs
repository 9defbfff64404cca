//! Whole-program interpreter used as the internal execution oracle.
//!
//! Runs programs built solely from supported instructions plus calls to a
//! whitelisted stub set (`printf` with integer formatting, `exit`,
//! `__stack_chk_fail`). Globals are laid out in a synthetic data segment,
//! GOT-style references resolve through synthetic slots, and the stack lives
//! in its own mapped region. Anything outside this scope must go through an
//! external-command oracle instead.

use super::{cond_holds, sign_extend, step_mut, MachineState, WordWidth};
use crate::asm::isa::{arm_branch_cond, instr_kind, InstrKind};
use crate::asm::{
    AsmLine, Instr, Isa, LineKind, MemOffset, Operand, Program, RefModifier, Reg, RegCell,
    Segment, Width,
};
use std::collections::BTreeMap;

const GLOBALS_BASE: u64 = 0x0040_0000;
const STACK_TOP: u64 = 0x7fff_0000;
const STACK_SIZE: u64 = 1 << 20;
/// Synthetic code addresses: CODE_BASE + 4 * pc-index.
const CODE_BASE: u64 = 0x0010_0000;
/// Link-register value marking return from the entry function.
const RA_SENTINEL: u64 = 0xfffe_0000_0000_0000;
const STACK_GUARD_VALUE: u64 = 0x5afe_c0de_5afe_c0de;

/// Calls the interpreter can stub out.
const CALL_WHITELIST: &[&str] = &["printf", "exit", "__stack_chk_fail"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecConfig {
    pub max_steps: u64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    /// Access to an unmapped address.
    MemoryAccess(u64),
    StepLimit,
    UnsupportedInstruction(String),
    UndefinedLabel(String),
    UnsupportedCall(String),
    StackCheckFail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecOutcome {
    Finished { exit_code: i32, stdout: String },
    Fault { kind: FaultKind, stdout: String },
}

impl ExecOutcome {
    pub fn stdout(&self) -> &str {
        match self {
            ExecOutcome::Finished { stdout, .. } | ExecOutcome::Fault { stdout, .. } => stdout,
        }
    }
}

/// Check whether a program fits the internal oracle's scope: every
/// instruction supported and every call target local or whitelisted.
pub fn check_internal_scope(p: &Program) -> Result<(), String> {
    let local: std::collections::BTreeSet<&str> = p.functions().map(|f| f.name.as_str()).collect();
    for f in p.functions() {
        for line in &f.lines {
            let instr = match line.instr() {
                Some(i) => i,
                None => continue,
            };
            if !instr.known {
                return Err(format!("opaque instruction `{}`", instr.mnemonic));
            }
            if matches!(instr_kind(f.isa, &instr.mnemonic), Some(InstrKind::Call)) {
                if let Some(Operand::LabelRef(l)) = instr.operands.last() {
                    if !local.contains(l.name.as_str())
                        && !CALL_WHITELIST.contains(&l.name.as_str())
                    {
                        return Err(format!("call to non-whitelisted symbol `{}`", l.name));
                    }
                }
            }
        }
    }
    Ok(())
}

enum CodeItem {
    Instr(AsmLine),
    /// Synthetic return at the end of each function body.
    ImplicitRet,
}

struct Image {
    code: Vec<CodeItem>,
    isa: Isa,
    /// Any label inside a function body → pc of the next instruction.
    label_pc: BTreeMap<String, usize>,
    /// Data labels and synthetic extern cells → address.
    data_addr: BTreeMap<String, u64>,
    /// GOT slots for :got:-referenced symbols.
    got_addr: BTreeMap<String, u64>,
    memory: BTreeMap<u64, u8>,
    ranges: Vec<(u64, u64)>,
}

fn unescape(s: &str) -> Vec<u8> {
    let mut out = Vec::new();
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'\\' && i + 1 < b.len() {
            i += 1;
            match b[i] {
                b'n' => out.push(b'\n'),
                b't' => out.push(b'\t'),
                b'r' => out.push(b'\r'),
                b'\\' => out.push(b'\\'),
                b'"' => out.push(b'"'),
                b'\'' => out.push(b'\''),
                b'0'..=b'7' => {
                    let mut v = 0u32;
                    let mut n = 0;
                    while n < 3 && i < b.len() && (b'0'..=b'7').contains(&b[i]) {
                        v = v * 8 + u32::from(b[i] - b'0');
                        i += 1;
                        n += 1;
                    }
                    i -= 1;
                    out.push(v as u8);
                }
                other => out.push(other),
            }
            i += 1;
        } else {
            out.push(b[i]);
            i += 1;
        }
    }
    out
}

fn string_directive_bytes(args: &str, nul: bool) -> Vec<u8> {
    let inner = args
        .trim()
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .unwrap_or(args);
    let mut bytes = unescape(inner);
    if nul {
        bytes.push(0);
    }
    bytes
}

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

impl Image {
    fn build(p: &Program) -> Image {
        let mut image = Image {
            code: Vec::new(),
            isa: p.isa,
            label_pc: BTreeMap::new(),
            data_addr: BTreeMap::new(),
            got_addr: BTreeMap::new(),
            memory: BTreeMap::new(),
            ranges: Vec::new(),
        };

        // Flatten code; labels inside functions map to the next pc.
        let mut pending_labels: Vec<String> = Vec::new();
        for seg in &p.segments {
            if let Segment::Function(f) = seg {
                for line in &f.lines {
                    match &line.kind {
                        LineKind::Label(n) => pending_labels.push(n.clone()),
                        LineKind::Instruction(_) => {
                            for l in pending_labels.drain(..) {
                                image.label_pc.insert(l, image.code.len());
                            }
                            image.code.push(CodeItem::Instr(line.clone()));
                        }
                        LineKind::Directive { .. } => {}
                    }
                }
                for l in pending_labels.drain(..) {
                    image.label_pc.insert(l, image.code.len());
                }
                image.code.push(CodeItem::ImplicitRet);
            }
        }

        // Lay out data labels from metadata segments. Pointer data
        // (.xword LABEL) is patched once all addresses exist.
        let mut addr = GLOBALS_BASE;
        let mut patches: Vec<(u64, usize, String)> = Vec::new();
        for seg in &p.segments {
            let lines = match seg {
                Segment::Meta(lines) => lines,
                Segment::Function(_) => continue,
            };
            for line in lines {
                match &line.kind {
                    LineKind::Label(n) => {
                        image.data_addr.insert(n.clone(), addr);
                    }
                    LineKind::Directive { name, args } => match name.as_str() {
                        ".align" | ".p2align" => {
                            if let Some(n) = parse_data_int(args.split(',').next().unwrap_or("0"))
                            {
                                let align = 1u64 << n.min(12);
                                addr = addr.next_multiple_of(align);
                            }
                        }
                        ".string" | ".asciz" => {
                            for b in string_directive_bytes(args, true) {
                                image.memory.insert(addr, b);
                                addr += 1;
                            }
                        }
                        ".ascii" => {
                            for b in string_directive_bytes(args, false) {
                                image.memory.insert(addr, b);
                                addr += 1;
                            }
                        }
                        ".byte" | ".hword" | ".half" | ".short" | ".word" | ".xword" | ".dword"
                        | ".quad" | ".2byte" | ".4byte" | ".8byte" => {
                            let size: u64 = match name.as_str() {
                                ".byte" => 1,
                                ".hword" | ".half" | ".short" | ".2byte" => 2,
                                ".word" | ".4byte" => 4,
                                _ => 8,
                            };
                            for piece in args.split(',') {
                                let piece = piece.trim();
                                let v = match parse_data_int(piece) {
                                    Some(v) => v,
                                    None => {
                                        patches.push((addr, size as usize, piece.to_string()));
                                        0
                                    }
                                };
                                for k in 0..size {
                                    image.memory.insert(addr + k, (v >> (8 * k)) as u8);
                                }
                                addr += size;
                            }
                        }
                        ".zero" | ".skip" | ".space" => {
                            if let Some(n) = parse_data_int(args.split(',').next().unwrap_or("0"))
                            {
                                for k in 0..n {
                                    image.memory.insert(addr + k, 0);
                                }
                                addr += n;
                            }
                        }
                        ".comm" | ".lcomm" => {
                            let mut it = args.split(',');
                            let cname = it.next().unwrap_or("").trim().to_string();
                            let size = it.next().and_then(parse_data_int).unwrap_or(8);
                            let aligned = addr.next_multiple_of(8);
                            image.data_addr.insert(cname, aligned);
                            for k in 0..size {
                                image.memory.insert(aligned + k, 0);
                            }
                            addr = aligned + size;
                        }
                        _ => {}
                    },
                    LineKind::Instruction(_) => {}
                }
            }
        }

        // Synthetic cells for data externs referenced but not defined.
        let mut extern_syms: Vec<String> = Vec::new();
        let mut got_syms: Vec<String> = Vec::new();
        for f in p.functions() {
            for line in &f.lines {
                if let Some(instr) = line.instr() {
                    let is_call =
                        matches!(instr_kind(p.isa, &instr.mnemonic), Some(InstrKind::Call));
                    for op in &instr.operands {
                        if let Some(l) = op.referenced_label() {
                            let known = image.data_addr.contains_key(&l.name)
                                || image.label_pc.contains_key(&l.name);
                            if matches!(l.modifier, RefModifier::Got | RefModifier::GotLo12)
                                && !got_syms.contains(&l.name)
                            {
                                got_syms.push(l.name.clone());
                            }
                            if !known && !is_call && !extern_syms.contains(&l.name) {
                                extern_syms.push(l.name.clone());
                            }
                        }
                    }
                }
            }
        }
        for sym in extern_syms {
            if image.data_addr.contains_key(&sym) {
                continue;
            }
            let aligned = addr.next_multiple_of(8);
            let value = if sym == "__stack_chk_guard" {
                STACK_GUARD_VALUE
            } else {
                0
            };
            for k in 0..8 {
                image.memory.insert(aligned + k, (value >> (8 * k)) as u8);
            }
            image.data_addr.insert(sym, aligned);
            addr = aligned + 8;
        }
        for sym in got_syms {
            let aligned = addr.next_multiple_of(8);
            let target = image.data_addr.get(&sym).copied().unwrap_or(0);
            for k in 0..8 {
                image.memory.insert(aligned + k, (target >> (8 * k)) as u8);
            }
            image.got_addr.insert(sym, aligned);
            addr = aligned + 8;
        }

        for (at, size, label) in patches {
            let v = image
                .data_addr
                .get(&label)
                .copied()
                .or_else(|| {
                    image
                        .label_pc
                        .get(&label)
                        .map(|&pc| CODE_BASE + 4 * pc as u64)
                })
                .unwrap_or(0);
            for k in 0..size as u64 {
                image.memory.insert(at + k, (v >> (8 * k)) as u8);
            }
        }

        image.ranges.push((GLOBALS_BASE, addr + 64));
        image.ranges.push((STACK_TOP - STACK_SIZE, STACK_TOP + 16));
        image
    }

    fn mapped(&self, a: u64) -> bool {
        self.ranges.iter().any(|&(lo, hi)| a >= lo && a < hi)
    }

    fn read_bytes(&self, addr: u64, n: u64) -> Option<u64> {
        let mut v = 0u64;
        for k in 0..n {
            let a = addr.checked_add(k)?;
            if !self.mapped(a) {
                return None;
            }
            v |= u64::from(self.memory.get(&a).copied().unwrap_or(0)) << (8 * k);
        }
        Some(v)
    }

    fn write_bytes(&mut self, addr: u64, n: u64, v: u64) -> bool {
        for k in 0..n {
            let a = match addr.checked_add(k) {
                Some(a) => a,
                None => return false,
            };
            if !self.mapped(a) {
                return false;
            }
            self.memory.insert(a, (v >> (8 * k)) as u8);
        }
        true
    }

    fn symbol_addr(&self, name: &str) -> Option<u64> {
        self.data_addr.get(name).copied().or_else(|| {
            self.label_pc
                .get(name)
                .map(|&pc| CODE_BASE + 4 * pc as u64)
        })
    }
}

struct Machine<'a> {
    image: Image,
    state: MachineState,
    stdout: String,
    config: &'a ExecConfig,
}

enum Flow {
    Next,
    Jump(usize),
    Exit(i32),
    Fault(FaultKind),
}

/// Run a program's `main` on the internal interpreter.
pub fn run_program(p: &Program, config: &ExecConfig) -> ExecOutcome {
    if let Err(reason) = check_internal_scope(p) {
        return ExecOutcome::Fault {
            kind: FaultKind::UnsupportedCall(reason),
            stdout: String::new(),
        };
    }
    let image = Image::build(p);
    let entry = match image.label_pc.get("main") {
        Some(&pc) => pc,
        None => {
            return ExecOutcome::Fault {
                kind: FaultKind::UndefinedLabel("main".into()),
                stdout: String::new(),
            }
        }
    };
    let mut state = MachineState::new(p.isa, WordWidth::FULL);
    let (sp_cell, ra_cell) = match p.isa {
        Isa::Armv8 => (RegCell::Sp, RegCell::Int(30)),
        Isa::Riscv64 => (RegCell::Int(2), RegCell::Int(1)),
    };
    state.write_cell(sp_cell, STACK_TOP - 256);
    state.write_cell(ra_cell, RA_SENTINEL);

    let mut m = Machine {
        image,
        state,
        stdout: String::new(),
        config,
    };
    let mut pc = entry;
    let mut steps = 0u64;
    loop {
        steps += 1;
        if steps > m.config.max_steps {
            return ExecOutcome::Fault {
                kind: FaultKind::StepLimit,
                stdout: m.stdout,
            };
        }
        let flow = match &m.image.code.get(pc) {
            Some(CodeItem::ImplicitRet) | None => m.do_ret(None),
            Some(CodeItem::Instr(line)) => {
                let line = line.clone();
                m.exec_line(&line, pc)
            }
        };
        match flow {
            Flow::Next => pc += 1,
            Flow::Jump(t) => pc = t,
            Flow::Exit(code) => {
                return ExecOutcome::Finished {
                    exit_code: code,
                    stdout: m.stdout,
                }
            }
            Flow::Fault(kind) => {
                return ExecOutcome::Fault {
                    kind,
                    stdout: m.stdout,
                }
            }
        }
    }
}

impl Machine<'_> {
    fn isa(&self) -> Isa {
        self.image.isa
    }

    fn read_reg(&self, r: &Reg) -> u64 {
        r.access(self.isa())
            .map(|a| self.state.read(a))
            .unwrap_or(0)
    }

    fn write_reg(&mut self, r: &Reg, v: u64) {
        if let Some(a) = r.access(self.isa()) {
            self.state.write(a, v);
        }
    }

    fn do_ret(&mut self, reg: Option<&Reg>) -> Flow {
        let ra = match (reg, self.isa()) {
            (Some(r), _) => self.read_reg(r),
            (None, Isa::Armv8) => self.state.read_cell(RegCell::Int(30)),
            (None, Isa::Riscv64) => self.state.read_cell(RegCell::Int(1)),
        };
        if ra == RA_SENTINEL {
            let v = match self.isa() {
                Isa::Armv8 => self.state.read_cell(RegCell::Int(0)),
                Isa::Riscv64 => self.state.read_cell(RegCell::Int(10)),
            };
            return Flow::Exit((v & 0xff) as i32);
        }
        if ra < CODE_BASE || (ra - CODE_BASE) % 4 != 0 {
            return Flow::Fault(FaultKind::MemoryAccess(ra));
        }
        Flow::Jump(((ra - CODE_BASE) / 4) as usize)
    }

    fn target_pc(&self, name: &str) -> Option<usize> {
        self.image.label_pc.get(name).copied()
    }

    fn mem_address(
        &self,
        instr: &Instr,
        mem_idx: usize,
    ) -> Result<(u64, Option<(Reg, u64)>), FaultKind> {
        let mem = match instr.operands.get(mem_idx) {
            Some(Operand::Memory(m)) => m,
            _ => {
                return Err(FaultKind::UnsupportedInstruction(format!(
                    "{} missing memory operand",
                    instr.mnemonic
                )))
            }
        };
        let base = self.read_reg(&mem.base);
        let off: u64 = match &mem.offset {
            MemOffset::Imm(v) => *v as u64,
            MemOffset::Sym(l) => match l.modifier {
                RefModifier::GotLo12 => {
                    let slot = self
                        .image
                        .got_addr
                        .get(&l.name)
                        .copied()
                        .ok_or_else(|| FaultKind::UndefinedLabel(l.name.clone()))?;
                    slot & 0xfff
                }
                RefModifier::Lo12 => {
                    let a = self
                        .image
                        .symbol_addr(&l.name)
                        .ok_or_else(|| FaultKind::UndefinedLabel(l.name.clone()))?;
                    a & 0xfff
                }
                _ => return Err(FaultKind::UndefinedLabel(l.name.clone())),
            },
        };
        match mem.mode {
            crate::asm::AddrMode::Offset => Ok((base.wrapping_add(off), None)),
            crate::asm::AddrMode::PreIndex => {
                let a = base.wrapping_add(off);
                Ok((a, Some((mem.base.clone(), a))))
            }
            crate::asm::AddrMode::PostIndex => {
                Ok((base, Some((mem.base.clone(), base.wrapping_add(off)))))
            }
        }
    }

    fn exec_line(&mut self, line: &AsmLine, pc: usize) -> Flow {
        let instr = match line.instr() {
            Some(i) => i.clone(),
            None => return Flow::Next,
        };
        let isa = self.isa();
        let m = instr.mnemonic.as_str();

        // Address formation.
        if let Some(InstrKind::AddrGen) = instr_kind(isa, m) {
            let dst = match instr.operands.first().and_then(Operand::as_register) {
                Some(r) => r.clone(),
                None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
            };
            let l = match instr.operands.get(1).and_then(Operand::as_label_ref) {
                Some(l) => l.clone(),
                None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
            };
            let value = match (m, l.modifier) {
                ("adrp", RefModifier::Got) => match self.image.got_addr.get(&l.name) {
                    Some(&slot) => slot & !0xfff,
                    None => return Flow::Fault(FaultKind::UndefinedLabel(l.name)),
                },
                ("adrp", _) => match self.image.symbol_addr(&l.name) {
                    Some(a) => a & !0xfff,
                    None => return Flow::Fault(FaultKind::UndefinedLabel(l.name)),
                },
                _ => match self.image.symbol_addr(&l.name) {
                    Some(a) => a,
                    None => return Flow::Fault(FaultKind::UndefinedLabel(l.name)),
                },
            };
            self.write_reg(&dst, value);
            return Flow::Next;
        }

        // ARM `add xd, xn, :lo12:SYM`.
        if isa == Isa::Armv8 && m == "add" {
            if let Some(Operand::LabelRef(l)) = instr.operands.get(2) {
                if l.modifier == RefModifier::Lo12 {
                    let a = match self.image.symbol_addr(&l.name) {
                        Some(a) => a,
                        None => return Flow::Fault(FaultKind::UndefinedLabel(l.name.clone())),
                    };
                    let base = match instr.operands.get(1).and_then(Operand::as_register) {
                        Some(r) => self.read_reg(r),
                        None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
                    };
                    let dst = instr.operands[0].as_register().unwrap().clone();
                    self.write_reg(&dst, base.wrapping_add(a & 0xfff));
                    return Flow::Next;
                }
            }
        }

        match instr_kind(isa, m) {
            Some(InstrKind::Load) => self.exec_load(&instr),
            Some(InstrKind::Store) => self.exec_store(&instr),
            Some(InstrKind::Branch) => self.exec_branch(&instr),
            Some(InstrKind::Call) => self.exec_call(&instr, pc),
            Some(InstrKind::Ret) => {
                let r = instr
                    .operands
                    .first()
                    .and_then(Operand::as_register)
                    .cloned();
                self.do_ret(r.as_ref())
            }
            Some(InstrKind::Alu) | Some(InstrKind::Move) | Some(InstrKind::Nop) => {
                match step_mut(&mut self.state, line) {
                    Ok(()) => Flow::Next,
                    Err(e) => Flow::Fault(FaultKind::UnsupportedInstruction(e.to_string())),
                }
            }
            _ => Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
        }
    }

    fn exec_load(&mut self, instr: &Instr) -> Flow {
        let isa = self.isa();
        let m = instr.mnemonic.as_str();
        let pair = m == "ldp";
        let mem_idx = if pair { 2 } else { 1 };
        let (addr, writeback) = match self.mem_address(instr, mem_idx) {
            Ok(v) => v,
            Err(k) => return Flow::Fault(k),
        };
        let dst = match instr.operands.first().and_then(Operand::as_register) {
            Some(r) => r.clone(),
            None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
        };
        let size: u64 = match (isa, m) {
            (_, "ldrb" | "lbu") => 1,
            (_, "lw") => 4,
            (Isa::Armv8, "ldr" | "ldp") => match dst.access(isa).map(|a| a.width) {
                Some(Width::W32) => 4,
                _ => 8,
            },
            _ => 8,
        };
        let raw = match self.image.read_bytes(addr, size) {
            Some(v) => v,
            None => return Flow::Fault(FaultKind::MemoryAccess(addr)),
        };
        let value = if m == "lw" {
            sign_extend(raw, 32, 64)
        } else {
            raw
        };
        self.write_reg(&dst, value);
        if pair {
            let dst2 = match instr.operands.get(1).and_then(Operand::as_register) {
                Some(r) => r.clone(),
                None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
            };
            let raw2 = match self.image.read_bytes(addr + size, size) {
                Some(v) => v,
                None => return Flow::Fault(FaultKind::MemoryAccess(addr + size)),
            };
            self.write_reg(&dst2, raw2);
        }
        if let Some((base, v)) = writeback {
            self.write_reg(&base, v);
        }
        Flow::Next
    }

    fn exec_store(&mut self, instr: &Instr) -> Flow {
        let isa = self.isa();
        let m = instr.mnemonic.as_str();
        let pair = m == "stp";
        let mem_idx = if pair { 2 } else { 1 };
        let (addr, writeback) = match self.mem_address(instr, mem_idx) {
            Ok(v) => v,
            Err(k) => return Flow::Fault(k),
        };
        let src = match instr.operands.first().and_then(Operand::as_register) {
            Some(r) => r.clone(),
            None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
        };
        let size: u64 = match (isa, m) {
            (_, "strb" | "sb") => 1,
            (_, "sw") => 4,
            (Isa::Armv8, "str" | "stp") => match src.access(isa).map(|a| a.width) {
                Some(Width::W32) => 4,
                _ => 8,
            },
            _ => 8,
        };
        let v = self.read_reg(&src);
        if !self.image.write_bytes(addr, size, v) {
            return Flow::Fault(FaultKind::MemoryAccess(addr));
        }
        if pair {
            let src2 = match instr.operands.get(1).and_then(Operand::as_register) {
                Some(r) => r.clone(),
                None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
            };
            let v2 = self.read_reg(&src2);
            if !self.image.write_bytes(addr + size, size, v2) {
                return Flow::Fault(FaultKind::MemoryAccess(addr + size));
            }
        }
        if let Some((base, v)) = writeback {
            self.write_reg(&base, v);
        }
        Flow::Next
    }

    fn exec_branch(&mut self, instr: &Instr) -> Flow {
        let isa = self.isa();
        let m = instr.mnemonic.as_str();
        let label = match instr.operands.last().and_then(Operand::as_label_ref) {
            Some(l) => l.name.clone(),
            None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
        };
        let target = match self.target_pc(&label) {
            Some(t) => t,
            None => return Flow::Fault(FaultKind::UndefinedLabel(label)),
        };
        let taken = match isa {
            Isa::Armv8 => {
                if m == "b" {
                    true
                } else if let Some(cond) = arm_branch_cond(m) {
                    cond_holds(cond, self.state.flags)
                } else {
                    return Flow::Fault(FaultKind::UnsupportedInstruction(m.into()));
                }
            }
            Isa::Riscv64 => {
                if m == "j" {
                    true
                } else {
                    let a = instr
                        .operands
                        .first()
                        .and_then(Operand::as_register)
                        .map(|r| self.read_reg(r))
                        .unwrap_or(0) as i64;
                    let b = instr
                        .operands
                        .get(1)
                        .and_then(Operand::as_register)
                        .map(|r| self.read_reg(r))
                        .unwrap_or(0) as i64;
                    match m {
                        "beq" => a == b,
                        "bne" => a != b,
                        "blt" => a < b,
                        "bge" => a >= b,
                        "bgt" => a > b,
                        "ble" => a <= b,
                        "bltu" => (a as u64) < (b as u64),
                        "bgeu" => (a as u64) >= (b as u64),
                        "beqz" => a == 0,
                        "bnez" => a != 0,
                        "bgez" => a >= 0,
                        "blez" => a <= 0,
                        "bgtz" => a > 0,
                        "bltz" => a < 0,
                        _ => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
                    }
                }
            }
        };
        if taken {
            Flow::Jump(target)
        } else {
            Flow::Next
        }
    }

    fn exec_call(&mut self, instr: &Instr, pc: usize) -> Flow {
        let isa = self.isa();
        let m = instr.mnemonic.as_str();
        // Indirect call through a register (jalr rs).
        if m == "jalr" {
            if let Some(Operand::Register(r)) = instr.operands.first() {
                let ra = CODE_BASE + 4 * (pc as u64 + 1);
                let target = self.read_reg(r);
                self.state.write_cell(RegCell::Int(1), ra);
                if target < CODE_BASE || (target - CODE_BASE) % 4 != 0 {
                    return Flow::Fault(FaultKind::MemoryAccess(target));
                }
                return Flow::Jump(((target - CODE_BASE) / 4) as usize);
            }
        }
        let label = match instr.operands.last().and_then(Operand::as_label_ref) {
            Some(l) => l.name.clone(),
            None => return Flow::Fault(FaultKind::UnsupportedInstruction(m.into())),
        };
        if let Some(target) = self.target_pc(&label) {
            let ra = CODE_BASE + 4 * (pc as u64 + 1);
            match isa {
                Isa::Armv8 => self.state.write_cell(RegCell::Int(30), ra),
                Isa::Riscv64 => self.state.write_cell(RegCell::Int(1), ra),
            }
            return Flow::Jump(target);
        }
        match label.as_str() {
            "printf" => match self.stub_printf() {
                Ok(()) => Flow::Next,
                Err(k) => Flow::Fault(k),
            },
            "exit" => {
                let v = match isa {
                    Isa::Armv8 => self.state.read_cell(RegCell::Int(0)),
                    Isa::Riscv64 => self.state.read_cell(RegCell::Int(10)),
                };
                Flow::Exit((v & 0xff) as i32)
            }
            "__stack_chk_fail" => Flow::Fault(FaultKind::StackCheckFail),
            other => Flow::Fault(FaultKind::UnsupportedCall(other.to_string())),
        }
    }

    fn read_c_string(&self, addr: u64) -> Result<String, FaultKind> {
        let mut out = Vec::new();
        let mut a = addr;
        loop {
            let b = self
                .image
                .read_bytes(a, 1)
                .ok_or(FaultKind::MemoryAccess(a))? as u8;
            if b == 0 {
                break;
            }
            out.push(b);
            a += 1;
            if out.len() > 1 << 16 {
                return Err(FaultKind::MemoryAccess(a));
            }
        }
        Ok(String::from_utf8_lossy(&out).into_owned())
    }

    /// printf with integer formatting: %d %i %u %x %c %s, `l` prefixes, and
    /// %%. Anything else is out of scope for the internal oracle.
    fn stub_printf(&mut self) -> Result<(), FaultKind> {
        let isa = self.isa();
        let (fmt_addr, arg_cells): (u64, Vec<RegCell>) = match isa {
            Isa::Armv8 => (
                self.state.read_cell(RegCell::Int(0)),
                (1..=7).map(RegCell::Int).collect(),
            ),
            Isa::Riscv64 => (
                self.state.read_cell(RegCell::Int(10)),
                (11..=17).map(RegCell::Int).collect(),
            ),
        };
        let fmt = self.read_c_string(fmt_addr)?;
        let mut args = arg_cells.iter().map(|&c| self.state.read_cell(c));
        let mut out = String::new();
        let mut chars = fmt.chars().peekable();
        while let Some(c) = chars.next() {
            if c != '%' {
                out.push(c);
                continue;
            }
            let mut spec = String::new();
            while let Some(&k) = chars.peek() {
                spec.push(k);
                chars.next();
                if k.is_ascii_alphabetic() || k == '%' {
                    break;
                }
            }
            let conv = spec.chars().last().unwrap_or('%');
            let long = spec.contains('l');
            match conv {
                '%' => out.push('%'),
                'd' | 'i' => {
                    let v = args.next().unwrap_or(0);
                    let s = if long {
                        (v as i64).to_string()
                    } else {
                        (v as u32 as i32).to_string()
                    };
                    out.push_str(&s);
                }
                'u' => {
                    let v = args.next().unwrap_or(0);
                    let s = if long {
                        v.to_string()
                    } else {
                        (v as u32).to_string()
                    };
                    out.push_str(&s);
                }
                'x' => {
                    let v = args.next().unwrap_or(0);
                    let s = if long {
                        format!("{v:x}")
                    } else {
                        format!("{:x}", v as u32)
                    };
                    out.push_str(&s);
                }
                'c' => {
                    let v = args.next().unwrap_or(0);
                    out.push((v as u8) as char);
                }
                's' => {
                    let v = args.next().unwrap_or(0);
                    let s = self.read_c_string(v)?;
                    out.push_str(&s);
                }
                other => {
                    return Err(FaultKind::UnsupportedCall(format!(
                        "printf conversion %{other}"
                    )))
                }
            }
        }
        self.stdout.push_str(&out);
        // printf returns the character count.
        let n = out.len() as u64;
        match isa {
            Isa::Armv8 => self.state.write_cell(RegCell::Int(0), n),
            Isa::Riscv64 => self.state.write_cell(RegCell::Int(10), n),
        }
        Ok(())
    }
}
