//! Counterexample-guided inductive synthesis over hole domains.
//!
//! The loop keeps a set of counterexample inputs C (seeded with corner and
//! random vectors), searches hole assignments consistent with all of C, and
//! verifies candidates with the block-equivalence verifier; a failed
//! verification contributes a new counterexample. Structural holes
//! (registers, mnemonics, shift specs) and small numeric domains are
//! enumerated in domain order; immediate holes are derived algebraically
//! from a counterexample wherever the dataflow is invertible, which reaches
//! constants outside the enumeration window.

use super::{HoleAssignment, HoleDomain, MnemonicSlot, Sketch, SketchError, SketchLine};
use crate::asm::{Isa, Reg, RegCell};
use crate::semantics::smt::{solve_for_hole, symbolic_outputs, Expr, SymInstr, SymOperand};
use crate::semantics::{
    blocks_equivalent, eval_block_cells, pair_io, run_side, BlockSpec, Equivalence, RegPairing,
    VerifierConfig, WordWidth,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveConfig {
    /// Enumeration budget over the joint assignment space.
    pub max_enum: u64,
    /// CEGIS verify/refine rounds.
    pub max_iters: u32,
    pub time_budget: Duration,
    pub seed: u64,
    /// Random input vectors seeding the counterexample set.
    pub seed_inputs: usize,
    pub verifier: VerifierConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_enum: 1_000_000,
            max_iters: 32,
            time_budget: Duration::from_secs(10),
            seed: 0xc0de,
            seed_inputs: 8,
            verifier: VerifierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Solved(HoleAssignment),
    Unsat,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Counterexamples accumulated during the search.
    pub counterexamples: usize,
    /// Inputs tested by verifier calls.
    pub inputs_tested: usize,
    /// Why a timeout-class result was returned, when it was.
    pub timeout_reason: Option<String>,
}

impl SolveResult {
    fn timeout(reason: &str, cex: usize, tested: usize) -> SolveResult {
        SolveResult {
            status: SolveStatus::Timeout,
            counterexamples: cex,
            inputs_tested: tested,
            timeout_reason: Some(reason.to_string()),
        }
    }
}

/// One counterexample: a full cell-valued initial state (identity pairing)
/// or a vector over the specification's inputs (positional/explicit).
#[derive(Debug, Clone)]
enum Cex {
    Cells(BTreeMap<RegCell, u64>),
    Vector(Vec<u64>),
}

const CORNERS: [u64; 5] = [0, 1, u64::MAX, 1 << 63, (1 << 63) - 1];

enum DomainValues {
    Ints(i64, i64),
    Texts(Vec<String>),
}

impl DomainValues {
    fn len(&self) -> u64 {
        match self {
            DomainValues::Ints(lo, hi) => (hi - lo + 1) as u64,
            DomainValues::Texts(v) => v.len() as u64,
        }
    }

    fn get(&self, idx: u64) -> String {
        match self {
            DomainValues::Ints(lo, _) => (lo + idx as i64).to_string(),
            DomainValues::Texts(v) => v[idx as usize].clone(),
        }
    }
}

struct Plan {
    /// Holes enumerated jointly, in hole-id order, with their value lists.
    enumerated: Vec<(u32, DomainValues)>,
    /// Immediate holes derived from a counterexample by inversion.
    propagated: Vec<u32>,
}

impl Plan {
    fn joint(&self) -> u64 {
        self.enumerated
            .iter()
            .map(|(_, d)| d.len())
            .fold(1u64, |a, b| a.saturating_mul(b))
    }

    fn assignment_at(&self, mut idx: u64) -> HoleAssignment {
        let mut phi = HoleAssignment::new();
        for (id, dom) in &self.enumerated {
            let n = dom.len();
            phi.insert(*id, dom.get(idx % n));
            idx /= n;
        }
        phi
    }
}

fn initial_plan(sketch: &Sketch) -> Plan {
    let mut enumerated = Vec::new();
    let mut propagated = Vec::new();
    for (&id, dom) in &sketch.domains {
        match dom {
            HoleDomain::Immediate { .. } => propagated.push(id),
            HoleDomain::ShiftAmount { lo, hi } => {
                enumerated.push((id, DomainValues::Ints(*lo, *hi)))
            }
            HoleDomain::Register { class } | HoleDomain::Mnemonic { class } => {
                enumerated.push((id, DomainValues::Texts(class.clone())))
            }
            HoleDomain::ShiftSpec { choices } => enumerated.push((
                id,
                DomainValues::Texts(choices.iter().map(|a| format!("lsl {a}")).collect()),
            )),
            HoleDomain::Label => {}
        }
    }
    Plan {
        enumerated,
        propagated,
    }
}

fn demote_to_enumerated(plan: &mut Plan, sketch: &Sketch, hole: u32) {
    plan.propagated.retain(|&h| h != hole);
    if let Some(HoleDomain::Immediate { lo, hi }) = sketch.domains.get(&hole) {
        plan.enumerated.push((hole, DomainValues::Ints(*lo, *hi)));
        plan.enumerated.sort_by_key(|(id, _)| *id);
    }
}

/// Cells whose values matter to either side under identity pairing: spec
/// inputs, every register the sketch names, and full register-hole classes.
fn relevant_cells(spec: &BlockSpec, sketch: &Sketch) -> Vec<RegCell> {
    let isa = spec.isa;
    let mut cells = BTreeSet::new();
    for r in spec.input_registers.iter() {
        if let Some(a) = r.access(isa) {
            cells.insert(a.cell);
        }
    }
    for line in &sketch.lines {
        for op in &line.operands {
            match op {
                SymOperand::Concrete(crate::asm::Operand::Register(r)) => {
                    if let Some(a) = r.access(isa) {
                        cells.insert(a.cell);
                    }
                }
                SymOperand::Hole(id) => {
                    if let Some(HoleDomain::Register { class }) = sketch.domains.get(id) {
                        for name in class {
                            if let Some(a) = Reg::new(name.clone()).access(isa) {
                                cells.insert(a.cell);
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    cells.remove(&RegCell::Zero);
    cells.into_iter().collect()
}

fn seed_cexs(
    spec: &BlockSpec,
    sketch: &Sketch,
    pairing: &RegPairing,
    config: &SolveConfig,
) -> Vec<Cex> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();
    match pairing {
        RegPairing::Identity => {
            let cells = relevant_cells(spec, sketch);
            for corner in CORNERS {
                out.push(Cex::Cells(
                    cells.iter().map(|&c| (c, corner)).collect(),
                ));
            }
            for _ in 0..config.seed_inputs {
                out.push(Cex::Cells(
                    cells.iter().map(|&c| (c, rng.gen())).collect(),
                ));
            }
        }
        _ => {
            let n = spec.input_registers.len();
            for corner in CORNERS {
                out.push(Cex::Vector(vec![corner; n]));
            }
            for _ in 0..config.seed_inputs {
                out.push(Cex::Vector((0..n).map(|_| rng.gen()).collect()));
            }
        }
    }
    out
}

/// Instantiated-candidate block spec: lines plus recomputed register sets.
fn candidate_spec(sketch: &Sketch, lines: Vec<crate::asm::AsmLine>) -> Option<BlockSpec> {
    let input_registers =
        crate::blocks::free_registers_of_lines(sketch.isa, &lines).ok()?;
    let output_registers = {
        let mut seen = BTreeSet::new();
        let mut outs = Vec::new();
        for line in &lines {
            if let Some(instr) = line.instr() {
                let (_, writes) = crate::blocks::reg_reads_writes(sketch.isa, instr);
                for w in writes {
                    if let Some(a) = w.access(sketch.isa) {
                        if a.cell != RegCell::Zero && seen.insert(a.cell) {
                            outs.push(w);
                        }
                    }
                }
            }
        }
        outs
    };
    Some(BlockSpec {
        isa: sketch.isa,
        lines,
        input_registers,
        output_registers,
    })
}

fn compare_flags_for(spec: &BlockSpec, sketch: &Sketch, pairing: &RegPairing) -> bool {
    matches!(pairing, RegPairing::Identity)
        && spec.isa == Isa::Armv8
        && spec.sets_flags()
        && sketch.sets_flags()
}

/// One consistency check of an instantiated candidate against one cex.
fn consistent_on(
    spec: &BlockSpec,
    cand: &BlockSpec,
    pairing: &RegPairing,
    cex: &Cex,
    compare_flags: bool,
) -> bool {
    match (cex, pairing) {
        (Cex::Cells(cells), RegPairing::Identity) => {
            let sx = match eval_block_cells(spec, cells, WordWidth::FULL) {
                Ok(s) => s,
                Err(_) => return false,
            };
            let sy = match eval_block_cells(cand, cells, WordWidth::FULL) {
                Ok(s) => s,
                Err(_) => return false,
            };
            let mut out_cells = BTreeSet::new();
            for r in spec
                .output_registers
                .iter()
                .chain(cand.output_registers.iter())
            {
                if let Some(a) = r.access(spec.isa) {
                    out_cells.insert(a.cell);
                }
            }
            for cell in out_cells {
                if sx.read_cell(cell) != sy.read_cell(cell) {
                    return false;
                }
            }
            !(compare_flags && sx.flags != sy.flags)
        }
        (Cex::Vector(values), _) => {
            let paired = match pair_io(spec, cand, pairing) {
                Ok(p) => p,
                Err(_) => return false,
            };
            let sx = match run_side(spec, &paired.x_inputs, values, WordWidth::FULL) {
                Ok((s, _)) => s,
                Err(_) => return false,
            };
            let sy = match run_side(cand, &paired.y_inputs, values, WordWidth::FULL) {
                Ok((s, _)) => s,
                Err(_) => return false,
            };
            for (rx, ry) in &paired.outputs {
                let (ax, ay) = match (rx.access(spec.isa), ry.access(cand.isa)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return false,
                };
                if paired.cell_compare {
                    if sx.read_cell(ax.cell) != sy.read_cell(ay.cell) {
                        return false;
                    }
                } else {
                    let bits = WordWidth::FULL
                        .access_bits(ax.width)
                        .min(WordWidth::FULL.access_bits(ay.width));
                    let mask = if bits == 64 { u64::MAX } else { (1 << bits) - 1 };
                    if sx.read(ax) & mask != sy.read(ay) & mask {
                        return false;
                    }
                }
            }
            true
        }
        _ => false,
    }
}

/// Build the sketch's symbolic skeleton with `phi`'s structural values
/// substituted and the propagated holes left symbolic.
fn skeleton(sketch: &Sketch, phi: &HoleAssignment) -> Result<Vec<SymInstr>, SketchError> {
    let mut out = Vec::with_capacity(sketch.lines.len());
    for line in &sketch.lines {
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
                SymOperand::Concrete(o) => operands.push(SymOperand::Concrete(o.clone())),
                SymOperand::Hole(id) => match phi.get(id) {
                    Some(text) => {
                        let domain = &sketch.domains[id];
                        let concrete = super::operand_from_text(domain, *id, text)?;
                        operands.push(SymOperand::Concrete(concrete));
                    }
                    None => operands.push(SymOperand::Hole(*id)),
                },
            }
        }
        out.push(SymInstr { mnemonic, operands });
    }
    Ok(out)
}

fn written_names(sketch: &Sketch, phi: &HoleAssignment) -> Vec<Reg> {
    // Destination operands are operand 0 for every solvable mnemonic.
    let mut out = Vec::new();
    for line in &sketch.lines {
        if let Some(SymOperand::Concrete(crate::asm::Operand::Register(r))) =
            line.operands.first()
        {
            out.push(r.clone());
        } else if let Some(SymOperand::Hole(id)) = line.operands.first() {
            if let Some(text) = phi.get(id) {
                out.push(Reg::new(text.clone()));
            }
        }
    }
    out
}

fn env_from_cex(cex: &Cex, spec: &BlockSpec, cand_inputs: &[Reg], isa: Isa) -> BTreeMap<String, u64> {
    let mut env = BTreeMap::new();
    match cex {
        Cex::Cells(cells) => {
            for (&cell, &v) in cells {
                env.insert(canonical_name(isa, cell), v);
            }
        }
        Cex::Vector(values) => {
            // Positional: spec inputs align with candidate inputs by index.
            for (r, v) in cand_inputs.iter().zip(values) {
                if let Some(a) = r.access(isa) {
                    env.insert(canonical_name(isa, a.cell), *v);
                }
            }
            let _ = spec;
        }
    }
    env
}

fn canonical_name(isa: Isa, cell: RegCell) -> String {
    match (isa, cell) {
        (Isa::Armv8, RegCell::Int(n)) => format!("x{n}"),
        (Isa::Armv8, RegCell::Sp) => "sp".into(),
        (Isa::Armv8, RegCell::Float(n)) => format!("d{n}"),
        (_, RegCell::Int(n)) => format!("x{n}"),
        (_, RegCell::Float(n)) => format!("f{n}"),
        (_, RegCell::Sp) => "sp".into(),
        (_, RegCell::Zero) => "zero".into(),
    }
}

/// Derive the propagated holes from one counterexample: for each, find an
/// output expression containing it exactly once with every other hole
/// already substituted, invert, and check the value lies in the domain.
/// Returns `Err(hole)` for a hole whose dataflow resists inversion.
fn propagate(
    sketch: &Sketch,
    spec: &BlockSpec,
    plan: &Plan,
    phi: &mut HoleAssignment,
    cex: &Cex,
    pairing: &RegPairing,
) -> Result<bool, u32> {
    if plan.propagated.is_empty() {
        return Ok(true);
    }
    let skel = match skeleton(sketch, phi) {
        Ok(s) => s,
        Err(_) => return Ok(false),
    };
    // Spec-side target values on this cex.
    let spec_state = match cex {
        Cex::Cells(cells) => match eval_block_cells(spec, cells, WordWidth::FULL) {
            Ok(s) => s,
            Err(_) => return Ok(false),
        },
        Cex::Vector(values) => {
            match run_side(spec, &spec.input_registers, values, WordWidth::FULL) {
                Ok((s, _)) => s,
                Err(_) => return Ok(false),
            }
        }
    };

    let outs = written_names(sketch, phi);
    let exprs = match symbolic_outputs(sketch.isa, &skel, &outs) {
        Ok(e) => e,
        Err(_) => return Err(*plan.propagated.first().unwrap()),
    };

    // Pair each sketch output name with the spec register giving its
    // target value on this counterexample. Destination slots are
    // structural, so they are already assigned here.
    let mut targets: BTreeMap<String, u64> = BTreeMap::new();
    for r in &outs {
        let name = r.name.as_str();
        let target = match pairing {
            RegPairing::Identity => Reg::new(name).access(spec.isa).map(|acc| {
                let v = spec_state.read_cell(acc.cell);
                match acc.width {
                    crate::asm::Width::W64 => v,
                    crate::asm::Width::W32 => v & 0xffff_ffff,
                }
            }),
            RegPairing::Positional => candidate_output_position(sketch, phi, name)
                .and_then(|pos| spec.output_registers.get(pos))
                .and_then(|rx| rx.access(spec.isa))
                .map(|acc| spec_state.read(acc)),
            RegPairing::Explicit(pairs) => pairs
                .iter()
                .find(|(_, b)| b.name == name)
                .map(|(a, _)| a)
                .and_then(|rx| rx.access(spec.isa))
                .map(|acc| spec_state.read(acc)),
        };
        if let Some(t) = target {
            targets.insert(name.to_string(), t);
        }
    }
    let target_for = |name: &str| -> Option<u64> { targets.get(name).copied() };

    let cand_inputs: Vec<Reg> = spec.input_registers.clone();
    let env = env_from_cex(cex, spec, &cand_inputs, sketch.isa);

    let mut remaining: Vec<u32> = plan.propagated.clone();
    let mut solved_any = true;
    while !remaining.is_empty() && solved_any {
        solved_any = false;
        let mut next_remaining = Vec::new();
        for &hole in &remaining {
            let holes_env: BTreeMap<u32, u64> = phi
                .iter()
                .filter_map(|(id, text)| text.parse::<u64>().ok().map(|v| (*id, v)))
                .chain(phi.iter().filter_map(|(id, text)| {
                    text.parse::<i64>().ok().map(|v| (*id, v as u64))
                }))
                .collect();
            let mut found = None;
            for (name, expr) in &exprs {
                let hs = expr.holes();
                if hs.iter().filter(|&&h| h == hole).count() == 1
                    && hs.iter().all(|h| *h == hole || phi.contains_key(h))
                {
                    if let Some(target) = target_for(name) {
                        if let Some(v) =
                            solve_for_hole(expr, hole, target, &env, &holes_env)
                        {
                            found = Some(v);
                            break;
                        }
                    }
                }
            }
            match found {
                Some(v) => {
                    let signed = v as i64;
                    if let Some(dom) = sketch.domains.get(&hole) {
                        // Propagated values may exceed the window but must
                        // stay within the encoding range.
                        let ok = match dom {
                            HoleDomain::Immediate { .. } => {
                                let range =
                                    encoding_range(sketch, hole).unwrap_or((i64::MIN, i64::MAX));
                                (range.0..=range.1).contains(&signed)
                            }
                            _ => dom.contains(&signed.to_string()),
                        };
                        if !ok {
                            return Ok(false);
                        }
                    }
                    phi.insert(hole, signed.to_string());
                    solved_any = true;
                }
                None => next_remaining.push(hole),
            }
        }
        remaining = next_remaining;
    }
    if let Some(&stuck) = remaining.first() {
        // Entangled or non-invertible; let the caller demote it.
        if phi.contains_key(&stuck) {
            return Ok(true);
        }
        return Err(stuck);
    }
    Ok(true)
}

/// Sketch output-name position in first-write order, for positional pairing.
fn candidate_output_position(sketch: &Sketch, phi: &HoleAssignment, name: &str) -> Option<usize> {
    let mut seen = Vec::new();
    for line in &sketch.lines {
        let dest = match line.operands.first() {
            Some(SymOperand::Concrete(crate::asm::Operand::Register(r))) => r.name.clone(),
            Some(SymOperand::Hole(id)) => phi.get(id)?.clone(),
            _ => continue,
        };
        if !seen.contains(&dest) {
            seen.push(dest);
        }
    }
    seen.iter().position(|n| n == name)
}

/// The full legal encoding range of an immediate hole's slot (unwindowed),
/// used to validate propagated constants.
fn encoding_range(sketch: &Sketch, hole: u32) -> Option<(i64, i64)> {
    for line in &sketch.lines {
        for op in &line.operands {
            if matches!(op, SymOperand::Hole(id) if *id == hole) {
                if let MnemonicSlot::Concrete(m) = &line.mnemonic {
                    return crate::asm::isa::imm_range(sketch.isa, m);
                }
            }
        }
    }
    None
}

/// Solve a sketch against a block specification with CEGIS.
pub fn cegis_solve(
    spec: &BlockSpec,
    sketch: &Sketch,
    pairing: &RegPairing,
    config: &SolveConfig,
) -> Result<SolveResult, SketchError> {
    if !sketch.label_holes().is_empty() {
        return Err(SketchError::UnholeableToken(
            "label holes take the global-reference route".into(),
        ));
    }
    let start = Instant::now();
    let compare_flags = compare_flags_for(spec, sketch, pairing);
    let mut inputs_tested = 0usize;

    // Zero holes: a bare verification.
    if sketch.domains.is_empty() {
        let lines = super::instantiate(sketch, &HoleAssignment::new())?;
        let cand = candidate_spec(sketch, lines)
            .ok_or_else(|| SketchError::UnalignableSpan("candidate dataflow failed".into()))?;
        return Ok(match blocks_equivalent(spec, &cand, pairing, &config.verifier) {
            Equivalence::Equivalent { inputs_tested } => SolveResult {
                status: SolveStatus::Solved(HoleAssignment::new()),
                counterexamples: 0,
                inputs_tested,
                timeout_reason: None,
            },
            Equivalence::Counterexample { inputs_tested, .. } => SolveResult {
                status: SolveStatus::Unsat,
                counterexamples: 1,
                inputs_tested,
                timeout_reason: None,
            },
            Equivalence::Incomparable { reason } => {
                SolveResult::timeout(&format!("incomparable: {reason}"), 0, 0)
            }
        });
    }

    let mut plan = initial_plan(sketch);
    let mut cexs = seed_cexs(spec, sketch, pairing, config);
    let mut banned: BTreeSet<String> = BTreeSet::new();
    let mut iterations = 0u32;
    let mut counterexamples = 0usize;
    let mut cursor: u64 = 0;
    let mut tried_since_change: u64 = 0;

    'search: loop {
        let joint = plan.joint();
        if joint > config.max_enum {
            return Ok(SolveResult::timeout(
                "joint hole domain exceeds the enumeration budget",
                counterexamples,
                inputs_tested,
            ));
        }
        if start.elapsed() > config.time_budget {
            return Ok(SolveResult::timeout(
                "time budget exhausted",
                counterexamples,
                inputs_tested,
            ));
        }

        // Find the next assignment consistent with all of C.
        let mut candidate: Option<(HoleAssignment, BlockSpec)> = None;
        while tried_since_change < joint {
            if tried_since_change % 4096 == 0 && start.elapsed() > config.time_budget {
                return Ok(SolveResult::timeout(
                    "time budget exhausted",
                    counterexamples,
                    inputs_tested,
                ));
            }
            let idx = cursor % joint;
            cursor += 1;
            tried_since_change += 1;
            let mut phi = plan.assignment_at(idx);

            if !plan.propagated.is_empty() {
                match propagate(sketch, spec, &plan, &mut phi, &cexs[0], pairing) {
                    Ok(true) => {}
                    Ok(false) => continue,
                    Err(stuck) => {
                        demote_to_enumerated(&mut plan, sketch, stuck);
                        cursor = 0;
                        tried_since_change = 0;
                        continue 'search;
                    }
                }
            }

            let key = phi
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",");
            if banned.contains(&key) {
                continue;
            }
            let lines = match super::instantiate(sketch, &phi) {
                Ok(l) => l,
                Err(_) => continue,
            };
            let cand = match candidate_spec(sketch, lines) {
                Some(c) => c,
                None => continue,
            };
            // Most recent counterexamples reject fastest.
            let ok = cexs
                .iter()
                .rev()
                .all(|c| consistent_on(spec, &cand, pairing, c, compare_flags));
            if ok {
                candidate = Some((phi, cand));
                break;
            }
        }

        let (phi, cand) = match candidate {
            Some(c) => c,
            None => {
                return Ok(SolveResult {
                    status: SolveStatus::Unsat,
                    counterexamples,
                    inputs_tested,
                    timeout_reason: None,
                })
            }
        };

        iterations += 1;
        if iterations > config.max_iters {
            return Ok(SolveResult::timeout(
                "max CEGIS iterations exceeded",
                counterexamples,
                inputs_tested,
            ));
        }

        match blocks_equivalent(spec, &cand, pairing, &config.verifier) {
            Equivalence::Equivalent { inputs_tested: n } => {
                inputs_tested += n;
                return Ok(SolveResult {
                    status: SolveStatus::Solved(phi),
                    counterexamples,
                    inputs_tested,
                    timeout_reason: None,
                });
            }
            Equivalence::Counterexample {
                inputs,
                inputs_tested: n,
            } => {
                inputs_tested += n;
                counterexamples += 1;
                let new_cex = match pairing {
                    RegPairing::Identity => {
                        // The verifier paired the union of both inputs; map
                        // values back onto cells, others default to zero.
                        let paired = pair_io(spec, &cand, pairing)
                            .expect("identity pairing always resolves");
                        let mut cells = BTreeMap::new();
                        for (r, v) in paired.x_inputs.iter().zip(&inputs) {
                            if let Some(a) = r.access(spec.isa) {
                                cells.insert(a.cell, *v);
                            }
                        }
                        Cex::Cells(cells)
                    }
                    _ => Cex::Vector(inputs),
                };
                // A reduced-width counterexample may not reproduce at full
                // width; ban the candidate explicitly in that case.
                if consistent_on(spec, &cand, pairing, &new_cex, compare_flags) {
                    let key = phi
                        .iter()
                        .map(|(k, v)| format!("{k}={v}"))
                        .collect::<Vec<_>>()
                        .join(",");
                    banned.insert(key);
                } else {
                    cexs.push(new_cex);
                }
                tried_since_change = tried_since_change.saturating_sub(1);
                cursor = cursor.saturating_sub(1);
            }
            Equivalence::Incomparable { .. } => {
                let key = phi
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(",");
                banned.insert(key);
                tried_since_change = tried_since_change.saturating_sub(1);
                cursor = cursor.saturating_sub(1);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_program;
    use crate::blocks::SubseqSpan;
    use crate::sketch::make_sketch;

    fn block_lines(text: &str, isa: Isa) -> Vec<crate::asm::AsmLine> {
        let wrapped = format!("f:\n{text}");
        let p = parse_program(&wrapped, isa).unwrap();
        let f = p.functions().next().unwrap().clone();
        f.lines[1..].to_vec()
    }

    fn spec_from(text: &str, isa: Isa) -> BlockSpec {
        let lines = block_lines(text, isa);
        let input_registers =
            crate::blocks::free_registers_of_lines(isa, &lines).unwrap();
        let mut spec = BlockSpec {
            isa,
            lines: lines.clone(),
            input_registers,
            output_registers: Vec::new(),
        };
        let mut seen = BTreeSet::new();
        let mut outs = Vec::new();
        for line in &lines {
            if let Some(instr) = line.instr() {
                let (_, writes) = crate::blocks::reg_reads_writes(isa, instr);
                for w in writes {
                    if let Some(a) = w.access(isa) {
                        if seen.insert(a.cell) {
                            outs.push(w);
                        }
                    }
                }
            }
        }
        spec.output_registers = outs;
        spec
    }

    fn dummy_span() -> SubseqSpan {
        SubseqSpan {
            func_index: 0,
            start_line: 0,
            end_line: 0,
            start_token: 0,
            end_token: 0,
        }
    }

    fn quick_config() -> SolveConfig {
        SolveConfig {
            verifier: VerifierConfig {
                random_samples: 2000,
                ..VerifierConfig::default()
            },
            ..SolveConfig::default()
        }
    }

    #[test]
    fn immediate_hole_recovers_constant_same_isa() {
        // spec: addi a0,a0,7 — sketch: addi a0,a0,?0
        let spec = spec_from("\taddi\ta0, a0, 7\n", Isa::Riscv64);
        let lines = block_lines("\taddi\ta0, a0, 5\n", Isa::Riscv64);
        let sketch = make_sketch(Isa::Riscv64, &lines, &[(0, 3)], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        match r.status {
            SolveStatus::Solved(phi) => assert_eq!(phi[&0], "7"),
            other => panic!("expected solve, got {other:?}"),
        }
    }

    #[test]
    fn cross_isa_immediate_hole() {
        // spec: addi a0,a0,7 (riscv) — sketch: add w0, w0, ?0 (arm)
        let spec = spec_from("\taddi\ta0, a0, 7\n", Isa::Riscv64);
        let lines = block_lines("\tadd\tw0, w0, 1\n", Isa::Armv8);
        let sketch = make_sketch(Isa::Armv8, &lines, &[(0, 3)], dummy_span()).unwrap();
        let pairing = RegPairing::Explicit(vec![
            (Reg::new("a0"), Reg::new("w0")),
        ]);
        let r = cegis_solve(&spec, &sketch, &pairing, &quick_config()).unwrap();
        match r.status {
            SolveStatus::Solved(phi) => assert_eq!(phi[&0], "7"),
            other => panic!("expected solve, got {other:?}"),
        }
    }

    #[test]
    fn zero_hole_equivalent_sketch_solves_empty() {
        let spec = spec_from("\tadd\ta0, a0, a1\n", Isa::Riscv64);
        let lines = block_lines("\tadd\ta0, a0, a1\n", Isa::Riscv64);
        let sketch = make_sketch(Isa::Riscv64, &lines, &[], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        match r.status {
            SolveStatus::Solved(phi) => assert!(phi.is_empty()),
            other => panic!("expected solve, got {other:?}"),
        }
    }

    #[test]
    fn squaring_spec_with_constant_sketch_is_unsat() {
        // spec: mulw a0,a0,a0 — sketch: addi a0,a0,?0: no constant works.
        let spec = spec_from("\tmulw\ta0, a0, a0\n", Isa::Riscv64);
        let lines = block_lines("\taddi\ta0, a0, 1\n", Isa::Riscv64);
        let sketch = make_sketch(Isa::Riscv64, &lines, &[(0, 3)], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        assert_eq!(r.status, SolveStatus::Unsat, "{:?}", r.timeout_reason);
    }

    #[test]
    fn register_hole_recovers_same_isa() {
        let spec = spec_from("\tadd\tw1, w0, w2\n", Isa::Armv8);
        let lines = block_lines("\tadd\tw1, w0, w3\n", Isa::Armv8);
        let sketch = make_sketch(Isa::Armv8, &lines, &[(0, 3)], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        match r.status {
            SolveStatus::Solved(phi) => assert_eq!(phi[&0], "w2"),
            other => panic!("expected solve, got {other:?}"),
        }
    }

    #[test]
    fn mnemonic_hole_recovers() {
        let spec = spec_from("\tsubw\ta0, a0, a1\n", Isa::Riscv64);
        let lines = block_lines("\taddw\ta0, a0, a1\n", Isa::Riscv64);
        let sketch = make_sketch(Isa::Riscv64, &lines, &[(0, 0)], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        match r.status {
            SolveStatus::Solved(phi) => assert_eq!(phi[&0], "subw"),
            other => panic!("expected solve, got {other:?}"),
        }
    }

    #[test]
    fn shift_amount_hole() {
        let spec = spec_from("\tslli\ta5, a5, 4\n", Isa::Riscv64);
        let lines = block_lines("\tslli\ta5, a5, 2\n", Isa::Riscv64);
        let sketch = make_sketch(Isa::Riscv64, &lines, &[(0, 3)], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        match r.status {
            SolveStatus::Solved(phi) => assert_eq!(phi[&0], "4"),
            other => panic!("expected solve, got {other:?}"),
        }
    }

    #[test]
    fn propagation_reaches_constants_outside_window() {
        // li takes any constant; 100000 lies far outside the ±4096 window,
        // reachable only through inversion.
        let spec = spec_from("\tli\ta0, 100000\n", Isa::Riscv64);
        let lines = block_lines("\tli\ta0, 3\n", Isa::Riscv64);
        let sketch = make_sketch(Isa::Riscv64, &lines, &[(0, 2)], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        match r.status {
            SolveStatus::Solved(phi) => assert_eq!(phi[&0], "100000"),
            other => panic!("expected solve, got {other:?}"),
        }
    }

    #[test]
    fn two_immediate_holes_in_one_block() {
        let spec = spec_from("\taddi\ta0, a0, 11\n\taddi\ta1, a0, 22\n", Isa::Riscv64);
        let lines = block_lines("\taddi\ta0, a0, 1\n\taddi\ta1, a0, 2\n", Isa::Riscv64);
        let sketch =
            make_sketch(Isa::Riscv64, &lines, &[(0, 3), (1, 3)], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        match r.status {
            SolveStatus::Solved(phi) => {
                assert_eq!(phi[&0], "11");
                assert_eq!(phi[&1], "22");
            }
            other => panic!("expected solve, got {other:?}"),
        }
    }

    #[test]
    fn solved_results_reverify_under_fresh_seed() {
        let spec = spec_from("\tadd\tw0, w0, 3\n", Isa::Armv8);
        let lines = block_lines("\tadd\tw0, w0, 1\n", Isa::Armv8);
        let sketch = make_sketch(Isa::Armv8, &lines, &[(0, 3)], dummy_span()).unwrap();
        let r = cegis_solve(&spec, &sketch, &RegPairing::Identity, &quick_config()).unwrap();
        let phi = match r.status {
            SolveStatus::Solved(phi) => phi,
            other => panic!("expected solve, got {other:?}"),
        };
        let inst = super::super::instantiate(&sketch, &phi).unwrap();
        let cand = candidate_spec(&sketch, inst).unwrap();
        let fresh = VerifierConfig {
            seed: 0x1234_5678,
            ..VerifierConfig::default()
        };
        assert!(blocks_equivalent(&spec, &cand, &RegPairing::Identity, &fresh).is_equivalent());
    }
}
