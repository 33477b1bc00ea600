//! Encoded Bell pair preparation and two-cycle purification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error_models::{GateErrorSet, Spectator, LOGICAL_X, LOGICAL_Z};
use crate::likelihood::{Basis, LikelihoodError, NoisyStabilizerState, Register, Wire};
use crate::scalar::Scalar;
use crate::symplectic::{Gate, GeneratorMatrix, PauliProduct};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BellError {
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error("no encoding network with at most {0} cnots reproduces the code")]
    SynthesisFailed(usize),
    #[error("purification inputs use different spectators")]
    SpectatorMismatch,
    #[error("purification orders disagree in normalization: {0:e} vs {1:e}")]
    NormalizationMismatch(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncOp {
    AddQubit { qubit: usize, basis: Basis },
    Cnot { control: usize, target: usize },
    Hadamard(usize),
}

/// Encodes local qubit 0 into a four-qubit block (local qubits 0..4).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingNetwork {
    pub spectator: Spectator,
    pub ops: Vec<EncOp>,
}

impl EncodingNetwork {
    pub fn ancilla_bases(&self) -> Vec<(usize, Basis)> {
        self.ops
            .iter()
            .filter_map(|op| match *op {
                EncOp::AddQubit { qubit, basis } => Some((qubit, basis)),
                _ => None,
            })
            .collect()
    }

    pub fn gates(&self) -> Vec<Gate> {
        self.ops
            .iter()
            .filter_map(|op| match *op {
                EncOp::Cnot { control, target } => Some(Gate::Cnot { control, target }),
                EncOp::Hadamard(q) => Some(Gate::Hadamard(q)),
                EncOp::AddQubit { .. } => None,
            })
            .collect()
    }

    pub fn describe(&self) -> String {
        self.ops
            .iter()
            .map(|op| match *op {
                EncOp::AddQubit { qubit, basis: Basis::Z0 } => format!("prep0({qubit})"),
                EncOp::AddQubit { qubit, basis: Basis::Xplus } => format!("prep+({qubit})"),
                EncOp::Cnot { control, target } => format!("cnot({control},{target})"),
                EncOp::Hadamard(q) => format!("h({q})"),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Block generators followed by the logical operators, as a frame for
/// anticommutation patterns.
fn code_frame(spectator: Spectator) -> GeneratorMatrix {
    let mut rows: Vec<PauliProduct> = spectator.block_stabilizer().iter().map(|s| s.parse().unwrap()).collect();
    rows.push(LOGICAL_X.parse().unwrap());
    rows.push(LOGICAL_Z.parse().unwrap());
    GeneratorMatrix::from_rows_unchecked(4, rows)
}

const MAX_SYNTH_CNOTS: usize = 4;

/// Finds the shortest cnot-only encoder (ancilla bases enumerated with |0⟩
/// first, then cnot pairs in lexicographic order) whose output code matches
/// the block stabilizer and logical operators.
pub fn synthesize_encoding_network(spectator: Spectator) -> Result<EncodingNetwork, BellError> {
    enumerate_encoding_networks(spectator, MAX_SYNTH_CNOTS, true)
        .into_iter()
        .next()
        .ok_or(BellError::SynthesisFailed(MAX_SYNTH_CNOTS))
}

/// All valid cnot-only encoders with at most `max_cnots` gates, in search
/// order. With `shortest_only`, stops after the first length that has any.
pub fn enumerate_encoding_networks(spectator: Spectator, max_cnots: usize, shortest_only: bool) -> Vec<EncodingNetwork> {
    let frame = code_frame(spectator);
    let target = GeneratorMatrix::from_strs(&spectator.block_stabilizer()).unwrap();
    let x_l_pattern = frame.flip_pattern_unchecked(&LOGICAL_X.parse().unwrap());
    let z_l_pattern = frame.flip_pattern_unchecked(&LOGICAL_Z.parse().unwrap());
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|c| (0..4).filter(move |&t| t != c).map(move |t| (c, t))).collect();
    let bases = [Basis::Z0, Basis::Xplus];
    let mut found = Vec::new();
    for len in 0..=max_cnots {
        for b in 0..8usize {
            let anc: Vec<Basis> = (0..3).map(|i| bases[b >> (2 - i) & 1]).collect();
            let mut seq = vec![0usize; len];
            loop {
                let gates: Vec<Gate> = seq.iter().map(|&k| Gate::Cnot { control: pairs[k].0, target: pairs[k].1 }).collect();
                let push = |p: PauliProduct| gates.iter().fold(p, |acc, g| acc.conjugate_by_gate(g).unwrap().0);
                let rows: Vec<PauliProduct> =
                    (0..3).map(|i| push(PauliProduct::single(4, i + 1, anc[i].pauli()).unwrap())).collect();
                let xl = push(PauliProduct::single(4, 0, crate::symplectic::Pauli::X).unwrap());
                let zl = push(PauliProduct::single(4, 0, crate::symplectic::Pauli::Z).unwrap());
                let ok = GeneratorMatrix::new(4, rows).map(|g| g.same_span(&target)).unwrap_or(false)
                    && frame.flip_pattern_unchecked(&xl) == x_l_pattern
                    && frame.flip_pattern_unchecked(&zl) == z_l_pattern;
                if ok {
                    let mut ops: Vec<EncOp> =
                        (0..3).map(|i| EncOp::AddQubit { qubit: i + 1, basis: anc[i] }).collect();
                    ops.extend(seq.iter().map(|&k| EncOp::Cnot { control: pairs[k].0, target: pairs[k].1 }));
                    let net = EncodingNetwork { spectator, ops };
                    if validate_network(&net) {
                        found.push(net);
                    }
                }
                if !advance(&mut seq, pairs.len()) {
                    break;
                }
            }
        }
        if shortest_only && !found.is_empty() {
            break;
        }
    }
    found
}

fn advance(seq: &mut [usize], base: usize) -> bool {
    for d in (0..seq.len()).rev() {
        seq[d] += 1;
        if seq[d] < base {
            return true;
        }
        seq[d] = 0;
    }
    false
}

/// Canonical generator order of the encoded Bell pair: block O's three
/// generators, block D's three, then `X_L X_L` and `Z_L Z_L`.
pub fn bell_generators(spectator: Spectator) -> Vec<PauliProduct> {
    let block: Vec<PauliProduct> = spectator.block_stabilizer().iter().map(|s| s.parse().unwrap()).collect();
    let id = PauliProduct::identity(4);
    let mut rows: Vec<PauliProduct> = block.iter().map(|g| g.tensor(&id)).collect();
    rows.extend(block.iter().map(|g| id.tensor(g)));
    let xl: PauliProduct = LOGICAL_X.parse().unwrap();
    let zl: PauliProduct = LOGICAL_Z.parse().unwrap();
    rows.push(xl.tensor(&xl));
    rows.push(zl.tensor(&zl));
    rows
}

fn validate_network(net: &EncodingNetwork) -> bool {
    let zero = GateErrorSet::<f64>::zero(0, &());
    match prepare_noisy_bell_with(&zero, net, ()) {
        Ok(s) => s.dist()[0] == 1.0 && s.dist()[1..].iter().all(|&v| v == 0.0),
        Err(_) => false,
    }
}

/// Applies an encoding network to the block whose input is `wires[0]`,
/// adding the ancillas `wires[1..4]`, each followed by its error model.
pub(crate) fn encode_block<S: Scalar>(
    reg: &mut Register<S>,
    net: &EncodingNetwork,
    input: Wire,
    gates: &GateErrorSet<S>,
) -> Result<[Wire; 4], LikelihoodError> {
    let mut w = [input; 4];
    for op in &net.ops {
        match *op {
            EncOp::AddQubit { qubit, basis } => {
                w[qubit] = reg.add_qubit(basis)?;
                reg.error_each(&gates.prep, &[w[qubit]])?;
            }
            EncOp::Cnot { control, target } => {
                reg.cnot(w[control], w[target])?;
                reg.error(&gates.cnot, &[w[control], w[target]])?;
            }
            EncOp::Hadamard(q) => {
                reg.hadamard(w[q])?;
                reg.error(&gates.hadamard, &[w[q]])?;
            }
        }
    }
    Ok(w)
}

/// Runs an encoder backwards: gates in reverse order (each followed by its
/// error), leaving the ancillas to be measured by the caller.
pub(crate) fn decode_block<S: Scalar>(
    reg: &mut Register<S>,
    net: &EncodingNetwork,
    block: [Wire; 4],
    gates: &GateErrorSet<S>,
) -> Result<(), LikelihoodError> {
    for op in net.ops.iter().rev() {
        match *op {
            EncOp::Cnot { control, target } => {
                reg.cnot(block[control], block[target])?;
                reg.error(&gates.cnot, &[block[control], block[target]])?;
            }
            EncOp::Hadamard(q) => {
                reg.hadamard(block[q])?;
                reg.error(&gates.hadamard, &[block[q]])?;
            }
            EncOp::AddQubit { .. } => {}
        }
    }
    Ok(())
}

fn prepare_noisy_bell_with<S: Scalar>(
    gates: &GateErrorSet<S>,
    net: &EncodingNetwork,
    ctx: S::Ctx,
) -> Result<NoisyStabilizerState<S>, LikelihoodError> {
    let mut reg = Register::<S>::new(ctx);
    let o = reg.add_qubit(Basis::Xplus)?;
    reg.error_each(&gates.prep, &[o])?;
    let d = reg.add_qubit(Basis::Z0)?;
    reg.error_each(&gates.prep, &[d])?;
    reg.cnot(o, d)?;
    reg.error(&gates.cnot, &[o, d])?;
    let o_block = encode_block(&mut reg, net, o, gates)?;
    let d_block = encode_block(&mut reg, net, d, gates)?;
    // Reorder to O0..O3 D0..D3 by rewriting against the canonical rows in
    // the register's current qubit order.
    let order: Vec<Wire> = o_block.iter().chain(d_block.iter()).copied().collect();
    let targets: Vec<PauliProduct> = bell_generators(net.spectator)
        .iter()
        .map(|g| {
            let mut p = PauliProduct::identity(8);
            for (k, &w) in order.iter().enumerate() {
                p.set(reg.index(w), g.get(k));
            }
            p
        })
        .collect();
    reg.state.rewrite_rows(&targets)?;
    let perm: Vec<usize> = order.iter().map(|&w| reg.index(w)).collect();
    let mut state = reg.state;
    permute_qubits(&mut state, &perm)?;
    Ok(state)
}

/// Relabels qubits so that new qubit `k` is old qubit `perm[k]`. Rows keep
/// their order, so the distribution is untouched.
pub(crate) fn permute_qubits<S: Scalar>(state: &mut NoisyStabilizerState<S>, perm: &[usize]) -> Result<(), LikelihoodError> {
    let n = state.n();
    let rows: Vec<PauliProduct> = state
        .generators()
        .rows()
        .iter()
        .map(|r| {
            let mut p = PauliProduct::identity(n);
            for (k, &old) in perm.iter().enumerate() {
                p.set(k, r.get(old));
            }
            p
        })
        .collect();
    let q = GeneratorMatrix::from_rows_unchecked(n, rows);
    let dist = state.dist().to_vec();
    *state = NoisyStabilizerState::from_parts(q, dist, state.ctx().clone())?;
    Ok(())
}

/// Noisy encoded Bell pair in canonical generator order, qubits O0..O3
/// then D0..D3. Every preparation and gate is followed by its error model.
pub fn prepare_noisy_bell<S: Scalar>(
    gates: &GateErrorSet<S>,
    net: &EncodingNetwork,
    ctx: S::Ctx,
) -> Result<NoisyStabilizerState<S>, BellError> {
    Ok(prepare_noisy_bell_with(gates, net, ctx)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PurifyKind {
    /// Checks Z-type stabilizers: cnots kept→sacrifice, Z measurements.
    Ztype,
    /// Checks X-type stabilizers: cnots sacrifice→kept, X measurements.
    Xtype,
}

/// One bilateral purification step. Both inputs are canonical 8-qubit
/// encoded Bell states; the result is in canonical generator order.
pub fn purify_once<S: Scalar>(
    kept: &NoisyStabilizerState<S>,
    sacrifice: &NoisyStabilizerState<S>,
    kind: PurifyKind,
    gates: &GateErrorSet<S>,
    spectator: Spectator,
) -> Result<NoisyStabilizerState<S>, BellError> {
    let canon = bell_generators(spectator);
    if kept.generators().rows() != canon.as_slice() || sacrifice.generators().rows() != canon.as_slice() {
        return Err(BellError::SpectatorMismatch);
    }
    let mut s = kept.tensor(sacrifice)?;
    let (basis, pairs): (Basis, Vec<(usize, usize)>) = match kind {
        PurifyKind::Ztype => (Basis::Z0, (0..8).map(|i| (i, i + 8)).collect()),
        PurifyKind::Xtype => (Basis::Xplus, (0..8).map(|i| (i + 8, i)).collect()),
    };
    for &(c, t) in &pairs {
        s.apply_gate(&Gate::Cnot { control: c, target: t })?;
        s.apply_error_location(&gates.cnot, &[c, t])?;
    }
    for q in (8..16).rev() {
        s.apply_each_entry(&gates.meas, &[q])?;
        s.project_qubit(q, basis)?;
    }
    s.rewrite_rows(&canon)?;
    Ok(s)
}

/// One purification cycle in the given order. Each step's sacrifice is an
/// independent copy of the pair being purified.
fn cycle<S: Scalar>(
    kept: &NoisyStabilizerState<S>,
    first: PurifyKind,
    gates: &GateErrorSet<S>,
    spectator: Spectator,
) -> Result<NoisyStabilizerState<S>, BellError> {
    let second = match first {
        PurifyKind::Ztype => PurifyKind::Xtype,
        PurifyKind::Xtype => PurifyKind::Ztype,
    };
    let a = purify_once(kept, kept, first, gates, spectator)?;
    purify_once(&a, &a, second, gates, spectator)
}

/// Relative tolerance on the equal-normalization check between the orders.
pub const ORDER_MASS_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ComputedBellModel<S: Scalar> {
    pub spectator: Spectator,
    pub network: EncodingNetwork,
    /// 256 likelihoods indexed by the canonical Bell syndrome, normalized.
    pub dist: Vec<S>,
    /// Per cycle, the two orders' normalizations (mass before
    /// postselection).
    pub order_masses: Vec<(f64, f64)>,
    /// Per cycle, the two orders' accepted (postselected) masses.
    pub accepted_masses: Vec<(f64, f64)>,
}

/// Step order within each purification cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOrder {
    /// Both orders computed and averaged per cycle.
    Randomized,
    /// Every cycle runs the step checking the spectator's stabilizer type
    /// last: X-type for `|+⟩_S` spectators, Z-type for `|0⟩_S`.
    SpectatorLast,
    /// Randomized except the final cycle, which is `SpectatorLast`.
    #[default]
    FinalSpectatorLast,
}

impl StepOrder {
    /// The first step under a fixed order.
    pub fn fixed_first(spectator: Spectator) -> PurifyKind {
        match spectator {
            Spectator::Plus => PurifyKind::Ztype,
            Spectator::Zero => PurifyKind::Xtype,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PurificationSchedule {
    pub cycles: usize,
    /// Whether to enforce equal normalization across the two orders.
    pub check_orders: bool,
    pub order: StepOrder,
}

impl Default for PurificationSchedule {
    fn default() -> Self {
        PurificationSchedule { cycles: 2, check_orders: true, order: StepOrder::FinalSpectatorLast }
    }
}

/// Normalizations and accepted masses of the two orders in one cycle.
#[derive(Debug, Clone)]
pub struct OrderMasses<S> {
    pub gross: (S, S),
    pub accepted: (S, S),
}

/// Unnormalized, unsymmetrized purified state plus per-cycle masses.
/// Randomized cycles average the two orders, whose gross masses agree
/// because both run the same locations; fixed cycles report their single
/// mass twice.
pub fn purified_state<S: Scalar>(
    gates: &GateErrorSet<S>,
    net: &EncodingNetwork,
    ctx: S::Ctx,
    schedule: PurificationSchedule,
) -> Result<(NoisyStabilizerState<S>, Vec<OrderMasses<S>>), BellError> {
    let spectator = net.spectator;
    let mut kept = prepare_noisy_bell(gates, net, ctx.clone())?;
    let mut masses = Vec::new();
    for c in 0..schedule.cycles {
        let fixed = match schedule.order {
            StepOrder::Randomized => false,
            StepOrder::SpectatorLast => true,
            StepOrder::FinalSpectatorLast => c + 1 == schedule.cycles,
        };
        if fixed {
            kept = cycle(&kept, StepOrder::fixed_first(spectator), gates, spectator)?;
            let m = kept.gross_mass().clone();
            masses.push(OrderMasses { gross: (m.clone(), m), accepted: (kept.total_mass(), kept.total_mass()) });
            continue;
        }
        let (a, b) = rayon::join(
            || cycle(&kept, PurifyKind::Ztype, gates, spectator),
            || cycle(&kept, PurifyKind::Xtype, gates, spectator),
        );
        let (mut a, b) = (a?, b?);
        let (ga, gb) = (a.gross_mass().clone(), b.gross_mass().clone());
        if schedule.check_orders {
            let (fa, fb) = (ga.to_f64(), gb.to_f64());
            if (fa - fb).abs() > ORDER_MASS_RTOL * fa.abs().max(fb.abs()) {
                return Err(BellError::NormalizationMismatch(fa, fb));
            }
        }
        masses.push(OrderMasses { gross: (ga, gb), accepted: (a.total_mass(), b.total_mass()) });
        a.add_dist(&b)?;
        let two = S::one(&ctx).add(&S::one(&ctx));
        a.scale_div(&two);
        kept = a;
    }
    Ok((kept, masses))
}

/// Swaps the two blocks' generator triples; the encoded-pair generators are
/// invariant.
pub fn block_swap_perm() -> [usize; 8] {
    [3, 4, 5, 0, 1, 2, 6, 7]
}

pub fn compute_bell_model<S: Scalar>(
    gates: &GateErrorSet<S>,
    net: &EncodingNetwork,
    ctx: S::Ctx,
    schedule: PurificationSchedule,
) -> Result<ComputedBellModel<S>, BellError> {
    let (mut state, masses) = purified_state(gates, net, ctx, schedule)?;
    state.symmetrize_bits(&block_swap_perm());
    state.normalize()?;
    Ok(ComputedBellModel {
        spectator: net.spectator,
        network: net.clone(),
        dist: state.dist().to_vec(),
        order_masses: masses.iter().map(|m| (m.gross.0.to_f64(), m.gross.1.to_f64())).collect(),
        accepted_masses: masses.iter().map(|m| (m.accepted.0.to_f64(), m.accepted.1.to_f64())).collect(),
    })
}

impl<S: Scalar> ComputedBellModel<S> {
    pub fn is_delta(&self) -> bool {
        self.dist[1..].iter().all(|v| v.is_zero())
    }

    /// Relative difference of the two orders' masses, max over cycles.
    pub fn order_mismatch(&self) -> f64 {
        self.order_masses.iter().map(|(a, b)| (a - b).abs() / a.abs().max(b.abs())).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_models::{uniform_physical_set, LocationErrorModel, PhysicalErrorParams};
    use crate::symplectic::Pauli;

    #[test]
    fn synthesized_networks_match_code() {
        for spec in [Spectator::Zero, Spectator::Plus] {
            let net = synthesize_encoding_network(spec).unwrap();
            let cnots = net.gates().len();
            assert!(cnots <= 3, "{}", net.describe());
            let zero = GateErrorSet::<f64>::zero(0, &());
            let s = prepare_noisy_bell(&zero, &net, ()).unwrap();
            let expect = GeneratorMatrix::new(8, bell_generators(spec)).unwrap();
            assert!(s.generators().same_span(&expect));
            assert_eq!(s.dist()[0], 1.0);
            assert!(s.dist()[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn caption_stabilizer_lists() {
        let z: Vec<String> = bell_generators(Spectator::Zero).iter().map(|p| p.to_string()).collect();
        assert_eq!(z, ["XXXXIIII", "ZZZZIIII", "IIZZIIII", "IIIIXXXX", "IIIIZZZZ", "IIIIIIZZ", "XXIIXXII", "ZIZIZIZI"]);
        let p: Vec<String> = bell_generators(Spectator::Plus).iter().map(|p| p.to_string()).collect();
        assert_eq!(p[2], "IXIXIIII");
        assert_eq!(p[5], "IIIIIXIX");
    }

    #[test]
    fn zero_noise_purification_is_delta() {
        let net = synthesize_encoding_network(Spectator::Plus).unwrap();
        let zero = GateErrorSet::<f64>::zero(0, &());
        let m = compute_bell_model(&zero, &net, (), PurificationSchedule::default()).unwrap();
        assert!(m.is_delta());
        assert_eq!(m.dist[0], 1.0);
    }

    #[test]
    fn detectable_x_error_is_removed_by_z_step() {
        let spec = Spectator::Zero;
        let canon = GeneratorMatrix::new(8, bell_generators(spec)).unwrap();
        let mut kept = NoisyStabilizerState::<f64>::ideal(canon.clone(), ()).unwrap();
        let x0 = LocationErrorModel::new(1, vec![(PauliProduct::single(1, 0, Pauli::X).unwrap(), 0.3)]).unwrap();
        kept.apply_error_location(&x0, &[0]).unwrap();
        let sac = NoisyStabilizerState::<f64>::ideal(canon, ()).unwrap();
        let zero = GateErrorSet::<f64>::zero(0, &());
        let out = purify_once(&kept, &sac, PurifyKind::Ztype, &zero, spec).unwrap();
        assert_eq!(out.dist()[0], 1.0);
        assert!(out.dist()[1..].iter().all(|&v| v == 0.0));
        // the X-type step cannot see it
        let out = purify_once(&kept, &sac, PurifyKind::Xtype, &zero, spec).unwrap();
        assert!(out.dist()[1..].iter().any(|&v| v == 0.3));
    }

    #[test]
    fn acceptance_mass_at_most_input() {
        let spec = Spectator::Plus;
        let net = synthesize_encoding_network(spec).unwrap();
        let g = uniform_physical_set::<f64>(&PhysicalErrorParams::new(0.01, 0.03), &()).unwrap();
        let fresh = prepare_noisy_bell(&g, &net, ()).unwrap();
        let zero = GateErrorSet::<f64>::zero(0, &());
        let out = purify_once(&fresh, &fresh, PurifyKind::Ztype, &zero, spec).unwrap();
        let m = fresh.total_mass();
        assert!(out.total_mass() <= m * m * (1.0 + 1e-12));
    }
}
