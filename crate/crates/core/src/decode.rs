//! Bottom-up decoding, state injection and the general-threshold budget.

use serde::Serialize;
use serde_json::{json, Value};

use crate::bellprep::{decode_block, EncodingNetwork};
use crate::error_models::{CosetErrorModel, CosetTable, GateErrorSet, LocalQubitError, PauliWeights, PhysicalErrorParams};
use crate::gates::{at, block_with_reference, relative_likelihoods, GateError, LevelReport};
use crate::likelihood::Register;
use crate::scalar::Scalar;
use crate::symplectic::Pauli;

/// Error probability below which injected states can still be distilled.
pub const DISTILLATION_THRESHOLD: f64 = 0.35;

/// Decodes one block into its data qubit. The block carries the terminal
/// coset model plus `incoming` on each qubit; the inverse encoder and the
/// ancilla measurements use the physical error models in `phys`.
pub fn decode_step<S: Scalar>(
    terminal: &CosetErrorModel<S>,
    incoming: &LocalQubitError<S>,
    phys: &GateErrorSet<S>,
    net: &EncodingNetwork,
    ctx: &S::Ctx,
) -> Result<LocalQubitError<S>, GateError> {
    const STAGE: &str = "decode";
    let reps = CosetTable::new(net.spectator).min_weight_reps(&PauliWeights::UNIT);
    let mut reg = Register::from_state(block_with_reference(net.spectator, ctx.clone()));
    let block = [0, 1, 2, 3];
    let reference = 4;
    reg.error(&terminal.to_location(&reps), &block).map_err(at(STAGE))?;
    let local = incoming.to_model();
    for &w in &block {
        reg.error(&local, &[w]).map_err(at(STAGE))?;
    }
    decode_block(&mut reg, net, block, phys).map_err(at(STAGE))?;
    for (q, basis) in net.ancilla_bases() {
        reg.error_each(&phys.meas, &[block[q]]).map_err(at(STAGE))?;
        reg.project(block[q], basis).map_err(at(STAGE))?;
    }
    let data = block[0];
    use Pauli::{X, Y, Z};
    let targets = [reg.pauli(&[(data, X), (reference, X)]), reg.pauli(&[(data, Z), (reference, Z)])];
    let errors = [reg.pauli(&[(data, X)]), reg.pauli(&[(data, Z)]), reg.pauli(&[(data, Y)])];
    let mut e = relative_likelihoods(&mut reg, &targets, &errors, STAGE)?.into_iter();
    Ok(LocalQubitError { e_x: e.next().unwrap(), e_z: e.next().unwrap(), e_y: e.next().unwrap() })
}

#[derive(Debug, Clone)]
pub struct DecodeChainReport<S> {
    /// `d_1..d_h`, one per level.
    pub steps: Vec<LocalQubitError<S>>,
    pub totals: Vec<f64>,
    /// Largest total plus the last observed decrease.
    pub bound: f64,
}

impl<S: Scalar> DecodeChainReport<S> {
    pub fn is_non_increasing(&self) -> bool {
        self.totals.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn to_document(&self, ctx: &S::Ctx) -> Value {
        let rows: Vec<Value> = self
            .steps
            .iter()
            .zip(&self.totals)
            .enumerate()
            .map(|(i, (d, t))| {
                let [x, z, y] = d.probabilities(ctx).map(|p| p.to_f64());
                json!({ "level": i + 1, "X": x, "Z": z, "Y": y, "total": t })
            })
            .collect();
        json!({ "levels": rows, "bound": self.bound })
    }
}

/// Decodes from the bottom up: level `l` sees the error left by decoding
/// level `l − 1`.
pub fn decode_chain<S: Scalar>(
    levels: &[LevelReport<S>],
    phys: &GateErrorSet<S>,
    ctx: &S::Ctx,
) -> Result<DecodeChainReport<S>, GateError> {
    let mut d = LocalQubitError::zero(ctx);
    let mut steps = Vec::with_capacity(levels.len());
    for r in levels {
        d = decode_step(r.terminal(), &d, phys, &r.computed.network, ctx)?;
        steps.push(d.clone());
    }
    let totals: Vec<f64> = steps.iter().map(|d| d.total_probability(ctx).to_f64()).collect();
    let max = totals.iter().copied().fold(0.0, f64::max);
    let decrement = match totals.as_slice() {
        [.., a, b] => (a - b).max(0.0),
        _ => 0.0,
    };
    Ok(DecodeChainReport { steps, totals, bound: max + decrement })
}

/// Physical Bell-measurement error: one cnot and two measurements.
pub fn bell_measurement_error(phys: &PhysicalErrorParams) -> f64 {
    phys.p_cnot + 2.0 * phys.p_meas
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InjectionReport {
    pub special: f64,
    pub decode: f64,
    pub bell_measurement: f64,
    pub total: f64,
    pub distillable: bool,
}

/// Error bound of a state teleported into the top-level code through a
/// decoded Bell-pair half.
pub fn injection_error(decode_bound: f64, phys: &PhysicalErrorParams) -> InjectionReport {
    let bell = bell_measurement_error(phys);
    let total = phys.p_special + decode_bound + bell;
    InjectionReport { special: phys.p_special, decode: decode_bound, bell_measurement: bell, total, distillable: total < DISTILLATION_THRESHOLD }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetReport {
    pub bell_measurement: f64,
    pub memory: f64,
    pub decode: f64,
    pub total: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Per-qubit error budget of teleported error correction with an outer
/// code: Bell measurement, memory, and twice the decoding error.
pub fn budget_check(decode_bound: f64, phys: &PhysicalErrorParams, memory: f64, tolerance: f64) -> BudgetReport {
    let bell = bell_measurement_error(phys);
    let decode = 2.0 * decode_bound;
    let total = bell + memory + decode;
    BudgetReport { bell_measurement: bell, memory, decode, total, tolerance, pass: total < tolerance }
}
