//! Logical gate errors at one concatenation level.

use serde_json::{json, Value};
use thiserror::Error;

use crate::bellprep::{compute_bell_model, BellError, ComputedBellModel, EncodingNetwork, PurificationSchedule};
use crate::error_models::{
    cnot_marginals, two_qubit_paulis, weights_from_marginals, CosetErrorModel, CosetTable, GateErrorSet, LocalQubitError,
    LocationErrorModel, ModelError, PauliWeights, Spectator, LOGICAL_X, LOGICAL_Z,
};
use crate::indfit::{fit_bell_model, BellErrorModel, FitError, TieBreak};
use crate::likelihood::{Basis, LikelihoodError, NoisyStabilizerState, Register, Wire};
use crate::scalar::Scalar;
use crate::symplectic::{GeneratorMatrix, Pauli, PauliProduct};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GateError {
    #[error("{stage}: {source}")]
    Likelihood { stage: &'static str, source: LikelihoodError },
    #[error("Bell pair preparation: {0}")]
    Bell(#[from] BellError),
    #[error("independent fit: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn at(stage: &'static str) -> impl Fn(LikelihoodError) -> GateError {
    move |source| GateError::Likelihood { stage, source }
}

/// Order of the Bell-measurement pairing used by the Hadamard gadget: block
/// qubit `i` meets partner qubit `HADAMARD_SIGMA[i]`.
pub const HADAMARD_SIGMA: [usize; 4] = [0, 2, 1, 3];

/// Four-qubit block (qubits 0..4) maximally entangled with a reference
/// qubit 4: block generators, `X_L X_ref`, `Z_L Z_ref`.
pub fn block_with_reference<S: Scalar>(spectator: Spectator, ctx: S::Ctx) -> NoisyStabilizerState<S> {
    let x = PauliProduct::single(1, 0, Pauli::X).unwrap();
    let z = PauliProduct::single(1, 0, Pauli::Z).unwrap();
    let id = PauliProduct::identity(1);
    let mut rows: Vec<PauliProduct> =
        spectator.block_stabilizer().iter().map(|s| s.parse::<PauliProduct>().unwrap().tensor(&id)).collect();
    rows.push(LOGICAL_X.parse::<PauliProduct>().unwrap().tensor(&x));
    rows.push(LOGICAL_Z.parse::<PauliProduct>().unwrap().tensor(&z));
    let q = GeneratorMatrix::new(5, rows).expect("valid encoded pair");
    NoisyStabilizerState::ideal(q, ctx).expect("small state")
}

/// Attaches a block-plus-reference pair, returning block wires and the
/// reference wire.
fn attach_pair<S: Scalar>(reg: &mut Register<S>, spectator: Spectator) -> Result<([Wire; 4], Wire), LikelihoodError> {
    let ctx = reg.state.ctx().clone();
    let w = reg.attach(&block_with_reference(spectator, ctx))?;
    Ok(([w[0], w[1], w[2], w[3]], w[4]))
}

/// Transversal Bell measurement of qubit `b` against `o`: cnot `b → o`,
/// X measurement of `b`, Z measurement of `o`, both postselected on +1.
fn bell_measure<S: Scalar>(
    reg: &mut Register<S>,
    b: Wire,
    o: Wire,
    noise: Option<&GateErrorSet<S>>,
) -> Result<(), LikelihoodError> {
    reg.cnot(b, o)?;
    if let Some(g) = noise {
        reg.error(&g.cnot, &[b, o])?;
        reg.error_each(&g.meas, &[b])?;
    }
    reg.project(b, Basis::Xplus)?;
    if let Some(g) = noise {
        reg.error_each(&g.meas, &[o])?;
    }
    reg.project(o, Basis::Z0)
}

/// Likelihood of each Pauli on the live qubits relative to identity, after
/// rewriting the state's generators to `targets`.
pub(crate) fn relative_likelihoods<S: Scalar>(
    reg: &mut Register<S>,
    targets: &[PauliProduct],
    errors: &[PauliProduct],
    stage: &'static str,
) -> Result<Vec<S>, GateError> {
    reg.state.rewrite_rows(targets).map_err(at(stage))?;
    let dist = reg.state.dist();
    let d0 = dist[0].clone();
    if d0.is_zero() {
        return Err(GateError::Likelihood { stage, source: LikelihoodError::ZeroAcceptance });
    }
    let q = reg.state.generators();
    Ok(errors.iter().map(|p| dist[q.flip_pattern_unchecked(p) as usize].div(&d0)).collect())
}

/// Measures a noisy block transversally in `basis` and returns the flip
/// likelihood of the reference qubit left behind.
fn block_readout<S: Scalar>(
    model: &CosetErrorModel<S>,
    reps: &[PauliProduct],
    meas_model: &LocationErrorModel<S>,
    basis: Basis,
    ctx: &S::Ctx,
) -> Result<S, GateError> {
    const STAGE: &str = "block readout";
    let mut reg = Register::from_state(block_with_reference(model.spectator, ctx.clone()));
    let block = [0, 1, 2, 3];
    reg.error(&model.to_location(reps), &block).map_err(at(STAGE))?;
    for &w in &block {
        reg.error_each(meas_model, &[w]).map_err(at(STAGE))?;
        reg.project(w, basis).map_err(at(STAGE))?;
    }
    let target = reg.pauli(&[(4, basis.pauli())]);
    let flip = reg.pauli(&[(4, basis.flip())]);
    Ok(relative_likelihoods(&mut reg, &[target], &[flip], STAGE)?.remove(0))
}

/// Flip likelihood of a logical preparation in `basis`: the origin block is
/// measured transversally, leaving its partner prepared.
pub fn logical_prep_error<S: Scalar>(
    bell: &BellErrorModel<S>,
    reps: &[PauliProduct],
    meas_model: &LocationErrorModel<S>,
    basis: Basis,
    ctx: &S::Ctx,
) -> Result<S, GateError> {
    block_readout(&bell.origin, reps, meas_model, basis, ctx)
}

/// Flip likelihood of a logical measurement in `basis`, read from the
/// destination block.
pub fn logical_meas_error<S: Scalar>(
    bell: &BellErrorModel<S>,
    reps: &[PauliProduct],
    meas_model: &LocationErrorModel<S>,
    basis: Basis,
    ctx: &S::Ctx,
) -> Result<S, GateError> {
    block_readout(&bell.destination, reps, meas_model, basis, ctx)
}

/// Bell measurements carry physical errors only at level 1.
fn bell_noise<S: Scalar>(prev: &GateErrorSet<S>) -> Option<&GateErrorSet<S>> {
    (prev.level == 0).then_some(prev)
}

/// Teleported logical cnot: two input blocks with destination-model errors,
/// a transversal cnot carrying `prev.cnot`, then Bell measurements into two
/// fresh origin blocks. Returns the 15 two-qubit Pauli likelihoods on
/// (control, target).
pub fn logical_cnot_error<S: Scalar>(
    bell: &BellErrorModel<S>,
    reps: &[PauliProduct],
    prev: &GateErrorSet<S>,
    ctx: &S::Ctx,
) -> Result<LocationErrorModel<S>, GateError> {
    const STAGE: &str = "logical cnot";
    let spectator = bell.destination.spectator;
    let noise = bell_noise(prev);
    let mut reg = Register::<S>::new(ctx.clone());
    let (b1, r1) = attach_pair(&mut reg, spectator).map_err(at(STAGE))?;
    let (b2, r2) = attach_pair(&mut reg, spectator).map_err(at(STAGE))?;
    let dest = bell.destination.to_location(reps);
    reg.error(&dest, &b1).map_err(at(STAGE))?;
    reg.error(&dest, &b2).map_err(at(STAGE))?;
    for i in 0..4 {
        reg.cnot(b1[i], b2[i]).map_err(at(STAGE))?;
        reg.error(&prev.cnot, &[b1[i], b2[i]]).map_err(at(STAGE))?;
    }
    let origin = bell.origin.to_location(reps);
    let mut refs = Vec::with_capacity(2);
    for b in [b1, b2] {
        let (o, d) = attach_pair(&mut reg, bell.origin.spectator).map_err(at(STAGE))?;
        reg.error(&origin, &o).map_err(at(STAGE))?;
        for i in 0..4 {
            bell_measure(&mut reg, b[i], o[i], noise).map_err(at(STAGE))?;
        }
        refs.push(d);
    }
    let (d1, d2) = (refs[0], refs[1]);
    use Pauli::{X, Z};
    let targets = [
        reg.pauli(&[(r1, X), (d1, X), (d2, X)]),
        reg.pauli(&[(r1, Z), (d1, Z)]),
        reg.pauli(&[(r2, X), (d2, X)]),
        reg.pauli(&[(r2, Z), (d1, Z), (d2, Z)]),
    ];
    let paulis = two_qubit_paulis();
    let errors: Vec<PauliProduct> = paulis.iter().map(|p| reg.pauli(&[(d1, p.get(0)), (d2, p.get(1))])).collect();
    let e = relative_likelihoods(&mut reg, &targets, &errors, STAGE)?;
    Ok(LocationErrorModel::new(2, paulis.into_iter().zip(e).collect())?)
}

/// Teleported logical Hadamard: transversal Hadamards carrying
/// `prev.hadamard`, then Bell measurements with the middle two qubits
/// crossed.
pub fn logical_hadamard_error<S: Scalar>(
    bell: &BellErrorModel<S>,
    reps: &[PauliProduct],
    prev: &GateErrorSet<S>,
    ctx: &S::Ctx,
) -> Result<LocalQubitError<S>, GateError> {
    const STAGE: &str = "logical Hadamard";
    let noise = bell_noise(prev);
    let mut reg = Register::<S>::new(ctx.clone());
    let (b, r) = attach_pair(&mut reg, bell.destination.spectator).map_err(at(STAGE))?;
    reg.error(&bell.destination.to_location(reps), &b).map_err(at(STAGE))?;
    for &w in &b {
        reg.hadamard(w).map_err(at(STAGE))?;
        reg.error(&prev.hadamard, &[w]).map_err(at(STAGE))?;
    }
    let (o, d) = attach_pair(&mut reg, bell.origin.spectator).map_err(at(STAGE))?;
    reg.error(&bell.origin.to_location(reps), &o).map_err(at(STAGE))?;
    for i in 0..4 {
        bell_measure(&mut reg, b[i], o[HADAMARD_SIGMA[i]], noise).map_err(at(STAGE))?;
    }
    use Pauli::{X, Y, Z};
    let targets = [reg.pauli(&[(r, X), (d, Z)]), reg.pauli(&[(r, Z), (d, X)])];
    let errors = [reg.pauli(&[(d, X)]), reg.pauli(&[(d, Z)]), reg.pauli(&[(d, Y)])];
    let mut e = relative_likelihoods(&mut reg, &targets, &errors, STAGE)?.into_iter();
    Ok(LocalQubitError { e_x: e.next().unwrap(), e_z: e.next().unwrap(), e_y: e.next().unwrap() })
}

/// Attribution weights: negative log of the previous level's cnot
/// marginals.
pub fn attribution_weights<S: Scalar>(prev: &GateErrorSet<S>, ctx: &S::Ctx) -> PauliWeights {
    weights_from_marginals(cnot_marginals(&prev.cnot, ctx).map(|m| m.to_f64()))
}

/// Error probabilities of one level, recomputed from its likelihoods.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LevelSummary {
    pub prep_x: f64,
    pub prep_z: f64,
    pub meas_x: f64,
    pub meas_z: f64,
    /// Maximum marginal probability of X, Z, Y over the two cnot slots.
    pub cnot_marginal: [f64; 3],
    pub cnot_total: f64,
    pub hadamard: [f64; 3],
    pub hadamard_total: f64,
}

impl LevelSummary {
    /// Largest error probability of the cnot, Hadamard and
    /// preparation/measurement gates.
    pub fn max_gate_error(&self) -> f64 {
        [self.prep_x, self.prep_z, self.meas_x, self.meas_z, self.cnot_total, self.hadamard_total]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct LevelReport<S: Scalar> {
    pub level: usize,
    pub spectator: Spectator,
    pub gate_errors: GateErrorSet<S>,
    pub bell: BellErrorModel<S>,
    pub computed: ComputedBellModel<S>,
    pub ctx: S::Ctx,
}

fn flip_probability<S: Scalar>(m: &LocationErrorModel<S>, p: Pauli, ctx: &S::Ctx) -> f64 {
    let e = m.get(&PauliProduct::single(1, 0, p).unwrap()).cloned().unwrap_or_else(|| S::zero(ctx));
    e.div(&S::one(ctx).add(&e)).to_f64()
}

/// Summary probabilities of a gate-error set.
pub fn summarize<S: Scalar>(g: &GateErrorSet<S>, ctx: &S::Ctx) -> LevelSummary {
    let cnot_sum = g.cnot.total(ctx);
    let cnot_norm = S::one(ctx).add(&cnot_sum);
    let h = LocalQubitError {
        e_x: hadamard_entry(g, Pauli::X, ctx),
        e_z: hadamard_entry(g, Pauli::Z, ctx),
        e_y: hadamard_entry(g, Pauli::Y, ctx),
    };
    LevelSummary {
        prep_x: flip_probability(&g.prep, Pauli::X, ctx),
        prep_z: flip_probability(&g.prep, Pauli::Z, ctx),
        meas_x: flip_probability(&g.meas, Pauli::X, ctx),
        meas_z: flip_probability(&g.meas, Pauli::Z, ctx),
        cnot_marginal: cnot_marginals(&g.cnot, ctx).map(|m| m.div(&cnot_norm).to_f64()),
        cnot_total: cnot_sum.div(&cnot_norm).to_f64(),
        hadamard: h.probabilities(ctx).map(|p| p.to_f64()),
        hadamard_total: h.total_probability(ctx).to_f64(),
    }
}

fn hadamard_entry<S: Scalar>(g: &GateErrorSet<S>, p: Pauli, ctx: &S::Ctx) -> S {
    g.hadamard.get(&PauliProduct::single(1, 0, p).unwrap()).cloned().unwrap_or_else(|| S::zero(ctx))
}

impl<S: Scalar> LevelReport<S> {
    /// Destination-block model: the terminal error left on prepared blocks.
    pub fn terminal(&self) -> &CosetErrorModel<S> {
        &self.bell.destination
    }

    pub fn summary(&self) -> LevelSummary {
        summarize(&self.gate_errors, &self.ctx)
    }

    pub fn to_document(&self) -> Value {
        let table = CosetTable::new(self.spectator);
        let s = self.summary();
        json!({
            "level": self.level,
            "spectator": self.spectator,
            "encoder": self.computed.network.describe(),
            "independence_quality": { "min": self.bell.quality_min, "max": self.bell.quality_max },
            "prep": { "X": s.prep_x, "Z": s.prep_z },
            "meas": { "X": s.meas_x, "Z": s.meas_z },
            "cnot": { "X": s.cnot_marginal[0], "Z": s.cnot_marginal[1], "Y": s.cnot_marginal[2], "total": s.cnot_total },
            "hadamard": { "X": s.hadamard[0], "Z": s.hadamard[1], "Y": s.hadamard[2], "total": s.hadamard_total },
            "max_gate_error": s.max_gate_error(),
            "purification_masses": self.computed.order_masses,
            "accepted_masses": self.computed.accepted_masses,
            "gate_errors": self.gate_errors.to_document(),
            "bell_model": self.bell.to_document(&table),
        })
    }
}

/// Knobs of one recursion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepOptions {
    pub schedule: PurificationSchedule,
    pub tie_break: TieBreak,
}

/// One level of the recursion: purified Bell pairs from `prev`, the
/// independent fit, and the four logical gate computations.
pub fn level_step<S: Scalar>(
    prev: &GateErrorSet<S>,
    net: &EncodingNetwork,
    ctx: &S::Ctx,
    opts: StepOptions,
) -> Result<LevelReport<S>, GateError> {
    let computed = compute_bell_model(prev, net, ctx.clone(), opts.schedule)?;
    let weights = attribution_weights(prev, ctx);
    let bell = fit_bell_model(&computed, &weights, ctx, opts.tie_break)?;
    let reps = CosetTable::new(net.spectator).min_weight_reps(&weights);
    let readouts = || -> Result<[S; 4], GateError> {
        Ok([
            logical_prep_error(&bell, &reps, &prev.meas, Basis::Z0, ctx)?,
            logical_prep_error(&bell, &reps, &prev.meas, Basis::Xplus, ctx)?,
            logical_meas_error(&bell, &reps, &prev.meas, Basis::Z0, ctx)?,
            logical_meas_error(&bell, &reps, &prev.meas, Basis::Xplus, ctx)?,
        ])
    };
    let ((cnot, had), flips) = rayon::join(
        || {
            rayon::join(
                || logical_cnot_error(&bell, &reps, prev, ctx),
                || logical_hadamard_error(&bell, &reps, prev, ctx),
            )
        },
        readouts,
    );
    let [p0, pp, m0, mp] = flips?;
    let single = |p| PauliProduct::single(1, 0, p).unwrap();
    let gate_errors = GateErrorSet {
        level: prev.level + 1,
        prep: LocationErrorModel::new(1, vec![(single(Pauli::X), p0), (single(Pauli::Z), pp)])?,
        meas: LocationErrorModel::new(1, vec![(single(Pauli::X), m0), (single(Pauli::Z), mp)])?,
        cnot: cnot?,
        hadamard: had?.to_model(),
        special: prev.special.clone(),
    };
    Ok(LevelReport { level: gate_errors.level, spectator: net.spectator, gate_errors, bell, computed, ctx: ctx.clone() })
}
