//! Error-location models, the uniform physical parameterization, cnot
//! marginals and weights, and 32-coset block models for the four-qubit code.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::likelihood::Basis;
use crate::scalar::{likelihood_of, parse_decimal, ratio_from_f64, Scalar, ScalarError};
use crate::symplectic::{GeneratorMatrix, Pauli, PauliProduct, SymplecticError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Symplectic(#[from] SymplecticError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("entry {0} has the wrong arity or is the identity")]
    BadEntry(String),
    #[error("duplicate entry {0}")]
    Duplicate(String),
    #[error("arity {0} is not supported")]
    BadArity(usize),
    #[error("malformed document: {0}")]
    Document(String),
}

/// Likelihoods of the non-identity Pauli products at one error location.
/// The identity has implicit likelihood 1.
#[derive(Debug, Clone)]
pub struct LocationErrorModel<S> {
    arity: usize,
    entries: Vec<(PauliProduct, S)>,
}

impl<S: Scalar> LocationErrorModel<S> {
    pub fn new(arity: usize, entries: Vec<(PauliProduct, S)>) -> Result<Self, ModelError> {
        if arity == 0 || arity > 8 {
            return Err(ModelError::BadArity(arity));
        }
        let mut seen = std::collections::HashSet::new();
        for (p, _) in &entries {
            if p.n() != arity || p.is_identity() {
                return Err(ModelError::BadEntry(p.to_string()));
            }
            if !seen.insert(*p) {
                return Err(ModelError::Duplicate(p.to_string()));
            }
        }
        Ok(LocationErrorModel { arity, entries })
    }

    pub fn empty(arity: usize) -> Self {
        LocationErrorModel { arity, entries: Vec::new() }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn entries(&self) -> &[(PauliProduct, S)] {
        &self.entries
    }

    pub fn get(&self, p: &PauliProduct) -> Option<&S> {
        self.entries.iter().find(|(q, _)| q == p).map(|(_, e)| e)
    }

    pub fn total(&self, ctx: &S::Ctx) -> S {
        let mut acc = S::zero(ctx);
        for (_, e) in &self.entries {
            acc.add_assign(e);
        }
        acc
    }

    /// Only the entry for `p`, as a fresh single-entry model.
    pub fn restricted(&self, p: &PauliProduct) -> Self {
        LocationErrorModel {
            arity: self.arity,
            entries: self.entries.iter().filter(|(q, _)| q == p).cloned().collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|(_, e)| e.is_zero())
    }
}

/// The two-qubit Pauli products in canonical order (first slot varies
/// slowest, I/X/Z/Y order per slot), identity excluded.
pub fn two_qubit_paulis() -> Vec<PauliProduct> {
    let order = [Pauli::I, Pauli::X, Pauli::Z, Pauli::Y];
    let mut out = Vec::with_capacity(15);
    for a in order {
        for b in order {
            if a == Pauli::I && b == Pauli::I {
                continue;
            }
            let mut p = PauliProduct::identity(2);
            p.set(0, a);
            p.set(1, b);
            out.push(p);
        }
    }
    out
}

fn single(p: Pauli) -> PauliProduct {
    PauliProduct::single(1, 0, p).expect("one qubit")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalErrorParams {
    pub p_prep: f64,
    pub p_meas: f64,
    pub p_cnot: f64,
    pub p_hadamard: f64,
    pub p_special: f64,
}

impl PhysicalErrorParams {
    /// Defaults tie measurement and special-state preparation to `p_prep`
    /// and set the Hadamard error to 1.5 × `p_prep`.
    pub fn new(p_prep: f64, p_cnot: f64) -> Self {
        PhysicalErrorParams { p_prep, p_meas: p_prep, p_cnot, p_hadamard: 1.5 * p_prep, p_special: p_prep }
    }

    pub fn validate(&self) -> Result<(), ScalarError> {
        for p in [self.p_prep, self.p_meas, self.p_cnot, self.p_hadamard, self.p_special] {
            if !(0.0..1.0).contains(&p) {
                return Err(ScalarError::BadProbability(p.to_string()));
            }
        }
        Ok(())
    }
}

/// Error models for every gate type at one level.
///
/// `prep` and `meas` hold an `X` entry (flip of a Z-basis preparation or
/// measurement) and a `Z` entry (flip in the X basis). Networks apply both
/// entries as separate independent locations; the one that commutes with
/// the basis only rescales the distribution, which keeps the location
/// multiset basis-independent.
#[derive(Debug, Clone)]
pub struct GateErrorSet<S> {
    pub level: usize,
    pub prep: LocationErrorModel<S>,
    pub meas: LocationErrorModel<S>,
    pub cnot: LocationErrorModel<S>,
    pub hadamard: LocationErrorModel<S>,
    pub special: LocationErrorModel<S>,
}

impl<S: Scalar> GateErrorSet<S> {
    /// The entry that actually flips a preparation in `basis`.
    pub fn prep_for(&self, basis: Basis) -> LocationErrorModel<S> {
        self.prep.restricted(&single(basis.flip()))
    }

    /// The entry that actually flips a measurement in `basis`.
    pub fn meas_for(&self, basis: Basis) -> LocationErrorModel<S> {
        self.meas.restricted(&single(basis.flip()))
    }

    pub fn zero(level: usize, ctx: &S::Ctx) -> Self {
        let z = |p| (single(p), S::zero(ctx));
        GateErrorSet {
            level,
            prep: LocationErrorModel::new(1, vec![z(Pauli::X), z(Pauli::Z)]).unwrap(),
            meas: LocationErrorModel::new(1, vec![z(Pauli::X), z(Pauli::Z)]).unwrap(),
            cnot: LocationErrorModel::new(2, two_qubit_paulis().into_iter().map(|p| (p, S::zero(ctx))).collect()).unwrap(),
            hadamard: LocationErrorModel::new(1, Pauli::NON_IDENTITY.iter().map(|&p| z(p)).collect()).unwrap(),
            special: LocationErrorModel::new(1, vec![z(Pauli::Z)]).unwrap(),
        }
    }

    pub fn is_zero(&self) -> bool {
        [&self.prep, &self.meas, &self.cnot, &self.hadamard, &self.special].iter().all(|m| m.is_zero())
    }

    /// Document keyed by gate type, then Pauli string, with decimal
    /// likelihood strings.
    pub fn to_document(&self) -> Value {
        let table = |m: &LocationErrorModel<S>| {
            let map: BTreeMap<String, String> = m.entries.iter().map(|(p, e)| (p.to_string(), e.to_decimal())).collect();
            json!(map)
        };
        json!({
            "level": self.level,
            "prep": table(&self.prep),
            "meas": table(&self.meas),
            "cnot": table(&self.cnot),
            "hadamard": table(&self.hadamard),
            "special": table(&self.special),
        })
    }

    pub fn from_document(doc: &Value, ctx: &S::Ctx) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Document(m.to_string());
        let level = doc.get("level").and_then(Value::as_u64).ok_or_else(|| bad("missing level"))? as usize;
        let table = |key: &str, arity: usize| -> Result<LocationErrorModel<S>, ModelError> {
            let obj = doc.get(key).and_then(Value::as_object).ok_or_else(|| bad(key))?;
            let mut entries = Vec::with_capacity(obj.len());
            for (k, v) in obj {
                let p: PauliProduct = k.parse()?;
                let text = v.as_str().ok_or_else(|| bad(k))?;
                let r = parse_decimal(text)?;
                if r < BigRational::from_integer(0.into()) {
                    return Err(ScalarError::BadProbability(text.to_string()).into());
                }
                entries.push((p, S::from_ratio(ctx, &r)));
            }
            LocationErrorModel::new(arity, entries)
        };
        Ok(GateErrorSet {
            level,
            prep: table("prep", 1)?,
            meas: table("meas", 1)?,
            cnot: table("cnot", 2)?,
            hadamard: table("hadamard", 1)?,
            special: table("special", 1)?,
        })
    }
}

/// Level-0 models from physical probabilities: `e = p/(1−p)`, cnot entries
/// `e_c/15`, Hadamard entries `e_h/3`.
pub fn uniform_physical_set<S: Scalar>(params: &PhysicalErrorParams, ctx: &S::Ctx) -> Result<GateErrorSet<S>, ModelError> {
    params.validate()?;
    let e = |p: f64| likelihood_of(&ratio_from_f64(p));
    let (ep, em, ec, eh, es) =
        (e(params.p_prep)?, e(params.p_meas)?, e(params.p_cnot)?, e(params.p_hadamard)?, e(params.p_special)?);
    let lk = |r: &BigRational| S::likelihood(ctx, r);
    let c15 = lk(&(ec / BigRational::from_integer(15.into())));
    let h3 = lk(&(eh / BigRational::from_integer(3.into())));
    Ok(GateErrorSet {
        level: 0,
        prep: LocationErrorModel::new(1, vec![(single(Pauli::X), lk(&ep)), (single(Pauli::Z), lk(&ep))])?,
        meas: LocationErrorModel::new(1, vec![(single(Pauli::X), lk(&em)), (single(Pauli::Z), lk(&em))])?,
        cnot: LocationErrorModel::new(2, two_qubit_paulis().into_iter().map(|p| (p, c15.clone())).collect())?,
        hadamard: LocationErrorModel::new(1, Pauli::NON_IDENTITY.iter().map(|&p| (single(p), h3.clone())).collect())?,
        special: LocationErrorModel::new(1, vec![(single(Pauli::Z), lk(&es))])?,
    })
}

/// Per-Pauli single-qubit marginals of a two-qubit model, maximized over
/// the two slots. Returned in X, Z, Y order.
pub fn cnot_marginals<S: Scalar>(cnot: &LocationErrorModel<S>, ctx: &S::Ctx) -> [S; 3] {
    Pauli::NON_IDENTITY.map(|target| {
        let mut best = S::zero(ctx);
        for slot in 0..cnot.arity() {
            let mut acc = S::zero(ctx);
            for (p, e) in &cnot.entries {
                if p.get(slot) == target {
                    acc.add_assign(e);
                }
            }
            best = S::max_value(&best, &acc);
        }
        best
    })
}

/// Additive single-qubit weights `w_P = −ln(m_P)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliWeights {
    pub w_x: f64,
    pub w_z: f64,
    pub w_y: f64,
}

impl PauliWeights {
    pub const UNIT: PauliWeights = PauliWeights { w_x: 1.0, w_z: 1.0, w_y: 1.0 };

    pub fn of(&self, p: Pauli) -> f64 {
        match p {
            Pauli::I => 0.0,
            Pauli::X => self.w_x,
            Pauli::Z => self.w_z,
            Pauli::Y => self.w_y,
        }
    }

    pub fn weight(&self, p: &PauliProduct) -> f64 {
        (0..p.n()).map(|q| self.of(p.get(q))).sum()
    }
}

/// Marginals are likelihoods relative to the identity, so the weights are
/// their negative logarithms; a zero marginal gets infinite weight.
pub fn weights_from_marginals(m: [f64; 3]) -> PauliWeights {
    let w = |v: f64| if v > 0.0 { -v.ln() } else { f64::INFINITY };
    PauliWeights { w_x: w(m[0]), w_z: w(m[1]), w_y: w(m[2]) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spectator {
    /// Spectator qubit in |0⟩_S; third stabilizer IIZZ.
    Zero,
    /// Spectator qubit in |+⟩_S; third stabilizer IXIX.
    Plus,
}

impl Spectator {
    pub fn block_stabilizer(self) -> [&'static str; 3] {
        match self {
            Spectator::Zero => ["XXXX", "ZZZZ", "IIZZ"],
            Spectator::Plus => ["XXXX", "ZZZZ", "IXIX"],
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Spectator::Zero => '0',
            Spectator::Plus => '+',
        }
    }
}

impl std::str::FromStr for Spectator {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s.trim() {
            "+" | "plus" | "Plus" => Ok(Spectator::Plus),
            "0" | "zero" | "Zero" => Ok(Spectator::Zero),
            other => Err(ModelError::Document(format!("unknown spectator {other:?}"))),
        }
    }
}

pub const LOGICAL_X: &str = "XXII";
pub const LOGICAL_Z: &str = "ZIZI";
pub const NUM_COSETS: usize = 32;

/// Cosets of the 8-element block stabilizer among the 256 four-qubit Paulis.
#[derive(Debug, Clone)]
pub struct CosetTable {
    pub spectator: Spectator,
    stabilizer: GeneratorMatrix,
    /// Block generators followed by X_L and Z_L; a coset is identified by its
    /// anticommutation pattern with these five operators.
    frame: GeneratorMatrix,
    coset_of: Vec<u8>,
    pattern_of: [u8; NUM_COSETS],
    coset_of_pattern: [u8; NUM_COSETS],
    members: Vec<[PauliProduct; 8]>,
}

fn pauli_index(p: &PauliProduct) -> usize {
    (p.x_bits() | p.z_bits() << 4) as usize
}

impl CosetTable {
    pub fn new(spectator: Spectator) -> Self {
        let stabilizer = GeneratorMatrix::from_strs(&spectator.block_stabilizer()).expect("valid block code");
        let mut rows = stabilizer.rows().to_vec();
        rows.push(LOGICAL_X.parse().unwrap());
        rows.push(LOGICAL_Z.parse().unwrap());
        let frame = GeneratorMatrix::from_rows_unchecked(4, rows);
        let mut by_pattern: Vec<Vec<PauliProduct>> = vec![Vec::new(); NUM_COSETS];
        for x in 0..16u64 {
            for z in 0..16u64 {
                let p = PauliProduct::from_bits(4, x, z).unwrap();
                by_pattern[frame.flip_pattern_unchecked(&p) as usize].push(p);
            }
        }
        for m in by_pattern.iter_mut() {
            m.sort_by_key(|p| p.lex_key());
        }
        let mut patterns: Vec<usize> = (0..NUM_COSETS).collect();
        patterns.sort_by_key(|&pat| by_pattern[pat][0].lex_key());
        let mut pattern_of = [0u8; NUM_COSETS];
        let mut coset_of_pattern = [0u8; NUM_COSETS];
        let mut members = Vec::with_capacity(NUM_COSETS);
        let mut coset_of = vec![0u8; 256];
        for (c, &pat) in patterns.iter().enumerate() {
            pattern_of[c] = pat as u8;
            coset_of_pattern[pat] = c as u8;
            let m: [PauliProduct; 8] = by_pattern[pat].clone().try_into().expect("8 members per coset");
            for p in &m {
                coset_of[pauli_index(p)] = c as u8;
            }
            members.push(m);
        }
        CosetTable { spectator, stabilizer, frame, coset_of, pattern_of, coset_of_pattern, members }
    }

    pub fn stabilizer(&self) -> &GeneratorMatrix {
        &self.stabilizer
    }

    pub fn coset(&self, p: &PauliProduct) -> usize {
        self.coset_of[pauli_index(p)] as usize
    }

    pub fn members(&self, c: usize) -> &[PauliProduct; 8] {
        &self.members[c]
    }

    /// Five-bit pattern: bits 0–2 block generators, bit 3 X_L, bit 4 Z_L.
    pub fn pattern(&self, c: usize) -> u8 {
        self.pattern_of[c]
    }

    pub fn coset_of_pattern(&self, pat: u8) -> usize {
        self.coset_of_pattern[pat as usize] as usize
    }

    pub fn frame(&self) -> &GeneratorMatrix {
        &self.frame
    }

    /// Minimum-weight member per coset, ties going to the canonical order.
    pub fn min_weight_reps(&self, w: &PauliWeights) -> Vec<PauliProduct> {
        self.members
            .iter()
            .map(|m| {
                let mut best = m[0];
                let mut bw = w.weight(&best);
                for p in &m[1..] {
                    let pw = w.weight(p);
                    if pw < bw {
                        best = *p;
                        bw = pw;
                    }
                }
                best
            })
            .collect()
    }

    pub fn coset_weights(&self, w: &PauliWeights) -> Vec<f64> {
        self.members.iter().map(|m| m.iter().map(|p| w.weight(p)).fold(f64::INFINITY, f64::min)).collect()
    }
}

/// Likelihoods for the 32 cosets of one block, identity coset at index 0.
#[derive(Debug, Clone)]
pub struct CosetErrorModel<S> {
    pub spectator: Spectator,
    pub likelihoods: Vec<S>,
}

impl<S: Scalar> CosetErrorModel<S> {
    pub fn zero(spectator: Spectator, ctx: &S::Ctx) -> Self {
        let mut likelihoods = vec![S::zero(ctx); NUM_COSETS];
        likelihoods[0] = S::one(ctx);
        CosetErrorModel { spectator, likelihoods }
    }

    /// A single four-qubit error location using the given representatives.
    pub fn to_location(&self, reps: &[PauliProduct]) -> LocationErrorModel<S> {
        let entries = (1..NUM_COSETS).map(|c| (reps[c], self.likelihoods[c].clone())).collect();
        LocationErrorModel::new(4, entries).expect("coset representatives are distinct non-identity")
    }

    pub fn to_document(&self, table: &CosetTable) -> Value {
        let rows: Vec<Value> = (0..NUM_COSETS)
            .map(|c| json!({ "coset": c, "representative": table.members(c)[0].to_string(), "likelihood": self.likelihoods[c].to_decimal() }))
            .collect();
        json!({ "spectator": self.spectator, "cosets": rows })
    }
}

/// Likelihoods of logical X, Z and Y on one qubit, relative to identity.
#[derive(Debug, Clone)]
pub struct LocalQubitError<S> {
    pub e_x: S,
    pub e_z: S,
    pub e_y: S,
}

impl<S: Scalar> LocalQubitError<S> {
    pub fn zero(ctx: &S::Ctx) -> Self {
        LocalQubitError { e_x: S::zero(ctx), e_z: S::zero(ctx), e_y: S::zero(ctx) }
    }

    fn sum(&self) -> S {
        self.e_x.add(&self.e_z).add(&self.e_y)
    }

    /// `(e_X + e_Z + e_Y) / (1 + e_X + e_Z + e_Y)`.
    pub fn total_probability(&self, ctx: &S::Ctx) -> S {
        let s = self.sum();
        s.div(&S::one(ctx).add(&s))
    }

    /// Probability of each Pauli, `e_P / (1 + Σ)`, in X, Z, Y order.
    pub fn probabilities(&self, ctx: &S::Ctx) -> [S; 3] {
        let d = S::one(ctx).add(&self.sum());
        [self.e_x.div(&d), self.e_z.div(&d), self.e_y.div(&d)]
    }

    pub fn to_model(&self) -> LocationErrorModel<S> {
        LocationErrorModel::new(
            1,
            vec![(single(Pauli::X), self.e_x.clone()), (single(Pauli::Z), self.e_z.clone()), (single(Pauli::Y), self.e_y.clone())],
        )
        .expect("three distinct Paulis")
    }
}
