//! Stabilizer states carrying a syndrome-likelihood array.
//!
//! A state on `n` qubits is a generator matrix with `r` rows plus `2^r`
//! likelihoods. Bit `j` of a distribution index is the syndrome bit of row
//! `j` (0 for eigenvalue +1). Every operation is expressed as an index
//! relabeling, a convolution, or a fold over one index bit.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error_models::LocationErrorModel;
use crate::scalar::Scalar;
use crate::symplectic::{Gate, GeneratorMatrix, Pauli, PauliProduct, SymplecticError, MAX_QUBITS};

/// Practical limit on syndrome length; `2^24` entries is far above what the
/// gadgets need (16).
pub const MAX_ROWS: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LikelihoodError {
    #[error(transparent)]
    Symplectic(#[from] SymplecticError),
    #[error("model arity {model} does not match {qubits} target qubits")]
    ArityMismatch { model: usize, qubits: usize },
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("row operation needs two distinct rows, got {0} twice")]
    SameRow(usize),
    #[error("cannot project qubit {0}: the measured operator is not in the stabilizer group")]
    NotProjectable(usize),
    #[error("postselection left zero likelihood mass")]
    ZeroAcceptance,
    #[error("identity syndrome has zero likelihood; cannot normalize")]
    ZeroIdentityMass,
    #[error("target generators do not span the current stabilizer group")]
    SpanMismatch,
    #[error("state would exceed {MAX_ROWS} syndrome bits")]
    TooLarge,
}

/// Preparation/measurement basis: `Z0` is the +1 eigenstate of Z, `Xplus`
/// the +1 eigenstate of X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z0,
    Xplus,
}

impl Basis {
    pub fn pauli(self) -> Pauli {
        match self {
            Basis::Z0 => Pauli::Z,
            Basis::Xplus => Pauli::X,
        }
    }

    /// The error that flips an outcome in this basis.
    pub fn flip(self) -> Pauli {
        match self {
            Basis::Z0 => Pauli::X,
            Basis::Xplus => Pauli::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOp {
    /// Replace row `i` with `row_i · row_j`.
    AddRow(usize, usize),
    SwapRows(usize, usize),
}

#[derive(Debug, Clone)]
pub struct NoisyStabilizerState<S: Scalar> {
    q: GeneratorMatrix,
    dist: Vec<S>,
    /// Mass including every postselection-rejected branch: the product of
    /// `1 + Σ e` over all error locations applied so far.
    gross: S,
    ctx: S::Ctx,
}

impl<S: Scalar> NoisyStabilizerState<S> {
    /// The zero-qubit state with a single unit likelihood.
    pub fn empty(ctx: S::Ctx) -> Self {
        NoisyStabilizerState { q: GeneratorMatrix::empty(0), dist: vec![S::one(&ctx)], gross: S::one(&ctx), ctx }
    }

    pub fn from_parts(q: GeneratorMatrix, dist: Vec<S>, ctx: S::Ctx) -> Result<Self, LikelihoodError> {
        if dist.len() != 1usize << q.len() {
            return Err(LikelihoodError::RowOutOfRange { index: dist.len(), rows: q.len() });
        }
        let mut gross = S::zero(&ctx);
        for v in &dist {
            gross.add_assign(v);
        }
        Ok(NoisyStabilizerState { q, dist, gross, ctx })
    }

    /// Ideal (delta) state with the given generators.
    pub fn ideal(q: GeneratorMatrix, ctx: S::Ctx) -> Result<Self, LikelihoodError> {
        if q.len() > MAX_ROWS {
            return Err(LikelihoodError::TooLarge);
        }
        let mut dist = vec![S::zero(&ctx); 1 << q.len()];
        dist[0] = S::one(&ctx);
        Ok(NoisyStabilizerState { q, dist, gross: S::one(&ctx), ctx })
    }

    pub fn generators(&self) -> &GeneratorMatrix {
        &self.q
    }

    pub fn dist(&self) -> &[S] {
        &self.dist
    }

    pub fn ctx(&self) -> &S::Ctx {
        &self.ctx
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }

    pub fn rows(&self) -> usize {
        self.q.len()
    }

    pub fn add_qubit(&mut self, basis: Basis) -> Result<(), LikelihoodError> {
        let n = self.q.n();
        if n + 1 > MAX_QUBITS || self.q.len() + 1 > MAX_ROWS {
            return Err(LikelihoodError::TooLarge);
        }
        let mut rows: Vec<PauliProduct> = self.q.rows().iter().map(|r| r.extend(1)).collect();
        rows.push(PauliProduct::single(n + 1, n, basis.pauli())?);
        self.q = GeneratorMatrix::from_rows_unchecked(n + 1, rows);
        let zero = S::zero(&self.ctx);
        self.dist.resize(self.dist.len() * 2, zero);
        Ok(())
    }

    /// Tensor product; `other`'s qubits and rows follow this state's.
    pub fn tensor(&self, other: &Self) -> Result<Self, LikelihoodError> {
        if self.q.len() + other.q.len() > MAX_ROWS || self.n() + other.n() > MAX_QUBITS {
            return Err(LikelihoodError::TooLarge);
        }
        let extra = other.n();
        let mut rows: Vec<PauliProduct> = self.q.rows().iter().map(|r| r.extend(extra)).collect();
        let lift = PauliProduct::identity(self.n());
        rows.extend(other.q.rows().iter().map(|r| lift.tensor(r)));
        let q = GeneratorMatrix::from_rows_unchecked(self.n() + extra, rows);
        let mut dist = Vec::with_capacity(self.dist.len() * other.dist.len());
        for b in &other.dist {
            for a in &self.dist {
                dist.push(a.mul(b));
            }
        }
        Ok(NoisyStabilizerState { q, dist, gross: self.gross.mul(&other.gross), ctx: self.ctx.clone() })
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<(), LikelihoodError> {
        let mut flips = 0u64;
        let mut rows = Vec::with_capacity(self.q.len());
        for (i, r) in self.q.rows().iter().enumerate() {
            let (img, sign) = r.conjugate_by_gate(gate)?;
            if sign {
                flips |= 1 << i;
            }
            rows.push(img);
        }
        self.q = GeneratorMatrix::from_rows_unchecked(self.q.n(), rows);
        if flips != 0 {
            self.dist = xor_remap(&self.dist, flips as usize);
        }
        Ok(())
    }

    /// Applies every entry of `model` as its own location, so entries act
    /// independently instead of as exclusive alternatives.
    pub fn apply_each_entry(&mut self, model: &LocationErrorModel<S>, qubits: &[usize]) -> Result<(), LikelihoodError> {
        for (p, _) in model.entries() {
            self.apply_error_location(&model.restricted(p), qubits)?;
        }
        Ok(())
    }

    pub fn apply_error_location(&mut self, model: &LocationErrorModel<S>, qubits: &[usize]) -> Result<(), LikelihoodError> {
        if model.arity() != qubits.len() {
            return Err(LikelihoodError::ArityMismatch { model: model.arity(), qubits: qubits.len() });
        }
        let n = self.n();
        self.gross = self.gross.mul(&S::one(&self.ctx).add(&model.total(&self.ctx)));
        let mut grouped: Vec<(usize, S)> = Vec::new();
        for (p, e) in model.entries() {
            if e.is_zero() {
                continue;
            }
            let f = self.q.flip_pattern_unchecked(&p.embed(n, qubits)?) as usize;
            match grouped.iter_mut().find(|(g, _)| *g == f) {
                Some((_, acc)) => acc.add_assign(e),
                None => grouped.push((f, e.clone())),
            }
        }
        if grouped.is_empty() {
            return Ok(());
        }
        self.dist = convolve(&self.dist, &grouped);
        Ok(())
    }

    pub fn row_transform(&mut self, op: RowOp) -> Result<(), LikelihoodError> {
        let r = self.q.len();
        let (i, j) = match op {
            RowOp::AddRow(i, j) | RowOp::SwapRows(i, j) => (i, j),
        };
        for k in [i, j] {
            if k >= r {
                return Err(LikelihoodError::RowOutOfRange { index: k, rows: r });
            }
        }
        if i == j {
            return Err(LikelihoodError::SameRow(i));
        }
        let mut rows = self.q.rows().to_vec();
        let mut images: Vec<u64> = (0..r).map(|k| 1u64 << k).collect();
        let mut offset = 0u64;
        match op {
            RowOp::AddRow(i, j) => {
                let (prod, phase) = rows[i].hermitian_product_unchecked(&rows[j]);
                rows[i] = prod;
                images[i] |= 1 << j;
                if phase == 2 {
                    offset |= 1 << i;
                }
            }
            RowOp::SwapRows(i, j) => {
                rows.swap(i, j);
                images.swap(i, j);
            }
        }
        self.q = GeneratorMatrix::from_rows_unchecked(self.q.n(), rows);
        self.dist = affine_remap(&self.dist, &images, offset);
        Ok(())
    }

    /// Replaces the generators by `targets`, which must generate the same
    /// group up to signs. Syndromes are relabeled accordingly.
    pub fn rewrite_rows(&mut self, targets: &[PauliProduct]) -> Result<(), LikelihoodError> {
        if targets.len() != self.q.len() {
            return Err(LikelihoodError::SpanMismatch);
        }
        let mut images = Vec::with_capacity(targets.len());
        let mut offset = 0u64;
        for (j, t) in targets.iter().enumerate() {
            if t.n() != self.n() {
                return Err(SymplecticError::DimensionMismatch { left: self.n(), right: t.n() }.into());
            }
            let (mask, neg) = self.q.express(t).ok_or(LikelihoodError::SpanMismatch)?;
            images.push(mask);
            if neg {
                offset |= 1 << j;
            }
        }
        let q = GeneratorMatrix::new(self.n(), targets.to_vec()).map_err(|_| LikelihoodError::SpanMismatch)?;
        // images[j] is the set of old rows feeding new bit j; transpose it
        // into per-old-bit images of new indices.
        let r = targets.len();
        let mut cols = vec![0u64; r];
        for (j, m) in images.iter().enumerate() {
            for (i, c) in cols.iter_mut().enumerate() {
                if m >> i & 1 == 1 {
                    *c |= 1 << j;
                }
            }
        }
        self.dist = linear_remap(&self.dist, &cols, offset);
        self.q = q;
        Ok(())
    }

    /// Projects `qubit` onto the +1 eigenstate of `basis` and removes it.
    /// Later qubits shift down by one.
    pub fn project_qubit(&mut self, qubit: usize, basis: Basis) -> Result<(), LikelihoodError> {
        let n = self.n();
        let m = PauliProduct::single(n, qubit, basis.pauli())?;
        let mut rows = self.q.rows().to_vec();
        let r = rows.len();
        let anti: Vec<usize> = (0..r).filter(|&i| !rows[i].commutes_unchecked(&m)).collect();
        let pivot;
        let mut images: Vec<u64> = (0..r).map(|k| 1u64 << k).collect();
        let mut offset = 0u64;
        let case1 = !anti.is_empty();
        if case1 {
            pivot = anti[0];
            for &i in &anti[1..] {
                let (prod, phase) = rows[i].hermitian_product_unchecked(&rows[pivot]);
                rows[i] = prod;
                images[i] |= 1 << pivot;
                if phase == 2 {
                    offset |= 1 << i;
                }
            }
        } else {
            let (mask, neg) = self.q.express(&m).ok_or(LikelihoodError::NotProjectable(qubit))?;
            pivot = mask.trailing_zeros() as usize;
            rows[pivot] = m;
            images[pivot] = mask;
            if neg {
                offset |= 1 << pivot;
            }
        }
        // images[k] lists old bits feeding new bit k; build per-old-bit columns.
        let mut cols = vec![0u64; r];
        for (k, img) in images.iter().enumerate() {
            for (i, c) in cols.iter_mut().enumerate() {
                if img >> i & 1 == 1 {
                    *c |= 1 << k;
                }
            }
        }
        let remapped = if offset == 0 && images.iter().enumerate().all(|(k, &v)| v == 1 << k) {
            std::mem::take(&mut self.dist)
        } else {
            linear_remap(&self.dist, &cols, offset)
        };
        // Clear the measured qubit from every other row using M at +1.
        for (i, row) in rows.iter_mut().enumerate() {
            if i != pivot && row.get(qubit) != Pauli::I {
                *row = row.hermitian_product_unchecked(&m).0;
            }
        }
        self.dist = if case1 { fold_bit(&remapped, pivot) } else { select_bit_zero(&remapped, pivot) };
        rows.remove(pivot);
        let rows = rows.into_iter().map(|p| p.remove_qubit(qubit)).collect();
        self.q = GeneratorMatrix::from_rows_unchecked(n - 1, rows);
        if !case1 && self.dist.iter().all(|v| v.is_zero()) {
            return Err(LikelihoodError::ZeroAcceptance);
        }
        Ok(())
    }

    pub fn total_mass(&self) -> S {
        let mut acc = S::zero(&self.ctx);
        for v in &self.dist {
            acc.add_assign(v);
        }
        acc
    }

    pub fn normalize(&mut self) -> Result<(), LikelihoodError> {
        if self.dist[0].is_zero() {
            return Err(LikelihoodError::ZeroIdentityMass);
        }
        let d = self.dist[0].clone();
        for v in self.dist.iter_mut() {
            *v = v.div(&d);
        }
        self.dist[0] = S::one(&self.ctx);
        self.gross = self.gross.div(&d);
        Ok(())
    }

    /// Divides every entry by `d` (used when averaging raw distributions).
    pub fn scale_div(&mut self, d: &S) {
        for v in self.dist.iter_mut() {
            *v = v.div(d);
        }
        self.gross = self.gross.div(d);
    }

    /// Pointwise sum with a state over the same generators.
    pub fn add_dist(&mut self, other: &Self) -> Result<(), LikelihoodError> {
        if self.q.rows() != other.q.rows() {
            return Err(LikelihoodError::SpanMismatch);
        }
        for (a, b) in self.dist.iter_mut().zip(&other.dist) {
            a.add_assign(b);
        }
        self.gross.add_assign(&other.gross);
        Ok(())
    }

    /// Reorders syndrome bits: new bit `k` is old bit `perm[k]`.
    pub fn permute_bits(&self, perm: &[usize]) -> Vec<S> {
        let mut cols = vec![0u64; perm.len()];
        for (k, &i) in perm.iter().enumerate() {
            cols[i] = 1 << k;
        }
        linear_remap(&self.dist, &cols, 0)
    }

    /// Averages the distribution with its relabeling under `perm` (see
    /// [`Self::permute_bits`]); the gross mass is unchanged.
    pub fn symmetrize_bits(&mut self, perm: &[usize]) {
        let other = self.permute_bits(perm);
        let two = S::one(&self.ctx).add(&S::one(&self.ctx));
        for (a, b) in self.dist.iter_mut().zip(&other) {
            *a = a.add(b).div(&two);
        }
    }

    pub fn gross_mass(&self) -> &S {
        &self.gross
    }

    /// Generators as Pauli strings followed by nonzero entries by index.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for row in self.q.rows() {
            let _ = writeln!(out, "{row}");
        }
        let r = self.q.len();
        for (s, v) in self.dist.iter().enumerate() {
            if !v.is_zero() {
                let bits: String = (0..r).map(|j| if s >> j & 1 == 1 { '1' } else { '0' }).collect();
                let _ = writeln!(out, "{bits} {}", v.to_decimal());
            }
        }
        out
    }
}

fn xor_remap<S: Scalar>(dist: &[S], c: usize) -> Vec<S> {
    (0..dist.len()).map(|s| dist[s ^ c].clone()).collect()
}

/// `new[f(s)] = old[s]` with `f(s) = (⊕_{i ∈ s} cols[i]) ⊕ offset`.
fn linear_remap<S: Scalar>(dist: &[S], cols: &[u64], offset: u64) -> Vec<S> {
    let len = dist.len();
    let mut target = vec![0u32; len];
    for s in 1..len {
        let low = s.trailing_zeros() as usize;
        target[s] = target[s & (s - 1)] ^ cols[low] as u32;
    }
    let mut out: Vec<Option<S>> = vec![None; len];
    for (s, v) in dist.iter().enumerate() {
        out[(target[s] ^ offset as u32) as usize] = Some(v.clone());
    }
    out.into_iter().map(|v| v.expect("remap is a bijection")).collect()
}

/// `images[k]` is the mask of old bits feeding new bit `k`.
fn affine_remap<S: Scalar>(dist: &[S], images: &[u64], offset: u64) -> Vec<S> {
    let mut cols = vec![0u64; images.len()];
    for (k, img) in images.iter().enumerate() {
        for (i, c) in cols.iter_mut().enumerate() {
            if img >> i & 1 == 1 {
                *c |= 1 << k;
            }
        }
    }
    linear_remap(dist, &cols, offset)
}

fn convolve<S: Scalar>(dist: &[S], flips: &[(usize, S)]) -> Vec<S> {
    let mut out = dist.to_vec();
    for (f, e) in flips {
        for (s, o) in out.iter_mut().enumerate() {
            let src = &dist[s ^ f];
            if !src.is_zero() {
                o.add_assign(&e.mul(src));
            }
        }
    }
    out
}

/// Sums the two halves split on bit `b` and drops that bit.
fn fold_bit<S: Scalar>(dist: &[S], b: usize) -> Vec<S> {
    let half = dist.len() / 2;
    let low = (1usize << b) - 1;
    (0..half)
        .map(|s| {
            let i0 = (s & low) | ((s & !low) << 1);
            dist[i0].add(&dist[i0 | 1 << b])
        })
        .collect()
}

/// Keeps entries with bit `b` clear and drops that bit.
fn select_bit_zero<S: Scalar>(dist: &[S], b: usize) -> Vec<S> {
    let half = dist.len() / 2;
    let low = (1usize << b) - 1;
    (0..half).map(|s| dist[(s & low) | ((s & !low) << 1)].clone()).collect()
}

/// Qubit bookkeeping over a state whose qubits are removed by projection.
/// Wires are stable handles; indices shift as qubits disappear.
#[derive(Debug, Clone)]
pub struct Register<S: Scalar> {
    pub state: NoisyStabilizerState<S>,
    wires: Vec<usize>,
    next: usize,
}

pub type Wire = usize;

impl<S: Scalar> Register<S> {
    pub fn new(ctx: S::Ctx) -> Self {
        Register { state: NoisyStabilizerState::empty(ctx), wires: Vec::new(), next: 0 }
    }

    /// Wraps an existing state; its qubits get consecutive fresh wires.
    pub fn from_state(state: NoisyStabilizerState<S>) -> Self {
        let n = state.n();
        Register { state, wires: (0..n).collect(), next: n }
    }

    /// Tensors `other` onto the register, returning the wires of its qubits.
    pub fn attach(&mut self, other: &NoisyStabilizerState<S>) -> Result<Vec<Wire>, LikelihoodError> {
        self.state = self.state.tensor(other)?;
        let ws: Vec<Wire> = (self.next..self.next + other.n()).collect();
        self.next += other.n();
        self.wires.extend(&ws);
        Ok(ws)
    }

    pub fn add_qubit(&mut self, basis: Basis) -> Result<Wire, LikelihoodError> {
        self.state.add_qubit(basis)?;
        let w = self.next;
        self.next += 1;
        self.wires.push(w);
        Ok(w)
    }

    pub fn index(&self, w: Wire) -> usize {
        self.wires.iter().position(|&x| x == w).expect("wire is live")
    }

    pub fn indices(&self, ws: &[Wire]) -> Vec<usize> {
        ws.iter().map(|&w| self.index(w)).collect()
    }

    pub fn cnot(&mut self, c: Wire, t: Wire) -> Result<(), LikelihoodError> {
        let g = Gate::Cnot { control: self.index(c), target: self.index(t) };
        self.state.apply_gate(&g)
    }

    pub fn hadamard(&mut self, w: Wire) -> Result<(), LikelihoodError> {
        let g = Gate::Hadamard(self.index(w));
        self.state.apply_gate(&g)
    }

    pub fn error(&mut self, model: &LocationErrorModel<S>, ws: &[Wire]) -> Result<(), LikelihoodError> {
        let idx = self.indices(ws);
        self.state.apply_error_location(model, &idx)
    }

    pub fn error_each(&mut self, model: &LocationErrorModel<S>, ws: &[Wire]) -> Result<(), LikelihoodError> {
        let idx = self.indices(ws);
        self.state.apply_each_entry(model, &idx)
    }

    pub fn project(&mut self, w: Wire, basis: Basis) -> Result<(), LikelihoodError> {
        let i = self.index(w);
        self.state.project_qubit(i, basis)?;
        self.wires.remove(i);
        Ok(())
    }

    /// Pauli product on the live qubits from `(wire, Pauli)` factors.
    pub fn pauli(&self, factors: &[(Wire, Pauli)]) -> PauliProduct {
        let mut p = PauliProduct::identity(self.state.n());
        for &(w, f) in factors {
            let i = self.index(w);
            let (x, z) = f.bits();
            let (ox, oz) = p.get(i).bits();
            p.set(i, Pauli::from_bits(x ^ ox, z ^ oz));
        }
        p
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }
}
