//! Binary symplectic algebra for Pauli products and stabilizer generator
//! matrices.
//!
//! A Pauli product on `n ≤ 64` qubits is stored as two bit masks `x` and `z`.
//! Bit `q` of `x` (`z`) is set when the factor on qubit `q` has an `X` (`Z`)
//! component, so `(1, 1)` is `Y`.
//!
//! Two sign conventions coexist and are kept apart by name:
//!
//! * [`PauliProduct::multiply`] works in the `X^x Z^z` normal form, where the
//!   only possible sign comes from commuting the `Z` part of the left factor
//!   past the `X` part of the right one.
//! * Stabilizer rows are Hermitian operators with `Y = iXZ` on every qubit.
//!   [`PauliProduct::hermitian_product`] and [`PauliProduct::conjugate_by_gate`]
//!   report phases in that convention, which is the one the likelihood engine
//!   needs when it relabels syndromes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymplecticError {
    #[error("dimension mismatch: {left} vs {right} qubits")]
    DimensionMismatch { left: usize, right: usize },
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("at most {MAX_QUBITS} qubits are supported, got {0}")]
    TooManyQubits(usize),
    #[error("invalid Pauli character {0:?}")]
    BadPauliChar(char),
    #[error("generator rows {0} and {1} anticommute")]
    RowsAnticommute(usize, usize),
    #[error("generator rows are linearly dependent")]
    DependentRows,
    #[error("a gate needs two distinct qubits, got {0} twice")]
    RepeatedQubit(usize),
}

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Z,
    Y,
}

impl Pauli {
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Z, Pauli::Y];

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Z => (false, true),
            Pauli::Y => (true, true),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Z => 'Z',
            Pauli::Y => 'Y',
        }
    }

    pub fn from_char(c: char) -> Result<Pauli, SymplecticError> {
        match c {
            'I' | '_' | '.' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Z' => Ok(Pauli::Z),
            'Y' => Ok(Pauli::Y),
            other => Err(SymplecticError::BadPauliChar(other)),
        }
    }
}

/// Clifford gates used by the preparation and gadget networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    Cnot { control: usize, target: usize },
    Hadamard(usize),
    Swap(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Hadamard(q) => vec![q],
            Gate::Swap(a, b) => vec![a, b],
        }
    }

    fn check(&self, n: usize) -> Result<(), SymplecticError> {
        let qs = self.qubits();
        for &q in &qs {
            if q >= n {
                return Err(SymplecticError::QubitOutOfRange { index: q, n });
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(SymplecticError::RepeatedQubit(qs[0]));
        }
        Ok(())
    }
}

#[inline]
fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Phase-free Pauli product on `n` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliProduct {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliProduct {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most 64 qubits");
        PauliProduct { n, x: 0, z: 0 }
    }

    /// Builds a product from raw masks; bits at or above `n` are rejected.
    pub fn from_bits(n: usize, x: u64, z: u64) -> Result<Self, SymplecticError> {
        if n > MAX_QUBITS {
            return Err(SymplecticError::TooManyQubits(n));
        }
        let m = mask(n);
        if x & !m != 0 || z & !m != 0 {
            let stray = (x | z) & !m;
            return Err(SymplecticError::QubitOutOfRange { index: stray.trailing_zeros() as usize, n });
        }
        Ok(PauliProduct { n, x, z })
    }

    pub fn single(n: usize, qubit: usize, p: Pauli) -> Result<Self, SymplecticError> {
        if qubit >= n {
            return Err(SymplecticError::QubitOutOfRange { index: qubit, n });
        }
        let mut out = PauliProduct::identity(n);
        out.set(qubit, p);
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) {
        let (x, z) = p.bits();
        let b = 1u64 << qubit;
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    fn same_n(&self, other: &Self) -> Result<(), SymplecticError> {
        if self.n != other.n {
            Err(SymplecticError::DimensionMismatch { left: self.n, right: other.n })
        } else {
            Ok(())
        }
    }

    /// Symplectic product `x_p·z_q + z_p·x_q` (mod 2) is zero.
    pub fn commutes(&self, other: &Self) -> Result<bool, SymplecticError> {
        self.same_n(other)?;
        Ok(self.commutes_unchecked(other))
    }

    #[inline]
    pub(crate) fn commutes_unchecked(&self, other: &Self) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Product in `X^x Z^z` normal form. The sign bit is `z_p·x_q mod 2`.
    pub fn multiply(&self, other: &Self) -> Result<(PauliProduct, bool), SymplecticError> {
        self.same_n(other)?;
        let sign = (self.z & other.x).count_ones() % 2 == 1;
        Ok((PauliProduct { n: self.n, x: self.x ^ other.x, z: self.z ^ other.z }, sign))
    }

    /// Product of Hermitian Pauli operators: `P·Q = i^phase R` with `R`
    /// Hermitian. The phase is returned mod 4; commuting factors give 0 or 2.
    pub fn hermitian_product(&self, other: &Self) -> Result<(PauliProduct, u8), SymplecticError> {
        self.same_n(other)?;
        Ok(self.hermitian_product_unchecked(other))
    }

    #[inline]
    pub(crate) fn hermitian_product_unchecked(&self, other: &Self) -> (PauliProduct, u8) {
        let (x1, z1, x2, z2) = (self.x, self.z, other.x, other.z);
        let y1 = x1 & z1;
        let xo1 = x1 & !z1;
        let zo1 = !x1 & z1;
        // Y·Z = iX, X·Y = iZ, Z·X = iY; the reversed orders give -i.
        let plus = (y1 & z2 & !x2) | (xo1 & z2 & x2) | (zo1 & x2 & !z2);
        let minus = (y1 & x2 & !z2) | (xo1 & z2 & !x2) | (zo1 & x2 & z2);
        let phase = (plus.count_ones() as i64 - minus.count_ones() as i64).rem_euclid(4) as u8;
        (PauliProduct { n: self.n, x: x1 ^ x2, z: z1 ^ z2 }, phase)
    }

    /// Conjugation `U P U†` by a Clifford gate. The flag is set when the image
    /// carries a `-1` sign (Hermitian convention).
    pub fn conjugate_by_gate(&self, gate: &Gate) -> Result<(PauliProduct, bool), SymplecticError> {
        gate.check(self.n)?;
        Ok(self.conjugate_unchecked(gate))
    }

    #[inline]
    pub(crate) fn conjugate_unchecked(&self, gate: &Gate) -> (PauliProduct, bool) {
        let mut out = *self;
        let bit = |m: u64, q: usize| m >> q & 1 == 1;
        match *gate {
            Gate::Cnot { control: c, target: t } => {
                let (xc, zc, xt, zt) = (bit(self.x, c), bit(self.z, c), bit(self.x, t), bit(self.z, t));
                let sign = xc && zt && (xt == zc);
                if xc {
                    out.x ^= 1 << t;
                }
                if zt {
                    out.z ^= 1 << c;
                }
                (out, sign)
            }
            Gate::Hadamard(q) => {
                let (xq, zq) = (bit(self.x, q), bit(self.z, q));
                out.set(q, Pauli::from_bits(zq, xq));
                (out, xq && zq)
            }
            Gate::Swap(a, b) => {
                let (pa, pb) = (self.get(a), self.get(b));
                out.set(a, pb);
                out.set(b, pa);
                (out, false)
            }
        }
    }

    /// Places a local product (on `qubits.len()` qubits) into an `n`-qubit
    /// frame; local qubit `k` goes to `qubits[k]`.
    pub fn embed(&self, n: usize, qubits: &[usize]) -> Result<PauliProduct, SymplecticError> {
        if self.n != qubits.len() {
            return Err(SymplecticError::DimensionMismatch { left: self.n, right: qubits.len() });
        }
        let mut out = PauliProduct::identity(n);
        for (k, &q) in qubits.iter().enumerate() {
            if q >= n {
                return Err(SymplecticError::QubitOutOfRange { index: q, n });
            }
            out.set(q, self.get(k));
        }
        Ok(out)
    }

    /// Removes qubit `q`, shifting higher qubits down by one.
    pub fn remove_qubit(&self, q: usize) -> PauliProduct {
        let low = (1u64 << q) - 1;
        let squeeze = |m: u64| (m & low) | ((m >> 1) & !low);
        PauliProduct { n: self.n - 1, x: squeeze(self.x), z: squeeze(self.z) }
    }

    /// Appends `extra` identity qubits.
    pub fn extend(&self, extra: usize) -> PauliProduct {
        PauliProduct { n: self.n + extra, x: self.x, z: self.z }
    }

    /// Tensor product `self ⊗ other`, with `other` on the higher qubits.
    pub fn tensor(&self, other: &PauliProduct) -> PauliProduct {
        let s = self.n;
        PauliProduct { n: s + other.n, x: self.x | other.x << s, z: self.z | other.z << s }
    }

    /// Sort key used for canonical orderings: `(x_bits, z_bits)` read as
    /// strings over qubit 0 first.
    pub fn lex_key(&self) -> (u64, u64) {
        (self.x.reverse_bits(), self.z.reverse_bits())
    }
}

impl fmt::Display for PauliProduct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", self.get(q).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliProduct {
    type Err = SymplecticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.trim().chars().collect();
        if chars.len() > MAX_QUBITS {
            return Err(SymplecticError::TooManyQubits(chars.len()));
        }
        let mut out = PauliProduct::identity(chars.len());
        for (q, c) in chars.into_iter().enumerate() {
            out.set(q, Pauli::from_char(c)?);
        }
        Ok(out)
    }
}

/// Ordered list of commuting, independent stabilizer generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    n: usize,
    rows: Vec<PauliProduct>,
}

impl GeneratorMatrix {
    pub fn empty(n: usize) -> Self {
        GeneratorMatrix { n, rows: Vec::new() }
    }

    pub fn new(n: usize, rows: Vec<PauliProduct>) -> Result<Self, SymplecticError> {
        if n > MAX_QUBITS {
            return Err(SymplecticError::TooManyQubits(n));
        }
        for r in &rows {
            if r.n != n {
                return Err(SymplecticError::DimensionMismatch { left: n, right: r.n });
            }
        }
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if !rows[i].commutes_unchecked(&rows[j]) {
                    return Err(SymplecticError::RowsAnticommute(i, j));
                }
            }
        }
        if gf2_rank(&rows) != rows.len() {
            return Err(SymplecticError::DependentRows);
        }
        Ok(GeneratorMatrix { n, rows })
    }

    pub fn from_strs(rows: &[&str]) -> Result<Self, SymplecticError> {
        let parsed: Vec<PauliProduct> = rows.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
        let n = parsed.first().map_or(0, |p| p.n);
        GeneratorMatrix::new(n, parsed)
    }

    /// Construction without the commutation/independence checks, for callers
    /// that maintain the invariants themselves.
    pub(crate) fn from_rows_unchecked(n: usize, rows: Vec<PauliProduct>) -> Self {
        GeneratorMatrix { n, rows }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[PauliProduct] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Bit `i` of the result is set iff `p` anticommutes with row `i`.
    pub fn flip_pattern(&self, p: &PauliProduct) -> Result<u64, SymplecticError> {
        if p.n != self.n {
            return Err(SymplecticError::DimensionMismatch { left: self.n, right: p.n });
        }
        Ok(self.flip_pattern_unchecked(p))
    }

    #[inline]
    pub(crate) fn flip_pattern_unchecked(&self, p: &PauliProduct) -> u64 {
        let mut out = 0u64;
        for (i, r) in self.rows.iter().enumerate() {
            if !r.commutes_unchecked(p) {
                out |= 1 << i;
            }
        }
        out
    }

    /// Finds the rows whose product equals `target` up to sign. Returns the
    /// row mask and whether the product is `-target` (Hermitian convention).
    pub fn express(&self, target: &PauliProduct) -> Option<(u64, bool)> {
        let mask = solve_combination(&self.rows, target)?;
        let mut acc = PauliProduct::identity(self.n);
        let mut phase = 0u8;
        for i in 0..self.rows.len() {
            if mask >> i & 1 == 1 {
                let (p, ph) = acc.hermitian_product_unchecked(&self.rows[i]);
                acc = p;
                phase = (phase + ph) % 4;
            }
        }
        debug_assert_eq!(acc, *target);
        debug_assert!(phase % 2 == 0, "product of commuting rows must be Hermitian");
        Some((mask, phase == 2))
    }

    /// True when both matrices generate the same group (ignoring signs).
    pub fn same_span(&self, other: &GeneratorMatrix) -> bool {
        self.n == other.n
            && self.rows.len() == other.rows.len()
            && other.rows.iter().all(|r| solve_combination(&self.rows, r).is_some())
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.to_string()).collect()
    }
}

fn as_u128(p: &PauliProduct) -> u128 {
    p.x as u128 | (p.z as u128) << 64
}

pub(crate) fn gf2_rank(rows: &[PauliProduct]) -> usize {
    let mut basis: Vec<u128> = Vec::new();
    for r in rows {
        let mut v = as_u128(r);
        for &b in &basis {
            v = v.min(v ^ b);
        }
        if v != 0 {
            basis.push(v);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

/// GF(2) solve: a mask of rows whose XOR equals `target`, if any.
pub(crate) fn solve_combination(rows: &[PauliProduct], target: &PauliProduct) -> Option<u64> {
    // Reduced basis keyed by leading bit; each entry remembers its row mask.
    let mut basis: Vec<(u128, u64)> = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let mut v = as_u128(r);
        let mut m = 1u64 << i;
        for &(b, bm) in &basis {
            if v ^ b < v {
                v ^= b;
                m ^= bm;
            }
        }
        if v != 0 {
            let pos = basis.partition_point(|&(b, _)| b > v);
            basis.insert(pos, (v, m));
        }
    }
    let mut v = as_u128(target);
    let mut m = 0u64;
    for &(b, bm) in &basis {
        if v ^ b < v {
            v ^= b;
            m ^= bm;
        }
    }
    (v == 0).then_some(m)
}
