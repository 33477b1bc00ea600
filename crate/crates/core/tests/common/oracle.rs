//! Exhaustive Pauli-insertion oracle for the likelihood engine.
//!
//! The oracle runs a dense real state vector: every combination of error
//! events is inserted explicitly, the network is simulated with
//! postselected projections, and the final syndrome is read off as the
//! signs of the engine's final generators.

use num_rational::BigRational;
use postsel::error_models::LocationErrorModel;
use postsel::likelihood::{Basis, LikelihoodError, NoisyStabilizerState};
use postsel::scalar::Scalar;
use postsel::symplectic::{Gate, PauliProduct};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_QUBITS: usize = 8;
const MAX_LOCATIONS: usize = 12;
const MAX_COMBINATIONS: usize = 6000;

#[derive(Debug, Clone)]
pub enum Op {
    Gate(Gate),
    /// Exclusive alternatives with rational likelihoods `num / 64`.
    Error { qubits: Vec<usize>, entries: Vec<(String, i64)> },
    Project(usize, Basis),
}

#[derive(Debug)]
pub struct Network {
    pub n: usize,
    pub bases: Vec<Basis>,
    pub ops: Vec<Op>,
}

pub fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let n = rng.gen_range(1..=MAX_QUBITS);
    let bases = (0..n).map(|_| if rng.gen_bool(0.5) { Basis::Z0 } else { Basis::Xplus }).collect();
    let mut live: Vec<usize> = (0..n).collect();
    let (mut ops, mut locations, mut combos) = (Vec::new(), 0, 1usize);
    for _ in 0..rng.gen_range(4..30) {
        let pick = |rng: &mut ChaCha8Rng, live: &[usize]| live[rng.gen_range(0..live.len())];
        match rng.gen_range(0..10) {
            0..=4 => {
                let a = pick(rng, &live);
                if live.len() > 1 && rng.gen_bool(0.7) {
                    let mut b = pick(rng, &live);
                    while b == a {
                        b = pick(rng, &live);
                    }
                    ops.push(Op::Gate(if rng.gen_bool(0.8) {
                        Gate::Cnot { control: a, target: b }
                    } else {
                        Gate::Swap(a, b)
                    }));
                } else {
                    ops.push(Op::Gate(Gate::Hadamard(a)));
                }
            }
            5..=8 if locations < MAX_LOCATIONS => {
                let arity = if live.len() > 1 && rng.gen_bool(0.4) { 2 } else { 1 };
                let mut qubits = vec![pick(rng, &live)];
                while qubits.len() < arity {
                    let b = pick(rng, &live);
                    if !qubits.contains(&b) {
                        qubits.push(b);
                    }
                }
                let mut k = rng.gen_range(1..=3);
                while k > 1 && combos * (k + 1) > MAX_COMBINATIONS {
                    k -= 1;
                }
                if combos * (k + 1) > MAX_COMBINATIONS {
                    continue;
                }
                let mut entries: Vec<(String, i64)> = Vec::new();
                while entries.len() < k {
                    let s: String = (0..arity).map(|_| ['I', 'X', 'Y', 'Z'][rng.gen_range(0..4)]).collect();
                    if s.chars().any(|c| c != 'I') && !entries.iter().any(|(e, _)| *e == s) {
                        entries.push((s, rng.gen_range(1..=24)));
                    }
                }
                combos *= k + 1;
                locations += 1;
                ops.push(Op::Error { qubits, entries });
            }
            9 if live.len() > 1 => {
                let i = rng.gen_range(0..live.len());
                let q = live.remove(i);
                ops.push(Op::Project(q, if rng.gen_bool(0.5) { Basis::Z0 } else { Basis::Xplus }));
            }
            _ => {}
        }
    }
    Network { n, bases, ops }
}

/// Engine run; indices are remapped as projected qubits disappear.
pub fn run_engine<S: Scalar>(
    net: &Network,
    ctx: S::Ctx,
    lift: impl Fn(i64) -> S,
) -> Result<(NoisyStabilizerState<S>, Vec<usize>), LikelihoodError> {
    let mut s = NoisyStabilizerState::<S>::empty(ctx);
    for &b in &net.bases {
        s.add_qubit(b)?;
    }
    let mut live: Vec<usize> = (0..net.n).collect();
    let at = |live: &[usize], q: usize| live.iter().position(|&l| l == q).expect("live qubit");
    for op in &net.ops {
        match op {
            Op::Gate(g) => {
                let g = match *g {
                    Gate::Cnot { control, target } => Gate::Cnot { control: at(&live, control), target: at(&live, target) },
                    Gate::Hadamard(q) => Gate::Hadamard(at(&live, q)),
                    Gate::Swap(a, b) => Gate::Swap(at(&live, a), at(&live, b)),
                };
                s.apply_gate(&g)?;
            }
            Op::Error { qubits, entries } => {
                let model = LocationErrorModel::new(
                    qubits.len(),
                    entries.iter().map(|(p, k)| (p.parse::<PauliProduct>().unwrap(), lift(*k))).collect(),
                )
                .unwrap();
                let idx: Vec<usize> = qubits.iter().map(|&q| at(&live, q)).collect();
                s.apply_error_location(&model, &idx)?;
            }
            Op::Project(q, b) => {
                s.project_qubit(at(&live, *q), *b)?;
                live.retain(|l| l != q);
            }
        }
    }
    Ok((s, live))
}

fn hadamard(v: &mut [f64], q: usize) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..v.len() {
        if i >> q & 1 == 0 {
            let j = i | 1 << q;
            let (a, b) = (v[i], v[j]);
            v[i] = h * (a + b);
            v[j] = h * (a - b);
        }
    }
}

fn permute(v: &mut Vec<f64>, f: impl Fn(usize) -> usize) {
    let mut out = vec![0.0; v.len()];
    for (i, a) in v.iter().enumerate() {
        out[f(i)] = *a;
    }
    *v = out;
}

/// Applies `X^x Z^z` per qubit; the `i` of each `Y` is a global phase.
fn apply_pauli(v: &mut Vec<f64>, x: usize, z: usize) {
    for (i, a) in v.iter_mut().enumerate() {
        if (i & z).count_ones() % 2 == 1 {
            *a = -*a;
        }
    }
    permute(v, |i| i ^ x);
}

fn masks(letters: &str, qubits: &[usize]) -> (usize, usize, u32) {
    let (mut x, mut z, mut ys) = (0, 0, 0);
    for (c, &q) in letters.chars().zip(qubits) {
        match c {
            'X' => x |= 1 << q,
            'Z' => z |= 1 << q,
            'Y' => {
                x |= 1 << q;
                z |= 1 << q;
                ys += 1;
            }
            _ => {}
        }
    }
    (x, z, ys)
}

fn expectation(v: &[f64], x: usize, z: usize, ys: u32) -> f64 {
    let mut w = v.to_vec();
    apply_pauli(&mut w, x, z);
    let ip: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    // Y = iXZ, so a row with Y count ≡ 2 (mod 4) picks up a sign.
    assert!(ys % 2 == 0, "real states have no odd-Y stabilizers");
    if ys % 4 == 2 {
        -ip
    } else {
        ip
    }
}

/// Unnormalized syndrome distribution by exhaustive insertion. `rows` are
/// the engine's final generators on the `live` qubits.
pub fn oracle(net: &Network, rows: &[PauliProduct], live: &[usize]) -> Vec<BigRational> {
    let locations: Vec<&Vec<(String, i64)>> =
        net.ops.iter().filter_map(|o| if let Op::Error { entries, .. } = o { Some(entries) } else { None }).collect();
    let radix: Vec<usize> = locations.iter().map(|e| e.len() + 1).collect();
    let total: usize = radix.iter().product();
    let mut dist = vec![BigRational::from_integer(0.into()); 1 << rows.len()];
    let row_masks: Vec<(usize, usize, u32)> = rows
        .iter()
        .map(|r| {
            let letters: String = (0..r.n()).map(|i| r.get(i).as_char()).collect();
            masks(&letters, live)
        })
        .collect();
    for combo in 0..total {
        let mut choice = Vec::with_capacity(radix.len());
        let mut c = combo;
        for r in &radix {
            choice.push(c % r);
            c /= r;
        }
        let mut weight = BigRational::from_integer(1.into());
        let mut v = vec![0.0; 1 << net.n];
        v[0] = 1.0;
        for (q, b) in net.bases.iter().enumerate() {
            if *b == Basis::Xplus {
                hadamard(&mut v, q);
            }
        }
        let mut loc = 0;
        for op in &net.ops {
            match op {
                Op::Gate(Gate::Hadamard(q)) => hadamard(&mut v, *q),
                Op::Gate(Gate::Cnot { control, target }) => {
                    let (c, t) = (*control, *target);
                    permute(&mut v, |i| if i >> c & 1 == 1 { i ^ 1 << t } else { i });
                }
                Op::Gate(Gate::Swap(a, b)) => {
                    let (a, b) = (*a, *b);
                    permute(&mut v, |i| {
                        let (ba, bb) = (i >> a & 1, i >> b & 1);
                        (i & !(1 << a) & !(1 << b)) | ba << b | bb << a
                    });
                }
                Op::Error { qubits, entries } => {
                    if choice[loc] > 0 {
                        let (p, k) = &entries[choice[loc] - 1];
                        let (x, z, _) = masks(p, qubits);
                        apply_pauli(&mut v, x, z);
                        weight *= BigRational::new((*k).into(), 64.into());
                    }
                    loc += 1;
                }
                Op::Project(q, b) => {
                    if *b == Basis::Xplus {
                        hadamard(&mut v, *q);
                    }
                    for (i, a) in v.iter_mut().enumerate() {
                        if i >> q & 1 == 1 {
                            *a = 0.0;
                        }
                    }
                    if *b == Basis::Xplus {
                        hadamard(&mut v, *q);
                    }
                }
            }
        }
        let norm: f64 = v.iter().map(|a| a * a).sum();
        if norm < 1e-9 {
            continue;
        }
        // Projections halve the norm either uniformly or not at all, so
        // the surviving norm is an exact power of two.
        let halvings = (-norm.log2()).round() as i32;
        assert!((norm - 0.5f64.powi(halvings)).abs() < 1e-9, "norm {norm}");
        let mut s = 0;
        for (j, &(x, z, ys)) in row_masks.iter().enumerate() {
            let e = expectation(&v, x, z, ys) / norm;
            assert!((e.abs() - 1.0).abs() < 1e-9, "row {j} expectation {e}");
            if e < 0.0 {
                s |= 1 << j;
            }
        }
        dist[s] += weight / BigRational::from_integer(num_bigint::BigInt::from(1) << halvings);
    }
    dist
}

pub fn normalized(d: &[BigRational]) -> Vec<BigRational> {
    let t: BigRational = d.iter().cloned().sum();
    d.iter().map(|v| v / &t).collect()
}

/// Compares `count` random networks on the rational and double backends.
/// Returns the number compared and the number rejected outright.
pub fn compare_random_networks(seed: u64, count: usize) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut compared, mut rejected) = (0, 0);
    for i in 0..count {
        let net = random_network(&mut rng);
        let exact = run_engine::<BigRational>(&net, (), |k| BigRational::new(k.into(), 64.into()));
        let float = run_engine::<f64>(&net, (), |k| k as f64 / 64.0);
        let (state, live) = match exact {
            Ok(r) => r,
            Err(LikelihoodError::ZeroAcceptance) => {
                if !matches!(float, Err(LikelihoodError::ZeroAcceptance)) {
                    return Err(format!("network {i}: backends disagree on rejection"));
                }
                rejected += 1;
                continue;
            }
            Err(e) => return Err(format!("network {i}: {e}")),
        };
        let (fstate, _) = float.map_err(|e| format!("network {i}: {e}"))?;
        let rows = state.generators().rows().to_vec();
        let want = normalized(&oracle(&net, &rows, &live));
        if normalized(state.dist()) != want {
            return Err(format!("network {i}: rational distribution differs\n{net:?}"));
        }
        let ftotal: f64 = fstate.dist().iter().sum();
        for (s, (f, w)) in fstate.dist().iter().zip(&want).enumerate() {
            let w = w.to_f64();
            let f = f / ftotal;
            if (f - w).abs() > 1e-12 * w.abs().max(1e-300) {
                return Err(format!("network {i} syndrome {s}: {f} vs {w}"));
            }
        }
        compared += 1;
    }
    Ok((compared, rejected))
}
