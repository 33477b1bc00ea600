//! Block-wise independent fit of the computed Bell model.

use serde_json::{json, Value};
use thiserror::Error;

use crate::bellprep::ComputedBellModel;
use crate::error_models::{CosetErrorModel, CosetTable, PauliWeights, Spectator, NUM_COSETS};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("zero-syndrome likelihood is zero")]
    ZeroIdentity,
    #[error("model has {0} entries, expected 256")]
    BadLength(usize),
}

pub const NUM_SYNDROMES: usize = 256;

/// Bell syndrome produced by origin coset `c1` and destination coset `c2`.
pub fn pair_syndrome(table: &CosetTable, c1: usize, c2: usize) -> usize {
    let (p1, p2) = (table.pattern(c1) as usize, table.pattern(c2) as usize);
    let logical = (p1 >> 3) ^ (p2 >> 3);
    (p1 & 7) | (p2 & 7) << 3 | logical << 6
}

/// Minimum weight over the coset pairs giving each syndrome.
pub fn syndrome_weights(table: &CosetTable, weights: &PauliWeights) -> Vec<f64> {
    let cw = table.coset_weights(weights);
    let mut out = vec![f64::INFINITY; NUM_SYNDROMES];
    for c1 in 0..NUM_COSETS {
        for c2 in 0..NUM_COSETS {
            let s = pair_syndrome(table, c1, c2);
            out[s] = out[s].min(cw[c1] + cw[c2]);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PairAttribution<S> {
    /// `e[c1][c2]`, zero unless the pair is its syndrome's chosen pair.
    pub e_pairs: Vec<Vec<S>>,
    pub chosen: Vec<(usize, usize)>,
    pub syndrome_weight: Vec<f64>,
}

impl<S: Scalar> PairAttribution<S> {
    pub fn get(&self, c1: usize, c2: usize) -> &S {
        &self.e_pairs[c1][c2]
    }
}

/// Weight sums closer than this (relative) count as tied.
pub const WEIGHT_TIE_RTOL: f64 = 1e-9;

fn strictly_less(a: f64, b: f64) -> bool {
    a < b && !(b - a <= WEIGHT_TIE_RTOL * a.abs().max(b.abs()))
}

/// How ties between minimum-weight pairs of one syndrome are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Lexicographically first `(c1, c2)`.
    Canonical,
    /// Largest product of the single-block likelihoods `L(s(c1,0)) L(s(0,c2))`,
    /// then canonical.
    Likelihood,
    /// Likelihood shared equally among all tied pairs. Keeps the fit
    /// symmetric under block swap and Hadamard duality.
    #[default]
    Split,
}

/// Assigns each syndrome's likelihood to its minimum-weight coset pairs
/// under the default tie rule.
pub fn attribute_pairs<S: Scalar>(
    table: &CosetTable,
    dist: &[S],
    weights: &PauliWeights,
    ctx: &S::Ctx,
) -> Result<PairAttribution<S>, FitError> {
    attribute_pairs_with(table, dist, weights, ctx, TieBreak::default())
}

pub fn attribute_pairs_with<S: Scalar>(
    table: &CosetTable,
    dist: &[S],
    weights: &PauliWeights,
    ctx: &S::Ctx,
    tie: TieBreak,
) -> Result<PairAttribution<S>, FitError> {
    if dist.len() != NUM_SYNDROMES {
        return Err(FitError::BadLength(dist.len()));
    }
    let cw = table.coset_weights(weights);
    let single: Vec<(f64, f64)> = (0..NUM_COSETS)
        .map(|c| (dist[pair_syndrome(table, c, 0)].to_f64(), dist[pair_syndrome(table, 0, c)].to_f64()))
        .collect();
    let score = |c1: usize, c2: usize| match tie {
        TieBreak::Canonical | TieBreak::Split => 0.0,
        TieBreak::Likelihood => single[c1].0 * single[c2].1,
    };
    let mut chosen: Vec<Option<(usize, usize, f64)>> = vec![None; NUM_SYNDROMES];
    for c1 in 0..NUM_COSETS {
        for c2 in 0..NUM_COSETS {
            let s = pair_syndrome(table, c1, c2);
            let w = cw[c1] + cw[c2];
            let better = match chosen[s] {
                None => true,
                Some((b1, b2, bw)) => strictly_less(w, bw) || (!strictly_less(bw, w) && score(c1, c2) > score(b1, b2)),
            };
            if better {
                chosen[s] = Some((c1, c2, w));
            }
        }
    }
    let mut e_pairs = vec![vec![S::zero(ctx); NUM_COSETS]; NUM_COSETS];
    let mut pairs = Vec::with_capacity(NUM_SYNDROMES);
    let mut sw = Vec::with_capacity(NUM_SYNDROMES);
    for (s, ch) in chosen.iter().enumerate() {
        let (c1, c2, w) = ch.expect("every syndrome is reachable");
        if tie == TieBreak::Split {
            let tied: Vec<(usize, usize)> = (0..NUM_COSETS)
                .flat_map(|a| (0..NUM_COSETS).map(move |b| (a, b)))
                .filter(|&(a, b)| pair_syndrome(table, a, b) == s && !strictly_less(w, cw[a] + cw[b]))
                .collect();
            let k = S::from_ratio(ctx, &num_rational::BigRational::from_integer((tied.len() as i64).into()));
            for (a, b) in tied {
                e_pairs[a][b] = dist[s].div(&k);
            }
        } else {
            e_pairs[c1][c2] = dist[s].clone();
        }
        pairs.push((c1, c2));
        sw.push(w);
    }
    Ok(PairAttribution { e_pairs, chosen: pairs, syndrome_weight: sw })
}

#[derive(Debug, Clone)]
pub struct BellErrorModel<S> {
    pub origin: CosetErrorModel<S>,
    pub destination: CosetErrorModel<S>,
    pub quality_min: f64,
    pub quality_max: f64,
}

/// Pointwise minimal solution of the ratio constraints. Constraints whose
/// reference pair has zero likelihood are skipped.
pub fn fit_independent<S: Scalar>(
    table: &CosetTable,
    attr: &PairAttribution<S>,
    ctx: &S::Ctx,
) -> Result<(CosetErrorModel<S>, CosetErrorModel<S>), FitError> {
    let e0 = attr.get(0, 0).clone();
    if e0.is_zero() {
        return Err(FitError::ZeroIdentity);
    }
    let sw = &attr.syndrome_weight;
    let w = |c1: usize, c2: usize| sw[pair_syndrome(table, c1, c2)];
    let mut origin = vec![S::zero(ctx); NUM_COSETS];
    let mut dest = vec![S::zero(ctx); NUM_COSETS];
    for c1 in 1..NUM_COSETS {
        for c2 in 0..NUM_COSETS {
            let e = attr.get(c1, c2);
            let base = attr.get(0, c2);
            if e.is_zero() || base.is_zero() || !strictly_less(w(0, c2), w(c1, c2)) {
                continue;
            }
            origin[c1] = S::max_value(&origin[c1], &e.div(base));
        }
    }
    for c2 in 1..NUM_COSETS {
        for c1 in 0..NUM_COSETS {
            let e = attr.get(c1, c2);
            let base = attr.get(c1, 0);
            if e.is_zero() || base.is_zero() || !strictly_less(w(c1, 0), w(c1, c2)) {
                continue;
            }
            dest[c2] = S::max_value(&dest[c2], &e.div(base));
        }
    }
    origin[0] = S::one(ctx);
    dest[0] = S::one(ctx);
    Ok((
        CosetErrorModel { spectator: table.spectator, likelihoods: origin },
        CosetErrorModel { spectator: table.spectator, likelihoods: dest },
    ))
}

/// Syndrome distribution induced by independent block models, normalized
/// at the zero syndrome.
pub fn induced_distribution<S: Scalar>(
    table: &CosetTable,
    origin: &CosetErrorModel<S>,
    dest: &CosetErrorModel<S>,
    ctx: &S::Ctx,
) -> Vec<S> {
    let mut out = vec![S::zero(ctx); NUM_SYNDROMES];
    for c1 in 0..NUM_COSETS {
        if origin.likelihoods[c1].is_zero() {
            continue;
        }
        for c2 in 0..NUM_COSETS {
            let v = origin.likelihoods[c1].mul(&dest.likelihoods[c2]);
            out[pair_syndrome(table, c1, c2)].add_assign(&v);
        }
    }
    let d = out[0].clone();
    out.iter().map(|v| v.div(&d)).collect()
}

/// Min and max of `L_ind(s) / L(s)` over syndromes with `L(s) > 0`, both
/// normalized at the zero syndrome.
pub fn quality<S: Scalar>(
    table: &CosetTable,
    origin: &CosetErrorModel<S>,
    dest: &CosetErrorModel<S>,
    dist: &[S],
    ctx: &S::Ctx,
) -> (f64, f64) {
    let ind = induced_distribution(table, origin, dest, ctx);
    let d0 = dist[0].clone();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (s, l) in dist.iter().enumerate() {
        if l.is_zero() {
            continue;
        }
        let r = ind[s].div(&l.div(&d0)).to_f64();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

/// Attribution, fit and quality in one step.
pub fn fit_bell_model<S: Scalar>(
    model: &ComputedBellModel<S>,
    weights: &PauliWeights,
    ctx: &S::Ctx,
    tie: TieBreak,
) -> Result<BellErrorModel<S>, FitError> {
    let table = CosetTable::new(model.spectator);
    let attr = attribute_pairs_with(&table, &model.dist, weights, ctx, tie)?;
    let (origin, destination) = fit_independent(&table, &attr, ctx)?;
    let (quality_min, quality_max) = quality(&table, &origin, &destination, &model.dist, ctx);
    Ok(BellErrorModel { origin, destination, quality_min, quality_max })
}

impl<S: Scalar> BellErrorModel<S> {
    pub fn zero(spectator: Spectator, ctx: &S::Ctx) -> Self {
        BellErrorModel {
            origin: CosetErrorModel::zero(spectator, ctx),
            destination: CosetErrorModel::zero(spectator, ctx),
            quality_min: 1.0,
            quality_max: 1.0,
        }
    }

    pub fn to_document(&self, table: &CosetTable) -> Value {
        json!({
            "origin": self.origin.to_document(table),
            "destination": self.destination.to_document(table),
            "quality_min": self.quality_min,
            "quality_max": self.quality_max,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellprep::bell_generators;
    use crate::symplectic::{GeneratorMatrix, PauliProduct};

    fn brute_syndrome_weights(spec: Spectator, w: &PauliWeights) -> Vec<f64> {
        let g = GeneratorMatrix::new(8, bell_generators(spec)).unwrap();
        let mut out = vec![f64::INFINITY; 256];
        for x in 0..256u64 {
            for z in 0..256u64 {
                let p = PauliProduct::from_bits(8, x, z).unwrap();
                let s = g.flip_pattern(&p).unwrap() as usize;
                out[s] = out[s].min(w.weight(&p));
            }
        }
        out
    }

    #[test]
    fn pair_syndromes_match_flip_patterns() {
        for spec in [Spectator::Zero, Spectator::Plus] {
            let t = CosetTable::new(spec);
            let g = GeneratorMatrix::new(8, bell_generators(spec)).unwrap();
            let mut count = vec![0; 256];
            for c1 in 0..NUM_COSETS {
                for c2 in 0..NUM_COSETS {
                    let p = t.members(c1)[0].tensor(&t.members(c2)[0]);
                    let s = pair_syndrome(&t, c1, c2);
                    assert_eq!(g.flip_pattern(&p).unwrap() as usize, s);
                    count[s] += 1;
                }
            }
            assert!(count.iter().all(|&c| c == 4));
        }
    }

    #[test]
    fn syndrome_weights_match_exhaustive_search() {
        let w = PauliWeights { w_x: 1.3, w_z: 2.1, w_y: f64::INFINITY };
        for spec in [Spectator::Zero, Spectator::Plus] {
            let t = CosetTable::new(spec);
            let fast = syndrome_weights(&t, &w);
            for (a, b) in fast.iter().zip(brute_syndrome_weights(spec, &w)) {
                assert!((a - b).abs() < 1e-9);
            }
            assert_eq!(fast[0], 0.0);
            assert!(fast.iter().all(|v| v.is_finite()));
        }
        let t = CosetTable::new(Spectator::Zero);
        // an X on one origin qubit flips only ZZZZ on that block
        let sw = syndrome_weights(&t, &PauliWeights::UNIT);
        let g = GeneratorMatrix::new(8, bell_generators(Spectator::Zero)).unwrap();
        let x0 = g.flip_pattern(&"XIIIIIII".parse().unwrap()).unwrap() as usize;
        assert_eq!(sw[x0], 1.0);
    }

    fn product_model(t: &CosetTable, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut dist = vec![0.0; 256];
        for c1 in 0..NUM_COSETS {
            for c2 in 0..NUM_COSETS {
                dist[pair_syndrome(t, c1, c2)] += a[c1] * b[c2];
            }
        }
        let d = dist[0];
        dist.iter().map(|v| v / d).collect()
    }

    #[test]
    fn delta_model_fits_to_zero() {
        let t = CosetTable::new(Spectator::Plus);
        let mut dist = vec![0.0; 256];
        dist[0] = 1.0;
        let attr = attribute_pairs(&t, &dist, &PauliWeights::UNIT, &()).unwrap();
        for c1 in 0..NUM_COSETS {
            for c2 in 0..NUM_COSETS {
                assert_eq!(*attr.get(c1, c2), if (c1, c2) == (0, 0) { 1.0 } else { 0.0 });
            }
        }
        let (o, d) = fit_independent(&t, &attr, &()).unwrap();
        assert!(o.likelihoods[1..].iter().chain(&d.likelihoods[1..]).all(|&v| v == 0.0));
        assert_eq!(quality(&t, &o, &d, &dist, &()), (1.0, 1.0));
    }

    #[test]
    fn attribution_conserves_mass() {
        let t = CosetTable::new(Spectator::Zero);
        let dist: Vec<f64> = (0..256).map(|s| if s == 0 { 1.0 } else { 1e-3 / (1 + s % 7) as f64 }).collect();
        let attr = attribute_pairs(&t, &dist, &PauliWeights::UNIT, &()).unwrap();
        let mut back = vec![0.0; 256];
        for c1 in 0..NUM_COSETS {
            for c2 in 0..NUM_COSETS {
                back[pair_syndrome(&t, c1, c2)] += attr.get(c1, c2);
            }
        }
        assert_eq!(back, dist);
        // single-X origin syndrome goes to (coset of X0, identity)
        let x0 = t.coset(&"XIII".parse().unwrap());
        let s = pair_syndrome(&t, x0, 0);
        assert_eq!(attr.chosen[s], (x0, 0));
    }

    /// Per block-syndrome class, the lowest-index minimum-weight coset. A
    /// product model supported on these cosets has no colliding pairs.
    fn class_minimal(t: &CosetTable, w: &PauliWeights) -> Vec<bool> {
        let cw = t.coset_weights(w);
        let mut best: Vec<Option<usize>> = vec![None; 8];
        for c in 0..NUM_COSETS {
            let k = (t.pattern(c) & 7) as usize;
            if best[k].map_or(true, |b| cw[c] < cw[b]) {
                best[k] = Some(c);
            }
        }
        (0..NUM_COSETS).map(|c| best[(t.pattern(c) & 7) as usize] == Some(c)).collect()
    }

    #[test]
    fn independent_input_is_recovered() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let w = PauliWeights::UNIT;
        for spec in [Spectator::Zero, Spectator::Plus] {
            let t = CosetTable::new(spec);
            let keep = class_minimal(&t, &w);
            let mut draw = |c: usize| if c == 0 { 1.0 } else if keep[c] { rng.gen_range(1e-4..1e-2) } else { 0.0 };
            let a: Vec<f64> = (0..NUM_COSETS).map(&mut draw).collect();
            let b: Vec<f64> = (0..NUM_COSETS).map(&mut draw).collect();
            let dist = product_model(&t, &a, &b);
            let attr = attribute_pairs(&t, &dist, &w, &()).unwrap();
            let (o, d) = fit_independent(&t, &attr, &()).unwrap();
            for c in 0..NUM_COSETS {
                assert!((o.likelihoods[c] - a[c]).abs() <= 1e-12 * a[c], "{c}");
                assert!((d.likelihoods[c] - b[c]).abs() <= 1e-12 * b[c], "{c}");
            }
            let (lo, hi) = quality(&t, &o, &d, &dist, &());
            assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
            // refitting the induced model reproduces the fit
            let ind = induced_distribution(&t, &o, &d, &());
            let attr2 = attribute_pairs(&t, &ind, &w, &()).unwrap();
            let (o2, d2) = fit_independent(&t, &attr2, &()).unwrap();
            for c in 0..NUM_COSETS {
                assert!((o2.likelihoods[c] - o.likelihoods[c]).abs() <= 1e-12 * o.likelihoods[c]);
                assert!((d2.likelihoods[c] - d.likelihoods[c]).abs() <= 1e-12 * d.likelihoods[c]);
            }
        }
    }

    #[test]
    fn identity_reference_constraint_holds() {
        let t = CosetTable::new(Spectator::Zero);
        let dist: Vec<f64> = (0..256).map(|s| if s == 0 { 1.0 } else { 1e-3 * ((s * 37) % 11) as f64 / 11.0 }).collect();
        let attr = attribute_pairs(&t, &dist, &PauliWeights::UNIT, &()).unwrap();
        let (o, d) = fit_independent(&t, &attr, &()).unwrap();
        for c in 1..NUM_COSETS {
            assert!(o.likelihoods[c] >= *attr.get(c, 0));
            assert!(d.likelihoods[c] >= *attr.get(0, c));
        }
        let total: f64 = dist.iter().sum();
        let so: f64 = o.likelihoods.iter().sum();
        let sd: f64 = d.likelihoods.iter().sum();
        assert!(total <= so * sd * (1.0 + 1e-12));
    }
}
