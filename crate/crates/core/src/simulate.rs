//! Exact outcome-distribution computation for circuits, including branching
//! at the instrument and context-dependent post-instrument gate errors, plus
//! multinomial sampling into datasets.

use crate::design::{Circuit, ExperimentDesign};
use crate::gateset::GateSet;
use crate::ptm::{apply, PauliState, ProcessMatrix, TOL_TP};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Probabilities below this are clipped to zero at sampling time; anything
/// lower signals a broken model and is an error.
pub const NEG_PROB_TOL: f64 = 1e-9;

/// Map from outcome string to probability.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutcomeDistribution {
    pub probs: BTreeMap<String, f64>,
}

impl OutcomeDistribution {
    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn get(&self, outcome: &str) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }
}

/// Outcome- and position-dependent gate substitutions after an instrument.
///
/// Position `m = 0` is the first gate after the instrument. Positions or
/// gates without a substitution fall back to the base gate.
#[derive(Debug, Clone, Default)]
pub struct ContextRule {
    pub instrument: String,
    subs: BTreeMap<(usize, usize, String), ProcessMatrix>,
}

impl ContextRule {
    pub fn new(instrument: impl Into<String>) -> Self {
        Self { instrument: instrument.into(), subs: BTreeMap::new() }
    }

    /// Register a substitution for (instrument outcome, position, gate).
    /// The replacement must be TP.
    pub fn insert(
        &mut self,
        outcome: usize,
        position: usize,
        gate: impl Into<String>,
        replacement: ProcessMatrix,
    ) -> Result<()> {
        if !replacement.is_tp(TOL_TP) {
            return Err(Error::Validation(format!(
                "context substitution for outcome {outcome}, position {position} is not TP"
            )));
        }
        self.subs.insert((outcome, position, gate.into()), replacement);
        Ok(())
    }

    pub fn substitution(&self, outcome: usize, position: usize, gate: &str) -> Option<&ProcessMatrix> {
        self.subs.get(&(outcome, position, gate.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.subs.is_empty()
    }
}

/// Exact outcome distribution of a circuit under a gate set.
///
/// The state is evolved through the layers; at the (single) instrument the
/// evolution branches into one unnormalized state per outcome, and context
/// rules may substitute the gates that follow, keyed by (branch outcome,
/// gates elapsed since the instrument).
pub fn circuit_probs(
    gs: &GateSet,
    circuit: &Circuit,
    rules: Option<&ContextRule>,
) -> Result<OutcomeDistribution> {
    // branch index None until the instrument fires
    struct BranchState {
        outcome: Option<usize>,
        position: usize,
        state: PauliState,
    }
    let mut branches = vec![BranchState { outcome: None, position: 0, state: gs.rho.clone() }];
    let mut fired: Option<&str> = None;
    for label in &circuit.layers {
        if let Some(inst) = gs.instruments.get(label) {
            if fired.is_some() {
                return Err(Error::Validation(format!(
                    "circuit {} contains more than one instrument",
                    circuit.canonical_id()
                )));
            }
            fired = Some(label);
            let mut next = Vec::with_capacity(inst.outcomes());
            for b in branches {
                for (i, q) in inst.branches.iter().enumerate() {
                    next.push(BranchState {
                        outcome: Some(i),
                        position: 0,
                        state: apply(q, &b.state)?,
                    });
                }
            }
            branches = next;
        } else {
            let base = gs.gate(label)?;
            let active_rule = match (rules, fired) {
                (Some(r), Some(f)) if r.instrument == f => Some(r),
                _ => None,
            };
            for b in branches.iter_mut() {
                let gate = match (b.outcome, active_rule) {
                    (Some(i), Some(r)) => r.substitution(i, b.position, label).unwrap_or(base),
                    _ => base,
                };
                b.state = apply(gate, &b.state)?;
                if b.outcome.is_some() {
                    b.position += 1;
                }
            }
        }
    }
    let mut probs = BTreeMap::new();
    for b in &branches {
        for (o, eff) in &gs.povm {
            let p = eff.probability(&b.state)?;
            if p < -NEG_PROB_TOL {
                return Err(Error::Numerical(format!(
                    "circuit {} produced probability {p:.3e}; the model is not physical",
                    circuit.canonical_id()
                )));
            }
            let key = match b.outcome {
                Some(i) => format!("{i};{o}"),
                None => o.clone(),
            };
            probs.insert(key, p);
        }
    }
    Ok(OutcomeDistribution { probs })
}

/// Multinomial sample of `n` shots from a distribution, reproducible per
/// seed. Small negative probabilities are clipped to zero and the
/// distribution renormalized before drawing.
pub fn sample(dist: &OutcomeDistribution, n: u64, seed: u64) -> Result<BTreeMap<String, f64>> {
    if n == 0 {
        return Err(Error::Validation("shot count must be at least 1".into()));
    }
    let mut clipped: Vec<(&String, f64)> = Vec::with_capacity(dist.probs.len());
    for (k, p) in &dist.probs {
        if *p < -NEG_PROB_TOL {
            return Err(Error::Numerical(format!("probability {p:.3e} below clipping tolerance")));
        }
        clipped.push((k, p.max(0.0)));
    }
    let total: f64 = clipped.iter().map(|(_, p)| p).sum();
    if total <= 0.0 {
        return Err(Error::Numerical("distribution has zero total probability".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<String, f64> = dist.probs.keys().map(|k| (k.clone(), 0.0)).collect();
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = clipped[clipped.len() - 1].0;
        for (k, p) in &clipped {
            acc += p;
            if u < acc {
                chosen = k;
                break;
            }
        }
        *counts.get_mut(chosen).unwrap() += 1.0;
    }
    Ok(counts)
}

/// Circuits paired with per-outcome counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub shots: u64,
    pub seed: Option<u64>,
    pub counts: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Dataset {
    pub fn circuit_counts(&self, id: &str) -> Result<&BTreeMap<String, f64>> {
        self.counts
            .get(id)
            .ok_or_else(|| Error::MissingData(format!("no data for circuit {id}")))
    }

    /// Observed frequencies for one circuit.
    pub fn frequencies(&self, id: &str) -> Result<BTreeMap<String, f64>> {
        let counts = self.circuit_counts(id)?;
        let total: f64 = counts.values().sum();
        if total <= 0.0 {
            return Err(Error::MissingData(format!("circuit {id} has zero total counts")));
        }
        Ok(counts.iter().map(|(k, v)| (k.clone(), v / total)).collect())
    }

    pub fn total_counts(&self, id: &str) -> f64 {
        self.counts.get(id).map(|m| m.values().sum()).unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dto<'a> {
            shots: u64,
            seed: Option<u64>,
            counts: &'a BTreeMap<String, BTreeMap<String, f64>>,
        }
        serde_json::to_string_pretty(&Dto { shots: self.shots, seed: self.seed, counts: &self.counts })
            .expect("dataset serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Dto {
            shots: u64,
            seed: Option<u64>,
            counts: BTreeMap<String, BTreeMap<String, f64>>,
        }
        let dto: Dto =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("dataset JSON: {e}")))?;
        Ok(Self { shots: dto.shots, seed: dto.seed, counts: dto.counts })
    }
}

/// Stable 64-bit FNV-1a hash used to derive independent per-circuit seeds
/// from (master seed, canonical circuit id); documented so datasets are
/// reproducible across platforms.
pub fn subseed(master: u64, circuit_id: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for byte in master.to_le_bytes().iter().chain(circuit_id.as_bytes()) {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Sample a dataset for every circuit in the design.
pub fn simulate_design(
    gs: &GateSet,
    design: &ExperimentDesign,
    shots: u64,
    seed: u64,
    rules: Option<&ContextRule>,
) -> Result<Dataset> {
    if shots == 0 {
        return Err(Error::Validation("shot count must be at least 1".into()));
    }
    let mut counts = BTreeMap::new();
    for circuit in &design.circuits {
        let id = circuit.canonical_id();
        if counts.contains_key(&id) {
            continue;
        }
        let dist = circuit_probs(gs, circuit, rules)?;
        let drawn = sample(&dist, shots, subseed(seed, &id))?;
        counts.insert(id, drawn);
    }
    Ok(Dataset { shots, seed: Some(seed), counts })
}

/// The infinite-shot limit: per-circuit counts equal to exact probabilities
/// (each circuit "sums to" one shot).
pub fn exact_dataset(
    gs: &GateSet,
    design: &ExperimentDesign,
    rules: Option<&ContextRule>,
) -> Result<Dataset> {
    let mut counts = BTreeMap::new();
    for circuit in &design.circuits {
        let id = circuit.canonical_id();
        if counts.contains_key(&id) {
            continue;
        }
        let dist = circuit_probs(gs, circuit, rules)?;
        counts.insert(id, dist.probs);
    }
    Ok(Dataset { shots: 1, seed: None, counts })
}
