//! Circuit representation and experiment-design generation: the
//! fiducial-sandwich circuits that tomograph each gate, the null operation,
//! and the instrument.

use crate::gateset::GateSet;
use crate::linalg::RMat;
use crate::ptm::{apply, effect_through, Effect, PauliState, ProcessMatrix};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// An ordered sequence of operation labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Circuit {
    pub layers: Vec<String>,
}

impl Circuit {
    pub fn new<S: Into<String>>(layers: Vec<S>) -> Self {
        Self { layers: layers.into_iter().map(Into::into).collect() }
    }

    pub fn empty() -> Self {
        Self { layers: Vec::new() }
    }

    /// Deterministic, injective string form: labels joined by `:`, or `{}`
    /// for the empty circuit.
    pub fn canonical_id(&self) -> String {
        if self.layers.is_empty() {
            "{}".to_string()
        } else {
            self.layers.join(":")
        }
    }

    pub fn from_id(id: &str) -> Self {
        if id == "{}" {
            Self::empty()
        } else {
            Self { layers: id.split(':').map(str::to_string).collect() }
        }
    }

    pub fn concat(&self, other: &Circuit) -> Circuit {
        let mut layers = self.layers.clone();
        layers.extend(other.layers.iter().cloned());
        Circuit { layers }
    }

    pub fn count_label(&self, label: &str) -> usize {
        self.layers.iter().filter(|l| *l == label).count()
    }
}

/// Preparation and measurement fiducial circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct FiducialSet {
    pub preps: Vec<Circuit>,
    pub meas: Vec<Circuit>,
}

/// The six standard single-qubit fiducials, used for both preparation and
/// measurement: empty, Gx, Gy, GxGx, GxGxGx, GyGyGy.
///
/// The empty fiducial is included so that a gate set with one instrument
/// yields the full 6x6 = 36 instrument-containing circuits.
pub fn default_fiducials() -> FiducialSet {
    let seqs: Vec<Vec<&str>> = vec![
        vec![],
        vec!["Gx"],
        vec!["Gy"],
        vec!["Gx", "Gx"],
        vec!["Gx", "Gx", "Gx"],
        vec!["Gy", "Gy", "Gy"],
    ];
    let circuits: Vec<Circuit> = seqs.into_iter().map(Circuit::new).collect();
    FiducialSet { preps: circuits.clone(), meas: circuits }
}

/// Controls how duplicate label sequences are merged across circuit
/// categories (null, per-gate sandwiches, instrument sandwiches).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupMode {
    /// Merge circuits with identical label sequences everywhere.
    #[default]
    Full,
    /// Merge only within each category, so e.g. a null circuit and a gate
    /// sandwich with the same labels are both counted.
    WithinCategory,
}

/// Raw circuit lists per category, before any outcome bookkeeping.
#[derive(Debug, Clone)]
pub struct CircuitCategories {
    pub null: Vec<Circuit>,
    pub gates: BTreeMap<String, Vec<Circuit>>,
    pub instruments: BTreeMap<String, Vec<Circuit>>,
}

/// Enumerate the fiducial-sandwich circuits `F_j F_k`, `F_j G F_k`, and
/// `F_j Q F_k`, deduplicated within each category.
pub fn enumerate_circuits(
    gate_labels: &[String],
    instrument_labels: &[String],
    fiducials: &FiducialSet,
) -> Result<CircuitCategories> {
    if gate_labels.is_empty() {
        return Err(Error::Validation("gate list is empty".into()));
    }
    for fid in fiducials.preps.iter().chain(fiducials.meas.iter()) {
        for label in instrument_labels {
            if fid.count_label(label) > 0 {
                return Err(Error::Validation(format!(
                    "fiducial {} contains instrument {label}",
                    fid.canonical_id()
                )));
            }
        }
    }
    let sandwich = |germ: &Circuit| -> Vec<Circuit> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for p in &fiducials.preps {
            for m in &fiducials.meas {
                let c = p.concat(germ).concat(m);
                if seen.insert(c.canonical_id()) {
                    out.push(c);
                }
            }
        }
        out
    };
    let null = sandwich(&Circuit::empty());
    let gates = gate_labels
        .iter()
        .map(|g| (g.clone(), sandwich(&Circuit::new(vec![g.clone()]))))
        .collect();
    let instruments = instrument_labels
        .iter()
        .map(|q| (q.clone(), sandwich(&Circuit::new(vec![q.clone()]))))
        .collect();
    Ok(CircuitCategories { null, gates, instruments })
}

/// A deduplicated circuit list with per-circuit outcome alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDesign {
    /// Ordered circuits: null first, then per-gate sandwiches, then
    /// instrument sandwiches.
    pub circuits: Vec<Circuit>,
    /// Outcome alphabet per canonical circuit id.
    pub outcomes: BTreeMap<String, Vec<String>>,
    /// Number of entries in `circuits` that contain an instrument.
    pub instrument_circuit_count: usize,
    /// Entry count under within-category dedup (differs from
    /// `circuits.len()` only when label sequences repeat across categories).
    pub category_count: usize,
}

impl ExperimentDesign {
    pub fn circuit_ids(&self) -> Vec<String> {
        self.circuits.iter().map(Circuit::canonical_id).collect()
    }

    pub fn instrument_circuit_ids(&self) -> Vec<String> {
        self.circuits
            .iter()
            .filter(|c| self.outcomes[&c.canonical_id()].iter().any(|o| o.contains(';')))
            .map(|c| c.canonical_id())
            .collect()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dto<'a> {
            circuits: Vec<String>,
            outcomes: &'a BTreeMap<String, Vec<String>>,
        }
        serde_json::to_string_pretty(&Dto { circuits: self.circuit_ids(), outcomes: &self.outcomes })
            .expect("design serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Dto {
            circuits: Vec<String>,
            outcomes: BTreeMap<String, Vec<String>>,
        }
        let dto: Dto =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("design JSON: {e}")))?;
        let circuits: Vec<Circuit> = dto.circuits.iter().map(|id| Circuit::from_id(id)).collect();
        for c in &circuits {
            if !dto.outcomes.contains_key(&c.canonical_id()) {
                return Err(Error::MissingData(format!(
                    "no outcome alphabet for circuit {}",
                    c.canonical_id()
                )));
            }
        }
        let instrument_circuit_count = circuits
            .iter()
            .filter(|c| dto.outcomes[&c.canonical_id()].iter().any(|o| o.contains(';')))
            .count();
        let category_count = circuits.len();
        Ok(Self { circuits, outcomes: dto.outcomes, instrument_circuit_count, category_count })
    }
}

/// The measured-effect and prepared-state frames induced by a fiducial set
/// on a gate set: `A` has one row per (measurement fiducial, POVM outcome),
/// `B` one column per preparation fiducial.
pub fn fiducial_frames(gs: &GateSet, fiducials: &FiducialSet) -> Result<(RMat, RMat)> {
    let d2 = gs.dim * gs.dim;
    let outcomes = gs.povm_outcomes();
    let n_rows = fiducials.meas.len() * outcomes.len();
    let mut a = RMat::zeros(n_rows, d2);
    for (k, fid) in fiducials.meas.iter().enumerate() {
        let map = circuit_map(gs, fid)?;
        for (o_idx, o) in outcomes.iter().enumerate() {
            let eff: &Effect = &gs.povm[o];
            let row = effect_through(eff, &map);
            for j in 0..d2 {
                a[(k * outcomes.len() + o_idx, j)] = row.vec[j];
            }
        }
    }
    let mut b = RMat::zeros(d2, fiducials.preps.len());
    for (j, fid) in fiducials.preps.iter().enumerate() {
        let map = circuit_map(gs, fid)?;
        let st: PauliState = apply(&map, &gs.rho)?;
        for i in 0..d2 {
            b[(i, j)] = st.vec[i];
        }
    }
    Ok((a, b))
}

/// Product of the gate PTMs of an instrument-free circuit.
pub fn circuit_map(gs: &GateSet, circuit: &Circuit) -> Result<ProcessMatrix> {
    let mut acc = ProcessMatrix::identity(gs.dim);
    for label in &circuit.layers {
        if gs.instruments.contains_key(label) {
            return Err(Error::Validation(format!(
                "circuit {} contains an instrument where a pure gate sequence was required",
                circuit.canonical_id()
            )));
        }
        acc = gs.gate(label)?.compose(&acc);
    }
    Ok(acc)
}

fn numerical_rank(m: &RMat, rel_tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Verify that the fiducials are informationally complete for `target`:
/// both frame matrices must have rank d^2.
pub fn check_completeness(target: &GateSet, fiducials: &FiducialSet) -> Result<()> {
    let d2 = target.dim * target.dim;
    let (a, b) = fiducial_frames(target, fiducials)?;
    if numerical_rank(&a, 1e-9) < d2 {
        return Err(Error::RankDeficient(format!(
            "measurement-fiducial frame A has rank {} < {d2}",
            numerical_rank(&a, 1e-9)
        )));
    }
    if numerical_rank(&b, 1e-9) < d2 {
        return Err(Error::RankDeficient(format!(
            "preparation-fiducial frame B has rank {} < {d2}",
            numerical_rank(&b, 1e-9)
        )));
    }
    Ok(())
}

/// Build the experiment design for `target` with the given fiducials.
///
/// Fails if the gate list is empty or the fiducials are not informationally
/// complete for the target.
pub fn build_design(
    target: &GateSet,
    fiducials: &FiducialSet,
    mode: DedupMode,
) -> Result<ExperimentDesign> {
    check_completeness(target, fiducials)?;
    let gate_labels: Vec<String> = target.gates.keys().cloned().collect();
    let instrument_labels: Vec<String> = target.instruments.keys().cloned().collect();
    let cats = enumerate_circuits(&gate_labels, &instrument_labels, fiducials)?;

    let category_count = cats.null.len()
        + cats.gates.values().map(Vec::len).sum::<usize>()
        + cats.instruments.values().map(Vec::len).sum::<usize>();

    let mut circuits = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut push = |c: &Circuit, circuits: &mut Vec<Circuit>| match mode {
        DedupMode::Full => {
            if seen.insert(c.canonical_id()) {
                circuits.push(c.clone());
            }
        }
        DedupMode::WithinCategory => circuits.push(c.clone()),
    };
    for c in &cats.null {
        push(c, &mut circuits);
    }
    for list in cats.gates.values() {
        for c in list {
            push(c, &mut circuits);
        }
    }
    for list in cats.instruments.values() {
        for c in list {
            push(c, &mut circuits);
        }
    }

    let povm_outcomes = target.povm_outcomes();
    let mut outcomes = BTreeMap::new();
    let mut instrument_circuit_count = 0;
    for c in &circuits {
        let inst: Vec<&String> = c
            .layers
            .iter()
            .filter(|l| target.instruments.contains_key(*l))
            .collect();
        let alphabet = match inst.len() {
            0 => povm_outcomes.clone(),
            1 => {
                instrument_circuit_count += 1;
                let m = target.instruments[inst[0]].outcomes();
                let mut v = Vec::with_capacity(m * povm_outcomes.len());
                for i in 0..m {
                    for o in &povm_outcomes {
                        v.push(format!("{i};{o}"));
                    }
                }
                v
            }
            _ => {
                return Err(Error::Validation(format!(
                    "circuit {} contains more than one instrument",
                    c.canonical_id()
                )))
            }
        };
        outcomes.insert(c.canonical_id(), alphabet);
    }
    // under within-category dedup the same id may be counted twice above
    if mode == DedupMode::Full {
        debug_assert_eq!(outcomes.len(), circuits.len());
    } else {
        instrument_circuit_count = circuits
            .iter()
            .filter(|c| c.layers.iter().any(|l| target.instruments.contains_key(l)))
            .map(|c| c.canonical_id())
            .collect::<BTreeSet<_>>()
            .len();
    }

    Ok(ExperimentDesign { circuits, outcomes, instrument_circuit_count, category_count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateset::target_gateset;
    use std::collections::HashSet;

    #[test]
    fn default_fiducials_shape() {
        let f = default_fiducials();
        assert_eq!(f.preps.len(), 6);
        assert_eq!(f.meas.len(), 6);
        assert!(f.preps.iter().any(|c| c.layers.is_empty()));
        assert_eq!(f.preps.iter().map(|c| c.layers.len()).max(), Some(3));
    }

    #[test]
    fn canonical_id_format() {
        assert_eq!(Circuit::empty().canonical_id(), "{}");
        assert_eq!(Circuit::new(vec!["Gx", "Q", "Gy"]).canonical_id(), "Gx:Q:Gy");
        let a = Circuit::new(vec!["Gx", "Gx"]);
        let b = Circuit::new(vec!["Gx", "Gx"]);
        assert_eq!(a.canonical_id(), b.canonical_id());
        assert_eq!(Circuit::from_id("Gx:Q:Gy"), Circuit::new(vec!["Gx", "Q", "Gy"]));
        assert_eq!(Circuit::from_id("{}"), Circuit::empty());
    }

    /// Independent oracle: enumerate every fiducial sandwich as a raw label
    /// list and count unique sequences with a plain HashSet.
    fn brute_force_counts() -> (usize, usize, usize) {
        let fids: Vec<Vec<&str>> = vec![
            vec![],
            vec!["Gx"],
            vec!["Gy"],
            vec!["Gx", "Gx"],
            vec!["Gx", "Gx", "Gx"],
            vec!["Gy", "Gy", "Gy"],
        ];
        let germs: Vec<Vec<&str>> = vec![vec![], vec!["Gi"], vec!["Gx"], vec!["Gy"], vec!["Q"]];
        let mut all: HashSet<Vec<&str>> = HashSet::new();
        let mut nulls: HashSet<Vec<&str>> = HashSet::new();
        let mut instruments: HashSet<Vec<&str>> = HashSet::new();
        for germ in &germs {
            for p in &fids {
                for m in &fids {
                    let mut seq = p.clone();
                    seq.extend(germ.iter().copied());
                    seq.extend(m.iter().copied());
                    if germ.is_empty() {
                        nulls.insert(seq.clone());
                    }
                    if germ == &vec!["Q"] {
                        instruments.insert(seq.clone());
                    }
                    all.insert(seq);
                }
            }
        }
        (nulls.len(), instruments.len(), all.len())
    }

    #[test]
    fn design_counts_match_brute_force_enumeration() {
        // exact label-sequence dedup reproduces the reported 128-circuit
        // experiment, 36 of them containing the instrument
        let (nulls, instruments, total) = brute_force_counts();
        assert_eq!(nulls, 24);
        assert_eq!(instruments, 36);
        assert_eq!(total, 128);

        let design = build_design(&target_gateset(), &default_fiducials(), DedupMode::Full).unwrap();
        assert_eq!(design.instrument_circuit_count, 36);
        assert_eq!(design.circuits.len(), 128);
        assert_eq!(design.instrument_circuit_ids().len(), 36);
    }

    #[test]
    fn within_category_mode_keeps_cross_category_duplicates() {
        let design =
            build_design(&target_gateset(), &default_fiducials(), DedupMode::WithinCategory)
                .unwrap();
        assert_eq!(design.instrument_circuit_count, 36);
        assert_eq!(design.circuits.len(), design.category_count);
        assert_eq!(design.circuits.len(), 156);
        // unique ids still collapse to the full-dedup design
        let unique: HashSet<String> = design.circuits.iter().map(|c| c.canonical_id()).collect();
        assert_eq!(unique.len(), 128);
    }

    #[test]
    fn build_is_idempotent() {
        let gs = target_gateset();
        let f = default_fiducials();
        let d1 = build_design(&gs, &f, DedupMode::Full).unwrap();
        let d2 = build_design(&gs, &f, DedupMode::Full).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn every_instrument_circuit_has_one_instrument() {
        let design = build_design(&target_gateset(), &default_fiducials(), DedupMode::Full).unwrap();
        for c in &design.circuits {
            assert!(c.count_label("Q") <= 1);
        }
        let with_q = design.circuits.iter().filter(|c| c.count_label("Q") == 1).count();
        assert_eq!(with_q, 36);
    }

    #[test]
    fn single_gate_empty_fiducial_layout() {
        // layout-only path: one gate, the empty fiducial
        let cats = enumerate_circuits(
            &["Gi".to_string()],
            &[],
            &FiducialSet { preps: vec![Circuit::empty()], meas: vec![Circuit::empty()] },
        )
        .unwrap();
        assert_eq!(cats.null, vec![Circuit::empty()]);
        assert_eq!(cats.gates["Gi"], vec![Circuit::new(vec!["Gi"])]);
    }

    #[test]
    fn empty_gate_list_rejected() {
        let err = enumerate_circuits(&[], &[], &default_fiducials());
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn rank_deficient_fiducials_rejected() {
        let gs = target_gateset();
        let thin = FiducialSet { preps: vec![Circuit::empty()], meas: vec![Circuit::empty()] };
        assert!(matches!(
            build_design(&gs, &thin, DedupMode::Full),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn default_fiducials_are_complete() {
        check_completeness(&target_gateset(), &default_fiducials()).unwrap();
    }

    #[test]
    fn design_json_roundtrip() {
        let design = build_design(&target_gateset(), &default_fiducials(), DedupMode::Full).unwrap();
        let text = design.to_json();
        let back = ExperimentDesign::from_json(&text).unwrap();
        assert_eq!(design.circuit_ids(), back.circuit_ids());
        assert_eq!(design.outcomes, back.outcomes);
        assert_eq!(back.instrument_circuit_count, 36);
    }

    #[test]
    fn outcome_strings_follow_wire_format() {
        let design = build_design(&target_gateset(), &default_fiducials(), DedupMode::Full).unwrap();
        assert_eq!(design.outcomes["{}"], vec!["0", "1"]);
        assert_eq!(design.outcomes["Q"], vec!["0;0", "0;1", "1;0", "1;1"]);
    }
}
