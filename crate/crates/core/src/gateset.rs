//! The gate set: state preparation, named gates, named instruments, and the
//! terminating POVM, plus its JSON wire format.

use crate::linalg::{RMat, RVec};
use crate::ptm::{
    rotation, target_z_instrument, Axis, Effect, PauliState, ProcessMatrix, QuantumInstrument,
    TOL_TP,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Conventional labels for the reference single-qubit gate set.
pub const IDLE: &str = "Gi";
pub const GATE_X: &str = "Gx";
pub const GATE_Y: &str = "Gy";
pub const INSTRUMENT: &str = "Q";

/// A complete gate set: everything needed to predict any circuit outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSet {
    pub dim: usize,
    pub rho: PauliState,
    pub gates: BTreeMap<String, ProcessMatrix>,
    pub instruments: BTreeMap<String, QuantumInstrument>,
    pub povm: BTreeMap<String, Effect>,
}

impl GateSet {
    /// Check the physicality contracts: POVM resolves the identity and all
    /// gates are TP, each within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let mut sum = RVec::zeros(self.dim * self.dim);
        for eff in self.povm.values() {
            sum += &eff.vec;
        }
        let ident = Effect::identity(self.dim);
        if (sum - &ident.vec).norm() > tol {
            return Err(Error::Validation(
                "POVM effects do not sum to the identity effect".into(),
            ));
        }
        for (label, gate) in &self.gates {
            if !gate.is_tp(tol) {
                return Err(Error::Validation(format!("gate {label} is not TP")));
            }
        }
        Ok(())
    }

    pub fn gate(&self, label: &str) -> Result<&ProcessMatrix> {
        self.gates
            .get(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn instrument(&self, label: &str) -> Result<&QuantumInstrument> {
        self.instruments
            .get(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Labels of all operations, gates first, then instruments.
    pub fn operation_labels(&self) -> Vec<String> {
        self.gates
            .keys()
            .chain(self.instruments.keys())
            .cloned()
            .collect()
    }

    /// POVM outcome labels in canonical order.
    pub fn povm_outcomes(&self) -> Vec<String> {
        self.povm.keys().cloned().collect()
    }
}

/// The reference single-qubit target gate set: preparation in `|0>`, an
/// idle gate, half-pi rotations about x and y, a z-basis instrument, and a
/// z-basis terminating measurement.
pub fn target_gateset() -> GateSet {
    let mut gates = BTreeMap::new();
    gates.insert(IDLE.to_string(), ProcessMatrix::identity(2));
    gates.insert(GATE_X.to_string(), rotation(Axis::X, std::f64::consts::FRAC_PI_2));
    gates.insert(GATE_Y.to_string(), rotation(Axis::Y, std::f64::consts::FRAC_PI_2));

    let mut instruments = BTreeMap::new();
    instruments.insert(INSTRUMENT.to_string(), target_z_instrument());

    let mut povm = BTreeMap::new();
    povm.insert("0".to_string(), Effect::from_operator(&prep_op(0)));
    povm.insert("1".to_string(), Effect::from_operator(&prep_op(1)));

    GateSet {
        dim: 2,
        rho: PauliState::basis_state(0, 2),
        gates,
        instruments,
        povm,
    }
}

fn prep_op(k: usize) -> crate::linalg::CMat {
    let mut m = crate::linalg::CMat::zeros(2, 2);
    m[(k, k)] = num_complex::Complex64::new(1.0, 0.0);
    m
}

#[derive(Serialize, Deserialize)]
struct GateSetDto {
    dim: usize,
    rho: Vec<f64>,
    povm: BTreeMap<String, Vec<f64>>,
    gates: BTreeMap<String, Vec<Vec<f64>>>,
    instruments: BTreeMap<String, Vec<Vec<Vec<f64>>>>,
}

fn mat_to_rows(m: &RMat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_mat(rows: &[Vec<f64>], d2: usize) -> Result<RMat> {
    if rows.len() != d2 || rows.iter().any(|r| r.len() != d2) {
        return Err(Error::Dimension(format!("matrix is not {d2}x{d2}")));
    }
    Ok(RMat::from_fn(d2, d2, |i, j| rows[i][j]))
}

impl GateSet {
    pub fn to_json(&self) -> String {
        let dto = GateSetDto {
            dim: self.dim,
            rho: self.rho.vec.iter().copied().collect(),
            povm: self
                .povm
                .iter()
                .map(|(k, e)| (k.clone(), e.vec.iter().copied().collect()))
                .collect(),
            gates: self
                .gates
                .iter()
                .map(|(k, g)| (k.clone(), mat_to_rows(&g.mat)))
                .collect(),
            instruments: self
                .instruments
                .iter()
                .map(|(k, q)| {
                    (
                        k.clone(),
                        q.branches.iter().map(|b| mat_to_rows(&b.mat)).collect(),
                    )
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dto).expect("gate set serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: GateSetDto = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("gate set JSON: {e}")))?;
        let d = dto.dim;
        let d2 = d * d;
        if dto.rho.len() != d2 {
            return Err(Error::Dimension(format!("rho has length {}, expected {d2}", dto.rho.len())));
        }
        let rho = PauliState::new(RVec::from_vec(dto.rho), d)?;
        let mut povm = BTreeMap::new();
        for (k, v) in dto.povm {
            if v.len() != d2 {
                return Err(Error::Dimension(format!("effect {k} has length {}", v.len())));
            }
            povm.insert(k, Effect::new(RVec::from_vec(v), d)?);
        }
        let mut gates = BTreeMap::new();
        for (k, rows) in dto.gates {
            gates.insert(k, ProcessMatrix::new(rows_to_mat(&rows, d2)?, d)?);
        }
        let mut instruments = BTreeMap::new();
        for (k, branches) in dto.instruments {
            let branches = branches
                .iter()
                .map(|rows| ProcessMatrix::new(rows_to_mat(rows, d2)?, d))
                .collect::<Result<Vec<_>>>()?;
            instruments.insert(k, QuantumInstrument::new(branches)?);
        }
        Ok(GateSet { dim: d, rho, gates, instruments, povm })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn target_gateset_is_physical() {
        let gs = target_gateset();
        gs.validate(TOL_TP).unwrap();
        assert!(gs.instruments[INSTRUMENT].sum_is_tp(1e-12));
        assert_abs_diff_eq!(gs.rho.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn json_roundtrip_preserves_everything() {
        let gs = target_gateset();
        let text = gs.to_json();
        let back = GateSet::from_json(&text).unwrap();
        assert_eq!(gs, back);
    }

    #[test]
    fn json_shape_errors_are_reported() {
        let bad = r#"{"dim": 2, "rho": [1.0, 0.0], "povm": {}, "gates": {}, "instruments": {}}"#;
        assert!(GateSet::from_json(bad).is_err());
    }

    #[test]
    fn unknown_label_lookup_fails() {
        let gs = target_gateset();
        assert!(matches!(gs.gate("Gz"), Err(Error::UnknownLabel(_))));
    }
}
