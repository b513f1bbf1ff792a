//! States, effects, gates, and quantum instruments in the Pauli transfer
//! matrix picture, with physicality checks.
//!
//! All objects live in the orthonormal Hermitian operator basis whose first
//! element is `I/sqrt(d)`; for a qubit this is `{I, X, Y, Z}/sqrt(2)`.
//! States are length-d^2 real column vectors, effects are dual vectors, and
//! maps are d^2 x d^2 real matrices with entry `(k,l) = Tr(P_k G[P_l])`.

use crate::linalg::{
    herm_map, kron, min_herm_eigenvalue, psd_sqrt, real_log, to_complex, CMat, RMat, RVec,
};
use crate::{Error, Result};
use num_complex::Complex64;

/// Default tolerance for trace-preservation and Hermiticity tests.
pub const TOL_TP: f64 = 1e-8;
/// Default tolerance for complete-positivity tests (Choi minimum eigenvalue).
pub const TOL_CP: f64 = 1e-7;
/// Probabilities at or below this floor leave conditional states undefined.
pub const P_FLOOR: f64 = 1e-12;

/// Orthonormal Hermitian operator basis for dimension `d`, identity first.
///
/// For `d = 2` this is exactly `{I, sigma_x, sigma_y, sigma_z} / sqrt(2)`.
pub fn pauli_basis(d: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(d * d);
    let norm = 1.0 / (d as f64).sqrt();
    basis.push(CMat::identity(d, d) * Complex64::new(norm, 0.0));
    let inv_sqrt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sym = CMat::zeros(d, d);
            sym[(i, j)] = Complex64::new(1.0, 0.0);
            sym[(j, i)] = Complex64::new(1.0, 0.0);
            basis.push(sym * inv_sqrt2);
            let mut asym = CMat::zeros(d, d);
            asym[(i, j)] = Complex64::new(0.0, -1.0);
            asym[(j, i)] = Complex64::new(0.0, 1.0);
            basis.push(asym * inv_sqrt2);
        }
    }
    for l in 1..d {
        // diagonal traceless elements, Gell-Mann style
        let mut m = CMat::zeros(d, d);
        let scale = 1.0 / ((l * (l + 1)) as f64).sqrt();
        for j in 0..l {
            m[(j, j)] = Complex64::new(scale, 0.0);
        }
        m[(l, l)] = Complex64::new(-(l as f64) * scale, 0.0);
        basis.push(m);
    }
    debug_assert_eq!(basis.len(), d * d);
    basis
}

/// A quantum state as a real vector in the normalized Pauli basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliState {
    pub vec: RVec,
    pub dim: usize,
}

impl PauliState {
    pub fn new(vec: RVec, dim: usize) -> Result<Self> {
        if vec.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "state vector has length {}, expected {}",
                vec.len(),
                dim * dim
            )));
        }
        Ok(Self { vec, dim })
    }

    /// Computational basis state `|k><k|`.
    pub fn basis_state(k: usize, d: usize) -> Self {
        let mut dm = CMat::zeros(d, d);
        dm[(k, k)] = Complex64::new(1.0, 0.0);
        Self::from_density(&dm)
    }

    /// Expand a density matrix in the Pauli basis.
    pub fn from_density(dm: &CMat) -> Self {
        let d = dm.nrows();
        let basis = pauli_basis(d);
        let vec = RVec::from_iterator(d * d, basis.iter().map(|p| (p * dm).trace().re));
        Self { vec, dim: d }
    }

    /// Reconstruct the density matrix.
    pub fn density_matrix(&self) -> CMat {
        let basis = pauli_basis(self.dim);
        let mut dm = CMat::zeros(self.dim, self.dim);
        for (k, p) in basis.iter().enumerate() {
            dm += p * Complex64::new(self.vec[k], 0.0);
        }
        dm
    }

    pub fn trace(&self) -> f64 {
        self.vec[0] * (self.dim as f64).sqrt()
    }

    /// Minimum eigenvalue of the reconstructed density matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        min_herm_eigenvalue(&self.density_matrix())
    }

    /// Bloch-vector component along `sigma_z` (qubit only).
    pub fn bloch_z(&self) -> f64 {
        debug_assert_eq!(self.dim, 2);
        self.vec[3] / self.vec[0]
    }
}

/// A POVM effect as a real dual vector; probabilities are `<effect, state>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect {
    pub vec: RVec,
    pub dim: usize,
}

impl Effect {
    pub fn new(vec: RVec, dim: usize) -> Result<Self> {
        if vec.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "effect vector has length {}, expected {}",
                vec.len(),
                dim * dim
            )));
        }
        Ok(Self { vec, dim })
    }

    /// The identity effect, returning `Tr(rho)` on any state.
    pub fn identity(d: usize) -> Self {
        let mut vec = RVec::zeros(d * d);
        vec[0] = (d as f64).sqrt();
        Self { vec, dim: d }
    }

    pub fn from_operator(op: &CMat) -> Self {
        let st = PauliState::from_density(op);
        Self { vec: st.vec, dim: st.dim }
    }

    pub fn operator(&self) -> CMat {
        PauliState { vec: self.vec.clone(), dim: self.dim }.density_matrix()
    }

    /// Outcome probability on a state.
    pub fn probability(&self, state: &PauliState) -> Result<f64> {
        if self.dim != state.dim {
            return Err(Error::Dimension("effect/state dimension mismatch".into()));
        }
        Ok(self.vec.dot(&state.vec))
    }
}

/// A gate or instrument branch as a real `d^2 x d^2` Pauli transfer matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub mat: RMat,
    pub dim: usize,
}

impl ProcessMatrix {
    pub fn new(mat: RMat, dim: usize) -> Result<Self> {
        if mat.nrows() != dim * dim || mat.ncols() != dim * dim {
            return Err(Error::Dimension(format!(
                "process matrix is {}x{}, expected {0}x{0} with side {}",
                mat.nrows(),
                mat.ncols(),
                dim * dim
            )));
        }
        Ok(Self { mat, dim })
    }

    pub fn identity(d: usize) -> Self {
        Self { mat: RMat::identity(d * d, d * d), dim: d }
    }

    /// Composition `self after other`.
    pub fn compose(&self, other: &ProcessMatrix) -> ProcessMatrix {
        ProcessMatrix { mat: &self.mat * &other.mat, dim: self.dim }
    }

    /// Trace preserving iff the first row is `(1, 0, ..., 0)`.
    pub fn is_tp(&self, tol: f64) -> bool {
        let d2 = self.dim * self.dim;
        if (self.mat[(0, 0)] - 1.0).abs() > tol {
            return false;
        }
        (1..d2).all(|j| self.mat[(0, j)].abs() <= tol)
    }

    /// Completely positive iff the Choi matrix is PSD within `tol`.
    pub fn is_cp(&self, tol: f64) -> bool {
        choi_of(self).min_eigenvalue() >= -tol
    }

    /// Apply the map to a density matrix given as a complex operator.
    pub fn apply_density(&self, dm: &CMat) -> CMat {
        let st = PauliState::from_density(dm);
        let out = &self.mat * st.vec;
        PauliState { vec: out, dim: self.dim }.density_matrix()
    }

    /// Principal logarithm (the gate generator), when it exists.
    pub fn generator(&self) -> Result<RMat> {
        real_log(&self.mat)
    }
}

/// Apply a gate to a state.
pub fn apply(g: &ProcessMatrix, rho: &PauliState) -> Result<PauliState> {
    if g.dim != rho.dim {
        return Err(Error::Dimension("gate/state dimension mismatch".into()));
    }
    Ok(PauliState { vec: &g.mat * &rho.vec, dim: rho.dim })
}

/// Act with an effect after a gate, i.e. the dual action `E o G`.
pub fn effect_through(e: &Effect, g: &ProcessMatrix) -> Effect {
    Effect { vec: (e.vec.transpose() * &g.mat).transpose(), dim: e.dim }
}

/// Choi matrix of a square map, column-stacking convention
/// `J = sum_ij Phi(|i><j|) (x) |i><j|`.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    pub mat: CMat,
    pub dim: usize,
}

impl ChoiMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        min_herm_eigenvalue(&self.mat)
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }
}

/// Choi matrix of a process matrix: `J = sum_kl R_kl P_k (x) P_l^T`.
pub fn choi_of(g: &ProcessMatrix) -> ChoiMatrix {
    let d = g.dim;
    let basis = pauli_basis(d);
    let mut j = CMat::zeros(d * d, d * d);
    for k in 0..d * d {
        for l in 0..d * d {
            let r = g.mat[(k, l)];
            if r == 0.0 {
                continue;
            }
            j += kron(&basis[k], &basis[l].transpose()) * Complex64::new(r, 0.0);
        }
    }
    ChoiMatrix { mat: j, dim: d }
}

/// Inverse of [`choi_of`]: recover the process matrix from a Choi matrix.
pub fn ptm_of(j: &ChoiMatrix) -> ProcessMatrix {
    let d = j.dim;
    let basis = pauli_basis(d);
    let mut mat = RMat::zeros(d * d, d * d);
    for k in 0..d * d {
        for l in 0..d * d {
            mat[(k, l)] = (kron(&basis[k], &basis[l].transpose()) * &j.mat).trace().re;
        }
    }
    ProcessMatrix { mat, dim: d }
}

/// Pauli transfer matrix of a unitary conjugation `rho -> U rho U^dag`.
pub fn ptm_from_unitary(u: &CMat) -> Result<ProcessMatrix> {
    let d = u.nrows();
    if u.ncols() != d {
        return Err(Error::Dimension("unitary must be square".into()));
    }
    let dev = (u * u.adjoint() - CMat::identity(d, d)).norm();
    if dev > 1e-8 {
        return Err(Error::Validation(format!(
            "input is not unitary: ||U U^dag - I|| = {:.3e}",
            dev
        )));
    }
    let basis = pauli_basis(d);
    let mut mat = RMat::zeros(d * d, d * d);
    for l in 0..d * d {
        let conj = u * &basis[l] * u.adjoint();
        for k in 0..d * d {
            mat[(k, l)] = (&basis[k] * &conj).trace().re;
        }
    }
    Ok(ProcessMatrix { mat, dim: d })
}

/// Rotation axes for single-qubit gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

fn sigma(axis: Axis) -> CMat {
    match axis {
        Axis::X => CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        ),
        Axis::Y => CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
            ],
        ),
        Axis::Z => CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-1.0, 0.0),
            ],
        ),
    }
}

/// PTM of `exp(-i * angle * sigma_axis / 2)`.
pub fn rotation(axis: Axis, angle: f64) -> ProcessMatrix {
    let half = angle / 2.0;
    let u = CMat::identity(2, 2) * Complex64::new(half.cos(), 0.0)
        + sigma(axis) * Complex64::new(0.0, -half.sin());
    ptm_from_unitary(&u).expect("rotation unitary is unitary by construction")
}

/// Qubit depolarizing channel `diag(1, 1-p, 1-p, 1-p)`.
pub fn depolarizing(p: f64) -> ProcessMatrix {
    assert!(
        (0.0..=4.0 / 3.0).contains(&p),
        "depolarizing strength {p} outside CP range [0, 4/3]"
    );
    let mut mat = RMat::identity(4, 4);
    for i in 1..4 {
        mat[(i, i)] = 1.0 - p;
    }
    ProcessMatrix { mat, dim: 2 }
}

/// An ordered set of CP maps, one per measurement outcome, whose sum is TP.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumInstrument {
    pub branches: Vec<ProcessMatrix>,
}

impl QuantumInstrument {
    pub fn new(branches: Vec<ProcessMatrix>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Validation("instrument needs at least one branch".into()));
        }
        let d = branches[0].dim;
        if branches.iter().any(|b| b.dim != d) {
            return Err(Error::Dimension("instrument branches have mixed dimensions".into()));
        }
        Ok(Self { branches })
    }

    pub fn outcomes(&self) -> usize {
        self.branches.len()
    }

    pub fn dim(&self) -> usize {
        self.branches[0].dim
    }

    /// Sum of the branch maps; TP for a physical instrument.
    pub fn total_map(&self) -> ProcessMatrix {
        let mut mat = self.branches[0].mat.clone();
        for b in &self.branches[1..] {
            mat += &b.mat;
        }
        ProcessMatrix { mat, dim: self.dim() }
    }

    pub fn sum_is_tp(&self, tol: f64) -> bool {
        self.total_map().is_tp(tol)
    }

    /// Vertical concatenation of the branch matrices, branch 0 on top.
    pub fn stack(&self) -> RMat {
        let d2 = self.dim() * self.dim();
        let m = self.outcomes();
        let mut out = RMat::zeros(m * d2, d2);
        for (i, b) in self.branches.iter().enumerate() {
            out.view_mut((i * d2, 0), (d2, d2)).copy_from(&b.mat);
        }
        out
    }

    /// Inverse of [`QuantumInstrument::stack`].
    pub fn unstack(stacked: &RMat, outcomes: usize, dim: usize) -> Result<Self> {
        let d2 = dim * dim;
        if stacked.nrows() != outcomes * d2 || stacked.ncols() != d2 {
            return Err(Error::Dimension(format!(
                "stacked matrix is {}x{}, expected {}x{}",
                stacked.nrows(),
                stacked.ncols(),
                outcomes * d2,
                d2
            )));
        }
        let branches = (0..outcomes)
            .map(|i| ProcessMatrix {
                mat: stacked.view((i * d2, 0), (d2, d2)).into_owned(),
                dim,
            })
            .collect();
        Ok(Self { branches })
    }
}

/// Per-outcome probabilities and conditional output states of an instrument.
///
/// A branch whose probability falls at or below `P_FLOOR` has an undefined
/// conditional state.
pub fn instrument_apply(
    q: &QuantumInstrument,
    rho: &PauliState,
) -> Result<Vec<(f64, Option<PauliState>)>> {
    if q.dim() != rho.dim {
        return Err(Error::Dimension("instrument/state dimension mismatch".into()));
    }
    let sqrt_d = (rho.dim as f64).sqrt();
    q.branches
        .iter()
        .map(|b| {
            let out = apply(b, rho)?;
            let p = out.vec[0] * sqrt_d;
            if p > P_FLOOR {
                let cond = PauliState { vec: &out.vec / p, dim: out.dim };
                Ok((p, Some(cond)))
            } else {
                Ok((p, None))
            }
        })
        .collect()
}

/// Uhlmann fidelity between two states, `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
///
/// Inputs must be physical to within `tol` (unit trace, eigenvalues above
/// `-tol`); small negative eigenvalues are clipped before evaluation.
pub fn state_fidelity_tol(rho: &PauliState, sigma: &PauliState, tol: f64) -> Result<f64> {
    if rho.dim != sigma.dim {
        return Err(Error::Dimension("state dimension mismatch".into()));
    }
    let mut dms = Vec::with_capacity(2);
    for st in [rho, sigma] {
        if (st.trace() - 1.0).abs() > tol.max(1e-6) {
            return Err(Error::Validation(format!(
                "state trace {:.6} is not 1",
                st.trace()
            )));
        }
        let dm = st.density_matrix();
        if min_herm_eigenvalue(&dm) < -tol {
            return Err(Error::Validation(format!(
                "state has eigenvalue {:.3e} below -tol",
                min_herm_eigenvalue(&dm)
            )));
        }
        // clip and renormalize
        let clipped = herm_map(&dm, |v| v.max(0.0));
        let tr = clipped.trace().re;
        dms.push(clipped / Complex64::new(tr, 0.0));
    }
    let sr = psd_sqrt(&dms[0]);
    let inner = &sr * &dms[1] * &sr;
    let f = psd_sqrt(&inner).trace().re.powi(2);
    Ok(f.clamp(0.0, 1.0))
}

/// [`state_fidelity_tol`] at the default CP tolerance.
pub fn state_fidelity(rho: &PauliState, sigma: &PauliState) -> Result<f64> {
    state_fidelity_tol(rho, sigma, TOL_CP)
}

/// Helper: PTM of the map `rho -> Tr(P rho) P` for a projector-like operator.
pub fn measure_and_prepare(kraus_target: &CMat) -> ProcessMatrix {
    let d = kraus_target.nrows();
    let st = PauliState::from_density(kraus_target);
    let eff = Effect::from_operator(kraus_target);
    let mut mat = RMat::zeros(d * d, d * d);
    for k in 0..d * d {
        for l in 0..d * d {
            mat[(k, l)] = st.vec[k] * eff.vec[l];
        }
    }
    ProcessMatrix { mat, dim: d }
}

/// The two-outcome target instrument for a z-basis mid-circuit measurement:
/// branch `k` is `rho -> Tr(P_k rho) P_k` with `P_k = (I + (-1)^k Z)/2`.
pub fn target_z_instrument() -> QuantumInstrument {
    let p0 = (CMat::identity(2, 2) + sigma(Axis::Z)) * Complex64::new(0.5, 0.0);
    let p1 = (CMat::identity(2, 2) - sigma(Axis::Z)) * Complex64::new(0.5, 0.0);
    QuantumInstrument {
        branches: vec![measure_and_prepare(&p0), measure_and_prepare(&p1)],
    }
}

/// Superoperator action `Phi(X)` on an arbitrary complex operator, computed
/// by expanding `X` in the Pauli basis (valid for Hermiticity-preserving
/// maps extended linearly).
pub fn apply_to_operator(g: &ProcessMatrix, x: &CMat) -> CMat {
    let d = g.dim;
    let basis = pauli_basis(d);
    // complex expansion coefficients of X
    let coeffs: Vec<Complex64> = basis.iter().map(|p| (p * x).trace()).collect();
    let mut out = CMat::zeros(d, d);
    for k in 0..d * d {
        let mut ck = Complex64::new(0.0, 0.0);
        for l in 0..d * d {
            ck += Complex64::new(g.mat[(k, l)], 0.0) * coeffs[l];
        }
        out += &basis[k] * ck;
    }
    out
}

pub fn sigma_matrix(axis: Axis) -> CMat {
    sigma(axis)
}
