//! Permanent-based cross-check of the operator-rewriting engine.
//!
//! Any circuit built from the elements in [`crate::elements`] acts on single
//! photons by a unitary matrix over the declared mode universe. Multi-photon
//! transition amplitudes then follow from matrix permanents of row/column
//! repeated submatrices:
//!
//! ⟨out|U|in⟩ = Per(U[out;in]) / √(∏ inⱼ! · ∏ outᵢ!)
//!
//! where U[out;in] repeats column j `in_j` times and row i `out_i` times.
//! This path never touches the sparse rewrite machinery, so agreement between
//! the two is a real consistency check, not a tautology. Permanents are
//! evaluated with Ryser's formula in Gray-code order, O(2ⁿ·n); a naive
//! permutation-sum doubles as the oracle's own cross-check for small n.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::elements::Element;
use crate::fock::{sqrt_factorial, FockBasisVector, FockError, ModeId, ModeSet, PureState};

/// Photon cap for permanent evaluation; well above the protocol's 4.
pub const PHOTON_CAP: u32 = 6;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("{photons} photons exceed the permanent cap of {cap}")]
    PhotonCap { photons: u32, cap: u32 },
    #[error("mode {0} is not part of the universe")]
    ModeOutsideUniverse(ModeId),
    #[error("composed mode matrix deviates from unitarity by {0:.3e}")]
    NotUnitary(f64),
    #[error("matrix dimension {rows}x{cols} does not match {modes} modes")]
    Dimension {
        rows: usize,
        cols: usize,
        modes: usize,
    },
}

/// The single-photon unitary of a circuit over its mode universe.
///
/// Row/column index order is the ModeId total order; column j holds the
/// image of the creation operator of mode j.
#[derive(Debug, Clone)]
pub struct ModeUnitary {
    modes: Vec<ModeId>,
    index: BTreeMap<ModeId, usize>,
    mat: Vec<Vec<Complex64>>,
}

impl ModeUnitary {
    /// Wrap an explicit matrix; verifies unitarity to 1e-12.
    pub fn from_matrix(modes: Vec<ModeId>, mat: Vec<Vec<Complex64>>) -> Result<Self, OracleError> {
        let n = modes.len();
        if mat.len() != n || mat.iter().any(|row| row.len() != n) {
            return Err(OracleError::Dimension {
                rows: mat.len(),
                cols: mat.first().map_or(0, |r| r.len()),
                modes: n,
            });
        }
        let index = modes
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        let u = ModeUnitary { modes, index, mat };
        let dev = u.unitarity_deviation();
        if dev > 1e-12 {
            return Err(OracleError::NotUnitary(dev));
        }
        Ok(u)
    }

    pub fn identity(universe: &ModeSet) -> Self {
        let modes: Vec<ModeId> = universe.iter().cloned().collect();
        let n = modes.len();
        let mut mat = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for (i, row) in mat.iter_mut().enumerate() {
            row[i] = Complex64::new(1.0, 0.0);
        }
        let index = modes
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, m)| (m, i))
            .collect();
        ModeUnitary { modes, index, mat }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn entry(&self, row: &ModeId, col: &ModeId) -> Complex64 {
        self.mat[self.index[row]][self.index[col]]
    }

    /// max |(U†U − I)_{jk}|.
    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..n {
                    acc += self.mat[r][j].conj() * self.mat[r][k];
                }
                let expect = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }
}

/// Compose the single-photon matrices of `elements` over `universe`, in
/// application order.
pub fn mode_unitary(elements: &[Element], universe: &ModeSet) -> Result<ModeUnitary, OracleError> {
    let mut u = ModeUnitary::identity(universe);
    for element in elements {
        let e = element_matrix(element, &u)?;
        u = multiply(&e, &u);
        let dev = u.unitarity_deviation();
        if dev > 1e-12 {
            return Err(OracleError::NotUnitary(dev));
        }
    }
    Ok(u)
}

fn multiply(a: &ModeUnitary, b: &ModeUnitary) -> ModeUnitary {
    let n = a.dim();
    let mut mat = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (row, a_row) in mat.iter_mut().zip(&a.mat) {
        for (k, aik) in a_row.iter().enumerate() {
            if aik.norm_sqr() == 0.0 {
                continue;
            }
            for (entry, b_entry) in row.iter_mut().zip(&b.mat[k]) {
                *entry += aik * b_entry;
            }
        }
    }
    ModeUnitary {
        modes: a.modes.clone(),
        index: a.index.clone(),
        mat,
    }
}

/// Universe-embedded single-photon matrix of one element: identity outside
/// the element's modes. Consumed↔produced column pairs are completed
/// unitarily (swap-back), which is inert because produced modes are always
/// unoccupied when the element fires.
fn element_matrix(element: &Element, template: &ModeUnitary) -> Result<ModeUnitary, OracleError> {
    let mut u = ModeUnitary::identity(&std::sync::Arc::new(
        template.modes.iter().cloned().collect(),
    ));
    let index = u.index.clone();
    let idx = move |mode: &ModeId| -> Result<usize, OracleError> {
        index
            .get(mode)
            .copied()
            .ok_or_else(|| OracleError::ModeOutsideUniverse(mode.clone()))
    };
    fn set_column(u: &mut ModeUnitary, col: usize, entries: &[(usize, Complex64)]) {
        for row in 0..u.mat.len() {
            u.mat[row][col] = Complex64::new(0.0, 0.0);
        }
        for &(row, value) in entries {
            u.mat[row][col] = value;
        }
    }

    let t = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let r = Complex64::new(0.0, FRAC_1_SQRT_2);
    let one = Complex64::new(1.0, 0.0);
    let i_phase = Complex64::new(0.0, 1.0);

    match element {
        Element::BeamSplitter {
            in_a,
            in_b,
            out_a,
            out_b,
        } => {
            for pol in [crate::fock::Polarization::H, crate::fock::Polarization::V] {
                let ia = idx(&ModeId::new(in_a, pol))?;
                let ib = idx(&ModeId::new(in_b, pol))?;
                let oa = idx(&ModeId::new(out_a, pol))?;
                let ob = idx(&ModeId::new(out_b, pol))?;
                set_column(&mut u, ia, &[(oa, t), (ob, r)]);
                set_column(&mut u, ib, &[(oa, r), (ob, t)]);
                set_column(&mut u, oa, &[(ia, t), (ib, r)]);
                set_column(&mut u, ob, &[(ia, r), (ib, t)]);
            }
        }
        Element::PolarizingBs {
            input,
            transmit,
            reflect,
        } => {
            let sh = idx(&ModeId::h(input))?;
            let sv = idx(&ModeId::v(input))?;
            let th = idx(&ModeId::h(transmit))?;
            let tv = idx(&ModeId::v(transmit))?;
            let rh = idx(&ModeId::h(reflect))?;
            let rv = idx(&ModeId::v(reflect))?;
            set_column(&mut u, sh, &[(th, one)]);
            set_column(&mut u, sv, &[(rv, i_phase)]);
            set_column(&mut u, th, &[(sh, one)]);
            set_column(&mut u, rv, &[(sv, i_phase)]);
            set_column(&mut u, tv, &[(rh, one)]);
            set_column(&mut u, rh, &[(tv, one)]);
        }
        Element::Rotation { spatial, basis } => {
            let m = basis.matrix();
            let h = idx(&ModeId::h(spatial))?;
            let v = idx(&ModeId::v(spatial))?;
            set_column(&mut u, h, &[(h, m[0][0]), (v, m[1][0])]);
            set_column(&mut u, v, &[(h, m[0][1]), (v, m[1][1])]);
        }
    }
    Ok(u)
}

/// Permanent by Ryser's formula with Gray-code subset iteration.
pub fn permanent_ryser(mat: &[Vec<Complex64>]) -> Complex64 {
    let n = mat.len();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    debug_assert!(mat.iter().all(|row| row.len() == n));
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray_prev = 0u32;
    for k in 1u32..(1u32 << n) {
        let gray = k ^ (k >> 1);
        let changed = gray ^ gray_prev;
        let j = changed.trailing_zeros() as usize;
        if gray & changed != 0 {
            for (i, sum) in row_sums.iter_mut().enumerate() {
                *sum += mat[i][j];
            }
        } else {
            for (i, sum) in row_sums.iter_mut().enumerate() {
                *sum -= mat[i][j];
            }
        }
        gray_prev = gray;
        let mut product = Complex64::new(1.0, 0.0);
        for sum in &row_sums {
            product *= sum;
        }
        if gray.count_ones().is_multiple_of(2) {
            total -= product;
        } else {
            total += product;
        }
    }
    if n.is_multiple_of(2) {
        -total
    } else {
        total
    }
}

/// Permanent by direct expansion over column choices. Exponentially slower
/// than Ryser; kept as an independent second route for small matrices.
pub fn permanent_naive(mat: &[Vec<Complex64>]) -> Complex64 {
    fn go(mat: &[Vec<Complex64>], row: usize, used: u32) -> Complex64 {
        let n = mat.len();
        if row == n {
            return Complex64::new(1.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for col in 0..n {
            if used & (1 << col) == 0 {
                acc += mat[row][col] * go(mat, row + 1, used | (1 << col));
            }
        }
        acc
    }
    go(mat, 0, 0)
}

/// Multi-photon transition amplitude between two configurations.
///
/// Returns 0 when photon numbers differ (orthogonal sectors, not an error).
pub fn amplitude_via_permanent(
    u: &ModeUnitary,
    in_config: &FockBasisVector,
    out_config: &FockBasisVector,
) -> Result<Complex64, OracleError> {
    let n_in = in_config.total_photons();
    let n_out = out_config.total_photons();
    if n_in != n_out {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if n_in > PHOTON_CAP {
        return Err(OracleError::PhotonCap {
            photons: n_in,
            cap: PHOTON_CAP,
        });
    }
    for (mode, _) in in_config.iter().chain(out_config.iter()) {
        if !u.index.contains_key(mode) {
            return Err(OracleError::ModeOutsideUniverse(mode.clone()));
        }
    }

    let cols: Vec<usize> = in_config
        .iter()
        .flat_map(|(m, n)| std::iter::repeat_n(u.index[m], usize::from(n)))
        .collect();
    let rows: Vec<usize> = out_config
        .iter()
        .flat_map(|(m, n)| std::iter::repeat_n(u.index[m], usize::from(n)))
        .collect();

    let sub: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| u.mat[r][c]).collect())
        .collect();

    let mut denom = 1.0;
    for (_, n) in in_config.iter() {
        denom *= sqrt_factorial(n);
    }
    for (_, n) in out_config.iter() {
        denom *= sqrt_factorial(n);
    }
    Ok(permanent_ryser(&sub) / denom)
}

/// Enumerate all configurations of `photons` photons over `modes`.
fn enumerate_configs(modes: &[ModeId], photons: u32) -> Vec<FockBasisVector> {
    fn go(
        modes: &[ModeId],
        remaining: u32,
        acc: &mut Vec<(ModeId, u8)>,
        out: &mut Vec<FockBasisVector>,
    ) {
        if modes.is_empty() {
            if remaining == 0 {
                out.push(FockBasisVector::from_occupations(acc.iter().cloned()));
            }
            return;
        }
        if modes.len() == 1 {
            if remaining <= u32::from(u8::MAX) {
                if remaining > 0 {
                    acc.push((modes[0].clone(), remaining as u8));
                }
                out.push(FockBasisVector::from_occupations(acc.iter().cloned()));
                if remaining > 0 {
                    acc.pop();
                }
            }
            return;
        }
        for k in 0..=remaining {
            if k > 0 {
                acc.push((modes[0].clone(), k as u8));
            }
            go(&modes[1..], remaining - k, acc, out);
            if k > 0 {
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut acc = Vec::new();
    go(modes, photons, &mut acc, &mut out);
    out
}

/// Evolve `input` through `elements` by summing permanent amplitudes over
/// every reachable output configuration. Independent of
/// [`crate::elements::apply_circuit`] except for the shared conventions.
pub fn oracle_state(input: &PureState, elements: &[Element]) -> Result<PureState, OracleError> {
    let u = mode_unitary(elements, input.modes())?;
    let mut out_terms: BTreeMap<FockBasisVector, Complex64> = BTreeMap::new();

    for (in_basis, in_amp) in input.terms() {
        let photons = in_basis.total_photons();
        if photons > PHOTON_CAP {
            return Err(OracleError::PhotonCap {
                photons,
                cap: PHOTON_CAP,
            });
        }
        // Only modes reachable from the occupied input columns can carry
        // photons; anything else would select a zero row in the permanent.
        let mut reachable: Vec<ModeId> = Vec::new();
        for mode in u.modes() {
            let row = u.index[mode];
            let hit = in_basis
                .iter()
                .any(|(m, _)| u.mat[row][u.index[m]].norm_sqr() > 0.0);
            if hit {
                reachable.push(mode.clone());
            }
        }
        for out_basis in enumerate_configs(&reachable, photons) {
            let amp = amplitude_via_permanent(&u, in_basis, &out_basis)?;
            if amp.norm_sqr() > 0.0 {
                *out_terms
                    .entry(out_basis)
                    .or_insert(Complex64::new(0.0, 0.0)) += in_amp * amp;
            }
        }
    }

    Ok(PureState::from_terms(input.modes().clone(), out_terms)?)
}
