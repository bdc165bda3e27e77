//! Spin-dependent collision Hamiltonian on the zero-magnetization sector,
//! and the one-axis-twisting generator used as a reference curve.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::basis::{max_atom_number, occupations, sector_dimension, ModelParams};
use crate::error::{Error, Result};

/// Real symmetric tridiagonal operator.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalOperator {
    diagonal: Vec<f64>,
    off_diagonal: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diagonal: Vec<f64>, off_diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::InvalidParameter("operator dimension must be positive".into()));
        }
        if off_diagonal.len() + 1 != diagonal.len() {
            return Err(Error::DimensionMismatch {
                expected: diagonal.len() - 1,
                actual: off_diagonal.len(),
            });
        }
        Ok(Self { diagonal, off_diagonal })
    }

    pub fn zeros(dimension: usize) -> Result<Self> {
        Self::new(vec![0.0; dimension], vec![0.0; dimension.saturating_sub(1)])
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.off_diagonal
    }

    /// Matrix element `<row|H|col>`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        match row.abs_diff(col) {
            0 => self.diagonal[row],
            1 => self.off_diagonal[row.min(col)],
            _ => 0.0,
        }
    }

    /// Mutable access for fault-injection fixtures.
    pub fn diagonal_mut(&mut self) -> &mut [f64] {
        &mut self.diagonal
    }

    pub fn off_diagonal_mut(&mut self) -> &mut [f64] {
        &mut self.off_diagonal
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            diagonal: self.diagonal.iter().map(|x| x * factor).collect(),
            off_diagonal: self.off_diagonal.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn norm_bound(&self) -> f64 {
        crate::eigen::tridiagonal_norm(&self.diagonal, &self.off_diagonal)
    }

    /// `out = H x`.
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        let d = self.dimension();
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), d);
        if d == 1 {
            out[0] = x[0] * self.diagonal[0];
            return;
        }
        out[0] = x[0] * self.diagonal[0] + x[1] * self.off_diagonal[0];
        for i in 1..d - 1 {
            out[i] = x[i - 1] * self.off_diagonal[i - 1] + x[i] * self.diagonal[i] + x[i + 1] * self.off_diagonal[i];
        }
        out[d - 1] = x[d - 2] * self.off_diagonal[d - 2] + x[d - 1] * self.diagonal[d - 1];
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// `<x|H|x>` (real for this symmetric operator).
    pub fn expectation(&self, x: &[Complex64]) -> Result<f64> {
        let hx = self.apply(x)?;
        Ok(x.iter().zip(&hx).map(|(a, b)| (a.conj() * b).re).sum())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Debug dump: `index,diagonal,off_diagonal`, with an empty final
    /// off-diagonal cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,diagonal,off_diagonal\n");
        for (i, d) in self.diagonal.iter().enumerate() {
            match self.off_diagonal.get(i) {
                Some(e) => writeln!(out, "{i},{d:.16e},{e:.16e}"),
                None => writeln!(out, "{i},{d:.16e},"),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// `lambda' (L^2 - 2N)` on the basis `|N-2n, n, n>`, guarded by the
/// `SPINOR_SQUEEZE_MAX_N` limit.
pub fn build_spin_hamiltonian(params: &ModelParams) -> Result<TridiagonalOperator> {
    build_spin_hamiltonian_with_limit(params, max_atom_number())
}

pub fn build_spin_hamiltonian_with_limit(params: &ModelParams, max_atoms: usize) -> Result<TridiagonalOperator> {
    params.validate()?;
    let n_atoms = params.atom_count;
    if n_atoms > max_atoms {
        return Err(Error::TooLarge {
            n: n_atoms,
            max: max_atoms,
        });
    }
    let lambda = params.lambda_a_prime;
    let dim = sector_dimension(n_atoms);
    let nf = n_atoms as f64;

    // On L_z = 0, L^2 = L_- L_+ with L_+ = sqrt2 (a_{+1}^dag a_0 + a_0^dag a_{-1}):
    //   L_- L_+ = 2 [ n_0 (n_{+1} + 1) + n_{-1} (n_0 + 1)
    //               + a_{+1}^dag a_{-1}^dag a_0 a_0 + h.c. ]
    let diagonal = (0..dim)
        .map(|pairs| {
            let (n0, np, nm) = occupations(n_atoms, pairs);
            let (n0, np, nm) = (n0 as f64, np as f64, nm as f64);
            lambda * (2.0 * (n0 * (np + 1.0) + nm * (n0 + 1.0)) - 2.0 * nf)
        })
        .collect();
    let off_diagonal = (0..dim - 1)
        .map(|pairs| {
            let n0 = (n_atoms - 2 * pairs) as f64;
            lambda * 2.0 * (pairs as f64 + 1.0) * (n0 * (n0 - 1.0)).sqrt()
        })
        .collect();
    TridiagonalOperator::new(diagonal, off_diagonal)
}

/// `H + p L_z` restricted to the sector of an `n_atoms` system.
pub fn add_linear_zeeman(hamiltonian: &TridiagonalOperator, p: f64, n_atoms: usize) -> Result<TridiagonalOperator> {
    hamiltonian.check_len(sector_dimension(n_atoms))?;
    let mut out = hamiltonian.clone();
    for (pairs, d) in out.diagonal.iter_mut().enumerate() {
        let (_, n_plus, n_minus) = occupations(n_atoms, pairs);
        *d += p * (n_plus as f64 - n_minus as f64);
    }
    Ok(out)
}

/// `4 lambda' (J^x)^2` for a collective spin `J = N/2`.
///
/// Index `k` labels `J^z = J - k`, so `k = 0` is every atom in `m_f = 0`.
/// `(J^x)^2` only couples `k` to `k` and `k +- 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeOperator {
    n_atoms: usize,
    diagonal: Vec<f64>,
    /// Coupling between `k` and `k + 2`.
    second_off_diagonal: Vec<f64>,
}

impl DickeOperator {
    pub fn atom_count(&self) -> usize {
        self.n_atoms
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn second_off_diagonal(&self) -> &[f64] {
        &self.second_off_diagonal
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        match row.abs_diff(col) {
            0 => self.diagonal[row],
            2 => self.second_off_diagonal[row.min(col)],
            _ => 0.0,
        }
    }

    /// The two decoupled chains (`k` even, `k` odd) as tridiagonal operators,
    /// each paired with the Dicke indices it covers.
    pub fn parity_chains(&self) -> Vec<(TridiagonalOperator, Vec<usize>)> {
        (0..2)
            .filter(|&parity| parity < self.dimension())
            .map(|parity| {
                let indices: Vec<usize> = (parity..self.dimension()).step_by(2).collect();
                let diagonal = indices.iter().map(|&k| self.diagonal[k]).collect();
                let off = indices[..indices.len() - 1]
                    .iter()
                    .map(|&k| self.second_off_diagonal[k])
                    .collect();
                let op = TridiagonalOperator::new(diagonal, off).expect("chain bands are consistent by construction");
                (op, indices)
            })
            .collect()
    }
}

pub fn build_oat_reference(params: &ModelParams) -> Result<DickeOperator> {
    params.validate()?;
    let n_atoms = params.atom_count;
    if n_atoms < 2 {
        return Err(Error::InvalidParameter(
            "one-axis-twisting reference needs at least two atoms".into(),
        ));
    }
    if n_atoms > max_atom_number() {
        return Err(Error::TooLarge {
            n: n_atoms,
            max: max_atom_number(),
        });
    }
    let lambda = params.lambda_a_prime;
    let j = n_atoms as f64 / 2.0;
    let jj = j * (j + 1.0);
    let m_of = |k: usize| j - k as f64;
    let diagonal = (0..=n_atoms)
        .map(|k| {
            let m = m_of(k);
            2.0 * lambda * (jj - m * m)
        })
        .collect();
    // <m|J_+^2|m-2> / 4, times 4 lambda'.
    let second_off_diagonal = (0..n_atoms.saturating_sub(1))
        .map(|k| {
            let m_low = m_of(k + 2);
            lambda * ((jj - m_low * (m_low + 1.0)) * (jj - (m_low + 1.0) * (m_low + 2.0))).sqrt()
        })
        .collect();
    Ok(DickeOperator {
        n_atoms,
        diagonal,
        second_off_diagonal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling_gives_zero_operator() {
        let h = build_spin_hamiltonian(&ModelParams::new(9, 0.0)).unwrap();
        assert!(h.diagonal().iter().chain(h.off_diagonal()).all(|&x| x == 0.0));
    }

    #[test]
    fn two_atoms_spectrum() {
        // L^2 - 2N for N = 2 on {|2,0,0>, |0,1,1>}: l = 0, 2 give -4, 2.
        let h = build_spin_hamiltonian(&ModelParams::new(2, 1.0)).unwrap();
        assert_eq!(h.dimension(), 2);
        let values = crate::eigen::eigenvalues(h.diagonal(), h.off_diagonal()).unwrap();
        assert!((values[0] + 4.0).abs() < 1e-12);
        assert!((values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sector_spectrum_is_total_spin() {
        // The L_z = 0 sector holds one state per l = N, N-2, ...
        for n in [5usize, 10, 31] {
            let h = build_spin_hamiltonian(&ModelParams::new(n, 1.0)).unwrap();
            let values = crate::eigen::eigenvalues(h.diagonal(), h.off_diagonal()).unwrap();
            let mut expected: Vec<f64> = (0..=n)
                .rev()
                .step_by(2)
                .map(|l| (l * (l + 1)) as f64 - 2.0 * n as f64)
                .collect();
            expected.sort_by(f64::total_cmp);
            for (a, b) in values.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "N={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn linear_in_coupling() {
        let h1 = build_spin_hamiltonian(&ModelParams::new(17, 0.7)).unwrap();
        let h2 = build_spin_hamiltonian(&ModelParams::new(17, 1.4)).unwrap();
        assert_eq!(h1.scaled(2.0), h2);
    }

    #[test]
    fn oversize_rejected() {
        let err = build_spin_hamiltonian_with_limit(&ModelParams::new(101, 1.0), 100).unwrap_err();
        assert!(matches!(err, Error::TooLarge { n: 101, max: 100 }));
    }

    #[test]
    fn zeeman_is_invisible_on_sector() {
        let h = build_spin_hamiltonian(&ModelParams::new(12, 1.0)).unwrap();
        assert_eq!(add_linear_zeeman(&h, 0.0, 12).unwrap(), h);
        let p = 2.0 * std::f64::consts::PI * 100.0;
        assert_eq!(add_linear_zeeman(&h, p, 12).unwrap(), h);
        assert!(add_linear_zeeman(&h, p, 14).is_err());
    }

    #[test]
    fn oat_spin_one_matrix() {
        let op = build_oat_reference(&ModelParams::new(2, 1.0)).unwrap();
        let expected = [[2.0, 0.0, 2.0], [0.0, 4.0, 0.0], [2.0, 0.0, 2.0]];
        for (r, row) in expected.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((op.entry(r, c) - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn oat_top_state_expectation() {
        for n in [2usize, 7, 50] {
            let op = build_oat_reference(&ModelParams::new(n, 1.0)).unwrap();
            assert!((op.diagonal()[0] - n as f64).abs() < 1e-12);
        }
        assert!(build_oat_reference(&ModelParams::new(1, 1.0)).is_err());
    }

    #[test]
    fn csv_dump_layout() {
        let h = build_spin_hamiltonian(&ModelParams::new(2, 1.0)).unwrap();
        let csv = h.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,diagonal,off_diagonal");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(','));
    }
}
