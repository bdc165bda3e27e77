//! Brute-force reference on the full three-mode Fock space.
//!
//! Everything here is built by literal operator algebra: second-quantized
//! bilinears `a_alpha^dag a_beta`, the spin-1 matrices `S^{x,y,z}`, dense
//! Hermitian diagonalization, explicit partial traces. Nothing is shared with
//! the sector path, so agreement between the two is evidence rather than
//! tautology.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::basis::{ModelParams, SectorState};
use crate::error::{Error, Result};
use crate::propagator::{Trajectory, TrajectoryRecord};

pub const DEFAULT_ORACLE_MAX_ATOMS: usize = 40;

type CMatrix = DMatrix<Complex64>;
type CVector = DVector<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Mode labels in ket order `(m_f = 0, +1, -1)`.
pub const MODES: [i32; 3] = [0, 1, -1];

fn slot(mode: i32) -> usize {
    match mode {
        0 => 0,
        1 => 1,
        -1 => 2,
        _ => panic!("spin-1 mode label must be -1, 0 or +1, got {mode}"),
    }
}

/// Every occupation `(n_0, n_+1, n_-1)` with sum `N`, lexicographic.
pub fn enumerate_basis(n_atoms: usize) -> Result<Vec<[usize; 3]>> {
    enumerate_basis_with_limit(n_atoms, DEFAULT_ORACLE_MAX_ATOMS)
}

pub fn enumerate_basis_with_limit(n_atoms: usize, max_atoms: usize) -> Result<Vec<[usize; 3]>> {
    if n_atoms > max_atoms {
        return Err(Error::TooLarge {
            n: n_atoms,
            max: max_atoms,
        });
    }
    let mut basis = Vec::with_capacity((n_atoms + 1) * (n_atoms + 2) / 2);
    for n0 in 0..=n_atoms {
        for n_plus in 0..=n_atoms - n0 {
            basis.push([n0, n_plus, n_atoms - n0 - n_plus]);
        }
    }
    Ok(basis)
}

/// Pure state on the full fixed-`N` Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    pub atom_count: usize,
    pub amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &FockState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    fn to_vector(&self) -> CVector {
        CVector::from_vec(self.amplitudes.clone())
    }
}

/// Real eigenvalues and unitary eigenvectors (columns).
struct Spectrum {
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

/// nalgebra's default deflation threshold leaves reconstruction errors near
/// `1e-11 * |H|` on these degenerate spectra; a much tighter one reaches
/// rounding level.
const EIGEN_EPS: f64 = 1e-20;
const EIGEN_MAX_ITERATIONS: usize = 100_000;

/// Dense Hermitian eigensolve.
fn hermitian_eigen(m: &CMatrix) -> Spectrum {
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    let imaginary = m.iter().map(|x| x.im.abs()).fold(0.0, f64::max);
    if imaginary <= 1e-14 * scale {
        let real = m.map(|x| x.re);
        let eig = SymmetricEigen::try_new(real.clone(), EIGEN_EPS, EIGEN_MAX_ITERATIONS)
            .unwrap_or_else(|| SymmetricEigen::new(real));
        Spectrum {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors.map(re),
        }
    } else {
        let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITERATIONS)
            .unwrap_or_else(|| SymmetricEigen::new(m.clone()));
        Spectrum {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }
}

fn sparse_hop(basis: &[[usize; 3]], index: &HashMap<[usize; 3], usize>, alpha: i32, beta: i32) -> SparseOperator {
    let (a, b) = (slot(alpha), slot(beta));
    let mut op = SparseOperator::new(basis.len());
    for (col, occ) in basis.iter().enumerate() {
        if a == b {
            op.push(col, col, re(occ[a] as f64));
            continue;
        }
        if occ[b] == 0 {
            continue;
        }
        let amplitude = (occ[b] as f64).sqrt() * (occ[a] as f64 + 1.0).sqrt();
        let mut target = *occ;
        target[b] -= 1;
        target[a] += 1;
        op.push(index[&target], col, re(amplitude));
    }
    op
}

/// Spin-1 matrices in the `m_f` labels:
/// `S^x = (d_{a,b-1} + d_{a,b+1})/sqrt2`, `S^y = i (d_{a,b-1} - d_{a,b+1})/sqrt2`,
/// `S^z = a d_{a,b}`.
fn spin_one_element(component: usize, alpha: i32, beta: i32) -> Complex64 {
    let delta = |x: i32, y: i32| if x == y { 1.0 } else { 0.0 };
    match component {
        0 => re((delta(alpha, beta - 1) + delta(alpha, beta + 1)) * FRAC_1_SQRT_2),
        1 => I * ((delta(alpha, beta - 1) - delta(alpha, beta + 1)) * FRAC_1_SQRT_2),
        2 => re(alpha as f64 * delta(alpha, beta)),
        _ => unreachable!(),
    }
}

fn spin_component(hops: &[Vec<SparseOperator>], component: usize) -> SparseOperator {
    let mut l = SparseOperator::new(hops[0][0].dim);
    for alpha in MODES {
        for beta in MODES {
            let s = spin_one_element(component, alpha, beta);
            if s != re(0.0) {
                l = l.add(&hops[slot(alpha)][slot(beta)], s);
            }
        }
    }
    l
}

fn collective_spin_ops<'a>(hop: &impl Fn(i32, i32) -> &'a SparseOperator, sign: f64) -> [SparseOperator; 3] {
    let s = re(sign);
    let r = re(FRAC_1_SQRT_2);
    // a_{+-}^dag a_0
    let raise_from_zero = hop(1, 0).clone().add(hop(-1, 0), s).scale(r);
    let lower_to_zero = raise_from_zero.adjoint();
    let jx = raise_from_zero.clone().add(&lower_to_zero, re(1.0)).scale(re(0.5));
    let jy = raise_from_zero.add(&lower_to_zero, re(-1.0)).scale(I * 0.5);
    // a_{+-}^dag a_{+-}
    let n_pm = hop(1, 1)
        .clone()
        .add(hop(-1, -1), re(1.0))
        .add(hop(1, -1), s)
        .add(hop(-1, 1), s)
        .scale(re(0.5));
    let jz = hop(0, 0).clone().add(&n_pm, re(-1.0)).scale(re(0.5));
    [jx, jy, jz]
}

/// Sparse operator as a list of `(row, col, value)` triplets; repeated
/// positions add.
#[derive(Clone, Debug, Default)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOperator {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries.push((row, col, value));
    }

    /// `self + factor * other`.
    fn add(mut self, other: &SparseOperator, factor: Complex64) -> Self {
        self.entries
            .extend(other.entries.iter().map(|&(r, c, v)| (r, c, v * factor)));
        self
    }

    fn scale(mut self, factor: Complex64) -> Self {
        for e in &mut self.entries {
            e.2 *= factor;
        }
        self
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    pub fn apply(&self, x: &CVector) -> CVector {
        let mut y = CVector::zeros(self.dim);
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// `self * m` for dense `m`.
    pub fn mul_dense(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, m.ncols());
        for &(r, c, v) in &self.entries {
            for j in 0..m.ncols() {
                out[(r, j)] += v * m[(c, j)];
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// Operators reused by every measurement.
struct Operators {
    /// `hops[a][b] = a_a^dag a_b`, slots in [`MODES`] order.
    hops: Vec<Vec<SparseOperator>>,
    spin_plus: [SparseOperator; 3],
    spin_minus: [SparseOperator; 3],
    lz: SparseOperator,
}

/// Fock space, operators and spectral decomposition for one parameter set.
pub struct Oracle {
    params: ModelParams,
    basis: Vec<[usize; 3]>,
    index: HashMap<[usize; 3], usize>,
    ops: Operators,
    /// `H / lambda'`, Hermitian.
    generator: CMatrix,
    spectrum: Spectrum,
}

impl Oracle {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Self::with_limit(params, DEFAULT_ORACLE_MAX_ATOMS)
    }

    pub fn with_limit(params: &ModelParams, max_atoms: usize) -> Result<Self> {
        params.validate()?;
        if params.lambda_a_prime == 0.0 {
            return Err(Error::InvalidParameter(
                "oracle evolution needs a nonzero lambda'".into(),
            ));
        }
        let basis = enumerate_basis_with_limit(params.atom_count, max_atoms)?;
        let index: HashMap<[usize; 3], usize> = basis.iter().enumerate().map(|(i, occ)| (*occ, i)).collect();
        let hops: Vec<Vec<SparseOperator>> = MODES
            .iter()
            .map(|&a| MODES.iter().map(|&b| sparse_hop(&basis, &index, a, b)).collect())
            .collect();
        let hop = |a: i32, b: i32| &hops[slot(a)][slot(b)];
        let lz = spin_component(&hops, 2);
        let ops = Operators {
            spin_plus: collective_spin_ops(&hop, 1.0),
            spin_minus: collective_spin_ops(&hop, -1.0),
            lz,
            hops: hops.clone(),
        };
        let dim = basis.len();
        let n = params.atom_count as f64;
        let mut generator = CMatrix::identity(dim, dim) * re(-2.0 * n);
        for c in 0..3 {
            let l = spin_component(&ops.hops, c);
            generator += l.mul_dense(&l.to_dense());
        }
        generator += ops.lz.to_dense() * re(params.zeeman_p / params.lambda_a_prime);
        let spectrum = hermitian_eigen(&generator);
        Ok(Self {
            params: *params,
            basis,
            index,
            ops,
            generator,
            spectrum,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[[usize; 3]] {
        &self.basis
    }

    /// `a_alpha^dag a_beta` on the fixed-`N` space.
    pub fn hop(&self, alpha: i32, beta: i32) -> CMatrix {
        self.ops.hops[slot(alpha)][slot(beta)].to_dense()
    }

    pub fn number(&self, mode: i32) -> CMatrix {
        self.hop(mode, mode)
    }

    /// `L^i = sum_{alpha beta} a_alpha^dag S^i_{alpha beta} a_beta`, `i = 0, 1, 2` for x, y, z.
    pub fn total_spin(&self, component: usize) -> CMatrix {
        spin_component(&self.ops.hops, component).to_dense()
    }

    /// `L^2 = (L^x)^2 + (L^y)^2 + (L^z)^2`.
    pub fn total_spin_squared(&self) -> CMatrix {
        let dim = self.dimension();
        (0..3).fold(CMatrix::zeros(dim, dim), |acc, c| {
            let l = spin_component(&self.ops.hops, c);
            acc + l.mul_dense(&l.to_dense())
        })
    }

    /// `lambda' (L^2 - 2N) + p L^z`.
    pub fn full_hamiltonian(&self) -> CMatrix {
        &self.generator * re(self.params.lambda_a_prime)
    }

    /// `H / lambda'`.
    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    /// Indices of the `n_+1 = n_-1` states, ordered by pair count.
    pub fn sector_indices(&self) -> Vec<usize> {
        let n_atoms = self.params.atom_count;
        (0..=n_atoms / 2)
            .map(|pairs| self.index[&[n_atoms - 2 * pairs, pairs, pairs]])
            .collect()
    }

    /// `P M P` in the sector basis.
    pub fn sector_projection(&self, m: &CMatrix) -> CMatrix {
        let idx = self.sector_indices();
        CMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
    }

    /// Largest `|M_ij|` with `j` in the sector and `i` outside it.
    pub fn sector_leakage(&self, m: &CMatrix) -> f64 {
        let idx = self.sector_indices();
        let inside: std::collections::HashSet<usize> = idx.iter().copied().collect();
        let mut worst = 0.0f64;
        for &j in &idx {
            for i in 0..self.dimension() {
                if !inside.contains(&i) {
                    worst = worst.max(m[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn embed(&self, state: &SectorState) -> Result<FockState> {
        if state.atom_count() != self.params.atom_count {
            return Err(Error::AtomNumberMismatch {
                left: state.atom_count(),
                right: self.params.atom_count,
            });
        }
        let mut amplitudes = vec![re(0.0); self.dimension()];
        for (i, c) in self.sector_indices().into_iter().zip(state.amplitudes()) {
            amplitudes[i] = *c;
        }
        Ok(FockState {
            atom_count: self.params.atom_count,
            amplitudes,
        })
    }

    /// Sector amplitudes and the norm of everything outside the sector.
    pub fn restrict(&self, state: &FockState) -> (Vec<Complex64>, f64) {
        let idx = self.sector_indices();
        let inside: Vec<Complex64> = idx.iter().map(|&i| state.amplitudes[i]).collect();
        let mut outside = state.amplitudes.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>();
        for &i in &idx {
            outside[i] = 0.0;
        }
        (inside, outside.iter().sum::<f64>().sqrt())
    }

    pub fn polar_state(&self) -> FockState {
        let mut amplitudes = vec![re(0.0); self.dimension()];
        amplitudes[self.index[&[self.params.atom_count, 0, 0]]] = re(1.0);
        FockState {
            atom_count: self.params.atom_count,
            amplitudes,
        }
    }

    /// `exp(-i (H / lambda') tau) state` by exact diagonalization.
    pub fn evolve(&self, state: &FockState, tau: f64) -> FockState {
        let u = &self.spectrum.eigenvectors;
        let mut weights = u.adjoint() * state.to_vector();
        for (w, &e) in weights.iter_mut().zip(self.spectrum.eigenvalues.iter()) {
            *w *= Complex64::from_polar(1.0, -e * tau);
        }
        FockState {
            atom_count: state.atom_count,
            amplitudes: (u * weights).iter().copied().collect(),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.spectrum.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn expectation(&self, m: &CMatrix, state: &FockState) -> Complex64 {
        let v = state.to_vector();
        (v.adjoint() * m * &v)[(0, 0)]
    }

    fn sparse_expectation(op: &SparseOperator, psi: &CVector) -> Complex64 {
        psi.dotc(&op.apply(psi))
    }

    /// `(J^x, J^y, J^z)` for the pair `(|+->, |0>)` with
    /// `|+-> = (|+1> +- |-1>)/sqrt2`, from `a_{+-} = (a_+1 +- a_-1)/sqrt2`.
    pub fn collective_spin(&self, sign: f64) -> [CMatrix; 3] {
        self.spin_ops(sign).clone().map(|op| op.to_dense())
    }

    fn spin_ops(&self, sign: f64) -> &[SparseOperator; 3] {
        if sign > 0.0 {
            &self.ops.spin_plus
        } else {
            &self.ops.spin_minus
        }
    }

    /// Moments and squeezing of one collective spin by direct operator
    /// application; the angle is minimized by a 2x2 symmetric eigensolve.
    pub fn squeezing(&self, state: &FockState, sign: f64) -> OracleSqueezing {
        let psi = state.to_vector();
        let [jx, jy, jz] = self.spin_ops(sign);
        let (jx_psi, jy_psi) = (jx.apply(&psi), jy.apply(&psi));
        let mx = psi.dotc(&jx_psi).re;
        let my = psi.dotc(&jy_psi).re;
        let mz = Self::sparse_expectation(jz, &psi).re;
        // Hermitian J: <J_a J_b> = <J_a psi | J_b psi>.
        let xx = jx_psi.dotc(&jx_psi).re - mx * mx;
        let yy = jy_psi.dotc(&jy_psi).re - my * my;
        let xy = jx_psi.dotc(&jy_psi).re - mx * my;
        let cov = Matrix2::new(xx, xy, xy, yy);
        let eig = cov.symmetric_eigen();
        let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
        let v = eig.eigenvectors.column(k);
        let theta = v[1].atan2(v[0]).rem_euclid(PI);
        let n = self.params.atom_count as f64;
        let xi_at = |t: f64| {
            let (s, c) = t.sin_cos();
            let var = c * c * xx + s * s * yy + 2.0 * s * c * xy;
            let perp = -s * mx + c * my;
            n * var / (perp * perp + mz * mz)
        };
        OracleSqueezing {
            mean: [mx, my, mz],
            cov_xx: xx,
            cov_yy: yy,
            cov_xy: xy,
            xi_min: xi_at(theta),
            theta_star: if theta >= PI { 0.0 } else { theta },
        }
    }

    /// Reduced density matrix of one mode by explicit partial trace.
    pub fn reduced_density(&self, state: &FockState, mode: i32) -> CMatrix {
        let m = slot(mode);
        let others: Vec<usize> = (0..3).filter(|&s| s != m).collect();
        let n = self.params.atom_count;
        let mut rho = CMatrix::zeros(n + 1, n + 1);
        for (i, occ_i) in self.basis.iter().enumerate() {
            for (j, occ_j) in self.basis.iter().enumerate() {
                if others.iter().all(|&o| occ_i[o] == occ_j[o]) {
                    rho[(occ_i[m], occ_j[m])] += state.amplitudes[i] * state.amplitudes[j].conj();
                }
            }
        }
        rho
    }

    /// Von Neumann entropy in bits of `rho_mode`.
    pub fn mode_entropy(&self, state: &FockState, mode: i32) -> f64 {
        let rho = self.reduced_density(state, mode);
        SymmetricEigen::new(rho)
            .eigenvalues
            .iter()
            .filter(|&&p| p > 1e-300)
            .map(|&p| -p * p.log2())
            .sum()
    }

    /// `<(dX_+^theta)^2> + <(dX_-^(theta + pi/2))^2>` for the phase-locked
    /// modes `a'_{+-1} = a_{+-1} a_0^dag / sqrt(<n_0>)`.
    pub fn quadrature_sum(&self, state: &FockState, theta: f64) -> f64 {
        self.quadrature_actions(state).sum(theta)
    }

    fn quadrature_actions(&self, state: &FockState) -> QuadratureActions {
        let psi = state.to_vector();
        let n0 = Self::sparse_expectation(&self.ops.hops[0][0], &psi).re;
        let scale = re(1.0 / n0.sqrt());
        // a_{+-1} a_0^dag = a_0^dag a_{+-1}
        let a_plus = self.ops.hops[0][slot(1)].clone().scale(scale);
        let a_minus = self.ops.hops[0][slot(-1)].clone().scale(scale);
        QuadratureActions {
            lower: [a_plus.apply(&psi), a_minus.apply(&psi)],
            raise: [a_plus.adjoint().apply(&psi), a_minus.adjoint().apply(&psi)],
            psi,
        }
    }

    /// Minimum of [`Self::quadrature_sum`] over the angle: coarse grid, then
    /// golden-section refinement.
    pub fn quadrature_minimum(&self, state: &FockState) -> f64 {
        let coarse = 720;
        let actions = self.quadrature_actions(state);
        let f = |t: f64| actions.sum(t);
        let (mut best_t, mut best) = (0.0, f64::INFINITY);
        for i in 0..coarse {
            let t = PI * i as f64 / coarse as f64;
            let v = f(t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        let h = PI / coarse as f64;
        let (mut a, mut b) = (best_t - h, best_t + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        best.min(fc).min(fd)
    }

    /// Everything the sector path reports, plus oracle-only diagnostics.
    pub fn measure(&self, state: &FockState) -> OracleRecord {
        let plus = self.squeezing(state, 1.0);
        let minus = self.squeezing(state, -1.0);
        let entropies = [
            self.mode_entropy(state, 1),
            self.mode_entropy(state, -1),
            self.mode_entropy(state, 0),
        ];
        let n = self.params.atom_count as f64;
        let psi = state.to_vector();
        let commutator = self.ops.hops[slot(-1)][slot(1)]
            .clone()
            .add(&self.ops.hops[slot(1)][slot(-1)], re(-1.0))
            .scale(re(0.25));
        OracleRecord {
            record: TrajectoryRecord {
                xi_plus: plus.xi_min,
                xi_minus: minus.xi_min,
                theta_plus: plus.theta_star,
                theta_minus: minus.theta_star,
                e3_bits: (entropies[0] * entropies[1] * entropies[2]).cbrt(),
                pop_m0: Self::sparse_expectation(&self.ops.hops[0][0], &psi).re / n,
                quad_criterion: self.quadrature_minimum(state),
                norm_error: (state.norm_sqr().sqrt() - 1.0).abs(),
            },
            plus,
            minus,
            entropies,
            lz: Self::sparse_expectation(&self.ops.lz, &psi).re,
            commutator: Self::sparse_expectation(&commutator, &psi).norm(),
        }
    }

    /// Evolution of the embedded polar state across `grid` with full
    /// measurement at each point.
    pub fn run(&self, grid: &[f64]) -> OracleRun {
        let initial = self.polar_state();
        let mut states = Vec::with_capacity(grid.len());
        let mut records = Vec::with_capacity(grid.len());
        for &tau in grid {
            let s = self.evolve(&initial, tau);
            records.push(self.measure(&s));
            states.push(s);
        }
        OracleRun {
            times: grid.to_vec(),
            states,
            records,
        }
    }
}

/// `a'` and `a'^dag` applied to the state, so each angle costs O(dim).
struct QuadratureActions {
    psi: CVector,
    lower: [CVector; 2],
    raise: [CVector; 2],
}

impl QuadratureActions {
    /// `X^t psi` for `X^t = (e^{it} a'^dag + e^{-it} a')/sqrt2` on `+1` (k = 0) or `-1`.
    fn single(&self, k: usize, t: f64) -> CVector {
        (&self.raise[k] * Complex64::from_polar(1.0, t) + &self.lower[k] * Complex64::from_polar(1.0, -t))
            * re(FRAC_1_SQRT_2)
    }

    fn variance(&self, x_psi: &CVector) -> f64 {
        let mean = self.psi.dotc(x_psi).re;
        x_psi.dotc(x_psi).re - mean * mean
    }

    fn sum(&self, theta: f64) -> f64 {
        let combined = |t: f64, sign: f64| (self.single(0, t) + self.single(1, t) * re(sign)) * re(FRAC_1_SQRT_2);
        self.variance(&combined(theta, 1.0)) + self.variance(&combined(theta + FRAC_PI_2, -1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleSqueezing {
    pub mean: [f64; 3],
    pub cov_xx: f64,
    pub cov_yy: f64,
    pub cov_xy: f64,
    pub xi_min: f64,
    pub theta_star: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleRecord {
    pub record: TrajectoryRecord,
    pub plus: OracleSqueezing,
    pub minus: OracleSqueezing,
    /// `[E(rho_+1), E(rho_-1), E(rho_0)]` in bits.
    pub entropies: [f64; 3],
    pub lz: f64,
    /// `|<(a_-1^dag a_+1 - a_+1^dag a_-1)/4>|`, i.e. `|<[J_+^x, J_-^x]>|`.
    pub commutator: f64,
}

pub struct OracleRun {
    pub times: Vec<f64>,
    pub states: Vec<FockState>,
    pub records: Vec<OracleRecord>,
}

impl OracleRun {
    pub fn trajectory(&self, atom_count: usize) -> Trajectory {
        Trajectory {
            atom_count,
            times: self.times.clone(),
            records: self.records.iter().map(|r| r.record).collect(),
        }
    }
}

/// Exact-diagonalization trajectory of the polar state.
pub fn oracle_evolve_and_measure(params: &ModelParams, grid: &[f64]) -> Result<Trajectory> {
    let oracle = Oracle::new(params)?;
    Ok(oracle.run(grid).trajectory(params.atom_count))
}

/// Two-mode Fock reference for `4 (J^x)^2`, modes `a = |+>` and `b = |0>`.
pub struct TwoModeOracle {
    n_atoms: usize,
    jx: CMatrix,
    jy: CMatrix,
    jz: CMatrix,
    spectrum: Spectrum,
}

impl TwoModeOracle {
    pub fn new(n_atoms: usize) -> Result<Self> {
        if n_atoms < 2 {
            return Err(Error::InvalidParameter("need at least two atoms".into()));
        }
        // Basis index = n_a, with n_b = N - n_a.
        let dim = n_atoms + 1;
        let mut a_dag_b = CMatrix::zeros(dim, dim);
        for n_a in 0..n_atoms {
            let n_b = n_atoms - n_a;
            a_dag_b[(n_a + 1, n_a)] = re(((n_a + 1) as f64).sqrt() * (n_b as f64).sqrt());
        }
        let b_dag_a = a_dag_b.adjoint();
        let jx = (&a_dag_b + &b_dag_a) * re(0.5);
        let jy = (&a_dag_b - &b_dag_a) * (I * 0.5);
        let jz = CMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                re((n_atoms as f64 - 2.0 * r as f64) / 2.0)
            } else {
                re(0.0)
            }
        });
        let generator = &jx * &jx * re(4.0);
        Ok(Self {
            n_atoms,
            jx,
            jy,
            jz,
            spectrum: hermitian_eigen(&generator),
        })
    }

    /// Minimal squeezing at each time, starting from `n_b = N`.
    pub fn squeezing_curve(&self, grid: &[f64]) -> Vec<f64> {
        let dim = self.n_atoms + 1;
        let mut initial = CVector::zeros(dim);
        initial[0] = re(1.0);
        let u = &self.spectrum.eigenvectors;
        let w0 = u.adjoint() * initial;
        grid.iter()
            .map(|&tau| {
                let mut w = w0.clone();
                for (x, &e) in w.iter_mut().zip(self.spectrum.eigenvalues.iter()) {
                    *x *= Complex64::from_polar(1.0, -e * tau);
                }
                let psi = u * w;
                let ex = |m: &CMatrix| (psi.adjoint() * m * &psi)[(0, 0)].re;
                let (mx, my, mz) = (ex(&self.jx), ex(&self.jy), ex(&self.jz));
                let xx = ex(&(&self.jx * &self.jx)) - mx * mx;
                let yy = ex(&(&self.jy * &self.jy)) - my * my;
                let xy = 0.5 * ex(&(&self.jx * &self.jy + &self.jy * &self.jx)) - mx * my;
                let eig = Matrix2::new(xx, xy, xy, yy).symmetric_eigen();
                let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
                let v = eig.eigenvectors.column(k);
                let perp = -v[1] * mx + v[0] * my;
                self.n_atoms as f64 * eig.eigenvalues[k] / (perp * perp + mz * mz)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(enumerate_basis(1).unwrap().len(), 3);
        assert_eq!(enumerate_basis(2).unwrap().len(), 6);
        let b4 = enumerate_basis(4).unwrap();
        assert_eq!(b4.len(), 15);
        assert_eq!(b4.iter().filter(|o| o[1] == o[2]).count(), 3);
        assert!(matches!(enumerate_basis(41), Err(Error::TooLarge { .. })));
        assert_eq!(enumerate_basis_with_limit(41, 50).unwrap().len(), 42 * 43 / 2);
    }

    #[test]
    fn sector_count_matches_dimension_formula() {
        for n in 1..=12 {
            let count = enumerate_basis(n).unwrap().iter().filter(|o| o[1] == o[2]).count();
            assert_eq!(count, crate::basis::sector_dimension(n));
        }
    }

    #[test]
    fn angular_momentum_algebra() {
        let oracle = Oracle::new(&ModelParams::new(4, 1.0)).unwrap();
        let [lx, ly, lz] = [0, 1, 2].map(|c| oracle.total_spin(c));
        let commutator = &lx * &ly - &ly * &lx;
        assert!(max_abs(&(commutator - &lz * I)) < 1e-12);
        for l in [&lx, &ly, &lz] {
            assert!(max_abs(&(l - l.adjoint())) < 1e-14);
        }
    }

    #[test]
    fn total_spin_spectrum() {
        for n in [3usize, 6] {
            let oracle = Oracle::new(&ModelParams::new(n, 1.0)).unwrap();
            let l2 = oracle.total_spin_squared();
            for e in SymmetricEigen::new(l2).eigenvalues.iter() {
                let l = ((1.0 + 4.0 * e).sqrt() - 1.0) / 2.0;
                assert!((l - l.round()).abs() < 1e-9 && l.round() as usize <= n, "{e}");
            }
        }
    }

    #[test]
    fn sector_commutator_identity() {
        // [J_+^x, J_-^x] = (a_-1^dag a_+1 - a_+1^dag a_-1) / 4
        let oracle = Oracle::new(&ModelParams::new(5, 1.0)).unwrap();
        let [jpx, jpy, _] = oracle.collective_spin(1.0);
        let [jmx, jmy, _] = oracle.collective_spin(-1.0);
        let expected = (oracle.hop(-1, 1) - oracle.hop(1, -1)) * re(0.25);
        assert!(max_abs(&(&jpx * &jmx - &jmx * &jpx - &expected)) < 1e-12);
        assert!(max_abs(&(&jpy * &jmy - &jmy * &jpy - &expected)) < 1e-12);
    }

    #[test]
    fn spin_operator_identities() {
        // L^x = 2 J_+^x, L^y = -2 J_-^y.
        let oracle = Oracle::new(&ModelParams::new(4, 1.0)).unwrap();
        let [jpx, _, _] = oracle.collective_spin(1.0);
        let [_, jmy, _] = oracle.collective_spin(-1.0);
        assert!(max_abs(&(oracle.total_spin(0) - &jpx * re(2.0))) < 1e-12);
        assert!(max_abs(&(oracle.total_spin(1) + &jmy * re(2.0))) < 1e-12);
    }

    #[test]
    fn decomposition_reconstructs_generator() {
        let o = Oracle::new(&ModelParams::new(12, 1.3).with_zeeman(0.4)).unwrap();
        let u = &o.spectrum.eigenvectors;
        let d = CMatrix::from_diagonal(&o.spectrum.eigenvalues.map(re));
        let residual = max_abs(&(u * d * u.adjoint() - &o.generator));
        assert!(residual < 1e-12 * max_abs(&o.generator), "{residual}");
    }

    #[test]
    fn polar_record() {
        let oracle = Oracle::new(&ModelParams::new(6, 1.0)).unwrap();
        let r = oracle.measure(&oracle.polar_state());
        assert!((r.record.xi_plus - 1.0).abs() < 1e-12);
        assert!((r.record.xi_minus - 1.0).abs() < 1e-12);
        assert!(r.record.e3_bits.abs() < 1e-12);
        assert_eq!(r.record.pop_m0, 1.0);
        assert!((r.record.quad_criterion - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_mode_oracle_starts_unsqueezed() {
        let o = TwoModeOracle::new(10).unwrap();
        let xi = o.squeezing_curve(&[0.0, 0.02]);
        assert!((xi[0] - 1.0).abs() < 1e-12);
        assert!(xi[1] < 1.0);
    }
}
