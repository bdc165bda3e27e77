//! Unitary evolution `exp(-i (H / lambda') tau)` under a real symmetric
//! tridiagonal operator.
//!
//! Two strategies are provided. Small sectors are diagonalized once and every
//! evolution is a change of basis plus phases. Large sectors use a Lanczos
//! approximation of the exponential with a posteriori error control: the
//! step is halved until the estimated local error is below tolerance.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::SectorState;
use crate::eigen::{self, TridiagonalEigen};
use crate::error::{Error, Result};
use crate::hamiltonian::{DickeOperator, TridiagonalOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Eigen path up to `d_switch`, Krylov above.
    #[default]
    Auto,
    Eigen,
    Krylov,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub method: Method,
    pub d_switch: usize,
    pub krylov_dim: usize,
    /// Local error tolerance per Krylov step (unit-norm state).
    pub krylov_tol: f64,
    /// Maximum step halvings before a Krylov step is declared failed.
    pub max_halvings: u32,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            method: Method::Auto,
            d_switch: 1024,
            krylov_dim: 30,
            krylov_tol: 1e-10,
            max_halvings: 60,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.krylov_dim < 2 {
            return Err(Error::InvalidParameter("krylov_dim must be at least 2".into()));
        }
        if !(self.krylov_tol > 0.0) {
            return Err(Error::InvalidParameter("krylov_tol must be positive".into()));
        }
        Ok(())
    }
}

enum Strategy {
    Eigen(TridiagonalEigen),
    Krylov,
}

/// Propagator bound to one operator; reusable across states and times.
pub struct Propagator {
    /// `H / lambda'`.
    generator: TridiagonalOperator,
    strategy: Strategy,
    config: PropagatorConfig,
}

impl Propagator {
    /// `time_unit` is `lambda'`: evolution times are the dimensionless
    /// `tau = lambda' t`.
    pub fn new(hamiltonian: &TridiagonalOperator, time_unit: f64, config: PropagatorConfig) -> Result<Self> {
        config.validate()?;
        if time_unit == 0.0 || !time_unit.is_finite() {
            return Err(Error::InvalidParameter(
                "time unit (lambda') must be finite and nonzero".into(),
            ));
        }
        let generator = hamiltonian.scaled(1.0 / time_unit);
        let use_eigen = match config.method {
            Method::Eigen => true,
            Method::Krylov => false,
            Method::Auto => generator.dimension() <= config.d_switch,
        };
        let strategy = if use_eigen {
            Strategy::Eigen(eigen::decompose(generator.diagonal(), generator.off_diagonal())?)
        } else {
            Strategy::Krylov
        };
        Ok(Self {
            generator,
            strategy,
            config,
        })
    }

    pub fn dimension(&self) -> usize {
        self.generator.dimension()
    }

    pub fn uses_eigen(&self) -> bool {
        matches!(self.strategy, Strategy::Eigen(_))
    }

    /// The dimensionless generator `H / lambda'`.
    pub fn generator(&self) -> &TridiagonalOperator {
        &self.generator
    }

    pub fn evolve_amplitudes(&self, amplitudes: &[Complex64], tau: f64) -> Result<Vec<Complex64>> {
        self.generator.check_len(amplitudes.len())?;
        if tau == 0.0 {
            return Ok(amplitudes.to_vec());
        }
        match &self.strategy {
            Strategy::Eigen(eig) => {
                let weights = project(eig, amplitudes);
                Ok(reconstruct(eig, &weights, tau))
            }
            Strategy::Krylov => {
                let mut stepper = KrylovStepper::new(&self.generator, &self.config);
                stepper.advance(amplitudes.to_vec(), tau)
            }
        }
    }

    pub fn evolve(&self, state: &SectorState, tau: f64) -> Result<SectorState> {
        let amplitudes = self.evolve_amplitudes(state.amplitudes(), tau)?;
        SectorState::from_amplitudes(state.atom_count(), amplitudes)
    }

    /// Amplitudes at every grid time, starting from `amplitudes` at `tau = 0`.
    pub(crate) fn sample_amplitudes<F>(&self, amplitudes: &[Complex64], grid: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &[Complex64]) -> Result<()>,
    {
        validate_grid(grid)?;
        self.generator.check_len(amplitudes.len())?;
        let annotate = |index: usize| {
            move |e: Error| Error::AtGridIndex {
                index,
                source: Box::new(e),
            }
        };
        match &self.strategy {
            Strategy::Eigen(eig) => {
                let weights = project(eig, amplitudes);
                for (index, &tau) in grid.iter().enumerate() {
                    let current = if tau == 0.0 {
                        amplitudes.to_vec()
                    } else {
                        reconstruct(eig, &weights, tau)
                    };
                    visit(index, &current).map_err(annotate(index))?;
                }
            }
            Strategy::Krylov => {
                let mut stepper = KrylovStepper::new(&self.generator, &self.config);
                let mut current = amplitudes.to_vec();
                let mut previous = 0.0;
                for (index, &tau) in grid.iter().enumerate() {
                    current = stepper.advance(current, tau - previous).map_err(annotate(index))?;
                    previous = tau;
                    visit(index, &current).map_err(annotate(index))?;
                }
            }
        }
        Ok(())
    }
}

/// `w_k = <v_k|psi>`.
fn project(eig: &TridiagonalEigen, amplitudes: &[Complex64]) -> Vec<Complex64> {
    eig.vectors()
        .map(|v| v.iter().zip(amplitudes).map(|(x, a)| a * x).sum())
        .collect()
}

/// `sum_k exp(-i E_k tau) w_k v_k`.
fn reconstruct(eig: &TridiagonalEigen, weights: &[Complex64], tau: f64) -> Vec<Complex64> {
    let mut out = vec![ZERO; eig.dim()];
    for ((v, &energy), w) in eig.vectors().zip(&eig.values).zip(weights) {
        let c = w * Complex64::from_polar(1.0, -energy * tau);
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    out
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    match grid.first() {
        None => return Err(Error::InvalidGrid("time grid is empty".into())),
        Some(&t0) if t0 != 0.0 => return Err(Error::InvalidGrid(format!("time grid starts at {t0}, not 0"))),
        _ => {}
    }
    if let Some(w) = grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(format!(
            "time grid not strictly increasing at {} -> {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Adaptive Lanczos integrator for `exp(-i A t) v`.
///
/// In the pair basis the diagonal grows like `N n` while the state occupies a
/// narrow band of low energies through cancellations between neighbours.
/// Truncation error left at large `n` breaks those cancellations and sits far
/// above the physical energies; later Lanczos bases lock onto it and the
/// accepted step collapses. Two measures keep it out: the error estimate
/// integrates the residual over the step, which weights such components by
/// their inverse frequency, and every accepted step drops the trailing run of
/// amplitudes whose norm fits in half the tolerance.
struct KrylovStepper<'a> {
    op: &'a TridiagonalOperator,
    config: &'a PropagatorConfig,
    /// Last accepted step, reused as the next trial step.
    step_hint: Option<f64>,
}

struct KrylovBasis {
    /// Lanczos vectors restricted to the active prefix.
    vectors: Vec<Vec<Complex64>>,
    /// `T_11`, the expectation of the start vector.
    centre: f64,
    ritz: TridiagonalEigen,
    /// `beta_m`, the coupling out of the subspace; zero on breakdown.
    leak: f64,
}

impl KrylovBasis {
    /// `exp(-i T dt) e_1`.
    fn exponential(&self, dt: f64) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.ritz.dim()];
        for (s, &theta) in self.ritz.vectors().zip(&self.ritz.values) {
            let c = Complex64::from_polar(s[0], -(theta - self.centre) * dt);
            for (o, x) in out.iter_mut().zip(s) {
                *o += c * x;
            }
        }
        let phase = Complex64::from_polar(1.0, -self.centre * dt);
        out.iter_mut().for_each(|x| *x *= phase);
        out
    }

    /// `beta_m |int_0^dt e_m^T exp(-i (T - T_11) s) e_1 ds|` for a unit start
    /// vector. Each Ritz pair enters with weight `|(1 - e^{-i x dt}) / x|`,
    /// `x = theta - T_11`, at most `min(dt, 2 / |x|)`.
    fn error_estimate(&self, dt: f64) -> f64 {
        let last = self.ritz.dim() - 1;
        let mut sum = ZERO;
        for (s, &theta) in self.ritz.vectors().zip(&self.ritz.values) {
            let x = theta - self.centre;
            let weight = if (x * dt).abs() < 1e-8 {
                Complex64::new(dt, -0.5 * x * dt * dt)
            } else {
                (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -x * dt)) / Complex64::new(0.0, x)
            };
            sum += weight * (s[0] * s[last]);
        }
        self.leak * sum.norm()
    }
}

/// `out = A x` on the leading `x.len()` rows, treating later entries of `x` as zero.
fn apply_prefix(op: &TridiagonalOperator, x: &[Complex64], out: &mut [Complex64]) {
    let diag = op.diagonal();
    let off = op.off_diagonal();
    let len = x.len();
    for i in 0..len {
        let mut acc = x[i] * diag[i];
        if i > 0 {
            acc += x[i - 1] * off[i - 1];
        }
        if i + 1 < len {
            acc += x[i + 1] * off[i];
        }
        out[i] = acc;
    }
}

impl<'a> KrylovStepper<'a> {
    fn new(op: &'a TridiagonalOperator, config: &'a PropagatorConfig) -> Self {
        Self {
            op,
            config,
            step_hint: None,
        }
    }

    /// Lanczos basis of `start[..len]`, where `len` leaves room for every
    /// vector to grow by one site per step without touching the last row.
    /// Without `reorthogonalize` this is the plain three-term recurrence.
    fn build_basis(&self, start: &[Complex64], beta0: f64, reorthogonalize: bool) -> Result<KrylovBasis> {
        let d = start.len();
        let m_max = self.config.krylov_dim.min(d);
        let support = start.iter().rposition(|c| *c != ZERO).map_or(1, |k| k + 1);
        let len = (support + m_max + 1).min(d);
        let scale = self.op.norm_bound().max(f64::MIN_POSITIVE);
        let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(m_max);
        vectors.push(start[..len].iter().map(|x| x / beta0).collect());
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut w = vec![ZERO; len];
        let mut leak = 0.0;
        for j in 0..m_max {
            apply_prefix(self.op, &vectors[j], &mut w);
            let a = dot(&vectors[j], &w).re;
            alpha.push(a);
            if reorthogonalize {
                for q in &vectors {
                    let proj = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
                }
            } else {
                w.iter_mut().zip(&vectors[j]).for_each(|(x, y)| *x -= a * y);
                if j > 0 {
                    let b = beta[j - 1];
                    w.iter_mut().zip(&vectors[j - 1]).for_each(|(x, y)| *x -= b * y);
                }
            }
            let b = norm(&w);
            if b <= 1e-13 * scale {
                break;
            }
            if j + 1 == m_max {
                leak = b;
                break;
            }
            beta.push(b);
            vectors.push(w.iter().map(|x| x / b).collect());
        }
        let ritz = eigen::decompose(&alpha, &beta)?;
        Ok(KrylovBasis {
            vectors,
            centre: alpha[0],
            ritz,
            leak,
        })
    }

    /// One accepted step of at most `remaining` from `state` (norm `beta0`).
    fn step(
        &self,
        state: &[Complex64],
        beta0: f64,
        remaining: f64,
        reorthogonalize: bool,
    ) -> Result<(Vec<Complex64>, f64)> {
        let tol = 0.5 * self.config.krylov_tol;
        let basis = self.build_basis(state, beta0, reorthogonalize)?;
        let mut dt = self.step_hint.map_or(remaining, |h| (2.0 * h).min(remaining));
        let mut halvings = 0;
        let coefficients = loop {
            let error = beta0 * basis.error_estimate(dt);
            log::trace!("krylov trial dt={dt:.3e} error={error:.3e}");
            if error <= tol {
                break basis.exponential(dt);
            }
            halvings += 1;
            if halvings > self.config.max_halvings {
                return Err(Error::KrylovConvergence {
                    residual: error,
                    step: dt,
                });
            }
            dt *= 0.5;
        };
        let mut next = vec![ZERO; state.len()];
        for (q, c) in basis.vectors.iter().zip(&coefficients) {
            let c = c * beta0;
            next.iter_mut().zip(q).for_each(|(x, y)| *x += c * y);
        }
        clip_tail(&mut next, tol);
        Ok((next, dt))
    }

    /// Evolves `state` forward by `duration`.
    ///
    /// Steps use the plain three-term recurrence. If the result's norm moved
    /// by more than the tolerance, orthogonality was lost and the step is
    /// redone with full reorthogonalization.
    fn advance(&mut self, mut state: Vec<Complex64>, duration: f64) -> Result<Vec<Complex64>> {
        let mut remaining = duration;
        while remaining > 0.0 {
            let beta0 = norm(&state);
            if beta0 == 0.0 {
                return Ok(state);
            }
            let (mut next, mut dt) = self.step(&state, beta0, remaining, false)?;
            if (norm(&next) - beta0).abs() > self.config.krylov_tol * beta0 {
                log::debug!("krylov step lost orthogonality; redoing with reorthogonalization");
                (next, dt) = self.step(&state, beta0, remaining, true)?;
            }
            state = next;
            if dt < remaining {
                remaining -= dt;
                self.step_hint = Some(dt);
            } else {
                remaining = 0.0;
            }
        }
        Ok(state)
    }
}

/// Zeroes the longest trailing run of amplitudes whose norm is at most `budget`.
fn clip_tail(state: &mut [Complex64], budget: f64) {
    let limit = budget * budget;
    let mut tail = 0.0;
    let mut cut = state.len();
    while cut > 1 {
        let w = state[cut - 1].norm_sqr();
        if tail + w > limit {
            break;
        }
        tail += w;
        cut -= 1;
    }
    state[cut..].iter_mut().for_each(|x| *x = ZERO);
}

/// One-shot `exp(-i (H / lambda') tau) state`.
pub fn evolve(
    state: &SectorState,
    hamiltonian: &TridiagonalOperator,
    lambda_a_prime: f64,
    tau: f64,
    config: PropagatorConfig,
) -> Result<SectorState> {
    Propagator::new(hamiltonian, lambda_a_prime, config)?.evolve(state, tau)
}

/// Observables recorded at one trajectory sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub xi_plus: f64,
    pub xi_minus: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub e3_bits: f64,
    pub pop_m0: f64,
    pub quad_criterion: f64,
    pub norm_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub atom_count: usize,
    pub times: Vec<f64>,
    pub records: Vec<TrajectoryRecord>,
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "tau,N_lambda_t,xi_plus,xi_minus,theta_plus,theta_minus,E3_bits,pop_m0,quad_criterion,norm_error";

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_norm_error(&self) -> f64 {
        self.records.iter().map(|r| r.norm_error).fold(0.0, f64::max)
    }

    /// CSV with a mandatory header and 17 significant digits per value.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(200 * (self.len() + 1));
        out.push_str(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        let n = self.atom_count as f64;
        for (tau, r) in self.times.iter().zip(&self.records) {
            let row = [
                *tau,
                n * tau,
                r.xi_plus,
                r.xi_minus,
                r.theta_plus,
                r.theta_minus,
                r.e3_bits,
                r.pop_m0,
                r.quad_criterion,
                r.norm_error,
            ];
            let mut first = true;
            for value in row {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{value:.16e}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }
}

/// Evolves `state` across `grid` (strictly increasing, starting at 0) and
/// records the observer's output at every grid point.
pub fn evolve_sampled<F>(
    propagator: &Propagator,
    state: &SectorState,
    grid: &[f64],
    mut observer: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &SectorState) -> Result<TrajectoryRecord>,
{
    let mut records = Vec::with_capacity(grid.len());
    let n_atoms = state.atom_count();
    propagator.sample_amplitudes(state.amplitudes(), grid, |index, amplitudes| {
        let snapshot = SectorState::from_amplitudes(n_atoms, amplitudes.to_vec())?;
        records.push(observer(grid[index], &snapshot)?);
        Ok(())
    })?;
    Ok(Trajectory {
        atom_count: n_atoms,
        times: grid.to_vec(),
        records,
    })
}

/// Uniform grid of `samples` points over `[0, tau_max]`.
pub fn uniform_grid(tau_max: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 {
        return Err(Error::InvalidGrid("need at least two samples".into()));
    }
    if !(tau_max > 0.0) || !tau_max.is_finite() {
        return Err(Error::InvalidGrid(format!("tau_max must be positive, got {tau_max}")));
    }
    let last = (samples - 1) as f64;
    Ok((0..samples).map(|i| tau_max * i as f64 / last).collect())
}

/// Collective-spin state of `N` two-level atoms, Dicke index `k` with
/// `J^z = N/2 - k`.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeState {
    atom_count: usize,
    amplitudes: Vec<Complex64>,
}

impl DickeState {
    /// `|J, J^z = J>`: every atom in `m_f = 0`.
    pub fn top(n_atoms: usize) -> Self {
        let mut amplitudes = vec![ZERO; n_atoms + 1];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            atom_count: n_atoms,
            amplitudes,
        }
    }

    pub fn from_amplitudes(n_atoms: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != n_atoms + 1 {
            return Err(Error::DimensionMismatch {
                expected: n_atoms + 1,
                actual: amplitudes.len(),
            });
        }
        Ok(Self {
            atom_count: n_atoms,
            amplitudes,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Propagator for a [`DickeOperator`], one sub-propagator per parity chain.
pub struct DickePropagator {
    atom_count: usize,
    chains: Vec<(Propagator, Vec<usize>)>,
}

impl DickePropagator {
    pub fn new(op: &DickeOperator, time_unit: f64, config: PropagatorConfig) -> Result<Self> {
        let chains = op
            .parity_chains()
            .into_iter()
            .map(|(chain, indices)| Ok((Propagator::new(&chain, time_unit, config)?, indices)))
            .collect::<Result<_>>()?;
        Ok(Self {
            atom_count: op.atom_count(),
            chains,
        })
    }

    pub fn evolve(&self, state: &DickeState, tau: f64) -> Result<DickeState> {
        if state.atom_count != self.atom_count {
            return Err(Error::AtomNumberMismatch {
                left: state.atom_count,
                right: self.atom_count,
            });
        }
        let mut out = vec![ZERO; state.amplitudes.len()];
        for (prop, indices) in &self.chains {
            let sub: Vec<Complex64> = indices.iter().map(|&k| state.amplitudes[k]).collect();
            if sub.iter().all(|c| *c == ZERO) {
                continue;
            }
            let evolved = prop.evolve_amplitudes(&sub, tau)?;
            for (&k, c) in indices.iter().zip(evolved) {
                out[k] = c;
            }
        }
        Ok(DickeState {
            atom_count: self.atom_count,
            amplitudes: out,
        })
    }

    /// States at every grid time.
    pub fn sample(&self, state: &DickeState, grid: &[f64]) -> Result<Vec<DickeState>> {
        validate_grid(grid)?;
        let mut out: Vec<DickeState> = grid
            .iter()
            .map(|_| DickeState {
                atom_count: self.atom_count,
                amplitudes: vec![ZERO; state.amplitudes.len()],
            })
            .collect();
        for (prop, indices) in &self.chains {
            let sub: Vec<Complex64> = indices.iter().map(|&k| state.amplitudes[k]).collect();
            if sub.iter().all(|c| *c == ZERO) {
                continue;
            }
            prop.sample_amplitudes(&sub, grid, |index, amplitudes| {
                for (&k, c) in indices.iter().zip(amplitudes) {
                    out[index].amplitudes[k] = *c;
                }
                Ok(())
            })?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::ModelParams;
    use crate::hamiltonian::build_spin_hamiltonian;

    fn random_state(n_atoms: usize) -> SectorState {
        let d = crate::basis::sector_dimension(n_atoms);
        let amps = (0..d)
            .map(|i| Complex64::new((1.3 * i as f64 + 0.2).sin(), (0.7 * i as f64).cos()))
            .collect();
        SectorState::from_amplitudes(n_atoms, amps)
            .unwrap()
            .normalized()
            .unwrap()
    }

    fn config(method: Method) -> PropagatorConfig {
        PropagatorConfig {
            method,
            ..PropagatorConfig::default()
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let h = build_spin_hamiltonian(&ModelParams::new(40, 2.0)).unwrap();
        let s = random_state(40);
        for method in [Method::Eigen, Method::Krylov] {
            let out = evolve(&s, &h, 2.0, 0.0, config(method)).unwrap();
            assert_eq!(out, s);
        }
    }

    #[test]
    fn half_steps_compose() {
        let h = build_spin_hamiltonian(&ModelParams::new(60, 1.0)).unwrap();
        let s = random_state(60);
        for method in [Method::Eigen, Method::Krylov] {
            let prop = Propagator::new(&h, 1.0, config(method)).unwrap();
            let full = prop.evolve(&s, 0.03).unwrap();
            let halves = prop.evolve(&prop.evolve(&s, 0.015).unwrap(), 0.015).unwrap();
            assert!(full.distance(&halves).unwrap() < 1e-9, "{method:?}");
            assert!((full.norm_sqr().sqrt() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn strategies_agree() {
        let h = build_spin_hamiltonian(&ModelParams::new(200, 1.0)).unwrap();
        let s = random_state(200);
        let a = evolve(&s, &h, 1.0, 0.01, config(Method::Eigen)).unwrap();
        let b = evolve(&s, &h, 1.0, 0.01, config(Method::Krylov)).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-8);
    }

    #[test]
    fn time_unit_scales_time() {
        let p = ModelParams::new(10, 3.0);
        let h = build_spin_hamiltonian(&p).unwrap();
        let s = SectorState::polar(10).unwrap();
        let a = evolve(&s, &h, 3.0, 0.2, config(Method::Eigen)).unwrap();
        let h1 = build_spin_hamiltonian(&ModelParams::new(10, 1.0)).unwrap();
        let b = evolve(&s, &h1, 1.0, 0.2, config(Method::Eigen)).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = build_spin_hamiltonian(&ModelParams::new(10, 1.0)).unwrap();
        let prop = Propagator::new(&h, 1.0, PropagatorConfig::default()).unwrap();
        let s = SectorState::polar(12).unwrap();
        assert!(matches!(prop.evolve(&s, 0.1), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_time_unit_rejected() {
        let h = build_spin_hamiltonian(&ModelParams::new(10, 0.0)).unwrap();
        assert!(Propagator::new(&h, 0.0, PropagatorConfig::default()).is_err());
    }

    #[test]
    fn krylov_failure_reports_residual() {
        let h = build_spin_hamiltonian(&ModelParams::new(400, 1.0)).unwrap();
        let cfg = PropagatorConfig {
            method: Method::Krylov,
            krylov_dim: 3,
            max_halvings: 1,
            ..PropagatorConfig::default()
        };
        let err = evolve(&random_state(400), &h, 1.0, 1.0, cfg).unwrap_err();
        assert!(matches!(err, Error::KrylovConvergence { residual, .. } if residual > 1e-10));
    }

    #[test]
    fn grid_validation() {
        let h = build_spin_hamiltonian(&ModelParams::new(4, 1.0)).unwrap();
        let prop = Propagator::new(&h, 1.0, PropagatorConfig::default()).unwrap();
        let s = SectorState::polar(4).unwrap();
        let observer = |_: f64, _: &SectorState| -> Result<TrajectoryRecord> { unreachable!() };
        assert!(evolve_sampled(&prop, &s, &[0.1, 0.2], observer).is_err());
        assert!(evolve_sampled(&prop, &s, &[0.0, 0.2, 0.2], observer).is_err());
        assert!(evolve_sampled(&prop, &s, &[], observer).is_err());
        assert!(uniform_grid(1.0, 1).is_err());
        assert_eq!(uniform_grid(1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn observer_errors_carry_grid_index() {
        let h = build_spin_hamiltonian(&ModelParams::new(4, 1.0)).unwrap();
        let prop = Propagator::new(&h, 1.0, PropagatorConfig::default()).unwrap();
        let s = SectorState::polar(4).unwrap();
        let err = evolve_sampled(&prop, &s, &[0.0, 0.1, 0.2], |tau, _| {
            if tau > 0.15 {
                Err(Error::InvalidParameter("boom".into()))
            } else {
                Ok(TrajectoryRecord {
                    xi_plus: 1.0,
                    xi_minus: 1.0,
                    theta_plus: 0.0,
                    theta_minus: 0.0,
                    e3_bits: 0.0,
                    pop_m0: 1.0,
                    quad_criterion: 1.0,
                    norm_error: 0.0,
                })
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::AtGridIndex { index: 2, .. }));
    }

    #[test]
    fn dicke_chain_split_preserves_norm() {
        let op = crate::hamiltonian::build_oat_reference(&ModelParams::new(21, 1.0)).unwrap();
        let prop = DickePropagator::new(&op, 1.0, PropagatorConfig::default()).unwrap();
        let out = prop.evolve(&DickeState::top(21), 0.05).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        // The top state never leaves the even chain.
        assert!(out.amplitudes().iter().skip(1).step_by(2).all(|c| c.norm() == 0.0));
    }
}
