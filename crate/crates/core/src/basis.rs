//! The zero-magnetization sector of three bosonic modes.
//!
//! Basis vectors are `|N-2n, n, n>` with modes ordered `(m_f = 0, +1, -1)`;
//! `n` counts the `(+1, -1)` pairs scattered out of the `m_f = 0` condensate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the atom number accepted by the sector builders.
pub const DEFAULT_MAX_ATOMS: usize = 1_000_000;

/// Environment variable overriding [`DEFAULT_MAX_ATOMS`].
pub const MAX_ATOMS_ENV: &str = "SPINOR_SQUEEZE_MAX_N";

/// Atom-number guard, honoring `SPINOR_SQUEEZE_MAX_N` when it parses.
pub fn max_atom_number() -> usize {
    std::env::var(MAX_ATOMS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_ATOMS)
}

/// Number of sector basis states for `n_atoms` atoms.
pub fn sector_dimension(n_atoms: usize) -> usize {
    n_atoms / 2 + 1
}

/// Occupations `(n_0, n_+1, n_-1)` of sector basis vector `pairs`.
pub fn occupations(n_atoms: usize, pairs: usize) -> (usize, usize, usize) {
    debug_assert!(2 * pairs <= n_atoms);
    (n_atoms - 2 * pairs, pairs, pairs)
}

/// Physical parameters of the single-mode spin Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub atom_count: usize,
    /// Effective spin-dependent coupling, rad/s.
    pub lambda_a_prime: f64,
    /// Linear Zeeman strength, rad/s.
    #[serde(default)]
    pub zeeman_p: f64,
}

impl ModelParams {
    pub fn new(atom_count: usize, lambda_a_prime: f64) -> Self {
        Self {
            atom_count,
            lambda_a_prime,
            zeeman_p: 0.0,
        }
    }

    pub fn with_zeeman(mut self, p: f64) -> Self {
        self.zeeman_p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.atom_count == 0 {
            return Err(Error::InvalidParameter("atom number must be positive".into()));
        }
        if !self.lambda_a_prime.is_finite() || !self.zeeman_p.is_finite() {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        if self.lambda_a_prime < 0.0 {
            log::warn!(
                "lambda_a_prime = {} < 0: ferromagnetic regime, outside the anti-ferromagnetic scheme",
                self.lambda_a_prime
            );
        }
        Ok(())
    }
}

/// Pure state on the zero-magnetization sector for a fixed atom number.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorState {
    atom_count: usize,
    amplitudes: Vec<Complex64>,
}

impl SectorState {
    /// Wraps raw amplitudes; the length must equal `sector_dimension(n_atoms)`.
    /// No normalization is applied.
    pub fn from_amplitudes(n_atoms: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidParameter("atom number must be positive".into()));
        }
        let expected = sector_dimension(n_atoms);
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: amplitudes.len(),
            });
        }
        Ok(Self {
            atom_count: n_atoms,
            amplitudes,
        })
    }

    /// All atoms in `m_f = 0`.
    pub fn polar(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidParameter("polar state needs at least one atom".into()));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); sector_dimension(n_atoms)];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            atom_count: n_atoms,
            amplitudes,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Copy rescaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sqr: norm * norm });
        }
        Ok(Self {
            atom_count: self.atom_count,
            amplitudes: self.amplitudes.iter().map(|c| c / norm).collect(),
        })
    }

    /// `<self|other>`; rejects states with different atom numbers.
    pub fn inner(&self, other: &SectorState) -> Result<Complex64> {
        self.check_same_atoms(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &SectorState) -> Result<f64> {
        self.check_same_atoms(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    pub(crate) fn check_same_atoms(&self, other: &SectorState) -> Result<()> {
        if self.atom_count != other.atom_count {
            return Err(Error::AtomNumberMismatch {
                left: self.atom_count,
                right: other.atom_count,
            });
        }
        Ok(())
    }

    pub(crate) fn require_normalized(&self, tol: f64) -> Result<()> {
        let norm_sqr = self.norm_sqr();
        if (norm_sqr - 1.0).abs() > tol {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(())
    }

    pub fn to_snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            atom_count: self.atom_count,
            amplitudes: self.amplitudes.iter().map(|c| (c.re, c.im)).collect(),
        }
    }

    pub fn from_snapshot(snapshot: &StateSnapshot) -> Result<Self> {
        Self::from_amplitudes(
            snapshot.atom_count,
            snapshot
                .amplitudes
                .iter()
                .map(|&(re, im)| Complex64::new(re, im))
                .collect(),
        )
    }
}

/// Checkpoint record: atom number plus `(re, im)` pairs in pair-count order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub atom_count: usize,
    pub amplitudes: Vec<(f64, f64)>,
}

impl StateSnapshot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Initial condition of the scheme: every atom in `m_f = 0`.
pub fn init_polar_state(params: &ModelParams) -> Result<SectorState> {
    params.validate()?;
    SectorState::polar(params.atom_count)
}

/// Fraction of atoms in `m_f = 0`, `sum_n |c_n|^2 (N - 2n) / N`.
pub fn population_fraction_m0(state: &SectorState) -> f64 {
    let n_atoms = state.atom_count as f64;
    state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(pairs, c)| c.norm_sqr() * (n_atoms - 2.0 * pairs as f64))
        .sum::<f64>()
        / n_atoms
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn polar_state_shapes() {
        let s = init_polar_state(&ModelParams::new(10, 1.0)).unwrap();
        assert_eq!(s.dimension(), 6);
        assert_eq!(s.amplitudes()[0], c(1.0));
        assert!(s.amplitudes()[1..].iter().all(|a| *a == c(0.0)));

        assert_eq!(SectorState::polar(2).unwrap().dimension(), 2);

        let big = SectorState::polar(100_000).unwrap();
        assert_eq!(big.dimension(), 50_001);
        assert_eq!(big.norm_sqr(), 1.0);
    }

    #[test]
    fn empty_condensate_rejected() {
        assert!(matches!(
            init_polar_state(&ModelParams::new(0, 1.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn dimension_formula() {
        assert_eq!(sector_dimension(1), 1);
        assert_eq!(sector_dimension(2), 2);
        assert_eq!(sector_dimension(1000), 501);
        assert_eq!(occupations(1, 0), (1, 0, 0));
    }

    #[test]
    fn m0_population_examples() {
        assert_eq!(population_fraction_m0(&SectorState::polar(7).unwrap()), 1.0);

        let paired = SectorState::from_amplitudes(4, vec![c(0.0), c(0.0), c(1.0)]).unwrap();
        assert_eq!(population_fraction_m0(&paired), 0.0);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let half = SectorState::from_amplitudes(4, vec![c(h), c(h), c(0.0)]).unwrap();
        assert!((population_fraction_m0(&half) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mixing_atom_numbers_rejected() {
        let a = SectorState::polar(4).unwrap();
        let b = SectorState::polar(5).unwrap();
        assert!(matches!(a.inner(&b), Err(Error::AtomNumberMismatch { .. })));
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(matches!(
            SectorState::from_amplitudes(4, vec![c(1.0)]),
            Err(Error::DimensionMismatch { expected: 3, actual: 1 })
        ));
    }

    #[test]
    fn snapshot_json_round_trip() {
        let s =
            SectorState::from_amplitudes(5, vec![Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.7), c(0.3)]).unwrap();
        let json = s.to_snapshot().to_json().unwrap();
        let back = SectorState::from_snapshot(&StateSnapshot::from_json(&json).unwrap()).unwrap();
        assert_eq!(s, back);
    }

    proptest! {
        #[test]
        fn m0_fraction_in_unit_interval(
            n_atoms in 1usize..60,
            raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 31),
        ) {
            let dim = sector_dimension(n_atoms);
            let amps: Vec<Complex64> = raw[..dim].iter().map(|&(r, i)| Complex64::new(r, i)).collect();
            prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-6);
            let s = SectorState::from_amplitudes(n_atoms, amps).unwrap().normalized().unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            let f = population_fraction_m0(&s);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            let polar_weight = s.amplitudes()[0].norm_sqr();
            if (f - 1.0).abs() < 1e-12 {
                prop_assert!((polar_weight - 1.0).abs() < 1e-9);
            }
        }
    }
}
