//! Squeezing parameters, three-mode entanglement and the two-mode quadrature
//! criterion, evaluated from sector amplitudes in closed form.
//!
//! `J_+` and `J_-` are the collective spins of the two-level pairs
//! `(|+>, |0>)` and `(|->, |0>)` with `|+-> = (|+1> +- |-1>)/sqrt2`, and
//! `J^z = (n_0 - n_{+-}) / 2`. With `A = a_{+-}^dag a_0` we have
//! `J^x = (A + A^dag)/2` and `J^y = i (A - A^dag)/2`, so every transverse
//! second moment follows from `<A^2>` and `<A A^dag + A^dag A>`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{population_fraction_m0, ModelParams, SectorState};
use crate::error::{Error, Result};
use crate::hamiltonian::build_oat_reference;
use crate::propagator::{DickePropagator, DickeState, PropagatorConfig, TrajectoryRecord};

/// Relative size below which `<J^n2>^2 + <J^z>^2` counts as degenerate.
const DEGENERATE_DENOMINATOR: f64 = 1e-12;
/// Relative anisotropy below which the optimal angle is a tie, resolved to 0.
const ISOTROPIC_TOLERANCE: f64 = 1e-12;
const NORMALIZATION_TOLERANCE: f64 = 1e-8;
const ENTROPY_AGREEMENT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinSign {
    Plus,
    Minus,
}

impl SpinSign {
    fn factor(self) -> f64 {
        match self {
            SpinSign::Plus => 1.0,
            SpinSign::Minus => -1.0,
        }
    }
}

/// First moments and symmetrized transverse covariance of a collective spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub sign: SpinSign,
    pub atom_count: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_z: f64,
    pub cov_xx: f64,
    pub cov_yy: f64,
    pub cov_xy: f64,
}

impl SpinMoments {
    /// `Var(cos(theta) J^x + sin(theta) J^y)`.
    pub fn variance_at(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        c * c * self.cov_xx + s * s * self.cov_yy + 2.0 * s * c * self.cov_xy
    }

    /// `<J^n2>^2 + <J^z>^2` with `n2 = [-sin(theta), cos(theta), 0]`.
    pub fn denominator_at(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let perpendicular = -s * self.mean_x + c * self.mean_y;
        perpendicular * perpendicular + self.mean_z * self.mean_z
    }

    fn check_denominator(&self, denominator: f64) -> Result<()> {
        let scale = self.atom_count as f64 / 2.0;
        if !(denominator > DEGENERATE_DENOMINATOR * scale * scale) {
            return Err(Error::DegenerateDenominator { denominator });
        }
        Ok(())
    }
}

/// Squeezing minimized over the in-plane angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingResult {
    pub xi_min: f64,
    /// In `[0, pi)`.
    pub theta_star: f64,
    pub moments: SpinMoments,
}

impl SqueezingResult {
    pub fn xi_at(&self, theta: f64) -> Result<f64> {
        squeezing_parameter(&self.moments, theta)
    }
}

/// Moments of `J_+` or `J_-` on a sector state.
///
/// Transverse first moments vanish identically: `J^{x,y}` shift `L_z` by one
/// unit, out of the sector.
pub fn spin_moments(state: &SectorState, sign: SpinSign) -> Result<SpinMoments> {
    state.require_normalized(NORMALIZATION_TOLERANCE)?;
    let n_atoms = state.atom_count();
    let nf = n_atoms as f64;
    let c = state.amplitudes();

    let mut mean_z = 0.0;
    let mut anticommutator = 0.0;
    for (pairs, amp) in c.iter().enumerate() {
        let w = amp.norm_sqr();
        let n = pairs as f64;
        let n0 = nf - 2.0 * n;
        mean_z += w * (nf - 3.0 * n) / 2.0;
        // <n_0 (n_a + 1) + n_a (n_0 + 1)> with <n_a> = n on the sector.
        anticommutator += w * (2.0 * n0 * n + n0 + n);
    }
    // <A^2> = +-<a_{+1}^dag a_{-1}^dag a_0 a_0>; the a_{+-1}^dag^2 parts leave the sector.
    let a_squared: Complex64 = c
        .windows(2)
        .enumerate()
        .map(|(pairs, w)| {
            let n0 = nf - 2.0 * pairs as f64;
            w[1].conj() * w[0] * ((pairs as f64 + 1.0) * (n0 * (n0 - 1.0)).sqrt())
        })
        .sum::<Complex64>()
        * sign.factor();

    Ok(SpinMoments {
        sign,
        atom_count: n_atoms,
        mean_x: 0.0,
        mean_y: 0.0,
        mean_z,
        cov_xx: (anticommutator + 2.0 * a_squared.re) / 4.0,
        cov_yy: (anticommutator - 2.0 * a_squared.re) / 4.0,
        cov_xy: -a_squared.im / 2.0,
    })
}

/// Moments of the collective spin of a Dicke state (sign reported as `Plus`).
pub fn dicke_moments(state: &DickeState) -> Result<SpinMoments> {
    let norm_sqr = state.norm_sqr();
    if (norm_sqr - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { norm_sqr });
    }
    let n_atoms = state.atom_count();
    let j = n_atoms as f64 / 2.0;
    let jj = j * (j + 1.0);
    let c = state.amplitudes();
    let m_of = |k: usize| j - k as f64;
    let raise = |m: f64| (jj - m * (m + 1.0)).max(0.0).sqrt();

    let mut mean_z = 0.0;
    let mut anticommutator = 0.0;
    let mut j_plus = Complex64::new(0.0, 0.0);
    let mut j_plus_sq = Complex64::new(0.0, 0.0);
    for (k, amp) in c.iter().enumerate() {
        let m = m_of(k);
        let w = amp.norm_sqr();
        mean_z += w * m;
        anticommutator += w * 2.0 * (jj - m * m);
        if k >= 1 {
            j_plus += c[k - 1].conj() * amp * raise(m);
        }
        if k >= 2 {
            j_plus_sq += c[k - 2].conj() * amp * (raise(m) * raise(m + 1.0));
        }
    }
    let (mean_x, mean_y) = (j_plus.re, j_plus.im);
    let xx = (anticommutator + 2.0 * j_plus_sq.re) / 4.0;
    let yy = (anticommutator - 2.0 * j_plus_sq.re) / 4.0;
    let xy = j_plus_sq.im / 2.0;
    Ok(SpinMoments {
        sign: SpinSign::Plus,
        atom_count: n_atoms,
        mean_x,
        mean_y,
        mean_z,
        cov_xx: xx - mean_x * mean_x,
        cov_yy: yy - mean_y * mean_y,
        cov_xy: xy - mean_x * mean_y,
    })
}

/// `xi^theta = N Var(J^n1) / (<J^n2>^2 + <J^z>^2)`.
pub fn squeezing_parameter(moments: &SpinMoments, theta: f64) -> Result<f64> {
    let denominator = moments.denominator_at(theta);
    moments.check_denominator(denominator)?;
    Ok(moments.atom_count as f64 * moments.variance_at(theta) / denominator)
}

/// Smallest eigenvalue and its direction for `[[xx, xy], [xy, yy]]`.
fn minimal_direction(xx: f64, yy: f64, xy: f64) -> (f64, f64) {
    let mean = 0.5 * (xx + yy);
    let half_diff = 0.5 * (xx - yy);
    let radius = half_diff.hypot(xy);
    if radius <= ISOTROPIC_TOLERANCE * mean.abs() {
        return (mean - radius, 0.0);
    }
    // atan2 gives the major axis; the minor axis is a quarter turn away.
    let theta = (0.5 * (2.0 * xy).atan2(xx - yy) + FRAC_PI_2).rem_euclid(PI);
    (mean - radius, if theta >= PI { 0.0 } else { theta })
}

/// Closed-form minimum over `theta`.
///
/// Exact when the transverse means vanish, which holds on every sector state
/// and on parity-definite Dicke states.
pub fn optimal_squeezing(moments: &SpinMoments) -> Result<SqueezingResult> {
    let (min_variance, theta_star) = minimal_direction(moments.cov_xx, moments.cov_yy, moments.cov_xy);
    let denominator = moments.denominator_at(theta_star);
    moments.check_denominator(denominator)?;
    Ok(SqueezingResult {
        xi_min: moments.atom_count as f64 * min_variance / denominator,
        theta_star,
        moments: *moments,
    })
}

/// Von Neumann entropy (bits) of a diagonal distribution, `0 log 0 = 0`.
fn entropy_bits<I: IntoIterator<Item = f64>>(probabilities: I) -> f64 {
    probabilities
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Reduced occupation distribution of one mode.
fn occupation_distribution(state: &SectorState, occupation: impl Fn(usize) -> usize) -> BTreeMap<usize, f64> {
    let mut dist = BTreeMap::new();
    for (pairs, amp) in state.amplitudes().iter().enumerate() {
        *dist.entry(occupation(pairs)).or_insert(0.0) += amp.norm_sqr();
    }
    dist
}

/// Single-mode entropies `[E(rho_+1), E(rho_-1), E(rho_0)]` in bits.
///
/// At fixed atom number each reduced density operator is diagonal in the
/// occupation basis.
pub fn mode_entropies(state: &SectorState) -> Result<[f64; 3]> {
    state.require_normalized(NORMALIZATION_TOLERANCE)?;
    let n_atoms = state.atom_count();
    let plus = entropy_bits(occupation_distribution(state, |n| n).into_values());
    let minus = entropy_bits(occupation_distribution(state, |n| n).into_values());
    let zero = entropy_bits(occupation_distribution(state, |n| n_atoms - 2 * n).into_values());
    Ok([plus, minus, zero])
}

/// `E_3 = (E(rho_+1) E(rho_-1) E(rho_0))^(1/3)` in bits.
pub fn three_mode_entanglement(state: &SectorState) -> Result<f64> {
    let entropies = mode_entropies(state)?;
    let [a, b, c] = entropies;
    let spread = a.max(b).max(c) - a.min(b).min(c);
    if spread > ENTROPY_AGREEMENT {
        return Err(Error::EntropyMismatch(entropies));
    }
    Ok((a * b * c).cbrt())
}

/// `min_theta (xi_+^theta + xi_-^(theta + pi/2)) / 2`; below 1 certifies
/// entanglement between the phase-locked modes `a'_{+-1}`.
pub fn quadrature_criterion(state: &SectorState) -> Result<f64> {
    let pop = population_fraction_m0(state);
    if pop < 0.9 {
        static WARNED: std::sync::Once = std::sync::Once::new();
        WARNED.call_once(|| {
            log::warn!(
                "m_f = 0 population {pop:.3} < 0.9: effective modes a'_(+-1) are far from bosonic (reported once)"
            )
        });
        log::debug!("m_f = 0 population {pop:.3} < 0.9");
    }
    let plus = spin_moments(state, SpinSign::Plus)?;
    let minus = spin_moments(state, SpinSign::Minus)?;
    let n = state.atom_count() as f64;
    // Transverse means vanish on the sector, so both denominators are <J^z>^2.
    let den_plus = plus.denominator_at(0.0);
    let den_minus = minus.denominator_at(0.0);
    plus.check_denominator(den_plus)?;
    minus.check_denominator(den_minus)?;
    // Var_-(theta + pi/2) is the quadratic form of the rotated covariance.
    let wp = n / (2.0 * den_plus);
    let wm = n / (2.0 * den_minus);
    let xx = wp * plus.cov_xx + wm * minus.cov_yy;
    let yy = wp * plus.cov_yy + wm * minus.cov_xx;
    let xy = wp * plus.cov_xy - wm * minus.cov_xy;
    Ok(minimal_direction(xx, yy, xy).0)
}

/// Every trajectory observable of one sector state.
pub fn measure(state: &SectorState) -> Result<TrajectoryRecord> {
    let norm_error = (state.norm_sqr().sqrt() - 1.0).abs();
    let plus = optimal_squeezing(&spin_moments(state, SpinSign::Plus)?)?;
    let minus = optimal_squeezing(&spin_moments(state, SpinSign::Minus)?)?;
    Ok(TrajectoryRecord {
        xi_plus: plus.xi_min,
        xi_minus: minus.xi_min,
        theta_plus: plus.theta_star,
        theta_minus: minus.theta_star,
        e3_bits: three_mode_entanglement(state)?,
        pop_m0: population_fraction_m0(state),
        quad_criterion: quadrature_criterion(state)?,
        norm_error,
    })
}

/// Distance between two angles modulo `pi`, in `[0, pi/2]`.
pub fn angle_distance_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Minimal squeezing of the one-axis-twisting reference `4 lambda' (J^x)^2`
/// started from every atom in `m_f = 0`, at each grid time.
pub fn oat_squeezing_curve(n_atoms: usize, lambda_a_prime: f64, grid: &[f64]) -> Result<Vec<f64>> {
    oat_squeezing_curve_with(n_atoms, lambda_a_prime, grid, PropagatorConfig::default())
}

pub fn oat_squeezing_curve_with(
    n_atoms: usize,
    lambda_a_prime: f64,
    grid: &[f64],
    config: PropagatorConfig,
) -> Result<Vec<f64>> {
    let op = build_oat_reference(&ModelParams::new(n_atoms, lambda_a_prime))?;
    let prop = DickePropagator::new(&op, lambda_a_prime, config)?;
    prop.sample(&DickeState::top(n_atoms), grid)?
        .iter()
        .enumerate()
        .map(|(index, s)| {
            dicke_moments(s)
                .and_then(|m| optimal_squeezing(&m))
                .map(|r| r.xi_min)
                .map_err(|e| Error::AtGridIndex {
                    index,
                    source: Box::new(e),
                })
        })
        .collect()
}
