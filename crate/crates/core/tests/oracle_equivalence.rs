use num_complex::Complex64;
use spinor_squeeze::basis::{ModelParams, SectorState};
use spinor_squeeze::hamiltonian::build_spin_hamiltonian;
use spinor_squeeze::observables::{angle_distance_mod_pi, measure, spin_moments, SpinSign};
use spinor_squeeze::oracle::Oracle;
use spinor_squeeze::propagator::{uniform_grid, Propagator, PropagatorConfig};

const QUADRATURE_SLOPE: f64 = 2.5;

const SIZES: [usize; 5] = [2, 4, 6, 8, 12];

fn grid_for(n: usize) -> Vec<f64> {
    let tau_opt = 3f64.powf(1.0 / 6.0) * (n as f64).powf(-2.0 / 3.0) / 4.0;
    uniform_grid(3.0 * tau_opt, 40).unwrap()
}

fn sector_states(params: &ModelParams, grid: &[f64]) -> Vec<SectorState> {
    let h = build_spin_hamiltonian(params).unwrap();
    let prop = Propagator::new(&h, params.lambda_a_prime, PropagatorConfig::default()).unwrap();
    let polar = SectorState::polar(params.atom_count).unwrap();
    grid.iter().map(|&t| prop.evolve(&polar, t).unwrap()).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn sector_projection_reproduces_hamiltonian() {
    for n in [2usize, 4, 6, 8, 12] {
        let params = ModelParams::new(n, 0.7);
        let oracle = Oracle::new(&params).unwrap();
        let full = oracle.full_hamiltonian();
        let projected = oracle.sector_projection(&full);
        let h = build_spin_hamiltonian(&params).unwrap();
        for r in 0..h.dimension() {
            for c in 0..h.dimension() {
                let diff = (projected[(r, c)] - Complex64::new(h.entry(r, c), 0.0)).norm();
                assert!(diff < 1e-12, "N={n} ({r},{c}) differs by {diff}");
            }
        }
        assert!(oracle.sector_leakage(&full) < 1e-12, "N={n} sector not closed");
    }
}

#[test]
fn trajectories_match_oracle() {
    for n in SIZES {
        let params = ModelParams::new(n, 1.3);
        let grid = grid_for(n);
        let oracle = Oracle::new(&params).unwrap();
        let run = oracle.run(&grid);
        let states = sector_states(&params, &grid);
        let mut worst_quad = 0.0f64;
        for ((tau, fock), (state, rec)) in grid.iter().zip(&run.states).zip(states.iter().zip(&run.records)) {
            let embedded = oracle.embed(state).unwrap();
            let overlap = fock.fidelity(&embedded).sqrt();
            assert!(overlap >= 1.0 - 1e-10, "N={n} tau={tau}: overlap {overlap}");
            let (_, leak) = oracle.restrict(fock);
            assert!(leak < 1e-10, "N={n} tau={tau}: leak {leak}");

            let mine = measure(state).unwrap();
            let theirs = rec.record;
            assert!(
                rel(mine.xi_plus, theirs.xi_plus) < 1e-8,
                "N={n} tau={tau}: xi+ {} vs {}",
                mine.xi_plus,
                theirs.xi_plus
            );
            assert!(rel(mine.xi_minus, theirs.xi_minus) < 1e-8);
            assert!((mine.e3_bits - theirs.e3_bits).abs() < 1e-8);
            assert!((mine.pop_m0 - theirs.pop_m0).abs() < 1e-12);
            let spread = rec
                .entropies
                .iter()
                .fold(0.0f64, |m, e| m.max((e - rec.entropies[0]).abs()));
            assert!(spread < 1e-10, "oracle entropies {:?}", rec.entropies);
            assert!(rec.lz.abs() < 1e-12);

            for (sign, om) in [(SpinSign::Plus, rec.plus), (SpinSign::Minus, rec.minus)] {
                let m = spin_moments(state, sign).unwrap();
                let scale = n as f64;
                for (a, b) in [
                    (m.mean_x, om.mean[0]),
                    (m.mean_y, om.mean[1]),
                    (m.mean_z, om.mean[2]),
                    (m.cov_xx, om.cov_xx),
                    (m.cov_yy, om.cov_yy),
                    (m.cov_xy, om.cov_xy),
                ] {
                    assert!((a - b).abs() < 1e-9 * scale, "N={n} tau={tau} {sign:?}: {a} vs {b}");
                }
                // The angle is meaningful only away from isotropy.
                let anisotropy = ((om.cov_xx - om.cov_yy).powi(2) + 4.0 * om.cov_xy.powi(2)).sqrt();
                if anisotropy > 1e-6 * scale {
                    let theta = if sign == SpinSign::Plus {
                        mine.theta_plus
                    } else {
                        mine.theta_minus
                    };
                    assert!(
                        angle_distance_mod_pi(theta, om.theta_star) < 1e-6,
                        "N={n} tau={tau} angle"
                    );
                }
            }

            // The phase-locked modes are only approximately bosonic; compare
            // while the m_f = 0 population dominates.
            let depletion = 1.0 - theirs.pop_m0;
            if theirs.pop_m0 >= 0.9 {
                let quad_residual = (mine.quad_criterion - theirs.quad_criterion).abs();
                worst_quad = worst_quad.max(quad_residual / depletion.max(1e-12));
                assert!(
                    quad_residual <= QUADRATURE_SLOPE * depletion + 1e-9,
                    "N={n} tau={tau}: quadrature {} vs {} (depletion {depletion})",
                    mine.quad_criterion,
                    theirs.quad_criterion
                );
            }
        }
        eprintln!("N={n}: max quadrature residual / depletion = {worst_quad:.3}");
    }
}

#[test]
fn zeeman_term_leaves_polar_dynamics_unchanged() {
    let p = 2.0 * std::f64::consts::PI * 100.0;
    let lambda = 2.0 * std::f64::consts::PI * 100.0 / 1e5;
    for n in SIZES {
        let grid = grid_for(n);
        let plain = Oracle::new(&ModelParams::new(n, lambda)).unwrap().run(&grid);
        let shifted = Oracle::new(&ModelParams::new(n, lambda).with_zeeman(p))
            .unwrap()
            .run(&grid);
        for (a, b) in plain.states.iter().zip(&shifted.states) {
            assert!(a.fidelity(b) >= 1.0 - 1e-10, "N={n}: fidelity {}", a.fidelity(b));
        }
    }
}

#[test]
fn mode_commutator_stays_small() {
    let n = 12;
    let oracle = Oracle::new(&ModelParams::new(n, 1.0)).unwrap();
    let run = oracle.run(&grid_for(n));
    for rec in &run.records {
        assert!(rec.commutator < 0.05 * n as f64, "{}", rec.commutator);
    }
}
