use collideq_core::blp::{blp_measure, BlpGrid};
use collideq_core::collision::{embedded_step_channel, evolve, steady_state, ModelConfig, Setting};
use collideq_core::lindblad::{integrate, LindbladSpec};
use collideq_core::metrics::{
    fidelity, fidelity_from_delta_beta, gibbs_qubit, negativity_2, negativity_bipartition, trace_distance,
};
use collideq_core::tensor::{
    eigvalsh, embed, expm_i_hermitian, hermitize, identity, kron, max_abs_diff, partial_trace, partial_transpose,
    ComplexMatrix, DensityMatrix, HermitianOp, QubitRegister, C64,
};
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn reg(labels: &[&str]) -> QubitRegister {
    QubitRegister::new(labels.iter().copied()).unwrap()
}

fn matrix(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim)
        .prop_map(move |v| ComplexMatrix::from_iterator(dim, dim, v.into_iter().map(|(r, i)| C64::new(r, i))))
}

fn hermitian(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    matrix(dim).prop_map(|m| hermitize(&m))
}

fn density(labels: &'static [&'static str]) -> impl Strategy<Value = DensityMatrix> {
    matrix(1 << labels.len()).prop_map(move |a| {
        let m = &a * a.adjoint() + identity(a.nrows()).scale(1e-3);
        let tr = m.trace();
        DensityMatrix::new(reg(labels), m / tr).unwrap()
    })
}

fn unitary(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    hermitian(dim).prop_map(move |h| {
        let n = (dim as f64).log2() as usize;
        let labels: Vec<String> = (0..n).map(|k| format!("q{k}")).collect();
        let op = HermitianOp::new(QubitRegister::new(labels).unwrap(), h).unwrap();
        expm_i_hermitian(&op, 1.0).unwrap().into_matrix()
    })
}

fn config() -> impl Strategy<Value = ModelConfig> {
    (prop_oneof![Just(Setting::I), Just(Setting::II)], 0.1f64..3.0, 0.005f64..0.5, 0.0f64..0.97)
        .prop_map(|(s, beta, dt, dd)| ModelConfig::new(s, beta, dt, dd * FRAC_PI_2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kron_is_associative(a in matrix(2), b in matrix(2), c in matrix(2)) {
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(max_abs_diff(&left, &right) < 1e-14);
    }

    #[test]
    fn embedding_composes(a in matrix(2), b in matrix(2)) {
        let r = reg(&["x", "y", "z"]);
        let sequential = embed(&a, &["z"], &r).unwrap() * embed(&b, &["x"], &r).unwrap();
        let joint = embed(&kron(&b, &a), &["x", "z"], &r).unwrap();
        prop_assert!(max_abs_diff(&sequential, &joint) < 1e-13);
    }

    #[test]
    fn hermitian_exponential_is_additive(h in hermitian(4), t1 in -2.0f64..2.0, t2 in -2.0f64..2.0) {
        let op = HermitianOp::new(reg(&["a", "b"]), h).unwrap();
        let u1 = expm_i_hermitian(&op, t1).unwrap().into_matrix();
        let u2 = expm_i_hermitian(&op, t2).unwrap().into_matrix();
        let u12 = expm_i_hermitian(&op, t1 + t2).unwrap().into_matrix();
        prop_assert!(max_abs_diff(&(u1 * u2), &u12) < 1e-11);
    }

    #[test]
    fn local_evolution_commutes_with_partial_trace(
        rho in density(&["a"]), sigma in density(&["b"]), u in unitary(2), v in unitary(2)
    ) {
        let joint = rho.tensor(&sigma).unwrap();
        let uv = kron(&u, &v);
        let evolved = DensityMatrix::new(joint.register().clone(), &uv * joint.matrix() * uv.adjoint()).unwrap();
        let reduced = partial_trace(&evolved, &["a"]).unwrap();
        prop_assert!(max_abs_diff(reduced.matrix(), &(&u * rho.matrix() * u.adjoint())) < 1e-12);
    }

    #[test]
    fn partial_trace_keeps_unit_trace(rho in density(&["a", "b", "c"])) {
        for keep in [&["a"][..], &["b", "c"], &["c", "a"]] {
            let r = partial_trace(&rho, keep).unwrap();
            prop_assert!((r.matrix().trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_transposes_share_a_spectrum(rho in density(&["a", "b"])) {
        let x = eigvalsh(&partial_transpose(&rho, &["b"]).unwrap());
        let y = eigvalsh(&partial_transpose(&rho, &["a"]).unwrap());
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn fuchs_van_de_graaf(rho in density(&["a"]), sigma in density(&["a"])) {
        let f = fidelity(&rho, &sigma).unwrap();
        let d = trace_distance(&rho, &sigma).unwrap();
        prop_assert!(1.0 - f.sqrt() <= d + 1e-9);
        prop_assert!(d <= (1.0 - f).max(0.0).sqrt() + 1e-9);
    }

    #[test]
    fn negativity_ignores_local_unitaries(rho in density(&["a", "b"]), u in unitary(2), v in unitary(2)) {
        let uv = kron(&u, &v);
        let rotated = DensityMatrix::new(rho.register().clone(), &uv * rho.matrix() * uv.adjoint()).unwrap();
        prop_assert!((negativity_2(&rho).unwrap() - negativity_2(&rotated).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn three_qubit_negativity_ignores_local_unitaries(rho in density(&["a", "b", "c"]), u in unitary(2)) {
        let w = kron(&kron(&identity(2), &u), &identity(2));
        let rotated = DensityMatrix::new(rho.register().clone(), &w * rho.matrix() * w.adjoint()).unwrap();
        for part in ["a", "b", "c"] {
            let n1 = negativity_bipartition(&rho, part).unwrap();
            let n2 = negativity_bipartition(&rotated, part).unwrap();
            prop_assert!((n1 - n2).abs() < 1e-10);
        }
    }

    #[test]
    fn gibbs_fidelity_closed_form(beta in 0.05f64..5.0, delta_beta in -0.04f64..3.0, omega in 0.2f64..3.0) {
        let a = gibbs_qubit(beta, omega).unwrap();
        let b = gibbs_qubit(beta + delta_beta, omega).unwrap();
        let f = fidelity(&b, &a).unwrap();
        prop_assert!((f - fidelity_from_delta_beta(beta, delta_beta, omega)).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn step_channel_is_cptp(cfg in config()) {
        let ch = embedded_step_channel(&cfg).unwrap();
        prop_assert!(ch.trace_preservation_error() < 1e-12);
        prop_assert!(eigvalsh(&ch.choi())[0] >= -1e-8);
    }

    #[test]
    fn setting_one_homogenises(beta in 0.1f64..3.0, dt in 0.005f64..0.5, dd in 0.0f64..0.97) {
        let cfg = ModelConfig::new(Setting::I, beta, dt, dd * FRAC_PI_2);
        let rho = steady_state(&embedded_step_channel(&cfg).unwrap()).unwrap();
        let g = gibbs_qubit(beta, 1.0).unwrap().into_matrix();
        prop_assert!(max_abs_diff(rho.matrix(), &kron(&g, &g)) < 1e-8);
    }

    #[test]
    fn setting_two_heat_balances_system_energy(beta in 0.1f64..3.0, dt in 0.01f64..0.5, dd in 0.0f64..0.97) {
        let cfg = ModelConfig::new(Setting::II, beta, dt, dd * FRAC_PI_2);
        let series = evolve(&cfg, &gibbs_qubit(0.3, 1.0).unwrap(), 30).unwrap();
        for w in series.windows(2) {
            let d_es = w[1].system.populations()[0] - w[0].system.populations()[0];
            prop_assert!((w[1].heats[0].q_sa + w[1].heats[1].q_sa + d_es).abs() < 1e-12);
        }
    }

    #[test]
    fn markovian_blp_vanishes(cfg in config()) {
        let cfg = ModelConfig { delta: 0.0, ..cfg };
        prop_assert_eq!(blp_measure(&cfg, 200, BlpGrid::new(8, 8).unwrap()).unwrap().value, 0.0);
    }

    #[test]
    fn lindblad_preserves_trace_and_positivity(beta in 0.1f64..5.0, rho in density(&["S"])) {
        let spec = LindbladSpec::thermal_qubit(beta, 1.0, 1.0, true).unwrap();
        for p in integrate(&spec, &rho, 2.0, 1e-2).unwrap() {
            prop_assert!((p.state.matrix().trace().re - 1.0).abs() < 1e-10);
            prop_assert!(p.state.min_eigenvalue() >= -1e-9);
        }
    }
}
