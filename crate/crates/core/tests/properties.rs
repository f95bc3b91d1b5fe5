use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use proptest::prelude::*;

use pqkd::adversary::AttackModel;
use pqkd::gbs::{
    bob_conditional_state, channel_state, gbm_probabilities, gbm_teleport, gbs_basis, p_final_rate,
    p_suc, p_wrong, ChannelParam, GbsOutcome, KeyBit,
};
use pqkd::protocol::{
    classify, first_ordering_violation, read_transcript, run_protocol, Mode, ParsedRun,
    ProtocolConfig, RevealSchedule, Verdict,
};
use pqkd::quantum::{SingleQubitUnitary, StateVector};

const TOL: f64 = 1e-12;

fn param() -> impl Strategy<Value = ChannelParam> {
    (0.01f64..=1.0).prop_map(|x| ChannelParam::new(x).unwrap())
}

fn partial() -> impl Strategy<Value = ChannelParam> {
    (0.01f64..0.99).prop_map(|x| ChannelParam::new(x).unwrap())
}

/// Normalized single-qubit amplitudes.
fn amplitudes() -> impl Strategy<Value = (Complex64, Complex64)> {
    (
        0.0f64..std::f64::consts::PI,
        0.0f64..std::f64::consts::TAU,
        0.0f64..std::f64::consts::TAU,
    )
        .prop_map(|(theta, phi_a, phi_b)| {
            (
                Complex64::from_polar((theta / 2.0).cos(), phi_a),
                Complex64::from_polar((theta / 2.0).sin(), phi_b),
            )
        })
}

fn state(num_qubits: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << num_qubits)
        .prop_filter("non-degenerate", |v| {
            v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3
        })
        .prop_map(move |v| {
            let amps = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            StateVector::new(num_qubits, amps).unwrap()
        })
}

fn rotation() -> impl Strategy<Value = SingleQubitUnitary> {
    (
        0.0f64..std::f64::consts::TAU,
        0.0f64..std::f64::consts::TAU,
        0.0f64..std::f64::consts::TAU,
    )
        .prop_map(|(theta, phi, lambda)| {
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            SingleQubitUnitary::new([
                [Complex64::new(c, 0.0), -Complex64::from_polar(s, lambda)],
                [
                    Complex64::from_polar(s, phi),
                    Complex64::from_polar(c, phi + lambda),
                ],
            ])
            .unwrap()
        })
}

proptest! {
    #[test]
    fn unitaries_preserve_norm(s in state(3), u in rotation(), q in 0usize..3) {
        let out = s.apply_single_qubit(q, &u).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < TOL);
        let back = out.apply_single_qubit(q, &u.adjoint()).unwrap();
        prop_assert!((back.fidelity(&s).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn pair_measurement_is_a_distribution(s in state(3), m in param(), i in 0usize..3, j in 0usize..3) {
        prop_assume!(i != j);
        let probs = s.outcome_probabilities(i, j, &gbs_basis(m)).unwrap();
        prop_assert!(probs.iter().all(|&p| p >= 0.0));
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < TOL);
    }

    #[test]
    fn x_readout_is_a_distribution(s in state(4), q in 0usize..4) {
        let [p0, p1] = s.x_probabilities(q).unwrap();
        prop_assert!((p0 + p1 - 1.0).abs() < TOL);
    }

    #[test]
    fn fidelity_is_symmetric_and_phase_blind(a in state(2), b in state(2), theta in 0.0f64..std::f64::consts::TAU) {
        let f = a.fidelity(&b).unwrap();
        prop_assert!((f - b.fidelity(&a).unwrap()).abs() < TOL);
        prop_assert!((f - a.with_global_phase(theta).fidelity(&b).unwrap()).abs() < TOL);
        prop_assert!((-TOL..=1.0).contains(&f));
    }

    #[test]
    fn tensor_then_collapse_keeps_norm(a in state(1), b in state(2), m in param(), draw in 0.0f64..1.0) {
        let joint = a.tensor(&b).unwrap();
        let meas = joint.project_pair(0, 1, &gbs_basis(m), draw).unwrap();
        prop_assert!((meas.collapsed.norm_sqr() - 1.0).abs() < TOL);
        prop_assert!(meas.probability > 0.0);
    }

    #[test]
    fn generalized_bell_basis_is_orthonormal(m in param()) {
        prop_assert!(gbs_basis(m).gram_deviation() < TOL);
    }

    #[test]
    fn closed_form_probabilities_match_state_vectors((alpha, beta) in amplitudes(), n in param(), m in param()) {
        let closed = gbm_probabilities(alpha, beta, n, m).unwrap();
        prop_assert!((closed.iter().sum::<f64>() - 1.0).abs() < TOL);
        let input = StateVector::new(1, vec![alpha, beta]).unwrap();
        let joint = input.tensor(&channel_state(n)).unwrap();
        let simulated = joint.outcome_probabilities(0, 1, &gbs_basis(m)).unwrap();
        for k in 0..4 {
            prop_assert!((closed[k] - simulated[k]).abs() < TOL);
        }
    }

    #[test]
    fn matched_success_outcomes_teleport_perfectly((alpha, beta) in amplitudes(), n in param()) {
        let input = StateVector::new(1, vec![alpha, beta]).unwrap();
        for o in [GbsOutcome::PhiMinus, GbsOutcome::PsiPlus] {
            let bob = bob_conditional_state(alpha, beta, n, n, o).unwrap();
            prop_assert!((bob.fidelity(&input).unwrap() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn mismatch_distortion_equals_wrong_bit_probability(n in param(), m in param()) {
        prop_assume!((n.value() - m.value()).abs() > 1e-6);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let plus = KeyBit::Zero.state();
        for o in [GbsOutcome::PhiMinus, GbsOutcome::PsiPlus] {
            let bob = bob_conditional_state(h, h, n, m, o).unwrap();
            prop_assert!((bob.fidelity(&plus).unwrap() - (1.0 - p_wrong(m, n))).abs() < TOL);
        }
    }

    #[test]
    fn success_decomposition(n in param()) {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let probs = gbm_probabilities(h, h, n, n).unwrap();
        prop_assert!((probs[1] + probs[2] - p_suc(n)).abs() < TOL);
    }

    #[test]
    fn wrong_bit_probability_is_symmetric(m in param(), n in param()) {
        prop_assert_eq!(p_wrong(m, n), p_wrong(n, m));
        prop_assert!((0.0..0.5).contains(&p_wrong(m, n)));
    }

    #[test]
    fn rate_stays_below_a_quarter(a in partial(), b in partial()) {
        prop_assert!(p_final_rate(&[a, b]).unwrap() < 0.25);
    }

    #[test]
    fn simulated_teleport_matches_conditional_state((alpha, beta) in amplitudes(), n in param(), m in param(), draw in 0.0f64..1.0) {
        let input = StateVector::new(1, vec![alpha, beta]).unwrap();
        let res = gbm_teleport(&input, &channel_state(n), m, draw).unwrap();
        let corrected = res.partner.apply_single_qubit(0, &pqkd::gbs::correction_for(res.outcome)).unwrap();
        let expected = bob_conditional_state(alpha, beta, n, m, res.outcome).unwrap();
        prop_assert!((corrected.fidelity(&expected).unwrap() - 1.0).abs() < TOL);
    }
}

fn protocol_config() -> impl Strategy<Value = ProtocolConfig> {
    (
        prop::sample::subsequence(vec![0.2, 0.35, 0.5, 0.65, 0.8, 0.9], 2..=4),
        any::<u64>(),
        prop_oneof![Just(RevealSchedule::Batch), Just(RevealSchedule::PerRound)],
        0.1f64..0.9,
    )
        .prop_map(|(params, seed, reveal, fraction)| ProtocolConfig {
            num_rounds: 300,
            seed,
            reveal,
            disclosure_fraction: fraction,
            ..ProtocolConfig::with_params(&params).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn passive_runs_agree_and_respect_ordering(config in protocol_config()) {
        let t = run_protocol(&config, &AttackModel::passive()).unwrap();
        prop_assert_eq!(&t.alice_key, &t.bob_key);
        prop_assert_eq!(t.qber, 0.0);
        prop_assert_eq!(first_ordering_violation(&t.messages), None);
        let sifted = t.sifted_count() as f64;
        let disclosed = t.count_verdict(Verdict::SiftedDisclosed) as f64;
        prop_assert!((disclosed - (config.disclosure_fraction * sifted).round()).abs() <= 1.0);
        for r in &t.records {
            prop_assert_eq!(Some(classify(r).unwrap().is_sifted()), r.verdict.map(Verdict::is_sifted));
            if r.verdict.is_some_and(Verdict::is_sifted) {
                prop_assert!(r.gbm_outcome.is_success());
                prop_assert_eq!(r.bob_n_index, r.alice_m_index);
            }
            prop_assert_eq!(r.verdict == Some(Verdict::DiscardMismatch), r.bob_n_index != r.alice_m_index);
        }
    }

    #[test]
    fn runs_are_deterministic_and_thread_independent(config in protocol_config()) {
        let a = run_protocol(&config, &AttackModel::passive()).unwrap();
        let b = run_protocol(&config, &AttackModel::passive()).unwrap();
        let c = run_protocol(&ProtocolConfig { threads: 3, ..config.clone() }, &AttackModel::passive()).unwrap();
        let bytes = |t: &pqkd::protocol::Transcript| {
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            buf
        };
        prop_assert_eq!(bytes(&a), bytes(&b));
        prop_assert_eq!(bytes(&a), bytes(&c));
        prop_assert_eq!(a.messages, c.messages);
    }

    #[test]
    fn transcript_round_trips(config in protocol_config(), eve_seed in any::<u64>()) {
        let model = AttackModel::intercept(config.channel_params.clone(), eve_seed);
        let t = run_protocol(&config, &model).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        let parsed = read_transcript(buf.as_slice()).unwrap();
        let runs: Vec<ParsedRun> = t.records.iter().map(ParsedRun::from).collect();
        prop_assert_eq!(parsed.runs, runs);
        prop_assert_eq!(parsed.summary, t.summary());
        prop_assert_eq!(parsed.eve, t.eve_records);
    }

    #[test]
    fn eve_never_changes_honest_choices(config in protocol_config(), eve_seed in any::<u64>()) {
        let honest = run_protocol(&config, &AttackModel::passive()).unwrap();
        let model = AttackModel::intercept(config.channel_params.clone(), eve_seed);
        let attacked = run_protocol(&config, &model).unwrap();
        for (h, a) in honest.records.iter().zip(&attacked.records) {
            prop_assert_eq!(h.bob_n_index, a.bob_n_index);
            prop_assert_eq!(h.alice_m_index, a.alice_m_index);
            prop_assert_eq!(h.alice_key_bit, a.alice_key_bit);
        }
        // Sifting reads only public fields: stripping the audit leaves the
        // verdicts untouched.
        let stripped = attacked.without_audit();
        prop_assert_eq!(&stripped.records, &attacked.records);
        prop_assert_eq!(&stripped.alice_key, &attacked.alice_key);
        prop_assert_eq!(&stripped.disclosed, &attacked.disclosed);
        for r in &stripped.records {
            prop_assert_eq!(classify(r).unwrap().is_sifted(), r.verdict.unwrap().is_sifted());
        }
    }

    #[test]
    fn unit_link_chain_reproduces_single_hop(config in protocol_config(), stations in 1usize..4) {
        let direct = run_protocol(&config, &AttackModel::passive()).unwrap();
        let chain = ProtocolConfig {
            mode: Mode::Repeater,
            repeater_links: vec![ChannelParam::unit(); stations],
            ..config.clone()
        };
        let relayed = run_protocol(&chain, &AttackModel::passive()).unwrap();
        prop_assert_eq!(&relayed.records, &direct.records);
        prop_assert_eq!(&relayed.alice_key, &direct.alice_key);
        prop_assert_eq!(first_ordering_violation(&relayed.messages), None);
    }
}
