use super::*;
use crate::corpus::SectionScheme;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn pair(input: &str, section: Option<usize>, target: &str) -> TrainingPair {
    TrainingPair { input: toks(input), section, target: toks(target) }
}

fn untrained(config: ModelConfig, pairs: &[TrainingPair]) -> Seq2SeqModel {
    let hp = AbstractorHyperParams { epochs: 0, ..Default::default() };
    train_abstractor(&config, &SectionScheme::synthetic(), pairs, &[], &hp, 3).unwrap().0
}

fn tiny_pairs() -> Vec<TrainingPair> {
    vec![
        pair("<pt> i take aspirin daily", Some(0), "takes aspirin ."),
        pair("<dr> blood pressure is high", Some(1), "bp high ."),
        pair("<pt> i have a cough", Some(0), "cough ."),
    ]
}

#[test]
fn distribution_sums_to_one() {
    let pairs = tiny_pairs();
    let model = untrained(ModelConfig::tiny(), &pairs);
    let enc = model.encode_input(&toks("<pt> i take zzz aspirin"), Some(2)).unwrap();
    let mut state = enc.initial_state().to_vec();
    let mut cov = vec![0.0; enc.states().len()];
    let mut prev = Vocabulary::START;
    for _ in 0..5 {
        let out = model.decode_step(&enc, &state, prev, &cov).unwrap();
        assert!((out.dist.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!((out.attention.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&out.p_gen));
        prev = net::argmax(&out.dist);
        cov.iter_mut().zip(&out.attention).for_each(|(c, a)| *c += a);
        state = out.state;
    }
}

#[test]
fn forced_gate_extremes() {
    let pairs = tiny_pairs();
    let model = untrained(ModelConfig::tiny(), &pairs);
    let input = toks("<pt> i take zzz aspirin");
    let enc = model.encode_input(&input, Some(0)).unwrap();
    let cov = vec![0.0; enc.states().len()];
    let copy_only = model.decode_step_forced(&enc, enc.initial_state(), Vocabulary::START, &cov, 0.0).unwrap();
    for (id, p) in copy_only.dist.iter().enumerate() {
        if *p > 0.0 {
            assert!(enc.source_ids().contains(&id), "{id} not in input");
        }
    }
    let gen_only = model.decode_step_forced(&enc, enc.initial_state(), Vocabulary::START, &cov, 1.0).unwrap();
    let mut no_copy = model.clone();
    no_copy.config.copy = false;
    let enc2 = no_copy.encode_input(&input, Some(0)).unwrap();
    let plain = no_copy.decode_step(&enc2, enc2.initial_state(), Vocabulary::START, &cov).unwrap();
    for (a, b) in gen_only.dist.iter().zip(&plain.dist) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(plain.p_gen, 1.0);
}

#[test]
fn header_conditioning_extends_input() {
    let pairs = tiny_pairs();
    let model = untrained(ModelConfig::tiny(), &pairs);
    let input = toks("<pt> i take aspirin");
    let a = model.encode_input(&input, Some(0)).unwrap();
    let b = model.encode_input(&input, Some(3)).unwrap();
    let plain = model.encode_input(&input, None).unwrap();
    assert_eq!(a.states().len(), input.len() + 1);
    assert_eq!(plain.states().len(), input.len());
    assert_ne!(a.states()[0], b.states()[0]);
    assert!(model.encode_input(&[], None).is_err());
    assert!(model.encode_input(&input, Some(9)).is_err());
}

#[test]
fn gradients_match_finite_differences() {
    let scheme = SectionScheme::synthetic();
    let pairs = vec![
        pair("<pt> i take aspirin daily aspirin", Some(0), "takes aspirin daily ."),
        pair("<dr> pressure is high", Some(2), "high pressure ."),
    ];
    for conditioning in [Conditioning::Header, Conditioning::Embedding, Conditioning::None] {
        for copy in [true, false] {
            let cfg = ModelConfig { conditioning, copy, ..ModelConfig::tiny() };
            let err = gradient_check(&cfg, &scheme, &pairs, 1e-5, 11).unwrap();
            assert!(err < 1e-4, "{conditioning:?} copy={copy}: {err}");
        }
    }
}

#[test]
fn large_epsilon_is_reported_not_asserted() {
    let err = gradient_check(&ModelConfig::tiny(), &SectionScheme::synthetic(), &tiny_pairs(), 1.0, 1).unwrap();
    assert!(err.is_finite() && err > 0.0);
}

fn memo_pairs() -> Vec<TrainingPair> {
    let names = ["ann", "bob", "cy", "dee", "eve", "fay", "gus", "hal", "ike", "jo"];
    let verbs = ["runs", "sits"];
    let mut out = Vec::new();
    for (i, n) in names.iter().enumerate() {
        for (j, v) in verbs.iter().enumerate() {
            out.push(pair(&format!("<pt> {n} {v} now"), Some((i + j) % 4), &format!("{v} {n} .")));
        }
    }
    out
}

fn memo_config() -> ModelConfig {
    ModelConfig { embed: 16, hidden: 16, decoder: 32, attention: 16, output: 32, ..Default::default() }
}

#[test]
fn memorizes_twenty_pairs() {
    let scheme = SectionScheme::synthetic();
    let pairs = memo_pairs();
    assert_eq!(pairs.len(), 20);
    let hp = AbstractorHyperParams { epochs: 120, batch_size: 4, learning_rate: 0.01, patience: 200, ..Default::default() };
    let (model, log) = train_abstractor(&memo_config(), &scheme, &pairs, &pairs, &hp, 5).unwrap();
    assert!(log.rows.last().unwrap().val_acc > 0.999, "{}", log.to_tsv());
    for p in &pairs {
        let greedy = greedy_decode(&model, &p.input, p.section, model.bounds, None).unwrap();
        assert_eq!(greedy, p.target);
        let beam = beam_search(&model, &p.input, p.section, 4, model.bounds, None).unwrap();
        assert_eq!(beam, p.target);
        let one = beam_search(&model, &p.input, p.section, 1, model.bounds, None).unwrap();
        assert_eq!(one, greedy);
    }
}

#[test]
fn same_seed_same_loss() {
    let scheme = SectionScheme::synthetic();
    let pairs = memo_pairs();
    let hp = AbstractorHyperParams { epochs: 3, ..Default::default() };
    let (a, la) = train_abstractor(&memo_config(), &scheme, &pairs, &pairs, &hp, 9).unwrap();
    let (b, lb) = train_abstractor(&memo_config(), &scheme, &pairs, &pairs, &hp, 9).unwrap();
    assert_eq!(la, lb);
    assert_eq!(a.params, b.params);
}

#[test]
fn copy_reaches_unseen_tokens() {
    let scheme = SectionScheme::synthetic();
    let names: Vec<String> = (0..60).map(|i| format!("drug{}x", i)).collect();
    let train: Vec<TrainingPair> = names
        .iter()
        .enumerate()
        .map(|(i, n)| pair(&format!("<pt> i take {n} {}", if i % 2 == 0 { "daily" } else { "nightly" }), None, &format!("takes {n} .")))
        .collect();
    let hp = AbstractorHyperParams { epochs: 40, batch_size: 8, learning_rate: 0.01, patience: 100, min_count: 3, ..Default::default() };
    let cfg = memo_config();
    let (copy, _) = train_abstractor(&cfg, &scheme, &train, &[], &hp, 2).unwrap();
    let (plain, _) = train_abstractor(&ModelConfig { copy: false, ..cfg }, &scheme, &train, &[], &hp, 2).unwrap();
    assert_eq!(copy.vocab.get("drug1x"), None);
    let input = toks("<pt> i take newdrug daily");
    let out = beam_search(&copy, &input, None, 4, copy.bounds, None).unwrap();
    assert!(out.contains(&"newdrug".to_string()), "{out:?}");
    let out = beam_search(&plain, &input, None, 4, plain.bounds, None).unwrap();
    assert!(!out.contains(&"newdrug".to_string()));
}

#[test]
fn section_changes_output() {
    let scheme = SectionScheme::synthetic();
    let mut pairs = Vec::new();
    for w in ["aspirin", "insulin", "metformin", "statin", "warfarin", "heparin"] {
        pairs.push(pair(&format!("<pt> i am on {w}"), Some(0), &format!("takes {w} .")));
        pairs.push(pair(&format!("<pt> i am on {w}"), Some(3), &format!("continue {w} .")));
    }
    let hp = AbstractorHyperParams { epochs: 80, batch_size: 4, learning_rate: 0.01, patience: 200, ..Default::default() };
    let (model, _) = train_abstractor(&memo_config(), &scheme, &pairs, &[], &hp, 4).unwrap();
    let input = toks("<pt> i am on aspirin");
    let a = beam_search(&model, &input, Some(0), 4, model.bounds, None).unwrap();
    let b = beam_search(&model, &input, Some(3), 4, model.bounds, None).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, toks("takes aspirin ."));
    assert_eq!(b, toks("continue aspirin ."));
}

#[test]
fn note_level_output_has_all_headers_in_order() {
    let scheme = SectionScheme::synthetic();
    let headers = scheme.headers();
    let pairs = vec![
        pair("<pt> i take aspirin", None, "<subjective> takes aspirin . <objective> <assessment> <plan> continue aspirin ."),
        pair("<dr> your bp is high", None, "<subjective> <objective> bp high . <assessment> hypertension . <plan>"),
    ];
    let model = untrained(ModelConfig::tiny(), &pairs);
    for beam in [1, 4] {
        for bounds in [LengthBounds { min: 0, max: 6 }, LengthBounds { min: 8, max: 30 }, LengthBounds { min: 0, max: 2 }] {
            let out = beam_search(&model, &toks("<pt> i take aspirin"), None, beam, bounds, Some(&headers)).unwrap();
            let emitted: Vec<&String> = out.iter().filter(|t| headers.contains(t)).collect();
            assert_eq!(emitted, headers.iter().collect::<Vec<_>>());
            assert!(out.len() <= bounds.max.max(headers.len()));
            assert_eq!(out[0], headers[0]);
        }
    }
}

#[test]
fn unconstrained_decode_never_emits_headers() {
    let pairs = tiny_pairs();
    let model = untrained(ModelConfig::tiny(), &pairs);
    let out = beam_search(&model, &toks("<pt> i take aspirin"), Some(0), 4, LengthBounds { min: 0, max: 12 }, None).unwrap();
    assert!(out.iter().all(|t| !t.starts_with("<subj") && !t.starts_with("<plan")));
}

#[test]
fn length_bounds_percentiles() {
    let b = LengthBounds::from_targets(1..=100).unwrap();
    assert_eq!(b, LengthBounds { min: 5, max: 95 });
    assert_eq!(LengthBounds::from_targets([7]).unwrap(), LengthBounds { min: 7, max: 7 });
    assert!(LengthBounds::from_targets([]).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let pairs = tiny_pairs();
    let model = untrained(ModelConfig::tiny(), &pairs);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    model.save(&path).unwrap();
    let back = Seq2SeqModel::load(&path).unwrap();
    assert_eq!(back.params, model.params);
    assert_eq!(back.vocab.id("aspirin"), model.vocab.id("aspirin"));
    let mut bad = serde_json::to_value(&model).unwrap();
    bad["format"] = "other/9".into();
    assert!(Seq2SeqModel::from_json(&bad.to_string(), "x").is_err());
}
