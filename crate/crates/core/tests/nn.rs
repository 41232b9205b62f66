mod common;

use noughts::drl::{Algorithm, Policy};
use noughts::env::DialogueKit;
use noughts::features::{FeatureIndex, Featurizer};
use noughts::game::Variant;
use noughts::nn::{
    decode_model, encode_model, load_model, save_model, Activation, AnyNet, ConvNet, ConvShape, DenseNet, Loss,
    ModelMeta, Network, NnError, Sample, Sgd, Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradients_match_central_differences() {
    let cases = common::gradient_cases(5);
    assert!(cases.len() >= 20, "only {} configurations", cases.len());
    for c in &cases {
        assert!(c.checked > 0);
        assert!(c.max_rel_error < 1e-4, "{}: {:e}", c.name, c.max_rel_error);
    }
}

#[test]
fn hinge_fits_separable_blobs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let centres = [[2.0, 0.0], [-1.0, 1.7], [-1.0, -1.7]];
    let data: Vec<(Vec<f64>, usize)> = (0..150)
        .map(|i| {
            let k = i % 3;
            let p = centres[k].iter().map(|c| c + rng.gen_range(-0.4..0.4)).collect();
            (p, k)
        })
        .collect();
    let mut net = DenseNet::glorot(&[2, 3], &[Activation::Linear], &mut rng);
    let mut sgd = Sgd::new(0.05, f64::INFINITY);
    let accuracy = |net: &DenseNet| {
        data.iter()
            .filter(|(x, k)| {
                let s = net.forward(x).unwrap();
                (0..3).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap() == *k
            })
            .count() as f64
            / data.len() as f64
    };
    let mut steps = 0;
    while accuracy(&net) < 1.0 && steps < 1000 {
        let (x, k) = &data[rng.gen_range(0..data.len())];
        let batch = [Sample {
            input: x,
            target: Target::Class(*k),
        }];
        sgd.step(&mut net, &batch, Loss::Hinge).unwrap();
        steps += 1;
    }
    assert_eq!(accuracy(&net), 1.0, "after {steps} steps");
}

#[test]
fn loss_falls_on_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = DenseNet::q_network(6, 10, 4, &mut rng);
    let input: Vec<f64> = (0..6).map(|_| rng.gen()).collect();
    let batch = [Sample {
        input: &input,
        target: Target::Selected { action: 2, value: 3.0 },
    }];
    let mut sgd = Sgd::new(0.01, 10.0);
    let mut losses = Vec::new();
    for _ in 0..200 {
        losses.push(sgd.step(&mut net, &batch, Loss::SelectedMse).unwrap());
    }
    for w in losses[10..].windows(2).filter(|w| w[0] > 1e-12) {
        assert!(w[1] < w[0], "{} then {}", w[0], w[1]);
    }
    assert!(losses[199] < losses[0] * 1e-3);
}

#[test]
fn save_and_load_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut dense = DenseNet::q_network(73, 100, 23, &mut rng);
    dense.round_to_f32();
    let mut conv = ConvNet::glorot(ConvShape::default(), &mut rng);
    conv.round_to_f32();
    let index = FeatureIndex::for_variant(Variant::Standard);
    let meta = ModelMeta::for_features(&index).with("note", "x");
    let dir = tempfile::tempdir().unwrap();
    for (name, net) in [("dense.ncx", AnyNet::Dense(dense)), ("conv.ncx", AnyNet::Conv(conv))] {
        let path = dir.path().join(name);
        save_model(&path, &net, &meta).unwrap();
        let (back, back_meta) = load_model(&path).unwrap();
        assert_eq!(back, net);
        assert_eq!(back_meta, meta);
        let dim = match &net {
            AnyNet::Dense(n) => n.input_dim(),
            AnyNet::Conv(n) => n.input_dim(),
        };
        for _ in 0..100 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (a, b) = match (&net, &back) {
                (AnyNet::Dense(a), AnyNet::Dense(b)) => (a.forward(&x).unwrap(), b.forward(&x).unwrap()),
                (AnyNet::Conv(a), AnyNet::Conv(b)) => (a.forward(&x).unwrap(), b.forward(&x).unwrap()),
                _ => unreachable!(),
            };
            assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn a_changed_manifest_line_is_refused() {
    let index = FeatureIndex::for_variant(Variant::Standard);
    let text = index.to_manifest();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let i = lines.iter().position(|l| l.contains("temporal")).unwrap_or(lines.len() / 2);
    lines[i] = lines[i].replace("temporal", "temporl");
    let mutated = FeatureIndex::parse_manifest(&(lines.join("\n") + "\n")).unwrap();
    assert_ne!(mutated.hash(), index.hash());

    let bytes = encode_model(
        &AnyNet::Dense(DenseNet::zeros(&[73, 2], &[Activation::Linear])),
        &ModelMeta::for_features(&index),
    );
    let (_, meta) = decode_model(&bytes).unwrap();
    assert!(meta.check_manifest(&index).is_ok());
    assert!(matches!(meta.check_manifest(&mutated), Err(NnError::ManifestMismatch { .. })));

    // A policy file written against another layout does not load.
    let kit = DialogueKit::builtin(Variant::Standard);
    let featurizer = Featurizer::new(Variant::Standard, true);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut net = DenseNet::q_network(featurizer.dim(), 8, kit.catalogue().len(), &mut rng);
    net.round_to_f32();
    let policy = Policy::new(Algorithm::CompetitiveTemporal, net.clone(), kit.clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ncx");
    let mut meta = policy.meta();
    meta.manifest_hash = mutated.hash();
    save_model(&path, &AnyNet::Dense(net), &meta).unwrap();
    assert!(matches!(Policy::load(&path, kit.clone()), Err(NnError::ManifestMismatch { .. })));
    policy.save(&path).unwrap();
    assert_eq!(Policy::load(&path, kit).unwrap().net, policy.net);
}

#[test]
fn ultimate_model_does_not_load_as_standard() {
    let kit = DialogueKit::builtin(Variant::Ultimate);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let f = Featurizer::new(Variant::Ultimate, true);
    let policy = Policy::new(
        Algorithm::CompetitiveTemporal,
        DenseNet::q_network(f.dim(), 8, kit.catalogue().len(), &mut rng),
        kit,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.ncx");
    policy.save(&path).unwrap();
    assert!(Policy::load(&path, DialogueKit::builtin(Variant::Standard)).is_err());
    assert_eq!(Policy::saved_variant(&path).unwrap(), Variant::Ultimate);
}
