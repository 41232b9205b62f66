//! The from-scratch networks on their own: gradient check, a small fit with
//! plain SGD, and a save/load round trip through the model file format.
//!
//! cargo run --release --example network_basics

use noughts::nn::{
    gradient_check, load_model, save_model, Activation, AnyNet, ConvNet, ConvShape, DenseNet, Loss, ModelMeta, Network,
    Sample, Sgd, Target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let inputs: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| rng.gen()).collect()).collect();
    let batch: Vec<Sample> = inputs
        .iter()
        .enumerate()
        .map(|(i, x)| Sample {
            input: x,
            target: Target::Selected { action: i % 3, value: 1.0 - i as f64 },
        })
        .collect();
    let mut dense = DenseNet::q_network(5, 7, 3, &mut rng);
    let r = gradient_check(&mut dense, &batch, Loss::SelectedMse, 1e-5)?;
    println!("dense gradient check: {} params, max rel error {:.2e}", r.checked, r.max_rel_error);

    let mut conv = ConvNet::glorot(ConvShape::default(), &mut rng);
    let image: Vec<f64> = (0..conv.input_dim()).map(|_| rng.gen()).collect();
    let one = [Sample {
        input: &image,
        target: Target::Class(1),
    }];
    let r = gradient_check(&mut conv, &one, Loss::Hinge, 1e-5)?;
    println!("conv gradient check: {} params, max rel error {:.2e}", r.checked, r.max_rel_error);

    // XOR with a ReLU hidden layer.
    let xor = [([0.0, 0.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1), ([1.0, 1.0], 0)];
    let mut net = DenseNet::glorot(&[2, 8, 2], &[Activation::Relu, Activation::Linear], &mut rng);
    let mut sgd = Sgd::new(0.1, 5.0);
    for epoch in 0..2000 {
        let samples: Vec<Sample> = xor
            .iter()
            .map(|(x, k)| Sample {
                input: x,
                target: Target::Class(*k),
            })
            .collect();
        let loss = sgd.step(&mut net, &samples, Loss::Hinge)?;
        if epoch % 500 == 0 {
            println!("xor epoch {epoch:>4}: hinge loss {loss:.4}");
        }
    }
    for (x, k) in &xor {
        let s = net.forward(x)?;
        println!("  {x:?} -> {} (want {k})", usize::from(s[1] > s[0]));
    }

    let dir = std::env::temp_dir().join("noughts-network-basics");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("xor.ncx");
    net.round_to_f32();
    save_model(&path, &AnyNet::Dense(net.clone()), &ModelMeta::default().with("task", "xor"))?;
    let (back, meta) = load_model(&path)?;
    println!("reloaded {} ({:?}): identical = {}", path.display(), meta, back == AnyNet::Dense(net));
    Ok(())
}
