//! Writes the small seeded network used by tests and the synthetic benchmark.
//!
//! Usage: `cargo run -p actmap --example make_toy_archive -- <out_dir> [seed]`

use actmap::archive::{save_archive, ConvLayer, InputNormalization, Layer, NetworkDescriptor};
use actmap::tensor::{ConvSpec, PoolSpec};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

fn conv(rng: &mut Xoshiro256PlusPlus, index: usize, inp: usize, out: usize, k: usize) -> Layer {
    let fan_in = (inp * k * k) as f32;
    let normal = Normal::new(0.0f32, (2.0 / fan_in).sqrt()).unwrap();
    let weights = (0..out * inp * k * k).map(|_| normal.sample(rng)).collect();
    let bias = (0..out).map(|_| 0.01 * normal.sample(rng)).collect();
    Layer::Conv(ConvLayer {
        spec: ConvSpec {
            in_channels: inp,
            out_channels: out,
            kernel_h: k,
            kernel_w: k,
            stride: 1,
            padding: k / 2,
            groups: 1,
            weights,
            bias,
        },
        weights_file: format!("conv{index}_weight.bin"),
        bias_file: format!("conv{index}_bias.bin"),
    })
}

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "assets/toy_net".to_string());
    let seed: u64 = args.next().map(|s| s.parse().expect("seed must be an integer")).unwrap_or(20);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let pool = || Layer::MaxPool(PoolSpec { window: 2, stride: 2 });
    let layers = vec![
        conv(&mut rng, 1, 3, 8, 5),
        Layer::Relu,
        pool(),
        conv(&mut rng, 2, 8, 16, 3),
        Layer::Relu,
        pool(),
        conv(&mut rng, 3, 16, 16, 3),
        Layer::Relu,
        pool(),
    ];
    let norm = InputNormalization { means: [0.5; 3], stds: [0.25; 3] };
    let net = NetworkDescriptor::new("toy", norm, layers)
        .expect("valid toy network")
        .with_metadata(serde_json::json!({ "seed": seed, "conv_depths": [8, 16, 16], "feature_length": 40 }));
    save_archive(&net, &out).expect("write archive");
    println!("wrote {out}: feature length {}", net.feature_length());
}
