use actmap::tensor::{conv2d, ConvSpec, Tensor};

use super::{ensure, SplitMix64};

/// Direct quadruple loop in f64 over output position, output channel, input
/// channel and kernel tap.
pub fn naive_conv(input: &Tensor, spec: &ConvSpec) -> (usize, usize, Vec<f64>) {
    let (w, h) = (input.width() as isize, input.height() as isize);
    let s = spec.stride as isize;
    let p = spec.padding as isize;
    let out_w = ((w + 2 * p - spec.kernel_w as isize) / s + 1) as usize;
    let out_h = ((h + 2 * p - spec.kernel_h as isize) / s + 1) as usize;
    let in_per_group = spec.in_channels / spec.groups;
    let out_per_group = spec.out_channels / spec.groups;
    let mut out = vec![0.0f64; spec.out_channels * out_w * out_h];
    for oc in 0..spec.out_channels {
        let g = oc / out_per_group;
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = spec.bias[oc] as f64;
                for icg in 0..in_per_group {
                    let ic = g * in_per_group + icg;
                    for ky in 0..spec.kernel_h {
                        for kx in 0..spec.kernel_w {
                            let iy = oy as isize * s + ky as isize - p;
                            let ix = ox as isize * s + kx as isize - p;
                            if iy < 0 || ix < 0 || iy >= h || ix >= w {
                                continue;
                            }
                            let wi = ((oc * in_per_group + icg) * spec.kernel_h + ky) * spec.kernel_w + kx;
                            acc += spec.weights[wi] as f64 * input.get(ic, iy as usize, ix as usize) as f64;
                        }
                    }
                }
                out[(oc * out_h + oy) * out_w + ox] = acc;
            }
        }
    }
    (out_w, out_h, out)
}

/// 50 random convolutions up to 16×16×8 against the naive loop; relative
/// error is `|a − b| / max(|b|, 1)`.
pub fn check_conv_oracle() -> Result<String, String> {
    let mut rng = SplitMix64::new(4242);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let in_c = 1 + rng.below(8);
        let out_c = 1 + rng.below(8);
        let groups = if in_c % 2 == 0 && out_c % 2 == 0 && rng.below(2) == 0 { 2 } else { 1 };
        let (kh, kw) = (1 + rng.below(5), 1 + rng.below(5));
        let (w, h) = (kw + rng.below(17 - kw), kh + rng.below(17 - kh));
        let stride = 1 + rng.below(3);
        let padding = rng.below(kh.min(kw));
        let data: Vec<f32> = (0..in_c * w * h).map(|_| rng.range(-1.0, 1.0) as f32).collect();
        let input = Tensor::new(w, h, in_c, data).map_err(|e| e.to_string())?;
        let n_w = ConvSpec::expected_weight_len(in_c, out_c, kh, kw, groups);
        let spec = ConvSpec {
            in_channels: in_c,
            out_channels: out_c,
            kernel_h: kh,
            kernel_w: kw,
            stride,
            padding,
            groups,
            weights: (0..n_w).map(|_| rng.range(-1.0, 1.0) as f32).collect(),
            bias: (0..out_c).map(|_| rng.range(-0.5, 0.5) as f32).collect(),
        };
        let got = conv2d(&input, &spec).map_err(|e| format!("case {case}: {e}"))?;
        let (ow, oh, expected) = naive_conv(&input, &spec);
        ensure(got.width() == ow && got.height() == oh && got.depth() == out_c, || {
            format!("case {case}: shape {}x{}x{} vs {ow}x{oh}x{out_c}", got.width(), got.height(), got.depth())
        })?;
        for (a, b) in got.data().iter().zip(&expected) {
            worst = worst.max((*a as f64 - b).abs() / b.abs().max(1.0));
        }
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:.3e} > 1e-4"))?;
    Ok(format!("50 shapes, max relative error {worst:.2e}"))
}
