use pseudolabel::grunit::{
    classify, classify_backward, gr_forward, loss_and_grads, mlsm_loss, train_toy, FeatureGrid, GrParams, LabeledGrid,
    Mat, TrainConfig,
};
use pseudolabel::synth::separable_toy_set;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-3;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn random_params(rng: &mut ChaCha8Rng, n: usize, l: usize, k: usize, c: usize) -> GrParams {
    let mut m = |r, cc, s: f64| Mat::from_fn(r, cc, |_, _| rng.gen_range(-s..=s));
    let (b, a, w, cl) = (m(n, l, 1.0), m(n, n, 0.5), m(k, k, 1.0), m(c, k, 1.0));
    GrParams::new(b, a, w, cl, (0..c).map(|i| 0.1 * i as f64 - 0.2).collect()).unwrap()
}

fn grid(rng: &mut ChaCha8Rng, h: usize, w: usize, k: usize) -> FeatureGrid {
    FeatureGrid::new(h, w, Mat::from_fn(h * w, k, |_, _| rng.gen_range(-1.0..=1.0))).unwrap()
}

#[test]
fn forward_matches_hand_expansion() {
    // N=4, K=3, L=6 on a 2x3 grid.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let p = random_params(&mut rng, 4, 6, 3, 2);
    let x = grid(&mut rng, 2, 3, 3);
    let out = gr_forward(&p, &x).unwrap();
    let b = &p.projection;
    let xf = x.features();
    for l in 0..6 {
        for c in 0..3 {
            // out[l][c] = x[l][c] + sum_i B[i][l] * sum_d ((I-A) B X)[i][d] W[d][c]
            let mut y = 0.0;
            for i in 0..4 {
                let mut z = 0.0;
                for d in 0..3 {
                    let mut mixed = 0.0;
                    for j in 0..4 {
                        let coeff = if i == j { 1.0 } else { 0.0 } - p.adjacency[(i, j)];
                        let v: f64 = (0..6).map(|s| b[(j, s)] * xf[(s, d)]).sum();
                        mixed += coeff * v;
                    }
                    z += mixed * p.state_update[(d, c)];
                }
                y += b[(i, l)] * z;
            }
            let want = xf[(l, c)] + y;
            assert!(rel(out.features()[(l, c)], want) < 1e-12);
        }
    }
}

#[test]
fn classify_matches_per_pixel_head() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = random_params(&mut rng, 3, 4, 2, 3);
    let x = grid(&mut rng, 2, 2, 2);
    let out = gr_forward(&p, &x).unwrap();
    let cls = classify(&p, &x).unwrap();
    for c in 0..3 {
        let mut mean = 0.0;
        for l in 0..4 {
            let s: f64 = (0..2).map(|k| p.classifier[(c, k)] * out.features()[(l, k)]).sum::<f64>() + p.bias[c];
            assert!((cls.pixel_scores[(l, c)] - s).abs() < 1e-12);
            assert_eq!(cls.cam.plane(c)[l], s.max(0.0) as f32);
            mean += s / 4.0;
        }
        assert!((cls.scores[c] - mean).abs() < 1e-12);
    }
}

#[test]
fn mlsm_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let c = rng.gen_range(1..=10);
        let s: Vec<f64> = (0..c).map(|_| rng.gen_range(-20.0..=20.0)).collect();
        let y: Vec<bool> = (0..c).map(|_| rng.gen_bool(0.5)).collect();
        let (_, g) = mlsm_loss(&s, &y);
        for i in 0..c {
            let (mut up, mut dn) = (s.clone(), s.clone());
            up[i] += H;
            dn[i] -= H;
            let num = (mlsm_loss(&up, &y).0 - mlsm_loss(&dn, &y).0) / (2.0 * H);
            assert!(rel(g[i], num) < 1e-4, "{} vs {num}", g[i]);
        }
    }
}

#[test]
fn mlsm_is_stable_for_large_scores() {
    let (l, g) = mlsm_loss(&[1e4, -1e4], &[true, false]);
    assert!(l.is_finite() && l < 1e-12);
    assert!(g.iter().all(|v| v.is_finite()));
    let (l, _) = mlsm_loss(&[-1e4], &[true]);
    assert!((l - 1e4).abs() < 1e-6);
}

fn flat(g: &pseudolabel::grunit::ParamGrads) -> Vec<f64> {
    [&g.projection, &g.adjacency, &g.state_update, &g.classifier]
        .iter()
        .flat_map(|m| m.as_slice().to_vec())
        .chain(g.bias.iter().copied())
        .collect()
}

fn nudge(p: &GrParams, i: usize, h: f64) -> GrParams {
    let mut q = p.clone();
    let mut i = i;
    let mut done = false;
    for m in [&mut q.projection, &mut q.adjacency, &mut q.state_update, &mut q.classifier] {
        let n = m.as_slice().len();
        if i < n {
            m.as_mut_slice()[i] += h;
            done = true;
            break;
        }
        i -= n;
    }
    if !done {
        q.bias[i] += h;
    }
    q
}

#[test]
fn full_chain_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let (n, h, w, k, c) = (
            rng.gen_range(1..=4),
            rng.gen_range(1..=3),
            rng.gen_range(1..=3),
            rng.gen_range(1..=4),
            rng.gen_range(1..=4),
        );
        let p = random_params(&mut rng, n, h * w, k, c);
        let x = grid(&mut rng, h, w, k);
        let y: Vec<bool> = (0..c).map(|_| rng.gen_bool(0.5)).collect();
        let loss = |p: &GrParams, x: &FeatureGrid| mlsm_loss(&classify(p, x).unwrap().scores, &y).0;
        let (_, d_scores) = mlsm_loss(&classify(&p, &x).unwrap().scores, &y);
        let g = classify_backward(&p, &x, &d_scores).unwrap();
        for (i, a) in flat(&g).into_iter().enumerate() {
            let num = (loss(&nudge(&p, i, H), &x) - loss(&nudge(&p, i, -H), &x)) / (2.0 * H);
            assert!(rel(a, num) < 1e-4, "param {i}: {a} vs {num}");
        }
        for i in 0..h * w * k {
            let shifted = |d: f64| {
                let mut f = x.features().clone();
                f.as_mut_slice()[i] += d;
                FeatureGrid::new(h, w, f).unwrap()
            };
            let num = (loss(&p, &shifted(H)) - loss(&p, &shifted(-H))) / (2.0 * H);
            assert!(rel(g.input.as_slice()[i], num) < 1e-4);
        }
    }
}

#[test]
fn dataset_gradient_is_mean() {
    let data = separable_toy_set(3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = GrParams::init(3, 16, 4, 2, &mut rng).unwrap();
    let (loss, g) = loss_and_grads(&p, &data).unwrap();
    let mut sum = 0.0;
    for s in &data {
        sum += loss_and_grads(&p, std::slice::from_ref(s)).unwrap().0;
    }
    assert!((loss - sum / 3.0).abs() < 1e-12);
    for (i, a) in flat(&g).into_iter().enumerate() {
        let num = (loss_and_grads(&nudge(&p, i, H), &data).unwrap().0
            - loss_and_grads(&nudge(&p, i, -H), &data).unwrap().0)
            / (2.0 * H);
        assert!(rel(a, num) < 1e-4);
    }
}

fn toy_config(lr: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        momentum: 0.9,
        epochs,
        seed: 11,
        nodes: 4,
        classes: 2,
    }
}

#[test]
fn zero_learning_rate_freezes_parameters() {
    let data = separable_toy_set(6, 2);
    let out = train_toy(&data, &toy_config(0.0, 5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let init = GrParams::init(4, 16, 4, 2, &mut rng).unwrap();
    assert_eq!(out.params, init);
    assert!(out.losses.iter().all(|&l| l == out.losses[0]));
}

#[test]
fn first_step_is_plain_gradient_step() {
    let data = separable_toy_set(6, 2);
    let lr = 0.05;
    let out = train_toy(&data, &toy_config(lr, 1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let init = GrParams::init(4, 16, 4, 2, &mut rng).unwrap();
    let (loss, g) = loss_and_grads(&init, &data).unwrap();
    assert_eq!(out.losses, vec![loss]);
    let want: Vec<f64> = flat(&pseudolabel::grunit::ParamGrads {
        input: Mat::zeros(0, 0),
        ..g
    })
    .into_iter()
    .enumerate()
    .map(|(i, gi)| {
        let before = flat_params(&init)[i];
        before - lr * gi
    })
    .collect();
    let got = flat_params(&out.params);
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-15);
    }
    assert_eq!(out.snapshots, vec![out.params.clone()]);
}

fn flat_params(p: &GrParams) -> Vec<f64> {
    [&p.projection, &p.adjacency, &p.state_update, &p.classifier]
        .iter()
        .flat_map(|m| m.as_slice().to_vec())
        .chain(p.bias.iter().copied())
        .collect()
}

#[test]
fn training_rejects_bad_sets() {
    assert!(train_toy(&[], &toy_config(0.1, 1)).is_err());
    let mut data = separable_toy_set(2, 0);
    data[1] = LabeledGrid {
        grid: FeatureGrid::new(1, 1, Mat::zeros(1, 4)).unwrap(),
        classes: data[1].classes.clone(),
    };
    assert!(train_toy(&data, &toy_config(0.1, 1)).is_err());
    let data = vec![separable_toy_set(8, 0)
        .into_iter()
        .find(|s| s.classes.contains(&2))
        .unwrap()];
    let mut cfg = toy_config(0.1, 1);
    cfg.classes = 1;
    assert!(train_toy(&data, &cfg).is_err());
}

#[test]
fn divergence_is_reported() {
    let data = separable_toy_set(4, 0);
    let r = train_toy(&data, &toy_config(1e200, 5));
    assert!(matches!(r, Err(pseudolabel::Error::Divergence { .. })));
}
