//! Shape laws and invariances of the graph operations, over swept
//! geometries and random values.

use dishnet_core::kernels::window_out;
use dishnet_core::{Graph, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(seed: u64, shape: &[usize]) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn expected_len(n: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    (n + 2 * p >= k).then(|| (n + 2 * p - k) / s + 1)
}

#[test]
fn conv_and_pool_output_shapes_follow_the_window_formula() {
    for stride in [1, 2] {
        for pad in [0, 1, 2] {
            for k in [1, 2, 3, 5] {
                for (h, w) in [(1, 1), (4, 7), (9, 5), (12, 12)] {
                    let want = expected_len(h, k, stride, pad).zip(expected_len(w, k, stride, pad));
                    assert_eq!(window_out(h, k, stride, pad), want.map(|x| x.0));

                    let mut g = Graph::<f64>::new();
                    let x = g.leaf(&random(1, &[2, h, w]));
                    let kern = g.leaf(&random(2, &[3, 2, k, k]));
                    let b = g.leaf(&random(3, &[3]));
                    match (g.conv2d(x, kern, b, stride, pad), want) {
                        (Ok(y), Some((oh, ow))) => assert_eq!(g.shape(y), &[3, oh, ow]),
                        (Err(_), None) => {}
                        (r, w) => panic!("conv k={k} s={stride} p={pad} {h}x{w:?}: {r:?}"),
                    }

                    let pooled = g.maxpool2d(x, k, stride, pad);
                    match (pooled, want) {
                        (Ok(y), Some((oh, ow))) if pad < k => assert_eq!(g.shape(y), &[2, oh, ow]),
                        (Err(_), _) if pad >= k => {}
                        (Err(_), None) => {}
                        (r, w) => panic!("pool k={k} s={stride} p={pad} {h}x{w:?}: {r:?}"),
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn concat_slices_recover_inputs(
        channels in prop::collection::vec(1usize..5, 1..5),
        h in 1usize..5,
        w in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut g = Graph::<f64>::new();
        let parts: Vec<_> = channels
            .iter()
            .enumerate()
            .map(|(i, &c)| random(seed.wrapping_add(i as u64), &[c, h, w]))
            .collect();
        let ids: Vec<_> = parts.iter().map(|t| g.leaf(t)).collect();
        let y = g.concat_channels(&ids).unwrap();
        prop_assert_eq!(g.shape(y), &[channels.iter().sum::<usize>(), h, w][..]);
        let mut offset = 0;
        for t in &parts {
            let len = t.numel();
            prop_assert_eq!(&g.value(y)[offset..offset + len], t.data());
            offset += len;
        }
    }

    #[test]
    fn cross_entropy_ignores_constant_shifts(
        logits in prop::collection::vec(-10.0f64..10.0, 1..20),
        shift in -50.0f64..50.0,
        pick in any::<prop::sample::Index>(),
    ) {
        let target = pick.index(logits.len());
        let loss = |v: Vec<f64>| {
            let mut g = Graph::<f64>::new();
            let x = g.constant(&[v.len()], v).unwrap();
            let l = g.softmax_cross_entropy(x, target).unwrap();
            g.scalar(l)
        };
        let a = loss(logits.clone());
        let b = loss(logits.iter().map(|x| x + shift).collect());
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn relu_is_idempotent_and_nonnegative(v in prop::collection::vec(-5.0f64..5.0, 1..30)) {
        let mut g = Graph::<f64>::new();
        let x = g.constant(&[v.len()], v.clone()).unwrap();
        let r1 = g.relu(x);
        let r2 = g.relu(r1);
        prop_assert_eq!(g.value(r1), g.value(r2));
        prop_assert!(g.value(r1).iter().all(|&y| y >= 0.0));
    }
}
