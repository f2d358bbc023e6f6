use ladies_core::data::Generator;
use ladies_core::sampling::NeighborDraw;
use ladies_core::variance::{
    column_norm_law, empirical_variance, fastgcn_variance, frob_sq, graphsage_variance, ladies_batch_variance,
    ladies_expected_variance, ladies_variance_bound, lemma1_closed_form, mean_and_std, vrgcn_variance, BatchSource,
};
use ladies_core::{ExactProduct, Laplacian, RowSelection, SamplerConfig, SamplerKind, SparseGraph};
use ndarray::{Array2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Fixture {
    g: SparseGraph,
    p: Laplacian,
    h: Array2<f64>,
    w: Array2<f64>,
    prod: ExactProduct,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Generator::Sbm {
        block_sizes: vec![20, 20, 20],
        p_in: 0.2,
        p_out: 0.02,
    }
    .build(&mut rng)
    .unwrap();
    let p = Laplacian::from_graph(&g);
    let h = Array2::from_shape_simple_fn((60, 5), || rng.sample::<f64, _>(StandardNormal));
    let w = Array2::from_shape_simple_fn((5, 3), || rng.sample::<f64, _>(StandardNormal));
    let prod = ExactProduct::new(&p, &h, &w).unwrap();
    Fixture { g, p, h, w, prod }
}

fn unnormalized(kind: SamplerKind) -> SamplerConfig {
    let config = SamplerConfig::new(kind).with_normalize(false);
    match kind {
        SamplerKind::Neighbor { .. } => config.with_neighbor_draw(NeighborDraw::WithReplacement),
        _ => config,
    }
}

fn within_sigmas(empirical: f64, se: f64, expected: f64, k: f64) -> bool {
    (empirical - expected).abs() <= k * se + 1e-12 * expected.abs()
}

/// Averages the single-layer estimate of `QZ` over many plans and checks
/// every entry against the exact product.
fn assert_unbiased(config: SamplerConfig, fx: &Fixture, batch: &RowSelection, trials: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = fx.prod.hw.ncols();
    let mut sum = Array2::<f64>::zeros((batch.len(), k));
    let mut sum_sq = Array2::<f64>::zeros((batch.len(), k));
    for _ in 0..trials {
        let plan = config.sample(&fx.p, &fx.g, batch, 1, &mut rng).unwrap();
        let layer = &plan.layers[0];
        let lower = fx.prod.hw.select(Axis(0), layer.lower_nodes.indices());
        let approx = layer.p_tilde.mul_dense(lower.view());
        sum += &approx;
        sum_sq += &approx.mapv(|v| v * v);
    }
    let t = trials as f64;
    for (r, &v) in batch.indices().iter().enumerate() {
        for c in 0..k {
            let mean = sum[[r, c]] / t;
            let var = (sum_sq[[r, c]] / t - mean * mean).max(0.0) * t / (t - 1.0);
            let se = (var / t).sqrt();
            let exact = fx.prod.z[[v, c]];
            assert!(
                (mean - exact).abs() <= 5.0 * se + 1e-10,
                "{}: entry ({v},{c}) mean {mean} vs {exact}, se {se}",
                config.kind.label()
            );
        }
    }
}

#[test]
fn unnormalized_samplers_are_unbiased() {
    let fx = fixture(11);
    let batch = RowSelection::new(vec![0, 7, 21, 33, 48, 59]);
    let kinds = [
        SamplerConfig::new(SamplerKind::Ladies { s_layer: 8 }).with_normalize(false),
        SamplerConfig::new(SamplerKind::FastGcn { s_layer: 8 }),
        SamplerConfig::new(SamplerKind::Neighbor { s_node: 2 }),
        unnormalized(SamplerKind::Neighbor { s_node: 2 }),
    ];
    for (i, config) in kinds.into_iter().enumerate() {
        assert_unbiased(config, &fx, &batch, 40_000, 100 + i as u64);
    }
}

#[test]
fn fixed_batch_variances_match_closed_forms() {
    let fx = fixture(12);
    let batch = BatchSource::Fixed(RowSelection::new(vec![1, 5, 9, 22, 40, 41, 57]));
    let configs = [
        unnormalized(SamplerKind::Ladies { s_layer: 6 }),
        unnormalized(SamplerKind::FastGcn { s_layer: 6 }),
        unnormalized(SamplerKind::Neighbor { s_node: 3 }),
    ];
    for (i, config) in configs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
        let r = empirical_variance(config, &fx.p, &fx.g, &fx.prod, &batch, 20_000, &mut rng).unwrap();
        let closed = r.closed_form.expect("closed form exists");
        assert!(
            within_sigmas(r.empirical, r.standard_error, closed, 3.0),
            "{}: empirical {} +- {} vs closed {closed}",
            r.scheme,
            r.empirical,
            r.standard_error
        );
    }
}

#[test]
fn uniform_batch_variances_match_closed_forms() {
    let fx = fixture(13);
    let configs = [
        (unnormalized(SamplerKind::Ladies { s_layer: 5 }), 4),
        (unnormalized(SamplerKind::FastGcn { s_layer: 5 }), 4),
        (unnormalized(SamplerKind::Neighbor { s_node: 2 }), 4),
        (unnormalized(SamplerKind::Ladies { s_layer: 10 }), 30),
    ];
    for (i, (config, b)) in configs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + i as u64);
        let source = BatchSource::Uniform { size: *b };
        let r = empirical_variance(config, &fx.p, &fx.g, &fx.prod, &source, 40_000, &mut rng).unwrap();
        let closed = r.closed_form.expect("closed form exists");
        assert!(
            within_sigmas(r.empirical, r.standard_error, closed, 3.0),
            "{} b={b}: empirical {} +- {} vs closed {closed}",
            r.scheme,
            r.empirical,
            r.standard_error
        );
    }
}

#[test]
fn ladies_expectation_matches_batch_average() {
    let fx = fixture(14);
    let n = fx.p.num_nodes();
    let s = 7;
    for b in [1, 3, 10, 60] {
        let exact = ladies_expected_variance(&fx.p, &fx.g, &fx.prod, b, s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(b as u64);
        let source = BatchSource::Uniform { size: b };
        let values: Vec<f64> = (0..20_000)
            .map(|_| {
                let batch = source.draw(n, &mut rng).unwrap();
                ladies_batch_variance(&fx.p, &fx.g, &fx.prod, &batch, s).unwrap()
            })
            .collect();
        let (mean, sd) = mean_and_std(&values);
        let se = sd / (values.len() as f64).sqrt();
        assert!(within_sigmas(mean, se, exact, 3.0), "b={b}: {mean} +- {se} vs {exact}");
        assert!(exact <= fastgcn_variance(&fx.p, &fx.prod, s).unwrap() + 1e-12);
    }
    let all = RowSelection::all(n);
    let full = ladies_batch_variance(&fx.p, &fx.g, &fx.prod, &all, s).unwrap();
    let expected = ladies_expected_variance(&fx.p, &fx.g, &fx.prod, n, s).unwrap();
    assert!((full - expected).abs() <= 1e-9 * full.abs());
}

/// Direct route for the column-sampling identity: form `A S B` with an
/// explicit diagonal sketch and average the squared error.
#[test]
fn column_sampling_error_matches_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let a = Array2::from_shape_simple_fn((4, 7), || rng.random_range(-2.0..2.0));
    let b = Array2::from_shape_simple_fn((7, 3), || rng.random_range(-2.0..2.0));
    let law = column_norm_law(&a);
    let dist = WeightedIndex::new(&law).unwrap();
    let exact = a.dot(&b);
    for s in [1, 3, 12] {
        let closed = lemma1_closed_form(&a, &b, &law, s).unwrap();
        let errors: Vec<f64> = (0..100_000)
            .map(|_| {
                let mut sketch = Array2::<f64>::zeros((7, 7));
                for _ in 0..s {
                    let k = dist.sample(&mut rng);
                    sketch[[k, k]] += 1.0 / (s as f64 * law[k]);
                }
                frob_sq(&(a.dot(&sketch).dot(&b) - &exact))
            })
            .collect();
        let (mean, sd) = mean_and_std(&errors);
        let se = sd / (errors.len() as f64).sqrt();
        assert!(
            within_sigmas(mean, se, closed, 3.0),
            "s={s}: {mean} +- {se} vs {closed}"
        );
    }
}

#[test]
fn variance_scales_inversely_with_sample_size() {
    let fx = fixture(16);
    let batch = BatchSource::Fixed(RowSelection::new(vec![2, 3, 30, 31, 50]));
    let config = |s| unnormalized(SamplerKind::Ladies { s_layer: s });
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let small = empirical_variance(&config(4), &fx.p, &fx.g, &fx.prod, &batch, 20_000, &mut rng).unwrap();
    let large = empirical_variance(&config(16), &fx.p, &fx.g, &fx.prod, &batch, 20_000, &mut rng).unwrap();
    let c_small = small.closed_form.unwrap();
    let c_large = large.closed_form.unwrap();
    assert!((c_small / c_large - 4.0).abs() <= 1e-9);
    let ratio = small.empirical / large.empirical;
    let rel = (small.standard_error / small.empirical).hypot(large.standard_error / large.empirical);
    assert!((ratio - 4.0).abs() <= 3.0 * 4.0 * rel, "ratio {ratio}");
    let f4 = fastgcn_variance(&fx.p, &fx.prod, 4).unwrap();
    let f16 = fastgcn_variance(&fx.p, &fx.prod, 16).unwrap();
    assert!((f4 / f16 - 4.0).abs() <= 1e-9);
}

#[test]
fn control_variate_variance_matches_sampling_of_the_residual() {
    let fx = fixture(18);
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let noise = Array2::from_shape_simple_fn(fx.h.dim(), || 0.1 * rng.sample::<f64, _>(StandardNormal));
    let h_bar = &fx.h + &noise;
    let m = 2;
    let closed = vrgcn_variance(&fx.p, &fx.h, &h_bar, &fx.w, m).unwrap();
    assert!(closed < graphsage_variance(&fx.p, &fx.prod, m).unwrap());
    assert_eq!(vrgcn_variance(&fx.p, &fx.h, &fx.h, &fx.w, m).unwrap(), 0.0);
    let residual = ExactProduct::new(&fx.p, &(&fx.h - &h_bar), &fx.w).unwrap();
    let config = unnormalized(SamplerKind::Neighbor { s_node: m });
    let r = empirical_variance(
        &config,
        &fx.p,
        &fx.g,
        &residual,
        &BatchSource::Uniform { size: 5 },
        40_000,
        &mut rng,
    )
    .unwrap();
    assert!((r.closed_form.unwrap() - closed).abs() <= 1e-12 * closed);
    assert!(
        within_sigmas(r.empirical, r.standard_error, closed, 3.0),
        "{} +- {} vs {closed}",
        r.empirical,
        r.standard_error
    );
}

#[test]
fn normalized_configurations_have_no_closed_form() {
    let fx = fixture(20);
    let batch = BatchSource::Uniform { size: 4 };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let r = empirical_variance(
        &SamplerConfig::new(SamplerKind::Ladies { s_layer: 5 }),
        &fx.p,
        &fx.g,
        &fx.prod,
        &batch,
        100,
        &mut rng,
    )
    .unwrap();
    assert!(r.normalized);
    assert_eq!(r.closed_form, None);
    assert!(r.empirical.is_finite());
}

#[test]
fn exhaustive_neighbor_draws_have_zero_error() {
    let fx = fixture(22);
    let max_closed = (0..60).map(|v| fx.g.degree(v) + 1).max().unwrap();
    let config = SamplerConfig::new(SamplerKind::Neighbor { s_node: max_closed });
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let r = empirical_variance(
        &config,
        &fx.p,
        &fx.g,
        &fx.prod,
        &BatchSource::Uniform { size: 10 },
        50,
        &mut rng,
    )
    .unwrap();
    assert!(r.empirical < 1e-20, "{}", r.empirical);
    // The with-replacement formula stays positive for the same budget.
    assert!(graphsage_variance(&fx.p, &fx.prod, max_closed).unwrap() > 0.0);
}

#[test]
fn zero_history_reduces_to_plain_neighbor_variance() {
    let fx = fixture(24);
    let zero = Array2::zeros(fx.h.dim());
    let a = vrgcn_variance(&fx.p, &fx.h, &zero, &fx.w, 3).unwrap();
    let b = graphsage_variance(&fx.p, &fx.prod, 3).unwrap();
    assert!((a - b).abs() <= 1e-12 * b);
}

#[test]
fn single_node_graph_has_zero_variance() {
    let g = SparseGraph::from_edges(1, &[]).unwrap();
    let p = Laplacian::from_graph(&g);
    let prod = ExactProduct::from_hw(&p, Array2::from_elem((1, 2), 1.5));
    assert!(graphsage_variance(&p, &prod, 1).unwrap().abs() < 1e-15);
    assert!(fastgcn_variance(&p, &prod, 1).unwrap().abs() < 1e-15);
    assert!(ladies_expected_variance(&p, &g, &prod, 1, 1).unwrap().abs() < 1e-15);
}

#[test]
fn bounds_dominate_empirical_variance() {
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(20..60);
        let g = Generator::ErdosRenyi { n, p: 0.08 }.build(&mut rng).unwrap();
        let p = Laplacian::from_graph(&g);
        let hw = Array2::from_shape_simple_fn((n, 3), || rng.sample::<f64, _>(StandardNormal));
        let prod = ExactProduct::from_hw(&p, hw);
        let b = rng.random_range(1..=n / 2);
        let s = rng.random_range(1..10);
        let bounds = ladies_variance_bound(&p, &g, &prod, b, s, None).unwrap();
        let config = unnormalized(SamplerKind::Ladies { s_layer: s });
        let r = empirical_variance(&config, &p, &g, &prod, &BatchSource::Uniform { size: b }, 400, &mut rng).unwrap();
        assert!(
            r.empirical <= bounds.ladies,
            "seed {seed}: {} > {}",
            r.empirical,
            bounds.ladies
        );
        let exact = ladies_expected_variance(&p, &g, &prod, b, s).unwrap();
        assert!(exact <= bounds.ladies);
        assert!(fastgcn_variance(&p, &prod, s).unwrap() <= bounds.fastgcn);
        let wider = ladies_variance_bound(&p, &g, &prod, b, 2 * s, None).unwrap();
        assert!(wider.ladies < bounds.ladies);
    }
}
