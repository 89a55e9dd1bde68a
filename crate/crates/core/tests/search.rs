use hwpareto_core::architect::Estimator;
use hwpareto_core::archspace::{enumerate_true_front, generate_benchmark, Benchmark, Recipe};
use hwpareto_core::hypernet::{HypernetConfig, MetaHypernet};
use hwpareto_core::moo::Preference;
use hwpareto_core::pareto::hypervolume;
use hwpareto_core::pipeline::{exact_surrogates, feature_len, pretrained_hypernet};
use hwpareto_core::predictor::{ExactSurrogate, HardwareSurrogate};
use hwpareto_core::rng::{seeded, substream};
use hwpareto_core::search::*;
use rand::Rng;

fn small_bench(seed: u64) -> Benchmark {
    generate_benchmark(&Recipe { seed, choices: vec![3; 3], devices: 4, test_devices: 1, ..Recipe::default() }).unwrap()
}

fn rough_net(bench: &Benchmark, seed: u64) -> MetaHypernet {
    let cfg = HypernetConfig { bank_size: 4, bins: 10, init_std: 0.5 };
    MetaHypernet::new(bench.space.clone(), bench.objectives(), feature_len(bench).unwrap(), cfg, &mut seeded(seed)).unwrap()
}

fn context<'a>(bench: &'a Benchmark, hw: &'a [ExactSurrogate], constraints: Vec<f64>) -> ObjectiveContext<'a> {
    let refs: Vec<&dyn HardwareSurrogate> = hw.iter().map(|h| h as &dyn HardwareSurrogate).collect();
    let mut ctx =
        ObjectiveContext::new(bench, refs, AccuracySurrogate::Frozen { table: bench.accuracy_valid.values.clone() }, constraints, 0.001)
            .unwrap();
    ctx.precompute_hardware_stats(256, 0).unwrap();
    ctx.reset_accuracy_stats(256, 0, 0).unwrap();
    ctx
}

fn random_preference<R: Rng>(m: usize, rng: &mut R) -> Preference {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    Preference::new(w.iter().map(|x| x / s).collect()).unwrap()
}

#[test]
fn device_gradient_matches_finite_differences() {
    let bench = small_bench(3);
    let hw = exact_surrogates(&bench).unwrap();
    let ctx = context(&bench, &hw, Vec::new());
    let mut rng = seeded(11);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for case in 0..100 {
        let mut net = rough_net(&bench, case);
        let est = if case % 2 == 0 { Estimator::ReinMax } else { Estimator::GumbelSt };
        let r = random_preference(2, &mut rng);
        let device = rng.random_range(0..bench.devices.len());
        let dg = device_gradient(&mut net, &ctx, device, &r, est, 1.0, &mut rng).unwrap();
        let nonzero: Vec<usize> = (0..dg.grad.len()).filter(|&i| dg.grad[i] != 0.0).collect();
        assert!(!nonzero.is_empty());
        for _ in 0..3 {
            let i = nonzero[rng.random_range(0..nonzero.len())];
            let h = 1e-5;
            let x0 = net.params().values()[i];
            net.params_mut().values_mut()[i] = x0 + h;
            let lp = frozen_sample_loss(&net, &ctx, device, &r, &dg).unwrap();
            net.params_mut().values_mut()[i] = x0 - h;
            let lm = frozen_sample_loss(&net, &ctx, device, &r, &dg).unwrap();
            net.params_mut().values_mut()[i] = x0;
            let fd = (lp - lm) / (2.0 * h);
            let err = (fd - dg.grad[i]).abs() / fd.abs().max(dg.grad[i].abs()).max(1e-6);
            worst = worst.max(err);
            checked += 1;
        }
    }
    assert!(checked >= 300, "only {checked} nonzero coordinates checked");
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn accuracy_only_preference_ignores_hardware() {
    // r = (1, 0): the hardware term has zero weight, so swapping the latency
    // table for another device's must not change the gradient.
    let bench = small_bench(4);
    let hw = exact_surrogates(&bench).unwrap();
    let ctx = context(&bench, &hw, Vec::new());
    let mut swapped = bench.clone();
    swapped.devices[0].hardware[0].values = bench.devices[1].hardware[0].values.clone();
    let hw2 = exact_surrogates(&swapped).unwrap();
    let mut ctx2 = context(&swapped, &hw2, Vec::new());
    ctx2.hardware_stats = ctx.hardware_stats.clone();
    let r = Preference::new(vec![1.0, 0.0]).unwrap();
    let mut a = rough_net(&bench, 1);
    let mut b = a.clone();
    let ga = device_gradient(&mut a, &ctx, 0, &r, Estimator::ReinMax, 1.0, &mut seeded(5)).unwrap();
    let gb = device_gradient(&mut b, &ctx2, 0, &r, Estimator::ReinMax, 1.0, &mut seeded(5)).unwrap();
    // the cosine penalty still sees the hardware value, so compare without it
    let ctx_nc = ObjectiveContext { cosine_weight: 0.0, ..context(&bench, &hw, Vec::new()) };
    let mut ctx2_nc = ObjectiveContext { cosine_weight: 0.0, ..context(&swapped, &hw2, Vec::new()) };
    ctx2_nc.hardware_stats = ctx_nc.hardware_stats.clone();
    let ha = device_gradient(&mut a, &ctx_nc, 0, &r, Estimator::ReinMax, 1.0, &mut seeded(5)).unwrap();
    let hb = device_gradient(&mut b, &ctx2_nc, 0, &r, Estimator::ReinMax, 1.0, &mut seeded(5)).unwrap();
    assert_eq!(ha.grad, hb.grad);
    assert_eq!(ga.sample.config, gb.sample.config);
}

#[test]
fn identical_devices_give_identical_gradients() {
    let mut bench = small_bench(5);
    bench.devices[1].hardware = bench.devices[0].hardware.clone();
    bench.profiles[1].features = bench.profiles[0].features.clone();
    let hw = exact_surrogates(&bench).unwrap();
    let ctx = context(&bench, &hw, Vec::new());
    let r = Preference::new(vec![0.3, 0.7]).unwrap();
    let mut net = rough_net(&bench, 2);
    let g0 = device_gradient(&mut net, &ctx, 0, &r, Estimator::ReinMax, 1.0, &mut seeded(9)).unwrap();
    let g1 = device_gradient(&mut net, &ctx, 1, &r, Estimator::ReinMax, 1.0, &mut seeded(9)).unwrap();
    assert_eq!(g0.grad, g1.grad);
}

#[test]
fn constraint_one_gates_hardware_and_zero_never_does() {
    let bench = small_bench(6);
    let hw = exact_surrogates(&bench).unwrap();
    let r = Preference::new(vec![0.5, 0.5]).unwrap();
    let enc = bench.space.one_hot_encode(&bench.space.config_at(7).unwrap()).unwrap();
    let open = context(&bench, &hw, vec![0.0]).upper_objective(0, &r, &enc, None).unwrap();
    let shut = context(&bench, &hw, vec![1.0]).upper_objective(0, &r, &enc, None).unwrap();
    assert_eq!(open.active, vec![true, true]);
    assert_eq!(shut.active, vec![true, false]);
    assert_eq!(open.loss, shut.loss);
    let acc_only = ObjectiveContext { cosine_weight: 0.0, ..context(&bench, &hw, vec![1.0]) };
    let e = acc_only.upper_objective(0, &r, &enc, None).unwrap();
    let (_, g_acc) = acc_only.accuracy.evaluate(&bench.space, &enc).unwrap();
    let (lo, hi) = acc_only.accuracy_stats.bounds().unwrap();
    for (a, b) in e.grad_encoding.iter().zip(&g_acc) {
        assert!((a - 0.5 * b / (hi - lo)).abs() < 1e-12);
    }
}

fn quick_cfg(seed: u64) -> SearchConfig {
    SearchConfig { epochs: 2, steps_per_epoch: 10, seed, ..SearchConfig::default() }
}

#[test]
fn zero_learning_rate_leaves_hypernetwork_unchanged() {
    let bench = small_bench(7);
    let hw = exact_surrogates(&bench).unwrap();
    let refs: Vec<&dyn HardwareSurrogate> = hw.iter().map(|h| h as &dyn HardwareSurrogate).collect();
    let (mut net, _) = pretrained_hypernet(&bench, &HypernetConfig::default(), &Default::default(), 0).unwrap();
    let before = net.params().values().to_vec();
    for scheme in UpdateScheme::ALL {
        let cfg = SearchConfig { lr: 0.0, scheme, ..quick_cfg(0) };
        let trace = search(&mut net, &bench, &refs, &cfg, None).unwrap();
        assert_eq!(net.params().values(), &before[..]);
        for d in 0..bench.devices.len() {
            assert_eq!(trace.final_hypervolume(d), trace.initial_hypervolume.iter().find(|p| p.0 == d).map(|p| p.1));
        }
    }
}

#[test]
fn search_is_deterministic_per_seed() {
    let bench = small_bench(8);
    let hw = exact_surrogates(&bench).unwrap();
    let refs: Vec<&dyn HardwareSurrogate> = hw.iter().map(|h| h as &dyn HardwareSurrogate).collect();
    let run = |seed| {
        let (mut net, _) = pretrained_hypernet(&bench, &HypernetConfig::default(), &Default::default(), 0).unwrap();
        let t = search(&mut net, &bench, &refs, &quick_cfg(seed), None).unwrap();
        (net.params().values().to_vec(), t)
    };
    let (a, ta) = run(1);
    let (b, tb) = run(1);
    let (c, _) = run(2);
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_ne!(a, c);
    assert_eq!(ta.epochs.len(), 2);
    assert_eq!(ta.epochs[0].gamma.len(), bench.train_devices.len());
    let g: f64 = ta.epochs[0].gamma.iter().sum();
    assert!((g - 1.0).abs() < 1e-9);
}

#[test]
fn mgd_with_one_device_is_a_plain_adam_step() {
    let bench = small_bench(9);
    let hw = exact_surrogates(&bench).unwrap();
    let refs: Vec<&dyn HardwareSurrogate> = hw.iter().map(|h| h as &dyn HardwareSurrogate).collect();
    let (net0, _) = pretrained_hypernet(&bench, &HypernetConfig::default(), &Default::default(), 0).unwrap();
    let mut net = net0.clone();
    let cfg = SearchConfig { epochs: 1, steps_per_epoch: 1, devices: vec![2], weight_decay: 0.0, ..quick_cfg(3) };
    search(&mut net, &bench, &refs, &cfg, None).unwrap();

    // replay the single step by hand
    let mut ctx = context(&bench, &hw, Vec::new());
    ctx.precompute_hardware_stats(cfg.norm_samples, cfg.seed).unwrap();
    ctx.reset_accuracy_stats(cfg.norm_samples, cfg.seed, 0).unwrap();
    let mut rng = substream(cfg.seed, &[hwpareto_core::rng::tags::SEARCH_UPPER, 0, 2]);
    let dir = hwpareto_core::moo::DirichletParams::uniform(2).unwrap();
    let r = hwpareto_core::moo::sample_preference(&dir, &mut rng);
    let mut replay = net0.clone();
    let dg = device_gradient(&mut replay, &ctx, 2, &r, cfg.estimator, cfg.tau, &mut rng).unwrap();
    let mut adam = hwpareto_core::numerics::Adam::decoupled(cfg.lr, 0.0);
    adam.step(replay.params_mut().values_mut(), &dg.grad).unwrap();
    assert_eq!(net.params().values(), replay.params().values());
}

#[test]
fn random_search_over_everything_recovers_true_front() {
    let bench = small_bench(10);
    let total = bench.space.total_configs();
    for d in 0..bench.devices.len() {
        let p = run_baseline(BaselineKind::Rs, &bench, d, total, 0, &HypernetConfig::default()).unwrap();
        let tf = enumerate_true_front(&bench, d, &[0, 1]).unwrap();
        let hv = hypervolume(tf.front.points(), &[1.0, 1.0]).unwrap();
        assert!((p.hypervolume - hv).abs() < 1e-12);
        assert_eq!(p.configs.len(), total);
    }
}

#[test]
fn baselines_are_deterministic_per_seed() {
    let bench = small_bench(11);
    for kind in [BaselineKind::Rs, BaselineKind::Rhpn] {
        let a = run_baseline(kind, &bench, 1, 8, 4, &HypernetConfig::default()).unwrap();
        let b = run_baseline(kind, &bench, 1, 8, 4, &HypernetConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.readouts.len() == 8 && a.hypervolume >= 0.0 && a.hypervolume <= 1.0);
    }
    assert_eq!(BaselineKind::parse("rhpn").unwrap(), BaselineKind::Rhpn);
    assert!(BaselineKind::parse("nsga").is_err());
}

#[test]
fn fixed_accuracy_preference_lands_in_top_two() {
    let bench = generate_benchmark(&Recipe::default()).unwrap();
    let hw = exact_surrogates(&bench).unwrap();
    let refs: Vec<&dyn HardwareSurrogate> = hw.iter().map(|h| h as &dyn HardwareSurrogate).collect();
    let (mut net, _) = pretrained_hypernet(&bench, &HypernetConfig::default(), &Default::default(), 0).unwrap();
    let cfg = SearchConfig {
        epochs: 5,
        devices: vec![0],
        fixed_preference: Some(vec![1.0, 0.0]),
        ..SearchConfig::default()
    };
    search(&mut net, &bench, &refs, &cfg, None).unwrap();
    let mut order: Vec<usize> = (0..bench.space.total_configs()).collect();
    let acc = &bench.accuracy_valid.values;
    order.sort_by(|&a, &b| acc[a].total_cmp(&acc[b]));
    let logits = net.logits(&[1.0, 0.0], &bench.profile(0).unwrap().concat()).unwrap();
    let pick = bench.space.index_of(&bench.space.argmax_config(&logits).unwrap()).unwrap();
    assert!(order[..2].contains(&pick), "picked config {pick}, top two {:?}", &order[..2]);
}

#[test]
fn trainable_surrogate_reduces_lower_loss() {
    let bench = small_bench(12);
    let hw = exact_surrogates(&bench).unwrap();
    let refs: Vec<&dyn HardwareSurrogate> = hw.iter().map(|h| h as &dyn HardwareSurrogate).collect();
    let (mut net, _) = pretrained_hypernet(&bench, &HypernetConfig::default(), &Default::default(), 0).unwrap();
    let cfg = SearchConfig { epochs: 6, steps_per_epoch: 50, surrogate: SurrogateMode::Trainable, ..quick_cfg(0) };
    let t = search(&mut net, &bench, &refs, &cfg, None).unwrap();
    let first = t.epochs[0].lower_loss.unwrap();
    let last = t.epochs.last().unwrap().lower_loss.unwrap();
    assert!(last < 0.5 * first, "lower loss {first} -> {last}");
}

#[test]
fn config_validation_rejects_bad_shapes() {
    let bench = small_bench(13);
    let bad = [
        SearchConfig { beta: vec![1.0; 3], ..SearchConfig::default() },
        SearchConfig { constraints: vec![0.1, 0.2], ..SearchConfig::default() },
        SearchConfig { tau: 0.0, ..SearchConfig::default() },
        SearchConfig { devices: vec![99], ..SearchConfig::default() },
        SearchConfig { fixed_preference: Some(vec![0.2, 0.2]), ..SearchConfig::default() },
        SearchConfig { steps_per_epoch: 0, ..SearchConfig::default() },
    ];
    for cfg in bad {
        assert!(cfg.validate(&bench).is_err(), "{cfg:?}");
    }
    assert_eq!(UpdateScheme::parse("sequential").unwrap(), UpdateScheme::Sequential);
    assert!(UpdateScheme::parse("adam").is_err());
}
