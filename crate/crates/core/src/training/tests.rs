use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{Graph, ParamStore, Tensor};
use crate::dataio::EncodedRecord;
use crate::distributions::kl;
use crate::error::Error;
use crate::model::{Ablation, Architecture, Batch, ForwardOptions, ForwardTrace, ModelSpec, PdsNet};

fn spec() -> ModelSpec {
    ModelSpec {
        embed_exp: 2,
        latent_dim: 4,
        prior_hidden: 8,
        posterior_hidden: 8,
        head_widths: [12, 8, 6],
    }
}

fn net(seed: u64) -> PdsNet {
    PdsNet::init(Architecture::new(spec(), [5; 6]).unwrap(), seed).unwrap()
}

fn records(n: usize) -> Vec<EncodedRecord> {
    (0..n)
        .map(|i| EncodedRecord {
            ids: [i % 5, (i * 3) % 5, (i + 1) % 5, (i * 2) % 5, (i + 3) % 5, (i * 4) % 5],
            rt: 0.2 + 0.3 * (i % 7) as f64,
        })
        .collect()
}

fn scalar(g: &Graph<'_>, v: crate::autodiff::Var) -> f64 {
    g.value(v).item().unwrap()
}

#[test]
fn task_loss_examples() {
    let mut g = Graph::new();
    let y = g.constant(Tensor::column(&[1.0, 2.0]));
    let same = g.constant(Tensor::column(&[1.0, 2.0]));
    let off = g.constant(Tensor::column(&[2.0, 4.0]));
    for kind in LossKind::ALL {
        let l = task_loss(&mut g, y, same, kind, 1.0).unwrap();
        assert_eq!(scalar(&g, l), 0.0);
    }
    let l = task_loss(&mut g, y, off, LossKind::Mae, 1.0).unwrap();
    assert_eq!(scalar(&g, l), 1.5);
    let l = task_loss(&mut g, y, off, LossKind::Mse, 1.0).unwrap();
    assert_eq!(scalar(&g, l), 2.5);

    let small = g.constant(Tensor::column(&[1.3, 1.6]));
    let h = task_loss(&mut g, y, small, LossKind::Huber, 1.0).unwrap();
    let m = task_loss(&mut g, y, small, LossKind::Mse, 1.0).unwrap();
    assert!((scalar(&g, h) - scalar(&g, m) / 2.0).abs() < 1e-15);
    let h = task_loss(&mut g, y, off, LossKind::Huber, 1.0).unwrap();
    assert_eq!(scalar(&g, h), (0.5 + 1.5) / 2.0);

    let empty = g.constant(Tensor::zeros(&[0, 1]));
    assert!(task_loss(&mut g, empty, empty, LossKind::Mae, 1.0).is_err());
}

fn forward<'p>(n: &'p PdsNet, batch: &Batch, ablation: Ablation) -> (Graph<'p>, ForwardTrace) {
    let mut g = n.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = n.forward(&mut g, batch, &mut rng, &ForwardOptions::train(ablation)).unwrap();
    (g, t)
}

/// Labels at chosen residuals from the current `ŷ1`.
fn labels_at(g: &Graph<'_>, t: &ForwardTrace, offsets: &[f64]) -> Tensor {
    let y: Vec<f64> = g.value(t.y1).data().iter().zip(offsets).map(|(p, o)| p + o).collect();
    Tensor::column(&y)
}

fn has_grad(grads: &crate::autodiff::Gradients, store: &ParamStore, prefix: &str) -> bool {
    store
        .iter()
        .filter(|(_, name, _)| name.starts_with(prefix))
        .any(|(id, _, _)| grads.param(id).is_some_and(|g| g.data().iter().any(|v| *v != 0.0)))
}

#[test]
fn mask_stats_count_untrusted() {
    let n = net(1);
    let batch = Batch::from_records(&records(10));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let offsets = [0.1, -0.2, 1.0, 0.0, 0.3, -1.0, 0.49, 0.7, 0.2, -0.1];
    let y = labels_at(&g, &t, &offsets);
    let out = h_loss(&mut g, &t, &y, &TrainConfig::default()).unwrap();
    assert_eq!((out.stats.trusted, out.stats.untrusted), (7, 3));
    assert!((out.stats.trusted_fraction() - 0.7).abs() < 1e-15);
}

#[test]
fn all_trusted_is_two_branch_task_loss() {
    let n = net(2);
    let batch = Batch::from_records(&records(6));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let y = labels_at(&g, &t, &[0.1; 6]);
    let out = h_loss(&mut g, &t, &y, &TrainConfig::default()).unwrap();
    assert!(out.align.is_none());
    let yv = g.constant(y.clone());
    let t1 = task_loss(&mut g, yv, t.y1, LossKind::Mae, 1.0).unwrap();
    let t2 = task_loss(&mut g, yv, t.posterior.as_ref().unwrap().y2, LossKind::Mae, 1.0).unwrap();
    assert!((scalar(&g, out.loss) - scalar(&g, t1) - scalar(&g, t2)).abs() < 1e-12);
    let grads = g.backward(out.loss).unwrap();
    assert!(!has_grad(&grads, n.params(), "prior2"));
    assert!(!has_grad(&grads, n.params(), "prior3"));
}

#[test]
fn infinite_delta_trusts_everything() {
    let n = net(2);
    let batch = Batch::from_records(&records(6));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let y = labels_at(&g, &t, &[5.0, -9.0, 1.0, 0.0, 30.0, 2.0]);
    let cfg = TrainConfig {
        delta: f64::INFINITY,
        ..TrainConfig::default()
    };
    let out = h_loss(&mut g, &t, &y, &cfg).unwrap();
    assert_eq!(out.stats.untrusted, 0);
    let m = g.mean(out.task);
    assert!((scalar(&g, out.loss) - scalar(&g, m)).abs() < 1e-12);
}

#[test]
fn all_untrusted_is_weighted_kl() {
    let n = net(3);
    let batch = Batch::from_records(&records(6));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let y = labels_at(&g, &t, &[2.0; 6]);
    let cfg = TrainConfig::default();
    let out = h_loss(&mut g, &t, &y, &cfg).unwrap();
    let post = t.posterior.as_ref().unwrap().dist;
    let mut expected = 0.0;
    for (p, lambda) in t.priors.iter().zip(cfg.lambdas) {
        let k = kl(&mut g, &post, p).unwrap();
        expected += lambda * scalar(&g, k);
    }
    assert!((scalar(&g, out.loss) - expected).abs() < 1e-10);
    let grads = g.backward(out.loss).unwrap();
    assert!(!has_grad(&grads, n.params(), "head.3"));
    assert!(!has_grad(&grads, n.params(), "head.out"));
    assert!(!has_grad(&grads, n.params(), "posterior"), "posterior gradient is stopped by default");
    assert!(has_grad(&grads, n.params(), "prior1"));
}

#[test]
fn posterior_receives_kl_gradient_when_not_stopped() {
    let n = net(3);
    let batch = Batch::from_records(&records(6));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let y = labels_at(&g, &t, &[2.0; 6]);
    let cfg = TrainConfig {
        stop_posterior_grad: false,
        ..TrainConfig::default()
    };
    let out = h_loss(&mut g, &t, &y, &cfg).unwrap();
    let grads = g.backward(out.loss).unwrap();
    assert!(has_grad(&grads, n.params(), "posterior"));
}

#[test]
fn per_record_branch_exclusivity() {
    let n = net(4);
    let batch = Batch::from_records(&records(8));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let offsets = [0.1, 2.0, -0.3, -1.5, 0.0, 0.9, 0.2, -0.6];
    let y = labels_at(&g, &t, &offsets);
    let out = h_loss(&mut g, &t, &y, &TrainConfig::default()).unwrap();
    let grads = g.backward(out.loss).unwrap();
    let task = grads.wrt(out.task).unwrap();
    let align = out.align.as_ref().unwrap();
    for (r, o) in offsets.iter().enumerate() {
        let trusted = o.abs() < 0.5;
        if trusted {
            assert_eq!(task.data()[r], 1.0 / 8.0);
        } else {
            assert_eq!(task.data()[r], 0.0);
        }
        for k in &align.kl {
            let gk = grads.wrt(*k).unwrap().data()[r];
            if trusted {
                assert_eq!(gk, 0.0);
            } else {
                assert!(gk > 0.0);
            }
        }
    }
}

#[test]
fn zero_lambdas_make_alignment_a_no_op() {
    let n = net(5);
    let batch = Batch::from_records(&records(6));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let y = labels_at(&g, &t, &[3.0; 6]);
    let cfg = TrainConfig {
        lambdas: [0.0; 3],
        ..TrainConfig::default()
    };
    let out = h_loss(&mut g, &t, &y, &cfg).unwrap();
    assert_eq!(scalar(&g, out.loss), 0.0);
    let grads = g.backward(out.loss).unwrap();
    for prefix in ["prior", "embed", "head", "posterior"] {
        assert!(!has_grad(&grads, n.params(), prefix), "{prefix}");
    }
}

#[test]
fn alignment_levels_and_contract() {
    let n = net(6);
    let batch = Batch::from_records(&records(4));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let cfg = TrainConfig::default();
    assert_eq!(noise_resilient_align(&mut g, &t, &[true; 4], &cfg).unwrap().kl.len(), 3);
    let no_ds = TrainConfig {
        ablation: Ablation::NoDeepSup,
        ..TrainConfig::default()
    };
    assert_eq!(noise_resilient_align(&mut g, &t, &[true; 4], &no_ds).unwrap().kl.len(), 1);
    assert!(matches!(
        noise_resilient_align(&mut g, &t, &[false; 4], &cfg),
        Err(Error::Contract(_))
    ));
}

#[test]
fn no_deep_sup_loss_is_plain_task_loss() {
    let n = net(7);
    let batch = Batch::from_records(&records(6));
    let (mut g, t) = forward(&n, &batch, Ablation::NoDeepSup);
    let y = labels_at(&g, &t, &[0.1, 3.0, 0.2, -2.0, 0.0, 1.0]);
    let cfg = TrainConfig {
        ablation: Ablation::NoDeepSup,
        ..TrainConfig::default()
    };
    let out = h_loss(&mut g, &t, &y, &cfg).unwrap();
    assert!((scalar(&g, out.loss) - (0.1 + 3.0 + 0.2 + 2.0 + 0.0 + 1.0) / 6.0).abs() < 1e-12);
}

#[test]
fn non_positive_delta_is_rejected() {
    let n = net(8);
    let batch = Batch::from_records(&records(2));
    let (mut g, t) = forward(&n, &batch, Ablation::Full);
    let cfg = TrainConfig {
        delta: 0.0,
        ..TrainConfig::default()
    };
    assert!(h_loss(&mut g, &t, &batch.labels(), &cfg).is_err());
    assert!(cfg.validate().is_err());
}

/// Redraws parameters under `prefix` with fan-in scaled weights so the
/// posterior is far from the near-identical distributions of a fresh init.
fn spread(n: &mut PdsNet, prefix: &str, seed: u64) {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = n.params().ids().filter(|id| n.params().name(*id).starts_with(prefix)).collect();
    for id in ids {
        let t = n.params_mut().get_mut(id);
        let std = 1.0 / (t.shape()[0] as f64).sqrt();
        let normal = Normal::new(0.0, std).unwrap();
        t.data_mut().iter_mut().for_each(|v| *v = normal.sample(&mut rng));
    }
}

fn quadratic_store(w0: f64) -> ParamStore {
    let mut s = ParamStore::new();
    s.add("w", Tensor::new(vec![1], vec![w0]).unwrap()).unwrap();
    s
}

fn quadratic_grads(store: &ParamStore) -> crate::autodiff::Gradients {
    let mut g = Graph::with_params(store);
    let w = g.param(store.id("w").unwrap());
    let l = g.square(w);
    let l = g.sum(l);
    g.backward(l).unwrap()
}

#[test]
fn nadam_shrinks_quadratic() {
    let mut store = quadratic_store(1.0);
    let mut state = NadamState::default();
    let mut prev = 1.0f64;
    // Momentum carries w past zero at step 19; every standard Nadam variant
    // overshoots on this problem before step 20.
    for _ in 0..18 {
        let grads = quadratic_grads(&store);
        nadam_step(&mut store, &grads, &mut state, 0.1).unwrap();
        let w = store.get(store.id("w").unwrap()).data()[0];
        assert!(w.abs() < prev.abs(), "{w} vs {prev}");
        prev = w;
    }
    assert_eq!(state.step, 18);
    for _ in 0..200 {
        let grads = quadratic_grads(&store);
        nadam_step(&mut store, &grads, &mut state, 0.1).unwrap();
    }
    assert!(store.get(store.id("w").unwrap()).data()[0].abs() < 0.05);
}

#[test]
fn nadam_first_step_matches_hand_formula() {
    let mut store = quadratic_store(1.0);
    let mut state = NadamState::default();
    let grads = quadratic_grads(&store);
    nadam_step(&mut store, &grads, &mut state, 0.1).unwrap();
    let (b1, b2, eps, g) = (0.9f64, 0.999f64, 1e-8, 2.0);
    let mu = |t: f64| b1 * (1.0 - 0.5 * 0.96f64.powf(0.004 * t));
    let m = (1.0 - b1) * g;
    let v_hat = (1.0 - b2) * g * g / (1.0 - b2);
    let step = mu(2.0) * m / (1.0 - mu(1.0) * mu(2.0)) + (1.0 - mu(1.0)) * g / (1.0 - mu(1.0));
    let expected = 1.0 - 0.1 * step / (v_hat.sqrt() + eps);
    assert!((store.get(store.id("w").unwrap()).data()[0] - expected).abs() < 1e-15);
}

#[test]
fn nadam_zero_gradient_and_frozen_params_do_not_move() {
    let mut store = quadratic_store(0.0);
    let mut state = NadamState::default();
    let grads = quadratic_grads(&store);
    nadam_step(&mut store, &grads, &mut state, 0.1).unwrap();
    assert_eq!(store.get(store.id("w").unwrap()).data()[0], 0.0);

    let mut frozen = quadratic_store(1.0);
    frozen.set_all_trainable(false);
    let grads = quadratic_grads(&frozen);
    nadam_step(&mut frozen, &grads, &mut NadamState::default(), 0.1).unwrap();
    assert_eq!(frozen.get(frozen.id("w").unwrap()).data()[0], 1.0);
}

#[test]
fn nadam_rejects_non_finite_gradient_by_name() {
    let mut store = quadratic_store(f64::INFINITY);
    let grads = quadratic_grads(&store);
    let err = nadam_step(&mut store, &grads, &mut NadamState::default(), 0.1).unwrap_err();
    assert!(matches!(&err, Error::NonFinite(m) if m.contains("`w`")), "{err}");
}

#[test]
fn repeated_alignment_reduces_kl() {
    let mut n = net(9);
    spread(&mut n, "posterior.", 9);
    n.params_mut().train_only("prior1.");
    let batch = Batch::from_records(&records(16));
    let cfg = TrainConfig::default();
    let mut state = NadamState::default();
    let kl_now = |n: &PdsNet| -> (f64, crate::autodiff::Gradients) {
        let mut g = n.graph();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = n.forward(&mut g, &batch, &mut rng, &ForwardOptions::train(Ablation::Full)).unwrap();
        let terms = noise_resilient_align(&mut g, &t, &[true; 16], &cfg).unwrap();
        let l = g.mean(terms.kl[0]);
        (scalar(&g, l), g.backward(l).unwrap())
    };
    let (mut prev, mut grads) = kl_now(&n);
    let first = prev;
    let mut decreased = 0;
    for _ in 0..100 {
        nadam_step(n.params_mut(), &grads, &mut state, 1e-3).unwrap();
        let (k, gr) = kl_now(&n);
        if k < prev {
            decreased += 1;
        }
        prev = k;
        grads = gr;
    }
    assert!(decreased >= 90, "{decreased}/100");
    assert!(prev < 0.75 * first, "{prev} vs {first}");
}

fn data(train: &[EncodedRecord], validation: &[EncodedRecord]) -> TrainData<'static> {
    TrainData {
        train: Box::leak(train.to_vec().into_boxed_slice()),
        validation: Box::leak(validation.to_vec().into_boxed_slice()),
        vocab: [5; 6],
    }
}

#[test]
fn zero_epochs_returns_initial_params() {
    let recs = records(20);
    let cfg = TrainConfig {
        epochs: 0,
        seed: 4,
        ..TrainConfig::default()
    };
    let (trained, history) = train(&data(&recs, &[]), &spec(), &cfg).unwrap();
    assert!(history.epochs.is_empty());
    assert!(trained.params().bitwise_eq(net(4).params()));
    assert_eq!(history.to_csv(), format!("{HISTORY_HEADER}\n"));
}

#[test]
fn identical_runs_identical_history() {
    let recs = records(40);
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 8,
        seed: 11,
        ..TrainConfig::default()
    };
    let d = data(&recs[..30], &recs[30..]);
    let (a, ha) = train(&d, &spec(), &cfg).unwrap();
    let (b, hb) = train(&d, &spec(), &cfg).unwrap();
    assert_eq!(ha.to_csv(), hb.to_csv());
    assert!(a.params().bitwise_eq(b.params()));
    assert_eq!(ha.epochs.len(), 4);
    let mut seen = Vec::new();
    train_with(&d, &spec(), &cfg, &mut |row| seen.push(row.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2, 3, 4]);
}

#[test]
fn best_epoch_parameters_are_returned() {
    let recs = records(40);
    let cfg = TrainConfig {
        epochs: 6,
        batch_size: 8,
        seed: 2,
        lr: 0.05,
        ..TrainConfig::default()
    };
    let d = data(&recs[..30], &recs[30..]);
    let (net, history) = train(&d, &spec(), &cfg).unwrap();
    let best = history.best_epoch.unwrap();
    let best_mae = history.epochs[best - 1].val_mae;
    assert!(history.epochs.iter().all(|e| e.val_mae >= best_mae));
    let pred = net
        .predict(&recs[30..], &ForwardOptions::eval(Ablation::Full, false), 2 ^ 0x6576_616c)
        .unwrap();
    let got = crate::eval::mae(&crate::eval::labels(&recs[30..]), &pred).unwrap();
    assert!((got - best_mae).abs() < 1e-12);
}

#[test]
fn empty_training_split_and_divergence_are_errors() {
    let recs = records(10);
    assert!(matches!(
        train(&data(&[], &recs), &spec(), &TrainConfig::default()),
        Err(Error::Data(_))
    ));
    let cfg = TrainConfig {
        lr: 1e300,
        epochs: 3,
        batch_size: 5,
        ..TrainConfig::default()
    };
    let err = train(&data(&recs, &[]), &spec(), &cfg).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn config_rejects_unknown_keys() {
    assert!(toml::from_str::<TrainConfig>("delta = 0.3\nbogus = 1").is_err());
    let c: TrainConfig = toml::from_str("delta = 0.3\nablation = \"no_prob\"\nloss_kind = \"huber\"").unwrap();
    assert_eq!(c.delta, 0.3);
    assert_eq!(c.ablation, Ablation::NoProb);
    assert_eq!(c.loss_kind, LossKind::Huber);
    assert_eq!(c.batch_size, 64);
}

#[test]
fn objective_gradcheck_for_each_ablation() {
    let arch = Architecture::new(
        ModelSpec {
            embed_exp: 2,
            latent_dim: 4,
            prior_hidden: 6,
            posterior_hidden: 6,
            head_widths: [8, 6, 5],
        },
        [4; 6],
    )
    .unwrap();
    let recs = [
        EncodedRecord { ids: [1, 2, 3, 1, 0, 2], rt: 0.4 },
        EncodedRecord { ids: [2, 1, 0, 3, 1, 1], rt: 1.3 },
        EncodedRecord { ids: [3, 3, 1, 2, 2, 0], rt: 2.2 },
        EncodedRecord { ids: [0, 1, 2, 1, 3, 3], rt: 0.7 },
    ];
    let batch = Batch::from_records(&recs);
    for ablation in Ablation::ALL {
        let mut net = PdsNet::init(arch.clone(), 3).unwrap();
        net.randomize_generic(3);
        let cfg = TrainConfig {
            ablation,
            delta: 1.0,
            ..TrainConfig::default()
        };
        let err = loss_gradcheck(&net, &batch, &cfg, 5, 1e-5).unwrap();
        assert!(err < 1e-4, "{ablation}: {err}");
    }
}
