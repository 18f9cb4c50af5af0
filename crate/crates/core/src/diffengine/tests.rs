use super::*;
use crate::audio_io::AudioClip;
use crate::exec::ExecMode;

fn instance() -> (Model, AudioClip, usize) {
    random_instance(3).unwrap()
}

#[test]
fn vector_roundtrip_and_layout() {
    let (model, _, _) = instance();
    let v = model.to_vector();
    assert_eq!(v.values.len(), 8 * 7 + 8 * 8 + 8 + 3 * 8 + 3);
    let mut other = model.clone();
    other.load_vector(&v).unwrap();
    assert_eq!(other, model);
    let l = model.layout();
    assert_eq!(l.range(Group::Eta), 0..8);
    assert_eq!(l.locate(l.range(Group::BackendB2).start), Some((Group::BackendB2, 0)));
    assert_eq!(l.locate(l.len()), None);
    assert_eq!(v.group(Group::SigmaBw), &model.frontend.filterbank.sigma_bw[..]);
}

#[test]
fn cosine_schedule_reference_points() {
    assert_eq!(cosine_annealing_lr(0, 100, 1e-3, 1e-5), 1e-3);
    let mid = cosine_annealing_lr(50, 100, 1e-3, 1e-5);
    assert!((mid - (1e-3 + 1e-5) / 2.0).abs() < 1e-15);
    assert_eq!(cosine_annealing_lr(100, 100, 1e-3, 1e-5), 1e-3);
    let late = cosine_annealing_lr(99, 100, 1e-3, 1e-5);
    assert!(late < 1.1e-5);
}

#[test]
fn adam_zero_gradient_is_a_fixed_point() {
    let (mut model, _, _) = instance();
    let before = model.clone();
    let mut opt = OptimizerState::new(model.layout().len());
    let zero = ParamVector::zeros(model.layout());
    opt.adam_step(&mut model, &zero, 1e-3).unwrap();
    assert_eq!(model, before);
    assert_eq!(opt.step, 1);
}

#[test]
fn adam_first_step_moves_by_lr() {
    let (mut model, _, _) = instance();
    let before = model.to_vector();
    let mut grad = ParamVector::zeros(model.layout());
    let i = model.layout().range(Group::BackendW2).start + 2;
    grad.values[i] = -0.37;
    let mut opt = OptimizerState::new(before.values.len());
    opt.adam_step(&mut model, &grad, 1e-3).unwrap();
    let after = model.to_vector();
    assert!(((after.values[i] - before.values[i]) - 1e-3).abs() < 1e-9);
}

#[test]
fn adam_projects_eta() {
    let (mut model, _, _) = instance();
    model.frontend.filterbank.eta[0] = 0.9995;
    let mut grad = ParamVector::zeros(model.layout());
    grad.group_mut(Group::Eta)[0] = -1.0;
    let mut opt = OptimizerState::new(grad.values.len());
    opt.adam_step(&mut model, &grad, 1e-2).unwrap();
    assert_eq!(model.frontend.filterbank.eta[0], 1.0);
    grad.group_mut(Group::Eta)[0] = f64::NAN;
    assert!(matches!(
        opt.adam_step(&mut model, &grad, 1e-2),
        Err(crate::LeafError::Numerics { .. })
    ));
}

#[test]
fn outward_gradients_masked_at_bounds() {
    let (mut model, _, _) = instance();
    model.frontend.filterbank.eta[0] = 1.0;
    model.frontend.filterbank.sigma_bw[1] = crate::filterbank::SIGMA_BW_MIN;
    let mut grad = ParamVector::zeros(model.layout());
    grad.group_mut(Group::Eta)[0] = -0.5;
    grad.group_mut(Group::Eta)[1] = -0.5;
    grad.group_mut(Group::SigmaBw)[1] = 0.5;
    grad.group_mut(Group::SigmaBw)[2] = 0.5;
    mask_active_bounds(&model, &mut grad);
    assert_eq!(grad.group(Group::Eta)[0], 0.0);
    assert_eq!(grad.group(Group::Eta)[1], -0.5);
    assert_eq!(grad.group(Group::SigmaBw)[1], 0.0);
    assert_eq!(grad.group(Group::SigmaBw)[2], 0.5);
}

#[test]
fn silent_input_gives_dead_backend_path() {
    let (model, clip, label) = instance();
    let silent = AudioClip::new(vec![0.0; clip.len()], clip.sample_rate_hz).unwrap();
    let g = backward(&model, &[&silent], &[label]).unwrap();
    assert!(g.grad.group(Group::BackendW1).iter().all(|v| *v == 0.0));
}

#[test]
fn duplicated_batch_keeps_mean_gradient() {
    let (model, clip, label) = instance();
    let (_, clip2, _) = random_instance(11).unwrap();
    let once = backward(&model, &[&clip, &clip2], &[label, 0]).unwrap();
    let twice = backward(&model, &[&clip, &clip2, &clip, &clip2], &[label, 0, label, 0]).unwrap();
    assert!((once.loss - twice.loss).abs() < 1e-14);
    for (a, b) in once.grad.values.iter().zip(&twice.grad.values) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-6), "{a} vs {b}");
    }
}

#[test]
fn execution_modes_are_bit_identical() {
    let (model, clip, label) = instance();
    let (_, clip2, _) = random_instance(12).unwrap();
    let seq = backward_with(
        &model,
        &[&clip, &clip2],
        &[label, 1],
        &BackwardOptions {
            mode: ExecMode::Sequential,
            ..Default::default()
        },
    )
    .unwrap();
    let par = backward(&model, &[&clip, &clip2], &[label, 1]).unwrap();
    assert_eq!(seq.loss, par.loss);
    assert_eq!(seq.grad, par.grad);
}

#[test]
fn loss_matches_frontend_forward() {
    let (model, clip, label) = instance();
    let tf = crate::frontend::forward(&clip, &model.frontend).unwrap();
    let f = model.backend.forward(&tf.mean_pool());
    let expect = cross_entropy(&f.logits, label);
    let got = evaluate(&model, &[&clip], &[label], Objective::CrossEntropy, ExecMode::Sequential).unwrap();
    assert!((got[0].loss - expect).abs() < 1e-12);
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in [1, 2] {
        let (model, clip, label) = random_instance(seed).unwrap();
        let report = grad_check(&model, &clip, label, &GradCheckOptions::default()).unwrap();
        assert!(report.passed(), "{report}");
        for g in &report.groups {
            assert!(g.checked > 0, "{report}");
        }
    }
}

#[test]
fn feature_squares_objective_gradient() {
    let (model, clip, _) = instance();
    let opts = GradCheckOptions {
        objective: Objective::FeatureSquares,
        ..Default::default()
    };
    let report = grad_check(&model, &clip, 0, &opts).unwrap();
    assert!(report.passed(), "{report}");
    assert!(report.group(Group::Eta).unwrap().checked == 8);
}

#[test]
fn gradient_near_unit_compression_exponent() {
    let (mut model, clip, label) = instance();
    // r = sigmoid(5) ~ 0.9933
    model.frontend.pcen.r_logit.iter_mut().for_each(|r| *r = 5.0);
    let report = grad_check(&model, &clip, label, &GradCheckOptions::default()).unwrap();
    assert!(report.group(Group::PcenR).unwrap().passed(1e-4), "{report}");
}

#[test]
fn boundary_coordinates_are_skipped() {
    let (mut model, clip, label) = instance();
    model.frontend.filterbank.sigma_bw[0] = crate::filterbank::SIGMA_BW_MIN;
    model.frontend.filterbank.eta[0] = 0.0;
    let report = grad_check(&model, &clip, label, &GradCheckOptions::default()).unwrap();
    assert_eq!(report.group(Group::SigmaBw).unwrap().skipped, 1);
    assert_eq!(report.group(Group::Eta).unwrap().skipped, 1);
    assert!(report.passed(), "{report}");
}

#[test]
fn checkpoint_roundtrip_is_exact() {
    let (mut model, clip, label) = instance();
    let g = backward(&model, &[&clip], &[label]).unwrap();
    let mut opt = OptimizerState::new(model.layout().len());
    opt.adam_step(&mut model, &g.grad, 1e-3).unwrap();
    let mut state = std::collections::BTreeMap::new();
    state.insert("max_snr_db".to_string(), "-5".to_string());
    let ck = Checkpoint {
        epoch: 4,
        model,
        optimizer: opt,
        rng_seed: 99,
        state,
    };
    let back = Checkpoint::parse(&ck.to_text()).unwrap();
    assert_eq!(back, ck);
    assert!(Checkpoint::parse("# leafkit checkpoint v0\n").is_err());
}

#[test]
fn plain_central_differences_agree_at_small_step() {
    let (model, clip, label) = random_instance(5).unwrap();
    let opts = GradCheckOptions {
        step: 1e-5,
        richardson: false,
        ..Default::default()
    };
    let report = grad_check(&model, &clip, label, &opts).unwrap();
    assert!(report.passed(), "{report}");
}
