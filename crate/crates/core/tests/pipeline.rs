use visco_surrogate::analytic::{stress, Branch, HyperelasticModel, Model, ViscousModel, VolumetricModel};
use visco_surrogate::continuum::{
    integrity_basis, kinematics_from, mode_isochoric_uniaxial, mode_simple_shear, DeformationState,
};
use visco_surrogate::gpr::FitOptions;
use visco_surrogate::harness::{
    generate_dataset, run_experiment, run_experiment_detailed, size_sweep, ExperimentId, ExperimentSpec, RegionClass,
};
use visco_surrogate::io::{read_dataset, write_dataset};
use visco_surrogate::surrogate::{
    build_star_dataset, train_branch, train_surrogate, BranchDataset, TrainedModel,
};
use visco_surrogate::{Error, SymTensor3, Tensor3};

fn shear_and_tension(model: &Model, rate: f64) -> Vec<(DeformationState, SymTensor3)> {
    let mut out = Vec::new();
    for i in 0..12 {
        let t = i as f64 / 11.0;
        for s in [
            mode_isochoric_uniaxial(1.0 + 0.3 * t, rate).unwrap(),
            mode_simple_shear(0.4 * t, rate).unwrap(),
        ] {
            if rate == 0.0 || !s.is_rate_free() {
                out.push((s, stress(model, &s).unwrap()));
            }
        }
    }
    out
}

#[test]
fn extraction_reproduces_the_training_stresses() {
    let cases: Vec<(Model, f64)> = vec![
        (HyperelasticModel::MooneyRivlin { a10: 1.0, a01: 0.5 }.into(), 0.0),
        (ViscousModel::Uss { k11: 1.0, k21: 1.0, c21: 0.75 }.into(), 20.0),
    ];
    for (model, rate) in cases {
        let data = BranchDataset::new(model.branch(), shear_and_tension(&model, rate)).unwrap();
        let star = build_star_dataset(&data).unwrap();
        for (i, (s, truth)) in data.records.iter().enumerate() {
            let rebuilt = visco_surrogate::analytic::assemble_stress(
                data.branch,
                &star.outputs[i],
                &integrity_basis(s),
                s.j,
            );
            assert!(
                (rebuilt - *truth).voigt_norm() <= 1e-9 * truth.voigt_norm().max(1.0),
                "{} record {i}: {rebuilt:?} vs {truth:?}",
                model.name()
            );
            assert!(star.residuals[i] <= 1e-9 * truth.voigt_norm().max(1.0));
        }
    }
}

#[test]
fn trained_surrogates_vanish_at_the_reference_state() {
    let models: Vec<(Model, f64)> = vec![
        (VolumetricModel::SimoMiehe { kappa: 10.0 }.into(), 0.0),
        (HyperelasticModel::MooneyRivlin { a10: 1.0, a01: 0.5 }.into(), 0.0),
        (ViscousModel::Uss { k11: 1.0, k21: 1.0, c21: 0.75 }.into(), 20.0),
    ];
    for (model, rate) in models {
        let records = match model.branch() {
            Branch::Vol => (0..11)
                .map(|i| {
                    let s = visco_surrogate::continuum::mode_confined_uniaxial(0.8 + 0.02 * i as f64).unwrap();
                    (s, stress(&model, &s).unwrap())
                })
                .collect(),
            _ => shear_and_tension(&model, rate),
        };
        let data = BranchDataset::new(model.branch(), records).unwrap();
        let (_, m) = train_branch(&data, &FitOptions::default(), None).unwrap();
        let s = m.predict_stress(&DeformationState::identity());
        assert!(s.voigt_norm() <= 1e-3 * data.stress_scale(), "{}: {s:?}", model.name());
    }
}

#[test]
fn surrogate_predictions_are_objective_and_isotropic() {
    let model: Model = ViscousModel::Uss { k11: 1.0, k21: 1.0, c21: 0.75 }.into();
    let data = BranchDataset::new(Branch::VIso, shear_and_tension(&model, 20.0)).unwrap();
    let (_, m) = train_branch(&data, &FitOptions::default(), None).unwrap();
    let q = Tensor3::rotation([0.6, 0.0, 0.8], 0.7);
    let s = kinematics_from(
        Tensor3::from_row_major([1.1, 0.1, 0.0, 0.05, 0.95, 0.02, 0.0, -0.03, 0.97]),
        Tensor3::from_row_major([5.0, 1.0, 0.0, 0.0, -2.0, 1.5, 0.5, 0.0, -3.0]),
    )
    .unwrap();
    let base = m.predict_stress(&s);
    let spatial = m.predict_stress(&s.rotated(&q).unwrap());
    assert!((spatial - base).voigt_norm() <= 1e-9 * base.voigt_norm());
    let turned = m.predict_stress(&kinematics_from(s.f.mul(q.transpose()), s.f_dot.mul(q.transpose())).unwrap());
    assert!((turned - base.rotate(&q)).voigt_norm() <= 1e-9 * base.voigt_norm());
}

#[test]
fn constrained_surrogate_dissipates_at_every_constraint_state() {
    let spec = ExperimentSpec::default_for(ExperimentId::Dynamic);
    let data = generate_dataset(&spec).unwrap();
    let (_, m) = train_branch(&data, &spec.fit_options(), None).unwrap();
    assert!(m.constrained);
    for s in data.states() {
        assert!(m.predict_stress(&s).ddot(&s.c_dot) >= -1e-8);
    }
}

#[test]
fn viscous_surrogate_requires_constraints() {
    let model: Model = ViscousModel::Pioletti { eta_prime: 2.0 }.into();
    let data = BranchDataset::new(Branch::VIso, shear_and_tension(&model, 5.0)).unwrap();
    let star = build_star_dataset(&data).unwrap();
    assert!(matches!(
        train_surrogate(&star, &FitOptions::default(), None, data.sha256()),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn branch_datasets_check_rates() {
    let moving = mode_isochoric_uniaxial(1.1, 3.0).unwrap();
    let still = mode_isochoric_uniaxial(1.1, 0.0).unwrap();
    assert!(BranchDataset::new(Branch::HIso, vec![(moving, SymTensor3::zero())]).is_err());
    assert!(BranchDataset::new(Branch::VIso, vec![(still, SymTensor3::zero())]).is_err());
}

#[test]
fn model_files_round_trip() {
    let model: Model = HyperelasticModel::Yeoh { c1: 1.46, c2: -0.21 }.into();
    let data = BranchDataset::new(Branch::HIso, shear_and_tension(&model, 0.0)).unwrap();
    let (_, m) = train_branch(&data, &FitOptions::default(), None).unwrap();
    let wrapped = TrainedModel::Surrogate(m);
    let back = TrainedModel::from_json(&wrapped.to_json().unwrap()).unwrap();
    let s = mode_simple_shear(0.33, 0.0).unwrap();
    assert_eq!(wrapped.predict_stress(&s), back.predict_stress(&s));
}

#[test]
fn dataset_csv_round_trip_preserves_the_hash() {
    let data = generate_dataset(&ExperimentSpec::default_for(ExperimentId::Dynamic)).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &data.records).unwrap();
    let back = BranchDataset::new(Branch::VIso, read_dataset(buf.as_slice()).unwrap()).unwrap();
    assert_eq!(back.sha256(), data.sha256());
}

fn dir_contents(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn identical_specs_write_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::default_for(ExperimentId::Quasistatic);
    spec.output_dir = Some(tmp.path().join("a"));
    run_experiment(&spec).unwrap();
    spec.output_dir = Some(tmp.path().join("b"));
    run_experiment(&spec).unwrap();
    let a = dir_contents(&tmp.path().join("a"));
    let b = dir_contents(&tmp.path().join("b"));
    assert_eq!(a.len(), 3 * 4 + 1);
    let strip = |files: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        files.into_iter().filter(|(n, _)| n.ends_with(".csv")).collect()
    };
    assert_eq!(strip(a), strip(b));
}

#[test]
fn quasistatic_report_bookkeeping() {
    let spec = ExperimentSpec::default_for(ExperimentId::Quasistatic);
    let run = run_experiment_detailed(&spec).unwrap();
    let report = &run.report;
    assert_eq!(report.training_size, 26);
    for m in &report.models {
        let evaluated: usize = m.regions.iter().map(|r| r.points.len() + r.dropped_coincident).sum();
        assert_eq!(evaluated, 26 + 3 * 51);
        for r in &m.regions {
            assert!(r.errs().iter().all(|&e| e >= 0.0));
            let counted = r.points.iter().filter(|p| p.err.is_some()).count() + r.excluded_near_zero;
            assert_eq!(counted, r.points.len());
        }
        assert_eq!(m.regions.iter().filter(|r| r.class == RegionClass::Training).count(), 1);
    }
    let classical = report.model("classical").unwrap();
    assert_eq!(classical.region("shear").unwrap().shear12_identically_zero, Some(true));
    let surrogate = report.model("surrogate").unwrap();
    assert_eq!(surrogate.region("shear").unwrap().shear12_identically_zero, Some(false));
    assert!(report.model("conventional").unwrap().fit.is_none());
}

#[test]
fn single_size_sweep_matches_a_run() {
    let spec = ExperimentSpec::default_for(ExperimentId::Hydrostatic);
    let rows = size_sweep(&spec, &[26]).unwrap();
    assert_eq!(rows.len(), 1);
    let report = run_experiment(&spec).unwrap();
    for m in &report.models {
        let e = rows[0].entry(&m.name).unwrap();
        assert_eq!(e.train_mean_err, m.class_means.training);
        assert_eq!(e.test_mean_err, m.class_means.testing);
    }
}

#[test]
fn experiment_errors_carry_context() {
    let mut spec = ExperimentSpec::default_for(ExperimentId::Quasistatic);
    spec.training.count = 1;
    let e = run_experiment(&spec).unwrap_err();
    assert!(matches!(e, Error::Experiment { .. }));
    assert!(e.to_string().contains("quasistatic"), "{e}");
}
