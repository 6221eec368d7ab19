use std::fs;

use nicknet::config::{ExperimentConfig, ModeName};
use nicknet::Error;
use nicknet_core::ann::ExecutionMode;

fn field_of(text: &str) -> String {
    match ExperimentConfig::from_toml(text) {
        Err(Error::Config { field, .. }) => field,
        other => panic!("expected a config error for {text:?}, got {other:?}"),
    }
}

#[test]
fn empty_config_is_all_defaults() {
    let cfg = ExperimentConfig::from_toml("").unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
    assert_eq!(cfg.network.layer_sizes, vec![64, 64, 10]);
}

#[test]
fn every_out_of_range_field_is_named() {
    let cases = [
        ("format_version = 2", "format_version"),
        ("[chemistry]\nmolecules = 0", "chemistry.molecules"),
        ("[chemistry]\nefficiency = 0.0", "chemistry.efficiency"),
        ("[chemistry]\nefficiency = 1.5", "chemistry.efficiency"),
        ("[chemistry]\nspurious_rate = 1.0", "chemistry.spurious_rate"),
        ("[chemistry]\nspurious_rate = -0.1", "chemistry.spurious_rate"),
        ("[chemistry]\ngain = 0.0", "chemistry.gain"),
        ("[chemistry]\noutput_cap = 1.1", "chemistry.output_cap"),
        ("[device]\nk_physical = 0", "device.k_physical"),
        ("[device]\nchannel_width_um = -1.0", "device.channel_width_um"),
        ("[device]\nfootprint_factor = 0", "device.footprint_factor"),
        ("[device]\ncell_area_mm2 = 0.0", "device.cell_area_mm2"),
        ("[device.timing]\ntransport_s = -1.0", "device.timing.transport_s"),
        ("[device.timing]\nmult_s = -1.0", "device.timing.mult_s"),
        ("[device.timing]\nmerge_s = -1.0", "device.timing.merge_s"),
        ("[device.timing]\ndisplacement_s = -1.0", "device.timing.displacement_s"),
        ("[device.timing]\nthreshold_s = -1.0", "device.timing.threshold_s"),
        ("[device.timing]\ngate_s = -1.0", "device.timing.gate_s"),
        ("[device.timing]\ntranslation_s = -1.0", "device.timing.translation_s"),
        ("[device.timing]\nnick_s = -1.0", "device.timing.nick_s"),
        ("[network]\nlayer_sizes = [64]", "network.layer_sizes"),
        ("[network]\nlayer_sizes = [64, 0, 10]", "network.layer_sizes"),
        ("[training]\nepochs = 0", "training.epochs"),
        ("[training]\nbatch_size = 0", "training.batch_size"),
        ("[training]\nlearning_rate = 0.0", "training.learning_rate"),
        ("[training]\nlr_decay = 1.5", "training.lr_decay"),
        ("[training]\nsurrogate_slope = -2.0", "training.surrogate_slope"),
        ("[training]\nlogit_scale = 0.0", "training.logit_scale"),
        ("[training]\ninit_max = 0.0", "training.init_max"),
        ("[training]\nthreshold_init = 2.0", "training.threshold_init"),
        ("[training]\nmin_threshold = 0.0", "training.min_threshold"),
    ];
    for (text, field) in cases {
        assert_eq!(field_of(text), field, "{text}");
        let msg = ExperimentConfig::from_toml(text).unwrap_err().to_string();
        assert!(msg.contains(field), "{msg}");
    }
}

#[test]
fn unknown_keys_and_bad_types_are_rejected() {
    for text in ["[chemistry]\nmolcules = 5", "[bogus]\nx = 1", "[run]\nmode = \"quantum\"", "[chemistry]\nmolecules = \"many\""] {
        assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config { .. })), "{text}");
    }
}

#[test]
fn load_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("model.json"), "{}").unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, "[network]\nspec = \"model.json\"\n[run]\ntrace = \"out.trace\"\nmode = \"sampled\"\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.network.spec.as_deref(), Some(dir.path().join("model.json").as_path()));
    assert_eq!(cfg.run.trace.as_deref(), Some(dir.path().join("out.trace").as_path()));
    assert_eq!(
        cfg.execution_mode(cfg.run.mode),
        ExecutionMode::SampledChemistry { molecules: 100_000, seed: 0 }
    );
    assert_eq!(cfg.execution_mode(ModeName::Float), ExecutionMode::FloatReference);
}

#[test]
fn missing_paths_name_their_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, "[network]\nspec = \"absent.json\"\n").unwrap();
    assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config { field, .. }) if field == "network.spec"));
    fs::write(&path, "[run]\nreport = \"no/such/dir/r.csv\"\n").unwrap();
    assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config { field, .. }) if field == "run.report"));
}

#[test]
fn config_drives_device_and_training() {
    let cfg = ExperimentConfig::from_toml(
        "[device]\nk_physical = 49\n[device.timing]\nmult_s = 3600.0\n[training]\nepochs = 3\nseed = 9\n",
    )
    .unwrap();
    assert_eq!(cfg.device_config().unwrap().k_physical, 49);
    assert_eq!(cfg.timing().mult, 3600.0);
    let t = cfg.train_config();
    assert_eq!((t.epochs, t.seed), (3, 9));
}
