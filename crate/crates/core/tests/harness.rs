use std::path::PathBuf;
use std::process::Command;

use mecbo::harness::summary::final_row;
use mecbo::harness::{
    read_records_csv, relative_difference, run_experiment, run_repetition, summarize,
    write_records_csv, ExperimentConfig, ExperimentSpec, Method, SlotRecord,
};
use mecbo::mec_env::MecConfig;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn spec(method: Method, slots: u32, reps: u32) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(MecConfig::default(), method);
    s.slots = slots;
    s.reps = reps;
    s.seed = 42;
    s
}

fn record(rep: u32, slot: u32, avg_regret: f64, edc_total: f64) -> SlotRecord {
    SlotRecord {
        rep,
        slot,
        method: "x".into(),
        decision: Default::default(),
        y: -edc_total,
        oracle_value: 0.0,
        regret: 0.0,
        cum_regret: avg_regret * slot as f64,
        avg_regret,
        edc_total,
        edc_per_wd: Vec::new(),
    }
}

fn csv_bytes(records: &[SlotRecord]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records_csv(&mut buf, records).unwrap();
    buf
}

#[test]
fn single_slot_gives_one_record() {
    for m in [Method::Tvbo, Method::CtxTvbo, Method::TiBo, Method::Mab, Method::Bco, Method::Oracle] {
        let r = run_repetition(&spec(m, 1, 1), 0).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].cum_regret, r[0].regret);
        assert_eq!(r[0].avg_regret, r[0].regret);
    }
}

#[test]
fn oracle_has_no_regret() {
    let records = run_experiment(&spec(Method::Oracle, 200, 5)).unwrap();
    assert!(records.iter().all(|r| r.regret.abs() <= 1e-6));
}

#[test]
fn regret_bookkeeping_invariants() {
    let env = MecConfig::default();
    for m in [Method::Tvbo, Method::CtxTvbo, Method::Mab, Method::Bco] {
        let records = run_experiment(&spec(m, 40, 2)).unwrap();
        for rep in records.chunk_by(|a, b| a.rep == b.rep) {
            for w in rep.windows(2) {
                assert!(w[1].cum_regret >= w[0].cum_regret - 1e-12);
            }
            for r in rep {
                assert!(r.regret >= -1e-6, "{m}: regret {}", r.regret);
                assert!((r.avg_regret - r.cum_regret / r.slot as f64).abs() < 1e-12);
                r.decision.validate(&env).unwrap();
            }
        }
    }
}

#[test]
fn identical_specs_give_identical_csv() {
    for m in [Method::Tvbo, Method::Mab, Method::Bco] {
        let s = spec(m, 25, 3);
        assert_eq!(csv_bytes(&run_experiment(&s).unwrap()), csv_bytes(&run_experiment(&s).unwrap()));
    }
    let a = run_experiment(&spec(Method::Mab, 25, 1)).unwrap();
    let mut other = spec(Method::Mab, 25, 1);
    other.seed = 43;
    assert_ne!(csv_bytes(&a), csv_bytes(&run_experiment(&other).unwrap()));
}

#[test]
fn environment_is_shared_across_methods() {
    let a = run_repetition(&spec(Method::Mab, 30, 1), 0).unwrap();
    let b = run_repetition(&spec(Method::Bco, 30, 1), 0).unwrap();
    let oa: Vec<f64> = a.iter().map(|r| r.oracle_value).collect();
    let ob: Vec<f64> = b.iter().map(|r| r.oracle_value).collect();
    assert_eq!(oa, ob);
}

#[test]
fn csv_roundtrip() {
    let records = run_experiment(&spec(Method::Mab, 10, 2)).unwrap();
    let bytes = csv_bytes(&records);
    let header = std::str::from_utf8(&bytes).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "rep,slot,method,y,oracle_value,regret,cum_regret,avg_regret,edc_total");
    let back = read_records_csv(bytes.as_slice()).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in back.iter().zip(&records) {
        assert_eq!((a.rep, a.slot), (b.rep, b.slot));
        assert!((a.avg_regret - b.avg_regret).abs() <= 1e-11 * b.avg_regret.abs().max(1.0));
    }
}

#[test]
fn summary_matches_hand_computation() {
    let records = vec![
        record(0, 1, 1.0, 2.0),
        record(1, 1, 2.0, 4.0),
        record(2, 1, 6.0, 3.0),
        record(0, 2, 0.5, 4.0),
    ];
    let rows = summarize(&records).unwrap();
    let first = &rows[0];
    assert_eq!((first.slot, first.reps), (1, 3));
    assert!((first.mean_avg_regret - 3.0).abs() < 1e-15);
    // sample sd of (1, 2, 6) is √7
    assert!((first.se_avg_regret - (7.0f64 / 3.0).sqrt()).abs() < 1e-14);
    assert!((first.mean_avg_edc - 3.0).abs() < 1e-15);
    let last = final_row(&rows, "x").unwrap();
    assert_eq!((last.slot, last.reps, last.se_avg_regret), (2, 1, 0.0));
    assert!((last.mean_avg_edc - 3.0).abs() < 1e-15);
    assert_eq!(relative_difference(last.mean_avg_regret, last.mean_avg_regret), 0.0);
    assert!(summarize(&[]).is_err());
}

#[test]
fn preset_files_load() {
    for name in ["preset_a", "preset_b", "preset_c", "preset_n1", "preset_n3"] {
        let cfg = ExperimentConfig::load(configs_dir().join(format!("{name}.toml"))).unwrap();
        for s in cfg.specs() {
            s.validate().unwrap();
        }
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
    assert!(ExperimentConfig::from_toml("[env]\nbogus = 1\n").is_err());
}

#[test]
fn cli_run_and_summarize() {
    let bin = env!("CARGO_BIN_EXE_mecbo");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(bin)
        .args(["run", "--config"])
        .arg(configs_dir().join("preset_a.toml"))
        .args(["--method", "mab,bco", "--slots", "5", "--reps", "2", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["config.toml", "mab.csv", "bco.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = dir.path().join("summary.csv");
    let status = Command::new(bin)
        .args(["summarize", "--in"])
        .arg(&out)
        .arg("--out")
        .arg(&summary)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&summary).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 5);

    let status = Command::new(bin)
        .args(["oracle-check", "--config"])
        .arg(configs_dir().join("preset_n1.toml"))
        .status()
        .unwrap();
    assert!(status.success());
}
