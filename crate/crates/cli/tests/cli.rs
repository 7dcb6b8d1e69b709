use std::path::{Path, PathBuf};
use std::process::Command;

use ecc_cli::config::{
    A2cSection, BaselineSection, CodeSection, CompareSection, Family, GeneticSection, Metric,
    PgSection, SweepSection,
};
use ecc_cli::{run_experiment, ExperimentConfig, ExperimentKind, Manifest};
use ecc_core::evaluator::DecoderSpec;
use ecc_core::polar::PolarCode;
use ecc_core::rl::a2c::PresetRange;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ecc-construct"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn evaluate_config(out: &Path) -> String {
    let fixture = repo().join("fixtures/dega_16_8.txt");
    format!(
        r#"
kind = "evaluate"
seed = 7
out = "{}"

[code]
n = 16
k = 8
construction = "{}"

[decoder]
kind = "sc"

[channel]
esn0_db = [4.5]

[budget]
min_errors = 100
max_frames = 200000
"#,
        out.display(),
        fixture.display()
    )
}

#[test]
fn evaluate_twice_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let cfg = write_config(
            tmp.path(),
            "eval.toml",
            &evaluate_config(&tmp.path().join("unused")),
        );
        let out = tmp.path().join(run);
        let status = bin()
            .args(["evaluate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        csvs.push(std::fs::read(out.join("bler.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("code_id,decoder,esn0_db,frames,errors,bler,seed")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[2], "4.5");
    assert_eq!(row[6], "7");
    let errors: u64 = row[4].parse().unwrap();
    assert!(errors >= 100);
}

#[test]
fn rerun_from_manifest_config_reproduces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::parse(&evaluate_config(&tmp.path().join("first"))).unwrap();
    let dir = run_experiment(&cfg).unwrap();
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.complete);
    assert_eq!(manifest.seed, 7);
    assert_eq!(manifest.artifacts, vec!["bler.csv".to_string()]);
    let mut again =
        ExperimentConfig::parse(&std::fs::read_to_string(dir.join("config.toml")).unwrap())
            .unwrap();
    assert_eq!(again, manifest.config);
    again.out = tmp.path().join("second");
    let dir2 = run_experiment(&again).unwrap();
    assert_eq!(
        std::fs::read(dir.join("bler.csv")).unwrap(),
        std::fs::read(dir2.join("bler.csv")).unwrap()
    );
}

#[test]
fn baseline_pw_profile_is_a_permutation() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("pw");
    let st = bin()
        .args(["baseline", "--config"])
        .arg(repo().join("configs/baseline_pw64.toml"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let mut rdr = csv::Reader::from_path(out.join("profile.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["index", "metric", "rank"]);
    let mut ranks: Vec<usize> = rdr
        .records()
        .map(|r| r.unwrap()[2].parse().unwrap())
        .collect();
    assert_eq!(ranks.len(), 64);
    ranks.sort_unstable();
    assert_eq!(ranks, (0..64).collect::<Vec<_>>());
    let code = PolarCode::load(out.join("construction.txt")).unwrap();
    assert_eq!((code.n(), code.k()), (64, 32));
}

fn full_config() -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::A2c,
        seed: 99,
        out: "runs/x".into(),
        code: Some(CodeSection {
            n: 32,
            k: Some(16),
            construction: None,
            matrix: None,
            family: Some(Family::RmPolar),
            design_db: Some(1.25),
        }),
        decoder: Some(DecoderSpec::SclGenie { list: 8 }),
        channel: ecc_cli::config::ChannelSection {
            esn0_db: vec![1.74, 2.76],
            convention: Default::default(),
        },
        budget: Default::default(),
        eval: Default::default(),
        genetic: Some(GeneticSection {
            snr_points: Some(vec![0.1, 0.3]),
            target_fitness: Some(1e-4),
            ..Default::default()
        }),
        pg: Some(PgSection {
            hidden_width: Some(12),
            osd_order: Some(2),
            ..Default::default()
        }),
        a2c: Some(A2cSection {
            k_low: 4,
            k_high: 20,
            hidden_width: None,
            batch_size: 32,
            actor_lr: 1e-3,
            critic_lr: 2e-3,
            gamma: 0.2,
            episodes: 10,
            preset: PresetRange::InclusiveEnd,
            snr_per_k: vec![(4, -1.5), (5, -0.75)],
        }),
        baseline: Some(BaselineSection {
            metric: Metric::Bhattacharyya,
            design_db: 0.0,
            z0: 0.3,
        }),
        sweep: Some(SweepSection {
            sequence: "seq.txt".into(),
            k_low: 4,
            k_high: 8,
            target_bler: 1e-2,
            design_grid: [-1.0, 3.0, 0.25],
            search_start_db: 2.0,
        }),
        compare: Some(CompareSection {
            constructions: vec!["a.txt".into()],
            matrices: vec!["b.txt".into()],
        }),
    }
}

#[test]
fn config_round_trip() {
    let cfg = full_config();
    let text = cfg.to_toml();
    let back = ExperimentConfig::parse(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(ExperimentConfig::parse(&back.to_toml()).unwrap(), cfg);
    let minimal = ExperimentConfig::parse("kind = \"baseline\"\n[code]\nn = 8\n").unwrap();
    assert_eq!(
        ExperimentConfig::parse(&minimal.to_toml()).unwrap(),
        minimal
    );
}

#[test]
fn invalid_config_exits_with_one_and_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("kind = \"evaluate\"\n[code]\nn = 16\nk = 8\nfamily = \"dega\"\n[channel]\nesn0_db = [1.0]\n", "decoder"),
        ("kind = \"baseline\"\n[code]\nn = 16\nbogus = 1\n", "bogus"),
        ("kind = \"evaluate\"\n[code]\nn = 16\nconstruction = \"/nonexistent\"\n", "code.construction"),
        ("kind = \"genetic\"\n[code]\nn = 16\nk = 8\n[decoder]\nkind = \"sc\"\n", "genetic.snr_points"),
    ];
    for (text, needle) in cases {
        let cfg = write_config(tmp.path(), "bad.toml", text);
        let kind = text.split('"').nth(1).unwrap();
        let out = bin().arg(kind).arg("--config").arg(&cfg).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{text}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{err} should mention {needle}");
    }
    let out = bin()
        .args(["evaluate", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["nonsense", "--config", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_failure_exits_with_two_and_flags_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let text = format!(
        "kind = \"evaluate\"\nout = \"{}\"\n[code]\nn = 16\nk = 11\nfamily = \"rm\"\n[decoder]\nkind = \"osd\"\norder = 12\n[channel]\nesn0_db = [1.0]\n",
        out_dir.display()
    );
    let cfg = write_config(tmp.path(), "rt.toml", &text);
    let out = bin()
        .arg("evaluate")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m: Manifest =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert!(!m.complete);
    assert!(m.error.is_some());
}

#[test]
fn compare_lists_identical_files_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = repo().join("fixtures/dega_16_8.txt");
    let text = format!(
        "kind = \"compare\"\nseed = 3\nout = \"{}\"\n[decoder]\nkind = \"scl_pm\"\nlist = 4\n[channel]\nesn0_db = [2.0, 3.0]\n[budget]\nmin_errors = 50\n[eval]\nshared_noise = true\n[compare]\nconstructions = [\"{f}\", \"{f}\"]\n",
        tmp.path().join("cmp").display(),
        f = fixture.display()
    );
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let dir = run_experiment(&cfg).unwrap();
    let mut rdr = csv::Reader::from_path(dir.join("compare.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec![
            "code_id",
            "decoder",
            "esn0_db",
            "frames",
            "errors",
            "bler",
            "seed",
            "ci_half_width"
        ]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0], rows[2]);
    assert_eq!(rows[1], rows[3]);
    for r in &rows {
        let frames: u64 = r[3].parse().unwrap();
        let errors: u64 = r[4].parse().unwrap();
        let bler: f64 = r[5].parse().unwrap();
        assert!(errors <= frames && (0.0..=1.0).contains(&bler));
    }
}

#[test]
fn compare_rejects_mixed_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let other = tmp.path().join("c32.txt");
    PolarCode::new(32, &[31, 30]).unwrap().save(&other).unwrap();
    let text = format!(
        "kind = \"compare\"\nout = \"{}\"\n[decoder]\nkind = \"sc\"\n[channel]\nesn0_db = [2.0]\n[compare]\nconstructions = [\"{}\", \"{}\"]\n",
        tmp.path().join("cmp").display(),
        repo().join("fixtures/dega_16_8.txt").display(),
        other.display()
    );
    let err = run_experiment(&ExperimentConfig::parse(&text).unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn genetic_smoke_finds_dega_in_most_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let shipped = PolarCode::load(repo().join("fixtures/dega_16_8.txt")).unwrap();
    let base = ExperimentConfig::load(&repo().join("configs/genetic_16_8.toml")).unwrap();
    let mut hits = 0;
    for seed in 0..10 {
        let cfg = ExperimentConfig {
            seed,
            out: tmp.path().join(format!("g{seed}")),
            ..base.clone()
        };
        let dir = run_experiment(&cfg).unwrap();
        let got = PolarCode::load(dir.join("construction.txt")).unwrap();
        hits += usize::from(got == shipped);
        let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
        assert!(trace.starts_with("iteration,best_fitness,offspring_fitness,hamming_to_reference"));
    }
    assert!(hits >= 8, "{hits}/10 seeds reached the DE/GA construction");
}

#[test]
fn a2c_and_sweep_pipeline_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let a2c = format!(
        "kind = \"a2c\"\nout = \"{}\"\n[code]\nn = 8\n[decoder]\nkind = \"scl_genie\"\nlist = 2\n[channel]\nesn0_db = [3.0]\n[budget]\nmin_errors = 20\nmax_frames = 20000\n[eval]\nworkers = 1\n[a2c]\nk_low = 2\nk_high = 5\nepisodes = 3\n",
        tmp.path().join("a2c").display()
    );
    let dir = run_experiment(&ExperimentConfig::parse(&a2c).unwrap()).unwrap();
    let seq = dir.join("sequence.txt");
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("episode,step,action,reward,advantage"));
    assert_eq!(trace.lines().count(), 1 + 3 * 4);
    let sweep = format!(
        "kind = \"sweep\"\nout = \"{}\"\n[decoder]\nkind = \"scl_genie\"\nlist = 2\n[budget]\nmin_errors = 20\nmax_frames = 20000\n[eval]\nworkers = 1\n[sweep]\nsequence = \"{}\"\nk_low = 3\nk_high = 4\ndesign_grid = [0.0, 4.0, 2.0]\n",
        tmp.path().join("sweep").display(),
        seq.display()
    );
    let dir = run_experiment(&ExperimentConfig::parse(&sweep).unwrap()).unwrap();
    let rel = std::fs::read_to_string(dir.join("relative_esn0.csv")).unwrap();
    assert!(rel.starts_with("k,learned_esn0_db,reference_esn0_db,reference_design_db,gain_db"));
    assert_eq!(rel.lines().count(), 3);
}

#[test]
fn pg_pipeline_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "kind = \"pg\"\nout = \"{}\"\n[code]\nn = 6\nk = 3\n[budget]\nmin_errors = 10\nmax_frames = 5000\n[eval]\nworkers = 1\n[pg]\nbatch_size = 4\niterations = 2\nlearning_rate = 1e-3\n",
        tmp.path().join("pg").display()
    );
    let dir = run_experiment(&ExperimentConfig::parse(&text).unwrap()).unwrap();
    let g = ecc_core::block::LinearCode::load(dir.join("generator.txt")).unwrap();
    assert_eq!((g.k(), g.n()), (3, 6));
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,mean_reward,best_reward"));
    ecc_core::neural::MlpParams::load(dir.join("policy.ckpt")).unwrap();
}
