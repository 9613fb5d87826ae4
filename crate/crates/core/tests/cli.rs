use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use anyloc::feature_store::Dataset;
use anyloc::projection::PcaModel;
use anyloc::synthetic::{planted_dataset, PlantedConfig};
use anyloc::vocabulary::Vocabulary;
use anyloc::{DescriptorSet, FeatureDir, FeatureMap};
use serde_json::Value;

fn anyloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anyloc"))
        .args(args)
        .env_remove("ANYLOC_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = anyloc(args);
    assert_eq!(code(&o), 0, "{args:?}\nstdout: {}\nstderr: {}", stdout(&o), stderr(&o));
    stdout(&o)
}

fn dataset(dir: &Path, cfg: PlantedConfig) -> PathBuf {
    let data = planted_dataset(&cfg).unwrap();
    Dataset::create(dir, &data.manifest, data.maps).unwrap();
    dir.to_path_buf()
}

fn planted(dir: &Path) -> PathBuf {
    dataset(
        dir,
        PlantedConfig {
            pairs: 10,
            ..PlantedConfig::default()
        },
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_reports_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = planted(&tmp.path().join("ds"));
    assert_eq!(ok(&["validate", s(&ds)]).trim(), "OK, 20 maps, dim 16");

    std::fs::remove_file(ds.join("db0003.anyf")).unwrap();
    let o = anyloc(&["validate", s(&ds)]);
    assert_eq!(code(&o), 1);
    assert!(
        stdout(&o).contains("FAIL: missing feature file for 'db0003'"),
        "{}",
        stdout(&o)
    );

    let ds = planted(&tmp.path().join("mixed"));
    FeatureDir::new(&ds)
        .store(&FeatureMap::new("q0002", 1, 1, 8, vec![0.5; 8]).unwrap())
        .unwrap();
    let o = anyloc(&["validate", s(&ds)]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(
        out.contains("FAIL: mixed feature dims: dim 8") && out.contains("dim 16"),
        "{out}"
    );

    std::fs::write(ds.join("q0002.anyf"), b"ANYLFEAT junk").unwrap();
    let o = anyloc(&["validate", s(&ds)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("unreadable feature file for 'q0002'"));
}

#[test]
fn missing_paths_are_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let nowhere = tmp.path().join("nowhere");
    for args in [
        vec!["validate", s(&nowhere)],
        vec!["evaluate", s(&nowhere)],
        vec!["fit-pca", "--descriptors", s(&nowhere), "--out", "x"],
    ] {
        let o = anyloc(&args);
        assert_eq!(code(&o), 3, "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("nowhere"));
    }
}

#[test]
fn build_vocab_defaults_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let big = dataset(
        &tmp.path().join("big"),
        PlantedConfig {
            pairs: 4,
            height: 3,
            width: 3,
            dim: 1536,
            ..PlantedConfig::default()
        },
    );
    let out = tmp.path().join("v.bin");
    let text = ok(&["build-vocab", "--part", s(&big), "--out", s(&out)]);
    assert!(text.contains("k=32 dim=1536"), "{text}");
    assert_eq!(Vocabulary::load(&out).unwrap().k(), 32);

    let small = planted(&tmp.path().join("small"));
    let o = anyloc(&["build-vocab", "--part", s(&small), "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert!(
        stderr(&o).contains("no default cluster count for 16-dim features"),
        "{}",
        stderr(&o)
    );
    assert!(stdout(&o).contains("k=32 dim=16"));

    let o = anyloc(&["build-vocab", "--part", s(&small), "--k", "1000", "--out", s(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = anyloc(&["build-vocab", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    let o = anyloc(&["build-vocab", "--part", &format!("{}:0", s(&small)), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn build_vocab_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = planted(&tmp.path().join("ds"));
    let (a, b) = (tmp.path().join("a.bin"), tmp.path().join("b.bin"));
    let ta = ok(&[
        "build-vocab",
        "--part",
        &format!("{}:2", s(&ds)),
        "--k",
        "6",
        "--out",
        s(&a),
    ]);
    let tb = ok(&[
        "build-vocab",
        "--part",
        &format!("{}:2", s(&ds)),
        "--k",
        "6",
        "--out",
        s(&b),
    ]);
    assert_eq!(ta, tb);
    assert!(ta.contains("from 80 of 80 features"), "{ta}");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let fp = Vocabulary::load(&a).unwrap().fingerprint().to_hex();
    assert!(ta.contains(&format!("fingerprint {fp}")));
}

#[test]
fn urban_preset_expands_against_a_datasets_root() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("datasets");
    for (dir, name) in [("oxford", "Oxford"), ("stlucia", "St Lucia"), ("pitts", "Pitts-30k")] {
        dataset(
            &root.join(dir),
            PlantedConfig {
                name: name.into(),
                pairs: 8,
                ..PlantedConfig::default()
            },
        );
    }
    let out = tmp.path().join("urban.bin");
    let text = ok(&[
        "build-vocab",
        "--preset",
        "urban",
        "--datasets-root",
        s(&root),
        "--k",
        "4",
        "--out",
        s(&out),
    ]);
    // 8 + 8 + 8/4 database images of 16 pixels
    assert!(text.contains("from 288 of 288 features"), "{text}");

    std::fs::remove_dir_all(root.join("pitts")).unwrap();
    let o = anyloc(&[
        "build-vocab",
        "--preset",
        "urban",
        "--datasets-root",
        s(&root),
        "--k",
        "4",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Pitts-30k"));
    let o = anyloc(&[
        "build-vocab",
        "--preset",
        "martian",
        "--datasets-root",
        s(&root),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = planted(&tmp.path().join("ds"));
    let vocab = tmp.path().join("v.bin");
    ok(&["build-vocab", "--part", s(&ds), "--k", "8", "--out", s(&vocab)]);

    let o = anyloc(&["evaluate", s(&ds), "--method", "gem", "--vocab", s(&vocab)]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("--vocab is only used by --method vlad"));
    assert!(stdout(&o).contains("R@1"));

    let stem = tmp.path().join("vlad");
    ok(&[
        "evaluate",
        s(&ds),
        "--method",
        "vlad",
        "--vocab",
        s(&vocab),
        "--k",
        "1,3",
        "--out",
        s(&stem),
    ]);
    let doc = read_json(&stem.with_extension("json"));
    let report = &doc["report"];
    assert_eq!(report["method_tag"], "vlad-hard");
    assert_eq!(report["dim"], 8 * 16);
    assert_eq!(report["k_values"], serde_json::json!([1, 3]));
    assert_eq!(
        report["vocab_fingerprint"],
        Vocabulary::load(&vocab).unwrap().fingerprint().to_hex()
    );
    assert_eq!(doc["config"]["method"], "vlad");
    assert!(std::fs::read_to_string(stem.with_extension("txt"))
        .unwrap()
        .contains("R@3"));

    let stem = tmp.path().join("soft");
    ok(&[
        "evaluate",
        s(&ds),
        "--method",
        "vlad",
        "--assignment",
        "soft",
        "--temperature",
        "0.5",
        "--vocab",
        s(&vocab),
        "--out",
        s(&stem),
    ]);
    assert_eq!(
        read_json(&stem.with_extension("json"))["report"]["method_tag"],
        "vlad-soft-t0.5"
    );

    let stem = tmp.path().join("pca");
    ok(&[
        "evaluate",
        s(&ds),
        "--method",
        "gem",
        "--pca",
        "6",
        "--whiten",
        "--metric",
        "l2",
        "--out",
        s(&stem),
    ]);
    let report = &read_json(&stem.with_extension("json"))["report"];
    assert_eq!(report["dim"], 6);
    assert_eq!(report["method_tag"], "gem-p3-pcaw6");
    assert_eq!(report["metric"], "euclidean");

    let o = anyloc(&["evaluate", s(&ds), "--method", "vlad"]);
    assert_eq!(code(&o), 2);
    let other = tmp.path().join("other.bin");
    Vocabulary::new(vec![0.0; 2 * 4], 2, 4, 42, Vec::new())
        .unwrap()
        .save(&other)
        .unwrap();
    let o = anyloc(&["evaluate", s(&ds), "--method", "vlad", "--vocab", s(&other)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = anyloc(&["evaluate", s(&ds), "--pca", "500"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_output_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = planted(&tmp.path().join("ds"));
    let stem = tmp.path().join("r");
    let mut outputs = Vec::new();
    for _ in 0..2 {
        ok(&["evaluate", s(&ds), "--method", "gem", "--pca", "5", "--out", s(&stem)]);
        outputs.push(std::fs::read(stem.with_extension("json")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn precomputed_cls_descriptors() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = planted(&tmp.path().join("ds"));
    let dataset = Dataset::open(&ds).unwrap();
    let mut cls = DescriptorSet::new("cls", 16, None).unwrap();
    for e in dataset.manifest.entries() {
        let map = anyloc::FeatureSource::load(&dataset.features, &e.image_id).unwrap();
        cls.push(&e.image_id, map.pixel(0)).unwrap();
    }
    let path = tmp.path().join("cls.bin");
    cls.save(&path).unwrap();
    let stem = tmp.path().join("cls");
    ok(&["evaluate", s(&ds), "--descriptors", s(&path), "--out", s(&stem)]);
    let report = &read_json(&stem.with_extension("json"))["report"];
    assert_eq!(report["method_tag"], "cls");
    assert_eq!(report["dim"], 16);

    let partial = cls.subset(["db0000", "q0000"]).unwrap();
    partial.save(&path).unwrap();
    let o = anyloc(&["evaluate", s(&ds), "--descriptors", s(&path)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_fills_unset_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = planted(&tmp.path().join("ds"));
    let config = tmp.path().join("anyloc.toml");
    std::fs::write(
        &config,
        "log_level = \"warn\"\n[evaluate]\nmethod = \"gap\"\nk = [1, 2]\n",
    )
    .unwrap();
    let stem = tmp.path().join("r");

    let o = anyloc(&["--config", s(&config), "evaluate", s(&ds), "--out", s(&stem)]);
    assert_eq!(code(&o), 0);
    assert!(
        !stderr(&o).contains("resolved config"),
        "log level from the file applies"
    );
    let doc = read_json(&stem.with_extension("json"));
    assert_eq!(doc["config"]["method"], "gap");
    assert_eq!(doc["report"]["k_values"], serde_json::json!([1, 2]));

    let o = anyloc(&[
        "--config",
        s(&config),
        "--log-level",
        "info",
        "evaluate",
        s(&ds),
        "--method",
        "gmp",
        "--out",
        s(&stem),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("resolved config"));
    let doc = read_json(&stem.with_extension("json"));
    assert_eq!(doc["config"]["method"], "gmp");
    assert_eq!(doc["report"]["method_tag"], "gmp");

    std::fs::write(&config, "[evaluate]\nbogus = 1\n").unwrap();
    assert_eq!(code(&anyloc(&["--config", s(&config), "evaluate", s(&ds)])), 2);
    std::fs::write(&config, "[evaluat]\nk = [1]\n").unwrap();
    assert_eq!(code(&anyloc(&["--config", s(&config), "evaluate", s(&ds)])), 2);
}

#[test]
fn aggregate_fit_pca_scatter_and_clustviz() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = planted(&tmp.path().join("ds"));
    let other = dataset(
        &tmp.path().join("other"),
        PlantedConfig {
            name: "other".into(),
            pairs: 10,
            domain_seed: 9,
            ..PlantedConfig::default()
        },
    );

    let db = tmp.path().join("db.bin");
    let text = ok(&[
        "aggregate",
        s(&ds),
        "--method",
        "gap",
        "--role",
        "database",
        "--out",
        s(&db),
    ]);
    assert_eq!(text.trim(), "10 descriptors, method gap, dim 16");
    let set = DescriptorSet::load(&db).unwrap();
    assert_eq!(set.ids()[0], "db0000");

    let all = tmp.path().join("all.bin");
    ok(&["aggregate", s(&ds), "--out", s(&all)]);
    assert_eq!(DescriptorSet::load(&all).unwrap().len(), 20);

    let model = tmp.path().join("pca.bin");
    let text = ok(&[
        "fit-pca",
        "--descriptors",
        s(&all),
        "--manifest",
        s(&ds.join("manifest.toml")),
        "--dim",
        "4",
        "--whiten",
        "--out",
        s(&model),
    ]);
    assert!(text.contains("on 10 descriptors"), "{text}");
    let m = PcaModel::load(&model).unwrap();
    assert_eq!((m.input_dim(), m.output_dim(), m.whiten()), (16, 4, true));

    let b = tmp.path().join("b.bin");
    ok(&["aggregate", s(&other), "--method", "gap", "--out", s(&b)]);
    let tsv = tmp.path().join("scatter.tsv");
    ok(&[
        "scatter",
        "--set",
        &format!("one={}", s(&db)),
        "--set",
        &format!("two={}", s(&b)),
        "--out",
        s(&tsv),
    ]);
    let text = std::fs::read_to_string(&tsv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("image_id\tlabel\tpc1\tpc2"));
    assert_eq!(lines.count(), 30);
    let stdout_tsv = ok(&["scatter", "--set", &format!("one={}", s(&db)), "--fit", s(&b)]);
    assert_eq!(stdout_tsv.lines().count(), 11);

    let vocab = tmp.path().join("v.bin");
    ok(&["build-vocab", "--part", s(&ds), "--k", "8", "--out", s(&vocab)]);
    let viz = tmp.path().join("viz");
    ok(&[
        "clustviz",
        s(&ds),
        "--vocab",
        s(&vocab),
        "--ids",
        "db0000,q0000",
        "--scale",
        "3",
        "--montage",
        "--out",
        s(&viz),
    ]);
    for f in ["db0000.png", "q0000.png", "montage.png"] {
        assert!(viz.join(f).is_file(), "{f}");
    }
    let img = image::open(viz.join("db0000.png")).unwrap();
    assert_eq!((img.width(), img.height()), (12, 12));
    let o = anyloc(&[
        "clustviz",
        s(&ds),
        "--vocab",
        s(&vocab),
        "--ids",
        "nope",
        "--out",
        s(&viz),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors() {
    assert_eq!(code(&anyloc(&[])), 2);
    assert_eq!(code(&anyloc(&["frobnicate"])), 2);
    assert_eq!(code(&anyloc(&["evaluate", "x", "--method", "netvlad"])), 2);
    assert_eq!(code(&anyloc(&["--help"])), 0);
    let help = stdout(&anyloc(&["--help"]));
    for sub in [
        "validate",
        "build-vocab",
        "aggregate",
        "fit-pca",
        "evaluate",
        "scatter",
        "clustviz",
    ] {
        assert!(help.contains(sub), "{sub} missing from help");
    }
}
