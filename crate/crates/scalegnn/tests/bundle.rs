use std::fs;

use scalegnn::bundle::{load_bundle, load_hops, read_manifest, save_bundle, save_hops};
use scalegnn::import::{import_csv, CsvSources};
use scalegnn::Error;
use scalegnn_core::adjacency::NormSpec;
use scalegnn_core::models::precompute_hops;
use scalegnn_core::sbm::{generate_sbm, SyntheticSpec};
use scalegnn_core::Dataset;

fn small(seed: u64) -> Dataset {
    generate_sbm(&SyntheticSpec {
        num_nodes: 300,
        num_classes: 3,
        ..SyntheticSpec::fixture(seed)
    })
    .unwrap()
}

#[test]
fn save_load_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let data = small(1);
    let m = save_bundle(dir.path(), "t", &data).unwrap();
    assert_eq!(m.num_nodes, 300);
    assert_eq!(m.train_size as usize, data.split.train.len());
    assert_eq!(load_bundle(dir.path()).unwrap(), data);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_bundle(a.path(), "t", &small(4)).unwrap();
    save_bundle(b.path(), "t", &small(4)).unwrap();
    for f in ["manifest.json", "edges.bin", "features.bin", "labels.bin", "splits.bin"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn corrupted_files_give_distinct_errors() {
    let dir = tempfile::tempdir().unwrap();
    save_bundle(dir.path(), "t", &small(2)).unwrap();
    let feats = dir.path().join("features.bin");
    let bytes = fs::read(&feats).unwrap();

    fs::write(&feats, &bytes[..bytes.len() - 4]).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::CountMismatch { .. })));

    let mut flipped = bytes.clone();
    flipped[40] ^= 0x01;
    fs::write(&feats, &flipped).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::Checksum { .. })));

    fs::write(&feats, &bytes).unwrap();
    let mpath = dir.path().join("manifest.json");
    let text = fs::read_to_string(&mpath).unwrap();
    fs::write(&mpath, text.replace("\"schema_version\": 1", "\"schema_version\": 9")).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(Error::Version { found: 9, .. })));
    assert!(matches!(read_manifest(dir.path()), Err(Error::Version { .. })));
}

#[test]
fn hop_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = small(3);
    save_bundle(dir.path(), "t", &data).unwrap();
    let hops = precompute_hops(&NormSpec::GCN.apply(&data.graph), &data.features, 2, None).unwrap();
    let path = save_hops(dir.path(), &hops).unwrap();
    assert!(path.ends_with("hops/sym_2"));
    assert!(path.join("x_2.bin").exists());
    let back = load_hops(dir.path(), NormSpec::GCN, 2).unwrap().unwrap();
    for l in 0..=2 {
        // stored as f32
        let scale = hops.hop(l).data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(back.hop(l).max_abs_diff(hops.hop(l)) <= scale * 1e-7);
    }
    assert!(load_hops(dir.path(), NormSpec::GCN, 3).unwrap().is_none());
}

#[test]
fn csv_import_builds_the_described_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    fs::write(p("e.csv"), "src,dst\n0,1\n1,2\n").unwrap();
    fs::write(p("x.csv"), "1.0,0.5\n2.0,0.25\n3.0,0.0\n").unwrap();
    fs::write(p("y.csv"), "label\n0\n1\n1\n").unwrap();
    fs::write(p("s.csv"), "train\nval\ntest\n").unwrap();
    let data = import_csv(&CsvSources {
        edges: &p("e.csv"),
        features: &p("x.csv"),
        labels: &p("y.csv"),
        splits: &p("s.csv"),
        symmetrize: true,
    })
    .unwrap();
    assert_eq!(data.graph.num_edges(), 4);
    assert!(data.graph.has_edge(2, 1));
    assert_eq!(data.features.get(2, 0), 3.0);
    assert_eq!(data.num_classes(), 2);
    assert_eq!((data.split.train.clone(), data.split.test.clone()), (vec![0], vec![2]));

    fs::write(p("x.csv"), "1.0,0.5\n2.0\n3.0,0.0\n").unwrap();
    assert!(import_csv(&CsvSources {
        edges: &p("e.csv"),
        features: &p("x.csv"),
        labels: &p("y.csv"),
        splits: &p("s.csv"),
        symmetrize: true,
    })
    .is_err());
}
