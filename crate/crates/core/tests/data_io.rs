use std::fs;
use std::path::Path;

use ladies_core::data::{
    load_dataset, load_dataset_with, write_dataset, Generator, LoadOptions, FEATURES_FILE, GRAPH_FILE, LABELS_FILE,
    SPLITS_FILE,
};
use ladies_core::{DataError, SyntheticSpec};

fn write_files(dir: &Path, graph: &str, features: &str, labels: &str, splits: &str) {
    fs::write(dir.join(GRAPH_FILE), graph).unwrap();
    fs::write(dir.join(FEATURES_FILE), features).unwrap();
    fs::write(dir.join(LABELS_FILE), labels).unwrap();
    fs::write(dir.join(SPLITS_FILE), splits).unwrap();
}

const GRAPH: &str = "4 3\n0 1\n1 2\n2 3\n";
const FEATURES: &str = "4 2\n1 3\n-2 2\n0 0\n0.5 0.5\n";
const LABELS: &str = "0\n1\n1\n0\n";
const SPLITS: &str = "0 1\n2\n3\n";

fn load_variant(graph: &str, features: &str, labels: &str, splits: &str) -> Result<ladies_core::Dataset, DataError> {
    let dir = tempfile::tempdir().unwrap();
    write_files(dir.path(), graph, features, labels, splits);
    load_dataset(dir.path())
}

#[test]
fn small_dataset_loads() {
    let ds = load_variant(GRAPH, FEATURES, LABELS, SPLITS).unwrap();
    assert_eq!(ds.num_nodes(), 4);
    assert_eq!(ds.graph.num_edges(), 3);
    assert_eq!(ds.num_classes, 2);
    assert_eq!(ds.splits.train, vec![0, 1]);
    assert_eq!(ds.splits.test, vec![3]);
    assert_eq!(ds.features.row(0).to_vec(), vec![0.25, 0.75]);
    assert_eq!(ds.features.row(1).to_vec(), vec![-0.5, 0.5]);
    assert_eq!(ds.features.row(2).to_vec(), vec![0.0, 0.0]);
}

#[test]
fn raw_features_are_kept_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    write_files(dir.path(), GRAPH, FEATURES, LABELS, SPLITS);
    let ds = load_dataset_with(
        dir.path(),
        LoadOptions {
            normalize_features: false,
        },
    )
    .unwrap();
    assert_eq!(ds.features.row(0).to_vec(), vec![1.0, 3.0]);
}

#[test]
fn synthetic_round_trip_is_byte_identical() {
    let mut spec = SyntheticSpec::new(Generator::Sbm {
        block_sizes: vec![15, 15, 10],
        p_in: 0.3,
        p_out: 0.05,
    });
    spec.seed = 9;
    let ds = spec.generate().unwrap();
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    write_dataset(&ds, first.path()).unwrap();
    let back = load_dataset_with(
        first.path(),
        LoadOptions {
            normalize_features: false,
        },
    )
    .unwrap();
    assert_eq!(back, ds);
    write_dataset(&back, second.path()).unwrap();
    for file in [GRAPH_FILE, FEATURES_FILE, LABELS_FILE, SPLITS_FILE] {
        let a = fs::read(first.path().join(file)).unwrap();
        let b = fs::read(second.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    match load_dataset(dir.path()) {
        Err(DataError::Io { path, .. }) => assert!(path.ends_with(GRAPH_FILE)),
        other => panic!("expected an I/O error, got {other:?}"),
    }
}

#[test]
fn malformed_header_is_reported() {
    let err = load_variant("4\n0 1\n", FEATURES, LABELS, SPLITS).unwrap_err();
    assert!(
        matches!(err, DataError::Header { file, line: 1, .. } if file == GRAPH_FILE),
        "{err}"
    );
    let err = load_variant(GRAPH, "four 2\n", LABELS, SPLITS).unwrap_err();
    assert!(
        matches!(err, DataError::Header { file, .. } if file == FEATURES_FILE),
        "{err}"
    );
}

#[test]
fn out_of_range_indices_are_reported_with_line() {
    let err = load_variant("4 1\n0 4\n", FEATURES, LABELS, SPLITS).unwrap_err();
    match err {
        DataError::IndexOutOfRange {
            file,
            line,
            index,
            num_nodes,
        } => assert_eq!((file, line, index, num_nodes), (GRAPH_FILE, 2, 4, 4)),
        other => panic!("{other:?}"),
    }
    let err = load_variant(GRAPH, FEATURES, LABELS, "0 1\n2 9\n3\n").unwrap_err();
    assert!(
        matches!(err, DataError::IndexOutOfRange { line: 2, index: 9, .. }),
        "{err}"
    );
}

#[test]
fn count_mismatches_are_reported() {
    let err = load_variant("4 2\n0 1\n", FEATURES, LABELS, SPLITS).unwrap_err();
    assert!(
        matches!(
            err,
            DataError::Count {
                expected: 2,
                found: 1,
                ..
            }
        ),
        "{err}"
    );
    let err = load_variant(GRAPH, "4 2\n1 1\n1 1\n1 1\n", LABELS, SPLITS).unwrap_err();
    assert!(matches!(err, DataError::Count { .. }), "{err}");
    let err = load_variant(GRAPH, FEATURES, "0\n1\n", SPLITS).unwrap_err();
    assert!(matches!(err, DataError::Count { .. }), "{err}");
}

#[test]
fn overlapping_splits_are_rejected() {
    let err = load_variant(GRAPH, FEATURES, LABELS, "0 1\n1 2\n3\n").unwrap_err();
    assert!(matches!(err, DataError::SplitOverlap { line: 2, node: 1, .. }), "{err}");
}

#[test]
fn ragged_feature_rows_are_rejected() {
    let err = load_variant(GRAPH, "4 2\n1 3\n1\n0 0\n1 1\n", LABELS, SPLITS).unwrap_err();
    assert!(matches!(err, DataError::Parse { line: 3, .. }), "{err}");
}

#[test]
fn empty_splits_are_allowed() {
    let ds = load_variant(GRAPH, FEATURES, LABELS, "0 1 2 3\n\n\n").unwrap();
    assert!(ds.splits.val.is_empty() && ds.splits.test.is_empty());
}
