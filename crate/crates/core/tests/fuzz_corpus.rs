//! Replays the checked-in fuzz seeds through the same properties the fuzz
//! targets assert.

use std::fs;
use std::path::PathBuf;

use lmrate::angle::parse_angle;
use lmrate::config::parse_experiment;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn angle_seeds() {
    let mut accepted = 0;
    for (name, text) in seeds("parse_angle") {
        if let Ok(a) = parse_angle(&text) {
            accepted += 1;
            assert_eq!(parse_angle(&a.to_string()).unwrap(), a, "{name}");
        }
    }
    assert!(accepted >= 5);
}

#[test]
fn experiment_seeds() {
    let mut accepted = 0;
    for (name, text) in seeds("parse_experiment") {
        if let Ok(spec) = parse_experiment(&text) {
            accepted += 1;
            spec.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
    assert_eq!(accepted, 2);
}
