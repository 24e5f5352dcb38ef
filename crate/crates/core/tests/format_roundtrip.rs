//! Instance-format fidelity: parse/serialize round trips over the checked-in
//! corpus and over generated instances.

use minlp_select::model::{generate_instance, parse_model, serialize_model, GeneratorSpec};
use std::fs;
use std::path::PathBuf;

fn corpus_files() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    assert!(!files.is_empty());
    files
}

#[test]
fn corpus_parses_and_roundtrips() {
    for path in corpus_files() {
        let text = fs::read_to_string(&path).unwrap();
        let parsed = parse_model(&text)
            .unwrap_or_else(|e| panic!("{} failed to parse: {e}", path.display()));
        let serialized = serialize_model(&parsed);
        let reparsed = parse_model(&serialized).unwrap();
        assert_eq!(reparsed, parsed, "{} did not round-trip", path.display());
        // canonical output is a fixed point of serialize . parse
        assert_eq!(serialize_model(&reparsed), serialized);
    }
}

#[test]
fn generated_instances_roundtrip_across_seeds() {
    for seed in 0..25 {
        let spec = GeneratorSpec {
            n_binary: (seed % 4) as usize,
            n_integer: 1 + (seed % 2) as usize,
            n_continuous: 1 + (seed % 3) as usize,
            n_constraints: 1 + (seed % 5) as usize,
            seed,
            ..GeneratorSpec::default()
        };
        let p = generate_instance(&spec).unwrap();
        let text = serialize_model(&p);
        assert_eq!(parse_model(&text).unwrap(), p, "seed {seed}");
    }
}

#[test]
fn serialization_is_byte_stable() {
    let text = fs::read_to_string(corpus_files()[0].as_path()).unwrap();
    let p = parse_model(&text).unwrap();
    assert_eq!(serialize_model(&p).into_bytes(), serialize_model(&p).into_bytes());
}
