use notegen::abstractor::fusion_baseline_generate;

#[test]
fn fusion_matches_golden_outputs() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fusion");
    let clusters = std::fs::read_to_string(dir.join("clusters.txt")).unwrap();
    let expected = std::fs::read_to_string(dir.join("expected.txt")).unwrap();
    let got: Vec<String> = clusters
        .split("\n\n")
        .map(|block| fusion_baseline_generate(&block.lines().collect::<Vec<_>>()).unwrap().join(" "))
        .collect();
    assert_eq!(got, expected.lines().collect::<Vec<_>>());
}
