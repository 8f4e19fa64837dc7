#![allow(dead_code)]

use std::path::PathBuf;

pub struct GoldenCase {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub input: Option<&'static str>,
    pub code: i32,
}

pub const GOLDEN_CASES: &[GoldenCase] = &[
    GoldenCase { name: "structure_unit", args: &["structure"], input: Some("structure_unit.json"), code: 0 },
    GoldenCase { name: "structure_scalars", args: &["structure"], input: Some("structure_scalars.json"), code: 0 },
    GoldenCase {
        name: "structure_diagonal_copy",
        args: &["structure", "--emit-unitary"],
        input: Some("structure_diagonal_copy.json"),
        code: 0,
    },
    GoldenCase { name: "reduce_two_blocks", args: &["reduce"], input: Some("reduce_two_blocks.json"), code: 0 },
    GoldenCase { name: "reduce_scalar_centre", args: &["reduce"], input: Some("reduce_scalar_centre.json"), code: 0 },
    GoldenCase {
        name: "standard_counterexample",
        args: &["standard"],
        input: Some("standard_counterexample.json"),
        code: 0,
    },
    GoldenCase {
        name: "standard_counterexample_certify",
        args: &["standard", "--certify"],
        input: Some("standard_counterexample.json"),
        code: 5,
    },
    GoldenCase { name: "standard_m2_tensor_one", args: &["standard"], input: Some("standard_m2_tensor_one.json"), code: 0 },
    GoldenCase { name: "standard_gallery", args: &["standard", "--gallery"], input: None, code: 0 },
    GoldenCase {
        name: "verify_isotr_full_m4",
        args: &["verify", "--suite", "isotr"],
        input: Some("verify_full_m4.json"),
        code: 0,
    },
    GoldenCase {
        name: "verify_st1_counterexample",
        args: &["verify", "--suite", "st1"],
        input: Some("standard_counterexample.json"),
        code: 0,
    },
];

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn golden_input(name: &str) -> String {
    golden_dir().join(name).to_string_lossy().into_owned()
}

/// Full argument vector, program name first.
pub fn invocation(case: &GoldenCase) -> Vec<String> {
    let mut args = vec!["wstar".to_string()];
    args.extend(case.args.iter().map(|s| s.to_string()));
    if let Some(input) = case.input {
        args.push(golden_input(input));
    }
    args
}

pub fn expected_path(case: &GoldenCase) -> PathBuf {
    golden_dir().join(format!("{}.out", case.name))
}
