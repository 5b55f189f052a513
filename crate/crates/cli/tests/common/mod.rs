#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use sabap_cli::config::{
    CountableConfig, FamilyConfig, GeneratorConfig, OperatorConfig, ProblemConfig, RunConfig,
    SteeringConfig, StringsConfig, VariantConfig,
};

pub fn halfspace(a: &[f64], b: f64) -> OperatorConfig {
    OperatorConfig::Halfspace { a: a.to_vec(), b }
}

pub fn p1() -> ProblemConfig {
    ProblemConfig {
        anchor: vec![2.0, 2.0],
        x0: None,
        witness: Some(vec![-1.0, -1.0]),
        operators: vec![halfspace(&[1.0, 0.0], 0.0), halfspace(&[0.0, 1.0], 0.0)],
        countable: None,
    }
}

pub fn p2() -> ProblemConfig {
    ProblemConfig {
        anchor: vec![3.0, -1.0],
        x0: None,
        witness: Some(vec![0.25, 0.25]),
        operators: vec![
            halfspace(&[-1.0, 0.0], 0.0),
            halfspace(&[0.0, -1.0], 0.0),
            halfspace(&[1.0, 1.0], 1.0),
        ],
        countable: None,
    }
}

pub fn p4(ratio: f64, epsilon: f64) -> ProblemConfig {
    ProblemConfig {
        anchor: vec![3.0, 0.0],
        x0: None,
        witness: Some(vec![0.0, 0.0]),
        operators: vec![],
        countable: Some(CountableConfig {
            ratio,
            epsilon,
            strings: StringsConfig::Singletons,
            generator: GeneratorConfig::ShrinkingHalfspaces {
                a: vec![1.0, 0.0],
                b: 1.0,
                scale: 1.0,
            },
        }),
    }
}

pub fn family(strings: &[&[usize]], weights: &[f64]) -> FamilyConfig {
    FamilyConfig {
        strings: strings.iter().map(|s| s.to_vec()).collect(),
        weights: weights.to_vec(),
    }
}

pub fn static_sa(strings: &[&[usize]], weights: &[f64]) -> VariantConfig {
    let f = family(strings, weights);
    VariantConfig::StaticSa {
        strings: f.strings,
        weights: f.weights,
    }
}

pub fn config(
    problem: ProblemConfig,
    variant: VariantConfig,
    max_iter: u64,
    record_every: u64,
) -> RunConfig {
    RunConfig {
        max_iter,
        record_every,
        seed: 0,
        output: None,
        problem,
        variant,
        steering: SteeringConfig::default(),
        check: None,
        oracle: None,
    }
}

pub fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> PathBuf {
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, cfg.to_toml()).unwrap();
    path
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}
