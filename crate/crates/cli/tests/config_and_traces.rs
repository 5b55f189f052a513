mod common;

use std::process::Command;

use common::{config, p1, p4, static_sa, write_config};
use proptest::prelude::*;
use sabap_cli::commands::{cmd_run, OracleArg, RunArgs};
use sabap_cli::config::{
    CheckConfig, FamilyConfig, GeneratorConfig, GridConfig, OperatorConfig, OracleConfig,
    ProblemConfig, RowConfig, RunConfig, SteeringConfig, StringsConfig, VariantConfig,
};
use sabap_cli::Trace;

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e6..1e6f64, n)
}

fn operator(n: usize) -> impl Strategy<Value = OperatorConfig> {
    let leaf = prop_oneof![
        (
            coords(n),
            any::<f64>().prop_filter("finite", |v| v.is_finite())
        )
            .prop_map(|(a, b)| OperatorConfig::Halfspace { a, b }),
        (coords(n), -1e3..1e3f64).prop_map(|(a, b)| OperatorConfig::Hyperplane { a, b }),
        (coords(n), coords(n)).prop_map(|(lo, hi)| OperatorConfig::Box { lo, hi }),
        (coords(n), 0.0..1e3f64)
            .prop_map(|(center, radius)| OperatorConfig::Ball { center, radius }),
        prop::collection::vec((coords(n), -1e3..1e3f64), 1..3).prop_map(|rows| {
            OperatorConfig::AffineSubspace {
                rows: rows.into_iter().map(|(a, b)| RowConfig { a, b }).collect(),
            }
        }),
        Just(OperatorConfig::Identity { dim: n }),
    ];
    leaf.prop_recursive(2, 4, 1, |inner| {
        (1e-6..=1.0f64, inner).prop_map(|(alpha, inner)| OperatorConfig::Relaxed {
            alpha,
            inner: Box::new(inner),
        })
    })
}

fn family() -> impl Strategy<Value = FamilyConfig> {
    (
        prop::collection::vec(prop::collection::vec(1usize..6, 1..4), 1..4),
        prop::collection::vec(1e-3..1.0f64, 1..4),
    )
        .prop_map(|(strings, weights)| FamilyConfig { strings, weights })
}

fn variant() -> impl Strategy<Value = VariantConfig> {
    prop_oneof![
        family().prop_map(|f| VariantConfig::StaticSa {
            strings: f.strings,
            weights: f.weights
        }),
        family().prop_map(|f| VariantConfig::StaticProjectionSa {
            strings: f.strings,
            weights: f.weights
        }),
        prop::collection::vec(family(), 1..3)
            .prop_map(|schedule| VariantConfig::QuasiDynamicSa { schedule }),
        (
            prop::collection::vec(family(), 1..3),
            prop::collection::vec(0.0..1.0f64, 1..3)
        )
            .prop_map(|(schedule, outer_weights)| VariantConfig::SimultaneousSa {
                schedule,
                outer_weights
            }),
        prop::collection::vec(0.0..1.0f64, 1..4)
            .prop_map(|weights| VariantConfig::FullySimultaneous { weights }),
        Just(VariantConfig::HalpernWittman),
        Just(VariantConfig::InfiniteStaticSa),
        Just(VariantConfig::Combettes),
    ]
}

fn steering() -> impl Strategy<Value = SteeringConfig> {
    prop_oneof![
        (1e-3..=1.0f64, 1e-3..=1.0f64).prop_map(|(c, p)| SteeringConfig::PowerLaw { c, p }),
        (0u64..1000).prop_map(|offset| SteeringConfig::HarmonicShifted { offset }),
        (
            prop::collection::vec(0.0..=1.0f64, 0..5),
            1e-3..=1.0f64,
            1e-3..=1.0f64
        )
            .prop_map(|(values, c, p)| SteeringConfig::UserTable { values, c, p }),
        (0.0..1.0f64).prop_map(|value| SteeringConfig::Constant { value }),
    ]
}

fn problem() -> impl Strategy<Value = ProblemConfig> {
    (1usize..4).prop_flat_map(|n| {
        let countable = (
            1e-3..0.999f64,
            1e-15..0.5f64,
            prop_oneof![
                Just(StringsConfig::Singletons),
                (1usize..4).prop_map(|len| StringsConfig::Window { len })
            ],
            prop_oneof![
                (coords(n), -10.0..10.0f64, 0.0..10.0f64)
                    .prop_map(|(a, b, scale)| GeneratorConfig::ShrinkingHalfspaces { a, b, scale }),
                prop::collection::vec(operator(n), 1..3)
                    .prop_map(|operators| GeneratorConfig::Cycle { operators }),
            ],
        )
            .prop_map(|(ratio, epsilon, strings, generator)| {
                sabap_cli::config::CountableConfig {
                    ratio,
                    epsilon,
                    strings,
                    generator,
                }
            });
        (
            coords(n),
            prop::option::of(coords(n)),
            prop::option::of(coords(n)),
            prop::collection::vec(operator(n), 0..4),
            prop::option::of(countable),
        )
            .prop_map(
                |(anchor, x0, witness, operators, countable)| ProblemConfig {
                    anchor,
                    x0,
                    witness,
                    operators,
                    countable,
                },
            )
    })
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        (1u64..10_000_000, 1u64..1000, any::<u64>()),
        problem(),
        variant(),
        steering(),
        prop::option::of((1e-3..1.0f64, 1usize..10, 2u64..100_000, 0usize..1000)),
        prop::option::of((
            prop::option::of(coords(2)),
            prop::option::of((coords(2), coords(2), 1e-3..1.0f64)),
        )),
    )
        .prop_map(
            |((max_iter, record_every, seed), problem, variant, steering, check, oracle)| {
                RunConfig {
                    max_iter,
                    record_every,
                    seed,
                    output: None,
                    problem,
                    variant,
                    steering,
                    check: check.map(|(delta, q_bar, prefix, samples)| CheckConfig {
                        delta,
                        q_bar,
                        prefix,
                        samples,
                    }),
                    oracle: oracle.map(|(point, grid)| OracleConfig {
                        point,
                        grid: grid.map(|(lo, hi, resolution)| GridConfig { lo, hi, resolution }),
                    }),
                }
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalized_config_round_trips(cfg in run_config()) {
        let normalized = cfg.normalized();
        let text = normalized.to_toml();
        let back = RunConfig::parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, normalized);
    }
}

#[test]
fn emit_normalized_output_re_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "p4",
        &config(p4(0.5, 1e-6), VariantConfig::Combettes, 10, 1),
    );
    let o = Command::new(env!("CARGO_BIN_EXE_sabap"))
        .args([
            "check".as_ref(),
            "--emit-normalized".as_ref(),
            path.as_os_str(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let echoed = RunConfig::parse(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(echoed, RunConfig::load(&path).unwrap().normalized());
    assert_eq!(echoed.problem.x0, Some(vec![3.0, 0.0]));
}

#[test]
fn csv_and_json_traces_agree_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "p1",
        &config(
            p1(),
            static_sa(&[&[1], &[2], &[1, 2]], &[0.3, 0.3, 0.4]),
            5000,
            7,
        ),
    );
    let mut args = RunArgs::new(&path);
    args.out = Some(dir.path().join("t.csv"));
    args.oracle = OracleArg::Auto;
    cmd_run(&args, &mut Vec::new()).unwrap();
    let csv = Trace::read(&dir.path().join("t.csv")).unwrap();
    let json = Trace::read(&dir.path().join("t.json")).unwrap();
    assert_eq!(csv.rows.len(), 5000 / 7 + 2);
    assert_eq!(csv.rows.len(), json.rows.len());
    let bits = |v: f64| v.to_bits();
    for (a, b) in csv.rows.iter().zip(&json.rows) {
        assert_eq!(a.k, b.k);
        assert_eq!(bits(a.lambda), bits(b.lambda));
        assert_eq!(bits(a.step_norm), bits(b.step_norm));
        assert_eq!(a.oracle_dist.map(bits), b.oracle_dist.map(bits));
        assert!(a.oracle_dist.is_some());
        assert_eq!(
            a.x.iter().map(|v| bits(*v)).collect::<Vec<_>>(),
            b.x.iter().map(|v| bits(*v)).collect::<Vec<_>>()
        );
    }
    let meta = json.meta.unwrap();
    assert_eq!(meta.variant, "static-sa");
    assert_eq!(meta.config_sha256.len(), 64);
    assert_eq!(meta.oracle, Some(vec![0.0, 0.0]));
}
