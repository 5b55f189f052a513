use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sabap::problems::{self, TestProblem};
use sabap::solvers::run;
use sabap::strings::OperatorGenerator;
use sabap::{
    point, AlgorithmVariant, CountableFamily, IndexVector, Operator, OperatorFamily, Point,
    ProblemSpec, RunOptions, Solver, SolverRun, SteeringSequence, StringFamily,
};

fn trace_of(p: &ProblemSpec, v: AlgorithmVariant, s: SteeringSequence, steps: u64) -> SolverRun {
    run(p.clone(), v, s, &RunOptions::full_trace(steps)).unwrap()
}

fn assert_bitwise(a: &SolverRun, b: &SolverRun) {
    assert_eq!(a.trace.len(), b.trace.len());
    for (ra, rb) in a.trace.iter().zip(&b.trace) {
        assert_eq!(ra.k, rb.k);
        for (xa, xb) in ra.x.coords().iter().zip(rb.x.coords()) {
            assert_eq!(xa.to_bits(), xb.to_bits(), "k = {}", ra.k);
        }
    }
}

fn iv(v: &[usize]) -> IndexVector {
    IndexVector::new(v.to_vec()).unwrap()
}

#[test]
fn fully_simultaneous_reduces_to_static_singletons() {
    for p in [problems::p1(), problems::p2(), problems::p3()] {
        let m = p.operators().len();
        let w: Vec<f64> = match m {
            2 => vec![0.3, 0.7],
            _ => vec![0.2, 0.3, 0.5],
        };
        let a = trace_of(
            &p.problem,
            AlgorithmVariant::FullySimultaneous(w.clone()),
            SteeringSequence::default(),
            100,
        );
        let b = trace_of(
            &p.problem,
            AlgorithmVariant::StaticSA(StringFamily::singletons(w).unwrap()),
            SteeringSequence::default(),
            100,
        );
        assert_bitwise(&a, &b);
    }
}

#[test]
fn halpern_wittman_reduces_to_static_projection_full_string() {
    for p in [problems::p1(), problems::p2(), problems::p3()] {
        let m = p.operators().len();
        let a = trace_of(
            &p.problem,
            AlgorithmVariant::HalpernWittman,
            SteeringSequence::default(),
            100,
        );
        let b = trace_of(
            &p.problem,
            AlgorithmVariant::StaticProjectionSA(StringFamily::full_string(m).unwrap()),
            SteeringSequence::power_law(1.0, 1.0).unwrap(),
            100,
        );
        assert_bitwise(&a, &b);
    }
}

#[test]
fn combettes_reduces_to_infinite_static_singletons() {
    let p = problems::p4();
    let a = trace_of(
        &p.problem,
        AlgorithmVariant::CombettesSimultaneous,
        SteeringSequence::default(),
        100,
    );
    let b = trace_of(
        &p.problem,
        AlgorithmVariant::InfiniteStaticSA,
        SteeringSequence::default(),
        100,
    );
    assert_bitwise(&a, &b);
    assert_eq!(a.tail_mass, b.tail_mass);
}

#[test]
fn quasi_dynamic_with_one_family_is_static() {
    let p = problems::p2();
    let f = StringFamily::new(vec![iv(&[1, 3]), iv(&[2])], vec![0.6, 0.4]).unwrap();
    let steering = SteeringSequence::power_law(0.8, 0.7).unwrap();
    let a = trace_of(
        &p.problem,
        AlgorithmVariant::QuasiDynamicSA(vec![f.clone()]),
        steering.clone(),
        100,
    );
    let b = trace_of(
        &p.problem,
        AlgorithmVariant::StaticSA(f.clone()),
        steering.clone(),
        100,
    );
    assert_bitwise(&a, &b);
    let c = trace_of(
        &p.problem,
        AlgorithmVariant::SimultaneousSA {
            schedule: vec![f.clone()],
            outer_weights: vec![1.0],
        },
        steering,
        100,
    );
    assert_bitwise(&b, &c);
}

#[test]
fn zero_lambda_steps_are_fejer_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for p in [problems::p1(), problems::p2(), problems::p3()] {
        let m = p.operators().len();
        let f = p.problem.witness().unwrap().clone();
        let families = [
            StringFamily::full_string(m).unwrap(),
            StringFamily::singletons(vec![1.0 / m as f64; m])
                .unwrap_or_else(|_| StringFamily::full_string(m).unwrap()),
        ];
        for family in families {
            let solver = Solver::new(
                p.problem.clone(),
                AlgorithmVariant::StaticSA(family),
                SteeringSequence::default(),
            )
            .unwrap();
            let mut x = Point::new(
                (0..p.anchor().dim())
                    .map(|_| rng.gen_range(-5.0..5.0))
                    .collect(),
            )
            .unwrap();
            for k in 0..200 {
                let next = solver.step_with_lambda(&x, k, 0.0).unwrap();
                assert!(next.distance(&f) <= x.distance(&f) + 1e-10);
                x = next;
            }
        }
    }
}

fn default_variant(p: &TestProblem) -> AlgorithmVariant {
    match p.problem.operators() {
        OperatorFamily::Finite(ops) => {
            let m = ops.len();
            let w = 1.0 / m as f64;
            let mut weights = vec![w; m];
            weights[m - 1] = 1.0 - w * (m - 1) as f64;
            AlgorithmVariant::FullySimultaneous(weights)
        }
        OperatorFamily::Countable(_) => AlgorithmVariant::InfiniteStaticSA,
    }
}

#[test]
fn shipped_problems_approach_the_solution_and_stay_finite() {
    for p in problems::all() {
        let opts = RunOptions::new(1_000_000, 100).with_oracle(p.solution.clone());
        let r = run(
            p.problem.clone(),
            default_variant(&p),
            SteeringSequence::default(),
            &opts,
        )
        .unwrap();
        assert!(r.trace.iter().all(|row| row.x.is_finite()));
        let early = r.row(100).unwrap().oracle_dist.unwrap();
        let late = r.row(100_000).unwrap().oracle_dist.unwrap();
        assert!(late < early, "{}: {late} !< {early}", p.name);
    }
}

#[test]
fn combettes_with_cyclic_operators_tracks_fully_simultaneous() {
    // T_i cycles over the two P1 halfspaces, so the countable average equals
    // a weighted average of the two with aggregated weights plus ρ_N·I.
    let p1 = problems::p1();
    let gen = OperatorGenerator::cycle(p1.operators().to_vec()).unwrap();
    let ratio = 0.5;
    let fam = CountableFamily::geometric_singletons(gen, ratio, 1e-12).unwrap();
    let countable =
        ProblemSpec::new(OperatorFamily::Countable(fam), point![2, 2], point![2, 2]).unwrap();
    // Odd indices carry (1 − q)/(1 − q²), even ones q(1 − q)/(1 − q²).
    let w1 = (1.0 - ratio) / (1.0 - ratio * ratio);
    let fully = vec![w1, 1.0 - w1];
    let a = trace_of(
        &countable,
        AlgorithmVariant::CombettesSimultaneous,
        SteeringSequence::default(),
        2000,
    );
    let b = trace_of(
        &p1.problem,
        AlgorithmVariant::FullySimultaneous(fully),
        SteeringSequence::default(),
        2000,
    );
    for (ra, rb) in a.trace.iter().zip(&b.trace) {
        assert!(ra.x.distance(&rb.x) <= 1e-9, "k = {}", ra.k);
    }
}

#[test]
fn rejected_configurations() {
    let p = problems::p1();
    // Non-fit family.
    let f = StringFamily::new(vec![iv(&[1])], vec![1.0]).unwrap();
    assert!(Solver::new(
        p.problem.clone(),
        AlgorithmVariant::StaticSA(f),
        SteeringSequence::default()
    )
    .is_err());
    // Outer weights not matching the schedule.
    let full = StringFamily::full_string(2).unwrap();
    assert!(Solver::new(
        p.problem.clone(),
        AlgorithmVariant::SimultaneousSA {
            schedule: vec![full],
            outer_weights: vec![0.5, 0.5]
        },
        SteeringSequence::default()
    )
    .is_err());
    // Mixed dimensions.
    let ops = vec![
        Operator::halfspace(point![1, 0], 0.0).unwrap(),
        Operator::halfspace(point![1, 0, 0], 0.0).unwrap(),
    ];
    assert!(ProblemSpec::new(OperatorFamily::Finite(ops), point![0, 0], point![0, 0]).is_err());
}
