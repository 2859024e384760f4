#![allow(dead_code)]

use irsbeam::alt_opt::{AlgorithmOptions, Problem, Scenario, Traffic};
use irsbeam::channel_model::{generate_channels, ChannelModelParams, PathGains, SystemConfig};
use irsbeam::linalg::{CMat, C64};
use irsbeam::phase::PhaseConstraints;
use irsbeam::sdp::{BlockKind, Constraint, Relation, SdpProblem, Sense, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub enum Expect {
    Optimal(f64),
    Feasible,
    Infeasible,
}

pub struct Case {
    pub name: &'static str,
    pub problem: SdpProblem,
    pub expect: Expect,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn real_diag(d: &[f64]) -> CMat {
    CMat::from_fn(d.len(), d.len(), |r, k| if r == k { c(d[r], 0.0) } else { c(0.0, 0.0) })
}

fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

fn entry(b: usize, r: usize, k: usize, v: C64) -> Term {
    Term::sparse(b, vec![(r, k, v)])
}

fn row(terms: Vec<Term>, relation: Relation, rhs: f64) -> Constraint {
    Constraint { terms, relation, rhs }
}

/// Analytic SDPs with known answers.
pub fn sdp_battery() -> Vec<Case> {
    let one = c(1.0, 0.0);
    vec![
        Case {
            name: "min trace, trace >= 1",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(2)],
                objective: vec![Term::dense(0, eye(2))],
                constraints: vec![row(vec![Term::dense(0, eye(2))], Relation::Geq, 1.0)],
                sense: Sense::Minimize,
            },
            expect: Expect::Optimal(1.0),
        },
        Case {
            name: "min trace, trace(diag(2,1) X) >= 1",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(2)],
                objective: vec![Term::dense(0, eye(2))],
                constraints: vec![row(vec![Term::dense(0, real_diag(&[2.0, 1.0]))], Relation::Geq, 1.0)],
                sense: Sense::Minimize,
            },
            expect: Expect::Optimal(0.5),
        },
        Case {
            name: "contradictory trace equalities",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(2)],
                objective: vec![],
                constraints: vec![
                    row(vec![Term::dense(0, eye(2))], Relation::Eq, 1.0),
                    row(vec![Term::dense(0, eye(2))], Relation::Eq, 2.0),
                ],
                sense: Sense::Feasibility,
            },
            expect: Expect::Infeasible,
        },
        Case {
            name: "unit diagonal with Re V12 >= 1.5",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(2)],
                objective: vec![],
                constraints: vec![
                    row(vec![entry(0, 0, 0, one)], Relation::Eq, 1.0),
                    row(vec![entry(0, 1, 1, one)], Relation::Eq, 1.0),
                    // Re tr(A V) with A12 = A21 = 1/2 is Re V12.
                    row(vec![entry(0, 0, 1, c(0.5, 0.0))], Relation::Geq, 1.5),
                ],
                sense: Sense::Feasibility,
            },
            expect: Expect::Infeasible,
        },
        Case {
            name: "trace >= 0",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(2)],
                objective: vec![],
                constraints: vec![row(vec![Term::dense(0, eye(2))], Relation::Geq, 0.0)],
                sense: Sense::Feasibility,
            },
            expect: Expect::Feasible,
        },
        Case {
            name: "unit diagonal, size 3",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(3)],
                objective: vec![],
                constraints: (0..3).map(|n| row(vec![entry(0, n, n, one)], Relation::Eq, 1.0)).collect(),
                sense: Sense::Feasibility,
            },
            expect: Expect::Feasible,
        },
        Case {
            name: "max 2 Im V12 with unit diagonal",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(2)],
                // A12 = -j, A21 = j: Re tr(A V) = 2 Im V12.
                objective: vec![entry(0, 0, 1, c(0.0, -1.0))],
                constraints: vec![
                    row(vec![entry(0, 0, 0, one)], Relation::Eq, 1.0),
                    row(vec![entry(0, 1, 1, one)], Relation::Eq, 1.0),
                ],
                sense: Sense::Maximize,
            },
            expect: Expect::Optimal(2.0),
        },
        Case {
            name: "smallest eigenvalue of [[2, j], [-j, 2]]",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(2)],
                objective: vec![Term::dense(
                    0,
                    CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]),
                )],
                constraints: vec![row(vec![Term::dense(0, eye(2))], Relation::Eq, 1.0)],
                sense: Sense::Minimize,
            },
            expect: Expect::Optimal(1.0),
        },
        Case {
            name: "linear block: min x1 + 2 x2, x1 + x2 >= 1",
            problem: SdpProblem {
                blocks: vec![BlockKind::Nonnegative(2)],
                objective: vec![Term::diagonal(0, vec![1.0, 2.0])],
                constraints: vec![row(vec![Term::diagonal(0, vec![1.0, 1.0])], Relation::Geq, 1.0)],
                sense: Sense::Minimize,
            },
            expect: Expect::Optimal(1.0),
        },
        Case {
            name: "min -1'X1 with unit diagonal, size 3",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(3)],
                objective: vec![Term::dense(0, CMat::from_element(3, 3, c(-1.0, 0.0)))],
                constraints: (0..3).map(|n| row(vec![entry(0, n, n, one)], Relation::Eq, 1.0)).collect(),
                sense: Sense::Minimize,
            },
            expect: Expect::Optimal(-9.0),
        },
        Case {
            name: "mixed blocks: min tr X + a, X11 + a >= 2, X11 <= 1",
            problem: SdpProblem {
                blocks: vec![BlockKind::Hermitian(2), BlockKind::Nonnegative(1)],
                objective: vec![Term::dense(0, eye(2)), Term::diagonal(1, vec![1.0])],
                constraints: vec![
                    row(vec![entry(0, 0, 0, one), Term::diagonal(1, vec![1.0])], Relation::Geq, 2.0),
                    row(vec![entry(0, 0, 0, one)], Relation::Leq, 1.0),
                ],
                sense: Sense::Minimize,
            },
            expect: Expect::Optimal(2.0),
        },
    ]
}

/// Random instance drawn from `rng`: K ≤ max_k, M ≤ max_m, surfaces with
/// ΣN ≤ max_n, traffic unicast, broadcast or multicast.
pub fn random_scenario(rng: &mut ChaCha8Rng, problem: Problem, max_k: usize, max_m: usize, max_n: usize) -> Scenario {
    let k = rng.random_range(1..=max_k);
    let m = rng.random_range(1..=max_m);
    let total_n = rng.random_range(1..=max_n);
    let surfaces = rng.random_range(1..=total_n.min(2));
    let mut irs_sizes = vec![total_n / surfaces; surfaces];
    irs_sizes[0] += total_n % surfaces;
    let traffic = match rng.random_range(0..3) {
        0 => Traffic::Unicast,
        1 => Traffic::Broadcast,
        _ => Traffic::Multicast,
    };
    let groups: Vec<Vec<usize>> = match traffic {
        Traffic::Unicast => (0..k).map(|i| vec![i]).collect(),
        Traffic::Broadcast => vec![(0..k).collect()],
        Traffic::Multicast => {
            let g = if k == 1 { 1 } else { rng.random_range(1..k) };
            let mut gs = vec![Vec::new(); g];
            for i in 0..k {
                gs[if i < g { i } else { rng.random_range(0..g) }].push(i);
            }
            gs
        }
    };
    let mut config = SystemConfig::with_groups(m, irs_sizes, groups);
    config.mu_antennas = (0..k).map(|_| rng.random_range(1..=2)).collect();
    config.sinr_targets = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
    config.noise_powers = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
    config.power_budget = rng.random_range(1.0..10.0);
    let model = ChannelModelParams::rayleigh(PathGains::uniform(&config, 1.0, 1.0, 0.3));
    let channels = generate_channels(&config, &model, rng.random()).unwrap();
    let mut algorithm = AlgorithmOptions::new(problem);
    algorithm.seed = rng.random();
    algorithm.trials = 200;
    Scenario {
        constraints: PhaseConstraints::unit(&config.irs_sizes),
        traffic: if config.groups.iter().all(|g| g.len() == 1) {
            Traffic::Unicast
        } else if config.groups.len() == 1 {
            Traffic::Broadcast
        } else {
            Traffic::Multicast
        },
        config,
        channels,
        algorithm,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
