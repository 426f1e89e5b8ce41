//! Property tests of the branch-and-bound solver on small random MILPs,
//! checked against enumeration of every integer assignment.

use milpexplain::milp::{LinearConstraint, MilpModel, Sense, VarId, VarKind};
use milpexplain::solver::{
    check_feasible, solve_lp, solve_milp, LpStatusKind, MilpStatus, Mode, SolverConfig,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Spec {
    rows: Vec<(Vec<f64>, f64)>,
    implied: Vec<(Vec<f64>, u8, f64, bool)>,
    objective: Vec<f64>,
    maximize: bool,
}

const N_CONT: usize = 3;
const N_INT: usize = 1;
const N_BIN: usize = 2;
const N_ALL: usize = N_CONT + N_INT + N_BIN;

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-20i32..=20).prop_map(|c| f64::from(c) / 10.0), N_ALL)
}

fn spec() -> impl Strategy<Value = Spec> {
    (
        prop::collection::vec((coeffs(), -1.0f64..2.0), 1..3),
        prop::collection::vec((coeffs(), 0u8..3, -1.0f64..1.0, any::<bool>()), 0..3),
        coeffs(),
        any::<bool>(),
    )
        .prop_map(|(rows, implied, objective, maximize)| Spec {
            rows,
            implied,
            objective,
            maximize,
        })
}

struct Built {
    model: MilpModel,
    integral: Vec<(VarId, Vec<f64>)>,
}

fn build(s: &Spec) -> Built {
    let mut m = MilpModel::new("prop");
    let mut vars = Vec::new();
    for k in 0..N_CONT {
        vars.push(
            m.add_variable(VarKind::Continuous, -1.0, 1.0, format!("x{k}"))
                .unwrap(),
        );
    }
    let mut integral = Vec::new();
    for k in 0..N_INT {
        let v = m
            .add_variable(VarKind::Integer, 0.0, 2.0, format!("k{k}"))
            .unwrap();
        vars.push(v);
        integral.push((v, vec![0.0, 1.0, 2.0]));
    }
    let mut binaries = Vec::new();
    for k in 0..N_BIN {
        let v = m
            .add_variable(VarKind::Binary, 0.0, 1.0, format!("z{k}"))
            .unwrap();
        vars.push(v);
        binaries.push(v);
        integral.push((v, vec![0.0, 1.0]));
    }
    let terms = |c: &[f64]| -> Vec<(f64, VarId)> {
        c.iter()
            .zip(&vars)
            .filter(|(c, _)| **c != 0.0)
            .map(|(&c, &v)| (c, v))
            .collect()
    };
    for (c, rhs) in &s.rows {
        m.add_constraint(LinearConstraint::le(terms(c), *rhs))
            .unwrap();
    }
    for (k, (c, rel, rhs, active)) in s.implied.iter().enumerate() {
        // Implied rows only reference non-binary columns.
        let t = terms(&c[..N_CONT + N_INT]);
        let row = match rel {
            0 => LinearConstraint::le(t, *rhs),
            1 => LinearConstraint::ge(t, *rhs),
            _ => LinearConstraint::eq(t, *rhs),
        };
        m.add_indicator(binaries[k % N_BIN], *active, row).unwrap();
    }
    let sense = if s.maximize {
        Sense::Maximize
    } else {
        Sense::Minimize
    };
    m.set_objective(sense, terms(&s.objective), 0.0).unwrap();
    Built { model: m, integral }
}

/// Best objective over every integer assignment, each solved as an LP.
fn enumerate(b: &Built, maximize: bool, cfg: &SolverConfig) -> Option<f64> {
    let sizes: Vec<usize> = b.integral.iter().map(|(_, d)| d.len()).collect();
    let total: usize = sizes.iter().product();
    let mut best: Option<f64> = None;
    for mut code in 0..total {
        let mut fixed = b.model.clone();
        for (var, domain) in &b.integral {
            let v = domain[code % domain.len()];
            code /= domain.len();
            fixed.set_bounds(*var, v, v).unwrap();
        }
        let lp = solve_lp(&fixed, cfg).unwrap();
        if lp.status == LpStatusKind::Optimal {
            let v = lp.objective.unwrap();
            best = Some(match best {
                None => v,
                Some(b) if maximize => b.max(v),
                Some(b) => b.min(v),
            });
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn optimum_matches_enumeration(s in spec()) {
        let cfg = SolverConfig::default();
        let b = build(&s);
        let mode = if s.maximize { Mode::Maximize } else { Mode::Minimize };
        let out = solve_milp(&b.model, mode, &cfg).unwrap();
        match enumerate(&b, s.maximize, &cfg) {
            None => prop_assert_eq!(out.status, MilpStatus::Infeasible),
            Some(best) => {
                prop_assert_eq!(&out.status, &MilpStatus::Optimal);
                let obj = out.objective.unwrap();
                prop_assert!((obj - best).abs() < 1e-7, "{} vs {}", obj, best);
                let w = out.witness.as_ref().unwrap();
                prop_assert!(b.model.max_violation(w) <= 1e-6);
                for (var, _) in &b.integral {
                    prop_assert_eq!(w[var.index()].fract(), 0.0);
                }
                // The relaxation bound is never beaten by an integral point.
                let root = out.stats.root_bound.unwrap();
                if s.maximize {
                    prop_assert!(obj <= root + 1e-7);
                } else {
                    prop_assert!(obj >= root - 1e-7);
                }
            }
        }
    }

    #[test]
    fn feasibility_matches_optimization(s in spec()) {
        let cfg = SolverConfig::default();
        let b = build(&s);
        let verdict = check_feasible(&b.model, &cfg).unwrap();
        prop_assert_eq!(verdict.is_sat(), enumerate(&b, false, &cfg).is_some());
        if let milpexplain::solver::Feasibility::Sat(w) = verdict {
            prop_assert!(b.model.max_violation(&w) <= 1e-6);
        }
    }

    #[test]
    fn bound_changes_round_trip(s in spec(), lo in -1.0f64..0.0, hi in 0.0f64..1.0) {
        let mut b = build(&s);
        let before = b.model.export_lp();
        let var = VarId(0);
        let old = b.model.set_bounds(var, lo, hi).unwrap();
        b.model.set_bounds(var, old.0, old.1).unwrap();
        prop_assert_eq!(b.model.export_lp(), before);
    }
}
