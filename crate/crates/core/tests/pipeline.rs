use hdgpod::analysis::{evaluate_rom, structural_checks};
use hdgpod::cli::{build_system, run_fom, run_pod, RunConfig};
use hdgpod::rom::{build_reduced, reduced_initial};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn manufactured(dim: usize, n: usize, dt: f64, t_final: f64) -> (RunConfig, f64) {
    let mut cfg = RunConfig::preset("small").unwrap();
    cfg.dim = dim;
    cfg.n = n;
    cfg.dt = dt;
    cfg.t_final = t_final;
    cfg.c = 1.0;
    cfg.problem = "manufactured".into();
    cfg.resolve_problem().unwrap();
    let sys = build_system(&cfg).unwrap();
    let snaps = run_fom(&cfg, &sys).unwrap();
    let last = snaps.scalar.column(snaps.len() - 1).into_owned();
    let t = *snaps.times.last().unwrap();
    let exact = move |p: &[f64; 3], t: f64| {
        (-t).exp() * (0..dim).map(|i| (PI * p[i]).sin()).product::<f64>()
    };
    (cfg, sys.l2_error_against(&last, &exact, t))
}

#[test]
fn manufactured_solution_converges_in_h() {
    // dt small enough that the spatial error dominates
    let errs: Vec<f64> = [2, 4, 8].iter().map(|&n| manufactured(2, n, 1e-4, 0.01).1).collect();
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate > 1.5, "errors {errs:?}");
    }
}

#[test]
fn manufactured_solution_converges_in_h_3d() {
    let (_, coarse) = manufactured(3, 2, 1e-4, 0.01);
    let (_, fine) = manufactured(3, 4, 1e-4, 0.01);
    assert!((coarse / fine).log2() > 1.5, "{coarse} {fine}");
}

struct Small {
    sys: hdgpod::assembly::HdgSystem,
    snaps: hdgpod::fom::SnapshotSet,
    bases: [hdgpod::pod::PodBasis; 3],
}

fn small() -> &'static Small {
    static CELL: OnceLock<Small> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = RunConfig::preset("small").unwrap();
        let sys = build_system(&cfg).unwrap();
        let snaps = run_fom(&cfg, &sys).unwrap();
        let bases = run_pod(&cfg, &sys, &snaps).unwrap();
        Small { sys, snaps, bases }
    })
}

#[test]
fn rom_error_decreases_with_rank() {
    let s = small();
    let b = [&s.bases[0], &s.bases[1], &s.bases[2]];
    let mut prev = f64::INFINITY;
    for r in [1, 3, 5, 7] {
        let rep = evaluate_rom(&s.sys, &s.snaps, b, r, r, r, None).unwrap();
        assert!(rep.u_error < prev, "r={r}: {} !< {prev}", rep.u_error);
        assert!(rep.u_error.is_finite() && rep.q_error.is_finite());
        prev = rep.u_error;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reduced_models_are_dissipative(r1 in 1usize..10, r2 in 1usize..10, r3 in 1usize..10) {
        let s = small();
        let b = [&s.bases[0], &s.bases[1], &s.bases[2]];
        let model = build_reduced(&s.sys, b, r1, r2, r3).unwrap();
        let rep = structural_checks(&s.sys, &model);
        prop_assert!(rep.all_pass(), "{}", rep.to_text());

        // ||b^n|| is nonincreasing for the implicit Euler ROM with f = 0
        let b0 = reduced_initial(&s.bases[1], &s.snaps.beta0, r2).unwrap();
        let traj = model.run(s.snaps.dt, 20, &b0, None).unwrap();
        let mut prev = b0.norm();
        for j in 0..traj.b.ncols() {
            let now = traj.b.column(j).norm();
            prop_assert!(now <= prev * (1.0 + 1e-12));
            prev = now;
        }
    }
}

#[test]
fn forced_full_rank_rom_matches_fom() {
    let mut cfg = RunConfig::preset("small").unwrap();
    cfg.c = 1.0;
    cfg.t_final = 0.2;
    cfg.problem = "manufactured".into();
    cfg.resolve_problem().unwrap();
    let sys = build_system(&cfg).unwrap();
    let snaps = run_fom(&cfg, &sys).unwrap();
    let [q, u, uh] = run_pod(&cfg, &sys, &snaps).unwrap();
    let fe = cfg.f.clone();
    let f = move |p: &[f64; 3], t: f64| fe.eval(p, t);
    let rep = evaluate_rom(&sys, &snaps, [&q, &u, &uh], q.rank(), u.rank(), uh.rank(), Some(&f)).unwrap();
    assert!(rep.u_error < 1e-9 && rep.q_error < 1e-9, "{rep:?}");
    let unforced = evaluate_rom(&sys, &snaps, [&q, &u, &uh], q.rank(), u.rank(), uh.rank(), None).unwrap();
    assert!(unforced.u_error > 1e-4, "{unforced:?}");
}
