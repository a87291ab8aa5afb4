mod common;

use common::*;
use ndarray::{s, Array2};
use topicbridge::joint::{joint_objective_terms, stack_rows};
use topicbridge::{
    cscore, joint_gradients, joint_objective, joint_onmf_solve, joint_onmf_step, nmf_factorize,
    reconstruction_error, split_common_distinct, FactorPair, JointFactorization, JointParams,
    SolverOptions, TermDocMatrix,
};

fn tdm(a: &Array2<f64>) -> TermDocMatrix {
    TermDocMatrix::new(a.clone()).unwrap()
}

fn small_params(alpha: f64, beta: f64) -> JointParams {
    JointParams {
        k_c: 1,
        k_d: 2,
        alpha,
        beta,
        ..JointParams::default()
    }
}

#[test]
fn objective_matches_direct_evaluation() {
    for seed in 0..10 {
        let mut r = rng(seed);
        let (h_t, u, j) = joint_instance(&mut r, 3, 4, 1, 2);
        for p in [
            small_params(1000.0, 0.1),
            small_params(2.0, 7.0),
            small_params(0.0, 0.0),
        ] {
            let got = joint_objective(h_t.view(), &tdm(&u), &j, &p).unwrap();
            let want = joint_objective_direct(h_t.view(), u.view(), &j, &p);
            assert!(
                (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                "{got} vs {want}"
            );
        }
    }
}

#[test]
fn objective_is_zero_at_an_exact_fit_without_penalties() {
    let mut r = rng(1);
    let h_t = random(&mut r, 3, 5, 0.0);
    let w = random(&mut r, 4, 3, 0.0);
    let h_u = random(&mut r, 3, 5, 0.0);
    let u = w.dot(&h_u);
    let l = random(&mut r, 3, 3, 0.0);
    let j = JointFactorization {
        h_star: l.dot(&h_t),
        l_star: l,
        w_u: w,
        h_u,
        k_c: 1,
    };
    let p = small_params(0.0, 0.0);
    assert!(joint_objective(h_t.view(), &tdm(&u), &j, &p).unwrap().abs() < 1e-20);
    let g = joint_gradients(h_t.view(), &tdm(&u), &j, &p).unwrap();
    for block in [&g.h_star, &g.l_star, &g.w_u, &g.h_u] {
        assert!(block.iter().all(|x| x.abs() < 1e-8), "{block:?}");
    }
}

#[test]
fn objective_without_penalties_is_the_two_fits() {
    let mut r = rng(2);
    let (h_t, u, j) = joint_instance(&mut r, 4, 5, 1, 2);
    let terms = joint_objective_terms(h_t.view(), &tdm(&u), &j, &small_params(0.0, 0.0)).unwrap();
    assert_eq!(terms.commonness, 0.0);
    assert_eq!(terms.distinctiveness, 0.0);
    let want = 0.5 * sq_dist(j.h_star.view(), matmul(j.l_star.view(), h_t.view()).view())
        + 0.5 * sq_dist(u.view(), matmul(j.w_u.view(), j.h_u.view()).view());
    assert!((terms.total() - want).abs() < 1e-10 * want);
}

#[test]
fn gradients_match_finite_differences() {
    for (alpha, beta) in [(1000.0, 0.1), (1.0, 5.0)] {
        let p = small_params(alpha, beta);
        for seed in 0..20 {
            let mut r = rng(100 + seed);
            let (h_t, u, j) = joint_instance(&mut r, 4, 5, 1, 2);
            let u_m = tdm(&u);
            let g = joint_gradients(h_t.view(), &u_m, &j, &p).unwrap();
            let f = |x: &JointFactorization| joint_objective_direct(h_t.view(), u.view(), x, &p);
            let checks: [(&str, &Array2<f64>, Pick); 4] = [
                ("h_star", &g.h_star, |x| &mut x.h_star),
                ("l_star", &g.l_star, |x| &mut x.l_star),
                ("w_u", &g.w_u, |x| &mut x.w_u),
                ("h_u", &g.h_u, |x| &mut x.h_u),
            ];
            for (name, analytic, pick) in checks {
                let numeric = finite_difference(&j, pick, 1e-6, f);
                let err = max_relative_error(analytic, &numeric);
                assert!(err < 1e-4, "seed {seed} {name}: relative error {err}");
            }
        }
    }
}

#[test]
fn perturbing_l_only_moves_the_prior_terms() {
    let mut r = rng(9);
    let (h_t, u, j) = joint_instance(&mut r, 4, 5, 1, 2);
    let p = small_params(1000.0, 0.1);
    let u_m = tdm(&u);
    let mut moved = j.clone();
    moved.l_star += &random(&mut r, 3, 3, -0.5);
    let g0 = joint_gradients(h_t.view(), &u_m, &j, &p).unwrap();
    let g1 = joint_gradients(h_t.view(), &u_m, &moved, &p).unwrap();
    assert_eq!(g0.w_u, g1.w_u);
    assert_eq!(g0.h_u, g1.h_u);
    assert_ne!(g0.l_star, g1.l_star);
    // The H* gradient shifts by exactly the change in its prior residual.
    let shift = &g1.h_star - &g0.h_star;
    let expected = matmul((&j.l_star - &moved.l_star).view(), h_t.view());
    assert!(sq_dist(shift.view(), expected.view()) < 1e-20);
}

#[test]
fn dimension_and_value_errors() {
    let mut r = rng(3);
    let (h_t, u, j) = joint_instance(&mut r, 4, 5, 1, 2);
    let p = small_params(1.0, 0.1);
    let wrong = random(&mut r, 3, 6, 0.0);
    assert!(joint_objective(wrong.view(), &tdm(&u), &j, &p).is_err());
    let mut bad = j.clone();
    bad.h_u[[0, 0]] = f64::NAN;
    assert!(joint_objective(h_t.view(), &tdm(&u), &bad, &p).is_err());
    // k = 3 exceeds a 2-row batch.
    let tiny = tdm(&random(&mut r, 2, 5, 0.0));
    assert!(joint_onmf_step(h_t.view(), &tiny, &p).is_err());
    assert!(joint_onmf_step(h_t.view(), &TermDocMatrix::empty(5), &p).is_err());
}

/// `U` built from topics whose first `k_c` rows are those of `H_t`.
fn planted(seed: u64, n: usize) -> (Array2<f64>, Array2<f64>) {
    let mut r = rng(seed);
    let h_t = random(&mut r, 5, n, 0.0).mapv(|x| x.powi(4));
    let fresh = random(&mut r, 3, n, 0.0).mapv(|x| x.powi(4));
    let h_new = stack_rows(&h_t.slice(s![..2, ..]).to_owned(), &fresh);
    let w = random(&mut r, 40, 5, 0.0);
    (h_t, w.dot(&h_new))
}

#[test]
fn planted_common_topics_give_small_cscore() {
    for seed in 0..5 {
        let (h_t, u) = planted(seed, 30);
        let p = JointParams::default();
        let j = joint_onmf_step(h_t.view(), &tdm(&u), &p).unwrap();
        let split = split_common_distinct(&j);
        let c = cscore(split.prior_common.view(), split.common.view()).unwrap();
        assert!(c < 0.05, "seed {seed}: cscore {c}");
        for (row, planted_row) in split.common.rows().into_iter().zip(h_t.rows()) {
            assert!(
                cosine(row, planted_row) > 0.9,
                "seed {seed}: common row drifted"
            );
        }
    }
}

#[test]
fn without_penalties_the_new_block_fits_like_nmf() {
    for seed in 0..5 {
        let mut r = rng(50 + seed);
        let h_t = random(&mut r, 5, 20, 0.0);
        let u = tdm(&random(&mut r, 30, 20, 0.0));
        let p = JointParams {
            alpha: 0.0,
            beta: 0.0,
            ..JointParams::default()
        };
        let j = joint_onmf_step(h_t.view(), &u, &p).unwrap();
        let joint_re = reconstruction_error(&u, &FactorPair::new(j.w_u, j.h_u).unwrap()).unwrap();
        let nmf_re = reconstruction_error(
            &u,
            &nmf_factorize(&u, 5, &SolverOptions::default()).unwrap(),
        )
        .unwrap();
        assert!(
            joint_re <= 1.1 * nmf_re,
            "seed {seed}: {joint_re} vs {nmf_re}"
        );
    }
}

#[test]
fn solver_is_deterministic_non_negative_and_descending() {
    let (h_t, u) = planted(11, 25);
    let u = tdm(&u);
    let p = JointParams::default();
    let a = joint_onmf_solve(h_t.view(), &u, &p).unwrap();
    let b = joint_onmf_solve(h_t.view(), &u, &p).unwrap();
    assert_eq!(a.factorization, b.factorization);
    assert_eq!(a.trace, b.trace);
    let j = &a.factorization;
    for block in [&j.h_star, &j.w_u, &j.h_u] {
        assert!(block.iter().all(|&x| x >= 0.0));
    }
    for w in a.trace.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0),
            "{} -> {}",
            w[0],
            w[1]
        );
    }
    let other_seed = JointParams {
        solver: SolverOptions {
            seed: 7,
            ..p.solver
        },
        ..p
    };
    let c = joint_onmf_solve(h_t.view(), &u, &other_seed).unwrap();
    assert_ne!(c.factorization, a.factorization);
}

#[test]
fn split_partitions_h_u() {
    let mut r = rng(4);
    for (kc, kd) in [(2, 3), (1, 1)] {
        let (_, _, j) = joint_instance(&mut r, 4, 6, kc, kd);
        let split = split_common_distinct(&j);
        assert_eq!((split.common.nrows(), split.distinct.nrows()), (kc, kd));
        assert_eq!(stack_rows(&split.common, &split.distinct), j.h_u);
        assert_eq!(
            stack_rows(&split.prior_common, &split.prior_distinct),
            j.h_star
        );
    }
}
