//! Cross-checks of the ANOVA and t-test routines against a definitional
//! brute-force oracle and against statrs distributions.

mod common;

use common::stats::{fixed_datasets, long, oracle_2x2, oracle_one_way};
use deepsense::analysis::special::{f_sf, reg_inc_beta, t_two_sided};
use deepsense::analysis::{one_way_rm_anova, paired_t_bonferroni, rm_anova_2x2};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use statrs::function::beta::beta_reg;
#[test]
fn two_way_matches_oracle_on_fixed_datasets() {
    for (d, table) in fixed_datasets().iter().enumerate() {
        let oracle = oracle_2x2(&long(table));
        let got = rm_anova_2x2(table).unwrap();
        for (k, (f_got, f_oracle)) in [got.a.f, got.b.f, got.interaction.f]
            .into_iter()
            .zip(oracle.f())
            .enumerate()
        {
            assert!((f_got - f_oracle).abs() <= 1e-6 * f_oracle.abs().max(1.0), "dataset {d} effect {k}: {f_got} vs {f_oracle}");
            let p_ref = 1.0 - FisherSnedecor::new(1.0, 13.0).unwrap().cdf(f_oracle);
            let p_got = [got.a.p, got.b.p, got.interaction.p][k];
            assert!((p_got - p_ref).abs() <= 1e-6, "dataset {d} effect {k}: p {p_got} vs {p_ref}");
        }
        assert!((got.ss.total - oracle.total).abs() <= 1e-9 * oracle.total);
        assert!((got.ss.subjects - oracle.subj).abs() <= 1e-9 * oracle.total);
        assert!((got.ss.ab_error - oracle.abs_).abs() <= 1e-9 * oracle.total);
    }
}

#[test]
fn frozen_two_way_fixture() {
    // oracle values for the first fixed dataset
    let table = &fixed_datasets()[0];
    let oracle = oracle_2x2(&long(table));
    let got = rm_anova_2x2(table).unwrap();
    let f = oracle.f();
    assert!((got.a.f - f[0]).abs() < 1e-9);
    assert!((f[0] - FROZEN_F_HAPTIC).abs() < 1e-6, "haptic F drifted: {}", f[0]);
    assert!((f[1] - FROZEN_F_VISUAL).abs() < 1e-6, "visual F drifted: {}", f[1]);
    assert!((f[2] - FROZEN_F_INTERACTION).abs() < 1e-6, "interaction F drifted: {}", f[2]);
}

const FROZEN_F_HAPTIC: f64 = 4.898753623010097;
const FROZEN_F_VISUAL: f64 = 367.6068321499793;
const FROZEN_F_INTERACTION: f64 = 6.700285960779841;

#[test]
fn one_way_matches_oracle() {
    for table in fixed_datasets() {
        let rows: Vec<Vec<f64>> = table.iter().map(|r| vec![r[0][1], r[1][1]]).collect();
        let got = one_way_rm_anova(&rows).unwrap();
        let want = oracle_one_way(&rows);
        assert!((got.effect.f - want).abs() <= 1e-6 * want.max(1.0), "{} vs {want}", got.effect.f);
        // four-level version over all cells
        let rows4: Vec<Vec<f64>> = table.iter().map(|r| vec![r[0][0], r[0][1], r[1][0], r[1][1]]).collect();
        let got4 = one_way_rm_anova(&rows4).unwrap();
        let want4 = oracle_one_way(&rows4);
        assert!((got4.effect.f - want4).abs() <= 1e-6 * want4.max(1.0));
        assert_eq!(got4.effect.df_effect, 3.0);
        assert_eq!(got4.effect.df_error, 39.0);
    }
}

#[test]
fn two_level_f_equals_t_squared() {
    for table in fixed_datasets() {
        let pairs: Vec<(f64, f64)> = table.iter().map(|r| (r[0][1], r[1][1])).collect();
        let rows: Vec<[f64; 2]> = pairs.iter().map(|&(a, b)| [a, b]).collect();
        let f = one_way_rm_anova(&rows).unwrap().effect;
        let t = paired_t_bonferroni(&pairs, 1).unwrap();
        assert!((f.f - t.t * t.t).abs() <= 1e-9 * f.f.max(1.0), "F {} t² {}", f.f, t.t * t.t);
        assert!((f.p - t.p_raw).abs() <= 1e-9);
        let reference = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 13.0).unwrap().cdf(t.t.abs()));
        assert!((t.p_raw - reference).abs() <= 1e-9);
    }
}

#[test]
fn special_functions_match_statrs() {
    let grid_a = [0.5, 1.0, 2.5, 6.5, 13.0, 40.0];
    let grid_x = [1e-4, 0.01, 0.2, 0.5, 0.77, 0.95, 0.9999];
    for &a in &grid_a {
        for &b in &grid_a {
            for &x in &grid_x {
                let got = reg_inc_beta(a, b, x);
                let want = beta_reg(a, b, x);
                let tol = 1e-10 * want.abs().max(1e-300);
                assert!((got - want).abs() <= tol.max(1e-14), "I_{x}({a},{b}) = {got} vs {want}");
            }
        }
    }
    for &(f, d1, d2) in &[(0.3, 1.0, 13.0), (6.87, 1.0, 13.0), (2.0, 3.0, 39.0), (40.0, 1.0, 19.0)] {
        let want = 1.0 - FisherSnedecor::new(d1, d2).unwrap().cdf(f);
        assert!((f_sf(f, d1, d2) - want).abs() <= 1e-10 * want.max(1e-3));
    }
    let want = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, 13.0).unwrap().cdf(2.5));
    assert!((t_two_sided(2.5, 13.0) - want).abs() <= 1e-12);
}

fn table_strategy() -> impl Strategy<Value = Vec<[[f64; 2]; 2]>> {
    prop::collection::vec(prop::array::uniform2(prop::array::uniform2(-50.0f64..50.0)), 3..20)
}

proptest! {
    #[test]
    fn ss_components_sum_to_total(table in table_strategy()) {
        let r = rm_anova_2x2(&table).unwrap();
        prop_assert!((r.ss.components_sum() - r.ss.total).abs() <= 1e-9 * r.ss.total.max(1e-12));
    }

    #[test]
    fn f_invariant_to_shift_scale_and_relabel(table in table_strategy(), shift in -1e3f64..1e3, scale in 0.01f64..100.0, rot in 0usize..20) {
        let base = rm_anova_2x2(&table).unwrap();
        let moved: Vec<[[f64; 2]; 2]> = table.iter().map(|r| r.map(|c| c.map(|x| (x + shift) * scale))).collect();
        let mut relabeled = table.clone();
        relabeled.rotate_left(rot % table.len());
        for other in [rm_anova_2x2(&moved).unwrap(), rm_anova_2x2(&relabeled).unwrap()] {
            for (x, y) in [(base.a, other.a), (base.b, other.b), (base.interaction, other.interaction)] {
                prop_assert!((x.f - y.f).abs() <= 1e-6 * x.f.max(1.0), "F {} vs {}", x.f, y.f);
                prop_assert!((x.p - y.p).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn anova_output_ranges(table in table_strategy()) {
        let r = rm_anova_2x2(&table).unwrap();
        for e in [r.a, r.b, r.interaction] {
            prop_assert!(e.f >= 0.0);
            prop_assert!(e.p > 0.0 && e.p <= 1.0);
            prop_assert!((0.0..=1.0).contains(&e.eta_squared));
        }
    }

    #[test]
    fn one_way_two_levels_is_t_squared(rows in prop::collection::vec(prop::array::uniform2(-20.0f64..20.0), 3..30)) {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
        let t = paired_t_bonferroni(&pairs, 1).unwrap();
        prop_assume!(!t.degenerate);
        let f = one_way_rm_anova(&rows).unwrap().effect.f;
        prop_assert!((f - t.t * t.t).abs() <= 1e-9 * f.max(1.0));
    }
}
