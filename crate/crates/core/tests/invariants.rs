use proptest::prelude::*;

use rwfbm::walk::{compute_stopping_times, twist_level, Hierarchy, Side};
use rwfbm::{brute_force_recompute, FbmPlan, Kernel, TruncationPolicy, TwoSidedBm};

fn steps(len: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 }), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stopping_times_have_even_gaps(raw in steps(400)) {
        let mut sums = vec![0i64];
        for &x in &raw {
            sums.push(sums.last().unwrap() + x as i64);
        }
        let st = compute_stopping_times(&sums).unwrap();
        prop_assert_eq!(st.times.len(), st.found + 1);
        for w in st.times.windows(2) {
            let gap = w[1] - w[0];
            prop_assert!(gap >= 2 && gap % 2 == 0);
            prop_assert_eq!((sums[w[1]] - sums[w[0]]).abs(), 2);
        }
    }

    #[test]
    fn fixed_hierarchies_refine_exactly(l0 in steps(64), l1 in steps(512), l2 in steps(4096)) {
        let h = Hierarchy::from_raw_levels(Side::Right, &[l0, l1.clone(), l2]).unwrap();
        for m in 1..=2u32 {
            let coarse = h.level(m - 1).unwrap();
            let fine = h.level(m).unwrap();
            for k in 0..fine.bridges() {
                let t = fine.stopping_time(k).unwrap();
                prop_assert_eq!(fine.partial_sum(t), 2 * coarse.partial_sum(k));
            }
        }
        // Hierarchy twisting agrees with the standalone routine on the same raw steps.
        let fine = h.level(1).unwrap();
        let n = fine.twisted_steps().len();
        let direct = twist_level(&h.level(0).unwrap().twisted_steps().to_vec(), &l1[..n]).unwrap();
        prop_assert_eq!(direct, fine.twisted_steps().to_vec());
    }

    #[test]
    fn fft_values_match_direct_sums(
        hurst in 0.05f64..0.95,
        m in 0u32..=4,
        seed in any::<u64>(),
        frac in 0.0f64..=1.0,
    ) {
        let plan = FbmPlan::new(Kernel::new(hurst).unwrap(), m, 1.0, TruncationPolicy::default()).unwrap();
        let mut bm = TwoSidedBm::new(seed);
        let path = plan.run(&mut bm).unwrap();
        let k = (frac * plan.grid_count() as f64) as usize;
        let direct = brute_force_recompute(&bm, m, hurst, k, path.tail_cutoff_used).unwrap();
        prop_assert!((path.values()[k] - direct).abs() < 1e-12);
    }

    #[test]
    fn half_hurst_path_is_the_walk(seed in any::<u64>(), m in 0u32..=5) {
        let plan = FbmPlan::new(Kernel::new(0.5).unwrap(), m, 1.0, TruncationPolicy::default()).unwrap();
        let mut bm = TwoSidedBm::new(seed);
        let path = plan.run(&mut bm).unwrap();
        let b = bm.right().bm(m).unwrap().grid_values(plan.grid_count()).unwrap();
        for (x, y) in path.values().iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn extension_order_does_not_change_steps() {
    let mut stepwise = TwoSidedBm::new(99);
    for m in 0..=6 {
        stepwise.extend_two_sided(m, 0.5).unwrap();
    }
    stepwise.extend_two_sided(6, 2.0).unwrap();
    let mut direct = TwoSidedBm::new(99);
    direct.extend_two_sided(6, 2.0).unwrap();
    for m in 0..=6u32 {
        let n = 2 * 4i64.pow(m);
        for r in -n..n {
            assert_eq!(stepwise.step(m, r).unwrap(), direct.step(m, r).unwrap(), "m={m} r={r}");
        }
    }
}

#[test]
fn sides_and_seeds_are_independent_streams() {
    let mut a = TwoSidedBm::new(5);
    let mut b = TwoSidedBm::new(6);
    a.extend_two_sided(4, 1.0).unwrap();
    b.extend_two_sided(4, 1.0).unwrap();
    let right: Vec<i8> = (0..256).map(|r| a.step(4, r).unwrap()).collect();
    let left: Vec<i8> = (0..256).map(|r| a.step(4, -1 - r).unwrap()).collect();
    let other: Vec<i8> = (0..256).map(|r| b.step(4, r).unwrap()).collect();
    assert_ne!(right, other);
    assert_ne!(right, left.iter().map(|x| -x).collect::<Vec<_>>());
}
