use atlas_core::coupling::{couple, verify_l1_identity};
use atlas_core::engine::RunParams;
use atlas_core::excursion::{detect_excursions, t_chain, DeltaPath};
use atlas_core::model::{check_conditions, generate_initial, Condition, ThetaGrowth};
use atlas_core::reflect::{apply_reflection, SkorokhodSolver};
use atlas_core::stats::{analytic_bounds, ks_to_exponential, BoundQuery, Ecdf};
use atlas_core::{GapVector, InitialCondition, ModelSpec, NoiseStream};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Solves the complementarity problem by trying every active set.
fn lcp_by_enumeration(tent: &[f64]) -> Vec<f64> {
    let m = tent.len();
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let mut dl = vec![0.0; m];
        if !active.is_empty() {
            let k = active.len();
            let r = DMatrix::from_fn(k, k, |a, b| match active[a].abs_diff(active[b]) {
                0 => 1.0,
                1 => -0.5,
                _ => 0.0,
            });
            let rhs = DVector::from_iterator(k, active.iter().map(|&i| -tent[i]));
            let x = r.lu().solve(&rhs).expect("principal submatrix is invertible");
            for (a, &i) in active.iter().enumerate() {
                dl[i] = x[a];
            }
        }
        let rdl = apply_reflection(&dl);
        let ok = (0..m).all(|i| dl[i] >= -1e-13 && tent[i] + rdl[i] >= -1e-13);
        if ok {
            return dl;
        }
    }
    panic!("no feasible active set");
}

fn tentative(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solver_matches_enumeration(tent in tentative(6)) {
        let r = SkorokhodSolver::default().solve(&tent).unwrap();
        let oracle = lcp_by_enumeration(&tent);
        for (a, b) in r.local_time_increments.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        prop_assert!(r.residual <= 1e-12);
        for (g, d) in r.new_gaps.iter().zip(&r.local_time_increments) {
            prop_assert!(*g >= 0.0 && *d >= 0.0 && g * d <= 1e-12);
        }
    }

    #[test]
    fn solver_is_monotone(tent in tentative(12), bump in prop::collection::vec(0.0f64..1.0, 12)) {
        let higher: Vec<f64> = tent.iter().zip(&bump).map(|(t, b)| t + b).collect();
        let solver = SkorokhodSolver::default();
        let lo = solver.solve(&tent).unwrap();
        let hi = solver.solve(&higher).unwrap();
        for (a, b) in lo.new_gaps.iter().zip(&hi.new_gaps) {
            prop_assert!(a <= &(b + 1e-12));
        }
    }

    #[test]
    fn telescoping_sum(tent in tentative(40)) {
        let r = SkorokhodSolver::default().solve(&tent).unwrap();
        let dl = &r.local_time_increments;
        let lhs: f64 = apply_reflection(dl).iter().sum();
        let rhs = 0.5 * dl[0] + 0.5 * dl[dl.len() - 1];
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + dl.iter().sum::<f64>()));
    }

    #[test]
    fn ecdf_is_permutation_invariant(mut xs in prop::collection::vec(0.0f64..5.0, 1..60), seed in any::<u64>()) {
        let a = Ecdf::new(xs.clone()).unwrap();
        let n = xs.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.swap(i, (s >> 33) as usize % (i + 1));
        }
        let b = Ecdf::new(xs).unwrap();
        prop_assert_eq!(ks_to_exponential(&a, 1.3).unwrap(), ks_to_exponential(&b, 1.3).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ks_matches_quadratic_reference(xs in prop::collection::vec(prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 3.5]), 1..40), rate in 0.2f64..4.0) {
        let n = xs.len() as f64;
        let cdf = |x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (-rate * x).exp() };
        let mut naive = 0.0f64;
        for &x in &xs {
            let le = xs.iter().filter(|&&y| y <= x).count() as f64 / n;
            let lt = xs.iter().filter(|&&y| y < x).count() as f64 / n;
            naive = naive.max((le - cdf(x)).abs()).max((lt - cdf(x)).abs());
        }
        let fast = ks_to_exponential(&Ecdf::new(xs).unwrap(), rate).unwrap();
        prop_assert!((fast - naive).abs() < 1e-12);
    }

    #[test]
    fn prefix_positions_are_cumulative(gaps in prop::collection::vec(0.0f64..3.0, 1..30)) {
        let g = GapVector::new(gaps.clone()).unwrap();
        let pos = g.prefix_positions();
        prop_assert_eq!(pos.len(), gaps.len() + 1);
        prop_assert_eq!(pos[0], 0.0);
        for i in 0..gaps.len() {
            prop_assert!((pos[i + 1] - pos[i] - gaps[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pointwise_min_is_below_both(seed in any::<u64>(), m in 1usize..40) {
        let first = InitialCondition::DominatingExp { rate: 1.0 };
        let second = InitialCondition::StationaryPiA { a: 0.5 };
        let both = InitialCondition::PointwiseMin { first: Box::new(first.clone()), second: Box::new(second.clone()) };
        let u = generate_initial(&both, m, &mut NoiseStream::new(seed, 0)).unwrap();
        let mut noise = NoiseStream::new(seed, 0);
        let a = generate_initial(&first, m, &mut noise).unwrap();
        let b = generate_initial(&second, m, &mut noise).unwrap();
        for i in 0..m {
            prop_assert_eq!(u[i], a[i].min(b[i]));
        }
    }

    #[test]
    fn conditions_match_direct_sums(u in prop::collection::vec(0.01f64..3.0, 40), v in prop::collection::vec(0.01f64..3.0, 40), beta in 1.0f64..1.99) {
        let grid = [3, 7, 20, 40];
        let which = [Condition::Star, Condition::StarA, Condition::Djo { beta, theta: ThetaGrowth::Log }];
        let diag = check_conditions(&u, &v, &grid, &which).unwrap();
        for (n, &d) in grid.iter().enumerate() {
            let x = d as f64;
            let star: f64 = (0..d).map(|i| u[i].min(v[i])).sum::<f64>() / (x.sqrt() * x.ln());
            let l1: f64 = x.ln().ln() / x.ln() * (0..d).map(|i| (v[i] - u[i]).abs()).sum::<f64>();
            let ratio = u[d - 1] / (x * v[d - 1]);
            let s: f64 = u[..d].iter().sum();
            let logs: f64 = u[..d].iter().map(|x| (-x.ln()).max(0.0)).sum();
            let th = x.ln();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
            prop_assert!(close(diag.series("star").unwrap()[n], star));
            prop_assert!(close(diag.series("stara_l1").unwrap()[n], l1));
            prop_assert!(close(diag.series("stara_ratio").unwrap()[n], ratio));
            prop_assert!(close(diag.series("d1").unwrap()[n], s / (x.powf(beta) * th)));
            prop_assert!(close(diag.series("d2").unwrap()[n], logs / (x.powf(beta) * th)));
            prop_assert!(close(diag.series("d3").unwrap()[n], s / (x.powf(beta * beta / (1.0 + beta)) * th)));
        }
    }

    #[test]
    fn bounds_nonincreasing_in_level(gaps in prop::collection::vec(0.0f64..2.0, 8), t in 0.1f64..5.0, g1 in 0.0f64..10.0, dg in 0.0f64..5.0, k in 1usize..8, l in 1usize..8, d in 1usize..8) {
        let positions = GapVector::new(gaps).unwrap().prefix_positions();
        let q = |gamma: f64| BoundQuery { k, l, d, t, gamma, positions: positions.clone() };
        let lo = analytic_bounds(&q(g1)).unwrap();
        let hi = analytic_bounds(&q(g1 + dg)).unwrap();
        prop_assert!(hi.sup <= lo.sup + 1e-15);
        // The inf event shrinks as the level rises: its bound goes the other way.
        prop_assert!(hi.inf >= lo.inf - 1e-15);
    }

    #[test]
    fn excursions_match_full_scan(rows in prop::collection::vec(prop::collection::vec(prop::sample::select(vec![0.0, 0.05, 0.1, 0.3]), 3), 1..60), k in 1usize..=3) {
        let times: Vec<f64> = (0..rows.len()).map(|n| n as f64 * 0.5).collect();
        let path = DeltaPath::new(times.clone(), rows.clone()).unwrap();
        let eps = 0.1;
        let rec = detect_excursions(&path, k, eps, 1e9, 1e-11).unwrap();

        // Reference: one pass per stopping time, each scanning from the start.
        let first = |from_time: f64, pred: &dyn Fn(&[f64]) -> bool| -> Option<usize> {
            (0..rows.len()).find(|&n| times[n] >= from_time && pred(&rows[n]))
        };
        let mut expected = Vec::new();
        let mut from = 0.0;
        while let Some(open) = first(from, &|r| r[k - 1] >= eps) {
            let mut cursor = Some(times[open]);
            let mut chain = Vec::new();
            for j in 1..=k {
                cursor = cursor.and_then(|c| first(c, &|r| r[k - j] <= 1e-11).map(|n| times[n]));
                chain.push(cursor.unwrap_or(f64::INFINITY));
            }
            let close = cursor.and_then(|c| first(c, &|r| r[k - 1] <= 1e-11)).map(|n| times[n]);
            prop_assert_eq!(&chain, &t_chain(&path, k, times[open], 1e-11).unwrap());
            expected.push((times[open], close, chain));
            match close {
                Some(c) => from = c,
                None => break,
            }
        }
        prop_assert_eq!(rec.excursions.len(), expected.len());
        for (e, (open, close, chain)) in rec.excursions.iter().zip(&expected) {
            prop_assert_eq!(e.sigma_open, *open);
            prop_assert_eq!(e.sigma_close, *close);
            prop_assert_eq!(&e.chain, chain);
        }
        for w in rec.sigma_times.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coupled_identity_and_order(seed in any::<u64>(), shift in 0.0f64..1.0) {
        let spec = ModelSpec::atlas(7, 1.0).unwrap();
        let lower = generate_initial(&InitialCondition::StationaryPiA { a: 0.0 }, 6, &mut NoiseStream::new(seed, 1)).unwrap();
        let upper = GapVector::new(lower.as_slice().iter().map(|g| g + shift).collect()).unwrap();
        let rec = couple(&spec, &lower, &upper, &RunParams::new(1e-3, 2.0, 20), &mut NoiseStream::new(seed, 2)).unwrap();
        prop_assert!(rec.monotone_violation <= 1e-12);
        prop_assert!(rec.max_dl_increase <= 1e-12);
        prop_assert!(verify_l1_identity(&rec).max_defect <= 1e-10);
    }
}
