use proptest::prelude::*;
use rpa_core::barrier::{qp_filter, AffineConstraint, Barrier, BarrierConfig, StateContext};
use rpa_core::distributions::{discretize_truncated_gaussian, DiscreteCost};
use rpa_core::field::{rasterize, safe_mask, Bounds, CostFieldParams, RiskField};
use rpa_core::risk::{
    cpt_closed_form, cpt_value, cvar_value, decision_weights, er_value, CptParams, CvarConvention, RiskSpec,
};
use rpa_core::sim::{nominal_control, step_obstacle, unicycle_transform, AgentModel, ObstacleModel};
use rpa_core::Vec2;

fn lottery(lo: f64, hi: f64) -> impl Strategy<Value = DiscreteCost> {
    (2usize..=32)
        .prop_flat_map(move |m| (prop::collection::vec(lo..hi, m), prop::collection::vec(0.01f64..1.0, m)))
        .prop_map(|(mut outcomes, weights)| {
            outcomes.sort_by(f64::total_cmp);
            let total: f64 = weights.iter().sum();
            DiscreteCost::new(outcomes, weights.iter().map(|w| w / total).collect()).unwrap()
        })
}

fn theta() -> impl Strategy<Value = CptParams> {
    (0.3f64..1.5, 0.3f64..2.0, 0.3f64..1.0, 1.0f64..4.0)
        .prop_map(|(a, b, g, l)| CptParams::new(a, b, g, l).unwrap())
}

fn vec2(r: f64) -> impl Strategy<Value = Vec2> {
    (-r..r, -r..r).prop_map(|(x, y)| Vec2::new(x, y))
}

proptest! {
    #[test]
    fn decision_weights_are_a_distribution(l in lottery(0.0, 200.0), t in theta()) {
        let pi = decision_weights(l.probabilities(), t.alpha, t.beta);
        prop_assert!(pi.iter().all(|&w| w >= -1e-15));
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn models_coincide_at_neutral_parameters(l in lottery(0.0, 200.0)) {
        let er = er_value(&l);
        prop_assert!((cpt_value(&l, &CptParams::NEUTRAL) - er).abs() < 1e-9);
        prop_assert!((cvar_value(&l, 0.0) - er).abs() < 1e-9);
    }

    #[test]
    fn cvar_is_monotone_and_bounded(l in lottery(0.0, 200.0), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let (a, b) = (cvar_value(&l, lo), cvar_value(&l, hi));
        prop_assert!(a <= b);
        prop_assert!(er_value(&l) <= a + 1e-9);
        prop_assert!(b <= l.max_outcome());
    }

    #[test]
    fn concave_utility_undercuts_expectation(l in lottery(1.0 + 1e-9, 200.0), gamma in 0.1f64..0.99) {
        let t = CptParams::new(1.0, 1.0, gamma, 1.0).unwrap();
        prop_assert!(cpt_value(&l, &t) < er_value(&l));
    }

    #[test]
    fn discretization_is_normalized(mu in 0.0f64..300.0, ratio in 0.0f64..0.3, m in 2usize..40) {
        let sigma = ratio * mu;
        let l = discretize_truncated_gaussian(mu, sigma, m).unwrap();
        prop_assert!((l.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(!l.clamped());
        let bias = mu - er_value(&l);
        prop_assert!(bias >= -1e-9 && bias <= 3.0 * sigma / m as f64 + 1e-9);
    }

    #[test]
    fn closed_form_matches_lottery_pipeline(mu in 1.0f64..300.0, ratio in 0.0f64..0.3, t in theta()) {
        let sigma = ratio * mu;
        let lottery = cpt_value(&discretize_truncated_gaussian(mu, sigma, 10).unwrap(), &t);
        let closed = cpt_closed_form(mu, sigma, &t, 10).unwrap();
        prop_assert!((lottery - closed).abs() <= 1e-9 * closed.abs().max(1.0));
    }

    #[test]
    fn qp_output_satisfies_constraint(k in vec2(20.0), a in vec2(5.0), b in -50.0f64..50.0) {
        prop_assume!(a.norm() > 1e-6);
        let c = AffineConstraint { a, b };
        let u = qp_filter(k, &c).unwrap();
        prop_assert!(a.dot(u) >= b - 1e-12 * (1.0 + b.abs()));
        if a.dot(k) >= b {
            prop_assert_eq!(u, k);
        }
    }

    #[test]
    fn separated_condition_matches_direct(x in vec2(15.0), y in vec2(15.0), fy in vec2(2.0), u in vec2(10.0), gamma in 0.5f64..1.0) {
        let params = CostFieldParams::standard(0.5);
        let b = Barrier::new(RiskSpec::cpt(0.74, 1.0, gamma, 2.0).unwrap(), params, BarrierConfig::new(150.0, 1.0).unwrap()).unwrap();
        let ctx = StateContext::single_integrator(x, y, fy);
        let m = b.feasibility_margin(&ctx, u).unwrap();
        let hdot = b.h_dot(&ctx, u).unwrap();
        let gap = hdot + m.h;
        prop_assume!(gap.abs() > 1e-9);
        prop_assert_eq!(m.feasible, gap >= 0.0);
    }

    #[test]
    fn unicycle_transform_inverts(u in vec2(10.0), heading in -4.0f64..4.0, l in 0.05f64..2.0) {
        let (v, omega) = unicycle_transform(u, heading, l);
        let (s, c) = heading.sin_cos();
        let back = Vec2::new(c * v - s * l * omega, s * v + c * l * omega);
        prop_assert!((back - u).norm() < 1e-9 * (1.0 + u.norm()));
    }

    #[test]
    fn nominal_control_points_at_goal(state in vec2(20.0), goal in vec2(20.0), g in 0.1f64..3.0) {
        let u = nominal_control(state, goal, Vec2::new(g, g));
        prop_assert!(u.dot(goal - state) >= 0.0);
    }

    #[test]
    fn obstacles_never_overshoot(start in vec2(20.0), goal in vec2(20.0), speed in 0.0f64..5.0, dt in 0.001f64..1.0) {
        let mut obs = ObstacleModel::new(start, goal, speed).unwrap();
        let mut remaining = (goal - start).norm();
        for _ in 0..50 {
            obs = step_obstacle(&obs, dt);
            let r = (goal - obs.position).norm();
            prop_assert!(r <= remaining + 1e-12);
            remaining = r;
        }
    }

    #[test]
    fn heading_step_is_consistent(pos in vec2(5.0), heading in -3.0f64..3.0, u in vec2(3.0)) {
        let agent = AgentModel::Unicycle { position: pos, heading, offset: 0.2 };
        let next = agent.step(u, 1e-4);
        let velocity = (next.controlled_point() - agent.controlled_point()) * 1e4;
        prop_assert!((velocity - u).norm() < 1e-2 * (1.0 + u.norm()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn safe_and_risky_partition(rho in 1.0f64..250.0, gamma in 0.5f64..1.0) {
        let field = RiskField::new(RiskSpec::cpt(0.74, 1.0, gamma, 2.0).unwrap(), CostFieldParams::standard(0.5), CvarConvention::default()).unwrap();
        let grid = rasterize(&field, Vec2::new(10.0, 10.0), Bounds::square(0.0, 15.0), 30, 30).unwrap();
        let safe = safe_mask(&grid, rho);
        let risky = safe.complement();
        prop_assert_eq!(safe.count() + risky.count(), 900);
        prop_assert_eq!(safe.count_not_in(&risky.complement()), 0);
    }

    #[test]
    fn cpt_safe_sets_shrink_with_lambda(gamma in 0.6f64..1.0, l1 in 1.0f64..4.0, dl in 0.01f64..2.0, rho in 30.0f64..400.0) {
        let params = CostFieldParams::standard(0.5);
        let masks: Vec<_> = [l1, l1 + dl].iter().map(|&lambda| {
            let field = RiskField::new(RiskSpec::cpt(0.74, 1.0, gamma, lambda).unwrap(), params, CvarConvention::default()).unwrap();
            safe_mask(&rasterize(&field, Vec2::new(10.0, 10.0), Bounds::square(0.0, 15.0), 30, 30).unwrap(), rho)
        }).collect();
        prop_assert_eq!(masks[1].count_not_in(&masks[0]), 0);
    }
}
