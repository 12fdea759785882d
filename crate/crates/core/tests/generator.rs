use approx::assert_relative_eq;
use markov_order::counts::count_words;
use markov_order::generator::{
    build_tensor, builtin_examples, builtin_spec, simulate, stationary_distribution, StationaryOptions,
    TransitionTensor, WordDistribution,
};
use markov_order::sample::word_space;
use markov_order::Word;
use nalgebra::{DMatrix, DVector};

fn tensor(name: &str) -> TransitionTensor {
    build_tensor(&builtin_spec(name).unwrap()).unwrap()
}

/// Largest deviation from `Π(x_1^l) = Σ_x Π(x x_1^{l-1}) p(x_l | last κ of x x_1^{l-1})`.
fn fixed_point_residual(t: &TransitionTensor, pi: &WordDistribution) -> f64 {
    let m = t.alphabet_size() as u64;
    let kappa = t.order();
    let l = pi.len;
    let space = word_space(t.alphabet_size(), l).unwrap();
    let lead = space / m;
    let ctx_space = word_space(t.alphabet_size(), kappa).unwrap();
    let mut worst = 0.0f64;
    for code in 0..space {
        let last = code % m;
        let head = code / m; // x_1^{l-1}
        let mut rhs = 0.0;
        for x in 0..m {
            let prev = x * lead + head; // x x_1^{l-1}
            let ctx = prev % ctx_space;
            rhs += pi.probs[prev as usize] * t.row(ctx)[last as usize];
        }
        worst = worst.max((pi.probs[code as usize] - rhs).abs());
    }
    worst
}

#[test]
fn stationary_fixed_point_for_builtins() {
    for b in builtin_examples() {
        let t = build_tensor(&b.spec).unwrap();
        for l in t.order().max(1)..=t.order() + 2 {
            let pi = stationary_distribution(&t, l, StationaryOptions::default()).unwrap();
            let total: f64 = pi.probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
            let r = fixed_point_residual(&t, &pi);
            assert!(r < 1e-9, "{} l={l}: residual {r}", b.name);
        }
    }
}

#[test]
fn power_iteration_matches_dense_solve() {
    for name in ["q1-lag2", "q1-lag3", "q3-lag2", "q3-lag3"] {
        let t = tensor(name);
        let m = t.alphabet_size();
        let states = t.context_count();
        // transition matrix of the derived first-order chain over E^κ
        let mut p = DMatrix::<f64>::zeros(states, states);
        for v in 0..states {
            for a in 0..m {
                p[(v, (v * m + a) % states)] += t.row(v as u64)[a];
            }
        }
        let mut a = p.transpose() - DMatrix::<f64>::identity(states, states);
        for j in 0..states {
            a[(states - 1, j)] = 1.0;
        }
        let mut rhs = DVector::<f64>::zeros(states);
        rhs[states - 1] = 1.0;
        let dense = a.lu().solve(&rhs).expect("singular system");

        let pi = stationary_distribution(&t, t.order(), StationaryOptions::default()).unwrap();
        for s in 0..states {
            assert!((pi.probs[s] - dense[s]).abs() < 1e-8, "{name} state {s}");
        }
    }
}

#[test]
fn iid_sample_frequencies() {
    let t = tensor("q2-iid");
    let s = simulate(&t, 100_000, 31, 0).unwrap();
    let c = count_words(&s, 1).unwrap();
    for (a, target) in [0.05, 0.05, 0.90].iter().enumerate() {
        let f = c.get(a as u64) as f64 / s.len() as f64;
        assert!((f - target).abs() < 0.01, "symbol {a}: {f}");
    }
}

#[test]
fn conditional_frequencies_follow_the_kernel() {
    let t = tensor("q1-lag2");
    let s = simulate(&t, 100_000, 77, 60).unwrap();
    let pairs = count_words(&s, 2).unwrap();
    let triples = count_words(&s, 3).unwrap();
    let mut checked = 0;
    for (ctx, _) in pairs.iter() {
        let row_total: u64 = (0..3).map(|a| triples.get(ctx * 3 + a)).sum();
        if row_total < 1000 {
            continue;
        }
        checked += 1;
        for a in 0..3u64 {
            let f = triples.get(ctx * 3 + a) as f64 / row_total as f64;
            let q = t.row(ctx)[a as usize];
            assert!((f - q).abs() < 0.02, "context {ctx} symbol {a}: {f} vs {q}");
        }
    }
    assert!(checked > 0);
}

#[test]
fn empirical_words_converge_to_stationary_law() {
    for b in builtin_examples() {
        let t = build_tensor(&b.spec).unwrap();
        let l = t.order().max(1);
        let pi = stationary_distribution(&t, l, StationaryOptions::default()).unwrap();
        let s = simulate(&t, 100_000, 5, 100).unwrap();
        let c = count_words(&s, l).unwrap();
        let total = c.total() as f64;
        let kl: f64 = c
            .iter()
            .map(|(code, k)| {
                let f = k as f64 / total;
                f * (f / pi.prob(&Word { code, len: l })).ln()
            })
            .sum();
        assert!(kl < 0.01, "{}: KL {kl}", b.name);
    }
}

#[test]
fn rows_of_q1_tensor() {
    let t = tensor("q1-lag2");
    for ctx in 0..9u64 {
        let row = t.row(ctx);
        assert_relative_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
    // context (1,2): ½ Q1 row 1 + ½ Q1 row 2
    let ctx = Word::from_labels(&[1, 2], 3).unwrap();
    assert_relative_eq!(t.row(ctx.code)[0], 0.05, epsilon = 1e-12);
    assert_relative_eq!(t.row(ctx.code)[1], 0.475, epsilon = 1e-12);
    assert_relative_eq!(t.row(ctx.code)[2], 0.475, epsilon = 1e-12);
}
