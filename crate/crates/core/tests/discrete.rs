use jdist::discrete::*;
use jdist::matrix::Matrix;
use proptest::prelude::*;

/// Row-stochastic matrix; roughly a third of the raw entries are zero.
fn stochastic(n: usize, m: usize) -> impl Strategy<Value = DiscreteKernel> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64, 0.0..1.0f64], n * m).prop_map(move |raw| {
        let mut rows = Vec::new();
        for r in raw.chunks(m) {
            let s: f64 = r.iter().sum();
            rows.push(if s > 0.0 { r.iter().map(|v| v / s).collect() } else { vec![1.0 / m as f64; m] });
        }
        DiscreteKernel::from_rows(&rows).unwrap()
    })
}

/// Probability vector with some zero entries.
fn prob(n: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], n).prop_map(move |mut w| {
        if w.iter().all(|v| *v == 0.0) {
            w[0] = 1.0;
        }
        let s: f64 = w.iter().sum();
        DiscreteMeasure::probability(w.iter().map(|v| v / s).collect()).unwrap()
    })
}

fn oracle_embed(x: &DiscreteMeasure, a: &DiscreteKernel) -> Vec<Vec<f64>> {
    (0..a.rows()).map(|i| (0..a.cols()).map(|j| x.weights()[i] * a.get(i, j)).collect()).collect()
}

fn oracle_compose(alpha: &DiscreteJoint, beta: &DiscreteJoint) -> Vec<Vec<f64>> {
    let (n, m) = alpha.shape();
    let k = beta.shape().1;
    let y: Vec<f64> = (0..m).map(|j| (0..n).map(|i| alpha.get(i, j)).sum()).collect();
    (0..n)
        .map(|i| {
            (0..k)
                .map(|c| (0..m).filter(|&j| y[j] > 0.0).map(|j| alpha.get(i, j) * beta.get(j, c) / y[j]).sum())
                .collect()
        })
        .collect()
}

fn max_diff(a: &DiscreteJoint, b: &[Vec<f64>]) -> f64 {
    a.max_abs_diff(&DiscreteJoint::from_rows(b).unwrap())
}

fn chain3() -> impl Strategy<Value = (DiscreteMeasure, DiscreteKernel, DiscreteKernel, DiscreteKernel)> {
    (1usize..12, 1usize..12, 1usize..12, 1usize..12)
        .prop_flat_map(|(n, m, k, l)| (prob(n), stochastic(n, m), stochastic(m, k), stochastic(k, l)))
}

proptest! {
    #[test]
    fn embed_matches_oracle((x, a) in (1usize..20, 1usize..20).prop_flat_map(|(n, m)| (prob(n), stochastic(n, m)))) {
        let j = j_embed(&x, &a).unwrap();
        prop_assert!(max_diff(&j, &oracle_embed(&x, &a)) == 0.0);
    }

    #[test]
    fn functoriality((x, a, b, _) in chain3()) {
        let ab = a.then(&b).unwrap();
        let lhs = j_embed(&x, &ab).unwrap();
        let rhs = compose_joints(&j_embed(&x, &a).unwrap(), &j_embed(&x.push(&a).unwrap(), &b).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
    }

    #[test]
    fn compose_matches_oracle((x, a, b, _) in chain3()) {
        let alpha = j_embed(&x, &a).unwrap();
        let beta = j_embed(&x.push(&a).unwrap(), &b).unwrap();
        let z = compose_joints(&alpha, &beta).unwrap();
        prop_assert!(max_diff(&z, &oracle_compose(&alpha, &beta)) <= 1e-14);
    }

    #[test]
    fn marginals_and_associativity((x, a, b, c) in chain3()) {
        let y = x.push(&a).unwrap();
        let w = y.push(&b).unwrap();
        let (ja, jb, jc) = (j_embed(&x, &a).unwrap(), j_embed(&y, &b).unwrap(), j_embed(&w, &c).unwrap());
        let ab = compose_joints(&ja, &jb).unwrap();
        let left: f64 = ab.left_marginal().weights().iter().zip(x.weights()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let right: f64 = ab.right_marginal().weights().iter().zip(w.weights()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(left <= 1e-10 && right <= 1e-10);
        let r1 = compose_joints(&ab, &jc).unwrap();
        let r2 = compose_joints(&ja, &compose_joints(&jb, &jc).unwrap()).unwrap();
        prop_assert!(r1.max_abs_diff(&r2) <= 1e-9);
    }

    #[test]
    fn disintegration_recovers_the_joint((x, a) in (1usize..16, 1usize..16).prop_flat_map(|(n, m)| (prob(n), stochastic(n, m)))) {
        let alpha = j_embed(&x, &a).unwrap();
        let k = disintegrate(&alpha, &DiscreteMeasure::uniform(a.cols())).unwrap();
        prop_assert!(kernel_equiv(&k, &a, &x).unwrap());
        prop_assert!(j_embed(&x, &k).unwrap().max_abs_diff(&alpha) <= 1e-15);
    }

    #[test]
    fn bayes_inverse_is_the_dagger((x, a) in (1usize..16, 1usize..16).prop_flat_map(|(n, m)| (prob(n), stochastic(n, m)))) {
        let y = x.push(&a).unwrap();
        let b = bayes_inverse(&a, &x, &DiscreteMeasure::uniform(a.rows())).unwrap();
        let lhs = j_embed(&y, &b).unwrap();
        prop_assert!(lhs.max_abs_diff(&dagger(&j_embed(&x, &a).unwrap())) <= 1e-12);
        prop_assert!(dagger(&dagger(&lhs)) == lhs);
    }
}

#[test]
fn null_rows_do_not_change_the_embedding() {
    let x = DiscreteMeasure::probability(vec![0.5, 0.0, 0.5]).unwrap();
    let a = DiscreteKernel::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
    let b = DiscreteKernel::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.3, 0.7]]).unwrap();
    assert_eq!(j_embed(&x, &a).unwrap(), j_embed(&x, &b).unwrap());
    assert!(kernel_equiv(&a, &b, &x).unwrap());
    let c = DiscreteKernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.3, 0.7]]).unwrap();
    assert_ne!(j_embed(&x, &a).unwrap(), j_embed(&x, &c).unwrap());
}

#[test]
fn identity_kernel_embeds_to_diagonal() {
    let x = DiscreteMeasure::probability(vec![0.2, 0.3, 0.5]).unwrap();
    let j = j_embed(&x, &DiscreteKernel::identity(3)).unwrap();
    let mut d = Matrix::zeros(3, 3);
    for i in 0..3 {
        d[(i, i)] = x.weights()[i];
    }
    assert_eq!(j.cells(), &d);
    let alpha = j_embed(&x, &DiscreteKernel::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
    assert!(compose_joints(&j, &alpha).unwrap().max_abs_diff(&alpha) < 1e-16);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(DiscreteKernel::from_rows(&[vec![0.5, 0.6]]).is_err());
    assert!(DiscreteMeasure::new(vec![-0.1]).is_err());
    let x = DiscreteMeasure::uniform(2);
    let a = DiscreteKernel::identity(3);
    assert!(j_embed(&x, &a).is_err());
}
