mod common;

use arp_sentinel::metrics::{confusion, derive};
use arp_sentinel::rng::SimRng;
use arp_sentinel::Label;

#[test]
fn confusion_and_ratios_match_counting_loop() {
    let mut rng = SimRng::new(123);
    for _ in 0..10_000 {
        let n = 1 + rng.below(60);
        let predicted = common::random_labels(&mut rng, n);
        let actual = common::random_labels(&mut rng, n);
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..n {
            let p = predicted[i] == Label::Attack;
            let a = actual[i] == Label::Attack;
            if p && a {
                tp += 1;
            } else if p {
                fp += 1;
            } else if a {
                fn_ += 1;
            } else {
                tn += 1;
            }
        }
        let m = confusion(&predicted, &actual).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (tp, fp, fn_, tn));
        let r = derive(m);
        let div = |a: u64, b: u64| if b == 0 { None } else { Some(a as f64 / b as f64) };
        assert_eq!(r.accuracy, div(tp + tn, n as u64));
        assert_eq!(r.precision, div(tp, tp + fp));
        assert_eq!(r.recall, div(tp, tp + fn_));
        assert_eq!(r.fpr, div(fp, fp + tn));
        match (r.precision, r.recall, r.f1) {
            (Some(p), Some(q), Some(f)) if p + q > 0.0 => {
                assert!((f - 2.0 * p * q / (p + q)).abs() <= 1e-12)
            }
            (Some(p), Some(q), f) => assert!(p + q == 0.0 && f.is_none_or(|f| f == 0.0)),
            (_, _, f) => assert!(f.is_none()),
        }
    }
}
