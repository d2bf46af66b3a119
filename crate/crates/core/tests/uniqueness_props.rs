use proptest::prelude::*;

use weakflow::uniqueness1d::{analyze_positive_b, AnalysisOptions, Verdict};
use weakflow::VectorField;

fn verdict(src: &str) -> &'static str {
    let b = VectorField::parse(&[src]).unwrap();
    match analyze_positive_b(&b, &AnalysisOptions::default())
        .unwrap()
        .verdict
    {
        Verdict::Unique => "unique",
        Verdict::NotUnique { .. } => "not_unique",
        Verdict::Inconclusive { .. } => "inconclusive",
    }
}

/// b(x) as source text with `x` replaced by `arg`.
fn family(kind: usize, a: f64, c: f64, s: f64, arg: &str) -> String {
    match kind {
        0 => format!("{a:?} + {c:?}*({arg})^2"),
        1 => format!("{a:?} + {c:?}*exp({s:?}*({arg}))"),
        _ => format!("{a:?} + {c:?}*atan({arg})^2"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Only the left tail of 1/b matters, so shifts and positive rescaling
    // keep the verdict while a reflection can change it.
    #[test]
    fn verdict_follows_the_left_tail(
        kind in 0..3usize,
        a in 0.5..2.0f64,
        c in 0.5..2.0f64,
        s in 0.5..1.3f64,
        k in 0.25..4.0f64,
        shift in -3.0..3.0f64,
    ) {
        let base = verdict(&family(kind, a, c, s, "x"));
        let expected = if kind == 0 { "not_unique" } else { "unique" };
        prop_assert_eq!(base, expected);
        prop_assert_eq!(verdict(&family(kind, a, c, s, &format!("x + {shift:?}"))), base);
        prop_assert_eq!(verdict(&format!("{k:?}*({})", family(kind, a, c, s, "x"))), base);
        let reflected = verdict(&family(kind, a, c, s, "-x"));
        prop_assert_eq!(reflected, if kind == 1 { "not_unique" } else { base });
    }
}
