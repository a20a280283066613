//! Hand-transcribed example MDPs and the badly spaced family.

use crate::error::{Error, Result};
use crate::model::{AsymMdp, AsymMdpBuilder};
use crate::numeric::{int, parse_rational, rational, Rational};

pub const BUILTINS: [&str; 4] = ["investment", "appendix_ex2", "appendix_ex3", "appendix_ex4"];

pub fn builtin(name: &str) -> Result<AsymMdp> {
    match name {
        "investment" => Ok(investment()),
        "appendix_ex2" => Ok(appendix_ex2()),
        "appendix_ex3" => Ok(appendix_ex3()),
        "appendix_ex4" => Ok(appendix_ex4()),
        other => Err(Error::UnknownBuiltin(other.to_string())),
    }
}

fn dec(x: &str) -> Rational {
    parse_rational(x).expect("literal")
}

/// Same reward for both principals.
fn both(x: &str) -> Vec<Rational> {
    vec![dec(x), dec(x)]
}

/// Deterministic move.
fn to(target: &str) -> Vec<(&str, Rational)> {
    vec![(target, int(1))]
}

/// Keep earning 3 in `s0`, or pay 1 once to earn 6 in `s1` forever.
pub fn investment() -> AsymMdp {
    AsymMdpBuilder::new()
        .states(["s0", "s1"])
        .principal("Alice", rational(2, 3))
        .principal("Bob", rational(1, 3))
        .action("s0", "a", both("3"), to("s0"))
        .action("s0", "b", both("-1"), to("s1"))
        .action("s1", "b", both("6"), to("s1"))
        .build()
        .expect("well-formed")
}

/// Four states with probabilistic branching; discounts 0.9 and 0.3.
pub fn appendix_ex2() -> AsymMdp {
    AsymMdpBuilder::new()
        .states(["s0", "s1", "s2", "s3"])
        .principal("p0", dec("0.9"))
        .principal("p1", dec("0.3"))
        .action("s0", "a", both("2.75"), vec![("s1", dec("0.5")), ("s2", dec("0.5"))])
        .action("s0", "b", both("1.04"), vec![("s0", dec("0.6")), ("s3", dec("0.4"))])
        .action(
            "s1",
            "c",
            both("3"),
            vec![("s1", dec("0.3")), ("s2", dec("0.4")), ("s3", dec("0.3"))],
        )
        .action("s1", "d", both("-0.5"), vec![("s0", dec("0.5")), ("s3", dec("0.5"))])
        .action("s2", "e", both("1"), to("s2"))
        .action("s3", "f", both("2.5"), to("s3"))
        .build()
        .expect("well-formed")
}

fn chain(a_reward: &str, g_reward: &str, extra_hop: bool) -> AsymMdpBuilder {
    let mut b = AsymMdpBuilder::new()
        .states(["s0", "s1", "s2", "s3", "s4", "s5"])
        .action("s0", "a", both(a_reward), to("s4"))
        .action("s0", "b", both("0"), to("s1"))
        .action("s1", "c", both("10"), to("s1"))
        .action("s1", "d", both("0"), to("s2"))
        .action("s2", "e", both("7"), to("s2"))
        .action("s2", "f", both("5"), to("s3"))
        .action("s3", "g", both(g_reward), to("s3"))
        .action("s4", "h", both("0"), to("s5"))
        .action("s4", "j", both("-2"), to("s1"));
    if extra_hop {
        b = b
            .state("s6")
            .action("s5", "k", both("0"), to("s6"))
            .action("s6", "m", both("0"), to("s3"));
    } else {
        b = b.action("s5", "k", both("0"), to("s3"));
    }
    b
}

/// Deterministic chain with discounts 0.99 and 0.01.
pub fn appendix_ex3() -> AsymMdp {
    chain("1", "11", false)
        .principal("p0", dec("0.99"))
        .principal("p1", dec("0.01"))
        .build()
        .expect("well-formed")
}

/// The chain of [`appendix_ex3`] with a larger detour reward, a longer
/// detour and discounts 0.88 and 0.15.
pub fn appendix_ex4() -> AsymMdp {
    chain("10.5", "20", true)
        .principal("p0", dec("0.88"))
        .principal("p1", dec("0.15"))
        .build()
        .expect("well-formed")
}

/// Three-state family whose horizon grows quadratically in `n`:
/// discounts `n/(2n-1)` and `(n+1)/(2n+1)`.
pub fn badly_spaced(n: u32) -> Result<AsymMdp> {
    if n < 2 {
        return Err(Error::Argument(format!("badly spaced family needs n >= 2, got {n}")));
    }
    let n = i64::from(n);
    Ok(AsymMdpBuilder::new()
        .states(["P0", "S1", "S2"])
        .principal("p0", rational(n, 2 * n - 1))
        .principal("p1", rational(n + 1, 2 * n + 1))
        .action("P0", "go", vec![int(0), int(0)], vec![("S1", rational(1, 2)), ("P0", rational(1, 2))])
        .action("S1", "loop", vec![int(1), int(0)], to("S1"))
        .action("S1", "move", vec![int(2), int(2)], to("S2"))
        .action("S2", "stay", vec![int(0), int(2)], to("S2"))
        .build()
        .expect("well-formed"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eval_positional;
    use crate::numeric::NumericMode;

    #[test]
    fn all_builtins_validate() {
        for name in BUILTINS {
            let m = builtin(name).unwrap();
            assert!(m.validate(NumericMode::Exact).is_empty(), "{name}");
        }
        assert!(matches!(builtin("nope"), Err(Error::UnknownBuiltin(_))));
    }

    #[test]
    fn shapes() {
        let inv = investment();
        assert_eq!(inv.num_states(), 2);
        assert_eq!(inv.states()[0].actions[1].rewards[0], int(-1));
        let ex3 = appendix_ex3();
        assert_eq!(ex3.num_states(), 6);
        let s3 = ex3.state_index("s3").unwrap();
        assert_eq!(ex3.states()[s3].actions[0].rewards[0], int(11));
        let s4 = ex3.state_index("s4").unwrap();
        assert_eq!(ex3.action_name(s4, 1), "j");
        assert_eq!(ex3.states()[s4].actions[1].rewards[0], int(-2));
        let ex4 = appendix_ex4();
        assert_eq!(ex4.num_states(), 7);
        assert_eq!(ex4.states()[0].actions[0].rewards[0], rational(21, 2));
    }

    #[test]
    fn badly_spaced_ten() {
        let m = badly_spaced(10).unwrap();
        assert_eq!(m.discounts(), vec![rational(10, 19), rational(11, 21)]);
        // Looping forever in S1 pays principal 0 1/(1 - λ0) = 2 + 1/(n - 1).
        let p = eval_positional(&m.numeric::<Rational>(), &[0, 0, 0]).unwrap();
        assert_eq!(p.per_principal[0][1], int(2) + rational(1, 9));
        let r = m.spacing_report(&int(100)).unwrap();
        assert_eq!(r.pairs[0].spacing, int(209));
        assert!(!r.all_spaced());
        assert!(badly_spaced(1).is_err());
    }
}
