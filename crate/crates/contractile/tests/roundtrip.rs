mod common;

use contractile::minimalcaps::{decode_mc, encode_mc, McInstr};
use contractile::riscv::instr::random_instr;
use contractile::riscv::{decode_rv32, encode_rv32, RvInstr};
use contractile::sexpr;
use contractile::value::OPS;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,5}".prop_filter("reserved", |s| !matches!(s.as_str(), "true" | "false"))
}

fn name() -> impl Strategy<Value = String> {
    "[A-Z][A-Za-z]{0,5}"
}

fn leaf_term() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("true".to_string()),
        Just("false".to_string()),
        Just("()".to_string()),
        any::<u32>().prop_map(|b| format!("{b:#x}")),
        any::<i64>().prop_map(|i| i.to_string()),
        name().prop_map(|e| format!("'{e}")),
        ident(),
    ]
}

fn term_src() -> impl Strategy<Value = String> {
    leaf_term().prop_recursive(4, 32, 4, |inner| {
        let list = |n| prop::collection::vec(inner.clone(), n);
        let op_args = inner.clone();
        prop_oneof![
            (0..OPS.len()).prop_flat_map(move |i| {
                let op = OPS[i];
                prop::collection::vec(op_args.clone(), op.arity())
                    .prop_map(move |args| format!("(op {} {})", op.name(), args.join(" ")))
            }),
            list(0..4).prop_map(|ts| format!("(tuple {})", ts.join(" "))),
            (name(), list(0..3)).prop_map(|(c, ts)| format!("(ctor {c} {})", ts.join(" "))),
            prop::collection::btree_map(ident(), inner.clone(), 1..3)
                .prop_map(|fs| format!("(record {})", fs.iter().map(|(f, t)| format!("({f} {t})")).collect::<Vec<_>>().join(" "))),
            (inner.clone(), 0usize..4).prop_map(|(t, i)| format!("(proj {t} {i})")),
            (inner.clone(), ident()).prop_map(|(t, f)| format!("(field {t} {f})")),
            (inner.clone(), inner.clone(), inner).prop_map(|(c, a, b)| format!("(if {c} {a} {b})")),
        ]
    })
}

fn sort_src() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("unit".to_string()),
        Just("bool".to_string()),
        Just("int".to_string()),
        Just("bits".to_string()),
        Just("any".to_string()),
        name().prop_map(|n| format!("(enum {n})")),
        name().prop_map(|n| format!("(union {n})")),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(|ss| format!("(tuple {})", ss.join(" "))),
            prop::collection::btree_map(ident(), inner, 1..3)
                .prop_map(|fs| format!("(record {})", fs.iter().map(|(f, s)| format!("({f} {s})")).collect::<Vec<_>>().join(" "))),
        ]
    })
}

fn assertion_src() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("emp".to_string()),
        term_src().prop_map(|t| format!("(pure {t})")),
        (name(), term_src()).prop_map(|(r, t)| format!("(reg '{r} {t})")),
        (term_src(), term_src()).prop_map(|(a, t)| format!("(mem {a} {t})")),
        (name(), prop::collection::vec(term_src(), 0..3)).prop_map(|(p, ts)| format!("(pred {p} {})", ts.join(" "))),
        (ident(), term_src(), name(), prop::collection::vec(term_src(), 0..2))
            .prop_map(|(w, a, p, ts)| format!("(wand (exists {w} bits (mem {a} {w})) (pred {p} {}))", ts.join(" "))),
    ];
    leaf.prop_recursive(3, 16, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(|xs| format!("(star {})", xs.join(" "))),
            prop::collection::vec(inner.clone(), 2..4).prop_map(|xs| format!("(or {})", xs.join(" "))),
            (ident(), sort_src(), inner).prop_map(|(x, s, a)| format!("(exists {x} {s} {a})")),
        ]
    })
}

proptest! {
    #[test]
    fn terms_print_and_reparse(src in term_src()) {
        let t = sexpr::term(&src).map_err(|e| TestCaseError::fail(format!("{src}: {e:?}")))?;
        let printed = t.to_string();
        prop_assert_eq!(sexpr::term(&printed).unwrap(), t, "printed as {}", printed);
    }

    #[test]
    fn sorts_print_and_reparse(src in sort_src()) {
        let s = sexpr::parse_sort(&sexpr::read(&src).unwrap()).unwrap();
        let printed = s.to_string();
        prop_assert_eq!(sexpr::parse_sort(&sexpr::read(&printed).unwrap()).unwrap(), s);
    }

    #[test]
    fn assertions_print_and_reparse(src in assertion_src()) {
        let a = sexpr::assertion(&src).map_err(|e| TestCaseError::fail(format!("{src}: {e:?}")))?;
        let printed = a.to_string();
        prop_assert_eq!(sexpr::assertion(&printed).unwrap(), a, "printed as {}", printed);
    }

    #[test]
    fn contracts_print_and_reparse(
        vars in prop::collection::btree_map(ident(), sort_src(), 0..3),
        args in prop::collection::vec(term_src(), 0..3),
        pre in assertion_src(),
        post in assertion_src(),
    ) {
        let vs: Vec<String> = vars.iter().map(|(x, s)| format!("({x} {s})")).collect();
        let src = format!("(contract (vars {}) (args {}) (result r) (pre {pre}) (post {post}))", vs.join(" "), args.join(" "));
        let c = sexpr::contract(&src).unwrap();
        let printed = sexpr::print_contract(&c);
        prop_assert_eq!(sexpr::contract(&printed).unwrap(), c);
    }

    #[test]
    fn rv32_encode_decode(seed: u64) {
        let i = random_instr(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(decode_rv32(encode_rv32(&i)), i);
    }

    #[test]
    fn rv32_decode_is_total(w: u32) {
        match decode_rv32(w) {
            RvInstr::Illegal(x) => prop_assert_eq!(x, w),
            i => prop_assert_eq!(decode_rv32(encode_rv32(&i)), i),
        }
    }

    #[test]
    fn minimalcaps_encode_decode(seed: u64) {
        let i = common::random_mc(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(decode_mc(encode_mc(&i)), i);
    }

    #[test]
    fn minimalcaps_decode_is_total(w: i64) {
        let i = decode_mc(w);
        if i != McInstr::Fail {
            prop_assert_eq!(decode_mc(encode_mc(&i)), i);
        }
    }
}
