//! The MinimalCaps semantics as a core program: fetch, decode, one execute
//! clause per instruction, foreign memory access, and the contracts and
//! ghost lemmas used to verify capability safety.

use crate::ast::build as s;
use crate::ast::{Pattern, Program, Stm};
use crate::machine::MachineState;
use crate::mutation::Mutations;
use crate::seplogic::build as a;
use crate::seplogic::{Assertion, Contract, LemmaDecl};
use crate::sym::sym;
use crate::term::{self as t, Term};
use crate::value::{Op, Sort, Value};

use super::instr::{decode_mc, instr_to_value};
use super::types::{subperm, Capability, Permission, Word};

pub const GPRS: [&str; 4] = ["R0", "R1", "R2", "R3"];

pub fn word() -> Sort {
    Sort::Union(sym("word"))
}

pub fn perm_sort() -> Sort {
    Sort::Enum(sym("Permission"))
}

pub fn gpr_sort() -> Sort {
    Sort::Enum(sym("GPR"))
}

fn instr_sort() -> Sort {
    Sort::Union(sym("instr"))
}

/// Instruction constructors with their field names and sorts.
fn instr_ctors() -> Vec<(&'static str, Vec<(&'static str, Sort)>)> {
    let g = gpr_sort;
    vec![
        ("Store", vec![("rs", g()), ("rb", g()), ("imm", Sort::Int)]),
        ("Load", vec![("rd", g()), ("rb", g()), ("imm", Sort::Int)]),
        ("Jalr", vec![("rd", g()), ("rs", g())]),
        ("Move", vec![("rd", g()), ("rs", g())]),
        ("Lea", vec![("rd", g()), ("imm", Sort::Int)]),
        ("Restrict", vec![("rd", g()), ("code", Sort::Int)]),
        ("Subseg", vec![("rd", g()), ("r1", g()), ("r2", g())]),
        ("Add", vec![("rd", g()), ("r1", g()), ("r2", g())]),
        ("AddI", vec![("rd", g()), ("rs", g()), ("imm", Sort::Int)]),
        ("Bnez", vec![("rs", g()), ("imm", Sort::Int)]),
        ("Fail", vec![]),
        ("Halt", vec![]),
    ]
}

fn exec_name(ctor: &str) -> String {
    format!("exec_{}", ctor.to_lowercase())
}

// ---- statement helpers ----

fn cap_s(p: Stm, b: Stm, e: Stm, c: Stm) -> Stm {
    s::ctor("cap", vec![p, b, e, c])
}

fn add_s(x: Stm, y: Stm) -> Stm {
    s::prim(Op::Add, vec![x, y])
}

fn read_gpr(r: Stm) -> Stm {
    s::call("read_reg", vec![r])
}

fn write_gpr(r: Stm, v: Stm) -> Stm {
    s::call("write_reg", vec![r, v])
}

/// `match w { cap(p, b, e, a) => body }`; an integer falls through to the
/// no-arm failure.
fn with_cap(w: Stm, names: [&str; 4], body: Stm) -> Stm {
    s::match_(w, vec![(s::pctor("cap", &names), body)])
}

/// `match w { int(z) => body, cap(..) => fail msg }`
fn with_int(w: Stm, z: &str, msg: &str, body: Stm) -> Stm {
    s::match_(
        w,
        vec![
            (s::pctor("int", &[z]), body),
            (s::pctor("cap", &["_p", "_b", "_e", "_a"]), s::fail(msg)),
        ],
    )
}

/// Moves the pc capability to `cursor`, with the ghost steps that keep its
/// authority.
fn jump_pc(cursor: impl Fn(Stm) -> Stm) -> Stm {
    s::let_(
        "pcv",
        s::read_reg("pc"),
        with_cap(
            s::var("pcv"),
            ["pp", "pb", "pe", "pa"],
            s::let_(
                "npc",
                cap_s(s::var("pp"), s::var("pb"), s::var("pe"), cursor(s::var("pa"))),
                s::seqs(vec![
                    s::lemma("subperm_not_E", vec![s::enm("R"), s::var("pp")]),
                    s::lemma("move_cursor", vec![s::var("pcv"), s::var("npc")]),
                    s::write_reg("pc", s::var("npc")),
                ]),
            ),
        ),
    )
}

fn update_pc_body() -> Stm {
    jump_pc(|a| add_s(a, s::int(1)))
}

fn step_on() -> Stm {
    s::seq(s::call("update_pc", vec![]), s::tt())
}

fn exec_store(m: &Mutations) -> Stm {
    let mut body = vec![s::let_(
        "p",
        s::call("write_allowed", vec![s::var("perm")]),
        s::assert_(s::var("p"), "store: capability lacks write permission"),
    )];
    if m.no_write_allowed_assert {
        body.clear();
    }
    let mut ghost = vec![s::lemma("subperm_not_E", vec![s::enm("RW"), s::var("perm")])];
    if !m.no_move_cursor {
        ghost.push(s::lemma("move_cursor", vec![s::var("bc"), s::var("c")]));
    }
    let tail = s::let_(
        "w",
        read_gpr(s::var("rs")),
        s::seqs(
            ghost
                .into_iter()
                .chain([
                    s::foreign("write_mem", vec![s::var("c"), s::var("w")]),
                    step_on(),
                ])
                .collect(),
        ),
    );
    body.push(tail);
    s::let_(
        "bc",
        s::call("read_reg_cap", vec![s::var("rb")]),
        with_cap(
            s::var("bc"),
            ["perm", "beg", "end", "cursor"],
            s::let_(
                "c",
                cap_s(
                    s::var("perm"),
                    s::var("beg"),
                    s::var("end"),
                    add_s(s::var("cursor"), s::var("imm")),
                ),
                s::seqs(body),
            ),
        ),
    )
}

fn exec_load() -> Stm {
    s::let_(
        "bc",
        s::call("read_reg_cap", vec![s::var("rb")]),
        with_cap(
            s::var("bc"),
            ["perm", "beg", "end", "cursor"],
            s::let_(
                "c",
                cap_s(
                    s::var("perm"),
                    s::var("beg"),
                    s::var("end"),
                    add_s(s::var("cursor"), s::var("imm")),
                ),
                s::seqs(vec![
                    s::assert_(
                        s::prim(Op::Subperm, vec![s::enm("R"), s::var("perm")]),
                        "load: capability lacks read permission",
                    ),
                    s::lemma("subperm_not_E", vec![s::enm("R"), s::var("perm")]),
                    s::lemma("move_cursor", vec![s::var("bc"), s::var("c")]),
                    s::let_(
                        "w",
                        s::foreign("read_mem", vec![s::var("c")]),
                        write_gpr(s::var("rd"), s::var("w")),
                    ),
                    step_on(),
                ]),
            ),
        ),
    )
}

fn exec_jalr() -> Stm {
    let target = s::if_(
        s::eq(s::var("p"), s::enm("E")),
        s::seq(
            s::lemma("enter_cap_exec", vec![s::var("t")]),
            s::write_reg("pc", cap_s(s::enm("R"), s::var("b"), s::var("e"), s::var("a"))),
        ),
        s::write_reg("pc", s::var("t")),
    );
    s::let_(
        "pcv",
        s::read_reg("pc"),
        with_cap(
            s::var("pcv"),
            ["pp", "pb", "pe", "pa"],
            s::let_(
                "t",
                read_gpr(s::var("rs")),
                s::match_(
                    s::var("t"),
                    vec![
                        (s::pctor("int", &["_z"]), s::fail("jalr: target is not a capability")),
                        (
                            s::pctor("cap", &["p", "b", "e", "a"]),
                            s::let_(
                                "link",
                                cap_s(s::var("pp"), s::var("pb"), s::var("pe"), add_s(s::var("pa"), s::int(1))),
                                s::seqs(vec![
                                    s::lemma("subperm_not_E", vec![s::enm("R"), s::var("pp")]),
                                    s::lemma("move_cursor", vec![s::var("pcv"), s::var("link")]),
                                    write_gpr(s::var("rd"), s::var("link")),
                                    target,
                                    s::tt(),
                                ]),
                            ),
                        ),
                    ],
                ),
            ),
        ),
    )
}

fn exec_move() -> Stm {
    s::seq(write_gpr(s::var("rd"), read_gpr(s::var("rs"))), step_on())
}

fn exec_lea() -> Stm {
    s::let_(
        "w",
        s::call("read_reg_cap", vec![s::var("rd")]),
        with_cap(
            s::var("w"),
            ["p", "b", "e", "a"],
            s::let_(
                "c",
                cap_s(s::var("p"), s::var("b"), s::var("e"), add_s(s::var("a"), s::var("imm"))),
                s::seqs(vec![
                    s::assert_(s::not(s::eq(s::var("p"), s::enm("E"))), "lea: cannot move an enter capability"),
                    s::lemma("move_cursor", vec![s::var("w"), s::var("c")]),
                    write_gpr(s::var("rd"), s::var("c")),
                    step_on(),
                ]),
            ),
        ),
    )
}

fn exec_restrict() -> Stm {
    s::let_(
        "w",
        s::call("read_reg_cap", vec![s::var("rd")]),
        with_cap(
            s::var("w"),
            ["p", "b", "e", "a"],
            s::let_(
                "np",
                s::prim(Op::PermOfCode, vec![s::var("code")]),
                s::seqs(vec![
                    s::assert_(
                        s::prim(Op::Subperm, vec![s::var("np"), s::var("p")]),
                        "restrict: not a sub-permission",
                    ),
                    s::lemma("restrict_safe", vec![s::var("w"), s::var("np")]),
                    write_gpr(s::var("rd"), cap_s(s::var("np"), s::var("b"), s::var("e"), s::var("a"))),
                    step_on(),
                ]),
            ),
        ),
    )
}

fn exec_subseg() -> Stm {
    let le = |x: &str, y: &str| s::prim(Op::Le, vec![s::var(x), s::var(y)]);
    let inner = s::seqs(vec![
        s::assert_(s::not(s::eq(s::var("p"), s::enm("E"))), "subseg: cannot narrow an enter capability"),
        s::assert_(s::prim(Op::And, vec![le("b", "nb"), le("ne", "e")]), "subseg: range not within the old one"),
        s::lemma("subseg_safe", vec![s::var("w"), s::var("nb"), s::var("ne")]),
        write_gpr(s::var("rd"), cap_s(s::var("p"), s::var("nb"), s::var("ne"), s::var("a"))),
        step_on(),
    ]);
    s::let_(
        "w",
        s::call("read_reg_cap", vec![s::var("rd")]),
        with_cap(
            s::var("w"),
            ["p", "b", "e", "a"],
            with_int(
                read_gpr(s::var("r1")),
                "nb",
                "subseg: bound is not an integer",
                with_int(read_gpr(s::var("r2")), "ne", "subseg: bound is not an integer", inner),
            ),
        ),
    )
}

fn exec_add() -> Stm {
    with_int(
        read_gpr(s::var("r1")),
        "z1",
        "add: operand is not an integer",
        with_int(
            read_gpr(s::var("r2")),
            "z2",
            "add: operand is not an integer",
            s::let_(
                "w",
                s::ctor("int", vec![add_s(s::var("z1"), s::var("z2"))]),
                s::seqs(vec![
                    s::lemma("int_safe", vec![s::var("w")]),
                    write_gpr(s::var("rd"), s::var("w")),
                    step_on(),
                ]),
            ),
        ),
    )
}

fn exec_addi() -> Stm {
    with_int(
        read_gpr(s::var("rs")),
        "z",
        "addi: operand is not an integer",
        s::let_(
            "w",
            s::ctor("int", vec![add_s(s::var("z"), s::var("imm"))]),
            s::seqs(vec![
                s::lemma("int_safe", vec![s::var("w")]),
                write_gpr(s::var("rd"), s::var("w")),
                step_on(),
            ]),
        ),
    )
}

fn exec_bnez() -> Stm {
    with_int(
        read_gpr(s::var("rs")),
        "z",
        "bnez: operand is not an integer",
        s::seq(
            s::if_(
                s::eq(s::var("z"), s::int(0)),
                s::call("update_pc", vec![]),
                jump_pc(|a| add_s(a, s::var("imm"))),
            ),
            s::tt(),
        ),
    )
}

fn fde_step() -> Stm {
    let arms: Vec<(Pattern, Stm)> = instr_ctors()
        .into_iter()
        .map(|(c, fs)| {
            let names: Vec<&str> = fs.iter().map(|(n, _)| *n).collect();
            let call = s::call(&exec_name(c), names.iter().map(|n| s::var(n)).collect());
            (s::pctor(c, &names), call)
        })
        .collect();
    let execute = s::let_(
        "i",
        s::foreign("decode", vec![s::var("z")]),
        s::match_(s::var("i"), arms),
    );
    s::let_(
        "pcv",
        s::read_reg("pc"),
        s::match_(
            s::var("pcv"),
            vec![
                (s::pctor("int", &["_z"]), s::fail("fetch: pc is not a capability")),
                (
                    s::pctor("cap", &["p", "b", "e", "a"]),
                    s::seqs(vec![
                        s::assert_(
                            s::prim(Op::Subperm, vec![s::enm("R"), s::var("p")]),
                            "fetch: pc lacks read permission",
                        ),
                        s::assert_(s::prim(Op::WithinBounds, vec![s::var("pcv")]), "fetch: pc out of bounds"),
                        with_int(
                            s::foreign("read_mem", vec![s::var("pcv")]),
                            "z",
                            "decode: a capability is not an instruction",
                            execute,
                        ),
                    ]),
                ),
            ],
        ),
    )
}

fn gpr_dispatch(r: &str, on: impl Fn(&str) -> Stm) -> Stm {
    s::match_(
        s::var(r),
        GPRS.iter().map(|g| (s::plit(Value::enm(g)), on(g))).collect(),
    )
}

// ---- foreign functions ----

fn cap_arg(v: &Value) -> Result<Capability, String> {
    match Word::from_value(v) {
        Some(Word::Cap(c)) => Ok(c),
        _ => Err(format!("not a capability: {v}")),
    }
}

fn rt_read_mem(st: &mut MachineState, args: &[Value]) -> Result<Value, String> {
    let c = cap_arg(&args[0])?;
    if !subperm(Permission::R, c.perm) {
        return Err(format!("perm: {} does not allow reads", c.perm.name()));
    }
    if !c.within_bounds() {
        return Err(format!("bounds: cursor {} outside [{}, {}]", c.cursor, c.begin, c.end));
    }
    st.load_word(c.cursor)
}

fn rt_write_mem(st: &mut MachineState, args: &[Value]) -> Result<Value, String> {
    let c = cap_arg(&args[0])?;
    if !subperm(Permission::RW, c.perm) {
        return Err(format!("perm: {} does not allow writes", c.perm.name()));
    }
    if !c.within_bounds() {
        return Err(format!("bounds: cursor {} outside [{}, {}]", c.cursor, c.begin, c.end));
    }
    st.store_word(c.cursor, args[1].clone())?;
    Ok(Value::Unit)
}

fn rt_decode(_: &mut MachineState, args: &[Value]) -> Result<Value, String> {
    let z = args[0].as_int().ok_or("decode: expected an integer")?;
    Ok(instr_to_value(&decode_mc(z)))
}

// ---- assertions ----

fn v(x: Term) -> Assertion {
    a::pred("V", vec![x])
}

fn cap_t(p: Term, b: Term, e: Term, c: Term) -> Term {
    t::ctor("cap", vec![p, b, e, c])
}

fn capv(p: &str, b: &str, e: &str, c: &str) -> Term {
    cap_t(t::var(p), t::var(b), t::var(e), t::var(c))
}

fn subperm_t(x: Term, y: Term) -> Term {
    t::op(Op::Subperm, vec![x, y])
}

/// Every general-purpose register holds a safe word.
pub fn gprs_safe() -> Assertion {
    a::star(
        GPRS.iter()
            .enumerate()
            .map(|(i, r)| {
                let w = format!("w{i}");
                a::exists(&w, word(), a::star(vec![a::reg(r, t::var(&w)), v(t::var(&w))]))
            })
            .collect(),
    )
}

/// The pc holds a safe capability or an enter capability that is safe to
/// execute.
pub fn pc_after() -> Assertion {
    a::exists(
        "c",
        word(),
        a::star(vec![a::reg("pc", t::var("c")), a::or(v(t::var("c")), a::pred("E", vec![t::var("c")]))]),
    )
}

fn step_post() -> Assertion {
    a::star(vec![pc_after(), gprs_safe()])
}

fn lv(xs: &[(&str, Sort)]) -> Vec<(crate::sym::Sym, Sort)> {
    xs.iter().map(|(n, s)| (sym(n), s.clone())).collect()
}

fn pc_fields() -> Vec<(&'static str, Sort)> {
    vec![("pp", perm_sort()), ("pb", Sort::Int), ("pe", Sort::Int), ("pa", Sort::Int)]
}

fn exec_contract(fields: &[(&str, Sort)]) -> Contract {
    let mut vars: Vec<(&str, Sort)> = fields.to_vec();
    vars.extend(pc_fields());
    let pc = capv("pp", "pb", "pe", "pa");
    Contract {
        logic_vars: lv(&vars),
        args: fields.iter().map(|(n, _)| t::var(n)).collect(),
        pre: a::star(vec![
            a::reg("pc", pc.clone()),
            v(pc),
            a::pure(subperm_t(t::enm("R"), t::var("pp"))),
            gprs_safe(),
            a::pred("IH", vec![]),
        ]),
        result: sym("result"),
        post: step_post(),
    }
}

fn contracts() -> Vec<(String, Contract)> {
    let cap = capv("p", "b", "e", "a");
    let capfields = [("p", perm_sort()), ("b", Sort::Int), ("e", Sort::Int), ("a", Sort::Int)];
    let mut out: Vec<(String, Contract)> = vec![
        (
            "read_reg".to_string(),
            Contract {
                logic_vars: lv(&[("r", gpr_sort()), ("w", word())]),
                args: vec![t::var("r")],
                pre: a::reg_t(t::var("r"), t::var("w")),
                result: sym("result"),
                post: a::star(vec![
                    a::pure(t::eq(t::var("result"), t::var("w"))),
                    a::reg_t(t::var("r"), t::var("w")),
                ]),
            },
        ),
        (
            "write_reg".to_string(),
            Contract {
                logic_vars: lv(&[("r", gpr_sort()), ("w", word()), ("v", word())]),
                args: vec![t::var("r"), t::var("v")],
                pre: a::reg_t(t::var("r"), t::var("w")),
                result: sym("result"),
                post: a::reg_t(t::var("r"), t::var("v")),
            },
        ),
        (
            "read_mem".to_string(),
            Contract {
                logic_vars: lv(&capfields),
                args: vec![cap.clone()],
                pre: a::star(vec![v(cap.clone()), a::pure(subperm_t(t::enm("R"), t::var("p")))]),
                result: sym("result"),
                post: a::star(vec![v(t::var("result")), v(cap.clone())]),
            },
        ),
        (
            "write_mem".to_string(),
            Contract {
                logic_vars: lv(&[capfields.as_slice(), &[("w", word())]].concat()),
                args: vec![cap.clone(), t::var("w")],
                pre: a::star(vec![
                    v(cap.clone()),
                    v(t::var("w")),
                    a::pure(subperm_t(t::enm("RW"), t::var("p"))),
                ]),
                result: sym("result"),
                post: v(cap.clone()),
            },
        ),
        (
            "decode".to_string(),
            Contract {
                logic_vars: lv(&[("z", Sort::Int)]),
                args: vec![t::var("z")],
                pre: Assertion::Emp,
                result: sym("result"),
                post: Assertion::Emp,
            },
        ),
        (
            "update_pc".to_string(),
            Contract {
                logic_vars: lv(&capfields),
                args: vec![],
                pre: a::star(vec![
                    a::reg("pc", cap.clone()),
                    v(cap.clone()),
                    a::pure(subperm_t(t::enm("R"), t::var("p"))),
                ]),
                result: sym("result"),
                post: a::exists("c", word(), a::star(vec![a::reg("pc", t::var("c")), v(t::var("c"))])),
            },
        ),
        (
            "fdeStep".to_string(),
            Contract {
                logic_vars: vec![],
                args: vec![],
                pre: a::star(vec![
                    a::exists("c", word(), a::star(vec![a::reg("pc", t::var("c")), v(t::var("c"))])),
                    gprs_safe(),
                    a::pred("IH", vec![]),
                ]),
                result: sym("result"),
                post: step_post(),
            },
        ),
    ];
    for (c, fs) in instr_ctors() {
        out.push((exec_name(c), exec_contract(&fs)));
    }
    out
}

fn lemmas() -> Vec<LemmaDecl> {
    let cap = capv("p", "b", "e", "a");
    let capfields = [("p", perm_sort()), ("b", Sort::Int), ("e", Sort::Int), ("a", Sort::Int)];
    let with = |extra: &[(&str, Sort)]| lv(&[capfields.as_slice(), extra].concat());
    let not_e = |x: &str| t::ne(t::var(x), t::enm("E"));
    vec![
        LemmaDecl {
            name: sym("move_cursor"),
            logic_vars: with(&[("a2", Sort::Int)]),
            params: vec![cap.clone(), capv("p", "b", "e", "a2")],
            pre: a::star(vec![v(cap.clone()), a::pure(not_e("p"))]),
            post: v(capv("p", "b", "e", "a2")),
        },
        LemmaDecl {
            name: sym("subperm_not_E"),
            logic_vars: lv(&[("p", perm_sort()), ("q", perm_sort())]),
            params: vec![t::var("p"), t::var("q")],
            pre: a::star(vec![
                a::pure(t::or(t::eq(t::var("p"), t::enm("R")), t::eq(t::var("p"), t::enm("RW")))),
                a::pure(subperm_t(t::var("p"), t::var("q"))),
            ]),
            post: a::pure(not_e("q")),
        },
        LemmaDecl {
            name: sym("int_safe"),
            logic_vars: lv(&[("z", Sort::Int)]),
            params: vec![t::ctor("int", vec![t::var("z")])],
            pre: Assertion::Emp,
            post: v(t::ctor("int", vec![t::var("z")])),
        },
        LemmaDecl {
            name: sym("enter_cap_exec"),
            logic_vars: lv(&capfields[1..]),
            params: vec![cap_t(t::enm("E"), t::var("b"), t::var("e"), t::var("a"))],
            pre: a::star(vec![v(cap_t(t::enm("E"), t::var("b"), t::var("e"), t::var("a"))), a::pred("IH", vec![])]),
            post: a::pred("E", vec![cap_t(t::enm("R"), t::var("b"), t::var("e"), t::var("a"))]),
        },
        LemmaDecl {
            name: sym("restrict_safe"),
            logic_vars: with(&[("q", perm_sort())]),
            params: vec![cap.clone(), t::var("q")],
            pre: a::star(vec![v(cap.clone()), a::pure(subperm_t(t::var("q"), t::var("p")))]),
            post: v(capv("q", "b", "e", "a")),
        },
        LemmaDecl {
            name: sym("subseg_safe"),
            logic_vars: with(&[("b2", Sort::Int), ("e2", Sort::Int)]),
            params: vec![cap.clone(), t::var("b2"), t::var("e2")],
            pre: a::star(vec![
                v(cap.clone()),
                a::pure(not_e("p")),
                a::pure(t::op(Op::Le, vec![t::var("b"), t::var("b2")])),
                a::pure(t::op(Op::Le, vec![t::var("e2"), t::var("e")])),
            ]),
            post: v(capv("p", "b2", "e2", "a")),
        },
    ]
}

/// The MinimalCaps program, optionally with mutations applied.
pub fn program(m: &Mutations) -> Program {
    let mut p = Program::new("minimalcaps");
    let perms = ["O", "R", "RW", "E"];
    p.types.enums.insert(sym("Permission"), perms.iter().map(|x| sym(x)).collect());
    p.types.enums.insert(sym("GPR"), GPRS.iter().map(|x| sym(x)).collect());
    p.types.unions.insert(
        sym("word"),
        vec![
            (sym("int"), vec![Sort::Int]),
            (sym("cap"), vec![perm_sort(), Sort::Int, Sort::Int, Sort::Int]),
        ],
    );
    p.types.unions.insert(
        sym("instr"),
        instr_ctors()
            .into_iter()
            .map(|(c, fs)| (sym(c), fs.into_iter().map(|(_, s)| s).collect()))
            .collect(),
    );
    p.registers.push((sym("pc"), word()));
    for r in GPRS {
        p.registers.push((sym(r), word()));
    }

    let g = gpr_sort;
    p.add_internal("read_reg", &[("r", g())], word(), gpr_dispatch("r", s::read_reg));
    p.add_internal(
        "write_reg",
        &[("r", g()), ("v", word())],
        Sort::Unit,
        gpr_dispatch("r", |r| s::write_reg(r, s::var("v"))),
    );
    p.add_internal(
        "read_reg_cap",
        &[("r", g())],
        word(),
        s::let_(
            "w",
            read_gpr(s::var("r")),
            s::match_(
                s::var("w"),
                vec![
                    (s::pctor("int", &["_z"]), s::fail("expected a capability")),
                    (s::pctor("cap", &["_p", "_b", "_e", "_a"]), s::var("w")),
                ],
            ),
        ),
    );
    p.add_internal(
        "write_allowed",
        &[("perm", perm_sort())],
        Sort::Bool,
        s::prim(Op::Subperm, vec![s::enm("RW"), s::var("perm")]),
    );
    p.add_internal("update_pc", &[], Sort::Unit, update_pc_body());

    for (c, fs) in instr_ctors() {
        let body = match c {
            "Store" => exec_store(m),
            "Load" => exec_load(),
            "Jalr" => exec_jalr(),
            "Move" => exec_move(),
            "Lea" => exec_lea(),
            "Restrict" => exec_restrict(),
            "Subseg" => exec_subseg(),
            "Add" => exec_add(),
            "AddI" => exec_addi(),
            "Bnez" => exec_bnez(),
            "Fail" => s::fail("fail instruction"),
            "Halt" => s::ff(),
            _ => unreachable!("unknown instruction {c}"),
        };
        p.add_internal(&exec_name(c), &fs, Sort::Bool, body);
    }
    p.add_internal("fdeStep", &[], Sort::Bool, fde_step());
    p.add_internal(
        "fdeCycle",
        &[],
        Sort::Unit,
        s::seq(s::call("fdeStep", vec![]), s::call("fdeCycle", vec![])),
    );

    p.add_foreign("read_mem", &[("c", word())], word(), false, rt_read_mem);
    p.add_foreign("write_mem", &[("c", word()), ("w", word())], Sort::Unit, false, rt_write_mem);
    p.add_foreign("decode", &[("z", Sort::Int)], instr_sort(), true, rt_decode);

    for (f, c) in contracts() {
        p.contracts.insert(sym(&f), c);
    }
    for l in lemmas() {
        p.lemmas.insert(l.name, l);
    }
    // Register access is resolved per register by unfolding the dispatch.
    p.inline.insert(sym("read_reg"));
    p.inline.insert(sym("write_reg"));
    p.number_nodes();
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::check_wellformed;
    use crate::machine::{run_fde_cycle, run_fde_step, Isa, Outcome};
    use crate::minimalcaps::{encode_mc, McInstr, McReg};

    fn machine(code: &[McInstr]) -> MachineState {
        let mut st = MachineState::new(Isa::MinimalCaps, 256);
        for (i, ins) in code.iter().enumerate() {
            st.store_word(i as i64, Word::Int(encode_mc(ins)).to_value()).unwrap();
        }
        st.set_reg_str("pc", Word::Cap(Capability::new(Permission::R, 0, 255, 0)).to_value());
        st
    }

    fn cap(p: Permission, b: i64, e: i64, a: i64) -> Value {
        Word::Cap(Capability::new(p, b, e, a)).to_value()
    }

    #[test]
    fn wellformed() {
        assert_eq!(check_wellformed(&program(&Mutations::none())), vec![]);
    }

    #[test]
    fn store_writes_at_cursor_plus_immediate() {
        let p = program(&Mutations::none());
        let mut st = machine(&[McInstr::Store(McReg::R1, McReg::R0, 5)]);
        st.set_reg_str("R0", cap(Permission::RW, 0, 100, 20));
        st.set_reg_str("R1", Word::Int(7).to_value());
        let (st, out) = run_fde_step(&p, &st);
        assert_eq!(out, Outcome::Value(Value::Bool(true)));
        assert_eq!(st.peek(25), Some(Word::Int(7).to_value()));
        assert_eq!(st.reg_str("pc"), Some(&cap(Permission::R, 0, 255, 1)));
    }

    #[test]
    fn store_through_read_only_capability_fails() {
        let p = program(&Mutations::none());
        let mut st = machine(&[McInstr::Store(McReg::R1, McReg::R0, 0)]);
        st.set_reg_str("R0", cap(Permission::R, 0, 100, 20));
        let (_, out) = run_fde_step(&p, &st);
        assert!(matches!(out, Outcome::Failure(m) if m.contains("write permission")));
    }

    #[test]
    fn jump_to_enter_capability_becomes_readable() {
        let p = program(&Mutations::none());
        let mut st = machine(&[McInstr::Jalr(McReg::R0, McReg::R1)]);
        st.set_reg_str("R1", cap(Permission::E, 10, 20, 12));
        let (st, _) = run_fde_step(&p, &st);
        assert_eq!(st.reg_str("pc"), Some(&cap(Permission::R, 10, 20, 12)));
        assert_eq!(st.reg_str("R0"), Some(&cap(Permission::R, 0, 255, 1)));
    }

    #[test]
    fn restrict_follows_subperm() {
        let p = program(&Mutations::none());
        let mut st = machine(&[McInstr::Restrict(McReg::R0, Permission::R)]);
        st.set_reg_str("R0", cap(Permission::RW, 0, 9, 0));
        let (after, _) = run_fde_step(&p, &st);
        assert_eq!(after.reg_str("R0"), Some(&cap(Permission::R, 0, 9, 0)));
        st.set_reg_str("R0", cap(Permission::R, 0, 9, 0));
        let mut st = st;
        st.store_word(0, Word::Int(encode_mc(&McInstr::Restrict(McReg::R0, Permission::RW))).to_value())
            .unwrap();
        assert!(matches!(run_fde_step(&p, &st).1, Outcome::Failure(_)));
    }

    #[test]
    fn fetch_needs_read_permission() {
        let p = program(&Mutations::none());
        let mut st = machine(&[McInstr::Halt]);
        st.set_reg_str("pc", cap(Permission::E, 0, 255, 0));
        assert!(matches!(run_fde_step(&p, &st).1, Outcome::Failure(m) if m.contains("read permission")));
        st.set_reg_str("pc", Word::Int(5).to_value());
        assert!(matches!(run_fde_step(&p, &st).1, Outcome::Failure(_)));
    }

    #[test]
    fn counting_loop() {
        // R0 := 3; loop: R0 := R0 - 1; bnez R0 loop; halt
        let p = program(&Mutations::none());
        let st = machine(&[
            McInstr::AddI(McReg::R0, McReg::R1, 3),
            McInstr::AddI(McReg::R0, McReg::R0, -1),
            McInstr::Bnez(McReg::R0, -1),
            McInstr::Halt,
        ]);
        let (st, out) = run_fde_cycle(&p, &st, 100);
        assert_eq!(out, Outcome::Value(Value::Unit));
        assert_eq!(st.reg_str("R0"), Some(&Word::Int(0).to_value()));
        assert_eq!(st.reg_str("pc"), Some(&cap(Permission::R, 0, 255, 3)));
    }
}

#[cfg(test)]
mod verify {
    use super::*;
    use crate::symexec::{verify_all, verify_contract, Status};

    #[test]
    fn every_contract_verifies() {
        let p = program(&Mutations::none());
        let bad: Vec<String> = verify_all(&p)
            .into_iter()
            .filter(|r| !matches!(r.status, Status::Verified))
            .map(|r| format!("{}: {:?}", r.function, r.status))
            .collect();
        assert!(bad.is_empty(), "{}", bad.join("\n"));
    }

    #[test]
    fn missing_write_check_leaves_a_residual() {
        let m = Mutations { no_write_allowed_assert: true, ..Mutations::none() };
        let r = verify_contract(&program(&m), "exec_store");
        assert!(matches!(r.status, Status::Residual(_)), "{:?}", r.status);
    }

    #[test]
    fn missing_move_cursor_fails_at_write_mem() {
        let m = Mutations { no_move_cursor: true, ..Mutations::none() };
        let r = verify_contract(&program(&m), "exec_store");
        match r.status {
            Status::Failed(msg) => assert!(msg.contains("precondition") && msg.contains("V("), "{msg}"),
            s => panic!("expected failure, got {s:?}"),
        }
    }
}
