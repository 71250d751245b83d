use bart::netlang::{expand_templates, parse, parse_bytes, serialize};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURES: &[&str] = &["chain2.bart", "diamond.bart", "gates.bart", "library.bart", "one_shot.bart", "ships.bart"];

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn fixtures_round_trip() {
    for name in FIXTURES {
        let m = parse(&fixture(name)).unwrap();
        let text = serialize(&m);
        let again = parse(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
        assert_eq!(again, m, "{name}");
        assert_eq!(serialize(&again), text, "{name}");
    }
}

#[test]
fn serializer_is_canonical() {
    // declaration order and whitespace do not survive
    let a = parse("network b { node X { values: [u, v]; prior: [0.25, 0.75]; } } network a { node Y { values: [p, q]; prior: [0.5, 0.5]; } }").unwrap();
    let b = parse("network a {\n node Y { values: [p, q]; prior: [.5, 5e-1]; }\n}\n# x\nnetwork b { node X { values: [u, v]; prior: [0.250, 0.75]; } };").unwrap();
    assert_eq!(serialize(&a), serialize(&b));
}

#[test]
fn template_expansion() {
    let m = parse(&fixture("library.bart")).unwrap();
    let x = expand_templates(&m).unwrap();
    let names: Vec<&str> = x.networks["plant"].nodes.iter().map(|n| n.name.as_str()).collect();
    assert_eq!(names, ["Fault", "north.reading", "north.alarm", "south.reading", "south.alarm"]);
    assert_eq!(x.networks["plant"].nodes[2].parents, ["north.reading"]);
    assert_eq!(x.networks["plant"].nodes[1].parents, ["Fault"]);
    assert_eq!(expand_templates(&x).unwrap(), x);
}

#[test]
fn nested_templates_prefix_twice() {
    let src = "template leaf(p) { node X { values: [a, b]; parents: [p]; cpt: {0.5, 0.5; 0.1, 0.9}; } }
        template pair(p) { use leaf(p) as l; use leaf(p) as r; }
        network n { node R { values: [a, b]; prior: [0.5, 0.5]; } }
        use pair(R) as top in n;";
    let x = expand_templates(&parse(src).unwrap()).unwrap();
    let names: Vec<&str> = x.networks["n"].nodes.iter().map(|n| n.name.as_str()).collect();
    assert_eq!(names, ["R", "top.l.X", "top.r.X"]);
}

#[test]
fn template_errors() {
    let cyc = parse("template t(a) { use t(a) as again; } network n { node A { values: [x, y]; prior: [1, 0]; } } use t(A) as p in n;")
        .unwrap();
    assert_eq!(expand_templates(&cyc).unwrap_err().kind(), "template-cycle");
    let arity = parse(
        "template t(a, b, c) { node X { values: [x, y]; parents: [a]; cpt: {1, 0; 0, 1}; } }
         network n { node A { values: [x, y]; prior: [1, 0]; } node B { values: [x, y]; prior: [1, 0]; } }
         use t(A, B) as p in n;",
    )
    .unwrap();
    assert_eq!(expand_templates(&arity).unwrap_err().kind(), "arity-mismatch");
}

#[test]
fn diagnostics_carry_positions() {
    let err = parse("network n {\n  node A { values: [t, f] prior: [0.5, 0.5]; }\n}").unwrap_err();
    assert_eq!(err.kind(), "syntax-error");
    let span = err.span().unwrap();
    assert_eq!(span.line, 2);
    let err = parse("network n { node B { values: [t, f]; parents: [Q]; cpt: {1, 0; 0, 1}; } }").unwrap_err();
    assert_eq!(err.kind(), "unresolved-reference");
    assert!(err.to_string().contains('Q'));
    let err = parse("network n { node A { values: [t]; prior: [1]; } }").unwrap_err();
    assert_eq!(err.kind(), "semantic-error");
    let err = parse("network n { node A { values: [t, f]; prior: [1, 0]; } node A { values: [t, f]; prior: [1, 0]; } }").unwrap_err();
    assert_eq!(err.kind(), "duplicate-name");
}

fn check_no_panic(bytes: &[u8]) {
    if let Err(e) = parse_bytes(bytes) {
        if let Some(s) = e.span() {
            assert!(s.start <= s.end && s.end <= bytes.len(), "span {s:?} outside {} bytes", bytes.len());
        }
    }
}

const TOKENS: &[&str] = &[
    "network", "node", "values", "parents", "prior", "cpt", "model", "noisy_or", "noisy_max", "bool", "taxonomy",
    "class", "via", "singletons", "diagram", "decision", "value", "table", "alternatives", "informed_by",
    "template", "use", "as", "in", "{", "}", "[", "]", "(", ")", ";", ",", ":", "=", "&", "|", "!", "0.5", "1",
    "-2e3", ".5", "A", "B", "x.y", "#c\n", " ", "\n", "\"", "\u{e9}",
];

#[test]
fn fuzz_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let seeds: Vec<Vec<u8>> = FIXTURES.iter().map(|f| fixture(f).into_bytes()).collect();
    for i in 0..10_000 {
        let input: Vec<u8> = match i % 3 {
            0 => (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect(),
            1 => (0..rng.gen_range(0..60))
                .flat_map(|_| TOKENS[rng.gen_range(0..TOKENS.len())].bytes().chain(*b" "))
                .collect(),
            _ => {
                let mut s = seeds[rng.gen_range(0..seeds.len())].clone();
                for _ in 0..rng.gen_range(1..6) {
                    let at = rng.gen_range(0..s.len());
                    match rng.gen_range(0..3) {
                        0 => s[at] = rng.gen(),
                        1 => {
                            s.remove(at);
                        }
                        _ => s.truncate(at),
                    }
                    if s.is_empty() {
                        break;
                    }
                }
                s
            }
        };
        check_no_panic(&input);
    }
}

proptest! {
    #[test]
    fn numbers_round_trip(x in -1e6f64..1e6) {
        let src = format!("network n {{ node A {{ values: [p, q]; prior: [{}, 0.5]; }} }}", bart::netlang::format_number(x));
        // negative priors fail at compile time, not here
        let m = parse(&src).unwrap();
        let again = parse(&serialize(&m)).unwrap();
        prop_assert_eq!(again, m);
    }
}
