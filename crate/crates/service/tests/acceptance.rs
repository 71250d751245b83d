//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p bart-service --test acceptance`.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use bart::classifier::{classify, parse_feed, Controller, ControllerConfig, Event, FeedItem, Status};
use bart::compiler::{aggregate, compile_source, expand_gate, load, save, CompileOptions, DEFAULT_MAX_CLUSTER_STATES};
use bart::engine::{fast_path_messages, tensor_messages, Schedule, SessionOptions};
use bart::gate::GateKind;
use bart::influence::{evaluate_policy, solve, InfluenceDiagram, Policy, PolicyResult, SolveOptions};
use bart::model::{joint_marginals, joint_mpe, BeliefNetwork, Evidence, Finding, Quantification};
use bart::netlang::{parse, parse_bytes, serialize};
use bart::random::{self, NetworkShape};
use bart::taxonomy::{ClassEvidence, Taxonomy};
use bart::{BeliefTable, CompiledModel, Error, Session, Variable};
use bart_service::server::{router, AppState};
use http_body_util::BodyExt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tower::ServiceExt;

type Outcome = Result<String, String>;

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(format!("{}/../core/fixtures/{name}", env!("CARGO_MANIFEST_DIR")))
}

fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

const FIXTURES: &[&str] = &["chain2.bart", "diamond.bart", "gates.bart", "library.bart", "one_shot.bart", "ships.bart"];

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn session_for(net: &BeliefNetwork, options: SessionOptions) -> Session {
    Session::new(Arc::new(aggregate(net, DEFAULT_MAX_CLUSTER_STATES).unwrap()), options)
}

fn apply(s: &mut Session, ev: &Evidence) -> Result<(), Error> {
    for (n, f) in ev.iter() {
        s.assert_evidence(n, f.clone())?;
    }
    Ok(())
}

/// Product of table entries and likelihood weights for a full assignment.
/// Random networks carry only priors and tables.
fn score(net: &BeliefNetwork, ev: &Evidence, assignment: &std::collections::BTreeMap<String, String>) -> f64 {
    let states: Vec<usize> =
        net.nodes.iter().map(|n| n.variable.value_index(&assignment[n.name()]).unwrap()).collect();
    let mut p = 1.0;
    for (i, node) in net.nodes.iter().enumerate() {
        p *= match &node.quantification {
            Quantification::Prior(d) => d[states[i]],
            Quantification::Cpt(cpt) => {
                let ps: Vec<usize> = node.parents.iter().map(|&q| states[q]).collect();
                cpt.get(&ps, states[i])
            }
            Quantification::Gate(_) => unreachable!("random networks use tables"),
        };
    }
    for (name, f) in ev.iter() {
        let i = net.index_of(name).unwrap();
        p *= match f {
            Finding::Instantiated(v) => f64::from(net.nodes[i].variable.values[states[i]] == *v),
            Finding::Virtual(l) => l.weights()[states[i]],
        };
    }
    p
}

#[derive(Default)]
struct Tally {
    cases: usize,
    inconsistent: usize,
    worst: f64,
    mpe_checked: usize,
}

/// Engine vs joint enumeration for beliefs, and MPE tie-set membership.
fn oracle_case(net: &BeliefNetwork, ev: &Evidence, tally: &mut Tally) -> Result<(), String> {
    let mut s = session_for(net, SessionOptions::default());
    tally.cases += 1;
    match (apply(&mut s, ev), joint_marginals(net, ev)) {
        (Ok(()), Ok(oracle)) => {
            let diff = s.beliefs().max_abs_diff(&oracle);
            tally.worst = tally.worst.max(diff);
            ensure(diff <= 1e-9, || format!("belief error {diff:e}"))?;
            let mine = s.mpe().map_err(|e| e.to_string())?;
            let best = joint_mpe(net, ev).map_err(|e| e.to_string())?;
            let (a, b) = (score(net, ev, &mine.assignment), score(net, ev, &best.assignment));
            ensure(a == b, || format!("mpe score {a:e} vs best {b:e}"))?;
            tally.mpe_checked += 1;
            Ok(())
        }
        (Err(Error::InconsistentEvidence), Err(Error::InconsistentEvidence)) => {
            tally.inconsistent += 1;
            Ok(())
        }
        (a, b) => Err(format!("engine {a:?} vs oracle {:?}", b.map(|_| ()))),
    }
}

fn polytree_suite(tally: &mut Tally) -> Result<Duration, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let shape = NetworkShape { max_nodes: 12, max_values: 4, ..NetworkShape::default() };
    for i in 0..200 {
        let net = random::polytree(&mut rng, &shape);
        let ev = random::evidence(&mut rng, &net, 4);
        oracle_case(&net, &ev, tally).map_err(|e| format!("polytree {i}: {e}"))?;
    }
    Ok(start.elapsed())
}

fn loopy_suite(tally: &mut Tally) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let shape = NetworkShape { max_nodes: 10, max_values: 3, max_joint_states: 1 << 14, ..NetworkShape::default() };
    for i in 0..100 {
        let net = random::multiply_connected(&mut rng, &shape);
        let compiled = aggregate(&net, DEFAULT_MAX_CLUSTER_STATES).map_err(|e| format!("network {i}: {e}"))?;
        ensure(compiled.is_forest(), || format!("network {i}: compiled skeleton is not a forest"))?;
        ensure(compiled.compound_count() > 0, || format!("network {i}: loop left unaggregated"))?;
        let ev = random::evidence(&mut rng, &net, 3);
        oracle_case(&net, &ev, tally).map_err(|e| format!("loopy {i}: {e}"))?;
    }
    Ok(())
}

fn c1() -> Outcome {
    let mut t = Tally::default();
    let took = polytree_suite(&mut t)?;
    ensure(took <= Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("200 polytrees, {} inconsistent, max error {:.1e}, {:.2?}", t.inconsistent, t.worst, took))
}

fn c2() -> Outcome {
    let mut t = Tally::default();
    loopy_suite(&mut t)?;
    Ok(format!("100 loopy networks, all forests, {} inconsistent, max error {:.1e}", t.inconsistent, t.worst))
}

fn c3() -> Outcome {
    let mut t = Tally::default();
    polytree_suite(&mut t)?;
    loopy_suite(&mut t)?;
    ensure(t.mpe_checked + t.inconsistent == t.cases, || "cases skipped".into())?;
    Ok(format!("{} of {} consistent cases in the optimal tie set", t.mpe_checked, t.mpe_checked))
}

fn c4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let kinds = [GateKind::NoisyOr, GateKind::NoisyAnd, GateKind::NoisyMax, GateKind::NoisyMin];
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let kind = kinds[i % 4];
        let n = rng.gen_range(1..=8);
        let (gate, parents, child) = random::gate(&mut rng, kind, n);
        let refs: Vec<&Variable> = parents.iter().collect();
        let cpt = expand_gate(&gate, &refs, &child).map_err(|e| e.to_string())?;
        let pis: Vec<Vec<f64>> = parents.iter().map(|p| random::distribution(&mut rng, p.cardinality(), 0.1)).collect();
        let lambda: Vec<f64> = (0..child.cardinality()).map(|_| rng.gen_range(0.0..2.0)).collect();
        let fast = fast_path_messages(&gate, &pis, &lambda).ok_or_else(|| format!("gate {i}: no closed form"))?;
        let slow = tensor_messages(&cpt, &pis, &lambda);
        for (a, b) in fast.pi.iter().zip(&slow.pi) {
            worst = worst.max((a - b).abs());
        }
        for (fa, sa) in fast.lambda_to_parents.iter().zip(&slow.lambda_to_parents) {
            for (a, b) in fa.iter().zip(sa) {
                worst = worst.max((a - b).abs());
            }
        }
        ensure(worst <= 1e-9, || format!("gate {i} ({kind:?}, {n} parents): error {worst:e}"))?;
    }

    let model = compile_source(&fixture("gates.bart"), &CompileOptions::default()).map_err(|e| e.to_string())?;
    let net = &model.network("gates").unwrap().original;
    let cases = [
        Evidence::new(),
        Evidence::new().with("Working", Finding::value("absent")),
        Evidence::new().with("Sneeze", Finding::value("present")).with("Rest", Finding::likelihood(vec![0.3, 0.9]).unwrap()),
        Evidence::new().with("Fatigue", Finding::value("heavy")).with("Cold", Finding::value("absent")),
    ];
    let mut chain_worst: f64 = 0.0;
    for ev in &cases {
        let oracle = joint_marginals(net, ev).map_err(|e| e.to_string())?;
        for fast_path in [true, false] {
            let mut s = Session::open_with(&model, "gates", SessionOptions { fast_path, ..SessionOptions::default() }).unwrap();
            apply(&mut s, ev).map_err(|e| e.to_string())?;
            chain_worst = chain_worst.max(s.beliefs().max_abs_diff(&oracle));
        }
    }
    ensure(chain_worst <= 1e-9, || format!("gate chain error {chain_worst:e}"))?;
    Ok(format!("100 gates max error {worst:.1e}; gate chain max error {chain_worst:.1e}"))
}

/// Maximum expected utility by enumeration over the information stages.
fn enumerate_meu(d: &InfluenceDiagram) -> f64 {
    let card: HashMap<&str, usize> = d
        .chance
        .iter()
        .map(|c| (c.variable.name.as_str(), c.variable.cardinality()))
        .chain(d.decisions.iter().map(|x| (x.name.as_str(), x.alternatives.len())))
        .collect();
    let mut seen: Vec<String> = Vec::new();
    let mut stages: Vec<(Vec<String>, Option<String>)> = Vec::new();
    for dec in &d.decisions {
        for o in &dec.informed_by {
            if !seen.contains(o) {
                seen.push(o.clone());
            }
        }
        let observed: Vec<String> = seen
            .iter()
            .filter(|o| d.chance.iter().any(|c| &c.variable.name == *o))
            .filter(|o| !stages.iter().any(|(s, _)| s.contains(o)))
            .cloned()
            .collect();
        stages.push((observed, Some(dec.name.clone())));
    }
    let rest: Vec<String> = d
        .chance
        .iter()
        .map(|c| c.variable.name.clone())
        .filter(|n| !stages.iter().any(|(s, _)| s.contains(n)))
        .collect();
    stages.push((rest, None));

    let leaf = |a: &HashMap<String, usize>| -> f64 {
        let mut p = 1.0;
        for c in &d.chance {
            let x = a[&c.variable.name];
            p *= match &c.quantification {
                Quantification::Prior(dist) => dist[x],
                Quantification::Cpt(cpt) => {
                    let states: Vec<usize> = c.parents.iter().map(|q| a[q]).collect();
                    cpt.get(&states, x)
                }
                Quantification::Gate(_) => unreachable!("random diagrams use tables"),
            };
        }
        let mut idx = 0;
        for q in &d.value.parents {
            idx = idx * card[q.as_str()] + a[q];
        }
        p * d.value.table[idx]
    };

    fn sum_over(
        vars: &[String],
        card: &HashMap<&str, usize>,
        a: &mut HashMap<String, usize>,
        f: &mut dyn FnMut(&mut HashMap<String, usize>) -> f64,
    ) -> f64 {
        let Some((v, tail)) = vars.split_first() else {
            return f(a);
        };
        let mut total = 0.0;
        for x in 0..card[v.as_str()] {
            a.insert(v.clone(), x);
            total += sum_over(tail, card, a, f);
        }
        total
    }

    fn stage(
        k: usize,
        stages: &[(Vec<String>, Option<String>)],
        card: &HashMap<&str, usize>,
        a: &mut HashMap<String, usize>,
        leaf: &dyn Fn(&HashMap<String, usize>) -> f64,
    ) -> f64 {
        let (vars, decision) = &stages[k];
        sum_over(vars, card, a, &mut |a| match decision {
            None => leaf(a),
            Some(dn) => (0..card[dn.as_str()])
                .map(|alt| {
                    a.insert(dn.clone(), alt);
                    stage(k + 1, stages, card, a, leaf)
                })
                .fold(f64::NEG_INFINITY, f64::max),
        })
    }

    stage(0, &stages, &card, &mut HashMap::new(), &leaf)
}

fn c5() -> Outcome {
    let actions = |r: &PolicyResult| -> Vec<(String, String)> {
        r.policy.iter().map(|e| (e.decision.clone(), e.action.clone())).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut pruned = 0;
    for i in 0..100 {
        let d = random::diagram(&mut rng);
        let on = solve(&d, &Evidence::new(), &SolveOptions::default()).map_err(|e| format!("diagram {i}: {e}"))?;
        let off = solve(&d, &Evidence::new(), &SolveOptions { prune: false, ..SolveOptions::default() })
            .map_err(|e| format!("diagram {i}: {e}"))?;
        ensure(actions(&on) == actions(&off), || format!("diagram {i}: pruning changed the policy"))?;
        ensure((on.expected_utility - off.expected_utility).abs() <= 1e-9, || format!("diagram {i}: EU differs"))?;
        let oracle = enumerate_meu(&d);
        ensure((off.expected_utility - oracle).abs() <= 1e-9, || {
            format!("diagram {i}: EU {} vs oracle {oracle}", off.expected_utility)
        })?;
        if !off.degenerate {
            let replay = evaluate_policy(&d, &Policy::Table(off.policy.clone()), &Evidence::new()).map_err(|e| e.to_string())?;
            ensure((replay - oracle).abs() <= 1e-9, || format!("diagram {i}: policy replay {replay}"))?;
        }
        pruned += on.stats.paths_pruned;
    }
    let model = compile_source(&fixture("one_shot.bart"), &CompileOptions::default()).map_err(|e| e.to_string())?;
    let r = solve(model.diagram("one_shot").unwrap(), &Evidence::new(), &SolveOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.action("D") == Some("d1"), || format!("one_shot chose {:?}", r.action("D")))?;
    ensure((r.expected_utility - 6.0).abs() <= 1e-9, || format!("one_shot EU {}", r.expected_utility))?;
    Ok(format!("100 diagrams agree with enumeration ({pruned} paths pruned); one_shot d1, EU {}", r.expected_utility))
}

fn random_class_evidence(rng: &mut ChaCha8Rng, t: &Taxonomy) -> Vec<ClassEvidence> {
    let names: Vec<&String> = t.classes.keys().collect();
    (0..rng.gen_range(1..8))
        .map(|_| {
            let c = names[rng.gen_range(0..names.len())];
            ClassEvidence::new(c.as_str(), rng.gen_range(0.05..5.0), rng.gen_range(0.05..5.0)).unwrap()
        })
        .collect()
}

fn c6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut divergence: f64 = 0.0;
    for _ in 0..50 {
        let base = random::taxonomy(&mut rng);
        let ev = random_class_evidence(&mut rng, &base);
        let mut shuffled = ev.clone();
        shuffled.shuffle(&mut rng);
        let (mut a, mut b) = (base.clone(), base);
        for e in &ev {
            a.apply_class_evidence(e).map_err(|e| e.to_string())?;
        }
        for e in &shuffled {
            b.apply_class_evidence(e).map_err(|e| e.to_string())?;
        }
        for (x, y) in a.weights().iter().zip(b.weights()) {
            divergence = divergence.max((x - y).abs());
        }
    }
    ensure(divergence <= 1e-12, || format!("order divergence {divergence:e}"))?;

    for k in 0..50 {
        let mut t = random::taxonomy(&mut rng);
        let ev = random_class_evidence(&mut rng, &t);
        for e in std::iter::once(None).chain(ev.iter().map(Some)) {
            if let Some(e) = e {
                t.apply_class_evidence(e).map_err(|e| e.to_string())?;
            }
            let beliefs = t.class_beliefs();
            for (a, ca) in &t.classes {
                for (b, cb) in &t.classes {
                    if ca.members.iter().all(|m| cb.members.contains(m)) {
                        ensure(beliefs[a] <= beliefs[b] + 1e-15, || format!("taxonomy {k}: {a} within {b} but larger"))?;
                    }
                    if ca.members.iter().all(|m| !cb.members.contains(m)) {
                        let union: f64 = ca.members.iter().chain(&cb.members).map(|&i| t.weights()[i]).sum();
                        ensure((union - beliefs[a] - beliefs[b]).abs() <= 1e-12, || format!("taxonomy {k}: {a}+{b} not additive"))?;
                    }
                }
            }
        }
    }

    let mut t = Taxonomy::new("four", &["s1", "s2", "s3", "s4"], None).unwrap();
    t.add_class("A", &["s1", "s2"], None).unwrap();
    t.apply_class_evidence(&ClassEvidence::new("A", 3.0, 1.0).unwrap()).map_err(|e| e.to_string())?;
    let bel = t.class_belief("A").map_err(|e| e.to_string())?;
    ensure(bel == 0.75, || format!("BEL(A) = {bel}"))?;
    Ok(format!("order divergence {divergence:.1e}; additivity and monotonicity on 50; BEL(A) = {bel}"))
}

fn c7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let net = random::polytree(&mut rng, &NetworkShape::default());
        let ev = random::evidence(&mut rng, &net, 4);
        let tables: Vec<Option<BeliefTable>> = [Schedule::Fifo, Schedule::Lifo, Schedule::Random(i), Schedule::Concurrent]
            .into_iter()
            .map(|schedule| {
                let mut s = session_for(&net, SessionOptions { schedule, fast_path: true });
                apply(&mut s, &ev).ok().map(|_| s.beliefs())
            })
            .collect();
        for t in &tables[1..] {
            match (&tables[0], t) {
                (Some(a), Some(b)) => worst = worst.max(a.max_abs_diff(b)),
                (None, None) => {}
                _ => return Err(format!("polytree {i}: schedules disagree on consistency")),
            }
        }
        ensure(worst <= 1e-12, || format!("polytree {i}: divergence {worst:e}"))?;
    }
    Ok(format!("20 polytrees x 4 schedules, max divergence {worst:.1e}"))
}

const FLEET: &[(&str, &[&str])] = &[
    ("Warship", &["s1", "s2", "s3"]),
    ("Merchant", &["s4", "s5", "s6"]),
    ("Combatant", &["s1", "s2"]),
    ("Frigate", &["s1"]),
    ("Destroyer", &["s2"]),
    ("Auxiliary", &["s3"]),
    ("Tanker", &["s4"]),
    ("Freighter", &["s5", "s6"]),
];

fn fleet() -> CompiledModel {
    let mut src = String::new();
    for (class, _) in FLEET {
        src.push_str(&format!(
            "network g_{class} {{
               node cue {{ values: [no, yes]; prior: [0.5, 0.5]; }}
               node report {{ values: [no, yes]; parents: [cue]; cpt: {{0.8, 0.2; 0.15, 0.85}}; }}
             }}\n"
        ));
    }
    src.push_str("taxonomy fleet {\n  singletons: [s1, s2, s3, s4, s5, s6];\n");
    for (class, members) in FLEET {
        src.push_str(&format!("  class {class} = [{}] via g_{class} : report = yes;\n", members.join(", ")));
    }
    src.push_str("}\n");
    compile_source(&src, &CompileOptions::default()).unwrap()
}

fn closure_holds(c: &Controller) -> Result<(), String> {
    let t = c.taxonomy();
    for (class, status) in c.status() {
        if *status != Status::Rejected {
            continue;
        }
        let members = &t.classes[class].members;
        for (other, oc) in &t.classes {
            let inside = oc.members.len() < members.len() && oc.members.iter().all(|m| members.contains(m));
            ensure(!inside || c.status()[other] == Status::Rejected, || format!("{other} survives rejected {class}"))?;
        }
    }
    Ok(())
}

fn c8() -> Outcome {
    let ships = compile_source(&fixture("ships.bart"), &CompileOptions::default()).map_err(|e| e.to_string())?;
    let feed = parse_feed(&fixture("ships_feed.jsonl")).map_err(|e| e.to_string())?;
    let report = classify(&ships, "ships", feed, ControllerConfig::default()).map_err(|e| e.to_string())?;
    let trace = serde_json::to_string_pretty(&report.trace).unwrap() + "\n";
    ensure(trace == fixture("ships_trace.json"), || "SHIPS trace differs from the golden file".into())?;

    let model = fleet();
    let mut rng = ChaCha8Rng::seed_from_u64(1008);
    let mut rejections = 0;
    for i in 0..100 {
        let feed: Vec<FeedItem> = (0..rng.gen_range(0..12))
            .map(|_| {
                let (class, _) = FLEET[rng.gen_range(0..FLEET.len())];
                FeedItem {
                    network: format!("g_{class}"),
                    node: if rng.gen_bool(0.5) { "cue" } else { "report" }.into(),
                    value: None,
                    likelihood: Some(vec![rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0)]),
                }
            })
            .collect();
        let config = ControllerConfig {
            tau_establish: rng.gen_range(0.55..0.95),
            tau_reject: rng.gen_range(0.05..0.3),
            ..ControllerConfig::default()
        };
        let mut c = Controller::new(&model, "fleet", config).map_err(|e| e.to_string())?;
        let cut = feed.len() / 2;
        for batch in [&feed[..cut], &feed[cut..]] {
            c.push_feed(batch.iter().cloned());
            while c.has_work() {
                c.step().map_err(|e| format!("feed {i}: {e}"))?;
                closure_holds(&c).map_err(|e| format!("feed {i}: {e}"))?;
            }
        }
        rejections += c.trace().iter().filter(|e| matches!(e, Event::Rejected { .. })).count();
    }
    ensure(rejections > 0, || "no feed triggered a rejection".into())?;
    Ok(format!("SHIPS trace byte-identical ({} events); closure held over 100 feeds, {rejections} rejections", report.trace.len()))
}

fn evidence_spec(ev: &Evidence) -> String {
    ev.iter()
        .map(|(n, f)| match f {
            Finding::Instantiated(v) => format!("{n}={v}"),
            Finding::Virtual(l) => format!("{n}~{}", l.weights().iter().map(|w| w.to_string()).collect::<Vec<_>>().join("/")),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn evidence_bodies(ev: &Evidence) -> Vec<Value> {
    ev.iter()
        .map(|(n, f)| match f {
            Finding::Instantiated(v) => serde_json::json!({ "node": n, "value": v }),
            Finding::Virtual(l) => serde_json::json!({ "node": n, "likelihood": l.weights() }),
        })
        .collect()
}

async fn http(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (u16, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn max_diff(a: &Value, b: &Value) -> Option<f64> {
    let (a, b) = (a.as_object()?, b.as_object()?);
    if a.len() != b.len() {
        return None;
    }
    let mut worst: f64 = 0.0;
    for (k, va) in a {
        let (xa, xb) = (va.as_array()?, b.get(k)?.as_array()?);
        if xa.len() != xb.len() {
            return None;
        }
        for (x, y) in xa.iter().zip(xb) {
            worst = worst.max((x.as_f64()? - y.as_f64()?).abs());
        }
    }
    Some(worst)
}

fn c9() -> Outcome {
    for name in FIXTURES {
        let m = parse(&fixture(name)).map_err(|e| format!("{name}: {e}"))?;
        let text = serialize(&m);
        let again = parse(&text).map_err(|e| format!("{name} reparse: {e}"))?;
        ensure(again == m && serialize(&again) == text, || format!("{name}: not a fixpoint"))?;
        let compiled = compile_source(&fixture(name), &CompileOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let loaded = load(&save(&compiled)).map_err(|e| format!("{name}: {e}"))?;
        ensure(loaded == compiled, || format!("{name}: .bartc round trip differs"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    let seeds: Vec<Vec<u8>> = FIXTURES.iter().map(|f| fixture(f).into_bytes()).collect();
    let mut crashes = 0;
    for i in 0..10_000 {
        let input: Vec<u8> = if i % 2 == 0 {
            (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect()
        } else {
            let mut s = seeds[rng.gen_range(0..seeds.len())].clone();
            for _ in 0..rng.gen_range(1..6) {
                if s.is_empty() {
                    break;
                }
                let at = rng.gen_range(0..s.len());
                match rng.gen_range(0..3) {
                    0 => s[at] = rng.gen(),
                    1 => {
                        s.remove(at);
                    }
                    _ => s.truncate(at),
                }
            }
            s
        };
        if catch_unwind(|| {
            let _ = parse_bytes(&input);
        })
        .is_err()
        {
            crashes += 1;
        }
    }
    ensure(crashes == 0, || format!("{crashes} parser crashes"))?;

    // CLI query vs HTTP on one combined model
    let names = ["chain2.bart", "diamond.bart", "gates.bart", "library.bart", "ships.bart"];
    let src = names.map(fixture).join("\n");
    let model = compile_source(&src, &CompileOptions::default()).map_err(|e| e.to_string())?;
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let bartc = dir.join("fixtures.bartc");
    std::fs::write(&bartc, save(&model)).map_err(|e| e.to_string())?;
    let app = router(Arc::new(AppState::new(model.clone())));
    let runtime = tokio::runtime::Builder::new_current_thread().build().map_err(|e| e.to_string())?;

    let networks: Vec<String> = model.networks.iter().map(|n| n.name.clone()).collect();
    let mut worst: f64 = 0.0;
    let mut refused = 0;
    for q in 0..20 {
        let name = &networks[q % networks.len()];
        let net = &model.network(name).unwrap().original;
        let ev = random::evidence(&mut rng, net, 3);
        let spec = evidence_spec(&ev);
        let out = Command::new(env!("CARGO_BIN_EXE_bart"))
            .args(["query", bartc.to_str().unwrap(), "--network", name, "--evidence", &spec])
            .output()
            .map_err(|e| e.to_string())?;
        let (status, http_beliefs) = runtime.block_on(async {
            let (_, h) = http(&app, "POST", "/sessions", Some(serde_json::json!({"model-kind": "network", "name": name}))).await;
            let id = h["id"].as_str().unwrap().to_string();
            for b in evidence_bodies(&ev) {
                let (s, v) = http(&app, "POST", &format!("/sessions/{id}/evidence"), Some(b)).await;
                if s != 200 {
                    return (s, v);
                }
            }
            let (s, v) = http(&app, "GET", &format!("/sessions/{id}/beliefs"), None).await;
            (s, v["beliefs"].clone())
        });
        match (out.status.code(), status) {
            (Some(0), 200) => {
                let cli: Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
                let d = max_diff(&cli, &http_beliefs).ok_or_else(|| format!("query {q}: shapes differ"))?;
                worst = worst.max(d);
                ensure(d <= 1e-12, || format!("query {q} on {name}: differs by {d:e}"))?;
            }
            (Some(3), 409) => refused += 1,
            (c, s) => return Err(format!("query {q} on {name} [{spec}]: CLI exit {c:?}, HTTP {s}")),
        }
    }
    Ok(format!(
        "{} fixtures round-trip; 10000 fuzz inputs, 0 crashes; 20 CLI/HTTP queries ({refused} inconsistent on both), max difference {worst:.1e}",
        FIXTURES.len()
    ))
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("propagation vs oracle on polytrees", c1),
        ("aggregated loopy networks vs oracle", c2),
        ("MPE in the optimal tie set", c3),
        ("gate fast path vs tensor", c4),
        ("influence diagrams", c5),
        ("taxonomy", c6),
        ("schedule independence", c7),
        ("classifier traces", c8),
        ("tooling", c9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
