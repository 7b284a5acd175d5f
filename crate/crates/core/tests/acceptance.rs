//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS/FAIL line before asserting.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seq2act::action::{build_graph, Action, PartialGraphState, Pending, Role};
use seq2act::controller::{ConstraintLevel, Controller};
use seq2act::decode::{decode_ids, parse_tokens, DecodeError, DecodeOptions};
use seq2act::eval::evaluate;
use seq2act::graph::{graphs_isomorphic, NodeKind, SemanticGraph};
use seq2act::lf::{
    actions_to_lf, graph_to_lf, lf_to_actions, lf_to_graph, parse_lf, print_lf, Formula,
    LogicalForm, Term,
};
use seq2act::model::{ModelConfig, Seq2Act};
use seq2act::schema::{load_schema, KbSchema, CONST_RELATION};
use seq2act::synth::{random_lf, random_walk, walk_universe};
use seq2act::train::{
    from_bytes, preprocess, read_corpus, to_bytes, tokenize_utterance, train, train_with,
    EntityMatcher, RawExample, TrainConfig, TrainSchedule,
};
use seq2act::vocab::{ActionVocab, WordVocab};

const GRADIENT_TOLERANCE: f64 = 1e-5;
const GRADIENT_EPSILON: f64 = 1e-5;
const GRADIENT_FLOOR: f64 = 1e-4;
const NORMALIZATION_TOLERANCE: f64 = 1e-12;
const TOY_ACCURACY: f64 = 0.95;

/// Writes to the stderr handle directly so the line survives test output
/// capture.
fn report(n: usize, name: &str, pass: bool, detail: impl std::fmt::Display) {
    use std::io::Write;
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr().lock(),
        "criterion {n:>2} {name}: {verdict} ({detail})"
    );
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/geo_toy")
}

fn toy_schema() -> KbSchema {
    load_schema(&std::fs::read_to_string(data_dir().join("schema.txt")).unwrap()).unwrap()
}

fn corpus(name: &str) -> Vec<RawExample> {
    read_corpus(&std::fs::read_to_string(data_dir().join(name)).unwrap()).unwrap()
}

/// Bundled corpus forms plus 1,000 random forms of depth at most 4.
fn round_trip_set(schema: &KbSchema) -> Vec<LogicalForm> {
    let mut out: Vec<LogicalForm> = corpus("train.tsv")
        .into_iter()
        .chain(corpus("test.tsv"))
        .map(|r| parse_lf(&r.logical_form, schema).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    out.extend((0..1000).map(|_| random_lf(schema, 4, &mut rng)));
    out
}

#[test]
fn criterion_01_round_trip() {
    let schema = toy_schema();
    let t = Instant::now();
    let set = round_trip_set(&schema);
    let ok = set
        .iter()
        .filter(|l| {
            lf_to_actions(l, &schema)
                .and_then(|a| actions_to_lf(&a, &schema))
                .is_ok_and(|back| print_lf(&back) == print_lf(l))
        })
        .count();
    let elapsed = t.elapsed();
    let pass = ok == set.len() && set.len() >= 1200 && elapsed < Duration::from_secs(10);
    report(
        1,
        "round-trip conversion",
        pass,
        format!("{ok}/{} in {elapsed:.2?}", set.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_02_graph_consistency() {
    let schema = toy_schema();
    let set = round_trip_set(&schema);
    let ok = set
        .iter()
        .filter(|l| {
            let via_actions = build_graph(&lf_to_actions(l, &schema).unwrap(), &schema).unwrap();
            graphs_isomorphic(&via_actions, &lf_to_graph(l, &schema).unwrap())
        })
        .count();
    let pass = ok == set.len();
    report(
        2,
        "graph consistency",
        pass,
        format!("{ok}/{} isomorphic", set.len()),
    );
    assert!(pass);
}

/// Typing problems read off the logical form of a finished graph: every
/// variable gets at most one type and entity arguments match signatures.
fn type_violations(lf: &LogicalForm, schema: &KbSchema) -> Vec<String> {
    fn walk(
        f: &Formula,
        schema: &KbSchema,
        types: &mut BTreeMap<String, BTreeSet<String>>,
        bad: &mut Vec<String>,
    ) {
        let mut demand = |t: &Term, ty: &str, bad: &mut Vec<String>| match t {
            Term::Var(v) => {
                types.entry(v.clone()).or_default().insert(ty.to_string());
            }
            Term::Entity { ty: et, name } => {
                if et != ty {
                    bad.push(format!("{name} is {et}, used as {ty}"));
                }
            }
        };
        match f {
            Formula::Conj(items) => items.iter().for_each(|i| walk(i, schema, types, bad)),
            Formula::TypePred { ty, arg } => demand(arg, ty, bad),
            Formula::Relation { rel, arg1, arg2 } => {
                let (t1, t2) = &schema.relations[rel];
                demand(arg1, t1, bad);
                demand(arg2, t2, bad);
            }
            Formula::Const { var, ty, .. } => demand(&Term::Var(var.clone()), ty, bad),
            Formula::Operator { body, .. } => walk(body, schema, types, bad),
        }
    }
    let mut types = BTreeMap::new();
    let mut bad = Vec::new();
    walk(&lf.body, schema, &mut types, &mut bad);
    for (v, ts) in types {
        if ts.len() > 1 {
            bad.push(format!("{v} has types {ts:?}"));
        }
    }
    bad
}

#[test]
fn criterion_03_controller_soundness() {
    let schema = toy_schema();
    let universe = walk_universe(&schema, &["A", "B", "C", "D"]);
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut stats = Vec::new();
    let mut pass = true;
    for level in [ConstraintLevel::C1, ConstraintLevel::C1plusC2] {
        let controller = Controller::new(&schema, level);
        let (mut walks, mut dropped, mut bad_structure, mut bad_types) = (0, 0, 0, 0);
        while walks < 10_000 {
            let Some(seq) = random_walk(&controller, &universe, 30, 0.2, &mut rng) else {
                dropped += 1;
                continue;
            };
            walks += 1;
            let graph = build_graph(&seq, &schema).unwrap();
            if !graph.validate_wellformed().is_empty() {
                bad_structure += 1;
            }
            if level == ConstraintLevel::C1plusC2 {
                let lf = graph_to_lf(&graph, &schema).unwrap();
                if !type_violations(&lf, &schema).is_empty()
                    || !graph.schema_violations(&schema).is_empty()
                {
                    bad_types += 1;
                }
            }
        }
        pass &= bad_structure == 0 && bad_types == 0;
        stats.push(format!(
            "{level}: {walks} walks, {dropped} unfinished at 30, {bad_structure} ill-formed, {bad_types} type violations"
        ));
    }
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(30);
    report(
        3,
        "controller soundness",
        pass,
        format!("{}; {elapsed:.2?}", stats.join("; ")),
    );
    assert!(pass);
}

/// Whether some way of finishing `s` yields a well-formed graph. Tries
/// every choice for pending arguments and role bindings, closes open
/// operations innermost first (adding a variable if none exists), adds a
/// variable if there is no return node, joins the remaining components
/// with relation edges, and validates the result.
struct ClosureOracle<'a> {
    schema: &'a KbSchema,
}

impl ClosureOracle<'_> {
    fn step(&self, s: &PartialGraphState, a: &Action) -> Option<PartialGraphState> {
        let mut t = s.clone();
        t.apply(a, self.schema).ok().map(|_| t)
    }

    fn completable(&self, s: &PartialGraphState) -> bool {
        if let Some(p) = &s.pending {
            let role = p.expected_role();
            let vars_only = matches!(p, Pending::Roles { .. });
            return s
                .symbols
                .keys()
                .filter(|l| !vars_only || s.node_kind(l) == Some(NodeKind::Variable))
                .any(|l| {
                    self.step(s, &Action::Argument(role.clone(), l.clone()))
                        .is_some_and(|t| self.completable(&t))
                });
        }
        let has_var = s
            .symbols
            .keys()
            .any(|l| s.node_kind(l) == Some(NodeKind::Variable));
        let fresh = Action::AddVariable("Z".into());
        if let Some(&open) = s.graph.open.last() {
            let s = if has_var {
                Some(s.clone())
            } else {
                self.step(s, &fresh)
            };
            let op = s.as_ref().map(|s| s.graph.scopes[open.0].operation.clone());
            return match (s, op) {
                (Some(s), Some(op)) => self
                    .step(&s, &Action::EndOperation(op))
                    .is_some_and(|t| self.completable(&t)),
                _ => false,
            };
        }
        let mut s = if s.graph.return_node.is_none() {
            match self.step(s, &fresh) {
                Some(t) => t,
                None => return false,
            }
        } else {
            s.clone()
        };
        let rel = self.schema.relations.keys().next().unwrap().clone();
        loop {
            let reps = component_representatives(&s.graph);
            if reps.len() < 2 {
                break;
            }
            for a in [
                Action::AddEdge(rel.clone()),
                Action::Argument(Role::Arg1, reps[0].clone()),
                Action::Argument(Role::Arg2, reps[1].clone()),
            ] {
                match self.step(&s, &a) {
                    Some(t) => s = t,
                    None => return false,
                }
            }
        }
        s.is_closed() && s.graph.validate_wellformed().is_empty()
    }
}

/// One variable or entity label per component, joining through edges,
/// type attachments and shared scope roles.
fn component_representatives(g: &SemanticGraph) -> Vec<String> {
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            p[x] = find(p, p[x]);
        }
        p[x]
    }
    let mut p: Vec<usize> = (0..g.nodes.len()).collect();
    let mut join = |a: usize, b: usize| {
        let (x, y) = (find(&mut p, a), find(&mut p, b));
        p[x] = y;
    };
    g.edges.iter().for_each(|e| join(e.arg1.0, e.arg2.0));
    g.attachments
        .iter()
        .for_each(|a| join(a.type_node.0, a.constrained_node.0));
    for s in &g.scopes {
        for w in s.roles.windows(2) {
            join(w[0].1 .0, w[1].1 .0);
        }
    }
    let mut seen = HashSet::new();
    g.nodes
        .iter()
        .filter(|n| n.kind != NodeKind::Type)
        .filter(|n| seen.insert(find(&mut p, n.id.0)))
        .map(|n| n.label.clone())
        .collect()
}

/// Label-level description of a state, equal for states that differ only
/// in node numbering.
fn state_key(s: &PartialGraphState) -> String {
    let g = &s.graph;
    let lab = |id: seq2act::graph::NodeId| g.nodes[id.0].label.clone();
    let mut nodes: Vec<String> = g
        .argument_nodes()
        .map(|n| format!("{:?}:{}", n.kind, n.label))
        .collect();
    nodes.sort();
    let mut atts: Vec<String> = g
        .attachments
        .iter()
        .map(|a| format!("{}>{}", lab(a.type_node), lab(a.constrained_node)))
        .collect();
    atts.sort();
    let mut edges: Vec<String> = g
        .edges
        .iter()
        .map(|e| format!("{}({},{})", e.relation, lab(e.arg1), lab(e.arg2)))
        .collect();
    edges.sort();
    let scopes: Vec<String> = g
        .scopes
        .iter()
        .map(|sc| {
            let roles: Vec<String> = sc
                .roles
                .iter()
                .map(|(r, n)| format!("{r}={}", lab(*n)))
                .collect();
            format!("{}:{}:{roles:?}", sc.operation, sc.closed)
        })
        .collect();
    let pending = match &s.pending {
        None => String::new(),
        Some(Pending::Type { ty }) => format!("type {ty}"),
        Some(Pending::Edge { relation, arg1 }) => format!("edge {relation} {:?}", arg1.map(lab)),
        Some(Pending::Roles {
            scope, remaining, ..
        }) => format!("roles {} {remaining:?}", scope.0),
    };
    format!(
        "{nodes:?}|{atts:?}|{edges:?}|{scopes:?}|{:?}|{pending}|{:?}",
        g.open,
        g.return_node.map(lab)
    )
}

struct Sweep {
    states: usize,
    checked: usize,
    disagreements: Vec<String>,
}

/// Breadth-first over every state reachable with legal actions from
/// `universe` within `depth` actions, comparing each verdict against the
/// oracle.
fn sweep(schema: &KbSchema, universe: &[Action], depth: usize) -> Sweep {
    let controller = Controller::new(schema, ConstraintLevel::C1);
    let oracle = ClosureOracle { schema };
    let mut frontier = vec![PartialGraphState::new()];
    let mut seen = HashSet::new();
    let mut out = Sweep {
        states: 0,
        checked: 0,
        disagreements: Vec::new(),
    };
    for d in 0..=depth {
        let results = seq2act::par::map(&frontier, |s| {
            let mut children = Vec::new();
            let mut wrong = Vec::new();
            for a in universe {
                let verdict = controller.check(s, a).allowed;
                let applied = oracle.step(s, a);
                if verdict != applied.as_ref().is_some_and(|t| oracle.completable(t)) {
                    wrong.push(format!("{a} after {}", state_key(s)));
                }
                if let (true, Some(t)) = (verdict && d < depth, applied) {
                    children.push((state_key(&t), t));
                }
            }
            (children, wrong)
        });
        out.states += frontier.len();
        out.checked += frontier.len() * universe.len();
        let mut next = Vec::new();
        for (children, wrong) in results {
            out.disagreements.extend(wrong);
            next.extend(
                children
                    .into_iter()
                    .filter(|(k, _)| seen.insert(k.clone()))
                    .map(|(_, t)| t),
            );
        }
        frontier = next;
    }
    out
}

#[test]
fn criterion_04_controller_oracle() {
    let schema = toy_schema();
    let labels = ["A", "B", "texas", "austin"];
    let keep_labels = |a: &Action| match a {
        Action::AddEntity(l) | Action::Argument(_, l) => labels.contains(&l.as_str()),
        _ => true,
    };
    // All schema actions, two variables and two entities: exhaustive to
    // depth 6. Past that the state count grows about fivefold per level.
    let full: Vec<Action> = walk_universe(&schema, &["A", "B"])
        .into_iter()
        .filter(keep_labels)
        .collect();
    // The same labels over two types, two relations and two operations:
    // exhaustive to depth 8.
    let keep_symbols = |a: &Action| match a {
        Action::AddType(t) => t == "state" || t == "city",
        Action::AddEdge(r) => ["next_to", "loc", CONST_RELATION].contains(&r.as_str()),
        Action::StartOperation(o) | Action::EndOperation(o) => o == "count" || o == "not",
        _ => true,
    };
    let sub: Vec<Action> = full.iter().filter(|a| keep_symbols(a)).cloned().collect();
    let t = Instant::now();
    let wide = sweep(&schema, &full, 6);
    let deep = sweep(&schema, &sub, 8);
    let pass = wide.disagreements.is_empty() && deep.disagreements.is_empty();
    report(
        4,
        "controller oracle equivalence",
        pass,
        format!(
            "{} actions to depth 6: {} states, {} verdicts, {} disagreements; \
             {} actions to depth 8: {} states, {} verdicts, {} disagreements; {:.1?}",
            full.len(),
            wide.states,
            wide.checked,
            wide.disagreements.len(),
            sub.len(),
            deep.states,
            deep.checked,
            deep.disagreements.len(),
            t.elapsed()
        ),
    );
    let mut shown = wide.disagreements;
    shown.extend(deep.disagreements);
    shown.truncate(5);
    assert!(pass, "{shown:#?}");
}

fn small_model(hidden: usize, seed: u64, init: f64) -> (Seq2Act, Vec<usize>, Vec<usize>) {
    let words: WordVocab = ["<unk>", "which", "states", "border", "<state:0>"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .into();
    let seq = seq2act::action::parse_sequence(
        "add_variable:A add_type_node:state arg:A add_entity_node:<state:0> \
         add_edge:next_to arg1_node:A arg2_node:<state:0>",
    )
    .unwrap();
    let actions = ActionVocab::from_actions(seq.clone());
    let targets: Vec<usize> = seq
        .iter()
        .map(|a| actions.id(a).unwrap())
        .chain([actions.eos()])
        .collect();
    let config = ModelConfig {
        hidden_size: hidden,
        word_embed_dim: 6,
        struct_embed_dim: 4,
        sem_embed_dim: 5,
        init_scale: init,
        seed,
    };
    (
        Seq2Act::new(config, words, actions).unwrap(),
        vec![1, 2, 3, 4],
        targets,
    )
}

#[test]
fn criterion_05_gradients() {
    let (mut model, words, targets) = small_model(8, 5, 0.3);
    let t = Instant::now();
    let mut grad = model.params.zeros_like();
    model.loss_and_grad(&words, &targets, &mut grad).unwrap();
    let analytic: Vec<Vec<f64>> = grad.blocks().iter().map(|b| b.data().to_vec()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    let mut sampled = Vec::new();
    for (bi, block) in analytic.iter().enumerate() {
        let n = block.len();
        let coords: Vec<usize> = if n <= 200 {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, 200).into_vec()
        };
        sampled.push(coords.len());
        for i in coords {
            let orig = model.params.blocks()[bi].data()[i];
            model.params.blocks_mut()[bi].data_mut()[i] = orig + GRADIENT_EPSILON;
            let up = -model.sequence_log_prob(&words, &targets).unwrap();
            model.params.blocks_mut()[bi].data_mut()[i] = orig - GRADIENT_EPSILON;
            let down = -model.sequence_log_prob(&words, &targets).unwrap();
            model.params.blocks_mut()[bi].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * GRADIENT_EPSILON);
            let a = block[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADIENT_FLOOR);
            worst = worst.max(rel);
        }
    }
    let elapsed = t.elapsed();
    let pass = worst <= GRADIENT_TOLERANCE && elapsed < Duration::from_secs(60);
    report(
        5,
        "gradient correctness",
        pass,
        format!("max relative error {worst:.2e} over blocks sampled {sampled:?}, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (model, _, _) = small_model(rng.gen_range(2..12), seed, rng.gen_range(0.05..2.0));
        let len = rng.gen_range(1..9);
        let words: Vec<usize> = (0..len).map(|_| rng.gen_range(0..5)).collect();
        let enc = model.encode(&words).unwrap();
        let mut st = model.initial_state(&enc).unwrap();
        worst = worst.max((st.attention.iter().sum::<f64>() - 1.0).abs());
        let mut prev = None;
        for _ in 0..10 {
            let out = model.decode_step(&enc, &st, prev).unwrap();
            worst = worst.max((out.probs().iter().sum::<f64>() - 1.0).abs());
            worst = worst.max((out.state.attention.iter().sum::<f64>() - 1.0).abs());
            prev = Some(rng.gen_range(0..model.actions.len()));
            st = out.state;
        }
    }
    let pass = worst <= NORMALIZATION_TOLERANCE;
    report(
        6,
        "attention and softmax normalization",
        pass,
        format!("max |sum - 1| = {worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_07_toy_end_to_end() {
    let schema = toy_schema();
    let t = Instant::now();
    let data = preprocess(&corpus("train.tsv"), &schema, 2).unwrap();
    let (model, metrics) = train(&TrainConfig::default(), &data).unwrap();
    let test = corpus("test.tsv");
    let matcher = EntityMatcher::new(&schema);
    let gold: Vec<String> = test.iter().map(|r| r.logical_form.clone()).collect();
    let accuracy = |level| {
        let opts = DecodeOptions {
            level,
            ..DecodeOptions::default()
        };
        let preds: Vec<Option<String>> = seq2act::par::map(&test, |r| {
            let (tokens, map) = matcher.replace(&tokenize_utterance(&r.utterance), &schema);
            parse_tokens(&model, &schema, &tokens, &map, &opts)
                .ok()
                .map(|p| p.logical_form)
        });
        evaluate(&preds, &gold, &schema).accuracy
    };
    let constrained = accuracy(ConstraintLevel::C1plusC2);
    let unconstrained = accuracy(ConstraintLevel::None);
    let elapsed = t.elapsed();
    let pass = constrained >= TOY_ACCURACY
        && constrained >= unconstrained
        && metrics.last().unwrap().loss < metrics[0].loss
        && elapsed < Duration::from_secs(600);
    report(
        7,
        "toy end-to-end",
        pass,
        format!(
            "c1c2 {constrained:.3}, none {unconstrained:.3}, loss {:.4} -> {:.4}, {elapsed:.1?}",
            metrics[0].loss,
            metrics.last().unwrap().loss
        ),
    );
    assert!(pass);
}

/// Four actions over a one-variable schema, scored by hand-enumerating
/// every sequence of at most four actions.
fn enumerable_model(seed: u64) -> (Seq2Act, KbSchema) {
    let schema = load_schema(
        "type state\ntype city\nentity texas : state\nrelation next_to(state, state)\n",
    )
    .unwrap();
    let words: WordVocab = ["<unk>", "a", "b"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .into();
    let actions = ActionVocab::from_actions(
        seq2act::action::parse_sequence(
            "add_variable:A add_type_node:state add_type_node:city arg:A",
        )
        .unwrap(),
    );
    let config = ModelConfig {
        hidden_size: 5,
        word_embed_dim: 3,
        struct_embed_dim: 3,
        sem_embed_dim: 3,
        init_scale: 1.5,
        seed,
    };
    (Seq2Act::new(config, words, actions).unwrap(), schema)
}

/// Hard action rules only: every action must apply, and the end marker
/// needs a return node, nothing pending and no open operation.
fn legal_continuations(
    model: &Seq2Act,
    schema: &KbSchema,
    state: &PartialGraphState,
) -> Vec<usize> {
    let mut out: Vec<usize> = (0..model.actions.len())
        .filter(|&i| {
            state
                .clone()
                .apply(model.actions.action(i).unwrap(), schema)
                .is_ok()
        })
        .collect();
    if state.is_closed() {
        out.push(model.actions.eos());
    }
    out
}

#[test]
fn criterion_08_beam_argmax() {
    const MAX_LEN: usize = 4;
    let words = [1usize, 2, 1];
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for seed in 0..25 {
        let (model, schema) = enumerable_model(seed);
        let n = model.actions.len();
        // Brute force over every sequence of length <= MAX_LEN.
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut all = 0;
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        while let Some(prefix) = stack.pop() {
            all += 1;
            let mut state = PartialGraphState::new();
            let valid = prefix.iter().all(|&i| {
                state
                    .apply(model.actions.action(i).unwrap(), &schema)
                    .is_ok()
            });
            if !valid {
                continue;
            }
            if state.is_closed() {
                let mut targets = prefix.clone();
                targets.push(model.actions.eos());
                let lp = model.sequence_log_prob(&words, &targets).unwrap();
                if best.as_ref().is_none_or(|(b, _)| lp > *b) {
                    best = Some((lp, prefix.clone()));
                }
            }
            if prefix.len() < MAX_LEN {
                for i in 0..n {
                    let mut p = prefix.clone();
                    p.push(i);
                    stack.push(p);
                }
            }
        }
        let opts = |beam| DecodeOptions {
            beam_size: beam,
            level: ConstraintLevel::None,
            max_steps: Some(MAX_LEN + 1),
        };
        let beam = decode_ids(&model, &schema, &words, &opts(all), None).unwrap();
        let (lp, seq) = best.unwrap();
        if beam.ids != seq || (beam.score - lp).abs() > 1e-9 {
            mismatches.push(format!(
                "seed {seed}: beam {:?} vs brute force {seq:?}",
                beam.ids
            ));
        }

        // Greedy by hand: best legal output at every step.
        let enc = model.encode(&words).unwrap();
        let mut st = model.initial_state(&enc).unwrap();
        let mut state = PartialGraphState::new();
        let (mut prev, mut greedy) = (None, None);
        let mut seq = Vec::new();
        for _ in 0..=MAX_LEN {
            let out = model.decode_step(&enc, &st, prev).unwrap();
            // A dead end leaves the single-item beam empty.
            let Some(pick) = legal_continuations(&model, &schema, &state)
                .into_iter()
                .max_by(|&a, &b| {
                    out.log_probs[a]
                        .total_cmp(&out.log_probs[b])
                        .then_with(|| model.actions.text(b).cmp(&model.actions.text(a)))
                })
            else {
                break;
            };
            if pick == model.actions.eos() {
                greedy = Some(seq.clone());
                break;
            }
            state
                .apply(model.actions.action(pick).unwrap(), &schema)
                .unwrap();
            seq.push(pick);
            prev = Some(pick);
            st = out.state;
        }
        let one = match decode_ids(&model, &schema, &words, &opts(1), None) {
            Ok(h) => Some(h.ids),
            Err(DecodeError::NoCompleteParse { .. }) => None,
            Err(e) => panic!("{e}"),
        };
        if one != greedy {
            mismatches.push(format!("seed {seed}: beam 1 {one:?} vs greedy {greedy:?}"));
        }
        checked += 1;
    }
    let pass = mismatches.is_empty();
    report(
        8,
        "beam argmax",
        pass,
        format!("{checked} random models, {} mismatches", mismatches.len()),
    );
    assert!(pass, "{mismatches:#?}");
}

/// Symbols, parentheses and commas of a logical-form text.
fn count_lf_tokens(text: &str) -> usize {
    let mut n = 0;
    let mut in_symbol = false;
    for c in text.chars() {
        match c {
            '(' | ')' | ',' => {
                n += 1;
                in_symbol = false;
            }
            c if c.is_whitespace() => in_symbol = false,
            _ => {
                if !in_symbol {
                    n += 1;
                }
                in_symbol = true;
            }
        }
    }
    n
}

#[test]
fn criterion_09_compactness() {
    let schema = toy_schema();
    let mut lines = Vec::new();
    let mut pass = true;
    for name in ["train.tsv", "test.tsv"] {
        let (mut lf, mut act, mut n) = (0usize, 0usize, 0usize);
        for r in corpus(name) {
            let l = parse_lf(&r.logical_form, &schema).unwrap();
            lf += count_lf_tokens(&print_lf(&l));
            act += lf_to_actions(&l, &schema).unwrap().len();
            n += 1;
        }
        let (ml, ma) = (lf as f64 / n as f64, act as f64 / n as f64);
        pass &= ma < ml;
        lines.push(format!(
            "{name}: {ma:.2} actions vs {ml:.2} lf tokens, {:.1}% shorter",
            100.0 * (1.0 - ma / ml)
        ));
    }
    report(
        9,
        "compactness",
        pass,
        format!("{}; no real Geo data supplied", lines.join("; ")),
    );
    assert!(pass);
}

#[test]
fn criterion_10_learning_rate_schedule() {
    let expected: Vec<f64> = (1..=30)
        .map(|e| match e {
            1..=15 => 0.1,
            16..=20 => 0.05,
            21..=25 => 0.025,
            _ => 0.0125,
        })
        .collect();
    let schema = toy_schema();
    let raw: Vec<RawExample> = corpus("train.tsv").into_iter().take(4).collect();
    let data = preprocess(&raw, &schema, 1).unwrap();
    let config = TrainConfig {
        model: ModelConfig {
            hidden_size: 3,
            word_embed_dim: 2,
            struct_embed_dim: 2,
            sem_embed_dim: 2,
            ..ModelConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut emitted = Vec::new();
    train_with(&config, &data, |m| emitted.push(m.lr)).unwrap();
    let pass = emitted == expected && TrainSchedule::default().trace() == expected;
    report(
        10,
        "learning-rate schedule",
        pass,
        format!("{} epochs emitted", emitted.len()),
    );
    assert!(pass, "{emitted:?}");
}

#[test]
fn criterion_11_checkpoint_integrity() {
    let (model, _, _) = small_model(6, 9, 0.2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    seq2act::train::save_checkpoint(&model, &path).unwrap();
    let first = std::fs::read(&path).unwrap();
    let loaded = seq2act::train::load_checkpoint(&path).unwrap();
    seq2act::train::save_checkpoint(&loaded, &path).unwrap();
    let second = std::fs::read(&path).unwrap();
    let identical = first == second && to_bytes(&loaded) == first;

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut rejected = 0;
    let mut tried = 0;
    for _ in 0..200 {
        let mut bad = first.clone();
        let i = rng.gen_range(0..bad.len());
        bad[i] ^= 1 << rng.gen_range(0..8);
        tried += 1;
        rejected += usize::from(from_bytes(&bad).is_err());
    }
    for cut in [0, 7, 20, first.len() / 2, first.len() - 1] {
        tried += 1;
        rejected += usize::from(from_bytes(&first[..cut]).is_err());
    }
    let pass = identical && rejected == tried;
    report(
        11,
        "checkpoint integrity",
        pass,
        format!(
            "save/load/save identical: {identical}; {rejected}/{tried} corrupted files rejected"
        ),
    );
    assert!(pass);
}
