//! Independent reference computations and random scenario generators shared
//! by the integration tests. The oracles only read automata as data; they do
//! not call the library's enumeration, observer or Φ routines.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;
use std::sync::Arc;

use desguard::attack::{SensorAttackPolicy, TransitionRef};
use desguard::automaton::{
    Automaton, AutomatonBuilder, EventAlphabet, EventId, EventSet, EventSpec, Label, StateId, StateSet, Word,
};
use desguard::model::{load_model, Model};
use desguard::synthesis::{synthesize_ca_supervisor, Supervisor};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn corpus(name: &str) -> Model {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_model(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn word(al: &EventAlphabet, text: &str) -> Word {
    al.parse_word(text).unwrap()
}

pub fn words(al: &EventAlphabet, texts: &[&str]) -> BTreeSet<Word> {
    texts.iter().map(|t| word(al, t)).collect()
}

/// Projected marked strings of `f` with length ≤ `depth`, by direct search over (state, string).
pub fn oracle_attack_words(f: &Automaton, depth: usize) -> BTreeSet<Word> {
    let al = f.alphabet();
    let start = (f.initial(), Word::new());
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    let mut out = BTreeSet::new();
    while let Some((q, w)) = queue.pop_front() {
        if f.marked().contains(&q) {
            out.insert(w.clone());
        }
        for t in f.transitions().filter(|t| t.src == q) {
            let mut w2 = w.clone();
            if let Label::Event(e) = t.label {
                if al.observable().contains(&e) {
                    w2.push(e);
                }
            }
            if w2.len() <= depth {
                let next = (t.dst, w2);
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    out
}

fn oracle_step_words(
    g: &Automaton,
    policy: &SensorAttackPolicy,
    t: &desguard::automaton::Transition,
    depth: usize,
) -> BTreeSet<Word> {
    match policy.attack_for(g, t) {
        Some(f) => oracle_attack_words(f, depth),
        None => {
            let e = t.label.event().unwrap();
            let w: Word = if g.alphabet().observable().contains(&e) { vec![e] } else { vec![] };
            if w.len() <= depth {
                BTreeSet::from([w])
            } else {
                BTreeSet::new()
            }
        }
    }
}

/// Observation t ↦ plant states reachable by some s with t ∈ Φ(s), for |t| ≤ `depth`.
///
/// The key set is Φ(L(G)) truncated to `depth`; the values are the true state estimates.
pub fn oracle_estimates(g: &Automaton, policy: &SensorAttackPolicy, depth: usize) -> BTreeMap<Word, StateSet> {
    let start = (g.initial(), Word::new());
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some((q, t)) = queue.pop_front() {
        for tr in g.transitions().filter(|tr| tr.src == q) {
            for w in oracle_step_words(g, policy, tr, depth - t.len()) {
                let mut t2 = t.clone();
                t2.extend(w);
                let next = (tr.dst, t2);
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    let mut out: BTreeMap<Word, StateSet> = BTreeMap::new();
    for (q, t) in seen {
        out.entry(t).or_default().insert(q);
    }
    out
}

/// Φ(s) truncated to `depth`, by concatenating per-step attack strings.
pub fn oracle_phi(s: &[EventId], g: &Automaton, policy: &SensorAttackPolicy, depth: usize) -> BTreeSet<Word> {
    let mut q = g.initial();
    let mut acc = BTreeSet::from([Word::new()]);
    for e in s {
        let tr = *g.transitions().find(|t| t.src == q && t.label == Label::Event(*e)).expect("s ∈ L(G)");
        let mut next = BTreeSet::new();
        for prefix in &acc {
            for w in oracle_step_words(g, policy, &tr, depth - prefix.len()) {
                let mut joined = prefix.clone();
                joined.extend(w);
                next.insert(joined);
            }
        }
        acc = next;
        q = tr.dst;
    }
    acc
}

/// Strings of `a` (deterministic) up to `depth`, by plain recursion.
pub fn oracle_language(a: &Automaton, depth: usize) -> BTreeSet<Word> {
    fn go(a: &Automaton, q: StateId, w: &mut Word, depth: usize, out: &mut BTreeSet<Word>) {
        out.insert(w.clone());
        if w.len() == depth {
            return;
        }
        for t in a.transitions().filter(|t| t.src == q) {
            if let Label::Event(e) = t.label {
                w.push(e);
                go(a, t.dst, w, depth, out);
                w.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(a, a.initial(), &mut Word::new(), depth, &mut out);
    out
}

/// A random scenario: plant, induced specification, sensor policy and Σ_c^a.
pub struct RandomCase {
    pub alphabet: Arc<EventAlphabet>,
    pub plant: Automaton,
    pub spec: Automaton,
    pub policy: SensorAttackPolicy,
    pub actuator: EventSet,
}

pub fn random_alphabet(rng: &mut impl Rng, max_events: usize) -> Arc<EventAlphabet> {
    let n = rng.gen_range(2..=max_events);
    let specs = (0..n)
        .map(|i| {
            let controllable = rng.gen_bool(0.7);
            let observable = rng.gen_bool(0.8);
            EventSpec::new(format!("e{i}"))
                .controllable(controllable)
                .observable(observable)
                .sensor_attackable(observable && rng.gen_bool(0.6))
                .actuator_attackable(controllable && rng.gen_bool(0.4))
        })
        .collect();
    Arc::new(EventAlphabet::new(specs).unwrap())
}

/// Attack automaton with ≤ `max_states` states over observable labels and ε, nonempty L_m.
pub fn random_attack(rng: &mut impl Rng, al: &Arc<EventAlphabet>, max_states: usize, acyclic: bool) -> Automaton {
    let n = rng.gen_range(1..=max_states);
    let labels: Vec<String> =
        al.observable().iter().map(|e| al.name(*e).to_string()).chain(["eps".to_string()]).collect();
    let mut b = AutomatonBuilder::new(al.clone());
    for i in 0..n {
        b.state(&format!("f{i}"));
    }
    b.initial("f0");
    for i in 0..n {
        for _ in 0..rng.gen_range(0..=2) {
            let j = if acyclic {
                if i + 1 >= n {
                    continue;
                }
                rng.gen_range(i + 1..n)
            } else {
                rng.gen_range(0..n)
            };
            let l = labels.choose(rng).unwrap();
            b.edge(&format!("f{i}"), l, &format!("f{j}")).unwrap();
        }
    }
    let f = b.build();
    let reach: Vec<StateId> = f.reachable_states().into_iter().collect();
    let mut marked: StateSet = reach.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    if marked.is_empty() {
        marked.insert(*reach.choose(rng).unwrap());
    }
    f.with_marked(marked)
}

pub fn random_case(rng: &mut impl Rng, acyclic_attacks: bool) -> RandomCase {
    let al = random_alphabet(rng, 4);
    let n = rng.gen_range(1..=6);
    let mut b = AutomatonBuilder::new(al.clone());
    for i in 0..n {
        b.state(&i.to_string());
    }
    b.initial("0");
    for i in 0..n {
        for e in al.events() {
            if rng.gen_bool(0.4) {
                let j = rng.gen_range(0..n);
                b.edge(&i.to_string(), al.name(e), &j.to_string()).unwrap();
            }
        }
    }
    b.mark_all();
    let plant = b.build();
    let mut policy = SensorAttackPolicy::new();
    for t in plant.transitions() {
        let e = t.label.event().unwrap();
        if al.sensor_attackable().contains(&e) && rng.gen_bool(0.6) {
            let f = random_attack(rng, &al, 3, acyclic_attacks);
            policy.insert_transition(TransitionRef::of(&plant, t).unwrap(), f);
        }
    }
    let mut safe: StateSet = plant.states().filter(|_| rng.gen_bool(0.7)).collect();
    safe.insert(plant.initial());
    let spec = plant.restrict(&safe).accessible();
    let actuator = al.actuator_attackable().clone();
    RandomCase { alphabet: al, plant, spec, policy, actuator }
}

/// S_CA of the case with every decision control replaced by a random subset.
pub fn random_supervisor(rng: &mut impl Rng, case: &RandomCase) -> Supervisor {
    let mut sup = synthesize_ca_supervisor(&case.plant, &case.spec, &case.policy).unwrap().supervisor;
    let states: Vec<StateId> = sup.decision_states().collect();
    for x in states {
        let c: EventSet = case.alphabet.events().filter(|_| rng.gen_bool(0.5)).collect();
        sup.set_control(x, c).unwrap();
    }
    sup
}
