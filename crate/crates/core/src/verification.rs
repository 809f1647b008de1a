//! CA-controllability, bounded CA-observability, and the large language of
//! an estimate-based supervisor under attack.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::attack::{
    attacked_commands, max_step_observation, phi_enumerate, ControlPolicy, SensorAttackPolicy, StepLanguage,
    TransitionRef,
};
use crate::automaton::{Automaton, EventId, EventSet, Label, StateId, Transition, Word};
use crate::error::{Error, Result};
use crate::estimation::{build_ca_observer, CAObserver};
use crate::synthesis::Supervisor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Holds,
    Fails,
    HoldsToDepth,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::HoldsToDepth => "holds-to-depth",
        }
    }
}

/// A string `s`, the event `σ` that breaks the property after it, and the observation involved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub string: Word,
    pub event: Option<EventId>,
    pub observation: Option<Word>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub status: Status,
    pub counterexample: Option<Counterexample>,
    pub depth: Option<usize>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn holds() -> Self {
        Verdict { status: Status::Holds, counterexample: None, depth: None, notes: Vec::new() }
    }

    pub fn holds_to_depth(depth: usize) -> Self {
        Verdict { status: Status::HoldsToDepth, counterexample: None, depth: Some(depth), notes: Vec::new() }
    }

    pub fn fails(cx: Counterexample) -> Self {
        Verdict { status: Status::Fails, counterexample: Some(cx), depth: None, notes: Vec::new() }
    }

    pub fn is_failure(&self) -> bool {
        self.status == Status::Fails
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

fn ensure_sub(g: &Automaton, h: &Automaton) -> Result<Vec<StateId>> {
    if let Some(why) = h.subautomaton_mismatch(g) {
        return Err(Error::NotSubautomaton(why));
    }
    Ok(h.embedding_into(g).expect("checked"))
}

/// K(Σ_uc ∪ Σ_c^a) ∩ L(G) ⊆ K, decided on the reachable part of H.
///
/// The counterexample uses a shortest string reaching the offending state.
pub fn check_ca_controllability(g: &Automaton, h: &Automaton, actuator: &EventSet) -> Result<Verdict> {
    let emb = ensure_sub(g, h)?;
    let safe: BTreeSet<StateId> = emb.iter().copied().collect();
    let mut forced = g.alphabet().uncontrollable();
    forced.extend(actuator.iter().copied());
    let mut reach: Vec<(Word, StateId)> = h.shortest_words().into_iter().map(|(q, w)| (w, q)).collect();
    reach.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    for (word, q) in reach {
        for (e, d) in g.outgoing_events(emb[q]) {
            if forced.contains(&e) && !safe.contains(&d) {
                return Ok(Verdict::fails(Counterexample { string: word, event: Some(e), observation: None }));
            }
        }
    }
    Ok(Verdict::holds())
}

/// Plant copy that remembers whether the run has stayed inside K.
struct TaggedPlant {
    automaton: Automaton,
    policy: SensorAttackPolicy,
    /// (plant state, still in K) per tagged state.
    tags: Vec<(StateId, bool)>,
}

fn tagged_plant(g: &Automaton, h: &Automaton, emb: &[StateId], policy: &SensorAttackPolicy) -> TaggedPlant {
    let in_h: BTreeMap<StateId, StateId> = emb.iter().enumerate().map(|(hq, gq)| (*gq, hq)).collect();
    let n = g.num_states();
    let id = |q: StateId, inside: bool| if inside { q } else { n + q };
    let mut names = Vec::with_capacity(2 * n);
    let mut tags = Vec::with_capacity(2 * n);
    for inside in [true, false] {
        for q in g.states() {
            names.push(format!("{}|{}", g.state_name(q), if inside { "in" } else { "out" }));
            tags.push((q, inside));
        }
    }
    let mut transitions = Vec::new();
    let mut tagged_policy = SensorAttackPolicy::new();
    for t in g.transitions() {
        let stays = match (in_h.get(&t.src), in_h.get(&t.dst)) {
            (Some(hs), Some(hd)) => h.has_transition(&Transition { src: *hs, label: t.label, dst: *hd }),
            _ => false,
        };
        let mut edges = vec![Transition { src: id(t.src, false), label: t.label, dst: id(t.dst, false) }];
        if in_h.contains_key(&t.src) {
            edges.push(Transition { src: id(t.src, true), label: t.label, dst: id(t.dst, stays) });
        }
        let attack = policy.attack_for(g, t);
        for e in edges {
            if let (Some(f), Label::Event(ev)) = (attack, e.label) {
                tagged_policy.insert_transition(
                    TransitionRef { src: names[e.src].clone(), event: ev, dst: names[e.dst].clone() },
                    f.clone(),
                );
            }
            transitions.push(e);
        }
    }
    let automaton = Automaton::from_parts(
        g.alphabet().clone(),
        g.events().clone(),
        names,
        id(g.initial(), in_h.contains_key(&g.initial())),
        BTreeSet::new(),
        transitions,
    );
    TaggedPlant { automaton, policy: tagged_policy, tags }
}

/// Per-step observation cap used when some attack language is infinite.
fn step_observation_cap(g: &Automaton, policy: &SensorAttackPolicy) -> (usize, bool) {
    match max_step_observation(g, policy) {
        Some(m) => (m.max(1), true),
        None => {
            let widest = policy.attacked_transitions(g).iter().map(|(_, f)| f.num_states()).max().unwrap_or(1);
            (2 * widest, false)
        }
    }
}

/// Evaluates CA-observability for every sσ ∈ K with |sσ| ≤ `depth`.
///
/// Whether sσ is fine depends on s only through the set of estimator states
/// reached by Φ^π(s), where the estimator is the CA-observer of a copy of the
/// plant tagged with membership in K. The search runs over pairs (spec state,
/// estimator-state set), so every string up to `depth` is covered and
/// observations are never truncated.
pub fn check_ca_observability_bounded(
    g: &Automaton,
    h: &Automaton,
    policy: &SensorAttackPolicy,
    depth: usize,
) -> Result<Verdict> {
    let emb = ensure_sub(g, h)?;
    policy.validate_for(g)?;
    let safe: BTreeSet<StateId> = emb.iter().copied().collect();
    let tagged = tagged_plant(g, h, &emb, policy);
    let estimator = build_ca_observer(&tagged.automaton, &tagged.policy)?;
    let fine = |y: usize, sigma: EventId| -> bool {
        y == estimator.num_states()
            || estimator.plant_projection[y].iter().all(|tq| {
                let (q, in_k) = tagged.tags[*tq];
                match g.delta(q, sigma) {
                    Some(d) if in_k => safe.contains(&d),
                    _ => true,
                }
            })
    };

    let mut relations: BTreeMap<Transition, Vec<BTreeSet<usize>>> = BTreeMap::new();
    let start = (h.initial(), BTreeSet::from([estimator.initial()]));
    let mut seen = BTreeSet::from([start.clone()]);
    let mut frontier = vec![(start, Word::new())];
    for level in 0..depth {
        let mut next = Vec::new();
        for ((hq, w), s) in frontier {
            for (sigma, hq2) in h.outgoing_events(hq) {
                if !w.iter().any(|y| fine(*y, sigma)) {
                    let observation = phi_enumerate(&s, g, policy, s.len() * 8)?.value.into_iter().next();
                    return Ok(Verdict::fails(Counterexample { string: s, event: Some(sigma), observation }));
                }
                if level + 1 == depth {
                    continue;
                }
                let tr = Transition { src: emb[hq], label: Label::Event(sigma), dst: emb[hq2] };
                let rel = relations
                    .entry(tr)
                    .or_insert_with(|| observation_relation(&estimator, g, step_for(g, policy, &tr)));
                let w2: BTreeSet<usize> = w.iter().flat_map(|y| rel[*y].iter().copied()).collect();
                let node = (hq2, w2);
                if seen.insert(node.clone()) {
                    let mut s2 = s.clone();
                    s2.push(sigma);
                    next.push((node, s2));
                }
            }
        }
        if next.is_empty() && level + 1 < depth {
            return Ok(Verdict::holds_to_depth(depth).with_note(format!(
                "search space exhausted after strings of length {}; no longer counterexample exists",
                level + 1
            )));
        }
        frontier = next;
    }
    Ok(Verdict::holds_to_depth(depth))
}

/// Depth used when none is given: 2·(|X| + |Q|).
pub fn default_depth(observer: &CAObserver, g: &Automaton) -> usize {
    2 * (observer.num_states() + g.num_states())
}

/// Generator of L_a(S^a/G) over states (q, W), W the observer states reachable by Φ^π(s).
///
/// `W` uses index `observer.num_states()` for observations that left the observer.
#[derive(Clone, Debug)]
pub struct LargeLanguageAutomaton {
    pub automaton: Automaton,
    pub plant_state: Vec<StateId>,
    pub estimates: Vec<BTreeSet<usize>>,
}

/// For each source observer state, the observer states reachable through one step's observations.
fn observation_relation(obs: &CAObserver, g: &Automaton, step: StepLanguage<'_>) -> Vec<BTreeSet<usize>> {
    let dead = obs.num_states();
    let next = |w: usize, e: EventId| -> usize {
        if w == dead {
            dead
        } else {
            obs.observer.delta(w, e).unwrap_or(dead)
        }
    };
    match step {
        StepLanguage::Exact(e) => {
            (0..=dead).map(|w| BTreeSet::from([if g.alphabet().is_observable(e) { next(w, e) } else { w }])).collect()
        }
        StepLanguage::Attack(f) => {
            let f = f.project();
            (0..=dead)
                .map(|w| {
                    let start = (w, f.initial());
                    let mut seen = BTreeSet::from([start]);
                    let mut stack = vec![start];
                    while let Some((wc, fq)) = stack.pop() {
                        for (l, f2) in f.successors(fq) {
                            let pair = match l {
                                Label::Eps => (wc, *f2),
                                Label::Event(e) => (next(wc, *e), *f2),
                            };
                            if seen.insert(pair) {
                                stack.push(pair);
                            }
                        }
                    }
                    seen.into_iter().filter(|(_, fq)| f.is_marked(*fq)).map(|(wc, _)| wc).collect()
                })
                .collect()
        }
    }
}

fn step_for<'a>(g: &'a Automaton, policy: &'a SensorAttackPolicy, t: &Transition) -> StepLanguage<'a> {
    match policy.attack_for(g, t) {
        Some(f) => StepLanguage::Attack(f),
        None => StepLanguage::Exact(t.label.event().expect("plant transitions are labelled")),
    }
}

/// Builds the (q, W) generator of the large language for an estimate-based supervisor.
pub fn large_language_automaton(
    g: &Automaton,
    sup: &dyn ControlPolicy,
    policy: &SensorAttackPolicy,
    actuator: &EventSet,
) -> Result<LargeLanguageAutomaton> {
    let sup: &Supervisor = sup.as_estimate_based().ok_or_else(|| {
        Error::UnsupportedSupervisor("the product construction needs an estimate-based supervisor".into())
    })?;
    if !g.is_deterministic() {
        return Err(Error::InvalidAutomaton("plant must be deterministic".into()));
    }
    policy.validate_for(g)?;
    let obs = sup.observer();
    if obs.plant.alphabet() != g.alphabet() {
        return Err(Error::AlphabetMismatch);
    }
    let dead = obs.num_states();
    let control = |w: usize| if w == dead { sup.default_control() } else { sup.control_at(w) };
    let mut always = g.alphabet().uncontrollable();
    always.extend(actuator.iter().copied());

    let mut relations: BTreeMap<Transition, Vec<BTreeSet<usize>>> = BTreeMap::new();
    let start = (g.initial(), BTreeSet::from([obs.initial()]));
    let mut index = BTreeMap::from([(start.clone(), 0usize)]);
    let mut nodes = vec![start];
    let mut transitions = Vec::new();
    let mut cursor = 0;
    while cursor < nodes.len() {
        let (q, w) = nodes[cursor].clone();
        for (e, q2) in g.outgoing_events(q) {
            let enabled = always.contains(&e) || w.iter().any(|x| control(*x).contains(&e));
            if !enabled {
                continue;
            }
            let tr = Transition { src: q, label: Label::Event(e), dst: q2 };
            let rel = relations.entry(tr).or_insert_with(|| observation_relation(obs, g, step_for(g, policy, &tr)));
            let w2: BTreeSet<usize> = w.iter().flat_map(|x| rel[*x].iter().copied()).collect();
            let node = (q2, w2);
            let id = match index.get(&node) {
                Some(id) => *id,
                None => {
                    index.insert(node.clone(), nodes.len());
                    nodes.push(node);
                    nodes.len() - 1
                }
            };
            transitions.push(Transition { src: cursor, label: Label::Event(e), dst: id });
        }
        cursor += 1;
    }
    let names = nodes
        .iter()
        .map(|(q, w)| {
            let inner: Vec<&str> = w.iter().map(|x| if *x == dead { "⊥" } else { obs.state_name(*x) }).collect();
            format!("({},[{}])", g.state_name(*q), inner.join(";"))
        })
        .collect();
    let marked = (0..nodes.len()).collect();
    let automaton = Automaton::from_parts(g.alphabet().clone(), g.events().clone(), names, 0, marked, transitions);
    Ok(LargeLanguageAutomaton {
        automaton,
        plant_state: nodes.iter().map(|(q, _)| *q).collect(),
        estimates: nodes.into_iter().map(|(_, w)| w).collect(),
    })
}

/// Literal evaluation of the recursive large-language definition up to `depth`.
///
/// Φ^π(s) is enumerated per string; when an attack language is infinite the
/// enumeration is capped per step, so the result may under-approximate.
pub fn brute_force_large_language(
    g: &Automaton,
    sup: &dyn ControlPolicy,
    policy: &SensorAttackPolicy,
    actuator: &EventSet,
    depth: usize,
) -> Result<BTreeSet<Word>> {
    let (step_cap, _) = step_observation_cap(g, policy);
    let uncontrollable = g.alphabet().uncontrollable();
    let mut out = BTreeSet::from([Word::new()]);
    let mut frontier = vec![(Word::new(), g.initial())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for (s, q) in frontier {
            let observations = phi_enumerate(&s, g, policy, s.len() * step_cap)?.value;
            let mut possible = EventSet::new();
            for t in &observations {
                for gamma in attacked_commands(sup, t, actuator) {
                    possible.extend(gamma);
                }
            }
            for (e, q2) in g.outgoing_events(q) {
                if uncontrollable.contains(&e) || possible.contains(&e) {
                    let mut w = s.clone();
                    w.push(e);
                    out.insert(w.clone());
                    next.push((w, q2));
                }
            }
        }
        frontier = next;
    }
    Ok(out)
}

/// Decides L_a(S^a/G) = L(H) on the finite constructions.
pub fn verify_large_language_equals(
    g: &Automaton,
    h: &Automaton,
    sup: &dyn ControlPolicy,
    policy: &SensorAttackPolicy,
    actuator: &EventSet,
) -> Result<Verdict> {
    ensure_sub(g, h)?;
    let la = large_language_automaton(g, sup, policy, actuator)?.automaton;
    let start = (la.initial(), h.initial());
    let mut seen = BTreeMap::from([(start, Word::new())]);
    let mut queue = VecDeque::from([start]);
    while let Some((a, b)) = queue.pop_front() {
        let word = seen[&(a, b)].clone();
        let from_la: BTreeMap<EventId, StateId> = la.outgoing_events(a).collect();
        let from_h: BTreeMap<EventId, StateId> = h.outgoing_events(b).collect();
        for e in from_la.keys().chain(from_h.keys()).collect::<BTreeSet<_>>() {
            match (from_la.get(e), from_h.get(e)) {
                (Some(a2), Some(b2)) => {
                    if let std::collections::btree_map::Entry::Vacant(slot) = seen.entry((*a2, *b2)) {
                        let mut w = word.clone();
                        w.push(*e);
                        slot.insert(w);
                        queue.push_back((*a2, *b2));
                    }
                }
                (Some(_), None) => {
                    return Ok(Verdict::fails(Counterexample { string: word, event: Some(*e), observation: None })
                        .with_note("string generated under attack but outside the specification"));
                }
                (None, Some(_)) => {
                    return Ok(Verdict::fails(Counterexample { string: word, event: Some(*e), observation: None })
                        .with_note("specification string not generated by the supervised plant"));
                }
                (None, None) => unreachable!(),
            }
        }
    }
    Ok(Verdict::holds())
}
