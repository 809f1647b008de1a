//! Finite automata over a shared, attributed event alphabet.
//!
//! Automata are stored as an explicit transition relation so that
//! nondeterminism and ε-moves are first-class; [`Automaton::determinize`]
//! is the only place where a powerset is built.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub usize);

pub type StateId = usize;
pub type EventSet = BTreeSet<EventId>;
pub type StateSet = BTreeSet<StateId>;
/// A finite event sequence. The empty vector is ε.
pub type Word = Vec<EventId>;

/// Reserved spellings of the empty string.
pub const RESERVED_EVENT_NAMES: [&str; 2] = ["ε", "eps"];

/// Transition label: either a real event or the silent move ε.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Eps,
    Event(EventId),
}

impl Label {
    pub fn event(self) -> Option<EventId> {
        match self {
            Label::Eps => None,
            Label::Event(e) => Some(e),
        }
    }
}

/// Declaration of one event and its attributes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventSpec {
    pub name: String,
    pub controllable: bool,
    pub observable: bool,
    pub sensor_attackable: bool,
    pub actuator_attackable: bool,
}

impl EventSpec {
    /// A controllable, observable, unattacked event.
    pub fn new(name: impl Into<String>) -> Self {
        EventSpec {
            name: name.into(),
            controllable: true,
            observable: true,
            sensor_attackable: false,
            actuator_attackable: false,
        }
    }

    pub fn controllable(mut self, v: bool) -> Self {
        self.controllable = v;
        self
    }

    pub fn observable(mut self, v: bool) -> Self {
        self.observable = v;
        self
    }

    pub fn sensor_attackable(mut self, v: bool) -> Self {
        self.sensor_attackable = v;
        self
    }

    pub fn actuator_attackable(mut self, v: bool) -> Self {
        self.actuator_attackable = v;
        self
    }
}

/// The event set Σ together with Σ_c, Σ_o, Σ_o^a and Σ_c^a.
///
/// Σ_uc and Σ_uo are always derived from the stored subsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventAlphabet {
    names: Vec<String>,
    index: BTreeMap<String, EventId>,
    controllable: EventSet,
    observable: EventSet,
    sensor_attackable: EventSet,
    actuator_attackable: EventSet,
}

pub fn is_valid_event_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !RESERVED_EVENT_NAMES.contains(&name)
}

impl EventAlphabet {
    pub fn new(specs: Vec<EventSpec>) -> Result<Self> {
        let mut alphabet = EventAlphabet {
            names: Vec::with_capacity(specs.len()),
            index: BTreeMap::new(),
            controllable: EventSet::new(),
            observable: EventSet::new(),
            sensor_attackable: EventSet::new(),
            actuator_attackable: EventSet::new(),
        };
        for spec in specs {
            if !is_valid_event_name(&spec.name) {
                return Err(Error::InvalidAlphabet(format!(
                    "`{}` is not a valid event name (ASCII identifier, not ε/eps)",
                    spec.name
                )));
            }
            if alphabet.index.contains_key(&spec.name) {
                return Err(Error::InvalidAlphabet(format!("event `{}` declared twice", spec.name)));
            }
            if spec.sensor_attackable && !spec.observable {
                return Err(Error::InvalidAlphabet(format!(
                    "event `{}` is sensor-attackable but unobservable",
                    spec.name
                )));
            }
            if spec.actuator_attackable && !spec.controllable {
                return Err(Error::InvalidAlphabet(format!(
                    "event `{}` is actuator-attackable but uncontrollable",
                    spec.name
                )));
            }
            let id = EventId(alphabet.names.len());
            alphabet.index.insert(spec.name.clone(), id);
            alphabet.names.push(spec.name);
            if spec.controllable {
                alphabet.controllable.insert(id);
            }
            if spec.observable {
                alphabet.observable.insert(id);
            }
            if spec.sensor_attackable {
                alphabet.sensor_attackable.insert(id);
            }
            if spec.actuator_attackable {
                alphabet.actuator_attackable.insert(id);
            }
        }
        Ok(alphabet)
    }

    /// Same alphabet with a different Σ_c^a.
    pub fn with_actuator_attackable(&self, events: &EventSet) -> Result<Self> {
        if let Some(e) = events.iter().find(|e| !self.controllable.contains(e)) {
            return Err(Error::InvalidAlphabet(format!(
                "event `{}` is actuator-attackable but uncontrollable",
                self.name(*e)
            )));
        }
        let mut out = self.clone();
        out.actuator_attackable = events.clone();
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn events(&self) -> impl Iterator<Item = EventId> + '_ {
        (0..self.names.len()).map(EventId)
    }

    pub fn all(&self) -> EventSet {
        self.events().collect()
    }

    pub fn name(&self, e: EventId) -> &str {
        &self.names[e.0]
    }

    pub fn id(&self, name: &str) -> Option<EventId> {
        self.index.get(name).copied()
    }

    pub fn lookup(&self, name: &str) -> Result<EventId> {
        self.id(name).ok_or_else(|| Error::UnknownEvent(name.to_string()))
    }

    /// Parses a whitespace-, comma- or `·`-separated event list; `ε`/`eps`/empty is ε.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        text.split(|c: char| c.is_whitespace() || c == ',' || c == '·')
            .filter(|t| !t.is_empty() && !RESERVED_EVENT_NAMES.contains(t))
            .map(|t| self.lookup(t))
            .collect()
    }

    pub fn parse_set(&self, text: &str) -> Result<EventSet> {
        Ok(self.parse_word(text)?.into_iter().collect())
    }

    pub fn controllable(&self) -> &EventSet {
        &self.controllable
    }

    pub fn uncontrollable(&self) -> EventSet {
        self.events().filter(|e| !self.controllable.contains(e)).collect()
    }

    pub fn observable(&self) -> &EventSet {
        &self.observable
    }

    pub fn unobservable(&self) -> EventSet {
        self.events().filter(|e| !self.observable.contains(e)).collect()
    }

    pub fn sensor_attackable(&self) -> &EventSet {
        &self.sensor_attackable
    }

    pub fn actuator_attackable(&self) -> &EventSet {
        &self.actuator_attackable
    }

    pub fn is_observable(&self, e: EventId) -> bool {
        self.observable.contains(&e)
    }

    pub fn is_controllable(&self, e: EventId) -> bool {
        self.controllable.contains(&e)
    }

    /// Natural projection onto Σ_o.
    pub fn project(&self, word: &[EventId]) -> Word {
        word.iter().copied().filter(|e| self.is_observable(*e)).collect()
    }

    pub fn render_word(&self, word: &[EventId]) -> String {
        if word.is_empty() {
            "ε".to_string()
        } else {
            word.iter().map(|e| self.name(*e)).collect::<Vec<_>>().join(" ")
        }
    }

    pub fn render_set(&self, set: &EventSet) -> String {
        let inner: Vec<&str> = set.iter().map(|e| self.name(*e)).collect();
        format!("{{{}}}", inner.join(","))
    }

    pub fn render_label(&self, label: Label) -> &str {
        match label {
            Label::Eps => "ε",
            Label::Event(e) => self.name(e),
        }
    }
}

/// Natural projection P: erases unobservable events, keeping order.
pub fn natural_projection(word: &[EventId], alphabet: &EventAlphabet) -> Word {
    alphabet.project(word)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub src: StateId,
    pub label: Label,
    pub dst: StateId,
}

/// A problem found by [`Automaton::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    InitialNotAState(StateId),
    MarkedNotAState(StateId),
    UnknownEndpoint(Transition),
    UnknownEvent(Transition),
    EventOutsideAlphabet { transition: Transition, event: String },
    DuplicateStateName(String),
    EmptyStateName(StateId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InitialNotAState(q) => write!(f, "initial state #{q} is not a state"),
            Violation::MarkedNotAState(q) => write!(f, "marked state #{q} is not a state"),
            Violation::UnknownEndpoint(t) => {
                write!(f, "transition #{} -> #{} has an endpoint that is not a state", t.src, t.dst)
            }
            Violation::UnknownEvent(t) => {
                write!(f, "transition #{} -> #{} carries an undeclared event", t.src, t.dst)
            }
            Violation::EventOutsideAlphabet { transition, event } => write!(
                f,
                "transition #{} -> #{} uses event `{event}` outside the automaton's alphabet",
                transition.src, transition.dst
            ),
            Violation::DuplicateStateName(n) => write!(f, "state name `{n}` used twice"),
            Violation::EmptyStateName(q) => write!(f, "state #{q} has an empty name"),
        }
    }
}

/// A (possibly nondeterministic) finite automaton with ε-moves and marked states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Automaton {
    alphabet: Arc<EventAlphabet>,
    events: EventSet,
    names: Vec<String>,
    initial: StateId,
    marked: StateSet,
    transitions: BTreeSet<Transition>,
    succ: Vec<Vec<(Label, StateId)>>,
    index: HashMap<String, StateId>,
}

impl Automaton {
    /// Assembles an automaton without checking invariants; see [`Automaton::validate`].
    pub fn from_parts(
        alphabet: Arc<EventAlphabet>,
        events: EventSet,
        names: Vec<String>,
        initial: StateId,
        marked: StateSet,
        transitions: impl IntoIterator<Item = Transition>,
    ) -> Self {
        let transitions: BTreeSet<Transition> = transitions.into_iter().collect();
        let mut succ = vec![Vec::new(); names.len()];
        for t in &transitions {
            if t.src < names.len() && t.dst < names.len() {
                succ[t.src].push((t.label, t.dst));
            }
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            index.entry(n.clone()).or_insert(i);
        }
        Automaton { alphabet, events, names, initial, marked, transitions, succ, index }
    }

    pub fn alphabet(&self) -> &Arc<EventAlphabet> {
        &self.alphabet
    }

    /// The events this automaton is defined over (its local alphabet).
    pub fn events(&self) -> &EventSet {
        &self.events
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn states(&self) -> std::ops::Range<StateId> {
        0..self.names.len()
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.names[q]
    }

    pub fn state_names(&self) -> &[String] {
        &self.names
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.index.get(name).copied()
    }

    pub fn lookup_state(&self, name: &str) -> Result<StateId> {
        self.state_id(name).ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn marked(&self) -> &StateSet {
        &self.marked
    }

    pub fn is_marked(&self, q: StateId) -> bool {
        self.marked.contains(&q)
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> + '_ {
        self.transitions.iter()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn has_transition(&self, t: &Transition) -> bool {
        self.transitions.contains(t)
    }

    pub fn successors(&self, q: StateId) -> &[(Label, StateId)] {
        &self.succ[q]
    }

    /// First σ-successor of `q`; the unique one when deterministic.
    pub fn delta(&self, q: StateId, e: EventId) -> Option<StateId> {
        self.succ[q].iter().find(|(l, _)| *l == Label::Event(e)).map(|(_, d)| *d)
    }

    /// Enabled events at `q`, with targets.
    pub fn outgoing_events(&self, q: StateId) -> impl Iterator<Item = (EventId, StateId)> + '_ {
        self.succ[q].iter().filter_map(|(l, d)| l.event().map(|e| (e, *d)))
    }

    pub fn is_deterministic(&self) -> bool {
        self.succ.iter().all(|out| {
            let mut seen = EventSet::new();
            out.iter().all(|(l, _)| match l {
                Label::Eps => false,
                Label::Event(e) => seen.insert(*e),
            })
        })
    }

    pub fn render_transition(&self, t: &Transition) -> String {
        format!("({}, {}, {})", self.names[t.src], self.alphabet.render_label(t.label), self.names[t.dst])
    }

    pub fn render_states(&self, set: &StateSet) -> String {
        let inner: Vec<&str> = set.iter().map(|q| self.names[*q].as_str()).collect();
        format!("{{{}}}", inner.join(","))
    }

    /// Lists every broken invariant; empty iff the automaton is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.names.len();
        let mut out = Vec::new();
        if self.initial >= n {
            out.push(Violation::InitialNotAState(self.initial));
        }
        out.extend(self.marked.iter().filter(|q| **q >= n).map(|q| Violation::MarkedNotAState(*q)));
        let mut seen = BTreeSet::new();
        for (q, name) in self.names.iter().enumerate() {
            if name.is_empty() {
                out.push(Violation::EmptyStateName(q));
            } else if !seen.insert(name.as_str()) {
                out.push(Violation::DuplicateStateName(name.clone()));
            }
        }
        for t in &self.transitions {
            if t.src >= n || t.dst >= n {
                out.push(Violation::UnknownEndpoint(*t));
            }
            if let Label::Event(e) = t.label {
                if e.0 >= self.alphabet.len() {
                    out.push(Violation::UnknownEvent(*t));
                } else if !self.events.contains(&e) {
                    out.push(Violation::EventOutsideAlphabet {
                        transition: *t,
                        event: self.alphabet.name(e).to_string(),
                    });
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidAutomaton(v.to_string())),
        }
    }

    pub fn reachable_states(&self) -> StateSet {
        let mut seen = StateSet::new();
        let mut queue = VecDeque::new();
        if self.initial < self.names.len() {
            seen.insert(self.initial);
            queue.push_back(self.initial);
        }
        while let Some(q) = queue.pop_front() {
            for (_, d) in &self.succ[q] {
                if seen.insert(*d) {
                    queue.push_back(*d);
                }
            }
        }
        seen
    }

    /// Restriction to the states in `keep`, renumbered in ascending order.
    ///
    /// `keep` must contain the initial state.
    pub fn restrict(&self, keep: &StateSet) -> Automaton {
        let remap: BTreeMap<StateId, StateId> = keep.iter().enumerate().map(|(new, old)| (*old, new)).collect();
        let names = keep.iter().map(|q| self.names[*q].clone()).collect();
        let marked = self.marked.iter().filter_map(|q| remap.get(q).copied()).collect();
        let transitions = self
            .transitions
            .iter()
            .filter_map(|t| Some(Transition { src: *remap.get(&t.src)?, label: t.label, dst: *remap.get(&t.dst)? }));
        Automaton::from_parts(
            self.alphabet.clone(),
            self.events.clone(),
            names,
            remap[&self.initial],
            marked,
            transitions,
        )
    }

    /// The accessible part Ac(·).
    pub fn accessible(&self) -> Automaton {
        self.restrict(&self.reachable_states())
    }

    /// Unobservable reach: the ε-closure of `x`.
    pub fn unobservable_reach(&self, x: &StateSet) -> StateSet {
        let mut closure = x.clone();
        let mut stack: Vec<StateId> = x.iter().copied().collect();
        while let Some(q) = stack.pop() {
            for (l, d) in &self.succ[q] {
                if *l == Label::Eps && closure.insert(*d) {
                    stack.push(*d);
                }
            }
        }
        closure
    }

    /// σ-successors of a state set, before closure.
    pub fn event_image(&self, x: &StateSet, e: EventId) -> StateSet {
        x.iter().flat_map(|q| self.succ[*q].iter()).filter(|(l, _)| *l == Label::Event(e)).map(|(_, d)| *d).collect()
    }

    /// ε-closed σ-successor of an ε-closed state set.
    pub fn step_set(&self, x: &StateSet, e: EventId) -> StateSet {
        self.unobservable_reach(&self.event_image(x, e))
    }

    /// States reachable from the initial state under `word`; empty iff `word` is not generated.
    pub fn run(&self, word: &[EventId]) -> Result<StateSet> {
        if let Some(e) = word.iter().find(|e| e.0 >= self.alphabet.len()) {
            return Err(Error::UnknownEvent(format!("#{}", e.0)));
        }
        Ok(self.run_from(&self.initial_closure(), word))
    }

    pub fn initial_closure(&self) -> StateSet {
        self.unobservable_reach(&StateSet::from([self.initial]))
    }

    pub fn run_from(&self, start: &StateSet, word: &[EventId]) -> StateSet {
        let mut current = start.clone();
        for e in word {
            if current.is_empty() {
                break;
            }
            current = self.step_set(&current, *e);
        }
        current
    }

    pub fn accepts(&self, word: &[EventId]) -> bool {
        self.run_from(&self.initial_closure(), word).iter().any(|q| self.is_marked(*q))
    }

    pub fn generates(&self, word: &[EventId]) -> bool {
        !self.run_from(&self.initial_closure(), word).is_empty()
    }

    /// Replaces the listed events by ε.
    pub fn erase_events(&self, erased: &EventSet) -> Automaton {
        let transitions = self.transitions.iter().map(|t| match t.label {
            Label::Event(e) if erased.contains(&e) => Transition { label: Label::Eps, ..*t },
            _ => *t,
        });
        Automaton::from_parts(
            self.alphabet.clone(),
            self.events.difference(erased).copied().collect(),
            self.names.clone(),
            self.initial,
            self.marked.clone(),
            transitions,
        )
    }

    /// Erases every event outside Σ_o.
    pub fn project(&self) -> Automaton {
        self.erase_events(&self.alphabet.unobservable())
    }

    pub fn with_marked(&self, marked: StateSet) -> Automaton {
        let mut out = self.clone();
        out.marked = marked;
        out
    }

    pub fn with_events(&self, events: EventSet) -> Automaton {
        let mut out = self.clone();
        out.events = events;
        out
    }

    /// Subset construction, returning the state-set behind each observer state.
    pub fn subset_construction(&self) -> Determinized {
        let labels: EventSet = self.transitions.iter().filter_map(|t| t.label.event()).collect();
        let start = self.initial_closure();
        let mut index: BTreeMap<StateSet, StateId> = BTreeMap::new();
        let mut subsets = vec![start.clone()];
        index.insert(start, 0);
        let mut transitions = Vec::new();
        let mut cursor = 0;
        while cursor < subsets.len() {
            let x = subsets[cursor].clone();
            for e in &labels {
                let next = self.step_set(&x, *e);
                if next.is_empty() {
                    continue;
                }
                let id = match index.get(&next) {
                    Some(id) => *id,
                    None => {
                        let id = subsets.len();
                        index.insert(next.clone(), id);
                        subsets.push(next);
                        id
                    }
                };
                transitions.push(Transition { src: cursor, label: Label::Event(*e), dst: id });
            }
            cursor += 1;
        }
        let names = subsets.iter().map(|x| self.render_states(x)).collect();
        let marked =
            subsets.iter().enumerate().filter(|(_, x)| x.iter().any(|q| self.is_marked(*q))).map(|(i, _)| i).collect();
        let automaton =
            Automaton::from_parts(self.alphabet.clone(), self.events.clone(), names, 0, marked, transitions);
        Determinized { automaton, subsets }
    }

    /// Deterministic automaton with the same generated and marked languages.
    pub fn determinize(&self) -> Automaton {
        self.subset_construction().automaton
    }

    /// Synchronous product; shared events synchronize, the rest interleave.
    pub fn parallel_compose(&self, other: &Automaton) -> Result<Product> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch);
        }
        let shared: EventSet = self.events.intersection(&other.events).copied().collect();
        let mut index: BTreeMap<(StateId, StateId), StateId> = BTreeMap::new();
        let mut pairs = vec![(self.initial, other.initial)];
        index.insert(pairs[0], 0);
        let mut transitions = Vec::new();
        let mut cursor = 0;
        while cursor < pairs.len() {
            let (p, r) = pairs[cursor];
            let mut moves: Vec<(Label, (StateId, StateId))> = Vec::new();
            for (l, p2) in &self.succ[p] {
                match l {
                    Label::Event(e) if shared.contains(e) => {
                        for (l2, r2) in &other.succ[r] {
                            if l2 == l {
                                moves.push((*l, (*p2, *r2)));
                            }
                        }
                    }
                    _ => moves.push((*l, (*p2, r))),
                }
            }
            for (l, r2) in &other.succ[r] {
                match l {
                    Label::Event(e) if shared.contains(e) => {}
                    _ => moves.push((*l, (p, *r2))),
                }
            }
            for (l, target) in moves {
                let id = *index.entry(target).or_insert_with(|| {
                    pairs.push(target);
                    pairs.len() - 1
                });
                transitions.push(Transition { src: cursor, label: l, dst: id });
            }
            cursor += 1;
        }
        let names = pairs.iter().map(|(p, r)| format!("({},{})", self.names[*p], other.names[*r])).collect();
        let marked = pairs
            .iter()
            .enumerate()
            .filter(|(_, (p, r))| self.is_marked(*p) && other.is_marked(*r))
            .map(|(i, _)| i)
            .collect();
        let automaton = Automaton::from_parts(
            self.alphabet.clone(),
            self.events.union(&other.events).copied().collect(),
            names,
            0,
            marked,
            transitions,
        );
        Ok(Product { automaton, pairs })
    }

    /// All words of length at most `depth` in L(a), or in L_m(a) when `marked_only`.
    ///
    /// Length counts event labels; ε-moves are free.
    pub fn enumerate_language(&self, depth: usize, marked_only: bool) -> BTreeSet<Word> {
        let mut out = BTreeSet::new();
        let mut frontier = vec![(Word::new(), self.initial_closure())];
        let events: Vec<EventId> =
            self.transitions.iter().filter_map(|t| t.label.event()).collect::<EventSet>().into_iter().collect();
        for level in 0..=depth {
            let mut next = Vec::new();
            for (word, set) in frontier {
                if !marked_only || set.iter().any(|q| self.is_marked(*q)) {
                    out.insert(word.clone());
                }
                if level == depth {
                    continue;
                }
                for e in &events {
                    let succ = self.step_set(&set, *e);
                    if !succ.is_empty() {
                        let mut w = word.clone();
                        w.push(*e);
                        next.push((w, succ));
                    }
                }
            }
            frontier = next;
        }
        out
    }

    /// Maps every state of `self` to the same-named state of `g`, if all exist.
    pub fn embedding_into(&self, g: &Automaton) -> Option<Vec<StateId>> {
        self.names.iter().map(|n| g.state_id(n)).collect()
    }

    /// H ⊑ G: same initial state, Q_H ⊆ Q, and δ_H is δ restricted to Q_H.
    pub fn is_subautomaton_of(&self, g: &Automaton) -> bool {
        self.subautomaton_mismatch(g).is_none()
    }

    /// Describes why `self` is not a sub-automaton of `g`.
    pub fn subautomaton_mismatch(&self, g: &Automaton) -> Option<String> {
        if self.alphabet != g.alphabet {
            return Some("different alphabets".into());
        }
        let Some(emb) = self.embedding_into(g) else {
            let missing = self.names.iter().find(|n| g.state_id(n).is_none()).unwrap();
            return Some(format!("state `{missing}` is not a plant state"));
        };
        if emb.get(self.initial) != Some(&g.initial) {
            return Some("initial states differ".into());
        }
        let image: BTreeMap<StateId, StateId> = emb.iter().enumerate().map(|(h, g)| (*g, h)).collect();
        let mapped: BTreeSet<Transition> =
            self.transitions.iter().map(|t| Transition { src: emb[t.src], label: t.label, dst: emb[t.dst] }).collect();
        for t in &mapped {
            if !g.transitions.contains(t) {
                return Some(format!("transition {} is not a plant transition", g.render_transition(t)));
            }
        }
        for t in &g.transitions {
            if image.contains_key(&t.src) && image.contains_key(&t.dst) && !mapped.contains(t) {
                return Some(format!(
                    "plant transition {} between specification states is missing",
                    g.render_transition(t)
                ));
            }
        }
        None
    }

    /// Length of the longest marked word, or `None` when L_m is infinite.
    ///
    /// Returns `Some(0)` for an empty marked language as well.
    pub fn longest_marked_word(&self) -> Option<usize> {
        let reach = self.reachable_states();
        let coreach = self.coreachable_states();
        let trim: Vec<StateId> = reach.intersection(&coreach).copied().collect();
        if trim.is_empty() {
            return Some(0);
        }
        let in_trim: StateSet = trim.iter().copied().collect();
        let edges: Vec<(StateId, StateId, i64)> = self
            .transitions
            .iter()
            .filter(|t| in_trim.contains(&t.src) && in_trim.contains(&t.dst))
            .map(|t| (t.src, t.dst, i64::from(t.label != Label::Eps)))
            .collect();
        // Longest path via Bellman-Ford on positive weights; a relaxation in
        // round |trim| means a labelled cycle.
        let mut best: BTreeMap<StateId, i64> = BTreeMap::from([(self.initial, 0)]);
        for round in 0..=trim.len() {
            let mut changed = false;
            for (s, d, w) in &edges {
                if let Some(bs) = best.get(s).copied() {
                    let cand = bs + w;
                    if best.get(d).is_none_or(|bd| cand > *bd) {
                        best.insert(*d, cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
            if round == trim.len() {
                return None;
            }
        }
        let longest = self.marked.iter().filter_map(|q| best.get(q)).max().copied().unwrap_or(0);
        Some(longest as usize)
    }

    pub fn coreachable_states(&self) -> StateSet {
        let mut pred: Vec<Vec<StateId>> = vec![Vec::new(); self.names.len()];
        for t in &self.transitions {
            pred[t.dst].push(t.src);
        }
        let mut seen: StateSet = self.marked.iter().copied().filter(|q| *q < self.names.len()).collect();
        let mut stack: Vec<StateId> = seen.iter().copied().collect();
        while let Some(q) = stack.pop() {
            for p in &pred[q] {
                if seen.insert(*p) {
                    stack.push(*p);
                }
            }
        }
        seen
    }

    /// Shortest word from the initial state to each reachable state (deterministic reading).
    pub fn shortest_words(&self) -> BTreeMap<StateId, Word> {
        let mut out = BTreeMap::from([(self.initial, Word::new())]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(q) = queue.pop_front() {
            let base = out[&q].clone();
            for (l, d) in &self.succ[q] {
                if !out.contains_key(d) {
                    let mut w = base.clone();
                    if let Label::Event(e) = l {
                        w.push(*e);
                    }
                    out.insert(*d, w);
                    queue.push_back(*d);
                }
            }
        }
        out
    }
}

/// Result of the subset construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Determinized {
    pub automaton: Automaton,
    /// State set of the source automaton behind each deterministic state.
    pub subsets: Vec<StateSet>,
}

/// Result of a parallel composition: the product and its component pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Product {
    pub automaton: Automaton,
    pub pairs: Vec<(StateId, StateId)>,
}

/// Incremental construction by state name.
#[derive(Clone, Debug)]
pub struct AutomatonBuilder {
    alphabet: Arc<EventAlphabet>,
    events: Option<EventSet>,
    names: Vec<String>,
    index: HashMap<String, StateId>,
    initial: Option<StateId>,
    marked: StateSet,
    transitions: Vec<Transition>,
}

impl AutomatonBuilder {
    pub fn new(alphabet: Arc<EventAlphabet>) -> Self {
        AutomatonBuilder {
            alphabet,
            events: None,
            names: Vec::new(),
            index: HashMap::new(),
            initial: None,
            marked: StateSet::new(),
            transitions: Vec::new(),
        }
    }

    /// Restricts the automaton's own alphabet (default: every declared event).
    pub fn events(&mut self, events: EventSet) -> &mut Self {
        self.events = Some(events);
        self
    }

    /// Returns the id of `name`, declaring it if needed.
    pub fn state(&mut self, name: &str) -> StateId {
        if let Some(id) = self.index.get(name) {
            return *id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn initial(&mut self, name: &str) -> &mut Self {
        let q = self.state(name);
        self.initial = Some(q);
        self
    }

    pub fn mark(&mut self, name: &str) -> &mut Self {
        let q = self.state(name);
        self.marked.insert(q);
        self
    }

    pub fn mark_all(&mut self) -> &mut Self {
        self.marked = (0..self.names.len()).collect();
        self
    }

    /// Adds `src --event--> dst`; `event` may be `ε` or `eps`.
    pub fn edge(&mut self, src: &str, event: &str, dst: &str) -> Result<&mut Self> {
        let label =
            if RESERVED_EVENT_NAMES.contains(&event) { Label::Eps } else { Label::Event(self.alphabet.lookup(event)?) };
        let (s, d) = (self.state(src), self.state(dst));
        self.transitions.push(Transition { src: s, label, dst: d });
        Ok(self)
    }

    pub fn build(&self) -> Automaton {
        Automaton::from_parts(
            self.alphabet.clone(),
            self.events.clone().unwrap_or_else(|| self.alphabet.all()),
            self.names.clone(),
            self.initial.unwrap_or(0),
            self.marked.clone(),
            self.transitions.iter().copied(),
        )
    }
}
