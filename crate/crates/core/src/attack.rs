//! Sensor and actuator attack semantics.
//!
//! A transition-based sensor attack maps each attacked plant transition to an
//! automaton marking the strings an attacker may substitute for its event.
//! Observation-based attacks are driven by an attack-context automaton and
//! can be converted to a transition-based policy on the product plant.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::automaton::{Automaton, EventId, EventSet, Label, Product, StateId, Transition, Word};
use crate::error::{Error, Result};

/// A control: the set of enabled events.
pub type Control = EventSet;

/// An enumeration result together with a flag telling whether longer members were cut off.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounded<T> {
    pub value: T,
    pub truncated: bool,
}

/// Plant transition addressed by state names, so a policy applies to G, H, or any sub-automaton.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitionRef {
    pub src: String,
    pub event: EventId,
    pub dst: String,
}

impl TransitionRef {
    pub fn of(a: &Automaton, t: &Transition) -> Option<Self> {
        Some(TransitionRef {
            src: a.state_name(t.src).to_string(),
            event: t.label.event()?,
            dst: a.state_name(t.dst).to_string(),
        })
    }

    pub fn resolve(&self, a: &Automaton) -> Option<Transition> {
        let t =
            Transition { src: a.state_id(&self.src)?, label: Label::Event(self.event), dst: a.state_id(&self.dst)? };
        a.has_transition(&t).then_some(t)
    }
}

/// Transition-based sensor attack strategy π.
///
/// Entries are either explicit per transition or declared once per attackable
/// event and applied to every transition carrying it; explicit entries win.
/// A Σ_o^a-labelled transition with no entry is left unattacked.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SensorAttackPolicy {
    explicit: BTreeMap<TransitionRef, Automaton>,
    uniform: BTreeMap<EventId, Automaton>,
}

impl SensorAttackPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.explicit.is_empty() && self.uniform.is_empty()
    }

    pub fn insert_transition(&mut self, tr: TransitionRef, attack: Automaton) -> &mut Self {
        self.explicit.insert(tr, attack);
        self
    }

    pub fn insert_event(&mut self, event: EventId, attack: Automaton) -> &mut Self {
        self.uniform.insert(event, attack);
        self
    }

    pub fn explicit(&self) -> &BTreeMap<TransitionRef, Automaton> {
        &self.explicit
    }

    pub fn uniform(&self) -> &BTreeMap<EventId, Automaton> {
        &self.uniform
    }

    /// The attack automaton F_tr for a transition of `g`, if the transition is attacked.
    pub fn attack_for(&self, g: &Automaton, t: &Transition) -> Option<&Automaton> {
        let e = t.label.event()?;
        if !g.alphabet().sensor_attackable().contains(&e) {
            return None;
        }
        let key = TransitionRef::of(g, t)?;
        self.explicit.get(&key).or_else(|| self.uniform.get(&e))
    }

    /// δ^a with its attack automata, in canonical transition order.
    pub fn attacked_transitions<'a>(&'a self, g: &'a Automaton) -> Vec<(Transition, &'a Automaton)> {
        g.transitions().filter_map(|t| self.attack_for(g, t).map(|f| (*t, f))).collect()
    }

    /// Checks every entry against `g`.
    pub fn validate_for(&self, g: &Automaton) -> Result<()> {
        let alphabet = g.alphabet();
        for (key, f) in &self.explicit {
            if !alphabet.sensor_attackable().contains(&key.event) {
                return Err(Error::InvalidPolicy(format!(
                    "transition ({}, {}, {}) carries an event that is not sensor-attackable",
                    key.src,
                    alphabet.name(key.event),
                    key.dst
                )));
            }
            if key.resolve(g).is_none() {
                return Err(Error::InvalidPolicy(format!(
                    "transition ({}, {}, {}) is not in the plant",
                    key.src,
                    alphabet.name(key.event),
                    key.dst
                )));
            }
            check_attack_automaton(g, f)?;
        }
        for (e, f) in &self.uniform {
            if !alphabet.sensor_attackable().contains(e) {
                return Err(Error::InvalidPolicy(format!("event `{}` is not sensor-attackable", alphabet.name(*e))));
            }
            check_attack_automaton(g, f)?;
        }
        Ok(())
    }

    /// Keeps only entries meaningful for `h`; dropped explicit transitions are returned.
    pub fn restrict_to(&self, h: &Automaton) -> (SensorAttackPolicy, Vec<TransitionRef>) {
        let mut kept = SensorAttackPolicy { explicit: BTreeMap::new(), uniform: self.uniform.clone() };
        let mut dropped = Vec::new();
        for (key, f) in &self.explicit {
            if key.resolve(h).is_some() {
                kept.explicit.insert(key.clone(), f.clone());
            } else {
                dropped.push(key.clone());
            }
        }
        (kept, dropped)
    }
}

fn check_attack_automaton(g: &Automaton, f: &Automaton) -> Result<()> {
    if f.alphabet() != g.alphabet() {
        return Err(Error::AlphabetMismatch);
    }
    if let Some(v) = f.validate().first() {
        return Err(Error::InvalidPolicy(format!("attack automaton: {v}")));
    }
    let observable = g.alphabet().observable();
    if let Some(t) = f.transitions().find(|t| t.label.event().is_some_and(|e| !observable.contains(&e))) {
        return Err(Error::InvalidPolicy(format!(
            "attack automaton uses unobservable event in {}",
            f.render_transition(t)
        )));
    }
    if !f.coreachable_states().contains(&f.initial()) || !f.reachable_states().iter().any(|q| f.is_marked(*q)) {
        return Err(Error::InvalidPolicy("attack automaton marks the empty language".into()));
    }
    Ok(())
}

/// Per-step observation language: either the event itself or an attack automaton.
#[derive(Clone, Copy, Debug)]
pub enum StepLanguage<'a> {
    Exact(EventId),
    Attack(&'a Automaton),
}

impl StepLanguage<'_> {
    /// Observable strings of this step up to `depth`, and whether longer ones exist.
    pub fn observations(&self, g: &Automaton, depth: usize) -> Bounded<BTreeSet<Word>> {
        match self {
            StepLanguage::Exact(e) => {
                let w = g.alphabet().project(&[*e]);
                Bounded { truncated: w.len() > depth, value: [w].into_iter().filter(|w| w.len() <= depth).collect() }
            }
            StepLanguage::Attack(f) => {
                let projected = f.project();
                Bounded {
                    value: projected.enumerate_language(depth, true),
                    truncated: projected.longest_marked_word().is_none_or(|m| m > depth),
                }
            }
        }
    }
}

/// The plant run of `s` as (transition, step language) pairs.
pub fn step_languages<'a>(
    s: &[EventId],
    g: &'a Automaton,
    policy: &'a SensorAttackPolicy,
) -> Result<Vec<(Transition, StepLanguage<'a>)>> {
    let mut q = g.initial();
    let mut out = Vec::with_capacity(s.len());
    for (k, e) in s.iter().enumerate() {
        let next = g.delta(q, *e).ok_or_else(|| Error::NotInLanguage(g.alphabet().render_word(&s[..=k])))?;
        let t = Transition { src: q, label: Label::Event(*e), dst: next };
        let lang = match policy.attack_for(g, &t) {
            Some(f) => StepLanguage::Attack(f),
            None => StepLanguage::Exact(*e),
        };
        out.push((t, lang));
        q = next;
    }
    Ok(out)
}

/// Automaton marking Θ^π(s): the concatenation of the per-step languages.
pub fn theta_automaton(s: &[EventId], g: &Automaton, policy: &SensorAttackPolicy) -> Result<Automaton> {
    if !g.is_deterministic() {
        return Err(Error::InvalidAutomaton("plant must be deterministic".into()));
    }
    let steps = step_languages(s, g, policy)?;
    let mut names: Vec<String> = (0..=steps.len()).map(|k| format!("c{k}")).collect();
    let mut transitions = Vec::new();
    for (k, (t, lang)) in steps.iter().enumerate() {
        match lang {
            StepLanguage::Exact(_) => transitions.push(Transition { src: k, label: t.label, dst: k + 1 }),
            StepLanguage::Attack(f) => {
                let base = names.len();
                names.extend(f.state_names().iter().map(|n| format!("{}/{n}", k + 1)));
                transitions.push(Transition { src: k, label: Label::Eps, dst: base + f.initial() });
                transitions.extend(f.transitions().map(|ft| Transition {
                    src: base + ft.src,
                    label: ft.label,
                    dst: base + ft.dst,
                }));
                transitions.extend(f.marked().iter().map(|m| Transition {
                    src: base + m,
                    label: Label::Eps,
                    dst: k + 1,
                }));
            }
        }
    }
    Ok(Automaton::from_parts(
        g.alphabet().clone(),
        g.alphabet().all(),
        names,
        0,
        BTreeSet::from([steps.len()]),
        transitions,
    ))
}

/// Concatenates per-step languages, dropping anything longer than `depth`.
fn concat_bounded(parts: impl IntoIterator<Item = BTreeSet<Word>>, depth: usize) -> BTreeSet<Word> {
    let mut acc = BTreeSet::from([Word::new()]);
    for part in parts {
        let mut next = BTreeSet::new();
        for prefix in &acc {
            for w in &part {
                if prefix.len() + w.len() <= depth {
                    let mut joined = prefix.clone();
                    joined.extend_from_slice(w);
                    next.insert(joined);
                }
            }
        }
        acc = next;
    }
    acc
}

/// Φ^π(s) restricted to observations of length at most `depth`.
pub fn phi_enumerate(
    s: &[EventId],
    g: &Automaton,
    policy: &SensorAttackPolicy,
    depth: usize,
) -> Result<Bounded<BTreeSet<Word>>> {
    let steps = step_languages(s, g, policy)?;
    let mut truncated = false;
    let mut parts = Vec::with_capacity(steps.len());
    let mut longest_total = Some(0usize);
    for (_, lang) in &steps {
        let obs = lang.observations(g, depth);
        let longest = obs.value.iter().map(Vec::len).max().unwrap_or(0);
        longest_total = match (longest_total, obs.truncated) {
            (Some(total), false) => Some(total + longest),
            _ => None,
        };
        parts.push(obs.value);
    }
    if longest_total.is_none_or(|m| m > depth) {
        truncated = true;
    }
    Ok(Bounded { value: concat_bounded(parts, depth), truncated })
}

/// Longest observation any single plant step can produce (`None` if unbounded).
pub fn max_step_observation(g: &Automaton, policy: &SensorAttackPolicy) -> Option<usize> {
    let mut longest =
        usize::from(g.transitions().any(|t| t.label.event().is_some_and(|e| g.alphabet().is_observable(e))));
    for (_, f) in policy.attacked_transitions(g) {
        longest = longest.max(f.project().longest_marked_word()?);
    }
    Some(longest)
}

/// Δ(γ): every control an actuator attacker can turn γ into.
pub fn delta_control(control: &Control, attackable: &EventSet) -> BTreeSet<Control> {
    let fixed: Control = control.difference(attackable).copied().collect();
    let pool: Vec<EventId> = attackable.iter().copied().collect();
    assert!(pool.len() < 32, "too many actuator-attackable events to enumerate");
    (0u32..(1 << pool.len()))
        .map(|mask| {
            let mut c = fixed.clone();
            c.extend(pool.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, e)| *e));
            c
        })
        .collect()
}

/// Anything that issues a control for an (attacked) observation.
pub trait ControlPolicy {
    fn control(&self, observation: &[EventId]) -> Control;

    /// The estimate-based representation, when the policy has one.
    fn as_estimate_based(&self) -> Option<&crate::synthesis::Supervisor> {
        None
    }
}

/// S^a(t) = Δ(S(t)).
pub fn attacked_commands(sup: &dyn ControlPolicy, t: &[EventId], attackable: &EventSet) -> BTreeSet<Control> {
    delta_control(&sup.control(t), attackable)
}

/// Observation-based sensor attack: an attack-context automaton SA over Σ_o and ω(z, σ).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationAttackStrategy {
    sa: Automaton,
    omega: BTreeMap<(String, EventId), Automaton>,
}

impl ObservationAttackStrategy {
    pub fn new(sa: Automaton) -> Self {
        let observable = sa.alphabet().observable().clone();
        ObservationAttackStrategy { sa: sa.with_events(observable), omega: BTreeMap::new() }
    }

    pub fn insert(&mut self, z: &str, event: EventId, attack: Automaton) -> &mut Self {
        self.omega.insert((z.to_string(), event), attack);
        self
    }

    pub fn context(&self) -> &Automaton {
        &self.sa
    }

    pub fn omega(&self) -> &BTreeMap<(String, EventId), Automaton> {
        &self.omega
    }

    /// ω(z, σ); `None` means the observation is passed through unchanged.
    pub fn attack_at(&self, z: StateId, event: EventId) -> Option<&Automaton> {
        if !self.sa.alphabet().sensor_attackable().contains(&event) {
            return None;
        }
        self.omega.get(&(self.sa.state_name(z).to_string(), event))
    }

    pub fn validate_for(&self, g: &Automaton) -> Result<()> {
        if self.sa.alphabet() != g.alphabet() {
            return Err(Error::AlphabetMismatch);
        }
        if let Some(v) = self.sa.validate().first() {
            return Err(Error::InvalidPolicy(format!("attack context automaton: {v}")));
        }
        if !self.sa.is_deterministic() {
            return Err(Error::InvalidPolicy("attack context automaton must be deterministic".into()));
        }
        for ((z, e), f) in &self.omega {
            if self.sa.state_id(z).is_none() {
                return Err(Error::InvalidPolicy(format!("ω refers to unknown context state `{z}`")));
            }
            if !g.alphabet().sensor_attackable().contains(e) {
                return Err(Error::InvalidPolicy(format!(
                    "ω defined for event `{}` which is not sensor-attackable",
                    g.alphabet().name(*e)
                )));
            }
            check_attack_automaton(g, f)?;
        }
        Ok(())
    }

    /// Checks P(L(G)) ⊆ L(SA) exactly; returns a witness observation on failure.
    pub fn uncovered_observation(&self, g: &Automaton) -> Option<Word> {
        let observer = g.project().determinize();
        let start = (observer.initial(), self.sa.initial());
        let mut seen = BTreeMap::from([(start, Word::new())]);
        let mut queue = VecDeque::from([start]);
        while let Some((x, z)) = queue.pop_front() {
            let word = seen[&(x, z)].clone();
            for (e, x2) in observer.outgoing_events(x) {
                let mut w = word.clone();
                w.push(e);
                let Some(z2) = self.sa.delta(z, e) else {
                    return Some(w);
                };
                if let std::collections::btree_map::Entry::Vacant(v) = seen.entry((x2, z2)) {
                    v.insert(w);
                    queue.push_back((x2, z2));
                }
            }
        }
        None
    }
}

/// Φ^ω(t) restricted to observations of length at most `depth`.
pub fn phi_omega(t: &[EventId], strategy: &ObservationAttackStrategy, depth: usize) -> Result<Bounded<BTreeSet<Word>>> {
    let sa = strategy.context();
    let mut z = sa.initial();
    let mut parts = Vec::with_capacity(t.len());
    let mut truncated = false;
    let mut total = Some(0usize);
    for (k, e) in t.iter().enumerate() {
        let lang = match strategy.attack_at(z, *e) {
            Some(f) => StepLanguage::Attack(f),
            None => StepLanguage::Exact(*e),
        };
        let obs = lang.observations(sa, depth);
        let longest = obs.value.iter().map(Vec::len).max().unwrap_or(0);
        total = match (total, obs.truncated) {
            (Some(acc), false) => Some(acc + longest),
            _ => None,
        };
        parts.push(obs.value);
        z = sa
            .delta(z, *e)
            .ok_or_else(|| Error::ContextNotCovering { witness: sa.alphabet().render_word(&t[..=k]) })?;
    }
    if total.is_none_or(|m| m > depth) {
        truncated = true;
    }
    Ok(Bounded { value: concat_bounded(parts, depth), truncated })
}

/// G̃ = G ∥ SA with the equivalent transition-based policy π̃.
#[derive(Clone, Debug)]
pub struct ConvertedAttack {
    pub product: Product,
    pub policy: SensorAttackPolicy,
}

/// Rewrites an observation-based attack as a transition-based one on G ∥ SA.
pub fn convert_observation_based(g: &Automaton, strategy: &ObservationAttackStrategy) -> Result<ConvertedAttack> {
    strategy.validate_for(g)?;
    if let Some(w) = strategy.uncovered_observation(g) {
        return Err(Error::ContextNotCovering { witness: g.alphabet().render_word(&w) });
    }
    let product = g.parallel_compose(strategy.context())?;
    let tilde = &product.automaton;
    let mut policy = SensorAttackPolicy::new();
    for t in tilde.transitions() {
        let Some(e) = t.label.event() else { continue };
        let z = product.pairs[t.src].1;
        if let Some(f) = strategy.attack_at(z, e) {
            policy.insert_transition(TransitionRef::of(tilde, t).expect("labelled"), f.clone());
        }
    }
    Ok(ConvertedAttack { product, policy })
}
