//! Attack-aware state estimation.
//!
//! Every attacked transition is replaced by its attack automaton (glued in
//! with ε-moves), unobservable events are erased, and the result is
//! determinized into the CA-observer. Injected states are named
//! `<k>/<state>` where `k` is the 1-based position of the replaced transition
//! in δ^a and `<state>` the state's name inside the attack automaton.

use std::collections::BTreeSet;

use crate::attack::SensorAttackPolicy;
use crate::automaton::{Automaton, EventId, Label, StateId, StateSet, Transition};
use crate::error::{Error, Result};

/// Splices `f` in place of transition `tr`, naming the copied states `<prefix>/<name>`.
///
/// The copied states are appended after the existing ones, in `f`'s order.
pub fn replace_transition(a: &Automaton, tr: &Transition, f: &Automaton, prefix: &str) -> Result<Automaton> {
    if !a.has_transition(tr) {
        return Err(Error::UnknownTransition(format!("#{} -> #{}", tr.src, tr.dst)));
    }
    if f.alphabet() != a.alphabet() {
        return Err(Error::AlphabetMismatch);
    }
    let base = a.num_states();
    let mut names = a.state_names().to_vec();
    names.extend(f.state_names().iter().map(|n| format!("{prefix}/{n}")));
    let mut transitions: Vec<Transition> = a.transitions().filter(|t| *t != tr).copied().collect();
    transitions.extend(f.transitions().map(|t| Transition { src: base + t.src, label: t.label, dst: base + t.dst }));
    transitions.push(Transition { src: tr.src, label: Label::Eps, dst: base + f.initial() });
    transitions.extend(f.marked().iter().map(|m| Transition { src: base + m, label: Label::Eps, dst: tr.dst }));
    Ok(Automaton::from_parts(
        a.alphabet().clone(),
        a.events().union(f.events()).copied().collect(),
        names,
        a.initial(),
        a.marked().clone(),
        transitions,
    ))
}

/// Where an injected state came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    /// 1-based index of the replaced transition in δ^a.
    pub index: usize,
    /// The replaced plant transition.
    pub transition: Transition,
    /// Name of the state inside the attack automaton.
    pub attack_state: String,
}

/// G⋄: the plant with every attacked transition replaced. Plant states keep their ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiamondAutomaton {
    pub automaton: Automaton,
    pub num_original: usize,
    /// Indexed by `state - num_original`.
    pub provenance: Vec<Provenance>,
}

impl DiamondAutomaton {
    pub fn is_original(&self, q: StateId) -> bool {
        q < self.num_original
    }

    pub fn original_states(&self) -> std::ops::Range<StateId> {
        0..self.num_original
    }

    pub fn injected_states(&self) -> std::ops::Range<StateId> {
        self.num_original..self.automaton.num_states()
    }
}

/// Builds G⋄ with marked set exactly the plant states.
pub fn build_diamond(g: &Automaton, policy: &SensorAttackPolicy) -> Result<DiamondAutomaton> {
    g.ensure_valid()?;
    policy.validate_for(g)?;
    let attacked = policy.attacked_transitions(g);
    let mut current = g.with_marked(g.states().collect());
    let mut provenance = Vec::new();
    for (k, (tr, f)) in attacked.iter().enumerate() {
        current = replace_transition(&current, tr, f, &(k + 1).to_string())?;
        provenance.extend(f.state_names().iter().map(|n| Provenance {
            index: k + 1,
            transition: *tr,
            attack_state: n.clone(),
        }));
    }
    Ok(DiamondAutomaton { automaton: current, num_original: g.num_states(), provenance })
}

/// G⋄_ε: unobservable labels become ε.
pub fn erase_unobservable(d: &DiamondAutomaton) -> DiamondAutomaton {
    DiamondAutomaton {
        automaton: d.automaton.project(),
        num_original: d.num_original,
        provenance: d.provenance.clone(),
    }
}

/// Set of plant states consistent with an observation.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateEstimate {
    pub states: StateSet,
}

impl StateEstimate {
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn names<'a>(&'a self, plant: &'a Automaton) -> impl Iterator<Item = &'a str> + 'a {
        self.states.iter().map(|q| plant.state_name(*q))
    }

    pub fn render(&self, plant: &Automaton) -> String {
        plant.render_states(&self.states)
    }
}

/// The CA-observer G⋄_obs together with the plant projection x ∩ Q of each state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CAObserver {
    pub observer: Automaton,
    pub subsets: Vec<StateSet>,
    pub plant_projection: Vec<StateSet>,
    pub diamond: DiamondAutomaton,
    pub plant: Automaton,
}

impl CAObserver {
    pub fn from_diamond(plant: &Automaton, diamond: DiamondAutomaton) -> Self {
        let erased = erase_unobservable(&diamond);
        let det = erased.automaton.subset_construction();
        let plant_projection: Vec<StateSet> =
            det.subsets.iter().map(|x| x.iter().copied().filter(|q| erased.is_original(*q)).collect()).collect();
        let observable = plant.alphabet().observable().clone();
        CAObserver {
            observer: det.automaton.with_events(observable),
            subsets: det.subsets,
            plant_projection,
            diamond: erased,
            plant: plant.clone(),
        }
    }

    pub fn initial(&self) -> StateId {
        self.observer.initial()
    }

    pub fn num_states(&self) -> usize {
        self.observer.num_states()
    }

    /// ξ(x0, t), if defined.
    pub fn state_after(&self, t: &[EventId]) -> Option<StateId> {
        self.advance(self.observer.initial(), t)
    }

    pub fn advance(&self, mut x: StateId, t: &[EventId]) -> Option<StateId> {
        for e in t {
            x = self.observer.delta(x, *e)?;
        }
        Some(x)
    }

    /// Marked observer states are those with a nonempty plant projection.
    pub fn is_marked(&self, x: StateId) -> bool {
        self.observer.is_marked(x)
    }

    pub fn estimate_at(&self, x: StateId) -> StateEstimate {
        StateEstimate { states: self.plant_projection[x].clone() }
    }

    pub fn state_name(&self, x: StateId) -> &str {
        self.observer.state_name(x)
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.observer.state_id(name)
    }
}

/// Runs the full estimator pipeline: G⋄, then G⋄_ε, then OBS(·).
pub fn build_ca_observer(g: &Automaton, policy: &SensorAttackPolicy) -> Result<CAObserver> {
    let diamond = build_diamond(g, policy)?;
    Ok(CAObserver::from_diamond(g, diamond))
}

/// SE(t) = ξ(x0, t) ∩ Q, or ∅ when t leaves the observer.
pub fn state_estimate(obs: &CAObserver, t: &[EventId]) -> StateEstimate {
    obs.state_after(t).map(|x| obs.estimate_at(x)).unwrap_or_default()
}

/// Projects an estimate over product states (q, z) onto plant states q.
pub fn lift_estimate(se: &StateEstimate, pairs: &[(StateId, StateId)]) -> StateEstimate {
    StateEstimate { states: se.states.iter().map(|y| pairs[*y].0).collect::<BTreeSet<_>>() }
}
