//! The CA-supervisor: a state-estimate-based control map realized on the
//! CA-observer of the specification automaton.

use std::collections::BTreeMap;

use crate::attack::{
    convert_observation_based, Control, ControlPolicy, ObservationAttackStrategy, SensorAttackPolicy, TransitionRef,
};
use crate::automaton::{Automaton, EventId, EventSet, StateId, Word};
use crate::error::{Error, Result};
use crate::estimation::{build_ca_observer, CAObserver, StateEstimate};

/// Estimate-based supervisor: a control per marked observer state, Σ_uc elsewhere.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Supervisor {
    observer: CAObserver,
    /// Specification state behind each state of the automaton the observer was built on.
    spec_state: Vec<StateId>,
    controls: BTreeMap<StateId, Control>,
    default_control: Control,
}

impl Supervisor {
    pub fn observer(&self) -> &CAObserver {
        &self.observer
    }

    pub fn default_control(&self) -> &Control {
        &self.default_control
    }

    pub fn controls(&self) -> &BTreeMap<StateId, Control> {
        &self.controls
    }

    /// Control issued while the observer sits in `x`.
    pub fn control_at(&self, x: StateId) -> &Control {
        self.controls.get(&x).unwrap_or(&self.default_control)
    }

    /// Overrides the control of a marked observer state; Σ_uc is always added.
    pub fn set_control(&mut self, x: StateId, control: Control) -> Result<()> {
        if !self.observer.is_marked(x) {
            return Err(Error::UnknownState(self.observer.state_name(x).to_string()));
        }
        let mut c = control;
        c.extend(self.default_control.iter().copied());
        self.controls.insert(x, c);
        Ok(())
    }

    /// Estimate over specification states for observer state `x`.
    pub fn estimate_at(&self, x: StateId) -> StateEstimate {
        StateEstimate { states: self.observer.plant_projection[x].iter().map(|q| self.spec_state[*q]).collect() }
    }

    /// Observer states that carry a control (those reached by Φ(L(H))).
    pub fn decision_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.controls.keys().copied()
    }
}

impl ControlPolicy for Supervisor {
    fn control(&self, observation: &[EventId]) -> Control {
        match self.observer.state_after(observation) {
            Some(x) => self.control_at(x).clone(),
            None => self.default_control.clone(),
        }
    }

    fn as_estimate_based(&self) -> Option<&Supervisor> {
        Some(self)
    }
}

/// A supervisor given as an explicit observation table (not estimate based).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TableSupervisor {
    pub table: BTreeMap<Word, Control>,
    pub default_control: Control,
}

impl ControlPolicy for TableSupervisor {
    fn control(&self, observation: &[EventId]) -> Control {
        self.table.get(observation).unwrap_or(&self.default_control).clone()
    }
}

/// η(SE): events that can leave Q_H from some state of the estimate.
pub fn disabled_set(se: &StateEstimate, g: &Automaton, h: &Automaton) -> Result<EventSet> {
    let emb =
        h.embedding_into(g).ok_or_else(|| Error::NotSubautomaton("specification state missing from plant".into()))?;
    let safe: std::collections::BTreeSet<StateId> = emb.iter().copied().collect();
    Ok(se
        .states
        .iter()
        .flat_map(|q| g.outgoing_events(emb[*q]))
        .filter(|(_, d)| !safe.contains(d))
        .map(|(e, _)| e)
        .collect())
}

fn estimate_controls(
    observer: &CAObserver,
    spec_state: &[StateId],
    g: &Automaton,
    h: &Automaton,
) -> Result<BTreeMap<StateId, Control>> {
    let all = g.alphabet().all();
    let uncontrollable = g.alphabet().uncontrollable();
    let mut controls = BTreeMap::new();
    for x in observer.observer.states().filter(|x| observer.is_marked(*x)) {
        let se = StateEstimate { states: observer.plant_projection[x].iter().map(|q| spec_state[*q]).collect() };
        let eta = disabled_set(&se, g, h)?;
        let mut control: Control = all.difference(&eta).copied().collect();
        control.extend(uncontrollable.iter().copied());
        controls.insert(x, control);
    }
    Ok(controls)
}

/// S_CA together with the policy entries dropped because their transitions lie outside H.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub supervisor: Supervisor,
    pub dropped_attacks: Vec<TransitionRef>,
}

/// Builds S_CA on the CA-observer of `h`.
pub fn synthesize_ca_supervisor(g: &Automaton, h: &Automaton, policy: &SensorAttackPolicy) -> Result<Synthesis> {
    if let Some(why) = h.subautomaton_mismatch(g) {
        return Err(Error::NotSubautomaton(why));
    }
    policy.validate_for(g)?;
    let (restricted, dropped_attacks) = policy.restrict_to(h);
    let observer = build_ca_observer(h, &restricted)?;
    let spec_state: Vec<StateId> = h.states().collect();
    let controls = estimate_controls(&observer, &spec_state, g, h)?;
    Ok(Synthesis {
        supervisor: Supervisor { observer, spec_state, controls, default_control: g.alphabet().uncontrollable() },
        dropped_attacks,
    })
}

/// Builds S̃_CA for an observation-based attack via H̃ = H ∥ SA.
pub fn synthesize_obs_based(g: &Automaton, h: &Automaton, strategy: &ObservationAttackStrategy) -> Result<Supervisor> {
    if let Some(why) = h.subautomaton_mismatch(g) {
        return Err(Error::NotSubautomaton(why));
    }
    let converted = convert_observation_based(h, strategy)?;
    let observer = build_ca_observer(&converted.product.automaton, &converted.policy)?;
    let spec_state: Vec<StateId> = converted.product.pairs.iter().map(|(q, _)| *q).collect();
    let controls = estimate_controls(&observer, &spec_state, g, h)?;
    Ok(Supervisor { observer, spec_state, controls, default_control: g.alphabet().uncontrollable() })
}

fn ensure_same_observer(s1: &Supervisor, s2: &Supervisor) -> Result<()> {
    if s1.observer.observer != s2.observer.observer || s1.spec_state != s2.spec_state {
        return Err(Error::ObserverMismatch);
    }
    Ok(())
}

/// Pointwise union of controls.
pub fn supervisor_union(s1: &Supervisor, s2: &Supervisor) -> Result<Supervisor> {
    ensure_same_observer(s1, s2)?;
    let mut out = s1.clone();
    for x in s2.decision_states() {
        out.controls.entry(x).or_default().extend(s2.control_at(x).iter().copied());
    }
    out.default_control.extend(s2.default_control.iter().copied());
    Ok(out)
}

/// Outcome of comparing two supervisors pointwise on Φ(L(H)).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Permissiveness {
    Equal,
    StrictlyLess,
    StrictlyGreater,
    Incomparable,
}

impl Permissiveness {
    /// S1 ≤ S2.
    pub fn is_at_most(self) -> bool {
        matches!(self, Permissiveness::Equal | Permissiveness::StrictlyLess)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Permissiveness::Equal => "equal",
            Permissiveness::StrictlyLess => "strictly-less",
            Permissiveness::StrictlyGreater => "strictly-greater",
            Permissiveness::Incomparable => "incomparable",
        }
    }
}

pub fn compare_permissiveness(s1: &Supervisor, s2: &Supervisor) -> Result<Permissiveness> {
    ensure_same_observer(s1, s2)?;
    let (mut le, mut ge) = (true, true);
    for x in s1.observer.observer.states().filter(|x| s1.observer.is_marked(*x)) {
        let (a, b) = (s1.control_at(x), s2.control_at(x));
        le &= a.is_subset(b);
        ge &= b.is_subset(a);
    }
    Ok(match (le, ge) {
        (true, true) => Permissiveness::Equal,
        (true, false) => Permissiveness::StrictlyLess,
        (false, true) => Permissiveness::StrictlyGreater,
        (false, false) => Permissiveness::Incomparable,
    })
}
