//! Closed-loop simulation of a supervised plant under joint attacks.
//!
//! Each step: the supervisor issues γ for the observation received so far,
//! the attacker delivers some γ_a ∈ Δ(γ), an event allowed by γ_a (or
//! uncontrollable) fires, and the attacker emits an observation fragment from
//! the attack language of the fired transition. The control is held until the
//! next event and re-evaluated on the extended observation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::{delta_control, Control, ControlPolicy, SensorAttackPolicy};
use crate::automaton::{Automaton, EventAlphabet, EventId, EventSet, Label, StateId, Transition, Word};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttackerKind {
    /// No actuator attack; the sensor reading is kept whenever the attack language allows it.
    None,
    /// Seeded uniform choices.
    Random,
    /// Every choice combination up to the step bound.
    Exhaustive,
}

impl AttackerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackerKind::None => "none",
            AttackerKind::Random => "random",
            AttackerKind::Exhaustive => "exhaustive",
        }
    }
}

impl std::str::FromStr for AttackerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttackerKind::None),
            "random" => Ok(AttackerKind::Random),
            "exhaustive" => Ok(AttackerKind::Exhaustive),
            other => Err(Error::InvalidPolicy(format!("unknown attacker `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub plant_event: EventId,
    pub issued: Control,
    pub received: Control,
    pub fragment: Word,
    /// Whether the plant string up to and including this step is in L(H).
    pub safe: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    StepBound,
    Deadlock,
    Violation,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub attacker: AttackerKind,
    pub seed: u64,
    /// Length bound used when sampling infinite attack languages.
    pub observation_cap: Option<usize>,
    pub steps: Vec<TraceStep>,
    pub stop: StopReason,
    /// Observer states visited, for estimate-based supervisors.
    pub observer_states: BTreeSet<StateId>,
}

impl Trace {
    pub fn plant_string(&self) -> Word {
        self.steps.iter().map(|s| s.plant_event).collect()
    }

    pub fn observation(&self) -> Word {
        self.steps.iter().flat_map(|s| s.fragment.iter().copied()).collect()
    }

    pub fn is_safe(&self) -> bool {
        self.steps.iter().all(|s| s.safe)
    }

    /// Line-oriented serialization; byte-identical for identical runs.
    pub fn serialize(&self, alphabet: &EventAlphabet) -> String {
        let mut out = String::new();
        let cap = self.observation_cap.map_or("none".to_string(), |c| c.to_string());
        writeln!(
            out,
            "# desguard-trace v1 attacker={} seed={} observation_cap={}",
            self.attacker.as_str(),
            self.seed,
            cap
        )
        .unwrap();
        out.push_str("# step,plant_event,issued_control,received_control,observation_fragment,safe\n");
        for (i, s) in self.steps.iter().enumerate() {
            let fragment = if s.fragment.is_empty() {
                "eps".to_string()
            } else {
                s.fragment.iter().map(|e| alphabet.name(*e)).collect::<Vec<_>>().join(" ")
            };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                i,
                alphabet.name(s.plant_event),
                alphabet.render_set(&s.issued),
                alphabet.render_set(&s.received),
                fragment,
                s.safe
            )
            .unwrap();
        }
        let stop = match self.stop {
            StopReason::StepBound => "step-bound",
            StopReason::Deadlock => "deadlock",
            StopReason::Violation => "violation",
        };
        writeln!(out, "# end stop={} safe={}", stop, self.is_safe()).unwrap();
        out
    }
}

/// Immutable closed-loop setup shared by all trials.
pub struct Simulator<'a> {
    g: &'a Automaton,
    h: &'a Automaton,
    sup: &'a (dyn ControlPolicy + Sync),
    actuator: EventSet,
    uncontrollable: EventSet,
    /// Attack-language strings per attacked transition, shortlex ordered.
    fragments: BTreeMap<Transition, Vec<Word>>,
    cap: Option<usize>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        g: &'a Automaton,
        h: &'a Automaton,
        sup: &'a (dyn ControlPolicy + Sync),
        policy: &SensorAttackPolicy,
        actuator: &EventSet,
    ) -> Result<Self> {
        if !g.is_deterministic() {
            return Err(Error::InvalidAutomaton("plant must be deterministic".into()));
        }
        if h.alphabet() != g.alphabet() {
            return Err(Error::AlphabetMismatch);
        }
        policy.validate_for(g)?;
        let mut fragments = BTreeMap::new();
        let mut cap = None;
        for (tr, f) in policy.attacked_transitions(g) {
            let f = f.project();
            let len = match f.longest_marked_word() {
                Some(n) => n,
                None => {
                    let c = 2 * f.num_states();
                    cap = Some(cap.map_or(c, |old: usize| old.max(c)));
                    c
                }
            };
            let mut words: Vec<Word> = f.enumerate_language(len, true).into_iter().collect();
            words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
            fragments.insert(tr, words);
        }
        Ok(Simulator {
            g,
            h,
            sup,
            actuator: actuator.clone(),
            uncontrollable: g.alphabet().uncontrollable(),
            fragments,
            cap,
        })
    }

    fn enabled(&self, q: StateId, received: &Control) -> Vec<(EventId, StateId)> {
        self.g.outgoing_events(q).filter(|(e, _)| received.contains(e) || self.uncontrollable.contains(e)).collect()
    }

    fn fragment_choices(&self, tr: &Transition) -> Vec<Word> {
        match self.fragments.get(tr) {
            Some(words) => words.clone(),
            None => {
                let e = tr.label.event().expect("plant transitions are labelled");
                vec![self.g.alphabet().project(&[e])]
            }
        }
    }

    fn observer_state(&self, t: &[EventId]) -> Option<StateId> {
        self.sup.as_estimate_based().and_then(|s| s.observer().state_after(t))
    }

    /// One closed-loop run. `Exhaustive` is treated as `Random` here; use [`Simulator::exhaustive`].
    pub fn simulate(&self, attacker: AttackerKind, max_steps: usize, seed: u64) -> Trace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = self.g.initial();
        let mut s = Word::new();
        let mut t = Word::new();
        let mut trace = Trace {
            attacker,
            seed,
            observation_cap: self.cap,
            steps: Vec::new(),
            stop: StopReason::StepBound,
            observer_states: BTreeSet::new(),
        };
        trace.observer_states.extend(self.observer_state(&t));
        for _ in 0..max_steps {
            let issued = self.sup.control(&t);
            let received = match attacker {
                AttackerKind::None => issued.clone(),
                _ => {
                    let options: Vec<Control> = delta_control(&issued, &self.actuator).into_iter().collect();
                    options[rng.gen_range(0..options.len())].clone()
                }
            };
            let enabled = self.enabled(q, &received);
            if enabled.is_empty() {
                trace.stop = StopReason::Deadlock;
                break;
            }
            let (e, q2) = enabled[rng.gen_range(0..enabled.len())];
            let tr = Transition { src: q, label: Label::Event(e), dst: q2 };
            let choices = self.fragment_choices(&tr);
            let fragment = match attacker {
                AttackerKind::None => {
                    let honest = self.g.alphabet().project(&[e]);
                    if choices.contains(&honest) {
                        honest
                    } else {
                        choices[0].clone()
                    }
                }
                _ => choices[rng.gen_range(0..choices.len())].clone(),
            };
            s.push(e);
            t.extend(fragment.iter().copied());
            q = q2;
            trace.observer_states.extend(self.observer_state(&t));
            let safe = self.h.generates(&s);
            trace.steps.push(TraceStep { plant_event: e, issued, received, fragment, safe });
            if !safe {
                trace.stop = StopReason::Violation;
                break;
            }
        }
        trace
    }

    /// Explores every attacker and event choice for up to `depth` steps.
    pub fn exhaustive(&self, depth: usize) -> ExhaustiveReport {
        let mut report = ExhaustiveReport::default();
        let mut path = Vec::new();
        let mut visited = BTreeSet::new();
        visited.extend(self.observer_state(&[]));
        self.explore(self.g.initial(), &mut Word::new(), &mut Word::new(), &mut path, depth, &mut report, &mut visited);
        report.observer_states = visited;
        report
    }

    #[allow(clippy::too_many_arguments)]
    fn explore(
        &self,
        q: StateId,
        s: &mut Word,
        t: &mut Word,
        path: &mut Vec<TraceStep>,
        remaining: usize,
        report: &mut ExhaustiveReport,
        visited: &mut BTreeSet<StateId>,
    ) {
        if remaining == 0 {
            report.runs += 1;
            return;
        }
        let issued = self.sup.control(t);
        let mut progressed = false;
        for received in delta_control(&issued, &self.actuator) {
            for (e, q2) in self.enabled(q, &received) {
                let tr = Transition { src: q, label: Label::Event(e), dst: q2 };
                for fragment in self.fragment_choices(&tr) {
                    progressed = true;
                    s.push(e);
                    let mark = t.len();
                    t.extend(fragment.iter().copied());
                    visited.extend(self.observer_state(t));
                    let safe = self.h.generates(s);
                    path.push(TraceStep {
                        plant_event: e,
                        issued: issued.clone(),
                        received: received.clone(),
                        fragment,
                        safe,
                    });
                    if safe {
                        self.explore(q2, s, t, path, remaining - 1, report, visited);
                    } else {
                        report.runs += 1;
                        report.violations.push(Trace {
                            attacker: AttackerKind::Exhaustive,
                            seed: 0,
                            observation_cap: self.cap,
                            steps: path.clone(),
                            stop: StopReason::Violation,
                            observer_states: BTreeSet::new(),
                        });
                    }
                    path.pop();
                    t.truncate(mark);
                    s.pop();
                }
            }
        }
        if !progressed {
            report.runs += 1;
        }
    }

    /// Aggregates `trials` runs with seeds `base_seed + i`, executed in parallel.
    ///
    /// With the exhaustive attacker a single exhaustive search of depth `max_steps` is run.
    pub fn run_campaign(
        &self,
        attacker: AttackerKind,
        trials: usize,
        max_steps: usize,
        base_seed: u64,
    ) -> CampaignReport {
        if attacker == AttackerKind::Exhaustive {
            let ex = self.exhaustive(max_steps);
            let distinct: BTreeSet<Word> = ex.violations.iter().map(Trace::plant_string).collect();
            return CampaignReport {
                attacker,
                trials: ex.runs,
                violations: ex.violations.len(),
                distinct_violating_strings: distinct,
                first_violation: ex.violations.into_iter().next(),
                observer_states: ex.observer_states,
                total_steps: 0,
            };
        }
        let traces: Vec<Trace> = (0..trials.max(1))
            .into_par_iter()
            .map(|i| self.simulate(attacker, max_steps, base_seed.wrapping_add(i as u64)))
            .collect();
        let mut report = CampaignReport {
            attacker,
            trials: traces.len(),
            violations: 0,
            distinct_violating_strings: BTreeSet::new(),
            first_violation: None,
            observer_states: BTreeSet::new(),
            total_steps: 0,
        };
        for trace in traces {
            report.total_steps += trace.steps.len();
            report.observer_states.extend(trace.observer_states.iter().copied());
            if !trace.is_safe() {
                report.violations += 1;
                report.distinct_violating_strings.insert(trace.plant_string());
                if report.first_violation.is_none() {
                    report.first_violation = Some(trace);
                }
            }
        }
        report
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExhaustiveReport {
    /// Maximal explored runs (step bound, deadlock or violation).
    pub runs: usize,
    pub violations: Vec<Trace>,
    pub observer_states: BTreeSet<StateId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CampaignReport {
    pub attacker: AttackerKind,
    pub trials: usize,
    pub violations: usize,
    pub distinct_violating_strings: BTreeSet<Word>,
    pub first_violation: Option<Trace>,
    pub observer_states: BTreeSet<StateId>,
    pub total_steps: usize,
}

/// Convenience wrapper around [`Simulator::simulate`].
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    g: &Automaton,
    h: &Automaton,
    sup: &(dyn ControlPolicy + Sync),
    policy: &SensorAttackPolicy,
    actuator: &EventSet,
    attacker: AttackerKind,
    max_steps: usize,
    seed: u64,
) -> Result<Trace> {
    Ok(Simulator::new(g, h, sup, policy, actuator)?.simulate(attacker, max_steps, seed))
}

/// Convenience wrapper around [`Simulator::run_campaign`].
#[allow(clippy::too_many_arguments)]
pub fn run_campaign(
    g: &Automaton,
    h: &Automaton,
    sup: &(dyn ControlPolicy + Sync),
    policy: &SensorAttackPolicy,
    actuator: &EventSet,
    attacker: AttackerKind,
    trials: usize,
    max_steps: usize,
    base_seed: u64,
) -> Result<CampaignReport> {
    Ok(Simulator::new(g, h, sup, policy, actuator)?.run_campaign(attacker, trials, max_steps, base_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::TransitionRef;
    use crate::automaton::fixtures::*;
    use crate::synthesis::synthesize_ca_supervisor;
    use crate::verification::brute_force_large_language;
    use std::sync::Arc;

    fn example_policy(al: &Arc<EventAlphabet>) -> SensorAttackPolicy {
        let mut p = SensorAttackPolicy::new();
        p.insert_transition(
            TransitionRef { src: "2".into(), event: al.id("lambda").unwrap(), dst: "3".into() },
            f_tr1(al),
        );
        p.insert_transition(TransitionRef { src: "3".into(), event: al.id("mu").unwrap(), dst: "1".into() }, f_tr2(al));
        p
    }

    #[test]
    fn case2_runs_stay_safe_and_inside_large_language() {
        let al = greek();
        let (g, h, p) = (fig1(&al), spec_h(&al), example_policy(&al));
        let sup = synthesize_ca_supervisor(&g, &h, &p).unwrap().supervisor;
        let beta = al.parse_set("beta").unwrap();
        let sim = Simulator::new(&g, &h, &sup, &p, &beta).unwrap();
        let la = brute_force_large_language(&g, &sup, &p, &beta, 8).unwrap();
        for seed in 0..40 {
            let trace = sim.simulate(AttackerKind::Random, 8, seed);
            assert!(trace.is_safe());
            assert!(la.contains(&trace.plant_string()));
            for step in &trace.steps {
                assert!(delta_control(&step.issued, &beta).contains(&step.received));
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let al = greek();
        let (g, h, p) = (fig1(&al), spec_h(&al), example_policy(&al));
        let sup = synthesize_ca_supervisor(&g, &h, &p).unwrap().supervisor;
        let beta = al.parse_set("beta").unwrap();
        let sim = Simulator::new(&g, &h, &sup, &p, &beta).unwrap();
        let a = sim.simulate(AttackerKind::Random, 30, 7).serialize(&al);
        let b = sim.simulate(AttackerKind::Random, 30, 7).serialize(&al);
        assert_eq!(a, b);
        let campaign = sim.run_campaign(AttackerKind::Random, 1, 30, 7);
        assert_eq!(campaign.trials, 1);
        assert_eq!(campaign.total_steps, sim.simulate(AttackerKind::Random, 30, 7).steps.len());
    }

    #[test]
    fn exhaustive_finds_alpha_alpha_in_case1() {
        let al = greek();
        let (g, h, p) = (fig1(&al), spec_h(&al), example_policy(&al));
        let sup = synthesize_ca_supervisor(&g, &h, &p).unwrap().supervisor;
        let both = al.parse_set("alpha beta").unwrap();
        let report = Simulator::new(&g, &h, &sup, &p, &both).unwrap().exhaustive(2);
        let strings: BTreeSet<Word> = report.violations.iter().map(Trace::plant_string).collect();
        assert_eq!(strings, BTreeSet::from([word(&al, "alpha alpha")]));
    }

    #[test]
    fn honest_attacker_without_attacks_is_classical() {
        let al = greek();
        let (g, h) = (fig1(&al), spec_h(&al));
        let p = SensorAttackPolicy::new();
        let sup = synthesize_ca_supervisor(&g, &h, &p).unwrap().supervisor;
        let trace = simulate(&g, &h, &sup, &p, &EventSet::new(), AttackerKind::None, 12, 3).unwrap();
        assert!(trace.is_safe());
        assert_eq!(trace.plant_string(), trace.observation());
        assert_eq!(trace.steps.len(), 12);
    }
}
