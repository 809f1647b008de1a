//! `.des` model documents: one TOML file per scenario holding the alphabet,
//! plant, specification and attacks.
//!
//! [`ModelDocument`] mirrors the file; [`Model`] is the resolved form used by
//! the analyses. Both directions are provided so that generated models (for
//! example the product plant of a converted attack) can be written back out.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::attack::{ObservationAttackStrategy, SensorAttackPolicy, TransitionRef};
use crate::automaton::{Automaton, AutomatonBuilder, EventAlphabet, EventSet, EventSpec, StateSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<AlphabetDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<AutomatonDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SpecDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sensor_attack: Vec<SensorAttackDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_attack: Option<ObservationAttackDoc>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetDoc {
    pub events: Vec<EventDoc>,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventDoc {
    pub name: String,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub controllable: bool,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub observable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub sensor_attackable: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub actuator_attackable: bool,
}

/// An automaton by state names. States are numbered in the order: `states`,
/// `initial`, then first appearance in `transitions`. Missing `marked` means all.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomatonDoc {
    pub initial: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marked: Option<Vec<String>>,
    #[serde(default)]
    pub transitions: Vec<[String; 3]>,
}

/// Either `safe_states` (H is the accessible part of G on those states) or an explicit automaton.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub automaton: Option<AutomatonDoc>,
}

/// Exactly one of `transition` and `event` is set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorAttackDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<[String; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    pub automaton: AutomatonDoc,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationAttackDoc {
    pub context: AutomatonDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub omega: Vec<OmegaDoc>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaDoc {
    pub state: String,
    pub event: String,
    pub automaton: AutomatonDoc,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a model document. Every name it refers to must be declared.
pub fn parse_model(text: &str) -> Result<ModelDocument> {
    let doc: ModelDocument = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        Error::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    if doc.alphabet.is_none() {
        return Err(Error::Parse { line: 1, column: 1, message: "missing alphabet".into() });
    }
    if doc.plant.is_none() {
        return Err(Error::Parse { line: 1, column: 1, message: "missing plant".into() });
    }
    Model::from_document(&doc)?;
    Ok(doc)
}

/// Canonical text of a document; `parse_model(&serialize_model(d)) == d` for valid documents.
pub fn serialize_model(doc: &ModelDocument) -> String {
    toml::to_string_pretty(doc).expect("model documents are always representable")
}

/// A resolved scenario.
#[derive(Clone, Debug)]
pub struct Model {
    pub name: Option<String>,
    pub alphabet: Arc<EventAlphabet>,
    pub plant: Automaton,
    pub spec: Option<Automaton>,
    pub policy: SensorAttackPolicy,
    pub strategy: Option<ObservationAttackStrategy>,
}

fn build_automaton(alphabet: &Arc<EventAlphabet>, doc: &AutomatonDoc, what: &str) -> Result<Automaton> {
    let mut b = AutomatonBuilder::new(alphabet.clone());
    for s in &doc.states {
        b.state(s);
    }
    b.initial(&doc.initial);
    for [src, e, dst] in &doc.transitions {
        b.edge(src, e, dst).map_err(|err| match err {
            Error::UnknownEvent(name) => {
                Error::Model(format!("undeclared event `{name}` in {what} transition ({src}, {e}, {dst})"))
            }
            other => other,
        })?;
    }
    match &doc.marked {
        None => {
            b.mark_all();
        }
        Some(names) => {
            for m in names {
                if !doc.states.contains(m)
                    && *m != doc.initial
                    && !doc.transitions.iter().any(|t| t[0] == *m || t[2] == *m)
                {
                    return Err(Error::Model(format!("marked state `{m}` of {what} is not a state")));
                }
                b.mark(m);
            }
        }
    }
    let a = b.build();
    if let Some(v) = a.validate().first() {
        return Err(Error::Model(format!("{what}: {v}")));
    }
    Ok(a)
}

fn automaton_doc(a: &Automaton) -> AutomatonDoc {
    let all_marked = a.marked().len() == a.num_states();
    AutomatonDoc {
        initial: a.state_name(a.initial()).to_string(),
        states: a.state_names().to_vec(),
        marked: (!all_marked).then(|| a.marked().iter().map(|q| a.state_name(*q).to_string()).collect()),
        transitions: a
            .transitions()
            .map(|t| {
                [
                    a.state_name(t.src).to_string(),
                    a.alphabet().render_label(t.label).replace('ε', "eps"),
                    a.state_name(t.dst).to_string(),
                ]
            })
            .collect(),
    }
}

fn lookup_event(alphabet: &EventAlphabet, name: &str, what: &str) -> Result<crate::automaton::EventId> {
    alphabet.id(name).ok_or_else(|| Error::Model(format!("undeclared event `{name}` in {what}")))
}

impl Model {
    pub fn from_document(doc: &ModelDocument) -> Result<Model> {
        let alphabet_doc = doc.alphabet.as_ref().ok_or_else(|| Error::Model("missing alphabet".into()))?;
        let specs = alphabet_doc
            .events
            .iter()
            .map(|e| {
                EventSpec::new(e.name.clone())
                    .controllable(e.controllable)
                    .observable(e.observable)
                    .sensor_attackable(e.sensor_attackable)
                    .actuator_attackable(e.actuator_attackable)
            })
            .collect();
        let alphabet = Arc::new(EventAlphabet::new(specs)?);
        let plant_doc = doc.plant.as_ref().ok_or_else(|| Error::Model("missing plant".into()))?;
        let plant = build_automaton(&alphabet, plant_doc, "plant")?;
        if !plant.is_deterministic() {
            return Err(Error::Model("plant must be deterministic and ε-free".into()));
        }

        let spec = match &doc.spec {
            None => None,
            Some(SpecDoc { safe_states: Some(safe), automaton: None }) => {
                let mut keep = StateSet::new();
                for s in safe {
                    keep.insert(
                        plant
                            .state_id(s)
                            .ok_or_else(|| Error::Model(format!("safe state `{s}` is not a plant state")))?,
                    );
                }
                if !keep.contains(&plant.initial()) {
                    return Err(Error::Model("the initial plant state must be safe".into()));
                }
                Some(plant.restrict(&keep).accessible())
            }
            Some(SpecDoc { safe_states: None, automaton: Some(a) }) => {
                let h = build_automaton(&alphabet, a, "spec")?;
                if let Some(why) = h.subautomaton_mismatch(&plant) {
                    return Err(Error::Model(format!("spec is not a sub-automaton of the plant: {why}")));
                }
                Some(h)
            }
            Some(_) => return Err(Error::Model("spec needs exactly one of `safe_states` and `automaton`".into())),
        };

        let mut policy = SensorAttackPolicy::new();
        for (i, entry) in doc.sensor_attack.iter().enumerate() {
            let what = format!("sensor_attack #{}", i + 1);
            let f = build_automaton(&alphabet, &entry.automaton, &what)?;
            match (&entry.transition, &entry.event) {
                (Some([src, e, dst]), None) => {
                    let event = lookup_event(&alphabet, e, &what)?;
                    policy.insert_transition(TransitionRef { src: src.clone(), event, dst: dst.clone() }, f);
                }
                (None, Some(e)) => {
                    policy.insert_event(lookup_event(&alphabet, e, &what)?, f);
                }
                _ => return Err(Error::Model(format!("{what} needs exactly one of `transition` and `event`"))),
            }
        }
        policy.validate_for(&plant).map_err(|e| Error::Model(e.to_string()))?;

        let strategy = match &doc.observation_attack {
            None => None,
            Some(oa) => {
                let sa = build_automaton(&alphabet, &oa.context, "observation_attack context")?;
                let mut strategy = ObservationAttackStrategy::new(sa);
                for (i, w) in oa.omega.iter().enumerate() {
                    let what = format!("omega #{}", i + 1);
                    let event = lookup_event(&alphabet, &w.event, &what)?;
                    let f = build_automaton(&alphabet, &w.automaton, &what)?;
                    strategy.insert(&w.state, event, f);
                }
                strategy.validate_for(&plant).map_err(|e| Error::Model(e.to_string()))?;
                Some(strategy)
            }
        };

        Ok(Model { name: doc.name.clone(), alphabet, plant, spec, policy, strategy })
    }

    /// Σ_c^a as declared by the alphabet flags.
    pub fn actuator_attackable(&self) -> EventSet {
        self.alphabet.actuator_attackable().clone()
    }

    /// The specification, or an error naming the missing section.
    pub fn require_spec(&self) -> Result<&Automaton> {
        self.spec.as_ref().ok_or_else(|| Error::Model("this operation needs a `spec` section".into()))
    }

    /// Writes the model back out; the spec is given explicitly.
    pub fn to_document(&self) -> ModelDocument {
        let al = &self.alphabet;
        let events = al
            .events()
            .map(|e| EventDoc {
                name: al.name(e).to_string(),
                controllable: al.is_controllable(e),
                observable: al.is_observable(e),
                sensor_attackable: al.sensor_attackable().contains(&e),
                actuator_attackable: al.actuator_attackable().contains(&e),
            })
            .collect();
        let mut sensor_attack: Vec<SensorAttackDoc> = self
            .policy
            .explicit()
            .iter()
            .map(|(tr, f)| SensorAttackDoc {
                transition: Some([tr.src.clone(), al.name(tr.event).to_string(), tr.dst.clone()]),
                event: None,
                automaton: automaton_doc(f),
            })
            .collect();
        sensor_attack.extend(self.policy.uniform().iter().map(|(e, f)| SensorAttackDoc {
            transition: None,
            event: Some(al.name(*e).to_string()),
            automaton: automaton_doc(f),
        }));
        ModelDocument {
            name: self.name.clone(),
            alphabet: Some(AlphabetDoc { events }),
            plant: Some(automaton_doc(&self.plant)),
            spec: self.spec.as_ref().map(|h| SpecDoc { safe_states: None, automaton: Some(automaton_doc(h)) }),
            sensor_attack,
            observation_attack: self.strategy.as_ref().map(|s| ObservationAttackDoc {
                context: automaton_doc(s.context()),
                omega: s
                    .omega()
                    .iter()
                    .map(|((z, e), f)| OmegaDoc {
                        state: z.clone(),
                        event: al.name(*e).to_string(),
                        automaton: automaton_doc(f),
                    })
                    .collect(),
            }),
        }
    }
}

/// Reads and resolves a model in one step.
pub fn load_model(text: &str) -> Result<Model> {
    Model::from_document(&parse_model(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
name = "toy"

[alphabet]
events = [
  { name = "a", actuator_attackable = true },
  { name = "b", sensor_attackable = true },
  { name = "u", controllable = false, observable = false },
]

[plant]
initial = "0"
transitions = [["0", "a", "1"], ["1", "b", "0"], ["1", "u", "2"]]

[spec]
safe_states = ["0", "1"]

[[sensor_attack]]
event = "b"
[sensor_attack.automaton]
initial = "p"
marked = ["q"]
transitions = [["p", "eps", "q"], ["p", "b", "q"]]
"#;

    #[test]
    fn parses_and_resolves() {
        let m = load_model(SMALL).unwrap();
        assert_eq!(m.plant.num_states(), 3);
        assert_eq!(m.spec.as_ref().unwrap().num_states(), 2);
        assert_eq!(m.alphabet.render_set(&m.actuator_attackable()), "{a}");
        assert_eq!(m.policy.attacked_transitions(&m.plant).len(), 1);
    }

    #[test]
    fn round_trips() {
        let doc = parse_model(SMALL).unwrap();
        assert_eq!(parse_model(&serialize_model(&doc)).unwrap(), doc);
        let regenerated = load_model(SMALL).unwrap().to_document();
        let again = parse_model(&serialize_model(&regenerated)).unwrap();
        assert_eq!(again, regenerated);
    }

    #[test]
    fn empty_document_is_missing_alphabet() {
        let err = parse_model("").unwrap_err();
        assert_eq!(err.to_string(), "1:1: missing alphabet");
    }

    #[test]
    fn undeclared_event_is_named() {
        let text = SMALL.replace(r#"["1", "b", "0"]"#, r#"["1", "gamma", "0"]"#);
        let err = parse_model(&text).unwrap_err().to_string();
        assert!(err.contains("undeclared event `gamma`"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_model("[alphabet]\nevents = [\n  { name = \"a\" \n") {
            Err(Error::Parse { line, .. }) => assert!(line >= 2),
            other => panic!("{other:?}"),
        }
        match parse_model("[alphabet]\nevents = []\ncolour = 1\n") {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!((line, column), (3, 1));
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_needs_one_form() {
        let text = SMALL.replace("safe_states = [\"0\", \"1\"]", "");
        assert!(matches!(parse_model(&text), Err(Error::Model(_))));
    }
}
