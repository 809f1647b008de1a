use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use desguard::attack::{convert_observation_based, SensorAttackPolicy};
use desguard::automaton::{Automaton, EventAlphabet, EventId, EventSet, Word};
use desguard::dot::export_dot;
use desguard::estimation::{build_ca_observer, build_diamond, lift_estimate, state_estimate, CAObserver};
use desguard::model::{load_model, serialize_model, Model};
use desguard::simulation::{AttackerKind, Simulator};
use desguard::synthesis::{synthesize_ca_supervisor, synthesize_obs_based, Supervisor};
use desguard::verification::{
    check_ca_controllability, check_ca_observability_bounded, default_depth, verify_large_language_equals, Status,
    Verdict,
};

#[derive(Parser)]
#[command(
    name = "desguard",
    version,
    about = "Supervisory control of discrete event systems under sensor and actuator attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model file (.des)
    model: PathBuf,
    /// Machine-readable JSON output
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct Actuator {
    /// Override the actuator-attackable events, e.g. `alpha,beta` (empty string for none)
    #[arg(long = "actuator-attack", value_name = "EVENTS")]
    actuator_attack: Option<String>,
}

#[derive(Args)]
struct Mode {
    /// Use the model's observation-based attack instead of its transition-based policy
    #[arg(long = "observation-attack")]
    observation_attack: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attacker {
    None,
    Random,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum DotTarget {
    Plant,
    Spec,
    Diamond,
    Observer,
}

#[derive(Subcommand)]
enum Command {
    /// Build the CA-observer of the plant and list its states
    Observer {
        #[command(flatten)]
        common: Common,
        /// Print DOT instead of the state listing
        #[arg(long)]
        dot: bool,
    },
    /// Print the state estimate after an observation
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Observed string, e.g. "alpha lambda mu"
        #[arg(long)]
        obs: String,
        #[command(flatten)]
        mode: Mode,
    },
    /// Decide CA-controllability of the specification
    CheckControllability {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        actuator: Actuator,
    },
    /// Check CA-observability of the specification up to a string length
    CheckObservability {
        #[command(flatten)]
        common: Common,
        /// Length bound for sσ (default 2·(observer states + plant states))
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Synthesize the maximally permissive estimate-based supervisor and print its table
    Synthesize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mode: Mode,
    },
    /// Decide whether the supervised plant under attack generates exactly the specification
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        actuator: Actuator,
        #[command(flatten)]
        mode: Mode,
    },
    /// Run closed-loop attacked simulations against the synthesized supervisor
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        actuator: Actuator,
        #[command(flatten)]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long = "max-steps", default_value_t = 20)]
        max_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Attacker::Random)]
        attacker: Attacker,
        /// Print the trace of the first trial (or of the first violation)
        #[arg(long)]
        trace: bool,
    },
    /// Rewrite the observation-based attack as a transition-based one on the product plant
    ConvertObs {
        #[command(flatten)]
        common: Common,
    },
    /// Export an automaton of the model in DOT
    ExportDot {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = DotTarget::Plant)]
        what: DotTarget,
    },
}

/// The plant, specification, attack policy and supervisor a command works on.
struct Scenario {
    plant: Automaton,
    spec: Automaton,
    policy: SensorAttackPolicy,
    supervisor: Supervisor,
}

fn scenario(model: &Model, observation_attack: bool) -> Result<Scenario> {
    let h = model.require_spec()?;
    if observation_attack {
        let strategy = model.strategy.as_ref().context("model has no `observation_attack` section")?;
        let on_g = convert_observation_based(&model.plant, strategy)?;
        let on_h = convert_observation_based(h, strategy)?;
        let supervisor = synthesize_obs_based(&model.plant, h, strategy)?;
        Ok(Scenario { plant: on_g.product.automaton, spec: on_h.product.automaton, policy: on_g.policy, supervisor })
    } else {
        let supervisor = synthesize_ca_supervisor(&model.plant, h, &model.policy)?.supervisor;
        Ok(Scenario { plant: model.plant.clone(), spec: h.clone(), policy: model.policy.clone(), supervisor })
    }
}

fn actuator_set(model: &Model, a: &Actuator) -> Result<EventSet> {
    match &a.actuator_attack {
        None => Ok(model.actuator_attackable()),
        Some(list) => {
            let set = model.alphabet.parse_set(list)?;
            if let Some(e) = set.iter().find(|e| !model.alphabet.is_controllable(**e)) {
                bail!("event `{}` is uncontrollable and cannot be actuator-attacked", model.alphabet.name(*e));
            }
            Ok(set)
        }
    }
}

fn dotted(al: &EventAlphabet, w: &[EventId]) -> String {
    if w.is_empty() {
        "ε".into()
    } else {
        w.iter().map(|e| al.name(*e)).collect::<Vec<_>>().join("·")
    }
}

fn names<'a>(al: &'a EventAlphabet, set: &EventSet) -> Vec<&'a str> {
    set.iter().map(|e| al.name(*e)).collect()
}

fn verdict_json(al: &EventAlphabet, property: &str, v: &Verdict) -> Value {
    json!({
        "property": property,
        "status": v.status.as_str(),
        "depth": v.depth,
        "counterexample": v.counterexample.as_ref().map(|cx| json!({
            "string": cx.string.iter().map(|e| al.name(*e)).collect::<Vec<_>>(),
            "event": cx.event.map(|e| al.name(e)),
            "observation": cx.observation.as_ref().map(|t| t.iter().map(|e| al.name(*e)).collect::<Vec<_>>()),
        })),
        "notes": v.notes,
    })
}

fn print_verdict(al: &EventAlphabet, property: &str, v: &Verdict, as_json: bool) {
    if as_json {
        println!("{}", serde_json::to_string_pretty(&verdict_json(al, property, v)).unwrap());
        return;
    }
    match v.status {
        Status::Holds => println!("{property}: holds"),
        Status::HoldsToDepth => println!("{property}: holds to depth {}", v.depth.unwrap_or(0)),
        Status::Fails => println!("{property}: fails"),
    }
    if let Some(cx) = &v.counterexample {
        let mut full = cx.string.clone();
        full.extend(cx.event);
        println!("counterexample: {}", dotted(al, &full));
        println!("  after: {}", dotted(al, &cx.string));
        if let Some(e) = cx.event {
            println!("  event: {}", al.name(e));
        }
        if let Some(t) = &cx.observation {
            println!("  observation: {}", dotted(al, t));
        }
    }
    for n in &v.notes {
        println!("note: {n}");
    }
}

fn exit_for(status: Status) -> ExitCode {
    match status {
        Status::Fails => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    }
}

fn observer_json(obs: &CAObserver) -> Value {
    let al = obs.plant.alphabet();
    let states: Vec<Value> = obs
        .observer
        .states()
        .map(|x| {
            json!({
                "name": obs.state_name(x),
                "marked": obs.is_marked(x),
                "estimate": obs.estimate_at(x).names(&obs.plant).collect::<Vec<_>>(),
            })
        })
        .collect();
    let transitions: Vec<Value> = obs
        .observer
        .transitions()
        .map(|t| json!([obs.state_name(t.src), al.render_label(t.label), obs.state_name(t.dst)]))
        .collect();
    json!({ "initial": obs.state_name(obs.initial()), "states": states, "transitions": transitions })
}

/// Tab-separated supervisor table; see docs/formats.md.
fn supervisor_table(sup: &Supervisor, spec: &Automaton) -> String {
    let obs = sup.observer();
    let al = obs.plant.alphabet();
    let mut out = String::from("# desguard-supervisor v1\n# observer_state\testimate\tcontrol\n");
    for x in obs.observer.states() {
        let estimate = spec.render_states(&sup.estimate_at(x).states);
        out.push_str(&format!("{}\t{}\t{}\n", obs.state_name(x), estimate, al.render_set(sup.control_at(x))));
    }
    out.push_str(&format!("*\t{{}}\t{}\n", al.render_set(sup.default_control())));
    out
}

fn supervisor_json(sup: &Supervisor, spec: &Automaton) -> Value {
    let obs = sup.observer();
    let al = obs.plant.alphabet();
    let rows: Vec<Value> = obs
        .observer
        .states()
        .map(|x| {
            json!({
                "observer_state": obs.state_name(x),
                "estimate": sup.estimate_at(x).states.iter().map(|q| spec.state_name(*q)).collect::<Vec<_>>(),
                "control": names(al, sup.control_at(x)),
            })
        })
        .collect();
    json!({ "states": rows, "default_control": names(al, sup.default_control()) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let read = |c: &Common| -> Result<Model> {
        let text = std::fs::read_to_string(&c.model).with_context(|| format!("cannot read {}", c.model.display()))?;
        load_model(&text).with_context(|| format!("{}", c.model.display()))
    };
    match cli.command {
        Command::Observer { common, dot } => {
            let m = read(&common)?;
            let obs = build_ca_observer(&m.plant, &m.policy)?;
            if dot {
                print!("{}", export_dot(&obs.observer, "observer"));
            } else if common.json {
                println!("{}", serde_json::to_string_pretty(&observer_json(&obs))?);
            } else {
                println!("initial: {}", obs.state_name(obs.initial()));
                for x in obs.observer.states() {
                    let mark = if obs.is_marked(x) { "marked" } else { "unmarked" };
                    println!("{}\t{}\testimate {}", obs.state_name(x), mark, obs.estimate_at(x).render(&m.plant));
                }
                for t in obs.observer.transitions() {
                    println!("{}", obs.observer.render_transition(t));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { common, obs, mode } => {
            let m = read(&common)?;
            let t: Word = m.alphabet.parse_word(&obs)?;
            let (observer, estimate): (CAObserver, Vec<String>) = if mode.observation_attack {
                let strategy = m.strategy.as_ref().context("model has no `observation_attack` section")?;
                let conv = convert_observation_based(&m.plant, strategy)?;
                let observer = build_ca_observer(&conv.product.automaton, &conv.policy)?;
                let se = lift_estimate(&state_estimate(&observer, &t), &conv.product.pairs);
                let estimate = se.names(&m.plant).map(String::from).collect();
                (observer, estimate)
            } else {
                let observer = build_ca_observer(&m.plant, &m.policy)?;
                let estimate = state_estimate(&observer, &t).names(&m.plant).map(String::from).collect();
                (observer, estimate)
            };
            let x = observer.state_after(&t);
            if common.json {
                let v = json!({
                    "observation": t.iter().map(|e| m.alphabet.name(*e)).collect::<Vec<_>>(),
                    "observer_state": x.map(|x| observer.state_name(x).to_string()),
                    "estimate": estimate,
                });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                println!("{{{}}}", estimate.join(","));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckControllability { common, actuator } => {
            let m = read(&common)?;
            let act = actuator_set(&m, &actuator)?;
            let v = check_ca_controllability(&m.plant, m.require_spec()?, &act)?;
            print_verdict(&m.alphabet, "ca-controllability", &v, common.json);
            Ok(exit_for(v.status))
        }
        Command::CheckObservability { common, depth } => {
            let m = read(&common)?;
            let h = m.require_spec()?;
            let depth = match depth {
                Some(d) => d,
                None => default_depth(&build_ca_observer(&m.plant, &m.policy)?, &m.plant),
            };
            let v = check_ca_observability_bounded(&m.plant, h, &m.policy, depth)?;
            print_verdict(&m.alphabet, "ca-observability", &v, common.json);
            Ok(exit_for(v.status))
        }
        Command::Synthesize { common, mode } => {
            let m = read(&common)?;
            let sc = scenario(&m, mode.observation_attack)?;
            let h = m.require_spec()?;
            if common.json {
                println!("{}", serde_json::to_string_pretty(&supervisor_json(&sc.supervisor, h))?);
            } else {
                print!("{}", supervisor_table(&sc.supervisor, h));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { common, actuator, mode } => {
            let m = read(&common)?;
            let act = actuator_set(&m, &actuator)?;
            let sc = scenario(&m, mode.observation_attack)?;
            let v = verify_large_language_equals(&sc.plant, &sc.spec, &sc.supervisor, &sc.policy, &act)?;
            print_verdict(&m.alphabet, "large-language-equals-spec", &v, common.json);
            Ok(exit_for(v.status))
        }
        Command::Simulate { common, actuator, mode, trials, max_steps, seed, attacker, trace } => {
            let m = read(&common)?;
            let act = actuator_set(&m, &actuator)?;
            let sc = scenario(&m, mode.observation_attack)?;
            let kind = match attacker {
                Attacker::None => AttackerKind::None,
                Attacker::Random => AttackerKind::Random,
                Attacker::Exhaustive => AttackerKind::Exhaustive,
            };
            let sim = Simulator::new(&sc.plant, &sc.spec, &sc.supervisor, &sc.policy, &act)?;
            let report = sim.run_campaign(kind, trials, max_steps, seed);
            let shown = report
                .first_violation
                .clone()
                .or_else(|| (trace && kind != AttackerKind::Exhaustive).then(|| sim.simulate(kind, max_steps, seed)));
            if common.json {
                let v = json!({
                    "attacker": kind.as_str(),
                    "runs": report.trials,
                    "violations": report.violations,
                    "distinct_violating_strings": report.distinct_violating_strings.iter()
                        .map(|w| w.iter().map(|e| m.alphabet.name(*e)).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "observer_states_visited": report.observer_states.len(),
                    "total_steps": report.total_steps,
                    "trace": shown.as_ref().filter(|_| trace || report.violations > 0).map(|t| t.serialize(&m.alphabet)),
                });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                println!("attacker: {}", kind.as_str());
                println!("runs: {}", report.trials);
                println!("violations: {}", report.violations);
                for w in &report.distinct_violating_strings {
                    println!("  violating string: {}", dotted(&m.alphabet, w));
                }
                println!("observer states visited: {}", report.observer_states.len());
                if let Some(t) = shown.filter(|_| trace || report.violations > 0) {
                    print!("{}", t.serialize(&m.alphabet));
                }
            }
            Ok(if report.violations > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::ConvertObs { common } => {
            let m = read(&common)?;
            let strategy = m.strategy.as_ref().context("model has no `observation_attack` section")?;
            let conv = convert_observation_based(&m.plant, strategy)?;
            let spec = match &m.spec {
                Some(h) => Some(convert_observation_based(h, strategy)?.product.automaton),
                None => None,
            };
            let converted = Model {
                name: m.name.as_ref().map(|n| format!("{n}-converted")),
                alphabet: m.alphabet.clone(),
                plant: conv.product.automaton,
                spec,
                policy: conv.policy,
                strategy: None,
            };
            print!("{}", serialize_model(&converted.to_document()));
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportDot { common, what } => {
            let m = read(&common)?;
            let (a, name) = match what {
                DotTarget::Plant => (m.plant.clone(), "plant"),
                DotTarget::Spec => (m.require_spec()?.clone(), "spec"),
                DotTarget::Diamond => (build_diamond(&m.plant, &m.policy)?.automaton, "diamond"),
                DotTarget::Observer => (build_ca_observer(&m.plant, &m.policy)?.observer, "observer"),
            };
            print!("{}", export_dot(&a, name));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
