use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use xdac::conversion::{convert_role, CorrelationKind, CorrelationPolicy, CorrelationSet};
use xdac::sim::{trace_jsonl, trajectories_csv, validate_scenario, RunOutput, Scenario, Simulation, TraceBody, TraceEvent};
use xdac::{DomainId, EntityId, RoleId};

#[derive(Parser)]
#[command(name = "xdac", version, about = "Trust-gated cross-domain access control simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its trace and trust trajectories.
    Run {
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for trace.jsonl and trajectories.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// What to print on stdout.
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Check a scenario file and list every problem found.
    Validate { scenario: PathBuf },
    /// Convert an outer role (DOMAIN/Role) into a role of the target domain.
    ConvertRole {
        scenario: PathBuf,
        outer_role: RoleId,
        target: String,
    },
    /// Decide one request against the scenario's initial state.
    Decide {
        scenario: PathBuf,
        /// DOMAIN/entity
        requester: EntityId,
        /// Role name in the requester's home domain.
        role: String,
        resource: String,
        /// Ask a foreign domain instead of the home domain.
        #[arg(long)]
        cross: Option<String>,
    },
    /// Run a scenario and print final entity and domain-pair trust.
    TrustReport {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Jsonl,
    Csv,
}

enum Failure {
    /// Bad input: parse errors, violations, unknown identifiers.
    Invalid(Vec<String>),
    Io(String),
}

impl Failure {
    fn invalid(msg: impl ToString) -> Self {
        Failure::Invalid(vec![msg.to_string()])
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = String::new();
    let res = match cli.cmd {
        Cmd::Run { scenario, seed, out: dir, format } => cmd_run(&scenario, seed, dir.as_deref(), format, &mut out),
        Cmd::Validate { scenario } => load(&scenario).map(|sc| {
            out.push_str(&format!(
                "ok: {} domains, {} entities, {} scheduled events\n",
                sc.domains.len(),
                sc.entities.len(),
                sc.schedule.len()
            ))
        }),
        Cmd::ConvertRole { scenario, outer_role, target } => cmd_convert(&scenario, &outer_role, &target, &mut out),
        Cmd::Decide { scenario, requester, role, resource, cross } => {
            cmd_decide(&scenario, &requester, &role, &resource, cross.as_deref(), &mut out)
        }
        Cmd::TrustReport { scenario, seed } => cmd_trust_report(&scenario, seed, &mut out),
    };
    print!("{out}");
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msgs)) => {
            for m in msgs {
                eprintln!("error: {m}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Io(m)) => {
            eprintln!("i/o error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let sc = Scenario::from_json(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let v = validate_scenario(&sc);
    if !v.is_empty() {
        return Err(Failure::Invalid(v.iter().map(|v| v.to_string()).collect()));
    }
    Ok(sc)
}

fn simulate(sc: &Scenario) -> Result<Simulation, Failure> {
    Simulation::new(sc).map_err(Failure::invalid)
}

fn cmd_run(path: &Path, seed: Option<u64>, dir: Option<&Path>, format: Format, out: &mut String) -> Result<(), Failure> {
    let mut sc = load(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let mut sim = simulate(&sc)?;
    sim.replay(&sc).map_err(Failure::invalid)?;
    let run = sim.into_output();
    let trace = trace_jsonl(&run.trace);
    let csv = trajectories_csv(&run.trajectories);
    if let Some(dir) = dir {
        let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("trace.jsonl"), &trace).map_err(io)?;
        fs::write(dir.join("trajectories.csv"), &csv).map_err(io)?;
    }
    match format {
        Format::Jsonl => out.push_str(&trace),
        Format::Csv => out.push_str(&csv),
        Format::Table => run_table(&run, out),
    }
    Ok(())
}

fn run_table(run: &RunOutput, out: &mut String) {
    out.push_str(&format!(
        "{:>4}  {:<6} {:<14} {:<10} {:<10} {:<9} {:>8}  {}\n",
        "seq", "kind", "requester", "host", "resource", "outcome", "trust", "reason"
    ));
    let (mut permits, mut denies) = (0, 0);
    for ev in &run.trace {
        let (kind, requester, host, resource, decision, ended) = match &ev.body {
            TraceBody::LocalDecision { requester, resource, decision, .. } => {
                ("local", requester, requester.domain.to_string(), resource, decision, String::new())
            }
            TraceBody::CrossDecision { requester, target, resource, decision, protocol, .. } => {
                let at = if decision.is_permit() {
                    String::new()
                } else {
                    format!(" at {}", protocol.last_step().unwrap_or("?"))
                };
                ("cross", requester, target.to_string(), resource, decision, at)
            }
            _ => continue,
        };
        if decision.is_permit() {
            permits += 1;
        } else {
            denies += 1;
        }
        let outcome = if decision.is_permit() { "permit" } else { "deny" };
        let reason = decision.reason.map(|r| format!("{r}{ended}")).unwrap_or_default();
        out.push_str(&format!(
            "{:>4}  {:<6} {:<14} {:<10} {:<10} {:<9} {:>8.4}  {}\n",
            ev.seq,
            kind,
            requester.to_string(),
            host,
            resource.to_string(),
            outcome,
            decision.trust_at_decision,
            reason
        ));
    }
    let epochs = run.trace.iter().filter(|e| matches!(e.body, TraceBody::Epoch { .. })).count();
    out.push_str(&format!("{permits} permitted, {denies} denied, {epochs} epochs\n"));
}

fn policy_name(p: CorrelationPolicy) -> &'static str {
    match p {
        CorrelationPolicy::Default => "default",
        CorrelationPolicy::Clear => "clear",
        CorrelationPolicy::Partial => "partial",
    }
}

fn cmd_convert(path: &Path, outer: &RoleId, target: &str, out: &mut String) -> Result<(), Failure> {
    let target = &DomainId::new(target).map_err(Failure::invalid)?;
    let sc = load(path)?;
    let sim = simulate(&sc)?;
    let fed = sim.federation();
    let h1 = fed.domain(&outer.domain).map_err(Failure::invalid)?.hierarchy();
    let h0 = fed.domain(target).map_err(Failure::invalid)?.hierarchy();
    let empty;
    let set = match fed.correlations(&outer.domain, target) {
        Some(s) => s,
        None => {
            empty = CorrelationSet::new(h1, h0, []).map_err(Failure::invalid)?;
            &empty
        }
    };
    let res = convert_role(outer, set, h1, h0).map_err(Failure::invalid)?;
    let names = |it: &mut dyn Iterator<Item = &RoleId>| it.map(|r| r.to_string()).collect::<Vec<_>>().join(", ");
    out.push_str(&format!("outer role:  {}\n", res.outer_role));
    out.push_str(&format!("policy:      {}\n", policy_name(res.policy)));
    out.push_str(&format!("candidates:  {}\n", names(&mut res.candidates.iter())));
    if let Some(c) = &res.via {
        let kind = match c.kind {
            CorrelationKind::Transitive => "transitive",
            CorrelationKind::NonTransitive => "non-transitive",
        };
        out.push_str(&format!("via:         {} -> {} ({kind})\n", c.outer_role, c.local_role));
    }
    if res.guest_fallback {
        out.push_str("note:        guest floor\n");
    }
    if res.tie_broken {
        out.push_str("note:        tie broken by name\n");
    }
    match &res.local_role {
        Some(r) => out.push_str(&format!("converted:   {r}\n")),
        None => out.push_str("converted:   no conversion (deny)\n"),
    }
    Ok(())
}

fn cmd_decide(
    path: &Path,
    requester: &EntityId,
    role: &str,
    resource: &str,
    cross: Option<&str>,
    out: &mut String,
) -> Result<(), Failure> {
    let sc = load(path)?;
    let mut sim = simulate(&sc)?;
    match cross {
        Some(t) => sim.cross_request(requester, role, t, resource),
        None => sim.local_request(requester, role, resource),
    }
    .map_err(Failure::invalid)?;
    let ev = sim
        .output()
        .trace
        .iter()
        .rev()
        .find(|e| matches!(e.body, TraceBody::LocalDecision { .. } | TraceBody::CrossDecision { .. }))
        .cloned()
        .ok_or_else(|| Failure::invalid("request produced no decision"))?;
    decision_report(&ev, out);
    Ok(())
}

fn decision_report(ev: &TraceEvent, out: &mut String) {
    let (decision, certificate, lines, extra) = match &ev.body {
        TraceBody::LocalDecision { decision, certificate, stages, .. } => {
            let lines: Vec<String> = stages.stages.iter().map(|s| format!("  {:<4} {}", s.label, s.detail)).collect();
            (decision, certificate, lines, None)
        }
        TraceBody::CrossDecision { decision, certificate, protocol, converted_role, effective_trust, .. } => {
            let lines = protocol
                .steps
                .iter()
                .map(|s| format!("  {:<4} {:<8} {}", s.step, format!("{:?}", s.outcome).to_lowercase(), s.detail))
                .collect();
            let conv = converted_role.as_ref().map(|r| r.to_string()).unwrap_or_else(|| "none".into());
            let eff = effective_trust.map(|t| format!("{t:.6}")).unwrap_or_else(|| "-".into());
            (decision, certificate, lines, Some((conv, eff)))
        }
        _ => return,
    };
    out.push_str(&format!("request:     {}\n", decision.request_id));
    out.push_str(&format!("outcome:     {}\n", if decision.is_permit() { "Permit" } else { "Deny" }));
    out.push_str(&format!(
        "reason:      {}\n",
        decision.reason.map(|r| r.to_string()).unwrap_or_else(|| "-".into())
    ));
    out.push_str(&format!("trust:       {:.6}\n", decision.trust_at_decision));
    if let Some((conv, eff)) = extra {
        out.push_str(&format!("converted:   {conv}\n"));
        out.push_str(&format!("effective:   {eff}\n"));
    }
    if let Some(c) = certificate {
        out.push_str(&format!("certificate: {c}\n"));
    }
    out.push_str("trace:\n");
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
}

fn cmd_trust_report(path: &Path, seed: Option<u64>, out: &mut String) -> Result<(), Failure> {
    let mut sc = load(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let mut sim = simulate(&sc)?;
    sim.replay(&sc).map_err(Failure::invalid)?;
    let fed = sim.federation();
    out.push_str(&format!("{:<8} {:<16} {:>9} {:>9}\n", "ledger", "entity", "rp", "td"));
    for id in fed.domains() {
        let aac = fed.domain(id).map_err(Failure::invalid)?;
        let view = aac.ledger().view();
        for (e, td) in &view.domain_trust {
            let rp = view.reputation(e).unwrap_or(f64::NAN);
            out.push_str(&format!("{:<8} {:<16} {:>9.5} {:>9.5}\n", id.to_string(), e.to_string(), rp, td));
        }
    }
    out.push('\n');
    out.push_str(&format!("{:<8} {:<8} {:>9} {:>9} {:>9}\n", "observer", "observed", "dtd", "rp", "td"));
    for p in fed.pair_trust_matrix() {
        out.push_str(&format!(
            "{:<8} {:<8} {:>9.5} {:>9.5} {:>9.5}\n",
            p.observer.to_string(),
            p.observed.to_string(),
            p.cross_dtd,
            p.cross_rp,
            p.cross_td
        ));
    }
    Ok(())
}
