//! Line-oriented interactive session.
//!
//! Every answer is one line of JSON; failures print `error[kind]: message`
//! and leave the session as it was.

use std::io::{self, BufRead, Write};

use bart::{CompiledModel, Error, Finding, Session};
use serde_json::json;

use crate::api;

const HELP: &str = "\
commands:
  networks                  list networks in the model
  open NETWORK              start a session (drops the current one)
  beliefs [NODE]            current beliefs
  set NODE VALUE            instantiate
  soft NODE W1 W2 ...       likelihood evidence
  retract NODE              remove a finding
  evidence                  list findings
  mpe                       most probable explanation
  impact TARGET             rank uninstantiated nodes by impact on TARGET
  whatif a=v,b~w1/w2        beliefs under extra findings, not committed
  help
  quit";

enum Reply {
    Text(String),
    Quit,
}

fn dispatch(model: &CompiledModel, session: &mut Option<Session>, line: &str) -> Result<Reply, String> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let Some((&cmd, args)) = words.split_first() else {
        return Ok(Reply::Text(String::new()));
    };
    let model_err = |e: Error| format!("error[{}]: {e}", e.kind());
    let need = |n: usize| {
        if args.len() < n {
            Err(format!("error[usage]: `{cmd}` needs {n} argument(s); try `help`"))
        } else {
            Ok(())
        }
    };
    let open = |s: &Option<Session>| -> Result<(), String> {
        match s {
            Some(_) => Ok(()),
            None => Err("error[usage]: no session; `open NETWORK` first".into()),
        }
    };
    let text = match cmd {
        "quit" | "exit" => return Ok(Reply::Quit),
        "help" => HELP.to_string(),
        "networks" => json!(model.networks.iter().map(|n| &n.name).collect::<Vec<_>>()).to_string(),
        "open" => {
            need(1)?;
            *session = Some(Session::open(model, args[0]).map_err(model_err)?);
            json!({ "opened": args[0] }).to_string()
        }
        _ => {
            open(session)?;
            let s = session.as_mut().expect("checked");
            match cmd {
                "beliefs" => match args.first() {
                    Some(n) => json!({ *n: s.belief(n).map_err(model_err)? }).to_string(),
                    None => json!(s.beliefs()).to_string(),
                },
                "set" => {
                    need(2)?;
                    json!(s.assert_evidence(args[0], Finding::value(args[1])).map_err(model_err)?).to_string()
                }
                "soft" => {
                    need(2)?;
                    let w = args[1..]
                        .iter()
                        .map(|x| x.parse::<f64>().map_err(|_| format!("error[usage]: bad weight `{x}`")))
                        .collect::<Result<Vec<_>, _>>()?;
                    let f = Finding::likelihood(w).map_err(model_err)?;
                    json!(s.assert_evidence(args[0], f).map_err(model_err)?).to_string()
                }
                "retract" => {
                    need(1)?;
                    json!(s.retract_evidence(args[0]).map_err(model_err)?).to_string()
                }
                "evidence" => json!(s.evidence()).to_string(),
                "mpe" => json!(s.mpe().map_err(model_err)?).to_string(),
                "impact" => {
                    need(1)?;
                    json!(s.impact(args[0]).map_err(model_err)?).to_string()
                }
                "whatif" => {
                    need(1)?;
                    let bodies = api::parse_evidence_spec(&args.join(" ")).map_err(|m| format!("error[usage]: {m}"))?;
                    let findings = api::findings(&bodies).map_err(model_err)?;
                    json!(s.whatif(&findings).map_err(model_err)?).to_string()
                }
                _ => return Err(format!("error[usage]: unknown command `{cmd}`; try `help`")),
            }
        }
    };
    Ok(Reply::Text(text))
}

/// Reads commands until `quit` or end of input.
pub fn run<R: BufRead, W: Write + ?Sized>(model: &CompiledModel, input: R, out: &mut W) -> io::Result<()> {
    let mut session = None;
    for line in input.lines() {
        match dispatch(model, &mut session, line?.trim()) {
            Ok(Reply::Quit) => break,
            Ok(Reply::Text(t)) if t.is_empty() => {}
            Ok(Reply::Text(t)) | Err(t) => writeln!(out, "{t}")?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use bart::compiler::{compile_source, CompileOptions};

    const CHAIN: &str = "network chain2 {
        node A { values: [t, f]; prior: [0.3, 0.7]; }
        node B { values: [t, f]; parents: [A]; cpt: {0.9, 0.1; 0.2, 0.8}; }
    }";

    fn transcript(script: &str) -> Vec<String> {
        let model = compile_source(CHAIN, &CompileOptions::default()).unwrap();
        let mut out = Vec::new();
        run(&model, script.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap().lines().map(String::from).collect()
    }

    #[test]
    fn session_commands() {
        let lines = transcript("beliefs\nopen chain2\nset B t\nbeliefs A\nset B f\nretract B\nsoft B 2 1\nwhatif A=f\nmpe\nquit\nbeliefs\n");
        assert!(lines[0].starts_with("error[usage]"));
        assert_eq!(lines[1], r#"{"opened":"chain2"}"#);
        let a: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
        assert!((a["A"][0].as_f64().unwrap() - 27.0 / 41.0).abs() < 1e-12);
        assert!(lines[4].starts_with("error[conflicting-instantiation]"));
        assert_eq!(lines.len(), 9, "nothing after quit");
    }

    #[test]
    fn bad_input_keeps_going() {
        let lines = transcript("open nope\nopen chain2\nset B maybe\nsoft B x\nfly\nbeliefs B\n");
        assert!(lines[0].starts_with("error[unknown-network]"));
        assert!(lines[2].starts_with("error[unknown-value]"));
        assert!(lines[3].starts_with("error[usage]"));
        assert!(lines[4].starts_with("error[usage]"));
        assert!(lines[5].starts_with(r#"{"B":"#));
    }
}
