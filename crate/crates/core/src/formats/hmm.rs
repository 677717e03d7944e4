//! Model file: one or more event models, all probabilities as natural logs.
//!
//! ```text
//! model <name>
//! states <K>
//! init <log p_0> ... <log p_{K-1}>
//! trans <row 0: K values>            (K lines, row = source state)
//! state gaussian <4 means> <4 variances>
//! state constant <log p>              (K state lines in total)
//! end
//! ```

use std::fmt::Write as _;

use super::{at_line, body, header, join, Line};
use crate::error::{Error, Result};
use crate::events::{HmmModel, StateEmission, FEATURES};

pub const KIND: &str = "hmm";

pub fn format_models(models: &[HmmModel]) -> String {
    let mut out = header(KIND);
    out.push('\n');
    for m in models {
        let k = m.states();
        let _ = writeln!(out, "model {}", m.name());
        let _ = writeln!(out, "states {k}");
        let _ = writeln!(out, "init {}", join(m.log_init()));
        for from in 0..k {
            let _ = writeln!(out, "trans {}", join(m.log_trans_row(from)));
        }
        for e in m.emissions() {
            match e {
                StateEmission::Gaussian { mean, var } => {
                    let _ = writeln!(out, "state gaussian {} {}", join(mean), join(var));
                }
                StateEmission::Constant(c) => {
                    let _ = writeln!(out, "state constant {c}");
                }
            }
        }
        out.push_str("end\n");
    }
    out
}

pub fn parse_models(text: &str) -> Result<Vec<HmmModel>> {
    let lines: Vec<Line<'_>> = body(text, KIND)?.into_iter().filter(|l| !l.is_comment()).collect();
    let mut it = lines.iter();
    let mut models = Vec::new();
    while let Some(head) = it.next() {
        let mut f = head.fields();
        f.keyword("model")?;
        let name = f.str("name")?.to_string();
        f.finish()?;
        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| Error::parse(head.number, format!("model '{name}' is missing its {what}")))
        };

        let mut f = next("states")?.fields();
        f.keyword("states")?;
        let k: usize = f.parse("K")?;
        f.finish()?;

        let mut f = next("init")?.fields();
        f.keyword("init")?;
        let init = f.f64s(k, "init")?;
        f.finish()?;

        let mut trans = Vec::with_capacity(k);
        for _ in 0..k {
            let mut f = next("transition rows")?.fields();
            f.keyword("trans")?;
            trans.push(f.f64s(k, "transition")?);
            f.finish()?;
        }

        let mut emissions = Vec::with_capacity(k);
        for _ in 0..k {
            let mut f = next("states")?.fields();
            f.keyword("state")?;
            let e = match f.str("emission kind")? {
                "gaussian" => {
                    let mut mean = [0.0; FEATURES];
                    let mut var = [0.0; FEATURES];
                    for m in &mut mean {
                        *m = f.parse("mean")?;
                    }
                    for v in &mut var {
                        *v = f.parse("variance")?;
                    }
                    StateEmission::Gaussian { mean, var }
                }
                "constant" => StateEmission::Constant(f.parse("log probability")?),
                other => return Err(Error::parse(f.line(), format!("unknown emission kind '{other}'"))),
            };
            f.finish()?;
            emissions.push(e);
        }

        let mut f = next("end")?.fields();
        f.keyword("end")?;
        f.finish()?;
        models.push(at_line(head.number, HmmModel::new(name, init, trans, emissions))?);
    }
    Ok(models)
}
