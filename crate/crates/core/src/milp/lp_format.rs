use std::fmt::Write;

use super::{LinearConstraint, MilpModel, Sense, VarKind};

/// Formats `x` like C's `%.17g`, which round-trips every finite `f64`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_fraction(format!("{:.*}", decimals, x))
    } else {
        let mantissa = trim_fraction(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mantissa, sign, exp.abs())
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

fn write_terms(out: &mut String, model: &MilpModel, terms: &[(f64, super::VarId)]) {
    for (k, &(coef, var)) in terms.iter().enumerate() {
        let name = &model.variables[var.0].name;
        let mag = format_number(coef.abs());
        match (k, coef < 0.0) {
            (0, false) => write!(out, "{} {}", mag, name),
            (0, true) => write!(out, "- {} {}", mag, name),
            (_, false) => write!(out, " + {} {}", mag, name),
            (_, true) => write!(out, " - {} {}", mag, name),
        }
        .expect("write to string");
    }
}

fn write_row(out: &mut String, model: &MilpModel, c: &LinearConstraint) {
    if c.terms.is_empty() {
        // LP rows need at least one variable reference.
        match model.variables.first() {
            Some(v) => write!(out, "0 {}", v.name).expect("write to string"),
            None => out.push('0'),
        }
    } else {
        write_terms(out, model, &c.terms);
    }
    write!(out, " {} {}", c.relation, format_number(c.rhs)).expect("write to string");
}

pub(super) fn write_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    writeln!(out, "\\ Model: {}", model.name).expect("write to string");

    let (sense, terms, constant) = match &model.objective {
        Some(o) => (o.sense, o.terms.as_slice(), o.constant),
        None => (Sense::Minimize, &[][..], 0.0),
    };
    out.push_str(match sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    if !terms.is_empty() {
        out.push(' ');
        write_terms(&mut out, model, terms);
    }
    if constant != 0.0 {
        let sign = if constant < 0.0 { '-' } else { '+' };
        write!(out, " {} {}", sign, format_number(constant.abs())).expect("write to string");
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for c in &model.constraints {
        write!(out, " {}: ", c.name).expect("write to string");
        write_row(&mut out, model, &c.item);
        out.push('\n');
    }
    for ind in &model.indicators {
        let bin = &model.variables[ind.item.binary.0].name;
        write!(
            out,
            " {}: {} = {} -> ",
            ind.name,
            bin,
            u8::from(ind.item.active)
        )
        .expect("write to string");
        write_row(&mut out, model, &ind.item.implied);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        let (lo, hi) = (v.lower, v.upper);
        let line = if lo == hi {
            format!(" {} = {}", v.name, format_number(lo))
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            format!(" {} free", v.name)
        } else if hi == f64::INFINITY {
            format!(" {} >= {}", v.name, format_number(lo))
        } else if lo == f64::NEG_INFINITY {
            format!(" -inf <= {} <= {}", v.name, format_number(hi))
        } else {
            format!(
                " {} <= {} <= {}",
                format_number(lo),
                v.name,
                format_number(hi)
            )
        };
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Binary\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Binary) {
        writeln!(out, " {}", v.name).expect("write to string");
    }
    out.push_str("General\n");
    for v in model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Integer)
    {
        writeln!(out, " {}", v.name).expect("write to string");
    }
    out.push_str("End\n");
    out
}
