use std::collections::HashMap;

use super::{Diagnostic, Direction, NetworkDesc, PortRef, Span};
use crate::error::{Error, Result};
use crate::linalg::select;
use crate::memory::make_cavity_ports;
use crate::slh::{feedback_reduce, parallel_sum, AdjacencyMap, SlhModel, LABEL_JOIN};

pub const MAX_COMPONENTS: usize = 64;
/// Upper bound on the summed port count of all components.
pub const MAX_PORTS: usize = 128;

fn located(span: Span, message: impl Into<String>, source: Error) -> Error {
    Error::Located { diagnostic: Diagnostic::new(span, message), cause: Box::new(source) }
}

/// Build the network's reduced model.
///
/// External ports follow the `input`/`output` declarations: reduced port `k`
/// takes the `k`-th declared input and the `k`-th declared output. Without
/// declarations the unconnected ports keep their declaration order.
pub fn compile(desc: &NetworkDesc) -> Result<SlhModel> {
    let mut values: HashMap<&str, f64> = HashMap::new();
    for p in &desc.params {
        let v = p.value.eval(&|name| values.get(name).copied()).ok_or_else(|| {
            Error::Parse(Diagnostic::new(p.span, format!("parameter '{}' uses an undefined name", p.name)))
        })?;
        if !v.is_finite() {
            return Err(Error::Parse(Diagnostic::new(
                p.span,
                format!("parameter '{}' evaluates to {v}", p.name),
            )));
        }
        values.insert(&p.name, v);
    }

    if desc.components.is_empty() {
        return Ok(SlhModel::passthrough(0));
    }

    let mut offsets = Vec::with_capacity(desc.components.len());
    let mut models = Vec::with_capacity(desc.components.len());
    let mut total = 0;
    for c in &desc.components {
        let rates = c
            .couplings
            .iter()
            .map(|e| e.eval(&|name| values.get(name).copied()).unwrap_or(f64::NAN))
            .collect::<Vec<_>>();
        let cavity = make_cavity_ports(&rates)
            .map_err(|e| located(c.span, format!("cavity '{}'", c.name), e))?;
        offsets.push(total);
        total += rates.len();
        models.push(cavity.with_prefix(&c.name));
    }
    let global = |p: &PortRef| -> usize {
        let (i, _) = desc.component(&p.component).expect("parser checked component names");
        offsets[i] + p.index - 1
    };

    let open = parallel_sum(&models)?;
    let adj = AdjacencyMap::new(desc.connections.iter().map(|c| (global(&c.from), global(&c.to))).collect());
    let reduced = feedback_reduce(&open, &adj).map_err(|e| match desc.connections.first() {
        Some(first) => {
            let lines: Vec<String> = desc.connections.iter().map(|c| c.span.line.to_string()).collect();
            located(first.span, format!("connections on lines {}", lines.join(", ")), e)
        }
        None => e,
    })?;

    if desc.inputs.is_empty() && desc.outputs.is_empty() {
        return Ok(reduced);
    }
    order_external(desc, &reduced, &adj, total, &global)
}

/// Select rows (outputs) and columns (inputs) of the reduced model in the
/// declared order.
fn order_external(
    desc: &NetworkDesc,
    reduced: &SlhModel,
    adj: &AdjacencyMap,
    total: usize,
    global: &dyn Fn(&PortRef) -> usize,
) -> Result<SlhModel> {
    let free = |dir: Direction| -> Vec<usize> {
        (0..total)
            .filter(|p| {
                !adj.connections.iter().any(|&(s, r)| if dir == Direction::Out { s == *p } else { r == *p })
            })
            .collect()
    };
    let (free_in, free_out) = (free(Direction::In), free(Direction::Out));
    let position = |ports: &[PortRef], free: &[usize], what: &str| -> Result<Vec<usize>> {
        let order = ports
            .iter()
            .map(|p| free.binary_search(&global(p)).expect("declared ports are unconnected"))
            .collect::<Vec<_>>();
        if order.len() != free.len() {
            let anchor = ports.last().map_or(Span { line: 1, col: 1 }, |p| p.span);
            return Err(Error::Parse(Diagnostic::new(
                anchor,
                format!("{} unconnected {what} ports but {} declared", free.len(), order.len()),
            )));
        }
        Ok(order)
    };
    let cols = position(&desc.inputs, &free_in, "input")?;
    let rows = position(&desc.outputs, &free_out, "output")?;

    let modes: Vec<usize> = (0..reduced.n_modes()).collect();
    let labels = cols
        .iter()
        .zip(&rows)
        .map(|(&i, &o)| {
            let (il, ol) = (reduced.input_label(i), reduced.output_label(o));
            if il == ol {
                il.to_string()
            } else {
                format!("{il}{LABEL_JOIN}{ol}")
            }
        })
        .collect();
    SlhModel::new(
        select(reduced.s(), &rows, &cols),
        select(reduced.k(), &rows, &modes),
        reduced.omega().clone(),
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netdsl::parse;

    #[test]
    fn single_cavity_is_unchanged() {
        let m = compile(&parse("cavity a couplings [0.5, 2]").unwrap()).unwrap();
        let direct = make_cavity_ports(&[0.5, 2.0]).unwrap().with_prefix("a");
        assert_eq!(m, direct);
    }

    #[test]
    fn empty_network_compiles_to_nothing() {
        let m = compile(&parse("").unwrap()).unwrap();
        assert_eq!((m.n_ports(), m.n_modes()), (0, 0));
    }

    #[test]
    fn declared_order_permutes_ports() {
        let src = "cavity a couplings [1, 4]\ninput a.in2\ninput a.in1\noutput a.out1\noutput a.out2";
        let m = compile(&parse(src).unwrap()).unwrap();
        // Port 0 takes input 2 and output 1: a swap of the identity scattering.
        assert_eq!(m.s()[(0, 1)].re, 1.0);
        assert_eq!(m.s()[(0, 0)].re, 0.0);
        assert_eq!(m.k()[(0, 0)].re, 1.0);
        assert_eq!(m.port_labels()[0], "a.2->a.1");
    }

    #[test]
    fn incomplete_declarations_are_rejected() {
        let src = "cavity a couplings [1, 1]\ninput a.in1\noutput a.out1";
        let e = compile(&parse(src).unwrap()).unwrap_err();
        assert!(e.to_string().contains("2 unconnected input ports but 1 declared"));
    }

    #[test]
    fn bad_rates_carry_positions() {
        let src = "param z = 0\n\ncavity a couplings [z]";
        let e = compile(&parse(src).unwrap()).unwrap_err();
        assert!(e.to_string().starts_with("3:1:"), "{e}");
        let e = compile(&parse("param z = 1/0").unwrap()).unwrap_err();
        assert!(e.to_string().starts_with("1:1:"), "{e}");
    }

    #[test]
    fn algebraic_loop_is_positioned() {
        // A port fed straight back into itself has S = 1, so η − S vanishes.
        let src = "cavity a couplings [1]\nconnect a.out1 -> a.in1";
        let e = compile(&parse(src).unwrap()).unwrap_err();
        assert!(e.is_numerical(), "{e}");
        assert!(e.to_string().starts_with("2:1:"), "{e}");
    }
}
