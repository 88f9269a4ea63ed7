//! Reference evaluator: computes every probe's value from the netlist with
//! plain integer arithmetic, ignoring time, latency and encodings entirely.
//! Used to cross-check the engine.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::accumulators::AccumulatorModel;
use crate::sim::netlist::{BlockConfig, Netlist, NoiseSeed, Port, PortRef, SourcePayload};
use crate::sim::trace::ProbeValue;
use crate::time::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("block `{0}` cannot be evaluated without simulation: {1}")]
    Unsupported(String, &'static str),
    #[error("block `{0}`: {1}")]
    Invalid(String, String),
    #[error("block `{0}`: value does not fit in 64 bits")]
    Overflow(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Value {
    Scalar(u64),
    Set(Vec<u64>),
    Marks(BTreeMap<u64, u64>),
}

/// Value of every probe, keyed like the engine's results.
pub fn evaluate(net: &Netlist) -> Result<BTreeMap<String, ProbeValue>, OracleError> {
    let mut values: HashMap<PortRef, Value> = HashMap::new();
    for id in &net.topo_order {
        let b = &net.blocks[id];
        let inputs: Vec<Value> = (0..net.input_count(id))
            .map(|i| {
                let w = net.driver(&PortRef::new(id, Port::In(i))).expect("validated");
                values[&w.src].clone()
            })
            .collect();
        let scalars = || -> Result<Vec<u64>, OracleError> {
            inputs
                .iter()
                .map(|v| match v {
                    Value::Scalar(x) => Ok(*x),
                    _ => Err(OracleError::Invalid(id.clone(), "expected an interval input".into())),
                })
                .collect()
        };
        let fit = |x: BigUint| x.to_u64().ok_or_else(|| OracleError::Overflow(id.clone()));
        let in_freq = || -> Rational {
            let w = net.driver(&PortRef::new(id, Port::In(0))).expect("validated");
            net.clock(&net.port_types[&w.src].1).frequency().clone()
        };
        let out = match &b.config {
            BlockConfig::Source { payload: SourcePayload::Interval(v), .. } => Value::Scalar(*v),
            BlockConfig::Source { payload: SourcePayload::Marks(m), .. } => Value::Marks(m.iter().copied().collect()),
            BlockConfig::Probe => continue,
            BlockConfig::Add => {
                let v = scalars()?;
                Value::Scalar(fit(BigUint::from(v[0]) + v[1])?)
            }
            BlockConfig::Mul { k } => {
                let v = scalars()?;
                let rhs = k.unwrap_or_else(|| v[1]);
                Value::Scalar(fit(BigUint::from(v[0]) * rhs)?)
            }
            BlockConfig::Min => Value::Scalar(*scalars()?.iter().min().expect("arity checked")),
            BlockConfig::Max => Value::Scalar(*scalars()?.iter().max().expect("arity checked")),
            BlockConfig::Mux => {
                let mut v = scalars()?;
                v.sort_unstable();
                if v.windows(2).any(|w| w[0] == w[1]) || v.first() == Some(&0) {
                    return Err(OracleError::Invalid(id.clone(), "mux values must be distinct and positive".into()));
                }
                Value::Set(v)
            }
            BlockConfig::Demux => {
                let Value::Set(set) = &inputs[0] else {
                    return Err(OracleError::Invalid(id.clone(), "expected a multiplexed input".into()));
                };
                for (port, _) in net.port_types.range(PortRef::new(id, Port::In(0))..) {
                    if port.block != *id {
                        break;
                    }
                    if let Port::OutN(i) = port.port {
                        let v = set.get(i as usize).ok_or_else(|| {
                            OracleError::Invalid(id.clone(), format!("no value for `{}`", port.port))
                        })?;
                        values.insert(port.clone(), Value::Scalar(*v));
                    }
                }
                continue;
            }
            BlockConfig::Madd => {
                let mut dot = BigUint::default();
                for v in &inputs {
                    let Value::Marks(m) = v else {
                        return Err(OracleError::Invalid(id.clone(), "expected a multi-valent input".into()));
                    };
                    for (&p, &a) in m {
                        dot += BigUint::from(p) * a;
                    }
                }
                Value::Scalar(fit(dot)?)
            }
            BlockConfig::Accumulator { config, reference, noise } => {
                if *noise != NoiseSeed::None {
                    return Err(OracleError::Unsupported(id.clone(), "noisy accumulator"));
                }
                let v = scalars()?[0];
                let periods = floor(Rational::from_integer(v.into()) * net.clock(reference).frequency() / in_freq());
                let value = match config.model() {
                    AccumulatorModel::DigitalCounter => periods,
                    AccumulatorModel::ToggleChain { depth } => periods % (BigUint::from(1u8) << *depth),
                    AccumulatorModel::AnalogIntegrator { rate } => floor(Rational::from_integer(periods) * rate),
                    AccumulatorModel::PhotonCounter { flux } => floor(Rational::from_integer(periods) * flux),
                };
                Value::Scalar(fit(value)?)
            }
            BlockConfig::Convert { to } => {
                let v = scalars()?[0];
                Value::Scalar(fit(floor(Rational::from_integer(v.into()) * net.clock(to).frequency() / in_freq()))?)
            }
        };
        values.insert(PortRef::new(id, Port::Out), out);
    }

    let mut results = BTreeMap::new();
    for (key, port) in net.probe_keys() {
        let src = if port.port.is_input() {
            net.driver(&port).expect("validated").src.clone()
        } else {
            port
        };
        let v = values
            .get(&src)
            .ok_or_else(|| OracleError::Invalid(src.block.clone(), format!("no value on `{}`", src.port)))?;
        results.insert(
            key,
            match v {
                Value::Scalar(x) => ProbeValue::Scalar(*x),
                Value::Set(s) => ProbeValue::Set(s.clone()),
                Value::Marks(m) => ProbeValue::Marks(m.iter().map(|(&p, &a)| (p, a)).collect()),
            },
        );
    }
    Ok(results)
}

fn floor(r: Rational) -> BigUint {
    r.numer() / r.denom()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::netlist::parse_netlist;

    fn eval(text: &str) -> BTreeMap<String, ProbeValue> {
        evaluate(&parse_netlist(text).unwrap()).unwrap()
    }

    #[test]
    fn arithmetic() {
        let r = eval(
            "block a source value=3\nblock b source value=4\nblock s add\nblock m mul k=3\n\
             wire a.out s.in0\nwire b.out s.in1\nwire s.out m.in0\nprobe s\nprobe m\n",
        );
        assert_eq!(r["s"], ProbeValue::Scalar(7));
        assert_eq!(r["m"], ProbeValue::Scalar(21));
    }

    #[test]
    fn madd_is_a_dot_product() {
        let r = eval("block x source mv=3@2,1@10\nblock d madd\nwire x.out d.in0\nprobe d\n");
        assert_eq!(r["d"], ProbeValue::Scalar(3 * 2 + 10));
    }

    #[test]
    fn conversions_floor() {
        let r = eval(
            "clock f 3\nclock g 2\nblock a source value=5 clock=f\nblock c convert to=g\n\
             block t accumulator model=toggle depth=2 ref=f\nwire a.out c.in0\nwire a.out t.in0\nprobe c\nprobe t\n",
        );
        assert_eq!(r["c"], ProbeValue::Scalar(3));
        assert_eq!(r["t"], ProbeValue::Scalar(1));
    }

    #[test]
    fn noisy_accumulators_are_unsupported() {
        let net = parse_netlist("block a source value=5\nblock p accumulator ref=main model=photon flux=2 noise=poisson\nwire a.out p.in0\n").unwrap();
        assert!(matches!(evaluate(&net), Err(OracleError::Unsupported(..))));
    }
}
