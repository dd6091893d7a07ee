//! Flat `key = value` scenario files.
//!
//! Blank lines and lines starting with `#` are ignored; trailing `# …`
//! comments are stripped. Each key may appear once. Apart from `mode`,
//! `output`, `decoy.n_cut`, `decoy.priors`, `decoy.optimize` and the
//! `sweep.*`/`heatmap.*` axes, every key is a numeric parameter accepted by
//! [`Scenario::set_variable`].

use std::collections::HashMap;

use super::{Mode, Scenario, SweepSpec};
use crate::error::Error;

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn number(line: usize, key: &str, v: &str) -> Result<f64, Error> {
    v.parse::<f64>().map_err(|_| err(line, format!("{key}: {v:?} is not a number")))
}

fn count(line: usize, key: &str, v: &str) -> Result<usize, Error> {
    v.parse::<usize>().map_err(|_| err(line, format!("{key}: {v:?} is not a non-negative integer")))
}

#[derive(Default)]
struct Axis {
    variable: Option<(usize, String)>,
    from: Option<f64>,
    to: Option<f64>,
    steps: Option<usize>,
    first_line: Option<usize>,
}

impl Axis {
    fn touch(&mut self, line: usize) {
        self.first_line.get_or_insert(line);
    }

    fn build(&self, section: &str, var_key: &str, variable: Option<&(usize, String)>) -> Result<Option<SweepSpec>, Error> {
        let Some(line) = self.first_line else { return Ok(None) };
        let missing = |k: &str| err(line, format!("{section} section is missing {section}.{k}"));
        let (_, var) = variable.ok_or_else(|| missing(var_key))?;
        let spec = SweepSpec {
            variable: var.clone(),
            from: self.from.ok_or_else(|| missing("from"))?,
            to: self.to.ok_or_else(|| missing("to"))?,
            steps: self.steps.ok_or_else(|| missing("steps"))?,
        };
        spec.validate().map_err(|e| err(line, e.to_string()))?;
        Ok(Some(spec))
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, Error> {
    let mut sc = Scenario::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut sweep = Axis::default();
    let mut heat = Axis::default();
    let mut heat_y: Option<(usize, String)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| err(line, format!("expected key = value, got {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(err(line, "empty key or value"));
        }
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(err(line, format!("{key} already set on line {first}")));
        }
        match key {
            "mode" => sc.mode = value.parse::<Mode>().map_err(|e| err(line, e.to_string()))?,
            "output" => sc.output = Some(value.into()),
            "decoy.n_cut" => sc.decoy.n_cut = count(line, key, value)?,
            "decoy.priors" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(err(line, "decoy.priors needs three comma-separated values"));
                }
                for (slot, p) in sc.decoy.priors.iter_mut().zip(parts) {
                    *slot = number(line, key, p)?;
                }
            }
            "decoy.optimize" => {
                sc.optimize = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(err(line, format!("decoy.optimize: expected true or false, got {value:?}"))),
                }
            }
            "sweep.variable" => {
                sweep.touch(line);
                sweep.variable = Some((line, value.to_string()));
            }
            "sweep.from" => {
                sweep.touch(line);
                sweep.from = Some(number(line, key, value)?);
            }
            "sweep.to" => {
                sweep.touch(line);
                sweep.to = Some(number(line, key, value)?);
            }
            "sweep.steps" => {
                sweep.touch(line);
                sweep.steps = Some(count(line, key, value)?);
            }
            "heatmap.x" => {
                heat.touch(line);
                heat.variable = Some((line, value.to_string()));
            }
            "heatmap.y" => {
                heat.touch(line);
                heat_y = Some((line, value.to_string()));
            }
            "heatmap.from" => {
                heat.touch(line);
                heat.from = Some(number(line, key, value)?);
            }
            "heatmap.to" => {
                heat.touch(line);
                heat.to = Some(number(line, key, value)?);
            }
            "heatmap.steps" => {
                heat.touch(line);
                heat.steps = Some(count(line, key, value)?);
            }
            _ => {
                let v = number(line, key, value)?;
                sc.set_variable(key, v).map_err(|e| err(line, e.to_string()))?;
            }
        }
    }

    sc.sweep = sweep.build("sweep", "variable", sweep.variable.as_ref())?;
    let x = heat.build("heatmap", "x", heat.variable.as_ref())?;
    let y = heat.build("heatmap", "y", heat_y.as_ref())?;
    sc.heatmap = x.zip(y);
    sc.validate()?;
    Ok(sc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_example() {
        let text = "\
# Z-basis flaw sweep
mode = wcs
alice.delta1 = 0.063   # trailing comment
model.distance = 100
decoy.mu = 0.4
decoy.nu = 0.02
decoy.priors = 0.5, 0.25, 0.25
decoy.optimize = false
rate.f_ec = 1.1
sweep.variable = delta_z
sweep.from = 0
sweep.to = 0.126
sweep.steps = 7
output = out.csv
";
        let sc = parse_scenario(text).unwrap();
        assert_eq!(sc.alice.delta1, 0.063);
        assert_eq!(sc.model.dist_a, 50.0);
        assert_eq!((sc.decoy.mu, sc.decoy.nu), (0.4, 0.02));
        assert_eq!(sc.decoy.priors, [0.5, 0.25, 0.25]);
        assert_eq!(sc.f_ec, 1.1);
        assert_eq!(sc.sweep, Some(SweepSpec::new("delta_z", 0.0, 0.126, 7)));
        assert_eq!(sc.output.as_deref(), Some(std::path::Path::new("out.csv")));
    }

    #[test]
    fn heatmap_axes() {
        let text = "heatmap.x = alice.delta_z\nheatmap.y = bob.delta_z\nheatmap.from = 0\nheatmap.to = 0.126\nheatmap.steps = 3\n";
        let (x, y) = parse_scenario(text).unwrap().heatmap.unwrap();
        assert_eq!((x.variable.as_str(), y.variable.as_str(), y.steps), ("alice.delta_z", "bob.delta_z", 3));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = |t: &str| match parse_scenario(t) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(bad("mode = wcs\nmode = sps\n"), 2);
        assert_eq!(bad("\n\nalice.delta9 = 1\n"), 3);
        assert_eq!(bad("decoy.mu = lots\n"), 1);
        assert_eq!(bad("no equals sign\n"), 1);
        assert_eq!(bad("sweep.variable = distance\nsweep.from = 0\n"), 1);
        assert_eq!(bad("mode = qubits\n"), 1);
    }
}
