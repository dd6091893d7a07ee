use std::io::{self, Write};

use super::RunRecord;

pub const CSV_HEADER: &str = "x,y,mu,nu,r_raw,r_clamped,i_e,c_low,e_zz_up,e_zz_mumu,q_zz_mumu,error";

fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n', '\r'], ";")
}

/// Write records as CSV. Empty cells mark values that do not apply: `y` for
/// one-axis sweeps, intensities in single-photon mode, and every metric on
/// a failed point.
pub fn write_csv<W: Write>(records: &[RunRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let checked = r.result.clone().and_then(|m| m.validate().map(|_| m).map_err(|e| e.to_string()));
        let cells = match checked {
            Ok(m) => {
                let (mu, nu) = m.mu_nu.unzip();
                [
                    num(r.x),
                    opt(r.y),
                    opt(mu),
                    opt(nu),
                    num(m.rate.r_raw),
                    num(m.rate.r_clamped),
                    num(m.rate.eve.i_e),
                    num(m.c_low),
                    num(m.e_zz_up),
                    num(m.e_zz_mumu),
                    num(m.q_zz_mumu),
                    String::new(),
                ]
            }
            Err(e) => {
                let mut cells: [String; 12] = Default::default();
                cells[0] = num(r.x);
                cells[1] = opt(r.y);
                cells[11] = sanitize(&e);
                cells
            }
        };
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
