use std::io::Write;

use crate::error::Result;
use crate::gd::{DiscreteField, GradientDiscretisation};

use super::StepLog;

/// Cellwise reconstructions as `cell,x,y,u,v`.
pub fn write_snapshot<W: Write>(
    out: W,
    gd: &GradientDiscretisation,
    u: &DiscreteField,
    v: &DiscreteField,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell", "x", "y", "u", "v"])?;
    let pu = gd.reconstruct(&u.0);
    let pv = gd.reconstruct(&v.0);
    for (k, c) in gd.mesh().cell_centroids().iter().enumerate() {
        w.write_record([
            k.to_string(),
            format!("{:.16e}", c[0]),
            format!("{:.16e}", c[1]),
            format!("{:.16e}", pu[k]),
            format!("{:.16e}", pv[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-step Picard statistics as `level,step,picard_iters,residual`.
pub fn write_solver_log<W: Write>(out: W, entries: &[(u32, StepLog)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "step", "picard_iters", "residual"])?;
    for (level, e) in entries {
        w.write_record([
            level.to_string(),
            e.step.to_string(),
            e.picard_iters.to_string(),
            format!("{:.6e}", e.residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}
