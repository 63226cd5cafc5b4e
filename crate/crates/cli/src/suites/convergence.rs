//! Refinement studies for the dual operator and the Weitzenböck identity.

use std::io::{self, Write};

use anyhow::{ensure, Result};
use clifford_l2::convergence::{
    default_bump_grid, dual_operator_study, strictly_decreasing, weitzenbock_study, BumpSpec, Study,
};
use clifford_l2::field::CliffordField;
use clifford_l2::solver::{ramp_amplitude, weitzenbock_residual};
use clifford_l2::weight::WeightSpec;

use super::ORDER_THRESHOLD;
use crate::report::Record;

/// Finest-rung Weitzenböck gap allowed, relative to the left-hand side.
pub const WEITZENBOCK_FINEST_TOL: f64 = 1e-4;
/// Cap on `nodes · 2^n` at the finest rung.
const LADDER_BUDGET: usize = 1 << 26;

pub struct ConvergenceRun {
    pub records: Vec<Record>,
    pub studies: Vec<(String, Study)>,
}

/// Values per field at the finest rung of a ladder.
pub fn finest_size(n: usize, base_count: usize, rungs: usize) -> usize {
    let count = (base_count - 1) * (1 << (rungs - 1)) + 1;
    count.pow(n as u32 + 1) << n
}

pub fn check_budget(n: usize, base_count: usize, rungs: usize) -> Result<()> {
    let size = finest_size(n, base_count, rungs);
    ensure!(
        size <= LADDER_BUDGET,
        "ladder finest rung holds {size} values per field (limit {LADDER_BUDGET}); use fewer rungs or a smaller base_count"
    );
    Ok(())
}

pub fn run(n: usize, w: &WeightSpec, base_count: usize, rungs: usize) -> Result<ConvergenceRun> {
    ensure!(rungs >= 2, "ladder needs at least 2 rungs");
    check_budget(n, base_count, rungs)?;
    let base = default_bump_grid(n, base_count)?;
    let amp = ramp_amplitude(n);
    let bump = BumpSpec::default();
    let mut records = Vec::new();

    let dual = dual_operator_study(&base, n, w, &amp, bump, rungs)?;
    let dual_ok =
        strictly_decreasing(&dual.values()) && dual.order.is_some_and(|p| p >= ORDER_THRESHOLD);
    records.push(
        study_record(
            "dual_operator_gap",
            "analytic dual (D phi) alpha - D alpha against the exact weighted adjoint",
            dual_ok,
            &dual,
            w,
        )
        .param("base_count", base_count),
    );

    let include_curvature = n > 1;
    let weitz = weitzenbock_study(&base, n, w, &amp, bump, include_curvature, rungs)?;
    let finest = weitz.rungs.last().expect("rungs >= 2");
    let finest_rel = finest.value / finest.reference.unwrap_or(f64::NAN);
    let weitz_ok = strictly_decreasing(&weitz.values())
        && weitz.order.is_some_and(|p| p >= ORDER_THRESHOLD)
        && finest_rel <= WEITZENBOCK_FINEST_TOL;
    let lhs: Vec<Option<f64>> = weitz.rungs.iter().map(|r| r.reference).collect();
    records.push(
        study_record(
            "weitzenbock_gap",
            "||D_bar* alpha||^2 = ||D_bar alpha||^2 + int |alpha|^2 Laplacian(phi) e^-phi + I3",
            weitz_ok,
            &weitz,
            w,
        )
        .param("base_count", base_count)
        .param("include_curvature", include_curvature)
        .num("lhs", lhs)
        .num("finest_relative_gap", finest_rel)
        .num("finest_relative_tolerance", WEITZENBOCK_FINEST_TOL),
    );

    let zero = CliffordField::zeros(&base, n)?;
    let r = weitzenbock_residual(&zero, w, include_curvature)?;
    records.push(
        Record::new(
            "weitzenbock_zero_alpha",
            "gap vanishes for alpha = 0",
            r.gap == 0.0,
        )
        .param("n", n)
        .num("gap", r.gap),
    );

    Ok(ConvergenceRun {
        records,
        studies: vec![(w.name().to_string(), dual), (w.name().to_string(), weitz)],
    })
}

fn study_record(id: &str, anchor: &str, ok: bool, s: &Study, w: &WeightSpec) -> Record {
    let hs: Vec<f64> = s.rungs.iter().map(|r| r.h).collect();
    Record::new(id, anchor, ok)
        .param("n", s.n)
        .param("weight", w.name())
        .param("rungs", s.rungs.len())
        .num("h", hs)
        .num("gap", s.values())
        .num("order", s.order)
        .num("order_threshold", ORDER_THRESHOLD)
}

/// Plot-ready table: one row per rung.
pub fn write_csv<W: Write>(studies: &[(String, Study)], mut out: W) -> io::Result<()> {
    writeln!(out, "study,n,weight,rung,counts,h,value,reference,order")?;
    for (weight, s) in studies {
        let order = s.order.map(|p| format!("{p:?}")).unwrap_or_default();
        for (k, r) in s.rungs.iter().enumerate() {
            let counts: Vec<String> = r.counts.iter().map(|c| c.to_string()).collect();
            let reference = r.reference.map(|v| format!("{v:?}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{:?},{:?},{},{}",
                s.name,
                s.n,
                weight,
                k,
                counts.join(";"),
                r.h,
                r.value,
                reference,
                order
            )?;
        }
    }
    Ok(())
}
