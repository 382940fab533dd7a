//! Markdown rendering of summaries.

use std::fmt::Write;

use skewfsv_core::backtest::BacktestReport;
use skewfsv_core::simulate::SkewnessCase;
use skewfsv_core::summary::PosteriorSummary;

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.prec$}"))
}

/// Posterior medians with 50% and 90% intervals, then `P(beta_i = 0)`.
pub fn posterior_markdown(s: &PosteriorSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## Posterior summary ({}, k = {}, p = {}, {} draws)\n", s.variant.name(), s.k, s.p, s.draws);
    let _ = writeln!(out, "| parameter | median | 50% interval | 90% interval | Geweke z | ESS |");
    let _ = writeln!(out, "|---|---:|---|---|---:|---:|");
    for p in &s.parameters {
        let _ = writeln!(
            out,
            "| {} | {:.4} | [{:.4}, {:.4}] | [{:.4}, {:.4}] | {} | {} |",
            p.name,
            p.median,
            p.q25,
            p.q75,
            p.q05,
            p.q95,
            opt(p.geweke_z, 2),
            opt(p.ess, 0)
        );
    }
    let _ = writeln!(out, "\n## Posterior probability of beta_i = 0\n");
    let _ = writeln!(out, "| series | P(beta = 0) |");
    let _ = writeln!(out, "|---|---:|");
    for (i, pz) in s.prob_beta_zero.iter().enumerate() {
        let _ = writeln!(out, "| {} | {:.3} |", series_label(i, s.k), pz);
    }
    if !s.acceptance.is_empty() {
        let _ = writeln!(out, "\n## Acceptance rates\n");
        let _ = writeln!(out, "| series | phi | sigma, rho | nu | level | spread | z | shrinks/block |");
        let _ = writeln!(out, "|---|---:|---:|---:|---:|---:|---:|---:|");
        for (i, a) in s.acceptance.iter().enumerate() {
            let _ = writeln!(
                out,
                "| {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |",
                series_label(i, s.k),
                a.phi,
                a.sigma_rho,
                a.nu,
                a.level,
                a.spread,
                a.z,
                a.h_shrinks
            );
        }
    }
    out
}

/// `i` is zero-based; factors are numbered after the observed series.
fn series_label(i: usize, k: usize) -> String {
    if i < k {
        format!("{} (Y{})", i + 1, i + 1)
    } else {
        format!("{} (f{})", i + 1, i - k + 1)
    }
}

pub fn backtest_markdown(r: &BacktestReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## Log predictive density ratios against {}\n", r.base.name());
    let horizons = r.lpdr.first().map_or(0, |x| x.per_horizon.len());
    let _ = write!(out, "| model |");
    for h in 1..=horizons {
        let _ = write!(out, " h = {h} |");
    }
    let _ = writeln!(out, " total |");
    let _ = writeln!(out, "|---|{}---:|", "---:|".repeat(horizons));
    for row in &r.lpdr {
        let _ = write!(out, "| {} |", row.variant.name());
        for v in &row.per_horizon {
            let _ = write!(out, " {v:.2} |");
        }
        let _ = writeln!(out, " {:.2} |", row.total);
    }
    let _ = writeln!(out, "\n## VaR violations (* rejected at 10%)\n");
    let _ = writeln!(out, "| model | rule | alpha | n | N | LR | p |");
    let _ = writeln!(out, "|---|---|---:|---:|---:|---:|---:|");
    for m in &r.models {
        for v in &m.var {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {}{} | {} | {:.3} | {:.3} |",
                m.variant.name(),
                v.rule.label(),
                v.alpha,
                v.violations,
                if v.reject_10 { "*" } else { "" },
                v.days,
                v.lr,
                v.p_value
            );
        }
    }
    let _ = writeln!(out, "\n## Cumulative portfolio returns\n");
    let _ = writeln!(out, "| model | rule | cumulative | fallback days |");
    let _ = writeln!(out, "|---|---|---:|---:|");
    for m in &r.models {
        for p in &m.portfolio {
            let _ = writeln!(out, "| {} | {} | {:.6} | {} |", m.variant.name(), p.rule.label(), p.cumulative, p.fallback_days);
        }
    }
    out
}

pub fn skewness_markdown(cases: &[SkewnessCase]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## Sample skewness by case\n");
    let _ = writeln!(out, "| case | series | median | 50% band | 90% band |");
    let _ = writeln!(out, "|---|---|---:|---|---|");
    for c in cases {
        for (i, b) in c.series.iter().enumerate() {
            let _ = writeln!(
                out,
                "| {} | Y{} | {:.3} | [{:.3}, {:.3}] | [{:.3}, {:.3}] |",
                c.label,
                i + 1,
                b.median,
                b.q25,
                b.q75,
                b.q05,
                b.q95
            );
        }
    }
    out
}
