//! Text renderings of run summaries and sweep tables.

use std::fmt::Write;

use drem_core::diagnostics::{KappaBound, RunSummary, LYAPUNOV_TOLERANCE};
use drem_core::sim::RhoSweepEntry;
use drem_core::Trace;

fn verdict(pass: bool, color: bool) -> &'static str {
    match (pass, color) {
        (true, false) => "PASS",
        (false, false) => "FAIL",
        (true, true) => "\x1b[32mPASS\x1b[0m",
        (false, true) => "\x1b[31mFAIL\x1b[0m",
    }
}

pub fn kappa_line(bound: &KappaBound, color: bool) -> String {
    format!("kappa-bound: {} (margin {:.6e})", verdict(bound.pass, color), bound.margin)
}

/// Human-readable block followed by `key=value` lines at full precision.
pub fn render(trace: &Trace, s: &RunSummary, color: bool) -> String {
    let g = &trace.gains;
    let rho = match trace.variant {
        drem_core::ObserverVariant::Prop1 => 0.0,
        drem_core::ObserverVariant::Prop2 => g.rho_gain,
    };
    let lyap_ok = s.lyapunov_max_increment <= LYAPUNOV_TOLERANCE;
    let mut out = String::new();
    let mut line = |label: &str, value: String| {
        let _ = writeln!(out, "  {label:<16}{value}");
    };
    line(
        "scenario",
        format!("{} ({} observer, {} mixing)", trace.scenario, trace.variant, g.mode),
    );
    line("gains", format!("lambda = {}, kappa = {}, rho = {rho}", g.lambda, g.kappa));
    line("step", format!("dt = {}, {} rows stored", trace.dt, trace.rows.len()));
    line("termination", trace.termination.to_string());
    line("final t", format!("{}", s.final_t));
    line("|theta_tilde|", format!("{:.6e}", s.final_theta_tilde));
    line("|zbar|", format!("{:.6e}", s.final_z_bar));
    line("|xhat - x|", format!("{:.6e}", s.final_x_error));
    line(
        "delta",
        format!("min {:.6e}, max {:.6e}, mean {:.6e}", s.delta_min, s.delta_max, s.delta_mean),
    );
    match &s.excitation {
        Some(e) => {
            line(
                "PE window",
                format!(
                    "T = {}: min integral {:.6e} vs level {:.1e}, {}",
                    e.pe_window_t,
                    e.min_window_integral,
                    e.pe_level,
                    if e.pe_satisfied { "satisfied" } else { "not satisfied" }
                ),
            );
            line(
                "int delta^2",
                format!(
                    "{:.6e}, tail slope {:.3e} ({})",
                    e.cumulative.total(),
                    e.cumulative.tail_slope,
                    if e.cumulative.consistent_with_non_square_integrable() {
                        "still growing"
                    } else {
                        "flat"
                    }
                ),
            );
        }
        None => line("PE window", "trace shorter than the window".into()),
    }
    line(
        "Lyapunov V0",
        format!(
            "max increment {:.3e} ({})",
            s.lyapunov_max_increment,
            if lyap_ok { "non-increasing" } else { "increasing" }
        ),
    );
    line("swap residual", format!("max {:.3e}", s.max_swap_residual));
    line("min eig Phi", format!("{:.6e}", s.min_eig_phi));
    if let Some(r) = s.decay_rate {
        line("log-error slope", format!("{r:.6}"));
    }

    let mut text = format!("drem-observer summary\n{out}{}\n\n", kappa_line(&s.kappa_bound, color));
    let mut kv = |key: &str, value: String| {
        let _ = writeln!(text, "{key}={value}");
    };
    let f = |v: f64| format!("{v:.16e}");
    kv("scenario", trace.scenario.clone());
    kv("observer", trace.variant.to_string());
    kv("mode", g.mode.to_string());
    kv("lambda", f(g.lambda));
    kv("kappa", f(g.kappa));
    kv("rho_gain", f(rho));
    kv("dt", f(trace.dt));
    kv("record_every", trace.record_every.to_string());
    kv("termination", termination_key(trace));
    kv("final_t", f(s.final_t));
    kv("final_theta_tilde_norm", f(s.final_theta_tilde));
    kv("final_zbar_norm", f(s.final_z_bar));
    kv("final_x_error_norm", f(s.final_x_error));
    kv("delta_min", f(s.delta_min));
    kv("delta_max", f(s.delta_max));
    kv("delta_mean", f(s.delta_mean));
    if let Some(e) = &s.excitation {
        kv("pe_window_T", f(e.pe_window_t));
        kv("pe_level", f(e.pe_level));
        kv("pe_min_window_integral", f(e.min_window_integral));
        kv("pe_satisfied", e.pe_satisfied.to_string());
        kv("cumulative_excitation", f(e.cumulative.total()));
        kv("cumulative_tail_slope", f(e.cumulative.tail_slope));
    }
    kv("lyapunov_max_increment", f(s.lyapunov_max_increment));
    kv("lyapunov_non_increasing", lyap_ok.to_string());
    kv("kappa_bound", if s.kappa_bound.pass { "PASS" } else { "FAIL" }.into());
    kv("kappa_margin", f(s.kappa_bound.margin));
    kv("max_swap_residual", f(s.max_swap_residual));
    kv("min_eig_phi", f(s.min_eig_phi));
    if let Some(r) = s.decay_rate {
        kv("log_error_slope", f(r));
    }
    text
}

fn termination_key(trace: &Trace) -> String {
    use drem_core::Termination::*;
    match trace.termination {
        Completed => "completed",
        Diverged { .. } => "diverged",
        Fault { .. } => "fault",
        PsiBoundViolated { .. } => "psi_bound_violated",
    }
    .into()
}

pub fn sweep_table(entries: &[RhoSweepEntry]) -> String {
    let mut out = format!(
        "{:>12} {:>24} {:>24} {:>24}\n",
        "rho", "sup|eps|", "sup|theta_tilde|", "final|theta_tilde|"
    );
    for e in entries {
        let _ = writeln!(
            out,
            "{:>12} {:>24.16e} {:>24.16e} {:>24.16e}",
            e.rho, e.sup_eps, e.sup_theta_tilde, e.final_theta_tilde
        );
    }
    out
}

pub fn sweep_csv(entries: &[RhoSweepEntry]) -> String {
    let mut out = String::from("rho,sup_eps,sup_theta_tilde,final_theta_tilde\n");
    for e in entries {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            e.rho, e.sup_eps, e.sup_theta_tilde, e.final_theta_tilde
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use drem_core::diagnostics::kappa_bound_check;

    #[test]
    fn kappa_lines() {
        let fail = kappa_line(&kappa_bound_check(0.2, 4.0, 1, 0.5), false);
        assert!(fail.starts_with("kappa-bound: FAIL (margin -5.0"), "{fail}");
        let pass = kappa_line(&kappa_bound_check(0.3, 4.0, 1, 0.5), true);
        assert!(pass.contains("\x1b[32mPASS"), "{pass}");
    }
}
