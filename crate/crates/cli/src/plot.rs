//! gnuplot script generation for trace CSVs.

use std::fmt::Write;

use crate::CliError;

/// Columns of the header row that carry a given `prefix_<i>` stem.
fn indexed<'a>(header: &'a [&'a str], prefix: &str) -> Vec<&'a str> {
    header
        .iter()
        .copied()
        .filter(|h| {
            h.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('_'))
                .is_some_and(|i| i.parse::<usize>().is_ok())
        })
        .collect()
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Euclidean norm over a group of columns as a gnuplot expression.
fn norm_expr(cols: &[&str]) -> String {
    let squares: Vec<String> = cols.iter().map(|c| format!("column({})**2", quote(c))).collect();
    format!("sqrt({})", squares.join(" + "))
}

/// Builds a script plotting `|theta_tilde|`, `|zbar|`, `delta` and `V0`
/// against `t`. Only the header of `csv_text` is inspected; columns other
/// than those are ignored.
pub fn script(csv_text: &str, csv_path: &str, png_path: &str) -> Result<String, CliError> {
    let header_line = csv_text
        .lines()
        .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .ok_or_else(|| CliError::config(format!("{csv_path}: no header row")))?;
    let header: Vec<&str> = header_line.split(',').map(str::trim).collect();
    let require = |name: &str| {
        if header.contains(&name) {
            Ok(())
        } else {
            Err(CliError::config(format!("{csv_path}: header lacks column `{name}`")))
        }
    };
    for name in ["t", "delta", "V0"] {
        require(name)?;
    }
    let theta_tilde = indexed(&header, "thetatilde");
    let z_bar = indexed(&header, "zbar");
    if theta_tilde.is_empty() || z_bar.is_empty() {
        return Err(CliError::config(format!(
            "{csv_path}: header lacks thetatilde_i or zbar_i columns"
        )));
    }

    let data = quote(csv_path);
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot script written by drem-observer plot");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set datafile columnheaders");
    let _ = writeln!(s, "set terminal pngcairo size 1000,1000");
    let _ = writeln!(s, "set output {}", quote(png_path));
    let _ = writeln!(s, "set multiplot layout 4,1");
    let _ = writeln!(s, "set xlabel 't'");
    let _ = writeln!(s, "set grid");
    let panels = [
        ("|theta_tilde|", norm_expr(&theta_tilde)),
        ("|zbar|", norm_expr(&z_bar)),
        ("delta", "column('delta')".to_string()),
        ("V0", "column('V0')".to_string()),
    ];
    for (label, expr) in panels {
        let _ = writeln!(s, "set ylabel {}", quote(label));
        let _ = writeln!(s, "plot {data} using (column('t')):({expr}) with lines notitle");
    }
    let _ = writeln!(s, "unset multiplot");
    Ok(s)
}
