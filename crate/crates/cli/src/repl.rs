//! One comment per input line, one score per output line.

use std::io::{self, BufRead, Write};

use toxscore_core::ModelBundle;

use crate::Bands;

/// `0.1234\tlow`, or with `exact` a third column holding the score's
/// shortest round-trip decimal form.
pub fn format_line(score: f64, bands: &Bands, exact: bool) -> String {
    if exact {
        format!("{score:.4}\t{}\t{score}", bands.label(score))
    } else {
        format!("{score:.4}\t{}", bands.label(score))
    }
}

/// Reads until EOF. Trailing `\n` / `\r\n` are not part of the comment.
pub fn run_repl<R: BufRead, W: Write>(
    bundle: &ModelBundle,
    input: R,
    mut output: W,
    bands: &Bands,
    exact: bool,
) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        let text = line.strip_suffix('\r').unwrap_or(&line);
        let scored = bundle.score(text);
        writeln!(output, "{}", format_line(scored.score, bands, exact))?;
        output.flush()?;
    }
    Ok(())
}
