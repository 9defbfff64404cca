//! Operand-level tokenizer.
//!
//! One token per mnemonic, per operand, and per label definition; directive
//! lines contribute a name token plus an argument token. Tokens record the
//! function-relative line index and the column span within the canonical
//! printed text, and concatenating token texts with the recorded separators
//! reproduces that text exactly.

use super::print::{line_elements, separator};
use super::AsmFunction;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Function-relative line index.
    pub line: usize,
    /// Byte columns within the canonical printed line.
    pub col_start: usize,
    pub col_end: usize,
}

/// Tokens plus the separator strings between them. `seps.len()` is always
/// `tokens.len() + 1`: leading separator, one between each adjacent pair,
/// and a trailing one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedFunction {
    pub tokens: Vec<Token>,
    pub seps: Vec<String>,
}

impl TokenizedFunction {
    /// Reassemble the exact canonical text the tokens were produced from.
    pub fn reconstruct(&self) -> String {
        let mut out = String::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            out.push_str(&self.seps[i]);
            out.push_str(&tok.text);
        }
        out.push_str(self.seps.last().map(String::as_str).unwrap_or(""));
        out
    }

    /// Token indices covering line `line`.
    pub fn tokens_on_line(&self, line: usize) -> std::ops::Range<usize> {
        let start = self.tokens.partition_point(|t| t.line < line);
        let end = self.tokens.partition_point(|t| t.line <= line);
        start..end
    }
}

/// Tokenize a function against its canonical printed form.
pub fn tokenize_function(f: &AsmFunction) -> TokenizedFunction {
    let mut tokens = Vec::new();
    let mut seps: Vec<String> = Vec::new();
    let mut pending = String::new();
    for (line_idx, line) in f.lines.iter().enumerate() {
        let elements = line_elements(line);
        let mut col = 0usize;
        for (i, el) in elements.iter().enumerate() {
            let sep = separator(line, i);
            pending.push_str(sep);
            col += sep.len();
            seps.push(std::mem::take(&mut pending));
            tokens.push(Token {
                text: el.clone(),
                line: line_idx,
                col_start: col,
                col_end: col + el.len(),
            });
            col += el.len();
        }
        pending.push('\n');
    }
    seps.push(pending);
    TokenizedFunction { tokens, seps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::{parse_program, print_function, Isa};

    fn tokens_of(text: &str, isa: Isa) -> (TokenizedFunction, String) {
        let p = parse_program(text, isa).unwrap();
        let f = p.functions().next().unwrap();
        (tokenize_function(f), print_function(f))
    }

    #[test]
    fn single_instruction_single_token() {
        let (tf, printed) = tokens_of("f:\n\tret\n", Isa::Armv8);
        let texts: Vec<_> = tf.tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["f:", "ret"]);
        assert_eq!(tf.reconstruct(), printed);
    }

    #[test]
    fn operands_are_individual_tokens_on_one_line() {
        let (tf, printed) = tokens_of("f:\n\tadd\tw1, w0, w2\n", Isa::Armv8);
        let texts: Vec<_> = tf.tokens.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, vec!["f:", "add", "w1", "w0", "w2"]);
        assert!(tf.tokens[1..].iter().all(|t| t.line == 1));
        assert_eq!(tf.reconstruct(), printed);
        // Column spans index into the printed line.
        let line1: &str = printed.lines().nth(1).unwrap();
        for t in &tf.tokens[1..] {
            assert_eq!(&line1[t.col_start..t.col_end], t.text);
        }
    }

    #[test]
    fn token_count_partitions_by_line() {
        let text = "main:\n\tmov\tw0, 3\n\tadd\tw0, w0, w1\n.L2:\n\tret\n";
        let (tf, _) = tokens_of(text, Isa::Armv8);
        let p = parse_program(text, Isa::Armv8).unwrap();
        let f = p.functions().next().unwrap();
        let per_line: usize = (0..f.lines.len()).map(|l| tf.tokens_on_line(l).len()).sum();
        assert_eq!(per_line, tf.tokens.len());
        assert_eq!(tf.tokens_on_line(1).len(), 3);
        assert_eq!(tf.tokens_on_line(3).len(), 1);
    }
}
