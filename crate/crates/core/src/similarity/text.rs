//! Token-sort edit-distance similarity for names.

/// Lowercased alphanumeric tokens, split on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Tokens sorted alphabetically and joined by single spaces.
pub fn token_sort(text: &str) -> String {
    let mut tokens = tokenize(text);
    tokens.sort();
    tokens.join(" ")
}

/// Levenshtein distance over Unicode scalar values (two-row DP).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - dist / max_len`, with empty-vs-empty = 1.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    let la = a.chars().count();
    let lb = b.chars().count();
    let longest = la.max(lb);
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Token-sort ratio in `[0, 1]`.
pub fn name_similarity(a: &str, b: &str) -> f64 {
    normalized_similarity(&token_sort(a), &token_sort(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exponential recursive definition.
    fn lev_oracle(a: &[char], b: &[char]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((ha, ta)), Some((hb, tb))) => {
                if ha == hb {
                    lev_oracle(ta, tb)
                } else {
                    1 + lev_oracle(ta, b).min(lev_oracle(a, tb)).min(lev_oracle(ta, tb))
                }
            }
        }
    }

    #[test]
    fn examples() {
        assert_eq!(name_similarity("Mall Bayfront", "bayfront mall"), 1.0);
        assert!((name_similarity("abc", "abd") - 0.6667).abs() < 1e-4);
        assert_eq!(name_similarity("", "cafe"), 0.0);
        assert_eq!(name_similarity("", ""), 1.0);
        assert_eq!(name_similarity("!!", "..."), 1.0);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn punctuation_splits_tokens() {
        assert_eq!(token_sort("McDonald's Tampines-Mall"), "mall mcdonald s tampines");
    }

    proptest! {
        #[test]
        fn dp_matches_recursive_oracle(a in "[abc]{0,8}", b in "[abc]{0,8}") {
            let ac: Vec<char> = a.chars().collect();
            let bc: Vec<char> = b.chars().collect();
            prop_assert_eq!(levenshtein(&a, &b), lev_oracle(&ac, &bc));
        }

        #[test]
        fn symmetric_bounded_permutation_invariant(words in proptest::collection::vec("[A-Za-z]{1,6}", 0..5), other in "[a-z ]{0,20}") {
            let joined = words.join(" ");
            let mut rev = words.clone();
            rev.reverse();
            let reversed = rev.join(" ").to_uppercase();
            prop_assert_eq!(name_similarity(&joined, &other), name_similarity(&other, &joined));
            prop_assert_eq!(name_similarity(&joined, &other), name_similarity(&reversed, &other));
            let s = name_similarity(&joined, &other);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
