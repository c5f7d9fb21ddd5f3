//! Linear-space Myers line diff, reduced to the set of inserted child lines.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddedLine {
    pub file: String,
    /// 1-based line number in the child version.
    pub line_number: u32,
    pub text: String,
}

/// Lines of `child` that a minimal line diff classifies as insertions.
/// A modified line shows up here in its new form.
pub fn added_lines(parent_text: &str, child_text: &str) -> Vec<AddedLine> {
    added_lines_in(parent_text, child_text, "")
}

pub fn added_lines_in(parent_text: &str, child_text: &str, file: &str) -> Vec<AddedLine> {
    let old: Vec<&str> = parent_text.lines().collect();
    let new: Vec<&str> = child_text.lines().collect();
    inserted_mask(&old, &new)
        .into_iter()
        .enumerate()
        .filter(|(_, inserted)| *inserted)
        .map(|(i, _)| AddedLine { file: file.to_string(), line_number: i as u32 + 1, text: new[i].to_string() })
        .collect()
}

/// `mask[j]` is true when `new[j]` is an insertion in a shortest edit script.
pub fn inserted_mask<T: PartialEq>(old: &[T], new: &[T]) -> Vec<bool> {
    let mut mask = vec![false; new.len()];
    let d_max = (old.len() + new.len()).div_ceil(2) + 1;
    let mut vf = V::new(d_max);
    let mut vb = V::new(d_max);
    conquer(old, 0..old.len(), new, 0..new.len(), &mut vf, &mut vb, &mut mask);
    mask
}

struct V {
    offset: isize,
    v: Vec<usize>,
}

impl V {
    fn new(max_d: usize) -> Self {
        V { offset: max_d as isize, v: vec![0; 2 * max_d + 1] }
    }
}

impl std::ops::Index<isize> for V {
    type Output = usize;
    fn index(&self, k: isize) -> &usize {
        &self.v[(k + self.offset) as usize]
    }
}

impl std::ops::IndexMut<isize> for V {
    fn index_mut(&mut self, k: isize) -> &mut usize {
        &mut self.v[(k + self.offset) as usize]
    }
}

type Range = std::ops::Range<usize>;

fn common_prefix<T: PartialEq>(old: &[T], o: Range, new: &[T], n: Range) -> usize {
    old[o].iter().zip(&new[n]).take_while(|(a, b)| a == b).count()
}

fn common_suffix<T: PartialEq>(old: &[T], o: Range, new: &[T], n: Range) -> usize {
    old[o].iter().rev().zip(new[n].iter().rev()).take_while(|(a, b)| a == b).count()
}

fn middle_snake<T: PartialEq>(
    old: &[T],
    o: Range,
    new: &[T],
    nr: Range,
    vf: &mut V,
    vb: &mut V,
) -> Option<(usize, usize)> {
    let n = o.len();
    let m = nr.len();
    let delta = n as isize - m as isize;
    let odd = delta & 1 == 1;
    vf[1] = 0;
    vb[1] = 0;
    let d_max = ((n + m).div_ceil(2) + 1) as isize;
    for d in 0..d_max {
        for k in (-d..=d).rev().step_by(2) {
            let mut x = if k == -d || (k != d && vf[k - 1] < vf[k + 1]) { vf[k + 1] } else { vf[k - 1] + 1 };
            let y = (x as isize - k) as usize;
            let (x0, y0) = (x, y);
            if x < n && y < m {
                x += common_prefix(old, o.start + x..o.end, new, nr.start + y..nr.end);
            }
            vf[k] = x;
            if odd && (k - delta).abs() < d && vf[k] + vb[-(k - delta)] >= n {
                return Some((x0 + o.start, y0 + nr.start));
            }
        }
        for k in (-d..=d).rev().step_by(2) {
            let mut x = if k == -d || (k != d && vb[k - 1] < vb[k + 1]) { vb[k + 1] } else { vb[k - 1] + 1 };
            let mut y = (x as isize - k) as usize;
            if x < n && y < m {
                let adv = common_suffix(old, o.start..o.start + n - x, new, nr.start..nr.start + m - y);
                x += adv;
                y += adv;
            }
            vb[k] = x;
            if !odd && (k - delta).abs() <= d && vb[k] + vf[-(k - delta)] >= n {
                return Some((n - x + o.start, m - y + nr.start));
            }
        }
    }
    None
}

fn conquer<T: PartialEq>(
    old: &[T],
    mut o: Range,
    new: &[T],
    mut nr: Range,
    vf: &mut V,
    vb: &mut V,
    mask: &mut [bool],
) {
    let prefix = common_prefix(old, o.clone(), new, nr.clone());
    o.start += prefix;
    nr.start += prefix;
    let suffix = common_suffix(old, o.clone(), new, nr.clone());
    o.end -= suffix;
    nr.end -= suffix;

    if nr.is_empty() {
        return;
    }
    if o.is_empty() {
        mask[nr].iter_mut().for_each(|b| *b = true);
        return;
    }
    match middle_snake(old, o.clone(), new, nr.clone(), vf, vb) {
        Some((x, y)) => {
            conquer(old, o.start..x, new, nr.start..y, vf, vb, mask);
            conquer(old, x..o.end, new, y..nr.end, vf, vb, mask);
        }
        None => mask[nr].iter_mut().for_each(|b| *b = true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(lines: &[AddedLine]) -> Vec<(u32, &str)> {
        lines.iter().map(|l| (l.line_number, l.text.as_str())).collect()
    }

    /// Quadratic LCS length; independent of the Myers path.
    fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                dp[i][j] = if a[i - 1] == b[j - 1] { dp[i - 1][j - 1] + 1 } else { dp[i - 1][j].max(dp[i][j - 1]) };
            }
        }
        dp[a.len()][b.len()]
    }

    fn is_subsequence<T: PartialEq>(needle: &[T], hay: &[T]) -> bool {
        let mut it = hay.iter();
        needle.iter().all(|x| it.any(|y| y == x))
    }

    #[test]
    fn identical_texts_add_nothing() {
        assert!(added_lines("a\nb\nc", "a\nb\nc").is_empty());
    }

    #[test]
    fn single_insertion() {
        assert_eq!(pairs(&added_lines("a\nb", "a\nX\nb")), vec![(2, "X")]);
    }

    #[test]
    fn modification_reported_as_addition() {
        assert_eq!(pairs(&added_lines("a\nb\nc", "a\nB\nc\nd")), vec![(2, "B"), (4, "d")]);
    }

    #[test]
    fn root_version_adds_everything() {
        assert_eq!(pairs(&added_lines("", "x\ny")), vec![(1, "x"), (2, "y")]);
        assert!(added_lines("x\ny", "").is_empty());
    }

    proptest! {
        #[test]
        fn minimal_and_consistent(old in prop::collection::vec(0u8..4, 0..40), new in prop::collection::vec(0u8..4, 0..40)) {
            let mask = inserted_mask(&old, &new);
            let inserted = mask.iter().filter(|b| **b).count();
            prop_assert_eq!(inserted, new.len() - lcs_len(&old, &new));
            let kept: Vec<u8> = new.iter().zip(&mask).filter(|(_, m)| !**m).map(|(x, _)| *x).collect();
            prop_assert!(is_subsequence(&kept, &old));
        }

        #[test]
        fn lines_occur_in_child(parent in "[ab\\n]{0,30}", child in "[abc\\n]{0,30}") {
            let child_lines: Vec<&str> = child.lines().collect();
            for l in added_lines(&parent, &child) {
                prop_assert_eq!(child_lines[l.line_number as usize - 1], l.text.as_str());
            }
            prop_assert!(added_lines(&parent, &parent).is_empty());
            prop_assert_eq!(added_lines("", &child).len(), child_lines.len());
        }
    }
}
