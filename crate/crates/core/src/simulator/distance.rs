//! Forward and backward reuse tables over an access sequence.

use std::collections::HashMap;
use std::hash::Hash;

/// Absolute index of the next access to the same key, per position.
pub fn next_use_index<K: Eq + Hash + Copy>(keys: &[K]) -> Vec<Option<usize>> {
    let mut next = vec![None; keys.len()];
    let mut seen: HashMap<K, usize> = HashMap::new();
    for (i, k) in keys.iter().enumerate().rev() {
        next[i] = seen.insert(*k, i);
    }
    next
}

/// Forward distance `j - i` to the next access of the same key; `None` if never reused.
pub fn next_use_table<K: Eq + Hash + Copy>(keys: &[K]) -> Vec<Option<u64>> {
    next_use_index(keys)
        .into_iter()
        .enumerate()
        .map(|(i, j)| j.map(|j| (j - i) as u64))
        .collect()
}

/// Number of intervening accesses since the previous access to the same key;
/// `None` on first touch.
pub fn recency_table<K: Eq + Hash + Copy>(keys: &[K]) -> Vec<Option<u64>> {
    let mut last: HashMap<K, usize> = HashMap::new();
    keys.iter()
        .enumerate()
        .map(|(i, k)| last.insert(*k, i).map(|p| (i - p - 1) as u64))
        .collect()
}
