#![allow(dead_code)]

use std::collections::BTreeSet;

use l2t_core::Sample;
use proptest::prelude::*;

pub const FIXTURE_FORMS: &[&str] = &[
    "argmax { all_rows ; attendance }",
    "argmax { all_rows ; date }",
    "hop { argmax { all_rows ; attendance } ; date }",
    "eq { hop { argmax { all_rows ; score } ; attendance } ; 5032 }",
    "eq { hop { argmax { all_rows ; televote } ; song } ; dj , take me away } = true",
    "eq { hop { argmin { all_rows ; televote } ; song } ; tazi vecher } = true",
    "eq { hop { nth_argmin { all_rows ; react ; 2 } ; athlete } ; jaysuma saidy ndure } = true",
    "eq { hop { nth_argmax { all_rows ; react ; 2 } ; athlete } ; paul hession } = true",
    "most_greater { filter_eq { all_rows ; site ; memorial stadium minneapolis , mn } ; attendance ; 24999 } = true",
    "eq { max { filter_less { all_rows ; attendance ; 30000 } ; date } ; 11 / 24 / 1928 } = true",
    "eq { count { filter_less { filter_greater { all_rows ; year ; 1975 } ; points ; 1 } } ; 5 } = true",
    "eq { max { filter_less { all_rows ; area km square ; 10 } ; population } ; 5845 } = true",
];

/// Generated tree, kept independent of the library's types.
#[derive(Debug, Clone, PartialEq)]
pub enum RTree {
    Op(String, Vec<RTree>),
    Term(Vec<String>),
}

impl RTree {
    pub fn linearize(&self) -> String {
        match self {
            RTree::Term(words) => words.join(" "),
            RTree::Op(name, kids) => {
                let args: Vec<String> = kids.iter().map(RTree::linearize).collect();
                format!("{name} {{ {} }}", args.join(" ; "))
            }
        }
    }

    pub fn token_count(&self) -> usize {
        self.linearize().split_whitespace().count()
    }

    pub fn depth(&self) -> usize {
        match self {
            RTree::Term(_) => 1,
            RTree::Op(_, kids) => 1 + kids.iter().map(RTree::depth).max().unwrap_or(0),
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            RTree::Term(_) => 1,
            RTree::Op(_, kids) => 1 + kids.iter().map(RTree::nodes).sum::<usize>(),
        }
    }
}

const OPS: &[&str] = &[
    "eq",
    "hop",
    "argmax",
    "argmin",
    "count",
    "filter_eq",
    "filter_less",
    "max",
    "avg",
    "sum",
    "most_greater",
    "nth_argmax",
    "only",
    "and",
    "round_eq",
];
const WORDS: &[&str] = &[
    "all_rows",
    "attendance",
    "date",
    "5032",
    "ohio",
    "state",
    "dj",
    ",",
    "1,000",
    "score",
    "11",
    "/",
    "24",
    "memorial",
    "stadium",
    "take",
    "me",
    "away",
    "'",
    "-",
    "x1",
    "45%",
    "(a)",
];

pub fn word() -> impl Strategy<Value = String> {
    prop::sample::select(WORDS).prop_map(str::to_string)
}

pub fn terminal() -> impl Strategy<Value = RTree> {
    prop::collection::vec(word(), 1..4).prop_map(RTree::Term)
}

/// Trees whose root is an operator.
pub fn op_tree(depth: u32, width: usize) -> impl Strategy<Value = RTree> {
    let op = prop::sample::select(OPS).prop_map(str::to_string);
    (op.clone(), prop::collection::vec(terminal(), 1..=width))
        .prop_map(|(o, k)| RTree::Op(o, k))
        .prop_recursive(depth, 32, width as u32, move |inner| {
            (
                prop::sample::select(OPS).prop_map(str::to_string),
                prop::collection::vec(prop_oneof![2 => inner, 1 => terminal()], 1..=width),
            )
                .prop_map(|(o, k)| RTree::Op(o, k))
        })
}

/// Operator-rooted trees, plus bare terminals such as `all_rows`.
pub fn any_tree(depth: u32, width: usize) -> impl Strategy<Value = RTree> {
    prop_oneof![
        1 => prop::collection::vec(
            prop::sample::select(&WORDS[..7]).prop_map(str::to_string), 1..3
        ).prop_map(RTree::Term),
        8 => op_tree(depth, width),
    ]
}

/// Visibility computed straight from the token sequence with a brace
/// stack, without any tree.
pub fn brute_force_mask(form: &str, parent_too: bool) -> Vec<Vec<u8>> {
    let toks: Vec<&str> = form.split_whitespace().collect();
    let n = toks.len();
    let is_punct = |t: &str| matches!(t, "{" | "}" | ";");
    let is_op = |i: usize| !is_punct(toks[i]) && toks.get(i + 1) == Some(&"{");

    // Owner operator of every token (for punctuation and terminal words),
    // parent operator of every operator, and terminal groups.
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut parent_op: Vec<Option<usize>> = vec![None; n];
    let mut group: Vec<usize> = (0..n).collect();
    let mut heads: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stack: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < n {
        let t = toks[i];
        if is_op(i) {
            parent_op[i] = stack.last().copied();
            if let Some(&p) = stack.last() {
                heads[p].push(i);
            }
            owner[i + 1] = Some(i);
            stack.push(i);
            i += 2;
            continue;
        }
        if t == "}" || t == ";" {
            owner[i] = stack.last().copied();
            if t == "}" {
                stack.pop();
            }
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !is_punct(toks[i]) && !is_op(i) {
            group[i] = start;
            owner[i] = stack.last().copied();
            if let Some(&p) = stack.last() {
                heads[p].push(i);
            }
            i += 1;
        }
    }

    let op_row = |o: usize| -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = BTreeSet::from([o]);
        seen.extend((0..n).filter(|&j| is_punct(toks[j]) && owner[j] == Some(o)));
        seen.extend(heads[o].iter().copied());
        if parent_too {
            seen.extend(parent_op[o]);
        }
        seen
    };
    (0..n)
        .map(|r| {
            let seen = if is_op(r) {
                op_row(r)
            } else if is_punct(toks[r]) {
                op_row(owner[r].expect("punctuation always has an owner"))
            } else {
                let mut s: BTreeSet<usize> = (0..n)
                    .filter(|&j| !is_punct(toks[j]) && !is_op(j) && group[j] == group[r])
                    .collect();
                if let Some(p) = owner[r] {
                    s.insert(p);
                    s.extend((0..n).filter(|&j| is_punct(toks[j]) && owner[j] == Some(p)));
                }
                s
            };
            (0..n).map(|c| u8::from(seen.contains(&c))).collect()
        })
        .collect()
}

/// Edges of the clause pattern `w_i { A ; w_j ; B }` as token positions of
/// (operator, argument head), found by scanning each clause at depth one.
pub fn brute_force_edges(form: &str) -> BTreeSet<(usize, usize)> {
    let toks: Vec<&str> = form.split_whitespace().collect();
    let mut edges = BTreeSet::new();
    for i in 0..toks.len() {
        if toks.get(i + 1) != Some(&"{") || matches!(toks[i], "{" | "}" | ";") {
            continue;
        }
        let mut depth = 0;
        let mut at_arg_start = true;
        for (j, t) in toks.iter().enumerate().skip(i + 2) {
            match *t {
                "{" => depth += 1,
                "}" if depth == 0 => break,
                "}" => depth -= 1,
                ";" if depth == 0 => at_arg_start = true,
                _ if depth == 0 && at_arg_start => {
                    edges.insert((i, j));
                    at_arg_start = false;
                }
                _ => {}
            }
        }
    }
    edges
}

/// Clipped n-gram precision BLEU over whitespace tokens, written
/// independently from the library for cross-checking.
pub fn oracle_bleu(pairs: &[(Vec<&str>, Vec<&str>)]) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let (mut hl, mut rl) = (0, 0);
    for (r, h) in pairs {
        hl += h.len();
        rl += r.len();
        for n in 1..=4 {
            if h.len() < n {
                continue;
            }
            let hg: Vec<&[&str]> = h.windows(n).collect();
            let mut rg: Vec<&[&str]> = r.windows(n).collect();
            t[n - 1] += hg.len();
            for g in hg {
                if let Some(pos) = rg.iter().position(|x| *x == g) {
                    rg.remove(pos);
                    m[n - 1] += 1;
                }
            }
        }
    }
    if hl == 0 {
        return 0.0;
    }
    let mut logs = 0.0;
    for n in 0..4 {
        if t[n] == 0 {
            continue;
        }
        if m[n] == 0 {
            return 0.0;
        }
        logs += (m[n] as f64 / t[n] as f64).ln();
    }
    let bp = if hl < rl {
        (1.0 - rl as f64 / hl as f64).exp()
    } else {
        1.0
    };
    100.0 * bp * (logs / 4.0).exp()
}

fn row(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

/// Football-season tables. Every sentence echoes the headers of its form
/// and passes BLEC* against it.
pub fn games_dataset(n: usize) -> Vec<Sample> {
    let header = row(&["date", "opponent", "attendance", "score", "venue", "result"]);
    let opponents = [
        "ohio state",
        "purdue",
        "iowa",
        "wisconsin",
        "michigan",
        "indiana",
    ];
    let venues = ["memorial stadium", "ross - ade", "kinnick", "camp randall"];
    (0..n)
        .map(|i| {
            let table: Vec<Vec<String>> = (0..4)
                .map(|r| {
                    let k = i + r;
                    vec![
                        format!("october {}", 1 + k % 28),
                        opponents[k % opponents.len()].to_string(),
                        format!("{}", 20000 + 731 * k),
                        format!("{}", 3 + (k * 7) % 40),
                        venues[k % venues.len()].to_string(),
                        if k % 2 == 0 { "w".into() } else { "l".into() },
                    ]
                })
                .collect();
            let opp = &table[0][1];
            let venue = &table[1][4];
            let (form, sent) = match i % 4 {
                0 => (
                    format!("eq {{ hop {{ argmax {{ all_rows ; attendance }} ; opponent }} ; {opp} }} = true"),
                    format!("the game against {opp} had the highest attendance of any opponent ."),
                ),
                1 => (
                    format!("eq {{ count {{ filter_eq {{ all_rows ; venue ; {venue} }} }} ; 1 }} = true"),
                    format!("the number of games played at the venue {venue} is 1 ."),
                ),
                2 => (
                    format!("eq {{ hop {{ argmin {{ all_rows ; score }} ; opponent }} ; {opp} }} = true"),
                    format!("the opponent with the lowest score of the season was {opp} ."),
                ),
                _ => (
                    format!("most_greater {{ filter_eq {{ all_rows ; venue ; {venue} }} ; attendance ; 19999 }} = true"),
                    format!("most games at the venue {venue} had an attendance of more than 19,999 ."),
                ),
            };
            Sample::new(form, sent, format!("1928 golden gophers game {i}"), header.clone(), table)
        })
        .collect()
}
