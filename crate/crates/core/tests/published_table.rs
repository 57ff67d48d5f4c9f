//! Cross-checks the committed comparison fixture against the LaTeX source
//! of the published table.

use awn_core::goals::{static_matrix, Column, Goal, Symbol, TABLE1_FIXTURE};

fn latex_rows() -> Vec<Vec<Symbol>> {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../paper.md")).expect("published source");
    let mut rows = Vec::new();
    for line in src.lines() {
        let t = line.trim();
        let Some(rest) = t.strip_prefix('G') else { continue };
        let Some((num, cells)) = rest.split_once('.') else { continue };
        let Some(cells) = cells.trim_start().strip_prefix("&&") else { continue };
        if num.parse::<u8>().is_err() {
            continue;
        }
        let cells = cells.split("\\\\").next().unwrap_or(cells);
        let row: Vec<Symbol> = cells
            .split('&')
            .map(|c| match c.trim() {
                "$-*$" => Symbol::Implicit,
                "$*$" => Symbol::Meets,
                "($*$)" => Symbol::Conditional,
                "$\\times$" => Symbol::Fails,
                other => panic!("unexpected cell {other:?}"),
            })
            .collect();
        rows.push(row);
    }
    rows
}

#[test]
fn matrix_matches_published_latex() {
    let rows = latex_rows();
    assert_eq!(rows.len(), 13);
    let m = static_matrix();
    for g in Goal::ALL {
        assert_eq!(rows[g.index()].len(), 7);
        for c in Column::ALL {
            assert_eq!(m[g.index()][c.index()], rows[g.index()][c.index()], "{g} {c:?}");
        }
    }
}

#[test]
fn fixture_cells_parse_to_matrix() {
    let m = static_matrix();
    let body: Vec<&str> = TABLE1_FIXTURE.lines().skip(2).collect();
    assert_eq!(body.len(), 13);
    for (g, line) in Goal::ALL.iter().zip(body) {
        let cells: Vec<&str> = line.trim_matches('|').split('|').map(str::trim).collect();
        assert_eq!(cells[0], g.to_string());
        for c in Column::ALL {
            assert_eq!(Symbol::parse(cells[c.index() + 1]), Some(m[g.index()][c.index()]));
        }
    }
}
