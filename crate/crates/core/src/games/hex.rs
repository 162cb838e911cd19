use std::collections::VecDeque;

use super::{Player, Position, EMPTY};

/// Player 0 joins the top and bottom rows, player 1 the left and right
/// columns. Cells are row-major on a rhombus.
pub(super) fn apply(board: &[u8], side: usize, mover: Player, cell: usize) -> (Position, Option<i8>) {
    let mut next = board.to_vec();
    next[cell] = mover + 1;
    let outcome = connects(&next, side, mover).then_some(1);
    (Position::Board(next), outcome)
}

pub(super) fn neighbors(cell: usize, side: usize) -> impl Iterator<Item = usize> {
    let (r, c) = ((cell / side) as isize, (cell % side) as isize);
    let n = side as isize;
    [(-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0)]
        .into_iter()
        .filter_map(move |(dr, dc)| {
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nr < n && nc >= 0 && nc < n).then(|| (nr * n + nc) as usize)
        })
}

pub(super) fn connects(board: &[u8], side: usize, player: Player) -> bool {
    let stone = player + 1;
    let on_start = |i: usize| {
        if player == 0 {
            i / side == 0
        } else {
            i.is_multiple_of(side)
        }
    };
    let on_end = |i: usize| {
        if player == 0 {
            i / side == side - 1
        } else {
            i % side == side - 1
        }
    };
    let mut seen = vec![false; board.len()];
    let mut queue: VecDeque<usize> = (0..board.len()).filter(|&i| board[i] == stone && on_start(i)).collect();
    for &i in &queue {
        seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        if on_end(i) {
            return true;
        }
        for j in neighbors(i, side) {
            if !seen[j] && board[j] == stone {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    false
}

pub(super) fn render(board: &[u8], side: usize) -> String {
    let mut out = String::from("  ");
    for c in 0..side {
        out.push((b'a' + c as u8) as char);
        out.push(' ');
    }
    out.push('\n');
    for r in 0..side {
        out.push_str(&" ".repeat(r));
        out.push_str(&format!("{:>2}", r + 1));
        for c in 0..side {
            let ch = match board[r * side + c] {
                EMPTY => '.',
                1 => 'X',
                _ => 'O',
            };
            out.push(' ');
            out.push(ch);
        }
        out.push('\n');
    }
    out.push_str("X joins top-bottom, O joins left-right\n");
    out
}
