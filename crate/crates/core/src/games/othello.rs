use super::{Player, Position, EMPTY};

const DIRECTIONS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Standard centre setup; player 0 (black) holds the anti-diagonal pair.
pub(super) fn initial_board(side: usize) -> Vec<u8> {
    let mut b = vec![EMPTY; side * side];
    let (lo, hi) = (side / 2 - 1, side / 2);
    b[lo * side + lo] = 2;
    b[hi * side + hi] = 2;
    b[lo * side + hi] = 1;
    b[hi * side + lo] = 1;
    b
}

fn flips_in_direction(board: &[u8], side: usize, player: Player, cell: usize, dir: (isize, isize)) -> usize {
    let (own, opp) = (player + 1, 2 - player);
    let n = side as isize;
    let (mut r, mut c) = ((cell / side) as isize + dir.0, (cell % side) as isize + dir.1);
    let mut count = 0;
    while r >= 0 && r < n && c >= 0 && c < n {
        let v = board[(r * n + c) as usize];
        if v == opp {
            count += 1;
        } else if v == own {
            return count;
        } else {
            return 0;
        }
        r += dir.0;
        c += dir.1;
    }
    0
}

fn is_placement(board: &[u8], side: usize, player: Player, cell: usize) -> bool {
    board[cell] == EMPTY
        && DIRECTIONS
            .iter()
            .any(|&d| flips_in_direction(board, side, player, cell, d) > 0)
}

fn has_placement(board: &[u8], side: usize, player: Player) -> bool {
    (0..side * side).any(|i| is_placement(board, side, player, i))
}

/// Placements for `player`, or only the pass slot when there are none.
pub(super) fn legal_bits(board: &[u8], side: usize, player: Player) -> Vec<bool> {
    let mut bits: Vec<bool> = (0..side * side).map(|i| is_placement(board, side, player, i)).collect();
    let any = bits.iter().any(|&b| b);
    bits.push(!any);
    bits
}

/// The game ends as soon as neither side can place a stone; a player who
/// cannot place while the opponent can is left to play the pass action.
pub(super) fn apply(board: &[u8], side: usize, mover: Player, action: usize) -> (Position, Option<i8>) {
    let mut next = board.to_vec();
    if action == side * side {
        return (Position::Board(next), None);
    }
    next[action] = mover + 1;
    let n = side as isize;
    for &d in &DIRECTIONS {
        let k = flips_in_direction(board, side, mover, action, d);
        let (mut r, mut c) = ((action / side) as isize, (action % side) as isize);
        for _ in 0..k {
            r += d.0;
            c += d.1;
            next[(r * n + c) as usize] = mover + 1;
        }
    }
    let opponent = 1 - mover;
    let outcome = if has_placement(&next, side, opponent) || has_placement(&next, side, mover) {
        None
    } else {
        let own = next.iter().filter(|&&v| v == mover + 1).count();
        let opp = next.iter().filter(|&&v| v == opponent + 1).count();
        Some(match own.cmp(&opp) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => -1,
            std::cmp::Ordering::Equal => 0,
        })
    };
    (Position::Board(next), outcome)
}

pub(super) fn render(board: &[u8], side: usize) -> String {
    let mut out = String::from("  ");
    for c in 0..side {
        out.push((b'a' + c as u8) as char);
        out.push(' ');
    }
    out.push('\n');
    for r in 0..side {
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
    let x = board.iter().filter(|&&v| v == 1).count();
    let o = board.iter().filter(|&&v| v == 2).count();
    out.push_str(&format!("X: {x}  O: {o}\n"));
    out
}
