use serde::{Deserialize, Serialize};

use super::state::GameState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Standing {
    pub player_id: String,
    pub board_position: u32,
    pub points: u32,
    pub rank: usize,
}

/// Players ordered by board position, then points. Equal (position, points)
/// pairs share a rank; the next rank skips accordingly (1, 1, 3).
pub fn standings(state: &GameState) -> Vec<Standing> {
    let mut rows: Vec<Standing> = state
        .players
        .iter()
        .map(|p| Standing {
            player_id: p.player_id.clone(),
            board_position: p.board_position,
            points: p.points,
            rank: 0,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.board_position
            .cmp(&a.board_position)
            .then(b.points.cmp(&a.points))
    });
    let mut rank = 0;
    let mut prev: Option<(u32, u32)> = None;
    for (i, row) in rows.iter_mut().enumerate() {
        let key = (row.board_position, row.points);
        if prev != Some(key) {
            rank = i + 1;
            prev = Some(key);
        }
        row.rank = rank;
    }
    rows
}
