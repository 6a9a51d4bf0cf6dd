mod common;

use std::collections::BTreeMap;

use common::{advance, corpus, drive, game, ids, seat};
use miboard_core::canonical::to_canonical_json;
use miboard_core::config::{CardKind, EventCard};
use miboard_core::protocol::ServerEvent;
use miboard_core::rng::Pcg32;
use miboard_core::rules::{draw_strategy, needs_debate, standings, tally_votes, TurnPhase};
use miboard_core::{
    Action, Effect, GameConfig, GameEvent, GameState, PurchaseKind, RuleError, Seat, SetupError,
    Strategy, TimerKind,
};

/// Independent PCG32 used to predict dice from a serialized generator.
struct ReferencePcg {
    state: u64,
    inc: u64,
}

impl ReferencePcg {
    fn from_state(state: &GameState) -> Self {
        let v = serde_json::to_value(&state.rng).unwrap();
        let hex = |k: &str| u64::from_str_radix(v[k].as_str().unwrap(), 16).unwrap();
        ReferencePcg {
            state: hex("state"),
            inc: hex("inc"),
        }
    }

    fn next(&mut self) -> u32 {
        let old = self.state;
        self.state = old
            .wrapping_mul(6364136223846793005)
            .wrapping_add(self.inc);
        let x = (((old >> 18) ^ old) >> 27) as u32;
        x.rotate_right((old >> 59) as u32)
    }

    fn die(&mut self, faces: u32) -> u32 {
        let threshold = (u32::MAX - faces + 1) % faces;
        loop {
            let r = self.next();
            if r >= threshold {
                return r % faces + 1;
            }
        }
    }
}

fn to_self_explaining(state: &GameState) -> GameState {
    assert_eq!(state.phase, TurnPhase::StrategyAssigned);
    advance(state).0
}

fn reader(state: &GameState) -> u8 {
    state.reader().unwrap().0
}

fn assigned(state: &GameState) -> Strategy {
    state.round.as_ref().unwrap().assigned_strategy
}

fn other(s: Strategy) -> Strategy {
    Strategy::ALL.into_iter().find(|x| *x != s).unwrap()
}

/// Submits the reader's self-explanation, leaving the round in Voting.
fn to_voting(state: &GameState) -> GameState {
    let s = to_self_explaining(state);
    let r = reader(&s);
    seat(
        &s,
        r,
        Action::SubmitSelfExplanation {
            text: "Because plants need light...".into(),
        },
    )
    .0
}

// ---------------------------------------------------------------- new_game

#[test]
fn new_game_contract() {
    let state = game(3, 5, 1);
    assert_eq!(state.players.len(), 3);
    assert_eq!(state.phase, TurnPhase::StrategyAssigned);
    assert_eq!(state.reader(), Some(Seat(0)));
    assert!(state.players.iter().all(|p| p.points == 0 && p.board_position == 0));
    assert_eq!(state.round_number, 1);
    assert_eq!(state.round.as_ref().unwrap().target_sentence_index, 1);
}

#[test]
fn new_game_rejects_bad_inputs() {
    let c = corpus(3);
    for n in [0, 1, 2, 5] {
        assert_eq!(
            GameState::new_game(GameConfig::default(), &ids(n), c.clone(), 1).unwrap_err(),
            SetupError::InvalidPlayerCount(n)
        );
    }
    let dup = vec!["a".to_string(), "b".into(), "a".into()];
    assert!(matches!(
        GameState::new_game(GameConfig::default(), &dup, c.clone(), 1),
        Err(SetupError::DuplicatePlayer(_))
    ));
    let bad = GameConfig {
        cost_freeze: 0,
        ..GameConfig::default()
    };
    assert!(matches!(
        GameState::new_game(bad, &ids(3), c, 1),
        Err(SetupError::BadConfig(_))
    ));
}

#[test]
fn new_game_is_deterministic() {
    let a = game(4, 5, 42);
    let b = game(4, 5, 42);
    assert_eq!(to_canonical_json(&a), to_canonical_json(&b));
    assert_ne!(to_canonical_json(&a), to_canonical_json(&game(4, 5, 43)));
}

// ---------------------------------------------------------- assign_strategy

#[test]
fn assignment_excludes_previous_strategy() {
    for seed in 0..500 {
        let mut state = game(3, 5, seed);
        state.players[0].previous_assigned_strategy = Some(Strategy::Paraphrasing);
        let s = state.assign_strategy().unwrap();
        assert_ne!(s, Strategy::Paraphrasing);
    }
}

#[test]
fn first_assignment_covers_all_five() {
    let seen: std::collections::BTreeSet<Strategy> =
        (0..200).map(|seed| assigned(&game(3, 5, seed))).collect();
    assert_eq!(seen.len(), 5);
}

#[test]
fn assignment_outside_assignment_phase_is_rejected() {
    let mut state = to_self_explaining(&game(3, 5, 1));
    assert_eq!(state.assign_strategy(), Err(RuleError::WrongPhase));
}

#[test]
fn excluded_draw_is_uniform_over_remaining_four() {
    let mut counts: BTreeMap<Strategy, usize> = BTreeMap::new();
    for seed in 0..10_000u64 {
        let mut rng = Pcg32::for_game(seed);
        *counts.entry(draw_strategy(&mut rng, &[Strategy::Bridging])).or_default() += 1;
    }
    assert!(!counts.contains_key(&Strategy::Bridging));
    assert_eq!(counts.len(), 4);
    for (s, n) in counts {
        let freq = n as f64 / 10_000.0;
        assert!((freq - 0.25).abs() <= 0.02, "{s}: {freq}");
    }
}

// -------------------------------------------------------------- apply_event

#[test]
fn submit_moves_to_voting_and_arms_vote_timer() {
    let state = to_self_explaining(&game(3, 5, 1));
    let (next, fx) = seat(
        &state,
        0,
        Action::SubmitSelfExplanation {
            text: "Because plants need light...".into(),
        },
    );
    assert_eq!(next.phase, TurnPhase::Voting);
    assert!(fx.contains(&Effect::ArmTimer {
        timer: TimerKind::Vote,
        seconds: 60
    }));
    assert!(fx.contains(&Effect::CancelTimer {
        timer: TimerKind::SelfExplain
    }));
}

#[test]
fn reader_cannot_vote() {
    let state = to_voting(&game(3, 5, 1));
    let ev = GameEvent::seat(
        Seat(0),
        Action::CastVote {
            strategy: Strategy::Bridging,
        },
    );
    assert_eq!(state.apply_event(&ev).unwrap_err(), RuleError::NotYourTurn);
}

#[test]
fn last_vote_reveals_everything() {
    let state = to_voting(&game(3, 5, 1));
    let a = assigned(&state);
    let (state, fx) = seat(&state, 1, Action::CastVote { strategy: a });
    assert_eq!(state.phase, TurnPhase::Voting);
    assert!(!fx.iter().any(|e| matches!(e, Effect::Broadcast { event: ServerEvent::VotesRevealed { .. } })));
    let (state, fx) = seat(
        &state,
        2,
        Action::CastVote {
            strategy: Strategy::Bridging,
        },
    );
    assert_eq!(state.phase, TurnPhase::Reveal);
    let mut expected = BTreeMap::new();
    expected.insert(Seat(1), Some(a));
    expected.insert(Seat(2), Some(Strategy::Bridging));
    assert!(fx.contains(&Effect::Broadcast {
        event: ServerEvent::VotesRevealed {
            votes: expected,
            assigned: a
        }
    }));
}

#[test]
fn double_vote_rejected() {
    let state = to_voting(&game(4, 5, 1));
    let (state, _) = seat(&state, 1, Action::CastVote { strategy: Strategy::Prediction });
    let ev = GameEvent::seat(Seat(1), Action::CastVote { strategy: Strategy::Bridging });
    assert_eq!(state.apply_event(&ev).unwrap_err(), RuleError::AlreadyVoted);
}

#[test]
fn rejected_events_leave_state_untouched() {
    let state = to_voting(&game(3, 5, 9));
    let before = to_canonical_json(&state);
    let bad = [
        GameEvent::seat(Seat(0), Action::CastVote { strategy: Strategy::Bridging }),
        GameEvent::seat(Seat(7), Action::CastVote { strategy: Strategy::Bridging }),
        GameEvent::seat(Seat(1), Action::Chat { text: "hi".into() }),
        GameEvent::seat(Seat(1), Action::Advance),
        GameEvent::system(Action::Advance),
        GameEvent::timer(TimerKind::Debate, 1),
        GameEvent::timer(TimerKind::Vote, 2),
    ];
    for ev in bad {
        assert!(state.apply_event(&ev).is_err(), "{ev:?}");
        assert_eq!(to_canonical_json(&state), before);
    }
}

#[test]
fn game_over_rejects_everything() {
    let mut state = game(3, 1, 1);
    let a = assigned(&state);
    state = to_voting(&state);
    state = seat(&state, 1, Action::CastVote { strategy: other(a) }).0;
    let (state, _) = drive(&state, GameEvent::seat(Seat(2), Action::CastVote { strategy: other(a) }));
    // Disagreement opens a debate; let it time out and revote.
    assert_eq!(state.phase, TurnPhase::Debating);
    let (state, _) = state.apply_event(&GameEvent::timer(TimerKind::Debate, 1)).unwrap();
    let (state, _) = state.apply_event(&GameEvent::timer(TimerKind::Revote, 1)).unwrap();
    let (state, fx) = advance(&state);
    assert_eq!(state.phase, TurnPhase::GameOver);
    assert!(fx.iter().any(|e| matches!(e, Effect::GameEnded { .. })));
    let ev = GameEvent::seat(Seat(1), Action::Chat { text: "gg".into() });
    assert_eq!(state.apply_event(&ev).unwrap_err(), RuleError::GameAlreadyOver);
}

// -------------------------------------------------- tally / debate oracles

fn oracle_majority(votes: &[Option<Strategy>], assigned: Strategy) -> (usize, usize, bool) {
    let mut matched = 0;
    for v in votes {
        if let Some(s) = v {
            if *s == assigned {
                matched += 1;
            }
        }
    }
    let needed = votes.len() / 2 + 1;
    (matched, votes.len(), matched >= needed)
}

fn all_vote_maps(k: usize) -> Vec<Vec<Option<Strategy>>> {
    let choices: Vec<Option<Strategy>> = std::iter::once(None)
        .chain(Strategy::ALL.into_iter().map(Some))
        .collect();
    let mut maps = vec![vec![]];
    for _ in 0..k {
        maps = maps
            .into_iter()
            .flat_map(|m| {
                choices.iter().map(move |c| {
                    let mut m = m.clone();
                    m.push(*c);
                    m
                })
            })
            .collect();
    }
    maps
}

#[test]
fn tally_agrees_with_enumeration() {
    for k in [2usize, 3] {
        let maps = all_vote_maps(k);
        assert_eq!(maps.len(), 6usize.pow(k as u32));
        for assigned in Strategy::ALL {
            for m in &maps {
                let votes: BTreeMap<Seat, Option<Strategy>> =
                    m.iter().enumerate().map(|(i, v)| (Seat(i as u8 + 1), *v)).collect();
                let out = tally_votes(&votes, assigned);
                assert_eq!(
                    (out.matched_count, out.eligible_count, out.majority_matched),
                    oracle_majority(m, assigned)
                );
                let oracle_debate = !m.iter().all(|v| *v == Some(assigned));
                assert_eq!(needs_debate(&votes, assigned), oracle_debate);
            }
        }
    }
}

// ------------------------------------------------------------ score_and_move

/// Unanimous first ballot, then advance from Reveal into Resolving.
fn resolving_with_votes(state: &GameState, votes: &[(u8, Strategy)]) -> GameState {
    let mut s = to_voting(state);
    for (seat_no, v) in votes {
        s = seat(&s, *seat_no, Action::CastVote { strategy: *v }).0;
    }
    assert_eq!(s.phase, TurnPhase::Reveal);
    let (s, _) = advance(&s);
    s
}

#[test]
fn majority_match_scores_and_moves_by_dice() {
    let state = game(3, 5, 3);
    let a = assigned(&state);
    let s = resolving_with_votes(&state, &[(1, a), (2, a)]);
    assert_eq!(s.phase, TurnPhase::Resolving);
    let mut oracle = ReferencePcg::from_state(&s);
    let (d1, d2) = (oracle.die(6), oracle.die(6));
    let (after, fx) = advance(&s);
    assert_eq!(after.phase, TurnPhase::CardDraw);
    assert_eq!(after.players[0].board_position, d1 + d2);
    assert_eq!(after.players[0].points, 3);
    assert_eq!(after.players[1].points, 1);
    assert_eq!(after.players[2].points, 1);
    assert!(fx.iter().any(|e| matches!(
        e,
        Effect::Broadcast { event: ServerEvent::TurnResolved { dice: Some(d), movement: Some(m), .. } }
            if *d == [d1, d2] && *m == d1 + d2
    )));
}

#[test]
fn voter_rewards_only_for_matching_final_votes() {
    let state = game(4, 5, 5);
    let a = assigned(&state);
    // Seats 1 and 2 match, seat 3 does not: 2 of 3 is a majority, but the
    // disagreement forces a debate and a revote.
    let mut s = to_voting(&state);
    for (n, v) in [(1, a), (2, a), (3, other(a))] {
        s = seat(&s, n, Action::CastVote { strategy: v }).0;
    }
    let (s, _) = advance(&s);
    assert_eq!(s.phase, TurnPhase::Debating);
    let (s, _) = s.apply_event(&GameEvent::timer(TimerKind::Debate, 1)).unwrap();
    assert_eq!(s.phase, TurnPhase::Revoting);
    let mut s = s;
    // Revote: seat 1 keeps the match, seat 2 changes its mind, seat 3 converts.
    for (n, v) in [(1, a), (2, other(a)), (3, a)] {
        s = seat(&s, n, Action::CastVote { strategy: v }).0;
    }
    assert_eq!(s.phase, TurnPhase::Resolving);
    let (after, _) = advance(&s);
    let points: Vec<u32> = after.players.iter().map(|p| p.points).collect();
    assert_eq!(points, vec![3, 1, 0, 1]);
}

#[test]
fn small_case_reward_table() {
    // Exhaustive over two voters: each voter either matches or not.
    for (v1, v2) in [(true, true), (true, false), (false, true), (false, false)] {
        let state = game(3, 5, 11);
        let a = assigned(&state);
        let pick = |m: bool| if m { a } else { other(a) };
        let mut s = to_voting(&state);
        s = seat(&s, 1, Action::CastVote { strategy: pick(v1) }).0;
        s = seat(&s, 2, Action::CastVote { strategy: pick(v2) }).0;
        let (mut s, _) = advance(&s);
        if s.phase == TurnPhase::Debating {
            s = s.apply_event(&GameEvent::timer(TimerKind::Debate, 1)).unwrap().0;
            s = seat(&s, 1, Action::CastVote { strategy: pick(v1) }).0;
            s = seat(&s, 2, Action::CastVote { strategy: pick(v2) }).0;
        }
        let (after, _) = advance(&s);
        let majority = v1 && v2;
        let expect = |m: bool| if majority && m { 1 } else { 0 };
        assert_eq!(after.players[0].points, if majority { 3 } else { 0 });
        assert_eq!(after.players[1].points, expect(v1));
        assert_eq!(after.players[2].points, expect(v2));
    }
}

#[test]
fn no_majority_changes_nothing_and_skips_card() {
    let state = game(3, 5, 8);
    let a = assigned(&state);
    let mut s = to_voting(&state);
    s = seat(&s, 1, Action::CastVote { strategy: other(a) }).0;
    s = seat(&s, 2, Action::CastVote { strategy: other(a) }).0;
    let (s, _) = advance(&s);
    let s = s.apply_event(&GameEvent::timer(TimerKind::Debate, 1)).unwrap().0;
    let s = s.apply_event(&GameEvent::timer(TimerKind::Revote, 1)).unwrap().0;
    let deck_before = s.event_deck.clone();
    let (after, fx) = advance(&s);
    assert_eq!(after.phase, TurnPhase::StrategyAssigned);
    assert!(after.players.iter().all(|p| p.points == 0 && p.board_position == 0));
    assert_eq!(after.event_deck, deck_before);
    assert!(!fx.iter().any(|e| matches!(e, Effect::Broadcast { event: ServerEvent::CardDrawn { .. } })));
    assert_eq!(after.players[0].previous_assigned_strategy, Some(a));
    assert_eq!(after.reader(), Some(Seat(1)));
}

#[test]
fn score_and_move_requires_resolving() {
    let mut state = game(3, 5, 1);
    let outcome = tally_votes(&BTreeMap::new(), Strategy::Bridging);
    let mut fx = Vec::new();
    assert_eq!(
        state.score_and_move(outcome, &BTreeMap::new(), &mut fx),
        Err(RuleError::WrongPhase)
    );
}

// ----------------------------------------------------------------- dice

#[test]
fn dice_in_range_and_reproducible() {
    let mut a = game(3, 5, 17);
    let mut b = game(3, 5, 17);
    for _ in 0..1000 {
        let (d1, d2) = a.roll_dice();
        assert!((1..=6).contains(&d1) && (1..=6).contains(&d2));
        assert_eq!((d1, d2), b.roll_dice());
    }
}

#[test]
fn dice_pairs_are_uniform() {
    let mut state = game(3, 5, 2024);
    let mut counts = [[0usize; 6]; 6];
    let n = 36_000;
    for _ in 0..n {
        let (d1, d2) = state.roll_dice();
        counts[d1 as usize - 1][d2 as usize - 1] += 1;
    }
    let mut chi2 = 0.0;
    let expected = n as f64 / 36.0;
    for row in counts {
        for c in row {
            let freq = c as f64 / n as f64;
            assert!((freq - 1.0 / 36.0).abs() <= 0.005, "freq {freq}");
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
    }
    // 35 degrees of freedom; 0.999 quantile is about 66.6.
    assert!(chi2 < 66.6, "chi2 {chi2}");
}

// ------------------------------------------------------------ card draws

fn card_draw_state(seed: u64) -> GameState {
    let state = game(3, 5, seed);
    let a = assigned(&state);
    let s = resolving_with_votes(&state, &[(1, a), (2, a)]);
    advance(&s).0
}

/// Moves the first move card with `delta` to the top of the deck.
fn put_on_top(state: &mut GameState, delta: i32) {
    let idx = state
        .event_deck
        .iter()
        .position(|c| c.kind == CardKind::Move { delta })
        .expect("card in deck");
    let card = state.event_deck.remove(idx);
    state.event_deck.insert(0, card);
}

#[test]
fn move_card_applies_immediately() {
    let mut s = card_draw_state(4);
    s.players[0].board_position = 5;
    put_on_top(&mut s, 2);
    let top = s.event_deck[0].clone();
    let mut fx = Vec::new();
    let card = s.draw_event_card(&mut fx).unwrap().unwrap();
    assert_eq!(card, top);
    assert_eq!(s.players[0].board_position, 7);
    assert_eq!(s.discard_pile.last(), Some(&top));
    assert_eq!(s.phase, TurnPhase::StrategyAssigned);
}

#[test]
fn move_card_floors_at_start() {
    let mut s = card_draw_state(4);
    s.players[0].board_position = 1;
    put_on_top(&mut s, -2);
    let mut fx = Vec::new();
    s.draw_event_card(&mut fx).unwrap();
    assert_eq!(s.players[0].board_position, 0);
}

#[test]
fn empty_deck_reshuffles_discard() {
    let mut s = card_draw_state(6);
    let all: Vec<EventCard> = s.event_deck.drain(..).collect();
    let (moves, rest): (Vec<_>, Vec<_>) = all.into_iter().partition(|c| !c.kind.is_power());
    // Three move cards in the discard, everything else held by seat 2.
    let (discard, extra): (Vec<_>, Vec<_>) = moves.into_iter().enumerate().partition(|(i, _)| *i < 3);
    s.discard_pile = discard.into_iter().map(|(_, c)| c).collect();
    s.players[2].hand = rest;
    s.players[1].hand.clear();
    // Remaining move cards cannot be held; keep them out of play by
    // shrinking the configured deck to match.
    let removed: Vec<EventCard> = extra.into_iter().map(|(_, c)| c).collect();
    let mut spec = Vec::new();
    for card in s.config.build_deck() {
        if !removed.contains(&card) {
            spec.push(card);
        }
    }
    let cards_before: usize = s.discard_pile.len() + s.players.iter().map(|p| p.hand.len()).sum::<usize>();
    let mut fx = Vec::new();
    let card = s.draw_event_card(&mut fx).unwrap();
    assert!(card.is_some());
    assert_eq!(s.event_deck.len(), 2);
    let cards_after = s.event_deck.len() + s.discard_pile.len() + s.players.iter().map(|p| p.hand.len()).sum::<usize>();
    assert_eq!(cards_before, cards_after);
    assert_eq!(spec.len(), cards_after);
}

#[test]
fn all_cards_in_hands_means_no_draw() {
    let mut s = card_draw_state(6);
    let cards: Vec<EventCard> = s.event_deck.drain(..).collect();
    s.players[1].hand = cards;
    let mut fx = Vec::new();
    assert_eq!(s.draw_event_card(&mut fx).unwrap(), None);
    assert_eq!(s.phase, TurnPhase::StrategyAssigned);
}

#[test]
fn power_card_enters_hand_hidden_from_others() {
    let mut s = card_draw_state(12);
    let idx = s.event_deck.iter().position(|c| c.kind == CardKind::PowerFreeze).unwrap();
    let card = s.event_deck.remove(idx);
    s.event_deck.insert(0, card.clone());
    let mut fx = Vec::new();
    s.draw_event_card(&mut fx).unwrap();
    assert_eq!(s.players[0].hand, vec![card.clone()]);
    for e in &fx {
        if let Effect::SendTo { seat, event: ServerEvent::CardDrawn { card: view, .. } } = e {
            let json = serde_json::to_string(view).unwrap();
            if seat.0 == 0 {
                assert!(json.contains(&card.card_id));
            } else {
                assert_eq!(json, r#"{"kind":"hidden"}"#);
            }
        }
        assert!(!matches!(e, Effect::Broadcast { event: ServerEvent::CardDrawn { .. } }));
    }
}

// --------------------------------------------------------------- purchases

#[test]
fn change_strategy_costs_points_and_redraws() {
    for seed in 0..200 {
        let mut s = to_self_explaining(&game(3, 5, seed));
        s.players[0].points = 2;
        s.players[0].previous_assigned_strategy =
            Some(other(assigned(&s)));
        let old = assigned(&s);
        let prev = s.players[0].previous_assigned_strategy.unwrap();
        let (after, fx) = seat(&s, 0, Action::Purchase { purchase: PurchaseKind::ChangeStrategy });
        assert_eq!(after.players[0].points, 0);
        let new = assigned(&after);
        assert!(new != old && new != prev);
        assert!(fx.contains(&Effect::SendTo {
            seat: Seat(0),
            event: ServerEvent::StrategyAssigned { strategy: new }
        }));
    }
}

#[test]
fn change_strategy_only_for_reader_before_submission() {
    let mut s = to_self_explaining(&game(3, 5, 1));
    s.players[1].points = 10;
    s.players[0].points = 10;
    let ev = GameEvent::seat(Seat(1), Action::Purchase { purchase: PurchaseKind::ChangeStrategy });
    assert_eq!(s.apply_event(&ev).unwrap_err(), RuleError::NotYourTurn);
    let voting = seat(&s, 0, Action::SubmitSelfExplanation { text: "x".into() }).0;
    let ev = GameEvent::seat(Seat(0), Action::Purchase { purchase: PurchaseKind::ChangeStrategy });
    assert_eq!(voting.apply_event(&ev).unwrap_err(), RuleError::WrongPhase);
}

#[test]
fn overdraw_rejected() {
    let mut s = to_self_explaining(&game(3, 5, 1));
    s.players[1].points = 1;
    let ev = GameEvent::seat(Seat(1), Action::Purchase { purchase: PurchaseKind::ExtraTurn });
    assert_eq!(s.apply_event(&ev).unwrap_err(), RuleError::InsufficientPoints);
}

#[test]
fn held_card_is_used_before_points() {
    let mut s = to_self_explaining(&game(3, 5, 1));
    let idx = s.event_deck.iter().position(|c| c.kind == CardKind::PowerExtraTurn).unwrap();
    let card = s.event_deck.remove(idx);
    s.players[1].hand.push(card.clone());
    s.players[1].points = 9;
    let (after, _) = seat(&s, 1, Action::Purchase { purchase: PurchaseKind::ExtraTurn });
    assert_eq!(after.players[1].points, 9);
    assert!(after.players[1].hand.is_empty());
    assert_eq!(after.discard_pile.last(), Some(&card));
    assert_eq!(after.pending_extra_turn_for, Some(Seat(1)));
}

#[test]
fn freeze_rules() {
    let mut s = to_self_explaining(&game(3, 5, 1));
    s.players[1].points = 20;
    let f = |t: u8| GameEvent::seat(Seat(1), Action::Purchase { purchase: PurchaseKind::Freeze { target: Seat(t) } });
    assert_eq!(s.apply_event(&f(1)).unwrap_err(), RuleError::CannotFreezeSelf);
    assert_eq!(s.apply_event(&f(3)).unwrap_err(), RuleError::UnknownTarget);
    let (after, _) = s.apply_event(&f(2)).unwrap();
    assert_eq!(after.players[2].frozen_turns, 1);
    assert_eq!(after.players[1].points, 16);
}

#[test]
fn no_self_freeze_path_exists() {
    // Every seat, every phase reached in a short game, both purchase and
    // card routes: freezing yourself is never accepted.
    let mut s = game(4, 3, 77);
    let freeze_cards: Vec<EventCard> = s
        .event_deck
        .iter()
        .filter(|c| c.kind == CardKind::PowerFreeze)
        .cloned()
        .collect();
    s.event_deck.retain(|c| c.kind != CardKind::PowerFreeze);
    for (i, card) in freeze_cards.into_iter().enumerate() {
        s.players[i].hand.push(card);
    }
    for p in &mut s.players {
        p.points = 100;
    }
    let mut phases_seen = std::collections::BTreeSet::new();
    while !s.is_over() {
        phases_seen.insert(s.phase);
        for n in 0..4u8 {
            let card_id = s.players[n as usize].hand.first().map(|c| c.card_id.clone());
            let mut attempts = vec![Action::Purchase { purchase: PurchaseKind::Freeze { target: Seat(n) } }];
            if let Some(id) = card_id {
                attempts.push(Action::PlayCard { card_id: id, target: Some(Seat(n)) });
            }
            for a in attempts {
                assert!(s.apply_event(&GameEvent::seat(Seat(n), a)).is_err());
            }
        }
        // Move the game along.
        let next = if let Some(a) = s.pending_system_action() {
            GameEvent::system(a)
        } else {
            match s.phase {
                TurnPhase::SelfExplaining => GameEvent::seat(s.reader().unwrap(), Action::SubmitSelfExplanation { text: "t".into() }),
                TurnPhase::Voting => GameEvent::timer(TimerKind::Vote, s.round_number),
                TurnPhase::Debating => GameEvent::timer(TimerKind::Debate, s.round_number),
                TurnPhase::Revoting => GameEvent::timer(TimerKind::Revote, s.round_number),
                p => panic!("stuck in {p:?}"),
            }
        };
        s = s.apply_event(&next).unwrap().0;
    }
    assert!(phases_seen.len() >= 6);
}

#[test]
fn extra_card_draws_for_purchaser() {
    let mut s = to_self_explaining(&game(3, 5, 1));
    s.players[2].points = 3;
    put_on_top(&mut s, 3);
    let (after, _) = seat(&s, 2, Action::Purchase { purchase: PurchaseKind::ExtraCard });
    assert_eq!(after.players[2].points, 0);
    assert_eq!(after.players[2].board_position, 3);
    assert_eq!(after.phase, TurnPhase::SelfExplaining);
}

#[test]
fn play_card_requires_holding_it() {
    let s = to_self_explaining(&game(3, 5, 1));
    let ev = GameEvent::seat(Seat(1), Action::PlayCard { card_id: "c09".into(), target: None });
    assert_eq!(s.apply_event(&ev).unwrap_err(), RuleError::CardNotHeld);
}

// ------------------------------------------------------------ advance_round

/// Forfeits the current round by letting the self-explanation timer expire.
fn forfeit_round(state: &GameState) -> (GameState, Vec<Effect>) {
    let s = to_self_explaining(state);
    let (s, _) = s.apply_event(&GameEvent::timer(TimerKind::SelfExplain, s.round_number)).unwrap();
    assert_eq!(s.phase, TurnPhase::Resolving);
    advance(&s)
}

#[test]
fn reader_rotates_cyclically() {
    let mut s = game(3, 5, 1);
    let mut readers = vec![reader(&s)];
    for _ in 0..3 {
        s = forfeit_round(&s).0;
        readers.push(reader(&s));
    }
    assert_eq!(readers, vec![0, 1, 2, 0]);
}

#[test]
fn frozen_seat_is_skipped_once() {
    let mut s = game(3, 6, 1);
    s.players[1].frozen_turns = 1;
    let (s, _) = forfeit_round(&s);
    assert_eq!(reader(&s), 2);
    assert_eq!(s.players[1].frozen_turns, 0);
    let (s, _) = forfeit_round(&s);
    assert_eq!(reader(&s), 0);
    let (s, _) = forfeit_round(&s);
    assert_eq!(reader(&s), 1);
}

#[test]
fn extra_turn_inserts_bonus_round() {
    let mut s = to_self_explaining(&game(3, 6, 1));
    s.players[2].points = 5;
    let (s, _) = seat(&s, 2, Action::Purchase { purchase: PurchaseKind::ExtraTurn });
    let (s, _) = s.apply_event(&GameEvent::timer(TimerKind::SelfExplain, 1)).unwrap();
    let (s, _) = advance(&s);
    assert_eq!(reader(&s), 2);
    assert!(s.round.as_ref().unwrap().is_extra_turn);
    assert_eq!(s.pending_extra_turn_for, None);
    // Rotation resumes after the last regular reader.
    let (s, _) = forfeit_round(&s);
    assert_eq!(reader(&s), 1);
}

#[test]
fn forfeit_awards_nothing() {
    let (s, fx) = forfeit_round(&game(3, 5, 1));
    assert!(s.players.iter().all(|p| p.points == 0 && p.board_position == 0));
    assert!(fx.iter().any(|e| matches!(
        e,
        Effect::Broadcast { event: ServerEvent::TurnResolved { forfeited: true, .. } }
    )));
}

#[test]
fn last_target_ends_the_game() {
    let mut s = game(3, 3, 1);
    for round in 1..=3 {
        assert_eq!(s.round_number, round);
        let (next, fx) = forfeit_round(&s);
        s = next;
        if round == 3 {
            assert_eq!(s.phase, TurnPhase::GameOver);
            assert!(fx.iter().any(|e| matches!(e, Effect::GameEnded { .. })));
        }
    }
}

#[test]
fn max_rounds_ends_the_game() {
    let config = GameConfig {
        max_rounds: 2,
        ..GameConfig::default()
    };
    let mut s = GameState::new_game(config, &ids(3), corpus(10), 1).unwrap();
    s = forfeit_round(&s).0;
    assert_eq!(s.phase, TurnPhase::StrategyAssigned);
    s = forfeit_round(&s).0;
    assert_eq!(s.phase, TurnPhase::GameOver);
}

#[test]
fn advance_round_requires_round_end() {
    let mut s = game(3, 3, 1);
    let mut fx = Vec::new();
    assert_eq!(s.advance_round(&mut fx), Err(RuleError::WrongPhase));
}

// --------------------------------------------------------------- standings

fn with_scores(positions: &[u32], points: &[u32]) -> GameState {
    let mut s = game(positions.len().max(3), 3, 1);
    s.players.truncate(positions.len().max(3));
    for (i, (pos, pts)) in positions.iter().zip(points).enumerate() {
        s.players[i].board_position = *pos;
        s.players[i].points = *pts;
    }
    s
}

#[test]
fn standings_rank_by_position_then_points() {
    let s = with_scores(&[10, 7, 7], &[0, 5, 2]);
    let ranks: Vec<(String, usize)> = standings(&s).into_iter().map(|r| (r.player_id, r.rank)).collect();
    assert_eq!(
        ranks,
        vec![("p0".to_string(), 1), ("p1".to_string(), 2), ("p2".to_string(), 3)]
    );
}

#[test]
fn full_ties_share_rank() {
    let s = with_scores(&[4, 4, 1], &[3, 3, 0]);
    let ranks: Vec<usize> = standings(&s).iter().map(|r| r.rank).collect();
    assert_eq!(ranks, vec![1, 1, 3]);
    let start = game(4, 3, 1);
    assert!(standings(&start).iter().all(|r| r.rank == 1));
}
