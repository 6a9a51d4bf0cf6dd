//! The acceptance suite. Prints one PASS or FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use miboard_bots::check::{debate_violations, repetition_violations, secrecy_violations};
use miboard_bots::sim::Progress;
use miboard_bots::{play_over_socket, BotPolicy, Sim, SocketOptions};
use miboard_core::canonical::canonical_hash;
use miboard_core::protocol::{ClientCommand, ServerEvent};
use miboard_core::rules::invariants::{is_legal_edge, state_violations, step_violations};
use miboard_core::rules::tally_votes;
use miboard_core::{Action, GameConfig, GameEvent, GameState, PurchaseKind, Seat, Strategy, TextCorpus, TimerKind};
use miboard_server::replay::replay;
use miboard_server::room::RoomOptions;
use miboard_server::{read_log, Corpora};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const BIN: &str = env!("CARGO_BIN_EXE_miboard");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn corpus(targets: usize) -> Arc<TextCorpus> {
    let mut sentences = Vec::new();
    for i in 0..targets {
        sentences.push(serde_json::json!({"text": format!("Lead-in {i}."), "target": false}));
        sentences.push(serde_json::json!({"text": format!("Target {i}."), "target": true}));
    }
    let json = serde_json::json!({"title": "acceptance", "sentences": sentences});
    Arc::new(TextCorpus::from_slice(json.to_string().as_bytes()).unwrap())
}

fn mixed_policies(rng: &mut StdRng) -> Vec<BotPolicy> {
    let n = rng.random_range(3..=4);
    (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => BotPolicy::Honest,
            1 => BotPolicy::Contrarian,
            2 => BotPolicy::Stall {
                delay_ms: Some(rng.random_range(0..400_000)),
            },
            _ => BotPolicy::Random { seed: rng.random() },
        })
        .collect()
}

fn determinism() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut rng = StdRng::seed_from_u64(0xACCE_0001);
    let corpus = corpus(6);
    let mut matched = 0;
    let mut failures = Vec::new();
    for game in 0..100 {
        let seed: u64 = rng.random();
        let policies = mixed_policies(&mut rng);
        let path = dir.path().join(format!("g{game}.jsonl"));
        let options = RoomOptions {
            log_path: Some(path.clone()),
            time_scale: 1.0,
        };
        let mut sim = Sim::with_options(&policies, GameConfig::default(), corpus.clone(), seed, options).unwrap();
        while sim.step().unwrap() != Progress::Finished {}
        let live = canonical_hash(sim.room().game().unwrap());
        let log = read_log(&path).unwrap();
        match replay(&log, corpus.clone()) {
            Ok(state) if canonical_hash(&state) == live && state.is_over() => matched += 1,
            Ok(_) => failures.push(format!("game {game}: hash differs")),
            Err(e) => failures.push(format!("game {game}: {e}")),
        }
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        matched == 100 && secs < 60.0,
        format!("{matched}/100 final hashes MATCH, {secs:.1} s (limit 60 s) {failures:?}"),
    )
}

fn tally_oracle() -> Outcome {
    let choices: Vec<Option<Strategy>> = std::iter::once(None).chain(Strategy::ALL.map(Some)).collect();
    let mut cases = BTreeMap::new();
    let mut disagreements = 0;
    for voters in [2usize, 3] {
        for assigned in Strategy::ALL {
            let total = choices.len().pow(voters as u32);
            for code in 0..total {
                let mut votes = BTreeMap::new();
                let mut c = code;
                for v in 0..voters {
                    votes.insert(Seat(v as u8 + 1), choices[c % choices.len()]);
                    c /= choices.len();
                }
                let matched = votes.values().filter(|v| **v == Some(assigned)).count();
                let out = tally_votes(&votes, assigned);
                let expected = (matched, voters, matched * 2 > voters);
                if (out.matched_count, out.eligible_count, out.majority_matched) != expected {
                    disagreements += 1;
                }
                if assigned == Strategy::ALL[0] {
                    *cases.entry(voters).or_insert(0) += 1;
                }
            }
        }
    }
    outcome(
        disagreements == 0 && cases[&2] == 36 && cases[&3] == 216,
        format!(
            "{} + {} vote maps per assignment, 5 assignments, {disagreements} disagreements",
            cases[&2], cases[&3]
        ),
    )
}

fn chat_caps() -> Outcome {
    let corpus = corpus(5);
    let limit_ms = u64::from(GameConfig::default().debate_seconds) * 1000;
    let mut debates = 0;
    let mut violations = Vec::new();
    let mut probes = 0;
    let mut seed = 0u64;
    while debates < 200 {
        seed += 1;
        // Some rooms hold a slow voter whose debate only the timer can close.
        let slow = BotPolicy::Stall {
            delay_ms: Some(200_000),
        };
        let policies: Vec<BotPolicy> = match seed % 3 {
            0 => vec![BotPolicy::Contrarian; 3],
            1 => vec![BotPolicy::Contrarian; 4],
            _ => vec![BotPolicy::Contrarian, BotPolicy::Contrarian, slow],
        };
        let mut sim = Sim::new(&policies, GameConfig::default(), corpus.clone(), seed).unwrap();
        let mut probed: Vec<u32> = vec![0; policies.len()];
        loop {
            for i in 0..policies.len() {
                let view = &sim.bots()[i].view;
                let open = view.phase == miboard_core::TurnPhase::Debating;
                if open && !view.is_reader() && view.my_messages_remaining() == 0 && probed[i] < view.round {
                    probed[i] = view.round;
                    probes += 1;
                    let reply = sim.inject(Seat(i as u8), ClientCommand::Chat { text: "one more".into() });
                    let refused = reply
                        .iter()
                        .any(|e| matches!(e, ServerEvent::ChatRejected { reason, .. } if reason == "ChatLimitReached"));
                    if !refused {
                        violations.push(format!("seed {seed}: 4th message from seat {i} not refused"));
                    }
                }
            }
            if sim.step().unwrap() == Progress::Finished {
                break;
            }
        }
        let t = sim.finish().unwrap();
        if t.stats.debates != t.stats.rounds {
            violations.push(format!("seed {seed}: a contrarian round had no debate"));
        }
        let report = debate_violations(&t.log, corpus.clone(), limit_ms).unwrap();
        debates += report.debates;
        violations.extend(report.violations);
    }
    outcome(
        violations.is_empty(),
        format!("{debates} debates, {probes} refused 4th messages, {} violations {violations:?}", violations.len()),
    )
}

fn non_repetition() -> Outcome {
    let corpus = corpus(12);
    let mut rng = StdRng::seed_from_u64(0xACCE_0004);
    let mut rounds = 0;
    let mut checked = 0;
    let mut violations = Vec::new();
    while rounds < 1000 {
        let policies = mixed_policies(&mut rng);
        let sim = Sim::new(&policies, GameConfig::default(), corpus.clone(), rng.random()).unwrap();
        let t = sim.run().unwrap();
        rounds += t.stats.rounds as usize;
        let report = repetition_violations(&t.log, corpus.clone()).unwrap();
        checked += report.rounds_checked;
        violations.extend(report.violations);
    }
    outcome(
        violations.is_empty(),
        format!("{rounds} rounds ({checked} by a returning reader), {} repeats", violations.len()),
    )
}

fn fuzz_event(state: &GameState, rng: &mut StdRng) -> GameEvent {
    let n = state.players.len() as u8;
    let who = Seat(rng.random_range(0..=n));
    let strategy = Strategy::ALL[rng.random_range(0..5)];
    let action = match rng.random_range(0..14) {
        0 | 1 => return GameEvent::system(Action::Advance),
        2 => Action::SubmitSelfExplanation {
            text: format!("[{strategy}] text"),
        },
        3 | 4 => Action::CastVote { strategy },
        5 => Action::Chat { text: "hm".into() },
        6 => Action::PassDebate,
        7 => Action::Purchase {
            purchase: PurchaseKind::ChangeStrategy,
        },
        8 => Action::Purchase {
            purchase: PurchaseKind::ExtraTurn,
        },
        9 => Action::Purchase {
            purchase: PurchaseKind::Freeze {
                target: Seat(rng.random_range(0..=n)),
            },
        },
        10 => Action::Purchase {
            purchase: PurchaseKind::ExtraCard,
        },
        11 => {
            let card = state.players.get(who.index()).and_then(|p| p.hand.first());
            Action::PlayCard {
                card_id: card.map_or("c00".into(), |c| c.card_id.clone()),
                target: Some(Seat(rng.random_range(0..n))),
            }
        }
        12 => {
            let timer = [TimerKind::SelfExplain, TimerKind::Vote, TimerKind::Revote, TimerKind::Debate][rng.random_range(0..4)];
            return GameEvent::timer(timer, state.round_number);
        }
        _ => {
            return GameEvent::system(Action::SetConnected {
                seat: who,
                connected: rng.random_bool(0.5),
            })
        }
    };
    GameEvent::seat(who, action)
}

fn conservation() -> Outcome {
    let corpus = corpus(6);
    let mut rng = StdRng::seed_from_u64(0xACCE_0005);
    let ids: Vec<String> = (0..4).map(|i| format!("p{i}")).collect();
    let mut state_bad = Vec::new();
    let mut illegal_edges = 0;
    let mut mutated_on_reject = 0;
    let (mut applied, mut games) = (0, 0);
    let mut state: Option<GameState> = None;
    for _ in 0..100_000 {
        let current = match state.take() {
            Some(s) if !s.is_over() => s,
            _ => {
                games += 1;
                let n = rng.random_range(3..=4);
                let mut s = GameState::new_game(GameConfig::default(), &ids[..n], corpus.clone(), rng.random()).unwrap();
                if rng.random_bool(0.5) {
                    for p in &mut s.players {
                        p.points = rng.random_range(0..20);
                    }
                }
                s
            }
        };
        let event = fuzz_event(&current, &mut rng);
        let snapshot = current.clone();
        match current.apply_event(&event) {
            Ok((next, _)) => {
                applied += 1;
                if next.phase != current.phase && !is_legal_edge(current.phase, next.phase) {
                    illegal_edges += 1;
                }
                state_bad.extend(state_violations(&next));
                state_bad.extend(step_violations(&current, &next));
                state = Some(next);
            }
            Err(_) => {
                if current != snapshot {
                    mutated_on_reject += 1;
                }
                state = Some(current);
            }
        }
    }
    outcome(
        state_bad.is_empty() && illegal_edges == 0 && mutated_on_reject == 0,
        format!(
            "100000 events ({applied} applied, {games} games): {} invariant violations, {illegal_edges} illegal phase edges, {mutated_on_reject} rejected events changed state",
            state_bad.len()
        ),
    )
}

fn secrecy() -> Outcome {
    let corpus = corpus(5);
    let mut rng = StdRng::seed_from_u64(0xACCE_0006);
    let mut frames_scanned = 0;
    let mut leaks = Vec::new();
    for _ in 0..100 {
        let policies = mixed_policies(&mut rng);
        let t = Sim::new(&policies, GameConfig::default(), corpus.clone(), rng.random())
            .unwrap()
            .run()
            .unwrap();
        for (i, frames) in t.frames.iter().enumerate() {
            frames_scanned += frames.len();
            leaks.extend(secrecy_violations(Seat(i as u8), frames));
        }
    }
    outcome(
        leaks.is_empty(),
        format!("100 games, {frames_scanned} frames scanned, {} leaks {leaks:?}", leaks.len()),
    )
}

struct Server {
    child: Child,
    addr: SocketAddr,
}

impl Server {
    fn start(data: &Path, port: u16, time_scale: f64) -> Server {
        for _ in 0..50 {
            let mut child = Command::new(BIN)
                .args(["serve", "--host", "127.0.0.1", "--port", &port.to_string(), "--time-scale"])
                .arg(time_scale.to_string())
                .arg("--data-dir")
                .arg(data)
                .env("RUST_LOG", "warn")
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .expect("spawn server");
            let mut line = String::new();
            let mut out = BufReader::new(child.stdout.take().unwrap());
            if out.read_line(&mut line).is_ok() {
                if let Some(addr) = line.trim().strip_prefix("listening on ") {
                    return Server {
                        child,
                        addr: addr.parse().unwrap(),
                    };
                }
            }
            let _ = child.kill();
            let _ = child.wait();
            std::thread::sleep(Duration::from_millis(100));
        }
        panic!("server did not start on port {port}");
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}

fn liveness(rt: &tokio::runtime::Runtime) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let server = Server::start(dir.path(), 0, 1000.0);
    let stall = BotPolicy::Stall { delay_ms: None };
    let run = rt.block_on(play_over_socket(server.addr, &[stall; 3], SocketOptions::default(), |_| {}));
    let secs = started.elapsed().as_secs_f64();
    let run = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("{e}")),
    };
    let log = read_log(&dir.path().join(format!("{}.jsonl", run.room_id))).unwrap();
    let report = miboard_server::audit(&log, Corpora::builtin().default_corpus()).unwrap();
    let player_moves = log
        .records
        .iter()
        .filter(|r| matches!(r.actor, miboard_core::Actor::Seat(_)))
        .count();
    let s = &report.stats;
    outcome(
        s.game_over && s.forfeits == s.rounds && player_moves == 0 && secs < 10.0,
        format!(
            "GameOver after {} rounds, {} forfeits, {player_moves} player moves, {secs:.1} s (limit 10 s)",
            s.rounds, s.forfeits
        ),
    )
}

fn crash_recovery(rt: &tokio::runtime::Runtime) -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xACCE_0008);
    let mut ok = 0;
    let mut notes = Vec::new();
    for trial in 0..10 {
        let dir = tempfile::tempdir().unwrap();
        let server = std::cell::RefCell::new(Server::start(dir.path(), 0, 1.0));
        let port = server.borrow().addr.port();
        let kill_at = rng.random_range(4..30);
        let mut killed = false;
        let policies = [
            BotPolicy::Honest,
            BotPolicy::Contrarian,
            BotPolicy::Random { seed: rng.random() },
        ];
        let opts = SocketOptions {
            seed: Some(rng.random()),
            ..SocketOptions::default()
        };
        let addr = server.borrow().addr;
        let run = rt.block_on(play_over_socket(addr, &policies, opts, |n| {
            if n == kill_at {
                server.borrow_mut().kill();
                *server.borrow_mut() = Server::start(dir.path(), port, 1.0);
                killed = true;
            }
        }));
        let verdict = (|| -> Result<(), String> {
            let run = run.map_err(|e| e.to_string())?;
            if !killed {
                return Err("game ended before the kill point".into());
            }
            let path = dir.path().join(format!("{}.jsonl", run.room_id));
            let log = read_log(&path).map_err(|e| e.to_string())?;
            let state = replay(&log, Corpora::builtin().default_corpus()).map_err(|e| e.to_string())?;
            if !state.is_over() {
                return Err("replayed game is not over".into());
            }
            if run.reconnects < policies.len() {
                return Err(format!("only {} reconnects", run.reconnects));
            }
            let out = Command::new(BIN).arg("replay").arg("--log").arg(&path).output().unwrap();
            let text = String::from_utf8_lossy(&out.stdout);
            if !out.status.success() || !text.contains("\"MATCH\"") {
                return Err(format!("replay command: {text}"));
            }
            Ok(())
        })();
        match verdict {
            Ok(()) => ok += 1,
            Err(e) => notes.push(format!("trial {trial} (kill after action {kill_at}): {e}")),
        }
        drop(server);
    }
    outcome(ok == 10, format!("{ok}/10 trials replayed and resumed {notes:?}"))
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("determinism/replay", Box::new(determinism)),
        ("vote-tally oracle", Box::new(tally_oracle)),
        ("chat caps", Box::new(chat_caps)),
        ("strategy non-repetition", Box::new(non_repetition)),
        ("conservation suite", Box::new(conservation)),
        ("secrecy", Box::new(secrecy)),
        ("liveness/timers", Box::new(|| liveness(&rt))),
        ("crash recovery", Box::new(|| crash_recovery(&rt))),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} criteria, {failed} failed", 8);
    if failed > 0 {
        std::process::exit(1);
    }
}
