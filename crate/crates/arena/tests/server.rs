use futures_util::{SinkExt, StreamExt};
use serde_json::json;
use skyjo_arena::protocol::{ClientMessage, ServerMessage};
use skyjo_arena::{server, CheckpointStore, CreateRequest, Frame};
use skyjo_muzero::search::SearchConfig;
use skyjo_muzero::{NetConfig, Nets};
use std::sync::Arc;
use std::time::Duration;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start() -> std::net::SocketAddr {
    let store = CheckpointStore::new(None, SearchConfig::greedy(4));
    store.register("toy", Nets::new(NetConfig::toy(), 1));
    let (addr, _) = server::spawn("127.0.0.1:0".parse().unwrap(), Arc::new(store)).await.unwrap();
    addr
}

async fn connect(addr: std::net::SocketAddr) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap().0
}

async fn send(ws: &mut Ws, msg: &ClientMessage) {
    ws.send(Message::Text(msg.to_frame(0).to_json().into())).await.unwrap();
}

async fn recv(ws: &mut Ws) -> Frame {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(30), ws.next()).await.expect("frame in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

/// Frames up to and including the next view (plus terminal, if any).
async fn until_view(ws: &mut Ws, log: &mut Vec<Frame>) -> Frame {
    loop {
        let f = recv(ws).await;
        log.push(f.clone());
        if f.kind == "view" {
            if f.payload["ranking"].is_null() {
                return f;
            }
            let t = recv(ws).await;
            assert_eq!(t.kind, "terminal");
            log.push(t);
            return f;
        }
    }
}

fn legal(view: &Frame) -> Vec<i64> {
    match view.payload["legal_mask"].as_array() {
        Some(m) => m.iter().enumerate().filter(|(_, b)| b.as_bool() == Some(true)).map(|(i, _)| i as i64).collect(),
        None => vec![],
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn create_and_play_over_loopback() {
    let addr = start().await;
    let mut http = TcpStream::connect(addr).await.unwrap();
    http.write_all(b"GET /health HTTP/1.1\r\nhost: x\r\nconnection: close\r\n\r\n").await.unwrap();
    let mut body = String::new();
    http.read_to_string(&mut body).await.unwrap();
    assert!(body.starts_with("HTTP/1.1 200") && body.ends_with("ok"), "{body}");

    let mut ws = connect(addr).await;
    let req = CreateRequest { num_players: 2, human_seat: 1, checkpoint: "toy".into(), seed: Some(8) };
    send(&mut ws, &ClientMessage::Create(req)).await;
    let mut log = Vec::new();
    let mut view = until_view(&mut ws, &mut log).await;
    let id = view.session.clone().unwrap();
    assert_eq!(legal(&view), vec![0, 1]);

    // Illegal and out-of-range actions bounce with the mask.
    for bad in [7, 16, -1] {
        send(&mut ws, &ClientMessage::Action { session: id.clone(), action: bad }).await;
        let f = recv(&mut ws).await;
        log.push(f.clone());
        let ServerMessage::Reject(r) = ServerMessage::from_frame(&f).unwrap() else { panic!("{f:?}") };
        assert_eq!(r.legal_mask.iter().filter(|&&b| b).count(), 2);
    }
    for _ in 0..12 {
        let a = legal(&view)[0];
        send(&mut ws, &ClientMessage::Action { session: id.clone(), action: a }).await;
        view = until_view(&mut ws, &mut log).await;
        if legal(&view).is_empty() {
            break;
        }
    }
    for (i, f) in log.iter().enumerate() {
        assert_eq!(f.seq, i as u64);
        assert_eq!(f.session.as_deref(), Some(id.as_str()));
    }
    for (i, f) in log.iter().enumerate() {
        if f.kind == "events" && f.payload["actor"] == json!(0) {
            assert_eq!((log[i - 1].kind.as_str(), log[i + 1].kind.as_str()), ("thinking", "analysis"));
        }
    }
    let analysis: Vec<_> = log.iter().filter(|f| f.kind == "analysis").collect();
    assert!(analysis.len() >= 12);
    for a in analysis {
        let w: Vec<f64> = a.payload["win_probabilities"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }

    // A second connection resumes the session and sees the same stream.
    let mut other = connect(addr).await;
    send(&mut other, &ClientMessage::Resume { session: id.clone(), from_seq: 0 }).await;
    for expected in &log {
        assert_eq!(&recv(&mut other).await, expected);
    }
    // And keeps playing on the resumed channel.
    send(&mut other, &ClientMessage::Action { session: id.clone(), action: legal(&view)[0] }).await;
    let f = recv(&mut other).await;
    assert_eq!(f.seq, log.len() as u64);
    assert_eq!(f.kind, "events");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_and_concurrent_sessions() {
    let addr = start().await;
    let mut ws = connect(addr).await;
    ws.send(Message::Text("not json".into())).await.unwrap();
    assert_eq!(recv(&mut ws).await.kind, "error");
    let req = json!({"type": "create", "session": null, "seq": 0,
        "payload": {"num_players": 2, "human_seat": 0, "checkpoint": "missing"}});
    ws.send(Message::Text(req.to_string().into())).await.unwrap();
    let f = recv(&mut ws).await;
    assert_eq!(f.kind, "error");
    assert!(f.payload["message"].as_str().unwrap().contains("unknown checkpoint"));
    send(&mut ws, &ClientMessage::Action { session: "s404".into(), action: 0 }).await;
    assert_eq!(recv(&mut ws).await.kind, "error");

    // Two sessions on two sockets, driven to the end against a fast bot.
    let mut tasks = Vec::new();
    for seed in [1u64, 2] {
        tasks.push(tokio::spawn(async move {
            let mut ws = connect(addr).await;
            let req = CreateRequest { num_players: 3, human_seat: 0, checkpoint: "bot:greedy-value".into(), seed: Some(seed) };
            send(&mut ws, &ClientMessage::Create(req)).await;
            let mut log = Vec::new();
            let mut view = until_view(&mut ws, &mut log).await;
            let id = view.session.clone().unwrap();
            while !legal(&view).is_empty() {
                let a = *legal(&view).last().unwrap();
                send(&mut ws, &ClientMessage::Action { session: id.clone(), action: a }).await;
                view = until_view(&mut ws, &mut log).await;
            }
            assert_eq!(log.last().unwrap().kind, "terminal");
            assert!(log.iter().enumerate().all(|(i, f)| f.seq == i as u64));
            id
        }));
    }
    let mut ids = Vec::new();
    for t in tasks {
        ids.push(t.await.unwrap());
    }
    assert_ne!(ids[0], ids[1]);
}
