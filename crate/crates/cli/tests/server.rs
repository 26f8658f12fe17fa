mod common;

use common::{spawn_server, SCENE};
use serde_json::{json, Value};
use ureq::http::Response;
use ureq::{Agent, Body};

struct Client {
    agent: Agent,
    base: String,
}

impl Client {
    fn start() -> Self {
        let agent: Agent = Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            agent,
            base: format!("http://{}", spawn_server()),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn get(&self, path: &str) -> (u16, Option<String>, Value) {
        reply(self.agent.get(self.url(path)).call().unwrap())
    }

    fn post(&self, path: &str, version: Option<u64>, body: Value) -> (u16, Option<String>, Value) {
        let mut req = self.agent.post(self.url(path));
        if let Some(v) = version {
            req = req.header("If-Match", format!("\"{v}\""));
        }
        reply(req.send_json(body).unwrap())
    }

    fn patch(&self, path: &str, version: u64, body: Value) -> (u16, Option<String>, Value) {
        let req = self.agent.patch(self.url(path)).header("If-Match", format!("\"{version}\""));
        reply(req.send_json(body).unwrap())
    }

    fn delete(&self, path: &str, version: u64) -> (u16, Option<String>, Value) {
        let req = self.agent.delete(self.url(path)).header("If-Match", format!("\"{version}\""));
        reply(req.call().unwrap())
    }

    fn create(&self) -> (String, u64) {
        let (status, etag, body) = self.post("/sessions", None, json!({ "scene": SCENE }));
        assert_eq!(status, 201, "{body}");
        let version = body["version"].as_u64().unwrap();
        assert_eq!(etag.as_deref(), Some(format!("\"{version}\"").as_str()));
        (body["session_id"].as_str().unwrap().to_string(), version)
    }
}

fn reply(mut res: Response<Body>) -> (u16, Option<String>, Value) {
    let status = res.status().as_u16();
    let etag = res.headers().get("etag").map(|v| v.to_str().unwrap().to_string());
    let text = res.body_mut().read_to_string().unwrap();
    let body = if text.is_empty() { Value::Null } else { serde_json::from_str(&text).unwrap() };
    (status, etag, body)
}

fn items_except(list: &Value, path: &str) -> Vec<Value> {
    list["items"].as_array().unwrap().iter().filter(|i| i["path"] != path).cloned().collect()
}

#[test]
fn session_lifecycle() {
    let c = Client::start();
    let (id, v1) = c.create();
    assert_eq!(v1, 1);

    let (status, _, list) = c.get(&format!("/sessions/{id}/list"));
    assert_eq!(status, 200);
    assert_eq!(list["items"].as_array().unwrap().len(), 27);

    let (status, etag, body) = c.post(&format!("/sessions/{id}/items/0.1/select"), Some(1), json!({ "rank": 2 }));
    assert_eq!(status, 200, "{body}");
    assert_eq!(etag.as_deref(), Some("\"2\""));
    assert_eq!(body["item"]["selection"]["rank"], 2);
    assert_eq!(body["item"]["texture_stale"], true);
    let chosen = body["item"]["candidates"][1]["asset_id"].clone();
    assert_eq!(body["item"]["selection"]["asset_id"], chosen);

    let (status, _, body) = c.post(&format!("/sessions/{id}/items/0.1/texture"), Some(2), Value::Null);
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["item"]["texture"]["asset_id"], chosen);

    let (_, _, manifest) = c.get(&format!("/sessions/{id}/manifest"));
    let record = manifest["items"].as_array().unwrap().iter().find(|i| i["path"] == "0.1").unwrap();
    assert_eq!(record["selection"]["asset_id"], chosen);

    let (_, _, history) = c.get(&format!("/sessions/{id}/history"));
    assert_eq!(history["history"].as_array().unwrap().len(), 2);
    assert_eq!(history["history"][0]["op"], "select");
}

#[test]
fn edit_and_re_retrieve_touch_only_one_item() {
    let c = Client::start();
    let (id, v) = c.create();
    let (_, _, before) = c.get(&format!("/sessions/{id}/list"));

    let (status, _, body) = c.patch(&format!("/sessions/{id}/items/2.0"), v, json!({ "attributes": ["sea-glass green"] }));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["item"]["ranking_stale"], true);
    let (status, _, body) = c.post(&format!("/sessions/{id}/items/2.0/retrieve"), Some(2), json!({ "k": 4 }));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["item"]["candidates"].as_array().unwrap().len(), 4);
    assert_eq!(body["item"]["ranking_stale"], false);

    let (_, _, after) = c.get(&format!("/sessions/{id}/list"));
    assert_eq!(items_except(&before, "2.0"), items_except(&after, "2.0"));
}

#[test]
fn versions_are_enforced() {
    let c = Client::start();
    let (id, _) = c.create();
    let select = format!("/sessions/{id}/items/0/select");
    let (status, _, body) = c.post(&select, None, json!({ "rank": 2 }));
    assert_eq!(status, 428, "{body}");
    assert_eq!(c.post(&select, Some(1), json!({ "rank": 2 })).0, 200);
    let (status, _, body) = c.post(&select, Some(1), json!({ "rank": 3 }));
    assert_eq!(status, 409);
    assert!(body["error"].as_str().unwrap().contains('2'));
    let (_, etag, session) = c.get(&format!("/sessions/{id}"));
    assert_eq!(session["version"], 2);
    assert_eq!(etag.as_deref(), Some("\"2\""));
}

#[test]
fn errors_map_to_statuses() {
    let c = Client::start();
    let (id, v) = c.create();
    assert_eq!(c.get("/sessions/nope/list").0, 404);
    assert_eq!(c.post(&format!("/sessions/{id}/items/7.7/select"), Some(v), json!({ "rank": 1 })).0, 404);
    assert_eq!(c.post(&format!("/sessions/{id}/items/0/select"), Some(v), json!({ "rank": 99 })).0, 422);
    assert_eq!(c.post(&format!("/sessions/{id}/items/x.y/select"), Some(v), json!({ "rank": 1 })).0, 400);
    assert_eq!(c.post(&format!("/sessions/{id}/items/0/select"), Some(v), json!({ "rnk": 1 })).0, 422);
    assert_eq!(c.post("/sessions", None, json!({ "scene": " " })).0, 400);
    assert_eq!(c.get("/assets/unknown/thumbnail").0, 404);
    // Failed edits leave the version alone.
    assert_eq!(c.get(&format!("/sessions/{id}")).2["version"], 1);
}

#[test]
fn add_and_delete_items() {
    let c = Client::start();
    let (id, v) = c.create();
    let (status, _, body) = c.post(
        &format!("/sessions/{id}/items"),
        Some(v),
        json!({ "parent": "1", "item": { "category": "conch shell", "attributes": ["pearly pink"] } }),
    );
    assert_eq!(status, 201, "{body}");
    assert_eq!(body["path"], "1.5");
    assert_eq!(body["item"]["category"], "conch shell");

    let (status, _, _) = c.delete(&format!("/sessions/{id}/items/0"), 2);
    assert_eq!(status, 200);
    let (_, _, list) = c.get(&format!("/sessions/{id}/list"));
    assert_eq!(list["items"].as_array().unwrap().len(), 22);
    assert_eq!(list["version"], 3);
}

#[test]
fn thumbnails_are_served() {
    let c = Client::start();
    let mut res = c.agent.get(c.url("/assets/carved_throne/thumbnail")).call().unwrap();
    assert_eq!(res.status().as_u16(), 200);
    assert_eq!(res.headers().get("content-type").unwrap(), "image/png");
    let bytes = res.body_mut().read_to_vec().unwrap();
    assert_eq!(&bytes[..4], b"\x89PNG");
}
