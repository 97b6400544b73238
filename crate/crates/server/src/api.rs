use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use clickcarve_core::carving::{CarvingSession, SessionConfig};
use clickcarve_core::eval::track_eval;
use clickcarve_core::mask::{rle_decode, rle_encode, BinaryMask, Pixel};
use clickcarve_core::overlay::{heatmap_png, load_frame, mask_overlay_png, mask_png, proposal_overlay_png, THUMBNAIL_MAX_EDGE};
use clickcarve_core::propagation::{propagate_keyframed, KeyframeInit, PropagationConfig};
use clickcarve_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{ApiError, ApiResult};
use crate::state::{AppState, ImageKey, LoggedRequest, SessionEntry, TrackStatus};

type AppRef = Arc<AppState>;

pub fn router(state: AppRef) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/videos", get(list_videos))
        .route("/videos/{video}/frames/{frame}", get(frame_image))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/clicks", post(post_click))
        .route("/sessions/{id}/undo", post(undo_click))
        .route("/sessions/{id}/accept", post(accept))
        .route("/sessions/{id}/heatmap.png", get(heatmap))
        .route("/sessions/{id}/mask.png", get(accepted_mask))
        .route("/sessions/{id}/proposals/{pid}/overlay.png", get(overlay))
        .route("/sessions/{id}/proposals/{pid}/thumbnail.png", get(thumbnail))
        .route("/tracks", post(launch_track))
        .route("/tracks/{id}", get(get_track))
        .route("/tracks/{id}/frames/{frame}/overlay.png", get(track_overlay))
        .route("/log", get(request_log))
        .with_state(state)
}

fn png(bytes: Arc<Vec<u8>>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes.as_ref().clone()).into_response()
}

fn log_entry(path: String, body: &impl Serialize) -> LoggedRequest {
    LoggedRequest {
        method: "POST".into(),
        path,
        body: serde_json::to_value(body).unwrap_or(serde_json::Value::Null),
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await?
}

#[derive(Serialize)]
struct VideoView {
    name: String,
    frames: usize,
    objects: Vec<String>,
    has_images: bool,
}

async fn list_videos(State(st): State<AppRef>) -> Json<Vec<VideoView>> {
    Json(
        st.catalog
            .videos
            .values()
            .map(|v| VideoView {
                name: v.name.clone(),
                frames: v.frame_count(),
                objects: v.objects.keys().cloned().collect(),
                has_images: !v.image_frames.is_empty(),
            })
            .collect(),
    )
}

async fn frame_image(State(st): State<AppRef>, Path((video, frame)): Path<(String, usize)>) -> ApiResult<Response> {
    let v = st.catalog.video(&video)?;
    if !v.image_frames.contains(&frame) {
        return Err(ApiError::not_found(format!("no image for {video} frame {frame}")));
    }
    let path = st.catalog.frame_path(&video, frame);
    let bytes = tokio::task::spawn_blocking(move || std::fs::read(&path).map_err(|e| Error::io(path, e)))
        .await??;
    Ok(png(Arc::new(bytes)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub video: String,
    pub frame: usize,
    #[serde(default)]
    pub object: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopEntry {
    pub rank: usize,
    pub id: u32,
    pub objectness: f64,
    pub votes: u32,
    pub thumbnail_url: String,
}

/// Session state after any action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub session_id: String,
    pub matched: usize,
    pub topk: Vec<TopEntry>,
    pub heatmap_url: String,
    pub clicks: Vec<Pixel>,
    pub clicks_used: usize,
    pub budget: usize,
    pub accepted: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub video: String,
    pub frame: usize,
    pub object: Option<String>,
    pub width: usize,
    pub height: usize,
    pub k: usize,
    pub proposals: usize,
    pub state: StateView,
}

fn state_view(id: &str, s: &CarvingSession, matched: usize) -> StateView {
    let votes = s.votes();
    let topk = s
        .top_k()
        .iter()
        .enumerate()
        .map(|(rank, &pid)| TopEntry {
            rank,
            id: pid,
            objectness: s.pool().proposals()[pid as usize].objectness,
            votes: votes[pid as usize],
            thumbnail_url: format!("/sessions/{id}/proposals/{pid}/thumbnail.png"),
        })
        .collect();
    StateView {
        session_id: id.to_string(),
        matched,
        topk,
        heatmap_url: format!("/sessions/{id}/heatmap.png?rev={}", s.clicks().len()),
        clicks: s.clicks().to_vec(),
        clicks_used: s.clicks().len(),
        budget: s.config().budget,
        accepted: s.accepted(),
    }
}

fn session_view(id: &str, e: &SessionEntry) -> SessionView {
    let (width, height) = e.session.pool().dims();
    SessionView {
        session_id: id.to_string(),
        video: e.video.clone(),
        frame: e.frame,
        object: e.object.clone(),
        width,
        height,
        k: e.session.config().k,
        proposals: e.session.pool().len(),
        state: state_view(id, &e.session, 0),
    }
}

async fn create_session(State(st): State<AppRef>, Json(req): Json<CreateSession>) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let pool = {
        let (st, video, frame) = (st.clone(), req.video.clone(), req.frame);
        blocking(move || st.pool(&video, frame)).await?
    };
    let config = SessionConfig {
        k: req.k.unwrap_or(st.config.k),
        budget: req.budget.unwrap_or(st.config.budget),
        allow_any_accept: false,
    };
    let entry = SessionEntry {
        session: CarvingSession::new(pool, config)?,
        video: req.video.clone(),
        frame: req.frame,
        object: req.object.clone(),
        wall_time_s: None,
    };
    let logged = st.recording().then(|| log_entry("/sessions".into(), &req));
    let id = st.insert_session(entry, logged);
    let s = st.session(&id)?;
    let e = s.lock().expect("session poisoned");
    Ok((StatusCode::CREATED, Json(session_view(&id, &e))))
}

async fn get_session(State(st): State<AppRef>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let s = st.session(&id)?;
    let e = s.lock().expect("session poisoned");
    Ok(Json(session_view(&id, &e)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClickBody {
    pub x: i64,
    pub y: i64,
}

async fn post_click(State(st): State<AppRef>, Path(id): Path<String>, Json(body): Json<ClickBody>) -> ApiResult<Json<StateView>> {
    let s = st.session(&id)?;
    let mut e = s.lock().expect("session poisoned");
    st.record(log_entry(format!("/sessions/{id}/clicks"), &body));
    let sess = &mut e.session;
    if let Some(pid) = sess.accepted() {
        return Err(Error::SessionAccepted(pid).into());
    }
    let (w, h) = sess.pool().dims();
    if body.x < 0 || body.y < 0 || body.x >= w as i64 || body.y >= h as i64 {
        return Err(Error::OutOfBounds {
            x: body.x,
            y: body.y,
            width: w,
            height: h,
        }
        .into());
    }
    let r = sess.click(Pixel::new(body.x as u32, body.y as u32))?;
    Ok(Json(state_view(&id, sess, r.matched)))
}

async fn undo_click(State(st): State<AppRef>, Path(id): Path<String>) -> ApiResult<Json<StateView>> {
    let s = st.session(&id)?;
    let mut e = s.lock().expect("session poisoned");
    st.record(log_entry(format!("/sessions/{id}/undo"), &json!({})));
    e.session.undo()?;
    Ok(Json(state_view(&id, &e.session, 0)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcceptBody {
    pub proposal_id: u32,
    /// Seconds from the first click to acceptance, measured by the client.
    #[serde(default)]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptView {
    pub session_id: String,
    pub proposal_id: u32,
    pub width: usize,
    pub height: usize,
    /// Base64 of the varint column-major RLE.
    pub rle: String,
    pub mask_url: String,
    pub clicks_used: usize,
}

async fn accept(State(st): State<AppRef>, Path(id): Path<String>, Json(body): Json<AcceptBody>) -> ApiResult<Json<AcceptView>> {
    let s = st.session(&id)?;
    let mut e = s.lock().expect("session poisoned");
    st.record(log_entry(format!("/sessions/{id}/accept"), &body));
    let mask = e.session.accept(body.proposal_id)?;
    e.wall_time_s = body.wall_time_s;
    Ok(Json(AcceptView {
        session_id: id.clone(),
        proposal_id: body.proposal_id,
        width: mask.width(),
        height: mask.height(),
        rle: B64.encode(rle_encode(&mask)),
        mask_url: format!("/sessions/{id}/mask.png"),
        clicks_used: e.session.clicks().len(),
    }))
}

async fn heatmap(State(st): State<AppRef>, Path(id): Path<String>) -> ApiResult<Response> {
    let h = {
        let s = st.session(&id)?;
        let e = s.lock().expect("session poisoned");
        e.session.heatmap()
    };
    let bytes = blocking(move || Ok(heatmap_png(&h)?)).await?;
    Ok(png(Arc::new(bytes)))
}

async fn accepted_mask(State(st): State<AppRef>, Path(id): Path<String>) -> ApiResult<Response> {
    let mask = {
        let s = st.session(&id)?;
        let e = s.lock().expect("session poisoned");
        let pid = e.session.accepted().ok_or_else(|| ApiError {
            status: StatusCode::CONFLICT,
            category: "conflict",
            code: "not_accepted".into(),
            message: format!("session {id} has not accepted a proposal"),
        })?;
        e.session.pool().proposals()[pid as usize].mask.clone()
    };
    let bytes = blocking(move || Ok(mask_png(&mask)?)).await?;
    Ok(png(Arc::new(bytes)))
}

async fn proposal_image(st: AppRef, id: String, pid: u32, thumbnail: bool) -> ApiResult<Response> {
    let (pool, video, frame) = {
        let s = st.session(&id)?;
        let e = s.lock().expect("session poisoned");
        (e.session.pool().clone(), e.video.clone(), e.frame)
    };
    if pool.get(pid).is_none() {
        return Err(Error::UnknownProposal(pid).into());
    }
    let key = ImageKey::Overlay {
        video,
        frame,
        proposal: pid,
        thumbnail,
    };
    if let Some(bytes) = st.cached_image(&key) {
        return Ok(png(bytes));
    }
    let edge = thumbnail.then_some(THUMBNAIL_MAX_EDGE);
    let bytes = blocking(move || Ok(proposal_overlay_png(&pool, pid, edge)?)).await?;
    Ok(png(st.cache_image(key, bytes)))
}

async fn overlay(State(st): State<AppRef>, Path((id, pid)): Path<(String, u32)>) -> ApiResult<Response> {
    proposal_image(st, id, pid, false).await
}

async fn thumbnail(State(st): State<AppRef>, Path((id, pid)): Path<(String, u32)>) -> ApiResult<Response> {
    proposal_image(st, id, pid, true).await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyframeSpec {
    /// Defaults to the session's frame when `session_id` is given.
    #[serde(default)]
    pub frame: Option<usize>,
    /// Use the mask this session accepted.
    #[serde(default)]
    pub session_id: Option<String>,
    /// Use proposal `proposal_id` of the frame's pool.
    #[serde(default)]
    pub proposal_id: Option<u32>,
    /// Base64 varint RLE of an explicit mask.
    #[serde(default)]
    pub rle: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaunchTrack {
    pub video: String,
    #[serde(default)]
    pub object: Option<String>,
    pub keyframes: Vec<KeyframeSpec>,
    #[serde(default)]
    pub drift_floor: Option<f64>,
}

fn resolve_keyframe(st: &AppState, video: &str, spec: &KeyframeSpec) -> ApiResult<KeyframeInit> {
    if let Some(sid) = &spec.session_id {
        let s = st.session(sid)?;
        let e = s.lock().expect("session poisoned");
        if e.video != video {
            return Err(ApiError::bad_request(format!("session {sid} belongs to video {:?}", e.video)));
        }
        if spec.frame.is_some_and(|f| f != e.frame) {
            return Err(ApiError::bad_request(format!("session {sid} is on frame {}", e.frame)));
        }
        let pid = e
            .session
            .accepted()
            .ok_or_else(|| ApiError::bad_request(format!("session {sid} has not accepted a proposal")))?;
        let mask = e.session.pool().proposals()[pid as usize].mask.clone();
        return Ok(KeyframeInit::new(e.frame, mask).with_proposal(pid));
    }
    let frame = spec
        .frame
        .ok_or_else(|| ApiError::bad_request("keyframe needs a frame or a session_id"))?;
    let pool = st.pool(video, frame)?;
    match (&spec.proposal_id, &spec.rle) {
        (Some(pid), None) => {
            let p = pool.get(*pid).ok_or(Error::UnknownProposal(*pid))?;
            Ok(KeyframeInit::new(frame, p.mask.clone()).with_proposal(*pid))
        }
        (None, Some(rle)) => {
            let bytes = B64
                .decode(rle)
                .map_err(|e| ApiError::bad_request(format!("keyframe {frame}: bad base64: {e}")))?;
            let mask: BinaryMask = rle_decode(&bytes, pool.width(), pool.height())?;
            Ok(KeyframeInit::new(frame, mask))
        }
        _ => Err(ApiError::bad_request(format!(
            "keyframe {frame}: give exactly one of session_id, proposal_id, rle"
        ))),
    }
}

async fn launch_track(State(st): State<AppRef>, Json(req): Json<LaunchTrack>) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let frame_count = st.catalog.video(&req.video)?.frame_count();
    if req.keyframes.is_empty() {
        return Err(ApiError::bad_request("at least one keyframe is required"));
    }
    if let Some(obj) = &req.object {
        if !st.catalog.video(&req.video)?.objects.contains_key(obj) {
            return Err(ApiError::not_found(format!("object {obj:?} in video {:?}", req.video)));
        }
    }
    let inits = {
        let (st, req) = (st.clone(), req.clone());
        blocking(move || {
            req.keyframes
                .iter()
                .map(|k| resolve_keyframe(&st, &req.video, k))
                .collect::<ApiResult<Vec<_>>>()
        })
        .await?
    };
    let config = PropagationConfig {
        drift_floor: req.drift_floor.unwrap_or(PropagationConfig::default().drift_floor),
    };
    let pools = st.video_pools(&req.video)?;
    let id = st.new_track(&req.video, req.object.clone());
    st.record(log_entry("/tracks".into(), &req));
    let (st2, id2) = (st.clone(), id.clone());
    tokio::task::spawn_blocking(move || {
        let result = propagate_keyframed(pools.as_ref(), &inits, frame_count, &config).and_then(|track| {
            let score = match &req.object {
                Some(obj) => Some(track_eval(&track, &st2.catalog.load_gt_track(&req.video, obj)?)?),
                None => None,
            };
            Ok((track, score))
        });
        match result {
            Ok((track, score)) => st2.finish_track(&id2, TrackStatus::Done(Arc::new(track)), score),
            Err(e) => st2.finish_track(&id2, TrackStatus::Failed(e.to_string()), None),
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "track_id": id }))))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackView {
    pub track_id: String,
    pub video: String,
    pub object: Option<String>,
    pub status: String,
    pub error: Option<String>,
    pub frames: usize,
    pub keyframes: Vec<usize>,
    pub drifted: Vec<usize>,
    pub track_iou: Option<f64>,
    /// Proposal chosen per frame; `null` where the mask was carried over.
    pub proposals: Vec<Option<u32>>,
    pub overlay_urls: Vec<String>,
}

async fn get_track(State(st): State<AppRef>, Path(id): Path<String>) -> ApiResult<Json<TrackView>> {
    let job = st.track(&id)?;
    let mut view = TrackView {
        track_id: id.clone(),
        video: job.video.clone(),
        object: job.object.clone(),
        status: "running".into(),
        error: None,
        frames: 0,
        keyframes: Vec::new(),
        drifted: Vec::new(),
        track_iou: job.track_iou,
        proposals: Vec::new(),
        overlay_urls: Vec::new(),
    };
    match &job.status {
        TrackStatus::Running => {}
        TrackStatus::Failed(msg) => {
            view.status = "failed".into();
            view.error = Some(msg.clone());
        }
        TrackStatus::Done(track) => {
            view.status = "done".into();
            view.frames = track.len();
            view.keyframes = track.keyframes.iter().copied().collect();
            view.drifted = track.drifted_frames();
            view.proposals = track.frames.iter().map(|f| f.proposal).collect();
            view.overlay_urls = (0..track.len())
                .map(|f| format!("/tracks/{id}/frames/{f}/overlay.png"))
                .collect();
        }
    }
    Ok(Json(view))
}

async fn track_overlay(State(st): State<AppRef>, Path((id, frame)): Path<(String, usize)>) -> ApiResult<Response> {
    let job = st.track(&id)?;
    let TrackStatus::Done(track) = job.status else {
        return Err(ApiError {
            status: StatusCode::CONFLICT,
            category: "conflict",
            code: "track_not_ready".into(),
            message: format!("track {id} has not finished"),
        });
    };
    let mask = track
        .mask(frame)
        .ok_or_else(|| ApiError::not_found(format!("frame {frame} of track {id}")))?
        .clone();
    let key = ImageKey::TrackFrame {
        track: id.clone(),
        frame,
    };
    if let Some(bytes) = st.cached_image(&key) {
        return Ok(png(bytes));
    }
    let image_path = st
        .catalog
        .video(&job.video)?
        .image_frames
        .contains(&frame)
        .then(|| st.catalog.frame_path(&job.video, frame));
    let bytes = blocking(move || {
        let img = image_path.map(|p| load_frame(&p)).transpose()?;
        Ok(mask_overlay_png(img.as_ref(), &mask, &[])?)
    })
    .await?;
    Ok(png(st.cache_image(key, bytes)))
}

async fn request_log(State(st): State<AppRef>) -> ApiResult<Json<Vec<LoggedRequest>>> {
    st.request_log()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("request recording is off"))
}
