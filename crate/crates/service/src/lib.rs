//! JSON-over-HTTP service for the annotation tool: sequences and frames,
//! revision-checked polygon annotations, and background propagation jobs.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/classes` | class ids, names and colors |
//! | GET | `/api/sequences` | list |
//! | GET | `/api/sequences/{seq}` | summary and latest finished job |
//! | GET | `/api/sequences/{seq}/frames/{idx}` | frame as PNG |
//! | GET, PUT | `/api/sequences/{seq}/annotations/{idx}` | polygons; PUT carries the current revision |
//! | GET | `/api/sequences/{seq}/annotations/{idx}/history` | all revisions |
//! | GET, POST | `/api/sequences/{seq}/jobs` | list / start propagation |
//! | GET | `/api/jobs/{id}` | job status |
//! | GET | `/api/sequences/{seq}/labels/{idx}` | propagated label image of the latest finished job |

pub mod api;
pub mod jobs;
pub mod raster;
pub mod store;

use std::net::SocketAddr;
use std::path::Path;

pub use api::{router, AppState};
pub use raster::{rasterize_partial, rasterize_polygons, Annotation, AnnotationError, Polygon};
pub use store::{Store, StoreError};

/// Serves `root` on `addr` until Ctrl-C.
pub async fn serve(root: &Path, addr: SocketAddr, workers: usize) -> std::io::Result<()> {
    let store = Store::open(root).map_err(std::io::Error::other)?;
    let app = router(AppState::new(store, workers));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
