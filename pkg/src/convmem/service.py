"""Read-only local HTTP service over a frozen store.

The display-layer law holds everywhere: the result body is always the
verbatim snippet, and distilled fields appear only under a ``routing``
sub-object. Restarting over the same stores yields identical responses.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query as QueryParam

from .config import PipelineConfig
from .pipeline import load_engine
from .searcher import enumerate_configs


def create_app(cfg: PipelineConfig, frontend_dir: str | Path | None = None) -> FastAPI:
    engine = load_engine(cfg)
    configs = enumerate_configs("evaluated", k=cfg.k)
    config_index = {c.config_id: c for c in configs}

    app = FastAPI(title="convmem", docs_url=None, redoc_url=None)

    @app.get("/configs")
    def get_configs():
        return [
            {
                "config_id": c.config_id,
                "family": c.family,
                "mode": c.mode,
                "mechanism": c.mechanism,
                "fusion": c.fusion,
                "k": c.k,
            }
            for c in configs
        ]

    @app.get("/search")
    def get_search(q: str = QueryParam(...), config: str = QueryParam("full_text:bm25_okapi:passthrough"),
                   k: int = QueryParam(None)):
        if config not in config_index:
            raise HTTPException(
                status_code=404,
                detail={
                    "error": f"unknown config {config!r}",
                    "hint": "GET /configs lists the evaluated configurations",
                },
            )
        search_config = config_index[config]
        if k is not None:
            from dataclasses import replace
            search_config = replace(search_config, k=max(1, min(int(k), 100)))
        ranked = engine.run(search_config, q)
        results = []
        for e in ranked.entries:
            obj = engine.objects.get(e.ref)
            results.append({
                "exchange_ref": e.ref,
                "rank": e.rank,
                "score": e.score,
                "verbatim_snippet": engine.verbatim_snippet(e.ref, cfg.snippet_truncate_chars),
                "routing": {
                    "distilled_core": obj.distill_text if obj else None,
                    "rooms": [
                        {
                            "room_type": r.room_type,
                            "room_key": r.room_key,
                            "room_label": r.room_label,
                            "room_id": str(r.room_id),
                        }
                        for r in (obj.room_assignments if obj else [])
                    ],
                    "files": obj.files_touched if obj else [],
                },
                "provenance": ranked.layer_provenance.get(e.ref, []),
            })
        return {"query": q, "config_id": config, "results": results}

    @app.get("/exchange/{conversation_id}/{ply_start}/{ply_end}")
    def get_exchange(conversation_id: str, ply_start: int, ply_end: int):
        ref = f"{conversation_id}#{ply_start}-{ply_end}"
        ex = engine.exchanges.get(ref)
        if ex is None:
            raise HTTPException(status_code=404, detail={"error": f"unknown exchange {ref!r}"})
        return {
            "exchange_ref": ref,
            "conversation_id": ex.conversation_id,
            "project_id": ex.project_id,
            "ply_start": ex.ply_start,
            "ply_end": ex.ply_end,
            "incomplete": ex.incomplete,
            "messages": [
                {
                    "role": m.role,
                    "text": m.text,
                    "is_tool_only": m.is_tool_only,
                    "ply_index": m.ply_index,
                }
                for m in ex.messages
            ],
        }

    @app.get("/rooms")
    def get_rooms():
        counts: dict[int, dict] = {}
        for obj in engine.objects.values():
            for r in obj.room_assignments:
                slot = counts.setdefault(r.room_id, {
                    "room_id": str(r.room_id),
                    "room_type": r.room_type,
                    "room_key": r.room_key,
                    "room_label": r.room_label,
                    "n_objects": 0,
                })
                slot["n_objects"] += 1
        return sorted(
            counts.values(),
            key=lambda r: (-r["n_objects"], r["room_type"], r["room_key"]),
        )

    if frontend_dir is not None:
        # the browser client does same-origin requests; serving its build
        # here makes `serve --ui` a complete local deployment
        from fastapi.staticfiles import StaticFiles

        root = Path(frontend_dir)
        if not (root / "index.html").exists():
            raise FileNotFoundError(f"no index.html under {root}")
        app.mount("/", StaticFiles(directory=root, html=True), name="ui")

    return app


def serve(cfg: PipelineConfig, host: str = "127.0.0.1", port: int = 8765,
          frontend_dir: str | Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(cfg, frontend_dir), host=host, port=port, log_level="warning")
