"""HTTP facade over the anonymization engine.

Slide content travels base64-encoded inside JSON envelopes, so every
request and response has a typed model. Formats that spread a slide
over sibling files cannot be sent this way and are refused just like
on the byte-stream API.

Chunked uploads go through sessions: create one, append raw chunks,
finalize. The finished report stays retrievable until the session is
deleted. State lives in process memory; a restart forgets all
sessions.

Run with:  uvicorn wsianon.service:app
"""

from __future__ import annotations

import base64
import binascii
import threading
import uuid

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .byteio import MemoryStore, StreamSession
from .detect import VendorFormat, describe_formats, profile, sniff_store
from .engine import AnonymizationConfig, anonymize_bytes
from .engine import _audit_store  # shared grading path for in-memory audits
from .errors import (
    CorruptStructure,
    IoFailure,
    LabelNotSeparable,
    ReplacementConstraintViolation,
    SessionFinalized,
    UnsupportedFormat,
    WsiAnonError,
)
from .vendors import handler_for

_STATUS_FOR = (
    (UnsupportedFormat, 415),
    (LabelNotSeparable, 409),
    (ReplacementConstraintViolation, 409),
    (SessionFinalized, 409),
    (CorruptStructure, 422),
    (IoFailure, 500),
)


def _status_of(exc: WsiAnonError) -> int:
    for cls, status in _STATUS_FOR:
        if isinstance(exc, cls):
            return status
    return 422


class SlidePayload(BaseModel):
    content_b64: str = Field(description="slide bytes, base64")
    name: str = Field(default="upload", description="file name, used for detection cues")

    def content(self) -> bytes:
        try:
            return base64.b64decode(self.content_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"invalid base64 content: {exc}")


class AnonymizeOptions(BaseModel):
    keep_macro: bool = False
    overwrite_only: bool = False
    dry_run: bool = False
    rename: bool = True
    new_base_name: str | None = None

    def config(self) -> AnonymizationConfig:
        return AnonymizationConfig(
            keep_macro=self.keep_macro,
            overwrite_only=self.overwrite_only,
            rename=self.rename,
            new_base_name=self.new_base_name,
            dry_run=self.dry_run,
        )


class AnonymizeRequest(SlidePayload, AnonymizeOptions):
    pass


class SentinelSet(BaseModel):
    values: dict[str, str] = Field(default_factory=dict,
                                   description="role -> needle text")
    hex_roles: list[str] = Field(default_factory=list,
                                 description="roles whose value is hex-encoded binary")

    def needles(self) -> dict[str, bytes]:
        out = {}
        for role, value in self.values.items():
            if role in self.hex_roles:
                try:
                    out[role] = bytes.fromhex(value)
                except ValueError as exc:
                    raise HTTPException(status_code=422,
                                        detail=f"sentinel {role!r} is not valid hex: {exc}")
            else:
                out[role] = value.encode("utf-8")
        return out


class AuditRequest(SlidePayload):
    sentinels: SentinelSet | None = None


class DetectResponse(BaseModel):
    vendor: str
    cue: str


class AuditResponse(BaseModel):
    level: int
    level_name: str
    checks: dict[str, bool]
    attributes: list[dict]
    sentinel_hits: list[dict]


class ReportModel(BaseModel):
    vendor: str
    detection_cue: str
    input_path: str
    output_path: str
    backup_path: str | None
    dry_run: bool
    patches_planned: int
    patches_applied: int
    descriptor_rewritten: bool
    destroyed_images: list[dict]
    kept_images: list[dict]
    blanked_attributes: list[dict]
    warnings: list[str]
    audit: AuditResponse | None
    elapsed_seconds: float


class AnonymizeResponse(BaseModel):
    report: ReportModel
    content_b64: str


class SessionCreated(BaseModel):
    session_id: str
    name: str


class ChunkAccepted(BaseModel):
    session_id: str
    bytes_received: int


class _SessionState:
    def __init__(self, name: str):
        self.name = name
        self.stream = StreamSession()
        self.response: AnonymizeResponse | None = None
        self.lock = threading.Lock()


class _Registry:
    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, _SessionState] = {}

    def create(self, name: str) -> str:
        sid = uuid.uuid4().hex
        with self._lock:
            self._sessions[sid] = _SessionState(name)
        return sid

    def get(self, sid: str) -> _SessionState:
        with self._lock:
            state = self._sessions.get(sid)
        if state is None:
            raise HTTPException(status_code=404, detail=f"no session {sid!r}")
        return state

    def drop(self, sid: str) -> None:
        with self._lock:
            if self._sessions.pop(sid, None) is None:
                raise HTTPException(status_code=404, detail=f"no session {sid!r}")


def create_app() -> FastAPI:
    app = FastAPI(title="wsi-anon", version=__version__)
    registry = _Registry()

    @app.exception_handler(WsiAnonError)
    async def _domain_error(request: Request, exc: WsiAnonError):
        return JSONResponse(
            status_code=_status_of(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/formats")
    def formats() -> list[dict]:
        return describe_formats()

    @app.post("/detect", response_model=DetectResponse)
    def detect(req: SlidePayload) -> DetectResponse:
        det = sniff_store(MemoryStore(req.content()), name=req.name)
        return DetectResponse(vendor=det.vendor.slug, cue=det.cue)

    def _anonymize(data: bytes, name: str, config: AnonymizationConfig) -> AnonymizeResponse:
        out, report = anonymize_bytes(data, name=name, config=config)
        return AnonymizeResponse(
            report=ReportModel(**report.to_dict()),
            content_b64=base64.b64encode(out).decode("ascii"),
        )

    @app.post("/anonymize", response_model=AnonymizeResponse)
    def anonymize(req: AnonymizeRequest) -> AnonymizeResponse:
        return _anonymize(req.content(), req.name, req.config())

    @app.post("/audit", response_model=AuditResponse)
    def audit(req: AuditRequest) -> AuditResponse:
        store = MemoryStore(req.content())
        det = sniff_store(store, name=req.name)
        if det.vendor != VendorFormat.UNKNOWN and profile(det.vendor).multi_file_container:
            raise UnsupportedFormat(
                f"{det.vendor.slug} slides span multiple files and cannot be audited from one upload"
            )
        handler = handler_for(det.vendor)
        needles = req.sentinels.needles() if req.sentinels else None
        outcome = _audit_store(handler, store, req.name, needles)
        return AuditResponse(**outcome.to_dict())

    @app.post("/sessions", response_model=SessionCreated)
    def create_session(name: str = "upload") -> SessionCreated:
        return SessionCreated(session_id=registry.create(name), name=name)

    @app.post("/sessions/{sid}/chunks", response_model=ChunkAccepted)
    async def append_chunk(sid: str, request: Request) -> ChunkAccepted:
        state = registry.get(sid)
        chunk = await request.body()
        with state.lock:
            state.stream.feed(chunk)
            total = state.stream.bytes_received
        return ChunkAccepted(session_id=sid, bytes_received=total)

    @app.post("/sessions/{sid}/finalize", response_model=AnonymizeResponse)
    def finalize(sid: str, req: AnonymizeOptions | None = None) -> AnonymizeResponse:
        state = registry.get(sid)
        config = req.config() if req else AnonymizationConfig()
        with state.lock:
            out, report = state.stream.finalize(name=state.name, config=config)
            state.response = AnonymizeResponse(
                report=ReportModel(**report.to_dict()),
                content_b64=base64.b64encode(out).decode("ascii"),
            )
            return state.response

    @app.get("/sessions/{sid}/report", response_model=ReportModel)
    def session_report(sid: str) -> ReportModel:
        state = registry.get(sid)
        with state.lock:
            if state.response is None:
                raise HTTPException(status_code=409, detail=f"session {sid!r} not finalized")
            return state.response.report

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str) -> dict:
        registry.drop(sid)
        return {"deleted": sid}

    return app


app = create_app()
