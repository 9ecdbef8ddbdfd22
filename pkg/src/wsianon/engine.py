"""Run orchestration: detect, rename, back up, plan, apply, audit.

The pipeline validates and plans against a read-only view before any
filesystem effect, so a slide that would be refused (unknown format,
corrupt structure, unsatisfiable replacement) is refused with zero
bytes written. Only then are rename and backup performed, the plan
re-derived against the writable store, and the patches applied.

Auditing is a separate, independent inspection: it re-opens whatever
is on disk and grades it on a cumulative ladder. Each level includes
all checks below it, so the achieved level is the highest prefix of
passing checks:

    level 1   the file name carries no planted identifier
    level 2   no reachable reference to a label image remains
    level 3   label pixel payloads are actually destroyed
    level 4   cataloged metadata attributes are blank

Level 0 means even the name gives the subject away; level 5 (a fully
re-encoded clean copy) is defined for completeness but in-place
editing never produces it.
"""

from __future__ import annotations

import os
import secrets
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass
from enum import IntEnum

from .byteio import ByteSink, FileStore, MemoryStore
from .detect import Detection, VendorFormat, profile, sniff_path, sniff_store
from .errors import IoFailure, UnsupportedFormat
from .vendors import handler_for
from .vendors.base import PlanOptions, ScanResult, select_targets
from .vendors.mirax import MiraxHandler, MiraxWork


class PolicyLevel(IntEnum):
    L0_IDENTIFIABLE = 0
    L1_FILENAME_CLEAN = 1
    L2_DEREFERENCED = 2
    L3_LABEL_DESTROYED = 3
    L4_METADATA_CLEAN = 4
    L5_TRANSCODED = 5  # needs a re-encoded copy; in-place edits cannot reach it


CHECK_ORDER = (
    "filename_clean",
    "label_unreferenced",
    "label_destroyed",
    "attributes_blank",
)


def level_from_checks(checks: dict[str, bool]) -> PolicyLevel:
    level = 0
    for name in CHECK_ORDER:
        if not checks.get(name, False):
            break
        level += 1
    return PolicyLevel(level)


@dataclass(frozen=True)
class AnonymizationConfig:
    keep_macro: bool = False
    overwrite_only: bool = False
    backup_dir: str | None = None
    rename: bool = True
    new_base_name: str | None = None
    dry_run: bool = False

    def plan_options(self) -> PlanOptions:
        return PlanOptions(keep_macro=self.keep_macro, overwrite_only=self.overwrite_only)


@dataclass
class AuditOutcome:
    level: int
    level_name: str
    checks: dict[str, bool]
    attributes: list[dict]
    sentinel_hits: list[dict]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Report:
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
    audit: AuditOutcome | None
    elapsed_seconds: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["audit"] = self.audit.to_dict() if self.audit else None
        return d


def _random_base() -> str:
    return "anon_" + secrets.token_hex(8)


def _check_base_name(base: str) -> str:
    if not base or base != os.path.basename(base) or base in (".", ".."):
        raise ValueError(f"invalid replacement base name {base!r}")
    return base


def open_slide(path: str, writable: bool = False):
    """Detect and open a slide; returns (handler, slide).

    Single-file slides hold an open FileStore in slide.store; the
    caller is responsible for close_slide().
    """
    path = os.fspath(path)
    det = sniff_path(path)
    if det.vendor == VendorFormat.UNKNOWN:
        raise UnsupportedFormat(f"{path!r}: {det.cue}")
    handler = handler_for(det.vendor)
    if isinstance(handler, MiraxHandler):
        return handler, handler.open_path(path)
    store = FileStore(path, writable=writable)
    try:
        slide = handler.open_store(store, name=os.path.basename(path))
    except Exception:
        store.close()
        raise
    return handler, slide


def close_slide(slide) -> None:
    store = getattr(slide, "store", None)
    if isinstance(store, FileStore):
        store.close()


def _work_stats(work) -> tuple[int, bool]:
    if isinstance(work, MiraxWork):
        for plan in work.file_plans.values():
            plan.assert_no_overlap()
        n = sum(len(p.patches) for p in work.file_plans.values())
        # the descriptor rewrite counts as one unit of applied work
        return n + (1 if work.descriptor_changed else 0), work.descriptor_changed
    work.assert_no_overlap()
    return len(work.patches), False


def _image_dicts(images) -> list[dict]:
    return [
        {"kind": i.kind, "index": i.index, "width": i.width, "height": i.height, "note": i.note}
        for i in images
    ]


def _attribute_dicts(scan: ScanResult) -> list[dict]:
    return [
        {"key": a.key, "category": a.category, "length": a.length, "store": a.store_key}
        for a in scan.attributes
    ]


def _scan_bytes_for_needles(data: bytes, needles: dict[str, bytes], path: str) -> list[dict]:
    hits = []
    for role, needle in needles.items():
        if not needle:
            continue
        start = 0
        while True:
            idx = data.find(needle, start)
            if idx < 0:
                break
            hits.append({"role": role, "path": path, "offset": idx})
            start = idx + 1
    return hits


def _scan_file_for_needles(path: str, needles: dict[str, bytes]) -> list[dict]:
    if not needles:
        return []
    overlap = max(len(n) for n in needles.values()) - 1
    hits: list[tuple[str, int]] = []
    with open(path, "rb") as fh:
        pos = 0
        tail = b""
        while True:
            chunk = fh.read(1 << 20)
            if not chunk:
                break
            buf = tail + chunk
            base = pos - len(tail)
            for role, needle in needles.items():
                if not needle:
                    continue
                start = 0
                while True:
                    idx = buf.find(needle, start)
                    if idx < 0:
                        break
                    hits.append((role, base + idx))
                    start = idx + 1
            tail = buf[-overlap:] if overlap > 0 else b""
            pos += len(chunk)
    return [
        {"role": role, "path": path, "offset": off}
        for role, off in sorted(set(hits), key=lambda h: (h[1], h[0]))
    ]


def _sentinel_checks(
    name: str,
    content_hits: list[dict],
    needles: dict[str, bytes] | None,
) -> tuple[bool, bool, bool, list[dict]]:
    """(filename_clean, pattern_absent, text_absent, all_hits)."""
    if not needles:
        return True, True, True, []
    hits = list(content_hits)
    base = os.path.basename(name).encode("utf-8", errors="replace")
    for role, needle in needles.items():
        if needle and needle in base:
            hits.append({"role": role, "path": name, "offset": -1})
    filename_clean = not any(h["offset"] == -1 for h in hits)
    pattern_absent = not any(h["role"] == "pixel_pattern" and h["offset"] >= 0 for h in hits)
    text_absent = not any(h["role"] != "pixel_pattern" and h["offset"] >= 0 for h in hits)
    return filename_clean, pattern_absent, text_absent, hits


def _outcome(handler, slide, name: str, content_hits: list[dict], needles) -> AuditOutcome:
    scan = handler.scan(slide)
    view = handler.audit(slide, scan)
    c1, pattern_absent, text_absent, hits = _sentinel_checks(name, content_hits, needles)
    checks = {
        "filename_clean": c1,
        "label_unreferenced": view.label_unreferenced,
        "label_destroyed": view.label_payload_blank and pattern_absent,
        "attributes_blank": all(a.blank for a in view.attributes) and text_absent,
    }
    level = level_from_checks(checks)
    return AuditOutcome(
        level=int(level),
        level_name=level.name,
        checks=checks,
        attributes=[
            {"key": a.key, "category": a.category, "blank": bool(a.blank), "store": a.store_key}
            for a in view.attributes
        ],
        sentinel_hits=hits,
    )


def audit_path(path: str, sentinels: dict[str, bytes] | None = None) -> AuditOutcome:
    """Grade whatever is on disk, without modifying anything."""
    handler, slide = open_slide(path, writable=False)
    try:
        content_hits: list[dict] = []
        if sentinels:
            if isinstance(handler, MiraxHandler):
                files = handler.slide_files(slide)
            else:
                files = [os.fspath(path)]
            for f in files:
                content_hits.extend(_scan_file_for_needles(f, sentinels))
        return _outcome(handler, slide, os.fspath(path), content_hits, sentinels)
    finally:
        close_slide(slide)


def _audit_store(handler, store: ByteSink, name: str, sentinels) -> AuditOutcome:
    slide = handler.open_store(store, name=name)
    content_hits = (
        _scan_bytes_for_needles(store.getvalue(), sentinels, name)
        if sentinels and isinstance(store, MemoryStore)
        else []
    )
    return _outcome(handler, slide, name, content_hits, sentinels)


def _rename_slide(path: str, new_base: str, multi: bool) -> str:
    src_dir, src_name = os.path.split(path)
    ext = os.path.splitext(src_name)[1]
    target = os.path.join(src_dir, new_base + ext)
    if target == path:
        return path
    if os.path.exists(target):
        raise IoFailure(f"rename target {target!r} already exists")
    if multi:
        container = os.path.splitext(path)[0]
        target_container = os.path.join(src_dir, new_base)
        if os.path.exists(target_container):
            raise IoFailure(f"rename target {target_container!r} already exists")
        os.rename(container, target_container)
        try:
            os.rename(path, target)
        except OSError:
            os.rename(target_container, container)  # undo; keep the pair consistent
            raise
    else:
        os.rename(path, target)
    return target


def _backup_slide(path: str, backup_dir: str, multi: bool) -> str:
    os.makedirs(backup_dir, exist_ok=True)
    dest = os.path.join(backup_dir, os.path.basename(path))
    if os.path.exists(dest):
        raise IoFailure(f"backup target {dest!r} already exists")
    shutil.copy2(path, dest)
    if multi:
        container = os.path.splitext(path)[0]
        dest_container = os.path.join(backup_dir, os.path.basename(container))
        if os.path.exists(dest_container):
            raise IoFailure(f"backup target {dest_container!r} already exists")
        shutil.copytree(container, dest_container)
    return dest


def detect_path(path: str) -> Detection:
    return sniff_path(path)


def anonymize_path(path: str, config: AnonymizationConfig | None = None) -> Report:
    config = config or AnonymizationConfig()
    t0 = time.monotonic()
    path = os.fspath(path)
    det = sniff_path(path)
    if det.vendor == VendorFormat.UNKNOWN:
        raise UnsupportedFormat(f"{path!r}: {det.cue}")
    handler = handler_for(det.vendor)
    multi = profile(det.vendor).multi_file_container
    opts = config.plan_options()
    if config.new_base_name is not None:
        _check_base_name(config.new_base_name)

    # validate and plan against a read-only view first: any refusal
    # must happen before the filesystem is touched at all
    handler0, slide0 = open_slide(path, writable=False)
    try:
        scan0 = handler0.scan(slide0)
        destroyed0, kept0 = select_targets(scan0, opts, det.vendor.slug)
        work0 = handler0.plan(slide0, scan0, opts)
        planned, descriptor_change = _work_stats(work0)
    finally:
        close_slide(slide0)

    new_base = None
    if config.rename:
        new_base = config.new_base_name or _random_base()

    if config.dry_run:
        return _dry_run(path, det, handler, multi, config, opts, scan0,
                        destroyed0, kept0, planned, descriptor_change, new_base, t0)

    output = path
    if new_base is not None:
        output = _rename_slide(path, new_base, multi)
    backup = _backup_slide(output, config.backup_dir, multi) if config.backup_dir else None

    handler1, slide1 = open_slide(output, writable=True)
    try:
        scan1 = handler1.scan(slide1)
        work1 = handler1.plan(slide1, scan1, opts)
        _work_stats(work1)
        applied = handler1.apply(slide1, work1)
    finally:
        close_slide(slide1)

    outcome = audit_path(output)
    return Report(
        vendor=det.vendor.slug,
        detection_cue=det.cue,
        input_path=path,
        output_path=output,
        backup_path=backup,
        dry_run=False,
        patches_planned=planned,
        patches_applied=applied,
        descriptor_rewritten=descriptor_change,
        destroyed_images=_image_dicts(destroyed0),
        kept_images=_image_dicts(kept0),
        blanked_attributes=_attribute_dicts(scan0),
        warnings=list(scan0.warnings),
        audit=outcome,
        elapsed_seconds=time.monotonic() - t0,
    )


def _dry_run(path, det, handler, multi, config, opts, scan0,
             destroyed0, kept0, planned, descriptor_change, new_base, t0) -> Report:
    """Execute the full pipeline against a throwaway copy."""
    src_dir, src_name = os.path.split(path)
    ext = os.path.splitext(src_name)[1]
    would_be = os.path.join(src_dir, new_base + ext) if new_base else path

    if multi:
        with tempfile.TemporaryDirectory(prefix="wsianon-dry-") as tmp:
            stub_copy = os.path.join(tmp, src_name)
            shutil.copy2(path, stub_copy)
            shutil.copytree(os.path.splitext(path)[0], os.path.splitext(stub_copy)[0])
            handler1, slide1 = open_slide(stub_copy, writable=True)
            try:
                scan1 = handler1.scan(slide1)
                work1 = handler1.plan(slide1, scan1, opts)
                handler1.apply(slide1, work1)
            finally:
                close_slide(slide1)
            outcome = audit_path(stub_copy)
    else:
        with open(path, "rb") as fh:
            store = MemoryStore(fh.read())
        slide1 = handler.open_store(store, name=src_name)
        scan1 = handler.scan(slide1)
        work1 = handler.plan(slide1, scan1, opts)
        handler.apply(slide1, work1)
        outcome = _audit_store(handler, store, os.path.basename(would_be), None)

    return Report(
        vendor=det.vendor.slug,
        detection_cue=det.cue,
        input_path=path,
        output_path=would_be,
        backup_path=None,
        dry_run=True,
        patches_planned=planned,
        patches_applied=0,
        descriptor_rewritten=descriptor_change,
        destroyed_images=_image_dicts(destroyed0),
        kept_images=_image_dicts(kept0),
        blanked_attributes=_attribute_dicts(scan0),
        warnings=list(scan0.warnings),
        audit=outcome,
        elapsed_seconds=time.monotonic() - t0,
    )


def anonymize_bytes(
    data: bytes, name: str = "stream", config: AnonymizationConfig | None = None
) -> tuple[bytes, Report]:
    """Anonymize a slide held in memory; returns (new bytes, report).

    Containers spread over sibling files cannot arrive as one byte
    run and are rejected. Rename and backup do not apply here; when
    renaming is enabled the report carries the suggested new name.
    """
    config = config or AnonymizationConfig()
    t0 = time.monotonic()
    store = MemoryStore(data)
    det = sniff_store(store, name=name)
    if det.vendor == VendorFormat.UNKNOWN:
        raise UnsupportedFormat(f"{name!r}: {det.cue}")
    prof = profile(det.vendor)
    if prof.multi_file_container:
        raise UnsupportedFormat(
            f"{det.vendor.slug} slides span multiple files and cannot be processed as one stream"
        )
    handler = handler_for(det.vendor)
    opts = config.plan_options()

    out_name = name
    if config.rename:
        base = config.new_base_name or _random_base()
        _check_base_name(base)
        out_name = base + os.path.splitext(name)[1]

    slide = handler.open_store(store, name=name)
    scan = handler.scan(slide)
    destroyed, kept = select_targets(scan, opts, det.vendor.slug)
    work = handler.plan(slide, scan, opts)
    planned, _ = _work_stats(work)
    if config.dry_run:
        shadow = MemoryStore(data)
        sslide = handler.open_store(shadow, name=name)
        handler.apply(sslide, handler.plan(sslide, handler.scan(sslide), opts))
        outcome = _audit_store(handler, shadow, out_name, None)
        applied = 0
        result = data
    else:
        applied = handler.apply(slide, work)
        outcome = _audit_store(handler, store, out_name, None)
        result = store.getvalue()

    report = Report(
        vendor=det.vendor.slug,
        detection_cue=det.cue,
        input_path=name,
        output_path=out_name,
        backup_path=None,
        dry_run=config.dry_run,
        patches_planned=planned,
        patches_applied=applied,
        descriptor_rewritten=False,
        destroyed_images=_image_dicts(destroyed),
        kept_images=_image_dicts(kept),
        blanked_attributes=_attribute_dicts(scan),
        warnings=list(scan.warnings),
        audit=outcome,
        elapsed_seconds=time.monotonic() - t0,
    )
    return result, report
