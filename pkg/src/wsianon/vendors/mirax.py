"""Handler for Mirax slide containers.

A slide here is a small stub file plus a sibling directory holding
the real payload:

    name.mrxs
    name/
        Slidedat.ini    describes layers and data files
        Index.dat       u32 record count, then fixed 52-byte records:
                        32-byte NUL-padded layer name, u32 data file
                        index, u64 payload offset, u64 payload length
                        (all little-endian)
        Data_NNNN.dat   payload blobs the records point into

Layer roles come from the declared layer names: a name containing
"barcode" or "label" is the label photograph, one containing
"thumbnail", "preview" or "macro" is the overview. Destruction zeroes
the payload spans and retires the index records (a record whose name
field is all NUL is ignored by readers), then drops the layer
declaration. The descriptor is the one artifact whose length may
change, so it is rewritten atomically and last: if the run dies
midway the container still opens and the payloads are already gone.
"""

from __future__ import annotations

import codecs
import configparser
import os
import struct
import tempfile
from dataclasses import dataclass, field

from ..byteio import FileStore
from ..detect import VendorFormat, profile
from ..errors import CorruptContainer, IoFailure
from ..tiff import PatchPlan
from .base import (
    Attribute,
    AuditView,
    KIND_LABEL,
    KIND_MACRO,
    KIND_TISSUE,
    LABEL_KINDS,
    PlanOptions,
    ScanResult,
    ScannedImage,
    VendorHandler,
    find_key_values,
    select_targets,
)

SLIDEDAT = "Slidedat.ini"
RECORD_SIZE = 52
NAME_FIELD = 32

GENERAL = "GENERAL"
HIERARCHICAL = "HIERARCHICAL"
DATAFILE = "DATAFILE"


def layer_kind(name: str) -> str:
    low = name.lower()
    if "barcode" in low or "label" in low:
        return KIND_LABEL
    if "thumbnail" in low or "preview" in low or "macro" in low:
        return KIND_MACRO
    return KIND_TISSUE


@dataclass
class IndexRecord:
    layer_name: str
    file_index: int
    offset: int
    length: int
    record_offset: int  # where the record itself sits inside the index file


@dataclass
class MiraxSlide:
    stub_path: str
    dir_path: str
    bom: bool
    sections: list[tuple[str, list[tuple[str, str]]]]
    layer_names: list[str]
    index_file: str  # member name relative to dir_path, as declared
    data_files: list[str]  # likewise
    records: list[IndexRecord]
    data_sizes: list[int]
    slidedat_raw: bytes = b""
    warnings: list[str] = field(default_factory=list)

    @property
    def name(self) -> str:
        return os.path.basename(self.stub_path)

    def index_path(self) -> str:
        return os.path.join(self.dir_path, self.index_file)

    def data_path(self, file_index: int) -> str:
        return os.path.join(self.dir_path, self.data_files[file_index])

    def section(self, name: str) -> list[tuple[str, str]]:
        for sec, pairs in self.sections:
            if sec == name:
                return pairs
        return []


@dataclass
class MiraxWork:
    file_plans: dict[str, PatchPlan]
    new_slidedat: bytes
    descriptor_changed: bool = False


def render_slidedat(sections: list[tuple[str, list[tuple[str, str]]]], bom: bool) -> bytes:
    """Canonical descriptor serialization.

    One fixed spelling keeps repeated rewrites byte-stable: re-running
    the renderer over its own output changes nothing.
    """
    lines = []
    for name, pairs in sections:
        lines.append(f"[{name}]")
        for k, v in pairs:
            lines.append(f"{k}={v}")
    data = ("\r\n".join(lines) + "\r\n").encode("utf-8")
    return codecs.BOM_UTF8 + data if bom else data


def _read_file(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise CorruptContainer(f"cannot read container member {path!r}: {exc}") from exc


def _safe_member(name: str) -> str:
    if not name or os.path.basename(name) != name or name in (".", ".."):
        raise CorruptContainer(f"descriptor names an invalid container member {name!r}")
    return name


class MiraxHandler(VendorHandler):
    vendor = VendorFormat.MIRAX

    def open_path(self, stub_path: str) -> MiraxSlide:
        stub_path = os.fspath(stub_path)
        if not os.path.isfile(stub_path):
            raise CorruptContainer(f"slide stub {stub_path!r} does not exist")
        dir_path = os.path.splitext(stub_path)[0]
        if not os.path.isdir(dir_path):
            raise CorruptContainer(f"sibling directory {dir_path!r} is missing")
        dat_path = os.path.join(dir_path, SLIDEDAT)
        if not os.path.isfile(dat_path):
            raise CorruptContainer(f"{SLIDEDAT} is missing from {dir_path!r}")

        raw = _read_file(dat_path)
        bom = raw.startswith(codecs.BOM_UTF8)
        try:
            text = raw.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise CorruptContainer(f"{SLIDEDAT} is not UTF-8: {exc}") from exc
        cp = configparser.RawConfigParser(delimiters=("=",), strict=True)
        cp.optionxform = str  # key case is significant
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise CorruptContainer(f"{SLIDEDAT} does not parse: {exc}") from exc

        sections = [(sec, list(cp.items(sec))) for sec in cp.sections()]
        for required in (GENERAL, HIERARCHICAL, DATAFILE):
            if not cp.has_section(required):
                raise CorruptContainer(f"{SLIDEDAT} lacks the {required} section")

        def need(section: str, key: str) -> str:
            if not cp.has_option(section, key):
                raise CorruptContainer(f"{SLIDEDAT} lacks {section}/{key}")
            return cp.get(section, key)

        def need_int(section: str, key: str) -> int:
            v = need(section, key)
            try:
                return int(v)
            except ValueError as exc:
                raise CorruptContainer(f"{SLIDEDAT} {section}/{key} is not a number: {v!r}") from exc

        layer_count = need_int(HIERARCHICAL, "LAYER_COUNT")
        layer_names = [need(HIERARCHICAL, f"LAYER_{i}_NAME") for i in range(layer_count)]
        index_file = _safe_member(need(HIERARCHICAL, "INDEXFILE"))
        record_count = need_int(HIERARCHICAL, "INDEX_RECORD_COUNT")
        file_count = need_int(DATAFILE, "FILE_COUNT")
        data_files = [_safe_member(need(DATAFILE, f"FILE_{i}")) for i in range(file_count)]

        data_sizes = []
        for rel in data_files:
            p = os.path.join(dir_path, rel)
            if not os.path.isfile(p):
                raise CorruptContainer(f"data file {rel!r} is missing from {dir_path!r}")
            data_sizes.append(os.path.getsize(p))

        index_path = os.path.join(dir_path, index_file)
        if not os.path.isfile(index_path):
            raise CorruptContainer(f"index file {index_file!r} is missing from {dir_path!r}")
        index_raw = _read_file(index_path)
        if len(index_raw) < 4:
            raise CorruptContainer("index file shorter than its record count field")
        (count,) = struct.unpack("<I", index_raw[:4])
        if count != record_count:
            raise CorruptContainer(
                f"descriptor declares {record_count} index records but index holds {count}"
            )
        if len(index_raw) != 4 + RECORD_SIZE * count:
            raise CorruptContainer(
                f"index file length {len(index_raw)} does not fit {count} records"
            )

        warnings: list[str] = []
        records: list[IndexRecord] = []
        for i in range(count):
            rec_off = 4 + RECORD_SIZE * i
            chunk = index_raw[rec_off : rec_off + RECORD_SIZE]
            name_raw = chunk[:NAME_FIELD].rstrip(b"\0")
            if b"\0" in name_raw:
                raise CorruptContainer(f"index record {i} has an embedded NUL in its name")
            if not name_raw:
                continue  # retired record
            try:
                name = name_raw.decode("ascii")
            except UnicodeDecodeError as exc:
                raise CorruptContainer(f"index record {i} name is not ASCII") from exc
            fidx, off, length = struct.unpack("<IQQ", chunk[NAME_FIELD:])
            if fidx >= len(data_files):
                raise CorruptContainer(f"index record {i} points at data file {fidx} of {len(data_files)}")
            if off + length > data_sizes[fidx]:
                raise CorruptContainer(
                    f"index record {i} span [{off},{off + length}) exceeds "
                    f"{data_files[fidx]!r} length {data_sizes[fidx]}"
                )
            if length == 0:
                warnings.append(f"index record {i} ({name!r}) has an empty payload")
            records.append(IndexRecord(name, fidx, off, length, rec_off))

        by_name: dict[str, int] = {}
        for r in records:
            by_name[r.layer_name] = by_name.get(r.layer_name, 0) + 1
        for name in layer_names:
            if by_name.get(name, 0) == 0:
                raise CorruptContainer(f"declared layer {name!r} has no index records")
        for name in by_name:
            if name not in layer_names:
                warnings.append(f"index holds records for undeclared layer {name!r}")

        return MiraxSlide(
            stub_path=stub_path,
            dir_path=dir_path,
            bom=bom,
            sections=sections,
            layer_names=layer_names,
            index_file=index_file,
            data_files=data_files,
            records=records,
            data_sizes=data_sizes,
            slidedat_raw=raw,
            warnings=warnings,
        )

    def scan(self, slide: MiraxSlide) -> ScanResult:
        images = [
            ScannedImage(kind=layer_kind(name), index=i, note=name)
            for i, name in enumerate(slide.layer_names)
        ]
        prof = profile(self.vendor)
        raw = _read_file(os.path.join(slide.dir_path, SLIDEDAT))
        attrs = []
        for key, category in prof.sensitive_keys.items():
            for off, length in find_key_values(raw, key):
                attrs.append(
                    Attribute(
                        key=key,
                        category=category,
                        offset=off,
                        length=length,
                        value=raw[off : off + length],
                        store_key=SLIDEDAT,
                    )
                )
        return ScanResult(
            vendor=self.vendor,
            images=images,
            attributes=attrs,
            warnings=list(slide.warnings),
        )

    def plan(self, slide: MiraxSlide, scan: ScanResult, opts: PlanOptions) -> MiraxWork:
        destroyed, _ = select_targets(scan, opts, self.vendor.slug)
        doomed = {img.note for img in destroyed}

        spans_per_file: dict[int, list[tuple[int, int]]] = {}
        index_plan = PatchPlan()
        for rec in slide.records:
            if rec.layer_name not in doomed:
                continue
            if rec.length:
                spans_per_file.setdefault(rec.file_index, []).append((rec.offset, rec.length))
            if not opts.overwrite_only:
                index_plan.add(rec.record_offset, b"\0" * RECORD_SIZE, note=f"retire {rec.layer_name}")

        file_plans: dict[str, PatchPlan] = {}
        for fidx, spans in spans_per_file.items():
            plan = PatchPlan()
            merged: list[list[int]] = []
            for o, n in sorted(spans):
                if merged and o <= merged[-1][1]:
                    merged[-1][1] = max(merged[-1][1], o + n)
                else:
                    merged.append([o, o + n])
            for start, end in merged:
                plan.add(start, b"\0" * (end - start), note=f"zero [{start},{end})")
            file_plans[slide.data_files[fidx]] = plan
        if index_plan.patches:
            file_plans[slide.index_file] = index_plan

        new_sections = []
        for sec, pairs in slide.sections:
            if sec == GENERAL:
                prof = profile(self.vendor)
                out = []
                for k, v in pairs:
                    if k in prof.sensitive_keys and v:
                        out.append((k, "X" * len(v)))
                    else:
                        out.append((k, v))
                new_sections.append((sec, out))
            elif sec == HIERARCHICAL and not opts.overwrite_only:
                survivors = [n for n in slide.layer_names if n not in doomed]
                out = [("LAYER_COUNT", str(len(survivors)))]
                out += [(f"LAYER_{i}_NAME", n) for i, n in enumerate(survivors)]
                for k, v in pairs:
                    if k == "LAYER_COUNT" or (k.startswith("LAYER_") and k.endswith("_NAME")):
                        continue
                    out.append((k, v))
                new_sections.append((sec, out))
            else:
                new_sections.append((sec, pairs))
        new_slidedat = render_slidedat(new_sections, slide.bom)
        return MiraxWork(
            file_plans=file_plans,
            new_slidedat=new_slidedat,
            descriptor_changed=new_slidedat != slide.slidedat_raw,
        )

    def apply(self, slide: MiraxSlide, work: MiraxWork) -> int:
        applied = 0
        for rel, plan in sorted(work.file_plans.items()):
            with FileStore(os.path.join(slide.dir_path, rel), writable=True) as store:
                applied += plan.apply(store)
        # descriptor last: a crash before this point leaves a container
        # that still opens and whose payloads are already destroyed
        dat_path = os.path.join(slide.dir_path, SLIDEDAT)
        if work.new_slidedat != _read_file(dat_path):
            fd, tmp = tempfile.mkstemp(dir=slide.dir_path, prefix=".slidedat-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(work.new_slidedat)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, dat_path)
            except OSError as exc:
                try:
                    os.unlink(tmp)
                except OSError:
                    pass
                raise IoFailure(f"descriptor rewrite failed: {exc}") from exc
            applied += 1
        return applied

    def audit(self, slide: MiraxSlide, scan: ScanResult) -> AuditView:
        labels = {img.note for img in scan.images if img.kind in LABEL_KINDS}
        blank = True
        for rec in slide.records:
            if rec.layer_name in labels and rec.length:
                with FileStore(slide.data_path(rec.file_index)) as st:
                    if any(st.read_exact(rec.offset, rec.length)):
                        blank = False
        return AuditView(
            label_unreferenced=not labels,
            label_payload_blank=blank,
            attributes=scan.attributes,
        )

    def slide_files(self, slide: MiraxSlide) -> list[str]:
        """Every file that makes up the slide, stub first."""
        members = [SLIDEDAT, slide.index_file] + list(slide.data_files)
        return [slide.stub_path] + [os.path.join(slide.dir_path, m) for m in members]
