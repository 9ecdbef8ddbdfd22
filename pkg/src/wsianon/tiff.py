"""Structure-level access to TIFF and BigTIFF files.

The parser here is deliberately shallow: it walks the directory chain,
records where every entry and link field sits in the file, and decodes
only the values needed for anonymization. Nothing is ever relocated.
All edits are expressed as same-length overwrite patches so a planned
change can be validated in full before the first byte is written.

Layout facts this module relies on:

  classic header   "II"/"MM" + magic 42 + u32 offset of first IFD
  bigtiff header   "II"/"MM" + magic 43 + u16 8 + u16 0 + u64 offset
  classic IFD      u16 entry count, 12-byte entries, u32 next offset
  bigtiff IFD      u64 entry count, 20-byte entries, u64 next offset
  classic entry    u16 tag, u16 type, u32 count, 4-byte value/offset
  bigtiff entry    u16 tag, u16 type, u64 count, 8-byte value/offset

A value field holds the data inline when it fits (4 bytes classic,
8 bytes bigtiff), otherwise it holds the offset of the data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .byteio import ByteSink, ByteSource
from .errors import CorruptStructure, OutOfBounds, PlanConflict, IoFailure, TagAbsent, UnsupportedFormat

CLASSIC_MAGIC = 42
BIGTIFF_MAGIC = 43

# Entry counts beyond this are treated as corruption rather than parsed.
MAX_DIRECTORIES = 65536
MAX_ENTRIES = 1 << 20

TAG_NEW_SUBFILE_TYPE = 254
TAG_IMAGE_WIDTH = 256
TAG_IMAGE_LENGTH = 257
TAG_BITS_PER_SAMPLE = 258
TAG_COMPRESSION = 259
TAG_PHOTOMETRIC = 262
TAG_IMAGE_DESCRIPTION = 270
TAG_MAKE = 271
TAG_MODEL = 272
TAG_STRIP_OFFSETS = 273
TAG_SAMPLES_PER_PIXEL = 277
TAG_ROWS_PER_STRIP = 278
TAG_STRIP_BYTE_COUNTS = 279
TAG_SOFTWARE = 305
TAG_DATE_TIME = 306
TAG_ARTIST = 315
TAG_HOST_COMPUTER = 316
TAG_TILE_WIDTH = 322
TAG_TILE_LENGTH = 323
TAG_TILE_OFFSETS = 324
TAG_TILE_BYTE_COUNTS = 325
TAG_XMP = 700

TYPE_SIZES = {
    1: 1,   # BYTE
    2: 1,   # ASCII
    3: 2,   # SHORT
    4: 4,   # LONG
    5: 8,   # RATIONAL
    6: 1,   # SBYTE
    7: 1,   # UNDEFINED
    8: 2,   # SSHORT
    9: 4,   # SLONG
    10: 8,  # SRATIONAL
    11: 4,  # FLOAT
    12: 8,  # DOUBLE
    13: 4,  # IFD
    16: 8,  # LONG8
    17: 8,  # SLONG8
    18: 8,  # IFD8
}

_INT_FORMATS = {1: "B", 3: "H", 4: "I", 6: "b", 8: "h", 9: "i", 13: "I", 16: "Q", 17: "q", 18: "Q"}


@dataclass(frozen=True)
class TiffHeader:
    byte_order: str          # "<" or ">"
    big: bool
    first_ifd_offset: int
    file_length: int

    @property
    def offset_size(self) -> int:
        return 8 if self.big else 4

    @property
    def offset_format(self) -> str:
        return self.byte_order + ("Q" if self.big else "I")

    @property
    def first_link_offset(self) -> int:
        # where the header stores the offset of the first IFD
        return 8 if self.big else 4

    @property
    def entry_size(self) -> int:
        return 20 if self.big else 12


def parse_header(src: ByteSource) -> TiffHeader:
    """Decode the file header; raise UnsupportedFormat if it is not TIFF."""
    if src.length < 8:
        raise UnsupportedFormat("file shorter than a TIFF header")
    head = src.read_exact(0, 8)
    if head[:2] == b"II":
        bo = "<"
    elif head[:2] == b"MM":
        bo = ">"
    else:
        raise UnsupportedFormat("no TIFF byte-order mark")
    (magic,) = struct.unpack(bo + "H", head[2:4])
    if magic == CLASSIC_MAGIC:
        (first,) = struct.unpack(bo + "I", head[4:8])
    elif magic == BIGTIFF_MAGIC:
        if src.length < 16:
            raise CorruptStructure("bigtiff header truncated")
        tail = src.read_exact(4, 12)
        offsize, reserved = struct.unpack(bo + "HH", tail[:4])
        if offsize != 8 or reserved != 0:
            raise CorruptStructure(
                f"bigtiff header fields invalid: offset size {offsize}, reserved {reserved}"
            )
        (first,) = struct.unpack(bo + "Q", tail[4:12])
    else:
        raise UnsupportedFormat(f"unknown TIFF magic {magic}")
    big = magic == BIGTIFF_MAGIC
    if first >= src.length or first < (16 if big else 8):
        raise CorruptStructure(f"first directory offset {first} outside file")
    return TiffHeader(byte_order=bo, big=big, first_ifd_offset=first, file_length=src.length)


@dataclass
class TagEntry:
    tag: int
    type: int
    count: int
    entry_offset: int
    value_field: bytes      # raw inline value/offset field, 4 or 8 bytes

    def total_size(self) -> int:
        return TYPE_SIZES.get(self.type, 1) * self.count

    def value_field_offset(self, header: TiffHeader) -> int:
        return self.entry_offset + (12 if header.big else 8)

    def is_inline(self, header: TiffHeader) -> bool:
        return self.total_size() <= header.offset_size

    def data_offset(self, header: TiffHeader) -> int:
        (off,) = struct.unpack(header.offset_format, self.value_field)
        return off

    def value_region(self, header: TiffHeader) -> tuple[int, int]:
        """Absolute (offset, size) of this entry's value bytes."""
        size = self.total_size()
        if self.is_inline(header):
            return self.value_field_offset(header), size
        return self.data_offset(header), size

    def value_bytes(self, src: ByteSource, header: TiffHeader) -> bytes:
        off, size = self.value_region(header)
        try:
            return src.read_exact(off, size)
        except OutOfBounds as exc:
            raise CorruptStructure(f"tag {self.tag} value outside file: {exc}") from exc

    def int_values(self, src: ByteSource, header: TiffHeader) -> list[int]:
        fmt = _INT_FORMATS.get(self.type)
        if fmt is None:
            raise CorruptStructure(f"tag {self.tag} has non-integer type {self.type}")
        raw = self.value_bytes(src, header)
        return list(struct.unpack(f"{header.byte_order}{self.count}{fmt}", raw))

    def ascii_value(self, src: ByteSource, header: TiffHeader) -> str:
        raw = self.value_bytes(src, header)
        return raw.split(b"\0", 1)[0].decode("ascii", errors="replace")


@dataclass
class Directory:
    offset: int
    entries: list[TagEntry]
    next_offset: int
    next_field_offset: int   # where this directory stores its next pointer
    link_field_offset: int   # where the pointer to this directory is stored

    def find(self, tag: int) -> TagEntry | None:
        for e in self.entries:
            if e.tag == tag:
                return e
        return None

    def require(self, tag: int) -> TagEntry:
        e = self.find(tag)
        if e is None:
            raise TagAbsent(f"tag {tag} absent from directory at {self.offset}")
        return e


def _parse_directory(src: ByteSource, header: TiffHeader, offset: int, link_from: int) -> Directory:
    bo = header.byte_order
    try:
        if header.big:
            (count,) = struct.unpack(bo + "Q", src.read_exact(offset, 8))
            entries_start = offset + 8
        else:
            (count,) = struct.unpack(bo + "H", src.read_exact(offset, 2))
            entries_start = offset + 2
        if count > MAX_ENTRIES:
            raise CorruptStructure(f"directory at {offset} claims {count} entries")
        entries = []
        pos = entries_start
        for _ in range(count):
            raw = src.read_exact(pos, header.entry_size)
            tag, typ = struct.unpack(bo + "HH", raw[:4])
            if header.big:
                (cnt,) = struct.unpack(bo + "Q", raw[4:12])
                value_field = raw[12:20]
            else:
                (cnt,) = struct.unpack(bo + "I", raw[4:8])
                value_field = raw[8:12]
            entries.append(TagEntry(tag=tag, type=typ, count=cnt, entry_offset=pos, value_field=value_field))
            pos += header.entry_size
        next_field = pos
        (nxt,) = struct.unpack(header.offset_format, src.read_exact(next_field, header.offset_size))
    except OutOfBounds as exc:
        raise CorruptStructure(f"directory at {offset} extends beyond end of file: {exc}") from exc
    return Directory(
        offset=offset,
        entries=entries,
        next_offset=nxt,
        next_field_offset=next_field,
        link_field_offset=link_from,
    )


def parse_chain(src: ByteSource, header: TiffHeader) -> tuple[list[Directory], list[str]]:
    """Walk the directory chain; return directories plus parse warnings."""
    dirs: list[Directory] = []
    warnings: list[str] = []
    seen: set[int] = set()
    offset = header.first_ifd_offset
    link_from = header.first_link_offset
    while offset != 0:
        if offset in seen:
            raise CorruptStructure(f"directory chain loops back to offset {offset}")
        if len(dirs) >= MAX_DIRECTORIES:
            raise CorruptStructure("directory chain exceeds directory cap")
        if offset >= src.length:
            raise CorruptStructure(f"directory offset {offset} outside file")
        seen.add(offset)
        d = _parse_directory(src, header, offset, link_from)
        if not d.entries:
            warnings.append(f"directory at {offset} has no entries")
        tags = [e.tag for e in d.entries]
        if tags != sorted(tags):
            warnings.append(f"directory at {offset} has unsorted tags")
        if len(set(tags)) != len(tags):
            warnings.append(f"directory at {offset} has duplicate tags")
        dirs.append(d)
        link_from = d.next_field_offset
        offset = d.next_offset
    return dirs, warnings


@dataclass(frozen=True)
class Patch:
    offset: int
    data: bytes
    note: str = ""

    @property
    def end(self) -> int:
        return self.offset + len(self.data)


@dataclass
class PatchPlan:
    patches: list[Patch] = field(default_factory=list)

    def add(self, offset: int, data: bytes, note: str = "") -> None:
        if data:
            self.patches.append(Patch(offset, bytes(data), note))

    def extend(self, other: "PatchPlan") -> None:
        self.patches.extend(other.patches)

    def total_bytes(self) -> int:
        return sum(len(p.data) for p in self.patches)

    def assert_no_overlap(self) -> None:
        ordered = sorted(self.patches, key=lambda p: p.offset)
        for a, b in zip(ordered, ordered[1:]):
            if a.end > b.offset:
                raise PlanConflict(
                    f"patch {a.note or a.offset} overlaps {b.note or b.offset} "
                    f"([{a.offset},{a.end}) vs [{b.offset},{b.end}))"
                )

    def apply(self, sink: ByteSink) -> int:
        """Write every patch; validate all spans before touching the sink."""
        self.assert_no_overlap()
        ordered = sorted(self.patches, key=lambda p: p.offset)
        for p in ordered:
            if p.offset < 0 or p.end > sink.length:
                raise OutOfBounds(
                    f"patch {p.note or ''} [{p.offset},{p.end}) exceeds store length {sink.length}"
                )
        for i, p in enumerate(ordered):
            try:
                sink.overwrite_exact(p.offset, p.data)
            except (OSError, IoFailure) as exc:
                raise IoFailure(f"apply stopped at patch {i} of {len(ordered)}: {exc}") from exc
        sink.flush()
        return len(ordered)


def _segments(src: ByteSource, header: TiffHeader, d: Directory, off_tag: int, cnt_tag: int) -> list[tuple[int, int]]:
    off_e = d.find(off_tag)
    cnt_e = d.find(cnt_tag)
    if off_e is None and cnt_e is None:
        return []
    if off_e is None or cnt_e is None:
        raise CorruptStructure(
            f"directory at {d.offset}: tags {off_tag}/{cnt_tag} must appear together"
        )
    offs = off_e.int_values(src, header)
    cnts = cnt_e.int_values(src, header)
    if len(offs) != len(cnts):
        raise CorruptStructure(
            f"directory at {d.offset}: {len(offs)} segment offsets but {len(cnts)} byte counts"
        )
    segs = []
    for o, n in zip(offs, cnts):
        if n == 0:
            continue
        if o + n > src.length:
            raise CorruptStructure(
                f"directory at {d.offset}: segment [{o},{o + n}) exceeds file length {src.length}"
            )
        segs.append((o, n))
    return segs


def image_segments(src: ByteSource, header: TiffHeader, d: Directory) -> list[tuple[int, int]]:
    """All pixel-payload spans of a directory, strip- or tile-organized."""
    segs = _segments(src, header, d, TAG_STRIP_OFFSETS, TAG_STRIP_BYTE_COUNTS)
    segs += _segments(src, header, d, TAG_TILE_OFFSETS, TAG_TILE_BYTE_COUNTS)
    if not segs:
        raise TagAbsent(f"directory at {d.offset} has no strip or tile layout")
    return segs


def plan_wipe_image(src: ByteSource, header: TiffHeader, d: Directory, note: str = "") -> PatchPlan:
    """Zero every pixel segment of one directory.

    Segments are coalesced first: sparse files may list the same span
    twice, and a zero-fill is idempotent over itself, so merging keeps
    the no-overlap invariant without changing the outcome.
    """
    spans = sorted(image_segments(src, header, d))
    merged: list[list[int]] = []
    for o, n in spans:
        if merged and o <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], o + n)
        else:
            merged.append([o, o + n])
    plan = PatchPlan()
    for start, end in merged:
        plan.add(start, b"\0" * (end - start), note=f"{note}zero [{start},{end})")
    return plan


def plan_unlink_ifds(src: ByteSource, header: TiffHeader, chain: list[Directory], remove: set[int]) -> PatchPlan:
    """Splice directories out of the chain by index.

    Only link fields owned by the header or by surviving directories
    are rewritten; removed directories keep their bytes and simply
    become unreachable.
    """
    for i in remove:
        if not 0 <= i < len(chain):
            raise PlanConflict(f"cannot unlink directory index {i} of {len(chain)}")
    survivors = [d for i, d in enumerate(chain) if i not in remove]
    # (field offset, current value, new value) for every surviving link slot
    slots: list[tuple[int, int, int]] = []
    first_new = survivors[0].offset if survivors else 0
    slots.append((header.first_link_offset, header.first_ifd_offset, first_new))
    for i, d in enumerate(survivors):
        new_next = survivors[i + 1].offset if i + 1 < len(survivors) else 0
        slots.append((d.next_field_offset, d.next_offset, new_next))
    plan = PatchPlan()
    for field_off, old, new in slots:
        if old != new:
            plan.add(field_off, struct.pack(header.offset_format, new), note=f"link@{field_off}->{new}")
    return plan


def plan_fill_span(offset: int, length: int, fill: bytes, note: str = "") -> PatchPlan:
    """Overwrite an absolute span with a repeated fill byte sequence."""
    if len(fill) != 1:
        raise ValueError("fill must be a single byte")
    plan = PatchPlan()
    plan.add(offset, fill * length, note=note)
    return plan
