"""Shared vendor machinery.

A vendor handler knows how to open a slide, classify its images,
locate sensitive attribute values, and turn a destruction request
into same-length patches. Everything here is byte-span based: a
located attribute is an absolute span in a concrete store, so the
planner never re-parses what the scanner found.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..byteio import ByteSink, ByteSource
from ..detect import VendorFormat, profile
from ..errors import LabelNotSeparable
from ..tiff import (
    PatchPlan,
    TAG_IMAGE_LENGTH,
    TAG_IMAGE_WIDTH,
    TAG_NEW_SUBFILE_TYPE,
    image_segments,
    parse_chain,
    parse_header,
    plan_unlink_ifds,
    plan_wipe_image,
)

KIND_TISSUE = "tissue"
KIND_LABEL = "label"
KIND_MACRO = "macro"
KIND_LABEL_MACRO = "label+macro"
KIND_THUMBNAIL = "thumbnail"
KIND_UNKNOWN = "unknown"

LABEL_KINDS = frozenset({KIND_LABEL, KIND_LABEL_MACRO})

FILL_BYTE = b"X"
# bytes an anonymized value may consist of
_BLANK_SET = frozenset(b"X \t\r\n\0")


def is_blank_value(value: bytes) -> bool:
    return all(b in _BLANK_SET for b in value)


def find_key_values(data: bytes, key: str) -> list[tuple[int, int]]:
    """Spans of the values bound to a metadata key.

    Matches the three spellings that occur in scanner metadata:
    "KEY = VALUE" and "KEY=VALUE" (value runs to a field separator)
    and KEY="VALUE" (XML attribute). The span covers the value only,
    with trailing spaces excluded so the fill never widens a field.
    """
    kb = re.escape(key.encode("ascii"))
    boundary = rb"(?<![A-Za-z0-9_.])"
    spans = []
    for m in re.finditer(boundary + kb + rb'[ \t]*=[ \t]*"([^"<>]*)"', data):
        if m.group(1):
            spans.append((m.start(1), len(m.group(1))))
    for m in re.finditer(boundary + kb + rb'[ \t]*=[ \t]*([^|\r\n\0"<>]*)', data):
        value = m.group(1).rstrip(b" \t")
        if value:
            spans.append((m.start(1), len(value)))
    return sorted(set(spans))


@dataclass
class ScannedImage:
    kind: str
    index: int
    width: int | None = None
    height: int | None = None
    note: str = ""


@dataclass
class Attribute:
    key: str
    category: str
    offset: int
    length: int
    value: bytes
    store_key: str = ""  # which file of a container the span lives in
    blank: bool | None = None  # whether the value already counts as anonymized

    def __post_init__(self) -> None:
        if self.blank is None:
            self.blank = is_blank_value(self.value)


@dataclass
class ScanResult:
    vendor: VendorFormat
    images: list[ScannedImage]
    attributes: list[Attribute]
    warnings: list[str]


@dataclass
class AuditView:
    """What an independent re-inspection can still see in a slide."""

    label_unreferenced: bool
    label_payload_blank: bool
    attributes: list[Attribute]


@dataclass(frozen=True)
class PlanOptions:
    keep_macro: bool = False
    overwrite_only: bool = False


def select_targets(
    scan: ScanResult, opts: PlanOptions, slug: str = ""
) -> tuple[list[ScannedImage], list[ScannedImage]]:
    """Split scanned images into (destroyed, kept) under the options.

    Raises LabelNotSeparable when the macro is to be kept but the
    format fuses it with the label into a single image.
    """
    destroyed, kept = [], []
    for img in scan.images:
        if img.kind == KIND_LABEL:
            destroyed.append(img)
        elif img.kind == KIND_LABEL_MACRO:
            if opts.keep_macro:
                raise LabelNotSeparable(
                    f"{slug or scan.vendor.slug}: label and macro are one image; "
                    "the macro cannot be kept while the label is destroyed"
                )
            destroyed.append(img)
        elif img.kind == KIND_MACRO and not opts.keep_macro:
            destroyed.append(img)
        else:
            kept.append(img)
    return destroyed, kept


class VendorHandler:
    vendor: VendorFormat

    def open_store(self, store: ByteSink, name: str = ""):
        raise NotImplementedError

    def scan(self, slide) -> ScanResult:
        raise NotImplementedError

    def plan(self, slide, scan: ScanResult, opts: PlanOptions):
        raise NotImplementedError

    def apply(self, slide, work) -> int:
        raise NotImplementedError

    def audit(self, slide, scan: ScanResult) -> AuditView:
        raise NotImplementedError


@dataclass
class TiffSlide:
    store: ByteSink
    name: str
    header: object
    chain: list
    warnings: list[str]


def description_token_kind(text: str) -> str | None:
    """Image kind named by a directory description, if any.

    Scanner banners put the image role at the start of a line, e.g.
    a second line reading "label 415x422". Only the leading word of
    a line counts; "label" inside prose does not mark an image.
    """
    for line in text.lower().splitlines():
        word = line.strip().split(" ")[0].strip(":,;")
        if word in ("label", "macro", "thumbnail"):
            return word
    return None


class TiffHandler(VendorHandler):
    """Common behavior for single-file TIFF-family slides."""

    def classify_directory(self, slide: TiffSlide, index: int, d) -> str:
        raise NotImplementedError

    def attribute_spans(self, slide: TiffSlide) -> list[Attribute]:
        raise NotImplementedError

    def open_store(self, store: ByteSink, name: str = "") -> TiffSlide:
        header = parse_header(store)
        chain, warnings = parse_chain(store, header)
        return TiffSlide(store=store, name=name, header=header, chain=chain, warnings=warnings)

    def _dimensions(self, slide: TiffSlide, d) -> tuple[int | None, int | None]:
        dims = []
        for tag in (TAG_IMAGE_WIDTH, TAG_IMAGE_LENGTH):
            e = d.find(tag)
            dims.append(e.int_values(slide.store, slide.header)[0] if e is not None else None)
        return dims[0], dims[1]

    def scan(self, slide: TiffSlide) -> ScanResult:
        images = []
        for i, d in enumerate(slide.chain):
            kind = self.classify_directory(slide, i, d)
            w, h = self._dimensions(slide, d)
            images.append(ScannedImage(kind=kind, index=i, width=w, height=h))
        # attribute location may add warnings to the slide; collect first
        attrs = self.attribute_spans(slide)
        return ScanResult(
            vendor=self.vendor,
            images=images,
            attributes=attrs,
            warnings=list(slide.warnings),
        )

    def plan(self, slide: TiffSlide, scan: ScanResult, opts: PlanOptions) -> PatchPlan:
        plan = PatchPlan()
        targets, _ = select_targets(scan, opts, self.vendor.slug)
        for img in targets:
            d = slide.chain[img.index]
            plan.extend(plan_wipe_image(slide.store, slide.header, d, note=f"ifd{img.index} "))
        for a in scan.attributes:
            plan.add(a.offset, FILL_BYTE * a.length, note=f"attr {a.key}")
        if targets and not opts.overwrite_only:
            plan.extend(
                plan_unlink_ifds(slide.store, slide.header, slide.chain, {t.index for t in targets})
            )
        return plan

    def apply(self, slide: TiffSlide, work: PatchPlan) -> int:
        return work.apply(slide.store)

    def audit(self, slide: TiffSlide, scan: ScanResult) -> AuditView:
        labels = [img for img in scan.images if img.kind in LABEL_KINDS]
        blank = True
        for img in labels:
            d = slide.chain[img.index]
            for off, n in image_segments(slide.store, slide.header, d):
                if any(slide.store.read_exact(off, n)):
                    blank = False
        return AuditView(
            label_unreferenced=not labels,
            label_payload_blank=blank,
            attributes=scan.attributes,
        )


def tag_value_attribute(slide: TiffSlide, d, tag: int, key: str, category: str) -> Attribute | None:
    """Whole-value attribute for a plain string tag.

    The trailing NUL of an ASCII value is preserved so the field stays
    a valid terminated string after the fill.
    """
    e = d.find(tag)
    if e is None:
        return None
    off, size = e.value_region(slide.header)
    raw = e.value_bytes(slide.store, slide.header)
    if size > 0 and raw.endswith(b"\0"):
        size -= 1
        raw = raw[:-1]
    if size == 0:
        return None
    return Attribute(key=key, category=category, offset=off, length=size, value=raw)


class GenericTiffHandler(TiffHandler):
    """Fallback handler for baseline TIFFs with no vendor dialect.

    Labels are recognized only when a description names them; the
    sensitive surface is the small set of descriptive string tags.
    """

    vendor = VendorFormat.GENERIC_TIFF

    def classify_directory(self, slide, index, d):
        from ..tiff import TAG_IMAGE_DESCRIPTION

        e = d.find(TAG_IMAGE_DESCRIPTION)
        if e is not None:
            kind = description_token_kind(e.ascii_value(slide.store, slide.header))
            if kind is not None:
                return kind
        sub = d.find(TAG_NEW_SUBFILE_TYPE)
        if sub is not None and sub.int_values(slide.store, slide.header)[0] & 1:
            return KIND_THUMBNAIL
        return KIND_TISSUE if index == 0 else KIND_UNKNOWN

    def attribute_spans(self, slide):
        from ..detect import GENERIC_TIFF_KEY_TAGS

        prof = profile(self.vendor)
        attrs = []
        for d in slide.chain:
            for key, tag in GENERIC_TIFF_KEY_TAGS.items():
                a = tag_value_attribute(slide, d, tag, key, prof.sensitive_keys[key])
                if a is not None:
                    attrs.append(a)
        return attrs
