"""Handler for iSyntax slides.

The file opens with an XML header terminated by a single EOT byte
(0x04); everything after that byte is opaque pixel payload and is
never touched. The header carries typed attributes

    <attribute key="K" type="string|datetime|int" [min="a" max="b"]>V</attribute>

and embedded overview images

    <image type="label|macro|wsi">
      <dimensions width="W" height="H"/>
      <data encoding="base64">...</data>
    </image>

Nothing in the header can be removed, because every byte offset after
an edit must stay what it was. Anonymization therefore replaces: image
payloads become the base64 of all-zero bytes of the same decoded size,
and attribute values become fillers of the same length that still
satisfy the declared type. When a typed field admits no such filler
the run refuses before writing anything rather than emit a value the
reader would reject.
"""

from __future__ import annotations

import base64
import binascii
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from ..byteio import ByteSink
from ..detect import VendorFormat, profile
from ..errors import CorruptStructure, ReplacementConstraintViolation
from ..tiff import PatchPlan
from .base import (
    Attribute,
    AuditView,
    KIND_LABEL,
    KIND_MACRO,
    KIND_TISSUE,
    KIND_UNKNOWN,
    PlanOptions,
    ScanResult,
    ScannedImage,
    VendorHandler,
    is_blank_value,
    select_targets,
)

EOT = 0x04
# the header must end; a file with no terminator within this bound is broken
MAX_HEADER = 32 * 1024 * 1024

_ATTR_RE = re.compile(rb"<attribute\b([^>]*)>([^<]*)</attribute>")
_IMAGE_RE = re.compile(rb"<image\b([^>]*)>(.*?)</image>", re.DOTALL)
_DATA_RE = re.compile(rb'<data\s+encoding="base64">([^<]*)</data>')
_DIM_RE = re.compile(rb'<dimensions\s+width="(\d+)"\s+height="(\d+)"')
_XMLATTR_RE = re.compile(rb'([A-Za-z_]\w*)="([^"]*)"')

_KIND_BY_TYPE = {"label": KIND_LABEL, "macro": KIND_MACRO, "wsi": KIND_TISSUE}


def datetime_fill(n: int) -> bytes:
    return (b"19700101000000" + b"0" * n)[:n]


def int_fill(n_digits: int, lo: int | None, hi: int | None) -> bytes:
    """Smallest non-negative integer with exactly n_digits inside [lo, hi]."""
    digit_lo = 0 if n_digits == 1 else 10 ** (n_digits - 1)
    digit_hi = 10**n_digits - 1
    x = max(digit_lo, lo if lo is not None else 0)
    ceiling = min(digit_hi, hi) if hi is not None else digit_hi
    if x > ceiling:
        raise ReplacementConstraintViolation(
            f"no {n_digits}-digit integer fits the declared range [{lo}, {hi}]"
        )
    return str(x).encode("ascii")


def _decode_payload(text: bytes) -> bytes:
    stripped = b"".join(text.split())
    try:
        return base64.b64decode(stripped, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise CorruptStructure(f"image payload is not valid base64: {exc}") from exc


def blank_payload(original: bytes) -> bytes:
    """Base64 of zero bytes, padded to the original text length."""
    raw_len = len(_decode_payload(original))
    repl = base64.b64encode(b"\0" * raw_len)
    if len(repl) > len(original):
        raise ReplacementConstraintViolation(
            "zero payload does not re-encode within the original field"
        )
    return repl + b"\n" * (len(original) - len(repl))


@dataclass
class HeaderAttr:
    key: str
    vtype: str
    lo: int | None
    hi: int | None
    offset: int
    length: int
    value: bytes

    def filler(self) -> bytes:
        if self.vtype == "datetime":
            return datetime_fill(self.length)
        if self.vtype == "int":
            return int_fill(self.length, self.lo, self.hi)
        return b"X" * self.length

    def is_filled(self) -> bool:
        if self.vtype == "string":
            return is_blank_value(self.value)
        try:
            return self.value == self.filler()
        except ReplacementConstraintViolation:
            return False


@dataclass
class HeaderImage:
    itype: str
    offset: int   # of the base64 text; 0 when the payload is not inline
    length: int
    payload: bytes | None  # None: referenced by offset, lives past the header
    width: int | None
    height: int | None


@dataclass
class ISyntaxSlide:
    store: ByteSink
    name: str
    eot: int
    attrs: list[HeaderAttr]
    images: list[HeaderImage]
    warnings: list[str]


def _find_eot(store: ByteSink) -> int:
    pos = 0
    bound = min(store.length, MAX_HEADER)
    while pos < bound:
        chunk = store.read_exact(pos, min(65536, bound - pos))
        hit = chunk.find(b"\x04")
        if hit >= 0:
            return pos + hit
        pos += len(chunk)
    raise CorruptStructure("no end-of-header marker in file")


class ISyntaxHandler(VendorHandler):
    vendor = VendorFormat.PHILIPS_ISYNTAX

    def open_store(self, store: ByteSink, name: str = "") -> ISyntaxSlide:
        eot = _find_eot(store)
        xml = store.read_exact(0, eot)
        try:
            ET.fromstring(xml.decode("utf-8"))
        except (ET.ParseError, UnicodeDecodeError) as exc:
            raise CorruptStructure(f"header XML does not parse: {exc}") from exc

        warnings: list[str] = []
        attrs: list[HeaderAttr] = []
        for m in _ATTR_RE.finditer(xml):
            fields = {k.decode(): v for k, v in _XMLATTR_RE.findall(m.group(1))}
            key = fields.get("key", b"").decode("ascii", errors="replace")
            if not key:
                warnings.append("attribute element without a key was ignored")
                continue
            vtype = fields.get("type", b"string").decode("ascii", errors="replace")
            value = m.group(2)
            lo = hi = None
            if vtype == "int":
                if not value.isdigit():
                    raise CorruptStructure(f"attribute {key!r} declares int but holds {value!r}")
                try:
                    lo = int(fields["min"]) if "min" in fields else None
                    hi = int(fields["max"]) if "max" in fields else None
                except ValueError as exc:
                    raise CorruptStructure(f"attribute {key!r} has a non-numeric bound") from exc
            elif vtype == "datetime":
                if not value.isdigit() or len(value) < 4:
                    raise CorruptStructure(
                        f"attribute {key!r} declares datetime but holds {value!r}"
                    )
            elif vtype != "string":
                warnings.append(f"attribute {key!r} has unknown type {vtype!r}; treated as string")
                vtype = "string"
            attrs.append(
                HeaderAttr(
                    key=key, vtype=vtype, lo=lo, hi=hi,
                    offset=m.start(2), length=len(value), value=value,
                )
            )

        images: list[HeaderImage] = []
        for m in _IMAGE_RE.finditer(xml):
            fields = {k.decode(): v for k, v in _XMLATTR_RE.findall(m.group(1))}
            itype = fields.get("type", b"").decode("ascii", errors="replace")
            body = m.group(2)
            dm = _DATA_RE.search(body)
            if dm is None:
                if itype in ("label", "macro"):
                    raise CorruptStructure(f"{itype} image has no payload element")
                dim = _DIM_RE.search(body)
                w, h = (int(dim.group(1)), int(dim.group(2))) if dim else (None, None)
                images.append(
                    HeaderImage(itype=itype, offset=0, length=0, payload=None,
                                width=w, height=h)
                )
                continue
            payload = dm.group(1)
            _decode_payload(payload)  # base64 must be valid up front
            dim = _DIM_RE.search(body)
            w, h = (int(dim.group(1)), int(dim.group(2))) if dim else (None, None)
            images.append(
                HeaderImage(
                    itype=itype,
                    offset=m.start(2) + dm.start(1),
                    length=len(payload),
                    payload=payload,
                    width=w,
                    height=h,
                )
            )
        return ISyntaxSlide(store=store, name=name, eot=eot, attrs=attrs, images=images, warnings=warnings)

    def scan(self, slide: ISyntaxSlide) -> ScanResult:
        prof = profile(self.vendor)
        images = [
            ScannedImage(
                kind=_KIND_BY_TYPE.get(img.itype, KIND_UNKNOWN),
                index=i, width=img.width, height=img.height, note=img.itype,
            )
            for i, img in enumerate(slide.images)
        ]
        attrs = [
            Attribute(
                key=a.key,
                category=prof.sensitive_keys[a.key],
                offset=a.offset,
                length=a.length,
                value=a.value,
                blank=a.is_filled(),
            )
            for a in slide.attrs
            if a.key in prof.sensitive_keys
        ]
        return ScanResult(self.vendor, images, attrs, list(slide.warnings))

    def plan(self, slide: ISyntaxSlide, scan: ScanResult, opts: PlanOptions) -> PatchPlan:
        prof = profile(self.vendor)
        plan = PatchPlan()
        destroyed, _ = select_targets(scan, opts, self.vendor.slug)
        for img in destroyed:
            target = slide.images[img.index]
            if target.payload is None:
                raise CorruptStructure(
                    f"{target.itype} image payload is not inline and cannot be blanked"
                )
            plan.add(target.offset, blank_payload(target.payload), note=f"blank {target.itype}")
        for a in slide.attrs:
            if a.key in prof.sensitive_keys and not a.is_filled():
                plan.add(a.offset, a.filler(), note=f"attr {a.key}")
        return plan

    def apply(self, slide: ISyntaxSlide, work: PatchPlan) -> int:
        return work.apply(slide.store)

    def audit(self, slide: ISyntaxSlide, scan: ScanResult) -> AuditView:
        labels = [img for img in slide.images if img.itype == "label"]
        blank = all(not any(_decode_payload(img.payload)) for img in labels)
        # the header cannot reference less: a label whose payload is all
        # zero no longer references a label photograph
        return AuditView(
            label_unreferenced=blank,
            label_payload_blank=blank,
            attributes=scan.attributes,
        )
