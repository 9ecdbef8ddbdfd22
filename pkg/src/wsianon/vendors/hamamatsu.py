"""Handler for Hamamatsu slides.

The vendor keeps its own tag block in the private range. The source
lens tag tells each directory's role: a magnification for tissue
levels, -1 for the overview photograph. That photograph covers the
whole slide including the label, so label and macro are one image
here and can only be destroyed together.

Sensitive values live in a barcode tag and in "Key=Value" lines of
the textual property tags.
"""

from __future__ import annotations

from ..detect import NDPI_PRIVATE_BASE, NDPI_SOURCELENS, VendorFormat, profile
from ..tiff import TAG_IMAGE_DESCRIPTION
from .base import (
    Attribute,
    KIND_LABEL_MACRO,
    KIND_THUMBNAIL,
    KIND_TISSUE,
    KIND_UNKNOWN,
    TiffHandler,
    find_key_values,
    tag_value_attribute,
)

TAG_REFERENCE = 65427

# property keys are matched inside text-typed tags; the barcode tag is
# blanked whole
_TEXT_KEYS = ("Created", "Updated", "NDP.S/N", "Macro.S/N")


class HamamatsuHandler(TiffHandler):
    vendor = VendorFormat.HAMAMATSU

    def classify_directory(self, slide, index, d):
        e = d.find(NDPI_SOURCELENS)
        if e is None:
            return KIND_UNKNOWN
        lens = e.int_values(slide.store, slide.header)[0]
        if lens == -1:
            return KIND_LABEL_MACRO
        if lens < 0:
            return KIND_THUMBNAIL
        return KIND_TISSUE

    def _text_regions(self, slide, d):
        for e in d.entries:
            if e.tag == TAG_REFERENCE:
                continue
            if e.type in (2, 7) and (e.tag >= NDPI_PRIVATE_BASE or e.tag == TAG_IMAGE_DESCRIPTION):
                off, _ = e.value_region(slide.header)
                yield off, e.value_bytes(slide.store, slide.header)

    def attribute_spans(self, slide):
        prof = profile(self.vendor)
        attrs = []
        for d in slide.chain:
            ref = tag_value_attribute(
                slide, d, TAG_REFERENCE, "Reference", prof.sensitive_keys["Reference"]
            )
            if ref is not None:
                attrs.append(ref)
            for region_off, raw in self._text_regions(slide, d):
                for key in _TEXT_KEYS:
                    for off, length in find_key_values(raw, key):
                        attrs.append(
                            Attribute(
                                key=key,
                                category=prof.sensitive_keys[key],
                                offset=region_off + off,
                                length=length,
                                value=raw[off : off + length],
                            )
                        )
        return attrs
