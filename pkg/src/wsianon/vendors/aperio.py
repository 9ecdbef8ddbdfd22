"""Handler for Aperio slides.

Every directory carries a description banner; the second and later
lines of the banner name the non-tissue images ("label 415x422",
"macro 1280x431"). Sensitive values sit in the banner itself as
pipe-separated "Key = Value" fields.
"""

from __future__ import annotations

from ..detect import VendorFormat, profile
from ..tiff import TAG_IMAGE_DESCRIPTION, TAG_TILE_OFFSETS
from .base import (
    Attribute,
    KIND_THUMBNAIL,
    KIND_TISSUE,
    TiffHandler,
    description_token_kind,
    find_key_values,
)


class AperioHandler(TiffHandler):
    vendor = VendorFormat.APERIO

    def _description(self, slide, d) -> str:
        e = d.find(TAG_IMAGE_DESCRIPTION)
        if e is None:
            return ""
        return e.ascii_value(slide.store, slide.header)

    def classify_directory(self, slide, index, d):
        kind = description_token_kind(self._description(slide, d))
        if kind is not None:
            return kind
        if d.find(TAG_TILE_OFFSETS) is not None or index == 0:
            return KIND_TISSUE
        # unmarked strip image after the baseline is the pyramid thumbnail
        return KIND_THUMBNAIL

    def attribute_spans(self, slide):
        prof = profile(self.vendor)
        attrs = []
        for d in slide.chain:
            e = d.find(TAG_IMAGE_DESCRIPTION)
            if e is None:
                continue
            region_off, _ = e.value_region(slide.header)
            raw = e.value_bytes(slide.store, slide.header)
            for key, category in prof.sensitive_keys.items():
                for off, length in find_key_values(raw, key):
                    attrs.append(
                        Attribute(
                            key=key,
                            category=category,
                            offset=region_off + off,
                            length=length,
                            value=raw[off : off + length],
                        )
                    )
        return attrs
