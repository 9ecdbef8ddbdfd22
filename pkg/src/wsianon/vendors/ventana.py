"""Handler for Ventana slides.

Directories are named by their descriptions ("Label Image",
"Thumbnail", pyramid levels). The label photograph includes the
slide overview, so there is no separate macro to keep. Scanner
metadata sits in XML fragments (description or XMP) as attributes
of an iScan element, all in KEY="VALUE" form.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from ..detect import VendorFormat, profile
from ..tiff import TAG_IMAGE_DESCRIPTION, TAG_XMP
from .base import (
    Attribute,
    KIND_LABEL_MACRO,
    KIND_THUMBNAIL,
    KIND_TISSUE,
    TiffHandler,
    find_key_values,
)


class VentanaHandler(TiffHandler):
    vendor = VendorFormat.VENTANA

    def _description(self, slide, d) -> str:
        e = d.find(TAG_IMAGE_DESCRIPTION)
        if e is None:
            return ""
        return e.ascii_value(slide.store, slide.header)

    def classify_directory(self, slide, index, d):
        text = self._description(slide, d).lower()
        first_line = text.splitlines()[0].strip() if text else ""
        if "label" in first_line:
            return KIND_LABEL_MACRO
        if "thumbnail" in first_line:
            return KIND_THUMBNAIL
        return KIND_TISSUE

    def _xml_regions(self, slide, d, warnings):
        for tag in (TAG_IMAGE_DESCRIPTION, TAG_XMP):
            e = d.find(tag)
            if e is None:
                continue
            off, _ = e.value_region(slide.header)
            raw = e.value_bytes(slide.store, slide.header)
            text = raw.rstrip(b"\0")
            if b"<" in text:
                try:
                    ET.fromstring(text.decode("utf-8", errors="replace"))
                except ET.ParseError:
                    warnings.append(
                        f"tag {tag} at directory {d.offset}: metadata XML does not parse; "
                        "falling back to raw text matching"
                    )
            yield off, raw

    def attribute_spans(self, slide):
        prof = profile(self.vendor)
        attrs = []
        for d in slide.chain:
            for region_off, raw in self._xml_regions(slide, d, slide.warnings):
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
