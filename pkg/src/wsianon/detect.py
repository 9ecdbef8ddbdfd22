"""Vendor format detection and per-vendor capability profiles.

Detection prefers content cues over file extensions: the byte-order
mark and magic decide the family, the first directory's tags decide
the vendor. An extension alone never overrides what the bytes say,
it only breaks ties inside an already confirmed family.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

from .byteio import ByteSource, FileStore
from .errors import UnsupportedFormat
from .tiff import (
    TAG_ARTIST,
    TAG_DATE_TIME,
    TAG_HOST_COMPUTER,
    TAG_IMAGE_DESCRIPTION,
    TAG_XMP,
    _parse_directory,
    parse_header,
)

# content cues are only searched inside this initial window
SNIFF_WINDOW = 65536

# lowest tag number of the private block scanners from this vendor use
NDPI_PRIVATE_BASE = 65420
NDPI_SOURCELENS = 65421


class VendorFormat(enum.Enum):
    APERIO = "leica-aperio"
    HAMAMATSU = "hamamatsu-ndpi"
    MIRAX = "3dhistech-mirax"
    VENTANA = "roche-ventana"
    PHILIPS_ISYNTAX = "philips-isyntax"
    GENERIC_TIFF = "generic-tiff"
    UNKNOWN = "unknown"

    @property
    def slug(self) -> str:
        return self.value


SUBJECT = "subject_related"
ACQUISITION = "acquisition_related"


@dataclass(frozen=True)
class VendorProfile:
    vendor: VendorFormat
    display_name: str
    extensions: tuple[str, ...]
    label_separable_from_macro: bool
    multi_file_container: bool
    sensitive_keys: dict[str, str] = field(default_factory=dict)

    @property
    def streamable(self) -> bool:
        # a slide spread over sibling files cannot arrive as one stream
        return not self.multi_file_container


_PROFILES: dict[VendorFormat, VendorProfile] = {
    VendorFormat.APERIO: VendorProfile(
        vendor=VendorFormat.APERIO,
        display_name="Leica Aperio",
        extensions=(".svs", ".tif", ".tiff"),
        label_separable_from_macro=True,
        multi_file_container=False,
        sensitive_keys={
            "Filename": SUBJECT,
            "User": ACQUISITION,
            "Date": ACQUISITION,
            "Time": ACQUISITION,
            "ScanScope ID": ACQUISITION,
        },
    ),
    VendorFormat.HAMAMATSU: VendorProfile(
        vendor=VendorFormat.HAMAMATSU,
        display_name="Hamamatsu NanoZoomer",
        extensions=(".ndpi",),
        label_separable_from_macro=False,
        multi_file_container=False,
        sensitive_keys={
            "Reference": SUBJECT,
            "Created": ACQUISITION,
            "Updated": ACQUISITION,
            "NDP.S/N": ACQUISITION,
            "Macro.S/N": ACQUISITION,
        },
    ),
    VendorFormat.MIRAX: VendorProfile(
        vendor=VendorFormat.MIRAX,
        display_name="3DHistech Mirax",
        extensions=(".mrxs",),
        label_separable_from_macro=True,
        multi_file_container=True,
        sensitive_keys={
            "SLIDE_NAME": SUBJECT,
            "SLIDE_ID": SUBJECT,
            "PROJECT_NAME": SUBJECT,
            "SLIDE_CREATIONDATETIME": ACQUISITION,
            "SLIDE_UTC_CREATIONDATETIME": ACQUISITION,
            "SCANNER_HARDWARE_ID": ACQUISITION,
            "ProfileName": ACQUISITION,
        },
    ),
    VendorFormat.VENTANA: VendorProfile(
        vendor=VendorFormat.VENTANA,
        display_name="Roche Ventana",
        extensions=(".bif",),
        label_separable_from_macro=False,
        multi_file_container=False,
        sensitive_keys={
            "JP2FileName": SUBJECT,
            "BaseName": SUBJECT,
            "Barcode1D": SUBJECT,
            "Barcode2D": SUBJECT,
            "UnitNumber": SUBJECT,
            "UserName": ACQUISITION,
            "BuildDate": ACQUISITION,
        },
    ),
    VendorFormat.PHILIPS_ISYNTAX: VendorProfile(
        vendor=VendorFormat.PHILIPS_ISYNTAX,
        display_name="Philips iSyntax",
        extensions=(".isyntax", ".i2syntax"),
        label_separable_from_macro=True,
        multi_file_container=False,
        sensitive_keys={
            "PIM_DP_UFS_BARCODE": SUBJECT,
            "PIIM_DP_SCANNER_OPERATOR_ID": ACQUISITION,
            "PIIM_DP_SCANNER_RACK_NUMBER": ACQUISITION,
            "PIIM_DP_SCANNER_SLOT_NUMBER": ACQUISITION,
            "DICOM_ACQUISITION_DATETIME": ACQUISITION,
            "DICOM_DEVICE_SERIAL_NUMBER": ACQUISITION,
        },
    ),
    VendorFormat.GENERIC_TIFF: VendorProfile(
        vendor=VendorFormat.GENERIC_TIFF,
        display_name="Baseline TIFF",
        extensions=(".tif", ".tiff"),
        label_separable_from_macro=True,
        multi_file_container=False,
        sensitive_keys={
            "DateTime": ACQUISITION,
            "Artist": ACQUISITION,
            "HostComputer": ACQUISITION,
        },
    ),
}

# generic TIFF keys map onto plain tags rather than description text
GENERIC_TIFF_KEY_TAGS = {
    "DateTime": TAG_DATE_TIME,
    "Artist": TAG_ARTIST,
    "HostComputer": TAG_HOST_COMPUTER,
}


def profile(vendor: VendorFormat) -> VendorProfile:
    if vendor not in _PROFILES:
        raise UnsupportedFormat(f"no profile for {vendor.slug}")
    return _PROFILES[vendor]


def describe_formats() -> list[dict]:
    """Capability summary of every supported vendor, for CLI and service."""
    out = []
    for p in _PROFILES.values():
        out.append(
            {
                "slug": p.vendor.slug,
                "display_name": p.display_name,
                "extensions": list(p.extensions),
                "label_separable_from_macro": p.label_separable_from_macro,
                "multi_file_container": p.multi_file_container,
                "streamable": p.streamable,
                "sensitive_keys": sorted(p.sensitive_keys),
            }
        )
    return out


@dataclass(frozen=True)
class Detection:
    vendor: VendorFormat
    cue: str


def _tiff_vendor(src: ByteSource, ext: str) -> Detection:
    header = parse_header(src)
    d0 = _parse_directory(src, header, header.first_ifd_offset, header.first_link_offset)
    desc = ""
    e = d0.find(TAG_IMAGE_DESCRIPTION)
    if e is not None:
        desc = e.ascii_value(src, header)
    if "Aperio" in desc:
        return Detection(VendorFormat.APERIO, "scanner name in first image description")
    if any(t.tag >= NDPI_PRIVATE_BASE for t in d0.entries):
        return Detection(VendorFormat.HAMAMATSU, "private tag block present")
    xmp = d0.find(TAG_XMP)
    xmp_raw = xmp.value_bytes(src, header) if xmp is not None else b""
    if "iScan" in desc or b"iScan" in xmp_raw:
        return Detection(VendorFormat.VENTANA, "scanner element in metadata")
    if ext == ".ndpi":
        return Detection(VendorFormat.HAMAMATSU, "file extension")
    if ext == ".bif":
        return Detection(VendorFormat.VENTANA, "file extension")
    if ext == ".svs":
        return Detection(VendorFormat.APERIO, "file extension")
    return Detection(VendorFormat.GENERIC_TIFF, "TIFF with no vendor cue")


def _looks_like_xml(head: bytes) -> bool:
    if head.startswith(b"\xef\xbb\xbf"):
        head = head[3:]
    return head.lstrip(b" \t\r\n").startswith(b"<?xml")


def sniff_store(src: ByteSource, name: str = "") -> Detection:
    """Detect the vendor of a single byte store."""
    ext = os.path.splitext(name)[1].lower()
    head = src.read_exact(0, min(src.length, SNIFF_WINDOW))
    if head[:2] in (b"II", b"MM"):
        try:
            return _tiff_vendor(src, ext)
        except UnsupportedFormat:
            pass  # magic mismatch; fall through to the other families
    if _looks_like_xml(head):
        if ext in (".isyntax", ".i2syntax"):
            return Detection(VendorFormat.PHILIPS_ISYNTAX, "file extension")
        if b"PIM_DP_" in head or b"PIIM_DP_" in head or b"DICOM_" in head or b"iSyntax" in head:
            return Detection(VendorFormat.PHILIPS_ISYNTAX, "attribute names in header")
    if ext == ".mrxs":
        return Detection(VendorFormat.MIRAX, "file extension")
    return Detection(VendorFormat.UNKNOWN, "no recognized structure")


def sniff_path(path: str | os.PathLike[str]) -> Detection:
    """Detect the vendor of a slide on disk."""
    path = os.fspath(path)
    if path.lower().endswith(".mrxs"):
        return Detection(VendorFormat.MIRAX, "file extension")
    with FileStore(path) as src:
        return sniff_store(src, name=os.path.basename(path))
