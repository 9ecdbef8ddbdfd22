"""Synthetic slide fixtures with planted sensitive values.

Real scanner output cannot ship with a test suite, so this module
builds miniature slides that are structurally faithful to each
supported format and seeds them with sentinels: unique high-entropy
strings planted wherever identifying data would sit, plus a byte
pattern planted in the label pixels. A blind substring scan then
gives an implementation-independent verdict: every sentinel must be
findable before anonymization and absent afterwards.

The TIFF assembly here is deliberately separate from the package's
own parser; fixtures are only trustworthy as test oracles if they
are not produced by the code under test.

Payload filler bytes are drawn from 0x80-0xF7 so no ASCII sequence
can occur by accident inside pixel data, and sentinel tokens use a
fixed-width alphabet so no token is a substring of another.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import struct
from dataclasses import dataclass, field

from .detect import VendorFormat
from .errors import UnsupportedFormat

PATTERN_LEN = 16


def _digest(seed: int, role: str) -> bytes:
    return hashlib.sha256(f"{seed}:{role}".encode("ascii")).digest()


@dataclass(frozen=True)
class SentinelProfile:
    """Deterministic generator of planted values for one seed."""

    seed: int = 0

    def token(self, role: str) -> str:
        h = _digest(self.seed, role).hex().upper()
        return "ZQ" + h[:12]

    def digit_token(self, role: str, n: int) -> str:
        digits = "".join(str(b % 10) for b in _digest(self.seed, role))
        out = digits[:n]
        if out[0] == "0":
            out = "9" + out[1:]  # keep a plausible leading digit
        return out

    @property
    def pixel_pattern(self) -> bytes:
        raw = _digest(self.seed, "pixel-pattern")[:PATTERN_LEN]
        return bytes(b if b else 0xA5 for b in raw)


def default_profile(seed: int = 0) -> SentinelProfile:
    return SentinelProfile(seed=seed)


@dataclass
class Fixture:
    vendor: VendorFormat
    primary: str
    files: list[str]
    manifest: str
    sentinel_file: str
    planted: dict[str, bytes]
    expected_images: dict[str, int] = field(default_factory=dict)
    expected_attr_keys: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class ScanHit:
    role: str
    path: str
    offset: int  # -1 means the hit is in the file name, not the content


def sensitivity_scan(paths: list[str], needles: dict[str, bytes]) -> list[ScanHit]:
    """Blind search for planted values across files and their names.

    No format knowledge is used: a needle that survives anywhere in
    the raw bytes is a leak regardless of what the structure claims.
    """
    hits = []
    for path in paths:
        name = os.path.basename(path).encode("ascii", errors="replace")
        with open(path, "rb") as fh:
            data = fh.read()
        for role, needle in needles.items():
            if needle and needle in name:
                hits.append(ScanHit(role=role, path=path, offset=-1))
            start = 0
            while needle:
                idx = data.find(needle, start)
                if idx < 0:
                    break
                hits.append(ScanHit(role=role, path=path, offset=idx))
                start = idx + 1
    return hits


def structural_check(path: str):
    """Strict re-parse of a slide; raises if the structure is damaged."""
    from .engine import close_slide, open_slide

    handler, slide = open_slide(path)
    try:
        return handler.scan(slide)
    finally:
        close_slide(slide)


def _filler(n: int, phase: int = 0) -> bytes:
    # 0x80..0xF7, stride 7: never forms ASCII text
    return bytes(0x80 + (phase + 7 * i) % 120 for i in range(n))


class _TiffWriter:
    """Minimal standalone TIFF/BigTIFF assembler for fixtures."""

    def __init__(self, byte_order: str = "<", big: bool = False) -> None:
        if byte_order not in ("<", ">"):
            raise ValueError("byte_order must be '<' or '>'")
        self.bo = byte_order
        self.big = big
        self._images: list[dict] = []

    def add_image(
        self,
        *,
        width: int,
        height: int,
        strips: list[bytes] | None = None,
        tiles: list[bytes] | None = None,
        tile_size: tuple[int, int] | None = None,
        rows_per_strip: int | None = None,
        desc: str | None = None,
        extra: tuple = (),
    ) -> None:
        if (strips is None) == (tiles is None):
            raise ValueError("exactly one of strips or tiles is required")
        self._images.append(
            dict(
                width=width, height=height, strips=strips, tiles=tiles,
                tile_size=tile_size, rows_per_strip=rows_per_strip,
                desc=desc, extra=list(extra),
            )
        )

    def _pack(self, typ: int, values) -> tuple[int, bytes]:
        bo = self.bo
        if typ in (2, 7):  # ASCII (NUL already appended) or raw undefined
            raw = bytes(values)
            return len(raw), raw
        fmt = {3: "H", 4: "I", 9: "i", 16: "Q", 17: "q"}[typ]
        return len(values), struct.pack(f"{bo}{len(values)}{fmt}", *values)

    def render(self) -> bytes:
        bo, big = self.bo, self.big
        cap = 8 if big else 4
        off_fmt = bo + ("Q" if big else "I")
        buf = bytearray(16 if big else 8)

        def pad() -> None:
            if len(buf) % 2:
                buf.append(0)

        ifd_offsets: list[int] = []
        next_fields: list[int] = []
        for img in self._images:
            blobs = img["strips"] if img["strips"] is not None else img["tiles"]
            spans = []
            for blob in blobs:
                pad()
                spans.append((len(buf), len(blob)))
                buf.extend(blob)
            specs = [
                (256, 3, [img["width"]]),
                (257, 3, [img["height"]]),
                (258, 3, [8]),
                (259, 3, [1]),
                (262, 3, [1]),
                (277, 3, [1]),
            ]
            if img["desc"] is not None:
                specs.append((270, 2, img["desc"].encode("ascii") + b"\0"))
            if img["strips"] is not None:
                specs.append((273, 4, [o for o, _ in spans]))
                specs.append((278, 3, [img["rows_per_strip"] or img["height"]]))
                specs.append((279, 4, [n for _, n in spans]))
            else:
                tw, th = img["tile_size"]
                specs.append((322, 3, [tw]))
                specs.append((323, 3, [th]))
                specs.append((324, 4, [o for o, _ in spans]))
                specs.append((325, 4, [n for _, n in spans]))
            specs.extend(img["extra"])
            specs.sort(key=lambda s: s[0])

            fields = []
            for tag, typ, values in specs:
                count, raw = self._pack(typ, values)
                if len(raw) <= cap:
                    fields.append((tag, typ, count, raw.ljust(cap, b"\0")))
                else:
                    pad()
                    off = len(buf)
                    buf.extend(raw)
                    fields.append((tag, typ, count, struct.pack(off_fmt, off)))
            pad()
            ifd_offsets.append(len(buf))
            if big:
                buf.extend(struct.pack(bo + "Q", len(fields)))
                for tag, typ, count, vf in fields:
                    buf.extend(struct.pack(bo + "HHQ", tag, typ, count) + vf)
            else:
                buf.extend(struct.pack(bo + "H", len(fields)))
                for tag, typ, count, vf in fields:
                    buf.extend(struct.pack(bo + "HHI", tag, typ, count) + vf)
            next_fields.append(len(buf))
            buf.extend(struct.pack(off_fmt, 0))

        buf[0:2] = b"II" if bo == "<" else b"MM"
        if big:
            struct.pack_into(bo + "HHHQ", buf, 2, 43, 8, 0, ifd_offsets[0])
        else:
            struct.pack_into(bo + "HI", buf, 2, 42, ifd_offsets[0])
        for nf, nxt in zip(next_fields, ifd_offsets[1:] + [None]):
            if nxt is not None:
                struct.pack_into(off_fmt, buf, nf, nxt)
        return bytes(buf)


def _write(path: str, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def _emit_support_files(
    out_dir: str,
    base: str,
    vendor: VendorFormat,
    files: list[str],
    planted: dict[str, bytes],
    notes: dict[str, str],
) -> tuple[str, str]:
    manifest = os.path.join(out_dir, base + ".manifest.txt")
    lines = [f"vendor={vendor.slug}"]
    lines += [f"{k}={v}" for k, v in notes.items()]
    lines.append("files=" + ";".join(os.path.basename(f) for f in files))
    lines.append("planted_roles=" + ",".join(sorted(planted)))
    _write(manifest, ("\n".join(lines) + "\n").encode("ascii"))

    sentinel_file = os.path.join(out_dir, base + ".sentinels.json")
    payload = {
        "needles": {
            role: needle.decode("ascii") if role != "pixel_pattern" else needle.hex()
            for role, needle in planted.items()
        },
        "hex_roles": ["pixel_pattern"] if "pixel_pattern" in planted else [],
    }
    _write(sentinel_file, json.dumps(payload, indent=2, sort_keys=True).encode("ascii"))
    return manifest, sentinel_file


def load_sentinels(path: str) -> dict[str, bytes]:
    """Read a needle set written next to a forged fixture."""
    with open(path, "rb") as fh:
        payload = json.loads(fh.read().decode("ascii"))
    hex_roles = set(payload.get("hex_roles", []))
    out = {}
    for role, text in payload["needles"].items():
        out[role] = bytes.fromhex(text) if role in hex_roles else text.encode("ascii")
    return out


def _label_payload(pattern: bytes, notes: list[bytes], total: int, phase: int = 0) -> bytes:
    head = pattern + b" " + b" ".join(notes) + (b" " if notes else b"")
    if len(head) > total:
        raise ValueError("label payload too small for planted content")
    return head + _filler(total - len(head), phase)


def _forge_aperio(out_dir: str, profile: SentinelProfile, byte_order: str, big: bool) -> Fixture:
    t = profile.token
    planted = {
        "disk_name": t("aperio.disk_name").encode(),
        "filename_attr": t("aperio.filename_attr").encode(),
        "user": t("aperio.user").encode(),
        "date": t("aperio.date").encode(),
        "time": t("aperio.time").encode(),
        "scanner_id": t("aperio.scanner_id").encode(),
        "label_note_1": t("aperio.label_note_1").encode(),
        "label_note_2": t("aperio.label_note_2").encode(),
        "pixel_pattern": profile.pixel_pattern,
    }
    banner = (
        "Aperio Image Library v10.0.51\r\n"
        "128x64 [0,0,128x64] (256x256) JPEG/RGB Q=70"
        f"|AppMag = 20|ScanScope ID = {t('aperio.scanner_id')}"
        f"|Filename = {t('aperio.filename_attr')}"
        f"|Date = {t('aperio.date')}|Time = {t('aperio.time')}"
        f"|User = {t('aperio.user')}"
    )
    w = _TiffWriter(byte_order=byte_order, big=big)
    w.add_image(
        width=128, height=64,
        tiles=[_filler(4096, 1), _filler(4096, 2)], tile_size=(64, 64),
        desc=banner,
    )
    w.add_image(
        width=32, height=16, strips=[_filler(512, 3)],
        desc="Aperio Image Library v10.0.51\r\n",
    )
    half = 64 * 24
    note2 = planted["label_note_2"] + b" "
    w.add_image(
        width=64, height=48,
        strips=[
            _label_payload(profile.pixel_pattern, [planted["label_note_1"]], half, 4),
            note2 + _filler(half - len(note2), 5),
        ],
        rows_per_strip=24,
        desc="Aperio Image Library v10.0.51\r\nlabel 64x48",
    )
    w.add_image(
        width=128, height=16, strips=[_filler(2048, 6)],
        desc="Aperio Image Library v10.0.51\r\nmacro 128x16",
    )
    base = t("aperio.disk_name")
    primary = os.path.join(out_dir, base + ".svs")
    _write(primary, w.render())
    manifest, sentinel_file = _emit_support_files(
        out_dir, base, VendorFormat.APERIO, [primary], planted,
        {"byte_order": byte_order, "big_tiff": str(big)},
    )
    return Fixture(
        vendor=VendorFormat.APERIO,
        primary=primary,
        files=[primary],
        manifest=manifest,
        sentinel_file=sentinel_file,
        planted=planted,
        expected_images={"tissue": 1, "thumbnail": 1, "label": 1, "macro": 1},
        expected_attr_keys={"Filename", "User", "Date", "Time", "ScanScope ID"},
    )


def _forge_hamamatsu(out_dir: str, profile: SentinelProfile, byte_order: str, big: bool) -> Fixture:
    t = profile.token
    planted = {
        "disk_name": t("ndpi.disk_name").encode(),
        "barcode": t("ndpi.barcode").encode(),
        "created": t("ndpi.created").encode(),
        "updated": t("ndpi.updated").encode(),
        "device_serial": t("ndpi.device_serial").encode(),
        "macro_serial": t("ndpi.macro_serial").encode(),
        "macro_note_1": t("ndpi.macro_note_1").encode(),
        "macro_note_2": t("ndpi.macro_note_2").encode(),
        "macro_note_3": t("ndpi.macro_note_3").encode(),
        "pixel_pattern": profile.pixel_pattern,
    }
    props = (
        f"NDP.S/N={t('ndpi.device_serial')}\r\n"
        f"Macro.S/N={t('ndpi.macro_serial')}\r\n"
        f"Created={t('ndpi.created')}\r\n"
        f"Updated={t('ndpi.updated')}\r\n"
    )
    w = _TiffWriter(byte_order=byte_order, big=big)
    w.add_image(
        width=128, height=32, strips=[_filler(4096, 1)],
        extra=(
            (65420, 4, [1]),
            (65421, 9, [20]),
            (65427, 2, t("ndpi.barcode").encode("ascii") + b"\0"),
            (65449, 2, props.encode("ascii") + b"\0"),
        ),
    )
    w.add_image(
        width=32, height=8, strips=[_filler(256, 2)],
        extra=((65420, 4, [1]), (65421, 9, [5])),
    )
    total = 128 * 24
    w.add_image(
        width=128, height=24,
        strips=[
            _label_payload(
                profile.pixel_pattern,
                [planted["macro_note_1"], planted["macro_note_2"], planted["macro_note_3"]],
                total, 3,
            )
        ],
        extra=((65420, 4, [1]), (65421, 9, [-1])),
    )
    base = t("ndpi.disk_name")
    primary = os.path.join(out_dir, base + ".ndpi")
    _write(primary, w.render())
    manifest, sentinel_file = _emit_support_files(
        out_dir, base, VendorFormat.HAMAMATSU, [primary], planted,
        {"byte_order": byte_order, "big_tiff": str(big)},
    )
    return Fixture(
        vendor=VendorFormat.HAMAMATSU,
        primary=primary,
        files=[primary],
        manifest=manifest,
        sentinel_file=sentinel_file,
        planted=planted,
        expected_images={"tissue": 2, "label+macro": 1},
        expected_attr_keys={"Reference", "Created", "Updated", "NDP.S/N", "Macro.S/N"},
    )


def _forge_ventana(out_dir: str, profile: SentinelProfile, byte_order: str, big: bool) -> Fixture:
    t = profile.token
    planted = {
        "disk_name": t("bif.disk_name").encode(),
        "jp2": t("bif.jp2").encode(),
        "basename": t("bif.basename").encode(),
        "barcode1d": t("bif.barcode1d").encode(),
        "barcode2d": t("bif.barcode2d").encode(),
        "unit": t("bif.unit").encode(),
        "operator": t("bif.operator").encode(),
        "builddate": t("bif.builddate").encode(),
        "label_note_1": t("bif.label_note_1").encode(),
        "pixel_pattern": profile.pixel_pattern,
    }
    iscan = (
        '<?xml version="1.0" encoding="UTF-8"?>'
        f'<iScan UnitNumber="{t("bif.unit")}" UserName="{t("bif.operator")}"'
        f' BuildDate="{t("bif.builddate")}" JP2FileName="{t("bif.jp2")}"'
        f' BaseName="{t("bif.basename")}" Barcode1D="{t("bif.barcode1d")}"'
        f' Barcode2D="{t("bif.barcode2d")}" Magnification="20" ScanMode="1"/>'
    )
    w = _TiffWriter(byte_order=byte_order, big=big)
    w.add_image(
        width=128, height=32, strips=[_filler(4096, 1)],
        desc="Level 0",
        extra=((700, 7, iscan.encode("ascii")),),
    )
    w.add_image(width=32, height=8, strips=[_filler(256, 2)], desc="Thumbnail")
    total = 64 * 32
    w.add_image(
        width=64, height=32,
        strips=[_label_payload(profile.pixel_pattern, [planted["label_note_1"]], total, 3)],
        desc="Label Image",
    )
    base = t("bif.disk_name")
    primary = os.path.join(out_dir, base + ".bif")
    _write(primary, w.render())
    manifest, sentinel_file = _emit_support_files(
        out_dir, base, VendorFormat.VENTANA, [primary], planted,
        {"byte_order": byte_order, "big_tiff": str(big)},
    )
    return Fixture(
        vendor=VendorFormat.VENTANA,
        primary=primary,
        files=[primary],
        manifest=manifest,
        sentinel_file=sentinel_file,
        planted=planted,
        expected_images={"tissue": 1, "thumbnail": 1, "label+macro": 1},
        expected_attr_keys={
            "JP2FileName", "BaseName", "Barcode1D", "Barcode2D",
            "UnitNumber", "UserName", "BuildDate",
        },
    )


def _forge_generic(out_dir: str, profile: SentinelProfile, byte_order: str, big: bool) -> Fixture:
    t = profile.token
    planted = {
        "disk_name": t("tiff.disk_name").encode(),
        "datetime": t("tiff.datetime").encode(),
        "artist": t("tiff.artist").encode(),
        "host": t("tiff.host").encode(),
        "label_note_1": t("tiff.label_note_1").encode(),
        "pixel_pattern": profile.pixel_pattern,
    }
    w = _TiffWriter(byte_order=byte_order, big=big)
    w.add_image(
        width=64, height=32, strips=[_filler(2048, 1)],
        extra=(
            (306, 2, t("tiff.datetime").encode("ascii") + b"\0"),
            (315, 2, t("tiff.artist").encode("ascii") + b"\0"),
            (316, 2, t("tiff.host").encode("ascii") + b"\0"),
        ),
    )
    total = 32 * 32
    w.add_image(
        width=32, height=32,
        strips=[_label_payload(profile.pixel_pattern, [planted["label_note_1"]], total, 2)],
        desc="label 32x32",
    )
    base = t("tiff.disk_name")
    primary = os.path.join(out_dir, base + ".tif")
    _write(primary, w.render())
    manifest, sentinel_file = _emit_support_files(
        out_dir, base, VendorFormat.GENERIC_TIFF, [primary], planted,
        {"byte_order": byte_order, "big_tiff": str(big)},
    )
    return Fixture(
        vendor=VendorFormat.GENERIC_TIFF,
        primary=primary,
        files=[primary],
        manifest=manifest,
        sentinel_file=sentinel_file,
        planted=planted,
        expected_images={"tissue": 1, "label": 1},
        expected_attr_keys={"DateTime", "Artist", "HostComputer"},
    )


def _forge_mirax(out_dir: str, profile: SentinelProfile) -> Fixture:
    t = profile.token
    planted = {
        "disk_name": t("mrxs.disk_name").encode(),
        "slide_name": t("mrxs.slide_name").encode(),
        "slide_id": t("mrxs.slide_id").encode(),
        "project": t("mrxs.project").encode(),
        "created": t("mrxs.created").encode(),
        "created_utc": t("mrxs.created_utc").encode(),
        "hardware_id": t("mrxs.hardware_id").encode(),
        "profile_name": t("mrxs.profile_name").encode(),
        "barcode_note": t("mrxs.barcode_note").encode(),
        "pixel_pattern": profile.pixel_pattern,
    }
    base = t("mrxs.disk_name")
    stub = os.path.join(out_dir, base + ".mrxs")
    slide_dir = os.path.join(out_dir, base)
    os.makedirs(slide_dir, exist_ok=True)

    data0 = _filler(2048, 1) + _filler(2048, 2)
    label_blob = _label_payload(profile.pixel_pattern, [planted["barcode_note"]], 1024, 3)
    macro_blob = _filler(1536, 4)
    data1 = label_blob + macro_blob

    layers = ["Scan data layer", "ScanDataLayer_SlideBarcode", "ScanDataLayer_SlideThumbnail"]
    records = [
        (layers[0], 0, 0, 2048),
        (layers[0], 0, 2048, 2048),
        (layers[1], 1, 0, len(label_blob)),
        (layers[2], 1, len(label_blob), len(macro_blob)),
    ]
    index = struct.pack("<I", len(records))
    for name, fidx, off, length in records:
        index += name.encode("ascii").ljust(32, b"\0") + struct.pack("<IQQ", fidx, off, length)

    slidedat_lines = [
        "[GENERAL]",
        "SLIDE_VERSION=1.9",
        f"SLIDE_ID={t('mrxs.slide_id')}",
        f"SLIDE_NAME={t('mrxs.slide_name')}",
        f"PROJECT_NAME={t('mrxs.project')}",
        f"SLIDE_CREATIONDATETIME={t('mrxs.created')}",
        f"SLIDE_UTC_CREATIONDATETIME={t('mrxs.created_utc')}",
        f"SCANNER_HARDWARE_ID={t('mrxs.hardware_id')}",
        f"ProfileName={t('mrxs.profile_name')}",
        "[HIERARCHICAL]",
        "LAYER_COUNT=3",
        f"LAYER_0_NAME={layers[0]}",
        f"LAYER_1_NAME={layers[1]}",
        f"LAYER_2_NAME={layers[2]}",
        f"INDEX_RECORD_COUNT={len(records)}",
        "INDEXFILE=Index.dat",
        "[DATAFILE]",
        "FILE_COUNT=2",
        "FILE_0=Data_0000.dat",
        "FILE_1=Data_0001.dat",
    ]
    slidedat = b"\xef\xbb\xbf" + ("\r\n".join(slidedat_lines) + "\r\n").encode("utf-8")

    _write(stub, _filler(64, 9))
    _write(os.path.join(slide_dir, "Slidedat.ini"), slidedat)
    _write(os.path.join(slide_dir, "Index.dat"), index)
    _write(os.path.join(slide_dir, "Data_0000.dat"), data0)
    _write(os.path.join(slide_dir, "Data_0001.dat"), data1)

    files = [
        stub,
        os.path.join(slide_dir, "Slidedat.ini"),
        os.path.join(slide_dir, "Index.dat"),
        os.path.join(slide_dir, "Data_0000.dat"),
        os.path.join(slide_dir, "Data_0001.dat"),
    ]
    manifest, sentinel_file = _emit_support_files(
        out_dir, base, VendorFormat.MIRAX, files, planted, {"layers": str(len(layers))}
    )
    return Fixture(
        vendor=VendorFormat.MIRAX,
        primary=stub,
        files=files,
        manifest=manifest,
        sentinel_file=sentinel_file,
        planted=planted,
        expected_images={"tissue": 1, "label": 1, "macro": 1},
        expected_attr_keys={
            "SLIDE_NAME", "SLIDE_ID", "PROJECT_NAME", "SLIDE_CREATIONDATETIME",
            "SLIDE_UTC_CREATIONDATETIME", "SCANNER_HARDWARE_ID", "ProfileName",
        },
    )


def _forge_isyntax(out_dir: str, profile: SentinelProfile) -> Fixture:
    t = profile.token
    acq_dt = profile.digit_token("isyntax.acq_dt", 14)
    rack = profile.digit_token("isyntax.rack", 6)
    slot = profile.digit_token("isyntax.slot", 6)
    planted = {
        "disk_name": t("isyntax.disk_name").encode(),
        "serial": t("isyntax.serial").encode(),
        "operator": t("isyntax.operator").encode(),
        "barcode": t("isyntax.barcode").encode(),
        "acq_dt": acq_dt.encode(),
        "rack": rack.encode(),
        "slot": slot.encode(),
        # base64 masks the motif from a blind byte scan; it is planted
        # in the decoded payload and checked there by the tests
        "pixel_pattern": profile.pixel_pattern,
    }
    label_raw = profile.pixel_pattern + _filler(3072 - PATTERN_LEN, 1)
    macro_raw = _filler(2048, 2)
    label_b64 = base64.b64encode(label_raw).decode("ascii")
    macro_b64 = base64.b64encode(macro_raw).decode("ascii")
    xml = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        '<DataObject ObjectType="DPUfsImport">\n'
        '  <attribute key="PIM_DP_IMAGE_TYPE" type="string">WSI</attribute>\n'
        f'  <attribute key="DICOM_ACQUISITION_DATETIME" type="datetime">{acq_dt}</attribute>\n'
        f'  <attribute key="DICOM_DEVICE_SERIAL_NUMBER" type="string">{t("isyntax.serial")}</attribute>\n'
        f'  <attribute key="PIIM_DP_SCANNER_OPERATOR_ID" type="string">{t("isyntax.operator")}</attribute>\n'
        f'  <attribute key="PIIM_DP_SCANNER_RACK_NUMBER" type="int" min="1" max="999999">{rack}</attribute>\n'
        f'  <attribute key="PIIM_DP_SCANNER_SLOT_NUMBER" type="int" min="1" max="999999">{slot}</attribute>\n'
        f'  <attribute key="PIM_DP_UFS_BARCODE" type="string">{t("isyntax.barcode")}</attribute>\n'
        '  <image type="label">\n'
        '    <dimensions width="64" height="48"/>\n'
        f'    <data encoding="base64">{label_b64}</data>\n'
        "  </image>\n"
        '  <image type="macro">\n'
        '    <dimensions width="128" height="16"/>\n'
        f'    <data encoding="base64">{macro_b64}</data>\n'
        "  </image>\n"
        '  <image type="wsi">\n'
        '    <dimensions width="4096" height="4096"/>\n'
        '    <data encoding="offset">0</data>\n'
        "  </image>\n"
        "</DataObject>\n"
    )
    base = t("isyntax.disk_name")
    primary = os.path.join(out_dir, base + ".isyntax")
    _write(primary, xml.encode("utf-8") + b"\x04" + _filler(4096, 5))
    manifest, sentinel_file = _emit_support_files(
        out_dir, base, VendorFormat.PHILIPS_ISYNTAX, [primary], planted, {}
    )
    return Fixture(
        vendor=VendorFormat.PHILIPS_ISYNTAX,
        primary=primary,
        files=[primary],
        manifest=manifest,
        sentinel_file=sentinel_file,
        planted=planted,
        expected_images={"label": 1, "macro": 1, "tissue": 1},
        expected_attr_keys={
            "PIM_DP_UFS_BARCODE", "PIIM_DP_SCANNER_OPERATOR_ID",
            "PIIM_DP_SCANNER_RACK_NUMBER", "PIIM_DP_SCANNER_SLOT_NUMBER",
            "DICOM_ACQUISITION_DATETIME", "DICOM_DEVICE_SERIAL_NUMBER",
        },
    )


def forge_fixture(
    vendor: VendorFormat | str,
    out_dir: str,
    seed: int = 0,
    profile: SentinelProfile | None = None,
    byte_order: str = "<",
    big: bool = False,
) -> Fixture:
    """Build one synthetic slide of the requested vendor in out_dir."""
    if isinstance(vendor, str):
        try:
            vendor = VendorFormat(vendor)
        except ValueError as exc:
            raise UnsupportedFormat(f"no such format {vendor!r}") from exc
    profile = profile or default_profile(seed)
    os.makedirs(out_dir, exist_ok=True)
    if vendor == VendorFormat.APERIO:
        return _forge_aperio(out_dir, profile, byte_order, big)
    if vendor == VendorFormat.HAMAMATSU:
        return _forge_hamamatsu(out_dir, profile, byte_order, big)
    if vendor == VendorFormat.VENTANA:
        return _forge_ventana(out_dir, profile, byte_order, big)
    if vendor == VendorFormat.GENERIC_TIFF:
        return _forge_generic(out_dir, profile, byte_order, big)
    if vendor == VendorFormat.MIRAX:
        return _forge_mirax(out_dir, profile)
    if vendor == VendorFormat.PHILIPS_ISYNTAX:
        return _forge_isyntax(out_dir, profile)
    raise UnsupportedFormat(f"cannot forge a {vendor.value} fixture")


FORGEABLE = (
    VendorFormat.APERIO,
    VendorFormat.HAMAMATSU,
    VendorFormat.VENTANA,
    VendorFormat.MIRAX,
    VendorFormat.PHILIPS_ISYNTAX,
    VendorFormat.GENERIC_TIFF,
)
