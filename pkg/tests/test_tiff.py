"""Structure tests for the TIFF walker.

Fixture bytes are assembled by hand with struct so every expected
offset comes from independent arithmetic, not from the code under
test. Pillow serves as a second, unrelated reader where it can.
"""

import io
import struct

import pytest
from hypothesis import given, strategies as st
from PIL import Image

from wsianon.byteio import MemoryStore
from wsianon.errors import CorruptStructure, PlanConflict, TagAbsent, UnsupportedFormat
from wsianon.tiff import (
    PatchPlan,
    image_segments,
    parse_chain,
    parse_header,
    plan_unlink_ifds,
    plan_wipe_image,
)


def _pad_even(buf):
    if len(buf) % 2:
        buf.append(0)


def build_gray_tiff(bo="<", big=False, images=None):
    """Assemble a baseline grayscale TIFF, one strip set per image.

    images: list of dicts with width, height, strips (list of payload
    bytes), rows_per_strip, and optional desc. Returns (data, info)
    where info[i] records the offsets this builder chose.
    """
    buf = bytearray(16 if big else 8)
    off_fmt = bo + ("Q" if big else "I")
    infos = []
    for img in images:
        rec = {"strips": []}
        for payload in img["strips"]:
            _pad_even(buf)
            rec["strips"].append((len(buf), len(payload)))
            buf += payload
        desc = img.get("desc")
        if desc is not None:
            raw = desc.encode("ascii") + b"\0"
            _pad_even(buf)
            rec["desc"] = (len(buf), len(raw))
            buf += raw
        n_strips = len(img["strips"])
        if not big and n_strips > 1:
            _pad_even(buf)
            rec["strip_array"] = len(buf)
            for o, _ in rec["strips"]:
                buf += struct.pack(bo + "I", o)
            rec["count_array"] = len(buf)
            for _, n in rec["strips"]:
                buf += struct.pack(bo + "I", n)

        entries = []

        def short_entry(tag, v):
            entries.append((tag, 3, 1, struct.pack(bo + "H", v)))

        short_entry(256, img["width"])
        short_entry(257, img["height"])
        short_entry(258, 8)
        short_entry(259, 1)
        short_entry(262, 1)
        if desc is not None:
            entries.append((270, 2, rec["desc"][1], struct.pack(off_fmt, rec["desc"][0])))
        if n_strips == 1:
            # inline values are left-justified in the field, so a lone
            # LONG is packed at its own width even in bigtiff
            entries.append((273, 4, 1, struct.pack(bo + "I", rec["strips"][0][0])))
        elif big:
            # two LONGs fit inside a bigtiff value field
            entries.append((273, 4, n_strips, struct.pack(bo + f"{n_strips}I", *[o for o, _ in rec["strips"]])))
        else:
            entries.append((273, 4, n_strips, struct.pack(bo + "I", rec["strip_array"])))
        short_entry(277, 1)
        short_entry(278, img["rows_per_strip"])
        if n_strips == 1:
            entries.append((279, 4, 1, struct.pack(bo + "I", rec["strips"][0][1])))
        elif big:
            entries.append((279, 4, n_strips, struct.pack(bo + f"{n_strips}I", *[n for _, n in rec["strips"]])))
        else:
            entries.append((279, 4, n_strips, struct.pack(bo + "I", rec["count_array"])))

        _pad_even(buf)
        rec["ifd"] = len(buf)
        if big:
            buf += struct.pack(bo + "Q", len(entries))
            for tag, typ, count, value in entries:
                buf += struct.pack(bo + "HHQ", tag, typ, count) + value.ljust(8, b"\0")
            rec["next_field"] = len(buf)
            buf += struct.pack(bo + "Q", 0)
        else:
            buf += struct.pack(bo + "H", len(entries))
            for tag, typ, count, value in entries:
                buf += struct.pack(bo + "HHI", tag, typ, count) + value.ljust(4, b"\0")
            rec["next_field"] = len(buf)
            buf += struct.pack(bo + "I", 0)
        infos.append(rec)

    if big:
        buf[0:2] = b"II" if bo == "<" else b"MM"
        struct.pack_into(bo + "HHHQ", buf, 2, 43, 8, 0, infos[0]["ifd"])
    else:
        buf[0:2] = b"II" if bo == "<" else b"MM"
        struct.pack_into(bo + "HI", buf, 2, 42, infos[0]["ifd"])
    for a, b in zip(infos, infos[1:]):
        struct.pack_into(off_fmt, buf, a["next_field"], b["ifd"])
    return bytes(buf), infos


def two_image_spec():
    return [
        {"width": 2, "height": 8, "rows_per_strip": 5, "strips": [b"\x11" * 10, b"\x22" * 6],
         "desc": "sample description one"},
        {"width": 2, "height": 4, "rows_per_strip": 4, "strips": [b"\x33" * 8]},
    ]


@pytest.mark.parametrize("bo", ["<", ">"])
@pytest.mark.parametrize("big", [False, True])
def test_parse_chain_matches_hand_layout(bo, big):
    data, infos = build_gray_tiff(bo=bo, big=big, images=two_image_spec())
    src = MemoryStore(data)
    header = parse_header(src)
    assert header.byte_order == bo
    assert header.big is big
    assert header.first_ifd_offset == infos[0]["ifd"]
    dirs, warnings = parse_chain(src, header)
    assert warnings == []
    assert [d.offset for d in dirs] == [i["ifd"] for i in infos]
    assert dirs[0].link_field_offset == (8 if big else 4)
    assert dirs[0].next_field_offset == infos[0]["next_field"]
    assert dirs[1].link_field_offset == infos[0]["next_field"]
    assert dirs[1].next_offset == 0
    assert image_segments(src, header, dirs[0]) == infos[0]["strips"]
    assert image_segments(src, header, dirs[1]) == infos[1]["strips"]
    desc = dirs[0].require(270)
    assert desc.ascii_value(src, header) == "sample description one"
    off, size = desc.value_region(header)
    assert (off, size) == tuple(infos[0]["desc"])


def test_inline_vs_offsite_value_regions():
    data, infos = build_gray_tiff(images=two_image_spec())
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    strips = dirs[0].require(273)
    assert not strips.is_inline(header)
    assert strips.value_region(header) == (infos[0]["strip_array"], 8)
    assert strips.int_values(src, header) == [o for o, _ in infos[0]["strips"]]
    single = dirs[1].require(273)
    assert single.is_inline(header)
    assert single.int_values(src, header) == [infos[1]["strips"][0][0]]

    big_data, big_infos = build_gray_tiff(big=True, images=two_image_spec())
    bsrc = MemoryStore(big_data)
    bheader = parse_header(bsrc)
    bdirs, _ = parse_chain(bsrc, bheader)
    bstrips = bdirs[0].require(273)
    # count 2 LONG occupies exactly the 8-byte bigtiff value field
    assert bstrips.is_inline(bheader)
    assert bstrips.int_values(bsrc, bheader) == [o for o, _ in big_infos[0]["strips"]]


def test_pillow_agrees_on_fixture():
    data, _ = build_gray_tiff(images=two_image_spec())
    im = Image.open(io.BytesIO(data))
    assert im.n_frames == 2
    assert im.size == (2, 8)
    assert im.getpixel((0, 0)) == 0x11


@pytest.mark.parametrize(
    "head,exc",
    [
        (b"", UnsupportedFormat),
        (b"II*\0", UnsupportedFormat),
        (b"XX" + struct.pack("<HI", 42, 8) + b"\0" * 8, UnsupportedFormat),
        (b"II" + struct.pack("<HI", 41, 8) + b"\0" * 8, UnsupportedFormat),
        # bigtiff with offset size 4
        (b"II" + struct.pack("<HHHQ", 43, 4, 0, 16) + b"\0" * 8, CorruptStructure),
        # bigtiff with nonzero reserved word
        (b"II" + struct.pack("<HHHQ", 43, 8, 7, 16) + b"\0" * 8, CorruptStructure),
        # first directory offset beyond end of file
        (b"II" + struct.pack("<HI", 42, 9999), CorruptStructure),
        # first directory offset inside the header
        (b"II" + struct.pack("<HI", 42, 4) + b"\0" * 8, CorruptStructure),
    ],
)
def test_parse_header_rejects(head, exc):
    with pytest.raises(exc):
        parse_header(MemoryStore(head))


def test_chain_cycle_detected():
    data, infos = build_gray_tiff(images=two_image_spec())
    buf = bytearray(data)
    struct.pack_into("<I", buf, infos[1]["next_field"], infos[0]["ifd"])
    src = MemoryStore(bytes(buf))
    with pytest.raises(CorruptStructure, match="loops"):
        parse_chain(src, parse_header(src))


def test_chain_next_offset_beyond_eof():
    data, infos = build_gray_tiff(images=two_image_spec())
    buf = bytearray(data)
    struct.pack_into("<I", buf, infos[1]["next_field"], len(data) + 64)
    src = MemoryStore(bytes(buf))
    with pytest.raises(CorruptStructure, match="outside file"):
        parse_chain(src, parse_header(src))


def test_truncated_directory():
    data, infos = build_gray_tiff(images=two_image_spec())
    src = MemoryStore(data[: infos[1]["ifd"] + 10])
    header = parse_header(src)
    with pytest.raises(CorruptStructure, match="beyond end"):
        parse_chain(src, header)


def _minimal_ifd_file(entries, bo="<"):
    """One-IFD classic file with caller-supplied raw entries."""
    buf = bytearray(b"II" + struct.pack(bo + "HI", 42, 8))
    buf += struct.pack(bo + "H", len(entries))
    for tag, typ, count, value in entries:
        buf += struct.pack(bo + "HHI", tag, typ, count) + value.ljust(4, b"\0")
    buf += struct.pack(bo + "I", 0)
    return bytes(buf)


def test_strip_count_mismatch():
    data = _minimal_ifd_file(
        [
            (273, 4, 1, struct.pack("<I", 8)),
            (279, 3, 2, struct.pack("<HH", 1, 1)),
        ]
    )
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    with pytest.raises(CorruptStructure, match="offsets but"):
        image_segments(src, header, dirs[0])


def test_strip_without_counts():
    data = _minimal_ifd_file([(273, 4, 1, struct.pack("<I", 8))])
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    with pytest.raises(CorruptStructure, match="together"):
        image_segments(src, header, dirs[0])


def test_segment_beyond_eof():
    data = _minimal_ifd_file(
        [
            (273, 4, 1, struct.pack("<I", 8)),
            (279, 4, 1, struct.pack("<I", 50000)),
        ]
    )
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    with pytest.raises(CorruptStructure, match="exceeds file length"):
        image_segments(src, header, dirs[0])


def test_no_layout_at_all():
    data = _minimal_ifd_file([(256, 3, 1, struct.pack("<H", 4))])
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    with pytest.raises(TagAbsent):
        image_segments(src, header, dirs[0])


def test_zero_entry_directory_warns():
    data = _minimal_ifd_file([])
    src = MemoryStore(data)
    dirs, warnings = parse_chain(src, parse_header(src))
    assert len(dirs) == 1
    assert any("no entries" in w for w in warnings)


def test_unsorted_tags_warn():
    data = _minimal_ifd_file(
        [
            (279, 4, 1, struct.pack("<I", 0)),
            (273, 4, 1, struct.pack("<I", 8)),
        ]
    )
    src = MemoryStore(data)
    _, warnings = parse_chain(src, parse_header(src))
    assert any("unsorted" in w for w in warnings)


def test_wipe_image_zeroes_only_payload():
    data, infos = build_gray_tiff(images=two_image_spec())
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    plan = plan_wipe_image(src, header, dirs[0])
    plan.apply(src)
    out = src.getvalue()
    expected = bytearray(data)
    for o, n in infos[0]["strips"]:
        expected[o : o + n] = b"\0" * n
    assert out == bytes(expected)
    # second image untouched, file still a readable TIFF
    im = Image.open(io.BytesIO(out))
    assert im.getpixel((0, 0)) == 0
    im.seek(1)
    assert im.getpixel((0, 0)) == 0x33


def test_wipe_merges_shared_segments():
    # two strip entries pointing at the same span must not conflict
    payload = b"\x55" * 12
    buf = bytearray(b"II" + struct.pack("<HI", 42, 0))
    buf += payload  # at offset 8
    arr_off = len(buf)
    buf += struct.pack("<II", 8, 8)
    cnt_off = len(buf)
    buf += struct.pack("<II", 12, 12)
    ifd = len(buf)
    struct.pack_into("<I", buf, 4, ifd)
    entries = [
        (273, 4, 2, struct.pack("<I", arr_off)),
        (279, 4, 2, struct.pack("<I", cnt_off)),
    ]
    buf += struct.pack("<H", len(entries))
    for tag, typ, count, value in entries:
        buf += struct.pack("<HHI", tag, typ, count) + value
    buf += struct.pack("<I", 0)
    src = MemoryStore(bytes(buf))
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    plan = plan_wipe_image(src, header, dirs[0])
    assert len(plan.patches) == 1
    plan.apply(src)
    assert src.read_exact(8, 12) == b"\0" * 12


@pytest.mark.parametrize("big", [False, True])
def test_unlink_middle_directory(big):
    images = two_image_spec() + [
        {"width": 2, "height": 2, "rows_per_strip": 2, "strips": [b"\x44" * 4]}
    ]
    data, infos = build_gray_tiff(big=big, images=images)
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    plan = plan_unlink_ifds(src, header, dirs, {1})
    assert len(plan.patches) == 1
    assert plan.patches[0].offset == infos[0]["next_field"]
    plan.apply(src)
    dirs2, _ = parse_chain(src, parse_header(src))
    assert [d.offset for d in dirs2] == [infos[0]["ifd"], infos[2]["ifd"]]
    im = Image.open(io.BytesIO(src.getvalue()))
    assert im.n_frames == 2


def test_unlink_first_directory_rewrites_header_link():
    data, infos = build_gray_tiff(images=two_image_spec())
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    plan = plan_unlink_ifds(src, header, dirs, {0})
    assert len(plan.patches) == 1
    assert plan.patches[0].offset == 4
    plan.apply(src)
    header2 = parse_header(src)
    assert header2.first_ifd_offset == infos[1]["ifd"]
    dirs2, _ = parse_chain(src, header2)
    assert len(dirs2) == 1


def test_unlink_last_directory_terminates_chain():
    data, infos = build_gray_tiff(images=two_image_spec())
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    plan_unlink_ifds(src, header, dirs, {1}).apply(src)
    dirs2, _ = parse_chain(src, parse_header(src))
    assert [d.offset for d in dirs2] == [infos[0]["ifd"]]
    assert dirs2[0].next_offset == 0


def test_unlink_two_adjacent_directories():
    images = two_image_spec() + [
        {"width": 2, "height": 2, "rows_per_strip": 2, "strips": [b"\x44" * 4]}
    ]
    data, infos = build_gray_tiff(images=images)
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    plan_unlink_ifds(src, header, dirs, {1, 2}).apply(src)
    dirs2, _ = parse_chain(src, parse_header(src))
    assert [d.offset for d in dirs2] == [infos[0]["ifd"]]


def test_unlink_out_of_range_index():
    data, _ = build_gray_tiff(images=two_image_spec())
    src = MemoryStore(data)
    header = parse_header(src)
    dirs, _ = parse_chain(src, header)
    with pytest.raises(PlanConflict):
        plan_unlink_ifds(src, header, dirs, {5})


def test_plan_rejects_overlap():
    plan = PatchPlan()
    plan.add(10, b"aaaa", note="a")
    plan.add(12, b"bb", note="b")
    with pytest.raises(PlanConflict):
        plan.assert_no_overlap()


def test_plan_validates_bounds_before_writing():
    store = MemoryStore(b"\xff" * 16)
    plan = PatchPlan()
    plan.add(0, b"ok")
    plan.add(30, b"far")
    before = store.getvalue()
    with pytest.raises(Exception):
        plan.apply(store)
    # nothing may have been written if any patch was invalid
    assert store.getvalue() == before


@given(
    st.lists(st.tuples(st.integers(0, 255), st.integers(1, 8)), max_size=6),
    st.integers(64, 128),
)
def test_disjoint_patches_apply_exactly(raw, size):
    # lay the requested chunks end to end with one-byte gaps
    store = MemoryStore(b"\xee" * size)
    expected = bytearray(b"\xee" * size)
    plan = PatchPlan()
    cursor = 0
    for byte, n in raw:
        if cursor + n + 1 > size:
            break
        plan.add(cursor, bytes([byte]) * n)
        expected[cursor : cursor + n] = bytes([byte]) * n
        cursor += n + 1
    plan.apply(store)
    assert store.getvalue() == bytes(expected)


@given(st.integers(0, 40), st.integers(1, 10), st.integers(0, 9))
def test_overlapping_patches_always_rejected(start, length, delta):
    plan = PatchPlan()
    plan.add(start, b"x" * length)
    plan.add(start + min(delta, length - 1), b"y")
    with pytest.raises(PlanConflict):
        plan.assert_no_overlap()
