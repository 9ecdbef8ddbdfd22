import pytest

from wsianon.byteio import MemoryStore
from wsianon.detect import VendorFormat
from wsianon.errors import LabelNotSeparable
from wsianon.tiff import TAG_IMAGE_DESCRIPTION, image_segments
from wsianon.vendors import handler_for
from wsianon.vendors.base import (
    FILL_BYTE,
    KIND_LABEL,
    KIND_LABEL_MACRO,
    KIND_MACRO,
    KIND_THUMBNAIL,
    KIND_TISSUE,
    PlanOptions,
    description_token_kind,
    find_key_values,
    is_blank_value,
)

from conftest import TIFF_VENDORS


def open_fixture(fx):
    handler = handler_for(fx.vendor)
    data = open(fx.primary, "rb").read()
    store = MemoryStore(data)
    slide = handler.open_store(store, name=fx.primary.rsplit("/", 1)[-1])
    return handler, slide, store


def kinds_of(scan):
    out = {}
    for img in scan.images:
        out[img.kind] = out.get(img.kind, 0) + 1
    return out


# --- shared text helpers ----------------------------------------------------


def test_blank_values():
    assert is_blank_value(b"")
    assert is_blank_value(b"XXXX")
    assert is_blank_value(b"X X \r\n\0")
    assert not is_blank_value(b"XXXo")
    assert not is_blank_value(b"name")


def test_find_key_values_pipe_banner():
    data = b"Aperio thing\r\nfoo|User = sarah|Time = 09:33:21|ScanScope ID = SS42"
    spans = find_key_values(data, "User")
    assert [data[o:o + n] for o, n in spans] == [b"sarah"]
    spans = find_key_values(data, "Time")
    assert [data[o:o + n] for o, n in spans] == [b"09:33:21"]


def test_find_key_values_requires_word_boundary():
    data = b"ScanScope ID = A1|SuperUser = root|User = real"
    spans = find_key_values(data, "User")
    assert [data[o:o + n] for o, n in spans] == [b"real"]


def test_find_key_values_xml_attribute_form():
    data = b'<root UserName="greta" Barcode1D="B-77" />'
    spans = find_key_values(data, "UserName")
    assert [data[o:o + n] for o, n in spans] == [b"greta"]
    assert find_key_values(data, "Name") == []


def test_description_token_kind():
    assert description_token_kind("label 64x48") == KIND_LABEL
    assert description_token_kind("macro ...") == KIND_MACRO
    assert description_token_kind("Thumbnail image") == KIND_THUMBNAIL
    assert description_token_kind("level 0 tissue") is None
    assert description_token_kind("") is None


# --- classification ---------------------------------------------------------


def test_aperio_classification(forge):
    fx = forge("leica-aperio", seed="cls1")
    handler, slide, _ = open_fixture(fx)
    scan = handler.scan(slide)
    assert kinds_of(scan) == fx.expected_images
    # the tiled pyramid image is the tissue
    tissue = [i for i in scan.images if i.kind == KIND_TISSUE][0]
    assert tissue.index == 0


def test_hamamatsu_classification_by_lens_value(forge):
    fx = forge("hamamatsu-ndpi", seed="cls2")
    handler, slide, _ = open_fixture(fx)
    scan = handler.scan(slide)
    assert kinds_of(scan) == {KIND_TISSUE: 2, KIND_LABEL_MACRO: 1}


def test_ventana_classification_by_description(forge):
    fx = forge("roche-ventana", seed="cls3")
    handler, slide, _ = open_fixture(fx)
    scan = handler.scan(slide)
    assert kinds_of(scan) == {KIND_TISSUE: 1, KIND_THUMBNAIL: 1, KIND_LABEL_MACRO: 1}


def test_generic_classification(forge):
    fx = forge("generic-tiff", seed="cls4")
    handler, slide, _ = open_fixture(fx)
    scan = handler.scan(slide)
    assert kinds_of(scan) == {KIND_TISSUE: 1, KIND_LABEL: 1}


@pytest.mark.parametrize("vendor", TIFF_VENDORS)
def test_scan_finds_every_cataloged_key(forge, vendor):
    fx = forge(vendor, seed="keys")
    handler, slide, _ = open_fixture(fx)
    scan = handler.scan(slide)
    assert {a.key for a in scan.attributes} >= fx.expected_attr_keys
    assert not any(a.blank for a in scan.attributes)


# --- destruction ------------------------------------------------------------


@pytest.mark.parametrize("vendor", TIFF_VENDORS)
@pytest.mark.parametrize("byte_order", ["<", ">"])
@pytest.mark.parametrize("big", [False, True])
def test_plan_apply_removes_label_and_blanks_attributes(forge, vendor, byte_order, big):
    fx = forge(vendor, seed="da1", byte_order=byte_order, big=big)
    handler, slide, store = open_fixture(fx)
    scan = handler.scan(slide)
    before = len(store.getvalue())

    work = handler.plan(slide, scan, PlanOptions())
    applied = handler.apply(slide, work)
    assert applied == len(work.patches)

    data = store.getvalue()
    assert len(data) == before  # in-place contract

    slide2 = handler.open_store(MemoryStore(data), name="x")
    scan2 = handler.scan(slide2)
    assert not any(i.kind in (KIND_LABEL, KIND_MACRO, KIND_LABEL_MACRO)
                   for i in scan2.images)
    for attr in scan2.attributes:
        assert attr.blank, f"{attr.key} still carries a value"

    # planted values must be gone from the raw bytes as well
    for role, needle in fx.planted.items():
        if role == "disk_name":
            continue
        assert needle not in data, f"{role} survived in file body"


@pytest.mark.parametrize("vendor", TIFF_VENDORS)
def test_tissue_payload_untouched(forge, vendor):
    fx = forge(vendor, seed="da2")
    handler, slide, store = open_fixture(fx)
    scan = handler.scan(slide)
    tissue_dirs = [i.index for i in scan.images if i.kind == KIND_TISSUE]
    original = store.getvalue()
    tissue_bytes = []
    for idx in tissue_dirs:
        segs = image_segments(store, slide.header, slide.chain[idx])
        tissue_bytes.append([original[o:o + n] for o, n in segs])

    handler.apply(slide, handler.plan(slide, scan, PlanOptions()))
    data = store.getvalue()

    store2 = MemoryStore(data)
    slide2 = handler.open_store(store2, name="x")
    scan2 = handler.scan(slide2)
    surviving = [i.index for i in scan2.images if i.kind == KIND_TISSUE]
    assert len(surviving) == len(tissue_dirs)
    for new_idx, payload in zip(surviving, tissue_bytes):
        segs = image_segments(store2, slide2.header, slide2.chain[new_idx])
        assert [data[o:o + n] for o, n in segs] == payload


def test_overwrite_only_keeps_directories(forge):
    fx = forge("leica-aperio", seed="ow1")
    handler, slide, store = open_fixture(fx)
    scan = handler.scan(slide)
    n_dirs = len(slide.chain)

    handler.apply(slide, handler.plan(slide, scan, PlanOptions(overwrite_only=True)))

    store2 = MemoryStore(store.getvalue())
    slide2 = handler.open_store(store2, name="x")
    assert len(slide2.chain) == n_dirs
    scan2 = handler.scan(slide2)
    label = [i for i in scan2.images if i.kind == KIND_LABEL][0]
    segs = image_segments(store2, slide2.header, slide2.chain[label.index])
    assert all(store2.getvalue()[o:o + n] == b"\0" * n for o, n in segs)


def test_keep_macro_preserved_on_aperio(forge):
    fx = forge("leica-aperio", seed="km1")
    handler, slide, store = open_fixture(fx)
    scan = handler.scan(slide)
    handler.apply(slide, handler.plan(slide, scan, PlanOptions(keep_macro=True)))

    slide2 = handler.open_store(MemoryStore(store.getvalue()), name="x")
    kinds = kinds_of(handler.scan(slide2))
    assert KIND_MACRO in kinds and KIND_LABEL not in kinds


@pytest.mark.parametrize("vendor", ["hamamatsu-ndpi", "roche-ventana"])
def test_keep_macro_refused_when_combined(forge, vendor):
    fx = forge(vendor, seed="km2")
    handler, slide, store = open_fixture(fx)
    before = store.getvalue()
    scan = handler.scan(slide)
    with pytest.raises(LabelNotSeparable):
        handler.plan(slide, scan, PlanOptions(keep_macro=True))
    assert store.getvalue() == before


@pytest.mark.parametrize("vendor", TIFF_VENDORS)
def test_second_pass_plans_no_structural_work(forge, vendor):
    fx = forge(vendor, seed="idem")
    handler, slide, store = open_fixture(fx)
    handler.apply(slide, handler.plan(slide, handler.scan(slide), PlanOptions()))
    once = store.getvalue()

    slide2 = handler.open_store(MemoryStore(once), name="x")
    work2 = handler.plan(slide2, handler.scan(slide2), PlanOptions())
    for patch in work2.patches:
        assert once[patch.offset:patch.offset + len(patch.data)] == patch.data


def test_attribute_fill_preserves_surrounding_text(forge):
    fx = forge("leica-aperio", seed="fill")
    handler, slide, store = open_fixture(fx)
    scan = handler.scan(slide)
    handler.apply(slide, handler.plan(slide, scan, PlanOptions()))
    data = store.getvalue()

    store2 = MemoryStore(data)
    slide2 = handler.open_store(store2, name="x")
    entry = slide2.chain[0].require(TAG_IMAGE_DESCRIPTION)
    desc = entry.value_bytes(store2, slide2.header)
    text = desc.decode("ascii", errors="replace")
    # keys survive, values do not
    for key in ("Filename", "User", "Date", "Time", "ScanScope ID"):
        assert key in text
    user = find_key_values(desc, "User")
    assert user and all(set(desc[o:o + n]) <= {ord(FILL_BYTE)} for o, n in user)
