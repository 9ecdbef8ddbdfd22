import hashlib
import os

import pytest

from wsianon.engine import (
    AnonymizationConfig,
    PolicyLevel,
    anonymize_bytes,
    anonymize_path,
    audit_path,
    level_from_checks,
)
from wsianon.errors import IoFailure, LabelNotSeparable, UnsupportedFormat
from wsianon.forge import load_sentinels, sensitivity_scan

from conftest import ALL_VENDORS


def tree_digest(paths):
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(p.encode())
        with open(p, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def output_files(report):
    out = [report.output_path]
    if report.vendor == "3dhistech-mirax":
        d = os.path.splitext(report.output_path)[0]
        out += [os.path.join(d, m) for m in sorted(os.listdir(d))]
    return out


# --- the end-to-end claim -----------------------------------------------------


@pytest.mark.parametrize("vendor", ALL_VENDORS)
def test_default_run_reaches_top_level_with_no_leaks(forge, vendor):
    fx = forge(vendor, seed="e2e")
    needles = load_sentinels(fx.sentinel_file)
    report = anonymize_path(fx.primary)

    assert report.vendor == vendor
    assert report.patches_applied == report.patches_planned
    assert sensitivity_scan(output_files(report), needles) == []
    outcome = audit_path(report.output_path, needles)
    assert outcome.level == int(PolicyLevel.L4_METADATA_CLEAN)
    assert outcome.sentinel_hits == []


@pytest.mark.parametrize("vendor", ALL_VENDORS)
def test_dirty_fixture_audits_at_the_bottom(forge, vendor):
    fx = forge(vendor, seed="dirty")
    outcome = audit_path(fx.primary, load_sentinels(fx.sentinel_file))
    assert outcome.level == int(PolicyLevel.L0_IDENTIFIABLE)
    assert not outcome.checks["filename_clean"]


# --- naming, backup, dry run ----------------------------------------------------


def test_output_gets_a_random_anonymous_name(forge):
    fx = forge("leica-aperio", seed="n1")
    report = anonymize_path(fx.primary)
    base = os.path.basename(report.output_path)
    assert base.startswith("anon_") and base.endswith(".svs")
    assert not os.path.exists(fx.primary)


def test_rename_disabled_keeps_the_name(forge):
    fx = forge("leica-aperio", seed="n2")
    report = anonymize_path(fx.primary, AnonymizationConfig(rename=False))
    assert report.output_path == fx.primary


def test_explicit_base_name(forge):
    fx = forge("leica-aperio", seed="n3")
    report = anonymize_path(fx.primary, AnonymizationConfig(new_base_name="case-007"))
    assert os.path.basename(report.output_path) == "case-007.svs"


def test_base_name_with_separators_rejected(forge):
    fx = forge("leica-aperio", seed="n4")
    with pytest.raises(ValueError):
        anonymize_path(fx.primary, AnonymizationConfig(new_base_name="../escape"))


def test_rename_collision_refused_before_any_change(forge):
    fx = forge("leica-aperio", seed="n5")
    taken = os.path.join(os.path.dirname(fx.primary), "taken.svs")
    open(taken, "wb").write(b"occupied")
    before = tree_digest(fx.files)
    with pytest.raises(IoFailure):
        anonymize_path(fx.primary, AnonymizationConfig(new_base_name="taken"))
    assert tree_digest(fx.files) == before


def test_mirax_rename_moves_stub_and_container(forge):
    fx = forge("3dhistech-mirax", seed="n6")
    report = anonymize_path(fx.primary, AnonymizationConfig(new_base_name="case-009"))
    assert os.path.basename(report.output_path) == "case-009.mrxs"
    assert os.path.isdir(os.path.splitext(report.output_path)[0])
    assert not os.path.exists(fx.primary)
    assert not os.path.exists(os.path.splitext(fx.primary)[0])


def test_backup_carries_original_content_under_anonymous_name(forge, tmp_path):
    fx = forge("leica-aperio", seed="b1")
    original = open(fx.primary, "rb").read()
    bdir = str(tmp_path / "bak")
    report = anonymize_path(fx.primary, AnonymizationConfig(backup_dir=bdir))
    assert report.backup_path is not None
    assert os.path.basename(report.backup_path) == os.path.basename(report.output_path)
    assert open(report.backup_path, "rb").read() == original
    assert open(report.output_path, "rb").read() != original


def test_mirax_backup_includes_container(forge, tmp_path):
    fx = forge("3dhistech-mirax", seed="b2")
    bdir = str(tmp_path / "bak")
    report = anonymize_path(fx.primary, AnonymizationConfig(backup_dir=bdir))
    backup_container = os.path.splitext(report.backup_path)[0]
    assert os.path.isdir(backup_container)
    assert sorted(os.listdir(backup_container)) == [
        "Data_0000.dat", "Data_0001.dat", "Index.dat", "Slidedat.ini",
    ]


@pytest.mark.parametrize("vendor", ALL_VENDORS)
def test_dry_run_touches_nothing(forge, vendor):
    fx = forge(vendor, seed="d1")
    before = tree_digest(fx.files)
    report = anonymize_path(fx.primary, AnonymizationConfig(dry_run=True))
    assert tree_digest(fx.files) == before
    assert report.dry_run and report.patches_applied == 0
    assert report.patches_planned > 0
    assert report.audit.level == int(PolicyLevel.L4_METADATA_CLEAN)


# --- policy options --------------------------------------------------------------


@pytest.mark.parametrize("vendor", ["hamamatsu-ndpi", "roche-ventana"])
def test_keep_macro_refusal_leaves_input_identical(forge, vendor):
    fx = forge(vendor, seed="p1")
    before = tree_digest(fx.files)
    with pytest.raises(LabelNotSeparable):
        anonymize_path(fx.primary, AnonymizationConfig(keep_macro=True))
    assert tree_digest(fx.files) == before


@pytest.mark.parametrize("vendor", ["leica-aperio", "3dhistech-mirax", "philips-isyntax"])
def test_keep_macro_still_reaches_top_level(forge, vendor):
    fx = forge(vendor, seed="p2")
    needles = load_sentinels(fx.sentinel_file)
    report = anonymize_path(fx.primary, AnonymizationConfig(keep_macro=True))
    assert any(i["kind"] == "macro" for i in report.kept_images)
    outcome = audit_path(report.output_path, needles)
    assert outcome.level == int(PolicyLevel.L4_METADATA_CLEAN)


def test_overwrite_only_stops_at_level_one(forge):
    fx = forge("leica-aperio", seed="p3")
    needles = load_sentinels(fx.sentinel_file)
    report = anonymize_path(fx.primary, AnonymizationConfig(overwrite_only=True))
    outcome = audit_path(report.output_path, needles)
    assert outcome.level == int(PolicyLevel.L1_FILENAME_CLEAN)
    assert not outcome.checks["label_unreferenced"]
    # payloads are gone even though the directories remain
    assert outcome.checks["label_destroyed"]
    assert outcome.checks["attributes_blank"]


# --- idempotence -----------------------------------------------------------------


@pytest.mark.parametrize("vendor", ALL_VENDORS)
def test_second_run_changes_nothing(forge, vendor):
    fx = forge(vendor, seed="i1")
    report = anonymize_path(fx.primary)
    once = tree_digest(output_files(report))
    report2 = anonymize_path(report.output_path, AnonymizationConfig(rename=False))
    assert tree_digest(output_files(report2)) == once


# --- byte-level entry point -------------------------------------------------------


def test_bytes_run_matches_file_run(forge):
    fx = forge("roche-ventana", seed="s1")
    raw = open(fx.primary, "rb").read()
    cfg = AnonymizationConfig(rename=False)
    out, report = anonymize_bytes(raw, name=os.path.basename(fx.primary), config=cfg)
    report_f = anonymize_path(fx.primary, cfg)
    assert out == open(report_f.output_path, "rb").read()
    assert report.vendor == report_f.vendor


def test_bytes_run_suggests_new_name(forge):
    fx = forge("leica-aperio", seed="s2")
    raw = open(fx.primary, "rb").read()
    out, report = anonymize_bytes(raw, name=os.path.basename(fx.primary))
    assert report.output_path.startswith("anon_")
    assert report.output_path.endswith(".svs")


def test_bytes_dry_run_returns_input_unchanged(forge):
    fx = forge("leica-aperio", seed="s3")
    raw = open(fx.primary, "rb").read()
    out, report = anonymize_bytes(raw, name="x.svs",
                                  config=AnonymizationConfig(dry_run=True))
    assert out == raw
    assert report.patches_applied == 0


def test_bytes_run_rejects_multi_file_container(forge):
    fx = forge("3dhistech-mirax", seed="s4")
    raw = open(fx.primary, "rb").read()
    with pytest.raises(UnsupportedFormat):
        anonymize_bytes(raw, name=os.path.basename(fx.primary))


def test_unknown_input_rejected(tmp_path):
    p = tmp_path / "not-a-slide.bin"
    p.write_bytes(b"nothing to see")
    with pytest.raises(UnsupportedFormat):
        anonymize_path(str(p))
    with pytest.raises(UnsupportedFormat):
        audit_path(str(p))


# --- the ladder -------------------------------------------------------------------


def test_level_requires_every_check_below_it():
    names = ["filename_clean", "label_unreferenced", "label_destroyed", "attributes_blank"]
    for k in range(5):
        checks = {n: i < k for i, n in enumerate(names)}
        assert int(level_from_checks(checks)) == k
    # a gap caps the level regardless of what passes above it
    assert int(level_from_checks(
        {"filename_clean": True, "label_unreferenced": False,
         "label_destroyed": True, "attributes_blank": True}
    )) == 1


def test_audit_without_sentinels_is_structural_only(forge):
    fx = forge("leica-aperio", seed="a1")
    outcome = audit_path(fx.primary)
    # the planted name cannot be seen without the sentinel list
    assert outcome.checks["filename_clean"]
    assert outcome.level == int(PolicyLevel.L1_FILENAME_CLEAN)
    assert outcome.sentinel_hits == []
