import itertools

import pytest

from wsianon.forge import forge_fixture

TIFF_VENDORS = ("leica-aperio", "hamamatsu-ndpi", "roche-ventana", "generic-tiff")
SINGLE_FILE_VENDORS = TIFF_VENDORS + ("philips-isyntax",)
ALL_VENDORS = SINGLE_FILE_VENDORS + ("3dhistech-mirax",)


@pytest.fixture
def forge(tmp_path):
    """Factory for fixtures, each in its own subdirectory.

    Same seed and vendor produce the same file name, so every forge
    call gets a fresh directory to avoid collisions inside one test.
    """
    counter = itertools.count()

    def make(vendor, seed=0, **kwargs):
        out_dir = tmp_path / f"fx{next(counter)}"
        return forge_fixture(vendor, str(out_dir), seed=seed, **kwargs)

    return make
