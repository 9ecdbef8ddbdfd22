"""Random-access byte stores and the streaming ingestion session.

All structural surgery in this package happens through the two small
interfaces below: a readable store and a writable store. Real slides
live in files (FileStore); dry runs, unit tests, and the streaming
path operate on MemoryStore so nothing on disk is touched.
"""

from __future__ import annotations

import os

from .errors import IoFailure, OutOfBounds, SessionFinalized, UnsupportedFormat


class ByteSource:
    """Read-only random access over a fixed-length run of bytes."""

    @property
    def length(self) -> int:
        raise NotImplementedError

    def read_exact(self, offset: int, n: int) -> bytes:
        raise NotImplementedError

    def _check_span(self, offset: int, n: int) -> None:
        if offset < 0 or n < 0:
            raise OutOfBounds(f"negative span: offset={offset} n={n}")
        if offset + n > self.length:
            raise OutOfBounds(
                f"span [{offset}, {offset + n}) exceeds store length {self.length}"
            )


class ByteSink(ByteSource):
    """A ByteSource that also supports in-place overwrites.

    Overwrites never grow or shrink the store; that restriction is what
    keeps every offset in a planned patch valid for the whole apply.
    """

    def overwrite_exact(self, offset: int, data: bytes) -> None:
        raise NotImplementedError

    def flush(self) -> None:
        pass


class MemoryStore(ByteSink):
    """Byte store backed by a bytearray."""

    def __init__(self, data: bytes = b"") -> None:
        self._buf = bytearray(data)

    @property
    def length(self) -> int:
        return len(self._buf)

    def read_exact(self, offset: int, n: int) -> bytes:
        self._check_span(offset, n)
        return bytes(self._buf[offset : offset + n])

    def overwrite_exact(self, offset: int, data: bytes) -> None:
        self._check_span(offset, len(data))
        self._buf[offset : offset + len(data)] = data

    def getvalue(self) -> bytes:
        return bytes(self._buf)


class FileStore(ByteSink):
    """Byte store backed by an open file.

    Mode "rb" gives a read-only view; "r+b" allows in-place patching.
    The length is fixed at open time: anonymization never resizes a
    file, so a length change underneath us is itself an error.
    """

    def __init__(self, path: str | os.PathLike[str], writable: bool = False) -> None:
        self.path = os.fspath(path)
        mode = "r+b" if writable else "rb"
        try:
            self._fh = open(self.path, mode)
        except OSError as exc:
            raise IoFailure(f"cannot open {self.path!r}: {exc}") from exc
        self._fh.seek(0, os.SEEK_END)
        self._length = self._fh.tell()
        self._writable = writable

    @property
    def length(self) -> int:
        return self._length

    def read_exact(self, offset: int, n: int) -> bytes:
        self._check_span(offset, n)
        try:
            self._fh.seek(offset)
            data = self._fh.read(n)
        except OSError as exc:
            raise IoFailure(f"read failed on {self.path!r}: {exc}") from exc
        if len(data) != n:
            raise IoFailure(
                f"short read on {self.path!r}: wanted {n} bytes at {offset}, got {len(data)}"
            )
        return data

    def overwrite_exact(self, offset: int, data: bytes) -> None:
        if not self._writable:
            raise IoFailure(f"{self.path!r} was opened read-only")
        self._check_span(offset, len(data))
        try:
            self._fh.seek(offset)
            self._fh.write(data)
        except OSError as exc:
            raise IoFailure(f"write failed on {self.path!r}: {exc}") from exc

    def flush(self) -> None:
        try:
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except OSError as exc:
            raise IoFailure(f"flush failed on {self.path!r}: {exc}") from exc

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "FileStore":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def read_head(path: str | os.PathLike[str], n: int) -> bytes:
    """Read up to n bytes from the start of a file."""
    try:
        with open(path, "rb") as fh:
            return fh.read(n)
    except OSError as exc:
        raise IoFailure(f"cannot read {os.fspath(path)!r}: {exc}") from exc


class StreamSession:
    """Collects a slide arriving in chunks, then anonymizes it in memory.

    The whole input is spooled before any structural work starts: the
    formats here need random access (directory chains point backwards),
    and a partially transformed prefix could never be made consistent if
    the tail never arrived. Spooling trades memory for the guarantee
    that the streamed result is byte-identical to a file-based run.
    """

    def __init__(self) -> None:
        self._chunks: list[bytes] = []
        self._finalized = False
        self.report = None

    @property
    def bytes_received(self) -> int:
        return sum(len(c) for c in self._chunks)

    def feed(self, chunk: bytes) -> None:
        if self._finalized:
            raise SessionFinalized("session already finalized; no more chunks accepted")
        if chunk:
            self._chunks.append(bytes(chunk))

    def finalize(self, name: str = "stream", config=None) -> tuple[bytes, object]:
        """Run anonymization over the spooled bytes.

        Returns the anonymized payload and the run report. The session
        refuses further feeds afterwards.
        """
        if self._finalized:
            raise SessionFinalized("finalize() may be called only once")
        self._finalized = True
        data = b"".join(self._chunks)
        self._chunks.clear()
        if not data:
            raise UnsupportedFormat("empty stream")
        from .engine import anonymize_bytes  # imported late: engine imports this module

        out, report = anonymize_bytes(data, name=name, config=config)
        self.report = report
        return out, report
