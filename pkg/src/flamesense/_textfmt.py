"""Checksummed, versioned text-file plumbing shared by the model serializers.

Files are UTF-8 text: a header line ``<format-name> <version>``, named
fields one per line, and a trailing ``checksum <sha256>`` line covering
every preceding byte.  Floats are written with ``repr`` so the decimal
text round-trips bit-exactly.
"""

from __future__ import annotations

import hashlib

from .errors import CorruptModel, VersionMismatch


def fmt_float(x: float) -> str:
    return repr(float(x))


def fmt_floats(xs) -> str:
    return " ".join(fmt_float(x) for x in xs)


def write_checksummed(path, format_name: str, version: int, lines: list[str]) -> None:
    body = f"{format_name} {version}\n" + "".join(line + "\n" for line in lines)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(body)
        fh.write(f"checksum {digest}\n")


def read_checksummed(path, format_name: str, version: int) -> list[str]:
    """Validate header, version, and checksum; return the field lines."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise CorruptModel(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != format_name:
        raise CorruptModel(f"{path}: not a {format_name} file")
    try:
        file_version = int(header[1])
    except ValueError:
        raise CorruptModel(f"{path}: malformed version field") from None
    if file_version != version:
        raise VersionMismatch(
            f"{path}: format version {file_version}, expected {version}"
        )
    last = lines[-1].split()
    if len(last) != 2 or last[0] != "checksum":
        raise CorruptModel(f"{path}: missing checksum line")
    body = "".join(line + "\n" for line in lines[:-1])
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if last[1] != digest:
        raise CorruptModel(f"{path}: checksum mismatch")
    return lines[1:-1]
