import math
import struct

import numpy as np
import pytest


def naive_cfar_mask(image, q, train, guard, border="shrink"):
    """Reference 2-D CFAR: enumerate every ring offset for every cell.

    Returns ``(mask, skipped)``. Written independently of the library's
    summed-area implementation.
    """
    img = np.asarray(image, dtype=np.float64)
    rows, cols = img.shape
    h = train + guard
    offsets = np.array(
        [
            (dr, dc)
            for dr in range(-h, h + 1)
            for dc in range(-h, h + 1)
            if max(abs(dr), abs(dc)) > guard
        ]
    )
    mask = np.zeros(img.shape, dtype=bool)
    skipped = np.zeros(img.shape, dtype=bool)
    for r in range(rows):
        for c in range(cols):
            inside = h <= r < rows - h and h <= c < cols - h
            if not inside and border == "skip":
                skipped[r, c] = True
                continue
            rr = r + offsets[:, 0]
            cc = c + offsets[:, 1]
            keep = (rr >= 0) & (rr < rows) & (cc >= 0) & (cc < cols)
            vals = img[rr[keep], cc[keep]]
            mean = vals.sum() / vals.size
            std = math.sqrt(np.sum((vals - mean) ** 2) / vals.size)
            mask[r, c] = img[r, c] > mean + std * q
    return mask, skipped


def write_phoenix(path, rows, cols, magnitude, phase=None, extra=None, use_length=True, endian=">"):
    """Independent Phoenix writer following the public MSTAR layout.

    ``magnitude`` is a flat sequence of rows*cols floats; the payload is
    packed with ``struct``.
    """
    lines = ["[PhoenixHeaderVer01.04]"]
    if use_length:
        lines.append("PhoenixHeaderLength= XXXXXXXXXX")
        lines.append("native_header_length= 0000000000")
    lines.append(f"NumberOfColumns= {cols}")
    lines.append(f"NumberOfRows= {rows}")
    for k, v in (extra or {}).items():
        lines.append(f"{k}= {v}")
    lines.append("[EndofPhoenixHeader]")
    head = ("\n".join(lines) + "\n").encode("ascii")
    if use_length:
        head = head.replace(b"XXXXXXXXXX", b"%010d" % len(head))
    if phase is None:
        phase = [0.0] * len(magnitude)
    payload = struct.pack(f"{endian}{len(magnitude)}f", *magnitude)
    payload += struct.pack(f"{endian}{len(phase)}f", *phase)
    with open(path, "wb") as fh:
        fh.write(head + payload)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def record_verdict(criterion, ok, detail=""):
    status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
    line = f"criterion {criterion}: {status}  {detail}".rstrip()
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
