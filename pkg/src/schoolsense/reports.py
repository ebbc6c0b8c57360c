from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path

logger = logging.getLogger(__name__)


def write_atomic(path: str | Path, text: str) -> Path:
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.info("report written path=%s bytes=%d", target, len(text.encode("utf-8")))
    return target


def to_csv(rows: Iterable[Mapping[str, object]], headers: Sequence[str] | None = None) -> str:
    """CSV text with a fixed header row; missing cells are empty, None becomes empty."""
    items = list(rows)
    if headers is None:
        headers = list(items[0].keys()) if items else []
    buf = io.StringIO()
    writer = csv.DictWriter(
        buf, fieldnames=list(headers), extrasaction="ignore", lineterminator="\n"
    )
    writer.writeheader()
    for row in items:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def write_csv(
    path: str | Path,
    rows: Iterable[Mapping[str, object]],
    headers: Sequence[str] | None = None,
) -> Path:
    return write_atomic(path, to_csv(rows, headers))


def write_json(path: str | Path, payload: object) -> Path:
    return write_atomic(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
