"""Deterministic serialization: 12-significant-digit decimals, "num/den"
rationals, atomic file writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from decimal import Context, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence, Union

import mpmath

from .exactmath import format_rational

SIG_DIGITS = 12
_CTX = Context(prec=SIG_DIGITS)

Number = Union[int, float, Fraction, Decimal, "mpmath.mpf"]


def _to_decimal(x: Number) -> Decimal:
    if isinstance(x, Fraction):
        return _CTX.divide(Decimal(x.numerator), Decimal(x.denominator))
    if isinstance(x, mpmath.mpf):
        return _CTX.create_decimal(mpmath.nstr(x, SIG_DIGITS + 5, strip_zeros=False))
    return _CTX.create_decimal(repr(float(x)) if isinstance(x, float) else x)


def fmt_decimal(x: Number) -> str:
    """Fixed 12-significant-digit text; scientific notation outside [1e-6, 1e15)."""
    if isinstance(x, float) and (x != x or x in (float("inf"), float("-inf"))):
        return repr(x)
    d = _CTX.plus(_to_decimal(x))
    if d == 0:
        return "0." + "0" * (SIG_DIGITS - 1)
    if Decimal("1e-6") <= abs(d) < Decimal("1e15"):
        # keep exactly 12 significant digits, trailing zeros included
        exp = d.adjusted() - (SIG_DIGITS - 1)
        return format(d.quantize(Decimal(1).scaleb(exp)), "f")
    return format(d, f".{SIG_DIGITS - 1}e")


def rational_obj(r: Fraction) -> dict:
    return {"rational": format_rational(r), "decimal": fmt_decimal(r)}


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


class AtomicBatch:
    """Stage several files as temporaries and rename them all on commit.

    If the block raises, every staged temporary is removed and no target is
    touched.
    """

    def __init__(self) -> None:
        self._staged: list[tuple[str, Path]] = []

    def write(self, path: Union[str, Path], text: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        self._staged.append((tmp, path))
        return path

    def __enter__(self) -> AtomicBatch:
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            for tmp, path in self._staged:
                os.replace(tmp, path)
        else:
            for tmp, _ in self._staged:
                try:
                    os.unlink(tmp)
                except FileNotFoundError:
                    pass
        self._staged.clear()


def write_atomic(path: Union[str, Path], text: str) -> Path:
    with AtomicBatch() as batch:
        return batch.write(path, text)
