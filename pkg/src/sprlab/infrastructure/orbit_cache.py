# src/sprlab/infrastructure/orbit_cache.py
from __future__ import annotations
import hashlib
import os
import tempfile
from pathlib import Path
from typing import List, Optional, Tuple

from sprlab.core.errors import ChecksumMismatch, VersionMismatch
from sprlab.core.log import log
from sprlab.domain.hyperbolic import HPoint
from sprlab.domain.records import OrbitPoint, Word

HEADER = "sprlab-orbit v1"
_KEY_PREFIX = "# key="
_TRAILER_PREFIX = "# sha256="


def _word_text(w: Word) -> str:
    return ",".join(str(i) for i in w)


def _parse_word(s: str) -> Word:
    return tuple(int(t) for t in s.split(",")) if s else ()


def _row(p: OrbitPoint) -> str:
    # repr de float es exacto al releer
    return f"{_word_text(p.word)};{p.dist!r};{p.image.x!r};{p.image.y!r}"


def _digest(lines: List[str]) -> str:
    h = hashlib.sha256()
    for ln in lines:
        h.update(ln.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


class OrbitCache:
    """
    Archivo de órbita enumerada:
      sprlab-orbit v1
      # key=<clave del grupo y del radio>
      word;dist;x;y          (una fila por punto, ordenadas por dist)
      # sha256=<hex> rows=<n>
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    @property
    def exists(self) -> bool:
        return self.path.is_file()

    # -------------------- Store -------------------- #
    def store(self, orbit: List[OrbitPoint], key: str) -> Path:
        body = [HEADER, f"{_KEY_PREFIX}{key}", "word;dist;x;y"]
        body.extend(_row(p) for p in orbit)
        trailer = f"{_TRAILER_PREFIX}{_digest(body)} rows={len(orbit)}"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=self.path.name + ".", suffix=".tmp",
                                   dir=str(self.path.parent))
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\n".join(body + [trailer]) + "\n")
            os.replace(tmp, self.path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
        log(f"órbita guardada: {len(orbit)} filas ->", self.path, stage="cache")
        return self.path

    # -------------------- Load -------------------- #
    def read_key(self) -> Optional[str]:
        """Clave registrada en el archivo, o None si no existe."""
        if not self.exists:
            return None
        with self.path.open("r", encoding="utf-8") as fh:
            first = fh.readline().rstrip("\n")
            second = fh.readline().rstrip("\n")
        if first != HEADER:
            raise VersionMismatch("cabecera de caché no soportada",
                                  found=first, expected=HEADER, path=str(self.path))
        return second[len(_KEY_PREFIX):] if second.startswith(_KEY_PREFIX) else None

    def load(self) -> Tuple[str, List[OrbitPoint]]:
        text = self.path.read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or lines[0] != HEADER:
            raise VersionMismatch("cabecera de caché no soportada",
                                  found=lines[0] if lines else "", expected=HEADER,
                                  path=str(self.path))
        if len(lines) < 4 or not lines[-1].startswith(_TRAILER_PREFIX):
            raise ChecksumMismatch("caché truncada: falta el registro de control",
                                   path=str(self.path))
        body, trailer = lines[:-1], lines[-1]
        try:
            hex_part, rows_part = trailer[len(_TRAILER_PREFIX):].split(" rows=")
            rows = int(rows_part)
        except ValueError as e:
            raise ChecksumMismatch("registro de control ilegible", path=str(self.path)) from e
        if hex_part != _digest(body) or rows != len(body) - 3:
            raise ChecksumMismatch("checksum de la caché no coincide", path=str(self.path),
                                   rows=rows, found_rows=len(body) - 3)
        key = body[1][len(_KEY_PREFIX):]
        orbit: List[OrbitPoint] = []
        for ln in body[3:]:
            w, d, x, y = ln.split(";")
            orbit.append(OrbitPoint(_parse_word(w), HPoint(float(x), float(y)), float(d)))
        log(f"órbita cargada: {len(orbit)} filas <-", self.path, stage="cache")
        return key, orbit
