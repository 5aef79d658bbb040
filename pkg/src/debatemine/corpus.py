"""Parse the on-disk debate-corpus layout into validated Speech records.

Layout: ``<root>/Session <NN> - <YYYY>/<ISO>_<SESSION>_<YEAR>.txt``, one
speech per file, plus a TSV metadata table keyed by (iso3, session, year).
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import DuplicateSpeech, IoFailure, MalformedFilename, MissingRoot, UnreadableFile

_FILENAME_RE = re.compile(r"^([A-Z]{3})_(\d+)_(\d+)\.txt$")
_SESSION_DIR_RE = re.compile(r"^Session\s+(\d+)\s*-\s*(\d{4})$")

MIN_YEAR = 1946
MAX_YEAR = 2100

METADATA_COLUMNS = ["iso3", "session", "year", "country_name", "speaker_name", "speaker_position"]
EXPORT_COLUMNS = METADATA_COLUMNS + ["iso3_canonical", "token_count", "text"]


@dataclass(frozen=True, order=True)
class SpeechId:
    iso3: str
    session: int
    year: int

    def __post_init__(self):
        if not re.fullmatch(r"[A-Z]{3}", self.iso3):
            raise ValueError(f"iso3 must match [A-Z]{{3}}, got {self.iso3!r}")
        if self.session < 1:
            raise ValueError(f"session must be >= 1, got {self.session}")
        if not (MIN_YEAR <= self.year <= MAX_YEAR):
            raise ValueError(f"year must be in [{MIN_YEAR}, {MAX_YEAR}], got {self.year}")

    @property
    def key(self) -> str:
        return f"{self.iso3}_{self.session}_{self.year}"


@dataclass
class Speech:
    id: SpeechId
    country_name: str = ""
    speaker_name: str = ""
    speaker_position: str = ""
    text: str = ""
    token_count: int = 0
    # Harmonized ISO used for joins; the SpeechId itself stays as loaded.
    iso3_canonical: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"speech {self.id.key} has empty text")
        if not self.iso3_canonical:
            self.iso3_canonical = self.id.iso3


@dataclass
class CorpusManifest:
    speech_count: int
    year_range: tuple[int, int]
    parse_warnings: list[tuple[str, str]] = field(default_factory=list)


def parse_speech_filename(name: str) -> SpeechId:
    """Parse ``ISO_SESSION_YEAR.txt`` into a SpeechId.

    Raises MalformedFilename on anything that does not match the layout.
    """
    m = _FILENAME_RE.match(name)
    if m is None:
        raise MalformedFilename(f"not a speech filename: {name!r}")
    iso3, session, year = m.group(1), int(m.group(2)), int(m.group(3))
    try:
        return SpeechId(iso3=iso3, session=session, year=year)
    except ValueError as exc:
        raise MalformedFilename(f"{name!r}: {exc}") from exc


def _read_metadata(path: Path) -> dict[tuple[str, int], list[dict]]:
    rows: dict[tuple[str, int], list[dict]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        idx = {name: header.index(name) for name in METADATA_COLUMNS if name in header}
        missing = [c for c in METADATA_COLUMNS if c not in idx]
        if missing:
            raise IoFailure(f"metadata table {path} missing columns: {missing}")
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            row = {name: parts[i] if i < len(parts) else "" for name, i in idx.items()}
            try:
                key = (row["iso3"], int(row["session"]))
                row["year"] = int(row["year"])
            except ValueError as exc:
                raise IoFailure(f"metadata table {path}: bad row {line!r}: {exc}") from exc
            rows.setdefault(key, []).append(row)
    return rows


def _read_speech_file(path: Path) -> tuple[str, bool]:
    """Read a speech file as UTF-8; invalid bytes are replaced and flagged."""
    raw = path.read_bytes()
    try:
        return raw.decode("utf-8"), False
    except UnicodeDecodeError:
        return raw.decode("utf-8", errors="replace"), True


def load_corpus(
    root: str | Path,
    metadata: str | Path,
    strict: bool = False,
    max_workers: int = 4,
) -> tuple[list[Speech], CorpusManifest]:
    """Load every well-formed speech file under ``root`` and join metadata.

    Non-fatal mode (default) records unreadable or malformed files as
    warnings; strict mode raises instead. Duplicate (iso3, session) ids are
    always fatal. Output is sorted by (year, iso3).
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingRoot(f"corpus root does not exist: {root}")
    meta_rows = _read_metadata(Path(metadata))

    warnings: list[tuple[str, str]] = []
    candidates: list[tuple[Path, SpeechId]] = []
    seen: dict[tuple[str, int], str] = {}

    for entry in sorted(root.iterdir()):
        if not entry.is_dir():
            continue
        dm = _SESSION_DIR_RE.match(entry.name)
        if dm is None:
            warnings.append((entry.name, "unrecognized session directory name"))
            continue
        dir_session, dir_year = int(dm.group(1)), int(dm.group(2))
        for f in sorted(entry.iterdir()):
            if not f.is_file() or f.suffix != ".txt":
                continue
            try:
                sid = parse_speech_filename(f.name)
            except MalformedFilename as exc:
                if strict:
                    raise
                warnings.append((f.name, str(exc)))
                continue
            if sid.session != dir_session or sid.year != dir_year:
                warnings.append((f.name, f"filename disagrees with directory {entry.name}"))
            dup_key = (sid.iso3, sid.session)
            if dup_key in seen:
                raise DuplicateSpeech(
                    f"duplicate speech {sid.iso3}/{sid.session}: {f.name} and {seen[dup_key]}"
                )
            seen[dup_key] = f.name
            candidates.append((f, sid))

    # File reads may run concurrently; the merge below is single-owner.
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        contents = list(pool.map(lambda c: _try_read(c[0]), candidates))

    speeches: list[Speech] = []
    for (path, sid), (text, lossy, err) in zip(candidates, contents):
        if err is not None:
            if strict:
                raise UnreadableFile(f"{path}: {err}")
            warnings.append((path.name, f"unreadable: {err}"))
            continue
        if lossy:
            warnings.append((path.name, "invalid UTF-8 bytes replaced"))
        if not text.strip():
            if strict:
                raise UnreadableFile(f"{path}: empty speech text")
            warnings.append((path.name, "empty speech text"))
            continue
        row, note = _match_metadata(meta_rows.get((sid.iso3, sid.session), []), sid)
        if note:
            warnings.append((path.name, note))
        speeches.append(
            Speech(
                id=sid,
                country_name=row.get("country_name", ""),
                speaker_name=row.get("speaker_name", ""),
                speaker_position=row.get("speaker_position", ""),
                text=text,
            )
        )

    speeches.sort(key=lambda s: (s.id.year, s.id.iso3))
    years = [s.id.year for s in speeches]
    manifest = CorpusManifest(
        speech_count=len(speeches),
        year_range=(min(years), max(years)) if years else (0, 0),
        parse_warnings=warnings,
    )
    return speeches, manifest


def _try_read(path: Path) -> tuple[str, bool, str | None]:
    try:
        text, lossy = _read_speech_file(path)
        return text, lossy, None
    except OSError as exc:
        return "", False, str(exc)


def _match_metadata(rows: list[dict], sid: SpeechId) -> tuple[dict, str | None]:
    """Exact (iso3, session, year) match, with a warned ±1-year fallback."""
    for row in rows:
        if row["year"] == sid.year:
            return row, None
    near = sorted(
        (r for r in rows if abs(r["year"] - sid.year) <= 1),
        key=lambda r: (abs(r["year"] - sid.year), r["year"]),
    )
    if near:
        return near[0], f"metadata year {near[0]['year']} joined to speech year {sid.year}"
    return {}, "no metadata row"


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")


def _unescape(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            mapped = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt)
            if mapped is not None:
                out.append(mapped)
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def export_corpus(speeches: list[Speech], out: str | Path) -> int:
    """Write one escaped TSV row per speech; returns rows written."""
    out = Path(out)
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write("\t".join(EXPORT_COLUMNS) + "\n")
            for s in speeches:
                fh.write(
                    "\t".join(
                        [
                            s.id.iso3,
                            str(s.id.session),
                            str(s.id.year),
                            _escape(s.country_name),
                            _escape(s.speaker_name),
                            _escape(s.speaker_position),
                            s.iso3_canonical,
                            str(s.token_count),
                            _escape(s.text),
                        ]
                    )
                    + "\n"
                )
    except OSError as exc:
        raise IoFailure(f"cannot write {out}: {exc}") from exc
    return len(speeches)


def import_corpus(path: str | Path) -> list[Speech]:
    """Read a corpus TSV written by export_corpus."""
    path = Path(path)
    speeches: list[Speech] = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if header != EXPORT_COLUMNS:
                raise IoFailure(f"unexpected corpus header in {path}: {header}")
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if len(parts) != len(EXPORT_COLUMNS):
                    raise IoFailure(f"bad corpus row in {path}: {line!r}")
                sid = SpeechId(iso3=parts[0], session=int(parts[1]), year=int(parts[2]))
                speeches.append(
                    Speech(
                        id=sid,
                        country_name=_unescape(parts[3]),
                        speaker_name=_unescape(parts[4]),
                        speaker_position=_unescape(parts[5]),
                        iso3_canonical=parts[6],
                        token_count=int(parts[7]),
                        text=_unescape(parts[8]),
                    )
                )
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return speeches


def with_token_count(speech: Speech, n: int) -> Speech:
    return replace(speech, token_count=n)
