"""Harmonization rules, covariate joins, and geoscheme integration.

Rules live in versioned data files (TSV per category) so corrections are
auditable and replayable. Enrichment never touches speech text or SpeechId;
ISO fixes land in the separate ``iso3_canonical`` field used for joins.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import Speech
from .errors import ConflictingRule

_ISO_RE = re.compile(r"[A-Z]{3}")


@dataclass
class HarmonizationRules:
    iso_fixes: dict[str, str] = field(default_factory=dict)
    country_aliases: dict[str, str] = field(default_factory=dict)
    speaker_fixes: dict[tuple[str, int, str], str] = field(default_factory=dict)
    position_fixes: dict[str, str] = field(default_factory=dict)
    defunct_states: dict[str, tuple[str, int]] = field(default_factory=dict)

    def validate(self) -> None:
        for raw, canon in self.iso_fixes.items():
            if not _ISO_RE.fullmatch(canon):
                raise ConflictingRule(f"iso fix {raw!r} -> {canon!r}: not a valid ISO code")
        for table_name, table in (("iso_fixes", self.iso_fixes), ("country_aliases", self.country_aliases), ("position_fixes", self.position_fixes)):
            for raw, canon in table.items():
                if canon != raw and canon in table and table[canon] != canon:
                    raise ConflictingRule(f"{table_name}: {raw!r} -> {canon!r} maps to another alias")
        for iso, (successor, until) in self.defunct_states.items():
            if until < 1946:
                raise ConflictingRule(f"defunct state {iso}: valid_until_year {until} < 1946")
            if not _ISO_RE.fullmatch(successor):
                raise ConflictingRule(f"defunct state {iso}: bad successor {successor!r}")


@dataclass
class ChangeLog:
    iso: int = 0
    country: int = 0
    speaker: int = 0
    position: int = 0

    def as_dict(self) -> dict[str, int]:
        return {"iso": self.iso, "country": self.country, "speaker": self.speaker, "position": self.position}


@dataclass
class CovariateTable:
    name: str
    rows: dict[tuple[str, int], float]
    unit: str = ""
    source: str = ""


@dataclass
class GeoScheme:
    rows: dict[str, tuple[str, str]]


@dataclass
class EnrichedSpeech:
    base: Speech
    region: str | None = None
    subregion: str | None = None
    historical: bool = False
    covariates: dict[str, float] = field(default_factory=dict)


@dataclass
class CoverageReport:
    # per-table (matched, total)
    tables: dict[str, tuple[int, int]] = field(default_factory=dict)

    def fraction(self, name: str) -> float:
        matched, total = self.tables[name]
        return matched / total if total else 0.0


def apply_rules(speeches: list[Speech], rules: HarmonizationRules) -> tuple[list[Speech], ChangeLog]:
    """Replace matched fields by their canonical forms. Idempotent."""
    rules.validate()
    log = ChangeLog()
    out: list[Speech] = []
    for s in speeches:
        iso = rules.iso_fixes.get(s.iso3_canonical, s.iso3_canonical)
        country = rules.country_aliases.get(s.country_name, s.country_name)
        speaker = rules.speaker_fixes.get((s.id.iso3, s.id.session, s.speaker_name), s.speaker_name)
        position = rules.position_fixes.get(s.speaker_position, s.speaker_position)
        if iso != s.iso3_canonical:
            log.iso += 1
        if country != s.country_name:
            log.country += 1
        if speaker != s.speaker_name:
            log.speaker += 1
        if position != s.speaker_position:
            log.position += 1
        out.append(
            replace(s, iso3_canonical=iso, country_name=country, speaker_name=speaker, speaker_position=position)
        )
    return out, log


def join_geoscheme(
    speeches: list[EnrichedSpeech], geo: GeoScheme, rules: HarmonizationRules
) -> list[EnrichedSpeech]:
    """Set region/subregion from the geoscheme, routing defunct states
    through their successor (flagged historical). Unmapped speeches keep
    absent regions."""
    out: list[EnrichedSpeech] = []
    for es in speeches:
        iso = es.base.iso3_canonical
        region: str | None = None
        subregion: str | None = None
        historical = es.historical
        if iso in geo.rows:
            region, subregion = geo.rows[iso]
        elif iso in rules.defunct_states:
            successor, _until = rules.defunct_states[iso]
            if successor in geo.rows:
                region, subregion = geo.rows[successor]
                historical = True
        out.append(replace(es, region=region, subregion=subregion, historical=historical))
    return out


def join_covariates(
    speeches: list[EnrichedSpeech],
    tables: list[CovariateTable],
    policy: str = "exact",
    per_table_policy: dict[str, str] | None = None,
) -> tuple[list[EnrichedSpeech], CoverageReport]:
    """Attach covariate values by (iso3_canonical, year).

    ``policy`` is ``"exact"`` or ``"nearest:<k>"``; misses are reported in
    the coverage report, never raised. Nearest ties prefer the earlier year.
    """
    names = [t.name for t in tables]
    if len(set(names)) != len(names):
        raise ConflictingRule(f"covariate names not distinct: {names}")
    per_table_policy = per_table_policy or {}
    report = CoverageReport()
    out = [replace(es, covariates=dict(es.covariates)) for es in speeches]
    for table in tables:
        matched = 0
        pol = per_table_policy.get(table.name, policy)
        k = _nearest_k(pol)
        years_by_iso: dict[str, list[int]] = {}
        if k is not None:
            for iso, year in table.rows:
                years_by_iso.setdefault(iso, []).append(year)
            for ys in years_by_iso.values():
                ys.sort()
        for es in out:
            iso, year = es.base.iso3_canonical, es.base.id.year
            value = table.rows.get((iso, year))
            if value is None and k is not None:
                candidates = [y for y in years_by_iso.get(iso, []) if abs(y - year) <= k]
                if candidates:
                    best = min(candidates, key=lambda y: (abs(y - year), y))
                    value = table.rows[(iso, best)]
            if value is not None:
                es.covariates[table.name] = value
                matched += 1
        report.tables[table.name] = (matched, len(out))
    return out, report


def _nearest_k(policy: str) -> int | None:
    if policy == "exact":
        return None
    m = re.fullmatch(r"nearest:(\d+)", policy)
    if m is None:
        raise ValueError(f"unknown covariate policy {policy!r}")
    return int(m.group(1))


# ---------------------------------------------------------------------------
# File loaders

def load_rules(rules_dir: str | Path) -> HarmonizationRules:
    """Read rule TSVs from a directory; absent files mean empty tables."""
    rules_dir = Path(rules_dir)
    rules = HarmonizationRules(
        iso_fixes=_read_two_col(rules_dir / "iso_fixes.tsv"),
        country_aliases=_read_two_col(rules_dir / "country_aliases.tsv"),
        position_fixes=_read_two_col(rules_dir / "position_fixes.tsv"),
    )
    speaker_path = rules_dir / "speaker_fixes.tsv"
    if speaker_path.exists():
        with open(speaker_path, encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                if not line.strip():
                    continue
                iso3, session, raw, canonical = line.rstrip("\n").split("\t")[:4]
                key = (iso3, int(session), raw)
                if key in rules.speaker_fixes and rules.speaker_fixes[key] != canonical:
                    raise ConflictingRule(f"speaker_fixes: conflicting outputs for {key}")
                rules.speaker_fixes[key] = canonical
    defunct_path = rules_dir / "defunct_states.tsv"
    if defunct_path.exists():
        with open(defunct_path, encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                if not line.strip():
                    continue
                iso3, successor, until = line.rstrip("\n").split("\t")[:3]
                rules.defunct_states[iso3] = (successor, int(until))
    rules.validate()
    return rules


def _read_two_col(path: Path) -> dict[str, str]:
    table: dict[str, str] = {}
    if not path.exists():
        return table
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            raw, canonical = parts[0], parts[1]
            if raw in table and table[raw] != canonical:
                raise ConflictingRule(f"{path.name}: conflicting outputs for {raw!r}")
            table[raw] = canonical
    return table


def load_covariates(cov_dir: str | Path) -> tuple[list[CovariateTable], list[str]]:
    """Load one CSV per indicator (header iso3,year,value). Non-numeric
    cells are treated as absent and warned."""
    cov_dir = Path(cov_dir)
    tables: list[CovariateTable] = []
    warnings: list[str] = []
    for path in sorted(cov_dir.glob("*.csv")):
        rows: dict[tuple[str, int], float] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                try:
                    key = (row["iso3"], int(row["year"]))
                    value = float(row["value"])
                except (KeyError, TypeError, ValueError):
                    warnings.append(f"{path.name}: skipped non-numeric row {row}")
                    continue
                rows[key] = value
        tables.append(CovariateTable(name=path.stem, rows=rows))
    return tables, warnings


def load_geoscheme(path: str | Path) -> GeoScheme:
    rows: dict[str, tuple[str, str]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            iso3 = row["iso3"]
            region, subregion = row["region"], row["subregion"]
            if not region or not subregion:
                raise ConflictingRule(f"geoscheme: empty region for {iso3}")
            rows[iso3] = (region, subregion)
    return GeoScheme(rows=rows)
