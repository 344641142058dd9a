"""Trial and speaker-metadata ingestion, and partitioning of trials into subgroups.

A trial file holds one scored comparison per line::

    label enroll_utt test_utt score

with ``label`` 1 (target) or 0 (nontarget), separated by spaces or tabs.
Metadata files are comma-separated with a ``speaker_id,<attr1>,...`` header.

A trial's subgroup is taken from the attributes of the *enrollment*
speaker only. Trials whose enrollment speaker is missing from the metadata,
or lacks one of the selected attributes, land in the ``unknown`` bucket.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import MetadataError, TrialParseError

logger = logging.getLogger(__name__)

TARGET = "target"
NONTARGET = "nontarget"

_LABEL_TOKENS = {"1": True, "0": False, "target": True, "nontarget": False}
_COLUMNS = ("label", "enroll", "test", "score")
_SPEAKER_HEADERS = {"speaker_id", "speaker", "id", "voxceleb1 id"}


@dataclass(frozen=True)
class TrialRecord:
    enroll: str
    test: str
    is_target: bool
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score {self.score!r}")

    @property
    def label(self) -> str:
        return TARGET if self.is_target else NONTARGET


@dataclass(frozen=True)
class TrialFileFormat:
    """Column layout of a trial file.

    ``columns`` is a permutation of ``("label", "enroll", "test", "score")``.
    ``delimiter=None`` splits on any run of spaces/tabs.
    """

    columns: tuple[str, ...] = _COLUMNS
    delimiter: str | None = None

    def __post_init__(self):
        if sorted(self.columns) != sorted(_COLUMNS):
            raise ValueError(
                f"columns must be a permutation of {','.join(_COLUMNS)}, got {','.join(self.columns)}"
            )

    @classmethod
    def from_string(cls, spec: str, delimiter: str | None = None) -> "TrialFileFormat":
        return cls(tuple(c.strip() for c in spec.split(",")), delimiter)


@dataclass(frozen=True)
class SpeakerIdRule:
    """Maps an utterance id to a speaker id by splitting on ``delimiter`` and
    taking segment ``segment``. The default matches the VoxCeleb
    ``speaker/video/clip.wav`` layout."""

    delimiter: str = "/"
    segment: int = 0

    def __call__(self, utterance_id: str) -> str:
        return speaker_of(utterance_id, self)


DEFAULT_SPEAKER_RULE = SpeakerIdRule()


def speaker_of(utterance_id: str, rule: SpeakerIdRule = DEFAULT_SPEAKER_RULE) -> str:
    if rule.delimiter not in utterance_id:
        raise TrialParseError(
            f"utterance id {utterance_id!r} has no {rule.delimiter!r} separator; "
            "cannot derive a speaker id"
        )
    parts = utterance_id.split(rule.delimiter)
    try:
        speaker = parts[rule.segment]
    except IndexError:
        raise TrialParseError(
            f"utterance id {utterance_id!r} has no segment {rule.segment} "
            f"when split on {rule.delimiter!r}"
        ) from None
    if not speaker:
        raise TrialParseError(f"utterance id {utterance_id!r} yields an empty speaker id")
    return speaker


@dataclass(frozen=True)
class SpeakerMetadata:
    speaker_id: str
    attributes: Mapping[str, str]


class SubgroupKey:
    """Ordered (attribute, value) pairs identifying a speaker subgroup.

    Ordering is kept for display, but equality and hashing ignore it, so
    keys built from the same pairs in a different order are equal.
    The empty key is the ``unknown`` bucket.
    """

    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[tuple[str, str]] = ()):
        pairs = tuple((str(a), str(v)) for a, v in pairs)
        names = [a for a, _ in pairs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate attribute in subgroup key: {names}")
        object.__setattr__(self, "pairs", pairs)

    def __setattr__(self, name, value):
        raise AttributeError("SubgroupKey is immutable")

    @classmethod
    def unknown(cls) -> "SubgroupKey":
        return cls(())

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "SubgroupKey":
        return cls(mapping.items())

    @property
    def is_unknown(self) -> bool:
        return not self.pairs

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.pairs)

    @property
    def values(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.pairs)

    @property
    def canonical(self) -> str:
        """Order-independent string form, used to match keys across runs."""
        if self.is_unknown:
            return "unknown"
        return "|".join(f"{a}={v}" for a, v in sorted(self.pairs))

    @property
    def label(self) -> str:
        """Display form in attribute order, e.g. ``ireland_f``."""
        if self.is_unknown:
            return "unknown"
        return "_".join("".join(v.split()).lower() for v in self.values)

    def project(self, attributes: Sequence[str]) -> "SubgroupKey":
        lookup = dict(self.pairs)
        return SubgroupKey((a, lookup[a]) for a in attributes)

    def _sorted(self):
        return tuple(sorted(self.pairs))

    def __eq__(self, other):
        if not isinstance(other, SubgroupKey):
            return NotImplemented
        return self._sorted() == other._sorted()

    def __hash__(self):
        return hash(self._sorted())

    def __lt__(self, other):
        return self.canonical < other.canonical

    def __repr__(self):
        return f"SubgroupKey({self.label!r})"


@dataclass(frozen=True)
class TrialSet:
    """Parsed trials plus (after :func:`assign_subgroups`) a subgroup per trial.

    ``subgroups`` and ``enroll_speakers`` are aligned with ``records``.
    """

    records: tuple[TrialRecord, ...]
    provenance: Mapping[str, str] = field(default_factory=dict)
    subgroups: tuple[SubgroupKey, ...] | None = None
    enroll_speakers: tuple[str | None, ...] | None = None
    attributes: tuple[str, ...] = ()
    diagnostics: Mapping[str, object] = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @cached_property
    def scores(self) -> np.ndarray:
        return np.fromiter((r.score for r in self.records), dtype=float, count=len(self.records))

    @cached_property
    def is_target(self) -> np.ndarray:
        return np.fromiter((r.is_target for r in self.records), dtype=bool, count=len(self.records))

    def split_scores(self, indices=None) -> tuple[np.ndarray, np.ndarray]:
        """(target scores, nontarget scores), optionally for a subset of trials."""
        scores, labels = self.scores, self.is_target
        if indices is not None:
            scores, labels = scores[indices], labels[indices]
        return scores[labels], scores[~labels]

    def subgroup_of(self, index: int) -> SubgroupKey:
        self._require_subgroups()
        return self.subgroups[index]

    @cached_property
    def subgroup_indices(self) -> dict[SubgroupKey, np.ndarray]:
        """Trial indices per subgroup, keys in canonical order."""
        self._require_subgroups()
        groups = defaultdict(list)
        for i, key in enumerate(self.subgroups):
            groups[key].append(i)
        return {k: np.asarray(groups[k], dtype=np.intp) for k in sorted(groups)}

    def subgroup_counts(self) -> dict[SubgroupKey, tuple[int, int]]:
        """(n_target, n_nontarget) per subgroup."""
        labels = self.is_target
        out = {}
        for key, idx in self.subgroup_indices.items():
            n_tar = int(labels[idx].sum())
            out[key] = (n_tar, len(idx) - n_tar)
        return out

    def subgroup_speakers(self) -> dict[SubgroupKey, int]:
        """Unique enrollment speakers per subgroup."""
        self._require_subgroups()
        speakers = defaultdict(set)
        for key, spk in zip(self.subgroups, self.enroll_speakers):
            if spk is not None:
                speakers[key].add(spk)
        return {k: len(speakers[k]) for k in self.subgroup_indices}

    def _require_subgroups(self):
        if self.subgroups is None:
            raise ValueError("subgroups not assigned; call assign_subgroups first")


def _file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def parse_trial_line(line: str, fmt: TrialFileFormat = TrialFileFormat()) -> TrialRecord:
    tokens = line.split(fmt.delimiter) if fmt.delimiter else line.split()
    tokens = [t.strip() for t in tokens]
    if len(tokens) != len(fmt.columns):
        raise ValueError(f"expected {len(fmt.columns)} columns ({' '.join(fmt.columns)}), got {len(tokens)}")
    cols = dict(zip(fmt.columns, tokens))
    label = cols["label"].lower()
    if label not in _LABEL_TOKENS:
        raise ValueError(f"bad label {cols['label']!r}; expected 1/0 or target/nontarget")
    try:
        score = float(cols["score"])
    except ValueError:
        raise ValueError(f"score {cols['score']!r} is not a number") from None
    if not math.isfinite(score):
        raise ValueError(f"score {cols['score']!r} is not finite")
    return TrialRecord(cols["enroll"], cols["test"], _LABEL_TOKENS[label], score)


def parse_trials(path, fmt: TrialFileFormat = TrialFileFormat()) -> TrialSet:
    """Parse a trial/score file into a :class:`TrialSet` (records only).

    Blank lines are skipped. Raises :class:`TrialParseError` with the line
    number for any malformed line, and for an empty file.
    """
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            try:
                records.append(parse_trial_line(line, fmt))
            except ValueError as exc:
                raise TrialParseError(str(exc), path, lineno, line) from None
    if not records:
        raise TrialParseError("trial file contains no trials", path)
    logger.info("parsed %d trials from %s", len(records), path)
    provenance = {"trials_path": os.fspath(path), "trials_sha256": _file_checksum(path)}
    return TrialSet(tuple(records), provenance)


def parse_metadata(path, delimiter: str = ",") -> dict[str, SpeakerMetadata]:
    """Read speaker metadata, keyed by speaker id in file order.

    Values are compared case-sensitively after trimming whitespace; an
    empty cell means the attribute is unknown for that speaker.
    """
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f, delimiter=delimiter))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise MetadataError(f"{path}: metadata file is empty (missing header)")
    header = [h.strip() for h in rows[0]]
    if header[0].lower() not in _SPEAKER_HEADERS:
        raise MetadataError(
            f"{path}: missing header; first row must start with 'speaker_id', got {rows[0][0]!r}"
        )
    names = header[1:]
    if not names:
        raise MetadataError(f"{path}: header names no attribute columns")
    dupes = [n for n, c in Counter(names).items() if c > 1]
    if dupes or any(not n for n in names):
        raise MetadataError(f"{path}: duplicate or empty attribute names in header: {dupes}")

    out: dict[str, SpeakerMetadata] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MetadataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        speaker = row[0].strip()
        if not speaker:
            raise MetadataError(f"{path}:{lineno}: empty speaker id")
        if speaker in out:
            raise MetadataError(f"{path}:{lineno}: duplicate speaker id {speaker!r}")
        attrs = {n: v.strip() for n, v in zip(names, row[1:]) if v.strip()}
        out[speaker] = SpeakerMetadata(speaker, attrs)
    return out


def _key_for(speaker, metadata, attributes):
    meta = metadata.get(speaker)
    if meta is None:
        return None
    try:
        return SubgroupKey((a, meta.attributes[a]) for a in attributes)
    except KeyError:
        return None


def assign_subgroups(
    trials: TrialSet,
    metadata: Mapping[str, SpeakerMetadata],
    attributes: Sequence[str],
    rule: SpeakerIdRule = DEFAULT_SPEAKER_RULE,
) -> TrialSet:
    """Attach a subgroup to every trial from its enrollment speaker's attributes."""
    attributes = tuple(attributes)
    if not attributes:
        raise ValueError("at least one attribute is required")
    unknown = SubgroupKey.unknown()
    cache: dict[str, SubgroupKey | None] = {}
    keys, speakers = [], []
    missing_speakers: set[str] = set()
    incomplete_speakers: set[str] = set()
    cross_subgroup = 0
    for rec in trials.records:
        spk = speaker_of(rec.enroll, rule)
        if spk not in cache:
            cache[spk] = _key_for(spk, metadata, attributes)
            if cache[spk] is None:
                (missing_speakers if spk not in metadata else incomplete_speakers).add(spk)
        key = cache[spk]
        keys.append(unknown if key is None else key)
        speakers.append(spk)
        # test side is only tallied, never used for the key
        test_spk = speaker_of(rec.test, rule)
        if test_spk not in cache:
            cache[test_spk] = _key_for(test_spk, metadata, attributes)
        if key is not None and cache[test_spk] != key:
            cross_subgroup += 1

    n_unknown = sum(k.is_unknown for k in keys)
    if n_unknown == len(keys):
        raise MetadataError(
            "no trial could be assigned a subgroup: every enrollment speaker is missing "
            f"from the metadata or lacks one of {list(attributes)}"
        )
    warnings = []
    if missing_speakers:
        warnings.append(
            f"{len(missing_speakers)} enrollment speaker(s) absent from metadata; "
            "their trials were routed to 'unknown'"
        )
    if incomplete_speakers:
        warnings.append(
            f"{len(incomplete_speakers)} enrollment speaker(s) lack a selected attribute; "
            "their trials were routed to 'unknown'"
        )
    for w in warnings:
        logger.warning(w)
    diagnostics = {
        "n_trials": len(keys),
        "n_unknown_trials": n_unknown,
        "missing_speakers": sorted(missing_speakers),
        "incomplete_speakers": sorted(incomplete_speakers),
        "test_side_other_subgroup_trials": cross_subgroup,
        "warnings": warnings,
    }
    return replace(
        trials,
        subgroups=tuple(keys),
        enroll_speakers=tuple(speakers),
        attributes=attributes,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class CompositionRow:
    attribute: str
    value: str
    n_speakers: int
    speaker_pct: float
    n_utterances: int
    utterance_pct: float

    @property
    def gap(self) -> float:
        """Utterance-level share minus speaker-level share, in percentage points."""
        return self.utterance_pct - self.speaker_pct


@dataclass(frozen=True)
class CompositionReport:
    n_speakers: int
    n_utterance_occurrences: int
    rows: tuple[CompositionRow, ...]
    top: Mapping[str, tuple[CompositionRow, ...]]

    def for_attribute(self, attribute: str) -> dict[str, CompositionRow]:
        return {r.value: r for r in self.rows if r.attribute == attribute}


def composition_summary(
    trials: TrialSet,
    metadata: Mapping[str, SpeakerMetadata],
    attributes: Sequence[str],
    rule: SpeakerIdRule = DEFAULT_SPEAKER_RULE,
    top_k: int = 3,
) -> CompositionReport:
    """Speaker- and utterance-level representation of each attribute value.

    Speakers are all unique speakers on either side of any trial. Every
    utterance occurrence counts once per trial side. Speakers without a
    value for an attribute are counted under ``unknown``.
    """
    occurrences: Counter[str] = Counter()
    for rec in trials.records:
        occurrences[speaker_of(rec.enroll, rule)] += 1
        occurrences[speaker_of(rec.test, rule)] += 1
    n_spk = len(occurrences)
    n_occ = sum(occurrences.values())

    rows = []
    top = {}
    for attr in attributes:
        spk_count: Counter[str] = Counter()
        utt_count: Counter[str] = Counter()
        for spk, n in occurrences.items():
            meta = metadata.get(spk)
            value = meta.attributes.get(attr, "unknown") if meta else "unknown"
            spk_count[value] += 1
            utt_count[value] += n
        attr_rows = [
            CompositionRow(
                attr,
                value,
                spk_count[value],
                100.0 * spk_count[value] / n_spk,
                utt_count[value],
                100.0 * utt_count[value] / n_occ,
            )
            for value in sorted(spk_count, key=lambda v: (-spk_count[v], -utt_count[v], v))
        ]
        rows.extend(attr_rows)
        top[attr] = tuple(r for r in attr_rows if r.value != "unknown")[:top_k]
    return CompositionReport(n_spk, n_occ, tuple(rows), top)


def write_trials(records: Iterable[TrialRecord], path, fmt: TrialFileFormat = TrialFileFormat()) -> None:
    sep = fmt.delimiter or " "
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            cols = {"label": "1" if r.is_target else "0", "enroll": r.enroll, "test": r.test, "score": repr(r.score)}
            f.write(sep.join(cols[c] for c in fmt.columns) + "\n")


def write_metadata(metadata: Mapping[str, SpeakerMetadata], path, attributes: Sequence[str] | None = None) -> None:
    if attributes is None:
        attributes = []
        for m in metadata.values():
            attributes.extend(a for a in m.attributes if a not in attributes)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["speaker_id", *attributes])
        for spk, m in metadata.items():
            w.writerow([spk, *(m.attributes.get(a, "") for a in attributes)])
