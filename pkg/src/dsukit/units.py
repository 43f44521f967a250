"""Unit sequences: deduplication, byte-pair encoding, and the bit-rate metric.

Unit files are UTF-8 text, one utterance per line: `id<TAB>u0 u1 u2 ...`
(an empty sequence leaves nothing after the tab).  A BPE model file is
text as well: a `base_vocab <n>` header line followed by one merge per
line, `left right new`, in training order.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from itertools import groupby
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class UnitSequence:
    utt_id: str
    units: tuple[int, ...]
    duration_s: float

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(int(u) for u in self.units))
        if not self.duration_s > 0:
            raise DataError(f"{self.utt_id}: duration must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class BpeModel:
    merges: tuple[tuple[int, int, int], ...]
    base_vocab: int

    @property
    def vocab_size(self) -> int:
        return self.base_vocab + len(self.merges)


def deduplicate(s: UnitSequence) -> UnitSequence:
    """Collapse each run of equal adjacent units to a single occurrence."""
    return replace(s, units=tuple(u for u, _ in groupby(s.units)))


def _merge_once(units: tuple[int, ...], left: int, right: int, new: int) -> tuple[int, ...]:
    out = []
    i = 0
    n = len(units)
    while i < n:
        if i + 1 < n and units[i] == left and units[i + 1] == right:
            out.append(new)
            i += 2
        else:
            out.append(units[i])
            i += 1
    return tuple(out)


def _pair_counts(seqs: Iterable[tuple[int, ...]]) -> Counter:
    counts: Counter = Counter()
    for seq in seqs:
        for pair in zip(seq, seq[1:]):
            counts[pair] += 1
    return counts


def fit_bpe(corpus: list[UnitSequence], vocab_size: int, base_vocab: int) -> BpeModel:
    """Greedy most-frequent-pair merging until vocab_size or no pair repeats.

    Frequency ties prefer the smaller left symbol, then the smaller right
    symbol.  Merges never cross utterance boundaries; new symbol ids are
    consecutive starting at base_vocab.
    """
    if base_vocab < 1:
        raise ConfigError(f"base vocabulary must be >= 1, got {base_vocab}")
    if vocab_size <= base_vocab:
        raise ConfigError(f"vocab_size {vocab_size} must exceed base vocabulary {base_vocab}")
    seqs = []
    for s in corpus:
        bad = [u for u in s.units if not 0 <= u < base_vocab]
        if bad:
            raise DataError(f"{s.utt_id}: unit {bad[0]} outside base vocabulary {base_vocab}")
        seqs.append(s.units)
    merges: list[tuple[int, int, int]] = []
    while base_vocab + len(merges) < vocab_size:
        counts = _pair_counts(seqs)
        if not counts:
            break
        (left, right), best = min(counts.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
        if best < 2:
            break
        new = base_vocab + len(merges)
        merges.append((left, right, new))
        seqs = [_merge_once(seq, left, right, new) for seq in seqs]
    return BpeModel(merges=tuple(merges), base_vocab=base_vocab)


def apply_bpe(m: BpeModel, s: UnitSequence) -> UnitSequence:
    """Apply merges in training order, each exhaustively left to right."""
    for u in s.units:
        if not 0 <= u < m.base_vocab:
            raise DataError(f"{s.utt_id}: unit {u} outside base vocabulary {m.base_vocab}")
    units = s.units
    for left, right, new in m.merges:
        units = _merge_once(units, left, right, new)
    return replace(s, units=units)


def expand_bpe(m: BpeModel, s: UnitSequence) -> UnitSequence:
    """Expand merged symbols back to base units (inverse of apply_bpe)."""
    table: dict[int, tuple[int, ...]] = {}
    for left, right, new in m.merges:
        table[new] = table.get(left, (left,)) + table.get(right, (right,))
    out: list[int] = []
    for u in s.units:
        if u in table:
            out.extend(table[u])
        elif 0 <= u < m.base_vocab:
            out.append(u)
        else:
            raise DataError(f"{s.utt_id}: unit {u} outside vocabulary {m.vocab_size}")
    return replace(s, units=tuple(out))


def bitrate_per_utterance(s: UnitSequence, vocab_size: int) -> float:
    """N * log2(V) / U bits per second; an empty sequence rates 0."""
    if vocab_size < 2:
        raise ConfigError(f"vocab_size must be >= 2, got {vocab_size}")
    return len(s.units) * math.log2(vocab_size) / s.duration_s


def bitrate(sequences: list[UnitSequence], vocab_size: int) -> float:
    """Mean of per-utterance bit-rates over all sequences."""
    if not sequences:
        raise ConfigError("bitrate: empty sequence list")
    rates = [bitrate_per_utterance(s, vocab_size) for s in sequences]
    return sum(rates) / len(rates)


def write_units(sequences: list[UnitSequence], path: str | Path) -> None:
    lines = [f"{s.utt_id}\t{' '.join(str(u) for u in s.units)}" for s in sequences]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_units(path: str | Path, durations: Mapping[str, float] | None = None) -> list[UnitSequence]:
    """Read a unit file; durations (seconds, by utterance id) default to 1.0.

    Pass the manifest durations whenever the sequences feed the bit-rate.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read units {path}: {e}") from e
    out = []
    for lineno, line in enumerate(lines, start=1):
        if not line:
            continue
        utt_id, _, rest = line.partition("\t")
        if not utt_id:
            raise DataError(f"{path}:{lineno}: missing utterance id")
        try:
            units = tuple(int(tok) for tok in rest.split())
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: {e}") from e
        if durations is not None:
            if utt_id not in durations:
                raise DataError(f"{path}:{lineno}: utterance {utt_id!r} missing from manifest")
            dur = durations[utt_id]
        else:
            dur = 1.0
        out.append(UnitSequence(utt_id=utt_id, units=units, duration_s=dur))
    return out


def save_bpe(m: BpeModel, path: str | Path) -> None:
    lines = [f"base_vocab {m.base_vocab}"]
    lines += [f"{left} {right} {new}" for left, right, new in m.merges]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_bpe(path: str | Path) -> BpeModel:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read bpe model {path}: {e}") from e
    lines = [ln for ln in lines if ln.strip()]
    if not lines or not lines[0].startswith("base_vocab "):
        raise DataError(f"{path}: missing 'base_vocab <n>' header line")
    try:
        base_vocab = int(lines[0].split()[1])
    except (IndexError, ValueError) as e:
        raise DataError(f"{path}: bad header: {e}") from e
    merges = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 'left right new', got {line!r}")
        left, right, new = (int(p) for p in parts)
        if new != base_vocab + len(merges):
            raise DataError(f"{path}:{lineno}: merge ids must be consecutive, got {new}")
        merges.append((left, right, new))
    return BpeModel(merges=tuple(merges), base_vocab=base_vocab)
