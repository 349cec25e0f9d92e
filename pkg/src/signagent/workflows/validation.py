"""Output validators: token conservation and exact-partition checks."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping


def _expand(counter: Counter) -> list[str]:
    return sorted(counter.elements())


@dataclass
class TokenVerdict:
    valid: bool
    missing: list[str] = field(default_factory=list)
    extra: list[str] = field(default_factory=list)
    input_count: int = 0
    output_count: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "valid": self.valid,
            "missing": list(self.missing),
            "extra": list(self.extra),
            "input_count": self.input_count,
            "output_count": self.output_count,
        }


def validate_tokens(tokens: Iterable[str], output: Iterable[str]) -> TokenVerdict:
    """Valid iff the output is a reordering of the input multiset.

    ``missing`` and ``extra`` keep multiplicity: T = (a, b, c) against output
    (a, a, b, c) reports extra = [a].
    """
    t, o = Counter(tokens), Counter(output)
    missing, extra = t - o, o - t
    n_in, n_out = sum(t.values()), sum(o.values())
    return TokenVerdict(not missing and not extra and n_in == n_out, _expand(missing), _expand(extra), n_in, n_out)


@dataclass
class PartitionVerdict:
    valid: bool
    duplicates: list[str] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    extra: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "valid": self.valid,
            "duplicates": list(self.duplicates),
            "missing": list(self.missing),
            "extra": list(self.extra),
        }


def flatten_assignment(assigned: Iterable[str] | Mapping[str, Iterable[str]]) -> list[str]:
    if isinstance(assigned, Mapping):
        return [k for members in assigned.values() for k in members]
    return list(assigned)


def validate_partition(baseline_keys: Iterable[str], assigned: Iterable[str] | Mapping[str, Iterable[str]]) -> PartitionVerdict:
    """Valid iff every baseline key is assigned exactly once and nothing else is.

    ``assigned`` is the multiset of assigned keys, or a cluster -> members map.
    """
    s = set(baseline_keys)
    counts = Counter(flatten_assignment(assigned))
    dup = sorted(k for k, n in counts.items() if n > 1)
    missing = sorted(s - set(counts))
    extra = sorted(set(counts) - s)
    return PartitionVerdict(not dup and not missing and not extra, dup, missing, extra)
