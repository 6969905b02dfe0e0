"""Task-scoring metrics used as the fitness signal and for reporting.

Everything in this module is a pure function of its arguments: no I/O,
no global state, safe to call concurrently.

Conventions (fixed here because upstream task definitions leave them
open): string-structure tasks are scored on character tokens, captions
on lowercased whitespace tokens; BLEU is sentence-level with add-one
smoothing; the fingerprint is a hashed character n-gram stand-in for
real chemical fingerprints and is labeled as such in reports.
"""

import math
import warnings
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field

from .errors import ConfigurationError

TOKEN_MODES = ("character", "whitespace")

METRIC_IDS = (
    "exact",
    "bleu2",
    "bleu4",
    "rouge1",
    "rouge2",
    "rougeL",
    "levenshtein",
    "validity",
    "tanimoto",
    "accuracy",
)

TASK_KINDS = (
    "molecule_design",
    "captioning",
    "reaction_prediction",
    "property_prediction",
)

#: metrics where larger is worse (distances); everything else lies in [0, 1]
DISTANCE_METRICS = ("levenshtein",)

FINGERPRINT_LABEL = "hashed-ngram-standin(n=2..4,width=1024)"
VALIDITY_LABEL = "smiles-lite-standin"


@dataclass(frozen=True)
class TokenSequence:
    """A tokenized text plus the mode that produced it."""

    tokens: tuple[str, ...]
    mode: str

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def tokenize(text: str, mode: str) -> TokenSequence:
    """Split ``text`` into tokens.

    ``character`` yields one token per character (concatenating them
    reproduces the input); ``whitespace`` splits on runs of whitespace
    and never yields empty tokens.
    """
    if mode == "character":
        return TokenSequence(tuple(text), mode)
    if mode == "whitespace":
        return TokenSequence(tuple(text.split()), mode)
    raise ConfigurationError(f"unknown tokenization mode {mode!r}")


def _tokens(seq) -> tuple[str, ...]:
    if isinstance(seq, TokenSequence):
        return seq.tokens
    return tuple(seq)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate, reference, max_n: int = 2, smoothing: str = "add_one") -> float:
    """Sentence-level BLEU: geometric mean of modified n-gram precisions
    for n = 1..max_n, times the brevity penalty.

    ``add_one`` smoothing adds 1 to both the clipped-match numerator and
    the candidate-count denominator of every precision.  An empty
    candidate scores 0 under either smoothing.
    """
    if max_n < 1:
        raise ConfigurationError(f"max_n must be >= 1, got {max_n}")
    if smoothing not in ("none", "add_one"):
        raise ConfigurationError(f"unknown smoothing {smoothing!r}")
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        matched = sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
        total = sum(cand_counts.values())
        if smoothing == "add_one":
            matched, total = matched + 1, total + 1
        if matched == 0 or total == 0:
            return 0.0
        log_sum += math.log(matched / total)
    brevity = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_sum / max_n)


def rouge_n(candidate, reference, n: int = 1) -> tuple[float, float, float]:
    """N-gram multiset overlap as (precision, recall, f1)."""
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    cand_counts = _ngram_counts(_tokens(candidate), n)
    ref_counts = _ngram_counts(_tokens(reference), n)
    overlap = sum((cand_counts & ref_counts).values())
    cand_total = sum(cand_counts.values())
    ref_total = sum(ref_counts.values())
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return precision, recall, _f1(precision, recall)


def rouge_l(candidate, reference) -> tuple[float, float, float]:
    """Longest-common-subsequence overlap as (precision, recall, f1)."""
    cand = _tokens(candidate)
    ref = _tokens(reference)
    if not cand or not ref:
        return 0.0, 0.0, 0.0
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return precision, recall, _f1(precision, recall)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # standard two-row dynamic program
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def levenshtein(a: str, b: str) -> int:
    """Minimum number of unit-cost insertions, deletions, and
    substitutions transforming ``a`` into ``b``."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cost = 0 if x == y else 1
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def _strip_normalizer(text: str) -> str:
    return text.strip()


def exact_match(pred: str, gold: str, normalizer=None) -> bool:
    """Equality after normalizing both sides.

    The default normalizer strips surrounding whitespace only.  If a
    custom normalizer raises on either side the match is False and a
    warning is emitted.
    """
    normalizer = normalizer or _strip_normalizer
    try:
        return normalizer(pred) == normalizer(gold)
    except Exception as exc:  # noqa: BLE001 - plug-in code may raise anything
        warnings.warn(f"normalizer failed, scoring exact=False: {exc!r}", stacklevel=2)
        return False


# --------------------------------------------------------------------------
# fingerprints


@dataclass(frozen=True)
class Bitset:
    """A fixed-width bit vector, stored as the set of set-bit indices."""

    width: int
    set_bits: frozenset[int]

    def __post_init__(self):
        if self.width <= 0:
            raise ConfigurationError(f"Bitset width must be positive, got {self.width}")
        bad = [i for i in self.set_bits if not 0 <= i < self.width]
        if bad:
            raise ConfigurationError(f"bit indices out of range for width {self.width}: {bad[:4]}")


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _fnv1a64(data: bytes) -> int:
    # FNV-1a, 64-bit: fixed, published, non-cryptographic
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def hashed_fingerprint(text: str, n_lo: int = 2, n_hi: int = 4, width: int = 1024) -> Bitset:
    """Hashed character n-gram fingerprint.

    Every n-gram with n in [n_lo, n_hi] sets bit ``fnv1a64(ngram) % width``.
    This is a declared stand-in for real chemical fingerprints; see
    ``FINGERPRINT_LABEL``.  External fingerprint providers can be plugged
    in through the toolkit's external-command protocol instead.
    """
    if not 1 <= n_lo <= n_hi:
        raise ConfigurationError(f"need 1 <= n_lo <= n_hi, got ({n_lo}, {n_hi})")
    if width <= 0 or width & (width - 1):
        raise ConfigurationError(f"width must be a power of two, got {width}")
    bits = set()
    for n in range(n_lo, n_hi + 1):
        for i in range(len(text) - n + 1):
            bits.add(_fnv1a64(text[i : i + n].encode("utf-8")) & (width - 1))
    return Bitset(width, frozenset(bits))


def tanimoto(a: Bitset, b: Bitset) -> float:
    """|A ∩ B| / |A ∪ B| over set bits; 1.0 when both sets are empty."""
    if a.width != b.width:
        raise ConfigurationError(
            f"incomparable fingerprints: width {a.width} vs {b.width}"
        )
    union = a.set_bits | b.set_bits
    if not union:
        return 1.0
    return len(a.set_bits & b.set_bits) / len(union)


# --------------------------------------------------------------------------
# SMILES-lite validity (stand-in checker; see VALIDITY_LABEL)

_TWO_CHAR_ATOMS = ("Cl", "Br")
_ONE_CHAR_ATOMS = frozenset("BCNOPSFI" + "bcnops")
_BONDS = frozenset("-=#$:/\\")


class _LexError(Exception):
    pass


def _smiles_lite_lex(text: str) -> list[str]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if text.startswith(_TWO_CHAR_ATOMS, i):
            tokens.append(text[i : i + 2])
            i += 2
        elif ch == "[":
            end = text.find("]", i + 1)
            if end == -1 or end == i + 1:
                raise _LexError("unbalanced or empty bracket atom")
            if "[" in text[i + 1 : end]:
                raise _LexError("nested bracket")
            tokens.append(text[i : end + 1])
            i = end + 1
        elif ch == "%":
            if not text[i + 1 : i + 3].isdigit():
                raise _LexError("ring closure %nn needs two digits")
            tokens.append(text[i : i + 3])
            i += 3
        elif ch in _ONE_CHAR_ATOMS or ch in _BONDS or ch in "()." or ch.isdigit():
            tokens.append(ch)
            i += 1
        elif ch == "]":
            raise _LexError("unmatched closing bracket")
        else:
            raise _LexError(f"character {ch!r} outside the token set")
    return tokens


def external_validator(command, timeout_s: float = 10.0):
    """Adapt an external validity checker speaking the one-line-in,
    one-line-out command protocol into a ``text -> bool`` callable.

    The command's first output line is truthy when it is one of
    ``1/true/valid/yes`` (case-insensitive).
    """
    from .toolkit import call_line_protocol

    def check(text: str) -> bool:
        return call_line_protocol(command, text, timeout_s).strip().casefold() in (
            "1", "true", "valid", "yes",
        )

    return check


def smiles_lite_valid(text: str) -> bool:
    """Surface-level molecular-string check: balanced parentheses and
    brackets, every ring-closure label used an even number of times, and
    all tokens drawn from the lite token set.  Not a chemistry validator;
    a real one plugs in through ``external_validator``.
    """
    try:
        tokens = _smiles_lite_lex(text)
    except _LexError:
        return False
    depth = 0
    ring_counts: Counter = Counter()
    for tok in tokens:
        if tok == "(":
            depth += 1
        elif tok == ")":
            depth -= 1
            if depth < 0:
                return False
        elif tok.isdigit() or tok.startswith("%"):
            ring_counts[tok.lstrip("%").lstrip("0") or "0"] += 1
    if depth != 0:
        return False
    return all(count % 2 == 0 for count in ring_counts.values())


# --------------------------------------------------------------------------
# per-task bundles and aggregation


@dataclass(frozen=True)
class MetricValue:
    """A single validated metric observation."""

    metric_id: str
    value: float

    def __post_init__(self):
        if self.metric_id not in METRIC_IDS:
            raise ConfigurationError(f"unknown metric id {self.metric_id!r}")
        if self.metric_id in DISTANCE_METRICS:
            if self.value < 0 or self.value != int(self.value):
                raise ConfigurationError(
                    f"{self.metric_id} must be a non-negative integer, got {self.value}"
                )
        elif not 0.0 <= self.value <= 1.0:
            raise ConfigurationError(
                f"{self.metric_id} must lie in [0, 1], got {self.value}"
            )


def _normalize_label(text: str) -> str:
    return text.strip().casefold()


def score_instance(task_kind: str, pred: str, gold: str) -> dict[str, float]:
    """Score one prediction against its gold answer with the metric
    bundle of the task kind.

    molecule_design / reaction_prediction -> exact, bleu2, levenshtein,
    validity, tanimoto (character tokens); captioning -> bleu2, bleu4,
    rouge1, rouge2, rougeL (lowercased whitespace tokens, f1 for rouge);
    property_prediction -> accuracy after case-insensitive label
    normalization.
    """
    if task_kind in ("molecule_design", "reaction_prediction"):
        pred_tokens = tokenize(pred, "character")
        gold_tokens = tokenize(gold, "character")
        return {
            "exact": 1.0 if exact_match(pred, gold) else 0.0,
            "bleu2": bleu(pred_tokens, gold_tokens, max_n=2, smoothing="add_one"),
            "levenshtein": float(levenshtein(pred, gold)),
            "validity": 1.0 if smiles_lite_valid(pred) else 0.0,
            "tanimoto": tanimoto(hashed_fingerprint(pred), hashed_fingerprint(gold)),
        }
    if task_kind == "captioning":
        pred_tokens = tokenize(pred.casefold(), "whitespace")
        gold_tokens = tokenize(gold.casefold(), "whitespace")
        return {
            "bleu2": bleu(pred_tokens, gold_tokens, max_n=2, smoothing="add_one"),
            "bleu4": bleu(pred_tokens, gold_tokens, max_n=4, smoothing="add_one"),
            "rouge1": rouge_n(pred_tokens, gold_tokens, 1)[2],
            "rouge2": rouge_n(pred_tokens, gold_tokens, 2)[2],
            "rougeL": rouge_l(pred_tokens, gold_tokens)[2],
        }
    if task_kind == "property_prediction":
        return {"accuracy": 1.0 if _normalize_label(pred) == _normalize_label(gold) else 0.0}
    raise ConfigurationError(f"unknown task kind {task_kind!r}")


def zero_scores(task_kind: str, gold: str) -> dict[str, float]:
    """Worst-case scores for an instance (reserve answers, tool failures).

    All quality metrics get 0; the edit distance, being lower-better, is
    set to the cost of producing the gold answer from nothing.
    """
    scores = {key: 0.0 for key in score_instance(task_kind, gold, gold)}
    if "levenshtein" in scores:
        scores["levenshtein"] = float(len(gold))
    return scores


@dataclass(frozen=True)
class ScoreReport:
    """Aggregate metric means for a candidate over a validation set."""

    means: dict[str, float]
    n_instances: int
    fitness_metric: str
    fitness: float
    failures: int = 0
    labels: tuple[str, ...] = (FINGERPRINT_LABEL, VALIDITY_LABEL)
    per_instance: tuple[dict, ...] | None = field(default=None, repr=False)


def aggregate(
    instance_scores: Sequence[dict[str, float]],
    fitness_metric: str,
    failures: int = 0,
    keep_instances: bool = False,
) -> ScoreReport:
    """Arithmetic mean per metric over per-instance score maps."""
    if not instance_scores:
        raise ConfigurationError("cannot aggregate an empty score list")
    keys = set(instance_scores[0])
    for scores in instance_scores[1:]:
        if set(scores) != keys:
            raise ConfigurationError(
                f"heterogeneous metric keys: {sorted(keys)} vs {sorted(scores)}"
            )
    if fitness_metric not in keys:
        raise ConfigurationError(
            f"fitness metric {fitness_metric!r} absent from instance scores {sorted(keys)}"
        )
    n = len(instance_scores)
    means = {key: sum(s[key] for s in instance_scores) / n for key in sorted(keys)}
    return ScoreReport(
        means=means,
        n_instances=n,
        fitness_metric=fitness_metric,
        fitness=means[fitness_metric],
        failures=failures,
        per_instance=tuple(instance_scores) if keep_instances else None,
    )
