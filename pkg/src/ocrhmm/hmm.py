"""Word-level HMMs over the 26 letters and Viterbi error correction.

Three decoders share one dynamic programme:

* mode 1 - initial probabilities, transition matrix, emissions;
* mode 2 - mode 1 plus a terminal factor ``P_end(last letter)``;
* mode 3 - the last transition of the word uses a separate matrix
  estimated from (penultimate, last) letter pairs only.

Everything runs in log space with ``log 0 = -inf``; ties in the arg-max go
to the lower letter index.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)

N = 26
MODES = (1, 2, 3)
END_MODELS = ("marginal", "conditional")


class DecodeError(ValueError):
    pass


def _words_as_letters(words):
    out = []
    for w in words:
        letters = w.letters if hasattr(w, "letters") else w
        if isinstance(letters, str):
            letters = [ord(ch) - ord("a") for ch in letters]
        out.append(list(letters))
    return out


def _row_normalize(counts):
    sums = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)


def _normalize(counts):
    total = counts.sum()
    return counts / total if total > 0 else counts


def estimate_transition_matrix(words, alpha=0.0):
    """Within-word adjacent letter pairs, rows normalised; unseen rows stay zero."""
    counts = np.zeros((N, N))
    for letters in _words_as_letters(words):
        for a, b in zip(letters, letters[1:]):
            counts[a, b] += 1
    if alpha:
        counts[counts.sum(axis=1) > 0] += alpha
    return _row_normalize(counts)


def estimate_initial_probs(words):
    counts = np.zeros(N)
    for letters in _words_as_letters(words):
        counts[letters[0]] += 1
    return _normalize(counts)


def estimate_final_probs(words):
    counts = np.zeros(N)
    for letters in _words_as_letters(words):
        counts[letters[-1]] += 1
    return _normalize(counts)


def estimate_final_transition_matrix(words, alpha=0.0):
    """Only (penultimate -> last) letter pairs, rows normalised."""
    counts = np.zeros((N, N))
    for letters in _words_as_letters(words):
        if len(letters) >= 2:
            counts[letters[-2], letters[-1]] += 1
    if not counts.any():
        logger.warning("no words of length >= 2; final transition matrix is zero")
    if alpha:
        counts[counts.sum(axis=1) > 0] += alpha
    return _row_normalize(counts)


def estimate_end_conditionals(words):
    """``P(word ends | letter)``: final occurrences over all occurrences of each letter."""
    ends = np.zeros(N)
    seen = np.zeros(N)
    for letters in _words_as_letters(words):
        for c in letters:
            seen[c] += 1
        ends[letters[-1]] += 1
    return np.divide(ends, seen, out=np.zeros(N), where=seen > 0)


@dataclass
class HmmModel:
    transition: np.ndarray
    initial: np.ndarray
    final_dist: np.ndarray
    final_transition: np.ndarray | None = None
    end_model: str = "marginal"
    end_conditional: np.ndarray | None = None

    def end_probs(self):
        """Terminal factor for mode 2 (the 27th state of the extended chain)."""
        if self.end_model == "conditional":
            return self.end_conditional
        return self.final_dist

    def to_json(self):
        doc = {
            "transition": self.transition.tolist(),
            "initial": self.initial.tolist(),
            "final_dist": self.final_dist.tolist(),
            "final_transition": None if self.final_transition is None else self.final_transition.tolist(),
            "end_model": self.end_model,
            "end_conditional": None if self.end_conditional is None else self.end_conditional.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        arr = lambda v: None if v is None else np.array(v, dtype=np.float64)  # noqa: E731
        return cls(
            arr(doc["transition"]),
            arr(doc["initial"]),
            arr(doc["final_dist"]),
            arr(doc.get("final_transition")),
            doc.get("end_model", "marginal"),
            arr(doc.get("end_conditional")),
        )


def fit_hmm(words, alpha=0.0, end_model="marginal") -> HmmModel:
    if end_model not in END_MODELS:
        raise ValueError(f"end_model must be one of {END_MODELS}")
    words = _words_as_letters(words)
    if not words:
        raise ValueError("empty training corpus")
    return HmmModel(
        transition=estimate_transition_matrix(words, alpha),
        initial=estimate_initial_probs(words),
        final_dist=estimate_final_probs(words),
        final_transition=estimate_final_transition_matrix(words, alpha),
        end_model=end_model,
        end_conditional=estimate_end_conditionals(words),
    )


@dataclass
class DecodedWord:
    letters: list
    log_likelihood: float
    fallback: bool = False


def _log(p):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(p, dtype=np.float64))


def decode_tables(model: HmmModel, length: int, mode: int):
    """Log tables ``(initial, transition, last transition, end factor)`` for a word."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    log_a = _log(model.transition)
    log_pi = _log(model.initial)
    zero_end = np.zeros(len(model.initial))
    if mode == 1:
        return log_pi, log_a, log_a, zero_end
    if mode == 2:
        return log_pi, log_a, log_a, _log(model.end_probs())
    if length == 1:
        # no penultimate letter: fall back to the final-letter distribution
        return log_pi, log_a, log_a, _log(model.final_dist)
    return log_pi, log_a, _log(model.final_transition), zero_end


def path_score(model: HmmModel, emissions, letters, mode):
    """Log score of one letter sequence under the decoder of ``mode``."""
    log_e = _log(np.asarray(emissions).T)
    log_pi, log_a, log_last, log_end = decode_tables(model, len(letters), mode)
    s = log_pi[letters[0]] + log_e[0, letters[0]]
    for t in range(1, len(letters)):
        trans = log_last if t == len(letters) - 1 else log_a
        s += trans[letters[t - 1], letters[t]] + log_e[t, letters[t]]
    return float(s + log_end[letters[-1]])


def viterbi_decode(model: HmmModel, emissions, mode=1) -> DecodedWord:
    """Most likely letter sequence for one word.

    ``emissions`` is ``(26, L)``: the word's emission columns in order.  If
    every path has probability zero the word falls back to the per-column
    emission arg-max.
    """
    emissions = np.asarray(emissions, dtype=np.float64)
    if emissions.ndim != 2 or emissions.shape[1] < 1:
        raise ValueError("need a (26, L) emission block with L >= 1")
    length = emissions.shape[1]
    log_e = np.ascontiguousarray(_log(emissions.T))
    tables = [np.ascontiguousarray(t) for t in decode_tables(model, length, mode)]
    path, score = kernels.viterbi(tables[0], tables[1], tables[2], log_e, tables[3])
    if not np.isfinite(score):
        logger.debug("no finite path for a word of length %d (mode %d); using emission arg-max", length, mode)
        return DecodedWord(np.argmax(emissions, axis=0).tolist(), float("-inf"), fallback=True)
    return DecodedWord([int(c) for c in path], float(score))


def correct_words(model: HmmModel, emissions, word_lengths, mode=1) -> list:
    """Decode every word from consecutive emission columns.

    ``word_lengths`` may be a list of ints or of word objects; the words must
    cover the emission columns exactly, in order.
    """
    emissions = np.asarray(emissions)
    lengths = [n if isinstance(n, (int, np.integer)) else len(n) for n in word_lengths]
    if sum(lengths) != emissions.shape[1]:
        raise DecodeError(f"words cover {sum(lengths)} samples but there are {emissions.shape[1]} emission columns")
    out = []
    start = 0
    for n in lengths:
        out.append(viterbi_decode(model, emissions[:, start : start + n], mode))
        start += n
    fallbacks = sum(d.fallback for d in out)
    if fallbacks:
        logger.info("mode %d: %d of %d words fell back to emission arg-max", mode, fallbacks, len(out))
    return out


def flatten(decoded):
    return np.array([c for d in decoded for c in d.letters], dtype=np.int64)
