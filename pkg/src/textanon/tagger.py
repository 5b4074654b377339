"""Interface every sequence-tagging backend implements.

The anonymisation pipeline only needs ``tag``; the CRF adapter lives in
:mod:`textanon.crf` (:class:`~textanon.crf.CrfTagger`).
"""
from __future__ import annotations

from typing import Protocol, runtime_checkable

from .corpus import Sentence


@runtime_checkable
class SequenceTagger(Protocol):
    def tag(self, sentence: Sentence) -> list[str]:
        """Return one BIO label per token of ``sentence``."""
        ...
