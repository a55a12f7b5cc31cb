"""raretag: sequence-labeling toolkit for rare-disease NER.

Corpus ingestion (Brat standoff -> IOB2), a feature-based linear-chain
CRF, BiLSTM and BiLSTM-CRF taggers, and token-/entity-level evaluation.
"""

__version__ = "0.1.0"
