"""Dependency-guided NER tagger: Tree-LSTM and BiLSTM encoders, relative and
global attention, linear-chain CRF, on a small numpy autodiff engine."""

__version__ = "0.1.0"
