# evaluation/__init__.py
"""Evaluation package for SAGE"""

from .codebleu import CodeBleuScore, codebleu
from .corpus import CorpusSample, evaluate_corpus, load_corpus, rate_corpus, rate_solving, report_to_json
from .substantiveness import SubstantivenessReport, assess_substantiveness

__all__ = [
    'CodeBleuScore',
    'CorpusSample',
    'SubstantivenessReport',
    'assess_substantiveness',
    'codebleu',
    'evaluate_corpus',
    'load_corpus',
    'rate_corpus',
    'rate_solving',
    'report_to_json'
]
