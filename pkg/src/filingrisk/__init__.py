"""End-to-end bankruptcy-risk pipeline over corporate 10-K filings."""

__version__ = "0.1.0"

from . import corpus, ensemble, evaluation, features, labeling, linkage, llm, models, synth

__all__ = [
    "__version__",
    "corpus",
    "ensemble",
    "evaluation",
    "features",
    "labeling",
    "linkage",
    "llm",
    "models",
    "synth",
]
