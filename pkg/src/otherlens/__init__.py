"""Tools for measuring othering language in group conversations.

Submodules: corpus (loading and sampling), labels (category vectors and
gold-set handling), agreement (chance-corrected reliability), llm_client
(prompted annotation over a chat-completions wire), rda (confidence
thresholding), alignment (annotator gates and training export), network
(channel graph and centrality), stats (exact reference statistics),
timeline (daily proportions and crisis windows), moral (device-category
grids), fixtures (planted synthetic corpus), cli (pipeline commands).
"""

__version__ = "0.1.0"

from .labels import CATEGORIES, LABEL_KEYS, LabelVector
from .corpus import Corpus, Post, Channel, MoralVector, ingest_jsonl

__all__ = [
    "__version__",
    "CATEGORIES",
    "LABEL_KEYS",
    "LabelVector",
    "Corpus",
    "Post",
    "Channel",
    "MoralVector",
    "ingest_jsonl",
]
