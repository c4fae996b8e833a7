"""glossa: a workbench for bootstrapping POS taggers for very
low-resource languages.

Supervised (CRF, bi-LSTM), semi-supervised (label propagation +
dictionary-constrained EM-HMM) and cross-lingual-projection taggers,
plus a narrative-level active-learning annotation loop with an HTTP
annotation service.
"""

__version__ = "0.1.0"

from .tags import Tag, parse_tag, ATOMIC_LABELS  # noqa: F401
from .corpus import normalize, tokenize, Sentence, Narrative, Corpus  # noqa: F401
