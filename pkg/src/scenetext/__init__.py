"""Parse 3D indoor scenes into structured text for language models.

Pipeline: scene boxes -> spatial relation graph -> captions and relation
sentences -> self-reflection -> question-conditioned selection -> prompt.
"""

__version__ = "0.1.0"
