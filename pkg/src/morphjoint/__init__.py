"""Joint morphological disambiguation toolkit.

Word-level multitask tagging of closed-class morphological features plus
character-level lemmatization and diacritization through a shared encoder
and two attention decoders, with optional analyzer-backed analysis ranking.
"""

__version__ = "0.1.0"
